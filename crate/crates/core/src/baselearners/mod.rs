//! First-level forecasters and the prediction matrix they feed to stacking.

mod ar;
mod forecasters;
mod input;
mod lasso;
mod tree;

pub use ar::{fit_ar, ArModel};
pub use forecasters::{
    build_stacking_input, calendar_features, default_models, ArForecaster, FirstLevelModel, LassoForecaster,
    TreeForecaster,
};
pub use input::{import_external_predictions, ImportedPredictions, StackingInput};
pub use lasso::{fit_lasso, lasso_objective, soft_threshold, LassoFit};
pub use tree::{fit_tree_ensemble, EnsembleMode, TreeEnsemble, TreeEnsembleConfig};

use chrono::NaiveDate;
use thiserror::Error;

use crate::features::FeatureError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaseLearnerError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("lag design of AR({p}) is singular; try a smaller order")]
    Singular { p: usize },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("model `{model}` produced a non-finite prediction on {date}")]
    NonFinite { model: String, date: NaiveDate },
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}
