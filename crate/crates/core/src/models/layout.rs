use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Map from an unconstrained coordinate to the model's parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    /// `value = lower + exp(theta)`; `lower = 0` is the plain positivity constraint.
    LogForPositive { lower: f64 },
}

impl Transform {
    pub const POSITIVE: Transform = Transform::LogForPositive { lower: 0.0 };

    pub fn constrain(self, theta: f64) -> f64 {
        match self {
            Transform::Identity => theta,
            Transform::LogForPositive { lower } => lower + theta.exp(),
        }
    }

    pub fn unconstrain(self, value: f64) -> f64 {
        match self {
            Transform::Identity => value,
            Transform::LogForPositive { lower } => (value - lower).ln(),
        }
    }

    /// `d value / d theta`, which is also `exp(log |Jacobian|)`.
    pub fn derivative(self, theta: f64) -> f64 {
        match self {
            Transform::Identity => 1.0,
            Transform::LogForPositive { .. } => theta.exp(),
        }
    }

    pub fn log_jacobian(self, theta: f64) -> f64 {
        match self {
            Transform::Identity => 0.0,
            Transform::LogForPositive { .. } => theta,
        }
    }

    pub fn is_identity(self) -> bool {
        matches!(self, Transform::Identity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterBlock {
    pub name: String,
    pub size: usize,
    pub transform: Transform,
    /// Optional per-element labels, e.g. store ids for the intercept block.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(skip)]
    offset: usize,
}

impl ParameterBlock {
    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.size
    }

    fn element_name(&self, i: usize) -> String {
        if self.size == 1 && self.labels.is_none() {
            return self.name.clone();
        }
        match &self.labels {
            Some(labels) => format!("{}[{}]", self.name, labels[i]),
            None => format!("{}[{}]", self.name, i + 1),
        }
    }
}

/// Ordered named blocks that partition the parameter vector.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawLayout")]
pub struct ParameterLayout {
    blocks: Vec<ParameterBlock>,
    total_dim: usize,
}

impl ParameterLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// A single identity block named `theta`.
    pub fn unnamed(dim: usize) -> Self {
        let mut layout = Self::new();
        if dim > 0 {
            layout
                .push("theta", dim, Transform::Identity)
                .expect("fresh layout");
        }
        layout
    }

    pub fn push(&mut self, name: &str, size: usize, transform: Transform) -> Result<&mut Self, ModelError> {
        self.push_block(name, size, transform, None)
    }

    pub fn push_labeled(
        &mut self,
        name: &str,
        labels: Vec<String>,
        transform: Transform,
    ) -> Result<&mut Self, ModelError> {
        let size = labels.len();
        self.push_block(name, size, transform, Some(labels))
    }

    fn push_block(
        &mut self,
        name: &str,
        size: usize,
        transform: Transform,
        labels: Option<Vec<String>>,
    ) -> Result<&mut Self, ModelError> {
        if size == 0 {
            return Err(ModelError::Layout(format!("block `{name}` has size 0")));
        }
        if self.block(name).is_some() {
            return Err(ModelError::Layout(format!("duplicate block name `{name}`")));
        }
        self.blocks.push(ParameterBlock {
            name: name.to_string(),
            size,
            transform,
            labels,
            offset: self.total_dim,
        });
        self.total_dim += size;
        Ok(self)
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn blocks(&self) -> &[ParameterBlock] {
        &self.blocks
    }

    pub fn block(&self, name: &str) -> Option<&ParameterBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn range(&self, name: &str) -> Option<Range<usize>> {
        self.block(name).map(ParameterBlock::range)
    }

    /// Block owning coordinate `index`.
    pub fn owner(&self, index: usize) -> Option<&ParameterBlock> {
        self.blocks.iter().find(|b| b.range().contains(&index))
    }

    /// One name per coordinate: `sigma`, `beta[2]`, `alpha[store_7]`.
    pub fn parameter_names(&self) -> Vec<String> {
        self.blocks
            .iter()
            .flat_map(|b| (0..b.size).map(move |i| b.element_name(i)))
            .collect()
    }

    pub fn transforms(&self) -> Vec<Transform> {
        self.blocks
            .iter()
            .flat_map(|b| std::iter::repeat_n(b.transform, b.size))
            .collect()
    }

    pub fn constrain(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(self.transforms())
            .map(|(&t, tr)| tr.constrain(t))
            .collect()
    }

    pub fn unconstrain(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .zip(self.transforms())
            .map(|(&v, tr)| tr.unconstrain(v))
            .collect()
    }

    /// Same blocks, with every transform replaced by the identity. Describes
    /// draws that have already been mapped to the constrained space.
    pub fn as_constrained(&self) -> Self {
        let mut out = self.clone();
        for b in &mut out.blocks {
            b.transform = Transform::Identity;
        }
        out
    }

    fn reindex(&mut self) {
        let mut offset = 0;
        for b in &mut self.blocks {
            b.offset = offset;
            offset += b.size;
        }
        self.total_dim = offset;
    }
}

// Offsets are not serialized; they are recomputed from block sizes.
#[derive(Deserialize)]
struct RawLayout {
    blocks: Vec<ParameterBlock>,
}

impl From<RawLayout> for ParameterLayout {
    fn from(raw: RawLayout) -> Self {
        let mut layout = ParameterLayout {
            blocks: raw.blocks,
            total_dim: 0,
        };
        layout.reindex();
        layout
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_partition_the_vector() {
        let mut layout = ParameterLayout::new();
        layout
            .push("alpha", 1, Transform::Identity)
            .unwrap()
            .push("beta", 4, Transform::Identity)
            .unwrap()
            .push("sigma", 1, Transform::POSITIVE)
            .unwrap();
        assert_eq!(layout.total_dim(), 6);
        assert_eq!(layout.range("beta"), Some(1..5));
        for i in 0..6 {
            let owners = layout.blocks().iter().filter(|b| b.range().contains(&i)).count();
            assert_eq!(owners, 1);
        }
        assert_eq!(
            layout.parameter_names(),
            ["alpha", "beta[1]", "beta[2]", "beta[3]", "beta[4]", "sigma"]
        );
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut layout = ParameterLayout::new();
        layout.push("a", 1, Transform::Identity).unwrap();
        assert!(layout.push("a", 2, Transform::Identity).is_err());
        assert!(layout.push("b", 0, Transform::Identity).is_err());
    }

    #[test]
    fn shifted_log_transform_roundtrips() {
        let nu = Transform::LogForPositive { lower: 1.0 };
        assert_eq!(nu.constrain(0.0), 2.0);
        assert!((nu.unconstrain(nu.constrain(0.37)) - 0.37).abs() < 1e-15);
        assert_eq!(Transform::POSITIVE.constrain(0.0), 1.0);
    }

    #[test]
    fn labels_name_elements() {
        let mut layout = ParameterLayout::new();
        layout
            .push_labeled("alpha", vec!["s1".into(), "s2".into()], Transform::Identity)
            .unwrap();
        assert_eq!(layout.parameter_names(), ["alpha[s1]", "alpha[s2]"]);
    }

    #[test]
    fn serde_roundtrip_restores_offsets() {
        let mut layout = ParameterLayout::new();
        layout.push("a", 2, Transform::Identity).unwrap();
        layout.push("b", 3, Transform::POSITIVE).unwrap();
        let json = serde_json::to_string(&layout).unwrap();
        let mut back: ParameterLayout = serde_json::from_str(&json).unwrap();
        back.reindex();
        assert_eq!(back, layout);
    }
}
