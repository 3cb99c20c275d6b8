use std::io::Write;

use serde::{Deserialize, Serialize};

use super::McmcError;
use crate::models::ParameterLayout;

/// Whether stored values are the sampler's unconstrained coordinates or the
/// model parameters after applying the layout transforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawSpace {
    Unconstrained,
    Constrained,
}

/// Posterior samples indexed `[chain][iteration][parameter]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    chains: usize,
    iters: usize,
    values: Vec<f64>,
    layout: ParameterLayout,
    space: DrawSpace,
    /// Mean acceptance probability of the retained transitions, per chain.
    pub accept_rate: Vec<f64>,
    pub step_size: Vec<f64>,
    pub divergences: Vec<usize>,
}

impl PosteriorDraws {
    pub fn from_flat(
        chains: usize,
        iters: usize,
        values: Vec<f64>,
        layout: ParameterLayout,
        space: DrawSpace,
    ) -> Result<Self, McmcError> {
        let expected = chains * iters * layout.total_dim();
        if values.len() != expected {
            return Err(McmcError::Dimension {
                expected,
                actual: values.len(),
            });
        }
        Ok(Self {
            chains,
            iters,
            values,
            layout,
            space,
            accept_rate: vec![f64::NAN; chains],
            step_size: vec![f64::NAN; chains],
            divergences: vec![0; chains],
        })
    }

    /// Builds draws from per-chain series `chains[c][i][p]`.
    pub fn from_chains(chains: &[Vec<Vec<f64>>], layout: ParameterLayout) -> Result<Self, McmcError> {
        let iters = chains.first().map_or(0, Vec::len);
        let dim = layout.total_dim();
        let mut values = Vec::with_capacity(chains.len() * iters * dim);
        for chain in chains {
            if chain.len() != iters {
                return Err(McmcError::Dimension {
                    expected: iters,
                    actual: chain.len(),
                });
            }
            for draw in chain {
                if draw.len() != dim {
                    return Err(McmcError::Dimension {
                        expected: dim,
                        actual: draw.len(),
                    });
                }
                values.extend_from_slice(draw);
            }
        }
        Self::from_flat(chains.len(), iters, values, layout, DrawSpace::Constrained)
    }

    /// Attaches a model layout; its dimension must match.
    pub fn with_layout(mut self, layout: ParameterLayout) -> Result<Self, McmcError> {
        if layout.total_dim() != self.dim() {
            return Err(McmcError::Dimension {
                expected: self.dim(),
                actual: layout.total_dim(),
            });
        }
        self.layout = layout;
        Ok(self)
    }

    /// Applies the layout transforms to every draw.
    pub fn constrained(&self) -> Self {
        if self.space == DrawSpace::Constrained {
            return self.clone();
        }
        let dim = self.dim();
        let mut values = Vec::with_capacity(self.values.len());
        for draw in self.values.chunks_exact(dim.max(1)) {
            values.extend(self.layout.constrain(draw));
        }
        Self {
            values,
            layout: self.layout.as_constrained(),
            space: DrawSpace::Constrained,
            ..self.clone()
        }
    }

    pub fn n_chains(&self) -> usize {
        self.chains
    }

    pub fn n_iters(&self) -> usize {
        self.iters
    }

    pub fn dim(&self) -> usize {
        self.layout.total_dim()
    }

    pub fn total_draws(&self) -> usize {
        self.chains * self.iters
    }

    pub fn layout(&self) -> &ParameterLayout {
        &self.layout
    }

    pub fn space(&self) -> DrawSpace {
        self.space
    }

    pub fn draw(&self, chain: usize, iter: usize) -> &[f64] {
        let dim = self.dim();
        let start = (chain * self.iters + iter) * dim;
        &self.values[start..start + dim]
    }

    /// All draws in chain-major order.
    pub fn iter_draws(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim().max(1))
    }

    pub fn chain_values(&self, chain: usize, param: usize) -> Vec<f64> {
        (0..self.iters).map(|i| self.draw(chain, i)[param]).collect()
    }

    /// Pooled draws of one parameter across chains.
    pub fn param_values(&self, param: usize) -> Vec<f64> {
        self.iter_draws().map(|d| d[param]).collect()
    }

    /// Per-chain series of one parameter.
    pub fn param_chains(&self, param: usize) -> Vec<Vec<f64>> {
        (0..self.chains).map(|c| self.chain_values(c, param)).collect()
    }

    /// Pooled draws of a named scalar block, or element `index` of a vector block.
    pub fn block_values(&self, block: &str, index: usize) -> Option<Vec<f64>> {
        let range = self.layout.range(block)?;
        (index < range.len()).then(|| self.param_values(range.start + index))
    }

    /// CSV with columns `chain, iter, <parameter names>`.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["chain".to_string(), "iter".to_string()];
        header.extend(self.layout.parameter_names());
        out.write_record(&header)?;
        for chain in 0..self.chains {
            for iter in 0..self.iters {
                let mut row = vec![chain.to_string(), iter.to_string()];
                row.extend(self.draw(chain, iter).iter().map(f64::to_string));
                out.write_record(&row)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}
