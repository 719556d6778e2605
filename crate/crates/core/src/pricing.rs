//! Pricing schemes: the decision vector a solver searches over and how it
//! expands into a full price matrix.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{Matrix, PriceMatrix, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum PricingMode {
    /// One price per (slot, location).
    #[default]
    TimeLocation,
    /// One price per slot, shared by every location.
    TimeOnly,
    /// The baseline price everywhere; nothing to optimize.
    Flat,
}

impl PricingMode {
    pub fn dimension(&self, s: &Scenario) -> usize {
        match self {
            PricingMode::TimeLocation => s.horizon * s.locations,
            PricingMode::TimeOnly => s.horizon,
            PricingMode::Flat => 0,
        }
    }

    /// Broadcasts a decision vector to a price matrix, clamping into `[0, p0]`.
    pub fn expand(&self, s: &Scenario, z: &[f64]) -> Result<PriceMatrix> {
        let dim = self.dimension(s);
        if z.len() != dim {
            return Err(Error::DimensionMismatch {
                expected_rows: dim,
                expected_cols: 1,
                rows: z.len(),
                cols: 1,
            });
        }
        match self {
            PricingMode::TimeLocation => PriceMatrix::projected(s, z),
            PricingMode::TimeOnly => {
                let full: Vec<f64> = z
                    .iter()
                    .flat_map(|&v| core::iter::repeat(v).take(s.locations))
                    .collect();
                PriceMatrix::projected(s, &full)
            }
            PricingMode::Flat => Ok(PriceMatrix::flat(s)),
        }
    }

    /// Decision vector representing `p`; time-only averages over locations.
    pub fn reduce(&self, s: &Scenario, p: &PriceMatrix) -> Vec<f64> {
        match self {
            PricingMode::TimeLocation => p.as_slice().to_vec(),
            PricingMode::TimeOnly => p
                .matrix()
                .to_rows()
                .iter()
                .map(|row| row.iter().sum::<f64>() / s.locations as f64)
                .collect(),
            PricingMode::Flat => Vec::new(),
        }
    }

    /// Chain rule through `expand`: gradient with respect to the decision vector.
    pub fn reduce_gradient(&self, s: &Scenario, grad: &Matrix) -> Vec<f64> {
        match self {
            PricingMode::TimeLocation => grad.as_slice().to_vec(),
            PricingMode::TimeOnly => (0..s.horizon).map(|t| grad.row(t).iter().sum()).collect(),
            PricingMode::Flat => vec![],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PricingMode::TimeLocation => "time-location",
            PricingMode::TimeOnly => "time-only",
            PricingMode::Flat => "flat",
        }
    }
}
