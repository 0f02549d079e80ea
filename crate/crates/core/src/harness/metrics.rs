//! Error metrics comparing approximations against a reference.

use thiserror::Error;

use crate::distribution::DiscreteDistribution;
use crate::maxent::Lattice;
use crate::moments::{MomentVector, MultiIndex};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("count {count} lies off the lattice (step {step}, offset {offset})")]
    LatticeMismatch { count: u32, step: u32, offset: u32 },
    #[error("moment {0} missing")]
    Missing(MultiIndex),
    #[error("every reference moment of order {0} is zero")]
    AllZero(u32),
    #[error("species count differs: {0} vs {1}")]
    SpeciesMismatch(usize, usize),
}

/// `max_x |p(x) - q(x)|` over lattice points in either support; points absent
/// from one side count as probability 0. Nonzero mass off the lattice is an
/// error.
pub fn chebyshev_distance(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    lattice: Lattice,
) -> Result<f64, MetricError> {
    for (x, v) in p.iter().chain(q.iter()) {
        if v != 0.0 && !lattice.contains(x) {
            return Err(MetricError::LatticeMismatch {
                count: x,
                step: lattice.step,
                offset: lattice.offset,
            });
        }
    }
    let mut worst: f64 = 0.0;
    for (x, v) in p.iter() {
        worst = worst.max((v - q.get(x)).abs());
    }
    for (x, v) in q.iter() {
        worst = worst.max((p.get(x) - v).abs());
    }
    Ok(worst)
}

/// Relative error at order `k`, maximized over species.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentErrorSummary {
    pub value: f64,
    /// Species skipped because the reference moment is zero.
    pub excluded: Vec<usize>,
}

/// `max_i |approx E[X_i^k] - ref E[X_i^k]| / |ref E[X_i^k]|`.
pub fn relative_moment_error(
    approx: &MomentVector,
    reference: &MomentVector,
    k: u32,
) -> Result<MomentErrorSummary, MetricError> {
    let n = reference.num_species();
    if approx.num_species() != n {
        return Err(MetricError::SpeciesMismatch(approx.num_species(), n));
    }
    let mut value: f64 = 0.0;
    let mut excluded = Vec::new();
    for i in 0..n {
        let idx = MultiIndex::power(n, i, k);
        let r = reference.get(&idx).ok_or_else(|| MetricError::Missing(idx.clone()))?;
        let a = approx.get(&idx).ok_or_else(|| MetricError::Missing(idx.clone()))?;
        if r == 0.0 {
            excluded.push(i);
            continue;
        }
        value = value.max(((a - r) / r).abs());
    }
    if excluded.len() == n {
        return Err(MetricError::AllZero(k));
    }
    Ok(MomentErrorSummary { value, excluded })
}
