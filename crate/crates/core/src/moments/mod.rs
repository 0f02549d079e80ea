//! Raw-moment equations of mass-action networks and their closure.

mod closure;
mod derive;

use std::cmp::Ordering;
use std::fmt;
use std::io::{self, BufRead, Write};

use smallvec::SmallVec;
use thiserror::Error;

use crate::distribution::bad_data;
use crate::network::StateVector;

pub use closure::{close_system, integrate_moments, integrate_moments_at, MomentODESystem};
pub use derive::{derive_raw_moment_ode, MomentPolynomial};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MomentError {
    #[error("order {order} requires a monomolecular network; use order >= 2")]
    OrderTooLow { order: usize },
    #[error("moment order must be at least 1")]
    ZeroOrder,
    #[error("missing moment {0}")]
    MissingMoment(MultiIndex),
    #[error("moment vector has {found} values, system tracks {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Ode(#[from] crate::ode::OdeError),
}

/// Exponent vector of a mixed moment `E[X_1^a_1 ... X_n^a_n]`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(SmallVec<[u8; 16]>);

impl MultiIndex {
    pub fn new(exponents: &[u32]) -> Self {
        MultiIndex(
            exponents
                .iter()
                .map(|&e| u8::try_from(e).expect("moment exponent exceeds 255"))
                .collect(),
        )
    }

    pub fn zero(n: usize) -> Self {
        MultiIndex(SmallVec::from_elem(0, n))
    }

    /// Unit index `e_i`.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut m = Self::zero(n);
        m.0[i] = 1;
        m
    }

    /// `k e_i`.
    pub fn power(n: usize, i: usize, k: u32) -> Self {
        let mut m = Self::zero(n);
        m.0[i] = k as u8;
        m
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> u32 {
        self.0[i] as u32
    }

    pub fn exponents(&self) -> Vec<u32> {
        self.0.iter().map(|&e| e as u32).collect()
    }

    pub fn order(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// Component-wise `self <= other`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// Every `gamma <= self` (component-wise), including `self` and zero.
    pub fn lower_set(&self) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex::zero(self.len())];
        for (i, &e) in self.0.iter().enumerate() {
            let mut next = Vec::with_capacity(out.len() * (e as usize + 1));
            for g in &out {
                for k in 0..=e {
                    let mut h = g.clone();
                    h.0[i] = k;
                    next.push(h);
                }
            }
            out = next;
        }
        out
    }

    /// `prod_i C(self_i, gamma_i)`.
    pub fn binomial(&self, gamma: &MultiIndex) -> f64 {
        self.0
            .iter()
            .zip(&gamma.0)
            .map(|(&a, &g)| crate::network::binomial(a as u32, g as u32))
            .product()
    }

    /// `x^self` evaluated at a state.
    pub fn eval(&self, x: &[u32]) -> f64 {
        let mut v = 1.0;
        for (&e, &xi) in self.0.iter().zip(x) {
            if e > 0 {
                v *= (xi as f64).powi(e as i32);
            }
        }
        v
    }

    /// Colon-separated exponents, e.g. `2:0:1`.
    pub fn to_key(&self) -> String {
        self.0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(":")
    }

    pub fn from_key(key: &str) -> Option<Self> {
        key.split(':')
            .map(|t| t.trim().parse::<u8>().ok())
            .collect::<Option<SmallVec<[u8; 16]>>>()
            .map(MultiIndex)
    }
}

/// Graded order: lower total degree first, then lexicographically larger
/// exponent vectors first, so order-1 indices follow species order.
impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(","))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "E[x^{self:?}]")
    }
}

/// All multi-indices over `n` species with order in `1..=m`, graded order.
pub fn enumerate_moment_indices(n: usize, m: usize) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(moment_count(n, m));
    let mut cur = vec![0u8; n];
    for order in 1..=m {
        // compositions of `order` into n parts, lexicographically descending
        fill(&mut cur, 0, order as u8, &mut out);
    }
    out
}

fn fill(cur: &mut [u8], pos: usize, rest: u8, out: &mut Vec<MultiIndex>) {
    if pos + 1 == cur.len() {
        cur[pos] = rest;
        out.push(MultiIndex(SmallVec::from_slice(cur)));
        return;
    }
    for k in (0..=rest).rev() {
        cur[pos] = k;
        fill(cur, pos + 1, rest - k, out);
    }
    cur[pos] = 0;
}

/// `C(n + m, m) - 1`.
pub fn moment_count(n: usize, m: usize) -> usize {
    let mut c: u128 = 1;
    for k in 1..=m as u128 {
        c = c * (n as u128 + k) / k;
    }
    (c - 1) as usize
}

/// Values of raw moments on a fixed, graded-ordered index list.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    pub indices: Vec<MultiIndex>,
    pub values: Vec<f64>,
    pub time: f64,
    /// Realizability notes such as a negative variance produced by closure.
    pub warnings: Vec<String>,
}

impl MomentVector {
    pub fn new(indices: Vec<MultiIndex>, values: Vec<f64>, time: f64) -> Self {
        assert_eq!(indices.len(), values.len());
        MomentVector {
            indices,
            values,
            time,
            warnings: Vec::new(),
        }
    }

    pub fn num_species(&self) -> usize {
        self.indices.first().map(|a| a.len()).unwrap_or(0)
    }

    pub fn max_order(&self) -> u32 {
        self.indices.iter().map(|a| a.order()).max().unwrap_or(0)
    }

    /// Value of `E[x^alpha]`; the zero index maps to 1.
    pub fn get(&self, alpha: &MultiIndex) -> Option<f64> {
        if alpha.order() == 0 {
            return Some(1.0);
        }
        self.indices
            .binary_search(alpha)
            .ok()
            .map(|k| self.values[k])
    }

    pub fn mean(&self, i: usize) -> Option<f64> {
        self.get(&MultiIndex::unit(self.num_species(), i))
    }

    /// `E[X_i^k]` for k = 0..=order.
    pub fn marginal_moments(&self, i: usize, order: u32) -> Result<Vec<f64>, MomentError> {
        let n = self.num_species();
        (0..=order)
            .map(|k| {
                let a = MultiIndex::power(n, i, k);
                self.get(&a).ok_or(MomentError::MissingMoment(a))
            })
            .collect()
    }

    /// Adds a warning for each species with `E[X_i^2] < E[X_i]^2 - tol`.
    pub fn check_realizability(&mut self, tol: f64) {
        let n = self.num_species();
        for i in 0..n {
            let (Some(m1), Some(m2)) = (self.mean(i), self.get(&MultiIndex::power(n, i, 2))) else {
                continue;
            };
            let var = m2 - m1 * m1;
            if var < -tol * m2.abs().max(1.0) {
                self.warnings
                    .push(format!("species {i}: negative variance {var:e} at t={}", self.time));
            }
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# t={}, order={}", self.time, self.max_order())?;
        writeln!(w, "multi_index,value")?;
        for (a, v) in self.indices.iter().zip(&self.values) {
            writeln!(w, "{},{v:e}", a.to_key())?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> io::Result<Self> {
        let mut time = 0.0;
        let mut pairs = Vec::new();
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                for item in c.split(',') {
                    if let Some(v) = item.trim().strip_prefix("t=") {
                        time = v.parse().map_err(|_| bad_data(format!("bad time `{v}`")))?;
                    }
                }
                continue;
            }
            if line.starts_with("multi_index") {
                continue;
            }
            let (k, v) = line
                .split_once(',')
                .ok_or_else(|| bad_data(format!("expected `multi_index,value`, got `{line}`")))?;
            let a = MultiIndex::from_key(k.trim())
                .ok_or_else(|| bad_data(format!("bad multi-index `{k}`")))?;
            let v: f64 = v.trim().parse().map_err(|_| bad_data(format!("bad value `{v}`")))?;
            pairs.push((a, v));
        }
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        let (indices, values) = pairs.into_iter().unzip();
        Ok(MomentVector::new(indices, values, time))
    }
}

/// Raw moments of a point mass: `x0^alpha` for every index.
pub fn init_moments_from_state(x0: &StateVector, indices: &[MultiIndex]) -> MomentVector {
    let values = indices.iter().map(|a| a.eval(x0.counts())).collect();
    MomentVector::new(indices.to_vec(), values, 0.0)
}

/// Central moments `E[(X - mu)^beta]` for each requested index.
pub fn central_from_raw(raw: &MomentVector, indices: &[MultiIndex]) -> Result<Vec<f64>, MomentError> {
    let n = raw.num_species();
    let means = (0..n)
        .map(|i| raw.mean(i).ok_or(MomentError::MissingMoment(MultiIndex::unit(n, i))))
        .collect::<Result<Vec<_>, _>>()?;
    indices
        .iter()
        .map(|beta| {
            let mut acc = 0.0;
            for gamma in beta.lower_set() {
                let r = raw.get(&gamma).ok_or_else(|| MomentError::MissingMoment(gamma.clone()))?;
                acc += beta.binomial(&gamma) * shifted_power(&means, beta, &gamma, -1.0) * r;
            }
            Ok(acc)
        })
        .collect()
}

/// Inverse of [`central_from_raw`]: raw moments from central moments and means.
/// `central` must cover every index below each requested one.
pub fn raw_from_central(
    central: &MomentVector,
    means: &[f64],
    indices: &[MultiIndex],
) -> Result<Vec<f64>, MomentError> {
    indices
        .iter()
        .map(|beta| {
            let mut acc = 0.0;
            for gamma in beta.lower_set() {
                let c = match gamma.order() {
                    0 => 1.0,
                    1 => 0.0,
                    _ => central
                        .get(&gamma)
                        .ok_or_else(|| MomentError::MissingMoment(gamma.clone()))?,
                };
                acc += beta.binomial(&gamma) * shifted_power(means, beta, &gamma, 1.0) * c;
            }
            Ok(acc)
        })
        .collect()
}

/// `prod_i (sign * mu_i)^(beta_i - gamma_i)`.
fn shifted_power(means: &[f64], beta: &MultiIndex, gamma: &MultiIndex, sign: f64) -> f64 {
    let mut v = 1.0;
    for i in 0..beta.len() {
        let d = beta.get(i) - gamma.get(i);
        if d > 0 {
            v *= (sign * means[i]).powi(d as i32);
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counts_match_binomial_formula() {
        for (n, expected) in [
            (2, [5, 9, 14, 20]),
            (5, [20, 55, 125, 251]),
            (13, [104, 559, 2379, 8567]),
        ] {
            for (m, &e) in (2..=5).zip(expected.iter()) {
                assert_eq!(enumerate_moment_indices(n, m).len(), e);
                assert_eq!(moment_count(n, m), e);
            }
        }
    }

    #[test]
    fn enumeration_is_sorted_and_unique() {
        let idx = enumerate_moment_indices(3, 4);
        for w in idx.windows(2) {
            assert_eq!(w[0].cmp(&w[1]), Ordering::Less);
        }
        assert_eq!(idx[0], MultiIndex::new(&[1, 0, 0]));
        assert_eq!(idx[2], MultiIndex::new(&[0, 0, 1]));
        assert_eq!(idx[3], MultiIndex::new(&[2, 0, 0]));
    }

    #[test]
    fn init_from_point_mass() {
        let idx = enumerate_moment_indices(2, 2);
        let mv = init_moments_from_state(&StateVector(vec![301, 0]), &idx);
        assert_eq!(mv.get(&MultiIndex::new(&[2, 0])), Some(90601.0));
        assert_eq!(mv.get(&MultiIndex::new(&[1, 1])), Some(0.0));
        let mv = init_moments_from_state(&StateVector(vec![1, 1]), &idx);
        assert_eq!(mv.get(&MultiIndex::new(&[1, 1])), Some(1.0));
    }

    #[test]
    fn variance_from_raw() {
        let mv = MomentVector::new(
            vec![MultiIndex::new(&[1]), MultiIndex::new(&[2])],
            vec![1.0, 2.0],
            0.0,
        );
        let c = central_from_raw(&mv, &[MultiIndex::new(&[2])]).unwrap();
        assert_eq!(c, vec![1.0]);
    }

    #[test]
    fn point_mass_has_zero_central_moments() {
        let idx = enumerate_moment_indices(3, 4);
        let mv = init_moments_from_state(&StateVector(vec![3, 7, 2]), &idx);
        for c in central_from_raw(&mv, &idx).unwrap() {
            assert!(c.abs() < 1e-9 * 7f64.powi(4));
        }
    }

    #[test]
    fn csv_round_trip() {
        let idx = enumerate_moment_indices(2, 3);
        let mut mv = init_moments_from_state(&StateVector(vec![4, 2]), &idx);
        mv.time = 1.5;
        let mut buf = Vec::new();
        mv.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# t=1.5, order=3\nmulti_index,value\n1:0,"));
        assert_eq!(MomentVector::read_csv(buf.as_slice()).unwrap(), mv);
    }

    #[test]
    fn negative_variance_is_flagged() {
        let mut mv = MomentVector::new(
            vec![MultiIndex::new(&[1]), MultiIndex::new(&[2])],
            vec![3.0, 8.0],
            0.0,
        );
        mv.check_realizability(1e-9);
        assert_eq!(mv.warnings.len(), 1);
    }

    proptest! {
        #[test]
        fn central_raw_round_trip(
            atoms in prop::collection::vec((0u32..20, 0u32..20, 0.01f64..1.0), 1..6)
        ) {
            let total: f64 = atoms.iter().map(|a| a.2).sum();
            let idx = enumerate_moment_indices(2, 4);
            let raw: Vec<f64> = idx
                .iter()
                .map(|a| atoms.iter().map(|&(x, y, w)| w / total * a.eval(&[x, y])).sum())
                .collect();
            let raw = MomentVector::new(idx.clone(), raw, 0.0);
            let means = [raw.mean(0).unwrap(), raw.mean(1).unwrap()];
            let central = MomentVector::new(idx.clone(), central_from_raw(&raw, &idx).unwrap(), 0.0);
            let back = raw_from_central(&central, &means, &idx).unwrap();
            for (b, r) in back.iter().zip(&raw.values) {
                prop_assert!((b - r).abs() <= 1e-12 * r.abs().max(1.0), "{} vs {}", b, r);
            }
        }
    }
}
