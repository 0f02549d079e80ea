use std::collections::BTreeMap;
use std::fmt;

use super::MultiIndex;
use crate::network::ReactionNetwork;

/// Polynomial in raw-moment symbols. Each monomial is a sorted list of
/// symbols (repeats allowed); the empty monomial is the constant term.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MomentPolynomial {
    terms: BTreeMap<Monomial, f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Monomial(Vec<MultiIndex>);

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl MomentPolynomial {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Self::new();
        p.add_term(c, Vec::new());
        p
    }

    pub fn add_term(&mut self, coeff: f64, mut symbols: Vec<MultiIndex>) {
        if coeff == 0.0 {
            return;
        }
        symbols.retain(|s| s.order() > 0);
        symbols.sort();
        let key = Monomial(symbols);
        let v = self.terms.entry(key.clone()).or_insert(0.0);
        *v += coeff;
        if *v == 0.0 {
            self.terms.remove(&key);
        }
    }

    pub fn add_scaled(&mut self, other: &MomentPolynomial, scale: f64) {
        for (m, &c) in &other.terms {
            self.add_term(c * scale, m.0.clone());
        }
    }

    /// Removes terms whose coefficient magnitude is at most `tol`.
    pub fn prune(&mut self, tol: f64) {
        self.terms.retain(|_, c| c.abs() > tol);
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in canonical order: by monomial degree, then by symbols.
    pub fn terms(&self) -> impl Iterator<Item = (f64, &[MultiIndex])> {
        self.terms.iter().map(|(m, &c)| (c, m.0.as_slice()))
    }

    /// Every symbol appearing in the polynomial.
    pub fn symbols(&self) -> Vec<MultiIndex> {
        let mut out: Vec<MultiIndex> = self.terms.keys().flat_map(|m| m.0.iter().cloned()).collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn max_symbol_order(&self) -> u32 {
        self.terms
            .keys()
            .flat_map(|m| m.0.iter().map(|s| s.order()))
            .max()
            .unwrap_or(0)
    }

    /// Evaluates with `value(symbol)` supplying each raw moment.
    pub fn eval<F: Fn(&MultiIndex) -> f64>(&self, value: F) -> f64 {
        self.terms
            .iter()
            .map(|(m, &c)| c * m.0.iter().map(&value).product::<f64>())
            .sum()
    }
}

impl fmt::Display for MomentPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, &c)) in self.terms.iter().enumerate() {
            let (sign, mag) = if c < 0.0 { ("-", -c) } else { ("+", c) };
            if k == 0 {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            write!(f, "{mag:?}")?;
            for s in &m.0 {
                write!(f, "*{s}")?;
            }
        }
        Ok(())
    }
}

/// Exact right-hand side of `d/dt E[X^alpha]`:
/// `sum_j E[a_j(X) ((X + v_j)^alpha - X^alpha)]`, linear in raw moments.
pub fn derive_raw_moment_ode(net: &ReactionNetwork, alpha: &MultiIndex) -> MomentPolynomial {
    let mut out = MomentPolynomial::new();
    for (gamma, coeff) in derive_terms(net, alpha) {
        out.add_term(coeff, vec![gamma]);
    }
    out
}

/// Unmerged `(symbol, coefficient)` pairs of the exact moment equation.
pub(crate) fn derive_terms(net: &ReactionNetwork, alpha: &MultiIndex) -> Vec<(MultiIndex, f64)> {
    let n = alpha.len();
    let lower = alpha.lower_set();
    let mut out = Vec::new();
    for j in 0..net.num_reactions() {
        let v = net.change_vector(j);
        if (0..n).all(|i| alpha.get(i) == 0 || v[i] == 0) {
            continue;
        }
        // (x + v)^alpha - x^alpha = sum_{gamma < alpha} C(alpha, gamma) v^(alpha - gamma) x^gamma
        let mut diff: Vec<(MultiIndex, f64)> = Vec::new();
        for gamma in &lower {
            if gamma == alpha {
                continue;
            }
            let mut c = alpha.binomial(gamma);
            for i in 0..n {
                let d = alpha.get(i) - gamma.get(i);
                if d > 0 {
                    c *= (v[i] as f64).powi(d as i32);
                }
            }
            if c != 0.0 {
                diff.push((gamma.clone(), c));
            }
        }
        for term in net.propensity_polynomial(j) {
            let beta = MultiIndex::new(&term.exponents);
            for (gamma, c) in &diff {
                out.push((beta.add(gamma), term.coeff * c));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{dimerization, parse_network};

    #[test]
    fn birth_death_mean() {
        let net = parse_network("0 -> A @ 3.0\nA -> 0 @ 0.5").unwrap();
        let p = derive_raw_moment_ode(&net, &MultiIndex::new(&[1]));
        let mut expected = MomentPolynomial::constant(3.0);
        expected.add_term(-0.5, vec![MultiIndex::new(&[1])]);
        assert_eq!(p, expected);
        assert_eq!(p.to_string(), "3.0 - 0.5*E[x^(1)]");
    }

    #[test]
    fn dimerization_mean() {
        let (c1, c2) = (0.3, 0.7);
        let net = dimerization(c1, c2);
        let p = derive_raw_moment_ode(&net, &MultiIndex::new(&[1, 0]));
        // -c1 (E[X1^2] - E[X1]) + 2 c2 E[X2]
        let mut expected = MomentPolynomial::new();
        expected.add_term(-c1, vec![MultiIndex::new(&[2, 0])]);
        expected.add_term(c1, vec![MultiIndex::new(&[1, 0])]);
        expected.add_term(2.0 * c2, vec![MultiIndex::new(&[0, 1])]);
        for ((a, sa), (b, sb)) in p.terms().zip(expected.terms()) {
            assert_eq!(sa, sb);
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(p.len(), expected.len());
    }

    #[test]
    fn zero_index_has_zero_rhs() {
        let net = dimerization(1.0, 1.0);
        assert!(derive_raw_moment_ode(&net, &MultiIndex::zero(2)).is_zero());
    }

    #[test]
    fn canceling_terms_are_removed() {
        let mut p = MomentPolynomial::new();
        p.add_term(1.5, vec![MultiIndex::new(&[1])]);
        p.add_term(-1.5, vec![MultiIndex::new(&[1])]);
        assert!(p.is_zero());
        assert_eq!(p.to_string(), "0");
    }
}
