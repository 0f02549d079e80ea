//! Reaction networks under mass-action stochastic kinetics.
//!
//! A network is a list of species, a list of at most bimolecular reactions and
//! an initial population vector. Networks are immutable once built.

mod dsl;
mod models;

use std::fmt;

use thiserror::Error;

pub use dsl::{parse_network, parse_network_with, ParseOptions};
pub use models::{
    builtin_model, builtin_names, conservation_groups, dimerization, exclusive_switch,
    multi_attractor, multi_attractor_with, DIMERIZATION_RATES,
};

/// Errors raised while building or parsing a network.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: duplicate species `{name}` in header")]
    DuplicateSpecies { line: usize, name: String },
    #[error("line {line}: unknown species `{name}`")]
    UnknownSpecies { line: usize, name: String },
    #[error("line {line}: coefficient `{token}` is not a non-negative integer")]
    InvalidCoefficient { line: usize, token: String },
    #[error("line {line}: missing rate constant")]
    MissingRate { line: usize },
    #[error("line {line}: trimolecular reaction not supported")]
    Trimolecular { line: usize },
    #[error("reaction {reaction}: rate constant must be positive and finite, got {rate}")]
    InvalidRate { reaction: usize, rate: f64 },
    #[error("reaction {reaction}: reactant side has {order} molecules, at most 2 are supported")]
    NotBimolecular { reaction: usize, order: u32 },
    #[error("reaction {reaction} leaves every population unchanged")]
    NoOpReaction { reaction: usize },
    #[error("vector length {found} does not match species count {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("duplicate species name `{0}`")]
    DuplicateName(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("expected {expected} rate constants, got {found}")]
    RateCount { expected: usize, found: usize },
}

/// A named chemical species and its position in population vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeciesDef {
    pub name: String,
    pub index: usize,
}

/// Population vector: one molecule count per species.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct StateVector(pub Vec<u32>);

impl StateVector {
    pub fn new(counts: Vec<u32>) -> Self {
        StateVector(counts)
    }

    pub fn zeros(n: usize) -> Self {
        StateVector(vec![0; n])
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `self + v`, or `None` when a component would become negative.
    pub fn shifted(&self, v: &[i64]) -> Option<StateVector> {
        let mut out = Vec::with_capacity(self.0.len());
        for (&x, &d) in self.0.iter().zip(v) {
            let y = x as i64 + d;
            if y < 0 || y > u32::MAX as i64 {
                return None;
            }
            out.push(y as u32);
        }
        Some(StateVector(out))
    }
}

impl From<Vec<u32>> for StateVector {
    fn from(v: Vec<u32>) -> Self {
        StateVector(v)
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// One stoichiometric equation with its stochastic rate constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    /// Molecules consumed, one entry per species.
    pub reactants: Vec<u32>,
    /// Molecules produced, one entry per species.
    pub products: Vec<u32>,
    pub rate: f64,
}

impl Reaction {
    pub fn new(reactants: Vec<u32>, products: Vec<u32>, rate: f64) -> Self {
        Reaction {
            reactants,
            products,
            rate,
        }
    }

    /// Total number of reactant molecules (0, 1 or 2 in a valid network).
    pub fn molecularity(&self) -> u32 {
        self.reactants.iter().sum()
    }

    pub fn change_vector(&self) -> Vec<i64> {
        self.products
            .iter()
            .zip(&self.reactants)
            .map(|(&p, &r)| p as i64 - r as i64)
            .collect()
    }
}

/// A term `coeff * x^exponents` of a propensity polynomial.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyTerm {
    pub coeff: f64,
    pub exponents: Vec<u32>,
}

/// Validated reaction network.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    species: Vec<SpeciesDef>,
    reactions: Vec<Reaction>,
    initial_state: StateVector,
}

impl ReactionNetwork {
    /// Builds a network, rejecting reactions without net effect.
    pub fn new(
        names: Vec<String>,
        reactions: Vec<Reaction>,
        initial_state: StateVector,
    ) -> Result<Self, NetworkError> {
        Self::build(names, reactions, initial_state, false)
    }

    pub(crate) fn build(
        names: Vec<String>,
        reactions: Vec<Reaction>,
        initial_state: StateVector,
        allow_noop: bool,
    ) -> Result<Self, NetworkError> {
        let n = names.len();
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(NetworkError::DuplicateName(name.clone()));
            }
        }
        if initial_state.len() != n {
            return Err(NetworkError::LengthMismatch {
                expected: n,
                found: initial_state.len(),
            });
        }
        for (j, r) in reactions.iter().enumerate() {
            for v in [&r.reactants, &r.products] {
                if v.len() != n {
                    return Err(NetworkError::LengthMismatch {
                        expected: n,
                        found: v.len(),
                    });
                }
            }
            if !(r.rate.is_finite() && r.rate > 0.0) {
                return Err(NetworkError::InvalidRate {
                    reaction: j,
                    rate: r.rate,
                });
            }
            if r.molecularity() > 2 {
                return Err(NetworkError::NotBimolecular {
                    reaction: j,
                    order: r.molecularity(),
                });
            }
            if !allow_noop && r.reactants == r.products {
                return Err(NetworkError::NoOpReaction { reaction: j });
            }
        }
        let species = names
            .into_iter()
            .enumerate()
            .map(|(index, name)| SpeciesDef { name, index })
            .collect();
        Ok(ReactionNetwork {
            species,
            reactions,
            initial_state,
        })
    }

    pub fn species(&self) -> &[SpeciesDef] {
        &self.species
    }

    pub fn species_names(&self) -> Vec<&str> {
        self.species.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    pub fn num_species(&self) -> usize {
        self.species.len()
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn num_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn initial_state(&self) -> &StateVector {
        &self.initial_state
    }

    pub fn rates(&self) -> Vec<f64> {
        self.reactions.iter().map(|r| r.rate).collect()
    }

    /// Copy of the network with every rate constant replaced, in reaction order.
    pub fn with_rates(&self, rates: &[f64]) -> Result<Self, NetworkError> {
        if rates.len() != self.reactions.len() {
            return Err(NetworkError::RateCount {
                expected: self.reactions.len(),
                found: rates.len(),
            });
        }
        let mut out = self.clone();
        for (j, (r, &c)) in out.reactions.iter_mut().zip(rates).enumerate() {
            if !(c.is_finite() && c > 0.0) {
                return Err(NetworkError::InvalidRate { reaction: j, rate: c });
            }
            r.rate = c;
        }
        Ok(out)
    }

    pub fn with_initial_state(&self, x0: StateVector) -> Result<Self, NetworkError> {
        if x0.len() != self.num_species() {
            return Err(NetworkError::LengthMismatch {
                expected: self.num_species(),
                found: x0.len(),
            });
        }
        let mut out = self.clone();
        out.initial_state = x0;
        Ok(out)
    }

    /// Mass-action propensity `c_j * prod_i binom(x_i, l_ji)`.
    pub fn propensity(&self, j: usize, x: &StateVector) -> f64 {
        propensity_of(&self.reactions[j], x.counts())
    }

    pub fn change_vector(&self, j: usize) -> Vec<i64> {
        self.reactions[j].change_vector()
    }

    /// True when no reaction has more than one reactant molecule.
    pub fn is_monomolecular(&self) -> bool {
        self.reactions.iter().all(|r| r.molecularity() <= 1)
    }

    /// Expansion of the propensity of reaction `j` into monomials of the
    /// population vector. Evaluating the terms reproduces `propensity` exactly.
    pub fn propensity_polynomial(&self, j: usize) -> Vec<PolyTerm> {
        let r = &self.reactions[j];
        let n = self.num_species();
        let mut terms: Vec<PolyTerm> = vec![PolyTerm {
            coeff: r.rate,
            exponents: vec![0; n],
        }];
        for (i, &l) in r.reactants.iter().enumerate() {
            match l {
                0 => {}
                1 => terms.iter_mut().for_each(|t| t.exponents[i] += 1),
                2 => {
                    // binom(x, 2) = x^2/2 - x/2
                    let mut next = Vec::with_capacity(terms.len() * 2);
                    for t in &terms {
                        let mut sq = t.exponents.clone();
                        sq[i] += 2;
                        let mut lin = t.exponents.clone();
                        lin[i] += 1;
                        next.push(PolyTerm {
                            coeff: 0.5 * t.coeff,
                            exponents: sq,
                        });
                        next.push(PolyTerm {
                            coeff: -0.5 * t.coeff,
                            exponents: lin,
                        });
                    }
                    terms = next;
                }
                _ => unreachable!("validated networks are at most bimolecular"),
            }
        }
        terms
    }
}

#[inline]
pub(crate) fn propensity_of(r: &Reaction, x: &[u32]) -> f64 {
    let mut a = r.rate;
    for (&xi, &l) in x.iter().zip(&r.reactants) {
        match l {
            0 => {}
            1 => a *= xi as f64,
            2 => {
                let xf = xi as f64;
                a *= if xi < 2 { 0.0 } else { xf * (xf - 1.0) * 0.5 };
            }
            _ => {
                a *= binomial(xi, l);
            }
        }
    }
    a
}

pub(crate) fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut acc = 1.0;
    for i in 0..k {
        acc *= (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

impl fmt::Display for ReactionNetwork {
    /// Canonical DSL form; parsing the output yields an equal network.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = self.species_names();
        writeln!(f, "species: {}", names.join(", "))?;
        for r in &self.reactions {
            writeln!(
                f,
                "{} -> {} @ {:?}",
                side_to_string(&r.reactants, &names),
                side_to_string(&r.products, &names),
                r.rate
            )?;
        }
        let init: Vec<String> = names
            .iter()
            .zip(self.initial_state.counts())
            .map(|(n, c)| format!("{n}={c}"))
            .collect();
        writeln!(f, "init: {}", init.join(", "))
    }
}

fn side_to_string(coeffs: &[u32], names: &[&str]) -> String {
    let parts: Vec<String> = coeffs
        .iter()
        .zip(names)
        .filter(|(&c, _)| c > 0)
        .map(|(&c, n)| if c == 1 { n.to_string() } else { format!("{c} {n}") })
        .collect();
    if parts.is_empty() {
        "0".to_string()
    } else {
        parts.join(" + ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dimer() -> ReactionNetwork {
        dimerization(1.0, 0.2)
    }

    #[test]
    fn propensity_uses_binomial_counts() {
        let net = dimer();
        let x = StateVector(vec![301, 0]);
        assert_eq!(net.propensity(0, &x), 45150.0);
        assert_eq!(net.propensity(0, &StateVector(vec![1, 0])), 0.0);
        assert_eq!(net.propensity(1, &x), 0.0);
    }

    #[test]
    fn change_vectors() {
        let net = dimer();
        assert_eq!(net.change_vector(0), vec![-2, 1]);
        assert_eq!(net.change_vector(1), vec![2, -1]);
        let birth = parse_network("0 -> A @ 5.0\ninit: A=0").unwrap();
        assert_eq!(birth.change_vector(0), vec![1]);
    }

    #[test]
    fn propensity_polynomial_matches_binomial_form() {
        let nets = [dimer(), exclusive_switch(), multi_attractor()];
        for net in &nets {
            for j in 0..net.num_reactions() {
                let terms = net.propensity_polynomial(j);
                for s in 0..40u32 {
                    let x: Vec<u32> = (0..net.num_species() as u32)
                        .map(|i| (s * 7 + i * 3) % 13)
                        .collect();
                    let poly: f64 = terms
                        .iter()
                        .map(|t| {
                            t.coeff
                                * x.iter()
                                    .zip(&t.exponents)
                                    .map(|(&xi, &e)| (xi as f64).powi(e as i32))
                                    .product::<f64>()
                        })
                        .sum();
                    let direct = net.propensity(j, &StateVector(x.clone()));
                    assert!((poly - direct).abs() <= 1e-12 * direct.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn rejects_bad_rates_and_noops() {
        let r = Reaction::new(vec![1], vec![0], -1.0);
        assert!(matches!(
            ReactionNetwork::new(vec!["A".into()], vec![r], StateVector(vec![0])),
            Err(NetworkError::InvalidRate { .. })
        ));
        let r = Reaction::new(vec![1], vec![1], 1.0);
        assert!(matches!(
            ReactionNetwork::new(vec!["A".into()], vec![r], StateVector(vec![0])),
            Err(NetworkError::NoOpReaction { .. })
        ));
    }

    #[test]
    fn zero_reaction_network_is_allowed() {
        let net = ReactionNetwork::new(vec!["A".into()], vec![], StateVector(vec![3])).unwrap();
        assert_eq!(net.num_reactions(), 0);
    }

    #[test]
    fn with_rates_replaces_constants() {
        let net = dimer().with_rates(&[0.5, 0.25]).unwrap();
        assert_eq!(net.rates(), vec![0.5, 0.25]);
        assert!(dimer().with_rates(&[1.0]).is_err());
    }
}
