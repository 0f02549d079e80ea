use std::collections::HashMap;

use smallvec::SmallVec;

use super::derive::{derive_terms, MomentPolynomial};
use super::{enumerate_moment_indices, MomentError, MomentVector, MultiIndex};
use crate::network::ReactionNetwork;
use crate::ode::{integrate_to, OdeOptions};

/// Slot 0 holds the constant 1, slots `1..=T` the tracked moments, later
/// slots the closed higher-order moments.
type Slot = u32;

#[derive(Debug, Clone)]
struct RuleTerm {
    coeff: f64,
    slot: Slot,
    /// `(species, power)` factors of `mu_species^power`.
    shift: SmallVec<[(u8, u8); 6]>,
}

/// Closed moment equations of order `M`. Moments of order above `M` that
/// appear on a right-hand side are expressed through lower moments by
/// setting the corresponding central moment to zero.
#[derive(Debug, Clone)]
pub struct MomentODESystem {
    order: usize,
    n: usize,
    tracked: Vec<MultiIndex>,
    closed: Vec<MultiIndex>,
    rules: Vec<Vec<RuleTerm>>,
    /// Closed symbols sorted by increasing order, for evaluation.
    eval_order: Vec<usize>,
    rows: Vec<Vec<(Slot, f64)>>,
    max_power: usize,
}

struct Builder {
    n: usize,
    order: usize,
    slots: HashMap<MultiIndex, Slot>,
    closed: Vec<MultiIndex>,
    rules: Vec<Vec<RuleTerm>>,
}

impl Builder {
    fn slot(&mut self, a: &MultiIndex) -> Slot {
        if a.order() == 0 {
            return 0;
        }
        if let Some(&s) = self.slots.get(a) {
            return s;
        }
        debug_assert!(a.order() as usize > self.order);
        // E[x^b] = -sum_{g < b} C(b, g) (-mu)^(b - g) E[x^g]
        let mut rule = Vec::new();
        for gamma in a.lower_set() {
            if &gamma == a {
                continue;
            }
            let d = a.sub(&gamma);
            let mut shift = SmallVec::new();
            for i in 0..self.n {
                if d.get(i) > 0 {
                    shift.push((i as u8, d.get(i) as u8));
                }
            }
            let sign = if d.order() % 2 == 0 { -1.0 } else { 1.0 };
            let slot = self.slot(&gamma);
            rule.push(RuleTerm {
                coeff: sign * a.binomial(&gamma),
                slot,
                shift,
            });
        }
        let s = (1 + self.slots_tracked() + self.closed.len()) as Slot;
        self.slots.insert(a.clone(), s);
        self.closed.push(a.clone());
        self.rules.push(rule);
        s
    }

    fn slots_tracked(&self) -> usize {
        self.slots.len() - self.closed.len()
    }
}

/// Builds the order-`m` closed system for `net`.
pub fn close_system(net: &ReactionNetwork, m: usize) -> Result<MomentODESystem, MomentError> {
    if m == 0 {
        return Err(MomentError::ZeroOrder);
    }
    if m == 1 && !net.is_monomolecular() {
        return Err(MomentError::OrderTooLow { order: m });
    }
    let n = net.num_species();
    let tracked = enumerate_moment_indices(n, m);
    let mut b = Builder {
        n,
        order: m,
        slots: tracked
            .iter()
            .enumerate()
            .map(|(k, a)| (a.clone(), (k + 1) as Slot))
            .collect(),
        closed: Vec::new(),
        rules: Vec::new(),
    };
    let mut rows = Vec::with_capacity(tracked.len());
    for alpha in &tracked {
        let mut acc: HashMap<Slot, f64> = HashMap::new();
        for (gamma, c) in derive_terms(net, alpha) {
            let s = b.slot(&gamma);
            *acc.entry(s).or_insert(0.0) += c;
        }
        let mut row: Vec<(Slot, f64)> = acc.into_iter().filter(|&(_, c)| c != 0.0).collect();
        row.sort_by_key(|&(s, _)| s);
        rows.push(row);
    }
    let mut eval_order: Vec<usize> = (0..b.closed.len()).collect();
    eval_order.sort_by_key(|&k| (b.closed[k].order(), k));
    let max_power = b.closed.iter().map(|a| a.order() as usize).max().unwrap_or(0);
    Ok(MomentODESystem {
        order: m,
        n,
        tracked,
        closed: b.closed,
        rules: b.rules,
        eval_order,
        rows,
        max_power,
    })
}

impl MomentODESystem {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn num_species(&self) -> usize {
        self.n
    }

    pub fn tracked(&self) -> &[MultiIndex] {
        &self.tracked
    }

    pub fn num_equations(&self) -> usize {
        self.tracked.len()
    }

    /// Higher-order moments replaced by the closure.
    pub fn closed_symbols(&self) -> &[MultiIndex] {
        &self.closed
    }

    /// Evaluates the closed right-hand side at tracked values `y`.
    pub fn rhs(&self, y: &[f64], dy: &mut [f64], scratch: &mut Vec<f64>) {
        let t = self.tracked.len();
        scratch.resize(1 + t + self.closed.len(), 0.0);
        scratch[0] = 1.0;
        scratch[1..=t].copy_from_slice(y);
        if !self.closed.is_empty() {
            let p = self.max_power + 1;
            let mut pow = vec![1.0; self.n * p];
            for i in 0..self.n {
                // means are the order-1 tracked slots, stored in species order
                let mu = y[i];
                for k in 1..p {
                    pow[i * p + k] = pow[i * p + k - 1] * mu;
                }
            }
            for &k in &self.eval_order {
                let mut v = 0.0;
                for term in &self.rules[k] {
                    let mut f = term.coeff * scratch[term.slot as usize];
                    for &(i, e) in &term.shift {
                        f *= pow[i as usize * p + e as usize];
                    }
                    v += f;
                }
                scratch[1 + t + k] = v;
            }
        }
        for (d, row) in dy.iter_mut().zip(&self.rows) {
            *d = row.iter().map(|&(s, c)| c * scratch[s as usize]).sum();
        }
    }

    /// Right-hand side of tracked index `k` as a polynomial in tracked moments.
    pub fn closed_rhs(&self, k: usize) -> MomentPolynomial {
        let mut memo: HashMap<usize, MomentPolynomial> = HashMap::new();
        let mut out = MomentPolynomial::new();
        for &(s, c) in &self.rows[k] {
            out.add_scaled(&self.expand_slot(s, &mut memo), c);
        }
        out
    }

    fn expand_slot(&self, s: Slot, memo: &mut HashMap<usize, MomentPolynomial>) -> MomentPolynomial {
        let t = self.tracked.len();
        let s = s as usize;
        if s == 0 {
            return MomentPolynomial::constant(1.0);
        }
        if s <= t {
            let mut p = MomentPolynomial::new();
            p.add_term(1.0, vec![self.tracked[s - 1].clone()]);
            return p;
        }
        let k = s - 1 - t;
        if let Some(p) = memo.get(&k) {
            return p.clone();
        }
        let mut out = MomentPolynomial::new();
        for term in &self.rules[k] {
            let inner = self.expand_slot(term.slot, memo);
            let mut means = Vec::new();
            for &(i, e) in &term.shift {
                for _ in 0..e {
                    means.push(MultiIndex::unit(self.n, i as usize));
                }
            }
            for (c, syms) in inner.terms() {
                let mut m = syms.to_vec();
                m.extend(means.iter().cloned());
                out.add_term(term.coeff * c, m);
            }
        }
        memo.insert(k, out.clone());
        out
    }

    /// One line per tracked index: `d/dt E[x^(..)] = ...`.
    pub fn symbolic_dump(&self) -> String {
        let mut s = String::new();
        for (k, a) in self.tracked.iter().enumerate() {
            s.push_str(&format!("d/dt {a} = {}\n", self.closed_rhs(k)));
        }
        s
    }

    /// Tracked values taken from `init`, which may list extra indices.
    pub fn initial_values(&self, init: &MomentVector) -> Result<Vec<f64>, MomentError> {
        self.tracked
            .iter()
            .map(|a| init.get(a).ok_or_else(|| MomentError::MissingMoment(a.clone())))
            .collect()
    }
}

/// Integrates the closed system from `init.time` to `t_end`.
pub fn integrate_moments(
    sys: &MomentODESystem,
    init: &MomentVector,
    t_end: f64,
    opts: &OdeOptions,
) -> Result<MomentVector, MomentError> {
    let mut out = integrate_moments_at(sys, init, &[t_end], opts)?;
    Ok(out.pop().expect("one output time"))
}

/// Integrates the closed system, returning moments at each ascending time.
pub fn integrate_moments_at(
    sys: &MomentODESystem,
    init: &MomentVector,
    times: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<MomentVector>, MomentError> {
    let y0 = sys.initial_values(init)?;
    let mut scratch = Vec::new();
    let (states, _) = integrate_to(
        |_, y, dy| sys.rhs(y, dy, &mut scratch),
        init.time,
        &y0,
        times,
        opts,
    )?;
    Ok(states
        .into_iter()
        .zip(times)
        .map(|(values, &t)| {
            let mut mv = MomentVector::new(sys.tracked.clone(), values, t);
            mv.check_realizability(1e-9);
            mv
        })
        .collect())
}
