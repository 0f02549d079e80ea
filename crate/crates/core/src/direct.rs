//! Direct integration of the chemical master equation on a dynamically
//! truncated state space.
//!
//! Each explicit Euler step first drops every state whose probability is at or
//! below `delta1`, then pushes probability along every reaction. A successor that
//! is not yet in the support is admitted only if a single reaction sends it more
//! than `delta2`; inflow that is not admitted is booked as mass defect.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use rustc_hash::FxHashMap;
use thiserror::Error;

use crate::distribution::{bad_data, DiscreteDistribution};
use crate::network::{ReactionNetwork, StateVector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DirectError {
    #[error("step size {h} too large: state {state} has exit rate {exit_rate} (h * rate >= 1)")]
    NegativeProbability {
        state: StateVector,
        h: f64,
        exit_rate: f64,
    },
    #[error("invalid truncation config: {0}")]
    InvalidConfig(String),
    #[error("species index {index} out of range for {n} species")]
    BadSpecies { index: usize, n: usize },
    #[error("conditioning event has zero probability")]
    ZeroProbabilityCondition,
    #[error("distribution is empty")]
    EmptyDistribution,
    #[error("state length {found} does not match species count {expected}")]
    StateLength { expected: usize, found: usize },
}

/// Truncation thresholds and step control for [`integrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationConfig {
    /// States with probability at or below this are dropped at each step start.
    pub delta1: f64,
    /// Minimum single-reaction inflow for admitting a new state.
    pub delta2: f64,
    /// Fixed Euler step. `None` selects `step_safety / max exit rate` every step.
    pub step_size: Option<f64>,
    pub step_safety: f64,
    pub t_end: f64,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        TruncationConfig {
            delta1: 1e-15,
            delta2: 1e-15,
            step_size: None,
            step_safety: 0.1,
            t_end: 0.0,
        }
    }
}

impl TruncationConfig {
    pub fn with_delta(delta: f64, t_end: f64) -> Self {
        TruncationConfig {
            delta1: delta,
            delta2: delta,
            t_end,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), DirectError> {
        let bad = |m: &str| Err(DirectError::InvalidConfig(m.to_string()));
        if !(self.delta1 >= 0.0) || !(self.delta2 >= 0.0) {
            return bad("thresholds must be non-negative");
        }
        if let Some(h) = self.step_size {
            if !(h > 0.0 && h.is_finite()) {
                return bad("step size must be positive");
            }
        }
        if !(self.step_safety > 0.0 && self.step_safety < 1.0) {
            return bad("step safety factor must lie in (0, 1)");
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be non-negative");
        }
        Ok(())
    }
}

/// Probability mass on a finite set of states plus the mass lost to truncation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseDistribution {
    entries: BTreeMap<StateVector, f64>,
    pub time: f64,
    pub mass_defect: f64,
}

impl SparseDistribution {
    pub fn point_mass(x: StateVector) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(x, 1.0);
        SparseDistribution {
            entries,
            time: 0.0,
            mass_defect: 0.0,
        }
    }

    /// Builds a distribution; non-positive entries are skipped.
    pub fn from_entries<I: IntoIterator<Item = (StateVector, f64)>>(entries: I) -> Self {
        let mut map = BTreeMap::new();
        for (x, p) in entries {
            if p > 0.0 {
                *map.entry(x).or_insert(0.0) += p;
            }
        }
        SparseDistribution {
            entries: map,
            time: 0.0,
            mass_defect: 0.0,
        }
    }

    pub fn entries(&self) -> &BTreeMap<StateVector, f64> {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (&StateVector, f64)> {
        self.entries.iter().map(|(x, &p)| (x, p))
    }

    pub fn get(&self, x: &StateVector) -> f64 {
        self.entries.get(x).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn num_species(&self) -> Option<usize> {
        self.entries.keys().next().map(|x| x.len())
    }

    /// Marginal distribution of one species; its total equals the retained mass.
    pub fn marginal(&self, species: usize) -> Result<DiscreteDistribution, DirectError> {
        self.check_species(species)?;
        let mut d = DiscreteDistribution::new();
        for (x, &p) in &self.entries {
            d.add(x.counts()[species], p);
        }
        Ok(d)
    }

    /// Renormalized marginal of `target` over the states matching every
    /// `(species, count)` pair of `condition`.
    pub fn conditional_marginal(
        &self,
        condition: &[(usize, u32)],
        target: usize,
    ) -> Result<DiscreteDistribution, DirectError> {
        self.check_species(target)?;
        for &(i, _) in condition {
            self.check_species(i)?;
        }
        let mut d = DiscreteDistribution::new();
        for (x, &p) in &self.entries {
            if condition.iter().all(|&(i, c)| x.counts()[i] == c) {
                d.add(x.counts()[target], p);
            }
        }
        if d.total() <= 0.0 {
            return Err(DirectError::ZeroProbabilityCondition);
        }
        Ok(d.normalized())
    }

    /// Raw moments `E[X_i^k]`, k = 0..=order, renormalized over the retained mass.
    pub fn empirical_moments(&self, species: usize, order: usize) -> Result<Vec<f64>, DirectError> {
        if self.is_empty() {
            return Err(DirectError::EmptyDistribution);
        }
        Ok(self.marginal(species)?.moments(order))
    }

    /// Mixed raw moment `E[prod_i X_i^{e_i}]`, renormalized over the retained mass.
    pub fn raw_moment(&self, exponents: &[u32]) -> f64 {
        let mut acc = 0.0;
        let mut total = 0.0;
        for (x, &p) in &self.entries {
            let mut v = p;
            for (&xi, &e) in x.counts().iter().zip(exponents) {
                if e > 0 {
                    v *= (xi as f64).powi(e as i32);
                }
            }
            acc += v;
            total += p;
        }
        if total > 0.0 {
            acc / total
        } else {
            0.0
        }
    }

    fn check_species(&self, index: usize) -> Result<(), DirectError> {
        match self.num_species() {
            Some(n) if index >= n => Err(DirectError::BadSpecies { index, n }),
            _ => Ok(()),
        }
    }

    /// CSV with one row per state in lexicographic order and a trailing
    /// `# t=..., mass_defect=...` comment.
    pub fn write_csv<W: Write>(&self, mut w: W, names: &[&str]) -> io::Result<()> {
        writeln!(w, "{},probability", names.join(","))?;
        for (x, &p) in &self.entries {
            for c in x.counts() {
                write!(w, "{c},")?;
            }
            writeln!(w, "{p:e}")?;
        }
        writeln!(w, "# t={}, mass_defect={:e}", self.time, self.mass_defect)
    }

    /// Reads a dump written by [`SparseDistribution::write_csv`]; returns the
    /// species names from the header.
    pub fn read_csv<R: BufRead>(r: R) -> io::Result<(Vec<String>, Self)> {
        let mut names: Option<Vec<String>> = None;
        let mut dist = SparseDistribution::default();
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                for item in c.split(',') {
                    let item = item.trim();
                    if let Some(v) = item.strip_prefix("t=") {
                        dist.time = v.parse().map_err(|_| bad_data(format!("bad time `{v}`")))?;
                    } else if let Some(v) = item.strip_prefix("mass_defect=") {
                        dist.mass_defect =
                            v.parse().map_err(|_| bad_data(format!("bad defect `{v}`")))?;
                    }
                }
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            match &names {
                None => {
                    let (last, head) = cols
                        .split_last()
                        .ok_or_else(|| bad_data("empty header".into()))?;
                    if *last != "probability" {
                        return Err(bad_data("header must end with `probability`".into()));
                    }
                    names = Some(head.iter().map(|s| s.to_string()).collect());
                }
                Some(n) => {
                    if cols.len() != n.len() + 1 {
                        return Err(bad_data(format!("row has {} columns", cols.len())));
                    }
                    let counts = cols[..n.len()]
                        .iter()
                        .map(|c| c.parse::<u32>().map_err(|_| bad_data(format!("bad count `{c}`"))))
                        .collect::<Result<Vec<_>, _>>()?;
                    let p: f64 = cols[n.len()]
                        .parse()
                        .map_err(|_| bad_data(format!("bad probability `{}`", cols[n.len()])))?;
                    if p > 0.0 {
                        dist.entries.insert(StateVector(counts), p);
                    }
                }
            }
        }
        Ok((names.unwrap_or_default(), dist))
    }
}

/// Drops every state with probability at or below `delta1`, adding its mass to the defect.
pub fn prune(dist: &SparseDistribution, delta1: f64) -> SparseDistribution {
    let mut out = dist.clone();
    let mut lost = 0.0;
    out.entries.retain(|_, p| {
        if *p <= delta1 {
            lost += *p;
            false
        } else {
            true
        }
    });
    out.mass_defect += lost;
    out
}

/// One explicit Euler step of size `h` without pruning.
pub fn euler_step(
    net: &ReactionNetwork,
    dist: &SparseDistribution,
    h: f64,
    delta2: f64,
) -> Result<SparseDistribution, DirectError> {
    let mut solver = Solver::new(net, dist)?;
    solver.step(StepSize::Fixed(h), f64::INFINITY, delta2)?;
    Ok(solver.snapshot())
}

/// Integrates from `dist0.time` to `config.t_end`.
pub fn integrate(
    net: &ReactionNetwork,
    dist0: &SparseDistribution,
    config: &TruncationConfig,
) -> Result<SparseDistribution, DirectError> {
    let mut out = integrate_checkpoints(net, dist0, config, &[config.t_end])?;
    Ok(out.pop().expect("one checkpoint requested"))
}

/// Integrates to each of the ascending `times`, returning a snapshot at each.
/// Steps are shortened so every checkpoint is hit exactly.
pub fn integrate_checkpoints(
    net: &ReactionNetwork,
    dist0: &SparseDistribution,
    config: &TruncationConfig,
    times: &[f64],
) -> Result<Vec<SparseDistribution>, DirectError> {
    config.validate()?;
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < dist0.time) {
        return Err(DirectError::InvalidConfig(
            "checkpoint times must be ascending and not before the start time".into(),
        ));
    }
    let mut solver = Solver::new(net, dist0)?;
    let mut out = Vec::with_capacity(times.len());
    let step = match config.step_size {
        Some(h) => StepSize::Fixed(h),
        None => StepSize::Adaptive(config.step_safety),
    };
    for &t in times {
        while t - solver.time > 1e-12 * t.abs().max(1.0) {
            solver.prune(config.delta1);
            solver.step(step, t - solver.time, config.delta2)?;
        }
        solver.time = t;
        let mut snap = solver.snapshot();
        // Probability outside the support equals the total approximation error.
        snap.mass_defect = solver.reference_mass - snap.total_mass();
        out.push(snap);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
enum StepSize {
    Fixed(f64),
    Adaptive(f64),
}

const NONE: u32 = u32::MAX;

/// Propensity in a form that reads at most two coordinates.
#[derive(Debug, Clone)]
struct CompiledReaction {
    rate: f64,
    factors: [(usize, u32); 2],
    nfactors: usize,
    delta: Vec<i64>,
}

impl CompiledReaction {
    #[inline]
    fn propensity(&self, x: &[u32]) -> f64 {
        let mut a = self.rate;
        for &(i, l) in &self.factors[..self.nfactors] {
            let xi = x[i] as f64;
            a *= if l == 1 {
                xi
            } else if x[i] < 2 {
                0.0
            } else {
                xi * (xi - 1.0) * 0.5
            };
        }
        a
    }
}

/// Working storage: states live in slots; `succ` caches the slot reached by
/// each reaction. Slots with zero probability are outside the support.
struct Solver {
    n: usize,
    reactions: Vec<CompiledReaction>,
    states: Vec<u32>,
    index: FxHashMap<Box<[u32]>, u32>,
    prob: Vec<f64>,
    next: Vec<f64>,
    exit: Vec<f64>,
    admitted: Vec<bool>,
    succ: Vec<u32>,
    alive: usize,
    time: f64,
    defect: f64,
    reference_mass: f64,
    scratch: Vec<u32>,
    pending: Vec<(u32, u32, f64)>,
    admitted_list: Vec<u32>,
}

impl Solver {
    fn new(net: &ReactionNetwork, dist: &SparseDistribution) -> Result<Self, DirectError> {
        let n = net.num_species();
        let reactions = net
            .reactions()
            .iter()
            .filter(|r| r.reactants != r.products)
            .map(|r| {
                let mut factors = [(0usize, 0u32); 2];
                let mut nfactors = 0;
                for (i, &l) in r.reactants.iter().enumerate() {
                    match l {
                        0 => {}
                        1 => {
                            factors[nfactors] = (i, 1);
                            nfactors += 1;
                        }
                        _ => {
                            factors[nfactors] = (i, 2);
                            nfactors += 1;
                        }
                    }
                }
                CompiledReaction {
                    rate: r.rate,
                    factors,
                    nfactors,
                    delta: r.change_vector(),
                }
            })
            .collect();
        let mut s = Solver {
            n,
            reactions,
            states: Vec::new(),
            index: FxHashMap::default(),
            prob: Vec::new(),
            next: Vec::new(),
            exit: Vec::new(),
            admitted: Vec::new(),
            succ: Vec::new(),
            alive: 0,
            time: dist.time,
            defect: dist.mass_defect,
            reference_mass: dist.total_mass() + dist.mass_defect,
            scratch: vec![0; n],
            pending: Vec::new(),
            admitted_list: Vec::new(),
        };
        for (x, &p) in dist.entries() {
            if x.len() != n {
                return Err(DirectError::StateLength {
                    expected: n,
                    found: x.len(),
                });
            }
            let k = s.create_slot(x.counts());
            s.prob[k as usize] = p;
            s.alive += 1;
        }
        Ok(s)
    }

    fn m(&self) -> usize {
        self.reactions.len()
    }

    fn state(&self, k: usize) -> &[u32] {
        &self.states[k * self.n..(k + 1) * self.n]
    }

    fn lookup(&self, x: &[u32]) -> u32 {
        self.index.get(x).copied().unwrap_or(NONE)
    }

    /// Appends a slot for `x` (probability 0) and links it with its neighbours.
    fn create_slot(&mut self, x: &[u32]) -> u32 {
        let k = (self.prob.len()) as u32;
        let m = self.m();
        self.states.extend_from_slice(x);
        self.prob.push(0.0);
        self.next.push(0.0);
        let a0 = self.reactions.iter().map(|r| r.propensity(x)).sum();
        self.exit.push(a0);
        self.admitted.push(false);
        let mut y = vec![0u32; self.n];
        for j in 0..m {
            let delta = &self.reactions[j].delta;
            // successor x + v_j
            let t = if shift_into(x, delta, 1, &mut y) {
                self.lookup(&y)
            } else {
                NONE
            };
            self.succ.push(t);
            // predecessor x - v_j now reaches this slot
            if shift_into(x, delta, -1, &mut y) {
                let q = self.lookup(&y);
                if q != NONE {
                    self.succ[q as usize * m + j] = k;
                }
            }
        }
        self.index.insert(x.to_vec().into_boxed_slice(), k);
        k
    }

    fn prune(&mut self, delta1: f64) {
        let mut lost = 0.0;
        for p in self.prob.iter_mut() {
            if *p > 0.0 && *p <= delta1 {
                lost += *p;
                *p = 0.0;
                self.alive -= 1;
            }
        }
        self.defect += lost;
        if self.prob.len() > 2 * self.alive + 4096 {
            self.compact();
        }
    }

    /// Rebuilds storage with live slots only, keeping their relative order.
    fn compact(&mut self) {
        let live: Vec<usize> = (0..self.prob.len()).filter(|&k| self.prob[k] > 0.0).collect();
        let old_states = std::mem::take(&mut self.states);
        let old_prob = std::mem::take(&mut self.prob);
        let old_exit = std::mem::take(&mut self.exit);
        let n = self.n;
        let m = self.m();
        self.index.clear();
        self.next.clear();
        self.admitted.clear();
        self.succ.clear();
        for &k in &live {
            let x = &old_states[k * n..(k + 1) * n];
            self.states.extend_from_slice(x);
            self.index
                .insert(x.to_vec().into_boxed_slice(), (self.prob.len()) as u32);
            self.prob.push(old_prob[k]);
            self.exit.push(old_exit[k]);
        }
        let len = self.prob.len();
        self.next.resize(len, 0.0);
        self.admitted.resize(len, false);
        self.succ.resize(len * m, NONE);
        let mut y = vec![0u32; n];
        for k in 0..len {
            for j in 0..m {
                let x = &self.states[k * n..(k + 1) * n];
                if shift_into(x, &self.reactions[j].delta, 1, &mut y) {
                    self.succ[k * m + j] = self.lookup(&y);
                }
            }
        }
    }

    fn step(&mut self, size: StepSize, remaining: f64, delta2: f64) -> Result<f64, DirectError> {
        let len = self.prob.len();
        let m = self.m();
        let n = self.n;

        let mut max_exit = 0.0f64;
        let mut argmax = 0usize;
        for k in 0..len {
            if self.prob[k] <= 0.0 {
                continue;
            }
            let a0 = self.exit[k];
            if a0 > max_exit {
                max_exit = a0;
                argmax = k;
            }
        }
        let h = match size {
            StepSize::Fixed(h) => h.min(remaining),
            StepSize::Adaptive(safety) if max_exit > 0.0 => (safety / max_exit).min(remaining),
            StepSize::Adaptive(_) => remaining,
        };
        if h * max_exit >= 1.0 {
            return Err(DirectError::NegativeProbability {
                state: StateVector(self.state(argmax).to_vec()),
                h,
                exit_rate: max_exit,
            });
        }

        self.pending.clear();
        self.admitted_list.clear();
        for k in 0..len {
            let p = self.prob[k];
            if p <= 0.0 {
                continue;
            }
            self.next[k] += p - h * self.exit[k] * p;
            self.scratch.copy_from_slice(&self.states[k * n..(k + 1) * n]);
            for j in 0..m {
                let a = self.reactions[j].propensity(&self.scratch);
                if a == 0.0 {
                    continue;
                }
                let flow = h * a * p;
                let mut t = self.succ[k * m + j];
                if t != NONE {
                    let tu = t as usize;
                    if self.prob[tu] > 0.0 || self.admitted[tu] {
                        self.next[tu] += flow;
                        continue;
                    }
                }
                if flow > delta2 {
                    if t == NONE {
                        let mut y = std::mem::take(&mut self.scratch);
                        let mut target = vec![0u32; n];
                        shift_into(&y, &self.reactions[j].delta, 1, &mut target);
                        t = self.create_slot(&target);
                        std::mem::swap(&mut y, &mut self.scratch);
                        drop(y);
                    }
                    let tu = t as usize;
                    self.admitted[tu] = true;
                    self.admitted_list.push(t);
                    self.next[tu] += flow;
                } else {
                    self.pending.push((k as u32, j as u32, flow));
                }
            }
        }
        // Small inflows count only if another reaction admitted the target.
        let mut lost = 0.0;
        for &(k, j, flow) in &self.pending {
            let t = self.succ[k as usize * m + j as usize];
            if t != NONE && self.admitted[t as usize] {
                self.next[t as usize] += flow;
            } else {
                lost += flow;
            }
        }
        self.defect += lost;

        std::mem::swap(&mut self.prob, &mut self.next);
        self.next.iter_mut().for_each(|v| *v = 0.0);
        for &t in &self.admitted_list {
            self.admitted[t as usize] = false;
        }
        self.alive = self.prob.iter().filter(|&&p| p > 0.0).count();
        self.time += h;
        Ok(h)
    }

    fn snapshot(&self) -> SparseDistribution {
        let mut entries = BTreeMap::new();
        for k in 0..self.prob.len() {
            if self.prob[k] > 0.0 {
                entries.insert(StateVector(self.state(k).to_vec()), self.prob[k]);
            }
        }
        SparseDistribution {
            entries,
            time: self.time,
            mass_defect: self.defect,
        }
    }
}

/// Writes `x + sign * delta` into `out`; false if a component would be negative.
#[inline]
fn shift_into(x: &[u32], delta: &[i64], sign: i64, out: &mut [u32]) -> bool {
    for ((o, &xi), &d) in out.iter_mut().zip(x).zip(delta) {
        let y = xi as i64 + sign * d;
        if y < 0 || y > u32::MAX as i64 {
            return false;
        }
        *o = y as u32;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{dimerization, exclusive_switch, parse_network};

    fn sv(v: &[u32]) -> StateVector {
        StateVector(v.to_vec())
    }

    #[test]
    fn prune_threshold_semantics() {
        let d = SparseDistribution::from_entries([(sv(&[0]), 0.6), (sv(&[1]), 1e-16)]);
        let p = prune(&d, 1e-15);
        assert_eq!(p.len(), 1);
        assert_eq!(p.mass_defect, 1e-16);

        let same = prune(&d, 0.0);
        assert_eq!(same, d);

        let d = SparseDistribution::from_entries([(sv(&[0]), 0.5), (sv(&[1]), 0.5)]);
        let p = prune(&d, 1.0);
        assert!(p.is_empty());
        assert_eq!(p.mass_defect, 1.0);
    }

    #[test]
    fn one_birth_step() {
        let net = parse_network("0 -> A @ 5.0\ninit: A=0").unwrap();
        let d = SparseDistribution::point_mass(sv(&[0]));
        let out = euler_step(&net, &d, 1e-3, 0.0).unwrap();
        assert!((out.get(&sv(&[0])) - (1.0 - 0.005)).abs() < 1e-15);
        assert!((out.get(&sv(&[1])) - 0.005).abs() < 1e-15);
        assert_eq!(out.mass_defect, 0.0);
    }

    #[test]
    fn zero_reaction_network_is_static() {
        let net = parse_network("species: A\ninit: A=2").unwrap();
        let d = SparseDistribution::from_entries([(sv(&[2]), 0.75), (sv(&[3]), 0.25)]);
        let out = euler_step(&net, &d, 0.5, 0.0).unwrap();
        assert_eq!(out.entries(), d.entries());
        let cfg = TruncationConfig::with_delta(0.0, 3.0);
        let out = integrate(&net, &d, &cfg).unwrap();
        assert_eq!(out.entries(), d.entries());
    }

    #[test]
    fn dimerization_first_step_successor() {
        let net = dimerization(0.00166, 0.2);
        let d = SparseDistribution::point_mass(sv(&[301, 0]));
        let out = euler_step(&net, &d, 1e-3, 0.0).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out.get(&sv(&[299, 1])) > 0.0);
    }

    #[test]
    fn too_large_step_names_state() {
        let net = parse_network("0 -> A @ 5.0\ninit: A=0").unwrap();
        let d = SparseDistribution::point_mass(sv(&[0]));
        match euler_step(&net, &d, 0.2, 0.0) {
            Err(DirectError::NegativeProbability { state, .. }) => assert_eq!(state, sv(&[0])),
            other => panic!("expected error, got {other:?}"),
        }
    }

    #[test]
    fn t_end_zero_returns_initial() {
        let net = exclusive_switch();
        let d = SparseDistribution::point_mass(net.initial_state().clone());
        let out = integrate(&net, &d, &TruncationConfig::with_delta(1e-10, 0.0)).unwrap();
        assert_eq!(out.entries(), d.entries());
        assert_eq!(out.mass_defect, 0.0);
    }

    #[test]
    fn inflow_below_delta2_goes_to_defect() {
        let net = parse_network("0 -> A @ 1.0\ninit: A=0").unwrap();
        let d = SparseDistribution::point_mass(sv(&[0]));
        let out = euler_step(&net, &d, 1e-3, 0.01).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out.mass_defect - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn small_inflow_joins_admitted_state() {
        // Both A and B feed state (1, 1); only the larger flow passes delta2.
        let net = parse_network("A -> B @ 1.0\nC -> B @ 0.001\nspecies_dummy -> 0 @ 1\ninit: A=1").unwrap();
        let x = sv(&[1, 0, 0, 0]);
        let y = sv(&[0, 0, 1, 0]);
        let d = SparseDistribution::from_entries([(x, 0.5), (y, 0.5)]);
        let out = euler_step(&net, &d, 0.01, 1e-4).unwrap();
        // (0,1,0,0) receives 0.005 from A and 5e-6 from C
        let target = out.get(&sv(&[0, 1, 0, 0]));
        assert!((target - (0.005 + 0.5 * 0.01 * 0.001)).abs() < 1e-15);
        assert_eq!(out.mass_defect, 0.0);
    }

    #[test]
    fn marginal_and_conditionals() {
        let d = SparseDistribution::from_entries([(sv(&[1, 2]), 0.5), (sv(&[3, 2]), 0.5)]);
        let m = d.marginal(1).unwrap();
        assert_eq!(m.get(2), 1.0);
        let pm = SparseDistribution::point_mass(sv(&[301, 0]));
        assert_eq!(pm.marginal(0).unwrap().get(301), 1.0);
        assert_eq!(
            pm.empirical_moments(0, 2).unwrap(),
            vec![1.0, 301.0, 90601.0]
        );
        let c = d.conditional_marginal(&[], 0).unwrap();
        assert_eq!(c, d.marginal(0).unwrap().normalized());
        assert_eq!(
            d.conditional_marginal(&[(1, 5)], 0),
            Err(DirectError::ZeroProbabilityCondition)
        );
        assert!(matches!(d.marginal(2), Err(DirectError::BadSpecies { .. })));
        assert_eq!(
            SparseDistribution::default().empirical_moments(0, 2),
            Err(DirectError::EmptyDistribution)
        );
    }

    #[test]
    fn csv_dump_round_trip() {
        let mut d = SparseDistribution::from_entries([(sv(&[3, 1]), 0.25), (sv(&[1, 2]), 0.75)]);
        d.time = 2.5;
        d.mass_defect = 1e-12;
        let mut buf = Vec::new();
        d.write_csv(&mut buf, &["A", "B"]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("A,B,probability\n1,2,"));
        assert!(text.trim_end().ends_with("# t=2.5, mass_defect=1e-12"));
        let (names, back) = SparseDistribution::read_csv(buf.as_slice()).unwrap();
        assert_eq!(names, vec!["A", "B"]);
        assert_eq!(back, d);
    }

    #[test]
    fn birth_death_matches_poisson() {
        let (lambda, mu, t) = (2.0, 1.0, 1.0);
        let net = parse_network(&format!("0 -> A @ {lambda}\nA -> 0 @ {mu}\ninit: A=0")).unwrap();
        let d = SparseDistribution::point_mass(sv(&[0]));
        let cfg = TruncationConfig {
            delta1: 0.0,
            delta2: 0.0,
            step_size: Some(1e-4),
            t_end: t,
            ..Default::default()
        };
        let out = integrate(&net, &d, &cfg).unwrap();
        let mean = lambda / mu * (1.0 - (-mu * t).exp());
        let mut pk = (-mean).exp();
        for k in 0..20u32 {
            assert!((out.get(&sv(&[k])) - pk).abs() < 1e-4, "k={k}");
            pk *= mean / (k + 1) as f64;
        }
    }

    #[test]
    fn mass_is_accounted_for() {
        let net = exclusive_switch();
        let d = SparseDistribution::point_mass(net.initial_state().clone());
        let cfg = TruncationConfig::with_delta(1e-8, 5.0);
        let out = integrate(&net, &d, &cfg).unwrap();
        assert!((out.total_mass() + out.mass_defect - 1.0).abs() < 1e-12);
        assert!(out.mass_defect >= 0.0);
    }
}
