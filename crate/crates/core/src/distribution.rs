//! One-dimensional discrete distributions over molecule counts.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

/// Probabilities indexed by molecule count. Absent counts have probability 0.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiscreteDistribution {
    probs: BTreeMap<u32, f64>,
}

impl DiscreteDistribution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (u32, f64)>>(pairs: I) -> Self {
        let mut d = Self::new();
        for (x, p) in pairs {
            d.add(x, p);
        }
        d
    }

    pub fn add(&mut self, x: u32, p: f64) {
        *self.probs.entry(x).or_insert(0.0) += p;
    }

    pub fn get(&self, x: u32) -> f64 {
        self.probs.get(&x).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.probs.iter().map(|(&x, &p)| (x, p))
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn max_count(&self) -> Option<u32> {
        self.probs.keys().next_back().copied()
    }

    /// Copy scaled so the probabilities sum to one.
    pub fn normalized(&self) -> Self {
        let total = self.total();
        if total <= 0.0 {
            return self.clone();
        }
        DiscreteDistribution {
            probs: self.probs.iter().map(|(&x, &p)| (x, p / total)).collect(),
        }
    }

    /// Raw moments `E[X^k]`, k = 0..=order, of the normalized distribution.
    pub fn moments(&self, order: usize) -> Vec<f64> {
        let total = self.total();
        let mut out = vec![0.0; order + 1];
        for (&x, &p) in &self.probs {
            let xf = x as f64;
            let mut pw = 1.0;
            for m in out.iter_mut() {
                *m += pw * p;
                pw *= xf;
            }
        }
        if total > 0.0 {
            out.iter_mut().for_each(|m| *m /= total);
        }
        out
    }

    /// Local maxima of the probability mass function over the integer grid
    /// spanned by the support (restricted to counts congruent to `offset` mod `step`).
    pub fn local_maxima(&self, step: u32, offset: u32) -> Vec<u32> {
        let Some(hi) = self.max_count() else {
            return Vec::new();
        };
        let grid: Vec<u32> = (0..=hi).filter(|x| x % step == offset % step).collect();
        let vals: Vec<f64> = grid.iter().map(|&x| self.get(x)).collect();
        let mut out = Vec::new();
        for i in 0..vals.len() {
            let left = if i == 0 { f64::NEG_INFINITY } else { vals[i - 1] };
            let right = vals.get(i + 1).copied().unwrap_or(f64::NEG_INFINITY);
            if vals[i] > left && vals[i] >= right && vals[i] > 0.0 {
                out.push(grid[i]);
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W, header_comment: Option<&str>) -> io::Result<()> {
        if let Some(c) = header_comment {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "count,probability")?;
        for (&x, &p) in &self.probs {
            writeln!(w, "{x},{p:e}")?;
        }
        Ok(())
    }

    /// Reads `count,probability` rows; comment lines start with `#`.
    pub fn read_csv<R: BufRead>(r: R) -> io::Result<Self> {
        let mut d = Self::new();
        let mut seen_header = false;
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !seen_header {
                seen_header = true;
                if line.chars().next().is_some_and(|c| !c.is_ascii_digit()) {
                    continue;
                }
            }
            let (x, p) = line
                .split_once(',')
                .ok_or_else(|| bad_data(format!("expected `count,probability`, got `{line}`")))?;
            let x: u32 = x.trim().parse().map_err(|_| bad_data(format!("bad count `{x}`")))?;
            let p: f64 = p
                .trim()
                .parse()
                .map_err(|_| bad_data(format!("bad probability `{p}`")))?;
            d.add(x, p);
        }
        Ok(d)
    }
}

pub(crate) fn bad_data(msg: String) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg)
}
