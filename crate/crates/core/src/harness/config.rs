//! `key = value` experiment configuration.

use std::path::PathBuf;
use std::str::FromStr;

use super::HarnessError;
use crate::maxent::MaxEntOptions;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Builtin model name or path to a network file.
    pub model: String,
    pub t_end: f64,
    pub orders: Vec<usize>,
    pub max_order: usize,
    /// Run the direct solver as reference.
    pub direct: bool,
    pub delta: f64,
    pub delta2: Option<f64>,
    /// Fixed Euler step; adaptive when `None`.
    pub step_size: Option<f64>,
    pub step_safety: f64,
    /// Species to reconstruct; all species outside conserved groups when empty.
    pub species: Vec<String>,
    pub maxent: MaxEntOptions,
    pub out: Option<PathBuf>,
    pub rates: Option<Vec<f64>>,
    /// Record wall-clock times; when off, time columns are written as 0.
    pub wall_times: bool,
    pub figures: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: String::new(),
            t_end: 1.0,
            orders: vec![2, 3, 4, 5],
            max_order: 5,
            direct: true,
            delta: 1e-15,
            delta2: None,
            step_size: None,
            step_safety: 0.1,
            species: Vec::new(),
            maxent: MaxEntOptions::default(),
            out: None,
            rates: None,
            wall_times: true,
            figures: true,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T, HarnessError> {
    v.parse()
        .map_err(|_| HarnessError::Config(format!("bad value `{v}` for `{key}`")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, HarnessError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool, HarnessError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(HarnessError::Config(format!("bad boolean `{v}` for `{key}`"))),
    }
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut c = ExperimentConfig::default();
        let mut have_model = false;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("line {}: expected `key = value`", n + 1)))?;
            let (key, v) = (key.trim(), value.trim());
            match key {
                "model" => {
                    c.model = v.to_string();
                    have_model = true;
                }
                "t_end" => c.t_end = parse(key, v)?,
                "orders" => c.orders = parse_list(key, v)?,
                "max_order" => c.max_order = parse(key, v)?,
                "direct" => c.direct = parse_bool(key, v)?,
                "delta" => c.delta = parse(key, v)?,
                "delta2" => c.delta2 = Some(parse(key, v)?),
                "h" => c.step_size = Some(parse(key, v)?),
                "step_safety" => c.step_safety = parse(key, v)?,
                "species" => c.species = parse_list(key, v)?,
                "nodes" => c.maxent.nodes = parse(key, v)?,
                "maxent_tol" => c.maxent.tol = parse(key, v)?,
                "maxent_max_iter" => c.maxent.max_iter = parse(key, v)?,
                "out" => c.out = Some(PathBuf::from(v)),
                "rates" => c.rates = Some(parse_list(key, v)?),
                "wall_times" => c.wall_times = parse_bool(key, v)?,
                "figures" => c.figures = parse_bool(key, v)?,
                other => return Err(HarnessError::Config(format!("line {}: unknown key `{other}`", n + 1))),
            }
        }
        if !have_model {
            return Err(HarnessError::Config("missing `model`".into()));
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.t_end > 0.0) {
            return Err(HarnessError::Config(format!("t_end must be positive, got {}", self.t_end)));
        }
        if let Some(&m) = self.orders.iter().find(|&&m| m < 1 || m > self.max_order) {
            return Err(HarnessError::Config(format!(
                "order {m} outside 1..={}",
                self.max_order
            )));
        }
        Ok(())
    }
}
