//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "params": { "n": 20, "p_t": 5, "p_j": 1, "p_max": 10, "alpha": 0.3,
//!               "theta": 1, "sigma_w2_db": -5, "sigma_c2_db": -5,
//!               "sigma_b2_w": 0.316, "epsilon_c": 0.1 },
//!   "sim": { "trials": 100000, "seed": 1, "mode": "formula_consistent",
//!            "scheme": "rrs", "power_mode": "fixed_pt" },
//!   "sweep": { "variable": "p_t", "values": [1, 2, 5, 10] },
//!   "output_path": "out.csv"
//! }
//! ```
//!
//! Every field is optional and defaults to the reference setting. Noise
//! powers carry their unit in the field name (`_db` or `_w`); at most one of
//! each pair may be present. Unknown fields are rejected.

use std::fmt;
use std::str::FromStr;

use serde::Deserialize;

use crate::detection::ZetaForm;
use crate::error::{Error, Result};
use crate::model::{db_to_linear, Scheme, SystemParams};
use crate::montecarlo::{Mode, PowerMode, SimConfig};
use crate::optimize::OptimizeOptions;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    n: Option<usize>,
    p_t: Option<f64>,
    p_j: Option<f64>,
    p_max: Option<f64>,
    alpha: Option<f64>,
    theta: Option<f64>,
    sigma_w2_db: Option<f64>,
    sigma_w2_w: Option<f64>,
    sigma_c2_db: Option<f64>,
    sigma_c2_w: Option<f64>,
    sigma_b2_db: Option<f64>,
    sigma_b2_w: Option<f64>,
    epsilon_c: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    trials: Option<usize>,
    seed: Option<u64>,
    mode: Option<Mode>,
    scheme: Option<Scheme>,
    power_mode: Option<PowerMode>,
    jammers: Option<usize>,
    jamming: Option<bool>,
    lambda: Option<f64>,
    given_success: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    variable: String,
    values: Vec<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptimize {
    grid_size: Option<usize>,
    tol: Option<f64>,
    zeta_form: Option<ZetaForm>,
    contexts: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    params: RawParams,
    #[serde(default)]
    sim: RawSim,
    sweep: Option<RawSweep>,
    #[serde(default)]
    optimize: RawOptimize,
    output_path: Option<String>,
    figure: Option<String>,
}

/// Which field a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    N,
    PT,
    PJ,
    PMax,
    Alpha,
    Theta,
    SigmaW2Db,
    SigmaW2W,
    SigmaC2Db,
    SigmaC2W,
    SigmaB2Db,
    SigmaB2W,
    EpsilonC,
    Trials,
    Seed,
    Jammers,
}

impl SweepVariable {
    const ALL: [(SweepVariable, &'static str); 16] = [
        (SweepVariable::N, "n"),
        (SweepVariable::PT, "p_t"),
        (SweepVariable::PJ, "p_j"),
        (SweepVariable::PMax, "p_max"),
        (SweepVariable::Alpha, "alpha"),
        (SweepVariable::Theta, "theta"),
        (SweepVariable::SigmaW2Db, "sigma_w2_db"),
        (SweepVariable::SigmaW2W, "sigma_w2_w"),
        (SweepVariable::SigmaC2Db, "sigma_c2_db"),
        (SweepVariable::SigmaC2W, "sigma_c2_w"),
        (SweepVariable::SigmaB2Db, "sigma_b2_db"),
        (SweepVariable::SigmaB2W, "sigma_b2_w"),
        (SweepVariable::EpsilonC, "epsilon_c"),
        (SweepVariable::Trials, "trials"),
        (SweepVariable::Seed, "seed"),
        (SweepVariable::Jammers, "jammers"),
    ];

    pub fn as_str(self) -> &'static str {
        Self::ALL
            .iter()
            .find(|(v, _)| *v == self)
            .map_or("", |(_, s)| s)
    }

    fn integral(self) -> bool {
        matches!(
            self,
            SweepVariable::N | SweepVariable::Trials | SweepVariable::Seed | SweepVariable::Jammers
        )
    }

    /// Apply `value` to copies of the base settings.
    pub fn apply(
        self,
        value: f64,
        params: &SystemParams,
        sim: &SimConfig,
    ) -> (SystemParams, SimConfig) {
        let (mut p, mut s) = (params.clone(), sim.clone());
        let count = value as usize;
        match self {
            SweepVariable::N => p.n = count,
            SweepVariable::PT => p.p_t = value,
            SweepVariable::PJ => p.p_j = value,
            SweepVariable::PMax => p.p_max = value,
            SweepVariable::Alpha => p.alpha = value,
            SweepVariable::Theta => p.theta = value,
            SweepVariable::SigmaW2Db => p.sigma_w2 = db_to_linear(value),
            SweepVariable::SigmaW2W => p.sigma_w2 = value,
            SweepVariable::SigmaC2Db => p.sigma_c2 = db_to_linear(value),
            SweepVariable::SigmaC2W => p.sigma_c2 = value,
            SweepVariable::SigmaB2Db => p.sigma_b2 = db_to_linear(value),
            SweepVariable::SigmaB2W => p.sigma_b2 = value,
            SweepVariable::EpsilonC => p.epsilon_c = value,
            SweepVariable::Trials => s.trials = count,
            SweepVariable::Seed => s.seed = value as u64,
            SweepVariable::Jammers => s.jammers = Some(count),
        }
        (p, s)
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .find(|(_, name)| *name == s)
            .map(|(v, _)| *v)
            .ok_or_else(|| {
                Error::invalid(
                    "sweep.variable",
                    format!("`{s}` is not a parameter or simulation field"),
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: SystemParams,
    pub sim: SimConfig,
    /// `None` means both schemes.
    pub scheme: Option<Scheme>,
    pub sweep: Option<Sweep>,
    pub optimize: OptimizeOptions,
    /// Detection threshold for simulated detection error; `None` uses the
    /// exact optimum.
    pub lambda: Option<f64>,
    /// Report the expected min-rate over non-outage trials only.
    pub given_success: bool,
    pub output_path: Option<String>,
    pub figure: Option<Figure>,
}

impl ExperimentConfig {
    pub fn schemes(&self) -> Vec<Scheme> {
        self.scheme
            .map_or_else(|| Scheme::ALL.to_vec(), |s| vec![s])
    }

    /// The `(label, params, sim)` settings to run, one per sweep point.
    pub fn points(&self) -> Vec<(Option<f64>, SystemParams, SimConfig)> {
        match &self.sweep {
            None => vec![(None, self.params.clone(), self.sim.clone())],
            Some(sw) => sw
                .values
                .iter()
                .map(|&v| {
                    let (p, s) = sw.variable.apply(v, &self.params, &self.sim);
                    (Some(v), p, s)
                })
                .collect(),
        }
    }
}

fn noise(db_field: &'static str, db: Option<f64>, w: Option<f64>, default: f64) -> Result<f64> {
    match (db, w) {
        (Some(_), Some(_)) => Err(Error::invalid(
            db_field,
            "give the noise power in dB or in watts, not both",
        )),
        (Some(d), None) => Ok(db_to_linear(d)),
        (None, Some(w)) => Ok(w),
        (None, None) => Ok(default),
    }
}

/// Parse and validate a JSON configuration.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let base = SystemParams::reference();
    let rp = raw.params;
    let params = SystemParams {
        n: rp.n.unwrap_or(base.n),
        p_t: rp.p_t.unwrap_or(base.p_t),
        p_j: rp.p_j.unwrap_or(base.p_j),
        p_max: rp.p_max.unwrap_or(base.p_max),
        alpha: rp.alpha.unwrap_or(base.alpha),
        theta: rp.theta.unwrap_or(base.theta),
        sigma_w2: noise("sigma_w2", rp.sigma_w2_db, rp.sigma_w2_w, base.sigma_w2)?,
        sigma_c2: noise("sigma_c2", rp.sigma_c2_db, rp.sigma_c2_w, base.sigma_c2)?,
        sigma_b2: noise("sigma_b2", rp.sigma_b2_db, rp.sigma_b2_w, base.sigma_b2)?,
        epsilon_c: rp.epsilon_c.unwrap_or(base.epsilon_c),
    };
    let defaults = SimConfig::default();
    let rs = raw.sim;
    let sim = SimConfig {
        trials: rs.trials.unwrap_or(defaults.trials),
        seed: rs.seed.unwrap_or(defaults.seed),
        mode: rs.mode.unwrap_or(defaults.mode),
        scheme: rs.scheme.unwrap_or(defaults.scheme),
        power_mode: rs.power_mode.unwrap_or(defaults.power_mode),
        jammers: rs.jammers,
        jamming: rs.jamming.unwrap_or(true),
    };
    let od = OptimizeOptions::default();
    let optimize = OptimizeOptions {
        grid_size: raw.optimize.grid_size.unwrap_or(od.grid_size),
        tol: raw.optimize.tol.unwrap_or(od.tol),
        zeta_form: raw.optimize.zeta_form.unwrap_or(od.zeta_form),
        contexts: raw.optimize.contexts.unwrap_or(od.contexts),
    };
    if optimize.grid_size < 8 {
        return Err(Error::invalid("optimize.grid_size", "must be >= 8"));
    }
    if !(optimize.tol > 0.0 && optimize.tol < 1.0) {
        return Err(Error::invalid("optimize.tol", "must lie in (0, 1)"));
    }
    if let Some(l) = rs.lambda {
        if !(l.is_finite() && l >= 0.0) {
            return Err(Error::invalid("sim.lambda", "must be finite and >= 0"));
        }
    }
    let sweep = raw.sweep.map(parse_sweep).transpose()?;
    let figure = raw.figure.as_deref().map(str::parse).transpose()?;
    let cfg = ExperimentConfig {
        params,
        sim,
        scheme: rs.scheme,
        sweep,
        optimize,
        lambda: rs.lambda,
        given_success: rs.given_success.unwrap_or(false),
        output_path: raw.output_path,
        figure,
    };
    for (_, p, s) in cfg.points() {
        p.validate()?;
        s.validate()?;
    }
    Ok(cfg)
}

fn parse_sweep(raw: RawSweep) -> Result<Sweep> {
    let variable: SweepVariable = raw.variable.parse()?;
    let v = raw.values;
    if v.is_empty() {
        return Err(Error::invalid("sweep.values", "grid is empty"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("sweep.values", "values must be finite"));
    }
    let up = v.windows(2).all(|w| w[1] > w[0]);
    let down = v.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return Err(Error::invalid(
            "sweep.values",
            "grid must be strictly monotone",
        ));
    }
    if variable.integral() && v.iter().any(|x| *x < 0.0 || x.fract() != 0.0) {
        return Err(Error::invalid(
            "sweep.values",
            format!("`{variable}` takes nonnegative integers"),
        ));
    }
    Ok(Sweep {
        variable,
        values: v,
    })
}

/// Figures whose data `reproduce` regenerates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
}

impl Figure {
    pub const ALL: [Figure; 6] = [
        Figure::Fig2,
        Figure::Fig3,
        Figure::Fig4,
        Figure::Fig5,
        Figure::Fig6,
        Figure::Fig7,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Figure::ALL
            .into_iter()
            .find(|f| f.as_str() == key)
            .ok_or_else(|| Error::invalid("figure", format!("expected fig2..fig7, got `{s}`")))
    }
}
