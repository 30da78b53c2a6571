//! System parameters, Rayleigh-fading realizations, and the relay / jammer
//! selection rules.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relay-selection scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Random relay selection.
    Rrs,
    /// Max-min relay selection.
    Mmrs,
}

impl Scheme {
    pub const ALL: [Scheme; 2] = [Scheme::Rrs, Scheme::Mmrs];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Rrs => "rrs",
            Scheme::Mmrs => "mmrs",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rrs" => Ok(Scheme::Rrs),
            "mmrs" => Ok(Scheme::Mmrs),
            other => Err(Error::invalid(
                "scheme",
                format!("unknown scheme `{other}`"),
            )),
        }
    }
}

/// Scalar model parameters. Powers and noise variances are linear watts.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub n: usize,
    pub p_t: f64,
    pub p_j: f64,
    pub p_max: f64,
    pub alpha: f64,
    pub theta: f64,
    pub sigma_w2: f64,
    pub sigma_c2: f64,
    pub sigma_b2: f64,
    pub epsilon_c: f64,
}

impl SystemParams {
    /// Evaluation setting used throughout the numerical section: 20 relays,
    /// P_T = 5 W, P_J = 1 W, alpha = 0.3, theta = 1, all noise at -5 dB.
    pub fn reference() -> Self {
        let noise = db_to_linear(-5.0);
        SystemParams {
            n: 20,
            p_t: 5.0,
            p_j: 1.0,
            p_max: 10.0,
            alpha: 0.3,
            theta: 1.0,
            sigma_w2: noise,
            sigma_c2: noise,
            sigma_b2: noise,
            epsilon_c: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(field: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(
                    field,
                    format!("must be finite and > 0, got {v}"),
                ))
            }
        }
        if self.n == 0 {
            return Err(Error::invalid("n", "need at least one relay"));
        }
        positive("p_t", self.p_t)?;
        positive("p_j", self.p_j)?;
        positive("p_max", self.p_max)?;
        positive("alpha", self.alpha)?;
        positive("theta", self.theta)?;
        positive("sigma_w2", self.sigma_w2)?;
        positive("sigma_c2", self.sigma_c2)?;
        positive("sigma_b2", self.sigma_b2)?;
        if self.p_t > self.p_max {
            return Err(Error::invalid(
                "p_t",
                format!("{} exceeds p_max = {}", self.p_t, self.p_max),
            ));
        }
        if self.p_j > self.p_max {
            return Err(Error::invalid(
                "p_j",
                format!("{} exceeds p_max = {}", self.p_j, self.p_max),
            ));
        }
        if !(self.epsilon_c > 0.0 && self.epsilon_c < 1.0) {
            return Err(Error::invalid(
                "epsilon_c",
                format!("must lie in (0, 1), got {}", self.epsilon_c),
            ));
        }
        Ok(())
    }

    /// The RRS closed form needs `p_t > p_j` for `(p_t / (p_t - p_j))^l`.
    pub fn rrs_closed_form_valid(&self) -> bool {
        self.p_t > self.p_j
    }

    /// Mean number of relays (excluding the selected one) whose gain to a
    /// receiver falls below `alpha`, rounded.
    pub fn default_jammer_count(&self) -> usize {
        default_jammer_count(self.n, self.alpha)
    }
}

/// `round((n - 1)(1 - e^{-alpha}))`.
pub fn default_jammer_count(n: usize, alpha: f64) -> usize {
    let others = n.saturating_sub(1) as f64;
    (others * -(-alpha).exp_m1()).round() as usize
}

pub fn db_to_linear(x_db: f64) -> f64 {
    10f64.powf(x_db / 10.0)
}

/// Squared channel gains for one time slot.
///
/// Per-relay vectors are indexed by relay; entries at the selected relay's
/// index in the `g_j*` vectors are drawn but never used.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub g_ac: Vec<f64>,
    pub g_cb: Vec<f64>,
    pub g_aw: f64,
    pub g_cw: f64,
    pub g_jw: Vec<f64>,
    pub g_jc: Vec<f64>,
    pub g_jb: Vec<f64>,
}

/// Draw every gain as an independent Exponential(1) variate.
pub fn sample_realization<R: Rng + ?Sized>(
    params: &SystemParams,
    rng: &mut R,
) -> ChannelRealization {
    sample_with(params.n, rng, |r| r.sample(Exp1))
}

/// Same distribution via `|h|^2` with `h ~ CN(0, 1)`; used to cross-check the
/// direct exponential sampler.
pub fn sample_realization_complex<R: Rng + ?Sized>(
    params: &SystemParams,
    rng: &mut R,
) -> ChannelRealization {
    sample_with(params.n, rng, |r| {
        let re: f64 = r.sample(StandardNormal);
        let im: f64 = r.sample(StandardNormal);
        0.5 * (re * re + im * im)
    })
}

fn sample_with<R: Rng + ?Sized>(
    n: usize,
    rng: &mut R,
    mut gain: impl FnMut(&mut R) -> f64,
) -> ChannelRealization {
    let mut vec = |rng: &mut R| (0..n).map(|_| gain(rng)).collect::<Vec<_>>();
    let g_ac = vec(rng);
    let g_cb = vec(rng);
    let g_jw = vec(rng);
    let g_jc = vec(rng);
    let g_jb = vec(rng);
    let mut pair = (0..2).map(|_| gain(rng));
    let g_aw = pair.next().unwrap_or_default();
    let g_cw = pair.next().unwrap_or_default();
    ChannelRealization {
        g_ac,
        g_cb,
        g_aw,
        g_cw,
        g_jw,
        g_jc,
        g_jb,
    }
}

/// Exponential(1) conditioned on `[0, alpha]`, by inversion.
pub fn sample_truncated_exp<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> f64 {
    let u: f64 = rng.random();
    let mass = -(-alpha).exp_m1();
    -(-u * mass).ln_1p()
}

pub fn select_rrs<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<usize> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one relay"));
    }
    Ok(rng.random_range(0..n))
}

/// Index maximising `min(g_ac[i], g_cb[i])`; ties go to the lowest index.
pub fn select_mmrs(g_ac: &[f64], g_cb: &[f64]) -> Result<usize> {
    if g_ac.is_empty() {
        return Err(Error::invalid("g_ac", "no relays"));
    }
    if g_ac.len() != g_cb.len() {
        return Err(Error::invalid(
            "g_cb",
            format!(
                "length {} differs from g_ac length {}",
                g_cb.len(),
                g_ac.len()
            ),
        ));
    }
    let mut best = 0;
    let mut best_min = g_ac[0].min(g_cb[0]);
    for (i, (a, b)) in g_ac.iter().zip(g_cb).enumerate().skip(1) {
        let m = a.min(*b);
        if m > best_min {
            best = i;
            best_min = m;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hop {
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JammerSet {
    pub hop: Hop,
    pub members: Vec<usize>,
    pub l: usize,
}

/// Relays other than `selected` whose gain to the hop's receiver is below
/// `alpha`.
pub fn select_jammers(
    gains_to_receiver: &[f64],
    alpha: f64,
    selected: usize,
    hop: Hop,
) -> Result<JammerSet> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha", format!("must be > 0, got {alpha}")));
    }
    if selected >= gains_to_receiver.len() {
        return Err(Error::invalid(
            "selected",
            format!(
                "index {selected} out of range for {} relays",
                gains_to_receiver.len()
            ),
        ));
    }
    let members: Vec<usize> = gains_to_receiver
        .iter()
        .enumerate()
        .filter(|&(i, &g)| i != selected && g < alpha)
        .map(|(i, _)| i)
        .collect();
    let l = members.len();
    Ok(JammerSet { hop, members, l })
}
