//! Monte Carlo estimators for every closed-form quantity.
//!
//! Trials are split into fixed-size chunks ([`crate::rng::CHUNK_TRIALS`]),
//! each driven by its own substream, and chunk statistics are merged in chunk
//! order. Results are therefore bit-identical for any rayon worker count.
//!
//! Two jammer models are supported:
//!
//! * [`Mode::FormulaConsistent`] matches the derivations: a fixed jammer
//!   population whose gains to the receiver are drawn from Exp(1) truncated
//!   to `[0, alpha]`. Under RRS all `n - 1` other relays jam on both hops;
//!   under MMRS and at Willie the population is `l` relays (by default the
//!   rounded mean count).
//! * [`Mode::Scheme`] applies the literal threshold rule to each sampled
//!   realization, so the jammer count is random.
//!
//! The [`LinkSample`] and [`DetectionSample`] types store the per-trial
//! gain statistics that do not depend on powers or thresholds, so sweeps
//! over `P_T`, `P_J`, noise or `lambda` reuse the same fading draws.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::MmrsDetectionContext;
use crate::error::{Error, Result};
use crate::model::{
    sample_realization, sample_truncated_exp, select_jammers, select_mmrs, select_rrs, Hop, Scheme,
    SystemParams,
};
use crate::rate::rate_bits;
use crate::rng::{chunk_rng, chunks, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    FormulaConsistent,
    Scheme,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::FormulaConsistent => "formula_consistent",
            Mode::Scheme => "scheme",
        }
    }
}

/// How Alice sets her power under MMRS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerMode {
    /// Alice and Carol both transmit at `P_T`.
    FixedPt,
    /// Alice inverts the first-hop channel so that `SIR_AC = theta`; Carol
    /// transmits at `P_T`.
    ChannelInversion,
}

impl PowerMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PowerMode::FixedPt => "fixed_pt",
            PowerMode::ChannelInversion => "channel_inversion",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub trials: usize,
    pub seed: u64,
    pub mode: Mode,
    pub scheme: Scheme,
    /// Ignored under RRS.
    pub power_mode: PowerMode,
    /// Overrides the formula-consistent jammer count `l` (MMRS links and
    /// Willie's statistic).
    pub jammers: Option<usize>,
    /// When false no relay jams.
    pub jamming: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            trials: 100_000,
            seed: 1,
            mode: Mode::FormulaConsistent,
            scheme: Scheme::Rrs,
            power_mode: PowerMode::FixedPt,
            jammers: None,
            jamming: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be >= 1"));
        }
        Ok(())
    }

    pub fn with_scheme(&self, scheme: Scheme) -> Self {
        SimConfig {
            scheme,
            ..self.clone()
        }
    }

    fn inversion(&self) -> bool {
        self.scheme == Scheme::Mmrs && self.power_mode == PowerMode::ChannelInversion
    }
}

/// Jammer count seen by Willie in formula-consistent mode.
pub fn detection_jammers(params: &SystemParams, cfg: &SimConfig) -> usize {
    if !cfg.jamming {
        return 0;
    }
    cfg.jammers.unwrap_or_else(|| params.default_jammer_count())
}

/// Jammers per hop at the legitimate receivers in formula-consistent mode.
pub fn link_jammers(params: &SystemParams, cfg: &SimConfig) -> usize {
    if !cfg.jamming {
        return 0;
    }
    match cfg.scheme {
        Scheme::Rrs => params.n - 1,
        Scheme::Mmrs => cfg.jammers.unwrap_or_else(|| params.default_jammer_count()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricEstimate {
    pub mean: f64,
    /// 95% normal-approximation half-width, `1.96 s / sqrt(trials)`.
    pub half_width: f64,
    pub trials: usize,
    pub seed: u64,
    pub mode: Mode,
}

impl MetricEstimate {
    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        self.half_width / 1.96
    }
}

/// Running mean / second moment, merged with Chan's pairwise update.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let d = x - self.mean;
        self.mean += d / self.count;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if other.count == 0.0 {
            return self;
        }
        if self.count == 0.0 {
            return other;
        }
        let count = self.count + other.count;
        let d = other.mean - self.mean;
        Moments {
            count,
            mean: self.mean + d * other.count / count,
            m2: self.m2 + other.m2 + d * d * self.count * other.count / count,
        }
    }

    fn estimate(self, seed: u64, mode: Mode) -> MetricEstimate {
        let var = if self.count > 1.0 {
            self.m2 / (self.count - 1.0)
        } else {
            0.0
        };
        MetricEstimate {
            mean: self.mean,
            half_width: 1.96 * (var / self.count.max(1.0)).sqrt(),
            trials: self.count as usize,
            seed,
            mode,
        }
    }
}

fn merge_ordered(parts: Vec<Moments>) -> Moments {
    parts.into_iter().fold(Moments::default(), Moments::merge)
}

/// Estimate `E[f]` with one substream per chunk.
pub(crate) fn run_trials<F>(
    trials: usize,
    seed: u64,
    purpose: Purpose,
    mode: Mode,
    f: F,
) -> MetricEstimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let parts: Vec<Moments> = chunks(trials)
        .into_par_iter()
        .map(|(c, len)| {
            let mut rng = chunk_rng(seed, purpose, c);
            let mut m = Moments::default();
            for _ in 0..len {
                m.push(f(&mut rng));
            }
            m
        })
        .collect();
    merge_ordered(parts).estimate(seed, mode)
}

/// Draw per-chunk records in parallel, in chunk order.
fn draw_chunks<T, F>(trials: usize, seed: u64, purpose: Purpose, draw: F) -> Vec<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    chunks(trials)
        .into_par_iter()
        .map(|(c, len)| {
            let mut rng = chunk_rng(seed, purpose, c);
            (0..len).map(|_| draw(&mut rng)).collect()
        })
        .collect()
}

fn estimate_over<T, F>(data: &[Vec<T>], seed: u64, mode: Mode, f: F) -> MetricEstimate
where
    T: Sync,
    F: Fn(&T) -> Option<f64> + Sync,
{
    let parts: Vec<Moments> = data
        .par_iter()
        .map(|chunk| {
            let mut m = Moments::default();
            for x in chunk.iter().filter_map(&f) {
                m.push(x);
            }
            m
        })
        .collect();
    merge_ordered(parts).estimate(seed, mode)
}

fn sum_truncated(rng: &mut ChaCha8Rng, count: usize, alpha: f64) -> f64 {
    (0..count).map(|_| sample_truncated_exp(rng, alpha)).sum()
}

fn sum_exp(rng: &mut ChaCha8Rng, count: usize) -> f64 {
    (0..count).map(|_| rng.sample::<f64, _>(Exp1)).sum()
}

fn select_relay(scheme: Scheme, g_ac: &[f64], g_cb: &[f64], rng: &mut ChaCha8Rng) -> usize {
    match scheme {
        Scheme::Rrs => select_rrs(g_ac.len(), rng).unwrap_or(0),
        Scheme::Mmrs => select_mmrs(g_ac, g_cb).unwrap_or(0),
    }
}

/// Power-independent per-trial link statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkDraw {
    pub g_ac: f64,
    /// Sum of jammer gains at the selected relay.
    pub jam_c: f64,
    pub g_cb: f64,
    /// Sum of jammer gains at Bob.
    pub jam_b: f64,
}

/// Power settings used to turn a [`LinkDraw`] into SIRs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkPowers {
    pub p_t: f64,
    pub p_j: f64,
    pub theta: f64,
    pub sigma_c2: f64,
    pub sigma_b2: f64,
    pub inversion: bool,
}

impl LinkPowers {
    pub fn new(params: &SystemParams, cfg: &SimConfig) -> Self {
        LinkPowers {
            p_t: params.p_t,
            p_j: params.p_j,
            theta: params.theta,
            sigma_c2: params.sigma_c2,
            sigma_b2: params.sigma_b2,
            inversion: cfg.inversion(),
        }
    }

    pub fn sirs(&self, d: &LinkDraw) -> (f64, f64) {
        let sir_ac = if self.inversion {
            self.theta
        } else {
            self.p_t * d.g_ac / (self.p_j * d.jam_c + self.sigma_c2)
        };
        let sir_cb = self.p_t * d.g_cb / (self.p_j * d.jam_b + self.sigma_b2);
        (sir_ac, sir_cb)
    }
}

#[derive(Debug, Clone)]
pub struct LinkSample {
    chunks: Vec<Vec<LinkDraw>>,
    seed: u64,
    mode: Mode,
}

impl LinkSample {
    /// Draws depend on `(n, alpha, scheme, mode, jammer policy, seed,
    /// trials)` only.
    pub fn draw(params: &SystemParams, cfg: &SimConfig) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        let l = link_jammers(params, cfg);
        let (scheme, mode, alpha, jamming) = (cfg.scheme, cfg.mode, params.alpha, cfg.jamming);
        let chunks = draw_chunks(cfg.trials, cfg.seed, Purpose::Link, |rng| {
            let r = sample_realization(params, rng);
            let k = select_relay(scheme, &r.g_ac, &r.g_cb, rng);
            let (jam_c, jam_b) = match (jamming, mode) {
                (false, _) => (0.0, 0.0),
                (true, Mode::FormulaConsistent) => {
                    (sum_truncated(rng, l, alpha), sum_truncated(rng, l, alpha))
                }
                (true, Mode::Scheme) => {
                    let sum = |gains: &[f64], hop| {
                        select_jammers(gains, alpha, k, hop)
                            .map(|j| j.members.iter().map(|&i| gains[i]).sum())
                            .unwrap_or(0.0)
                    };
                    (sum(&r.g_jc, Hop::First), sum(&r.g_jb, Hop::Second))
                }
            };
            LinkDraw {
                g_ac: r.g_ac[k],
                jam_c,
                g_cb: r.g_cb[k],
                jam_b,
            }
        });
        Ok(LinkSample {
            chunks,
            seed: cfg.seed,
            mode: cfg.mode,
        })
    }

    pub fn trials(&self) -> usize {
        self.chunks.iter().map(Vec::len).sum()
    }

    /// Outage of either hop.
    pub fn outage(&self, pw: &LinkPowers) -> MetricEstimate {
        estimate_over(&self.chunks, self.seed, self.mode, |d| {
            let (a, b) = pw.sirs(d);
            Some(f64::from(u8::from(a.min(b) < pw.theta)))
        })
    }

    /// Outage of the first hop only.
    pub fn first_hop_outage(&self, pw: &LinkPowers) -> MetricEstimate {
        estimate_over(&self.chunks, self.seed, self.mode, |d| {
            let (a, _) = pw.sirs(d);
            Some(f64::from(u8::from(a < pw.theta)))
        })
    }

    /// `E[min(R_AC, R_CB)]`, unconditionally or over non-outage trials only.
    pub fn min_rate(&self, pw: &LinkPowers, given_success: bool) -> MetricEstimate {
        estimate_over(&self.chunks, self.seed, self.mode, |d| {
            let (a, b) = pw.sirs(d);
            let m = a.min(b);
            (!given_success || m >= pw.theta).then(|| rate_bits(m))
        })
    }

    pub fn draws(&self) -> impl Iterator<Item = &LinkDraw> {
        self.chunks.iter().flatten()
    }
}

pub fn simulate_outage(params: &SystemParams, cfg: &SimConfig) -> Result<MetricEstimate> {
    Ok(LinkSample::draw(params, cfg)?.outage(&LinkPowers::new(params, cfg)))
}

pub fn simulate_first_hop_outage(params: &SystemParams, cfg: &SimConfig) -> Result<MetricEstimate> {
    Ok(LinkSample::draw(params, cfg)?.first_hop_outage(&LinkPowers::new(params, cfg)))
}

pub fn simulate_expected_min_rate(
    params: &SystemParams,
    cfg: &SimConfig,
) -> Result<MetricEstimate> {
    Ok(LinkSample::draw(params, cfg)?.min_rate(&LinkPowers::new(params, cfg), false))
}

/// Power-independent per-trial draws for Willie's statistic. H0 and H1 use
/// independent realizations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionDraw {
    /// Jammer gain sum at Willie under H0.
    pub jam_h0: f64,
    /// Transmitter-to-Willie gain under H1.
    pub g_signal: f64,
    /// Jammer gain sum at Willie under H1.
    pub jam_h1: f64,
    /// Selected relay's first-hop gain (channel inversion only).
    pub g_ac: f64,
    /// Jammer gain sum at the relay (channel inversion only).
    pub jam_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionEstimate {
    pub zeta: MetricEstimate,
    pub pfa: MetricEstimate,
    pub pmd: MetricEstimate,
}

#[derive(Debug, Clone)]
pub struct DetectionSample {
    chunks: Vec<Vec<DetectionDraw>>,
    seed: u64,
    mode: Mode,
    inversion: bool,
}

impl DetectionSample {
    pub fn draw(params: &SystemParams, cfg: &SimConfig) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        let l = detection_jammers(params, cfg);
        let (scheme, mode, alpha, jamming) = (cfg.scheme, cfg.mode, params.alpha, cfg.jamming);
        let inversion = cfg.inversion();
        let chunks = draw_chunks(cfg.trials, cfg.seed, Purpose::Detection, |rng| match mode {
            Mode::FormulaConsistent => {
                let jam_h0 = sum_exp(rng, l);
                let g_signal: f64 = rng.sample(Exp1);
                let jam_h1 = sum_exp(rng, l);
                let (g_ac, jam_c) = if inversion {
                    let g1: Vec<f64> = (0..params.n).map(|_| rng.sample(Exp1)).collect();
                    let g2: Vec<f64> = (0..params.n).map(|_| rng.sample(Exp1)).collect();
                    let k = select_mmrs(&g1, &g2).unwrap_or(0);
                    (g1[k], sum_truncated(rng, l, alpha))
                } else {
                    (0.0, 0.0)
                };
                DetectionDraw {
                    jam_h0,
                    g_signal,
                    jam_h1,
                    g_ac,
                    jam_c,
                }
            }
            Mode::Scheme => {
                // Willie observes the first hop: jammers are relays whose
                // gain to the selected relay is below alpha.
                let hop = |rng: &mut ChaCha8Rng| {
                    let r = sample_realization(params, rng);
                    let k = select_relay(scheme, &r.g_ac, &r.g_cb, rng);
                    let members = if jamming {
                        select_jammers(&r.g_jc, alpha, k, Hop::First)
                            .map(|j| j.members)
                            .unwrap_or_default()
                    } else {
                        Vec::new()
                    };
                    let jam_w: f64 = members.iter().map(|&i| r.g_jw[i]).sum();
                    let jam_c: f64 = members.iter().map(|&i| r.g_jc[i]).sum();
                    (r, k, jam_w, jam_c)
                };
                let (_, _, jam_h0, _) = hop(rng);
                let (r, k, jam_h1, jam_c) = hop(rng);
                DetectionDraw {
                    jam_h0,
                    g_signal: r.g_aw,
                    jam_h1,
                    g_ac: r.g_ac[k],
                    jam_c,
                }
            }
        });
        Ok(DetectionSample {
            chunks,
            seed: cfg.seed,
            mode: cfg.mode,
            inversion,
        })
    }

    fn signal_power(&self, d: &DetectionDraw, params: &SystemParams) -> f64 {
        if self.inversion {
            params.theta * (params.p_j * d.jam_c + params.sigma_c2) / d.g_ac
        } else {
            params.p_t
        }
    }

    /// Detection error `P_FA + P_MD` at threshold `lambda`.
    pub fn evaluate(&self, params: &SystemParams, lambda: f64) -> DetectionEstimate {
        let y0 = |d: &DetectionDraw| params.p_j * d.jam_h0 + params.sigma_w2;
        let y1 = |d: &DetectionDraw| {
            self.signal_power(d, params) * d.g_signal + params.p_j * d.jam_h1 + params.sigma_w2
        };
        let ind = |b: bool| f64::from(u8::from(b));
        DetectionEstimate {
            zeta: estimate_over(&self.chunks, self.seed, self.mode, |d| {
                Some(ind(y0(d) >= lambda) + ind(y1(d) < lambda))
            }),
            pfa: estimate_over(&self.chunks, self.seed, self.mode, |d| {
                Some(ind(y0(d) >= lambda))
            }),
            pmd: estimate_over(&self.chunks, self.seed, self.mode, |d| {
                Some(ind(y1(d) < lambda))
            }),
        }
    }
}

pub fn simulate_dep(params: &SystemParams, cfg: &SimConfig, lambda: f64) -> Result<MetricEstimate> {
    Ok(DetectionSample::draw(params, cfg)?
        .evaluate(params, lambda)
        .zeta)
}

/// Selected relay's first-hop gain under max-min selection.
pub fn sample_mmrs_gains(n: usize, cfg: &SimConfig) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one relay"));
    }
    cfg.validate()?;
    Ok(draw_chunks(
        cfg.trials,
        cfg.seed,
        Purpose::SelectedGain,
        |rng| {
            let g1: Vec<f64> = (0..n).map(|_| rng.sample(Exp1)).collect();
            let g2: Vec<f64> = (0..n).map(|_| rng.sample(Exp1)).collect();
            g1[select_mmrs(&g1, &g2).unwrap_or(0)]
        },
    ))
}

/// Empirical CDF of the MMRS-selected first-hop gain at each grid point.
pub fn simulate_mmrs_gain_cdf(
    x_grid: &[f64],
    n: usize,
    cfg: &SimConfig,
) -> Result<Vec<MetricEstimate>> {
    if x_grid.is_empty() {
        return Err(Error::invalid("x_grid", "empty grid"));
    }
    let gains = sample_mmrs_gains(n, cfg)?;
    Ok(x_grid
        .iter()
        .map(|&x| {
            estimate_over(&gains, cfg.seed, cfg.mode, |&g| {
                Some(f64::from(u8::from(g < x)))
            })
        })
        .collect())
}

/// Fading contexts for MMRS detection with channel inversion.
pub fn sample_mmrs_contexts(
    params: &SystemParams,
    cfg: &SimConfig,
    count: usize,
) -> Result<Vec<MmrsDetectionContext>> {
    params.validate()?;
    if count == 0 {
        return Err(Error::invalid("count", "need at least one context"));
    }
    let l = detection_jammers(params, cfg);
    let (mode, alpha, jamming) = (cfg.mode, params.alpha, cfg.jamming);
    let parts = draw_chunks(count, cfg.seed, Purpose::FadingContext, |rng| {
        let r = sample_realization(params, rng);
        let k = select_mmrs(&r.g_ac, &r.g_cb).unwrap_or(0);
        let jam: Vec<f64> = match (jamming, mode) {
            (false, _) => Vec::new(),
            (true, Mode::FormulaConsistent) => {
                (0..l).map(|_| sample_truncated_exp(rng, alpha)).collect()
            }
            (true, Mode::Scheme) => select_jammers(&r.g_jc, alpha, k, Hop::First)
                .map(|j| j.members.iter().map(|&i| r.g_jc[i]).collect())
                .unwrap_or_default(),
        };
        MmrsDetectionContext::new(r.g_ac[k], &jam, params)
    });
    Ok(parts.into_iter().flatten().collect())
}
