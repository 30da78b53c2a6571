//! Warden-side detection performance.
//!
//! Willie runs a radiometer on the average received power `Y` and decides
//! "transmission" when `Y >= lambda`. With `l` jammers of power `P_J` and
//! signal power `P_s` at Willie,
//!
//! ```text
//! H0: Y = P_J * S + sigma_w2              S ~ Erlang(l, 1)
//! H1: Y = P_s * X + P_J * S + sigma_w2    X ~ Exp(1)
//! ```
//!
//! Under RRS `P_s = P_T`. Under MMRS with channel-inversion power control
//! `P_s = P_J / phi`, which turns the MMRS expressions into the RRS ones with
//! `P_T` replaced by `P_J / phi`. Both schemes therefore share [`ZetaCurve`].
//!
//! Two evaluations of the missed-detection probability are provided:
//! the closed form (an unconditional expectation that omits the positivity
//! clamp of the conditional exponential CDF, so it can go negative) and the
//! exact value obtained by one-dimensional quadrature.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::model::{Scheme, SystemParams};
use crate::montecarlo::{run_trials, MetricEstimate, Mode};
use crate::numeric::{bisect, golden_section_min, integrate, KahanSum};
use crate::rng::Purpose;

/// `P(Erlang(l, 1) >= a)`, the regularized upper incomplete gamma `Q(l, a)`.
pub fn erlang_tail(l: usize, a: f64) -> Result<f64> {
    if l == 0 {
        return Err(Error::invalid("l", "Erlang tail needs at least one jammer"));
    }
    if !(a >= 0.0) {
        return Err(Error::invalid("a", format!("must be >= 0, got {a}")));
    }
    let mut term = (-a).exp();
    let mut sum = KahanSum::default();
    sum.add(term);
    for j in 1..l {
        term *= a / j as f64;
        sum.add(term);
    }
    Ok(sum.value().clamp(0.0, 1.0))
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// Erlang(l, 1) density at `x`.
fn erlang_pdf(l: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return if l == 1 && x == 0.0 { 1.0 } else { 0.0 };
    }
    ((l - 1) as f64 * x.ln() - x - ln_factorial(l - 1)).exp()
}

/// False-alarm probability `P(P_J S + sigma_w2 >= lambda)`.
///
/// With no jammers the statistic is the constant `sigma_w2`.
pub fn pfa(l: usize, lambda: f64, sigma_w2: f64, p_j: f64) -> Result<f64> {
    if !(p_j > 0.0) {
        return Err(Error::invalid("p_j", format!("must be > 0, got {p_j}")));
    }
    if lambda <= sigma_w2 {
        return Ok(1.0);
    }
    if l == 0 {
        return Ok(0.0);
    }
    erlang_tail(l, (lambda - sigma_w2) / p_j)
}

/// Closed-form missed detection `1 - (p_s/(p_s-p_j))^l exp((sigma_w2-lambda)/p_s)`
/// for a generic signal power `p_s`. Unclamped.
fn pmd_closed_raw(l: usize, lambda: f64, sigma_w2: f64, p_s: f64, p_j: f64) -> f64 {
    if lambda <= sigma_w2 {
        return 0.0;
    }
    let growth = if l == 0 {
        1.0
    } else {
        (p_s / (p_s - p_j)).powi(l as i32)
    };
    1.0 - growth * ((sigma_w2 - lambda) / p_s).exp()
}

/// Closed-form RRS missed detection, returned raw (may be negative).
pub fn pmd_rrs_paper(l: usize, lambda: f64, sigma_w2: f64, p_t: f64, p_j: f64) -> Result<f64> {
    if l > 0 && p_t <= p_j {
        return Err(Error::ClosedFormInvalid(format!(
            "RRS missed detection needs p_t > p_j (p_t = {p_t}, p_j = {p_j})"
        )));
    }
    Ok(pmd_closed_raw(l, lambda, sigma_w2, p_t, p_j))
}

/// `E[exp(-(a - p_j S)/p_s); S < a/p_j]` for `S ~ Erlang(l)`, the part of the
/// missed-detection integral the closed form extends past `S = a/p_j`.
///
/// With `b = a/p_j` and `r = p_j/p_s` the integrand is
/// `e^{-a/p_s} s^{l-1} e^{(r-1)s} / (l-1)!`, integrated over `[0, b]`.
fn weighted_lower_mass(l: usize, b: f64, r: f64) -> f64 {
    let lf = l as f64;
    let x = (1.0 - r) * b;
    if x >= 0.0 {
        if x > lf + 10.0 {
            // e^{-a/p_s} (1-r)^{-l} P(l, x)
            let lower = 1.0 - erlang_tail(l, x).unwrap_or(0.0);
            return (-r * b - lf * (1.0 - r).ln()).exp() * lower;
        }
        // e^{-b} b^l / l! * sum_k x^k l! / (l+k)!
        let mut term = 1.0;
        let mut sum = KahanSum::default();
        sum.add(term);
        let mut k = 0usize;
        while k < 10_000 {
            term *= x / (lf + k as f64 + 1.0);
            sum.add(term);
            k += 1;
            if term < 1e-17 * sum.value() && k as f64 > x {
                break;
            }
        }
        return (-b + lf * b.ln() - ln_factorial(l)).exp() * sum.value();
    }
    let mu = -x;
    if mu > 2.0 * lf + 10.0 {
        // Finite antiderivative of s^{l-1} e^{c s}; the e^{mu} terms dominate
        // so the alternating sum is well conditioned here.
        let c = r - 1.0;
        let m = l - 1;
        let mut acc = KahanSum::default();
        let mut t = (-b).exp();
        for j in 0..=m {
            if j > 0 {
                t *= b / j as f64;
            }
            let sign = if (m - j).is_multiple_of(2) { 1.0 } else { -1.0 };
            acc.add(sign * t / c.powi((m - j + 1) as i32));
        }
        let sign = if l.is_multiple_of(2) { 1.0 } else { -1.0 };
        acc.add(sign * (-r * b - lf * c.ln()).exp());
        return acc.value().max(0.0);
    }
    // e^{-b} b^l / (l-1)! * E[1/(l+K)], K ~ Poisson(mu)
    let mut p = (-mu).exp();
    let mut sum = KahanSum::default();
    let mut k = 0usize;
    loop {
        sum.add(p / (lf + k as f64));
        k += 1;
        p *= mu / k as f64;
        if (k as f64 > mu && p < 1e-18) || k > 100_000 {
            break;
        }
    }
    (-b + lf * b.ln() - ln_factorial(l - 1)).exp() * sum.value()
}

/// Exact `P(p_s X + p_j S + sigma_w2 < lambda)` with `X ~ Exp(1)` and
/// `S ~ Erlang(l)`.
pub fn pmd_exact_analytic(l: usize, lambda: f64, sigma_w2: f64, p_s: f64, p_j: f64) -> f64 {
    let excess = lambda - sigma_w2;
    if excess <= 0.0 {
        return 0.0;
    }
    if l == 0 {
        return -(-excess / p_s).exp_m1();
    }
    let b = excess / p_j;
    let below = 1.0 - erlang_tail(l, b).unwrap_or(1.0);
    (below - weighted_lower_mass(l, b, p_j / p_s)).clamp(0.0, 1.0)
}

/// Same quantity by composite Gauss-Legendre quadrature over `S`.
pub fn pmd_exact_quadrature(l: usize, lambda: f64, sigma_w2: f64, p_s: f64, p_j: f64) -> f64 {
    let excess = lambda - sigma_w2;
    if excess <= 0.0 {
        return 0.0;
    }
    if l == 0 {
        return -(-excess / p_s).exp_m1();
    }
    let a = excess / p_j;
    // Past `s_hi` the Erlang density is below ~1e-17 of its peak.
    let s_hi = l as f64 + 12.0 * (l as f64).sqrt() + 40.0;
    let below = 1.0 - erlang_tail(l, a).unwrap_or(1.0);
    let weighted = integrate(
        |s| erlang_pdf(l, s) * (-(excess - p_j * s) / p_s).exp(),
        0.0,
        a.min(s_hi),
        64,
    );
    (below - weighted).clamp(0.0, 1.0)
}

/// Monte Carlo estimate of the exact missed-detection probability with signal
/// power `p_t`.
pub fn pmd_exact(
    l: usize,
    lambda: f64,
    sigma_w2: f64,
    p_t: f64,
    p_j: f64,
    trials: usize,
    seed: u64,
) -> Result<MetricEstimate> {
    if trials == 0 {
        return Err(Error::invalid("trials", "must be >= 1"));
    }
    Ok(run_trials(
        trials,
        seed,
        Purpose::Scratch,
        Mode::FormulaConsistent,
        |rng| {
            let x: f64 = rng.sample(Exp1);
            let s: f64 = (0..l).map(|_| rng.sample::<f64, _>(Exp1)).sum();
            f64::from(u8::from(p_t * x + p_j * s + sigma_w2 < lambda))
        },
    ))
}

/// Which evaluation of the missed-detection term to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaForm {
    /// Closed-form expression with the missed-detection term clamped to [0, 1].
    ClosedForm,
    /// Exact missed-detection probability by quadrature.
    Exact,
}

impl ZetaForm {
    pub fn as_str(self) -> &'static str {
        match self {
            ZetaForm::ClosedForm => "closed_form",
            ZetaForm::Exact => "exact",
        }
    }
}

/// Detection error at one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaPoint {
    pub zeta: f64,
    pub pfa: f64,
    /// Missed detection after clamping to [0, 1].
    pub pmd: f64,
    /// Closed-form missed detection before clamping; equals `pmd` for the
    /// exact form.
    pub pmd_raw: f64,
    /// A clamp fired (negative raw missed detection or `zeta > 1`).
    pub clamped: bool,
}

/// Detection error as a function of the threshold for fixed `(l, p_s, p_j,
/// sigma_w2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZetaCurve {
    pub l: usize,
    /// Signal power seen at Willie.
    pub p_signal: f64,
    pub p_j: f64,
    pub sigma_w2: f64,
}

impl ZetaCurve {
    pub fn rrs(l: usize, params: &SystemParams) -> Self {
        ZetaCurve {
            l,
            p_signal: params.p_t,
            p_j: params.p_j,
            sigma_w2: params.sigma_w2,
        }
    }

    pub fn mmrs(ctx: &MmrsDetectionContext, sigma_w2: f64, p_j: f64) -> Self {
        ZetaCurve {
            l: ctx.l,
            p_signal: p_j / ctx.phi,
            p_j,
            sigma_w2,
        }
    }

    pub fn closed_form_valid(&self) -> bool {
        self.l == 0 || self.p_signal > self.p_j
    }

    pub fn eval(&self, lambda: f64, form: ZetaForm) -> ZetaPoint {
        if lambda <= self.sigma_w2 {
            return ZetaPoint {
                zeta: 1.0,
                pfa: 1.0,
                pmd: 0.0,
                pmd_raw: 0.0,
                clamped: false,
            };
        }
        let pfa = pfa(self.l, lambda, self.sigma_w2, self.p_j).unwrap_or(1.0);
        let pmd_raw = match form {
            ZetaForm::ClosedForm => {
                pmd_closed_raw(self.l, lambda, self.sigma_w2, self.p_signal, self.p_j)
            }
            ZetaForm::Exact => {
                pmd_exact_analytic(self.l, lambda, self.sigma_w2, self.p_signal, self.p_j)
            }
        };
        let pmd = pmd_raw.clamp(0.0, 1.0);
        let sum = pfa + pmd;
        ZetaPoint {
            zeta: sum.min(1.0),
            pfa,
            pmd,
            pmd_raw,
            clamped: pmd != pmd_raw || sum > 1.0,
        }
    }

    /// Threshold where the closed-form missed detection crosses zero.
    pub fn clamp_kink(&self) -> Option<f64> {
        (self.l > 0 && self.closed_form_valid()).then(|| {
            self.sigma_w2
                + self.l as f64 * self.p_signal * (self.p_signal / (self.p_signal - self.p_j)).ln()
        })
    }

    /// Analytic `d zeta / d lambda` of the unclamped closed form, for
    /// `lambda > sigma_w2`.
    pub fn derivative(&self, lambda: f64) -> f64 {
        let excess = lambda - self.sigma_w2;
        let l = self.l;
        let d_pfa = if l == 0 {
            0.0
        } else {
            -erlang_pdf(l, excess / self.p_j) / self.p_j
        };
        let growth = if l == 0 {
            1.0
        } else {
            (self.p_signal / (self.p_signal - self.p_j)).powi(l as i32)
        };
        d_pfa + growth * (-excess / self.p_signal).exp() / self.p_signal
    }

    /// Minimise `zeta` over `lambda > sigma_w2`.
    pub fn optimal_threshold(&self, form: ZetaForm) -> Result<DetectionAnalysis> {
        if form == ZetaForm::ClosedForm && !self.closed_form_valid() {
            return Err(Error::ClosedFormInvalid(format!(
                "signal power {} must exceed jammer power {}",
                self.p_signal, self.p_j
            )));
        }
        let zeta = |x: f64| self.eval(x, form).zeta;
        minimise_threshold(zeta, self.sigma_w2, self.p_signal, |lo, hi, lambda| {
            self.classify(form, lo, hi, lambda)
        })
        .map(|(lambda, kind)| self.analysis_at(lambda, kind, form))
    }

    fn classify(&self, form: ZetaForm, lo: f64, hi: f64, lambda: f64) -> (f64, OptimumKind) {
        let scale = self.sigma_w2 + self.p_signal;
        if lambda - self.sigma_w2 <= 1e-9 * scale {
            return (lambda, OptimumKind::NoiseFloor);
        }
        if form == ZetaForm::Exact {
            return (lambda, OptimumKind::Stationary);
        }
        if let Some(kink) = self.clamp_kink() {
            if (lambda - kink).abs() <= 1e-6 * kink && self.derivative(kink * (1.0 + 1e-12)) >= 0.0
            {
                return (kink, OptimumKind::ClampKink);
            }
        }
        // Polish the stationary point on the analytic derivative.
        let (dl, dh) = (self.derivative(lo), self.derivative(hi));
        let unclamped = |x: f64| self.eval(x, form).pmd_raw >= 0.0;
        if dl < 0.0 && dh > 0.0 && unclamped(lo) && unclamped(hi) {
            let (a, b) = bisect(|x| self.derivative(x), lo, hi, 1e-15, 200);
            return (0.5 * (a + b), OptimumKind::Stationary);
        }
        (lambda, OptimumKind::Stationary)
    }

    fn analysis_at(&self, lambda: f64, kind: OptimumKind, form: ZetaForm) -> DetectionAnalysis {
        let p = self.eval(lambda, form);
        DetectionAnalysis {
            lambda_star: lambda,
            zeta_star: p.zeta,
            pfa_at_star: p.pfa,
            pmd_at_star: p.pmd,
            clamped: p.clamped,
            kind,
            form,
        }
    }
}

/// Where the minimum of `zeta` sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimumKind {
    /// Smooth interior minimum, `d zeta / d lambda = 0`.
    Stationary,
    /// At the threshold where the closed-form missed detection leaves zero.
    ClampKink,
    /// Infimum approached as `lambda -> sigma_w2` from above.
    NoiseFloor,
}

impl OptimumKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OptimumKind::Stationary => "stationary",
            OptimumKind::ClampKink => "clamp_kink",
            OptimumKind::NoiseFloor => "noise_floor",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionAnalysis {
    pub lambda_star: f64,
    pub zeta_star: f64,
    pub pfa_at_star: f64,
    pub pmd_at_star: f64,
    pub clamped: bool,
    pub kind: OptimumKind,
    pub form: ZetaForm,
}

const MAX_DOUBLINGS: u32 = 60;
const SCAN_POINTS: usize = 256;

/// Bracket by doubling from `floor + scale`, scan coarsely, then refine by
/// golden section. `finish` receives the final bracket and minimiser.
fn minimise_threshold(
    zeta: impl Fn(f64) -> f64,
    floor: f64,
    scale: f64,
    finish: impl Fn(f64, f64, f64) -> (f64, OptimumKind),
) -> Result<(f64, OptimumKind)> {
    let mut hi = None;
    for k in 0..=MAX_DOUBLINGS {
        let cand = floor + scale * 2f64.powi(k as i32);
        let mid = 0.5 * (floor + cand);
        if zeta(cand) > zeta(mid) {
            hi = Some(cand);
            break;
        }
    }
    let hi = hi.ok_or(Error::NoInteriorMinimum {
        doublings: MAX_DOUBLINGS,
    })?;
    let grid: Vec<f64> = (0..=SCAN_POINTS)
        .map(|i| floor + (hi - floor) * i as f64 / SCAN_POINTS as f64)
        .collect();
    let best = (1..=SCAN_POINTS)
        .min_by(|&a, &b| zeta(grid[a]).total_cmp(&zeta(grid[b])))
        .unwrap_or(1);
    let lo = grid[best - 1];
    let up = grid[(best + 1).min(SCAN_POINTS)];
    let (x, _) = golden_section_min(&zeta, lo, up, 1e-13, 400);
    Ok(finish(lo.max(floor * (1.0 + 1e-15)), up, x))
}

/// Per-realization MMRS detection context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmrsDetectionContext {
    /// `P_J g_ac / (theta (P_J sum g_jc + sigma_c2))`.
    pub phi: f64,
    pub l: usize,
}

impl MmrsDetectionContext {
    pub fn new(g_ac: f64, jam_gains_at_relay: &[f64], params: &SystemParams) -> Self {
        let interference: f64 = jam_gains_at_relay.iter().sum::<f64>() * params.p_j;
        MmrsDetectionContext {
            phi: params.p_j * g_ac / (params.theta * (interference + params.sigma_c2)),
            l: jam_gains_at_relay.len(),
        }
    }

    pub fn closed_form_valid(&self) -> bool {
        self.phi > 0.0 && (self.phi < 1.0 || self.l == 0)
    }
}

/// Closed-form RRS detection error at threshold `lambda`.
pub fn dep_rrs(l: usize, lambda: f64, params: &SystemParams) -> Result<ZetaPoint> {
    if l > 0 && !params.rrs_closed_form_valid() {
        return Err(Error::ClosedFormInvalid(format!(
            "RRS detection error needs p_t > p_j (p_t = {}, p_j = {})",
            params.p_t, params.p_j
        )));
    }
    Ok(ZetaCurve::rrs(l, params).eval(lambda, ZetaForm::ClosedForm))
}

/// Closed-form MMRS detection error at threshold `lambda`.
pub fn dep_mmrs(
    ctx: &MmrsDetectionContext,
    lambda: f64,
    sigma_w2: f64,
    p_j: f64,
) -> Result<ZetaPoint> {
    if !(ctx.phi > 0.0) {
        return Err(Error::invalid(
            "phi",
            format!("must be > 0, got {}", ctx.phi),
        ));
    }
    if !ctx.closed_form_valid() {
        return Err(Error::ClosedFormInvalid(format!(
            "MMRS detection error needs phi < 1, got {}",
            ctx.phi
        )));
    }
    Ok(ZetaCurve::mmrs(ctx, sigma_w2, p_j).eval(lambda, ZetaForm::ClosedForm))
}

/// Optimal threshold for either scheme. MMRS requires a context.
pub fn optimal_threshold(
    scheme: Scheme,
    l: usize,
    params: &SystemParams,
    ctx: Option<&MmrsDetectionContext>,
    form: ZetaForm,
) -> Result<DetectionAnalysis> {
    let curve = match (scheme, ctx) {
        (Scheme::Rrs, _) => ZetaCurve::rrs(l, params),
        (Scheme::Mmrs, Some(ctx)) => ZetaCurve::mmrs(ctx, params.sigma_w2, params.p_j),
        (Scheme::Mmrs, None) => {
            return Err(Error::invalid(
                "ctx",
                "MMRS detection needs a fading context",
            ))
        }
    };
    curve.optimal_threshold(form)
}

/// Detection error averaged over a set of fading contexts, with Willie using
/// a single threshold for all of them.
#[derive(Debug, Clone)]
pub struct AveragedDetection {
    pub analysis: DetectionAnalysis,
    /// Contexts included in the average.
    pub used: usize,
    /// Contexts skipped because the closed form is invalid there.
    pub skipped: usize,
}

pub fn averaged_zeta(curves: &[ZetaCurve], lambda: f64, form: ZetaForm) -> f64 {
    let s: KahanSum = curves.iter().map(|c| c.eval(lambda, form).zeta).collect();
    s.value() / curves.len() as f64
}

/// Minimise the fading-averaged detection error over the threshold.
pub fn averaged_optimal_threshold(
    contexts: &[MmrsDetectionContext],
    sigma_w2: f64,
    p_j: f64,
    form: ZetaForm,
) -> Result<AveragedDetection> {
    let curves: Vec<ZetaCurve> = contexts
        .iter()
        .filter(|c| form == ZetaForm::Exact || c.closed_form_valid())
        .map(|c| ZetaCurve::mmrs(c, sigma_w2, p_j))
        .collect();
    if curves.is_empty() {
        return Err(Error::ClosedFormInvalid(
            "no fading context admits the closed form".into(),
        ));
    }
    let mut powers: Vec<f64> = curves.iter().map(|c| c.p_signal).collect();
    powers.sort_by(f64::total_cmp);
    let scale = powers[powers.len() / 2];
    let (lambda, kind) = minimise_threshold(
        |x| averaged_zeta(&curves, x, form),
        sigma_w2,
        scale,
        |_, _, x| {
            if x - sigma_w2 <= 1e-9 * (sigma_w2 + scale) {
                (x, OptimumKind::NoiseFloor)
            } else {
                (x, OptimumKind::Stationary)
            }
        },
    )?;
    let n = curves.len() as f64;
    let points: Vec<ZetaPoint> = curves.iter().map(|c| c.eval(lambda, form)).collect();
    let mean = |f: fn(&ZetaPoint) -> f64| points.iter().map(f).sum::<f64>() / n;
    Ok(AveragedDetection {
        analysis: DetectionAnalysis {
            lambda_star: lambda,
            zeta_star: mean(|p| p.zeta),
            pfa_at_star: mean(|p| p.pfa),
            pmd_at_star: mean(|p| p.pmd),
            clamped: points.iter().any(|p| p.clamped),
            kind,
            form,
        },
        used: curves.len(),
        skipped: contexts.len() - curves.len(),
    })
}
