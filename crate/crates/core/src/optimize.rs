//! Transmit-power choice maximizing the covert rate under a covertness
//! requirement `zeta*(P_T) >= 1 - epsilon_c` and the cap `P_T <= P_max`.
//!
//! The objective is one-dimensional, so the search is a deterministic
//! log-spaced grid followed by bisection on the feasibility boundary (when
//! `zeta*` is monotone and the rate nondecreasing) or golden-section around
//! the best feasible probe. Every evaluation is recorded in the trace.
//!
//! Expected min-rates come from one [`LinkSample`] shared by all probes, so
//! nearby powers are compared on the same fading draws.

use rayon::prelude::*;

use crate::detection::{averaged_optimal_threshold, ZetaCurve, ZetaForm};
use crate::error::{Error, Result};
use crate::model::{Scheme, SystemParams};
use crate::montecarlo::{
    detection_jammers, link_jammers, sample_mmrs_contexts, LinkPowers, LinkSample, SimConfig,
};
use crate::numeric::{bisect, golden_section_min};
use crate::rate::{covert_rate, outage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BindingConstraint {
    Covertness,
    PowerCap,
    /// Best feasible point is strictly inside the feasible set.
    Interior,
    NoneFeasible,
}

impl BindingConstraint {
    pub fn as_str(self) -> &'static str {
        match self {
            BindingConstraint::Covertness => "covertness",
            BindingConstraint::PowerCap => "power_cap",
            BindingConstraint::Interior => "interior",
            BindingConstraint::NoneFeasible => "none_feasible",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub p_t: f64,
    pub zeta_star: f64,
    pub covert_rate: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub p_t_star: f64,
    pub r_star: f64,
    pub binding_constraint: BindingConstraint,
    pub zeta_at_star: f64,
    /// Every probe in evaluation order (grid first, then refinement).
    pub trace: Vec<Probe>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOptions {
    pub grid_size: usize,
    /// Relative tolerance of the refinement stage.
    pub tol: f64,
    pub zeta_form: ZetaForm,
    /// Fading contexts for the averaged MMRS constraint (channel inversion).
    pub contexts: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            grid_size: 24,
            tol: 1e-6,
            zeta_form: ZetaForm::Exact,
            contexts: 10_000,
        }
    }
}

/// Covertness and rate as functions of `P_T` at otherwise fixed settings.
pub struct Objective {
    params: SystemParams,
    cfg: SimConfig,
    form: ZetaForm,
    link: LinkSample,
    l_detect: usize,
    l_link: usize,
    /// `zeta*` when it does not depend on `P_T` (MMRS with channel inversion).
    fixed_zeta: Option<f64>,
}

impl Objective {
    pub fn new(params: &SystemParams, cfg: &SimConfig, opts: &OptimizeOptions) -> Result<Self> {
        let link = LinkSample::draw(params, cfg)?;
        Self::with_link(params, cfg, opts, link)
    }

    /// Reuse fading draws from an earlier [`LinkSample::draw`] with the same
    /// `n`, `alpha`, scheme, mode and seed. Link draws do not depend on
    /// powers or noise, so sweeps over those share them.
    pub fn with_link(
        params: &SystemParams,
        cfg: &SimConfig,
        opts: &OptimizeOptions,
        link: LinkSample,
    ) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        let l_detect = detection_jammers(params, cfg);
        let inversion = cfg.scheme == Scheme::Mmrs
            && cfg.power_mode == crate::montecarlo::PowerMode::ChannelInversion;
        let fixed_zeta = if inversion {
            let ctx = sample_mmrs_contexts(params, cfg, opts.contexts.max(1))?;
            Some(
                averaged_optimal_threshold(&ctx, params.sigma_w2, params.p_j, opts.zeta_form)?
                    .analysis
                    .zeta_star,
            )
        } else {
            None
        };
        Ok(Objective {
            params: params.clone(),
            cfg: cfg.clone(),
            form: opts.zeta_form,
            link,
            l_detect,
            l_link: link_jammers(params, cfg),
            fixed_zeta,
        })
    }

    fn at(&self, p_t: f64) -> SystemParams {
        SystemParams {
            p_t,
            ..self.params.clone()
        }
    }

    /// Willie's minimum detection error at transmit power `p_t`.
    pub fn zeta_star(&self, p_t: f64) -> Result<f64> {
        if let Some(z) = self.fixed_zeta {
            return Ok(z);
        }
        let curve = ZetaCurve::rrs(self.l_detect, &self.at(p_t));
        Ok(curve.optimal_threshold(self.form)?.zeta_star)
    }

    /// Covert rate at transmit power `p_t`.
    pub fn rate(&self, p_t: f64) -> Result<f64> {
        self.rate_estimate(p_t).map(|(r, _)| r)
    }

    /// Covert rate and its 95% half-width (from the min-rate estimate).
    pub fn rate_estimate(&self, p_t: f64) -> Result<(f64, f64)> {
        let mut p = self.at(p_t);
        if !self.cfg.jamming {
            p.p_j = 0.0;
        }
        let p_out = outage(self.cfg.scheme, &p, self.l_link)?;
        let pw = LinkPowers::new(&p, &self.cfg);
        let est = self.link.min_rate(&pw, false);
        Ok((
            covert_rate(p_out, est.mean)?,
            (1.0 - p_out) * est.half_width,
        ))
    }

    pub fn link(&self) -> &LinkSample {
        &self.link
    }

    fn probe(&self, p_t: f64, threshold: f64) -> Result<Probe> {
        let zeta_star = match self.zeta_star(p_t) {
            Ok(z) => z,
            Err(Error::ClosedFormInvalid(_)) => f64::NAN,
            Err(e) => return Err(e),
        };
        Ok(Probe {
            p_t,
            zeta_star,
            covert_rate: self.rate(p_t)?,
            feasible: zeta_star >= threshold,
        })
    }
}

/// Log-spaced probe powers ending at `p_max`.
fn power_grid(params: &SystemParams, opts: &OptimizeOptions) -> Result<Vec<f64>> {
    let lo = match opts.zeta_form {
        ZetaForm::ClosedForm => {
            if params.p_j >= params.p_max {
                return Err(Error::ClosedFormInvalid(format!(
                    "no power in (p_j, p_max] = ({}, {}]",
                    params.p_j, params.p_max
                )));
            }
            params.p_j * (1.0 + 1e-3)
        }
        ZetaForm::Exact => 1e-3 * params.p_max,
    };
    let k = opts.grid_size;
    let ratio = (params.p_max / lo).ln();
    Ok((0..k)
        .map(|i| {
            if i + 1 == k {
                params.p_max
            } else {
                lo * (ratio * i as f64 / (k - 1) as f64).exp()
            }
        })
        .collect())
}

pub fn max_covert_rate(
    scheme: Scheme,
    params: &SystemParams,
    cfg: &SimConfig,
    opts: &OptimizeOptions,
) -> Result<OptimizationResult> {
    if opts.grid_size < 8 {
        return Err(Error::invalid(
            "grid_size",
            format!("must be >= 8, got {}", opts.grid_size),
        ));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("tol", "must be > 0"));
    }
    let cfg = cfg.with_scheme(scheme);
    let objective = Objective::new(params, &cfg, opts)?;
    optimize_with(&objective, params, opts)
}

pub fn optimize_with(
    objective: &Objective,
    params: &SystemParams,
    opts: &OptimizeOptions,
) -> Result<OptimizationResult> {
    let threshold = 1.0 - params.epsilon_c;
    let grid = power_grid(params, opts)?;
    let mut trace = grid
        .par_iter()
        .map(|&p| objective.probe(p, threshold))
        .collect::<Result<Vec<Probe>>>()?;
    let k = trace.len();

    let feasible: Vec<usize> = (0..k).filter(|&i| trace[i].feasible).collect();
    let Some(&best_grid) = feasible
        .iter()
        .max_by(|&&a, &&b| trace[a].covert_rate.total_cmp(&trace[b].covert_rate))
    else {
        let zeta = trace
            .iter()
            .map(|p| p.zeta_star)
            .filter(|z| z.is_finite())
            .fold(0.0, f64::max);
        return Ok(OptimizationResult {
            p_t_star: 0.0,
            r_star: 0.0,
            binding_constraint: BindingConstraint::NoneFeasible,
            zeta_at_star: zeta,
            trace,
        });
    };

    let zeta_monotone = trace
        .windows(2)
        .all(|w| w[1].zeta_star <= w[0].zeta_star + 1e-12);
    let rate_monotone = feasible
        .windows(2)
        .all(|w| trace[w[1]].covert_rate >= trace[w[0]].covert_rate - 1e-12);
    let prefix = feasible.iter().enumerate().all(|(i, &j)| i == j);

    let mut star = trace[best_grid];
    let mut binding = BindingConstraint::Interior;
    if zeta_monotone && rate_monotone && prefix {
        let last = *feasible.last().unwrap_or(&0);
        if last + 1 == k {
            star = trace[last];
            binding = BindingConstraint::PowerCap;
        } else {
            let mut refine = Vec::new();
            let (lo, _) = bisect(
                |p| {
                    let pr = objective.probe(p, threshold);
                    let z = pr.as_ref().map(|p| p.zeta_star).unwrap_or(f64::NAN);
                    if let Ok(pr) = pr {
                        refine.push(pr);
                    }
                    if z.is_nan() {
                        -1.0
                    } else {
                        z - threshold
                    }
                },
                trace[last].p_t,
                trace[last + 1].p_t,
                opts.tol,
                200,
            );
            let at = objective.probe(lo, threshold)?;
            refine.push(at);
            trace.extend(refine);
            if at.feasible && at.covert_rate >= star.covert_rate {
                star = at;
            }
            binding = BindingConstraint::Covertness;
        }
    } else {
        let lo = trace[best_grid.saturating_sub(1)].p_t;
        let hi = trace[(best_grid + 1).min(k - 1)].p_t;
        let mut refine = Vec::new();
        let (x, _) = golden_section_min(
            |p| match objective.probe(p, threshold) {
                Ok(pr) => {
                    refine.push(pr);
                    if pr.feasible {
                        -pr.covert_rate
                    } else {
                        f64::INFINITY
                    }
                }
                Err(_) => f64::INFINITY,
            },
            lo,
            hi,
            opts.tol,
            200,
        );
        let at = objective.probe(x, threshold)?;
        refine.push(at);
        trace.extend(refine);
        if at.feasible && at.covert_rate > star.covert_rate {
            star = at;
        }
        if star.p_t >= params.p_max {
            binding = BindingConstraint::PowerCap;
        }
    }

    // Never return less than the best feasible probe.
    if let Some(best) = trace
        .iter()
        .filter(|p| p.feasible)
        .max_by(|a, b| a.covert_rate.total_cmp(&b.covert_rate))
    {
        if best.covert_rate > star.covert_rate {
            star = *best;
        }
    }

    Ok(OptimizationResult {
        p_t_star: star.p_t.min(params.p_max),
        r_star: star.covert_rate,
        binding_constraint: binding,
        zeta_at_star: star.zeta_star,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_cfg() -> SimConfig {
        SimConfig {
            trials: 20_000,
            seed: 3,
            ..SimConfig::default()
        }
    }

    fn check_invariants(r: &OptimizationResult, p: &SystemParams) {
        assert!(r.p_t_star <= p.p_max);
        if r.binding_constraint != BindingConstraint::NoneFeasible {
            assert!(r.zeta_at_star >= 1.0 - p.epsilon_c - 1e-9);
        }
        for probe in r.trace.iter().filter(|p| p.feasible) {
            assert!(r.r_star >= probe.covert_rate);
        }
    }

    #[test]
    fn vacuous_constraint_hits_power_cap() {
        let p = SystemParams {
            epsilon_c: 0.999,
            ..SystemParams::reference()
        };
        for scheme in Scheme::ALL {
            let r = max_covert_rate(scheme, &p, &quick_cfg(), &OptimizeOptions::default()).unwrap();
            assert_eq!(r.binding_constraint, BindingConstraint::PowerCap);
            assert_eq!(r.p_t_star, p.p_max);
            check_invariants(&r, &p);
        }
    }

    #[test]
    fn no_jamming_is_infeasible() {
        let p = SystemParams {
            epsilon_c: 1e-6,
            ..SystemParams::reference()
        };
        let cfg = SimConfig {
            jamming: false,
            ..quick_cfg()
        };
        let r = max_covert_rate(Scheme::Rrs, &p, &cfg, &OptimizeOptions::default()).unwrap();
        assert_eq!(r.binding_constraint, BindingConstraint::NoneFeasible);
        assert_eq!(r.r_star, 0.0);
    }

    #[test]
    fn covertness_boundary_is_refined() {
        let p = SystemParams {
            epsilon_c: 0.3,
            ..SystemParams::reference()
        };
        let r =
            max_covert_rate(Scheme::Rrs, &p, &quick_cfg(), &OptimizeOptions::default()).unwrap();
        assert_eq!(r.binding_constraint, BindingConstraint::Covertness);
        check_invariants(&r, &p);
        assert!((r.zeta_at_star - 0.7).abs() < 1e-3, "{}", r.zeta_at_star);
        assert!(r.trace.len() > OptimizeOptions::default().grid_size);
    }

    #[test]
    fn rejects_small_grid() {
        let opts = OptimizeOptions {
            grid_size: 4,
            ..OptimizeOptions::default()
        };
        let p = SystemParams::reference();
        assert!(max_covert_rate(Scheme::Rrs, &p, &quick_cfg(), &opts).is_err());
    }

    #[test]
    fn closed_form_grid_stays_above_jammer_power() {
        let p = SystemParams {
            epsilon_c: 0.5,
            ..SystemParams::reference()
        };
        let opts = OptimizeOptions {
            zeta_form: ZetaForm::ClosedForm,
            ..OptimizeOptions::default()
        };
        let r = max_covert_rate(Scheme::Rrs, &p, &quick_cfg(), &opts).unwrap();
        assert!(r.trace.iter().all(|pr| pr.p_t > p.p_j));
        check_invariants(&r, &p);
    }

    #[test]
    fn rate_nondecreasing_in_power() {
        let p = SystemParams::reference();
        let obj = Objective::new(&p, &quick_cfg(), &OptimizeOptions::default()).unwrap();
        let rates: Vec<f64> = (1..=10).map(|i| obj.rate(i as f64).unwrap()).collect();
        assert!(rates.windows(2).all(|w| w[1] >= w[0]));
    }
}
