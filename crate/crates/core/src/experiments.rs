//! Experiment drivers behind the command-line subcommands. Each returns
//! [`Table`]s that serialize to deterministic CSV.

use crate::config::{ExperimentConfig, Figure};
use crate::detection::{
    averaged_optimal_threshold, averaged_zeta, pmd_rrs_paper, ZetaCurve, ZetaForm,
};
use crate::error::{Error, Result};
use crate::model::{db_to_linear, Scheme, SystemParams};
use crate::montecarlo::{
    detection_jammers, link_jammers, sample_mmrs_contexts, DetectionSample, LinkPowers, LinkSample,
    MetricEstimate, Mode, PowerMode, SimConfig,
};
use crate::optimize::{optimize_with, Objective, OptimizationResult, OptimizeOptions};
use crate::rate::{outage, outage_mmrs, outage_rrs};

/// A CSV table with leading `#` comment lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem when several tables are written to a directory.
    pub name: String,
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Table {
            name: name.into(),
            comments: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn comment(&mut self, line: impl Into<String>) {
        self.comments.push(line.into());
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Index of a header column.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric values of a column (unparseable cells become NaN).
    pub fn values(&self, name: &str) -> Vec<f64> {
        let Some(i) = self.column(name) else {
            return Vec::new();
        };
        self.rows
            .iter()
            .map(|r| r[i].parse().unwrap_or(f64::NAN))
            .collect()
    }

    /// Serialize, optionally with an extra leading comment line.
    pub fn to_csv(&self, extra_comment: Option<&str>) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for c in extra_comment
            .into_iter()
            .chain(self.comments.iter().map(String::as_str))
        {
            out.extend_from_slice(format!("# {c}\n").as_bytes());
        }
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.to_string()))
    }
}

/// Shortest round-trip formatting; scientific outside `[1e-4, 1e15)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x.is_nan() {
        "NaN".into()
    } else if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn settings_comment(p: &SystemParams, sim: &SimConfig) -> String {
    format!(
        "n={} p_t={} p_j={} p_max={} alpha={} theta={} sigma_w2={} sigma_c2={} sigma_b2={} \
         epsilon_c={} trials={} seed={} mode={} power_mode={} jamming={}",
        p.n,
        p.p_t,
        p.p_j,
        p.p_max,
        p.alpha,
        p.theta,
        p.sigma_w2,
        p.sigma_c2,
        p.sigma_b2,
        p.epsilon_c,
        sim.trials,
        sim.seed,
        sim.mode.as_str(),
        sim.power_mode.as_str(),
        sim.jamming
    )
}

/// `P_s` curve seen by Willie for fixed-power transmission.
fn fixed_power_curve(params: &SystemParams, sim: &SimConfig) -> ZetaCurve {
    ZetaCurve::rrs(detection_jammers(params, sim), params)
}

/// Closed-form values at one operating point.
pub fn metrics(cfg: &ExperimentConfig) -> Result<Table> {
    let p = &cfg.params;
    let sim = &cfg.sim;
    let mut t = Table::new("metrics", &["metric", "value", "note"]);
    t.comment(settings_comment(p, sim));
    let mut row = |k: &str, v: String, note: &str| t.push(vec![k.into(), v, note.into()]);
    let l_det = detection_jammers(p, sim);
    let l_mmrs = link_jammers(p, &sim.with_scheme(Scheme::Mmrs));
    row(
        "jammers_default",
        p.default_jammer_count().to_string(),
        "round((n-1)(1-e^-alpha))",
    );
    row("jammers_detection", l_det.to_string(), "");
    row("jammers_mmrs_link", l_mmrs.to_string(), "");
    match outage_rrs(p) {
        Ok(v) => row("outage_rrs", num(v), ""),
        Err(e) => row("outage_rrs", String::new(), &e.to_string()),
    }
    match outage_mmrs(p, l_mmrs) {
        Ok(b) => {
            let mut note = Vec::new();
            if b.clamped {
                note.push("clamped");
            }
            if b.ill_conditioned {
                note.push("ill_conditioned");
            }
            row("outage_mmrs", num(b.value), &note.join(";"));
            row("outage_mmrs_raw", num(b.raw), "");
        }
        Err(e) => row("outage_mmrs", String::new(), &e.to_string()),
    }
    row(
        "rrs_closed_form_valid",
        p.rrs_closed_form_valid().to_string(),
        "requires p_t > p_j",
    );
    let curve = fixed_power_curve(p, sim);
    for form in [ZetaForm::ClosedForm, ZetaForm::Exact] {
        let key = form.as_str();
        match curve.optimal_threshold(form) {
            Ok(a) => {
                row(
                    &format!("lambda_star_{key}"),
                    num(a.lambda_star),
                    a.kind.as_str(),
                );
                row(
                    &format!("zeta_star_{key}"),
                    num(a.zeta_star),
                    if a.clamped { "clamped" } else { "" },
                );
                row(&format!("pfa_at_star_{key}"), num(a.pfa_at_star), "");
                row(&format!("pmd_at_star_{key}"), num(a.pmd_at_star), "");
            }
            Err(e) => row(&format!("zeta_star_{key}"), String::new(), &e.to_string()),
        }
    }
    if let Some(lambda) = cfg.lambda {
        let pt = curve.eval(lambda, ZetaForm::ClosedForm);
        let note = if !curve.closed_form_valid() {
            "closed_form_invalid"
        } else if pt.clamped {
            "clamped"
        } else {
            ""
        };
        row("lambda", num(lambda), "");
        row("pfa", num(pt.pfa), "");
        row("pmd_closed_raw", num(pt.pmd_raw), "");
        row("zeta_closed", num(pt.zeta), note);
        row(
            "zeta_exact",
            num(curve.eval(lambda, ZetaForm::Exact).zeta),
            "",
        );
        if let Ok(v) = pmd_rrs_paper(l_det, lambda, p.sigma_w2, p.p_t, p.p_j) {
            row("pmd_rrs_paper", num(v), "");
        }
    }
    Ok(t)
}

const SIM_HEADER: [&str; 12] = [
    "sweep_variable",
    "sweep_value",
    "scheme",
    "metric",
    "mean",
    "half_width",
    "trials",
    "seed",
    "mode",
    "analytic",
    "exact",
    "flag",
];

struct SimRow<'a> {
    var: &'a str,
    value: Option<f64>,
    scheme: Scheme,
}

impl SimRow<'_> {
    fn row(
        &self,
        metric: &str,
        est: &MetricEstimate,
        analytic: Option<f64>,
        exact: Option<f64>,
        flag: &str,
    ) -> Vec<String> {
        vec![
            self.var.into(),
            opt_num(self.value),
            self.scheme.as_str().into(),
            metric.into(),
            num(est.mean),
            num(est.half_width),
            est.trials.to_string(),
            est.seed.to_string(),
            est.mode.as_str().into(),
            opt_num(analytic),
            opt_num(exact),
            flag.into(),
        ]
    }
}

/// Detection curves Willie faces: a single fixed-power curve, or the set of
/// fading contexts under channel inversion.
enum Warden {
    Fixed(ZetaCurve),
    Averaged(Vec<ZetaCurve>),
}

impl Warden {
    fn new(p: &SystemParams, sim: &SimConfig, contexts: usize) -> Result<Self> {
        if sim.scheme == Scheme::Mmrs && sim.power_mode == PowerMode::ChannelInversion {
            let ctx = sample_mmrs_contexts(p, sim, contexts.max(1))?;
            Ok(Warden::Averaged(
                ctx.iter()
                    .map(|c| ZetaCurve::mmrs(c, p.sigma_w2, p.p_j))
                    .collect(),
            ))
        } else {
            Ok(Warden::Fixed(fixed_power_curve(p, sim)))
        }
    }

    fn exact_optimum(&self, p: &SystemParams) -> Result<f64> {
        match self {
            Warden::Fixed(c) => Ok(c.optimal_threshold(ZetaForm::Exact)?.lambda_star),
            Warden::Averaged(curves) => {
                let ctx: Vec<_> = curves
                    .iter()
                    .map(|c| crate::detection::MmrsDetectionContext {
                        phi: c.p_j / c.p_signal,
                        l: c.l,
                    })
                    .collect();
                Ok(
                    averaged_optimal_threshold(&ctx, p.sigma_w2, p.p_j, ZetaForm::Exact)?
                        .analysis
                        .lambda_star,
                )
            }
        }
    }

    /// `(closed form, exact, flag)` at `lambda`.
    fn at(&self, lambda: f64) -> (Option<f64>, f64, String) {
        match self {
            Warden::Fixed(c) => {
                let exact = c.eval(lambda, ZetaForm::Exact).zeta;
                if !c.closed_form_valid() {
                    return (None, exact, "closed_form_invalid".into());
                }
                let pt = c.eval(lambda, ZetaForm::ClosedForm);
                (
                    Some(pt.zeta),
                    exact,
                    if pt.clamped {
                        "clamped".into()
                    } else {
                        String::new()
                    },
                )
            }
            Warden::Averaged(curves) => {
                let exact = averaged_zeta(curves, lambda, ZetaForm::Exact);
                (None, exact, "fading_average".into())
            }
        }
    }
}

/// Monte Carlo estimates at each sweep point and scheme.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Table> {
    let mut t = Table::new("simulate", &SIM_HEADER);
    t.comment(settings_comment(&cfg.params, &cfg.sim));
    if cfg.sim.mode == Mode::Scheme {
        t.comment("scheme mode: jammers follow the per-hop threshold rule; analytic columns assume the formula model");
    }
    let var = cfg.sweep.as_ref().map_or("none", |s| s.variable.as_str());
    for (value, p, sim) in cfg.points() {
        for scheme in cfg.schemes() {
            let sim = sim.with_scheme(scheme);
            let r = SimRow { var, value, scheme };
            let link = LinkSample::draw(&p, &sim)?;
            let pw = LinkPowers::new(&p, &sim);
            let l_link = link_jammers(&p, &sim);
            let both = link.outage(&pw);
            let first = link.first_hop_outage(&pw);
            let p_out = outage(scheme, &p, l_link);
            let flag_of = |res: &Result<f64>| match res {
                Ok(_) => String::new(),
                Err(e) => e.to_string(),
            };
            match scheme {
                Scheme::Rrs => {
                    t.push(r.row(
                        "outage",
                        &both,
                        p_out.as_ref().ok().copied(),
                        None,
                        &flag_of(&p_out),
                    ));
                    t.push(r.row("first_hop_outage", &first, None, None, ""));
                }
                Scheme::Mmrs => {
                    t.push(r.row(
                        "outage",
                        &both,
                        None,
                        None,
                        "closed form covers the first hop only",
                    ));
                    t.push(r.row(
                        "first_hop_outage",
                        &first,
                        p_out.as_ref().ok().copied(),
                        None,
                        &flag_of(&p_out),
                    ));
                }
            }
            let rate = link.min_rate(&pw, false);
            t.push(r.row("expected_min_rate", &rate, None, None, ""));
            if cfg.given_success {
                let cond = link.min_rate(&pw, true);
                t.push(r.row("expected_min_rate_given_success", &cond, None, None, ""));
            }
            if let Ok(po) = p_out {
                let cr = MetricEstimate {
                    mean: (1.0 - po) * rate.mean,
                    half_width: (1.0 - po) * rate.half_width,
                    ..rate
                };
                t.push(r.row(
                    "covert_rate",
                    &cr,
                    None,
                    None,
                    "analytic outage x simulated min-rate",
                ));
            }
            let warden = Warden::new(&p, &sim, cfg.optimize.contexts)?;
            let lambda = match cfg.lambda {
                Some(l) => l,
                None => warden.exact_optimum(&p)?,
            };
            let det = DetectionSample::draw(&p, &sim)?.evaluate(&p, lambda);
            let (closed, exact, flag) = warden.at(lambda);
            let flag = format!(
                "lambda={lambda}{}{flag}",
                if flag.is_empty() { "" } else { ";" }
            );
            t.push(r.row("detection_error", &det.zeta, closed, Some(exact), &flag));
            t.push(r.row("false_alarm", &det.pfa, None, None, ""));
            t.push(r.row("missed_detection", &det.pmd, None, None, ""));
        }
    }
    Ok(t)
}

const OPT_HEADER: [&str; 14] = [
    "sweep_variable",
    "sweep_value",
    "scheme",
    "epsilon_c",
    "p_t_star",
    "r_star",
    "r_star_half_width",
    "binding_constraint",
    "zeta_at_star",
    "zeta_form",
    "jamming",
    "trials",
    "seed",
    "mode",
];

const TRACE_HEADER: [&str; 7] = [
    "sweep_value",
    "scheme",
    "probe",
    "p_t",
    "zeta_star",
    "covert_rate",
    "feasible",
];

/// Optimal transmit power per sweep point and scheme, plus the probe trace.
pub fn optimize(cfg: &ExperimentConfig) -> Result<(Table, Table)> {
    let mut result = Table::new("optimize", &OPT_HEADER);
    let mut trace = Table::new("optimize.trace", &TRACE_HEADER);
    result.comment(settings_comment(&cfg.params, &cfg.sim));
    result.comment(format!(
        "grid_size={} tol={} zeta_form={} contexts={}",
        cfg.optimize.grid_size,
        cfg.optimize.tol,
        cfg.optimize.zeta_form.as_str(),
        cfg.optimize.contexts
    ));
    let var = cfg.sweep.as_ref().map_or("none", |s| s.variable.as_str());
    for (value, p, sim) in cfg.points() {
        for scheme in cfg.schemes() {
            let sim = sim.with_scheme(scheme);
            let obj = Objective::new(&p, &sim, &cfg.optimize)?;
            let r = optimize_with(&obj, &p, &cfg.optimize)?;
            let hw = star_half_width(&obj, &r)?;
            result.push(vec![
                var.into(),
                opt_num(value),
                scheme.as_str().into(),
                num(p.epsilon_c),
                num(r.p_t_star),
                num(r.r_star),
                num(hw),
                r.binding_constraint.as_str().into(),
                num(r.zeta_at_star),
                cfg.optimize.zeta_form.as_str().into(),
                sim.jamming.to_string(),
                sim.trials.to_string(),
                sim.seed.to_string(),
                sim.mode.as_str().into(),
            ]);
            for (i, pr) in r.trace.iter().enumerate() {
                trace.push(vec![
                    opt_num(value),
                    scheme.as_str().into(),
                    i.to_string(),
                    num(pr.p_t),
                    num(pr.zeta_star),
                    num(pr.covert_rate),
                    pr.feasible.to_string(),
                ]);
            }
        }
    }
    Ok((result, trace))
}

fn star_half_width(obj: &Objective, r: &OptimizationResult) -> Result<f64> {
    if r.p_t_star > 0.0 {
        Ok(obj.rate_estimate(r.p_t_star)?.1)
    } else {
        Ok(0.0)
    }
}

/// Settings shared by every figure: the reference point with trials and seed
/// taken from the configuration.
fn figure_sim(cfg: &ExperimentConfig) -> SimConfig {
    SimConfig {
        mode: Mode::FormulaConsistent,
        power_mode: PowerMode::FixedPt,
        jammers: None,
        jamming: true,
        ..cfg.sim.clone()
    }
}

fn figure_table(
    name: String,
    header: &[&str],
    fig: Figure,
    p: &SystemParams,
    sim: &SimConfig,
) -> Table {
    let mut t = Table::new(name, header);
    t.comment(format!("{fig}: {}", settings_comment(p, sim)));
    t
}

pub const FIG2_N: [usize; 10] = [1, 2, 5, 10, 15, 20, 25, 30, 40, 50];
pub const FIG_ALPHAS: [f64; 3] = [0.3, 0.5, 0.7];
pub const FIG_EPSILONS: [f64; 10] = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5];
pub const FIG5_PJ: [f64; 13] = [
    0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0,
];
pub const FIG5_NOISE_DB: [f64; 3] = [0.0, -5.0, -10.0];

/// Outage versus relay count: analytic against both simulation modes.
pub fn fig2(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let sim = figure_sim(cfg).with_scheme(Scheme::Rrs);
    let base = SystemParams::reference();
    let mut out = Vec::new();
    for alpha in FIG_ALPHAS {
        let p0 = SystemParams {
            alpha,
            ..base.clone()
        };
        let mut t = figure_table(
            format!("fig2_alpha_{alpha}"),
            &[
                "n",
                "alpha",
                "p_to_analytic",
                "p_to_mc",
                "ci",
                "within_3se",
                "p_to_scheme_mc",
                "scheme_ci",
            ],
            Figure::Fig2,
            &p0,
            &sim,
        );
        t.comment(format!("n grid {FIG2_N:?}; RRS"));
        for n in FIG2_N {
            let p = SystemParams { n, ..p0.clone() };
            let analytic = outage_rrs(&p)?;
            let mc = LinkSample::draw(&p, &sim)?.outage(&LinkPowers::new(&p, &sim));
            let lit_sim = SimConfig {
                mode: Mode::Scheme,
                ..sim.clone()
            };
            let lit = LinkSample::draw(&p, &lit_sim)?.outage(&LinkPowers::new(&p, &lit_sim));
            let within = (analytic - mc.mean).abs() <= 3.0 * mc.std_error() + 1e-12;
            t.push(vec![
                n.to_string(),
                num(alpha),
                num(analytic),
                num(mc.mean),
                num(mc.half_width),
                within.to_string(),
                num(lit.mean),
                num(lit.half_width),
            ]);
        }
        out.push(t);
    }
    Ok(out)
}

/// Uniform grid of `count` thresholds on `[0, hi]`.
pub fn fig3_lambda_grid(hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| hi * i as f64 / (count - 1) as f64)
        .collect()
}

/// Detection error versus threshold.
pub fn fig3(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let p = SystemParams::reference();
    let sim = figure_sim(cfg).with_scheme(Scheme::Rrs);
    let grid = fig3_lambda_grid(20.0, 41);
    let curve = fixed_power_curve(&p, &sim);
    let mut rrs = figure_table(
        "fig3_rrs".into(),
        &[
            "lambda",
            "pfa",
            "pmd_closed_raw",
            "zeta_closed",
            "clamped",
            "pmd_exact",
            "zeta_exact",
            "zeta_mc",
            "ci",
            "pfa_mc",
            "pmd_mc",
        ],
        Figure::Fig3,
        &p,
        &sim,
    );
    rrs.comment(format!("jammers at Willie l={}", curve.l));
    for form in [ZetaForm::ClosedForm, ZetaForm::Exact] {
        if let Ok(a) = curve.optimal_threshold(form) {
            rrs.comment(format!(
                "{} optimum: lambda*={} zeta*={} kind={}",
                form.as_str(),
                a.lambda_star,
                a.zeta_star,
                a.kind.as_str()
            ));
        }
    }
    let ds = DetectionSample::draw(&p, &sim)?;
    for &lambda in &grid {
        let c = curve.eval(lambda, ZetaForm::ClosedForm);
        let e = curve.eval(lambda, ZetaForm::Exact);
        let mc = ds.evaluate(&p, lambda);
        rrs.push(vec![
            num(lambda),
            num(c.pfa),
            num(c.pmd_raw),
            num(c.zeta),
            c.clamped.to_string(),
            num(e.pmd),
            num(e.zeta),
            num(mc.zeta.mean),
            num(mc.zeta.half_width),
            num(mc.pfa.mean),
            num(mc.pmd.mean),
        ]);
    }

    let inv = SimConfig {
        power_mode: PowerMode::ChannelInversion,
        ..sim.with_scheme(Scheme::Mmrs)
    };
    let warden = Warden::new(&p, &inv, cfg.optimize.contexts)?;
    let mut mmrs = figure_table(
        "fig3_mmrs".into(),
        &["lambda", "zeta_exact_avg", "zeta_mc", "ci"],
        Figure::Fig3,
        &p,
        &inv,
    );
    mmrs.comment(format!(
        "channel-inversion power; exact curve averaged over {} fading contexts",
        cfg.optimize.contexts
    ));
    mmrs.comment(format!(
        "averaged exact optimum: lambda*={}",
        warden.exact_optimum(&p)?
    ));
    let ds = DetectionSample::draw(&p, &inv)?;
    for &lambda in &grid {
        let (_, exact, _) = warden.at(lambda);
        let mc = ds.evaluate(&p, lambda).zeta;
        mmrs.push(vec![
            num(lambda),
            num(exact),
            num(mc.mean),
            num(mc.half_width),
        ]);
    }
    Ok(vec![rrs, mmrs])
}

pub const FIG4_PT: [f64; 10] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];

/// Covert rate versus transmit power, no covertness constraint.
pub fn fig4(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let base = SystemParams::reference();
    let mut out = Vec::new();
    for scheme in Scheme::ALL {
        let sim = figure_sim(cfg).with_scheme(scheme);
        let mut t = figure_table(
            format!("fig4_{scheme}"),
            &[
                "p_t",
                "p_out_analytic",
                "p_out_mc",
                "p_out_ci",
                "first_hop_outage_mc",
                "min_rate_mc",
                "min_rate_ci",
                "covert_rate",
                "covert_rate_ci",
                "zeta_star_exact",
            ],
            Figure::Fig4,
            &base,
            &sim,
        );
        t.comment("p_t sweep 1..10 W; covert_rate = (1 - p_out_analytic) * min_rate_mc");
        let link = LinkSample::draw(&base, &sim)?;
        let l = link_jammers(&base, &sim);
        for p_t in FIG4_PT {
            let p = SystemParams {
                p_t,
                ..base.clone()
            };
            let pw = LinkPowers::new(&p, &sim);
            let po = outage(scheme, &p, l)?;
            let rate = link.min_rate(&pw, false);
            let zeta = fixed_power_curve(&p, &sim)
                .optimal_threshold(ZetaForm::Exact)?
                .zeta_star;
            let both = link.outage(&pw);
            t.push(vec![
                num(p_t),
                num(po),
                num(both.mean),
                num(both.half_width),
                num(link.first_hop_outage(&pw).mean),
                num(rate.mean),
                num(rate.half_width),
                num((1.0 - po) * rate.mean),
                num((1.0 - po) * rate.half_width),
                num(zeta),
            ]);
        }
        out.push(t);
    }
    Ok(out)
}

pub const FIG5_EPSILON: f64 = 0.3;
pub const FIG5_P_MAX: f64 = 5.0;

/// Covertness-constrained optimal rate versus jamming power.
pub fn fig5(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let mut out = Vec::new();
    for noise_db in FIG5_NOISE_DB {
        let s = db_to_linear(noise_db);
        let base = SystemParams {
            p_t: 1.0,
            p_max: FIG5_P_MAX,
            epsilon_c: FIG5_EPSILON,
            sigma_w2: s,
            sigma_c2: s,
            sigma_b2: s,
            ..SystemParams::reference()
        };
        for scheme in Scheme::ALL {
            let sim = figure_sim(cfg).with_scheme(scheme);
            let mut t = figure_table(
                format!("fig5_{scheme}_noise_{noise_db}db"),
                &[
                    "p_j",
                    "p_t_star",
                    "r_star",
                    "r_star_ci",
                    "binding_constraint",
                    "zeta_at_star",
                    "covert_rate_at_p_max",
                ],
                Figure::Fig5,
                &base,
                &sim,
            );
            t.comment(format!(
                "p_j grid {FIG5_PJ:?}; r_star maximizes the covert rate subject to zeta* >= {}",
                1.0 - FIG5_EPSILON
            ));
            let link = LinkSample::draw(&base, &sim)?;
            for p_j in FIG5_PJ {
                let p = SystemParams {
                    p_j,
                    ..base.clone()
                };
                let obj = Objective::with_link(&p, &sim, &cfg.optimize, link.clone())?;
                let r = optimize_with(&obj, &p, &cfg.optimize)?;
                t.push(vec![
                    num(p_j),
                    num(r.p_t_star),
                    num(r.r_star),
                    num(star_half_width(&obj, &r)?),
                    r.binding_constraint.as_str().into(),
                    num(r.zeta_at_star),
                    num(obj.rate(p.p_max)?),
                ]);
            }
            out.push(t);
        }
    }
    Ok(out)
}

/// `r_star` over the covertness grid for one scheme and setting.
pub fn epsilon_sweep(
    p: &SystemParams,
    sim: &SimConfig,
    opts: &OptimizeOptions,
    epsilons: &[f64],
) -> Result<Vec<(OptimizationResult, f64)>> {
    let obj = Objective::new(p, sim, opts)?;
    epsilons
        .iter()
        .map(|&epsilon_c| {
            let pe = SystemParams {
                epsilon_c,
                ..p.clone()
            };
            let r = optimize_with(&obj, &pe, opts)?;
            let hw = star_half_width(&obj, &r)?;
            Ok((r, hw))
        })
        .collect()
}

const EPS_HEADER: [&str; 6] = [
    "epsilon_c",
    "p_t_star",
    "r_star",
    "r_star_ci",
    "binding_constraint",
    "zeta_at_star",
];

fn eps_row(eps: f64, r: &OptimizationResult, hw: f64) -> Vec<String> {
    vec![
        num(eps),
        num(r.p_t_star),
        num(r.r_star),
        num(hw),
        r.binding_constraint.as_str().into(),
        num(r.zeta_at_star),
    ]
}

/// Maximum covert rate versus covertness requirement.
pub fn fig6(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let mut out = Vec::new();
    for alpha in FIG_ALPHAS {
        let p = SystemParams {
            alpha,
            ..SystemParams::reference()
        };
        for scheme in Scheme::ALL {
            let sim = figure_sim(cfg).with_scheme(scheme);
            let mut t = figure_table(
                format!("fig6_{scheme}_alpha_{alpha}"),
                &EPS_HEADER,
                Figure::Fig6,
                &p,
                &sim,
            );
            t.comment(format!("epsilon_c grid {FIG_EPSILONS:?}"));
            for (eps, (r, hw)) in
                FIG_EPSILONS
                    .iter()
                    .zip(epsilon_sweep(&p, &sim, &cfg.optimize, &FIG_EPSILONS)?)
            {
                t.push(eps_row(*eps, &r, hw));
            }
            out.push(t);
        }
    }
    Ok(out)
}

/// Maximum covert rate with and without cooperative jamming.
pub fn fig7(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let p = SystemParams::reference();
    let mut out = Vec::new();
    for scheme in Scheme::ALL {
        for jamming in [true, false] {
            let sim = SimConfig {
                jamming,
                ..figure_sim(cfg).with_scheme(scheme)
            };
            let tag = if jamming { "jamming" } else { "no_jamming" };
            let mut t = figure_table(
                format!("fig7_{scheme}_{tag}"),
                &EPS_HEADER,
                Figure::Fig7,
                &p,
                &sim,
            );
            t.comment(format!("epsilon_c grid {FIG_EPSILONS:?}"));
            for (eps, (r, hw)) in
                FIG_EPSILONS
                    .iter()
                    .zip(epsilon_sweep(&p, &sim, &cfg.optimize, &FIG_EPSILONS)?)
            {
                t.push(eps_row(*eps, &r, hw));
            }
            out.push(t);
        }
    }
    Ok(out)
}

pub fn reproduce(fig: Figure, cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    match fig {
        Figure::Fig2 => fig2(cfg),
        Figure::Fig3 => fig3(cfg),
        Figure::Fig4 => fig4(cfg),
        Figure::Fig5 => fig5(cfg),
        Figure::Fig6 => fig6(cfg),
        Figure::Fig7 => fig7(cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn cfg(text: &str) -> ExperimentConfig {
        parse_config(text).unwrap()
    }

    #[test]
    fn number_formatting() {
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(2.2e-15), "2.2e-15");
        assert_eq!(num(0.0), "0");
        assert_eq!(num(f64::NAN), "NaN");
        assert_eq!(num(1e20), "1e20");
        for x in [1.234_567_890_123e-9, 0.118_818_013_617_154_16, 3.0e300] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn metrics_single_relay_outage() {
        let t = metrics(&cfg(r#"{"params": {"n": 1}, "sim": {"lambda": 5.3162}}"#)).unwrap();
        let row = t.rows.iter().find(|r| r[0] == "outage_rrs").unwrap();
        let v: f64 = row[1].parse().unwrap();
        assert!((v - 0.118_818).abs() < 1e-6);
        assert!(t.rows.iter().any(|r| r[0] == "zeta_star_exact"));
    }

    #[test]
    fn metrics_flags_invalid_closed_form() {
        let t = metrics(&cfg(r#"{"params": {"p_t": 0.5}}"#)).unwrap();
        let row = t
            .rows
            .iter()
            .find(|r| r[0] == "zeta_star_closed_form")
            .unwrap();
        assert!(row[2].contains("closed form invalid"));
    }

    #[test]
    fn simulate_rows_and_bounds() {
        let c = cfg(r#"{"sim": {"trials": 4000, "seed": 5},
                        "sweep": {"variable": "p_t", "values": [2, 8]}}"#);
        let t = simulate(&c).unwrap();
        assert_eq!(t.header, SIM_HEADER);
        // 2 points x 2 schemes x 7 metrics
        assert_eq!(t.rows.len(), 28);
        let mean = t.column("mean").unwrap();
        let metric = t.column("metric").unwrap();
        for r in &t.rows {
            if r[metric] != "expected_min_rate" && r[metric] != "covert_rate" {
                let v: f64 = r[mean].parse().unwrap();
                assert!((0.0..=1.0).contains(&v), "{r:?}");
            }
        }
    }

    #[test]
    fn csv_is_deterministic() {
        let c = cfg(r#"{"sim": {"trials": 3000, "seed": 11, "scheme": "mmrs"}}"#);
        let a = simulate(&c).unwrap().to_csv(None).unwrap();
        let b = simulate(&c).unwrap().to_csv(None).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("# n=20"));
        assert!(text.lines().nth(1).unwrap().starts_with("sweep_variable,"));
    }

    #[test]
    fn optimize_tables() {
        let c = cfg(r#"{"params": {"epsilon_c": 0.3}, "sim": {"trials": 4000, "scheme": "rrs"}}"#);
        let (r, trace) = optimize(&c).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(
            r.rows[0][r.column("binding_constraint").unwrap()],
            "covertness"
        );
        assert!(trace.rows.len() >= OptimizeOptions::default().grid_size);
    }

    #[test]
    fn fig2_columns_agree() {
        let c = cfg(r#"{"sim": {"trials": 20000, "seed": 2}}"#);
        let tables = fig2(&c).unwrap();
        assert_eq!(tables.len(), 3);
        for t in &tables {
            let a = t.values("p_to_analytic");
            let m = t.values("p_to_mc");
            let ci = t.values("ci");
            for i in 0..a.len() {
                assert!(
                    (a[i] - m[i]).abs() <= 4.0 * ci[i] / 1.96 + 1e-9,
                    "{}: row {i}",
                    t.name
                );
            }
        }
    }
}
