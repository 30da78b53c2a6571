//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use covert_relay_core::config::{parse_config, ExperimentConfig, Figure};
use covert_relay_core::detection::{
    dep_rrs, erlang_tail, pfa, MmrsDetectionContext, ZetaCurve, ZetaForm,
};
use covert_relay_core::experiments::{self, Table, FIG_ALPHAS};
use covert_relay_core::montecarlo::{
    detection_jammers, link_jammers, simulate_first_hop_outage, simulate_mmrs_gain_cdf,
    simulate_outage, DetectionSample,
};
use covert_relay_core::rate::{mmrs_first_gain_cdf, outage_mmrs, outage_rrs};
use covert_relay_core::rng::{chunk_rng, substream, Purpose};
use covert_relay_core::{Mode, Result, Scheme, SimConfig, SystemParams};
use rand::Rng;
use rand_distr::Exp1;

const SEED: u64 = 20_240_611;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn sim(trials: usize, scheme: Scheme) -> SimConfig {
    SimConfig {
        trials,
        seed: SEED,
        mode: Mode::FormulaConsistent,
        scheme,
        ..SimConfig::default()
    }
}

fn figure_config(trials: usize) -> ExperimentConfig {
    parse_config(&format!(
        r#"{{"sim": {{"trials": {trials}, "seed": {SEED}}}}}"#
    ))
    .expect("figure config")
}

fn table<'a>(tables: &'a [Table], name: &str) -> &'a Table {
    tables
        .iter()
        .find(|t| t.name == name)
        .unwrap_or_else(|| panic!("missing table {name}"))
}

fn erlang_oracle() -> Result<Outcome> {
    const TRIALS: usize = 1_000_000;
    const LS: [usize; 4] = [1, 2, 3, 5];
    const AS: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 5.0];
    let mut hits = [[0u64; 5]; 4];
    let mut rng = chunk_rng(SEED, Purpose::Scratch, 0);
    for _ in 0..TRIALS {
        let mut s = 0.0;
        for k in 1..=5 {
            s += rng.sample::<f64, _>(Exp1);
            if let Some(i) = LS.iter().position(|&l| l == k) {
                for (j, &a) in AS.iter().enumerate() {
                    hits[i][j] += u64::from(s >= a);
                }
            }
        }
    }
    let mut worst = 0.0f64;
    let mut pass = true;
    for (i, &l) in LS.iter().enumerate() {
        for (j, &a) in AS.iter().enumerate() {
            let p = erlang_tail(l, a)?;
            let mc = hits[i][j] as f64 / TRIALS as f64;
            let se = (p * (1.0 - p) / TRIALS as f64).sqrt();
            let dev = (mc - p).abs();
            if se == 0.0 {
                pass &= dev == 0.0;
            } else {
                worst = worst.max(dev / se);
                pass &= dev <= 3.0 * se;
            }
        }
    }
    Ok(Outcome::new(
        pass,
        format!("20 cells, worst |delta| = {worst:.2} SE"),
    ))
}

fn rrs_detection_regime() -> Result<Outcome> {
    let p = SystemParams::reference();
    let cfg = sim(100_000, Scheme::Rrs);
    let l = detection_jammers(&p, &cfg);
    let ds = DetectionSample::draw(&p, &cfg)?;
    let mut excluded = Vec::new();
    let mut misses = Vec::new();
    let mut checked = 0;
    for i in 1..=20 {
        let lambda = f64::from(i);
        let cf = dep_rrs(l, lambda, &p)?;
        if cf.pmd_raw < 0.0 {
            excluded.push(lambda);
            continue;
        }
        checked += 1;
        let mc = ds.evaluate(&p, lambda).zeta;
        let tol = (3.0 * mc.std_error()).max(0.01);
        let dev = (cf.zeta - mc.mean).abs();
        if dev > tol {
            misses.push(format!("{lambda}:{dev:.3}"));
        }
    }
    Ok(Outcome::new(
        misses.is_empty(),
        format!(
            "l={l}, {checked} unclamped points, {} outside tolerance [{}], clamped excluded {excluded:?}",
            misses.len(),
            misses.join(" ")
        ),
    ))
}

fn u_shaped(values: &[f64]) -> Option<usize> {
    let m = (0..values.len()).min_by(|&a, &b| values[a].total_cmp(&values[b]))?;
    let down = values[..=m].windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let up = values[m..].windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let strict = values[0] > values[m] && values[values.len() - 1] > values[m];
    (down && up && strict).then_some(m)
}

fn zeta_shape() -> Result<Outcome> {
    let p = SystemParams::reference();
    let l = detection_jammers(&p, &sim(1, Scheme::Rrs));
    let rrs = ZetaCurve::rrs(l, &p);
    let mmrs = ZetaCurve::mmrs(&MmrsDetectionContext { phi: 0.5, l }, p.sigma_w2, p.p_j);
    let grid = experiments::fig3_lambda_grid(20.0, 41);
    let step = grid[1] - grid[0];
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, curve) in [("rrs", rrs), ("mmrs", mmrs)] {
        for form in [ZetaForm::ClosedForm, ZetaForm::Exact] {
            let floor_ok = [0.0, 0.5 * p.sigma_w2, p.sigma_w2]
                .iter()
                .all(|&x| curve.eval(x, form).zeta == 1.0);
            let values: Vec<f64> = grid.iter().map(|&x| curve.eval(x, form).zeta).collect();
            let star = curve.optimal_threshold(form)?.lambda_star;
            let ok = match u_shaped(&values) {
                Some(m) => floor_ok && (star - grid[m]).abs() <= step,
                None => false,
            };
            pass &= ok;
            notes.push(format!(
                "{name}/{}: lambda*={star:.3}{}",
                form.as_str(),
                if ok { "" } else { " BAD" }
            ));
        }
    }
    Ok(Outcome::new(pass, notes.join(", ")))
}

fn rrs_outage_oracle() -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut pass = true;
    let mut analytic = Vec::new();
    for alpha in FIG_ALPHAS {
        let mut row = Vec::new();
        for n in [1, 5, 10, 25, 50] {
            let p = SystemParams {
                n,
                alpha,
                ..SystemParams::reference()
            };
            let a = outage_rrs(&p)?;
            let mc = simulate_outage(&p, &sim(100_000, Scheme::Rrs))?;
            worst = worst.max((a - mc.mean).abs());
            row.push(a);
        }
        pass &= row.windows(2).all(|w| w[1] >= w[0] - 1e-12);
        analytic.push(row);
    }
    for j in 0..analytic[0].len() {
        pass &= analytic.windows(2).all(|w| w[1][j] >= w[0][j] - 1e-12);
    }
    pass &= worst <= 0.01;
    Ok(Outcome::new(
        pass,
        format!("15 cells, worst |delta| = {worst:.4}, monotone in n and alpha checked"),
    ))
}

fn mmrs_gain_cdf_oracle() -> Result<Outcome> {
    let grid: Vec<f64> = (1..=30).map(|i| 0.2 * f64::from(i)).collect();
    let mut worst = 0.0f64;
    for n in [1, 2, 5, 10, 20] {
        let mc = simulate_mmrs_gain_cdf(&grid, n, &sim(1_000_000, Scheme::Mmrs))?;
        for (x, e) in grid.iter().zip(&mc) {
            worst = worst.max((mmrs_first_gain_cdf(*x, n)? - e.mean).abs());
        }
    }
    let mut single = 0.0f64;
    for x in grid.iter().copied().chain([1e-6, 1e-3, 10.0, 40.0]) {
        single = single.max((mmrs_first_gain_cdf(x, 1)? + (-x).exp_m1()).abs());
    }
    Ok(Outcome::new(
        worst <= 0.01 && single <= 1e-12,
        format!("sup-norm {worst:.4}, n=1 vs 1-e^-x {single:.1e}"),
    ))
}

fn mmrs_outage_sanity() -> Result<Outcome> {
    let mut high = 0.0f64;
    for n in 1..=20 {
        let p = SystemParams {
            n,
            p_t: 1e6,
            p_max: 1e6,
            ..SystemParams::reference()
        };
        high = high.max(outage_mmrs(&p, p.default_jammer_count())?.value);
    }
    let mut worst = 0.0f64;
    let mut counts_ok = true;
    for alpha in FIG_ALPHAS {
        for p_t in [1.0, 5.0, 10.0] {
            let p = SystemParams {
                alpha,
                p_t,
                ..SystemParams::reference()
            };
            let cfg = sim(100_000, Scheme::Mmrs);
            let l = link_jammers(&p, &cfg);
            counts_ok &= l == p.default_jammer_count();
            let mc = simulate_first_hop_outage(&p, &cfg)?;
            worst = worst.max((outage_mmrs(&p, l)?.value - mc.mean).abs());
        }
    }
    Ok(Outcome::new(
        high <= 1e-6 && worst <= 0.015 && counts_ok,
        format!("max outage at P_T=1e6 {high:.1e}, worst |delta| vs MC {worst:.4} over 9 settings"),
    ))
}

fn nondecreasing_within(values: &[f64], ci: &[f64]) -> bool {
    (1..values.len()).all(|i| values[i] >= values[i - 1] - (ci[i] + ci[i - 1]))
}

fn dominates_within(hi: &Table, lo: &Table, value: &str, ci: &str) -> bool {
    let (a, ca, b, cb) = (
        hi.values(value),
        hi.values(ci),
        lo.values(value),
        lo.values(ci),
    );
    (0..a.len()).all(|i| a[i] >= b[i] - (ca[i] + cb[i]))
}

fn rises_then_falls(values: &[f64], ci: &[f64]) -> bool {
    let last = values.len() - 1;
    let Some(m) = (0..=last).max_by(|&a, &b| values[a].total_cmp(&values[b])) else {
        return false;
    };
    m > 0
        && m < last
        && values[m] - ci[m] > values[0] + ci[0]
        && values[m] - ci[m] > values[last] + ci[last]
}

fn covert_rate_trends() -> Result<Outcome> {
    let cfg = figure_config(100_000);
    let f4 = experiments::fig4(&cfg)?;
    let (r4, m4) = (table(&f4, "fig4_rrs"), table(&f4, "fig4_mmrs"));
    let mut notes = Vec::new();
    let mut pass = true;
    for t in [r4, m4] {
        let ok = nondecreasing_within(&t.values("covert_rate"), &t.values("covert_rate_ci"));
        pass &= ok;
        notes.push(format!(
            "{} P_T trend {}",
            t.name,
            if ok { "ok" } else { "BAD" }
        ));
    }
    let dom4 = dominates_within(m4, r4, "covert_rate", "covert_rate_ci");

    let f5 = experiments::fig5(&cfg)?;
    let tag = format!("noise_{}db", -5.0);
    let (r5, m5) = (
        table(&f5, &format!("fig5_rrs_{tag}")),
        table(&f5, &format!("fig5_mmrs_{tag}")),
    );
    for t in [r5, m5] {
        let ok = rises_then_falls(&t.values("r_star"), &t.values("r_star_ci"));
        pass &= ok;
        let peak = t.values("r_star").iter().copied().fold(0.0, f64::max);
        notes.push(format!(
            "{} P_J rise-fall {} (peak {peak:.3})",
            t.name,
            if ok { "ok" } else { "BAD" }
        ));
    }
    let dom5 = dominates_within(m5, r5, "r_star", "r_star_ci");
    pass &= dom4 && dom5;
    notes.push(format!(
        "MMRS >= RRS {}",
        if dom4 && dom5 { "ok" } else { "BAD" }
    ));
    Ok(Outcome::new(pass, notes.join(", ")))
}

fn optimization_trends() -> Result<Outcome> {
    let cfg = figure_config(100_000);
    let mut tables = experiments::fig6(&cfg)?;
    tables.extend(experiments::fig7(&cfg)?);
    let mut pass = true;
    let mut notes = Vec::new();
    let mut worst_residual = f64::INFINITY;
    for t in &tables {
        let r = t.values("r_star");
        let monotone = r.windows(2).all(|w| w[1] >= w[0] - 1e-12);
        if !monotone {
            notes.push(format!("{} not monotone", t.name));
        }
        pass &= monotone;
        let binding = t.column("binding_constraint").expect("binding column");
        for (row, (eps, zeta)) in t.rows.iter().zip(
            t.values("epsilon_c")
                .into_iter()
                .zip(t.values("zeta_at_star")),
        ) {
            if row[binding] != "none_feasible" {
                worst_residual = worst_residual.min(zeta - (1.0 - eps));
            }
        }
    }
    pass &= worst_residual >= -1e-9;
    let exact_ge = |hi: &Table, lo: &Table| {
        hi.values("r_star")
            .iter()
            .zip(lo.values("r_star"))
            .all(|(a, b)| *a >= b - 1e-12)
    };
    for scheme in Scheme::ALL {
        let on = table(&tables, &format!("fig7_{scheme}_jamming"));
        let off = table(&tables, &format!("fig7_{scheme}_no_jamming"));
        let ok = exact_ge(on, off);
        pass &= ok;
        notes.push(format!(
            "{scheme} jamming on >= off {}",
            if ok { "ok" } else { "BAD" }
        ));
    }
    let mut dom = dominates_within(
        table(&tables, "fig7_mmrs_jamming"),
        table(&tables, "fig7_rrs_jamming"),
        "r_star",
        "r_star_ci",
    );
    for alpha in FIG_ALPHAS {
        dom &= dominates_within(
            table(&tables, &format!("fig6_mmrs_alpha_{alpha}")),
            table(&tables, &format!("fig6_rrs_alpha_{alpha}")),
            "r_star",
            "r_star_ci",
        );
    }
    pass &= dom;
    notes.push(format!("MMRS >= RRS {}", if dom { "ok" } else { "BAD" }));
    notes.push(format!("min covertness residual {worst_residual:.2e}"));
    Ok(Outcome::new(
        pass,
        format!("{} tables, {}", tables.len(), notes.join(", ")),
    ))
}

fn all_outputs() -> Result<Vec<Vec<u8>>> {
    let swept = parse_config(&format!(
        r#"{{"sim": {{"trials": 30000, "seed": {SEED}}},
            "sweep": {{"variable": "p_t", "values": [2, 5, 8]}}}}"#
    ))?;
    let opt = parse_config(&format!(
        r#"{{"params": {{"epsilon_c": 0.2}}, "sim": {{"trials": 30000, "seed": {SEED}, "scheme": "mmrs"}}}}"#
    ))?;
    let figs = figure_config(20_000);
    let mut out = vec![experiments::simulate(&swept)?.to_csv(None)?];
    let (result, trace) = experiments::optimize(&opt)?;
    out.push(result.to_csv(None)?);
    out.push(trace.to_csv(None)?);
    for fig in [Figure::Fig2, Figure::Fig4] {
        for t in experiments::reproduce(fig, &figs)? {
            out.push(t.to_csv(None)?);
        }
    }
    Ok(out)
}

fn determinism() -> Result<Outcome> {
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool")
            .install(all_outputs)
    };
    let one = run(1)?;
    let many = run(3)?;
    let again = run(2)?;
    let same = one == many && one == again;
    Ok(Outcome::new(
        same,
        format!(
            "{} CSV outputs compared across 1, 2 and 3 workers",
            one.len()
        ),
    ))
}

fn derivative_consistency() -> Result<Outcome> {
    let p = SystemParams::reference();
    let mut rng = substream(SEED, 77);
    let mut worst = [0.0f64; 2];
    for _ in 0..20 {
        let rrs = ZetaCurve::rrs(rng.random_range(1..=8), &p);
        let ctx = MmrsDetectionContext {
            phi: rng.random_range(0.05..0.95),
            l: rng.random_range(1..=8),
        };
        let mmrs = ZetaCurve::mmrs(&ctx, p.sigma_w2, p.p_j);
        for (k, curve) in [rrs, mmrs].into_iter().enumerate() {
            let lambda = p.sigma_w2 + rng.random_range(0.05..20.0);
            let f = |x: f64| {
                pfa(curve.l, x, curve.sigma_w2, curve.p_j).expect("pfa")
                    + curve.eval(x, ZetaForm::ClosedForm).pmd_raw
            };
            let h = 1e-5 * lambda;
            let fd = (f(lambda + h) - f(lambda - h)) / (2.0 * h);
            let analytic = curve.derivative(lambda);
            worst[k] = worst[k].max((analytic - fd).abs() / fd.abs().max(analytic.abs()));
        }
    }
    Ok(Outcome::new(
        worst.iter().all(|&w| w <= 1e-4),
        format!(
            "worst relative error rrs {:.1e}, mmrs {:.1e}",
            worst[0], worst[1]
        ),
    ))
}

type Check = fn() -> Result<Outcome>;

fn main() -> ExitCode {
    let criteria: [(&str, Check); 10] = [
        ("erlang tail vs Monte Carlo", erlang_oracle),
        ("RRS detection error vs Monte Carlo", rrs_detection_regime),
        ("detection error shape in threshold", zeta_shape),
        ("RRS outage vs Monte Carlo", rrs_outage_oracle),
        (
            "MMRS selected-gain CDF vs Monte Carlo",
            mmrs_gain_cdf_oracle,
        ),
        ("MMRS outage limit and Monte Carlo", mmrs_outage_sanity),
        ("covert rate trends", covert_rate_trends),
        ("optimized rate trends", optimization_trends),
        ("worker-count determinism", determinism),
        (
            "threshold derivative vs finite differences",
            derivative_consistency,
        ),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check().unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
        failed += usize::from(!outcome.pass);
        println!(
            "criterion {:>2} {}: {} ({}; {:.1} s)",
            i + 1,
            if outcome.pass { "PASS" } else { "FAIL" },
            name,
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
