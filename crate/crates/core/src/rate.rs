//! Link SIR, closed-form transmission outage, and covert-rate assembly.

use crate::error::{Error, Result};
use crate::model::{Scheme, SystemParams};
use crate::numeric::{binomial, KahanSum};

/// Alternating binomial sums lose precision quickly beyond this many relays.
pub const WELL_CONDITIONED_MAX_N: usize = 30;
/// Hard cap on `n` for the alternating sums.
pub const MAX_ALTERNATING_N: usize = 60;

pub fn sir_hop(signal_gain: f64, p_t: f64, p_j: f64, jam_gains: &[f64], sigma2: f64) -> f64 {
    p_t * signal_gain / (p_j * jam_gains.iter().sum::<f64>() + sigma2)
}

/// Achievable rate `log2(1 + sir)` in bits/s/Hz.
pub fn rate_bits(sir: f64) -> f64 {
    sir.ln_1p() / std::f64::consts::LN_2
}

/// `E[exp(-y X)]` for `X ~ Exp(1)` truncated to `[0, alpha]`.
pub fn truncated_exp_mgf(y: f64, alpha: f64) -> f64 {
    (-(-(1.0 + y) * alpha).exp_m1()) / ((-(-alpha).exp_m1()) * (1.0 + y))
}

/// RRS transmission outage: either hop's SIR falls below `theta`, with all
/// `n - 1` other relays jamming at gains truncated to `[0, alpha]`.
pub fn outage_rrs(params: &SystemParams) -> Result<f64> {
    if params.n == 0 {
        return Err(Error::invalid("n", "need at least one relay"));
    }
    check_link_powers(params)?;
    let k = params.theta * params.p_j / params.p_t;
    let noise = (-params.theta * (params.sigma_c2 + params.sigma_b2) / params.p_t).exp();
    let jam = truncated_exp_mgf(k, params.alpha).powi(2 * (params.n as i32 - 1));
    Ok((1.0 - noise * jam).clamp(0.0, 1.0))
}

fn check_link_powers(params: &SystemParams) -> Result<()> {
    if !(params.alpha > 0.0) {
        return Err(Error::invalid("alpha", "must be > 0"));
    }
    if !(params.p_t > 0.0 && params.p_t.is_finite()) {
        return Err(Error::invalid(
            "p_t",
            format!("must be finite and > 0, got {}", params.p_t),
        ));
    }
    if !(params.p_j >= 0.0 && params.p_j.is_finite()) {
        return Err(Error::invalid(
            "p_j",
            format!("must be finite and >= 0, got {}", params.p_j),
        ));
    }
    if !(params.theta > 0.0 && params.theta.is_finite()) {
        return Err(Error::invalid(
            "theta",
            format!("must be finite and > 0, got {}", params.theta),
        ));
    }
    Ok(())
}

fn check_alternating_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one relay"));
    }
    if n > MAX_ALTERNATING_N {
        return Err(Error::invalid(
            "n",
            format!("alternating sum unstable beyond n = {MAX_ALTERNATING_N}, got {n}"),
        ));
    }
    Ok(())
}

/// CDF of the MMRS-selected relay's first-hop gain.
pub fn mmrs_first_gain_cdf(x: f64, n: usize) -> Result<f64> {
    check_alternating_n(n)?;
    if x <= 0.0 {
        return Ok(0.0);
    }
    let s: KahanSum = (0..=n as u32)
        .map(|k| {
            let kf = f64::from(k);
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * binomial(n as u32, k) * (kf * (-x).exp() + (kf - 1.0) * (-2.0 * kf * x).exp())
                / (2.0 * kf - 1.0)
        })
        .collect();
    Ok(s.value().clamp(0.0, 1.0))
}

/// A probability produced by an expression that can stray outside [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundedProbability {
    pub value: f64,
    pub raw: f64,
    pub clamped: bool,
    /// `n` is past the range where the alternating sum is well conditioned.
    pub ill_conditioned: bool,
}

fn mmrs_outage_terms(params: &SystemParams, l: usize) -> impl Iterator<Item = f64> + '_ {
    let n = params.n as u32;
    let z = params.theta * params.p_j / params.p_t;
    let base = params.theta * params.sigma_c2 / params.p_t;
    (0..=n).map(move |k| {
        let kf = f64::from(k);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let coeff = sign * binomial(n, k) / (2.0 * kf - 1.0);
        let first = kf * (-base).exp() * truncated_exp_mgf(z, params.alpha).powi(l as i32);
        let second = (kf - 1.0)
            * (-2.0 * kf * base).exp()
            * truncated_exp_mgf(2.0 * kf * z, params.alpha).powi(l as i32);
        coeff * (first + second)
    })
}

/// MMRS first-hop outage with `l` jammers at truncated gains.
pub fn outage_mmrs(params: &SystemParams, l: usize) -> Result<BoundedProbability> {
    check_alternating_n(params.n)?;
    check_link_powers(params)?;
    let raw = mmrs_outage_terms(params, l).collect::<KahanSum>().value();
    let value = raw.clamp(0.0, 1.0);
    Ok(BoundedProbability {
        value,
        raw,
        clamped: value != raw,
        ill_conditioned: params.n > WELL_CONDITIONED_MAX_N,
    })
}

pub fn covert_rate(p_out: f64, expected_min_rate: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_out) {
        return Err(Error::invalid(
            "p_out",
            format!("must lie in [0, 1], got {p_out}"),
        ));
    }
    if !(expected_min_rate >= 0.0) {
        return Err(Error::invalid(
            "expected_min_rate",
            format!("must be >= 0, got {expected_min_rate}"),
        ));
    }
    Ok((1.0 - p_out) * expected_min_rate)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateResult {
    pub p_out: f64,
    pub expected_min_rate: f64,
    pub covert_rate: f64,
    pub scheme: Scheme,
}

impl RateResult {
    pub fn new(scheme: Scheme, p_out: f64, expected_min_rate: f64) -> Result<Self> {
        Ok(RateResult {
            p_out,
            expected_min_rate,
            covert_rate: covert_rate(p_out, expected_min_rate)?,
            scheme,
        })
    }
}

/// Closed-form outage for `scheme`; MMRS uses `l` jammers.
pub fn outage(scheme: Scheme, params: &SystemParams, l: usize) -> Result<f64> {
    match scheme {
        Scheme::Rrs => outage_rrs(params),
        Scheme::Mmrs => outage_mmrs(params, l).map(|p| p.value),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{db_to_linear, sample_realization, select_mmrs};
    use crate::rng::substream;
    use proptest::prelude::*;

    fn fig2(n: usize, alpha: f64) -> SystemParams {
        SystemParams {
            n,
            alpha,
            ..SystemParams::reference()
        }
    }

    #[test]
    fn sir_values() {
        assert_eq!(sir_hop(1.0, 0.5, 1.0, &[], 0.5), 1.0);
        assert!(sir_hop(1.0, 5.0, 1.0, &[1e300], 0.3) < 1e-290);
        let s = sir_hop(0.8, 5.0, 1.0, &[0.1, 0.2], 0.316_23);
        assert!((s - 4.0 / 0.616_23).abs() < 1e-12);
        assert!((s - 6.4911).abs() < 1e-4);
    }

    #[test]
    fn outage_rrs_values() {
        let p = fig2(1, 0.3);
        let want = 1.0 - (-2.0 * db_to_linear(-5.0) / 5.0f64).exp();
        assert!((outage_rrs(&p).unwrap() - want).abs() < 1e-15);
        assert!((want - 0.118_818).abs() < 1e-6);
        let p = SystemParams {
            theta: 1e-12,
            ..fig2(50, 0.3)
        };
        assert!(outage_rrs(&p).unwrap() < 1e-9);
    }

    #[test]
    fn first_gain_cdf_reduces_to_exponential() {
        for &x in &[0.01, 0.3, 1.0, 2.5, 7.0] {
            let v = mmrs_first_gain_cdf(x, 1).unwrap();
            assert!((v - (1.0 - (-x).exp())).abs() < 1e-12);
        }
        assert_eq!(mmrs_first_gain_cdf(0.0, 5).unwrap(), 0.0);
        assert!(mmrs_first_gain_cdf(1.0, 0).is_err());
        assert!(mmrs_first_gain_cdf(1.0, 61).is_err());
    }

    #[test]
    fn first_gain_cdf_matches_selection_oracle() {
        // brute force: select by max-min, record the first-hop gain
        let n = 5;
        let p = SystemParams {
            n,
            ..SystemParams::reference()
        };
        let mut rng = substream(21, 0);
        let trials = 200_000;
        let mut gains: Vec<f64> = (0..trials)
            .map(|_| {
                let r = sample_realization(&p, &mut rng);
                r.g_ac[select_mmrs(&r.g_ac, &r.g_cb).unwrap()]
            })
            .collect();
        gains.sort_by(f64::total_cmp);
        for i in 1..=30 {
            let x = 0.1 * i as f64;
            let emp = gains.partition_point(|&g| g < x) as f64 / trials as f64;
            assert!((emp - mmrs_first_gain_cdf(x, n).unwrap()).abs() < 0.01);
        }
    }

    #[test]
    fn outage_mmrs_limits() {
        let p = SystemParams {
            p_t: 1e6,
            p_max: 1e6,
            ..fig2(20, 0.3)
        };
        assert!(outage_mmrs(&p, 5).unwrap().value <= 1e-6);
        // n = 1, l = 0: P(P_T g < theta sigma_c2) = 1 - e^{-theta sigma_c2 / P_T}
        let p = fig2(1, 0.3);
        let v = outage_mmrs(&p, 0).unwrap();
        let want = 1.0 - (-p.theta * p.sigma_c2 / p.p_t).exp();
        assert!((v.value - want).abs() < 1e-14);
        assert!(!v.ill_conditioned);
        assert!(outage_mmrs(&fig2(40, 0.3), 5).unwrap().ill_conditioned);
    }

    #[test]
    fn covert_rate_values() {
        assert_eq!(covert_rate(1.0, 3.0).unwrap(), 0.0);
        assert_eq!(covert_rate(0.0, 2.5).unwrap(), 2.5);
        assert!((covert_rate(0.118_77, 2.0).unwrap() - 1.762_46).abs() < 1e-10);
        assert!(covert_rate(1.2, 1.0).is_err());
        assert!(covert_rate(0.5, -1.0).is_err());
        let r = RateResult::new(Scheme::Rrs, 0.25, 2.0).unwrap();
        assert_eq!(r.covert_rate, 1.5);
    }

    #[test]
    fn rrs_outage_monotone_on_grid() {
        let ns = [1, 2, 5, 10, 20, 30, 50];
        let alphas = [0.1, 0.3, 0.5, 0.7, 1.0];
        for &a in &alphas {
            let v: Vec<f64> = ns
                .iter()
                .map(|&n| outage_rrs(&fig2(n, a)).unwrap())
                .collect();
            assert!(v.windows(2).all(|w| w[0] <= w[1]));
        }
        for &n in &ns {
            let v: Vec<f64> = alphas
                .iter()
                .map(|&a| outage_rrs(&fig2(n, a)).unwrap())
                .collect();
            assert!(v.windows(2).all(|w| w[0] <= w[1]));
            let pts = [0.5, 1.0, 2.0, 5.0, 10.0];
            let v: Vec<f64> = pts
                .iter()
                .map(|&p_t| {
                    outage_rrs(&SystemParams {
                        p_t,
                        ..fig2(n, 0.3)
                    })
                    .unwrap()
                })
                .collect();
            assert!(v.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn cdf_valid_on_dense_grid() {
        for &n in &[1usize, 2, 5, 10, 20] {
            let mut prev = 0.0;
            for i in 0..=2000 {
                let v = mmrs_first_gain_cdf(i as f64 * 0.01, n).unwrap();
                assert!((0.0..=1.0).contains(&v));
                assert!(v >= prev - 1e-9, "n={n} i={i}");
                prev = v;
            }
            assert!(mmrs_first_gain_cdf(60.0, n).unwrap() > 1.0 - 1e-12);
        }
    }

    #[test]
    fn compensated_sum_is_order_independent() {
        for n in [1, 5, 10, 20, 30] {
            for p_t in [0.5, 5.0, 50.0] {
                let p = SystemParams {
                    p_t,
                    p_max: 50.0,
                    ..fig2(n, 0.5)
                };
                let l = p.default_jammer_count();
                let comp = outage_mmrs(&p, l).unwrap().raw;
                let mut terms: Vec<f64> = mmrs_outage_terms(&p, l).collect();
                let scale: f64 = terms.iter().map(|t| t.abs()).sum();
                terms.reverse();
                let reversed = terms.iter().copied().collect::<KahanSum>().value();
                // interleave: even indices, then odd
                let shuffled: KahanSum = terms
                    .iter()
                    .step_by(2)
                    .chain(terms.iter().skip(1).step_by(2))
                    .copied()
                    .collect();
                assert!((comp - reversed).abs() < 1e-9, "n={n}");
                assert!((comp - shuffled.value()).abs() < 1e-9, "n={n}");
                let plain: f64 = terms.iter().sum();
                assert!(
                    (comp - plain).abs() <= 1e-15 * scale * terms.len() as f64,
                    "n={n}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn per_realization_rates(g1 in 0.0f64..20.0, g2 in 0.0f64..20.0, s in 0.0f64..5.0) {
            let r1 = rate_bits(sir_hop(g1, 5.0, 1.0, &[s], 0.3));
            let r2 = rate_bits(sir_hop(g2, 5.0, 1.0, &[s], 0.3));
            prop_assert!(r1 >= 0.0 && r2 >= 0.0);
            prop_assert!(r1.min(r2) <= r1 && r1.min(r2) <= r2);
        }
    }
}
