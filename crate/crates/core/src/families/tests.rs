use approx::assert_relative_eq;
use proptest::prelude::*;

use super::*;
use crate::special::ApproxMode;
use crate::state_space::PredictorMoments;

fn ctx_for(family: Family) -> ObsContext {
    match family {
        Family::Binomial => ObsContext::with_n(12),
        Family::NegativeBinomial => ObsContext::with_n(4),
        Family::Normal | Family::LogNormal => ObsContext::with_v(0.7),
        Family::Gamma | Family::InverseGamma => ObsContext::with_alpha(1.5),
        Family::Weibull => ObsContext::with_nu(2.0),
        Family::InverseGaussian => ObsContext::with_lambda(3.0),
        Family::Poisson | Family::Pareto => ObsContext::default(),
    }
}

fn pm(f: f64, q: f64) -> PredictorMoments {
    PredictorMoments::new(f, q)
}

fn close(a: ConjugateParams, r: f64, s: f64) {
    assert_relative_eq!(a.r, r, max_relative = 1e-12);
    assert_relative_eq!(a.s, s, max_relative = 1e-12);
}

#[test]
fn binomial_examples() {
    let fam = Family::Binomial;
    close(
        fam.conjugate_from_moments(pm(0.0, 1.0), &ObsContext::with_n(5))
            .unwrap(),
        2.0,
        4.0,
    );
    let post = fam
        .posterior_params(ConjugateParams::new(2.0, 4.0), 3.0, &ObsContext::with_n(5))
        .unwrap();
    close(post, 5.0, 9.0);
    let (mean, _) = fam
        .forecast_moments(ConjugateParams::new(2.0, 4.0), &ObsContext::with_n(5))
        .unwrap();
    assert_relative_eq!(mean, 2.5, max_relative = 1e-14);
    assert!(fam.check_obs(6.0, &ObsContext::with_n(5)).is_err());
}

#[test]
fn poisson_examples() {
    let fam = Family::Poisson;
    let ctx = ObsContext::default();
    let p = fam.conjugate_from_moments(pm(0.0, 0.5), &ctx).unwrap();
    close(p, 2.0, 2.0);
    let p0 = fam.forecast_logdensity(p, 0.0, &ctx).unwrap().exp();
    assert_relative_eq!(p0, 4.0 / 9.0, max_relative = 1e-13);
    let (m, v) = fam.forecast_moments(p, &ctx).unwrap();
    assert_relative_eq!(m, 1.0, max_relative = 1e-14);
    assert_relative_eq!(v, 1.5, max_relative = 1e-14);
    let post = fam
        .posterior_params(ConjugateParams::new(3.0, 2.0), 1.0, &ctx)
        .unwrap();
    let next = fam
        .power_discount(post, 1.0, &ctx, &ctx, ApproxMode::Exact)
        .unwrap();
    close(next, 4.0, 3.0);
    assert!(fam.check_obs(1.5, &ctx).is_err());
    assert!(fam.check_obs(-1.0, &ctx).is_err());
}

#[test]
fn negative_binomial_examples() {
    let fam = Family::NegativeBinomial;
    let ctx = ObsContext::with_n(10);
    let p = fam.conjugate_from_moments(pm(0.0, 0.5), &ctx).unwrap();
    close(p, 4.0, 0.3);
    let (m, _) = fam.forecast_moments(p, &ctx).unwrap();
    assert_relative_eq!(m, 40.0 / 3.0, max_relative = 1e-13);
    // q beyond 1 + e^f
    let err = fam.conjugate_from_moments(pm(0.0, 2.5), &ctx).unwrap_err();
    assert!(err.to_string().contains("shrink q"));
}

#[test]
fn geometric_is_negative_binomial_with_one_success() {
    let fam = Family::NegativeBinomial;
    let ctx = ObsContext::with_n(1);
    let p = ConjugateParams::new(2.5, 1.7);
    // π ~ Beta(s + 1, r), y | π geometric: p(y) = B(s + 2, r + y)/B(s + 1, r)
    for y in 0..40 {
        let yf = y as f64;
        let direct = crate::special::log_beta(p.s + 2.0, p.r + yf).unwrap()
            - crate::special::log_beta(p.s + 1.0, p.r).unwrap();
        assert_relative_eq!(
            fam.forecast_logdensity(p, yf, &ctx).unwrap(),
            direct,
            max_relative = 1e-12
        );
    }
}

#[test]
fn normal_examples() {
    let fam = Family::Normal;
    let ctx = ObsContext::with_v(1.0);
    close(
        fam.conjugate_from_moments(pm(1.0, 0.5), &ctx).unwrap(),
        2.0,
        2.0,
    );
    let post = fam
        .posterior_params(ConjugateParams::new(2.0, 2.0), 3.0, &ctx)
        .unwrap();
    let law = fam.conjugate_law(post, &ctx).unwrap();
    assert_relative_eq!(law.mean(), 5.0 / 3.0, max_relative = 1e-14);
    assert_relative_eq!(1.0 / law.variance(), 3.0, max_relative = 1e-14);
    let p = ConjugateParams::new(2.0, 2.0);
    let (m, v) = fam.forecast_moments(p, &ctx).unwrap();
    assert_relative_eq!(m, 1.0);
    assert_relative_eq!(v, 1.5);
    let direct = -0.5 * (2.0 * std::f64::consts::PI * 1.5).ln() - 0.3f64.powi(2) / 3.0;
    assert_relative_eq!(
        fam.forecast_logdensity(p, 1.3, &ctx).unwrap(),
        direct,
        max_relative = 1e-13
    );
    assert!(fam.forecast_moments(p, &ObsContext::with_v(-1.0)).is_err());
}

#[test]
fn lognormal_examples() {
    let fam = Family::LogNormal;
    let ctx = ObsContext::with_v(1.0);
    let p = fam.conjugate_from_moments(pm(0.0, 0.5), &ctx).unwrap();
    let (m, _) = fam.forecast_moments(p, &ctx).unwrap();
    assert_relative_eq!(m, 0.75f64.exp(), max_relative = 1e-13);
    let post = fam
        .posterior_params(ConjugateParams::new(0.0, 1.0), std::f64::consts::E, &ctx)
        .unwrap();
    let law = fam.conjugate_law(post, &ctx).unwrap();
    assert_relative_eq!(law.mean(), 0.5, max_relative = 1e-14);
    assert_relative_eq!(law.variance(), 0.5, max_relative = 1e-14);
    assert!(fam.check_obs(0.0, &ctx).is_err());
}

#[test]
fn gamma_examples() {
    let fam = Family::Gamma;
    let ctx = ObsContext::with_alpha(2.0);
    let p = fam.conjugate_from_moments(pm(0.0, 0.5), &ctx).unwrap();
    close(p, 2.0, 0.5);
    let (m, _) = fam.forecast_moments(p, &ctx).unwrap();
    assert_relative_eq!(m, 4.0, max_relative = 1e-14);
    assert_relative_eq!(ewma_volatility(&[1.0, 1.0], 0.5).unwrap(), 1.0);
    assert!(fam.conjugate_from_moments(pm(0.0, 1.5), &ctx).is_err());
}

#[test]
fn ewma_equals_discounted_ratio() {
    let fam = Family::Gamma;
    let ctx = ObsContext::with_alpha(0.5);
    let y2 = [0.4, 1.9, 0.2, 3.3, 0.8];
    let delta = 0.8;
    let mut p = ConjugateParams::new(0.0, 0.0);
    for &y in &y2 {
        // zero prior is outside the law's domain; update by hand
        let post = ConjugateParams::new(p.r + y, p.s + 1.0);
        p = fam
            .power_discount(post, delta, &ctx, &ctx, ApproxMode::Exact)
            .unwrap();
    }
    assert_relative_eq!(
        p.r / p.s,
        ewma_volatility(&y2, delta).unwrap(),
        max_relative = 1e-13
    );
}

#[test]
fn weibull_examples() {
    let fam = Family::Weibull;
    let ctx = ObsContext::with_nu(3.0);
    close(
        fam.conjugate_from_moments(pm(0.0, 0.5), &ctx).unwrap(),
        2.0,
        3.0,
    );
    let (m, _) = fam
        .statistic_moments(ConjugateParams::new(2.0, 4.0), &ctx)
        .unwrap();
    assert_relative_eq!(m, 1.0, max_relative = 1e-14);
    let (m, v) = fam
        .statistic_moments(ConjugateParams::new(2.0, 2.5), &ctx)
        .unwrap();
    assert!(m.is_finite() && v.is_infinite());
}

#[test]
fn pareto_examples() {
    let fam = Family::Pareto;
    let ctx = ObsContext::default();
    close(
        fam.conjugate_from_moments(pm(0.0, 0.5), &ctx).unwrap(),
        2.0,
        1.0,
    );
    let post = fam
        .posterior_params(ConjugateParams::new(2.0, 1.0), std::f64::consts::E, &ctx)
        .unwrap();
    let next = fam
        .power_discount(post, 0.5, &ctx, &ctx, ApproxMode::Exact)
        .unwrap();
    close(next, 1.5, 1.0);
    assert!(fam.check_obs(0.9, &ctx).is_err());
    assert_relative_eq!(beta_upper_to_pareto(0.25).unwrap(), 4.0);
    assert_relative_eq!(beta_lower_to_pareto(0.75).unwrap(), 4.0);
}

#[test]
fn inverse_gaussian_examples() {
    let fam = Family::InverseGaussian;
    let ctx = ObsContext::with_lambda(0.01);
    assert_relative_eq!(kappa(2.5, 0.0).unwrap(), 2.5);
    let law = fam
        .conjugate_law(ConjugateParams::new(2.0, 0.0), &ctx)
        .unwrap();
    assert_relative_eq!(
        law.mean(),
        (std::f64::consts::PI * 2.0).sqrt(),
        max_relative = 1e-12
    );
    assert!(!fam.has_closed_moment_matching());
    assert!(fam.conjugate_from_moments(pm(0.0, 0.5), &ctx).is_err());
}

#[test]
fn link_roundtrips() {
    for fam in ALL_FAMILIES {
        let states: &[f64] = match fam {
            Family::Binomial | Family::NegativeBinomial => &[0.05, 0.3, 0.5, 0.9],
            Family::Normal | Family::LogNormal => &[-3.0, 0.0, 2.5],
            _ => &[0.2, 1.0, 7.5],
        };
        for &x in states {
            let back = fam.inverse_link(fam.link(x));
            assert!(
                (back - x).abs() <= 1e-10 * x.abs().max(1.0),
                "{fam}: {x} -> {back}"
            );
        }
    }
}

#[test]
fn delta_one_is_carry_forward() {
    let posts = [(3.0, 7.0), (1.5, 4.0), (6.0, 13.0)];
    for fam in ALL_FAMILIES {
        let ctx = ctx_for(fam);
        for &(r, s) in &posts {
            let post = ConjugateParams::new(r, s);
            let next = fam
                .power_discount(post, 1.0, &ctx, &ctx, ApproxMode::Exact)
                .unwrap();
            assert_relative_eq!(next.r, r, max_relative = 1e-12);
            assert_relative_eq!(next.s, s, max_relative = 1e-12);
        }
    }
}

#[test]
fn discounting_flattens_the_state_law() {
    let posts = [(3.0, 9.0), (5.0, 12.0), (2.5, 8.0)];
    for fam in ALL_FAMILIES {
        if fam == Family::InverseGaussian {
            continue;
        }
        let ctx = ctx_for(fam);
        for &(r, s) in &posts {
            let post = ConjugateParams::new(r, s);
            let v0 = fam.conjugate_law(post, &ctx).unwrap().variance();
            for delta in [0.95, 0.8, 0.6] {
                let next = fam
                    .power_discount(post, delta, &ctx, &ctx, ApproxMode::Exact)
                    .unwrap();
                let v = fam.conjugate_law(next, &ctx).unwrap().variance();
                assert!(v >= v0, "{fam} ({r},{s}) delta {delta}: {v} < {v0}");
            }
        }
    }
}

#[test]
fn closed_bayes_factors_match_density_ratios() {
    let (p1, p2) = (
        ConjugateParams::new(2.5, 3.0),
        ConjugateParams::new(1.2, 1.8),
    );
    let g = ObsContext::with_alpha(1.5);
    let y = 1.3;
    let lhs = log_h1_gamma_delta(p1, p2, y, 1.5).unwrap();
    let rhs = Family::Gamma.forecast_logdensity(p1, y, &g).unwrap()
        - Family::Gamma.forecast_logdensity(p2, y, &g).unwrap();
    assert!((lhs - rhs).abs() < 1e-10);

    let lhs = log_h1_gamma_alpha(p1, y, 1.5, 0.7).unwrap();
    let rhs = Family::Gamma.forecast_logdensity(p1, y, &g).unwrap()
        - Family::Gamma
            .forecast_logdensity(p1, y, &ObsContext::with_alpha(0.7))
            .unwrap();
    assert!((lhs - rhs).abs() < 1e-10);

    let w = ObsContext::with_nu(2.0);
    let lhs = log_h1_weibull(p1, p2, y, 2.0).unwrap();
    let rhs = Family::Weibull.forecast_logdensity(p1, y, &w).unwrap()
        - Family::Weibull.forecast_logdensity(p2, y, &w).unwrap();
    assert!((lhs - rhs).abs() < 1e-10);

    let d = ObsContext::default();
    let lhs = log_h1_pareto(p1, p2, 2.0).unwrap();
    let rhs = Family::Pareto.forecast_logdensity(p1, 2.0, &d).unwrap()
        - Family::Pareto.forecast_logdensity(p2, 2.0, &d).unwrap();
    assert!((lhs - rhs).abs() < 1e-10);

    let lhs = log_h1_lognormal(p1, 0.4, p2, 1.1, y).unwrap();
    let rhs = Family::LogNormal
        .forecast_logdensity(p1, y, &ObsContext::with_v(0.4))
        .unwrap()
        - Family::LogNormal
            .forecast_logdensity(p2, y, &ObsContext::with_v(1.1))
            .unwrap();
    assert!((lhs - rhs).abs() < 1e-10);
}

#[test]
fn family_names_parse() {
    for fam in ALL_FAMILIES {
        assert_eq!(fam.name().parse::<Family>().unwrap(), fam);
    }
    assert!("cauchy".parse::<Family>().is_err());
}

const CLOSED: [Family; 9] = [
    Family::Binomial,
    Family::Poisson,
    Family::NegativeBinomial,
    Family::Normal,
    Family::LogNormal,
    Family::Gamma,
    Family::InverseGamma,
    Family::Weibull,
    Family::Pareto,
];

proptest! {
    #[test]
    fn matching_round_trip(idx in 0usize..9, f in -3.0f64..3.0, u in 0.01f64..0.95) {
        let fam = CLOSED[idx];
        let ctx = ctx_for(fam);
        // keep q inside every family's domain
        let q = match fam.q_limit(f) {
            Some(lim) => u * lim.min(1.0),
            None => u,
        };
        if let Ok(p) = fam.conjugate_from_moments(pm(f, q), &ctx) {
            let back = fam.approx_moments(p, &ctx).unwrap();
            prop_assert!((back.f - f).abs() <= 1e-12 * f.abs().max(1.0));
            prop_assert!((back.q - q).abs() <= 1e-12 * q);
        }
    }

    #[test]
    fn lognormal_is_normal_on_logs(
        ys in proptest::collection::vec(0.05f64..40.0, 1..30),
        delta in 0.5f64..1.0,
    ) {
        let v = ObsContext::with_v(0.8);
        let mut a = ConjugateParams::new(0.0, 1.0);
        let mut b = a;
        for &y in &ys {
            let pa = Family::LogNormal.posterior_params(a, y, &v).unwrap();
            let pb = Family::Normal.posterior_params(b, y.ln(), &v).unwrap();
            a = Family::LogNormal.power_discount(pa, delta, &v, &v, ApproxMode::Exact).unwrap();
            b = Family::Normal.power_discount(pb, delta, &v, &v, ApproxMode::Exact).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn posterior_moments_shrink_variance(r in 0.5f64..20.0, s in 2.0f64..20.0, y in 0.0f64..10.0) {
        // a Poisson posterior is never more diffuse than its prior in log λ
        let fam = Family::Poisson;
        let ctx = ObsContext::default();
        let p = ConjugateParams::new(r, s);
        let prior = fam.predictor_moments(p, &ctx, ApproxMode::Exact).unwrap();
        let post = fam.posterior_params(p, y.floor(), &ctx).unwrap();
        let after = fam.posterior_predictor_moments(post, &ctx, ApproxMode::Exact).unwrap();
        prop_assert!(after.q <= prior.q);
    }
}
