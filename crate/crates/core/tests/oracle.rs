mod common;

use approx::assert_relative_eq;
use common::*;
use propriety_core::jeffreys::{build_jeffreys, fisher_info_tau};
use propriety_core::model::{validate, Family, GlmmModel, Link, PriorBlock, ValidatedModel};
use propriety_core::numeric::{rat, ratio, RatMatrix};
use propriety_core::oracle::{complete_loglik, fisher_fd_oracle, marginal_loglik, truncated_cy, CyConfig};
use propriety_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn single_poisson(y: i64) -> ValidatedModel {
    validate(GlmmModel {
        family: Family::Poisson,
        link: Link::Log,
        y: vec![y],
        m: None,
        x: int_rows(&[&[1]]),
        z: int_rows(&[&[1]]),
        blocks: vec![PriorBlock::new(1, rat(1), rat(1))],
    })
    .unwrap()
}

/// Direct log pmf plus normal log density, written independently of the
/// library's likelihood code.
fn complete_loglik_direct(model: &ValidatedModel, beta: &[f64], tau: f64, u: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..model.n() {
        let eta: f64 = model.x_rows()[i].iter().zip(beta).map(|(x, b)| x * b).sum::<f64>()
            + model.z_rows()[i].iter().zip(u).map(|(z, v)| z * v).sum::<f64>();
        let y = model.y()[i];
        total += match model.family() {
            Family::Poisson => {
                let lny: f64 = (1..=y).map(|k| (k as f64).ln()).sum();
                y as f64 * eta - eta.exp() - lny
            }
            _ => {
                let m = model.trials()[i];
                let p = 1.0 / (1.0 + (-eta).exp());
                let choose: f64 = (1..=y).map(|k| ((m - y + k) as f64 / k as f64).ln()).sum();
                choose + y as f64 * p.ln() + (m - y) as f64 * (1.0 - p).ln()
            }
        };
    }
    for v in u {
        total += 0.5 * (tau / (2.0 * std::f64::consts::PI)).ln() - 0.5 * tau * v * v;
    }
    total
}

#[test]
fn empty_data_gives_the_normal_density() {
    let model = validate(GlmmModel {
        family: Family::Poisson,
        link: Link::Log,
        y: vec![],
        m: None,
        x: RatMatrix::zeros(0, 1),
        z: RatMatrix::zeros(0, 1),
        blocks: vec![PriorBlock::new(1, rat(1), rat(1))],
    })
    .unwrap();
    let v = complete_loglik(&[0.0], &[1.0], &[0.0], &model).unwrap();
    assert_relative_eq!(v, -0.5 * (2.0 * std::f64::consts::PI).ln(), max_relative = 1e-15);
}

#[test]
fn complete_loglik_matches_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for model in [one_way_binomial(), one_way_poisson()] {
        for _ in 0..50 {
            let beta = [rng.gen_range(-1.0..1.0), rng.gen_range(-0.2..0.2)];
            let tau = 10f64.powf(rng.gen_range(-1.0..1.0));
            let u = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let lib = complete_loglik(&beta, &[tau], &u, &model).unwrap();
            assert_relative_eq!(lib, complete_loglik_direct(&model, &beta, tau, &u), max_relative = 1e-12);
        }
    }
}

#[test]
fn marginal_is_invariant_to_observation_order() {
    let model = one_way_binomial();
    let order = [4, 1, 5, 0, 3, 2];
    let permute = |m: &RatMatrix| {
        let rows = rational_rows(m);
        RatMatrix::from_rows(order.iter().map(|&i| rows[i].clone()).collect()).unwrap()
    };
    let base = model.model();
    let shuffled = validate(GlmmModel {
        family: base.family,
        link: base.link.clone(),
        y: order.iter().map(|&i| base.y[i]).collect(),
        m: base.m.as_ref().map(|m| order.iter().map(|&i| m[i]).collect()),
        x: permute(&base.x),
        z: permute(&base.z),
        blocks: base.blocks.clone(),
    })
    .unwrap();
    for (beta, tau) in [([0.3, -0.2], 0.5), ([-1.0, 0.4], 3.0)] {
        let a = marginal_loglik(&beta, &[tau], &model).unwrap();
        let b = marginal_loglik(&beta, &[tau], &shuffled).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-10);
    }
}

#[test]
fn logit_marginal_is_symmetric_under_label_swap() {
    let model = one_way_binomial();
    let base = model.model();
    let neg = |m: &RatMatrix| RatMatrix::from_rows(rational_rows(m).into_iter().map(|r| r.into_iter().map(|v| -v).collect()).collect()).unwrap();
    let swapped = validate(GlmmModel {
        family: base.family,
        link: Link::Logit,
        y: base.y.iter().zip(base.m.as_ref().unwrap()).map(|(y, m)| m - y).collect(),
        m: base.m.clone(),
        x: neg(&base.x),
        z: neg(&base.z),
        blocks: base.blocks.clone(),
    })
    .unwrap();
    for (beta, tau) in [([0.1, 0.2], 1.0), ([-2.0, 0.7], 0.2)] {
        let a = marginal_loglik(&beta, &[tau], &model).unwrap();
        let b = marginal_loglik(&beta, &[tau], &swapped).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-10);
    }
}

#[test]
fn fd_information_is_close_to_approximation_at_unit_precision() {
    let model = single_poisson(3);
    let fd = fisher_fd_oracle(&model, 1.0).unwrap();
    let jp = build_jeffreys(&model).unwrap();
    let approx = fisher_info_tau(&jp, 0, 1.0).unwrap();
    assert!((fd - approx).abs() <= 0.25 * approx, "fd {fd} vs approximation {approx}");
}

#[test]
fn fd_information_ratio_tends_to_one_for_large_precision() {
    let model = single_poisson(3);
    let jp = build_jeffreys(&model).unwrap();
    let mut previous = f64::INFINITY;
    for tau in [1e2, 1e3, 1e4] {
        let fd = fisher_fd_oracle(&model, tau).unwrap();
        let approx = fisher_info_tau(&jp, 0, tau).unwrap();
        let gap = (fd / approx - 1.0).abs();
        assert!(gap < previous, "ratio gap did not shrink at τ = {tau}: {gap}");
        previous = gap;
    }
    assert!(previous < 1e-2);
}

#[test]
fn fd_information_vanishes_without_random_effect_loadings() {
    let model = validate(GlmmModel {
        family: Family::Poisson,
        link: Link::Log,
        y: vec![3, 1],
        m: None,
        x: int_rows(&[&[1], &[1]]),
        z: int_rows(&[&[0], &[0]]),
        blocks: vec![PriorBlock::new(1, rat(1), rat(1))],
    })
    .unwrap();
    let fd = fisher_fd_oracle(&model, 2.0).unwrap();
    assert!(fd.abs() < 1e-6, "{fd}");
    let jp = build_jeffreys(&model).unwrap();
    assert_eq!(fisher_info_tau(&jp, 0, 2.0).unwrap(), 0.0);
}

#[test]
fn truncated_values_are_nondecreasing_in_the_box() {
    let model = one_way_binomial();
    let cfg = CyConfig {
        rel_tol: 1e-2,
        ..CyConfig::default()
    };
    let est = truncated_cy(&model, &model.blocks()[0], &[2.0, 4.0, 8.0], &cfg).unwrap();
    assert!(est[0].ratio.is_none());
    for w in est.windows(2) {
        assert!(w[1].value >= w[0].value);
        assert_relative_eq!(w[1].ratio.unwrap(), w[1].value / w[0].value, max_relative = 1e-12);
    }
    assert!(est.iter().all(|e| e.value > 0.0 && e.rel_error_est >= 0.0));
}

#[test]
fn tau_integral_diverges_at_zero_for_the_boundary_power_prior() {
    // a = −q/2 with b = 0. The second level is saturated, so its u-integral
    // tends to a constant as τ → 0 instead of scaling like τ^{1/2}; the
    // integrand behaves like τ^{-3/2} and the value like lo^{-1/2}.
    let model = one_way_binomial_with(one_way_binomial_x(), Link::Logit, rat(-1), ratio(0, 1));
    let prior = &model.blocks()[0];
    let mut values = Vec::new();
    for lo in [1e-2, 1e-4, 1e-6] {
        let cfg = CyConfig {
            rel_tol: 1e-2,
            tau_window: Some((lo, 1.0)),
            ..CyConfig::default()
        };
        values.push(truncated_cy(&model, prior, &[3.0], &cfg).unwrap()[0].value);
    }
    let steps = [values[1] - values[0], values[2] - values[1]];
    assert!(steps[0] > 0.0, "{values:?}");
    let growth = steps[1] / steps[0];
    assert!((5.0..20.0).contains(&growth), "{values:?}");
}

#[test]
fn truncated_window_is_monotone() {
    let model = one_way_binomial();
    let prior = &model.blocks()[0];
    let narrow = CyConfig {
        rel_tol: 1e-2,
        tau_window: Some((0.5, 2.0)),
        ..CyConfig::default()
    };
    let wide = CyConfig {
        tau_window: Some((0.1, 10.0)),
        ..narrow
    };
    let a = truncated_cy(&model, prior, &[3.0], &narrow).unwrap()[0].value;
    let b = truncated_cy(&model, prior, &[3.0], &wide).unwrap()[0].value;
    assert!(b > a);
}

#[test]
fn out_of_scale_problems_are_refused() {
    let model = two_way_binomial();
    let err = truncated_cy(&model, &model.blocks()[0], &[1.0], &CyConfig::default()).unwrap_err();
    assert!(matches!(err, Error::ScaleLimit(_)));
    let model = one_way_binomial();
    let err = truncated_cy(&model, &model.blocks()[0], &[2.0, 1.0], &CyConfig::default()).unwrap_err();
    assert!(matches!(err, Error::InvalidArgument(_)));
}
