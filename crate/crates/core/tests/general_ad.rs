use branchpde::general_ad::complete_exit;
use branchpde::rng::SampleStream;
use branchpde::{
    closed_phi, interior_weight_sample, sample_ad_weight, solve_bvp_1d, DiffusionSpec, EulerConfig,
    Field, LifetimeLaw, Moments, Rectangle, WeightTarget,
};
use rayon::prelude::*;

fn moments(v: impl Iterator<Item = f64>) -> Moments {
    v.fold(Moments::default(), |mut m, x| {
        m.push(x);
        m
    })
}

fn se(m: &Moments) -> f64 {
    m.std() / (m.n as f64).sqrt()
}

#[test]
fn discounted_derivative_is_a_martingale_up_to_zeta() {
    let (beta, r) = (1.0, 1.0);
    let phi_prime = |x: f64| closed_phi(x, beta, r, 0.0, 2.0).unwrap().1;
    let spec = DiffusionSpec::brownian(1).unwrap();
    let rect = Rectangle::cube(1, r).unwrap();
    let cfg = EulerConfig::new(1e-3, 1.0).unwrap();
    let x = 0.4;
    let m = moments(
        (0..20_000u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = SampleStream::new(3, i).root_rng();
                let p =
                    sample_ad_weight(&[x], &spec, &rect, WeightTarget::Boundary, &cfg, &mut rng)
                        .unwrap();
                assert!(!p.exited_before_clock);
                (-beta * p.zeta).exp() * phi_prime(p.x_zeta[0])
            })
            .collect::<Vec<_>>()
            .into_iter(),
    );
    let exact = phi_prime(x);
    assert!(
        (m.mean - exact).abs() < 4.0 * se(&m),
        "{} vs {exact} (se {})",
        m.mean,
        se(&m)
    );
}

#[test]
fn exit_completion_preserves_exit_law() {
    let (beta, r) = (0.7, 1.0);
    let spec = DiffusionSpec::brownian(1).unwrap();
    let rect = Rectangle::cube(1, r).unwrap();
    let cfg = EulerConfig::new(1e-3, 1.0).unwrap();
    let x = -0.3;
    let m = moments(
        (0..20_000u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = SampleStream::new(8, i).root_rng();
                let p =
                    sample_ad_weight(&[x], &spec, &rect, WeightTarget::Boundary, &cfg, &mut rng)
                        .unwrap();
                let (eta, pos) = complete_exit(&p, &spec, &rect, &cfg, &mut rng).unwrap();
                assert!(eta >= p.zeta);
                (-beta * eta).exp() * (1.0 + pos[0])
            })
            .collect::<Vec<_>>()
            .into_iter(),
    );
    let exact = closed_phi(x, beta, r, 0.0, 2.0).unwrap().0;
    assert!(
        (m.mean - exact).abs() < 4.0 * se(&m),
        "{} vs {exact}",
        m.mean
    );
}

#[test]
fn interior_weight_matches_bvp_oracle() {
    // u''/2 - beta u + 1_A = 0 on (-1, 1), u = 0 on the boundary, A = (0, 0.5)
    let beta = 1.0;
    let indicator = |x: f64| if (0.0..0.5).contains(&x) { 1.0 } else { 0.0 };
    let sol = solve_bvp_1d(|x, u| -beta * u + indicator(x), 0.0, 0.0, 1.0, 8000).unwrap();
    let x = -0.2;
    let e = 1e-3;
    let exact = sol.value_at(x);
    let exact_grad = (sol.value_at(x + e) - sol.value_at(x - e)) / (2.0 * e);

    let spec = DiffusionSpec::brownian(1).unwrap();
    let rect = Rectangle::cube(1, 1.0).unwrap();
    let cfg = EulerConfig::new(1e-3, 1.0).unwrap();
    let g = Field::custom("indicator", move |p: &[f64]| indicator(p[0]));
    let samples: Vec<(f64, f64)> = (0..40_000u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = SampleStream::new(21, i).root_rng();
            let (v, w) = interior_weight_sample(
                &[x],
                &spec,
                &rect,
                beta,
                &g,
                LifetimeLaw::Exponential(beta),
                &cfg,
                &mut rng,
            )
            .unwrap();
            (v, w[0])
        })
        .collect();
    let mv = moments(samples.iter().map(|s| s.0));
    let mg = moments(samples.iter().map(|s| s.1));
    assert!(
        (mv.mean - exact).abs() < 4.0 * se(&mv),
        "value {} vs {exact}",
        mv.mean
    );
    let tol = (4.0 * se(&mg)).max(0.05 * exact_grad.abs());
    assert!(
        (mg.mean - exact_grad).abs() < tol,
        "gradient {} vs {exact_grad} (se {})",
        mg.mean,
        se(&mg)
    );
}
