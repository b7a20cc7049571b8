use bloch_plasmon::drude::*;
use bloch_plasmon::geometry::make_ellipse;
use bloch_plasmon::potentials::SourceDipole;
use bloch_plasmon::quasi_green::{QuasiMomentum, SummationConfig};
use bloch_plasmon::resonance::{lambda_contrast, SolverOptions};
use bloch_plasmon::spectrum::static_spectrum;
use bloch_plasmon::Error;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn params() -> DrudeParams {
    DrudeParams::new(1.0, 0.5, 1.0, 1.0).unwrap()
}

#[test]
fn permeability_limits() {
    let p = params();
    let zero = DrudeParams { filling: 0.0, ..p };
    assert_eq!(drude_mu(&zero, 0.7), C64::new(1.0, 0.0));
    assert!((drude_mu(&p, 1e-8) - 1.0).norm() < 1e-15);
    assert!((drude_mu(&p, 1e8) - p.mu_infinity()).norm() < 1e-6);
    assert!(DrudeParams::new(1.0, 1.0, 1.0, 1.0).is_err());
    assert!(DrudeParams::new(1.0, 0.5, 0.0, 1.0).is_err());
    assert!(DrudeParams::new(1.0, 0.5, 1.0, -1.0).is_err());
}

#[test]
fn loss_and_delta_two_routes() {
    for (f, tau, w0, w) in [(0.5, 1.0, 1.0, 0.9), (0.2, 30.0, 2.0, 2.1), (0.9, 1e-2, 0.5, 3.0)] {
        let p = DrudeParams::new(1.3, f, tau, w0).unwrap();
        let mu = drude_mu(&p, w);
        assert!((mu.im - drude_loss(&p, w)).abs() < 1e-12 * mu.norm());
        let r = drude_response(&p, w);
        assert!((r.delta - drude_delta_closed_form(&p, w)).abs() < 1e-12 * r.delta.abs().max(1e-300));
        assert!(r.delta < 0.0);
        assert!((r.sigma - mu.inv().re).abs() < 1e-15 * r.sigma.abs().max(1.0));
    }
}

#[test]
fn negativity_condition_limits() {
    let p = params();
    assert!(!negativity_condition(&p, 1e-3));
    let sharp = DrudeParams::new(1.0, 0.95, 1e6, 1.0).unwrap();
    assert!(negativity_condition(&sharp, 1.01));
    assert!(drude_mu(&sharp, 1.01).re < 0.0);
}

#[test]
fn random_draws_are_lossy_and_consistent() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    for _ in 0..100 {
        let p = DrudeParams::new(
            rng.gen_range(0.5..2.0),
            rng.gen_range(0.01..0.99),
            10f64.powf(rng.gen_range(-2.0..3.0)),
            10f64.powf(rng.gen_range(-1.0..1.0)),
        )
        .unwrap();
        let w = p.omega0 * rng.gen_range(0.5..1.5);
        let r = drude_response(&p, w);
        assert!(r.mu.im > 0.0 && r.delta < 0.0);
        assert_eq!(negativity_condition(&p, w), r.mu.re < 0.0);
        assert!((drude_loss(&p, w) - r.mu.im).abs() < 1e-12 * r.mu.norm().max(1.0));
    }
}

#[test]
fn kramers_kronig_holds_up_to_band_truncation() {
    let p = params();
    let probe = 0.7123;
    let kk = kramers_kronig_residual(&p, probe, (1e-3, 50.0), 10_000).unwrap();
    assert!(kk.relative() < 0.05, "{kk:?}");
    let residuals: Vec<f64> = [10.0, 20.0, 30.0, 40.0, 50.0]
        .iter()
        .map(|&b| kramers_kronig_residual(&p, probe, (1e-3, b), 20_000).unwrap().residual)
        .collect();
    assert!(residuals.windows(2).all(|w| w[1] < w[0]), "{residuals:?}");
    // the opposite sign or a mu0 baseline does not match
    assert!((kk.reference + kk.hilbert).abs() > 10.0 * kk.residual);
    assert!((drude_mu(&p, probe).re - p.mu0 - kk.hilbert).abs() > 10.0 * kk.residual);
}

#[test]
fn hilbert_transform_edge_cases() {
    assert_eq!(odd_hilbert_transform(|_| 0.0, 0.5, (1e-3, 10.0), 1000).unwrap(), 0.0);
    // probe exactly on a node
    let (lo, hi, n) = (1.0, 11.0, 11);
    assert!(matches!(odd_hilbert_transform(|s| s, 4.0, (lo, hi), n), Err(Error::Parameter(_))));
    assert!(odd_hilbert_transform(|s| s, 20.0, (lo, hi), n).is_err());
}

fn quasi_static_base(omega: f64) -> DrudeParams {
    DrudeParams::new(1.0, 0.6, 1.0, omega * 0.5f64.sqrt()).unwrap()
}

fn wide() -> DesignOptions {
    DesignOptions { tau_bracket: (1e-2, 1e12), ..Default::default() }
}

#[test]
fn relaxation_rate_design_round_trip() {
    let omega = 1e-4;
    let base = quasi_static_base(omega);
    for tau0 in [2e5, 5e5, 2e6] {
        let target = drude_contrast_lambda(&base.with_tau(tau0), omega, 1.0).unwrap();
        assert!(target.abs() < 0.5);
        let d = design_relaxation_rate(target, 1.0, &base, omega, &wide()).unwrap();
        assert!((d.value - tau0).abs() < 1e-8 * tau0, "{tau0} -> {}", d.value);
        assert!(d.residual < 1e-10 && d.iterations <= 60);
        let again = design_relaxation_rate(target, 1.0, &base.with_tau(d.value), omega, &wide()).unwrap();
        assert!((again.value - d.value).abs() < 1e-10 * d.value);
    }
}

#[test]
fn filling_factor_design_round_trip() {
    let omega = 1e-4;
    let base = quasi_static_base(omega).with_tau(2e5);
    let target = drude_contrast_lambda(&base, omega, 1.0).unwrap();
    let d = design_filling_factor(target, 1.0, &base.with_filling(0.3), omega, &wide()).unwrap();
    assert!((d.value - 0.6).abs() < 1e-8, "{}", d.value);
}

#[test]
fn infeasible_design_reports_range() {
    let omega = 1e-4;
    let base = quasi_static_base(omega);
    match design_relaxation_rate(0.2, 1.0, &base, omega, &DesignOptions::default()) {
        Err(Error::Infeasible(msg)) => assert!(msg.contains("achieved lambda"), "{msg}"),
        other => panic!("{other:?}"),
    }
    assert!(design_relaxation_rate(0.5, 1.0, &base, omega, &wide()).is_err());
}

#[test]
fn design_target_rejects_untrusted_modes() {
    let curve = make_ellipse([0.5, 0.5], [0.3, 0.15], 64).unwrap();
    let sp = static_spectrum(QuasiMomentum::new(1.0, 2.0).unwrap(), &curve, &SummationConfig::default()).unwrap();
    let d = &sp.decomposition;
    assert!(design_target(d, d.phi0_index).is_err());
    assert!(design_target(d, d.trusted).is_err());
    assert_eq!(design_target(d, 1).unwrap(), d.eigenvalues[1]);
}

#[test]
fn loglog_slope_fit() {
    let x = [1.0, 10.0, 100.0];
    let y = [3.0, 0.3, 0.03];
    assert!((fit_loglog_slope(&x, &y).unwrap() + 1.0).abs() < 1e-12);
    assert!(fit_loglog_slope(&[1.0], &[1.0]).is_none());
}

fn setup(n: usize) -> BlowupSetup {
    let curve = make_ellipse([0.5, 0.5], [0.3, 0.15], n).unwrap();
    let alpha = QuasiMomentum::new(1.0, 2.0).unwrap();
    let cfg = SummationConfig::default();
    let sp = static_spectrum(alpha, &curve, &cfg).unwrap();
    BlowupSetup {
        alpha,
        lambda_j: design_target(&sp.decomposition, 1).unwrap(),
        curve,
        cfg,
        source: SourceDipole { moment: [1.0, 0.5], position: [0.1, 0.15] },
        eps_m: 1.0,
        mu_m: 1.0,
        eps_c: C64::new(-1.0, 0.1),
        omega: 1e-4,
        design: wide(),
        solver: SolverOptions::default(),
        grid_spacing: 0.01,
        max_discrepancy: 0.05,
    }
}

#[test]
fn single_point_sweep_has_no_fit() {
    let s = setup(64);
    let t = sweep_blowup(&s, &quasi_static_base(1e-4), SweepAxis::Tau, &[2e5]).unwrap();
    assert_eq!(t.rows.len(), 1);
    assert!(t.slope.is_none());
    assert!(t.rows[0].energy > 0.0, "{:?}", t.rows[0]);
    let lam = lambda_contrast(C64::new(1.0 / (t.rows[0].sigma * s.mu_m), 0.0)).unwrap().re;
    assert!((lam - s.lambda_j).abs() < 1e-9);
}

#[test]
fn infeasible_sweep_points_are_flagged() {
    let s = setup(64);
    let t = sweep_blowup(&s, &quasi_static_base(1e-4), SweepAxis::Filling, &[0.05, 0.1]).unwrap();
    assert!(t.rows.iter().all(|r| !r.included && r.note.is_some()));
    assert!(t.slope.is_none());
}

/// Base parameters whose designed resonance on `lambda_j` sits `eps` inside the
/// feasible filling-factor window, giving `|delta| ~ sqrt(eps / a^3)`.
fn sharp_base(lambda_j: f64, omega: f64, filling: f64, eps: f64) -> DrudeParams {
    let c = (2.0 * lambda_j + 1.0) / (2.0 * lambda_j - 1.0);
    let a = 1.0 / (1.0 - c);
    let q = filling * (1.0 - a + eps);
    DrudeParams::new(1.0, filling, 1.0, omega * (1.0 - q).sqrt()).unwrap()
}

#[test]
fn energy_grows_linearly_with_tau_along_the_resonance() {
    let s = setup(128);
    let base = sharp_base(s.lambda_j, s.omega, 0.6, 1e-5);
    let d = design_relaxation_rate(s.lambda_j, s.mu_m, &base, s.omega, &s.design).unwrap();
    let e = |tau: f64| drude_energy(&s, &d.params.with_tau(tau)).unwrap();
    let on = e(d.value);
    assert!(on.solution.in_regime && on.energy.discrepancy < 0.05, "{:?}", on.energy);
    assert!(on.response.delta.abs() < 0.05, "{}", on.response.delta);
    let (lossy, sharp) = (e(d.value / 10.0).energy.energy, e(d.value * 10.0).energy.energy);
    assert!(lossy < on.energy.energy && on.energy.energy < sharp);
    let slope = (sharp / lossy).log10() / 2.0;
    assert!((slope - 1.0).abs() < 0.15, "{lossy} {} {sharp}", on.energy.energy);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn loss_is_positive(f in 0.01f64..0.99, lt in -3.0f64..3.0, w0 in 0.1f64..10.0, r in 0.1f64..3.0) {
        let p = DrudeParams::new(1.0, f, 10f64.powf(lt), w0).unwrap();
        let w = w0 * r;
        let mu = drude_mu(&p, w);
        prop_assert!(mu.im > 0.0);
        prop_assert!((mu.im - drude_loss(&p, w)).abs() <= 1e-12 * mu.norm().max(1.0));
        prop_assert!(drude_response(&p, w).delta < 0.0);
    }
}
