use ffnt_core::controller::{Controller, ControllerGains};
use ffnt_core::plant::{chain_example, Reference};
use ffnt_core::sim::{
    compare_variants, metrics, simulate, ClosedLoopSetup, RunConfig, Variant, SETTLE_THRESHOLD,
};
use ffnt_core::Error;

fn short(t_final: f64) -> RunConfig {
    RunConfig {
        t_final,
        ..RunConfig::default()
    }
}

#[test]
fn chain_regulates_without_estimator() {
    let mut sc = chain_example();
    sc.reference = Reference::constant(0.0);
    let c = Controller::new(&sc.model, ControllerGains::defaults(2), vec![None, None]).unwrap();
    let tr = simulate(&sc, &c, &short(10.0)).unwrap();
    assert!(tr.estimator_steps.is_empty());
    let last = tr.samples.last().unwrap();
    assert!((last.t - 10.0).abs() < 1e-9);
    assert!(last.xi[0].abs() < 1e-3, "{}", last.xi[0]);
    let m = metrics(&tr, (9.0, 10.0), SETTLE_THRESHOLD).unwrap();
    assert_eq!(m.rms_approx_error, 0.0);
    assert_eq!(m.switch_duty, 1.0);
}

#[test]
fn trace_layout_and_identities() {
    let setup = ClosedLoopSetup::pendulum();
    let tr = setup.run(Variant::Developed, &short(1.0)).unwrap();
    assert_eq!(tr.len(), 1001);
    assert_eq!(tr.estimator_steps, vec![2]);
    let first = &tr.samples[0];
    assert_eq!(first.eta, vec![0.5, 0.0]);
    assert_eq!(first.steps[0].w, 1.0);
    assert_eq!(first.steps[0].p_true, vec![1.0]);
    for s in &tr.samples {
        for i in 0..2 {
            assert_eq!(s.sigma[i], s.xi[i] - s.delta[i]);
        }
        assert_eq!(s.y_d, s.t.sin());
        assert_eq!(s.xi[0], s.eta[0] - s.y_d);
    }
}

#[test]
fn decimation_keeps_every_nth_sample() {
    let setup = ClosedLoopSetup::pendulum();
    let full = setup.run(Variant::Developed, &short(0.5)).unwrap();
    let cfg = RunConfig {
        decimation: 10,
        ..short(0.5)
    };
    let thin = setup.run(Variant::Developed, &cfg).unwrap();
    assert_eq!(thin.len(), 51);
    for (j, s) in thin.samples.iter().enumerate() {
        assert_eq!(s, &full.samples[10 * j]);
    }
}

#[test]
fn runs_are_bit_identical() {
    let setup = ClosedLoopSetup::pendulum();
    let a = setup.run(Variant::Developed, &short(2.0)).unwrap();
    let b = setup.run(Variant::Developed, &short(2.0)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn far_start_at_coarse_step_reports_divergence_with_prefix() {
    // the robust term grows like F̄² ~ η₂⁴ during the transient, which is
    // too stiff for explicit RK4 at 1 ms
    let mut setup = ClosedLoopSetup::pendulum();
    setup.scenario.initial_state = vec![3.0, 0.0];
    match setup.run(Variant::Developed, &short(1.0)) {
        Err(Error::Diverged {
            t,
            quantity,
            limit,
            trace,
        }) => {
            assert_eq!(limit, 1e6);
            assert!(t > 0.0 && t < 1.0);
            assert!(!quantity.is_empty());
            assert!(!trace.is_empty());
            assert_eq!(trace.samples[0].steps[0].w, 0.0);
            assert!(trace.samples.last().unwrap().t < t);
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn comparison_rows_follow_input_order() {
    let setup = ClosedLoopSetup::pendulum();
    let order = [Variant::FseRbfnnCfb, Variant::Developed];
    let rows = compare_variants(&setup, &order, &short(2.0), None).unwrap();
    assert_eq!(rows.iter().map(|r| r.variant).collect::<Vec<_>>(), order);
    let solo = setup.run(Variant::Developed, &short(2.0)).unwrap();
    let dev = rows[1].outcome.as_ref().unwrap();
    assert_eq!(dev.trace, solo);
    assert_eq!(
        dev.steady,
        metrics(&solo, (1.0, 2.0), SETTLE_THRESHOLD).unwrap()
    );
}

#[test]
fn failures_are_reported_per_row() {
    let mut setup = ClosedLoopSetup::pendulum();
    setup.scenario.initial_state = vec![3.0, 0.0];
    let rows = compare_variants(
        &setup,
        &[Variant::Developed, Variant::FseRbfnnCfb],
        &short(0.5),
        None,
    )
    .unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows
        .iter()
        .all(|r| matches!(r.outcome, Err(Error::Diverged { .. }))));
}

#[test]
fn invalid_developed_gains_rejected_for_all_variants() {
    let mut setup = ClosedLoopSetup::pendulum();
    setup.gains.steps[1].k = -1.0;
    for v in Variant::ALL {
        assert!(matches!(
            setup.controller(v),
            Err(Error::InvalidParameter { .. })
        ));
    }
}
