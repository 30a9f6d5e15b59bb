use robust_trigger::config::preset;
use robust_trigger::matrix::{sym_eigvals, Matrix};
use robust_trigger::synthesis::{
    compute_z, design_gains, epsilon_sweep, log_grid, riccati_residual, synthesize, synthesize_matched, Condition,
    DesignKind, MatchedModel, RiccatiOptions, SynthesisError, SynthesisOptions, SynthesisParams, UncertaintyModel,
    Verdict,
};

fn s(v: f64) -> Matrix {
    Matrix::from_rows(&[[v]]).unwrap()
}

fn scalar_params(beta: f64, epsilon: f64) -> SynthesisParams {
    SynthesisParams::new(s(1.0), s(1.0), s(1.0), 0.0, beta, epsilon, 0.1).unwrap()
}

fn certain(f: Matrix) -> UncertaintyModel {
    UncertaintyModel::certain(f).unwrap()
}

#[test]
fn scalar_chain_matches_hand_oracle() {
    // x+ = x + u, beta = 1: P = 1 + sqrt(3) solves P = P/(1 + P) + 2.
    let p = 1.0 + 3f64.sqrt();
    let k = -p / (1.0 + p);
    let ac = 1.0 + k;
    let eps = 0.2;
    let z = 1.0 / eps + p * p / (1.0 / eps - p);
    let q1 = 1.0 + k * k - ac * ac * z;
    let mu = 0.1 * q1 / (k * k * z);

    let out = synthesize(&s(1.0), &s(1.0), &certain(s(0.0)), &scalar_params(1.0, eps)).unwrap();
    assert_eq!(out.kind, DesignKind::Mismatched);
    assert!((out.p[(0, 0)] - p).abs() < 1e-10);
    assert!((out.k[(0, 0)] - k).abs() < 1e-10);
    assert!((out.z[(0, 0)] - z).abs() < 1e-9);
    assert!((out.q1[(0, 0)] - q1).abs() < 1e-9);
    assert!((out.mu - mu).abs() < 1e-10);
    assert!(out.report.all_hold());
}

#[test]
fn golden_ratio_chain_stops_at_indefinite_weight() {
    let p = (1.0 + 5f64.sqrt()) / 2.0;
    let k = -p / (1.0 + p);
    let ac = 1.0 + k;
    let z = 10.0 + p * p / (10.0 - p);
    let q1 = k * k - ac * ac * z;
    assert!((z - 10.312341).abs() < 1e-6);
    assert!(q1 < -1.12);

    let err = synthesize(&s(1.0), &s(1.0), &certain(s(0.0)), &scalar_params(0.0, 0.1)).unwrap_err();
    let SynthesisError::TriggerWeightIndefinite { lambda_min, .. } = &err else {
        panic!("unexpected error {err}");
    };
    assert!((lambda_min - q1).abs() < 1e-9);
    let d = err.diagnosis().unwrap();
    assert!((d.design.p[(0, 0)] - p).abs() < 1e-10);
    assert!((d.z.as_ref().unwrap()[(0, 0)] - z).abs() < 1e-9);
    assert_eq!(d.report.get(Condition::Q1NonNegative).unwrap().verdict, Verdict::Fails);
}

#[test]
fn zero_drift_gives_state_cost_and_zero_gain() {
    let q = Matrix::diag(&[1.0, 2.0]);
    let f = Matrix::diag(&[0.5, 0.5]);
    let params = SynthesisParams::new(q.clone(), s(1.0), Matrix::identity(2), 1.0, 0.5, 0.01, 0.1).unwrap();
    let b = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
    let d = design_gains(&Matrix::zeros(2, 2), &b, &params, &f, &RiccatiOptions::default()).unwrap();
    assert_eq!(d.p, Matrix::diag(&[1.75, 2.75]));
    assert!(d.k.is_zero());
    assert!(d.l.is_zero());

    let err = synthesize(&Matrix::zeros(2, 2), &b, &certain(f), &params).unwrap_err();
    assert!(matches!(err, SynthesisError::ZeroTriggerGain { .. }));
    assert!(err.diagnosis().unwrap().design.k.is_zero());
}

#[test]
fn benchmark_instance_gains_and_margin_violation() {
    let exp = preset("paper").unwrap().validate().unwrap();
    let err = synthesize(exp.a(), exp.b(), exp.model(), &exp.params).unwrap_err();
    assert!(err.to_string().contains("epsilon_margin"), "{err}");
    let d = err.diagnosis().unwrap();
    let k = &d.design.k;
    assert!((k[(0, 0)] + 0.9687).abs() < 1e-3 && (k[(0, 1)] + 0.0001).abs() < 1e-3);
    let l = &d.design.l;
    assert!((l[(0, 0)] + 0.0006).abs() < 1e-3 && (l[(0, 1)] + 0.1).abs() < 1e-3);
    assert!(l.row(1).iter().all(|v| v.abs() < 1e-12));
    let eig = sym_eigvals(&d.design.p).unwrap();
    assert!((eig[0] - 26.47).abs() < 0.01 && (eig[1] - 38.69).abs() < 0.01);
    assert!(riccati_residual(exp.a(), exp.b(), &exp.params, exp.model().bound(), &d.design.p).unwrap() < 1e-9);
    assert!(matches!(compute_z(&d.design.p, 0.1), Err(SynthesisError::EpsilonMargin { .. })));
}

#[test]
fn epsilon_one_on_benchmark_plant_names_the_margin() {
    let exp = preset("paper").unwrap().validate().unwrap();
    let params = exp.params.with_epsilon(1.0).unwrap();
    let err = synthesize(exp.a(), exp.b(), exp.model(), &params).unwrap_err();
    assert!(matches!(err, SynthesisError::EpsilonMargin { .. }));
    assert!(err.to_string().contains("condition epsilon_margin"));
}

#[test]
fn no_epsilon_rescues_the_benchmark_instance() {
    let exp = preset("paper").unwrap().validate().unwrap();
    let sweep = epsilon_sweep(
        exp.a(),
        exp.b(),
        exp.model(),
        &exp.params,
        &log_grid(1e-3, 1.0, 25),
        &SynthesisOptions::default(),
    )
    .unwrap();
    assert!(sweep.iter().all(|p| !p.feasible));
    // small eps fixes the margin but breaks the uncertainty bound
    let small = &sweep[0];
    assert!(small.failing.contains(&Condition::UncertaintyBound));
    assert!(!small.failing.contains(&Condition::EpsilonMargin));
}

#[test]
fn feasible_preset_passes_every_condition() {
    let exp = preset("feasible").unwrap().validate().unwrap();
    let out = synthesize(exp.a(), exp.b(), exp.model(), &exp.params).unwrap();
    assert!(out.report.all_hold(), "{}", out.report);
    assert!(out.mu > 0.0);
    let closed = sym_eigvals(&(&out.ac.transpose() * &out.ac)).unwrap();
    assert!(closed.iter().all(|v| *v < 1.0));
}

#[test]
fn matched_design_with_alpha_zero_agrees_with_mismatched() {
    let a = Matrix::from_rows(&[[1.1, 0.3], [0.0, 0.9]]).unwrap();
    let b = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
    let e = Matrix::from_rows(&[[0.0, 0.0], [0.2, 0.1]]).unwrap();
    let f = Matrix::identity(2).scale(0.5);
    let model = UncertaintyModel::new(vec![e], vec![0.0], vec![0.1], f).unwrap();
    let matched = MatchedModel::from_uncertainty(&model, &b).unwrap();
    let params = SynthesisParams::new(Matrix::identity(2), s(1.0), Matrix::identity(2), 0.0, 1.0, 0.02, 0.1).unwrap();
    let m = synthesize_matched(&a, &b, &matched, &params).unwrap();
    let g = design_gains(&a, &b, &params, model.bound(), &RiccatiOptions::default()).unwrap();
    assert!((&m.p - &g.p).max_abs() < 1e-10);
    assert!((&m.k - &g.k).max_abs() < 1e-10);
    assert_eq!(m.kind, DesignKind::Matched);
}

#[test]
fn mismatched_basis_is_rejected_for_matched_design() {
    let b = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
    let e = Matrix::from_rows(&[[1.0, 1.0], [0.0, 0.0]]).unwrap();
    let model = UncertaintyModel::new(vec![e], vec![0.0], vec![0.8], Matrix::identity(2)).unwrap();
    assert!(matches!(
        MatchedModel::from_uncertainty(&model, &b),
        Err(SynthesisError::NotMatched { index: 0, .. })
    ));
}
