use robust_trigger::config::{preset, Experiment};
use robust_trigger::matrix::{norm2, norm2_sq, Matrix};
use robust_trigger::sim::{compare_policies, simulate, LoopSetup, ParamTrajectory, Plant, SimTrace, TriggerPolicy};
use robust_trigger::synthesis::{design_gains, RiccatiOptions, UncertaintyModel};

fn benchmark() -> (Experiment, Matrix, Matrix) {
    let exp = preset("paper").unwrap().validate().unwrap();
    let d = design_gains(exp.a(), exp.b(), &exp.params, exp.model().bound(), &RiccatiOptions::default()).unwrap();
    (exp, d.k, d.p)
}

fn event_trace(traj: ParamTrajectory, mu: f64, x0: &[f64]) -> SimTrace {
    let (exp, k, p) = benchmark();
    let setup = LoopSetup::new(&exp.plant, &k).with_lyapunov(&p);
    simulate(&setup, &TriggerPolicy::event(mu).unwrap(), &traj, x0, 20).unwrap()
}

fn assert_zoh_and_soundness(trace: &SimTrace, k: &Matrix, mu: f64) {
    let mut held = None;
    for s in &trace.steps {
        if s.triggered {
            held = Some(s.x.clone());
            assert!(s.error.iter().all(|v| *v == 0.0));
        } else {
            assert!(s.monitored_error_sq < mu * norm2_sq(&s.x), "k = {}", s.k);
        }
        let h = held.as_ref().expect("k = 0 transmits");
        assert_eq!(s.u, k.mul_vec(h), "ZOH broken at k = {}", s.k);
    }
}

#[test]
fn benchmark_event_run_is_sparse_and_converges() {
    let (_, k, _) = benchmark();
    let trace = event_trace(ParamTrajectory::Constant { value: vec![0.8] }, 0.29, &[1.0, -1.0]);
    assert_eq!(trace.steps.len(), 21);
    assert!(trace.transmissions < 20);
    assert!(norm2(trace.final_state()) <= 0.05 * 2f64.sqrt());
    assert!(trace.steps[0].triggered);
    assert_zoh_and_soundness(&trace, &k, 0.29);
}

#[test]
fn invariants_hold_across_trajectories() {
    let (_, k, _) = benchmark();
    let trajs = [
        ParamTrajectory::Ramp { from: vec![0.0], to: vec![0.8] },
        ParamTrajectory::UniformRandom { seed: 11 },
        ParamTrajectory::Sequence { values: vec![vec![0.1], vec![0.6], vec![0.3]] },
    ];
    for traj in trajs {
        for mu in [0.05, 0.29, 0.6] {
            let trace = event_trace(traj.clone(), mu, &[0.3, 2.0]);
            assert_zoh_and_soundness(&trace, &k, mu);
            let ks: Vec<usize> = trace.steps.iter().map(|s| s.k).collect();
            assert_eq!(ks, (0..=20).collect::<Vec<_>>());
        }
    }
}

#[test]
fn runs_are_bit_identical() {
    let a = event_trace(ParamTrajectory::UniformRandom { seed: 4 }, 0.29, &[1.0, -1.0]);
    let b = event_trace(ParamTrajectory::UniformRandom { seed: 4 }, 0.29, &[1.0, -1.0]);
    assert_eq!(a, b);
    let c = event_trace(ParamTrajectory::UniformRandom { seed: 5 }, 0.29, &[1.0, -1.0]);
    assert_ne!(a.steps[3].p, c.steps[3].p);
}

#[test]
fn periodic_policy_transmits_every_step() {
    let (exp, k, p) = benchmark();
    let setup = LoopSetup::new(&exp.plant, &k).with_lyapunov(&p);
    let traj = ParamTrajectory::Constant { value: vec![0.5] };
    let trace = simulate(&setup, &TriggerPolicy::Periodic, &traj, &[1.0, -1.0], 20).unwrap();
    assert!(trace.steps.iter().all(|s| s.triggered));
    assert_eq!(trace.transmissions, 21);
    assert!(trace.inter_event_gaps.iter().all(|g| *g == 1));
    // inside the bound region the Lyapunov function decreases monotonically
    let v: Vec<f64> = trace.steps.iter().map(|s| s.v.unwrap()).collect();
    assert!(v.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn comparison_reports_savings() {
    let (exp, k, p) = benchmark();
    let setup = LoopSetup::new(&exp.plant, &k).with_lyapunov(&p);
    let traj = ParamTrajectory::Constant { value: vec![0.8] };
    let cmp = compare_policies(&setup, 0.29, &traj, &[1.0, -1.0], 20).unwrap();
    assert_eq!(cmp.periodic.transmissions, 21);
    assert!(cmp.event.transmissions < 20);
    let expected = 1.0 - cmp.event.transmissions as f64 / 21.0;
    assert_eq!(cmp.savings_ratio, expected);
    assert!(cmp.savings_ratio > 0.0);
    assert!(cmp.event.final_norm <= 0.05 * 2f64.sqrt());
    assert!(cmp.periodic.final_norm <= 0.05 * 2f64.sqrt());
    assert!(cmp.event.max_gap.unwrap() > 1);

    let tiny = compare_policies(&setup, 1e-12, &traj, &[1.0, -1.0], 20).unwrap();
    assert_eq!(tiny.savings_ratio, 0.0);
    for (e, p) in tiny.event_trace.steps.iter().zip(&tiny.periodic_trace.steps) {
        assert_eq!((&e.x, &e.u, e.triggered), (&p.x, &p.u, p.triggered));
    }
}

#[test]
fn zero_state_stays_put() {
    let (_, k, _) = benchmark();
    let trace = event_trace(ParamTrajectory::Constant { value: vec![0.4] }, 0.29, &[0.0, 0.0]);
    assert!(trace.steps.iter().all(|s| s.x == vec![0.0, 0.0] && s.u == vec![0.0]));
    assert_zoh_and_soundness(&trace, &k, 0.29);
}

#[test]
fn clamped_parameters_are_recorded() {
    let trace = event_trace(ParamTrajectory::Ramp { from: vec![0.0], to: vec![1.6] }, 0.29, &[1.0, -1.0]);
    assert_eq!(trace.clamped_steps, (11..=20).collect::<Vec<_>>());
    assert!(trace.steps.iter().all(|s| s.p[0] <= 0.8));
}

#[test]
fn sign_flipped_gain_diverges() {
    let plant = Plant::new(
        Matrix::from_rows(&[[1.5]]).unwrap(),
        Matrix::identity(1),
        UncertaintyModel::certain(Matrix::zeros(1, 1)).unwrap(),
    )
    .unwrap();
    let k = Matrix::from_rows(&[[1.0]]).unwrap();
    let setup = LoopSetup::new(&plant, &k);
    let traj = ParamTrajectory::Constant { value: vec![] };
    let trace = simulate(&setup, &TriggerPolicy::Periodic, &traj, &[1.0], 200).unwrap();
    assert!(trace.diverged);
    assert!(trace.steps.len() < 201);
}
