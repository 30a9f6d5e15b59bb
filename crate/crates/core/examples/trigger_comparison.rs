// Periodic versus event-triggered transmission on the benchmark plant.
//
//     cargo run --example trigger_comparison

use robust_trigger::config::preset;
use robust_trigger::sim::{compare_policies, LoopSetup, ParamTrajectory};
use robust_trigger::synthesis::{design_gains, RiccatiOptions};

fn main() {
    let exp = preset("paper").unwrap().validate().unwrap();
    let design = design_gains(exp.a(), exp.b(), &exp.params, exp.model().bound(), &RiccatiOptions::default()).unwrap();
    let setup = LoopSetup::new(&exp.plant, &design.k).with_lyapunov(&design.p);

    for traj in [
        ParamTrajectory::Constant { value: vec![0.8] },
        ParamTrajectory::Ramp { from: vec![0.0], to: vec![0.8] },
        ParamTrajectory::UniformRandom { seed: 7 },
    ] {
        let cmp = compare_policies(&setup, 0.29, &traj, &[1.0, -1.0], 20).unwrap();
        println!(
            "{traj:?}: periodic {} / event {} transmissions, savings {:.3}, final |x| {:.3e}",
            cmp.periodic.transmissions, cmp.event.transmissions, cmp.savings_ratio, cmp.event.final_norm
        );
    }

    let cmp = compare_policies(&setup, 0.29, &ParamTrajectory::Constant { value: vec![0.8] }, &[1.0, -1.0], 20).unwrap();
    let mut csv = Vec::new();
    cmp.event_trace.write_csv(&mut csv).unwrap();
    print!("{}", String::from_utf8(csv).unwrap());
}
