// Full audit of a feasible design: lemma checks, dissipation along a
// simulated trace, and seeded random campaigns.
//
//     cargo run --example audit

use robust_trigger::config::preset;
use robust_trigger::sim::{simulate, LoopSetup};
use robust_trigger::synthesis::synthesize;
use robust_trigger::verify::{audit, AuditInstance};

fn main() {
    let exp = preset("feasible").unwrap().validate().unwrap();
    let out = synthesize(exp.a(), exp.b(), exp.model(), &exp.params).unwrap();
    let setup = LoopSetup::new(&exp.plant, &out.k).with_lyapunov(&out.p);
    let policy = exp.trigger_policy(Some(out.mu)).unwrap();
    let trace = simulate(&setup, &policy, &exp.trajectory, &exp.x0, exp.steps).unwrap();

    let inst = AuditInstance {
        a: exp.a(),
        b: exp.b(),
        model: exp.model(),
        params: &exp.params,
        design: &out,
    };
    let report = audit(&inst, Some(&trace), 101, 500, 42).unwrap();
    for c in &report.checks {
        println!("{:<24} {:<5} margin {:.3e}", c.name, c.holds, c.margin);
    }
    if let Some(d) = &report.dissipation {
        for c in d.checks() {
            println!("{:<24} {:<5} margin {:.3e}", c.name, c.holds, c.margin);
        }
    }
    for c in &report.campaigns {
        println!("{:<24} {} failures in {} samples", c.name, c.failures, c.samples);
    }
    println!("overall: {}", if report.holds() { "holds" } else { "fails" });
}
