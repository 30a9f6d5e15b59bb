// Gains for the two-state benchmark plant with a rank-one uncertain drift,
// and why the trigger coefficient cannot be certified there.
//
//     cargo run --example benchmark_instance

use robust_trigger::config::preset;
use robust_trigger::matrix::sym_eigvals;
use robust_trigger::synthesis::{synthesize, Condition};

fn main() {
    let exp = preset("paper").expect("built-in preset").validate().expect("preset validates");
    let err = match synthesize(exp.a(), exp.b(), exp.model(), &exp.params) {
        Ok(out) => {
            println!("unexpected success, mu = {:.6}", out.mu);
            return;
        }
        Err(e) => e,
    };
    println!("synthesis stopped: {err}");

    let d = err.diagnosis().expect("margin failures carry a diagnosis");
    println!("K = {:?}", d.design.k.to_rows());
    println!("L = {:?}", d.design.l.to_rows());
    let eig = sym_eigvals(&d.design.p).expect("P is symmetric");
    println!("eig(P) = [{:.4}, {:.4}], 1/eps = {}", eig[0], eig[1], 1.0 / exp.params.epsilon());

    print!("{}", d.report);
    let margin = d.report.get(Condition::EpsilonMargin).expect("always audited");
    println!("epsilon margin: {:?} ({:?})", margin.verdict, margin.margin);
}
