// Sweeps the scaling epsilon and reports which conditions fail at each value.
//
//     cargo run --example epsilon_sweep

use robust_trigger::config::preset;
use robust_trigger::synthesis::{epsilon_sweep, log_grid, SynthesisOptions};

fn main() {
    for name in ["paper", "feasible"] {
        let exp = preset(name).unwrap().validate().unwrap();
        let probes = epsilon_sweep(
            exp.a(),
            exp.b(),
            exp.model(),
            &exp.params,
            &log_grid(1e-3, 1.0, 13),
            &SynthesisOptions::default(),
        )
        .unwrap();
        println!("{name}:");
        for p in probes {
            let failing: Vec<&str> = p.failing.iter().map(|c| c.id()).collect();
            let mu = p.mu.map_or("-".to_string(), |m| format!("{m:.4e}"));
            println!("  eps {:<9.3e} feasible {:<5} mu {mu:<10} failing {failing:?}", p.epsilon, p.feasible);
        }
    }
}
