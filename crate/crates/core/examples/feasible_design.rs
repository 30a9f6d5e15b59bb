// A plant where every sufficient condition holds, so the design yields a
// certified trigger coefficient.
//
//     cargo run --example feasible_design

use robust_trigger::matrix::Matrix;
use robust_trigger::synthesis::{synthesize, SynthesisParams, UncertaintyModel};

fn main() {
    let a = Matrix::from_rows(&[[-0.2, 0.0], [0.4, 1.1]]).unwrap();
    let b = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
    let e = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
    let model = UncertaintyModel::new(vec![e], vec![0.0], vec![0.07], Matrix::identity(2)).unwrap();
    let params = SynthesisParams::new(
        Matrix::identity(2),
        Matrix::identity(1),
        Matrix::identity(2).scale(10.0),
        0.5,
        2.0,
        0.1,
        0.1,
    )
    .unwrap();

    let out = synthesize(&a, &b, &model, &params).expect("feasible instance");
    println!("converged in {} iterations, residual {:.2e}", out.iterations, out.residual);
    println!("K  = {:?}", out.k.to_rows());
    println!("Q1 = {:?}", out.q1.to_rows());
    println!("mu = {:.6}", out.mu);
    print!("{}", out.report);
}
