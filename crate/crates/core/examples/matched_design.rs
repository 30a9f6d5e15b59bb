// Uncertainty entering through the input channel. The matched design drops
// the virtual input, so alpha has no effect on it; the general design on the
// same plant is shown alongside.
//
//     cargo run --example matched_design

use robust_trigger::matrix::Matrix;
use robust_trigger::synthesis::{synthesize, synthesize_matched, MatchedModel, SynthesisParams, UncertaintyModel};

fn main() {
    let a = Matrix::from_rows(&[[1.1, 0.3], [0.0, 0.9]]).unwrap();
    let b = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
    let e = Matrix::from_rows(&[[0.0, 0.0], [0.2, 0.1]]).unwrap();
    let model = UncertaintyModel::new(vec![e], vec![0.0], vec![0.1], Matrix::identity(2).scale(0.5)).unwrap();
    let matched = MatchedModel::from_uncertainty(&model, &b).expect("basis lies in range(B)");

    for alpha in [0.0, 0.5] {
        let params = SynthesisParams::new(
            Matrix::identity(2),
            Matrix::identity(1),
            Matrix::identity(2),
            alpha,
            1.0,
            0.02,
            0.1,
        )
        .unwrap();
        match synthesize_matched(&a, &b, &matched, &params) {
            Ok(out) => println!("matched    alpha={alpha}: K = {:?}, mu = {:.6}", out.k.to_rows(), out.mu),
            Err(e) => println!("matched    alpha={alpha}: {e}"),
        }
        match synthesize(&a, &b, &model, &params) {
            Ok(out) => println!("mismatched alpha={alpha}: K = {:?}, mu = {:.6}", out.k.to_rows(), out.mu),
            Err(e) => println!("mismatched alpha={alpha}: {e}"),
        }
    }
}
