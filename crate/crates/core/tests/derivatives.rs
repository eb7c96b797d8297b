mod common;

use nalgebra::DMatrix;
use sttv::likelihood::{evaluate, CoefficientBlock, Effect, LikelihoodWorkspace, Order};
use sttv::rng::CounterRng;
use sttv::splines::make_basis;

#[test]
fn gradient_and_hessian_match_central_differences() {
    let (g, h) = common::derivative_errors(20);
    assert!(g < 1e-5, "gradient relative error {g:e}");
    assert!(h < 1e-4, "Hessian relative error {h:e}");
}

#[test]
fn hessian_is_symmetric() {
    let ds = common::random_dataset(3, 25, 3);
    let basis = make_basis(2, 3, 3.0).unwrap();
    let ws = LikelihoodWorkspace::new(&ds, &basis, 0.01).unwrap();
    let mut rng = CounterRng::new(1, 2);
    let cb = CoefficientBlock::new(
        DMatrix::from_fn(3, basis.q(), |_, _| rng.standard_normal()),
        Effect::Thresholded { alphas: vec![0.3, 0.5, 0.7], eta: 0.01 },
    )
    .unwrap();
    let h = evaluate(&cb, &ws, Order::Hessian).unwrap().hessian.unwrap();
    assert!((&h - h.transpose()).amax() <= 1e-12 * h.amax());
}
