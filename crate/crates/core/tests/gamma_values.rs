//! The a priori parameter reproduces the values reported for the published
//! experiments, given `‖u†‖_∞` and `‖q†‖_{H¹}` from the reference solve.

use potinv::inversion::apriori_gamma;
use potinv::observation::GroundTruth;

fn check(dim: usize, gt: &GroundTruth, sigma: f64, n: usize, reported: f64) {
    let q_h1 = gt.q_h1_norm().unwrap();
    let gamma = apriori_gamma(dim, sigma * gt.sup_norm, n, q_h1);
    let rel = (gamma - reported).abs() / reported;
    println!("d={dim} σ={sigma} n={n}: γ = {gamma:.3e}, reported {reported:.2e}, deviation {rel:.1e}");
    // reported values carry three significant digits
    assert!(rel <= 5e-3, "γ = {gamma:e} vs {reported:e}");
}

#[test]
fn two_dimensional_examples() {
    let gt = GroundTruth::from_ids(2, "ex1_q", "const1", 200).unwrap();
    check(2, &gt, 0.05, 401 * 401, 3.43e-9);
    check(2, &gt, 0.05, 501 * 501, 2.46e-9);
    check(2, &gt, 0.01, 401 * 401, 3.07e-10);
    check(2, &gt, 0.01, 101 * 101, 2.43e-9);
    check(2, &gt, 0.02, 101 * 101, 6.88e-9);
    check(2, &gt, 0.02, 401 * 401, 8.70e-10);
}

#[test]
fn one_dimensional_examples() {
    let gt = GroundTruth::from_ids(1, "ex3ab_q", "const1", 4000).unwrap();
    check(1, &gt, 0.05, 640_000, 5.72e-10);
    check(1, &gt, 0.01, 640_000, 3.62e-11);
}
