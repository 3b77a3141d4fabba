//! The whole pipeline instantiates for f32 as well as f64; accuracy targets
//! are relaxed to single-precision scale.

use apfold_core::fiber::{FiberParams, FiberProblem};
use apfold_core::fold::{count_and_solve, FoldParams};
use apfold_core::grid::{Grid, GridFunction};
use apfold_core::nonlinearity::Nonlinearity;
use apfold_core::operator::{assemble, CoefficientField};
use apfold_core::spectral::{principal_eigenpair, EigParams};

#[test]
fn f32_pipeline_end_to_end() {
    let grid = Grid::<f32>::unit_interval(60).unwrap();
    let coeffs = CoefficientField::laplacian(&grid).unwrap();
    let op = assemble(grid.clone(), coeffs).unwrap();
    let eigen = principal_eigenpair(
        &op,
        EigParams {
            tol: 1e-4,
            max_iter: 10_000,
        },
    )
    .unwrap();
    let pi2 = std::f32::consts::PI.powi(2);
    assert!((eigen.lambda1 - pi2).abs() < 0.05, "λ₁ = {}", eigen.lambda1);

    let f = Nonlinearity::<f32>::ramp(12.0).unwrap();
    let prob = FiberProblem::new(
        &op,
        &eigen,
        &f,
        FiberParams {
            tol: 1e-4,
            ..Default::default()
        },
    )
    .unwrap();
    let params = FoldParams {
        scan_lo: -2.0,
        scan_hi: 2.0,
        golden_rel_tol: 1e-5,
        bisect_tol: 1e-5,
        tol_transition_rel: 2e-2,
        ..Default::default()
    };
    let mut g = eigen.phi1.clone();
    g.scale(-1.0);
    let set = count_and_solve(&prob, &g, None, &params).unwrap();
    assert_eq!(set.count, 2);
    assert!((set.t_values[0] + 1.0 / eigen.lambda1).abs() < 2e-3);
    assert!((set.t_values[1] - 1.0 / (12.0 - eigen.lambda1)).abs() < 2e-3);

    let zero = GridFunction::zeros(grid);
    let s1 = count_and_solve(&prob, &zero, None, &params).unwrap();
    assert_eq!(s1.count, 1);
}
