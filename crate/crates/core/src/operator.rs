//! Assembly of the non-divergence-form operator Lu = tr(A D²u) + b·∇u + cu
//! as a sparse matrix over interior nodes, with a maximum-principle-compatible
//! stencil, plus its adjoint (the transpose).

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::linalg::SparseMatrix;
use crate::scalar::Real;

/// Per-node samples of the coefficients A (symmetric), b and c, together with
/// the ellipticity bounds spec(A) ⊂ [lambda_ell, Lambda_ell], |b|,|c| ≤ Lambda_ell.
#[derive(Debug, Clone)]
pub struct CoefficientField<T> {
    /// [a11, a12, a22] per node; 1D stores [a11, 0, 0].
    pub a: Vec<[T; 3]>,
    /// [b1, b2] per node; 1D stores [b1, 0].
    pub b: Vec<[T; 2]>,
    pub c: Vec<T>,
    pub lambda_ell: T,
    pub lambda_ell_upper: T,
}

impl<T: Real> CoefficientField<T> {
    /// Build from per-node samples, validating the ellipticity bounds. When
    /// `bounds` is `None` the tightest valid pair is derived from the samples.
    pub fn new(
        grid: &Grid<T>,
        a: Vec<[T; 3]>,
        b: Vec<[T; 2]>,
        c: Vec<T>,
        bounds: Option<(T, T)>,
    ) -> Result<Self> {
        let m = grid.interior_len();
        if a.len() != m || b.len() != m || c.len() != m {
            return Err(Error::GridMismatch(
                "coefficient sample count differs from interior node count",
            ));
        }
        let mut eig_lo = T::infinity();
        let mut eig_hi = T::neg_infinity();
        let mut other_hi = T::zero();
        for i in 0..m {
            let [a11, a12, a22] = a[i];
            let (lo, hi) = if grid.dim() == 1 {
                (a11, a11)
            } else {
                let mean = (a11 + a22) / T::c(2.0);
                let rad = (((a11 - a22) / T::c(2.0)).powi(2) + a12 * a12).sqrt();
                (mean - rad, mean + rad)
            };
            if !(lo > T::zero()) {
                return Err(Error::Validation(format!(
                    "A not uniformly elliptic at node {i}: min eigenvalue {}",
                    lo
                )));
            }
            eig_lo = eig_lo.min(lo);
            eig_hi = eig_hi.max(hi);
            let bn = (b[i][0] * b[i][0] + b[i][1] * b[i][1]).sqrt();
            other_hi = other_hi.max(bn).max(c[i].abs());
        }
        let (lambda_ell, lambda_ell_upper) = match bounds {
            Some((lo, hi)) => {
                if !(lo > T::zero() && lo <= hi) {
                    return Err(Error::Validation(format!(
                        "ellipticity bounds must satisfy 0 < lambda_ell <= Lambda_ell, got ({lo}, {hi})"
                    )));
                }
                if eig_lo < lo || eig_hi > hi || other_hi > hi {
                    return Err(Error::Validation(format!(
                        "sampled coefficients violate the declared bounds [{lo}, {hi}]: \
                         spec(A) in [{eig_lo}, {eig_hi}], max(|b|,|c|) = {other_hi}"
                    )));
                }
                (lo, hi)
            }
            None => (eig_lo, eig_hi.max(other_hi)),
        };
        Ok(CoefficientField {
            a,
            b,
            c,
            lambda_ell,
            lambda_ell_upper,
        })
    }

    /// Constant coefficients on every node.
    pub fn constant(grid: &Grid<T>, a: [T; 3], b: [T; 2], c: T) -> Result<Self> {
        let m = grid.interior_len();
        Self::new(grid, vec![a; m], vec![b; m], vec![c; m], None)
    }

    /// The unit Laplacian: A = I, b = 0, c = 0.
    pub fn laplacian(grid: &Grid<T>) -> Result<Self> {
        Self::constant(grid, [T::one(), T::zero(), T::one()], [T::zero(); 2], T::zero())
    }
}

/// Sparse discretization of L over the interior nodes, Dirichlet rows eliminated.
#[derive(Debug, Clone)]
pub struct DiscreteOperator<T> {
    grid: Arc<Grid<T>>,
    coeffs: CoefficientField<T>,
    matrix: SparseMatrix<T>,
    /// All off-diagonal entries of the drift+diffusion part are ≥ 0
    /// (discrete maximum principle for −L when c ≤ 0).
    pub monotone: bool,
    /// Nodes where the mesh Péclet condition failed and one-sided upwinding
    /// replaced the centered drift stencil.
    pub upwind_nodes: Vec<usize>,
}

impl<T: Real> DiscreteOperator<T> {
    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn coeffs(&self) -> &CoefficientField<T> {
        &self.coeffs
    }

    pub fn matrix(&self) -> &SparseMatrix<T> {
        &self.matrix
    }
}

/// Assemble L on the grid: centered second differences, a tilted 9-point
/// stencil for cross terms (requires |a12| ≤ min(a11, a22)), centered first
/// differences for the drift with automatic per-node upwinding when
/// |b_k| h_k / (2 a_kk) > 1.
pub fn assemble<T: Real>(grid: Arc<Grid<T>>, coeffs: CoefficientField<T>) -> Result<DiscreteOperator<T>> {
    let m = grid.interior_len();
    if coeffs.c.len() != m {
        return Err(Error::GridMismatch(
            "coefficient field sampled on a different grid",
        ));
    }
    let dim = grid.dim();
    let two = T::c(2.0);
    let mut matrix = SparseMatrix::zeros(m);
    let mut upwind_nodes = Vec::new();

    for idx in 0..m {
        let [a11, a12, a22] = coeffs.a[idx];
        if dim == 2 && a12 != T::zero() && a12.abs() > a11.min(a22) {
            return Err(Error::Assembly {
                node: idx,
                reason: format!(
                    "cross-term dominance violated: |a12| = {} > min(a11, a22) = {}",
                    a12.abs(),
                    a11.min(a22)
                ),
            });
        }

        let add = |mat: &mut SparseMatrix<T>, col: Option<usize>, v: T| {
            if let Some(j) = col {
                mat.add_entry(idx, j, v);
            }
            // Dirichlet neighbors contribute value 0 and drop out.
        };

        // Pure second derivatives.
        let diag_a = [a11, a22];
        for axis in 0..dim {
            let h = grid.h[axis];
            let s = diag_a[axis] / (h * h);
            add(&mut matrix, Some(idx), -two * s);
            add(&mut matrix, grid.neighbor(idx, axis, 1), s);
            add(&mut matrix, grid.neighbor(idx, axis, -1), s);
        }

        // Tilted cross-term stencil: 2·a12·∂x∂y.
        if dim == 2 && a12 != T::zero() {
            let gamma = a12.abs() / (grid.h[0] * grid.h[1]);
            add(&mut matrix, Some(idx), two * gamma);
            add(&mut matrix, grid.neighbor(idx, 0, 1), -gamma);
            add(&mut matrix, grid.neighbor(idx, 0, -1), -gamma);
            add(&mut matrix, grid.neighbor(idx, 1, 1), -gamma);
            add(&mut matrix, grid.neighbor(idx, 1, -1), -gamma);
            if a12 > T::zero() {
                add(&mut matrix, grid.neighbor2(idx, 1, 1), gamma);
                add(&mut matrix, grid.neighbor2(idx, -1, -1), gamma);
            } else {
                add(&mut matrix, grid.neighbor2(idx, -1, 1), gamma);
                add(&mut matrix, grid.neighbor2(idx, 1, -1), gamma);
            }
        }

        // Drift: centered unless the mesh Péclet condition fails.
        let mut upwound = false;
        for axis in 0..dim {
            let bk = coeffs.b[idx][axis];
            if bk == T::zero() {
                continue;
            }
            let h = grid.h[axis];
            let peclet = bk.abs() * h / (two * diag_a[axis]);
            if peclet <= T::one() {
                add(&mut matrix, grid.neighbor(idx, axis, 1), bk / (two * h));
                add(&mut matrix, grid.neighbor(idx, axis, -1), -bk / (two * h));
            } else {
                upwound = true;
                if bk > T::zero() {
                    add(&mut matrix, grid.neighbor(idx, axis, 1), bk / h);
                    add(&mut matrix, Some(idx), -bk / h);
                } else {
                    add(&mut matrix, Some(idx), bk / h);
                    add(&mut matrix, grid.neighbor(idx, axis, -1), -bk / h);
                }
            }
        }
        if upwound {
            upwind_nodes.push(idx);
        }

        // Zero-order term.
        add(&mut matrix, Some(idx), coeffs.c[idx]);
    }

    // Monotone iff every off-diagonal entry is nonnegative up to roundoff.
    let floor = -T::epsilon() * matrix.inf_norm();
    let mut monotone = true;
    'outer: for i in 0..m {
        for &(j, v) in matrix.row(i) {
            if j != i && v < floor {
                monotone = false;
                break 'outer;
            }
        }
    }

    Ok(DiscreteOperator {
        grid,
        coeffs,
        matrix,
        monotone,
        upwind_nodes,
    })
}

/// Matrix–vector product Lu as a grid function.
pub fn apply<T: Real>(op: &DiscreteOperator<T>, u: &GridFunction<T>) -> Result<GridFunction<T>> {
    if u.len() != op.matrix.dim() || !Arc::ptr_eq(u.grid(), &op.grid) {
        return Err(Error::GridMismatch("operator applied across grids"));
    }
    let y = op.matrix.apply(u.values());
    GridFunction::from_values(op.grid.clone(), y)
}

/// The adjoint operator: the exact transpose of the assembled matrix.
pub fn adjoint<T: Real>(op: &DiscreteOperator<T>) -> DiscreteOperator<T> {
    DiscreteOperator {
        grid: op.grid.clone(),
        coeffs: op.coeffs.clone(),
        matrix: op.matrix.transpose(),
        monotone: op.monotone,
        upwind_nodes: op.upwind_nodes.clone(),
    }
}
