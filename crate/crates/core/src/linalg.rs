//! Direct linear-algebra kernels: row-sparse matrices, banded LU with partial
//! pivoting, bordered (Lagrange-multiplier) solves and inverse power iteration
//! for nonsymmetric matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Square matrix stored as sorted sparse rows.
#[derive(Debug, Clone)]
pub struct SparseMatrix<T> {
    n: usize,
    rows: Vec<Vec<(usize, T)>>,
}

impl<T: Real> SparseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        SparseMatrix {
            n,
            rows: vec![Vec::new(); n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[(usize, T)] {
        &self.rows[i]
    }

    /// Accumulate `v` into entry (i, j).
    pub fn add_entry(&mut self, i: usize, j: usize, v: T) {
        let row = &mut self.rows[i];
        match row.binary_search_by_key(&j, |e| e.0) {
            Ok(pos) => row[pos].1 += v,
            Err(pos) => row.insert(pos, (j, v)),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        match self.rows[i].binary_search_by_key(&j, |e| e.0) {
            Ok(pos) => self.rows[i][pos].1,
            Err(_) => T::zero(),
        }
    }

    pub fn from_dense(a: &[Vec<T>]) -> Self {
        let n = a.len();
        let mut m = SparseMatrix::zeros(n);
        for (i, row) in a.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != T::zero() {
                    m.add_entry(i, j, v);
                }
            }
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let mut m = SparseMatrix::zeros(n);
        for i in 0..n {
            m.add_entry(i, i, T::one());
        }
        m
    }

    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.n);
        for (i, row) in self.rows.iter().enumerate() {
            let mut s = T::zero();
            for &(j, v) in row {
                s += v * x[j];
            }
            y[i] = s;
        }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        self.matvec(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let mut m = SparseMatrix::zeros(self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m.add_entry(j, i, v);
            }
        }
        m
    }

    pub fn negated(&self) -> Self {
        let mut m = self.clone();
        for row in &mut m.rows {
            for e in row {
                e.1 = -e.1;
            }
        }
        m
    }

    /// self + diag(d)
    pub fn plus_diagonal(&self, d: &[T]) -> Self {
        let mut m = self.clone();
        for (i, &v) in d.iter().enumerate() {
            m.add_entry(i, i, v);
        }
        m
    }

    pub fn shift_diagonal(&self, s: T) -> Self {
        let mut m = self.clone();
        for i in 0..self.n {
            m.add_entry(i, i, s);
        }
        m
    }

    /// Restriction to the rows/columns in `keep` (Dirichlet condition on the rest).
    pub fn restrict(&self, keep: &[usize]) -> Self {
        let mut pos = vec![usize::MAX; self.n];
        for (new, &old) in keep.iter().enumerate() {
            pos[old] = new;
        }
        let mut m = SparseMatrix::zeros(keep.len());
        for (new_i, &old_i) in keep.iter().enumerate() {
            for &(j, v) in &self.rows[old_i] {
                if pos[j] != usize::MAX {
                    m.add_entry(new_i, pos[j], v);
                }
            }
        }
        m
    }

    pub fn inf_norm(&self) -> T {
        self.rows
            .iter()
            .map(|row| row.iter().fold(T::zero(), |s, &(_, v)| s + v.abs()))
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// min_i (a_ii − Σ_{j≠i} |a_ij|): every eigenvalue has real part above this.
    pub fn gershgorin_lower(&self) -> T {
        let mut lo = T::infinity();
        for (i, row) in self.rows.iter().enumerate() {
            let mut diag = T::zero();
            let mut off = T::zero();
            for &(j, v) in row {
                if j == i {
                    diag = v;
                } else {
                    off += v.abs();
                }
            }
            lo = lo.min(diag - off);
        }
        lo
    }

    fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0usize;
        let mut ku = 0usize;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, _) in row {
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }
}

/// Banded LU with partial pivoting (LAPACK `dgbtrf`-style storage).
///
/// Invariant, checked at factor time with a seeded random right-hand side:
/// the backsolve residual satisfies
/// ‖Mx − r‖∞ ≤ tol·(‖M‖∞‖x‖∞ + ‖r‖∞).
#[derive(Debug, Clone)]
pub struct Factorization<T> {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    /// Column-major band storage with kl extra fill rows on top.
    ab: Vec<T>,
    ipiv: Vec<usize>,
    pub inf_norm: T,
    pub check_residual: T,
}

fn residual_tol<T: Real>() -> T {
    T::c(1e-10).max(T::epsilon() * T::c(100.0))
}

impl<T: Real> Factorization<T> {
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn at(&self, r: usize, j: usize) -> T {
        self.ab[j * self.ldab + r]
    }

    #[inline]
    fn at_mut(&mut self, r: usize, j: usize) -> &mut T {
        &mut self.ab[j * self.ldab + r]
    }

    /// Solve Mx = rhs using the stored factors.
    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        assert_eq!(rhs.len(), self.n);
        let mut b = rhs.to_vec();
        let kv = self.kl + self.ku;
        // forward: apply pivots and L
        if self.kl > 0 {
            for j in 0..self.n.saturating_sub(1) {
                let lm = self.kl.min(self.n - 1 - j);
                let l = self.ipiv[j];
                if l != j {
                    b.swap(l, j);
                }
                let bj = b[j];
                for k in 1..=lm {
                    let m = self.at(kv + k, j);
                    b[j + k] -= m * bj;
                }
            }
        }
        // backward: U x = b
        for j in (0..self.n).rev() {
            let piv = self.at(kv, j);
            let xj = b[j] / piv;
            b[j] = xj;
            let lm = kv.min(j);
            for k in 1..=lm {
                let u = self.at(kv - k, j);
                b[j - k] -= u * xj;
            }
        }
        b
    }
}

/// Factor a square sparse matrix as a banded LU with partial pivoting.
pub fn factor<T: Real>(m: &SparseMatrix<T>) -> Result<Factorization<T>> {
    let n = m.dim();
    assert!(n > 0, "cannot factor an empty matrix");
    let (kl, ku) = m.bandwidths();
    let kv = kl + ku;
    let ldab = 2 * kl + ku + 1;
    let mut fact = Factorization {
        n,
        kl,
        ku,
        ldab,
        ab: vec![T::zero(); ldab * n],
        ipiv: (0..n).collect(),
        inf_norm: m.inf_norm(),
        check_residual: T::zero(),
    };
    for i in 0..n {
        for &(j, v) in m.row(i) {
            // row i of column j sits at band row i - j + kv
            *fact.at_mut(i + kv - j, j) = v;
        }
    }

    let pivot_floor = T::epsilon() * fact.inf_norm * T::c(1e-3);
    let mut ju = 0usize;
    for j in 0..n {
        let km = kl.min(n - 1 - j);
        // partial pivot among rows j..=j+km
        let mut jp = 0usize;
        let mut best = fact.at(kv, j).abs();
        for k in 1..=km {
            let v = fact.at(kv + k, j).abs();
            if v > best {
                best = v;
                jp = k;
            }
        }
        if !(best > pivot_floor) {
            return Err(Error::SingularPivot { index: j });
        }
        fact.ipiv[j] = j + jp;
        ju = ju.max((j + ku + jp).min(n - 1));
        if jp != 0 {
            // swap rows j and j+jp across columns j..=ju
            for col in j..=ju {
                let r1 = j + kv - col;
                let r2 = j + jp + kv - col;
                let tmp = fact.at(r1, col);
                *fact.at_mut(r1, col) = fact.at(r2, col);
                *fact.at_mut(r2, col) = tmp;
            }
        }
        if km > 0 {
            let piv = fact.at(kv, j);
            for k in 1..=km {
                *fact.at_mut(kv + k, j) = fact.at(kv + k, j) / piv;
            }
            for col in (j + 1)..=ju {
                let up = fact.at(j + kv - col, col);
                if up != T::zero() {
                    for k in 1..=km {
                        let mult = fact.at(kv + k, j);
                        *fact.at_mut(j + k + kv - col, col) =
                            fact.at(j + k + kv - col, col) - mult * up;
                    }
                }
            }
        }
    }

    // Residual self-check on a seeded random right-hand side.
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64 ^ 0x5eed);
    let rhs: Vec<T> = (0..n).map(|_| T::c(rng.gen_range(-1.0..1.0))).collect();
    let x = fact.solve(&rhs);
    let ax = m.apply(&x);
    let mut res = T::zero();
    let mut xmax = T::zero();
    let mut rmax = T::zero();
    for i in 0..n {
        res = res.max((ax[i] - rhs[i]).abs());
        xmax = xmax.max(x[i].abs());
        rmax = rmax.max(rhs[i].abs());
    }
    fact.check_residual = res;
    let bound = residual_tol::<T>() * (fact.inf_norm * xmax + rmax);
    if res > bound {
        return Err(Error::UnstableFactorization {
            residual: res.as_f64(),
        });
    }
    Ok(fact)
}

/// The bordered block system [[M, p], [qᵀ, 0]].
///
/// Realizes a solve of M restricted to the hyperplane qᵀx = const, with the
/// multiplier absorbing the p-direction of the range. Solvability requires
/// the restriction of M to that complement to be invertible; failure is
/// reported, not assumed.
pub struct BorderedSystem<T> {
    matrix: SparseMatrix<T>,
    fact: Factorization<T>,
    col: Vec<T>,
    row: Vec<T>,
    /// M⁻¹p, reused across solves.
    minv_col: Vec<T>,
    denom: T,
}

impl<T: Real> BorderedSystem<T> {
    pub fn new(matrix: SparseMatrix<T>, col: Vec<T>, row: Vec<T>) -> Result<Self> {
        let n = matrix.dim();
        assert_eq!(col.len(), n);
        assert_eq!(row.len(), n);
        let fact = factor(&matrix)?;
        let minv_col = fact.solve(&col);
        let denom = dot(&row, &minv_col);
        let scale = norm_inf(&row) * norm_inf(&minv_col);
        if denom.abs() <= T::epsilon() * T::c(100.0) * scale.max(T::epsilon()) {
            return Err(Error::SingularBordered(format!(
                "border pivot {:e} below noise level",
                denom.as_f64()
            )));
        }
        Ok(BorderedSystem {
            matrix,
            fact,
            col,
            row,
            minv_col,
            denom,
        })
    }

    /// Solve Mx + s·p = rhs, qᵀx = scalar_rhs; returns (x, s).
    pub fn solve(&self, rhs: &[T], scalar_rhs: T) -> Result<(Vec<T>, T)> {
        let n = self.fact.dim();
        assert_eq!(rhs.len(), n);
        let x1 = self.fact.solve(rhs);
        let mut s = (dot(&self.row, &x1) - scalar_rhs) / self.denom;
        let mut x: Vec<T> = (0..n).map(|i| x1[i] - s * self.minv_col[i]).collect();

        // One step of iterative refinement on the full bordered residual keeps
        // block elimination accurate when M is poorly conditioned.
        for _ in 0..2 {
            let ax = self.matrix.apply(&x);
            let mut r1 = vec![T::zero(); n];
            let mut rmax = T::zero();
            for i in 0..n {
                r1[i] = rhs[i] - ax[i] - s * self.col[i];
                rmax = rmax.max(r1[i].abs());
            }
            let r2 = scalar_rhs - dot(&self.row, &x);
            let scale = self.residual_scale(rhs, &x, s, scalar_rhs);
            if rmax.max(r2.abs()) <= residual_tol::<T>() * scale {
                return Ok((x, s));
            }
            let d1 = self.fact.solve(&r1);
            let ds = (dot(&self.row, &d1) - r2) / self.denom;
            for i in 0..n {
                x[i] += d1[i] - ds * self.minv_col[i];
            }
            s += ds;
        }
        // Final check after refinement.
        let ax = self.matrix.apply(&x);
        let mut rmax = T::zero();
        for i in 0..n {
            rmax = rmax.max((rhs[i] - ax[i] - s * self.col[i]).abs());
        }
        let r2 = (scalar_rhs - dot(&self.row, &x)).abs();
        let scale = self.residual_scale(rhs, &x, s, scalar_rhs);
        if rmax.max(r2) > residual_tol::<T>() * T::c(100.0) * scale {
            return Err(Error::SingularBordered(format!(
                "bordered residual {:e} did not converge under refinement",
                rmax.max(r2).as_f64()
            )));
        }
        Ok((x, s))
    }

    fn residual_scale(&self, rhs: &[T], x: &[T], s: T, scalar_rhs: T) -> T {
        (self.fact.inf_norm * norm_inf(x)
            + s.abs() * norm_inf(&self.col)
            + norm_inf(rhs)
            + scalar_rhs.abs())
        .max(T::one())
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm_inf<T: Real>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
}

/// Result of the inverse power iteration.
#[derive(Debug, Clone)]
pub struct PowerResult<T> {
    pub eigenvalue: T,
    /// Sup-normalized eigenvector, nonnegative when the iteration matrix is
    /// inverse-positive.
    pub eigenvector: Vec<T>,
    pub iterations: usize,
    pub residual: T,
}

/// Inverse power iteration with a fixed shift below the target eigenvalue.
///
/// Converges to the eigenvalue of smallest |λ − shift|; for the matrices
/// produced by monotone discretizations and shifts below the principal
/// eigenvalue the iterates stay positive and the principal pair is found.
pub fn inverse_power<T: Real>(
    m: &SparseMatrix<T>,
    shift: T,
    tol: T,
    max_iter: usize,
) -> Result<PowerResult<T>> {
    let n = m.dim();
    let shifted = m.shift_diagonal(-shift);
    let fact = factor(&shifted)?;
    let mut v = vec![T::one(); n];
    let mut mu;
    let mut last_res = T::infinity();
    for it in 1..=max_iter {
        let mut y = fact.solve(&v);
        // orient so the largest-magnitude entry is positive, then sup-normalize
        let mut big = T::zero();
        let mut big_abs = T::zero();
        for &x in &y {
            if x.abs() > big_abs {
                big_abs = x.abs();
                big = x;
            }
        }
        if big_abs == T::zero() {
            return Err(Error::IterationFailed {
                iterations: it,
                residual: f64::INFINITY,
            });
        }
        let scale = if big < T::zero() { -big_abs } else { big_abs };
        for x in &mut y {
            *x /= scale;
        }
        v = y;
        let mv = m.apply(&v);
        let vv = dot(&v, &v);
        mu = dot(&mv, &v) / vv;
        let mut res = T::zero();
        for i in 0..n {
            res = res.max((mv[i] - mu * v[i]).abs());
        }
        last_res = res / norm_inf(&v);
        if last_res <= tol * mu.abs().max(T::one()) {
            // a few polish sweeps push the residual to its floating-point floor
            if it + 3 < max_iter {
                let mut best = (mu, v.clone(), last_res, it);
                for extra in 1..=3usize {
                    let mut y = fact.solve(&v);
                    let mut big = T::zero();
                    let mut big_abs = T::zero();
                    for &x in &y {
                        if x.abs() > big_abs {
                            big_abs = x.abs();
                            big = x;
                        }
                    }
                    let scale = if big < T::zero() { -big_abs } else { big_abs };
                    for x in &mut y {
                        *x /= scale;
                    }
                    v = y;
                    let mv = m.apply(&v);
                    mu = dot(&mv, &v) / dot(&v, &v);
                    let mut res = T::zero();
                    for i in 0..n {
                        res = res.max((mv[i] - mu * v[i]).abs());
                    }
                    if res < best.2 {
                        best = (mu, v.clone(), res, it + extra);
                    }
                }
                return Ok(PowerResult {
                    eigenvalue: best.0,
                    eigenvector: best.1,
                    iterations: best.3,
                    residual: best.2,
                });
            }
            return Ok(PowerResult {
                eigenvalue: mu,
                eigenvector: v,
                iterations: it,
                residual: last_res,
            });
        }
    }
    Err(Error::IterationFailed {
        iterations: max_iter,
        residual: last_res.as_f64(),
    })
}
