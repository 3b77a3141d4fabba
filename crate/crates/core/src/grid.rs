//! Rectangular 1D/2D Dirichlet grids: interior enumeration, boundary distance,
//! discrete inner products and norms.
//!
//! Interior nodes carry the unknowns; every node outside the interior holds the
//! Dirichlet value 0, and difference quotients use that zero extension.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Named mask presets carving a subdomain out of the bounding rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    /// The full open rectangle.
    Rectangle,
    /// The open disk inscribed in the rectangle (radius = half the shortest side).
    Disk,
}

impl MaskKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "rectangle" => Ok(MaskKind::Rectangle),
            "disk" => Ok(MaskKind::Disk),
            other => Err(Error::Validation(format!("unknown mask preset `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MaskKind::Rectangle => "rectangle",
            MaskKind::Disk => "disk",
        }
    }
}

/// Axis-aligned open box, optionally masked.
#[derive(Debug, Clone)]
pub struct Domain<T> {
    pub dim: usize,
    pub bounds: Vec<[T; 2]>,
    pub mask: MaskKind,
}

impl<T: Real> Domain<T> {
    pub fn new(bounds: Vec<[T; 2]>, mask: MaskKind) -> Result<Self> {
        let dim = bounds.len();
        if dim == 0 || dim > 2 {
            return Err(Error::InvalidDomain(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        for (k, b) in bounds.iter().enumerate() {
            if !(b[0] < b[1]) {
                return Err(Error::InvalidDomain(format!(
                    "axis {k}: empty interval [{}, {}]",
                    b[0], b[1]
                )));
            }
        }
        Ok(Domain { dim, bounds, mask })
    }

    pub fn interval(lo: T, hi: T) -> Result<Self> {
        Self::new(vec![[lo, hi]], MaskKind::Rectangle)
    }

    pub fn rectangle(x: [T; 2], y: [T; 2]) -> Result<Self> {
        Self::new(vec![x, y], MaskKind::Rectangle)
    }

    fn length(&self, axis: usize) -> T {
        self.bounds[axis][1] - self.bounds[axis][0]
    }

    fn disk_center_radius(&self) -> (Vec<T>, T) {
        let two = T::c(2.0);
        let center: Vec<T> = self
            .bounds
            .iter()
            .map(|b| (b[0] + b[1]) / two)
            .collect();
        let mut r = self.length(0) / two;
        for k in 1..self.dim {
            r = r.min(self.length(k) / two);
        }
        (center, r)
    }

    /// Strict membership in the open masked region (rectangle boundary excluded).
    pub fn contains(&self, x: &[T]) -> bool {
        for k in 0..self.dim {
            if !(x[k] > self.bounds[k][0] && x[k] < self.bounds[k][1]) {
                return false;
            }
        }
        match self.mask {
            MaskKind::Rectangle => true,
            MaskKind::Disk => {
                let (c, r) = self.disk_center_radius();
                let mut s = T::zero();
                for k in 0..self.dim {
                    let d = x[k] - c[k];
                    s += d * d;
                }
                s < r * r
            }
        }
    }
}

/// Discretization of a [`Domain`]: nodes, spacing, interior enumeration and
/// the exact (rectangles) or brute-force (masks) distance to the boundary.
#[derive(Debug)]
pub struct Grid<T> {
    pub domain: Domain<T>,
    /// Points per axis, boundary included; at least 3.
    pub n: Vec<usize>,
    /// Spacing per axis.
    pub h: Vec<T>,
    /// Multi-index of every interior node, in lexicographic order (x fastest).
    interior: Vec<[usize; 2]>,
    /// Full-grid flat index -> interior index, or usize::MAX outside.
    index_of: Vec<usize>,
    /// Distance to the domain boundary per interior node.
    pub boundary_distance: Vec<T>,
}

const OUTSIDE: usize = usize::MAX;

impl<T: Real> Grid<T> {
    pub fn new(domain: Domain<T>, n: &[usize]) -> Result<Arc<Self>> {
        if n.len() != domain.dim {
            return Err(Error::InvalidDomain(format!(
                "expected {} axis sizes, got {}",
                domain.dim,
                n.len()
            )));
        }
        for (k, &nk) in n.iter().enumerate() {
            if nk < 3 {
                return Err(Error::InvalidDomain(format!(
                    "axis {k}: need at least 3 points per axis, got {nk}"
                )));
            }
        }
        let dim = domain.dim;
        let h: Vec<T> = (0..dim)
            .map(|k| domain.length(k) / T::from_usize(n[k] - 1).unwrap())
            .collect();
        let ny = if dim == 2 { n[1] } else { 1 };
        let total = n[0] * ny;

        let mut interior = Vec::new();
        let mut index_of = vec![OUTSIDE; total];
        let mut coord = [T::zero(); 2];
        for j in 0..ny {
            for i in 0..n[0] {
                coord[0] = domain.bounds[0][0] + T::from_usize(i).unwrap() * h[0];
                if dim == 2 {
                    coord[1] = domain.bounds[1][0] + T::from_usize(j).unwrap() * h[1];
                }
                let on_rect_edge = i == 0
                    || i == n[0] - 1
                    || (dim == 2 && (j == 0 || j == ny - 1));
                if !on_rect_edge && domain.contains(&coord[..dim]) {
                    index_of[j * n[0] + i] = interior.len();
                    interior.push([i, j]);
                }
            }
        }
        if interior.is_empty() {
            return Err(Error::InvalidDomain(
                "masked region contains no interior node".into(),
            ));
        }

        let grid = Grid {
            domain,
            n: n.to_vec(),
            h,
            interior,
            index_of,
            boundary_distance: Vec::new(),
        };
        grid.check_connected()?;
        let boundary_distance = grid.compute_boundary_distance();
        let mut grid = grid;
        grid.boundary_distance = boundary_distance;
        Ok(Arc::new(grid))
    }

    /// Unit-interval helper used pervasively in tests and presets.
    pub fn unit_interval(n: usize) -> Result<Arc<Self>> {
        Grid::new(Domain::interval(T::zero(), T::one())?, &[n])
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn interior_len(&self) -> usize {
        self.interior.len()
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        self.interior[idx]
    }

    pub fn node_coord(&self, idx: usize) -> Vec<T> {
        let [i, j] = self.interior[idx];
        let mut x = vec![self.domain.bounds[0][0] + T::from_usize(i).unwrap() * self.h[0]];
        if self.dim() == 2 {
            x.push(self.domain.bounds[1][0] + T::from_usize(j).unwrap() * self.h[1]);
        }
        x
    }

    /// Interior index of the neighbor one step along `axis` (`dir` = ±1),
    /// or `None` when that node carries the Dirichlet value 0.
    pub fn neighbor(&self, idx: usize, axis: usize, dir: i64) -> Option<usize> {
        let [i, j] = self.interior[idx];
        let (mut i, mut j) = (i as i64, j as i64);
        match axis {
            0 => i += dir,
            _ => j += dir,
        }
        self.lookup(i, j)
    }

    /// Diagonal neighbor (2D), `dx`/`dy` in {−1, +1}.
    pub fn neighbor2(&self, idx: usize, dx: i64, dy: i64) -> Option<usize> {
        let [i, j] = self.interior[idx];
        self.lookup(i as i64 + dx, j as i64 + dy)
    }

    fn lookup(&self, i: i64, j: i64) -> Option<usize> {
        let ny = if self.dim() == 2 { self.n[1] } else { 1 };
        if i < 0 || j < 0 || i >= self.n[0] as i64 || j >= ny as i64 {
            return None;
        }
        let flat = j as usize * self.n[0] + i as usize;
        match self.index_of[flat] {
            OUTSIDE => None,
            k => Some(k),
        }
    }

    /// Volume weight of one node cell, h₁·…·h_dim.
    pub fn cell_volume(&self) -> T {
        self.h.iter().copied().fold(T::one(), |a, b| a * b)
    }

    /// Default Lebesgue exponent for the discrete W²ᵖ/Lᵖ surrogates.
    pub fn default_p(&self) -> f64 {
        (self.dim() as f64).max(2.0)
    }

    fn check_connected(&self) -> Result<()> {
        let m = self.interior_len();
        let mut seen = vec![false; m];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1usize;
        while let Some(k) = stack.pop() {
            for axis in 0..self.dim() {
                for dir in [-1i64, 1] {
                    if let Some(nb) = self.neighbor(k, axis, dir) {
                        if !seen[nb] {
                            seen[nb] = true;
                            count += 1;
                            stack.push(nb);
                        }
                    }
                }
            }
        }
        if count != m {
            return Err(Error::InvalidDomain(format!(
                "interior is disconnected: reached {count} of {m} nodes"
            )));
        }
        Ok(())
    }

    fn compute_boundary_distance(&self) -> Vec<T> {
        let dim = self.dim();
        let rect_dist = |x: &[T]| -> T {
            let mut d = T::infinity();
            for k in 0..dim {
                d = d
                    .min(x[k] - self.domain.bounds[k][0])
                    .min(self.domain.bounds[k][1] - x[k]);
            }
            d
        };
        match self.domain.mask {
            MaskKind::Rectangle => (0..self.interior_len())
                .map(|idx| rect_dist(&self.node_coord(idx)))
                .collect(),
            _ => {
                // Brute force over excluded nodes of the bounding grid.
                let ny = if dim == 2 { self.n[1] } else { 1 };
                let mut excluded = Vec::new();
                for j in 0..ny {
                    for i in 0..self.n[0] {
                        if self.index_of[j * self.n[0] + i] == OUTSIDE {
                            let mut x =
                                vec![self.domain.bounds[0][0] + T::from_usize(i).unwrap() * self.h[0]];
                            if dim == 2 {
                                x.push(self.domain.bounds[1][0] + T::from_usize(j).unwrap() * self.h[1]);
                            }
                            excluded.push(x);
                        }
                    }
                }
                (0..self.interior_len())
                    .map(|idx| {
                        let x = self.node_coord(idx);
                        let mut d = rect_dist(&x);
                        for e in &excluded {
                            let mut s = T::zero();
                            for k in 0..dim {
                                let dk = x[k] - e[k];
                                s += dk * dk;
                            }
                            d = d.min(s.sqrt());
                        }
                        d
                    })
                    .collect()
            }
        }
    }
}

/// Real-valued function on the interior nodes of a grid (zero on the boundary).
#[derive(Debug, Clone)]
pub struct GridFunction<T> {
    grid: Arc<Grid<T>>,
    values: Vec<T>,
}

impl<T: Real> GridFunction<T> {
    pub fn zeros(grid: Arc<Grid<T>>) -> Self {
        let values = vec![T::zero(); grid.interior_len()];
        GridFunction { grid, values }
    }

    pub fn from_values(grid: Arc<Grid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.interior_len() {
            return Err(Error::GridMismatch(
                "value vector length differs from interior node count",
            ));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn constant(grid: Arc<Grid<T>>, c: T) -> Self {
        let values = vec![c; grid.interior_len()];
        GridFunction { grid, values }
    }

    /// Sample a pointwise function of the node coordinates.
    pub fn sample(grid: Arc<Grid<T>>, mut f: impl FnMut(&[T]) -> T) -> Self {
        let values = (0..grid.interior_len())
            .map(|idx| f(&grid.node_coord(idx)))
            .collect();
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scale(&mut self, c: T) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    /// self += c · other
    pub fn add_scaled(&mut self, c: T, other: &GridFunction<T>) {
        debug_assert!(same_grid(self, other));
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * *b;
        }
    }

    /// Pointwise map of f over the values.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

pub fn same_grid<T: Real>(u: &GridFunction<T>, v: &GridFunction<T>) -> bool {
    Arc::ptr_eq(&u.grid, &v.grid)
        || (u.grid.n == v.grid.n && u.grid.dim() == v.grid.dim())
}

/// Discrete L² pairing with volume weight: Σ u·v·h₁·…·h_dim over interior nodes.
pub fn inner_product<T: Real>(u: &GridFunction<T>, v: &GridFunction<T>) -> Result<T> {
    if !same_grid(u, v) {
        return Err(Error::GridMismatch("inner product of functions on different grids"));
    }
    let vol = u.grid.cell_volume();
    let mut s = T::zero();
    for (a, b) in u.values.iter().zip(&v.values) {
        s += *a * *b;
    }
    Ok(s * vol)
}

/// Which discrete norm to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    Sup,
    Lp(f64),
    W2p(f64),
}

/// Discrete norm of a grid function.
///
/// `Lp` is the volume-weighted ℓᵖ norm; `W2p` adds centered first and second
/// difference quotients (zero extension across the boundary) as a surrogate
/// for the W²ᵖ norm. Panics if `p < 1`.
pub fn discrete_norm<T: Real>(u: &GridFunction<T>, kind: NormKind) -> T {
    match kind {
        NormKind::Sup => u
            .values
            .iter()
            .fold(T::zero(), |m, &v| m.max(v.abs())),
        NormKind::Lp(p) => {
            assert!(p >= 1.0, "Lp norm needs p >= 1");
            lp_sum(u.grid(), u.values(), p).powf(T::one() / T::c(p))
        }
        NormKind::W2p(p) => {
            assert!(p >= 1.0, "W2p norm needs p >= 1");
            let grad = gradient_magnitude(u);
            let hess = hessian_magnitude(u);
            let s = lp_sum(u.grid(), u.values(), p)
                + lp_sum(u.grid(), &grad, p)
                + lp_sum(u.grid(), &hess, p);
            s.powf(T::one() / T::c(p))
        }
    }
}

fn lp_sum<T: Real>(grid: &Grid<T>, values: &[T], p: f64) -> T {
    let vol = grid.cell_volume();
    let pt = T::c(p);
    let mut s = T::zero();
    for &v in values {
        s += v.abs().powf(pt);
    }
    s * vol
}

fn value_at<T: Real>(u: &GridFunction<T>, idx: Option<usize>) -> T {
    idx.map_or(T::zero(), |k| u.values[k])
}

/// Euclidean norm of the centered-difference gradient per node.
pub fn gradient_magnitude<T: Real>(u: &GridFunction<T>) -> Vec<T> {
    let grid = u.grid();
    let two = T::c(2.0);
    (0..grid.interior_len())
        .map(|idx| {
            let mut s = T::zero();
            for axis in 0..grid.dim() {
                let plus = value_at(u, grid.neighbor(idx, axis, 1));
                let minus = value_at(u, grid.neighbor(idx, axis, -1));
                let d = (plus - minus) / (two * grid.h[axis]);
                s += d * d;
            }
            s.sqrt()
        })
        .collect()
}

/// Frobenius norm of the centered-difference Hessian per node.
pub fn hessian_magnitude<T: Real>(u: &GridFunction<T>) -> Vec<T> {
    let grid = u.grid();
    let two = T::c(2.0);
    let four = T::c(4.0);
    (0..grid.interior_len())
        .map(|idx| {
            let uc = u.values[idx];
            let mut s = T::zero();
            for axis in 0..grid.dim() {
                let plus = value_at(u, grid.neighbor(idx, axis, 1));
                let minus = value_at(u, grid.neighbor(idx, axis, -1));
                let d2 = (plus - two * uc + minus) / (grid.h[axis] * grid.h[axis]);
                s += d2 * d2;
            }
            if grid.dim() == 2 {
                let pp = value_at(u, grid.neighbor2(idx, 1, 1));
                let pm = value_at(u, grid.neighbor2(idx, 1, -1));
                let mp = value_at(u, grid.neighbor2(idx, -1, 1));
                let mm = value_at(u, grid.neighbor2(idx, -1, -1));
                let dxy = (pp - pm - mp + mm) / (four * grid.h[0] * grid.h[1]);
                s += two * dxy * dxy;
            }
            s.sqrt()
        })
        .collect()
}
