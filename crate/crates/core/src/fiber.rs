//! Global Lyapunov–Schmidt machinery: the projector along φ₁, the fiber
//! solver inverting P F_t(w) = z with bordered Newton steps, the height
//! function on fibers, and coercivity sampling for Ψ(w + tφ₁) = PF_t(w) + tφ₁.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{discrete_norm, inner_product, Grid, GridFunction, NormKind};
use crate::linalg::{BorderedSystem, SparseMatrix};
use crate::nonlinearity::Nonlinearity;
use crate::operator::DiscreteOperator;
use crate::scalar::Real;
use crate::spectral::Eigenpair;
use std::sync::Arc;

/// Projection P: Y → Z along φ₁, valid under the ⟨φ₁, φ₁*⟩ = 1 normalization:
/// g = Pg + ⟨g, φ₁*⟩ φ₁.
pub struct Projector<'a, T> {
    pub eigen: &'a Eigenpair<T>,
}

impl<'a, T: Real> Projector<'a, T> {
    pub fn new(eigen: &'a Eigenpair<T>) -> Self {
        Projector { eigen }
    }

    /// Split g = z + h·φ₁ with ⟨z, φ₁*⟩ = 0; returns (z, h).
    pub fn project(&self, g: &GridFunction<T>) -> Result<(GridFunction<T>, T)> {
        let h = inner_product(g, &self.eigen.phi1_star)?;
        let mut z = g.clone();
        z.add_scaled(-h, &self.eigen.phi1);
        Ok((z, h))
    }
}

/// One inverted point of the slanted line z + tφ₁: u = w + tφ₁ with
/// P F(u) = z and F(u) = z + height·φ₁ within the solver tolerance.
#[derive(Debug, Clone)]
pub struct FiberPoint<T> {
    pub z: GridFunction<T>,
    pub t: T,
    pub w: GridFunction<T>,
    pub u: GridFunction<T>,
    pub height: T,
    pub newton_iters: usize,
    pub residual: T,
}

/// Newton solver knobs.
#[derive(Debug, Clone, Copy)]
pub struct FiberParams<T> {
    pub tol: T,
    pub max_iter: usize,
    /// Damping halvings per Newton step before the fixed-point fallback.
    pub damping_tries: usize,
    /// Fixed-point relaxation factor θ in w ← w − θ (−L|_W)⁻¹ G.
    pub fallback_theta: T,
    pub fallback_iters: usize,
}

impl<T: Real> Default for FiberParams<T> {
    fn default() -> Self {
        FiberParams {
            tol: T::c(1e-10),
            max_iter: 50,
            damping_tries: 10,
            fallback_theta: T::c(0.5),
            fallback_iters: 400,
        }
    }
}

/// Sweep of fiber points along a sorted t-grid with warm-started solves.
#[derive(Debug, Clone)]
pub struct FiberTrace<T> {
    pub points: Vec<FiberPoint<T>>,
    /// max ‖u(z,t₂) − u(z,t₁)‖_W²ᵖ / |t₂ − t₁| over consecutive points.
    pub lipschitz: T,
}

/// Empirical coercivity sample of Ψ.
#[derive(Debug, Clone)]
pub struct CoercivitySample<T> {
    /// Minimal sampled ratio ‖Ψ(u) − Ψ(ũ)‖_Lᵖ / ‖u − ũ‖_W²ᵖ.
    pub c_emp: T,
    pub trials: usize,
    /// The pair attaining the minimum.
    pub worst: Box<(FiberInput<T>, FiberInput<T>)>,
}

/// A decomposed point u = w + t φ₁ used in coercivity sampling.
#[derive(Debug, Clone)]
pub struct FiberInput<T> {
    pub w: GridFunction<T>,
    pub t: T,
}

/// Shared state for fiber solves on one (operator, eigenpair, nonlinearity)
/// triple: the negated operator matrix, the prefactored −L bordered system
/// for cold starts and the fixed-point fallback, and the border row ⟨·, φ₁*⟩.
pub struct FiberProblem<'a, T> {
    pub op: &'a DiscreteOperator<T>,
    pub eigen: &'a Eigenpair<T>,
    pub f: &'a Nonlinearity<T>,
    pub params: FiberParams<T>,
    neg_l: SparseMatrix<T>,
    neg_l_inf: T,
    cold: BorderedSystem<T>,
    border_row: Vec<T>,
}

impl<'a, T: Real> FiberProblem<'a, T> {
    pub fn new(
        op: &'a DiscreteOperator<T>,
        eigen: &'a Eigenpair<T>,
        f: &'a Nonlinearity<T>,
        params: FiberParams<T>,
    ) -> Result<Self> {
        let neg_l = op.matrix().negated();
        let vol = op.grid().cell_volume();
        let border_row: Vec<T> = eigen.phi1_star.values().iter().map(|&v| v * vol).collect();
        let cold = BorderedSystem::new(
            neg_l.clone(),
            eigen.phi1.values().to_vec(),
            border_row.clone(),
        )?;
        let neg_l_inf = neg_l.inf_norm();
        Ok(FiberProblem {
            op,
            eigen,
            f,
            params,
            neg_l,
            neg_l_inf,
            cold,
            border_row,
        })
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        self.op.grid()
    }

    fn p_norm(&self) -> f64 {
        self.grid().default_p()
    }

    /// F(u) = −Lu − f(u) as raw values.
    fn f_op(&self, u: &GridFunction<T>) -> Vec<T> {
        let mut y = self.neg_l.apply(u.values());
        for (yi, &ui) in y.iter_mut().zip(u.values()) {
            *yi -= self.f.eval(ui);
        }
        y
    }

    fn height_of(&self, f_op: &[T]) -> T {
        let vol = self.grid().cell_volume();
        let mut h = T::zero();
        for (&fv, &sv) in f_op.iter().zip(self.eigen.phi1_star.values()) {
            h += fv * sv;
        }
        h * vol
    }

    /// Residual G = P F(w + tφ₁) − z of the fiber equation, the height, the
    /// sup residual, and the floating-point noise floor of its evaluation.
    fn residual(&self, w: &[T], t: T, z: &[T]) -> (Vec<T>, T, T, T) {
        let n = w.len();
        let mut u = vec![T::zero(); n];
        let mut u_sup = T::zero();
        for i in 0..n {
            u[i] = w[i] + t * self.eigen.phi1.values()[i];
            u_sup = u_sup.max(u[i].abs());
        }
        let mut fop = self.neg_l.apply(&u);
        for (fi, &ui) in fop.iter_mut().zip(&u) {
            *fi -= self.f.eval(ui);
        }
        let vol = self.grid().cell_volume();
        let mut h = T::zero();
        for (&fv, &sv) in fop.iter().zip(self.eigen.phi1_star.values()) {
            h += fv * sv;
        }
        h *= vol;
        let mut g = fop;
        let mut sup = T::zero();
        let mut z_sup = T::zero();
        for i in 0..n {
            g[i] = g[i] - z[i] - h * self.eigen.phi1.values()[i];
            sup = sup.max(g[i].abs());
            z_sup = z_sup.max(z[i].abs());
        }
        let floor =
            T::epsilon() * T::c(4.0) * (self.neg_l_inf * u_sup + h.abs() + z_sup + T::one());
        (g, h, sup, floor)
    }

    /// Invert the slanted line at (z, t): Newton iteration on
    /// G(w) = P(−L(w + tφ₁) − f(w + tφ₁)) − z with w ∈ W, each step solving
    /// the bordered system [[−L − diag(f′(u)), φ₁], [⟨·,φ₁*⟩, 0]].
    pub fn solve(
        &self,
        z: &GridFunction<T>,
        t: T,
        warm: Option<&GridFunction<T>>,
    ) -> Result<FiberPoint<T>> {
        let zh = inner_product(z, &self.eigen.phi1_star)?;
        let z_scale = discrete_norm(z, NormKind::Sup).max(T::one());
        if zh.abs() > T::c(1e-6) * z_scale {
            return Err(Error::Validation(format!(
                "z is not horizontal: <z, phi1*> = {:e}",
                zh.as_f64()
            )));
        }

        let mut w: Vec<T> = match warm {
            Some(w0) => w0.values().to_vec(),
            None => {
                // cold start from the linear fiber: −L w = z on W
                let (w0, _) = self.cold.solve(z.values(), T::zero())?;
                w0
            }
        };

        let mut history = Vec::new();
        let (mut g, mut height, mut res, mut floor) = self.residual(&w, t, z.values());
        let mut iters = 0usize;
        while res > self.params.tol.max(floor) {
            if iters >= self.params.max_iter {
                return self.fallback(z, t, w, history);
            }
            iters += 1;
            history.push(res.as_f64());

            // Jacobian −L − diag(f'(u)) bordered by φ₁ and the pairing row.
            let slopes: Vec<T> = w
                .iter()
                .zip(self.eigen.phi1.values())
                .map(|(&wi, &pi)| -self.f.slope(wi + t * pi))
                .collect();
            let jac = self.neg_l.plus_diagonal(&slopes);
            let step = match BorderedSystem::new(
                jac,
                self.eigen.phi1.values().to_vec(),
                self.border_row.clone(),
            ) {
                Ok(sys) => {
                    let neg_g: Vec<T> = g.iter().map(|&v| -v).collect();
                    sys.solve(&neg_g, T::zero())
                }
                Err(e) => Err(e),
            };

            let accepted = match step {
                Ok((delta, _s)) => {
                    let mut theta = T::one();
                    let mut accepted = false;
                    for _ in 0..=self.params.damping_tries {
                        let trial: Vec<T> = w
                            .iter()
                            .zip(&delta)
                            .map(|(&wi, &di)| wi + theta * di)
                            .collect();
                        let (tg, th, tres, tfloor) = self.residual(&trial, t, z.values());
                        if tres < res {
                            w = trial;
                            g = tg;
                            height = th;
                            res = tres;
                            floor = tfloor;
                            accepted = true;
                            break;
                        }
                        theta /= T::c(2.0);
                    }
                    accepted
                }
                Err(_) => false,
            };

            if !accepted {
                return self.fallback(z, t, w, history);
            }
        }
        self.finish(z, t, w, height, res, iters)
    }

    /// Damped fixed-point fallback w ← w − θ (−L|_W)⁻¹ G for kinked f when a
    /// Newton step stalls or the bordered Jacobian is singular.
    fn fallback(
        &self,
        z: &GridFunction<T>,
        t: T,
        mut w: Vec<T>,
        mut history: Vec<f64>,
    ) -> Result<FiberPoint<T>> {
        let theta = self.params.fallback_theta;
        let (mut g, mut height, mut res, mut floor) = self.residual(&w, t, z.values());
        for k in 0..self.params.fallback_iters {
            if res <= self.params.tol.max(floor) {
                return self.finish(z, t, w, height, res, history.len() + k);
            }
            history.push(res.as_f64());
            let (delta, _) = self.cold.solve(&g, T::zero())?;
            for (wi, di) in w.iter_mut().zip(&delta) {
                *wi -= theta * *di;
            }
            let next = self.residual(&w, t, z.values());
            g = next.0;
            height = next.1;
            res = next.2;
            floor = next.3;
        }
        if res <= self.params.tol.max(floor) {
            return self.finish(z, t, w, height, res, history.len());
        }
        Err(Error::SolverFailed {
            t: t.as_f64(),
            reason: format!("fiber solve stalled at residual {:e}", res.as_f64()),
            history: history.into_iter().rev().take(12).rev().collect(),
        })
    }

    fn finish(
        &self,
        z: &GridFunction<T>,
        t: T,
        w: Vec<T>,
        height: T,
        res: T,
        iters: usize,
    ) -> Result<FiberPoint<T>> {
        let grid = self.grid().clone();
        let mut u = w.clone();
        for (ui, &pi) in u.iter_mut().zip(self.eigen.phi1.values()) {
            *ui += t * pi;
        }
        Ok(FiberPoint {
            z: z.clone(),
            t,
            w: GridFunction::from_values(grid.clone(), w)?,
            u: GridFunction::from_values(grid, u)?,
            height,
            newton_iters: iters,
            residual: res,
        })
    }

    /// Height h̃(z, t) of the fiber point, cross-checked against the identity
    /// h̃ = λ₁ t − ⟨f(u), φ₁*⟩ from the expansion of F along the fiber.
    pub fn height(&self, z: &GridFunction<T>, t: T, warm: Option<&GridFunction<T>>) -> Result<T> {
        let p = self.solve(z, t, warm)?;
        let fu: Vec<T> = p.u.values().iter().map(|&v| self.f.eval(v)).collect();
        let vol = self.grid().cell_volume();
        let mut pair = T::zero();
        for (&fv, &sv) in fu.iter().zip(self.eigen.phi1_star.values()) {
            pair += fv * sv;
        }
        pair *= vol;
        let alt = self.eigen.lambda1 * t - pair;
        let scale = T::one().max(t.abs()).max(discrete_norm(&p.u, NormKind::Sup));
        if (p.height - alt).abs() > T::c(100.0) * self.params.tol * scale {
            return Err(Error::Structure(format!(
                "height formulas disagree: {:e} vs {:e}",
                p.height.as_f64(),
                alt.as_f64()
            )));
        }
        Ok(p.height)
    }

    /// Solve along a sorted t-grid with warm starts (continuation).
    pub fn trace(&self, z: &GridFunction<T>, t_grid: &[T]) -> Result<FiberTrace<T>> {
        if t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation("t grid must be strictly increasing".into()));
        }
        let p = self.p_norm();
        let mut points: Vec<FiberPoint<T>> = Vec::with_capacity(t_grid.len());
        for &t in t_grid {
            let warm = points.last().map(|p: &FiberPoint<T>| &p.w);
            let pt = self.solve(z, t, warm)?;
            points.push(pt);
        }
        let mut lipschitz = T::zero();
        for k in 1..points.len() {
            let mut diff = points[k].u.clone();
            diff.add_scaled(-T::one(), &points[k - 1].u);
            let dn = discrete_norm(&diff, NormKind::W2p(p));
            lipschitz = lipschitz.max(dn / (points[k].t - points[k - 1].t));
        }
        Ok(FiberTrace { points, lipschitz })
    }

    /// Evaluate Ψ(w + tφ₁) = P F_t(w) + t φ₁ directly (no solve).
    pub fn psi(&self, input: &FiberInput<T>) -> Result<GridFunction<T>> {
        let n = input.w.len();
        let mut u = input.w.values().to_vec();
        for (ui, &pi) in u.iter_mut().zip(self.eigen.phi1.values()) {
            *ui += input.t * pi;
        }
        let u = GridFunction::from_values(self.grid().clone(), u)?;
        let fop = self.f_op(&u);
        let h = self.height_of(&fop);
        let mut psi = vec![T::zero(); n];
        for i in 0..n {
            psi[i] = fop[i] + (input.t - h) * self.eigen.phi1.values()[i];
        }
        GridFunction::from_values(self.grid().clone(), psi)
    }

    /// Sample the coercivity ratio of Ψ on random pairs u = w + tφ₁ with
    /// w ∈ W of unit W²ᵖ norm and t ∈ [−10, 10].
    pub fn coercivity_sample(&self, trial_count: usize, seed: u64) -> Result<CoercivitySample<T>> {
        if trial_count == 0 {
            return Err(Error::Validation("coercivity sampling needs trial_count >= 1".into()));
        }
        let p = self.p_norm();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c_emp = T::infinity();
        let mut worst: Option<(FiberInput<T>, FiberInput<T>)> = None;
        let draw = |rng: &mut ChaCha8Rng| -> Result<FiberInput<T>> {
            let w = random_w_with(self.grid(), self.eigen, rng)?;
            let t = T::c(rng.gen_range(-10.0..10.0));
            Ok(FiberInput { w, t })
        };
        let mut done = 0usize;
        let mut guard = 0usize;
        while done < trial_count {
            guard += 1;
            if guard > 10 * trial_count + 100 {
                return Err(Error::Validation(
                    "coercivity sampling kept drawing degenerate pairs".into(),
                ));
            }
            let a = draw(&mut rng)?;
            let b = draw(&mut rng)?;
            let mut du = a.w.clone();
            du.add_scaled(-T::one(), &b.w);
            du.add_scaled(a.t - b.t, &self.eigen.phi1);
            let den = discrete_norm(&du, NormKind::W2p(p));
            if den <= T::c(1e-12) {
                continue; // identical pair: division guard
            }
            let pa = self.psi(&a)?;
            let mut diff = pa;
            diff.add_scaled(-T::one(), &self.psi(&b)?);
            let num = discrete_norm(&diff, NormKind::Lp(p));
            let ratio = num / den;
            if ratio < c_emp {
                c_emp = ratio;
                worst = Some((a, b));
            }
            done += 1;
        }
        Ok(CoercivitySample {
            c_emp,
            trials: trial_count,
            worst: Box::new(worst.expect("at least one valid pair")),
        })
    }
}

/// Smooth random field from seeded low-frequency sine modes; grid-refinement
/// stable because the modes are functions of the coordinates only.
fn random_field<T: Real>(grid: &Arc<Grid<T>>, rng: &mut ChaCha8Rng) -> GridFunction<T> {
    let dim = grid.dim();
    let modes = 6usize;
    let mut coeffs = Vec::new();
    if dim == 1 {
        for k in 1..=modes {
            coeffs.push((k, 0usize, rng.gen_range(-1.0..1.0) / k as f64));
        }
    } else {
        for k in 1..=modes {
            for l in 1..=modes {
                coeffs.push((k, l, rng.gen_range(-1.0..1.0) / ((k * k + l * l) as f64)));
            }
        }
    }
    GridFunction::sample(grid.clone(), |x| {
        let mut v = 0.0f64;
        for &(k, l, c) in &coeffs {
            let sx = ((x[0] - grid.domain.bounds[0][0]).as_f64()
                / (grid.domain.bounds[0][1] - grid.domain.bounds[0][0]).as_f64()
                * std::f64::consts::PI
                * k as f64)
                .sin();
            let sy = if dim == 2 {
                ((x[1] - grid.domain.bounds[1][0]).as_f64()
                    / (grid.domain.bounds[1][1] - grid.domain.bounds[1][0]).as_f64()
                    * std::f64::consts::PI
                    * l as f64)
                    .sin()
            } else {
                1.0
            };
            v += c * sx * sy;
        }
        T::c(v)
    })
}

/// Seeded smooth random grid function (not projected).
pub fn random_grid_function<T: Real>(grid: &Arc<Grid<T>>, seed: u64) -> GridFunction<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_field(grid, &mut rng)
}

/// Random unit-W²ᵖ-norm element of W = Z ∩ X (projected smooth noise).
pub fn random_w<T: Real>(
    grid: &Arc<Grid<T>>,
    eigen: &Eigenpair<T>,
    seed: u64,
) -> Result<GridFunction<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_w_with(grid, eigen, &mut rng)
}

fn random_w_with<T: Real>(
    grid: &Arc<Grid<T>>,
    eigen: &Eigenpair<T>,
    rng: &mut ChaCha8Rng,
) -> Result<GridFunction<T>> {
    let mut w = random_field(grid, rng);
    let h = inner_product(&w, &eigen.phi1_star)?;
    w.add_scaled(-h, &eigen.phi1);
    let p = grid.default_p();
    let n = discrete_norm(&w, NormKind::W2p(p));
    if n > T::zero() {
        w.scale(T::one() / n);
    }
    Ok(w)
}

/// Random element of Z with Lᵖ norm `scale`, reproducible from the seed.
pub fn random_z<T: Real>(
    grid: &Arc<Grid<T>>,
    eigen: &Eigenpair<T>,
    seed: u64,
    scale: T,
) -> Result<GridFunction<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = random_field(grid, &mut rng);
    let h = inner_product(&z, &eigen.phi1_star)?;
    z.add_scaled(-h, &eigen.phi1);
    let p = grid.default_p();
    let n = discrete_norm(&z, NormKind::Lp(p));
    if n > T::zero() {
        z.scale(scale / n);
    }
    Ok(z)
}
