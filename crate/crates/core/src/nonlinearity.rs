//! Nonlinearities f with slope range [0, b] after normalization, preset
//! constructors, mollified surrogates and sampling-based hypothesis checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone)]
enum Kind<T> {
    /// f(s) = slope·s (slope 0 gives the degenerate linear case used in
    /// diagnostics; nonzero slopes fail the lower-bound hypothesis and are
    /// flagged by validation).
    Linear { slope: T },
    /// f(s) = b·max(s, 0)
    Ramp { b: T },
    /// f(s) = (b/2)(s + √(s²+1) − 1)
    SmoothRamp { b: T },
    /// Piecewise-linear interpolant of sorted (s, f) samples, extended by the
    /// end slopes, already normalized to slope_lo = 0.
    Table {
        s: Vec<T>,
        f: Vec<T>,
        slopes: Vec<T>,
    },
    /// Convolution of `base` with the compactly supported bump of radius
    /// delta, evaluated by fixed-order Gauss-Legendre quadrature.
    Mollified {
        base: Box<Kind<T>>,
        delta: T,
        /// quadrature abscissae on [−1, 1]
        nodes: Vec<T>,
        /// bump-weighted quadrature weights, normalized to sum 1
        weights: Vec<T>,
    },
}

impl<T: Real> Kind<T> {
    fn eval(&self, s: T) -> T {
        match self {
            Kind::Linear { slope } => *slope * s,
            Kind::Ramp { b } => *b * s.max(T::zero()),
            Kind::SmoothRamp { b } => {
                *b / T::c(2.0) * (s + (s * s + T::one()).sqrt() - T::one())
            }
            Kind::Table { s: xs, f, slopes } => eval_table(xs, f, slopes, s),
            Kind::Mollified {
                base,
                delta,
                nodes,
                weights,
            } => {
                let mut acc = T::zero();
                for (&t, &w) in nodes.iter().zip(weights) {
                    acc += w * base.eval(s - *delta * t);
                }
                acc
            }
        }
    }

    fn slope(&self, s: T) -> T {
        match self {
            Kind::Linear { slope } => *slope,
            Kind::Ramp { b } => {
                if s > T::zero() {
                    *b
                } else if s < T::zero() {
                    T::zero()
                } else {
                    *b / T::c(2.0) // subgradient midpoint at the kink
                }
            }
            Kind::SmoothRamp { b } => {
                *b / T::c(2.0) * (T::one() + s / (s * s + T::one()).sqrt())
            }
            Kind::Table { s: xs, slopes, .. } => slope_table(xs, slopes, s),
            Kind::Mollified {
                base,
                delta,
                nodes,
                weights,
            } => {
                let mut acc = T::zero();
                for (&t, &w) in nodes.iter().zip(weights) {
                    acc += w * base.slope(s - *delta * t);
                }
                acc
            }
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Kind::Linear { .. } => "linear",
            Kind::Ramp { .. } => "ramp",
            Kind::SmoothRamp { .. } => "smooth_ramp",
            Kind::Table { .. } => "table",
            Kind::Mollified { .. } => "mollified",
        }
    }
}

fn eval_table<T: Real>(xs: &[T], f: &[T], slopes: &[T], s: T) -> T {
    let n = xs.len();
    if s <= xs[0] {
        return f[0] + slopes[0] * (s - xs[0]);
    }
    if s >= xs[n - 1] {
        return f[n - 1] + slopes[slopes.len() - 1] * (s - xs[n - 1]);
    }
    let mut lo = 0;
    let mut hi = n - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if xs[mid] <= s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    f[lo] + slopes[lo] * (s - xs[lo])
}

fn slope_table<T: Real>(xs: &[T], slopes: &[T], s: T) -> T {
    let n = xs.len();
    if s < xs[0] {
        return slopes[0];
    }
    if s > xs[n - 1] {
        return slopes[slopes.len() - 1];
    }
    for i in 0..slopes.len() {
        if s >= xs[i] && s < xs[i + 1] {
            return slopes[i];
        }
    }
    slopes[slopes.len() - 1]
}

/// A Lipschitz nonlinearity normalized so the slope range is [0, b], with its
/// hypothesis data: the constant M in f(s) ≥ max{bs − M, −M}, convexity, and
/// the asymptotic slopes ã = lim_{s→−∞} f(s)/s, b̃ = lim_{s→+∞} f(s)/s.
#[derive(Debug, Clone)]
pub struct Nonlinearity<T> {
    kind: Kind<T>,
    pub slope_hi: T,
    pub offset_m: T,
    pub convex: bool,
    pub a_tilde: T,
    pub b_tilde: T,
}

impl<T: Real> Nonlinearity<T> {
    pub fn eval(&self, s: T) -> T {
        self.kind.eval(s)
    }

    /// Derivative surrogate in [0, b]: analytic where available, subgradient
    /// midpoint at kinks, mollified average for mollified kinds.
    pub fn slope(&self, s: T) -> T {
        self.kind.slope(s)
    }

    pub fn kind_name(&self) -> &'static str {
        self.kind.name()
    }

    /// f(s) = b·max(s, 0): the normalized jumping nonlinearity.
    pub fn ramp(b: T) -> Result<Self> {
        if !(b > T::zero()) {
            return Err(Error::Validation(format!("ramp needs b > 0, got {b}")));
        }
        Ok(Nonlinearity {
            kind: Kind::Ramp { b },
            slope_hi: b,
            offset_m: T::zero(),
            convex: true,
            a_tilde: T::zero(),
            b_tilde: b,
        })
    }

    /// f(s) = (b/2)(s + √(s²+1) − 1): smooth, strictly convex, slopes (0, b).
    pub fn smooth_ramp(b: T) -> Result<Self> {
        if !(b > T::zero()) {
            return Err(Error::Validation(format!("smooth_ramp needs b > 0, got {b}")));
        }
        Ok(Nonlinearity {
            kind: Kind::SmoothRamp { b },
            slope_hi: b,
            offset_m: b / T::c(2.0),
            convex: true,
            a_tilde: T::zero(),
            b_tilde: b,
        })
    }

    /// f(s) = slope·s. Diagnostic helper: for slope ≠ 0 the lower-bound
    /// hypothesis fails and validation reports it.
    pub fn linear(slope: T) -> Self {
        Nonlinearity {
            kind: Kind::Linear { slope },
            slope_hi: slope.max(T::zero()),
            offset_m: T::zero(),
            convex: true,
            a_tilde: slope,
            b_tilde: slope,
        }
    }

    pub fn zero() -> Self {
        Self::linear(T::zero())
    }

    /// Piecewise-linear nonlinearity through the given samples. The raw data
    /// has slopes in [a, b]; construction stores f − a·id (so slopes land in
    /// [0, b − a]), mirroring the a = 0 normalization.
    pub fn table(mut points: Vec<(T, T)>, a: T, b: T) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Validation("table needs at least two samples".into()));
        }
        if !(b > a) {
            return Err(Error::Validation(format!(
                "table needs slope bounds a < b, got ({a}, {b})"
            )));
        }
        points.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
        let mut xs = Vec::with_capacity(points.len());
        let mut fs = Vec::with_capacity(points.len());
        for (s, f) in points {
            if let Some(&last) = xs.last() {
                if !(s > last) {
                    return Err(Error::Validation("duplicate abscissa in table".into()));
                }
            }
            xs.push(s);
            fs.push(f - a * s); // normalization: subtract a·id
        }
        let b_norm = b - a;
        let mut slopes = Vec::with_capacity(xs.len() - 1);
        let tol = T::epsilon().sqrt();
        for i in 0..xs.len() - 1 {
            let sl = (fs[i + 1] - fs[i]) / (xs[i + 1] - xs[i]);
            if sl < -tol || sl > b_norm + tol {
                return Err(Error::Validation(format!(
                    "table segment {i} has slope {} outside [0, {}] after normalization",
                    sl, b_norm
                )));
            }
            slopes.push(sl);
        }
        let convex = slopes.windows(2).all(|w| w[1] >= w[0] - tol);
        let a_tilde = slopes[0];
        let b_tilde = slopes[slopes.len() - 1];
        // Bound M from the breakpoints; exact when the end slopes are 0 and b.
        let mut m = T::zero();
        for i in 0..xs.len() {
            m = m.max(b_norm * xs[i] - fs[i]).max(-fs[i]);
        }
        Ok(Nonlinearity {
            kind: Kind::Table {
                s: xs,
                f: fs,
                slopes,
            },
            slope_hi: b_norm,
            offset_m: m,
            convex,
            a_tilde,
            b_tilde,
        })
    }

    /// Convolution with the normalized bump ψ_δ supported on [−δ, δ]
    /// (ψ(x) = exp(1/(x²−1)) on (−1,1)), by 32-point Gauss-Legendre
    /// quadrature. Preserves the slope bounds and convexity;
    /// ‖f_δ − f‖∞ ≤ b·δ.
    pub fn mollify(&self, delta: T) -> Result<Self> {
        if !(delta > T::zero()) {
            return Err(Error::Validation(format!("mollify needs delta > 0, got {delta}")));
        }
        let (nodes, weights) = bump_quadrature::<T>(32);
        Ok(Nonlinearity {
            kind: Kind::Mollified {
                base: Box::new(self.kind.clone()),
                delta,
                nodes,
                weights,
            },
            slope_hi: self.slope_hi,
            offset_m: self.offset_m + self.slope_hi * delta,
            convex: self.convex,
            a_tilde: self.a_tilde,
            b_tilde: self.b_tilde,
        })
    }
}

/// Gauss-Legendre nodes and weights on [−1, 1] via Newton iteration on the
/// Legendre recurrence (f64 internally, converted to T).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Quadrature rule for averaging against the normalized bump: returns nodes
/// on [−1, 1] and weights w_k·ψ(x_k) scaled so they sum to exactly 1.
fn bump_quadrature<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let (nodes, weights) = gauss_legendre(n);
    let psi = |x: f64| {
        if x.abs() < 1.0 {
            (1.0 / (x * x - 1.0)).exp()
        } else {
            0.0
        }
    };
    let raw: Vec<f64> = nodes
        .iter()
        .zip(&weights)
        .map(|(&x, &w)| w * psi(x))
        .collect();
    let total: f64 = raw.iter().sum();
    (
        nodes.iter().map(|&x| T::c(x)).collect(),
        raw.iter().map(|&v| T::c(v / total)).collect(),
    )
}

/// Knobs for the sampling-based hypothesis checks.
#[derive(Debug, Clone, Copy)]
pub struct ApParams<T> {
    pub s_lo: T,
    pub s_hi: T,
    pub grid_samples: usize,
    pub pair_samples: usize,
    pub seed: u64,
    /// One-sided window around 0 probed for the excluded affine form
    /// f = λ₁s + β.
    pub degeneracy_window: T,
    pub degeneracy_samples: usize,
}

impl<T: Real> Default for ApParams<T> {
    fn default() -> Self {
        ApParams {
            s_lo: T::c(-10.0),
            s_hi: T::c(10.0),
            grid_samples: 201,
            pair_samples: 10_000,
            seed: 0,
            degeneracy_window: T::one(),
            degeneracy_samples: 64,
        }
    }
}

/// Report of the hypothesis checks; `b_below_b_available` is a warning only.
#[derive(Debug, Clone)]
pub struct ApReport<T> {
    pub slope_min: T,
    pub slope_max: T,
    pub slopes_in_range: bool,
    pub lower_bound_ok: bool,
    pub convexity_ok: bool,
    pub lambda1_below_b: bool,
    pub b_below_b_available: bool,
    pub degenerate_left: bool,
    pub degenerate_right: bool,
    pub resolution: T,
    pub lambda1: T,
    pub b: T,
    pub b_available: T,
}

impl<T: Real> ApReport<T> {
    /// Hard requirements only; the B̃ comparison stays a warning.
    pub fn pass(&self) -> bool {
        self.slopes_in_range
            && self.lower_bound_ok
            && self.convexity_ok
            && self.lambda1_below_b
            && !self.degenerate_left
            && !self.degenerate_right
    }
}

/// Sample the hypotheses: slope bounds, lower linear bound, convexity,
/// λ₁ < b, b < B̃ (warning), and the excluded affine-near-zero form.
pub fn validate_ap<T: Real>(
    f: &Nonlinearity<T>,
    lambda1: T,
    b_available: T,
    params: ApParams<T>,
) -> ApReport<T> {
    let b = f.slope_hi;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let tol = T::c(1e-9) * b.max(T::one());

    let mut slope_min = T::infinity();
    let mut slope_max = T::neg_infinity();
    let mut lower_ok = true;
    let lo = params.s_lo.as_f64();
    let hi = params.s_hi.as_f64();
    let step = (hi - lo) / (params.grid_samples.max(2) - 1) as f64;
    let mut prev: Option<(T, T)> = None;
    for i in 0..params.grid_samples {
        let s = T::c(lo + step * i as f64);
        let fs = f.eval(s);
        if fs < (b * s).max(T::zero()) - f.offset_m - tol {
            lower_ok = false;
        }
        if let Some((sp, fp)) = prev {
            let q = (fs - fp) / (s - sp);
            slope_min = slope_min.min(q);
            slope_max = slope_max.max(q);
        }
        prev = Some((s, fs));
    }
    let mut convex_ok = true;
    for _ in 0..params.pair_samples {
        let x = T::c(rng.gen_range(lo..hi));
        let y = T::c(rng.gen_range(lo..hi));
        if x == y {
            continue;
        }
        let q = (f.eval(x) - f.eval(y)) / (x - y);
        slope_min = slope_min.min(q);
        slope_max = slope_max.max(q);
        let mid = (x + y) / T::c(2.0);
        if f.eval(mid) > (f.eval(x) + f.eval(y)) / T::c(2.0) + tol {
            convex_ok = false;
        }
    }
    let slopes_in_range = slope_min >= -tol && slope_max <= b + tol;

    // degeneracy probe: f ≡ λ₁s + f(0) on a one-sided neighborhood of 0
    let w = params.degeneracy_window;
    let f0 = f.eval(T::zero());
    let deg_tol = T::c(1e-9) * (T::one() + lambda1.abs());
    let probe = |sign: T| {
        let mut affine = true;
        for k in 1..=params.degeneracy_samples {
            let s = sign * w * T::from_usize(k).unwrap()
                / T::from_usize(params.degeneracy_samples).unwrap();
            if (f.eval(s) - lambda1 * s - f0).abs() > deg_tol {
                affine = false;
                break;
            }
        }
        affine
    };
    let degenerate_right = probe(T::one());
    let degenerate_left = probe(-T::one());

    ApReport {
        slope_min,
        slope_max,
        slopes_in_range,
        lower_bound_ok: lower_ok,
        convexity_ok: convex_ok,
        lambda1_below_b: lambda1 < b,
        b_below_b_available: b < b_available,
        degenerate_left,
        degenerate_right,
        resolution: w / T::from_usize(params.degeneracy_samples).unwrap(),
        lambda1,
        b,
        b_available,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_values() {
        let f = Nonlinearity::<f64>::ramp(12.0).unwrap();
        assert_eq!(f.eval(-1.0), 0.0);
        assert_eq!(f.eval(1.0), 12.0);
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.a_tilde, 0.0);
        assert_eq!(f.b_tilde, 12.0);
        assert_eq!(f.offset_m, 0.0);
        // lower bound is an identity for the ramp: f(s) − 12s = 12·max(−s,0)
        for s in [-3.0, -0.1, 0.0, 0.2, 5.0] {
            assert!(f.eval(s) - 12.0 * s >= -1e-12);
            assert!(f.eval(s) >= -1e-12);
        }
        assert!(Nonlinearity::<f64>::ramp(0.0).is_err());
        assert!(Nonlinearity::<f64>::ramp(-3.0).is_err());
    }

    #[test]
    fn smooth_ramp_calculus() {
        // Oracle: f′(s) = (b/2)(1 + s/√(s²+1)) ∈ (0, b), f(0) = 0.
        let b = 12.0;
        let f = Nonlinearity::<f64>::smooth_ramp(b).unwrap();
        assert_eq!(f.eval(0.0), 0.0);
        for s in [-50.0, -1.0, 0.0, 0.3, 2.0, 40.0] {
            let d = f.slope(s);
            assert!(d > 0.0 && d < b);
            let fd = (f.eval(s + 1e-6) - f.eval(s - 1e-6)) / 2e-6;
            assert!((d - fd).abs() < 1e-5);
        }
        assert_eq!(f.offset_m, 6.0);
    }

    #[test]
    fn sampled_difference_quotients_in_range() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for f in [
            Nonlinearity::<f64>::ramp(7.0).unwrap(),
            Nonlinearity::<f64>::smooth_ramp(7.0).unwrap(),
            Nonlinearity::<f64>::ramp(7.0).unwrap().mollify(0.05).unwrap(),
        ] {
            for _ in 0..10_000 {
                let x: f64 = rng.gen_range(-20.0..20.0);
                let y: f64 = rng.gen_range(-20.0..20.0);
                if x == y {
                    continue;
                }
                let q = (f.eval(x) - f.eval(y)) / (x - y);
                assert!(q >= -1e-9 && q <= 7.0 + 1e-9, "q = {q}");
            }
        }
    }

    #[test]
    fn mollify_affine_is_exact() {
        let f = Nonlinearity::<f64>::linear(3.0);
        let fd = f.mollify(0.2).unwrap();
        for s in [-2.0, -0.5, 0.0, 0.1, 1.0, 10.0] {
            assert!((fd.eval(s) - 3.0 * s).abs() < 1e-13);
        }
    }

    #[test]
    fn mollified_ramp_support_and_lipschitz() {
        let b = 12.0;
        let delta = 0.1;
        let f = Nonlinearity::<f64>::ramp(b).unwrap();
        let fd = f.mollify(delta).unwrap();
        // outside the bump support the convolution is exact
        for s in [-5.0f64, -0.2, -0.1000001, 0.1000001, 0.3, 2.0] {
            if s.abs() >= delta {
                assert!(
                    (fd.eval(s) - f.eval(s)).abs() < 1e-12,
                    "s = {s}: {} vs {}",
                    fd.eval(s),
                    f.eval(s)
                );
            }
        }
        // Lipschitz distance bound at the kink
        assert!((fd.eval(0.0) - f.eval(0.0)).abs() <= b * delta);
        // convexity and slope bounds survive mollification
        for s in [-0.2, -0.05, 0.0, 0.03, 0.2] {
            let d = fd.slope(s);
            assert!(d >= -1e-10 && d <= b + 1e-10);
        }
    }

    #[test]
    fn asymptotic_slope_agreement() {
        // |f(±T)/(±T) − slope| ≤ (M + |f(0)|)/T, forced by the linear bounds.
        let t = 1e6;
        for f in [
            Nonlinearity::<f64>::ramp(9.0).unwrap(),
            Nonlinearity::<f64>::smooth_ramp(9.0).unwrap(),
        ] {
            let tol = (f.offset_m + f.eval(0.0).abs()) / t + 1e-9;
            assert!((f.eval(t) / t - f.b_tilde).abs() <= tol);
            assert!((f.eval(-t) / (-t) - f.a_tilde).abs() <= tol);
        }
    }

    #[test]
    fn table_normalization_and_slopes() {
        // raw slopes in [1, 4]; normalization subtracts a = 1
        let pts = vec![(-2.0, -2.0), (0.0, 0.0), (1.0, 3.0), (3.0, 11.0)];
        let f = Nonlinearity::<f64>::table(pts, 1.0, 4.0).unwrap();
        assert_eq!(f.slope_hi, 3.0);
        assert!(f.convex);
        assert_eq!(f.a_tilde, 0.0);
        assert_eq!(f.b_tilde, 3.0);
        assert!((f.eval(0.5) - 1.0).abs() < 1e-14); // (3−1)·0.5 on the [0,1] segment
        assert!((f.eval(10.0) - (8.0 + 3.0 * 7.0)).abs() < 1e-12); // end-slope extension
        // slope outside [a, b] rejected
        assert!(Nonlinearity::<f64>::table(
            vec![(0.0, 0.0), (1.0, 10.0)],
            0.0,
            4.0
        )
        .is_err());
    }

    #[test]
    fn validate_ap_outcomes() {
        let pi2 = std::f64::consts::PI.powi(2);
        // ramp(12) against λ₁ = π²: pass
        let f = Nonlinearity::<f64>::ramp(12.0).unwrap();
        let r = validate_ap(&f, pi2, 4.0 * pi2, ApParams::default());
        assert!(r.pass(), "{r:?}");
        assert!(r.lambda1_below_b && r.b_below_b_available);
        // ramp(8): λ₁ < b fails
        let f = Nonlinearity::<f64>::ramp(8.0).unwrap();
        let r = validate_ap(&f, pi2, 4.0 * pi2, ApParams::default());
        assert!(!r.lambda1_below_b && !r.pass());
        // affine piece with slope λ₁ on (0, 1): degeneracy flagged
        let f = Nonlinearity::<f64>::table(
            vec![(-1.0, -0.1), (0.0, 0.0), (1.0, pi2), (2.0, 2.0 * pi2 + 2.0)],
            0.0,
            13.0,
        )
        .unwrap();
        let r = validate_ap(&f, pi2, 100.0, ApParams::default());
        assert!(r.degenerate_right && !r.pass());
        assert!(!r.degenerate_left);
        // linear f with positive slope: lower bound hypothesis fails
        let f = Nonlinearity::<f64>::linear(2.0);
        let r = validate_ap(&f, 1.0, 100.0, ApParams::default());
        assert!(!r.lower_bound_ok);
    }

    #[test]
    fn gauss_legendre_exactness() {
        // 32 points integrate polynomials up to degree 63 exactly; check a few
        let (x, w) = gauss_legendre(32);
        let int_x2: f64 = x.iter().zip(&w).map(|(&x, &w)| w * x * x).sum();
        assert!((int_x2 - 2.0 / 3.0).abs() < 1e-14);
        let int_x10: f64 = x.iter().zip(&w).map(|(&x, &w)| w * x.powi(10)).sum();
        assert!((int_x10 - 2.0 / 11.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }
}
