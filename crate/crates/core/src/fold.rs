//! Fold exploitation: locate the height maximum T(z) on each fiber, count and
//! compute all solutions of F(u) = g (exactly 2, 1 or 0), falsify the
//! no-three-preimage property, and measure the asymptotic height slopes.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fiber::{FiberPoint, FiberProblem, Projector};
use crate::grid::{discrete_norm, inner_product, GridFunction, NormKind};
use crate::scalar::Real;

/// Scan and refinement knobs.
#[derive(Debug, Clone, Copy)]
pub struct FoldParams<T> {
    pub scan_lo: T,
    pub scan_hi: T,
    pub scan_steps: usize,
    /// Golden-section bracket target relative to the scan width.
    pub golden_rel_tol: T,
    /// Absolute bisection width for root finding on each monotone side.
    pub bisect_tol: T,
    /// Maximum scan-widening passes before declaring a structure failure.
    pub max_widen: usize,
    /// Relative transition band: count 1 when |h_max − h_g| ≤ band.
    pub tol_transition_rel: T,
    pub parallel: bool,
}

impl<T: Real> Default for FoldParams<T> {
    fn default() -> Self {
        FoldParams {
            scan_lo: T::c(-5.0),
            scan_hi: T::c(5.0),
            scan_steps: 101,
            golden_rel_tol: T::c(1e-8),
            bisect_tol: T::c(1e-10),
            max_widen: 48,
            tol_transition_rel: T::c(1e-6),
            parallel: false,
        }
    }
}

/// Location of the fold on one fiber: the argmax T of h̃(z, ·), its value,
/// and the unimodality bookkeeping from the scan.
#[derive(Debug, Clone)]
pub struct FoldReport<T> {
    pub z: GridFunction<T>,
    /// Argmax of the height along the fiber.
    pub t_max: T,
    pub h_max: T,
    pub bracket: [T; 2],
    pub unimodality_violations: usize,
    /// Scan samples (t, h̃) used to locate the maximum.
    pub samples: Vec<(T, T)>,
}

impl<T: Real> FoldReport<T> {
    /// Critical height level: rhs z + h·φ₁ has 2, 1 or 0 solutions according
    /// to h below, at, or above this value.
    pub fn transition_level(&self) -> T {
        self.h_max
    }
}

/// Warm-start cache: nearest previously solved t seeds the next Newton solve.
struct FiberCache<T> {
    entries: Vec<(T, GridFunction<T>)>,
}

impl<T: Real> FiberCache<T> {
    fn new() -> Self {
        FiberCache { entries: Vec::new() }
    }

    fn nearest(&self, t: T) -> Option<&GridFunction<T>> {
        self.entries
            .iter()
            .min_by(|a, b| (a.0 - t).abs().partial_cmp(&(b.0 - t).abs()).unwrap())
            .map(|e| &e.1)
    }

    fn eval(&mut self, prob: &FiberProblem<T>, z: &GridFunction<T>, t: T) -> Result<FiberPoint<T>> {
        let point = prob.solve(z, t, self.nearest(t))?;
        if self.entries.len() > 512 {
            self.entries.drain(0..256);
        }
        self.entries.push((t, point.w.clone()));
        Ok(point)
    }
}

/// The z-independent intercept C of the height bounds
/// h̃ ≤ (λ₁ − b)t + C and h̃ ≤ λ₁ t + C.
fn height_intercept<T: Real>(prob: &FiberProblem<T>) -> Result<T> {
    let ones = GridFunction::constant(prob.grid().clone(), T::one());
    let pair = inner_product(&ones, &prob.eigen.phi1_star)?;
    Ok(prob.f.offset_m * pair)
}

/// Admissible t-window for any point with height ≥ level, from the linear
/// height bounds; `None` on the right when b ≤ λ₁ (no fold).
fn height_window<T: Real>(prob: &FiberProblem<T>, c: T, level: T) -> (T, Option<T>) {
    let lam = prob.eigen.lambda1;
    let lo = (level - c) / lam - T::one();
    let hi = if prob.f.slope_hi > lam {
        Some((c - level) / (prob.f.slope_hi - lam) + T::one())
    } else {
        None
    };
    (lo, hi)
}

fn classify_type(left_down: bool, right_down: bool) -> &'static str {
    match (left_down, right_down) {
        (true, true) => "-|s|",
        (true, false) => "s",
        (false, true) => "-s",
        (false, false) => "|s|",
    }
}

/// Locate the fold transition on the fiber of z: coarse scan (auto-widened
/// until the height decreases at both ends), unimodality audit, then
/// golden-section refinement of the maximum.
pub fn find_fold<T: Real>(
    prob: &FiberProblem<T>,
    z: &GridFunction<T>,
    params: &FoldParams<T>,
) -> Result<FoldReport<T>> {
    let mut cache = FiberCache::new();
    let c = height_intercept(prob)?;
    let steps = params.scan_steps.max(5);
    let (mut lo, mut hi) = (params.scan_lo, params.scan_hi);
    if !(hi > lo) {
        return Err(Error::Validation("empty scan bracket".into()));
    }

    let mut ts: Vec<T>;
    let mut hs: Vec<T>;
    let mut widen = 0usize;
    loop {
        ts = (0..steps)
            .map(|i| lo + (hi - lo) * T::from_usize(i).unwrap() / T::from_usize(steps - 1).unwrap())
            .collect();
        hs = Vec::with_capacity(steps);
        for &t in &ts {
            hs.push(cache.eval(prob, z, t)?.height);
        }
        let mut k = 0usize;
        for (i, &h) in hs.iter().enumerate() {
            if h > hs[k] {
                k = i;
            }
        }
        let left_down = k > 0;
        let right_down = k < steps - 1;
        if left_down && right_down {
            break;
        }
        widen += 1;
        // linear bounds cap the region where the maximum can sit
        let (cap_lo, cap_hi) = height_window(prob, c, hs[k]);
        let width = hi - lo;
        if !left_down {
            lo -= width;
        }
        if !right_down {
            hi += width;
        }
        let capped_out = match cap_hi {
            Some(ch) => lo < cap_lo - width && hi > ch + width,
            None => false,
        };
        if widen > params.max_widen || capped_out {
            return Err(Error::Structure(format!(
                "height is not of fold type -|s| on this fiber: observed type {} \
                 after {widen} widenings (b <= lambda1?)",
                classify_type(left_down, right_down)
            )));
        }
    }

    // unimodality audit relative to the scan argmax
    let mut k = 0usize;
    for (i, &h) in hs.iter().enumerate() {
        if h > hs[k] {
            k = i;
        }
    }
    let mut violations = 0usize;
    for i in 0..hs.len() - 1 {
        if i < k && hs[i + 1] <= hs[i] {
            violations += 1;
        }
        if i >= k && hs[i + 1] >= hs[i] {
            violations += 1;
        }
    }

    // golden-section refinement of the maximum on [t_{k-1}, t_{k+1}]
    let phi = T::c(0.618_033_988_749_894_9);
    let mut a = ts[k - 1];
    let mut b = ts[k + 1];
    let tol = params.golden_rel_tol * (hi - lo);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = cache.eval(prob, z, x1)?.height;
    let mut f2 = cache.eval(prob, z, x2)?.height;
    let mut best = if f1 > f2 { (x1, f1) } else { (x2, f2) };
    if hs[k] > best.1 {
        best = (ts[k], hs[k]);
    }
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = cache.eval(prob, z, x2)?.height;
            if f2 > best.1 {
                best = (x2, f2);
            }
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = cache.eval(prob, z, x1)?.height;
            if f1 > best.1 {
                best = (x1, f1);
            }
        }
    }

    Ok(FoldReport {
        z: z.clone(),
        t_max: best.0,
        h_max: best.1,
        bracket: [lo, hi],
        unimodality_violations: violations,
        samples: ts.into_iter().zip(hs).collect(),
    })
}

/// The complete solution set of F(u) = g.
#[derive(Debug, Clone)]
pub struct SolutionSet<T> {
    pub rhs: GridFunction<T>,
    pub count: usize,
    /// Solutions ordered by their fiber parameter t.
    pub solutions: Vec<GridFunction<T>>,
    pub t_values: Vec<T>,
    /// h_max − h_g: positive for two solutions, ~0 at the transition,
    /// negative for none.
    pub transition_margin: T,
}

fn bisect_root<T: Real>(
    cache: &mut FiberCache<T>,
    prob: &FiberProblem<T>,
    z: &GridFunction<T>,
    level: T,
    mut lo: T,
    mut hi: T,
    increasing: bool,
    tol: T,
) -> Result<T> {
    // invariant: h(lo) − level and h(hi) − level have opposite signs
    while hi - lo > tol {
        let mid = (lo + hi) / T::c(2.0);
        if mid <= lo || mid >= hi {
            break; // spacing limit
        }
        let h = cache.eval(prob, z, mid)?.height;
        let below = h < level;
        if below == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / T::c(2.0))
}

/// Project g, locate the fold on its fiber, and return all solutions:
/// two below the transition level, one at it, none above.
pub fn count_and_solve<T: Real>(
    prob: &FiberProblem<T>,
    g: &GridFunction<T>,
    tol_transition: Option<T>,
    params: &FoldParams<T>,
) -> Result<SolutionSet<T>> {
    let proj = Projector::new(prob.eigen);
    let (z_g, h_g) = proj.project(g)?;
    let report = find_fold(prob, &z_g, params)?;
    let band = tol_transition
        .unwrap_or(params.tol_transition_rel * report.h_max.abs().max(T::one()));
    let margin = report.h_max - h_g;

    let mut cache = FiberCache::new();

    if margin < -band {
        return Ok(SolutionSet {
            rhs: g.clone(),
            count: 0,
            solutions: Vec::new(),
            t_values: Vec::new(),
            transition_margin: margin,
        });
    }
    if margin.abs() <= band {
        let p = cache.eval(prob, &z_g, report.t_max)?;
        return Ok(SolutionSet {
            rhs: g.clone(),
            count: 1,
            solutions: vec![p.u],
            t_values: vec![p.t],
            transition_margin: margin,
        });
    }

    // two solutions: one root on each monotone side of t_max
    let c = height_intercept(prob)?;
    let lam = prob.eigen.lambda1;
    let b = prob.f.slope_hi;

    // left bracket: h(t) ≤ λ₁t + C < h_g for t small enough
    let mut t_lo = ((h_g - c) / lam - T::one()).min(report.t_max - T::one());
    let mut bracketed = false;
    for _ in 0..=params.max_widen {
        if cache.eval(prob, &z_g, t_lo)?.height < h_g {
            bracketed = true;
            break;
        }
        t_lo = report.t_max - (report.t_max - t_lo) * T::c(2.0);
    }
    if !bracketed {
        return Err(Error::Structure(
            "left root bracket failure: height never drops below the target level".into(),
        ));
    }
    let t1 = bisect_root(
        &mut cache,
        prob,
        &z_g,
        h_g,
        t_lo,
        report.t_max,
        true,
        params.bisect_tol,
    )?;

    // right bracket: h(t) ≤ (λ₁ − b)t + C < h_g for t large enough
    let mut t_hi = ((c - h_g) / (b - lam) + T::one()).max(report.t_max + T::one());
    let mut bracketed = false;
    for _ in 0..=params.max_widen {
        if cache.eval(prob, &z_g, t_hi)?.height < h_g {
            bracketed = true;
            break;
        }
        t_hi = report.t_max + (t_hi - report.t_max) * T::c(2.0);
    }
    if !bracketed {
        return Err(Error::Structure(
            "right root bracket failure: height never drops below the target level".into(),
        ));
    }
    let t2 = bisect_root(
        &mut cache,
        prob,
        &z_g,
        h_g,
        report.t_max,
        t_hi,
        false,
        params.bisect_tol,
    )?;

    let p1 = cache.eval(prob, &z_g, t1)?;
    let p2 = cache.eval(prob, &z_g, t2)?;
    Ok(SolutionSet {
        rhs: g.clone(),
        count: 2,
        solutions: vec![p1.u, p2.u],
        t_values: vec![t1, t2],
        transition_margin: margin,
    })
}

/// Multiplicity along the line g = z₀ + t·φ₁: one fold solve classifies every
/// t by its height level. Returns (t, count, margin) per scan point.
pub fn scan_multiplicity<T: Real>(
    prob: &FiberProblem<T>,
    z0: &GridFunction<T>,
    t_values: &[T],
    tol_transition: Option<T>,
    params: &FoldParams<T>,
) -> Result<Vec<(T, usize, T)>> {
    let proj = Projector::new(prob.eigen);
    let (z_g, h_off) = proj.project(z0)?;
    let report = find_fold(prob, &z_g, params)?;
    let band = tol_transition
        .unwrap_or(params.tol_transition_rel * report.h_max.abs().max(T::one()));
    Ok(t_values
        .iter()
        .map(|&t| {
            let h_g = t + h_off;
            let margin = report.h_max - h_g;
            let count = if margin < -band {
                0
            } else if margin.abs() <= band {
                1
            } else {
                2
            };
            (t, count, margin)
        })
        .collect())
}

/// Root-count audit for one (z, level) pair.
#[derive(Debug, Clone)]
pub struct PreimageCount<T> {
    pub level: T,
    pub count: usize,
}

/// Report of the no-three-preimage falsifier.
#[derive(Debug, Clone)]
pub struct NoThreeReport<T> {
    pub counts: Vec<PreimageCount<T>>,
    pub max_count: usize,
    /// Indices of samples with more than two roots (expected empty).
    pub violations: Vec<usize>,
}

/// Scan-based falsifier for the no-three-preimage property: counts sign
/// changes of h̃(z, ·) − level on a dense grid over the admissible window.
pub fn check_no_three<T: Real>(
    prob: &FiberProblem<T>,
    pairs: &[(GridFunction<T>, T)],
    scan_steps: usize,
    params: &FoldParams<T>,
) -> Result<NoThreeReport<T>> {
    let c = height_intercept(prob)?;
    let count_one = |(z, level): &(GridFunction<T>, T)| -> Result<usize> {
        let (lo, hi) = height_window(prob, c, *level);
        let hi = hi.ok_or_else(|| {
            Error::Structure("no right bound: b <= lambda1, heights do not fold".into())
        })?;
        let steps = scan_steps.max(16);
        let mut cache = FiberCache::new();
        let mut prev: Option<T> = None;
        let mut count = 0usize;
        for i in 0..steps {
            let t = lo
                + (hi - lo) * T::from_usize(i).unwrap() / T::from_usize(steps - 1).unwrap();
            let h = cache.eval(prob, z, t)?.height - *level;
            if let Some(ph) = prev {
                let crossing = (ph < T::zero() && h > T::zero())
                    || (ph > T::zero() && h < T::zero())
                    || (h == T::zero() && ph != T::zero());
                if crossing {
                    count += 1;
                }
            }
            prev = Some(h);
        }
        Ok(count)
    };

    let counts: Result<Vec<usize>> = if params.parallel {
        pairs.par_iter().map(count_one).collect()
    } else {
        pairs.iter().map(count_one).collect()
    };
    let counts = counts?;
    let mut report = NoThreeReport {
        counts: Vec::with_capacity(pairs.len()),
        max_count: 0,
        violations: Vec::new(),
    };
    for (i, (&n, (_, level))) in counts.iter().zip(pairs).enumerate() {
        report.max_count = report.max_count.max(n);
        if n > 2 {
            report.violations.push(i);
        }
        report.counts.push(PreimageCount { level: *level, count: n });
    }
    Ok(report)
}

/// Asymptotic height slopes h̃(z, ±T)/(±T) and the directional deviation
/// ‖u(z, ±T)/(±T) − φ₁‖ of the fiber from the φ₁ axis.
#[derive(Debug, Clone)]
pub struct AsymptoticSlopes<T> {
    pub slope_minus: T,
    pub slope_plus: T,
    pub direction_err_minus: T,
    pub direction_err_plus: T,
}

pub fn asymptotic_slopes<T: Real>(
    prob: &FiberProblem<T>,
    z: &GridFunction<T>,
    t_large: T,
) -> Result<AsymptoticSlopes<T>> {
    if !(t_large > T::zero()) {
        return Err(Error::Validation("t_large must be positive".into()));
    }
    let p = prob.grid().default_p();
    let minus = prob.solve(z, -t_large, None)?;
    let plus = prob.solve(z, t_large, None)?;
    let dir_err = |pt: &FiberPoint<T>| {
        let mut d = pt.u.clone();
        d.scale(T::one() / pt.t);
        d.add_scaled(-T::one(), &prob.eigen.phi1);
        discrete_norm(&d, NormKind::W2p(p))
    };
    Ok(AsymptoticSlopes {
        slope_minus: minus.height / (-t_large),
        slope_plus: plus.height / t_large,
        direction_err_minus: dir_err(&minus),
        direction_err_plus: dir_err(&plus),
    })
}

/// The two shift parameters defining the normal-form changes of variables
/// τ₁(z, t) = (z, t + T) and τ₂(z, s) = (z, s − h_max).
#[derive(Debug, Clone, Copy)]
pub struct NormalFormShift<T> {
    pub t_shift: T,
    pub h_shift: T,
}

/// Extract the shifts from a fold report of type −|s|.
pub fn normal_form_shift<T: Real>(report: &FoldReport<T>) -> Result<NormalFormShift<T>> {
    if report.unimodality_violations > 0 {
        return Err(Error::Structure(format!(
            "fold report has {} unimodality violations; not of type -|s|",
            report.unimodality_violations
        )));
    }
    Ok(NormalFormShift {
        t_shift: report.t_max,
        h_shift: report.h_max,
    })
}

/// Shifted height ĥ(s) = h̃(z, s + T) − h_max; ĥ(0) = 0 and ĥ < 0 away from 0.
pub fn shifted_height<T: Real>(
    prob: &FiberProblem<T>,
    report: &FoldReport<T>,
    s: T,
) -> Result<T> {
    let p = prob.solve(&report.z, s + report.t_max, None)?;
    Ok(p.height - report.h_max)
}
