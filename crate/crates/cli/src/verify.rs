//! The `verify` subcommand: runs the invariant suite on a configuration and
//! reports one pass/fail line per check.

use anyhow::Result;
use serde::Serialize;

use apfold_core::fiber::{
    random_grid_function, random_w, random_z, FiberParams, FiberProblem, Projector,
};
use apfold_core::fold::{
    check_no_three, count_and_solve, find_fold, normal_form_shift, scan_multiplicity,
    shifted_height, FoldParams,
};
use apfold_core::grid::{discrete_norm, inner_product, GridFunction, NormKind};
use apfold_core::nonlinearity::{validate_ap, ApParams};
use apfold_core::operator::{adjoint, DiscreteOperator};
use apfold_core::spectral::{
    check_monotonicity, collatz_upper_bound, estimate_b_tilde, hopf_ratio, mask_below,
    principal_eigenpair, subdomain_lambda1, EigParams, Eigenpair,
};

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Warn,
    Fail,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

pub struct VerifyOutcome {
    pub checks: Vec<Check>,
    pub failed: usize,
}

fn push(checks: &mut Vec<Check>, name: &str, ok: bool, detail: String) {
    checks.push(Check {
        name: name.to_string(),
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    });
}

fn push_status(checks: &mut Vec<Check>, name: &str, status: Status, detail: String) {
    checks.push(Check {
        name: name.to_string(),
        status,
        detail,
    });
}

/// Run every invariant check on the configured problem.
pub fn run_verify(cfg: &RunConfig, parallel: bool) -> Result<VerifyOutcome> {
    let mut checks = Vec::new();
    let grid = cfg.build_grid()?;
    let op = cfg.build_operator(&grid)?;
    let f = cfg.build_nonlinearity()?;
    let eig_params = EigParams {
        tol: cfg.solver.eig_tol,
        max_iter: cfg.solver.eig_max_iter,
    };
    let eigen = principal_eigenpair(&op, eig_params)?;
    let seed = cfg.solver.seed;

    eigen_checks(&mut checks, &op, &eigen, eig_params);
    let b_tilde = spectral_law_checks(&mut checks, &op, &eigen, eig_params)?;
    ap_checks(&mut checks, cfg, &f, &eigen, b_tilde, seed);

    let fiber_params = FiberParams {
        tol: cfg.solver.newton_tol,
        max_iter: cfg.solver.newton_max_iter,
        ..Default::default()
    };
    let prob = FiberProblem::new(&op, &eigen, &f, fiber_params)?;
    let fold_params = FoldParams {
        scan_lo: cfg.solver.scan_t_lo,
        scan_hi: cfg.solver.scan_t_hi,
        scan_steps: cfg.solver.scan_steps,
        golden_rel_tol: cfg.solver.golden_rel_tol,
        bisect_tol: cfg.solver.bisect_tol,
        tol_transition_rel: cfg.solver.tol_transition_rel,
        parallel,
        ..Default::default()
    };

    // hypothesis failures surface as failed checks, not hard errors
    if let Err(e) = fiber_checks(&mut checks, &prob, seed) {
        push(&mut checks, "fiber_suite", false, format!("{e}"));
    }
    if let Err(e) = fold_checks(&mut checks, cfg, &prob, &fold_params, seed, parallel) {
        push(&mut checks, "fold_suite", false, format!("{e}"));
    }

    let failed = checks.iter().filter(|c| c.status == Status::Fail).count();
    Ok(VerifyOutcome { checks, failed })
}

fn eigen_checks(
    checks: &mut Vec<Check>,
    op: &DiscreteOperator<f64>,
    eigen: &Eigenpair<f64>,
    eig_params: EigParams<f64>,
) {
    let res = eigen.residual_sup[0].max(eigen.residual_sup[1]);
    push(
        checks,
        "eigen_residual",
        res <= 1e-8,
        format!("sup residual {res:e}"),
    );
    let positive = eigen.phi1.values().iter().all(|&v| v > 0.0)
        && eigen.phi1_star.values().iter().all(|&v| v > 0.0);
    push(
        checks,
        "eigen_positivity",
        positive,
        "phi1 > 0 and phi1* > 0 on the interior".into(),
    );

    match principal_eigenpair(&adjoint(op), eig_params) {
        Ok(adj) => {
            let gap = (adj.lambda1 - eigen.lambda1).abs();
            push(
                checks,
                "adjoint_lambda_match",
                gap <= 1e-8 * eigen.lambda1.abs().max(1.0),
                format!("lambda1 = {}, adjoint gap {gap:e}", eigen.lambda1),
            );
        }
        Err(e) => push(checks, "adjoint_lambda_match", false, format!("{e}")),
    }

    let hopf = hopf_ratio(op.grid(), &eigen.phi1);
    push(
        checks,
        "hopf_ratio_positive",
        hopf > 0.0,
        format!("min phi1/d = {hopf:e}"),
    );

    match collatz_upper_bound(op, &eigen.phi1) {
        Ok(bound) => push(
            checks,
            "eigenvalue_upper_bound",
            eigen.lambda1 <= bound + 1e-8,
            format!("lambda1 = {} <= certificate {}", eigen.lambda1, bound),
        ),
        Err(e) => push(checks, "eigenvalue_upper_bound", false, format!("{e}")),
    }
}

fn spectral_law_checks(
    checks: &mut Vec<Check>,
    op: &DiscreteOperator<f64>,
    eigen: &Eigenpair<f64>,
    eig_params: EigParams<f64>,
) -> Result<f64> {
    let grid = op.grid();
    // zero-order monotonicity with a half-domain unit indicator
    let mid = (grid.domain.bounds[0][0] + grid.domain.bounds[0][1]) / 2.0;
    let half = GridFunction::sample(grid.clone(), |x| if x[0] < mid { 1.0 } else { 0.0 });
    match check_monotonicity(op, &half, eig_params) {
        Ok((base, pert)) => push(
            checks,
            "potential_monotonicity",
            pert > base && pert < base + 1.0,
            format!("lambda1 {base} -> {pert} under the half indicator"),
        ),
        Err(e) => push(checks, "potential_monotonicity", false, format!("{e}")),
    }

    // domain monotonicity on an 80% slab
    let cut = grid.domain.bounds[0][0] + 0.8 * (grid.domain.bounds[0][1] - grid.domain.bounds[0][0]);
    let sub = mask_below(grid, 0, cut);
    match subdomain_lambda1(op, &sub, eig_params) {
        Ok(lam_sub) => push(
            checks,
            "domain_monotonicity",
            lam_sub > eigen.lambda1,
            format!("lambda1({}) = {lam_sub} > {}", "sub-slab", eigen.lambda1),
        ),
        Err(e) => push(checks, "domain_monotonicity", false, format!("{e}")),
    }

    let est = estimate_b_tilde(op, eig_params)?;
    push(
        checks,
        "b_tilde_above_lambda1",
        est.value > est.lambda1 && est.heuristic,
        format!(
            "B~ = {} (eta = {}, minimizer {})",
            est.value, est.eta, est.minimizer
        ),
    );
    Ok(est.value)
}

fn ap_checks(
    checks: &mut Vec<Check>,
    cfg: &RunConfig,
    f: &apfold_core::nonlinearity::Nonlinearity<f64>,
    eigen: &Eigenpair<f64>,
    b_tilde: f64,
    seed: u64,
) {
    let report = validate_ap(
        f,
        eigen.lambda1,
        b_tilde,
        ApParams {
            seed,
            ..Default::default()
        },
    );
    push(
        checks,
        "ap_slope_bounds",
        report.slopes_in_range && report.lower_bound_ok,
        format!(
            "sampled slopes [{}, {}] in [0, {}], lower bound ok = {}",
            report.slope_min, report.slope_max, report.b, report.lower_bound_ok
        ),
    );
    push(
        checks,
        "ap_convexity",
        report.convexity_ok,
        "midpoint convexity on sampled pairs".into(),
    );
    push(
        checks,
        "ap_lambda1_below_b",
        report.lambda1_below_b,
        format!("lambda1 = {} < b = {}", report.lambda1, report.b),
    );
    push_status(
        checks,
        "ap_b_below_b_tilde",
        if report.b_below_b_available {
            Status::Pass
        } else {
            Status::Warn
        },
        format!(
            "b = {} vs B~ = {} (heuristic bound; warning only)",
            report.b, report.b_available
        ),
    );
    push(
        checks,
        "ap_not_affine_near_zero",
        !report.degenerate_left && !report.degenerate_right,
        format!("probe resolution {}", report.resolution),
    );
    let _ = cfg;
}

fn fiber_checks(checks: &mut Vec<Check>, prob: &FiberProblem<f64>, seed: u64) -> Result<()> {
    let grid = prob.grid();
    let eigen = prob.eigen;
    let proj = Projector::new(eigen);
    let p = grid.default_p();

    // projector idempotence on seeded samples
    let mut worst = 0.0f64;
    for k in 0..8u64 {
        let g = random_grid_function(grid, seed ^ (0xa11 + k));
        let scale = discrete_norm(&g, NormKind::Sup).max(1.0);
        let (z, _) = proj.project(&g)?;
        let (zz, hz) = proj.project(&z)?;
        let mut d = zz;
        d.add_scaled(-1.0, &z);
        worst = worst
            .max(discrete_norm(&d, NormKind::Sup) / scale)
            .max(hz.abs() / scale);
    }
    push(
        checks,
        "projector_idempotent",
        worst <= 1e-11,
        format!("worst relative defect {worst:e}"),
    );

    // fiber residual identity and height cross-identity at moderate t
    let z = random_z(grid, eigen, seed, 1.0)?;
    let mut worst_res = 0.0f64;
    let mut worst_cross = 0.0f64;
    for &t in &[-2.0, -0.5, 0.0, 0.5, 2.0] {
        let pt = prob.solve(&z, t, None)?;
        let mut fop = prob.op.matrix().negated().apply(pt.u.values());
        for (i, v) in fop.iter_mut().enumerate() {
            *v -= prob.f.eval(pt.u.values()[i]);
        }
        let mut res = 0.0f64;
        for i in 0..fop.len() {
            res = res
                .max((fop[i] - z.values()[i] - pt.height * eigen.phi1.values()[i]).abs());
        }
        worst_res = worst_res.max(res);
        let fu: Vec<f64> = pt.u.values().iter().map(|&v| prob.f.eval(v)).collect();
        let fu = GridFunction::from_values(grid.clone(), fu)?;
        let alt = eigen.lambda1 * t - inner_product(&fu, &eigen.phi1_star)?;
        worst_cross = worst_cross.max((pt.height - alt).abs());
    }
    let tol = prob.params.tol;
    push(
        checks,
        "fiber_residual_identity",
        worst_res <= 10.0 * tol,
        format!("worst residual {worst_res:e}"),
    );
    push(
        checks,
        "height_cross_identity",
        worst_cross <= 10.0 * tol,
        format!("worst formula gap {worst_cross:e}"),
    );

    // height decay at |t| = 100
    let mut decay_ok = true;
    for s in 0..3u64 {
        let z = random_z(grid, eigen, seed.wrapping_add(s), 1.0)?;
        let h0 = prob.solve(&z, 0.0, None)?.height;
        let hp = prob.solve(&z, 100.0, None)?.height;
        let hm = prob.solve(&z, -100.0, None)?.height;
        decay_ok &= hp < h0 && hm < h0;
    }
    push(
        checks,
        "height_decay",
        decay_ok,
        "h(z, +/-100) < h(z, 0) on seeded z".into(),
    );

    // verticality ratio halves from |t| = 10 to 100
    let z = random_z(grid, eigen, seed, 1.0)?;
    let ratio = |t: f64| -> Result<f64> {
        let pt = prob.solve(&z, t, None)?;
        Ok(discrete_norm(&pt.w, NormKind::W2p(p)) / t.abs())
    };
    let vert_ok = ratio(100.0)? <= 0.5 * ratio(10.0)? && ratio(-100.0)? <= 0.5 * ratio(-10.0)?;
    push(
        checks,
        "fiber_verticality",
        vert_ok,
        "w-norm ratio at |t|=100 at most half of |t|=10".into(),
    );

    // uniform-in-z Lipschitz diagnostic
    let ts: Vec<f64> = (0..11).map(|k| -1.0 + 0.2 * k as f64).collect();
    let mut lips = Vec::new();
    for s in 0..5u64 {
        let z = random_z(grid, eigen, seed.wrapping_add(100 + s), 1.0)?;
        lips.push(prob.trace(&z, &ts)?.lipschitz);
    }
    let lmax = lips.iter().cloned().fold(0.0f64, f64::max);
    let lmin = lips.iter().cloned().fold(f64::INFINITY, f64::min);
    push(
        checks,
        "fiber_lipschitz_uniform",
        lmax.is_finite() && lmax <= 100.0 * lmin.max(1e-3),
        format!("sampled Lipschitz range [{lmin}, {lmax}]"),
    );

    // sampled equivalence ratio of ‖g‖ against ‖Pg‖ + |h|·‖φ₁‖; the constant
    // is not assumed anywhere, only reported
    let mut rmin = f64::INFINITY;
    let mut rmax = 0.0f64;
    for k in 0..8u64 {
        let g = random_grid_function(grid, seed ^ 0x9e3 ^ k);
        let (z, h) = proj.project(&g)?;
        let num = discrete_norm(&g, NormKind::Lp(p));
        let den = discrete_norm(&z, NormKind::Lp(p))
            + h.abs() * discrete_norm(&eigen.phi1, NormKind::Lp(p));
        if den > 0.0 {
            let r = num / den;
            rmin = rmin.min(r);
            rmax = rmax.max(r);
        }
    }
    push(
        checks,
        "norm_equivalence_ratio",
        rmin > 0.0 && rmax.is_finite(),
        format!("sampled ratio range [{rmin}, {rmax}] (reported, not assumed)"),
    );
    Ok(())
}


fn fold_checks(
    checks: &mut Vec<Check>,
    cfg: &RunConfig,
    prob: &FiberProblem<f64>,
    fold_params: &FoldParams<f64>,
    seed: u64,
    parallel: bool,
) -> Result<()> {
    let grid = prob.grid();
    let eigen = prob.eigen;

    // fold location, unimodality audit and normal form shifts
    let z = random_z(grid, eigen, seed, 1.0)?;
    let report = find_fold(prob, &z, fold_params)?;
    push(
        checks,
        "height_unimodal",
        report.unimodality_violations == 0,
        format!(
            "T = {}, h_max = {}, violations {}",
            report.t_max, report.h_max, report.unimodality_violations
        ),
    );
    match normal_form_shift(&report) {
        Ok(shift) => {
            let h0 = shifted_height(prob, &report, 0.0)?;
            let hp = shifted_height(prob, &report, 1.0)?;
            let hm = shifted_height(prob, &report, -1.0)?;
            push(
                checks,
                "normal_form_shifts",
                h0.abs() <= 1e-6 * (1.0 + shift.h_shift.abs()) && hp < 0.0 && hm < 0.0,
                format!("shifted height at (0, +1, -1) = ({h0:e}, {hp}, {hm})"),
            );
        }
        Err(e) => push(checks, "normal_form_shifts", false, format!("{e}")),
    }

    // multiplicity pattern along the z fiber line
    let steps = 21usize;
    let lo = report.h_max - 2.0;
    let hi = report.h_max + 2.0;
    let levels: Vec<f64> = (0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect();
    // scan the rhs line z + t phi1
    let rows = scan_multiplicity(prob, &z, &levels, None, fold_params)?;
    let counts: Vec<usize> = rows.iter().map(|r| r.1).collect();
    let monotone = counts.windows(2).all(|w| w[1] <= w[0]);
    let ones = counts.iter().filter(|&&c| c == 1).count();
    push(
        checks,
        "multiplicity_pattern",
        monotone && ones <= 1 && counts[0] == 2 && *counts.last().unwrap() == 0,
        format!("counts along the line: {counts:?}"),
    );

    // two-solution ordering and the nodewise potential bound
    let mut g = z.clone();
    g.add_scaled(report.h_max - 2.0, &eigen.phi1);
    let set = count_and_solve(prob, &g, None, fold_params)?;
    if set.count == 2 {
        let (u1, u2) = (&set.solutions[0], &set.solutions[1]);
        let mut ordered = true;
        let mut potential_ok = true;
        for i in 0..u1.len() {
            let d = u2.values()[i] - u1.values()[i];
            if d <= 0.0 {
                ordered = false;
                break;
            }
            let v = (prob.f.eval(u2.values()[i]) - prob.f.eval(u1.values()[i])) / d;
            if v < -1e-9 || v > prob.f.slope_hi + 1e-9 {
                potential_ok = false;
            }
        }
        push(
            checks,
            "two_solution_ordering",
            ordered && potential_ok,
            format!(
                "u2 > u1 nodewise: {ordered}; potential in [0, {}]: {potential_ok}",
                prob.f.slope_hi
            ),
        );
    } else {
        push(
            checks,
            "two_solution_ordering",
            false,
            format!("expected 2 solutions below the fold, got {}", set.count),
        );
    }

    // no-three-preimage falsifier
    let pairs: Vec<(GridFunction<f64>, f64)> = (0..cfg.solver.no_three_pairs as u64)
        .map(|k| {
            let z = random_z(grid, eigen, seed.wrapping_add(1000 + k), 1.0)?;
            let level = report.h_max - 0.3 * (k as f64 + 1.0);
            Ok((z, level))
        })
        .collect::<Result<_>>()?;
    let nt = check_no_three(prob, &pairs, cfg.solver.no_three_scan_steps, fold_params)?;
    push(
        checks,
        "no_three_preimages",
        nt.violations.is_empty(),
        format!(
            "max root count {} over {} sampled (z, level) pairs",
            nt.max_count,
            pairs.len()
        ),
    );

    // fold location continuity in z
    let dir = random_w(grid, eigen, seed ^ 0x7c)?;
    let mut devs = Vec::new();
    for eps in [1e-1, 1e-2] {
        let mut zp = z.clone();
        zp.add_scaled(eps, &dir);
        let rp = find_fold(prob, &zp, fold_params)?;
        devs.push((rp.t_max - report.t_max).abs());
    }
    push(
        checks,
        "fold_location_continuity",
        devs[1] <= devs[0] + 1e-7,
        format!("|T(z + eps w) - T(z)| at eps = 1e-1, 1e-2: {devs:?}"),
    );

    // coercivity sampling
    let sample = prob.coercivity_sample(cfg.solver.coercivity_trials, seed)?;
    push(
        checks,
        "coercivity_positive",
        sample.c_emp > 0.0,
        format!("c_emp = {} over {} pairs", sample.c_emp, sample.trials),
    );
    let _ = parallel;
    Ok(())
}
