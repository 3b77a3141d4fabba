//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//! Golden values are analytically derived (interval spectra, closed-form
//! fibers of the ramp nonlinearity) or cross-checked by independent oracles
//! (dense multi-start Newton on the full nonlinear system).

use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use apfold_core::fiber::{random_z, FiberParams, FiberProblem};
use apfold_core::fold::{count_and_solve, find_fold, scan_multiplicity, FoldParams};
use apfold_core::grid::{discrete_norm, inner_product, Grid, GridFunction, NormKind};
use apfold_core::linalg::factor;
use apfold_core::nonlinearity::Nonlinearity;
use apfold_core::operator::{adjoint, assemble, CoefficientField, DiscreteOperator};
use apfold_core::spectral::{
    check_monotonicity, estimate_b_tilde, mask_below, principal_eigenpair, subdomain_lambda1,
    EigParams, Eigenpair,
};

use apfold_cli::config::load_config;

const PI: f64 = std::f64::consts::PI;

struct Criterion {
    name: &'static str,
}

impl Criterion {
    fn new(name: &'static str) -> Self {
        Criterion { name }
    }

    fn check(&self, ok: bool, detail: &str) {
        if ok {
            println!("[PASS] {} — {detail}", self.name);
        } else {
            println!("[FAIL] {} — {detail}", self.name);
        }
        assert!(ok, "{} failed: {detail}", self.name);
    }
}

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn shipped_configs() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(configs_dir())
        .expect("configs directory")
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension().map(|x| x == "toml") == Some(true)).then_some(p)
        })
        .collect();
    v.sort();
    assert!(v.len() >= 4, "expected shipped configs, found {v:?}");
    v
}

fn laplace_1d(n: usize) -> DiscreteOperator<f64> {
    let grid = Grid::<f64>::unit_interval(n).unwrap();
    let coeffs = CoefficientField::laplacian(&grid).unwrap();
    assemble(grid, coeffs).unwrap()
}

fn drift_1d(n: usize, beta: f64) -> DiscreteOperator<f64> {
    let grid = Grid::<f64>::unit_interval(n).unwrap();
    let coeffs = CoefficientField::constant(&grid, [1.0, 0.0, 1.0], [beta, 0.0], 0.0).unwrap();
    assemble(grid, coeffs).unwrap()
}

fn eigenpair(op: &DiscreteOperator<f64>) -> Eigenpair<f64> {
    principal_eigenpair(op, EigParams::default()).unwrap()
}

#[test]
fn criterion_01_eigenvalue_accuracy() {
    let c = Criterion::new("criterion 1: eigenvalue accuracy");
    let t0 = Instant::now();
    let lap = eigenpair(&laplace_1d(200));
    let lap_time = t0.elapsed();
    let e_lap = (lap.lambda1 - PI * PI).abs();

    let t1 = Instant::now();
    let dr = eigenpair(&drift_1d(200, 2.0));
    let dr_time = t1.elapsed();
    let e_dr = (dr.lambda1 - (PI * PI + 1.0)).abs();

    c.check(
        e_lap <= 1e-3 && e_dr <= 1e-2 && lap_time.as_secs_f64() < 1.0 && dr_time.as_secs_f64() < 1.0,
        &format!(
            "|lambda1 - pi^2| = {e_lap:.2e} (<= 1e-3), |lambda1 - (pi^2+1)| = {e_dr:.2e} \
             (<= 1e-2), runtimes {:.3}s / {:.3}s",
            lap_time.as_secs_f64(),
            dr_time.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_02_adjoint_consistency() {
    let c = Criterion::new("criterion 2: adjoint consistency on shipped configs");
    let mut worst_gap = 0.0f64;
    let mut all_positive = true;
    let mut names = Vec::new();
    for path in shipped_configs() {
        let cfg = load_config(&path).unwrap();
        let grid = cfg.build_grid().unwrap();
        let op = cfg.build_operator(&grid).unwrap();
        let e = eigenpair(&op);
        let ea = eigenpair(&adjoint(&op));
        worst_gap = worst_gap.max((e.lambda1 - ea.lambda1).abs() / e.lambda1.abs().max(1.0));
        all_positive &= e.phi1.values().iter().all(|&v| v > 0.0)
            && e.phi1_star.values().iter().all(|&v| v > 0.0);
        names.push(path.file_stem().unwrap().to_string_lossy().to_string());
    }
    c.check(
        worst_gap <= 1e-8 && all_positive,
        &format!(
            "worst relative lambda gap {worst_gap:.2e} over {:?}, eigenvectors positive: {all_positive}",
            names
        ),
    );
}

/// Independent oracle for criterion 3: damped Newton on the full nonlinear
/// system −Lu − f(u) = g from an arbitrary start, using only the direct
/// solver (no fiber/fold machinery).
fn full_newton(
    op: &DiscreteOperator<f64>,
    f: &Nonlinearity<f64>,
    g: &GridFunction<f64>,
    start: Vec<f64>,
) -> Option<Vec<f64>> {
    let neg = op.matrix().negated();
    let mut u = start;
    let residual = |u: &[f64]| -> (Vec<f64>, f64) {
        let mut r = neg.apply(u);
        let mut sup = 0.0f64;
        for i in 0..u.len() {
            r[i] -= f.eval(u[i]) + g.values()[i];
            sup = sup.max(r[i].abs());
        }
        (r, sup)
    };
    let (mut r, mut res) = residual(&u);
    for _ in 0..100 {
        if res <= 1e-9 {
            return Some(u);
        }
        let slopes: Vec<f64> = u.iter().map(|&v| -f.slope(v)).collect();
        let jac = neg.plus_diagonal(&slopes);
        let fact = factor(&jac).ok()?;
        let mut rhs = r.clone();
        for v in &mut rhs {
            *v = -*v;
        }
        let delta = fact.solve(&rhs);
        let mut theta = 1.0f64;
        let mut improved = false;
        for _ in 0..12 {
            let trial: Vec<f64> = u
                .iter()
                .zip(&delta)
                .map(|(&ui, &di)| ui + theta * di)
                .collect();
            let (tr, tres) = residual(&trial);
            if tres < res {
                u = trial;
                r = tr;
                res = tres;
                improved = true;
                break;
            }
            theta *= 0.5;
        }
        if !improved {
            return None;
        }
    }
    None
}

#[test]
fn criterion_03_exact_multiplicity() {
    let c = Criterion::new("criterion 3: exact multiplicity 2/1/0");
    let t0 = Instant::now();
    let op = laplace_1d(200);
    let eigen = eigenpair(&op);
    let f = Nonlinearity::ramp(12.0).unwrap();
    let prob = FiberProblem::new(&op, &eigen, &f, FiberParams::default()).unwrap();
    let params = FoldParams {
        scan_lo: -2.0,
        scan_hi: 2.0,
        ..Default::default()
    };

    // scan of rhs = t·phi1 over 81 steps
    let z0 = GridFunction::zeros(op.grid().clone());
    let ts: Vec<f64> = (0..81).map(|k| -2.0 + 4.0 * k as f64 / 80.0).collect();
    let rows = scan_multiplicity(&prob, &z0, &ts, None, &params).unwrap();
    let counts: Vec<usize> = rows.iter().map(|r| r.1).collect();
    let monotone = counts.windows(2).all(|w| w[1] <= w[0]);
    let ones = counts.iter().filter(|&&c| c == 1).count();
    let pattern_ok =
        monotone && counts[0] == 2 && *counts.last().unwrap() == 0 && ones <= 1;

    // transition location t-bar(0) = critical height level of the fiber at 0
    let report = find_fold(&prob, &z0, &params).unwrap();
    let tbar_ok = report.transition_level().abs() <= 1e-4;

    // the two solutions at rhs = −phi1
    let mut g = eigen.phi1.clone();
    g.scale(-1.0);
    let set = count_and_solve(&prob, &g, None, &params).unwrap();
    let lam = PI * PI;
    let sol_ok = set.count == 2
        && (set.t_values[0] + 1.0 / lam).abs() <= 1e-4
        && (set.t_values[1] - 1.0 / (12.0 - lam)).abs() <= 1e-4;

    // dense multi-start Newton oracle: no third solution among 50 starts
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = op.grid().interior_len();
    let mut found: Vec<Vec<f64>> = Vec::new();
    let mut oracle_solutions = 0usize;
    for _ in 0..50 {
        let a: f64 = rng.gen_range(-3.0..3.0);
        let start: Vec<f64> = (0..n)
            .map(|i| a * eigen.phi1.values()[i] + rng.gen_range(-0.3..0.3))
            .collect();
        if let Some(u) = full_newton(&op, &f, &g, start) {
            oracle_solutions += 1;
            let is_new = found.iter().all(|v| {
                v.iter()
                    .zip(&u)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max)
                    > 1e-6
            });
            if is_new {
                found.push(u);
            }
        }
    }
    let oracle_ok = found.len() == 2 && oracle_solutions >= 40;
    // every oracle solution matches one returned by the fold machinery
    let matches = found.iter().all(|v| {
        set.solutions.iter().any(|u| {
            u.values()
                .iter()
                .zip(v)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max)
                < 1e-6
        })
    });
    let elapsed = t0.elapsed().as_secs_f64();

    c.check(
        pattern_ok && tbar_ok && sol_ok && oracle_ok && matches && elapsed < 30.0,
        &format!(
            "counts 2..1..0 ok: {pattern_ok}, |t-bar| = {:.1e} (<= 1e-4), t-values ok: {sol_ok}, \
             oracle found {} distinct solutions from 50 starts (match: {matches}), {elapsed:.1}s",
            report.transition_level().abs(),
            found.len()
        ),
    );
}

#[test]
fn criterion_04_height_asymptotics() {
    let c = Criterion::new("criterion 4: height slope asymptotics");
    let op = laplace_1d(200);
    let eigen = eigenpair(&op);
    let f = Nonlinearity::smooth_ramp(12.0).unwrap();
    let prob = FiberProblem::new(&op, &eigen, &f, FiberParams::default()).unwrap();
    let z = random_z(op.grid(), &eigen, 0, 1.0).unwrap();
    let lam = eigen.lambda1;

    let slope = |t: f64| prob.solve(&z, t, None).unwrap().height / t;
    let (m100, p100) = (slope(-100.0), slope(100.0));
    let (m200, p200) = (slope(-200.0), slope(200.0));
    let e_m100 = (m100 - lam).abs();
    let e_p100 = (p100 - (lam - 12.0)).abs();
    let within = e_m100 <= 0.05 * lam && e_p100 <= 0.05 * (lam - 12.0).abs();
    let closer =
        (m200 - lam).abs() < e_m100 && (p200 - (lam - 12.0)).abs() < e_p100;
    c.check(
        within && closer,
        &format!(
            "T=100 slope errors ({e_m100:.3}, {e_p100:.3}) within 5% of ({lam:.3}, {:.3}); \
             T=200 strictly closer: {closer}",
            lam - 12.0
        ),
    );
}

#[test]
fn criterion_05_fiber_verticality() {
    let c = Criterion::new("criterion 5: fiber verticality");
    let op = laplace_1d(200);
    let eigen = eigenpair(&op);
    let f = Nonlinearity::smooth_ramp(12.0).unwrap();
    let prob = FiberProblem::new(&op, &eigen, &f, FiberParams::default()).unwrap();
    let z = random_z(op.grid(), &eigen, 0, 1.0).unwrap();
    let p = op.grid().default_p();
    let ratio = |t: f64| {
        let pt = prob.solve(&z, t, None).unwrap();
        discrete_norm(&pt.w, NormKind::W2p(p)) / t.abs()
    };
    let (rp10, rp100) = (ratio(10.0), ratio(100.0));
    let (rm10, rm100) = (ratio(-10.0), ratio(-100.0));
    c.check(
        rp100 <= 0.5 * rp10 && rm100 <= 0.5 * rm10,
        &format!("w-ratio +: {rp100:.2e} <= 0.5·{rp10:.2e}; -: {rm100:.2e} <= 0.5·{rm10:.2e}"),
    );
}

#[test]
fn criterion_06_no_three_preimages() {
    let c = Criterion::new("criterion 6: no-three-preimage falsifier");
    let mut details = Vec::new();
    let mut all_ok = true;
    for path in shipped_configs() {
        let cfg = load_config(&path).unwrap();
        let grid = cfg.build_grid().unwrap();
        let op = cfg.build_operator(&grid).unwrap();
        let eigen = eigenpair(&op);
        let f = cfg.build_nonlinearity().unwrap();
        let prob = FiberProblem::new(&op, &eigen, &f, FiberParams::default()).unwrap();
        let fold_params = FoldParams {
            parallel: true,
            ..Default::default()
        };
        let z0 = GridFunction::zeros(grid.clone());
        let h_ref = find_fold(&prob, &z0, &fold_params)
            .map(|r| r.h_max)
            .unwrap_or(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.solver.seed ^ 0x6e);
        let pairs: Vec<(GridFunction<f64>, f64)> = (0..20u64)
            .map(|k| {
                let z = random_z(&grid, &eigen, 2000 + k, 1.0).unwrap();
                let level = h_ref - rng.gen_range(0.2..10.0);
                (z, level)
            })
            .collect();
        let report = apfold_core::fold::check_no_three(
            &prob,
            &pairs,
            cfg.solver.no_three_scan_steps,
            &fold_params,
        )
        .unwrap();
        all_ok &= report.violations.is_empty();
        details.push(format!(
            "{}: max {}",
            path.file_stem().unwrap().to_string_lossy(),
            report.max_count
        ));
    }
    c.check(
        all_ok,
        &format!("root counts over 20 pairs per config: {}", details.join(", ")),
    );
}

#[test]
fn criterion_07_eigenvalue_laws() {
    let c = Criterion::new("criterion 7: eigenvalue laws");
    let op = laplace_1d(201); // h = 1/200 aligns the half-measure family
    let grid = op.grid();
    let eigen = eigenpair(&op);

    // zero-order strict monotonicity with the half-domain unit indicator
    let half = GridFunction::sample(grid.clone(), |x| if x[0] < 0.5 { 1.0 } else { 0.0 });
    let (base, pert) = check_monotonicity(&op, &half, EigParams::default()).unwrap();
    let mono_ok = pert > base && pert - base > 0.0 && pert - base < 1.0;

    // domain monotonicity: lambda1 on (0, 0.8) exceeds lambda1 on (0, 1)
    let sub = mask_below(grid, 0, 0.8);
    let lam_sub = subdomain_lambda1(&op, &sub, EigParams::default()).unwrap();
    let dom_ok = lam_sub > eigen.lambda1;

    // B~ on the interval: the half-interval minimizes among half-measure
    // families, giving 4 pi^2
    let est = estimate_b_tilde(&op, EigParams::default()).unwrap();
    let b_ok = (est.value - 4.0 * PI * PI).abs() <= 1e-2;

    c.check(
        mono_ok && dom_ok && b_ok,
        &format!(
            "potential gap {:.4} in (0,1): {mono_ok}; lambda1(0,0.8) = {lam_sub:.3} > {:.3}: \
             {dom_ok}; |B~ - 4pi^2| = {:.2e} (<= 1e-2)",
            pert - base,
            eigen.lambda1,
            (est.value - 4.0 * PI * PI).abs()
        ),
    );
}

#[test]
fn criterion_08_coercivity_sampling() {
    let c = Criterion::new("criterion 8: coercivity sampling");
    let f = Nonlinearity::smooth_ramp(12.0).unwrap();
    let c_of = |n: usize| {
        let op = laplace_1d(n);
        let eigen = eigenpair(&op);
        let prob = FiberProblem::new(&op, &eigen, &f, FiberParams::default()).unwrap();
        prob.coercivity_sample(100, 0).unwrap().c_emp
    };
    let c100 = c_of(100);
    let c200 = c_of(200);
    let rel = (c200 - c100).abs() / c100.max(1e-300);
    c.check(
        c100 > 0.0 && c200 > 0.0 && rel < 0.5,
        &format!("c_emp(n=100) = {c100:.4}, c_emp(n=200) = {c200:.4}, change {:.1}%", rel * 100.0),
    );
}

#[test]
fn criterion_09_two_solution_ordering() {
    let c = Criterion::new("criterion 9: two-solution ordering and potential bounds");
    let mut cases = 0usize;
    let mut all_ok = true;
    for path in shipped_configs() {
        let cfg = load_config(&path).unwrap();
        if cfg.grid.dim != 1 {
            continue; // 1D cases exercise every branch; 2D covered by verify
        }
        let grid = cfg.build_grid().unwrap();
        let op = cfg.build_operator(&grid).unwrap();
        let eigen = eigenpair(&op);
        let f = cfg.build_nonlinearity().unwrap();
        let prob = FiberProblem::new(&op, &eigen, &f, FiberParams::default()).unwrap();
        let params = FoldParams::default();
        for seed in [0u64, 9] {
            let mut g = random_z(&grid, &eigen, seed, 0.5).unwrap();
            g.add_scaled(-1.5, &eigen.phi1);
            let set = count_and_solve(&prob, &g, None, &params).unwrap();
            if set.count != 2 {
                continue;
            }
            cases += 1;
            let (u1, u2) = (&set.solutions[0], &set.solutions[1]);
            let pairing = inner_product(u2, &eigen.phi1_star).unwrap()
                - inner_product(u1, &eigen.phi1_star).unwrap();
            all_ok &= pairing > 0.0;
            for i in 0..u1.len() {
                let d = u2.values()[i] - u1.values()[i];
                if d <= 0.0 {
                    all_ok = false;
                    break;
                }
                let v = (f.eval(u2.values()[i]) - f.eval(u1.values()[i])) / d;
                if v < -1e-9 || v > f.slope_hi + 1e-9 {
                    all_ok = false;
                    break;
                }
            }
        }
    }
    c.check(
        all_ok && cases >= 3,
        &format!("{cases} two-solution cases: u2 > u1 nodewise and potential within [0, b]"),
    );
}

#[test]
fn criterion_10_determinism() {
    let c = Criterion::new("criterion 10: byte-deterministic verify");
    let cfg = configs_dir().join("interval_laplace_ramp.toml");
    let base = std::env::temp_dir().join(format!("apfold_accept_{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&base);
    let out1 = base.join("run1");
    let out2 = base.join("run2");
    let mut codes = Vec::new();
    for out in [&out1, &out2] {
        let status = Command::new(env!("CARGO_BIN_EXE_apfold"))
            .args([
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "verify",
            ])
            .output()
            .expect("binary runs");
        codes.push(status.status.code());
    }
    let mut identical = true;
    let mut compared = 0usize;
    for entry in std::fs::read_dir(&out1).unwrap() {
        let name = entry.unwrap().file_name();
        let a = std::fs::read(out1.join(&name)).unwrap();
        let b = std::fs::read(out2.join(&name)).unwrap();
        identical &= a == b;
        compared += 1;
    }
    c.check(
        codes == vec![Some(0), Some(0)] && identical && compared >= 2,
        &format!("exit codes {codes:?}, {compared} files byte-identical: {identical}"),
    );
}
