//! Config file loading, validation with named-field errors, default filling,
//! and construction of the core objects.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use apfold_core::grid::{Domain, Grid, GridFunction, MaskKind};
use apfold_core::nonlinearity::Nonlinearity;
use apfold_core::operator::{assemble, CoefficientField, DiscreteOperator};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub grid: Option<GridSection>,
    pub operator: Option<OperatorSection>,
    pub nonlinearity: Option<NonlinSection>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub bounds: Vec<[f64; 2]>,
    pub n: Option<Vec<usize>>,
    pub mask: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct OperatorSection {
    pub A: Option<CoeffSpec>,
    pub b: Option<CoeffSpec>,
    pub c: Option<CoeffSpec>,
    pub lambda_ell: Option<f64>,
    pub Lambda_ell: Option<f64>,
}

/// One coefficient slot: a named preset with parameters, or a CSV sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum CoeffSpec {
    /// Constant per-node values: A takes `[a11]` or `[a11, a12, a22]`,
    /// b takes `[b1]` or `[b1, b2]`, c takes `[c]`.
    #[serde(rename = "constant")]
    Constant { value: Vec<f64> },
    /// base + slope·x₁ per component.
    #[serde(rename = "linear_x")]
    LinearX { base: Vec<f64>, slope: Vec<f64> },
    /// Per-node rows in interior order; named columns `a11[,a12,a22],b1[,b2],c`.
    #[serde(rename = "csv")]
    Csv { path: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinSection {
    pub kind: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub params: Option<NonlinParams>,
    pub mollify_delta: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinParams {
    /// CSV path for kind = "table": rows of (s, f(s)).
    pub path: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub eig_tol: f64,
    pub eig_max_iter: usize,
    pub scan_t_lo: f64,
    pub scan_t_hi: f64,
    pub scan_steps: usize,
    pub golden_rel_tol: f64,
    pub bisect_tol: f64,
    pub tol_transition_rel: f64,
    pub seed: u64,
    pub coercivity_trials: usize,
    pub no_three_pairs: usize,
    pub no_three_scan_steps: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            newton_tol: 1e-10,
            newton_max_iter: 50,
            eig_tol: 1e-10,
            eig_max_iter: 10_000,
            scan_t_lo: -5.0,
            scan_t_hi: 5.0,
            scan_steps: 101,
            golden_rel_tol: 1e-8,
            bisect_tol: 1e-10,
            tol_transition_rel: 1e-6,
            seed: 0,
            coercivity_trials: 100,
            no_three_pairs: 20,
            no_three_scan_steps: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: String,
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: "out".into(),
            formats: vec!["json".into(), "csv".into()],
        }
    }
}

/// Validated configuration with every default filled in.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub grid: GridSection,
    pub operator: OperatorSection,
    pub nonlinearity: NonlinSection,
    pub solver: SolverSection,
    pub output: OutputSection,
    /// Directory of the config file; CSV paths resolve relative to it.
    pub base_dir: PathBuf,
}

impl RunConfig {
    /// The filled config as a serializable echo.
    pub fn echo(&self) -> ConfigFile {
        ConfigFile {
            grid: Some(self.grid.clone()),
            operator: Some(self.operator.clone()),
            nonlinearity: Some(self.nonlinearity.clone()),
            solver: self.solver.clone(),
            output: self.output.clone(),
        }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let file: ConfigFile = toml::from_str(&text)
        .map_err(|e| anyhow!("config parse error in {}: {e}", path.display()))?;
    let base_dir = path
        .parent()
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| PathBuf::from("."));

    let mut grid = file
        .grid
        .ok_or_else(|| anyhow!("config validation error: missing section `grid`"))?;
    if grid.dim == 0 || grid.dim > 2 {
        bail!("config validation error: grid.dim must be 1 or 2, got {}", grid.dim);
    }
    if grid.bounds.len() != grid.dim {
        bail!(
            "config validation error: grid.bounds needs {} entries, got {}",
            grid.dim,
            grid.bounds.len()
        );
    }
    for (k, b) in grid.bounds.iter().enumerate() {
        if !(b[0] < b[1]) {
            bail!("config validation error: grid.bounds[{k}] is empty: [{}, {}]", b[0], b[1]);
        }
    }
    let default_n = if grid.dim == 1 { 200 } else { 41 };
    let n = grid.n.get_or_insert_with(|| vec![default_n; grid.dim]);
    if n.len() != grid.dim {
        bail!(
            "config validation error: grid.n needs {} entries, got {}",
            grid.dim,
            n.len()
        );
    }
    if let Some(mask) = &grid.mask {
        MaskKind::parse(mask).map_err(|e| anyhow!("config validation error: grid.mask: {e}"))?;
    } else {
        grid.mask = Some("rectangle".into());
    }

    let mut operator = file.operator.unwrap_or_default();
    let ones = |len: usize| CoeffSpec::Constant { value: vec![1.0; len] };
    let zeros = |len: usize| CoeffSpec::Constant { value: vec![0.0; len] };
    if operator.A.is_none() {
        operator.A = Some(if grid.dim == 1 {
            ones(1)
        } else {
            CoeffSpec::Constant { value: vec![1.0, 0.0, 1.0] }
        });
    }
    if operator.b.is_none() {
        operator.b = Some(zeros(grid.dim));
    }
    if operator.c.is_none() {
        operator.c = Some(zeros(1));
    }

    let nonlinearity = file
        .nonlinearity
        .ok_or_else(|| anyhow!("config validation error: missing section `nonlinearity`"))?;
    match nonlinearity.kind.as_str() {
        "ramp" | "smooth_ramp" => {
            let a = nonlinearity.a.unwrap_or(0.0);
            let b = nonlinearity
                .b
                .ok_or_else(|| anyhow!("config validation error: nonlinearity.b is required"))?;
            if !(b > a) {
                bail!("config validation error: nonlinearity needs b > a, got a = {a}, b = {b}");
            }
        }
        "table" => {
            let has_path = nonlinearity
                .params
                .as_ref()
                .and_then(|p| p.path.as_ref())
                .is_some();
            if !has_path {
                bail!("config validation error: nonlinearity.params.path is required for kind = \"table\"");
            }
            if nonlinearity.b.is_none() {
                bail!("config validation error: nonlinearity.b is required for kind = \"table\"");
            }
        }
        other => bail!("config validation error: unknown nonlinearity.kind `{other}`"),
    }
    if let Some(d) = nonlinearity.mollify_delta {
        if d < 0.0 {
            bail!("config validation error: nonlinearity.mollify_delta must be >= 0, got {d}");
        }
    }

    let solver = file.solver;
    for (name, v) in [
        ("solver.newton_tol", solver.newton_tol),
        ("solver.eig_tol", solver.eig_tol),
        ("solver.golden_rel_tol", solver.golden_rel_tol),
        ("solver.bisect_tol", solver.bisect_tol),
        ("solver.tol_transition_rel", solver.tol_transition_rel),
    ] {
        if !(v > 0.0) {
            bail!("config validation error: {name} must be > 0, got {v}");
        }
    }

    Ok(RunConfig {
        grid,
        operator,
        nonlinearity,
        solver,
        output: file.output,
        base_dir,
    })
}

impl RunConfig {
    pub fn build_grid(&self) -> Result<Arc<Grid<f64>>> {
        let mask = MaskKind::parse(self.grid.mask.as_deref().unwrap_or("rectangle"))
            .map_err(|e| anyhow!("{e}"))?;
        let domain = Domain::new(self.grid.bounds.clone(), mask)?;
        let n = self.grid.n.as_ref().expect("n filled by load_config");
        Ok(Grid::new(domain, n)?)
    }

    fn resolve(&self, raw: &str) -> PathBuf {
        let p = Path::new(raw);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn coeff_samples(
        &self,
        spec: &CoeffSpec,
        grid: &Grid<f64>,
        columns: &[&str],
    ) -> Result<Vec<Vec<f64>>> {
        let m = grid.interior_len();
        match spec {
            CoeffSpec::Constant { value } => {
                if value.len() != columns.len() {
                    bail!(
                        "coefficient preset expects {} component(s) {:?}, got {}",
                        columns.len(),
                        columns,
                        value.len()
                    );
                }
                Ok((0..m).map(|_| value.clone()).collect())
            }
            CoeffSpec::LinearX { base, slope } => {
                if base.len() != columns.len() || slope.len() != columns.len() {
                    bail!(
                        "linear_x preset expects {} component(s) {:?}",
                        columns.len(),
                        columns
                    );
                }
                Ok((0..m)
                    .map(|i| {
                        let x = grid.node_coord(i)[0];
                        base.iter()
                            .zip(slope)
                            .map(|(&b0, &s0)| b0 + s0 * x)
                            .collect()
                    })
                    .collect())
            }
            CoeffSpec::Csv { path } => {
                let full = self.resolve(path);
                let table = read_csv_table(&full)?;
                let mut out = Vec::with_capacity(m);
                for i in 0..m {
                    let mut row = Vec::with_capacity(columns.len());
                    for col in columns {
                        let j = table
                            .header
                            .iter()
                            .position(|h| h == col)
                            .ok_or_else(|| {
                                anyhow!("{}: missing column `{col}`", full.display())
                            })?;
                        let r = table.rows.get(i).ok_or_else(|| {
                            anyhow!(
                                "{}: needs {} rows (one per interior node), found {}",
                                full.display(),
                                m,
                                table.rows.len()
                            )
                        })?;
                        row.push(r[j]);
                    }
                    out.push(row);
                }
                Ok(out)
            }
        }
    }

    pub fn build_operator(&self, grid: &Arc<Grid<f64>>) -> Result<DiscreteOperator<f64>> {
        let dim = grid.dim();
        let a_cols: &[&str] = if dim == 1 { &["a11"] } else { &["a11", "a12", "a22"] };
        let b_cols: &[&str] = if dim == 1 { &["b1"] } else { &["b1", "b2"] };
        let a_raw = self.coeff_samples(self.operator.A.as_ref().unwrap(), grid, a_cols)?;
        let b_raw = self.coeff_samples(self.operator.b.as_ref().unwrap(), grid, b_cols)?;
        let c_raw = self.coeff_samples(self.operator.c.as_ref().unwrap(), grid, &["c"])?;
        let a = a_raw
            .into_iter()
            .map(|r| {
                if dim == 1 {
                    [r[0], 0.0, 0.0]
                } else {
                    [r[0], r[1], r[2]]
                }
            })
            .collect();
        let b = b_raw
            .into_iter()
            .map(|r| if dim == 1 { [r[0], 0.0] } else { [r[0], r[1]] })
            .collect();
        let c = c_raw.into_iter().map(|r| r[0]).collect();
        let bounds = match (self.operator.lambda_ell, self.operator.Lambda_ell) {
            (Some(lo), Some(hi)) => Some((lo, hi)),
            (None, None) => None,
            _ => bail!("config validation error: lambda_ell and Lambda_ell must be given together"),
        };
        let coeffs = CoefficientField::new(grid, a, b, c, bounds)?;
        Ok(assemble(grid.clone(), coeffs)?)
    }

    /// Constructed on the normalized scale (a = 0 enforced at construction).
    pub fn build_nonlinearity(&self) -> Result<Nonlinearity<f64>> {
        let sec = &self.nonlinearity;
        let a = sec.a.unwrap_or(0.0);
        let f = match sec.kind.as_str() {
            "ramp" => {
                let b = sec.b.expect("validated");
                if a != 0.0 {
                    bail!(
                        "config validation error: ramp is defined on the normalized scale; \
                         use a = 0 (the raw slope window shifts by a)"
                    );
                }
                Nonlinearity::ramp(b)?
            }
            "smooth_ramp" => {
                let b = sec.b.expect("validated");
                if a != 0.0 {
                    bail!(
                        "config validation error: smooth_ramp is defined on the normalized scale; use a = 0"
                    );
                }
                Nonlinearity::smooth_ramp(b)?
            }
            "table" => {
                let path = self.resolve(
                    sec.params
                        .as_ref()
                        .and_then(|p| p.path.as_deref())
                        .expect("validated"),
                );
                let pts = read_two_column_csv(&path)?;
                Nonlinearity::table(pts, a, sec.b.expect("validated"))?
            }
            _ => unreachable!("kind validated by load_config"),
        };
        match sec.mollify_delta {
            Some(d) if d > 0.0 => Ok(f.mollify(d)?),
            _ => Ok(f),
        }
    }
}

struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_csv_table(path: &Path) -> Result<CsvTable> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read CSV file {}", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| anyhow!("{}: empty CSV", path.display()))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let row: Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| anyhow!("{}: row {}: {e}", path.display(), k + 2))?;
        if row.len() != header.len() {
            bail!(
                "{}: row {} has {} fields, header has {}",
                path.display(),
                k + 2,
                row.len(),
                header.len()
            );
        }
        rows.push(row);
    }
    Ok(CsvTable { header, rows })
}

/// Two-column numeric CSV (s, f(s)); a non-numeric first line is a header.
fn read_two_column_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read CSV file {}", path.display()))?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(|s| s.trim()).collect();
        if fields.len() != 2 {
            bail!("{}: line {} needs two fields", path.display(), k + 1);
        }
        match (fields[0].parse::<f64>(), fields[1].parse::<f64>()) {
            (Ok(s), Ok(f)) => out.push((s, f)),
            _ if k == 0 => continue, // header line
            _ => bail!("{}: line {}: not numeric", path.display(), k + 1),
        }
    }
    Ok(out)
}

/// Single-column (or last-column) vector in interior order.
pub fn read_vector_csv(path: &Path, grid: &Arc<Grid<f64>>) -> Result<GridFunction<f64>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read CSV file {}", path.display()))?;
    let mut values = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let last = line.split(',').next_back().unwrap().trim();
        match last.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if k == 0 => continue, // header
            Err(e) => bail!("{}: line {}: {e}", path.display(), k + 1),
        }
    }
    if values.len() != grid.interior_len() {
        bail!(
            "{}: expected {} values (one per interior node), found {}",
            path.display(),
            grid.interior_len(),
            values.len()
        );
    }
    Ok(GridFunction::from_values(grid.clone(), values)?)
}
