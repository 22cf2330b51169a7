//! Sweeps over delays and performance levels, and the files they produce.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bound::{build_youla_program, design_for, lower_bound_curve, RatePoint, YoulaOptions, YoulaProgram};
use crate::error::{Error, Result};
use crate::info::{gaussian_directed_info_auto, DirectedInfoEstimate};
use crate::lqg::d_inf;
use crate::lti::{TwoByTwoPlant, DEFAULT_GRID_SIZE};
use crate::sim::{operational_run, simulate_awgn_loop, OperationalRatePoint, DEFAULT_MARKOV_ORDER};

/// Allowance for estimator noise in the rate comparisons.
pub const RATE_TOLERANCE_BITS: f64 = 0.05;

pub const CSV_HEADER: &str =
    "h,D,phi,rate_lower_bits,rate_operational_bits,sigma_z_analytic,sigma_z_emp,sigma_eta_sq,delta,n_q,seed,steps,status";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DGrid {
    pub min_multiplier: f64,
    pub max_multiplier: f64,
    pub count: usize,
}

impl Default for DGrid {
    fn default() -> Self {
        Self { min_multiplier: 1.05, max_multiplier: 100.0, count: 25 }
    }
}

impl DGrid {
    /// Log-spaced multipliers of the floor, smallest first.
    pub fn multipliers(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min_multiplier];
        }
        let ratio = self.max_multiplier / self.min_multiplier;
        (0..self.count)
            .map(|i| self.min_multiplier * ratio.powf(i as f64 / (self.count - 1) as f64))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Frequency grid size `N`.
    pub grid_size: usize,
    /// FIR order of the Youla parameter at the start of refinement.
    pub n_q: usize,
    /// Largest order tried; equal to `n_q` disables refinement.
    pub n_q_max: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { grid_size: DEFAULT_GRID_SIZE, n_q: 32, n_q_max: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub enabled: bool,
    pub steps: usize,
    pub seed: u64,
    pub markov_order: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { enabled: false, steps: 1_000_000, seed: 1, markov_order: DEFAULT_MARKOV_ORDER }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "TwoByTwoPlant::unstable_example")]
    pub plant: TwoByTwoPlant,
    pub delays: Vec<usize>,
    #[serde(default)]
    pub d_grid: DGrid,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    /// Estimate the directed information of every simulated loop.
    #[serde(default)]
    pub verify_di: bool,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.delays.is_empty() {
            return Err(Error::Config("delays must not be empty".into()));
        }
        let g = &self.d_grid;
        if g.count == 0 {
            return Err(Error::Config("d_grid.count must be positive".into()));
        }
        if !(g.min_multiplier > 1.0 && g.max_multiplier.is_finite() && g.max_multiplier >= g.min_multiplier) {
            return Err(Error::Config(format!(
                "d_grid multipliers must satisfy 1 < min <= max, got [{}, {}]",
                g.min_multiplier, g.max_multiplier
            )));
        }
        let s = &self.solver;
        if s.n_q == 0 || s.n_q_max < s.n_q || s.grid_size < 2 * s.n_q_max {
            return Err(Error::Config(format!(
                "solver needs 0 < n_q <= n_q_max and grid_size >= 2 n_q_max, got n_q {}, n_q_max {}, grid {}",
                s.n_q, s.n_q_max, s.grid_size
            )));
        }
        if self.simulation.enabled && self.simulation.steps == 0 {
            return Err(Error::Config("simulation.steps must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn youla_options(&self) -> YoulaOptions {
        YoulaOptions { grid_size: self.solver.grid_size, n_q: self.solver.n_q, n_q_max: self.solver.n_q_max }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowStatus {
    Ok,
    /// `D` at or below the floor (or no solver progress above it).
    Infeasible,
    /// Bound computed, simulation or verification failed.
    SimulationFailed,
    Failed,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Infeasible => "infeasible",
            RowStatus::SimulationFailed => "simulation-failed",
            RowStatus::Failed => "failed",
        }
    }
}

/// Directed-information check attached to a simulated row.
#[derive(Debug, Clone, Serialize)]
pub struct DiCheck {
    pub estimate: DirectedInfoEstimate,
    pub bits: f64,
    /// Entropy rate of the run is at least the estimate minus the tolerance.
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub h: usize,
    pub d: f64,
    pub d_inf: f64,
    pub multiplier: f64,
    pub status: RowStatus,
    pub bound: Option<RatePoint>,
    pub operational: Option<OperationalRatePoint>,
    pub di: Option<DiCheck>,
    pub error: Option<String>,
}

impl SweepRow {
    fn csv_record(&self) -> CsvRecord {
        let b = self.bound.as_ref();
        let op = self.operational.as_ref();
        CsvRecord {
            h: self.h,
            d: self.d,
            phi: b.map(|p| p.phi),
            rate_lower_bits: b.map(|p| p.rate_lower_bits),
            rate_operational_bits: op.map(|o| o.rate_bits),
            sigma_z_analytic: op.map(|o| o.sigma_z_analytic).or(b.map(|p| p.sigma_z_sq)),
            sigma_z_emp: op.map(|o| o.sigma_z_sq),
            sigma_eta_sq: b.map(|p| p.sigma_eta_sq),
            delta: op.map(|o| o.delta).or(b.map(|p| (12.0 * p.sigma_eta_sq).sqrt())),
            n_q: b.map(|p| p.n_q),
            seed: op.map(|o| o.seed),
            steps: op.map(|o| o.steps),
            status: self.status.as_str(),
        }
    }
}

#[derive(Serialize)]
struct CsvRecord {
    h: usize,
    #[serde(rename = "D")]
    d: f64,
    phi: Option<f64>,
    rate_lower_bits: Option<f64>,
    rate_operational_bits: Option<f64>,
    sigma_z_analytic: Option<f64>,
    sigma_z_emp: Option<f64>,
    sigma_eta_sq: Option<f64>,
    delta: Option<f64>,
    n_q: Option<usize>,
    seed: Option<u64>,
    steps: Option<usize>,
    status: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub provenance: Provenance,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.status != RowStatus::Ok).count()
    }
}

/// Seed of the simulation at grid index `i` of delay `h`.
pub fn row_seed(base: u64, h: usize, i: usize) -> u64 {
    base.wrapping_add(((h as u64) << 32) | i as u64)
}

/// Bound curves for every delay, plus simulations when enabled.
///
/// Per-point failures are recorded in the row; only configuration errors
/// abort the sweep.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let mut delays = config.delays.clone();
    delays.sort_unstable();
    delays.dedup();
    let multipliers = config.d_grid.multipliers();

    let mut rows = Vec::new();
    for &h in &delays {
        rows.extend(curve_rows(config, h, &multipliers));
    }
    rows.sort_by(|a, b| a.h.cmp(&b.h).then(a.d.total_cmp(&b.d)));
    Ok(SweepResult {
        config: config.clone(),
        provenance: Provenance {
            config_hash: config.hash(),
            seed: config.simulation.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        rows,
    })
}

fn curve_rows(config: &SweepConfig, h: usize, multipliers: &[f64]) -> Vec<SweepRow> {
    let failed = |d_inf: f64, error: Error| -> Vec<SweepRow> {
        multipliers
            .iter()
            .map(|&m| SweepRow {
                h,
                d: m * d_inf,
                d_inf,
                multiplier: m,
                status: RowStatus::Failed,
                bound: None,
                operational: None,
                di: None,
                error: Some(error.to_string()),
            })
            .collect()
    };
    let floor = match d_inf(&config.plant, h) {
        Ok(f) => f,
        Err(e) => return failed(f64::NAN, e),
    };
    let program = match build_youla_program(&config.plant, h, &floor.observer, config.youla_options()) {
        Ok(p) => p,
        Err(e) => return failed(floor.value, e),
    };
    let ds: Vec<f64> = multipliers.iter().map(|m| m * floor.value).collect();
    let curve = lower_bound_curve(&program, &ds);
    curve
        .into_par_iter()
        .enumerate()
        .map(|(i, point)| {
            let mut row = SweepRow {
                h,
                d: ds[i],
                d_inf: floor.value,
                multiplier: multipliers[i],
                status: RowStatus::Ok,
                bound: None,
                operational: None,
                di: None,
                error: None,
            };
            match point {
                Ok(p) => {
                    if config.simulation.enabled {
                        simulate_row(config, &program, &p, row_seed(config.simulation.seed, h, i), &mut row);
                    }
                    row.bound = Some(p);
                }
                Err(e) => {
                    row.status = match e {
                        Error::Infeasible { .. } => RowStatus::Infeasible,
                        _ => RowStatus::Failed,
                    };
                    row.error = Some(e.to_string());
                }
            }
            row
        })
        .collect()
}

fn simulate_row(config: &SweepConfig, program: &YoulaProgram, point: &RatePoint, seed: u64, row: &mut SweepRow) {
    let sim = &config.simulation;
    let run = match operational_run(program, point, sim.steps, seed, sim.markov_order) {
        Ok(run) => run,
        Err(e) => {
            row.status = RowStatus::SimulationFailed;
            row.error = Some(e.to_string());
            return;
        }
    };
    if config.verify_di {
        match gaussian_directed_info_auto(&run.trace.y, &run.trace.u, point.h) {
            Ok(estimate) => {
                let bits = estimate.bits();
                let passed = run.point.rate_bits >= bits - RATE_TOLERANCE_BITS;
                row.di = Some(DiCheck { estimate, bits, passed });
            }
            Err(e) => {
                row.status = RowStatus::SimulationFailed;
                row.error = Some(format!("directed information: {e}"));
            }
        }
    }
    row.operational = Some(run.point);
}

/// Directed information of the AWGN loop designed for `point`.
pub fn awgn_directed_info(
    program: &YoulaProgram,
    point: &RatePoint,
    steps: usize,
    seed: u64,
) -> Result<DirectedInfoEstimate> {
    let design = design_for(program, point)?;
    let trace = simulate_awgn_loop(program.plant(), &design, steps, seed)?;
    gaussian_directed_info_auto(&trace.y, &trace.u, point.h)
}

/// CSV text of the sweep, header included.
pub fn csv_string(result: &SweepResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &result.rows {
        w.serialize(row.csv_record()).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// `D`, lower bound and operational rate per delay, one block per delay
/// separated by two blank lines (gnuplot `index` blocks).
pub fn plot_dat_string(result: &SweepResult) -> String {
    let mut out = String::new();
    let mut current: Option<usize> = None;
    for row in &result.rows {
        if current != Some(row.h) {
            if current.is_some() {
                out.push_str("\n\n");
            }
            out.push_str(&format!("# h = {}\n# D rate_lower_bits rate_operational_bits\n", row.h));
            current = Some(row.h);
        }
        let bound = row.bound.as_ref().map_or("nan".to_string(), |p| p.rate_lower_bits.to_string());
        let op = row.operational.as_ref().map_or("nan".to_string(), |o| o.rate_bits.to_string());
        out.push_str(&format!("{} {bound} {op}\n", row.d));
    }
    out
}

/// Writes `sweep.csv`, `sweep.json` and `plot.dat` into `dir` and returns their paths.
pub fn emit_outputs(result: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>> {
    if result.rows.is_empty() {
        return Err(Error::InvalidArgument("sweep has no rows".into()));
    }
    fs::create_dir_all(dir)?;
    let files = [
        ("sweep.csv", csv_string(result)?),
        ("sweep.json", serde_json::to_string_pretty(result)?),
        ("plot.dat", plot_dat_string(result)),
    ];
    let mut paths = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body)?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SweepConfig {
        SweepConfig::from_json(
            r#"{"delays": [1, 0], "d_grid": {"min_multiplier": 2.0, "max_multiplier": 8.0, "count": 3},
                "solver": {"grid_size": 4096, "n_q": 16, "n_q_max": 16}}"#,
        )
        .unwrap()
    }

    #[test]
    fn multipliers_are_log_spaced() {
        let m = DGrid { min_multiplier: 2.0, max_multiplier: 8.0, count: 3 }.multipliers();
        assert!((m[1] - 4.0).abs() < 1e-12 && (m[2] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(SweepConfig::from_json(r#"{"delays": []}"#).is_err());
        assert!(SweepConfig::from_json(r#"{"delays": [0], "d_grid": {"min_multiplier": 0.5, "max_multiplier": 2, "count": 3}}"#).is_err());
        assert!(SweepConfig::from_json(r#"{"delays": [0], "typo": 1}"#).is_err());
        let cfg = SweepConfig::from_json(r#"{"delays": [0]}"#).unwrap();
        assert_eq!(cfg.d_grid.count, 25);
    }

    #[test]
    fn rows_sorted_and_csv_schema() {
        let res = run_sweep(&small_config()).unwrap();
        assert_eq!(res.rows.len(), 6);
        assert!(res.rows.windows(2).all(|w| (w[0].h, w[0].d) < (w[1].h, w[1].d) || w[0].h < w[1].h));
        assert_eq!(res.failures(), 0);
        let csv = csv_string(&res).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        for (line, row) in lines.zip(&res.rows) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 13);
            let phi: f64 = fields[2].parse().unwrap();
            let rate: f64 = fields[3].parse().unwrap();
            assert!((rate - 0.5 * (1.0 + phi).log2()).abs() < 1e-12);
            assert_eq!(fields[4], "");
            assert_eq!(fields[12], "ok");
            assert_eq!(fields[0], row.h.to_string());
        }
        let dat = plot_dat_string(&res);
        assert_eq!(dat.split("\n\n\n").count(), 2);
    }

    #[test]
    fn failed_rows_have_empty_numeric_fields() {
        let row = SweepRow {
            h: 0,
            d: 1.0,
            d_inf: 2.0,
            multiplier: 0.5,
            status: RowStatus::Infeasible,
            bound: None,
            operational: None,
            di: None,
            error: Some("below floor".into()),
        };
        let res = SweepResult {
            config: small_config(),
            provenance: Provenance { config_hash: String::new(), seed: 0, version: String::new() },
            rows: vec![row],
        };
        let csv = csv_string(&res).unwrap();
        assert_eq!(csv.lines().nth(1).unwrap(), "0,1.0,,,,,,,,,,,infeasible");
    }

    #[test]
    fn outputs_written() {
        let res = run_sweep(&small_config()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = emit_outputs(&res, dir.path()).unwrap();
        assert_eq!(paths.len(), 3);
        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&paths[1]).unwrap()).unwrap();
        assert_eq!(json["provenance"]["config_hash"].as_str().unwrap().len(), 64);
        assert_eq!(json["rows"].as_array().unwrap().len(), 6);
    }
}
