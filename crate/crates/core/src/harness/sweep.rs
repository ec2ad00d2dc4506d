//! Two-axis parameter sweeps over either simulation.
//!
//! Each trajectory is seeded from `(master seed, axis1 index, axis2 index,
//! trajectory index)` and per-trajectory results are reduced in index order,
//! so a grid is bit-identical for any thread count or scheduling. Completed
//! cells are recorded in an optional JSON manifest and skipped on rerun.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::csvio::{write_atomic, TrajectoryRow};
use crate::metrics::mean_std;
use crate::rng::cell_seed;
use crate::sim2::run_trajectory2;
use crate::sim3::{run_trajectory3, Sim3Config};

pub const DEFAULT_BURN_IN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimKind {
    Sim2,
    Sim3,
}

impl SimKind {
    pub fn metrics(self) -> &'static [&'static str] {
        match self {
            SimKind::Sim2 => &["gini", "norm_ratio", "supply_ratio", "frac_defaulted"],
            SimKind::Sim3 => &[
                "gini",
                "norm_ratio",
                "supply_ratio",
                "frac_defaulted",
                "w_s",
                "w_d",
                "w_l",
            ],
        }
    }
}

/// Parameter names a sweep axis may vary.
pub const SWEEP_PARAMS: [&str; 14] = [
    "lambda_borrow",
    "lambda_slash",
    "lambda_collateral",
    "lambda_stake",
    "iota",
    "k",
    "lambda",
    "r0",
    "phi_max",
    "eta",
    "kappa",
    "xi",
    "v0",
    "demand",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(name: &str, values: &[f64]) -> Self {
        Axis {
            name: name.to_owned(),
            values: values.to_vec(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !SWEEP_PARAMS.contains(&self.name.as_str()) {
            return Err(Error::Config(format!(
                "unknown sweep parameter {:?}",
                self.name
            )));
        }
        if self.values.is_empty() {
            return Err(Error::Config(format!("axis {:?} has no values", self.name)));
        }
        if self.values.iter().any(|v| !v.is_finite())
            || self.values.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Config(format!(
                "axis {:?} must be finite and strictly increasing",
                self.name
            )));
        }
        Ok(())
    }
}

/// Set a named parameter on a config.
pub fn set_param(cfg: &mut Sim3Config, name: &str, value: f64) -> Result<()> {
    let s = &mut cfg.sim;
    match name {
        "lambda_borrow" => s.lambda_borrow = value,
        "lambda_slash" => s.lambda_slash = value,
        "lambda_collateral" => s.lambda_collateral = value,
        "lambda_stake" => s.lambda_stake = value,
        "iota" => s.iota = value,
        "k" => s.k = value,
        "lambda" => s.monetary.lambda = value,
        "r0" => s.monetary.r0 = value,
        "phi_max" => s.phi_max = value,
        "eta" => {
            if !(value >= 1.0 && value.fract() == 0.0 && value <= u64::MAX as f64) {
                return Err(Error::Config(format!(
                    "eta must be a positive integer, got {value}"
                )));
            }
            s.eta = value as u64;
        }
        "kappa" => cfg.cir.kappa = value,
        "xi" => cfg.cir.xi = value,
        "v0" => cfg.cir.v0 = value,
        "demand" => cfg.lending.demand = value,
        _ => return Err(Error::Config(format!("unknown sweep parameter {name:?}"))),
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub kind: SimKind,
    pub axis1: Axis,
    pub axis2: Axis,
    /// Base configuration; `base.sim.seed` is the master seed and
    /// `base.sim.trajectories` the trajectories per cell.
    pub base: Sim3Config,
    /// Fraction of each trajectory's sampled heights dropped before averaging.
    pub burn_in: f64,
}

impl SweepSpec {
    /// `λ_borrow × λ_slash` over `{0.1, …, 0.9}²`.
    pub fn default_sim2() -> Self {
        let grid: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        SweepSpec {
            kind: SimKind::Sim2,
            axis1: Axis::new("lambda_borrow", &grid),
            axis2: Axis::new("lambda_slash", &grid),
            base: Sim3Config::default(),
            burn_in: DEFAULT_BURN_IN,
        }
    }

    /// `k × λ_slash`.
    pub fn default_sim3() -> Self {
        SweepSpec {
            kind: SimKind::Sim3,
            axis1: Axis::new("k", &[0.25, 0.5, 1.0, 2.0, 4.0, 8.0]),
            axis2: Axis::new("lambda_slash", &[0.05, 0.1, 0.2, 0.3, 0.4, 0.5]),
            base: Sim3Config::default(),
            burn_in: DEFAULT_BURN_IN,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.axis1.validate()?;
        self.axis2.validate()?;
        if self.axis1.name == self.axis2.name {
            return Err(Error::Config(format!(
                "both axes vary {:?}",
                self.axis1.name
            )));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(Error::Config(format!(
                "burn_in must lie in [0, 1), got {}",
                self.burn_in
            )));
        }
        if self.base.sim.trajectories == 0 {
            return Err(Error::Config("trajectories must be at least 1".into()));
        }
        // every cell must be a valid config
        for &v1 in &self.axis1.values {
            for &v2 in &self.axis2.values {
                self.cell_config(v1, v2)?.validate()?;
            }
        }
        Ok(())
    }

    pub fn cell_config(&self, v1: f64, v2: f64) -> Result<Sim3Config> {
        let mut cfg = self.base.clone();
        set_param(&mut cfg, &self.axis1.name, v1)?;
        set_param(&mut cfg, &self.axis2.name, v2)?;
        Ok(cfg)
    }

    fn fingerprint(&self) -> String {
        format!("{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricStat {
    pub metric: String,
    /// Mean over trajectories of each trajectory's mean over heights.
    pub mean: f64,
    /// Mean over trajectories of each trajectory's standard deviation over heights.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub i1: usize,
    pub i2: usize,
    pub v1: f64,
    pub v2: f64,
    pub stats: Vec<MetricStat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub kind: SimKind,
    pub axis1: Axis,
    pub axis2: Axis,
    /// Row-major over `(axis1, axis2)`.
    pub cells: Vec<CellResult>,
}

impl SweepGrid {
    pub fn cell(&self, i1: usize, i2: usize) -> &CellResult {
        &self.cells[i1 * self.axis2.values.len() + i2]
    }

    pub fn stat(&self, i1: usize, i2: usize, metric: &str) -> Option<&MetricStat> {
        self.cell(i1, i2).stats.iter().find(|m| m.metric == metric)
    }
}

fn metric_value(row: &TrajectoryRow, metric: &str) -> f64 {
    let w = row.w.unwrap_or([0.0; 3]);
    match metric {
        "gini" => row.gini,
        "norm_ratio" => row.norm_ratio,
        "supply_ratio" => row.supply_ratio,
        "frac_defaulted" => row.frac_defaulted,
        "w_s" => w[0],
        "w_d" => w[1],
        "w_l" => w[2],
        _ => unreachable!("metric names come from SimKind::metrics"),
    }
}

/// Per-trajectory mean and standard deviation of every metric over the
/// sampled heights that survive burn-in.
pub fn trajectory_stats(kind: SimKind, rows: &[TrajectoryRow], burn_in: f64) -> Vec<(f64, f64)> {
    let skip = ((rows.len() as f64) * burn_in).floor() as usize;
    let kept = &rows[skip.min(rows.len())..];
    kind.metrics()
        .iter()
        .map(|m| mean_std(&kept.iter().map(|r| metric_value(r, m)).collect::<Vec<_>>()))
        .collect()
}

/// Reduce trajectories (in the given order) to one stat per metric.
pub fn aggregate(
    kind: SimKind,
    trajectories: &[Vec<TrajectoryRow>],
    burn_in: f64,
) -> Vec<MetricStat> {
    let per: Vec<Vec<(f64, f64)>> = trajectories
        .iter()
        .map(|t| trajectory_stats(kind, t, burn_in))
        .collect();
    kind.metrics()
        .iter()
        .enumerate()
        .map(|(j, m)| {
            let n = per.len().max(1) as f64;
            MetricStat {
                metric: (*m).to_owned(),
                mean: per.iter().map(|p| p[j].0).sum::<f64>() / n,
                std: per.iter().map(|p| p[j].1).sum::<f64>() / n,
            }
        })
        .collect()
}

/// One trajectory as harness rows.
pub fn run_one(kind: SimKind, cfg: &Sim3Config, seed: u64) -> Result<Vec<TrajectoryRow>> {
    Ok(match kind {
        SimKind::Sim2 => run_trajectory2(&cfg.sim, seed)?
            .rows
            .iter()
            .map(TrajectoryRow::from)
            .collect(),
        SimKind::Sim3 => run_trajectory3(cfg, seed)?
            .rows
            .iter()
            .map(TrajectoryRow::from)
            .collect(),
    })
}

/// All trajectories of cell `(i1, i2)`, in trajectory order.
pub fn run_cell(
    kind: SimKind,
    cfg: &Sim3Config,
    i1: usize,
    i2: usize,
) -> Result<Vec<Vec<TrajectoryRow>>> {
    (0..cfg.sim.trajectories)
        .into_par_iter()
        .map(|t| {
            run_one(
                kind,
                cfg,
                cell_seed(cfg.sim.seed, i1 as u64, i2 as u64, t as u64),
            )
        })
        .collect()
}

/// A direct run is cell `(0, 0)` of a one-cell grid.
pub fn run_direct(
    kind: SimKind,
    cfg: &Sim3Config,
    threads: usize,
) -> Result<Vec<Vec<TrajectoryRow>>> {
    cfg.validate()?;
    pool(threads)?.install(|| run_cell(kind, cfg, 0, 0))
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Internal(format!("cannot build worker pool: {e}")))
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Manifest {
    fingerprint: String,
    completed: BTreeMap<String, CellResult>,
}

fn cell_key(i1: usize, i2: usize) -> String {
    format!("{i1},{i2}")
}

fn load_manifest(path: &Path, fingerprint: &str) -> Result<Manifest> {
    let fresh = || Manifest {
        fingerprint: fingerprint.to_owned(),
        completed: BTreeMap::new(),
    };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(fresh()),
        Err(e) => return Err(Error::io_with(path.display().to_string(), e)),
    };
    match serde_json::from_str::<Manifest>(&text) {
        Ok(m) if m.fingerprint == fingerprint => Ok(m),
        Ok(_) => {
            log::warn!(
                "{}: manifest belongs to a different sweep, starting over",
                path.display()
            );
            Ok(fresh())
        }
        Err(e) => {
            log::warn!(
                "{}: unreadable manifest ({e}), starting over",
                path.display()
            );
            Ok(fresh())
        }
    }
}

fn save_manifest(path: &Path, m: &Manifest) -> Result<()> {
    let json = serde_json::to_vec_pretty(m)
        .map_err(|e| Error::Internal(format!("manifest encoding: {e}")))?;
    write_atomic(path, &json)
}

/// Run every cell of the grid on `threads` workers. With a manifest path,
/// cells already recorded there are reused and each newly completed cell is
/// persisted before the next one is reported.
pub fn run_sweep(spec: &SweepSpec, threads: usize, manifest: Option<&Path>) -> Result<SweepGrid> {
    spec.validate()?;
    let fingerprint = spec.fingerprint();
    let state = match manifest {
        Some(p) => Some(Mutex::new(load_manifest(p, &fingerprint)?)),
        None => None,
    };
    let coords: Vec<(usize, usize)> = (0..spec.axis1.values.len())
        .flat_map(|i1| (0..spec.axis2.values.len()).map(move |i2| (i1, i2)))
        .collect();

    let cells: Vec<CellResult> = pool(threads)?.install(|| {
        coords
            .par_iter()
            .map(|&(i1, i2)| {
                let (v1, v2) = (spec.axis1.values[i1], spec.axis2.values[i2]);
                if let Some(done) = state
                    .as_ref()
                    .and_then(|s| s.lock().unwrap().completed.get(&cell_key(i1, i2)).cloned())
                {
                    return Ok(done);
                }
                let at = |e: Error| match e {
                    Error::Io { context, source } => Error::Io {
                        context: Some(format!(
                            "cell ({}={v1}, {}={v2}){}",
                            spec.axis1.name,
                            spec.axis2.name,
                            context.map(|c| format!(": {c}")).unwrap_or_default()
                        )),
                        source,
                    },
                    other => other,
                };
                let cfg = spec.cell_config(v1, v2)?;
                let trajectories = run_cell(spec.kind, &cfg, i1, i2)?;
                let result = CellResult {
                    i1,
                    i2,
                    v1,
                    v2,
                    stats: aggregate(spec.kind, &trajectories, spec.burn_in),
                };
                if let (Some(s), Some(p)) = (&state, manifest) {
                    let mut m = s.lock().unwrap();
                    m.completed.insert(cell_key(i1, i2), result.clone());
                    save_manifest(p, &m).map_err(at)?;
                }
                log::info!("cell ({i1}, {i2}) done");
                Ok(result)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    Ok(SweepGrid {
        kind: spec.kind,
        axis1: spec.axis1.clone(),
        axis2: spec.axis2.clone(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim2::Sim2Config;

    fn tiny(kind: SimKind) -> SweepSpec {
        SweepSpec {
            kind,
            axis1: Axis::new("lambda_borrow", &[0.2, 0.8]),
            axis2: Axis::new("lambda_slash", &[0.1, 0.5]),
            base: Sim3Config {
                sim: Sim2Config {
                    n: 10,
                    h_max: 300,
                    trajectories: 3,
                    sample_stride: 10,
                    seed: 7,
                    ..Sim2Config::default()
                },
                ..Sim3Config::default()
            },
            burn_in: DEFAULT_BURN_IN,
        }
    }

    #[test]
    fn validation() {
        tiny(SimKind::Sim2).validate().unwrap();
        let mut s = tiny(SimKind::Sim2);
        s.axis1.values = vec![0.5, 0.5];
        assert!(matches!(s.validate(), Err(Error::Config(_))));
        let mut s = tiny(SimKind::Sim2);
        s.axis1.values.clear();
        assert!(s.validate().is_err());
        let mut s = tiny(SimKind::Sim2);
        s.axis2.name = "bogus".into();
        assert!(s.validate().is_err());
        let mut s = tiny(SimKind::Sim2);
        s.axis2 = Axis::new("eta", &[2.5]);
        assert!(s.validate().is_err());
        SweepSpec::default_sim2().validate().unwrap();
        SweepSpec::default_sim3().validate().unwrap();
    }

    #[test]
    fn thread_count_does_not_matter() {
        for kind in [SimKind::Sim2, SimKind::Sim3] {
            let a = run_sweep(&tiny(kind), 1, None).unwrap();
            let b = run_sweep(&tiny(kind), 4, None).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.cells.len(), 4);
            assert_eq!(a.cell(1, 0).v1, 0.8);
            assert_eq!(a.cells[0].stats.len(), kind.metrics().len());
        }
    }

    #[test]
    fn manifest_resumes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let spec = tiny(SimKind::Sim2);
        let first = run_sweep(&spec, 2, Some(&path)).unwrap();
        assert!(path.exists());
        // tamper with a stored result: a rerun must reuse it rather than recompute
        let mut m: Manifest =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        m.completed.get_mut("0,0").unwrap().stats[0].mean = -1.0;
        save_manifest(&path, &m).unwrap();
        let second = run_sweep(&spec, 2, Some(&path)).unwrap();
        assert_eq!(second.cell(0, 0).stats[0].mean, -1.0);
        assert_eq!(second.cell(1, 1), first.cell(1, 1));
        // a different spec ignores the manifest
        let mut other = spec.clone();
        other.burn_in = 0.2;
        let third = run_sweep(&other, 2, Some(&path)).unwrap();
        assert!(third.cell(0, 0).stats[0].mean >= 0.0);
    }

    #[test]
    fn burn_in_drops_leading_rows() {
        let rows: Vec<TrajectoryRow> = (0..10)
            .map(|h| TrajectoryRow {
                h,
                gini: if h == 0 { 100.0 } else { 1.0 },
                norm_ratio: 0.0,
                supply_ratio: 0.0,
                frac_defaulted: 0.0,
                w: None,
            })
            .collect();
        assert_eq!(trajectory_stats(SimKind::Sim2, &rows, 0.1)[0], (1.0, 0.0));
        assert!(trajectory_stats(SimKind::Sim2, &rows, 0.0)[0].0 > 1.0);
    }
}
