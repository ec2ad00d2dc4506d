//! CSV emission and parsing. Floats are written with Rust's shortest
//! round-trip formatting, so parsing a file reproduces the values exactly.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::analytic::AnalyticRow;
use crate::harness::sweep::SweepGrid;
use crate::sim2::Sample2;
use crate::sim3::Sample3;

pub const TRAJECTORY_HEADER: [&str; 8] = [
    "h",
    "gini",
    "norm_ratio",
    "supply_ratio",
    "frac_defaulted",
    "w_s",
    "w_d",
    "w_l",
];
pub const SWEEP_HEADER: [&str; 7] = [
    "axis1_name",
    "axis1_value",
    "axis2_name",
    "axis2_value",
    "metric",
    "stat",
    "value",
];
pub const ANALYTIC_HEADER: [&str; 7] = ["p", "gamma", "beta", "aleph", "k", "sigma_s2", "s_star"];

/// One sampled height of either simulation; `w` is absent for the
/// two-component model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub h: u64,
    pub gini: f64,
    pub norm_ratio: f64,
    pub supply_ratio: f64,
    pub frac_defaulted: f64,
    pub w: Option<[f64; 3]>,
}

impl From<&Sample2> for TrajectoryRow {
    fn from(s: &Sample2) -> Self {
        TrajectoryRow {
            h: s.h,
            gini: s.gini,
            norm_ratio: s.norm_ratio,
            supply_ratio: s.supply_ratio,
            frac_defaulted: s.frac_defaulted,
            w: None,
        }
    }
}

impl From<&Sample3> for TrajectoryRow {
    fn from(s: &Sample3) -> Self {
        TrajectoryRow {
            h: s.h,
            gini: s.gini,
            norm_ratio: s.norm_ratio,
            supply_ratio: s.supply_ratio,
            frac_defaulted: s.frac_defaulted,
            w: Some(s.w),
        }
    }
}

fn num(x: f64) -> Result<String> {
    if !x.is_finite() {
        return Err(Error::Internal(format!(
            "refusing to emit non-finite value {x}"
        )));
    }
    Ok(format!("{x}"))
}

fn opt(x: Option<f64>) -> Result<String> {
    x.map(num).transpose().map(Option::unwrap_or_default)
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse()
        .map_err(|e| Error::Config(format!("bad number {s:?}: {e}")))
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_f64(s).map(Some)
    }
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    let f = File::create(path).map_err(|e| Error::io_with(path.display().to_string(), e))?;
    Ok(csv::Writer::from_writer(f))
}

fn finish(mut w: csv::Writer<File>, path: &Path) -> Result<()> {
    w.flush()
        .map_err(|e| Error::io_with(path.display().to_string(), e))?;
    let f = w
        .into_inner()
        .map_err(|e| Error::io_with(path.display().to_string(), e.into_error()))?;
    f.sync_all()
        .map_err(|e| Error::io_with(path.display().to_string(), e))
}

pub fn write_trajectory(path: &Path, rows: &[TrajectoryRow]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(TRAJECTORY_HEADER)?;
    for r in rows {
        let [ws, wd, wl] = match r.w {
            Some(w) => w.map(Some),
            None => [None; 3],
        };
        w.write_record([
            r.h.to_string(),
            num(r.gini)?,
            num(r.norm_ratio)?,
            num(r.supply_ratio)?,
            num(r.frac_defaulted)?,
            opt(ws)?,
            opt(wd)?,
            opt(wl)?,
        ])?;
    }
    finish(w, path)
}

fn open(path: &Path, header: &[&str]) -> Result<csv::Reader<File>> {
    let f = File::open(path).map_err(|e| Error::io_with(path.display().to_string(), e))?;
    let mut r = csv::Reader::from_reader(f);
    let found: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if found != header {
        return Err(Error::Config(format!(
            "{}: unexpected header {found:?}",
            path.display()
        )));
    }
    Ok(r)
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>> {
    let mut r = open(path, &TRAJECTORY_HEADER)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let ws = [
            parse_opt(&rec[5])?,
            parse_opt(&rec[6])?,
            parse_opt(&rec[7])?,
        ];
        let w = match ws {
            [Some(a), Some(b), Some(c)] => Some([a, b, c]),
            [None, None, None] => None,
            _ => {
                return Err(Error::Config(format!(
                    "{}: partial weight columns",
                    path.display()
                )))
            }
        };
        out.push(TrajectoryRow {
            h: rec[0]
                .parse()
                .map_err(|e| Error::Config(format!("bad height {:?}: {e}", &rec[0])))?,
            gini: parse_f64(&rec[1])?,
            norm_ratio: parse_f64(&rec[2])?,
            supply_ratio: parse_f64(&rec[3])?,
            frac_defaulted: parse_f64(&rec[4])?,
            w,
        });
    }
    Ok(out)
}

/// Flat sweep row as it appears on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis1_name: String,
    pub axis1_value: f64,
    pub axis2_name: String,
    pub axis2_value: f64,
    pub metric: String,
    pub stat: String,
    pub value: f64,
}

pub fn sweep_rows(grid: &SweepGrid) -> Vec<SweepRow> {
    let mut out = Vec::new();
    for cell in &grid.cells {
        for m in &cell.stats {
            for (stat, value) in [("mean", m.mean), ("std", m.std)] {
                out.push(SweepRow {
                    axis1_name: grid.axis1.name.clone(),
                    axis1_value: cell.v1,
                    axis2_name: grid.axis2.name.clone(),
                    axis2_value: cell.v2,
                    metric: m.metric.clone(),
                    stat: stat.to_owned(),
                    value,
                });
            }
        }
    }
    out
}

pub fn write_sweep(path: &Path, grid: &SweepGrid) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(SWEEP_HEADER)?;
    for r in sweep_rows(grid) {
        w.write_record([
            r.axis1_name,
            num(r.axis1_value)?,
            r.axis2_name,
            num(r.axis2_value)?,
            r.metric,
            r.stat,
            num(r.value)?,
        ])?;
    }
    finish(w, path)
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = open(path, &SWEEP_HEADER)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        out.push(SweepRow {
            axis1_name: rec[0].to_owned(),
            axis1_value: parse_f64(&rec[1])?,
            axis2_name: rec[2].to_owned(),
            axis2_value: parse_f64(&rec[3])?,
            metric: rec[4].to_owned(),
            stat: rec[5].to_owned(),
            value: parse_f64(&rec[6])?,
        });
    }
    Ok(out)
}

pub fn write_analytic(path: &Path, rows: &[AnalyticRow]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(ANALYTIC_HEADER)?;
    for r in rows {
        w.write_record([
            num(r.p)?,
            num(r.gamma)?,
            opt(r.beta)?,
            opt(r.aleph)?,
            num(r.k)?,
            num(r.sigma_s2)?,
            num(r.s_star)?,
        ])?;
    }
    finish(w, path)
}

pub fn read_analytic(path: &Path) -> Result<Vec<AnalyticRow>> {
    let mut r = open(path, &ANALYTIC_HEADER)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        out.push(AnalyticRow {
            p: parse_f64(&rec[0])?,
            gamma: parse_f64(&rec[1])?,
            beta: parse_opt(&rec[2])?,
            aleph: parse_opt(&rec[3])?,
            k: parse_f64(&rec[4])?,
            sigma_s2: parse_f64(&rec[5])?,
            s_star: parse_f64(&rec[6])?,
        });
    }
    Ok(out)
}

/// Write `bytes` to `path` atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let ctx = || tmp.display().to_string();
    let mut f = File::create(&tmp).map_err(|e| Error::io_with(ctx(), e))?;
    f.write_all(bytes).map_err(|e| Error::io_with(ctx(), e))?;
    f.sync_all().map_err(|e| Error::io_with(ctx(), e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io_with(path.display().to_string(), e))
}
