//! Timing harness comparing the phase engine with the distance-based
//! baselines. Only algorithm execution is timed; loading happens before.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{db_nested_loop, dk_outliers};
use crate::config::ValidatedConfig;
use crate::error::{Error, Result};
use crate::korm::korm_run_points;
use crate::metric::Metric;
use crate::point::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchMethod {
    Korm,
    Dk,
    DbNestedLoop,
}

impl BenchMethod {
    pub fn name(self) -> &'static str {
        match self {
            BenchMethod::Korm => "korm",
            BenchMethod::Dk => "dk",
            BenchMethod::DbNestedLoop => "db_nested_loop",
        }
    }
}

impl std::str::FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "korm" => Ok(BenchMethod::Korm),
            "dk" => Ok(BenchMethod::Dk),
            "db-nl" | "db_nested_loop" | "db" => Ok(BenchMethod::DbNestedLoop),
            other => Err(Error::range("method", format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchParams {
    pub korm: ValidatedConfig,
    pub knn: usize,
    pub top_n: usize,
    pub radius: f64,
    pub fraction: f64,
    pub baseline_metric: Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub method: BenchMethod,
    pub dataset: String,
    pub n: usize,
    pub parameters: String,
    pub rep: usize,
    pub cpu_seconds: f64,
    pub wall_seconds: f64,
    pub peak_retained: usize,
}

/// Process CPU time in seconds, where the platform exposes it.
pub fn process_cpu_seconds() -> Option<f64> {
    #[cfg(unix)]
    {
        let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
        // SAFETY: `ts` is a valid, writable timespec.
        let rc = unsafe { libc::clock_gettime(libc::CLOCK_PROCESS_CPUTIME_ID, &mut ts) };
        if rc == 0 {
            return Some(ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9);
        }
        None
    }
    #[cfg(not(unix))]
    {
        None
    }
}

/// Wall and CPU seconds spent in `f`.
pub fn measure<T>(f: impl FnOnce() -> T) -> (T, f64, Option<f64>) {
    let cpu0 = process_cpu_seconds();
    let t0 = Instant::now();
    let out = f();
    let wall = t0.elapsed().as_secs_f64();
    let cpu = match (cpu0, process_cpu_seconds()) {
        (Some(a), Some(b)) => Some(b - a),
        _ => None,
    };
    (out, wall, cpu)
}

fn describe(method: BenchMethod, p: &BenchParams) -> String {
    match method {
        BenchMethod::Korm => format!(
            "k={} O={} gamma={} beta={} num={} seed={}",
            p.korm.k, p.korm.score_threshold, p.korm.gamma, p.korm.beta, p.korm.chunk_size, p.korm.seed
        ),
        BenchMethod::Dk => format!("K={} n={}", p.knn, p.top_n),
        BenchMethod::DbNestedLoop => format!("D={} p={}", p.radius, p.fraction),
    }
}

/// Run one method once; returns (cpu or wall seconds, wall seconds, peak retained points).
pub fn time_once(method: BenchMethod, points: &[Point], p: &BenchParams) -> Result<(f64, f64, usize)> {
    let (peak, wall, cpu) = match method {
        BenchMethod::Korm => {
            let (r, wall, cpu) = measure(|| korm_run_points(points, &p.korm));
            (r.map_err(|a| a.error)?.peak_retained, wall, cpu)
        }
        BenchMethod::Dk => {
            let (r, wall, cpu) = measure(|| dk_outliers(points, p.knn, p.top_n, p.baseline_metric));
            r?;
            (points.len(), wall, cpu)
        }
        BenchMethod::DbNestedLoop => {
            let (r, wall, cpu) =
                measure(|| db_nested_loop(points, p.radius, p.fraction, p.baseline_metric));
            r?;
            (points.len(), wall, cpu)
        }
    };
    // clock granularity can report zero for tiny inputs
    let cpu = cpu.unwrap_or(wall).max(1e-9);
    Ok((cpu, wall.max(1e-9), peak))
}

/// Every method `reps` times, one after another, never interleaved.
pub fn run_bench(
    dataset: &str,
    points: &[Point],
    methods: &[BenchMethod],
    reps: usize,
    params: &BenchParams,
) -> Result<Vec<BenchRecord>> {
    if reps == 0 {
        return Err(Error::range("reps", "must be at least 1"));
    }
    let mut out = Vec::with_capacity(methods.len() * reps);
    for &method in methods {
        for rep in 0..reps {
            let (cpu_seconds, wall_seconds, peak_retained) = time_once(method, points, params)?;
            out.push(BenchRecord {
                method,
                dataset: dataset.to_string(),
                n: points.len(),
                parameters: describe(method, params),
                rep,
                cpu_seconds,
                wall_seconds,
                peak_retained,
            });
        }
    }
    Ok(out)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub method: BenchMethod,
    pub dataset: String,
    pub n: usize,
    pub parameters: String,
    pub reps: usize,
    pub median_cpu_seconds: f64,
    pub median_wall_seconds: f64,
    pub peak_retained: usize,
}

/// Per-method medians, in first-appearance order.
pub fn summarize(records: &[BenchRecord]) -> Vec<BenchSummary> {
    let mut methods: Vec<BenchMethod> = Vec::new();
    for r in records {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
    }
    methods
        .into_iter()
        .map(|m| {
            let rs: Vec<&BenchRecord> = records.iter().filter(|r| r.method == m).collect();
            BenchSummary {
                method: m,
                dataset: rs[0].dataset.clone(),
                n: rs[0].n,
                parameters: rs[0].parameters.clone(),
                reps: rs.len(),
                median_cpu_seconds: median(rs.iter().map(|r| r.cpu_seconds).collect()),
                median_wall_seconds: median(rs.iter().map(|r| r.wall_seconds).collect()),
                peak_retained: rs.iter().map(|r| r.peak_retained).max().unwrap_or(0),
            }
        })
        .collect()
}

pub fn summary_csv(rows: &[BenchSummary]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let err = |e: csv::Error| Error::Report(e.to_string());
    w.write_record([
        "method",
        "dataset",
        "n",
        "parameters",
        "reps",
        "median_cpu_seconds",
        "median_wall_seconds",
        "peak_retained",
    ])
    .map_err(err)?;
    for r in rows {
        w.write_record([
            r.method.name().to_string(),
            r.dataset.clone(),
            r.n.to_string(),
            r.parameters.clone(),
            r.reps.to_string(),
            format!("{:.9}", r.median_cpu_seconds),
            format!("{:.9}", r.median_wall_seconds),
            r.peak_retained.to_string(),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Report(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
