//! Machine-readable run reports.
//!
//! JSON is canonical: fields are emitted in declaration order and every real
//! number is written with 17 significant digits (`{:.16e}`), so parsing a
//! report and emitting it again reproduces the same bytes.

use std::fmt;

use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::korm::{InvocationStat, KormRun, OutlierVerdict, Verdict, VerdictCause};
use crate::online_fl::HaltReason;
use crate::point::WeightedMedian;

pub const FORMAT_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// A real number with fixed 17-significant-digit JSON formatting.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Real(pub f64);

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.16e}", self.0)
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(serde::ser::Error::custom(format!("non-finite value {}", self.0)));
        }
        let raw = serde_json::value::RawValue::from_string(self.to_string())
            .map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        f64::deserialize(d).map(Real)
    }
}

fn reals(v: &[f64]) -> Vec<Real> {
    v.iter().copied().map(Real).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRecord {
    pub k: usize,
    pub score_threshold: u32,
    pub gamma: Real,
    pub beta: Real,
    pub chunk_size: usize,
    pub seed: u64,
    pub metric: String,
    pub log_base: String,
    pub invocation_factor: u32,
    pub stream_len: u64,
    pub invocations: u32,
    pub median_bound: Real,
}

/// Where the stream came from, when it came from a file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub path: String,
    pub sha256: String,
    pub schema: Vec<String>,
    pub has_header: bool,
    pub min_max_scaled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool: String,
    pub tool_version: String,
    pub rng: String,
    pub config: ConfigRecord,
    pub stream_digest: String,
    pub points_read: u64,
    pub dimension: Option<usize>,
    pub source: Option<SourceRecord>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcoRecord {
    pub median_id: u64,
    pub since: u32,
    pub score: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub median_id: u64,
    pub verdict: Verdict,
    pub cause: VerdictCause,
    pub score: u32,
    pub since: Option<u32>,
    pub weight: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvocationRecord {
    pub invocation: u32,
    pub consumed: usize,
    pub cost: Real,
    pub facilities: usize,
    pub halt: HaltReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: u32,
    pub lower_bound: Real,
    pub facility_cost: Real,
    pub medians: usize,
    pub facilities: usize,
    pub solution_cost: Real,
    pub sum_sq_dist: Real,
    pub points_read: usize,
    pub total_read: u64,
    pub retained: usize,
    pub retained_bound: Real,
    pub winner: u32,
    pub tco: Vec<TcoRecord>,
    pub verdicts: Vec<VerdictRecord>,
    pub invocations: Option<Vec<InvocationRecord>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianRecord {
    pub id: u64,
    pub location: Vec<Real>,
    pub weight: Real,
    pub created_phase: u32,
    pub outlier_score: u32,
    pub tco_since_phase: Option<u32>,
    /// Cleared as an inlier at least once.
    pub cleared: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierRecord {
    pub id: u64,
    pub location: Vec<Real>,
    pub weight: Real,
    pub created_phase: u32,
    pub decided_phase: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingRecord {
    pub median_id: u64,
    pub since: u32,
    pub score: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub phases: usize,
    pub sum_sq_dist: Real,
    pub total_solution_cost: Real,
    pub real_outliers: usize,
    pub peak_retained: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: Real,
    pub cpu_seconds: Option<Real>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortRecord {
    pub error: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub format_version: u32,
    pub metadata: RunMetadata,
    pub phases: Vec<PhaseRecord>,
    pub final_medians: Vec<MedianRecord>,
    pub real_outliers: Vec<OutlierRecord>,
    pub pending: Vec<PendingRecord>,
    pub aggregates: Aggregates,
    pub abort: Option<AbortRecord>,
    pub timing: Option<Timing>,
}

fn verdict_record(v: &OutlierVerdict) -> VerdictRecord {
    VerdictRecord {
        median_id: v.median.id.0,
        verdict: v.verdict,
        cause: v.cause,
        score: v.median.outlier_score,
        since: v.median.tco_since_phase,
        weight: Real(v.median.weight),
    }
}

fn invocation_record(s: &InvocationStat) -> InvocationRecord {
    InvocationRecord {
        invocation: s.invocation,
        consumed: s.consumed,
        cost: Real(s.cost),
        facilities: s.facilities,
        halt: s.halt,
    }
}

impl OutlierReport {
    /// Build the report for a finished run. `abort` carries the error of an
    /// aborted run whose completed phases are in `run`.
    pub fn from_run(run: &KormRun, abort: Option<&Error>) -> Self {
        let cfg = run.config.get();
        let schedule = &run.schedule;
        let cleared: std::collections::BTreeSet<u64> = run
            .phases
            .iter()
            .flat_map(|p| &p.verdicts)
            .filter(|v| v.verdict == Verdict::Inlier)
            .map(|v| v.median.id.0)
            .collect();
        let phases: Vec<PhaseRecord> = run
            .phases
            .iter()
            .map(|p| PhaseRecord {
                phase: p.phase,
                lower_bound: Real(p.lower_bound),
                facility_cost: Real(p.facility_cost),
                medians: p.medians,
                facilities: p.facilities,
                solution_cost: Real(p.solution_cost),
                sum_sq_dist: Real(p.sum_sq_dist),
                points_read: p.points_read,
                total_read: p.total_read,
                retained: p.retained,
                retained_bound: Real(p.retained_bound),
                winner: p.winner,
                tco: p
                    .tco_events
                    .iter()
                    .map(|e| TcoRecord {
                        median_id: e.id.0,
                        since: e.since,
                        score: e.score,
                    })
                    .collect(),
                verdicts: p.verdicts.iter().map(verdict_record).collect(),
                invocations: cfg
                    .trace
                    .then(|| p.invocations.iter().map(invocation_record).collect()),
            })
            .collect();
        let median = |m: &WeightedMedian| MedianRecord {
            id: m.id.0,
            location: reals(m.location.coords()),
            weight: Real(m.weight),
            created_phase: m.created_phase,
            outlier_score: m.outlier_score,
            tco_since_phase: m.tco_since_phase,
            cleared: cleared.contains(&m.id.0),
        };
        let mut final_medians: Vec<MedianRecord> = run.final_medians.iter().map(median).collect();
        final_medians.sort_by_key(|m| m.id);
        let real_outliers: Vec<OutlierRecord> = run
            .real_outliers
            .iter()
            .map(|v| OutlierRecord {
                id: v.median.id.0,
                location: reals(v.median.location.coords()),
                weight: Real(v.median.weight),
                created_phase: v.median.created_phase,
                decided_phase: v.decided_phase,
            })
            .collect();
        let aggregates = Aggregates::recompute(&phases);
        OutlierReport {
            format_version: FORMAT_VERSION,
            metadata: RunMetadata {
                tool: "korm".into(),
                tool_version: TOOL_VERSION.into(),
                rng: crate::rng::RNG_ID.into(),
                config: ConfigRecord {
                    k: cfg.k,
                    score_threshold: cfg.score_threshold,
                    gamma: Real(cfg.gamma),
                    beta: Real(cfg.beta),
                    chunk_size: cfg.chunk_size,
                    seed: cfg.seed,
                    metric: cfg.metric.name().into(),
                    log_base: match cfg.log_base {
                        crate::LogBase::Two => "2".into(),
                        crate::LogBase::Natural => "e".into(),
                    },
                    invocation_factor: cfg.invocation_factor,
                    stream_len: schedule.n,
                    invocations: schedule.invocations(),
                    median_bound: Real(schedule.median_bound()),
                },
                stream_digest: run.stream_digest.clone(),
                points_read: run.points_read,
                dimension: run.dimension,
                source: None,
                warnings: run.config.warnings().to_vec(),
                notes: Vec::new(),
            },
            phases,
            final_medians,
            real_outliers,
            pending: run
                .pending
                .iter()
                .map(|(id, e)| PendingRecord {
                    median_id: id.0,
                    since: e.since,
                    score: e.score,
                })
                .collect(),
            aggregates,
            abort: abort.map(|e| AbortRecord {
                error: e.kind().into(),
                message: e.to_string(),
            }),
            timing: None,
        }
    }

    /// Aggregates and outlier lists must agree with the per-phase records.
    pub fn check_consistency(&self) -> Result<()> {
        let expect = Aggregates::recompute(&self.phases);
        if expect != self.aggregates {
            return Err(Error::Report(format!(
                "aggregates {:?} disagree with phase records {:?}",
                self.aggregates, expect
            )));
        }
        let declared: Vec<u64> = self
            .phases
            .iter()
            .flat_map(|p| &p.verdicts)
            .filter(|v| v.verdict == Verdict::RealOutlier)
            .map(|v| v.median_id)
            .collect();
        let mut sorted = declared.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != declared.len() {
            return Err(Error::Report("a real outlier is declared in more than one phase".into()));
        }
        let listed: Vec<u64> = self.real_outliers.iter().map(|o| o.id).collect();
        if listed != declared {
            return Err(Error::Report("real outlier list disagrees with phase verdicts".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        self.check_consistency()?;
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Report(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: OutlierReport =
            serde_json::from_str(text).map_err(|e| Error::Report(e.to_string()))?;
        if report.format_version != FORMAT_VERSION {
            return Err(Error::Report(format!(
                "unsupported format version {}",
                report.format_version
            )));
        }
        report.check_consistency()?;
        Ok(report)
    }

    /// Per-phase records flattened to CSV.
    pub fn to_csv(&self) -> Result<String> {
        self.check_consistency()?;
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Report(e.to_string());
        w.write_record([
            "phase",
            "lower_bound",
            "facility_cost",
            "medians",
            "facilities",
            "solution_cost",
            "sum_sq_dist",
            "points_read",
            "total_read",
            "retained",
            "tco_events",
            "real_outliers",
            "inliers",
        ])
        .map_err(csv_err)?;
        for p in &self.phases {
            let count = |v: Verdict| p.verdicts.iter().filter(|r| r.verdict == v).count();
            w.write_record([
                p.phase.to_string(),
                p.lower_bound.to_string(),
                p.facility_cost.to_string(),
                p.medians.to_string(),
                p.facilities.to_string(),
                p.solution_cost.to_string(),
                p.sum_sq_dist.to_string(),
                p.points_read.to_string(),
                p.total_read.to_string(),
                p.retained.to_string(),
                p.tco.len().to_string(),
                count(Verdict::RealOutlier).to_string(),
                count(Verdict::Inlier).to_string(),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Report(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

impl Aggregates {
    pub fn recompute(phases: &[PhaseRecord]) -> Self {
        Aggregates {
            phases: phases.len(),
            sum_sq_dist: Real(phases.iter().map(|p| p.sum_sq_dist.0).sum()),
            total_solution_cost: Real(phases.iter().map(|p| p.solution_cost.0).sum()),
            real_outliers: phases
                .iter()
                .flat_map(|p| &p.verdicts)
                .filter(|v| v.verdict == Verdict::RealOutlier)
                .count(),
            peak_retained: phases.iter().map(|p| p.retained).max().unwrap_or(0),
        }
    }
}

/// Plot rows: every final median and real outlier projected onto two
/// zero-based dimensions.
pub fn plot_data(report: &OutlierReport, dims: (usize, usize)) -> Result<String> {
    if let Some(d) = report.metadata.dimension {
        for i in [dims.0, dims.1] {
            if i >= d {
                return Err(Error::range("dims", format!("dimension {i} out of range for {d}-d data")));
            }
        }
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Report(e.to_string());
    w.write_record(["role", "id", "x", "y", "weight", "decided_phase"])
        .map_err(csv_err)?;
    let coord = |loc: &[Real], i: usize| -> Result<String> {
        loc.get(i)
            .map(Real::to_string)
            .ok_or_else(|| Error::Report(format!("location has no dimension {i}")))
    };
    for m in &report.final_medians {
        let role = if m.cleared { "inlier-cleared" } else { "median" };
        w.write_record([
            role.to_string(),
            m.id.to_string(),
            coord(&m.location, dims.0)?,
            coord(&m.location, dims.1)?,
            m.weight.to_string(),
            String::new(),
        ])
        .map_err(csv_err)?;
    }
    for o in &report.real_outliers {
        w.write_record([
            "real_outlier".to_string(),
            o.id.to_string(),
            coord(&o.location, dims.0)?,
            coord(&o.location, dims.1)?,
            o.weight.to_string(),
            o.decided_phase.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Report(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Outcome of a baseline method, in the same envelope as [`OutlierReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub format_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub method: String,
    pub metric: String,
    pub parameters: std::collections::BTreeMap<String, Real>,
    pub source: Option<SourceRecord>,
    pub points: usize,
    /// Ranked entries for DK; plain outlier indices (score 0) for DB(p,D).
    pub ranking: Vec<RankedPoint>,
    pub outliers: Vec<usize>,
    pub timing: Option<Timing>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPoint {
    pub index: usize,
    pub score: Real,
}

impl BaselineReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Report(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}
