//! Phase engine: lower-bound initialization, per-phase clustering with
//! parallel ONLINE-FL invocations, weighted-median carry-over and the
//! temporal-candidate-outlier lifecycle.

use std::collections::{BTreeMap, VecDeque};

use sha2::{Digest, Sha256};

use crate::config::{LogBase, ValidatedConfig};
use crate::error::{Error, Result};
use crate::ingest::Chunk;
use crate::metric::Metric;
use crate::online_fl::{online_fl_run, FlRun, HaltReason, StopCondition};
use crate::point::{MedianId, Point, WeightedMedian};
use crate::rng::RngStream;

/// The per-phase formulas, all driven by the same `log n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub k: usize,
    pub n: u64,
    pub gamma: f64,
    pub beta: f64,
    pub log_base: LogBase,
    pub invocation_factor: u32,
}

impl Schedule {
    pub fn from_config(cfg: &ValidatedConfig) -> Result<Self> {
        let n = cfg.stream_len.ok_or(Error::MissingStreamLength)?;
        Ok(Schedule {
            k: cfg.k,
            n,
            gamma: cfg.gamma,
            beta: cfg.beta,
            log_base: cfg.log_base,
            invocation_factor: cfg.invocation_factor,
        })
    }

    pub fn log_n(&self) -> f64 {
        self.log_base.log(self.n as f64)
    }

    /// `F_j = L_j / (k (1 + log n))`
    pub fn facility_cost(&self, lower_bound: f64) -> f64 {
        lower_bound / (self.k as f64 * (1.0 + self.log_n()))
    }

    /// `4k(1 + log n)(1 + 4(gamma + beta))`
    pub fn median_bound(&self) -> f64 {
        4.0 * self.k as f64 * (1.0 + self.log_n()) * (1.0 + 4.0 * (self.gamma + self.beta))
    }

    /// `4 L_j (1 + 4(gamma + beta))`
    pub fn cost_ceiling(&self, lower_bound: f64) -> f64 {
        4.0 * lower_bound * (1.0 + 4.0 * (self.gamma + self.beta))
    }

    /// `ceil(factor * log n)`, at least one.
    pub fn invocations(&self) -> u32 {
        let m = (f64::from(self.invocation_factor) * self.log_n()).ceil();
        if m.is_finite() && m >= 1.0 {
            m as u32
        } else {
            1
        }
    }

    pub fn stop_condition(&self, lower_bound: f64) -> StopCondition {
        StopCondition {
            max_cost: self.cost_ceiling(lower_bound),
            max_facilities: self.median_bound().floor() as usize,
        }
    }
}

/// Closest-pair distance among the first `k + 1` points.
pub fn set_lb(points: &[Point], k: usize, metric: Metric) -> Result<f64> {
    let head = points.get(..k + 1).ok_or(Error::InsufficientData {
        needed: k + 1,
        available: points.len(),
    })?;
    let mut best = f64::INFINITY;
    for (i, a) in head.iter().enumerate() {
        for b in &head[i + 1..] {
            best = best.min(crate::metric::dist(a, b, metric)?);
        }
    }
    if best <= 0.0 {
        return Err(Error::DegenerateLowerBound { points: k + 1 });
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InvocationStat {
    pub invocation: u32,
    pub consumed: usize,
    pub cost: f64,
    pub facilities: usize,
    pub halt: HaltReason,
}

/// Outcome of one CLUSTER call.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseResult {
    /// Facilities of the winning invocation, as weighted medians.
    pub medians: Vec<WeightedMedian>,
    /// Carried medians the winning invocation never reached; carried on as-is.
    pub untouched: Vec<WeightedMedian>,
    /// Carried medians merged into another facility.
    pub absorbed: Vec<WeightedMedian>,
    pub solution_cost: f64,
    pub sum_sq_dist: f64,
    pub facility_cost: f64,
    /// Raw points marked read by this phase (a prefix of the raw input).
    pub read_boundary: usize,
    pub winner: u32,
    pub invocations: Vec<InvocationStat>,
}

/// Index of the winning run: most points consumed, then lowest cost, then
/// lowest invocation index.
fn better(a: &FlRun, b: &FlRun) -> bool {
    let (ca, cb) = (a.facilities.points_consumed(), b.facilities.points_consumed());
    ca > cb || (ca == cb && a.facilities.total_cost() < b.facilities.total_cost())
}

fn stat(invocation: u32, run: &FlRun) -> InvocationStat {
    InvocationStat {
        invocation,
        consumed: run.facilities.points_consumed(),
        cost: run.facilities.total_cost(),
        facilities: run.facilities.len(),
        halt: run.halt,
    }
}

/// One phase: `carried` medians (already in presentation order) followed by
/// `raw` points. New medians take ids from `next_id`.
pub fn cluster_phase(
    carried: &[WeightedMedian],
    raw: &[(Point, f64)],
    lower_bound: f64,
    phase: u32,
    schedule: &Schedule,
    cfg: &ValidatedConfig,
    next_id: &mut u64,
) -> Result<PhaseResult> {
    if !(lower_bound.is_finite() && lower_bound > 0.0) {
        return Err(Error::range("lower_bound", format!("must be positive and finite, got {lower_bound}")));
    }
    if raw.is_empty() {
        return Err(Error::range("phase input", "no unread points"));
    }
    let f = schedule.facility_cost(lower_bound);
    let stop = schedule.stop_condition(lower_bound);
    let m = schedule.invocations();
    let metric = cfg.metric;
    let seed = cfg.seed;
    let input = || {
        carried
            .iter()
            .map(|wm| (&wm.location, wm.weight))
            .chain(raw.iter().map(|(p, w)| (p, *w)))
    };
    let invoke = |i: u32| -> Result<FlRun> {
        let mut rng = RngStream::for_invocation(seed, phase, i).generator();
        online_fl_run(input(), f, &mut rng, stop, metric, false)
    };

    #[cfg(feature = "parallel")]
    let (winner, best, stats) = {
        use rayon::prelude::*;
        let runs = (0..m).into_par_iter().map(invoke).collect::<Result<Vec<_>>>()?;
        let stats: Vec<_> = runs.iter().enumerate().map(|(i, r)| stat(i as u32, r)).collect();
        let mut w = 0;
        for i in 1..runs.len() {
            if better(&runs[i], &runs[w]) {
                w = i;
            }
        }
        let best = runs.into_iter().nth(w).expect("at least one invocation");
        (w as u32, best, stats)
    };

    #[cfg(not(feature = "parallel"))]
    let (winner, best, stats) = {
        let mut stats = Vec::with_capacity(m as usize);
        let mut best: Option<(u32, FlRun)> = None;
        for i in 0..m {
            let run = invoke(i)?;
            stats.push(stat(i, &run));
            if best.as_ref().is_none_or(|(_, b)| better(&run, b)) {
                best = Some((i, run));
            }
        }
        let (w, best) = best.expect("at least one invocation");
        (w, best, stats)
    };

    let consumed = best.facilities.points_consumed();
    let carried_seen = consumed.min(carried.len());
    let read_boundary = consumed - carried_seen;
    if read_boundary == 0 {
        return Err(Error::Progress { phase });
    }
    let solution_cost = best.facilities.total_cost();
    let sum_sq_dist = best.facilities.sum_sq_dist();
    let mut reopened = vec![false; carried_seen];
    let medians = best
        .facilities
        .into_facilities()
        .into_iter()
        .map(|fac| match carried.get(fac.source) {
            Some(prev) => {
                reopened[fac.source] = true;
                WeightedMedian {
                    location: fac.location,
                    weight: fac.weight,
                    ..prev.clone()
                }
            }
            None => {
                let id = MedianId(*next_id);
                *next_id += 1;
                WeightedMedian::new(id, fac.location, fac.weight, phase)
            }
        })
        .collect();
    let absorbed = carried[..carried_seen]
        .iter()
        .zip(&reopened)
        .filter(|(_, r)| !**r)
        .map(|(m, _)| m.clone())
        .collect();
    Ok(PhaseResult {
        medians,
        untouched: carried[carried_seen..].to_vec(),
        absorbed,
        solution_cost,
        sum_sq_dist,
        facility_cost: f,
        read_boundary,
        winner,
        invocations: stats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TcoEntry {
    pub since: u32,
    pub score: u32,
}

/// Medians currently under watch as temporal candidate outliers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TcoRegistry {
    entries: BTreeMap<MedianId, TcoEntry>,
}

impl TcoRegistry {
    pub fn get(&self, id: MedianId) -> Option<TcoEntry> {
        self.entries.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (MedianId, TcoEntry)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TcoEvent {
    pub id: MedianId,
    pub since: u32,
    pub score: u32,
}

/// Bump the score of every carried median whose weight did not grow this
/// phase. Entries of medians absorbed into another facility are dropped and
/// returned so the caller can report them.
pub fn update_outlier_scores(
    prev: &BTreeMap<MedianId, f64>,
    curr: &PhaseResult,
    registry: &mut TcoRegistry,
    phase: u32,
) -> (Vec<TcoEvent>, Vec<(MedianId, TcoEntry)>) {
    let mut events = Vec::new();
    for m in &curr.medians {
        let Some(&before) = prev.get(&m.id) else {
            continue;
        };
        if m.weight == before {
            let e = registry.entries.entry(m.id).or_insert(TcoEntry { since: phase, score: 0 });
            e.score += 1;
            events.push(TcoEvent {
                id: m.id,
                since: e.since,
                score: e.score,
            });
        }
    }
    let dropped = curr
        .absorbed
        .iter()
        .filter_map(|m| registry.entries.remove(&m.id).map(|e| (m.id, e)))
        .collect();
    (events, dropped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    RealOutlier,
    Inlier,
}

/// Why a verdict was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictCause {
    /// The watch window of `O` phases ended.
    Checkpoint,
    /// The median merged into another facility before its window ended.
    Absorbed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutlierVerdict {
    pub median: WeightedMedian,
    pub verdict: Verdict,
    pub cause: VerdictCause,
    pub decided_phase: u32,
}

/// Settle every entry whose `O`-phase window ends at `phase`. Real outliers
/// are removed from `working`; inliers stay and leave the registry.
pub fn resolve_outliers(
    registry: &mut TcoRegistry,
    phase: u32,
    score_threshold: u32,
    working: &mut Vec<WeightedMedian>,
) -> Vec<OutlierVerdict> {
    let due: Vec<(MedianId, TcoEntry)> = registry
        .iter()
        .filter(|(_, e)| phase + 1 - e.since == score_threshold)
        .collect();
    let mut verdicts = Vec::new();
    for (id, entry) in due {
        registry.entries.remove(&id);
        let Some(pos) = working.iter().position(|m| m.id == id) else {
            continue;
        };
        let verdict = if entry.score == score_threshold {
            Verdict::RealOutlier
        } else {
            Verdict::Inlier
        };
        let mut median = if verdict == Verdict::RealOutlier {
            working.remove(pos)
        } else {
            working[pos].clone()
        };
        median.outlier_score = entry.score;
        median.tco_since_phase = Some(entry.since);
        verdicts.push(OutlierVerdict {
            median,
            verdict,
            cause: VerdictCause::Checkpoint,
            decided_phase: phase,
        });
    }
    verdicts
}

/// Everything recorded about one phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSummary {
    pub phase: u32,
    pub lower_bound: f64,
    pub facility_cost: f64,
    /// Working medians after outliers were removed.
    pub medians: usize,
    /// Facilities returned by the winning invocation.
    pub facilities: usize,
    pub solution_cost: f64,
    pub sum_sq_dist: f64,
    pub points_read: usize,
    pub total_read: u64,
    /// Largest retained-point count seen during the phase.
    pub retained: usize,
    /// `Num + median bound + |registry|` for the same instant.
    pub retained_bound: f64,
    pub tco_events: Vec<TcoEvent>,
    pub verdicts: Vec<OutlierVerdict>,
    pub winner: u32,
    pub invocations: Vec<InvocationStat>,
}

/// Result of a complete (or aborted) run.
#[derive(Debug, Clone, PartialEq)]
pub struct KormRun {
    pub config: ValidatedConfig,
    pub schedule: Schedule,
    pub phases: Vec<PhaseSummary>,
    pub final_medians: Vec<WeightedMedian>,
    pub real_outliers: Vec<OutlierVerdict>,
    /// Watch entries still open when the stream ended.
    pub pending: Vec<(MedianId, TcoEntry)>,
    /// SHA-256 over every raw point read, as little-endian coordinate bits
    /// followed by the weight.
    pub stream_digest: String,
    pub points_read: u64,
    pub weight_read: f64,
    pub dimension: Option<usize>,
    pub peak_retained: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("run aborted: {error}")]
pub struct RunAbort {
    pub error: Error,
    /// Phases completed before the failure.
    pub partial: Box<KormRun>,
}

struct Engine<I> {
    source: I,
    buffer: VecDeque<(Point, f64)>,
    dimension: Option<usize>,
    hasher: Sha256,
    points_pulled: u64,
}

impl<I: Iterator<Item = (Point, f64)>> Engine<I> {
    fn refill(&mut self, cap: usize) -> Result<()> {
        while self.buffer.len() < cap {
            let Some((p, w)) = self.source.next() else {
                break;
            };
            match self.dimension {
                None => self.dimension = Some(p.dim()),
                Some(d) if d != p.dim() => {
                    return Err(Error::Dimension {
                        expected: d,
                        got: p.dim(),
                    })
                }
                Some(_) => {}
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::range("weight", format!("must be positive, got {w}")));
            }
            for c in p.coords() {
                self.hasher.update(c.to_le_bytes());
            }
            self.hasher.update(w.to_le_bytes());
            self.points_pulled += 1;
            self.buffer.push_back((p, w));
        }
        Ok(())
    }
}

/// Run the full pipeline over a chunked stream. `cfg.stream_len` must be set.
pub fn korm_run<C>(chunks: C, cfg: &ValidatedConfig) -> std::result::Result<KormRun, RunAbort>
where
    C: IntoIterator<Item = Chunk>,
{
    let schedule = match Schedule::from_config(cfg) {
        Ok(s) => s,
        Err(error) => {
            let schedule = Schedule::from_config(&cfg.with_stream_len(1)).expect("stream length set");
            return Err(RunAbort {
                error,
                partial: Box::new(empty_run(cfg, schedule)),
            });
        }
    };
    let mut run = empty_run(cfg, schedule);
    let mut engine = Engine {
        source: chunks.into_iter().flat_map(|c| c.points),
        buffer: VecDeque::with_capacity(cfg.chunk_size),
        dimension: None,
        hasher: Sha256::new(),
        points_pulled: 0,
    };
    let result = drive(&mut engine, cfg, &schedule, &mut run);
    run.dimension = engine.dimension;
    run.stream_digest = hex::encode(engine.hasher.finalize());
    match result {
        Ok(()) => Ok(run),
        Err(error) => Err(RunAbort {
            error,
            partial: Box::new(run),
        }),
    }
}

/// Convenience wrapper for an in-memory point set with unit weights. Fills
/// in `stream_len` from the data when unset.
pub fn korm_run_points(points: &[Point], cfg: &ValidatedConfig) -> std::result::Result<KormRun, RunAbort> {
    let cfg = match cfg.stream_len {
        Some(_) => cfg.clone(),
        None => cfg.with_stream_len(points.len() as u64),
    };
    let chunks = crate::ingest::chunk_stream(points.iter().cloned(), cfg.chunk_size)
        .expect("validated chunk size");
    korm_run(chunks, &cfg)
}

fn empty_run(cfg: &ValidatedConfig, schedule: Schedule) -> KormRun {
    KormRun {
        config: cfg.clone(),
        schedule,
        phases: Vec::new(),
        final_medians: Vec::new(),
        real_outliers: Vec::new(),
        pending: Vec::new(),
        stream_digest: String::new(),
        points_read: 0,
        weight_read: 0.0,
        dimension: None,
        peak_retained: 0,
    }
}

fn drive<I: Iterator<Item = (Point, f64)>>(
    engine: &mut Engine<I>,
    cfg: &ValidatedConfig,
    schedule: &Schedule,
    run: &mut KormRun,
) -> Result<()> {
    let num = cfg.chunk_size;
    engine.refill(num)?;
    let head: Vec<Point> = engine.buffer.iter().take(cfg.k + 1).map(|(p, _)| p.clone()).collect();
    let mut lower_bound = set_lb(&head, cfg.k, cfg.metric)? / cfg.beta;
    let bound = schedule.median_bound();

    let mut working: Vec<WeightedMedian> = Vec::new();
    let mut registry = TcoRegistry::default();
    let mut next_id = 0u64;
    let mut phase = 1u32;
    loop {
        engine.refill(num)?;
        if engine.buffer.is_empty() {
            break;
        }
        if !lower_bound.is_finite() {
            return Err(Error::range(
                "lower_bound",
                format!("overflowed at phase {phase}; use a larger chunk size"),
            ));
        }
        let retained_start = engine.buffer.len() + working.len() + registry.len();

        // heavy medians first; ties by id
        working.sort_by(|a, b| b.weight.total_cmp(&a.weight).then(a.id.cmp(&b.id)));
        let prev: BTreeMap<MedianId, f64> = working.iter().map(|m| (m.id, m.weight)).collect();
        let raw: &[(Point, f64)] = engine.buffer.make_contiguous();
        let result = cluster_phase(&working, raw, lower_bound, phase, schedule, cfg, &mut next_id)?;

        let read = result.read_boundary;
        let weight: f64 = engine.buffer.drain(..read).map(|(_, w)| w).sum();
        run.points_read += read as u64;
        run.weight_read += weight;

        let (tco_events, dropped) = update_outlier_scores(&prev, &result, &mut registry, phase);
        let mut verdicts: Vec<OutlierVerdict> = dropped
            .into_iter()
            .map(|(id, entry)| {
                let mut median = result
                    .absorbed
                    .iter()
                    .find(|m| m.id == id)
                    .expect("dropped entries come from absorbed medians")
                    .clone();
                median.outlier_score = entry.score;
                median.tco_since_phase = Some(entry.since);
                OutlierVerdict {
                    median,
                    verdict: Verdict::Inlier,
                    cause: VerdictCause::Absorbed,
                    decided_phase: phase,
                }
            })
            .collect();
        let facilities = result.medians.len();
        working = result.medians;
        working.extend(result.untouched);
        verdicts.extend(resolve_outliers(&mut registry, phase, cfg.score_threshold, &mut working));
        for m in working.iter_mut() {
            match registry.get(m.id) {
                Some(e) => {
                    m.outlier_score = e.score;
                    m.tco_since_phase = Some(e.since);
                }
                None => {
                    m.outlier_score = 0;
                    m.tco_since_phase = None;
                }
            }
        }
        run.real_outliers
            .extend(verdicts.iter().filter(|v| v.verdict == Verdict::RealOutlier).cloned());

        let retained_end = engine.buffer.len() + working.len() + registry.len();
        let retained = retained_start.max(retained_end);
        run.peak_retained = run.peak_retained.max(retained);
        run.phases.push(PhaseSummary {
            phase,
            lower_bound,
            facility_cost: result.facility_cost,
            medians: working.len(),
            facilities,
            solution_cost: result.solution_cost,
            sum_sq_dist: result.sum_sq_dist,
            points_read: read,
            total_read: run.points_read,
            retained,
            retained_bound: num as f64 + bound + registry.len() as f64,
            tco_events,
            verdicts,
            winner: result.winner,
            invocations: result.invocations,
        });
        run.final_medians = working.clone();
        run.pending = registry.iter().collect();

        lower_bound *= cfg.beta;
        phase += 1;
    }
    Ok(())
}
