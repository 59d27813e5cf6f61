//! One-pass randomized online facility location over weighted points.
//!
//! Each arriving point `x` of weight `w` either opens a facility at `x`
//! (probability `min(theta * w / f, 1)`, `theta` the distance to the nearest
//! open facility) or is served by that nearest facility.

use rand::Rng;

use crate::error::{Error, Result};
use crate::metric::{assignment_cost, squared_euclidean, Metric};
use crate::point::Point;

/// An open facility. `source` is the index, within the run's input, of the
/// point that opened it.
#[derive(Debug, Clone, PartialEq)]
pub struct Facility {
    pub location: Point,
    pub weight: f64,
    pub source: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FacilitySet {
    facilities: Vec<Facility>,
    service_cost: f64,
    opening_cost: f64,
    sq_service: f64,
    points_consumed: usize,
}

/// What one step did with its point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Opened { facility: usize },
    Assigned { facility: usize, theta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranscriptEntry {
    pub input: usize,
    pub weight: f64,
    pub step: Step,
}

impl FacilitySet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn facilities(&self) -> &[Facility] {
        &self.facilities
    }

    pub fn into_facilities(self) -> Vec<Facility> {
        self.facilities
    }

    pub fn len(&self) -> usize {
        self.facilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facilities.is_empty()
    }

    /// Sum of `w * theta` over every assignment.
    pub fn service_cost(&self) -> f64 {
        self.service_cost
    }

    /// `f` times the number of openings.
    pub fn facility_count_cost(&self) -> f64 {
        self.opening_cost
    }

    pub fn total_cost(&self) -> f64 {
        self.service_cost + self.opening_cost
    }

    /// Sum of `w * |x - facility|^2` over every assignment, whatever the metric.
    pub fn sum_sq_dist(&self) -> f64 {
        self.sq_service
    }

    pub fn points_consumed(&self) -> usize {
        self.points_consumed
    }

    pub fn total_weight(&self) -> f64 {
        self.facilities.iter().map(|f| f.weight).sum()
    }

    /// Nearest open facility and its distance; ties go to the lowest index.
    pub fn nearest(&self, x: &[f64], metric: Metric) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, fac) in self.facilities.iter().enumerate() {
            let d = metric.eval(fac.location.coords(), x);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best
    }

    fn propose<R: Rng + ?Sized>(
        &self,
        x: &Point,
        w: f64,
        f: f64,
        rng: &mut R,
        metric: Metric,
    ) -> Result<Step> {
        check_step_args(w, f)?;
        let Some(first) = self.facilities.first() else {
            return Ok(Step::Opened {
                facility: self.facilities.len(),
            });
        };
        if first.location.dim() != x.dim() {
            return Err(Error::Dimension {
                expected: first.location.dim(),
                got: x.dim(),
            });
        }
        let (nearest, theta) = self
            .nearest(x.coords(), metric)
            .expect("facility set is non-empty");
        let p = (theta * w / f).min(1.0);
        // only genuine coin flips consume randomness
        let open = if p >= 1.0 {
            true
        } else if p <= 0.0 {
            false
        } else {
            rng.random::<f64>() < p
        };
        Ok(if open {
            Step::Opened {
                facility: self.facilities.len(),
            }
        } else {
            Step::Assigned {
                facility: nearest,
                theta,
            }
        })
    }

    fn cost_delta(step: Step, w: f64, f: f64) -> f64 {
        match step {
            Step::Opened { .. } => f,
            Step::Assigned { theta, .. } => assignment_cost(w, theta),
        }
    }

    fn commit(&mut self, x: &Point, w: f64, f: f64, source: usize, step: Step) {
        match step {
            Step::Opened { .. } => {
                self.facilities.push(Facility {
                    location: x.clone(),
                    weight: w,
                    source,
                });
                self.opening_cost += f;
            }
            Step::Assigned { facility, theta } => {
                let fac = &mut self.facilities[facility];
                fac.weight += w;
                self.service_cost += assignment_cost(w, theta);
                self.sq_service += w * squared_euclidean(fac.location.coords(), x.coords());
            }
        }
        self.points_consumed += 1;
    }
}

fn check_step_args(w: f64, f: f64) -> Result<()> {
    if !(f.is_finite() && f > 0.0) {
        return Err(Error::range("facility_cost", format!("must be positive, got {f}")));
    }
    if !(w.is_finite() && w > 0.0) {
        return Err(Error::range("weight", format!("must be positive, got {w}")));
    }
    Ok(())
}

/// Process one weighted point. `source` tags the facility if one is opened.
pub fn online_fl_step<R: Rng + ?Sized>(
    state: &mut FacilitySet,
    x: &Point,
    w: f64,
    f: f64,
    rng: &mut R,
    metric: Metric,
    source: usize,
) -> Result<Step> {
    let step = state.propose(x, w, f, rng, metric)?;
    state.commit(x, w, f, source, step);
    Ok(step)
}

/// Ceilings that halt a run. Both are inclusive: a run may reach them but
/// not exceed them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopCondition {
    pub max_cost: f64,
    pub max_facilities: usize,
}

impl StopCondition {
    pub fn unbounded() -> Self {
        StopCondition {
            max_cost: f64::INFINITY,
            max_facilities: usize::MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltReason {
    Exhausted,
    CostCeiling,
    FacilityCeiling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlRun {
    /// State after the last committed point. The point that tripped a
    /// ceiling is not applied.
    pub facilities: FacilitySet,
    pub halt: HaltReason,
    /// Points looked at, including the one that tripped a ceiling.
    pub seen: usize,
    /// Index of the point that tripped a ceiling, to be re-read later.
    pub last_point: Option<usize>,
    pub transcript: Option<Vec<TranscriptEntry>>,
}

/// One pass over `points`, halting the moment a step would push the total
/// cost or the facility count past `stop`.
pub fn online_fl_run<'a, I, R>(
    points: I,
    f: f64,
    rng: &mut R,
    stop: StopCondition,
    metric: Metric,
    record_transcript: bool,
) -> Result<FlRun>
where
    I: IntoIterator<Item = (&'a Point, f64)>,
    R: Rng + ?Sized,
{
    let mut state = FacilitySet::new();
    let mut transcript = record_transcript.then(Vec::new);
    let mut seen = 0;
    for (i, (x, w)) in points.into_iter().enumerate() {
        seen = i + 1;
        let step = state.propose(x, w, f, rng, metric)?;
        let cost = state.total_cost() + FacilitySet::cost_delta(step, w, f);
        let count = state.len() + usize::from(matches!(step, Step::Opened { .. }));
        let halt = if cost > stop.max_cost {
            Some(HaltReason::CostCeiling)
        } else if count > stop.max_facilities {
            Some(HaltReason::FacilityCeiling)
        } else {
            None
        };
        if let Some(halt) = halt {
            return Ok(FlRun {
                facilities: state,
                halt,
                seen,
                last_point: Some(i),
                transcript,
            });
        }
        state.commit(x, w, f, i, step);
        if let Some(t) = transcript.as_mut() {
            t.push(TranscriptEntry {
                input: i,
                weight: w,
                step,
            });
        }
    }
    Ok(FlRun {
        facilities: state,
        halt: HaltReason::Exhausted,
        seen,
        last_point: None,
        transcript,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn p(v: &[f64]) -> Point {
        Point::new(v.to_vec()).unwrap()
    }

    #[test]
    fn first_point_opens_and_is_charged() {
        let mut s = FacilitySet::new();
        let mut rng = RngStream::new(1, 0).generator();
        let step = online_fl_step(&mut s, &p(&[1.0, 2.0]), 3.0, 10.0, &mut rng, Metric::SquaredEuclidean, 0)
            .unwrap();
        assert_eq!(step, Step::Opened { facility: 0 });
        assert_eq!(s.len(), 1);
        assert_eq!(s.facilities()[0].weight, 3.0);
        assert_eq!(s.total_cost(), 10.0);
    }

    #[test]
    fn coincident_point_is_always_assigned() {
        let mut s = FacilitySet::new();
        let mut rng = RngStream::new(1, 0).generator();
        let x = p(&[0.5, 0.5]);
        for i in 0..20 {
            online_fl_step(&mut s, &x, 2.0, 1e-9, &mut rng, Metric::SquaredEuclidean, i).unwrap();
        }
        assert_eq!(s.len(), 1);
        assert_eq!(s.facilities()[0].weight, 40.0);
        assert_eq!(s.service_cost(), 0.0);
    }

    #[test]
    fn far_points_always_open() {
        let mut s = FacilitySet::new();
        let mut rng = RngStream::new(1, 0).generator();
        for i in 0..10 {
            let x = p(&[10.0 * i as f64, 0.0]);
            online_fl_step(&mut s, &x, 1.0, 100.0, &mut rng, Metric::SquaredEuclidean, i).unwrap();
        }
        assert_eq!(s.len(), 10);
        assert_eq!(s.total_cost(), 1000.0);
    }

    #[test]
    fn errors() {
        let mut s = FacilitySet::new();
        let mut rng = RngStream::new(1, 0).generator();
        let m = Metric::SquaredEuclidean;
        assert_eq!(
            online_fl_step(&mut s, &p(&[0.0]), 1.0, 0.0, &mut rng, m, 0).unwrap_err().kind(),
            "RangeError"
        );
        online_fl_step(&mut s, &p(&[0.0]), 1.0, 1.0, &mut rng, m, 0).unwrap();
        assert_eq!(
            online_fl_step(&mut s, &p(&[0.0, 1.0]), 1.0, 1.0, &mut rng, m, 1).unwrap_err(),
            Error::Dimension { expected: 1, got: 2 }
        );
    }

    #[test]
    fn identical_points_run() {
        let x = p(&[3.0, 3.0]);
        let pts: Vec<_> = (0..10).map(|_| (&x, 1.0)).collect();
        let mut rng = RngStream::new(9, 0).generator();
        let run = online_fl_run(pts, 100.0, &mut rng, StopCondition::unbounded(), Metric::SquaredEuclidean, false)
            .unwrap();
        assert_eq!(run.halt, HaltReason::Exhausted);
        assert_eq!(run.facilities.len(), 1);
        assert_eq!(run.facilities.facilities()[0].weight, 10.0);
        assert_eq!(run.facilities.service_cost(), 0.0);
        assert_eq!(run.facilities.total_cost(), 100.0);
        assert_eq!(run.seen, 10);
    }

    #[test]
    fn ceilings_halt_on_second_opening() {
        let a = p(&[0.0, 0.0]);
        let b = p(&[100.0, 0.0]);
        let f = 1.0;
        let stop = StopCondition { max_cost: f, max_facilities: 1 };
        let mut rng = RngStream::new(0, 0).generator();
        let run = online_fl_run([(&a, 1.0), (&b, 1.0)], f, &mut rng, stop, Metric::SquaredEuclidean, false)
            .unwrap();
        assert_eq!(run.halt, HaltReason::CostCeiling);
        assert_eq!(run.seen, 2);
        assert_eq!(run.last_point, Some(1));
        assert_eq!(run.facilities.len(), 1);
        assert_eq!(run.facilities.points_consumed(), 1);
    }

    #[test]
    fn count_ceiling_alone() {
        let a = p(&[0.0]);
        let b = p(&[100.0]);
        let stop = StopCondition { max_cost: f64::INFINITY, max_facilities: 1 };
        let mut rng = RngStream::new(0, 0).generator();
        let run = online_fl_run([(&a, 1.0), (&b, 1.0)], 1.0, &mut rng, stop, Metric::Euclidean, false).unwrap();
        assert_eq!(run.halt, HaltReason::FacilityCeiling);
        assert_eq!(run.last_point, Some(1));
    }
}
