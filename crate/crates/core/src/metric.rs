use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;

/// Distance used for every cost in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Sum of squared coordinate differences.
    #[default]
    SquaredEuclidean,
    Euclidean,
}

impl Metric {
    /// Distance between two coordinate slices of equal length.
    #[inline]
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        let sq = squared_euclidean(a, b);
        match self {
            Metric::SquaredEuclidean => sq,
            Metric::Euclidean => sq.sqrt(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::SquaredEuclidean => "squared-euclidean",
            Metric::Euclidean => "euclidean",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared-euclidean" | "squared_euclidean" | "sqeuclidean" => {
                Ok(Metric::SquaredEuclidean)
            }
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::range("metric", format!("unknown metric {other:?}"))),
        }
    }
}

#[inline]
pub(crate) fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Checked distance between two points.
pub fn dist(a: &Point, b: &Point, metric: Metric) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(metric.eval(a.coords(), b.coords()))
}

/// Cost of serving a point of weight `w` from a facility at distance `theta`.
#[inline]
pub fn assignment_cost(w: f64, theta: f64) -> f64 {
    debug_assert!(w >= 0.0 && theta >= 0.0);
    w * theta
}
