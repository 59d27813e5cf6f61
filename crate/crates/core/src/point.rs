use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite, non-empty real vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyPoint);
        }
        if let Some(position) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { position });
        }
        Ok(Point(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

/// Identity of a weighted median. Stable across phases while the median
/// keeps re-opening at its own location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MedianId(pub u64);

impl std::fmt::Display for MedianId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "m{}", self.0)
    }
}

/// A facility carried between phases: a location plus the weight of every
/// stream point it has absorbed.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMedian {
    pub id: MedianId,
    pub location: Point,
    pub weight: f64,
    pub outlier_score: u32,
    pub tco_since_phase: Option<u32>,
    pub created_phase: u32,
}

impl WeightedMedian {
    pub fn new(id: MedianId, location: Point, weight: f64, created_phase: u32) -> Self {
        WeightedMedian {
            id,
            location,
            weight,
            outlier_score: 0,
            tco_since_phase: None,
            created_phase,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_empty() {
        assert_eq!(Point::new(vec![]), Err(Error::EmptyPoint));
        assert_eq!(
            Point::new(vec![1.0, f64::NAN]),
            Err(Error::NonFinite { position: 1 })
        );
        assert!(Point::new(vec![f64::INFINITY]).is_err());
        assert_eq!(Point::new(vec![1.0, 2.0]).unwrap().dim(), 2);
    }

    #[test]
    fn serde_goes_through_validation() {
        let p: Point = serde_json::from_str("[1.0, 2.5]").unwrap();
        assert_eq!(p.coords(), &[1.0, 2.5]);
        assert!(serde_json::from_str::<Point>("[]").is_err());
    }
}
