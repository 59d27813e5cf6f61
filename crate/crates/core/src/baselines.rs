//! Distance-based comparison methods: DK (rank by distance to the K-th
//! nearest neighbour) and the nested-loop DB(p, D) detector. Both are exact
//! and quadratic.

use crate::error::{Error, Result};
use crate::metric::{squared_euclidean, Metric};
use crate::point::Point;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DkEntry {
    pub index: usize,
    /// Distance to the K-th nearest other point.
    pub dk: f64,
}

/// Points ordered by descending `dk`, ties by ascending index.
pub type DkRanking = Vec<DkEntry>;

fn check_dims(points: &[Point]) -> Result<()> {
    if let Some(first) = points.first() {
        if let Some(p) = points.iter().find(|p| p.dim() != first.dim()) {
            return Err(Error::Dimension {
                expected: first.dim(),
                got: p.dim(),
            });
        }
    }
    Ok(())
}

/// Distance from every point to its K-th nearest neighbour (self excluded).
pub fn kth_neighbor_distances(points: &[Point], knn: usize, metric: Metric) -> Result<Vec<f64>> {
    if knn == 0 || knn >= points.len() {
        return Err(Error::range(
            "knn",
            format!("need 1 <= K < {} points, got K={knn}", points.len()),
        ));
    }
    check_dims(points)?;
    let row = |i: usize| -> f64 {
        let xi = points[i].coords();
        let mut d: Vec<f64> = points
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, p)| squared_euclidean(xi, p.coords()))
            .collect();
        let (_, kth, _) = d.select_nth_unstable_by(knn - 1, f64::total_cmp);
        // both metrics are monotone in the squared distance
        match metric {
            Metric::SquaredEuclidean => *kth,
            Metric::Euclidean => kth.sqrt(),
        }
    };
    #[cfg(feature = "parallel")]
    let out = {
        use rayon::prelude::*;
        (0..points.len()).into_par_iter().map(row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let out = (0..points.len()).map(row).collect();
    Ok(out)
}

/// The `n_top` points with the largest K-th-nearest-neighbour distance.
pub fn dk_outliers(points: &[Point], knn: usize, n_top: usize, metric: Metric) -> Result<DkRanking> {
    let dk = kth_neighbor_distances(points, knn, metric)?;
    if n_top == 0 || n_top > points.len() {
        return Err(Error::range(
            "top_n",
            format!("need 1 <= n <= {} points, got {n_top}", points.len()),
        ));
    }
    let mut ranking: DkRanking = dk
        .into_iter()
        .enumerate()
        .map(|(index, dk)| DkEntry { index, dk })
        .collect();
    ranking.sort_by(|a, b| b.dk.total_cmp(&a.dk).then(a.index.cmp(&b.index)));
    ranking.truncate(n_top);
    Ok(ranking)
}

/// Smallest number of other points that must lie farther than `radius` for
/// a point to be an outlier: `ceil(fraction * (n - 1))`.
pub fn db_far_needed(n: usize, fraction: f64) -> usize {
    let others = n.saturating_sub(1) as f64;
    (fraction * others - 1e-9).ceil().max(0.0) as usize
}

fn check_db_params(radius: f64, fraction: f64) -> Result<()> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::range("radius", format!("must be positive, got {radius}")));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::range("fraction", format!("must lie in (0, 1), got {fraction}")));
    }
    Ok(())
}

/// DB(p, D) outliers: points with at least a fraction `fraction` of the
/// other points at distance greater than `radius`. Literal nested loop that
/// stops scanning a point as soon as too many neighbours are within
/// `radius`. Indices are ascending.
pub fn db_nested_loop(points: &[Point], radius: f64, fraction: f64, metric: Metric) -> Result<Vec<usize>> {
    check_db_params(radius, fraction)?;
    check_dims(points)?;
    let n = points.len();
    let max_within = n.saturating_sub(1) - db_far_needed(n, fraction).min(n.saturating_sub(1));
    let mut outliers = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let mut within = 0usize;
        let mut outlier = true;
        for (j, q) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            if metric.eval(p.coords(), q.coords()) <= radius {
                within += 1;
                if within > max_within {
                    outlier = false;
                    break;
                }
            }
        }
        if outlier {
            outliers.push(i);
        }
    }
    Ok(outliers)
}
