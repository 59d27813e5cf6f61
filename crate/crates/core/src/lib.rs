//! Streaming outlier detection by phase-based k-median clustering.
//!
//! The stream is read in chunks. Each phase clusters the medians carried
//! over from the previous phase together with the unread points, using
//! several independent runs of randomized online facility location, and
//! keeps only the weighted medians of the best run. Medians that stop
//! gaining weight become temporal candidate outliers; after `O` phases of
//! watching they are either declared real outliers or cleared as inliers.
//!
//! ```
//! use korm::{korm_run_points, KormConfig, Point};
//!
//! let points: Vec<Point> = (0..40)
//!     .map(|i| Point::new(vec![(i % 7) as f64, (i % 5) as f64]).unwrap())
//!     .collect();
//! let cfg = KormConfig { k: 2, chunk_size: 10, ..KormConfig::default() }
//!     .validate()
//!     .unwrap();
//! let run = korm_run_points(&points, &cfg).unwrap();
//! assert_eq!(run.points_read, 40);
//! ```

pub mod baselines;
pub mod bench;
pub mod config;
mod error;
pub mod ingest;
pub mod korm;
pub mod metric;
pub mod online_fl;
mod point;
pub mod report;
pub mod rng;

pub use config::{KormConfig, LogBase, ValidatedConfig};
pub use error::{Error, ErrorClass, Result};
pub use ingest::{chunk_stream, load_dataset, Chunk, ColumnKind, Dataset, DatasetSchema};
pub use korm::{korm_run, korm_run_points, KormRun, RunAbort};
pub use metric::{assignment_cost, dist, Metric};
pub use point::{MedianId, Point, WeightedMedian};
pub use report::OutlierReport;
