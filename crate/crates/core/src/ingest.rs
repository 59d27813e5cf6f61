//! Delimited-text loading, attribute encoding and chunking.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::point::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    /// One character per cell, encoded as its character code.
    SingleChar,
    Skip,
}

impl std::str::FromStr for ColumnKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "numeric" | "num" => Ok(ColumnKind::Numeric),
            "char" | "single_char" | "single_char_categorical" => Ok(ColumnKind::SingleChar),
            "skip" => Ok(ColumnKind::Skip),
            other => Err(Error::range("schema", format!("unknown column kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub columns: Vec<ColumnKind>,
    pub has_header: bool,
}

impl DatasetSchema {
    pub fn new(columns: Vec<ColumnKind>, has_header: bool) -> Result<Self> {
        if !columns.iter().any(|c| *c != ColumnKind::Skip) {
            return Err(Error::range("schema", "needs at least one non-skip column"));
        }
        Ok(DatasetSchema { columns, has_header })
    }

    /// Parse a schema file: one kind keyword per line. Blank lines and lines
    /// starting with `#` are ignored; a line `header` marks a header row.
    pub fn parse(text: &str) -> Result<Self> {
        let mut columns = Vec::new();
        let mut has_header = false;
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line == "header" {
                has_header = true;
                continue;
            }
            columns.push(line.parse()?);
        }
        DatasetSchema::new(columns, has_header)
    }

    /// Comma-separated kinds, as accepted on the command line.
    pub fn from_list(list: &str, has_header: bool) -> Result<Self> {
        let columns = list.split(',').map(str::parse).collect::<Result<Vec<_>>>()?;
        DatasetSchema::new(columns, has_header)
    }

    pub fn dimension(&self) -> usize {
        self.columns.iter().filter(|c| **c != ColumnKind::Skip).count()
    }

    pub fn keywords(&self) -> Vec<&'static str> {
        self.columns
            .iter()
            .map(|c| match c {
                ColumnKind::Numeric => "numeric",
                ColumnKind::SingleChar => "char",
                ColumnKind::Skip => "skip",
            })
            .collect()
    }
}

/// Points decoded from a file, plus the SHA-256 of the raw bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<Point>,
    pub sha256: String,
}

pub fn load_dataset(path: impl AsRef<Path>, schema: &DatasetSchema) -> Result<Dataset> {
    let bytes = std::fs::read(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_dataset(&bytes, schema)
}

pub fn parse_dataset(bytes: &[u8], schema: &DatasetSchema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Shape(e.to_string()))?;
        let row = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != schema.columns.len() {
            return Err(Error::Shape(format!(
                "row {row} has {} cells, schema has {} columns",
                record.len(),
                schema.columns.len()
            )));
        }
        let mut coords = Vec::with_capacity(schema.dimension());
        for (column, (cell, kind)) in record.iter().zip(&schema.columns).enumerate() {
            match kind {
                ColumnKind::Skip => {}
                ColumnKind::Numeric => {
                    let v: f64 = cell.parse().map_err(|_| Error::Parse {
                        row,
                        column,
                        message: format!("{cell:?} is not a number"),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Parse {
                            row,
                            column,
                            message: format!("{cell:?} is not finite"),
                        });
                    }
                    coords.push(v);
                }
                ColumnKind::SingleChar => {
                    let mut chars = cell.chars();
                    match (chars.next(), chars.next()) {
                        (Some(c), None) => coords.push(f64::from(u32::from(c))),
                        _ => {
                            return Err(Error::Encoding {
                                row,
                                column,
                                cell: cell.to_string(),
                            })
                        }
                    }
                }
            }
        }
        points.push(Point::new(coords)?);
    }
    if points.is_empty() {
        return Err(Error::Shape("no data rows".into()));
    }
    Ok(Dataset {
        points,
        sha256: hex::encode(Sha256::digest(bytes)),
    })
}

/// Rescale every coordinate to [0, 1] by its column range. Constant columns
/// map to 0.
pub fn min_max_scale(points: &mut [Point]) {
    let Some(dim) = points.first().map(Point::dim) else {
        return;
    };
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in points.iter() {
        for (i, &c) in p.coords().iter().enumerate() {
            lo[i] = lo[i].min(c);
            hi[i] = hi[i].max(c);
        }
    }
    for p in points.iter_mut() {
        let scaled = p
            .coords()
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let span = hi[i] - lo[i];
                if span > 0.0 {
                    (c - lo[i]) / span
                } else {
                    0.0
                }
            })
            .collect();
        *p = Point::new(scaled).expect("scaled coordinates are finite");
    }
}

/// A consecutive block of the stream. `index` is 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub index: usize,
    pub points: Vec<(Point, f64)>,
}

/// Lazily partitions a point stream into chunks of `size` unit-weight points.
pub struct Chunks<I> {
    inner: I,
    size: usize,
    next_index: usize,
}

impl<I: Iterator<Item = Point>> Iterator for Chunks<I> {
    type Item = Chunk;

    fn next(&mut self) -> Option<Chunk> {
        let points: Vec<_> = self.inner.by_ref().take(self.size).map(|p| (p, 1.0)).collect();
        if points.is_empty() {
            return None;
        }
        self.next_index += 1;
        Some(Chunk {
            index: self.next_index,
            points,
        })
    }
}

pub fn chunk_stream<I: IntoIterator<Item = Point>>(points: I, size: usize) -> Result<Chunks<I::IntoIter>> {
    if size < 2 {
        return Err(Error::range("chunk_size", format!("must be at least 2, got {size}")));
    }
    Ok(Chunks {
        inner: points.into_iter(),
        size,
        next_index: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schema(list: &str) -> DatasetSchema {
        DatasetSchema::from_list(list, false).unwrap()
    }

    #[test]
    fn encodes_single_char() {
        let ds = parse_dataset(b"M,0.5\nF,1\nI,2\n", &schema("char,numeric")).unwrap();
        assert_eq!(ds.points[0].coords(), &[77.0, 0.5]);
        assert_eq!(ds.points[1].coords(), &[70.0, 1.0]);
        assert_eq!(ds.points[2].coords(), &[73.0, 2.0]);
        assert_eq!(ds.sha256.len(), 64);
    }

    #[test]
    fn skip_and_header() {
        let s = DatasetSchema::parse("# abalone-like\nheader\nchar\nnumeric\nskip\n").unwrap();
        assert!(s.has_header);
        assert_eq!(s.dimension(), 2);
        let ds = parse_dataset(b"sex,len,rings\nM,0.4,15\n", &s).unwrap();
        assert_eq!(ds.points.len(), 1);
        assert_eq!(ds.points[0].coords(), &[77.0, 0.4]);
    }

    #[test]
    fn error_paths() {
        let s = schema("char,numeric");
        assert!(matches!(
            parse_dataset(b"M,abc\n", &s),
            Err(Error::Parse { row: 1, column: 1, .. })
        ));
        assert!(matches!(
            parse_dataset(b"M,1\nMF,2\n", &s),
            Err(Error::Encoding { row: 2, column: 0, .. })
        ));
        assert!(matches!(parse_dataset(b"M,1\nF\n", &s), Err(Error::Shape(_))));
        assert!(matches!(parse_dataset(b"", &s), Err(Error::Shape(_))));
        assert!(matches!(parse_dataset(b"M,\n", &s), Err(Error::Parse { .. })));
        assert!(DatasetSchema::from_list("skip,skip", false).is_err());
        assert!(DatasetSchema::from_list("numeric,text", false).is_err());
    }

    #[test]
    fn chunk_sizes() {
        let pts = |n: usize| (0..n).map(|i| Point::new(vec![i as f64]).unwrap()).collect::<Vec<_>>();
        let sizes = |n, num| {
            chunk_stream(pts(n), num)
                .unwrap()
                .map(|c| c.points.len())
                .collect::<Vec<_>>()
        };
        assert_eq!(sizes(10, 4), vec![4, 4, 2]);
        assert_eq!(sizes(4, 4), vec![4]);
        assert!(sizes(0, 4).is_empty());
        assert!(chunk_stream(pts(3), 1).is_err());
        let idx: Vec<_> = chunk_stream(pts(10), 4).unwrap().map(|c| c.index).collect();
        assert_eq!(idx, vec![1, 2, 3]);
    }

    #[test]
    fn min_max() {
        let mut pts = vec![
            Point::new(vec![0.0, 5.0]).unwrap(),
            Point::new(vec![10.0, 5.0]).unwrap(),
            Point::new(vec![5.0, 5.0]).unwrap(),
        ];
        min_max_scale(&mut pts);
        assert_eq!(pts[2].coords(), &[0.5, 0.0]);
    }

    proptest! {
        #[test]
        fn chunks_concatenate_to_input(n in 0usize..200, num in 2usize..50) {
            let input: Vec<Point> = (0..n).map(|i| Point::new(vec![i as f64, -(i as f64)]).unwrap()).collect();
            let chunks: Vec<Chunk> = chunk_stream(input.clone(), num).unwrap().collect();
            for c in chunks.iter().rev().skip(1) {
                prop_assert_eq!(c.points.len(), num);
            }
            let back: Vec<Point> = chunks.into_iter().flat_map(|c| c.points).map(|(p, w)| { assert_eq!(w, 1.0); p }).collect();
            prop_assert_eq!(back, input);
        }
    }
}
