//! LibSVM text format and seeded train/test splits.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::problems::LogisticProblem;

/// Sparse rows with 0-based feature indices and ±1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub labels: Vec<f64>,
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetStats {
    pub n: usize,
    pub dim: usize,
    pub nnz: usize,
    pub positives: usize,
    pub negatives: usize,
}

impl DatasetStats {
    pub fn density(&self) -> f64 {
        self.nnz as f64 / (self.n * self.dim).max(1) as f64
    }
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn stats(&self) -> DatasetStats {
        let positives = self.labels.iter().filter(|&&y| y > 0.0).count();
        DatasetStats {
            n: self.len(),
            dim: self.dim,
            nnz: self.rows.iter().map(Vec::len).sum(),
            positives,
            negatives: self.len() - positives,
        }
    }

    /// Rows in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            dim: self.dim,
        }
    }

    /// Densifies into a logistic regression problem.
    pub fn to_logistic(&self, l2_reg: f64) -> Result<LogisticProblem> {
        if self.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut cols = Matrix::zeros(self.dim, self.len());
        for (j, row) in self.rows.iter().enumerate() {
            for &(i, v) in row {
                cols[(i, j)] = v;
            }
        }
        LogisticProblem::from_columns(cols, self.labels.clone(), l2_reg)
    }

    /// Writes `label idx:val …` lines with 1-based indices. Values use the
    /// shortest representation that parses back to the same bits.
    pub fn write_libsvm<W: Write>(&self, mut out: W) -> Result<()> {
        let mut line = String::new();
        for (row, y) in self.rows.iter().zip(&self.labels) {
            line.clear();
            write!(line, "{}", if *y > 0.0 { "+1" } else { "-1" }).expect("writing to a String");
            for &(i, v) in row {
                write!(line, " {}:{:?}", i + 1, v).expect("writing to a String");
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses LibSVM text. Blank lines and `#` comments are skipped; any other
/// malformed content is an error. Labels may be `±1` or `0/1`, the latter
/// mapped to `−1/+1`. The dimension is the largest index seen unless
/// `declared_dim` is given, in which case larger indices are errors.
pub fn parse_libsvm<R: BufRead>(reader: R, name: &str, declared_dim: Option<usize>) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut raw_labels = Vec::new();
    let mut max_index = 0;
    for (k, line) in reader.lines().enumerate() {
        let lineno = k + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a token");
        let label: f64 = label_tok
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad label {label_tok:?}")))?;
        let mut row = Vec::new();
        let mut prev = 0;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, format!("expected index:value, got {tok:?}")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad index {idx:?}")))?;
            let val: f64 = val
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad value {val:?}")))?;
            if idx == 0 {
                return Err(parse_err(lineno, "indices are 1-based"));
            }
            if !val.is_finite() {
                return Err(parse_err(lineno, format!("non-finite value at index {idx}")));
            }
            if idx <= prev {
                return Err(Error::NonAscendingIndex {
                    line: lineno,
                    prev,
                    next: idx,
                });
            }
            if let Some(d) = declared_dim {
                if idx > d {
                    return Err(parse_err(lineno, format!("index {idx} exceeds declared dimension {d}")));
                }
            }
            prev = idx;
            row.push((idx - 1, val));
        }
        max_index = max_index.max(prev);
        rows.push(row);
        raw_labels.push((lineno, label));
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let zero_one = raw_labels.iter().all(|&(_, y)| y == 0.0 || y == 1.0);
    let labels = raw_labels
        .into_iter()
        .map(|(lineno, y)| match y {
            _ if zero_one => Ok(if y == 1.0 { 1.0 } else { -1.0 }),
            _ if y == 1.0 || y == -1.0 => Ok(y),
            _ => Err(parse_err(lineno, format!("label {y} is not ±1 or 0/1"))),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        name: name.to_string(),
        rows,
        labels,
        dim: declared_dim.unwrap_or(max_index),
    })
}

/// Disjoint index sets of sizes `train_n` and `test_n` from a seeded shuffle.
pub fn split_indices(n: usize, train_n: usize, test_n: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let requested = train_n + test_n;
    if requested > n {
        return Err(Error::SizeExceeded { requested, available: n });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = perm[train_n..requested].to_vec();
    perm.truncate(train_n);
    Ok((perm, test))
}

pub fn split(data: &Dataset, train_n: usize, test_n: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    let (tr, te) = split_indices(data.len(), train_n, test_n, seed)?;
    Ok((data.subset(&tr), data.subset(&te)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn parse(text: &str) -> Result<Dataset> {
        parse_libsvm(text.as_bytes(), "t", None)
    }

    #[test]
    fn single_line() {
        let d = parse("+1 3:0.5 7:1.0\n").unwrap();
        assert_eq!(d.labels, vec![1.0]);
        assert_eq!(d.rows[0], vec![(2, 0.5), (6, 1.0)]);
        assert_eq!(d.dim, 7);
    }

    #[test]
    fn zero_one_labels_are_remapped() {
        let d = parse("0 1:2.0\n1 2:1\n").unwrap();
        assert_eq!(d.labels, vec![-1.0, 1.0]);
    }

    #[test]
    fn comments_and_blank_lines_skipped() {
        let d = parse("# header\n\n-1 1:1 # trailing\n").unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.labels, vec![-1.0]);
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        assert!(matches!(parse("+1 1:1\n+1 x:1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("+1 1:1\n+1 2:abc\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("+1 0:1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("+1 1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("yes 1:1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("+1 1:1\n2 1:1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(
            parse("+1 1:1\n-1 4:1 2:1\n"),
            Err(Error::NonAscendingIndex { line: 2, prev: 4, next: 2 })
        ));
        assert!(matches!(parse("-1 2:1 2:1\n"), Err(Error::NonAscendingIndex { .. })));
        assert!(matches!(parse("\n# only comments\n"), Err(Error::EmptyDataset)));
    }

    #[test]
    fn declared_dimension() {
        let d = parse_libsvm("+1 2:1\n".as_bytes(), "t", Some(5)).unwrap();
        assert_eq!(d.dim, 5);
        assert!(parse_libsvm("+1 6:1\n".as_bytes(), "t", Some(5)).is_err());
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<(usize, f64)>> = (0..50)
            .map(|_| {
                let mut row = Vec::new();
                for i in 0..20 {
                    if rng.random_bool(0.4) {
                        row.push((i, rng.random::<f64>() * 10f64.powi(rng.random_range(-8..8)) - 0.5));
                    }
                }
                row
            })
            .collect();
        let labels = (0..50).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let d = Dataset {
            name: "t".into(),
            rows,
            labels,
            dim: 20,
        };
        let mut buf = Vec::new();
        d.write_libsvm(&mut buf).unwrap();
        let back = parse_libsvm(buf.as_slice(), "t", Some(20)).unwrap();
        assert_eq!(back.labels, d.labels);
        for (a, b) in back.rows.iter().zip(&d.rows) {
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.0, y.0);
                assert_eq!(x.1.to_bits(), y.1.to_bits());
            }
        }
    }

    #[test]
    fn full_split_is_a_permutation() {
        let (tr, te) = split_indices(30, 30, 0, 1).unwrap();
        assert!(te.is_empty());
        let mut sorted = tr.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..30).collect::<Vec<_>>());
    }

    #[test]
    fn splits_are_seeded_and_disjoint() {
        assert_eq!(split_indices(40, 20, 10, 3).unwrap(), split_indices(40, 20, 10, 3).unwrap());
        for (a, b) in [(1, 2), (3, 4), (5, 6), (7, 8), (9, 10)] {
            assert_ne!(split_indices(20, 10, 5, a).unwrap(), split_indices(20, 10, 5, b).unwrap());
        }
        let (tr, te) = split_indices(40, 20, 10, 3).unwrap();
        assert!(tr.iter().all(|i| !te.contains(i)));
        assert!(matches!(split_indices(10, 8, 3, 0), Err(Error::SizeExceeded { requested: 11, available: 10 })));
    }

    #[test]
    fn densify() {
        let d = parse("+1 1:2 3:1\n-1 2:0.5\n").unwrap();
        let p = d.to_logistic(0.0).unwrap();
        assert_eq!(p.num_features(), 3);
        assert_eq!(p.sample(1)[1], 0.5);
        assert_eq!(d.stats().nnz, 3);
        assert_eq!(d.stats().positives, 1);
    }
}
