//! Ingestion of external curve datasets, spline re-gridding and train/test
//! splitting.
//!
//! The on-disk format is one CSV per dataset: a header row
//! `label,<t_1>,...,<t_m>` holding the domain values, then one row per
//! curve, `<0|1>,<v_1>,...,<v_m>`. A label of `-` marks an unlabeled curve;
//! such rows load fine but are rejected when a labeled sample is required.

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::sample::{Curve, FunctionalSample, Grid, LabeledSample};
use rand::seq::SliceRandom;
use std::io::Read;
use std::path::Path;

/// Raw curve table as read from disk: a possibly nonequidistant domain, one
/// value row per curve, and optional labels.
#[derive(Debug, Clone)]
pub struct RawCurveTable {
    domain: Vec<f64>,
    rows: Vec<Vec<f64>>,
    labels: Vec<Option<u8>>,
}

impl RawCurveTable {
    pub fn new(domain: Vec<f64>, rows: Vec<Vec<f64>>, labels: Vec<Option<u8>>) -> Result<Self> {
        for i in 1..domain.len() {
            if domain[i] <= domain[i - 1] {
                return Err(Error::DomainNotIncreasing(i));
            }
        }
        if rows.len() != labels.len() {
            return Err(Error::InvalidSpec(format!(
                "{} label entries for {} rows",
                labels.len(),
                rows.len()
            )));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != domain.len() {
                return Err(Error::ParseError {
                    line: i + 2,
                    message: format!("row has {} values, domain has {}", r.len(), domain.len()),
                });
            }
        }
        Ok(Self {
            domain,
            rows,
            labels,
        })
    }

    pub fn domain(&self) -> &[f64] {
        &self.domain
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn labels(&self) -> &[Option<u8>] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Keep only the first `k` domain points of every curve.
    pub fn truncate_domain(&self, k: usize) -> Result<RawCurveTable> {
        if k < 2 || k > self.domain.len() {
            return Err(Error::InvalidSpec(format!(
                "cannot truncate a {}-point domain to {k}",
                self.domain.len()
            )));
        }
        Ok(RawCurveTable {
            domain: self.domain[..k].to_vec(),
            rows: self.rows.iter().map(|r| r[..k].to_vec()).collect(),
            labels: self.labels.clone(),
        })
    }

    /// The table as a functional sample on its raw grid.
    pub fn to_sample(&self) -> Result<FunctionalSample> {
        let grid = Grid::new(self.domain.clone())?;
        let curves = self
            .rows
            .iter()
            .map(|r| Curve::new(r.clone()))
            .collect::<Result<_>>()?;
        FunctionalSample::new(grid, curves)
    }

    /// The table as a labeled sample; fails if any row is unlabeled.
    pub fn to_labeled_sample(&self) -> Result<LabeledSample> {
        let labels = self
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                l.ok_or_else(|| Error::InvalidSpec(format!("curve {i} is unlabeled")))
            })
            .collect::<Result<Vec<u8>>>()?;
        LabeledSample::new(self.to_sample()?, labels)
    }
}

fn parse_number(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok.trim().parse().map_err(|_| Error::ParseError {
        line,
        message: format!("non-numeric cell '{}'", tok.trim()),
    })?;
    if !v.is_finite() {
        return Err(Error::ParseError {
            line,
            message: format!("non-finite cell '{}'", tok.trim()),
        });
    }
    Ok(v)
}

/// Parse the curve CSV format from any reader.
pub fn read_curves_csv<R: Read>(mut reader: R) -> Result<RawCurveTable> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;

    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::ParseError {
        line: 1,
        message: "empty file".into(),
    })?;
    let mut cols = header.trim_end_matches('\r').split(',');
    match cols.next() {
        Some(c) if c.trim() == "label" => {}
        other => {
            return Err(Error::ParseError {
                line: 1,
                message: format!("header must start with 'label', got '{}'", other.unwrap_or("")),
            })
        }
    }
    let mut domain = Vec::new();
    for tok in cols {
        domain.push(parse_number(tok, 1)?);
    }
    if domain.len() < 2 {
        return Err(Error::ParseError {
            line: 1,
            message: format!("domain has {} points, need at least 2", domain.len()),
        });
    }
    for i in 1..domain.len() {
        if domain[i] <= domain[i - 1] {
            return Err(Error::DomainNotIncreasing(i));
        }
    }

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (idx, raw_line) in lines {
        let line_no = idx + 1;
        let line = raw_line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split(',');
        let label_tok = cols.next().unwrap_or("").trim();
        let label = match label_tok {
            "0" => Some(0),
            "1" => Some(1),
            "-" => None,
            other => {
                return Err(Error::ParseError {
                    line: line_no,
                    message: format!("label must be 0, 1 or '-', got '{other}'"),
                })
            }
        };
        let mut row = Vec::with_capacity(domain.len());
        for tok in cols {
            row.push(parse_number(tok, line_no)?);
        }
        if row.len() != domain.len() {
            return Err(Error::ParseError {
                line: line_no,
                message: format!("row has {} values, domain has {}", row.len(), domain.len()),
            });
        }
        rows.push(row);
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(Error::ParseError {
            line: 2,
            message: "file contains no curves".into(),
        });
    }
    RawCurveTable::new(domain, rows, labels)
}

/// Load the curve CSV format from a file.
pub fn load_curves_csv(path: &Path) -> Result<RawCurveTable> {
    let file = std::fs::File::open(path)?;
    read_curves_csv(std::io::BufReader::new(file))
}

/// Write a labeled sample in the curve CSV format.
pub fn write_curves_csv(s: &LabeledSample) -> String {
    let mut out = String::from("label");
    for t in s.grid().points() {
        out.push(',');
        out.push_str(&format_float(*t));
    }
    out.push('\n');
    for (c, l) in s.sample().curves().iter().zip(s.labels()) {
        out.push_str(&l.to_string());
        for v in c.values() {
            out.push(',');
            out.push_str(&format_float(*v));
        }
        out.push('\n');
    }
    out
}

fn format_float(v: f64) -> String {
    // shortest representation that round-trips
    let mut s = format!("{v}");
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// Natural cubic spline through `(xs, ys)`: second derivative zero at both
/// ends. Returns the knot second derivatives.
fn natural_spline_second_derivatives(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // tridiagonal system for the interior second derivatives
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = xs[i] - xs[i - 1];
        let h1 = xs[i + 1] - xs[i];
        diag[i] = (h0 + h1) / 3.0;
        upper[i] = h1 / 6.0;
        rhs[i] = (ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0;
    }
    // Thomas algorithm over indices 1..n-1 with lower[i] = h0 / 6
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    for i in 1..n - 1 {
        let lower = (xs[i] - xs[i - 1]) / 6.0;
        let denom = if i == 1 {
            diag[i]
        } else {
            diag[i] - lower * c_prime[i - 1]
        };
        c_prime[i] = upper[i] / denom;
        d_prime[i] = if i == 1 {
            rhs[i] / denom
        } else {
            (rhs[i] - lower * d_prime[i - 1]) / denom
        };
    }
    for i in (1..n - 1).rev() {
        m[i] = d_prime[i] - c_prime[i] * m[i + 1];
    }
    m
}

/// Evaluate the natural cubic spline at `t`, given knots and their second
/// derivatives.
fn spline_eval(xs: &[f64], ys: &[f64], m: &[f64], t: f64) -> f64 {
    let n = xs.len();
    // clamp to the outermost segments
    let seg = match xs.binary_search_by(|x| x.partial_cmp(&t).expect("finite domain")) {
        Ok(i) => i.min(n - 2),
        Err(0) => 0,
        Err(i) if i >= n => n - 2,
        Err(i) => i - 1,
    };
    let h = xs[seg + 1] - xs[seg];
    let a = xs[seg + 1] - t;
    let b = t - xs[seg];
    m[seg] * a * a * a / (6.0 * h)
        + m[seg + 1] * b * b * b / (6.0 * h)
        + (ys[seg] / h - m[seg] * h / 6.0) * a
        + (ys[seg + 1] / h - m[seg + 1] * h / 6.0) * b
}

/// Re-grid every curve onto `m` equidistant points spanning the original
/// domain, using natural cubic spline interpolation.
pub fn natural_cubic_regrid(table: &RawCurveTable, m: usize) -> Result<FunctionalSample> {
    if table.domain.len() < 4 {
        return Err(Error::InsufficientPoints(format!(
            "spline re-gridding needs at least 4 domain points, got {}",
            table.domain.len()
        )));
    }
    if m < 2 {
        return Err(Error::InvalidSpec(format!("target grid of {m} points")));
    }
    let grid = Grid::equidistant(
        table.domain[0],
        table.domain[table.domain.len() - 1],
        m,
    )?;
    let curves = table
        .rows
        .iter()
        .map(|ys| {
            let second = natural_spline_second_derivatives(&table.domain, ys);
            let values = grid
                .points()
                .iter()
                .map(|&t| spline_eval(&table.domain, ys, &second, t))
                .collect();
            Curve::new(values)
        })
        .collect::<Result<_>>()?;
    FunctionalSample::new(grid, curves)
}

/// Re-grid and attach labels; fails on unlabeled rows.
pub fn natural_cubic_regrid_labeled(table: &RawCurveTable, m: usize) -> Result<LabeledSample> {
    let labels = table
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| Error::InvalidSpec(format!("curve {i} is unlabeled"))))
        .collect::<Result<Vec<u8>>>()?;
    LabeledSample::new(natural_cubic_regrid(table, m)?, labels)
}

/// How to pair training and test samples from a real dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitScheme {
    /// Repeated random subsets of fixed per-group sizes; the complement is
    /// the test sample.
    T1 {
        train_per_group: [usize; 2],
        replications: usize,
        seed: u64,
    },
    /// Leave one out: each curve in turn is the test sample.
    T2,
}

/// Random per-group subsets of the configured sizes for replication `r`;
/// the complement forms the test sample.
pub fn split_t1(
    s: &LabeledSample,
    scheme: &SplitScheme,
    r: usize,
) -> Result<(LabeledSample, LabeledSample)> {
    let (train_per_group, seed) = match scheme {
        SplitScheme::T1 {
            train_per_group,
            seed,
            ..
        } => (train_per_group, *seed),
        SplitScheme::T2 => {
            return Err(Error::InvalidSpec("split_t1 called with a T2 scheme".into()))
        }
    };
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for g in 0..2u8 {
        let size = train_per_group[g as usize];
        let group = s.group_indices(g);
        if size == 0 || size >= group.len() {
            return Err(Error::InsufficientSample(format!(
                "group {g}: training size {size} of {} curves leaves no test curve",
                group.len()
            )));
        }
        let mut shuffled = group;
        let mut rng = substream(seed, "t1-split", (r as u64) << 1 | u64::from(g));
        shuffled.shuffle(&mut rng);
        train_idx.extend_from_slice(&shuffled[..size]);
        test_idx.extend_from_slice(&shuffled[size..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((s.subset(&train_idx)?, s.subset(&test_idx)?))
}

/// Leave-one-out split: train on everything except curve `i`.
pub fn split_t2(s: &LabeledSample, i: usize) -> Result<(LabeledSample, LabeledSample)> {
    if i >= s.len() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: s.len(),
        });
    }
    let train_idx: Vec<usize> = (0..s.len()).filter(|&j| j != i).collect();
    let train = s.subset(&train_idx)?;
    let test = s.subset(&[i])?;
    Ok((train, test))
}
