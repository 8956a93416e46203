use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::nn::{one_hot, Matrix};

/// Labeled samples: `features` is `N × d`, every label is `< classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    classes: usize,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Precondition(format!(
                "label {l} out of range for {classes} classes"
            )));
        }
        Ok(Self {
            features,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.features.cols()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn one_hot_labels(&self) -> Matrix {
        one_hot(&self.labels, self.classes)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    pub fn label_set(&self) -> BTreeSet<usize> {
        self.labels.iter().copied().collect()
    }

    /// Drops the labels.
    pub fn unlabeled(&self) -> PublicPool {
        PublicPool {
            features: self.features.clone(),
        }
    }

    /// CSV with header `f0,...,f{d-1},label`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = feature_header(self.dims());
        header.push("label".into());
        writeln!(w, "{}", header.join(","))?;
        for (row, label) in self.features.row_iter().zip(&self.labels) {
            let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            fields.push(label.to_string());
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, classes: usize) -> Result<Self> {
        let (header, rows) = read_rows(r)?;
        if header.last().map(String::as_str) != Some("label") {
            return Err(Error::Parse("last column must be `label`".into()));
        }
        let dims = header.len() - 1;
        let mut data = Vec::with_capacity(rows.len() * dims);
        let mut labels = Vec::with_capacity(rows.len());
        for (line, fields) in rows {
            let (label, feats) = fields.split_last().expect("header checked width");
            for f in feats {
                data.push(parse_f64(f, line)?);
            }
            labels.push(
                label
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("line {line}: bad label `{label}`")))?,
            );
        }
        Self::new(Matrix::from_vec(labels.len(), dims, data)?, labels, classes)
    }
}

/// The shared unlabeled pool: features only.
#[derive(Debug, Clone, PartialEq)]
pub struct PublicPool {
    features: Matrix,
}

impl PublicPool {
    pub fn new(features: Matrix) -> Self {
        Self { features }
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn dims(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    /// CSV with header `f0,...,f{d-1}`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", feature_header(self.dims()).join(","))?;
        for row in self.features.row_iter() {
            let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let (header, rows) = read_rows(r)?;
        if header.iter().any(|h| h == "label") {
            return Err(Error::Parse("public pool must not carry labels".into()));
        }
        let dims = header.len();
        let mut data = Vec::with_capacity(rows.len() * dims);
        let n = rows.len();
        for (line, fields) in rows {
            for f in &fields {
                data.push(parse_f64(f, line)?);
            }
        }
        Ok(Self::new(Matrix::from_vec(n, dims, data)?))
    }
}

fn feature_header(dims: usize) -> Vec<String> {
    (0..dims).map(|i| format!("f{i}")).collect()
}

type Rows = Vec<(usize, Vec<String>)>;

/// Header plus `(line number, fields)` for every data row; `#` lines are skipped.
fn read_rows<R: BufRead>(r: R) -> Result<(Vec<String>, Rows)> {
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<String> = trimmed.split(',').map(|s| s.trim().to_string()).collect();
        match &header {
            None => header = Some(fields),
            Some(h) => {
                if fields.len() != h.len() {
                    return Err(Error::Parse(format!(
                        "line {line_no}: {} fields, header has {}",
                        fields.len(),
                        h.len()
                    )));
                }
                rows.push((line_no, fields));
            }
        }
    }
    let header = header.ok_or_else(|| Error::Parse("missing header row".into()))?;
    Ok((header, rows))
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad number `{s}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        let x = Matrix::from_rows(&[[0.1, -2.5], [1e-17, 3.0], [7.25, 0.0]]).unwrap();
        Dataset::new(x, vec![0, 2, 1], 3).unwrap()
    }

    #[test]
    fn validates_labels_and_rows() {
        let x = Matrix::zeros(2, 2);
        assert!(Dataset::new(x.clone(), vec![0], 2).is_err());
        assert!(Dataset::new(x, vec![0, 2], 2).is_err());
    }

    #[test]
    fn csv_round_trips_exactly() {
        let ds = tiny();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("f0,f1,label\n"));
        assert_eq!(Dataset::read_csv(&buf[..], 3).unwrap(), ds);

        let pool = ds.unlabeled();
        let mut buf = Vec::new();
        pool.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("f0,f1\n"));
        assert_eq!(PublicPool::read_csv(&buf[..]).unwrap(), pool);
    }

    #[test]
    fn csv_errors_name_the_line() {
        let bad = "f0,label\n1.0,0\nxyz,1\n";
        let err = Dataset::read_csv(bad.as_bytes(), 2).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(PublicPool::read_csv("f0,label\n1,0\n".as_bytes()).is_err());
    }
}
