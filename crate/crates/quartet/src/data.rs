//! Column-named numeric tables and the repository CSV format.
//!
//! The CSV contract is bit-exact: header row, target column first, `;`
//! separator, `.` decimal mark, LF line endings, and floats printed with 17
//! significant digits so `read(write(d)) == d` down to the last bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// A dense numeric table with one designated target column.
///
/// The target column is canonically stored first; constructors reorder the
/// input if needed.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    column_names: Vec<String>,
    target_name: String,
    rows: Matrix,
}

/// Format a float with 17 significant digits (full f64 round-trip precision).
pub fn fmt_full(v: f64) -> String {
    format!("{v:.16e}")
}

impl Dataset {
    /// Build a dataset from column names, a target name, and row-major data.
    ///
    /// Rejects NaN/Inf entries, ragged data, and unknown targets. Columns are
    /// reordered so the target comes first.
    pub fn new(column_names: Vec<String>, target_name: &str, rows: Matrix) -> Result<Self> {
        if column_names.len() != rows.ncols() {
            return Err(Error::Schema(format!(
                "{} column names for {} columns",
                column_names.len(),
                rows.ncols()
            )));
        }
        let Some(tpos) = column_names.iter().position(|c| c == target_name) else {
            return Err(Error::Schema(format!(
                "target '{target_name}' not among columns {column_names:?}"
            )));
        };
        if rows.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::Schema("non-finite value in dataset".into()));
        }
        let (column_names, rows) = if tpos == 0 {
            (column_names, rows)
        } else {
            // Move the target column to the front, features keep their order.
            let mut order = vec![tpos];
            order.extend((0..column_names.len()).filter(|&j| j != tpos));
            let names = order.iter().map(|&j| column_names[j].clone()).collect();
            let mut m = Matrix::zeros(rows.nrows(), rows.ncols());
            for (newj, &oldj) in order.iter().enumerate() {
                for i in 0..rows.nrows() {
                    m.set(i, newj, rows.get(i, oldj));
                }
            }
            (names, m)
        };
        Ok(Self { column_names, target_name: target_name.to_string(), rows })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.nrows()
    }

    /// Number of feature columns (total minus target).
    pub fn n_features(&self) -> usize {
        self.rows.ncols() - 1
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    /// Feature names in column order (everything after the target).
    pub fn feature_names(&self) -> &[String] {
        &self.column_names[1..]
    }

    /// Copy of the feature block as an `n x p` matrix.
    pub fn features(&self) -> Matrix {
        let (n, p) = (self.n_rows(), self.n_features());
        let mut m = Matrix::zeros(n, p);
        for i in 0..n {
            for j in 0..p {
                m.set(i, j, self.rows.get(i, j + 1));
            }
        }
        m
    }

    /// Copy of the target column.
    pub fn target(&self) -> Vec<f64> {
        self.rows.column(0)
    }

    pub fn rows(&self) -> &Matrix {
        &self.rows
    }

    /// Position of `name` among the feature columns.
    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.feature_names()
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    /// Serialize to the repository CSV format.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.n_rows() * self.rows.ncols() * 26);
        out.push_str(&self.column_names.join(";"));
        out.push('\n');
        for i in 0..self.n_rows() {
            let row = self.rows.row(i);
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    out.push(';');
                }
                let _ = write!(out, "{v:.16e}");
            }
            out.push('\n');
        }
        out
    }

    /// Parse from the repository CSV format. The first column is the target.
    pub fn from_csv_string(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let Some((_, header)) = lines.next() else {
            return Err(Error::CsvParse { line: 1, message: "empty file".into() });
        };
        let column_names: Vec<String> = header.split(';').map(str::trim).map(String::from).collect();
        if column_names.is_empty() || column_names.iter().any(String::is_empty) {
            return Err(Error::CsvParse { line: 1, message: format!("malformed header '{header}'") });
        }
        let ncols = column_names.len();
        let mut data: Vec<f64> = Vec::new();
        let mut nrows = 0usize;
        for (idx, line) in lines {
            if line.is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let mut count = 0usize;
            for cell in line.split(';') {
                let v: f64 = cell.trim().parse().map_err(|_| Error::CsvParse {
                    line: lineno,
                    message: format!("non-numeric cell '{}'", cell.trim()),
                })?;
                if !v.is_finite() {
                    return Err(Error::CsvParse {
                        line: lineno,
                        message: format!("non-finite value '{}'", cell.trim()),
                    });
                }
                data.push(v);
                count += 1;
            }
            if count != ncols {
                return Err(Error::CsvParse {
                    line: lineno,
                    message: format!("row has {count} cells, header has {ncols}"),
                });
            }
            nrows += 1;
        }
        let target = column_names[0].clone();
        Dataset::new(column_names, &target, Matrix::from_vec(nrows, ncols, data))
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv_string()).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv_string(&text)
    }
}
