use std::io::Write;

use crate::{Error, Result};

/// Header plus numeric rows; every cell is finite.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl ResultTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    /// Appends a row. The first cell doubles as the location reported when a
    /// non-finite value shows up.
    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                found: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t: row[0] });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn extend(&mut self, other: ResultTable) -> Result<()> {
        if other.columns != self.columns {
            return Err(Error::InvalidArgument("column schemas differ".into()));
        }
        self.rows.extend(other.rows);
        Ok(())
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Comma-separated, header first. Floats use the shortest representation
    /// that round-trips, in exponent form outside `[1e-4, 1e15)`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format_cell(*v)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> csv::Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let columns = r.headers()?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for record in r.records() {
            let record = record?;
            let row = record
                .iter()
                .map(|s| s.parse::<f64>().unwrap_or(f64::NAN))
                .collect();
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }
}

fn format_cell(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let mut t = ResultTable::new(["t", "x"]);
        t.push(vec![0.0, 0.1]).unwrap();
        t.push(vec![0.5, 1.0 / 3.0]).unwrap();
        t.push(vec![1.0, -1.388794386568583e-11]).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x\n0,0.1\n"));
        assert!(text.ends_with("1,-1.388794386568583e-11\n"));
        assert_eq!(ResultTable::read_csv(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn rejects_bad_rows() {
        let mut t = ResultTable::new(["t", "x"]);
        assert!(t.push(vec![0.0]).is_err());
        assert_eq!(
            t.push(vec![0.2, f64::NAN]),
            Err(Error::NonFinite { t: 0.2 })
        );
        assert_eq!(t.column("x"), Some(vec![]));
        assert_eq!(t.column("y"), None);
    }
}
