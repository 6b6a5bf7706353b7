//! CSV and markdown tables. Numbers are printed with four decimals.

use std::fs;
use std::path::Path;

use clap::ValueEnum;

use crate::error::{io_err, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Md,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Md => "md",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Text(String),
    Num(f64),
    /// Mean ± standard deviation.
    Spread(f64, f64),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Num(v) => fmt4(*v),
            Cell::Spread(m, s) => format!("{} ± {}", fmt4(*m), fmt4(*s)),
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Text(v.to_string())
    }
}

pub fn fmt4(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        // Avoid printing "-0.0000".
        let s = format!("{v:.4}");
        if s == "-0.0000" {
            "0.0000".into()
        } else {
            s
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Self { headers: headers.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.headers).expect("in-memory write");
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::render)).expect("in-memory write");
                }
                String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
            }
            Format::Md => {
                let mut out = format!("| {} |\n", self.headers.join(" | "));
                out.push_str(&format!("|{}\n", "---|".repeat(self.headers.len())));
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(Cell::render).collect();
                    out.push_str(&format!("| {} |\n", cells.join(" | ")));
                }
                out
            }
        }
    }

    /// Writes `<dir>/<stem>.<ext>` and returns the path.
    pub fn write(&self, dir: &Path, stem: &str, format: Format) -> Result<std::path::PathBuf> {
        let path = dir.join(format!("{stem}.{}", format.extension()));
        fs::write(&path, self.render(format)).map_err(io_err(&path))?;
        Ok(path)
    }
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_both_formats() {
        let mut t = Table::new(["Method", "ACC"]);
        t.push(vec!["GCN".into(), Cell::Spread(70.456789, 0.44)]);
        t.push(vec!["MLP".into(), (-0.00001).into()]);
        assert_eq!(t.render(Format::Csv), "Method,ACC\nGCN,70.4568 ± 0.4400\nMLP,0.0000\n");
        assert_eq!(t.render(Format::Md), "| Method | ACC |\n|---|---|\n| GCN | 70.4568 ± 0.4400 |\n| MLP | 0.0000 |\n");
    }

    #[test]
    fn spread() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 2f64.sqrt()));
        assert_eq!(mean_std(&[5.0]), (5.0, 0.0));
    }
}
