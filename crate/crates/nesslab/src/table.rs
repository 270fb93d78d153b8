//! Delimited numeric tables with `#`-prefixed metadata.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use crate::config::TableFormat;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { metadata: Vec::new(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Text form; numbers use a fixed 16-digit exponent format so that equal
    /// inputs give byte-identical files.
    pub fn render(&self, format: TableFormat) -> String {
        let d = format.delimiter();
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(out, "{}", self.columns.join(&d.to_string()));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            let _ = writeln!(out, "{}", cells.join(&d.to_string()));
        }
        out
    }

    pub fn write(&self, directory: &Path, stem: &str, formats: &[TableFormat]) -> io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(directory)?;
        formats
            .iter()
            .map(|f| {
                let path = directory.join(format!("{stem}.{}", f.extension()));
                std::fs::write(&path, self.render(*f))?;
                Ok(path)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only_when_empty() {
        let t = Table::new(&["E", "g"]).meta("units", "t_c");
        assert_eq!(t.render(TableFormat::Csv), "# units: t_c\nE,g\n");
    }

    #[test]
    fn rows_are_fixed_format() {
        let mut t = Table::new(&["a"]);
        t.push(vec![0.1]);
        assert_eq!(t.render(TableFormat::Tsv), "a\n1.0000000000000001e-1\n");
    }
}
