//! Output files: CSV tables with a provenance header, gnuplot scripts and
//! JSON reports, all written atomically.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::{Error, Result};
use crate::VERSION;

/// A column name and its unit ("1" for dimensionless).
pub type Column<'a> = (&'a str, &'a str);

/// Writes files into one output directory.
#[derive(Debug, Clone)]
pub struct OutputDir {
    dir: PathBuf,
    config_hash: String,
}

impl OutputDir {
    pub fn create(dir: impl Into<PathBuf>, config_hash: &str) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(OutputDir {
            dir,
            config_hash: config_hash.to_owned(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    fn write_atomic(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let mut tmp = NamedTempFile::new_in(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        tmp.write_all(bytes).map_err(|e| Error::io(&path, e))?;
        tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
        Ok(path)
    }

    /// CSV with a leading `#` line carrying the tool version, config hash and
    /// column units, then a plain header row and the data.
    pub fn csv(&self, name: &str, columns: &[Column<'_>], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<PathBuf> {
        let units: Vec<String> = columns.iter().map(|(c, u)| format!("{c} [{u}]")).collect();
        let mut buf = format!(
            "# qpmkit {VERSION}; config sha256 {}; columns: {}\n",
            self.config_hash,
            units.join(", ")
        )
        .into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(columns.iter().map(|(c, _)| *c))?;
            for row in rows {
                if row.len() != columns.len() {
                    return Err(Error::contract(format!("{name}: row width {} != {}", row.len(), columns.len())));
                }
                w.write_record(row.iter().map(|v| v.to_string()))?;
            }
            w.flush().map_err(|e| Error::io(self.dir.join(name), e))?;
        }
        self.write_atomic(name, &buf)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_vec_pretty(value)?;
        text.push(b'\n');
        self.write_atomic(name, &text)
    }

    pub fn text(&self, name: &str, text: &str) -> Result<PathBuf> {
        self.write_atomic(name, text.as_bytes())
    }

    /// A gnuplot script plotting columns of `data` (1-based) against each other.
    pub fn gnuplot(&self, name: &str, plot: &Plot<'_>) -> Result<PathBuf> {
        self.text(name, &plot.script())
    }
}

/// One gnuplot figure over a CSV file written by [`OutputDir::csv`].
#[derive(Debug, Clone)]
pub struct Plot<'a> {
    pub title: &'a str,
    pub data: &'a str,
    pub xlabel: &'a str,
    pub ylabel: &'a str,
    /// (x column, y column, legend) triples, 1-based.
    pub series: Vec<(usize, usize, &'a str)>,
    pub logscale: bool,
}

impl Plot<'_> {
    fn script(&self) -> String {
        let stem = self.data.trim_end_matches(".csv");
        let mut s = format!(
            "# generated by qpmkit {VERSION}\n\
             set datafile separator ','\n\
             set datafile commentschars '#'\n\
             set key autotitle columnhead\n\
             set terminal pngcairo size 900,600\n\
             set output '{stem}.png'\n\
             set title '{}'\n\
             set xlabel '{}'\n\
             set ylabel '{}'\n\
             set grid\n",
            self.title, self.xlabel, self.ylabel
        );
        if self.logscale {
            s.push_str("set logscale xy\n");
        }
        let parts: Vec<String> = self
            .series
            .iter()
            .map(|(x, y, t)| format!("'{}' using {x}:{y} every ::1 with lines title '{t}'", self.data))
            .collect();
        s.push_str("plot ");
        s.push_str(&parts.join(", \\\n     "));
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputDir::create(dir.path(), "abc123").unwrap();
        let p = out
            .csv("t.csv", &[("wavelength_nm", "nm"), ("value", "1")], vec![vec![1550.0, 0.5], vec![1551.0, 1.0]])
            .unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# qpmkit "));
        assert!(lines[0].contains("abc123") && lines[0].contains("wavelength_nm [nm]"));
        assert_eq!(lines[1], "wavelength_nm,value");
        assert_eq!(lines[2], "1550,0.5");
        assert!(out.csv("bad.csv", &[("a", "1")], vec![vec![1.0, 2.0]]).is_err());
    }
}
