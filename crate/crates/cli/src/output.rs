//! CSV tables, text reports and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};

use crate::config::RunConfig;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, dir: &Path, name: &str) -> Result<PathBuf> {
        let path = dir.join(name);
        fs::write(&path, self.render()).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Quotes a free-text CSV cell.
pub fn text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn flag(b: bool) -> String {
    b.to_string()
}

pub struct Manifest {
    path: PathBuf,
    head: String,
}

impl Manifest {
    /// Writes the manifest (config echo and versions) before any numeric work.
    pub fn start(config: &RunConfig, argv: &[String], threads: usize) -> Result<Self> {
        fs::create_dir_all(&config.output_dir)
            .with_context(|| format!("creating output directory {}", config.output_dir.display()))?;
        let mut head = String::new();
        writeln!(head, "# prnls run manifest").unwrap();
        writeln!(head, "[run]").unwrap();
        writeln!(head, "program = \"prnls {}\"", env!("CARGO_PKG_VERSION")).unwrap();
        writeln!(head, "core = \"prnls-core {}\"", prnls_core::VERSION).unwrap();
        writeln!(head, "threads = {threads}").unwrap();
        writeln!(head, "argv = {:?}", argv).unwrap();
        writeln!(head).unwrap();
        writeln!(head, "[config]").unwrap();
        head.push_str(&indent_tables(&config.to_toml()));
        let path = config.output_dir.join("manifest.toml");
        let manifest = Self { path, head };
        manifest.write("\n[status]\nstate = \"running\"\n")?;
        Ok(manifest)
    }

    fn write(&self, tail: &str) -> Result<()> {
        fs::write(&self.path, format!("{}{}", self.head, tail))
            .with_context(|| format!("writing {}", self.path.display()))
    }

    pub fn finish(&self, state: &str, timings: &[(&str, Duration)], artifacts: &[PathBuf]) -> Result<()> {
        let mut tail = String::new();
        writeln!(tail, "\n[status]").unwrap();
        writeln!(tail, "state = {state:?}").unwrap();
        let names: Vec<String> = artifacts
            .iter()
            .map(|p| p.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned()))
            .collect();
        writeln!(tail, "artifacts = {names:?}").unwrap();
        writeln!(tail, "\n[timings]").unwrap();
        for (label, d) in timings {
            writeln!(tail, "{} = {:.6}", label.replace('-', "_"), d.as_secs_f64()).unwrap();
        }
        self.write(&tail)
    }
}

/// Nests the config's own tables under `[config.*]`.
fn indent_tables(toml_text: &str) -> String {
    toml_text
        .lines()
        .map(|line| match line.strip_prefix('[') {
            Some(rest) if !line.starts_with("[[") => format!("[config.{rest}"),
            _ => line.to_string(),
        })
        .map(|l| l + "\n")
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_roundtrip() {
        for x in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 0.0] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(num(f64::NAN), "NaN");
        assert_eq!(num(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn table_render_and_quoting() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), text("x, y")]);
        assert_eq!(t.render(), "a,b\n1,\"x, y\"\n");
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn nested_tables() {
        assert_eq!(indent_tables("a = 1\n[sweep]\nb = 2\n"), "a = 1\n[config.sweep]\nb = 2\n");
    }
}
