//! Output directory handling: CSV files with provenance comments, SVG plots
//! and the run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::json;

pub struct Output {
    dir: PathBuf,
    command: String,
    seed: u64,
    config_source: String,
    config_hash: String,
    plots: bool,
    written: Vec<String>,
    notes: Vec<String>,
}

/// Fixed-precision number formatting so CSV bodies are byte-stable.
pub fn num(v: f64) -> String {
    format!("{v:.6}")
}

pub fn sci(v: f64) -> String {
    format!("{v:.6e}")
}

impl Output {
    pub fn new(
        dir: &Path,
        command: &str,
        seed: u64,
        config_source: String,
        config_hash: String,
        plots: bool,
    ) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            seed,
            config_source,
            config_hash,
            plots,
            written: Vec::new(),
            notes: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn note(&mut self, s: impl Into<String>) {
        let s = s.into();
        log::warn!("{s}");
        self.notes.push(s);
    }

    /// Writes `rows` under `header`, preceded by `#` provenance lines.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let mut s = String::new();
        let _ = writeln!(s, "# dpe {}", self.command);
        let _ = writeln!(s, "# seed={}", self.seed);
        let _ = writeln!(s, "# config_sha256={}", self.config_hash);
        s.push_str(&header.join(","));
        s.push('\n');
        for r in rows {
            debug_assert_eq!(r.len(), header.len());
            s.push_str(&r.join(","));
            s.push('\n');
        }
        let path = self.path(name);
        std::fs::write(&path, s).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(path)
    }

    pub fn svg(&mut self, name: &str, svg: &str) -> Result<()> {
        if !self.plots {
            return Ok(());
        }
        let path = self.path(name);
        crate::svg::write(&path, svg).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn record(&mut self, name: &str) {
        self.written.push(name.to_string());
    }

    pub fn manifest(&self, elapsed_s: f64, extra: serde_json::Value) -> Result<()> {
        let m = json!({
            "command": self.command,
            "args": std::env::args().collect::<Vec<_>>(),
            "seed": self.seed,
            "config": self.config_source,
            "config_sha256": self.config_hash,
            "dpe_version": env!("CARGO_PKG_VERSION"),
            "outputs": self.written,
            "notes": self.notes,
            "elapsed_s": elapsed_s,
            "details": extra,
        });
        let path = self.path("run_manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&m)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

/// Numeric grid: `start:stop:step` (inclusive) or a comma list.
pub fn parse_grid(s: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step): (f64, f64, f64) = (
                a.trim().parse().map_err(|_| format!("bad grid start '{a}'"))?,
                b.trim().parse().map_err(|_| format!("bad grid stop '{b}'"))?,
                step.trim().parse().map_err(|_| format!("bad grid step '{step}'"))?,
            );
            if !(step > 0.0) || b < a {
                return Err(format!("grid {s} needs start <= stop and a positive step"));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            (0..=n).map(|k| a + k as f64 * step).collect()
        }
        [list] => list
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad grid value '{v}'")))
            .collect::<std::result::Result<Vec<_>, _>>()?,
        _ => return Err(format!("grid '{s}' is neither start:stop:step nor a comma list")),
    };
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
        return Err(format!("grid '{s}' is empty or non-finite"));
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_grid_is_inclusive() {
        let g = parse_grid("0.8:1.2:0.05").unwrap();
        assert_eq!(g.len(), 9);
        assert!((g[8] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn list_and_single_point() {
        assert_eq!(parse_grid("5").unwrap(), vec![5.0]);
        assert_eq!(parse_grid("1e-7, 1e-3").unwrap(), vec![1e-7, 1e-3]);
    }

    #[test]
    fn bad_grids_rejected() {
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("1:2:0").is_err());
        assert!(parse_grid("a,b").is_err());
        assert!(parse_grid("1:2").is_err());
    }
}
