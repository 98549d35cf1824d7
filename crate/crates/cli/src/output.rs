//! Artifact output: every file starts with a comment header naming the
//! tool version, the subcommand and the configuration hash, so reruns
//! are identifiable and byte-reproducible.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;

pub struct ArtifactWriter {
    pub dir: PathBuf,
    header: String,
    snapshot: String,
}

impl ArtifactWriter {
    pub fn new(cfg: &RunConfig, subcommand: &str) -> std::io::Result<Self> {
        std::fs::create_dir_all(&cfg.output_dir)?;
        Ok(Self {
            dir: cfg.output_dir.clone(),
            header: format!(
                "# cddclock v{} subcommand={} config={:016x}",
                env!("CARGO_PKG_VERSION"),
                subcommand,
                cfg.hash()
            ),
            snapshot: cfg.snapshot(),
        })
    }

    /// Write the resolved-configuration snapshot alongside the outputs.
    pub fn write_snapshot(&self, subcommand: &str) -> std::io::Result<PathBuf> {
        let path = self.dir.join(format!("resolved_{subcommand}.cfg"));
        let mut f = std::fs::File::create(&path)?;
        writeln!(f, "{}", self.header)?;
        f.write_all(self.snapshot.as_bytes())?;
        Ok(path)
    }

    /// Write a CSV artifact: header comment, column line, then rows.
    pub fn write_csv(
        &self,
        name: &str,
        columns: &str,
        rows: impl Iterator<Item = String>,
    ) -> std::io::Result<PathBuf> {
        let path = self.dir.join(name);
        let file = std::fs::File::create(&path)?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(w, "{}", self.header)?;
        writeln!(w, "{columns}")?;
        for row in rows {
            writeln!(w, "{row}")?;
        }
        w.flush()?;
        Ok(path)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

/// Deterministic float formatting for artifacts.
pub fn fmt(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v:.9e}")
    }
}

/// Read a clock CSV produced by the `clock` subcommand:
/// columns pair,t_s,ion,correction_hz.
pub fn read_clock_csv(path: &Path) -> Result<(Vec<f64>, Vec<Vec<f64>>), String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut times = Vec::new();
    let mut series: Vec<Vec<f64>> = Vec::new();
    let mut last_pair = usize::MAX;
    for line in text.lines() {
        if line.starts_with('#') || line.starts_with("pair") || line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(format!("bad clock row: {line}"));
        }
        let pair: usize = cols[0].parse().map_err(|_| format!("bad pair in {line}"))?;
        let t: f64 = cols[1].parse().map_err(|_| format!("bad time in {line}"))?;
        let ion: usize = cols[2].parse().map_err(|_| format!("bad ion in {line}"))?;
        let corr: f64 = cols[3].parse().map_err(|_| format!("bad value in {line}"))?;
        if ion >= series.len() {
            series.resize_with(ion + 1, Vec::new);
        }
        if pair != last_pair {
            times.push(t);
            last_pair = pair;
        }
        series[ion].push(corr);
    }
    Ok((times, series))
}
