//! Waveform sample export: CSV and raw little-endian f32 formats.

use std::io::{BufRead, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{CoreError, Result};

use super::segments::SampledWaveform;

fn io_err(path: &Path, source: std::io::Error) -> CoreError {
    CoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn check_rate(wf: &SampledWaveform) -> Result<()> {
    if wf.max_tone_hz > 0.0 && wf.sample_rate_hz < 10.0 * wf.max_tone_hz {
        return Err(CoreError::InvalidParameter {
            name: "sample_rate",
            reason: format!(
                "{} Hz is below 10x the fastest tone {} Hz",
                wf.sample_rate_hz, wf.max_tone_hz
            ),
        });
    }
    Ok(())
}

/// Write `# sample_rate=<hz>` followed by `index,value` rows.
pub fn export_csv(wf: &SampledWaveform, path: &Path) -> Result<()> {
    check_rate(wf)?;
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(w, "# sample_rate={}", wf.sample_rate_hz)?;
        writeln!(w, "index,value")?;
        for (i, v) in wf.samples.iter().enumerate() {
            writeln!(w, "{i},{v:.9e}")?;
        }
        w.flush()
    })()
    .map_err(|e| io_err(path, e))
}

/// Read back a CSV written by `export_csv`.
pub fn read_csv(path: &Path) -> Result<(f64, Vec<f64>)> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut rate = 0.0;
    let mut samples = Vec::new();
    for (ln, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if let Some(rest) = line.strip_prefix("# sample_rate=") {
            rate = rest.trim().parse().map_err(|_| CoreError::InvalidParameter {
                name: "sample_rate",
                reason: format!("unparseable header on line {}", ln + 1),
            })?;
        } else if line.starts_with('#') || line.starts_with("index") || line.is_empty() {
            continue;
        } else {
            let val = line
                .split(',')
                .nth(1)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| CoreError::InvalidParameter {
                    name: "csv",
                    reason: format!("bad row on line {}", ln + 1),
                })?;
            samples.push(val);
        }
    }
    Ok((rate, samples))
}

/// Raw binary export: a bare little-endian IEEE-754 32-bit float array,
/// one float per sample, no header.
pub fn export_raw_f32(wf: &SampledWaveform, path: &Path) -> Result<()> {
    check_rate(wf)?;
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        for v in &wf.samples {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
        w.flush()
    })()
    .map_err(|e| io_err(path, e))
}

/// Read back a raw f32 file.
pub fn read_raw_f32(path: &Path) -> Result<Vec<f32>> {
    let mut file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|e| io_err(path, e))?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wf(samples: Vec<f64>) -> SampledWaveform {
        SampledWaveform {
            sample_rate_hz: 1e6,
            samples,
            segment_boundaries: vec![],
            max_tone_hz: 1e4,
        }
    }

    #[test]
    fn empty_waveform_header_only() {
        let dir = std::env::temp_dir().join("cddclock_export_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("empty.csv");
        export_csv(&wf(vec![]), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2); // header comment + column row
        let (rate, samples) = read_csv(&path).unwrap();
        assert_eq!(rate, 1e6);
        assert!(samples.is_empty());
    }

    #[test]
    fn csv_three_rows_round_trip() {
        let dir = std::env::temp_dir().join("cddclock_export_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("three.csv");
        let source = vec![0.25, -1.5e-3, 0.999999];
        export_csv(&wf(source.clone()), &path).unwrap();
        let (_, samples) = read_csv(&path).unwrap();
        assert_eq!(samples.len(), 3);
        for (a, b) in samples.iter().zip(source.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn raw_f32_round_trip() {
        let dir = std::env::temp_dir().join("cddclock_export_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("wave.f32");
        let source = vec![0.1, -0.7, 3.25e-4, 1.0];
        export_raw_f32(&wf(source.clone()), &path).unwrap();
        let back = read_raw_f32(&path).unwrap();
        assert_eq!(back.len(), 4);
        for (a, b) in back.iter().zip(source.iter()) {
            assert_eq!(*a, *b as f32);
        }
    }

    #[test]
    fn undersampling_rejected() {
        let mut w = wf(vec![0.0; 4]);
        w.sample_rate_hz = 5.0 * w.max_tone_hz;
        let dir = std::env::temp_dir().join("cddclock_export_test");
        std::fs::create_dir_all(&dir).unwrap();
        assert!(export_csv(&w, &dir.join("bad.csv")).is_err());
    }

    #[test]
    fn io_failure_carries_path() {
        let err = export_csv(&wf(vec![0.0]), Path::new("/nonexistent_dir_xyz/file.csv"))
            .unwrap_err();
        assert!(err.to_string().contains("/nonexistent_dir_xyz/file.csv"));
    }
}
