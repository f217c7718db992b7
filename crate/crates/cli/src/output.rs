use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use squeeze_core::{Protocol, TwistSegment};

/// Formats with 12 significant digits: fixed notation for moderate
/// magnitudes, scientific otherwise.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..12).contains(&exp) {
        format!("{:.*}", (11 - exp) as usize, x)
    } else {
        format!("{:.11e}", x)
    }
}

/// Collects the files of one run and writes its manifest last.
pub struct Run {
    command: String,
    out_dir: PathBuf,
    parameters: serde_json::Value,
    seed: Option<u64>,
    outputs: Vec<String>,
    started: SystemTime,
    clock: Instant,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    parameters: &'a serde_json::Value,
    seed: Option<u64>,
    code_version: &'static str,
    parallel: bool,
    started_unix_s: f64,
    wall_time_s: f64,
    outputs: &'a [String],
    summary: serde_json::Value,
}

impl Run {
    pub fn new(command: &str, out_dir: &Path, parameters: serde_json::Value, seed: Option<u64>) -> Result<Self> {
        fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        Ok(Self {
            command: command.to_string(),
            out_dir: out_dir.to_path_buf(),
            parameters,
            seed,
            outputs: Vec::new(),
            started: SystemTime::now(),
            clock: Instant::now(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.out_dir.join(name)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn finish(self, summary: serde_json::Value) -> Result<PathBuf> {
        let manifest = RunManifest {
            command: &self.command,
            parameters: &self.parameters,
            seed: self.seed,
            code_version: env!("CARGO_PKG_VERSION"),
            parallel: cfg!(feature = "parallel"),
            started_unix_s: self.started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
            wall_time_s: self.clock.elapsed().as_secs_f64(),
            outputs: &self.outputs,
            summary,
        };
        let path = self.out_dir.join(format!("manifest_{}.json", self.command));
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentFile {
    pub theta_rad: f64,
    pub duration_inv_chi: f64,
}

/// On-disk protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolFile {
    pub n_particles: usize,
    pub segments: Vec<SegmentFile>,
    pub xi2: f64,
    pub seed: u64,
}

impl ProtocolFile {
    pub fn new(n_particles: usize, protocol: &Protocol, xi2: f64, seed: u64) -> Self {
        let segments = protocol
            .segments()
            .iter()
            .map(|s| SegmentFile { theta_rad: s.theta(), duration_inv_chi: s.duration() })
            .collect();
        Self { n_particles, segments, xi2, seed }
    }

    pub fn protocol(&self) -> Result<Protocol> {
        let segments = self
            .segments
            .iter()
            .map(|s| TwistSegment::new(s.theta_rad, s.duration_inv_chi))
            .collect::<squeeze_core::Result<Vec<_>>>()?;
        Ok(Protocol::new(segments)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(num(0.0073255185563), "0.00732551855630");
        assert_eq!(num(2000.0), "2000.00000000");
        assert_eq!(num(-1.5), "-1.50000000000");
        assert_eq!(num(1.25e-7), "1.25000000000e-7");
        assert_eq!(num(0.0), "0");
    }

    #[test]
    fn protocol_file_round_trip() {
        let p = Protocol::from_params(&[0.01, -0.1, 0.12]).unwrap();
        let f = ProtocolFile::new(2000, &p, 0.002, 7);
        let text = serde_json::to_string(&f).unwrap();
        assert!(text.contains("\"theta_rad\"") && text.contains("\"duration_inv_chi\""));
        let back: ProtocolFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.protocol().unwrap(), p);
    }
}
