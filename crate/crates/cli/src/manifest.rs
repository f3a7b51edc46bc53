use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

/// `kacgas-<version>-<git describe>` of the running binary.
pub fn build_id() -> String {
    format!("kacgas-{}-{}", env!("CARGO_PKG_VERSION"), env!("KACGAS_BUILD_ID"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

/// Record of one run. Wall-clock timings live only here so that every other output is
/// a pure function of the configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultManifest {
    pub build: String,
    pub kind: String,
    /// The configuration as rendered after flag overrides.
    pub config: String,
    pub seeds: Vec<u64>,
    pub outputs: Vec<OutputRecord>,
    pub timings: Vec<Timing>,
    /// `None` when the run makes no pass/fail claim.
    pub verdict: Option<bool>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes outputs into one directory and remembers their checksums.
#[derive(Debug)]
pub struct Emitter {
    dir: PathBuf,
    outputs: Vec<OutputRecord>,
    timings: Vec<Timing>,
}

impl Emitter {
    pub fn create(dir: impl AsRef<Path>) -> std::io::Result<Self> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(Self {
            dir: dir.as_ref().to_path_buf(),
            outputs: Vec::new(),
            timings: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.outputs.push(OutputRecord {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(std::io::Error::other)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Runs `f` and records its wall time under `stage`.
    pub fn timed<R>(&mut self, stage: &str, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let out = f();
        self.timings.push(Timing {
            stage: stage.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    /// Writes `manifest.json` next to the outputs.
    pub fn finish(
        self,
        kind: &str,
        config: String,
        seeds: Vec<u64>,
        verdict: Option<bool>,
    ) -> std::io::Result<ResultManifest> {
        let manifest = ResultManifest {
            build: build_id(),
            kind: kind.to_string(),
            config,
            seeds,
            outputs: self.outputs,
            timings: self.timings,
            verdict,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(std::io::Error::other)?;
        bytes.push(b'\n');
        fs::write(self.dir.join(MANIFEST_FILE), bytes)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_known_input() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
