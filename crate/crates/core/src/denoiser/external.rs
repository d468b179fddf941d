//! Adapter for noise predictors that live outside this crate.
//!
//! [`load_external`] accepts two layouts:
//!
//! * a toy-denoiser container written by [`ToyDenoiser::save`], recognised
//!   by its magic header;
//! * a JSON manifest describing a third-party model served by a child
//!   process (for example a Python wrapper around a 256×256 ImageNet UNet):
//!
//! ```json
//! {
//!   "format": "attrdiff-external-denoiser",
//!   "version": 1,
//!   "resolution": [256, 256],
//!   "channels": 3,
//!   "schedule": { "steps": 1000, "beta": { "kind": "linear", "start": 0.0001, "end": 0.02 } },
//!   "weights": "256x256_diffusion_uncond.pt",
//!   "command": ["python3", "serve_eps.py", "--weights", "{weights}"]
//! }
//! ```
//!
//! `weights` is resolved relative to the manifest and must exist. In
//! `command`, `{weights}` and `{dir}` expand to the weights path and the
//! manifest directory. The child is started on first use and speaks a
//! little-endian binary protocol on stdin/stdout, one exchange per call:
//!
//! ```text
//! request:  "EPS1" t:u32 h:u32 w:u32 c:u32 x_t:[f32; h·w·c]   (HWC, range [-1,1])
//! response: "EPS1" eps:[f32; h·w·c]
//! ```

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::toy::ToyDenoiser;
use super::{Denoiser, DenoiserHandle, DenoiserMetadata, ScheduleInfo};
use crate::checkpoint;
use crate::diffusion::NoiseSchedule;
use crate::error::{Error, Result};
use crate::image::ImageTensor;

pub const EXTERNAL_FORMAT: &str = "attrdiff-external-denoiser";
const PROTOCOL_MAGIC: &[u8; 4] = b"EPS1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalManifest {
    pub format: String,
    pub version: u32,
    pub resolution: (usize, usize),
    pub channels: usize,
    pub schedule: ScheduleInfo,
    pub weights: PathBuf,
    pub command: Vec<String>,
}

/// Load a denoiser from `path`.
///
/// `expected` is the `(height, width, channels)` the caller will feed; a
/// checkpoint declaring anything else is rejected up front.
pub fn load_external(
    path: &Path,
    schedule: &NoiseSchedule,
    expected: Option<(usize, usize, usize)>,
) -> Result<DenoiserHandle> {
    let bytes = std::fs::read(path).map_err(|e| Error::load(path, e))?;
    let handle: DenoiserHandle = if checkpoint::is_container(&bytes) {
        Arc::new(ToyDenoiser::from_bytes(path, &bytes, schedule)?)
    } else {
        Arc::new(ProcessDenoiser::from_manifest(path, &bytes, schedule)?)
    };
    if let Some(shape) = expected {
        handle.metadata().check_input(shape)?;
    }
    Ok(handle)
}

struct Worker {
    child: Child,
    stdin: BufWriter<ChildStdin>,
    stdout: BufReader<ChildStdout>,
}

impl Drop for Worker {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Child-process backed denoiser; calls are serialized over one pipe.
pub struct ProcessDenoiser {
    command: Vec<String>,
    worker: Mutex<Option<Worker>>,
    meta: DenoiserMetadata,
}

impl ProcessDenoiser {
    fn from_manifest(path: &Path, bytes: &[u8], schedule: &NoiseSchedule) -> Result<Self> {
        let manifest: ExternalManifest = serde_json::from_slice(bytes)
            .map_err(|e| Error::load(path, format!("bad manifest: {e}")))?;
        if manifest.format != EXTERNAL_FORMAT {
            return Err(Error::load(
                path,
                format!("unknown format {:?}", manifest.format),
            ));
        }
        if manifest.version != 1 {
            return Err(Error::load(
                path,
                format!("unsupported manifest version {}", manifest.version),
            ));
        }
        if manifest.command.is_empty() {
            return Err(Error::load(path, "manifest command is empty"));
        }
        let dir = path.parent().unwrap_or(Path::new("."));
        let weights = dir.join(&manifest.weights);
        if !weights.exists() {
            return Err(Error::load(&weights, "weights file not found"));
        }
        let meta = DenoiserMetadata {
            name: format!("external:{}", manifest.weights.display()),
            resolution: Some(manifest.resolution),
            channels: Some(manifest.channels),
            schedule: manifest.schedule,
        };
        meta.check_schedule(schedule)?;
        let command = manifest
            .command
            .iter()
            .map(|arg| {
                arg.replace("{weights}", &weights.to_string_lossy())
                    .replace("{dir}", &dir.to_string_lossy())
            })
            .collect();
        Ok(Self {
            command,
            worker: Mutex::new(None),
            meta,
        })
    }

    fn spawn(&self) -> Result<Worker> {
        let mut child = Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Model(format!("cannot start {:?}: {e}", self.command)))?;
        let stdin = BufWriter::new(child.stdin.take().expect("piped stdin"));
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Worker {
            child,
            stdin,
            stdout,
        })
    }

    fn exchange(worker: &mut Worker, x_t: &ImageTensor, t: usize) -> std::io::Result<Vec<f64>> {
        let (h, w, c) = x_t.shape();
        worker.stdin.write_all(PROTOCOL_MAGIC)?;
        for v in [t, h, w, c] {
            worker.stdin.write_all(&(v as u32).to_le_bytes())?;
        }
        for v in x_t.data() {
            worker.stdin.write_all(&(*v as f32).to_le_bytes())?;
        }
        worker.stdin.flush()?;

        let mut magic = [0u8; 4];
        worker.stdout.read_exact(&mut magic)?;
        if &magic != PROTOCOL_MAGIC {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                "bad response magic",
            ));
        }
        let mut buf = vec![0u8; x_t.len() * 4];
        worker.stdout.read_exact(&mut buf)?;
        Ok(buf
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect())
    }
}

impl Denoiser for ProcessDenoiser {
    fn predict(&self, x_t: &ImageTensor, t: usize) -> Result<ImageTensor> {
        self.meta.check_input(x_t.shape())?;
        let mut guard = self.worker.lock().expect("worker mutex poisoned");
        if guard.is_none() {
            *guard = Some(self.spawn()?);
        }
        let worker = guard.as_mut().expect("worker present");
        match Self::exchange(worker, x_t, t) {
            Ok(eps) => Ok(x_t.with_data(eps)),
            Err(e) => {
                // Drop the broken worker so the next call restarts it.
                *guard = None;
                Err(Error::Model(format!("external denoiser failed: {e}")))
            }
        }
    }

    fn metadata(&self) -> &DenoiserMetadata {
        &self.meta
    }
}
