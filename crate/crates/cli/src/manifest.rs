//! Output directory bookkeeping and the run manifest.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub rng_seed: Option<u64>,
    pub wall_clock_s: f64,
    pub artifacts: Vec<Artifact>,
}

pub const MANIFEST: &str = "manifest.json";

/// Collects every file written by a command; all writes go through here.
pub struct Outputs {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
    started: Instant,
}

impl Outputs {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.artifacts.push(Artifact {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    /// Writes through `f` into a buffered file, hashing as it goes.
    pub fn write_with<T, E>(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut HashingWriter<BufWriter<File>>) -> Result<T, E>,
    ) -> Result<T, E>
    where
        E: From<io::Error>,
    {
        let file = File::create(self.dir.join(name))?;
        let mut w = HashingWriter::new(BufWriter::new(file));
        let out = f(&mut w)?;
        let (sha256, bytes) = w.finish()?;
        self.artifacts.push(Artifact {
            path: name.to_string(),
            sha256,
            bytes,
        });
        Ok(out)
    }

    pub fn finish(
        self,
        command: &str,
        config_text: &[u8],
        seed: Option<u64>,
    ) -> io::Result<RunManifest> {
        let manifest = RunManifest {
            tool: "ghostbeam",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_sha256: hex::encode(Sha256::digest(config_text)),
            rng_seed: seed,
            wall_clock_s: self.started.elapsed().as_secs_f64(),
            artifacts: self.artifacts,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
        fs::write(self.dir.join(MANIFEST), text + "\n")?;
        Ok(manifest)
    }
}

pub struct HashingWriter<W: Write> {
    inner: W,
    hasher: Sha256,
    bytes: u64,
}

impl<W: Write> HashingWriter<W> {
    fn new(inner: W) -> Self {
        HashingWriter {
            inner,
            hasher: Sha256::new(),
            bytes: 0,
        }
    }

    fn finish(mut self) -> io::Result<(String, u64)> {
        self.inner.flush()?;
        Ok((hex::encode(self.hasher.finalize()), self.bytes))
    }
}

impl<W: Write> Write for HashingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        self.bytes += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streamed_and_direct_hashes_agree() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::create(dir.path()).unwrap();
        out.write("a.txt", b"hello\n").unwrap();
        out.write_with("b.txt", |w| -> io::Result<()> {
            w.write_all(b"hel")?;
            w.write_all(b"lo\n")
        })
        .unwrap();
        let m = out.finish("test", b"cfg", Some(3)).unwrap();
        assert_eq!(m.artifacts[0].sha256, m.artifacts[1].sha256);
        assert_eq!(m.artifacts[1].bytes, 6);
        assert_eq!(fs::read(dir.path().join("b.txt")).unwrap(), b"hello\n");
        assert!(dir.path().join(MANIFEST).exists());
    }
}
