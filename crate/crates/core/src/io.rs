//! CSV export and import, checkpoints and run manifests.
//!
//! Field files are long format with a `# key=value` preamble, a header row
//! `i,j,k,z,value` and a blank line after every `i` block (gnuplot `splot`
//! layout). Values use the shortest round-trip decimal form, so loading a
//! written file gives back the same bits.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{MeasureHistogram, ShockPoint, Trajectory};
use crate::error::{Error, Result};
use crate::field::FieldPair;
use crate::grid::Grid2D;

/// `log10_density` written for empty cells.
pub const LOG10_ZERO_SENTINEL: f64 = -99.0;

const CHECKPOINT_MAGIC: &[u8; 8] = b"CSCKPT01";

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_preamble(w: &mut impl Write, meta: &[(&str, String)]) -> std::io::Result<()> {
    for (k, v) in meta {
        writeln!(w, "# {k}={v}")?;
    }
    Ok(())
}

pub fn write_field_csv(path: &Path, grid: &Grid2D, a: &Array2<f64>, meta: &[(&str, String)]) -> Result<()> {
    if a.dim() != grid.shape() {
        return Err(Error::Format {
            path: path.into(),
            msg: format!("array shape {:?} does not match grid {:?}", a.dim(), grid.shape()),
        });
    }
    let mut w = create(path)?;
    let res: std::io::Result<()> = (|| {
        write_preamble(&mut w, meta)?;
        writeln!(w, "i,j,k,z,value")?;
        for i in 0..=grid.n {
            for j in 0..=grid.m {
                writeln!(w, "{i},{j},{},{},{}", grid.k(i), grid.z(j), a[[i, j]])?;
            }
            writeln!(w)?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

/// Reads a field file written by [`write_field_csv`]; the shape is taken
/// from the largest indices present and every node must appear once.
pub fn read_field_csv(path: &Path) -> Result<Array2<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, msg: String| Error::Format {
        path: path.into(),
        msg: format!("line {line}: {msg}"),
    };
    let mut entries = Vec::new();
    let mut header_seen = false;
    for (no, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if !header_seen {
            if t != "i,j,k,z,value" {
                return Err(bad(no + 1, format!("expected header i,j,k,z,value, found {t:?}")));
            }
            header_seen = true;
            continue;
        }
        let cols: Vec<&str> = t.split(',').collect();
        if cols.len() != 5 {
            return Err(bad(no + 1, format!("expected 5 columns, found {}", cols.len())));
        }
        let i: usize = cols[0].parse().map_err(|_| bad(no + 1, format!("bad index {:?}", cols[0])))?;
        let j: usize = cols[1].parse().map_err(|_| bad(no + 1, format!("bad index {:?}", cols[1])))?;
        let v: f64 = cols[4].parse().map_err(|_| bad(no + 1, format!("bad value {:?}", cols[4])))?;
        entries.push((i, j, v));
    }
    let n = entries.iter().map(|e| e.0).max().ok_or_else(|| bad(0, "no data rows".into()))?;
    let m = entries.iter().map(|e| e.1).max().unwrap_or(0);
    let mut a = Array2::from_elem((n + 1, m + 1), f64::NAN);
    let mut seen = Array2::from_elem((n + 1, m + 1), false);
    for (i, j, v) in entries {
        if seen[[i, j]] {
            return Err(bad(0, format!("node ({i}, {j}) appears twice")));
        }
        seen[[i, j]] = true;
        a[[i, j]] = v;
    }
    if let Some(((i, j), _)) = seen.indexed_iter().find(|(_, s)| !**s) {
        return Err(bad(0, format!("node ({i}, {j}) is missing")));
    }
    Ok(a)
}

pub fn write_shock_csv(path: &Path, shock: &[ShockPoint], meta: &[(&str, String)]) -> Result<()> {
    let mut w = create(path)?;
    let res: std::io::Result<()> = (|| {
        write_preamble(&mut w, meta)?;
        writeln!(w, "i,k,z,j,jump")?;
        for (i, s) in shock.iter().enumerate() {
            writeln!(w, "{i},{},{},{},{}", s.k, s.z, s.j, s.jump)?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory, meta: &[(&str, String)]) -> Result<()> {
    let mut w = create(path)?;
    let res: std::io::Result<()> = (|| {
        write_preamble(&mut w, meta)?;
        writeln!(w, "# dt={}", traj.dt)?;
        match traj.seed {
            Some(s) => writeln!(w, "# seed={s}")?,
            None => writeln!(w, "# seed=none")?,
        }
        writeln!(w, "t,k,z,p,q")?;
        for p in &traj.points {
            writeln!(w, "{},{},{},{},{}", p.t, p.k, p.z, p.p, p.q)?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

pub fn write_measure_csv(path: &Path, grid: &Grid2D, hist: &MeasureHistogram, meta: &[(&str, String)]) -> Result<()> {
    let mut w = create(path)?;
    let res: std::io::Result<()> = (|| {
        write_preamble(&mut w, meta)?;
        writeln!(w, "# seed={}", hist.seed)?;
        writeln!(w, "# paths={}", hist.paths)?;
        writeln!(w, "# burn_in={}", hist.burn_in)?;
        writeln!(w, "# samples={}", hist.samples)?;
        writeln!(w, "# log10_zero_sentinel={LOG10_ZERO_SENTINEL}")?;
        writeln!(w, "k,z,density,log10_density")?;
        for i in 0..=grid.n {
            for j in 0..=grid.m {
                let d = hist.density[[i, j]];
                let l = if d > 0.0 { d.log10() } else { LOG10_ZERO_SENTINEL };
                writeln!(w, "{},{},{},{}", grid.k(i), grid.z(j), d, l)?;
            }
            writeln!(w)?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

/// Binary checkpoint: the 8-byte magic `CSCKPT01`, then `n`, `m` and the
/// iteration count as little-endian `u64`, then `U` and `p` in row-major
/// order as little-endian `f64`.
pub fn write_checkpoint(path: &Path, f: &FieldPair, iteration: usize) -> Result<()> {
    let (r, c) = f.shape();
    let mut w = create(path)?;
    let res: std::io::Result<()> = (|| {
        w.write_all(CHECKPOINT_MAGIC)?;
        for v in [(r - 1) as u64, (c - 1) as u64, iteration as u64] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in f.u.iter().chain(f.p.iter()) {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()
    })();
    res.map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<(FieldPair, usize)> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::Format {
        path: path.into(),
        msg: msg.into(),
    };
    if buf.len() < 32 || &buf[..8] != CHECKPOINT_MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let word = |k: usize| u64::from_le_bytes(buf[8 + 8 * k..16 + 8 * k].try_into().unwrap()) as usize;
    let (n, m, iteration) = (word(0), word(1), word(2));
    let len = (n + 1) * (m + 1);
    if buf.len() != 32 + 16 * len {
        return Err(bad("checkpoint length does not match its header"));
    }
    let vals: Vec<f64> = buf[32..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let u = Array2::from_shape_vec((n + 1, m + 1), vals[..len].to_vec()).unwrap();
    let p = Array2::from_shape_vec((n + 1, m + 1), vals[len..].to_vec()).unwrap();
    Ok((FieldPair { u, p }, iteration))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// Effective configuration in config-file syntax.
    pub config: String,
    pub grid: [usize; 2],
    pub settings: serde_json::Value,
    pub seeds: Vec<u64>,
    /// Wall-clock seconds per phase.
    pub timings: Vec<(String, f64)>,
    pub outputs: Vec<OutputEntry>,
    pub results: serde_json::Value,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn version_string() -> String {
    match option_env!("CARTEL_GIT_DESCRIBE") {
        Some(v) if !v.is_empty() => format!("{} ({v})", env!("CARGO_PKG_VERSION")),
        _ => env!("CARGO_PKG_VERSION").to_string(),
    }
}

impl RunManifest {
    pub fn new(command: &str, config: String, grid: [usize; 2]) -> Self {
        Self {
            command: command.into(),
            version: version_string(),
            config,
            grid,
            settings: serde_json::Value::Null,
            seeds: Vec::new(),
            timings: Vec::new(),
            outputs: Vec::new(),
            results: serde_json::Value::Null,
        }
    }

    /// Records checksums of `files` (relative to `dir`).
    pub fn add_outputs(&mut self, dir: &Path, files: &[&str]) -> Result<()> {
        for f in files {
            let path = dir.join(f);
            let bytes = fs::metadata(&path).map_err(|e| Error::io(&path, e))?.len();
            self.outputs.push(OutputEntry {
                file: f.to_string(),
                sha256: sha256_file(&path)?,
                bytes,
            });
        }
        Ok(())
    }

    /// `manifest.json` for `solve`, `<command>_manifest.json` otherwise, so
    /// later commands can share the solve directory.
    pub fn file_name(&self) -> String {
        if self.command == "solve" {
            MANIFEST_FILE.to_string()
        } else {
            format!("{}_{MANIFEST_FILE}", self.command)
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(self.file_name());
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Format {
            path: path.clone(),
            msg: e.to_string(),
        })?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Reads the solve manifest of `dir`.
    pub fn read(dir: &Path) -> Result<Self> {
        Self::read_file(&dir.join(MANIFEST_FILE))
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let path = path.to_path_buf();
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path,
            msg: e.to_string(),
        })
    }

    /// Files that are missing or whose checksum no longer matches.
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        self.outputs
            .iter()
            .filter(|o| sha256_file(&dir.join(&o.file)).map(|s| s != o.sha256).unwrap_or(true))
            .map(|o| o.file.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ModelParams;
    use proptest::prelude::*;

    fn grid() -> Grid2D {
        Grid2D::new(&ModelParams::baseline(), 3, 4).unwrap()
    }

    proptest! {
        #[test]
        fn field_csv_round_trips_bitwise(vals in proptest::collection::vec(any::<f64>(), 20)) {
            let g = grid();
            let a = Array2::from_shape_vec(g.shape(), vals).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("f.csv");
            write_field_csv(&path, &g, &a, &[("field", "U".into())]).unwrap();
            let b = read_field_csv(&path).unwrap();
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()));
            }
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let g = grid();
        let f = FieldPair {
            u: Array2::from_shape_fn(g.shape(), |(i, j)| (i as f64).sin() * j as f64),
            p: Array2::from_shape_fn(g.shape(), |(i, j)| 1.0 / (1.0 + i as f64 + j as f64)),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.ckpt");
        write_checkpoint(&path, &f, 1234).unwrap();
        let (back, it) = read_checkpoint(&path).unwrap();
        assert_eq!(it, 1234);
        assert_eq!(back, f);
        fs::write(&path, b"garbage").unwrap();
        assert!(read_checkpoint(&path).is_err());
    }

    #[test]
    fn missing_node_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        fs::write(&path, "i,j,k,z,value\n0,0,0,0,1\n1,1,0,0,1\n").unwrap();
        let err = read_field_csv(&path).unwrap_err().to_string();
        assert!(err.contains("missing"), "{err}");
    }

    #[test]
    fn manifest_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.csv"), "x\n").unwrap();
        let mut m = RunManifest::new("solve", String::new(), [3, 4]);
        m.add_outputs(dir.path(), &["a.csv"]).unwrap();
        m.write(dir.path()).unwrap();
        let back = RunManifest::read(dir.path()).unwrap();
        assert_eq!(back, m);
        assert!(back.verify(dir.path()).is_empty());
        fs::write(dir.path().join("a.csv"), "y\n").unwrap();
        assert_eq!(back.verify(dir.path()), vec!["a.csv".to_string()]);
    }
}
