//! Binary path store: one batch file per directory plus a small JSON stub.
//!
//! Batch layout (little endian):
//!
//! ```text
//! "EXTP" | u32 version | u32 spec_len | spec JSON | f64 dt | f64 T | u64 n_paths
//! per path:  u64 seed | u32 dim | u64 steps
//!            f64 values[(steps + 1) * dim] | f64 cont[steps * dim]
//!            u64 n_jumps | (u64 index, f64 left[2], f64 size[2]) * n_jumps
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use extito_core::{JumpRecord, ProcessSpec, SamplePath};
use serde::{Deserialize, Serialize};

pub const MAGIC: &[u8; 4] = b"EXTP";
pub const VERSION: u32 = 1;
pub const BATCH_FILE: &str = "paths.extp";
pub const STUB_FILE: &str = "store.json";
pub const CSV_FILE: &str = "paths.csv";

/// Header echoed into every batch and into the JSON stub.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreHeader {
    pub version: u32,
    pub spec: ProcessSpec,
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: u64,
}

fn put_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}
fn put_u64(w: &mut impl Write, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}
fn put_f64(w: &mut impl Write, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn get<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).context("truncated path store")?;
    Ok(b)
}
fn get_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(get(r)?))
}
fn get_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(get(r)?))
}
fn get_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(get(r)?))
}

/// Writes `paths` into `dir` and returns the files written.
pub fn store_paths(dir: &Path, spec: &ProcessSpec, dt: f64, horizon: f64, paths: &[SamplePath]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let header = StoreHeader { version: VERSION, spec: spec.clone(), dt, horizon, n_paths: paths.len() as u64 };
    let stub = dir.join(STUB_FILE);
    std::fs::write(&stub, serde_json::to_string_pretty(&header)? + "\n")?;
    if paths.is_empty() {
        return Ok(vec![stub]);
    }
    let batch = dir.join(BATCH_FILE);
    let mut w = BufWriter::new(File::create(&batch).with_context(|| format!("creating {}", batch.display()))?);
    w.write_all(MAGIC)?;
    put_u32(&mut w, VERSION)?;
    let spec_json = serde_json::to_vec(spec)?;
    put_u32(&mut w, spec_json.len() as u32)?;
    w.write_all(&spec_json)?;
    put_f64(&mut w, dt)?;
    put_f64(&mut w, horizon)?;
    put_u64(&mut w, paths.len() as u64)?;
    for p in paths {
        put_u64(&mut w, p.seed())?;
        put_u32(&mut w, p.dim() as u32)?;
        put_u64(&mut w, p.steps() as u64)?;
        for &v in p.raw_values().iter().chain(p.raw_cont()) {
            put_f64(&mut w, v)?;
        }
        put_u64(&mut w, p.jumps().len() as u64)?;
        for j in p.jumps() {
            put_u64(&mut w, j.index as u64)?;
            for &v in j.left.iter().chain(&j.size) {
                put_f64(&mut w, v)?;
            }
        }
    }
    w.flush()?;
    Ok(vec![stub, batch])
}

/// Reads a directory written by [`store_paths`]. Refuses other format versions.
pub fn load_paths(dir: &Path) -> Result<(StoreHeader, Vec<SamplePath>)> {
    let stub_path = dir.join(STUB_FILE);
    let stub: StoreHeader = serde_json::from_slice(
        &std::fs::read(&stub_path).with_context(|| format!("reading {}", stub_path.display()))?,
    )?;
    if stub.version != VERSION {
        bail!("path store version {} is not supported (expected {VERSION})", stub.version);
    }
    if stub.n_paths == 0 {
        return Ok((stub, Vec::new()));
    }
    let batch = dir.join(BATCH_FILE);
    let mut r = BufReader::new(File::open(&batch).with_context(|| format!("opening {}", batch.display()))?);
    ensure!(&get::<4>(&mut r)? == MAGIC, "{} is not a path store", batch.display());
    let version = get_u32(&mut r)?;
    if version != VERSION {
        bail!("path store version {version} is not supported (expected {VERSION})");
    }
    let len = get_u32(&mut r)? as usize;
    let mut spec_json = vec![0u8; len];
    r.read_exact(&mut spec_json).context("truncated path store")?;
    let spec: ProcessSpec = serde_json::from_slice(&spec_json)?;
    let dt = get_f64(&mut r)?;
    let horizon = get_f64(&mut r)?;
    let n = get_u64(&mut r)?;
    let mut paths = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let seed = get_u64(&mut r)?;
        let dim = get_u32(&mut r)? as usize;
        let steps = get_u64(&mut r)? as usize;
        let values = (0..(steps + 1) * dim).map(|_| get_f64(&mut r)).collect::<Result<Vec<_>>>()?;
        let cont = (0..steps * dim).map(|_| get_f64(&mut r)).collect::<Result<Vec<_>>>()?;
        let nj = get_u64(&mut r)?;
        let mut jumps = Vec::with_capacity(nj as usize);
        for _ in 0..nj {
            let index = get_u64(&mut r)? as usize;
            let left = [get_f64(&mut r)?, get_f64(&mut r)?];
            let size = [get_f64(&mut r)?, get_f64(&mut r)?];
            jumps.push(JumpRecord { index, left, size });
        }
        paths.push(SamplePath::from_parts(dim, dt, values, cont, jumps, seed)?);
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    ensure!(rest.is_empty(), "{} has {} trailing bytes", batch.display(), rest.len());
    Ok((StoreHeader { version, spec, dt, horizon, n_paths: n }, paths))
}

/// Debug export: one row per grid point of every path.
pub fn export_csv(path: &Path, paths: &[SamplePath]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    let dim = paths.first().map_or(1, |p| p.dim());
    let cols: Vec<String> = (0..dim)
        .flat_map(|c| [format!("x{c}"), format!("cont{c}"), format!("jump{c}")])
        .collect();
    writeln!(w, "seed,step,t,{}", cols.join(","))?;
    for p in paths {
        for i in 0..=p.steps() {
            let mut row = format!("{},{},{}", p.seed(), i, p.time(i));
            let jump = p.jump_at(i);
            for c in 0..dim {
                let cont = if i < p.steps() { p.cont(i)[c] } else { 0.0 };
                let j = jump.map_or(0.0, |j| j.size[c]);
                row += &format!(",{},{},{}", p.state(i)[c], cont, j);
            }
            writeln!(w, "{row}")?;
        }
    }
    w.flush()?;
    Ok(())
}
