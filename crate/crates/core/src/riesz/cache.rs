//! On-disk cache of assembled kernels.
//!
//! Layout, all little-endian: a header of six 8-byte fields
//! `magic, d, s, epsilon, r_max, n` followed by the `n²` entries.
//! The magic word carries the format version.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::{correction, KernelMatrix};
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::params::ModelParams;

const MAGIC: u64 = u64::from_le_bytes(*b"AGGDKRN2");
const HEADER_BYTES: usize = 48;

/// Environment variable that relocates the cache.
pub const CACHE_DIR_ENV: &str = "AGGDIFF_CACHE_DIR";

pub fn default_cache_dir() -> PathBuf {
    match std::env::var_os(CACHE_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => std::env::temp_dir().join("aggdiff-kernels"),
    }
}

/// File name for a kernel. Floats are encoded by their bit patterns so
/// distinct parameters never share a file.
pub fn cache_file_name(grid: &RadialGrid, params: &ModelParams) -> String {
    format!(
        "kernel_d{}_s{:016x}_e{:016x}_r{:016x}_n{}.bin",
        params.d(),
        params.s().to_bits(),
        params.epsilon().to_bits(),
        grid.r_max().to_bits(),
        grid.len()
    )
}

fn header(grid: &RadialGrid, params: &ModelParams) -> [u64; 6] {
    [
        MAGIC,
        params.d() as u64,
        params.s().to_bits(),
        params.epsilon().to_bits(),
        grid.r_max().to_bits(),
        grid.len() as u64,
    ]
}

pub fn write_kernel(path: &Path, kernel: &KernelMatrix) -> Result<()> {
    let mut bytes = Vec::with_capacity(HEADER_BYTES + 8 * kernel.entries.len());
    for field in header(&kernel.grid, &kernel.params) {
        bytes.extend_from_slice(&field.to_le_bytes());
    }
    for v in &kernel.entries {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads a cached kernel. `Ok(None)` if the file is missing; an error if it
/// exists but does not match the requested grid and parameters.
pub fn read_kernel(
    path: &Path,
    grid: Arc<RadialGrid>,
    params: ModelParams,
) -> Result<Option<KernelMatrix>> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let n = grid.len();
    let expected = HEADER_BYTES + 8 * n * n;
    if bytes.len() < HEADER_BYTES {
        return Err(Error::Cache(format!("{} is truncated", path.display())));
    }
    let word = |k: usize| u64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().unwrap());
    let want = header(&grid, &params);
    if word(0) != MAGIC {
        return Err(Error::Cache(format!(
            "{} has an unknown format",
            path.display()
        )));
    }
    if (1..6).any(|k| word(k) != want[k]) {
        return Err(Error::Cache(format!(
            "{} was written for different parameters",
            path.display()
        )));
    }
    if bytes.len() != expected {
        return Err(Error::Cache(format!("{} is truncated", path.display())));
    }
    let entries = bytes[HEADER_BYTES..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let origin = correction::origin_correction(&params, grid.spacing());
    Ok(Some(KernelMatrix::with_entries(
        grid, params, entries, origin,
    )))
}

/// Loads the corrected kernel from `dir`, assembling and storing it on a
/// miss. A corrupt or mismatched file is replaced. Failure to write the
/// cache is not an error.
pub fn load_or_assemble(
    grid: Arc<RadialGrid>,
    params: ModelParams,
    dir: Option<&Path>,
) -> Result<KernelMatrix> {
    let Some(dir) = dir else {
        return KernelMatrix::assemble(grid, params);
    };
    let path = dir.join(cache_file_name(&grid, &params));
    match read_kernel(&path, grid.clone(), params) {
        Ok(Some(k)) => return Ok(k),
        Ok(None) | Err(Error::Cache(_)) => {}
        Err(e) => return Err(e),
    }
    let kernel = KernelMatrix::assemble(grid, params)?;
    if fs::create_dir_all(dir).is_ok() {
        let _ = write_kernel(&path, &kernel);
    }
    Ok(kernel)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(n: usize) -> (Arc<RadialGrid>, ModelParams) {
        (
            Arc::new(RadialGrid::new(8.0, n, 3).unwrap()),
            ModelParams::new(3, 1.25).unwrap(),
        )
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let (grid, params) = setup(24);
        let k1 = load_or_assemble(grid.clone(), params, Some(dir.path())).unwrap();
        let path = dir.path().join(cache_file_name(&grid, &params));
        assert!(path.exists());
        assert_eq!(fs::metadata(&path).unwrap().len(), 48 + 8 * 24 * 24);
        let k2 = read_kernel(&path, grid, params).unwrap().unwrap();
        assert_eq!(k1.entries(), k2.entries());
        assert_eq!(k1.origin_correction, k2.origin_correction);
    }

    #[test]
    fn header_mismatch_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let (grid, params) = setup(12);
        let k = KernelMatrix::assemble(grid.clone(), params).unwrap();
        let path = dir.path().join("k.bin");
        write_kernel(&path, &k).unwrap();
        let other = ModelParams::new(3, 1.3).unwrap();
        assert!(matches!(
            read_kernel(&path, grid.clone(), other),
            Err(Error::Cache(_))
        ));
        fs::write(&path, b"garbage").unwrap();
        assert!(matches!(
            read_kernel(&path, grid.clone(), params),
            Err(Error::Cache(_))
        ));
        // A corrupt file is rebuilt transparently.
        fs::copy(&path, dir.path().join(cache_file_name(&grid, &params))).unwrap();
        let rebuilt = load_or_assemble(grid, params, Some(dir.path())).unwrap();
        assert_eq!(rebuilt.entries(), k.entries());
    }

    #[test]
    fn missing_file_is_none() {
        let dir = tempfile::tempdir().unwrap();
        let (grid, params) = setup(8);
        assert!(read_kernel(&dir.path().join("nope.bin"), grid, params)
            .unwrap()
            .is_none());
    }

    #[test]
    fn names_differ_by_parameter() {
        let (grid, params) = setup(8);
        let eps = params.regularized(1e-3).unwrap();
        assert_ne!(
            cache_file_name(&grid, &params),
            cache_file_name(&grid, &eps)
        );
    }
}
