//! Versioned on-disk dump of a spectral basis.
//!
//! Layout: one JSON header line, then little-endian `f64` data: the
//! eigenvalues, followed by each sector's mode matrix in column-major order.
//! Modes are stored in sector coordinates so the file is a fraction of the
//! full-grid size.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::symmetry::SymmetryLayout;
use super::{SectorModes, SpectralBasis};
use crate::error::{Error, Result};
use crate::geometry::GridMask;

const FORMAT: &str = "strongdamp-basis";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheHeader {
    pub format: String,
    pub version: u32,
    pub h: f64,
    pub k: usize,
    pub scene_hash: String,
    pub interior: usize,
    pub sym_x: bool,
    pub sym_y: bool,
    /// `(parity x, parity y, rows, cols)` per sector.
    pub sectors: Vec<(i8, i8, usize, usize)>,
    /// Global mode index -> (sector, column).
    pub order: Vec<(usize, usize)>,
}

pub fn write_cache(basis: &SpectralBasis, scene_hash: &str, path: &Path) -> Result<()> {
    let header = CacheHeader {
        format: FORMAT.into(),
        version: VERSION,
        h: basis.h(),
        k: basis.k(),
        scene_hash: scene_hash.into(),
        interior: basis.mask.interior_count(),
        sym_x: basis.layout.sym_x,
        sym_y: basis.layout.sym_y,
        sectors: basis
            .sectors
            .iter()
            .map(|s| (s.sector.parity.x, s.sector.parity.y, s.modes.nrows(), s.modes.ncols()))
            .collect(),
        order: basis.order.clone(),
    };
    let dir = path.parent().unwrap_or(Path::new("."));
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for &g in &basis.gamma_sq {
            w.write_all(&g.to_le_bytes())?;
        }
        for s in &basis.sectors {
            for c in 0..s.modes.ncols() {
                for &v in s.modes.col_as_slice(c) {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Reads only the header of a cache file.
pub fn read_cache_header(path: &Path) -> Result<CacheHeader> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: CacheHeader = serde_json::from_str(&line).map_err(|e| Error::Cache(e.to_string()))?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(Error::Cache(format!("unsupported format {} v{}", header.format, header.version)));
    }
    Ok(header)
}

/// Loads a basis dumped by [`write_cache`] for the given mask, checking the
/// header against `scene_hash`, the spacing, the mode count and the layout.
pub fn read_cache(path: &Path, mask: &GridMask, scene_hash: &str, k: usize) -> Result<SpectralBasis> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: CacheHeader = serde_json::from_str(&line).map_err(|e| Error::Cache(e.to_string()))?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(Error::Cache(format!("unsupported format {} v{}", header.format, header.version)));
    }
    if header.scene_hash != scene_hash {
        return Err(Error::Cache("scene hash mismatch".into()));
    }
    if header.h != mask.h() || header.k != k || header.interior != mask.interior_count() {
        return Err(Error::Cache(format!(
            "cache is for h = {}, K = {}, {} nodes; wanted h = {}, K = {k}, {} nodes",
            header.h,
            header.k,
            header.interior,
            mask.h(),
            mask.interior_count()
        )));
    }
    let layout = SymmetryLayout::new(mask, header.sym_x || header.sym_y);
    if layout.sym_x != header.sym_x || layout.sym_y != header.sym_y {
        return Err(Error::Cache("symmetry layout mismatch".into()));
    }
    let layout_sectors = layout.sectors();
    if layout_sectors.len() != header.sectors.len() {
        return Err(Error::Cache("sector count mismatch".into()));
    }
    let read_f64 = |r: &mut BufReader<std::fs::File>| -> Result<f64> {
        let mut buf = [0u8; 8];
        r.read_exact(&mut buf).map_err(|e| Error::Cache(format!("truncated data: {e}")))?;
        Ok(f64::from_le_bytes(buf))
    };
    let mut gamma_sq = Vec::with_capacity(k);
    for _ in 0..k {
        gamma_sq.push(read_f64(&mut r)?);
    }
    let mut sectors = Vec::with_capacity(layout_sectors.len());
    for (sector, &(px, py, rows, cols)) in layout_sectors.into_iter().zip(&header.sectors) {
        if (sector.parity.x, sector.parity.y) != (px, py) || sector.len() != rows {
            return Err(Error::Cache("sector shape mismatch".into()));
        }
        let mut modes = Mat::<f64>::zeros(rows, cols);
        for c in 0..cols {
            for v in modes.col_as_slice_mut(c) {
                *v = read_f64(&mut r)?;
            }
        }
        sectors.push(SectorModes { sector, modes, global: vec![usize::MAX; cols] });
    }
    if header.order.len() != k {
        return Err(Error::Cache("mode order length mismatch".into()));
    }
    for (j, &(si, c)) in header.order.iter().enumerate() {
        let slot = sectors
            .get_mut(si)
            .and_then(|s| s.global.get_mut(c))
            .ok_or_else(|| Error::Cache(format!("mode {j} points outside the stored sectors")))?;
        *slot = j;
    }
    if sectors.iter().any(|s| s.global.contains(&usize::MAX)) {
        return Err(Error::Cache("unreferenced stored mode".into()));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Cache(format!("{} trailing bytes", rest.len())));
    }
    Ok(SpectralBasis { gamma_sq, mask: mask.clone(), layout, sectors, order: header.order })
}
