//! Five-point Dirichlet Laplacian on a grid mask and its lowest eigenpairs.

mod cache;
mod krylov;
pub(crate) mod symmetry;

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par};

use crate::error::{Error, Result};
use crate::geometry::GridMask;
pub use symmetry::{Csr, Parity};
use symmetry::{Sector, SymmetryLayout};

pub use cache::{read_cache, read_cache_header, write_cache, CacheHeader};

/// Sparse stiffness matrix `-Δ_h` on the interior nodes of a mask.
#[derive(Clone, Debug)]
pub struct StiffnessMatrix {
    csr: Csr,
    mask: GridMask,
}

impl StiffnessMatrix {
    pub fn dim(&self) -> usize {
        self.csr.dim()
    }

    pub fn h(&self) -> f64 {
        self.mask.h()
    }

    pub fn mask(&self) -> &GridMask {
        &self.mask
    }

    pub fn csr(&self) -> &Csr {
        &self.csr
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.csr.get(r, c)
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.csr.apply(x, y)
    }

    pub fn to_dense(&self) -> Mat<f64> {
        self.csr.to_dense()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }
}

/// Assembles `-Δ_h` with Dirichlet conditions imposed by dropping every node
/// that is not interior.
pub fn assemble(mask: &GridMask) -> Result<StiffnessMatrix> {
    let n = mask.interior_count();
    if n == 0 {
        return Err(Error::DegenerateDomain);
    }
    let layout = SymmetryLayout::new(mask, false);
    let sector = layout.sector(Parity::EVEN);
    let csr = layout.sector_matrix(mask, &sector);
    Ok(StiffnessMatrix { csr, mask: mask.clone() })
}

#[derive(Clone, Copy, Debug)]
pub struct EigenOptions {
    /// Split the problem by the reflection symmetries of the mask.
    pub use_symmetry: bool,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { use_symmetry: true, seed: 0x5eed }
    }
}

#[derive(Clone, Debug)]
struct SectorModes {
    sector: Sector,
    /// Sector coordinates of the modes; each column has Euclidean norm `1/h`.
    modes: Mat<f64>,
    /// Global mode index of each column.
    global: Vec<usize>,
}

/// Lowest `K` Dirichlet eigenpairs, orthonormal in the discrete inner product
/// `⟨f, g⟩ = h² Σ f g`.
#[derive(Clone, Debug)]
pub struct SpectralBasis {
    gamma_sq: Vec<f64>,
    mask: GridMask,
    layout: SymmetryLayout,
    sectors: Vec<SectorModes>,
    /// Global index -> (sector, column).
    order: Vec<(usize, usize)>,
}

/// Lowest `k` eigenpairs with default options.
pub fn eigenbasis(s: &StiffnessMatrix, k: usize) -> Result<SpectralBasis> {
    eigenbasis_with(s, k, &EigenOptions::default())
}

pub fn eigenbasis_with(s: &StiffnessMatrix, k: usize, opts: &EigenOptions) -> Result<SpectralBasis> {
    let n = s.dim();
    if k == 0 || k > n {
        return Err(Error::Domain(format!("mode count {k} outside 1..={n}")));
    }
    let mask = &s.mask;
    let layout = SymmetryLayout::new(mask, opts.use_symmetry);
    let sectors: Vec<Sector> = layout.sectors();
    let mats: Vec<Csr> = sectors.iter().map(|sec| layout.sector_matrix(mask, sec)).collect();

    let mut want: Vec<usize> = sectors
        .iter()
        .map(|sec| {
            let share = (k as f64 * sec.len() as f64 / n as f64 * 1.2).ceil() as usize + 8;
            share.min(sec.len())
        })
        .collect();
    let mut found: Vec<Option<krylov::EigenPairs>> = sectors.iter().map(|_| None).collect();
    loop {
        for (i, slot) in found.iter_mut().enumerate() {
            if slot.is_none() {
                let seed = opts.seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
                *slot = Some(krylov::lowest_eigenpairs(&mats[i], want[i], seed)?);
            }
        }
        let mut all: Vec<f64> = found.iter().flat_map(|p| p.as_ref().unwrap().values.iter().copied()).collect();
        if all.len() < k {
            // only possible if every sector was truncated; ask for more everywhere
            for i in 0..sectors.len() {
                want[i] = (want[i] * 2).min(sectors[i].len());
                found[i] = None;
            }
            continue;
        }
        all.sort_by(f64::total_cmp);
        let lambda_k = all[k - 1];
        let mut done = true;
        for i in 0..sectors.len() {
            let pairs = found[i].as_ref().unwrap();
            let complete = pairs.values.len() == sectors[i].len() || *pairs.values.last().unwrap() >= lambda_k;
            if !complete {
                want[i] = (want[i] * 3 / 2 + 16).min(sectors[i].len());
                found[i] = None;
                done = false;
            }
        }
        if done {
            break;
        }
    }

    let mut merged: Vec<(f64, usize, usize)> = Vec::new();
    for (si, pairs) in found.iter().enumerate() {
        for (c, &v) in pairs.as_ref().unwrap().values.iter().enumerate() {
            merged.push((v, si, c));
        }
    }
    merged.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    merged.truncate(k);

    let mut used = vec![0usize; sectors.len()];
    for &(_, si, c) in &merged {
        used[si] = used[si].max(c + 1);
    }
    let inv_h = 1.0 / mask.h();
    let mut out_sectors = Vec::with_capacity(sectors.len());
    for (si, (sector, pairs)) in sectors.into_iter().zip(found).enumerate() {
        let pairs = pairs.unwrap();
        let modes = Mat::from_fn(sector.len(), used[si], |r, c| pairs.vectors[(r, c)] * inv_h);
        drop(pairs);
        out_sectors.push(SectorModes { sector, modes, global: vec![usize::MAX; used[si]] });
    }
    let mut order = Vec::with_capacity(k);
    let mut gamma_sq = Vec::with_capacity(k);
    for (j, &(v, si, c)) in merged.iter().enumerate() {
        if v <= 0.0 {
            return Err(Error::Numeric(format!("non-positive Dirichlet eigenvalue {v}")));
        }
        out_sectors[si].global[c] = j;
        order.push((si, c));
        gamma_sq.push(v);
    }
    let mut basis = SpectralBasis { gamma_sq, mask: mask.clone(), layout, sectors: out_sectors, order };
    basis.fix_signs();
    Ok(basis)
}

impl SpectralBasis {
    pub fn k(&self) -> usize {
        self.gamma_sq.len()
    }

    pub fn h(&self) -> f64 {
        self.mask.h()
    }

    pub fn mask(&self) -> &GridMask {
        &self.mask
    }

    /// Ascending eigenvalues `γ_j²`.
    pub fn gamma_sq(&self) -> &[f64] {
        &self.gamma_sq
    }

    /// `γ_j`.
    pub fn gamma(&self) -> Vec<f64> {
        self.gamma_sq.iter().map(|g| g.sqrt()).collect()
    }

    /// Parity sector of mode `j`.
    pub fn parity(&self, j: usize) -> Parity {
        self.sectors[self.order[j].0].sector.parity
    }

    /// Number of symmetry sectors the eigenproblem was split into.
    pub fn sector_count(&self) -> usize {
        self.sectors.len()
    }

    /// Visits the grid value of mode `(sector, col)` at every interior node.
    fn for_each_value(&self, si: usize, col: usize, mut visit: impl FnMut(usize, f64)) {
        let sm = &self.sectors[si];
        let p = sm.sector.parity;
        let e = sm.modes.col_as_slice(col);
        for (oid, orbit) in self.layout.orbits.iter().enumerate() {
            let pos = sm.sector.position[oid];
            if pos == u32::MAX {
                continue;
            }
            let v = e[pos as usize] / (orbit.size() as f64).sqrt();
            for &(m, flip) in orbit.members() {
                visit(m as usize, p.character(flip) * v);
            }
        }
    }

    /// Grid values of mode `j` at the interior nodes.
    pub fn mode(&self, j: usize) -> Vec<f64> {
        let (si, c) = self.order[j];
        let mut out = vec![0.0; self.mask.interior_count()];
        self.for_each_value(si, c, |m, v| out[m] = v);
        out
    }

    /// All modes as columns of an `N × K` matrix.
    pub fn modes_dense(&self) -> Mat<f64> {
        let mut out = Mat::zeros(self.mask.interior_count(), self.k());
        for j in 0..self.k() {
            let (si, c) = self.order[j];
            let col = out.col_as_slice_mut(j);
            self.for_each_value(si, c, |m, v| col[m] = v);
        }
        out
    }

    /// Coefficients `⟨f, e_j⟩` of a grid function.
    pub fn project(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check_len(f)?;
        let h2 = self.h() * self.h();
        let mut out = vec![0.0; self.k()];
        for sm in &self.sectors {
            let reduced = self.layout.reduce(&sm.sector, f);
            for (c, &j) in sm.global.iter().enumerate() {
                let e = sm.modes.col_as_slice(c);
                out[j] = h2 * e.iter().zip(&reduced).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        Ok(out)
    }

    /// Grid function `Σ_j c_j e_j`.
    pub fn synthesize(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.k() {
            return Err(Error::Shape { expected: self.k(), got: coeffs.len() });
        }
        let mut out = vec![0.0; self.mask.interior_count()];
        for (j, &cj) in coeffs.iter().enumerate() {
            if cj == 0.0 {
                continue;
            }
            let (si, c) = self.order[j];
            self.for_each_value(si, c, |m, v| out[m] += cj * v);
        }
        Ok(out)
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        let n = self.mask.interior_count();
        if f.len() != n {
            return Err(Error::Shape { expected: n, got: f.len() });
        }
        Ok(())
    }

    /// Galerkin matrix `h² Σ_x f(x) e_j(x) e_k(x)`, computed blockwise over
    /// pairs of symmetry sectors. Blocks whose orbit sums vanish are skipped.
    pub(crate) fn galerkin(&self, f: &[f64]) -> Result<Mat<f64>> {
        self.check_len(f)?;
        let k = self.k();
        let mut out = Mat::<f64>::zeros(k, k);
        let fmax = f.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if fmax == 0.0 {
            return Ok(out);
        }
        let h2 = self.h() * self.h();
        const CHUNK: usize = 2048;
        for a in 0..self.sectors.len() {
            for b in a..self.sectors.len() {
                let (sa, sb) = (&self.sectors[a], &self.sectors[b]);
                let (ka, kb) = (sa.modes.ncols(), sb.modes.ncols());
                if ka == 0 || kb == 0 {
                    continue;
                }
                let character = sa.sector.parity.product(sb.sector.parity);
                let mut rows: Vec<(u32, u32, f64)> = Vec::new();
                let mut fc_max: f64 = 0.0;
                for (pa, &oid) in sa.sector.orbits.iter().enumerate() {
                    let pb = sb.sector.position[oid as usize];
                    if pb == u32::MAX {
                        continue;
                    }
                    let orbit = &self.layout.orbits[oid as usize];
                    let fc: f64 = orbit.members().iter().map(|&(m, fl)| character.character(fl) * f[m as usize]).sum();
                    fc_max = fc_max.max(fc.abs());
                    rows.push((pa as u32, pb, h2 * fc / orbit.size() as f64));
                }
                if fc_max <= 1e-13 * fmax {
                    continue;
                }
                let mut block = Mat::<f64>::zeros(ka, kb);
                let mut left = Mat::<f64>::zeros(CHUNK, ka);
                let mut right = Mat::<f64>::zeros(CHUNK, kb);
                for chunk in rows.chunks(CHUNK) {
                    let len = chunk.len();
                    for c in 0..ka {
                        let src = sa.modes.col_as_slice(c);
                        let dst = left.col_as_slice_mut(c);
                        for (r, &(pa, _, w)) in chunk.iter().enumerate() {
                            dst[r] = w * src[pa as usize];
                        }
                    }
                    for c in 0..kb {
                        let src = sb.modes.col_as_slice(c);
                        let dst = right.col_as_slice_mut(c);
                        for (r, &(_, pb, _)) in chunk.iter().enumerate() {
                            dst[r] = src[pb as usize];
                        }
                    }
                    matmul(
                        block.as_mut(),
                        Accum::Add,
                        left.as_ref().subrows(0, len).transpose(),
                        right.as_ref().subrows(0, len),
                        1.0,
                        Par::Seq,
                    );
                }
                for (ca, &ja) in sa.global.iter().enumerate() {
                    for (cb, &jb) in sb.global.iter().enumerate() {
                        out[(ja, jb)] = block[(ca, cb)];
                        out[(jb, ja)] = block[(ca, cb)];
                    }
                }
            }
        }
        for r in 0..k {
            for c in r + 1..k {
                let avg = 0.5 * (out[(r, c)] + out[(c, r)]);
                out[(r, c)] = avg;
                out[(c, r)] = avg;
            }
        }
        Ok(out)
    }

    /// Makes the first component above noise level of every mode positive,
    /// scanning interior nodes in row-major order.
    fn fix_signs(&mut self) {
        let n = self.mask.interior_count();
        for si in 0..self.sectors.len() {
            for c in 0..self.sectors[si].modes.ncols() {
                let sm = &self.sectors[si];
                let e = sm.modes.col_as_slice(c);
                let max = e.iter().fold(0.0f64, |a, b| a.max(b.abs()));
                let mut sign = 1.0;
                for idx in 0..n {
                    let (oid, flip) = self.layout.orbit_of[idx];
                    let pos = sm.sector.position[oid as usize];
                    if pos == u32::MAX {
                        continue;
                    }
                    let v = sm.sector.parity.character(flip) * e[pos as usize];
                    if v.abs() > 1e-8 * max {
                        sign = v.signum();
                        break;
                    }
                }
                if sign < 0.0 {
                    for v in self.sectors[si].modes.col_as_slice_mut(c) {
                        *v = -*v;
                    }
                }
            }
        }
    }

    /// Drops everything except the eigenvalues, keeping memory for callers
    /// that no longer need grid values.
    pub fn into_gamma_sq(self) -> Vec<f64> {
        self.gamma_sq
    }
}

/// `max_j ‖S e_j − γ_j² e_j‖ / γ_j²` in the discrete norm, evaluated on the
/// full grid.
pub fn residual_check(basis: &SpectralBasis, s: &StiffnessMatrix) -> f64 {
    let n = s.dim();
    let h = basis.h();
    let mut y = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for j in 0..basis.k() {
        let e = basis.mode(j);
        s.apply(&e, &mut y);
        let g = basis.gamma_sq[j];
        let r = y.iter().zip(&e).map(|(a, b)| (a - g * b).powi(2)).sum::<f64>().sqrt() * h;
        worst = worst.max(r / g);
    }
    worst
}

/// Residual of an arbitrary candidate pair, used to probe the gate.
pub fn pair_residual(s: &StiffnessMatrix, gamma_sq: f64, e: &[f64]) -> f64 {
    let mut y = vec![0.0; s.dim()];
    s.apply(e, &mut y);
    y.iter().zip(e).map(|(a, b)| (a - gamma_sq * b).powi(2)).sum::<f64>().sqrt() * s.h() / gamma_sq
}
