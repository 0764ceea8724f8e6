//! Reflection symmetry of a grid mask.
//!
//! When the mask is invariant under `i -> nx - i` and/or `k -> ny - k`, the
//! stiffness matrix commutes with the reflections and splits into parity
//! sectors. Each sector is represented on one node per orbit (the
//! representative with `2i >= nx`, `2k >= ny`), and the sector matrix is
//! symmetrized by the orbit sizes so that it stays symmetric.

use crate::geometry::GridMask;

/// Group element: bit 0 reflects x, bit 1 reflects y.
pub(crate) type Flip = u8;

/// Parity of a sector: `+1` or `-1` per reflection (always `+1` for a
/// reflection the mask does not have).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Parity {
    pub x: i8,
    pub y: i8,
}

impl Parity {
    pub const EVEN: Parity = Parity { x: 1, y: 1 };

    /// Character of a group element in this sector.
    pub(crate) fn character(self, flip: Flip) -> f64 {
        let mut c = 1;
        if flip & 1 != 0 {
            c *= self.x;
        }
        if flip & 2 != 0 {
            c *= self.y;
        }
        c as f64
    }

    /// Product character (used for products of two sector functions).
    pub(crate) fn product(self, other: Parity) -> Parity {
        Parity { x: self.x * other.x, y: self.y * other.y }
    }
}

/// One orbit of interior nodes under the symmetry group.
#[derive(Clone, Debug)]
pub(crate) struct Orbit {
    /// Interior index of each distinct orbit member with the flip mapping the
    /// representative onto it. The representative comes first with flip 0.
    slots: [(u32, Flip); 4],
    len: u8,
    /// Whether the representative is fixed by the x (resp. y) reflection.
    pub on_x_axis: bool,
    pub on_y_axis: bool,
}

impl Orbit {
    pub fn size(&self) -> usize {
        self.len as usize
    }

    pub fn members(&self) -> &[(u32, Flip)] {
        &self.slots[..self.len as usize]
    }

    fn allowed(&self, p: Parity) -> bool {
        !(self.on_x_axis && p.x < 0) && !(self.on_y_axis && p.y < 0)
    }
}

/// Orbits of the mask plus, for each interior node, its orbit and the flip
/// mapping the representative onto it.
#[derive(Clone, Debug)]
pub(crate) struct SymmetryLayout {
    pub sym_x: bool,
    pub sym_y: bool,
    pub orbits: Vec<Orbit>,
    /// Indexed by interior index.
    pub orbit_of: Vec<(u32, Flip)>,
}

/// Representatives of one parity sector.
#[derive(Clone, Debug)]
pub(crate) struct Sector {
    pub parity: Parity,
    /// Orbit ids included in the sector, ascending.
    pub orbits: Vec<u32>,
    /// Position of each orbit inside this sector, `u32::MAX` if excluded.
    pub position: Vec<u32>,
}

impl Sector {
    pub fn len(&self) -> usize {
        self.orbits.len()
    }
}

fn mirror_symmetric(mask: &GridMask, x: bool) -> bool {
    let (nx, ny) = mask.dims();
    (0..mask.interior_count()).all(|idx| {
        let (i, k) = mask.node(idx);
        if x {
            mask.is_interior(nx - i, k)
        } else {
            mask.is_interior(i, ny - k)
        }
    })
}

impl SymmetryLayout {
    /// Detects the reflections of `mask`; with `use_symmetry = false` a single
    /// trivial sector is produced.
    pub fn new(mask: &GridMask, use_symmetry: bool) -> Self {
        let sym_x = use_symmetry && mirror_symmetric(mask, true);
        let sym_y = use_symmetry && mirror_symmetric(mask, false);
        let (nx, ny) = mask.dims();
        let n = mask.interior_count();
        let mut orbit_of = vec![(u32::MAX, 0u8); n];
        let mut orbits = Vec::new();
        for idx in 0..n {
            let (i, k) = mask.node(idx);
            let is_rep = (!sym_x || 2 * i >= nx) && (!sym_y || 2 * k >= ny);
            if !is_rep {
                continue;
            }
            let id = orbits.len() as u32;
            let mut slots = [(0u32, 0u8); 4];
            let mut len = 0usize;
            for flip in 0..4u8 {
                if (flip & 1 != 0 && !sym_x) || (flip & 2 != 0 && !sym_y) {
                    continue;
                }
                let ii = if flip & 1 != 0 { nx - i } else { i };
                let kk = if flip & 2 != 0 { ny - k } else { k };
                let m = mask.interior_index(ii, kk).expect("mirror image is interior") as u32;
                if slots[..len].iter().any(|&(x, _)| x == m) {
                    continue;
                }
                slots[len] = (m, flip);
                len += 1;
                orbit_of[m as usize] = (id, flip);
            }
            orbits.push(Orbit {
                slots,
                len: len as u8,
                on_x_axis: sym_x && 2 * i == nx,
                on_y_axis: sym_y && 2 * k == ny,
            });
        }
        debug_assert!(orbit_of.iter().all(|&(o, _)| o != u32::MAX));
        Self { sym_x, sym_y, orbits, orbit_of }
    }

    pub fn parities(&self) -> Vec<Parity> {
        let xs: &[i8] = if self.sym_x { &[1, -1] } else { &[1] };
        let ys: &[i8] = if self.sym_y { &[1, -1] } else { &[1] };
        let mut out = Vec::new();
        for &x in xs {
            for &y in ys {
                out.push(Parity { x, y });
            }
        }
        out
    }

    /// Sectors with at least one representative.
    pub fn sectors(&self) -> Vec<Sector> {
        self.parities().into_iter().map(|p| self.sector(p)).filter(|s| s.len() > 0).collect()
    }

    pub fn sector(&self, parity: Parity) -> Sector {
        let mut orbits = Vec::new();
        let mut position = vec![u32::MAX; self.orbits.len()];
        for (id, o) in self.orbits.iter().enumerate() {
            if o.allowed(parity) {
                position[id] = orbits.len() as u32;
                orbits.push(id as u32);
            }
        }
        Sector { parity, orbits, position }
    }

    /// Symmetrized sector matrix of the 5-point stencil in CSR form (rows
    /// sorted by column), scaled by `1/h²`.
    pub fn sector_matrix(&self, mask: &GridMask, sector: &Sector) -> Csr {
        let inv_h2 = 1.0 / (mask.h() * mask.h());
        let mut row_ptr = Vec::with_capacity(sector.len() + 1);
        let mut cols = Vec::with_capacity(5 * sector.len());
        let mut vals = Vec::with_capacity(5 * sector.len());
        row_ptr.push(0);
        let mut row: Vec<(u32, f64)> = Vec::with_capacity(6);
        for (r, &oid) in sector.orbits.iter().enumerate() {
            let orbit = &self.orbits[oid as usize];
            let (i, k) = mask.node(orbit.slots[0].0 as usize);
            row.clear();
            row.push((r as u32, 4.0 * inv_h2));
            let neighbours = [(i.wrapping_sub(1), k), (i + 1, k), (i, k.wrapping_sub(1)), (i, k + 1)];
            for (ni, nk) in neighbours {
                let Some(nidx) = mask.interior_index(ni, nk) else { continue };
                let (noid, flip) = self.orbit_of[nidx];
                let c = sector.position[noid as usize];
                if c == u32::MAX {
                    continue;
                }
                let scale = (orbit.size() as f64 / self.orbits[noid as usize].size() as f64).sqrt();
                let v = -inv_h2 * sector.parity.character(flip) * scale;
                match row.iter_mut().find(|(cc, _)| *cc == c) {
                    Some(e) => e.1 += v,
                    None => row.push((c, v)),
                }
            }
            row.sort_by_key(|e| e.0);
            for &(c, v) in &row {
                if v != 0.0 {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Csr { n: sector.len(), row_ptr, cols, vals }
    }

    /// Reduces a grid function to a sector: `f̃(r) = Σ_orbit χ f(n) / √m_r`.
    pub fn reduce(&self, sector: &Sector, f: &[f64]) -> Vec<f64> {
        sector
            .orbits
            .iter()
            .map(|&oid| {
                let o = &self.orbits[oid as usize];
                let s: f64 = o.members().iter().map(|&(m, fl)| sector.parity.character(fl) * f[m as usize]).sum();
                s / (o.size() as f64).sqrt()
            })
            .collect()
    }
}

/// Compressed sparse rows with `u32` column indices.
#[derive(Clone, Debug)]
pub struct Csr {
    pub(crate) n: usize,
    pub(crate) row_ptr: Vec<usize>,
    pub(crate) cols: Vec<u32>,
    pub(crate) vals: Vec<f64>,
}

impl Csr {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Entry `(r, c)`, zero if not stored.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[range.clone()].iter().position(|&cc| cc as usize == c).map_or(0.0, |p| self.vals[range.start + p])
    }

    /// Iterates over the stored entries of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[range.clone()].iter().map(|&c| c as usize).zip(self.vals[range].iter().copied())
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[p] * x[self.cols[p] as usize];
            }
            *out = acc;
        }
    }

    pub fn to_dense(&self) -> faer::Mat<f64> {
        let mut m = faer::Mat::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    #[cfg(test)]
    pub(crate) fn is_symmetric(&self) -> bool {
        (0..self.n).all(|r| self.row(r).all(|(c, v)| self.get(c, r) == v))
    }
}
