//! The `H_D^s` scale in eigen-coordinates, multiplication Galerkin matrices
//! and weighted operator norms.
//!
//! Vectors are coefficient vectors `u = Σ a_j e_j` in the truncated basis. The
//! inner product is conjugate-linear in the second slot:
//! `⟨u, v⟩ = Σ a_j conj(b_j)`.

use faer::{c64, Mat, MatRef};

use crate::error::{Error, Result};
use crate::laplacian::SpectralBasis;

/// Mode coefficients `a_j`.
pub type ModeVector = Vec<c64>;

/// The weights `γ_j` that define every `H^s` norm.
#[derive(Clone, Debug, PartialEq)]
pub struct SobolevScale {
    gamma: Vec<f64>,
}

impl SobolevScale {
    pub fn from_gamma_sq(gamma_sq: &[f64]) -> Self {
        Self { gamma: gamma_sq.iter().map(|g| g.sqrt()).collect() }
    }

    pub fn from_basis(basis: &SpectralBasis) -> Self {
        Self::from_gamma_sq(basis.gamma_sq())
    }

    pub fn k(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// `γ_j^s`.
    pub fn weight(&self, j: usize, s: f64) -> f64 {
        if s == 0.0 {
            1.0
        } else {
            self.gamma[j].powf(s)
        }
    }

    /// `diag(γ_j^s)` as a vector.
    pub fn weights(&self, s: f64) -> Vec<f64> {
        (0..self.k()).map(|j| self.weight(j, s)).collect()
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.k() {
            return Err(Error::Shape { expected: self.k(), got: len });
        }
        Ok(())
    }
}

/// `(Σ_j γ_j^{2s} |a_j|²)^{1/2}`.
pub fn hs_norm(scale: &SobolevScale, u: &[c64], s: f64) -> f64 {
    assert_eq!(u.len(), scale.k(), "mode vector length");
    u.iter()
        .enumerate()
        .map(|(j, a)| {
            let w = scale.weight(j, s);
            w * w * a.norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// Coefficient-wise multiplication by `γ_j^s`, i.e. `(-Δ_D)^{s/2}`.
pub fn frac_power_apply(scale: &SobolevScale, u: &[c64], s: f64) -> ModeVector {
    assert_eq!(u.len(), scale.k(), "mode vector length");
    u.iter().enumerate().map(|(j, a)| a * scale.weight(j, s)).collect()
}

/// `⟨u, v⟩ = Σ u_j conj(v_j)`.
pub fn inner(u: &[c64], v: &[c64]) -> c64 {
    assert_eq!(u.len(), v.len());
    u.iter().zip(v).map(|(a, b)| a * b.conj()).sum()
}

/// Slack of the interpolation inequality
/// `‖g‖_s ≤ ‖g‖_t^{s/t} ‖g‖_0^{1-s/t}`, nonnegative in exact arithmetic.
pub fn interpolation_gap(scale: &SobolevScale, g: &[c64], s: f64, t: f64) -> Result<f64> {
    scale.check(g.len())?;
    if !(s >= 0.0 && s <= t) {
        return Err(Error::Domain(format!("need 0 <= s <= t, got s = {s}, t = {t}")));
    }
    if g.iter().all(|a| *a == c64::new(0.0, 0.0)) {
        return Err(Error::Domain("interpolation gap of the zero vector".into()));
    }
    if s == 0.0 || s == t {
        return Ok(0.0);
    }
    let theta = s / t;
    let bound = hs_norm(scale, g, t).powf(theta) * hs_norm(scale, g, 0.0).powf(1.0 - theta);
    Ok(bound - hs_norm(scale, g, s))
}

/// A `K × K` matrix in the eigenbasis.
#[derive(Clone, Debug)]
pub struct GalerkinMatrix {
    pub mat: Mat<f64>,
    pub symmetric: bool,
}

impl GalerkinMatrix {
    pub fn k(&self) -> usize {
        self.mat.nrows()
    }

    pub fn to_complex(&self) -> Mat<c64> {
        Mat::from_fn(self.k(), self.k(), |r, c| c64::new(self.mat[(r, c)], 0.0))
    }

    pub fn apply(&self, u: &[c64]) -> ModeVector {
        let k = self.k();
        assert_eq!(u.len(), k);
        let mut out = vec![c64::new(0.0, 0.0); k];
        for c in 0..k {
            let uc = u[c];
            if uc == c64::new(0.0, 0.0) {
                continue;
            }
            for (r, o) in out.iter_mut().enumerate() {
                *o += uc * self.mat[(r, c)];
            }
        }
        out
    }
}

/// `M[j,k] = h² Σ_x f(x) e_j(x) e_k(x)` for grid samples `f`.
///
/// A constant `f ≡ c` yields exactly `c·I`.
pub fn mult_matrix(f: &[f64], basis: &SpectralBasis) -> Result<GalerkinMatrix> {
    if let Some(&c) = f.first() {
        if f.len() == basis.mask().interior_count() && f.iter().all(|&v| v == c) {
            let k = basis.k();
            let mat = Mat::from_fn(k, k, |r, col| if r == col { c } else { 0.0 });
            return Ok(GalerkinMatrix { mat, symmetric: true });
        }
    }
    let mat = basis.galerkin(f)?;
    Ok(GalerkinMatrix { mat, symmetric: true })
}

fn weighted(m: MatRef<'_, c64>, scale: &SobolevScale, s_in: f64, s_out: f64) -> Mat<c64> {
    let w_in = scale.weights(-s_in);
    let w_out = scale.weights(s_out);
    Mat::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] * (w_out[r] * w_in[c]))
}

fn largest_singular_value(m: MatRef<'_, c64>) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let sv = m.singular_values().map_err(|e| Error::Numeric(format!("singular values: {e:?}")))?;
    Ok(sv.iter().copied().fold(0.0, f64::max))
}

/// `σ_max(D_{s_out} M D_{s_in}^{-1})`, the `H^{s_in} → H^{s_out}` norm.
pub fn weighted_opnorm(scale: &SobolevScale, m: MatRef<'_, c64>, s_in: f64, s_out: f64) -> Result<f64> {
    scale.check(m.nrows())?;
    scale.check(m.ncols())?;
    largest_singular_value(weighted(m, scale, s_in, s_out).as_ref())
}

/// [`weighted_opnorm`] for a real Galerkin matrix.
pub fn weighted_opnorm_real(scale: &SobolevScale, m: &GalerkinMatrix, s_in: f64, s_out: f64) -> Result<f64> {
    weighted_opnorm(scale, m.to_complex().as_ref(), s_in, s_out)
}

/// `‖[M_f, Λ^n]‖_{H^s → H^{s-2n+1}}`.
pub fn commutator_growth(f: &[f64], basis: &SpectralBasis, n: u32, s: f64) -> Result<f64> {
    if n == 0 || 2 * n > 4 {
        return Err(Error::Domain(format!("commutator order n = {n} outside 1..=2")));
    }
    let m = mult_matrix(f, basis)?;
    let scale = SobolevScale::from_basis(basis);
    let lam: Vec<f64> = basis.gamma_sq().iter().map(|g| g.powi(n as i32)).collect();
    let k = basis.k();
    let comm = Mat::from_fn(k, k, |r, c| c64::new(m.mat[(r, c)] * (lam[c] - lam[r]), 0.0));
    weighted_opnorm(&scale, comm.as_ref(), s, s - 2.0 * n as f64 + 1.0)
}
