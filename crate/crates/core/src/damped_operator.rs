//! The damping profile `a`, the dissipative term `B = M_a Λ^{1/2} M_a` and the
//! generator `A = Λ + iB` in the truncated eigenbasis.

use std::io::Write;
use std::sync::OnceLock;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::calculus::{inner, GalerkinMatrix, ModeVector, SobolevScale};
use crate::error::{Error, Result};
use crate::geometry::{GridMask, SceneConfig};
use crate::laplacian::SpectralBasis;

/// Identifier of the transition function used by [`smooth_step`].
pub const TRANSITION: &str = "exp-quotient";

fn phi(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// `C^∞` step: 1 for `t ≤ 0`, 0 for `t ≥ 1`, `φ(1-t)/(φ(t)+φ(1-t))` between,
/// with `φ(t) = exp(-1/t)`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let (a, b) = (phi(1.0 - t), phi(t));
        a / (a + b)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DampingProfile {
    pub samples: Vec<f64>,
    pub eps0: f64,
    pub amplitude: f64,
    pub transition: String,
}

/// `a(x) = c·ρ((dist(x,∂B) - ε₀)/ε₀)` at every interior node.
pub fn damping_profile(scene: &SceneConfig, mask: &GridMask) -> Result<DampingProfile> {
    scene.validate()?;
    let (eps0, c) = (scene.eps0, scene.amplitude);
    let samples = mask.sample(|p| c * smooth_step((scene.domain.dist_to_boundary(p) - eps0) / eps0));
    Ok(DampingProfile { samples, eps0, amplitude: c, transition: TRANSITION.into() })
}

/// Interior cutoff `ψ`: 0 where `dist(x,∂B) ≤ ε₀/3`, 1 where `dist ≥ ε₀/2`.
pub fn cutoff_profile(scene: &SceneConfig, mask: &GridMask) -> Result<Vec<f64>> {
    scene.validate()?;
    let eps0 = scene.eps0;
    Ok(mask.sample(|p| smooth_step((eps0 / 2.0 - scene.domain.dist_to_boundary(p)) / (eps0 / 6.0))))
}

/// Eigen-decomposition `A = V diag(τ) V^{-1}` with unit-norm columns of `V`,
/// ordered by real part.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    pub values: Vec<c64>,
    pub vectors: Mat<c64>,
    /// `σ_max(V)/σ_min(V)`.
    pub cond: f64,
}

#[derive(Clone, Debug)]
pub struct DampedOperator {
    gamma_sq: Vec<f64>,
    scale: SobolevScale,
    m_a: GalerkinMatrix,
    b: Mat<f64>,
    a: Mat<c64>,
    eig: OnceLock<Eigensystem>,
}

impl DampedOperator {
    /// Builds `B = M Λ^{1/2} M` and `A = Λ + iB` from a multiplication matrix.
    pub fn from_galerkin(gamma_sq: &[f64], m_a: GalerkinMatrix) -> Result<Self> {
        let k = gamma_sq.len();
        if m_a.k() != k || m_a.mat.ncols() != k {
            return Err(Error::Shape { expected: k, got: m_a.k() });
        }
        let scale = SobolevScale::from_gamma_sq(gamma_sq);
        let gamma = scale.gamma();
        let dm = Mat::from_fn(k, k, |r, c| gamma[r] * m_a.mat[(r, c)]);
        let prod = &m_a.mat * &dm;
        let b = Mat::from_fn(k, k, |r, c| 0.5 * (prod[(r, c)] + prod[(c, r)]));
        let a = Mat::from_fn(k, k, |r, c| {
            let re = if r == c { gamma_sq[r] } else { 0.0 };
            c64::new(re, b[(r, c)])
        });
        Ok(Self { gamma_sq: gamma_sq.to_vec(), scale, m_a, b, a, eig: OnceLock::new() })
    }

    /// `a ≡ c` on the whole domain, so `M = c·I` and `B = c² Λ^{1/2}`.
    pub fn constant_damping(gamma_sq: &[f64], c: f64) -> Result<Self> {
        let k = gamma_sq.len();
        let mat = Mat::from_fn(k, k, |r, col| if r == col { c } else { 0.0 });
        Self::from_galerkin(gamma_sq, GalerkinMatrix { mat, symmetric: true })
    }

    /// `a ≡ 0`: the self-adjoint operator `A = Λ`.
    pub fn undamped(gamma_sq: &[f64]) -> Result<Self> {
        Self::constant_damping(gamma_sq, 0.0)
    }

    pub fn k(&self) -> usize {
        self.gamma_sq.len()
    }

    pub fn gamma_sq(&self) -> &[f64] {
        &self.gamma_sq
    }

    pub fn scale(&self) -> &SobolevScale {
        &self.scale
    }

    pub fn m_a(&self) -> &GalerkinMatrix {
        &self.m_a
    }

    pub fn b(&self) -> &Mat<f64> {
        &self.b
    }

    pub fn a(&self) -> &Mat<c64> {
        &self.a
    }

    /// `A u`.
    pub fn apply(&self, u: &[c64]) -> ModeVector {
        assert_eq!(u.len(), self.k());
        let x = Mat::from_fn(self.k(), 1, |r, _| u[r]);
        let y = &self.a * &x;
        (0..self.k()).map(|r| y[(r, 0)]).collect()
    }

    /// `⟨Bu, u⟩` evaluated from the assembled `B`.
    pub fn b_form(&self, u: &[c64]) -> f64 {
        assert_eq!(u.len(), self.k());
        let x = Mat::from_fn(self.k(), 1, |r, _| u[r]);
        let y = &self.b.as_ref().map(|&v| c64::new(v, 0.0)) * &x;
        let bu: Vec<c64> = (0..self.k()).map(|r| y[(r, 0)]).collect();
        inner(&bu, u).re
    }

    /// `Σ_j γ_j |(M_a u)_j|²`, the same form without `B`.
    pub fn b_form_factored(&self, u: &[c64]) -> f64 {
        let mu = self.m_a.apply(u);
        mu.iter().zip(self.scale.gamma()).map(|(v, g)| g * v.norm_sqr()).sum()
    }

    /// The dense eigensystem, computed on first use.
    pub fn eigensystem(&self) -> Result<&Eigensystem> {
        if let Some(e) = self.eig.get() {
            return Ok(e);
        }
        let e = compute_eigensystem(&self.a)?;
        Ok(self.eig.get_or_init(|| e))
    }

    /// Nearest eigenvalue to `tau` and its distance.
    pub fn nearest_eigenvalue(&self, tau: c64) -> Result<(c64, f64)> {
        let eig = self.eigensystem()?;
        Ok(eig
            .values
            .iter()
            .map(|&t| (t, (t - tau).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((c64::new(f64::NAN, f64::NAN), f64::INFINITY)))
    }
}

/// Assembles the operator for a sampled profile.
pub fn assemble(profile: &DampingProfile, basis: &SpectralBasis) -> Result<DampedOperator> {
    let m_a = crate::calculus::mult_matrix(&profile.samples, basis)?;
    DampedOperator::from_galerkin(basis.gamma_sq(), m_a)
}

fn compute_eigensystem(a: &Mat<c64>) -> Result<Eigensystem> {
    let k = a.nrows();
    if k == 0 {
        return Ok(Eigensystem { values: vec![], vectors: Mat::zeros(0, 0), cond: 1.0 });
    }
    let evd = a.eigen().map_err(|e| Error::Numeric(format!("non-Hermitian eigensolve: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| s[x].re.total_cmp(&s[y].re).then(s[x].im.total_cmp(&s[y].im)));
    let values: Vec<c64> = order.iter().map(|&j| s[j]).collect();
    let mut vectors = Mat::<c64>::zeros(k, k);
    for (c, &j) in order.iter().enumerate() {
        let nrm = u.col(j).norm_l2();
        for r in 0..k {
            vectors[(r, c)] = u[(r, j)] / nrm;
        }
    }
    let sv = vectors.singular_values().map_err(|e| Error::Numeric(format!("singular values: {e:?}")))?;
    let cond = sv.first().copied().unwrap_or(1.0) / sv.last().copied().unwrap_or(1.0);
    Ok(Eigensystem { values, vectors, cond })
}

/// Spectrum of `A` with the strip witness `σ₀* = min Im τ_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    #[serde(skip)]
    pub eigenvalues: Vec<c64>,
    pub k: usize,
    pub sigma0_star: f64,
    /// Eigenvalues with `Im τ ≤ 0`.
    pub nonpositive_count: usize,
    /// Eigenvalues with `Im τ < -1e-10`.
    pub negative_count: usize,
    pub eigvec_cond: f64,
    /// `max_j ‖A v_j - τ_j v_j‖ / ‖A‖_F`.
    pub max_residual: f64,
}

pub fn spectrum(op: &DampedOperator) -> Result<SpectrumReport> {
    let eig = op.eigensystem()?;
    let av = op.a() * &eig.vectors;
    let norm_a = op.a().norm_l2().max(f64::MIN_POSITIVE);
    let mut max_residual: f64 = 0.0;
    for (j, &t) in eig.values.iter().enumerate() {
        let r = (0..op.k()).map(|i| (av[(i, j)] - t * eig.vectors[(i, j)]).norm_sqr()).sum::<f64>().sqrt();
        max_residual = max_residual.max(r / norm_a);
    }
    let sigma0_star = eig.values.iter().map(|t| t.im).fold(f64::INFINITY, f64::min);
    Ok(SpectrumReport {
        eigenvalues: eig.values.clone(),
        k: op.k(),
        sigma0_star,
        nonpositive_count: eig.values.iter().filter(|t| t.im <= 0.0).count(),
        negative_count: eig.values.iter().filter(|t| t.im < -1e-10).count(),
        eigvec_cond: eig.cond,
        max_residual,
    })
}

impl SpectrumReport {
    /// Two columns, `re,im`, one row per eigenvalue.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["re", "im"])?;
        for t in &self.eigenvalues {
            out.write_record([format!("{:e}", t.re), format!("{:e}", t.im)])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary(&self, h: f64, scene_hash: &str) -> SpectrumSummary {
        SpectrumSummary {
            sigma0_star: self.sigma0_star,
            k: self.k,
            h,
            scene_hash: scene_hash.into(),
            nonpositive_count: self.nonpositive_count,
            eigvec_cond: self.eigvec_cond,
            max_residual: self.max_residual,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub sigma0_star: f64,
    pub k: usize,
    pub h: f64,
    pub scene_hash: String,
    pub nonpositive_count: usize,
    pub eigvec_cond: f64,
    pub max_residual: f64,
}
