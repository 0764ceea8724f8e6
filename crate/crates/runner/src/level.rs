//! One refinement level of a scene: the generator and the interior cutoff in
//! the truncated eigenbasis.

use std::path::{Path, PathBuf};
use std::time::Instant;

use faer::c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strongdamp::calculus::{mult_matrix, GalerkinMatrix, ModeVector};
use strongdamp::damped_operator::{assemble, cutoff_profile, damping_profile, DampedOperator};
use strongdamp::evolution::Forcing;
use strongdamp::geometry::{rasterize, SceneConfig};
use strongdamp::laplacian::{self, eigenbasis, read_cache, residual_check, write_cache, SpectralBasis};

use crate::config::Damping;
use crate::error::{at, RunError};

pub struct Level {
    pub n: u32,
    pub k: usize,
    pub h: f64,
    pub interior: usize,
    pub scene_hash: String,
    pub damping: Damping,
    /// `max_j ‖S e_j - γ_j² e_j‖ / γ_j²`.
    pub basis_residual: f64,
    pub op: DampedOperator,
    pub psi: GalerkinMatrix,
    pub timings: Vec<(String, f64)>,
}

pub fn cache_path(dir: &Path, scene_hash: &str, n: u32, k: usize) -> PathBuf {
    dir.join(format!("basis-{}-n{n}-k{k}.bin", &scene_hash[..12]))
}

/// Rasterizes, computes (or loads) the eigenbasis and assembles `A` and `M_ψ`.
pub fn build(
    scene: &SceneConfig,
    n: u32,
    k: usize,
    damping: Damping,
    cache_dir: Option<&Path>,
) -> Result<Level, RunError> {
    let mut timings = Vec::new();
    let scene_hash = scene.hash();
    let t = Instant::now();
    let mask = rasterize(scene, n).map_err(at("rasterize"))?;
    let stiffness = laplacian::assemble(&mask).map_err(at("stiffness"))?;
    timings.push(("rasterize".to_string(), t.elapsed().as_secs_f64()));

    let t = Instant::now();
    let basis = load_or_compute(&stiffness, &scene_hash, n, k, cache_dir)?;
    let basis_residual = residual_check(&basis, &stiffness);
    timings.push(("eigenbasis".to_string(), t.elapsed().as_secs_f64()));
    drop(stiffness);

    let t = Instant::now();
    let op = match damping {
        Damping::Profile => {
            let profile = damping_profile(scene, &mask).map_err(at("damping profile"))?;
            assemble(&profile, &basis).map_err(at("operator"))?
        }
        Damping::Zero => DampedOperator::undamped(basis.gamma_sq()).map_err(at("operator"))?,
    };
    let psi_samples = cutoff_profile(scene, &mask).map_err(at("cutoff profile"))?;
    let psi = mult_matrix(&psi_samples, &basis).map_err(at("cutoff matrix"))?;
    timings.push(("operator".to_string(), t.elapsed().as_secs_f64()));

    Ok(Level {
        n,
        k,
        h: mask.h(),
        interior: mask.interior_count(),
        scene_hash,
        damping,
        basis_residual,
        op,
        psi,
        timings,
    })
}

fn load_or_compute(
    stiffness: &laplacian::StiffnessMatrix,
    scene_hash: &str,
    n: u32,
    k: usize,
    cache_dir: Option<&Path>,
) -> Result<SpectralBasis, RunError> {
    let Some(dir) = cache_dir else {
        return eigenbasis(stiffness, k).map_err(at("eigenbasis"));
    };
    let path = cache_path(dir, scene_hash, n, k);
    if let Ok(basis) = read_cache(&path, stiffness.mask(), scene_hash, k) {
        return Ok(basis);
    }
    let basis = eigenbasis(stiffness, k).map_err(at("eigenbasis"))?;
    std::fs::create_dir_all(dir)?;
    write_cache(&basis, scene_hash, &path).map_err(at("basis cache"))?;
    Ok(basis)
}

/// `Σ_m g_m e^{iμ_m t}` with `μ_m` uniform in `[γ_1², γ_K²/4]` and `g_m`
/// uniform in the unit square on the modes with `γ_j² ≤ γ_K²/4`.
pub fn band_limited_forcing(gamma_sq: &[f64], terms: usize, seed: u64) -> Forcing<'static> {
    let k = gamma_sq.len();
    let top = gamma_sq[k - 1] / 4.0;
    let lo = gamma_sq[0].min(top);
    let band = gamma_sq.iter().filter(|&&g| g <= top).count().max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let list = (0..terms)
        .map(|_| {
            let mu = if top > lo { rng.random_range(lo..top) } else { lo };
            let g: ModeVector = (0..k)
                .map(|j| {
                    let z = c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    if j < band {
                        z
                    } else {
                        c64::new(0.0, 0.0)
                    }
                })
                .collect();
            (mu, g)
        })
        .collect();
    Forcing::Exponentials(list)
}
