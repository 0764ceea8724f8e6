//! Shifted solves `(A - τ)u = f`, weighted resolvent norms, `τ` sweeps and
//! the semiclassical estimate harness.

use std::io::Write;

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{c64, Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{hs_norm, inner, GalerkinMatrix, ModeVector};
use crate::damped_operator::DampedOperator;
use crate::error::{Error, Result};

/// Distance to the spectrum below which a shift counts as a pole.
pub const POLE_TOL: f64 = 1e-12;
/// Relative residual accepted from a shifted solve.
pub const SOLVE_TOL: f64 = 1e-8;

const LANCZOS_TOL: f64 = 1e-12;
const LANCZOS_STEPS: usize = 160;
const LANCZOS_RESTARTS: usize = 20;

/// `⟨τ⟩ = (1 + |τ|²)^{1/2}`.
pub fn japanese(tau: c64) -> f64 {
    (1.0 + tau.norm_sqr()).sqrt()
}

/// `n` log-spaced points in `[lo, hi]`, both ends included.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi >= lo, "log grid needs 0 < lo <= hi");
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n).map(|i| if i == n - 1 { hi } else { (a + (b - a) * i as f64 / (n - 1) as f64).exp() }).collect()
        }
    }
}

fn to_col(v: &[c64]) -> Mat<c64> {
    Mat::from_fn(v.len(), 1, |r, _| v[r])
}

fn from_col(m: &Mat<c64>) -> ModeVector {
    (0..m.nrows()).map(|r| m[(r, 0)]).collect()
}

fn l2(v: &[c64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// `A - τ` factored once for repeated solves.
pub struct Shifted<'a> {
    op: &'a DampedOperator,
    tau: c64,
    lu: PartialPivLu<c64>,
}

impl<'a> Shifted<'a> {
    /// Factors `A - τ` after checking that `τ` is not an eigenvalue.
    pub fn new(op: &'a DampedOperator, tau: c64) -> Result<Self> {
        let (nearest, distance) = op.nearest_eigenvalue(tau)?;
        if distance <= POLE_TOL {
            return Err(Error::PoleProximity { tau, nearest, distance });
        }
        let k = op.k();
        let mut m = op.a().clone();
        for j in 0..k {
            m[(j, j)] -= tau;
        }
        Ok(Self { op, tau, lu: m.partial_piv_lu() })
    }

    pub fn tau(&self) -> c64 {
        self.tau
    }

    fn pole_error(&self) -> Error {
        match self.op.nearest_eigenvalue(self.tau) {
            Ok((nearest, distance)) => Error::PoleProximity { tau: self.tau, nearest, distance },
            Err(e) => e,
        }
    }

    /// `(A - τ)^{-1} f` with a residual check.
    pub fn solve(&self, f: &[c64]) -> Result<ModeVector> {
        if f.len() != self.op.k() {
            return Err(Error::Shape { expected: self.op.k(), got: f.len() });
        }
        let u = from_col(&self.lu.solve(to_col(f)));
        let mut r = self.op.apply(&u);
        for ((rj, uj), fj) in r.iter_mut().zip(&u).zip(f) {
            *rj -= self.tau * uj + fj;
        }
        let (res, fnorm) = (l2(&r), l2(f));
        if !res.is_finite() || res > SOLVE_TOL * fnorm {
            return Err(self.pole_error());
        }
        Ok(u)
    }

    fn solve_raw(&self, f: Mat<c64>) -> Mat<c64> {
        self.lu.solve(f)
    }

    fn solve_adjoint_raw(&self, f: Mat<c64>) -> Mat<c64> {
        self.lu.solve_adjoint(f)
    }

    /// `σ_max(D_{s_out} (A - τ)^{-1} D_{s_in}^{-1})` by Lanczos on `R^H R`.
    pub fn norm(&self, s_in: f64, s_out: f64) -> Result<f64> {
        let scale = self.op.scale();
        let w_in = scale.weights(-s_in);
        let w_out = scale.weights(s_out);
        let apply = |x: &Mat<c64>| -> Mat<c64> {
            let y = Mat::from_fn(x.nrows(), 1, |r, _| x[(r, 0)] * w_in[r]);
            let z = self.solve_raw(y);
            let y = Mat::from_fn(z.nrows(), 1, |r, _| z[(r, 0)] * (w_out[r] * w_out[r]));
            let z = self.solve_adjoint_raw(y);
            Mat::from_fn(z.nrows(), 1, |r, _| z[(r, 0)] * w_in[r])
        };
        let theta = lanczos_max(self.op.k(), apply)?;
        if !theta.is_finite() {
            return Err(self.pole_error());
        }
        Ok(theta.sqrt())
    }
}

/// Largest eigenvalue of a Hermitian positive semidefinite operator given by
/// its action, by Lanczos with full reorthogonalization and thick restart on
/// the top Ritz vector.
fn lanczos_max(n: usize, apply: impl Fn(&Mat<c64>) -> Mat<c64>) -> Result<f64> {
    if n == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a2c);
    let mut start = Mat::from_fn(n, 1, |_, _| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let steps = LANCZOS_STEPS.min(n);
    let mut last = 0.0;
    for _ in 0..LANCZOS_RESTARTS {
        let nrm = start.norm_l2();
        let mut q: Vec<Mat<c64>> = vec![Mat::from_fn(n, 1, |r, _| start[(r, 0)] / nrm)];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut best = (0.0, Mat::<f64>::zeros(1, 1), 0usize);
        for j in 0..steps {
            let mut w = apply(&q[j]);
            let a = inner(w.col_as_slice(0), q[j].col_as_slice(0)).re;
            alpha.push(a);
            for _ in 0..2 {
                for qi in &q {
                    let c = inner(w.col_as_slice(0), qi.col_as_slice(0));
                    for r in 0..n {
                        let v = qi[(r, 0)];
                        w[(r, 0)] -= c * v;
                    }
                }
            }
            let b = w.norm_l2();
            let t = Mat::from_fn(j + 1, j + 1, |r, c| {
                if r == c {
                    alpha[r]
                } else if r == c + 1 {
                    beta[c]
                } else if c == r + 1 {
                    beta[r]
                } else {
                    0.0
                }
            });
            let evd = t.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Numeric(format!("{e:?}")))?;
            let theta = evd.S().column_vector()[j];
            let y = evd.U().col(j).to_owned();
            let resid = b * y[j].abs();
            best = (theta, Mat::from_fn(j + 1, 1, |r, _| y[r]), j + 1);
            if !theta.is_finite() {
                return Ok(f64::INFINITY);
            }
            if resid <= LANCZOS_TOL * theta || b <= f64::EPSILON * theta.max(f64::MIN_POSITIVE) || j + 1 == n {
                return Ok(theta);
            }
            beta.push(b);
            q.push(Mat::from_fn(n, 1, |r, _| w[(r, 0)] / b));
        }
        let (theta, y, m) = best;
        if (theta - last).abs() <= LANCZOS_TOL * theta {
            return Ok(theta);
        }
        last = theta;
        start = Mat::zeros(n, 1);
        for (i, qi) in q.iter().take(m).enumerate() {
            for r in 0..n {
                start[(r, 0)] += qi[(r, 0)] * y[(i, 0)];
            }
        }
    }
    Err(Error::NoConvergence { what: "Lanczos norm estimate", residual: last })
}

/// `(A - τ)^{-1} f`.
pub fn resolve(op: &DampedOperator, tau: c64, f: &[c64]) -> Result<ModeVector> {
    Shifted::new(op, tau)?.solve(f)
}

/// `‖(A - τ)^{-1}‖_{H^{s_in} → H^{s_out}}`.
pub fn resnorm(op: &DampedOperator, tau: c64, s_in: f64, s_out: f64) -> Result<f64> {
    Shifted::new(op, tau)?.norm(s_in, s_out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowFlag {
    Ok,
    Pole,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau_re: f64,
    pub tau_im: f64,
    pub s_in: f64,
    pub s_out: f64,
    pub resnorm: f64,
    /// `resnorm·⟨τ⟩^{1/2}/log²⟨τ⟩`; only filled for unweighted rows.
    pub normalized: f64,
    pub flag: RowFlag,
}

impl SweepRow {
    pub fn tau(&self) -> c64 {
        c64::new(self.tau_re, self.tau_im)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Largest finite normalized value over unflagged rows.
    pub fn c_star(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.flag == RowFlag::Ok && r.normalized.is_finite())
            .map(|r| r.normalized)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_resnorm(&self) -> f64 {
        self.rows.iter().filter(|r| r.flag == RowFlag::Ok).map(|r| r.resnorm).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn pole_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.flag == RowFlag::Pole).count()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Resolvent norms at the given shifts, one row per shift; poles are flagged
/// rather than fatal.
pub fn sweep(op: &DampedOperator, taus: &[c64], s_in: f64, s_out: f64) -> Result<SweepTable> {
    op.eigensystem()?;
    let rows = taus
        .par_iter()
        .map(|&tau| {
            let res = Shifted::new(op, tau).and_then(|sh| sh.norm(s_in, s_out));
            let (resnorm, flag) = match res {
                Ok(v) => (v, RowFlag::Ok),
                Err(Error::PoleProximity { .. }) => (f64::INFINITY, RowFlag::Pole),
                Err(e) => return Err(e),
            };
            let normalized = if s_in == 0.0 && s_out == 0.0 {
                let j = japanese(tau);
                resnorm * j.sqrt() / (j.ln() * j.ln())
            } else {
                f64::NAN
            };
            Ok(SweepRow { tau_re: tau.re, tau_im: tau.im, s_in, s_out, resnorm, normalized, flag })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { rows })
}

/// Unweighted sweep over `samples` log-spaced real shifts in `[tau_min, tau_max]`.
pub fn sweep_theorem1(op: &DampedOperator, tau_min: f64, tau_max: f64, samples: usize) -> Result<SweepTable> {
    sweep_theorem1_offset(op, tau_min, tau_max, samples, 0.0)
}

/// As [`sweep_theorem1`] on the line `Im τ = im`.
pub fn sweep_theorem1_offset(
    op: &DampedOperator,
    tau_min: f64,
    tau_max: f64,
    samples: usize,
    im: f64,
) -> Result<SweepTable> {
    let taus: Vec<c64> = log_grid(tau_min, tau_max, samples).into_iter().map(|t| c64::new(t, im)).collect();
    sweep(op, &taus, 0.0, 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateSample {
    /// `τ` (real part) or `λ`, depending on the estimate.
    pub param: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub name: String,
    pub samples: Vec<EstimateSample>,
    pub max_ratio: f64,
    pub trials: usize,
    pub range: (f64, f64),
}

impl EstimateReport {
    fn new(name: String, samples: Vec<EstimateSample>, trials: usize) -> Self {
        let max_ratio = samples.iter().map(|s| s.ratio).fold(f64::NEG_INFINITY, f64::max);
        let lo = samples.iter().map(|s| s.param).fold(f64::INFINITY, f64::min);
        let hi = samples.iter().map(|s| s.param).fold(f64::NEG_INFINITY, f64::max);
        Self { name, samples, max_ratio, trials, range: (lo, hi) }
    }
}

fn weighted_report(
    op: &DampedOperator,
    name: String,
    taus: &[c64],
    s_in: f64,
    s_out: f64,
    weight: impl Fn(c64) -> f64 + Sync,
) -> Result<EstimateReport> {
    op.eigensystem()?;
    let samples = taus
        .par_iter()
        .map(|&tau| Ok(EstimateSample { param: tau.re, ratio: resnorm(op, tau, s_in, s_out)? * weight(tau) }))
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimateReport::new(name, samples, taus.len()))
}

/// `max_τ ‖(A - τ)^{-1}‖_{H^s → H^{s+1-ε}}`.
pub fn check_resso(op: &DampedOperator, s: f64, eps: f64, taus: &[c64]) -> Result<EstimateReport> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    weighted_report(op, format!("resso s={s} eps={eps}"), taus, s, s + 1.0 - eps, |_| 1.0)
}

/// `max_τ ‖(A - τ)^{-1}‖_{L² → H²} ⟨τ⟩^{-1/2} log^{-2}⟨τ⟩`.
pub fn check_resalpha(op: &DampedOperator, taus: &[c64]) -> Result<EstimateReport> {
    weighted_report(op, "resalpha".into(), taus, 0.0, 2.0, |tau| {
        let j = japanese(tau);
        1.0 / (j.sqrt() * j.ln() * j.ln())
    })
}

/// Both sides of `⟨Bu, u⟩ = Im⟨u, v⟩` for `(λ² - Λ - iB)u = v`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyIdentity {
    /// `⟨Bu, u⟩`.
    pub form: f64,
    /// `Im⟨u, v⟩`.
    pub flux: f64,
    pub norm_u: f64,
    pub norm_v: f64,
}

impl EnergyIdentity {
    pub fn gap(&self) -> f64 {
        (self.form - self.flux).abs()
    }

    /// Gap relative to `‖u‖‖v‖`; zero when either vanishes.
    pub fn scaled_gap(&self) -> f64 {
        let s = self.norm_u * self.norm_v;
        if s == 0.0 {
            self.gap()
        } else {
            self.gap() / s
        }
    }
}

/// Solves `(λ² - Λ - iB)u = v` and evaluates both sides of the energy identity.
pub fn energy_identity(op: &DampedOperator, lambda: f64, v: &[c64]) -> Result<EnergyIdentity> {
    let mut u = resolve(op, c64::new(lambda * lambda, 0.0), v)?;
    for x in &mut u {
        *x = -*x;
    }
    Ok(EnergyIdentity { form: op.b_form(&u), flux: inner(&u, v).im, norm_u: l2(&u), norm_v: l2(v) })
}

/// `|⟨Bu, u⟩ - Im⟨u, v⟩|`.
pub fn energy_identity_gap(op: &DampedOperator, lambda: f64, v: &[c64]) -> Result<f64> {
    Ok(energy_identity(op, lambda, v)?.gap())
}

/// Random complex vector with entries uniform in the unit square, normalized.
pub fn random_unit(rng: &mut impl Rng, k: usize) -> ModeVector {
    let mut v: ModeVector =
        (0..k).map(|_| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let n = l2(&v);
    if n > 0.0 {
        for x in &mut v {
            *x /= n;
        }
    }
    v
}

/// The localized semiclassical inequalities, each with implied constant 1.
/// For every `λ`, `trials` random `v` are drawn; `u` solves
/// `(λ² - Λ - iB)u = v` and `ψu` is formed with `m_psi`. One report per
/// inequality and `s`, holding the worst ratio per `λ`.
pub fn lemma_harness(
    op: &DampedOperator,
    m_psi: &GalerkinMatrix,
    lambdas: &[f64],
    s_list: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<EstimateReport>> {
    if m_psi.k() != op.k() {
        return Err(Error::Shape { expected: op.k(), got: m_psi.k() });
    }
    if trials == 0 {
        return Err(Error::Domain("lemma harness needs at least one trial".into()));
    }
    op.eigensystem()?;
    let scale = op.scale();
    let n_s = s_list.len();
    // per λ: [hs+1 per s, hs per s, cor1, cor2]
    let per_lambda = lambdas
        .par_iter()
        .enumerate()
        .map(|(li, &lam)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (li as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let sh = Shifted::new(op, c64::new(lam * lam, 0.0))?;
            let mut worst = vec![0.0f64; 2 * n_s + 2];
            for _ in 0..trials {
                let v = random_unit(&mut rng, op.k());
                let u: ModeVector = sh.solve(&v)?.into_iter().map(|x| -x).collect();
                let pu = m_psi.apply(&u);
                let (nu, nv) = (l2(&u), l2(&v));
                let sq = lam.sqrt();
                for (i, &s) in s_list.iter().enumerate() {
                    let (a, b) = (hs_norm(scale, &pu, s + 1.0), hs_norm(scale, &pu, s));
                    worst[i] = worst[i].max(a / (lam * b + nv + sq * nu));
                    worst[n_s + i] = worst[n_s + i].max(b / ((a + nv) / lam + nu / sq));
                }
                let (p0, ph, p1) = (hs_norm(scale, &pu, 0.0), hs_norm(scale, &pu, 0.5), hs_norm(scale, &pu, 1.0));
                worst[2 * n_s] = worst[2 * n_s].max(p0 / ((ph + nu) / sq + nv / lam));
                worst[2 * n_s + 1] = worst[2 * n_s + 1].max(p1 / (sq * ph + nv / sq + nu));
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut names: Vec<String> = s_list.iter().map(|s| format!("hs+1 s={s}")).collect();
    names.extend(s_list.iter().map(|s| format!("hs s={s}")));
    names.push("cor1".into());
    names.push("cor2".into());
    Ok(names
        .into_iter()
        .enumerate()
        .map(|(i, name)| {
            let samples =
                lambdas.iter().zip(&per_lambda).map(|(&lam, w)| EstimateSample { param: lam, ratio: w[i] }).collect();
            EstimateReport::new(name, samples, trials * lambdas.len())
        })
        .collect())
}
