//! The semigroup `U(t) = e^{itA}`, Duhamel solutions `u' = iAu + f`, decay
//! fits and smoothing diagnostics.

use std::io::Write;

use faer::linalg::solvers::Solve;
use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::calculus::{hs_norm, ModeVector};
use crate::damped_operator::DampedOperator;
use crate::error::{Error, Result};

/// Eigenvector condition number above which [`Propagator::new`] switches to
/// the matrix exponential.
pub const COND_LIMIT: f64 = 1e8;
/// `dt·γ_K²` must not exceed this.
pub const CFL: f64 = 0.1;

const I: c64 = c64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Choose [`Method::Eigen`] unless the eigenvectors are ill-conditioned.
    Auto,
    Eigen,
    Expm,
}

enum Kernel {
    Eigen { values: Vec<c64>, v: Mat<c64>, v_inv: Mat<c64> },
    Expm,
}

/// Evaluates `e^{itA}` for one operator.
pub struct Propagator<'a> {
    op: &'a DampedOperator,
    kernel: Kernel,
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

/// `(e^z - 1)/z`.
fn phi1(z: c64) -> c64 {
    if z.norm() < 1e-3 {
        let mut term = c64::new(1.0, 0.0);
        let mut sum = term;
        for n in 2..=6 {
            term = term * z / n as f64;
            sum += term;
        }
        sum
    } else {
        (z.exp() - 1.0) / z
    }
}

impl<'a> Propagator<'a> {
    pub fn new(op: &'a DampedOperator) -> Result<Self> {
        Self::with_method(op, Method::Auto)
    }

    pub fn with_method(op: &'a DampedOperator, method: Method) -> Result<Self> {
        let kernel = match method {
            Method::Expm => Kernel::Expm,
            Method::Eigen | Method::Auto => {
                let eig = op.eigensystem()?;
                if method == Method::Auto && !(eig.cond <= COND_LIMIT) {
                    Kernel::Expm
                } else {
                    let k = op.k();
                    let v_inv = eig.vectors.partial_piv_lu().solve(Mat::<c64>::identity(k, k));
                    Kernel::Eigen { values: eig.values.clone(), v: eig.vectors.clone(), v_inv }
                }
            }
        };
        Ok(Self { op, kernel })
    }

    pub fn method(&self) -> Method {
        match self.kernel {
            Kernel::Eigen { .. } => Method::Eigen,
            Kernel::Expm => Method::Expm,
        }
    }

    pub fn op(&self) -> &DampedOperator {
        self.op
    }

    fn check_len(&self, u: &[c64]) -> Result<()> {
        if u.len() != self.op.k() {
            return Err(Error::Shape { expected: self.op.k(), got: u.len() });
        }
        Ok(())
    }

    /// `e^{itA} u0`.
    pub fn propagate(&self, u0: &[c64], t: f64) -> Result<ModeVector> {
        self.check_len(u0)?;
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("propagation time must be nonnegative, got {t}")));
        }
        if t == 0.0 {
            return Ok(u0.to_vec());
        }
        match &self.kernel {
            Kernel::Eigen { values, v, v_inv } => {
                let c = v_inv * to_col(u0);
                let w = Mat::from_fn(c.nrows(), 1, |r, _| c[(r, 0)] * (I * values[r] * t).exp());
                Ok(from_col(&(v * w)))
            }
            Kernel::Expm => {
                let e = expm(&self.op.a().as_ref().map(|&a| I * a * t));
                Ok(from_col(&(e * to_col(u0))))
            }
        }
    }

    /// `‖du/dt - iAu‖ / (‖A‖_F ‖u‖)` at time `t`, with `du/dt` from a central
    /// difference.
    pub fn residual(&self, u0: &[c64], t: f64) -> Result<f64> {
        let norm_a = self.op.a().norm_l2().max(f64::MIN_POSITIVE);
        let delta = (1e-4 / norm_a).min(t.max(1e-300));
        let (t0, t1) = if t >= delta { (t - delta, t + delta) } else { (t, t + 2.0 * delta) };
        let (a, b, u) = (self.propagate(u0, t0)?, self.propagate(u0, t1)?, self.propagate(u0, 0.5 * (t0 + t1))?);
        let au = self.op.apply(&u);
        let r: Vec<c64> = (0..u.len()).map(|j| (b[j] - a[j]) / (t1 - t0) - I * au[j]).collect();
        let scale = norm_a * l2(&u);
        Ok(if scale == 0.0 { l2(&r) } else { l2(&r) / scale })
    }
}

/// `e^{itA} u0` using the method chosen by [`Propagator::new`].
pub fn propagate(op: &DampedOperator, u0: &[c64], t: f64) -> Result<ModeVector> {
    Propagator::new(op)?.propagate(u0, t)
}

fn one_norm(m: &Mat<c64>) -> f64 {
    (0..m.ncols()).map(|c| (0..m.nrows()).map(|r| m[(r, c)].norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with the degree-13 Padé
/// approximant.
pub fn expm(a: &Mat<c64>) -> Mat<c64> {
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;
    let n = a.nrows();
    let norm = one_norm(a);
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a * faer::Scale(c64::new(0.5f64.powi(s), 0.0));
    let id = Mat::<c64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let sc = |x: f64| faer::Scale(c64::new(x, 0.0));
    let inner_u = &a6 * sc(B[13]) + &a4 * sc(B[11]) + &a2 * sc(B[9]);
    let u = &a * (&a6 * &inner_u + &a6 * sc(B[7]) + &a4 * sc(B[5]) + &a2 * sc(B[3]) + &id * sc(B[1]));
    let inner_v = &a6 * sc(B[12]) + &a4 * sc(B[10]) + &a2 * sc(B[8]);
    let v = &a6 * &inner_v + &a6 * sc(B[6]) + &a4 * sc(B[4]) + &a2 * sc(B[2]) + &id * sc(B[0]);
    let mut r = (&v - &u).partial_piv_lu().solve(&v + &u);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Forcing term of `u' = iAu + f`.
pub enum Forcing<'f> {
    Zero,
    /// `f(t) = Σ_m g_m e^{iμ_m t}`; integrated exactly on each step.
    Exponentials(Vec<(f64, ModeVector)>),
    /// Arbitrary samples; held constant at the step midpoint.
    Sampled(&'f (dyn Fn(f64) -> ModeVector + Sync)),
}

impl Forcing<'_> {
    pub fn sample(&self, t: f64, k: usize) -> ModeVector {
        match self {
            Forcing::Zero => vec![c64::new(0.0, 0.0); k],
            Forcing::Exponentials(terms) => {
                let mut out = vec![c64::new(0.0, 0.0); k];
                for (mu, g) in terms {
                    let e = (I * mu * t).exp();
                    for (o, x) in out.iter_mut().zip(g) {
                        *o += e * x;
                    }
                }
                out
            }
            Forcing::Sampled(f) => f(t),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub snapshots: Vec<ModeVector>,
    pub s_list: Vec<f64>,
    /// `norms[k][i] = ‖u(t_k)‖_{H^{s_list[i]}}`.
    pub norms: Vec<Vec<f64>>,
}

impl TrajectoryRecord {
    fn new(s_list: &[f64]) -> Self {
        Self { times: vec![], snapshots: vec![], s_list: s_list.to_vec(), norms: vec![] }
    }

    fn push(&mut self, op: &DampedOperator, t: f64, u: ModeVector) {
        self.norms.push(self.s_list.iter().map(|&s| hs_norm(op.scale(), &u, s)).collect());
        self.times.push(t);
        self.snapshots.push(u);
    }

    pub fn l2_norms(&self) -> Vec<f64> {
        self.snapshots.iter().map(|u| l2(u)).collect()
    }

    /// Largest increase of `‖u(t_k)‖` between consecutive samples.
    pub fn max_norm_increase(&self) -> f64 {
        self.l2_norms().windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Columns `t`, then `h^s` per requested index.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend(self.s_list.iter().map(|s| format!("h^{s}")));
        out.write_record(&header)?;
        for (t, n) in self.times.iter().zip(&self.norms) {
            let mut row = vec![format!("{t:e}")];
            row.extend(n.iter().map(|v| format!("{v:e}")));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `u(t)` for the homogeneous problem at the given increasing times.
pub fn trajectory(prop: &Propagator<'_>, u0: &[c64], times: &[f64], s_list: &[f64]) -> Result<TrajectoryRecord> {
    prop.check_len(u0)?;
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain("trajectory times must be strictly increasing".into()));
    }
    let mut rec = TrajectoryRecord::new(s_list);
    match &prop.kernel {
        Kernel::Eigen { values, v, v_inv } => {
            let c = v_inv * to_col(u0);
            for &t in times {
                if !(t >= 0.0) {
                    return Err(Error::Domain(format!("negative time {t}")));
                }
                let w = Mat::from_fn(c.nrows(), 1, |r, _| c[(r, 0)] * (I * values[r] * t).exp());
                let u = if t == 0.0 { u0.to_vec() } else { from_col(&(v * w)) };
                rec.push(prop.op, t, u);
            }
        }
        Kernel::Expm => {
            for &t in times {
                rec.push(prop.op, t, prop.propagate(u0, t)?);
            }
        }
    }
    Ok(rec)
}

/// Step size and recording cadence for [`duhamel`].
#[derive(Clone, Debug, PartialEq)]
pub struct DuhamelOptions {
    pub dt: f64,
    /// Keep every `record_every`-th step (the final step is always kept).
    pub record_every: usize,
    pub s_list: Vec<f64>,
}

/// One-step propagation data in whichever coordinates the kernel uses.
struct Stepper<'p> {
    prop: &'p Propagator<'p>,
    dt: f64,
    /// Eigen path: `e^{iτ dt}` and `dt·φ1(iτ dt)` per eigenvalue.
    decay: Vec<c64>,
    hold: Vec<c64>,
    /// Exponential forcing: `(μ, p)` with `p` the one-step response to
    /// `g e^{iμs}`, in state coordinates.
    terms: Vec<(f64, Vec<c64>)>,
    /// Expm path: `e^{iA dt}` and `∫_0^dt e^{iAs} ds`.
    e: Option<Mat<c64>>,
    phi: Option<Mat<c64>>,
}

impl<'p> Stepper<'p> {
    fn new(prop: &'p Propagator<'p>, dt: f64, forcing: &Forcing<'_>) -> Self {
        match &prop.kernel {
            Kernel::Eigen { values, v_inv, .. } => {
                let decay: Vec<c64> = values.iter().map(|&t| (I * t * dt).exp()).collect();
                let hold = values.iter().map(|&t| phi1(I * t * dt) * dt).collect();
                let terms = match forcing {
                    Forcing::Exponentials(terms) => terms
                        .iter()
                        .map(|(mu, g)| {
                            let gw = v_inv * to_col(g);
                            let w = (0..values.len())
                                .map(|r| decay[r] * phi1(I * (mu - values[r]) * dt) * dt * gw[(r, 0)])
                                .collect();
                            (*mu, w)
                        })
                        .collect(),
                    _ => vec![],
                };
                Self { prop, dt, decay, hold, terms, e: None, phi: None }
            }
            Kernel::Expm => {
                let k = prop.op.k();
                let (e, phi) = expm_pair(prop.op, 0.0, dt);
                let terms = match forcing {
                    Forcing::Exponentials(terms) => terms
                        .iter()
                        .map(|(mu, g)| {
                            let (_, phi_mu) = expm_pair(prop.op, *mu, dt);
                            let p = phi_mu * to_col(g);
                            let e_mu = (I * mu * dt).exp();
                            (*mu, (0..k).map(|r| e_mu * p[(r, 0)]).collect())
                        })
                        .collect(),
                    _ => vec![],
                };
                Self { prop, dt, decay: vec![], hold: vec![], terms, e: Some(e), phi: Some(phi) }
            }
        }
    }

    fn to_modes(&self, w: &Mat<c64>) -> ModeVector {
        match &self.prop.kernel {
            Kernel::Eigen { v, .. } => from_col(&(v * w)),
            Kernel::Expm => from_col(w),
        }
    }

    /// `w(t + dt)` from `w(t)`.
    fn step(&self, w: &Mat<c64>, t: f64, forcing: &Forcing<'_>, k: usize) -> Mat<c64> {
        let dt = self.dt;
        match &self.prop.kernel {
            Kernel::Eigen { v_inv, .. } => {
                let mut out = Mat::from_fn(k, 1, |r, _| self.decay[r] * w[(r, 0)]);
                match forcing {
                    Forcing::Zero => {}
                    Forcing::Exponentials(_) => {
                        for (mu, weighted) in &self.terms {
                            let e_mu = (I * mu * t).exp();
                            for r in 0..k {
                                out[(r, 0)] += e_mu * weighted[r];
                            }
                        }
                    }
                    Forcing::Sampled(_) => {
                        let gw = v_inv * to_col(&forcing.sample(t + 0.5 * dt, k));
                        for r in 0..k {
                            out[(r, 0)] += self.hold[r] * gw[(r, 0)];
                        }
                    }
                }
                out
            }
            Kernel::Expm => {
                let (e, phi) = (self.e.as_ref().unwrap(), self.phi.as_ref().unwrap());
                let mut out = e * w;
                match forcing {
                    Forcing::Zero => {}
                    Forcing::Exponentials(_) => {
                        for (mu, p) in &self.terms {
                            let e_mu = (I * mu * t).exp();
                            for r in 0..k {
                                out[(r, 0)] += e_mu * p[r];
                            }
                        }
                    }
                    Forcing::Sampled(_) => out += phi * to_col(&forcing.sample(t + 0.5 * dt, k)),
                }
                out
            }
        }
    }
}

/// `e^{i(A-μ)dt}` and `∫_0^dt e^{i(A-μ)s} ds` from one augmented exponential.
fn expm_pair(op: &DampedOperator, mu: f64, dt: f64) -> (Mat<c64>, Mat<c64>) {
    let k = op.k();
    let aug = Mat::from_fn(2 * k, 2 * k, |r, c| {
        if r < k && c < k {
            let shift = if r == c { mu } else { 0.0 };
            I * (op.a()[(r, c)] - shift) * dt
        } else if r < k && c == r + k {
            c64::new(dt, 0.0)
        } else {
            c64::new(0.0, 0.0)
        }
    });
    let big = expm(&aug);
    (big.as_ref().submatrix(0, 0, k, k).to_owned(), big.as_ref().submatrix(0, k, k, k).to_owned())
}

fn check_dt(op: &DampedOperator, dt: f64) -> Result<()> {
    let top = op.gamma_sq().last().copied().unwrap_or(0.0);
    let limit = if top > 0.0 { CFL / top } else { f64::INFINITY };
    if !(dt > 0.0) || dt > limit {
        return Err(Error::Resolution { dt, limit });
    }
    Ok(())
}

/// `u(t) = ∫_0^t e^{i(t-s)A} f(s) ds` on `[0, horizon]` with an exponential
/// integrator.
pub fn duhamel(
    prop: &Propagator<'_>,
    forcing: &Forcing<'_>,
    horizon: f64,
    opts: &DuhamelOptions,
) -> Result<TrajectoryRecord> {
    let op = prop.op;
    check_dt(op, opts.dt)?;
    let k = op.k();
    let steps = (horizon / opts.dt).round() as usize;
    let every = opts.record_every.max(1);
    let stepper = Stepper::new(prop, opts.dt, forcing);
    let mut rec = TrajectoryRecord::new(&opts.s_list);
    let mut w = Mat::<c64>::zeros(k, 1);
    rec.push(op, 0.0, vec![c64::new(0.0, 0.0); k]);
    for n in 0..steps {
        let t = n as f64 * opts.dt;
        w = stepper.step(&w, t, forcing, k);
        if (n + 1) % every == 0 || n + 1 == steps {
            rec.push(op, (n + 1) as f64 * opts.dt, stepper.to_modes(&w));
        }
    }
    Ok(rec)
}

/// `‖u‖_{L²_T H^{s+1-ε}} / ‖f‖_{L²_T H^s}` for the Duhamel solution, both
/// norms by the trapezoid rule on the step grid. Zero forcing gives 0.
pub fn smoothing_ratio(
    prop: &Propagator<'_>,
    forcing: &Forcing<'_>,
    s: f64,
    eps: f64,
    horizon: f64,
    dt: f64,
) -> Result<f64> {
    let op = prop.op;
    check_dt(op, dt)?;
    if matches!(forcing, Forcing::Zero) {
        return Ok(0.0);
    }
    let k = op.k();
    let steps = (horizon / dt).round() as usize;
    let stepper = Stepper::new(prop, dt, forcing);
    let mut w = Mat::<c64>::zeros(k, 1);
    let s_out = s + 1.0 - eps;
    let f_sq = |t: f64| hs_norm(op.scale(), &forcing.sample(t, k), s).powi(2);
    let (mut num, mut den) = (0.0, 0.5 * f_sq(0.0));
    for n in 0..steps {
        let t = n as f64 * dt;
        w = stepper.step(&w, t, forcing, k);
        let u = stepper.to_modes(&w);
        let weight = if n + 1 == steps { 0.5 } else { 1.0 };
        num += weight * hs_norm(op.scale(), &u, s_out).powi(2);
        den += weight * f_sq((n + 1) as f64 * dt);
    }
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok((num / den).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub alpha_star: f64,
    pub c_star: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Root-mean-square residual of the log fit.
    pub residual: f64,
    pub points: usize,
    /// Set when samples below the round-off floor were dropped.
    pub truncated: bool,
}

/// Relative size below which a norm is treated as round-off.
pub const DECAY_FLOOR: f64 = 1e-13;

/// Least-squares fit of `log‖u(t)‖ ≈ log(c‖u0‖) - αt` over `t ≥ t_min`.
pub fn decay_fit(traj: &TrajectoryRecord, t_min: f64) -> Result<DecayFit> {
    let norms = traj.l2_norms();
    let n0 = *norms.first().ok_or_else(|| Error::Domain("empty trajectory".into()))?;
    if !(n0 > 0.0) {
        return Err(Error::Domain("decay fit of a zero initial datum".into()));
    }
    let mut truncated = false;
    let mut pts = Vec::new();
    for (&t, &n) in traj.times.iter().zip(&norms) {
        if t < t_min {
            continue;
        }
        if n <= DECAY_FLOOR * n0 {
            truncated = true;
            break;
        }
        pts.push((t, n.ln()));
    }
    if pts.len() < 2 {
        return Err(Error::Domain(format!("only {} usable samples in the fit window", pts.len())));
    }
    let m = pts.len() as f64;
    let (st, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t, b + y));
    let (mt, my) = (st / m, sy / m);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (t, y) in &pts {
        sxx += (t - mt) * (t - mt);
        sxy += (t - mt) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mt;
    let residual = (pts.iter().map(|(t, y)| (y - intercept - slope * t).powi(2)).sum::<f64>() / m).sqrt();
    Ok(DecayFit {
        alpha_star: -slope,
        c_star: intercept.exp() / n0,
        t_min: pts[0].0,
        t_max: pts[pts.len() - 1].0,
        residual,
        points: pts.len(),
        truncated,
    })
}

/// `‖U(t)v0‖_{H^k}` for every `(t, k)`; rows follow `times`. `v0` must have
/// unit `H^{s0}` norm.
pub fn smoothness_profile(
    prop: &Propagator<'_>,
    v0: &[c64],
    s0: f64,
    times: &[f64],
    k_list: &[f64],
) -> Result<Vec<Vec<f64>>> {
    prop.check_len(v0)?;
    let n = hs_norm(prop.op.scale(), v0, s0);
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::Domain(format!("initial datum has H^{s0} norm {n}, expected 1")));
    }
    let mut sorted: Vec<f64> = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let rec = trajectory(prop, v0, &sorted, k_list)?;
    Ok(times
        .iter()
        .map(|t| {
            let i = sorted.partition_point(|x| x < t);
            rec.norms[i].clone()
        })
        .collect())
}

/// Coefficients proportional to `γ_j^{-s0-δ}`, scaled to unit `H^{s0}` norm.
pub fn rough_datum(op: &DampedOperator, s0: f64, delta: f64) -> ModeVector {
    let raw: ModeVector = op.scale().gamma().iter().map(|g| c64::new(g.powf(-s0 - delta), 0.0)).collect();
    let n = hs_norm(op.scale(), &raw, s0);
    raw.into_iter().map(|a| a / n).collect()
}

/// Right singular vector of `U(t)` for its largest singular value: the datum
/// that decays slowest up to time `t`.
pub fn worst_case_datum(prop: &Propagator<'_>, t: f64) -> Result<ModeVector> {
    let k = prop.op.k();
    let u = match &prop.kernel {
        Kernel::Eigen { values, v, v_inv } => {
            let scaled = Mat::from_fn(k, k, |r, c| v_inv[(r, c)] * (I * values[r] * t).exp());
            v * scaled
        }
        Kernel::Expm => expm(&prop.op.a().as_ref().map(|&a| I * a * t)),
    };
    let svd = u.svd().map_err(|e| Error::Numeric(format!("svd: {e:?}")))?;
    let v = svd.V();
    Ok((0..k).map(|r| v[(r, 0)]).collect())
}
