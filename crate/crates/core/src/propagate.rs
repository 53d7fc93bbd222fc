//! Time evolution: Lanczos propagation of `e^{−iHt}`, the symmetrized
//! Trotter cycle and single-spin rotations.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    build_ising, field_diagonal, CouplingMatrix, FieldProfile, LinearOperator, SparseOperator,
};
use crate::spinspace::{self, StateVector, C64};

/// Largest accepted drift of `‖ψ‖` before renormalization is refused.
pub const NORM_DRIFT_GUARD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KrylovSettings {
    pub subspace_dim: usize,
    pub tolerance: f64,
    /// Largest substep in units of `1/J₀`.
    pub max_substep: f64,
}

impl Default for KrylovSettings {
    fn default() -> Self {
        Self {
            subspace_dim: 30,
            tolerance: 1e-10,
            max_substep: 0.1,
        }
    }
}

impl KrylovSettings {
    pub fn validate(&self) -> Result<()> {
        if self.subspace_dim < 2 {
            return Err(Error::InvalidParameter(format!(
                "Krylov subspace dimension {} below 2",
                self.subspace_dim
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Krylov tolerance {} must be positive",
                self.tolerance
            )));
        }
        if !(self.max_substep > 0.0) || !self.max_substep.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "max substep {} must be positive",
                self.max_substep
            )));
        }
        Ok(())
    }
}

/// Bookkeeping from one propagation call.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KrylovStats {
    pub substeps: usize,
    pub applications: usize,
    pub error_estimate: f64,
    pub norm_drift: f64,
}

/// `e^{−iHt} ψ`.
pub fn krylov_evolve<H: LinearOperator + ?Sized>(
    h: &H,
    psi: &StateVector,
    t: f64,
    settings: &KrylovSettings,
) -> Result<StateVector> {
    let mut out = psi.clone();
    krylov_evolve_in_place(h, out.amplitudes_mut(), t, settings)?;
    Ok(out)
}

/// In-place `v ← e^{−iHt} v` for a vector of any dimension matching `h`.
pub fn krylov_evolve_in_place<H: LinearOperator + ?Sized>(
    h: &H,
    v: &mut [C64],
    t: f64,
    settings: &KrylovSettings,
) -> Result<KrylovStats> {
    settings.validate()?;
    if v.len() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: v.len(),
        });
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "evolution time {t} must be finite and ≥ 0"
        )));
    }
    let mut stats = KrylovStats::default();
    let norm0 = spinspace::norm(v);
    if t == 0.0 || norm0 == 0.0 {
        return Ok(stats);
    }
    let min_step = settings.max_substep * f64::EPSILON.sqrt() * 1e-3;
    let mut lanczos = Lanczos::new(v.len(), settings.subspace_dim);
    let mut elapsed = 0.0;
    let mut step = settings.max_substep;
    while elapsed < t {
        let remaining = t - elapsed;
        let dt = step.min(remaining);
        let Some((taken, err)) =
            lanczos.step(h, v, dt, settings.tolerance, min_step, &mut stats)?
        else {
            return Err(Error::Numerical(format!(
                "Krylov propagation did not converge with m = {} above step {min_step:e}",
                settings.subspace_dim
            )));
        };
        stats.error_estimate += err;
        stats.substeps += 1;
        elapsed = if taken == remaining {
            t
        } else {
            elapsed + taken
        };
        step = (taken * 2.0).min(settings.max_substep);
    }
    let norm1 = spinspace::norm(v);
    let drift = (norm1 / norm0 - 1.0).abs();
    stats.norm_drift = drift;
    if drift > NORM_DRIFT_GUARD {
        return Err(Error::Numerical(format!(
            "norm drift {drift:e} exceeds guard {NORM_DRIFT_GUARD:e}"
        )));
    }
    let scale = norm0 / norm1;
    v.iter_mut().for_each(|a| *a *= scale);
    Ok(stats)
}

/// Workspace for one Lanczos substep.
struct Lanczos {
    basis: Vec<Vec<C64>>,
    work: Vec<C64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl Lanczos {
    fn new(dim: usize, m: usize) -> Self {
        Self {
            basis: (0..m).map(|_| vec![C64::new(0.0, 0.0); dim]).collect(),
            work: vec![C64::new(0.0, 0.0); dim],
            alpha: Vec::with_capacity(m),
            beta: Vec::with_capacity(m),
        }
    }

    /// Advances `v` by `dt`, or by `dt / 2^k` on the same basis when the
    /// full subspace is not accurate enough. Returns `(step taken, error
    /// estimate)`, or `None` once the step would fall below `min_step`.
    fn step<H: LinearOperator + ?Sized>(
        &mut self,
        h: &H,
        v: &mut [C64],
        mut dt: f64,
        tol: f64,
        min_step: f64,
        stats: &mut KrylovStats,
    ) -> Result<Option<(f64, f64)>> {
        let m = self.basis.len();
        let beta0 = spinspace::norm(v);
        let inv = 1.0 / beta0;
        for (q, x) in self.basis[0].iter_mut().zip(v.iter()) {
            *q = x * inv;
        }
        self.alpha.clear();
        self.beta.clear();
        let mut residual = 0.0;
        let mut accepted: Option<(Vec<C64>, f64)> = None;
        for j in 0..m {
            h.apply_into(&self.basis[j], &mut self.work);
            stats.applications += 1;
            let a = spinspace::inner(&self.basis[j], &self.work).re;
            self.alpha.push(a);
            for (w, q) in self.work.iter_mut().zip(&self.basis[j]) {
                *w -= q * a;
            }
            if j > 0 {
                let b = self.beta[j - 1];
                for (w, q) in self.work.iter_mut().zip(&self.basis[j - 1]) {
                    *w -= q * b;
                }
            }
            for q in &self.basis[..=j] {
                let c = spinspace::inner(q, &self.work);
                for (w, qi) in self.work.iter_mut().zip(q) {
                    *w -= qi * c;
                }
            }
            let b = spinspace::norm(&self.work);
            let scale = a.abs() + self.beta.last().copied().unwrap_or(0.0) + 1.0;
            residual = if b <= 1e-13 * scale { 0.0 } else { b };
            let coeffs = tridiagonal_exp(&self.alpha, &self.beta, dt)?;
            let err = residual * coeffs[j].norm();
            if err <= tol {
                accepted = Some((coeffs, err));
                break;
            }
            if j + 1 == m {
                break;
            }
            self.beta.push(b);
            let inv = 1.0 / b;
            for (q, w) in self.basis[j + 1].iter_mut().zip(&self.work) {
                *q = w * inv;
            }
        }
        while accepted.is_none() {
            dt *= 0.5;
            if dt < min_step {
                return Ok(None);
            }
            let coeffs = tridiagonal_exp(&self.alpha, &self.beta, dt)?;
            let err = residual * coeffs[m - 1].norm();
            if err <= tol {
                accepted = Some((coeffs, err));
            }
        }
        let (coeffs, err) = accepted.expect("loop exits with a value");
        v.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
        for (c, q) in coeffs.iter().zip(&self.basis) {
            let c = c * beta0;
            for (x, qi) in v.iter_mut().zip(q) {
                *x += qi * c;
            }
        }
        Ok(Some((dt, err)))
    }
}

/// `exp(−i T dt) e₁` for the symmetric tridiagonal `T` with diagonal `alpha`
/// and off-diagonal `beta` (`beta.len() ≥ alpha.len() − 1`).
fn tridiagonal_exp(alpha: &[f64], beta: &[f64], dt: f64) -> Result<Vec<C64>> {
    let k = alpha.len();
    if k == 1 {
        return Ok(vec![C64::from_polar(1.0, -alpha[0] * dt)]);
    }
    let t = Mat::<f64>::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i == j + 1 {
            beta[j]
        } else if j == i + 1 {
            beta[i]
        } else {
            0.0
        }
    });
    let evd = t
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("tridiagonal eigensolver failed: {e:?}")))?;
    let u = evd.U();
    let s = evd.S().column_vector();
    Ok((0..k)
        .map(|i| {
            (0..k)
                .map(|p| C64::from_polar(u[(0, p)] * u[(i, p)], -s[p] * dt))
                .sum()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrotterSettings {
    /// Ising + bias segment, `1/J₀` units.
    pub dt1: f64,
    /// Local-field segment, `1/J₀` units.
    pub dt2: f64,
    pub cycles: usize,
}

impl TrotterSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt1 > 0.0 && self.dt2 > 0.0) || !(self.dt1 + self.dt2).is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Trotter durations dt1 = {}, dt2 = {} must be positive",
                self.dt1, self.dt2
            )));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        self.dt1 + self.dt2
    }

    /// Coupling and local-field duty weights `dt1/T`, `dt2/T`.
    pub fn weights(&self) -> (f64, f64) {
        let t = self.period();
        (self.dt1 / t, self.dt2 / t)
    }
}

/// Instantaneous couplings and local field that average to the given ones.
pub fn instantaneous_parameters(
    c_avg: &CouplingMatrix,
    f_local_avg: &FieldProfile,
    settings: &TrotterSettings,
) -> Result<(CouplingMatrix, FieldProfile)> {
    settings.validate()?;
    let (w1, w2) = settings.weights();
    Ok((c_avg.scaled(1.0 / w1), f_local_avg.scaled(1.0 / w2)))
}

/// `(dt1/T) H_J + Σ_j (bz0 + (dt2/T) f_j) σᶻ_j` generated by one cycle.
pub fn averaged_hamiltonian(
    c: &CouplingMatrix,
    f_local: &FieldProfile,
    bz0: f64,
    settings: &TrotterSettings,
) -> Result<SparseOperator> {
    settings.validate()?;
    let (w1, w2) = settings.weights();
    build_ising(&c.scaled(w1), &f_local.scaled(w2).shifted(bz0))
}

/// One symmetrized cycle: half local-field phase, Ising + bias for `dt1`,
/// half local-field phase. The bias acts in every segment.
#[derive(Debug, Clone)]
pub struct TrotterCycle {
    h1: SparseOperator,
    half_phase: Vec<C64>,
    settings: TrotterSettings,
    krylov: KrylovSettings,
}

impl TrotterCycle {
    pub fn new(
        c: &CouplingMatrix,
        f_local: &FieldProfile,
        bz0: f64,
        settings: TrotterSettings,
        krylov: KrylovSettings,
    ) -> Result<Self> {
        settings.validate()?;
        krylov.validate()?;
        let n = c.n();
        let h1 = build_ising(c, &FieldProfile::uniform(n, bz0)?)?;
        let tau = settings.dt2 / 2.0;
        let half_phase = field_diagonal(&f_local.shifted(bz0))
            .into_iter()
            .map(|e| C64::from_polar(1.0, -e * tau))
            .collect();
        Ok(Self {
            h1,
            half_phase,
            settings,
            krylov,
        })
    }

    pub fn settings(&self) -> &TrotterSettings {
        &self.settings
    }

    pub fn period(&self) -> f64 {
        self.settings.period()
    }

    pub fn apply_in_place(&self, v: &mut [C64]) -> Result<()> {
        if v.len() != self.half_phase.len() {
            return Err(Error::DimensionMismatch {
                expected: self.half_phase.len(),
                found: v.len(),
            });
        }
        v.iter_mut()
            .zip(&self.half_phase)
            .for_each(|(a, p)| *a *= p);
        krylov_evolve_in_place(&self.h1, v, self.settings.dt1, &self.krylov)?;
        v.iter_mut()
            .zip(&self.half_phase)
            .for_each(|(a, p)| *a *= p);
        Ok(())
    }

    pub fn evolve(&self, psi: &StateVector, cycles: usize) -> Result<StateVector> {
        let mut out = psi.clone();
        for _ in 0..cycles {
            self.apply_in_place(out.amplitudes_mut())?;
        }
        Ok(out)
    }

    /// Applies `settings.cycles` cycles.
    pub fn run(&self, psi: &StateVector) -> Result<StateVector> {
        self.evolve(psi, self.settings.cycles)
    }
}

pub fn trotter_cycle(
    c: &CouplingMatrix,
    f_local: &FieldProfile,
    bz0: f64,
    settings: TrotterSettings,
    krylov: KrylovSettings,
) -> Result<TrotterCycle> {
    TrotterCycle::new(c, f_local, bz0, settings, krylov)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// `exp(−iθσ/2)` as a 2×2 matrix in the `(up, down)` basis.
fn rotation_matrix(axis: Axis, angle: f64) -> [[C64; 2]; 2] {
    let c = (angle / 2.0).cos();
    let s = (angle / 2.0).sin();
    let re = |x: f64| C64::new(x, 0.0);
    match axis {
        Axis::X => [[re(c), C64::new(0.0, -s)], [C64::new(0.0, -s), re(c)]],
        Axis::Y => [[re(c), re(-s)], [re(s), re(c)]],
        Axis::Z => [
            [C64::from_polar(1.0, -angle / 2.0), re(0.0)],
            [re(0.0), C64::from_polar(1.0, angle / 2.0)],
        ],
    }
}

pub fn rotate_site_in_place(
    v: &mut [C64],
    n: usize,
    site: usize,
    axis: Axis,
    angle: f64,
) -> Result<()> {
    if site == 0 || site > n {
        return Err(Error::InvalidSite { site, n });
    }
    if v.len() != 1 << n {
        return Err(Error::DimensionMismatch {
            expected: 1 << n,
            found: v.len(),
        });
    }
    let u = rotation_matrix(axis, angle);
    let bit = 1usize << (site - 1);
    for b in 0..v.len() {
        if b & bit == 0 {
            let down = v[b];
            let up = v[b | bit];
            v[b | bit] = u[0][0] * up + u[0][1] * down;
            v[b] = u[1][0] * up + u[1][1] * down;
        }
    }
    Ok(())
}

/// `exp(−iθ σ^axis_site / 2) ψ`.
pub fn rotate_site(psi: &StateVector, site: usize, axis: Axis, angle: f64) -> Result<StateVector> {
    let mut out = psi.clone();
    let n = out.n_sites();
    rotate_site_in_place(out.amplitudes_mut(), n, site, axis, angle)?;
    Ok(out)
}

/// Same rotation applied to every site.
pub fn rotate_global(psi: &StateVector, axis: Axis, angle: f64) -> Result<StateVector> {
    let mut out = psi.clone();
    let n = out.n_sites();
    for site in 1..=n {
        rotate_site_in_place(out.amplitudes_mut(), n, site, axis, angle)?;
    }
    Ok(out)
}
