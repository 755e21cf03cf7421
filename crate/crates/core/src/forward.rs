//! Direct spectral problem: transfer matrices, zeros of `Θ⁻(ℓ, ·)`, the
//! principal spectral measure and the Weyl function.
//!
//! The system is `J M' = z H M`, i.e. `M' = -z J H M`, `M(0) = I`. On a
//! segment with constant `H` the generator `B = -J H` satisfies
//! `B² = -det H · I`, so `exp(z L B) = cos ω · I + (sin ω / ω) · z L B` with
//! `ω² = z² L² det H`.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::exec;
use crate::farfield;
use crate::mat2::Mat2;
use crate::model::{Atom, Hamiltonian, SpectralMeasure, SymMat2, EPS_DET};
use crate::quadrature::gauss_legendre;
use crate::C64;

/// `M(r, z)` with columns `Θ = (Θ⁺, Θ⁻)` and `Φ = (Φ⁺, Φ⁻)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub entries: Mat2,
    pub r: f64,
    pub z: C64,
}

impl TransferMatrix {
    pub fn theta_plus(&self) -> C64 {
        self.entries.0[0][0]
    }

    pub fn theta_minus(&self) -> C64 {
        self.entries.0[1][0]
    }

    pub fn phi_plus(&self) -> C64 {
        self.entries.0[0][1]
    }

    pub fn phi_minus(&self) -> C64 {
        self.entries.0[1][1]
    }

    /// `E(z) = Θ⁺ + iΘ⁻`.
    pub fn hermite_biehler(&self) -> C64 {
        self.theta_plus() + C64::i() * self.theta_minus()
    }

    pub fn det(&self) -> C64 {
        self.entries.det()
    }
}

/// `Θ(r, z)` and `∂_z Θ(r, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theta {
    pub plus: C64,
    pub minus: C64,
    pub dplus: C64,
    pub dminus: C64,
}

static DET_ABS: AtomicU64 = AtomicU64::new(0);
static DET_REL: AtomicU64 = AtomicU64::new(0);

/// Largest determinant defects seen by [`propagate`] and
/// [`propagate_with_derivative`] since the last reset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetMonitor {
    /// `max |det M - 1|`.
    pub max_abs: f64,
    /// `max |det M - 1| / (1 + |M|²)`.
    pub max_rel: f64,
}

pub fn det_monitor() -> DetMonitor {
    DetMonitor {
        max_abs: f64::from_bits(DET_ABS.load(Ordering::Relaxed)),
        max_rel: f64::from_bits(DET_REL.load(Ordering::Relaxed)),
    }
}

pub fn reset_det_monitor() {
    DET_ABS.store(0, Ordering::Relaxed);
    DET_REL.store(0, Ordering::Relaxed);
}

fn record_det(m: &Mat2) -> Result<()> {
    let defect = (m.det() - 1.0).norm();
    let n = m.norm();
    let rel = defect / (1.0 + n * n);
    // Nonnegative floats order like their bit patterns.
    DET_ABS.fetch_max(defect.to_bits(), Ordering::Relaxed);
    DET_REL.fetch_max(rel.to_bits(), Ordering::Relaxed);
    if !(rel <= EPS_DET) {
        return Err(Error::Invariant(format!("det M - 1 = {defect:e} at |M| = {n:e}")));
    }
    Ok(())
}

/// `(cos ω, sin ω / ω)` from `ω²`.
fn cos_sinc(omega2: C64) -> (C64, C64) {
    if omega2.norm() < 1e-6 {
        let w2 = omega2;
        let w4 = w2 * w2;
        (1.0 - w2 / 2.0 + w4 / 24.0 - w4 * w2 / 720.0, 1.0 - w2 / 6.0 + w4 / 120.0 - w4 * w2 / 5040.0)
    } else {
        let w = omega2.sqrt();
        (w.cos(), w.sin() / w)
    }
}

/// `B = -J H`.
fn generator(h: &SymMat2) -> Mat2 {
    Mat2::from_real([[h.h12, h.h22], [-h.h11, -h.h12]])
}

/// `exp(z L B)` for one segment.
pub fn segment_exp(h: &SymMat2, len: f64, z: C64) -> Mat2 {
    let zl = z * len;
    let (c, sc) = cos_sinc(zl * zl * h.det());
    let a = generator(h).scale(zl * sc);
    a + Mat2::identity().scale(c)
}

fn check_r(h: &Hamiltonian, r: f64) -> Result<f64> {
    let ell = h.ell();
    let slack = 1e-12 * ell.max(1.0);
    if !(r >= -slack && r <= ell + slack) {
        return Err(Error::OutOfRange { r, ell });
    }
    Ok(r.clamp(0.0, ell))
}

fn pieces(h: &Hamiltonian, r: f64) -> impl Iterator<Item = (&SymMat2, f64)> {
    h.segments()
        .iter()
        .take_while(move |s| s.r0 < r)
        .map(move |s| (&s.h, s.r1.min(r) - s.r0))
}

fn propagate_raw(h: &Hamiltonian, r: f64, z: C64) -> Mat2 {
    pieces(h, r).fold(Mat2::identity(), |m, (hs, len)| segment_exp(hs, len, z) * m)
}

/// Transfer matrix `M(r, z)`.
pub fn propagate(h: &Hamiltonian, r: f64, z: C64) -> Result<TransferMatrix> {
    let r = check_r(h, r)?;
    let m = propagate_raw(h, r, z);
    record_det(&m)?;
    Ok(TransferMatrix { entries: m, r, z })
}

/// `M(r, z)` and `∂_z M(r, z)`, propagated jointly.
pub fn propagate_with_derivative(h: &Hamiltonian, r: f64, z: C64) -> Result<(Mat2, Mat2)> {
    let r = check_r(h, r)?;
    let mut m = Mat2::identity();
    let mut dm = Mat2::zero();
    for (hs, len) in pieces(h, r) {
        let e = segment_exp(hs, len, z);
        let de = generator(hs).scale(C64::new(len, 0.0)) * e;
        dm = de * m + e * dm;
        m = e * m;
    }
    record_det(&m)?;
    Ok((m, dm))
}

/// `M(r, z) = exp(log_scale) · scaled`, rescaled whenever `|M| > 1e100`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledMatrix {
    pub scaled: Mat2,
    pub log_scale: f64,
}

impl ScaledMatrix {
    pub fn norm(&self) -> f64 {
        self.scaled.norm() * self.log_scale.exp()
    }

    pub fn log_norm(&self) -> f64 {
        self.scaled.norm().ln() + self.log_scale
    }
}

/// Overflow-guarded product of the segment exponentials up to `r`.
pub fn propagate_scaled(h: &Hamiltonian, r: f64, z: C64) -> Result<ScaledMatrix> {
    let r = check_r(h, r)?;
    let mut m = Mat2::identity();
    let mut log_scale = 0.0;
    for (hs, len) in pieces(h, r) {
        m = segment_exp(hs, len, z) * m;
        let n = m.norm();
        if n > 1e100 {
            m = m.scale(C64::new(1.0 / n, 0.0));
            log_scale += n.ln();
        }
    }
    if log_scale == 0.0 {
        record_det(&m)?;
    }
    Ok(ScaledMatrix { scaled: m, log_scale })
}

pub fn theta_and_derivative(h: &Hamiltonian, r: f64, z: C64) -> Result<Theta> {
    let (m, dm) = propagate_with_derivative(h, r, z)?;
    Ok(Theta { plus: m.0[0][0], minus: m.0[1][0], dplus: dm.0[0][0], dminus: dm.0[1][0] })
}

/// Krein's exponential type `∫_0^r √det H`.
pub fn exponential_type(h: &Hamiltonian, r: f64) -> f64 {
    let r = r.clamp(0.0, h.ell());
    pieces(h, r).map(|(hs, len)| hs.det().max(0.0).sqrt() * len).sum()
}

fn theta_minus_real(h: &Hamiltonian, x: f64) -> f64 {
    propagate_raw(h, h.ell(), C64::new(x, 0.0)).0[1][0].re
}

/// Newton iteration safeguarded by the bracket `[lo, hi]` with
/// `f(lo) · f(hi) < 0`.
fn refine_root(h: &Hamiltonian, mut lo: f64, mut hi: f64, flo: f64) -> Result<f64> {
    for _ in 0..8 {
        let mid = 0.5 * (lo + hi);
        let fm = theta_minus_real(h, mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..100 {
        let (m, dm) = propagate_with_derivative(h, h.ell(), C64::new(x, 0.0))?;
        let f = m.0[1][0].re;
        let df = dm.0[1][0].re;
        if f == 0.0 {
            return Ok(x);
        }
        if (f < 0.0) == (flo < 0.0) {
            lo = x;
        } else {
            hi = x;
        }
        let tol = 1e-13 * x.abs().max(1.0);
        if (f / df).abs() <= 0.5 * tol {
            return Ok(x - f / df);
        }
        let mut next = x - f / df;
        if !(next > lo && next < hi) {
            // Overshoot lands on the nearer endpoint first; the root may sit
            // within rounding of it.
            let edge = if next >= hi { hi } else { lo };
            next = if edge != x && next.is_finite() { edge } else { 0.5 * (lo + hi) };
        }
        let done = (next - x).abs() <= tol;
        x = next;
        if done {
            return Ok(x);
        }
    }
    Err(Error::numerical("find_zeros", format!("no convergence near {x}")))
}

fn scan(h: &Hamiltonian, lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    let j0 = (lo / step).floor() as i64;
    let j1 = (hi / step).ceil() as i64;
    let xs: Vec<f64> = (j0..=j1).map(|j| j as f64 * step).collect();
    let fs = exec::map_slice(&xs, |&x| theta_minus_real(h, x));
    let mut exact = Vec::new();
    let mut brackets = Vec::new();
    for i in 0..xs.len() {
        if fs[i] == 0.0 {
            exact.push(xs[i]);
        } else if i + 1 < xs.len() && fs[i + 1] != 0.0 && (fs[i] < 0.0) != (fs[i + 1] < 0.0) {
            brackets.push((xs[i], xs[i + 1], fs[i]));
        }
    }
    let refined = exec::map_slice(&brackets, |&(a, b, fa)| refine_root(h, a, b, fa));
    let mut zeros = exact;
    for r in refined {
        zeros.push(r?);
    }
    zeros.retain(|&x| x >= lo && x <= hi);
    zeros.sort_by(f64::total_cmp);
    Ok(zeros)
}

fn dedup(zeros: &mut Vec<f64>) {
    zeros.sort_by(f64::total_cmp);
    zeros.dedup_by(|b, a| (*b - *a).abs() <= 1e-10 * (1.0 + a.abs()));
}

/// Zeros of `x ↦ Θ⁻(ℓ, x)` in `[-window, window]`, ascending. Always contains 0.
pub fn find_zeros(h: &Hamiltonian, window: f64, step: f64) -> Result<Vec<f64>> {
    let ty = exponential_type(h, h.ell());
    if !(ty > 0.0) {
        return Err(Error::Invalid("Hamiltonian has zero exponential type".into()));
    }
    let limit = PI / (2.0 * ty);
    if !(step > 0.0 && step <= limit) {
        return Err(Error::StepTooCoarse { step, limit });
    }
    let mut zeros = scan(h, -window, window, step)?;
    let gap = 1.5 * PI / ty;
    let wide: Vec<(f64, f64)> =
        zeros.windows(2).filter(|w| w[1] - w[0] > gap).map(|w| (w[0], w[1])).collect();
    for (a, b) in wide {
        log::warn!("zero gap {:.3e} on [{a}, {b}] exceeds 1.5π/type, rescanning", b - a);
        zeros.extend(scan(h, a, b, step / 8.0)?);
    }
    zeros.push(0.0);
    dedup(&mut zeros);
    Ok(zeros)
}

/// Scan step used by [`spectral_measure`].
pub fn default_scan_step(h: &Hamiltonian) -> f64 {
    let ty = exponential_type(h, h.ell());
    (PI / (8.0 * ty)).min(0.1)
}

/// Principal spectral measure restricted to `[-window, window]`, with the
/// Herglotz constants of the Weyl function.
pub fn spectral_measure(h: &Hamiltonian, window: f64) -> Result<SpectralMeasure> {
    spectral_measure_with_step(h, window, default_scan_step(h))
}

pub fn spectral_measure_with_step(h: &Hamiltonian, window: f64, step: f64) -> Result<SpectralMeasure> {
    if !h.is_compatible() {
        return Err(Error::Invalid(
            "leading or trailing segment is a multiple of diag(0, 1)".into(),
        ));
    }
    let zeros = find_zeros(h, window, step)?;
    let masses = exec::map_slice(&zeros, |&t| -> Result<f64> {
        let th = theta_and_derivative(h, h.ell(), C64::new(t, 0.0))?;
        Ok(-PI / (th.plus.re * th.dminus.re))
    });
    let mut atoms = Vec::with_capacity(zeros.len());
    for (&t, mass) in zeros.iter().zip(masses) {
        let mass = mass?;
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::numerical("spectral_measure", format!("mass {mass} at t = {t}")));
        }
        atoms.push(Atom { t, mass });
    }
    let mu = SpectralMeasure::new(atoms, window, 0.0, 0.0)?;
    let hc = herglotz_constants(h, &mu)?;
    Ok(mu.with_herglotz(hc.b, hc.c))
}

/// `m(z) = Φ⁻(ℓ, z) / Θ⁻(ℓ, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylValue {
    pub z: C64,
    pub m: C64,
}

pub fn weyl_function(h: &Hamiltonian, z: C64) -> Result<WeylValue> {
    if !(z.im > 0.0) {
        return Err(Error::Invalid(format!("Weyl function needs Im z > 0, got {z}")));
    }
    let tm = propagate(h, h.ell(), z)?;
    let den = tm.theta_minus();
    if den == C64::new(0.0, 0.0) {
        return Err(Error::numerical("weyl_function", format!("Θ⁻ vanishes at {z}")));
    }
    let m = tm.phi_minus() / den;
    if !(m.im > 0.0) {
        return Err(Error::Invariant(format!("Im m({z}) = {} is not positive", m.im)));
    }
    Ok(WeylValue { z, m })
}

/// Herglotz constants of `m` with the far-field correction used for `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Herglotz {
    pub b: f64,
    pub c: f64,
    /// Estimated `(1/π) Σ mass / (1 + t²)` over atoms beyond the window.
    pub tail: f64,
}

pub const TOL_B: f64 = 1e-6;

/// `c = Re m(i)`, `b = Im m(i) - (1/π) Σ mass / (1 + t²)`.
pub fn herglotz_constants(h: &Hamiltonian, mu: &SpectralMeasure) -> Result<Herglotz> {
    let m = weyl_function(h, C64::i())?.m;
    let sum: f64 = mu.atoms().iter().map(|a| a.mass / (1.0 + a.t * a.t)).sum::<f64>() / PI;
    let tail: f64 = farfield::estimate(mu.atoms())
        .iter()
        .flatten()
        .map(|l| {
            // Midpoint rule plus the first Euler–Maclaurin correction.
            let a = l.edge + 0.5 * l.spacing;
            let fprime = -2.0 * a * l.mass / (1.0 + a * a).powi(2);
            l.lorentz_tail() + l.spacing / 24.0 * fprime
        })
        .sum::<f64>()
        / PI;
    let b = m.im - sum - tail;
    if b < -(TOL_B + tail) {
        return Err(Error::numerical(
            "herglotz_constants",
            format!("b = {b:e} is negative beyond the tail estimate {tail:e}; window too small"),
        ));
    }
    Ok(Herglotz { b, c: m.re, tail })
}

/// Reproducing kernel `k_w^r(z)` of the de Branges space of `E_r`:
/// `(Θ⁺(z) Θ⁻(w̄) - Θ⁻(z) Θ⁺(w̄)) / (π (z - w̄))`.
pub fn kernel(h: &Hamiltonian, r: f64, w: C64, z: C64) -> Result<C64> {
    let wb = w.conj();
    let tw = propagate(h, r, wb)?;
    let d = z - wb;
    if d.norm() < 1e-7 * (1.0 + z.norm()) {
        let th = theta_and_derivative(h, r, z)?;
        return Ok((th.dplus * tw.theta_minus() - th.dminus * tw.theta_plus()) / PI);
    }
    let tz = propagate(h, r, z)?;
    Ok((tz.theta_plus() * tw.theta_minus() - tz.theta_minus() * tw.theta_plus()) / (PI * d))
}

/// `(1/√π) ∫_0^r ⟨H(t) X(t), Θ(t, z̄)⟩ dt`, Gauss–Legendre of order 8 on
/// every segment.
pub fn weyl_titchmarsh<F>(h: &Hamiltonian, r: f64, x: F, z: C64) -> Result<C64>
where
    F: Fn(f64) -> [C64; 2],
{
    let r = check_r(h, r)?;
    let (nodes, weights) = gauss_legendre(8);
    let zb = z.conj();
    let mut m0 = Mat2::identity();
    let mut acc = C64::new(0.0, 0.0);
    for seg in h.segments().iter().take_while(|s| s.r0 < r) {
        let hs = &seg.h;
        let len = seg.r1.min(r) - seg.r0;
        for (&u, &wq) in nodes.iter().zip(&weights) {
            let dt = 0.5 * len * (u + 1.0);
            let th = (segment_exp(hs, dt, zb) * m0).col(0);
            let xv = x(seg.r0 + dt);
            let hx = [hs.h11 * xv[0] + hs.h12 * xv[1], hs.h12 * xv[0] + hs.h22 * xv[1]];
            acc += (hx[0] * th[0].conj() + hx[1] * th[1].conj()) * (0.5 * len * wq);
        }
        m0 = segment_exp(hs, len, zb) * m0;
    }
    record_det(&m0)?;
    Ok(acc / PI.sqrt())
}
