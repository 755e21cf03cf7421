//! Fixtures and identity suites tying the forward and inverse directions
//! together, plus two explicit examples: a Hamiltonian whose de Branges space
//! is not a Paley–Wiener space, and the diagonal necessary condition.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::forward;
use crate::inverse;
use crate::model::{
    normalize_trace, Atom, Diagnostics, GridConfig, Hamiltonian, ReconstructionResult, SpectralMeasure, SymMat2,
};
use crate::pwspace::{self, PWBasis};
use crate::quadrature::{gauss_legendre, integration_matrix};
use crate::C64;

/// `H = I` on `[0, ell]` with its measure in closed form: atoms `πk/ell`,
/// masses `π/ell`, `c = 0`.
pub fn free_fixture(ell: f64, window: f64) -> Result<(Hamiltonian, SpectralMeasure, f64)> {
    let h = Hamiltonian::free(ell)?;
    let k = (window * ell / PI + 1e-9).floor() as i64;
    let atoms = (-k..=k).map(|j| Atom { t: PI * j as f64 / ell, mass: PI / ell }).collect();
    Ok((h, SpectralMeasure::new(atoms, window, 0.0, 0.0)?, 0.0))
}

/// Two segments of length `len` each: `diag(q, 1/q)` then `diag(1/q, q)`.
pub fn step_fixture(q: f64, len: f64) -> Result<Hamiltonian> {
    Hamiltonian::from_pieces(&[(len, SymMat2::diag(q, 1.0 / q)), (len, SymMat2::diag(1.0 / q, q))])
}

/// Comparison of a reconstruction against the trace-normalized input.
#[derive(Debug, Clone, Serialize)]
pub struct RoundTripReport {
    pub ell_true: f64,
    pub ell_reconstructed: f64,
    /// Per entry `h11, h12, h22`, over cell midpoints in `[0.02ℓ, 0.98ℓ]`.
    pub sup_error: [f64; 3],
    pub l1_error: [f64; 3],
    /// `Σ L¹ errors / Σ L¹ norms`.
    pub relative_l1: f64,
    pub herglotz_b: f64,
    pub herglotz_c: f64,
    pub atoms: usize,
    pub diagnostics: Diagnostics,
    #[serde(skip)]
    pub result: ReconstructionResult,
}

/// Config with `a` the exponential type of `h`.
pub fn config_for(h: &Hamiltonian, n: usize, window: f64, s_samples: usize, r_samples: usize) -> Result<GridConfig> {
    GridConfig::with_samples(forward::exponential_type(h, h.ell()), n, window, s_samples, r_samples)
}

/// normalize → measure → Herglotz constants → reconstruct → compare.
pub fn roundtrip(h: &Hamiltonian, cfg: &GridConfig) -> Result<RoundTripReport> {
    let (hn, _) = normalize_trace(h)?;
    let mu = forward::spectral_measure(&hn, cfg.measure_window)?;
    let result = inverse::reconstruct(&mu, mu.herglotz_c, cfg)?;
    Ok(compare(&hn, mu, result))
}

/// Errors of `result` against the trace-normalized `hn`.
pub fn compare(hn: &Hamiltonian, mu: SpectralMeasure, result: ReconstructionResult) -> RoundTripReport {
    let ell = result.hamiltonian.ell();
    let mut sup = [0.0f64; 3];
    let mut l1 = [0.0f64; 3];
    let mut norm = 0.0;
    for seg in result.hamiltonian.segments() {
        let mid = 0.5 * (seg.r0 + seg.r1);
        let e = hn.at(mid.min(hn.ell()));
        let got = [seg.h.h11, seg.h.h12, seg.h.h22];
        let want = [e.h11, e.h12, e.h22];
        for i in 0..3 {
            let d = (got[i] - want[i]).abs();
            l1[i] += d * seg.len();
            if mid >= 0.02 * ell && mid <= 0.98 * ell {
                sup[i] = sup[i].max(d);
            }
            norm += want[i].abs() * seg.len();
        }
    }
    RoundTripReport {
        ell_true: hn.ell(),
        ell_reconstructed: ell,
        sup_error: sup,
        l1_error: l1,
        relative_l1: l1.iter().sum::<f64>() / norm,
        herglotz_b: mu.herglotz_b,
        herglotz_c: mu.herglotz_c,
        atoms: mu.len(),
        diagnostics: result.diagnostics.clone(),
        result,
    }
}

/// `ξ(s)`: the `r` at which `∫_0^r √det H = s`.
pub fn xi(h: &Hamiltonian, s: f64) -> Result<f64> {
    let mut acc = 0.0;
    for seg in h.segments() {
        let rate = seg.h.det().max(0.0).sqrt();
        let next = acc + rate * seg.len();
        if s <= next && rate > 0.0 {
            return Ok((seg.r0 + (s - acc) / rate).min(seg.r1));
        }
        acc = next;
    }
    if (s - acc).abs() <= 1e-12 * acc.max(1.0) {
        return Ok(h.ell());
    }
    Err(Error::Invalid(format!("s = {s} exceeds the exponential type {acc}")))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct KernelResidual {
    pub s: f64,
    pub w_re: f64,
    pub w_im: f64,
    pub xi: f64,
    /// `max |T⁻¹ sinc_s(· - w̄) - k_w| / max |k_w|` on the test grid.
    pub residual: f64,
}

/// Compares `T_{μ,s}⁻¹ sinc_s(· - w̄)` with the de Branges kernel `k_w^{ξ(s)}`
/// on 50 points of `[-10, 10]`. The inverse is evaluated as
/// `g + (T⁻¹ - I) g` so only the correction is truncated.
pub fn kernel_identity_check(h: &Hamiltonian, mu: &SpectralMeasure, s: f64, w: C64, n: usize) -> Result<KernelResidual> {
    let r = xi(h, s)?;
    let op = pwspace::build_operator(mu, s, n)?;
    let basis: &PWBasis = &op.basis;
    let (re, im) = basis.kernel_coeffs(w.conj());
    let (ure, _) = op.apply_inverse(&re);
    let (uim, _) = op.apply_inverse(&im);
    let dre: DVector<f64> = ure - &re;
    let dim: DVector<f64> = uim - &im;
    let wb = w.conj();
    let xs: Vec<f64> = (0..50).map(|i| -10.0 + 20.0 * i as f64 / 49.0).collect();
    let pairs = exec::map_slice(&xs, |&x| -> Result<(f64, f64)> {
        let u = C64::new(x, 0.0) - wb;
        let g = if (u * s).norm() < 1e-8 { C64::new(s / PI, 0.0) } else { (u * s).sin() / (u * PI) };
        let v = basis.values_at(x);
        let approx = g + C64::new(v.dot(&dre), v.dot(&dim));
        let exact = forward::kernel(h, r, w, C64::new(x, 0.0))?;
        Ok(((approx - exact).norm(), exact.norm()))
    });
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for p in pairs {
        let (d, k) = p?;
        num = num.max(d);
        den = den.max(k);
    }
    Ok(KernelResidual { s, w_re: w.re, w_im: w.im, xi: r, residual: num / den })
}

/// The three integrals of `H` over `[0, r]` against their spectral sums.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceIdentity {
    pub r: f64,
    /// `∫h11, ∫h22, ∫h12`.
    pub lhs: [f64; 3],
    pub rhs: [f64; 3],
    /// Part of `rhs` coming from beyond the measure window.
    pub tail: [f64; 3],
    pub residuals: [f64; 3],
}

/// Extension factor for the forward-computed atoms past the window.
const TRACE_TAIL_FACTOR: f64 = 16.0;

fn trace_terms(h: &Hamiltonian, r: f64, atoms: &[Atom]) -> Result<[f64; 3]> {
    let terms = exec::map_slice(atoms, |a| -> Result<[f64; 3]> {
        let (p, q) = if a.t.abs() < 1e-12 {
            let th = forward::theta_and_derivative(h, r, C64::new(0.0, 0.0))?;
            (th.dminus.re, th.dplus.re)
        } else {
            let m = forward::propagate(h, r, C64::new(a.t, 0.0))?;
            (m.theta_minus().re / a.t, (m.theta_plus().re - 1.0) / a.t)
        };
        Ok([a.mass * p * p / PI, a.mass * q * q / PI, -a.mass * p * q / PI])
    });
    let mut acc = [0.0; 3];
    for t in terms {
        let t = t?;
        for i in 0..3 {
            acc[i] += t[i];
        }
    }
    Ok(acc)
}

/// Residuals of the three trace identities at `r`. Atoms past the window
/// come from the forward solver up to a wider window, then from a density
/// estimate.
pub fn trace_identity_check(h: &Hamiltonian, mu: &SpectralMeasure, r: f64) -> Result<TraceIdentity> {
    let int = h.integral(r);
    let lhs = [int.h11, int.h22, int.h12];
    let inner = trace_terms(h, r, mu.atoms())?;

    let wide = TRACE_TAIL_FACTOR * mu.window;
    let far = forward::spectral_measure(h, wide)?;
    let outer: Vec<Atom> = far.atoms().iter().filter(|a| a.t.abs() > mu.window).copied().collect();
    let mut tail = trace_terms(h, r, &outer)?;
    // Beyond `wide` the summands average to a density times 1/t².
    let half: Vec<Atom> = outer.iter().filter(|a| a.t.abs() > 0.5 * (mu.window + wide)).copied().collect();
    if !half.is_empty() {
        let dens = trace_terms(h, r, &half)?;
        let span = 2.0 * (wide - 0.5 * (mu.window + wide));
        for i in 0..3 {
            // Mean of t² · term per unit length on both sides, integrated as 2/wide.
            let weighted: f64 = dens[i] * (0.75 * wide).powi(2) / span;
            tail[i] += weighted * 2.0 / wide;
        }
    }
    let mut rhs = [0.0; 3];
    let mut residuals = [0.0; 3];
    for i in 0..3 {
        rhs[i] = inner[i] + tail[i];
        residuals[i] = (lhs[i] - rhs[i]).abs();
    }
    Ok(TraceIdentity { r, lhs, rhs, tail, residuals })
}

/// Growth of `E` for the two-valued Hamiltonian on `(0, 1/2)` built from
/// intervals of length `3⁻ʲ`.
#[derive(Debug, Clone, Serialize)]
pub struct NonPWReport {
    pub h: f64,
    pub k_list: Vec<u32>,
    pub lambda: Vec<f64>,
    /// `|E_{H,1/2}(λ_k)|`.
    pub e_values: Vec<f64>,
    /// `|E(λ_k)| h^{k/2}`.
    pub ratios: Vec<f64>,
    /// `|E(λ_k)| / λ_k`.
    pub lambda_over: Vec<f64>,
    /// Relative max-entry error of `M_k ⋯ M_1` at `λ_k` against
    /// `(-1)^{k/2} diag(h^{-k/2}, h^{k/2})`.
    pub product_errors: Vec<f64>,
    /// The same against `diag(h^{-k/2}, h^{k/2})`. Every pair
    /// `M_{2i} M_{2i-1}(λ_k)` equals `diag(1/h, h)`, so this is the form the
    /// product actually takes.
    pub positive_product_errors: Vec<f64>,
    pub j_max: u32,
    /// Bound `exp(h⁻¹ λ_k Σ_{j>j_max} 3⁻ʲ)` on the omitted factors.
    pub tail_factors: Vec<f64>,
}

/// Identity on odd intervals, `diag(h, 1/h)` on even ones, `j ≤ j_max`.
pub fn nonpw_hamiltonian(h: f64, j_max: u32) -> Result<Hamiltonian> {
    let pieces: Vec<(f64, SymMat2)> = (1..=j_max)
        .map(|j| {
            let m = if j % 2 == 1 { SymMat2::IDENTITY } else { SymMat2::diag(h, 1.0 / h) };
            (3f64.powi(-(j as i32)), m)
        })
        .collect();
    Hamiltonian::from_pieces(&pieces)
}

pub fn nonpw_example(h: f64, k_max: u32) -> Result<NonPWReport> {
    if !(h > 0.0 && h < 1.0 / 9.0) {
        return Err(Error::Invalid(format!("h must be < 1/9 and positive, got {h}")));
    }
    if k_max < 2 || !k_max.is_multiple_of(2) || k_max > 10 {
        return Err(Error::Invalid(format!("kmax must be even in 2..=10, got {k_max}")));
    }
    let j_max = k_max + 12;
    let ham = nonpw_hamiltonian(h, j_max)?;
    let mut rep = NonPWReport {
        h,
        k_list: (1..=k_max / 2).map(|i| 2 * i).collect(),
        lambda: Vec::new(),
        e_values: Vec::new(),
        ratios: Vec::new(),
        lambda_over: Vec::new(),
        product_errors: Vec::new(),
        positive_product_errors: Vec::new(),
        j_max,
        tail_factors: Vec::new(),
    };
    for &k in &rep.k_list.clone() {
        let lam = PI * 3f64.powi(k as i32) / 2.0;
        let z = C64::new(lam, 0.0);
        let rk = ham.segments()[k as usize - 1].r1;
        let p = forward::propagate(&ham, rk, z)?.entries;
        let scale = h.powf(-(k as f64) / 2.0);
        let rel_err = |sign: f64| {
            let want = [[sign * scale, 0.0], [0.0, sign / scale]];
            let mut err = 0.0f64;
            for i in 0..2 {
                for j in 0..2 {
                    err = err.max((p.0[i][j] - want[i][j]).norm());
                }
            }
            err / scale
        };
        rep.product_errors.push(rel_err(if (k / 2) % 2 == 0 { 1.0 } else { -1.0 }));
        rep.positive_product_errors.push(rel_err(1.0));
        let full = forward::propagate_scaled(&ham, ham.ell(), z)?;
        let col = full.scaled.col(0);
        let e = (col[0].norm_sqr() + col[1].norm_sqr()).sqrt() * full.log_scale.exp();
        rep.lambda.push(lam);
        rep.e_values.push(e);
        rep.ratios.push(e * h.powf(k as f64 / 2.0));
        rep.lambda_over.push(e / lam);
        rep.tail_factors.push((lam / h * 0.5 * 3f64.powi(-(j_max as i32))).exp());
    }
    Ok(rep)
}

/// Largest order accepted by [`diag_necessary_condition`].
pub const MAX_DIAG_ORDER: usize = 20;
const DIAG_NODES: usize = 12;

/// `(1/a_n(s)) ∫_0^s e^{(-1)ⁿφ(t)} I_n(t)² dt` with `φ = log w`,
/// `a_n(s) = s^{2n+1} / (n (n!)²)` and `I_n` the iterated integral with
/// weights `e^{(-1)^{n+k} φ(t_k)}`.
///
/// Composite Gauss–Legendre on `cells` equal cells refined at `breaks`
/// (points where `w` may jump), each iterated integral by the spectral
/// integration matrix.
pub fn diag_necessary_condition<W>(w: W, breaks: &[f64], n: usize, s: f64, cells: usize) -> Result<f64>
where
    W: Fn(f64) -> f64,
{
    if n == 0 || n > MAX_DIAG_ORDER {
        return Err(Error::Invalid(format!("order n must be in 1..={MAX_DIAG_ORDER}, got {n}")));
    }
    if !(s > 0.0) || cells == 0 {
        return Err(Error::Invalid(format!("need s > 0 and at least one cell (s = {s})")));
    }
    let mut edges: Vec<f64> = (0..=cells).map(|i| s * i as f64 / cells as f64).collect();
    edges.extend(breaks.iter().copied().filter(|&b| b > 0.0 && b < s));
    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * s);

    let (x, wq) = gauss_legendre(DIAG_NODES);
    let smat = integration_matrix(&x);
    let mut phi = Vec::new();
    let mut half = Vec::new();
    for e in edges.windows(2) {
        let hl = 0.5 * (e[1] - e[0]);
        half.push(hl);
        for &u in &x {
            let t = e[0] + hl * (u + 1.0);
            let wt = w(t);
            if !(wt > 0.0) {
                return Err(Error::Invalid(format!("weight must be positive, got w({t}) = {wt}")));
            }
            phi.push(wt.ln());
        }
    }
    let p = DIAG_NODES;
    let weight = |sign: f64| -> Vec<f64> { phi.iter().map(|&f| (sign * f).exp()).collect() };
    let plus = weight(1.0);
    let minus = weight(-1.0);

    // J_{n+1} = 1; J_k(x) = ∫_0^x e^{(-1)^{n+k} φ} J_{k+1}.
    let mut j = vec![1.0; phi.len()];
    for k in (1..=n).rev() {
        let wk = if (n + k).is_multiple_of(2) { &plus } else { &minus };
        let f: Vec<f64> = j.iter().zip(wk).map(|(a, b)| a * b).collect();
        let mut offset = 0.0;
        for (c, &hl) in half.iter().enumerate() {
            let fc = &f[c * p..(c + 1) * p];
            for i in 0..p {
                let row: f64 = (0..p).map(|m| smat[(i, m)] * fc[m]).sum();
                j[c * p + i] = offset + hl * row;
            }
            offset += hl * fc.iter().zip(&wq).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    let outer = if n.is_multiple_of(2) { &plus } else { &minus };
    let mut total = 0.0;
    for (c, &hl) in half.iter().enumerate() {
        for i in 0..p {
            let idx = c * p + i;
            total += hl * wq[i] * outer[idx] * j[idx] * j[idx];
        }
    }
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    let a_n = s.powi(2 * n as i32 + 1) / (n as f64 * fact * fact);
    Ok(total / a_n)
}
