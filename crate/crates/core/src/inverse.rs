//! Recovery of a trace-normalized Hamiltonian from its spectral measure.
//!
//! For each bandwidth `s` the truncated Toeplitz operator `T_{μ,s}` is
//! inverted on the sinc section of `PW_s`:
//!
//! * `G_{1,s}(t) = (T⁻¹ sin(sx)/x, sinc_s(x - t))`,
//! * `G_{2,a}` from the masses and `G'_{1,a}` at the top bandwidth `a`,
//! * `G_{2,s}` the `L²(μ)` projection of `G_{2,a}` onto `PW_s`,
//! * `ζ(s) = ½ G_{1,s}(0) + (1/2π) ‖G_{2,s}‖²`.
//!
//! With `τ = ζ⁻¹`, `g₁(r) = G_{1,τ(r)}(0)` and `g(r) = (1/π)(G_{1,τ(r)}, G_{2,τ(r)})`,
//! the Hamiltonian is `[[g₁', g'], [g', 2 - g₁']]`.

use std::f64::consts::PI;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::exec;
use crate::farfield;
use crate::model::{
    Diagnostics, GridConfig, Hamiltonian, ReconstructionResult, Segment, SpectralMeasure, SymMat2,
    TailModel, EPS_PSD, EPS_ZERO,
};
use crate::pwspace::{self, ExtendedMeasure, PWBasis, PWOperator};

/// Tolerance of the identity `(1/π)‖G_{1,s}‖² = G_{1,s}(0)`.
pub const TOL_IDENTITY: f64 = 1e-4;
/// Tolerance of `2ζ = G_{1,s}(0) + (1/π)‖G_{2,s}‖²`.
pub const TOL_CONSISTENCY: f64 = 1e-6;
/// Cells whose PSD projection exceeds this count as badly projected.
pub const PROJECTION_LIMIT: f64 = 1e-2;

/// `K̂_μ(0) = (1/π) Σ_{t≠0} mass / (t (1 + t²))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KHat {
    pub value: f64,
    /// Far-field contribution included in `value`.
    pub tail: f64,
}

/// Sums in mirror pairs ordered by `|t|`, then adds the lattice far field.
pub fn khat_zero(mu: &SpectralMeasure) -> KHat {
    let f = |a: &crate::model::Atom| a.mass / (a.t * (1.0 + a.t * a.t));
    let atoms = mu.atoms();
    let z = mu.zero_index();
    let left: Vec<f64> = atoms[..z].iter().rev().map(f).collect();
    let right: Vec<f64> = atoms[z + 1..].iter().map(f).collect();
    let mut sum = 0.0;
    for i in 0..left.len().max(right.len()) {
        sum += left.get(i).copied().unwrap_or(0.0) + right.get(i).copied().unwrap_or(0.0);
    }
    let tail: f64 = farfield::estimate(atoms).iter().flatten().map(|l| l.odd_tail()).sum();
    KHat { value: (sum + tail) / PI, tail: tail / PI }
}

/// `G_{1,s}` in the sinc basis together with the operator it came from.
#[derive(Debug, Clone)]
pub struct G1Data {
    pub s: f64,
    pub ext: ExtendedMeasure,
    pub op: PWOperator,
    /// `T⁻¹ (sin(sx)/x)`.
    pub u: DVector<f64>,
    pub g1_at_zero: f64,
    pub residual: f64,
}

impl G1Data {
    pub fn basis(&self) -> &PWBasis {
        &self.op.basis
    }

    pub fn value(&self, t: f64) -> f64 {
        self.basis().values_at(t).dot(&self.u)
    }

    /// `G'_{1,s}(t)`.
    pub fn derivative(&self, t: f64) -> f64 {
        self.basis().derivatives_at(t).dot(&self.u)
    }

    /// `(1/π) ‖G_{1,s}‖²_{L²(μ)}`, evaluated through the Gram matrix.
    pub fn norm2_over_pi(&self) -> f64 {
        self.u.dot(&(&self.op.gram * &self.u)) / PI
    }
}

pub fn compute_g1(mu: &SpectralMeasure, s: f64, n: usize, model: TailModel) -> Result<G1Data> {
    if n > pwspace::MAX_TRUNCATION {
        return Err(Error::Invalid(format!("N = {n} exceeds {}", pwspace::MAX_TRUNCATION)));
    }
    let basis = PWBasis::new(s, n)?;
    let ext = ExtendedMeasure::new(mu, s, n, model);
    let gram = pwspace::gram_matrix(&ext, &basis);
    let op = PWOperator::from_gram(basis, gram)?;
    let b = op.basis.sine_coeffs();
    let (u, residual) = op.apply_inverse(&b);
    if !(residual <= 1e-12) {
        return Err(Error::NotComparable { s, n, detail: format!("solve residual {residual:e}") });
    }
    let g1_at_zero = u[op.basis.center()] * (s / PI).sqrt();
    Ok(G1Data { s, ext, op, u, g1_at_zero, residual })
}

/// `G_{2,a}` on the support of `μ`, with the alternating far-field model
/// `Θ⁺(t_n) = ε (-1)^n` used beyond the window.
#[derive(Debug, Clone, PartialEq)]
pub struct G2a {
    /// One value per atom of `μ`.
    pub values: Vec<f64>,
    /// `(σ, ε)`: value of `1 + t G_{2,a}(t)` at the outermost atom of side `σ`,
    /// with magnitude averaged over the outer half.
    pub edge_theta: Vec<(f64, f64)>,
}

impl G2a {
    fn edge(&self, sigma: f64) -> f64 {
        self.edge_theta.iter().find(|(s, _)| *s == sigma).map(|e| e.1).unwrap_or(1.0)
    }

    /// Values on every explicit atom of `ext`.
    pub fn extended(&self, ext: &ExtendedMeasure) -> Vec<f64> {
        let mut out = self.values.clone();
        out.resize(ext.atoms.len(), 0.0);
        for side in &ext.sides {
            let eps = self.edge(side.lattice.sigma);
            for k in 0..side.count {
                let th = if (k + 1) % 2 == 0 { eps } else { -eps };
                let t = ext.atoms[side.start + k].t;
                out[side.start + k] = (th - 1.0) / t;
            }
        }
        out
    }

    /// `ε` at the start of the analytic tail of `side`.
    pub fn tail_theta(&self, side: &pwspace::SideExtension) -> f64 {
        let eps = self.edge(side.lattice.sigma);
        if side.count.is_multiple_of(2) {
            eps
        } else {
            -eps
        }
    }
}

/// `G_{2,a}(0) = (K̂ + c)/μ({0}) - G'_{1,a}(0) μ({0})`,
/// `G_{2,a}(t) = (1/t) (π / (t μ({t}) G'_{1,a}(t)) - 1)`.
pub fn compute_g2a(mu: &SpectralMeasure, c: f64, g1a: &G1Data) -> Result<G2a> {
    let khat = khat_zero(mu).value;
    let atoms = mu.atoms();
    let derivs = exec::map_slice(atoms, |a| g1a.derivative(a.t));
    let mut values = Vec::with_capacity(atoms.len());
    for (a, &d) in atoms.iter().zip(&derivs) {
        let v = if a.t.abs() < EPS_ZERO {
            (khat + c) / a.mass - d * a.mass
        } else {
            if d == 0.0 || !d.is_finite() {
                return Err(Error::numerical("compute_g2a", format!("G'(t) = {d} at t = {}", a.t)));
            }
            (PI / (a.t * a.mass * d) - 1.0) / a.t
        };
        values.push(v);
    }
    let mut edge_theta = Vec::new();
    for sigma in [-1.0, 1.0] {
        let mut side: Vec<(f64, f64)> = atoms
            .iter()
            .zip(&values)
            .filter(|(a, _)| a.t * sigma > 0.0)
            .map(|(a, &v)| (a.t.abs(), 1.0 + a.t * v))
            .collect();
        if side.len() < 4 {
            continue;
        }
        side.sort_by(|x, y| x.0.total_cmp(&y.0));
        let outer = &side[side.len() / 2..];
        let amp = outer.iter().map(|p| p.1.abs()).sum::<f64>() / outer.len() as f64;
        let last = outer[outer.len() - 1].1;
        edge_theta.push((sigma, amp.copysign(last)));
    }
    Ok(G2a { values, edge_theta })
}

/// `G_{2,s}` as `T⁻¹ y` with `y_k = (G_{2,a}, φ_k)_{L²(μ)}`.
#[derive(Debug, Clone)]
pub struct G2sData {
    pub y: DVector<f64>,
    pub v: DVector<f64>,
    /// `‖G_{2,s}‖²_{L²(μ)} = yᵀ T⁻¹ y`.
    pub norm2: f64,
    /// The same norm evaluated as `vᵀ T v`.
    pub norm2_gram: f64,
    pub residual: f64,
}

impl G2sData {
    pub fn value(&self, basis: &PWBasis, t: f64) -> f64 {
        basis.values_at(t).dot(&self.v)
    }
}

pub fn compute_g2s(g1: &G1Data, g2a: &G2a) -> Result<G2sData> {
    let basis = g1.basis();
    let values = g2a.extended(&g1.ext);
    let mut y = pwspace::project(&g1.ext, basis, &values);
    for side in &g1.ext.sides {
        y += pwspace::alternating_tail_projection(side, basis, g2a.tail_theta(side));
    }
    let (v, residual) = g1.op.apply_inverse(&y);
    if !(residual <= 1e-12) {
        return Err(Error::NotComparable { s: g1.s, n: basis.n, detail: format!("solve residual {residual:e}") });
    }
    let norm2 = y.dot(&v);
    let norm2_gram = v.dot(&(&g1.op.gram * &v));
    Ok(G2sData { y, v, norm2, norm2_gram, residual })
}

/// Per-bandwidth quantities entering `ζ`, `g₁` and `g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub s: f64,
    pub g1_at_zero: f64,
    pub g2_norm2: f64,
    /// `(G_{1,s}, G_{2,s})_{L²(μ)}`.
    pub pairing: f64,
    /// `|(1/π)‖G_{1,s}‖² - G_{1,s}(0)|`.
    pub identity_residual: f64,
    /// `|2ζ - G_{1,s}(0) - (1/π) vᵀTv|`.
    pub consistency_residual: f64,
    pub solve_residual: f64,
    pub condition: f64,
}

impl Sample {
    pub fn zeta(&self) -> f64 {
        0.5 * self.g1_at_zero + self.g2_norm2 / (2.0 * PI)
    }

    /// `g = (1/π)(G₁, G₂)`.
    pub fn g(&self) -> f64 {
        self.pairing / PI
    }

    /// `2·self - coarse` on the extrapolated fields.
    fn extrapolate(&self, coarse: &Sample) -> Sample {
        let mix = |f: f64, c: f64| 2.0 * f - c;
        let mut out = *self;
        out.g1_at_zero = mix(self.g1_at_zero, coarse.g1_at_zero);
        out.g2_norm2 = mix(self.g2_norm2, coarse.g2_norm2);
        out.pairing = mix(self.pairing, coarse.pairing);
        out.identity_residual = self.identity_residual.max(coarse.identity_residual);
        out.consistency_residual = self.consistency_residual.max(coarse.consistency_residual);
        out.solve_residual = self.solve_residual.max(coarse.solve_residual);
        out.condition = self.condition.max(coarse.condition);
        out
    }
}

pub fn sample(mu: &SpectralMeasure, g2a: &G2a, s: f64, n: usize, model: TailModel) -> Result<Sample> {
    let g1 = compute_g1(mu, s, n, model)?;
    let g2 = compute_g2s(&g1, g2a)?;
    let pairing = g1.u.dot(&g2.y);
    let zeta = 0.5 * g1.g1_at_zero + g2.norm2 / (2.0 * PI);
    Ok(Sample {
        s,
        g1_at_zero: g1.g1_at_zero,
        g2_norm2: g2.norm2,
        pairing,
        identity_residual: (g1.norm2_over_pi() - g1.g1_at_zero).abs(),
        consistency_residual: (2.0 * zeta - g1.g1_at_zero - g2.norm2_gram / PI).abs(),
        solve_residual: g1.residual.max(g2.residual),
        condition: g1.op.condition_estimate,
    })
}

/// `ζ(s)` at a single truncation, with `c` for `G_{2,a}` and `a` the top
/// bandwidth.
pub fn zeta(mu: &SpectralMeasure, c: f64, a: f64, s: f64, n: usize) -> Result<f64> {
    let g1a = compute_g1(mu, a, n, TailModel::Lattice)?;
    let g2a = compute_g2a(mu, c, &g1a)?;
    Ok(sample(mu, &g2a, s, n, TailModel::Lattice)?.zeta())
}

/// The whole table of samples on `cfg.s_grid` at truncation `n`.
pub fn sample_table(mu: &SpectralMeasure, c: f64, cfg: &GridConfig, n: usize) -> Result<Vec<Sample>> {
    let g1a = compute_g1(mu, cfg.a(), n, cfg.tail)?;
    let g2a = compute_g2a(mu, c, &g1a)?;
    exec::map_slice(&cfg.s_grid, |&s| sample(mu, &g2a, s, n, cfg.tail)).into_iter().collect()
}

/// Samples at `N`, or `2 Q(N) - Q(N/2)` when extrapolation is on.
pub fn samples(mu: &SpectralMeasure, c: f64, cfg: &GridConfig) -> Result<(Vec<Sample>, f64)> {
    let fine = sample_table(mu, c, cfg, cfg.pw_truncation)?;
    if !cfg.extrapolate {
        return Ok((fine, f64::NAN));
    }
    let coarse = sample_table(mu, c, cfg, cfg.pw_truncation / 2)?;
    let change = fine.iter().zip(&coarse).map(|(f, c)| (f.zeta() - c.zeta()).abs()).fold(0.0, f64::max);
    Ok((fine.iter().zip(&coarse).map(|(f, c)| f.extrapolate(c)).collect(), change))
}

/// Monotone piecewise-cubic (Fritsch–Carlson) interpolant.
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    /// `x` strictly increasing, at least two points.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n);
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d = vec![delta[0]; 2];
        } else {
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] > 0.0 {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            d[0] = Self::end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = Self::end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Pchip { x, y, d }
    }

    fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
        let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if m * d0 <= 0.0 {
            0.0
        } else if d0 * d1 <= 0.0 && m.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            m
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let i = self.x.partition_point(|&v| v <= t).clamp(1, n - 1) - 1;
        let h = self.x[i + 1] - self.x[i];
        let u = (t - self.x[i]) / h;
        let (u2, u3) = (u * u, u * u * u);
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }
}

/// Projects `[[p, q], [q, 2 - p]]` onto the PSD cone keeping the trace.
/// Returns the matrix and the size of the correction.
pub fn project_trace2(p: f64, q: f64) -> (SymMat2, f64) {
    let rho = ((p - 1.0).powi(2) + q * q).sqrt();
    let det = 1.0 - rho * rho;
    if det >= -EPS_PSD || rho <= 1.0 {
        return (SymMat2::new(p, q, 2.0 - p), 0.0);
    }
    let (pm, qm) = ((p - 1.0) / rho, q / rho);
    (SymMat2::new(1.0 + pm, qm, 1.0 - pm), rho - 1.0)
}

/// Full recovery pipeline.
pub fn reconstruct(mu: &SpectralMeasure, c: f64, cfg: &GridConfig) -> Result<ReconstructionResult> {
    cfg.validate()?;
    let mut diag = Diagnostics::default();
    if mu.herglotz_b.abs() > 1e-4 {
        diag.warn(format!(
            "measure carries b = {:e}; the recovery assumes b = 0",
            mu.herglotz_b
        ));
    }
    let (samples, change) = samples(mu, c, cfg)?;
    if change.is_finite() {
        diag.record("zeta_change_between_truncations", change, f64::INFINITY);
    }

    let mut s_knots = vec![0.0];
    let mut zeta_knots = vec![0.0];
    let mut g1_knots = vec![0.0];
    let mut g_knots = vec![0.0];
    for smp in &samples {
        s_knots.push(smp.s);
        zeta_knots.push(smp.zeta());
        g1_knots.push(smp.g1_at_zero);
        g_knots.push(smp.g());
    }
    if let Some(w) = zeta_knots.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::numerical(
            "reconstruct",
            format!("ζ is not increasing between s = {} and s = {}", s_knots[w], s_knots[w + 1]),
        ));
    }
    let identity = samples.iter().map(|s| s.identity_residual).fold(0.0, f64::max);
    let consistency = samples.iter().map(|s| s.consistency_residual).fold(0.0, f64::max);
    let solve = samples.iter().map(|s| s.solve_residual).fold(0.0, f64::max);
    let cond = samples.iter().map(|s| s.condition).fold(0.0, f64::max);
    diag.record("g1_norm_identity", identity, TOL_IDENTITY);
    diag.record("zeta_consistency", consistency, TOL_CONSISTENCY);
    diag.record("solve_residual", solve, 1e-12);
    diag.record("condition_estimate", cond, f64::INFINITY);

    let ell = *zeta_knots.last().unwrap();
    let nr = cfg.r_samples;
    let dr = ell / (nr - 1) as f64;
    let r_grid: Vec<f64> = (0..nr).map(|i| if i + 1 == nr { ell } else { i as f64 * dr }).collect();
    let tau = Pchip::new(zeta_knots.clone(), s_knots.clone());
    let g1 = Pchip::new(zeta_knots.clone(), g1_knots);
    let g = Pchip::new(zeta_knots, g_knots);
    let tau_table: Vec<(f64, f64)> = r_grid.iter().map(|&r| (r, tau.eval(r))).collect();
    let g_table: Vec<[f64; 4]> = r_grid
        .iter()
        .map(|&r| {
            let v1 = g1.eval(r);
            [r, v1, 2.0 * r - v1, g.eval(r)]
        })
        .collect();

    let mut segments = Vec::with_capacity(nr - 1);
    let mut worst = 0.0f64;
    let mut bad = 0usize;
    for i in 0..nr - 1 {
        let (a, b) = (&g_table[i], &g_table[i + 1]);
        let h = b[0] - a[0];
        let p = (b[1] - a[1]) / h;
        let q = (b[3] - a[3]) / h;
        let (m, mag) = project_trace2(p, q);
        worst = worst.max(mag);
        if mag > PROJECTION_LIMIT {
            bad += 1;
        }
        segments.push(Segment { r0: a[0], r1: b[0], h: m });
    }
    diag.record("psd_projection_max", worst, f64::INFINITY);
    let bad_fraction = bad as f64 / (nr - 1) as f64;
    if !diag.record("psd_projection_bad_fraction", bad_fraction, 0.01) {
        return Err(Error::Invariant(format!(
            "PSD projection above {PROJECTION_LIMIT:e} on {:.1}% of cells",
            100.0 * bad_fraction
        )));
    }
    let hamiltonian = Hamiltonian::new(ell, segments)?;

    // Krein: τ(r) ≈ ∫_0^r √det Ĥ.
    let mut krein = 0.0;
    let mut krein_err = 0.0f64;
    for (seg, &(_, t)) in hamiltonian.segments().iter().zip(&tau_table[1..]) {
        krein += seg.h.det().max(0.0).sqrt() * seg.len();
        krein_err = krein_err.max((krein - t).abs());
    }
    diag.record("krein_type_consistency", krein_err / cfg.a(), 1e-2);
    let singular = hamiltonian.segments().iter().filter(|s| s.h.det() < 1e-6).count();
    if singular > 0 {
        diag.warn(format!("{singular} cells have det H below 1e-6"));
    }

    let mut zeta_table = vec![(0.0, 0.0)];
    zeta_table.extend(samples.iter().map(|s| (s.s, s.zeta())));
    Ok(ReconstructionResult { hamiltonian, zeta_table, tau_table, g_table, diagnostics: diag })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Atom;

    fn free_measure(ell: f64, window: f64) -> SpectralMeasure {
        let k = (window * ell / PI).floor() as i64;
        let atoms = (-k..=k).map(|j| Atom { t: PI * j as f64 / ell, mass: PI / ell }).collect();
        SpectralMeasure::new(atoms, window, 0.0, 0.0).unwrap()
    }

    #[test]
    fn khat_examples() {
        let mu = free_measure(PI, 50.0);
        assert_eq!(khat_zero(&mu).value, 0.0);
        let two = SpectralMeasure::new(
            vec![Atom { t: 0.0, mass: 1.0 }, Atom { t: 1.0, mass: 1.0 }, Atom { t: -2.0, mass: 1.0 }],
            3.0,
            0.0,
            0.0,
        )
        .unwrap();
        assert!((khat_zero(&two).value - 2.0 / (5.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn free_g1_closed_forms() {
        let mu = free_measure(PI, 60.0);
        let a = PI;
        for &s in &[1.0, a] {
            let g1 = compute_g1(&mu, s, 64, TailModel::Lattice).unwrap();
            assert!((g1.g1_at_zero - s).abs() < 1e-10);
            for &t in &[0.7, 2.5, -4.1] {
                assert!((g1.value(t) - (s * t).sin() / t).abs() < 1e-10);
            }
        }
        let g1a = compute_g1(&mu, a, 64, TailModel::Lattice).unwrap();
        assert!(g1a.derivative(0.0).abs() < 1e-12);
        for k in [1i32, 2, -3] {
            let t = PI * k as f64 / a;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert!((g1a.derivative(t) - sign * a / t).abs() < 1e-10);
        }
    }

    #[test]
    fn free_g2a_closed_form() {
        let mu = free_measure(PI, 60.0);
        let a = PI;
        let g1a = compute_g1(&mu, a, 64, TailModel::Lattice).unwrap();
        let g2a = compute_g2a(&mu, 0.0, &g1a).unwrap();
        for (atom, &v) in mu.atoms().iter().zip(&g2a.values) {
            let expect = if atom.t == 0.0 { 0.0 } else { ((a * atom.t).cos() - 1.0) / atom.t };
            assert!((v - expect).abs() < 1e-10, "t = {}: {v} vs {expect}", atom.t);
        }
    }

    #[test]
    fn free_g2s_closed_form() {
        let mu = free_measure(PI, 60.0);
        let g1a = compute_g1(&mu, PI, 128, TailModel::Lattice).unwrap();
        let g2a = compute_g2a(&mu, 0.0, &g1a).unwrap();
        let s = 1.3;
        let g1 = compute_g1(&mu, s, 128, TailModel::Lattice).unwrap();
        let g2 = compute_g2s(&g1, &g2a).unwrap();
        for &t in &[0.5, 3.0, -2.0] {
            let expect = ((s * t).cos() - 1.0) / t;
            assert!((g2.value(g1.basis(), t) - expect).abs() < 2e-2, "t = {t}");
        }
        // At s = a the projection is the identity on the support.
        let g2 = compute_g2s(&g1a, &g2a).unwrap();
        for (atom, &v) in mu.atoms().iter().zip(&g2a.values).take(40) {
            assert!((g2.value(g1a.basis(), atom.t) - v).abs() < 1e-2);
        }
    }

    #[test]
    fn free_zeta_is_identity() {
        let mu = free_measure(PI, 60.0);
        let z = zeta(&mu, 0.0, PI, 1.7, 128).unwrap();
        assert!((z - 1.7).abs() < 1e-2, "{z}");
    }

    #[test]
    fn pchip_is_monotone_and_exact_on_lines() {
        let x: Vec<f64> = (0..10).map(|i| (i as f64).powf(1.3)).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let p = Pchip::new(x.clone(), y);
        for i in 0..200 {
            let t = x[9] * i as f64 / 199.0;
            assert!((p.eval(t) - (2.0 * t + 1.0)).abs() < 1e-12);
        }
        let step = Pchip::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 0.0, 1.0, 1.0]);
        let mut prev = -1.0;
        for i in 0..=300 {
            let v = step.eval(3.0 * i as f64 / 300.0);
            assert!(v >= prev - 1e-15 && (-1e-15..=1.0 + 1e-15).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn projection_keeps_trace_and_psd() {
        let (m, mag) = project_trace2(1.0, 0.2);
        assert_eq!(mag, 0.0);
        assert_eq!(m, SymMat2::new(1.0, 0.2, 1.0));
        let (m, mag) = project_trace2(2.3, 0.4);
        assert!(mag > 0.0);
        assert!((m.trace() - 2.0).abs() < 1e-15);
        assert!(m.det().abs() < 1e-14);
    }
}
