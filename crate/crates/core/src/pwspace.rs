//! Finite sections of Paley–Wiener spaces and truncated Toeplitz operators.
//!
//! `PW_s` is discretized in the orthonormal sampling basis
//! `φ_k(x) = √(π/s) sinc_s(x - t_k)`, `t_k = πk/s`, `|k| ≤ N`, where
//! `sinc_s(u) = sin(su) / (πu)`. The operator `T_{μ,s}` becomes the Gram
//! matrix `G_jk = Σ_m mass_m φ_j(t_m) φ_k(t_m)`.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::exec;
use crate::farfield::{self, HalfLattice, Lattice, PoleTable};
use crate::model::{Atom, SpectralMeasure, TailModel};
use crate::C64;

/// Reproducing kernel `sin(s(x - t)) / (π(x - t))` of `PW_s`.
pub fn sinc_kernel(s: f64, x: f64, t: f64) -> f64 {
    let u = x - t;
    let v = s * u;
    if v.abs() < 1e-3 {
        let v2 = v * v;
        s / PI * (1.0 - v2 / 6.0 + v2 * v2 / 120.0)
    } else {
        v.sin() / (PI * u)
    }
}

/// `∂/∂t sinc_s(x - t) = (sin s(x-t) - s(x-t) cos s(x-t)) / (π (x-t)²)`.
pub fn sinc_kernel_dt(s: f64, x: f64, t: f64) -> f64 {
    let u = x - t;
    let v = s * u;
    if v.abs() < 1e-2 {
        let v2 = v * v;
        s * s * s * u / PI * (1.0 / 3.0 - v2 / 30.0 + v2 * v2 / 840.0)
    } else {
        (v.sin() - v * v.cos()) / (PI * u * u)
    }
}

/// Sampling basis of `PW_s` with indices `-N..=N`, stored at offsets `0..2N+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PWBasis {
    pub s: f64,
    pub n: usize,
    nodes: Vec<f64>,
}

impl PWBasis {
    pub fn new(s: f64, n: usize) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Invalid(format!("bandwidth must be positive, got {s}")));
        }
        let nodes = (0..2 * n + 1).map(|i| PI * (i as f64 - n as f64) / s).collect();
        Ok(PWBasis { s, n, nodes })
    }

    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Offset of the node at the origin.
    pub fn center(&self) -> usize {
        self.n
    }

    fn sign(&self, i: usize) -> f64 {
        if (i + self.n).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    /// `φ_i(x)`, with `sin(sx)` supplied by the caller.
    fn phi_with(&self, i: usize, x: f64, sin_sx: f64) -> f64 {
        let u = x - self.nodes[i];
        let v = self.s * u;
        let norm = (PI / self.s).sqrt();
        if v.abs() < 1.0 {
            norm * sinc_kernel(self.s, x, self.nodes[i])
        } else {
            norm * self.sign(i) * sin_sx / (PI * u)
        }
    }

    pub fn phi(&self, i: usize, x: f64) -> f64 {
        self.phi_with(i, x, (self.s * x).sin())
    }

    /// `(φ_i(x))_i`, which are also the coefficients of `sinc_s(· - x)`.
    pub fn values_at(&self, x: f64) -> DVector<f64> {
        let sx = (self.s * x).sin();
        DVector::from_iterator(self.dim(), (0..self.dim()).map(|i| self.phi_with(i, x, sx)))
    }

    /// Coefficients of `sinc_s(· - w)` for complex `w`.
    pub fn kernel_coeffs(&self, w: C64) -> (DVector<f64>, DVector<f64>) {
        let norm = (PI / self.s).sqrt();
        let mut re = DVector::zeros(self.dim());
        let mut im = DVector::zeros(self.dim());
        for i in 0..self.dim() {
            let u = w - self.nodes[i];
            let v = u * self.s;
            let val = if v.norm() < 1e-3 {
                let v2 = v * v;
                (1.0 - v2 / 6.0 + v2 * v2 / 120.0) * (self.s / PI)
            } else {
                v.sin() / (u * PI)
            } * norm;
            re[i] = val.re;
            im[i] = val.im;
        }
        (re, im)
    }

    /// Coefficients of `sin(sx)/x = π sinc_s(x)`: `√(πs) e_0`.
    pub fn sine_coeffs(&self) -> DVector<f64> {
        let mut b = DVector::zeros(self.dim());
        b[self.center()] = (PI * self.s).sqrt();
        b
    }

    /// `(∂_t φ_i(t))_i`.
    pub fn derivatives_at(&self, t: f64) -> DVector<f64> {
        let norm = (PI / self.s).sqrt();
        DVector::from_iterator(
            self.dim(),
            self.nodes.iter().map(|&tk| norm * sinc_kernel_dt(self.s, tk, t)),
        )
    }
}

/// `Σ_k coeffs_k φ_k(x)`.
pub fn evaluate_pw(coeffs: &DVector<f64>, basis: &PWBasis, x: f64) -> f64 {
    basis.values_at(x).dot(coeffs)
}

/// Continuation atoms and analytic tail for one side.
#[derive(Debug, Clone, PartialEq)]
pub struct SideExtension {
    pub lattice: Lattice,
    /// Continuation atoms occupy `atoms[start..start + count]`.
    pub start: usize,
    pub count: usize,
}

impl SideExtension {
    pub fn tail(&self) -> HalfLattice {
        self.lattice.tail_after(self.count)
    }
}

/// Measure atoms plus a lattice continuation on each side, sized for a
/// given basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedMeasure {
    pub atoms: Vec<Atom>,
    /// The first `n_real` atoms are the original measure.
    pub n_real: usize,
    pub sides: Vec<SideExtension>,
}

/// Distance in lattice steps between the last explicit atom and the
/// outermost basis node.
const TAIL_OFFSET: f64 = 40.0;

impl ExtendedMeasure {
    /// Extends `mu` for use with bandwidth `s` and truncation `n`.
    pub fn new(mu: &SpectralMeasure, s: f64, n: usize, model: TailModel) -> Self {
        let mut atoms = mu.atoms().to_vec();
        let n_real = atoms.len();
        let mut sides = Vec::new();
        if model == TailModel::Lattice {
            let reach_nodes = PI * n as f64 / s;
            for lat in farfield::estimate(mu.atoms()).into_iter().flatten() {
                let reach = reach_nodes + TAIL_OFFSET * lat.spacing;
                let count = lat.count_to(reach);
                let start = atoms.len();
                atoms.extend((1..=count).map(|k| Atom { t: lat.position(k), mass: lat.mass }));
                sides.push(SideExtension { lattice: lat, start, count });
            }
        }
        ExtendedMeasure { atoms, n_real, sides }
    }

    /// No continuation.
    pub fn truncated(mu: &SpectralMeasure) -> Self {
        ExtendedMeasure { atoms: mu.atoms().to_vec(), n_real: mu.len(), sides: Vec::new() }
    }

    pub fn real_atoms(&self) -> &[Atom] {
        &self.atoms[..self.n_real]
    }
}

/// Gram matrix of `T_{μ,s}` with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct PWOperator {
    pub basis: PWBasis,
    pub gram: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    /// `(max L_ii / min L_ii)²`, a cheap condition estimate.
    pub condition_estimate: f64,
}

/// Poles `σ t_k` of a basis as seen from one side.
fn side_poles(basis: &PWBasis, sigma: f64) -> Vec<f64> {
    basis.nodes().iter().map(|&t| sigma * t).collect()
}

/// Assembles the Gram matrix over explicit atoms and lattice tails.
pub fn gram_matrix(ext: &ExtendedMeasure, basis: &PWBasis) -> DMatrix<f64> {
    let s = basis.s;
    let dim = basis.dim();
    let nodes = basis.nodes();
    let sins: Vec<f64> = ext.atoms.iter().map(|a| (s * a.t).sin()).collect();
    let weights: Vec<f64> = ext.atoms.iter().zip(&sins).map(|(a, sn)| a.mass * sn * sn).collect();
    // U_j = Σ_m w_m / (t_m - t_j); diag_j = Σ_m mass_m φ_j(t_m)².
    let rows: Vec<(f64, f64)> = exec::map_indexed(dim, |j| {
        let tj = nodes[j];
        let mut u = 0.0;
        let mut d = 0.0;
        for ((a, &w), &sn) in ext.atoms.iter().zip(&weights).zip(&sins) {
            let diff = a.t - tj;
            if diff != 0.0 {
                u += w / diff;
            }
            let p = basis.phi_with(j, a.t, sn);
            d += a.mass * p * p;
        }
        (u, d)
    });
    let scale = 1.0 / (PI * s);
    let tails: Vec<(f64, f64, PoleTable, PoleTable, C64)> = ext
        .sides
        .iter()
        .map(|side| {
            let hl = side.tail();
            let poles = side_poles(basis, side.lattice.sigma);
            let dc = hl.table(0.0, &poles);
            let osc = hl.table(2.0 * s * hl.delta, &poles);
            let phase = C64::from_polar(1.0, 2.0 * s * hl.u0);
            (side.lattice.mass, side.lattice.sigma, dc, osc, phase)
        })
        .collect();
    let tail_entry = |j: usize, k: usize| -> f64 {
        tails
            .iter()
            .map(|(mass, _, dc, osc, phase)| {
                mass * 0.5 * (dc.pair(j, k).re - (phase * osc.pair(j, k)).re)
            })
            .sum::<f64>()
    };
    let upper: Vec<Vec<f64>> = exec::map_indexed(dim, |j| {
        let mut row = vec![0.0; dim - j];
        row[0] = rows[j].1 + scale * tail_entry(j, j);
        for k in j + 1..dim {
            let sign = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
            let explicit = (rows[j].0 - rows[k].0) / (nodes[j] - nodes[k]);
            row[k - j] = sign * scale * (explicit + tail_entry(j, k));
        }
        row
    });
    let mut g = DMatrix::zeros(dim, dim);
    for (j, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            g[(j, j + off)] = v;
            g[(j + off, j)] = v;
        }
    }
    g
}

impl PWOperator {
    pub fn from_gram(basis: PWBasis, gram: DMatrix<f64>) -> Result<Self> {
        let (s, n) = (basis.s, basis.n);
        let factor = Cholesky::new(gram.clone()).ok_or_else(|| Error::NotComparable {
            s,
            n,
            detail: "Gram matrix is not positive definite".into(),
        })?;
        let diag = factor.l_dirty().diagonal();
        let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if !(lo > 0.0) {
            return Err(Error::NotComparable { s, n, detail: "singular Cholesky factor".into() });
        }
        Ok(PWOperator { basis, gram, factor, condition_estimate: (hi / lo).powi(2) })
    }

    /// Solves `gram · x = rhs` with one step of refinement; returns the
    /// relative residual.
    pub fn apply_inverse(&self, rhs: &DVector<f64>) -> (DVector<f64>, f64) {
        let mut x = self.factor.solve(rhs);
        let norm = rhs.norm();
        if norm == 0.0 {
            return (x, 0.0);
        }
        let mut r = rhs - &self.gram * &x;
        let mut res = r.norm() / norm;
        if res > 1e-14 {
            x += self.factor.solve(&r);
            r = rhs - &self.gram * &x;
            res = r.norm() / norm;
        }
        (x, res)
    }

    pub fn solve_checked(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let (x, res) = self.apply_inverse(rhs);
        if !(res <= 1e-12) {
            return Err(Error::NotComparable {
                s: self.basis.s,
                n: self.basis.n,
                detail: format!("solve residual {res:e} exceeds 1e-12"),
            });
        }
        Ok(x)
    }

    /// Extreme eigenvalues of the Gram matrix.
    pub fn eigen_bounds(&self) -> (f64, f64) {
        extreme_eigenvalues(&self.gram)
    }
}

fn extreme_eigenvalues(g: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(g.clone());
    eig.eigenvalues.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Largest admissible truncation (dense factorization limit `2N+1 ≤ 4097`).
pub const MAX_TRUNCATION: usize = 2048;

fn check_truncation(n: usize) -> Result<()> {
    if n > MAX_TRUNCATION {
        return Err(Error::Invalid(format!("N = {n} exceeds the dense limit {MAX_TRUNCATION}")));
    }
    Ok(())
}

/// `T_{μ,s}` on the `2N+1` sinc section, with the far field modelled by
/// `model`.
pub fn build_operator_with(mu: &SpectralMeasure, s: f64, n: usize, model: TailModel) -> Result<PWOperator> {
    check_truncation(n)?;
    let basis = PWBasis::new(s, n)?;
    let ext = ExtendedMeasure::new(mu, s, n, model);
    let gram = gram_matrix(&ext, &basis);
    PWOperator::from_gram(basis, gram)
}

pub fn build_operator(mu: &SpectralMeasure, s: f64, n: usize) -> Result<PWOperator> {
    build_operator_with(mu, s, n, TailModel::Lattice)
}

/// `(λ_min, λ_max)` of the Gram matrix; positive semidefiniteness does not
/// require a successful factorization.
pub fn frame_bounds(mu: &SpectralMeasure, s: f64, n: usize) -> Result<(f64, f64)> {
    frame_bounds_with(mu, s, n, TailModel::Lattice)
}

pub fn frame_bounds_with(mu: &SpectralMeasure, s: f64, n: usize, model: TailModel) -> Result<(f64, f64)> {
    check_truncation(n)?;
    let basis = PWBasis::new(s, n)?;
    let ext = ExtendedMeasure::new(mu, s, n, model);
    Ok(extreme_eigenvalues(&gram_matrix(&ext, &basis)))
}

/// `Σ_m mass_m v_m φ_k(t_m)` over the explicit atoms of `ext`.
pub fn project(ext: &ExtendedMeasure, basis: &PWBasis, values: &[f64]) -> DVector<f64> {
    assert_eq!(values.len(), ext.atoms.len());
    let s = basis.s;
    let sins: Vec<f64> = ext.atoms.iter().map(|a| (s * a.t).sin()).collect();
    let out = exec::map_indexed(basis.dim(), |k| {
        ext.atoms
            .iter()
            .zip(values)
            .zip(&sins)
            .map(|((a, &v), &sn)| a.mass * v * basis.phi_with(k, a.t, sn))
            .sum::<f64>()
    });
    DVector::from_vec(out)
}

/// Tail of `Σ mass (ε(-1)^n - 1)/t_n · φ_k(t_n)` over the half lattice
/// beyond the explicit atoms of `side`, where `ε` is the value of the
/// alternating factor at the last explicit atom.
pub fn alternating_tail_projection(side: &SideExtension, basis: &PWBasis, eps: f64) -> DVector<f64> {
    let s = basis.s;
    let hl = side.tail();
    let sigma = side.lattice.sigma;
    let poles = side_poles(basis, sigma);
    let plain = hl.table(s * hl.delta, &poles);
    let alt = hl.table(s * hl.delta + PI, &poles);
    let phase = C64::from_polar(1.0, s * hl.u0);
    let c0 = basis.center();
    let pre = (PI / s).sqrt() * side.lattice.mass / PI * sigma;
    DVector::from_iterator(
        basis.dim(),
        (0..basis.dim()).map(|k| {
            let sum = phase * (alt.pair(c0, k) * eps - plain.pair(c0, k));
            basis.sign(k) * pre * sum.im
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward;
    use crate::model::Hamiltonian;
    use proptest::prelude::*;

    fn lattice_measure(ell: f64, count: i64) -> SpectralMeasure {
        let atoms = (-count..=count).map(|k| Atom { t: PI * k as f64 / ell, mass: PI / ell }).collect();
        SpectralMeasure::new(atoms, PI * count as f64 / ell, 0.0, 0.0).unwrap()
    }

    #[test]
    fn sinc_kernel_examples() {
        let s = 1.7;
        assert_eq!(sinc_kernel(s, 0.4, 0.4), s / PI);
        for k in [-3i32, 1, 5] {
            assert!(sinc_kernel(s, 0.4 + PI * k as f64 / s, 0.4).abs() < 1e-15);
        }
        let v = sinc_kernel(1.0, 1e-6, 0.0);
        assert!((v - (1.0 / PI - 1e-12 / (6.0 * PI))).abs() < 1e-17);
    }

    #[test]
    fn sinc_kernel_dt_examples() {
        assert_eq!(sinc_kernel_dt(2.0, 0.3, 0.3), 0.0);
        assert!((sinc_kernel_dt(1.0, PI, 0.0) - 1.0 / (PI * PI)).abs() < 1e-16);
        let d = 1e-5;
        for &(s, x, t) in &[(1.3, 0.7, 0.2), (2.0, -1.0, 0.9), (0.8, 0.3, 0.3 + 1e-3)] {
            let fd = (sinc_kernel(s, x, t + d) - sinc_kernel(s, x, t - d)) / (2.0 * d);
            assert!((sinc_kernel_dt(s, x, t) - fd).abs() <= 1e-7);
        }
    }

    #[test]
    fn free_gram_is_identity_without_tail() {
        // All basis nodes inside a symmetric lattice window.
        let ell = PI;
        let s = ell;
        let mu = lattice_measure(ell, 64);
        let op = build_operator_with(&mu, s, 16, TailModel::Truncated).unwrap();
        let err = (&op.gram - DMatrix::identity(33, 33)).amax();
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn free_gram_with_lattice_tail() {
        let ell = PI;
        let mu = lattice_measure(ell, 60);
        for &s in &[ell / 2.0, 0.37 * ell, ell / 64.0] {
            let op = build_operator(&mu, s, 24).unwrap();
            let err = (&op.gram - DMatrix::identity(49, 49)).amax();
            assert!(err < 1e-11, "s = {s}: {err}");
        }
    }

    #[test]
    fn rank_one_update_at_origin() {
        let ell = PI;
        let s = ell;
        let mut atoms: Vec<Atom> = lattice_measure(ell, 64).atoms().to_vec();
        let extra = 0.7;
        for a in atoms.iter_mut() {
            if a.t == 0.0 {
                a.mass += extra;
            }
        }
        let mu = SpectralMeasure::new(atoms, 64.0, 0.0, 0.0).unwrap();
        let op = build_operator_with(&mu, s, 16, TailModel::Truncated).unwrap();
        let mut expect = DMatrix::identity(33, 33);
        expect[(16, 16)] += extra * s / PI;
        assert!((&op.gram - expect).amax() < 1e-12);
    }

    #[test]
    fn gram_matches_direct_sum() {
        let h = Hamiltonian::from_pieces(&[
            (1.0, crate::model::SymMat2::diag(1.2, 1.0 / 1.2)),
            (1.0, crate::model::SymMat2::diag(1.0 / 1.2, 1.2)),
        ])
        .unwrap();
        let mu = forward::spectral_measure(&h, 40.0).unwrap();
        let basis = PWBasis::new(1.3, 10).unwrap();
        let ext = ExtendedMeasure::truncated(&mu);
        let g = gram_matrix(&ext, &basis);
        let mut direct = DMatrix::zeros(21, 21);
        for a in mu.atoms() {
            let v = basis.values_at(a.t);
            direct += a.mass * &v * v.transpose();
        }
        assert!((&g - &direct).amax() < 1e-13);
        assert_eq!(g, g.transpose());
    }

    #[test]
    fn free_inverse_of_sine_is_sine() {
        let mu = lattice_measure(PI, 60);
        let op = build_operator(&mu, 2.0, 20).unwrap();
        let b = op.basis.sine_coeffs();
        let (x, res) = op.apply_inverse(&b);
        assert!(res <= 1e-12);
        assert!((x - b).amax() < 1e-11);
    }

    #[test]
    fn frame_bounds_free_and_deleted_atom() {
        let mu = lattice_measure(PI, 60);
        let (lo, hi) = frame_bounds(&mu, PI, 24).unwrap();
        assert!((lo - 1.0).abs() < 1e-8 && (hi - 1.0).abs() < 1e-8);
        let atoms: Vec<Atom> = mu.atoms().iter().copied().filter(|a| a.t != 3.0).collect();
        let cut = SpectralMeasure::new(atoms, 60.0, 0.0, 0.0).unwrap();
        let (lo2, _) = frame_bounds_with(&cut, PI, 24, TailModel::Truncated).unwrap();
        assert!(lo2 < lo);
    }

    #[test]
    fn evaluate_interpolates_nodes() {
        let basis = PWBasis::new(1.1, 6).unwrap();
        let coeffs = DVector::from_iterator(13, (0..13).map(|i| (i as f64).sin()));
        for (j, &t) in basis.nodes().iter().enumerate() {
            let v = evaluate_pw(&coeffs, &basis, t);
            assert!((v - coeffs[j] * (1.1 / PI).sqrt()).abs() < 1e-14);
        }
        let e3 = DVector::from_fn(13, |i, _| if i == 3 { 1.0 } else { 0.0 });
        assert!((evaluate_pw(&e3, &basis, 0.77) - basis.phi(3, 0.77)).abs() < 1e-16);
    }

    #[test]
    fn kernel_expansion_converges() {
        let s = 1.0;
        let t = 0.37;
        for &n in &[50usize, 400] {
            let basis = PWBasis::new(s, n).unwrap();
            let c = basis.values_at(t);
            let x = 2.1;
            let err = (evaluate_pw(&c, &basis, x) - sinc_kernel(s, x, t)).abs();
            assert!(err < 1.0 / n as f64, "N={n}: {err}");
        }
    }

    proptest! {
        #[test]
        fn random_spd_inverse_consistency(seed in prop::collection::vec(-1.0f64..1.0, 81), rhs in prop::collection::vec(-1.0f64..1.0, 9)) {
            let a = DMatrix::from_vec(9, 9, seed);
            let g = &a * a.transpose() + DMatrix::identity(9, 9);
            let basis = PWBasis::new(1.0, 4).unwrap();
            let op = PWOperator::from_gram(basis, g.clone()).unwrap();
            let b = DVector::from_vec(rhs);
            let (x, _) = op.apply_inverse(&b);
            prop_assert!((&g * x - &b).norm() <= 1e-10 * (1.0 + b.norm()));
        }

        #[test]
        fn parseval(coeffs in prop::collection::vec(-1.0f64..1.0, 21)) {
            let mu = lattice_measure(1.3, 40);
            let basis = PWBasis::new(0.9, 10).unwrap();
            let ext = ExtendedMeasure::truncated(&mu);
            let g = gram_matrix(&ext, &basis);
            let c = DVector::from_vec(coeffs);
            let quad = c.dot(&(&g * &c));
            let direct: f64 = mu.atoms().iter().map(|a| a.mass * evaluate_pw(&c, &basis, a.t).powi(2)).sum();
            prop_assert!((quad - direct).abs() <= 1e-12 * (1.0 + direct));
        }
    }
}
