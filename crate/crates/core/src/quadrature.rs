//! Gauss–Legendre rules and a cumulative (spectral) integration matrix on
//! the reference interval [-1, 1].

use nalgebra::DMatrix;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1],
/// nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        nodes[n - 1 - i] = -x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Matrix `S` with `S[i][j] = ∫_{-1}^{x_i} ℓ_j(x) dx` where `ℓ_j` are the
/// Lagrange polynomials on the Gauss–Legendre nodes `x`. Applying `S` to
/// samples of a polynomial of degree < n integrates it exactly.
pub fn integration_matrix(nodes: &[f64]) -> DMatrix<f64> {
    let n = nodes.len();
    // Vandermonde in the Legendre basis: V[i][k] = P_k(x_i).
    let v = DMatrix::from_fn(n, n, |i, k| legendre_with_derivative(k, nodes[i]).0);
    // Antiderivatives from -1: ∫ P_k = (P_{k+1} - P_{k-1}) / (2k+1), ∫ P_0 = x + 1.
    let q = DMatrix::from_fn(n, n, |i, k| {
        let x = nodes[i];
        if k == 0 {
            x + 1.0
        } else {
            let kp = legendre_with_derivative(k + 1, x).0;
            let km = legendre_with_derivative(k - 1, x).0;
            (kp - km) / (2.0 * k as f64 + 1.0)
        }
    });
    // S = Q V^{-1}
    let lu = v.lu();
    let vinv = lu.try_inverse().expect("Legendre Vandermonde is invertible");
    q * vinv
}

/// Integrates `f` over `[lo, hi]` with a composite rule of `cells` panels.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, cells: usize, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let h = (hi - lo) / cells as f64;
    let mut acc = 0.0;
    for c in 0..cells {
        let a = lo + c as f64 * h;
        let mid = a + 0.5 * h;
        let mut cell = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            cell += wi * f(mid + 0.5 * h * xi);
        }
        acc += 0.5 * h * cell;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // degree 15 is the limit for 8 points
        let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((got - 2.0 / 15.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn integration_matrix_is_exact_on_low_degree() {
        let (x, _) = gauss_legendre(12);
        let s = integration_matrix(&x);
        let f: Vec<f64> = x.iter().map(|x| 3.0 * x * x).collect();
        for i in 0..x.len() {
            let got: f64 = (0..x.len()).map(|j| s[(i, j)] * f[j]).sum();
            let want = x[i].powi(3) + 1.0;
            assert!((got - want).abs() < 1e-13, "{got} vs {want}");
        }
    }

    #[test]
    fn composite_rule() {
        let v = integrate(|x| x.sin(), 0.0, std::f64::consts::PI, 4, 8);
        assert!((v - 2.0).abs() < 1e-13);
    }
}
