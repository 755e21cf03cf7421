//! Continuation of a sampled measure beyond its window.
//!
//! The atoms on each side are modelled as a periodic lattice whose spacing
//! and mass are averaged over the outer half of that side. Sums of the form
//! `Σ_{n≥1} e^{iθn} / (u_n - p)^k` over a half lattice `u_n = u0 + nδ` are
//! evaluated in closed form so the far field costs O(1) per node.

use std::f64::consts::PI;

use crate::model::Atom;
use crate::C64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Far-field lattice on one side of the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    /// `+1` for the right side, `-1` for the left.
    pub sigma: f64,
    /// `|t|` of the outermost atom on this side.
    pub edge: f64,
    pub spacing: f64,
    pub mass: f64,
}

impl Lattice {
    /// Position of the `n`-th continuation atom (`n ≥ 1`).
    pub fn position(&self, n: usize) -> f64 {
        self.sigma * (self.edge + n as f64 * self.spacing)
    }

    /// Number of continuation atoms with `|t| ≤ reach`.
    pub fn count_to(&self, reach: f64) -> usize {
        if reach <= self.edge {
            0
        } else {
            ((reach - self.edge) / self.spacing).floor() as usize
        }
    }

    /// The half lattice beyond the first `n` continuation atoms.
    pub fn tail_after(&self, n: usize) -> HalfLattice {
        HalfLattice { u0: self.edge + n as f64 * self.spacing, delta: self.spacing }
    }

    /// `Σ_{n≥1} mass / (1 + t_n²)`, by the midpoint rule.
    pub fn lorentz_tail(&self) -> f64 {
        let a = self.edge + 0.5 * self.spacing;
        self.mass / self.spacing * (0.5 * PI - a.atan())
    }

    /// `Σ_{n≥1} mass / (t_n (1 + t_n²))`, signed.
    pub fn odd_tail(&self) -> f64 {
        let a = self.edge + 0.5 * self.spacing;
        // ∫_a^∞ dt / (t (1 + t²)) = ½ ln(1 + 1/a²)
        self.sigma * self.mass / self.spacing * 0.5 * (1.0 / (a * a)).ln_1p()
    }
}

/// Estimates the lattice on each side from the outer half of the atoms;
/// `None` when a side has fewer than four atoms.
pub fn estimate(atoms: &[Atom]) -> [Option<Lattice>; 2] {
    let side = |sigma: f64| -> Option<Lattice> {
        let mut pts: Vec<&Atom> = atoms.iter().filter(|a| a.t * sigma > 0.0).collect();
        if pts.len() < 4 {
            return None;
        }
        pts.sort_by(|x, y| x.t.abs().total_cmp(&y.t.abs()));
        let outer = &pts[pts.len() / 2..];
        let first = outer[0].t.abs();
        let edge = outer[outer.len() - 1].t.abs();
        let spacing = (edge - first) / (outer.len() - 1) as f64;
        let mass = outer.iter().map(|a| a.mass).sum::<f64>() / outer.len() as f64;
        Some(Lattice { sigma, edge, spacing, mass })
    };
    [side(-1.0), side(1.0)]
}

/// Exponential integral `E1(z)` on the principal branch.
pub fn e1(z: C64) -> C64 {
    if z.norm() <= 2.0 {
        let mut sum = C64::new(0.0, 0.0);
        let mut term = C64::new(1.0, 0.0);
        for k in 1..200 {
            term *= -z / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.norm() < 1e-18 * sum.norm().max(1e-300) {
                break;
            }
        }
        -EULER_GAMMA - z.ln() - sum
    } else {
        // Modified Lentz on the even continued fraction.
        let tiny = 1e-300;
        let mut b = z + 1.0;
        let mut c = C64::new(1.0 / tiny, 0.0);
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).norm() < 1e-16 {
                break;
            }
        }
        h * (-z).exp()
    }
}

/// `θ` reduced to `(-π, π]`.
pub fn wrap_phase(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// `B_{2k} / (2k)!` for `k = 1..=12`.
fn bernoulli_coefficients() -> [f64; 12] {
    const B: [(f64, f64); 12] = [
        (1.0, 6.0),
        (-1.0, 30.0),
        (1.0, 42.0),
        (-1.0, 30.0),
        (5.0, 66.0),
        (-691.0, 2730.0),
        (7.0, 6.0),
        (-3617.0, 510.0),
        (43867.0, 798.0),
        (-174611.0, 330.0),
        (854513.0, 138.0),
        (-236364091.0, 2730.0),
    ];
    let mut out = [0.0; 12];
    let mut fact = 1.0;
    for (k, &(num, den)) in B.iter().enumerate() {
        let m = 2 * (k + 1);
        fact *= ((m - 1) * m) as f64;
        out[k] = num / den / fact;
    }
    out
}

const EXACT_ALIAS: f64 = 1e-12;

/// `Σ_{n≥1} e^{iθn}/(n + c)` and `Σ_{n≥1} e^{iθn}/(n + c)²` for `c > 0`.
///
/// At `θ ≡ 0` the first sum diverges and is replaced by `-ψ(1 + c)`; only
/// differences in `c` of the first sum are meaningful there.
pub fn phase_sums(theta: f64, c: f64) -> (C64, C64) {
    let theta = wrap_phase(theta);
    if theta.abs() < EXACT_ALIAS {
        let x = c + 0.5;
        let x2 = x * x;
        // ψ(1 + c) and ψ'(1 + c) expanded about the midpoint c + ½.
        let psi = x.ln() + 1.0 / (24.0 * x2) - 7.0 / (960.0 * x2 * x2);
        let tri = 1.0 / x - 1.0 / (12.0 * x2 * x) + 7.0 / (240.0 * x2 * x2 * x);
        return (C64::new(-psi, 0.0), C64::new(tri, 0.0));
    }
    if theta.abs() > 1.0 {
        euler_sums(theta, c)
    } else {
        bernoulli_sums(theta, c)
    }
}

fn euler_sums(theta: f64, c: f64) -> (C64, C64) {
    let z = C64::from_polar(1.0, theta);
    let r = z / (1.0 - z);
    // Δ^k 1/(n+c) at n=1 is d_k; Δ^k 1/(n+c)² is d_k · H_k.
    let mut d = 1.0 / (1.0 + c);
    let mut harmonic = d;
    let mut pow = r;
    let mut s1 = pow * d;
    let mut s2 = pow * d * harmonic;
    for k in 1..60 {
        d *= -(k as f64) / (1.0 + c + k as f64);
        harmonic += 1.0 / (1.0 + c + k as f64);
        pow *= r;
        let t1 = pow * d;
        let t2 = t1 * harmonic;
        s1 += t1;
        s2 += t2;
        if t1.norm() < 1e-17 * s1.norm() && t2.norm() < 1e-17 * s2.norm() {
            break;
        }
    }
    (s1, s2)
}

fn bernoulli_sums(theta: f64, c: f64) -> (C64, C64) {
    // Σ z^n e^{-nx} = 1/(e^w - 1), w = x - iθ; integrate against e^{-cx}.
    let ib = C64::new(0.0, -theta);
    let zeta = C64::new(0.0, -c * theta);
    let lead = zeta.exp() * e1(zeta);
    // M_m = ∫_0^∞ e^{-cx} w^m dx, by parts.
    let mut moments = [C64::new(0.0, 0.0); 26];
    moments[0] = C64::new(1.0 / c, 0.0);
    let mut ibp = C64::new(1.0, 0.0);
    for m in 1..moments.len() {
        ibp *= ib;
        moments[m] = ibp / c + moments[m - 1] * (m as f64 / c);
    }
    let bern = bernoulli_coefficients();
    let mut s1 = lead - 0.5 / c;
    let mut s2 = 1.0 / c - ib * lead - 0.5 / (c * c);
    for (k, &b) in bern.iter().enumerate() {
        let m = 2 * k + 1;
        let t1 = b * moments[m];
        let t2 = b * (moments[m + 1] - ib * moments[m]);
        s1 += t1;
        s2 += t2;
        if t1.norm() < 1e-18 * s1.norm() && t2.norm() < 1e-18 * s2.norm() {
            break;
        }
    }
    (s1, s2)
}

/// Half lattice `u_n = u0 + nδ`, `n ≥ 1`, in side-local coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfLattice {
    pub u0: f64,
    pub delta: f64,
}

impl HalfLattice {
    /// `(Σ e^{iθn}/(u_n - p), Σ e^{iθn}/(u_n - p)²)`.
    pub fn sums(&self, theta: f64, p: f64) -> (C64, C64) {
        let c = (self.u0 - p) / self.delta;
        let (t1, t2) = phase_sums(theta, c);
        (t1 / self.delta, t2 / (self.delta * self.delta))
    }

    /// Table of sums at the given poles, for pair evaluation.
    pub fn table(&self, theta: f64, poles: &[f64]) -> PoleTable {
        let (first, second) = poles.iter().map(|&p| self.sums(theta, p)).unzip();
        PoleTable { poles: poles.to_vec(), first, second }
    }
}

/// Precomputed half-lattice sums at a set of poles.
#[derive(Debug, Clone)]
pub struct PoleTable {
    pub poles: Vec<f64>,
    pub first: Vec<C64>,
    pub second: Vec<C64>,
}

impl PoleTable {
    /// `Σ e^{iθn} / ((u_n - p_j)(u_n - p_k))`.
    pub fn pair(&self, j: usize, k: usize) -> C64 {
        if j == k {
            self.second[j]
        } else {
            (self.first[j] - self.first[k]) / (self.poles[j] - self.poles[k])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(theta: f64, c: f64, power: i32, terms: usize) -> C64 {
        // Summed from the far end to limit rounding.
        (1..=terms)
            .rev()
            .map(|n| C64::from_polar(1.0, theta * n as f64) / (n as f64 + c).powi(power))
            .sum()
    }

    #[test]
    fn e1_known_values() {
        // E1(1) = 0.21938393439552...
        assert!((e1(C64::new(1.0, 0.0)).re - 0.219_383_934_395_520_3).abs() < 1e-14);
        // E1(3) = 0.013048381094197...
        assert!((e1(C64::new(3.0, 0.0)).re - 0.013_048_381_094_197_04).abs() < 1e-15);
        // E1(i x) = -Ci(x) + i (Si(x) - π/2); Ci(5) = -0.19002974965664, Si(5) = 1.54993124494467
        let v = e1(C64::new(0.0, 5.0));
        assert!((v.re + (-0.190_029_749_656_643_9)).abs() < 1e-13);
        assert!((v.im - (1.549_931_244_944_674 - PI / 2.0)).abs() < 1e-13);
        let w = e1(C64::new(0.0, 1.5));
        let wc = e1(C64::new(0.0, -1.5));
        assert!((w.conj() - wc).norm() < 1e-15);
    }

    #[test]
    fn squared_sums_match_brute_force() {
        for &(theta, c) in &[(2.0, 40.0), (PI, 60.0), (0.3, 45.0), (0.02, 80.0), (-0.7, 50.0)] {
            let (_, t2) = phase_sums(theta, c);
            let b = brute(theta, c, 2, 4_000_000);
            let tail = 1.0 / (4.0e6 + c).powi(2) / (theta / 2.0).sin().abs();
            assert!((t2 - b).norm() < 1e-14 + tail, "theta={theta} c={c}: {t2} vs {b}");
        }
    }

    #[test]
    fn first_sum_differences_match_brute_force() {
        for &(theta, c1, c2) in &[(2.5, 40.0, 90.0), (0.4, 40.0, 70.0), (0.05, 100.0, 130.0)] {
            let d = phase_sums(theta, c1).0 - phase_sums(theta, c2).0;
            let terms = 4_000_000;
            let b: C64 = (1..=terms)
                .rev()
                .map(|n| {
                    let n = n as f64;
                    C64::from_polar(1.0, theta * n) * (c2 - c1) / ((n + c1) * (n + c2))
                })
                .sum();
            assert!((d - b).norm() < 1e-9, "theta={theta}: {d} vs {b}");
        }
    }

    #[test]
    fn regimes_agree_at_the_switch() {
        for &theta in &[1.0, -1.0, 0.9] {
            let e = euler_sums(theta, 55.0);
            let b = bernoulli_sums(theta, 55.0);
            assert!((e.0 - b.0).norm() < 1e-14, "{} vs {}", e.0, b.0);
            assert!((e.1 - b.1).norm() < 1e-15, "{} vs {}", e.1, b.1);
        }
    }

    #[test]
    fn alias_regime_differences_are_exact() {
        let d = phase_sums(0.0, 40.0).0 - phase_sums(0.0, 75.0).0;
        let b: f64 = (1..=5_000_000).rev().map(|n| {
            let n = n as f64;
            35.0 / ((n + 40.0) * (n + 75.0))
        }).sum();
        // truncated tail ≈ 35 / 5e6
        assert!((d.re - b - 35.0 / 5.0e6).abs() < 1e-9, "{} vs {}", d.re, b);
    }

    #[test]
    fn lattice_estimate_on_uniform_atoms() {
        let atoms: Vec<Atom> = (-20..=20).map(|k| Atom { t: k as f64 * 0.5, mass: 0.5 }).collect();
        let [l, r] = estimate(&atoms);
        let (l, r) = (l.unwrap(), r.unwrap());
        assert_eq!(r.edge, 10.0);
        assert!((r.spacing - 0.5).abs() < 1e-15 && (l.mass - 0.5).abs() < 1e-15);
        assert_eq!(l.position(2), -11.0);
        assert_eq!(r.count_to(11.2), 2);
    }
}
