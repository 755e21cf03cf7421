//! Minimal complex 2×2 matrix arithmetic for transfer-matrix propagation.

use std::ops::{Add, Mul, Sub};

use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const fn zero() -> Self {
        let z = C64::new(0.0, 0.0);
        Mat2([[z, z], [z, z]])
    }

    pub const fn identity() -> Self {
        let z = C64::new(0.0, 0.0);
        let o = C64::new(1.0, 0.0);
        Mat2([[o, z], [z, o]])
    }

    pub fn from_real(m: [[f64; 2]; 2]) -> Self {
        Mat2([
            [C64::new(m[0][0], 0.0), C64::new(m[0][1], 0.0)],
            [C64::new(m[1][0], 0.0), C64::new(m[1][1], 0.0)],
        ])
    }

    pub fn scale(&self, c: C64) -> Self {
        let m = &self.0;
        Mat2([[m[0][0] * c, m[0][1] * c], [m[1][0] * c, m[1][1] * c]])
    }

    pub fn det(&self) -> C64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn col(&self, j: usize) -> [C64; 2] {
        [self.0[0][j], self.0[1][j]]
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        let m = &self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = Mat2::zero();
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        out
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        let mut out = self;
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] += rhs.0[i][j];
            }
        }
        out
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        let mut out = self;
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] -= rhs.0[i][j];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_of_product_is_product_of_dets() {
        let a = Mat2([[C64::new(1.0, 2.0), C64::new(0.5, 0.0)], [C64::new(-1.0, 0.3), C64::new(2.0, -1.0)]]);
        let b = Mat2::from_real([[0.0, -1.0], [1.0, 0.0]]);
        let lhs = (a * b).det();
        let rhs = a.det() * b.det();
        assert!((lhs - rhs).norm() < 1e-14);
    }
}
