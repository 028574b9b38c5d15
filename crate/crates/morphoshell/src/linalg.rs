//! Minimal 3D vector / matrix types used throughout the crate.

use std::ops::{Add, Div, Index, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

pub const fn vec3(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3 { x, y, z }
}

impl Vec3 {
    pub const ZERO: Vec3 = vec3(0.0, 0.0, 0.0);

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        vec3(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        self / self.norm()
    }

    /// Rank-one matrix `self ⊗ o`.
    pub fn outer(self, o: Vec3) -> Mat3 {
        Mat3::from_rows([o * self.x, o * self.y, o * self.z])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        vec3(a[0], a[1], a[2])
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        vec3(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        vec3(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        vec3(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        self * (1.0 / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        vec3(-self.x, -self.y, -self.z)
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index out of range"),
        }
    }
}

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3 {
    pub m: [[f64; 3]; 3],
}

impl Mat3 {
    pub const ZERO: Mat3 = Mat3 { m: [[0.0; 3]; 3] };
    pub const IDENTITY: Mat3 = Mat3 {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    pub fn from_rows(rows: [Vec3; 3]) -> Mat3 {
        Mat3 {
            m: [rows[0].to_array(), rows[1].to_array(), rows[2].to_array()],
        }
    }

    pub fn row(&self, i: usize) -> Vec3 {
        Vec3::from(self.m[i])
    }

    pub fn col(&self, j: usize) -> Vec3 {
        vec3(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    pub fn transpose(&self) -> Mat3 {
        Mat3::from_rows([self.col(0), self.col(1), self.col(2)])
    }

    pub fn det(&self) -> f64 {
        self.row(0).dot(self.row(1).cross(self.row(2)))
    }

    pub fn inverse(&self) -> Option<Mat3> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let r0 = self.row(0);
        let r1 = self.row(1);
        let r2 = self.row(2);
        // Columns of the inverse are the reciprocal row cross products.
        let c0 = r1.cross(r2) / d;
        let c1 = r2.cross(r0) / d;
        let c2 = r0.cross(r1) / d;
        Some(Mat3::from_rows([c0, c1, c2]).transpose())
    }

    pub fn frobenius(&self) -> f64 {
        self.m
            .iter()
            .flatten()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.m
            .iter()
            .flatten()
            .fold(0.0_f64, |a, &x| a.max(x.abs()))
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, o: Mat3) -> Mat3 {
        let mut r = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] = self.m[i][j] + o.m[i][j];
            }
        }
        r
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, o: Mat3) -> Mat3 {
        let mut r = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] = self.m[i][j] - o.m[i][j];
            }
        }
        r
    }
}

impl Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, o: Mat3) -> Mat3 {
        let mut r = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] = self.row(i).dot(o.col(j));
            }
        }
        r
    }
}

impl Mul<Vec3> for Mat3 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        vec3(self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v))
    }
}

impl Mul<f64> for Mat3 {
    type Output = Mat3;
    fn mul(self, s: f64) -> Mat3 {
        let mut r = self;
        for row in r.m.iter_mut() {
            for x in row.iter_mut() {
                *x *= s;
            }
        }
        r
    }
}

/// Row-major 2x2 matrix, used for parameter-plane Jacobians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub m: [[f64; 2]; 2],
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 { m: [[1.0, 0.0], [0.0, 1.0]] };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Mat2 {
        Mat2 { m: [[a, b], [c, d]] }
    }

    pub fn det(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(Mat2::new(
            self.m[1][1] / d,
            -self.m[0][1] / d,
            -self.m[1][0] / d,
            self.m[0][0] / d,
        ))
    }

    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    pub fn mul_mat(&self, o: &Mat2) -> Mat2 {
        Mat2::new(
            self.m[0][0] * o.m[0][0] + self.m[0][1] * o.m[1][0],
            self.m[0][0] * o.m[0][1] + self.m[0][1] * o.m[1][1],
            self.m[1][0] * o.m[0][0] + self.m[1][1] * o.m[1][0],
            self.m[1][0] * o.m[0][1] + self.m[1][1] * o.m[1][1],
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.m
            .iter()
            .flatten()
            .fold(0.0_f64, |a, &x| a.max(x.abs()))
    }
}

/// Eigen-decomposition of a real 2x2 matrix with real spectrum.
/// Returns `((lambda_min, v_min), (lambda_max, v_max))` with unit vectors,
/// or `None` when the eigenvalues are complex (cannot happen for shape
/// operators of real surfaces, which are similar to symmetric matrices).
pub fn eigen2(a: &Mat2) -> Option<((f64, [f64; 2]), (f64, [f64; 2]))> {
    let tr = a.m[0][0] + a.m[1][1];
    let det = a.det();
    let disc = tr * tr / 4.0 - det;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let l1 = tr / 2.0 - s;
    let l2 = tr / 2.0 + s;
    let vec_for = |l: f64| -> [f64; 2] {
        // (A - l I) v = 0; pick the better-conditioned row.
        let r0 = [a.m[0][0] - l, a.m[0][1]];
        let r1 = [a.m[1][0], a.m[1][1] - l];
        let n0 = r0[0] * r0[0] + r0[1] * r0[1];
        let n1 = r1[0] * r1[0] + r1[1] * r1[1];
        let v = if n0 >= n1 { [-r0[1], r0[0]] } else { [-r1[1], r1[0]] };
        let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
        if n == 0.0 {
            [1.0, 0.0]
        } else {
            [v[0] / n, v[1] / n]
        }
    };
    Some(((l1, vec_for(l1)), (l2, vec_for(l2))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_and_det() {
        let a = Mat3 {
            m: [[2.0, 1.0, 0.5], [-1.0, 3.0, 0.0], [0.25, 0.0, 1.5]],
        };
        let inv = a.inverse().unwrap();
        let p = a * inv;
        assert!((p - Mat3::IDENTITY).max_abs() < 1e-14);
        assert!((a.det() * inv.det() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cross_is_orthogonal() {
        let a = vec3(1.0, 2.0, 3.0);
        let b = vec3(-0.5, 0.7, 2.0);
        let c = a.cross(b);
        assert!(c.dot(a).abs() < 1e-15);
        assert!(c.dot(b).abs() < 1e-15);
    }

    #[test]
    fn eigen_recovers_spectrum() {
        let a = Mat2::new(2.0, 1.0, 1.0, 3.0);
        let ((l1, v1), (l2, v2)) = eigen2(&a).unwrap();
        for (l, v) in [(l1, v1), (l2, v2)] {
            let av = a.mul_vec(v);
            assert!((av[0] - l * v[0]).abs() < 1e-12);
            assert!((av[1] - l * v[1]).abs() < 1e-12);
        }
        assert!(l1 <= l2);
    }
}
