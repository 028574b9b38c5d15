//! Second-order two-variable jets for forward-mode differentiation.
//!
//! A [`Jet2`] carries a value together with its first and second partial
//! derivatives with respect to two independent variables. Evaluating a
//! surface formula on jets seeded at a parameter point yields the exact
//! position, tangents and second derivatives in one pass, so curvature
//! data never depends on finite-difference step choices.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Value plus first/second partials with respect to two variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
    pub d11: f64,
    pub d12: f64,
    pub d22: f64,
}

impl Jet2 {
    pub const fn constant(v: f64) -> Self {
        Jet2 { v, d1: 0.0, d2: 0.0, d11: 0.0, d12: 0.0, d22: 0.0 }
    }

    /// Seed for the first independent variable.
    pub const fn var1(v: f64) -> Self {
        Jet2 { v, d1: 1.0, d2: 0.0, d11: 0.0, d12: 0.0, d22: 0.0 }
    }

    /// Seed for the second independent variable.
    pub const fn var2(v: f64) -> Self {
        Jet2 { v, d1: 0.0, d2: 1.0, d11: 0.0, d12: 0.0, d22: 0.0 }
    }

    /// Chain rule through a scalar function with value `f`, derivative `df`
    /// and second derivative `ddf` at `self.v`.
    fn lift(self, f: f64, df: f64, ddf: f64) -> Self {
        Jet2 {
            v: f,
            d1: df * self.d1,
            d2: df * self.d2,
            d11: ddf * self.d1 * self.d1 + df * self.d11,
            d12: ddf * self.d1 * self.d2 + df * self.d12,
            d22: ddf * self.d2 * self.d2 + df * self.d22,
        }
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.lift(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.lift(c, -s, -c)
    }

    pub fn sinh(self) -> Self {
        self.lift(self.v.sinh(), self.v.cosh(), self.v.sinh())
    }

    pub fn cosh(self) -> Self {
        self.lift(self.v.cosh(), self.v.sinh(), self.v.cosh())
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.lift(e, e, e)
    }

    pub fn ln(self) -> Self {
        self.lift(self.v.ln(), 1.0 / self.v, -1.0 / (self.v * self.v))
    }

    pub fn sqrt(self) -> Self {
        let r = self.v.sqrt();
        self.lift(r, 0.5 / r, -0.25 / (r * r * r))
    }

    /// Inverse hyperbolic sine.
    pub fn asinh(self) -> Self {
        let w = (1.0 + self.v * self.v).sqrt();
        self.lift(self.v.asinh(), 1.0 / w, -self.v / (w * w * w))
    }

    pub fn powi(self, n: i32) -> Self {
        let f = self.v.powi(n);
        let df = f64::from(n) * self.v.powi(n - 1);
        let ddf = f64::from(n) * f64::from(n - 1) * self.v.powi(n - 2);
        self.lift(f, df, ddf)
    }

    pub fn powf(self, p: f64) -> Self {
        let f = self.v.powf(p);
        let df = p * self.v.powf(p - 1.0);
        let ddf = p * (p - 1.0) * self.v.powf(p - 2.0);
        self.lift(f, df, ddf)
    }

    pub fn abs(self) -> Self {
        if self.v < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn recip(self) -> Self {
        Jet2::constant(1.0) / self
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v + o.v,
            d1: self.d1 + o.d1,
            d2: self.d2 + o.d2,
            d11: self.d11 + o.d11,
            d12: self.d12 + o.d12,
            d22: self.d22 + o.d22,
        }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v - o.v,
            d1: self.d1 - o.d1,
            d2: self.d2 - o.d2,
            d11: self.d11 - o.d11,
            d12: self.d12 - o.d12,
            d22: self.d22 - o.d22,
        }
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + self.v * o.d2,
            d11: self.d11 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d11,
            d12: self.d12 * o.v + self.d1 * o.d2 + self.d2 * o.d1 + self.v * o.d12,
            d22: self.d22 * o.v + 2.0 * self.d2 * o.d2 + self.v * o.d22,
        }
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    fn div(self, o: Jet2) -> Jet2 {
        // f/g = f * g^-1 with g^-1 lifted through 1/x.
        let inv = o.lift(1.0 / o.v, -1.0 / (o.v * o.v), 2.0 / (o.v * o.v * o.v));
        self * inv
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        Jet2 {
            v: -self.v,
            d1: -self.d1,
            d2: -self.d2,
            d11: -self.d11,
            d12: -self.d12,
            d22: -self.d22,
        }
    }
}

impl Add<f64> for Jet2 {
    type Output = Jet2;
    fn add(self, c: f64) -> Jet2 {
        Jet2 { v: self.v + c, ..self }
    }
}

impl Sub<f64> for Jet2 {
    type Output = Jet2;
    fn sub(self, c: f64) -> Jet2 {
        Jet2 { v: self.v - c, ..self }
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(self, c: f64) -> Jet2 {
        Jet2 {
            v: self.v * c,
            d1: self.d1 * c,
            d2: self.d2 * c,
            d11: self.d11 * c,
            d12: self.d12 * c,
            d22: self.d22 * c,
        }
    }
}

impl Div<f64> for Jet2 {
    type Output = Jet2;
    fn div(self, c: f64) -> Jet2 {
        self * (1.0 / c)
    }
}

/// Scalar abstraction so one formula body evaluates both plain values and
/// jets. Catalog surfaces and the expression evaluator are generic over it.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn from_f64(c: f64) -> Self;
    fn value(self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sinh(self) -> Self;
    fn cosh(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn asinh(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powf(self, p: f64) -> Self;
    fn abs(self) -> Self;
}

impl Scalar for f64 {
    fn from_f64(c: f64) -> Self {
        c
    }
    fn value(self) -> f64 {
        self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sinh(self) -> Self {
        f64::sinh(self)
    }
    fn cosh(self) -> Self {
        f64::cosh(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn asinh(self) -> Self {
        f64::asinh(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
}

impl Scalar for Jet2 {
    fn from_f64(c: f64) -> Self {
        Jet2::constant(c)
    }
    fn value(self) -> f64 {
        self.v
    }
    fn sin(self) -> Self {
        Jet2::sin(self)
    }
    fn cos(self) -> Self {
        Jet2::cos(self)
    }
    fn sinh(self) -> Self {
        Jet2::sinh(self)
    }
    fn cosh(self) -> Self {
        Jet2::cosh(self)
    }
    fn exp(self) -> Self {
        Jet2::exp(self)
    }
    fn ln(self) -> Self {
        Jet2::ln(self)
    }
    fn sqrt(self) -> Self {
        Jet2::sqrt(self)
    }
    fn asinh(self) -> Self {
        Jet2::asinh(self)
    }
    fn powi(self, n: i32) -> Self {
        Jet2::powi(self, n)
    }
    fn powf(self, p: f64) -> Self {
        Jet2::powf(self, p)
    }
    fn abs(self) -> Self {
        Jet2::abs(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    // f(u, w) = sin(u*w) + exp(u)/sqrt(1+w^2), checked against hand partials.
    fn sample(u: f64, w: f64) -> Jet2 {
        let a = Jet2::var1(u);
        let b = Jet2::var2(w);
        (a * b).sin() + a.exp() / (b * b + 1.0).sqrt()
    }

    #[test]
    fn jet_matches_hand_derivatives() {
        let (u, w) = (0.7, -0.4);
        let j = sample(u, w);
        let s = (u * w).sin();
        let c = (u * w).cos();
        let q = (1.0 + w * w).sqrt();
        assert!(close(j.v, s + u.exp() / q, 1e-15));
        assert!(close(j.d1, w * c + u.exp() / q, 1e-14));
        assert!(close(j.d2, u * c - u.exp() * w / (q * q * q), 1e-14));
        assert!(close(j.d11, -w * w * s + u.exp() / q, 1e-13));
        assert!(close(j.d12, c - u * w * s - u.exp() * w / (q * q * q), 1e-13));
        let d22 = -u * u * s + u.exp() * (2.0 * w * w - 1.0) / (q * q * q * q * q);
        assert!(close(j.d22, d22, 1e-13));
    }

    #[test]
    fn jet_agrees_with_finite_differences() {
        let (u, w) = (0.3, 1.1);
        let h = 1e-5;
        let f = |u: f64, w: f64| sample(u, w).v;
        let j = sample(u, w);
        assert!(close(j.d1, (f(u + h, w) - f(u - h, w)) / (2.0 * h), 1e-9));
        assert!(close(j.d2, (f(u, w + h) - f(u, w - h)) / (2.0 * h), 1e-9));
        assert!(close(j.d11, (f(u + h, w) - 2.0 * f(u, w) + f(u - h, w)) / (h * h), 1e-5));
        let mixed = (f(u + h, w + h) - f(u + h, w - h) - f(u - h, w + h) + f(u - h, w - h))
            / (4.0 * h * h);
        assert!(close(j.d12, mixed, 1e-5));
    }

    #[test]
    fn asinh_and_powf_round_trip() {
        let x = Jet2::var1(0.9);
        let y = x.sinh().asinh();
        assert!(close(y.v, 0.9, 1e-14));
        assert!(close(y.d1, 1.0, 1e-12));
        assert!((y.d11).abs() < 1e-12);
        let p = x.powf(2.5);
        let q = (x.ln() * 2.5).exp();
        assert!(close(p.v, q.v, 1e-14));
        assert!(close(p.d1, q.d1, 1e-13));
        assert!(close(p.d11, q.d11, 1e-12));
    }
}
