//! Pointwise differential geometry of parametric surfaces: jets,
//! fundamental forms, normals, curvatures, principal directions.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jet::Jet2;
use crate::linalg::{eigen2, vec3, Mat2, Vec3};

/// Parameter rectangle `[a1,b1] x [a2,b2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub t1: (f64, f64),
    pub t2: (f64, f64),
}

impl Domain {
    pub fn new(a1: f64, b1: f64, a2: f64, b2: f64) -> Domain {
        Domain { t1: (a1, b1), t2: (a2, b2) }
    }

    pub fn extent1(&self) -> f64 {
        self.t1.1 - self.t1.0
    }

    pub fn extent2(&self) -> f64 {
        self.t2.1 - self.t2.0
    }

    pub fn contains(&self, t1: f64, t2: f64) -> bool {
        t1 >= self.t1.0 && t1 <= self.t1.1 && t2 >= self.t2.0 && t2 <= self.t2.1
    }

    /// Containment allowing an overshoot of `margin` times each extent.
    pub fn contains_with_margin(&self, t1: f64, t2: f64, margin: f64) -> bool {
        let m1 = margin * self.extent1();
        let m2 = margin * self.extent2();
        t1 >= self.t1.0 - m1
            && t1 <= self.t1.1 + m1
            && t2 >= self.t2.0 - m2
            && t2 <= self.t2.1 + m2
    }

    /// Diagonal length of the parameter rectangle.
    pub fn diameter(&self) -> f64 {
        self.extent1().hypot(self.extent2())
    }

    /// Uniform sample grid with `n1 x n2` points, shrunk by `margin`
    /// (absolute, per axis) from each edge.
    pub fn grid(&self, n1: usize, n2: usize, margin: f64) -> Vec<(f64, f64)> {
        let (a1, b1) = (self.t1.0 + margin, self.t1.1 - margin);
        let (a2, b2) = (self.t2.0 + margin, self.t2.1 - margin);
        let mut pts = Vec::with_capacity(n1 * n2);
        for i in 0..n1 {
            let u = if n1 == 1 { 0.5 } else { i as f64 / (n1 - 1) as f64 };
            for j in 0..n2 {
                let w = if n2 == 1 { 0.5 } else { j as f64 / (n2 - 1) as f64 };
                pts.push((a1 + u * (b1 - a1), a2 + w * (b2 - a2)));
            }
        }
        pts
    }
}

/// Position and partial derivatives returned by a closed-form derivative
/// supplier; the unit normal is derived afterwards.
#[derive(Debug, Clone, Copy)]
pub struct RawJet {
    pub p: Vec3,
    pub d1: Vec3,
    pub d2: Vec3,
    pub d11: Vec3,
    pub d12: Vec3,
    pub d22: Vec3,
}

/// The immersion backing a [`ParamSurface`].
///
/// `eval_jet2` must evaluate the same formula on jet scalars; surfaces with
/// hand-written partial derivatives also implement `analytic_jet`.
pub trait SurfaceMap: Send + Sync {
    fn eval(&self, t1: f64, t2: f64) -> Vec3;
    fn eval_jet2(&self, t1: Jet2, t2: Jet2) -> [Jet2; 3];
    fn analytic_jet(&self, _t1: f64, _t2: f64) -> Option<RawJet> {
        None
    }
}

/// How partial derivatives of the immersion are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMode {
    /// Closed-form partials when the surface supplies them, otherwise the
    /// (equally exact) jet evaluation.
    Analytic,
    /// Forward-mode jet evaluation.
    Dual,
    /// Central finite differences of the position map, with one-sided
    /// stencils near the domain boundary.
    FiniteDiff,
}

impl DerivativeMode {
    pub fn parse(s: &str) -> Result<DerivativeMode> {
        match s {
            "analytic" => Ok(DerivativeMode::Analytic),
            "dual" => Ok(DerivativeMode::Dual),
            "fd" => Ok(DerivativeMode::FiniteDiff),
            other => Err(Error::Config(format!(
                "unknown derivative mode `{other}` (expected analytic, dual or fd)"
            ))),
        }
    }
}

/// First and second partials of the immersion at a point, plus the unit
/// normal `n = (x,1 ^ x,2)/|x,1 ^ x,2|`.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceJet {
    pub p: Vec3,
    pub d1: Vec3,
    pub d2: Vec3,
    pub d11: Vec3,
    pub d12: Vec3,
    pub d22: Vec3,
    pub n: Vec3,
    /// |x,1 ^ x,2|, the area density.
    pub cross_norm: f64,
}

/// Coefficients of the first (E,F,G) and second (L,M,N) fundamental forms.
#[derive(Debug, Clone, Copy)]
pub struct FundamentalForms {
    pub e: f64,
    pub f: f64,
    pub g: f64,
    pub l: f64,
    pub m: f64,
    pub n: f64,
}

impl FundamentalForms {
    /// EG - F^2.
    pub fn metric_det(&self) -> f64 {
        self.e * self.g - self.f * self.f
    }

    /// Shape operator (Weingarten map) in coordinates: `I^-1 II`.
    pub fn shape_operator(&self) -> Mat2 {
        let d = self.metric_det();
        Mat2::new(
            (self.g * self.l - self.f * self.m) / d,
            (self.g * self.m - self.f * self.n) / d,
            (self.e * self.m - self.f * self.l) / d,
            (self.e * self.n - self.f * self.m) / d,
        )
    }

    /// Normal curvatures along the coordinate directions, `(L/E, N/G)`.
    /// These are the principal curvatures when the parametrization is a
    /// curvature-line net (F = M = 0), labelled positionally as the source
    /// derivations do.
    pub fn coordinate_curvatures(&self) -> (f64, f64) {
        (self.l / self.e, self.n / self.g)
    }
}

/// Principal curvatures (sorted), mean/Gaussian curvature, and the angles
/// of the principal directions in the parameter plane.
#[derive(Debug, Clone, Copy)]
pub struct CurvatureData {
    /// Smaller principal curvature.
    pub kappa1: f64,
    /// Larger principal curvature.
    pub kappa2: f64,
    pub mean: f64,
    pub gaussian: f64,
    /// Direction angle of `kappa1` in the parameter plane, in (-pi/2, pi/2].
    pub xi1: f64,
    /// Direction angle of `kappa2`.
    pub xi2: f64,
    /// Set when |kappa1 - kappa2| falls below the umbilic threshold; the
    /// reported directions are then arbitrary.
    pub umbilic: bool,
}

pub const EPS_REG_DEFAULT: f64 = 1e-10;
pub const EPS_UMBILIC_DEFAULT: f64 = 1e-7;
pub const FD_STEP_REL_DEFAULT: f64 = 1e-5;
pub const EXT_MARGIN_DEFAULT: f64 = 3.0;

/// A twice-differentiable map from a parameter rectangle into 3-space with
/// a chosen derivative mode.
#[derive(Clone)]
pub struct ParamSurface {
    map: Arc<dyn SurfaceMap>,
    pub domain: Domain,
    pub mode: DerivativeMode,
    /// Finite-difference step as a fraction of each domain extent.
    pub fd_step_rel: f64,
    /// Relative regularity threshold for |x,1 ^ x,2|.
    pub eps_reg: f64,
    /// How far beyond the domain the immersion formula may be evaluated,
    /// as a fraction of each extent (curvature-line traces overshoot).
    pub ext_margin: f64,
}

impl std::fmt::Debug for ParamSurface {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParamSurface")
            .field("domain", &self.domain)
            .field("mode", &self.mode)
            .finish()
    }
}

impl ParamSurface {
    pub fn new(map: Arc<dyn SurfaceMap>, domain: Domain) -> ParamSurface {
        ParamSurface {
            map,
            domain,
            mode: DerivativeMode::Analytic,
            fd_step_rel: FD_STEP_REL_DEFAULT,
            eps_reg: EPS_REG_DEFAULT,
            ext_margin: EXT_MARGIN_DEFAULT,
        }
    }

    pub fn with_mode(mut self, mode: DerivativeMode) -> ParamSurface {
        self.mode = mode;
        self
    }

    pub fn with_fd_step_rel(mut self, rel: f64) -> ParamSurface {
        self.fd_step_rel = rel;
        self
    }

    /// Same immersion restricted to (or re-cut onto) another rectangle.
    pub fn with_domain(&self, domain: Domain) -> ParamSurface {
        let mut s = self.clone();
        s.domain = domain;
        s
    }

    pub fn map(&self) -> &Arc<dyn SurfaceMap> {
        &self.map
    }

    pub fn position(&self, t1: f64, t2: f64) -> Vec3 {
        self.map.eval(t1, t2)
    }

    fn check_domain(&self, t1: f64, t2: f64) -> Result<()> {
        if !self.domain.contains_with_margin(t1, t2, self.ext_margin) {
            return Err(Error::DomainError {
                theta1: t1,
                theta2: t2,
                detail: format!(
                    "[{}, {}] x [{}, {}] (+{} extension)",
                    self.domain.t1.0, self.domain.t1.1, self.domain.t2.0, self.domain.t2.1,
                    self.ext_margin
                ),
            });
        }
        Ok(())
    }

    fn raw_jet(&self, t1: f64, t2: f64) -> RawJet {
        match self.mode {
            DerivativeMode::Analytic => self
                .map
                .analytic_jet(t1, t2)
                .unwrap_or_else(|| self.dual_jet(t1, t2)),
            DerivativeMode::Dual => self.dual_jet(t1, t2),
            DerivativeMode::FiniteDiff => self.fd_jet(t1, t2),
        }
    }

    fn dual_jet(&self, t1: f64, t2: f64) -> RawJet {
        let j = self.map.eval_jet2(Jet2::var1(t1), Jet2::var2(t2));
        RawJet {
            p: vec3(j[0].v, j[1].v, j[2].v),
            d1: vec3(j[0].d1, j[1].d1, j[2].d1),
            d2: vec3(j[0].d2, j[1].d2, j[2].d2),
            d11: vec3(j[0].d11, j[1].d11, j[2].d11),
            d12: vec3(j[0].d12, j[1].d12, j[2].d12),
            d22: vec3(j[0].d22, j[1].d22, j[2].d22),
        }
    }

    fn fd_jet(&self, t1: f64, t2: f64) -> RawJet {
        let h1 = self.fd_step_rel * self.domain.extent1();
        let h2 = self.fd_step_rel * self.domain.extent2();
        let m = self.ext_margin;
        let lo1 = self.domain.t1.0 - m * self.domain.extent1();
        let hi1 = self.domain.t1.1 + m * self.domain.extent1();
        let lo2 = self.domain.t2.0 - m * self.domain.extent2();
        let hi2 = self.domain.t2.1 + m * self.domain.extent2();
        let s1_d1 = first_derivative_stencil(t1, lo1, hi1, h1);
        let s2_d1 = first_derivative_stencil(t2, lo2, hi2, h2);
        let s1_d2 = second_derivative_stencil(t1, lo1, hi1, h1);
        let s2_d2 = second_derivative_stencil(t2, lo2, hi2, h2);
        let f = |a: f64, b: f64| self.map.eval(a, b);

        let mut d1 = Vec3::ZERO;
        for &(o, w) in &s1_d1 {
            d1 = d1 + f(t1 + o * h1, t2) * (w / h1);
        }
        let mut d2 = Vec3::ZERO;
        for &(o, w) in &s2_d1 {
            d2 = d2 + f(t1, t2 + o * h2) * (w / h2);
        }
        let mut d11 = Vec3::ZERO;
        for &(o, w) in &s1_d2 {
            d11 = d11 + f(t1 + o * h1, t2) * (w / (h1 * h1));
        }
        let mut d22 = Vec3::ZERO;
        for &(o, w) in &s2_d2 {
            d22 = d22 + f(t1, t2 + o * h2) * (w / (h2 * h2));
        }
        let mut d12 = Vec3::ZERO;
        for &(o1, w1) in &s1_d1 {
            for &(o2, w2) in &s2_d1 {
                d12 = d12 + f(t1 + o1 * h1, t2 + o2 * h2) * (w1 * w2 / (h1 * h2));
            }
        }
        RawJet { p: f(t1, t2), d1, d2, d11, d12, d22 }
    }

    /// Full second-order jet with unit normal.
    pub fn jet(&self, t1: f64, t2: f64) -> Result<SurfaceJet> {
        self.check_domain(t1, t2)?;
        let raw = self.raw_jet(t1, t2);
        let cross = raw.d1.cross(raw.d2);
        let cross_norm = cross.norm();
        let scale = (raw.d1.norm() * raw.d2.norm()).max(f64::MIN_POSITIVE);
        if cross_norm <= self.eps_reg * scale {
            return Err(Error::DegenerateSurface { theta1: t1, theta2: t2, cross_norm });
        }
        Ok(SurfaceJet {
            p: raw.p,
            d1: raw.d1,
            d2: raw.d2,
            d11: raw.d11,
            d12: raw.d12,
            d22: raw.d22,
            n: cross / cross_norm,
            cross_norm,
        })
    }

    pub fn forms(&self, t1: f64, t2: f64) -> Result<FundamentalForms> {
        Ok(fundamental_forms(&self.jet(t1, t2)?))
    }

    pub fn curvature(&self, t1: f64, t2: f64) -> Result<CurvatureData> {
        Ok(curvature(&self.forms(t1, t2)?))
    }
}

fn first_derivative_stencil(t: f64, lo: f64, hi: f64, h: f64) -> Vec<(f64, f64)> {
    if t - 2.0 * h >= lo && t + 2.0 * h <= hi {
        vec![(-1.0, -0.5), (1.0, 0.5)]
    } else if t + 2.0 * h <= hi {
        vec![(0.0, -1.5), (1.0, 2.0), (2.0, -0.5)]
    } else {
        vec![(0.0, 1.5), (-1.0, -2.0), (-2.0, 0.5)]
    }
}

fn second_derivative_stencil(t: f64, lo: f64, hi: f64, h: f64) -> Vec<(f64, f64)> {
    if t - 2.0 * h >= lo && t + 2.0 * h <= hi {
        vec![(-1.0, 1.0), (0.0, -2.0), (1.0, 1.0)]
    } else if t + 3.0 * h <= hi {
        vec![(0.0, 2.0), (1.0, -5.0), (2.0, 4.0), (3.0, -1.0)]
    } else {
        vec![(0.0, 2.0), (-1.0, -5.0), (-2.0, 4.0), (-3.0, -1.0)]
    }
}

/// First and second fundamental form coefficients of a jet.
pub fn fundamental_forms(jet: &SurfaceJet) -> FundamentalForms {
    FundamentalForms {
        e: jet.d1.dot(jet.d1),
        f: jet.d1.dot(jet.d2),
        g: jet.d2.dot(jet.d2),
        l: jet.d11.dot(jet.n),
        m: jet.d12.dot(jet.n),
        n: jet.d22.dot(jet.n),
    }
}

/// Principal curvatures as the (stably solved) roots of
/// `(EG-F^2) k^2 - (EN-2FM+GL) k + (LN-M^2) = 0`, with principal-direction
/// angles from the shape operator eigenvectors.
pub fn curvature(forms: &FundamentalForms) -> CurvatureData {
    let a = forms.metric_det();
    let b = -(forms.e * forms.n - 2.0 * forms.f * forms.m + forms.g * forms.l);
    let c = forms.l * forms.n - forms.m * forms.m;
    let disc = (b * b - 4.0 * a * c).max(0.0);
    let sq = disc.sqrt();
    let q = if b >= 0.0 { -(b + sq) / 2.0 } else { (-b + sq) / 2.0 };
    let (r1, r2) = if q == 0.0 {
        (0.0, 0.0)
    } else {
        (q / a, c / q)
    };
    let (kappa1, kappa2) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };

    let eps_umb = EPS_UMBILIC_DEFAULT * kappa1.abs().max(kappa2.abs()).max(1.0);
    let umbilic = (kappa2 - kappa1).abs() < eps_umb;

    let (xi1, xi2) = if umbilic {
        (0.0, std::f64::consts::FRAC_PI_2)
    } else {
        principal_direction_angles(forms, kappa1, kappa2)
    };

    CurvatureData {
        kappa1,
        kappa2,
        mean: 0.5 * (kappa1 + kappa2),
        gaussian: kappa1 * kappa2,
        xi1,
        xi2,
        umbilic,
    }
}

fn angle_of(v: [f64; 2]) -> f64 {
    let mut a = v[1].atan2(v[0]);
    if a <= -std::f64::consts::FRAC_PI_2 {
        a += std::f64::consts::PI;
    } else if a > std::f64::consts::FRAC_PI_2 {
        a -= std::f64::consts::PI;
    }
    a
}

fn principal_direction_angles(forms: &FundamentalForms, kappa1: f64, kappa2: f64) -> (f64, f64) {
    let w = forms.shape_operator();
    match eigen2(&w) {
        Some(((l_min, v_min), (_l_max, v_max))) => {
            // eigen2 sorts by eigenvalue; match to the sorted kappas.
            if (l_min - kappa1).abs() <= (l_min - kappa2).abs() {
                (angle_of(v_min), angle_of(v_max))
            } else {
                (angle_of(v_max), angle_of(v_min))
            }
        }
        None => (0.0, std::f64::consts::FRAC_PI_2),
    }
}

/// Surface defined by a jet-valued closure (exact derivatives via the jet
/// algebra; no closed-form partials).
pub struct FnSurface<F>
where
    F: Fn(Jet2, Jet2) -> [Jet2; 3] + Send + Sync,
{
    pub f: F,
}

impl<F> SurfaceMap for FnSurface<F>
where
    F: Fn(Jet2, Jet2) -> [Jet2; 3] + Send + Sync,
{
    fn eval(&self, t1: f64, t2: f64) -> Vec3 {
        let j = (self.f)(Jet2::constant(t1), Jet2::constant(t2));
        vec3(j[0].v, j[1].v, j[2].v)
    }

    fn eval_jet2(&self, t1: Jet2, t2: Jet2) -> [Jet2; 3] {
        (self.f)(t1, t2)
    }
}

/// Rigid motion `x -> R x + c` of another surface. Fundamental forms and
/// curvatures are invariant under it, which the test suites exploit.
pub struct RigidMotion {
    pub inner: Arc<dyn SurfaceMap>,
    pub rotation: crate::linalg::Mat3,
    pub translation: Vec3,
}

impl SurfaceMap for RigidMotion {
    fn eval(&self, t1: f64, t2: f64) -> Vec3 {
        self.rotation * self.inner.eval(t1, t2) + self.translation
    }

    fn eval_jet2(&self, t1: Jet2, t2: Jet2) -> [Jet2; 3] {
        let j = self.inner.eval_jet2(t1, t2);
        let mut out = [Jet2::constant(0.0); 3];
        for (i, o) in out.iter_mut().enumerate() {
            let r = self.rotation.row(i);
            *o = j[0] * r.x + j[1] * r.y + j[2] * r.z + self.translation[i];
        }
        out
    }

    fn analytic_jet(&self, t1: f64, t2: f64) -> Option<RawJet> {
        let raw = self.inner.analytic_jet(t1, t2)?;
        let r = self.rotation;
        Some(RawJet {
            p: r * raw.p + self.translation,
            d1: r * raw.d1,
            d2: r * raw.d2,
            d11: r * raw.d11,
            d12: r * raw.d12,
            d22: r * raw.d22,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat3;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn cylinder(r: f64) -> ParamSurface {
        let map = FnSurface {
            f: move |t1: Jet2, t2: Jet2| [t1.cos() * r, t1.sin() * r, t2],
        };
        ParamSurface::new(Arc::new(map), Domain::new(0.0, PI, 0.0, 4.0))
    }

    fn plane() -> ParamSurface {
        let map = FnSurface { f: |t1: Jet2, t2: Jet2| [t1, t2, Jet2::constant(0.0)] };
        ParamSurface::new(Arc::new(map), Domain::new(-1.0, 1.0, -1.0, 1.0))
    }

    fn sphere(r: f64) -> ParamSurface {
        let map = FnSurface {
            f: move |t1: Jet2, t2: Jet2| {
                [t1.cos() * t2.cos() * r, t1.sin() * t2.cos() * r, t2.sin() * r]
            },
        };
        ParamSurface::new(Arc::new(map), Domain::new(0.0, 1.0, 0.0, 1.0))
    }

    #[test]
    fn cylinder_jet_at_origin() {
        let s = cylinder(4.0);
        let j = s.jet(0.0, 0.0).unwrap();
        assert!((j.d1 - vec3(0.0, 4.0, 0.0)).norm() < 1e-14);
        assert!((j.d2 - vec3(0.0, 0.0, 1.0)).norm() < 1e-14);
        assert!((j.n - vec3(1.0, 0.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn plane_jet_is_flat() {
        let s = plane();
        let j = s.jet(0.3, -0.2).unwrap();
        assert!((j.n - vec3(0.0, 0.0, 1.0)).norm() < 1e-15);
        for d in [j.d11, j.d12, j.d22] {
            assert!(d.norm() < 1e-15);
        }
        let f = fundamental_forms(&j);
        assert_eq!((f.l, f.m, f.n), (0.0, 0.0, 0.0));
        let c = curvature(&f);
        assert_eq!((c.kappa1, c.kappa2, c.mean, c.gaussian), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn sphere_jet_matches_finite_difference_oracle() {
        // Independent oracle: central differences with h = 1e-5 on the
        // position map, compared against the exact jet.
        let s = sphere(2.0);
        let (t1, t2) = (0.3, 0.4);
        let j = s.jet(t1, t2).unwrap();
        let h = 1e-5;
        let f = |a: f64, b: f64| s.position(a, b);
        let d1 = (f(t1 + h, t2) - f(t1 - h, t2)) / (2.0 * h);
        let d2 = (f(t1, t2 + h) - f(t1, t2 - h)) / (2.0 * h);
        let d11 = (f(t1 + h, t2) - f(t1, t2) * 2.0 + f(t1 - h, t2)) / (h * h);
        let d12 = (f(t1 + h, t2 + h) - f(t1 + h, t2 - h) - f(t1 - h, t2 + h)
            + f(t1 - h, t2 - h))
            / (4.0 * h * h);
        let d22 = (f(t1, t2 + h) - f(t1, t2) * 2.0 + f(t1, t2 - h)) / (h * h);
        assert!((j.d1 - d1).norm() < 1e-9);
        assert!((j.d2 - d2).norm() < 1e-9);
        assert!((j.d11 - d11).norm() < 1e-5);
        assert!((j.d12 - d12).norm() < 1e-5);
        assert!((j.d22 - d22).norm() < 1e-5);
    }

    #[test]
    fn cylinder_forms_and_curvature() {
        let s = cylinder(4.0);
        let f = s.forms(1.0, 2.0).unwrap();
        assert!((f.e - 16.0).abs() < 1e-12);
        assert!(f.f.abs() < 1e-12);
        assert!((f.g - 1.0).abs() < 1e-12);
        assert!((f.l - (-4.0)).abs() < 1e-12);
        assert!(f.m.abs() < 1e-12);
        assert!(f.n.abs() < 1e-12);
        let c = curvature(&f);
        assert!((c.kappa1 - (-0.25)).abs() < 1e-13);
        assert!(c.kappa2.abs() < 1e-13);
        assert!((c.xi1 - 0.0).abs() < 1e-12);
        assert!((c.xi2 - FRAC_PI_2).abs() < 1e-12);
        assert!(!c.umbilic);
    }

    #[test]
    fn sphere_curvature_umbilic() {
        // Oracle: closed-form roots of the characteristic quadratic for the
        // analytic forms of a radius-2 sphere patch. The n = x,1 ^ x,2
        // convention points outward for t2 in (0, pi/2), so both
        // curvatures come out -1/2.
        let s = sphere(2.0);
        let c = s.curvature(0.3, 0.4).unwrap();
        assert!((c.kappa1 + 0.5).abs() < 1e-10);
        assert!((c.kappa2 + 0.5).abs() < 1e-10);
        assert!(c.umbilic);
        assert!((c.mean + 0.5).abs() < 1e-10);
        assert!((c.gaussian - 0.25).abs() < 1e-10);
    }

    // Saddle-ish tube, umbilic-free on the sampled patch.
    fn bumpy_tube() -> ParamSurface {
        let map = FnSurface {
            f: |t1: Jet2, t2: Jet2| {
                let r = (t2 * 0.4).sin() * 0.3 + 2.0;
                [r * t1.cos(), r * t1.sin(), t2]
            },
        };
        ParamSurface::new(Arc::new(map), Domain::new(0.0, 2.0, 0.0, 3.0))
    }

    #[test]
    fn mean_gaussian_consistency_and_char_poly() {
        let s = sphere(2.0);
        for (t1, t2) in s.domain.grid(7, 7, 1e-3) {
            let f = s.forms(t1, t2).unwrap();
            let c = curvature(&f);
            assert!((c.mean - 0.5 * (c.kappa1 + c.kappa2)).abs() < 1e-10);
            assert!((c.gaussian - c.kappa1 * c.kappa2).abs() < 1e-10);
            let a = f.metric_det();
            let b = -(f.e * f.n - 2.0 * f.f * f.m + f.g * f.l);
            let cc = f.l * f.n - f.m * f.m;
            for k in [c.kappa1, c.kappa2] {
                let res = (a * k * k + b * k + cc).abs();
                assert!(res < 1e-8 * cc.abs().max(1.0));
            }
        }
    }

    #[test]
    fn frame_orthogonality() {
        let s = sphere(2.0);
        for (t1, t2) in s.domain.grid(9, 9, 1e-3) {
            let j = s.jet(t1, t2).unwrap();
            assert!((j.n.norm() - 1.0).abs() < 1e-12);
            assert!(j.n.dot(j.d1).abs() < 1e-10 * j.d1.norm());
            assert!(j.n.dot(j.d2).abs() < 1e-10 * j.d2.norm());
        }
    }

    #[test]
    fn analytic_and_fd_modes_agree_quadratically() {
        // Truncation of the FD jet is O(h^2); check the constant by halving h.
        let s = sphere(2.0);
        let (t1, t2) = (0.5, 0.5);
        let exact = s.forms(t1, t2).unwrap();
        let err = |rel: f64| {
            let fd = s.clone().with_mode(DerivativeMode::FiniteDiff).with_fd_step_rel(rel);
            let f = fd.forms(t1, t2).unwrap();
            (f.e - exact.e)
                .abs()
                .max((f.l - exact.l).abs())
                .max((f.n - exact.n).abs())
        };
        let e1 = err(1e-3);
        let e2 = err(5e-4);
        // Quarter the error for half the step, within slack for roundoff.
        assert!(e2 < e1 / 2.5, "e1 = {e1:.3e}, e2 = {e2:.3e}");
        assert!(e1 < 1e-4);
    }

    #[test]
    fn fd_one_sided_near_boundary() {
        let s = cylinder(4.0).with_mode(DerivativeMode::FiniteDiff);
        let mut s = s;
        s.ext_margin = 0.0; // force one-sided stencils at the edge
        let f = s.forms(0.0, 0.0).unwrap();
        assert!((f.e - 16.0).abs() < 1e-6);
        assert!((f.l - (-4.0)).abs() < 1e-4);
    }

    #[test]
    fn degenerate_surface_detected() {
        let map = FnSurface { f: |t1: Jet2, t2: Jet2| [t1 + t2, t1 + t2, Jet2::constant(0.0)] };
        let s = ParamSurface::new(Arc::new(map), Domain::new(0.0, 1.0, 0.0, 1.0));
        match s.jet(0.5, 0.5) {
            Err(Error::DegenerateSurface { .. }) => {}
            other => panic!("expected DegenerateSurface, got {other:?}"),
        }
    }

    #[test]
    fn rigid_motion_leaves_forms_invariant() {
        // Individual principal curvatures are ill-conditioned at umbilics,
        // so use an umbilic-free surface here.
        let base = bumpy_tube();
        let angle: f64 = 0.7;
        let rot = Mat3 {
            m: [
                [angle.cos(), -angle.sin(), 0.0],
                [angle.sin(), angle.cos(), 0.0],
                [0.0, 0.0, 1.0],
            ],
        };
        let moved = ParamSurface::new(
            Arc::new(RigidMotion {
                inner: base.map().clone(),
                rotation: rot,
                translation: vec3(1.0, -2.0, 0.5),
            }),
            base.domain,
        );
        for (t1, t2) in base.domain.grid(5, 5, 1e-3) {
            let f0 = base.forms(t1, t2).unwrap();
            let f1 = moved.forms(t1, t2).unwrap();
            for (a, b) in [
                (f0.e, f1.e),
                (f0.f, f1.f),
                (f0.g, f1.g),
                (f0.l, f1.l),
                (f0.m, f1.m),
                (f0.n, f1.n),
            ] {
                assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
            }
            let c0 = curvature(&f0);
            let c1 = curvature(&f1);
            assert!((c0.kappa1 - c1.kappa1).abs() < 1e-9);
            assert!((c0.kappa2 - c1.kappa2).abs() < 1e-9);
        }
    }

    #[test]
    fn out_of_range_point_rejected() {
        let s = cylinder(4.0);
        assert!(matches!(
            s.jet(100.0, 0.0),
            Err(Error::DomainError { .. })
        ));
    }
}
