//! Assembly of the growth tensor field that morphs a reference midsurface
//! into a target midsurface stress-free.
//!
//! When the target's coordinate curves already form a curvature-line net
//! the field is diagonal in the reference frame and determined directly by
//! the target's fundamental forms. Otherwise the deformation is composed
//! through an intermediate configuration: re-cut the reference onto the
//! eta domain (deformation gradient `F0`), grow it onto the target with a
//! curvature-line-aligned tensor (`G1`), and pull the product back with
//! the rotation `Q`, so that `G1 F0 = Q G` holds identically.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{Mat2, Mat3, Vec3};
use crate::net::{intermediate_surface, CurvatureNet, IntermediateSurface, NetConfig};
use crate::surface::{FundamentalForms, ParamSurface, SurfaceJet};

/// Midsurface stretches and their through-thickness gradients along the
/// two principal coordinate directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthFunctions {
    /// lambda_1 at the base surface (dimensionless stretch, > 0).
    pub l10: f64,
    pub l20: f64,
    /// Through-thickness gradient of lambda_1 (1/length).
    pub l11: f64,
    pub l21: f64,
}

impl GrowthFunctions {
    /// Combined stretch lambda_1(Z).
    pub fn lambda1(&self, z: f64) -> f64 {
        self.l10 + z * self.l11
    }

    pub fn lambda2(&self, z: f64) -> f64 {
        self.l20 + z * self.l21
    }

    /// Both combined stretches positive across the thickness [0, 2h].
    pub fn admissible(&self, two_h: f64) -> bool {
        self.lambda1(0.0) > 0.0
            && self.lambda2(0.0) > 0.0
            && self.lambda1(two_h) > 0.0
            && self.lambda2(two_h) > 0.0
    }
}

/// Reference-surface quantities entering the growth formulas, with the
/// curvatures labelled positionally (along the theta1/theta2 coordinate
/// directions: `L_r/E_r` and `N_r/G_r`).
#[derive(Debug, Clone, Copy)]
pub struct RefGeom {
    pub e: f64,
    pub g: f64,
    pub kappa1: f64,
    pub kappa2: f64,
}

impl RefGeom {
    pub fn from_forms(f: &FundamentalForms) -> RefGeom {
        let (kappa1, kappa2) = f.coordinate_curvatures();
        RefGeom { e: f.e, g: f.g, kappa1, kappa2 }
    }
}

/// Relative thresholds below which a parametrization counts as a
/// curvature-line net.
pub const CURVATURE_NET_TOL_F: f64 = 1e-9;
pub const CURVATURE_NET_TOL_M: f64 = 1e-9;

fn check_curvature_net(tgt: &FundamentalForms) -> Result<()> {
    let f_rel = tgt.f.abs() / (tgt.e * tgt.g).sqrt();
    let m_rel = tgt.m.abs() / (tgt.l.abs() + tgt.n.abs() + 1e-30);
    if f_rel >= CURVATURE_NET_TOL_F || m_rel >= CURVATURE_NET_TOL_M {
        return Err(Error::NotCurvatureNet {
            detail: format!("|F|/sqrt(EG) = {f_rel:.3e}, |M|/(|L|+|N|) = {m_rel:.3e}"),
        });
    }
    Ok(())
}

/// Growth functions for a target already parametrized by curvature lines:
/// the midsurface stretches reproduce the target metric and the gradients
/// its bending, relative to the reference curvatures.
pub fn growth_functions_special(
    ref_geom: &RefGeom,
    tgt: &FundamentalForms,
) -> Result<GrowthFunctions> {
    check_curvature_net(tgt)?;
    let l10 = tgt.e.sqrt();
    let l20 = tgt.g.sqrt();
    let l11 = (ref_geom.kappa1 - tgt.l / tgt.e) * l10;
    let l21 = (ref_geom.kappa2 - tgt.n / tgt.g) * l20;
    Ok(GrowthFunctions { l10, l20, l11, l21 })
}

/// Frame data of a curvature-line chart at a point.
#[derive(Debug, Clone, Copy)]
pub struct ChartFrame {
    pub g1: Vec3,
    pub g2: Vec3,
    pub n: Vec3,
    pub e: f64,
    pub g: f64,
    pub kappa1: f64,
    pub kappa2: f64,
}

impl ChartFrame {
    pub fn from_jet(jet: &SurfaceJet) -> ChartFrame {
        let f = crate::surface::fundamental_forms(jet);
        let (kappa1, kappa2) = f.coordinate_curvatures();
        ChartFrame { g1: jet.d1, g2: jet.d2, n: jet.n, e: f.e, g: f.g, kappa1, kappa2 }
    }

    /// Contravariant basis vectors (orthogonal chart).
    pub fn g_up1(&self) -> Vec3 {
        self.g1 / self.e
    }

    pub fn g_up2(&self) -> Vec3 {
        self.g2 / self.g
    }

    /// Unit tangent frame.
    pub fn ghat1(&self) -> Vec3 {
        self.g1 / self.e.sqrt()
    }

    pub fn ghat2(&self) -> Vec3 {
        self.g2 / self.g.sqrt()
    }
}

fn shifter_factor(kappa: f64, z: f64) -> Result<f64> {
    let s = 1.0 - kappa * z;
    if s <= 0.0 {
        return Err(Error::ThicknessSingularity { kappa, z });
    }
    Ok(s)
}

/// The growth tensor field, evaluable pointwise in the mixed reference
/// frame `g_a (x) g^b` plus `n (x) n`.
#[derive(Clone)]
pub enum GrowthTensor {
    Special { reference: ParamSurface, target: ParamSurface },
    General(Arc<GeneralGrowth>),
}

/// Data of the two-step (general-case) construction.
pub struct GeneralGrowth {
    pub reference: ParamSurface,
    pub target: ParamSurface,
    pub net: Arc<CurvatureNet>,
    pub intermediate: IntermediateSurface,
}

/// Everything Z-independent about the growth tensor at one theta point.
pub struct PreparedGrowth {
    /// Reference frame at theta.
    pub frame: ChartFrame,
    /// Growth functions of the acting step, in its curvature-line chart
    /// (theta for the direct path, eta for the two-step path).
    pub lambda: GrowthFunctions,
    inner: PreparedInner,
}

enum PreparedInner {
    Special,
    General(Box<PreparedGeneral>),
}

struct PreparedGeneral {
    eta: [f64; 2],
    jac: Mat2,
    /// Frame of the intermediate surface at eta (kappa* positional).
    frame_eta: ChartFrame,
}

impl GrowthTensor {
    pub fn is_special(&self) -> bool {
        matches!(self, GrowthTensor::Special { .. })
    }

    pub fn reference(&self) -> &ParamSurface {
        match self {
            GrowthTensor::Special { reference, .. } => reference,
            GrowthTensor::General(g) => &g.reference,
        }
    }

    pub fn target(&self) -> &ParamSurface {
        match self {
            GrowthTensor::Special { target, .. } => target,
            GrowthTensor::General(g) => &g.target,
        }
    }

    /// Precompute the Z-independent data at a theta point.
    pub fn prepare(&self, t1: f64, t2: f64) -> Result<PreparedGrowth> {
        match self {
            GrowthTensor::Special { reference, target } => {
                let ref_jet = reference.jet(t1, t2)?;
                let frame = ChartFrame::from_jet(&ref_jet);
                let tgt_forms = target.forms(t1, t2)?;
                let ref_geom =
                    RefGeom { e: frame.e, g: frame.g, kappa1: frame.kappa1, kappa2: frame.kappa2 };
                let lambda = growth_functions_special(&ref_geom, &tgt_forms)?;
                Ok(PreparedGrowth { frame, lambda, inner: PreparedInner::Special })
            }
            GrowthTensor::General(gg) => {
                let ref_jet = gg.reference.jet(t1, t2)?;
                let frame = ChartFrame::from_jet(&ref_jet);
                let p = gg.net.point(t1, t2, false)?;
                let inv = p.jac.inverse().ok_or_else(|| Error::NonBijective {
                    detail: format!("singular net Jacobian at ({t1}, {t2})"),
                })?;
                let eta_jet = gg.intermediate.eta_surface.jet(p.eta[0], p.eta[1])?;
                let frame_eta = ChartFrame::from_jet(&eta_jet);
                let tgt_forms = gg.target.forms(t1, t2)?;
                // First and second forms of the target along the eta
                // directions d_a (columns of dtheta/deta).
                let quad_i = |a: [f64; 2], b: [f64; 2]| {
                    tgt_forms.e * a[0] * b[0]
                        + tgt_forms.f * (a[0] * b[1] + a[1] * b[0])
                        + tgt_forms.g * a[1] * b[1]
                };
                let quad_ii = |a: [f64; 2], b: [f64; 2]| {
                    tgt_forms.l * a[0] * b[0]
                        + tgt_forms.m * (a[0] * b[1] + a[1] * b[0])
                        + tgt_forms.n * a[1] * b[1]
                };
                let d1 = [inv.m[0][0], inv.m[1][0]];
                let d2 = [inv.m[0][1], inv.m[1][1]];
                let e_t = quad_i(d1, d1);
                let g_t = quad_i(d2, d2);
                // Normal curvatures along the eta directions; these are the
                // target's principal curvatures since the eta curves are
                // curvature lines.
                let kappa1_t = quad_ii(d1, d1) / e_t;
                let kappa2_t = quad_ii(d2, d2) / g_t;
                let l10 = e_t.sqrt();
                let l20 = g_t.sqrt();
                let lambda = GrowthFunctions {
                    l10,
                    l20,
                    l11: (frame_eta.kappa1 - kappa1_t) * l10,
                    l21: (frame_eta.kappa2 - kappa2_t) * l20,
                };
                Ok(PreparedGrowth {
                    frame,
                    lambda,
                    inner: PreparedInner::General(Box::new(PreparedGeneral {
                        eta: p.eta,
                        jac: p.jac,
                        frame_eta,
                    })),
                })
            }
        }
    }

    /// Mixed-frame components at (theta, Z).
    pub fn mixed(&self, t1: f64, t2: f64, z: f64) -> Result<[[f64; 3]; 3]> {
        self.prepare(t1, t2)?.mixed(z)
    }

    /// Spatial 3x3 tensor at (theta, Z).
    pub fn spatial(&self, t1: f64, t2: f64, z: f64) -> Result<Mat3> {
        self.prepare(t1, t2)?.spatial(z)
    }
}

impl PreparedGrowth {
    pub fn eta(&self) -> Option<[f64; 2]> {
        match &self.inner {
            PreparedInner::Special => None,
            PreparedInner::General(g) => Some(g.eta),
        }
    }

    pub fn net_jac(&self) -> Option<Mat2> {
        match &self.inner {
            PreparedInner::Special => None,
            PreparedInner::General(g) => Some(g.jac),
        }
    }

    /// Mixed-frame components on `g_a (x) g^b` and `n (x) n` at Z, exact
    /// in the thickness coordinate.
    pub fn mixed(&self, z: f64) -> Result<[[f64; 3]; 3]> {
        let mut out = [[0.0; 3]; 3];
        out[2][2] = 1.0;
        match &self.inner {
            PreparedInner::Special => {
                shifter_factor(self.frame.kappa1, z)?;
                shifter_factor(self.frame.kappa2, z)?;
                out[0][0] = self.lambda.lambda1(z) / self.frame.e.sqrt();
                out[1][1] = self.lambda.lambda2(z) / self.frame.g.sqrt();
            }
            PreparedInner::General(gg) => {
                let c = [
                    self.lambda.lambda1(z) / gg.frame_eta.e.sqrt(),
                    self.lambda.lambda2(z) / gg.frame_eta.g.sqrt(),
                ];
                let k_star = [gg.frame_eta.kappa1, gg.frame_eta.kappa2];
                let k_ref = [self.frame.kappa1, self.frame.kappa2];
                for a in 0..2 {
                    for b in 0..2 {
                        let num = shifter_factor(k_star[a], z)?;
                        let den = shifter_factor(k_ref[b], z)?;
                        out[a][b] = c[a] * (num / den) * gg.jac.m[a][b];
                    }
                }
            }
        }
        Ok(out)
    }

    /// First-order decomposition (G0, G1) of the mixed components; exact
    /// for the direct path, first Taylor coefficients in Z for the
    /// two-step path.
    pub fn mixed_g0_g1(&self) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
        let mut g0 = [[0.0; 3]; 3];
        let mut g1 = [[0.0; 3]; 3];
        g0[2][2] = 1.0;
        match &self.inner {
            PreparedInner::Special => {
                g0[0][0] = self.lambda.l10 / self.frame.e.sqrt();
                g0[1][1] = self.lambda.l20 / self.frame.g.sqrt();
                g1[0][0] = self.lambda.l11 / self.frame.e.sqrt();
                g1[1][1] = self.lambda.l21 / self.frame.g.sqrt();
            }
            PreparedInner::General(gg) => {
                let se = gg.frame_eta.e.sqrt();
                let sg = gg.frame_eta.g.sqrt();
                let c0 = [self.lambda.l10 / se, self.lambda.l20 / sg];
                let c1 = [self.lambda.l11 / se, self.lambda.l21 / sg];
                let k_star = [gg.frame_eta.kappa1, gg.frame_eta.kappa2];
                let k_ref = [self.frame.kappa1, self.frame.kappa2];
                for a in 0..2 {
                    for b in 0..2 {
                        g0[a][b] = c0[a] * gg.jac.m[a][b];
                        // d/dZ of c_a(Z) (1 - k*_a Z)/(1 - k_b Z) at Z = 0.
                        g1[a][b] = (c1[a] + c0[a] * (k_ref[b] - k_star[a])) * gg.jac.m[a][b];
                    }
                }
            }
        }
        (g0, g1)
    }

    fn assemble(&self, comps: &[[f64; 3]; 3]) -> Mat3 {
        let f = &self.frame;
        let basis_lo = [f.g1, f.g2, f.n];
        let basis_up = [f.g_up1(), f.g_up2(), f.n];
        let mut m = Mat3::ZERO;
        for a in 0..3 {
            for b in 0..3 {
                if comps[a][b] != 0.0 {
                    m = m + basis_lo[a].outer(basis_up[b]) * comps[a][b];
                }
            }
        }
        m
    }

    pub fn spatial(&self, z: f64) -> Result<Mat3> {
        Ok(self.assemble(&self.mixed(z)?))
    }

    /// Spatial tensor from the first-order decomposition G0 + Z G1.
    pub fn spatial_taylor(&self, z: f64) -> Mat3 {
        let (g0, g1) = self.mixed_g0_g1();
        let mut comps = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                comps[a][b] = g0[a][b] + z * g1[a][b];
            }
        }
        self.assemble(&comps)
    }
}

/// View of the two-step deformation at a point: first-step deformation
/// gradient `F0`, second-step growth `G1`, and the rotation `Q` with
/// `G1 F0 = Q G`.
pub struct DeformationMaps {
    inner: Arc<GeneralGrowth>,
}

impl DeformationMaps {
    fn prepared(&self, t1: f64, t2: f64) -> Result<PreparedGrowth> {
        GrowthTensor::General(self.inner.clone()).prepare(t1, t2)
    }

    pub fn f0(&self, t1: f64, t2: f64, z: f64) -> Result<Mat3> {
        let p = self.prepared(t1, t2)?;
        let PreparedInner::General(gg) = &p.inner else { unreachable!() };
        let basis_eta = [gg.frame_eta.g1, gg.frame_eta.g2, gg.frame_eta.n];
        let basis_ref_up = [p.frame.g_up1(), p.frame.g_up2(), p.frame.n];
        let k_star = [gg.frame_eta.kappa1, gg.frame_eta.kappa2];
        let k_ref = [p.frame.kappa1, p.frame.kappa2];
        let mut m = basis_eta[2].outer(basis_ref_up[2]);
        for a in 0..2 {
            for b in 0..2 {
                let num = shifter_factor(k_star[a], z)?;
                let den = shifter_factor(k_ref[b], z)?;
                m = m + basis_eta[a].outer(basis_ref_up[b]) * ((num / den) * gg.jac.m[a][b]);
            }
        }
        Ok(m)
    }

    pub fn g1(&self, t1: f64, t2: f64, z: f64) -> Result<Mat3> {
        let p = self.prepared(t1, t2)?;
        let PreparedInner::General(gg) = &p.inner else { unreachable!() };
        shifter_factor(gg.frame_eta.kappa1, z)?;
        shifter_factor(gg.frame_eta.kappa2, z)?;
        let f = &gg.frame_eta;
        let c1 = p.lambda.lambda1(z) / f.e.sqrt();
        let c2 = p.lambda.lambda2(z) / f.g.sqrt();
        Ok(f.g1.outer(f.g_up1()) * c1 + f.g2.outer(f.g_up2()) * c2 + f.n.outer(f.n))
    }

    pub fn q(&self, t1: f64, t2: f64) -> Result<Mat3> {
        let p = self.prepared(t1, t2)?;
        let PreparedInner::General(gg) = &p.inner else { unreachable!() };
        Ok(gg.frame_eta.g1.outer(p.frame.g_up1())
            + gg.frame_eta.g2.outer(p.frame.g_up2())
            + gg.frame_eta.n.outer(p.frame.n))
    }

    /// Max-entry residual of the composition identity G1 F0 = Q G.
    pub fn composition_residual(&self, t1: f64, t2: f64, z: f64) -> Result<f64> {
        let f0 = self.f0(t1, t2, z)?;
        let g1 = self.g1(t1, t2, z)?;
        let q = self.q(t1, t2)?;
        let g = GrowthTensor::General(self.inner.clone()).spatial(t1, t2, z)?;
        Ok((g1 * f0 - q * g).max_abs())
    }
}

/// Direct-path growth field for a target already in curvature-line
/// coordinates. Fails with `NotCurvatureNet` (probed on a sample grid)
/// if it is not.
pub fn growth_special(reference: &ParamSurface, target: &ParamSurface) -> Result<GrowthTensor> {
    for (t1, t2) in target.domain.grid(12, 12, 1e-9 * target.domain.diameter()) {
        check_curvature_net(&target.forms(t1, t2)?)?;
        check_curvature_net(&reference.forms(t1, t2)?).map_err(|_| Error::NotCurvatureNet {
            detail: "reference parametrization is not a curvature-line net".into(),
        })?;
    }
    Ok(GrowthTensor::Special { reference: reference.clone(), target: target.clone() })
}

/// Two-step growth field through the intermediate configuration defined
/// by `net`.
pub fn growth_general(
    reference: &ParamSurface,
    target: &ParamSurface,
    net: Arc<CurvatureNet>,
) -> Result<(DeformationMaps, GrowthTensor)> {
    for (t1, t2) in reference.domain.grid(8, 8, 1e-9 * reference.domain.diameter()) {
        check_curvature_net(&reference.forms(t1, t2)?).map_err(|_| Error::NotCurvatureNet {
            detail: "reference parametrization is not a curvature-line net".into(),
        })?;
    }
    let intermediate = intermediate_surface(reference, net.clone())?;
    let inner = Arc::new(GeneralGrowth {
        reference: reference.clone(),
        target: target.clone(),
        net,
        intermediate,
    });
    Ok((DeformationMaps { inner: inner.clone() }, GrowthTensor::General(inner)))
}

/// Which construction produced a designed growth field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthPath {
    Special,
    General,
}

/// A designed growth field with its provenance.
pub struct DesignedField {
    pub reference: ParamSurface,
    pub target: ParamSurface,
    pub growth: GrowthTensor,
    pub maps: Option<DeformationMaps>,
    pub net: Option<Arc<CurvatureNet>>,
    pub path: GrowthPath,
}

/// Route between the direct and two-step constructions on the
/// curvature-line test, building a numeric net if no closed form is given.
pub fn design_growth(
    reference: &ParamSurface,
    target: &ParamSurface,
    closed_net: Option<Arc<CurvatureNet>>,
    net_cfg: &NetConfig,
) -> Result<DesignedField> {
    match growth_special(reference, target) {
        Ok(growth) => Ok(DesignedField {
            reference: reference.clone(),
            target: target.clone(),
            growth,
            maps: None,
            net: None,
            path: GrowthPath::Special,
        }),
        Err(Error::NotCurvatureNet { .. }) => {
            let net = match closed_net {
                Some(n) => n,
                None => Arc::new(crate::net::build_net_numeric(target, net_cfg)?),
            };
            let (maps, growth) = growth_general(reference, target, net.clone())?;
            Ok(DesignedField {
                reference: reference.clone(),
                target: target.clone(),
                growth,
                maps: Some(maps),
                net: Some(net),
                path: GrowthPath::General,
            })
        }
        Err(e) => Err(e),
    }
}
