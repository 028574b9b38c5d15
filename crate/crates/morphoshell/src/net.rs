//! Reparametrization of a target surface so that its coordinate curves form
//! an orthogonal net of curvature lines.
//!
//! The change of variables `eta(theta)` is either supplied in closed form
//! (catalog cases) or constructed numerically. The numeric construction
//! traces principal-curvature streamlines from each query point to a seed
//! transversal (the `theta1 = min` domain edge) and labels each curve by the
//! `theta2` value at the crossing, so both eta coordinates restrict to
//! `theta2` on the transversal. Jacobians and second derivatives of the map
//! come from transporting the variational equations along the same traces,
//! not from differencing a grid.

use std::cell::Cell;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::jet::Jet2;
use crate::linalg::{eigen2, Mat2};
use crate::ode::{integrate_to_section, OdeOptions, SectionCrossing};
use crate::surface::{Domain, FundamentalForms, ParamSurface, SurfaceMap};

/// Principal-direction angles in the parameter plane together with the
/// associated scale factors. Directions are normalized (A1 = A2 = 1), so
/// the reciprocal factors reduce to 1/sin(xi2 - xi1).
#[derive(Debug, Clone, Copy)]
pub struct PrincipalAngles {
    pub xi1: f64,
    pub xi2: f64,
    pub a1: f64,
    pub a2: f64,
    pub a1_star: f64,
    pub a2_star: f64,
}

/// Angles of the two principal directions, matched to the sorted principal
/// curvatures like [`crate::surface::CurvatureData`]. Errors at umbilic
/// points where the directions are indeterminate.
pub fn principal_angles(forms: &FundamentalForms) -> Result<PrincipalAngles> {
    let curv = crate::surface::curvature(forms);
    if curv.umbilic {
        return Err(Error::UmbilicPoint {
            theta1: f64::NAN,
            theta2: f64::NAN,
            gap: (curv.kappa2 - curv.kappa1).abs(),
        });
    }
    let (xi1, xi2) = (curv.xi1, curv.xi2);
    let s = (xi1.cos() * xi2.sin() - xi1.sin() * xi2.cos()).abs();
    Ok(PrincipalAngles { xi1, xi2, a1: 1.0, a2: 1.0, a1_star: 1.0 / s, a2_star: 1.0 / s })
}

/// A 2D-to-2D map usable with plain values and jets.
pub trait PlaneMap: Send + Sync {
    fn eval(&self, a: f64, b: f64) -> [f64; 2];
    fn eval_jet2(&self, a: Jet2, b: Jet2) -> [Jet2; 2];
}

pub struct FnPlaneMap<F>
where
    F: Fn(Jet2, Jet2) -> [Jet2; 2] + Send + Sync,
{
    pub f: F,
}

impl<F> PlaneMap for FnPlaneMap<F>
where
    F: Fn(Jet2, Jet2) -> [Jet2; 2] + Send + Sync,
{
    fn eval(&self, a: f64, b: f64) -> [f64; 2] {
        let r = (self.f)(Jet2::constant(a), Jet2::constant(b));
        [r[0].v, r[1].v]
    }

    fn eval_jet2(&self, a: Jet2, b: Jet2) -> [Jet2; 2] {
        (self.f)(a, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetKind {
    /// Coordinates already form a curvature-line net; eta = theta.
    Identity,
    ClosedForm,
    Numeric,
}

/// Pointwise data of the reparametrization at a theta point.
#[derive(Debug, Clone, Copy)]
pub struct NetPoint {
    pub eta: [f64; 2],
    /// d eta / d theta.
    pub jac: Mat2,
    /// Second derivatives d^2 eta^m / d theta_i d theta_j, one symmetric
    /// matrix per eta component; present when requested.
    pub hess: Option<[Mat2; 2]>,
}

/// Configuration for the numeric net construction.
#[derive(Debug, Clone)]
pub struct NetConfig {
    /// Label cache resolution over the theta domain.
    pub grid: (usize, usize),
    pub ode: OdeOptions,
    /// Step for the direction-field derivative stencils.
    pub stencil_h: f64,
    /// Probe grid for the curvature-line fast path and umbilic scan.
    pub probe: (usize, usize),
    /// Umbilic threshold, relative to max(|k1|,|k2|,1).
    pub eps_umbilic: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            grid: (128, 128),
            ode: OdeOptions::default(),
            stencil_h: 5e-3,
            probe: (16, 16),
            eps_umbilic: crate::surface::EPS_UMBILIC_DEFAULT,
        }
    }
}

struct NumericNet {
    tracer: Tracer,
    /// eta labels at the cache nodes, row-major over (i1, i2).
    labels: Vec<[f64; 2]>,
    n1: usize,
    n2: usize,
    /// Image polygon of the domain boundary (eta plane).
    star_boundary: Vec<[f64; 2]>,
}

enum NetImpl {
    Identity,
    Closed {
        forward: Arc<dyn PlaneMap>,
        inverse: Arc<dyn PlaneMap>,
    },
    Numeric(Box<NumericNet>),
}

/// The theta <-> eta reparametrization with Jacobian access.
pub struct CurvatureNet {
    imp: NetImpl,
    pub kind: NetKind,
    pub domain: Domain,
}

impl CurvatureNet {
    pub fn identity(domain: Domain) -> CurvatureNet {
        CurvatureNet { imp: NetImpl::Identity, kind: NetKind::Identity, domain }
    }

    /// Bounding box of the eta image of the theta domain.
    pub fn star_bbox(&self) -> Domain {
        match &self.imp {
            NetImpl::Identity => self.domain,
            NetImpl::Closed { forward, .. } => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for (t1, t2) in self.domain.grid(24, 24, 0.0) {
                    let e = forward.eval(t1, t2);
                    for k in 0..2 {
                        lo[k] = lo[k].min(e[k]);
                        hi[k] = hi[k].max(e[k]);
                    }
                }
                Domain::new(lo[0], hi[0], lo[1], hi[1])
            }
            NetImpl::Numeric(n) => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for e in &n.labels {
                    for k in 0..2 {
                        lo[k] = lo[k].min(e[k]);
                        hi[k] = hi[k].max(e[k]);
                    }
                }
                Domain::new(lo[0], hi[0], lo[1], hi[1])
            }
        }
    }

    /// Boundary polygon of the eta image region.
    pub fn star_boundary(&self) -> Vec<[f64; 2]> {
        match &self.imp {
            NetImpl::Identity => {
                let d = self.domain;
                vec![
                    [d.t1.0, d.t2.0],
                    [d.t1.1, d.t2.0],
                    [d.t1.1, d.t2.1],
                    [d.t1.0, d.t2.1],
                ]
            }
            NetImpl::Closed { forward, .. } => boundary_points(&self.domain, 32)
                .into_iter()
                .map(|(a, b)| forward.eval(a, b))
                .collect(),
            NetImpl::Numeric(n) => n.star_boundary.clone(),
        }
    }

    /// Winding-number test against the image boundary polygon.
    pub fn star_contains(&self, eta: [f64; 2]) -> bool {
        let poly = self.star_boundary();
        winding_number(&poly, eta) != 0
    }

    /// Forward map theta -> eta. For numeric nets this interpolates the
    /// label cache; see [`CurvatureNet::point`] for traced evaluation.
    pub fn forward(&self, t1: f64, t2: f64) -> Result<[f64; 2]> {
        match &self.imp {
            NetImpl::Identity => Ok([t1, t2]),
            NetImpl::Closed { forward, .. } => Ok(forward.eval(t1, t2)),
            NetImpl::Numeric(n) => n.forward_cached(&self.domain, t1, t2),
        }
    }

    /// Inverse map eta -> theta. Numeric nets solve the cached forward map
    /// by Newton iteration, so the round trip closes to interpolator
    /// accuracy.
    pub fn inverse(&self, e1: f64, e2: f64) -> Result<[f64; 2]> {
        match &self.imp {
            NetImpl::Identity => Ok([e1, e2]),
            NetImpl::Closed { inverse, .. } => Ok(inverse.eval(e1, e2)),
            NetImpl::Numeric(n) => n.inverse_newton(&self.domain, [e1, e2]),
        }
    }

    /// Jacobian d eta / d theta.
    pub fn jac(&self, t1: f64, t2: f64) -> Result<Mat2> {
        Ok(self.point(t1, t2, false)?.jac)
    }

    /// Full pointwise data; numeric nets trace the two curvature lines
    /// through the point and transport the variational equations, which is
    /// accurate but not cached.
    pub fn point(&self, t1: f64, t2: f64, want_hessian: bool) -> Result<NetPoint> {
        match &self.imp {
            NetImpl::Identity => Ok(NetPoint {
                eta: [t1, t2],
                jac: Mat2::IDENTITY,
                hess: want_hessian.then_some([zero2(), zero2()]),
            }),
            NetImpl::Closed { forward, .. } => {
                let j = forward.eval_jet2(Jet2::var1(t1), Jet2::var2(t2));
                let jac = Mat2::new(j[0].d1, j[0].d2, j[1].d1, j[1].d2);
                let hess = want_hessian.then_some([
                    Mat2::new(j[0].d11, j[0].d12, j[0].d12, j[0].d22),
                    Mat2::new(j[1].d11, j[1].d12, j[1].d12, j[1].d22),
                ]);
                Ok(NetPoint { eta: [j[0].v, j[1].v], jac, hess })
            }
            NetImpl::Numeric(n) => n.point_traced([t1, t2], want_hessian),
        }
    }

    /// Polylines of the net's coordinate curves (theta plane) for export.
    pub fn trace_polylines(&self, count: usize) -> Result<Vec<Vec<[f64; 2]>>> {
        match &self.imp {
            NetImpl::Numeric(n) => n.polylines(&self.domain, count),
            _ => {
                let bbox = self.star_bbox();
                let mut lines = Vec::new();
                for k in 0..count {
                    let f = (k as f64 + 0.5) / count as f64;
                    let e1 = bbox.t1.0 + f * bbox.extent1();
                    let e2 = bbox.t2.0 + f * bbox.extent2();
                    let mut l1 = Vec::new();
                    let mut l2 = Vec::new();
                    for m in 0..=200 {
                        let g = m as f64 / 200.0;
                        let ee2 = bbox.t2.0 + g * bbox.extent2();
                        let ee1 = bbox.t1.0 + g * bbox.extent1();
                        if let Ok(th) = self.inverse(e1, ee2) {
                            if self.domain.contains(th[0], th[1]) {
                                l1.push(th);
                            }
                        }
                        if let Ok(th) = self.inverse(ee1, e2) {
                            if self.domain.contains(th[0], th[1]) {
                                l2.push(th);
                            }
                        }
                    }
                    for l in [l1, l2] {
                        if l.len() > 1 {
                            lines.push(l);
                        }
                    }
                }
                Ok(lines)
            }
        }
    }
}

fn zero2() -> Mat2 {
    Mat2::new(0.0, 0.0, 0.0, 0.0)
}

fn boundary_points(d: &Domain, per_side: usize) -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    let n = per_side as f64;
    for i in 0..per_side {
        let f = i as f64 / n;
        pts.push((d.t1.0 + f * d.extent1(), d.t2.0));
    }
    for i in 0..per_side {
        let f = i as f64 / n;
        pts.push((d.t1.1, d.t2.0 + f * d.extent2()));
    }
    for i in 0..per_side {
        let f = i as f64 / n;
        pts.push((d.t1.1 - f * d.extent1(), d.t2.1));
    }
    for i in 0..per_side {
        let f = i as f64 / n;
        pts.push((d.t1.0, d.t2.1 - f * d.extent2()));
    }
    pts
}

fn winding_number(poly: &[[f64; 2]], p: [f64; 2]) -> i32 {
    let mut wn = 0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        if a[1] <= p[1] {
            if b[1] > p[1] && cross2(a, b, p) > 0.0 {
                wn += 1;
            }
        } else if b[1] <= p[1] && cross2(a, b, p) < 0.0 {
            wn -= 1;
        }
    }
    wn
}

fn cross2(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])
}

/// Wrap explicit forward/inverse maps as a net, validating orientation and
/// the round trip on a sample grid.
pub fn build_net_closed_form(
    domain: Domain,
    forward: Arc<dyn PlaneMap>,
    inverse: Arc<dyn PlaneMap>,
) -> Result<CurvatureNet> {
    for (t1, t2) in domain.grid(21, 21, 0.0) {
        let j = forward.eval_jet2(Jet2::var1(t1), Jet2::var2(t2));
        let det = j[0].d1 * j[1].d2 - j[0].d2 * j[1].d1;
        if det <= 0.0 {
            return Err(Error::OrientationError { theta1: t1, theta2: t2, det });
        }
        let e = [j[0].v, j[1].v];
        let back = inverse.eval(e[0], e[1]);
        let err = (back[0] - t1).abs().max((back[1] - t2).abs());
        if err > 1e-10 * (1.0 + t1.abs().max(t2.abs())) {
            return Err(Error::NonBijective {
                detail: format!("round trip off by {err:.3e} at ({t1}, {t2})"),
            });
        }
    }
    Ok(CurvatureNet {
        imp: NetImpl::Closed { forward, inverse },
        kind: NetKind::ClosedForm,
        domain,
    })
}

/// Construct the reparametrization for `surface` numerically by tracing
/// curvature lines to the `theta1 = min` transversal. Returns the identity
/// net directly when the coordinates already form a curvature-line net.
pub fn build_net_numeric(surface: &ParamSurface, cfg: &NetConfig) -> Result<CurvatureNet> {
    let domain = surface.domain;

    // Degenerate fast path: already a curvature-line net.
    let mut worst_f = 0.0_f64;
    let mut worst_m = 0.0_f64;
    for (t1, t2) in domain.grid(cfg.probe.0, cfg.probe.1, 1e-9 * domain.diameter()) {
        let f = surface.forms(t1, t2)?;
        worst_f = worst_f.max(f.f.abs() / (f.e * f.g).sqrt());
        worst_m = worst_m.max(f.m.abs() / ((f.l * f.n).abs() + f.m * f.m + 1.0).sqrt());
    }
    if worst_f < 1e-12 && worst_m < 1e-12 {
        return Ok(CurvatureNet::identity(domain));
    }

    let tracer = Tracer::new(surface.clone(), cfg)?;

    // Label cache: cheap position-only traces.
    let (n1, n2) = cfg.grid;
    let nodes: Vec<(f64, f64)> = domain.grid(n1, n2, 0.0);
    let labels: Vec<Result<[f64; 2]>> = nodes
        .par_iter()
        .map(|&(t1, t2)| {
            let e1 = tracer.trace_label_value(1, [t1, t2])?;
            let e2 = tracer.trace_label_value(0, [t1, t2])?;
            Ok([e1, e2])
        })
        .collect();
    let mut cache = Vec::with_capacity(labels.len());
    for r in labels {
        cache.push(r?);
    }

    // Orientation / fold check on the cached grid.
    let h1 = domain.extent1() / (n1 - 1) as f64;
    let h2 = domain.extent2() / (n2 - 1) as f64;
    for i in 0..n1 - 1 {
        for j in 0..n2 - 1 {
            let idx = |a: usize, b: usize| a * n2 + b;
            let d1 = [
                (cache[idx(i + 1, j)][0] - cache[idx(i, j)][0]) / h1,
                (cache[idx(i + 1, j)][1] - cache[idx(i, j)][1]) / h1,
            ];
            let d2 = [
                (cache[idx(i, j + 1)][0] - cache[idx(i, j)][0]) / h2,
                (cache[idx(i, j + 1)][1] - cache[idx(i, j)][1]) / h2,
            ];
            let det = d1[0] * d2[1] - d1[1] * d2[0];
            if det <= 0.0 {
                return Err(Error::NonBijective {
                    detail: format!(
                        "interpolated Jacobian determinant {det:.3e} at cell ({i}, {j})"
                    ),
                });
            }
        }
    }

    let star_boundary: Vec<[f64; 2]> = {
        let mut border = Vec::new();
        for i in 0..n1 {
            border.push(cache[i * n2]);
        }
        for j in 1..n2 {
            border.push(cache[(n1 - 1) * n2 + j]);
        }
        for i in (0..n1 - 1).rev() {
            border.push(cache[i * n2 + (n2 - 1)]);
        }
        for j in (1..n2 - 1).rev() {
            border.push(cache[j]);
        }
        border
    };

    Ok(CurvatureNet {
        imp: NetImpl::Numeric(Box::new(NumericNet {
            tracer,
            labels: cache,
            n1,
            n2,
            star_boundary,
        })),
        kind: NetKind::Numeric,
        domain,
    })
}

impl NumericNet {
    fn node_eta(&self, i: usize, j: usize) -> [f64; 2] {
        self.labels[i * self.n2 + j]
    }

    fn forward_cached(&self, domain: &Domain, t1: f64, t2: f64) -> Result<[f64; 2]> {
        if !domain.contains_with_margin(t1, t2, 1e-12) {
            return Err(Error::DomainError {
                theta1: t1,
                theta2: t2,
                detail: "outside the net's theta domain".into(),
            });
        }
        let fx = (t1 - domain.t1.0) / domain.extent1() * (self.n1 - 1) as f64;
        let fy = (t2 - domain.t2.0) / domain.extent2() * (self.n2 - 1) as f64;
        let i = (fx.floor().max(0.0) as usize).min(self.n1 - 2);
        let j = (fy.floor().max(0.0) as usize).min(self.n2 - 2);
        let u = fx - i as f64;
        let w = fy - j as f64;
        let mut out = [0.0; 2];
        for k in 0..2 {
            let a = self.node_eta(i, j)[k];
            let b = self.node_eta(i + 1, j)[k];
            let c = self.node_eta(i, j + 1)[k];
            let d = self.node_eta(i + 1, j + 1)[k];
            out[k] = a * (1.0 - u) * (1.0 - w) + b * u * (1.0 - w) + c * (1.0 - u) * w + d * u * w;
        }
        Ok(out)
    }

    fn inverse_newton(&self, domain: &Domain, eta: [f64; 2]) -> Result<[f64; 2]> {
        let h1 = domain.extent1() / (self.n1 - 1) as f64;
        let h2 = domain.extent2() / (self.n2 - 1) as f64;
        // Seed from the nearest cache node.
        let mut best = (f64::INFINITY, [0.0_f64; 2]);
        for i in 0..self.n1 {
            for j in 0..self.n2 {
                let e = self.node_eta(i, j);
                let d = (e[0] - eta[0]).powi(2) + (e[1] - eta[1]).powi(2);
                if d < best.0 {
                    best = (d, [domain.t1.0 + i as f64 * h1, domain.t2.0 + j as f64 * h2]);
                }
            }
        }
        let mut th = best.1;
        let scale = 1.0 + eta[0].abs().max(eta[1].abs());
        for _ in 0..60 {
            let cur = self.forward_cached(domain, th[0], th[1])?;
            let r = [eta[0] - cur[0], eta[1] - cur[1]];
            if r[0].abs().max(r[1].abs()) < 1e-13 * scale {
                return Ok(th);
            }
            // Jacobian of the interpolant by small differences.
            let d1 = h1 * 1e-4;
            let d2 = h2 * 1e-4;
            let f1p = self.forward_cached(domain, (th[0] + d1).min(domain.t1.1), th[1])?;
            let f1m = self.forward_cached(domain, (th[0] - d1).max(domain.t1.0), th[1])?;
            let f2p = self.forward_cached(domain, th[0], (th[1] + d2).min(domain.t2.1))?;
            let f2m = self.forward_cached(domain, th[0], (th[1] - d2).max(domain.t2.0))?;
            let j = Mat2::new(
                (f1p[0] - f1m[0]) / (2.0 * d1),
                (f2p[0] - f2m[0]) / (2.0 * d2),
                (f1p[1] - f1m[1]) / (2.0 * d1),
                (f2p[1] - f2m[1]) / (2.0 * d2),
            );
            let inv = j.inverse().ok_or_else(|| Error::NonBijective {
                detail: "singular Jacobian in inverse iteration".into(),
            })?;
            let step = inv.mul_vec(r);
            th[0] = (th[0] + step[0]).clamp(domain.t1.0, domain.t1.1);
            th[1] = (th[1] + step[1]).clamp(domain.t2.0, domain.t2.1);
        }
        Err(Error::NonBijective {
            detail: format!("inverse iteration stalled for eta = ({}, {})", eta[0], eta[1]),
        })
    }

    fn point_traced(&self, theta: [f64; 2], want_hessian: bool) -> Result<NetPoint> {
        // eta1 is constant along family-2 curves, so its value and
        // derivatives come from the family-2 trace, and vice versa.
        let l1 = self.tracer.trace_label(1, theta, want_hessian, None)?;
        let l2 = self.tracer.trace_label(0, theta, want_hessian, None)?;
        let jac = Mat2::new(l1.grad[0], l1.grad[1], l2.grad[0], l2.grad[1]);
        let hess = want_hessian.then(|| {
            [
                Mat2::new(l1.hess[0][0], l1.hess[0][1], l1.hess[1][0], l1.hess[1][1]),
                Mat2::new(l2.hess[0][0], l2.hess[0][1], l2.hess[1][0], l2.hess[1][1]),
            ]
        });
        Ok(NetPoint { eta: [l1.label, l2.label], jac, hess })
    }

    fn polylines(&self, domain: &Domain, count: usize) -> Result<Vec<Vec<[f64; 2]>>> {
        let mut lines = Vec::new();
        for k in 0..count {
            let f = (k as f64 + 0.5) / count as f64;
            let start = [
                domain.t1.0 + f * domain.extent1(),
                domain.t2.0 + f * domain.extent2(),
            ];
            for family in [0usize, 1usize] {
                for flip in [false, true] {
                    let mut pts = Vec::new();
                    let _ = self.tracer.trace_curve(family, start, flip, domain, &mut pts);
                    if pts.len() > 1 {
                        lines.push(pts);
                    }
                }
            }
        }
        Ok(lines)
    }
}

// ---------------------------------------------------------------------------
// Streamline tracing with variational transport
// ---------------------------------------------------------------------------

struct LabelData {
    label: f64,
    grad: [f64; 2],
    hess: [[f64; 2]; 2],
}

struct Tracer {
    surface: ParamSurface,
    ode: OdeOptions,
    stencil_h: f64,
    eps_umbilic: f64,
    /// Whether "family 1" is the field of the smaller principal curvature;
    /// fixed once near the seed so labels are globally consistent.
    family1_is_kmin: bool,
    section_t1: f64,
}

impl Tracer {
    fn new(surface: ParamSurface, cfg: &NetConfig) -> Result<Tracer> {
        let domain = surface.domain;
        let mut probe_pts = vec![
            (domain.t1.0, domain.t2.0),
            (0.5 * (domain.t1.0 + domain.t1.1), 0.5 * (domain.t2.0 + domain.t2.1)),
        ];
        probe_pts.extend(domain.grid(3, 3, 1e-3 * domain.diameter()));
        let mut family1_is_kmin = None;
        for (t1, t2) in probe_pts {
            if let Ok(c) = surface.curvature(t1, t2) {
                if c.umbilic {
                    continue;
                }
                // Family 1 carries the steeper direction so that the map
                // eta(theta) is orientation-preserving under the
                // transversal labelling (det = tan xi1 - tan xi2 > 0).
                family1_is_kmin = Some(c.xi1.tan() > c.xi2.tan());
                break;
            }
        }
        let family1_is_kmin = family1_is_kmin.ok_or(Error::UmbilicEncountered {
            theta1: domain.t1.0,
            theta2: domain.t2.0,
        })?;
        let mut ode = cfg.ode;
        if ode.max_length == OdeOptions::default().max_length {
            ode.max_length = 20.0 * (domain.extent1() + domain.extent2());
        }
        Ok(Tracer {
            surface,
            ode,
            stencil_h: cfg.stencil_h,
            eps_umbilic: cfg.eps_umbilic,
            family1_is_kmin,
            section_t1: domain.t1.0,
        })
    }

    /// Unit direction of the given family (0 or 1) at `p`, sign-aligned
    /// with `align`.
    fn direction(&self, family: usize, p: [f64; 2], align: [f64; 2]) -> Result<[f64; 2]> {
        let forms = self.surface.forms(p[0], p[1])?;
        let c = crate::surface::curvature(&forms);
        let gap = (c.kappa2 - c.kappa1).abs();
        if gap < self.eps_umbilic * c.kappa1.abs().max(c.kappa2.abs()).max(1.0) {
            return Err(Error::UmbilicEncountered { theta1: p[0], theta2: p[1] });
        }
        let w = forms.shape_operator();
        let ((_, vmin), (_, vmax)) =
            eigen2(&w).ok_or(Error::UmbilicEncountered { theta1: p[0], theta2: p[1] })?;
        let want_kmin = if family == 0 { self.family1_is_kmin } else { !self.family1_is_kmin };
        let mut d = if want_kmin { vmin } else { vmax };
        if d[0] * align[0] + d[1] * align[1] < 0.0 {
            d = [-d[0], -d[1]];
        }
        Ok(d)
    }

    /// Direction-field derivatives by fourth-order stencils, each stencil
    /// evaluation sign-aligned to the center direction.
    fn field_derivatives(
        &self,
        family: usize,
        p: [f64; 2],
        center: [f64; 2],
        want_second: bool,
    ) -> Result<(Mat2, Option<[[[f64; 2]; 2]; 2]>)> {
        let h = self.stencil_h;
        const OFF: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];
        const W1: [f64; 4] = [1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0];
        const W2: [f64; 5] =
            [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
        let mut ax1 = [[0.0; 2]; 4];
        let mut ax2 = [[0.0; 2]; 4];
        for (k, &o) in OFF.iter().enumerate() {
            ax1[k] = self.direction(family, [p[0] + o * h, p[1]], center)?;
            ax2[k] = self.direction(family, [p[0], p[1] + o * h], center)?;
        }
        let mut dv = zero2();
        for k in 0..4 {
            for m in 0..2 {
                dv.m[m][0] += W1[k] * ax1[k][m] / h;
                dv.m[m][1] += W1[k] * ax2[k][m] / h;
            }
        }
        if !want_second {
            return Ok((dv, None));
        }
        let mut d2 = [[[0.0; 2]; 2]; 2];
        for m in 0..2 {
            let c5_1 = [ax1[0][m], ax1[1][m], center[m], ax1[2][m], ax1[3][m]];
            let c5_2 = [ax2[0][m], ax2[1][m], center[m], ax2[2][m], ax2[3][m]];
            let mut s11 = 0.0;
            let mut s22 = 0.0;
            for k in 0..5 {
                s11 += W2[k] * c5_1[k];
                s22 += W2[k] * c5_2[k];
            }
            d2[m][0][0] = s11 / (h * h);
            d2[m][1][1] = s22 / (h * h);
        }
        // Mixed term: tensor product of two first-derivative stencils.
        let mut s12 = [0.0; 2];
        for (a, &oa) in OFF.iter().enumerate() {
            for (b, &ob) in OFF.iter().enumerate() {
                let v = self.direction(family, [p[0] + oa * h, p[1] + ob * h], center)?;
                for m in 0..2 {
                    s12[m] += W1[a] * W1[b] * v[m];
                }
            }
        }
        for m in 0..2 {
            d2[m][0][1] = s12[m] / (h * h);
            d2[m][1][0] = d2[m][0][1];
        }
        Ok((dv, Some(d2)))
    }

    fn initial_direction(&self, family: usize, start: [f64; 2]) -> Result<[f64; 2]> {
        let d0 = self.direction(family, start, [-1.0, 0.0])?;
        if d0[0].abs() < 1e-10 {
            return Err(Error::IntegrationDiverged {
                theta1: start[0],
                theta2: start[1],
                detail: "principal direction tangent to the seed transversal".into(),
            });
        }
        Ok(d0)
    }

    /// Label only (theta2 at the transversal crossing); cheap 2-state trace.
    fn trace_label_value(&self, family: usize, start: [f64; 2]) -> Result<f64> {
        if (start[0] - self.section_t1).abs() < 1e-14 {
            return Ok(start[1]);
        }
        let d0 = self.initial_direction(family, start)?;
        let ref_dir = Cell::new(d0);
        let rhs = |y: &[f64; 2]| self.direction(family, [y[0], y[1]], ref_dir.get());
        let section_t1 = self.section_t1;
        let section = |y: &[f64; 2]| y[0] - section_t1;
        let mut refresh = |_s: f64, y: &[f64; 2]| {
            if let Ok(d) = self.direction(family, [y[0], y[1]], ref_dir.get()) {
                ref_dir.set(d);
            }
        };
        let crossing =
            integrate_to_section(&rhs, [start[0], start[1]], &section, &self.ode, Some(&mut refresh))?;
        Ok(crossing.y[1])
    }

    /// Trace the curvature line of `family` through `start` to the
    /// transversal; return the label with its gradient and optionally
    /// Hessian with respect to the start point, from the transported
    /// variational equations plus the section correction.
    fn trace_label(
        &self,
        family: usize,
        start: [f64; 2],
        want_hessian: bool,
        mut polyline: Option<&mut Vec<[f64; 2]>>,
    ) -> Result<LabelData> {
        let d0 = self.initial_direction(family, start)?;
        let on_section = (start[0] - self.section_t1).abs() < 1e-14;

        let ref_dir = Cell::new(d0);
        let section_t1 = self.section_t1;

        // State: position (2) + flow Jacobian (4, row-major) +
        // symmetric-packed second derivatives (6):
        // [K1_11, K1_12, K1_22, K2_11, K2_12, K2_22].
        let rhs = |y: &[f64; 12]| -> Result<[f64; 12]> {
            let p = [y[0], y[1]];
            let v = self.direction(family, p, ref_dir.get())?;
            let (dv, d2v) = self.field_derivatives(family, p, v, want_hessian)?;
            let jc = [[y[2], y[3]], [y[4], y[5]]];
            let mut out = [0.0; 12];
            out[0] = v[0];
            out[1] = v[1];
            for m in 0..2 {
                for j in 0..2 {
                    out[2 + 2 * m + j] = dv.m[m][0] * jc[0][j] + dv.m[m][1] * jc[1][j];
                }
            }
            if let Some(d2) = d2v {
                let kk = [[y[6], y[7], y[8]], [y[9], y[10], y[11]]];
                for m in 0..2 {
                    for (slot, (i, j)) in [(0usize, (0usize, 0usize)), (1, (0, 1)), (2, (1, 1))] {
                        let mut acc = 0.0;
                        for a in 0..2 {
                            for b in 0..2 {
                                acc += d2[m][a][b] * jc[a][i] * jc[b][j];
                            }
                        }
                        acc += dv.m[m][0] * kk[0][slot] + dv.m[m][1] * kk[1][slot];
                        out[6 + 3 * m + slot] = acc;
                    }
                }
            }
            Ok(out)
        };

        let mut y0 = [0.0; 12];
        y0[0] = start[0];
        y0[1] = start[1];
        y0[2] = 1.0;
        y0[5] = 1.0;

        let section = |y: &[f64; 12]| y[0] - section_t1;

        let mut collect = |_s: f64, y: &[f64; 12]| {
            let p = [y[0], y[1]];
            if let Some(pl) = polyline.as_deref_mut() {
                pl.push(p);
            }
            if let Ok(d) = self.direction(family, p, ref_dir.get()) {
                ref_dir.set(d);
            }
        };

        let crossing = if on_section {
            SectionCrossing { y: y0, arc_length: 0.0, steps: 0 }
        } else {
            integrate_to_section(&rhs, y0, &section, &self.ode, Some(&mut collect))?
        };

        let yc = crossing.y;
        let pc = [yc[0], yc[1]];
        let jc = [[yc[2], yc[3]], [yc[4], yc[5]]];
        let v = self.direction(family, pc, ref_dir.get())?;
        if v[0].abs() < 1e-12 {
            return Err(Error::IntegrationDiverged {
                theta1: pc[0],
                theta2: pc[1],
                detail: "trajectory tangent to the transversal at the crossing".into(),
            });
        }

        // Section corrections: the crossing time varies with the start
        // point. s*_j = -J^1_j / v^1; label gradient = v^2 s*_j + J^2_j.
        let s_star = [-jc[0][0] / v[0], -jc[0][1] / v[0]];
        let grad = [v[1] * s_star[0] + jc[1][0], v[1] * s_star[1] + jc[1][1]];

        let mut hess = [[0.0; 2]; 2];
        if want_hessian {
            let (dv, _) = self.field_derivatives(family, pc, v, false)?;
            let kk = [[yc[6], yc[7], yc[8]], [yc[9], yc[10], yc[11]]];
            let unpack = |m: usize, i: usize, j: usize| kk[m][i + j];
            // Total derivative of the crossing position: w_i = v s*_i + J_{:,i}.
            let w = [
                [v[0] * s_star[0] + jc[0][0], v[1] * s_star[0] + jc[1][0]],
                [v[0] * s_star[1] + jc[0][1], v[1] * s_star[1] + jc[1][1]],
            ];
            let grad_v = |m: usize, vecv: [f64; 2]| dv.m[m][0] * vecv[0] + dv.m[m][1] * vecv[1];
            for i in 0..2 {
                for j in 0..2 {
                    let jcol_j = [jc[0][j], jc[1][j]];
                    let s_ij = -(grad_v(0, w[i]) * s_star[j]
                        + grad_v(0, jcol_j) * s_star[i]
                        + unpack(0, i, j))
                        / v[0];
                    hess[i][j] = grad_v(1, w[i]) * s_star[j]
                        + v[1] * s_ij
                        + grad_v(1, jcol_j) * s_star[i]
                        + unpack(1, i, j);
                }
            }
        }

        Ok(LabelData { label: pc[1], grad, hess })
    }

    /// Trace a curvature line for visualisation, stopping at the domain
    /// boundary.
    fn trace_curve(
        &self,
        family: usize,
        start: [f64; 2],
        flip: bool,
        domain: &Domain,
        out: &mut Vec<[f64; 2]>,
    ) -> Result<()> {
        let mut d0 = self.direction(family, start, [-1.0, 0.0])?;
        if flip {
            d0 = [-d0[0], -d0[1]];
        }
        let ref_dir = Cell::new(d0);
        let rhs = |y: &[f64; 2]| self.direction(family, [y[0], y[1]], ref_dir.get());
        let dom = *domain;
        let section = move |y: &[f64; 2]| {
            let d1 = (y[0] - dom.t1.0).min(dom.t1.1 - y[0]);
            let d2 = (y[1] - dom.t2.0).min(dom.t2.1 - y[1]);
            d1.min(d2) + 1e-12
        };
        let mut collector = |_s: f64, y: &[f64; 2]| {
            out.push([y[0], y[1]]);
            if let Ok(d) = self.direction(family, [y[0], y[1]], ref_dir.get()) {
                ref_dir.set(d);
            }
        };
        let opts = OdeOptions {
            max_length: 4.0 * (dom.extent1() + dom.extent2()),
            ..self.ode
        };
        let _ = integrate_to_section(&rhs, [start[0], start[1]], &section, &opts, Some(&mut collector));
        Ok(())
    }
}

/// The intermediate configuration: the reference immersion re-cut onto the
/// eta image region, together with its theta-parametrized composite.
pub struct IntermediateSurface {
    /// `s(eta)` on (the bounding box of) the eta image.
    pub eta_surface: ParamSurface,
    /// `s*(theta) = s(eta(theta))` on the original domain.
    pub theta_surface: ParamSurface,
}

struct ComposedMap {
    inner: Arc<dyn SurfaceMap>,
    net: Arc<CurvatureNet>,
}

impl SurfaceMap for ComposedMap {
    fn eval(&self, t1: f64, t2: f64) -> crate::linalg::Vec3 {
        match self.net.forward(t1, t2) {
            Ok(e) => self.inner.eval(e[0], e[1]),
            Err(_) => crate::linalg::vec3(f64::NAN, f64::NAN, f64::NAN),
        }
    }

    fn eval_jet2(&self, t1: Jet2, t2: Jet2) -> [Jet2; 3] {
        match &self.net.imp {
            NetImpl::Identity => self.inner.eval_jet2(t1, t2),
            NetImpl::Closed { forward, .. } => {
                let e = forward.eval_jet2(t1, t2);
                self.inner.eval_jet2(e[0], e[1])
            }
            NetImpl::Numeric(_) => {
                // Compose the traced value/Jacobian/Hessian with the seeds.
                let p = self.net.point(t1.v, t2.v, true).unwrap_or(NetPoint {
                    eta: [f64::NAN; 2],
                    jac: Mat2::IDENTITY,
                    hess: Some([zero2(), zero2()]),
                });
                let h = p.hess.unwrap();
                let mk = |k: usize| Jet2 {
                    v: p.eta[k],
                    d1: p.jac.m[k][0],
                    d2: p.jac.m[k][1],
                    d11: h[k].m[0][0],
                    d12: h[k].m[0][1],
                    d22: h[k].m[1][1],
                };
                let chain = |e: Jet2| Jet2 {
                    v: e.v,
                    d1: e.d1 * t1.d1 + e.d2 * t2.d1,
                    d2: e.d1 * t1.d2 + e.d2 * t2.d2,
                    d11: e.d11 * t1.d1 * t1.d1
                        + 2.0 * e.d12 * t1.d1 * t2.d1
                        + e.d22 * t2.d1 * t2.d1,
                    d12: e.d11 * t1.d1 * t1.d2
                        + e.d12 * (t1.d1 * t2.d2 + t1.d2 * t2.d1)
                        + e.d22 * t2.d1 * t2.d2,
                    d22: e.d11 * t1.d2 * t1.d2
                        + 2.0 * e.d12 * t1.d2 * t2.d2
                        + e.d22 * t2.d2 * t2.d2,
                };
                self.inner.eval_jet2(chain(mk(0)), chain(mk(1)))
            }
        }
    }
}

/// Build the intermediate surface for a reference immersion and a net.
/// The eta image must lie within the reference formula's validity region.
pub fn intermediate_surface(
    reference: &ParamSurface,
    net: Arc<CurvatureNet>,
) -> Result<IntermediateSurface> {
    let bbox = net.star_bbox();
    for (a, b) in [
        (bbox.t1.0, bbox.t2.0),
        (bbox.t1.1, bbox.t2.1),
        (bbox.t1.0, bbox.t2.1),
        (bbox.t1.1, bbox.t2.0),
    ] {
        if !reference.domain.contains_with_margin(a, b, reference.ext_margin) {
            return Err(Error::DomainError {
                theta1: a,
                theta2: b,
                detail: "eta image leaves the reference immersion's validity region".into(),
            });
        }
    }
    let mut eta_surface = reference.with_domain(bbox);
    eta_surface.ext_margin = reference.ext_margin.max(1.0);
    let theta_surface = ParamSurface::new(
        Arc::new(ComposedMap { inner: reference.map().clone(), net: net.clone() }),
        net.domain,
    );
    Ok(IntermediateSurface { eta_surface, theta_surface })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::FnSurface;
    use std::f64::consts::PI;

    fn spiral_surface() -> ParamSurface {
        let map = FnSurface {
            f: |t1: Jet2, t2: Jet2| {
                let r = t1 * (2.0 / PI);
                [r * (t2 * PI).sin(), r * (t2 * PI).cos(), t2]
            },
        };
        ParamSurface::new(Arc::new(map), Domain::new(0.0, PI, 0.0, 4.0))
    }

    fn spiral_net() -> CurvatureNet {
        let fwd = FnPlaneMap {
            f: |t1: Jet2, t2: Jet2| {
                let a = (t1 * 2.0).asinh() * (1.0 / PI);
                [a + t2, t2 - a]
            },
        };
        let inv = FnPlaneMap {
            f: |e1: Jet2, e2: Jet2| {
                let d = (e1 - e2) * (PI / 2.0);
                [d.sinh() * 0.5, (e1 + e2) * 0.5]
            },
        };
        build_net_closed_form(Domain::new(0.0, PI, 0.0, 4.0), Arc::new(fwd), Arc::new(inv))
            .unwrap()
    }

    fn tendril_surface() -> ParamSurface {
        let map = FnSurface {
            f: |t1: Jet2, t2: Jet2| {
                let w = t1.cos() + 2.0;
                let ang = t2 * (PI / 2.0);
                [w * ang.cos(), w * ang.sin(), t1.sin() + t2]
            },
        };
        ParamSurface::new(Arc::new(map), Domain::new(0.0, 2.0 * PI, 0.0, 8.0))
    }

    #[test]
    fn trivial_angles_for_diagonal_forms() {
        let f = FundamentalForms { e: 3.0, f: 0.0, g: 1.5, l: -0.7, m: 0.0, n: 0.4 };
        let a = principal_angles(&f).unwrap();
        // kappa-sorted: L/E < N/G, so xi1 = 0 and xi2 = pi/2.
        assert!(a.xi1.abs() < 1e-12);
        assert!((a.xi2 - PI / 2.0).abs() < 1e-12);
        assert!((a.a1_star - 1.0).abs() < 1e-12);
        assert!((a.a2_star - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spiral_angles_satisfy_quadratic() {
        let s = spiral_surface();
        let f = s.forms(1.0, 0.0).unwrap();
        assert!((f.e - 4.0 / (PI * PI)).abs() < 1e-12);
        assert!(f.f.abs() < 1e-12);
        assert!((f.g - 5.0).abs() < 1e-12);
        assert!(f.l.abs() < 1e-12);
        assert!((f.m.abs() - 2.0 / 5.0_f64.sqrt()).abs() < 1e-12);
        assert!(f.n.abs() < 1e-12);
        let a = principal_angles(&f).unwrap();
        for xi in [a.xi1, a.xi2] {
            let (c, s_) = (xi.cos(), xi.sin());
            let q = (f.l * f.f - f.m * f.e) * c * c
                + (f.l * f.g - f.n * f.e) * c * s_
                + (f.m * f.g - f.n * f.f) * s_ * s_;
            let scale = (f.m * f.e).abs().max((f.m * f.g).abs());
            assert!(q.abs() < 1e-8 * scale, "residual {q:.3e}");
            assert!((xi.tan().powi(2) - f.e / f.g).abs() < 1e-10);
        }
    }

    #[test]
    fn principal_pair_is_metric_orthogonal_on_tendril() {
        let s = tendril_surface();
        let mut state = 88172645463325252u64;
        let mut rnd = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let t1 = rnd() * 2.0 * PI;
            let t2 = rnd() * 8.0;
            let f = s.forms(t1, t2).unwrap();
            let a = principal_angles(&f).unwrap();
            let orth = f.e * a.xi1.cos() * a.xi2.cos()
                + f.f * (a.xi1.cos() * a.xi2.sin() + a.xi1.sin() * a.xi2.cos())
                + f.g * a.xi1.sin() * a.xi2.sin();
            assert!(orth.abs() < 1e-8 * f.e.max(f.g), "orth = {orth:.3e}");
        }
    }

    #[test]
    fn umbilic_rejected() {
        let f = FundamentalForms { e: 1.0, f: 0.0, g: 1.0, l: 0.5, m: 0.0, n: 0.5 };
        assert!(matches!(principal_angles(&f), Err(Error::UmbilicPoint { .. })));
    }

    #[test]
    fn closed_form_round_trip_and_jacobian() {
        let net = spiral_net();
        for (t1, t2) in net.domain.grid(50, 50, 0.0) {
            let e = net.forward(t1, t2).unwrap();
            let back = net.inverse(e[0], e[1]).unwrap();
            assert!((back[0] - t1).abs() < 1e-12);
            assert!((back[1] - t2).abs() < 1e-12);
        }
        for (t1, t2) in net.domain.grid(7, 7, 0.0) {
            let p = net.point(t1, t2, true).unwrap();
            let a = (2.0 / PI) / (1.0 + 4.0 * t1 * t1).sqrt();
            assert!((p.jac.m[0][0] - a).abs() < 1e-12);
            assert!((p.jac.m[0][1] - 1.0).abs() < 1e-12);
            assert!((p.jac.m[1][0] + a).abs() < 1e-12);
            assert!((p.jac.m[1][1] - 1.0).abs() < 1e-12);
            assert!(p.jac.det() > 0.0);
            // Consistency with the inverse map's Jacobian.
            let e = net.forward(t1, t2).unwrap();
            let je = match &net.imp {
                NetImpl::Closed { inverse, .. } => {
                    let j = inverse.eval_jet2(Jet2::var1(e[0]), Jet2::var2(e[1]));
                    Mat2::new(j[0].d1, j[0].d2, j[1].d1, j[1].d2)
                }
                _ => unreachable!(),
            };
            let prod = p.jac.mul_mat(&je);
            assert!((prod.m[0][0] - 1.0).abs() < 1e-10);
            assert!((prod.m[1][1] - 1.0).abs() < 1e-10);
            assert!(prod.m[0][1].abs() < 1e-10);
            assert!(prod.m[1][0].abs() < 1e-10);
            // Hessian against the hand second derivative of asinh(2t)/pi.
            let dd = (2.0 / PI) * (-4.0 * t1) * (1.0 + 4.0 * t1 * t1).powf(-1.5);
            let h = p.hess.unwrap();
            assert!((h[0].m[0][0] - dd).abs() < 1e-10);
            assert!(h[0].m[1][1].abs() < 1e-12);
            assert!((h[1].m[0][0] + dd).abs() < 1e-10);
        }
    }

    #[test]
    fn orientation_error_detected() {
        let fwd = FnPlaneMap { f: |t1: Jet2, t2: Jet2| [t2, t1] };
        let inv = FnPlaneMap { f: |e1: Jet2, e2: Jet2| [e2, e1] };
        let r = build_net_closed_form(Domain::new(0.0, 1.0, 0.0, 1.0), Arc::new(fwd), Arc::new(inv));
        assert!(matches!(r, Err(Error::OrientationError { .. })));
    }

    #[test]
    fn identity_fast_path() {
        let map = FnSurface { f: |t1: Jet2, t2: Jet2| [t1.cos() * 4.0, t1.sin() * 4.0, t2] };
        let s = ParamSurface::new(Arc::new(map), Domain::new(0.0, PI, 0.0, 4.0));
        let net = build_net_numeric(&s, &NetConfig::default()).unwrap();
        assert_eq!(net.kind, NetKind::Identity);
        assert_eq!(net.forward(0.3, 0.4).unwrap(), [0.3, 0.4]);
        assert_eq!(net.jac(0.3, 0.4).unwrap(), Mat2::IDENTITY);
    }

    #[test]
    fn numeric_net_matches_closed_form_on_spiral() {
        let s = spiral_surface();
        let cfg = NetConfig { grid: (48, 48), ..NetConfig::default() };
        let net = build_net_numeric(&s, &cfg).unwrap();
        assert_eq!(net.kind, NetKind::Numeric);
        let oracle = spiral_net();
        // Traced values at points of the shared domain.
        for (t1, t2) in s.domain.grid(9, 9, 0.0) {
            let e_num = net.point(t1, t2, false).unwrap().eta;
            let e_ref = oracle.forward(t1, t2).unwrap();
            assert!(
                (e_num[0] - e_ref[0]).abs() < 5e-4 && (e_num[1] - e_ref[1]).abs() < 5e-4,
                "at ({t1}, {t2}): {e_num:?} vs {e_ref:?}"
            );
        }
        // Interpolated off-node queries stay within the same tolerance.
        for (t1, t2) in s.domain.grid(11, 11, 0.037) {
            let e_num = net.forward(t1, t2).unwrap();
            let e_ref = oracle.forward(t1, t2).unwrap();
            assert!((e_num[0] - e_ref[0]).abs() < 5e-4);
            assert!((e_num[1] - e_ref[1]).abs() < 5e-4);
        }
        // Numeric round trip closes on the interpolant.
        for (t1, t2) in s.domain.grid(6, 6, 0.1) {
            let e = net.forward(t1, t2).unwrap();
            let back = net.inverse(e[0], e[1]).unwrap();
            assert!((back[0] - t1).abs() < 1e-6);
            assert!((back[1] - t2).abs() < 1e-6);
        }
    }

    #[test]
    fn traced_jacobian_and_hessian_match_closed_form() {
        let s = spiral_surface();
        let cfg = NetConfig { grid: (16, 16), ..NetConfig::default() };
        let net = build_net_numeric(&s, &cfg).unwrap();
        let oracle = spiral_net();
        for (t1, t2) in [(0.8, 1.1), (2.0, 3.0), (0.3, 0.2), (3.0, 3.9)] {
            let p = net.point(t1, t2, true).unwrap();
            let q = oracle.point(t1, t2, true).unwrap();
            for i in 0..2 {
                assert!(
                    (p.eta[i] - q.eta[i]).abs() < 1e-8,
                    "eta{i} at ({t1},{t2}): {} vs {}",
                    p.eta[i],
                    q.eta[i]
                );
                for j in 0..2 {
                    assert!(
                        (p.jac.m[i][j] - q.jac.m[i][j]).abs() < 1e-7,
                        "jac[{i}][{j}] at ({t1},{t2}): {} vs {}",
                        p.jac.m[i][j],
                        q.jac.m[i][j]
                    );
                }
            }
            let ph = p.hess.unwrap();
            let qh = q.hess.unwrap();
            for m in 0..2 {
                for i in 0..2 {
                    for j in 0..2 {
                        assert!(
                            (ph[m].m[i][j] - qh[m].m[i][j]).abs() < 1e-6,
                            "hess[{m}][{i}][{j}] at ({t1},{t2}): {} vs {}",
                            ph[m].m[i][j],
                            qh[m].m[i][j]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn pushed_forward_curves_are_orthogonal_on_tendril() {
        let s = tendril_surface();
        let cfg = NetConfig { grid: (24, 24), ..NetConfig::default() };
        let net = build_net_numeric(&s, &cfg).unwrap();
        for (t1, t2) in s.domain.grid(5, 5, 0.4) {
            let p = net.point(t1, t2, false).unwrap();
            let inv = p.jac.inverse().unwrap();
            let jet = s.jet(t1, t2).unwrap();
            // x*_{,eta^a} = x_{,theta^i} dtheta^i/deta^a
            let xe1 = jet.d1 * inv.m[0][0] + jet.d2 * inv.m[1][0];
            let xe2 = jet.d1 * inv.m[0][1] + jet.d2 * inv.m[1][1];
            let res = xe1.dot(xe2).abs() / (xe1.norm() * xe2.norm());
            assert!(res < 1e-3, "orthogonality residual {res:.3e} at ({t1}, {t2})");
        }
    }

    #[test]
    fn rodrigues_along_traced_curve() {
        // Along a curvature line, dn + kappa dx = 0. The centered check
        // below is third-order in the step, so cap the step size.
        let s = tendril_surface();
        let cfg = NetConfig {
            grid: (8, 8),
            ode: OdeOptions { h_max: 0.02, ..OdeOptions::default() },
            ..NetConfig::default()
        };
        let net = build_net_numeric(&s, &cfg).unwrap();
        let NetImpl::Numeric(n) = &net.imp else { panic!() };
        let mut pts = Vec::new();
        n.tracer.trace_curve(0, [3.0, 4.0], false, &s.domain, &mut pts).unwrap();
        assert!(pts.len() > 5);
        for w in pts.windows(2).take(40) {
            let (a, b) = (w[0], w[1]);
            let ja = s.jet(a[0], a[1]).unwrap();
            let jb = s.jet(b[0], b[1]).unwrap();
            let dx = jb.p - ja.p;
            if dx.norm() < 1e-9 {
                continue;
            }
            let dn = jb.n - ja.n;
            let mid = s.forms(0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])).unwrap();
            let dth = [b[0] - a[0], b[1] - a[1]];
            let ii =
                mid.l * dth[0] * dth[0] + 2.0 * mid.m * dth[0] * dth[1] + mid.n * dth[1] * dth[1];
            let i1 =
                mid.e * dth[0] * dth[0] + 2.0 * mid.f * dth[0] * dth[1] + mid.g * dth[1] * dth[1];
            let kappa = ii / i1;
            let res = (dn + dx * kappa).norm();
            assert!(
                res < 1e-3 * kappa.abs().max(0.1) * dx.norm() + 1e-6,
                "Rodrigues residual {res:.3e} (kappa {kappa:.3})"
            );
        }
    }

    #[test]
    fn intermediate_surface_spiral_is_cylinder_patch() {
        let net = Arc::new(spiral_net());
        let r0 = 4.0;
        let reference = {
            let map =
                FnSurface { f: move |t1: Jet2, t2: Jet2| [t1.cos() * r0, t1.sin() * r0, t2] };
            ParamSurface::new(Arc::new(map), Domain::new(0.0, PI, 0.0, 4.0))
        };
        let inter = intermediate_surface(&reference, net.clone()).unwrap();
        for (e1, e2) in inter.eta_surface.domain.grid(6, 6, 1e-6) {
            let f = inter.eta_surface.forms(e1, e2).unwrap();
            let (k1, k2) = f.coordinate_curvatures();
            assert!((k1 + 0.25).abs() < 1e-12);
            assert!(k2.abs() < 1e-12);
        }
        for (t1, t2) in net.domain.grid(8, 8, 0.0) {
            let p = inter.theta_surface.position(t1, t2);
            assert!((p.x.hypot(p.y) - 4.0).abs() < 1e-9);
        }
        let idn = Arc::new(CurvatureNet::identity(reference.domain));
        let same = intermediate_surface(&reference, idn).unwrap();
        for (t1, t2) in reference.domain.grid(4, 4, 0.0) {
            assert!(
                (same.theta_surface.position(t1, t2) - reference.position(t1, t2)).norm() < 1e-14
            );
        }
    }
}
