//! Adaptive explicit Runge-Kutta integration (Dormand-Prince 5(4)) for the
//! small autonomous systems arising in curvature-line tracing, with a
//! stop-at-section event.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
    /// Hard bound on accumulated arc length.
    pub max_length: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 1e-2,
            h_min: 1e-12,
            h_max: 0.25,
            max_steps: 200_000,
            max_length: 1e4,
        }
    }
}

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];

const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand-Prince step of size `h` from `y`; returns the 5th-order
/// solution and the embedded error estimate.
fn dp_step<const N: usize, F>(f: &F, y: &[f64; N], h: f64) -> Result<([f64; N], [f64; N])>
where
    F: Fn(&[f64; N]) -> Result<[f64; N]>,
{
    let mut k = [[0.0; N]; 7];
    k[0] = f(y)?;
    for stage in 0..6 {
        let mut yi = *y;
        for (j, kj) in k.iter().enumerate().take(stage + 1) {
            let a = A[stage][j];
            if a != 0.0 {
                for (yv, kv) in yi.iter_mut().zip(kj.iter()) {
                    *yv += h * a * kv;
                }
            }
        }
        k[stage + 1] = f(&yi)?;
    }
    let mut y5 = *y;
    let mut err = [0.0; N];
    for (j, kj) in k.iter().enumerate() {
        for i in 0..N {
            y5[i] += h * B5[j] * kj[i];
            err[i] += h * (B5[j] - B4[j]) * kj[i];
        }
    }
    Ok((y5, err))
}

fn err_norm<const N: usize>(err: &[f64; N], y: &[f64; N], ynew: &[f64; N], opts: &OdeOptions) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
        let r = err[i] / sc;
        acc += r * r;
    }
    (acc / N as f64).sqrt()
}

pub struct SectionCrossing<const N: usize> {
    pub y: [f64; N],
    pub arc_length: f64,
    pub steps: usize,
}

/// Integrate `dy/ds = f(y)` from `y0` until the scalar `section(y)` crosses
/// zero (sign change relative to the start), then locate the crossing by
/// shrinking the final step. Observers may inspect every accepted state.
pub fn integrate_to_section<const N: usize, F, S>(
    f: &F,
    y0: [f64; N],
    section: &S,
    opts: &OdeOptions,
    mut observer: Option<&mut dyn FnMut(f64, &[f64; N])>,
) -> Result<SectionCrossing<N>>
where
    F: Fn(&[f64; N]) -> Result<[f64; N]>,
    S: Fn(&[f64; N]) -> f64,
{
    let start_sign = section(&y0).signum();
    if start_sign == 0.0 {
        return Ok(SectionCrossing { y: y0, arc_length: 0.0, steps: 0 });
    }
    let mut y = y0;
    let mut s = 0.0;
    let mut h = opts.h_init.min(opts.h_max);
    if let Some(obs) = observer.as_deref_mut() {
        obs(s, &y);
    }
    for step_count in 0..opts.max_steps {
        let (ynew, err) = dp_step(f, &y, h)?;
        let en = err_norm(&err, &y, &ynew, opts);
        if !en.is_finite() {
            return Err(Error::IntegrationDiverged {
                theta1: y[0],
                theta2: if N > 1 { y[1] } else { 0.0 },
                detail: "non-finite error estimate".into(),
            });
        }
        if en <= 1.0 {
            // Accepted. Crossed the section inside this step?
            if section(&ynew).signum() != start_sign {
                let yc = locate_crossing(f, &y, h, section, start_sign)?;
                if let Some(obs) = observer.as_deref_mut() {
                    obs(s + h, &yc.0);
                }
                return Ok(SectionCrossing {
                    y: yc.0,
                    arc_length: s + yc.1,
                    steps: step_count + 1,
                });
            }
            y = ynew;
            s += h;
            if let Some(obs) = observer.as_deref_mut() {
                obs(s, &y);
            }
            if s > opts.max_length {
                return Err(Error::IntegrationDiverged {
                    theta1: y[0],
                    theta2: if N > 1 { y[1] } else { 0.0 },
                    detail: format!("arc length exceeded {}", opts.max_length),
                });
            }
        }
        let fac = if en > 0.0 {
            0.9 * en.powf(-0.2)
        } else {
            5.0
        };
        h *= fac.clamp(0.2, 5.0);
        h = h.min(opts.h_max);
        if h < opts.h_min {
            return Err(Error::IntegrationDiverged {
                theta1: y[0],
                theta2: if N > 1 { y[1] } else { 0.0 },
                detail: format!("step size underflow ({h:.3e})"),
            });
        }
    }
    Err(Error::IntegrationDiverged {
        theta1: y[0],
        theta2: if N > 1 { y[1] } else { 0.0 },
        detail: format!("no section crossing within {} steps", opts.max_steps),
    })
}

/// Bisection on the partial step size: the crossing lies in (0, h].
fn locate_crossing<const N: usize, F, S>(
    f: &F,
    y: &[f64; N],
    h: f64,
    section: &S,
    start_sign: f64,
) -> Result<([f64; N], f64)>
where
    F: Fn(&[f64; N]) -> Result<[f64; N]>,
    S: Fn(&[f64; N]) -> f64,
{
    let mut lo = 0.0;
    let mut hi = h;
    let mut best = dp_step(f, y, h)?.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let (ymid, _) = dp_step(f, y, mid)?;
        if section(&ymid).signum() == start_sign {
            lo = mid;
        } else {
            hi = mid;
            best = ymid;
        }
        if (hi - lo) <= 1e-15 * h.max(1.0) {
            break;
        }
    }
    Ok((best, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_circular_motion_accurately() {
        // y' = (-y2, y1); unit circle, stop at y2 = 0 again after half turn.
        let f = |y: &[f64; 2]| Ok([-y[1], y[0]]);
        let section = |y: &[f64; 2]| y[1] + 1e-30 + (y[0] + 1.0) * 0.0 - 0.0;
        // Start just above the axis so the start sign is positive.
        let y0 = [1.0, 1e-9];
        let cross = integrate_to_section(&f, y0, &section, &OdeOptions::default(), None).unwrap();
        assert!((cross.y[0] + 1.0).abs() < 1e-8, "{:?}", cross.y);
        assert!((cross.arc_length - std::f64::consts::PI).abs() < 1e-7);
    }

    #[test]
    fn section_crossing_is_tightly_located() {
        let f = |y: &[f64; 1]| Ok([1.0 + 0.0 * y[0]]);
        let section = |y: &[f64; 1]| 0.7371 - y[0];
        let cross = integrate_to_section(&f, [0.0], &section, &OdeOptions::default(), None).unwrap();
        assert!((cross.y[0] - 0.7371).abs() < 1e-12);
    }

    #[test]
    fn reports_divergence_on_runaway() {
        let f = |y: &[f64; 1]| Ok([y[0] * y[0] + 1.0]);
        let section = |y: &[f64; 1]| 1e12 - y[0];
        let opts = OdeOptions { max_length: 10.0, ..OdeOptions::default() };
        assert!(matches!(
            integrate_to_section(&f, [0.0], &section, &opts, None),
            Err(Error::IntegrationDiverged { .. })
        ));
    }
}
