//! Gierer-Meinhardt kinetics `f = u^p/v^r - b1 u + sigma1`,
//! `g = u^q/v^s - b2 v + sigma2`, their Jacobian, equilibria and the
//! diffusion-driven (Turing) instability conditions.

use thiserror::Error;

use crate::model::ModelParams;

#[derive(Debug, Error, PartialEq)]
pub enum ReactionError {
    #[error("reaction singular: v = {v} is below the floor {floor}")]
    Singular { v: f64, floor: f64 },
    #[error("negative activator u = {u}")]
    NegativeActivator { u: f64 },
    #[error("no positive equilibrium found")]
    NoEquilibrium,
}

/// `x^e` with an integer fast path; `0^0 = 1`.
#[inline]
pub fn power(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if e.fract() == 0.0 && e.abs() <= 64.0 {
        x.powi(e as i32)
    } else {
        x.powf(e)
    }
}

#[inline]
fn guard(u: f64, v: f64, exponent: f64, params: &ModelParams) -> Result<(), ReactionError> {
    if u < 0.0 {
        return Err(ReactionError::NegativeActivator { u });
    }
    if exponent > 0.0 && !(v >= params.v_floor) {
        return Err(ReactionError::Singular {
            v,
            floor: params.v_floor,
        });
    }
    Ok(())
}

#[inline]
pub fn eval_f(u: f64, v: f64, params: &ModelParams) -> Result<f64, ReactionError> {
    guard(u, v, params.r, params)?;
    Ok(power(u, params.p) / power(v, params.r) - params.b1 * u + params.sigma1)
}

#[inline]
pub fn eval_g(u: f64, v: f64, params: &ModelParams) -> Result<f64, ReactionError> {
    guard(u, v, params.s, params)?;
    Ok(power(u, params.q) / power(v, params.s) - params.b2 * v + params.sigma2)
}

/// Partial derivatives of `(f, g)` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian {
    pub f_u: f64,
    pub f_v: f64,
    pub g_u: f64,
    pub g_v: f64,
}

impl Jacobian {
    pub fn trace(&self) -> f64 {
        self.f_u + self.g_v
    }
    pub fn det(&self) -> f64 {
        self.f_u * self.g_v - self.f_v * self.g_u
    }
}

// d/dx x^e, with the e = 0 term dropped so 0^{-1} never appears
fn dpow(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        0.0
    } else {
        e * power(x, e - 1.0)
    }
}

pub fn jacobian_at(u: f64, v: f64, params: &ModelParams) -> Result<Jacobian, ReactionError> {
    guard(u, v, params.r.max(params.s).max(1.0), params)?;
    let ModelParams {
        p, q, r, s, b1, b2, ..
    } = *params;
    Ok(Jacobian {
        f_u: dpow(u, p) / power(v, r) - b1,
        f_v: -r * power(u, p) / power(v, r + 1.0),
        g_u: dpow(u, q) / power(v, s),
        g_v: -s * power(u, q) / power(v, s + 1.0) - b2,
    })
}

/// Positive equilibrium of the kinetics. The reduced kinetics
/// (`p = q = 2, r = 1, s = 0, b2 = 1, sigma = 0`) use the closed form
/// `(1/b1, 1/b1^2)`; anything else goes through [`newton_equilibrium`]
/// started at `(1, 1)`.
pub fn ode_equilibrium(params: &ModelParams) -> Result<(f64, f64), ReactionError> {
    if params.is_reduced() {
        let b = params.b1;
        return Ok((1.0 / b, 1.0 / (b * b)));
    }
    newton_equilibrium(params, (1.0, 1.0))
}

const NEWTON_MAX_ITER: usize = 200;
const NEWTON_TOL: f64 = 1e-12;

/// Damped Newton iteration on `(f, g) = 0` that keeps iterates positive.
pub fn newton_equilibrium(
    params: &ModelParams,
    start: (f64, f64),
) -> Result<(f64, f64), ReactionError> {
    let (mut u, mut v) = start;
    if !(u > 0.0 && v > 0.0) {
        return Err(ReactionError::NoEquilibrium);
    }
    let residual = |u: f64, v: f64| -> Option<(f64, f64)> {
        Some((eval_f(u, v, params).ok()?, eval_g(u, v, params).ok()?))
    };
    for _ in 0..NEWTON_MAX_ITER {
        let (f, g) = residual(u, v).ok_or(ReactionError::NoEquilibrium)?;
        let norm = f.abs().max(g.abs());
        if norm <= NEWTON_TOL {
            return Ok((u, v));
        }
        let j = jacobian_at(u, v, params).map_err(|_| ReactionError::NoEquilibrium)?;
        let det = j.det();
        if det == 0.0 || !det.is_finite() {
            return Err(ReactionError::NoEquilibrium);
        }
        let du = -(j.g_v * f - j.f_v * g) / det;
        let dv = -(-j.g_u * f + j.f_u * g) / det;
        let mut step = 1.0;
        loop {
            let (nu, nv) = (u + step * du, v + step * dv);
            if nu > 0.0 && nv > 0.0 {
                if let Some((nf, ng)) = residual(nu, nv) {
                    if nf.abs().max(ng.abs()) < norm || step < 1e-3 {
                        u = nu;
                        v = nv;
                        break;
                    }
                }
            }
            step *= 0.5;
            if step < 1e-10 {
                return Err(ReactionError::NoEquilibrium);
            }
        }
    }
    Err(ReactionError::NoEquilibrium)
}

/// Outcome of the four Turing inequalities at the positive equilibrium.
///
/// Each margin is the signed distance from its inequality boundary, so
/// `conditions[i] == (margins[i] > 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuringReport {
    pub equilibrium: (f64, f64),
    pub jacobian: Jacobian,
    pub conditions: [bool; 4],
    pub margins: [f64; 4],
}

impl TuringReport {
    pub fn all(&self) -> bool {
        self.conditions.iter().all(|&c| c)
    }
}

/// Margins from a Jacobian and diffusion pair:
/// `-(f_u + g_v)`, `det J`, `d2 f_u + d1 g_v`, and
/// `d2 f_u + d1 g_v - 2 sqrt(d1 d2 det J)` (`-inf` when `det J <= 0`).
pub fn turing_margins(j: &Jacobian, d1: f64, d2: f64) -> [f64; 4] {
    let det = j.det();
    let cross = d2 * j.f_u + d1 * j.g_v;
    let m4 = if det > 0.0 {
        cross - 2.0 * (d1 * d2 * det).sqrt()
    } else {
        f64::NEG_INFINITY
    };
    [-j.trace(), det, cross, m4]
}

pub fn turing_check(params: &ModelParams) -> Result<TuringReport, ReactionError> {
    let equilibrium = ode_equilibrium(params)?;
    let jacobian = jacobian_at(equilibrium.0, equilibrium.1, params)?;
    let margins = turing_margins(&jacobian, params.d1, params.d2);
    Ok(TuringReport {
        equilibrium,
        jacobian,
        conditions: margins.map(|m| m > 0.0),
        margins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reduced(b: f64) -> ModelParams {
        ModelParams::reduced(b, 0.3, 30.0)
    }

    #[test]
    fn f_examples() {
        let p = reduced(0.5);
        assert_eq!(eval_f(2.0, 4.0, &p).unwrap(), 0.0);
        assert_eq!(eval_f(1.0, 1.0, &p).unwrap(), 0.5);
        let mut basal = p;
        basal.sigma1 = 0.1;
        assert_eq!(eval_f(0.0, 3.0, &basal).unwrap(), 0.1);
    }

    #[test]
    fn g_examples() {
        let p = reduced(0.5);
        assert_eq!(eval_g(2.0, 4.0, &p).unwrap(), 0.0);
        assert_eq!(eval_g(1.0, 1.0, &p).unwrap(), 0.0);
        assert_eq!(eval_g(0.0, 1.0, &p).unwrap(), -1.0);
    }

    #[test]
    fn singular_inhibitor_is_an_error() {
        let p = reduced(0.5);
        assert!(matches!(eval_f(1.0, 0.0, &p), Err(ReactionError::Singular { .. })));
        assert!(matches!(eval_f(1.0, -1.0, &p), Err(ReactionError::Singular { .. })));
        // s = 0: g has no singularity in v
        assert!(eval_g(1.0, 0.0, &p).is_ok());
    }

    #[test]
    fn zero_to_the_zero_is_one() {
        let mut p = reduced(0.5);
        p.p = 0.0;
        assert_eq!(eval_f(0.0, 1.0, &p).unwrap(), 1.0);
        assert_eq!(power(0.0, 0.0), 1.0);
        assert_eq!(power(2.0, 0.5), 2f64.sqrt());
    }

    #[test]
    fn closed_form_equilibria() {
        assert_eq!(ode_equilibrium(&reduced(0.5)).unwrap(), (2.0, 4.0));
        assert_eq!(ode_equilibrium(&reduced(1.0)).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn newton_matches_closed_form() {
        let p = reduced(0.5);
        let (u, v) = newton_equilibrium(&p, (1.0, 1.0)).unwrap();
        assert!((u - 2.0).abs() < 1e-10 && (v - 4.0).abs() < 1e-10, "{u} {v}");
    }

    #[test]
    fn newton_with_basal_production() {
        let mut p = reduced(0.5);
        p.sigma1 = 0.05;
        p.sigma2 = 0.02;
        let (u, v) = ode_equilibrium(&p).unwrap();
        assert!(eval_f(u, v, &p).unwrap().abs() < 1e-12);
        assert!(eval_g(u, v, &p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn jacobian_direct_formula() {
        let p = reduced(0.5);
        let j = jacobian_at(2.0, 4.0, &p).unwrap();
        assert_eq!((j.f_u, j.f_v, j.g_u, j.g_v), (0.5, -0.25, 4.0, -1.0));
        let j = jacobian_at(1.0, 1.0, &p).unwrap();
        assert_eq!(j.f_u, 1.5);
    }

    #[test]
    fn reference_parameters_are_turing_unstable() {
        let r = turing_check(&reduced(0.5)).unwrap();
        assert!(r.all());
        assert!((r.margins[0] - 0.5).abs() < 1e-15);
        assert!((r.margins[1] - 0.5).abs() < 1e-15);
        assert!((r.margins[2] - 14.7).abs() < 1e-12);
        assert!((r.margins[3] - (14.7 - 2.0 * 4.5f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn equal_diffusion_fails_condition_four() {
        let r = turing_check(&ModelParams::reduced(0.5, 1.0, 1.0)).unwrap();
        assert!(r.conditions[0] && r.conditions[1]);
        assert!(!r.conditions[2]);
        assert!(!r.conditions[3]);
    }

    #[test]
    fn large_decay_fails_condition_one() {
        let r = turing_check(&reduced(2.0)).unwrap();
        assert!(!r.conditions[0]);
        assert_eq!(r.margins[0], -1.0);
    }

    #[test]
    fn nonpositive_determinant_sentinel() {
        let j = Jacobian {
            f_u: 1.0,
            f_v: 1.0,
            g_u: 1.0,
            g_v: 1.0,
        };
        assert_eq!(turing_margins(&j, 1.0, 2.0)[3], f64::NEG_INFINITY);
    }
}
