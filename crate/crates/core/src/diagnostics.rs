//! Norms and boundedness functionals evaluated along trajectories.
//!
//! All integrals are midpoint-rule sums with the grid's cell volume.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Field, GridError};
use crate::kernels::{DiscreteKernel, KernelError};
use crate::model::ModelParams;

/// Largest exponent accepted by [`lb_functional`].
pub const MAX_LB_EXPONENT: u32 = 60;

#[derive(Debug, Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("inhibitor must be strictly positive (found {value} at cell {cell})")]
    Positivity { cell: usize, value: f64 },
    #[error("L^b functional needs 2 <= b <= {MAX_LB_EXPONENT} (got {0})")]
    ExponentOutOfRange(u32),
    #[error("functional overflowed to a non-finite value")]
    Overflow,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// `(sum |z|^b dV)^(1/b)`.
pub fn lb_norm(z: &Field, b: f64) -> f64 {
    assert!(b >= 1.0, "lb_norm needs b >= 1");
    let vol = z.grid().cell_volume();
    let s: f64 = if b == 1.0 {
        z.values().iter().map(|x| x.abs()).sum()
    } else if b == 2.0 {
        z.values().iter().map(|x| x * x).sum()
    } else {
        z.values().iter().map(|x| x.abs().powf(b)).sum()
    };
    (s * vol).powf(1.0 / b)
}

/// Upper end of the admissible window for `beta` in the `u^alpha / v^beta`
/// functional.
pub fn compute_gamma(alpha: f64, d1: f64, d2: f64) -> f64 {
    let cross = d1 * d2 * (alpha + 2.0);
    let diff = (d1 - d2) * (d1 - d2) * (alpha + 1.0);
    (8.0 * cross + diff) / (4.0 * cross + diff)
}

/// `a` must exceed this for the `L^b` functional to be nonincreasing under
/// diffusion; the positive-definiteness threshold of the coupling matrix.
pub fn sylvester_threshold(d1: f64, d2: f64) -> f64 {
    1f64.max((d1 + d2) / (2.0 * (d1 * d2).sqrt()))
}

/// `int u^alpha / v^beta dx`.
pub fn y_functional(u: &Field, v: &Field, alpha: f64, beta: f64) -> Result<f64, DiagnosticsError> {
    u.check_same_grid(v)?;
    let mut acc = 0.0;
    for (i, (&a, &b)) in u.values().iter().zip(v.values()).enumerate() {
        if !(b > 0.0) {
            return Err(DiagnosticsError::Positivity { cell: i, value: b });
        }
        acc += a.powf(alpha) / b.powf(beta);
    }
    Ok(acc * u.grid().cell_volume())
}

/// Exact binomial coefficients `C(b, k)` for `k = 0..=b`.
pub fn binomial_row(b: u32) -> Vec<u64> {
    let mut row = vec![1u64; b as usize + 1];
    for k in 1..=b as usize {
        // C(b, k) = C(b, k-1) (b - k + 1) / k, exact in u128
        row[k] = (row[k - 1] as u128 * (b as u128 - k as u128 + 1) / k as u128) as u64;
    }
    row
}

/// `int sum_k C(b, k) a^(k^2) u^k v^(b-k) dx`.
pub fn lb_functional(u: &Field, v: &Field, b: u32, a: f64) -> Result<f64, DiagnosticsError> {
    if !(2..=MAX_LB_EXPONENT).contains(&b) {
        return Err(DiagnosticsError::ExponentOutOfRange(b));
    }
    u.check_same_grid(v)?;
    let coeffs: Vec<f64> = binomial_row(b)
        .iter()
        .enumerate()
        .map(|(k, &c)| c as f64 * a.powi((k * k) as i32))
        .collect();
    let mut acc = 0.0;
    for (&x, &y) in u.values().iter().zip(v.values()) {
        // Horner in t = u / v would divide by v; accumulate powers directly
        let mut cell = 0.0;
        let mut uk = 1.0;
        for (k, c) in coeffs.iter().enumerate() {
            cell += c * uk * y.powi((b as usize - k) as i32);
            uk *= x;
        }
        acc += cell;
    }
    let total = acc * u.grid().cell_volume();
    if total.is_finite() {
        Ok(total)
    } else {
        Err(DiagnosticsError::Overflow)
    }
}

/// `sum_x sum_y w(x - y) (z(x) - z(y))^2 dV`; zero exactly for constants.
pub fn yj_functional(kernel: &DiscreteKernel, z: &Field) -> Result<f64, DiagnosticsError> {
    kernel.check_grid(z.grid())?;
    let grid = *z.grid();
    let zv = z.values();
    let (nx, ny) = (grid.nx() as i64, grid.ny() as i64);
    let mut acc = 0.0;
    for i in 0..grid.len() {
        let (ix, iy) = ((i % grid.nx()) as i64, (i / grid.nx()) as i64);
        for (&(dx, dy), &w) in kernel.offsets().iter().zip(kernel.weights()) {
            let (jx, jy) = (ix + dx as i64, iy + dy as i64);
            if jx < 0 || jy < 0 || jx >= nx || jy >= ny {
                continue;
            }
            let d = zv[i] - zv[(jy * nx + jx) as usize];
            acc += w * d * d;
        }
    }
    Ok(acc * grid.cell_volume())
}

/// Exponents of the boundedness functionals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalParams {
    pub alpha: f64,
    pub beta: f64,
    /// Integer exponent of the `L^b` functional.
    pub b: u32,
    pub a: f64,
}

impl FunctionalParams {
    /// `beta = 1`, `b = 2`, `a` 5% above the Sylvester threshold, and
    /// `alpha = 2` unless `alpha > b2 / b1` needs more, in which case the
    /// smallest integer above `b2 / b1`.
    pub fn defaults_for(params: &ModelParams) -> Self {
        let bound = params.b2 / params.b1;
        let alpha = if 2.0 > bound { 2.0 } else { bound.floor() + 1.0 };
        FunctionalParams {
            alpha,
            beta: 1.0,
            b: 2,
            a: 1.05 * sylvester_threshold(params.d1, params.d2),
        }
    }

    pub fn gamma(&self, params: &ModelParams) -> f64 {
        compute_gamma(self.alpha, params.d1, params.d2)
    }
}

/// Violated admissibility constraint.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `1 <= beta < min{2, gamma}`
    BetaWindow { beta: f64, gamma: f64 },
    /// `alpha > b2 beta / b1`
    AlphaBound { alpha: f64, bound: f64 },
    /// `a > max{1, (d1 + d2) / (2 sqrt(d1 d2))}`
    SylvesterThreshold { a: f64, threshold: f64 },
    /// `2 <= b <= 60`
    Exponent { b: u32 },
    /// `(p - 1)/q < min{r/(s + 1), 1}`
    KineticExponents { lhs: f64, rhs: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::BetaWindow { beta, gamma } => write!(
                f,
                "beta = {beta} violates 1 ≤ β < min{{2,γ}} (γ = {gamma})"
            ),
            Violation::AlphaBound { alpha, bound } => {
                write!(f, "alpha = {alpha} violates α > b2·β/b1 = {bound}")
            }
            Violation::SylvesterThreshold { a, threshold } => write!(
                f,
                "a = {a} violates a > max{{1,(d1+d2)/(2√(d1·d2))}} = {threshold}"
            ),
            Violation::Exponent { b } => {
                write!(f, "b = {b} violates 2 ≤ b ≤ {MAX_LB_EXPONENT}")
            }
            Violation::KineticExponents { lhs, rhs } => {
                write!(f, "(p-1)/q = {lhs} violates (p-1)/q < min{{r/(s+1),1}} = {rhs}")
            }
        }
    }
}

/// Checks every admissibility window; returns all violations at once.
pub fn validate_functional_params(
    fp: &FunctionalParams,
    params: &ModelParams,
) -> Result<FunctionalParams, Vec<Violation>> {
    let mut bad = Vec::new();
    let gamma = fp.gamma(params);
    if !(fp.beta >= 1.0 && fp.beta < 2f64.min(gamma)) {
        bad.push(Violation::BetaWindow {
            beta: fp.beta,
            gamma,
        });
    }
    let bound = params.b2 * fp.beta / params.b1;
    if !(fp.alpha > bound) {
        bad.push(Violation::AlphaBound {
            alpha: fp.alpha,
            bound,
        });
    }
    let threshold = sylvester_threshold(params.d1, params.d2);
    if !(fp.a > threshold) {
        bad.push(Violation::SylvesterThreshold { a: fp.a, threshold });
    }
    if !(2..=MAX_LB_EXPONENT).contains(&fp.b) {
        bad.push(Violation::Exponent { b: fp.b });
    }
    if params.q > 0.0 {
        let lhs = (params.p - 1.0) / params.q;
        let rhs = (params.r / (params.s + 1.0)).min(1.0);
        if !(lhs < rhs) {
            bad.push(Violation::KineticExponents { lhs, rhs });
        }
    }
    if bad.is_empty() {
        Ok(*fp)
    } else {
        Err(bad)
    }
}

/// Observables at one recorded instant.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub step: u64,
    pub min_u: f64,
    pub max_u: f64,
    pub min_v: f64,
    pub max_v: f64,
    /// `(b, ||u||_b, ||v||_b)` for each configured exponent.
    pub lb_norms: Vec<(f64, f64, f64)>,
    pub y_functional: f64,
    pub lb_functional: f64,
    pub yj_u: f64,
    pub yj_v: f64,
}

impl DiagnosticsRecord {
    pub fn norm(&self, b: f64) -> Option<(f64, f64)> {
        self.lb_norms
            .iter()
            .find(|(e, _, _)| *e == b)
            .map(|&(_, nu, nv)| (nu, nv))
    }
}

/// What to evaluate at each record.
#[derive(Debug, Clone)]
pub struct DiagnosticsPlan {
    pub functionals: FunctionalParams,
    pub norm_exponents: Vec<f64>,
    /// Stencil for the `Y` energy; the run's nonlocal kernel, or the
    /// nearest-neighbour stencil for local runs.
    pub energy_kernel: DiscreteKernel,
}

impl DiagnosticsPlan {
    pub fn record(&self, t: f64, step: u64, u: &Field, v: &Field) -> Result<DiagnosticsRecord, DiagnosticsError> {
        let lb_norms = self
            .norm_exponents
            .iter()
            .map(|&b| (b, lb_norm(u, b), lb_norm(v, b)))
            .collect();
        let fp = &self.functionals;
        Ok(DiagnosticsRecord {
            t,
            step,
            min_u: u.min(),
            max_u: u.max(),
            min_v: v.min(),
            max_v: v.max(),
            lb_norms,
            y_functional: y_functional(u, v, fp.alpha, fp.beta)?,
            lb_functional: lb_functional(u, v, fp.b, fp.a)?,
            yj_u: yj_functional(&self.energy_kernel, u)?,
            yj_v: yj_functional(&self.energy_kernel, v)?,
        })
    }
}
