//! Radial convolution kernels and their discrete stencils.
//!
//! A [`KernelSpec`] describes a continuous kernel `phi(|z|)`; discretizing it
//! on a [`Grid`] samples `phi` at lattice offsets and folds in the
//! midpoint-rule cell weight, so that `sum(weights)` approximates `int phi dy`.

use std::f64::consts::PI;

use thiserror::Error;

use crate::grid::{Dimension, Grid};

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("kernel unresolved on grid: support radius {radius} is below the grid spacing {spacing}")]
    Unresolved { radius: f64, spacing: f64 },
    #[error("gaussian kernel needs sigma > 0 and cutoff_radius >= 3 sigma (got sigma={sigma}, cutoff={cutoff})")]
    BadGaussian { sigma: f64, cutoff: f64 },
    #[error("rescaled bump needs j >= 1")]
    BadBump,
    #[error("M defined only for diffusive-limit kernels")]
    MomentUndefined,
    #[error("kernel was discretized on a different grid")]
    GridMismatch,
}

/// Continuous kernel description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// Unit-mass Gaussian of standard deviation `sigma`, truncated at `cutoff_radius`.
    Gaussian { sigma: f64, cutoff_radius: f64 },
    /// `j^{n+2} psi(j |z|)` with `psi` the normalized quadratic bump on `[0, 1]`.
    RescaledBump { j: u32 },
}

impl KernelSpec {
    /// Gaussian truncated at the minimum admissible radius `3 sigma`.
    pub fn gaussian(sigma: f64) -> Self {
        KernelSpec::Gaussian {
            sigma,
            cutoff_radius: 3.0 * sigma,
        }
    }

    pub fn rescaled_bump(j: u32) -> Self {
        KernelSpec::RescaledBump { j }
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        match *self {
            KernelSpec::Gaussian {
                sigma,
                cutoff_radius,
            } => {
                // small slack so `3.0 * sigma` round trips through text
                if !(sigma > 0.0 && sigma.is_finite() && cutoff_radius >= 3.0 * sigma * (1.0 - 1e-12))
                {
                    return Err(KernelError::BadGaussian {
                        sigma,
                        cutoff: cutoff_radius,
                    });
                }
            }
            KernelSpec::RescaledBump { j } => {
                if j == 0 {
                    return Err(KernelError::BadBump);
                }
            }
        }
        Ok(())
    }

    pub fn support_radius(&self) -> f64 {
        match *self {
            KernelSpec::Gaussian { cutoff_radius, .. } => cutoff_radius,
            KernelSpec::RescaledBump { j } => 1.0 / j as f64,
        }
    }

    /// Kernel value at distance `r` (zero outside the support).
    pub fn profile(&self, r: f64, dim: Dimension) -> f64 {
        match *self {
            KernelSpec::Gaussian {
                sigma,
                cutoff_radius,
            } => {
                if r > cutoff_radius {
                    return 0.0;
                }
                let norm = (2.0 * PI * sigma * sigma).powf(-(dim.n() as f64) / 2.0);
                norm * (-r * r / (2.0 * sigma * sigma)).exp()
            }
            KernelSpec::RescaledBump { j } => {
                let j = j as f64;
                j.powi(dim.n() as i32 + 2) * bump_psi(j * r, dim)
            }
        }
    }
}

/// Normalization constant `c` making `int_{R^n} c (1 - |z|)_+^2 dz = 1`.
pub fn bump_constant(dim: Dimension) -> f64 {
    match dim {
        // 2 c int_0^1 (1-r)^2 dr = 2c/3
        Dimension::One => 1.5,
        // 2 pi c int_0^1 r (1-r)^2 dr = pi c / 6
        Dimension::Two => 6.0 / PI,
    }
}

/// Quadratic bump `c (1 - r)_+^2`, zero outside `[0, 1]`.
pub fn bump_psi(r: f64, dim: Dimension) -> f64 {
    if !(0.0..1.0).contains(&r) {
        return 0.0;
    }
    bump_constant(dim) * (1.0 - r) * (1.0 - r)
}

/// Five-point Gauss-Legendre on `panels` equal subintervals of `[a, b]`.
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    const NODES: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_47,
        0.478_628_670_499_366_47,
        0.236_926_885_056_189_08,
        0.236_926_885_056_189_08,
    ];
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let mid = a + (k as f64 + 0.5) * h;
            NODES
                .iter()
                .zip(WEIGHTS)
                .map(|(x, w)| w * f(mid + 0.5 * h * x))
                .sum::<f64>()
                * 0.5
                * h
        })
        .sum()
}

/// `int_{R^n} |z|^2 profile(|z|) dz` for a radial profile supported in `[0, 1]`.
pub fn radial_second_moment(profile: impl Fn(f64) -> f64, dim: Dimension) -> f64 {
    match dim {
        Dimension::One => 2.0 * integrate(|r| r * r * profile(r), 0.0, 1.0, 256),
        Dimension::Two => 2.0 * PI * integrate(|r| r * r * r * profile(r), 0.0, 1.0, 256),
    }
}

/// Second moment `M` of the unrescaled bump; independent of `j`.
pub fn second_moment_m(spec: &KernelSpec, dim: Dimension) -> Result<f64, KernelError> {
    match spec {
        KernelSpec::RescaledBump { .. } => Ok(radial_second_moment(|r| bump_psi(r, dim), dim)),
        KernelSpec::Gaussian { .. } => Err(KernelError::MomentUndefined),
    }
}

/// Stencil of a translation-invariant kernel on a specific grid.
///
/// The centre offset is not part of the stencil (its summand `z(x) - z(x)`
/// vanishes); its sample is kept in `center_weight` for quadrature checks.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteKernel {
    grid: Grid,
    offsets: Vec<(i32, i32)>,
    weights: Vec<f64>,
    mass_lambda: f64,
    second_moment: f64,
    center_weight: f64,
}

impl DiscreteKernel {
    /// Builds a stencil from explicit offsets and weights.
    ///
    /// Panics if the lists differ in length, a weight is negative, the
    /// centre offset is present, or the stencil is not symmetric.
    pub fn from_parts(grid: Grid, offsets: Vec<(i32, i32)>, weights: Vec<f64>) -> Self {
        assert_eq!(offsets.len(), weights.len());
        assert!(weights.iter().all(|&w| w >= 0.0 && w.is_finite()));
        assert!(!offsets.contains(&(0, 0)));
        for (o, w) in offsets.iter().zip(&weights) {
            let mirror = offsets
                .iter()
                .position(|m| *m == (-o.0, -o.1))
                .expect("stencil must be symmetric");
            assert_eq!(weights[mirror], *w);
        }
        let mass_lambda = weights.iter().sum();
        let second_moment = offsets
            .iter()
            .zip(&weights)
            .map(|(&(dx, dy), w)| {
                let x = dx as f64 * grid.hx();
                let y = dy as f64 * grid.hy();
                w * (x * x + y * y)
            })
            .sum();
        DiscreteKernel {
            grid,
            offsets,
            weights,
            mass_lambda,
            second_moment,
            center_weight: 0.0,
        }
    }

    /// Nearest-neighbour stencil with weights `1/hx^2`, `1/hy^2`. Domain
    /// truncation of this stencil is the mirror-reflected Neumann Laplacian.
    pub fn laplacian_stencil(grid: Grid) -> Self {
        let mut offsets = vec![(1, 0), (-1, 0)];
        let wx = 1.0 / (grid.hx() * grid.hx());
        let mut weights = vec![wx, wx];
        if grid.dimension() == Dimension::Two {
            let wy = 1.0 / (grid.hy() * grid.hy());
            offsets.extend([(0, 1), (0, -1)]);
            weights.extend([wy, wy]);
        }
        DiscreteKernel::from_parts(grid, offsets, weights)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn offsets(&self) -> &[(i32, i32)] {
        &self.offsets
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    /// `sum(weights)`; bounds `int_Omega phi(x, y) dy` at every `x`.
    pub fn mass_lambda(&self) -> f64 {
        self.mass_lambda
    }
    /// `sum(weights * |offset * h|^2)`.
    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }
    pub fn center_weight(&self) -> f64 {
        self.center_weight
    }
    pub fn len(&self) -> usize {
        self.offsets.len()
    }
    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn weight(&self, offset: (i32, i32)) -> f64 {
        self.offsets
            .iter()
            .position(|o| *o == offset)
            .map_or(0.0, |i| self.weights[i])
    }

    /// Largest `|dix|` and `|diy|` over the stencil.
    pub fn reach(&self) -> (usize, usize) {
        self.offsets.iter().fold((0, 0), |(rx, ry), &(dx, dy)| {
            (rx.max(dx.unsigned_abs() as usize), ry.max(dy.unsigned_abs() as usize))
        })
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<(), KernelError> {
        if &self.grid == grid {
            Ok(())
        } else {
            Err(KernelError::GridMismatch)
        }
    }
}

/// Samples `spec` at every lattice offset inside its support.
pub fn discretize_kernel(spec: &KernelSpec, grid: &Grid) -> Result<DiscreteKernel, KernelError> {
    spec.validate()?;
    let dim = grid.dimension();
    let radius = spec.support_radius();
    let spacing = grid.min_spacing();
    if radius < spacing {
        return Err(KernelError::Unresolved { radius, spacing });
    }
    let (hx, hy) = (grid.hx(), grid.hy());
    let vol = grid.cell_volume();
    // offsets beyond the grid never land inside the domain
    let rx = ((radius / hx).floor() as usize).min(grid.nx() - 1) as i32;
    let ry = match dim {
        Dimension::One => 0,
        Dimension::Two => ((radius / hy).floor() as usize).min(grid.ny() - 1) as i32,
    };
    let strict = matches!(spec, KernelSpec::RescaledBump { .. });
    let mut offsets = Vec::new();
    let mut weights = Vec::new();
    for dy in -ry..=ry {
        for dx in -rx..=rx {
            if (dx, dy) == (0, 0) {
                continue;
            }
            let x = dx as f64 * hx;
            let y = dy as f64 * hy;
            let r = (x * x + y * y).sqrt();
            let inside = if strict { r < radius } else { r <= radius };
            if !inside {
                continue;
            }
            let w = spec.profile(r, dim) * vol;
            if w > 0.0 {
                offsets.push((dx, dy));
                weights.push(w);
            }
        }
    }
    if offsets.is_empty() {
        return Err(KernelError::Unresolved { radius, spacing });
    }
    let mut kernel = DiscreteKernel::from_parts(*grid, offsets, weights);
    kernel.center_weight = spec.profile(0.0, dim) * vol;
    Ok(kernel)
}
