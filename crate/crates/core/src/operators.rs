//! Discrete diffusion operators.
//!
//! The nonlocal operator is `(Gamma z)(x) = sum_y w(x - y) (z(y) - z(x))` with
//! `y` ranging over the cells of the domain only; offsets that leave the
//! domain are dropped. The Laplacian is the usual 3/5-point stencil with
//! mirror ghosts at the boundary.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::grid::{Dimension, Field, Grid, GridError};
use crate::kernels::{DiscreteKernel, KernelError};

#[derive(Debug, Error, PartialEq)]
pub enum OperatorError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Rows per rayon task when sweeping stencils.
const ROWS_PER_TASK: usize = 8;

fn in_domain(grid: &Grid, ix: usize, iy: usize, (dx, dy): (i32, i32)) -> Option<usize> {
    let jx = ix as i64 + dx as i64;
    let jy = iy as i64 + dy as i64;
    if jx < 0 || jy < 0 || jx >= grid.nx() as i64 || jy >= grid.ny() as i64 {
        None
    } else {
        Some(grid.index(jx as usize, jy as usize))
    }
}

/// Reference evaluation of `Gamma z`: one pass over the stencil per cell
/// with an explicit domain test on every offset.
pub fn apply_nonlocal(kernel: &DiscreteKernel, z: &Field) -> Result<Field, OperatorError> {
    kernel.check_grid(z.grid())?;
    let grid = *z.grid();
    let zv = z.values();
    let mut out = vec![0.0; grid.len()];
    out.par_chunks_mut(grid.nx() * ROWS_PER_TASK)
        .enumerate()
        .for_each(|(chunk, rows)| {
            for (k, o) in rows.iter_mut().enumerate() {
                let i = chunk * grid.nx() * ROWS_PER_TASK + k;
                let (ix, iy) = (i % grid.nx(), i / grid.nx());
                let zx = zv[i];
                let mut acc = 0.0;
                for (&off, &w) in kernel.offsets().iter().zip(kernel.weights()) {
                    if let Some(j) = in_domain(&grid, ix, iy, off) {
                        acc += w * (zv[j] - zx);
                    }
                }
                *o = acc;
            }
        });
    Ok(Field::from_values(grid, out)?)
}

/// Convenience wrapper building a [`NonlocalOperator`] for a single application.
pub fn apply_nonlocal_fast(kernel: &DiscreteKernel, z: &Field) -> Result<Field, OperatorError> {
    kernel.check_grid(z.grid())?;
    Ok(NonlocalOperator::new(kernel.clone()).apply(z)?)
}

/// How [`NonlocalOperator`] evaluates the in-domain convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Pick by stencil size.
    Auto,
    Stencil,
    Fft,
}

/// Stencils with more offsets than this use the FFT route under `Auto`.
const FFT_THRESHOLD: usize = 200;

struct FftPlan {
    px: usize,
    py: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    kernel_hat: Vec<Complex<f64>>,
}

impl std::fmt::Debug for FftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPlan")
            .field("px", &self.px)
            .field("py", &self.py)
            .finish()
    }
}

impl FftPlan {
    fn new(kernel: &DiscreteKernel) -> Self {
        let grid = kernel.grid();
        let (rx, ry) = kernel.reach();
        // linear convolution on [0, n) needs n + reach points of zero padding
        let px = grid.nx() + rx;
        let py = grid.ny() + ry;
        let mut planner = FftPlanner::new();
        let fwd_x = planner.plan_fft_forward(px);
        let inv_x = planner.plan_fft_inverse(px);
        let fwd_y = planner.plan_fft_forward(py);
        let inv_y = planner.plan_fft_inverse(py);
        let mut plan = FftPlan {
            px,
            py,
            fwd_x,
            inv_x,
            fwd_y,
            inv_y,
            kernel_hat: vec![Complex::new(0.0, 0.0); px * py],
        };
        let mut buf = vec![Complex::new(0.0, 0.0); px * py];
        for (&(dx, dy), &w) in kernel.offsets().iter().zip(kernel.weights()) {
            let kx = (dx.rem_euclid(px as i32)) as usize;
            let ky = (dy.rem_euclid(py as i32)) as usize;
            buf[ky * px + kx].re += w;
        }
        plan.transform(&mut buf, false);
        plan.kernel_hat = buf;
        plan
    }

    fn transform(&self, buf: &mut [Complex<f64>], inverse: bool) {
        let (fx, fy) = if inverse {
            (&self.inv_x, &self.inv_y)
        } else {
            (&self.fwd_x, &self.fwd_y)
        };
        for row in buf.chunks_exact_mut(self.px) {
            fx.process(row);
        }
        if self.py > 1 {
            let mut col = vec![Complex::new(0.0, 0.0); self.py];
            for ix in 0..self.px {
                for (iy, c) in col.iter_mut().enumerate() {
                    *c = buf[iy * self.px + ix];
                }
                fy.process(&mut col);
                for (iy, c) in col.iter().enumerate() {
                    buf[iy * self.px + ix] = *c;
                }
            }
        }
    }

    /// `out(x) = sum_o w(o) z(x + o)` with `z = 0` outside the grid.
    fn convolve(&self, grid: &Grid, z: &[f64], out: &mut [f64]) {
        let mut buf = vec![Complex::new(0.0, 0.0); self.px * self.py];
        for iy in 0..grid.ny() {
            for ix in 0..grid.nx() {
                buf[iy * self.px + ix].re = z[grid.index(ix, iy)];
            }
        }
        self.transform(&mut buf, false);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.transform(&mut buf, true);
        let scale = 1.0 / (self.px * self.py) as f64;
        for iy in 0..grid.ny() {
            for ix in 0..grid.nx() {
                out[grid.index(ix, iy)] = buf[iy * self.px + ix].re * scale;
            }
        }
    }
}

/// Precomputed nonlocal operator for repeated application on one grid.
///
/// Evaluates `conv(z)(x) - lambda_loc(x) z(x)` where `lambda_loc(x)` is the
/// stencil mass that stays inside the domain at `x`.
#[derive(Debug)]
pub struct NonlocalOperator {
    kernel: DiscreteKernel,
    local_mass: Vec<f64>,
    // linear index deltas, valid for interior cells
    deltas: Vec<isize>,
    fft: Option<FftPlan>,
}

impl NonlocalOperator {
    pub fn new(kernel: DiscreteKernel) -> Self {
        Self::with_strategy(kernel, Strategy::Auto)
    }

    pub fn with_strategy(kernel: DiscreteKernel, strategy: Strategy) -> Self {
        let grid = *kernel.grid();
        let local_mass = (0..grid.len())
            .map(|i| {
                let (ix, iy) = (i % grid.nx(), i / grid.nx());
                kernel
                    .offsets()
                    .iter()
                    .zip(kernel.weights())
                    .filter(|(&o, _)| in_domain(&grid, ix, iy, o).is_some())
                    .map(|(_, &w)| w)
                    .sum()
            })
            .collect();
        let deltas = kernel
            .offsets()
            .iter()
            .map(|&(dx, dy)| dy as isize * grid.nx() as isize + dx as isize)
            .collect();
        let use_fft = match strategy {
            Strategy::Auto => kernel.len() > FFT_THRESHOLD,
            Strategy::Stencil => false,
            Strategy::Fft => true,
        };
        let fft = use_fft.then(|| FftPlan::new(&kernel));
        NonlocalOperator {
            kernel,
            local_mass,
            deltas,
            fft,
        }
    }

    pub fn kernel(&self) -> &DiscreteKernel {
        &self.kernel
    }

    pub fn grid(&self) -> &Grid {
        self.kernel.grid()
    }

    /// Truncated stencil mass at every cell.
    pub fn local_mass(&self) -> &[f64] {
        &self.local_mass
    }

    pub fn uses_fft(&self) -> bool {
        self.fft.is_some()
    }

    pub fn apply(&self, z: &Field) -> Result<Field, GridError> {
        if z.grid() != self.grid() {
            return Err(GridError::Mismatch);
        }
        let mut out = vec![0.0; z.grid().len()];
        self.apply_into(z.values(), &mut out);
        Field::from_values(*z.grid(), out)
    }

    /// Writes `Gamma z` into `out`; both slices have the grid's length.
    pub fn apply_into(&self, z: &[f64], out: &mut [f64]) {
        let grid = *self.grid();
        debug_assert_eq!(z.len(), grid.len());
        debug_assert_eq!(out.len(), grid.len());
        if let Some(plan) = &self.fft {
            plan.convolve(&grid, z, out);
            for ((o, &m), &zx) in out.iter_mut().zip(&self.local_mass).zip(z) {
                *o -= m * zx;
            }
            return;
        }
        let (rx, ry) = self.kernel.reach();
        let nx = grid.nx();
        let ny = grid.ny();
        let weights = self.kernel.weights();
        out.par_chunks_mut(nx * ROWS_PER_TASK)
            .enumerate()
            .for_each(|(chunk, rows)| {
                for (k, o) in rows.iter_mut().enumerate() {
                    let i = chunk * nx * ROWS_PER_TASK + k;
                    let (ix, iy) = (i % nx, i / nx);
                    let interior = ix >= rx && ix + rx < nx && iy >= ry && iy + ry < ny;
                    let mut acc = 0.0;
                    if interior {
                        for (&d, &w) in self.deltas.iter().zip(weights) {
                            acc += w * z[(i as isize + d) as usize];
                        }
                    } else {
                        for (&off, &w) in self.kernel.offsets().iter().zip(weights) {
                            if let Some(j) = in_domain(&grid, ix, iy, off) {
                                acc += w * z[j];
                            }
                        }
                    }
                    *o = acc - self.local_mass[i] * z[i];
                }
            });
    }
}

/// Mirror-reflected Neumann Laplacian, `(z[i+1] - 2 z[i] + z[i-1]) / h^2` per
/// axis with `z[-1] = z[0]` and `z[n] = z[n-1]`.
pub fn apply_laplacian_neumann(z: &Field) -> Result<Field, OperatorError> {
    let grid = *z.grid();
    let mut out = vec![0.0; grid.len()];
    laplacian_into(&grid, z.values(), &mut out);
    Ok(Field::from_values(grid, out)?)
}

pub(crate) fn laplacian_into(grid: &Grid, z: &[f64], out: &mut [f64]) {
    let nx = grid.nx();
    let ny = grid.ny();
    let ax = 1.0 / (grid.hx() * grid.hx());
    let ay = 1.0 / (grid.hy() * grid.hy());
    let two_d = grid.dimension() == Dimension::Two;
    out.par_chunks_mut(nx).enumerate().for_each(|(iy, row)| {
        let base = iy * nx;
        for (ix, o) in row.iter_mut().enumerate() {
            let c = z[base + ix];
            let west = if ix == 0 { c } else { z[base + ix - 1] };
            let east = if ix + 1 == nx { c } else { z[base + ix + 1] };
            let mut acc = ax * (west - 2.0 * c + east);
            if two_d {
                let south = if iy == 0 { c } else { z[base + ix - nx] };
                let north = if iy + 1 == ny { c } else { z[base + ix + nx] };
                acc += ay * (south - 2.0 * c + north);
            }
            *o = acc;
        }
    });
}

/// Both sides of the symmetrization identity
/// `sum_x sum_y v(x) w (g(y) - g(x)) = -1/2 sum_x sum_y (v(y) - v(x)) w (g(y) - g(x))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilinearTerms {
    /// Left-hand double sum.
    pub a: f64,
    /// Symmetrized double sum, without the `-1/2` factor.
    pub b: f64,
}

impl BilinearTerms {
    pub fn residual(&self) -> f64 {
        (self.a + 0.5 * self.b).abs()
    }
}

pub fn bilinear_identity_terms(
    kernel: &DiscreteKernel,
    v: &Field,
    w: &Field,
) -> Result<BilinearTerms, OperatorError> {
    kernel.check_grid(v.grid())?;
    v.check_same_grid(w)?;
    let grid = *v.grid();
    let (vv, wv) = (v.values(), w.values());
    let mut a = 0.0;
    let mut b = 0.0;
    for i in 0..grid.len() {
        let (ix, iy) = (i % grid.nx(), i / grid.nx());
        for (&off, &k) in kernel.offsets().iter().zip(kernel.weights()) {
            if let Some(j) = in_domain(&grid, ix, iy, off) {
                let dw = wv[j] - wv[i];
                a += vv[i] * k * dw;
                b += (vv[j] - vv[i]) * k * dw;
            }
        }
    }
    let vol = grid.cell_volume();
    Ok(BilinearTerms {
        a: a * vol,
        b: b * vol,
    })
}

/// `|A + B/2|` for the double sums of [`bilinear_identity_terms`].
pub fn bilinear_identity_residual(
    kernel: &DiscreteKernel,
    v: &Field,
    w: &Field,
) -> Result<f64, OperatorError> {
    Ok(bilinear_identity_terms(kernel, v, w)?.residual())
}

/// `sum_x sum_y v_-(x) w (v(y) - v(x))` with `v_- = max(-v, 0)`; nonnegative
/// for any symmetric nonnegative stencil.
pub fn negative_part_dissipation(kernel: &DiscreteKernel, v: &Field) -> Result<f64, OperatorError> {
    kernel.check_grid(v.grid())?;
    let grid = *v.grid();
    let vv = v.values();
    let mut acc = 0.0;
    for i in 0..grid.len() {
        let neg = (-vv[i]).max(0.0);
        if neg == 0.0 {
            continue;
        }
        let (ix, iy) = (i % grid.nx(), i / grid.nx());
        for (&off, &k) in kernel.offsets().iter().zip(kernel.weights()) {
            if let Some(j) = in_domain(&grid, ix, iy, off) {
                acc += neg * k * (vv[j] - vv[i]);
            }
        }
    }
    Ok(acc * grid.cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{discretize_kernel, KernelSpec};

    fn grid2(n: usize) -> Grid {
        Grid::new(n, n, n as f64, n as f64).unwrap()
    }

    #[test]
    fn constant_is_annihilated() {
        let g = grid2(12);
        let k = discretize_kernel(&KernelSpec::gaussian(1.5), &g).unwrap();
        let z = Field::constant(g, 3.7);
        let out = apply_nonlocal(&k, &z).unwrap();
        assert!(out.values().iter().all(|&x| x.abs() <= 1e-12 * 3.7));
        let fast = apply_nonlocal_fast(&k, &z).unwrap();
        assert!(fast.values().iter().all(|&x| x.abs() <= 1e-12 * 3.7));
        let lap = apply_laplacian_neumann(&z).unwrap();
        assert!(lap.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let k = discretize_kernel(&KernelSpec::gaussian(1.0), &grid2(8)).unwrap();
        let z = Field::zeros(grid2(9));
        assert!(apply_nonlocal(&k, &z).is_err());
        assert!(apply_nonlocal_fast(&k, &z).is_err());
    }

    #[test]
    fn linear_field_boundary_columns() {
        let g = Grid::new(10, 4, 5.0, 4.0).unwrap();
        let z = Field::from_fn(g, |x, _| x);
        let lap = apply_laplacian_neumann(&z).unwrap();
        let hx = g.hx();
        for iy in 0..4 {
            for ix in 1..9 {
                assert!(lap.get(ix, iy).abs() < 1e-12);
            }
            assert!((lap.get(0, iy) - hx / (hx * hx)).abs() < 1e-12);
            assert!((lap.get(9, iy) + hx / (hx * hx)).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_matches_truncated_nearest_neighbour_stencil() {
        let g = Grid::new(7, 5, 3.5, 2.0).unwrap();
        let z = Field::from_fn(g, |x, y| (x * 1.3).sin() + y * y);
        let lap = apply_laplacian_neumann(&z).unwrap();
        let k = DiscreteKernel::laplacian_stencil(g);
        let via = apply_nonlocal(&k, &z).unwrap();
        for (a, b) in lap.values().iter().zip(via.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fft_and_stencil_strategies_agree() {
        let g = Grid::new(17, 11, 17.0, 11.0).unwrap();
        let k = discretize_kernel(&KernelSpec::gaussian(2.0), &g).unwrap();
        let z = Field::from_fn(g, |x, y| (0.3 * x).cos() * (1.0 + 0.1 * y));
        let a = NonlocalOperator::with_strategy(k.clone(), Strategy::Stencil)
            .apply(&z)
            .unwrap();
        let b = NonlocalOperator::with_strategy(k, Strategy::Fft).apply(&z).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_v_gives_zero_sums() {
        let g = grid2(6);
        let k = discretize_kernel(&KernelSpec::gaussian(1.0), &g).unwrap();
        let v = Field::constant(g, 2.0);
        let w = Field::from_fn(g, |x, y| x * y);
        let t = bilinear_identity_terms(&k, &v, &w).unwrap();
        assert_eq!(t.b, 0.0);
        assert!(t.residual() <= 1e-12);
        let t = bilinear_identity_terms(&k, &w, &v).unwrap();
        assert_eq!((t.a, t.b), (0.0, 0.0));
    }
}
