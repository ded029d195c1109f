use gm_core::kernels::{
    bump_constant, bump_psi, discretize_kernel, second_moment_m, KernelError, KernelSpec,
};
use gm_core::{Dimension, Grid};
use proptest::prelude::*;

/// Midpoint sum of `phi` over the truncation disc on sub-cells of side `h/refine`.
fn refined_mass(spec: &KernelSpec, grid: &Grid, refine: usize) -> f64 {
    let dim = grid.dimension();
    let (hx, hy) = (grid.hx() / refine as f64, grid.hy() / refine as f64);
    let radius = spec.support_radius();
    let nx = (radius / hx).ceil() as i64 + 1;
    let ny = match dim {
        Dimension::One => 0,
        Dimension::Two => (radius / hy).ceil() as i64 + 1,
    };
    let mut total = 0.0;
    for iy in -ny..=ny {
        for ix in -nx..=nx {
            let x = ix as f64 * hx;
            let y = iy as f64 * hy;
            let r = (x * x + y * y).sqrt();
            if r <= radius {
                total += spec.profile(r, dim);
            }
        }
    }
    total
        * match dim {
            Dimension::One => hx,
            Dimension::Two => hx * hy,
        }
}

#[test]
fn gaussian_mass_matches_refined_quadrature() {
    let grid = Grid::new(100, 100, 100.0, 100.0).unwrap();
    let spec = KernelSpec::gaussian(0.6);
    let k = discretize_kernel(&spec, &grid).unwrap();
    let reference = refined_mass(&spec, &grid, 10);
    let coarse = k.mass_lambda() + k.center_weight();
    assert!((coarse - reference).abs() / reference < 0.01, "{coarse} vs {reference}");
    // truncated mass of the 2D Gaussian disc: 1 - exp(-9/2)
    assert!((reference - (1.0 - (-4.5f64).exp())).abs() < 5e-3);
}

#[test]
fn wide_gaussians_on_both_dimensions() {
    for (grid, sigma) in [
        (Grid::new(64, 64, 64.0, 64.0).unwrap(), 2.0),
        (Grid::new(200, 1, 100.0, 1.0).unwrap(), 1.3),
    ] {
        let spec = KernelSpec::gaussian(sigma);
        let k = discretize_kernel(&spec, &grid).unwrap();
        let reference = refined_mass(&spec, &grid, 10);
        let coarse = k.mass_lambda() + k.center_weight();
        assert!((coarse - reference).abs() / reference < 0.01);
    }
}

#[test]
fn psi_is_normalized() {
    // fine-grid midpoint quadrature over [-1, 1]^n
    let n = 2000;
    let h = 2.0 / n as f64;
    let one: f64 = (0..n)
        .map(|i| bump_psi((-1.0 + (i as f64 + 0.5) * h).abs(), Dimension::One) * h)
        .sum();
    assert!((one - 1.0).abs() < 1e-3, "{one}");
    let n = 800;
    let h = 2.0 / n as f64;
    let mut two = 0.0;
    for iy in 0..n {
        let y = -1.0 + (iy as f64 + 0.5) * h;
        for ix in 0..n {
            let x = -1.0 + (ix as f64 + 0.5) * h;
            two += bump_psi((x * x + y * y).sqrt(), Dimension::Two) * h * h;
        }
    }
    assert!((two - 1.0).abs() < 1e-3, "{two}");
}

#[test]
fn psi_endpoints() {
    for dim in [Dimension::One, Dimension::Two] {
        assert_eq!(bump_psi(1.0, dim), 0.0);
        assert_eq!(bump_psi(0.0, dim), bump_constant(dim));
        assert!(bump_psi(0.0, dim) > 0.0);
        assert_eq!(bump_psi(-0.1, dim), 0.0);
        assert_eq!(bump_psi(1.5, dim), 0.0);
    }
}

#[test]
fn second_moment_closed_forms() {
    // 1D: 2 * (3/2) * int_0^1 r^2 (1-r)^2 dr = 3 / 30
    let m1 = second_moment_m(&KernelSpec::rescaled_bump(4), Dimension::One).unwrap();
    assert!((m1 - 0.1).abs() < 1e-12, "{m1}");
    // 2D: 2 pi (6/pi) int_0^1 r^3 (1-r)^2 dr = 12 / 60
    let m2 = second_moment_m(&KernelSpec::rescaled_bump(4), Dimension::Two).unwrap();
    assert!((m2 - 0.2).abs() < 1e-12, "{m2}");
    let m16 = second_moment_m(&KernelSpec::rescaled_bump(16), Dimension::Two).unwrap();
    assert_eq!(m2, m16);
    assert_eq!(
        second_moment_m(&KernelSpec::gaussian(1.0), Dimension::Two),
        Err(KernelError::MomentUndefined)
    );
}

#[test]
fn rescaled_bump_moment_and_mass_on_resolved_grids() {
    for (dim, cells) in [(Dimension::One, 2048usize), (Dimension::Two, 192)] {
        let ny = if dim == Dimension::One { 1 } else { cells };
        let grid = Grid::new(cells, ny, 1.0, 1.0).unwrap();
        let m = second_moment_m(&KernelSpec::rescaled_bump(1), dim).unwrap();
        for j in [4u32, 8] {
            let k = discretize_kernel(&KernelSpec::rescaled_bump(j), &grid).unwrap();
            let rel = (k.second_moment() - m).abs() / m;
            assert!(rel < 0.05, "dim {dim:?} j={j}: moment {} vs {m}", k.second_moment());
            let mass = (k.mass_lambda() + k.center_weight()) / (j as f64 * j as f64);
            assert!((mass - 1.0).abs() < 0.05, "dim {dim:?} j={j}: mass/j^2 {mass}");
        }
    }
}

#[test]
fn unresolved_bump_errors() {
    let grid = Grid::new(10, 10, 1.0, 1.0).unwrap();
    let err = discretize_kernel(&KernelSpec::rescaled_bump(20), &grid).unwrap_err();
    assert!(err.to_string().starts_with("kernel unresolved on grid"));
}

proptest! {
    #[test]
    fn stencils_are_symmetric_and_nonnegative(
        sigma in 0.5f64..4.0,
        nx in 4usize..24,
        ny in 1usize..24,
        extra in 0.0f64..2.0,
    ) {
        let grid = Grid::new(nx, ny, nx as f64, ny.max(1) as f64).unwrap();
        let spec = KernelSpec::Gaussian { sigma, cutoff_radius: (3.0 + extra) * sigma };
        let k = discretize_kernel(&spec, &grid).unwrap();
        let mut sum = 0.0;
        for (&o, &w) in k.offsets().iter().zip(k.weights()) {
            prop_assert!(w >= 0.0);
            prop_assert_eq!(k.weight((-o.0, -o.1)), w);
            prop_assert!(o != (0, 0));
            sum += w;
        }
        prop_assert_eq!(sum, k.mass_lambda());
    }
}
