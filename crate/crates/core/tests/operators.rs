use gm_core::kernels::{discretize_kernel, DiscreteKernel, KernelSpec};
use gm_core::operators::{
    apply_laplacian_neumann, apply_nonlocal, apply_nonlocal_fast, bilinear_identity_terms,
    negative_part_dissipation, NonlocalOperator, Strategy,
};
use gm_core::{Field, Grid};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(grid: Grid, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::from_values(grid, (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn max_abs_diff(a: &Field, b: &Field) -> f64 {
    a.values().iter().zip(b.values()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// All-pairs double loop using the kernel profile directly.
fn brute_force(spec: &KernelSpec, grid: &Grid, z: &Field) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let (xi, yi) = grid.center(i % grid.nx(), i / grid.nx());
        for j in 0..grid.len() {
            if i == j {
                continue;
            }
            let (xj, yj) = grid.center(j % grid.nx(), j / grid.nx());
            let r = ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt();
            let phi = spec.profile(r, grid.dimension());
            *o += phi * grid.cell_volume() * (z.values()[j] - z.values()[i]);
        }
    }
    out
}

#[test]
fn indicator_matches_all_pairs_sum() {
    let grid = Grid::new(8, 8, 8.0, 8.0).unwrap();
    let spec = KernelSpec::gaussian(1.1);
    let k = discretize_kernel(&spec, &grid).unwrap();
    let mut values = vec![0.0; 64];
    values[grid.index(3, 4)] = 1.0;
    let z = Field::from_values(grid, values).unwrap();
    let got = apply_nonlocal(&k, &z).unwrap();
    let want = brute_force(&spec, &grid, &z);
    for (a, b) in got.values().iter().zip(&want) {
        assert!((a - b).abs() < 1e-14, "{a} vs {b}");
    }
    let rnd = random(grid, 3);
    let got = apply_nonlocal(&k, &rnd).unwrap();
    let want = brute_force(&spec, &grid, &rnd);
    for (a, b) in got.values().iter().zip(&want) {
        assert!((a - b).abs() < 1e-13);
    }
}

#[test]
fn linearity() {
    let grid = Grid::new(12, 10, 12.0, 10.0).unwrap();
    let k = discretize_kernel(&KernelSpec::gaussian(1.4), &grid).unwrap();
    let (z1, z2) = (random(grid, 1), random(grid, 2));
    let a = -2.75;
    let combo = Field::from_values(grid, z1.values().iter().zip(z2.values()).map(|(x, y)| a * x + y).collect()).unwrap();
    let lhs = apply_nonlocal(&k, &combo).unwrap();
    let (g1, g2) = (apply_nonlocal(&k, &z1).unwrap(), apply_nonlocal(&k, &z2).unwrap());
    for i in 0..grid.len() {
        let rhs = a * g1.values()[i] + g2.values()[i];
        assert!((lhs.values()[i] - rhs).abs() < 1e-12);
    }
}

#[test]
fn fast_matches_direct_for_each_strategy() {
    let grid = Grid::new(32, 32, 32.0, 32.0).unwrap();
    for sigma in [0.6, 3.0] {
        let k = discretize_kernel(&KernelSpec::gaussian(sigma), &grid).unwrap();
        let z = random(grid, 7);
        let direct = apply_nonlocal(&k, &z).unwrap();
        assert!(max_abs_diff(&direct, &apply_nonlocal_fast(&k, &z).unwrap()) < 1e-10);
        for s in [Strategy::Stencil, Strategy::Fft] {
            let op = NonlocalOperator::with_strategy(k.clone(), s);
            assert!(max_abs_diff(&direct, &op.apply(&z).unwrap()) < 1e-10, "{s:?}");
        }
        let c = apply_nonlocal_fast(&k, &Field::constant(grid, 2.0)).unwrap();
        assert!(c.values().iter().all(|x| x.abs() <= 1e-12));
    }
}

#[test]
fn three_point_kernel_is_tridiagonal() {
    let grid = Grid::new(9, 1, 9.0, 1.0).unwrap();
    let w = 0.37;
    let k = DiscreteKernel::from_parts(grid, vec![(-1, 0), (1, 0)], vec![w, w]);
    let z = random(grid, 5);
    let zv = z.values();
    let n = zv.len();
    let got = apply_nonlocal_fast(&k, &z).unwrap();
    for i in 0..n {
        let left = if i > 0 { w * (zv[i - 1] - zv[i]) } else { 0.0 };
        let right = if i + 1 < n { w * (zv[i + 1] - zv[i]) } else { 0.0 };
        assert!((got.values()[i] - (left + right)).abs() < 1e-15);
    }
}

fn laplacian_error_quadratic(n: usize) -> f64 {
    let grid = Grid::new(n, 1, 1.0, 1.0).unwrap();
    // x^4 has second derivative 12 x^2; the 3-point error is h^2 x^4'''' / 12 = 2 h^2
    let z = Field::from_fn(grid, |x, _| x.powi(4));
    let lap = apply_laplacian_neumann(&z).unwrap();
    (1..n - 1)
        .map(|i| {
            let (x, _) = grid.center(i, 0);
            (lap.values()[i] - 12.0 * x * x).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn laplacian_quadratic_and_h2_rate() {
    let grid = Grid::new(50, 1, 1.0, 1.0).unwrap();
    let z = Field::from_fn(grid, |x, _| x * x);
    let lap = apply_laplacian_neumann(&z).unwrap();
    for i in 1..49 {
        assert!((lap.values()[i] - 2.0).abs() < 1e-9);
    }
    let (e1, e2) = (laplacian_error_quadratic(40), laplacian_error_quadratic(80));
    let rate = (e1 / e2).log2();
    assert!((rate - 2.0).abs() < 0.1, "rate {rate}");
}

#[test]
fn laplacian_linear_field() {
    let grid = Grid::new(6, 4, 6.0, 4.0).unwrap();
    let z = Field::from_fn(grid, |x, _| x);
    let lap = apply_laplacian_neumann(&z).unwrap();
    for iy in 0..4 {
        for ix in 1..5 {
            assert!(lap.get(ix, iy).abs() < 1e-12);
        }
        // mirror ghost equals the boundary cell, leaving one one-sided difference
        assert!((lap.get(0, iy) - 1.0).abs() < 1e-12);
        assert!((lap.get(5, iy) + 1.0).abs() < 1e-12);
    }
}

#[test]
fn laplacian_is_symmetric() {
    for (nx, ny) in [(7, 5), (16, 1), (11, 11)] {
        let grid = Grid::new(nx, ny, 2.0, 3.0).unwrap();
        let (a, b) = (random(grid, 10), random(grid, 11));
        let la = apply_laplacian_neumann(&a).unwrap();
        let lb = apply_laplacian_neumann(&b).unwrap();
        let gap = la.dot(&b).unwrap() - a.dot(&lb).unwrap();
        assert!(gap.abs() < 1e-10, "{gap}");
        let c = apply_laplacian_neumann(&Field::constant(grid, 4.0)).unwrap();
        assert!(c.values().iter().all(|x| x.abs() < 1e-12));
    }
}

/// Double loops for the two sides of the symmetrization identity.
fn brute_bilinear(k: &DiscreteKernel, v: &Field, w: &Field) -> (f64, f64) {
    let grid = v.grid();
    let (mut a, mut b) = (0.0, 0.0);
    for i in 0..grid.len() {
        for j in 0..grid.len() {
            let off = (
                (j % grid.nx()) as i32 - (i % grid.nx()) as i32,
                (j / grid.nx()) as i32 - (i / grid.nx()) as i32,
            );
            if off == (0, 0) {
                continue;
            }
            let phi = k.weight(off);
            let dw = w.values()[j] - w.values()[i];
            a += v.values()[i] * phi * dw;
            b += (v.values()[j] - v.values()[i]) * phi * dw;
        }
    }
    (a * grid.cell_volume(), b * grid.cell_volume())
}

#[test]
fn bilinear_terms_match_brute_force() {
    let grid = Grid::new(8, 8, 8.0, 8.0).unwrap();
    let k = discretize_kernel(&KernelSpec::gaussian(1.3), &grid).unwrap();
    let (v, w) = (random(grid, 20), random(grid, 21));
    let t = bilinear_identity_terms(&k, &v, &w).unwrap();
    let (a, b) = brute_bilinear(&k, &v, &w);
    assert!((t.a - a).abs() < 1e-12 && (t.b - b).abs() < 1e-12);
    assert!(t.residual() <= 1e-10 * (t.a.abs() + t.b.abs() + 1.0));

    let cv = bilinear_identity_terms(&k, &Field::constant(grid, 1.5), &w).unwrap();
    assert!(cv.residual() <= 1e-12);
    let cw = bilinear_identity_terms(&k, &v, &Field::constant(grid, -2.0)).unwrap();
    assert_eq!((cw.a, cw.b), (0.0, 0.0));
}

proptest! {
    #[test]
    fn identity_and_dissipativity(
        nx in 2usize..=16,
        ny in 1usize..=16,
        sigma in 0.5f64..3.0,
        seed in any::<u64>(),
    ) {
        let grid = Grid::new(nx, ny, nx as f64, ny as f64).unwrap();
        let k = discretize_kernel(&KernelSpec::gaussian(sigma), &grid).unwrap();
        let (v, w) = (random(grid, seed), random(grid, seed ^ 0x9e37));
        let t = bilinear_identity_terms(&k, &v, &w).unwrap();
        prop_assert!(t.residual() <= 1e-10 * (t.a.abs() + 0.5 * t.b.abs()).max(1e-300));
        prop_assert!(negative_part_dissipation(&k, &v).unwrap() >= -1e-12);
        let c = apply_nonlocal(&k, &Field::constant(grid, 3.0)).unwrap();
        prop_assert!(c.values().iter().all(|x| x.abs() <= 3e-12));
    }
}
