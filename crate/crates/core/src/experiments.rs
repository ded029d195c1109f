//! Experiment drivers: config-driven runs, pattern runs, kernel-width sweeps
//! and the diffusive-limit convergence study.

use std::collections::VecDeque;
use std::fs;
use std::path::PathBuf;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::diagnostics::FunctionalParams;
use crate::grid::{Dimension, Field, Grid};
use crate::io::config::{
    manifest_toml, ConfigError, DiagnosticsSection, GridSection, KernelSection, OperatorChoice,
    OutputsSection, Provenance, RunConfig, StepperSection,
};
use crate::io::heatmap::{render_heatmap, HeatmapError};
use crate::io::sinks::{CsvSink, FieldRecorder, SnapshotSink};
use crate::kernels::{discretize_kernel, second_moment_m, KernelError, KernelSpec};
use crate::model::{init_fields, InitialCondition, ModelParams, ParamError};
use crate::reaction::{ode_equilibrium, turing_check, ReactionError, TuringReport};
use crate::stepper::{
    run, stability_hint, OperatorKind, PositivityPolicy, RunOutput, Sink, StepError,
    StepperConfig,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Heatmap(#[from] HeatmapError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Reaction(#[from] ReactionError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl ExperimentError {
    /// Blow-up, positivity or non-finite failure during time stepping.
    pub fn is_runtime_abort(&self) -> bool {
        matches!(self, ExperimentError::Step(e) if e.is_runtime_abort())
    }
}

/// Result of [`execute`].
#[derive(Debug)]
pub struct RunSummary {
    pub output: RunOutput,
    pub initial_u: Field,
    pub provenance: Provenance,
    pub dir: PathBuf,
}

/// Runs a normalized config and writes its artifacts into `outputs.dir`:
/// `manifest.toml`, `diagnostics.csv`, `snapshots/` and `u_final.png`/`v_final.png`.
pub fn execute(config: &RunConfig) -> Result<RunSummary, ExperimentError> {
    let grid = config.grid.build()?;
    let cfg = config.stepper_config();
    let dir = config.outputs.dir();
    fs::create_dir_all(&dir)?;
    let (u0, v0) = init_fields(grid, &config.ic)?;
    let initial_u = u0.clone();

    let mut provenance = Provenance {
        version: VERSION.to_string(),
        seed: config.ic.seed,
        dt_used: cfg.effective_dt(),
        steps: cfg.step_count(),
        clamp_count: 0,
    };
    let manifest_path = dir.join("manifest.toml");
    fs::write(&manifest_path, manifest_toml(config, &provenance))?;

    let mut csv = if config.outputs.csv {
        Some(CsvSink::create(&dir.join("diagnostics.csv"))?)
    } else {
        None
    };
    let mut snaps = if config.outputs.snapshots {
        let every = match config.outputs.snapshot_every {
            0 => u64::MAX,
            n => n,
        };
        Some(SnapshotSink::create(&dir.join("snapshots"), every)?)
    } else {
        None
    };
    let mut sinks: Vec<&mut dyn Sink> = Vec::new();
    if let Some(s) = csv.as_mut() {
        sinks.push(s);
    }
    if let Some(s) = snaps.as_mut() {
        sinks.push(s);
    }

    let output = run(
        &config.model,
        u0,
        v0,
        &cfg,
        config.functional_params(),
        &config.diagnostics.norms,
        &mut sinks,
    )?;

    provenance.clamp_count = output.clamp_count;
    fs::write(&manifest_path, manifest_toml(config, &provenance))?;
    if config.outputs.heatmaps {
        let scale = config.outputs.heatmap_scale;
        render_heatmap(&output.state.u, &dir.join("u_final.png"), scale)?;
        render_heatmap(&output.state.v, &dir.join("v_final.png"), scale)?;
    }
    Ok(RunSummary {
        output,
        initial_u,
        provenance,
        dir,
    })
}

/// Diffusion operator of a pattern run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PatternKind {
    Local,
    /// Gaussian kernel with standard deviation `sigma`, truncated at `3 sigma`.
    Nonlocal { sigma: f64 },
}

/// Deviations from the reference pattern run. `None` keeps the reference value.
#[derive(Debug, Clone, Default)]
pub struct PatternOverrides {
    pub b: Option<f64>,
    pub d1: Option<f64>,
    pub d2: Option<f64>,
    pub cells: Option<usize>,
    pub length: Option<f64>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub seed: Option<u64>,
    pub noise_amp: Option<f64>,
    pub record_every: Option<u64>,
    pub policy: Option<PositivityPolicy>,
    pub output_dir: Option<PathBuf>,
    pub heatmaps: Option<bool>,
    pub snapshots: Option<bool>,
}

/// Reference pattern config: `b = 0.5`, `d1 = 0.3`, `d2 = 30`, a 100 x 100
/// grid on a square of side 100, `t_end = 200`, `u0 = v0 = 0.1 +- 0.01`.
pub fn pattern_config(kind: PatternKind, o: &PatternOverrides) -> Result<RunConfig, ConfigError> {
    let model = ModelParams::reduced(o.b.unwrap_or(0.5), o.d1.unwrap_or(0.3), o.d2.unwrap_or(30.0));
    let cells = o.cells.unwrap_or(100);
    let length = o.length.unwrap_or(100.0);
    let mut ic = InitialCondition::reference(o.seed.unwrap_or(1));
    if let Some(a) = o.noise_amp {
        ic.noise_amp = a;
    }
    let kernel = match kind {
        PatternKind::Local => None,
        PatternKind::Nonlocal { sigma } => Some(KernelSection::from_spec(KernelSpec::gaussian(sigma))),
    };
    let operator = match kind {
        PatternKind::Local => OperatorChoice::Local,
        PatternKind::Nonlocal { .. } => OperatorChoice::Nonlocal,
    };
    let mut outputs = OutputsSection {
        dir: o.output_dir.clone(),
        ..OutputsSection::default()
    };
    if let Some(h) = o.heatmaps {
        outputs.heatmaps = h;
    }
    if let Some(s) = o.snapshots {
        outputs.snapshots = s;
    }
    let raw = RunConfig {
        model,
        grid: GridSection {
            nx: cells,
            ny: cells,
            lx: length,
            ly: Some(length),
        },
        ic,
        stepper: StepperSection {
            dt: o.dt,
            t_end: o.t_end.unwrap_or(200.0),
            operator,
            record_every: o.record_every.unwrap_or(1000),
            positivity_floor: crate::stepper::DEFAULT_POSITIVITY_FLOOR,
            fail_on_nonfinite: true,
            positivity_policy: o.policy.unwrap_or_default(),
            blowup_cap: crate::stepper::DEFAULT_BLOWUP_CAP,
        },
        kernel,
        diagnostics: DiagnosticsSection::default(),
        outputs,
    };
    raw.normalize()
}

#[derive(Debug)]
pub struct PatternOutcome {
    pub metrics: PatternMetrics,
    pub initial_metrics: PatternMetrics,
    pub turing: Option<TuringReport>,
    pub warnings: Vec<String>,
    pub summary: RunSummary,
}

/// Runs one pattern experiment. A failed Turing check is reported as a
/// warning; the run still proceeds.
pub fn run_pattern_experiment(kind: PatternKind, overrides: &PatternOverrides) -> Result<PatternOutcome, ExperimentError> {
    let config = pattern_config(kind, overrides)?;
    let mut warnings = Vec::new();
    let turing = match turing_check(&config.model) {
        Ok(rep) => {
            if !rep.all() {
                warnings.push(format!("turing check failed: conditions {:?}", rep.conditions));
            }
            Some(rep)
        }
        Err(e) => {
            warnings.push(format!("turing check unavailable: {e}"));
            None
        }
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let summary = execute(&config)?;
    Ok(PatternOutcome {
        metrics: compute_pattern_metrics(&summary.output.state.u),
        initial_metrics: compute_pattern_metrics(&summary.initial_u),
        turing,
        warnings,
        summary,
    })
}

/// Scalar summaries of a pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternMetrics {
    pub spatial_std_u: f64,
    /// Peak of the radially averaged power spectrum, in `(2h, L]`.
    pub dominant_wavelength: f64,
    /// 4-connected components of cells above `mean + std`.
    pub spot_count_proxy: usize,
}

pub fn compute_pattern_metrics(u: &Field) -> PatternMetrics {
    PatternMetrics {
        spatial_std_u: u.std_dev(),
        dominant_wavelength: dominant_wavelength(u),
        spot_count_proxy: spot_count(u),
    }
}

fn power_spectrum(u: &Field) -> Vec<f64> {
    let g = u.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let mean = u.mean();
    let mut data: Vec<Complex<f64>> = u.values().iter().map(|&x| Complex::new(x - mean, 0.0)).collect();
    let mut planner = FftPlanner::new();
    let row = planner.plan_fft_forward(nx);
    for chunk in data.chunks_mut(nx) {
        row.process(chunk);
    }
    if ny > 1 {
        let col = planner.plan_fft_forward(ny);
        let mut buf = vec![Complex::new(0.0, 0.0); ny];
        for ix in 0..nx {
            for iy in 0..ny {
                buf[iy] = data[iy * nx + ix];
            }
            col.process(&mut buf);
            for iy in 0..ny {
                data[iy * nx + ix] = buf[iy];
            }
        }
    }
    data.iter().map(|c| c.norm_sqr()).collect()
}

fn signed_freq(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

fn dominant_wavelength(u: &Field) -> f64 {
    let g = u.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let size = match g.dimension() {
        Dimension::One => g.lx(),
        Dimension::Two => g.lx().max(g.ly()),
    };
    let power = power_spectrum(u);
    // bin k holds wave numbers within half a bin of k / size
    let max_bin = (size / (2.0 * g.min_spacing())).ceil() as usize + 1;
    let mut sum = vec![0.0; max_bin + 1];
    let mut count = vec![0usize; max_bin + 1];
    for iy in 0..ny {
        let ky = if ny > 1 { signed_freq(iy, ny) / g.ly() } else { 0.0 };
        for ix in 0..nx {
            let kx = signed_freq(ix, nx) / g.lx();
            let bin = ((kx * kx + ky * ky).sqrt() * size).round() as usize;
            if bin <= max_bin {
                sum[bin] += power[iy * nx + ix];
                count[bin] += 1;
            }
        }
    }
    let h2 = 2.0 * g.min_spacing();
    let mut best = (1usize, 0.0f64);
    for bin in 1..=max_bin {
        let wavelength = size / bin as f64;
        if count[bin] == 0 || wavelength <= h2 {
            continue;
        }
        let avg = sum[bin] / count[bin] as f64;
        if avg > best.1 {
            best = (bin, avg);
        }
    }
    size / best.0 as f64
}

fn spot_count(u: &Field) -> usize {
    let g = u.grid();
    let (nx, ny) = (g.nx(), g.ny());
    // rounding in the mean must not turn a flat field into one spot
    if u.max() == u.min() {
        return 0;
    }
    let threshold = u.mean() + u.std_dev();
    let above: Vec<bool> = u.values().iter().map(|&x| x > threshold).collect();
    let mut seen = vec![false; above.len()];
    let mut spots = 0;
    let mut queue = VecDeque::new();
    for start in 0..above.len() {
        if !above[start] || seen[start] {
            continue;
        }
        spots += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (ix, iy) = (i % nx, i / nx);
            let mut visit = |j: usize| {
                if above[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if ix > 0 {
                visit(i - 1);
            }
            if ix + 1 < nx {
                visit(i + 1);
            }
            if iy > 0 {
                visit(i - nx);
            }
            if iy + 1 < ny {
                visit(i + nx);
            }
        }
    }
    spots
}

#[derive(Debug)]
pub struct SweepRow {
    pub sigma: f64,
    pub result: Result<PatternMetrics, String>,
}

#[derive(Debug, Default)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Fixed-width comparison table, one line per sigma.
    pub fn table(&self) -> String {
        let mut out = format!("{:>8}  {:>12}  {:>12}  {:>6}\n", "sigma", "std_u", "wavelength", "spots");
        for row in &self.rows {
            match &row.result {
                Ok(m) => out.push_str(&format!(
                    "{:>8}  {:>12.6}  {:>12.4}  {:>6}\n",
                    row.sigma, m.spatial_std_u, m.dominant_wavelength, m.spot_count_proxy
                )),
                Err(e) => out.push_str(&format!("{:>8}  failed: {e}\n", row.sigma)),
            }
        }
        out
    }
}

/// One nonlocal pattern run per sigma, in parallel. Each run writes into
/// `<output_dir>/sigma_<sigma>`; failures are recorded and the sweep goes on.
pub fn run_kernel_sweep(sigmas: &[f64], overrides: &PatternOverrides) -> SweepReport {
    let root = overrides.output_dir.clone().unwrap_or_else(crate::io::config::default_output_dir);
    let rows = sigmas
        .par_iter()
        .map(|&sigma| {
            let mut o = overrides.clone();
            o.output_dir = Some(root.join(format!("sigma_{sigma}")));
            let result = if sigma > 0.0 && sigma.is_finite() {
                run_pattern_experiment(PatternKind::Nonlocal { sigma }, &o)
                    .map(|out| out.metrics)
                    .map_err(|e| e.to_string())
            } else {
                Err(format!("sigma = {sigma} must be > 0"))
            };
            SweepRow { sigma, result }
        })
        .collect();
    SweepReport { rows }
}

/// Shared settings of the nonlocal and limit solvers.
#[derive(Debug, Clone, Copy)]
pub struct DiffusiveLimitSetup {
    pub grid: Grid,
    pub t_end: f64,
    pub record_every: u64,
    /// Replace the nonlocal solver by the limit solver (sanity run; errors are 0).
    pub self_check: bool,
}

impl DiffusiveLimitSetup {
    /// Unit square (or unit interval when `dim` is one) with `cells` per side.
    pub fn unit(dim: Dimension, cells: usize, t_end: f64) -> Self {
        let ny = match dim {
            Dimension::One => 1,
            Dimension::Two => cells,
        };
        DiffusiveLimitSetup {
            grid: Grid::new(cells, ny, 1.0, 1.0).expect("cells >= 2"),
            t_end,
            record_every: 5,
            self_check: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusiveLimitReport {
    pub j_values: Vec<u32>,
    /// Space-time L2 distance to the limit solution; NaN where `failures` has an entry.
    pub l2_errors: Vec<f64>,
    pub failures: Vec<Option<String>>,
    pub m: f64,
    pub limit_coefficients: (f64, f64),
    pub dt: f64,
}

/// `equilibrium * (1 + 0.25 cos(pi x / Lx) cos(pi y / Ly))`.
pub fn smooth_initial_condition(params: &ModelParams, grid: Grid) -> Result<(Field, Field), ReactionError> {
    let (ue, ve) = ode_equilibrium(params)?;
    let (lx, ly) = (grid.lx(), grid.ly());
    let two_d = grid.dimension() == Dimension::Two;
    let shape = move |x: f64, y: f64| {
        let cy = if two_d { (std::f64::consts::PI * y / ly).cos() } else { 1.0 };
        1.0 + 0.25 * (std::f64::consts::PI * x / lx).cos() * cy
    };
    Ok((
        Field::from_fn(grid, |x, y| ue * shape(x, y)),
        Field::from_fn(grid, |x, y| ve * shape(x, y)),
    ))
}

fn record_frames(
    params: &ModelParams,
    u0: &Field,
    v0: &Field,
    cfg: &StepperConfig,
) -> Result<Vec<(f64, Field, Field)>, ExperimentError> {
    let mut rec = FieldRecorder::default();
    let fp = FunctionalParams::defaults_for(params);
    run(params, u0.clone(), v0.clone(), cfg, fp, &[2.0], &mut [&mut rec])?;
    Ok(rec.frames)
}

/// Midpoint rule in space, trapezoid rule in time over shared record instants.
pub fn space_time_l2(a: &[(f64, Field, Field)], b: &[(f64, Field, Field)]) -> f64 {
    assert_eq!(a.len(), b.len(), "solvers must share record instants");
    let sq: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .map(|((t, ua, va), (_, ub, vb))| {
            let vol = ua.grid().cell_volume();
            let s: f64 = ua
                .values()
                .iter()
                .zip(ub.values())
                .chain(va.values().iter().zip(vb.values()))
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            (*t, s * vol)
        })
        .collect();
    let total: f64 = sq.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
    total.sqrt()
}

/// Compares the rescaled-bump nonlocal system for each `j` with the local
/// system whose diffusion rates are `M d_i / (2n)`. All runs share the grid,
/// the smooth initial condition, `t_end` and one `dt`: the smallest stability
/// hint among them.
pub fn run_diffusive_limit(
    j_values: &[u32],
    setup: &DiffusiveLimitSetup,
    base: &ModelParams,
) -> Result<DiffusiveLimitReport, ExperimentError> {
    let grid = setup.grid;
    let dim = grid.dimension();
    let n = dim.n() as f64;
    let m = second_moment_m(&KernelSpec::rescaled_bump(1), dim)?;
    let limit_coefficients = (m * base.d1 / (2.0 * n), m * base.d2 / (2.0 * n));
    let mut limit = *base;
    limit.d1 = limit_coefficients.0;
    limit.d2 = limit_coefficients.1;

    let mut dt = stability_hint(&limit, &grid, None, setup.t_end);
    for &j in j_values {
        if let Ok(k) = discretize_kernel(&KernelSpec::rescaled_bump(j), &grid) {
            dt = dt.min(stability_hint(base, &grid, Some(&k), setup.t_end));
        }
    }
    let (u0, v0) = smooth_initial_condition(base, grid)?;
    let cfg_for = |op: OperatorKind| {
        let mut c = StepperConfig::new(dt, setup.t_end, op);
        c.record_every = setup.record_every;
        c
    };
    let reference = record_frames(&limit, &u0, &v0, &cfg_for(OperatorKind::Local))?;

    let results: Vec<Result<f64, String>> = j_values
        .par_iter()
        .map(|&j| {
            let frames = if setup.self_check {
                record_frames(&limit, &u0, &v0, &cfg_for(OperatorKind::Local))
            } else {
                let spec = KernelSpec::rescaled_bump(j);
                discretize_kernel(&spec, &grid)
                    .map_err(ExperimentError::from)
                    .and_then(|_| record_frames(base, &u0, &v0, &cfg_for(OperatorKind::Nonlocal(spec))))
            };
            frames.map(|f| space_time_l2(&f, &reference)).map_err(|e| e.to_string())
        })
        .collect();

    let l2_errors = results.iter().map(|r| *r.as_ref().unwrap_or(&f64::NAN)).collect();
    let failures = results.into_iter().map(|r| r.err()).collect();
    Ok(DiffusiveLimitReport {
        j_values: j_values.to_vec(),
        l2_errors,
        failures,
        m,
        limit_coefficients,
        dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_metrics() {
        let g = Grid::new(16, 16, 16.0, 16.0).unwrap();
        let m = compute_pattern_metrics(&Field::constant(g, 3.0));
        assert_eq!(m.spatial_std_u, 0.0);
        assert_eq!(m.spot_count_proxy, 0);
        assert!(m.dominant_wavelength > 2.0 && m.dominant_wavelength <= 16.0);
    }

    #[test]
    fn trapezoid_of_constant_gap() {
        let g = Grid::new(4, 1, 2.0, 1.0).unwrap();
        let frame = |t: f64, x: f64| (t, Field::constant(g, x), Field::constant(g, 0.0));
        let a = vec![frame(0.0, 1.0), frame(0.5, 1.0), frame(1.0, 1.0)];
        let b = vec![frame(0.0, 0.0), frame(0.5, 0.0), frame(1.0, 0.0)];
        // integral of 1 over [0, 2] x [0, 1]
        assert!((space_time_l2(&a, &b) - 2f64.sqrt()).abs() < 1e-14);
    }
}
