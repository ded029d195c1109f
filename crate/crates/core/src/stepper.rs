//! Forward Euler time stepping for the local and nonlocal systems.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{DiagnosticsError, DiagnosticsPlan, DiagnosticsRecord};
use crate::grid::{Dimension, Field, Grid};
use crate::kernels::{discretize_kernel, DiscreteKernel, KernelError, KernelSpec};
use crate::model::ModelParams;
use crate::operators::{laplacian_into, NonlocalOperator};
use crate::reaction::{eval_f, eval_g, ReactionError};

pub const DEFAULT_POSITIVITY_FLOOR: f64 = 1e-12;
pub const DEFAULT_BLOWUP_CAP: f64 = 1e6;
const SAFETY: f64 = 0.9;

#[derive(Debug, Error)]
pub enum StepError {
    #[error("non-finite {species} = {value} at cell {cell} in step {step}")]
    NonFinite {
        step: u64,
        cell: usize,
        species: Species,
        value: f64,
    },
    #[error("positivity breach: {species} = {value} < floor at cell {cell} in step {step}")]
    Positivity {
        step: u64,
        cell: usize,
        species: Species,
        value: f64,
    },
    #[error("blow-up: max activator {value} exceeds cap {cap} in step {step}; dt is likely above the stability limit")]
    BlowUp { step: u64, value: f64, cap: f64 },
    #[error("reaction failed at cell {cell} in step {step}: {source}")]
    Reaction {
        step: u64,
        cell: usize,
        source: ReactionError,
    },
    #[error("invalid stepper configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error("sink failed: {0}")]
    Sink(#[from] std::io::Error),
}

impl StepError {
    /// Aborts caused by the dynamics, as opposed to bad input.
    pub fn is_runtime_abort(&self) -> bool {
        matches!(
            self,
            StepError::NonFinite { .. }
                | StepError::Positivity { .. }
                | StepError::BlowUp { .. }
                | StepError::Reaction { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Species {
    U,
    V,
}

impl std::fmt::Display for Species {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Species::U => "u",
            Species::V => "v",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorKind {
    Local,
    Nonlocal(KernelSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositivityPolicy {
    /// Abort on the first value below the floor.
    #[default]
    Strict,
    /// Raise values to the floor and count the occurrences.
    Clamp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub t_end: f64,
    pub operator: OperatorKind,
    pub record_every: u64,
    pub positivity_floor: f64,
    pub fail_on_nonfinite: bool,
    pub policy: PositivityPolicy,
    pub blowup_cap: f64,
}

impl StepperConfig {
    pub fn new(dt: f64, t_end: f64, operator: OperatorKind) -> Self {
        StepperConfig {
            dt,
            t_end,
            operator,
            record_every: 1,
            positivity_floor: DEFAULT_POSITIVITY_FLOOR,
            fail_on_nonfinite: true,
            policy: PositivityPolicy::Strict,
            blowup_cap: DEFAULT_BLOWUP_CAP,
        }
    }

    pub fn validate(&self) -> Result<(), StepError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(StepError::Config(format!("dt must be > 0 (got {})", self.dt)));
        }
        // t_end = 0 is a zero-step run
        if !(self.t_end == 0.0 || self.t_end >= self.dt) || !self.t_end.is_finite() {
            return Err(StepError::Config(format!(
                "t_end must be 0 or >= dt (got t_end={}, dt={})",
                self.t_end, self.dt
            )));
        }
        if self.record_every < 1 {
            return Err(StepError::Config("record_every must be >= 1".into()));
        }
        if !(self.positivity_floor >= 0.0) {
            return Err(StepError::Config("positivity_floor must be >= 0".into()));
        }
        if !(self.blowup_cap > 0.0) {
            return Err(StepError::Config("blowup_cap must be > 0".into()));
        }
        Ok(())
    }

    /// Number of Euler steps; the step is shortened so they land on `t_end`.
    pub fn step_count(&self) -> u64 {
        if self.t_end == 0.0 {
            return 0;
        }
        ((self.t_end / self.dt) - 1e-9).ceil().max(1.0) as u64
    }

    pub fn effective_dt(&self) -> f64 {
        if self.t_end == 0.0 {
            return self.dt;
        }
        self.t_end / self.step_count() as f64
    }
}

/// Suggested explicit step: `0.9 h^2 / (2 n max(d1, d2))` for the local
/// operator (`0.9 h^2 / (4 max d)` on a 2D grid) and `0.9 / (2 max(d1, d2) lambda)`
/// for the nonlocal one, where `|Gamma z| <= 2 lambda ||z||_inf`. Capped at `t_end`.
pub fn stability_hint(params: &ModelParams, grid: &Grid, kernel: Option<&DiscreteKernel>, t_end: f64) -> f64 {
    let d = params.d1.max(params.d2);
    let raw = match kernel {
        None => {
            let inv_h2 = match grid.dimension() {
                Dimension::One => 2.0 / (grid.hx() * grid.hx()),
                Dimension::Two => 2.0 / (grid.hx() * grid.hx()) + 2.0 / (grid.hy() * grid.hy()),
            };
            1.0 / (d * inv_h2)
        }
        Some(k) => {
            let lambda = k.mass_lambda();
            if lambda > 0.0 {
                1.0 / (2.0 * d * lambda)
            } else {
                f64::INFINITY
            }
        }
    };
    (SAFETY * raw).min(t_end)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub step: u64,
    pub u: Field,
    pub v: Field,
}

impl SimState {
    pub fn new(u: Field, v: Field) -> Self {
        SimState { t: 0.0, step: 0, u, v }
    }
}

/// Diffusion operator resolved against a grid.
#[derive(Debug)]
pub enum DiffusionOperator {
    Local(Grid),
    Nonlocal(NonlocalOperator),
}

impl DiffusionOperator {
    pub fn build(kind: &OperatorKind, grid: &Grid) -> Result<Self, KernelError> {
        Ok(match kind {
            OperatorKind::Local => DiffusionOperator::Local(*grid),
            OperatorKind::Nonlocal(spec) => {
                DiffusionOperator::Nonlocal(NonlocalOperator::new(discretize_kernel(spec, grid)?))
            }
        })
    }

    pub fn apply_into(&self, z: &[f64], out: &mut [f64]) {
        match self {
            DiffusionOperator::Local(grid) => laplacian_into(grid, z, out),
            DiffusionOperator::Nonlocal(op) => op.apply_into(z, out),
        }
    }

    pub fn kernel(&self) -> Option<&DiscreteKernel> {
        match self {
            DiffusionOperator::Local(_) => None,
            DiffusionOperator::Nonlocal(op) => Some(op.kernel()),
        }
    }

    /// Stencil whose double sum gives the `Y` energy of this operator.
    pub fn energy_kernel(&self) -> DiscreteKernel {
        match self {
            DiffusionOperator::Local(grid) => DiscreteKernel::laplacian_stencil(*grid),
            DiffusionOperator::Nonlocal(op) => op.kernel().clone(),
        }
    }
}

/// Owns the operator and scratch buffers for one trajectory.
#[derive(Debug)]
pub struct Stepper {
    params: ModelParams,
    cfg: StepperConfig,
    dt: f64,
    operator: DiffusionOperator,
    lap_u: Vec<f64>,
    lap_v: Vec<f64>,
    clamped: u64,
}

impl Stepper {
    pub fn new(params: ModelParams, cfg: StepperConfig, grid: &Grid) -> Result<Self, StepError> {
        params
            .validate()
            .map_err(|e| StepError::Config(e.to_string()))?;
        cfg.validate()?;
        let operator = DiffusionOperator::build(&cfg.operator, grid)?;
        Ok(Stepper {
            params,
            cfg,
            dt: cfg.effective_dt(),
            operator,
            lap_u: vec![0.0; grid.len()],
            lap_v: vec![0.0; grid.len()],
            clamped: 0,
        })
    }

    pub fn operator(&self) -> &DiffusionOperator {
        &self.operator
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn config(&self) -> &StepperConfig {
        &self.cfg
    }

    /// Values raised to the floor so far under [`PositivityPolicy::Clamp`].
    pub fn clamp_count(&self) -> u64 {
        self.clamped
    }

    /// One explicit step
    /// `u += dt (d1 A u + f(u, v))`, `v += dt (d2 A v + g(u, v))`.
    pub fn step_once(&mut self, state: &mut SimState) -> Result<(), StepError> {
        let step = state.step + 1;
        let dt = self.dt;
        let p = &self.params;
        self.operator.apply_into(state.u.values(), &mut self.lap_u);
        self.operator.apply_into(state.v.values(), &mut self.lap_v);
        let u = state.u.values_mut();
        let v = state.v.values_mut();
        let mut max_u = f64::NEG_INFINITY;
        for i in 0..u.len() {
            let (ui, vi) = (u[i], v[i]);
            let f = eval_f(ui, vi, p).map_err(|source| StepError::Reaction { step, cell: i, source })?;
            let g = eval_g(ui, vi, p).map_err(|source| StepError::Reaction { step, cell: i, source })?;
            let nu = ui + dt * (p.d1 * self.lap_u[i] + f);
            let nv = vi + dt * (p.d2 * self.lap_v[i] + g);
            if self.cfg.fail_on_nonfinite {
                if !nu.is_finite() {
                    return Err(StepError::NonFinite { step, cell: i, species: Species::U, value: nu });
                }
                if !nv.is_finite() {
                    return Err(StepError::NonFinite { step, cell: i, species: Species::V, value: nv });
                }
            }
            u[i] = nu;
            v[i] = nv;
            max_u = max_u.max(nu);
        }
        if max_u > self.cfg.blowup_cap {
            return Err(StepError::BlowUp {
                step,
                value: max_u,
                cap: self.cfg.blowup_cap,
            });
        }
        let floor = self.cfg.positivity_floor;
        for (species, values) in [(Species::U, &mut *u), (Species::V, &mut *v)] {
            for (cell, x) in values.iter_mut().enumerate() {
                if *x < floor {
                    match self.cfg.policy {
                        PositivityPolicy::Strict => {
                            return Err(StepError::Positivity { step, cell, species, value: *x })
                        }
                        PositivityPolicy::Clamp => {
                            *x = floor;
                            self.clamped += 1;
                        }
                    }
                }
            }
        }
        state.step = step;
        state.t = step as f64 * dt;
        Ok(())
    }
}

/// Receives every recorded state.
pub trait Sink {
    fn record(&mut self, state: &SimState, record: &DiagnosticsRecord) -> std::io::Result<()>;

    fn finish(&mut self, _state: &SimState) -> std::io::Result<()> {
        Ok(())
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub state: SimState,
    pub series: Vec<DiagnosticsRecord>,
    pub dt: f64,
    pub steps: u64,
    pub clamp_count: u64,
}

/// Integrates from `(u0, v0)` to `t_end`, recording at step 0, every
/// `record_every` steps and at the final step.
pub fn run(
    params: &ModelParams,
    u0: Field,
    v0: Field,
    cfg: &StepperConfig,
    functionals: crate::diagnostics::FunctionalParams,
    norm_exponents: &[f64],
    sinks: &mut [&mut dyn Sink],
) -> Result<RunOutput, StepError> {
    let grid = *u0.grid();
    let mut stepper = Stepper::new(*params, *cfg, &grid)?;
    let plan = DiagnosticsPlan {
        functionals,
        norm_exponents: norm_exponents.to_vec(),
        energy_kernel: stepper.operator().energy_kernel(),
    };
    let mut state = SimState::new(u0, v0);
    let steps = cfg.step_count();
    let mut series = Vec::new();
    let emit = |state: &SimState, series: &mut Vec<DiagnosticsRecord>, sinks: &mut [&mut dyn Sink]| {
        let rec = plan.record(state.t, state.step, &state.u, &state.v)?;
        for s in sinks.iter_mut() {
            s.record(state, &rec)?;
        }
        series.push(rec);
        Ok::<_, StepError>(())
    };
    emit(&state, &mut series, sinks)?;
    for _ in 0..steps {
        stepper.step_once(&mut state)?;
        if state.step.is_multiple_of(cfg.record_every) || state.step == steps {
            emit(&state, &mut series, sinks)?;
        }
    }
    for s in sinks.iter_mut() {
        s.finish(&state)?;
    }
    Ok(RunOutput {
        state,
        series,
        dt: stepper.dt(),
        steps,
        clamp_count: stepper.clamp_count(),
    })
}
