//! `gm` command-line interface.
//!
//! Exit codes: 0 on success, 1 on usage or validation errors, 2 when a run
//! aborts (blow-up, positivity breach, non-finite values).

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::experiments::{
    execute, run_diffusive_limit, run_kernel_sweep, DiffusiveLimitSetup, ExperimentError,
    PatternOverrides,
};
use crate::grid::{Dimension, Grid};
use crate::io::config::load_config;
use crate::io::heatmap::render_heatmap;
use crate::io::snapshot::read_snapshot;
use crate::model::ModelParams;
use crate::reaction::turing_check;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_ABORT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "gm", version, about = "Local and nonlocal Gierer-Meinhardt simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a simulation described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `outputs.dir`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check the four Turing inequalities at the positive equilibrium.
    TuringCheck {
        #[arg(long, default_value_t = 0.5)]
        b: f64,
        #[arg(long, default_value_t = 0.3)]
        d1: f64,
        #[arg(long, default_value_t = 30.0)]
        d2: f64,
        /// Also print key=value lines.
        #[arg(long)]
        kv: bool,
    },
    /// Compare rescaled-bump nonlocal runs against their local limit.
    DiffusiveLimit(LimitArgs),
    /// Nonlocal pattern runs for several Gaussian widths.
    Sweep(SweepArgs),
    /// Render a snapshot file as a PNG heatmap.
    Render {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 1)]
        scale: u32,
    },
}

#[derive(Debug, Args)]
struct LimitArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [4u32, 8, 16])]
    j: Vec<u32>,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    dim: u8,
    #[arg(long, default_value_t = 48)]
    cells: usize,
    #[arg(long, default_value_t = 0.5)]
    t_end: f64,
    #[arg(long, default_value_t = 5)]
    record_every: u64,
    #[arg(long, default_value_t = 0.5)]
    b: f64,
    #[arg(long, default_value_t = 1.0)]
    d1: f64,
    #[arg(long, default_value_t = 1.0)]
    d2: f64,
    /// Use the local solver on both sides; every error must be 0.
    #[arg(long)]
    self_check: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.6, 0.7, 10.0])]
    sigmas: Vec<f64>,
    #[arg(long)]
    cells: Option<usize>,
    #[arg(long)]
    length: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn report(e: &ExperimentError) -> i32 {
    eprintln!("error: {e}");
    if e.is_runtime_abort() {
        EXIT_ABORT
    } else {
        EXIT_INVALID
    }
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Simulate { config, output } => simulate(config, output),
        Command::TuringCheck { b, d1, d2, kv } => turing(b, d1, d2, kv),
        Command::DiffusiveLimit(a) => diffusive_limit(a),
        Command::Sweep(a) => sweep(a),
        Command::Render {
            snapshot,
            output,
            scale,
        } => render(snapshot, output, scale),
    }
}

fn simulate(path: PathBuf, output: Option<PathBuf>) -> i32 {
    let mut config = match load_config(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    if output.is_some() {
        config.outputs.dir = output;
    }
    let cfg = config.stepper_config();
    eprintln!(
        "simulate: {}x{} cells, dt={}, steps={}, output={}",
        config.grid.nx,
        config.grid.ny,
        cfg.effective_dt(),
        cfg.step_count(),
        config.outputs.dir().display()
    );
    match execute(&config) {
        Ok(s) => {
            let st = &s.output.state;
            eprintln!(
                "done: t={} steps={} u in [{}, {}] v in [{}, {}] clamped={}",
                st.t,
                s.output.steps,
                st.u.min(),
                st.u.max(),
                st.v.min(),
                st.v.max(),
                s.output.clamp_count
            );
            EXIT_OK
        }
        Err(e) => report(&e),
    }
}

fn turing(b: f64, d1: f64, d2: f64, kv: bool) -> i32 {
    let params = ModelParams::reduced(b, d1, d2);
    if let Err(e) = params.validate() {
        eprintln!("error: {e}");
        return EXIT_INVALID;
    }
    let rep = match turing_check(&params) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let j = rep.jacobian;
    println!("equilibrium    u* = {:<12.6} v* = {:.6}", rep.equilibrium.0, rep.equilibrium.1);
    println!("jacobian       f_u = {:<10.6} f_v = {:<10.6} g_u = {:<10.6} g_v = {:.6}", j.f_u, j.f_v, j.g_u, j.g_v);
    let names = [
        "f_u + g_v < 0",
        "det J > 0",
        "d2 f_u + d1 g_v > 0",
        "(d2 f_u + d1 g_v)^2 > 4 d1 d2 det J",
    ];
    for (i, name) in names.iter().enumerate() {
        println!(
            "condition {}    {:<38} {:<5}  margin = {:.6}",
            i + 1,
            name,
            rep.conditions[i],
            rep.margins[i]
        );
    }
    if kv {
        println!("u_star={}", rep.equilibrium.0);
        println!("v_star={}", rep.equilibrium.1);
        for i in 0..4 {
            println!("cond{}={}", i + 1, rep.conditions[i]);
            println!("margin{}={}", i + 1, rep.margins[i]);
        }
        println!("turing={}", rep.all());
    }
    EXIT_OK
}

fn diffusive_limit(a: LimitArgs) -> i32 {
    let dim = if a.dim == 1 { Dimension::One } else { Dimension::Two };
    if a.cells < 2 || !(a.t_end > 0.0) || a.record_every == 0 {
        eprintln!("error: need cells >= 2, t_end > 0 and record_every >= 1");
        return EXIT_INVALID;
    }
    let params = ModelParams::reduced(a.b, a.d1, a.d2);
    if let Err(e) = params.validate() {
        eprintln!("error: {e}");
        return EXIT_INVALID;
    }
    let mut setup = DiffusiveLimitSetup::unit(dim, a.cells, a.t_end);
    setup.record_every = a.record_every;
    setup.self_check = a.self_check;
    eprintln!("diffusive-limit: n={} cells={} T={} j={:?}", dim.n(), a.cells, a.t_end, a.j);
    match run_diffusive_limit(&a.j, &setup, &params) {
        Ok(rep) => {
            println!("M = {}  limit coefficients = ({}, {})  dt = {}", rep.m, rep.limit_coefficients.0, rep.limit_coefficients.1, rep.dt);
            println!("{:>6}  {:>14}", "j", "l2_error");
            let mut failed = false;
            for ((j, e), f) in rep.j_values.iter().zip(&rep.l2_errors).zip(&rep.failures) {
                match f {
                    None => println!("{j:>6}  {e:>14.6e}"),
                    Some(msg) => {
                        failed = true;
                        println!("{j:>6}  failed: {msg}");
                    }
                }
            }
            if failed {
                EXIT_ABORT
            } else {
                EXIT_OK
            }
        }
        Err(e) => report(&e),
    }
}

fn sweep(a: SweepArgs) -> i32 {
    let overrides = PatternOverrides {
        cells: a.cells,
        length: a.length,
        t_end: a.t_end,
        seed: a.seed,
        output_dir: a.output,
        ..PatternOverrides::default()
    };
    eprintln!("sweep: sigmas={:?}", a.sigmas);
    let rep = run_kernel_sweep(&a.sigmas, &overrides);
    print!("{}", rep.table());
    if rep.rows.iter().any(|r| r.result.is_err()) {
        EXIT_ABORT
    } else {
        EXIT_OK
    }
}

fn render(snapshot: PathBuf, output: PathBuf, scale: u32) -> i32 {
    let snap = match read_snapshot(&snapshot) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    // extents are not stored; pixels do not depend on them
    let grid = Grid::new(snap.nx, snap.ny, snap.nx as f64, snap.ny as f64);
    let field = match grid.map_err(|e| e.to_string()).and_then(|g| snap.into_field(g).map_err(|e| e.to_string())) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    match render_heatmap(&field, &output, scale) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}
