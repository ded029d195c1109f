//! File sinks fed by the stepper.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::diagnostics::DiagnosticsRecord;
use crate::grid::Field;
use crate::io::snapshot::write_snapshot;
use crate::stepper::{SimState, Sink};

pub const CSV_VERSION_LINE: &str = "# gm-diagnostics v1";
pub const CSV_COLUMNS: [&str; 13] = [
    "t", "min_u", "max_u", "min_v", "max_v", "l2_u", "l2_v", "l4_u", "l4_v", "y", "Lb", "Yj_u",
    "Yj_v",
];

/// Exponents the CSV sink always needs in every record.
pub const CSV_NORMS: [f64; 2] = [2.0, 4.0];

pub fn csv_row(rec: &DiagnosticsRecord) -> String {
    let (l2_u, l2_v) = rec.norm(2.0).unwrap_or((f64::NAN, f64::NAN));
    let (l4_u, l4_v) = rec.norm(4.0).unwrap_or((f64::NAN, f64::NAN));
    let cols = [
        rec.t,
        rec.min_u,
        rec.max_u,
        rec.min_v,
        rec.max_v,
        l2_u,
        l2_v,
        l4_u,
        l4_v,
        rec.y_functional,
        rec.lb_functional,
        rec.yj_u,
        rec.yj_v,
    ];
    cols.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
}

/// Streams diagnostics rows to a CSV file.
pub struct CsvSink {
    out: BufWriter<File>,
}

impl CsvSink {
    pub fn create(path: &Path) -> io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{CSV_VERSION_LINE}")?;
        writeln!(out, "{}", CSV_COLUMNS.join(","))?;
        Ok(CsvSink { out })
    }
}

impl Sink for CsvSink {
    fn record(&mut self, _state: &SimState, record: &DiagnosticsRecord) -> io::Result<()> {
        writeln!(self.out, "{}", csv_row(record))
    }

    fn finish(&mut self, _state: &SimState) -> io::Result<()> {
        self.out.flush()
    }
}

/// Writes `u`/`v` snapshots every `every`-th record, plus the final state.
pub struct SnapshotSink {
    dir: PathBuf,
    every: u64,
    seen: u64,
}

impl SnapshotSink {
    pub fn create(dir: &Path, every: u64) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(SnapshotSink {
            dir: dir.to_path_buf(),
            every: every.max(1),
            seen: 0,
        })
    }

    fn write_pair(&self, tag: &str, state: &SimState) -> io::Result<()> {
        let write = |name: String, f: &Field| {
            write_snapshot(f, state.t, &self.dir.join(name)).map_err(io::Error::other)
        };
        write(format!("u_{tag}.bin"), &state.u)?;
        write(format!("v_{tag}.bin"), &state.v)
    }
}

impl Sink for SnapshotSink {
    fn record(&mut self, state: &SimState, _record: &DiagnosticsRecord) -> io::Result<()> {
        if self.seen.is_multiple_of(self.every) {
            self.write_pair(&format!("{:08}", state.step), state)?;
        }
        self.seen += 1;
        Ok(())
    }

    fn finish(&mut self, state: &SimState) -> io::Result<()> {
        self.write_pair("final", state)
    }
}

/// Keeps every recorded state in memory.
#[derive(Default)]
pub struct FieldRecorder {
    pub frames: Vec<(f64, Field, Field)>,
}

impl Sink for FieldRecorder {
    fn record(&mut self, state: &SimState, _record: &DiagnosticsRecord) -> io::Result<()> {
        self.frames.push((state.t, state.u.clone(), state.v.clone()));
        Ok(())
    }
}
