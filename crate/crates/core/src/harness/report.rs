//! Run reports: GPIPS, CSV rows and the text summary.

use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// How `interactions` is counted; written at the top of every report.
pub const COUNTING_NOTE: &str = "interactions = directed neighbor visits (i<-j and j<-i counted separately) \
made by fluid particles in the density-rate pass, once per acoustic substep";

#[derive(Debug, Error, PartialEq)]
pub enum GpipsError {
    #[error("wall time must be positive, got {0} s")]
    NonPositiveTime(f64),
}

/// Giga particle interactions per second.
pub fn compute_gpips(interactions: u64, wall_seconds: f64) -> Result<f64, GpipsError> {
    if !(wall_seconds > 0.0) {
        return Err(GpipsError::NonPositiveTime(wall_seconds));
    }
    Ok(interactions as f64 / wall_seconds / 1e9)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub case: String,
    pub dimension: usize,
    pub policy: String,
    pub workers: usize,
    pub precision: String,
    pub dp: f64,
    pub particles: usize,
    pub fluid_particles: usize,
    pub steps: u64,
    pub substeps: u64,
    pub simulated_time: f64,
    pub interactions: u64,
    pub wall_seconds: f64,
    pub cell_list_seconds: f64,
    pub interaction_seconds: f64,
    pub integration_seconds: f64,
    pub sorting_seconds: f64,
    pub output_seconds: f64,
    pub gpips: f64,
    /// Particles outside the grid at the last cell-list build.
    pub clamped_particles: usize,
    pub status: String,
}

impl RunReport {
    pub fn phase_seconds(&self) -> f64 {
        self.cell_list_seconds + self.interaction_seconds + self.integration_seconds + self.sorting_seconds + self.output_seconds
    }

    /// Fills `gpips` from the counter and wall time (zero for an empty run).
    pub fn finish_gpips(&mut self) {
        self.gpips = if self.interactions == 0 {
            0.0
        } else {
            compute_gpips(self.interactions, self.wall_seconds).unwrap_or(0.0)
        };
    }

    pub fn label(&self) -> String {
        let policy = if self.policy == "seq" {
            self.policy.clone()
        } else {
            format!("{}({})", self.policy, self.workers)
        };
        format!("{} {} {}", self.case, policy, self.precision)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let rows: [(&str, String); 20] = [
            ("case", self.case.clone()),
            ("dimension", self.dimension.to_string()),
            ("policy", self.policy.clone()),
            ("workers", self.workers.to_string()),
            ("precision", self.precision.clone()),
            ("dp [m]", self.dp.to_string()),
            ("particles", format!("{} ({} fluid)", self.particles, self.fluid_particles)),
            ("steps", self.steps.to_string()),
            ("acoustic substeps", self.substeps.to_string()),
            ("simulated time [s]", format!("{:.6}", self.simulated_time)),
            ("interactions", self.interactions.to_string()),
            ("wall time [s]", format!("{:.3}", self.wall_seconds)),
            ("  cell list [s]", format!("{:.3}", self.cell_list_seconds)),
            ("  interactions [s]", format!("{:.3}", self.interaction_seconds)),
            ("  integration [s]", format!("{:.3}", self.integration_seconds)),
            ("  sorting [s]", format!("{:.3}", self.sorting_seconds)),
            ("  output [s]", format!("{:.3}", self.output_seconds)),
            ("GPIPS", format!("{:.6}", self.gpips)),
            ("clamped particles", self.clamped_particles.to_string()),
            ("status", self.status.clone()),
        ];
        let _ = writeln!(s, "# {COUNTING_NOTE}");
        for (label, value) in rows {
            let _ = writeln!(s, "{label:<20} {value}");
        }
        s
    }
}

pub(crate) fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// Writes reports as CSV, one row per run, after a `#` note line.
pub fn write_reports_csv<W: Write>(mut out: W, reports: &[RunReport]) -> Result<(), csv::Error> {
    writeln!(out, "# {COUNTING_NOTE}")?;
    let mut writer = csv_writer(out);
    for report in reports {
        writer.serialize(report)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_reports_csv<R: Read>(input: R) -> Result<Vec<RunReport>, csv::Error> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input)
        .deserialize()
        .collect()
}
