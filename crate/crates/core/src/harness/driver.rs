//! Simulation driver: builds a case, steps it to the end time and writes
//! the outputs.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::execution::{ExecutionError, Executor};
use crate::harness::cases::build_case;
use crate::harness::config::{CaseConfig, ConfigError};
use crate::harness::output::{write_snapshot, ProbeSeries};
use crate::harness::report::{write_reports_csv, RunReport};
use crate::neighborhood::UniformGrid;
use crate::physics::{PhysicsError, Solver};
use crate::real::{Precision, Real};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Execution(#[from] ExecutionError),
    #[error("output directory {path} is not writable: {source}")]
    Unwritable { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {message}")]
    Write { path: PathBuf, message: String },
    #[error(transparent)]
    Setup(PhysicsError),
    /// The run stopped early; `report` covers the steps that completed.
    #[error("simulation aborted: {source}")]
    Aborted { source: PhysicsError, report: Box<RunReport> },
}

/// A finished run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub probes: ProbeSeries,
}

/// Creates `dir` and proves a file can be written there.
pub fn ensure_writable(dir: &Path) -> Result<(), RunError> {
    let fail = |source| RunError::Unwritable {
        path: dir.to_path_buf(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(fail)?;
    let probe = dir.join(".write-check");
    File::create(&probe).map_err(fail)?;
    std::fs::remove_file(&probe).map_err(fail)
}

fn write_file(path: &Path, f: impl FnOnce(BufWriter<File>) -> Result<(), csv::Error>) -> Result<(), RunError> {
    let fail = |message: String| RunError::Write {
        path: path.to_path_buf(),
        message,
    };
    let file = File::create(path).map_err(|e| fail(e.to_string()))?;
    f(BufWriter::new(file)).map_err(|e| fail(e.to_string()))
}

/// Writes `report.csv` and `report.txt` into `dir`.
pub fn write_report_files(dir: &Path, report: &RunReport) -> Result<(), RunError> {
    write_file(&dir.join("report.csv"), |out| write_reports_csv(out, std::slice::from_ref(report)))?;
    let path = dir.join("report.txt");
    std::fs::write(&path, report.to_text()).map_err(|e| RunError::Write {
        path,
        message: e.to_string(),
    })
}

pub fn snapshot_name(index: usize) -> String {
    format!("snapshot_{index:04}.csv")
}

/// Runs the configured case to its end time.
pub fn run_simulation(cfg: &CaseConfig) -> Result<RunOutcome, RunError> {
    cfg.validate()?;
    if let Some(dir) = &cfg.out_dir {
        ensure_writable(dir)?;
    }
    match (cfg.dimension(), cfg.precision) {
        (2, Precision::Single) => run::<f32, 2>(cfg),
        (2, Precision::Double) => run::<f64, 2>(cfg),
        (3, Precision::Single) => run::<f32, 3>(cfg),
        _ => run::<f64, 3>(cfg),
    }
}

/// Builds the solver for a case under its configured policy.
pub fn build_solver<R: Real, const D: usize>(cfg: &CaseConfig) -> Result<(Solver<R, D>, Vec<[f64; D]>), RunError> {
    let case = build_case::<D>(cfg)?;
    let exec = Executor::new(cfg.execution_policy())?;
    let grid = UniformGrid::covering(case.lower.map(R::lit), case.upper.map(R::lit), R::lit(case.params.cutoff()));
    let solver = Solver::new(exec, case.params, &case.particles, grid).map_err(RunError::Setup)?;
    Ok((solver, case.probes))
}

fn sample_probes<R: Real, const D: usize>(
    solver: &Solver<R, D>,
    points: &[[f64; D]],
    series: &mut ProbeSeries,
) -> Result<(), PhysicsError> {
    let values = points
        .iter()
        .map(|&p| solver.probe_pressure(p))
        .collect::<Result<Vec<_>, _>>()?;
    series.push(solver.time(), values);
    Ok(())
}

fn run<R: Real, const D: usize>(cfg: &CaseConfig) -> Result<RunOutcome, RunError> {
    let (mut solver, probe_points) = build_solver::<R, D>(cfg)?;
    let mut probes = ProbeSeries::new(probe_points.iter().map(|p| p.to_vec()).collect());
    let out_dir = cfg.out_dir.as_deref();

    let mut report = RunReport {
        case: cfg.case.clone(),
        dimension: D,
        policy: cfg.policy.as_str().to_string(),
        workers: solver.executor().workers(),
        precision: R::PRECISION.to_string(),
        dp: cfg.dp,
        particles: solver.particle_count(),
        fluid_particles: solver.fluid_count(),
        status: "completed".into(),
        ..RunReport::default()
    };

    let start = Instant::now();
    let mut output_time = std::time::Duration::ZERO;
    let end = cfg.end_time;
    let tolerance = 1e-9 * end.max(1.0);
    let snapshot_times: Vec<f64> = (1..=cfg.snapshots).map(|k| end * k as f64 / cfg.snapshots as f64).collect();
    let mut next_snapshot = 0;

    let result = (|| -> Result<(), RunError> {
        let t0 = Instant::now();
        sample_probes(&solver, &probe_points, &mut probes).map_err(RunError::Setup)?;
        output_time += t0.elapsed();
        while end - solver.time() > tolerance {
            let target = snapshot_times.get(next_snapshot).copied().unwrap_or(end);
            solver
                .step(Some(target - solver.time()))
                .map_err(|source| RunError::Aborted {
                    source,
                    report: Box::default(),
                })?;

            let t0 = Instant::now();
            sample_probes(&solver, &probe_points, &mut probes).map_err(|source| RunError::Aborted {
                source,
                report: Box::default(),
            })?;
            if next_snapshot < snapshot_times.len() && solver.time() >= snapshot_times[next_snapshot] - tolerance {
                if let Some(dir) = out_dir {
                    let rows = solver.snapshot();
                    write_file(&dir.join(snapshot_name(next_snapshot)), |out| write_snapshot(out, &rows))?;
                }
                next_snapshot += 1;
            }
            output_time += t0.elapsed();
        }
        Ok(())
    })();

    let t0 = Instant::now();
    if let Some(dir) = out_dir {
        write_file(&dir.join("probes.csv"), |out| probes.write_csv(out))?;
    }
    output_time += t0.elapsed();

    let phases = solver.phases();
    report.wall_seconds = start.elapsed().as_secs_f64();
    report.steps = solver.steps();
    report.substeps = solver.substeps();
    report.simulated_time = solver.time();
    report.interactions = solver.interactions();
    report.cell_list_seconds = phases.cell_list.as_secs_f64();
    report.interaction_seconds = phases.interactions.as_secs_f64();
    report.integration_seconds = phases.integration.as_secs_f64();
    report.sorting_seconds = phases.sorting.as_secs_f64();
    report.output_seconds = output_time.as_secs_f64();
    report.clamped_particles = solver.cell_list().clamped();
    report.finish_gpips();

    let result = result.map_err(|err| match err {
        RunError::Aborted { source, .. } => {
            report.status = format!("aborted: {source}");
            RunError::Aborted {
                source,
                report: Box::new(report.clone()),
            }
        }
        other => other,
    });

    if let Some(dir) = out_dir {
        write_report_files(dir, &report)?;
    }
    result.map(|()| RunOutcome { report, probes })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(end_time: f64) -> CaseConfig {
        let mut cfg = CaseConfig::resolve("dambreak2d").unwrap();
        cfg.dp = 0.25;
        cfg.end_time = end_time;
        cfg
    }

    #[test]
    fn zero_end_time_runs_no_steps() {
        let outcome = run_simulation(&tiny(0.0)).unwrap();
        assert_eq!(outcome.report.steps, 0);
        assert_eq!(outcome.report.interactions, 0);
        assert_eq!(outcome.report.gpips, 0.0);
        assert_eq!(outcome.probes.times, vec![0.0]);
    }

    #[test]
    fn short_run_reaches_end_and_writes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny(0.02);
        cfg.snapshots = 2;
        cfg.out_dir = Some(dir.path().to_path_buf());
        let outcome = run_simulation(&cfg).unwrap();
        let r = &outcome.report;
        assert!((r.simulated_time - 0.02).abs() < 1e-12);
        assert!(r.steps > 0 && r.interactions > 0);
        assert!(r.phase_seconds() <= r.wall_seconds);
        for name in ["report.csv", "report.txt", "probes.csv", "snapshot_0000.csv", "snapshot_0001.csv"] {
            assert!(dir.path().join(name).is_file(), "{name}");
        }
        let snapshot = std::fs::read_to_string(dir.path().join("snapshot_0001.csv")).unwrap();
        assert_eq!(snapshot.lines().count(), r.particles + 1);
    }

    #[test]
    fn unwritable_directory_fails_before_running() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let mut cfg = tiny(10.0);
        cfg.out_dir = Some(blocker.join("sub"));
        assert!(matches!(run_simulation(&cfg), Err(RunError::Unwritable { .. })));
    }
}
