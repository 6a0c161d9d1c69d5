//! CSV artifacts and the gnuplot script written by a run.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{StepOutput, StepRecord, Summary};
use crate::error::Result;
use crate::scenario::{Simulation, TruthStep};

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const RECORDS_HEADER: [&str; 8] =
    ["t", "mass_U", "mass_SU", "mass_SU_star", "d_1", "d_2", "d_inf", "leaked_mass"];

/// `records.csv`: one row per step. Unrequested norms are left empty.
pub fn write_records_csv(path: &Path, records: &[StepRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(RECORDS_HEADER)?;
    for r in records {
        w.write_record([
            r.t.to_string(),
            r.mass_u.to_string(),
            r.mass_su.to_string(),
            r.mass_su_star.to_string(),
            opt(r.d_1),
            opt(r.d_2),
            opt(r.d_inf),
            r.leaked_mass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `grids_<t>.csv`: the unit, sub-unit and synthesized PHDs and the
/// absolute difference, per bin center.
pub fn write_grid_snapshot(path: &Path, step: &StepOutput) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["bin_center", "D_U", "D_SU", "D_SU_star", "absdiff"])?;
    let spec = step.unit.spec();
    for i in 0..spec.n_bins() {
        let (u, su, star) = (
            step.unit.values()[i],
            step.subunit.values()[i],
            step.synthesized.values()[i],
        );
        w.write_record([
            spec.center(i).to_string(),
            u.to_string(),
            su.to_string(),
            star.to_string(),
            (su - star).abs().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `regions.csv`: discrepancy regions found at each step.
pub fn write_regions_csv(path: &Path, records: &[StepRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "a", "b", "local_distance", "depth"])?;
    for r in records {
        for reg in &r.regions {
            w.write_record([
                r.t.to_string(),
                reg.a.to_string(),
                reg.b.to_string(),
                reg.local_distance.to_string(),
                reg.depth.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `summary.csv`: per-metric mean, max and std after burn-in.
pub fn write_summary_csv(path: &Path, summary: &Summary) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["metric", "mean", "max", "std", "steps"])?;
    for row in &summary.rows {
        w.write_record([
            row.metric.clone(),
            row.mean.to_string(),
            row.max.to_string(),
            row.std.to_string(),
            row.steps.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-seed summaries from a batch run, one row per seed and metric.
pub fn write_batch_csv(path: &Path, results: &[(u64, Summary)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["seed", "metric", "mean", "max", "std", "steps"])?;
    for (seed, summary) in results {
        for row in &summary.rows {
            w.write_record([
                seed.to_string(),
                row.metric.clone(),
                row.mean.to_string(),
                row.max.to_string(),
                row.std.to_string(),
                row.steps.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `truth.csv`: `t, object_id, kind, x, v`. Object 0 is the unit, 1-3 its
/// sub-units.
pub fn write_truth_csv(path: &Path, truth: &[TruthStep]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "object_id", "kind", "x", "v"])?;
    for step in truth {
        let t = step.t.to_string();
        w.write_record([
            t.as_str(),
            "0",
            "unit",
            &step.unit.position.to_string(),
            &step.unit.velocity.to_string(),
        ])?;
        for (k, s) in step.subunits.iter().enumerate() {
            w.write_record([
                t.clone(),
                (k + 1).to_string(),
                "subunit".to_string(),
                s.position.to_string(),
                s.velocity.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `observations.csv`: `t, sensor, x, v` for both sensor streams.
pub fn write_observations_csv(path: &Path, sim: &Simulation) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "sensor", "x", "v"])?;
    for (unit, sub) in sim.unit_observations.iter().zip(&sim.subunit_observations) {
        for (sensor, set) in [("unit", unit), ("subunit", sub)] {
            for m in &set.measurements {
                w.write_record([
                    set.t.to_string(),
                    sensor.to_string(),
                    m.position.to_string(),
                    m.velocity.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Gnuplot script drawing the distance time series and, for each snapshot,
/// the four stacked grid panels.
pub fn write_gnuplot_script(path: &Path, snapshots: &[usize]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "# gnuplot -p plot.gp")?;
    writeln!(f, "set datafile separator ','")?;
    writeln!(f, "set key autotitle columnhead")?;
    writeln!(f, "set xlabel 't'")?;
    writeln!(
        f,
        "plot 'records.csv' using 1:5 with lines, '' using 1:6 with lines, '' using 1:7 with lines"
    )?;
    for t in snapshots {
        writeln!(f, "\npause -1 'next: grids_{t}.csv'")?;
        writeln!(f, "set multiplot layout 4,1 title 't = {t}'")?;
        writeln!(f, "set xlabel 'position (m)'")?;
        for col in 2..=5 {
            writeln!(f, "plot 'grids_{t}.csv' using 1:{col} with steps")?;
        }
        writeln!(f, "unset multiplot")?;
    }
    f.flush()?;
    Ok(())
}
