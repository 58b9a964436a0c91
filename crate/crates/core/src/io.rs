//! File output and input: versioned CSV files for traces, spectra, sweeps,
//! and stability maps, plus the plain-text fit report.
//!
//! Every file starts with the `# turnstile-sr v1` marker followed by a
//! column-header line; floating-point fields use `%.8e` so round trips keep
//! eight significant digits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::circuit::StabilityMap;
use crate::error::{Error, Result};
use crate::mc::SimTrace;
use crate::spectral::PsdEstimate;
use crate::sweep::{SweepResult, SweepRow};
use crate::theory::{FitOutcome, Provenance, TheoryBranch};

/// Version marker written as the first line of every output file.
pub const FILE_HEADER: &str = "# turnstile-sr v1";

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path)
        .map_err(|e| Error::Io(format!("create {}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

/// Write a simulated time trace: one row per sample with the detector
/// voltage, the central-island occupancy, and the running pump count.
pub fn write_trace_csv(path: &Path, trace: &SimTrace) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{FILE_HEADER}")?;
    writeln!(w, "t_s,v_island_V,n,transferred")?;
    for (i, v) in trace.island_voltage.iter().enumerate() {
        writeln!(
            w,
            "{:.8e},{:.8e},{},{}",
            i as f64 * trace.dt,
            v,
            trace.n_trace[i],
            trace.transferred[i]
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Read a trace CSV produced by [`write_trace_csv`].
///
/// The sample spacing is recovered from the first two time stamps and the
/// event counter is not serialized, so `events` comes back as 0.
pub fn read_trace_csv(path: &Path) -> Result<SimTrace> {
    let file = File::open(path)
        .map_err(|e| Error::Io(format!("open {}: {e}", path.display())))?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::Io(format!("{}: empty file", path.display())))?;
    if first?.trim() != FILE_HEADER {
        return Err(Error::Io(format!(
            "{}: missing `{FILE_HEADER}` marker",
            path.display()
        )));
    }

    let mut t = Vec::new();
    let mut island_voltage = Vec::new();
    let mut n_trace = Vec::new();
    let mut transferred = Vec::new();
    for (lineno, line) in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("t_s,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Io(format!(
                "{} line {}: expected 4 fields, found {}",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        let bad = |what: &str| {
            Error::Io(format!("{} line {}: bad {what}", path.display(), lineno + 1))
        };
        t.push(fields[0].parse::<f64>().map_err(|_| bad("time"))?);
        island_voltage.push(fields[1].parse::<f64>().map_err(|_| bad("voltage"))?);
        n_trace.push(fields[2].parse::<i32>().map_err(|_| bad("occupancy"))?);
        transferred.push(fields[3].parse::<i64>().map_err(|_| bad("transfer count"))?);
    }
    if t.len() < 2 {
        return Err(Error::Io(format!(
            "{}: need at least 2 samples, found {}",
            path.display(),
            t.len()
        )));
    }
    let dt = t[1] - t[0];
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Io(format!(
            "{}: non-increasing time stamps",
            path.display()
        )));
    }
    Ok(SimTrace {
        dt,
        duration: dt * t.len() as f64,
        island_voltage,
        final_transferred: *transferred.last().unwrap(),
        n_trace,
        transferred,
        events: 0,
    })
}

/// Write a one-sided power spectral density: frequency bin vs density.
pub fn write_psd_csv(path: &Path, est: &PsdEstimate) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{FILE_HEADER}")?;
    writeln!(w, "f_Hz,psd_V2_per_Hz")?;
    for (k, p) in est.psd.iter().enumerate() {
        writeln!(w, "{:.8e},{:.8e}", k as f64 * est.delta_hz, p)?;
    }
    w.flush()?;
    Ok(())
}

/// Write aggregated sweep rows (simulation and closed-form curves share the
/// schema, distinguished by the provenance column).
pub fn write_sweep_csv(path: &Path, result: &SweepResult) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{FILE_HEADER}")?;
    writeln!(w, "Aq_C,D_V_V2,snr_db_mean,snr_db_stderr,provenance,valid_points")?;
    for r in &result.rows {
        writeln!(
            w,
            "{:.8e},{:.8e},{:.8e},{:.8e},{},{}",
            r.aq,
            r.d_v,
            r.snr_db_mean,
            r.snr_db_stderr,
            r.provenance.as_str(),
            r.valid_points
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Read a sweep CSV produced by [`write_sweep_csv`].
pub fn read_sweep_csv(path: &Path) -> Result<SweepResult> {
    let file = File::open(path)
        .map_err(|e| Error::Io(format!("open {}: {e}", path.display())))?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::Io(format!("{}: empty file", path.display())))?;
    if first?.trim() != FILE_HEADER {
        return Err(Error::Io(format!(
            "{}: missing `{FILE_HEADER}` marker",
            path.display()
        )));
    }

    let mut rows = Vec::new();
    for (lineno, line) in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("Aq_C,") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Io(format!(
                "{} line {}: expected 6 fields, found {}",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i].trim().parse::<f64>().map_err(|_| {
                Error::Io(format!(
                    "{} line {}: bad number `{}`",
                    path.display(),
                    lineno + 1,
                    fields[i]
                ))
            })
        };
        rows.push(SweepRow {
            aq: num(0)?,
            d_v: num(1)?,
            snr_db_mean: num(2)?,
            snr_db_stderr: num(3)?,
            provenance: Provenance::parse(fields[4].trim()).map_err(|_| {
                Error::Io(format!(
                    "{} line {}: unknown provenance `{}`",
                    path.display(),
                    lineno + 1,
                    fields[4]
                ))
            })?,
            valid_points: fields[5].trim().parse().map_err(|_| {
                Error::Io(format!(
                    "{} line {}: bad count `{}`",
                    path.display(),
                    lineno + 1,
                    fields[5]
                ))
            })?,
        });
    }
    Ok(SweepResult { rows, failures: Vec::new() })
}

/// Write a charge-stability scan: one row per grid point with the
/// normalized gate/bias coordinates and the semicolon-joined list of stable
/// central-island occupancies (empty field where no state is stable).
pub fn write_stability_csv(path: &Path, map: &StabilityMap) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{FILE_HEADER}")?;
    writeln!(w, "vg_norm,vb_norm,stable_n")?;
    for (i, &bn) in map.vb_norm.iter().enumerate() {
        for (j, &gn) in map.vg_norm.iter().enumerate() {
            let states = map.cells[i][j]
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(";");
            writeln!(w, "{gn:.8e},{bn:.8e},{states}")?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write the plain-text fit report.
pub fn write_fit_report(path: &Path, branch: TheoryBranch, fit: &FitOutcome) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{FILE_HEADER}")?;
    writeln!(w, "branch = {}", branch.provenance().as_str())?;
    writeln!(w, "parameter = {:.8e}", fit.parameter)?;
    writeln!(w, "residual_db2 = {:.8e}", fit.residual)?;
    writeln!(w, "excluded_points = {}", fit.excluded_points)?;
    writeln!(w, "at_boundary = {}", fit.at_boundary)?;
    w.flush()?;
    Ok(())
}
