use std::fs;
use std::path::{Path, PathBuf};

use crate::agents::Strategy;

use super::{HarnessError, MetricsReport};

/// Resolution of the cumulative-loss grid, seconds.
pub const LOSS_GRID_STEP: f64 = 0.1;

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

fn csv_err(path: &Path, e: csv::Error) -> HarnessError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => HarnessError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => HarnessError::Config(format!("{}: {other:?}", path.display())),
    }
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the delay series, cumulative loss and registration table for a
/// report into `out_dir`, creating it if needed. Returns the paths written.
pub fn emit_plotdata(report: &MetricsReport, out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(out_dir).map_err(|source| HarnessError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let id = report.config.id.label();
    let mut written = Vec::new();

    for m in &report.strategies {
        let path = out_dir.join(format!("delay_{id}_{}.csv", m.strategy.name()));
        let rows: Vec<Vec<String>> = m
            .delays
            .iter()
            .map(|d| vec![d.seq.to_string(), f6(d.send_time_s), f6(d.delay_s)])
            .collect();
        let header = ["seq", "send_time_s", "delay_s"].map(String::from);
        write_rows(&path, &header, &rows)?;
        written.push(path);
    }

    let path = out_dir.join(format!("loss_{id}.csv"));
    let mut header = vec!["time_s".to_string()];
    header.extend(
        report
            .strategies
            .iter()
            .map(|m| m.strategy.name().to_string()),
    );
    let steps = (report.config.params.sim_time / LOSS_GRID_STEP).round() as u64;
    let mut rows = Vec::with_capacity(steps as usize + 1);
    for k in 0..=steps {
        let t = k as f64 * LOSS_GRID_STEP;
        let mut row = vec![f6(t)];
        for m in &report.strategies {
            let n = m.loss_times_s.partition_point(|&x| x <= t + 1e-9);
            row.push(n.to_string());
        }
        rows.push(row);
    }
    write_rows(&path, &header, &rows)?;
    written.push(path);

    let path = out_dir.join(format!("registration_{id}.csv"));
    let mut header = vec!["via_fa".to_string()];
    let mut row = vec![report.config.first_target().to_string()];
    for m in &report.strategies {
        header.push(m.strategy.name().to_string());
        row.push(m.registration_time_s.map(f6).unwrap_or_default());
    }
    for baseline in [Strategy::OriginalMip, Strategy::OneLevelUp] {
        if report.get(baseline).is_none() || report.get(Strategy::TwoLevelUp).is_none() {
            continue;
        }
        header.push(format!("improvement_vs_{}", baseline.name()));
        row.push(
            report
                .improvement(baseline, Strategy::TwoLevelUp)
                .map(f6)
                .unwrap_or_default(),
        );
    }
    write_rows(&path, &header, &[row])?;
    written.push(path);

    for m in &report.strategies {
        let path = out_dir.join(format!("trace_{id}_{}.csv", m.strategy.name()));
        let file = fs::File::create(&path).map_err(|source| HarnessError::Io {
            path: path.clone(),
            source,
        })?;
        m.trace.write_csv(file).map_err(|e| csv_err(&path, e))?;
        written.push(path);
    }

    Ok(written)
}
