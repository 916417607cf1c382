//! CSV renderings and all-or-nothing file output.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use polinfer::analytics::SensitivityReport;
use polinfer::temporal::UtilityTimeline;

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {}", e.error()))
}

/// slice, p_<label>_good..., utility
pub fn timeline_csv(timeline: &UtilityTimeline) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["slice".to_string()];
    header.extend(timeline.targets.iter().map(|t| format!("p_{t}_good")));
    header.push("utility".into());
    w.write_record(&header)?;
    for r in &timeline.records {
        let mut row = vec![r.slice.to_string()];
        row.extend(r.good.iter().map(f64::to_string));
        row.push(r.utility.to_string());
        w.write_record(&row)?;
    }
    finish(w)
}

/// Per-group `wᵢ·pᵢ·scale` at each slice; the columns stack to `total`
/// for a linear utility.
pub fn contributions_csv(timeline: &UtilityTimeline) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["slice".to_string()];
    header.extend(timeline.targets.iter().cloned());
    header.push("total".into());
    w.write_record(&header)?;
    for r in &timeline.records {
        let mut row = vec![r.slice.to_string()];
        row.extend(r.contributions.iter().map(f64::to_string));
        row.push(r.contributions.iter().sum::<f64>().to_string());
        w.write_record(&row)?;
    }
    finish(w)
}

pub fn sensitivity_csv(report: &SensitivityReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["node", "mutual_information", "percent_entropy", "variance_of_belief"])?;
    for r in &report.rows {
        w.write_record([
            r.source.clone(),
            r.mutual_information.to_string(),
            r.percent_of_entropy.to_string(),
            r.variance_of_belief.to_string(),
        ])?;
    }
    finish(w)
}

/// Stage every file next to its destination, then rename them into place.
/// Nothing becomes visible unless all staging writes succeed.
pub fn write_all(files: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    let mut staged = Vec::with_capacity(files.len());
    for (path, bytes) in files {
        let dir = parent(path);
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("staging {}", path.display()))?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        staged.push((tmp, path));
    }
    for (tmp, path) in staged {
        tmp.persist(path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn parent(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}
