use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::config::{ExperimentConfig, ModelKind};
use super::experiment::{RunArtifacts, SweepRow};
use crate::autoencoder::{write_loss_history, write_model};
use crate::cohort::MEASURE_NAMES;
use crate::survival::write_cox_model;
use crate::{Error, Result};

/// A file to be written, relative to the output directory.
pub type OutputFile = (PathBuf, Vec<u8>);

pub const REPORT_HEADER: &str = "model_name,horizon,c_index,n_subjects,n_events";
pub const COMPARISON_HEADER: &str = "horizon,model_a,model_b,c_a,c_b,delta_c,p_value,n_boot";
pub const SWEEP_HEADER: &str = "hidden_dim,horizon,c_index";

pub fn model_file_stem(kind: ModelKind, months: u32) -> String {
    format!("{kind}_{months}m")
}

/// Renders every output of a run. Rows appear only for the reported model
/// family; comparators are saved under `models/` alongside them.
pub fn render_run(art: &RunArtifacts, cfg: &ExperimentConfig) -> Result<Vec<OutputFile>> {
    let mut files = Vec::new();

    let mut report = format!("{REPORT_HEADER}\n");
    for m in art.fitted.iter().filter(|m| ModelKind::REPORTED.contains(&m.kind())) {
        writeln!(
            report,
            "{},{},{},{},{}",
            m.kind(),
            m.horizon().months(),
            m.c_index,
            m.design.test.len(),
            m.n_events()
        )
        .unwrap();
    }
    files.push(("report.csv".into(), report.into_bytes()));

    let mut cmp = format!("{COMPARISON_HEADER}\n");
    for c in &art.comparisons {
        let r = &c.result;
        writeln!(
            cmp,
            "{},{},{},{},{},{},{},{}",
            c.horizon.months(),
            c.model_a,
            c.model_b,
            r.c_a,
            r.c_b,
            r.delta,
            r.p_value,
            r.n_boot
        )
        .unwrap();
    }
    files.push(("comparisons.csv".into(), cmp.into_bytes()));

    let s = &art.seeds;
    let mut meta = format!(
        "tool = \"{}\"\nversion = \"{}\"\nn_train = {}\nn_test = {}\n",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION"),
        art.prepared.train.len(),
        art.prepared.test.len()
    );
    for (name, seed) in [
        ("cohort", s.cohort),
        ("split", s.split),
        ("init", s.init),
        ("train", s.train),
        ("bootstrap", s.bootstrap),
    ] {
        writeln!(meta, "seed_{name} = \"{seed}\"").unwrap();
    }
    if let Some(last) = art.history.last() {
        writeln!(meta, "final_window_loss = {}", last.loss).unwrap();
    }
    write!(meta, "\n[config]\n{}", cfg.to_toml()).unwrap();
    files.push(("report_meta.txt".into(), meta.into_bytes()));

    let mut norm = String::from("measure,mean,sd\n");
    for (k, name) in MEASURE_NAMES.iter().enumerate() {
        writeln!(norm, "{name},{},{}", art.prepared.stats.mean[k], art.prepared.stats.sd[k]).unwrap();
    }
    files.push(("norm_stats.csv".into(), norm.into_bytes()));

    let mut buf = Vec::new();
    write_model(&art.autoencoder, &mut buf)?;
    files.push(("autoencoder.txt".into(), buf));
    let mut buf = Vec::new();
    write_loss_history(&art.history, &mut buf)?;
    files.push(("loss_history.csv".into(), buf));

    for m in &art.fitted {
        let stem = model_file_stem(m.kind(), m.horizon().months());
        let mut buf = Vec::new();
        write_cox_model(&m.cox, &mut buf)?;
        files.push((Path::new("models").join(format!("{stem}.txt")), buf));

        let mut rows = format!("subject_id,time_months,event,{}\n", m.design.names.join(","));
        for r in &m.design.test {
            let raw: Vec<String> = r.raw.iter().map(f64::to_string).collect();
            writeln!(rows, "{},{},{},{}", r.subject_id, r.time_months, u8::from(r.event), raw.join(",")).unwrap();
        }
        files.push((Path::new("models").join(format!("{stem}_test.csv")), rows.into_bytes()));
    }

    for m in art.fitted.iter().filter(|m| m.kind() == ModelKind::Longitudinal) {
        let months = m.horizon().months();
        let mut out = format!("subject_id,split,{}\n", m.design.names.join(","));
        for (split, rows) in [("train", &m.design.train), ("test", &m.design.test)] {
            for r in rows {
                let raw: Vec<String> = r.raw.iter().map(f64::to_string).collect();
                writeln!(out, "{},{split},{}", r.subject_id, raw.join(",")).unwrap();
            }
        }
        files.push((format!("features_{months}m.csv").into(), out.into_bytes()));
    }
    Ok(files)
}

pub fn render_sweep(rows: &[SweepRow]) -> Vec<OutputFile> {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        writeln!(out, "{},{},{}", r.hidden_dim, r.horizon.months(), r.c_index).unwrap();
    }
    vec![("sweep.csv".into(), out.into_bytes())]
}

/// Writes `files` under `dir`. If any write fails, files written by this
/// call are removed before the error is returned.
pub fn write_outputs(dir: &Path, files: &[OutputFile]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let result = (|| -> Result<()> {
        for (rel, bytes) in files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        Ok(())
    })();
    match result {
        Ok(()) => Ok(written),
        Err(e) => {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            Err(e.in_stage("write"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ReportRow {
    pub model_name: ModelKind,
    pub horizon: u32,
    pub c_index: f64,
    pub n_subjects: usize,
    pub n_events: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
struct SweepCsvRow {
    hidden_dim: usize,
    horizon: u32,
    c_index: f64,
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path, header: &str) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.lines().next() != Some(header) {
        return Err(Error::Data(format!("{}: expected header `{header}`", path.display())));
    }
    let rows = csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no rows", path.display())));
    }
    Ok(rows)
}

pub fn read_report(path: &Path) -> Result<Vec<ReportRow>> {
    let rows: Vec<ReportRow> = read_csv(path, REPORT_HEADER)?;
    for r in &rows {
        if !(0.0..=1.0).contains(&r.c_index) {
            return Err(Error::Data(format!("{}: c_index {} outside [0, 1]", path.display(), r.c_index)));
        }
    }
    Ok(rows)
}

/// Plot-ready series from `report.csv` (and `sweep.csv` when present):
/// `fig3_data.csv` holds one bar per (model, horizon) grouped by horizon,
/// `fig4_data.csv` one point per (hidden_dim, horizon).
pub fn render_plot_data(dir: &Path) -> Result<Vec<OutputFile>> {
    let mut rows = read_report(&dir.join("report.csv"))?;
    rows.sort_by_key(|r| (r.horizon, r.model_name));
    let mut fig3 = String::from("horizon,model_name,c_index\n");
    for r in &rows {
        writeln!(fig3, "{},{},{}", r.horizon, r.model_name, r.c_index).unwrap();
    }
    let mut files = vec![("fig3_data.csv".into(), fig3.into_bytes())];

    let sweep_path = dir.join("sweep.csv");
    if sweep_path.exists() {
        let mut sweep: Vec<SweepCsvRow> = read_csv(&sweep_path, SWEEP_HEADER)?;
        sweep.sort_by_key(|r| (r.horizon, r.hidden_dim));
        let mut fig4 = String::from("horizon,hidden_dim,c_index\n");
        for r in &sweep {
            writeln!(fig4, "{},{},{}", r.horizon, r.hidden_dim, r.c_index).unwrap();
        }
        files.push(("fig4_data.csv".into(), fig4.into_bytes()));
    }
    Ok(files)
}
