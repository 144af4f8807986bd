//! Experiment orchestration behind the command-line subcommands.

mod config;
mod experiment;
mod report;

pub use config::{ExperimentConfig, ModelKind, Seeds};
pub use experiment::{
    autoencoder_corpus, build_design, fit_design, prepare, run_experiment, run_sweep, train_autoencoder, Comparison,
    Design, DesignRow, FittedModel, PreparedCohort, RunArtifacts, SweepRow,
};
pub use report::{
    model_file_stem, read_report, render_plot_data, render_run, render_sweep, write_outputs, OutputFile, ReportRow,
    COMPARISON_HEADER, REPORT_HEADER, SWEEP_HEADER,
};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::cohort::{generate_cohort, load_cohort_strict, save_cohort, summarize, GroupSummary, SubjectTrajectory};
use crate::{Error, Result};

/// Generates a synthetic cohort and writes the visits and outcomes files.
pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<[GroupSummary; 2]> {
    cfg.validate()?;
    let cohort = generate_cohort(&cfg.gen_config()).map_err(|e| e.in_stage("generate"))?;
    let (visits, outcomes) = (cfg.visits_path(), cfg.outcomes_path());
    for p in [&visits, &outcomes] {
        if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    if let Err(e) = save_cohort(&cohort, &visits, &outcomes) {
        let _ = std::fs::remove_file(&visits);
        let _ = std::fs::remove_file(&outcomes);
        return Err(e.in_stage("write"));
    }
    Ok(summarize(&cohort))
}

/// Group summary in the layout of a cohort characteristics table.
pub fn format_summary(summary: &[GroupSummary]) -> String {
    let mut out = format!(
        "{:<6} {:>5} {:>9} {:>13} {:>13} {:>15}\n",
        "group", "n", "M/F", "age", "MMSE", "time (months)"
    );
    for g in summary {
        let pm = |(m, s): (f64, f64)| format!("{m:.1}±{s:.1}");
        writeln!(
            out,
            "{:<6} {:>5} {:>9} {:>13} {:>13} {:>15}",
            g.group,
            g.n,
            format!("{}/{}", g.male, g.female),
            pm(g.age),
            pm(g.mmse),
            pm(g.time_months)
        )
        .unwrap();
    }
    out
}

fn load(cfg: &ExperimentConfig) -> Result<Vec<SubjectTrajectory>> {
    cfg.validate()?;
    load_cohort_strict(&cfg.visits_path(), &cfg.outcomes_path()).map_err(|e| e.in_stage("load"))
}

/// Runs the model family and writes the report, models and features.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<(RunArtifacts, Vec<PathBuf>)> {
    let cohort = load(cfg)?;
    let art = run_experiment(&cohort, cfg)?;
    let written = write_outputs(&cfg.out, &render_run(&art, cfg)?)?;
    Ok((art, written))
}

pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<(Vec<SweepRow>, Vec<PathBuf>)> {
    let cohort = load(cfg)?;
    let rows = run_sweep(&cohort, cfg)?;
    let written = write_outputs(&cfg.out, &render_sweep(&rows))?;
    Ok((rows, written))
}

/// Writes plot data next to an existing `report.csv`.
pub fn cmd_report(dir: &Path) -> Result<Vec<PathBuf>> {
    let files = render_plot_data(dir).map_err(|e| e.in_stage("report"))?;
    write_outputs(dir, &files)
}
