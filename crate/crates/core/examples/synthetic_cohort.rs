//! Generates a synthetic MCI cohort, prints the group summary and writes the
//! visits and outcomes CSVs.
//!
//! cargo run --release --example synthetic_cohort -- [out_dir]

use std::fs::File;
use std::path::PathBuf;

use mci_prognosis::cohort::{generate_cohort_with_truth, summarize, write_outcomes, write_visits, GenConfig};
use mci_prognosis::pipeline::format_summary;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synthetic_out".into()));
    let cohort = generate_cohort_with_truth(&GenConfig::default())?;
    println!("calibrated Weibull scale {:.2} months", cohort.weibull_scale);
    print!("{}", format_summary(&summarize(&cohort.subjects)));

    std::fs::create_dir_all(&out)?;
    write_visits(&cohort.subjects, File::create(out.join("visits.csv"))?)?;
    write_outcomes(&cohort.subjects, File::create(out.join("outcomes.csv"))?)?;
    println!("wrote {}", out.display());
    Ok(())
}
