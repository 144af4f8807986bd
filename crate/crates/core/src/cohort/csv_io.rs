use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Baseline, CohortTag, Outcome, SubjectTrajectory, VisitRecord, MEASURE_NAMES, NUM_MEASURES, VISIT_MONTHS};
use crate::{Error, Result};

pub const VISIT_COLUMNS: [&str; 7] = [
    "subject_id",
    "visit_month",
    "adas13",
    "ravlt_immediate",
    "ravlt_learning",
    "faq",
    "mmse",
];

pub const OUTCOME_COLUMNS: [&str; 9] = [
    "subject_id",
    "age",
    "sex",
    "education_years",
    "apoe4_count",
    "imaging_risk",
    "time_months",
    "event",
    "cohort_tag",
];

const OPTIONAL_OUTCOME_COLUMNS: [&str; 1] = ["cohort_tag"];

/// One rejected input line or subject.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub file: &'static str,
    /// 1-based line number for line-level problems.
    pub line: Option<u64>,
    pub subject_id: Option<String>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.file)?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
        }
        if let Some(id) = &self.subject_id {
            write!(f, " [{id}]")?;
        }
        write!(f, ": {}", self.message)
    }
}

/// Result of ingestion. Every data line is either counted as accepted or
/// has exactly one line-level diagnostic.
#[derive(Debug, Clone, Default)]
pub struct LoadedCohort {
    pub subjects: Vec<SubjectTrajectory>,
    pub diagnostics: Vec<Diagnostic>,
    pub visit_rows: usize,
    pub accepted_visit_rows: usize,
    pub outcome_rows: usize,
    pub accepted_outcome_rows: usize,
}

impl LoadedCohort {
    pub fn line_diagnostics(&self, file: &str) -> usize {
        self.diagnostics
            .iter()
            .filter(|d| d.file == file && d.line.is_some())
            .count()
    }
}

struct Columns {
    index: HashMap<String, usize>,
    width: usize,
}

impl Columns {
    fn new(file: &str, header: &csv::StringRecord, expected: &[&str], optional: &[&str]) -> Result<Self> {
        let mut index = HashMap::new();
        for (k, name) in header.iter().enumerate() {
            if !expected.contains(&name) {
                return Err(Error::Data(format!("{file}: unknown column `{name}`")));
            }
            if index.insert(name.to_string(), k).is_some() {
                return Err(Error::Data(format!("{file}: duplicate column `{name}`")));
            }
        }
        for name in expected {
            if !optional.contains(name) && !index.contains_key(*name) {
                return Err(Error::Data(format!("{file}: missing column `{name}`")));
            }
        }
        Ok(Self {
            index,
            width: header.len(),
        })
    }

    fn get<'r>(&self, rec: &'r csv::StringRecord, name: &str) -> Option<&'r str> {
        self.index.get(name).and_then(|&k| rec.get(k))
    }

    fn parse<T: std::str::FromStr>(&self, rec: &csv::StringRecord, name: &str) -> std::result::Result<T, String> {
        let raw = self.get(rec, name).ok_or_else(|| format!("missing `{name}`"))?;
        raw.parse().map_err(|_| format!("cannot parse {name} `{raw}`"))
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(input)
}

fn parse_visit(cols: &Columns, rec: &csv::StringRecord) -> std::result::Result<(String, VisitRecord), String> {
    if rec.len() != cols.width {
        return Err(format!("expected {} fields, found {}", cols.width, rec.len()));
    }
    let id: String = cols.parse(rec, "subject_id")?;
    if id.is_empty() {
        return Err("empty subject_id".into());
    }
    let visit_month: u32 = cols.parse(rec, "visit_month")?;
    if !VISIT_MONTHS.contains(&visit_month) {
        return Err(format!("visit_month {visit_month} not in {VISIT_MONTHS:?}"));
    }
    let mut measures = [0.0; NUM_MEASURES];
    for (k, name) in MEASURE_NAMES.iter().enumerate() {
        measures[k] = cols.parse(rec, name)?;
    }
    let visit = VisitRecord { visit_month, measures };
    visit.check_bounds()?;
    Ok((id, visit))
}

fn parse_outcome(
    cols: &Columns,
    rec: &csv::StringRecord,
) -> std::result::Result<(String, Baseline, Outcome, Option<CohortTag>), String> {
    if rec.len() != cols.width {
        return Err(format!("expected {} fields, found {}", cols.width, rec.len()));
    }
    let id: String = cols.parse(rec, "subject_id")?;
    if id.is_empty() {
        return Err("empty subject_id".into());
    }
    let finite = |name: &str| -> std::result::Result<f64, String> {
        let v: f64 = cols.parse(rec, name)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("{name} is not finite"))
        }
    };
    let age = finite("age")?;
    let education_years = finite("education_years")?;
    let imaging_risk = finite("imaging_risk")?;
    let time_months = finite("time_months")?;
    if time_months <= 0.0 {
        return Err(format!("time_months = {time_months} must be positive"));
    }
    let sex: u8 = cols.parse(rec, "sex")?;
    if sex > 1 {
        return Err(format!("sex = {sex} must be 0 or 1"));
    }
    let apoe4_count: u8 = cols.parse(rec, "apoe4_count")?;
    if apoe4_count > 2 {
        return Err(format!("apoe4_count = {apoe4_count} must be 0, 1 or 2"));
    }
    let event = match cols.get(rec, "event") {
        Some("1") => true,
        Some("0") => false,
        other => return Err(format!("event must be 0 or 1, got `{}`", other.unwrap_or(""))),
    };
    let tag = match cols.get(rec, "cohort_tag") {
        None | Some("") => None,
        Some(t) => Some(t.parse::<CohortTag>().map_err(|e| e.to_string())?),
    };
    Ok((
        id,
        Baseline {
            age,
            sex,
            education_years,
            apoe4_count,
            imaging_risk,
        },
        Outcome { time_months, event },
        tag,
    ))
}

/// Parses and joins the two tables. Bad lines and incomplete subjects are
/// reported in `diagnostics`; only header or I/O problems are errors.
pub fn read_cohort<V: Read, O: Read>(visits: V, outcomes: O) -> Result<LoadedCohort> {
    let mut out = LoadedCohort::default();

    let mut vr = reader(visits);
    let vcols = Columns::new("visits", vr.headers()?, &VISIT_COLUMNS, &[])?;
    let mut by_subject: HashMap<String, BTreeMap<u32, VisitRecord>> = HashMap::new();
    for rec in vr.records() {
        out.visit_rows += 1;
        let rec = rec?;
        let line = rec.position().map(|p| p.line());
        let diag = |id: Option<String>, message: String| Diagnostic {
            file: "visits",
            line,
            subject_id: id,
            message,
        };
        match parse_visit(&vcols, &rec) {
            Ok((id, visit)) => {
                let month = visit.visit_month;
                match by_subject.entry(id.clone()).or_default().entry(month) {
                    Entry::Occupied(_) => {
                        out.diagnostics.push(diag(Some(id), format!("duplicate visit at month {month}")));
                    }
                    Entry::Vacant(slot) => {
                        slot.insert(visit);
                        out.accepted_visit_rows += 1;
                    }
                }
            }
            Err(msg) => {
                let id = vcols.get(&rec, "subject_id").map(str::to_string);
                out.diagnostics.push(diag(id, msg));
            }
        }
    }

    let mut or = reader(outcomes);
    let ocols = Columns::new("outcomes", or.headers()?, &OUTCOME_COLUMNS, &OPTIONAL_OUTCOME_COLUMNS)?;
    let mut seen = HashSet::new();
    let mut subject_diags = Vec::new();
    for rec in or.records() {
        out.outcome_rows += 1;
        let rec = rec?;
        let line = rec.position().map(|p| p.line());
        match parse_outcome(&ocols, &rec) {
            Ok((id, baseline, outcome, cohort_tag)) => {
                if !seen.insert(id.clone()) {
                    out.diagnostics.push(Diagnostic {
                        file: "outcomes",
                        line,
                        subject_id: Some(id),
                        message: "duplicate outcome row".into(),
                    });
                    continue;
                }
                out.accepted_outcome_rows += 1;
                let visits: Vec<VisitRecord> = by_subject.remove(&id).unwrap_or_default().into_values().collect();
                if visits.first().map(|v| v.visit_month) != Some(0) {
                    subject_diags.push(Diagnostic {
                        file: "outcomes",
                        line: None,
                        subject_id: Some(id),
                        message: "no baseline (month 0) visit".into(),
                    });
                    continue;
                }
                out.subjects.push(SubjectTrajectory {
                    subject_id: id,
                    visits,
                    baseline,
                    outcome,
                    cohort_tag,
                });
            }
            Err(msg) => out.diagnostics.push(Diagnostic {
                file: "outcomes",
                line,
                subject_id: ocols.get(&rec, "subject_id").map(str::to_string),
                message: msg,
            }),
        }
    }

    let mut orphans: Vec<String> = by_subject.into_keys().collect();
    orphans.sort();
    subject_diags.extend(orphans.into_iter().map(|id| Diagnostic {
        file: "visits",
        line: None,
        subject_id: Some(id),
        message: "no outcome row".into(),
    }));
    out.diagnostics.extend(subject_diags);
    Ok(out)
}

pub fn load_cohort(visits_path: &Path, outcomes_path: &Path) -> Result<LoadedCohort> {
    let open = |p: &Path| File::open(p).map_err(|e| Error::io(p, e));
    read_cohort(open(visits_path)?, open(outcomes_path)?)
}

/// Like [`load_cohort`] but any diagnostic is an error.
pub fn load_cohort_strict(visits_path: &Path, outcomes_path: &Path) -> Result<Vec<SubjectTrajectory>> {
    let loaded = load_cohort(visits_path, outcomes_path)?;
    if loaded.diagnostics.is_empty() {
        return Ok(loaded.subjects);
    }
    let shown: Vec<String> = loaded.diagnostics.iter().take(10).map(ToString::to_string).collect();
    Err(Error::Data(format!(
        "{} rejected rows/subjects:\n  {}",
        loaded.diagnostics.len(),
        shown.join("\n  ")
    )))
}

pub fn write_visits<W: Write>(subjects: &[SubjectTrajectory], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(VISIT_COLUMNS)?;
    for s in subjects {
        for v in &s.visits {
            let mut row = vec![s.subject_id.clone(), v.visit_month.to_string()];
            row.extend(v.measures.iter().map(ToString::to_string));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io("<visits>", e))
}

pub fn write_outcomes<W: Write>(subjects: &[SubjectTrajectory], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(OUTCOME_COLUMNS)?;
    for s in subjects {
        let b = &s.baseline;
        w.write_record([
            s.subject_id.clone(),
            b.age.to_string(),
            b.sex.to_string(),
            b.education_years.to_string(),
            b.apoe4_count.to_string(),
            b.imaging_risk.to_string(),
            s.outcome.time_months.to_string(),
            u8::from(s.outcome.event).to_string(),
            s.cohort_tag.map(|t| t.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<outcomes>", e))
}

pub fn save_cohort(subjects: &[SubjectTrajectory], visits_path: &Path, outcomes_path: &Path) -> Result<()> {
    let create = |p: &Path| File::create(p).map_err(|e| Error::io(p, e));
    write_visits(subjects, std::io::BufWriter::new(create(visits_path)?))?;
    write_outcomes(subjects, std::io::BufWriter::new(create(outcomes_path)?))
}
