use std::fmt::Write as _;
use std::path::Path;

use super::runner::{read_runs, RunRecord};
use crate::error::{Error, Result};
use crate::eval::{aggregate, AggregateReport, EvalReport, MeanSe};
use crate::zoo::Family;

/// Row order of rendered tables: each baseline directly above its extension.
pub fn canonical_order() -> Vec<String> {
    let mut out = Vec::new();
    for fam in Family::ALL {
        out.push(fam.key().to_string());
        if fam.has_propensity_head() {
            out.push(format!("{}+", fam.key()));
        }
    }
    out
}

fn cell(m: &MeanSe) -> String {
    match m.se {
        Some(se) => format!("{:.4} ({:.4})", m.mean, se),
        None => format!("{:.4} (-)", m.mean),
    }
}

/// Lower mean wins; equal means bold both.
fn bold_pair(a: f64, b: f64) -> (bool, bool) {
    (a <= b, b <= a)
}

/// Text table of `mean (stderr)` per estimator, bolding the better of each
/// baseline/extension pair per column.
pub fn render(records: &[RunRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::InvalidConfig("no run records to report".into()));
    }
    let order = canonical_order();
    let mut aggs: Vec<AggregateReport> = Vec::new();
    let mut notes: Vec<String> = Vec::new();
    for name in &order {
        let reports: Vec<EvalReport> = records
            .iter()
            .filter(|r| &r.estimator == name)
            .map(RunRecord::eval_report)
            .collect();
        if reports.is_empty() {
            continue;
        }
        match aggregate(&reports) {
            Ok(a) => {
                if a.n_diverged > 0 {
                    notes.push(format!("{name}: {} diverged runs excluded", a.n_diverged));
                }
                aggs.push(a);
            }
            Err(Error::NoCompletedRuns { diverged }) => {
                notes.push(format!("{name}: omitted, all {diverged} runs diverged"));
            }
            Err(e) => return Err(e),
        }
    }
    let find = |name: &str| aggs.iter().find(|a| a.estimator == name);
    for fam in Family::ALL.into_iter().filter(|f| f.has_propensity_head()) {
        let base = fam.key().to_string();
        let plus = format!("{base}+");
        match (find(&base), find(&plus)) {
            (Some(_), None) => notes.push(format!("{plus}: no completed runs, {base} has no comparison")),
            (None, Some(_)) => notes.push(format!("{base}: no completed runs, {plus} has no comparison")),
            _ => {}
        }
    }

    let mut bold = vec![(false, false); aggs.len()];
    for (i, a) in aggs.iter().enumerate() {
        if let Some(base) = a.estimator.strip_suffix('+') {
            if let Some(j) = aggs.iter().position(|b| b.estimator == base) {
                let (bi, pi) = bold_pair(aggs[j].pehe_in.mean, a.pehe_in.mean);
                let (bo, po) = bold_pair(aggs[j].pehe_out.mean, a.pehe_out.mean);
                bold[j] = (bi, bo);
                bold[i] = (pi, po);
            }
        }
    }

    let mark = |s: String, b: bool| if b { format!("**{s}**") } else { s };
    let rows: Vec<[String; 3]> = aggs
        .iter()
        .zip(&bold)
        .map(|(a, &(bi, bo))| {
            [
                a.estimator.clone(),
                mark(cell(&a.pehe_in), bi),
                mark(cell(&a.pehe_out), bo),
            ]
        })
        .collect();
    let header = ["estimator".to_string(), "PEHE-in".to_string(), "PEHE-out".to_string()];
    let widths: Vec<usize> = (0..3)
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let line = |out: &mut String, r: &[String; 3]| {
        writeln!(out, "| {:<w0$} | {:<w1$} | {:<w2$} |", r[0], r[1], r[2], w0 = widths[0], w1 = widths[1], w2 = widths[2])
            .expect("string write");
    };
    line(&mut out, &header);
    writeln!(out, "|{}|{}|{}|", "-".repeat(widths[0] + 2), "-".repeat(widths[1] + 2), "-".repeat(widths[2] + 2)).expect("string write");
    for r in &rows {
        line(&mut out, r);
    }
    for (i, n) in notes.iter().enumerate() {
        if i == 0 {
            out.push('\n');
        }
        writeln!(out, "[{}] {n}", i + 1).expect("string write");
    }
    Ok(out)
}

/// Renders the table for the `runs.csv` in a run directory.
pub fn report(run_dir: &Path) -> Result<String> {
    render(&read_runs(&run_dir.join("runs.csv"))?)
}
