//! Corpus and dataset statistics: pattern and step-count histograms, top-10
//! pattern share, parse-failure breakdown, acceptance-rate summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use serde::Serialize;

use crate::ingest::{ingest_corpus, IngestError, IngestOptions, IngestReport};
use synthqa_core::parser::RuleTable;
use synthqa_core::{parse_program, QAInstance};

#[derive(Debug, Clone, Default, Serialize)]
pub struct StatsReport {
    pub kind: String,
    pub total: usize,
    pub pattern_count: usize,
    pub pattern_histogram: BTreeMap<String, usize>,
    pub step_histogram: BTreeMap<usize, usize>,
    /// Share of instances covered by the ten most frequent patterns.
    pub top10_share: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ingest: Option<IngestReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance: Option<serde_json::Value>,
}

fn top10_share(histogram: &BTreeMap<String, usize>, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let mut counts: Vec<usize> = histogram.values().copied().collect();
    counts.sort_unstable_by(|a, b| b.cmp(a));
    counts.iter().take(10).sum::<usize>() as f64 / total as f64
}

/// Statistics for a generated JSONL dataset. Reads the run's stats sidecar
/// (`<path>.stats.json` next to the dataset) for the acceptance summary when
/// present.
pub fn dataset_stats(path: impl AsRef<Path>) -> std::io::Result<StatsReport> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let mut report = StatsReport { kind: "dataset".into(), ..StatsReport::default() };
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: QAInstance = serde_json::from_str(&line)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        report.total += 1;
        *report.pattern_histogram.entry(inst.pattern.clone()).or_default() += 1;
        if let Ok(program) = parse_program(&inst.program) {
            *report.step_histogram.entry(program.len()).or_default() += 1;
        }
    }
    report.pattern_count = report.pattern_histogram.len();
    report.top10_share = top10_share(&report.pattern_histogram, report.total);

    let sidecar = path.with_extension("stats.json");
    if sidecar.exists() {
        if let Ok(text) = std::fs::read_to_string(&sidecar) {
            report.acceptance = serde_json::from_str(&text).ok();
        }
    }
    Ok(report)
}

/// Statistics for a raw corpus file: ingests it and reports coverage.
pub fn corpus_stats(
    path: impl AsRef<Path>,
    opts: &IngestOptions,
    rules: &RuleTable,
) -> Result<StatsReport, IngestError> {
    let (index, ingest) = ingest_corpus(path, opts, rules)?;
    let pattern_histogram = index.histogram();
    let total = index.len();
    Ok(StatsReport {
        kind: "corpus".into(),
        total,
        pattern_count: pattern_histogram.len(),
        top10_share: top10_share(&pattern_histogram, total),
        step_histogram: ingest.step_histogram.clone(),
        pattern_histogram,
        ingest: Some(ingest),
        acceptance: None,
    })
}

/// Human-readable rendering; one stat per line.
pub fn render_human(report: &StatsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "kind: {}", report.kind);
    let _ = writeln!(out, "total: {}", report.total);
    let _ = writeln!(out, "patterns: {}", report.pattern_count);
    let _ = writeln!(out, "top-10 pattern share: {:.1}%", report.top10_share * 100.0);
    if !report.step_histogram.is_empty() {
        let steps: Vec<String> =
            report.step_histogram.iter().map(|(k, v)| format!("{k}:{v}")).collect();
        let _ = writeln!(out, "step counts: {}", steps.join(" "));
    }
    let mut patterns: Vec<(&String, &usize)> = report.pattern_histogram.iter().collect();
    patterns.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    for (pattern, count) in patterns.iter().take(10) {
        let _ = writeln!(out, "  {count:>6}  {pattern}");
    }
    if let Some(ingest) = &report.ingest {
        let _ = writeln!(
            out,
            "ingest: {} rows, {} admitted, {} outside step range, {} parse failures, {} type failures",
            ingest.rows,
            ingest.admitted,
            ingest.skipped_step_range,
            ingest.failed_parse,
            ingest.failed_type
        );
        for (id, message) in ingest.failures.iter().take(5) {
            let _ = writeln!(out, "  failed {id}: {message}");
        }
    }
    if let Some(acceptance) = &report.acceptance {
        if let Some(rate) = acceptance.get("acceptance_rate").and_then(|v| v.as_f64()) {
            let _ = writeln!(out, "acceptance rate: {:.1}%", rate * 100.0);
        }
    }
    out
}
