//! Corpus ingestion: reads delimited decomposition tables, parses and types
//! each admissible entry, and indexes them by reasoning pattern.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use synthqa_core::dataset::{CorpusEntry, PatternIndex};
use synthqa_core::parser::RuleTable;
use synthqa_core::{infer_types, parse_and_normalize, Decomposition, Level};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read corpus: {0}")]
    Io(#[from] std::io::Error),
    #[error("corpus is missing column {0:?}")]
    MissingColumn(String),
    #[error("corpus has no header row")]
    NoHeader,
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Column names, overridable for corpus schema variants.
#[derive(Debug, Clone)]
pub struct ColumnMap {
    pub question_id: String,
    pub question_text: String,
    pub decomposition: String,
    pub split: Option<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            question_id: "question_id".into(),
            question_text: "question_text".into(),
            decomposition: "decomposition".into(),
            split: Some("split".into()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    pub level: Level,
    pub step_range: RangeInclusive<usize>,
    pub columns: ColumnMap,
    /// Keep only rows whose split column equals this value, when present.
    pub split_filter: Option<String>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            level: Level::Low,
            step_range: 2..=6,
            columns: ColumnMap::default(),
            split_filter: None,
        }
    }
}

/// Skip and failure accounting for one ingestion run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct IngestReport {
    pub rows: usize,
    pub admitted: usize,
    pub skipped_step_range: usize,
    pub skipped_split: usize,
    pub failed_decomposition: usize,
    pub failed_parse: usize,
    pub failed_type: usize,
    /// First few failures, for diagnostics.
    pub failures: Vec<(String, String)>,
    pub step_histogram: BTreeMap<usize, usize>,
}

impl IngestReport {
    fn record_failure(&mut self, id: &str, message: String) {
        if self.failures.len() < 20 {
            self.failures.push((id.to_string(), message));
        }
    }
}

fn detect_delimiter(path: &Path) -> Result<u8, IngestError> {
    let content = std::fs::read_to_string(path)?;
    let first = content.lines().next().ok_or(IngestError::NoHeader)?;
    Ok(if first.contains('\t') { b'\t' } else { b',' })
}

/// Reads, parses, normalizes, types, and indexes a corpus file. Entries
/// outside the step range or failing any stage are skipped and counted.
pub fn ingest_corpus(
    path: impl AsRef<Path>,
    opts: &IngestOptions,
    rules: &RuleTable,
) -> Result<(PatternIndex, IngestReport), IngestError> {
    let path = path.as_ref();
    let delimiter = detect_delimiter(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(false)
        .from_path(path)?;

    let headers = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize, IngestError> {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let id_col = find(&opts.columns.question_id)?;
    let text_col = find(&opts.columns.question_text)?;
    let decomp_col = find(&opts.columns.decomposition)?;
    let split_col = match &opts.columns.split {
        Some(name) => headers.iter().position(|h| h.eq_ignore_ascii_case(name)),
        None => None,
    };

    let mut index = PatternIndex::new();
    let mut report = IngestReport::default();

    for row in reader.records() {
        let row = row?;
        report.rows += 1;
        let id = row.get(id_col).unwrap_or("").to_string();
        let question = row.get(text_col).unwrap_or("").to_string();
        let decomposition_text = row.get(decomp_col).unwrap_or("");

        if let (Some(col), Some(want)) = (split_col, &opts.split_filter) {
            if row.get(col).map(str::trim) != Some(want.as_str()) {
                report.skipped_split += 1;
                continue;
            }
        }

        // The source dataset is the question id's prefix, when present.
        let source = id.split(['_', '-']).next().unwrap_or("unknown").to_string();
        let decomposition = match Decomposition::from_joined(
            id.clone(),
            question.clone(),
            decomposition_text,
            opts.level,
            source,
        ) {
            Ok(d) => d,
            Err(e) => {
                report.failed_decomposition += 1;
                report.record_failure(&id, e.to_string());
                continue;
            }
        };
        if !opts.step_range.contains(&decomposition.len()) {
            report.skipped_step_range += 1;
            continue;
        }
        let program = match parse_and_normalize(&decomposition, rules) {
            Ok(p) => p,
            Err(e) => {
                report.failed_parse += 1;
                report.record_failure(&id, e.to_string());
                continue;
            }
        };
        let typed = match infer_types(&program, &question) {
            Ok(t) => t,
            Err(e) => {
                report.failed_type += 1;
                report.record_failure(&id, e.to_string());
                continue;
            }
        };
        *report.step_histogram.entry(typed.len()).or_default() += 1;
        report.admitted += 1;
        index.insert(CorpusEntry {
            question_id: id,
            question_text: question,
            decomposition,
            program: typed,
        });
    }

    Ok((index, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_corpus(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn ingests_tab_separated_corpus() {
        let f = write_corpus(
            "question_id\tquestion_text\tdecomposition\tsplit\n\
             DROP_1\tHow many goals did Mia score?\treturn goals by Mia ;return the number of #1\ttrain\n",
        );
        let (index, report) =
            ingest_corpus(f.path(), &IngestOptions::default(), RuleTable::default_table()).unwrap();
        assert_eq!(report.admitted, 1);
        assert_eq!(index.len(), 1);
        assert_eq!(index.pattern_count(), 1);
    }

    #[test]
    fn ingests_comma_separated_corpus() {
        let f = write_corpus(
            "question_id,question_text,decomposition,split\n\
             CWQ_2,\"What is the sum of 5 and the goals by Leo?\",\"return goals by Leo ;return number of #1 ;return the sum of 5 and #2\",train\n",
        );
        let (index, report) =
            ingest_corpus(f.path(), &IngestOptions::default(), RuleTable::default_table()).unwrap();
        assert_eq!(report.admitted, 1, "failures: {:?}", report.failures);
        assert_eq!(index.len(), 1);
    }

    #[test]
    fn step_range_filter_applies() {
        let steps: Vec<String> = (0..8)
            .map(|i| if i == 0 { "return goals".to_string() } else { format!("return #{i} that remain") })
            .collect();
        let f = write_corpus(&format!(
            "question_id\tquestion_text\tdecomposition\tsplit\n\
             LONG_1\tq?\t{}\ttrain\n",
            steps.join(" ;")
        ));
        let (_, report) =
            ingest_corpus(f.path(), &IngestOptions::default(), RuleTable::default_table()).unwrap();
        assert_eq!(report.admitted, 0);
        assert_eq!(report.skipped_step_range, 1);
    }

    #[test]
    fn unparseable_rows_are_counted_not_dropped_silently() {
        let f = write_corpus(
            "question_id\tquestion_text\tdecomposition\tsplit\n\
             BAD_1\tq?\treturn goals ;return ### gibberish #1 ###\ttrain\n",
        );
        let (_, report) =
            ingest_corpus(f.path(), &IngestOptions::default(), RuleTable::default_table()).unwrap();
        assert_eq!(report.failed_parse, 1);
        assert_eq!(report.failures.len(), 1);
    }

    #[test]
    fn missing_column_is_a_schema_error() {
        let f = write_corpus("a\tb\nx\ty\n");
        let err = ingest_corpus(f.path(), &IngestOptions::default(), RuleTable::default_table())
            .unwrap_err();
        assert!(matches!(err, IngestError::MissingColumn(_)));
    }

    #[test]
    fn double_ingest_is_identical() {
        let f = write_corpus(
            "question_id\tquestion_text\tdecomposition\tsplit\n\
             D_1\tHow many goals did Mia score?\treturn goals by Mia ;return the number of #1\ttrain\n\
             D_2\tWhich goals were early?\treturn goals by Ada ;return #1 from the 1st half\ttrain\n",
        );
        let opts = IngestOptions::default();
        let rules = RuleTable::default_table();
        let (a, _) = ingest_corpus(f.path(), &opts, rules).unwrap();
        let (b, _) = ingest_corpus(f.path(), &opts, rules).unwrap();
        assert_eq!(a.histogram(), b.histogram());
        let ids_a: Vec<&str> = a.entries().map(|e| e.question_id.as_str()).collect();
        let ids_b: Vec<&str> = b.entries().map(|e| e.question_id.as_str()).collect();
        assert_eq!(ids_a, ids_b);
    }
}
