//! Dataset generation: pattern-balanced sampling over an indexed corpus,
//! question-entity perturbation, and deterministic parallel emission.

use std::collections::BTreeMap;
use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::prelude::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map};
use thiserror::Error;

use crate::decomp::Decomposition;
use crate::gen::{generate_from_typed, GenFailure, GenerationConfig, PredicatePool};
use crate::predicate::{scan_mentions, substitute_word, MentionKind};
use crate::program::TypedProgram;
use crate::rng::{derive_seed, rng_for};
use crate::templates::TemplateSet;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("corpus is empty")]
    CorpusEmpty,
    #[error("sink error: {0}")]
    Sink(String),
}

/// One admissible corpus entry: a question with its typed program.
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub question_id: String,
    pub question_text: String,
    pub decomposition: Decomposition,
    pub program: TypedProgram,
}

/// Corpus entries grouped by reasoning pattern.
#[derive(Debug, Clone, Default)]
pub struct PatternIndex {
    patterns: BTreeMap<String, Vec<CorpusEntry>>,
    total: usize,
}

impl PatternIndex {
    pub fn new() -> Self {
        PatternIndex::default()
    }

    pub fn insert(&mut self, entry: CorpusEntry) {
        self.patterns.entry(entry.program.pattern.clone()).or_default().push(entry);
        self.total += 1;
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn pattern_count(&self) -> usize {
        self.patterns.len()
    }

    pub fn histogram(&self) -> BTreeMap<String, usize> {
        self.patterns.iter().map(|(k, v)| (k.clone(), v.len())).collect()
    }

    pub fn entries(&self) -> impl Iterator<Item = &CorpusEntry> {
        self.patterns.values().flatten()
    }

    pub fn predicate_pool(&self) -> PredicatePool {
        let mut pool = PredicatePool::new();
        for e in self.entries() {
            pool.add_program(&e.program);
        }
        pool
    }

    fn pattern_names(&self) -> Vec<&String> {
        self.patterns.keys().collect()
    }
}

/// Samples one corpus entry: uniformly over patterns first when balanced,
/// uniformly over entries otherwise.
pub fn sample_entry<'a>(
    index: &'a PatternIndex,
    balanced: bool,
    rng: &mut ChaCha8Rng,
) -> Option<&'a CorpusEntry> {
    if index.is_empty() {
        return None;
    }
    if balanced {
        let names = index.pattern_names();
        let name = names.choose(rng)?;
        index.patterns.get(*name)?.choose(rng)
    } else {
        let mut k = rng.random_range(0..index.total);
        for entries in index.patterns.values() {
            if k < entries.len() {
                return entries.get(k);
            }
            k -= entries.len();
        }
        None
    }
}

/// Replaces one question entity mention (also present in the program's
/// predicates) by a nearby same-kind value, keeping question and program
/// consistent. Returns None when no eligible mention exists.
pub fn perturb_question_entities(
    question: &str,
    program: &TypedProgram,
    rng: &mut ChaCha8Rng,
) -> Option<(String, TypedProgram, (String, String))> {
    let mentions = scan_mentions(question);
    let in_predicates = |text: &str| {
        program.calls.iter().any(|c| {
            c.predicate
                .as_ref()
                .is_some_and(|p| substitute_word(p.template(), text, "\u{0}") != p.template())
        })
    };
    let candidates: Vec<(MentionKind, String)> = mentions
        .iter()
        .map(|m| (m.kind, m.text(question).to_string()))
        .filter(|(_, text)| in_predicates(text))
        .collect();
    let (kind, original) = candidates.choose(rng)?.clone();
    let replacement = crate::gen::swap_mention_for_kind(kind, &original, rng)?;
    let new_question = substitute_word(question, &original, &replacement);
    let mut predicates = vec![];
    for call in &program.calls {
        match &call.predicate {
            Some(p) => {
                let substituted = p.with_text_substituted(&original, &replacement).ok()?;
                predicates.push(Some(substituted));
            }
            None => predicates.push(None),
        }
    }
    Some((new_question, program.with_predicates(predicates), (original, replacement)))
}

#[derive(Debug, Clone)]
pub struct DatasetConfig {
    pub gen: GenerationConfig,
    pub balanced: bool,
    /// Probability of perturbing question entities per sampled item.
    pub perturb_prob: f64,
    pub workers: usize,
    /// Fraction of question ids routed to the development split.
    pub dev_fraction: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            gen: GenerationConfig::default(),
            balanced: true,
            perturb_prob: 0.5,
            workers: 1,
            dev_fraction: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Dev,
}

/// Machine-readable run statistics.
#[derive(Debug, Clone, Default, Serialize)]
pub struct DatasetStats {
    pub emitted_train: usize,
    pub emitted_dev: usize,
    pub items_sampled: usize,
    pub generation_attempts: u64,
    pub generation_successes: u64,
    pub pattern_histogram: BTreeMap<String, usize>,
    pub failure_reasons: BTreeMap<String, u64>,
    pub acceptance_rate: f64,
}

/// Stable split routing by question id.
fn split_of(question_id: &str, dev_fraction: f64) -> Split {
    if dev_fraction <= 0.0 {
        return Split::Train;
    }
    let mut h = DefaultHasher::new();
    question_id.hash(&mut h);
    if (h.finish() % 10_000) < (dev_fraction * 10_000.0) as u64 {
        Split::Dev
    } else {
        Split::Train
    }
}

struct WorkItem {
    item_index: u64,
    question_id: String,
    source: String,
    question: String,
    program: TypedProgram,
}

type ItemOutput = (Vec<crate::gen::GeneratedInstance>, Vec<GenFailure>, u64);

fn run_item(
    item: &WorkItem,
    cfg: &DatasetConfig,
    pool: &PredicatePool,
    templates: &TemplateSet,
) -> ItemOutput {
    let mut instances = vec![];
    let mut failures = vec![];
    let mut attempts = 0u64;
    for &n in &cfg.gen.answer_cardinalities {
        attempts += 1;
        let id = format!("{}-{:06}-n{}", item.question_id, item.item_index, n);
        let seed = derive_seed(cfg.gen.seed, "instance", item.item_index * 8 + n as u64);
        let mut meta = Map::new();
        meta.insert("question_id".into(), json!(item.question_id));
        meta.insert("source".into(), json!(item.source));
        match generate_from_typed(
            &id,
            &item.question,
            &item.program,
            n,
            &cfg.gen,
            pool,
            templates,
            seed,
            meta,
        ) {
            Ok(g) => instances.push(g),
            Err(f) => failures.push(f),
        }
    }
    (instances, failures, attempts)
}

/// Streams generated instances into `sink` until `target` train instances
/// are emitted (development emissions ride along). Sampling is sequential
/// over a seeded RNG; generation fans out over `workers` threads per chunk,
/// and emission order is item order, so output bytes are independent of the
/// worker count.
pub fn generate_dataset(
    index: &PatternIndex,
    target: usize,
    cfg: &DatasetConfig,
    templates: &TemplateSet,
    mut sink: impl FnMut(Split, &crate::gen::GeneratedInstance) -> Result<(), String>,
) -> Result<DatasetStats, DatasetError> {
    if index.is_empty() {
        return Err(DatasetError::CorpusEmpty);
    }
    let pool = index.predicate_pool();
    let mut stats = DatasetStats::default();
    let mut sampler = rng_for(cfg.gen.seed, "sampler", 0);
    let workers = cfg.workers.max(1);
    let chunk_size = (workers * 8).max(32);
    let mut item_index = 0u64;

    'outer: loop {
        // Sample a chunk sequentially for reproducibility.
        let mut chunk: Vec<WorkItem> = vec![];
        for _ in 0..chunk_size {
            let entry = sample_entry(index, cfg.balanced, &mut sampler)
                .ok_or(DatasetError::CorpusEmpty)?;
            let mut question = entry.question_text.clone();
            let mut program = entry.program.clone();
            if cfg.perturb_prob > 0.0 && sampler.random_bool(cfg.perturb_prob) {
                if let Some((q, p, _)) = perturb_question_entities(&question, &program, &mut sampler)
                {
                    question = q;
                    program = p;
                }
            }
            chunk.push(WorkItem {
                item_index,
                question_id: entry.question_id.clone(),
                source: entry.decomposition.source_dataset.clone(),
                question,
                program,
            });
            item_index += 1;
        }

        // Generate in parallel, keep item order.
        let mut results: Vec<Option<ItemOutput>> = Vec::with_capacity(chunk.len());
        results.resize_with(chunk.len(), || None);
        if workers == 1 {
            for (i, item) in chunk.iter().enumerate() {
                results[i] = Some(run_item(item, cfg, &pool, templates));
            }
        } else {
            let slots: Vec<std::sync::Mutex<Option<ItemOutput>>> =
                (0..chunk.len()).map(|_| std::sync::Mutex::new(None)).collect();
            let next = std::sync::atomic::AtomicUsize::new(0);
            std::thread::scope(|scope| {
                for _ in 0..workers {
                    scope.spawn(|| loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        if i >= chunk.len() {
                            break;
                        }
                        let out = run_item(&chunk[i], cfg, &pool, templates);
                        *slots[i].lock().expect("no poisoning") = Some(out);
                    });
                }
            });
            for (i, slot) in slots.into_iter().enumerate() {
                results[i] = slot.into_inner().expect("no poisoning");
            }
        }

        for (item, output) in chunk.iter().zip(results.into_iter()) {
            let (instances, failures, attempts) = output.expect("worker filled every slot");
            stats.items_sampled += 1;
            stats.generation_attempts += attempts;
            for f in failures {
                for (reason, count) in f.reasons {
                    *stats.failure_reasons.entry(reason.name().to_string()).or_default() +=
                        count as u64;
                }
            }
            let split = split_of(&item.question_id, cfg.dev_fraction);
            for g in &instances {
                stats.generation_successes += 1;
                sink(split, g).map_err(DatasetError::Sink)?;
                match split {
                    Split::Train => {
                        stats.emitted_train += 1;
                        *stats
                            .pattern_histogram
                            .entry(g.instance.pattern.clone())
                            .or_default() += 1;
                    }
                    Split::Dev => stats.emitted_dev += 1,
                }
                if stats.emitted_train >= target {
                    break 'outer;
                }
            }
        }
    }

    stats.acceptance_rate = if stats.generation_attempts == 0 {
        0.0
    } else {
        stats.generation_successes as f64 / stats.generation_attempts as f64
    };
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::Level;
    use crate::infer::infer_types;
    use crate::parser::{parse_and_normalize, RuleTable};

    fn entry(id: &str, question: &str, steps: &[&str]) -> CorpusEntry {
        let d = Decomposition::new(
            id,
            question,
            steps.iter().map(|s| s.to_string()).collect(),
            Level::Low,
            "TEST",
        )
        .unwrap();
        let p = parse_and_normalize(&d, RuleTable::default_table()).unwrap();
        let tp = infer_types(&p, question).unwrap();
        CorpusEntry {
            question_id: id.into(),
            question_text: question.into(),
            decomposition: d,
            program: tp,
        }
    }

    fn small_index() -> PatternIndex {
        let mut index = PatternIndex::new();
        for i in 0..4 {
            index.insert(entry(
                &format!("a{i}"),
                "How many goals did Mia score in the 1st half?",
                &[
                    "return goals by Mia",
                    "return #1 from the 1st half",
                    "return the number of #2",
                ],
            ));
        }
        index.insert(entry(
            "b0",
            "How many points were scored?",
            &["return points scored by Leo", "return the number of #1"],
        ));
        index
    }

    #[test]
    fn balanced_sampling_is_uniform_over_patterns() {
        // One pattern holds 4 of 5 entries; balanced sampling must still draw
        // both patterns equally (within 3 sigma of multinomial noise).
        let index = small_index();
        assert_eq!(index.pattern_count(), 2);
        let mut rng = rng_for(9, "sampler", 0);
        let draws = 10_000;
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for _ in 0..draws {
            let e = sample_entry(&index, true, &mut rng).unwrap();
            *counts.entry(e.program.pattern.clone()).or_default() += 1;
        }
        let p = 0.5f64;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for (_, count) in counts {
            assert!(
                (count as f64 - draws as f64 * p).abs() < 3.0 * sigma,
                "count {count} outside 3 sigma"
            );
        }
    }

    #[test]
    fn unbalanced_sampling_follows_corpus_frequency() {
        let index = small_index();
        let mut rng = rng_for(10, "sampler", 0);
        let draws = 10_000;
        let mut majority = 0usize;
        for _ in 0..draws {
            let e = sample_entry(&index, false, &mut rng).unwrap();
            if e.program.pattern == "select filter count" {
                majority += 1;
            }
        }
        let share = majority as f64 / draws as f64;
        assert!((share - 0.8).abs() < 0.03, "share {share}");
    }

    #[test]
    fn question_perturbation_keeps_program_consistent() {
        let e = entry(
            "q",
            "How many goals did Mia score in the 1st half?",
            &["return goals by Mia", "return #1 from the 1st half", "return the number of #2"],
        );
        let mut rng = rng_for(11, "perturb", 0);
        let (q2, p2, (orig, repl)) =
            perturb_question_entities(&e.question_text, &e.program, &mut rng).unwrap();
        assert_ne!(q2, e.question_text);
        assert!(q2.contains(&repl));
        // The same substitution lands in the predicates.
        let changed = p2
            .calls
            .iter()
            .filter_map(|c| c.predicate.as_ref())
            .any(|p| p.template().contains(&repl));
        assert!(changed, "substitution {orig} -> {repl} not applied to predicates");
        assert_eq!(p2.pattern, e.program.pattern);
    }

    #[test]
    fn question_without_shared_mentions_is_untouched() {
        let e = entry(
            "q",
            "what is the answer to this?",
            &["return points scored by Leo", "return the number of #1"],
        );
        let mut rng = rng_for(12, "perturb", 0);
        assert!(perturb_question_entities(&e.question_text, &e.program, &mut rng).is_none());
    }

    #[test]
    fn dataset_stream_reaches_target_and_ids_are_unique() {
        let index = small_index();
        let cfg = DatasetConfig {
            gen: GenerationConfig { seed: 21, ..GenerationConfig::default() },
            balanced: true,
            perturb_prob: 0.5,
            workers: 1,
            dev_fraction: 0.0,
        };
        let mut ids = std::collections::HashSet::new();
        let mut emitted = vec![];
        let stats = generate_dataset(&index, 40, &cfg, TemplateSet::default_set(), |split, g| {
            assert_eq!(split, Split::Train);
            assert!(ids.insert(g.instance.id.clone()), "duplicate id {}", g.instance.id);
            emitted.push(g.instance.clone());
            Ok(())
        })
        .unwrap();
        assert_eq!(stats.emitted_train, 40);
        assert_eq!(emitted.len(), 40);
        assert!(stats.acceptance_rate > 0.0);
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let index = small_index();
        let run = |workers: usize| {
            let cfg = DatasetConfig {
                gen: GenerationConfig { seed: 33, ..GenerationConfig::default() },
                balanced: true,
                perturb_prob: 0.5,
                workers,
                dev_fraction: 0.0,
            };
            let mut out = vec![];
            generate_dataset(&index, 25, &cfg, TemplateSet::default_set(), |_, g| {
                out.push(serde_json::to_string(&g.instance).unwrap());
                Ok(())
            })
            .unwrap();
            out
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let cfg = DatasetConfig::default();
        let err = generate_dataset(
            &PatternIndex::new(),
            1,
            &cfg,
            TemplateSet::default_set(),
            |_, _| Ok(()),
        )
        .unwrap_err();
        assert!(matches!(err, DatasetError::CorpusEmpty));
    }
}
