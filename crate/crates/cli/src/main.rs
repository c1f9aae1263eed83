use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use synthqa_cli::{corpus_stats, dataset_stats, ingest_corpus, render_human, IngestOptions, PipelineConfig};
use synthqa_core::checker::verify_instance;
use synthqa_core::dataset::{DatasetConfig, Split};
use synthqa_core::gen::generate_from_typed;
use synthqa_core::instance::FactsRecord;
use synthqa_core::parser::RuleTable;
use synthqa_core::rng::{derive_seed, rng_for};
use synthqa_core::teacher::teacher_instance;
use synthqa_core::{
    execute, generate_dataset, infer_types, normalize, parse_program, registered_primitives,
    render_program, trace_dump, type_dump, Level, PrimitiveId, QAInstance, TemplateSet,
};

#[derive(Parser)]
#[command(name = "synthqa", about = "Compiles question decompositions into typed programs and generates synthetic QA data", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Low,
    High,
}

impl From<LevelArg> for Level {
    fn from(l: LevelArg) -> Level {
        match l {
            LevelArg::Low => Level::Low,
            LevelArg::High => Level::High,
        }
    }
}

#[derive(Args)]
struct TableArgs {
    /// Rule-table file overriding the built-in parsing rules.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Template file overriding the built-in sentence templates.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// QDMR annotation level of the corpus.
    #[arg(long, value_enum, default_value = "low")]
    level: LevelArg,
}

struct Tables {
    rules: RuleTable,
    templates: TemplateSet,
}

impl TableArgs {
    fn load(&self) -> Result<Tables> {
        let rules = match &self.rules {
            Some(path) => RuleTable::from_path(path)
                .with_context(|| format!("loading rules from {}", path.display()))?,
            None => RuleTable::from_str(synthqa_core::parser::DEFAULT_RULES)?,
        };
        let templates = match &self.templates {
            Some(path) => TemplateSet::from_path(path)
                .with_context(|| format!("loading templates from {}", path.display()))?,
            None => TemplateSet::from_str(synthqa_core::templates::DEFAULT_TEMPLATES)?,
        };
        Ok(Tables { rules, templates })
    }
}

#[derive(Args)]
struct ColumnArgs {
    /// Column holding the question id.
    #[arg(long, default_value = "question_id")]
    col_question_id: String,
    /// Column holding the question text.
    #[arg(long, default_value = "question_text")]
    col_question_text: String,
    /// Column holding the `;`-joined decomposition steps.
    #[arg(long, default_value = "decomposition")]
    col_decomposition: String,
}

impl ColumnArgs {
    fn options(&self, level: Level, step_min: usize, step_max: usize) -> IngestOptions {
        IngestOptions {
            level,
            step_range: step_min..=step_max,
            columns: synthqa_cli::ColumnMap {
                question_id: self.col_question_id.clone(),
                question_text: self.col_question_text.clone(),
                decomposition: self.col_decomposition.clone(),
                split: Some("split".into()),
            },
            split_filter: None,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse a corpus into canonical programs, reporting failures per row.
    Parse {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        limit: Option<usize>,
        #[command(flatten)]
        tables: TableArgs,
        #[command(flatten)]
        columns: ColumnArgs,
    },
    /// Type-check one decomposition and dump per-step types.
    Typecheck {
        /// Corpus file holding the decomposition.
        #[arg(long = "in", required_unless_present = "program")]
        input: Option<PathBuf>,
        /// Question id within the corpus file.
        #[arg(long)]
        id: Option<String>,
        /// A program in canonical text form instead of a corpus row.
        #[arg(long)]
        program: Option<String>,
        /// Question text used for type cues with --program.
        #[arg(long, default_value = "")]
        question: String,
        #[command(flatten)]
        tables: TableArgs,
        #[command(flatten)]
        columns: ColumnArgs,
    },
    /// Execute a program over a facts record and print the step trace.
    Execute {
        /// Program in canonical text form (gold chain).
        #[arg(long)]
        program: Option<String>,
        /// Facts sidecar (JSONL of facts records).
        #[arg(long)]
        facts: PathBuf,
        /// Record id within the facts file; defaults to the first record.
        #[arg(long)]
        id: Option<String>,
        /// Which chain to execute: the gold program or the record's
        /// perturbed program.
        #[arg(long, default_value = "gold")]
        chain: String,
        #[arg(long, default_value = "")]
        question: String,
    },
    /// Generate instances for every row of a question file at one cardinality.
    GenInstance {
        #[arg(long)]
        question_file: PathBuf,
        #[arg(long)]
        cardinality: u8,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a `.facts.jsonl` sidecar next to --out.
        #[arg(long)]
        keep_facts: bool,
        #[command(flatten)]
        tables: TableArgs,
        #[command(flatten)]
        columns: ColumnArgs,
    },
    /// Generate a pattern-balanced multi-step dataset.
    GenDataset {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Sample entries uniformly over the corpus instead of uniformly
        /// over reasoning patterns.
        #[arg(long)]
        no_balance: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dev_out: Option<PathBuf>,
        #[arg(long)]
        dev_fraction: Option<f64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        perturb_prob: Option<f64>,
        #[arg(long)]
        keep_facts: bool,
        /// key=value config file; flags take precedence over it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Print the resolved configuration and exit.
        #[arg(long)]
        emit_config: bool,
        #[command(flatten)]
        tables: TableArgs,
        #[command(flatten)]
        columns: ColumnArgs,
    },
    /// Generate per-primitive teaching instances.
    GenPrimitives {
        #[arg(long, default_value_t = 30_000)]
        train: usize,
        #[arg(long, default_value_t = 1_000)]
        dev: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Restrict to specific primitives (default: all registered).
        #[arg(long)]
        primitive: Vec<String>,
        #[command(flatten)]
        tables: TableArgs,
    },
    /// Verify P1/P2/P3 and answer agreement for a generated dataset.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        facts: PathBuf,
    },
    /// Pattern and step statistics for a corpus or generated dataset.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        /// corpus, dataset, or auto (by file extension).
        #[arg(long, default_value = "auto")]
        format: String,
        /// Machine-readable JSON instead of the human summary.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        tables: TableArgs,
        #[command(flatten)]
        columns: ColumnArgs,
    },
}

fn read_facts_records(path: &Path) -> Result<Vec<FactsRecord>> {
    let file = std::fs::File::open(path)
        .with_context(|| format!("cannot open facts file {}", path.display()))?;
    let mut out = vec![];
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).context("malformed facts record")?);
    }
    Ok(out)
}

fn open_writer(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(
        std::fs::File::create(path)
            .with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn cmd_parse(
    input: &Path,
    limit: Option<usize>,
    tables: &TableArgs,
    columns: &ColumnArgs,
) -> Result<i32> {
    let t = tables.load()?;
    let opts = columns.options(tables.level.into(), 1, usize::MAX);
    let (index, report) = ingest_corpus(input, &opts, &t.rules)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for entry in index.entries().take(limit.unwrap_or(usize::MAX)) {
        writeln!(out, "{}\t{}", entry.question_id, render_program(&entry.program))?;
    }
    for (id, message) in &report.failures {
        writeln!(out, "{id}\tERROR: {message}")?;
    }
    eprintln!(
        "parsed {} of {} rows ({} parse failures, {} type failures)",
        report.admitted, report.rows, report.failed_parse, report.failed_type
    );
    Ok(0)
}

fn cmd_typecheck(
    input: Option<&Path>,
    id: Option<&str>,
    program_text: Option<&str>,
    question: &str,
    tables: &TableArgs,
    columns: &ColumnArgs,
) -> Result<i32> {
    let t = tables.load()?;
    let typed = if let Some(text) = program_text {
        let parsed = parse_program(text).map_err(|e| anyhow!("{e}"))?;
        let normalized = normalize(parsed).map_err(|e| anyhow!("{e}"))?;
        match infer_types(&normalized, question) {
            Ok(tp) => tp,
            Err(e) => {
                eprintln!("type error: {e}");
                return Ok(1);
            }
        }
    } else {
        let input = input.expect("clap enforces --in without --program");
        let opts = columns.options(tables.level.into(), 1, usize::MAX);
        let (index, _) = ingest_corpus(input, &opts, &t.rules)?;
        let entry = match id {
            Some(id) => index.entries().find(|e| e.question_id == id),
            None => index.entries().next(),
        };
        match entry {
            Some(e) => e.program.clone(),
            None => {
                eprintln!("no admissible entry{}", id.map(|i| format!(" with id {i}")).unwrap_or_default());
                return Ok(1);
            }
        }
    };
    println!("{}", type_dump(&typed));
    Ok(0)
}

fn cmd_execute(
    program_text: Option<&str>,
    facts: &Path,
    id: Option<&str>,
    chain: &str,
    question: &str,
) -> Result<i32> {
    let records = read_facts_records(facts)?;
    let record = match id {
        Some(id) => records.iter().find(|r| r.id == id),
        None => records.first(),
    }
    .ok_or_else(|| anyhow!("no matching facts record"))?;
    let store = record.to_store().map_err(|e| anyhow!("{e}"))?;
    let text = match chain {
        "gold" => program_text
            .ok_or_else(|| anyhow!("--program is required for the gold chain"))?
            .to_string(),
        "distractor" => record.perturbed_program.clone(),
        other => bail!("unknown chain {other:?} (expected gold or distractor)"),
    };
    let parsed = parse_program(&text).map_err(|e| anyhow!("{e}"))?;
    let normalized = normalize(parsed).map_err(|e| anyhow!("{e}"))?;
    let typed = match infer_types(&normalized, question) {
        Ok(tp) => tp,
        Err(e) => {
            eprintln!("type error: {e}");
            return Ok(1);
        }
    };
    match execute(&typed, &store) {
        Ok(trace) => {
            println!("{}", trace_dump(&typed, &trace));
            Ok(0)
        }
        Err(e) => {
            eprintln!("execution error: {e}");
            Ok(1)
        }
    }
}

fn cmd_gen_instance(
    question_file: &Path,
    cardinality: u8,
    seed: u64,
    out: Option<&Path>,
    keep_facts: bool,
    tables: &TableArgs,
    columns: &ColumnArgs,
) -> Result<i32> {
    let t = tables.load()?;
    let opts = columns.options(tables.level.into(), 2, 6);
    let (index, report) = ingest_corpus(question_file, &opts, &t.rules)?;
    if index.is_empty() {
        eprintln!("no admissible entries ({} rows read)", report.rows);
        return Ok(1);
    }
    let pool = index.predicate_pool();
    let cfg = synthqa_core::GenerationConfig { seed, ..Default::default() };

    let mut instance_writer: Box<dyn Write> = match out {
        Some(path) => Box::new(open_writer(path)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut facts_writer = match (keep_facts, out) {
        (true, Some(path)) => Some(open_writer(&path.with_extension("facts.jsonl"))?),
        (true, None) => bail!("--keep-facts requires --out"),
        _ => None,
    };

    let mut successes = 0usize;
    for (i, entry) in index.entries().enumerate() {
        let id = format!("{}-n{}", entry.question_id, cardinality);
        let item_seed = derive_seed(seed, "instance", i as u64);
        let mut meta = serde_json::Map::new();
        meta.insert("question_id".into(), serde_json::json!(entry.question_id));
        meta.insert("source".into(), serde_json::json!(entry.decomposition.source_dataset));
        match generate_from_typed(
            &id,
            &entry.question_text,
            &entry.program,
            cardinality,
            &cfg,
            &pool,
            &t.templates,
            item_seed,
            meta,
        ) {
            Ok(g) => {
                successes += 1;
                writeln!(instance_writer, "{}", serde_json::to_string(&g.instance)?)?;
                if let Some(w) = facts_writer.as_mut() {
                    let record = FactsRecord::from_store(
                        &g.instance.id,
                        &g.store,
                        render_program(&g.perturbed_program),
                    );
                    writeln!(w, "{}", serde_json::to_string(&record)?)?;
                }
            }
            Err(f) => {
                eprintln!("{}: failed after {} attempts: {:?}", id, f.attempts, f.reasons);
            }
        }
    }
    instance_writer.flush()?;
    if let Some(mut w) = facts_writer {
        w.flush()?;
    }
    eprintln!("generated {successes} of {} entries", index.len());
    Ok(if successes > 0 { 0 } else { 1 })
}

#[allow(clippy::too_many_arguments)]
fn cmd_gen_dataset(
    corpus: &Path,
    size: Option<usize>,
    seed: Option<u64>,
    no_balance: bool,
    out: &Path,
    dev_out: Option<&Path>,
    dev_fraction: Option<f64>,
    workers: Option<usize>,
    perturb_prob: Option<f64>,
    keep_facts: bool,
    config: Option<&Path>,
    emit_config: bool,
    tables: &TableArgs,
    columns: &ColumnArgs,
) -> Result<i32> {
    // Precedence: flags > config file > defaults.
    let mut cfg = PipelineConfig::default();
    if let Some(path) = config {
        let values = PipelineConfig::load_file(path)?;
        cfg.apply_file(&values)?;
    }
    if let Some(v) = size {
        cfg.size = v;
    }
    if let Some(v) = seed {
        cfg.seed = v;
    }
    if no_balance {
        cfg.balance = false;
    }
    if let Some(v) = dev_fraction {
        cfg.dev_fraction = v;
    }
    if let Some(v) = workers {
        cfg.workers = v;
    }
    if let Some(v) = perturb_prob {
        cfg.perturb_prob = v;
    }
    if emit_config {
        print!("{}", cfg.emit());
        return Ok(0);
    }
    if cfg.dev_fraction > 0.0 && dev_out.is_none() {
        bail!("--dev-out is required when dev_fraction > 0");
    }

    let t = tables.load()?;
    let opts = columns.options(tables.level.into(), cfg.step_min, cfg.step_max);
    let (index, report) = ingest_corpus(corpus, &opts, &t.rules)?;
    eprintln!(
        "corpus: {} admitted over {} patterns ({} rows)",
        index.len(),
        index.pattern_count(),
        report.rows
    );

    let dataset_cfg = DatasetConfig {
        gen: cfg.generation(),
        balanced: cfg.balance,
        perturb_prob: cfg.perturb_prob,
        workers: cfg.workers,
        dev_fraction: cfg.dev_fraction,
    };

    let mut train_writer = open_writer(out)?;
    let mut dev_writer = dev_out.map(open_writer).transpose()?;
    let mut train_facts = keep_facts
        .then(|| open_writer(&out.with_extension("facts.jsonl")))
        .transpose()?;
    let mut dev_facts = match (keep_facts, dev_out) {
        (true, Some(path)) => Some(open_writer(&path.with_extension("facts.jsonl"))?),
        _ => None,
    };

    let stats = generate_dataset(&index, cfg.size, &dataset_cfg, &t.templates, |split, g| {
        let line = serde_json::to_string(&g.instance).map_err(|e| e.to_string())?;
        let record = keep_facts.then(|| {
            FactsRecord::from_store(&g.instance.id, &g.store, render_program(&g.perturbed_program))
        });
        let (writer, facts_writer) = match split {
            Split::Train => (&mut train_writer, train_facts.as_mut()),
            Split::Dev => match dev_writer.as_mut() {
                Some(w) => (w, dev_facts.as_mut()),
                None => return Ok(()),
            },
        };
        writeln!(writer, "{line}").map_err(|e| e.to_string())?;
        if let (Some(w), Some(r)) = (facts_writer, record) {
            let line = serde_json::to_string(&r).map_err(|e| e.to_string())?;
            writeln!(w, "{line}").map_err(|e| e.to_string())?;
        }
        Ok(())
    })?;

    train_writer.flush()?;
    if let Some(w) = dev_writer.as_mut() {
        w.flush()?;
    }
    if let Some(w) = train_facts.as_mut() {
        w.flush()?;
    }
    if let Some(w) = dev_facts.as_mut() {
        w.flush()?;
    }

    let stats_path = out.with_extension("stats.json");
    std::fs::write(&stats_path, serde_json::to_string_pretty(&stats)?)?;
    eprintln!(
        "emitted {} train / {} dev instances over {} patterns (acceptance rate {:.1}%); stats in {}",
        stats.emitted_train,
        stats.emitted_dev,
        stats.pattern_histogram.len(),
        stats.acceptance_rate * 100.0,
        stats_path.display()
    );
    Ok(0)
}

fn cmd_gen_primitives(
    train: usize,
    dev: usize,
    seed: u64,
    out: &Path,
    only: &[String],
    tables: &TableArgs,
) -> Result<i32> {
    let t = tables.load()?;
    std::fs::create_dir_all(out)?;
    let selected: Vec<PrimitiveId> = if only.is_empty() {
        registered_primitives().collect()
    } else {
        only.iter()
            .map(|name| {
                PrimitiveId::from_name(name).ok_or_else(|| anyhow!("unknown primitive {name:?}"))
            })
            .collect::<Result<_>>()?
    };
    for primitive in selected {
        for (split, count) in [("train", train), ("dev", dev)] {
            let path = out.join(format!("{}.{split}.jsonl", primitive.name()));
            let mut writer = open_writer(&path)?;
            for i in 0..count {
                let inst = teacher_instance(primitive, split, i as u64, seed, &t.templates)
                    .map_err(|e| anyhow!("{e}"))?;
                writeln!(writer, "{}", serde_json::to_string(&inst)?)?;
            }
            writer.flush()?;
        }
        eprintln!("{}: {train} train / {dev} dev", primitive.name());
    }
    Ok(0)
}

fn cmd_verify(input: &Path, facts: &Path) -> Result<i32> {
    let records = read_facts_records(facts)?;
    let by_id: BTreeMap<&str, &FactsRecord> =
        records.iter().map(|r| (r.id.as_str(), r)).collect();

    let file = std::fs::File::open(input)
        .with_context(|| format!("cannot open {}", input.display()))?;
    let mut total = 0usize;
    let mut p1_pass = 0usize;
    let mut p2_pass = 0usize;
    let mut p3_pass = 0usize;
    let mut answers_pass = 0usize;
    let mut errors = 0usize;
    let mut first_failures: Vec<String> = vec![];

    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let instance: QAInstance = serde_json::from_str(&line).context("malformed instance")?;
        total += 1;
        let Some(record) = by_id.get(instance.id.as_str()) else {
            errors += 1;
            if first_failures.len() < 5 {
                first_failures.push(format!("{}: no facts record", instance.id));
            }
            continue;
        };
        match verify_instance(&instance, record) {
            Ok(outcome) => {
                p1_pass += outcome.p1 as usize;
                p2_pass += outcome.p2 as usize;
                p3_pass += outcome.p3 as usize;
                answers_pass += outcome.answers_match as usize;
                if !outcome.passed() && first_failures.len() < 5 {
                    first_failures.push(format!("{}: {:?}", instance.id, outcome.detail));
                }
            }
            Err(e) => {
                errors += 1;
                if first_failures.len() < 5 {
                    first_failures.push(format!("{}: {e}", instance.id));
                }
            }
        }
    }

    println!("P1: {p1_pass}/{total} pass");
    println!("P2: {p2_pass}/{total} pass");
    println!("P3: {p3_pass}/{total} pass");
    println!("answers: {answers_pass}/{total} match");
    if errors > 0 {
        println!("errors: {errors}");
    }
    for f in &first_failures {
        eprintln!("  {f}");
    }
    let all_pass = errors == 0
        && p1_pass == total
        && p2_pass == total
        && p3_pass == total
        && answers_pass == total;
    Ok(if all_pass { 0 } else { 1 })
}

fn cmd_stats(
    input: &Path,
    format: &str,
    json: bool,
    tables: &TableArgs,
    columns: &ColumnArgs,
) -> Result<i32> {
    let kind = match format {
        "auto" => {
            if input.extension().is_some_and(|e| e == "jsonl") {
                "dataset"
            } else {
                "corpus"
            }
        }
        other => other,
    };
    let report = match kind {
        "dataset" => dataset_stats(input)?,
        "corpus" => {
            let t = tables.load()?;
            let opts = columns.options(tables.level.into(), 2, 6);
            corpus_stats(input, &opts, &t.rules)?
        }
        other => bail!("unknown format {other:?}"),
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", render_human(&report));
    }
    Ok(0)
}

fn run() -> Result<i32> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Parse { input, limit, tables, columns } => cmd_parse(input, *limit, tables, columns),
        Command::Typecheck { input, id, program, question, tables, columns } => cmd_typecheck(
            input.as_deref(),
            id.as_deref(),
            program.as_deref(),
            question,
            tables,
            columns,
        ),
        Command::Execute { program, facts, id, chain, question } => {
            cmd_execute(program.as_deref(), facts, id.as_deref(), chain, question)
        }
        Command::GenInstance { question_file, cardinality, seed, out, keep_facts, tables, columns } => {
            cmd_gen_instance(question_file, *cardinality, *seed, out.as_deref(), *keep_facts, tables, columns)
        }
        Command::GenDataset {
            corpus,
            size,
            seed,
            no_balance,
            out,
            dev_out,
            dev_fraction,
            workers,
            perturb_prob,
            keep_facts,
            config,
            emit_config,
            tables,
            columns,
        } => cmd_gen_dataset(
            corpus,
            *size,
            *seed,
            *no_balance,
            out,
            dev_out.as_deref(),
            *dev_fraction,
            *workers,
            *perturb_prob,
            *keep_facts,
            config.as_deref(),
            *emit_config,
            tables,
            columns,
        ),
        Command::GenPrimitives { train, dev, seed, out, primitive, tables } => {
            cmd_gen_primitives(*train, *dev, *seed, out, primitive, tables)
        }
        Command::Verify { input, facts } => cmd_verify(input, facts),
        Command::Stats { input, format, json, tables, columns } => {
            cmd_stats(input, format, *json, tables, columns)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

// The rng helper keeps the import used even in builds that disable
// subcommands; generation itself derives per-item seeds.
#[allow(dead_code)]
fn _anchor() {
    let _ = rng_for(0, "anchor", 0);
}
