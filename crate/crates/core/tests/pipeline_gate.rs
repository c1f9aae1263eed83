//! End-to-end generation over varied program shapes: every emitted instance
//! must pass the independent P1/P2/P3 checks, re-execute to its stored
//! answers, respect value ranges, and render a context the template inverse
//! can fully recover.

use synthqa_core::checker::verify_instance;
use synthqa_core::dataset::{CorpusEntry, DatasetConfig, PatternIndex};
use synthqa_core::gen::GenerationConfig;
use synthqa_core::instance::FactsRecord;
use synthqa_core::parser::{parse_and_normalize, RuleTable};
use synthqa_core::testing::{invert_context, store_fact_tuples};
use synthqa_core::{
    generate_dataset, infer_types, render_program, Decomposition, Level, TemplateSet, Value,
};

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
    CorpusEntry { question_id: id.into(), question_text: question.into(), decomposition: d, program: tp }
}

fn varied_corpus() -> PatternIndex {
    let mut index = PatternIndex::new();
    index.insert(entry(
        "c1",
        "How many touchdowns did Edward throw in the 1st quarter?",
        &["return touchdowns by Edward", "return #1 from the 1st quarter", "return the number of #2"],
    ));
    index.insert(entry(
        "c2",
        "Which field goals by Shayne were from the 2nd half?",
        &["return field goals by Shayne", "return #1 from the 2nd half"],
    ));
    index.insert(entry(
        "c3",
        "What is the total of the yard lines of the field goals by Connor?",
        &["return field goals by Connor", "return yard lines of #1", "return the sum of #2"],
    ));
    index.insert(entry(
        "c4",
        "What is the largest yard line of the punts by Aldrick?",
        &["return punts by Aldrick", "return yard lines of #1", "return the highest of #2"],
    ));
    index.insert(entry(
        "c5",
        "Were the players who scored for Madrid american?",
        &["return players who scored for Madrid", "return if #1 are american"],
    ));
    index.insert(entry(
        "c6",
        "How many distinct yard lines did the kicks by Mason cover?",
        &["return kicks by Mason", "return yard lines of #1", "return the number of distinct #2"],
    ));
    index.insert(entry(
        "c7",
        "Which touchdowns were scored by Julio or caught by Andre?",
        &["return touchdowns thrown by Julio", "return touchdowns caught by Andre", "return #1 or #2"],
    ));
    index.insert(entry(
        "c8",
        "What are the yard lines of the field goals by Greg sorted in an ascending order?",
        &["return field goals by Greg", "return yard lines of #1", "return #2 sorted in an ascending order"],
    ));
    index.insert(entry(
        "c9",
        "Which runs by Lamar were from the 4th quarter?",
        &[
            "return runs by Lamar",
            "return #1 from the 4th quarter",
            "return #2 from the left side",
        ],
    ));
    index.insert(entry(
        "c10",
        "What is the average of the yard lines of passes by Marcus?",
        &["return passes by Marcus", "return yard lines of #1", "return the average of #2"],
    ));
    index
}

#[test]
fn generated_instances_survive_independent_verification() {
    let index = varied_corpus();
    let cfg = DatasetConfig {
        gen: GenerationConfig { seed: 2024, ..GenerationConfig::default() },
        balanced: true,
        perturb_prob: 0.5,
        workers: 1,
        dev_fraction: 0.0,
    };
    let templates = TemplateSet::default_set();
    let mut total = 0usize;
    let stats = generate_dataset(&index, 150, &cfg, templates, |_, g| {
        total += 1;

        // The serialized instance verifies against its facts sidecar on the
        // reference interpreter path.
        let record = FactsRecord::from_store(
            &g.instance.id,
            &g.store,
            render_program(&g.perturbed_program),
        );
        let outcome = verify_instance(&g.instance, &record).expect("verification runs");
        assert!(outcome.passed(), "{}: {:?}", g.instance.id, outcome.detail);

        // Generation constraints hold on every emitted instance.
        assert!(g.instance.num_facts <= 25);
        assert!((2..=6).contains(&g.program.len()));
        assert!((1..=4).contains(&g.instance.cardinality));
        assert_ne!(g.state.final_gold(), g.state.final_distractor());

        // All generated values stay within the corpus ranges.
        for fact in g.store.facts() {
            for v in std::iter::once(&fact.subject).chain(fact.object.iter()) {
                match v {
                    Value::Number(n) => {
                        assert!(n.in_generation_range(), "{} out of range", n)
                    }
                    Value::Date(d) => assert!((1100..=2022).contains(&d.year())),
                    Value::Entity(e) => {
                        assert_eq!(e.as_str().len(), 3);
                        assert!(e.as_str().bytes().all(|b| b.is_ascii_uppercase()));
                    }
                    Value::Bool(_) => {}
                    other => panic!("non-scalar fact value {other:?}"),
                }
            }
        }

        // Template inverse: the context text yields back the exact facts.
        let programs = [&g.program, &g.perturbed_program];
        let recovered = invert_context(&g.instance.context, &programs, templates)
            .unwrap_or_else(|| panic!("{}: context not invertible", g.instance.id));
        let mut expected = store_fact_tuples(&g.store);
        let mut got = recovered;
        expected.sort();
        got.sort();
        assert_eq!(got, expected, "{}: fact multiset mismatch", g.instance.id);
        Ok(())
    })
    .expect("dataset generation succeeds");

    assert_eq!(total, stats.emitted_train);
    assert_eq!(stats.emitted_train, 150);
    // Emission rate is reported, never hidden.
    assert!(stats.acceptance_rate > 0.0 && stats.acceptance_rate <= 1.0);
}

#[test]
fn boolean_rooted_distractor_flips_the_answer() {
    let index = {
        let mut i = PatternIndex::new();
        i.insert(entry(
            "b1",
            "Were the players who scored for Madrid american?",
            &["return players who scored for Madrid", "return if #1 are american"],
        ));
        i
    };
    let cfg = DatasetConfig {
        gen: GenerationConfig { seed: 31, ..GenerationConfig::default() },
        balanced: true,
        perturb_prob: 0.5,
        workers: 1,
        dev_fraction: 0.0,
    };
    generate_dataset(&index, 10, &cfg, TemplateSet::default_set(), |_, g| {
        let gold = g.state.final_gold().unwrap();
        let dis = g.state.final_distractor().unwrap();
        assert!(matches!(gold, Value::Bool(_)));
        assert_ne!(gold, dis);
        Ok(())
    })
    .unwrap();
}
