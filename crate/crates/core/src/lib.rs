//! Compiles question decompositions (QDMRs) into typed executable programs
//! and synthesizes hard-to-cheat reading-comprehension instances: synthetic
//! contexts, gold answers, and contrastive distractor reasoning chains, with
//! pattern-balanced dataset sampling and per-primitive teaching instances.

pub mod checker;
pub mod dataset;
pub mod decomp;
pub mod facts;
pub mod gen;
pub mod infer;
pub mod instance;
pub mod interp;
pub mod parser;
pub mod predicate;
pub mod program;
pub mod reference;
pub mod registry;
pub mod rng;
pub mod teacher;
pub mod templates;
pub mod testing;
pub mod value;

pub use dataset::{generate_dataset, CorpusEntry, DatasetConfig, DatasetStats, PatternIndex, Split};
pub use decomp::{Decomposition, Level, StepText};
pub use facts::{Chain, ChainState, Fact, FactRole, FactStore};
pub use gen::{
    generate_from_typed, generate_instance, GenFailure, GeneratedInstance, GenerationConfig,
    PredicatePool,
};
pub use infer::{infer_types, keyword_type_hint, type_dump, TypeError};
pub use instance::{FactsRecord, QAInstance};
pub use interp::{eval_primitive, execute, trace_dump, ExecError, ExecutionTrace};
pub use parser::{normalize, parse_and_normalize, parse_decomposition, ParseError, RuleTable};
pub use predicate::{Mention, MentionKind, Predicate};
pub use program::{
    parse_program, pattern_signature, render_program, Arg, Literal, PrimitiveCall, Program,
    TypedProgram,
};
pub use registry::{registered_primitives, Cmp, PrimitiveId, REGISTRY};
pub use templates::TemplateSet;
pub use value::{BaseType, Date, EntityName, Num, Structure, Value, ValueType};
