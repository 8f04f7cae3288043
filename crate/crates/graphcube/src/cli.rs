//! The `graphcube` command line: load a graph, explore its aggregates,
//! and write a report directory.
//!
//! Four subcommands share one knob set ([`RunConfig`], defaults overridden
//! first by a flat `key = value` config file, then by flags):
//!
//! * `analyze`: offline attribute statistics and per-fact pre-aggregation
//!   tables, no exploration.
//! * `explore`: the full pipeline, ending in `report.json` plus row CSVs,
//!   plot data, and a timing breakdown.
//! * `bench`: generated instances at several sizes, the one-pass engine
//!   timed against a per-node brute-force baseline, plus the error
//!   distribution a derivation-based evaluator would have produced.
//! * `oracle-check`: every owned spec of a run compared row by row
//!   against the brute-force evaluator; exits nonzero on any mismatch.
//!
//! Every run is deterministic under a fixed seed and thread count
//! independent: lattice `i` always consumes RNG stream `i`.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::attrs::{
    build_preagg, enumerate_attributes, AttrKind, Attribute, AttributeStats, EnumerationConfig,
    PreAggTable,
};
use crate::cube::{
    build_encodings, build_mmst, dim_value_table, evaluate, translate, DimRows,
    DimensionEncoding, EvalOptions, Mmst, OnePassAudit, ResultRow, Translation,
};
use crate::error::GraphCubeError;
use crate::graph::{
    load_csv, load_ntriples, select_cfs, CandidateFactSet, CfsSelector, FactId, TripleStore,
};
use crate::oracle::{
    dim_tables, exact_node_rows, generate_synthetic, scorable_key, simulate_derivation,
    DeriveMode, ErrorReport, SyntheticConfig,
};
use crate::plan::{build_plan, single_lattice, AggFn, LatticeSpec, Plan, PlanConfig};
use crate::sample::{prune_specs, EarlyStopConfig, PruneOutcome};
use crate::score::{
    render, write_errors_csv, write_timing_csv, RenderInputs, ResultManager, Scored,
};
use crate::stats::Interestingness;
use crate::Result;

/// Every knob of a run, with the documented defaults.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Number of aggregates to report.
    pub k: usize,
    /// Interestingness measure ranking the aggregates.
    pub h: Interestingness,
    /// Maximum dimensions per lattice.
    pub n_max: usize,
    /// Minimum support fraction for dimensions, measures, and root sets.
    pub min_support: f64,
    /// Distinct-value ceiling for dimensions, absolute part.
    pub distinct_cap: usize,
    /// Distinct-value ceiling for dimensions, fraction-of-CFS part.
    pub distinct_ratio: f64,
    /// Partition extent per dimension before any budget halving.
    pub part_extent: u64,
    /// Optional buffer-cell budget the memory plan must fit.
    pub budget: Option<u64>,
    /// Prune hopeless specs by sampling before the full evaluation.
    pub earlystop: bool,
    /// Reservoir capacity per root cell.
    pub sample: usize,
    /// Samples consumed per group per pruning batch.
    pub batch: usize,
    /// Number of cumulative pruning batches.
    pub batches: usize,
    /// Two-sided miss probability of each confidence interval.
    pub alpha: f64,
    /// Consecutive prune-free batches before stopping early.
    pub max_idle: usize,
    /// RNG seed for sampling and generators.
    pub seed: u64,
    /// Synthesize derived attributes (counts, keywords, languages, paths).
    pub derivations: bool,
    /// Minimum support fraction for path attributes.
    pub path_min_support: f64,
    /// Minimum average value length for the keyword derivation.
    pub kw_min_avg_len: f64,
    /// Largest tolerated fraction of unparseable N-Triples lines.
    pub error_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: 10,
            h: Interestingness::Variance,
            n_max: 4,
            min_support: 0.5,
            distinct_cap: 100,
            distinct_ratio: 0.2,
            part_extent: 16,
            budget: None,
            earlystop: true,
            sample: 60,
            batch: 30,
            batches: 2,
            alpha: 0.05,
            max_idle: 1,
            seed: 42,
            derivations: true,
            path_min_support: 0.1,
            kw_min_avg_len: 20.0,
            error_fraction: 0.01,
        }
    }
}

fn parse_into<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| format!("bad {key} '{value}': {e}"))
}

impl RunConfig {
    /// Applies one config-file entry; keys match the field names.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "k" => self.k = parse_into(key, value)?,
            "h" => self.h = parse_into(key, value)?,
            "n_max" => self.n_max = parse_into(key, value)?,
            "min_support" => self.min_support = parse_into(key, value)?,
            "distinct_cap" => self.distinct_cap = parse_into(key, value)?,
            "distinct_ratio" => self.distinct_ratio = parse_into(key, value)?,
            "part_extent" => self.part_extent = parse_into(key, value)?,
            "budget" => {
                self.budget =
                    if value == "none" { None } else { Some(parse_into(key, value)?) }
            }
            "earlystop" => self.earlystop = parse_into(key, value)?,
            "sample" => self.sample = parse_into(key, value)?,
            "batch" => self.batch = parse_into(key, value)?,
            "batches" => self.batches = parse_into(key, value)?,
            "alpha" => self.alpha = parse_into(key, value)?,
            "max_idle" => self.max_idle = parse_into(key, value)?,
            "seed" => self.seed = parse_into(key, value)?,
            "derivations" => self.derivations = parse_into(key, value)?,
            "path_min_support" => self.path_min_support = parse_into(key, value)?,
            "kw_min_avg_len" => self.kw_min_avg_len = parse_into(key, value)?,
            "error_fraction" => self.error_fraction = parse_into(key, value)?,
            other => return Err(format!("unknown config key '{other}'")),
        }
        Ok(())
    }

    /// Rejects values no pipeline stage could honor.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(GraphCubeError::Config(msg.to_string()));
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if self.n_max == 0 {
            return bad("n_max must be at least 1");
        }
        if self.part_extent == 0 {
            return bad("part_extent must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.min_support) {
            return bad("min_support must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.path_min_support) {
            return bad("path_min_support must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.error_fraction) {
            return bad("error_fraction must lie in [0, 1]");
        }
        if self.distinct_ratio < 0.0 {
            return bad("distinct_ratio must be nonnegative");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie strictly between 0 and 1");
        }
        if self.sample == 0 || self.batch == 0 || self.batches == 0 {
            return bad("sample, batch, and batches must be at least 1");
        }
        Ok(())
    }

    /// Defaults, then the config file, then the flag overrides.
    pub fn resolve(config: Option<&Path>, knobs: &KnobArgs) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path)?;
            for (idx, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let at = |msg: String| {
                    GraphCubeError::Config(format!("{}:{}: {msg}", path.display(), idx + 1))
                };
                let (key, value) = line
                    .split_once('=')
                    .ok_or_else(|| at("expected key = value".to_string()))?;
                cfg.apply_kv(key.trim(), value.trim()).map_err(at)?;
            }
        }
        knobs.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn enumeration(&self) -> EnumerationConfig {
        EnumerationConfig {
            derivations: self.derivations,
            kw_min_avg_len: self.kw_min_avg_len,
            path_min_support: self.path_min_support,
        }
    }

    pub fn planning(&self) -> PlanConfig {
        PlanConfig {
            min_support: self.min_support,
            n_max: self.n_max,
            distinct_cap: self.distinct_cap,
            distinct_ratio: self.distinct_ratio,
        }
    }

    pub fn earlystop_cfg(&self) -> EarlyStopConfig {
        EarlyStopConfig {
            sample: self.sample,
            batch: self.batch,
            batches: self.batches,
            alpha: self.alpha,
            max_idle: self.max_idle,
        }
    }
}

/// Discovers the k most statistically interesting aggregates of a graph.
#[derive(Parser, Debug)]
#[command(name = "graphcube", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Attribute statistics and pre-aggregation tables, no exploration.
    Analyze(AnalyzeArgs),
    /// Full exploration ending in a report directory.
    Explore(ExploreArgs),
    /// Engine-vs-naive timing and derivation-error study on generated data.
    Bench(BenchArgs),
    /// Compare every spec of a run against a brute-force evaluator.
    OracleCheck(OracleCheckArgs),
}

/// Flag overrides for [`RunConfig`]; unset flags keep the file or default.
#[derive(Args, Debug, Clone, Default)]
pub struct KnobArgs {
    /// Number of aggregates to report.
    #[arg(long)]
    pub k: Option<usize>,
    /// Interestingness measure: variance, skewness, or kurtosis.
    #[arg(long)]
    pub h: Option<Interestingness>,
    /// Maximum dimensions per lattice.
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Minimum support fraction for dimensions and measures.
    #[arg(long)]
    pub min_support: Option<f64>,
    /// Distinct-value ceiling for dimensions, absolute part.
    #[arg(long)]
    pub distinct_cap: Option<usize>,
    /// Distinct-value ceiling for dimensions, fraction-of-CFS part.
    #[arg(long)]
    pub distinct_ratio: Option<f64>,
    /// Partition extent per dimension.
    #[arg(long)]
    pub part_extent: Option<u64>,
    /// Buffer-cell budget the memory plan must fit.
    #[arg(long)]
    pub budget: Option<u64>,
    /// Disable sampling-based pruning.
    #[arg(long)]
    pub no_earlystop: bool,
    /// Reservoir capacity per root cell.
    #[arg(long)]
    pub sample: Option<usize>,
    /// Samples consumed per group per pruning batch.
    #[arg(long)]
    pub batch: Option<usize>,
    /// Number of cumulative pruning batches.
    #[arg(long)]
    pub batches: Option<usize>,
    /// Two-sided miss probability of each confidence interval.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Consecutive prune-free batches before stopping early.
    #[arg(long)]
    pub max_idle: Option<usize>,
    /// RNG seed for sampling and generators.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Disable derived attributes (counts, keywords, languages, paths).
    #[arg(long)]
    pub no_derivations: bool,
    /// Minimum support fraction for path attributes.
    #[arg(long)]
    pub path_min_support: Option<f64>,
    /// Minimum average value length for the keyword derivation.
    #[arg(long)]
    pub kw_min_avg_len: Option<f64>,
    /// Largest tolerated fraction of unparseable N-Triples lines.
    #[arg(long)]
    pub error_fraction: Option<f64>,
}

impl KnobArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field.clone() { cfg.$field = v; })*
            };
        }
        set!(
            k, h, n_max, min_support, distinct_cap, distinct_ratio, part_extent, sample,
            batch, batches, alpha, max_idle, seed, path_min_support, kw_min_avg_len,
            error_fraction
        );
        if let Some(b) = self.budget {
            cfg.budget = Some(b);
        }
        if self.no_earlystop {
            cfg.earlystop = false;
        }
        if self.no_derivations {
            cfg.derivations = false;
        }
    }
}

/// Output, config, and threading flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Output directory, created if missing.
    #[arg(long, short = 'o', default_value = "graphcube-out")]
    pub out: PathBuf,
    /// Flat `key = value` run configuration; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub knobs: KnobArgs,
}

/// Input selection shared by `analyze` and `explore`.
#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Graph to load: a `.csv` fact table, N-Triples otherwise.
    pub input: PathBuf,
    /// Candidate facts: all subjects of this rdf:type.
    #[arg(long = "type", value_name = "CLASS")]
    pub class: Option<String>,
    /// Candidate facts: all subjects carrying every listed property.
    #[arg(long, value_delimiter = ',', value_name = "IRI,...")]
    pub properties: Vec<String>,
    /// Extra N-Triples whose rdfs:subClassOf edges widen the classes.
    #[arg(long)]
    pub ontology: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug)]
pub struct ExploreArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub common: CommonArgs,
    /// Also write `plan.json` describing lattices and memory plans.
    #[arg(long)]
    pub explain: bool,
    /// Also write `trace.csv` with every pruning interval.
    #[arg(long)]
    pub trace_earlystop: bool,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Fact counts to run, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [10_000, 50_000, 100_000])]
    pub facts: Vec<usize>,
    /// Dimensions of the generated lattice.
    #[arg(long, default_value_t = 3)]
    pub dims: usize,
    /// Distinct values per generated dimension.
    #[arg(long, default_value_t = 8)]
    pub extent: u64,
    /// Measures attached to every generated fact.
    #[arg(long, default_value_t = 15)]
    pub measures: usize,
    /// Target fraction of occupied cells.
    #[arg(long, default_value_t = 0.5)]
    pub density: f64,
    /// Chance of a second value on one dimension per fact.
    #[arg(long, default_value_t = 0.1)]
    pub multi_prob: f64,
}

#[derive(Args, Debug)]
pub struct OracleCheckArgs {
    /// Graph to check; omitted means one generated instance.
    pub input: Option<PathBuf>,
    /// Candidate facts: all subjects of this rdf:type.
    #[arg(long = "type", value_name = "CLASS")]
    pub class: Option<String>,
    /// Candidate facts: all subjects carrying every listed property.
    #[arg(long, value_delimiter = ',', value_name = "IRI,...")]
    pub properties: Vec<String>,
    /// Extra N-Triples whose rdfs:subClassOf edges widen the classes.
    #[arg(long)]
    pub ontology: Option<PathBuf>,
    /// Dimensions of the generated instance.
    #[arg(long, default_value_t = 3)]
    pub dims: usize,
    /// Distinct values per generated dimension.
    #[arg(long, default_value_t = 6)]
    pub extent: u64,
    /// Measures attached to every generated fact.
    #[arg(long, default_value_t = 2)]
    pub measures: usize,
    /// Facts of the generated instance.
    #[arg(long, default_value_t = 2000)]
    pub facts: usize,
    /// Target fraction of occupied cells.
    #[arg(long, default_value_t = 0.4)]
    pub density: f64,
    /// Chance of a second value on one dimension per fact.
    #[arg(long, default_value_t = 0.3)]
    pub multi_prob: f64,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Runs one parsed command; `Ok` means the report was written.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::Explore(args) => cmd_explore(args),
        Command::Bench(args) => cmd_bench(args),
        Command::OracleCheck(args) => cmd_oracle_check(args),
    }
}

fn init_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        // A second init (tests, repeated library calls) keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Loads a graph by extension: `.csv` fact tables, N-Triples otherwise.
pub fn load_store(path: &Path, error_fraction: f64) -> Result<TripleStore> {
    let csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if csv {
        load_csv(path)
    } else {
        Ok(load_ntriples(path, error_fraction)?.0)
    }
}

/// Loads the input plus the optional subclass ontology.
fn load_input(input: &InputArgs, cfg: &RunConfig) -> Result<TripleStore> {
    let mut store = load_store(&input.input, cfg.error_fraction)?;
    if let Some(ont) = &input.ontology {
        let (ontology, _) = load_ntriples(ont, cfg.error_fraction)?;
        store.apply_subclass_closure(&ontology);
    }
    Ok(store)
}

/// The fact-set selector: explicit flags, else the most populous class.
pub fn pick_selector(
    store: &TripleStore,
    class: Option<&str>,
    properties: &[String],
) -> Result<CfsSelector> {
    if let Some(c) = class {
        if !properties.is_empty() {
            return Err(GraphCubeError::Config(
                "--type and --properties are mutually exclusive".into(),
            ));
        }
        return Ok(CfsSelector::Type(c.to_string()));
    }
    if !properties.is_empty() {
        return Ok(CfsSelector::Properties(properties.to_vec()));
    }
    // Ties go to the lexicographically first class name.
    store
        .classes()
        .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(a.0)))
        .map(|(c, _)| CfsSelector::Type(c.to_string()))
        .ok_or_else(|| {
            GraphCubeError::Config(
                "graph has no rdf:type edges; pass --type or --properties".into(),
            )
        })
}

/// One lattice made ready for evaluation.
pub struct PreparedLattice {
    pub translation: Translation,
    pub mmst: Mmst,
}

/// Builds value tables, encodings, memory plans, and translations for
/// every lattice. Lattice `i` uses RNG stream `i`, so the result does not
/// depend on the thread count.
pub fn prepare_lattices(
    store: &TripleStore,
    members: &[FactId],
    lattices: &[LatticeSpec],
    cfg: &RunConfig,
) -> Result<Vec<PreparedLattice>> {
    let universe = store.subject_count() as u32;
    lattices
        .par_iter()
        .enumerate()
        .map(|(idx, lattice)| {
            let dim_rows: Vec<DimRows> =
                lattice.dims.iter().map(|d| dim_value_table(store, members, d)).collect();
            let encodings = build_encodings(&dim_rows);
            let extents: Vec<u64> = encodings.iter().map(DimensionEncoding::extent).collect();
            let mmst = build_mmst(&extents, cfg.part_extent, cfg.budget)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(idx as u64);
            let translation =
                translate(members, &dim_rows, encodings, mmst.c, universe, cfg.sample, &mut rng);
            Ok(PreparedLattice { translation, mmst })
        })
        .collect()
}

/// Builds the pre-aggregation table of every distinct measure.
pub fn build_preaggs<'a>(
    store: &TripleStore,
    cfs: &CandidateFactSet,
    measures: impl IntoIterator<Item = &'a Attribute>,
) -> HashMap<String, PreAggTable> {
    let mut out = HashMap::new();
    for m in measures {
        out.entry(m.name.clone()).or_insert_with(|| build_preagg(store, cfs, m));
    }
    out
}

/// Evaluates every lattice, verifies each scan's one-pass audit, and
/// merges the rows in lattice order.
pub fn evaluate_lattices(
    lattices: &[LatticeSpec],
    prepared: &[PreparedLattice],
    preaggs: &HashMap<String, PreAggTable>,
    skip: &HashSet<usize>,
    opts: &EvalOptions,
) -> Result<(ResultManager, Vec<OnePassAudit>)> {
    let per: Vec<(Vec<ResultRow>, OnePassAudit)> = lattices
        .par_iter()
        .zip(prepared.par_iter())
        .map(|(lattice, prep)| {
            let mut rows = Vec::new();
            let audit =
                evaluate(lattice, &prep.translation, preaggs, skip, &mut |r| rows.push(r), opts);
            audit.verify(prep.translation.partition_count)?;
            Ok((rows, audit))
        })
        .collect::<Result<_>>()?;
    let mut manager = ResultManager::new();
    let mut audits = Vec::with_capacity(per.len());
    for (rows, audit) in per {
        for r in rows {
            manager.add(r);
        }
        audits.push(audit);
    }
    Ok((manager, audits))
}

/// Extra artifacts `explore` can emit.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExploreOptions {
    /// Write `plan.json` describing lattices and memory plans.
    pub explain: bool,
    /// Write `trace.csv` with every pruning interval.
    pub trace: bool,
    /// Check every emitted bitmap against its size bound (slow).
    pub check_bitmaps: bool,
    /// Wall time of the load phase, reported in `timing.csv`.
    pub load_seconds: Option<f64>,
}

/// Everything `explore` produces besides the files on disk.
pub struct ExploreOutcome {
    pub report_path: PathBuf,
    pub cfs_key: String,
    pub facts: usize,
    pub winners: Vec<Scored>,
    /// Canonical spec key of each winner, aligned with `winners`.
    pub winner_keys: Vec<String>,
    pub specs_total: usize,
    pub specs_pruned: usize,
    pub prune: Option<PruneOutcome>,
    pub audits: Vec<OnePassAudit>,
}

#[derive(Serialize)]
struct LatticeDump {
    dims: Vec<String>,
    extents: Vec<u64>,
    measures: Vec<String>,
    partition_extent: u64,
    partitions: u64,
    buffer_cells: u64,
    included_facts: usize,
    excluded_facts: usize,
}

#[derive(Serialize)]
struct SpecDump {
    id: usize,
    key: String,
}

#[derive(Serialize)]
struct PlanDump {
    cfs: String,
    facts: usize,
    lattices: Vec<LatticeDump>,
    specs: Vec<SpecDump>,
}

fn write_plan_json(out_dir: &Path, plan: &Plan, prepared: &[PreparedLattice], facts: usize) -> Result<()> {
    let lattices = plan
        .lattices
        .iter()
        .zip(prepared)
        .map(|(lat, prep)| LatticeDump {
            dims: lat.dims.iter().map(|d| d.name.clone()).collect(),
            extents: prep.translation.extents.clone(),
            measures: lat.measures.iter().map(|m| m.name.clone()).collect(),
            partition_extent: prep.translation.c,
            partitions: prep.translation.partition_count,
            buffer_cells: prep.mmst.total_cells,
            included_facts: prep.translation.included,
            excluded_facts: prep.translation.excluded,
        })
        .collect();
    let dump = PlanDump {
        cfs: plan.cfs_key.clone(),
        facts,
        lattices,
        specs: plan.specs.iter().map(|s| SpecDump { id: s.id, key: s.key() }).collect(),
    };
    let text = serde_json::to_string_pretty(&dump)?;
    std::fs::write(out_dir.join("plan.json"), text + "\n")?;
    Ok(())
}

fn write_trace_csv(out_dir: &Path, prune: Option<&PruneOutcome>) -> Result<()> {
    let mut text = String::from("batch,spec_id,lo,hi,bar,pruned\n");
    if let Some(p) = prune {
        for r in &p.trace {
            text.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.batch, r.spec_id, r.lo, r.hi, r.bar, r.pruned
            ));
        }
    }
    std::fs::write(out_dir.join("trace.csv"), text)?;
    Ok(())
}

/// The full exploration pipeline: enumerate, plan, translate, prune,
/// evaluate, score, render. Returns after `report.json` is on disk.
pub fn run_explore(
    store: &TripleStore,
    selector: &CfsSelector,
    cfg: &RunConfig,
    out_dir: &Path,
    opts: &ExploreOptions,
) -> Result<ExploreOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let mut timings: Vec<(String, f64)> = Vec::new();
    if let Some(secs) = opts.load_seconds {
        timings.push(("load".into(), secs));
    }

    let clock = Instant::now();
    let cfs = select_cfs(store, selector)?;
    let attrs = enumerate_attributes(store, &cfs, &cfg.enumeration());
    timings.push(("enumerate".into(), clock.elapsed().as_secs_f64()));

    let clock = Instant::now();
    let plan = build_plan(store, &cfs, &attrs, &cfg.planning());
    timings.push(("plan".into(), clock.elapsed().as_secs_f64()));

    let clock = Instant::now();
    let prepared = prepare_lattices(store, &cfs.members, &plan.lattices, cfg)?;
    let preaggs =
        build_preaggs(store, &cfs, plan.lattices.iter().flat_map(|l| l.measures.iter()));
    timings.push(("translate".into(), clock.elapsed().as_secs_f64()));

    if opts.explain {
        write_plan_json(out_dir, &plan, &prepared, cfs.len())?;
    }

    let clock = Instant::now();
    let mut prune: Option<PruneOutcome> = None;
    let mut skip: HashSet<usize> = HashSet::new();
    if cfg.earlystop && plan.specs.len() > cfg.k {
        let pairs: Vec<(&LatticeSpec, &Translation)> =
            plan.lattices.iter().zip(prepared.iter().map(|p| &p.translation)).collect();
        // The pruning pass gets the stream after the per-lattice ones.
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(plan.lattices.len() as u64);
        let outcome = prune_specs(&pairs, &preaggs, cfg.h, cfg.k, &cfg.earlystop_cfg(), &mut rng);
        skip.clone_from(&outcome.skip);
        prune = Some(outcome);
    }
    timings.push(("prune".into(), clock.elapsed().as_secs_f64()));

    let clock = Instant::now();
    let (manager, audits) = evaluate_lattices(
        &plan.lattices,
        &prepared,
        &preaggs,
        &skip,
        &EvalOptions { check_bitmaps: opts.check_bitmaps },
    )?;
    timings.push(("evaluate".into(), clock.elapsed().as_secs_f64()));

    let clock = Instant::now();
    let winners = manager.top_k(cfg.h, cfg.k, &plan.specs);
    timings.push(("score".into(), clock.elapsed().as_secs_f64()));

    let reason = if winners.is_empty() {
        Some(if plan.specs.is_empty() {
            "no aggregate specs: no dimension set met the support and distinct-value thresholds"
        } else {
            "no scorable aggregate: every surviving spec had fewer than two fully non-null groups"
        })
    } else {
        None
    };
    let report_path = render(
        out_dir,
        &RenderInputs {
            k: cfg.k,
            h: cfg.h,
            specs: &plan.specs,
            winners: &winners,
            manager: &manager,
            specs_pruned: skip.len(),
            timings: &timings,
            error_buckets: None,
            reason,
        },
    )?;
    if opts.trace {
        write_trace_csv(out_dir, prune.as_ref())?;
    }
    let winner_keys = winners.iter().map(|w| plan.specs[w.spec_id].key()).collect();
    Ok(ExploreOutcome {
        report_path,
        cfs_key: plan.cfs_key.clone(),
        facts: cfs.len(),
        specs_total: plan.specs.len(),
        specs_pruned: skip.len(),
        winners,
        winner_keys,
        prune,
        audits,
    })
}

fn cmd_explore(args: ExploreArgs) -> Result<()> {
    let cfg = RunConfig::resolve(args.common.config.as_deref(), &args.common.knobs)?;
    init_threads(args.common.threads);
    let clock = Instant::now();
    let store = load_input(&args.input, &cfg)?;
    let load_seconds = clock.elapsed().as_secs_f64();
    let selector = pick_selector(&store, args.input.class.as_deref(), &args.input.properties)?;
    let outcome = run_explore(
        &store,
        &selector,
        &cfg,
        &args.common.out,
        &ExploreOptions {
            explain: args.explain,
            trace: args.trace_earlystop,
            check_bitmaps: false,
            load_seconds: Some(load_seconds),
        },
    )?;
    println!(
        "{}: {} facts, {} specs, {} pruned",
        outcome.cfs_key, outcome.facts, outcome.specs_total, outcome.specs_pruned
    );
    for (rank, (w, key)) in outcome.winners.iter().zip(&outcome.winner_keys).enumerate() {
        println!("  #{rank} score {:.6} {key}", w.score);
    }
    if outcome.winners.is_empty() {
        println!("  no scorable aggregates");
    }
    println!("wrote {}", outcome.report_path.display());
    Ok(())
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

fn kind_label(kind: &AttrKind) -> &'static str {
    match kind {
        AttrKind::Direct => "direct",
        AttrKind::Count => "count",
        AttrKind::Keywords => "keywords",
        AttrKind::Language => "language",
        AttrKind::Path => "path",
    }
}

#[derive(Serialize)]
struct AttrDump {
    name: String,
    kind: &'static str,
    value_kind: crate::attrs::AttrValueKind,
    sources: Vec<String>,
    support: usize,
    multi_count: usize,
    distinct: usize,
    min: Option<f64>,
    max: Option<f64>,
    skipped_rows: usize,
    preagg_file: String,
}

#[derive(Serialize)]
struct StatsDump {
    input: String,
    cfs: String,
    facts: usize,
    attributes: Vec<AttrDump>,
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let cfg = RunConfig::resolve(args.common.config.as_deref(), &args.common.knobs)?;
    init_threads(args.common.threads);
    let store = load_input(&args.input, &cfg)?;
    let selector = pick_selector(&store, args.input.class.as_deref(), &args.input.properties)?;
    let cfs = select_cfs(&store, &selector)?;
    let attrs = enumerate_attributes(&store, &cfs, &cfg.enumeration());

    let out = &args.common.out;
    std::fs::create_dir_all(out.join("preagg"))?;
    let mut dumps = Vec::with_capacity(attrs.len());
    for (i, (attr, stats)) in attrs.iter().enumerate() {
        let table = build_preagg(&store, &cfs, attr);
        // The index prefix keeps sanitized names collision-free.
        let file = format!("preagg/{i:03}_{}.csv", sanitize(&attr.name));
        let mut text = String::new();
        if table.numeric {
            text.push_str("fact,count,sum,min,max\n");
            for r in &table.rows {
                text.push_str(&format!("{},{},{},{},{}\n", r.fact, r.count, r.sum, r.min, r.max));
            }
        } else {
            text.push_str("fact,count\n");
            for r in &table.rows {
                text.push_str(&format!("{},{}\n", r.fact, r.count));
            }
        }
        std::fs::write(out.join(&file), text)?;
        dumps.push(AttrDump {
            name: attr.name.clone(),
            kind: kind_label(&attr.kind),
            value_kind: attr.value_kind,
            sources: attr.sources.clone(),
            support: stats.support,
            multi_count: stats.multi_count,
            distinct: stats.distinct,
            min: stats.min,
            max: stats.max,
            skipped_rows: table.skipped_rows,
            preagg_file: file,
        });
    }
    let dump = StatsDump {
        input: args.input.input.display().to_string(),
        cfs: cfs.key.clone(),
        facts: cfs.len(),
        attributes: dumps,
    };
    let path = out.join("stats.json");
    std::fs::write(&path, serde_json::to_string_pretty(&dump)? + "\n")?;
    println!("{}: {} facts, {} attributes", cfs.key, cfs.len(), attrs.len());
    println!("wrote {}", path.display());
    Ok(())
}

/// Pairs wanted attributes with the enumerated statistics by name.
fn stats_for(
    enumerated: &[(Attribute, AttributeStats)],
    wanted: &[Attribute],
) -> Vec<(Attribute, AttributeStats)> {
    wanted
        .iter()
        .map(|w| {
            enumerated
                .iter()
                .find(|(a, _)| a.name == w.name)
                .cloned()
                .unwrap_or_else(|| panic!("attribute '{}' missing from enumeration", w.name))
        })
        .collect()
}

#[derive(Serialize)]
struct BenchSize {
    facts: usize,
    occupied_cells: u64,
    engine_seconds: f64,
    naive_seconds: f64,
    speedup: f64,
    result_rows: u64,
}

#[derive(Serialize)]
struct BenchDump {
    dims: usize,
    extent: u64,
    measures: usize,
    density: f64,
    multi_prob: f64,
    sizes: Vec<BenchSize>,
    /// Least-squares slope of log engine time over log fact count.
    scaling_exponent: Option<f64>,
    error_buckets: Vec<(String, u64)>,
    exact_fraction: f64,
}

/// Least-squares slope of `ln t` over `ln n`.
fn fit_exponent(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let logs: Vec<(f64, f64)> =
        points.iter().map(|&(n, t)| (n.ln(), t.max(1e-9).ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let cfg = RunConfig::resolve(args.common.config.as_deref(), &args.common.knobs)?;
    init_threads(args.common.threads);
    if args.dims == 0 || args.dims > 16 {
        return Err(GraphCubeError::Config("--dims must lie in 1..=16".into()));
    }
    if args.measures == 0 {
        return Err(GraphCubeError::Config("--measures must be at least 1".into()));
    }
    let out = &args.common.out;
    std::fs::create_dir_all(out)?;

    let mut sizes: Vec<BenchSize> = Vec::new();
    let mut timings: Vec<(String, f64)> = Vec::new();
    let mut errors = ErrorReport::default();
    for (i, &n_facts) in args.facts.iter().enumerate() {
        let gen_cfg = SyntheticConfig {
            extents: vec![args.extent; args.dims],
            n_facts,
            n_measures: args.measures,
            density: args.density,
            multi_prob: args.multi_prob,
        };
        let generated = generate_synthetic(&gen_cfg, cfg.seed.wrapping_add(i as u64));
        let store = generated.store;
        let cfs = select_cfs(&store, &generated.selector)?;
        let enumerated = enumerate_attributes(
            &store,
            &cfs,
            &EnumerationConfig { derivations: false, ..EnumerationConfig::default() },
        );
        let dims = stats_for(&enumerated, &generated.dims);
        let measures: Vec<Attribute> =
            stats_for(&enumerated, &generated.measures).into_iter().map(|(a, _)| a).collect();
        let (lattice, _) = single_lattice(&cfs.key, dims, measures);

        // Engine: translate once, evaluate every node in one pass.
        let clock = Instant::now();
        let prepared = prepare_lattices(&store, &cfs.members, std::slice::from_ref(&lattice), &cfg)?;
        let preaggs = build_preaggs(&store, &cfs, lattice.measures.iter());
        let (manager, _) = evaluate_lattices(
            std::slice::from_ref(&lattice),
            &prepared,
            &preaggs,
            &HashSet::new(),
            &EvalOptions { check_bitmaps: false },
        )?;
        let engine_seconds = clock.elapsed().as_secs_f64();

        // Naive baseline: one brute-force scan per node and measure,
        // building its own tables from the same raw store.
        let clock = Instant::now();
        let naive_preaggs = build_preaggs(&store, &cfs, lattice.measures.iter());
        let tables = dim_tables(&store, &cfs.members, &lattice.dims);
        let mut naive_rows = 0u64;
        for mask in 0..=lattice.root_mask() {
            for m in &lattice.measures {
                naive_rows +=
                    exact_node_rows(&cfs.members, &tables, &naive_preaggs[&m.name], mask).len()
                        as u64;
            }
        }
        // Keeps the optimizer from discarding the timed work.
        std::hint::black_box(naive_rows);
        let naive_seconds = clock.elapsed().as_secs_f64();

        // Error study, untimed: what a derivation-based evaluator would
        // report on the first measure at every non-root node.
        let m0 = &naive_preaggs[&lattice.measures[0].name];
        let dim_multi: Vec<bool> = lattice.dim_stats.iter().map(|s| s.multi_count > 0).collect();
        for mask in 0..lattice.root_mask() {
            let exact = exact_node_rows(&cfs.members, &tables, m0, mask);
            let derived = simulate_derivation(
                &cfs.members,
                &tables,
                &dim_multi,
                m0,
                mask,
                DeriveMode::ArrayCube,
            );
            errors.record_rows(&derived, &exact, AggFn::Sum);
            errors.record_rows(&derived, &exact, AggFn::Count);
        }

        timings.push((format!("engine_{n_facts}"), engine_seconds));
        timings.push((format!("naive_{n_facts}"), naive_seconds));
        sizes.push(BenchSize {
            facts: n_facts,
            occupied_cells: prepared[0].translation.group_counts.len() as u64,
            engine_seconds,
            naive_seconds,
            speedup: naive_seconds / engine_seconds.max(1e-12),
            result_rows: manager.total_rows,
        });
        println!("facts {n_facts}: engine {engine_seconds:.3}s, naive {naive_seconds:.3}s");
    }

    let points: Vec<(f64, f64)> =
        sizes.iter().map(|s| (s.facts as f64, s.engine_seconds)).collect();
    let dump = BenchDump {
        dims: args.dims,
        extent: args.extent,
        measures: args.measures,
        density: args.density,
        multi_prob: args.multi_prob,
        scaling_exponent: fit_exponent(&points),
        error_buckets: errors.to_buckets(),
        exact_fraction: errors.exact_fraction(),
        sizes,
    };
    let path = out.join("bench.json");
    std::fs::write(&path, serde_json::to_string_pretty(&dump)? + "\n")?;
    write_timing_csv(&out.join("timing.csv"), &timings)?;
    write_errors_csv(&out.join("errors.csv"), &dump.error_buckets)?;
    if let Some(e) = dump.scaling_exponent {
        println!("scaling exponent {e:.3}");
    }
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct CheckDump {
    cfs: String,
    facts: usize,
    specs_checked: usize,
    failures: Vec<String>,
}

/// Compares every owned spec's engine rows against the brute-force
/// evaluator; apex rows are compared over the facts the lattice includes.
pub fn check_against_oracle(
    store: &TripleStore,
    cfs: &CandidateFactSet,
    lattices: &[LatticeSpec],
    specs: &[crate::plan::AggregateSpec],
    preaggs: &HashMap<String, PreAggTable>,
    manager: &ResultManager,
) -> (usize, Vec<String>) {
    let mut checked = 0usize;
    let mut failures: Vec<String> = Vec::new();
    for lattice in lattices {
        let tables = dim_tables(store, &cfs.members, &lattice.dims);
        // The engine drops facts with no value on any dimension, so the
        // oracle must score apex groups over the same population.
        let mut included: Vec<FactId> = tables.iter().flat_map(|t| t.keys().copied()).collect();
        included.sort_unstable();
        included.dedup();
        for mask in 0..=lattice.root_mask() {
            for sref in &lattice.node_specs[mask as usize] {
                if !sref.owned {
                    continue;
                }
                let spec = &specs[sref.spec_id];
                let preagg = &preaggs[&spec.measure];
                let exact: Vec<(Vec<crate::attrs::DimValue>, f64)> =
                    exact_node_rows(&included, &tables, preagg, mask)
                        .iter()
                        .filter_map(|(key, acc)| {
                            Some((scorable_key(key, mask)?, acc.value(spec.function)))
                        })
                        .collect();
                let engine: Vec<(Vec<String>, f64)> = manager
                    .rows(sref.spec_id)
                    .iter()
                    .map(|r| (r.dims.clone(), r.value))
                    .collect();
                // Averages divide; everything else must match bitwise.
                let tol = if spec.function == AggFn::Avg { 1e-9 } else { 0.0 };
                match crate::oracle::compare_engine_rows(&engine, &exact, tol) {
                    Ok(()) => checked += 1,
                    Err(e) => failures.push(format!("{}: {e}", spec.key())),
                }
            }
        }
    }
    (checked, failures)
}

fn cmd_oracle_check(args: OracleCheckArgs) -> Result<()> {
    let cfg = RunConfig::resolve(args.common.config.as_deref(), &args.common.knobs)?;
    init_threads(args.common.threads);

    // A real graph gets the mined plan; a generated one gets its own
    // full lattice so every node is exercised.
    let (store, selector, forced) = match &args.input {
        Some(path) => {
            let input = InputArgs {
                input: path.clone(),
                class: args.class.clone(),
                properties: args.properties.clone(),
                ontology: args.ontology.clone(),
            };
            let store = load_input(&input, &cfg)?;
            let selector =
                pick_selector(&store, args.class.as_deref(), &args.properties)?;
            (store, selector, None)
        }
        None => {
            let generated = generate_synthetic(
                &SyntheticConfig {
                    extents: vec![args.extent; args.dims],
                    n_facts: args.facts,
                    n_measures: args.measures,
                    density: args.density,
                    multi_prob: args.multi_prob,
                },
                cfg.seed,
            );
            let selector = generated.selector.clone();
            (generated.store, selector, Some((generated.dims, generated.measures)))
        }
    };
    let cfs = select_cfs(&store, &selector)?;
    let (lattices, specs) = match forced {
        Some((dims, measures)) => {
            let enumerated = enumerate_attributes(
                &store,
                &cfs,
                &EnumerationConfig { derivations: false, ..EnumerationConfig::default() },
            );
            let dims = stats_for(&enumerated, &dims);
            let measures: Vec<Attribute> =
                stats_for(&enumerated, &measures).into_iter().map(|(a, _)| a).collect();
            let (lattice, specs) = single_lattice(&cfs.key, dims, measures);
            (vec![lattice], specs)
        }
        None => {
            let attrs = enumerate_attributes(&store, &cfs, &cfg.enumeration());
            let plan = build_plan(&store, &cfs, &attrs, &cfg.planning());
            (plan.lattices, plan.specs)
        }
    };

    let prepared = prepare_lattices(&store, &cfs.members, &lattices, &cfg)?;
    let preaggs =
        build_preaggs(&store, &cfs, lattices.iter().flat_map(|l| l.measures.iter()));
    // No pruning here: every spec must be present to be checked.
    let (manager, _) = evaluate_lattices(
        &lattices,
        &prepared,
        &preaggs,
        &HashSet::new(),
        &EvalOptions { check_bitmaps: true },
    )?;
    let (checked, failures) = check_against_oracle(&store, &cfs, &lattices, &specs, &preaggs, &manager);

    let out = &args.common.out;
    std::fs::create_dir_all(out)?;
    let dump = CheckDump {
        cfs: cfs.key.clone(),
        facts: cfs.len(),
        specs_checked: checked,
        failures: failures.clone(),
    };
    let path = out.join("oracle-check.json");
    std::fs::write(&path, serde_json::to_string_pretty(&dump)? + "\n")?;
    println!("checked {checked} specs, {} failures", failures.len());
    println!("wrote {}", path.display());
    if failures.is_empty() {
        Ok(())
    } else {
        Err(GraphCubeError::Check(format!(
            "{} of {} specs disagree with the oracle (first: {})",
            failures.len(),
            checked + failures.len(),
            failures[0]
        )))
    }
}
