//! Shared fixtures for the integration tests: a generator for messy
//! instances (missing values, multi-valued dimensions and measures) and a
//! compact driver for the public pipeline.
#![allow(dead_code)]

use graphcube::attrs::{
    by_name, enumerate_attributes, Attribute, AttributeStats, EnumerationConfig, PreAggTable,
};
use graphcube::cli::{
    build_preaggs, evaluate_lattices, prepare_lattices, PreparedLattice, RunConfig,
};
use graphcube::cube::{EvalOptions, OnePassAudit};
use graphcube::graph::{
    select_cfs, CandidateFactSet, CfsSelector, Term, TripleStore, ValueKind, RDF_TYPE,
};
use graphcube::oracle::GEN_TYPE;
use graphcube::plan::{single_lattice, AggFn, AggregateSpec, LatticeSpec};
use graphcube::score::ResultManager;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{HashMap, HashSet};

/// Shape of a generated messy instance: every irregularity the engine
/// must survive, with the probabilities under the caller's control.
pub struct MessyConfig {
    /// Distinct values per dimension.
    pub extents: Vec<u64>,
    pub n_measures: usize,
    pub n_facts: usize,
    /// Chance of a second value on a dimension a fact already has.
    pub multi_prob: f64,
    /// Chance a fact misses a dimension entirely.
    pub missing_dim_prob: f64,
    /// Chance a fact misses a measure.
    pub missing_measure_prob: f64,
    /// Chance a fact carries two values of a measure.
    pub multi_measure_prob: f64,
}

impl Default for MessyConfig {
    fn default() -> Self {
        MessyConfig {
            extents: vec![4, 4, 4],
            n_measures: 2,
            n_facts: 300,
            multi_prob: 0.3,
            missing_dim_prob: 0.2,
            missing_measure_prob: 0.2,
            multi_measure_prob: 0.1,
        }
    }
}

/// Generates facts of type [`GEN_TYPE`] with dimensions `d0..` and integer
/// measures `m0..`, leaving holes and duplicating values per the config.
pub fn generate_messy(cfg: &MessyConfig, seed: u64) -> TripleStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = TripleStore::new();
    for i in 0..cfg.n_facts {
        let s = format!("urn:gen:s{i}");
        store.add(&s, RDF_TYPE, Term::Iri(GEN_TYPE.into()));
        for (j, &ext) in cfg.extents.iter().enumerate() {
            if rng.gen_bool(cfg.missing_dim_prob) {
                continue;
            }
            let slot = rng.gen_range(0..ext);
            let p = format!("urn:gen:d{j}");
            store.add(&s, &p, Term::literal(format!("v{slot}"), ValueKind::Str));
            if ext >= 2 && rng.gen_bool(cfg.multi_prob) {
                // Offset in [1, ext-1], so the second value always differs.
                let alt = (slot + 1 + rng.gen_range(0..ext - 1)) % ext;
                store.add(&s, &p, Term::literal(format!("v{alt}"), ValueKind::Str));
            }
        }
        for j in 0..cfg.n_measures {
            if rng.gen_bool(cfg.missing_measure_prob) {
                continue;
            }
            let p = format!("urn:gen:m{j}");
            let v: i64 = rng.gen_range(-500..=1000);
            store.add(&s, &p, Term::literal(v.to_string(), ValueKind::Integer));
            if rng.gen_bool(cfg.multi_measure_prob) {
                store.add(&s, &p, Term::literal((v + 1).to_string(), ValueKind::Integer));
            }
        }
    }
    store.finish();
    store
}

pub fn gen_selector() -> CfsSelector {
    CfsSelector::Type(GEN_TYPE.into())
}

/// One explicitly chosen lattice, carried through translation and ready
/// to evaluate.
pub struct Pipeline {
    pub cfs: CandidateFactSet,
    pub lattices: Vec<LatticeSpec>,
    pub specs: Vec<AggregateSpec>,
    pub prepared: Vec<PreparedLattice>,
    pub preaggs: HashMap<String, PreAggTable>,
}

/// Runs the public pipeline up to translation for one lattice over the
/// named dimensions and measures.
pub fn single_pipeline(
    store: &TripleStore,
    selector: &CfsSelector,
    dims: &[&str],
    measures: &[&str],
    derivations: bool,
    cfg: &RunConfig,
) -> Pipeline {
    let cfs = select_cfs(store, selector).expect("candidate facts");
    let attrs = enumerate_attributes(
        store,
        &cfs,
        &EnumerationConfig { derivations, ..EnumerationConfig::default() },
    );
    let named = by_name(&attrs);
    let pick = |n: &str| {
        named.get(n).unwrap_or_else(|| panic!("attribute {n} not enumerated")).clone()
    };
    let dim_attrs: Vec<(Attribute, AttributeStats)> = dims.iter().map(|n| pick(n)).collect();
    let measure_attrs: Vec<Attribute> = measures.iter().map(|n| pick(n).0).collect();
    let (lattice, specs) = single_lattice(&cfs.key, dim_attrs, measure_attrs);
    let lattices = vec![lattice];
    let prepared = prepare_lattices(store, &cfs.members, &lattices, cfg).expect("memory plan");
    let preaggs = build_preaggs(store, &cfs, lattices.iter().flat_map(|l| l.measures.iter()));
    Pipeline { cfs, lattices, specs, prepared, preaggs }
}

impl Pipeline {
    pub fn evaluate(
        &self,
        skip: &HashSet<usize>,
        check_bitmaps: bool,
    ) -> (ResultManager, Vec<OnePassAudit>) {
        evaluate_lattices(
            &self.lattices,
            &self.prepared,
            &self.preaggs,
            skip,
            &EvalOptions { check_bitmaps },
        )
        .expect("one-pass audit holds")
    }

    /// Global spec id for a dimension set (any order), measure, and function.
    pub fn spec_id(&self, dims: &[&str], measure: &str, function: AggFn) -> usize {
        let mut want: Vec<&str> = dims.to_vec();
        want.sort_unstable();
        self.specs
            .iter()
            .find(|s| {
                let mut have: Vec<&str> = s.dims.iter().map(String::as_str).collect();
                have.sort_unstable();
                s.function == function && s.measure == measure && have == want
            })
            .unwrap_or_else(|| panic!("no spec over {dims:?} {measure} {function:?}"))
            .id
    }
}

/// Scorable rows of one spec, sorted by group labels.
pub fn rows_of(manager: &ResultManager, spec_id: usize) -> Vec<(Vec<String>, f64)> {
    let mut rows: Vec<(Vec<String>, f64)> =
        manager.rows(spec_id).iter().map(|r| (r.dims.clone(), r.value)).collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    rows
}
