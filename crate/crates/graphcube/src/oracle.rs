//! Independent oracles and instance generators for validating the engine.
//!
//! `exact_node_rows` recomputes any lattice node with plain nested loops
//! over facts, with no shared state between nodes, so the streaming
//! evaluator can be checked against it group by group.
//! `simulate_derivation` reproduces what cube systems without fact
//! identity compute when they derive a node from a parent's aggregate
//! rows instead of from facts: multi-valued facts get counted once per
//! parent cell, inflating counts, sums, and averages.

use crate::attrs::{AttrValueKind, Attribute, DimValue, PreAggTable};
use crate::graph::{CfsSelector, FactId, Term, TripleStore, ValueKind, RDF_TYPE};
use crate::plan::AggFn;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, HashMap};

/// Full-width group key: one entry per lattice dimension, `None` when the
/// group is null in that dimension (or the dimension is projected away).
pub type GroupKey = Vec<Option<DimValue>>;

/// Fact-correct accumulator of one group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupAcc {
    /// Distinct facts carrying the measure.
    pub facts: u64,
    /// Total measure values over those facts.
    pub count: u64,
    pub sum: f64,
    pub min: f64,
    pub max: f64,
}

impl GroupAcc {
    fn empty() -> Self {
        GroupAcc { facts: 0, count: 0, sum: 0.0, min: f64::INFINITY, max: f64::NEG_INFINITY }
    }

    fn add_fact(&mut self, row: &crate::attrs::PreAggRow) {
        self.facts += 1;
        self.count += row.count;
        self.sum += row.sum;
        self.min = self.min.min(row.min);
        self.max = self.max.max(row.max);
    }

    fn merge(&mut self, other: &GroupAcc) {
        self.facts += other.facts;
        self.count += other.count;
        self.sum += other.sum;
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
    }

    pub fn value(&self, function: AggFn) -> f64 {
        match function {
            AggFn::Count => self.facts as f64,
            AggFn::Sum => self.sum,
            AggFn::Avg => self.sum / self.count as f64,
            AggFn::Min => self.min,
            AggFn::Max => self.max,
        }
    }
}

/// Per-dimension fact -> sorted distinct values, computed once and shared
/// by every node evaluation.
pub fn dim_tables(
    store: &TripleStore,
    members: &[FactId],
    dims: &[Attribute],
) -> Vec<HashMap<FactId, Vec<DimValue>>> {
    dims.iter()
        .map(|attr| {
            crate::attrs::value_rows(store, members, attr)
                .into_iter()
                .map(|(f, terms)| {
                    let mut vals: Vec<DimValue> = terms.iter().map(DimValue::of).collect();
                    vals.sort();
                    vals.dedup();
                    (f, vals)
                })
                .collect()
        })
        .collect()
}

/// Evaluates one lattice node by brute force: every fact lands once in
/// each combination of its values over the node's dimensions, with `None`
/// for dimensions it lacks. Facts without the measure contribute nothing.
pub fn exact_node_rows(
    members: &[FactId],
    tables: &[HashMap<FactId, Vec<DimValue>>],
    preagg: &PreAggTable,
    mask: u32,
) -> BTreeMap<GroupKey, GroupAcc> {
    let n = tables.len();
    let masked: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
    let mut rows: BTreeMap<GroupKey, GroupAcc> = BTreeMap::new();
    for &f in members {
        let Some(row) = preagg.row_for(f) else { continue };
        let mut keys: Vec<GroupKey> = vec![vec![None; n]];
        for &i in &masked {
            match tables[i].get(&f) {
                None => {}
                Some(vals) => {
                    keys = keys
                        .iter()
                        .flat_map(|k| {
                            vals.iter().map(move |v| {
                                let mut k = k.clone();
                                k[i] = Some(v.clone());
                                k
                            })
                        })
                        .collect();
                }
            }
        }
        for key in keys {
            rows.entry(key).or_insert_with(GroupAcc::empty).add_fact(row);
        }
    }
    rows
}

/// The values at the masked positions, or `None` for a null group.
pub fn scorable_key(key: &GroupKey, mask: u32) -> Option<Vec<DimValue>> {
    let mut out = Vec::new();
    for (i, v) in key.iter().enumerate() {
        if mask >> i & 1 == 1 {
            out.push(v.clone()?);
        }
    }
    Some(out)
}

/// Reference evaluation of one spec over all of its dimensions: the
/// scorable (fully non-null) groups only, sorted by key.
pub fn naive_eval(
    members: &[FactId],
    tables: &[HashMap<FactId, Vec<DimValue>>],
    preagg: &PreAggTable,
    function: AggFn,
) -> Vec<(Vec<DimValue>, f64)> {
    let mask = (1u32 << tables.len()) - 1;
    exact_node_rows(members, tables, preagg, mask)
        .iter()
        .filter_map(|(k, acc)| Some((scorable_key(k, mask)?, acc.value(function))))
        .collect()
}

/// How a fact-identity-free system derives a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeriveMode {
    /// Every node is derived straight from the root's aggregate rows.
    ArrayCube,
    /// Each node is derived from the parent that adds one dimension,
    /// preferring a single-valued one (largest index breaks ties), so
    /// only unavoidable multi-valued collapses go wrong.
    PgCubeD,
}

fn project_rows(rows: &BTreeMap<GroupKey, GroupAcc>, mask: u32) -> BTreeMap<GroupKey, GroupAcc> {
    let mut out: BTreeMap<GroupKey, GroupAcc> = BTreeMap::new();
    for (key, acc) in rows {
        let child: GroupKey = key
            .iter()
            .enumerate()
            .map(|(i, v)| if mask >> i & 1 == 1 { v.clone() } else { None })
            .collect();
        out.entry(child).or_insert_with(GroupAcc::empty).merge(acc);
    }
    out
}

/// Simulates a derivation-based evaluation of `mask`: the root is exact,
/// every other node is combined from parent rows, so a fact spanning
/// several parent cells of one child group is counted once per cell.
pub fn simulate_derivation(
    members: &[FactId],
    tables: &[HashMap<FactId, Vec<DimValue>>],
    dim_multi: &[bool],
    preagg: &PreAggTable,
    mask: u32,
    mode: DeriveMode,
) -> BTreeMap<GroupKey, GroupAcc> {
    let n = tables.len();
    let root_mask = (1u32 << n) - 1;
    if mask == root_mask {
        return exact_node_rows(members, tables, preagg, root_mask);
    }
    match mode {
        DeriveMode::ArrayCube => {
            let root = exact_node_rows(members, tables, preagg, root_mask);
            project_rows(&root, mask)
        }
        DeriveMode::PgCubeD => {
            let missing: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 0).collect();
            let j = missing
                .iter()
                .copied()
                .max_by_key(|&i| (!dim_multi[i], i))
                .expect("non-root node has a missing dimension");
            let parent =
                simulate_derivation(members, tables, dim_multi, preagg, mask | (1 << j), mode);
            project_rows(&parent, mask)
        }
    }
}

/// Counts the lattice nodes whose derived rows all agree with the exact
/// ones. A node collapsing only single-valued dimensions derives cleanly;
/// when every fact carries a positive measure, collapsing a multi-valued
/// dimension inflates it, so the correct nodes are exactly the supersets
/// of the multi-valued dimension set.
pub fn count_correct_nodes(
    members: &[FactId],
    tables: &[HashMap<FactId, Vec<DimValue>>],
    dim_multi: &[bool],
    preagg: &PreAggTable,
    mode: DeriveMode,
) -> usize {
    let n = tables.len();
    let root_mask = (1u32 << n) - 1;
    (0..=root_mask)
        .filter(|&mask| {
            let exact = exact_node_rows(members, tables, preagg, mask);
            let derived = simulate_derivation(members, tables, dim_multi, preagg, mask, mode);
            exact == derived
        })
        .count()
}

/// The error-ratio buckets of the derivation study.
pub const BUCKET_LABELS: [&str; 5] = ["1", "(1,2]", "(2,10]", "(10,30]", ">30"];

/// Distribution of derived-to-exact ratios over the groups of a node.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ErrorReport {
    pub total: u64,
    pub buckets: [u64; 5],
}

impl ErrorReport {
    /// Folds one (derived, exact) value pair into the distribution. The
    /// ratio is symmetric: a half counts like a double.
    pub fn record(&mut self, derived: f64, exact: f64) {
        self.total += 1;
        if derived == exact {
            self.buckets[0] += 1;
            return;
        }
        if exact == 0.0 || derived == 0.0 {
            self.buckets[4] += 1;
            return;
        }
        let r = (derived / exact).abs();
        let r = if r < 1.0 { 1.0 / r } else { r };
        let b = if r <= 2.0 {
            1
        } else if r <= 10.0 {
            2
        } else if r <= 30.0 {
            3
        } else {
            4
        };
        self.buckets[b] += 1;
    }

    pub fn record_rows(
        &mut self,
        derived: &BTreeMap<GroupKey, GroupAcc>,
        exact: &BTreeMap<GroupKey, GroupAcc>,
        function: AggFn,
    ) {
        for (key, e) in exact {
            match derived.get(key) {
                Some(d) => self.record(d.value(function), e.value(function)),
                None => {
                    self.total += 1;
                    self.buckets[4] += 1;
                }
            }
        }
    }

    /// Labeled counts for the report renderer.
    pub fn to_buckets(&self) -> Vec<(String, u64)> {
        BUCKET_LABELS.iter().zip(self.buckets).map(|(l, c)| (l.to_string(), c)).collect()
    }

    /// Fraction of groups derived exactly right.
    pub fn exact_fraction(&self) -> f64 {
        if self.total == 0 {
            return 1.0;
        }
        self.buckets[0] as f64 / self.total as f64
    }
}

/// Class IRI of generated facts.
pub const GEN_TYPE: &str = "urn:gen:T";

/// Shape of a generated instance.
#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    /// Distinct values per dimension (nulls never generated).
    pub extents: Vec<u64>,
    pub n_facts: usize,
    pub n_measures: usize,
    /// Target fraction of occupied cells; met exactly when
    /// `n_facts >= ceil(density * cells)` and `multi_prob` is zero.
    pub density: f64,
    /// Chance a fact gets a second value on one random dimension.
    pub multi_prob: f64,
}

/// A generated instance, ready for the standard pipeline.
pub struct Generated {
    pub store: TripleStore,
    pub dims: Vec<Attribute>,
    pub measures: Vec<Attribute>,
    pub selector: CfsSelector,
    /// Dimensions every fact is multi-valued on (adversarial instances).
    pub md_mask: u32,
}

fn dim_attr(j: usize) -> Attribute {
    Attribute::direct(format!("d{j}"), format!("urn:gen:d{j}"), AttrValueKind::Text)
}

fn measure_attr(j: usize) -> Attribute {
    Attribute::direct(format!("m{j}"), format!("urn:gen:m{j}"), AttrValueKind::Numeric)
}

/// Deterministically generates facts spread uniformly over a sampled set
/// of cells, every fact carrying every measure.
pub fn generate_synthetic(cfg: &SyntheticConfig, seed: u64) -> Generated {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.extents.len();
    let cells: u64 = cfg.extents.iter().product();
    assert!(cells > 0 && cells <= u32::MAX as u64, "cell space out of range");
    let target = ((cfg.density * cells as f64).ceil() as u64).clamp(1, cells);
    let mut chosen =
        rand::seq::index::sample(&mut rng, cells as usize, target as usize).into_vec();
    chosen.sort_unstable();

    let mut store = TripleStore::new();
    for i in 0..cfg.n_facts {
        // The first facts cover every chosen cell so the occupancy target
        // is hit exactly; the rest land uniformly.
        let cell = if i < chosen.len() {
            chosen[i] as u64
        } else {
            chosen[rng.gen_range(0..chosen.len())] as u64
        };
        let subject = format!("urn:gen:s{i}");
        store.add(&subject, RDF_TYPE, Term::Iri(GEN_TYPE.into()));
        let mut rest = cell;
        let mut slots = vec![0u64; n];
        for j in (0..n).rev() {
            slots[j] = rest % cfg.extents[j];
            rest /= cfg.extents[j];
        }
        for j in 0..n {
            store.add(
                &subject,
                &format!("urn:gen:d{j}"),
                Term::literal(format!("v{}", slots[j]), ValueKind::Str),
            );
        }
        if cfg.multi_prob > 0.0 && rng.gen_bool(cfg.multi_prob) {
            let j = rng.gen_range(0..n);
            if cfg.extents[j] >= 2 {
                let alt = (slots[j] + 1) % cfg.extents[j];
                store.add(
                    &subject,
                    &format!("urn:gen:d{j}"),
                    Term::literal(format!("v{alt}"), ValueKind::Str),
                );
            }
        }
        for j in 0..cfg.n_measures {
            let v: u32 = rng.gen_range(0..=1000);
            store.add(
                &subject,
                &format!("urn:gen:m{j}"),
                Term::literal(v.to_string(), ValueKind::Integer),
            );
        }
    }
    store.finish();
    Generated {
        store,
        dims: (0..n).map(dim_attr).collect(),
        measures: (0..cfg.n_measures).map(measure_attr).collect(),
        selector: CfsSelector::Type(GEN_TYPE.into()),
        md_mask: 0,
    }
}

/// Generates the adversarial identity-loss instance: a random set of
/// `k_md` dimensions gets exactly two values on every fact, the rest one,
/// and a single strictly positive measure. Collapsing any multi-valued
/// dimension then provably inflates every group, so derivation is correct
/// on exactly the 2^(n - k) nodes containing all of them.
pub fn generate_adversarial(n_dims: usize, k_md: usize, n_facts: usize, seed: u64) -> Generated {
    assert!(k_md <= n_dims);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let extent = 3u64;
    let mut order: Vec<usize> = (0..n_dims).collect();
    order.shuffle(&mut rng);
    let md_mask = order[..k_md].iter().fold(0u32, |m, &j| m | 1 << j);

    let mut store = TripleStore::new();
    for i in 0..n_facts {
        let subject = format!("urn:gen:s{i}");
        store.add(&subject, RDF_TYPE, Term::Iri(GEN_TYPE.into()));
        for j in 0..n_dims {
            let slot = rng.gen_range(0..extent);
            store.add(
                &subject,
                &format!("urn:gen:d{j}"),
                Term::literal(format!("v{slot}"), ValueKind::Str),
            );
            if md_mask >> j & 1 == 1 {
                let alt = (slot + 1) % extent;
                store.add(
                    &subject,
                    &format!("urn:gen:d{j}"),
                    Term::literal(format!("v{alt}"), ValueKind::Str),
                );
            }
        }
        let v: u32 = rng.gen_range(1..=1000);
        store.add(&subject, "urn:gen:m0", Term::literal(v.to_string(), ValueKind::Integer));
    }
    store.finish();
    Generated {
        store,
        dims: (0..n_dims).map(dim_attr).collect(),
        measures: vec![measure_attr(0)],
        selector: CfsSelector::Type(GEN_TYPE.into()),
        md_mask,
    }
}

/// Compares streamed engine rows against oracle rows: identical group
/// sets, values equal bitwise (`rel_tol` zero) or within a relative
/// tolerance. Labels compare lexically, which is unambiguous for the
/// generated corpora.
pub fn compare_engine_rows(
    engine: &[(Vec<String>, f64)],
    exact: &[(Vec<DimValue>, f64)],
    rel_tol: f64,
) -> std::result::Result<(), String> {
    if engine.len() != exact.len() {
        return Err(format!("row count {} vs oracle {}", engine.len(), exact.len()));
    }
    let mut engine: Vec<(Vec<String>, f64)> = engine.to_vec();
    engine.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut oracle: Vec<(Vec<String>, f64)> = exact
        .iter()
        .map(|(k, v)| (k.iter().map(|d| d.lexical.clone()).collect(), *v))
        .collect();
    oracle.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    for ((ek, ev), (ok, ov)) in engine.iter().zip(&oracle) {
        if ek != ok {
            return Err(format!("group {ek:?} vs oracle {ok:?}"));
        }
        let good = if rel_tol == 0.0 {
            ev == ov
        } else {
            (ev - ov).abs() <= rel_tol * ov.abs().max(1.0)
        };
        if !good {
            return Err(format!("group {ek:?}: value {ev} vs oracle {ov}"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attrs::build_preagg;
    use crate::graph::select_cfs;
    use crate::samples;

    fn wide_fixture() -> (TripleStore, Vec<FactId>, Vec<Attribute>, Vec<bool>, PreAggTable) {
        let store = samples::wide_store();
        let cfs = samples::ceo_cfs(&store);
        let dims = vec![
            Attribute::direct(
                "nationality",
                "http://example.org/nationality",
                AttrValueKind::Text,
            ),
            Attribute::direct("gender", "http://example.org/gender", AttrValueKind::Text),
            Attribute {
                name: "company/area".into(),
                kind: crate::attrs::AttrKind::Path,
                sources: vec![
                    "http://example.org/company".into(),
                    "http://example.org/area".into(),
                ],
                value_kind: AttrValueKind::Text,
            },
        ];
        let net = Attribute::direct(
            "netWorth",
            "http://example.org/netWorth",
            AttrValueKind::Numeric,
        );
        let preagg = build_preagg(&store, &cfs, &net);
        let members = cfs.members.clone();
        (store, members, dims, vec![true, false, true], preagg)
    }

    #[test]
    fn naive_counts_facts_once_per_group() {
        let (store, members, dims, _, preagg) = wide_fixture();
        let tables = dim_tables(&store, &members, &dims[2..]);
        let rows = naive_eval(&members, &tables, &preagg, AggFn::Count);
        let by_label: BTreeMap<String, f64> =
            rows.into_iter().map(|(k, v)| (k[0].lexical.clone(), v)).collect();
        assert_eq!(by_label["Manufacturer"], 2.0, "both CEOs, despite multi-values");
        assert_eq!(by_label["Aerospace"], 1.0);
        let sums = naive_eval(&members, &tables, &preagg, AggFn::Sum);
        let manu = sums.iter().find(|(k, _)| k[0].lexical == "Manufacturer").unwrap();
        assert_eq!(manu.1, 2.92e9);
    }

    #[test]
    fn derivation_reproduces_the_known_inflations() {
        let (store, members, dims, multi, preagg) = wide_fixture();
        let tables = dim_tables(&store, &members, &dims);
        for mode in [DeriveMode::ArrayCube, DeriveMode::PgCubeD] {
            // Gender node: the one female CEO spans three root cells.
            let g = simulate_derivation(&members, &tables, &multi, &preagg, 0b010, mode);
            let female: Vec<&GroupAcc> = g
                .iter()
                .filter_map(|(k, acc)| {
                    (k[1].as_ref().map(|d| d.lexical.as_str()) == Some("female"))
                        .then_some(acc)
                })
                .collect();
            assert_eq!(female.len(), 1);
            assert_eq!(female[0].facts, 3, "{mode:?}");
            // Area node: Manufacturer picks up one cell of hers and four
            // of his, overcounting both facts and money.
            let a = simulate_derivation(&members, &tables, &multi, &preagg, 0b100, mode);
            let manu = a
                .iter()
                .find(|(k, _)| k[2].as_ref().map(|d| d.lexical.as_str()) == Some("Manufacturer"))
                .unwrap()
                .1;
            assert_eq!(manu.facts, 5, "{mode:?}");
            assert_eq!(manu.sum, 3.28e9, "{mode:?}");
            // The exact values stay 1 and 2.92e9.
            let exact = exact_node_rows(&members, &tables, &preagg, 0b100);
            let manu_exact = exact
                .iter()
                .find(|(k, _)| k[2].as_ref().map(|d| d.lexical.as_str()) == Some("Manufacturer"))
                .unwrap()
                .1;
            assert_eq!(manu_exact.facts, 2);
            assert_eq!(manu_exact.sum, 2.92e9);
        }
    }

    #[test]
    fn min_and_max_survive_derivation() {
        let (store, members, dims, multi, preagg) = wide_fixture();
        let tables = dim_tables(&store, &members, &dims);
        for mask in 0..0b111u32 {
            let derived =
                simulate_derivation(&members, &tables, &multi, &preagg, mask, DeriveMode::ArrayCube);
            let exact = exact_node_rows(&members, &tables, &preagg, mask);
            for (key, e) in &exact {
                let d = &derived[key];
                assert_eq!(d.min, e.min);
                assert_eq!(d.max, e.max);
            }
        }
    }

    #[test]
    fn correct_nodes_are_the_md_supersets() {
        for (n, k, seed) in [(2usize, 1usize, 5u64), (3, 1, 6), (3, 2, 7), (4, 2, 8)] {
            let gen = generate_adversarial(n, k, 60, seed);
            let cfs = select_cfs(&gen.store, &gen.selector).unwrap();
            let tables = dim_tables(&gen.store, &cfs.members, &gen.dims);
            let multi: Vec<bool> = (0..n).map(|j| gen.md_mask >> j & 1 == 1).collect();
            let preagg = build_preagg(&gen.store, &cfs, &gen.measures[0]);
            let correct =
                count_correct_nodes(&cfs.members, &tables, &multi, &preagg, DeriveMode::ArrayCube);
            assert_eq!(correct, 1 << (n - k), "n={n} k={k}");
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let cfg = SyntheticConfig {
            extents: vec![4, 5],
            n_facts: 100,
            n_measures: 2,
            density: 0.4,
            multi_prob: 0.2,
        };
        let a = generate_synthetic(&cfg, 33).store.to_ntriples();
        let b = generate_synthetic(&cfg, 33).store.to_ntriples();
        let c = generate_synthetic(&cfg, 34).store.to_ntriples();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn generator_hits_the_occupancy_target() {
        let cfg = SyntheticConfig {
            extents: vec![4, 5, 5],
            n_facts: 500,
            n_measures: 1,
            density: 0.3,
            multi_prob: 0.0,
        };
        let gen = generate_synthetic(&cfg, 9);
        let cfs = select_cfs(&gen.store, &gen.selector).unwrap();
        let tables = dim_tables(&gen.store, &cfs.members, &gen.dims);
        let mut cells: std::collections::HashSet<Vec<String>> = Default::default();
        for &f in &cfs.members {
            let key: Vec<String> =
                (0..3).map(|j| tables[j][&f][0].lexical.clone()).collect();
            cells.insert(key);
        }
        assert_eq!(cells.len(), 30, "ceil(0.3 * 100) cells occupied");
    }

    #[test]
    fn error_buckets_split_at_the_documented_edges() {
        let mut rep = ErrorReport::default();
        rep.record(5.0, 5.0);
        rep.record(0.0, 0.0);
        rep.record(3.0, 2.0);
        rep.record(1.0, 2.0);
        rep.record(10.0, 1.0);
        rep.record(25.0, 1.0);
        rep.record(31.0, 1.0);
        rep.record(1.0, 0.0);
        assert_eq!(rep.buckets, [2, 2, 1, 1, 2]);
        assert_eq!(rep.total, 8);
        assert!((rep.exact_fraction() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn engine_row_comparison_flags_value_drift() {
        let exact = vec![(
            vec![DimValue { kind: ValueKind::Str, lexical: "a".into() }],
            10.0,
        )];
        let ok = vec![(vec!["a".to_string()], 10.0)];
        let drift = vec![(vec!["a".to_string()], 10.0 + 1e-7)];
        assert!(compare_engine_rows(&ok, &exact, 0.0).is_ok());
        assert!(compare_engine_rows(&drift, &exact, 0.0).is_err());
        assert!(compare_engine_rows(&drift, &exact, 1e-6).is_ok());
    }
}
