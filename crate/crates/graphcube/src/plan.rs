//! Aggregate enumeration: dimension filtering, maximal frequent attribute
//! set mining, lattice construction, and global spec deduplication.
//!
//! Each maximal frequent set of dimension candidates becomes a lattice
//! root; every subset of a root paired with every (measure, function)
//! yields one AggregateSpec. Specs shared between lattices are created
//! once: the first lattice owns emission, later ones only propagate.

use crate::attrs::{Attribute, AttributeStats};
use crate::graph::{CandidateFactSet, TripleStore};
use std::collections::{HashMap, HashSet};
use std::fmt;

/// Aggregate functions applicable to a measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub enum AggFn {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggFn {
    pub const NUMERIC: [AggFn; 5] = [AggFn::Count, AggFn::Sum, AggFn::Avg, AggFn::Min, AggFn::Max];
    pub const NON_NUMERIC: [AggFn; 1] = [AggFn::Count];

    pub fn as_str(self) -> &'static str {
        match self {
            AggFn::Count => "count",
            AggFn::Sum => "sum",
            AggFn::Avg => "avg",
            AggFn::Min => "min",
            AggFn::Max => "max",
        }
    }
}

impl fmt::Display for AggFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One multidimensional aggregate: a lattice node paired with a measure
/// and a function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregateSpec {
    pub id: usize,
    pub cfs: String,
    /// Dimension names in the owning lattice's order.
    pub dims: Vec<String>,
    pub measure: String,
    pub function: AggFn,
}

impl AggregateSpec {
    /// Identity under which shared specs deduplicate across lattices.
    pub fn canonical_key(cfs: &str, dims: &[String], measure: &str, function: AggFn) -> String {
        let mut sorted = dims.to_vec();
        sorted.sort();
        format!("{cfs}|{}|{measure}|{function}", sorted.join(","))
    }

    pub fn key(&self) -> String {
        Self::canonical_key(&self.cfs, &self.dims, &self.measure, self.function)
    }
}

/// Reference from a lattice node to a global spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecRef {
    pub spec_id: usize,
    /// Whether this lattice emits and scores the spec's result.
    pub owned: bool,
}

/// One lattice: an ordered dimension list and the measures evaluated at
/// every one of its 2^N nodes.
#[derive(Debug, Clone)]
pub struct LatticeSpec {
    pub dims: Vec<Attribute>,
    pub dim_stats: Vec<AttributeStats>,
    pub measures: Vec<Attribute>,
    /// Indexed by node mask (bit i set = dims[i] grouped on); entry m holds
    /// the node's spec refs in (measure, function) order.
    pub node_specs: Vec<Vec<SpecRef>>,
}

impl LatticeSpec {
    pub fn n(&self) -> usize {
        self.dims.len()
    }

    pub fn root_mask(&self) -> u32 {
        (1u32 << self.dims.len()) - 1
    }
}

/// Full exploration plan for one candidate fact set.
#[derive(Debug, Clone)]
pub struct Plan {
    pub cfs_key: String,
    pub lattices: Vec<LatticeSpec>,
    /// Global deduplicated spec list; `AggregateSpec::id` indexes it.
    pub specs: Vec<AggregateSpec>,
}

/// Enumeration thresholds.
#[derive(Debug, Clone)]
pub struct PlanConfig {
    /// Minimum support fraction for dimensions, measures, and root sets.
    pub min_support: f64,
    /// Maximum dimensions per lattice.
    pub n_max: usize,
    /// Distinct-value ceiling for dimensions (absolute part).
    pub distinct_cap: usize,
    /// Distinct-value ceiling for dimensions (fraction-of-CFS part).
    pub distinct_ratio: f64,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig { min_support: 0.5, n_max: 4, distinct_cap: 100, distinct_ratio: 0.2 }
    }
}

/// Indexes of attributes usable as dimensions: frequent enough and not
/// too finely valued.
pub fn filter_dimensions(
    attrs: &[(Attribute, AttributeStats)],
    cfs_len: usize,
    cfg: &PlanConfig,
) -> Vec<usize> {
    let distinct_limit = (cfg.distinct_cap as f64).max(cfg.distinct_ratio * cfs_len as f64);
    attrs
        .iter()
        .enumerate()
        .filter(|(_, (_, s))| {
            s.support as f64 >= cfg.min_support * cfs_len as f64
                && s.distinct >= 1
                && s.distinct as f64 <= distinct_limit
        })
        .map(|(i, _)| i)
        .collect()
}

fn support_count(fact_masks: &[u128], set: u128) -> usize {
    fact_masks.iter().filter(|&&m| m & set == set).count()
}

/// Depth-first maximal frequent itemset search with head-union-tail
/// pruning. `fact_masks[f]` has bit i set when fact f possesses item i.
fn mine_maximal(fact_masks: &[u128], n_items: usize, min_count: usize) -> Vec<u128> {
    let mut maximal: Vec<u128> = Vec::new();
    let items: Vec<usize> = (0..n_items).collect();
    fn insert_maximal(maximal: &mut Vec<u128>, set: u128) {
        if maximal.iter().any(|&m| m & set == set) {
            return;
        }
        maximal.retain(|&m| m | set != set || m == set);
        maximal.push(set);
    }
    fn dfs(
        fact_masks: &[u128],
        min_count: usize,
        head: u128,
        tail: &[usize],
        maximal: &mut Vec<u128>,
    ) {
        let hut = tail.iter().fold(head, |acc, &i| acc | (1u128 << i));
        // Whole subtree lies inside a known maximal set: nothing new here.
        if maximal.iter().any(|&m| m & hut == hut) {
            return;
        }
        if support_count(fact_masks, hut) >= min_count {
            insert_maximal(maximal, hut);
            return;
        }
        let mut any_child = false;
        for (pos, &i) in tail.iter().enumerate() {
            let new_head = head | (1u128 << i);
            if support_count(fact_masks, new_head) < min_count {
                continue;
            }
            any_child = true;
            let new_tail: Vec<usize> = tail[pos + 1..]
                .iter()
                .copied()
                .filter(|&j| support_count(fact_masks, new_head | (1u128 << j)) >= min_count)
                .collect();
            if new_tail.is_empty() {
                insert_maximal(maximal, new_head);
            } else {
                dfs(fact_masks, min_count, new_head, &new_tail, maximal);
            }
        }
        if !any_child && head != 0 {
            insert_maximal(maximal, head);
        }
    }
    dfs(fact_masks, min_count, 0, &items, &mut maximal);
    maximal.sort_unstable();
    maximal
}

fn mask_to_vec(mask: u128) -> Vec<usize> {
    (0..128).filter(|i| mask >> i & 1 == 1).collect()
}

/// Mines the maximal frequent sets of candidate dimensions over the CFS.
/// Returns index lists into `attrs`, each sorted ascending.
pub fn mine_mfs(
    store: &TripleStore,
    cfs: &CandidateFactSet,
    attrs: &[(Attribute, AttributeStats)],
    candidates: &[usize],
    min_support: f64,
) -> Vec<Vec<usize>> {
    // The mask mining domain is capped at 128 items; keep the most
    // frequent candidates when there are more.
    let mut cand: Vec<usize> = candidates.to_vec();
    if cand.len() > 128 {
        cand.sort_by(|&a, &b| {
            attrs[b].1.support.cmp(&attrs[a].1.support).then(attrs[a].0.name.cmp(&attrs[b].0.name))
        });
        cand.truncate(128);
        cand.sort_unstable();
    }
    let mut fact_masks: Vec<u128> = vec![0; cfs.len()];
    let fact_pos: HashMap<u32, usize> =
        cfs.members.iter().enumerate().map(|(i, &f)| (f, i)).collect();
    for (item, &ai) in cand.iter().enumerate() {
        for (f, _) in crate::attrs::value_rows(store, &cfs.members, &attrs[ai].0) {
            fact_masks[fact_pos[&f]] |= 1u128 << item;
        }
    }
    let min_count = ((min_support * cfs.len() as f64).ceil() as usize).max(1);
    mine_maximal(&fact_masks, cand.len(), min_count)
        .into_iter()
        .map(|m| mask_to_vec(m).into_iter().map(|i| cand[i]).collect())
        .collect()
}

/// Splits any root holding both a property and its value-count derivation
/// into two roots, one without each half of the pair.
fn split_derivation_pairs(
    roots: Vec<Vec<usize>>,
    attrs: &[(Attribute, AttributeStats)],
) -> Vec<Vec<usize>> {
    use crate::attrs::AttrKind;
    let mut queue: Vec<Vec<usize>> = roots;
    let mut done: Vec<Vec<usize>> = Vec::new();
    while let Some(root) = queue.pop() {
        let pair = root.iter().enumerate().find_map(|(i, &a)| {
            root.iter().enumerate().find_map(|(j, &b)| {
                (attrs[a].0.kind == AttrKind::Direct
                    && attrs[b].0.kind == AttrKind::Count
                    && attrs[b].0.sources == attrs[a].0.sources)
                    .then_some((i, j))
            })
        });
        match pair {
            None => done.push(root),
            Some((i, j)) => {
                for drop in [i, j] {
                    let mut smaller = root.clone();
                    smaller.remove(drop);
                    if !smaller.is_empty() {
                        queue.push(smaller);
                    }
                }
            }
        }
    }
    subsume(done)
}

/// Removes duplicate roots and roots contained in another root.
fn subsume(mut roots: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    roots.sort();
    roots.dedup();
    let sets: Vec<HashSet<usize>> =
        roots.iter().map(|r| r.iter().copied().collect()).collect();
    roots
        .iter()
        .filter(|r| {
            !sets
                .iter()
                .any(|s| s.len() > r.len() && r.iter().all(|x| s.contains(x)))
        })
        .cloned()
        .collect()
}

/// Orders a root's attributes for lattice use: distinct values descending,
/// then name ascending.
fn order_dims(root: &[usize], attrs: &[(Attribute, AttributeStats)]) -> Vec<usize> {
    let mut ordered = root.to_vec();
    ordered.sort_by(|&a, &b| {
        attrs[b].1.distinct.cmp(&attrs[a].1.distinct).then(attrs[a].0.name.cmp(&attrs[b].0.name))
    });
    ordered
}

/// Cuts oversized roots into consecutive chunks of at most `n_max`
/// dimensions, after ordering.
fn truncate_roots(
    roots: Vec<Vec<usize>>,
    attrs: &[(Attribute, AttributeStats)],
    n_max: usize,
) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for root in roots {
        let ordered = order_dims(&root, attrs);
        for chunk in ordered.chunks(n_max) {
            let mut c = chunk.to_vec();
            c.sort_unstable();
            out.push(c);
        }
    }
    subsume(out)
}

/// Builds one lattice with explicitly chosen dimensions and measures,
/// bypassing mining. Dimensions are reordered by the standard rule; specs
/// are numbered from zero.
pub fn single_lattice(
    cfs_key: &str,
    dims: Vec<(Attribute, AttributeStats)>,
    measures: Vec<Attribute>,
) -> (LatticeSpec, Vec<AggregateSpec>) {
    let attrs: Vec<(Attribute, AttributeStats)> = dims;
    let root: Vec<usize> = (0..attrs.len()).collect();
    let ordered = order_dims(&root, &attrs);
    let dims: Vec<Attribute> = ordered.iter().map(|&i| attrs[i].0.clone()).collect();
    let dim_stats: Vec<AttributeStats> = ordered.iter().map(|&i| attrs[i].1.clone()).collect();
    let mut specs = Vec::new();
    let mut registry = HashMap::new();
    let lattice = lattice_from_parts(cfs_key, dims, dim_stats, measures, &mut specs, &mut registry);
    (lattice, specs)
}

fn lattice_from_parts(
    cfs_key: &str,
    dims: Vec<Attribute>,
    dim_stats: Vec<AttributeStats>,
    measures: Vec<Attribute>,
    specs: &mut Vec<AggregateSpec>,
    registry: &mut HashMap<String, usize>,
) -> LatticeSpec {
    let n = dims.len();
    let mut node_specs: Vec<Vec<SpecRef>> = Vec::with_capacity(1 << n);
    for mask in 0u32..(1 << n) {
        let node_dims: Vec<String> = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| dims[i].name.clone())
            .collect();
        let mut refs = Vec::new();
        for m in &measures {
            let fns: &[AggFn] = if m.is_numeric() { &AggFn::NUMERIC } else { &AggFn::NON_NUMERIC };
            for &function in fns {
                let key = AggregateSpec::canonical_key(cfs_key, &node_dims, &m.name, function);
                match registry.get(&key) {
                    Some(&id) => refs.push(SpecRef { spec_id: id, owned: false }),
                    None => {
                        let id = specs.len();
                        specs.push(AggregateSpec {
                            id,
                            cfs: cfs_key.to_string(),
                            dims: node_dims.clone(),
                            measure: m.name.clone(),
                            function,
                        });
                        registry.insert(key, id);
                        refs.push(SpecRef { spec_id: id, owned: true });
                    }
                }
            }
        }
        node_specs.push(refs);
    }
    LatticeSpec { dims, dim_stats, measures, node_specs }
}

/// Builds the full plan for one CFS from its analyzed attributes.
pub fn build_plan(
    store: &TripleStore,
    cfs: &CandidateFactSet,
    attrs: &[(Attribute, AttributeStats)],
    cfg: &PlanConfig,
) -> Plan {
    let candidates = filter_dimensions(attrs, cfs.len(), cfg);
    let mined = mine_mfs(store, cfs, attrs, &candidates, cfg.min_support);
    let split = split_derivation_pairs(mined, attrs);
    let mut roots = truncate_roots(split, attrs, cfg.n_max);
    roots.sort_by_key(|r| {
        order_dims(r, attrs).iter().map(|&i| attrs[i].0.name.clone()).collect::<Vec<_>>()
    });

    let min_measure_support = cfg.min_support * cfs.len() as f64;
    let mut specs: Vec<AggregateSpec> = Vec::new();
    let mut registry: HashMap<String, usize> = HashMap::new();
    let mut lattices = Vec::new();
    for root in &roots {
        let ordered = order_dims(root, attrs);
        let dims: Vec<Attribute> = ordered.iter().map(|&i| attrs[i].0.clone()).collect();
        let dim_stats: Vec<AttributeStats> = ordered.iter().map(|&i| attrs[i].1.clone()).collect();
        let measures: Vec<Attribute> = attrs
            .iter()
            .filter(|(a, s)| {
                s.support as f64 >= min_measure_support
                    && !dims.iter().any(|d| d.name == a.name)
                    && !dims.iter().any(|d| d.conflicts_with(a))
            })
            .map(|(a, _)| a.clone())
            .collect();
        lattices.push(lattice_from_parts(
            &cfs.key,
            dims,
            dim_stats,
            measures,
            &mut specs,
            &mut registry,
        ));
    }
    Plan { cfs_key: cfs.key.clone(), lattices, specs }
}
