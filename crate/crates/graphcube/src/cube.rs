//! One-pass lattice evaluation over a partitioned cell array with bitmap
//! fact-identity propagation.
//!
//! Facts are translated into cells of an N-dimensional array (null gets
//! slot 0 of every dimension). Partitions of the array are scanned once in
//! row-major order, last dimension fastest; each root cell's fact bitmap
//! is projected into every other lattice node, and a node writes a region
//! of its buffer out as soon as the scan can no longer touch it. Because
//! every group's result is computed from a set of distinct fact ids, a
//! fact counts once per group no matter how many cells it occupied.

use crate::attrs::{Attribute, DimValue, PreAggTable};
use crate::bitmap::FactSet;
use crate::error::GraphCubeError;
use crate::graph::{FactId, TripleStore};
use crate::plan::{AggFn, LatticeSpec};
use crate::sample::Reservoir;
use crate::Result;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, HashMap, HashSet};

/// Value-to-slot mapping of one dimension. Slot 0 is reserved for null;
/// value k (in sorted order) gets slot k+1.
#[derive(Debug, Clone)]
pub struct DimensionEncoding {
    values: Vec<DimValue>,
    slots: HashMap<DimValue, u32>,
}

impl DimensionEncoding {
    pub fn from_values(mut values: Vec<DimValue>) -> Self {
        values.sort();
        values.dedup();
        let slots = values
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i as u32 + 1))
            .collect();
        DimensionEncoding { values, slots }
    }

    /// Total extent including the null slot.
    pub fn extent(&self) -> u64 {
        self.values.len() as u64 + 1
    }

    pub fn slot_of(&self, value: &DimValue) -> Option<u32> {
        self.slots.get(value).copied()
    }

    /// Lexical label of a slot; `None` is the null slot.
    pub fn label(&self, slot: u32) -> Option<&str> {
        if slot == 0 {
            None
        } else {
            Some(&self.values[slot as usize - 1].lexical)
        }
    }
}

/// Per-fact dimension values, ready for encoding.
pub type DimRows = Vec<(FactId, Vec<DimValue>)>;

/// Extracts a dimension's per-fact value sets in slot order.
pub fn dim_value_table(store: &TripleStore, members: &[FactId], attr: &Attribute) -> DimRows {
    crate::attrs::value_rows(store, members, attr)
        .into_iter()
        .map(|(f, terms)| {
            let mut vals: Vec<DimValue> = terms.iter().map(DimValue::of).collect();
            vals.sort();
            vals.dedup();
            (f, vals)
        })
        .collect()
}

/// Builds the encodings of all lattice dimensions.
pub fn build_encodings(dim_rows: &[DimRows]) -> Vec<DimensionEncoding> {
    dim_rows
        .iter()
        .map(|rows| {
            DimensionEncoding::from_values(
                rows.iter().flat_map(|(_, vs)| vs.iter().cloned()).collect(),
            )
        })
        .collect()
}

/// One node of the minimum memory spanning tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MmstNode {
    /// Dimension subset (bit i = lattice dimension i grouped on).
    pub mask: u32,
    /// Parent's mask; `None` for the root.
    pub parent: Option<u32>,
    /// Buffer cells this node may need at once under the scan order.
    pub buffer_cells: u64,
    /// Number of write-out events over the full scan.
    pub flush_events: u64,
}

/// Minimum memory spanning tree plus the partition extent it was sized for.
#[derive(Debug, Clone)]
pub struct Mmst {
    /// Indexed by node mask.
    pub nodes: Vec<MmstNode>,
    pub c: u64,
    /// Sum of all buffer allotments, root partition included.
    pub total_cells: u64,
}

fn node_cost(mask: u32, j: usize, extents: &[u64], part: &[u64]) -> u64 {
    (0..extents.len())
        .filter(|&i| mask >> i & 1 == 1)
        .map(|i| if i < j { part[i] } else { extents[i] })
        .product()
}

fn blocks_for(extents: &[u64], c: u64) -> (Vec<u64>, Vec<u64>) {
    let part: Vec<u64> = extents.iter().map(|&e| e.min(c)).collect();
    let blocks: Vec<u64> = extents.iter().zip(&part).map(|(&e, &p)| e.div_ceil(p)).collect();
    (part, blocks)
}

/// Chooses each node's computation parent to minimize buffer memory, then
/// checks the total against the budget, halving the partition extent as
/// long as the budget is exceeded.
pub fn build_mmst(extents: &[u64], c0: u64, budget: Option<u64>) -> Result<Mmst> {
    let n = extents.len();
    assert!(n >= 1 && n <= 30, "dimension count out of range");
    let mut c = c0.max(1);
    loop {
        let (part, blocks) = blocks_for(extents, c);
        let root_mask = (1u32 << n) - 1;
        let mut nodes = Vec::with_capacity(1 << n);
        let mut total: u64 = 0;
        for mask in 0u32..=root_mask {
            let (parent, buffer_cells) = if mask == root_mask {
                (None, part.iter().product())
            } else {
                // Candidate parents add one dimension j; later j puts more
                // of the node's dims inside the partition window, so cost
                // is minimized by the largest missing dimension. Scan all
                // candidates anyway and break ties toward the largest j.
                let best = (0..n)
                    .filter(|&j| mask >> j & 1 == 0)
                    .map(|j| (node_cost(mask, j, extents, &part), j))
                    .min_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
                    .expect("non-root node has a missing dimension");
                (Some(mask | (1 << best.1)), best.0)
            };
            let flush_events = (0..n)
                .filter(|&i| mask >> i & 1 == 1)
                .map(|i| blocks[i])
                .product();
            total += buffer_cells;
            nodes.push(MmstNode { mask, parent, buffer_cells, flush_events });
        }
        match budget {
            Some(b) if total > b => {
                if c == 1 {
                    return Err(GraphCubeError::Budget { budget: b, needed: total });
                }
                c /= 2;
            }
            _ => return Ok(Mmst { nodes, c, total_cells: total }),
        }
    }
}

/// Upper bound on total MMST cells for N equal extents of d distinct
/// values (d+1 with null) at partition extent c.
pub fn equal_extent_cell_bound(n: u32, d: u64, c: u64) -> u64 {
    c.pow(n) + (d + 1 + c).pow(n - 1)
}

/// The translated cell array of one lattice: partitioned (cell, fact)
/// pairs plus per-root-group reservoirs and counts.
#[derive(Debug, Clone)]
pub struct Translation {
    pub encodings: Vec<DimensionEncoding>,
    pub extents: Vec<u64>,
    /// Row-major strides, last dimension fastest.
    pub strides: Vec<u64>,
    pub c: u64,
    /// Per-dimension partition extents min(c, extent).
    pub part_extents: Vec<u64>,
    /// Per-dimension block counts.
    pub blocks: Vec<u64>,
    pub partition_count: u64,
    /// Per partition: (cell, fact) pairs sorted ascending, no duplicates.
    pub partitions: Vec<Vec<(u64, FactId)>>,
    /// Exact number of facts in each occupied root cell.
    pub group_counts: BTreeMap<u64, u64>,
    /// Uniform fact sample of each occupied root cell.
    pub reservoirs: BTreeMap<u64, Reservoir>,
    /// Fact-id universe bound for bitmap size accounting.
    pub universe: u32,
    /// Facts contributing at least one cell.
    pub included: usize,
    /// CFS facts with no value on any dimension, left out entirely.
    pub excluded: usize,
}

impl Translation {
    pub fn n(&self) -> usize {
        self.extents.len()
    }

    /// Slot vector of a cell index.
    pub fn decode(&self, cell: u64) -> Vec<u32> {
        (0..self.n())
            .map(|i| ((cell / self.strides[i]) % self.extents[i]) as u32)
            .collect()
    }

    /// Cell index of the slot vector restricted to `mask` (others null).
    pub fn project(&self, slots: &[u32], mask: u32) -> u64 {
        (0..self.n())
            .filter(|&i| mask >> i & 1 == 1)
            .map(|i| slots[i] as u64 * self.strides[i])
            .sum()
    }

    fn partition_of(&self, slots: &[u32]) -> u64 {
        let mut p = 0u64;
        for i in 0..self.n() {
            p = p * self.blocks[i] + slots[i] as u64 / self.part_extents[i];
        }
        p
    }

    /// Block coordinates of a partition index.
    pub fn partition_blocks(&self, t: u64) -> Vec<u64> {
        let mut coords = vec![0u64; self.n()];
        let mut rest = t;
        for i in (0..self.n()).rev() {
            coords[i] = rest % self.blocks[i];
            rest /= self.blocks[i];
        }
        coords
    }
}

fn strides_of(extents: &[u64]) -> Vec<u64> {
    let n = extents.len();
    let mut strides = vec![1u64; n];
    for i in (0..n.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * extents[i + 1];
    }
    strides
}

/// Translates facts into partitioned (cell, fact) pairs.
///
/// A fact maps to the cross product of its per-dimension slot sets, with
/// slot 0 standing in for a missing dimension; facts missing every
/// dimension are excluded. Streams each pair through the owning root
/// cell's reservoir.
pub fn translate(
    members: &[FactId],
    dim_rows: &[DimRows],
    encodings: Vec<DimensionEncoding>,
    c: u64,
    universe: u32,
    sample_capacity: usize,
    rng: &mut ChaCha8Rng,
) -> Translation {
    let n = encodings.len();
    let extents: Vec<u64> = encodings.iter().map(DimensionEncoding::extent).collect();
    let strides = strides_of(&extents);
    let (part_extents, blocks) = blocks_for(&extents, c);
    let partition_count: u64 = blocks.iter().product();

    // Per-dimension fact -> slot list.
    let slot_tables: Vec<HashMap<FactId, Vec<u32>>> = dim_rows
        .iter()
        .zip(&encodings)
        .map(|(rows, enc)| {
            rows.iter()
                .map(|(f, vals)| {
                    (*f, vals.iter().map(|v| enc.slot_of(v).expect("encoded value")).collect())
                })
                .collect()
        })
        .collect();

    let mut trans = Translation {
        encodings,
        extents,
        strides,
        c,
        part_extents,
        blocks,
        partition_count,
        partitions: vec![Vec::new(); partition_count as usize],
        group_counts: BTreeMap::new(),
        reservoirs: BTreeMap::new(),
        universe,
        included: 0,
        excluded: 0,
    };

    let null_slot = [0u32];
    let mut scratch = vec![0u32; n];
    for &f in members {
        let slot_sets: Vec<&[u32]> = (0..n)
            .map(|i| slot_tables[i].get(&f).map(Vec::as_slice).unwrap_or(&null_slot))
            .collect();
        if slot_sets.iter().all(|s| s == &null_slot) {
            trans.excluded += 1;
            continue;
        }
        trans.included += 1;
        // Odometer over the cross product of slot sets.
        let mut idx = vec![0usize; n];
        loop {
            for i in 0..n {
                scratch[i] = slot_sets[i][idx[i]];
            }
            let cell: u64 =
                scratch.iter().zip(&trans.strides).map(|(&s, &st)| s as u64 * st).sum();
            let t = trans.partition_of(&scratch);
            trans.partitions[t as usize].push((cell, f));
            *trans.group_counts.entry(cell).or_insert(0) += 1;
            trans
                .reservoirs
                .entry(cell)
                .or_insert_with(|| Reservoir::new(sample_capacity))
                .offer(f, rng);
            let mut dim = n;
            loop {
                if dim == 0 {
                    break;
                }
                dim -= 1;
                idx[dim] += 1;
                if idx[dim] < slot_sets[dim].len() {
                    break;
                }
                idx[dim] = 0;
            }
            if idx.iter().all(|&i| i == 0) {
                break;
            }
        }
    }
    for pairs in &mut trans.partitions {
        pairs.sort_unstable();
        debug_assert!(pairs.windows(2).all(|w| w[0] != w[1]), "duplicate (cell, fact) pair");
    }
    trans
}

/// One aggregate result row streamed out of the evaluator.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub spec_id: usize,
    /// Values of the node's dimensions in lattice order; None is null.
    pub dims: Vec<Option<String>>,
    pub value: f64,
    /// True when any dimension of the row is null; such rows feed children
    /// but are never scored.
    pub has_null: bool,
}

/// Scan instrumentation: verifies the one-pass property and the memory
/// bounds after the fact.
#[derive(Debug, Default, Clone)]
pub struct OnePassAudit {
    pub root_loads: Vec<u64>,
    /// Write-out events per node mask (root excluded).
    pub flush_counts: BTreeMap<u32, u64>,
    emitted: HashSet<(u32, u64)>,
    double_emit: Option<(u32, u64)>,
    live_cells: u64,
    pub peak_live_cells: u64,
    pub bitmap_checks: u64,
    pub bitmap_violations: u64,
    pub max_bitmap_bytes: usize,
}

impl OnePassAudit {
    pub fn record_root_load(&mut self, t: u64) {
        self.root_loads.push(t);
    }

    pub fn record_flush(&mut self, mask: u32) {
        *self.flush_counts.entry(mask).or_insert(0) += 1;
    }

    fn record_emit(&mut self, mask: u32, cell: u64) {
        if !self.emitted.insert((mask, cell)) {
            self.double_emit.get_or_insert((mask, cell));
        }
    }

    fn alloc_cells(&mut self, k: u64) {
        self.live_cells += k;
        self.peak_live_cells = self.peak_live_cells.max(self.live_cells);
    }

    fn free_cells(&mut self, k: u64) {
        self.live_cells -= k;
    }

    fn check_bitmap(&mut self, set: &FactSet, universe: u32) {
        let bytes = set.serialize().len();
        self.bitmap_checks += 1;
        self.max_bitmap_bytes = self.max_bitmap_bytes.max(bytes);
        if bytes > FactSet::serialized_bound(set.len(), universe as usize) {
            self.bitmap_violations += 1;
        }
    }

    /// Checks the one-pass property over `expected` partitions.
    pub fn verify(&self, expected: u64) -> Result<()> {
        let want: Vec<u64> = (0..expected).collect();
        if self.root_loads != want {
            return Err(GraphCubeError::Parse(format!(
                "one-pass violation: root loaded partitions {:?}, expected 0..{expected}",
                self.root_loads
            )));
        }
        if let Some((mask, cell)) = self.double_emit {
            return Err(GraphCubeError::Parse(format!(
                "one-pass violation: node {mask:#b} emitted cell {cell} twice"
            )));
        }
        if self.bitmap_violations > 0 {
            return Err(GraphCubeError::Parse(format!(
                "{} bitmaps exceeded the serialized size bound",
                self.bitmap_violations
            )));
        }
        Ok(())
    }
}

/// Evaluation switches.
#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    /// Serialize every emitted bitmap and check the size bound (slow).
    pub check_bitmaps: bool,
}

struct MeasureAcc {
    facts: u64,
    count: u64,
    sum: f64,
    min: f64,
    max: f64,
}

fn accumulate(bitmap: &FactSet, table: &PreAggTable) -> MeasureAcc {
    let mut acc =
        MeasureAcc { facts: 0, count: 0, sum: 0.0, min: f64::INFINITY, max: f64::NEG_INFINITY };
    // Ascending fact order keeps float accumulation canonical.
    for fact in bitmap.iter() {
        let Some(row) = table.row_for(fact) else { continue };
        acc.facts += 1;
        acc.count += row.count;
        acc.sum += row.sum;
        acc.min = acc.min.min(row.min);
        acc.max = acc.max.max(row.max);
    }
    acc
}

fn emit_cell(
    lattice: &LatticeSpec,
    trans: &Translation,
    preaggs: &HashMap<String, PreAggTable>,
    skip: &HashSet<usize>,
    mask: u32,
    cell: u64,
    bitmap: &FactSet,
    sink: &mut dyn FnMut(ResultRow),
    audit: &mut OnePassAudit,
    opts: &EvalOptions,
) {
    audit.record_emit(mask, cell);
    if opts.check_bitmaps {
        audit.check_bitmap(bitmap, trans.universe);
    }
    let slots = trans.decode(cell);
    let dims: Vec<Option<String>> = (0..lattice.n())
        .filter(|&i| mask >> i & 1 == 1)
        .map(|i| trans.encodings[i].label(slots[i]).map(str::to_string))
        .collect();
    let has_null = dims.iter().any(Option::is_none);
    let mut ref_idx = 0usize;
    let refs = &lattice.node_specs[mask as usize];
    for m in &lattice.measures {
        let fns: &[AggFn] = if m.is_numeric() { &AggFn::NUMERIC } else { &AggFn::NON_NUMERIC };
        let wanted = (0..fns.len()).any(|k| {
            let r = refs[ref_idx + k];
            r.owned && !skip.contains(&r.spec_id)
        });
        if !wanted {
            ref_idx += fns.len();
            continue;
        }
        let table = &preaggs[&m.name];
        let acc = accumulate(bitmap, table);
        if acc.facts == 0 {
            // No fact in the group carries this measure: no rows at all.
            ref_idx += fns.len();
            continue;
        }
        for &function in fns {
            let r = refs[ref_idx];
            ref_idx += 1;
            if !r.owned || skip.contains(&r.spec_id) {
                continue;
            }
            let value = match function {
                AggFn::Count => acc.facts as f64,
                AggFn::Sum => acc.sum,
                AggFn::Avg => acc.sum / acc.count as f64,
                AggFn::Min => acc.min,
                AggFn::Max => acc.max,
            };
            sink(ResultRow { spec_id: r.spec_id, dims: dims.clone(), value, has_null });
        }
    }
}

/// Evaluates every node of the lattice in one scan over the partitions.
///
/// Root cells are streamed one at a time: each cell's bitmap is unioned
/// into the projected cell of every other node, the root's own rows are
/// emitted, and the cell is dropped. After each partition, every node
/// whose unseen scan range no longer intersects one of its buffer regions
/// writes that region out and frees it.
pub fn evaluate(
    lattice: &LatticeSpec,
    trans: &Translation,
    preaggs: &HashMap<String, PreAggTable>,
    skip: &HashSet<usize>,
    sink: &mut dyn FnMut(ResultRow),
    opts: &EvalOptions,
) -> OnePassAudit {
    let n = lattice.n();
    assert_eq!(n, trans.n(), "lattice and translation dimension mismatch");
    let root_mask = lattice.root_mask();
    let mut audit = OnePassAudit::default();
    // Non-root buffers, keyed by projected cell index.
    let mut buffers: Vec<BTreeMap<u64, FactSet>> =
        (0..root_mask).map(|_| BTreeMap::new()).collect();
    // Children first by dimension count so parents flush after children
    // never matters: regions are disjoint per node; order is fixed for
    // deterministic output.
    let flush_order: Vec<u32> = {
        let mut masks: Vec<u32> = (0..root_mask).collect();
        masks.sort_by_key(|&m| (std::cmp::Reverse(m.count_ones()), m));
        masks
    };

    for t in 0..trans.partition_count {
        audit.record_root_load(t);
        let pairs = &trans.partitions[t as usize];
        let mut i = 0usize;
        while i < pairs.len() {
            let cell = pairs[i].0;
            let mut j = i;
            while j < pairs.len() && pairs[j].0 == cell {
                j += 1;
            }
            let ids: Vec<FactId> = pairs[i..j].iter().map(|&(_, f)| f).collect();
            let bitmap = FactSet::from_sorted(&ids);
            audit.alloc_cells(1);
            let slots = trans.decode(cell);
            for mask in 0..root_mask {
                let key = trans.project(&slots, mask);
                let buffer = &mut buffers[mask as usize];
                let is_new = !buffer.contains_key(&key);
                buffer.entry(key).or_insert_with(FactSet::new).union_in_place(&bitmap);
                if is_new {
                    audit.alloc_cells(1);
                }
            }
            emit_cell(
                lattice, trans, preaggs, skip, root_mask, cell, &bitmap, sink, &mut audit, opts,
            );
            audit.free_cells(1);
            i = j;
        }
        // Flush boundary: a node S writes out the region holding the
        // current S-blocks once every other dimension sits in its last
        // block, which is exactly when the region can no longer grow.
        let tb = trans.partition_blocks(t);
        for &mask in &flush_order {
            let ready = (0..n)
                .all(|m| mask >> m & 1 == 1 || tb[m] == trans.blocks[m] - 1);
            if !ready {
                continue;
            }
            audit.record_flush(mask);
            let buffer = &mut buffers[mask as usize];
            let region: Vec<u64> = buffer
                .keys()
                .copied()
                .filter(|&cell| {
                    let slots = trans.decode(cell);
                    (0..n).all(|i| {
                        mask >> i & 1 == 0
                            || slots[i] as u64 / trans.part_extents[i] == tb[i]
                    })
                })
                .collect();
            for cell in region {
                let bitmap = buffer.remove(&cell).expect("region cell present");
                emit_cell(
                    lattice, trans, preaggs, skip, mask, cell, &bitmap, sink, &mut audit, opts,
                );
                audit.free_cells(1);
            }
        }
    }
    debug_assert!(buffers.iter().all(BTreeMap::is_empty), "unflushed cells remain");
    audit
}
