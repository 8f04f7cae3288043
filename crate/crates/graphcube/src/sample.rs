//! Reservoir sampling and probabilistic early stopping.
//!
//! Every occupied root cell keeps a fixed-size uniform sample of its
//! facts, filled during translation. Before the exact scan, each spec's
//! interestingness is bracketed from the samples in cumulative batches;
//! a spec whose upper bound falls below the k-th best lower bound cannot
//! reach the top k and is dropped from evaluation.

use crate::attrs::PreAggTable;
use crate::cube::Translation;
use crate::graph::FactId;
use crate::plan::{AggFn, LatticeSpec};
use crate::stats::{delta_ci, Interestingness};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

/// Fixed-capacity uniform sample of a fact stream (Algorithm R).
#[derive(Debug, Clone)]
pub struct Reservoir {
    cap: usize,
    seen: u64,
    items: Vec<FactId>,
}

impl Reservoir {
    pub fn new(cap: usize) -> Self {
        Reservoir { cap: cap.max(1), seen: 0, items: Vec::new() }
    }

    /// Offers one stream element; each element of the stream ends up in
    /// the reservoir with equal probability cap/seen.
    pub fn offer(&mut self, fact: FactId, rng: &mut ChaCha8Rng) {
        self.seen += 1;
        if self.items.len() < self.cap {
            self.items.push(fact);
        } else {
            let j = rng.gen_range(0..self.seen);
            if (j as usize) < self.cap {
                self.items[j as usize] = fact;
            }
        }
    }

    /// Total elements offered, the exact size of the sampled stream.
    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn items(&self) -> &[FactId] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Sample of one non-null group of a lattice node.
#[derive(Debug, Clone)]
pub struct GroupSample {
    /// Global cell index of the group (non-node dimensions nulled).
    pub cell: u64,
    /// Estimated group size: the summed fact counts of the root cells
    /// projecting here. Facts occupying several of those root cells are
    /// counted once per cell, so this overestimates multi-valued groups.
    pub c_hat: u64,
    /// Deduplicated union of the root-cell reservoirs, shuffled so that
    /// prefixes form uniform subsamples.
    pub facts: Vec<FactId>,
}

/// Projects the root-cell reservoirs onto one lattice node. Groups that
/// are null in any of the node's dimensions are not returned: null rows
/// are never scored, so they need no estimate.
pub fn node_samples(trans: &Translation, mask: u32, rng: &mut ChaCha8Rng) -> Vec<GroupSample> {
    let n = trans.n();
    let mut acc: BTreeMap<u64, (u64, BTreeSet<FactId>)> = BTreeMap::new();
    for (&cell, &count) in &trans.group_counts {
        let slots = trans.decode(cell);
        if (0..n).any(|i| mask >> i & 1 == 1 && slots[i] == 0) {
            continue;
        }
        let key = trans.project(&slots, mask);
        let entry = acc.entry(key).or_default();
        entry.0 += count;
        entry.1.extend(trans.reservoirs[&cell].items().iter().copied());
    }
    acc.into_iter()
        .map(|(cell, (c_hat, facts))| {
            let mut facts: Vec<FactId> = facts.into_iter().collect();
            facts.shuffle(rng);
            GroupSample { cell, c_hat, facts }
        })
        .collect()
}

/// Early-stop tunables.
#[derive(Debug, Clone)]
pub struct EarlyStopConfig {
    /// Reservoir capacity per root cell.
    pub sample: usize,
    /// Samples consumed per group per batch.
    pub batch: usize,
    /// Number of cumulative batches before giving up on further pruning.
    pub batches: usize,
    /// Two-sided miss probability of each interval.
    pub alpha: f64,
    /// Consecutive batches without a prune before stopping early.
    pub max_idle: usize,
}

impl Default for EarlyStopConfig {
    fn default() -> Self {
        EarlyStopConfig { sample: 60, batch: 30, batches: 2, alpha: 0.05, max_idle: 1 }
    }
}

fn mean_and_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (m, 0.0);
    }
    let v = values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Brackets one spec's interestingness from group samples, consuming the
/// first `prefix` facts of each group. Returns `None` when no sound or
/// useful bound exists (too few usable samples, or an estimator and
/// measure combination with no interval form); such specs are never
/// pruned.
pub fn spec_interval(
    h: Interestingness,
    function: AggFn,
    groups: &[GroupSample],
    prefix: usize,
    preagg: &PreAggTable,
    alpha: f64,
) -> Option<(f64, f64)> {
    if groups.len() < 2 {
        return None;
    }
    match function {
        AggFn::Avg | AggFn::Sum | AggFn::Count => {
            let mut z = Vec::with_capacity(groups.len());
            let mut se2 = Vec::with_capacity(groups.len());
            for g in groups {
                let take = prefix.min(g.facts.len());
                // A single sampled fact only carries weight when it IS the
                // whole group; an undersampled larger group leaves the
                // spec unbounded rather than feigning certainty.
                if take == 0 || (take < 2 && g.c_hat >= 2) {
                    return None;
                }
                let facts = &g.facts[..take];
                match function {
                    AggFn::Avg => {
                        // The group's value-weighted average is estimated
                        // by the mean of per-fact averages.
                        let values: Vec<f64> = facts
                            .iter()
                            .filter_map(|&f| preagg.row_for(f))
                            .map(|r| r.sum / r.count as f64)
                            .collect();
                        if values.is_empty() || (values.len() < 2 && g.c_hat >= 2) {
                            return None;
                        }
                        let (m, v) = mean_and_var(&values);
                        z.push(m);
                        se2.push(v / values.len() as f64);
                    }
                    _ => {
                        // Sum scales the per-fact mean contribution by the
                        // group size estimate; count is the same machinery
                        // over facts carrying the measure at all.
                        let values: Vec<f64> = facts
                            .iter()
                            .map(|&f| match preagg.row_for(f) {
                                Some(_) if function == AggFn::Count => 1.0,
                                Some(r) => r.sum,
                                None => 0.0,
                            })
                            .collect();
                        let (m, v) = mean_and_var(&values);
                        let c = g.c_hat as f64;
                        z.push(c * m);
                        se2.push(c * c * v / take as f64);
                    }
                }
            }
            let point = h.apply(&z)?;
            let grad = h.gradient(&z)?;
            let ci = delta_ci(point, &grad, &se2, alpha);
            let lo = if h == Interestingness::Variance { ci.lo.max(0.0) } else { ci.lo };
            Some((lo, ci.hi))
        }
        AggFn::Min | AggFn::Max => {
            // A sampled extremum is one-sidedly wrong, so the delta method
            // does not apply. For variance a deterministic bracket exists:
            // the true group value lies between the sampled one and the
            // global extremum b, and the root of the variance is a
            // seminorm, so the per-group error vector bounds its shift.
            if h != Interestingness::Variance {
                return None;
            }
            let b = if function == AggFn::Min {
                preagg.global_min()?
            } else {
                preagg.global_max()?
            };
            let mut z = Vec::with_capacity(groups.len());
            for g in groups {
                let take = prefix.min(g.facts.len());
                let vals: Vec<f64> = g.facts[..take]
                    .iter()
                    .filter_map(|&f| preagg.row_for(f))
                    .map(|r| if function == AggFn::Min { r.min } else { r.max })
                    .collect();
                if vals.is_empty() {
                    return None;
                }
                z.push(if function == AggFn::Min {
                    vals.iter().copied().fold(f64::INFINITY, f64::min)
                } else {
                    vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                });
            }
            let hvar = h.apply(&z)?;
            let gm1 = (groups.len() - 1) as f64;
            let err = (z.iter().map(|&v| (v - b) * (v - b)).sum::<f64>() / gm1).sqrt();
            let s = hvar.max(0.0).sqrt();
            let lo = (s - err).max(0.0);
            Some((lo * lo, (s + err) * (s + err)))
        }
    }
}

/// Maps an interestingness interval to a score interval. Skewness is
/// ranked by magnitude, so an interval straddling zero folds over.
pub fn score_interval(h: Interestingness, lo: f64, hi: f64) -> (f64, f64) {
    if h != Interestingness::Skewness {
        return (lo, hi);
    }
    if lo >= 0.0 {
        (lo, hi)
    } else if hi <= 0.0 {
        (-hi, -lo)
    } else {
        (0.0, hi.max(-lo))
    }
}

/// One spec's bracket in one batch, for the trace file.
#[derive(Debug, Clone)]
pub struct TraceRow {
    /// Zero for the pre-batch degenerate sweep.
    pub batch: usize,
    pub spec_id: usize,
    pub lo: f64,
    pub hi: f64,
    /// The k-th best lower bound this batch compared against.
    pub bar: f64,
    pub pruned: bool,
}

#[derive(Debug, Default)]
pub struct PruneOutcome {
    /// Spec ids that cannot reach the top k.
    pub skip: HashSet<usize>,
    pub trace: Vec<TraceRow>,
    pub batches_run: usize,
    /// Specs dropped for having fewer than two non-null groups.
    pub degenerate: usize,
}

struct Probe {
    spec_id: usize,
    lattice: usize,
    mask: u32,
    function: AggFn,
    measure: String,
}

/// Runs the batched prune loop over every owned spec of the given
/// lattices (all over one fact set, sharing `preaggs`).
pub fn prune_specs(
    lattices: &[(&LatticeSpec, &Translation)],
    preaggs: &HashMap<String, PreAggTable>,
    h: Interestingness,
    k: usize,
    cfg: &EarlyStopConfig,
    rng: &mut ChaCha8Rng,
) -> PruneOutcome {
    let mut samples: HashMap<(usize, u32), Vec<GroupSample>> = HashMap::new();
    let mut probes: Vec<Probe> = Vec::new();
    for (li, (lattice, trans)) in lattices.iter().enumerate() {
        for mask in 0..(1u32 << lattice.n()) {
            let refs = &lattice.node_specs[mask as usize];
            if !refs.iter().any(|r| r.owned) {
                continue;
            }
            samples.insert((li, mask), node_samples(trans, mask, rng));
            let mut idx = 0usize;
            for m in &lattice.measures {
                let fns: &[AggFn] =
                    if m.is_numeric() { &AggFn::NUMERIC } else { &AggFn::NON_NUMERIC };
                for &function in fns {
                    let r = refs[idx];
                    idx += 1;
                    if r.owned {
                        probes.push(Probe {
                            spec_id: r.spec_id,
                            lattice: li,
                            mask,
                            function,
                            measure: m.name.clone(),
                        });
                    }
                }
            }
        }
    }

    let mut out = PruneOutcome::default();
    // Degenerate sweep: a node with fewer than two non-null groups has no
    // spread to measure; its specs can never be scored, let alone ranked.
    for p in &probes {
        if samples[&(p.lattice, p.mask)].len() < 2 {
            out.skip.insert(p.spec_id);
            out.degenerate += 1;
            out.trace.push(TraceRow {
                batch: 0,
                spec_id: p.spec_id,
                lo: f64::NAN,
                hi: f64::NAN,
                bar: f64::NAN,
                pruned: true,
            });
        }
    }

    let mut idle = 0usize;
    for batch in 1..=cfg.batches {
        out.batches_run = batch;
        let prefix = batch * cfg.batch;
        let mut intervals: Vec<Option<(f64, f64)>> = Vec::with_capacity(probes.len());
        for p in &probes {
            if out.skip.contains(&p.spec_id) {
                intervals.push(None);
                continue;
            }
            let bracket = spec_interval(
                h,
                p.function,
                &samples[&(p.lattice, p.mask)],
                prefix,
                &preaggs[&p.measure],
                cfg.alpha,
            )
            .map(|(lo, hi)| score_interval(h, lo, hi));
            intervals.push(bracket);
        }
        let mut lows: Vec<f64> = intervals.iter().flatten().map(|&(lo, _)| lo).collect();
        lows.sort_by(|a, b| b.total_cmp(a));
        let bar = if lows.len() >= k && k > 0 { lows[k - 1] } else { f64::NEG_INFINITY };
        let mut pruned_now = 0usize;
        for (p, bracket) in probes.iter().zip(&intervals) {
            if out.skip.contains(&p.spec_id) {
                continue;
            }
            let (lo, hi) = bracket.unwrap_or((f64::NAN, f64::NAN));
            let prune = hi < bar;
            if prune {
                out.skip.insert(p.spec_id);
                pruned_now += 1;
            }
            out.trace.push(TraceRow { batch, spec_id: p.spec_id, lo, hi, bar, pruned: prune });
        }
        idle = if pruned_now == 0 { idle + 1 } else { 0 };
        if idle >= cfg.max_idle {
            break;
        }
    }
    out
}
