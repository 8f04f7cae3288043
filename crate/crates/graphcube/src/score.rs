//! Result collection, scoring, top-k selection, and report rendering.
//!
//! The evaluator streams rows; the manager keeps the scorable ones per
//! spec, scores every spec over its group values, and renders the k best
//! into a report directory: `report.json`, one CSV of group rows and one
//! plot-ready `.dat` per winner, plus timing and, when an oracle ran,
//! error-distribution files.

use crate::cube::ResultRow;
use crate::plan::AggregateSpec;
use crate::stats::Interestingness;
use crate::Result;
use serde::Serialize;
use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

/// One scorable (fully non-null) group row of a spec.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredRow {
    pub dims: Vec<String>,
    pub value: f64,
}

/// Accumulates evaluator output per spec. Null-flagged rows are counted
/// and dropped: they exist for cube completeness, never for ranking.
#[derive(Debug, Default)]
pub struct ResultManager {
    rows: HashMap<usize, Vec<StoredRow>>,
    pub null_rows: u64,
    pub total_rows: u64,
}

impl ResultManager {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, row: ResultRow) {
        self.total_rows += 1;
        if row.has_null {
            self.null_rows += 1;
            return;
        }
        let dims = row.dims.into_iter().map(|d| d.expect("non-null row")).collect();
        self.rows
            .entry(row.spec_id)
            .or_default()
            .push(StoredRow { dims, value: row.value });
    }

    pub fn rows(&self, spec_id: usize) -> &[StoredRow] {
        self.rows.get(&spec_id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Scores one spec over its group values; `None` below two groups.
    pub fn score(&self, h: Interestingness, spec_id: usize) -> Option<Scored> {
        let rows = self.rows.get(&spec_id)?;
        if rows.len() < 2 {
            return None;
        }
        let values: Vec<f64> = rows.iter().map(|r| r.value).collect();
        let h_value = h.apply(&values)?;
        Some(Scored { spec_id, score: h.score_of(h_value), h_value, groups: rows.len() })
    }

    /// The k best specs by score, ties broken by canonical key so runs
    /// are reproducible.
    pub fn top_k(
        &self,
        h: Interestingness,
        k: usize,
        specs: &[AggregateSpec],
    ) -> Vec<Scored> {
        let mut scored: Vec<(Scored, String)> = specs
            .iter()
            .filter_map(|s| self.score(h, s.id).map(|sc| (sc, s.key())))
            .collect();
        scored.sort_by(|(a, ka), (b, kb)| {
            b.score.total_cmp(&a.score).then_with(|| ka.cmp(kb))
        });
        scored.into_iter().take(k).map(|(s, _)| s).collect()
    }
}

/// A spec's final score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub spec_id: usize,
    pub score: f64,
    /// Signed functional value (differs from score for skewness).
    pub h_value: f64,
    pub groups: usize,
}

#[derive(Serialize)]
struct ReportAggregate<'a> {
    rank: usize,
    cfs: &'a str,
    dims: &'a [String],
    measure: &'a str,
    function: &'a str,
    score: f64,
    h_value: f64,
    groups: usize,
    rows_file: String,
}

#[derive(Serialize)]
struct Report<'a> {
    k: usize,
    h: String,
    specs_total: usize,
    specs_pruned: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<&'a str>,
    aggregates: Vec<ReportAggregate<'a>>,
}

/// Everything the renderer needs.
pub struct RenderInputs<'a> {
    pub k: usize,
    pub h: Interestingness,
    pub specs: &'a [AggregateSpec],
    pub winners: &'a [Scored],
    pub manager: &'a ResultManager,
    pub specs_pruned: usize,
    /// (phase, seconds) pairs, written in order.
    pub timings: &'a [(String, f64)],
    /// Error ratio buckets, when an oracle comparison ran.
    pub error_buckets: Option<&'a [(String, u64)]>,
    /// Explanation for an empty result list, when there is one.
    pub reason: Option<&'a str>,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn sorted_rows(manager: &ResultManager, spec_id: usize) -> Vec<&StoredRow> {
    let mut rows: Vec<&StoredRow> = manager.rows(spec_id).iter().collect();
    rows.sort_by(|a, b| a.dims.cmp(&b.dims).then(a.value.total_cmp(&b.value)));
    rows
}

fn write_rows_csv(path: &Path, spec: &AggregateSpec, rows: &[&StoredRow]) -> Result<()> {
    let mut out = String::new();
    for d in &spec.dims {
        out.push_str(&csv_field(d));
        out.push(',');
    }
    out.push_str("value\n");
    for r in rows {
        for d in &r.dims {
            out.push_str(&csv_field(d));
            out.push(',');
        }
        out.push_str(&format!("{}\n", r.value));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Plot data: gnuplot-style for one and two dimensions, a flat table
/// beyond that.
fn write_plot_dat(path: &Path, spec: &AggregateSpec, rows: &[&StoredRow]) -> Result<()> {
    let mut out = String::new();
    match spec.dims.len() {
        1 => {
            out.push_str(&format!("# {} {}({})\n", spec.dims[0], spec.function, spec.measure));
            for r in rows {
                out.push_str(&format!("{} {}\n", r.dims[0].replace(' ', "_"), r.value));
            }
        }
        2 => {
            // Matrix: rows over the first dimension, columns the second.
            let mut cols: Vec<&str> = rows.iter().map(|r| r.dims[1].as_str()).collect();
            cols.sort_unstable();
            cols.dedup();
            let mut lines: Vec<&str> = rows.iter().map(|r| r.dims[0].as_str()).collect();
            lines.sort_unstable();
            lines.dedup();
            let lookup: HashMap<(&str, &str), f64> = rows
                .iter()
                .map(|r| ((r.dims[0].as_str(), r.dims[1].as_str()), r.value))
                .collect();
            out.push('#');
            for c in &cols {
                out.push(' ');
                out.push_str(&c.replace(' ', "_"));
            }
            out.push('\n');
            for l in &lines {
                out.push_str(&l.replace(' ', "_"));
                for c in &cols {
                    match lookup.get(&(*l, *c)) {
                        Some(v) => out.push_str(&format!(" {v}")),
                        None => out.push_str(" -"),
                    }
                }
                out.push('\n');
            }
        }
        _ => {
            out.push('#');
            for d in &spec.dims {
                out.push(' ');
                out.push_str(&d.replace(' ', "_"));
            }
            out.push_str(" value\n");
            for r in rows {
                for d in &r.dims {
                    out.push_str(&d.replace(' ', "_"));
                    out.push(' ');
                }
                out.push_str(&format!("{}\n", r.value));
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes the full report directory; returns the `report.json` path.
pub fn render(out_dir: &Path, inputs: &RenderInputs) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir.join("rows"))?;
    std::fs::create_dir_all(out_dir.join("plots"))?;
    let mut aggregates = Vec::with_capacity(inputs.winners.len());
    for (rank, w) in inputs.winners.iter().enumerate() {
        let spec = &inputs.specs[w.spec_id];
        let rows = sorted_rows(inputs.manager, w.spec_id);
        let rows_file = format!("rows/agg_{rank:03}.csv");
        write_rows_csv(&out_dir.join(&rows_file), spec, &rows)?;
        write_plot_dat(&out_dir.join(format!("plots/agg_{rank:03}.dat")), spec, &rows)?;
        aggregates.push(ReportAggregate {
            rank,
            cfs: &spec.cfs,
            dims: &spec.dims,
            measure: &spec.measure,
            function: spec.function.as_str(),
            score: w.score,
            h_value: w.h_value,
            groups: w.groups,
            rows_file,
        });
    }
    let report = Report {
        k: inputs.k,
        h: inputs.h.to_string(),
        specs_total: inputs.specs.len(),
        specs_pruned: inputs.specs_pruned,
        reason: inputs.reason,
        aggregates,
    };
    let path = out_dir.join("report.json");
    let mut file = std::fs::File::create(&path)?;
    serde_json::to_writer_pretty(&mut file, &report)?;
    file.write_all(b"\n")?;

    write_timing_csv(&out_dir.join("timing.csv"), inputs.timings)?;
    if let Some(buckets) = inputs.error_buckets {
        write_errors_csv(&out_dir.join("errors.csv"), buckets)?;
    }
    Ok(path)
}

/// Writes a `phase,seconds` timing table.
pub fn write_timing_csv(path: &Path, rows: &[(String, f64)]) -> Result<()> {
    let mut timing = String::from("phase,seconds\n");
    for (phase, secs) in rows {
        timing.push_str(&format!("{},{secs:.6}\n", csv_field(phase)));
    }
    std::fs::write(path, timing)?;
    Ok(())
}

/// Writes a `bucket,count` error-distribution table.
pub fn write_errors_csv(path: &Path, buckets: &[(String, u64)]) -> Result<()> {
    let mut err = String::from("bucket,count\n");
    for (bucket, count) in buckets {
        err.push_str(&format!("{},{count}\n", csv_field(bucket)));
    }
    std::fs::write(path, err)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::AggFn;

    fn row(spec_id: usize, dims: &[&str], value: f64) -> ResultRow {
        ResultRow {
            spec_id,
            dims: dims.iter().map(|d| Some(d.to_string())).collect(),
            value,
            has_null: false,
        }
    }

    fn null_row(spec_id: usize, value: f64) -> ResultRow {
        ResultRow { spec_id, dims: vec![None], value, has_null: true }
    }

    fn spec(id: usize, dims: &[&str], measure: &str, function: AggFn) -> AggregateSpec {
        AggregateSpec {
            id,
            cfs: "urn:T".into(),
            dims: dims.iter().map(|s| s.to_string()).collect(),
            measure: measure.into(),
            function,
        }
    }

    #[test]
    fn null_rows_never_score() {
        let mut mgr = ResultManager::new();
        mgr.add(row(0, &["a"], 1.0));
        mgr.add(row(0, &["b"], 5.0));
        mgr.add(null_row(0, 100.0));
        let s = mgr.score(Interestingness::Variance, 0).unwrap();
        assert_eq!(s.groups, 2);
        assert_eq!(s.score, 8.0);
        assert_eq!(mgr.null_rows, 1);
    }

    #[test]
    fn single_group_specs_are_unscorable() {
        let mut mgr = ResultManager::new();
        mgr.add(row(3, &["only"], 7.0));
        assert!(mgr.score(Interestingness::Variance, 3).is_none());
    }

    #[test]
    fn top_k_orders_by_score_then_key() {
        let specs = vec![
            spec(0, &["d1"], "m", AggFn::Sum),
            spec(1, &["d2"], "m", AggFn::Sum),
            spec(2, &["d3"], "m", AggFn::Sum),
        ];
        let mut mgr = ResultManager::new();
        // Spec 0 and 2 tie on variance 8; spec 1 wins with 50.
        for (id, scale) in [(0usize, 1.0), (1, 2.5), (2, 1.0)] {
            mgr.add(row(id, &["x"], 1.0 * scale));
            mgr.add(row(id, &["y"], 5.0 * scale));
        }
        let top = mgr.top_k(Interestingness::Variance, 2, &specs);
        assert_eq!(top.len(), 2);
        assert_eq!(top[0].spec_id, 1);
        // Tie resolved by canonical key: d1 sorts before d3.
        assert_eq!(top[1].spec_id, 0);
    }

    #[test]
    fn skew_ranks_by_magnitude_but_reports_sign() {
        let specs = vec![spec(0, &["d"], "m", AggFn::Sum), spec(1, &["e"], "m", AggFn::Sum)];
        let mut mgr = ResultManager::new();
        // Spec 0 has a long low tail (hard negative skew), spec 1 a long
        // high tail (mildly positive skew).
        for (i, v) in [0.0, 9.0, 10.0, 10.0, 10.0].into_iter().enumerate() {
            mgr.add(row(0, &[&format!("g{i}")], v));
        }
        for (i, v) in [0.0, 1.0, 2.0, 3.0, 10.0].into_iter().enumerate() {
            mgr.add(row(1, &[&format!("h{i}")], v));
        }
        let top = mgr.top_k(Interestingness::Skewness, 2, &specs);
        assert_eq!(top[0].spec_id, 0);
        assert!(top[0].h_value < 0.0);
        assert!(top[0].score > 0.0);
        assert_eq!(top[0].score, -top[0].h_value);
    }

    #[test]
    fn render_writes_the_report_tree() {
        let dir = tempfile::tempdir().unwrap();
        let specs = vec![
            spec(0, &["d1"], "m", AggFn::Sum),
            spec(1, &["d1", "d2"], "m", AggFn::Avg),
        ];
        let mut mgr = ResultManager::new();
        mgr.add(row(0, &["x"], 1.0));
        mgr.add(row(0, &["y, comma"], 5.0));
        mgr.add(row(1, &["x", "p"], 2.0));
        mgr.add(row(1, &["y", "q"], 4.0));
        let winners = mgr.top_k(Interestingness::Variance, 2, &specs);
        let path = render(
            dir.path(),
            &RenderInputs {
                k: 2,
                h: Interestingness::Variance,
                specs: &specs,
                winners: &winners,
                manager: &mgr,
                specs_pruned: 0,
                timings: &[("translate".into(), 0.5), ("evaluate".into(), 1.25)],
                error_buckets: None,
                reason: None,
            },
        )
        .unwrap();
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(report["k"], 2);
        assert_eq!(report["aggregates"].as_array().unwrap().len(), 2);
        let first = &report["aggregates"][0];
        assert_eq!(first["rows_file"], "rows/agg_000.csv");
        let csv =
            std::fs::read_to_string(dir.path().join("rows/agg_000.csv")).unwrap();
        assert!(csv.starts_with("d1,value\n"));
        assert!(csv.contains("\"y, comma\",5\n"), "csv was:\n{csv}");
        let dat =
            std::fs::read_to_string(dir.path().join("plots/agg_001.dat")).unwrap();
        assert!(dat.starts_with("#"), "matrix header, got:\n{dat}");
        let timing = std::fs::read_to_string(dir.path().join("timing.csv")).unwrap();
        assert!(timing.contains("evaluate,1.250000"));
        assert!(!dir.path().join("errors.csv").exists());
    }
}
