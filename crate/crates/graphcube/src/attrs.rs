//! Attribute analysis: direct and derived properties of a candidate fact
//! set, their statistics, and per-fact pre-aggregated measure tables.
//!
//! Derived attributes synthesize values that are not literally in the
//! graph: value counts of multi-valued properties, keywords and language
//! tags of text properties, and two-property paths. All value extraction
//! goes through [`value_rows`] / [`values_for`], which return each fact's
//! values in one canonical order (term order) so that floating-point
//! accumulation is reproducible everywhere.

use crate::graph::{CandidateFactSet, FactId, Term, TripleStore, ValueKind};
use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};

/// How an attribute's values are obtained.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttrKind {
    /// Objects of one property.
    Direct,
    /// Number of values of a property per fact.
    Count,
    /// Tokens of a text property's values.
    Keywords,
    /// Language of a text property, tagged or classified.
    Language,
    /// Objects reached through two properties, `p/q`.
    Path,
}

/// Coarse value class of an attribute, decided by majority over the CFS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum AttrValueKind {
    Numeric,
    Date,
    Text,
}

/// An analyzable attribute of a candidate fact set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    /// Display name, unique within a CFS (e.g. `nationality`,
    /// `count(company)`, `kwInDescription`, `company/area`).
    pub name: String,
    pub kind: AttrKind,
    /// Source property IRIs: one, or two for paths.
    pub sources: Vec<String>,
    pub value_kind: AttrValueKind,
}

impl Attribute {
    pub fn direct(name: impl Into<String>, iri: impl Into<String>, vk: AttrValueKind) -> Self {
        Attribute {
            name: name.into(),
            kind: AttrKind::Direct,
            sources: vec![iri.into()],
            value_kind: vk,
        }
    }

    pub fn is_numeric(&self) -> bool {
        self.value_kind == AttrValueKind::Numeric
    }

    /// True when the two attributes involve a common source property;
    /// such pairs may not serve as dimension and measure of one lattice.
    pub fn conflicts_with(&self, other: &Attribute) -> bool {
        self.sources.iter().any(|s| other.sources.contains(s))
    }
}

/// Per-CFS statistics of one attribute.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AttributeStats {
    /// Facts with at least one value.
    pub support: usize,
    /// Facts with at least two values.
    pub multi_count: usize,
    /// Distinct values across the CFS.
    pub distinct: usize,
    /// Smallest numeric value, when any value parses as a number.
    pub min: Option<f64>,
    /// Largest numeric value.
    pub max: Option<f64>,
}

/// A dimension value: literal identity is (kind, lexical), ignoring
/// language tags. Ordering is numeric-aware so that "9" sorts before "10"
/// on numeric attributes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DimValue {
    pub kind: ValueKind,
    pub lexical: String,
}

impl DimValue {
    pub fn of(term: &Term) -> Self {
        DimValue {
            kind: term.kind(),
            lexical: term.lexical().to_string(),
        }
    }

    fn class_rank(&self) -> u8 {
        match self.kind {
            ValueKind::Integer | ValueKind::Decimal => 0,
            ValueKind::Date => 1,
            ValueKind::Str => 2,
        }
    }
}

impl Ord for DimValue {
    fn cmp(&self, other: &Self) -> Ordering {
        self.class_rank()
            .cmp(&other.class_rank())
            .then_with(|| {
                if self.class_rank() == 0 {
                    let a: Option<f64> = self.lexical.parse().ok().filter(|v: &f64| !v.is_nan());
                    let b: Option<f64> = other.lexical.parse().ok().filter(|v: &f64| !v.is_nan());
                    match (a, b) {
                        (Some(x), Some(y)) => x.partial_cmp(&y).unwrap_or(Ordering::Equal),
                        _ => Ordering::Equal,
                    }
                } else {
                    Ordering::Equal
                }
            })
            .then_with(|| self.lexical.cmp(&other.lexical))
            .then_with(|| self.kind.cmp(&other.kind))
    }
}

impl PartialOrd for DimValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Last path segment of an IRI, used as a display name. Splits on the
/// fragment, path, and URN separators so `urn:gen:d0` shortens to `d0`.
pub fn local_name(iri: &str) -> &str {
    let candidate = iri.rsplit(['#', '/', ':']).next().unwrap_or(iri);
    if candidate.is_empty() {
        iri
    } else {
        candidate
    }
}

fn fact_rows<'a>(rows: &'a [(FactId, Term)], fact: FactId) -> &'a [(FactId, Term)] {
    let lo = rows.partition_point(|(f, _)| *f < fact);
    let hi = rows.partition_point(|(f, _)| *f <= fact);
    &rows[lo..hi]
}

fn direct_values(rows: &[(FactId, Term)], fact: FactId) -> Vec<Term> {
    // Blank nodes have graph-local identity and never act as values.
    fact_rows(rows, fact)
        .iter()
        .filter(|(_, t)| !matches!(t, Term::Blank(_)))
        .map(|(_, t)| t.clone())
        .collect()
}

/// Values of `attr` for one fact, in canonical (term) order.
pub fn values_for(store: &TripleStore, attr: &Attribute, fact: FactId) -> Vec<Term> {
    match attr.kind {
        AttrKind::Direct => direct_values(store.property_rows(&attr.sources[0]), fact),
        AttrKind::Count => {
            let n = direct_values(store.property_rows(&attr.sources[0]), fact).len();
            if n == 0 {
                Vec::new()
            } else {
                vec![Term::literal(n.to_string(), ValueKind::Integer)]
            }
        }
        AttrKind::Keywords => {
            let mut tokens: Vec<Term> = Vec::new();
            for term in direct_values(store.property_rows(&attr.sources[0]), fact) {
                if let Term::Literal { lexical, kind: ValueKind::Str, .. } = term {
                    tokens.extend(
                        keyword_tokens(&lexical, KEYWORD_STOPLIST)
                            .into_iter()
                            .map(|w| Term::literal(w, ValueKind::Str)),
                    );
                }
            }
            tokens.sort();
            tokens.dedup();
            tokens
        }
        AttrKind::Language => {
            let values = direct_values(store.property_rows(&attr.sources[0]), fact);
            let Some(first) = values.first() else { return Vec::new() };
            let lang = match first {
                Term::Literal { lang: Some(tag), .. } => primary_language_tag(tag),
                other => classify_language(other.lexical()).to_string(),
            };
            vec![Term::literal(lang, ValueKind::Str)]
        }
        AttrKind::Path => {
            let p_rows = store.property_rows(&attr.sources[0]);
            let q_rows = store.property_rows(&attr.sources[1]);
            let mut out: Vec<Term> = Vec::new();
            for (_, mid) in fact_rows(p_rows, fact) {
                if let Some(mid_id) = store.subject_id(mid.lexical()) {
                    out.extend(direct_values(q_rows, mid_id));
                }
            }
            out.sort();
            out.dedup();
            out
        }
    }
}

/// Values of `attr` for every CFS member that has any, sorted by fact id.
pub fn value_rows(
    store: &TripleStore,
    members: &[FactId],
    attr: &Attribute,
) -> Vec<(FactId, Vec<Term>)> {
    let mut out = Vec::new();
    for &f in members {
        let vals = values_for(store, attr, f);
        if !vals.is_empty() {
            out.push((f, vals));
        }
    }
    out
}

/// Exact per-CFS statistics of one attribute.
pub fn analyze_attribute(
    store: &TripleStore,
    cfs: &CandidateFactSet,
    attr: &Attribute,
) -> AttributeStats {
    let mut support = 0usize;
    let mut multi = 0usize;
    let mut distinct: HashSet<DimValue> = HashSet::new();
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for (_, vals) in value_rows(store, &cfs.members, attr) {
        support += 1;
        if vals.len() >= 2 {
            multi += 1;
        }
        for v in &vals {
            if let Some(x) = v.as_f64() {
                min = min.min(x);
                max = max.max(x);
            }
            distinct.insert(DimValue::of(v));
        }
    }
    AttributeStats {
        support,
        multi_count: multi,
        distinct: distinct.len(),
        min: (min != f64::INFINITY).then_some(min),
        max: (max != f64::NEG_INFINITY).then_some(max),
    }
}

/// Settings for attribute enumeration.
#[derive(Debug, Clone)]
pub struct EnumerationConfig {
    /// Synthesize derived attributes at all.
    pub derivations: bool,
    /// Minimum average value length for the keyword derivation.
    pub kw_min_avg_len: f64,
    /// Minimum support fraction for path attributes.
    pub path_min_support: f64,
}

impl Default for EnumerationConfig {
    fn default() -> Self {
        EnumerationConfig {
            derivations: true,
            kw_min_avg_len: 20.0,
            path_min_support: 0.1,
        }
    }
}

fn cap_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// Majority value class of the observed values; ties resolve to Text.
fn majority_kind(values: impl Iterator<Item = ValueKind>) -> AttrValueKind {
    let (mut numeric, mut date, mut text) = (0usize, 0usize, 0usize);
    for k in values {
        match k {
            ValueKind::Integer | ValueKind::Decimal => numeric += 1,
            ValueKind::Date => date += 1,
            ValueKind::Str => text += 1,
        }
    }
    if numeric > date + text {
        AttrValueKind::Numeric
    } else if date > numeric + text {
        AttrValueKind::Date
    } else {
        AttrValueKind::Text
    }
}

/// Enumerates direct attributes and, when enabled, their derivations, with
/// statistics. Only attributes with support ≥ 1 on the CFS are returned.
pub fn enumerate_attributes(
    store: &TripleStore,
    cfs: &CandidateFactSet,
    cfg: &EnumerationConfig,
) -> Vec<(Attribute, AttributeStats)> {
    let mut used_names: HashSet<String> = HashSet::new();
    let mut claim = |preferred: String, fallback: String| -> String {
        let name = if used_names.contains(&preferred) { fallback } else { preferred };
        used_names.insert(name.clone());
        name
    };
    let mut out: Vec<(Attribute, AttributeStats)> = Vec::new();
    let props: Vec<String> = store.properties().map(str::to_string).collect();

    // Direct attributes, in property IRI order.
    let mut direct_of: BTreeMap<String, usize> = BTreeMap::new();
    for p in &props {
        let rows = value_rows(store, &cfs.members, &Attribute::direct("", p, AttrValueKind::Text));
        if rows.is_empty() {
            continue;
        }
        let vk = majority_kind(rows.iter().flat_map(|(_, vs)| vs.iter().map(Term::kind)));
        let name = claim(local_name(p).to_string(), p.clone());
        let attr = Attribute::direct(name, p.clone(), vk);
        let stats = analyze_attribute(store, cfs, &attr);
        direct_of.insert(p.clone(), out.len());
        out.push((attr, stats));
    }
    if !cfg.derivations {
        return out;
    }

    // Derivations of each direct attribute, in the same property order.
    let n_direct = out.len();
    for i in 0..n_direct {
        let (base, stats) = (out[i].0.clone(), out[i].1.clone());
        let p = base.sources[0].clone();
        if stats.multi_count > 0 {
            let name = claim(format!("count({})", base.name), format!("count({p})"));
            let attr = Attribute {
                name,
                kind: AttrKind::Count,
                sources: vec![p.clone()],
                value_kind: AttrValueKind::Numeric,
            };
            let stats = analyze_attribute(store, cfs, &attr);
            out.push((attr, stats));
        }
        if base.value_kind == AttrValueKind::Text {
            let rows = value_rows(store, &cfs.members, &base);
            let (mut total_len, mut n_vals) = (0usize, 0usize);
            let mut any_str = false;
            for (_, vs) in &rows {
                for v in vs {
                    if matches!(v, Term::Literal { kind: ValueKind::Str, .. }) {
                        any_str = true;
                        total_len += v.lexical().chars().count();
                        n_vals += 1;
                    }
                }
            }
            if any_str && n_vals > 0 && total_len as f64 / n_vals as f64 >= cfg.kw_min_avg_len {
                let name = claim(format!("kwIn{}", cap_first(&base.name)), format!("kwIn({p})"));
                let attr = Attribute {
                    name,
                    kind: AttrKind::Keywords,
                    sources: vec![p.clone()],
                    value_kind: AttrValueKind::Text,
                };
                let stats = analyze_attribute(store, cfs, &attr);
                if stats.support > 0 {
                    out.push((attr, stats));
                }
            }
            if any_str {
                let name = claim(format!("langOf{}", cap_first(&base.name)), format!("langOf({p})"));
                let attr = Attribute {
                    name,
                    kind: AttrKind::Language,
                    sources: vec![p.clone()],
                    value_kind: AttrValueKind::Text,
                };
                let stats = analyze_attribute(store, cfs, &attr);
                if stats.support > 0 {
                    out.push((attr, stats));
                }
            }
        }
    }

    // Two-property paths p/q where some p-object carries property q.
    let min_path_support = (cfg.path_min_support * cfs.len() as f64).ceil().max(1.0) as usize;
    for p in &props {
        // Distinct q-properties reachable through p from CFS members.
        let mut mids: Vec<FactId> = Vec::new();
        for &f in &cfs.members {
            for (_, obj) in fact_rows(store.property_rows(p), f) {
                if let Some(mid) = store.subject_id(obj.lexical()) {
                    mids.push(mid);
                }
            }
        }
        mids.sort_unstable();
        mids.dedup();
        if mids.is_empty() {
            continue;
        }
        for q in &props {
            let q_rows = store.property_rows(q);
            if !mids.iter().any(|&m| !fact_rows(q_rows, m).is_empty()) {
                continue;
            }
            let pl = local_name(p);
            let ql = local_name(q);
            let candidate = Attribute {
                name: format!("{pl}/{ql}"),
                kind: AttrKind::Path,
                sources: vec![p.clone(), q.clone()],
                value_kind: AttrValueKind::Text,
            };
            let rows = value_rows(store, &cfs.members, &candidate);
            if rows.len() < min_path_support {
                continue;
            }
            let vk = majority_kind(rows.iter().flat_map(|(_, vs)| vs.iter().map(Term::kind)));
            let name = claim(format!("{pl}/{ql}"), format!("{p}/{q}"));
            let attr = Attribute { name, value_kind: vk, ..candidate };
            let stats = analyze_attribute(store, cfs, &attr);
            out.push((attr, stats));
        }
    }
    out
}

/// Per-fact pre-aggregated values of one measure attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct PreAggRow {
    pub fact: FactId,
    /// Number of values of the attribute on this fact.
    pub count: u64,
    /// Sum / min / max of the fact's own values; zero for non-numeric attrs.
    pub sum: f64,
    pub min: f64,
    pub max: f64,
}

/// Measure table shared by every lattice that aggregates the attribute.
#[derive(Debug, Clone)]
pub struct PreAggTable {
    pub attr: String,
    pub numeric: bool,
    /// Rows strictly ascending by fact id.
    pub rows: Vec<PreAggRow>,
    /// Dense fact -> row-index+1 lookup; 0 means no row.
    index: Vec<u32>,
    /// Facts dropped because a numeric attribute had unparseable values.
    pub skipped_rows: usize,
}

impl PreAggTable {
    pub fn row_for(&self, fact: FactId) -> Option<&PreAggRow> {
        match self.index.get(fact as usize) {
            Some(&i) if i > 0 => Some(&self.rows[(i - 1) as usize]),
            _ => None,
        }
    }

    /// Smallest per-fact minimum, the global measure floor.
    pub fn global_min(&self) -> Option<f64> {
        if !self.numeric || self.rows.is_empty() {
            return None;
        }
        self.rows.iter().map(|r| r.min).reduce(f64::min)
    }

    /// Largest per-fact maximum, the global measure ceiling.
    pub fn global_max(&self) -> Option<f64> {
        if !self.numeric || self.rows.is_empty() {
            return None;
        }
        self.rows.iter().map(|r| r.max).reduce(f64::max)
    }
}

/// Builds the pre-aggregated table of `attr` over the CFS.
///
/// Numeric attributes aggregate each fact's value multiset in canonical
/// order; a fact with any unparseable value is skipped and counted in
/// `skipped_rows`. Non-numeric attributes record value counts only.
pub fn build_preagg(store: &TripleStore, cfs: &CandidateFactSet, attr: &Attribute) -> PreAggTable {
    let numeric = attr.is_numeric();
    let mut rows = Vec::new();
    let mut skipped = 0usize;
    'facts: for (fact, vals) in value_rows(store, &cfs.members, attr) {
        if !numeric {
            rows.push(PreAggRow { fact, count: vals.len() as u64, sum: 0.0, min: 0.0, max: 0.0 });
            continue;
        }
        let mut sum = 0.0f64;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in &vals {
            match v.as_f64() {
                Some(x) => {
                    sum += x;
                    min = min.min(x);
                    max = max.max(x);
                }
                None => {
                    skipped += 1;
                    continue 'facts;
                }
            }
        }
        rows.push(PreAggRow { fact, count: vals.len() as u64, sum, min, max });
    }
    let mut index = vec![0u32; store.subject_count()];
    for (i, r) in rows.iter().enumerate() {
        index[r.fact as usize] = (i + 1) as u32;
    }
    PreAggTable { attr: attr.name.clone(), numeric, rows, index, skipped_rows: skipped }
}

/// English stopwords excluded from keyword derivations.
pub const KEYWORD_STOPLIST: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any",
    "are", "as", "at", "be", "because", "been", "before", "being", "below", "between", "both",
    "but", "by", "can", "cannot", "could", "did", "do", "does", "doing", "down", "during", "each",
    "few", "for", "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers",
    "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its",
    "itself", "just", "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of",
    "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own",
    "same", "she", "should", "so", "some", "such", "than", "that", "the", "their", "theirs",
    "them", "themselves", "then", "there", "these", "they", "this", "those", "through", "to",
    "too", "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which",
    "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself",
    "yourselves",
];

/// Lowercased alphanumeric tokens of length ≥ 4 not in the stoplist.
pub fn keyword_tokens(text: &str, stoplist: &[&str]) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .map(str::to_lowercase)
        .filter(|w| w.chars().count() >= 4 && !stoplist.contains(&w.as_str()))
        .collect()
}

/// Primary subtag of a language tag: "en-US" -> "en".
pub fn primary_language_tag(tag: &str) -> String {
    tag.split('-').next().unwrap_or(tag).to_ascii_lowercase()
}

struct LangProfile {
    code: &'static str,
    stopwords: &'static [&'static str],
    suffixes: &'static [&'static str],
}

// Checked in tie order: the first profile wins equal scores.
const LANG_PROFILES: &[LangProfile] = &[
    LangProfile {
        code: "en",
        stopwords: &[
            "the", "and", "of", "to", "in", "is", "that", "for", "with", "was", "are", "this",
            "have", "from", "not", "they", "his", "her", "will", "been",
        ],
        suffixes: &["ing", "tion", "ness", "ment", "es", "ed", "ly"],
    },
    LangProfile {
        code: "fr",
        stopwords: &[
            "le", "la", "les", "de", "des", "un", "une", "et", "est", "dans", "pour", "que",
            "qui", "sur", "avec", "pas", "ce", "il", "au", "aux",
        ],
        suffixes: &["eau", "eux", "oir", "ais", "ait", "ons", "ez"],
    },
    LangProfile {
        code: "de",
        stopwords: &[
            "der", "die", "das", "und", "ist", "ein", "eine", "mit", "von", "auf", "nicht",
            "sie", "ich", "dem", "den", "zu", "im", "sich", "als", "auch",
        ],
        suffixes: &["ung", "keit", "heit", "lich", "sch"],
    },
    LangProfile {
        code: "es",
        stopwords: &[
            "el", "la", "los", "las", "de", "que", "y", "en", "un", "una", "es", "por", "con",
            "para", "del", "se", "no", "su", "al", "lo",
        ],
        suffixes: &["cion", "sion", "dad", "mente", "ando"],
    },
];

/// Classifies untagged text into {en, fr, de, es, other}: stopword hits
/// weigh 2, suffix hits 1; ties go to the earlier language; no hits at all
/// mean "other".
pub fn classify_language(text: &str) -> &'static str {
    let tokens: Vec<String> = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect();
    let mut best: (&'static str, usize) = ("other", 0);
    for profile in LANG_PROFILES {
        let mut score = 0usize;
        for tok in &tokens {
            if profile.stopwords.contains(&tok.as_str()) {
                score += 2;
            } else if profile
                .suffixes
                .iter()
                .any(|s| tok.len() > s.len() && tok.ends_with(s))
            {
                score += 1;
            }
        }
        if score > best.1 {
            best = (profile.code, score);
        }
    }
    best.0
}

/// Convenience map from attribute name to (attribute, stats).
pub fn by_name(
    attrs: &[(Attribute, AttributeStats)],
) -> HashMap<String, (Attribute, AttributeStats)> {
    attrs
        .iter()
        .map(|(a, s)| (a.name.clone(), (a.clone(), s.clone())))
        .collect()
}
