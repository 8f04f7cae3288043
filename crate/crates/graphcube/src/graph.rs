//! Triple store: loading RDF data, indexing it by property, and selecting
//! candidate fact sets.
//!
//! Subjects get dense ids (`FactId`) in first-seen order, so every
//! downstream structure can index by plain integers. Property tables are
//! kept sorted by fact id; rdf:type edges live in a separate class index.

use crate::error::GraphCubeError;
use crate::Result;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

/// Dense subject identifier, assigned at load in first-seen order.
pub type FactId = u32;

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const RDFS_SUBCLASS_OF: &str = "http://www.w3.org/2000/01/rdf-schema#subClassOf";

/// Coarse datatype used for value interpretation and dimension ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub enum ValueKind {
    Integer,
    Decimal,
    Date,
    Str,
}

impl ValueKind {
    pub fn is_numeric(self) -> bool {
        matches!(self, ValueKind::Integer | ValueKind::Decimal)
    }
}

/// An RDF term in object position.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Iri(String),
    Blank(String),
    Literal {
        lexical: String,
        kind: ValueKind,
        lang: Option<String>,
    },
}

impl Term {
    /// The text used when the term acts as a dimension value or join key.
    pub fn lexical(&self) -> &str {
        match self {
            Term::Iri(s) | Term::Blank(s) => s,
            Term::Literal { lexical, .. } => lexical,
        }
    }

    pub fn literal(lexical: impl Into<String>, kind: ValueKind) -> Self {
        Term::Literal {
            lexical: lexical.into(),
            kind,
            lang: None,
        }
    }

    pub fn kind(&self) -> ValueKind {
        match self {
            Term::Literal { kind, .. } => *kind,
            _ => ValueKind::Str,
        }
    }

    /// Numeric view of the term, when its lexical form parses.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Term::Literal { lexical, kind, .. } if kind.is_numeric() => lexical.parse().ok(),
            _ => None,
        }
    }
}

/// Per-file parse outcome: the store plus any skipped lines.
#[derive(Debug, Default, Clone)]
pub struct ParseReport {
    /// (1-based line number, reason) for every unparseable line.
    pub errors: Vec<(usize, String)>,
    pub parsed_lines: usize,
}

/// In-memory triple store indexed for aggregate evaluation.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct TripleStore {
    subjects: Vec<String>,
    subject_ids: HashMap<String, FactId>,
    /// class IRI -> sorted distinct fact ids.
    types: BTreeMap<String, Vec<FactId>>,
    /// property IRI -> (fact, object), sorted by fact then object, distinct.
    props: BTreeMap<String, Vec<(FactId, Term)>>,
    triple_count: usize,
}

impl TripleStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn subject_count(&self) -> usize {
        self.subjects.len()
    }

    pub fn triple_count(&self) -> usize {
        self.triple_count
    }

    pub fn subject_label(&self, id: FactId) -> &str {
        &self.subjects[id as usize]
    }

    pub fn subject_id(&self, label: &str) -> Option<FactId> {
        self.subject_ids.get(label).copied()
    }

    /// Id for a subject label, creating one on first sight.
    pub fn intern_subject(&mut self, label: &str) -> FactId {
        if let Some(&id) = self.subject_ids.get(label) {
            return id;
        }
        let id = self.subjects.len() as FactId;
        self.subjects.push(label.to_string());
        self.subject_ids.insert(label.to_string(), id);
        id
    }

    /// Adds one triple; duplicates are removed by [`finish`](Self::finish).
    pub fn add(&mut self, subject: &str, predicate: &str, object: Term) {
        let id = self.intern_subject(subject);
        if predicate == RDF_TYPE {
            self.types
                .entry(object.lexical().to_string())
                .or_default()
                .push(id);
        } else {
            self.props
                .entry(predicate.to_string())
                .or_default()
                .push((id, object));
        }
    }

    /// Sorts and deduplicates all tables; call once after the last `add`.
    pub fn finish(&mut self) {
        for ids in self.types.values_mut() {
            ids.sort_unstable();
            ids.dedup();
        }
        for rows in self.props.values_mut() {
            rows.sort();
            rows.dedup();
        }
        self.triple_count = self.types.values().map(Vec::len).sum::<usize>()
            + self.props.values().map(Vec::len).sum::<usize>();
    }

    pub fn classes(&self) -> impl Iterator<Item = (&str, usize)> {
        self.types.iter().map(|(c, ids)| (c.as_str(), ids.len()))
    }

    pub fn properties(&self) -> impl Iterator<Item = &str> {
        self.props.keys().map(String::as_str)
    }

    /// (fact, object) rows of a property, sorted by fact id.
    pub fn property_rows(&self, prop: &str) -> &[(FactId, Term)] {
        self.props.get(prop).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn members_of_type(&self, class: &str) -> &[FactId] {
        self.types.get(class).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Adds, for every subject typed `c` where the ontology says
    /// `c rdfs:subClassOf d`, the type `d`. One level only: superclasses of
    /// superclasses are not chased.
    pub fn apply_subclass_closure(&mut self, ontology: &TripleStore) {
        let mut additions: Vec<(String, Vec<FactId>)> = Vec::new();
        for (sub, sup) in ontology.property_rows(RDFS_SUBCLASS_OF).iter().map(|(s, o)| {
            (
                ontology.subject_label(*s).to_string(),
                o.lexical().to_string(),
            )
        }) {
            let members = self.members_of_type(&sub);
            if !members.is_empty() {
                additions.push((sup, members.to_vec()));
            }
        }
        for (class, members) in additions {
            let entry = self.types.entry(class).or_default();
            entry.extend(members);
            entry.sort_unstable();
            entry.dedup();
        }
        self.triple_count = self.types.values().map(Vec::len).sum::<usize>()
            + self.props.values().map(Vec::len).sum::<usize>();
    }

    /// Serializes to N-Triples. Parsing the output reproduces the store.
    pub fn to_ntriples(&self) -> String {
        let subj = |label: &str| -> String {
            if label.starts_with("_:") {
                label.to_string()
            } else {
                format!("<{label}>")
            }
        };
        // Subject-major emission: a re-parse interns every subject in the
        // same order, so fact ids survive a save/load round trip.
        let mut lines: Vec<Vec<String>> = vec![Vec::new(); self.subjects.len()];
        for (class, ids) in &self.types {
            for &id in ids {
                lines[id as usize].push(format!(
                    "{} <{RDF_TYPE}> <{class}> .",
                    subj(&self.subjects[id as usize])
                ));
            }
        }
        for (prop, rows) in &self.props {
            for (id, term) in rows {
                let obj = match term {
                    Term::Iri(i) => format!("<{i}>"),
                    Term::Blank(b) => b.clone(),
                    Term::Literal { lexical, kind, lang } => {
                        let escaped = escape_literal(lexical);
                        match (lang, kind) {
                            (Some(l), _) => format!("\"{escaped}\"@{l}"),
                            (None, ValueKind::Str) => format!("\"{escaped}\""),
                            (None, k) => format!("\"{escaped}\"^^<{}>", xsd_iri(*k)),
                        }
                    }
                };
                lines[*id as usize]
                    .push(format!("{} <{prop}> {obj} .", subj(&self.subjects[*id as usize])));
            }
        }
        let mut out = String::new();
        for group in lines {
            for line in group {
                let _ = writeln!(out, "{line}");
            }
        }
        out
    }
}

fn xsd_iri(kind: ValueKind) -> &'static str {
    match kind {
        ValueKind::Integer => "http://www.w3.org/2001/XMLSchema#integer",
        ValueKind::Decimal => "http://www.w3.org/2001/XMLSchema#decimal",
        ValueKind::Date => "http://www.w3.org/2001/XMLSchema#date",
        ValueKind::Str => "http://www.w3.org/2001/XMLSchema#string",
    }
}

fn escape_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out
}

/// Datatype from a literal's lexical shape when no datatype IRI is present.
pub fn infer_kind(lexical: &str) -> ValueKind {
    let body = lexical.strip_prefix(['+', '-']).unwrap_or(lexical);
    if !body.is_empty() && body.bytes().all(|b| b.is_ascii_digit()) {
        return ValueKind::Integer;
    }
    if lexical.contains(['.', 'e', 'E']) && lexical.parse::<f64>().is_ok() {
        return ValueKind::Decimal;
    }
    if is_iso_date(lexical) {
        return ValueKind::Date;
    }
    ValueKind::Str
}

fn is_iso_date(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() == 10
        && b[4] == b'-'
        && b[7] == b'-'
        && [0, 1, 2, 3, 5, 6, 8, 9].iter().all(|&i| b[i].is_ascii_digit())
}

fn kind_from_datatype_iri(iri: &str) -> ValueKind {
    let local = iri.rsplit(['#', '/']).next().unwrap_or(iri);
    match local {
        "integer" | "int" | "long" | "short" | "byte" | "nonNegativeInteger"
        | "positiveInteger" | "unsignedInt" | "unsignedLong" => ValueKind::Integer,
        "decimal" | "double" | "float" => ValueKind::Decimal,
        "date" | "dateTime" | "gYear" => ValueKind::Date,
        _ => ValueKind::Str,
    }
}

/// Parses N-Triples text. Lines that fail to parse are collected in the
/// report; the call errors out if more than `max_error_fraction` of the
/// non-blank lines are bad.
pub fn parse_ntriples(text: &str, max_error_fraction: f64) -> Result<(TripleStore, ParseReport)> {
    let mut store = TripleStore::new();
    let mut report = ParseReport::default();
    let mut non_blank = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        non_blank += 1;
        match parse_triple_line(line) {
            Ok((s, p, o)) => {
                store.add(&s, &p, o);
                report.parsed_lines += 1;
            }
            Err(reason) => report.errors.push((lineno + 1, reason)),
        }
    }
    if non_blank > 0 && report.errors.len() as f64 > max_error_fraction * non_blank as f64 {
        return Err(GraphCubeError::Parse(format!(
            "{} of {} lines unparseable (limit {:.1}%); first: line {}: {}",
            report.errors.len(),
            non_blank,
            max_error_fraction * 100.0,
            report.errors[0].0,
            report.errors[0].1
        )));
    }
    store.finish();
    Ok((store, report))
}

/// Reads and parses an N-Triples file.
pub fn load_ntriples(path: &Path, max_error_fraction: f64) -> Result<(TripleStore, ParseReport)> {
    let text = std::fs::read_to_string(path)?;
    parse_ntriples(&text, max_error_fraction)
}

fn parse_triple_line(line: &str) -> std::result::Result<(String, String, Term), String> {
    let mut rest = line;
    let subject = take_resource(&mut rest)?;
    skip_ws(&mut rest);
    let predicate = match take_resource(&mut rest)? {
        Resource::Iri(i) => i,
        Resource::Blank(_) => return Err("predicate must be an IRI".into()),
    };
    skip_ws(&mut rest);
    let object = take_object(&mut rest)?;
    skip_ws(&mut rest);
    let rest = rest.trim_end();
    if rest != "." {
        return Err(format!("expected terminating '.', found '{rest}'"));
    }
    let subject = match subject {
        Resource::Iri(i) => i,
        Resource::Blank(b) => b,
    };
    Ok((subject, predicate, object))
}

enum Resource {
    Iri(String),
    Blank(String),
}

fn skip_ws(rest: &mut &str) {
    *rest = rest.trim_start();
}

fn take_resource(rest: &mut &str) -> std::result::Result<Resource, String> {
    skip_ws(rest);
    if let Some(r) = rest.strip_prefix('<') {
        let end = r.find('>').ok_or("unterminated IRI")?;
        let iri = r[..end].to_string();
        if iri.is_empty() {
            return Err("empty IRI".into());
        }
        *rest = &r[end + 1..];
        Ok(Resource::Iri(iri))
    } else if let Some(r) = rest.strip_prefix("_:") {
        let end = r
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '-'))
            .unwrap_or(r.len());
        if end == 0 {
            return Err("empty blank node label".into());
        }
        let label = format!("_:{}", &r[..end]);
        *rest = &r[end..];
        Ok(Resource::Blank(label))
    } else {
        Err(format!("expected IRI or blank node at '{rest}'"))
    }
}

fn take_object(rest: &mut &str) -> std::result::Result<Term, String> {
    skip_ws(rest);
    if rest.starts_with('<') || rest.starts_with("_:") {
        return Ok(match take_resource(rest)? {
            Resource::Iri(i) => Term::Iri(i),
            Resource::Blank(b) => Term::Blank(b),
        });
    }
    let r = rest
        .strip_prefix('"')
        .ok_or_else(|| format!("expected object term at '{rest}'"))?;
    // Scan for the closing quote, honoring backslash escapes.
    let mut lexical = String::new();
    let mut chars = r.char_indices();
    let mut end = None;
    while let Some((i, ch)) = chars.next() {
        match ch {
            '"' => {
                end = Some(i);
                break;
            }
            '\\' => {
                let (_, esc) = chars.next().ok_or("dangling escape")?;
                match esc {
                    '\\' => lexical.push('\\'),
                    '"' => lexical.push('"'),
                    'n' => lexical.push('\n'),
                    'r' => lexical.push('\r'),
                    't' => lexical.push('\t'),
                    'u' => {
                        let mut code = String::new();
                        for _ in 0..4 {
                            code.push(chars.next().ok_or("short \\u escape")?.1);
                        }
                        let cp = u32::from_str_radix(&code, 16).map_err(|_| "bad \\u escape")?;
                        lexical.push(char::from_u32(cp).ok_or("bad \\u codepoint")?);
                    }
                    other => return Err(format!("unknown escape \\{other}")),
                }
            }
            c => lexical.push(c),
        }
    }
    let end = end.ok_or("unterminated literal")?;
    let mut tail = &r[end + 1..];
    if let Some(t) = tail.strip_prefix("^^") {
        let mut t2 = t;
        let dt = match take_resource(&mut t2)? {
            Resource::Iri(i) => i,
            Resource::Blank(_) => return Err("datatype must be an IRI".into()),
        };
        *rest = t2;
        return Ok(Term::Literal {
            lexical,
            kind: kind_from_datatype_iri(&dt),
            lang: None,
        });
    }
    if let Some(t) = tail.strip_prefix('@') {
        let end = t
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '-'))
            .unwrap_or(t.len());
        if end == 0 {
            return Err("empty language tag".into());
        }
        let lang = t[..end].to_ascii_lowercase();
        *rest = &t[end..];
        return Ok(Term::Literal {
            lexical,
            kind: ValueKind::Str,
            lang: Some(lang),
        });
    }
    tail = tail.trim_start();
    let kind = infer_kind(&lexical);
    *rest = tail;
    Ok(Term::Literal {
        lexical,
        kind,
        lang: None,
    })
}

/// Type IRI given to rows loaded from CSV fact tables.
pub const CSV_ROW_TYPE: &str = "urn:graphcube:row";

/// Loads a CSV fact table: header names become properties, each row becomes
/// one fact typed [`CSV_ROW_TYPE`], `|` separates multiple values in a cell,
/// empty cells mean the property is absent.
pub fn load_csv(path: &Path) -> Result<TripleStore> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut store = TripleStore::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let subject = format!("urn:graphcube:row:{i}");
        store.add(&subject, RDF_TYPE, Term::Iri(CSV_ROW_TYPE.to_string()));
        for (col, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if cell.is_empty() || col >= headers.len() {
                continue;
            }
            for piece in cell.split('|') {
                let piece = piece.trim();
                if piece.is_empty() {
                    continue;
                }
                store.add(
                    &subject,
                    &headers[col],
                    Term::Literal {
                        lexical: piece.to_string(),
                        kind: infer_kind(piece),
                        lang: None,
                    },
                );
            }
        }
    }
    store.finish();
    Ok(store)
}

/// How a candidate fact set is selected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CfsSelector {
    /// All subjects with an rdf:type edge to the class.
    Type(String),
    /// All subjects having every one of the listed properties.
    Properties(Vec<String>),
}

/// A candidate fact set: the population one exploration runs over.
#[derive(Debug, Clone)]
pub struct CandidateFactSet {
    /// Human-readable key used in spec identities and reports.
    pub key: String,
    /// Sorted distinct member fact ids.
    pub members: Vec<FactId>,
    pub selector: CfsSelector,
}

impl CandidateFactSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Selects a candidate fact set, erroring when it comes out empty.
pub fn select_cfs(store: &TripleStore, selector: &CfsSelector) -> Result<CandidateFactSet> {
    let (key, members): (String, Vec<FactId>) = match selector {
        CfsSelector::Type(class) => (class.clone(), store.members_of_type(class).to_vec()),
        CfsSelector::Properties(props) => {
            let mut sets: Vec<HashSet<FactId>> = props
                .iter()
                .map(|p| store.property_rows(p).iter().map(|(id, _)| *id).collect())
                .collect();
            sets.sort_by_key(HashSet::len);
            let mut members: Vec<FactId> = match sets.first() {
                None => Vec::new(),
                Some(first) => first
                    .iter()
                    .copied()
                    .filter(|id| sets[1..].iter().all(|s| s.contains(id)))
                    .collect(),
            };
            members.sort_unstable();
            (props.join("+"), members)
        }
    };
    if members.is_empty() {
        return Err(GraphCubeError::EmptyFactSet(key));
    }
    Ok(CandidateFactSet {
        key,
        members,
        selector: selector.clone(),
    })
}
