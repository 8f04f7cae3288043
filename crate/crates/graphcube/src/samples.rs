//! Built-in sample graphs used by tests, examples, and the documentation.
//!
//! Two variants of the same two-CEO world:
//! - [`CEOS_MINI_NT`]: the compact graph with political connections and
//!   company descriptions, used for derivation and golden-query tests.
//! - [`CEOS_WIDE_NT`]: the aggregation walkthrough variant where Dos Santos
//!   also has a nationality and three company areas, so the root aggregate
//!   over (nationality, gender, company/area) has exactly 11 tuples.

use crate::graph::{parse_ntriples, select_cfs, CandidateFactSet, CfsSelector, TripleStore};

pub const EX: &str = "http://example.org/";

/// Compact two-CEO graph.
///
/// n1 (Dos Santos): countryOfOrigin Angola, netWorth 2.8e9, gender female,
/// politically connected to a President, manages a Petroleum and a
/// Manufacturer company. No nationality, no age.
/// n2 (Ghosn): four nationalities, netWorth 1.2e8, age 66, manages one
/// Manufacturer company. No gender, no country of origin.
pub const CEOS_MINI_NT: &str = r#"<http://example.org/dosSantos> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://example.org/CEO> .
<http://example.org/dosSantos> <http://example.org/countryOfOrigin> "Angola" .
<http://example.org/dosSantos> <http://example.org/netWorth> "2800000000"^^<http://www.w3.org/2001/XMLSchema#integer> .
<http://example.org/dosSantos> <http://example.org/gender> "female" .
<http://example.org/dosSantos> <http://example.org/politicalConnection> <http://example.org/p1> .
<http://example.org/dosSantos> <http://example.org/company> <http://example.org/c1> .
<http://example.org/dosSantos> <http://example.org/company> <http://example.org/c2> .
<http://example.org/ghosn> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://example.org/CEO> .
<http://example.org/ghosn> <http://example.org/netWorth> "120000000"^^<http://www.w3.org/2001/XMLSchema#integer> .
<http://example.org/ghosn> <http://example.org/nationality> "Brazil" .
<http://example.org/ghosn> <http://example.org/nationality> "France" .
<http://example.org/ghosn> <http://example.org/nationality> "Lebanon" .
<http://example.org/ghosn> <http://example.org/nationality> "Nigeria" .
<http://example.org/ghosn> <http://example.org/age> "66"^^<http://www.w3.org/2001/XMLSchema#integer> .
<http://example.org/ghosn> <http://example.org/company> <http://example.org/c3> .
<http://example.org/p1> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://example.org/Politician> .
<http://example.org/p1> <http://example.org/role> "President" .
<http://example.org/c1> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://example.org/Company> .
<http://example.org/c1> <http://example.org/area> "Petroleum" .
<http://example.org/c1> <http://example.org/description> "Sonangol oversees petroleum production" .
<http://example.org/c2> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://example.org/Company> .
<http://example.org/c2> <http://example.org/area> "Manufacturer" .
<http://example.org/c3> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://example.org/Company> .
<http://example.org/c3> <http://example.org/area> "Manufacturer" .
<http://example.org/c3> <http://example.org/description> "Global automotive group producing vehicles worldwide"@en .
"#;

/// Walkthrough variant: both CEOs have nationality values, Dos Santos
/// manages companies in three areas and Ghosn in two, so the root over
/// (nationality, gender, company/area) yields 3 + 8 = 11 tuples over
/// domains of 5 nationalities, 1 gender, and 4 areas.
pub const CEOS_WIDE_NT: &str = r#"<http://example.org/dosSantos> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://example.org/CEO> .
<http://example.org/dosSantos> <http://example.org/nationality> "Angola" .
<http://example.org/dosSantos> <http://example.org/gender> "female" .
<http://example.org/dosSantos> <http://example.org/netWorth> "2800000000"^^<http://www.w3.org/2001/XMLSchema#integer> .
<http://example.org/dosSantos> <http://example.org/company> <http://example.org/w1> .
<http://example.org/dosSantos> <http://example.org/company> <http://example.org/w2> .
<http://example.org/dosSantos> <http://example.org/company> <http://example.org/w3> .
<http://example.org/ghosn> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://example.org/CEO> .
<http://example.org/ghosn> <http://example.org/nationality> "Brazil" .
<http://example.org/ghosn> <http://example.org/nationality> "France" .
<http://example.org/ghosn> <http://example.org/nationality> "Lebanon" .
<http://example.org/ghosn> <http://example.org/nationality> "Nigeria" .
<http://example.org/ghosn> <http://example.org/netWorth> "120000000"^^<http://www.w3.org/2001/XMLSchema#integer> .
<http://example.org/ghosn> <http://example.org/age> "66"^^<http://www.w3.org/2001/XMLSchema#integer> .
<http://example.org/ghosn> <http://example.org/company> <http://example.org/w4> .
<http://example.org/ghosn> <http://example.org/company> <http://example.org/w5> .
<http://example.org/w1> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://example.org/Company> .
<http://example.org/w1> <http://example.org/area> "Aerospace" .
<http://example.org/w2> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://example.org/Company> .
<http://example.org/w2> <http://example.org/area> "Defense" .
<http://example.org/w3> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://example.org/Company> .
<http://example.org/w3> <http://example.org/area> "Manufacturer" .
<http://example.org/w4> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://example.org/Company> .
<http://example.org/w4> <http://example.org/area> "Manufacturer" .
<http://example.org/w5> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://example.org/Company> .
<http://example.org/w5> <http://example.org/area> "Networking" .
"#;

/// Parses the compact sample graph. Panics only if the constant is broken.
pub fn mini_store() -> TripleStore {
    parse_ntriples(CEOS_MINI_NT, 0.0).expect("built-in sample").0
}

/// Parses the walkthrough sample graph.
pub fn wide_store() -> TripleStore {
    parse_ntriples(CEOS_WIDE_NT, 0.0).expect("built-in sample").0
}

/// The CEO candidate fact set of a sample store.
pub fn ceo_cfs(store: &TripleStore) -> CandidateFactSet {
    select_cfs(store, &CfsSelector::Type(format!("{EX}CEO"))).expect("sample has CEOs")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mini_shape() {
        let store = mini_store();
        let cfs = ceo_cfs(&store);
        assert_eq!(cfs.len(), 2);
        assert_eq!(store.members_of_type("http://example.org/Company").len(), 3);
        let nat = store.property_rows("http://example.org/nationality");
        assert_eq!(nat.len(), 4);
        let ghosn = store.subject_id("http://example.org/ghosn").unwrap();
        assert!(nat.iter().all(|(id, _)| *id == ghosn));
    }

    #[test]
    fn wide_shape() {
        let store = wide_store();
        let cfs = ceo_cfs(&store);
        assert_eq!(cfs.len(), 2);
        // 5 nationalities, 4 areas, 1 gender across the two CEOs.
        let nats: std::collections::BTreeSet<_> = store
            .property_rows("http://example.org/nationality")
            .iter()
            .map(|(_, t)| t.lexical().to_string())
            .collect();
        assert_eq!(nats.len(), 5);
        let areas: std::collections::BTreeSet<_> = store
            .property_rows("http://example.org/area")
            .iter()
            .map(|(_, t)| t.lexical().to_string())
            .collect();
        assert_eq!(
            areas,
            ["Aerospace", "Defense", "Manufacturer", "Networking"]
                .iter()
                .map(|s| s.to_string())
                .collect()
        );
        assert_eq!(store.property_rows("http://example.org/gender").len(), 1);
    }
}
