//! Compressed set of fact ids, the unit of identity the cube engine pushes
//! down the lattice.
//!
//! Layout follows the two-container roaring scheme: ids are split into a
//! 16-bit key (high half) and a 16-bit low half; each key owns either a
//! sorted array of low halves (sparse) or a 65536-bit bitset (dense).
//! Containers convert to bitsets above [`ARRAY_MAX`] entries. Unions only
//! grow sets, so containers never convert back.
//!
//! The serialized form is the memory contract the engine asserts against:
//! for a set of Z ids drawn from a universe of u facts it never exceeds
//! [`FactSet::serialized_bound`] = 2Z + 9(u/65535 + 1) + 8 bytes.

use crate::error::GraphCubeError;

/// Sparse containers hold at most this many entries (two bytes each); one
/// more and the fixed 8 KiB bitset is the smaller representation.
const ARRAY_MAX: usize = 4096;

const BITS_WORDS: usize = 1 << 10; // 65536 bits

#[derive(Debug, Clone, PartialEq, Eq)]
enum Container {
    Array(Vec<u16>),
    Bits { words: Box<[u64; BITS_WORDS]>, len: u32 },
}

impl Container {
    fn len(&self) -> usize {
        match self {
            Container::Array(v) => v.len(),
            Container::Bits { len, .. } => *len as usize,
        }
    }

    fn contains(&self, low: u16) -> bool {
        match self {
            Container::Array(v) => v.binary_search(&low).is_ok(),
            Container::Bits { words, .. } => {
                words[(low >> 6) as usize] & (1u64 << (low & 63)) != 0
            }
        }
    }

    fn insert(&mut self, low: u16) -> bool {
        match self {
            Container::Array(v) => {
                // Ascending inserts are the common case during translation.
                if v.last().is_some_and(|&last| low > last) {
                    v.push(low);
                } else {
                    match v.binary_search(&low) {
                        Ok(_) => return false,
                        Err(pos) => v.insert(pos, low),
                    }
                }
                if v.len() > ARRAY_MAX {
                    self.to_bits();
                }
                true
            }
            Container::Bits { words, len } => {
                let w = &mut words[(low >> 6) as usize];
                let bit = 1u64 << (low & 63);
                if *w & bit != 0 {
                    false
                } else {
                    *w |= bit;
                    *len += 1;
                    true
                }
            }
        }
    }

    fn to_bits(&mut self) {
        if let Container::Array(v) = self {
            let mut words = Box::new([0u64; BITS_WORDS]);
            for &low in v.iter() {
                words[(low >> 6) as usize] |= 1u64 << (low & 63);
            }
            let len = v.len() as u32;
            *self = Container::Bits { words, len };
        }
    }

    fn union_in_place(&mut self, other: &Container) {
        match (&mut *self, other) {
            (Container::Array(a), Container::Array(b)) => {
                let mut merged = Vec::with_capacity(a.len() + b.len());
                let (mut i, mut j) = (0, 0);
                while i < a.len() && j < b.len() {
                    match a[i].cmp(&b[j]) {
                        std::cmp::Ordering::Less => {
                            merged.push(a[i]);
                            i += 1;
                        }
                        std::cmp::Ordering::Greater => {
                            merged.push(b[j]);
                            j += 1;
                        }
                        std::cmp::Ordering::Equal => {
                            merged.push(a[i]);
                            i += 1;
                            j += 1;
                        }
                    }
                }
                merged.extend_from_slice(&a[i..]);
                merged.extend_from_slice(&b[j..]);
                *a = merged;
                if a.len() > ARRAY_MAX {
                    self.to_bits();
                }
            }
            (Container::Bits { words, len }, Container::Array(b)) => {
                for &low in b {
                    let w = &mut words[(low >> 6) as usize];
                    let bit = 1u64 << (low & 63);
                    if *w & bit == 0 {
                        *w |= bit;
                        *len += 1;
                    }
                }
            }
            (Container::Array(_), Container::Bits { .. }) => {
                self.to_bits();
                self.union_in_place(other);
            }
            (
                Container::Bits { words, len },
                Container::Bits {
                    words: other_words, ..
                },
            ) => {
                let mut count = 0u32;
                for (w, o) in words.iter_mut().zip(other_words.iter()) {
                    *w |= o;
                    count += w.count_ones();
                }
                *len = count;
            }
        }
    }
}

/// A set of `u32` fact ids with cheap union and ascending iteration.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FactSet {
    // Sorted by key; typically one or two entries.
    containers: Vec<(u16, Container)>,
}

impl FactSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds from ascending, possibly duplicated ids.
    pub fn from_sorted(ids: &[u32]) -> Self {
        let mut s = Self::new();
        for &id in ids {
            s.insert(id);
        }
        s
    }

    pub fn len(&self) -> usize {
        self.containers.iter().map(|(_, c)| c.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.containers.is_empty() || self.len() == 0
    }

    pub fn contains(&self, id: u32) -> bool {
        let key = (id >> 16) as u16;
        match self.containers.binary_search_by_key(&key, |(k, _)| *k) {
            Ok(i) => self.containers[i].1.contains(id as u16),
            Err(_) => false,
        }
    }

    /// Returns true if the id was new.
    pub fn insert(&mut self, id: u32) -> bool {
        let key = (id >> 16) as u16;
        let idx = match self.containers.binary_search_by_key(&key, |(k, _)| *k) {
            Ok(i) => i,
            Err(pos) => {
                self.containers.insert(pos, (key, Container::Array(Vec::new())));
                pos
            }
        };
        self.containers[idx].1.insert(id as u16)
    }

    /// Unions `other` into `self`.
    pub fn union_in_place(&mut self, other: &FactSet) {
        for (key, oc) in &other.containers {
            match self.containers.binary_search_by_key(key, |(k, _)| *k) {
                Ok(i) => self.containers[i].1.union_in_place(oc),
                Err(pos) => self.containers.insert(pos, (*key, oc.clone())),
            }
        }
    }

    /// Ascending iterator over the ids.
    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.containers.iter().flat_map(|(key, c)| {
            let base = (*key as u32) << 16;
            let items: Box<dyn Iterator<Item = u32> + '_> = match c {
                Container::Array(v) => Box::new(v.iter().map(move |&low| base | low as u32)),
                Container::Bits { words, .. } => Box::new(
                    words
                        .iter()
                        .enumerate()
                        .filter(|(_, w)| **w != 0)
                        .flat_map(move |(wi, w)| {
                            let mut bits = *w;
                            std::iter::from_fn(move || {
                                if bits == 0 {
                                    None
                                } else {
                                    let b = bits.trailing_zeros();
                                    bits &= bits - 1;
                                    Some(base | ((wi as u32) << 6) | b)
                                }
                            })
                        }),
                ),
            };
            items
        })
    }

    /// Upper bound, in bytes, of the serialized form of any set with `z`
    /// members over a universe of `u` ids.
    pub fn serialized_bound(z: usize, u: usize) -> usize {
        2 * z + 9 * (u / 65535 + 1) + 8
    }

    /// Exact size [`serialize`](Self::serialize) will produce.
    pub fn serialized_size(&self) -> usize {
        8 + self
            .containers
            .iter()
            .map(|(_, c)| {
                7 + match c {
                    Container::Array(v) => 2 * v.len(),
                    Container::Bits { .. } => 8 * BITS_WORDS,
                }
            })
            .sum::<usize>()
    }

    /// Compact byte form: an 8-byte header (container count, total length),
    /// then per container a 7-byte descriptor (key, tag, cardinality)
    /// followed by the payload. Always within [`serialized_bound`].
    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_size());
        out.extend_from_slice(&(self.containers.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for (key, c) in &self.containers {
            out.extend_from_slice(&key.to_le_bytes());
            match c {
                Container::Array(v) => {
                    out.push(0);
                    out.extend_from_slice(&(v.len() as u32).to_le_bytes());
                    for low in v {
                        out.extend_from_slice(&low.to_le_bytes());
                    }
                }
                Container::Bits { words, len } => {
                    out.push(1);
                    out.extend_from_slice(&len.to_le_bytes());
                    for w in words.iter() {
                        out.extend_from_slice(&w.to_le_bytes());
                    }
                }
            }
        }
        out
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self, GraphCubeError> {
        let err = |m: &str| GraphCubeError::BitmapDecode(m.to_string());
        if bytes.len() < 8 {
            return Err(err("truncated header"));
        }
        let n_containers = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let mut pos = 8;
        let mut containers = Vec::with_capacity(n_containers);
        let mut last_key: Option<u16> = None;
        for _ in 0..n_containers {
            if bytes.len() < pos + 7 {
                return Err(err("truncated descriptor"));
            }
            let key = u16::from_le_bytes(bytes[pos..pos + 2].try_into().unwrap());
            let tag = bytes[pos + 2];
            let card = u32::from_le_bytes(bytes[pos + 3..pos + 7].try_into().unwrap()) as usize;
            pos += 7;
            if last_key.is_some_and(|k| key <= k) {
                return Err(err("container keys not ascending"));
            }
            last_key = Some(key);
            let container = match tag {
                0 => {
                    if bytes.len() < pos + 2 * card {
                        return Err(err("truncated array payload"));
                    }
                    let v: Vec<u16> = (0..card)
                        .map(|i| {
                            u16::from_le_bytes(bytes[pos + 2 * i..pos + 2 * i + 2].try_into().unwrap())
                        })
                        .collect();
                    pos += 2 * card;
                    if !v.windows(2).all(|w| w[0] < w[1]) {
                        return Err(err("array entries not strictly ascending"));
                    }
                    Container::Array(v)
                }
                1 => {
                    if bytes.len() < pos + 8 * BITS_WORDS {
                        return Err(err("truncated bitset payload"));
                    }
                    let mut words = Box::new([0u64; BITS_WORDS]);
                    for (i, w) in words.iter_mut().enumerate() {
                        *w = u64::from_le_bytes(
                            bytes[pos + 8 * i..pos + 8 * i + 8].try_into().unwrap(),
                        );
                    }
                    pos += 8 * BITS_WORDS;
                    let actual: u32 = words.iter().map(|w| w.count_ones()).sum();
                    if actual as usize != card {
                        return Err(err("bitset cardinality mismatch"));
                    }
                    Container::Bits { words, len: actual }
                }
                _ => return Err(err("unknown container tag")),
            };
            containers.push((key, container));
        }
        Ok(FactSet { containers })
    }
}

impl FromIterator<u32> for FactSet {
    fn from_iter<T: IntoIterator<Item = u32>>(iter: T) -> Self {
        let mut s = FactSet::new();
        for id in iter {
            s.insert(id);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    #[test]
    fn insert_contains_len() {
        let mut s = FactSet::new();
        assert!(s.insert(70_000));
        assert!(!s.insert(70_000));
        assert!(s.insert(3));
        assert!(s.contains(3) && s.contains(70_000) && !s.contains(4));
        assert_eq!(s.len(), 2);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![3, 70_000]);
    }

    #[test]
    fn union_matches_reference_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..30 {
            let u = if trial % 3 == 0 { 300_000 } else { 9_000 };
            let n = rng.gen_range(1..5000);
            let a: BTreeSet<u32> = (0..n).map(|_| rng.gen_range(0..u)).collect();
            let b: BTreeSet<u32> = (0..n).map(|_| rng.gen_range(0..u)).collect();
            let mut fa: FactSet = a.iter().copied().collect();
            let fb: FactSet = b.iter().copied().collect();
            fa.union_in_place(&fb);
            let want: Vec<u32> = a.union(&b).copied().collect();
            assert_eq!(fa.iter().collect::<Vec<_>>(), want);
            assert_eq!(fa.len(), want.len());
        }
    }

    #[test]
    fn dense_container_conversion_keeps_contents() {
        // Force an array -> bitset conversion by inserting 5000 ids in one
        // 64K block, descending so the slow insert path is also exercised.
        let ids: Vec<u32> = (0..5000u32).rev().map(|i| i * 13 % 60_000).collect();
        let dedup: BTreeSet<u32> = ids.iter().copied().collect();
        let s: FactSet = ids.iter().copied().collect();
        assert_eq!(s.iter().collect::<Vec<_>>(), dedup.iter().copied().collect::<Vec<_>>());
    }

    #[test]
    fn serialize_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.gen_range(0..8000);
            let u = rng.gen_range(1..400_000u32);
            let s: FactSet = (0..n).map(|_| rng.gen_range(0..u)).collect();
            let bytes = s.serialize();
            assert_eq!(bytes.len(), s.serialized_size());
            let back = FactSet::deserialize(&bytes).unwrap();
            assert_eq!(s, back);
        }
    }

    #[test]
    fn serialized_size_within_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        // Sparse, dense and multi-container shapes.
        for &(n, u) in &[(1usize, 100u32), (1000, 100_000), (4097, 70_000), (60_000, 65_536), (50_000, 1_000_000)] {
            let mut s = FactSet::new();
            let mut distinct = BTreeSet::new();
            while distinct.len() < n.min(u as usize) {
                let id = rng.gen_range(0..u);
                if distinct.insert(id) {
                    s.insert(id);
                }
            }
            let z = s.len();
            let bound = FactSet::serialized_bound(z, u as usize);
            assert!(
                s.serialized_size() <= bound,
                "z={z} u={u}: {} > {bound}",
                s.serialized_size()
            );
        }
    }

    #[test]
    fn bound_formula_example() {
        // 1000 facts drawn from a universe of 100k ids: 2*1000 + 9*2 + 8.
        assert_eq!(FactSet::serialized_bound(1000, 100_000), 2026);
    }

    #[test]
    fn deserialize_rejects_garbage() {
        assert!(FactSet::deserialize(&[1, 2, 3]).is_err());
        let mut bytes = FactSet::from_sorted(&[1, 2, 3]).serialize();
        bytes[8 + 2] = 9; // unknown tag
        assert!(FactSet::deserialize(&bytes).is_err());
    }
}
