//! Finite multisets with the usual algebra (sum, difference, scaling, inclusion).

use std::collections::btree_map;
use std::collections::BTreeMap;
use std::fmt;

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("multiset difference S2 - S1 requires S1 to be included in S2")]
pub struct NotIncluded;

/// A multiset with canonical (sorted) iteration order. Zero counts are never stored.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Multiset<T: Ord> {
    counts: BTreeMap<T, u64>,
}

impl<T: Ord> Default for Multiset<T> {
    fn default() -> Self {
        Multiset { counts: BTreeMap::new() }
    }
}

/// Serialized as a list of `{"element": .., "count": n}` entries, since
/// elements are not in general valid map keys.
impl<T: Ord + Serialize> Serialize for Multiset<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Entry<'a, T> {
            element: &'a T,
            count: u64,
        }
        let mut seq = serializer.serialize_seq(Some(self.counts.len()))?;
        for (element, &count) in &self.counts {
            seq.serialize_element(&Entry { element, count })?;
        }
        seq.end()
    }
}

impl<T: Ord + fmt::Debug> fmt::Debug for Multiset<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.counts.iter()).finish()
    }
}

impl<T: Ord> Multiset<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn singleton(item: T) -> Self {
        let mut m = Self::new();
        m.insert(item, 1);
        m
    }

    pub fn insert(&mut self, item: T, n: u64) {
        if n > 0 {
            *self.counts.entry(item).or_insert(0) += n;
        }
    }

    /// Number of occurrences of `item`.
    pub fn count(&self, item: &T) -> u64 {
        self.counts.get(item).copied().unwrap_or(0)
    }

    pub fn contains(&self, item: &T) -> bool {
        self.counts.contains_key(item)
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Total number of elements, with multiplicity.
    pub fn size(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Number of distinct elements.
    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn iter(&self) -> btree_map::Iter<'_, T, u64> {
        self.counts.iter()
    }

    pub fn elements(&self) -> impl Iterator<Item = &T> {
        self.counts.keys()
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.counts.iter().all(|(k, &n)| other.count(k) >= n)
    }

    pub fn remove(&mut self, item: &T, n: u64) -> Result<(), NotIncluded> {
        match self.counts.get_mut(item) {
            Some(c) if *c >= n => {
                *c -= n;
                if *c == 0 {
                    self.counts.remove(item);
                }
                Ok(())
            }
            None if n == 0 => Ok(()),
            _ => Err(NotIncluded),
        }
    }
}

impl<T: Ord + Clone> Multiset<T> {
    pub fn sum(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, &n) in &other.counts {
            out.insert(k.clone(), n);
        }
        out
    }

    /// `self - other`; defined only when `other ⊆ self`.
    pub fn difference(&self, other: &Self) -> Result<Self, NotIncluded> {
        if !other.is_subset(self) {
            return Err(NotIncluded);
        }
        let mut out = self.clone();
        for (k, &n) in &other.counts {
            out.remove(k, n)?;
        }
        Ok(out)
    }

    pub fn scale(&self, k: u64) -> Self {
        if k == 0 {
            return Self::new();
        }
        Multiset { counts: self.counts.iter().map(|(e, &n)| (e.clone(), n * k)).collect() }
    }

    /// Elements whose count differs, as (lost, gained) relative to `before`.
    pub fn delta(before: &Self, after: &Self) -> (Self, Self) {
        let mut lost = Self::new();
        let mut gained = Self::new();
        for (k, &n) in &before.counts {
            let m = after.count(k);
            if n > m {
                lost.insert(k.clone(), n - m);
            }
        }
        for (k, &m) in &after.counts {
            let n = before.count(k);
            if m > n {
                gained.insert(k.clone(), m - n);
            }
        }
        (lost, gained)
    }
}

impl<T: Ord> FromIterator<T> for Multiset<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut m = Self::new();
        for item in iter {
            m.insert(item, 1);
        }
        m
    }
}

impl<T: Ord> FromIterator<(T, u64)> for Multiset<T> {
    fn from_iter<I: IntoIterator<Item = (T, u64)>>(iter: I) -> Self {
        let mut m = Self::new();
        for (item, n) in iter {
            m.insert(item, n);
        }
        m
    }
}

impl<'a, T: Ord> IntoIterator for &'a Multiset<T> {
    type Item = (&'a T, &'a u64);
    type IntoIter = btree_map::Iter<'a, T, u64>;

    fn into_iter(self) -> Self::IntoIter {
        self.counts.iter()
    }
}
