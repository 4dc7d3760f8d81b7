//! Finite multisets with the sum-union / difference / inclusion laws used by
//! Petri net firing.

use std::collections::BTreeMap;
use std::fmt;

/// A multiset over `T`. Entries with count zero are never stored.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Multiset<T: Ord> {
    counts: BTreeMap<T, u64>,
}

impl<T: Ord> Default for Multiset<T> {
    fn default() -> Self {
        Self {
            counts: BTreeMap::new(),
        }
    }
}

impl<T: Ord + Clone> Multiset<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_counts<I: IntoIterator<Item = (T, u64)>>(items: I) -> Self {
        let mut m = Self::new();
        for (e, c) in items {
            m.insert(e, c);
        }
        m
    }

    /// Adds `count` copies of `element`.
    pub fn insert(&mut self, element: T, count: u64) {
        if count == 0 {
            return;
        }
        *self.counts.entry(element).or_insert(0) += count;
    }

    pub fn count(&self, element: &T) -> u64 {
        self.counts.get(element).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Number of distinct elements.
    pub fn support_len(&self) -> usize {
        self.counts.len()
    }

    /// Total number of element instances.
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, u64)> + '_ {
        self.counts.iter().map(|(e, c)| (e, *c))
    }

    /// `self ⊆ other`: every count in `self` is at most the count in `other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.counts.iter().all(|(e, c)| other.count(e) >= *c)
    }

    /// Sum union `self ⊎ other`.
    pub fn union(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in other.iter() {
            out.insert(e.clone(), c);
        }
        out
    }

    /// Difference `self ∖ other`; `None` unless `other ⊆ self`.
    pub fn difference(&self, other: &Self) -> Option<Self> {
        if !other.is_subset_of(self) {
            return None;
        }
        let mut out = self.clone();
        for (e, c) in other.iter() {
            let slot = out.counts.get_mut(e).expect("subset checked");
            *slot -= c;
            if *slot == 0 {
                out.counts.remove(e);
            }
        }
        Some(out)
    }
}

impl<T: Ord + Clone> FromIterator<T> for Multiset<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut m = Self::new();
        for e in iter {
            m.insert(e, 1);
        }
        m
    }
}

impl<T: Ord + fmt::Debug> fmt::Debug for Multiset<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, (e, c)) in self.counts.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{e:?}^{c}")?;
        }
        write!(f, "]")
    }
}
