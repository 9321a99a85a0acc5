//! Subsets of ℕ in finite, cofinite or full form.

use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum NatSet {
    /// Sorted, duplicate-free elements.
    Finite(Vec<u64>),
    /// Everything except the listed (sorted, duplicate-free) elements; never empty.
    CoFinite(Vec<u64>),
    All,
}

fn canonical(mut v: Vec<u64>) -> Vec<u64> {
    v.sort_unstable();
    v.dedup();
    v
}

impl NatSet {
    pub fn empty() -> Self {
        NatSet::Finite(Vec::new())
    }

    pub fn finite<I: IntoIterator<Item = u64>>(elements: I) -> Self {
        NatSet::Finite(canonical(elements.into_iter().collect()))
    }

    /// `{0, 1, …, last}`.
    pub fn prefix(last: u64) -> Self {
        NatSet::Finite((0..=last).collect())
    }

    pub fn singleton(n: u64) -> Self {
        NatSet::Finite(vec![n])
    }

    /// Complement of `excluded`; an empty exclusion list gives [`NatSet::All`].
    pub fn cofinite<I: IntoIterator<Item = u64>>(excluded: I) -> Self {
        let v = canonical(excluded.into_iter().collect());
        if v.is_empty() {
            NatSet::All
        } else {
            NatSet::CoFinite(v)
        }
    }

    pub fn contains(&self, n: u64) -> bool {
        match self {
            NatSet::Finite(v) => v.binary_search(&n).is_ok(),
            NatSet::CoFinite(v) => v.binary_search(&n).is_err(),
            NatSet::All => true,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, NatSet::Finite(_))
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, NatSet::Finite(v) if v.is_empty())
    }

    /// Listed elements (members for `Finite`, exclusions for `CoFinite`).
    pub fn elements(&self) -> &[u64] {
        match self {
            NatSet::Finite(v) | NatSet::CoFinite(v) => v,
            NatSet::All => &[],
        }
    }

    pub fn complement(&self) -> NatSet {
        match self {
            NatSet::Finite(v) => NatSet::cofinite(v.iter().copied()),
            NatSet::CoFinite(v) => NatSet::Finite(v.clone()),
            NatSet::All => NatSet::empty(),
        }
    }

    pub fn union(&self, other: &NatSet) -> NatSet {
        use NatSet::*;
        match (self, other) {
            (All, _) | (_, All) => All,
            (Finite(a), Finite(b)) => NatSet::finite(a.iter().chain(b).copied()),
            (Finite(a), CoFinite(e)) | (CoFinite(e), Finite(a)) => {
                NatSet::cofinite(e.iter().copied().filter(|n| a.binary_search(n).is_err()))
            }
            (CoFinite(e1), CoFinite(e2)) => {
                NatSet::cofinite(e1.iter().copied().filter(|n| e2.binary_search(n).is_ok()))
            }
        }
    }

    pub fn intersection(&self, other: &NatSet) -> NatSet {
        self.complement().union(&other.complement()).complement()
    }

    /// Members not above `last`, in increasing order.
    pub fn members_up_to(&self, last: u64) -> impl Iterator<Item = u64> + '_ {
        let (list, include): (&[u64], bool) = match self {
            NatSet::Finite(v) => (v, true),
            NatSet::CoFinite(v) => (v, false),
            NatSet::All => (&[], false),
        };
        let finite: Box<dyn Iterator<Item = u64>> = if include {
            Box::new(list.iter().copied().take_while(move |&n| n <= last))
        } else {
            let mut skip = list.iter().copied().peekable();
            Box::new((0..=last).filter(move |&n| {
                while skip.peek().is_some_and(|&e| e < n) {
                    skip.next();
                }
                skip.peek() != Some(&n)
            }))
        };
        finite
    }
}

impl fmt::Display for NatSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NatSet::Finite(v) => write!(f, "{v:?}"),
            NatSet::CoFinite(v) => write!(f, "ℕ \\ {v:?}"),
            NatSet::All => write!(f, "ℕ"),
        }
    }
}
