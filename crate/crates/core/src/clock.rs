use std::cmp::Ordering;
use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::codec::{Canonical, DecodeError, Decoder, Encoder};
use crate::config::PartyId;

/// Per-sender delivery counters: `counts[j]` is the number of transactions
/// bcch-delivered from party `j`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VectorClock(Vec<u64>);

impl VectorClock {
    pub fn new(n: usize) -> Self {
        VectorClock(vec![0; n])
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        VectorClock(counts)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, p: PartyId) -> u64 {
        self.0[p.index()]
    }

    pub fn increment(&mut self, p: PartyId) {
        self.0[p.index()] += 1;
    }

    pub fn counts(&self) -> &[u64] {
        &self.0
    }

    pub fn counts_mut(&mut self) -> &mut [u64] {
        &mut self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }
}

impl Index<usize> for VectorClock {
    type Output = u64;
    fn index(&self, i: usize) -> &u64 {
        &self.0[i]
    }
}

/// Componentwise order; clocks of different length are incomparable.
impl PartialOrd for VectorClock {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        if self.0.len() != other.0.len() {
            return None;
        }
        let le = self.0.iter().zip(&other.0).all(|(a, b)| a <= b);
        let ge = self.0.iter().zip(&other.0).all(|(a, b)| a >= b);
        match (le, ge) {
            (true, true) => Some(Ordering::Equal),
            (true, false) => Some(Ordering::Less),
            (false, true) => Some(Ordering::Greater),
            (false, false) => None,
        }
    }
}

impl Canonical for VectorClock {
    fn encode(&self, enc: &mut Encoder) {
        enc.len(self.0.len());
        for c in &self.0 {
            enc.u64(*c);
        }
    }

    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let n = dec.len()?;
        (0..n)
            .map(|_| dec.u64())
            .collect::<Result<_, _>>()
            .map(VectorClock)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn vc(v: &[u64]) -> VectorClock {
        VectorClock::from_counts(v.to_vec())
    }

    #[test]
    fn comparisons() {
        assert!(vc(&[1, 2]) <= vc(&[1, 3]));
        assert!(vc(&[1, 2]) < vc(&[1, 3]));
        assert_eq!(vc(&[2, 1]).partial_cmp(&vc(&[1, 2])), None);
        assert_eq!(vc(&[1]).partial_cmp(&vc(&[1, 0])), None);
    }

    #[test]
    fn increment_counts_sender() {
        let mut c = VectorClock::new(3);
        c.increment(PartyId(2));
        assert_eq!(c.counts(), &[0, 0, 1]);
        assert_eq!(c.total(), 1);
    }

    proptest! {
        #[test]
        fn componentwise_order_is_partial_order(
            a in proptest::collection::vec(0u64..4, 3),
            b in proptest::collection::vec(0u64..4, 3),
            c in proptest::collection::vec(0u64..4, 3),
        ) {
            let (a, b, c) = (vc(&a), vc(&b), vc(&c));
            prop_assert!(a <= a);
            if a <= b && b <= a {
                prop_assert_eq!(&a, &b);
            }
            if a <= b && b <= c {
                prop_assert!(a <= c);
            }
        }
    }
}
