use crate::error::{Error, Result};

/// Which way particle number flows through a leg.
///
/// Incoming legs count with `+1` in the conservation rule, outgoing legs with
/// `-1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    In,
    Out,
}

impl Direction {
    pub fn sign(self) -> i32 {
        match self {
            Direction::In => 1,
            Direction::Out => -1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Direction::In => Direction::Out,
            Direction::Out => Direction::In,
        }
    }
}

/// One tensor index decomposed into U(1) particle-number sectors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChargeLeg {
    charges: Vec<i32>,
    degeneracies: Vec<usize>,
    direction: Direction,
}

impl ChargeLeg {
    /// Charges must be strictly increasing and every degeneracy at least one.
    pub fn new(charges: Vec<i32>, degeneracies: Vec<usize>, direction: Direction) -> Result<Self> {
        if charges.len() != degeneracies.len() {
            return Err(Error::Charge(format!(
                "{} charges but {} degeneracies",
                charges.len(),
                degeneracies.len()
            )));
        }
        if charges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Charge(format!("charges not strictly increasing: {charges:?}")));
        }
        if degeneracies.iter().any(|&g| g == 0) {
            return Err(Error::Charge("zero degeneracy".into()));
        }
        Ok(Self { charges, degeneracies, direction })
    }

    /// Builds a leg from `(charge, degeneracy)` pairs in any order, merging
    /// repeated charges.
    pub fn from_sectors(sectors: impl IntoIterator<Item = (i32, usize)>, direction: Direction) -> Result<Self> {
        let mut merged = std::collections::BTreeMap::new();
        for (q, g) in sectors {
            *merged.entry(q).or_insert(0usize) += g;
        }
        let (charges, degeneracies) = merged.into_iter().filter(|&(_, g)| g > 0).unzip();
        Self::new(charges, degeneracies, direction)
    }

    /// The physical leg of a site with local dimension `d`: one sector per
    /// occupation number.
    pub fn physical(d: usize) -> Self {
        Self {
            charges: (0..d as i32).collect(),
            degeneracies: vec![1; d],
            direction: Direction::In,
        }
    }

    /// A one-dimensional leg carrying a single charge.
    pub fn trivial(charge: i32, direction: Direction) -> Self {
        Self { charges: vec![charge], degeneracies: vec![1], direction }
    }

    pub fn charges(&self) -> &[i32] {
        &self.charges
    }

    pub fn degeneracies(&self) -> &[usize] {
        &self.degeneracies
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn sign(&self) -> i32 {
        self.direction.sign()
    }

    pub fn dim(&self) -> usize {
        self.degeneracies.iter().sum()
    }

    pub fn num_sectors(&self) -> usize {
        self.charges.len()
    }

    pub fn position(&self, charge: i32) -> Option<usize> {
        self.charges.binary_search(&charge).ok()
    }

    pub fn sector_dim(&self, charge: i32) -> Option<usize> {
        self.position(charge).map(|p| self.degeneracies[p])
    }

    /// Offset of the sector's first basis state in the dense index.
    pub fn offset(&self, charge: i32) -> Option<usize> {
        let p = self.position(charge)?;
        Some(self.degeneracies[..p].iter().sum())
    }

    pub fn sectors(&self) -> impl Iterator<Item = (i32, usize)> + '_ {
        self.charges.iter().copied().zip(self.degeneracies.iter().copied())
    }

    /// Same sectors, opposite direction: the leg that contracts with this one.
    pub fn dual(&self) -> Self {
        Self { direction: self.direction.flip(), ..self.clone() }
    }

    /// True when `other` can be contracted against `self`.
    pub fn contracts_with(&self, other: &ChargeLeg) -> bool {
        self.charges == other.charges
            && self.degeneracies == other.degeneracies
            && self.direction != other.direction
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsorted_or_empty_sectors() {
        assert!(ChargeLeg::new(vec![1, 0], vec![1, 1], Direction::In).is_err());
        assert!(ChargeLeg::new(vec![0, 1], vec![1, 0], Direction::In).is_err());
        assert!(ChargeLeg::new(vec![0], vec![1, 2], Direction::In).is_err());
    }

    #[test]
    fn offsets_and_dims() {
        let leg = ChargeLeg::new(vec![-1, 2, 5], vec![2, 3, 1], Direction::Out).unwrap();
        assert_eq!(leg.dim(), 6);
        assert_eq!(leg.offset(2), Some(2));
        assert_eq!(leg.offset(5), Some(5));
        assert_eq!(leg.sector_dim(3), None);
        assert!(leg.contracts_with(&leg.dual()));
        assert!(!leg.contracts_with(&leg));
    }

    #[test]
    fn from_sectors_merges() {
        let leg = ChargeLeg::from_sectors([(3, 1), (1, 2), (3, 2)], Direction::In).unwrap();
        assert_eq!(leg.charges(), &[1, 3]);
        assert_eq!(leg.degeneracies(), &[2, 3]);
    }
}
