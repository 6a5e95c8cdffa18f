//! Spin configurations and fixed-`S^z_tot` sector bases.

use crate::{Error, Result};
use std::collections::HashMap;

/// A spin configuration in the `S^z` basis: one entry of `+1` or `-1` per
/// site, with the physical spin given by `S^z_i = sigma_i / 2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinConfiguration {
    sigma: Vec<i8>,
}

impl SpinConfiguration {
    pub fn new(sigma: Vec<i8>) -> Result<Self> {
        if sigma.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidConfig(
                "spin entries must be +1 or -1".into(),
            ));
        }
        Ok(Self { sigma })
    }

    /// Build from a bitmask where bit `i` set means spin up at site `i`.
    pub fn from_mask(mask: u64, length: usize) -> Self {
        let sigma = (0..length)
            .map(|i| if mask >> i & 1 == 1 { 1 } else { -1 })
            .collect();
        Self { sigma }
    }

    pub fn to_mask(&self) -> u64 {
        self.sigma
            .iter()
            .enumerate()
            .fold(0u64, |m, (i, &s)| if s == 1 { m | 1 << i } else { m })
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn spins(&self) -> &[i8] {
        &self.sigma
    }

    pub fn spin(&self, site: usize) -> i8 {
        self.sigma[site]
    }

    pub fn spin_f64(&self, site: usize) -> f64 {
        f64::from(self.sigma[site])
    }

    /// Sum of the +-1 entries, i.e. `2 S^z_tot`.
    pub fn total_sigma(&self) -> i32 {
        self.sigma.iter().map(|&s| i32::from(s)).sum()
    }

    /// Negate the spins at the given sites, in place.
    pub fn flip(&mut self, sites: &[usize]) {
        for &i in sites {
            self.sigma[i] = -self.sigma[i];
        }
    }

    /// A copy with the spins at `sites` negated.
    pub fn flipped(&self, sites: &[usize]) -> Self {
        let mut out = self.clone();
        out.flip(sites);
        out
    }

    /// Cyclic translation by `shift` sites: the returned configuration has
    /// entry `sigma[(i + shift) % L]` at site `i`. Used to evaluate
    /// translated wavefunctions, `(T_n chi)(sigma) = chi(rotated(sigma, n))`.
    pub fn rotated(&self, shift: usize) -> Self {
        let l = self.sigma.len();
        let sigma = (0..l).map(|i| self.sigma[(i + shift) % l]).collect();
        Self { sigma }
    }

    pub fn site_indices(&self) -> std::ops::Range<usize> {
        0..self.sigma.len()
    }

    /// Sites with spin up / spin down.
    pub fn partition_sites(&self) -> (Vec<usize>, Vec<usize>) {
        let mut up = Vec::new();
        let mut down = Vec::new();
        for (i, &s) in self.sigma.iter().enumerate() {
            if s == 1 {
                up.push(i);
            } else {
                down.push(i);
            }
        }
        (up, down)
    }
}

/// All configurations of a chain with fixed `total_sigma = 2 S^z_tot`,
/// in stable lexicographic (ascending bitmask) order, with index lookups
/// both ways.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    length: usize,
    total_sigma: i32,
    masks: Vec<u64>,
    index: HashMap<u64, usize>,
}

impl SectorBasis {
    pub fn new(length: usize, total_sigma: i32) -> Result<Self> {
        if length == 0 || length > 63 {
            return Err(Error::InvalidConfig(format!(
                "chain length {length} unsupported"
            )));
        }
        let total = i64::from(total_sigma);
        let l = length as i64;
        if (l + total) % 2 != 0 || total.abs() > l {
            return Err(Error::InvalidConfig(format!(
                "sector 2*Sz = {total_sigma} impossible for length {length}"
            )));
        }
        let n_up = ((l + total) / 2) as u32;
        let mut masks = Vec::new();
        for mask in 0..(1u64 << length) {
            if mask.count_ones() == n_up {
                masks.push(mask);
            }
        }
        let index = masks.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        Ok(Self {
            length,
            total_sigma,
            masks,
            index,
        })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn total_sigma(&self) -> i32 {
        self.total_sigma
    }

    pub fn size(&self) -> usize {
        self.masks.len()
    }

    pub fn config(&self, index: usize) -> SpinConfiguration {
        SpinConfiguration::from_mask(self.masks[index], self.length)
    }

    pub fn index_of(&self, config: &SpinConfiguration) -> Option<usize> {
        self.index.get(&config.to_mask()).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = SpinConfiguration> + '_ {
        self.masks
            .iter()
            .map(|&m| SpinConfiguration::from_mask(m, self.length))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_entries() {
        assert!(SpinConfiguration::new(vec![1, 0, -1]).is_err());
        assert!(SpinConfiguration::new(vec![1, 1, -1, -1]).is_ok());
    }

    #[test]
    fn mask_round_trip() {
        let c = SpinConfiguration::new(vec![1, -1, -1, 1]).unwrap();
        let back = SpinConfiguration::from_mask(c.to_mask(), 4);
        assert_eq!(c, back);
    }

    #[test]
    fn sector_size_is_binomial() {
        let b = SectorBasis::new(6, 0).unwrap();
        assert_eq!(b.size(), 20);
        let b = SectorBasis::new(4, 0).unwrap();
        assert_eq!(b.size(), 6);
        let b = SectorBasis::new(4, 2).unwrap();
        assert_eq!(b.size(), 4);
        assert!(SectorBasis::new(4, 1).is_err());
    }

    #[test]
    fn all_members_in_sector_and_indexed() {
        let b = SectorBasis::new(6, 2).unwrap();
        for (i, c) in b.iter().enumerate() {
            assert_eq!(c.total_sigma(), 2);
            assert_eq!(b.index_of(&c), Some(i));
        }
    }

    #[test]
    fn rotation_translates_entries() {
        let c = SpinConfiguration::new(vec![1, 1, -1, -1]).unwrap();
        let r = c.rotated(1);
        assert_eq!(r.spins(), &[1, -1, -1, 1]);
        assert_eq!(c.rotated(4), c);
    }

    #[test]
    fn flip_twice_is_identity() {
        let c = SpinConfiguration::new(vec![1, -1, 1, -1]).unwrap();
        let f = c.flipped(&[0, 3]).flipped(&[0, 3]);
        assert_eq!(c, f);
    }
}
