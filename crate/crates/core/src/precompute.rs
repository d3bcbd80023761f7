//! Candidate SDMA sets and the per-(carrier, set) pseudo-inverse cache.
//!
//! Each set's member channels on a carrier are stacked into a `κ × M` matrix
//! and pseudo-inverted once. Column `i` of that pseudo-inverse is the
//! zero-forcing direction of the `i`-th member: it is orthogonal to every
//! other member's channel and has unit gain on its own, so a beam
//! `sqrt(p) · d` delivers received power `p` at transmit power `γ² p`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::ChannelTensor;
use crate::numerics::{pseudo_inverse_with_rank, stack_rows, ComplexVector};

/// Users allowed to share one subcarrier. Members are distinct and ascending.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SdmaSet(Vec<usize>);

impl SdmaSet {
    pub fn new(mut members: Vec<usize>) -> Result<Self> {
        if members.is_empty() {
            return Err(invalid("an SDMA set needs at least one member"));
        }
        members.sort_unstable();
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("SDMA set members must be distinct"));
        }
        Ok(Self(members))
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn size(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.0.binary_search(&k).is_ok()
    }

    pub fn position(&self, k: usize) -> Option<usize> {
        self.0.binary_search(&k).ok()
    }
}

/// All subsets of `0..users` with `1..=min(antennas, users)` members, in
/// lexicographic order of their member lists.
pub fn enumerate_sdma_sets(users: usize, antennas: usize) -> Vec<SdmaSet> {
    fn extend(start: usize, users: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<SdmaSet>) {
        for k in start..users {
            cur.push(k);
            out.push(SdmaSet(cur.clone()));
            if cur.len() < max {
                extend(k + 1, users, max, cur, out);
            }
            cur.pop();
        }
    }
    let mut out = Vec::new();
    let max = antennas.min(users);
    if max > 0 {
        extend(0, users, max, &mut Vec::new(), &mut out);
    }
    out
}

/// Number of sets `sum_{i=1}^{min(M,K)} C(K, i)`.
pub fn count_sdma_sets(users: usize, antennas: usize) -> u64 {
    let mut total = 0u64;
    let mut binom = 1u64;
    for i in 1..=antennas.min(users) {
        binom = binom * (users - i + 1) as u64 / i as u64;
        total += binom;
    }
    total
}

/// Cached zero-forcing directions and gains for every (carrier, set) pair.
///
/// Storage is flat: memberships of all sets are laid out back to back
/// (`offsets[s]..offsets[s + 1]`), and every carrier owns one block of that
/// length.
#[derive(Debug, Clone)]
pub struct SetPrecompute {
    sets: Vec<SdmaSet>,
    offsets: Vec<usize>,
    members: Vec<usize>,
    carriers: usize,
    gamma_sq: Vec<f64>,
    log2_gamma_sq: Vec<f64>,
    directions: Vec<ComplexVector>,
    usable: Vec<bool>,
    channels: ChannelTensor,
}

struct CarrierBlock {
    gamma_sq: Vec<f64>,
    directions: Vec<ComplexVector>,
    usable: Vec<bool>,
}

/// Pseudo-inverts every set's stacked channel matrix on every carrier.
///
/// A set is usable on a carrier iff its stacked matrix has full row rank.
pub fn precompute_all(channels: &ChannelTensor, sets: &[SdmaSet]) -> Result<SetPrecompute> {
    let (users, carriers, m) = (channels.users(), channels.carriers(), channels.antennas());
    if sets.iter().any(|s| s.size() > m) {
        return Err(invalid(format!("set larger than the {m} available antennas")));
    }
    if sets.iter().any(|s| s.members().iter().any(|&k| k >= users)) {
        return Err(invalid("set references a user outside the channel tensor"));
    }
    let mut offsets = Vec::with_capacity(sets.len() + 1);
    let mut members = Vec::new();
    offsets.push(0);
    for s in sets {
        members.extend_from_slice(s.members());
        offsets.push(members.len());
    }

    let blocks: Vec<CarrierBlock> = (0..carriers)
        .into_par_iter()
        .map(|n| -> Result<CarrierBlock> {
            let mut block = CarrierBlock {
                gamma_sq: Vec::with_capacity(members.len()),
                directions: Vec::with_capacity(members.len()),
                usable: Vec::with_capacity(sets.len()),
            };
            for s in sets {
                let rows: Vec<ComplexVector> =
                    s.members().iter().map(|&k| channels.get(k, n).clone()).collect();
                let stacked = stack_rows(&rows)?;
                let pinv = pseudo_inverse_with_rank(&stacked, 0.0)?;
                block.usable.push(pinv.rank == s.size());
                for pos in 0..s.size() {
                    let d = pinv.matrix.column(pos)?;
                    block.gamma_sq.push(d.norm_squared());
                    block.directions.push(d);
                }
            }
            Ok(block)
        })
        .collect::<Result<_>>()?;

    let mut gamma_sq = Vec::with_capacity(carriers * members.len());
    let mut directions = Vec::with_capacity(carriers * members.len());
    let mut usable = Vec::with_capacity(carriers * sets.len());
    for b in blocks {
        gamma_sq.extend(b.gamma_sq);
        directions.extend(b.directions);
        usable.extend(b.usable);
    }
    let log2_gamma_sq = gamma_sq.iter().map(|g: &f64| g.log2()).collect();
    Ok(SetPrecompute {
        sets: sets.to_vec(),
        offsets,
        members,
        carriers,
        gamma_sq,
        log2_gamma_sq,
        directions,
        usable,
        channels: channels.clone(),
    })
}

impl SetPrecompute {
    /// Enumerates every set up to the antenna count and precomputes it.
    pub fn build(channels: &ChannelTensor) -> Result<Self> {
        let sets = enumerate_sdma_sets(channels.users(), channels.antennas());
        precompute_all(channels, &sets)
    }

    pub fn channels(&self) -> &ChannelTensor {
        &self.channels
    }
    pub fn num_sets(&self) -> usize {
        self.sets.len()
    }
    pub fn num_carriers(&self) -> usize {
        self.carriers
    }
    pub fn sets(&self) -> &[SdmaSet] {
        &self.sets
    }
    pub fn set(&self, s: usize) -> &SdmaSet {
        &self.sets[s]
    }
    pub fn is_usable(&self, n: usize, s: usize) -> bool {
        self.usable[n * self.sets.len() + s]
    }

    /// Number of sets usable on carrier `n`.
    pub fn usable_count(&self, n: usize) -> usize {
        (0..self.sets.len()).filter(|&s| self.is_usable(n, s)).count()
    }

    /// Index of the set with exactly these (sorted) members.
    pub fn find_set(&self, members: &[usize]) -> Option<usize> {
        self.sets.binary_search_by(|s| s.members().cmp(members)).ok()
    }

    #[inline]
    fn slot(&self, n: usize, s: usize) -> std::ops::Range<usize> {
        let base = n * self.members.len();
        base + self.offsets[s]..base + self.offsets[s + 1]
    }

    #[inline]
    pub(crate) fn member_range(&self, s: usize) -> std::ops::Range<usize> {
        self.offsets[s]..self.offsets[s + 1]
    }

    #[inline]
    pub(crate) fn flat_members(&self) -> &[usize] {
        &self.members
    }

    #[inline]
    pub(crate) fn carrier_gamma_sq(&self, n: usize) -> &[f64] {
        let t = self.members.len();
        &self.gamma_sq[n * t..(n + 1) * t]
    }

    #[inline]
    pub(crate) fn carrier_log2_gamma_sq(&self, n: usize) -> &[f64] {
        let t = self.members.len();
        &self.log2_gamma_sq[n * t..(n + 1) * t]
    }

    #[inline]
    pub(crate) fn carrier_usable(&self, n: usize) -> &[bool] {
        let s = self.sets.len();
        &self.usable[n * s..(n + 1) * s]
    }

    /// `γ²` of each member of set `s` on carrier `n`, in member order.
    pub fn gamma_sq(&self, n: usize, s: usize) -> &[f64] {
        &self.gamma_sq[self.slot(n, s)]
    }

    /// `γ = |d|` for the member at `pos`.
    pub fn gamma(&self, n: usize, s: usize, pos: usize) -> f64 {
        self.gamma_sq(n, s)[pos].sqrt()
    }

    /// Zero-forcing direction of the member at `pos`.
    pub fn direction(&self, n: usize, s: usize, pos: usize) -> &ComplexVector {
        &self.directions[self.slot(n, s)][pos]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn set_counts() {
        assert_eq!(enumerate_sdma_sets(4, 3).len(), 14);
        assert_eq!(enumerate_sdma_sets(16, 3).len(), 696);
        assert_eq!(enumerate_sdma_sets(2, 5).len(), 3);
        assert_eq!(count_sdma_sets(16, 3), 696);
        assert_eq!(count_sdma_sets(8, 3), 92);
    }

    #[test]
    fn enumeration_is_lexicographic_and_valid() {
        let sets = enumerate_sdma_sets(5, 3);
        assert!(sets.windows(2).all(|w| w[0] < w[1]));
        assert!(sets.iter().all(|s| (1..=3).contains(&s.size())));
        assert_eq!(sets[0].members(), &[0]);
        assert_eq!(sets[1].members(), &[0, 1]);
    }

    #[test]
    fn sdma_set_rejects_duplicates() {
        assert!(SdmaSet::new(vec![]).is_err());
        assert!(SdmaSet::new(vec![2, 2]).is_err());
        assert_eq!(SdmaSet::new(vec![3, 1]).unwrap().members(), &[1, 3]);
    }

    fn channels(rows: &[[Complex64; 2]]) -> ChannelTensor {
        ChannelTensor::from_fn(rows.len(), 1, 2, |k, _| rows[k].to_vec()).unwrap()
    }

    #[test]
    fn singleton_matches_closed_form() {
        let h = [Complex64::new(0.6, -0.8), Complex64::new(1.5, 0.5)];
        let ch = channels(&[h]);
        let pre = SetPrecompute::build(&ch).unwrap();
        let norm2: f64 = h.iter().map(|z| z.norm_sqr()).sum();
        assert!(pre.is_usable(0, 0));
        assert!((pre.gamma(0, 0, 0) - 1.0 / norm2.sqrt()).abs() < 1e-14);
        let d = pre.direction(0, 0, 0);
        for (di, hi) in d.as_slice().iter().zip(&h) {
            assert!((di - hi.conj() / norm2).norm() < 1e-14);
        }
    }

    #[test]
    fn orthonormal_pair_has_unit_gammas() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let ch = channels(&[
            [Complex64::new(s, 0.0), Complex64::new(0.0, s)],
            [Complex64::new(0.0, s), Complex64::new(s, 0.0)],
        ]);
        let pre = SetPrecompute::build(&ch).unwrap();
        let pair = pre.find_set(&[0, 1]).unwrap();
        assert!(pre.is_usable(0, pair));
        assert!((pre.gamma(0, pair, 0) - 1.0).abs() < 1e-12);
        assert!((pre.gamma(0, pair, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_channels_are_unusable() {
        let h = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
        let pre = SetPrecompute::build(&channels(&[h, h])).unwrap();
        let pair = pre.find_set(&[0, 1]).unwrap();
        assert!(!pre.is_usable(0, pair));
        assert!(pre.is_usable(0, pre.find_set(&[1]).unwrap()));
    }
}
