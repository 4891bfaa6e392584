//! Set-partition algebra between full (moment) and truncated (cumulant)
//! correlation hierarchies.
//!
//! `W(x_1..x_l) = Σ_{partitions} Π_{blocks} W^T(x_block)`, and its inverse
//! obtained by solving for the single-block term order by order. Everything
//! here is generic over a commutative ring, so the identities can be checked
//! exactly with rationals as well as in floating point.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use num_traits::Num;
use serde::Serialize;

use crate::error::{Error, Result};

/// Largest set size for which partitions are enumerated.
pub const MAX_PARTITION_ORDER: usize = 6;

/// A partition of `{0, .., l-1}`; blocks sorted by their least element,
/// elements within a block ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    pub blocks: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PartitionSet {
    pub l: usize,
    pub partitions: Vec<Partition>,
}

impl PartitionSet {
    pub fn len(&self) -> usize {
        self.partitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partitions.is_empty()
    }
}

fn build(l: usize) -> PartitionSet {
    // Restricted growth strings in lexicographic order.
    let mut out = Vec::new();
    let mut rgs = vec![0usize; l];
    loop {
        let nblocks = rgs.iter().copied().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); nblocks];
        for (i, &b) in rgs.iter().enumerate() {
            blocks[b].push(i);
        }
        out.push(Partition { blocks });
        // advance
        let mut i = l;
        loop {
            if i <= 1 {
                return PartitionSet { l, partitions: out };
            }
            i -= 1;
            let prefix_max = rgs[..i].iter().copied().max().unwrap_or(0);
            if rgs[i] <= prefix_max {
                rgs[i] += 1;
                for r in rgs.iter_mut().skip(i + 1) {
                    *r = 0;
                }
                break;
            }
        }
    }
}

/// All set partitions of an `l`-element set, `1 <= l <= 6`, in canonical
/// order. Tables are built once and shared.
pub fn enumerate_partitions(l: usize) -> Result<&'static PartitionSet> {
    static TABLES: OnceLock<Vec<PartitionSet>> = OnceLock::new();
    if !(1..=MAX_PARTITION_ORDER).contains(&l) {
        return Err(Error::Domain(format!(
            "partition order l = {l} outside 1..={MAX_PARTITION_ORDER}"
        )));
    }
    let tables = TABLES.get_or_init(|| (1..=MAX_PARTITION_ORDER).map(build).collect());
    Ok(&tables[l - 1])
}

/// `Σ_{partitions of l} Π_{blocks} block_value(block)`.
pub fn partition_sum<T, F>(l: usize, mut block_value: F) -> Result<T>
where
    T: Clone + Num,
    F: FnMut(&[usize]) -> Result<T>,
{
    let set = enumerate_partitions(l)?;
    let mut total = T::zero();
    for p in &set.partitions {
        let mut prod = T::one();
        for b in &p.blocks {
            prod = prod * block_value(b)?;
        }
        total = total + prod;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HierarchyKind {
    Moments,
    Cumulants,
}

/// Correlation values indexed by point tuples. A key is the sorted multiset
/// of site labels (repeats allowed); its length is the order.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyTable<T> {
    pub kind: HierarchyKind,
    entries: BTreeMap<Vec<usize>, T>,
}

impl<T: Clone> HierarchyTable<T> {
    pub fn new(kind: HierarchyKind) -> Self {
        HierarchyTable {
            kind,
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, mut key: Vec<usize>, value: T) {
        key.sort_unstable();
        self.entries.insert(key, value);
    }

    pub fn get(&self, key: &[usize]) -> Option<&T> {
        let mut k = key.to_vec();
        k.sort_unstable();
        self.entries.get(&k)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vec<usize>, &T)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_order(&self) -> usize {
        self.entries.keys().map(Vec::len).max().unwrap_or(0)
    }

    /// Keys in order of increasing length, lexicographic within a length.
    fn keys_by_order(&self) -> Vec<Vec<usize>> {
        let mut keys: Vec<Vec<usize>> = self.entries.keys().cloned().collect();
        keys.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        keys
    }
}

fn sub_key(key: &[usize], block: &[usize]) -> Vec<usize> {
    let mut k: Vec<usize> = block.iter().map(|&i| key[i]).collect();
    k.sort_unstable();
    k
}

fn check_orders<T: Clone>(h: &HierarchyTable<T>) -> Result<()> {
    if h.entries.keys().any(Vec::is_empty) {
        return Err(Error::Domain("hierarchy keys must be non-empty".into()));
    }
    let max = h.max_order();
    if max > MAX_PARTITION_ORDER {
        return Err(Error::Domain(format!(
            "hierarchy order {max} exceeds {MAX_PARTITION_ORDER}"
        )));
    }
    for l in 1..=max {
        if !h.entries.keys().any(|k| k.len() == l) {
            return Err(Error::MissingOrder(l));
        }
    }
    Ok(())
}

fn lookup<T: Clone>(table: &BTreeMap<Vec<usize>, T>, key: Vec<usize>) -> Result<T> {
    let order = key.len();
    table.get(&key).cloned().ok_or(Error::MissingOrder(order))
}

/// `W(t) = Σ_π Π_b W^T(t_b)` for every tuple in the table.
pub fn cumulants_to_moments<T: Clone + Num>(h: &HierarchyTable<T>) -> Result<HierarchyTable<T>> {
    if h.kind != HierarchyKind::Cumulants {
        return Err(Error::Domain("expected a cumulant table".into()));
    }
    check_orders(h)?;
    let mut out = HierarchyTable::new(HierarchyKind::Moments);
    for key in h.keys_by_order() {
        let v = partition_sum(key.len(), |b| lookup(&h.entries, sub_key(&key, b)))?;
        out.entries.insert(key, v);
    }
    Ok(out)
}

/// Inverse of [`cumulants_to_moments`]: for each tuple, in increasing order,
/// `W^T(t) = W(t) - Σ_{π with ≥ 2 blocks} Π_b W^T(t_b)`.
pub fn moments_to_cumulants<T: Clone + Num>(h: &HierarchyTable<T>) -> Result<HierarchyTable<T>> {
    if h.kind != HierarchyKind::Moments {
        return Err(Error::Domain("expected a moment table".into()));
    }
    check_orders(h)?;
    let mut cum: BTreeMap<Vec<usize>, T> = BTreeMap::new();
    for key in h.keys_by_order() {
        let set = enumerate_partitions(key.len())?;
        let mut rest = T::zero();
        for p in set.partitions.iter().filter(|p| p.blocks.len() >= 2) {
            let mut prod = T::one();
            for b in &p.blocks {
                prod = prod * lookup(&cum, sub_key(&key, b))?;
            }
            rest = rest + prod;
        }
        let w = h.entries[&key].clone();
        cum.insert(key, w - rest);
    }
    Ok(HierarchyTable {
        kind: HierarchyKind::Cumulants,
        entries: cum,
    })
}

fn check_vectors<T>(v: &[Vec<T>]) -> Result<usize> {
    let Some(first) = v.first() else {
        return Err(Error::Dimension("need at least one momentum vector (l >= 2)".into()));
    };
    let n = first.len();
    if n == 0 || v.iter().any(|x| x.len() != n) {
        return Err(Error::Dimension(format!(
            "momentum vectors must share one non-zero dimension; got lengths {:?}",
            v.iter().map(Vec::len).collect::<Vec<_>>()
        )));
    }
    Ok(n)
}

/// Recovers `p_1..p_{l-1}` from the partial sums `q_i = Σ_{j<=i} p_j`.
pub fn momenta_from_partial_sums<T: Clone + Num>(q: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    check_vectors(q)?;
    let mut p = Vec::with_capacity(q.len());
    p.push(q[0].clone());
    for w in q.windows(2) {
        p.push(w[1].iter().zip(&w[0]).map(|(a, b)| a.clone() - b.clone()).collect());
    }
    Ok(p)
}

/// `q_i = Σ_{j<=i} p_j`.
pub fn partial_sums<T: Clone + Num>(p: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    let n = check_vectors(p)?;
    let mut acc = vec![T::zero(); n];
    Ok(p
        .iter()
        .map(|v| {
            for (a, x) in acc.iter_mut().zip(v) {
                *a = a.clone() + x.clone();
            }
            acc.clone()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    fn bell_recurrence(n: usize) -> u64 {
        // B_{m+1} = Σ_k C(m, k) B_k
        let mut b = vec![1u64];
        for m in 0..n {
            let mut c = 1u64;
            let mut s = 0u64;
            for k in 0..=m {
                s += c * b[k];
                c = c * (m - k) as u64 / (k + 1) as u64;
            }
            b.push(s);
        }
        b[n]
    }

    #[test]
    fn counts_are_bell_numbers() {
        for l in 1..=6 {
            assert_eq!(enumerate_partitions(l).unwrap().len() as u64, bell_recurrence(l), "l = {l}");
        }
        assert_eq!(enumerate_partitions(3).unwrap().len(), 5);
        assert_eq!(enumerate_partitions(4).unwrap().len(), 15);
    }

    #[test]
    fn partitions_are_canonical_and_cover() {
        for l in 1..=6 {
            for p in &enumerate_partitions(l).unwrap().partitions {
                let mut all: Vec<usize> = p.blocks.iter().flatten().copied().collect();
                all.sort_unstable();
                assert_eq!(all, (0..l).collect::<Vec<_>>());
                let leasts: Vec<usize> = p.blocks.iter().map(|b| b[0]).collect();
                assert!(leasts.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn out_of_range_orders() {
        assert!(enumerate_partitions(0).is_err());
        assert!(enumerate_partitions(7).is_err());
    }

    #[test]
    fn product_state_has_no_connected_part() {
        let m = Rational64::new(3, 2);
        let mut h = HierarchyTable::new(HierarchyKind::Moments);
        h.insert(vec![0], m);
        h.insert(vec![0, 0], m * m);
        let c = moments_to_cumulants(&h).unwrap();
        assert_eq!(*c.get(&[0, 0]).unwrap(), Rational64::from_integer(0));
    }

    #[test]
    fn only_first_cumulant_gives_powers() {
        let m = Rational64::new(-2, 3);
        let mut h = HierarchyTable::new(HierarchyKind::Cumulants);
        let mut key = Vec::new();
        for l in 1..=5 {
            key.push(0);
            h.insert(key.clone(), if l == 1 { m } else { Rational64::from_integer(0) });
        }
        let w = cumulants_to_moments(&h).unwrap();
        for l in 1..=5usize {
            assert_eq!(*w.get(&vec![0; l]).unwrap(), num_traits::pow(m, l));
        }
    }

    #[test]
    fn third_cumulant_alone() {
        let mut h = HierarchyTable::new(HierarchyKind::Cumulants);
        for k in [vec![0], vec![1], vec![2]] {
            h.insert(k, 0.0);
        }
        for k in [vec![0, 1], vec![0, 2], vec![1, 2]] {
            h.insert(k, 0.0);
        }
        h.insert(vec![0, 1, 2], 0.7);
        let w = cumulants_to_moments(&h).unwrap();
        assert_eq!(*w.get(&[0, 1, 2]).unwrap(), 0.7);
    }

    #[test]
    fn missing_order_is_named() {
        let mut h = HierarchyTable::new(HierarchyKind::Cumulants);
        h.insert(vec![0, 1], 1.0);
        assert_eq!(cumulants_to_moments(&h).unwrap_err(), Error::MissingOrder(1));
        let mut h = HierarchyTable::new(HierarchyKind::Moments);
        h.insert(vec![0], 1.0);
        h.insert(vec![0, 1], 1.0);
        assert_eq!(moments_to_cumulants(&h).unwrap_err(), Error::MissingOrder(1));
    }

    #[test]
    fn momentum_conversion() {
        let p = momenta_from_partial_sums(&[vec![1.0, 2.0], vec![4.0, 0.0]]).unwrap();
        assert_eq!(p, vec![vec![1.0, 2.0], vec![3.0, -2.0]]);
        assert_eq!(partial_sums(&p).unwrap(), vec![vec![1.0, 2.0], vec![4.0, 0.0]]);
        let single = momenta_from_partial_sums(&[vec![5]]).unwrap();
        assert_eq!(single, vec![vec![5]]);
        assert!(momenta_from_partial_sums::<f64>(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(partial_sums::<f64>(&[]).is_err());
    }
}
