//! GF(2) dependencies among parity rows.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{Instance, ParityRow};

/// Longest prefix accepted by the subset-enumeration oracle.
pub const BRUTE_FORCE_MAX_ROWS: usize = 20;

/// Rows whose parity vectors sum to zero, so the product of their values is a square.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SquareCertificate {
    /// Ascending 0-based row indices.
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Insert {
    Independent,
    Dependency(SquareCertificate),
}

#[derive(Debug, Clone, Default)]
struct Provenance(Vec<u64>);

impl Provenance {
    fn single(i: usize) -> Self {
        let mut words = vec![0u64; i / 64 + 1];
        words[i / 64] |= 1 << (i % 64);
        Provenance(words)
    }

    fn xor(&mut self, other: &Provenance) {
        if self.0.len() < other.0.len() {
            self.0.resize(other.0.len(), 0);
        }
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a ^= b;
        }
    }

    fn members(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (w, &word) in self.0.iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                out.push(w * 64 + bits.trailing_zeros() as usize);
                bits &= bits - 1;
            }
        }
        out
    }
}

/// Symmetric difference of two ascending index lists.
fn sym_diff(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Incremental row basis. Each stored row is keyed by its largest index.
#[derive(Debug, Clone, Default)]
pub struct GF2Basis {
    pivots: BTreeMap<u32, (Vec<u32>, Provenance)>,
    #[cfg(debug_assertions)]
    originals: Vec<Vec<u32>>,
}

impl GF2Basis {
    pub fn new() -> Self {
        GF2Basis::default()
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// Reduce `row` (ascending prime indices) labelled `index` against the basis.
    /// Indices should be inserted in increasing order.
    pub fn insert_row(&mut self, row: &[u32], index: usize) -> Insert {
        debug_assert!(row.windows(2).all(|w| w[0] < w[1]));
        #[cfg(debug_assertions)]
        {
            if self.originals.len() <= index {
                self.originals.resize(index + 1, Vec::new());
            }
            self.originals[index] = row.to_vec();
        }
        let mut cur = row.to_vec();
        let mut prov = Provenance::single(index);
        while let Some(&top) = cur.last() {
            match self.pivots.get(&top) {
                Some((r, p)) => {
                    cur = sym_diff(&cur, r);
                    prov.xor(p);
                }
                None => {
                    #[cfg(debug_assertions)]
                    self.check_provenance(&cur, &prov);
                    self.pivots.insert(top, (cur, prov));
                    return Insert::Independent;
                }
            }
        }
        Insert::Dependency(SquareCertificate { rows: prov.members() })
    }

    #[cfg(debug_assertions)]
    fn check_provenance(&self, row: &[u32], prov: &Provenance) {
        let mut acc: Vec<u32> = Vec::new();
        for i in prov.members() {
            acc = sym_diff(&acc, &self.originals[i]);
        }
        assert_eq!(acc, row, "provenance does not reproduce the reduced row");
    }
}

/// Outcome of streaming rows into a fresh basis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Threshold {
    /// The first `t` rows contain a dependency and the first `t - 1` do not.
    Found { t: usize, certificate: SquareCertificate },
    Exhausted { rows: usize },
}

impl Threshold {
    pub fn t(&self) -> Option<usize> {
        match self {
            Threshold::Found { t, .. } => Some(*t),
            Threshold::Exhausted { .. } => None,
        }
    }
}

/// Insert rows in order until the first dependency.
pub fn find_t_rows<'r>(rows: impl IntoIterator<Item = &'r ParityRow>) -> Threshold {
    let mut basis = GF2Basis::new();
    let mut n = 0;
    for (i, row) in rows.into_iter().enumerate() {
        n = i + 1;
        if let Insert::Dependency(certificate) = basis.insert_row(&row.odd_primes, i) {
            return Threshold::Found { t: i + 1, certificate };
        }
    }
    Threshold::Exhausted { rows: n }
}

pub fn find_t(instance: &Instance) -> Threshold {
    find_t_rows(&instance.rows)
}

/// Full factorization by trial division, independent of any prime table.
fn factorize(mut a: u64, out: &mut BTreeMap<u64, u64>) {
    let mut d = 2u64;
    while d * d <= a {
        while a % d == 0 {
            *out.entry(d).or_insert(0) += 1;
            a /= d;
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if a > 1 {
        *out.entry(a).or_insert(0) += 1;
    }
}

/// Whether the product of the certified values has only even exponents.
pub fn verify_certificate(instance: &Instance, cert: &SquareCertificate) -> Result<bool> {
    if cert.rows.is_empty() {
        return Err(Error::Input("empty certificate".into()));
    }
    let mut exps = BTreeMap::new();
    for &i in &cert.rows {
        let row = instance
            .rows
            .get(i)
            .ok_or_else(|| Error::Input(format!("row {i} out of range ({} rows)", instance.rows.len())))?;
        factorize(row.value, &mut exps);
    }
    Ok(exps.values().all(|e| e % 2 == 0))
}

/// Smallest `n` such that a nonempty subset of the first `n` rows sums to zero,
/// by enumerating every subset in Gray-code order.
pub fn brute_force_min_dependency(rows: &[ParityRow]) -> Result<Option<usize>> {
    if rows.len() > BRUTE_FORCE_MAX_ROWS {
        return Err(Error::Resource(format!(
            "brute force limited to {BRUTE_FORCE_MAX_ROWS} rows, got {}",
            rows.len()
        )));
    }
    let mut cols: Vec<u32> = rows.iter().flat_map(|r| r.odd_primes.iter().copied()).collect();
    cols.sort_unstable();
    cols.dedup();
    let words = cols.len().div_ceil(64).max(1);
    let vecs: Vec<Vec<u64>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![0u64; words];
            for j in &r.odd_primes {
                let b = cols.binary_search(j).expect("collected column");
                v[b / 64] |= 1 << (b % 64);
            }
            v
        })
        .collect();
    let mut cur = vec![0u64; words];
    let mut best: Option<usize> = None;
    let mut prev_gray = 0u32;
    for g in 1u32..(1u32 << rows.len()) {
        let gray = g ^ (g >> 1);
        let flip = (gray ^ prev_gray).trailing_zeros() as usize;
        prev_gray = gray;
        for (a, b) in cur.iter_mut().zip(&vecs[flip]) {
            *a ^= b;
        }
        if cur.iter().all(|&w| w == 0) {
            let n = 32 - gray.leading_zeros() as usize;
            best = Some(best.map_or(n, |b| b.min(n)));
        }
    }
    Ok(best)
}

/// GF(2) rank of a set of rows.
pub fn gf2_rank<'r>(rows: impl IntoIterator<Item = &'r ParityRow>) -> usize {
    let mut basis = GF2Basis::new();
    for (i, row) in rows.into_iter().enumerate() {
        basis.insert_row(&row.odd_primes, i);
    }
    basis.rank()
}

/// Column-count surplus at `z0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Surplus {
    pub rows: usize,
    pub active_columns: usize,
    /// More rows than columns, so a dependency must exist.
    pub guaranteed: bool,
}

/// `rows = m(z0) + extra`, `active_columns = z0 + sum_k s_k(z0)`.
pub fn schroeppel_surplus(m_z0: usize, s_k_z0: &[usize], z0: usize, extra_smooth_rows: usize) -> Surplus {
    let rows = m_z0 + extra_smooth_rows;
    let active_columns = z0 + s_k_z0.iter().skip(2).sum::<usize>();
    Surplus { rows, active_columns, guaranteed: rows > active_columns }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numtheory::sieve_primes;

    fn rows(values: &[u64]) -> Instance {
        let t = sieve_primes(10_000).unwrap();
        Instance::from_values(values, &t).unwrap()
    }

    #[test]
    fn insert_examples() {
        let mut b = GF2Basis::new();
        assert_eq!(
            b.insert_row(&[], 0),
            Insert::Dependency(SquareCertificate { rows: vec![0] })
        );
        let mut b = GF2Basis::new();
        assert_eq!(b.insert_row(&[1, 2], 0), Insert::Independent);
        assert_eq!(b.insert_row(&[1, 2], 1), Insert::Dependency(SquareCertificate { rows: vec![0, 1] }));
        let i = rows(&[6, 10, 15]);
        match find_t(&i) {
            Threshold::Found { t, certificate } => {
                assert_eq!(t, 3);
                assert_eq!(certificate.rows, vec![0, 1, 2]);
                assert!(verify_certificate(&i, &certificate).unwrap());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn square_at_position_five() {
        let i = rows(&[2, 3, 5, 7, 49, 11]);
        assert_eq!(find_t(&i).t(), Some(5));
        let i = rows(&[2, 3, 5]);
        assert_eq!(find_t(&i), Threshold::Exhausted { rows: 3 });
        assert_eq!(find_t(&rows(&[])), Threshold::Exhausted { rows: 0 });
    }

    #[test]
    fn verify_examples() {
        let i = rows(&[6, 10, 15, 12]);
        assert!(!verify_certificate(&i, &SquareCertificate { rows: vec![3] }).unwrap());
        assert!(verify_certificate(&i, &SquareCertificate { rows: vec![4] }).is_err());
        assert!(verify_certificate(&i, &SquareCertificate { rows: vec![] }).is_err());
    }

    #[test]
    fn brute_force_examples() {
        assert_eq!(brute_force_min_dependency(&rows(&[2, 3, 6]).rows).unwrap(), Some(3));
        assert_eq!(brute_force_min_dependency(&rows(&[2, 3, 5]).rows).unwrap(), None);
        assert_eq!(brute_force_min_dependency(&rows(&[]).rows).unwrap(), None);
        assert_eq!(brute_force_min_dependency(&rows(&[4]).rows).unwrap(), Some(1));
        let long = rows(&[2; 21]);
        assert!(brute_force_min_dependency(&long.rows).is_err());
    }

    #[test]
    fn surplus_examples() {
        let s = schroeppel_surplus(0, &[], 10, 11);
        assert!(s.guaranteed);
        let s = schroeppel_surplus(5, &[0, 0, 3], 7, 5);
        assert_eq!((s.rows, s.active_columns, s.guaranteed), (10, 10, false));
    }

    #[test]
    fn rank_counts() {
        assert_eq!(gf2_rank(&rows(&[6, 10, 15]).rows), 2);
        assert_eq!(gf2_rank(&rows(&[2, 3, 5, 7]).rows), 4);
    }
}
