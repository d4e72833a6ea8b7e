//! Random instances: uniform integers in `[1, x]`, their parity rows and the
//! column view of the resulting hypergraph.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numtheory::{InstanceParams, PrimeTable};

/// Prime indices dividing `value` to an odd power, ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityRow {
    pub value: u64,
    pub odd_primes: Vec<u32>,
}

impl ParityRow {
    /// Largest odd-power prime index, 0 for a perfect square.
    pub fn max_index(&self) -> u32 {
        self.odd_primes.last().copied().unwrap_or(0)
    }

    /// Number of odd-power primes with index at least `z`.
    pub fn weight_from(&self, z: usize) -> usize {
        let start = self.odd_primes.partition_point(|&j| (j as usize) < z);
        self.odd_primes.len() - start
    }
}

/// Factor `a` by trial division and keep the exponent parities.
///
/// The table must contain every prime up to `a`.
pub fn parity_row(a: u64, table: &PrimeTable) -> Result<ParityRow> {
    if a == 0 {
        return Err(Error::Input("parity_row needs a >= 1".into()));
    }
    if a > table.limit() {
        return Err(Error::Input(format!("{a} exceeds the prime table limit {}", table.limit())));
    }
    let mut odd_primes = Vec::new();
    let mut rest = a;
    for (idx, &p) in table.primes().iter().enumerate() {
        let p = p as u64;
        if p * p > rest {
            break;
        }
        let mut parity = false;
        while rest % p == 0 {
            rest /= p;
            parity = !parity;
        }
        if parity {
            odd_primes.push(idx as u32 + 1);
        }
    }
    if rest > 1 {
        let idx = table
            .index_of(rest)
            .ok_or_else(|| Error::Input(format!("cofactor {rest} of {a} is not in the table")))?;
        odd_primes.push(idx as u32);
    }
    Ok(ParityRow { value: a, odd_primes })
}

/// splitmix64 finalizer applied to `(master, trial)`.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    let mut z = master ^ trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Endless stream of uniform parity rows from a seed.
pub struct RowStream<'a> {
    table: &'a PrimeTable,
    x: u64,
    rng: ChaCha8Rng,
}

impl<'a> RowStream<'a> {
    pub fn new(table: &'a PrimeTable, x: u64, seed: u64) -> Result<Self> {
        if x == 0 || x > table.limit() {
            return Err(Error::Config(format!(
                "x = {x} must lie in [1, {}] for this prime table",
                table.limit()
            )));
        }
        Ok(RowStream { table, x, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    pub fn next_row(&mut self) -> ParityRow {
        let a = self.rng.random_range(1..=self.x);
        parity_row(a, self.table).expect("sampled value lies in the table range")
    }
}

/// A sampled instance: `rows[i]` is the parity row of the `i`-th draw.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub x: u64,
    pub seed: u64,
    pub rows: Vec<ParityRow>,
}

/// Draw `params.n_rows` integers and factor them.
pub fn sample_instance(params: &InstanceParams, table: &PrimeTable, seed: u64) -> Result<Instance> {
    let inst = sample_rows(table, params.x, params.n_rows, seed)?;
    let check = weight_bound_check(&inst, params, table);
    assert!(
        !check.guaranteed || check.violations == 0,
        "row weight bound violated although q(z-)^2 >= y0"
    );
    Ok(inst)
}

/// Draw `n` integers from `[1, x]`.
pub fn sample_rows(table: &PrimeTable, x: u64, n: usize, seed: u64) -> Result<Instance> {
    let mut stream = RowStream::new(table, x, seed)?;
    let rows = (0..n).map(|_| stream.next_row()).collect();
    Ok(Instance { x, seed, rows })
}

impl Instance {
    /// Instance from explicit values, seed 0.
    pub fn from_values(values: &[u64], table: &PrimeTable) -> Result<Instance> {
        let rows = values.iter().map(|&a| parity_row(a, table)).collect::<Result<Vec<_>>>()?;
        let x = values.iter().copied().max().unwrap_or(1);
        Ok(Instance { x, seed: 0, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Number of rows with no odd-power prime above index `z`.
    pub fn isolated_count(&self, z: usize) -> usize {
        self.rows.iter().filter(|r| r.max_index() as usize <= z).count()
    }

    /// Largest column index touched by any row.
    pub fn max_column(&self) -> usize {
        self.rows.iter().map(|r| r.max_index() as usize).max().unwrap_or(0)
    }

    /// One line per row, `value: j1 j2 j3`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            let _ = write!(out, "{}:", row.value);
            for j in &row.odd_primes {
                let _ = write!(out, " {j}");
            }
            out.push('\n');
        }
        out
    }

    /// Parse the dump format. Rows are checked against the table when one is given.
    pub fn parse_dump(text: &str, table: Option<&PrimeTable>) -> Result<Instance> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| Error::Input(format!("dump line {}: {what}", lineno + 1));
            let (value, rest) = line.split_once(':').ok_or_else(|| bad("missing ':'"))?;
            let value: u64 = value.trim().parse().map_err(|_| bad("bad value"))?;
            let odd_primes = rest
                .split_whitespace()
                .map(|t| t.parse::<u32>().map_err(|_| bad("bad prime index")))
                .collect::<Result<Vec<_>>>()?;
            if odd_primes.windows(2).any(|w| w[0] >= w[1]) || odd_primes.first() == Some(&0) {
                return Err(bad("prime indices must be positive and strictly ascending"));
            }
            let row = ParityRow { value, odd_primes };
            if let Some(t) = table {
                if parity_row(value, t)? != row {
                    return Err(bad("parity row does not match the value"));
                }
            }
            rows.push(row);
        }
        let x = rows.iter().map(|r| r.value).max().unwrap_or(1);
        Ok(Instance { x, seed: 0, rows })
    }
}

/// Column view restricted to columns above `z`: `column -> rows containing it`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ColumnIndex {
    pub z: usize,
    pub columns: BTreeMap<usize, Vec<usize>>,
}

impl ColumnIndex {
    pub fn degree(&self, j: usize) -> usize {
        self.columns.get(&j).map_or(0, Vec::len)
    }

    /// `hist[k]` = number of columns of degree `k`, for `k >= 1`.
    pub fn degree_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0usize];
        for rows in self.columns.values() {
            if hist.len() <= rows.len() {
                hist.resize(rows.len() + 1, 0);
            }
            hist[rows.len()] += 1;
        }
        hist
    }

    pub fn total_degree(&self) -> usize {
        self.columns.values().map(Vec::len).sum()
    }
}

/// Column index of the active rows over columns `j > z`.
/// `active = None` means every row.
pub fn build_column_index(instance: &Instance, active: Option<&[bool]>, z: usize) -> ColumnIndex {
    let mut columns: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, row) in instance.rows.iter().enumerate() {
        if active.is_some_and(|a| !a[i]) {
            continue;
        }
        for &j in &row.odd_primes {
            if j as usize > z {
                columns.entry(j as usize).or_default().push(i);
            }
        }
    }
    ColumnIndex { z, columns }
}

/// The row weight bound `#{j in row : j >= z-} <= 2 u0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightCheck {
    pub bound: f64,
    /// The bound holds for every integer in `[1, x]` when `q(z-)^2 >= y0`.
    pub guaranteed: bool,
    pub violations: usize,
}

pub fn weight_bound_check(instance: &Instance, params: &InstanceParams, table: &PrimeTable) -> WeightCheck {
    let bound = 2.0 * params.u0;
    let q = table.prime(params.z_minus.max(1));
    let guaranteed = q.saturating_mul(q) >= params.j.y0;
    let violations =
        instance.rows.iter().filter(|r| r.weight_from(params.z_minus) as f64 > bound).count();
    WeightCheck { bound, guaranteed, violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numtheory::{sieve_primes, Constants, Landscape, SmoothCounter};

    fn table() -> PrimeTable {
        sieve_primes(100_000).unwrap()
    }

    #[test]
    fn parity_examples() {
        let t = table();
        assert!(parity_row(36, &t).unwrap().odd_primes.is_empty());
        assert_eq!(parity_row(12, &t).unwrap().odd_primes, vec![2]);
        assert_eq!(parity_row(6, &t).unwrap().odd_primes, vec![1, 2]);
        assert!(parity_row(1, &t).unwrap().odd_primes.is_empty());
        assert_eq!(parity_row(99_991, &t).unwrap().odd_primes, vec![t.pi(99_991) as u32]);
        assert_eq!(parity_row(2 * 2 * 2 * 49 * 11, &t).unwrap().odd_primes, vec![1, 5]);
        assert!(parity_row(0, &t).is_err());
        assert!(parity_row(100_001, &t).is_err());
    }

    #[test]
    fn parity_reconstruction() {
        let t = sieve_primes(1_000_000).unwrap();
        let inst = sample_rows(&t, 1_000_000, 20_000, 5).unwrap();
        for row in &inst.rows {
            let kernel: u64 = row.odd_primes.iter().map(|&j| t.prime(j as usize)).product();
            assert_eq!(row.value % kernel, 0);
            let sq = row.value / kernel;
            let s = crate::numtheory::isqrt(sq);
            assert_eq!(s * s, sq, "value {}", row.value);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let t = table();
        let a = sample_rows(&t, 10_000, 300, 42).unwrap();
        let b = sample_rows(&t, 10_000, 300, 42).unwrap();
        let c = sample_rows(&t, 10_000, 300, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.rows.iter().all(|r| (1..=10_000).contains(&r.value)));
        assert!(sample_rows(&t, 10_000, 0, 1).unwrap().is_empty());
    }

    #[test]
    fn trial_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| trial_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(trial_seed(1, 0), trial_seed(2, 0));
    }

    #[test]
    fn smooth_fraction_matches_psi() {
        let t = table();
        let x = 10_000;
        let n = 1000;
        let mut counter = SmoothCounter::new(&t);
        for seed in 0..3 {
            let inst = sample_rows(&t, x, n, seed).unwrap();
            for y in [7u64, 97] {
                let z = t.pi(y);
                let p = counter.psi(x, z) as f64 / x as f64;
                let hits = inst
                    .rows
                    .iter()
                    .filter(|r| {
                        let mut v = r.value;
                        for &q in &t.primes()[..z] {
                            while v % q as u64 == 0 {
                                v /= q as u64;
                            }
                        }
                        v == 1
                    })
                    .count() as f64;
                let se = (n as f64 * p * (1.0 - p)).sqrt();
                assert!((hits - n as f64 * p).abs() <= 4.0 * se, "y={y} hits={hits} p={p}");
            }
        }
    }

    #[test]
    fn dump_round_trip() {
        let t = table();
        let inst = sample_rows(&t, 10_000, 50, 3).unwrap();
        let text = inst.dump();
        let back = Instance::parse_dump(&text, Some(&t)).unwrap();
        assert_eq!(back.rows, inst.rows);
        assert_eq!(Instance::from_values(&[12, 36], &t).unwrap().dump(), "12: 2\n36:\n");
        assert!(Instance::parse_dump("12: 1", Some(&t)).is_err());
        assert!(Instance::parse_dump("12 2", None).is_err());
        assert!(Instance::parse_dump("12: 3 2", None).is_err());
    }

    #[test]
    fn column_index_examples() {
        let t = table();
        let inst = Instance::from_values(&[6, 10, 15], &t).unwrap();
        let idx = build_column_index(&inst, None, 0);
        assert_eq!(idx.degree(1), 2);
        assert_eq!(idx.degree(2), 2);
        assert_eq!(idx.degree(3), 2);
        assert_eq!(idx.degree_histogram(), vec![0, 0, 3]);
        let none = build_column_index(&inst, Some(&[false, false, false]), 0);
        assert_eq!(none.total_degree(), 0);
        let above = build_column_index(&inst, None, 2);
        assert_eq!(above.columns.keys().copied().collect::<Vec<_>>(), vec![3]);
    }

    #[test]
    fn isolated_rows_match_psi_tilde() {
        let land = Landscape::new(100_000).unwrap();
        let params = land.params(0.4, Constants::default_for(0.4).unwrap(), false).unwrap();
        let params = params.with_rows(2000);
        let mut counter = SmoothCounter::new(&land.table);
        let inst = sample_instance(&params, &land.table, 11).unwrap();
        for z in [1, 5, params.z0(), 4 * params.z0(), params.max_z / 2] {
            let p = counter.psi_tilde(params.x, z) as f64 / params.x as f64;
            let n = inst.len() as f64;
            let se = (n * p * (1.0 - p)).sqrt();
            let got = inst.isolated_count(z) as f64;
            assert!((got - n * p).abs() <= 4.0 * se, "z={z} got={got} mean={}", n * p);
        }
    }

    #[test]
    fn weight_bound_counts() {
        let land = Landscape::new(100_000).unwrap();
        let mut c = Constants::default_for(0.4).unwrap();
        c.delta = 0.5;
        let params = land.params(0.4, c, false).unwrap().with_rows(500);
        let inst = sample_instance(&params, &land.table, 1).unwrap();
        let check = weight_bound_check(&inst, &params, &land.table);
        assert!(check.bound > 0.0);
        if check.guaranteed {
            assert_eq!(check.violations, 0);
        }
    }
}
