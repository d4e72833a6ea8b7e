//! Exact integer-level number theory.
//!
//! Everything here is computed exactly: the prime table, the smooth-number
//! counting function `Psi(x, y)`, the modified count `psi~(x, y)` of integers
//! whose prime factors above `y` all occur to even powers, the column
//! probabilities `p_j(x)` and the scale `J(x)` together with the normalized
//! smooth density `Lambda(z)`.
//!
//! Primes are indexed from 1, so `q_1 = 2`, `q_2 = 3`, and a prime index `z`
//! stands for the bound `y = q_z`. Index 0 stands for `y = 1`.

use std::collections::HashMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictors;

/// Largest `x` accepted by the exact counting paths.
pub const MAX_EXACT_X: u64 = 1_000_000_000;

/// Ascending table of all primes up to `limit`.
#[derive(Debug, Clone)]
pub struct PrimeTable {
    limit: u64,
    primes: Vec<u32>,
}

/// Sieve all primes up to `limit` with the default memory budget.
pub fn sieve_primes(limit: u64) -> Result<PrimeTable> {
    PrimeTable::with_budget(limit, MAX_EXACT_X)
}

impl PrimeTable {
    /// Sieve of Eratosthenes over odd numbers only.
    ///
    /// `max_limit` is the memory budget expressed as the largest admissible
    /// limit.
    pub fn with_budget(limit: u64, max_limit: u64) -> Result<Self> {
        if limit < 2 {
            return Err(Error::Input(format!("sieve limit must be >= 2, got {limit}")));
        }
        if limit > max_limit {
            return Err(Error::Resource(format!(
                "sieve limit {limit} exceeds the budget of {max_limit}"
            )));
        }
        // bit i of `composite` stands for the odd number 2i + 1
        let n_odd = ((limit + 1) / 2) as usize;
        let mut composite = vec![0u64; n_odd.div_ceil(64)];
        let mut i = 1usize;
        loop {
            let p = 2 * i + 1;
            if (p as u64) * (p as u64) > limit {
                break;
            }
            if composite[i / 64] >> (i % 64) & 1 == 0 {
                let mut m = p * p / 2;
                while m < n_odd {
                    composite[m / 64] |= 1 << (m % 64);
                    m += p;
                }
            }
            i += 1;
        }
        let mut primes = Vec::with_capacity(estimate_pi(limit));
        primes.push(2);
        for i in 1..n_odd {
            if composite[i / 64] >> (i % 64) & 1 == 0 {
                primes.push((2 * i + 1) as u32);
            }
        }
        Ok(PrimeTable { limit, primes })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn primes(&self) -> &[u32] {
        &self.primes
    }

    /// Number of primes in the table, i.e. `pi(limit)`.
    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    /// The `z`-th prime `q_z`, 1-indexed.
    #[inline]
    pub fn prime(&self, z: usize) -> u64 {
        self.primes[z - 1] as u64
    }

    /// `pi(y)`: the number of primes `<= y`. Exact for `y <= limit`.
    pub fn pi(&self, y: u64) -> usize {
        if y > u32::MAX as u64 {
            return self.primes.len();
        }
        self.primes.partition_point(|&p| p as u64 <= y)
    }

    /// Index `z` with `q_z = p`, if `p` is a prime in the table.
    pub fn index_of(&self, p: u64) -> Option<usize> {
        if p > u32::MAX as u64 {
            return None;
        }
        self.primes.binary_search(&(p as u32)).ok().map(|i| i + 1)
    }
}

fn estimate_pi(limit: u64) -> usize {
    let l = limit as f64;
    if l < 10.0 {
        4
    } else {
        (1.3 * l / l.ln()) as usize + 16
    }
}

/// Integer square root.
pub fn isqrt(n: u64) -> u64 {
    if n < 2 {
        return n;
    }
    let mut r = (n as f64).sqrt() as u64;
    while r.checked_mul(r).is_none_or(|s| s > n) {
        r -= 1;
    }
    while (r + 1).checked_mul(r + 1).is_some_and(|s| s <= n) {
        r += 1;
    }
    r
}

/// Memoized exact evaluator of `Psi` and `psi~` over a prime table.
///
/// The memo is keyed on `(x, z)`; a counter is confined to one worker, and
/// every worker computes identical values.
#[derive(Debug)]
pub struct SmoothCounter<'a> {
    table: &'a PrimeTable,
    memo: HashMap<(u64, u32), u64>,
}

impl<'a> SmoothCounter<'a> {
    pub fn new(table: &'a PrimeTable) -> Self {
        SmoothCounter { table, memo: HashMap::new() }
    }

    pub fn table(&self) -> &'a PrimeTable {
        self.table
    }

    /// `Psi(x, q_z)`, the number of `n <= x` with no prime factor above `q_z`.
    ///
    /// Evaluates the recursion `Psi(x, q_z) = Psi(x, q_{z-1}) + Psi(x/q_z, q_z)`
    /// unrolled over `z`, with base `Psi(x, 2) = floor(log2 x) + 1`. Primes
    /// above `sqrt(x)` contribute `floor(x / q_j)` directly since every
    /// cofactor is then smaller than `q_j`.
    pub fn psi(&mut self, x: u64, z: usize) -> u64 {
        if x == 0 {
            return 0;
        }
        if z == 0 || x == 1 {
            return 1;
        }
        let table = self.table;
        let z = if z > table.len() {
            assert!(
                table.limit() >= x,
                "prime table up to {} cannot resolve Psi({x}, q_{z})",
                table.limit()
            );
            table.len()
        } else {
            z
        };
        let q = table.prime(z);
        if q >= x {
            return x;
        }
        if z == 1 {
            return (64 - x.leading_zeros()) as u64;
        }
        if let Some(&v) = self.memo.get(&(x, z as u32)) {
            return v;
        }
        let s = table.pi(isqrt(x));
        let value = if z > s {
            let mut acc = self.psi(x, s);
            for j in s + 1..=z {
                acc += x / table.prime(j);
            }
            acc
        } else {
            let mut acc = (64 - x.leading_zeros()) as u64;
            for j in 2..=z {
                acc += self.psi(x / table.prime(j), j);
            }
            acc
        };
        self.memo.insert((x, z as u32), value);
        value
    }

    /// `psi~(x, q_z) = sum over t in P(q_z), t^2 <= x of Psi(x / t^2, q_z)`,
    /// where `P(y)` holds 1 and all products of primes exceeding `y`.
    ///
    /// The `t` are generated depth first as non-decreasing prime products.
    pub fn psi_tilde(&mut self, x: u64, z: usize) -> u64 {
        if x == 0 {
            return 0;
        }
        let table = self.table;
        let root = isqrt(x);
        let mut total = self.psi(x, z);
        let mut stack = vec![(1u64, z + 1)];
        while let Some((t, start)) = stack.pop() {
            let mut j = start;
            while j <= table.len() {
                let nt = t * table.prime(j);
                if nt > root {
                    break;
                }
                total += self.psi(x / (nt * nt), z);
                stack.push((nt, j));
                j += 1;
            }
        }
        total
    }

    /// `p_j(x)`: the conditional probability that `q_j` divides a uniform
    /// `a <= x` to an odd power given every larger prime divides it to an
    /// even power.
    pub fn p_col(&mut self, j: usize, x: u64) -> Ratio<u64> {
        assert!(j >= 1 && x >= 1, "p_col needs j >= 1 and x >= 1");
        let hi = self.psi_tilde(x, j);
        let lo = self.psi_tilde(x, j - 1);
        debug_assert!(hi > 0 && lo <= hi);
        Ratio::new(hi - lo, hi)
    }

    /// All values `Psi(x, q_z)` for `z = 0..=pi(x)`.
    pub fn profile(&mut self, x: u64) -> Result<SmoothProfile> {
        if x < 2 {
            return Err(Error::Input(format!("profile needs x >= 2, got {x}")));
        }
        if self.table.limit() < x {
            return Err(Error::Input(format!(
                "prime table up to {} does not cover x = {x}",
                self.table.limit()
            )));
        }
        let n = self.table.pi(x);
        let mut psi = Vec::with_capacity(n + 1);
        psi.push(1u64);
        let mut acc = 1u64;
        for z in 1..=n {
            acc += self.psi(x / self.table.prime(z), z);
            psi.push(acc);
        }
        debug_assert_eq!(acc, x);
        Ok(SmoothProfile { x, psi })
    }
}

/// The scale `J(x) = min over prime y <= x of pi(y) x / Psi(x, y)` with its
/// minimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JValue {
    pub j: f64,
    /// `J(x) = numer / denom` exactly: `numer = z0 x`, `denom = Psi(x, y0)`.
    pub numer: u128,
    pub denom: u64,
    pub y0: u64,
    pub z0: usize,
}

/// `Psi(x, q_z)` for every `z` from 0 to `pi(x)`.
#[derive(Debug, Clone)]
pub struct SmoothProfile {
    x: u64,
    psi: Vec<u64>,
}

impl SmoothProfile {
    pub fn x(&self) -> u64 {
        self.x
    }

    /// `pi(x)`.
    pub fn max_z(&self) -> usize {
        self.psi.len() - 1
    }

    pub fn psi(&self, z: usize) -> u64 {
        self.psi[z.min(self.max_z())]
    }

    pub fn values(&self) -> &[u64] {
        &self.psi
    }

    /// Minimize `z x / Psi(x, q_z)` over `z`, keeping the smallest minimizer.
    pub fn compute_j(&self, table: &PrimeTable) -> JValue {
        self.compute_j_over(table, 1..=self.max_z())
    }

    /// Same minimization over an arbitrary enumeration order of the indices.
    pub fn compute_j_over(
        &self,
        table: &PrimeTable,
        order: impl IntoIterator<Item = usize>,
    ) -> JValue {
        let mut best: Option<usize> = None;
        for z in order {
            best = match best {
                None => Some(z),
                Some(b) => {
                    // z / psi_z vs b / psi_b, ties to the smaller index
                    let lhs = z as u128 * self.psi[b] as u128;
                    let rhs = b as u128 * self.psi[z] as u128;
                    if lhs < rhs || (lhs == rhs && z < b) {
                        Some(z)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        let z0 = best.expect("J(x) needs at least one prime");
        let numer = z0 as u128 * self.x as u128;
        let denom = self.psi[z0];
        JValue { j: numer as f64 / denom as f64, numer, denom, y0: table.prime(z0), z0 }
    }

    /// `Lambda(z) = J(x) Psi(x, q_z) / (x z)`, evaluated as
    /// `z0 Psi(x, q_z) / (z Psi(x, y0))` so that `Lambda(z0) = 1` exactly.
    pub fn lambda(&self, jv: &JValue, z: usize) -> f64 {
        assert!(z >= 1, "Lambda is defined for z >= 1");
        let num = jv.z0 as u128 * self.psi(z) as u128;
        let den = z as u128 * jv.denom as u128;
        if num == den {
            1.0
        } else {
            num as f64 / den as f64
        }
    }

    /// Smallest and largest `z` with `Lambda(z) >= delta`.
    pub fn critical_window(&self, jv: &JValue, delta: f64) -> Result<(usize, usize)> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::Config(format!(
                "window threshold delta must lie in (0, 1], got {delta}"
            )));
        }
        let inside = |z: usize| self.lambda(jv, z) >= delta;
        let lo = (1..=self.max_z()).find(|&z| inside(z));
        let hi = (1..=self.max_z()).rev().find(|&z| inside(z));
        match (lo, hi) {
            (Some(lo), Some(hi)) => Ok((lo, hi)),
            _ => Err(Error::Config(format!("critical window is empty for delta = {delta}"))),
        }
    }
}

/// `J(x)` with its minimizing prime `y0` and `z0 = pi(y0)`.
pub fn compute_j(x: u64) -> Result<JValue> {
    if x < 4 {
        return Err(Error::Input(format!("J(x) needs x >= 4, got {x}")));
    }
    if x > MAX_EXACT_X {
        return Err(Error::Resource(format!("x = {x} exceeds the exact-counting cap")));
    }
    let table = sieve_primes(x)?;
    let profile = SmoothCounter::new(&table).profile(x)?;
    Ok(profile.compute_j(&table))
}

/// The tolerance constants of the tracking statements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub delta: f64,
    pub eps0: f64,
    pub eps1: f64,
}

/// Upper bounds of the admissible constant chain for a given `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantChain {
    /// `e^{-gamma} - eta`; `eps0` must be strictly below.
    pub eps0_max: f64,
    /// `C0 = alpha((1 + eps0) eta)`.
    pub c0: f64,
    /// `(eps0 / 16) e^{-C0}`; `eps1` must be strictly below.
    pub eps1_max: f64,
    /// `log(eps1) - 3 / eps1`; `log(delta)` must be strictly below.
    pub log_delta_max: f64,
    /// Whether the supplied `delta` satisfies its bound.
    pub delta_admissible: bool,
}

impl Constants {
    /// Defaults for a given `eta`: `eps0` and `eps1` at half their admissible
    /// bounds, and `delta = 1e-3` as the window threshold.
    pub fn default_for(eta: f64) -> Result<Constants> {
        let eps0 = 0.5 * (predictors::EXP_NEG_GAMMA - eta);
        if eps0 <= 0.0 {
            return Err(Error::Config(format!(
                "eta = {eta} is not below e^-gamma = {}",
                predictors::EXP_NEG_GAMMA
            )));
        }
        let c0 = predictors::alpha((1.0 + eps0) * eta)?;
        let eps1 = 0.5 * eps0 / 16.0 * (-c0).exp();
        Ok(Constants { delta: 1e-3, eps0, eps1 })
    }

    /// Check the constant chain
    /// `0 < eps0 < e^{-gamma} - eta`, `0 < eps1 < (eps0/16) e^{-C0}`,
    /// `0 < delta < eps1 e^{-3/eps1}`.
    ///
    /// The first two links are always enforced. The delta link is tiny
    /// (far below the smallest double for any admissible `eps1`), so it is
    /// only enforced when `strict` is set; otherwise `delta` acts as a plain
    /// window threshold in `(0, 1]` and the result records admissibility.
    pub fn validate(&self, eta: f64, strict: bool) -> Result<ConstantChain> {
        if !(eta >= 0.0 && eta < predictors::EXP_NEG_GAMMA) {
            return Err(Error::Config(format!(
                "eta must lie in [0, e^-gamma) = [0, {}), got {eta}",
                predictors::EXP_NEG_GAMMA
            )));
        }
        let eps0_max = predictors::EXP_NEG_GAMMA - eta;
        if !(self.eps0 > 0.0 && self.eps0 < eps0_max) {
            return Err(Error::Config(format!(
                "eps0 must lie in (0, {eps0_max}) for eta = {eta}, got {}",
                self.eps0
            )));
        }
        let c0 = predictors::alpha((1.0 + self.eps0) * eta)?;
        let eps1_max = self.eps0 / 16.0 * (-c0).exp();
        if !(self.eps1 > 0.0 && self.eps1 < eps1_max) {
            return Err(Error::Config(format!(
                "eps1 must lie in (0, {eps1_max}) for eps0 = {}, got {}",
                self.eps0, self.eps1
            )));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1], got {}", self.delta)));
        }
        let log_delta_max = self.eps1.ln() - 3.0 / self.eps1;
        let delta_admissible = self.delta.ln() < log_delta_max;
        if strict && !delta_admissible {
            return Err(Error::Config(format!(
                "delta = {} violates delta < eps1 e^(-3/eps1); need log(delta) < {log_delta_max}",
                self.delta
            )));
        }
        Ok(ConstantChain { eps0_max, c0, eps1_max, log_delta_max, delta_admissible })
    }
}

/// Derived parameters of one problem instance family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceParams {
    pub x: u64,
    pub eta: f64,
    /// Number of sampled integers, `round(eta J(x))` unless overridden.
    pub n_rows: usize,
    pub j: JValue,
    pub u0: f64,
    pub constants: Constants,
    pub chain: ConstantChain,
    pub z_minus: usize,
    pub z_plus: usize,
    /// `pi(x)`.
    pub max_z: usize,
}

impl InstanceParams {
    pub fn new(
        profile: &SmoothProfile,
        table: &PrimeTable,
        eta: f64,
        constants: Constants,
        strict: bool,
    ) -> Result<Self> {
        let x = profile.x();
        if x < 4 {
            return Err(Error::Config(format!("x must be >= 4, got {x}")));
        }
        if x > MAX_EXACT_X {
            return Err(Error::Config(format!("x = {x} exceeds the exact-counting cap")));
        }
        let chain = constants.validate(eta, strict)?;
        let jv = profile.compute_j(table);
        let (z_minus, z_plus) = profile.critical_window(&jv, constants.delta)?;
        let u0 = (x as f64).ln() / (jv.y0 as f64).ln();
        Ok(InstanceParams {
            x,
            eta,
            n_rows: (eta * jv.j).round() as usize,
            j: jv,
            u0,
            constants,
            chain,
            z_minus,
            z_plus,
            max_z: profile.max_z(),
        })
    }

    /// Same parameters with an explicit row count.
    pub fn with_rows(mut self, n_rows: usize) -> Self {
        self.n_rows = n_rows;
        self
    }

    pub fn z0(&self) -> usize {
        self.j.z0
    }

    pub fn in_window(&self, z: usize) -> bool {
        (self.z_minus..=self.z_plus).contains(&z)
    }
}

/// Sieve, count and derive the parameters for `x` in one go.
pub struct Landscape {
    pub table: PrimeTable,
    pub profile: SmoothProfile,
}

impl Landscape {
    pub fn new(x: u64) -> Result<Self> {
        if x < 4 {
            return Err(Error::Config(format!("x must be >= 4, got {x}")));
        }
        if x > MAX_EXACT_X {
            return Err(Error::Config(format!("x = {x} exceeds the exact-counting cap")));
        }
        let table = sieve_primes(x)?;
        let profile = SmoothCounter::new(&table).profile(x)?;
        Ok(Landscape { table, profile })
    }

    pub fn params(&self, eta: f64, constants: Constants, strict: bool) -> Result<InstanceParams> {
        InstanceParams::new(&self.profile, &self.table, eta, constants, strict)
    }

    pub fn lambda(&self, params: &InstanceParams, z: usize) -> f64 {
        self.profile.lambda(&params.j, z)
    }
}
