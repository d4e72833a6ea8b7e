//! The `verify` suite: oracle, identity and invariant checks with independent references.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use sqlab_core::avalanche::{self, DegreeSpec, Explorer};
use sqlab_core::instance::{self, Instance};
use sqlab_core::numtheory::{self, sieve_primes, Landscape, PrimeTable, SmoothCounter};
use sqlab_core::peeling;
use sqlab_core::predictors::{self, DickmanRho};
use sqlab_core::squares::{self, Threshold};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.into(), passed, detail }
}

/// Largest prime factor of every `n <= x` by a multiplicative sieve.
pub fn largest_prime_factors(x: u64) -> Vec<u32> {
    let n = x as usize;
    let mut lpf = vec![1u32; n + 1];
    for p in 2..=n {
        if lpf[p] == 1 {
            let mut k = p;
            while k <= n {
                lpf[k] = p as u32;
                k += p;
            }
        }
    }
    lpf
}

/// `Psi(x, y)` for every prime `y <= x` by recursion, against enumeration.
pub fn psi_enumeration_mismatches(x: u64) -> (usize, usize) {
    let table = sieve_primes(x.max(2)).expect("sieve");
    let lpf = largest_prime_factors(x);
    let mut by_prime = vec![0u64; table.len() + 1];
    for &p in &lpf[1..] {
        let z = if p == 1 { 0 } else { table.index_of(p as u64).expect("prime") };
        by_prime[z] += 1;
    }
    let mut counter = SmoothCounter::new(&table);
    let mut acc = 0u64;
    let mut bad = 0;
    for (z, c) in by_prime.iter().enumerate() {
        acc += c;
        if counter.psi(x, z) != acc {
            bad += 1;
        }
    }
    (bad, by_prime.len())
}

fn psi_checks() -> Vec<Check> {
    let mut out = Vec::new();
    for x in [1_000u64, 10_000, 100_000] {
        let (bad, n) = psi_enumeration_mismatches(x);
        out.push(check(&format!("Psi recursion = enumeration, x = {x}"), bad == 0, format!("{bad} of {n} prime bounds differ")));
    }
    let t = sieve_primes(100).expect("sieve");
    let mut c = SmoothCounter::new(&t);
    let a = c.psi_tilde(100, 3);
    let b = c.psi_tilde(10, 1);
    out.push(check("psi~ examples", a == 36 && b == 5, format!("psi~(100, 5) = {a}, psi~(10, 2) = {b}")));
    out
}

/// `psi~(x, q_z)` by counting `n <= x` whose odd-power primes are all `<= q_z`.
fn psi_tilde_brute(x: u64, y: u64) -> u64 {
    (1..=x)
        .filter(|&n| {
            let mut m = n;
            let mut p = 2;
            while p * p <= m {
                let mut e = 0;
                while m % p == 0 {
                    m /= p;
                    e += 1;
                }
                if e % 2 == 1 && p > y {
                    return false;
                }
                p += 1;
            }
            m == 1 || m <= y
        })
        .count() as u64
}

fn psi_tilde_checks() -> Check {
    let x = 3_000u64;
    let t = sieve_primes(x).expect("sieve");
    let mut c = SmoothCounter::new(&t);
    let mut bad = 0;
    for z in 0..=t.len() {
        let y = if z == 0 { 1 } else { t.prime(z) };
        if c.psi_tilde(x, z) != psi_tilde_brute(x, y) {
            bad += 1;
        }
    }
    check("psi~ = direct count, x = 3000", bad == 0, format!("{bad} of {} bounds differ", t.len() + 1))
}

fn j_checks() -> Check {
    let x = 100_000u64;
    let land = Landscape::new(x).expect("landscape");
    let jv = numtheory::compute_j(x).expect("J");
    let mut best: Option<(usize, f64)> = None;
    for z in 1..=land.table.len() {
        let v = z as f64 * x as f64 / land.profile.psi(z) as f64;
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((z, v));
        }
    }
    let (z, v) = best.expect("nonempty");
    let ok = z == jv.z0 && (v - jv.j).abs() <= 1e-9 * v;
    check("J by direct scan", ok, format!("scan z0 = {z}, J = {v}; computed z0 = {}, J = {}", jv.z0, jv.j))
}

/// `Ein(w) = sum_{k>=1} (-1)^{k+1} w^k / (k k!)`.
fn ein_series(w: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..200 {
        term *= w / k as f64;
        let s = if k % 2 == 1 { 1.0 } else { -1.0 };
        sum += s * term / k as f64;
    }
    sum
}

fn analytic_checks() -> Vec<Check> {
    let mut out = Vec::new();
    let r2 = predictors::dickman_rho(2.0).expect("rho");
    let want = 1.0 - 2f64.ln();
    out.push(check("rho(2) = 1 - ln 2", (r2 - want).abs() <= 1e-8, format!("error {:e}", r2 - want)));

    let coarse = DickmanRho::new(512, 21.0).expect("rho grid");
    let fine = DickmanRho::new(1024, 21.0).expect("rho grid");
    let mut worst: f64 = 0.0;
    for i in 0..=400 {
        let u = i as f64 * 0.05;
        worst = worst.max((coarse.eval(u).expect("rho") - fine.eval(u).expect("rho")).abs());
    }
    out.push(check("rho step halving up to u = 20", worst <= 1e-8, format!("worst difference {worst:e}")));

    let e1 = predictors::ein(1.0).expect("ein");
    let s1 = ein_series(1.0);
    out.push(check("Ein(1) = series", (e1 - s1).abs() <= 1e-10, format!("error {:e}", e1 - s1)));

    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let eta = 0.55 * i as f64 / 99.0;
        let w = predictors::alpha(eta).expect("alpha");
        worst = worst.max((predictors::alpha_forward(w).expect("forward") - eta).abs());
    }
    out.push(check("alpha round trip", worst <= 1e-9, format!("worst residual {worst:e}")));

    let mut bad = 0;
    for i in 0..=200 {
        let w = 0.2 * i as f64 / 200.0;
        let a = predictors::alpha(w).expect("alpha");
        if !(a >= w - 1e-15 && a <= w + 2.0 * w * w + 1e-15) {
            bad += 1;
        }
    }
    out.push(check("w <= alpha(w) <= w + 2w^2 on [0, 0.2]", bad == 0, format!("{bad} of 201 points fail")));
    out
}

fn identity_checks() -> Check {
    let mut worst: f64 = 0.0;
    let mut doubling_ok = true;
    for &z in &[10.0, 100.0, 1_000.0, 10_000.0, 100_000.0] {
        for &ratio in &[0.1, 0.5, 1.0, 2.5, 5.0] {
            let r = predictors::identity_suite(ratio * z, z, None).expect("identities");
            let scale = 1.0f64.max(r.weighted_target.abs());
            worst = worst.max(r.max_dev() / scale);
            doubling_ok &= r.doubling_holds;
        }
    }
    check(
        "ts_k identities on a 5 x 5 grid",
        worst <= 1e-9 && doubling_ok,
        format!("worst relative deviation {worst:e}, doubling bound holds: {doubling_ok}"),
    )
}

fn random_instance(table: &PrimeTable, rng: &mut ChaCha8Rng, x_max: u64, n_max: usize) -> Instance {
    let x = rng.random_range(10..=x_max);
    let n = rng.random_range(1..=n_max);
    instance::sample_rows(table, x, n, rng.random()).expect("rows")
}

/// Mismatching `(instance, z)` pairs between peeling and the 2-core oracle.
pub fn peeling_oracle_mismatches(instances: usize, x_max: u64, n_max: usize, seed: u64) -> usize {
    let table = sieve_primes(x_max).expect("sieve");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for _ in 0..instances {
        let inst = random_instance(&table, &mut rng, x_max, n_max);
        let max_z = table.pi(inst.x);
        let mut grid: Vec<usize> = (0..10).map(|i| i * max_z / 9).collect();
        grid.dedup();
        let mut p = peeling::Peeler::new(&inst, max_z);
        for &z in grid.iter().rev() {
            p.advance_through(z + 1);
            let (oracle, _) = peeling::two_core_oracle(&inst, z);
            if p.active() != oracle.as_slice() {
                bad += 1;
            }
        }
    }
    bad
}

/// `(mismatches, certificate failures)` between `find_T` and exhaustive search.
pub fn threshold_brute_mismatches(prefixes: usize, x_max: u64, n_max: usize, seed: u64) -> (usize, usize) {
    let table = sieve_primes(x_max).expect("sieve");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut bad, mut cert_bad) = (0, 0);
    for _ in 0..prefixes {
        let inst = random_instance(&table, &mut rng, x_max, n_max);
        let t = squares::find_t(&inst);
        let brute = squares::brute_force_min_dependency(&inst.rows).expect("small prefix");
        if t.t() != brute {
            bad += 1;
        }
        if let Threshold::Found { certificate, .. } = &t {
            if !squares::verify_certificate(&inst, certificate).expect("certificate") {
                cert_bad += 1;
            }
        }
    }
    (bad, cert_bad)
}

fn avalanche_order_check() -> Check {
    let spec = DegreeSpec::new(300, [(2, 60), (3, 20)]).expect("spec");
    let mut explorer = Explorer::new();
    let mut bad = 0;
    for trial in 0..50u64 {
        let h = avalanche::sample_independent(&spec, trial).expect("graph");
        let v = (trial as usize * 37) % spec.m;
        let base = explorer.closure::<ChaCha8Rng>(&h, v, None);
        let base_set: HashSet<u32> = explorer.members().iter().copied().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(trial ^ 0xabcd);
        let shuffled = explorer.closure(&h, v, Some(&mut rng));
        let set: HashSet<u32> = explorer.members().iter().copied().collect();
        if shuffled != base || set != base_set {
            bad += 1;
        }
    }
    check("avalanche closure independent of order", bad == 0, format!("{bad} of 50 trials differ"))
}

/// Run every check in order.
pub fn run_all() -> Vec<Check> {
    let mut out = psi_checks();
    out.push(psi_tilde_checks());
    out.push(j_checks());
    out.extend(analytic_checks());
    out.push(identity_checks());
    let bad = peeling_oracle_mismatches(100, 10_000, 500, 11);
    out.push(check("peeling = 2-core oracle", bad == 0, format!("{bad} mismatching (instance, z) pairs over 100 instances")));
    let (bad, cert) = threshold_brute_mismatches(100, 200, 18, 12);
    out.push(check("find_T = exhaustive search", bad == 0, format!("{bad} mismatches over 100 prefixes")));
    out.push(check("certificates verify at exponent level", cert == 0, format!("{cert} failures")));
    out.push(avalanche_order_check());
    out
}
