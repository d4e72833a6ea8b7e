//! Floating-point analytic predictors.
//!
//! Dickman's function, the saddle point `xi(u)`, the entire exponential
//! integral `Ein(w)`, its companion inverse `alpha(eta)`, the predicted
//! degree-class sizes `ts_k` and the tolerance band `eps(k, z)`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numtheory::{InstanceParams, Landscape};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `e^{-gamma}`, the supremum of `w e^{-Ein(w)}`.
pub const EXP_NEG_GAMMA: f64 = 0.561_459_483_566_885_2;

/// Guard band below `e^{-gamma}` inside which `alpha` is rejected.
pub const ALPHA_GUARD: f64 = 1e-9;

/// Default step of the Dickman grid integrator.
pub const RHO_STEP: f64 = 1.0 / 1024.0;

/// Extent of the shared Dickman series.
pub const RHO_U_MAX: f64 = 64.0;

/// Below this `Ein` uses its alternating Taylor series.
const EIN_ALTERNATING_MAX: f64 = 2.0;

/// Above this `Ein` switches to `log w + gamma + E1(w)` with the continued
/// fraction for `E1`; the positive series accumulates rounding noise of order
/// `1e-14` by `w = 30`.
pub const EIN_SWITCH: f64 = 4.0;

/// Taylor terms kept per unit interval of [`RhoSeries`].
const RHO_TERMS: usize = 90;

/// Dickman's `rho` by power series on each unit interval.
///
/// On `[k, k+1]` write `rho(u) = sum_i a_i xi^i` with `xi = k + 1 - u`. The
/// delay equation `u rho'(u) = -rho(u-1)` gives `a_{i+1}` from the previous
/// interval's coefficients, and `u rho(u) = int_{u-1}^u rho` at `u = k+1`
/// gives `a_0 = sum_{i>=1} a_i / (i+1) / k`. Every term is positive, so
/// values are accurate in relative terms at any `u`.
#[derive(Debug, Clone)]
pub struct RhoSeries {
    coeffs: Vec<Vec<f64>>,
}

impl RhoSeries {
    pub fn new(u_max: f64) -> Result<Self> {
        if !(u_max >= 1.0) || u_max > 4096.0 {
            return Err(Error::Input(format!("rho series extent {u_max} out of range")));
        }
        let units = u_max.ceil() as usize;
        let mut first = vec![0.0; RHO_TERMS];
        first[0] = 1.0;
        let mut coeffs = vec![first];
        for k in 1..units {
            let b = &coeffs[k - 1];
            let kp = (k + 1) as f64;
            let mut a = vec![0.0; RHO_TERMS];
            for i in 0..RHO_TERMS - 1 {
                a[i + 1] = (b[i] + i as f64 * a[i]) / (kp * (i + 1) as f64);
            }
            let tail: f64 = (1..RHO_TERMS).rev().map(|i| a[i] / (i + 1) as f64).sum();
            a[0] = tail / k as f64;
            coeffs.push(a);
        }
        Ok(RhoSeries { coeffs })
    }

    pub fn u_max(&self) -> f64 {
        self.coeffs.len() as f64
    }

    pub fn eval(&self, u: f64) -> Result<f64> {
        if !(u >= 0.0) {
            return Err(Error::Domain(format!("rho(u) needs u >= 0, got {u}")));
        }
        if u <= 1.0 {
            return Ok(1.0);
        }
        if u > self.u_max() {
            return Err(Error::Range(format!("rho({u}) beyond the tabulated range [0, {}]", self.u_max())));
        }
        let k = (u.ceil() as usize - 1).min(self.coeffs.len() - 1);
        let xi = (k + 1) as f64 - u;
        Ok(self.coeffs[k].iter().rev().fold(0.0, |acc, &c| acc * xi + c))
    }
}

/// Dickman's `rho` tabulated on a uniform grid.
///
/// On each unit interval `[n, n+1]` the table integrates
/// `rho(u) = rho(n) - int_n^u rho(t-1)/t dt` with fourth-order cubic
/// stencils that never straddle an integer, where `rho` loses smoothness.
/// The value at each integer is then reset from `u rho(u) = int_{u-1}^u rho`
/// by Simpson's rule, which removes the drift toward the solution of the
/// delay equation that decays only like `1/u`.
#[derive(Debug, Clone)]
pub struct DickmanRho {
    per_unit: usize,
    values: Vec<f64>,
}

impl DickmanRho {
    /// Tabulate with `per_unit` grid points per unit interval (even) up to `u_max`.
    pub fn new(per_unit: usize, u_max: f64) -> Result<Self> {
        if per_unit < 4 || per_unit % 2 == 1 {
            return Err(Error::Input(format!("rho grid needs an even count >= 4 per unit, got {per_unit}")));
        }
        if !(u_max >= 1.0) || u_max > 4096.0 {
            return Err(Error::Input(format!("rho grid extent {u_max} out of range")));
        }
        let n = per_unit;
        let units = u_max.ceil() as usize;
        let h = 1.0 / n as f64;
        let mut values = vec![1.0; units * n + 1];
        for unit in 1..units {
            let a = unit * n;
            let f = |i: usize, values: &[f64]| values[i - n] / (i as f64 * h);
            for i in a..a + n {
                let step = if i == a {
                    9.0 * f(i, &values) + 19.0 * f(i + 1, &values) - 5.0 * f(i + 2, &values)
                        + f(i + 3, &values)
                } else if i == a + n - 1 {
                    f(i - 2, &values) - 5.0 * f(i - 1, &values) + 19.0 * f(i, &values)
                        + 9.0 * f(i + 1, &values)
                } else {
                    -f(i - 1, &values) + 13.0 * f(i, &values) + 13.0 * f(i + 1, &values)
                        - f(i + 2, &values)
                };
                values[i + 1] = values[i] - h * step / 24.0;
            }
            // (unit + 1) rho_end = h/3 (rho_a + 4 rho_{a+1} + ... + 4 rho_{end-1} + rho_end)
            let inner: f64 = (a..a + n).map(|i| if i == a { 1.0 } else if (i - a) % 2 == 1 { 4.0 } else { 2.0 } * values[i]).sum();
            values[a + n] = h / 3.0 * inner / ((unit + 1) as f64 - h / 3.0);
        }
        Ok(DickmanRho { per_unit: n, values })
    }

    pub fn step(&self) -> f64 {
        1.0 / self.per_unit as f64
    }

    pub fn u_max(&self) -> f64 {
        ((self.values.len() - 1) / self.per_unit) as f64
    }

    /// Value at grid index `i`, i.e. at `u = i h`.
    pub fn at_index(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// `rho(u)`, cubic interpolation between grid points of one unit interval.
    pub fn eval(&self, u: f64) -> Result<f64> {
        if !(u >= 0.0) {
            return Err(Error::Domain(format!("rho(u) needs u >= 0, got {u}")));
        }
        if u <= 1.0 {
            return Ok(1.0);
        }
        if u > self.u_max() {
            return Err(Error::Range(format!(
                "rho({u}) beyond the tabulated range [0, {}]",
                self.u_max()
            )));
        }
        let n = self.per_unit;
        let pos = u * n as f64;
        let i = pos.floor() as usize;
        if (pos - i as f64) == 0.0 {
            return Ok(self.values[i]);
        }
        // four nodes inside the unit interval containing u
        let unit = (i / n).min(self.values.len() / n - 1);
        let lo = unit * n;
        let start = i.saturating_sub(1).clamp(lo, lo + n - 3);
        let s = pos - start as f64;
        let v = |k: usize| self.values[start + k];
        // Lagrange weights for nodes 0, 1, 2, 3
        let w0 = -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0;
        let w1 = s * (s - 2.0) * (s - 3.0) / 2.0;
        let w2 = -s * (s - 1.0) * (s - 3.0) / 2.0;
        let w3 = s * (s - 1.0) * (s - 2.0) / 6.0;
        Ok(w0 * v(0) + w1 * v(1) + w2 * v(2) + w3 * v(3))
    }
}

fn shared_rho() -> &'static RhoSeries {
    static RHO: OnceLock<RhoSeries> = OnceLock::new();
    RHO.get_or_init(|| RhoSeries::new(RHO_U_MAX).expect("default rho series"))
}

/// Dickman's function for `0 <= u <= 64`.
pub fn dickman_rho(u: f64) -> Result<f64> {
    shared_rho().eval(u)
}

/// Positive root of `e^xi = 1 + u xi` for `u > 1`.
///
/// Newton from the right of the root converges monotonically because the
/// function is convex; bisection is the fallback if an iterate ever leaves
/// the bracket.
pub fn xi(u: f64) -> Result<f64> {
    if !(u > 1.0) || !u.is_finite() {
        return Err(Error::Domain(format!("xi(u) needs u > 1, got {u}")));
    }
    let f = |t: f64| t.exp_m1() - u * t;
    let mut lo = 0.0f64;
    let mut hi = u.ln().max(1.0);
    while f(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut t = hi;
    for _ in 0..200 {
        let ft = f(t);
        if ft > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let next = t - ft / (t.exp() - u);
        let next = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if (next - t).abs() <= 1e-16 * t {
            t = next;
            break;
        }
        t = next;
    }
    Ok(t)
}

/// `E1(w) = Gamma(0, w) = int_w^inf e^{-t}/t dt` for `w > 0`.
pub fn exp_integral_e1(w: f64) -> Result<f64> {
    if !(w > 0.0) {
        return Err(Error::Domain(format!("E1(w) needs w > 0, got {w}")));
    }
    if w <= 1.0 {
        return Ok(ein(w)? - w.ln() - EULER_GAMMA);
    }
    // modified Lentz on e^{-w} / (w + 1 - 1/(w + 3 - 4/(w + 5 - ...)))
    let tiny = 1e-300;
    let mut b = w + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    Ok(h * (-w).exp())
}

/// `Ein(w) = int_0^w (1 - e^{-t})/t dt = Gamma(0, w) + log w + gamma`.
pub fn ein(w: f64) -> Result<f64> {
    if !(w >= 0.0) {
        return Err(Error::Domain(format!("Ein(w) needs w >= 0, got {w}")));
    }
    if w == 0.0 {
        return Ok(0.0);
    }
    if w <= EIN_ALTERNATING_MAX {
        // sum_{k>=1} (-1)^{k+1} w^k / (k k!)
        let mut sum = 0.0;
        let mut pow_fact = 1.0;
        for k in 1..200 {
            pow_fact *= w / k as f64;
            let term = pow_fact / k as f64;
            if k % 2 == 1 {
                sum += term;
            } else {
                sum -= term;
            }
            if term < 1e-18 * sum.abs() {
                break;
            }
        }
        Ok(sum)
    } else if w <= EIN_SWITCH {
        // e^{-w} sum_{n>=1} w^n/n! H_n: positive terms, no cancellation
        let mut sum = 0.0;
        let mut comp = 0.0;
        let mut pow_fact = 1.0;
        let mut harmonic = 0.0;
        let mut n = 1usize;
        loop {
            pow_fact *= w / n as f64;
            harmonic += 1.0 / n as f64;
            let term = pow_fact * harmonic;
            let y = term - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            if n as f64 > w && term < 1e-18 * sum {
                break;
            }
            n += 1;
        }
        Ok(sum * (-w).exp())
    } else {
        Ok(w.ln() + EULER_GAMMA + exp_integral_e1(w)?)
    }
}

/// Forward map `w e^{-Ein(w)}`, strictly increasing to `e^{-gamma}`.
pub fn alpha_forward(w: f64) -> Result<f64> {
    Ok(w * (-ein(w)?).exp())
}

/// `alpha(eta)`: the unique `w >= 0` with `w e^{-Ein(w)} = eta`.
pub fn alpha(eta: f64) -> Result<f64> {
    if !(eta >= 0.0) {
        return Err(Error::Domain(format!("alpha(eta) needs eta >= 0, got {eta}")));
    }
    if eta > EXP_NEG_GAMMA - ALPHA_GUARD {
        return Err(Error::Domain(format!(
            "alpha(eta) diverges as eta -> e^-gamma; got {eta}"
        )));
    }
    if eta == 0.0 {
        return Ok(0.0);
    }
    let mut hi = 8.0;
    while alpha_forward(hi)? <= eta {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Domain(format!("alpha({eta}) failed to bracket")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..1100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if alpha_forward(mid)? < eta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let flo = (alpha_forward(lo)? - eta).abs();
    let fhi = (alpha_forward(hi)? - eta).abs();
    Ok(if flo <= fhi { lo } else { hi })
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// `P(Poisson(lambda) >= n) = e^{-lambda} sum_{l >= n} lambda^l / l!`.
pub fn poisson_tail(lambda: f64, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    if lambda <= 0.0 {
        return 0.0;
    }
    if lambda < n as f64 {
        let mut term = (-lambda + n as f64 * lambda.ln() - ln_factorial(n)).exp();
        let mut sum = 0.0;
        let mut l = n;
        while term > 0.0 {
            sum += term;
            l += 1;
            term *= lambda / l as f64;
            if term < 1e-18 * sum {
                break;
            }
        }
        sum
    } else {
        let mut term = 1.0;
        let mut lower = 0.0;
        for l in 0..n {
            if l > 0 {
                term *= lambda / l as f64;
            }
            lower += term;
        }
        1.0 - lower * (-lambda).exp()
    }
}

/// Poisson mass `e^{-lambda} lambda^k / k!`.
pub fn poisson_mass(lambda: f64, k: usize) -> f64 {
    if lambda <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (-lambda + k as f64 * lambda.ln() - ln_factorial(k)).exp()
}

/// `ts_k(z) = m/(k(k-1)) e^{-m/z} sum_{l >= k-1} (m/z)^l / l!`.
pub fn ts_k(m: f64, z: f64, k: usize) -> f64 {
    assert!(k >= 2, "ts_k is defined for k >= 2");
    assert!(z > 0.0 && m >= 0.0);
    if m == 0.0 {
        return 0.0;
    }
    m / (k * (k - 1)) as f64 * poisson_tail(m / z, k - 1)
}

/// `ts_k` for `k = 2..=k_max` with a bound on the neglected tail.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TskTable {
    pub m: f64,
    pub z: f64,
    /// `values[i]` is `ts_{i+2}`.
    pub values: Vec<f64>,
    /// Bound on `sum_{k > k_max} k ts_k`.
    pub tail_bound: f64,
}

impl TskTable {
    /// Grow `k_max` until the tail bound is below `rel_tol` of the partial sum
    /// of `k ts_k`. The bound uses `(k+1) ts_{k+1} <= (m/z) ts_k`.
    pub fn adaptive(m: f64, z: f64, rel_tol: f64) -> TskTable {
        let lambda = m / z;
        let mut values = Vec::new();
        let mut partial = 0.0;
        let mut k = 2usize;
        loop {
            let v = ts_k(m, z, k);
            values.push(v);
            partial += k as f64 * v;
            let tail = tail_of_k_ts(k as f64 * v, lambda, k);
            if tail <= rel_tol * partial || v == 0.0 {
                return TskTable { m, z, values, tail_bound: if v == 0.0 { 0.0 } else { tail } };
            }
            k += 1;
        }
    }

    pub fn k_max(&self) -> usize {
        self.values.len() + 1
    }

    pub fn get(&self, k: usize) -> f64 {
        if k < 2 || k > self.k_max() {
            0.0
        } else {
            self.values[k - 2]
        }
    }
}

/// Bound on `sum_{k > k_last} k ts_k` from the ratio `lambda / k`.
fn tail_of_k_ts(last: f64, lambda: f64, k_last: usize) -> f64 {
    let r = lambda / k_last as f64;
    if r >= 1.0 {
        f64::INFINITY
    } else {
        last * r / (1.0 - r)
    }
}

/// Outcome of the `ts_k` identity checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityReport {
    pub m: f64,
    pub z: f64,
    pub k_max: usize,
    /// `sum k ts_k` against `m Ein(m/z)`.
    pub weighted_sum: f64,
    pub weighted_target: f64,
    pub weighted_tail: f64,
    pub weighted_dev: f64,
    /// `sum ts_k` against `m - z(1 - e^{-m/z})`.
    pub plain_sum: f64,
    pub plain_target: f64,
    pub plain_tail: f64,
    pub plain_dev: f64,
    /// Worst `|(k-1) ts_k - (k+1) ts_{k+1} - e^{-m/z} m^k / (k! z^{k-1})|`.
    pub recurrence_dev: f64,
    /// `sum 2^k ts_k` (with its tail bound) against `e^{m/z} m`.
    pub doubling_sum: f64,
    pub doubling_tail: f64,
    pub doubling_bound: f64,
    pub doubling_holds: bool,
}

impl IdentityReport {
    /// Largest deviation across the three identities.
    pub fn max_dev(&self) -> f64 {
        self.weighted_dev.max(self.plain_dev).max(self.recurrence_dev)
    }
}

fn neumaier(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Evaluate the summation identities of `ts_k` at `(m, z)`.
///
/// `k_max = None` grows the truncation until every tail bound is below
/// `1e-12` of its partial sum. Deviations are reported net of the analytic
/// tail bound.
pub fn identity_suite(m: f64, z: f64, k_max: Option<usize>) -> Result<IdentityReport> {
    if !(m >= 0.0) || !(z > 0.0) {
        return Err(Error::Domain(format!("identity suite needs m >= 0 and z > 0, got ({m}, {z})")));
    }
    let lambda = m / z;
    let k_cap = match k_max {
        Some(k) => k.max(2),
        None => {
            let mut k = 2usize;
            loop {
                let a = k as f64 * ts_k(m, z, k);
                let b = 2f64.powi(k as i32) * ts_k(m, z, k);
                let sum_est = m * ein(lambda)?.max(1e-300);
                let ta = tail_of_k_ts(a, lambda, k);
                let tb = tail_of_k_ts(b, 2.0 * lambda, k + 1);
                if (ta <= 1e-12 * sum_est && tb <= 1e-12 * sum_est.max(b)) || m == 0.0 || a == 0.0 {
                    break k;
                }
                k += 1;
            }
        }
    };
    let ts: Vec<f64> = (2..=k_cap + 1).map(|k| ts_k(m, z, k)).collect();
    let at = |k: usize| ts[k - 2];

    let weighted_sum = neumaier((2..=k_cap).map(|k| k as f64 * at(k)));
    let weighted_target = m * ein(lambda)?;
    let weighted_tail = if m == 0.0 { 0.0 } else { tail_of_k_ts(k_cap as f64 * at(k_cap), lambda, k_cap) };
    let weighted_dev = ((weighted_sum - weighted_target).abs() - weighted_tail).max(0.0);

    let plain_sum = neumaier((2..=k_cap).map(at));
    let plain_target = m + z * (-lambda).exp_m1();
    let plain_tail = weighted_tail / (k_cap + 1) as f64;
    let plain_dev = ((plain_sum - plain_target).abs() - plain_tail).max(0.0);

    let mut recurrence_dev = 0.0f64;
    for k in 2..=k_cap {
        let lhs = (k - 1) as f64 * at(k) - (k + 1) as f64 * at(k + 1);
        let rhs = if m == 0.0 {
            0.0
        } else {
            (-lambda + k as f64 * m.ln() - (k - 1) as f64 * z.ln() - ln_factorial(k)).exp()
        };
        recurrence_dev = recurrence_dev.max((lhs - rhs).abs());
    }

    let doubling_sum = neumaier((2..=k_cap).map(|k| 2f64.powi(k as i32) * at(k)));
    let doubling_tail = if m == 0.0 {
        0.0
    } else {
        tail_of_k_ts(2f64.powi(k_cap as i32) * at(k_cap), 2.0 * lambda, k_cap + 1)
    };
    let doubling_bound = lambda.exp() * m;
    let doubling_holds = doubling_sum + doubling_tail <= doubling_bound * (1.0 + 1e-12) + 1e-300;

    Ok(IdentityReport {
        m,
        z,
        k_max: k_cap,
        weighted_sum,
        weighted_target,
        weighted_tail,
        weighted_dev,
        plain_sum,
        plain_target,
        plain_tail,
        plain_dev,
        recurrence_dev,
        doubling_sum,
        doubling_tail,
        doubling_bound,
        doubling_holds,
    })
}

/// Center and band of the predicted 2-core size `m(z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MPrediction {
    pub center: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Analytic predictors bound to one parameter set.
///
/// Holds the full `Lambda(z)` table so that window-wide scans do not go back
/// to the exact counts.
#[derive(Debug, Clone)]
pub struct PredictorSet {
    pub params: InstanceParams,
    pub c0: f64,
    lambda: Vec<f64>,
}

impl PredictorSet {
    pub fn new(landscape: &Landscape, params: InstanceParams) -> Result<Self> {
        let max_z = landscape.profile.max_z();
        let mut lambda = Vec::with_capacity(max_z + 1);
        lambda.push(0.0);
        for z in 1..=max_z {
            lambda.push(landscape.profile.lambda(&params.j, z));
        }
        let c0 = alpha((1.0 + params.constants.eps0) * params.eta)?;
        Ok(PredictorSet { params, c0, lambda })
    }

    pub fn gamma(&self) -> f64 {
        EULER_GAMMA
    }

    pub fn lambda(&self, z: usize) -> f64 {
        self.lambda[z]
    }

    /// `eps(k, z) = eps1^k k! / Lambda(z)`, defined on the critical window.
    pub fn eps_band(&self, k: usize, z: usize) -> Result<f64> {
        if !self.params.in_window(z) {
            return Err(Error::Domain(format!(
                "eps(k, z) is defined on [{}, {}], got z = {z}",
                self.params.z_minus, self.params.z_plus
            )));
        }
        if k < 2 {
            return Err(Error::Domain(format!("eps(k, z) needs k >= 2, got {k}")));
        }
        let log = k as f64 * self.params.constants.eps1.ln() + ln_factorial(k);
        Ok(log.exp() / self.lambda(z))
    }

    /// `alpha((1 +- eps0) eta Lambda(z)) z` and the center `alpha(eta Lambda(z)) z`.
    pub fn predicted_m(&self, z: usize) -> Result<MPrediction> {
        let load = self.params.eta * self.lambda(z);
        let eps0 = self.params.constants.eps0;
        let zf = z as f64;
        Ok(MPrediction {
            center: alpha(load)? * zf,
            lo: alpha((1.0 - eps0) * load)? * zf,
            hi: alpha((1.0 + eps0) * load)? * zf,
        })
    }
}

/// `x rho(log x / log y)`, the leading term of the smooth count, without its
/// error factor. Valid for `y >= exp((log log x)^2)`.
pub fn psi_hildebrand(x: u64, y: u64) -> Result<f64> {
    if x < 2 || y < 2 {
        return Err(Error::Domain(format!("psi_hildebrand needs x, y >= 2, got ({x}, {y})")));
    }
    let lx = (x as f64).ln();
    let floor = lx.ln().max(0.0).powi(2).exp();
    if (y as f64) < floor {
        return Err(Error::Domain(format!(
            "y = {y} is below the validity floor exp((log log x)^2) = {floor:.1}"
        )));
    }
    let u = lx / (y as f64).ln();
    Ok(x as f64 * dickman_rho(u)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ein_quadrature(w: f64) -> f64 {
        // composite Simpson on (1 - e^{-t})/t, removable singularity at 0
        let n = 20_000;
        let h = w / n as f64;
        let f = |t: f64| if t == 0.0 { 1.0 } else { -(-t).exp_m1() / t };
        let mut s = f(0.0) + f(w);
        for i in 1..n {
            let t = i as f64 * h;
            s += if i % 2 == 1 { 4.0 * f(t) } else { 2.0 * f(t) };
        }
        s * h / 3.0
    }

    #[test]
    fn rho_values() {
        assert_eq!(dickman_rho(0.5).unwrap(), 1.0);
        assert_eq!(dickman_rho(1.0).unwrap(), 1.0);
        assert!((dickman_rho(2.0).unwrap() - (1.0 - 2f64.ln())).abs() < 1e-12);
        for u in [1.25, 1.5, 1.999] {
            assert!((dickman_rho(u).unwrap() - (1.0 - u.ln())).abs() < 1e-12, "u={u}");
        }
        assert!(matches!(dickman_rho(-0.1), Err(Error::Domain(_))));
        assert!(matches!(dickman_rho(100.0), Err(Error::Range(_))));
    }

    #[test]
    fn rho_known_table_values() {
        let cases = [
            (3.0, 4.860_838_829_11e-2),
            (4.0, 4.910_925_647_76e-3),
            (5.0, 3.547_247_004_56e-4),
            (10.0, 2.770_171_837_73e-11),
            (20.0, 2.461_782_828_76e-29),
        ];
        for (u, want) in cases {
            let got = dickman_rho(u).unwrap();
            assert!((got / want - 1.0).abs() < 1e-10, "rho({u}) = {got:e}");
        }
        let r40 = dickman_rho(40.0).unwrap();
        let order = -r40.ln() / (40.0 * 40f64.ln());
        assert!(order > 1.0 && order < 1.2);
    }

    #[test]
    fn rho_step_halving() {
        let coarse = DickmanRho::new(1024, 20.0).unwrap();
        let fine = DickmanRho::new(2048, 20.0).unwrap();
        for i in 0..=20 * 1024 {
            let a = coarse.at_index(i);
            let b = fine.at_index(2 * i);
            assert!((a - b).abs() <= 1e-8, "u={} {a} {b}", i as f64 / 1024.0);
            assert!((a - b).abs() <= 1e-8 * b, "u={} {a} {b}", i as f64 / 1024.0);
        }
    }

    #[test]
    fn rho_grid_matches_series() {
        let grid = DickmanRho::new(1024, 24.0).unwrap();
        for i in 0..=2400 {
            let u = i as f64 * 0.01;
            let (g, s) = (grid.eval(u).unwrap(), dickman_rho(u).unwrap());
            assert!((g / s - 1.0).abs() < 5e-9, "u={u} {g:e} {s:e}");
        }
        assert!(DickmanRho::new(1023, 4.0).is_err());
    }

    #[test]
    fn rho_is_log_concave() {
        // rho(u-1) / (u rho(u)) nondecreasing
        let mut prev = 0.0;
        let mut u = 1.0;
        while u <= 60.0 {
            let r = dickman_rho(u - 1.0).unwrap() / (u * dickman_rho(u).unwrap());
            assert!(r >= prev * (1.0 - 1e-12), "u={u}");
            prev = r;
            u += 0.01;
        }
    }

    #[test]
    fn xi_values() {
        // bisection oracle on e^t - 1 - 2t
        let (mut lo, mut hi) = (0.5f64, 3.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid.exp() - 1.0 - 2.0 * mid < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((xi(2.0).unwrap() - lo).abs() < 1e-13);
        assert!((xi(2.0).unwrap() - 1.25643).abs() < 1e-5);
        assert!(xi(1.0 + 1e-9).unwrap() < 1e-8);
        assert!(xi(1.0).is_err());
        let mut prev = 0.0;
        for i in 1..400 {
            let u = 1.0 + i as f64 * 0.25;
            let t = xi(u).unwrap();
            assert!(t > prev);
            let resid = (t.exp_m1() - u * t).abs() / t.exp();
            assert!(resid <= 1e-12, "u={u} resid={resid}");
            prev = t;
        }
        let big = 1e12;
        assert!((xi(big).unwrap() / big.ln() - 1.0).abs() < 0.15);
    }

    #[test]
    fn ein_values() {
        assert_eq!(ein(0.0).unwrap(), 0.0);
        assert!((ein(1.0).unwrap() - 0.796_599_599_297_053_1).abs() < 1e-14);
        for w in [0.01, 0.3, 1.0, 1.99, 2.01, 3.99, 4.01, 12.0, 29.9, 30.1] {
            let q = ein_quadrature(w);
            assert!((ein(w).unwrap() - q).abs() < 1e-11, "w={w}");
        }
        let w = 50.0;
        // Gamma(0, 50) ~ 4e-24 is below the resolution of Ein(50) itself
        let gap = ein(w).unwrap() - (w.ln() + EULER_GAMMA);
        assert!((0.0..1e-10).contains(&gap), "{gap}");
        let tail = exp_integral_e1(w).unwrap();
        assert!(tail > 0.0 && tail < 1e-10);
        assert!(ein(-1.0).is_err());
    }

    #[test]
    fn e1_matches_ein_relation() {
        for w in [0.5, 1.0, 1.5, 3.0, 10.0, 25.0] {
            let lhs = exp_integral_e1(w).unwrap();
            let rhs = ein(w).unwrap() - w.ln() - EULER_GAMMA;
            assert!((lhs - rhs).abs() < 1e-13 * (1.0 + rhs.abs()).max(1.0), "w={w}");
        }
    }

    #[test]
    fn alpha_values() {
        assert_eq!(alpha(0.0).unwrap(), 0.0);
        let eta1 = alpha_forward(1.0).unwrap();
        assert!((alpha(eta1).unwrap() - 1.0).abs() < 1e-9);
        assert!(alpha(EXP_NEG_GAMMA).is_err());
        assert!(alpha(-0.1).is_err());
        let mut w = 0.0;
        while w <= 0.2 {
            let a = alpha(w).unwrap();
            assert!(w <= a + 1e-15 && a <= w + 2.0 * w * w + 1e-15, "w={w}");
            w += 0.001;
        }
    }

    #[test]
    fn alpha_forward_monotone_and_bounded() {
        let mut prev = -1.0;
        for i in 0..5000 {
            let w = i as f64 * 0.01;
            let v = alpha_forward(w).unwrap();
            // increments fall below double resolution as Gamma(0, w) -> 0
            if w < 20.0 {
                assert!(v > prev, "w={w}");
            } else {
                assert!(v >= prev - 1e-15, "w={w}");
            }
            assert!(v < EXP_NEG_GAMMA + 1e-12);
            prev = v;
        }
    }

    #[test]
    fn alpha_convex() {
        let n = 200;
        let h = (EXP_NEG_GAMMA - 1e-3) / n as f64;
        let vals: Vec<f64> = (0..=n).map(|i| alpha(i as f64 * h).unwrap()).collect();
        for i in 1..n {
            assert!(vals[i - 1] - 2.0 * vals[i] + vals[i + 1] >= -1e-9, "i={i}");
        }
    }

    #[test]
    fn ts_k_examples() {
        let z = 1000.0;
        let v = ts_k(z, z, 2);
        assert!((v / z - 0.5 * (1.0 - (-1f64).exp())).abs() < 1e-14);
        assert!((v / z - 0.316_060_3).abs() < 1e-7);
        assert_eq!(ts_k(0.0, 50.0, 5), 0.0);
        for &(m, z) in &[(10.0, 100.0), (500.0, 100.0), (1000.0, 1000.0)] {
            let lam: f64 = m / z;
            for k in 2..40 {
                let a = ts_k(m, z, k);
                let b = ts_k(m, z, k + 1);
                assert!(b <= a);
                assert!((k + 1) as f64 * b <= lam * a * (1.0 + 1e-12) + 1e-300);
            }
        }
    }

    #[test]
    fn poisson_tail_against_direct_sum() {
        for &lam in &[0.01, 0.7, 3.0, 9.5] {
            for n in 0..25 {
                let direct: f64 = (n..200).map(|l| poisson_mass(lam, l)).sum();
                let got = poisson_tail(lam, n);
                assert!((got - direct).abs() <= 1e-14 + 1e-12 * direct, "lam={lam} n={n}");
            }
        }
    }

    #[test]
    fn identities_hold() {
        let r = identity_suite(1000.0, 1000.0, None).unwrap();
        assert!(r.max_dev() < 1e-9, "{r:?}");
        assert!(r.doubling_holds);
        let r = identity_suite(0.0, 10.0, None).unwrap();
        assert_eq!(r.max_dev(), 0.0);
        assert_eq!(r.weighted_sum, 0.0);
    }

    #[test]
    fn tsk_table_tail() {
        let t = TskTable::adaptive(300.0, 100.0, 1e-12);
        let full: f64 = (2..200).map(|k| k as f64 * ts_k(300.0, 100.0, k)).sum();
        let part: f64 = (2..=t.k_max()).map(|k| k as f64 * t.get(k)).sum();
        assert!(full - part <= t.tail_bound + 1e-12);
        assert!(t.tail_bound <= 1e-12 * part);
    }

    #[test]
    fn hildebrand_floor_and_identity() {
        assert!((psi_hildebrand(1_000_000, 1_000_000).unwrap() - 1e6).abs() < 1e-6);
        assert!(psi_hildebrand(1_000_000, 100).is_err());
        assert!(psi_hildebrand(1_000_000, 1009).is_ok());
    }
}
