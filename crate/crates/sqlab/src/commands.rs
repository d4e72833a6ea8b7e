//! The `predict`, `trajectory`, `threshold` and `avalanche` experiments.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use sqlab_core::avalanche::{self, AvalancheReport, DegreeSpec, Explorer, Hypergraph};
use sqlab_core::instance::{self, trial_seed, Instance, RowStream};
use sqlab_core::numtheory::{InstanceParams, Landscape, SmoothCounter};
use sqlab_core::peeling::{self, PoissonLine, PoissonPool};
use sqlab_core::predictors::{self, PredictorSet, EXP_NEG_GAMMA};
use sqlab_core::squares::{self, GF2Basis, Insert};

use crate::config::{ExperimentConfig, Format};
use crate::output::{self, Cell, Table};
use crate::HarnessError;

/// Largest `k` of the pooled degree comparison.
pub const POISSON_K_MAX: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Predict,
    Trajectory,
    Threshold,
    Avalanche,
}

/// Parameters derived from the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    pub x: u64,
    pub n_rows: usize,
    pub j: f64,
    /// `J = j_numer / j_denom` exactly.
    pub j_numer: u128,
    pub j_denom: u64,
    pub y0: u64,
    pub z0: usize,
    pub u0: f64,
    pub z_minus: usize,
    pub z_plus: usize,
    pub max_z: usize,
    pub delta: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub c0: f64,
    pub alpha_eta: f64,
    pub eps0_max: f64,
    pub eps1_max: f64,
    pub log_delta_max: f64,
    pub delta_admissible: bool,
    pub z_stop: usize,
    pub n_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub config: ExperimentConfig,
    pub derived: Option<Derived>,
    pub trial_seeds: Vec<u64>,
}

impl RunManifest {
    fn new(command: Command, cfg: &ExperimentConfig, derived: Option<Derived>) -> Self {
        RunManifest {
            tool: "sqlab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command,
            config: cfg.clone(),
            derived,
            trial_seeds: (0..cfg.trials as u64).map(|t| trial_seed(cfg.seed, t)).collect(),
        }
    }

    pub fn parse(text: &str) -> Result<RunManifest, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("unreadable manifest: {e}")))
    }
}

/// Everything a command writes.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub manifest: RunManifest,
    pub tables: Vec<Table>,
    /// `(file name, JSON text)`.
    pub documents: Vec<(String, String)>,
}

impl RunOutput {
    pub fn write(&self, dir: &Path, format: Format) -> Result<Vec<String>, HarnessError> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for t in &self.tables {
            t.write(dir, format)?;
            written.push(t.file_name(format));
        }
        for (name, text) in &self.documents {
            fs::write(dir.join(name), text)?;
            written.push(name.clone());
        }
        output::write_json(&dir.join("manifest.json"), &self.manifest)?;
        written.push("manifest.json".into());
        Ok(written)
    }
}

/// Landscape, parameters and predictors for one configuration.
pub struct Setup {
    pub landscape: Landscape,
    pub params: InstanceParams,
    pub pred: PredictorSet,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Setup, HarnessError> {
        cfg.validate()?;
        let constants = cfg.constants()?;
        let landscape = Landscape::new(cfg.x)?;
        let mut params = landscape.params(cfg.eta, constants, cfg.strict)?;
        if let Some(n) = cfg.rows {
            params = params.with_rows(n);
        }
        let pred = PredictorSet::new(&landscape, params)?;
        Ok(Setup { landscape, params, pred })
    }

    pub fn z_stop(&self, cfg: &ExperimentConfig) -> usize {
        cfg.z_stop.unwrap_or(self.params.z_minus).min(self.params.max_z)
    }

    pub fn n_max(&self, cfg: &ExperimentConfig) -> usize {
        (cfg.n_max_factor * self.params.j.j).ceil() as usize
    }

    pub fn derived(&self, cfg: &ExperimentConfig) -> Derived {
        let p = &self.params;
        Derived {
            x: p.x,
            n_rows: p.n_rows,
            j: p.j.j,
            j_numer: p.j.numer,
            j_denom: p.j.denom,
            y0: p.j.y0,
            z0: p.j.z0,
            u0: p.u0,
            z_minus: p.z_minus,
            z_plus: p.z_plus,
            max_z: p.max_z,
            delta: p.constants.delta,
            eps0: p.constants.eps0,
            eps1: p.constants.eps1,
            c0: self.pred.c0,
            alpha_eta: predictors::alpha(p.eta).unwrap_or(f64::NAN),
            eps0_max: p.chain.eps0_max,
            eps1_max: p.chain.eps1_max,
            log_delta_max: p.chain.log_delta_max,
            delta_admissible: p.chain.delta_admissible,
            z_stop: self.z_stop(cfg),
            n_max: self.n_max(cfg),
        }
    }
}

/// `n` log-spaced integers in `[lo, hi]` plus `extra` points inside the range.
pub fn log_grid(lo: usize, hi: usize, n: usize, extra: &[usize]) -> Vec<usize> {
    let lo = lo.max(1);
    if hi < lo {
        return Vec::new();
    }
    let mut pts: Vec<usize> = (0..n)
        .map(|i| {
            let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            ((lo as f64) * (hi as f64 / lo as f64).powf(t)).round() as usize
        })
        .map(|z| z.clamp(lo, hi))
        .collect();
    pts.extend(extra.iter().copied().filter(|&z| (lo..=hi).contains(&z)));
    pts.sort_unstable();
    pts.dedup();
    pts
}

fn run_trials<T: Send>(trials: usize, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    (0..trials as u64).into_par_iter().map(f).collect()
}

// ---------------------------------------------------------------- predict

pub struct PredictRun {
    pub output: RunOutput,
    pub flagged: usize,
}

pub fn predict(cfg: &ExperimentConfig) -> Result<PredictRun, HarnessError> {
    let setup = Setup::new(cfg)?;
    let p = &setup.params;
    let mut header = vec!["z", "Lambda", "alpha_center", "m_lo", "m_hi"];
    let ts_names: Vec<String> = (2..=8).map(|k| format!("ts_{k}")).collect();
    header.extend(ts_names.iter().map(String::as_str));
    let mut table = Table::new("predict", &header);
    let grid = log_grid(1, p.max_z, cfg.grid, &[p.z0(), p.z_minus, p.z_plus]);
    let eps0 = p.constants.eps0;
    let mut flagged = 0;
    for z in grid {
        let lam = setup.pred.lambda(z);
        let load = p.eta * lam;
        let zf = z as f64;
        let a = |w: f64| predictors::alpha(w).map(|v| v * zf).unwrap_or(f64::NAN);
        let (center, lo, hi) = (a(load), a((1.0 - eps0) * load), a((1.0 + eps0) * load));
        if center.is_nan() || lo.is_nan() || hi.is_nan() {
            flagged += 1;
        }
        let mut row: Vec<Cell> = vec![z.into(), lam.into(), center.into(), lo.into(), hi.into()];
        for k in 2..=8 {
            let ts = if center.is_nan() { f64::NAN } else { predictors::ts_k(center, zf, k) };
            row.push(ts.into());
        }
        table.push(row);
    }
    let mut manifest = RunManifest::new(Command::Predict, cfg, Some(setup.derived(cfg)));
    manifest.trial_seeds.clear();
    Ok(PredictRun { output: RunOutput { manifest, tables: vec![table], documents: Vec::new() }, flagged })
}

// ---------------------------------------------------------------- trajectory

/// Pooled check of `m0(z)` against `N psi~(x, q_z) / x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct M0Check {
    pub z: usize,
    pub p: f64,
    pub samples: u64,
    pub observed: u64,
    pub expected: f64,
    pub se: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub m_hit_rate: f64,
    pub m_z0: usize,
    pub m_z0_ratio: f64,
    pub sk_hit_rate: f64,
    pub sk_worst: f64,
    pub final_m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySummary {
    pub trials: usize,
    pub failed: Vec<(usize, String)>,
    pub z_lo: usize,
    pub z_hi: usize,
    pub z0: usize,
    pub alpha_eta: f64,
    /// Trial mean of `m(z0) / z0`.
    pub mean_m_z0_over_z0: f64,
    /// The same divided by `alpha(eta)`.
    pub mean_ratio_to_alpha: f64,
    /// Fraction of trials with `m(z0) / z0` within 25% of `alpha(eta)`.
    pub z0_hit_rate: f64,
    pub mean_m_band_hit_rate: f64,
    pub mean_sk_hit_rate: f64,
    pub sk_worst: f64,
    pub poisson_samples: u64,
    pub poisson_mean_d: f64,
    pub poisson_mean_mu: f64,
    pub poisson: Vec<PoissonLine>,
    pub m0: Vec<M0Check>,
    pub weight_bound: f64,
    pub weight_bound_guaranteed: bool,
    pub weight_violations: usize,
    pub per_trial: Vec<TrialSummary>,
}

struct TrialTrajectory {
    m_rows: Vec<Vec<Cell>>,
    sk_rows: Vec<Vec<Cell>>,
    summary: TrialSummary,
    pool: PoissonPool,
    m0: Vec<usize>,
    violations: usize,
}

pub struct TrajectoryRun {
    pub output: RunOutput,
    pub summary: TrajectorySummary,
}

pub fn trajectory(cfg: &ExperimentConfig) -> Result<TrajectoryRun, HarnessError> {
    let setup = Setup::new(cfg)?;
    let p = &setup.params;
    let z_stop = setup.z_stop(cfg);
    let z_lo = p.z_minus.max(z_stop).max(1);
    let z_hi = p.z_plus;
    let grid = log_grid(z_lo, z_hi, cfg.grid, &[p.z0(), p.z_minus, p.z_plus]);
    let z0 = p.z0();
    let gm = |a: usize, b: usize| ((a as f64) * (b as f64)).sqrt().round() as usize;
    let m0_z = {
        let mut v = vec![z_lo, gm(z_lo, z0.max(z_lo)), z0, gm(z0, z_hi), z_hi];
        v.retain(|&z| (z_lo..=z_hi).contains(&z));
        v.sort_unstable();
        v.dedup();
        v
    };
    let weight = instance::weight_bound_check(&Instance { x: p.x, seed: 0, rows: Vec::new() }, p, &setup.landscape.table);

    let results = run_trials(cfg.trials, |t| -> Result<TrialTrajectory, String> {
        let seed = trial_seed(cfg.seed, t);
        let inst = instance::sample_instance(p, &setup.landscape.table, seed).map_err(|e| e.to_string())?;
        let violations = instance::weight_bound_check(&inst, p, &setup.landscape.table).violations;
        let traj = peeling::run_peeling(&inst, p.max_z, z_stop);
        let report = peeling::deviation_report(&traj, &setup.pred, &grid, cfg.k_max);
        let mut pool = PoissonPool::new(POISSON_K_MAX);
        pool.add(&traj, z_lo, z_hi);
        let trial = t as usize;
        let m_rows = traj
            .records
            .iter()
            .map(|r| vec![trial.into(), r.z.into(), r.m.into(), r.m0.into(), r.d.into(), r.removed.into(), r.r1.into()])
            .collect();
        let sk_rows = report
            .sk
            .iter()
            .map(|d| vec![trial.into(), d.z.into(), d.k.into(), d.s_k.into(), d.ts_k.into(), d.eps.into()])
            .collect();
        let summary = TrialSummary {
            trial,
            m_hit_rate: report.m_hit_rate,
            m_z0: report.m_z0,
            m_z0_ratio: report.m_z0_ratio,
            sk_hit_rate: report.sk_hit_rate,
            sk_worst: report.sk_worst,
            final_m: traj.final_m,
        };
        let m0 = m0_z.iter().map(|&z| inst.isolated_count(z)).collect();
        Ok(TrialTrajectory { m_rows, sk_rows, summary, pool, m0, violations })
    });

    let mut m_traj = Table::new("m_traj", &["trial", "z", "m", "m0", "d", "D", "R1"]);
    let mut sk_traj = Table::new("sk_traj", &["trial", "z", "k", "s_k", "ts_k", "eps_band"]);
    let mut pool = PoissonPool::new(POISSON_K_MAX);
    let mut failed = Vec::new();
    let mut per_trial = Vec::new();
    let mut m0_obs = vec![0u64; m0_z.len()];
    let mut violations = 0;
    for (t, r) in results.into_iter().enumerate() {
        match r {
            Ok(tt) => {
                m_traj.rows.extend(tt.m_rows);
                sk_traj.rows.extend(tt.sk_rows);
                pool.merge(&tt.pool);
                for (o, c) in m0_obs.iter_mut().zip(&tt.m0) {
                    *o += *c as u64;
                }
                violations += tt.violations;
                per_trial.push(tt.summary);
            }
            Err(e) => {
                eprintln!("trial {t} failed: {e}");
                failed.push((t, e));
            }
        }
    }
    let done = per_trial.len().max(1) as f64;
    let mut counter = SmoothCounter::new(&setup.landscape.table);
    let samples = per_trial.len() as u64 * p.n_rows as u64;
    let m0 = m0_z
        .iter()
        .zip(&m0_obs)
        .map(|(&z, &observed)| {
            let prob = counter.psi_tilde(p.x, z) as f64 / p.x as f64;
            let expected = samples as f64 * prob;
            let se = (samples as f64 * prob * (1.0 - prob)).sqrt();
            let diff = observed as f64 - expected;
            let score = if se > 0.0 { diff / se } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
            M0Check { z, p: prob, samples, observed, expected, se, score }
        })
        .collect();
    let alpha_eta = predictors::alpha(p.eta).unwrap_or(f64::NAN);
    let mean_m_z0_over_z0 = per_trial.iter().map(|s| s.m_z0 as f64 / z0 as f64).sum::<f64>() / done;
    let finite_mean = |f: &dyn Fn(&TrialSummary) -> f64| {
        let v: Vec<f64> = per_trial.iter().map(f).filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let summary = TrajectorySummary {
        trials: cfg.trials,
        failed,
        z_lo,
        z_hi,
        z0,
        alpha_eta,
        mean_m_z0_over_z0,
        mean_ratio_to_alpha: mean_m_z0_over_z0 / alpha_eta,
        z0_hit_rate: per_trial.iter().filter(|s| (s.m_z0_ratio - 1.0).abs() <= 0.25).count() as f64 / done,
        mean_m_band_hit_rate: finite_mean(&|s| s.m_hit_rate),
        mean_sk_hit_rate: finite_mean(&|s| s.sk_hit_rate),
        sk_worst: per_trial.iter().map(|s| s.sk_worst).fold(0.0, f64::max),
        poisson_samples: pool.samples,
        poisson_mean_d: pool.d_sum as f64 / pool.samples as f64,
        poisson_mean_mu: pool.mu_sum / pool.samples as f64,
        poisson: pool.lines(),
        m0,
        weight_bound: weight.bound,
        weight_bound_guaranteed: weight.guaranteed,
        weight_violations: violations,
        per_trial,
    };
    let doc = ("trajectory_summary.json".to_string(), output::to_json(&summary));
    let manifest = RunManifest::new(Command::Trajectory, cfg, Some(setup.derived(cfg)));
    Ok(TrajectoryRun { output: RunOutput { manifest, tables: vec![m_traj, sk_traj], documents: vec![doc] }, summary })
}

// ---------------------------------------------------------------- threshold

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdTrial {
    pub trial: usize,
    pub t: Option<usize>,
    pub certificate_size: usize,
    pub certificate_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdSummary {
    pub x: u64,
    pub j: f64,
    pub n_max: usize,
    pub trials: usize,
    pub exhausted: usize,
    /// Mean of `T / J` over trials that found a dependency.
    pub mean_ratio: f64,
    /// Median of `T / J` with exhausted trials counted as `+inf`.
    pub median_ratio: f64,
    pub exp_neg_gamma: f64,
    pub certificate_failures: usize,
}

pub struct ThresholdRun {
    pub output: RunOutput,
    pub summary: ThresholdSummary,
    pub trials: Vec<ThresholdTrial>,
}

pub fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn threshold(cfg: &ExperimentConfig) -> Result<ThresholdRun, HarnessError> {
    let setup = Setup::new(cfg)?;
    let p = &setup.params;
    let n_max = setup.n_max(cfg);
    let trials = run_trials(cfg.trials, |t| -> Result<ThresholdTrial, String> {
        let mut stream = RowStream::new(&setup.landscape.table, p.x, trial_seed(cfg.seed, t)).map_err(|e| e.to_string())?;
        let mut basis = GF2Basis::new();
        let mut inst = Instance { x: p.x, seed: trial_seed(cfg.seed, t), rows: Vec::new() };
        for i in 0..n_max {
            let row = stream.next_row();
            let ins = basis.insert_row(&row.odd_primes, i);
            inst.rows.push(row);
            if let Insert::Dependency(cert) = ins {
                let ok = squares::verify_certificate(&inst, &cert).map_err(|e| e.to_string())?;
                return Ok(ThresholdTrial { trial: t as usize, t: Some(i + 1), certificate_size: cert.rows.len(), certificate_ok: ok });
            }
        }
        Ok(ThresholdTrial { trial: t as usize, t: None, certificate_size: 0, certificate_ok: true })
    });
    let trials: Vec<ThresholdTrial> = trials.into_iter().collect::<Result<_, _>>().map_err(HarnessError::Invariant)?;
    let j = p.j.j;
    let eta_max = n_max as f64 / j;
    let mut table = Table::new("threshold", &["trial", "x", "eta_max", "T", "J", "ratio_T_over_J", "certificate_size"]);
    for tr in &trials {
        let (t_cell, ratio): (Cell, f64) = match tr.t {
            Some(t) => (t.into(), t as f64 / j),
            None => ("exhausted".into(), f64::NAN),
        };
        table.push(vec![tr.trial.into(), p.x.into(), eta_max.into(), t_cell, j.into(), ratio.into(), tr.certificate_size.into()]);
    }
    let found: Vec<f64> = trials.iter().filter_map(|t| t.t).map(|t| t as f64 / j).collect();
    let all: Vec<f64> = trials.iter().map(|t| t.t.map_or(f64::INFINITY, |t| t as f64 / j)).collect();
    let summary = ThresholdSummary {
        x: p.x,
        j,
        n_max,
        trials: trials.len(),
        exhausted: trials.len() - found.len(),
        mean_ratio: if found.is_empty() { f64::NAN } else { found.iter().sum::<f64>() / found.len() as f64 },
        median_ratio: median(all),
        exp_neg_gamma: EXP_NEG_GAMMA,
        certificate_failures: trials.iter().filter(|t| !t.certificate_ok).count(),
    };
    let doc = ("threshold_summary.json".to_string(), output::to_json(&summary));
    let manifest = RunManifest::new(Command::Threshold, cfg, Some(setup.derived(cfg)));
    Ok(ThresholdRun { output: RunOutput { manifest, tables: vec![table], documents: vec![doc] }, summary, trials })
}

// ---------------------------------------------------------------- avalanche

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvalancheSummary {
    pub spec: DegreeSpec,
    pub source: String,
    pub report: AvalancheReport,
}

pub struct AvalancheRun {
    pub output: RunOutput,
    pub summary: AvalancheSummary,
}

/// Degree spec from flags, or from trial 0's peeling state at `from_z`.
fn avalanche_spec(cfg: &ExperimentConfig) -> Result<(DegreeSpec, String, Option<Derived>), HarnessError> {
    if let Some(z) = cfg.from_z {
        let setup = Setup::new(cfg)?;
        let p = &setup.params;
        if z == 0 || z > p.max_z {
            return Err(HarnessError::Config(format!("from-z = {z} outside [1, {}]", p.max_z)));
        }
        let inst = instance::sample_instance(p, &setup.landscape.table, trial_seed(cfg.seed, 0))?;
        let mut peeler = peeling::Peeler::new(&inst, p.max_z);
        peeler.advance_through(z + 1);
        let s = peeler.s_k();
        let spec = DegreeSpec::new(peeler.m(), s.iter().enumerate().skip(2).map(|(k, &c)| (k, c)))?;
        return Ok((spec, format!("trajectory snapshot: trial 0, z = {z}"), Some(setup.derived(cfg))));
    }
    let m = cfg.m.ok_or_else(|| HarnessError::Config("avalanche needs m and s, or from-z".into()))?;
    let spec = DegreeSpec::new(m, cfg.s.iter().map(|(&k, &s)| (k, s)))?;
    Ok((spec, "flags".into(), None))
}

pub fn avalanche(cfg: &ExperimentConfig) -> Result<AvalancheRun, HarnessError> {
    cfg.validate()?;
    let (spec, source, derived) = avalanche_spec(cfg)?;
    let eps1 = cfg.constants()?.eps1;
    spec.check_subcritical(eps1)?;
    let results: Vec<_> = (0..cfg.trials as u64)
        .into_par_iter()
        .map_init(
            || (Hypergraph::default(), Explorer::new()),
            |(g, e), t| avalanche::run_trial(&spec, cfg.seed, t, g, e),
        )
        .collect();
    let report = avalanche::summarize(&spec, &results);
    let mut table = Table::new("avalanche", &["trial", "D", "R1", "delta2", "delta3", "delta_prime"]);
    for (t, r) in results.iter().enumerate() {
        let dk = |k: usize| r.delta_k.get(k).copied().unwrap_or(0);
        table.push(vec![t.into(), r.d.into(), r.r1.into(), dk(2).into(), dk(3).into(), r.delta_prime.into()]);
    }
    let summary = AvalancheSummary { spec, source, report };
    let doc = ("avalanche_summary.json".to_string(), output::to_json(&summary));
    let manifest = RunManifest::new(Command::Avalanche, cfg, derived);
    Ok(AvalancheRun { output: RunOutput { manifest, tables: vec![table], documents: vec![doc] }, summary })
}

/// Run one command on a pool of `workers` threads (all cores when `None`).
pub fn run(command: Command, cfg: &ExperimentConfig, workers: Option<usize>) -> Result<RunOutput, HarnessError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(HarnessError::Config("workers must be >= 1".into()));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match command {
        Command::Predict => predict(cfg).map(|r| {
            if r.flagged > 0 {
                eprintln!("{} predict rows flagged: alpha undefined at (1 + eps0) eta Lambda(z)", r.flagged);
            }
            r.output
        }),
        Command::Trajectory => trajectory(cfg).map(|r| r.output),
        Command::Threshold => {
            let r = threshold(cfg)?;
            if r.summary.certificate_failures > 0 {
                return Err(HarnessError::Invariant(format!(
                    "{} certificates failed exponent-level verification",
                    r.summary.certificate_failures
                )));
            }
            Ok(r.output)
        }
        Command::Avalanche => avalanche(cfg).map(|r| r.output),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        let g = log_grid(1, 1000, 5, &[37, 5000]);
        assert_eq!(g, vec![1, 6, 32, 37, 178, 1000]);
        assert!(log_grid(5, 4, 3, &[]).is_empty());
        assert_eq!(log_grid(3, 3, 4, &[3]), vec![3]);
    }

    #[test]
    fn median_values() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(vec![1.0, f64::INFINITY, f64::INFINITY]), f64::INFINITY);
        assert!(median(vec![]).is_nan());
    }

    #[test]
    fn predict_small() {
        let mut cfg = ExperimentConfig::default();
        cfg.x = 100_000;
        let r = predict(&cfg).unwrap();
        let t = &r.output.tables[0];
        let z0 = r.output.manifest.derived.as_ref().unwrap().z0;
        let row = t.rows.iter().find(|row| row[0] == Cell::Int(z0 as i128)).unwrap();
        assert_eq!(row[1], Cell::Float(1.0));
        cfg.eta = 0.0;
        let r = predict(&cfg).unwrap();
        assert!(r.output.tables[0].rows.iter().all(|row| row[2] == Cell::Float(0.0)));
        let parsed = RunManifest::parse(&output::to_json(&r.output.manifest)).unwrap();
        assert_eq!(parsed, r.output.manifest);
    }

    #[test]
    fn avalanche_needs_spec() {
        let cfg = ExperimentConfig::default();
        assert!(matches!(avalanche(&cfg), Err(HarnessError::Config(_))));
    }

    #[test]
    fn threshold_small_is_repeatable() {
        let mut cfg = ExperimentConfig::default();
        cfg.x = 10_000;
        cfg.trials = 4;
        let a = threshold(&cfg).unwrap();
        let b = threshold(&cfg).unwrap();
        assert_eq!(a.output.tables[0].to_csv(), b.output.tables[0].to_csv());
        assert!(a.trials.iter().all(|t| t.certificate_ok));
    }
}
