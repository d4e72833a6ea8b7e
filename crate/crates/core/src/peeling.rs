//! Column-by-column 2-core peeling.
//!
//! Columns are revealed from `pi(x)` downwards. A revealed column of active
//! degree 1 removes its unique active row, which may push further revealed
//! columns down to degree 1. Steps where the revealed column has no active row
//! change nothing, so only columns touched by some row are visited and a
//! record is kept for each step with `d(z) > 0`.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use serde::Serialize;

use crate::instance::Instance;
use crate::predictors::{self, PredictorSet};

/// One step `z` with `d(z) > 0`. `m`, `m0` and `s_k` describe the state
/// `M(z)`, `S_k(z)` before the step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrajectoryRecord {
    pub z: usize,
    pub m: usize,
    pub m0: usize,
    pub d: usize,
    /// `s_k[k]` for `k >= 0`; entries 0 and 1 are always zero.
    pub s_k: Vec<usize>,
    /// Rows removed, `m(z) - m(z-1)`.
    pub removed: usize,
    /// Ones removed from columns `>= z`.
    pub r1: usize,
    /// `delta_k[k] = |S_k(z) \ S_k(z-1)|`.
    pub delta_k: Vec<usize>,
    /// Columns of step-start degree `>= 3` that lost at least two rows.
    pub delta_prime: usize,
}

/// Incremental peeling state over one instance.
pub struct Peeler<'a> {
    instance: &'a Instance,
    /// Ascending global indices of touched columns; position is the local id.
    cols: Vec<u32>,
    row_cols: Vec<Vec<u32>>,
    col_start: Vec<usize>,
    col_rows: Vec<u32>,
    cnt: Vec<u32>,
    active: Vec<bool>,
    m: usize,
    /// Class sizes of revealed columns by active degree.
    hist: Vec<usize>,
    /// Locals below this are unrevealed.
    unrevealed: usize,
    /// Every step `>= next_z + 1` has run; the state is `M(next_z)`.
    next_z: usize,
    max_index_sorted: Vec<u32>,
    records: Vec<TrajectoryRecord>,
    heap: BinaryHeap<Reverse<u32>>,
    lost: Vec<u32>,
    start_cnt: Vec<u32>,
    touched: Vec<u32>,
}

impl<'a> Peeler<'a> {
    /// Start at `z = max_z` with every row active. `max_z` must cover every column used.
    pub fn new(instance: &'a Instance, max_z: usize) -> Self {
        let mut cols: Vec<u32> = instance.rows.iter().flat_map(|r| r.odd_primes.iter().copied()).collect();
        cols.sort_unstable();
        cols.dedup();
        assert!(cols.last().is_none_or(|&c| c as usize <= max_z), "column beyond max_z");
        let local = |g: u32| cols.binary_search(&g).expect("touched column") as u32;
        let row_cols: Vec<Vec<u32>> =
            instance.rows.iter().map(|r| r.odd_primes.iter().map(|&g| local(g)).collect()).collect();
        let mut cnt = vec![0u32; cols.len()];
        for rc in &row_cols {
            for &c in rc {
                cnt[c as usize] += 1;
            }
        }
        let mut col_start = vec![0usize; cols.len() + 1];
        for c in 0..cols.len() {
            col_start[c + 1] = col_start[c] + cnt[c] as usize;
        }
        let mut fill = col_start.clone();
        let mut col_rows = vec![0u32; col_start[cols.len()]];
        for (i, rc) in row_cols.iter().enumerate() {
            for &c in rc {
                col_rows[fill[c as usize]] = i as u32;
                fill[c as usize] += 1;
            }
        }
        let mut max_index_sorted: Vec<u32> = instance.rows.iter().map(|r| r.max_index()).collect();
        max_index_sorted.sort_unstable();
        let n = instance.rows.len();
        let ncols = cols.len();
        Peeler {
            instance,
            unrevealed: ncols,
            cols,
            row_cols,
            col_start,
            col_rows,
            cnt,
            active: vec![true; n],
            m: n,
            hist: vec![0; n + 2],
            next_z: max_z,
            max_index_sorted,
            records: Vec::new(),
            heap: BinaryHeap::new(),
            lost: vec![0; ncols],
            start_cnt: vec![0; ncols],
            touched: Vec::new(),
        }
    }

    pub fn instance(&self) -> &Instance {
        self.instance
    }

    /// Current `z` such that the state is `M(z)`.
    pub fn z(&self) -> usize {
        self.next_z
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    /// Class sizes `s_k` of the current state, trimmed.
    pub fn s_k(&self) -> Vec<usize> {
        trimmed(&self.hist)
    }

    /// Rows whose largest odd-power prime index is at most `z`.
    pub fn m0(&self, z: usize) -> usize {
        self.max_index_sorted.partition_point(|&j| j as usize <= z)
    }

    pub fn records(&self) -> &[TrajectoryRecord] {
        &self.records
    }

    /// Run every step `z' >= max(z, 1)` not yet run; afterwards the state is `M(z - 1)`.
    pub fn advance_through(&mut self, z: usize) {
        let z = z.max(1);
        if z > self.next_z {
            return;
        }
        while self.unrevealed > 0 && self.cols[self.unrevealed - 1] as usize >= z {
            self.unrevealed -= 1;
            self.step(self.unrevealed);
        }
        self.next_z = z - 1;
    }

    fn step(&mut self, c: usize) {
        let d = self.cnt[c] as usize;
        if d == 0 {
            return;
        }
        let z = self.cols[c] as usize;
        let s_start = trimmed(&self.hist);
        let m_start = self.m;
        self.hist[d] += 1;
        let mut record = TrajectoryRecord {
            z,
            m: m_start,
            m0: self.m0(z),
            d,
            s_k: s_start,
            removed: 0,
            r1: 0,
            delta_k: Vec::new(),
            delta_prime: 0,
        };
        if d == 1 {
            self.heap.push(Reverse(c as u32));
            while let Some(Reverse(l)) = self.heap.pop() {
                let l = l as usize;
                if self.cnt[l] != 1 {
                    continue;
                }
                let row = self.col_rows[self.col_start[l]..self.col_start[l + 1]]
                    .iter()
                    .map(|&r| r as usize)
                    .find(|&r| self.active[r])
                    .expect("degree-1 column has an active row");
                self.active[row] = false;
                self.m -= 1;
                record.removed += 1;
                for idx in 0..self.row_cols[row].len() {
                    let j = self.row_cols[row][idx] as usize;
                    let before = self.cnt[j];
                    self.cnt[j] -= 1;
                    if j < c {
                        continue;
                    }
                    record.r1 += 1;
                    self.hist[before as usize] -= 1;
                    if before > 1 {
                        self.hist[before as usize - 1] += 1;
                    }
                    if before == 2 {
                        self.heap.push(Reverse(j as u32));
                    }
                    if j > c {
                        if self.lost[j] == 0 {
                            self.start_cnt[j] = before;
                            self.touched.push(j as u32);
                        }
                        self.lost[j] += 1;
                    }
                }
            }
            debug_assert_eq!(self.hist[1], 0);
            let mut delta_k = vec![0usize; record.s_k.len()];
            for &j in &self.touched {
                let j = j as usize;
                let k = self.start_cnt[j] as usize;
                delta_k[k] += 1;
                if k >= 3 && self.lost[j] >= 2 {
                    record.delta_prime += 1;
                }
                self.lost[j] = 0;
            }
            self.touched.clear();
            record.delta_k = trimmed(&delta_k);
            let before: usize = record.s_k.iter().enumerate().map(|(k, s)| k * s).sum();
            let after: usize = self.hist.iter().enumerate().map(|(k, s)| k * s).sum();
            assert_eq!(record.r1 + after, d + before, "ones bookkeeping at z = {z}");
        }
        self.records.push(record);
    }

    /// Consume the peeler into a trajectory.
    pub fn into_trajectory(self) -> Trajectory {
        Trajectory {
            n_rows: self.instance.rows.len(),
            z_end: self.next_z,
            final_m: self.m,
            final_s_k: trimmed(&self.hist),
            records: self.records,
        }
    }
}

fn trimmed(v: &[usize]) -> Vec<usize> {
    let len = v.iter().rposition(|&s| s != 0).map_or(0, |p| p + 1);
    v[..len].to_vec()
}

/// Event records of one run, in descending `z`, plus the final state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Trajectory {
    pub n_rows: usize,
    /// The final state is `M(z_end)`.
    pub z_end: usize,
    pub final_m: usize,
    pub final_s_k: Vec<usize>,
    pub records: Vec<TrajectoryRecord>,
}

impl Trajectory {
    /// `(m(z), s_k(z))` for `z >= z_end`.
    pub fn state_at(&self, z: usize) -> (usize, &[usize]) {
        let i = self.records.partition_point(|r| r.z > z);
        match self.records.get(i) {
            Some(r) => (r.m, &r.s_k),
            None => (self.final_m, &self.final_s_k),
        }
    }

    /// `d(z)`, zero when step `z` had no active row in its column.
    pub fn d_at(&self, z: usize) -> usize {
        let i = self.records.partition_point(|r| r.z > z);
        self.records.get(i).filter(|r| r.z == z).map_or(0, |r| r.d)
    }
}

/// Run the peeling from `max_z` down through step `max(z_stop, 1)`.
pub fn run_peeling(instance: &Instance, max_z: usize, z_stop: usize) -> Trajectory {
    let mut p = Peeler::new(instance, max_z);
    p.advance_through(z_stop);
    p.into_trajectory()
}

/// 2-core of the hypergraph on columns `> z` by repeated deletion.
/// Returns the surviving rows and the degree histogram of surviving columns.
pub fn two_core_oracle(instance: &Instance, z: usize) -> (Vec<bool>, Vec<usize>) {
    let n = instance.rows.len();
    let mut alive = vec![true; n];
    loop {
        let mut deg: HashMap<u32, (usize, usize)> = HashMap::new();
        for (i, row) in instance.rows.iter().enumerate() {
            if !alive[i] {
                continue;
            }
            for &j in row.odd_primes.iter().filter(|&&j| j as usize > z) {
                let e = deg.entry(j).or_insert((0, i));
                e.0 += 1;
                e.1 = i;
            }
        }
        let mut changed = false;
        for &(count, row) in deg.values() {
            if count == 1 && alive[row] {
                alive[row] = false;
                changed = true;
            }
        }
        if !changed {
            let mut hist = vec![0usize; n + 1];
            for &(count, _) in deg.values() {
                hist[count] += 1;
            }
            return (alive, trimmed(&hist));
        }
    }
}

/// Normalized error of one `s_k` against its band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SkDeviation {
    pub z: usize,
    pub k: usize,
    pub s_k: usize,
    pub ts_k: f64,
    pub eps: f64,
    /// `(s_k - ts_k) / (eps ts_k)`; inside the band iff at most 1 in absolute value.
    pub err: f64,
}

/// Band comparison of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationReport {
    /// Window steps checked against the `m` band.
    pub m_steps: usize,
    pub m_hits: usize,
    pub m_hit_rate: f64,
    /// `m(z0)`, and whether `m(z0)/z0` is within 25% of `alpha(eta)`.
    pub m_z0: usize,
    pub m_z0_ratio: f64,
    pub m_z0_within_25: bool,
    pub sk: Vec<SkDeviation>,
    pub sk_hit_rate: f64,
    pub sk_worst: f64,
}

/// Compare `m(z)` with `(1 +- eps0) eta Lambda(z)` over the window and `s_k`
/// with `(1 +- eps(k, z)) ts_k` on `grid` for `2 <= k <= k_max`.
/// Window steps below `traj.z_end` are skipped.
pub fn deviation_report(
    traj: &Trajectory,
    pred: &PredictorSet,
    grid: &[usize],
    k_max: usize,
) -> DeviationReport {
    let p = &pred.params;
    let eps0 = p.constants.eps0;
    let lo_z = p.z_minus.max(traj.z_end).max(1);
    let mut m_steps = 0;
    let mut m_hits = 0;
    let mut ri = traj.records.partition_point(|r| r.z > p.z_plus);
    for z in (lo_z..=p.z_plus).rev() {
        while ri < traj.records.len() && traj.records[ri].z > z {
            ri += 1;
        }
        let m = traj.records.get(ri).map_or(traj.final_m, |r| r.m);
        let w = m as f64 / z as f64;
        let lhs = w * (-predictors::ein(w).expect("w >= 0")).exp();
        let target = p.eta * pred.lambda(z);
        m_steps += 1;
        if lhs >= (1.0 - eps0) * target && lhs <= (1.0 + eps0) * target {
            m_hits += 1;
        }
    }
    let z0 = p.z0();
    let m_z0 = traj.state_at(z0).0;
    let a = predictors::alpha(p.eta).unwrap_or(f64::NAN);
    let m_z0_ratio = m_z0 as f64 / z0 as f64 / a;
    let mut sk = Vec::new();
    for &z in grid.iter().filter(|&&z| z >= lo_z && p.in_window(z)) {
        let (m, s) = traj.state_at(z);
        for k in 2..=k_max {
            let ts = predictors::ts_k(m as f64, z as f64, k);
            let eps = pred.eps_band(k, z).expect("z in window");
            let s_k = s.get(k).copied().unwrap_or(0);
            let err = if ts > 0.0 { (s_k as f64 - ts) / (eps * ts) } else { f64::NAN };
            sk.push(SkDeviation { z, k, s_k, ts_k: ts, eps, err });
        }
    }
    let finite: Vec<f64> = sk.iter().map(|d| d.err).filter(|e| e.is_finite()).collect();
    let sk_hit_rate = if finite.is_empty() {
        f64::NAN
    } else {
        finite.iter().filter(|e| e.abs() <= 1.0).count() as f64 / finite.len() as f64
    };
    let sk_worst = finite.iter().fold(0.0f64, |acc, e| acc.max(e.abs()));
    DeviationReport {
        m_steps,
        m_hits,
        m_hit_rate: if m_steps > 0 { m_hits as f64 / m_steps as f64 } else { f64::NAN },
        m_z0,
        m_z0_ratio,
        m_z0_within_25: (m_z0_ratio - 1.0).abs() <= 0.25,
        sk,
        sk_hit_rate,
        sk_worst,
    }
}

/// Pooled comparison of `d(z)` with Poisson masses of mean `m(z)/z`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoissonPool {
    pub k_max: usize,
    pub samples: u64,
    pub counts: Vec<u64>,
    pub expected: Vec<f64>,
    pub d_sum: u64,
    pub mu_sum: f64,
}

/// One row of the Poisson comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoissonLine {
    pub k: usize,
    pub freq: f64,
    pub mass: f64,
    pub se: f64,
    /// `(freq - mass) / se`.
    pub score: f64,
}

impl PoissonPool {
    pub fn new(k_max: usize) -> Self {
        PoissonPool {
            k_max,
            samples: 0,
            counts: vec![0; k_max + 1],
            expected: vec![0.0; k_max + 1],
            d_sum: 0,
            mu_sum: 0.0,
        }
    }

    /// Add every step `z` in `[lo, hi]` (clipped to `z >= max(z_end, 1)`) of one trajectory.
    pub fn add(&mut self, traj: &Trajectory, lo: usize, hi: usize) {
        let lo = lo.max(traj.z_end).max(1);
        let mut ri = traj.records.partition_point(|r| r.z > hi);
        for z in (lo..=hi).rev() {
            while ri < traj.records.len() && traj.records[ri].z > z {
                ri += 1;
            }
            let (m, d) = match traj.records.get(ri) {
                Some(r) if r.z == z => (r.m, r.d),
                Some(r) => (r.m, 0),
                None => (traj.final_m, 0),
            };
            let mu = m as f64 / z as f64;
            self.samples += 1;
            self.d_sum += d as u64;
            self.mu_sum += mu;
            if d <= self.k_max {
                self.counts[d] += 1;
            }
            let e = (-mu).exp();
            let mut mass = e;
            for k in 0..=self.k_max {
                if k > 0 {
                    mass *= mu / k as f64;
                }
                self.expected[k] += mass;
            }
        }
    }

    pub fn merge(&mut self, other: &PoissonPool) {
        assert_eq!(self.k_max, other.k_max);
        self.samples += other.samples;
        self.d_sum += other.d_sum;
        self.mu_sum += other.mu_sum;
        for k in 0..=self.k_max {
            self.counts[k] += other.counts[k];
            self.expected[k] += other.expected[k];
        }
    }

    pub fn lines(&self) -> Vec<PoissonLine> {
        let n = self.samples as f64;
        (0..=self.k_max)
            .map(|k| {
                let freq = self.counts[k] as f64 / n;
                let mass = self.expected[k] / n;
                let se = (mass * (1.0 - mass) / n).sqrt();
                PoissonLine { k, freq, mass, se, score: (freq - mass) / se }
            })
            .collect()
    }
}

/// Poisson comparison for a set of trajectories over the window `[lo, hi]`.
pub fn degree_poisson_check(trajs: &[Trajectory], lo: usize, hi: usize, k_max: usize) -> PoissonPool {
    let mut pool = PoissonPool::new(k_max);
    for t in trajs {
        pool.add(t, lo, hi);
    }
    pool
}
