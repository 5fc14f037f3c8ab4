//! Ensemble statistics over trajectories.
//!
//! The quantum-trajectory-averaged variance (QTAV) of an observable `O` is
//! the population variance across trajectories of the single-trajectory
//! expectation `⟨O⟩(t)`. Linear averages agree for every unraveling of the
//! same master equation; the QTAV does not.
//!
//! Ensembles are generated in fixed-size chunks of consecutive trajectory
//! indices. Each chunk is reduced in index order and chunk results are
//! merged in a fixed pairwise tree, so the floating-point result does not
//! depend on how many threads did the work.

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::params::TimeGrid;
use crate::record::TrajectoryRecord;
use crate::rng::{trajectory_rng, TrajRng};
use crate::state::{BlochVector, Observable};

/// Streaming central moments up to fourth order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StreamMoments {
    pub n: f64,
    pub mean: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
}

impl StreamMoments {
    pub fn push(&mut self, x: f64) {
        let n1 = self.n;
        self.n += 1.0;
        let n = self.n;
        let delta = x - self.mean;
        let dn = delta / n;
        let dn2 = dn * dn;
        let term1 = delta * dn * n1;
        self.mean += dn;
        self.m4 += term1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * self.m2 - 4.0 * dn * self.m3;
        self.m3 += term1 * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += term1;
    }

    pub fn merge(&self, o: &StreamMoments) -> StreamMoments {
        if self.n == 0.0 {
            return *o;
        }
        if o.n == 0.0 {
            return *self;
        }
        let (na, nb) = (self.n, o.n);
        let n = na + nb;
        let d = o.mean - self.mean;
        let d2 = d * d;
        let d3 = d2 * d;
        let d4 = d2 * d2;
        let mean = self.mean + d * nb / n;
        let m2 = self.m2 + o.m2 + d2 * na * nb / n;
        let m3 = self.m3 + o.m3 + d3 * na * nb * (na - nb) / (n * n) + 3.0 * d * (na * o.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + o.m4
            + d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * o.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * d * (na * o.m3 - nb * self.m3) / n;
        StreamMoments { n, mean, m2, m3, m4 }
    }

    /// Population variance (1/N).
    pub fn variance(&self) -> f64 {
        if self.n > 0.0 {
            self.m2 / self.n
        } else {
            0.0
        }
    }

    pub fn stderr_mean(&self) -> f64 {
        if self.n > 0.0 {
            (self.variance() / self.n).sqrt()
        } else {
            0.0
        }
    }

    /// Standard error of the variance estimate, `√((μ4 − σ⁴)/N)`.
    pub fn stderr_variance(&self) -> f64 {
        if self.n > 0.0 {
            let v = self.variance();
            ((self.m4 / self.n - v * v).max(0.0) / self.n).sqrt()
        } else {
            0.0
        }
    }
}

/// Mean and QTAV of one observable on a time grid, with standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleCurve {
    pub t: Vec<f64>,
    pub mean: Vec<f64>,
    pub qtav: Vec<f64>,
    pub stderr_mean: Vec<f64>,
    pub stderr_qtav: Vec<f64>,
    pub n_traj: usize,
    /// `mean(⟨O⟩^m)` for `m = 1, 2, …` when requested.
    pub m_moments: Option<Vec<Vec<f64>>>,
}

impl EnsembleCurve {
    pub fn from_moments(grid: &TimeGrid, stats: &[StreamMoments]) -> Self {
        let n_traj = stats.first().map_or(0, |s| s.n as usize);
        EnsembleCurve {
            t: grid.times(),
            mean: stats.iter().map(|s| s.mean).collect(),
            qtav: stats.iter().map(|s| s.variance()).collect(),
            stderr_mean: stats.iter().map(|s| s.stderr_mean()).collect(),
            stderr_qtav: stats.iter().map(|s| s.stderr_variance()).collect(),
            n_traj,
            m_moments: None,
        }
    }

    /// `mean(⟨O⟩²) = QTAV + mean²`.
    pub fn second_power(&self) -> Vec<f64> {
        self.qtav.iter().zip(&self.mean).map(|(v, m)| v + m * m).collect()
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// CSV with columns `t, mean, qtav, stderr_mean, stderr_qtav`.
    pub fn to_csv(&self, header: &str) -> String {
        let mut s = String::new();
        for line in header.lines() {
            s.push_str("# ");
            s.push_str(line);
            s.push('\n');
        }
        s.push_str("t,mean,qtav,stderr_mean,stderr_qtav\n");
        for k in 0..self.t.len() {
            s.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                self.t[k], self.mean[k], self.qtav[k], self.stderr_mean[k], self.stderr_qtav[k]
            ));
        }
        s
    }
}

fn check_records(records: &[TrajectoryRecord]) -> Result<TimeGrid> {
    if records.len() < 2 {
        return Err(Error::TooFewTrajectories { needed: 2, got: records.len() });
    }
    let grid = records[0].grid;
    if records.iter().any(|r| r.grid != grid || r.bloch.len() != grid.len) {
        return Err(Error::GridMismatch);
    }
    Ok(grid)
}

fn reduce_series(records: &[TrajectoryRecord], f: impl Fn(&BlochVector) -> f64) -> Result<(TimeGrid, Vec<StreamMoments>)> {
    let grid = check_records(records)?;
    let mut stats = vec![StreamMoments::default(); grid.len];
    for r in records {
        for (s, b) in stats.iter_mut().zip(&r.bloch) {
            s.push(f(b));
        }
    }
    Ok((grid, stats))
}

/// Mean, QTAV and standard errors of `⟨O⟩` over a set of records.
pub fn qtav(records: &[TrajectoryRecord], obs: Observable) -> Result<EnsembleCurve> {
    let (grid, stats) = reduce_series(records, |b| obs.from_bloch(b))?;
    Ok(EnsembleCurve::from_moments(&grid, &stats))
}

/// Ensemble statistics of `⟨O⟩^m`; the `mean` column is the m-th power
/// average.
pub fn power_average(records: &[TrajectoryRecord], obs: Observable, m: u32) -> Result<EnsembleCurve> {
    if m == 0 {
        return Err(Error::param("m", "must be positive"));
    }
    let (grid, stats) = reduce_series(records, |b| obs.from_bloch(b).powi(m as i32))?;
    Ok(EnsembleCurve::from_moments(&grid, &stats))
}

/// Angular frequency of the strongest Fourier component of `values` over
/// `window`, after subtracting the window mean. The series is zero-padded
/// sixteenfold and the peak refined by parabolic interpolation.
pub fn dominant_frequency(t: &[f64], values: &[f64], window: (f64, f64)) -> Result<f64> {
    if t.len() != values.len() || t.len() < 2 {
        return Err(Error::GridMismatch);
    }
    let idx: Vec<usize> = (0..t.len()).filter(|&k| t[k] >= window.0 - 1e-12 && t[k] <= window.1 + 1e-12).collect();
    if idx.len() < 8 {
        return Err(Error::WindowTooShort { periods: 0.0 });
    }
    let h = t[idx[1]] - t[idx[0]];
    let span = h * idx.len() as f64;
    let mean = idx.iter().map(|&k| values[k]).sum::<f64>() / idx.len() as f64;
    let n_pad = (idx.len() * 16).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); n_pad];
    for (j, &k) in idx.iter().enumerate() {
        buf[j] = Complex::new(values[k] - mean, 0.0);
    }
    FftPlanner::new().plan_fft_forward(n_pad).process(&mut buf);
    let mag: Vec<f64> = buf[..n_pad / 2].iter().map(|c| c.norm()).collect();
    let mut best = 1;
    for k in 2..mag.len() - 1 {
        if mag[k] > mag[best] {
            best = k;
        }
    }
    let (a, b, c) = (mag[best - 1], mag[best], mag[best + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    let omega = 2.0 * std::f64::consts::PI * (best as f64 + shift) / (n_pad as f64 * h);
    let periods = omega * span / (2.0 * std::f64::consts::PI);
    if periods < 4.0 {
        return Err(Error::WindowTooShort { periods });
    }
    Ok(omega)
}

/// Width of one native Fourier bin for a window, `2π/T`.
pub fn fft_bin(window: (f64, f64)) -> f64 {
    2.0 * std::f64::consts::PI / (window.1 - window.0)
}

/// Per-component statistics of a whole ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary<P> {
    pub grid: TimeGrid,
    pub n_traj: usize,
    /// Moments of `x`, `y`, `z` per sample time.
    pub stats: [Vec<StreamMoments>; 3],
    /// Statistics of the conditional purity per sample time.
    pub purity: Vec<StreamMoments>,
    /// Full records of the first `retain` trajectories.
    pub retained: Vec<TrajectoryRecord>,
    /// One probe value per trajectory, in index order.
    pub probes: Vec<P>,
}

impl<P> EnsembleSummary<P> {
    pub fn curve(&self, obs: Observable) -> EnsembleCurve {
        match obs {
            Observable::SigmaX => EnsembleCurve::from_moments(&self.grid, &self.stats[0]),
            Observable::SigmaY => EnsembleCurve::from_moments(&self.grid, &self.stats[1]),
            Observable::SigmaZ => EnsembleCurve::from_moments(&self.grid, &self.stats[2]),
            Observable::Excited | Observable::Lowering => {
                // affine images of z and x
                let (src, scale, shift) = match obs {
                    Observable::Excited => (&self.stats[2], 0.5, 0.5),
                    _ => (&self.stats[0], 0.5, 0.0),
                };
                let mut c = EnsembleCurve::from_moments(&self.grid, src);
                for k in 0..c.len() {
                    c.mean[k] = scale * c.mean[k] + shift;
                    c.qtav[k] *= scale * scale;
                    c.stderr_mean[k] *= scale;
                    c.stderr_qtav[k] *= scale * scale;
                }
                c
            }
        }
    }
}

struct Chunk<P> {
    stats: [Vec<StreamMoments>; 3],
    purity: Vec<StreamMoments>,
    retained: Vec<TrajectoryRecord>,
    probes: Vec<P>,
}

impl<P> Chunk<P> {
    fn merge(mut self, other: Chunk<P>) -> Chunk<P> {
        for c in 0..3 {
            for (a, b) in self.stats[c].iter_mut().zip(&other.stats[c]) {
                *a = a.merge(b);
            }
        }
        for (a, b) in self.purity.iter_mut().zip(&other.purity) {
            *a = a.merge(b);
        }
        self.retained.extend(other.retained);
        self.probes.extend(other.probes);
        self
    }
}

/// Trajectories per work unit.
pub const CHUNK: usize = 64;

/// Runs `n_traj` trajectories, trajectory `k` drawing from
/// `trajectory_rng(seed, k)`. `probe` extracts a per-trajectory value kept in
/// index order. The result is bit-identical for any thread count.
pub fn run_ensemble<P, S, F>(
    n_traj: usize,
    seed: u64,
    grid: TimeGrid,
    retain: usize,
    simulate: S,
    probe: F,
) -> Result<EnsembleSummary<P>>
where
    P: Send,
    S: Fn(&mut TrajRng) -> Result<TrajectoryRecord> + Sync,
    F: Fn(&TrajectoryRecord) -> P + Sync,
{
    let merged = reduce_trajectories(
        n_traj,
        seed,
        || Chunk {
            stats: std::array::from_fn(|_| vec![StreamMoments::default(); grid.len]),
            purity: vec![StreamMoments::default(); grid.len],
            retained: Vec::new(),
            probes: Vec::new(),
        },
        |rng| {
            let rec = simulate(rng)?;
            if rec.grid != grid || rec.bloch.len() != grid.len {
                return Err(Error::GridMismatch);
            }
            Ok(rec)
        },
        |ch, k, rec| {
            for (j, b) in rec.bloch.iter().enumerate() {
                ch.stats[0][j].push(b.x);
                ch.stats[1][j].push(b.y);
                ch.stats[2][j].push(b.z);
                ch.purity[j].push(rec.purity[j]);
            }
            ch.probes.push(probe(&rec));
            if k < retain {
                ch.retained.push(rec);
            }
        },
        Chunk::merge,
    )?;
    Ok(EnsembleSummary {
        grid,
        n_traj,
        stats: merged.stats,
        purity: merged.purity,
        retained: merged.retained,
        probes: merged.probes,
    })
}

/// Streaming statistics of `N` derived series `f(⟨σ⟩)` per sample time.
pub fn run_series_ensemble<const N: usize, S, F>(
    n_traj: usize,
    seed: u64,
    grid: TimeGrid,
    simulate: S,
    f: F,
) -> Result<[Vec<StreamMoments>; N]>
where
    S: Fn(&mut TrajRng) -> Result<TrajectoryRecord> + Sync,
    F: Fn(&BlochVector) -> [f64; N] + Sync,
{
    reduce_trajectories(
        n_traj,
        seed,
        || std::array::from_fn(|_| vec![StreamMoments::default(); grid.len]),
        |rng| {
            let rec = simulate(rng)?;
            if rec.grid != grid || rec.bloch.len() != grid.len {
                return Err(Error::GridMismatch);
            }
            Ok(rec)
        },
        |acc: &mut [Vec<StreamMoments>; N], _, rec| {
            for (j, b) in rec.bloch.iter().enumerate() {
                for (c, v) in f(b).into_iter().enumerate() {
                    acc[c][j].push(v);
                }
            }
        },
        |mut a, b| {
            for c in 0..N {
                for (x, y) in a[c].iter_mut().zip(&b[c]) {
                    *x = x.merge(y);
                }
            }
            a
        },
    )
}

/// Chunked parallel map over trajectory indices followed by an
/// index-ordered tree merge.
fn reduce_trajectories<A, I, S, U, M>(n_traj: usize, seed: u64, init: I, simulate: S, update: U, merge: M) -> Result<A>
where
    A: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut TrajRng) -> Result<TrajectoryRecord> + Sync,
    U: Fn(&mut A, usize, TrajectoryRecord) + Sync,
    M: Fn(A, A) -> A,
{
    if n_traj == 0 {
        return Err(Error::TooFewTrajectories { needed: 1, got: 0 });
    }
    let n_chunks = n_traj.div_ceil(CHUNK);
    let chunks: Vec<A> = (0..n_chunks)
        .into_par_iter()
        .map(|c| -> Result<A> {
            let mut acc = init();
            for k in c * CHUNK..((c + 1) * CHUNK).min(n_traj) {
                let mut rng = trajectory_rng(seed, k as u64);
                update(&mut acc, k, simulate(&mut rng)?);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(tree_merge(chunks, merge))
}

/// Pairwise merge in index order: `((0,1),(2,3)),…`.
fn tree_merge<A>(mut level: Vec<A>, merge: impl Fn(A, A) -> A) -> A {
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        let mut it = level.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(merge(a, b)),
                None => next.push(a),
            }
        }
        level = next;
    }
    level.pop().expect("at least one chunk")
}
