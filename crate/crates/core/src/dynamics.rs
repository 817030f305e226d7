//! Classical billiard flow and the power spectrum of an indicator signal.

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{geometry, invalid, numerical, Result};
use crate::geometry::{BilliardDomain, Indicator, Vec2};

/// Hits closer than this along the ray are the bounce just taken.
pub const MIN_FLIGHT: f64 = 1e-12;
/// Correlation time of the Sinai flow used for error bookkeeping.
pub const T_CORR: f64 = 2.0;
const MAX_REJECTIONS: usize = 100_000;

/// Position and unit-speed heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub position: Vec2,
    /// Heading angle in `[0, 2pi)`.
    pub theta: f64,
}

impl PhasePoint {
    pub fn new(position: Vec2, theta: f64) -> Self {
        PhasePoint { position, theta: theta.rem_euclid(TAU) }
    }

    pub fn direction(&self) -> Vec2 {
        Vec2::new(self.theta.cos(), self.theta.sin())
    }

    /// Uniform on `domain x S^1`, by rejection on the bounding box.
    pub fn random(domain: &BilliardDomain, rng: &mut impl Rng) -> Result<Self> {
        let (lo, hi) = domain.bounding_box();
        for _ in 0..MAX_REJECTIONS {
            let p = Vec2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
            if domain.contains(p) {
                return Ok(PhasePoint::new(p, rng.random_range(0.0..TAU)));
            }
        }
        Err(geometry("rejection sampling found no interior point"))
    }
}

/// One specular bounce.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Collision {
    pub point: Vec2,
    /// Unit velocity after reflection.
    pub direction: Vec2,
    pub time: f64,
    pub segment: usize,
}

fn bounce(domain: &BilliardDomain, position: Vec2, velocity: Vec2) -> Result<Collision> {
    let (s, segment, t) = domain.chain().first_hit(position, velocity, MIN_FLIGHT).ok_or_else(|| {
        geometry(format!(
            "trajectory leaked: no wall ahead of ({}, {}) heading ({}, {})",
            position.x, position.y, velocity.x, velocity.y
        ))
    })?;
    let n = domain.segments()[segment].normal(t);
    let reflected = velocity - 2.0 * velocity.dot(&n) * n;
    Ok(Collision { point: position + s * velocity, direction: reflected / reflected.norm(), time: s, segment })
}

/// Earliest wall hit ahead of `state`, with the reflected heading.
pub fn next_collision(domain: &BilliardDomain, state: &PhasePoint) -> Result<Collision> {
    bounce(domain, state.position, state.direction())
}

/// Observable sampled along one trajectory on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSeries {
    pub dt: f64,
    pub samples: Vec<f64>,
    pub seed: u64,
    pub collisions: usize,
}

impl SignalSeries {
    pub fn duration(&self) -> f64 {
        self.dt * self.samples.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }
}

fn sample_count(t_total: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_total > dt) || !t_total.is_finite() {
        return Err(invalid(format!("need T > dt > 0, got T = {t_total}, dt = {dt}")));
    }
    Ok((t_total / dt).round() as usize)
}

/// `A(r(t_j))` at `t_j = j dt` along a trajectory launched uniformly at random.
pub fn simulate_signal(
    domain: &BilliardDomain,
    region: &dyn Indicator,
    seed: u64,
    t_total: f64,
    dt: f64,
) -> Result<SignalSeries> {
    let count = sample_count(t_total, dt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = PhasePoint::random(domain, &mut rng)?;
    let mut pos = start.position;
    let mut vel = start.direction();
    let mut leg_start = 0.0;
    let mut hit = bounce(domain, pos, vel)?;
    let mut collisions = 1;
    let mut samples = Vec::with_capacity(count);
    for j in 0..count {
        let t = j as f64 * dt;
        while t > leg_start + hit.time {
            leg_start += hit.time;
            pos = hit.point;
            vel = hit.direction;
            hit = bounce(domain, pos, vel)?;
            collisions += 1;
        }
        let p = pos + (t - leg_start) * vel;
        samples.push(if region.indicator(p) { 1.0 } else { 0.0 });
    }
    Ok(SignalSeries { dt, samples, seed, collisions })
}

/// Running sum of periodograms `|A~(omega)|^2 / T` of mean-subtracted signals
/// on the grid `omega_j = 2 pi j / T`, `0 <= j <= n/2`.
#[derive(Clone)]
pub struct PeriodogramSum {
    pub dt: f64,
    pub len: usize,
    pub sum: Vec<f64>,
    pub count: usize,
    /// Sum over realizations of the sample variance.
    pub variance_sum: f64,
    /// Sum over realizations of the sample mean.
    pub mean_sum: f64,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for PeriodogramSum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PeriodogramSum").field("dt", &self.dt).field("len", &self.len).field("count", &self.count).finish()
    }
}

impl PeriodogramSum {
    pub fn new(len: usize, dt: f64) -> Result<Self> {
        if len < 2 || !(dt > 0.0) {
            return Err(invalid(format!("periodogram needs at least 2 samples and dt > 0 (got {len}, {dt})")));
        }
        let fft = FftPlanner::new().plan_fft_forward(len);
        Ok(PeriodogramSum { dt, len, sum: vec![0.0; len / 2 + 1], count: 0, variance_sum: 0.0, mean_sum: 0.0, fft })
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.len as f64
    }

    /// Periodogram of one series, without adding it.
    pub fn periodogram(&self, series: &SignalSeries) -> Result<(Vec<f64>, f64, f64)> {
        if series.samples.len() != self.len || series.dt != self.dt {
            return Err(invalid("series do not share T and dt"));
        }
        let mean = series.mean();
        let mut buf: Vec<Complex<f64>> = series.samples.iter().map(|&a| Complex::new(a - mean, 0.0)).collect();
        self.fft.process(&mut buf);
        let t = self.duration();
        let scale = self.dt * self.dt / t;
        let p: Vec<f64> = buf[..self.len / 2 + 1].iter().map(|c| c.norm_sqr() * scale).collect();
        let var = series.samples.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / self.len as f64;
        Ok((p, mean, var))
    }

    pub fn add_periodogram(&mut self, p: &[f64], mean: f64, var: f64) {
        for (s, v) in self.sum.iter_mut().zip(p) {
            *s += v;
        }
        self.count += 1;
        self.mean_sum += mean;
        self.variance_sum += var;
    }

    pub fn add(&mut self, series: &SignalSeries) -> Result<()> {
        let (p, mean, var) = self.periodogram(series)?;
        self.add_periodogram(&p, mean, var);
        Ok(())
    }

    pub fn merge(&mut self, other: &PeriodogramSum) -> Result<()> {
        if other.len != self.len || other.dt != self.dt {
            return Err(invalid("cannot merge periodograms of different grids"));
        }
        for (s, v) in self.sum.iter_mut().zip(&other.sum) {
            *s += v;
        }
        self.count += other.count;
        self.mean_sum += other.mean_sum;
        self.variance_sum += other.variance_sum;
        Ok(())
    }

    /// Averaged, Gaussian-smoothed spectrum for `|omega| <= omega_limit`
    /// (`None` means the Nyquist frequency).
    pub fn finish(&self, omega_sm: f64, omega_limit: Option<f64>) -> Result<PowerSpectrum> {
        if self.count < 2 {
            return Err(invalid(format!("need at least 2 realizations, have {}", self.count)));
        }
        if !(omega_sm > 0.0) {
            return Err(invalid(format!("smoothing width must be positive, got {omega_sm}")));
        }
        let t = self.duration();
        let d_omega = TAU / t;
        let n = self.sum.len();
        let mean: Vec<f64> = self.sum.iter().map(|s| s / self.count as f64).collect();
        // P(-omega) = P(omega) for a real signal; index by |j|
        let at = |j: i64| -> f64 {
            let a = j.unsigned_abs() as usize;
            if a == 0 || a >= n {
                0.0
            } else {
                mean[a]
            }
        };
        let jmax = match omega_limit {
            Some(w) => ((w / d_omega).floor() as usize).min(n - 1),
            None => n - 1,
        };
        let reach = (6.0 * omega_sm / d_omega).ceil() as i64;
        let kernel: Vec<f64> = (-reach..=reach).map(|d| (-(d as f64 * d_omega / omega_sm).powi(2)).exp()).collect();
        let half: Vec<f64> = (0..=jmax as i64)
            .into_par_iter()
            .map(|j| {
                let (mut num, mut den) = (0.0, 0.0);
                for (o, w) in (-reach..=reach).zip(&kernel) {
                    let i = j + o;
                    // the omega = 0 bin carries no fluctuation power after mean removal
                    if i == 0 || i.unsigned_abs() as usize >= n {
                        continue;
                    }
                    num += w * at(i);
                    den += w;
                }
                num / den
            })
            .collect();
        let mut omega = Vec::with_capacity(2 * jmax + 1);
        let mut values = Vec::with_capacity(2 * jmax + 1);
        for j in (1..=jmax).rev() {
            omega.push(-(j as f64) * d_omega);
            values.push(half[j]);
        }
        for (j, v) in half.iter().enumerate() {
            omega.push(j as f64 * d_omega);
            values.push(*v);
        }
        let c0 = self.variance_sum / self.count as f64;
        let rel_error = relative_error(self.count, omega_sm, t);
        Ok(PowerSpectrum {
            t_corr: half[0] / (2.0 * c0),
            omega,
            values,
            omega_sm,
            n_r: self.count,
            t_total: t,
            dt: self.dt,
            rel_error,
            mean: self.mean_sum / self.count as f64,
            variance: c0,
            parseval: mean.iter().enumerate().map(|(j, p)| if j == 0 || 2 * j == self.len { *p } else { 2.0 * p }).sum::<f64>() * d_omega / TAU,
        })
    }
}

/// `(2 pi / (n_r omega_sm T))^{1/2}`
pub fn relative_error(n_r: usize, omega_sm: f64, t_total: f64) -> f64 {
    (TAU / (n_r as f64 * omega_sm * t_total)).sqrt()
}

/// Smoothed power spectral density `C~_A(omega)` on a symmetric grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpectrum {
    pub omega: Vec<f64>,
    pub values: Vec<f64>,
    pub omega_sm: f64,
    pub n_r: usize,
    pub t_total: f64,
    pub dt: f64,
    pub rel_error: f64,
    /// `C~(0) / 2 C(0)`, the decay time of an exponential autocorrelation with the same area.
    pub t_corr: f64,
    /// Realization-averaged time average of the signal.
    pub mean: f64,
    /// Realization-averaged sample variance, `C(0)`.
    pub variance: f64,
    /// `int C~ d omega / 2 pi` over the unsmoothed averaged periodogram.
    pub parseval: f64,
}

impl PowerSpectrum {
    pub fn d_omega(&self) -> f64 {
        TAU / self.t_total
    }

    pub fn omega_limit(&self) -> f64 {
        *self.omega.last().unwrap_or(&0.0)
    }

    /// `int C~ d omega / 2 pi` over the stored smoothed grid.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.d_omega() / TAU
    }
}

/// Smoothed spectrum at `omega` by linear interpolation, with its error `rel_error * value`.
pub fn spectrum_value(spec: &PowerSpectrum, omega: f64) -> Result<(f64, f64)> {
    let lim = spec.omega_limit();
    if !(omega.abs() <= lim) {
        return Err(invalid(format!("omega = {omega} outside the spectrum grid [-{lim}, {lim}]")));
    }
    let d = spec.d_omega();
    let x = (omega + lim) / d;
    let i = (x.floor() as usize).min(spec.values.len() - 2);
    let f = x - i as f64;
    let v = spec.values[i] * (1.0 - f) + spec.values[i + 1] * f;
    Ok((v, spec.rel_error * v.abs()))
}

/// Batched, deterministic periodogram accumulation over seeds
/// `seed_base .. seed_base + n_r`. Realizations are summed in seed order, so
/// results do not depend on the thread count. Returns one sum per batch.
pub fn accumulate_periodograms(
    domain: &BilliardDomain,
    region: &dyn Indicator,
    seed_base: u64,
    n_r: usize,
    batches: usize,
    t_total: f64,
    dt: f64,
) -> Result<Vec<PeriodogramSum>> {
    if batches == 0 || n_r < batches {
        return Err(invalid(format!("cannot split {n_r} realizations into {batches} batches")));
    }
    let len = sample_count(t_total, dt)?;
    let proto = PeriodogramSum::new(len, dt)?;
    let mut out: Vec<PeriodogramSum> = (0..batches).map(|_| proto.clone()).collect();
    let chunk = (2 * rayon::current_num_threads()).max(2);
    let mut i = 0;
    while i < n_r {
        let end = (i + chunk).min(n_r);
        let grams: Vec<(Vec<f64>, f64, f64)> = (i..end)
            .into_par_iter()
            .map(|r| {
                let s = simulate_signal(domain, region, seed_base + r as u64, t_total, dt)?;
                proto.periodogram(&s)
            })
            .collect::<Result<_>>()?;
        for (r, (p, m, v)) in (i..end).zip(grams) {
            out[r * batches / n_r].add_periodogram(&p, m, v);
        }
        i = end;
    }
    Ok(out)
}

/// Realization-averaged spectrum from in-memory series.
pub fn estimate_power_spectrum(signals: &[SignalSeries], omega_sm: f64) -> Result<PowerSpectrum> {
    let first = signals.first().ok_or_else(|| invalid("no signals"))?;
    let mut acc = PeriodogramSum::new(first.samples.len(), first.dt)?;
    for s in signals {
        acc.add(s)?;
    }
    acc.finish(omega_sm, None)
}

/// Merge batch sums into one.
pub fn merge_batches(batches: &[PeriodogramSum]) -> Result<PeriodogramSum> {
    let mut it = batches.iter();
    let mut total = it.next().ok_or_else(|| numerical("no batches to merge"))?.clone();
    for b in it {
        total.merge(b)?;
    }
    Ok(total)
}
