//! Acquisition engine: sweeps the ring tuning phase over one FSR and records
//! the detected power at every AWG output.
//!
//! Each detector reading is the trapezoidal integral over the grid of
//! `psd(f) · ring(f, θ) · awg(f)` plus the analytic contribution of discrete
//! lines. Work is split across θ steps; every θ step is computed with a fixed
//! summation order, so traces are bit-identical for any worker count.

use std::f64::consts::TAU;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::awg::{canonical_boundaries, AwgBank};
use crate::error::{Error, Result};
use crate::ring::RingModel;
use crate::spectrum::{check_header, parse_field, Spectrum};

/// Default number of θ steps per FSR (0.5° each).
pub const DEFAULT_THETA_STEPS: usize = 720;

/// Largest handover tolerance a switch plan accepts, degrees.
pub const MAX_SCHEDULE_TOLERANCE_DEG: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    /// All AWGs read out at every θ step.
    Parallel,
    /// One multi-input AWG behind a 1×M switch; only the selected port is read.
    TimeMultiplexed,
}

/// One switch position held while θ sweeps `[theta_start, theta_end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchRecord {
    /// Input port (0-based), equivalent to the logical AWG index.
    pub port: usize,
    pub segment: usize,
    pub theta_start: f64,
    pub theta_end: f64,
}

impl SwitchRecord {
    pub fn covers(&self, theta: f64) -> bool {
        theta >= self.theta_start && theta < self.theta_end
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSchedule {
    theta_steps: Vec<f64>,
    mode: ScanMode,
    n_ports: usize,
    switch_plan: Vec<SwitchRecord>,
    handover_tolerance_rad: f64,
}

/// `steps` uniform tuning phases `k·2π/steps` over one FSR.
pub fn uniform_thetas(steps: usize) -> Vec<f64> {
    (0..steps).map(|k| TAU * k as f64 / steps as f64).collect()
}

impl ScanSchedule {
    pub fn parallel(n_awgs: usize, steps: usize) -> Result<Self> {
        Self::parallel_with_thetas(n_awgs, uniform_thetas(steps))
    }

    pub fn parallel_with_thetas(n_awgs: usize, theta_steps: Vec<f64>) -> Result<Self> {
        let s = Self {
            theta_steps,
            mode: ScanMode::Parallel,
            n_ports: n_awgs,
            switch_plan: Vec::new(),
            handover_tolerance_rad: 0.0,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if self.n_ports < 2 {
            return Err(Error::InvalidSchedule(format!("need at least two ports/AWGs, got {}", self.n_ports)));
        }
        if self.theta_steps.is_empty() {
            return Err(Error::InvalidSchedule("no θ steps".into()));
        }
        for w in self.theta_steps.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidSchedule("θ steps must be strictly increasing".into()));
            }
        }
        if self.theta_steps[0] < 0.0 || *self.theta_steps.last().expect("non-empty") >= TAU {
            return Err(Error::InvalidSchedule("θ steps must lie in [0, 2π)".into()));
        }
        Ok(())
    }

    pub fn thetas(&self) -> &[f64] {
        &self.theta_steps
    }

    pub fn mode(&self) -> ScanMode {
        self.mode
    }

    pub fn n_ports(&self) -> usize {
        self.n_ports
    }

    pub fn switch_plan(&self) -> &[SwitchRecord] {
        &self.switch_plan
    }

    pub fn handover_tolerance_rad(&self) -> f64 {
        self.handover_tolerance_rad
    }

    /// Ports read out at step `theta`.
    pub fn ports_at(&self, theta: f64) -> Vec<usize> {
        match self.mode {
            ScanMode::Parallel => (0..self.n_ports).collect(),
            ScanMode::TimeMultiplexed => {
                let mut ports: Vec<usize> =
                    self.switch_plan.iter().filter(|r| r.covers(theta)).map(|r| r.port).collect();
                ports.sort_unstable();
                ports.dedup();
                ports
            }
        }
    }
}

/// Switch plan for one M-input AWG: segment `j` spans `[j, j+1)·2π/M` and
/// needs ports `j` and `j+1` (the last wraps to port 0, which then reads
/// channel `m+1`). Interior boundaries are widened by the tolerance so the
/// handover can later move anywhere inside it.
pub fn make_time_multiplexed_schedule(n_ports: usize, steps: usize, tolerance_deg: f64) -> Result<ScanSchedule> {
    if n_ports < 2 {
        return Err(Error::InvalidSchedule(format!("need at least two input ports, got {n_ports}")));
    }
    let segment_deg = 360.0 / n_ports as f64;
    if !(tolerance_deg >= 0.0) || tolerance_deg > MAX_SCHEDULE_TOLERANCE_DEG || tolerance_deg >= segment_deg / 2.0 {
        return Err(Error::InvalidSchedule(format!(
            "handover tolerance {tolerance_deg}° must be within [0, {MAX_SCHEDULE_TOLERANCE_DEG}]° and below half a segment ({}°)",
            segment_deg / 2.0
        )));
    }
    let tol = tolerance_deg.to_radians();
    let bounds = canonical_boundaries(n_ports);
    let mut plan = Vec::with_capacity(2 * n_ports);
    for seg in 0..n_ports {
        let start = if seg == 0 { 0.0 } else { bounds[seg - 1] - tol };
        let end = if seg + 1 == n_ports { TAU } else { bounds[seg] + tol };
        let (pa, pb) = (seg, (seg + 1) % n_ports);
        for port in [pa, pb] {
            plan.push(SwitchRecord { port, segment: seg, theta_start: start, theta_end: end });
        }
    }
    let s = ScanSchedule {
        theta_steps: uniform_thetas(steps),
        mode: ScanMode::TimeMultiplexed,
        n_ports,
        switch_plan: plan,
        handover_tolerance_rad: tol,
    };
    s.validate()?;
    Ok(s)
}

/// Detected powers indexed `[θ step][awg][channel]`; entries never acquired are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorTrace {
    schedule: ScanSchedule,
    n_awgs: usize,
    n_channels: usize,
    powers: Vec<f64>,
    /// Configuration echo for reproducibility.
    pub metadata: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct TraceSidecar {
    schedule: ScanSchedule,
    n_awgs: usize,
    n_channels: usize,
    metadata: serde_json::Value,
}

impl DetectorTrace {
    fn empty(schedule: ScanSchedule, n_awgs: usize, n_channels: usize) -> Self {
        let len = schedule.thetas().len() * n_awgs * n_channels;
        Self { schedule, n_awgs, n_channels, powers: vec![f64::NAN; len], metadata: serde_json::Value::Null }
    }

    #[inline]
    fn index(&self, step: usize, awg: usize, channel: usize) -> usize {
        (step * self.n_awgs + awg) * self.n_channels + channel
    }

    pub fn schedule(&self) -> &ScanSchedule {
        &self.schedule
    }

    pub fn thetas(&self) -> &[f64] {
        self.schedule.thetas()
    }

    pub fn n_awgs(&self) -> usize {
        self.n_awgs
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn get(&self, step: usize, awg: usize, channel: usize) -> Option<f64> {
        if step >= self.thetas().len() || awg >= self.n_awgs || channel >= self.n_channels {
            return None;
        }
        let v = self.powers[self.index(step, awg, channel)];
        (!v.is_nan()).then_some(v)
    }

    pub fn set(&mut self, step: usize, awg: usize, channel: usize, power: f64) {
        let i = self.index(step, awg, channel);
        self.powers[i] = power;
    }

    /// Raw storage; `NaN` marks entries not acquired.
    pub fn raw(&self) -> &[f64] {
        &self.powers
    }

    /// Applies `f` to every acquired value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        for v in out.powers.iter_mut().filter(|v| !v.is_nan()) {
            *v = f(*v);
        }
        out
    }

    /// Writes `theta_rad,awg_index,channel,power_w` (1-based indices), acquired entries only.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["theta_rad", "awg_index", "channel", "power_w"])?;
        for (t, theta) in self.thetas().iter().enumerate() {
            for j in 0..self.n_awgs {
                for m in 0..self.n_channels {
                    if let Some(p) = self.get(t, j, m) {
                        w.write_record([theta.to_string(), (j + 1).to_string(), (m + 1).to_string(), p.to_string()])?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_sidecar<W: Write>(&self, writer: W) -> Result<()> {
        let side = TraceSidecar {
            schedule: self.schedule.clone(),
            n_awgs: self.n_awgs,
            n_channels: self.n_channels,
            metadata: self.metadata.clone(),
        };
        serde_json::to_writer_pretty(writer, &side)?;
        Ok(())
    }

    /// Loads a trace written by [`write_csv`](Self::write_csv) and [`write_sidecar`](Self::write_sidecar).
    pub fn read<R: Read, S: Read>(csv_reader: R, sidecar: S) -> Result<Self> {
        let side: TraceSidecar = serde_json::from_reader(sidecar)?;
        side.schedule.validate()?;
        let mut trace = DetectorTrace::empty(side.schedule, side.n_awgs, side.n_channels);
        trace.metadata = side.metadata;
        let mut rdr = csv::Reader::from_reader(csv_reader);
        check_header(rdr.headers()?, &["theta_rad", "awg_index", "channel", "power_w"])?;
        for rec in rdr.records() {
            let rec = rec?;
            let theta = parse_field(&rec, 0)?;
            let j = parse_field(&rec, 1)? as usize;
            let m = parse_field(&rec, 2)? as usize;
            let p = parse_field(&rec, 3)?;
            let step = trace
                .thetas()
                .iter()
                .position(|&t| t == theta)
                .ok_or_else(|| Error::Format(format!("θ {theta} not in the schedule")))?;
            if j == 0 || m == 0 || j > trace.n_awgs || m > trace.n_channels {
                return Err(Error::Format(format!("index out of range: awg {j} channel {m}")));
            }
            trace.set(step, j - 1, m - 1, p);
        }
        Ok(trace)
    }
}

/// Additive Gaussian detector noise (disabled by default).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorNoise {
    pub sigma_w: f64,
    pub seed: u64,
}

/// Response samples of one channel on a contiguous run of grid indices.
#[derive(Debug, Clone)]
struct Window {
    start: usize,
    values: Vec<f64>,
}

/// Precomputed, immutable integration kernel shared by all workers.
pub struct ScanEngine<'a> {
    spectrum: &'a Spectrum,
    ring: &'a RingModel,
    bank: &'a AwgBank,
    phase: Vec<f64>,
    numerator: Vec<f64>,
    rra: Vec<f64>,
    /// `[awg][channel]` → windows.
    windows: Vec<Vec<Vec<Window>>>,
}

impl<'a> ScanEngine<'a> {
    pub fn new(spectrum: &'a Spectrum, ring: &'a RingModel, bank: &'a AwgBank) -> Self {
        let grid = spectrum.grid();
        if let Ok(w) = ring.fwhm() {
            if !grid.resolves(w.fwhm_hz) {
                log::warn!(
                    "grid step {} Hz is coarser than FWHM/16 ({} Hz); integration may be inaccurate",
                    grid.step(),
                    w.fwhm_hz / 16.0
                );
            }
        }
        let phase = grid.frequencies().map(|f| ring.propagation_phase(f)).collect();
        let (numerator, rra) = grid.frequencies().map(|f| ring.airy_coefficients(f)).unzip();
        let (lo, hi) = (grid.start(), grid.last());
        let windows = (0..bank.n_awgs())
            .map(|j| {
                (0..bank.n_channels())
                    .map(|m| {
                        let ranges = match bank.support(j, m, lo, hi) {
                            Some(iv) => iv.into_iter().map(|(a, b)| grid.index_range(a, b)).collect::<Vec<_>>(),
                            None => vec![0..grid.count()],
                        };
                        ranges
                            .into_iter()
                            .filter(|r| !r.is_empty())
                            .map(|r| Window {
                                start: r.start,
                                values: r.map(|i| bank.response(grid.frequency(i), j, m)).collect(),
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self { spectrum, ring, bank, phase, numerator, rra, windows }
    }

    #[inline]
    fn ring_at(&self, i: usize, theta: f64) -> f64 {
        RingModel::drop_from_phase(self.numerator[i], self.rra[i], self.phase[i], theta)
    }

    fn ring_vector(&self, theta: f64) -> Vec<f64> {
        (0..self.phase.len()).map(|i| self.ring_at(i, theta)).collect()
    }

    fn integrate(&self, ring: impl Fn(usize) -> f64, theta: f64, awg: usize, channel: usize) -> f64 {
        let psd = self.spectrum.psd();
        let last = psd.len() - 1;
        let mut total = 0.0;
        for w in &self.windows[awg][channel] {
            let mut acc = 0.0;
            for (k, r) in w.values.iter().enumerate() {
                let i = w.start + k;
                let mut g = psd[i] * ring(i) * r;
                if i == 0 || i == last {
                    g *= 0.5;
                }
                acc += g;
            }
            total += acc;
        }
        total *= self.spectrum.grid().step();
        for line in self.spectrum.lines() {
            let f = line.frequency_hz;
            total += line.power_w * self.ring.drop_transmission(f, theta) * self.bank.response(f, awg, channel);
        }
        total
    }

    /// Detected power of one output at one tuning phase.
    pub fn detect(&self, theta: f64, awg: usize, channel: usize) -> f64 {
        self.integrate(|i| self.ring_at(i, theta), theta, awg, channel)
    }

    /// All channels of the given AWGs at one θ; result indexed `[awg][channel]`,
    /// `NaN` for AWGs not requested.
    fn detect_step(&self, theta: f64, awgs: &[usize]) -> Vec<f64> {
        let n_ch = self.bank.n_channels();
        let mut out = vec![f64::NAN; self.bank.n_awgs() * n_ch];
        if awgs.is_empty() {
            return out;
        }
        let ring = self.ring_vector(theta);
        for &j in awgs {
            for m in 0..n_ch {
                out[j * n_ch + m] = self.integrate(|i| ring[i], theta, j, m);
            }
        }
        out
    }
}

/// Detected power at output `channel` of AWG `awg` for tuning phase `theta`.
pub fn detect_power(
    spectrum: &Spectrum,
    ring: &RingModel,
    bank: &AwgBank,
    theta: f64,
    awg: usize,
    channel: usize,
) -> Result<f64> {
    bank.channel_response(spectrum.grid().start(), awg, channel)?;
    Ok(ScanEngine::new(spectrum, ring, bank).detect(theta, awg, channel))
}

/// Scan options beyond the schedule.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScanOptions {
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    pub noise: Option<DetectorNoise>,
}

/// Runs the full acquisition described by `schedule`.
pub fn run_scan(
    spectrum: &Spectrum,
    ring: &RingModel,
    bank: &AwgBank,
    schedule: &ScanSchedule,
    options: ScanOptions,
) -> Result<DetectorTrace> {
    if schedule.n_ports() != bank.n_awgs() {
        return Err(Error::InvalidSchedule(format!(
            "schedule drives {} ports but the bank has {} AWGs",
            schedule.n_ports(),
            bank.n_awgs()
        )));
    }
    let engine = ScanEngine::new(spectrum, ring, bank);
    let thetas = schedule.thetas();
    let mut trace = DetectorTrace::empty(schedule.clone(), bank.n_awgs(), bank.n_channels());
    let compute = || -> Vec<Vec<f64>> {
        match schedule.mode() {
            ScanMode::Parallel => {
                let all: Vec<usize> = (0..bank.n_awgs()).collect();
                thetas.par_iter().map(|&th| engine.detect_step(th, &all)).collect()
            }
            ScanMode::TimeMultiplexed => {
                // Walk the switch plan record by record: each record holds one
                // port while θ sweeps its sub-range.
                let mut rows = vec![vec![f64::NAN; bank.n_awgs() * bank.n_channels()]; thetas.len()];
                for rec in schedule.switch_plan() {
                    let steps: Vec<usize> = (0..thetas.len()).filter(|&t| rec.covers(thetas[t])).collect();
                    let partial: Vec<Vec<f64>> =
                        steps.par_iter().map(|&t| engine.detect_step(thetas[t], &[rec.port])).collect();
                    let n_ch = bank.n_channels();
                    for (t, row) in steps.into_iter().zip(partial) {
                        let span = rec.port * n_ch..(rec.port + 1) * n_ch;
                        rows[t][span.clone()].copy_from_slice(&row[span]);
                    }
                }
                rows
            }
        }
    };
    let rows = match options.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?
            .install(compute),
        None => compute(),
    };
    let per_step = bank.n_awgs() * bank.n_channels();
    for (t, row) in rows.into_iter().enumerate() {
        trace.powers[t * per_step..(t + 1) * per_step].copy_from_slice(&row);
    }
    if let Some(noise) = options.noise {
        apply_noise(&mut trace, noise)?;
    }
    Ok(trace)
}

fn apply_noise(trace: &mut DetectorTrace, noise: DetectorNoise) -> Result<()> {
    if noise.sigma_w == 0.0 {
        return Ok(());
    }
    let normal = Normal::new(0.0, noise.sigma_w).map_err(|e| Error::Config(format!("noise sigma: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    for v in trace.powers.iter_mut().filter(|v| !v.is_nan()) {
        *v = (*v + normal.sample(&mut rng)).max(0.0);
    }
    Ok(())
}
