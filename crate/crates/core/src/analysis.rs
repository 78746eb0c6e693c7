//! Figures of merit computed from traces and reconstructions.
//!
//! All dB quantities are taken on values floored at [`POWER_FLOOR_W`] (or a
//! relative floor for spectral densities) so dark channels report finite numbers.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::awg::AwgBank;
use crate::error::{Error, Result};
use crate::reconstruct::{
    crosstalk_correct, DetuningRow, ReconstructedPoint, ReconstructedSpectrum, VirtualChannelTrace,
};
use crate::ring::RingModel;
use crate::scan::{run_scan, ScanOptions, ScanSchedule};
use crate::spectrum::{db_floored, make_grid, Line, Spectrum, WdmChannel};

/// Floor applied to detected powers before taking logarithms, W.
pub const POWER_FLOOR_W: f64 = 1e-15;

/// Floor for spectral densities, relative to the largest true value (−60 dB).
pub const RELATIVE_PSD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRipple {
    pub segment: usize,
    pub peak_to_peak_db: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RippleReport {
    pub peak_to_peak_db: f64,
    pub window_rad: (f64, f64),
    pub per_segment: Vec<SegmentRipple>,
    pub virtual_channel: usize,
    pub handover_angles: Vec<f64>,
}

fn peak_to_peak_db(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut lo, mut hi, mut any) = (f64::INFINITY, f64::NEG_INFINITY, false);
    for v in values {
        let d = db_floored(v, POWER_FLOOR_W);
        lo = lo.min(d);
        hi = hi.max(d);
        any = true;
    }
    any.then_some(hi - lo)
}

/// Max − min dB of the synthesized power over `θ ∈ [window.0, window.1)`,
/// ignoring partial samples.
pub fn ripple(trace: &VirtualChannelTrace, window: (f64, f64)) -> Result<RippleReport> {
    let inside: Vec<_> =
        trace.samples.iter().filter(|s| !s.partial && s.theta >= window.0 && s.theta < window.1).collect();
    let total = peak_to_peak_db(inside.iter().map(|s| s.power_w))
        .ok_or_else(|| Error::Domain(format!("no complete samples in θ window [{}, {})", window.0, window.1)))?;
    let mut segments: Vec<usize> = inside.iter().map(|s| s.pair.segment).collect();
    segments.sort_unstable();
    segments.dedup();
    let per_segment = segments
        .into_iter()
        .map(|seg| {
            let vals: Vec<f64> = inside.iter().filter(|s| s.pair.segment == seg).map(|s| s.power_w).collect();
            SegmentRipple {
                segment: seg,
                peak_to_peak_db: peak_to_peak_db(vals.iter().copied()).unwrap_or(0.0),
                samples: vals.len(),
            }
        })
        .collect();
    Ok(RippleReport {
        peak_to_peak_db: total,
        window_rad: window,
        per_segment,
        virtual_channel: trace.m,
        handover_angles: trace.handover_angles.clone(),
    })
}

/// Ripple over the whole scan.
pub fn full_ripple(trace: &VirtualChannelTrace) -> Result<f64> {
    Ok(ripple(trace, (0.0, TAU))?.peak_to_peak_db)
}

/// Mean reconstructed psd of virtual channel `m` over its complete points.
pub fn channel_level(recon: &ReconstructedSpectrum, m: usize) -> Option<f64> {
    let vals: Vec<f64> = recon.channel(m).filter(|p| !p.partial).map(|p| p.psd_w_per_hz).collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Level of the central virtual channel(s) minus that of the two outermost ones, dB.
pub fn edge_rolloff(recon: &ReconstructedSpectrum) -> Result<f64> {
    let n = recon.n_channels();
    if n < 3 {
        return Err(Error::Domain(format!("edge roll-off needs at least three virtual channels, got {n}")));
    }
    let level = |ms: &[usize]| -> Result<f64> {
        let mut acc = 0.0;
        for &m in ms {
            acc += channel_level(recon, m)
                .ok_or_else(|| Error::Domain(format!("virtual channel {m} has no complete points")))?;
        }
        Ok(acc / ms.len() as f64)
    };
    let centre = if n % 2 == 1 { vec![n / 2] } else { vec![n / 2 - 1, n / 2] };
    let c = level(&centre)?;
    let e = level(&[0, n - 1])?;
    Ok(db_floored(c, f64::MIN_POSITIVE) - db_floored(e, f64::MIN_POSITIVE))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelError {
    pub virtual_channel: usize,
    pub rms_db: f64,
    pub max_db: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub rms_db: f64,
    pub max_db: f64,
    pub per_channel: Vec<ChannelError>,
}

/// Reconstruction versus the known input, resampled at the reconstruction
/// points; partial-coverage points and points outside the truth grid are skipped.
pub fn reconstruction_error(recon: &ReconstructedSpectrum, truth: &Spectrum) -> Result<ErrorReport> {
    let grid = truth.grid();
    let peak = truth.psd().iter().copied().fold(0.0, f64::max);
    let floor = if peak > 0.0 { peak * RELATIVE_PSD_FLOOR } else { f64::MIN_POSITIVE };
    let n = recon.n_channels();
    let mut per: Vec<(f64, f64, usize)> = vec![(0.0, 0.0, 0); n];
    for p in recon.points.iter().filter(|p| !p.partial && grid.contains(p.frequency_hz)) {
        let e = db_floored(p.psd_w_per_hz, floor) - db_floored(truth.psd_at(p.frequency_hz), floor);
        let c = &mut per[p.virtual_channel];
        c.0 += e * e;
        c.1 = c.1.max(e.abs());
        c.2 += 1;
    }
    let count: usize = per.iter().map(|c| c.2).sum();
    if count == 0 {
        return Err(Error::Domain("reconstruction and truth share no frequency support".into()));
    }
    let sum_sq: f64 = per.iter().map(|c| c.0).sum();
    let per_channel = per
        .iter()
        .enumerate()
        .filter(|(_, c)| c.2 > 0)
        .map(|(m, c)| ChannelError { virtual_channel: m, rms_db: (c.0 / c.2 as f64).sqrt(), max_db: c.1, points: c.2 })
        .collect::<Vec<_>>();
    Ok(ErrorReport {
        rms_db: (sum_sq / count as f64).sqrt(),
        max_db: per_channel.iter().map(|c| c.max_db).fold(0.0, f64::max),
        per_channel,
    })
}

fn interpolate(points: &[ReconstructedPoint], f: f64) -> f64 {
    let i = points.partition_point(|p| p.frequency_hz <= f);
    if i == 0 {
        return points[0].psd_w_per_hz;
    }
    if i >= points.len() {
        return points[points.len() - 1].psd_w_per_hz;
    }
    let (a, b) = (&points[i - 1], &points[i]);
    let t = (f - a.frequency_hz) / (b.frequency_hz - a.frequency_hz);
    a.psd_w_per_hz + t * (b.psd_w_per_hz - a.psd_w_per_hz)
}

/// Trapezoidal integral of the reconstructed psd over `[lo, hi]`, W.
pub fn integrate_band(recon: &ReconstructedSpectrum, lo: f64, hi: f64) -> Result<f64> {
    let pts = &recon.points;
    if pts.len() < 2 || lo < pts[0].frequency_hz || hi > pts[pts.len() - 1].frequency_hz || !(hi > lo) {
        return Err(Error::Domain(format!("band [{lo}, {hi}] not covered by the reconstruction")));
    }
    let mut xs = vec![lo];
    xs.extend(pts.iter().map(|p| p.frequency_hz).filter(|&f| f > lo && f < hi));
    xs.push(hi);
    let mut acc = 0.0;
    for w in xs.windows(2) {
        acc += 0.5 * (interpolate(pts, w[0]) + interpolate(pts, w[1])) * (w[1] - w[0]);
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPowerCheck {
    pub center_hz: f64,
    pub true_power_w: f64,
    pub estimated_power_w: f64,
    pub error_db: f64,
    /// −3 dB edges of the reconstruction, if found.
    pub edges_hz: Option<(f64, f64)>,
}

/// −3 dB crossings of a reconstructed channel, searched outward from `center_hz`
/// relative to the median level over the central half of `bandwidth_hz`.
pub fn find_edges(recon: &ReconstructedSpectrum, center_hz: f64, bandwidth_hz: f64) -> Option<(f64, f64)> {
    let pts = &recon.points;
    let mut core: Vec<f64> = pts
        .iter()
        .filter(|p| (p.frequency_hz - center_hz).abs() <= bandwidth_hz / 4.0)
        .map(|p| p.psd_w_per_hz)
        .collect();
    if core.is_empty() {
        return None;
    }
    core.sort_by(f64::total_cmp);
    let half = 0.5 * core[core.len() / 2];
    let start = pts.partition_point(|p| p.frequency_hz < center_hz).min(pts.len() - 1);
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev: Option<&ReconstructedPoint> = None;
        for i in range {
            let p = &pts[i];
            if p.psd_w_per_hz < half {
                let q = prev?;
                let t = (q.psd_w_per_hz - half) / (q.psd_w_per_hz - p.psd_w_per_hz);
                return Some(q.frequency_hz + t * (p.frequency_hz - q.frequency_hz));
            }
            prev = Some(p);
        }
        None
    };
    let lo = crossing(&mut (0..=start).rev())?;
    let hi = crossing(&mut (start..pts.len()))?;
    Some((lo, hi))
}

/// Integrated power and edges of each input channel, compared with truth.
pub fn channel_power_checks(recon: &ReconstructedSpectrum, channels: &[WdmChannel]) -> Result<Vec<ChannelPowerCheck>> {
    channels
        .iter()
        .map(|ch| {
            let (lo, hi) = (ch.center_hz - ch.bandwidth_hz / 2.0, ch.center_hz + ch.bandwidth_hz / 2.0);
            let est = integrate_band(recon, lo, hi)?;
            let truth = ch.psd_w_per_hz * ch.bandwidth_hz;
            Ok(ChannelPowerCheck {
                center_hz: ch.center_hz,
                true_power_w: truth,
                estimated_power_w: est,
                error_db: db_floored(est, POWER_FLOOR_W) - db_floored(truth, POWER_FLOOR_W),
                edges_hz: find_edges(recon, ch.center_hz, ch.bandwidth_hz),
            })
        })
        .collect()
}

/// Adjacent-channel leakage seen by a detector, before and after correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkReport {
    /// Neighbour reading relative to the lit channel, dB.
    pub neighbour_db: f64,
    /// Largest deviation from a leakage-free bank after correction, relative to the lit channel, dB.
    pub residual_db: f64,
}

/// Lights a single line at the centre of AWG 0 channel `k`, parks the ring
/// resonance on it, and compares readings with and without the bank's leakage.
pub fn crosstalk_report(ring: &RingModel, bank: &AwgBank, k: usize) -> Result<CrosstalkReport> {
    let n = bank.n_channels();
    if k == 0 || k + 1 >= n {
        return Err(Error::IndexOutOfRange(format!("crosstalk probe channel {k} needs two neighbours (bank has {n})")));
    }
    let f = bank.layout().center(0, k);
    let theta = ring.propagation_phase(f).rem_euclid(TAU);
    let theta = if theta >= TAU { 0.0 } else { theta };
    let grid = make_grid(f - 1e9, f + 1e9, 25e6)?;
    let spectrum = Spectrum::zeros(grid).with_lines([Line { frequency_hz: f, power_w: 1e-3 }])?;
    let schedule = ScanSchedule::parallel_with_thetas(bank.n_awgs(), vec![theta])?;
    let measured = run_scan(&spectrum, ring, bank, &schedule, ScanOptions::default())?;
    let clean_bank = if bank.is_table() { bank.clone() } else { bank.with_crosstalk(None)? };
    let clean = run_scan(&spectrum, ring, &clean_bank, &schedule, ScanOptions::default())?;
    let corrected = crosstalk_correct(&measured, bank);
    let get = |t: &crate::scan::DetectorTrace, m: usize| t.get(0, 0, m).unwrap_or(0.0);
    let lit = get(&measured, k);
    if !(lit > 0.0) {
        return Err(Error::Domain("probe line produced no signal in its own channel".into()));
    }
    let neighbour = 0.5 * (get(&measured, k - 1) + get(&measured, k + 1));
    let residual = (0..n).filter(|&m| m != k).map(|m| (get(&corrected, m) - get(&clean, m)).abs()).fold(0.0, f64::max);
    Ok(CrosstalkReport {
        neighbour_db: db_floored(neighbour / lit, POWER_FLOOR_W),
        residual_db: db_floored(residual / lit, POWER_FLOOR_W),
    })
}

/// Metrics file written next to every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario_id: String,
    pub ripple_db: Option<f64>,
    pub edge_rolloff_db: Option<f64>,
    pub rms_error_db: Option<f64>,
    pub max_error_db: Option<f64>,
    pub crosstalk_residual_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub detuning: Vec<DetuningRow>,
}
