//! Virtual-channel synthesis and spectrum reconstruction.
//!
//! A virtual channel `m` follows one ring resonance as θ sweeps a full FSR.
//! At every θ step the detected powers of the interlaced channel pair that
//! currently straddles the resonance are summed; the sum is then mapped back
//! to a frequency and divided by the instrument response to estimate the
//! power spectral density there.

use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{ripple, RippleReport};
use crate::awg::{canonical_boundaries, pair_for_segment, segment_for, AwgBank, BankLayout, ChannelRef, Pair};
use crate::error::{Error, Result};
use crate::ring::RingModel;
use crate::scan::{run_scan, DetectorTrace, ScanOptions, ScanSchedule};
use crate::spectrum::{check_header, parse_field, FrequencyGrid, Spectrum};

/// Largest shift of a handover angle away from its canonical position.
pub const MAX_HANDOVER_SHIFT_DEG: f64 = 30.0;

/// Handover tolerances commonly used with two- and three-AWG designs, degrees.
pub const HANDOVER_PRESETS_DEG: [f64; 2] = [15.0, 20.0];

/// Where the summed pair switches as θ crosses each interlace crossover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoverPolicy {
    n_awgs: usize,
    /// The `M − 1` interior handover angles, radians, increasing.
    boundaries: Vec<f64>,
}

impl HandoverPolicy {
    /// Handover exactly at the `j·2π/M` crossovers.
    pub fn canonical(n_awgs: usize) -> Result<Self> {
        Self::shifted(n_awgs, 0.0)
    }

    /// Every interior handover moved by `shift_deg`.
    pub fn shifted(n_awgs: usize, shift_deg: f64) -> Result<Self> {
        if n_awgs < 2 {
            return Err(Error::InvalidBank(format!("need at least two interlaced AWGs, got {n_awgs}")));
        }
        let shift = shift_deg.to_radians();
        Self::with_angles(n_awgs, canonical_boundaries(n_awgs).into_iter().map(|b| b + shift).collect())
    }

    /// Explicit handover angles (radians), each within ±30° of its crossover.
    pub fn with_angles(n_awgs: usize, boundaries: Vec<f64>) -> Result<Self> {
        let canon = canonical_boundaries(n_awgs);
        if boundaries.len() != canon.len() {
            return Err(Error::InvalidSchedule(format!(
                "{} AWGs need {} handover angles, got {}",
                n_awgs,
                canon.len(),
                boundaries.len()
            )));
        }
        let limit = MAX_HANDOVER_SHIFT_DEG.to_radians() + 1e-12;
        for (b, c) in boundaries.iter().zip(&canon) {
            if !((b - c).abs() <= limit) {
                return Err(Error::InvalidSchedule(format!(
                    "handover at {:.3}° is more than {MAX_HANDOVER_SHIFT_DEG}° from the crossover at {:.3}°",
                    b.to_degrees(),
                    c.to_degrees()
                )));
            }
        }
        Ok(Self { n_awgs, boundaries })
    }

    pub fn n_awgs(&self) -> usize {
        self.n_awgs
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Pair summed for virtual channel `m` at `theta` (partner may be channel N).
    pub fn pair(&self, theta: f64, m: usize) -> Pair {
        pair_for_segment(segment_for(theta, &self.boundaries), m, self.n_awgs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirtualSample {
    pub theta: f64,
    pub power_w: f64,
    pub pair: Pair,
    /// Some contribution was unavailable (band edge or not acquired).
    pub partial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualChannelTrace {
    pub m: usize,
    pub samples: Vec<VirtualSample>,
    pub handover_angles: Vec<f64>,
}

impl VirtualChannelTrace {
    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for s in &mut out.samples {
            s.power_w *= alpha;
        }
        out
    }
}

fn check_channel(m: usize, n_channels: usize) -> Result<()> {
    if m >= n_channels {
        return Err(Error::IndexOutOfRange(format!("virtual channel {m} (bank has {n_channels} channels)")));
    }
    Ok(())
}

/// Sums the interlaced pair named by `policy` at every θ step of `trace`.
pub fn synthesize(
    trace: &DetectorTrace,
    layout: &BankLayout,
    m: usize,
    policy: &HandoverPolicy,
) -> Result<VirtualChannelTrace> {
    if policy.n_awgs() != trace.n_awgs() || layout.n_awgs != trace.n_awgs() {
        return Err(Error::InvalidSchedule(format!(
            "policy has {} AWGs, layout {}, trace {}",
            policy.n_awgs(),
            layout.n_awgs,
            trace.n_awgs()
        )));
    }
    check_channel(m, trace.n_channels())?;
    let samples = trace
        .thetas()
        .iter()
        .enumerate()
        .map(|(t, &theta)| {
            let wanted = policy.pair(theta, m);
            let (pair, mut partial) = match layout.resolve(wanted) {
                Some(p) => (p, false),
                None => (wanted, true),
            };
            let mut power = 0.0;
            for (c, exists) in [(pair.a, true), (pair.b, !partial)] {
                match exists.then(|| trace.get(t, c.awg, c.channel)).flatten() {
                    Some(p) => power += p,
                    None => partial = true,
                }
            }
            VirtualSample { theta, power_w: power, pair, partial }
        })
        .collect();
    Ok(VirtualChannelTrace { m, samples, handover_angles: policy.boundaries().to_vec() })
}

/// All virtual channels, synthesized in parallel.
pub fn synthesize_all(
    trace: &DetectorTrace,
    layout: &BankLayout,
    policy: &HandoverPolicy,
) -> Result<Vec<VirtualChannelTrace>> {
    (0..trace.n_channels()).into_par_iter().map(|m| synthesize(trace, layout, m, policy)).collect()
}

/// Frequency of the resonance tracked by virtual channel `m` at tuning phase `theta`.
///
/// The comb line nearest AWG 0's channel-`m` centre is followed through θ, so
/// dispersion enters through the ring's own phase model rather than a fixed FSR.
pub fn theta_to_frequency(m: usize, theta: f64, ring: &RingModel, layout: &BankLayout) -> f64 {
    let anchor = ring.nearest_comb_index(layout.center(0, m));
    ring.comb_resonance_frequency(anchor, theta)
}

/// Detected pair power for a unit line that sits exactly on the tracked
/// resonance at every θ step: the virtual channel's intrinsic passband shape.
pub fn tracked_line_trace(
    ring: &RingModel,
    bank: &AwgBank,
    m: usize,
    policy: &HandoverPolicy,
    thetas: &[f64],
    line_power_w: f64,
) -> Result<VirtualChannelTrace> {
    check_channel(m, bank.n_channels())?;
    let layout = bank.layout();
    let samples = thetas
        .iter()
        .map(|&theta| {
            let f = theta_to_frequency(m, theta, ring, layout);
            let wanted = policy.pair(theta, m);
            let drop = line_power_w * ring.drop_transmission(f, theta);
            match layout.resolve(wanted) {
                Some(pair) => {
                    VirtualSample { theta, power_w: drop * bank.pair_sum_response(f, &pair), pair, partial: false }
                }
                None => VirtualSample {
                    theta,
                    power_w: drop * bank.response(f, wanted.a.awg, wanted.a.channel),
                    pair: wanted,
                    partial: true,
                },
            }
        })
        .collect();
    Ok(VirtualChannelTrace { m, samples, handover_angles: policy.boundaries().to_vec() })
}

/// How detected power was converted to power spectral density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub method: String,
    pub fwhm_hz: f64,
    /// Ring integral `peak · (π/2) · FWHM` at the reference frequency.
    pub equivalent_bandwidth_hz: f64,
    pub min_factor_hz: f64,
    pub max_factor_hz: f64,
    pub theta_jitter_rad: f64,
    pub derivation: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedPoint {
    pub frequency_hz: f64,
    pub psd_w_per_hz: f64,
    pub virtual_channel: usize,
    pub theta_rad: f64,
    pub partial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedSpectrum {
    pub points: Vec<ReconstructedPoint>,
    pub calibration: CalibrationRecord,
}

/// Optional imperfections of the reconstruction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    /// Standard deviation of the error on the θ believed at each step.
    pub theta_jitter_rad: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMethod {
    /// Pair response at the resonance × ring `peak · (π/2) · FWHM`.
    Analytic,
    /// Simulated response of the nominal instrument to a unit flat psd.
    #[default]
    FlatField,
}

/// Conversion from detected power to psd.
#[derive(Debug, Clone, PartialEq)]
pub enum Calibration {
    /// Narrow-resonance limit: `P / (pair response at f_res · peak · (π/2)·FWHM)`.
    /// Ignores the ring's off-resonance floor, which a wide passband integrates.
    Analytic,
    /// Detector readings for a 1 W/Hz flat input through the nominal bank,
    /// acquired with the same schedule as the measurement.
    FlatField(DetectorTrace),
}

impl Calibration {
    /// Simulates the flat-field reference on `grid`.
    pub fn flat_field(
        grid: &FrequencyGrid,
        ring: &RingModel,
        bank: &AwgBank,
        schedule: &ScanSchedule,
        options: ScanOptions,
    ) -> Result<Self> {
        let unit = Spectrum::flat(*grid, 1.0)?;
        let options = ScanOptions { noise: None, ..options };
        Ok(Calibration::FlatField(run_scan(&unit, ring, &bank.nominal(), schedule, options)?))
    }

    pub fn build(
        method: CalibrationMethod,
        grid: &FrequencyGrid,
        ring: &RingModel,
        bank: &AwgBank,
        schedule: &ScanSchedule,
        options: ScanOptions,
    ) -> Result<Self> {
        match method {
            CalibrationMethod::Analytic => Ok(Calibration::Analytic),
            CalibrationMethod::FlatField => Self::flat_field(grid, ring, bank, schedule, options),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Calibration::Analytic => "analytic",
            Calibration::FlatField(_) => "flat_field",
        }
    }
}

/// Turns detected pair power into psd at the tracked resonance.
struct Calibrator<'a> {
    ring: &'a RingModel,
    bank: &'a AwgBank,
    calibration: &'a Calibration,
    half_pi_fwhm: f64,
}

impl<'a> Calibrator<'a> {
    fn new(ring: &'a RingModel, bank: &'a AwgBank, calibration: &'a Calibration) -> Result<Self> {
        let w = ring.fwhm().map_err(|e| Error::Calibration(format!("ring resonance: {e}")))?;
        Ok(Self { ring, bank, calibration, half_pi_fwhm: 0.5 * PI * w.fwhm_hz })
    }

    /// Flat-field virtual channel matching `trace` (same channel, same handover).
    fn reference(&self, trace: &VirtualChannelTrace) -> Result<Option<VirtualChannelTrace>> {
        let Calibration::FlatField(flat) = self.calibration else {
            return Ok(None);
        };
        let thetas = flat.thetas();
        if thetas.len() != trace.samples.len() || thetas.iter().zip(&trace.samples).any(|(t, s)| *t != s.theta) {
            return Err(Error::Calibration("flat-field reference was taken on different θ steps".into()));
        }
        let policy = HandoverPolicy::with_angles(self.bank.n_awgs(), trace.handover_angles.clone())?;
        Ok(Some(synthesize(flat, self.bank.layout(), trace.m, &policy)?))
    }

    /// `(frequency, factor)` for sample `k`, with `theta` the phase believed at that step.
    fn factor(
        &self,
        m: usize,
        k: usize,
        theta: f64,
        sample: &VirtualSample,
        reference: Option<&VirtualChannelTrace>,
    ) -> (f64, f64) {
        let f = theta_to_frequency(m, theta, self.ring, self.bank.layout());
        if let Some(r) = reference {
            return (f, r.samples[k].power_w);
        }
        let layout = self.bank.layout();
        let pair_sum = match layout.resolve(sample.pair) {
            Some(p) => self.bank.nominal_pair_sum(f, &p),
            None => self.bank.nominal_response(f, sample.pair.a.awg, sample.pair.a.channel),
        };
        (f, pair_sum * self.ring.peak_transmission(f) * self.half_pi_fwhm)
    }
}

/// Calibrates every sample and merges all virtual channels into one
/// frequency-ordered spectrum.
///
/// The nominal bank response is used in either method, so an uncharacterised
/// envelope or crosstalk stays visible in the result.
pub fn calibrate_and_assemble(
    traces: &[VirtualChannelTrace],
    ring: &RingModel,
    bank: &AwgBank,
    calibration: &Calibration,
    options: CalibrationOptions,
) -> Result<ReconstructedSpectrum> {
    let cal = Calibrator::new(ring, bank, calibration)?;
    let mut jitter = if options.theta_jitter_rad > 0.0 {
        let normal = Normal::new(0.0, options.theta_jitter_rad).map_err(|e| Error::Config(format!("θ jitter: {e}")))?;
        Some((normal, ChaCha8Rng::seed_from_u64(options.seed)))
    } else {
        None
    };
    let mut points = Vec::new();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for tr in traces {
        let reference = cal.reference(tr)?;
        for (k, s) in tr.samples.iter().enumerate() {
            let theta = match jitter.as_mut() {
                Some((n, rng)) => s.theta + n.sample(rng),
                None => s.theta,
            };
            let (f, factor) = cal.factor(tr.m, k, theta, s, reference.as_ref());
            if !(factor > 0.0) {
                if s.partial {
                    // Band edge with no response left at this θ: nothing to report.
                    continue;
                }
                return Err(Error::Calibration(format!(
                    "zero calibration factor for virtual channel {} at θ = {:.4} rad",
                    tr.m, s.theta
                )));
            }
            lo = lo.min(factor);
            hi = hi.max(factor);
            points.push(ReconstructedPoint {
                frequency_hz: f,
                psd_w_per_hz: s.power_w / factor,
                virtual_channel: tr.m,
                theta_rad: s.theta,
                partial: s.partial,
            });
        }
    }
    points.sort_by(|a, b| a.frequency_hz.total_cmp(&b.frequency_hz));
    points.dedup_by(|b, a| b.frequency_hz <= a.frequency_hz);
    let derivation = match calibration {
        Calibration::Analytic => "psd = P_pair / (nominal pair response at resonance · ring peak · (π/2)·FWHM)",
        Calibration::FlatField(_) => "psd = P_pair / P_pair(unit flat psd through the nominal bank, same θ step)",
    };
    Ok(ReconstructedSpectrum {
        points,
        calibration: CalibrationRecord {
            method: calibration.name().into(),
            fwhm_hz: cal.half_pi_fwhm / (0.5 * PI),
            equivalent_bandwidth_hz: ring.peak_transmission(ring.reference_hz()) * cal.half_pi_fwhm,
            min_factor_hz: lo,
            max_factor_hz: hi,
            theta_jitter_rad: options.theta_jitter_rad,
            derivation: derivation.into(),
        },
    })
}

impl ReconstructedSpectrum {
    /// Contiguous frequency spans made only of partial-coverage points.
    pub fn partial_segments(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        let mut open: Option<(f64, f64)> = None;
        for p in &self.points {
            match (p.partial, open.as_mut()) {
                (true, Some(seg)) => seg.1 = p.frequency_hz,
                (true, None) => open = Some((p.frequency_hz, p.frequency_hz)),
                (false, _) => out.extend(open.take()),
            }
        }
        out.extend(open);
        out
    }

    /// Points of virtual channel `m`.
    pub fn channel(&self, m: usize) -> impl Iterator<Item = &ReconstructedPoint> {
        self.points.iter().filter(move |p| p.virtual_channel == m)
    }

    pub fn n_channels(&self) -> usize {
        self.points.iter().map(|p| p.virtual_channel + 1).max().unwrap_or(0)
    }

    /// Writes `frequency_hz,psd_w_per_hz,virtual_channel,theta_rad,flags`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["frequency_hz", "psd_w_per_hz", "virtual_channel", "theta_rad", "flags"])?;
        for p in &self.points {
            w.write_record([
                p.frequency_hz.to_string(),
                p.psd_w_per_hz.to_string(),
                p.virtual_channel.to_string(),
                p.theta_rad.to_string(),
                if p.partial { "partial".to_string() } else { String::new() },
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads points written by [`write_csv`](Self::write_csv); the calibration
    /// record is not part of the CSV and comes back empty.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        check_header(rdr.headers()?, &["frequency_hz", "psd_w_per_hz", "virtual_channel", "theta_rad", "flags"])?;
        let mut points = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let flags = rec.get(4).unwrap_or("");
            points.push(ReconstructedPoint {
                frequency_hz: parse_field(&rec, 0)?,
                psd_w_per_hz: parse_field(&rec, 1)?,
                virtual_channel: parse_field(&rec, 2)? as usize,
                theta_rad: parse_field(&rec, 3)?,
                partial: flags.split(';').any(|f| f == "partial"),
            });
        }
        if points.windows(2).any(|w| w[1].frequency_hz <= w[0].frequency_hz) {
            return Err(Error::Format("reconstruction frequencies must be strictly increasing".into()));
        }
        Ok(Self {
            points,
            calibration: CalibrationRecord {
                fwhm_hz: f64::NAN,
                equivalent_bandwidth_hz: f64::NAN,
                min_factor_hz: f64::NAN,
                max_factor_hz: f64::NAN,
                theta_jitter_rad: 0.0,
                derivation: "loaded from CSV".into(),
                method: "unknown".into(),
            },
        })
    }
}

/// Largest change, in dB, of the calibrated virtual channel `m` when the
/// handover moves from policy `a` to policy `b`. Samples that are partial
/// under either policy are skipped.
pub fn handover_sensitivity(
    trace: &DetectorTrace,
    ring: &RingModel,
    bank: &AwgBank,
    calibration: &Calibration,
    m: usize,
    a: &HandoverPolicy,
    b: &HandoverPolicy,
) -> Result<f64> {
    let cal = Calibrator::new(ring, bank, calibration)?;
    let va = synthesize(trace, bank.layout(), m, a)?;
    let vb = synthesize(trace, bank.layout(), m, b)?;
    let (ra, rb) = (cal.reference(&va)?, cal.reference(&vb)?);
    let mut worst: f64 = 0.0;
    for (k, (sa, sb)) in va.samples.iter().zip(&vb.samples).enumerate() {
        if sa.partial || sb.partial || sa.pair == sb.pair {
            continue;
        }
        let (_, fa) = cal.factor(m, k, sa.theta, sa, ra.as_ref());
        let (_, fb) = cal.factor(m, k, sb.theta, sb, rb.as_ref());
        let (pa, pb) = (sa.power_w / fa, sb.power_w / fb);
        if pa > 0.0 && pb > 0.0 {
            worst = worst.max((10.0 * (pa / pb).log10()).abs());
        }
    }
    Ok(worst)
}

/// Same comparison on the raw pair sums, before any calibration.
pub fn raw_handover_sensitivity(
    trace: &DetectorTrace,
    layout: &BankLayout,
    m: usize,
    a: &HandoverPolicy,
    b: &HandoverPolicy,
) -> Result<f64> {
    let va = synthesize(trace, layout, m, a)?;
    let vb = synthesize(trace, layout, m, b)?;
    Ok(va
        .samples
        .iter()
        .zip(&vb.samples)
        .filter(|(sa, sb)| !sa.partial && !sb.partial && sa.power_w > 0.0 && sb.power_w > 0.0)
        .map(|(sa, sb)| (10.0 * (sa.power_w / sb.power_w).log10()).abs())
        .fold(0.0, f64::max))
}

/// Removes adjacent-channel leakage of a characterised bank in one pass:
/// `corrected[m] = measured[m] − X·(measured[m−1] + measured[m+1])`, clamped
/// at zero. Neighbours wrap around for cyclic banks.
pub fn crosstalk_correct(trace: &DetectorTrace, bank: &AwgBank) -> DetectorTrace {
    let x = bank.crosstalk_floor_linear();
    let mut out = trace.clone();
    if x == 0.0 {
        return out;
    }
    let n = trace.n_channels();
    let cyclic = bank.layout().is_cyclic();
    let neighbour = |t: usize, j: usize, m: isize| -> f64 {
        let idx = if cyclic {
            Some(m.rem_euclid(n as isize) as usize)
        } else {
            (m >= 0 && (m as usize) < n).then_some(m as usize)
        };
        idx.and_then(|k| trace.get(t, j, k)).unwrap_or(0.0)
    };
    for t in 0..trace.thetas().len() {
        for j in 0..trace.n_awgs() {
            for m in 0..n {
                if let Some(p) = trace.get(t, j, m) {
                    let leak = x * (neighbour(t, j, m as isize - 1) + neighbour(t, j, m as isize + 1));
                    out.set(t, j, m, (p - leak).max(0.0));
                }
            }
        }
    }
    out
}

/// Ripple of one virtual channel split by half-scan, for a given inter-AWG shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetuningRow {
    pub shift_hz: f64,
    pub total_ripple_db: f64,
    pub first_half_ripple_db: f64,
    pub second_half_ripple_db: f64,
}

/// Bank whose AWG 1 sits `shift_hz` above AWG 0 instead of at the canonical offset.
pub fn shifted_bank(bank: &AwgBank, shift_hz: f64) -> Result<AwgBank> {
    let layout = bank.layout();
    if layout.n_awgs != 2 {
        return Err(Error::InvalidBank(format!("detuning study needs two AWGs, got {}", layout.n_awgs)));
    }
    let detune = vec![layout.detune_hz[0], shift_hz - layout.offsets_hz[1] + layout.detune_hz[0]];
    bank.with_detune(detune)
}

/// Runs scan and synthesis with AWG 1 shifted by `shift_hz` from AWG 0 and
/// reports the ripple of virtual channel `m` over the whole scan and each half.
pub fn detuning_study(
    spectrum: &Spectrum,
    ring: &RingModel,
    bank: &AwgBank,
    shift_hz: f64,
    schedule: &ScanSchedule,
    m: usize,
    options: ScanOptions,
) -> Result<DetuningRow> {
    let shifted = shifted_bank(bank, shift_hz)?;
    let trace = run_scan(spectrum, ring, &shifted, schedule, options)?;
    let policy = HandoverPolicy::canonical(2)?;
    let v = synthesize(&trace, shifted.layout(), m, &policy)?;
    let rip = |lo: f64, hi: f64| -> Result<RippleReport> { ripple(&v, (lo, hi)) };
    Ok(DetuningRow {
        shift_hz,
        total_ripple_db: rip(0.0, TAU)?.peak_to_peak_db,
        first_half_ripple_db: rip(0.0, PI)?.peak_to_peak_db,
        second_half_ripple_db: rip(PI, TAU)?.peak_to_peak_db,
    })
}

/// Pair reference helper used in reports: `(awg, channel)` both 1-based.
pub fn describe_pair(pair: &Pair) -> String {
    let one = |c: ChannelRef| format!("Ch{}[{}]", c.awg + 1, c.channel + 1);
    format!("{} + {}", one(pair.a), one(pair.b))
}
