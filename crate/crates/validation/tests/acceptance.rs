//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specmon::analysis::{channel_power_checks, crosstalk_report, full_ripple, reconstruction_error};
use specmon::awg::{AwgBank, BankLayout, BankSettings, ChannelProfile};
use specmon::reconstruct::{
    calibrate_and_assemble, handover_sensitivity, synthesize, synthesize_all, tracked_line_trace, Calibration,
    CalibrationMethod, CalibrationOptions, HandoverPolicy, ReconstructedSpectrum,
};
use specmon::ring::{calibrate_to_fwhm, circumference_for_fsr, fsr_from_geometry, GroupIndex, RingModel};
use specmon::scan::{
    detect_power, make_time_multiplexed_schedule, run_scan, uniform_thetas, ScanOptions, ScanSchedule,
};
use specmon::scenario::{load_scenario, Overrides, Scenario};
use specmon::spectrum::{make_grid, wdm_spectrum, Line, Spectrum, WdmChannel};
use specmon::Result;

const F0: f64 = 193.0e12;
const NG: f64 = 1.76841;
const FWHM: f64 = 1.3e9;
const RIPPLE_CHANNEL: usize = 4;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn preset(name: &str, threads: Option<usize>) -> Result<Scenario> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    load_scenario(&path, &Overrides { threads, ..Default::default() })
}

fn ring_for(spacing: f64) -> Result<RingModel> {
    let template = RingModel::symmetric(circumference_for_fsr(NG, spacing)?, GroupIndex::Constant(NG), 0.9, 0.4, F0)?;
    calibrate_to_fwhm(FWHM, &template)
}

fn bank(n_awgs: usize, n_channels: usize, spacing: f64, profile: ChannelProfile) -> Result<AwgBank> {
    AwgBank::parametric(BankLayout::canonical(n_awgs, n_channels, spacing, F0)?, BankSettings::ideal(profile))
}

fn flat_input(n_channels: usize, spacing: f64) -> Result<Spectrum> {
    Spectrum::flat(make_grid(F0 - 100e9, F0 + n_channels as f64 * spacing + 100e9, 25e6)?, 1e-14)
}

/// Ripple of the middle virtual channel of an 8-channel bank on flat input.
fn flat_ripple(n_awgs: usize, spacing: f64, profile: ChannelProfile, schedule: &ScanSchedule) -> Result<f64> {
    let b = bank(n_awgs, 8, spacing, profile)?;
    let trace = run_scan(&flat_input(8, spacing)?, &ring_for(spacing)?, &b, schedule, ScanOptions::default())?;
    full_ripple(&synthesize(&trace, b.layout(), RIPPLE_CHANNEL, &HandoverPolicy::canonical(n_awgs)?)?)
}

fn reconstruct(
    spectrum: &Spectrum,
    ring: &RingModel,
    bank: &AwgBank,
    schedule: &ScanSchedule,
    method: CalibrationMethod,
) -> Result<ReconstructedSpectrum> {
    let trace = run_scan(spectrum, ring, bank, schedule, ScanOptions::default())?;
    let cal = Calibration::build(method, spectrum.grid(), ring, bank, schedule, ScanOptions::default())?;
    let v = synthesize_all(&trace, bank.layout(), &HandoverPolicy::canonical(bank.n_awgs())?)?;
    calibrate_and_assemble(&v, ring, bank, &cal, CalibrationOptions::default())
}

fn c1() -> Result<Outcome> {
    let fsr = fsr_from_geometry(NG, 3.3928e-3)?;
    outcome((49.9e9..=50.05e9).contains(&fsr), format!("FSR = {:.4} GHz (want 49.9–50.05)", fsr / 1e9))
}

fn c2() -> Result<Outcome> {
    let ring = ring_for(50e9)?;
    let b = bank(2, 8, 50e9, ChannelProfile::raised_cosine(25e9))?;
    let v = tracked_line_trace(&ring, &b, RIPPLE_CHANNEL, &HandoverPolicy::canonical(2)?, &uniform_thetas(720), 1e-3)?;
    let r = full_ripple(&v)?;
    outcome(r < 1e-6, format!("raised-cosine virtual-channel ripple = {r:.2e} dB (want < 1e-6)"))
}

fn c3() -> Result<Outcome> {
    let schedule = ScanSchedule::parallel(2, 720)?;
    let widths = [20e9, 21e9, 22e9, 23e9, 24e9, 25e9];
    let ripples = widths
        .iter()
        .map(|&b| flat_ripple(2, 50e9, ChannelProfile::gaussian(b), &schedule))
        .collect::<Result<Vec<_>>>()?;
    let monotone = ripples.windows(2).all(|w| w[1] < w[0]);
    let (r20, r25) = (ripples[0], ripples[5]);
    outcome(
        (0.75..=1.75).contains(&r20) && r25 <= 0.6 && monotone,
        format!("B=20 GHz → {r20:.3} dB (0.75–1.75), B=25 GHz → {r25:.3} dB (≤ 0.6), monotone over 20..25: {monotone}"),
    )
}

/// Largest power, relative to the pair sum, that reaches any detector outside
/// the tracked pair while a line sits on the resonance.
fn leakage_db(profile: ChannelProfile) -> Result<f64> {
    let (spacing, n) = (51e9, 8);
    let ring = ring_for(spacing)?;
    let b = bank(3, n, spacing, profile)?;
    let policy = HandoverPolicy::canonical(3)?;
    let mut worst = f64::NEG_INFINITY;
    for theta in uniform_thetas(72) {
        let f = specmon::reconstruct::theta_to_frequency(RIPPLE_CHANNEL, theta, &ring, b.layout());
        let line = Spectrum::zeros(make_grid(f - 1e9, f + 1e9, 25e6)?)
            .with_lines([Line { frequency_hz: f, power_w: 1e-3 }])?;
        let pair = policy.pair(theta, RIPPLE_CHANNEL);
        let (mut inside, mut outside) = (0.0, 0.0);
        for j in 0..3 {
            for m in 0..n {
                let p = detect_power(&line, &ring, &b, theta, j, m)?;
                if (j, m) == (pair.a.awg, pair.a.channel) || (j, m) == (pair.b.awg, pair.b.channel) {
                    inside += p;
                } else {
                    outside += p;
                }
            }
        }
        worst = worst.max(10.0 * (outside / inside).max(1e-30).log10());
    }
    Ok(worst)
}

fn c4() -> Result<Outcome> {
    let schedule = make_time_multiplexed_schedule(3, 720, 15.0)?;
    let r = |b: f64| flat_ripple(3, 51e9, ChannelProfile::gaussian(b), &schedule);
    let (r15, r17, r19) = (r(15e9)?, r(17e9)?, r(19e9)?);
    let spread = r15.max(r17).max(r19) - r15.min(r17).min(r19);
    let leak_ideal = leakage_db(ChannelProfile::raised_cosine(17e9))?;
    let leak_gauss = leakage_db(ChannelProfile::gaussian(17e9))?;
    outcome(
        r17 <= 0.4 && leak_ideal <= -60.0 && spread < 0.2,
        format!(
            "B=17 ripple {r17:.3} dB (≤ 0.4); leakage {leak_ideal:.1} dB for raised-cosine (≤ −60; Gaussian {leak_gauss:.1}); \
             B=15/17/19 → {r15:.3}/{r17:.3}/{r19:.3}, spread {spread:.3} dB (< 0.2)"
        ),
    )
}

fn c5() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (n_awgs, spacing, b, shift, schedule) in [
        (2, 50e9, 20e9, 15.0, ScanSchedule::parallel(2, 720)?),
        (3, 51e9, 17e9, 20.0, make_time_multiplexed_schedule(3, 720, 20.0)?),
    ] {
        let bk = bank(n_awgs, 8, spacing, ChannelProfile::gaussian(b))?;
        let ring = ring_for(spacing)?;
        let spectrum = flat_input(8, spacing)?;
        let trace = run_scan(&spectrum, &ring, &bk, &schedule, ScanOptions::default())?;
        let lo = HandoverPolicy::shifted(n_awgs, -shift)?;
        let hi = HandoverPolicy::shifted(n_awgs, shift)?;
        for method in [CalibrationMethod::FlatField, CalibrationMethod::Analytic] {
            let cal = Calibration::build(method, spectrum.grid(), &ring, &bk, &schedule, ScanOptions::default())?;
            let d = handover_sensitivity(&trace, &ring, &bk, &cal, RIPPLE_CHANNEL, &lo, &hi)?;
            worst = worst.max(d);
            parts.push(format!("M={n_awgs} ±{shift}° {method:?}: {d:.3}"));
        }
    }
    outcome(worst < 0.1, format!("{} dB (want < 0.1)", parts.join(", ")))
}

fn c6() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut compared = 0usize;
    for case in 0..20 {
        let n_awgs = rng.gen_range(2..=4);
        let n_channels = rng.gen_range(3..=6);
        let spacing = [40e9, 50e9, 51e9][rng.gen_range(0..3)];
        let steps = rng.gen_range(24..=180);
        let seg_deg = 360.0 / n_awgs as f64;
        let tol = rng.gen_range(0.0..(seg_deg / 2.0).min(20.0) - 1e-6);
        let profile = if rng.gen_bool(0.5) {
            ChannelProfile::gaussian(rng.gen_range(0.3..0.5) * spacing)
        } else {
            ChannelProfile::raised_cosine(spacing / n_awgs as f64)
        };
        let bk = bank(n_awgs, n_channels, spacing, profile)?;
        let ring = ring_for(spacing)?;
        let mut spectrum = Spectrum::flat(
            make_grid(F0 - 60e9, F0 + n_channels as f64 * spacing + 60e9, 25e6)?,
            rng.gen_range(1e-15..1e-13),
        )?;
        let lines: Vec<Line> = (0..4)
            .map(|_| Line {
                frequency_hz: F0 + rng.gen_range(0.0..n_channels as f64 * spacing),
                power_w: rng.gen_range(1e-6..1e-3),
            })
            .collect();
        spectrum = spectrum.with_lines(lines)?;
        let threads = Some(rng.gen_range(1..=4));
        let par = run_scan(
            &spectrum,
            &ring,
            &bk,
            &ScanSchedule::parallel(n_awgs, steps)?,
            ScanOptions { threads, noise: None },
        )?;
        let tm_schedule = make_time_multiplexed_schedule(n_awgs, steps, tol)?;
        let tm = run_scan(&spectrum, &ring, &bk, &tm_schedule, ScanOptions::default())?;
        for t in 0..steps {
            for j in 0..n_awgs {
                for m in 0..n_channels {
                    if let Some(p) = tm.get(t, j, m) {
                        if p.to_bits() != par.get(t, j, m).map(f64::to_bits).unwrap_or(u64::MAX) {
                            return outcome(false, format!("case {case}: step {t} AWG {j} ch {m} differs"));
                        }
                        compared += 1;
                    }
                }
            }
        }
    }
    outcome(compared > 0, format!("20 random configs, {compared} shared readings bitwise identical"))
}

fn c7() -> Result<Outcome> {
    let s = preset("detuning.json", None)?;
    let rows = s.execute()?.metrics.detuning;
    let at = |shift: f64| rows.iter().find(|r| (r.shift_hz - shift).abs() < 1.0).cloned();
    let (Some(r21), Some(r25)) = (at(21e9), at(25e9)) else {
        return outcome(false, "detuning rows for 21/25 GHz missing".into());
    };
    let rise = r21.total_ripple_db - r25.total_ripple_db;
    let asym = (r21.first_half_ripple_db - r21.second_half_ripple_db).abs();
    let sym = (r25.first_half_ripple_db - r25.second_half_ripple_db).abs();
    outcome(
        (1.0..=3.0).contains(&rise) && asym > 0.5 && sym < 0.05,
        format!(
            "21 GHz adds {rise:.3} dB (2 ± 1), half-scan difference {asym:.3} dB (> 0.5); 25 GHz halves differ {sym:.2e} dB (< 0.05)"
        ),
    )
}

fn c8() -> Result<Outcome> {
    let s = preset("cyclic_32ch.json", None)?;
    let r = crosstalk_report(&s.ring, &s.bank, s.bank.n_channels() / 2)?;
    outcome(
        (r.neighbour_db - -22.0).abs() <= 1.0 && r.residual_db <= -40.0,
        format!(
            "neighbour reading {:.3} dB (−22 ± 1), residual after correction {:.1} dB (≤ −40)",
            r.neighbour_db, r.residual_db
        ),
    )
}

fn c9() -> Result<Outcome> {
    let s = preset("cyclic_32ch.json", None)?;
    let roll = s.execute()?.metrics.edge_rolloff_db.unwrap_or(f64::NAN);
    outcome((1.5..=2.0).contains(&roll), format!("edge deficit {roll:.3} dB (1.5–2.0)"))
}

fn c10() -> Result<Outcome> {
    let ring = ring_for(50e9)?;
    let bk = bank(2, 12, 50e9, ChannelProfile::gaussian(20e9))?;
    let schedule = ScanSchedule::parallel(2, 720)?;
    let flat = flat_input(12, 50e9)?;
    let flat_rms =
        reconstruction_error(&reconstruct(&flat, &ring, &bk, &schedule, CalibrationMethod::default())?, &flat)?.rms_db;

    let channels = [
        WdmChannel::rectangular(F0 + 112.5e9, 37.5e9, 2e-14),
        WdmChannel::rectangular(F0 + 206.25e9, 62.5e9, 1e-14),
        WdmChannel::rectangular(F0 + 325e9, 75e9, 3e-14),
    ];
    let scene = wdm_spectrum(make_grid(F0 - 100e9, F0 + 700e9, 25e6)?, &channels)?;
    let recon = reconstruct(&scene, &ring, &bk, &schedule, CalibrationMethod::default())?;
    let checks = channel_power_checks(&recon, &channels)?;
    let max_power_err = checks.iter().map(|c| c.error_db.abs()).fold(0.0, f64::max);
    let max_edge_err = checks
        .iter()
        .zip(&channels)
        .map(|(c, ch)| match c.edges_hz {
            Some((lo, hi)) => (lo - (ch.center_hz - ch.bandwidth_hz / 2.0))
                .abs()
                .max((hi - (ch.center_hz + ch.bandwidth_hz / 2.0)).abs()),
            None => f64::INFINITY,
        })
        .fold(0.0, f64::max);
    outcome(
        flat_rms <= 0.05 && max_power_err <= 0.5 && max_edge_err <= FWHM,
        format!(
            "flat rms {flat_rms:.2e} dB (≤ 0.05); flex-grid power error ≤ {max_power_err:.3} dB (≤ 0.5), edge error ≤ {:.3} GHz (≤ 1 RBW = 1.3)",
            max_edge_err / 1e9
        ),
    )
}

fn c11() -> Result<Outcome> {
    let w = ring_for(50e9)?.fwhm()?;
    let rel = (w.fwhm_hz / FWHM - 1.0).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut accepted, mut worst) = (0, 0.0f64);
    while accepted < 50 {
        let ring = RingModel::new(
            rng.gen_range(0.5e-3..6e-3),
            GroupIndex::Constant(rng.gen_range(1.6..2.2)),
            rng.gen_range(0.8..0.999),
            rng.gen_range(0.8..0.999),
            rng.gen_range(0.0..2.0),
            F0,
        )?;
        let numeric = ring.fwhm()?;
        if numeric.finesse <= 10.0 {
            continue;
        }
        accepted += 1;
        worst = worst.max((ring.analytic_fwhm() / numeric.fwhm_hz - 1.0).abs());
    }
    outcome(
        rel <= 1e-3 && (w.finesse - 38.5).abs() < 0.5 && worst < 0.01,
        format!(
            "calibrated FWHM {:.5} GHz (±0.1%), finesse {:.2} (≈ 38.5); analytic vs numeric over 50 rings ≤ {:.3}% (< 1%)",
            w.fwhm_hz / 1e9,
            w.finesse,
            worst * 100.0
        ),
    )
}

fn c12() -> Result<Outcome> {
    let started = Instant::now();
    let one = preset("two_awg_cband.json", Some(1))?.execute()?;
    let elapsed = started.elapsed().as_secs_f64();
    let eight = preset("two_awg_cband.json", Some(8))?.execute()?;
    let identical = one.trace.raw().iter().zip(eight.trace.raw()).all(|(a, b)| a.to_bits() == b.to_bits())
        && one.recon == eight.recon
        && one.metrics == eight.metrics;
    outcome(
        elapsed < 300.0 && identical,
        format!("88 × 2 × 720 single-thread run {elapsed:.1} s (< 300); 1 vs 8 threads identical: {identical}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Result<Outcome>); 12] = [
        ("ring FSR from geometry", c1),
        ("flat-top with raised-cosine pair", c2),
        ("ripple versus passband width", c3),
        ("three-AWG design", c4),
        ("handover insensitivity", c5),
        ("time-multiplexed equals parallel", c6),
        ("inter-AWG detuning", c7),
        ("crosstalk injection and correction", c8),
        ("envelope roll-off", c9),
        ("quantitative reconstruction", c10),
        ("ring resolution", c11),
        ("performance and determinism", c12),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        let t = Instant::now();
        let (pass, detail) = match check() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        println!(
            "criterion {n:2} {}: {name}: {detail} [{:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
        if !pass {
            failed.push(n);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 12 criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
