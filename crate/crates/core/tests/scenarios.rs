//! Scenario files end to end: presets, artifacts, determinism, sweeps.

use std::fs;
use std::path::{Path, PathBuf};

use specmon::awg::{AwgBank, BankLayout, BankSettings, ChannelProfile};
use specmon::scenario::{load_scenario, metrics_from_artifacts, parse_config, sweep, Overrides, Scenario};

fn presets() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn small_json() -> &'static str {
    r#"{
        "id": "small",
        "spectrum": {
            "grid": { "start_hz": 192.9e12, "stop_hz": 193.35e12 },
            "channels": [ { "center_hz": 193.1125e12, "bandwidth_hz": 37.5e9, "psd_w_per_hz": 2e-14, "shape": "rectangular" } ],
            "lines": [ { "frequency_hz": 193.2e12, "power_w": 1e-5 } ]
        },
        "ring": { "fsr_hz": 50e9 },
        "bank": { "n_channels": 6, "first_center_hz": 193.0e12 },
        "schedule": { "mode": "time_multiplexed", "theta_steps": 72, "handover_tolerance_deg": 10 },
        "noise": { "sigma_w": 1e-12 },
        "seed": 7
    }"#
}

fn small() -> Scenario {
    Scenario::build(parse_config(small_json()).unwrap(), PathBuf::new()).unwrap()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap()
}

#[test]
fn presets_validate() {
    for name in ["two_awg_cband.json", "three_awg_cband.json", "cyclic_32ch.json", "detuning.json"] {
        let s = load_scenario(&presets().join(name), &Overrides::default()).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(s.ring.fwhm().unwrap().fwhm_hz > 1.29e9);
    }
}

#[test]
fn artifacts_are_complete_and_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    small().run(a.path()).unwrap();
    let mut again = parse_config(small_json()).unwrap();
    again.threads = Some(3);
    Scenario::build(again, PathBuf::new()).unwrap().run(b.path()).unwrap();
    for f in
        ["trace.csv", "trace.json", "reconstruction.csv", "virtual_channel.csv", "metrics.json", "calibration.json"]
    {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f} differs between runs");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&read(a.path(), "manifest.json")).unwrap();
    assert_eq!(manifest["files"].as_array().unwrap().len(), 7);
    let header = String::from_utf8(read(a.path(), "trace.csv")).unwrap();
    assert!(header.starts_with("theta_rad,awg_index,channel,power_w"));
    let recon = String::from_utf8(read(a.path(), "reconstruction.csv")).unwrap();
    assert!(recon.starts_with("frequency_hz,psd_w_per_hz,virtual_channel,theta_rad,flags"));
}

#[test]
fn seed_changes_noise() {
    let mut other = parse_config(small_json()).unwrap();
    other.seed = 8;
    let a = small().execute().unwrap();
    let b = Scenario::build(other, PathBuf::new()).unwrap().execute().unwrap();
    assert_ne!(a.trace.raw(), b.trace.raw());
}

#[test]
fn effective_config_round_trips() {
    let s = small();
    let echoed = parse_config(&s.effective_config_json().unwrap()).unwrap();
    assert_eq!(echoed, s.config);
}

#[test]
fn metrics_recompute_from_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let result = small().run(dir.path()).unwrap();
    let again = metrics_from_artifacts(dir.path()).unwrap();
    assert_eq!(again.ripple_db, result.metrics.ripple_db);
    assert_eq!(again.rms_error_db, result.metrics.rms_error_db);
}

#[test]
fn sweep_runs_each_value() {
    let dir = tempfile::tempdir().unwrap();
    let values = [serde_json::json!(20e9), serde_json::json!(25e9)];
    let rows = sweep(&small(), "bank.profile.passband_3db_hz", &values, dir.path()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].metrics.ripple_db.unwrap() < rows[0].metrics.ripple_db.unwrap());
    assert!(dir.path().join("sweep.csv").exists());
    assert!(sweep(&small(), "bank.bogus", &values, dir.path()).unwrap_err().is_config());
    assert!(sweep(&small(), "bank.n_channels", &[], dir.path()).is_err());
}

#[test]
fn smatrix_bank_matches_parametric() {
    let layout = BankLayout::canonical(2, 6, 50e9, 193.0e12).unwrap();
    let parametric = AwgBank::parametric(layout, BankSettings::ideal(ChannelProfile::gaussian(20e9))).unwrap();
    let freqs: Vec<f64> = (0..=4500).map(|i| 192.9e12 + i as f64 * 0.1e9).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bank.csv");
    parametric.to_table(&freqs).write(fs::File::create(&path).unwrap()).unwrap();

    let mut config = parse_config(small_json()).unwrap();
    config.noise = None;
    config.schedule.mode = specmon::scan::ScanMode::Parallel;
    let reference = Scenario::build(config.clone(), PathBuf::new()).unwrap().execute().unwrap();
    config.bank.smatrix = Some("bank.csv".into());
    let imported = Scenario::build(config, dir.path().to_path_buf()).unwrap().execute().unwrap();
    let (a, b) = (reference.metrics.ripple_db.unwrap(), imported.metrics.ripple_db.unwrap());
    assert!((a - b).abs() < 0.05, "ripple {a} vs {b}");
}

#[test]
fn overrides_replace_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    fs::write(&path, small_json()).unwrap();
    let o = Overrides { threads: Some(2), grid_step_hz: Some(50e6), theta_steps: Some(36), seed: Some(99) };
    let s = load_scenario(&path, &o).unwrap();
    assert_eq!(s.schedule.thetas().len(), 36);
    assert_eq!(s.spectrum.grid().step(), 50e6);
    assert_eq!(s.config.seed, 99);
}
