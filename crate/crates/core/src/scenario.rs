//! Scenario files: one JSON document describing input, ring, bank, schedule
//! and post-processing, plus the runner that turns it into artifacts.
//!
//! Every field has a default; the effective configuration (defaults filled
//! in, command-line overrides applied) is echoed next to the outputs so a run
//! can be reproduced from its own output directory.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{crosstalk_report, edge_rolloff, full_ripple, reconstruction_error, MetricsReport};
use crate::awg::{import_smatrix, AwgBank, BankLayout, BankSettings, ChannelProfile, SMatrixTable};
use crate::error::{Error, Result};
use crate::reconstruct::{
    calibrate_and_assemble, crosstalk_correct, describe_pair, detuning_study, synthesize_all, Calibration,
    CalibrationMethod, CalibrationOptions, HandoverPolicy, VirtualChannelTrace,
};
use crate::ring::{calibrate_to_fwhm, circumference_for_fsr, GroupIndex, HeaterModel, RingModel};
use crate::scan::{
    make_time_multiplexed_schedule, run_scan, DetectorNoise, ScanMode, ScanOptions, ScanSchedule, DEFAULT_THETA_STEPS,
};
use crate::spectrum::{make_grid, wdm_spectrum, Line, Spectrum, WdmChannel, DEFAULT_GRID_STEP_HZ};

/// Default allowed mismatch between ring FSR and AWG channel spacing.
pub const DEFAULT_FSR_TOLERANCE_HZ: f64 = 0.1e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start_hz: f64,
    pub stop_hz: f64,
    #[serde(default = "default_step")]
    pub step_hz: f64,
}

fn default_step() -> f64 {
    DEFAULT_GRID_STEP_HZ
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumFiles {
    pub psd: PathBuf,
    #[serde(default)]
    pub lines: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub grid: Option<GridConfig>,
    /// Background level added everywhere, W/Hz.
    pub flat_psd_w_per_hz: f64,
    pub channels: Vec<WdmChannel>,
    pub lines: Vec<Line>,
    /// Load the psd (and optional lines) from CSV instead of building it.
    pub file: Option<SpectrumFiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupIndexConfig {
    Constant {
        value: f64,
    },
    /// Quadratic fit through the Si3N4 samples across the C band.
    Dispersive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RingConfig {
    pub circumference_m: Option<f64>,
    /// Alternative to `circumference_m`, using the group index at the reference.
    pub fsr_hz: Option<f64>,
    pub group_index: GroupIndexConfig,
    pub loss_db_per_cm: f64,
    pub loss_slope_db_per_cm_per_nm: f64,
    /// Coupling is solved for this width unless `self_coupling` is given.
    pub fwhm_target_hz: Option<f64>,
    pub self_coupling: Option<(f64, f64)>,
    /// Frequency of comb line 0 at θ = 0; defaults to the first AWG 0 centre.
    pub reference_hz: Option<f64>,
    pub heater: Option<HeaterModel>,
}

impl Default for RingConfig {
    fn default() -> Self {
        Self {
            circumference_m: None,
            fsr_hz: None,
            group_index: GroupIndexConfig::Constant { value: 1.76841 },
            loss_db_per_cm: crate::ring::DEFAULT_LOSS_DB_PER_CM,
            loss_slope_db_per_cm_per_nm: 0.0,
            fwhm_target_hz: Some(1.3e9),
            self_coupling: None,
            reference_hz: None,
            heater: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BankConfig {
    /// S-matrix CSV; when set the parametric fields below are ignored.
    pub smatrix: Option<PathBuf>,
    /// `(awg_index, input_port)` per logical AWG, 1-based, for S-matrix banks.
    pub smatrix_selection: Option<Vec<(usize, usize)>>,
    pub n_awgs: usize,
    pub n_channels: usize,
    pub spacing_hz: f64,
    pub first_center_hz: f64,
    /// Interlace offsets; canonical `j·spacing/M` when absent.
    pub offsets_hz: Option<Vec<f64>>,
    pub detune_hz: Option<Vec<f64>>,
    pub profile: ChannelProfile,
    pub envelope_edge_db: f64,
    pub crosstalk_floor_db: Option<f64>,
    pub awg_fsr_hz: Option<f64>,
}

impl Default for BankConfig {
    fn default() -> Self {
        Self {
            smatrix: None,
            smatrix_selection: None,
            n_awgs: 2,
            n_channels: 88,
            spacing_hz: 50e9,
            first_center_hz: 191.6e12,
            offsets_hz: None,
            detune_hz: None,
            profile: ChannelProfile::gaussian(20e9),
            envelope_edge_db: 0.0,
            crosstalk_floor_db: None,
            awg_fsr_hz: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub mode: ScanMode,
    pub theta_steps: usize,
    /// Widening of each switch window for time-multiplexed acquisition, degrees.
    pub handover_tolerance_deg: f64,
    /// Must equal the bank's AWG count when given.
    pub n_ports: Option<usize>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { mode: ScanMode::Parallel, theta_steps: DEFAULT_THETA_STEPS, handover_tolerance_deg: 15.0, n_ports: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructionConfig {
    pub handover_shift_deg: f64,
    pub calibration: CalibrationMethod,
    pub crosstalk_correction: bool,
    pub theta_jitter_rad: f64,
    /// Virtual channel reported as `ripple_db`; the middle one by default.
    pub ripple_channel: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub sigma_w: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudiesConfig {
    /// Inter-AWG shifts to evaluate (two-AWG banks only).
    pub detuning_shifts_hz: Vec<f64>,
    /// Virtual channel used by the detuning study; the middle one by default.
    pub detuning_channel: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    pub description: String,
    pub spectrum: SpectrumConfig,
    pub ring: RingConfig,
    pub bank: BankConfig,
    pub schedule: ScheduleConfig,
    pub reconstruction: ReconstructionConfig,
    pub noise: Option<NoiseConfig>,
    pub studies: StudiesConfig,
    pub seed: u64,
    pub threads: Option<usize>,
    pub fsr_tolerance_hz: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            id: "scenario".into(),
            description: String::new(),
            spectrum: SpectrumConfig::default(),
            ring: RingConfig::default(),
            bank: BankConfig::default(),
            schedule: ScheduleConfig::default(),
            reconstruction: ReconstructionConfig::default(),
            noise: None,
            studies: StudiesConfig::default(),
            seed: 0,
            threads: None,
            fsr_tolerance_hz: DEFAULT_FSR_TOLERANCE_HZ,
        }
    }
}

/// Command-line values that replace file values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub threads: Option<usize>,
    pub grid_step_hz: Option<f64>,
    pub theta_steps: Option<usize>,
    pub seed: Option<u64>,
}

impl ScenarioConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(t) = o.threads {
            self.threads = Some(t);
        }
        if let (Some(step), Some(grid)) = (o.grid_step_hz, self.spectrum.grid.as_mut()) {
            grid.step_hz = step;
        }
        if let Some(n) = o.theta_steps {
            self.schedule.theta_steps = n;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
    }
}

/// A validated scenario with all models built.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub base_dir: PathBuf,
    pub spectrum: Spectrum,
    pub ring: RingModel,
    pub bank: AwgBank,
    pub schedule: ScanSchedule,
    pub policy: HandoverPolicy,
}

fn cfg(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Parses scenario JSON text; errors carry line and column.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    serde_json::from_str(text).map_err(|e| cfg(format!("scenario does not parse: {e}")))
}

/// Reads, parses and validates a scenario file.
pub fn load_scenario(path: &Path, overrides: &Overrides) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| cfg(format!("cannot read {}: {e}", path.display())))?;
    let mut config = parse_config(&text).map_err(|e| cfg(format!("{}: {e}", path.display())))?;
    config.apply(overrides);
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Scenario::build(config, base)
}

impl Scenario {
    /// Builds every model and runs the cross-checks.
    pub fn build(config: ScenarioConfig, base_dir: PathBuf) -> Result<Self> {
        let bank = build_bank(&config.bank, &base_dir)?;
        let spectrum = build_spectrum(&config.spectrum, &base_dir)?;
        let ring = build_ring(&config.ring, bank.layout())?;
        let schedule = build_schedule(&config.schedule, bank.n_awgs())?;
        let policy = HandoverPolicy::shifted(bank.n_awgs(), config.reconstruction.handover_shift_deg)?;
        let s = Self { config, base_dir, spectrum, ring, bank, schedule, policy };
        s.cross_check()?;
        Ok(s)
    }

    fn cross_check(&self) -> Result<()> {
        let c = &self.config;
        if let Some(n) = c.schedule.n_ports {
            if n != self.bank.n_awgs() {
                return Err(cfg(format!("schedule drives {n} ports but the bank has {} AWGs", self.bank.n_awgs())));
            }
        }
        let layout = self.bank.layout();
        let fsr = self.ring.fsr();
        if !((fsr - layout.spacing_hz).abs() <= c.fsr_tolerance_hz) {
            return Err(cfg(format!(
                "ring FSR {:.4} GHz differs from the AWG channel spacing {:.4} GHz by more than {:.4} GHz",
                fsr / 1e9,
                layout.spacing_hz / 1e9,
                c.fsr_tolerance_hz / 1e9
            )));
        }
        let grid = self.spectrum.grid();
        let (lo, hi) = layout.center_span();
        let lo = lo.min(layout.center(0, 0));
        if grid.start() > lo
            || grid.last() < hi.min(lo + layout.awg_fsr_hz.unwrap_or(f64::INFINITY) - layout.spacing_hz)
        {
            return Err(cfg(format!(
                "spectrum grid [{:.4}, {:.4}] THz does not cover the bank centres [{:.4}, {:.4}] THz",
                grid.start() / 1e12,
                grid.last() / 1e12,
                lo / 1e12,
                hi / 1e12
            )));
        }
        if c.schedule.mode == ScanMode::TimeMultiplexed
            && c.reconstruction.handover_shift_deg.abs() > c.schedule.handover_tolerance_deg
        {
            return Err(cfg(format!(
                "handover shift {}° exceeds the acquisition tolerance {}°",
                c.reconstruction.handover_shift_deg, c.schedule.handover_tolerance_deg
            )));
        }
        if let Some(m) = c.reconstruction.ripple_channel {
            if m >= layout.n_channels {
                return Err(cfg(format!("ripple channel {m} outside the {} channels", layout.n_channels)));
            }
        }
        if !c.studies.detuning_shifts_hz.is_empty() && layout.n_awgs != 2 {
            return Err(cfg("detuning study needs a two-AWG bank"));
        }
        if let Ok(w) = self.ring.fwhm() {
            if !grid.resolves(w.fwhm_hz) {
                log::warn!(
                    "grid step {} Hz does not resolve the {:.3} GHz resonance (needs ≤ FWHM/16)",
                    grid.step(),
                    w.fwhm_hz / 1e9
                );
            }
        }
        Ok(())
    }

    pub fn ripple_channel(&self) -> usize {
        self.config.reconstruction.ripple_channel.unwrap_or(self.bank.n_channels() / 2)
    }

    fn scan_options(&self) -> ScanOptions {
        ScanOptions {
            threads: self.config.threads,
            noise: self.config.noise.as_ref().map(|n| DetectorNoise { sigma_w: n.sigma_w, seed: self.config.seed }),
        }
    }

    /// Runs the whole pipeline in memory.
    pub fn execute(&self) -> Result<RunResult> {
        let options = self.scan_options();
        let mut trace = run_scan(&self.spectrum, &self.ring, &self.bank, &self.schedule, options)?;
        trace.metadata = serde_json::json!({ "scenario_id": self.config.id, "seed": self.config.seed });
        let used = if self.config.reconstruction.crosstalk_correction {
            crosstalk_correct(&trace, &self.bank)
        } else {
            trace.clone()
        };
        let calibration = Calibration::build(
            self.config.reconstruction.calibration,
            self.spectrum.grid(),
            &self.ring,
            &self.bank,
            &self.schedule,
            ScanOptions { noise: None, ..options },
        )?;
        let virtual_channels = synthesize_all(&used, self.bank.layout(), &self.policy)?;
        let recon = calibrate_and_assemble(
            &virtual_channels,
            &self.ring,
            &self.bank,
            &calibration,
            CalibrationOptions {
                theta_jitter_rad: self.config.reconstruction.theta_jitter_rad,
                seed: self.config.seed,
            },
        )?;
        let ripple_channel = self.ripple_channel();
        let ripple_db = full_ripple(&virtual_channels[ripple_channel]).ok();
        let errors = reconstruction_error(&recon, &self.spectrum).ok();
        let edge_rolloff_db = if self.bank.layout().is_cyclic() { edge_rolloff(&recon).ok() } else { None };
        let crosstalk_residual_db = match (self.bank.crosstalk_floor_linear() > 0.0, self.bank.n_channels() >= 3) {
            (true, true) => Some(crosstalk_report(&self.ring, &self.bank, self.bank.n_channels() / 2)?.residual_db),
            _ => None,
        };
        let detuning_channel = self.config.studies.detuning_channel.unwrap_or(self.bank.n_channels() / 2);
        let detuning = self
            .config
            .studies
            .detuning_shifts_hz
            .iter()
            .map(|&s| {
                detuning_study(&self.spectrum, &self.ring, &self.bank, s, &self.schedule, detuning_channel, options)
            })
            .collect::<Result<Vec<_>>>()?;
        let metrics = MetricsReport {
            scenario_id: self.config.id.clone(),
            ripple_db,
            edge_rolloff_db,
            rms_error_db: errors.as_ref().map(|e| e.rms_db),
            max_error_db: errors.as_ref().map(|e| e.max_db),
            crosstalk_residual_db,
            detuning,
        };
        Ok(RunResult { trace, virtual_channel: virtual_channels[ripple_channel].clone(), recon, metrics })
    }

    /// Runs the pipeline and writes all artifacts into `out`.
    pub fn run(&self, out: &Path) -> Result<RunResult> {
        let result = self.execute()?;
        write_artifacts(self, &result, out)?;
        Ok(result)
    }

    pub fn effective_config_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.config)?)
    }
}

/// In-memory outputs of one run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub trace: crate::scan::DetectorTrace,
    pub virtual_channel: VirtualChannelTrace,
    pub recon: crate::reconstruct::ReconstructedSpectrum,
    pub metrics: MetricsReport,
}

fn build_spectrum(c: &SpectrumConfig, base: &Path) -> Result<Spectrum> {
    let spectrum = match (&c.file, &c.grid) {
        (Some(_), Some(_)) => return Err(cfg("spectrum: give either `grid` or `file`, not both")),
        (None, None) => return Err(cfg("spectrum: a `grid` or a `file` is required")),
        (Some(files), None) => {
            let psd = File::open(base.join(&files.psd))?;
            let lines = files.lines.as_ref().map(|p| File::open(base.join(p))).transpose()?;
            Spectrum::read_csv(BufReader::new(psd), lines.map(BufReader::new))?
        }
        (None, Some(g)) => {
            let grid = make_grid(g.start_hz, g.stop_hz, g.step_hz)?;
            wdm_spectrum(grid, &c.channels)?
        }
    };
    let flat = if c.flat_psd_w_per_hz != 0.0 {
        spectrum.add(&Spectrum::flat(*spectrum.grid(), c.flat_psd_w_per_hz)?)?
    } else {
        spectrum
    };
    flat.with_lines(c.lines.iter().copied())
}

fn build_ring(c: &RingConfig, layout: &BankLayout) -> Result<RingModel> {
    let reference = c.reference_hz.unwrap_or_else(|| layout.center(0, 0));
    let group_index = match c.group_index {
        GroupIndexConfig::Constant { value } => GroupIndex::Constant(value),
        GroupIndexConfig::Dispersive => GroupIndex::design(),
    };
    let circumference = match (c.circumference_m, c.fsr_hz) {
        (Some(l), None) => l,
        (None, Some(fsr)) => circumference_for_fsr(group_index.evaluate(reference).0, fsr)?,
        (Some(_), Some(_)) => return Err(cfg("ring: give either `circumference_m` or `fsr_hz`, not both")),
        (None, None) => return Err(cfg("ring: `circumference_m` or `fsr_hz` is required")),
    };
    let (r1, r2) = c.self_coupling.unwrap_or((0.9, 0.9));
    let template = RingModel::new(circumference, group_index, r1, r2, c.loss_db_per_cm, reference)?
        .with_loss_slope(c.loss_slope_db_per_cm_per_nm)?;
    match (c.fwhm_target_hz, c.self_coupling) {
        (Some(_), Some(_)) => Err(cfg("ring: give either `fwhm_target_hz` or `self_coupling`, not both")),
        (Some(target), None) => calibrate_to_fwhm(target, &template),
        (None, _) => Ok(template),
    }
}

fn build_bank(c: &BankConfig, base: &Path) -> Result<AwgBank> {
    if let Some(path) = &c.smatrix {
        let file = File::open(base.join(path))
            .map_err(|e| cfg(format!("cannot open S-matrix {}: {e}", base.join(path).display())))?;
        return match &c.smatrix_selection {
            None => import_smatrix(BufReader::new(file)),
            Some(sel) => {
                let table = SMatrixTable::read(BufReader::new(file))?;
                let zero_based: Vec<(usize, usize)> = sel
                    .iter()
                    .map(|&(a, p)| {
                        if a == 0 || p == 0 {
                            Err(cfg("S-matrix selection indices are 1-based"))
                        } else {
                            Ok((a - 1, p - 1))
                        }
                    })
                    .collect::<Result<_>>()?;
                AwgBank::from_table(&table, &zero_based)
            }
        };
    }
    let mut layout = BankLayout::canonical(c.n_awgs, c.n_channels, c.spacing_hz, c.first_center_hz)?;
    if let Some(o) = &c.offsets_hz {
        layout.offsets_hz = o.clone();
    }
    if let Some(d) = &c.detune_hz {
        layout.detune_hz = d.clone();
    }
    layout.validate()?;
    if let Some(fsr) = c.awg_fsr_hz {
        layout = layout.cyclic(fsr)?;
    }
    AwgBank::parametric(
        layout,
        BankSettings {
            profile: c.profile,
            envelope_edge_db: c.envelope_edge_db,
            crosstalk_floor_db: c.crosstalk_floor_db,
        },
    )
}

fn build_schedule(c: &ScheduleConfig, n_awgs: usize) -> Result<ScanSchedule> {
    if c.theta_steps == 0 {
        return Err(Error::InvalidSchedule("theta_steps must be positive".into()));
    }
    match c.mode {
        ScanMode::Parallel => ScanSchedule::parallel(n_awgs, c.theta_steps),
        ScanMode::TimeMultiplexed => make_time_multiplexed_schedule(n_awgs, c.theta_steps, c.handover_tolerance_deg),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_file(out: &Path, name: &str, bytes: &[u8], manifest: &mut Vec<serde_json::Value>) -> Result<()> {
    fs::write(out.join(name), bytes)?;
    manifest.push(serde_json::json!({ "path": name, "sha256": sha256_hex(bytes) }));
    Ok(())
}

fn write_virtual_channel<W: Write>(v: &VirtualChannelTrace, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["theta_rad", "power_w", "pair", "segment", "flags"])?;
    for s in &v.samples {
        w.write_record([
            s.theta.to_string(),
            s.power_w.to_string(),
            describe_pair(&s.pair),
            s.pair.segment.to_string(),
            if s.partial { "partial".into() } else { String::new() },
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes trace, reconstruction, metrics, effective config and manifest.
pub fn write_artifacts(s: &Scenario, r: &RunResult, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let mut files = Vec::new();
    let config = s.effective_config_json()?;
    write_file(out, "config.json", config.as_bytes(), &mut files)?;

    let mut buf = Vec::new();
    r.trace.write_csv(&mut buf)?;
    write_file(out, "trace.csv", &buf, &mut files)?;
    buf.clear();
    r.trace.write_sidecar(&mut buf)?;
    write_file(out, "trace.json", &buf, &mut files)?;
    buf.clear();
    r.recon.write_csv(&mut buf)?;
    write_file(out, "reconstruction.csv", &buf, &mut files)?;
    buf.clear();
    write_virtual_channel(&r.virtual_channel, &mut buf)?;
    write_file(out, "virtual_channel.csv", &buf, &mut files)?;
    let metrics = serde_json::to_vec_pretty(&r.metrics)?;
    write_file(out, "metrics.json", &metrics, &mut files)?;
    let calibration = serde_json::to_vec_pretty(&r.recon.calibration)?;
    write_file(out, "calibration.json", &calibration, &mut files)?;

    let manifest = serde_json::json!({
        "tool": "specmon",
        "version": env!("CARGO_PKG_VERSION"),
        "scenario_id": s.config.id,
        "config_sha256": sha256_hex(config.as_bytes()),
        "seed": s.config.seed,
        "files": files,
    });
    let mut w = BufWriter::new(File::create(out.join("manifest.json"))?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.flush()?;
    Ok(())
}

/// Sets the value at a dotted path (`bank.profile.passband_3db_hz`) in `doc`.
/// Array elements are addressed by index (`studies.detuning_shifts_hz.0`).
pub fn set_path(doc: &mut serde_json::Value, path: &str, value: serde_json::Value) -> Result<()> {
    if path.is_empty() {
        return Err(cfg("empty parameter path"));
    }
    let mut node = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, key) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        let next = match node {
            serde_json::Value::Object(map) => map.get_mut(*key),
            serde_json::Value::Array(items) => key.parse::<usize>().ok().and_then(|k| items.get_mut(k)),
            _ => None,
        };
        let Some(next) = next else {
            return Err(cfg(format!("unknown parameter path `{path}` (no `{key}`)")));
        };
        if last {
            *next = value;
            return Ok(());
        }
        node = next;
    }
    unreachable!("loop returns on the last component")
}

/// One row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: serde_json::Value,
    pub directory: String,
    pub metrics: MetricsReport,
}

/// Runs `base` once per value of the parameter at `path`, each into
/// `out/<index>_<value>/`, and writes `sweep.json` plus `sweep.csv`.
pub fn sweep(base: &Scenario, path: &str, values: &[serde_json::Value], out: &Path) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(cfg("sweep needs at least one value"));
    }
    let doc = serde_json::to_value(&base.config)?;
    // Resolve the path once up front so typos fail before any work is done.
    set_path(&mut doc.clone(), path, values[0].clone())?;
    fs::create_dir_all(out)?;
    let mut rows = Vec::with_capacity(values.len());
    for (i, v) in values.iter().enumerate() {
        let mut d = doc.clone();
        set_path(&mut d, path, v.clone())?;
        let mut config: ScenarioConfig =
            serde_json::from_value(d).map_err(|e| cfg(format!("value {v} for `{path}`: {e}")))?;
        config.id = format!("{}[{path}={v}]", base.config.id);
        let scenario = Scenario::build(config, base.base_dir.clone())?;
        let label: String =
            v.to_string().chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' }).collect();
        let dir = format!("{i:02}_{label}");
        let result = scenario.run(&out.join(&dir))?;
        rows.push(SweepRow { value: v.clone(), directory: dir, metrics: result.metrics });
    }
    fs::write(out.join("sweep.json"), serde_json::to_vec_pretty(&rows)?)?;
    let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
    w.write_record(["value", "ripple_db", "edge_rolloff_db", "rms_error_db", "max_error_db", "crosstalk_residual_db"])?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in &rows {
        let m = &r.metrics;
        w.write_record([
            r.value.to_string(),
            opt(m.ripple_db),
            opt(m.edge_rolloff_db),
            opt(m.rms_error_db),
            opt(m.max_error_db),
            opt(m.crosstalk_residual_db),
        ])?;
    }
    w.flush()?;
    Ok(rows)
}

/// Recomputes metrics from a saved run directory.
pub fn metrics_from_artifacts(dir: &Path) -> Result<MetricsReport> {
    let config = parse_config(&fs::read_to_string(dir.join("config.json"))?)?;
    let scenario = Scenario::build(config, dir.to_path_buf())?;
    let trace = crate::scan::DetectorTrace::read(
        BufReader::new(File::open(dir.join("trace.csv"))?),
        BufReader::new(File::open(dir.join("trace.json"))?),
    )?;
    let recon = crate::reconstruct::ReconstructedSpectrum::read_csv(BufReader::new(File::open(
        dir.join("reconstruction.csv"),
    )?))?;
    let used = if scenario.config.reconstruction.crosstalk_correction {
        crosstalk_correct(&trace, &scenario.bank)
    } else {
        trace
    };
    let vs = synthesize_all(&used, scenario.bank.layout(), &scenario.policy)?;
    let errors = reconstruction_error(&recon, &scenario.spectrum).ok();
    let saved: Option<MetricsReport> =
        fs::read(dir.join("metrics.json")).ok().and_then(|b| serde_json::from_slice(&b).ok());
    Ok(MetricsReport {
        scenario_id: scenario.config.id.clone(),
        ripple_db: full_ripple(&vs[scenario.ripple_channel()]).ok(),
        edge_rolloff_db: if scenario.bank.layout().is_cyclic() { edge_rolloff(&recon).ok() } else { None },
        rms_error_db: errors.as_ref().map(|e| e.rms_db),
        max_error_db: errors.as_ref().map(|e| e.max_db),
        crosstalk_residual_db: saved.as_ref().and_then(|m| m.crosstalk_residual_db),
        detuning: saved.map(|m| m.detuning).unwrap_or_default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        parse_config(
            r#"{
            "id": "small",
            "spectrum": { "grid": { "start_hz": 192.95e12, "stop_hz": 193.25e12 }, "flat_psd_w_per_hz": 1e-14 },
            "ring": { "fsr_hz": 50e9 },
            "bank": { "n_channels": 4, "first_center_hz": 193.0e12 },
            "schedule": { "theta_steps": 36 }
        }"#,
        )
        .unwrap()
    }

    #[test]
    fn defaults_are_filled() {
        let c = small();
        assert_eq!(c.bank.n_awgs, 2);
        assert_eq!(c.schedule.theta_steps, 36);
        assert_eq!(c.fsr_tolerance_hz, 0.1e9);
        let echoed = serde_json::to_string(&c).unwrap();
        assert!(echoed.contains("\"fsr_tolerance_hz\""));
        assert_eq!(parse_config(&echoed).unwrap(), c);
    }

    #[test]
    fn fsr_mismatch_is_rejected() {
        let mut c = small();
        c.bank.spacing_hz = 51e9;
        let err = Scenario::build(c, PathBuf::new()).unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("FSR"), "{err}");
    }

    #[test]
    fn parse_error_has_position() {
        let err = parse_config("{\n \"id\": 3,\n}").unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
        let unknown = parse_config(r#"{"bogus": 1}"#).unwrap_err();
        assert!(unknown.to_string().contains("bogus"));
    }

    #[test]
    fn grid_must_cover_bank() {
        let mut c = small();
        c.bank.n_channels = 12;
        assert!(Scenario::build(c, PathBuf::new()).unwrap_err().to_string().contains("cover"));
    }

    #[test]
    fn dotted_paths() {
        let mut doc = serde_json::to_value(small()).unwrap();
        set_path(&mut doc, "bank.profile.passband_3db_hz", serde_json::json!(25e9)).unwrap();
        assert_eq!(doc["bank"]["profile"]["passband_3db_hz"], serde_json::json!(25e9));
        assert!(set_path(&mut doc, "bank.nope", serde_json::json!(1)).is_err());
        assert!(set_path(&mut doc, "", serde_json::json!(1)).is_err());
    }

    #[test]
    fn runs_end_to_end() {
        let s = Scenario::build(small(), PathBuf::new()).unwrap();
        let r = s.execute().unwrap();
        assert!(r.metrics.ripple_db.unwrap() > 0.0);
        assert!(r.metrics.rms_error_db.unwrap() < 1e-6);
    }
}
