//! Frequency grids, sampled power spectra and dB conversions.
//!
//! Frequency in Hz is the canonical axis everywhere in the crate. Wavelength
//! only shows up at I/O boundaries through [`wavelength_to_frequency`].
//! Monochromatic lines are kept apart from the sampled PSD so their power is
//! booked exactly instead of being smeared over one grid cell.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default sampling step, 25 MHz (about 50 samples across a 1.3 GHz resonance).
pub const DEFAULT_GRID_STEP_HZ: f64 = 25e6;

/// Converts a vacuum wavelength in metres to frequency in Hz.
pub fn wavelength_to_frequency(wavelength_m: f64) -> f64 {
    SPEED_OF_LIGHT / wavelength_m
}

/// Converts a frequency in Hz to vacuum wavelength in metres.
pub fn frequency_to_wavelength(frequency_hz: f64) -> f64 {
    SPEED_OF_LIGHT / frequency_hz
}

/// Uniformly sampled frequency window `[start, start + (count-1)*step]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    start: f64,
    stop: f64,
    step: f64,
    count: usize,
}

impl FrequencyGrid {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidGrid(format!("step must be positive, got {step}")));
        }
        if !(start.is_finite() && stop.is_finite()) || stop <= start {
            return Err(Error::InvalidGrid(format!("stop ({stop}) must exceed start ({start})")));
        }
        // Tolerate representation error so that e.g. 100 GHz / 25 MHz gives 4000 intervals.
        let intervals = ((stop - start) / step + 1e-9).floor() as usize;
        Ok(Self { start, stop, step, count: intervals + 1 })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn stop(&self) -> f64 {
        self.stop
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Last sampled frequency (may sit below `stop` when the span is not a multiple of `step`).
    pub fn last(&self) -> f64 {
        self.frequency(self.count - 1)
    }

    pub fn span(&self) -> f64 {
        self.last() - self.start
    }

    #[inline]
    pub fn frequency(&self, index: usize) -> f64 {
        self.start + index as f64 * self.step
    }

    pub fn frequencies(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.count).map(move |i| self.frequency(i))
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.start && f <= self.last()
    }

    /// Index range `[lo, hi)` of samples falling inside `[f_lo, f_hi]`, clipped to the grid.
    pub fn index_range(&self, f_lo: f64, f_hi: f64) -> std::ops::Range<usize> {
        if f_hi < self.start || f_lo > self.last() || f_hi < f_lo {
            return 0..0;
        }
        let lo = ((f_lo - self.start) / self.step).ceil().max(0.0) as usize;
        let hi = (((f_hi - self.start) / self.step).floor() as usize + 1).min(self.count);
        lo.min(hi)..hi
    }

    /// Checks the sampling rule used for scan integration: `step <= fwhm / 16`.
    pub fn resolves(&self, fwhm_hz: f64) -> bool {
        self.step <= fwhm_hz / 16.0
    }
}

/// Convenience constructor mirroring [`FrequencyGrid::new`].
pub fn make_grid(start: f64, stop: f64, step: f64) -> Result<FrequencyGrid> {
    FrequencyGrid::new(start, stop, step)
}

/// A monochromatic component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub frequency_hz: f64,
    pub power_w: f64,
}

/// Sampled power spectral density plus optional discrete lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: FrequencyGrid,
    psd: Vec<f64>,
    lines: Vec<Line>,
}

impl Spectrum {
    pub fn new(grid: FrequencyGrid, psd: Vec<f64>, lines: Vec<Line>) -> Result<Self> {
        if psd.len() != grid.count() {
            return Err(Error::InvalidSpectrum(format!("psd has {} samples, grid has {}", psd.len(), grid.count())));
        }
        if let Some(bad) = psd.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidSpectrum(format!("psd value {bad} is not a finite non-negative number")));
        }
        for line in &lines {
            if !(line.power_w.is_finite() && line.power_w >= 0.0 && line.frequency_hz.is_finite()) {
                return Err(Error::InvalidSpectrum(format!("bad line {line:?}")));
            }
        }
        Ok(Self { grid, psd, lines })
    }

    pub fn zeros(grid: FrequencyGrid) -> Self {
        Self { grid, psd: vec![0.0; grid.count()], lines: Vec::new() }
    }

    /// White input at `level` W/Hz over the whole grid.
    pub fn flat(grid: FrequencyGrid, level: f64) -> Result<Self> {
        Self::new(grid, vec![level; grid.count()], Vec::new())
    }

    pub fn with_lines(mut self, lines: impl IntoIterator<Item = Line>) -> Result<Self> {
        self.lines.extend(lines);
        Self::new(self.grid, self.psd, self.lines)
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn psd(&self) -> &[f64] {
        &self.psd
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    /// `Σ psd·step + Σ line power`.
    pub fn total_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.grid.step() + self.lines.iter().map(|l| l.power_w).sum::<f64>()
    }

    /// Linear interpolation of the sampled PSD; zero outside the grid.
    pub fn psd_at(&self, f: f64) -> f64 {
        let g = &self.grid;
        if !g.contains(f) {
            return 0.0;
        }
        let x = (f - g.start()) / g.step();
        let i = (x.floor() as usize).min(g.count() - 1);
        if i + 1 >= g.count() {
            return self.psd[i];
        }
        let t = x - i as f64;
        self.psd[i] * (1.0 - t) + self.psd[i + 1] * t
    }

    /// Pointwise sum of two spectra on the same grid.
    pub fn add(&self, other: &Spectrum) -> Result<Spectrum> {
        if self.grid != other.grid {
            return Err(Error::InvalidSpectrum("grids differ".into()));
        }
        let psd = self.psd.iter().zip(&other.psd).map(|(a, b)| a + b).collect();
        let lines = self.lines.iter().chain(&other.lines).copied().collect();
        Spectrum::new(self.grid, psd, lines)
    }

    pub fn scaled(&self, alpha: f64) -> Result<Spectrum> {
        let psd = self.psd.iter().map(|v| v * alpha).collect();
        let lines =
            self.lines.iter().map(|l| Line { frequency_hz: l.frequency_hz, power_w: l.power_w * alpha }).collect();
        Spectrum::new(self.grid, psd, lines)
    }

    /// Same content translated by `shift_hz` (grid kept; samples shifted by whole steps).
    pub fn shifted_by_steps(&self, steps: isize) -> Spectrum {
        let n = self.psd.len() as isize;
        let psd = (0..n)
            .map(|i| {
                let src = i - steps;
                if (0..n).contains(&src) {
                    self.psd[src as usize]
                } else {
                    0.0
                }
            })
            .collect();
        let df = steps as f64 * self.grid.step();
        let lines = self.lines.iter().map(|l| Line { frequency_hz: l.frequency_hz + df, power_w: l.power_w }).collect();
        Spectrum { grid: self.grid, psd, lines }
    }

    /// Writes the PSD as `frequency_hz,psd_w_per_hz`.
    pub fn write_psd_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["frequency_hz", "psd_w_per_hz"])?;
        for (f, p) in self.grid.frequencies().zip(&self.psd) {
            w.write_record([f.to_string(), p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the lines as `frequency_hz,power_w`.
    pub fn write_lines_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["frequency_hz", "power_w"])?;
        for l in &self.lines {
            w.write_record([l.frequency_hz.to_string(), l.power_w.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a PSD CSV (and optional line CSV). The grid is recovered from the
    /// frequency column, which must be uniformly spaced.
    pub fn read_csv<R: Read, L: Read>(psd: R, lines: Option<L>) -> Result<Spectrum> {
        let mut freqs = Vec::new();
        let mut values = Vec::new();
        let mut rdr = csv::Reader::from_reader(psd);
        check_header(rdr.headers()?, &["frequency_hz", "psd_w_per_hz"])?;
        for rec in rdr.records() {
            let rec = rec?;
            freqs.push(parse_field(&rec, 0)?);
            values.push(parse_field(&rec, 1)?);
        }
        if freqs.len() < 2 {
            return Err(Error::InvalidSpectrum("spectrum file needs at least two rows".into()));
        }
        let step = (freqs[freqs.len() - 1] - freqs[0]) / (freqs.len() - 1) as f64;
        for (i, f) in freqs.iter().enumerate() {
            if (f - (freqs[0] + i as f64 * step)).abs() > step * 1e-6 {
                return Err(Error::InvalidSpectrum(format!("row {} breaks uniform spacing", i + 2)));
            }
        }
        let grid = FrequencyGrid::new(freqs[0], freqs[freqs.len() - 1], step)?;
        let mut lines_out = Vec::new();
        if let Some(lines) = lines {
            let mut rdr = csv::Reader::from_reader(lines);
            check_header(rdr.headers()?, &["frequency_hz", "power_w"])?;
            for rec in rdr.records() {
                let rec = rec?;
                lines_out.push(Line { frequency_hz: parse_field(&rec, 0)?, power_w: parse_field(&rec, 1)? });
            }
        }
        // Recovered grid may lose the last row to rounding.
        values.truncate(grid.count());
        Spectrum::new(grid, values, lines_out)
    }
}

pub(crate) fn check_header(headers: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Format(format!("expected header {:?}, found {:?}", expected, got)));
    }
    Ok(())
}

pub(crate) fn parse_field(rec: &csv::StringRecord, idx: usize) -> Result<f64> {
    let line = rec.position().map(|p| p.line()).unwrap_or(0);
    let raw = rec.get(idx).ok_or_else(|| Error::Format(format!("line {line}: missing column {idx}")))?;
    raw.trim().parse::<f64>().map_err(|e| Error::Format(format!("line {line}: cannot parse {raw:?}: {e}")))
}

/// WDM channel shape used by [`wdm_spectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelShape {
    Rectangular,
    /// Gaussian whose FWHM equals the channel bandwidth.
    Gaussian,
}

/// One WDM channel: centre, occupied bandwidth, PSD level and shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WdmChannel {
    pub center_hz: f64,
    pub bandwidth_hz: f64,
    pub psd_w_per_hz: f64,
    pub shape: ChannelShape,
}

impl WdmChannel {
    pub fn rectangular(center_hz: f64, bandwidth_hz: f64, psd_w_per_hz: f64) -> Self {
        Self { center_hz, bandwidth_hz, psd_w_per_hz, shape: ChannelShape::Rectangular }
    }

    fn value(&self, f: f64) -> f64 {
        let x = f - self.center_hz;
        match self.shape {
            ChannelShape::Rectangular => {
                if x.abs() <= 0.5 * self.bandwidth_hz {
                    self.psd_w_per_hz
                } else {
                    0.0
                }
            }
            ChannelShape::Gaussian => {
                let u = x / self.bandwidth_hz;
                self.psd_w_per_hz * (-4.0 * std::f64::consts::LN_2 * u * u).exp()
            }
        }
    }
}

/// Superposes the given channels on `grid`. Centres may sit anywhere in the
/// window (flex-grid placement); nothing snaps to an ITU grid.
pub fn wdm_spectrum(grid: FrequencyGrid, channels: &[WdmChannel]) -> Result<Spectrum> {
    let mut psd = vec![0.0; grid.count()];
    for ch in channels {
        if !grid.contains(ch.center_hz) {
            return Err(Error::InvalidSpectrum(format!(
                "channel centre {} Hz is outside [{}, {}]",
                ch.center_hz,
                grid.start(),
                grid.last()
            )));
        }
        if !(ch.bandwidth_hz > 0.0 && ch.psd_w_per_hz >= 0.0) {
            return Err(Error::InvalidSpectrum(format!("bad channel {ch:?}")));
        }
        let reach = match ch.shape {
            ChannelShape::Rectangular => 0.5 * ch.bandwidth_hz,
            ChannelShape::Gaussian => 4.0 * ch.bandwidth_hz,
        };
        for i in grid.index_range(ch.center_hz - reach, ch.center_hz + reach) {
            psd[i] += ch.value(grid.frequency(i));
        }
    }
    Spectrum::new(grid, psd, Vec::new())
}

/// Power ratio in decibels.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct PowerDb(pub f64);

impl PowerDb {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn to_linear(self) -> f64 {
        lin(self)
    }
}

/// `10·log10(linear)`; fails for non-positive input.
pub fn db(linear: f64) -> Result<PowerDb> {
    if !(linear > 0.0) || !linear.is_finite() {
        return Err(Error::Domain(format!("db() needs a positive finite ratio, got {linear}")));
    }
    Ok(PowerDb(10.0 * linear.log10()))
}

pub fn lin(value: PowerDb) -> f64 {
    10f64.powf(value.0 / 10.0)
}

/// dB of a power floored at `floor` (used for reporting on dark channels).
pub fn db_floored(linear: f64, floor: f64) -> f64 {
    10.0 * linear.max(floor).log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_count_is_inclusive() {
        let g = make_grid(193.0e12, 193.1e12, 25e6).unwrap();
        assert_eq!(g.count(), 4001);
        assert!((g.last() - 193.1e12).abs() < 1.0);
    }

    #[test]
    fn c_band_grid_spans_4_4_thz() {
        let g = make_grid(191.56e12, 195.96e12, 25e6).unwrap();
        assert!((g.span() - 4.4e12).abs() < 25e6);
    }

    #[test]
    fn grid_rejects_bad_bounds() {
        assert!(make_grid(1.0, 0.5, 1.0).is_err());
        assert!(make_grid(0.0, 1.0, 0.0).is_err());
        assert!(make_grid(0.0, 1.0, -1.0).is_err());
        assert!(make_grid(1.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn index_range_clips() {
        let g = make_grid(0.0, 10.0, 1.0).unwrap();
        assert_eq!(g.index_range(2.5, 4.0), 3..5);
        assert_eq!(g.index_range(-5.0, 1.0), 0..2);
        assert_eq!(g.index_range(9.5, 50.0), 10..11);
        assert_eq!(g.index_range(11.0, 50.0), 0..0);
    }

    #[test]
    fn empty_channel_list_is_dark() {
        let g = make_grid(193.0e12, 193.1e12, 25e6).unwrap();
        let s = wdm_spectrum(g, &[]).unwrap();
        assert!(s.psd().iter().all(|&v| v == 0.0));
        assert_eq!(s.total_power(), 0.0);
    }

    #[test]
    fn rectangular_channel_area() {
        let g = make_grid(193.0e12, 193.2e12, 25e6).unwrap();
        let s0 = 1e-14;
        let s = wdm_spectrum(g, &[WdmChannel::rectangular(193.1e12, 37.5e9, s0)]).unwrap();
        let expected = s0 * 37.5e9;
        let err = (s.total_power() - expected).abs();
        assert!(err <= s0 * g.step() * 1.000001, "{err} vs {}", s0 * g.step());
    }

    #[test]
    fn channel_outside_window_is_rejected() {
        let g = make_grid(193.0e12, 193.1e12, 25e6).unwrap();
        let err = wdm_spectrum(g, &[WdmChannel::rectangular(194.0e12, 10e9, 1.0)]);
        assert!(err.is_err());
    }

    #[test]
    fn fixed_grid_plan_has_disjoint_supports() {
        let g = make_grid(191.5e12, 196.0e12, 25e6).unwrap();
        let channels: Vec<_> =
            (0..88).map(|k| WdmChannel::rectangular(191.6e12 + k as f64 * 50e9, 37.5e9, 1e-14)).collect();
        // Direct scan: every sample belongs to at most one channel's support.
        let mut owner = vec![None; g.count()];
        for (k, ch) in channels.iter().enumerate() {
            let single = wdm_spectrum(g, std::slice::from_ref(ch)).unwrap();
            for (i, v) in single.psd().iter().enumerate() {
                if *v > 0.0 {
                    assert!(owner[i].is_none(), "sample {i} claimed by {:?} and {k}", owner[i]);
                    owner[i] = Some(k);
                }
            }
        }
        let all = wdm_spectrum(g, &channels).unwrap();
        for (i, v) in all.psd().iter().enumerate() {
            assert_eq!(*v > 0.0, owner[i].is_some());
        }
    }

    #[test]
    fn db_values() {
        assert_eq!(db(1.0).unwrap().value(), 0.0);
        assert!((db(0.5).unwrap().value() + 3.0103).abs() < 1e-4);
        let x = 7.3e-4;
        assert!((lin(db(x).unwrap()) - x).abs() / x < 1e-12);
        assert!(db(0.0).is_err());
        assert!(db(-1.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let g = make_grid(193.0e12, 193.001e12, 25e6).unwrap();
        let s = wdm_spectrum(g, &[WdmChannel::rectangular(193.0005e12, 0.5e9, 3.5e-14)])
            .unwrap()
            .with_lines([Line { frequency_hz: 193.0002e12, power_w: 1e-3 }])
            .unwrap();
        let mut psd = Vec::new();
        let mut lines = Vec::new();
        s.write_psd_csv(&mut psd).unwrap();
        s.write_lines_csv(&mut lines).unwrap();
        let back = Spectrum::read_csv(psd.as_slice(), Some(lines.as_slice())).unwrap();
        assert_eq!(back.psd(), s.psd());
        assert_eq!(back.lines(), s.lines());
        assert_eq!(back.grid().count(), g.count());
    }
}
