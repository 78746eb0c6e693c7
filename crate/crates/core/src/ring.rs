//! Tunable add-drop ring resonator: the high-resolution comb filter.
//!
//! The round-trip phase is built from the group index,
//! `φ(f, θ) = 2π·(l/c)·∫_{f_ref}^{f} n_g(ν) dν − θ`, so that the local comb
//! period is exactly `c / (n_g(f)·l)` and θ = 0 puts a resonance on `f_ref`.
//! Increasing θ moves every resonance to higher frequency; a 2π sweep moves
//! the comb by one FSR.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::SPEED_OF_LIGHT;

/// Group-index samples measured at the short edge, centre and long edge of the C band.
pub const SI3N4_GROUP_INDEX_SAMPLES: [(f64, f64); 3] = [(1530.0, 1.7725), (1545.0, 1.76841), (1565.0, 1.7629)];

/// Ring circumference of the fabricated 50 GHz device, metres.
pub const DESIGN_CIRCUMFERENCE_M: f64 = 3.3928e-3;

/// Conservative propagation loss assumed for the ring waveguide.
pub const DEFAULT_LOSS_DB_PER_CM: f64 = 0.4;

/// Heater resistance of the thermo-optic phase shifter.
pub const DESIGN_HEATER_OHMS: f64 = 734.0;

const C_BAND_SHORT_NM: f64 = 1530.0;
const C_BAND_LONG_NM: f64 = 1565.0;
const CENTRE_NM: f64 = 1545.0;

/// `c / (n_g · l)`.
pub fn fsr_from_geometry(group_index: f64, circumference_m: f64) -> Result<f64> {
    if !(group_index.is_finite() && group_index > 1.0) {
        return Err(Error::InvalidRing(format!("group index must exceed 1, got {group_index}")));
    }
    if !(circumference_m.is_finite() && circumference_m > 0.0) {
        return Err(Error::InvalidRing(format!("circumference must be positive, got {circumference_m}")));
    }
    Ok(SPEED_OF_LIGHT / (group_index * circumference_m))
}

/// Circumference giving `fsr_hz` for a given group index.
pub fn circumference_for_fsr(group_index: f64, fsr_hz: f64) -> Result<f64> {
    if !(fsr_hz > 0.0) {
        return Err(Error::InvalidRing(format!("fsr must be positive, got {fsr_hz}")));
    }
    if !(group_index.is_finite() && group_index > 1.0) {
        return Err(Error::InvalidRing(format!("group index must exceed 1, got {group_index}")));
    }
    Ok(SPEED_OF_LIGHT / (group_index * fsr_hz))
}

/// Round-trip amplitude factor for a propagation loss over one circumference.
pub fn round_trip_amplitude(loss_db_per_cm: f64, circumference_m: f64) -> f64 {
    let loss_db = loss_db_per_cm * circumference_m * 100.0;
    10f64.powf(-loss_db / 20.0)
}

/// Group index as a function of frequency.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupIndex {
    /// Dispersion-free: strictly periodic comb.
    Constant(f64),
    /// Quadratic in wavelength through three `(λ nm, n_g)` samples, held
    /// constant outside the C band.
    Quadratic {
        samples: [(f64, f64); 3],
        /// `n_g(λ) = c0 + c1·λ + c2·λ²`, λ in nm.
        coeffs: [f64; 3],
    },
}

impl GroupIndex {
    pub fn quadratic(samples: [(f64, f64); 3]) -> Result<Self> {
        let [(x0, y0), (x1, y1), (x2, y2)] = samples;
        if x0 == x1 || x1 == x2 || x0 == x2 {
            return Err(Error::InvalidRing("group index samples need distinct wavelengths".into()));
        }
        // Lagrange basis expanded into monomial coefficients.
        let mut c = [0.0; 3];
        for (xi, yi, xa, xb) in [(x0, y0, x1, x2), (x1, y1, x0, x2), (x2, y2, x0, x1)] {
            let d = (xi - xa) * (xi - xb);
            c[0] += yi * xa * xb / d;
            c[1] -= yi * (xa + xb) / d;
            c[2] += yi / d;
        }
        Ok(GroupIndex::Quadratic { samples, coeffs: c })
    }

    /// The Si3N4 device's measured dispersion.
    pub fn design() -> Self {
        Self::quadratic(SI3N4_GROUP_INDEX_SAMPLES).expect("distinct sample wavelengths")
    }

    fn validate(&self) -> Result<()> {
        let check = |n: f64| {
            if n.is_finite() && n > 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidRing(format!("group index {n} is not > 1")))
            }
        };
        match self {
            GroupIndex::Constant(n) => check(*n),
            GroupIndex::Quadratic { samples, .. } => samples.iter().try_for_each(|s| check(s.1)),
        }
    }

    fn band_edges_hz() -> (f64, f64) {
        (SPEED_OF_LIGHT / (C_BAND_LONG_NM * 1e-9), SPEED_OF_LIGHT / (C_BAND_SHORT_NM * 1e-9))
    }

    fn poly(coeffs: &[f64; 3], lambda_nm: f64) -> f64 {
        coeffs[0] + lambda_nm * (coeffs[1] + lambda_nm * coeffs[2])
    }

    /// n_g at `f`, clamped to the band edges. Second value reports whether clamping happened.
    pub fn evaluate(&self, f: f64) -> (f64, bool) {
        match self {
            GroupIndex::Constant(n) => (*n, false),
            GroupIndex::Quadratic { coeffs, .. } => {
                let (lo, hi) = Self::band_edges_hz();
                let clamped = f < lo || f > hi;
                let fc = f.clamp(lo, hi);
                (Self::poly(coeffs, SPEED_OF_LIGHT * 1e9 / fc), clamped)
            }
        }
    }

    /// Antiderivative `∫ n_g(f) df` (any fixed origin).
    fn antiderivative(&self, f: f64) -> f64 {
        match self {
            GroupIndex::Constant(n) => n * f,
            GroupIndex::Quadratic { coeffs, .. } => {
                let k = SPEED_OF_LIGHT * 1e9;
                let prim = |x: f64| coeffs[0] * x + coeffs[1] * k * x.ln() - coeffs[2] * k * k / x;
                let (lo, hi) = Self::band_edges_hz();
                if f < lo {
                    let n_lo = Self::poly(coeffs, k / lo);
                    prim(lo) - n_lo * (lo - f)
                } else if f > hi {
                    let n_hi = Self::poly(coeffs, k / hi);
                    prim(hi) + n_hi * (f - hi)
                } else {
                    prim(f)
                }
            }
        }
    }
}

/// Add-drop ring with a tuning phase shifter.
#[derive(Debug, Clone, PartialEq)]
pub struct RingModel {
    circumference_m: f64,
    group_index: GroupIndex,
    r1: f64,
    r2: f64,
    loss_db_per_cm: f64,
    /// Extra loss per nm of wavelength away from 1545 nm (optional tilt knob).
    loss_slope_db_per_cm_per_nm: f64,
    reference_hz: f64,
    antiderivative_ref: f64,
}

impl RingModel {
    pub fn new(
        circumference_m: f64,
        group_index: GroupIndex,
        r1: f64,
        r2: f64,
        loss_db_per_cm: f64,
        reference_hz: f64,
    ) -> Result<Self> {
        if !(circumference_m.is_finite() && circumference_m > 0.0) {
            return Err(Error::InvalidRing(format!("circumference must be positive, got {circumference_m}")));
        }
        group_index.validate()?;
        for (name, r) in [("r1", r1), ("r2", r2)] {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::InvalidRing(format!("{name} must lie in (0, 1), got {r}")));
            }
        }
        if !(loss_db_per_cm.is_finite() && loss_db_per_cm >= 0.0) {
            return Err(Error::InvalidRing(format!("loss must be non-negative, got {loss_db_per_cm}")));
        }
        if !(reference_hz.is_finite() && reference_hz > 0.0) {
            return Err(Error::InvalidRing(format!("reference frequency must be positive, got {reference_hz}")));
        }
        let antiderivative_ref = group_index.antiderivative(reference_hz);
        Ok(Self {
            circumference_m,
            group_index,
            r1,
            r2,
            loss_db_per_cm,
            loss_slope_db_per_cm_per_nm: 0.0,
            reference_hz,
            antiderivative_ref,
        })
    }

    /// Symmetric couplers (`r1 = r2 = r`).
    pub fn symmetric(
        circumference_m: f64,
        group_index: GroupIndex,
        r: f64,
        loss_db_per_cm: f64,
        reference_hz: f64,
    ) -> Result<Self> {
        Self::new(circumference_m, group_index, r, r, loss_db_per_cm, reference_hz)
    }

    pub fn with_couplers(&self, r1: f64, r2: f64) -> Result<Self> {
        let mut out =
            Self::new(self.circumference_m, self.group_index.clone(), r1, r2, self.loss_db_per_cm, self.reference_hz)?;
        out.loss_slope_db_per_cm_per_nm = self.loss_slope_db_per_cm_per_nm;
        Ok(out)
    }

    /// Makes the propagation loss wavelength dependent, which tilts the peak
    /// drop transmission across the band.
    pub fn with_loss_slope(mut self, db_per_cm_per_nm: f64) -> Result<Self> {
        if !db_per_cm_per_nm.is_finite() {
            return Err(Error::InvalidRing("loss slope must be finite".into()));
        }
        self.loss_slope_db_per_cm_per_nm = db_per_cm_per_nm;
        Ok(self)
    }

    pub fn circumference_m(&self) -> f64 {
        self.circumference_m
    }

    pub fn group_index_model(&self) -> &GroupIndex {
        &self.group_index
    }

    pub fn couplers(&self) -> (f64, f64) {
        (self.r1, self.r2)
    }

    pub fn loss_db_per_cm(&self) -> f64 {
        self.loss_db_per_cm
    }

    pub fn reference_hz(&self) -> f64 {
        self.reference_hz
    }

    /// n_g at `f`; logs a warning when `f` is outside the C band and the value is clamped.
    pub fn group_index(&self, f: f64) -> f64 {
        let (n, clamped) = self.group_index.evaluate(f);
        if clamped {
            log::warn!("group index requested at {f} Hz outside the C band; clamped to band edge");
        }
        n
    }

    /// Local comb period `c / (n_g(f)·l)`.
    pub fn local_fsr(&self, f: f64) -> f64 {
        SPEED_OF_LIGHT / (self.group_index.evaluate(f).0 * self.circumference_m)
    }

    pub fn fsr(&self) -> f64 {
        self.local_fsr(self.reference_hz)
    }

    /// Round-trip amplitude transmission at `f`.
    pub fn round_trip_amplitude(&self, f: f64) -> f64 {
        let mut loss = self.loss_db_per_cm;
        if self.loss_slope_db_per_cm_per_nm != 0.0 {
            let lambda_nm = SPEED_OF_LIGHT * 1e9 / f;
            loss = (loss + self.loss_slope_db_per_cm_per_nm * (lambda_nm - CENTRE_NM)).max(0.0);
        }
        round_trip_amplitude(loss, self.circumference_m)
    }

    /// Round-trip propagation phase at θ = 0, zero at `f_ref`.
    pub fn propagation_phase(&self, f: f64) -> f64 {
        TAU * self.circumference_m / SPEED_OF_LIGHT * (self.group_index.antiderivative(f) - self.antiderivative_ref)
    }

    /// Drop-port coefficients `(numerator, r1·r2·a)` at `f`.
    #[inline]
    pub fn airy_coefficients(&self, f: f64) -> (f64, f64) {
        let a = if self.loss_slope_db_per_cm_per_nm == 0.0 {
            round_trip_amplitude(self.loss_db_per_cm, self.circumference_m)
        } else {
            self.round_trip_amplitude(f)
        };
        let num = (1.0 - self.r1 * self.r1) * (1.0 - self.r2 * self.r2) * a;
        (num, self.r1 * self.r2 * a)
    }

    /// Drop-port power transmission given a precomputed propagation phase.
    #[inline]
    pub fn drop_from_phase(numerator: f64, rra: f64, phase: f64, theta: f64) -> f64 {
        let phi = phase - theta;
        numerator / (1.0 - 2.0 * rra * phi.cos() + rra * rra)
    }

    /// `|H_drop|²` at frequency `f` and tuning phase `theta`.
    pub fn drop_transmission(&self, f: f64, theta: f64) -> f64 {
        let (num, rra) = self.airy_coefficients(f);
        Self::drop_from_phase(num, rra, self.propagation_phase(f), theta)
    }

    /// Peak drop transmission of the resonance nearest `f`.
    pub fn peak_transmission(&self, f: f64) -> f64 {
        let (num, rra) = self.airy_coefficients(f);
        num / ((1.0 - rra) * (1.0 - rra))
    }

    /// Frequency of comb line `m` (m = 0 is the line on `f_ref` at θ = 0) at tuning phase `theta`.
    pub fn comb_resonance_frequency(&self, m: i64, theta: f64) -> f64 {
        let target = TAU * m as f64 + theta;
        let mut f = self.reference_hz + (m as f64 + theta / TAU) * self.fsr();
        for _ in 0..50 {
            let residual = self.propagation_phase(f) - target;
            let slope = TAU * self.circumference_m * self.group_index.evaluate(f).0 / SPEED_OF_LIGHT;
            let step = residual / slope;
            f -= step;
            if step.abs() < 1e-6 {
                break;
            }
        }
        f
    }

    /// Index of the comb line closest to `f` at θ = 0.
    pub fn nearest_comb_index(&self, f: f64) -> i64 {
        (self.propagation_phase(f) / TAU).round() as i64
    }

    /// Numeric full width at half maximum of the resonance at `f_ref` (θ = 0).
    pub fn fwhm(&self) -> Result<Fwhm> {
        let f0 = self.reference_hz;
        let fsr = self.fsr();
        let half = 0.5 * self.drop_transmission(f0, 0.0);
        let edge = |dir: f64| -> Result<f64> {
            let h = |x: f64| self.drop_transmission(f0 + dir * x, 0.0) - half;
            let (mut lo, mut hi) = (0.0, 0.5 * fsr);
            if h(hi) >= 0.0 {
                return Err(Error::Unresolved(format!(
                    "transmission never drops to half maximum within FSR/2 ({fsr} Hz)"
                )));
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if h(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-6 {
                    break;
                }
            }
            Ok(0.5 * (lo + hi))
        };
        let width = edge(1.0)? + edge(-1.0)?;
        Ok(Fwhm { fwhm_hz: width, fsr_hz: fsr, finesse: fsr / width })
    }

    /// `(1 − r1·r2·a)·FSR / (π·√(r1·r2·a))`, valid for high finesse.
    pub fn analytic_fwhm(&self) -> f64 {
        let (_, rra) = self.airy_coefficients(self.reference_hz);
        (1.0 - rra) * self.fsr() / (PI * rra.sqrt())
    }

    /// Integral of one resonance over frequency, `peak · (π/2) · FWHM`.
    pub fn equivalent_noise_bandwidth(&self) -> Result<f64> {
        let w = self.fwhm()?;
        Ok(self.peak_transmission(self.reference_hz) * 0.5 * PI * w.fwhm_hz)
    }
}

/// Result of [`RingModel::fwhm`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fwhm {
    pub fwhm_hz: f64,
    pub fsr_hz: f64,
    pub finesse: f64,
}

/// Solves symmetric self-coupling `r` so that the resonance FWHM hits `target_hz`.
///
/// The loss of `template` fixes the narrowest achievable width; targets below
/// it, or too broad to form a resolved resonance, are rejected.
pub fn calibrate_to_fwhm(target_hz: f64, template: &RingModel) -> Result<RingModel> {
    const R_MIN: f64 = 0.5;
    const R_MAX: f64 = 1.0 - 1e-12;
    if !(target_hz.is_finite() && target_hz > 0.0) {
        return Err(Error::Unreachable(format!("target FWHM must be positive, got {target_hz}")));
    }
    let width = |r: f64| -> Result<f64> { Ok(template.with_couplers(r, r)?.fwhm()?.fwhm_hz) };
    let narrowest = width(R_MAX)?;
    if target_hz < narrowest {
        return Err(Error::Unreachable(format!(
            "target {target_hz} Hz is below the loss-limited minimum FWHM of {narrowest} Hz"
        )));
    }
    let broadest = width(R_MIN).map_err(|_| {
        Error::Unreachable(format!("no resolved resonance at r = {R_MIN}; target {target_hz} Hz too broad"))
    })?;
    if target_hz > broadest {
        return Err(Error::Unreachable(format!(
            "target {target_hz} Hz exceeds the broadest resolvable FWHM of {broadest} Hz"
        )));
    }
    let (mut lo, mut hi) = (R_MIN, R_MAX);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        // FWHM falls as r grows.
        if width(mid)? > target_hz {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let r = 0.5 * (lo + hi);
    template.with_couplers(r, r)
}

/// Thermo-optic phase shifter: phase advance proportional to dissipated power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeaterModel {
    pub resistance_ohm: f64,
    pub phase_per_watt: f64,
    pub phase_offset_rad: f64,
}

impl HeaterModel {
    pub fn new(resistance_ohm: f64, phase_per_watt: f64, phase_offset_rad: f64) -> Result<Self> {
        if !(resistance_ohm > 0.0) {
            return Err(Error::InvalidRing(format!("heater resistance must be positive, got {resistance_ohm}")));
        }
        Ok(Self { resistance_ohm, phase_per_watt, phase_offset_rad })
    }

    /// Phase before wrapping, `k·V²/R + θ₀`.
    pub fn unwrapped_phase(&self, volts: f64) -> f64 {
        self.phase_per_watt * volts * volts / self.resistance_ohm + self.phase_offset_rad
    }

    /// Tuning phase in `[0, 2π)` for a drive voltage.
    pub fn heater_phase(&self, volts: f64) -> Result<f64> {
        if !(volts >= 0.0) {
            return Err(Error::Domain(format!("heater voltage must be non-negative, got {volts}")));
        }
        Ok(self.unwrapped_phase(volts).rem_euclid(TAU))
    }

    /// Smallest voltage that produces tuning phase `theta` (wrapped into one turn above θ₀).
    pub fn voltage_for_phase(&self, theta: f64) -> Result<f64> {
        if !(self.phase_per_watt > 0.0) {
            return Err(Error::Domain("phase coefficient must be positive to invert".into()));
        }
        let advance = (theta - self.phase_offset_rad).rem_euclid(TAU);
        Ok((advance * self.resistance_ohm / self.phase_per_watt).sqrt())
    }
}
