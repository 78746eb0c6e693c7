//! Interlaced AWG filter banks.
//!
//! M identical demultiplexers whose channel grids are offset by `Δf_out / M`
//! (plus an optional per-AWG detune). Channel responses are power-only: phase
//! errors in the arrayed section only show up through the adjacent-channel
//! crosstalk floor. Indices are 0-based here; files and reports use 1-based.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI, TAU};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{check_header, parse_field};

/// Level assigned to frequencies outside an imported S-matrix table.
pub const TABLE_FLOOR_DB: f64 = -80.0;

/// Edge roll-off of the designed 32 × 50 GHz cyclic AWG envelope.
pub const DEFAULT_ENVELOPE_EDGE_DB: f64 = 1.8;

/// Below this the Gaussian-family profiles are treated as exactly zero.
const PROFILE_CUTOFF: f64 = 1e-16;

/// Channel passband shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    /// `cos²(π·x / 2B)` for `|x| ≤ B`, zero beyond. Two copies offset by B
    /// sum to exactly one.
    RaisedCosine,
    Gaussian,
    SuperGaussian {
        order: f64,
    },
}

/// Parametric channel transfer profile, normalised to 1 at the centre with
/// its −3 dB points at `±B/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelProfile {
    #[serde(flatten)]
    pub kind: ProfileKind,
    pub passband_3db_hz: f64,
}

impl ChannelProfile {
    pub fn new(kind: ProfileKind, passband_3db_hz: f64) -> Result<Self> {
        if !(passband_3db_hz.is_finite() && passband_3db_hz > 0.0) {
            return Err(Error::InvalidBank(format!("passband must be positive, got {passband_3db_hz}")));
        }
        if let ProfileKind::SuperGaussian { order } = kind {
            if !(order.is_finite() && order > 0.0) {
                return Err(Error::InvalidBank(format!("super-Gaussian order must be positive, got {order}")));
            }
        }
        Ok(Self { kind, passband_3db_hz })
    }

    pub fn raised_cosine(passband_3db_hz: f64) -> Self {
        Self { kind: ProfileKind::RaisedCosine, passband_3db_hz }
    }

    pub fn gaussian(passband_3db_hz: f64) -> Self {
        Self { kind: ProfileKind::Gaussian, passband_3db_hz }
    }

    fn order(&self) -> f64 {
        match self.kind {
            ProfileKind::Gaussian => 1.0,
            ProfileKind::SuperGaussian { order } => order,
            ProfileKind::RaisedCosine => f64::NAN,
        }
    }

    /// Power transmission at offset `x` from the channel centre.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let b = self.passband_3db_hz;
        match self.kind {
            ProfileKind::RaisedCosine => {
                if x.abs() <= b {
                    let c = (PI * x / (2.0 * b)).cos();
                    c * c
                } else {
                    0.0
                }
            }
            _ => {
                if x.abs() > self.support_half_width() {
                    return 0.0;
                }
                let u = (2.0 * x / b).abs();
                (-LN_2 * u.powf(2.0 * self.order())).exp()
            }
        }
    }

    /// Half-width beyond which [`value`](Self::value) is exactly zero.
    pub fn support_half_width(&self) -> f64 {
        match self.kind {
            ProfileKind::RaisedCosine => self.passband_3db_hz,
            _ => {
                let reach = (-PROFILE_CUTOFF.ln() / LN_2).powf(1.0 / (2.0 * self.order()));
                0.5 * self.passband_3db_hz * reach
            }
        }
    }
}

/// One output channel of one AWG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChannelRef {
    pub awg: usize,
    pub channel: usize,
}

impl ChannelRef {
    pub fn new(awg: usize, channel: usize) -> Self {
        Self { awg, channel }
    }
}

/// Channel pair summed for one virtual channel in one tuning segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub a: ChannelRef,
    pub b: ChannelRef,
    /// Tuning segment (0-based) the pair belongs to.
    pub segment: usize,
}

/// Tuning segment containing `theta` given the `M − 1` interior boundaries.
pub fn segment_for(theta: f64, boundaries: &[f64]) -> usize {
    boundaries.iter().take_while(|&&b| theta >= b).count()
}

/// Canonical segment boundaries `j·2π/M`, `j = 1..M`.
pub fn canonical_boundaries(n_awgs: usize) -> Vec<f64> {
    (1..n_awgs).map(|j| TAU * j as f64 / n_awgs as f64).collect()
}

/// Pair for segment `s`: `(s, m) + (s+1, m)`, wrapping to `(M−1, m) + (0, m+1)` on the last one.
pub fn pair_for_segment(segment: usize, m: usize, n_awgs: usize) -> Pair {
    if segment + 1 < n_awgs {
        Pair { a: ChannelRef::new(segment, m), b: ChannelRef::new(segment + 1, m), segment }
    } else {
        Pair { a: ChannelRef::new(n_awgs - 1, m), b: ChannelRef::new(0, m + 1), segment }
    }
}

/// Channel pair summed for virtual channel `m` at tuning phase `theta`
/// with handover at the canonical `j·2π/M` boundaries. The returned `b.channel`
/// may equal N on the last channel; see [`BankLayout::resolve`].
pub fn interlaced_partner(theta: f64, m: usize, n_awgs: usize) -> Result<Pair> {
    if n_awgs < 2 {
        return Err(Error::InvalidBank(format!("need at least two interlaced AWGs, got {n_awgs}")));
    }
    if !(0.0..TAU).contains(&theta) {
        return Err(Error::Domain(format!("tuning phase {theta} outside [0, 2π)")));
    }
    Ok(pair_for_segment(segment_for(theta, &canonical_boundaries(n_awgs)), m, n_awgs))
}

/// Channel-grid geometry shared by parametric and table-driven banks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankLayout {
    pub n_awgs: usize,
    pub n_channels: usize,
    pub spacing_hz: f64,
    pub first_center_hz: f64,
    /// Interlace offset of each AWG relative to AWG 0's grid.
    pub offsets_hz: Vec<f64>,
    /// Extra shift per AWG (temperature detuning, fabrication error).
    pub detune_hz: Vec<f64>,
    /// Channel pattern period for cyclic devices.
    pub awg_fsr_hz: Option<f64>,
}

impl BankLayout {
    /// Canonical interlace: offsets `j·Δf_out/M`, no detune.
    pub fn canonical(n_awgs: usize, n_channels: usize, spacing_hz: f64, first_center_hz: f64) -> Result<Self> {
        let offsets = (0..n_awgs).map(|j| j as f64 * spacing_hz / n_awgs as f64).collect();
        let layout = Self {
            n_awgs,
            n_channels,
            spacing_hz,
            first_center_hz,
            offsets_hz: offsets,
            detune_hz: vec![0.0; n_awgs],
            awg_fsr_hz: None,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn cyclic(mut self, awg_fsr_hz: f64) -> Result<Self> {
        self.awg_fsr_hz = Some(awg_fsr_hz);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_awgs < 2 {
            return Err(Error::InvalidBank(format!("need at least two interlaced AWGs, got {}", self.n_awgs)));
        }
        if self.n_channels == 0 {
            return Err(Error::InvalidBank("bank needs at least one output channel".into()));
        }
        if !(self.spacing_hz > 0.0) {
            return Err(Error::InvalidBank(format!("channel spacing must be positive, got {}", self.spacing_hz)));
        }
        if self.offsets_hz.len() != self.n_awgs || self.detune_hz.len() != self.n_awgs {
            return Err(Error::InvalidBank(format!(
                "expected {} offsets and detunes, got {} and {}",
                self.n_awgs,
                self.offsets_hz.len(),
                self.detune_hz.len()
            )));
        }
        if let Some(fsr) = self.awg_fsr_hz {
            if !(fsr > 0.0) {
                return Err(Error::InvalidBank(format!("AWG FSR must be positive, got {fsr}")));
            }
        }
        Ok(())
    }

    /// Centre frequency of channel `m` of AWG `j` (unwrapped).
    #[inline]
    pub fn center(&self, j: usize, m: usize) -> f64 {
        self.first_center_hz + m as f64 * self.spacing_hz + self.offsets_hz[j] + self.detune_hz[j]
    }

    pub fn is_cyclic(&self) -> bool {
        self.awg_fsr_hz.is_some()
    }

    /// Offset of `f` from the channel centre, folded into `[−FSR/2, FSR/2)` for cyclic banks.
    #[inline]
    pub fn relative(&self, f: f64, j: usize, m: usize) -> f64 {
        let x = f - self.center(j, m);
        match self.awg_fsr_hz {
            Some(fsr) => x - fsr * (x / fsr).round(),
            None => x,
        }
    }

    fn check(&self, c: ChannelRef) -> Result<()> {
        if c.awg >= self.n_awgs || c.channel >= self.n_channels {
            return Err(Error::IndexOutOfRange(format!(
                "AWG {} channel {} (bank has {} AWGs × {} channels)",
                c.awg, c.channel, self.n_awgs, self.n_channels
            )));
        }
        Ok(())
    }

    /// Maps a pair onto existing channels: cyclic banks wrap `m + 1` to channel 0,
    /// otherwise a partner beyond the last channel yields `None` (band-edge partial coverage).
    pub fn resolve(&self, pair: Pair) -> Option<Pair> {
        if pair.b.channel < self.n_channels {
            return Some(pair);
        }
        if self.is_cyclic() {
            let mut p = pair;
            p.b.channel %= self.n_channels;
            Some(p)
        } else {
            None
        }
    }

    /// Span `[lowest centre, highest centre]` over all AWGs.
    pub fn center_span(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in 0..self.n_awgs {
            lo = lo.min(self.center(j, 0));
            hi = hi.max(self.center(j, self.n_channels - 1));
        }
        (lo, hi)
    }
}

/// Envelope of the AWG passbands across one AWG FSR: a raised-cosine bell in
/// dB, `loss = edge_db · sin²(π·u/2)` with `u ∈ [−1, 1]` across the FSR.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Envelope {
    edge_db: f64,
    center_hz: f64,
    half_width_hz: f64,
    periodic: bool,
}

impl Envelope {
    #[inline]
    fn factor(&self, f: f64) -> f64 {
        if self.edge_db == 0.0 {
            return 1.0;
        }
        let mut u = (f - self.center_hz) / self.half_width_hz;
        if self.periodic {
            u -= 2.0 * (u / 2.0).round();
        } else {
            u = u.clamp(-1.0, 1.0);
        }
        let s = (0.5 * PI * u).sin();
        10f64.powf(-self.edge_db * s * s / 10.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct TableCurve {
    freqs: Vec<f64>,
    db: Vec<f64>,
}

impl TableCurve {
    fn value_db(&self, f: f64) -> f64 {
        let n = self.freqs.len();
        if n == 0 || f < self.freqs[0] || f > self.freqs[n - 1] {
            return TABLE_FLOOR_DB;
        }
        let i = self.freqs.partition_point(|&x| x <= f);
        if i >= n {
            return self.db[n - 1];
        }
        if i == 0 {
            return self.db[0];
        }
        let (f0, f1) = (self.freqs[i - 1], self.freqs[i]);
        let t = (f - f0) / (f1 - f0);
        self.db[i - 1] * (1.0 - t) + self.db[i] * t
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Response {
    Parametric {
        profile: ChannelProfile,
        envelope: Envelope,
        crosstalk: f64,
    },
    /// Curves indexed `[awg][channel]`.
    Table(Vec<Vec<TableCurve>>),
}

/// Parametric settings of a bank.
#[derive(Debug, Clone, PartialEq)]
pub struct BankSettings {
    pub profile: ChannelProfile,
    /// Roll-off at the FSR edges relative to the centre (0 disables).
    pub envelope_edge_db: f64,
    /// Adjacent-channel leakage level in dB; `None` for an ideal bank.
    pub crosstalk_floor_db: Option<f64>,
}

impl BankSettings {
    pub fn ideal(profile: ChannelProfile) -> Self {
        Self { profile, envelope_edge_db: 0.0, crosstalk_floor_db: None }
    }
}

/// M interlaced AWGs, parametric or table driven.
#[derive(Debug, Clone, PartialEq)]
pub struct AwgBank {
    layout: BankLayout,
    response: Response,
}

impl AwgBank {
    pub fn parametric(layout: BankLayout, settings: BankSettings) -> Result<Self> {
        layout.validate()?;
        if !(settings.envelope_edge_db.is_finite() && settings.envelope_edge_db >= 0.0) {
            return Err(Error::InvalidBank(format!(
                "envelope roll-off must be non-negative, got {}",
                settings.envelope_edge_db
            )));
        }
        let crosstalk = match settings.crosstalk_floor_db {
            None => 0.0,
            Some(db) if db.is_finite() && db < 0.0 => 10f64.powf(db / 10.0),
            Some(db) if db == f64::NEG_INFINITY => 0.0,
            Some(db) => return Err(Error::InvalidBank(format!("crosstalk floor must be negative dB, got {db}"))),
        };
        let (lo, hi) = {
            let c0 = layout.first_center_hz;
            let c1 = c0 + (layout.n_channels - 1) as f64 * layout.spacing_hz + layout.offsets_hz[layout.n_awgs - 1];
            (c0, c1)
        };
        let half_width = 0.5 * layout.awg_fsr_hz.unwrap_or(layout.n_channels as f64 * layout.spacing_hz);
        let envelope = Envelope {
            edge_db: settings.envelope_edge_db,
            center_hz: 0.5 * (lo + hi),
            half_width_hz: half_width,
            periodic: layout.is_cyclic(),
        };
        Ok(Self { layout, response: Response::Parametric { profile: settings.profile, envelope, crosstalk } })
    }

    pub fn layout(&self) -> &BankLayout {
        &self.layout
    }

    pub fn n_awgs(&self) -> usize {
        self.layout.n_awgs
    }

    pub fn n_channels(&self) -> usize {
        self.layout.n_channels
    }

    pub fn profile(&self) -> Option<&ChannelProfile> {
        match &self.response {
            Response::Parametric { profile, .. } => Some(profile),
            Response::Table(_) => None,
        }
    }

    pub fn crosstalk_floor_linear(&self) -> f64 {
        match &self.response {
            Response::Parametric { crosstalk, .. } => *crosstalk,
            Response::Table(_) => 0.0,
        }
    }

    pub fn is_table(&self) -> bool {
        matches!(self.response, Response::Table(_))
    }

    /// Copy with a different per-AWG detune.
    pub fn with_detune(&self, detune_hz: Vec<f64>) -> Result<Self> {
        let mut out = self.clone();
        out.layout.detune_hz = detune_hz;
        out.layout.validate()?;
        Ok(out)
    }

    /// Copy with the crosstalk floor replaced (`None` removes it).
    pub fn with_crosstalk(&self, floor_db: Option<f64>) -> Result<Self> {
        match &self.response {
            Response::Parametric { profile, envelope, .. } => AwgBank::parametric(
                self.layout.clone(),
                BankSettings { profile: *profile, envelope_edge_db: envelope.edge_db, crosstalk_floor_db: floor_db },
            ),
            Response::Table(_) => Err(Error::InvalidBank("crosstalk floor only applies to parametric banks".into())),
        }
    }

    /// The bank a calibration assumes: envelope and leakage stripped from
    /// parametric banks, tables unchanged (see [`nominal_response`](Self::nominal_response)).
    pub fn nominal(&self) -> AwgBank {
        match &self.response {
            Response::Parametric { profile, envelope, .. } => {
                let mut out = self.clone();
                out.response = Response::Parametric {
                    profile: *profile,
                    envelope: Envelope { edge_db: 0.0, ..*envelope },
                    crosstalk: 0.0,
                };
                out
            }
            Response::Table(_) => self.clone(),
        }
    }

    /// Response with bounds checking.
    pub fn channel_response(&self, f: f64, awg: usize, channel: usize) -> Result<f64> {
        self.layout.check(ChannelRef::new(awg, channel))?;
        Ok(self.response(f, awg, channel))
    }

    /// Full response: profile × envelope plus leakage shaped like the neighbours.
    #[inline]
    pub fn response(&self, f: f64, awg: usize, channel: usize) -> f64 {
        match &self.response {
            Response::Parametric { profile, envelope, crosstalk } => {
                let x = self.layout.relative(f, awg, channel);
                let mut t = profile.value(x);
                if *crosstalk > 0.0 {
                    let d = self.layout.spacing_hz;
                    t += crosstalk * (profile.value(x - d) + profile.value(x + d));
                }
                t * envelope.factor(f)
            }
            Response::Table(curves) => 10f64.powf(curves[awg][channel].value_db(f) / 10.0),
        }
    }

    /// Response a calibration would assume: the profile alone for parametric
    /// banks (envelope and crosstalk are treated as uncharacterised), the
    /// tabulated data for imported banks.
    pub fn nominal_response(&self, f: f64, awg: usize, channel: usize) -> f64 {
        match &self.response {
            Response::Parametric { profile, .. } => profile.value(self.layout.relative(f, awg, channel)),
            Response::Table(_) => self.response(f, awg, channel),
        }
    }

    /// Incoherent power sum of a pair's responses.
    pub fn pair_sum_response(&self, f: f64, pair: &Pair) -> f64 {
        self.response(f, pair.a.awg, pair.a.channel) + self.response(f, pair.b.awg, pair.b.channel)
    }

    pub fn nominal_pair_sum(&self, f: f64, pair: &Pair) -> f64 {
        self.nominal_response(f, pair.a.awg, pair.a.channel) + self.nominal_response(f, pair.b.awg, pair.b.channel)
    }

    /// Frequency intervals (one per FSR order for cyclic banks) outside which
    /// the channel response is exactly zero, clipped to `[lo, hi]`. `None`
    /// means the response is non-zero everywhere (table banks).
    pub fn support(&self, awg: usize, channel: usize, lo: f64, hi: f64) -> Option<Vec<(f64, f64)>> {
        let Response::Parametric { profile, crosstalk, .. } = &self.response else {
            return None;
        };
        let mut reach = profile.support_half_width();
        if *crosstalk > 0.0 {
            reach += self.layout.spacing_hz;
        }
        let c = self.layout.center(awg, channel);
        let mut out = Vec::new();
        match self.layout.awg_fsr_hz {
            None => out.push((c - reach, c + reach)),
            Some(fsr) => {
                if 2.0 * reach >= fsr {
                    return None;
                }
                let k0 = ((lo - c - reach) / fsr).floor() as i64;
                let k1 = ((hi - c + reach) / fsr).ceil() as i64;
                for k in k0..=k1 {
                    let cc = c + k as f64 * fsr;
                    out.push((cc - reach, cc + reach));
                }
            }
        }
        Some(out.into_iter().filter(|(a, b)| *b >= lo && *a <= hi).collect())
    }

    /// Builds a table-driven bank from parsed S-matrix rows.
    ///
    /// Each logical AWG `j` is served by `selection[j] = (awg_index, input_port)`
    /// of the table (0-based). The channel grid geometry is inferred from the
    /// tabulated peaks.
    pub fn from_table(table: &SMatrixTable, selection: &[(usize, usize)]) -> Result<Self> {
        if selection.len() < 2 {
            return Err(Error::InvalidBank("table bank needs at least two (awg, port) selections".into()));
        }
        let n_channels = table.channels_for(selection[0].0, selection[0].1);
        if n_channels == 0 {
            return Err(Error::InvalidBank("selected AWG/port has no channels".into()));
        }
        let mut curves = Vec::with_capacity(selection.len());
        for &(awg, port) in selection {
            let mut row = Vec::with_capacity(n_channels);
            for ch in 0..n_channels {
                let key = (awg, port, ch);
                let (freqs, db) = table.groups.get(&key).ok_or_else(|| {
                    Error::Format(format!("missing channel {} for AWG {} port {}", ch + 1, awg + 1, port + 1))
                })?;
                row.push(TableCurve { freqs: freqs.clone(), db: db.clone() });
            }
            curves.push(row);
        }
        let peak = |c: &TableCurve| {
            let (i, _) =
                c.db.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
            c.freqs[i]
        };
        let first = peak(&curves[0][0]);
        let spacing = if n_channels > 1 {
            (peak(&curves[0][n_channels - 1]) - first) / (n_channels - 1) as f64
        } else {
            return Err(Error::InvalidBank("cannot infer channel spacing from a single channel".into()));
        };
        let offsets = curves.iter().map(|row| peak(&row[0]) - first).collect::<Vec<_>>();
        let layout = BankLayout {
            n_awgs: selection.len(),
            n_channels,
            spacing_hz: spacing,
            first_center_hz: first,
            detune_hz: vec![0.0; selection.len()],
            offsets_hz: offsets,
            awg_fsr_hz: None,
        };
        layout.validate()?;
        Ok(Self { layout, response: Response::Table(curves) })
    }

    /// Tabulates this bank's response as S-matrix rows, every AWG on input
    /// port 0, one curve per channel over `freqs`.
    pub fn to_table(&self, freqs: &[f64]) -> SMatrixTable {
        let mut groups = BTreeMap::new();
        for j in 0..self.n_awgs() {
            for m in 0..self.n_channels() {
                let db = freqs.iter().map(|&f| 10.0 * self.response(f, j, m).max(1e-30).log10()).collect();
                groups.insert((j, 0, m), (freqs.to_vec(), db));
            }
        }
        SMatrixTable { groups }
    }
}

/// Parsed S-matrix table: `(awg, input_port, output_channel)` → `(frequencies, transmission dB)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SMatrixTable {
    groups: BTreeMap<(usize, usize, usize), (Vec<f64>, Vec<f64>)>,
}

impl SMatrixTable {
    /// Parses `frequency_hz,awg_index,input_port,output_channel,transmission_db` (1-based indices).
    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        check_header(
            rdr.headers()?,
            &["frequency_hz", "awg_index", "input_port", "output_channel", "transmission_db"],
        )?;
        let mut groups: BTreeMap<(usize, usize, usize), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.len() != 5 {
                return Err(Error::Format(format!("line {line}: expected 5 fields, found {}", rec.len())));
            }
            let f = parse_field(&rec, 0)?;
            let idx = |i: usize| -> Result<usize> {
                let v = parse_field(&rec, i)?;
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(Error::Format(format!("line {line}: index {v} must be a positive integer")));
                }
                Ok(v as usize - 1)
            };
            let key = (idx(1)?, idx(2)?, idx(3)?);
            let t = parse_field(&rec, 4)?;
            let entry = groups.entry(key).or_default();
            if let Some(&prev) = entry.0.last() {
                if f <= prev {
                    return Err(Error::Format(format!(
                        "line {line}: frequency {f} not increasing for AWG {} port {} channel {}",
                        key.0 + 1,
                        key.1 + 1,
                        key.2 + 1
                    )));
                }
            }
            entry.0.push(f);
            entry.1.push(t);
        }
        if groups.is_empty() {
            return Err(Error::Format("S-matrix table is empty".into()));
        }
        Ok(Self { groups })
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["frequency_hz", "awg_index", "input_port", "output_channel", "transmission_db"])?;
        for (&(a, p, c), (freqs, db)) in &self.groups {
            for (f, t) in freqs.iter().zip(db) {
                w.write_record([
                    f.to_string(),
                    (a + 1).to_string(),
                    (p + 1).to_string(),
                    (c + 1).to_string(),
                    t.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    fn channels_for(&self, awg: usize, port: usize) -> usize {
        self.groups.keys().filter(|k| k.0 == awg && k.1 == port).map(|k| k.2 + 1).max().unwrap_or(0)
    }

    /// Distinct `(awg, port)` pairs present, sorted.
    pub fn sources(&self) -> Vec<(usize, usize)> {
        let mut v: Vec<_> = self.groups.keys().map(|k| (k.0, k.1)).collect();
        v.dedup();
        v
    }

    /// Default logical-AWG mapping: one entry per table AWG (its lowest port),
    /// or, for a single multi-port AWG, one entry per input port.
    pub fn default_selection(&self) -> Vec<(usize, usize)> {
        let sources = self.sources();
        let mut awgs: Vec<usize> = sources.iter().map(|s| s.0).collect();
        awgs.dedup();
        if awgs.len() > 1 {
            awgs.iter().map(|&a| *sources.iter().find(|s| s.0 == a).expect("present")).collect()
        } else {
            sources
        }
    }
}

/// Reads an S-matrix CSV and builds the bank with the default selection.
pub fn import_smatrix<R: Read>(reader: R) -> Result<AwgBank> {
    let table = SMatrixTable::read(reader)?;
    AwgBank::from_table(&table, &table.default_selection())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2_bank(profile: ChannelProfile) -> AwgBank {
        let layout = BankLayout::canonical(2, 8, 50e9, 193.0e12).unwrap();
        AwgBank::parametric(layout, BankSettings::ideal(profile)).unwrap()
    }

    #[test]
    fn profile_normalisation_and_3db_points() {
        for profile in [
            ChannelProfile::raised_cosine(25e9),
            ChannelProfile::gaussian(20e9),
            ChannelProfile::new(ProfileKind::SuperGaussian { order: 2.0 }, 20e9).unwrap(),
        ] {
            assert_eq!(profile.value(0.0), 1.0);
            let b = profile.passband_3db_hz;
            for x in [b / 2.0, -b / 2.0] {
                let db = 10.0 * profile.value(x).log10();
                assert!((db + 3.0103).abs() < 0.01, "{profile:?}: {db}");
            }
            assert_eq!(profile.value(1e9), profile.value(-1e9));
            assert_eq!(profile.value(profile.support_half_width() * 1.0001), 0.0);
        }
    }

    #[test]
    fn centre_and_half_power() {
        let bank = m2_bank(ChannelProfile::raised_cosine(25e9));
        let c = bank.layout().center(0, 3);
        assert_eq!(bank.channel_response(c, 0, 3).unwrap(), 1.0);
        assert!((bank.channel_response(c + 12.5e9, 0, 3).unwrap() - 0.5).abs() < 1e-12);
        assert!(bank.channel_response(c, 2, 0).is_err());
        assert!(bank.channel_response(c, 0, 8).is_err());
    }

    #[test]
    fn cyclic_response_repeats() {
        let layout = BankLayout::canonical(2, 32, 50e9, 192.775e12).unwrap().cyclic(1600e9).unwrap();
        let bank = AwgBank::parametric(
            layout,
            BankSettings {
                profile: ChannelProfile::gaussian(20e9),
                envelope_edge_db: 1.8,
                crosstalk_floor_db: Some(-30.0),
            },
        )
        .unwrap();
        for k in 0..50 {
            let f = 192.7e12 + k as f64 * 31.7e9;
            for (j, m) in [(0, 0), (1, 31), (0, 17)] {
                let a = bank.response(f, j, m);
                let b = bank.response(f + 1600e9, j, m);
                assert!((a - b).abs() <= 1e-12 * a.max(1e-30), "{f} {j} {m}: {a} {b}");
            }
        }
    }

    #[test]
    fn partner_tables() {
        let p = interlaced_partner(PI / 4.0, 5, 2).unwrap();
        assert_eq!((p.a, p.b), (ChannelRef::new(0, 5), ChannelRef::new(1, 5)));
        let p = interlaced_partner(1.5 * PI, 5, 2).unwrap();
        assert_eq!((p.a, p.b), (ChannelRef::new(1, 5), ChannelRef::new(0, 6)));
        let p = interlaced_partner(PI, 4, 3).unwrap();
        assert_eq!((p.a, p.b), (ChannelRef::new(1, 4), ChannelRef::new(2, 4)));
        let p = interlaced_partner(5.0 * PI / 3.0 + 0.1, 4, 3).unwrap();
        assert_eq!((p.a, p.b), (ChannelRef::new(2, 4), ChannelRef::new(0, 5)));
        assert!(interlaced_partner(TAU, 0, 2).is_err());
        assert!(interlaced_partner(0.0, 0, 1).is_err());
    }

    #[test]
    fn last_channel_partner_is_partial_unless_cyclic() {
        let layout = BankLayout::canonical(2, 4, 50e9, 193e12).unwrap();
        let pair = interlaced_partner(4.0, 3, 2).unwrap();
        assert!(layout.resolve(pair).is_none());
        let cyc = layout.cyclic(200e9).unwrap();
        assert_eq!(cyc.resolve(pair).unwrap().b, ChannelRef::new(0, 0));
    }

    #[test]
    fn raised_cosine_pair_is_flat() {
        let bank = m2_bank(ChannelProfile::raised_cosine(25e9));
        let pair = interlaced_partner(0.5, 3, 2).unwrap();
        let (ca, cb) = (bank.layout().center(0, 3), bank.layout().center(1, 3));
        for k in 0..=100 {
            let f = ca + (cb - ca) * k as f64 / 100.0;
            assert!((bank.pair_sum_response(f, &pair) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_crossover_is_half_plus_half() {
        let bank = m2_bank(ChannelProfile::gaussian(25e9));
        let pair = interlaced_partner(0.5, 3, 2).unwrap();
        let mid = bank.layout().center(0, 3) + 12.5e9;
        let sum = bank.pair_sum_response(mid, &pair);
        assert!((10.0 * sum.log10()).abs() < 0.01);
    }

    #[test]
    fn narrow_profiles_dip_between_centres() {
        let bank = m2_bank(ChannelProfile::gaussian(20e9));
        let pair = interlaced_partner(0.5, 3, 2).unwrap();
        let (ca, cb) = (bank.layout().center(0, 3), bank.layout().center(1, 3));
        let min = (0..=1000)
            .map(|k| bank.pair_sum_response(ca + (cb - ca) * k as f64 / 1000.0, &pair))
            .fold(f64::INFINITY, f64::min);
        assert!(min < 0.9);
    }

    #[test]
    fn crosstalk_floor_reads_at_neighbour_centre() {
        let layout = BankLayout::canonical(2, 8, 50e9, 193e12).unwrap();
        let bank = AwgBank::parametric(
            layout,
            BankSettings {
                profile: ChannelProfile::gaussian(20e9),
                envelope_edge_db: 0.0,
                crosstalk_floor_db: Some(-22.0),
            },
        )
        .unwrap();
        let neighbour = bank.layout().center(0, 4);
        let leak = 10.0 * bank.response(neighbour, 0, 3).log10();
        assert!((leak + 22.0).abs() < 1.0, "{leak}");
    }

    #[test]
    fn table_round_trip_matches_parametric() {
        let bank = m2_bank(ChannelProfile::raised_cosine(25e9));
        let freqs: Vec<f64> = (0..=2000).map(|k| 192.9e12 + k as f64 * 0.25e9).collect();
        let mut buf = Vec::new();
        bank.to_table(&freqs).write(&mut buf).unwrap();
        let table = SMatrixTable::read(buf.as_slice()).unwrap();
        let imported = AwgBank::from_table(&table, &[(0, 0), (1, 0)]).unwrap();
        assert_eq!(imported.n_channels(), 8);
        assert!((imported.layout().offsets_hz[1] - 25e9).abs() < 0.3e9);
        for k in 0..3000 {
            let f = 192.95e12 + k as f64 * 0.1337e9;
            for (j, m) in [(0, 2), (1, 5)] {
                let p = bank.response(f, j, m);
                // Passband down to -20 dB; deep cos² nulls are not representable by dB interpolation.
                if p > 1e-2 {
                    let q = imported.response(f, j, m);
                    assert!((10.0 * (q / p).log10()).abs() < 0.05, "f={f}: {p} vs {q}");
                }
            }
        }
        // Outside the table the floor applies.
        assert!((imported.response(100e12, 0, 0) - 1e-8).abs() < 1e-20);
    }

    #[test]
    fn table_errors() {
        assert!(SMatrixTable::read("frequency_hz,awg_index,input_port,output_channel,transmission_db\n".as_bytes())
            .is_err());
        let bad_order = "frequency_hz,awg_index,input_port,output_channel,transmission_db\n2,1,1,1,0\n1,1,1,1,0\n";
        assert!(SMatrixTable::read(bad_order.as_bytes()).is_err());
        let malformed = "frequency_hz,awg_index,input_port,output_channel,transmission_db\n1,1,1,x,0\n";
        assert!(SMatrixTable::read(malformed.as_bytes()).is_err());
        let missing = "frequency_hz,awg_index,input_port,output_channel,transmission_db\n1,1,1,1,0\n1,2,1,2,0\n";
        let table = SMatrixTable::read(missing.as_bytes()).unwrap();
        assert!(AwgBank::from_table(&table, &[(0, 0), (1, 0)]).is_err());
    }
}
