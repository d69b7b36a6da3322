// SPDX-License-Identifier: Apache-2.0

//! Technology cost library.
//!
//! A [`TechModel`] holds one `{area, delay, power}` triple per primitive
//! kind and configuration mode for a single memory technology. Models are
//! loaded from tech-model files (see [`crate::kvfile`] for the grammar):
//!
//! ```text
//! technology = FEFET_2CFG        # SRAM | FEFET_1CFG | FEFET_2CFG | RRAM | STT_MRAM
//! mode = dual                    # mode used by timing and comparisons
//!
//! [device]                       # FeFET models only; missing keys use defaults
//! v_write = 4 V
//!
//! [resistance]                   # resistive models only, optional
//! r_on = 10 kohm
//! r_off = 1 Mohm
//!
//! [leakage]                      # optional, defaults to 0 W
//! static_power = 0 W
//!
//! [CB_SWITCH.dual]               # <KIND>.<mode>
//! area = 375 λ²
//! delay = 7.8 ps
//! power = 0.173 µW
//! area_ratio = 0.289             # optional, checked against baseline_area
//! baseline_area = 1297.58 λ²
//! ```
//!
//! `LUT_CELL` entries only need an area; their delay and power default to
//! zero because a storage cell has no read path of its own. `LUT6` entries
//! accept an optional `mux_delay` that is added to `delay`; it defaults to
//! 30 ps in dual mode and 0 otherwise.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::device::{DeviceError, DeviceParams};
use crate::kvfile::{Dimension, Document, Entry, KvError, Section};

/// Default select-mux delay added to dual-configuration LUT6 reads.
pub const DEFAULT_DUAL_MUX_DELAY: f64 = 30e-12;

/// Largest allowed gap between a declared area ratio and the absolute areas.
const RATIO_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TechError {
    #[error("tech file: {0}")]
    Parse(#[from] KvError),
    #[error("tech file: invalid `{field}`: {msg}")]
    Invalid { field: String, msg: String },
    #[error("tech file: device section: {0}")]
    Device(#[from] DeviceError),
    #[error("{tech} has no entry for {kind} in {mode} mode")]
    Lookup {
        tech: TechName,
        kind: PrimitiveKind,
        mode: ConfigMode,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TechName {
    Sram,
    Fefet1Cfg,
    Fefet2Cfg,
    Rram,
    SttMram,
}

impl TechName {
    pub const ALL: [TechName; 5] = [
        TechName::Sram,
        TechName::Fefet1Cfg,
        TechName::Fefet2Cfg,
        TechName::Rram,
        TechName::SttMram,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TechName::Sram => "SRAM",
            TechName::Fefet1Cfg => "FEFET_1CFG",
            TechName::Fefet2Cfg => "FEFET_2CFG",
            TechName::Rram => "RRAM",
            TechName::SttMram => "STT_MRAM",
        }
    }

    pub fn is_fefet(self) -> bool {
        matches!(self, TechName::Fefet1Cfg | TechName::Fefet2Cfg)
    }
}

impl fmt::Display for TechName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TechName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TechName::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown technology `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PrimitiveKind {
    LutCell,
    Lut6,
    CbSwitch,
    SbSwitch,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 4] = [
        PrimitiveKind::LutCell,
        PrimitiveKind::Lut6,
        PrimitiveKind::CbSwitch,
        PrimitiveKind::SbSwitch,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PrimitiveKind::LutCell => "LUT_CELL",
            PrimitiveKind::Lut6 => "LUT6",
            PrimitiveKind::CbSwitch => "CB_SWITCH",
            PrimitiveKind::SbSwitch => "SB_SWITCH",
        }
    }
}

impl fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PrimitiveKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PrimitiveKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown primitive kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConfigMode {
    Single,
    Dual,
}

impl ConfigMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ConfigMode::Single => "single",
            ConfigMode::Dual => "dual",
        }
    }
}

impl fmt::Display for ConfigMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConfigMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "single" => Ok(ConfigMode::Single),
            "dual" => Ok(ConfigMode::Dual),
            _ => Err(format!("unknown configuration mode `{s}`")),
        }
    }
}

/// Area in λ², delay in seconds, power in watts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostTriple {
    pub area: f64,
    pub delay: f64,
    pub power: f64,
}

impl CostTriple {
    fn metrics(&self) -> [f64; 3] {
        [self.area, self.delay, self.power]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resistance {
    pub r_on: f64,
    pub r_off: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TechModel {
    pub name: TechName,
    /// Mode used when the model is applied to a whole fabric.
    pub mode: ConfigMode,
    entries: BTreeMap<(PrimitiveKind, ConfigMode), CostTriple>,
    /// Select-mux part of each LUT6 delay, already folded into the entry.
    mux_delays: BTreeMap<ConfigMode, f64>,
    pub device: Option<DeviceParams>,
    pub resistance: Option<Resistance>,
    /// Constant static power; zero for nonvolatile technologies by default.
    pub static_power: f64,
}

impl TechModel {
    pub fn entries(&self) -> impl Iterator<Item = (PrimitiveKind, ConfigMode, CostTriple)> + '_ {
        self.entries.iter().map(|(&(k, m), &c)| (k, m, c))
    }

    pub fn mux_delay(&self, mode: ConfigMode) -> f64 {
        self.mux_delays.get(&mode).copied().unwrap_or(0.0)
    }

    /// Entry at the model's own mode.
    pub fn cost(&self, kind: PrimitiveKind) -> Result<CostTriple, TechError> {
        primitive_cost(self, kind, self.mode)
    }

    /// Copy with every delay multiplied by `factor`.
    pub fn scale_delays(&self, factor: f64) -> TechModel {
        let mut out = self.clone();
        for c in out.entries.values_mut() {
            c.delay *= factor;
        }
        out
    }

    /// Copy with one entry replaced.
    pub fn with_entry(&self, kind: PrimitiveKind, mode: ConfigMode, cost: CostTriple) -> TechModel {
        let mut out = self.clone();
        out.entries.insert((kind, mode), cost);
        out
    }
}

/// Looks up one primitive triple.
pub fn primitive_cost(
    model: &TechModel,
    kind: PrimitiveKind,
    mode: ConfigMode,
) -> Result<CostTriple, TechError> {
    model
        .entries
        .get(&(kind, mode))
        .copied()
        .ok_or(TechError::Lookup {
            tech: model.name,
            kind,
            mode,
        })
}

fn invalid(field: impl Into<String>, msg: impl Into<String>) -> TechError {
    TechError::Invalid {
        field: field.into(),
        msg: msg.into(),
    }
}

fn positive(section: &Section, entry: &Entry, dim: Dimension) -> Result<f64, TechError> {
    let v = entry.quantity(dim)?;
    if v <= 0.0 {
        return Err(invalid(
            section.path(&entry.key),
            format!("must be positive, got {}", entry.value),
        ));
    }
    Ok(v)
}

fn enum_value<T: FromStr<Err = String>>(entry: &Entry) -> Result<T, TechError> {
    entry.value.parse().map_err(|msg: String| {
        TechError::Parse(KvError::Value {
            line: entry.line,
            key: entry.key.clone(),
            msg,
        })
    })
}

/// Parses and validates a tech-model file.
pub fn load_tech_model(text: &str) -> Result<TechModel, TechError> {
    let doc = Document::parse(text)?;
    let root = doc.root();
    let name: TechName = enum_value(root.require("technology")?)?;
    let mode: ConfigMode = match root.get("mode") {
        Some(e) => enum_value(e)?,
        None if name == TechName::Fefet2Cfg => ConfigMode::Dual,
        None => ConfigMode::Single,
    };

    let mut entries = BTreeMap::new();
    let mut mux_delays = BTreeMap::new();
    for kind in PrimitiveKind::ALL {
        for (sub, section) in doc.children(kind.as_str()) {
            let entry_mode: ConfigMode = sub.parse().map_err(|msg: String| {
                TechError::Parse(KvError::Syntax {
                    line: section.line,
                    msg,
                })
            })?;
            let cost = load_entry(kind, entry_mode, section)?;
            if kind == PrimitiveKind::Lut6 {
                let mux = match section.get("mux_delay") {
                    Some(e) => {
                        let v = e.quantity(Dimension::Time)?;
                        if v < 0.0 {
                            return Err(invalid(section.path("mux_delay"), "must not be negative"));
                        }
                        v
                    }
                    None if entry_mode == ConfigMode::Dual => DEFAULT_DUAL_MUX_DELAY,
                    None => 0.0,
                };
                mux_delays.insert(entry_mode, mux);
                entries.insert(
                    (kind, entry_mode),
                    CostTriple {
                        delay: cost.delay + mux,
                        ..cost
                    },
                );
            } else {
                entries.insert((kind, entry_mode), cost);
            }
        }
    }
    for section in &doc.sections {
        let known = section.name.is_empty()
            || matches!(section.name.as_str(), "device" | "resistance" | "leakage")
            || PrimitiveKind::ALL
                .iter()
                .any(|k| section.name.starts_with(&format!("{}.", k.as_str())));
        if !known {
            return Err(TechError::Parse(KvError::Syntax {
                line: section.line,
                msg: format!("unknown section [{}]", section.name),
            }));
        }
    }

    for kind in PrimitiveKind::ALL {
        if !entries.contains_key(&(kind, mode)) {
            return Err(invalid(
                format!("{}.{}", kind.as_str(), mode.as_str()),
                "entry required for the model's mode",
            ));
        }
    }
    if name == TechName::Fefet2Cfg && mode != ConfigMode::Dual {
        return Err(invalid("mode", "FEFET_2CFG models must use dual mode"));
    }

    let device = if name.is_fefet() {
        let mut params = DeviceParams::default();
        if let Some(s) = doc.section("device") {
            load_device(s, &mut params)?;
        }
        params.validate()?;
        Some(params)
    } else {
        if doc.section("device").is_some() {
            return Err(invalid("device", "only FeFET models carry a device section"));
        }
        None
    };

    let resistance = match doc.section("resistance") {
        Some(s) => {
            let r_on = positive(s, s.require("r_on")?, Dimension::Resistance)?;
            let r_off = positive(s, s.require("r_off")?, Dimension::Resistance)?;
            if r_off <= r_on {
                return Err(invalid("resistance.r_off", "must exceed r_on"));
            }
            Some(Resistance { r_on, r_off })
        }
        None => None,
    };

    let static_power = match doc.section("leakage").and_then(|s| s.get("static_power")) {
        Some(e) => {
            let v = e.quantity(Dimension::Power)?;
            if v < 0.0 {
                return Err(invalid("leakage.static_power", "must not be negative"));
            }
            v
        }
        None => 0.0,
    };

    Ok(TechModel {
        name,
        mode,
        entries,
        mux_delays,
        device,
        resistance,
        static_power,
    })
}

fn load_entry(kind: PrimitiveKind, mode: ConfigMode, s: &Section) -> Result<CostTriple, TechError> {
    for e in &s.entries {
        let allowed = matches!(
            e.key.as_str(),
            "area" | "delay" | "power" | "area_ratio" | "baseline_area"
        ) || (kind == PrimitiveKind::Lut6 && e.key == "mux_delay");
        if !allowed {
            return Err(TechError::Parse(KvError::Value {
                line: e.line,
                key: e.key.clone(),
                msg: format!("unknown field in [{}]", s.name),
            }));
        }
    }
    let area = positive(s, s.require("area")?, Dimension::Area)?;
    let optional = kind == PrimitiveKind::LutCell;
    let metric = |key: &str, dim| -> Result<f64, TechError> {
        match s.get(key) {
            Some(e) => positive(s, e, dim),
            None if optional => Ok(0.0),
            None => Err(TechError::Parse(KvError::Missing {
                section: s.name.clone(),
                key: key.to_string(),
            })),
        }
    };
    let delay = metric("delay", Dimension::Time)?;
    let power = metric("power", Dimension::Power)?;

    if let Some(ratio) = s.get("area_ratio") {
        let r = positive(s, ratio, Dimension::Dimensionless)?;
        let base = positive(s, s.require("baseline_area")?, Dimension::Area)?;
        if ((area / base) - r).abs() > RATIO_TOLERANCE {
            return Err(invalid(
                s.path("area_ratio"),
                format!(
                    "{r} disagrees with area/baseline_area = {:.4} ({mode} {kind})",
                    area / base
                ),
            ));
        }
    }
    Ok(CostTriple { area, delay, power })
}

fn load_device(s: &Section, params: &mut DeviceParams) -> Result<(), TechError> {
    for e in &s.entries {
        let (slot, dim) = match e.key.as_str() {
            "v_th_low" => (&mut params.v_th_low, Dimension::Voltage),
            "v_th_high" => (&mut params.v_th_high, Dimension::Voltage),
            "v_read" => (&mut params.v_read, Dimension::Voltage),
            "v_write" => (&mut params.v_write, Dimension::Voltage),
            "t_write" => (&mut params.t_write, Dimension::Time),
            "r_on" => (&mut params.r_on, Dimension::Resistance),
            "r_off" => (&mut params.r_off, Dimension::Resistance),
            "t0" => (&mut params.t0, Dimension::Time),
            "v0" => (&mut params.v0, Dimension::Voltage),
            "v_s" => (&mut params.v_s, Dimension::Voltage),
            _ => {
                return Err(TechError::Parse(KvError::Value {
                    line: e.line,
                    key: e.key.clone(),
                    msg: "unknown device parameter".into(),
                }))
            }
        };
        *slot = e.quantity(dim)?;
    }
    Ok(())
}

/// Text of a shipped tech-model file.
pub fn shipped_text(name: TechName) -> &'static str {
    match name {
        TechName::Sram => include_str!("../data/tech/sram.tech"),
        TechName::Fefet1Cfg => include_str!("../data/tech/fefet_1cfg.tech"),
        TechName::Fefet2Cfg => include_str!("../data/tech/fefet_2cfg.tech"),
        TechName::Rram => include_str!("../data/tech/rram.tech"),
        TechName::SttMram => include_str!("../data/tech/stt_mram.tech"),
    }
}

pub fn shipped(name: TechName) -> TechModel {
    load_tech_model(shipped_text(name)).expect("shipped tech files are valid")
}

/// Primitive counts of a design or fabric.
pub type DesignStats = BTreeMap<PrimitiveKind, u64>;

/// Percentage deltas of candidate against baseline, `None` where the
/// baseline value is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deltas {
    pub area: Option<f64>,
    pub delay: Option<f64>,
    pub power: Option<f64>,
}

impl Deltas {
    fn between(base: &CostTriple, cand: &CostTriple, f: impl Fn(f64, f64) -> f64) -> Self {
        let pick = |b: f64, c: f64| (b != 0.0).then(|| f(b, c));
        Deltas {
            area: pick(base.area, cand.area),
            delay: pick(base.delay, cand.delay),
            power: pick(base.power, cand.power),
        }
    }
}

/// 100·(baseline − candidate)/baseline.
pub fn reduction_percent(baseline: f64, candidate: f64) -> f64 {
    100.0 * (baseline - candidate) / baseline
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionRow {
    pub kind: PrimitiveKind,
    pub baseline: CostTriple,
    pub candidate: CostTriple,
    pub reduction: Deltas,
    /// Candidate as a percentage of baseline.
    pub relative: Deltas,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionReport {
    pub baseline: TechName,
    pub candidate: TechName,
    pub rows: Vec<ReductionRow>,
    pub stats: DesignStats,
    /// Σ count × value per metric.
    pub baseline_total: CostTriple,
    pub candidate_total: CostTriple,
    pub aggregate: Deltas,
}

impl ReductionReport {
    pub fn row(&self, kind: PrimitiveKind) -> Option<&ReductionRow> {
        self.rows.iter().find(|r| r.kind == kind)
    }
}

/// Rounds a percentage to one decimal place for reporting.
pub fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

/// Compares two technologies per primitive and over a design's counts.
pub fn compare_report(
    baseline: &TechModel,
    candidate: &TechModel,
    stats: &DesignStats,
) -> Result<ReductionReport, TechError> {
    let mut rows = Vec::new();
    for kind in PrimitiveKind::ALL {
        let b = baseline.cost(kind)?;
        let c = candidate.cost(kind)?;
        rows.push(ReductionRow {
            kind,
            baseline: b,
            candidate: c,
            reduction: Deltas::between(&b, &c, reduction_percent),
            relative: Deltas::between(&b, &c, |b, c| 100.0 * c / b),
        });
    }
    let mut bt = [0.0f64; 3];
    let mut ct = [0.0f64; 3];
    for (&kind, &count) in stats {
        let b = baseline.cost(kind)?.metrics();
        let c = candidate.cost(kind)?.metrics();
        for i in 0..3 {
            bt[i] += count as f64 * b[i];
            ct[i] += count as f64 * c[i];
        }
    }
    let baseline_total = CostTriple {
        area: bt[0],
        delay: bt[1],
        power: bt[2],
    };
    let candidate_total = CostTriple {
        area: ct[0],
        delay: ct[1],
        power: ct[2],
    };
    Ok(ReductionReport {
        baseline: baseline.name,
        candidate: candidate.name,
        rows,
        stats: stats.clone(),
        aggregate: Deltas::between(&baseline_total, &candidate_total, reduction_percent),
        baseline_total,
        candidate_total,
    })
}

fn pct(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{:.1}%", round1(v)),
        None => "n/a".into(),
    }
}

impl fmt::Display for ReductionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "baseline {}  candidate {}", self.baseline, self.candidate)?;
        writeln!(
            f,
            "{:<10} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}",
            "primitive", "area red.", "delay red.", "power red.", "area rel.", "delay rel.", "power rel."
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<10} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}",
                r.kind.as_str(),
                pct(r.reduction.area),
                pct(r.reduction.delay),
                pct(r.reduction.power),
                pct(r.relative.area),
                pct(r.relative.delay),
                pct(r.relative.power),
            )?;
        }
        let counts: Vec<String> = self
            .stats
            .iter()
            .map(|(k, n)| format!("{}={n}", k.as_str()))
            .collect();
        writeln!(f, "aggregate over {}", counts.join(" "))?;
        writeln!(
            f,
            "{:<10} {:>12} {:>12} {:>12}",
            "total",
            pct(self.aggregate.area),
            pct(self.aggregate.delay),
            pct(self.aggregate.power)
        )
    }
}
