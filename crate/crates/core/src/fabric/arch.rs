// SPDX-License-Identifier: Apache-2.0

//! Island-style fabric description.
//!
//! Coordinates follow the usual island layout: CLBs occupy `(1..=W,
//! 1..=H)`, IO sites ring the grid at `x = 0`, `x = W+1`, `y = 0` and
//! `y = H+1`. Horizontal channel `CHANX(x, y)` runs above CLB row `y` and
//! vertical channel `CHANY(x, y)` to the right of CLB column `x`, so
//! channel coordinates include 0. Switch boxes sit at every channel
//! crossing `(0..=W, 0..=H)`.
//!
//! Architecture file:
//!
//! ```text
//! [grid]
//! width = 3
//! height = 3
//! io_capacity = 2           # pads per IO site
//! [clb]
//! n = 4                     # BLEs per CLB
//! k = 4                     # LUT inputs
//! inputs = 10               # CLB input pins
//! [routing]
//! channel_width = 6
//! sb_pattern = wilton       # wilton | disjoint
//! fc = 0.5                  # fraction of tracks each CLB pin taps
//! ```

use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::kvfile::{Dimension, Document, Entry, KvError, Section};
use crate::primitives::{MAX_K, MIN_K};
use crate::techlib::{DesignStats, PrimitiveKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArchError {
    #[error("arch file: {0}")]
    Parse(#[from] KvError),
    #[error("arch file: invalid `{field}`: {msg}")]
    Invalid { field: &'static str, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SbPattern {
    Disjoint,
    Wilton,
}

impl fmt::Display for SbPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SbPattern::Disjoint => "disjoint",
            SbPattern::Wilton => "wilton",
        })
    }
}

/// Side of a switch box or CLB.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl SbPattern {
    /// Track on side `to` reached from track `t` on side `from`.
    ///
    /// Only the six canonical pairs (`from` < `to` in [`Side`] order) are
    /// used; each mapping is a permutation of the tracks.
    pub fn map(self, from: Side, to: Side, t: usize, w: usize) -> usize {
        use Side::*;
        if self == SbPattern::Disjoint {
            return t;
        }
        match (from, to) {
            (Left, Right) | (Bottom, Top) => t,
            (Left, Top) => (w - t) % w,
            (Left, Bottom) => (t + w - 1) % w,
            (Right, Top) => (t + w - 1) % w,
            (Right, Bottom) => (2 * w - 2 - t) % w,
            _ => panic!("non-canonical side pair {from:?}->{to:?}"),
        }
    }
}

/// Side pairs that a switch box connects, in switch-numbering order.
pub const SB_PAIRS: [(Side, Side); 6] = [
    (Side::Left, Side::Right),
    (Side::Bottom, Side::Top),
    (Side::Left, Side::Top),
    (Side::Left, Side::Bottom),
    (Side::Right, Side::Top),
    (Side::Right, Side::Bottom),
];

/// Sides a CLB pin taps, in switch-numbering order.
pub const CLB_SIDES: [Side; 4] = [Side::Bottom, Side::Top, Side::Left, Side::Right];

/// One pad slot of an IO site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PadSite {
    pub x: usize,
    pub y: usize,
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FabricArch {
    pub width: usize,
    pub height: usize,
    pub io_capacity: usize,
    /// BLEs per CLB.
    pub n: usize,
    pub k: usize,
    /// CLB input pins.
    pub inputs: usize,
    pub channel_width: usize,
    pub sb_pattern: SbPattern,
    pub fc: f64,
}

impl Default for FabricArch {
    fn default() -> Self {
        FabricArch {
            width: 6,
            height: 6,
            io_capacity: 4,
            n: 8,
            k: 6,
            inputs: 27,
            channel_width: 16,
            sb_pattern: SbPattern::Wilton,
            fc: 0.5,
        }
    }
}

fn count(section: Option<&Section>, key: &str, default: usize) -> Result<usize, KvError> {
    match section.and_then(|s| s.get(key)) {
        Some(e) => e.parse(),
        None => Ok(default),
    }
}

fn parse_pattern(e: &Entry) -> Result<SbPattern, KvError> {
    match e.value.to_ascii_lowercase().as_str() {
        "wilton" => Ok(SbPattern::Wilton),
        "disjoint" => Ok(SbPattern::Disjoint),
        other => Err(KvError::Value {
            line: e.line,
            key: e.key.clone(),
            msg: format!("unknown switch-box pattern `{other}`"),
        }),
    }
}

impl FabricArch {
    /// Parses an architecture file; omitted keys keep [`Default`] values.
    pub fn parse(text: &str) -> Result<FabricArch, ArchError> {
        let doc = Document::parse(text)?;
        for s in &doc.sections {
            if !matches!(s.name.as_str(), "" | "grid" | "clb" | "routing") {
                return Err(ArchError::Parse(KvError::Syntax {
                    line: s.line,
                    msg: format!("unknown section [{}]", s.name),
                }));
            }
        }
        let d = FabricArch::default();
        let grid = doc.section("grid");
        let clb = doc.section("clb");
        let routing = doc.section("routing");
        let fc = match routing.and_then(|s| s.get("fc")) {
            Some(e) => e.quantity(Dimension::Dimensionless)?,
            None => d.fc,
        };
        let arch = FabricArch {
            width: count(grid, "width", d.width)?,
            height: count(grid, "height", d.height)?,
            io_capacity: count(grid, "io_capacity", d.io_capacity)?,
            n: count(clb, "n", d.n)?,
            k: count(clb, "k", d.k)?,
            inputs: count(clb, "inputs", d.inputs)?,
            channel_width: count(routing, "channel_width", d.channel_width)?,
            sb_pattern: match routing.and_then(|s| s.get("sb_pattern")) {
                Some(e) => parse_pattern(e)?,
                None => d.sb_pattern,
            },
            fc,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<(), ArchError> {
        let bad = |field, msg: &str| Err(ArchError::Invalid { field, msg: msg.to_string() });
        if self.width == 0 || self.height == 0 {
            return bad("grid", "width and height must be at least 1");
        }
        if self.io_capacity == 0 {
            return bad("io_capacity", "must be at least 1");
        }
        if self.n == 0 || self.n > 255 {
            return bad("n", "must be in 1..=255");
        }
        if !(MIN_K..=MAX_K).contains(&self.k) {
            return bad("k", "must be in 2..=6");
        }
        if self.inputs == 0 || self.inputs > 255 {
            return bad("inputs", "must be in 1..=255");
        }
        if self.channel_width == 0 {
            return bad("channel_width", "must be at least 1");
        }
        if !(self.fc > 0.0 && self.fc <= 1.0) {
            return bad("fc", "must be in (0, 1]");
        }
        Ok(())
    }

    /// Canonical text form; equal architectures have equal text.
    pub fn canonical(&self) -> String {
        format!(
            "[grid]\nwidth = {}\nheight = {}\nio_capacity = {}\n[clb]\nn = {}\nk = {}\ninputs = {}\n\
             [routing]\nchannel_width = {}\nsb_pattern = {}\nfc = {}\n",
            self.width,
            self.height,
            self.io_capacity,
            self.n,
            self.k,
            self.inputs,
            self.channel_width,
            self.sb_pattern,
            self.fc
        )
    }

    /// First four bytes (little-endian) of the SHA-256 of [`canonical`].
    ///
    /// [`canonical`]: FabricArch::canonical
    pub fn hash(&self) -> u32 {
        let digest = Sha256::digest(self.canonical().as_bytes());
        u32::from_le_bytes([digest[0], digest[1], digest[2], digest[3]])
    }

    pub fn clb_count(&self) -> usize {
        self.width * self.height
    }

    /// Row-major CLB index of site (x, y).
    pub fn clb_index(&self, x: usize, y: usize) -> usize {
        (y - 1) * self.width + (x - 1)
    }

    pub fn clb_site(&self, index: usize) -> (usize, usize) {
        (index % self.width + 1, index / self.width + 1)
    }

    /// Pad slots: bottom row, top row, left column, right column, each in
    /// increasing coordinate, slots innermost.
    pub fn pad_sites(&self) -> Vec<PadSite> {
        let (w, h) = (self.width, self.height);
        let mut sites = Vec::with_capacity(2 * (w + h) * self.io_capacity);
        let ring = (1..=w)
            .map(|x| (x, 0))
            .chain((1..=w).map(|x| (x, h + 1)))
            .chain((1..=h).map(|y| (0, y)))
            .chain((1..=h).map(|y| (w + 1, y)));
        for (x, y) in ring {
            for slot in 0..self.io_capacity {
                sites.push(PadSite { x, y, slot });
            }
        }
        sites
    }

    /// Tracks a CLB pin taps on each side.
    pub fn fc_tracks(&self) -> usize {
        ((self.fc * self.channel_width as f64).round() as usize).clamp(1, self.channel_width)
    }

    /// Tracks tapped by pin `pin` (inputs first, then outputs) on `side`.
    pub fn pin_tracks(&self, pin: usize, side: usize) -> impl Iterator<Item = usize> {
        let w = self.channel_width;
        let start = (pin + side) % w;
        (0..self.fc_tracks()).map(move |j| (start + j) % w)
    }

    /// Pins per CLB: `inputs` input pins then `n` output pins.
    pub fn clb_pins(&self) -> usize {
        self.inputs + self.n
    }

    pub fn cb_switch_count(&self) -> usize {
        self.clb_count() * self.clb_pins() * CLB_SIDES.len() * self.fc_tracks()
            + self.pad_sites().len() * self.channel_width
    }

    /// Sides of switch box (x, y) that have a channel segment.
    pub fn sb_sides(&self, x: usize, y: usize) -> [bool; 4] {
        [x >= 1, x < self.width, y >= 1, y < self.height]
    }

    pub fn sb_switch_count(&self) -> usize {
        let mut total = 0;
        for y in 0..=self.height {
            for x in 0..=self.width {
                let present = self.sb_sides(x, y);
                total += SB_PAIRS
                    .iter()
                    .filter(|(a, b)| present[*a as usize] && present[*b as usize])
                    .count();
            }
        }
        total * self.channel_width
    }

    /// Width of one encoded crossbar select: open, `inputs` pins, `n`
    /// feedbacks.
    pub fn select_bits(&self) -> usize {
        let choices = 1 + self.inputs + self.n;
        (usize::BITS - (choices - 1).leading_zeros()) as usize
    }

    /// Configuration bits of one BLE: LUT table, FF enable, FF init, then
    /// one select per LUT input.
    pub fn ble_bits(&self) -> usize {
        (1 << self.k) + 2 + self.k * self.select_bits()
    }

    pub fn bitstream_len(&self) -> usize {
        self.clb_count() * self.n * self.ble_bits() + self.cb_switch_count() + self.sb_switch_count()
    }

    /// Primitive counts used for fabric-level cost aggregation. LUT storage
    /// cells are already part of each LUT6 entry and are not counted again.
    pub fn primitive_counts(&self) -> DesignStats {
        [
            (PrimitiveKind::Lut6, (self.clb_count() * self.n) as u64),
            (PrimitiveKind::CbSwitch, self.cb_switch_count() as u64),
            (PrimitiveKind::SbSwitch, self.sb_switch_count() as u64),
        ]
        .into_iter()
        .collect()
    }
}
