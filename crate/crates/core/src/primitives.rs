// SPDX-License-Identifier: Apache-2.0

//! Configurable primitives built on FeFET states.
//!
//! * [`LutConfig`]: a k-input LUT whose 2^k cells each hold one FeFET.
//!   A high-V_TH cell stays cut off at the read bias, so the pull-up wins
//!   and the output reads '1'; a low-V_TH cell conducts and pulls the
//!   output to '0'.
//! * [`DualLut`]: two LUT planes behind a select mux.
//! * [`DualSwitch`]: the 2T-2FeFET routing element used by connection and
//!   switch boxes. Each branch is a FeFET in series with an enable
//!   transistor; a switch branch conducts when its FeFET is low-V_TH.
//!
//! LUT inputs are little-endian: input 0 is the least significant bit of
//! the truth-table index.

use std::fmt;

use thiserror::Error;

use crate::device::{
    apply_step, program_two_step, read_conductance, BitMatrix, Conduction, DeviceError,
    DeviceParams, FeFETArray, FeFETState,
};

pub const MIN_K: usize = 2;
pub const MAX_K: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PrimitiveError {
    #[error("LUT input count {0} outside {MIN_K}..={MAX_K}")]
    InvalidK(usize),
    #[error("expected {expected} inputs, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("expected {expected} configuration bits, got {got}")]
    BitCount { expected: usize, got: usize },
    #[error("context {0} is active and cannot be reprogrammed")]
    ContextInUse(ContextId),
    #[error("programming left {mismatches} cell(s) off target")]
    ProgramMismatch { mismatches: usize },
    #[error(transparent)]
    Device(#[from] DeviceError),
}

/// One of the two configuration planes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ContextId {
    One,
    Two,
}

impl ContextId {
    pub const BOTH: [ContextId; 2] = [ContextId::One, ContextId::Two];

    pub fn other(self) -> ContextId {
        match self {
            ContextId::One => ContextId::Two,
            ContextId::Two => ContextId::One,
        }
    }

    /// Zero-based plane index.
    pub fn index(self) -> usize {
        match self {
            ContextId::One => 0,
            ContextId::Two => 1,
        }
    }

    pub fn number(self) -> u32 {
        self.index() as u32 + 1
    }

    pub fn from_number(n: u32) -> Option<ContextId> {
        match n {
            1 => Some(ContextId::One),
            2 => Some(ContextId::Two),
            _ => None,
        }
    }
}

impl fmt::Display for ContextId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl std::str::FromStr for ContextId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim()
            .parse::<u32>()
            .ok()
            .and_then(ContextId::from_number)
            .ok_or_else(|| format!("context id must be 1 or 2, found `{s}`"))
    }
}

/// Truth-table index of `inputs`, input 0 least significant.
pub fn lut_index(inputs: &[bool]) -> usize {
    inputs
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &b)| acc | (usize::from(b) << i))
}

/// Shape of the cell array holding a k-input LUT plane.
fn lut_shape(k: usize) -> (usize, usize) {
    (1 << k.div_ceil(2), 1 << (k / 2))
}

/// One LUT configuration plane.
#[derive(Debug, Clone, PartialEq)]
pub struct LutConfig {
    k: usize,
    cells: FeFETArray,
    /// Pull-up bias of the sense stage; the comparator is ideal, so it only
    /// documents the operating point.
    pub v_b: f64,
    pub params: DeviceParams,
}

impl LutConfig {
    pub fn from_bits(k: usize, bits: &[bool]) -> Result<Self, PrimitiveError> {
        Self::with_params(k, bits, DeviceParams::default())
    }

    pub fn with_params(k: usize, bits: &[bool], params: DeviceParams) -> Result<Self, PrimitiveError> {
        if !(MIN_K..=MAX_K).contains(&k) {
            return Err(PrimitiveError::InvalidK(k));
        }
        if bits.len() != 1 << k {
            return Err(PrimitiveError::BitCount {
                expected: 1 << k,
                got: bits.len(),
            });
        }
        let (rows, cols) = lut_shape(k);
        let cells = FeFETArray::from_states(
            rows,
            cols,
            bits.iter().map(|&b| FeFETState::from_bit(b)).collect(),
        );
        Ok(LutConfig {
            k,
            cells,
            v_b: params.v_read,
            params,
        })
    }

    /// Plane with every cell erased to low-V_TH (constant 0).
    pub fn erased(k: usize) -> Result<Self, PrimitiveError> {
        Self::from_bits(k, &vec![false; 1 << k])
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn cells(&self) -> &FeFETArray {
        &self.cells
    }

    /// Bits decoded by reading every cell at `v_read`.
    pub fn bits(&self) -> Vec<bool> {
        self.cells.read_bits(&self.params).bits
    }

    fn read_cell(&self, index: usize) -> bool {
        let state = self.cells.cells()[index];
        read_conductance(state, self.params.v_read, &self.params) == Conduction::Off
    }

    /// Runs the two-step protocol to store `bits`, returning the plane after
    /// each pulse step.
    pub fn program_steps(&self, bits: &[bool]) -> Result<Vec<LutConfig>, PrimitiveError> {
        if bits.len() != 1 << self.k {
            return Err(PrimitiveError::BitCount {
                expected: 1 << self.k,
                got: bits.len(),
            });
        }
        let (rows, cols) = lut_shape(self.k);
        let target = BitMatrix::new(rows, cols, bits.to_vec());
        let outcome = program_two_step(&self.cells, &target, &self.params)?;
        let mut snapshots = Vec::with_capacity(outcome.plan.len());
        let mut array = self.cells.clone();
        for step in &outcome.plan {
            apply_step(&mut array, step, &self.params);
            snapshots.push(LutConfig {
                cells: array.clone(),
                ..self.clone()
            });
        }
        let mismatches = array
            .read_bits(&self.params)
            .bits
            .iter()
            .zip(bits)
            .filter(|(a, b)| a != b)
            .count();
        if mismatches > 0 {
            return Err(PrimitiveError::ProgramMismatch { mismatches });
        }
        Ok(snapshots)
    }
}

/// Evaluates one LUT plane through its sense path.
pub fn lut_eval(lut: &LutConfig, inputs: &[bool]) -> Result<bool, PrimitiveError> {
    if inputs.len() != lut.k {
        return Err(PrimitiveError::Arity {
            expected: lut.k,
            got: inputs.len(),
        });
    }
    Ok(lut.read_cell(lut_index(inputs)))
}

/// Two LUT planes and a select mux.
#[derive(Debug, Clone, PartialEq)]
pub struct DualLut {
    planes: [LutConfig; 2],
    active: ContextId,
}

impl DualLut {
    pub fn new(plane1: LutConfig, plane2: LutConfig, active: ContextId) -> Result<Self, PrimitiveError> {
        if plane1.k != plane2.k {
            return Err(PrimitiveError::Arity {
                expected: plane1.k,
                got: plane2.k,
            });
        }
        Ok(DualLut {
            planes: [plane1, plane2],
            active,
        })
    }

    pub fn k(&self) -> usize {
        self.planes[0].k
    }

    pub fn active(&self) -> ContextId {
        self.active
    }

    pub fn plane(&self, ctx: ContextId) -> &LutConfig {
        &self.planes[ctx.index()]
    }

    /// Drives the select mux to `ctx`.
    pub fn set_active(&mut self, ctx: ContextId) {
        self.active = ctx;
    }

    /// Reprograms the inactive plane, returning the primitive after each
    /// pulse step of the two-step protocol.
    pub fn reprogram_steps(&self, ctx: ContextId, bits: &[bool]) -> Result<Vec<DualLut>, PrimitiveError> {
        if ctx == self.active {
            return Err(PrimitiveError::ContextInUse(ctx));
        }
        let snapshots = self.planes[ctx.index()].program_steps(bits)?;
        Ok(snapshots
            .into_iter()
            .map(|plane| {
                let mut next = self.clone();
                next.planes[ctx.index()] = plane;
                next
            })
            .collect())
    }
}

/// Evaluates the active plane; the inactive plane is never read.
pub fn dual_lut_eval(d: &DualLut, inputs: &[bool]) -> Result<bool, PrimitiveError> {
    lut_eval(&d.planes[d.active.index()], inputs)
}

/// One branch of a dual switch: FeFET plus serial enable transistor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Branch {
    pub state: FeFETState,
    pub enable: bool,
}

/// Switch storage convention: a conducting branch holds low-V_TH.
pub fn switch_state(conducting: bool) -> FeFETState {
    if conducting {
        FeFETState::LowVth
    } else {
        FeFETState::HighVth
    }
}

/// Result of driving a level into a switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transmit {
    Pass(bool),
    /// No conducting path; the output is pulled low.
    Blocked,
}

impl Transmit {
    pub fn level(self) -> bool {
        match self {
            Transmit::Pass(b) => b,
            Transmit::Blocked => false,
        }
    }
}

/// 2T-2FeFET routing switch with one branch per context.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSwitch {
    branches: [Branch; 2],
    active: ContextId,
    pub params: DeviceParams,
}

impl DualSwitch {
    pub fn new(state1: FeFETState, state2: FeFETState, active: ContextId) -> Self {
        let mut s = DualSwitch {
            branches: [
                Branch {
                    state: state1,
                    enable: false,
                },
                Branch {
                    state: state2,
                    enable: false,
                },
            ],
            active,
            params: DeviceParams::default(),
        };
        s.set_active(active);
        s
    }

    /// Switch from conducting flags, one per context.
    pub fn from_bits(on1: bool, on2: bool, active: ContextId) -> Self {
        DualSwitch::new(switch_state(on1), switch_state(on2), active)
    }

    pub fn active(&self) -> ContextId {
        self.active
    }

    pub fn branch(&self, ctx: ContextId) -> Branch {
        self.branches[ctx.index()]
    }

    /// Whether the branch of `ctx` is configured to conduct.
    pub fn conducting(&self, ctx: ContextId) -> bool {
        self.branches[ctx.index()].state == FeFETState::LowVth
    }

    /// Turns on the enable transistor of `ctx` and off the other one.
    pub fn set_active(&mut self, ctx: ContextId) {
        self.active = ctx;
        self.branches[ctx.index()].enable = true;
        self.branches[ctx.other().index()].enable = false;
    }

    /// Reprograms the inactive branch, returning the switch after each
    /// pulse step.
    pub fn reprogram_steps(&self, ctx: ContextId, conducting: bool) -> Result<Vec<DualSwitch>, PrimitiveError> {
        if ctx == self.active {
            return Err(PrimitiveError::ContextInUse(ctx));
        }
        let cell = FeFETArray::new(1, 1, self.branches[ctx.index()].state);
        let target = BitMatrix::row_vector(&[switch_state(conducting).bit()]);
        let outcome = program_two_step(&cell, &target, &self.params)?;
        let mut array = cell;
        let mut out = Vec::new();
        for step in &outcome.plan {
            apply_step(&mut array, step, &self.params);
            let mut next = self.clone();
            next.branches[ctx.index()].state = array.get(0, 0);
            out.push(next);
        }
        if array.get(0, 0) != switch_state(conducting) {
            return Err(PrimitiveError::ProgramMismatch { mismatches: 1 });
        }
        Ok(out)
    }
}

/// Passes `input` through the active branch if its FeFET conducts at the
/// read bias. The inactive branch has its enable off and its gate grounded,
/// so it is cut off whatever its state.
pub fn switch_transmit(s: &DualSwitch, input: bool) -> Transmit {
    let conducts = |b: &Branch, gate: f64| b.enable && read_conductance(b.state, gate, &s.params) == Conduction::On;
    let active = &s.branches[s.active.index()];
    let inactive = &s.branches[s.active.other().index()];
    debug_assert!(!conducts(inactive, 0.0));
    if conducts(active, s.params.v_read) {
        Transmit::Pass(input)
    } else {
        Transmit::Blocked
    }
}

/// Primitives whose inactive context can be rewritten in place.
pub trait Reprogrammable: Sized {
    type Bits: ?Sized;

    fn reprogram_steps_of(&self, ctx: ContextId, bits: &Self::Bits) -> Result<Vec<Self>, PrimitiveError>;
}

impl Reprogrammable for DualLut {
    type Bits = [bool];

    fn reprogram_steps_of(&self, ctx: ContextId, bits: &[bool]) -> Result<Vec<Self>, PrimitiveError> {
        self.reprogram_steps(ctx, bits)
    }
}

impl Reprogrammable for DualSwitch {
    type Bits = bool;

    fn reprogram_steps_of(&self, ctx: ContextId, bits: &bool) -> Result<Vec<Self>, PrimitiveError> {
        self.reprogram_steps(ctx, *bits)
    }
}

/// Rewrites the inactive context `ctx` of `p` with the two-step protocol.
/// The active context is bit-identical before and after.
pub fn reprogram_inactive<P: Reprogrammable>(p: &P, ctx: ContextId, bits: &P::Bits) -> Result<P, PrimitiveError> {
    let mut steps = p.reprogram_steps_of(ctx, bits)?;
    Ok(steps.pop().expect("programming always has an erase step"))
}
