// SPDX-License-Identifier: Apache-2.0

//! Behavioral FeFET model.
//!
//! A FeFET is a two-state threshold machine. Write pulses applied between
//! gate and body flip the ferroelectric polarization once the pulse is at
//! least as long as the nucleation-limited switching time
//!
//! ```text
//! t_sw(V) = t0 * exp(-(V - v0) / v_s)
//! ```
//!
//! Arrays are programmed only through their word lines (gates) and body
//! contacts: bit and source lines never see a write voltage, which is why a
//! [`PulseStep`] has no field for them.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeviceError {
    #[error("switching time is undefined for non-positive amplitude {0} V")]
    NonPositiveAmplitude(f64),
    #[error("invalid device parameter `{field}`: {msg}")]
    InvalidParam { field: &'static str, msg: String },
    #[error("target is {target_rows}x{target_cols} but array is {rows}x{cols}")]
    Dimension {
        rows: usize,
        cols: usize,
        target_rows: usize,
        target_cols: usize,
    },
}

/// Electrical and switching parameters of one FeFET technology.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceParams {
    pub v_th_low: f64,
    pub v_th_high: f64,
    pub v_read: f64,
    /// Write amplitude V_W used by the two-step programming scheme.
    pub v_write: f64,
    /// Width of every programming pulse.
    pub t_write: f64,
    pub r_on: f64,
    pub r_off: f64,
    /// Nucleation law: switching time at the reference amplitude `v0`.
    pub t0: f64,
    pub v0: f64,
    /// Nucleation law: amplitude scale of the exponential.
    pub v_s: f64,
}

impl Default for DeviceParams {
    /// Calibrated so that t_sw(4 V) = 10 ns and t_sw(2 V) ≈ 6.2 ms, i.e.
    /// a 1 µs half-select exposure stays three orders of magnitude below
    /// the switching time.
    fn default() -> Self {
        DeviceParams {
            v_th_low: 0.2,
            v_th_high: 1.4,
            v_read: 0.8,
            v_write: 4.0,
            t_write: 1e-6,
            r_on: 1e4,
            r_off: 1e7,
            t0: 10e-9,
            v0: 4.0,
            v_s: 0.15,
        }
    }
}

impl DeviceParams {
    pub fn memory_window(&self) -> f64 {
        self.v_th_high - self.v_th_low
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let bad = |field, msg: &str| {
            Err(DeviceError::InvalidParam {
                field,
                msg: msg.to_string(),
            })
        };
        let all_finite = [
            self.v_th_low,
            self.v_th_high,
            self.v_read,
            self.v_write,
            self.t_write,
            self.r_on,
            self.r_off,
            self.t0,
            self.v0,
            self.v_s,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return bad("device", "all parameters must be finite");
        }
        if self.memory_window() <= 0.0 {
            return bad("v_th_high", "memory window must be positive");
        }
        if !(self.v_th_low < self.v_read && self.v_read < self.v_th_high) {
            return bad("v_read", "must lie strictly inside the memory window");
        }
        if self.r_on <= 0.0 {
            return bad("r_on", "must be positive");
        }
        if self.r_off / self.r_on < 100.0 {
            return bad("r_off", "ON/OFF ratio must be at least 100");
        }
        if self.t0 <= 0.0 {
            return bad("t0", "must be positive");
        }
        if self.v_s <= 0.0 {
            return bad("v_s", "must be positive for a decreasing switching law");
        }
        if self.v_write <= 0.0 {
            return bad("v_write", "must be positive");
        }
        if self.t_write <= 0.0 {
            return bad("t_write", "must be positive");
        }
        Ok(())
    }

    /// Write amplitude seen by half-selected cells.
    pub fn v_inhibit(&self) -> f64 {
        self.v_write / 2.0
    }
}

/// Polarization-set threshold state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeFETState {
    LowVth,
    HighVth,
}

impl FeFETState {
    /// LUT storage convention: bit '1' is stored as high-V_TH.
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            FeFETState::HighVth
        } else {
            FeFETState::LowVth
        }
    }

    pub fn bit(self) -> bool {
        self == FeFETState::HighVth
    }

    pub fn threshold(self, params: &DeviceParams) -> f64 {
        match self {
            FeFETState::LowVth => params.v_th_low,
            FeFETState::HighVth => params.v_th_high,
        }
    }
}

impl fmt::Display for FeFETState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeFETState::LowVth => f.write_str("LOW_VTH"),
            FeFETState::HighVth => f.write_str("HIGH_VTH"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WritePulse {
    /// Gate-to-body voltage; positive erases toward low-V_TH.
    pub amplitude: f64,
    pub width: f64,
}

impl WritePulse {
    pub fn new(amplitude: f64, width: f64) -> Result<Self, DeviceError> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(DeviceError::InvalidParam {
                field: "width",
                msg: format!("pulse width must be positive, got {width}"),
            });
        }
        if !amplitude.is_finite() {
            return Err(DeviceError::InvalidParam {
                field: "amplitude",
                msg: "must be finite".into(),
            });
        }
        Ok(WritePulse { amplitude, width })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conduction {
    On,
    Off,
}

/// Nucleation-limited switching time for a pulse of magnitude `amplitude`.
pub fn switching_time(params: &DeviceParams, amplitude: f64) -> Result<f64, DeviceError> {
    if !(amplitude > 0.0) {
        return Err(DeviceError::NonPositiveAmplitude(amplitude));
    }
    Ok(params.t0 * (-(amplitude - params.v0) / params.v_s).exp())
}

/// Applies one write pulse. Pulses shorter than the switching time at
/// their amplitude leave the state untouched.
pub fn apply_pulse(state: FeFETState, pulse: WritePulse, params: &DeviceParams) -> FeFETState {
    let magnitude = pulse.amplitude.abs();
    let Ok(t_sw) = switching_time(params, magnitude) else {
        return state;
    };
    if pulse.width < t_sw {
        return state;
    }
    if pulse.amplitude > 0.0 {
        FeFETState::LowVth
    } else {
        FeFETState::HighVth
    }
}

/// Channel conduction with `v_gate` on the gate. A grounded (de-activated)
/// gate cuts the device off in either state.
pub fn read_conductance(state: FeFETState, v_gate: f64, params: &DeviceParams) -> Conduction {
    if v_gate > state.threshold(params) {
        Conduction::On
    } else {
        Conduction::Off
    }
}

/// Rectangular block of FeFETs. Each row shares one word line, each column
/// one body contact.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeFETArray {
    rows: usize,
    cols: usize,
    cells: Vec<FeFETState>,
}

impl FeFETArray {
    pub fn new(rows: usize, cols: usize, state: FeFETState) -> Self {
        FeFETArray {
            rows,
            cols,
            cells: vec![state; rows * cols],
        }
    }

    pub fn from_states(rows: usize, cols: usize, cells: Vec<FeFETState>) -> Self {
        assert_eq!(cells.len(), rows * cols, "cell count must equal rows*cols");
        FeFETArray { rows, cols, cells }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> FeFETState {
        self.cells[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, state: FeFETState) {
        self.cells[row * self.cols + col] = state;
    }

    pub fn cells(&self) -> &[FeFETState] {
        &self.cells
    }

    /// Stored bits read at `v_read` through the LUT sense convention
    /// (cut-off cell reads '1').
    pub fn read_bits(&self, params: &DeviceParams) -> BitMatrix {
        let bits = self
            .cells
            .iter()
            .map(|&s| read_conductance(s, params.v_read, params) == Conduction::Off)
            .collect();
        BitMatrix::new(self.rows, self.cols, bits)
    }
}

/// Row-major bit matrix; '1' targets high-V_TH.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    pub rows: usize,
    pub cols: usize,
    pub bits: Vec<bool>,
}

impl BitMatrix {
    pub fn new(rows: usize, cols: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), rows * cols, "bit count must equal rows*cols");
        BitMatrix { rows, cols, bits }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        BitMatrix::new(rows, cols, vec![false; rows * cols])
    }

    pub fn row_vector(bits: &[bool]) -> Self {
        BitMatrix::new(1, bits.len(), bits.to_vec())
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.cols + col]
    }

    /// Parses whitespace-separated rows of `0`/`1` characters.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut rows = 0;
        let mut cols = None;
        let mut bits = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let row: Vec<bool> = line
                .chars()
                .filter(|c| !c.is_whitespace())
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(format!("line {}: unexpected character `{other}`", n + 1)),
                })
                .collect::<Result<_, _>>()?;
            match cols {
                None => cols = Some(row.len()),
                Some(c) if c != row.len() => {
                    return Err(format!("line {}: expected {c} bits, found {}", n + 1, row.len()))
                }
                _ => {}
            }
            bits.extend(row);
            rows += 1;
        }
        let cols = cols.ok_or("empty bit matrix")?;
        Ok(BitMatrix::new(rows, cols, bits))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    /// Every word line at +V_W, bodies grounded.
    Erase,
    /// One word line selected for the negative write.
    SelectiveWrite { row: usize },
}

/// Terminal biases held for one programming pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseStep {
    pub kind: StepKind,
    /// Word-line voltage per row.
    pub word_lines: Vec<f64>,
    /// Body voltage per column.
    pub bodies: Vec<f64>,
    pub width: f64,
}

impl PulseStep {
    /// Gate-to-body voltage seen by cell (row, col).
    pub fn seen(&self, row: usize, col: usize) -> f64 {
        self.word_lines[row] - self.bodies[col]
    }

    /// Whether (row, col) is the intended write target of this step.
    pub fn targets(&self, row: usize, col: usize, target: &BitMatrix) -> bool {
        match self.kind {
            StepKind::Erase => true,
            StepKind::SelectiveWrite { row: r } => r == row && target.get(row, col),
        }
    }
}

/// Applies one programming step to every cell of `array`.
pub fn apply_step(array: &mut FeFETArray, step: &PulseStep, params: &DeviceParams) {
    for r in 0..array.rows {
        for c in 0..array.cols {
            let pulse = WritePulse {
                amplitude: step.seen(r, c),
                width: step.width,
            };
            let idx = r * array.cols + c;
            array.cells[idx] = apply_pulse(array.cells[idx], pulse, params);
        }
    }
}

/// Cell whose accumulated unintended exposure reached a full switching time.
#[derive(Debug, Clone, PartialEq)]
pub struct Disturb {
    pub row: usize,
    pub col: usize,
    /// Largest unintended amplitude seen.
    pub amplitude: f64,
    /// Σ width / t_sw(|amplitude|) over unintended pulses of one polarity.
    pub exposure: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProgramOutcome {
    pub plan: Vec<PulseStep>,
    pub array: FeFETArray,
    pub disturbs: Vec<Disturb>,
}

/// Two-step programming with V_W/2 inhibition.
///
/// Step 1 drives every word line to +V_W with bodies grounded, erasing the
/// block to low-V_TH. Step 2 visits each row holding a '1': the selected
/// word line is grounded, the bodies of its '1' columns are raised to V_W
/// and every other body to V_W/2, while unselected word lines sit at V_W/2.
/// Half-selected cells therefore see at most −V_W/2.
pub fn program_two_step(
    array: &FeFETArray,
    target: &BitMatrix,
    params: &DeviceParams,
) -> Result<ProgramOutcome, DeviceError> {
    if target.rows != array.rows || target.cols != array.cols {
        return Err(DeviceError::Dimension {
            rows: array.rows,
            cols: array.cols,
            target_rows: target.rows,
            target_cols: target.cols,
        });
    }
    let vw = params.v_write;
    let half = params.v_inhibit();
    let mut plan = vec![PulseStep {
        kind: StepKind::Erase,
        word_lines: vec![vw; array.rows],
        bodies: vec![0.0; array.cols],
        width: params.t_write,
    }];
    for row in 0..array.rows {
        if !(0..array.cols).any(|c| target.get(row, c)) {
            continue;
        }
        let mut word_lines = vec![half; array.rows];
        word_lines[row] = 0.0;
        let bodies = (0..array.cols)
            .map(|c| if target.get(row, c) { vw } else { half })
            .collect();
        plan.push(PulseStep {
            kind: StepKind::SelectiveWrite { row },
            word_lines,
            bodies,
            width: params.t_write,
        });
    }

    let mut out = array.clone();
    // Unintended exposure, split by polarity: [toward low, toward high].
    let mut exposure = vec![[0.0f64; 2]; array.rows * array.cols];
    let mut worst = vec![0.0f64; array.rows * array.cols];
    for step in &plan {
        for r in 0..array.rows {
            for c in 0..array.cols {
                let v = step.seen(r, c);
                let pulse = WritePulse {
                    amplitude: v,
                    width: step.width,
                };
                let idx = r * array.cols + c;
                if !step.targets(r, c, target) && v != 0.0 {
                    let t_sw = switching_time(params, v.abs()).expect("non-zero amplitude");
                    exposure[idx][usize::from(v < 0.0)] += step.width / t_sw;
                    worst[idx] = worst[idx].max(v.abs());
                }
                out.cells[idx] = apply_pulse(out.cells[idx], pulse, params);
            }
        }
    }
    let disturbs = exposure
        .iter()
        .enumerate()
        .filter_map(|(idx, e)| {
            let max = e[0].max(e[1]);
            (max >= 1.0).then(|| Disturb {
                row: idx / array.cols,
                col: idx % array.cols,
                amplitude: worst[idx],
                exposure: max,
            })
        })
        .collect();
    Ok(ProgramOutcome {
        plan,
        array: out,
        disturbs,
    })
}
