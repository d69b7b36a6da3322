// SPDX-License-Identifier: Apache-2.0

//! Dual-context state machine, event trace and co-simulation.
//!
//! A [`ContextStore`] owns two configuration planes. Each plane is idle,
//! loading or complete; the active plane is never loading. A load of `b`
//! bits at rate `R` bits/s started at `t` ends at `t + b / R`, and the new
//! image commits atomically at that instant. A switch to a complete plane
//! takes effect after the switch latency; all primitives change plane
//! together.
//!
//! Times are in seconds. Every event lands in an [`EventTrace`] whose
//! lines read `time_ns<TAB>KIND<TAB>ctx<TAB>digest`.

use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fabric::{CadError, FabricDevice, FabricImage};
use crate::kvfile::{parse_quantity, Dimension, KvError};
use crate::primitives::{
    dual_lut_eval, reprogram_inactive, switch_transmit, ContextId, DualLut, DualSwitch, LutConfig,
    PrimitiveError, Transmit,
};

pub const DEFAULT_SWITCH_LATENCY: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContextError {
    #[error("context {0} is active and cannot be loaded")]
    ContextInUse(ContextId),
    #[error("context {ctx} is not ready{}", ready_at.map(|t| format!(" (load ends at {:.3} ns)", t * 1e9)).unwrap_or_default())]
    NotReady { ctx: ContextId, ready_at: Option<f64> },
    #[error("context {0} is already loading")]
    Busy(ContextId),
    #[error("event at {t:e} s precedes the previous event at {now:e} s")]
    TimeOrder { now: f64, t: f64 },
    #[error("invalid load: {0}")]
    InvalidLoad(String),
    #[error("target: {0}")]
    Target(String),
}

/// Data written into a plane.
pub trait PlaneImage {
    fn bit_len(&self) -> u64;
    /// Short identifier printed in traces.
    fn digest(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoadState {
    Idle,
    Loading { start: f64, end: f64 },
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    LoadStart,
    LoadEnd,
    Switch,
    Eval,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::LoadStart => "LOAD_START",
            EventKind::LoadEnd => "LOAD_END",
            EventKind::Switch => "SWITCH",
            EventKind::Eval => "EVAL",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub ctx: ContextId,
    pub digest: String,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}\t{}\t{}\t{}", self.time * 1e9, self.kind.as_str(), self.ctx, self.digest)
    }
}

/// Time-ordered event log.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventTrace {
    pub events: Vec<Event>,
}

impl EventTrace {
    pub fn lines(&self) -> Vec<String> {
        self.events.iter().map(Event::to_string).collect()
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }
}

impl fmt::Display for EventTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.events {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Seconds needed to stream `bits` at `rate` bits per second.
pub fn load_duration(bits: u64, rate: f64) -> Result<f64, ContextError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(ContextError::InvalidLoad(format!("rate {rate} must be positive")));
    }
    Ok(bits as f64 / rate)
}

#[derive(Debug, Clone)]
pub struct ContextStore<I> {
    images: [Option<I>; 2],
    pending: [Option<I>; 2],
    state: [LoadState; 2],
    active: ContextId,
    switch_latency: f64,
    now: f64,
    trace: EventTrace,
}

impl<I: PlaneImage + Clone> ContextStore<I> {
    /// Store with `image` complete in `ctx`, `ctx` active and the other
    /// plane idle.
    pub fn with_initial(ctx: ContextId, image: I) -> Self {
        let mut images = [None, None];
        let mut state = [LoadState::Idle; 2];
        images[ctx.index()] = Some(image);
        state[ctx.index()] = LoadState::Complete;
        ContextStore {
            images,
            pending: [None, None],
            state,
            active: ctx,
            switch_latency: DEFAULT_SWITCH_LATENCY,
            now: 0.0,
            trace: EventTrace::default(),
        }
    }

    pub fn with_switch_latency(mut self, latency: f64) -> Self {
        self.switch_latency = latency;
        self
    }

    pub fn switch_latency(&self) -> f64 {
        self.switch_latency
    }

    pub fn active(&self) -> ContextId {
        self.active
    }

    pub fn state(&self, ctx: ContextId) -> LoadState {
        self.state[ctx.index()]
    }

    /// Committed image of `ctx`; a load in flight is not visible.
    pub fn image(&self, ctx: ContextId) -> Option<&I> {
        self.images[ctx.index()].as_ref()
    }

    pub fn active_image(&self) -> &I {
        self.images[self.active.index()].as_ref().expect("active plane is complete")
    }

    /// Time of the latest event.
    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn trace(&self) -> &EventTrace {
        &self.trace
    }

    fn check_time(&self, t: f64) -> Result<(), ContextError> {
        if t < self.now || !t.is_finite() {
            return Err(ContextError::TimeOrder { now: self.now, t });
        }
        Ok(())
    }

    fn record(&mut self, time: f64, kind: EventKind, ctx: ContextId, digest: String) {
        self.now = time;
        self.trace.events.push(Event { time, kind, ctx, digest });
    }

    /// Completes every load ending at or before `t`. Returns the planes
    /// committed, in completion order.
    pub fn advance(&mut self, t: f64) -> Result<Vec<ContextId>, ContextError> {
        self.check_time(t)?;
        let mut done = Vec::new();
        for ctx in ContextId::BOTH {
            if let LoadState::Loading { end, .. } = self.state[ctx.index()] {
                if end <= t {
                    done.push((end, ctx));
                }
            }
        }
        done.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(end, ctx) in &done {
            let image = self.pending[ctx.index()].take().expect("loading plane has a pending image");
            let digest = image.digest();
            self.images[ctx.index()] = Some(image);
            self.state[ctx.index()] = LoadState::Complete;
            self.record(end.max(self.now), EventKind::LoadEnd, ctx, digest);
        }
        self.now = self.now.max(t);
        Ok(done.into_iter().map(|(_, c)| c).collect())
    }

    /// Starts streaming `image` into `ctx` at `t`. Returns the load end
    /// time.
    pub fn begin_load(&mut self, ctx: ContextId, image: I, t: f64, rate: f64) -> Result<f64, ContextError> {
        self.advance(t)?;
        if ctx == self.active {
            return Err(ContextError::ContextInUse(ctx));
        }
        if let LoadState::Loading { .. } = self.state[ctx.index()] {
            return Err(ContextError::Busy(ctx));
        }
        let end = t + load_duration(image.bit_len(), rate)?;
        self.record(t, EventKind::LoadStart, ctx, image.digest());
        self.state[ctx.index()] = LoadState::Loading { start: t, end };
        self.pending[ctx.index()] = Some(image);
        Ok(end)
    }

    /// Requests the switch to `ctx` at `t`. Returns the time the switch
    /// takes effect; switching to the active plane is a no-op effective
    /// at `t`.
    pub fn switch_context(&mut self, ctx: ContextId, t: f64) -> Result<f64, ContextError> {
        self.advance(t)?;
        if ctx == self.active {
            return Ok(t);
        }
        match self.state[ctx.index()] {
            LoadState::Complete => {}
            LoadState::Loading { end, .. } => {
                return Err(ContextError::NotReady {
                    ctx,
                    ready_at: Some(end),
                })
            }
            LoadState::Idle => return Err(ContextError::NotReady { ctx, ready_at: None }),
        }
        let effective = t + self.switch_latency;
        self.active = ctx;
        let digest = self.active_image().digest();
        self.record(effective, EventKind::Switch, ctx, digest);
        Ok(effective)
    }

    /// Logs an evaluation of the active plane at `t`, or at the end of a
    /// switch still in progress. Returns the evaluation time.
    pub fn eval(&mut self, t: f64) -> Result<f64, ContextError> {
        let t = t.max(self.now);
        self.advance(t)?;
        let digest = self.active_image().digest();
        self.record(t, EventKind::Eval, self.active, digest);
        Ok(t)
    }
}

/// Anything with two planes that can be driven by a [`ContextStore`].
pub trait ContextTarget: Sized {
    type Image: PlaneImage + Clone;
    type Input;
    type Output: Clone + PartialEq + fmt::Debug;

    /// Fresh target with `image` in `ctx` and `ctx` active.
    fn instance(ctx: ContextId, image: &Self::Image) -> Result<Self, ContextError>;
    /// Writes the inactive plane `ctx`.
    fn load_plane(&mut self, ctx: ContextId, image: &Self::Image) -> Result<(), ContextError>;
    fn activate(&mut self, ctx: ContextId) -> Result<(), ContextError>;
    fn eval(&mut self, input: &Self::Input) -> Result<Self::Output, ContextError>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanAction<I> {
    Load { ctx: ContextId, image: I },
    Switch { ctx: ContextId },
}

/// One timed request of a co-simulation plan.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanEvent<I> {
    pub time: f64,
    pub action: PlanAction<I>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoSimResult<O> {
    /// Evaluation time of each step.
    pub times: Vec<f64>,
    /// Outputs with the plan's loads streaming in the background.
    pub with_load: Vec<O>,
    /// Outputs of a reference instance holding only the active image.
    pub without_load: Vec<O>,
    pub trace: EventTrace,
}

impl<O: PartialEq> CoSimResult<O> {
    /// True when background loading never changed an output.
    pub fn equivalent(&self) -> bool {
        self.with_load == self.without_load
    }

    /// First step whose outputs differ.
    pub fn first_mismatch(&self) -> Option<usize> {
        self.with_load.iter().zip(&self.without_load).position(|(a, b)| a != b)
    }
}

/// Runs `inputs` (one per step, step `i` at `i * period`) on a target that
/// starts with `initial` active in `ctx` while `plan` loads and switches
/// planes. Each step is also run on a reference instance rebuilt from the
/// active image whenever the active plane changes, so the two output
/// streams agree exactly when loading never disturbs the active plane.
pub fn co_simulate<T: ContextTarget>(
    ctx: ContextId,
    initial: &T::Image,
    inputs: &[T::Input],
    period: f64,
    plan: &[PlanEvent<T::Image>],
    rate: f64,
    switch_latency: f64,
) -> Result<CoSimResult<T::Output>, ContextError> {
    let mut store = ContextStore::with_initial(ctx, initial.clone()).with_switch_latency(switch_latency);
    let mut target = T::instance(ctx, initial)?;
    let mut reference = T::instance(ctx, initial)?;
    let mut plan: Vec<&PlanEvent<T::Image>> = plan.iter().collect();
    plan.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut next = 0;
    let mut result = CoSimResult {
        times: Vec::with_capacity(inputs.len()),
        with_load: Vec::with_capacity(inputs.len()),
        without_load: Vec::with_capacity(inputs.len()),
        trace: EventTrace::default(),
    };

    fn commit<T: ContextTarget>(
        store: &ContextStore<T::Image>,
        target: &mut T,
        done: &[ContextId],
    ) -> Result<(), ContextError> {
        for &c in done {
            target.load_plane(c, store.image(c).expect("committed"))?;
        }
        Ok(())
    }

    for (i, input) in inputs.iter().enumerate() {
        let t = i as f64 * period;
        while next < plan.len() && plan[next].time <= t {
            let ev = plan[next];
            next += 1;
            let done = store.advance(ev.time.max(store.now()))?;
            commit(&store, &mut target, &done)?;
            match &ev.action {
                PlanAction::Load { ctx, image } => {
                    store.begin_load(*ctx, image.clone(), store.now(), rate)?;
                }
                PlanAction::Switch { ctx } => {
                    let before = store.active();
                    store.switch_context(*ctx, store.now())?;
                    if store.active() != before {
                        target.activate(*ctx)?;
                        reference = T::instance(*ctx, store.active_image())?;
                    }
                }
            }
        }
        let done = store.advance(t.max(store.now()))?;
        commit(&store, &mut target, &done)?;
        let at = store.eval(t)?;
        result.times.push(at);
        result.with_load.push(target.eval(input)?);
        result.without_load.push(reference.eval(input)?);
    }
    result.trace = store.trace().clone();
    Ok(result)
}

fn hex_digest(bits: &[bool]) -> String {
    let mut bytes = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            bytes[i / 8] |= 1 << (i % 8);
        }
    }
    let mut h = Sha256::new();
    h.update((bits.len() as u64).to_le_bytes());
    h.update(&bytes);
    h.finalize()[..4].iter().map(|b| format!("{b:02x}")).collect()
}

fn prim(e: PrimitiveError) -> ContextError {
    ContextError::Target(e.to_string())
}

fn cad(e: CadError) -> ContextError {
    ContextError::Target(e.to_string())
}

/// Truth table for one LUT plane.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LutImage(pub Vec<bool>);

impl PlaneImage for LutImage {
    fn bit_len(&self) -> u64 {
        self.0.len() as u64
    }

    fn digest(&self) -> String {
        hex_digest(&self.0)
    }
}

impl ContextTarget for DualLut {
    type Image = LutImage;
    type Input = Vec<bool>;
    type Output = bool;

    fn instance(ctx: ContextId, image: &LutImage) -> Result<Self, ContextError> {
        let k = image.0.len().trailing_zeros() as usize;
        let plane = LutConfig::from_bits(k, &image.0).map_err(prim)?;
        let erased = LutConfig::erased(k).map_err(prim)?;
        let (p1, p2) = match ctx {
            ContextId::One => (plane, erased),
            ContextId::Two => (erased, plane),
        };
        DualLut::new(p1, p2, ctx).map_err(prim)
    }

    fn load_plane(&mut self, ctx: ContextId, image: &LutImage) -> Result<(), ContextError> {
        *self = reprogram_inactive(self, ctx, &image.0[..]).map_err(prim)?;
        Ok(())
    }

    fn activate(&mut self, ctx: ContextId) -> Result<(), ContextError> {
        self.set_active(ctx);
        Ok(())
    }

    fn eval(&mut self, input: &Vec<bool>) -> Result<bool, ContextError> {
        dual_lut_eval(self, input).map_err(prim)
    }
}

/// Connection state of one switch plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SwitchImage(pub bool);

impl PlaneImage for SwitchImage {
    fn bit_len(&self) -> u64 {
        1
    }

    fn digest(&self) -> String {
        if self.0 { "on" } else { "off" }.to_string()
    }
}

impl ContextTarget for DualSwitch {
    type Image = SwitchImage;
    type Input = bool;
    type Output = Transmit;

    fn instance(ctx: ContextId, image: &SwitchImage) -> Result<Self, ContextError> {
        Ok(match ctx {
            ContextId::One => DualSwitch::from_bits(image.0, false, ctx),
            ContextId::Two => DualSwitch::from_bits(false, image.0, ctx),
        })
    }

    fn load_plane(&mut self, ctx: ContextId, image: &SwitchImage) -> Result<(), ContextError> {
        *self = reprogram_inactive(self, ctx, &image.0).map_err(prim)?;
        Ok(())
    }

    fn activate(&mut self, ctx: ContextId) -> Result<(), ContextError> {
        self.set_active(ctx);
        Ok(())
    }

    fn eval(&mut self, input: &bool) -> Result<Transmit, ContextError> {
        Ok(switch_transmit(self, *input))
    }
}

impl PlaneImage for FabricImage {
    fn bit_len(&self) -> u64 {
        self.arch.bitstream_len() as u64
    }

    fn digest(&self) -> String {
        self.config.digest(&self.arch)
    }
}

impl ContextTarget for FabricDevice {
    type Image = FabricImage;
    type Input = Vec<bool>;
    type Output = Vec<bool>;

    fn instance(ctx: ContextId, image: &FabricImage) -> Result<Self, ContextError> {
        FabricDevice::with_image(ctx, image).map_err(cad)
    }

    fn load_plane(&mut self, ctx: ContextId, image: &FabricImage) -> Result<(), ContextError> {
        if ctx == self.active() {
            return Err(ContextError::ContextInUse(ctx));
        }
        self.load(ctx, image).map_err(cad)
    }

    fn activate(&mut self, ctx: ContextId) -> Result<(), ContextError> {
        FabricDevice::activate(self, ctx).map_err(cad)
    }

    fn eval(&mut self, input: &Vec<bool>) -> Result<Vec<bool>, ContextError> {
        self.step(input).map_err(cad)
    }
}

/// Request in a textual load plan; designs are referenced by name.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanStep {
    Load { ctx: ContextId, design: String },
    Switch { ctx: ContextId },
}

/// Parses a load plan, one request per line:
///
/// ```text
/// # time  action  ctx  [design]
/// 0       load    2    and2
/// 2us     switch  2
/// ```
///
/// Times take an optional unit suffix and default to seconds. Requests
/// must be in non-decreasing time order.
pub fn parse_plan(text: &str) -> Result<Vec<(f64, PlanStep)>, KvError> {
    let mut out: Vec<(f64, PlanStep)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let err = |msg: String| KvError::Syntax { line, msg };
        let words: Vec<&str> = body.split_whitespace().collect();
        if words.len() < 3 {
            return Err(err(format!("expected `<time> <load|switch> <ctx> [design]`, found `{body}`")));
        }
        let time = parse_quantity(words[0], Dimension::Time).map_err(err)?;
        if time < 0.0 {
            return Err(err(format!("negative time `{}`", words[0])));
        }
        if out.last().is_some_and(|(t, _)| *t > time) {
            return Err(err(format!("time `{}` goes backwards", words[0])));
        }
        let ctx: ContextId = words[2].parse().map_err(|_| err(format!("bad context `{}`", words[2])))?;
        let step = match (words[1], words.len()) {
            ("load", 4) => PlanStep::Load {
                ctx,
                design: words[3].to_string(),
            },
            ("switch", 3) => PlanStep::Switch { ctx },
            _ => return Err(err(format!("cannot read request `{body}`"))),
        };
        out.push((time, step));
    }
    Ok(out)
}

/// One cycle of the switch replication experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CbCycle {
    pub active: ContextId,
    pub output: Transmit,
}

/// Drives a high level through a dual switch whose planes hold `on1` and
/// `on2` for `cycles` cycles. Each cycle reloads the inactive plane with
/// its own value in the background and then switches to it, so the
/// output alternates between the two stored behaviors.
pub fn cb_experiment(on1: bool, on2: bool, cycles: usize) -> Result<(Vec<CbCycle>, EventTrace), ContextError> {
    let mut store = ContextStore::with_initial(ContextId::One, SwitchImage(on1));
    let mut sw = DualSwitch::instance(ContextId::One, &SwitchImage(on1))?;
    let values = [on1, on2];
    let mut out = Vec::with_capacity(cycles);
    let mut t = 0.0;
    for cycle in 0..cycles {
        let target = ContextId::BOTH[(cycle + 1) % 2];
        if cycle > 0 {
            store.switch_context(store.active().other(), t)?;
            sw.activate(store.active())?;
            t = store.now();
        }
        store.eval(t)?;
        out.push(CbCycle {
            active: store.active(),
            output: sw.eval(&true)?,
        });
        if cycle + 1 < cycles {
            let image = SwitchImage(values[target.index()]);
            let end = store.begin_load(target, image, t, 1e9)?;
            for c in store.advance(end)? {
                sw.load_plane(c, store.image(c).expect("committed"))?;
            }
            t = end;
        }
    }
    Ok((out, store.trace().clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn load_time_follows_rate() {
        assert!((load_duration(3_200_000_000, 3.2e9).unwrap() - 1.0).abs() < 1e-12);
        assert!((load_duration(77_300_000, 3.2e9).unwrap() - 24.15625e-3).abs() < 1e-12);
        assert!(load_duration(1, 0.0).is_err());
    }

    #[test]
    fn active_plane_cannot_load() {
        let mut s = ContextStore::with_initial(ContextId::One, SwitchImage(true));
        assert_eq!(
            s.begin_load(ContextId::One, SwitchImage(false), 0.0, 1.0),
            Err(ContextError::ContextInUse(ContextId::One))
        );
    }

    #[test]
    fn switch_waits_for_load_end() {
        let mut s = ContextStore::with_initial(ContextId::One, SwitchImage(true));
        assert_eq!(
            s.switch_context(ContextId::Two, 0.0),
            Err(ContextError::NotReady {
                ctx: ContextId::Two,
                ready_at: None
            })
        );
        let end = s.begin_load(ContextId::Two, SwitchImage(false), 0.0, 1.0).unwrap();
        assert_eq!(end, 1.0);
        assert!(matches!(s.switch_context(ContextId::Two, 0.5), Err(ContextError::NotReady { .. })));
        assert_eq!(s.switch_context(ContextId::Two, 1.0).unwrap(), 1.0 + DEFAULT_SWITCH_LATENCY);
        assert_eq!(s.active(), ContextId::Two);
        let kinds: Vec<_> = s.trace().events.iter().map(|e| e.kind).collect();
        assert_eq!(kinds, [EventKind::LoadStart, EventKind::LoadEnd, EventKind::Switch]);
    }

    #[test]
    fn switching_to_active_is_noop() {
        let mut s = ContextStore::with_initial(ContextId::Two, SwitchImage(true));
        assert_eq!(s.switch_context(ContextId::Two, 3.0).unwrap(), 3.0);
        assert!(s.trace().events.is_empty());
    }

    #[test]
    fn trace_line_format() {
        let mut s = ContextStore::with_initial(ContextId::One, SwitchImage(true));
        s.begin_load(ContextId::Two, SwitchImage(false), 2e-9, 1e9).unwrap();
        assert_eq!(s.trace().lines(), ["2.000\tLOAD_START\t2\toff"]);
    }

    #[test]
    fn plan_parsing() {
        let plan = parse_plan("# demo\n0 load 2 and2\n2us switch 2 # go\n").unwrap();
        assert_eq!(plan.len(), 2);
        assert_eq!(
            plan[0],
            (
                0.0,
                PlanStep::Load {
                    ctx: ContextId::Two,
                    design: "and2".into()
                }
            )
        );
        assert!((plan[1].0 - 2e-6).abs() < 1e-18);
        assert!(matches!(parse_plan("1 load 3 x"), Err(KvError::Syntax { line: 1, .. })));
        assert!(parse_plan("2 switch 2\n1 switch 1").is_err());
        assert!(parse_plan("0 switch 2 extra").is_err());
    }

    #[test]
    fn cb_experiment_alternates() {
        let (cycles, trace) = cb_experiment(true, false, 3).unwrap();
        let outs: Vec<_> = cycles.iter().map(|c| c.output).collect();
        assert_eq!(outs, [Transmit::Pass(true), Transmit::Blocked, Transmit::Pass(true)]);
        assert_eq!(trace.of_kind(EventKind::Switch).count(), 2);
    }
}
