// SPDX-License-Identifier: Apache-2.0

//! Primitive-level emulation of a configured fabric.
//!
//! [`FabricDevice`] holds one [`DualLut`] per BLE and one [`DualSwitch`]
//! per routing switch. When a context becomes active the device traces,
//! from every signal driver, the switches that conduct in that context
//! to find which pins and pads each driver reaches; a driver reaching
//! another driver or a pin reached twice is a short. Each evaluation then
//! pushes levels through those switch chains with [`switch_transmit`] and
//! through the LUTs with [`dual_lut_eval`].

use std::collections::{BTreeMap, VecDeque};

use super::arch::FabricArch;
use super::bitstream::{BleConfig, FabricConfig, InputSel};
use super::rrg::{RrKind, Rrg};
use super::CadError;
use crate::primitives::{
    dual_lut_eval, reprogram_inactive, switch_transmit, ContextId, DualLut, DualSwitch, LutConfig,
};

/// Pads carrying the design's primary inputs and outputs, in netlist order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Pinout {
    pub inputs: Vec<(String, usize)>,
    pub outputs: Vec<(String, usize)>,
}

/// Everything written into one context: configuration bits and pinout.
#[derive(Debug, Clone, PartialEq)]
pub struct FabricImage {
    pub arch: FabricArch,
    pub config: FabricConfig,
    pub pinout: Pinout,
}

impl FabricImage {
    /// Image of an unconfigured fabric.
    pub fn empty(arch: &FabricArch) -> FabricImage {
        FabricImage {
            arch: arch.clone(),
            config: FabricConfig::empty(arch),
            pinout: Pinout::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Driver {
    Ble(usize),
    Input(usize),
}

/// Reach of one driver: the switch chain to a pin or pad.
#[derive(Debug, Clone, PartialEq)]
struct Link {
    driver: Driver,
    switches: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
struct Compiled {
    /// Link into each (clb, input pin).
    ipins: BTreeMap<(usize, usize), Link>,
    /// Link into each output pad, by output index.
    outputs: Vec<Option<Link>>,
    order: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct FabricDevice {
    arch: FabricArch,
    rrg: Rrg,
    luts: Vec<DualLut>,
    switches: Vec<DualSwitch>,
    ble_cfg: [Vec<BleConfig>; 2],
    pinout: [Pinout; 2],
    loaded: [bool; 2],
    active: ContextId,
    compiled: Option<Compiled>,
    state: Vec<bool>,
}

impl FabricDevice {
    /// Unconfigured device; neither context is loaded.
    pub fn new(arch: &FabricArch) -> FabricDevice {
        let rrg = Rrg::build(arch);
        let erased = LutConfig::erased(arch.k).expect("arch k validated");
        let bles = arch.clb_count() * arch.n;
        let luts = vec![DualLut::new(erased.clone(), erased, ContextId::One).expect("same k"); bles];
        let switches = vec![DualSwitch::from_bits(false, false, ContextId::One); rrg.switches.len()];
        let empty = FabricConfig::empty(arch);
        FabricDevice {
            arch: arch.clone(),
            rrg,
            luts,
            switches,
            ble_cfg: [empty.bles.clone(), empty.bles],
            pinout: Default::default(),
            loaded: [false; 2],
            active: ContextId::One,
            compiled: None,
            state: vec![false; bles],
        }
    }

    /// Device with `image` loaded into `ctx` and `ctx` active.
    pub fn with_image(ctx: ContextId, image: &FabricImage) -> Result<FabricDevice, CadError> {
        let mut d = FabricDevice::new(&image.arch);
        d.active = ctx.other();
        d.set_select(ctx.other());
        d.load(ctx, image)?;
        d.activate(ctx)?;
        Ok(d)
    }

    pub fn arch(&self) -> &FabricArch {
        &self.arch
    }

    pub fn active(&self) -> ContextId {
        self.active
    }

    pub fn is_loaded(&self, ctx: ContextId) -> bool {
        self.loaded[ctx.index()]
    }

    fn set_select(&mut self, ctx: ContextId) {
        for l in &mut self.luts {
            l.set_active(ctx);
        }
        for s in &mut self.switches {
            s.set_active(ctx);
        }
    }

    /// Writes `image` into the inactive context `ctx` primitive by
    /// primitive with the two-step protocol.
    pub fn load(&mut self, ctx: ContextId, image: &FabricImage) -> Result<(), CadError> {
        let cfg = &image.config;
        if image.arch != self.arch || cfg.bles.len() != self.luts.len() || cfg.switches.len() != self.switches.len() {
            return Err(CadError::Config("configuration does not match the architecture".into()));
        }
        for (lut, ble) in self.luts.iter_mut().zip(&cfg.bles) {
            if lut.plane(ctx).bits() != ble.lut {
                *lut = reprogram_inactive(lut, ctx, &ble.lut[..]).map_err(CadError::Primitive)?;
            }
        }
        for (sw, &on) in self.switches.iter_mut().zip(&cfg.switches) {
            if sw.conducting(ctx) != on {
                *sw = reprogram_inactive(sw, ctx, &on).map_err(CadError::Primitive)?;
            }
        }
        self.ble_cfg[ctx.index()] = cfg.bles.clone();
        self.pinout[ctx.index()] = image.pinout.clone();
        self.loaded[ctx.index()] = true;
        Ok(())
    }

    /// Makes `ctx` active and resets flip-flops to their init values.
    pub fn activate(&mut self, ctx: ContextId) -> Result<(), CadError> {
        if !self.loaded[ctx.index()] {
            return Err(CadError::Config(format!("context {ctx} was never loaded")));
        }
        self.set_select(ctx);
        self.active = ctx;
        self.compiled = Some(self.compile(ctx)?);
        self.state = self.ble_cfg[ctx.index()].iter().map(|b| b.ff_init).collect();
        Ok(())
    }

    fn compile(&self, ctx: ContextId) -> Result<Compiled, CadError> {
        let rrg = &self.rrg;
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); rrg.nodes.len()];
        for (id, sw) in self.switches.iter().enumerate() {
            if sw.conducting(ctx) {
                let info = rrg.switches[id];
                adj[info.a].push((info.b, id));
                adj[info.b].push((info.a, id));
            }
        }
        let pinout = &self.pinout[ctx.index()];
        let mut drivers: Vec<(usize, Driver)> = Vec::new();
        for clb in 0..self.arch.clb_count() {
            for slot in 0..self.arch.n {
                drivers.push((rrg.opin(clb, slot), Driver::Ble(clb * self.arch.n + slot)));
            }
        }
        for (i, (_, pad)) in pinout.inputs.iter().enumerate() {
            drivers.push((rrg.pad(*pad), Driver::Input(i)));
        }
        let driver_at: BTreeMap<usize, Driver> = drivers.iter().copied().collect();
        let out_pad: BTreeMap<usize, usize> =
            pinout.outputs.iter().enumerate().map(|(o, (_, pad))| (rrg.pad(*pad), o)).collect();

        let mut ipins = BTreeMap::new();
        let mut outputs = vec![None; pinout.outputs.len()];
        let mut owner: Vec<Option<usize>> = vec![None; rrg.nodes.len()];
        for &(start, driver) in &drivers {
            if adj[start].is_empty() {
                continue;
            }
            let mut via: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
            let mut queue = VecDeque::from([start]);
            owner[start] = Some(start);
            while let Some(n) = queue.pop_front() {
                for &(m, sw) in &adj[n] {
                    if m == start || via.contains_key(&m) {
                        continue;
                    }
                    if let Some(o) = owner[m] {
                        if o != start || driver_at.contains_key(&m) {
                            return Err(CadError::Config(format!("short between drivers at nodes {start} and {m}")));
                        }
                        continue;
                    }
                    owner[m] = Some(start);
                    via.insert(m, (n, sw));
                    queue.push_back(m);
                }
            }
            for &node in via.keys() {
                let chain = || {
                    let mut sws = Vec::new();
                    let mut cur = node;
                    while let Some(&(p, s)) = via.get(&cur) {
                        sws.push(s);
                        cur = p;
                    }
                    sws.reverse();
                    Link {
                        driver,
                        switches: sws,
                    }
                };
                match rrg.nodes[node] {
                    RrKind::Ipin { clb, pin } => {
                        ipins.insert((clb, pin), chain());
                    }
                    RrKind::Pad { .. } => {
                        if driver_at.contains_key(&node) {
                            return Err(CadError::Config(format!("short between drivers at nodes {start} and {node}")));
                        }
                        if let Some(&o) = out_pad.get(&node) {
                            outputs[o] = Some(chain());
                        }
                    }
                    RrKind::Opin { .. } => {
                        return Err(CadError::Config(format!("short between drivers at nodes {start} and {node}")));
                    }
                    _ => {}
                }
            }
        }

        // Combinational order of BLEs; registered outputs break paths.
        let cfg = &self.ble_cfg[ctx.index()];
        let n = self.arch.n;
        let deps = |b: usize| -> Vec<usize> {
            let clb = b / n;
            cfg[b]
                .inputs
                .iter()
                .filter_map(|sel| match *sel {
                    InputSel::Open => None,
                    InputSel::Feedback(j) => Some(clb * n + j),
                    InputSel::Pin(p) => match ipins.get(&(clb, p)) {
                        Some(Link {
                            driver: Driver::Ble(d),
                            ..
                        }) => Some(*d),
                        _ => None,
                    },
                })
                .filter(|&d| !cfg[d].registered)
                .collect()
        };
        let total = cfg.len();
        let mut mark = vec![0u8; total];
        let mut order = Vec::with_capacity(total);
        for root in 0..total {
            if mark[root] != 0 {
                continue;
            }
            let mut stack = vec![(root, deps(root), 0usize)];
            mark[root] = 1;
            while let Some((b, ds, i)) = stack.last_mut() {
                if *i < ds.len() {
                    let d = ds[*i];
                    *i += 1;
                    match mark[d] {
                        0 => {
                            mark[d] = 1;
                            let dd = deps(d);
                            stack.push((d, dd, 0));
                        }
                        1 => return Err(CadError::Config(format!("combinational loop through BLE {d}"))),
                        _ => {}
                    }
                } else {
                    mark[*b] = 2;
                    order.push(*b);
                    stack.pop();
                }
            }
        }
        Ok(Compiled { ipins, outputs, order })
    }

    fn transmit(&self, link: &Link, level: bool) -> bool {
        link.switches
            .iter()
            .fold(level, |l, &s| switch_transmit(&self.switches[s], l).level())
    }

    /// One clock cycle on the active context: settle, sample outputs, clock
    /// the flip-flops.
    pub fn step(&mut self, inputs: &[bool]) -> Result<Vec<bool>, CadError> {
        let compiled = self
            .compiled
            .as_ref()
            .ok_or_else(|| CadError::Config("no active context".into()))?;
        let ctx = self.active;
        let pinout = &self.pinout[ctx.index()];
        if inputs.len() != pinout.inputs.len() {
            return Err(CadError::Width {
                expected: pinout.inputs.len(),
                got: inputs.len(),
            });
        }
        let cfg = &self.ble_cfg[ctx.index()];
        let n = self.arch.n;
        let mut lut_out = vec![false; cfg.len()];
        let mut ble_out: Vec<bool> = cfg
            .iter()
            .zip(&self.state)
            .map(|(c, &s)| c.registered && s)
            .collect();
        let drive = |d: Driver, ble_out: &[bool]| match d {
            Driver::Ble(b) => ble_out[b],
            Driver::Input(i) => inputs[i],
        };
        let mut args = Vec::with_capacity(self.arch.k);
        for &b in &compiled.order {
            let clb = b / n;
            args.clear();
            for sel in &cfg[b].inputs {
                args.push(match *sel {
                    InputSel::Open => false,
                    InputSel::Feedback(j) => ble_out[clb * n + j],
                    InputSel::Pin(p) => match compiled.ipins.get(&(clb, p)) {
                        Some(link) => self.transmit(link, drive(link.driver, &ble_out)),
                        None => false,
                    },
                });
            }
            let v = dual_lut_eval(&self.luts[b], &args).map_err(CadError::Primitive)?;
            lut_out[b] = v;
            if !cfg[b].registered {
                ble_out[b] = v;
            }
        }
        let outputs = compiled
            .outputs
            .iter()
            .map(|l| match l {
                Some(link) => self.transmit(link, drive(link.driver, &ble_out)),
                None => false,
            })
            .collect();
        for (b, c) in cfg.iter().enumerate() {
            if c.registered {
                self.state[b] = lut_out[b];
            }
        }
        Ok(outputs)
    }

    /// Runs `vectors` on the active context from its reset state.
    pub fn run(&mut self, vectors: &[Vec<bool>]) -> Result<Vec<Vec<bool>>, CadError> {
        self.state = self.ble_cfg[self.active.index()].iter().map(|b| b.ff_init).collect();
        vectors.iter().map(|v| self.step(v)).collect()
    }
}
