// SPDX-License-Identifier: Apache-2.0

//! Mini CAD flow over an island-style fabric: pack, place, route, timing,
//! bitstream generation and functional simulation.

pub mod arch;
pub mod bitstream;
pub mod netlist;
pub mod pack;
pub mod place;
pub mod route;
pub mod rrg;
pub mod sim;
pub mod timing;

use thiserror::Error;

use crate::primitives::{ContextId, PrimitiveError};

pub use arch::{ArchError, FabricArch, SbPattern};
pub use bitstream::{BleConfig, Bitstream, BitstreamError, FabricConfig, InputSel};
pub use netlist::{exhaustive_vectors, simulate_netlist, Netlist, NetlistError};
pub use pack::{pack, Packed};
pub use place::{place, Placement};
pub use route::{route, Routing};
pub use rrg::Rrg;
pub use sim::{FabricDevice, FabricImage, Pinout};
pub use timing::{timing_analyze, TimingReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CadError {
    #[error("netlist: {0}")]
    Netlist(#[from] NetlistError),
    #[error("{0}")]
    Arch(#[from] ArchError),
    #[error("{stage}: {msg}")]
    Resource { stage: &'static str, msg: String },
    #[error("route: net {net}: {msg}")]
    Unroutable { net: usize, msg: String },
    #[error(
        "route: congestion after {iterations} iterations: {overused_nodes} overused node(s), max overuse {max_overuse}"
    )]
    Congestion {
        iterations: usize,
        max_overuse: u32,
        overused_nodes: usize,
    },
    #[error("bitstream: {0}")]
    Bitstream(#[from] BitstreamError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("primitive: {0}")]
    Primitive(PrimitiveError),
    #[error("expected {expected} input values, got {got}")]
    Width { expected: usize, got: usize },
}

impl CadError {
    /// Flow stage the error belongs to.
    pub fn stage(&self) -> &'static str {
        match self {
            CadError::Netlist(_) => "parse",
            CadError::Arch(_) => "arch",
            CadError::Resource { stage, .. } => stage,
            CadError::Unroutable { .. } | CadError::Congestion { .. } => "route",
            CadError::Bitstream(_) => "bitstream",
            CadError::Config(_) | CadError::Primitive(_) | CadError::Width { .. } => "simulate",
        }
    }
}

/// A netlist carried through the whole flow.
#[derive(Debug, Clone)]
pub struct RoutedDesign {
    pub arch: FabricArch,
    pub netlist: Netlist,
    pub packed: Packed,
    pub placement: Placement,
    pub rrg: Rrg,
    pub routing: Routing,
    pub config: FabricConfig,
    pub pinout: Pinout,
}

/// Runs pack, place and route with the given placement seed.
pub fn run_flow(netlist: &Netlist, arch: &FabricArch, seed: u64) -> Result<RoutedDesign, CadError> {
    arch.validate()?;
    let packed = pack(netlist, arch)?;
    let placement = place(&packed, arch, seed)?;
    let rrg = Rrg::build(arch);
    let routing = route(&packed, &placement, arch, &rrg)?;
    let config = build_config(&packed, &placement, &routing, &rrg, arch);
    let pinout = Pinout {
        inputs: packed
            .input_names
            .iter()
            .cloned()
            .zip(placement.input_pads.iter().copied())
            .collect(),
        outputs: packed
            .output_names
            .iter()
            .cloned()
            .zip(placement.output_pads.iter().copied())
            .collect(),
    };
    Ok(RoutedDesign {
        arch: arch.clone(),
        netlist: netlist.clone(),
        packed,
        placement,
        rrg,
        routing,
        config,
        pinout,
    })
}

fn build_config(packed: &Packed, placement: &Placement, routing: &Routing, rrg: &Rrg, arch: &FabricArch) -> FabricConfig {
    let mut cfg = FabricConfig::empty(arch);
    let ipins = route::ipin_assignment(routing, rrg);
    let cluster_of = packed.cluster_of();
    for (c, members) in packed.clusters.iter().enumerate() {
        let site = placement.clb_sites[c];
        for (slot, &b) in members.iter().enumerate() {
            let ble = &packed.bles[b];
            let mut inputs = vec![InputSel::Open; arch.k];
            for (pin, &net) in ble.inputs.iter().enumerate() {
                inputs[pin] = match packed.nets[net].driver {
                    pack::NetDriver::Ble(d) if cluster_of[d] == c => {
                        InputSel::Feedback(members.iter().position(|&m| m == d).expect("same cluster"))
                    }
                    _ => InputSel::Pin(ipins[&(c, net)]),
                };
            }
            cfg.bles[site * arch.n + slot] = BleConfig {
                lut: ble.table.clone(),
                registered: ble.ff.is_some(),
                ff_init: ble.ff.unwrap_or(false),
                inputs,
            };
        }
    }
    for r in &routing.nets {
        for s in r.switches() {
            cfg.switches[s] = true;
        }
    }
    cfg
}

impl RoutedDesign {
    pub fn image(&self) -> FabricImage {
        FabricImage {
            arch: self.arch.clone(),
            config: self.config.clone(),
            pinout: self.pinout.clone(),
        }
    }

    /// Configuration bits of this design targeted at context `ctx`.
    pub fn bitstream(&self, ctx: ContextId) -> Bitstream {
        generate_bitstream(self, ctx)
    }

    /// Channel segments used by all routes.
    pub fn wirelength(&self) -> usize {
        self.routing.wirelength(&self.rrg)
    }
}

pub fn generate_bitstream(design: &RoutedDesign, ctx: ContextId) -> Bitstream {
    Bitstream::new(&design.arch, &design.config, ctx)
}

/// Simulates the routed design on a fresh device with the design active in
/// context 1.
pub fn simulate_routed(design: &RoutedDesign, vectors: &[Vec<bool>]) -> Result<Vec<Vec<bool>>, CadError> {
    let mut dev = FabricDevice::with_image(ContextId::One, &design.image())?;
    dev.run(vectors)
}
