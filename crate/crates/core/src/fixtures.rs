// SPDX-License-Identifier: Apache-2.0

//! Data files shipped with the crate: architectures, fixture netlists,
//! scenarios and co-simulation plans.

use crate::fabric::{FabricArch, Netlist};

pub const DEFAULT_ARCH: &str = include_str!("../data/arch/default.arch");
pub const SMALL_ARCH: &str = include_str!("../data/arch/small.arch");

/// Fixture netlists by name.
pub const NETLISTS: [(&str, &str); 9] = [
    ("xor2", include_str!("../data/netlists/xor2.blif")),
    ("and2", include_str!("../data/netlists/and2.blif")),
    ("full_adder", include_str!("../data/netlists/full_adder.blif")),
    ("ripple4", include_str!("../data/netlists/ripple4.blif")),
    ("counter3", include_str!("../data/netlists/counter3.blif")),
    ("mux4", include_str!("../data/netlists/mux4.blif")),
    ("lut_chain4", include_str!("../data/netlists/lut_chain4.blif")),
    ("lut_chain8", include_str!("../data/netlists/lut_chain8.blif")),
    ("two_groups", include_str!("../data/netlists/two_groups.blif")),
];

/// Scheduling scenarios by name.
pub const SCENARIOS: [(&str, &str); 5] = [
    ("three_tasks", include_str!("../data/scenarios/three_tasks.scn")),
    ("preload_alternation", include_str!("../data/scenarios/preload_alternation.scn")),
    ("pipeline4", include_str!("../data/scenarios/pipeline4.scn")),
    ("repeat5", include_str!("../data/scenarios/repeat5.scn")),
    ("branching", include_str!("../data/scenarios/branching.scn")),
];

/// Co-simulation load plans by name.
pub const PLANS: [(&str, &str); 2] = [
    ("xor_and", include_str!("../data/plans/xor_and.plan")),
    ("active_plane", include_str!("../data/plans/active_plane.plan")),
];

pub fn scenario_text(name: &str) -> Option<&'static str> {
    SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn plan_text(name: &str) -> Option<&'static str> {
    PLANS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn default_arch() -> FabricArch {
    FabricArch::parse(DEFAULT_ARCH).expect("shipped arch is valid")
}

pub fn small_arch() -> FabricArch {
    FabricArch::parse(SMALL_ARCH).expect("shipped arch is valid")
}

pub fn netlist_text(name: &str) -> Option<&'static str> {
    NETLISTS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Parsed fixture netlist; panics on an unknown name.
pub fn netlist(name: &str) -> Netlist {
    let text = netlist_text(name).unwrap_or_else(|| panic!("no fixture netlist `{name}`"));
    Netlist::parse(text).expect("shipped netlists are valid")
}
