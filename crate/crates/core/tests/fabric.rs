// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use ctxfpga::fabric::{
    exhaustive_vectors, pack, run_flow, simulate_netlist, simulate_routed, timing_analyze, Bitstream,
    CadError, FabricArch, Netlist,
};
use ctxfpga::fixtures::{default_arch, netlist, small_arch};
use ctxfpga::primitives::ContextId;
use ctxfpga::techlib::{shipped, TechName};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn arch(text: &str) -> FabricArch {
    FabricArch::parse(text).unwrap()
}

#[test]
fn connected_clusters_are_placed_adjacent() {
    let a = arch("[grid]\nwidth = 2\nheight = 2\nio_capacity = 2\n[clb]\nn = 1\nk = 2\ninputs = 2\n[routing]\nchannel_width = 4\n");
    let n = Netlist::parse(".model pair\n.inputs a b c\n.outputs y\n.names a b m\n11 1\n.names m c y\n1- 1\n-1 1\n.end\n").unwrap();
    for seed in 0..5 {
        let d = run_flow(&n, &a, seed).unwrap();
        assert_eq!(d.placement.clb_sites.len(), 2);
        let (x0, y0) = a.clb_site(d.placement.clb_sites[0]);
        let (x1, y1) = a.clb_site(d.placement.clb_sites[1]);
        assert_eq!(x0.abs_diff(x1) + y0.abs_diff(y1), 1, "seed {seed}");
    }
}

#[test]
fn single_track_channel_fails_in_routing() {
    let mut a = small_arch();
    a.channel_width = 1;
    let err = run_flow(&netlist("ripple4"), &a, 1).unwrap_err();
    assert_eq!(err.stage(), "route", "{err}");
    assert!(matches!(err, CadError::Congestion { .. } | CadError::Unroutable { .. }));
}

#[test]
fn wider_channels_never_lengthen_routes() {
    for name in ["full_adder", "ripple4", "mux4", "two_groups"] {
        let n = netlist(name);
        let narrow = small_arch();
        let mut wide = narrow.clone();
        wide.channel_width *= 2;
        let a = run_flow(&n, &narrow, 3).unwrap();
        let b = run_flow(&n, &wide, 3).unwrap();
        assert_eq!(a.placement, b.placement, "{name}");
        assert!(b.wirelength() <= a.wirelength(), "{name}: {} > {}", b.wirelength(), a.wirelength());
    }
}

/// Nets crossing a two-way split of the LUTs; `left` names one side.
fn cut(n: &Netlist, left: &BTreeSet<&str>) -> usize {
    let mut cut = 0;
    for net in n.nets() {
        let mut sides = BTreeSet::new();
        for l in &n.luts {
            if l.output == net || l.inputs.iter().any(|i| i == net) {
                sides.insert(left.contains(l.output.as_str()));
            }
        }
        if sides.len() == 2 {
            cut += 1;
        }
    }
    cut
}

#[test]
fn clustering_matches_minimum_cut_grouping() {
    let n = netlist("two_groups");
    let names: Vec<&str> = n.luts.iter().map(|l| l.output.as_str()).collect();
    assert_eq!(names.len(), 8);
    let mut best: Option<(usize, BTreeSet<&str>)> = None;
    let mut ties = 0;
    for mask in 0u32..256 {
        if mask.count_ones() != 4 || mask & 1 == 0 {
            continue;
        }
        let left: BTreeSet<&str> = (0..8).filter(|i| mask >> i & 1 == 1).map(|i| names[i]).collect();
        let c = cut(&n, &left);
        match &best {
            Some((b, _)) if c > *b => {}
            Some((b, _)) if c == *b => ties += 1,
            _ => {
                best = Some((c, left));
                ties = 0;
            }
        }
    }
    let (_, oracle) = best.unwrap();
    assert_eq!(ties, 0, "minimum cut is not unique");

    let packed = pack(&n, &small_arch()).unwrap();
    assert_eq!(packed.clusters.len(), 2);
    let groups: Vec<BTreeSet<&str>> = packed
        .clusters
        .iter()
        .map(|c| c.iter().map(|&b| packed.bles[b].name.as_str()).collect())
        .collect();
    assert!(groups.contains(&oracle), "{groups:?} vs {oracle:?}");
}

#[test]
fn one_minterm_changes_only_lut_bits() {
    let a = small_arch();
    let and2 = Netlist::parse(".model f\n.inputs a b\n.outputs y\n.names a b y\n11 1\n.end\n").unwrap();
    let xnor = Netlist::parse(".model f\n.inputs a b\n.outputs y\n.names a b y\n11 1\n00 1\n.end\n").unwrap();
    let x = run_flow(&and2, &a, 9).unwrap().bitstream(ContextId::One);
    let y = run_flow(&xnor, &a, 9).unwrap().bitstream(ContextId::One);
    assert_eq!(x.len(), a.bitstream_len());
    let diff: Vec<usize> = (0..x.len()).filter(|&i| x.bits[i] != y.bits[i]).collect();
    // The 2-input table repeats across the unused LUT inputs.
    assert_eq!(diff.len(), 1 << (a.k - 2));
    let lut_len = 1 << a.k;
    let ble_bits = a.ble_bits();
    assert!(diff.iter().all(|&i| i / ble_bits == diff[0] / ble_bits && i % ble_bits < lut_len));
}

#[test]
fn flow_is_deterministic_and_bitstream_round_trips() {
    let a = small_arch();
    let n = netlist("ripple4");
    let d1 = run_flow(&n, &a, 42).unwrap();
    let d2 = run_flow(&n, &a, 42).unwrap();
    let b1 = d1.bitstream(ContextId::Two);
    assert_eq!(b1, d2.bitstream(ContextId::Two));
    let back = Bitstream::from_bytes(&b1.to_bytes()).unwrap();
    assert_eq!(back.load(&a).unwrap(), d1.config);
}

#[test]
fn sequential_fixture_matches_over_long_runs() {
    let a = small_arch();
    let n = netlist("counter3");
    let d = run_flow(&n, &a, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let vectors: Vec<Vec<bool>> = (0..64).map(|_| vec![rng.gen_bool(0.7)]).collect();
    assert_eq!(simulate_routed(&d, &vectors).unwrap(), simulate_netlist(&n, &vectors).unwrap());
}

#[test]
fn default_fabric_runs_fixtures() {
    let a = default_arch();
    for name in ["xor2", "full_adder", "mux4"] {
        let n = netlist(name);
        let d = run_flow(&n, &a, 1).unwrap();
        let v = exhaustive_vectors(n.inputs.len());
        assert_eq!(simulate_routed(&d, &v).unwrap(), simulate_netlist(&n, &v).unwrap(), "{name}");
    }
}

#[test]
fn critical_path_orders_technologies() {
    let a = default_arch();
    for name in ["lut_chain4", "lut_chain8"] {
        let d = run_flow(&netlist(name), &a, 1).unwrap();
        let cp = |t| timing_analyze(&d, &shipped(t)).unwrap().critical_path;
        let (one, sram, two) = (cp(TechName::Fefet1Cfg), cp(TechName::Sram), cp(TechName::Fefet2Cfg));
        assert!(one < sram && sram < two, "{name}: {one} {sram} {two}");
        let r = timing_analyze(&d, &shipped(TechName::Sram)).unwrap();
        assert!((r.terms_total() - r.critical_path).abs() < 1e-15);
    }
}
