// SPDX-License-Identifier: Apache-2.0

//! Packing of LUTs and latches into BLEs and CLBs.
//!
//! A latch shares a BLE with the LUT driving its D input when that LUT
//! has no other sink; otherwise the latch gets a BLE of its own whose LUT
//! is a buffer. BLEs are then clustered greedily: each cluster starts
//! from the unclustered BLE with the most inputs and grows by the BLE
//! sharing the most nets with it, subject to the BLE count and the CLB
//! input-pin limit. Ties break toward the lower index, so packing is
//! deterministic.

use std::collections::{BTreeSet, HashMap};

use super::arch::FabricArch;
use super::netlist::{Netlist, Source};
use super::CadError;

pub type NetId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NetDriver {
    Input(usize),
    Ble(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NetSink {
    /// LUT input `pin` of a BLE.
    Ble { ble: usize, pin: usize },
    Output(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackedNet {
    pub name: String,
    pub driver: NetDriver,
    pub sinks: Vec<NetSink>,
}

/// Basic logic element: k-input LUT with optional flip-flop.
#[derive(Debug, Clone, PartialEq)]
pub struct Ble {
    /// Name of the netlist node realized by the LUT.
    pub name: String,
    pub inputs: Vec<NetId>,
    /// 2^k entries; inputs beyond `inputs.len()` are don't-cares.
    pub table: Vec<bool>,
    /// Flip-flop init value when the output is registered.
    pub ff: Option<bool>,
    pub output: NetId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packed {
    pub k: usize,
    pub bles: Vec<Ble>,
    pub nets: Vec<PackedNet>,
    /// BLE indices per cluster, in slot order.
    pub clusters: Vec<Vec<usize>>,
    pub input_names: Vec<String>,
    /// Net feeding each primary output.
    pub outputs: Vec<NetId>,
    pub output_names: Vec<String>,
}

impl Packed {
    /// Cluster holding each BLE.
    pub fn cluster_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.bles.len()];
        for (c, members) in self.clusters.iter().enumerate() {
            for &b in members {
                out[b] = c;
            }
        }
        out
    }

    /// Nets entering cluster `c` from outside, ascending.
    pub fn cluster_inputs(&self, c: usize) -> Vec<NetId> {
        external_inputs(&self.bles, &self.nets, &self.clusters[c])
    }
}

fn external_inputs(bles: &[Ble], nets: &[PackedNet], members: &[usize]) -> Vec<NetId> {
    let set: BTreeSet<NetId> = members
        .iter()
        .flat_map(|&b| bles[b].inputs.iter().copied())
        .filter(|&n| match nets[n].driver {
            NetDriver::Ble(d) => !members.contains(&d),
            NetDriver::Input(_) => true,
        })
        .collect();
    set.into_iter().collect()
}

/// Truth table over `k` inputs of a function given over its first inputs.
fn widen(table: &[bool], k: usize) -> Vec<bool> {
    let mask = table.len() - 1;
    (0..1usize << k).map(|i| table[i & mask]).collect()
}

pub fn pack(netlist: &Netlist, arch: &FabricArch) -> Result<Packed, CadError> {
    let k = arch.k;
    for lut in &netlist.luts {
        if lut.inputs.len() > k {
            return Err(CadError::Resource {
                stage: "pack",
                msg: format!("LUT `{}` has {} inputs but the fabric has k = {k}", lut.output, lut.inputs.len()),
            });
        }
    }
    let drivers = netlist.drivers().map_err(CadError::Netlist)?;

    // Fanout of each netlist net, to decide latch absorption.
    let mut fanout: HashMap<&str, usize> = HashMap::new();
    for lut in &netlist.luts {
        for i in &lut.inputs {
            *fanout.entry(i.as_str()).or_default() += 1;
        }
    }
    for l in &netlist.latches {
        *fanout.entry(l.d.as_str()).or_default() += 1;
    }
    for o in &netlist.outputs {
        *fanout.entry(o.as_str()).or_default() += 1;
    }

    let mut absorbed_by: HashMap<usize, usize> = HashMap::new();
    for (li, latch) in netlist.latches.iter().enumerate() {
        if let Some(Source::Lut(l)) = drivers.get(latch.d.as_str()) {
            if fanout[latch.d.as_str()] == 1 && !absorbed_by.contains_key(l) {
                absorbed_by.insert(*l, li);
            }
        }
    }

    // Nets: primary inputs, then one per BLE output.
    let mut net_ids: HashMap<String, NetId> = HashMap::new();
    let mut nets = Vec::new();
    for (i, name) in netlist.inputs.iter().enumerate() {
        net_ids.insert(name.clone(), nets.len());
        nets.push(PackedNet {
            name: name.clone(),
            driver: NetDriver::Input(i),
            sinks: Vec::new(),
        });
    }
    // (name, lut inputs, table, ff, output net name)
    let mut raw: Vec<(String, Vec<String>, Vec<bool>, Option<bool>, String)> = Vec::new();
    for (li, lut) in netlist.luts.iter().enumerate() {
        match absorbed_by.get(&li) {
            Some(&latch) => {
                let l = &netlist.latches[latch];
                raw.push((lut.output.clone(), lut.inputs.clone(), lut.table.clone(), Some(l.init), l.q.clone()));
            }
            None => raw.push((lut.output.clone(), lut.inputs.clone(), lut.table.clone(), None, lut.output.clone())),
        }
    }
    let absorbed: BTreeSet<usize> = absorbed_by.values().copied().collect();
    for (li, l) in netlist.latches.iter().enumerate() {
        if !absorbed.contains(&li) {
            raw.push((l.q.clone(), vec![l.d.clone()], vec![false, true], Some(l.init), l.q.clone()));
        }
    }
    for (b, r) in raw.iter().enumerate() {
        net_ids.insert(r.4.clone(), nets.len());
        nets.push(PackedNet {
            name: r.4.clone(),
            driver: NetDriver::Ble(b),
            sinks: Vec::new(),
        });
    }
    let mut bles = Vec::with_capacity(raw.len());
    for (b, (name, ins, table, ff, out)) in raw.into_iter().enumerate() {
        let inputs: Vec<NetId> = ins.iter().map(|n| net_ids[n]).collect();
        for (pin, &n) in inputs.iter().enumerate() {
            nets[n].sinks.push(NetSink::Ble { ble: b, pin });
        }
        bles.push(Ble {
            name,
            inputs,
            table: widen(&table, k),
            ff,
            output: net_ids[&out],
        });
    }
    let mut outputs = Vec::new();
    for (o, name) in netlist.outputs.iter().enumerate() {
        let id = net_ids[name];
        nets[id].sinks.push(NetSink::Output(o));
        outputs.push(id);
    }

    let clusters = cluster(&bles, &nets, arch)?;
    if clusters.len() > arch.clb_count() {
        return Err(CadError::Resource {
            stage: "pack",
            msg: format!("{} CLBs needed but the grid has {}", clusters.len(), arch.clb_count()),
        });
    }
    Ok(Packed {
        k,
        bles,
        nets,
        clusters,
        input_names: netlist.inputs.clone(),
        outputs,
        output_names: netlist.outputs.clone(),
    })
}

fn ble_nets(b: &Ble) -> BTreeSet<NetId> {
    b.inputs.iter().copied().chain([b.output]).collect()
}

fn cluster(bles: &[Ble], nets: &[PackedNet], arch: &FabricArch) -> Result<Vec<Vec<usize>>, CadError> {
    let mut free: BTreeSet<usize> = (0..bles.len()).collect();
    let mut clusters = Vec::new();
    while let Some(&first) = free.iter().next() {
        let seed = free
            .iter()
            .copied()
            .max_by(|&a, &b| bles[a].inputs.len().cmp(&bles[b].inputs.len()).then(b.cmp(&a)))
            .unwrap_or(first);
        if external_inputs(bles, nets, &[seed]).len() > arch.inputs {
            return Err(CadError::Resource {
                stage: "pack",
                msg: format!("BLE `{}` needs more than {} CLB inputs", bles[seed].name, arch.inputs),
            });
        }
        free.remove(&seed);
        let mut members = vec![seed];
        let mut member_nets = ble_nets(&bles[seed]);
        while members.len() < arch.n {
            let mut best: Option<(usize, usize)> = None;
            for &b in &free {
                let gain = ble_nets(&bles[b]).intersection(&member_nets).count();
                if best.is_some_and(|(g, _)| g >= gain) {
                    continue;
                }
                members.push(b);
                let fits = external_inputs(bles, nets, &members).len() <= arch.inputs;
                members.pop();
                if fits {
                    best = Some((gain, b));
                }
            }
            let Some((_, b)) = best else { break };
            free.remove(&b);
            members.push(b);
            member_nets.extend(ble_nets(&bles[b]));
        }
        clusters.push(members);
    }
    Ok(clusters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fabric::arch::SbPattern;

    fn arch(w: usize, h: usize, n: usize) -> FabricArch {
        FabricArch {
            width: w,
            height: h,
            io_capacity: 2,
            n,
            k: 4,
            inputs: 10,
            channel_width: 4,
            sb_pattern: SbPattern::Wilton,
            fc: 0.5,
        }
    }

    fn chain(len: usize) -> Netlist {
        let mut text = String::from(".inputs a\n.outputs y\n");
        let mut prev = "a".to_string();
        for i in 0..len {
            let out = if i + 1 == len { "y".to_string() } else { format!("n{i}") };
            text += &format!(".names {prev} {out}\n0 1\n");
            prev = out;
        }
        Netlist::parse(&text).unwrap()
    }

    #[test]
    fn single_lut_single_clb() {
        let p = pack(&chain(1), &arch(1, 1, 1)).unwrap();
        assert_eq!(p.clusters, vec![vec![0]]);
        assert_eq!(p.bles[0].table.len(), 16);
    }

    #[test]
    fn capacity_exceeded() {
        assert!(matches!(
            pack(&chain(5), &arch(1, 1, 4)),
            Err(CadError::Resource { stage: "pack", .. })
        ));
    }

    #[test]
    fn latch_absorption_and_buffering() {
        // q1 absorbs its sole-sink LUT; q2's D also feeds an output.
        let n = Netlist::parse(
            ".inputs a\n.outputs q1 q2 d2\n.names a d1\n0 1\n.latch d1 q1 0\n\
             .names a d2\n1 1\n.latch d2 q2 1\n",
        )
        .unwrap();
        let p = pack(&n, &arch(2, 2, 4)).unwrap();
        assert_eq!(p.bles.len(), 3);
        assert_eq!(p.bles[0].ff, Some(false));
        assert_eq!(p.nets[p.bles[0].output].name, "q1");
        assert_eq!(p.bles[1].ff, None);
        assert_eq!(p.bles[2].ff, Some(true));
        assert_eq!(p.nets[p.bles[2].inputs[0]].name, "d2");
    }

    #[test]
    fn widened_tables_ignore_upper_inputs() {
        assert_eq!(widen(&[false, true], 2), [false, true, false, true]);
    }
}
