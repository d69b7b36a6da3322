// SPDX-License-Identifier: Apache-2.0

//! Negotiated-congestion routing.
//!
//! Every iteration rips up and reroutes all nets in index order. Each sink
//! is reached by a Dijkstra search seeded with the net's current tree, over
//! node cost `(1 + history) * (1 + pres_fac * occupancy)`. After an
//! iteration overused nodes add their overuse to the history cost and
//! `pres_fac` grows by [`PRES_GROWTH`]. Routing stops when no node is
//! overused or after [`MAX_ITERATIONS`].
//!
//! A search may only enter channel tracks and the nodes it is looking for,
//! so pins and pads never carry another net through.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use super::arch::FabricArch;
use super::pack::{NetDriver, NetId, NetSink, Packed};
use super::place::Placement;
use super::rrg::{RrKind, Rrg};
use super::CadError;

pub const MAX_ITERATIONS: usize = 50;
pub const PRES_START: f64 = 0.5;
pub const PRES_GROWTH: f64 = 1.5;
pub const HIST_FACTOR: f64 = 1.0;

/// What a routed branch ends at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    /// Any input pin of the CLB holding this cluster.
    Cluster(usize),
    Output(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetRoute {
    pub net: NetId,
    pub source: usize,
    /// Node → (parent node, switch) for every tree node except the source.
    pub parent: BTreeMap<usize, (usize, usize)>,
    /// Reached node per target.
    pub targets: Vec<(Target, usize)>,
}

impl NetRoute {
    /// Switches from the source to `node`, source side first.
    pub fn path_switches(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = node;
        while let Some(&(p, s)) = self.parent.get(&cur) {
            out.push(s);
            cur = p;
        }
        out.reverse();
        out
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.source).chain(self.parent.keys().copied())
    }

    pub fn switches(&self) -> impl Iterator<Item = usize> + '_ {
        self.parent.values().map(|&(_, s)| s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Routing {
    pub nets: Vec<NetRoute>,
    pub iterations: usize,
}

impl Routing {
    /// Channel segments used over all nets.
    pub fn wirelength(&self, rrg: &Rrg) -> usize {
        self.nets
            .iter()
            .flat_map(|r| r.nodes())
            .filter(|&n| rrg.nodes[n].is_channel())
            .count()
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    cost: f64,
    node: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Min-heap on cost, then node index.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

struct Request {
    net: NetId,
    source: usize,
    targets: Vec<(Target, Vec<usize>)>,
}

/// Source node of each net and the node sets its sinks may land on.
fn requests(packed: &Packed, placement: &Placement, arch: &FabricArch, rrg: &Rrg) -> Vec<Request> {
    let cluster_of = packed.cluster_of();
    let slot_of = |b: usize| {
        packed.clusters[cluster_of[b]]
            .iter()
            .position(|&m| m == b)
            .expect("BLE is in its cluster")
    };
    let mut out = Vec::new();
    for (id, net) in packed.nets.iter().enumerate() {
        let (source, own) = match net.driver {
            NetDriver::Input(i) => (rrg.pad(placement.input_pads[i]), None),
            NetDriver::Ble(b) => {
                let c = cluster_of[b];
                (rrg.opin(placement.clb_sites[c], slot_of(b)), Some(c))
            }
        };
        let mut targets: Vec<Target> = net
            .sinks
            .iter()
            .filter_map(|s| match *s {
                NetSink::Ble { ble, .. } => {
                    let c = cluster_of[ble];
                    (Some(c) != own).then_some(Target::Cluster(c))
                }
                NetSink::Output(o) => Some(Target::Output(o)),
            })
            .collect();
        targets.sort_unstable();
        targets.dedup();
        if targets.is_empty() {
            continue;
        }
        let targets = targets
            .into_iter()
            .map(|t| {
                let nodes = match t {
                    Target::Cluster(c) => {
                        let site = placement.clb_sites[c];
                        (0..arch.inputs).map(|p| rrg.ipin(site, p)).collect()
                    }
                    Target::Output(o) => vec![rrg.pad(placement.output_pads[o])],
                };
                (t, nodes)
            })
            .collect();
        out.push(Request {
            net: id,
            source,
            targets,
        });
    }
    out
}

struct Costs {
    occ: Vec<u32>,
    hist: Vec<f64>,
    pres_fac: f64,
}

impl Costs {
    fn node(&self, n: usize) -> f64 {
        (1.0 + self.hist[n]) * (1.0 + self.pres_fac * self.occ[n] as f64)
    }
}

fn route_net(req: &Request, rrg: &Rrg, costs: &Costs) -> Result<NetRoute, CadError> {
    let mut parent: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let mut in_tree: Vec<usize> = vec![req.source];
    let mut reached = Vec::new();
    let mut dist: HashMap<usize, f64> = HashMap::new();
    let mut prev: HashMap<usize, (usize, usize)> = HashMap::new();
    for (target, nodes) in &req.targets {
        dist.clear();
        prev.clear();
        let mut heap = BinaryHeap::new();
        for &n in &in_tree {
            dist.insert(n, 0.0);
            heap.push(Entry { cost: 0.0, node: n });
        }
        let mut found = None;
        while let Some(Entry { cost, node }) = heap.pop() {
            if dist.get(&node).is_some_and(|&d| cost > d) {
                continue;
            }
            if nodes.contains(&node) {
                found = Some(node);
                break;
            }
            for e in &rrg.edges[node] {
                let allowed = rrg.nodes[e.to].is_channel() || nodes.contains(&e.to);
                if !allowed {
                    continue;
                }
                let next = cost + costs.node(e.to);
                if dist.get(&e.to).is_none_or(|&d| next < d) {
                    dist.insert(e.to, next);
                    prev.insert(e.to, (node, e.switch));
                    heap.push(Entry { cost: next, node: e.to });
                }
            }
        }
        let Some(end) = found else {
            return Err(CadError::Unroutable {
                net: req.net,
                msg: format!("no path to {target:?}"),
            });
        };
        let mut cur = end;
        while let Some(&(p, s)) = prev.get(&cur) {
            parent.insert(cur, (p, s));
            in_tree.push(cur);
            cur = p;
        }
        reached.push((*target, end));
    }
    Ok(NetRoute {
        net: req.net,
        source: req.source,
        parent,
        targets: reached,
    })
}

pub fn route(packed: &Packed, placement: &Placement, arch: &FabricArch, rrg: &Rrg) -> Result<Routing, CadError> {
    let reqs = requests(packed, placement, arch, rrg);
    let mut costs = Costs {
        occ: vec![0; rrg.nodes.len()],
        hist: vec![0.0; rrg.nodes.len()],
        pres_fac: PRES_START,
    };
    let mut routes: Vec<Option<NetRoute>> = vec![None; reqs.len()];
    let mut last_overuse = (0u32, 0usize);
    for iteration in 1..=MAX_ITERATIONS {
        for (i, req) in reqs.iter().enumerate() {
            if let Some(old) = routes[i].take() {
                for n in old.nodes() {
                    costs.occ[n] -= 1;
                }
            }
            let r = route_net(req, rrg, &costs)?;
            for n in r.nodes() {
                costs.occ[n] += 1;
            }
            routes[i] = Some(r);
        }
        let mut max_over = 0;
        let mut overused = 0;
        for n in 0..rrg.nodes.len() {
            if costs.occ[n] > 1 {
                let over = costs.occ[n] - 1;
                max_over = max_over.max(over);
                overused += 1;
                costs.hist[n] += HIST_FACTOR * over as f64;
            }
        }
        if overused == 0 {
            return Ok(Routing {
                nets: routes.into_iter().map(|r| r.expect("all nets routed")).collect(),
                iterations: iteration,
            });
        }
        last_overuse = (max_over, overused);
        costs.pres_fac *= PRES_GROWTH;
    }
    Err(CadError::Congestion {
        iterations: MAX_ITERATIONS,
        max_overuse: last_overuse.0,
        overused_nodes: last_overuse.1,
    })
}

/// Input pin used by each (cluster, net) pair that enters a CLB.
pub fn ipin_assignment(routing: &Routing, rrg: &Rrg) -> BTreeMap<(usize, NetId), usize> {
    let mut out = BTreeMap::new();
    for r in &routing.nets {
        for &(t, node) in &r.targets {
            if let (Target::Cluster(c), RrKind::Ipin { pin, .. }) = (t, rrg.nodes[node]) {
                out.insert((c, r.net), pin);
            }
        }
    }
    out
}
