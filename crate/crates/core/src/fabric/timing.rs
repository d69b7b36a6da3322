// SPDX-License-Identifier: Apache-2.0

//! Static timing analysis.
//!
//! Timing start points are primary inputs and flip-flop outputs (arrival
//! 0); endpoints are primary outputs and flip-flop inputs. A LUT adds the
//! technology's LUT6 delay, a connection costs one CB delay per
//! connection-block switch and one SB delay per switch-box switch on its
//! route. Wires themselves are free. Arrival times and the critical-path
//! breakdown are accumulated term by term in the same order, so the
//! breakdown sums to the reported total exactly.

use std::collections::BTreeMap;
use std::fmt;

use super::pack::{NetDriver, NetSink};
use super::route::Target;
use super::rrg::SwitchKind;
use super::RoutedDesign;
use crate::techlib::{PrimitiveKind, TechError, TechModel, TechName};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimingKind {
    /// Primary input or flip-flop output.
    Source,
    Lut,
    /// Primary output or flip-flop input.
    Sink,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingNode {
    pub name: String,
    pub kind: TimingKind,
}

/// Connection with its switch counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimingEdge {
    pub from: usize,
    pub to: usize,
    pub cb: usize,
    pub sb: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimingGraph {
    pub nodes: Vec<TimingNode>,
    pub edges: Vec<TimingEdge>,
}

impl TimingGraph {
    pub fn add_node(&mut self, name: impl Into<String>, kind: TimingKind) -> usize {
        self.nodes.push(TimingNode {
            name: name.into(),
            kind,
        });
        self.nodes.len() - 1
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cb: usize, sb: usize) {
        self.edges.push(TimingEdge { from, to, cb, sb });
    }

    /// Graph of a routed design: one node per primary input/output and
    /// LUT, plus a source/sink pair per flip-flop.
    pub fn from_routed(design: &RoutedDesign) -> TimingGraph {
        let packed = &design.packed;
        let rrg = &design.rrg;
        let cluster_of = packed.cluster_of();
        let mut g = TimingGraph::default();
        let pis: Vec<usize> = packed
            .input_names
            .iter()
            .map(|n| g.add_node(n.clone(), TimingKind::Source))
            .collect();
        let luts: Vec<usize> = packed
            .bles
            .iter()
            .map(|b| g.add_node(b.name.clone(), TimingKind::Lut))
            .collect();
        let mut q_nodes = BTreeMap::new();
        for (i, b) in packed.bles.iter().enumerate() {
            if b.ff.is_some() {
                let d = g.add_node(format!("{}.D", packed.nets[b.output].name), TimingKind::Sink);
                g.add_edge(luts[i], d, 0, 0);
                let q = g.add_node(format!("{}.Q", packed.nets[b.output].name), TimingKind::Source);
                q_nodes.insert(i, q);
            }
        }
        let pos: Vec<usize> = packed
            .output_names
            .iter()
            .map(|n| g.add_node(n.clone(), TimingKind::Sink))
            .collect();

        let routes: BTreeMap<usize, &super::route::NetRoute> =
            design.routing.nets.iter().map(|r| (r.net, r)).collect();
        let counts = |net: usize, target: Target| -> (usize, usize) {
            let Some(route) = routes.get(&net) else {
                return (0, 0);
            };
            let Some(&(_, node)) = route.targets.iter().find(|(t, _)| *t == target) else {
                return (0, 0);
            };
            route.path_switches(node).iter().fold((0, 0), |(cb, sb), &s| match rrg.switches[s].kind {
                SwitchKind::Cb => (cb + 1, sb),
                SwitchKind::Sb => (cb, sb + 1),
            })
        };
        for (id, net) in packed.nets.iter().enumerate() {
            let from = match net.driver {
                NetDriver::Input(i) => pis[i],
                NetDriver::Ble(b) => q_nodes.get(&b).copied().unwrap_or(luts[b]),
            };
            let mut seen = Vec::new();
            for sink in &net.sinks {
                let (to, target) = match *sink {
                    NetSink::Ble { ble, .. } => (luts[ble], Target::Cluster(cluster_of[ble])),
                    NetSink::Output(o) => (pos[o], Target::Output(o)),
                };
                if seen.contains(&to) {
                    continue;
                }
                seen.push(to);
                let (cb, sb) = counts(id, target);
                g.add_edge(from, to, cb, sb);
            }
        }
        g
    }

    fn topo_order(&self) -> Vec<usize> {
        let mut indeg = vec![0usize; self.nodes.len()];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            indeg[e.to] += 1;
            out[e.from].push(e.to);
        }
        let mut ready: std::collections::BTreeSet<usize> = (0..self.nodes.len()).filter(|&n| indeg[n] == 0).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(n) = ready.pop_first() {
            order.push(n);
            for &m in &out[n] {
                indeg[m] -= 1;
                if indeg[m] == 0 {
                    ready.insert(m);
                }
            }
        }
        order
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TermKind {
    Lut(String),
    Cb(usize),
    Sb(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayTerm {
    pub kind: TermKind,
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Endpoint {
    pub name: String,
    pub arrival: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub tech: TechName,
    pub critical_path: f64,
    /// Node names along the critical path.
    pub path: Vec<String>,
    pub terms: Vec<DelayTerm>,
    pub endpoints: Vec<Endpoint>,
}

impl TimingReport {
    /// Sum of the breakdown terms, in path order.
    pub fn terms_total(&self) -> f64 {
        self.terms.iter().fold(0.0, |acc, t| acc + t.delay)
    }

    pub fn lut_delay(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| matches!(t.kind, TermKind::Lut(_)))
            .map(|t| t.delay)
            .sum()
    }

    pub fn routing_delay(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| !matches!(t.kind, TermKind::Lut(_)))
            .map(|t| t.delay)
            .sum()
    }

    fn count(&self, f: impl Fn(&TermKind) -> Option<usize>) -> usize {
        self.terms.iter().filter_map(|t| f(&t.kind)).sum()
    }

    pub fn cb_taps(&self) -> usize {
        self.count(|k| if let TermKind::Cb(n) = k { Some(*n) } else { None })
    }

    pub fn sb_switches(&self) -> usize {
        self.count(|k| if let TermKind::Sb(n) = k { Some(*n) } else { None })
    }

    pub fn lut_count(&self) -> usize {
        self.count(|k| matches!(k, TermKind::Lut(_)).then_some(1))
    }
}

impl fmt::Display for TimingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "tech {}  critical path {:.1} ps", self.tech, self.critical_path * 1e12)?;
        writeln!(
            f,
            "  LUTs {} ({:.1} ps)  CB taps {}  SB switches {}  routing {:.1} ps",
            self.lut_count(),
            self.lut_delay() * 1e12,
            self.cb_taps(),
            self.sb_switches(),
            self.routing_delay() * 1e12
        )?;
        writeln!(f, "  path {}", self.path.join(" -> "))?;
        for e in &self.endpoints {
            writeln!(f, "  endpoint {:<16} arrival {:>8.1} ps  slack {:>8.1} ps", e.name, e.arrival * 1e12, e.slack * 1e12)?;
        }
        Ok(())
    }
}

/// Longest-path analysis of `graph` under `tech`.
pub fn analyze(graph: &TimingGraph, tech: &TechModel) -> Result<TimingReport, TechError> {
    let lut_d = tech.cost(PrimitiveKind::Lut6)?.delay;
    let cb_d = tech.cost(PrimitiveKind::CbSwitch)?.delay;
    let sb_d = tech.cost(PrimitiveKind::SbSwitch)?.delay;
    let n = graph.nodes.len();
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, e) in graph.edges.iter().enumerate() {
        incoming[e.to].push(i);
    }
    let edge_arrival = |from_arr: f64, e: &TimingEdge| {
        let mut t = from_arr;
        if e.cb > 0 {
            t += e.cb as f64 * cb_d;
        }
        if e.sb > 0 {
            t += e.sb as f64 * sb_d;
        }
        t
    };
    let mut arrival = vec![0.0f64; n];
    let mut best_in: Vec<Option<usize>> = vec![None; n];
    for v in graph.topo_order() {
        let node = &graph.nodes[v];
        if node.kind == TimingKind::Source {
            continue;
        }
        let mut a = 0.0;
        for &ei in &incoming[v] {
            let e = &graph.edges[ei];
            let t = edge_arrival(arrival[e.from], e);
            if best_in[v].is_none() || t > a {
                a = t;
                best_in[v] = Some(ei);
            }
        }
        if node.kind == TimingKind::Lut {
            a += lut_d;
        }
        arrival[v] = a;
    }

    let mut endpoints = Vec::new();
    let mut crit: Option<usize> = None;
    for (v, node) in graph.nodes.iter().enumerate() {
        if node.kind == TimingKind::Sink && crit.is_none_or(|c| arrival[v] > arrival[c]) {
            crit = Some(v);
        }
    }
    let critical_path = crit.map_or(0.0, |c| arrival[c]);
    for (v, node) in graph.nodes.iter().enumerate() {
        if node.kind == TimingKind::Sink {
            endpoints.push(Endpoint {
                name: node.name.clone(),
                arrival: arrival[v],
                slack: critical_path - arrival[v],
            });
        }
    }

    let mut chain = Vec::new();
    let mut cur = crit;
    while let Some(v) = cur {
        chain.push(v);
        cur = best_in[v].map(|ei| graph.edges[ei].from);
    }
    chain.reverse();
    let mut terms = Vec::new();
    for (i, &v) in chain.iter().enumerate() {
        if i > 0 {
            let e = &graph.edges[best_in[v].expect("non-first path node has an input")];
            if e.cb > 0 {
                terms.push(DelayTerm {
                    kind: TermKind::Cb(e.cb),
                    delay: e.cb as f64 * cb_d,
                });
            }
            if e.sb > 0 {
                terms.push(DelayTerm {
                    kind: TermKind::Sb(e.sb),
                    delay: e.sb as f64 * sb_d,
                });
            }
        }
        if graph.nodes[v].kind == TimingKind::Lut {
            terms.push(DelayTerm {
                kind: TermKind::Lut(graph.nodes[v].name.clone()),
                delay: lut_d,
            });
        }
    }
    Ok(TimingReport {
        tech: tech.name,
        critical_path,
        path: chain.iter().map(|&v| graph.nodes[v].name.clone()).collect(),
        terms,
        endpoints,
    })
}

/// Timing of a routed design under `tech`.
pub fn timing_analyze(design: &RoutedDesign, tech: &TechModel) -> Result<TimingReport, TechError> {
    analyze(&TimingGraph::from_routed(design), tech)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::techlib::{shipped, TechName};

    /// PI -CB-> LUT -CB-> LUT -CB-> PO
    fn two_lut_chain() -> TimingGraph {
        let mut g = TimingGraph::default();
        let a = g.add_node("a", TimingKind::Source);
        let l1 = g.add_node("l1", TimingKind::Lut);
        let l2 = g.add_node("l2", TimingKind::Lut);
        let y = g.add_node("y", TimingKind::Sink);
        g.add_edge(a, l1, 1, 0);
        g.add_edge(l1, l2, 1, 0);
        g.add_edge(l2, y, 1, 0);
        g
    }

    #[test]
    fn two_luts_three_taps() {
        let r = analyze(&two_lut_chain(), &shipped(TechName::Fefet1Cfg)).unwrap();
        let expected = 2.0 * 124.3e-12 + 3.0 * 7.8e-12;
        assert!((r.critical_path - expected).abs() < 1e-18);
        assert_eq!(format!("{:.1}", r.critical_path * 1e12), "272.0");
        assert_eq!(r.terms_total(), r.critical_path);
        assert_eq!(r.cb_taps(), 3);
        assert_eq!(r.sb_switches(), 0);
        assert_eq!(r.path, ["a", "l1", "l2", "y"]);
    }

    #[test]
    fn empty_graph_is_zero() {
        let r = analyze(&TimingGraph::default(), &shipped(TechName::Sram)).unwrap();
        assert_eq!(r.critical_path, 0.0);
        assert!(r.terms.is_empty());
    }

    #[test]
    fn doubling_delays_doubles_the_path() {
        let tech = shipped(TechName::Sram);
        let g = two_lut_chain();
        let base = analyze(&g, &tech).unwrap();
        let doubled = analyze(&g, &tech.scale_delays(2.0)).unwrap();
        assert_eq!(doubled.critical_path, 2.0 * base.critical_path);
    }

    #[test]
    fn slack_is_relative_to_the_critical_endpoint() {
        let mut g = two_lut_chain();
        let z = g.add_node("z", TimingKind::Sink);
        g.add_edge(0, z, 1, 2);
        let r = analyze(&g, &shipped(TechName::Sram)).unwrap();
        let z_ep = r.endpoints.iter().find(|e| e.name == "z").unwrap();
        assert!(z_ep.slack > 0.0);
        assert_eq!(r.endpoints.iter().find(|e| e.name == "y").unwrap().slack, 0.0);
    }
}
