// SPDX-License-Identifier: Apache-2.0

//! Placement of clusters and IOs by greedy construction plus simulated
//! annealing on half-perimeter wirelength.
//!
//! Construction places clusters in index order, each on the free site that
//! adds the least wirelength to already-placed terminals (ties toward the
//! grid center, then lower index), then places IOs the same way on pad
//! slots. Annealing then runs a fixed schedule: start temperature
//! [`T_START`], multiplied by [`COOLING`] after every
//! `MOVES_PER_ITEM * items` moves, until it drops below [`T_STOP`]. A move
//! relocates one random item to a random slot of its kind, swapping with
//! the occupant. The best placement seen is returned.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::arch::FabricArch;
use super::pack::{NetDriver, NetSink, Packed};
use super::CadError;

pub const T_START: f64 = 1.0;
pub const COOLING: f64 = 0.9;
pub const T_STOP: f64 = 0.01;
pub const MOVES_PER_ITEM: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    /// Row-major CLB index per cluster.
    pub clb_sites: Vec<usize>,
    /// Pad index per primary input.
    pub input_pads: Vec<usize>,
    /// Pad index per primary output.
    pub output_pads: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Item {
    Cluster(usize),
    Io(usize),
}

struct Problem {
    clb_pos: Vec<(i64, i64)>,
    pad_pos: Vec<(i64, i64)>,
    /// Terminals of every multi-terminal net.
    nets: Vec<Vec<Item>>,
    /// Nets touching each item: clusters first, then IOs.
    item_nets: Vec<Vec<usize>>,
    clusters: usize,
}

impl Problem {
    fn new(packed: &Packed, arch: &FabricArch) -> Problem {
        let clb_pos = (0..arch.clb_count())
            .map(|i| {
                let (x, y) = arch.clb_site(i);
                (x as i64, y as i64)
            })
            .collect();
        let pad_pos = arch.pad_sites().iter().map(|p| (p.x as i64, p.y as i64)).collect();
        let cluster_of = packed.cluster_of();
        let ni = packed.input_names.len();
        let clusters = packed.clusters.len();
        let mut nets = Vec::new();
        for net in &packed.nets {
            let mut terms = vec![match net.driver {
                NetDriver::Input(i) => Item::Io(i),
                NetDriver::Ble(b) => Item::Cluster(cluster_of[b]),
            }];
            for s in &net.sinks {
                terms.push(match *s {
                    NetSink::Ble { ble, .. } => Item::Cluster(cluster_of[ble]),
                    NetSink::Output(o) => Item::Io(ni + o),
                });
            }
            terms.sort_by_key(|t| match *t {
                Item::Cluster(c) => (0, c),
                Item::Io(i) => (1, i),
            });
            terms.dedup();
            if terms.len() > 1 {
                nets.push(terms);
            }
        }
        let ios = ni + packed.outputs.len();
        let mut item_nets = vec![Vec::new(); clusters + ios];
        for (n, terms) in nets.iter().enumerate() {
            for t in terms {
                let idx = match *t {
                    Item::Cluster(c) => c,
                    Item::Io(i) => clusters + i,
                };
                item_nets[idx].push(n);
            }
        }
        Problem {
            clb_pos,
            pad_pos,
            nets,
            item_nets,
            clusters,
        }
    }
}

struct State<'a> {
    p: &'a Problem,
    /// Site per cluster / pad per IO; `usize::MAX` while unplaced.
    clb_of: Vec<usize>,
    pad_of: Vec<usize>,
    clb_occ: Vec<Option<usize>>,
    pad_occ: Vec<Option<usize>>,
}

impl State<'_> {
    fn pos(&self, item: Item) -> Option<(i64, i64)> {
        match item {
            Item::Cluster(c) => self.clb_of.get(c).filter(|&&s| s != usize::MAX).map(|&s| self.p.clb_pos[s]),
            Item::Io(i) => self.pad_of.get(i).filter(|&&s| s != usize::MAX).map(|&s| self.p.pad_pos[s]),
        }
    }

    fn net_cost(&self, net: usize) -> i64 {
        let mut bb: Option<(i64, i64, i64, i64)> = None;
        for &t in &self.p.nets[net] {
            if let Some((x, y)) = self.pos(t) {
                bb = Some(match bb {
                    None => (x, x, y, y),
                    Some((a, b, c, d)) => (a.min(x), b.max(x), c.min(y), d.max(y)),
                });
            }
        }
        bb.map_or(0, |(a, b, c, d)| (b - a) + (d - c))
    }

    fn total(&self) -> i64 {
        (0..self.p.nets.len()).map(|n| self.net_cost(n)).sum()
    }

    fn nets_of(&self, item: Item) -> &[usize] {
        match item {
            Item::Cluster(c) => &self.p.item_nets[c],
            Item::Io(i) => &self.p.item_nets[self.p.clusters + i],
        }
    }

    fn affected(&self, a: Item, b: Option<Item>) -> Vec<usize> {
        let mut nets: Vec<usize> = self.nets_of(a).to_vec();
        if let Some(b) = b {
            nets.extend_from_slice(self.nets_of(b));
        }
        nets.sort_unstable();
        nets.dedup();
        nets
    }

    /// Moves `item` to `slot`, swapping with the occupant. Returns the
    /// displaced item, if any.
    fn relocate(&mut self, item: Item, slot: usize) -> Option<Item> {
        match item {
            Item::Cluster(c) => {
                let from = self.clb_of[c];
                let other = self.clb_occ[slot];
                if let Some(o) = other {
                    self.clb_of[o] = from;
                }
                if from != usize::MAX {
                    self.clb_occ[from] = other;
                }
                self.clb_of[c] = slot;
                self.clb_occ[slot] = Some(c);
                other.map(Item::Cluster)
            }
            Item::Io(i) => {
                let from = self.pad_of[i];
                let other = self.pad_occ[slot];
                if let Some(o) = other {
                    self.pad_of[o] = from;
                }
                if from != usize::MAX {
                    self.pad_occ[from] = other;
                }
                self.pad_of[i] = slot;
                self.pad_occ[slot] = Some(i);
                other.map(Item::Io)
            }
        }
    }

    fn slot_of(&self, item: Item) -> usize {
        match item {
            Item::Cluster(c) => self.clb_of[c],
            Item::Io(i) => self.pad_of[i],
        }
    }
}

/// Half-perimeter wirelength of a placement.
pub fn hpwl(packed: &Packed, arch: &FabricArch, placement: &Placement) -> i64 {
    let p = Problem::new(packed, arch);
    let st = State {
        p: &p,
        clb_of: placement.clb_sites.clone(),
        pad_of: placement.input_pads.iter().chain(&placement.output_pads).copied().collect(),
        clb_occ: Vec::new(),
        pad_occ: Vec::new(),
    };
    st.total()
}

pub fn place(packed: &Packed, arch: &FabricArch, seed: u64) -> Result<Placement, CadError> {
    let ios = packed.input_names.len() + packed.outputs.len();
    let pads = arch.pad_sites().len();
    if packed.clusters.len() > arch.clb_count() {
        return Err(CadError::Resource {
            stage: "place",
            msg: format!("{} clusters for {} CLB sites", packed.clusters.len(), arch.clb_count()),
        });
    }
    if ios > pads {
        return Err(CadError::Resource {
            stage: "place",
            msg: format!("{ios} IOs for {pads} pad slots"),
        });
    }
    let p = Problem::new(packed, arch);
    let mut st = State {
        p: &p,
        clb_of: vec![usize::MAX; packed.clusters.len()],
        pad_of: vec![usize::MAX; ios],
        clb_occ: vec![None; arch.clb_count()],
        pad_occ: vec![None; pads],
    };

    let center = ((arch.width + 1) as i64, (arch.height + 1) as i64);
    let center_dist = |(x, y): (i64, i64)| (2 * x - center.0).abs() + (2 * y - center.1).abs();
    for c in 0..packed.clusters.len() {
        let mut best: Option<(i64, i64, usize)> = None;
        for site in 0..arch.clb_count() {
            if st.clb_occ[site].is_some() {
                continue;
            }
            st.relocate(Item::Cluster(c), site);
            let cost: i64 = st.nets_of(Item::Cluster(c)).iter().map(|&n| st.net_cost(n)).sum();
            let key = (cost, center_dist(p.clb_pos[site]), site);
            if best.is_none_or(|b| key < b) {
                best = Some(key);
            }
            st.clb_occ[site] = None;
            st.clb_of[c] = usize::MAX;
        }
        let (_, _, site) = best.expect("enough sites checked above");
        st.relocate(Item::Cluster(c), site);
    }
    for i in 0..ios {
        let mut best: Option<(i64, usize)> = None;
        for slot in 0..pads {
            if st.pad_occ[slot].is_some() {
                continue;
            }
            st.relocate(Item::Io(i), slot);
            let cost: i64 = st.nets_of(Item::Io(i)).iter().map(|&n| st.net_cost(n)).sum();
            if best.is_none_or(|b| (cost, slot) < b) {
                best = Some((cost, slot));
            }
            st.pad_occ[slot] = None;
            st.pad_of[i] = usize::MAX;
        }
        let (_, slot) = best.expect("enough pads checked above");
        st.relocate(Item::Io(i), slot);
    }

    let items = packed.clusters.len() + ios;
    let mut cost = st.total();
    let mut best = (cost, st.clb_of.clone(), st.pad_of.clone());
    let movable = (!packed.clusters.is_empty() && arch.clb_count() > 1) || (ios > 0 && pads > 1);
    if items > 0 && movable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let moves = MOVES_PER_ITEM * items;
        let mut t = T_START;
        while t >= T_STOP {
            for _ in 0..moves {
                let pick = rng.gen_range(0..items);
                let (item, slots) = if pick < packed.clusters.len() {
                    (Item::Cluster(pick), arch.clb_count())
                } else {
                    (Item::Io(pick - packed.clusters.len()), pads)
                };
                let slot = rng.gen_range(0..slots);
                let from = st.slot_of(item);
                if slot == from {
                    continue;
                }
                let other = match item {
                    Item::Cluster(_) => st.clb_occ[slot].map(Item::Cluster),
                    Item::Io(_) => st.pad_occ[slot].map(Item::Io),
                };
                let nets = st.affected(item, other);
                let before: i64 = nets.iter().map(|&n| st.net_cost(n)).sum();
                st.relocate(item, slot);
                let after: i64 = nets.iter().map(|&n| st.net_cost(n)).sum();
                let delta = after - before;
                let accept = delta <= 0 || rng.gen::<f64>() < (-(delta as f64) / t).exp();
                if accept {
                    cost += delta;
                    if cost < best.0 {
                        best = (cost, st.clb_of.clone(), st.pad_of.clone());
                    }
                } else {
                    st.relocate(item, from);
                }
            }
            t *= COOLING;
        }
    }
    let (_, clb_sites, pad_of) = best;
    let ni = packed.input_names.len();
    Ok(Placement {
        clb_sites,
        input_pads: pad_of[..ni].to_vec(),
        output_pads: pad_of[ni..].to_vec(),
    })
}
