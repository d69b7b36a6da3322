// SPDX-License-Identifier: Apache-2.0

//! Routing-resource graph.
//!
//! Nodes are channel track segments, CLB pins and pads. Every edge is
//! realized by exactly one programmable switch; switch ids number all
//! connection-block switches first (CLBs row-major, each pin inputs then
//! outputs, sides bottom/top/left/right, tracks ascending, then pads in
//! [`FabricArch::pad_sites`] order) and switch-box switches after them
//! (boxes row-major from (0, 0), pairs in [`SB_PAIRS`] order).

use super::arch::{FabricArch, Side, CLB_SIDES, SB_PAIRS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RrKind {
    ChanX { x: usize, y: usize, track: usize },
    ChanY { x: usize, y: usize, track: usize },
    /// BLE output pin `pin` of CLB `clb`.
    Opin { clb: usize, pin: usize },
    /// Input pin `pin` of CLB `clb`.
    Ipin { clb: usize, pin: usize },
    Pad { pad: usize },
}

impl RrKind {
    pub fn is_channel(self) -> bool {
        matches!(self, RrKind::ChanX { .. } | RrKind::ChanY { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SwitchKind {
    Cb,
    Sb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwitchInfo {
    pub kind: SwitchKind,
    /// Endpoints; for connection-block switches `a` is the driving side.
    pub a: usize,
    pub b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RrEdge {
    pub to: usize,
    pub switch: usize,
}

#[derive(Debug, Clone)]
pub struct Rrg {
    pub nodes: Vec<RrKind>,
    pub edges: Vec<Vec<RrEdge>>,
    pub switches: Vec<SwitchInfo>,
    /// Number of connection-block switches; switch-box ids start here.
    pub cb_count: usize,
    width: usize,
    height: usize,
    w: usize,
    chany_base: usize,
    opin_base: usize,
    ipin_base: usize,
    pad_base: usize,
    n: usize,
    inputs: usize,
}

impl Rrg {
    pub fn build(arch: &FabricArch) -> Rrg {
        let (width, height, w) = (arch.width, arch.height, arch.channel_width);
        let chanx = width * (height + 1) * w;
        let chany = (width + 1) * height * w;
        let clbs = arch.clb_count();
        let pads = arch.pad_sites();
        let mut g = Rrg {
            nodes: Vec::new(),
            edges: Vec::new(),
            switches: Vec::new(),
            cb_count: 0,
            width,
            height,
            w,
            chany_base: chanx,
            opin_base: chanx + chany,
            ipin_base: chanx + chany + clbs * arch.n,
            pad_base: chanx + chany + clbs * (arch.n + arch.inputs),
            n: arch.n,
            inputs: arch.inputs,
        };
        for y in 0..=height {
            for x in 1..=width {
                for track in 0..w {
                    g.nodes.push(RrKind::ChanX { x, y, track });
                }
            }
        }
        for y in 1..=height {
            for x in 0..=width {
                for track in 0..w {
                    g.nodes.push(RrKind::ChanY { x, y, track });
                }
            }
        }
        for clb in 0..clbs {
            for pin in 0..arch.n {
                g.nodes.push(RrKind::Opin { clb, pin });
            }
        }
        for clb in 0..clbs {
            for pin in 0..arch.inputs {
                g.nodes.push(RrKind::Ipin { clb, pin });
            }
        }
        for pad in 0..pads.len() {
            g.nodes.push(RrKind::Pad { pad });
        }
        g.edges = vec![Vec::new(); g.nodes.len()];

        for clb in 0..clbs {
            let (x, y) = arch.clb_site(clb);
            for pin in 0..arch.clb_pins() {
                for (side_idx, side) in CLB_SIDES.iter().enumerate() {
                    for track in arch.pin_tracks(pin, side_idx) {
                        let chan = match side {
                            Side::Bottom => g.chanx(x, y - 1, track),
                            Side::Top => g.chanx(x, y, track),
                            Side::Left => g.chany(x - 1, y, track),
                            Side::Right => g.chany(x, y, track),
                        };
                        if pin < arch.inputs {
                            g.add_switch(SwitchKind::Cb, chan, g.ipin(clb, pin), false);
                        } else {
                            g.add_switch(SwitchKind::Cb, g.opin(clb, pin - arch.inputs), chan, false);
                        }
                    }
                }
            }
        }
        for (pad, site) in pads.iter().enumerate() {
            for track in 0..w {
                let chan = if site.y == 0 {
                    g.chanx(site.x, 0, track)
                } else if site.y == height + 1 {
                    g.chanx(site.x, height, track)
                } else if site.x == 0 {
                    g.chany(0, site.y, track)
                } else {
                    g.chany(width, site.y, track)
                };
                g.add_switch(SwitchKind::Cb, g.pad(pad), chan, true);
            }
        }
        g.cb_count = g.switches.len();

        for y in 0..=height {
            for x in 0..=width {
                let present = arch.sb_sides(x, y);
                for (a, b) in SB_PAIRS {
                    if !(present[a as usize] && present[b as usize]) {
                        continue;
                    }
                    for t in 0..w {
                        let na = g.sb_node(x, y, a, t);
                        let nb = g.sb_node(x, y, b, arch.sb_pattern.map(a, b, t, w));
                        g.add_switch(SwitchKind::Sb, na, nb, true);
                    }
                }
            }
        }
        g
    }

    fn add_switch(&mut self, kind: SwitchKind, a: usize, b: usize, bidirectional: bool) {
        let switch = self.switches.len();
        self.switches.push(SwitchInfo { kind, a, b });
        self.edges[a].push(RrEdge { to: b, switch });
        if bidirectional {
            self.edges[b].push(RrEdge { to: a, switch });
        }
    }

    fn sb_node(&self, x: usize, y: usize, side: Side, track: usize) -> usize {
        match side {
            Side::Left => self.chanx(x, y, track),
            Side::Right => self.chanx(x + 1, y, track),
            Side::Bottom => self.chany(x, y, track),
            Side::Top => self.chany(x, y + 1, track),
        }
    }

    pub fn chanx(&self, x: usize, y: usize, track: usize) -> usize {
        debug_assert!((1..=self.width).contains(&x) && y <= self.height);
        (y * self.width + (x - 1)) * self.w + track
    }

    pub fn chany(&self, x: usize, y: usize, track: usize) -> usize {
        debug_assert!(x <= self.width && (1..=self.height).contains(&y));
        self.chany_base + ((y - 1) * (self.width + 1) + x) * self.w + track
    }

    pub fn opin(&self, clb: usize, pin: usize) -> usize {
        self.opin_base + clb * self.n + pin
    }

    pub fn ipin(&self, clb: usize, pin: usize) -> usize {
        self.ipin_base + clb * self.inputs + pin
    }

    pub fn pad(&self, pad: usize) -> usize {
        self.pad_base + pad
    }

    pub fn sb_count(&self) -> usize {
        self.switches.len() - self.cb_count
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fabric::arch::SbPattern;

    fn arch(w: usize, pattern: SbPattern) -> FabricArch {
        FabricArch {
            width: 3,
            height: 2,
            io_capacity: 2,
            n: 2,
            k: 3,
            inputs: 4,
            channel_width: w,
            sb_pattern: pattern,
            fc: 0.5,
        }
    }

    #[test]
    fn switch_counts_match_arch_formulas() {
        for w in 1..6 {
            for p in [SbPattern::Disjoint, SbPattern::Wilton] {
                let a = arch(w, p);
                let g = Rrg::build(&a);
                assert_eq!(g.cb_count, a.cb_switch_count());
                assert_eq!(g.sb_count(), a.sb_switch_count());
            }
        }
    }

    #[test]
    fn node_indices_round_trip() {
        let a = arch(3, SbPattern::Wilton);
        let g = Rrg::build(&a);
        assert_eq!(g.nodes[g.chanx(2, 1, 2)], RrKind::ChanX { x: 2, y: 1, track: 2 });
        assert_eq!(g.nodes[g.chany(0, 2, 1)], RrKind::ChanY { x: 0, y: 2, track: 1 });
        assert_eq!(g.nodes[g.opin(4, 1)], RrKind::Opin { clb: 4, pin: 1 });
        assert_eq!(g.nodes[g.ipin(5, 3)], RrKind::Ipin { clb: 5, pin: 3 });
        assert_eq!(g.nodes[g.pad(7)], RrKind::Pad { pad: 7 });
    }

    #[test]
    fn sb_edges_join_channels_only() {
        let g = Rrg::build(&arch(2, SbPattern::Wilton));
        for s in &g.switches[g.cb_count..] {
            assert!(g.nodes[s.a].is_channel() && g.nodes[s.b].is_channel());
        }
        for s in &g.switches[..g.cb_count] {
            assert!(g.nodes[s.a].is_channel() != g.nodes[s.b].is_channel());
        }
    }
}
