// SPDX-License-Identifier: Apache-2.0

//! Logic-cover netlists.
//!
//! The accepted grammar is a subset of BLIF:
//!
//! ```text
//! .model <name>
//! .inputs <net>...          # may repeat; `\` continues a line
//! .outputs <net>...
//! .names <in>... <out>      # followed by cover rows such as `1-0 1`
//! .latch <d> <q> [<type> <control>] [<init>]
//! .end
//! ```
//!
//! A cover lists either the on-set (output column `1`) or the off-set
//! (output column `0`) of its function; mixing both is rejected. A `.names`
//! with no rows is constant 0. Latch init values 2 and 3 (don't care,
//! unknown) are taken as 0.

use std::collections::{BTreeMap, HashMap, HashSet};

use thiserror::Error;

use crate::primitives::{lut_index, MAX_K};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetlistError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("net `{0}` has more than one driver")]
    MultipleDrivers(String),
    #[error("net `{0}` is used but never driven")]
    Undriven(String),
    #[error("combinational cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("expected {expected} input values, got {got}")]
    Width { expected: usize, got: usize },
}

/// Combinational node with up to six inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LutNode {
    /// Output net; also the node's name.
    pub output: String,
    pub inputs: Vec<String>,
    /// 2^|inputs| entries, input 0 least significant.
    pub table: Vec<bool>,
}

impl LutNode {
    pub fn eval(&self, values: &[bool]) -> bool {
        self.table[lut_index(values)]
    }
}

/// D flip-flop on the single global clock.
#[derive(Debug, Clone, PartialEq)]
pub struct Latch {
    pub d: String,
    pub q: String,
    pub init: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub luts: Vec<LutNode>,
    pub latches: Vec<Latch>,
}

/// Who drives a net.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Input(usize),
    Lut(usize),
    Latch(usize),
}

/// Joins `\`-continued lines, keeping the number of the first physical line.
fn logical_lines(text: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut pending: Option<(usize, String)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("");
        let (body, continued) = match content.trim_end().strip_suffix('\\') {
            Some(b) => (b, true),
            None => (content, false),
        };
        let entry = pending.get_or_insert_with(|| (idx + 1, String::new()));
        entry.1.push(' ');
        entry.1.push_str(body);
        if !continued {
            let (line, s) = pending.take().expect("just inserted");
            if !s.trim().is_empty() {
                out.push((line, s.trim().to_string()));
            }
        }
    }
    if let Some((line, s)) = pending {
        if !s.trim().is_empty() {
            out.push((line, s.trim().to_string()));
        }
    }
    out
}

struct Cover {
    inputs: Vec<String>,
    output: String,
    rows: Vec<(usize, String, bool)>,
}

impl Cover {
    fn table(&self) -> Result<Vec<bool>, NetlistError> {
        let n = self.inputs.len();
        let Some(polarity) = self.rows.first().map(|r| r.2) else {
            return Ok(vec![false; 1 << n]);
        };
        let mut table = vec![!polarity; 1 << n];
        for (line, pattern, value) in &self.rows {
            if *value != polarity {
                return Err(NetlistError::Syntax {
                    line: *line,
                    msg: "cover mixes on-set and off-set rows".into(),
                });
            }
            for (idx, slot) in table.iter_mut().enumerate() {
                let hit = pattern.chars().enumerate().all(|(i, c)| match c {
                    '1' => idx >> i & 1 == 1,
                    '0' => idx >> i & 1 == 0,
                    _ => true,
                });
                if hit {
                    *slot = polarity;
                }
            }
        }
        Ok(table)
    }
}

impl Netlist {
    /// Parses and validates netlist text.
    pub fn parse(text: &str) -> Result<Netlist, NetlistError> {
        let mut name = String::new();
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        let mut covers: Vec<Cover> = Vec::new();
        let mut latches = Vec::new();
        let mut in_cover = false;
        let mut ended = false;

        for (line, content) in logical_lines(text) {
            let syntax = |msg: String| NetlistError::Syntax { line, msg };
            let mut words = content.split_whitespace();
            let head = words.next().expect("non-empty line");
            if ended {
                return Err(syntax("content after .end".into()));
            }
            if !head.starts_with('.') {
                if !in_cover {
                    return Err(syntax(format!("unexpected `{content}` outside a .names cover")));
                }
                let cover = covers.last_mut().expect("in_cover implies a cover");
                let n = cover.inputs.len();
                let (pattern, value) = match (n, head, words.next(), words.next()) {
                    (0, v, None, None) => (String::new(), v),
                    (_, p, Some(v), None) => (p.to_string(), v),
                    _ => return Err(syntax(format!("malformed cover row `{content}`"))),
                };
                if pattern.len() != n || !pattern.chars().all(|c| matches!(c, '0' | '1' | '-')) {
                    return Err(syntax(format!("cover row `{pattern}` must have {n} of 0/1/-")));
                }
                let value = match value {
                    "1" => true,
                    "0" => false,
                    v => return Err(syntax(format!("cover output must be 0 or 1, found `{v}`"))),
                };
                cover.rows.push((line, pattern, value));
                continue;
            }
            in_cover = false;
            let args: Vec<String> = words.map(str::to_string).collect();
            match head {
                ".model" => {
                    name = args.first().cloned().unwrap_or_default();
                }
                ".inputs" => inputs.extend(args),
                ".outputs" => outputs.extend(args),
                ".names" => {
                    let Some((output, ins)) = args.split_last() else {
                        return Err(syntax(".names needs an output net".into()));
                    };
                    if ins.len() > MAX_K {
                        return Err(syntax(format!(
                            ".names with {} inputs exceeds the {MAX_K}-input limit",
                            ins.len()
                        )));
                    }
                    let unique: HashSet<&String> = ins.iter().collect();
                    if unique.len() != ins.len() {
                        return Err(syntax("repeated input in .names".into()));
                    }
                    covers.push(Cover {
                        inputs: ins.to_vec(),
                        output: output.clone(),
                        rows: Vec::new(),
                    });
                    in_cover = true;
                }
                ".latch" => {
                    let init = match args.len() {
                        2 | 4 => false,
                        3 | 5 => match args.last().map(String::as_str) {
                            Some("1") => true,
                            Some("0" | "2" | "3") => false,
                            Some(v) => return Err(syntax(format!("bad latch init `{v}`"))),
                            None => unreachable!(),
                        },
                        _ => return Err(syntax(".latch expects <d> <q> [<type> <control>] [<init>]".into())),
                    };
                    latches.push(Latch {
                        d: args[0].clone(),
                        q: args[1].clone(),
                        init,
                    });
                }
                ".end" => ended = true,
                other => return Err(syntax(format!("unsupported directive `{other}`"))),
            }
        }

        let luts = covers
            .iter()
            .map(|c| {
                Ok(LutNode {
                    output: c.output.clone(),
                    inputs: c.inputs.clone(),
                    table: c.table()?,
                })
            })
            .collect::<Result<Vec<_>, NetlistError>>()?;
        let netlist = Netlist {
            name,
            inputs,
            outputs,
            luts,
            latches,
        };
        netlist.validate()?;
        Ok(netlist)
    }

    /// Map from every net to its unique driver.
    pub fn drivers(&self) -> Result<HashMap<&str, Source>, NetlistError> {
        let mut map = HashMap::new();
        let all = self
            .inputs
            .iter()
            .enumerate()
            .map(|(i, n)| (n, Source::Input(i)))
            .chain(self.luts.iter().enumerate().map(|(i, l)| (&l.output, Source::Lut(i))))
            .chain(self.latches.iter().enumerate().map(|(i, l)| (&l.q, Source::Latch(i))));
        for (net, src) in all {
            if map.insert(net.as_str(), src).is_some() {
                return Err(NetlistError::MultipleDrivers(net.clone()));
            }
        }
        Ok(map)
    }

    fn validate(&self) -> Result<(), NetlistError> {
        let drivers = self.drivers()?;
        let used = self
            .luts
            .iter()
            .flat_map(|l| l.inputs.iter())
            .chain(self.latches.iter().map(|l| &l.d))
            .chain(self.outputs.iter());
        for net in used {
            if !drivers.contains_key(net.as_str()) {
                return Err(NetlistError::Undriven(net.clone()));
            }
        }
        self.topo_order().map(|_| ())
    }

    /// LUT indices in dependency order. Latch outputs and primary inputs
    /// break combinational paths.
    pub fn topo_order(&self) -> Result<Vec<usize>, NetlistError> {
        let by_output: HashMap<&str, usize> = self
            .luts
            .iter()
            .enumerate()
            .map(|(i, l)| (l.output.as_str(), i))
            .collect();
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut mark = vec![0u8; self.luts.len()];
        let mut order = Vec::with_capacity(self.luts.len());
        for root in 0..self.luts.len() {
            if mark[root] != 0 {
                continue;
            }
            let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
            mark[root] = 1;
            while let Some(&mut (node, ref mut next)) = stack.last_mut() {
                let lut = &self.luts[node];
                if *next < lut.inputs.len() {
                    let input = &lut.inputs[*next];
                    *next += 1;
                    if let Some(&dep) = by_output.get(input.as_str()) {
                        match mark[dep] {
                            0 => {
                                mark[dep] = 1;
                                stack.push((dep, 0));
                            }
                            1 => {
                                let start = stack.iter().position(|&(n, _)| n == dep).expect("on stack");
                                let mut cycle: Vec<String> =
                                    stack[start..].iter().map(|&(n, _)| self.luts[n].output.clone()).collect();
                                cycle.push(self.luts[dep].output.clone());
                                return Err(NetlistError::Cycle(cycle));
                            }
                            _ => {}
                        }
                    }
                } else {
                    mark[node] = 2;
                    order.push(node);
                    stack.pop();
                }
            }
        }
        Ok(order)
    }

    /// Net names in a stable order: inputs, LUT outputs, latch outputs.
    pub fn nets(&self) -> Vec<&str> {
        self.inputs
            .iter()
            .map(String::as_str)
            .chain(self.luts.iter().map(|l| l.output.as_str()))
            .chain(self.latches.iter().map(|l| l.q.as_str()))
            .collect()
    }
}

/// Cycle-accurate reference simulator of a netlist.
#[derive(Debug, Clone)]
pub struct NetlistSim<'a> {
    netlist: &'a Netlist,
    order: Vec<usize>,
    index: BTreeMap<&'a str, usize>,
    state: Vec<bool>,
}

impl<'a> NetlistSim<'a> {
    pub fn new(netlist: &'a Netlist) -> Result<Self, NetlistError> {
        let order = netlist.topo_order()?;
        let index = netlist.nets().into_iter().enumerate().map(|(i, n)| (n, i)).collect();
        Ok(NetlistSim {
            netlist,
            order,
            index,
            state: netlist.latches.iter().map(|l| l.init).collect(),
        })
    }

    pub fn reset(&mut self) {
        self.state = self.netlist.latches.iter().map(|l| l.init).collect();
    }

    /// One clock cycle: settles logic, samples outputs, then clocks latches.
    pub fn step(&mut self, inputs: &[bool]) -> Result<Vec<bool>, NetlistError> {
        let n = self.netlist;
        if inputs.len() != n.inputs.len() {
            return Err(NetlistError::Width {
                expected: n.inputs.len(),
                got: inputs.len(),
            });
        }
        let mut values = vec![false; self.index.len()];
        values[..inputs.len()].copy_from_slice(inputs);
        let latch_base = n.inputs.len() + n.luts.len();
        values[latch_base..].copy_from_slice(&self.state);
        let mut args = Vec::with_capacity(MAX_K);
        for &l in &self.order {
            let lut = &n.luts[l];
            args.clear();
            args.extend(lut.inputs.iter().map(|i| values[self.index[i.as_str()]]));
            values[n.inputs.len() + l] = lut.eval(&args);
        }
        let outputs = n.outputs.iter().map(|o| values[self.index[o.as_str()]]).collect();
        for (s, latch) in self.state.iter_mut().zip(&n.latches) {
            *s = values[self.index[latch.d.as_str()]];
        }
        Ok(outputs)
    }
}

/// Runs `vectors` from the reset state and returns one output row per cycle.
pub fn simulate_netlist(netlist: &Netlist, vectors: &[Vec<bool>]) -> Result<Vec<Vec<bool>>, NetlistError> {
    let mut sim = NetlistSim::new(netlist)?;
    vectors.iter().map(|v| sim.step(v)).collect()
}

/// All 2^n input vectors in counting order, input 0 least significant.
pub fn exhaustive_vectors(n: usize) -> Vec<Vec<bool>> {
    (0..1usize << n)
        .map(|v| (0..n).map(|i| v >> i & 1 == 1).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const XOR: &str = ".model xor\n.inputs a b\n.outputs y\n.names a b y\n10 1\n01 1\n.end\n";

    #[test]
    fn parses_xor() {
        let n = Netlist::parse(XOR).unwrap();
        assert_eq!(n.inputs, ["a", "b"]);
        assert_eq!(n.outputs, ["y"]);
        assert_eq!(n.luts.len(), 1);
        assert_eq!(n.luts[0].table, [false, true, true, false]);
        let trace = simulate_netlist(&n, &exhaustive_vectors(2)).unwrap();
        let y: Vec<bool> = trace.iter().map(|r| r[0]).collect();
        assert_eq!(y, [false, true, true, false]);
    }

    #[test]
    fn off_set_cover_and_constants() {
        let n = Netlist::parse(
            ".inputs a b\n.outputs y z one\n.names a b y\n11 0\n.names z\n.names one\n1\n",
        )
        .unwrap();
        assert_eq!(n.luts[0].table, [true, true, true, false]);
        assert_eq!(n.luts[1].table, [false]);
        assert_eq!(n.luts[2].table, [true]);
    }

    #[test]
    fn continuation_lines() {
        let n = Netlist::parse(".inputs a \\\n b\n.outputs y\n.names a b y\n11 1\n").unwrap();
        assert_eq!(n.inputs, ["a", "b"]);
    }

    #[test]
    fn rejects_cycles() {
        let text = ".inputs a\n.outputs y\n.names a z y\n11 1\n.names y z\n1 1\n";
        match Netlist::parse(text) {
            Err(NetlistError::Cycle(c)) => {
                assert!(c.contains(&"y".to_string()) && c.contains(&"z".to_string()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn latch_breaks_cycles() {
        let text = ".inputs en\n.outputs q\n.names en q d\n10 1\n01 1\n.latch d q re clk 0\n";
        let n = Netlist::parse(text).unwrap();
        let t = simulate_netlist(&n, &vec![vec![true]; 3]).unwrap();
        assert_eq!(t, [[false], [true], [false]]);
    }

    #[test]
    fn syntax_errors_have_lines() {
        assert!(matches!(
            Netlist::parse(".inputs a\n.outputs y\n.names a y\n2 1\n"),
            Err(NetlistError::Syntax { line: 4, .. })
        ));
        assert!(matches!(
            Netlist::parse(".inputs a\n.subckt foo\n"),
            Err(NetlistError::Syntax { line: 2, .. })
        ));
        assert!(matches!(
            Netlist::parse(".inputs a\n.outputs y\n.names a y\n1 1\n0 0\n"),
            Err(NetlistError::Syntax { line: 5, .. })
        ));
    }

    #[test]
    fn driver_checks() {
        assert_eq!(
            Netlist::parse(".inputs a\n.outputs y\n.names b y\n1 1\n"),
            Err(NetlistError::Undriven("b".into()))
        );
        assert_eq!(
            Netlist::parse(".inputs a\n.outputs a\n.names a\n1\n"),
            Err(NetlistError::MultipleDrivers("a".into()))
        );
    }

    #[test]
    fn width_mismatch() {
        let n = Netlist::parse(XOR).unwrap();
        assert_eq!(
            simulate_netlist(&n, &[vec![true]]),
            Err(NetlistError::Width { expected: 2, got: 1 })
        );
    }
}
