// SPDX-License-Identifier: Apache-2.0

//! Workload timelines under three reconfiguration modes.
//!
//! * [`Mode::Conventional`]: one context; every configuration change
//!   loads the new bitstream and then executes.
//! * [`Mode::Preloaded2`]: both configurations are loaded once up front,
//!   one after the other on the single port; afterwards each change is a
//!   context switch.
//! * [`Mode::Dynamic`]: the next configuration streams into the free plane
//!   while the current one executes. The free plane becomes available
//!   when the current run of executions starts, so `load_i` starts with
//!   `exec_{i-1}` and `exec_i` starts at `max(exec_{i-1} end, load_i end)`.
//!
//! Consecutive tasks with the same configuration never reload. Loads take
//! `bits / rate` seconds. All times are seconds.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::context::DEFAULT_SWITCH_LATENCY;
use crate::kvfile::{Dimension, Document, KvError};

pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchedError {
    #[error("{0}")]
    Parse(#[from] KvError),
    #[error("invalid workload: {0}")]
    Invalid(String),
    #[error("{mode}: {msg}")]
    Mode { mode: Mode, msg: String },
    #[error("baseline total is zero")]
    ZeroBaseline,
    #[error("outcome probabilities sum to {0}, not 1")]
    Normalization(f64),
    #[error("task `{0}` has a repeat count of zero")]
    ZeroRepeat(String),
    #[error("unknown configuration `{0}`")]
    UnknownConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Conventional,
    Preloaded2,
    Dynamic,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Conventional, Mode::Preloaded2, Mode::Dynamic];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Conventional => "CONVENTIONAL",
            Mode::Preloaded2 => "PRELOADED_2",
            Mode::Dynamic => "DYNAMIC",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = SchedError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "conventional" => Ok(Mode::Conventional),
            "preloaded" | "preloaded_2" | "preloaded2" => Ok(Mode::Preloaded2),
            "dynamic" => Ok(Mode::Dynamic),
            _ => Err(SchedError::Invalid(format!("unknown mode `{s}`"))),
        }
    }
}

/// Seconds to stream `bits` at `rate` bits per second.
pub fn reconfig_time(bits: f64, rate: f64) -> Result<f64, SchedError> {
    if !(bits > 0.0 && bits.is_finite()) {
        return Err(SchedError::Invalid(format!("bitstream size {bits} must be positive")));
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(SchedError::Invalid(format!("load rate {rate} must be positive")));
    }
    Ok(bits / rate)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub config: String,
    /// Execution time of one run.
    pub exec: f64,
    pub bits: u64,
    /// Consecutive runs of this task.
    pub repeat: u32,
}

impl Task {
    pub fn new(config: impl Into<String>, exec: f64, bits: u64) -> Task {
        Task {
            config: config.into(),
            exec,
            bits,
            repeat: 1,
        }
    }

    pub fn repeated(mut self, n: u32) -> Task {
        self.repeat = n;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    pub tasks: Vec<Task>,
    /// Configuration port throughput in bits per second.
    pub rate: f64,
}

impl Workload {
    pub fn new(tasks: Vec<Task>, rate: f64) -> Workload {
        Workload { tasks, rate }
    }

    /// The same workload with every repeated task expanded into single
    /// runs.
    pub fn expanded(&self) -> Result<Workload, SchedError> {
        let mut tasks = Vec::new();
        for t in &self.tasks {
            if t.repeat == 0 {
                return Err(SchedError::ZeroRepeat(t.config.clone()));
            }
            tasks.extend((0..t.repeat).map(|_| Task { repeat: 1, ..t.clone() }));
        }
        Ok(Workload { tasks, rate: self.rate })
    }

    pub fn distinct_configs(&self) -> BTreeSet<&str> {
        self.tasks.iter().map(|t| t.config.as_str()).collect()
    }

    fn validate(&self) -> Result<(), SchedError> {
        if self.tasks.is_empty() {
            return Err(SchedError::Invalid("no tasks".into()));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(SchedError::Invalid(format!("load rate {} must be positive", self.rate)));
        }
        for t in &self.tasks {
            if !(t.exec >= 0.0 && t.exec.is_finite()) {
                return Err(SchedError::Invalid(format!("task `{}`: execution time {} is negative", t.config, t.exec)));
            }
            if t.bits == 0 {
                return Err(SchedError::Invalid(format!("task `{}`: bitstream is empty", t.config)));
            }
            if t.repeat == 0 {
                return Err(SchedError::ZeroRepeat(t.config.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    /// Latency of one context switch in PRELOADED_2.
    pub switch_time: f64,
    /// Charge the first task's load in every mode.
    pub count_first_load: bool,
    /// Leave the PRELOADED_2 initial loads out of the total.
    pub amortize_preload: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            switch_time: DEFAULT_SWITCH_LATENCY,
            count_first_load: true,
            amortize_preload: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Interval {
        Interval { start, end }
    }

    pub fn len(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskRecord {
    pub config: String,
    pub load: Option<Interval>,
    pub switch: Option<Interval>,
    pub exec: Interval,
    /// Context plane holding the configuration (0 or 1).
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub mode: Mode,
    pub records: Vec<TaskRecord>,
    pub total: f64,
}

impl Timeline {
    /// Total time spent loading, hidden or not.
    pub fn load_time(&self) -> f64 {
        self.records.iter().filter_map(|r| r.load).map(|i| i.len()).sum()
    }

    pub fn switch_count(&self) -> usize {
        self.records.iter().filter(|r| r.switch.is_some()).count()
    }
}

impl fmt::Display for Timeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ms = |i: Option<Interval>| match i {
            Some(i) => format!("{:>10.4} {:>10.4}", i.start * 1e3, i.end * 1e3),
            None => format!("{:>10} {:>10}", "-", "-"),
        };
        writeln!(f, "mode {}", self.mode)?;
        writeln!(
            f,
            "{:>4} {:<12} {:>4} {:>21} {:>21} {:>21}",
            "#", "config", "slot", "load start/end ms", "switch start/end ms", "exec start/end ms"
        )?;
        for (i, r) in self.records.iter().enumerate() {
            writeln!(
                f,
                "{:>4} {:<12} {:>4} {} {} {}",
                i,
                r.config,
                r.slot,
                ms(r.load),
                ms(r.switch),
                ms(Some(r.exec))
            )?;
        }
        writeln!(f, "total {:.4} ms", self.total * 1e3)
    }
}

/// Timeline of `w` under `mode`. Repeated tasks are expanded first.
pub fn schedule(w: &Workload, mode: Mode, opts: &Options) -> Result<Timeline, SchedError> {
    w.validate()?;
    let w = w.expanded()?;
    let records = match mode {
        Mode::Conventional => conventional(&w, opts)?,
        Mode::Preloaded2 => preloaded(&w, opts)?,
        Mode::Dynamic => dynamic(&w, opts)?,
    };
    let total = records.last().map_or(0.0, |r| r.exec.end);
    Ok(Timeline { mode, records, total })
}

/// Same as [`schedule`]; repeat counts expand into back-to-back runs of
/// one configuration with no reload in between.
pub fn schedule_repeated(w: &Workload, mode: Mode, opts: &Options) -> Result<Timeline, SchedError> {
    schedule(w, mode, opts)
}

fn conventional(w: &Workload, opts: &Options) -> Result<Vec<TaskRecord>, SchedError> {
    let mut t = 0.0;
    let mut out: Vec<TaskRecord> = Vec::with_capacity(w.tasks.len());
    for (i, task) in w.tasks.iter().enumerate() {
        let resident = out.last().is_some_and(|p| p.config == task.config);
        let load = if resident || (i == 0 && !opts.count_first_load) {
            None
        } else {
            let r = reconfig_time(task.bits as f64, w.rate)?;
            let l = Interval::new(t, t + r);
            t = l.end;
            Some(l)
        };
        let exec = Interval::new(t, t + task.exec);
        t = exec.end;
        out.push(TaskRecord {
            config: task.config.clone(),
            load,
            switch: None,
            exec,
            slot: 0,
        });
    }
    Ok(out)
}

fn preloaded(w: &Workload, opts: &Options) -> Result<Vec<TaskRecord>, SchedError> {
    let mut configs: Vec<&Task> = Vec::new();
    for t in &w.tasks {
        if !configs.iter().any(|c| c.config == t.config) {
            configs.push(t);
        }
    }
    if configs.len() > 2 {
        return Err(SchedError::Mode {
            mode: Mode::Preloaded2,
            msg: format!("{} distinct configurations for two planes", configs.len()),
        });
    }
    let mut t = 0.0;
    let mut loads = [None, None];
    for (slot, c) in configs.iter().enumerate() {
        if opts.amortize_preload || (slot == 0 && !opts.count_first_load) {
            continue;
        }
        let r = reconfig_time(c.bits as f64, w.rate)?;
        loads[slot] = Some(Interval::new(t, t + r));
        t += r;
    }
    let slot_of = |name: &str| configs.iter().position(|c| c.config == name).expect("collected above");
    let mut out: Vec<TaskRecord> = Vec::with_capacity(w.tasks.len());
    for task in &w.tasks {
        let slot = slot_of(&task.config);
        let switch = match out.last() {
            Some(p) if p.slot != slot => {
                let s = Interval::new(t, t + opts.switch_time);
                t = s.end;
                Some(s)
            }
            _ => None,
        };
        let exec = Interval::new(t, t + task.exec);
        t = exec.end;
        out.push(TaskRecord {
            config: task.config.clone(),
            load: loads[slot].take(),
            switch,
            exec,
            slot,
        });
    }
    Ok(out)
}

fn dynamic(w: &Workload, opts: &Options) -> Result<Vec<TaskRecord>, SchedError> {
    let mut out: Vec<TaskRecord> = Vec::with_capacity(w.tasks.len());
    // Exec start of the first task in the current run of one configuration.
    let mut run_start = 0.0;
    let mut port_free = 0.0f64;
    for (i, task) in w.tasks.iter().enumerate() {
        let record = match out.last() {
            None => {
                let load = if opts.count_first_load {
                    let r = reconfig_time(task.bits as f64, w.rate)?;
                    port_free = r;
                    Some(Interval::new(0.0, r))
                } else {
                    None
                };
                let start = load.map_or(0.0, |l| l.end);
                run_start = start;
                TaskRecord {
                    config: task.config.clone(),
                    load,
                    switch: None,
                    exec: Interval::new(start, start + task.exec),
                    slot: 0,
                }
            }
            Some(prev) if prev.config == task.config => TaskRecord {
                config: task.config.clone(),
                load: None,
                switch: None,
                exec: Interval::new(prev.exec.end, prev.exec.end + task.exec),
                slot: prev.slot,
            },
            Some(prev) => {
                let r = reconfig_time(task.bits as f64, w.rate)?;
                let ls = run_start.max(port_free);
                let load = Interval::new(ls, ls + r);
                port_free = load.end;
                let start = prev.exec.end.max(load.end);
                run_start = start;
                TaskRecord {
                    config: task.config.clone(),
                    load: Some(load),
                    switch: None,
                    exec: Interval::new(start, start + task.exec),
                    slot: 1 - prev.slot,
                }
            }
        };
        debug_assert!(i == 0 || record.exec.start >= out[i - 1].exec.end);
        out.push(record);
    }
    Ok(out)
}

/// Percentage of `baseline` time saved by `candidate`.
pub fn time_saving(baseline: &Timeline, candidate: &Timeline) -> Result<f64, SchedError> {
    saving(baseline.total, candidate.total)
}

/// Percentage of `baseline` seconds saved by `candidate` seconds.
pub fn saving(baseline: f64, candidate: f64) -> Result<f64, SchedError> {
    if baseline <= 0.0 {
        return Err(SchedError::ZeroBaseline);
    }
    Ok(100.0 * (baseline - candidate) / baseline)
}

/// One possible second stage of a branching workload.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub config: String,
    pub p: f64,
    pub exec: f64,
    pub bits: u64,
    /// Already resident in the spare plane; costs a switch instead of a
    /// load.
    pub preloaded: bool,
}

/// Two-stage workload: a resident first stage picks one outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchSpec {
    pub stage1: String,
    pub stage1_exec: f64,
    pub outcomes: Vec<Outcome>,
    pub rate: f64,
    pub switch_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeCost {
    pub config: String,
    pub p: f64,
    /// Switch or load time before the second stage.
    pub transition: f64,
    pub exec: f64,
    /// Total time when this outcome occurs.
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchTimeline {
    pub stage1: f64,
    pub outcomes: Vec<OutcomeCost>,
    pub expected_total: f64,
}

/// Expected completion time of a two-stage workload.
pub fn schedule_branching(spec: &BranchSpec) -> Result<BranchTimeline, SchedError> {
    if !(spec.stage1_exec >= 0.0 && spec.stage1_exec.is_finite()) {
        return Err(SchedError::Invalid(format!("stage-1 execution time {} is negative", spec.stage1_exec)));
    }
    if spec.outcomes.is_empty() {
        return Err(SchedError::Invalid("no outcomes".into()));
    }
    let sum: f64 = spec.outcomes.iter().map(|o| o.p).sum();
    if spec.outcomes.iter().any(|o| !(0.0..=1.0).contains(&o.p)) || (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(SchedError::Normalization(sum));
    }
    let mut outcomes = Vec::with_capacity(spec.outcomes.len());
    let mut expected = spec.stage1_exec;
    for o in &spec.outcomes {
        if !(o.exec >= 0.0 && o.exec.is_finite()) {
            return Err(SchedError::Invalid(format!("outcome `{}`: execution time {} is negative", o.config, o.exec)));
        }
        let transition = if o.preloaded {
            spec.switch_time
        } else {
            reconfig_time(o.bits as f64, spec.rate)?
        };
        expected += o.p * (transition + o.exec);
        outcomes.push(OutcomeCost {
            config: o.config.clone(),
            p: o.p,
            transition,
            exec: o.exec,
            total: spec.stage1_exec + transition + o.exec,
        });
    }
    Ok(BranchTimeline {
        stage1: spec.stage1_exec,
        outcomes,
        expected_total: expected,
    })
}

/// Named configuration of a scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSpec {
    pub name: String,
    pub exec: f64,
    pub bits: u64,
}

/// Parsed scenario file.
///
/// ```text
/// name = three_tasks
/// rate = 1 Mb/s
/// modes = conventional, dynamic
/// switch_time = 1 ns            # optional
/// count_first_load = true       # optional
/// amortize_preload = false      # optional
///
/// [config.a]
/// exec = 10 ms
/// bits = 4 kb
///
/// [workload]
/// sequence = a*5, b             # name or name*repeat
/// cycles = 1                    # optional; repeats the whole sequence
///
/// [branch]                      # optional two-stage workload
/// stage1 = a
/// [branch.outcome.b]
/// p = 0.6
/// preloaded = true
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub rate: f64,
    pub modes: Vec<Mode>,
    pub options: Options,
    pub configs: Vec<ConfigSpec>,
    pub workload: Option<Workload>,
    pub branch: Option<BranchSpec>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, SchedError> {
        let doc = Document::parse(text)?;
        let root = doc.root();
        let name = root.get("name").map_or_else(|| "scenario".to_string(), |e| e.value.clone());
        let rate_entry = root.require("rate")?;
        let rate = rate_entry.quantity(Dimension::BitRate)?;
        if rate <= 0.0 {
            return Err(SchedError::Invalid(format!("line {}: rate must be positive", rate_entry.line)));
        }
        let mut options = Options::default();
        if let Some(e) = root.get("switch_time") {
            options.switch_time = e.quantity(Dimension::Time)?;
        }
        if let Some(e) = root.get("count_first_load") {
            options.count_first_load = e.boolean()?;
        }
        if let Some(e) = root.get("amortize_preload") {
            options.amortize_preload = e.boolean()?;
        }
        let modes = match root.get("modes") {
            Some(e) => e.list().iter().map(|m| m.parse()).collect::<Result<Vec<Mode>, _>>()?,
            None => vec![Mode::Conventional, Mode::Dynamic],
        };

        let mut configs = Vec::new();
        for (cname, sec) in doc.children("config") {
            let exec = sec.require("exec")?.quantity(Dimension::Time)?;
            let bits_entry = sec.require("bits")?;
            let bits = bits_entry.quantity(Dimension::Bits)?.round();
            if bits < 1.0 {
                return Err(SchedError::Invalid(format!("line {}: config `{cname}` has no bits", bits_entry.line)));
            }
            configs.push(ConfigSpec {
                name: cname.to_string(),
                exec,
                bits: bits as u64,
            });
        }
        let find = |n: &str| {
            configs
                .iter()
                .find(|c| c.name == n)
                .ok_or_else(|| SchedError::UnknownConfig(n.to_string()))
        };

        let workload = match doc.section("workload") {
            None => None,
            Some(sec) => {
                let cycles: u32 = match sec.get("cycles") {
                    Some(e) => e.parse()?,
                    None => 1,
                };
                let mut tasks = Vec::new();
                for item in sec.require("sequence")?.list() {
                    let (n, rep) = match item.split_once('*') {
                        Some((n, r)) => (
                            n.trim(),
                            r.trim()
                                .parse::<u32>()
                                .map_err(|_| SchedError::Invalid(format!("bad repeat count in `{item}`")))?,
                        ),
                        None => (item.as_str(), 1),
                    };
                    let c = find(n)?;
                    tasks.push(Task::new(&c.name, c.exec, c.bits).repeated(rep));
                }
                let one = tasks.clone();
                for _ in 1..cycles {
                    tasks.extend(one.iter().cloned());
                }
                let w = Workload::new(tasks, rate);
                w.validate()?;
                Some(w)
            }
        };

        let branch = match doc.section("branch") {
            None => None,
            Some(sec) => {
                let s1 = find(&sec.require("stage1")?.value)?;
                let mut outcomes = Vec::new();
                for (oname, osec) in doc.children("branch.outcome") {
                    let c = match osec.get("config") {
                        Some(e) => find(&e.value)?,
                        None => find(oname)?,
                    };
                    outcomes.push(Outcome {
                        config: c.name.clone(),
                        p: osec.require("p")?.quantity(Dimension::Dimensionless)?,
                        exec: c.exec,
                        bits: c.bits,
                        preloaded: match osec.get("preloaded") {
                            Some(e) => e.boolean()?,
                            None => false,
                        },
                    });
                }
                Some(BranchSpec {
                    stage1: s1.name.clone(),
                    stage1_exec: s1.exec,
                    outcomes,
                    rate,
                    switch_time: options.switch_time,
                })
            }
        };
        if workload.is_none() && branch.is_none() {
            return Err(SchedError::Invalid("scenario has neither [workload] nor [branch]".into()));
        }
        Ok(Scenario {
            name,
            rate,
            modes,
            options,
            configs,
            workload,
            branch,
        })
    }
}
