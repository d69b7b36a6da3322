// SPDX-License-Identifier: Apache-2.0

//! Command implementations behind the `ctxfpga` binary.
//!
//! Every command returns a [`Report`]: human-readable text, one JSON record
//! per result line and any plot-ready columnar files. Commands are pure
//! functions of their arguments and the seed.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ctxfpga::context::{
    cb_experiment, co_simulate, parse_plan, ContextError, PlanAction, PlanEvent, PlanStep,
};
use ctxfpga::device::{
    apply_pulse, program_two_step, switching_time, BitMatrix, DeviceParams, FeFETArray, FeFETState, StepKind,
    WritePulse,
};
use ctxfpga::fabric::{
    exhaustive_vectors, run_flow, simulate_netlist, simulate_routed, timing_analyze, CadError, FabricArch, FabricDevice,
    FabricImage, Netlist, RoutedDesign,
};
use ctxfpga::fixtures;
use ctxfpga::kvfile::{parse_quantity, Dimension};
use ctxfpga::primitives::ContextId;
use ctxfpga::scheduler::{schedule, schedule_branching, time_saving, Mode, SchedError, Scenario, Timeline};
use ctxfpga::techlib::{compare_report, load_tech_model, round1, shipped, TechError, TechModel, TechName};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_CAD: i32 = 4;
pub const EXIT_NOT_READY: i32 = 5;
pub const EXIT_CONTEXT_IN_USE: i32 = 6;
pub const EXIT_VERIFY: i32 = 7;

/// Largest input count simulated exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 10;
/// Random vectors used above [`EXHAUSTIVE_LIMIT`].
pub const RANDOM_VECTORS: usize = 1024;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("parse: {0}")]
    Parse(String),
    #[error("{stage}: {msg}")]
    Cad { stage: &'static str, msg: String },
    #[error("{0}")]
    NotReady(String),
    #[error("{0}")]
    ContextInUse(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } | CliError::Other(_) => EXIT_OTHER,
            CliError::Parse(_) => EXIT_PARSE,
            CliError::Cad { .. } => EXIT_CAD,
            CliError::NotReady(_) => EXIT_NOT_READY,
            CliError::ContextInUse(_) => EXIT_CONTEXT_IN_USE,
        }
    }
}

impl From<CadError> for CliError {
    fn from(e: CadError) -> Self {
        match e {
            CadError::Netlist(_) | CadError::Arch(_) => CliError::Parse(e.to_string()),
            _ => CliError::Cad {
                stage: e.stage(),
                msg: e.to_string(),
            },
        }
    }
}

impl From<TechError> for CliError {
    fn from(e: TechError) -> Self {
        match e {
            TechError::Lookup { .. } => CliError::Other(e.to_string()),
            _ => CliError::Parse(e.to_string()),
        }
    }
}

impl From<SchedError> for CliError {
    fn from(e: SchedError) -> Self {
        match e {
            SchedError::Parse(_) | SchedError::UnknownConfig(_) => CliError::Parse(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<ContextError> for CliError {
    fn from(e: ContextError) -> Self {
        match e {
            ContextError::ContextInUse(_) => CliError::ContextInUse(e.to_string()),
            ContextError::NotReady { .. } => CliError::NotReady(e.to_string()),
            ContextError::Target(_) => CliError::Cad {
                stage: "simulate",
                msg: e.to_string(),
            },
            _ => CliError::Usage(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Text,
    /// One JSON object per line.
    Records,
}

#[derive(Debug, Parser)]
#[command(name = "ctxfpga", version, about = "Dual-context FeFET FPGA toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Seed for placement and random stimulus.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Directory for plot data, traces and bitstreams.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Switching sweeps, two-step programming and single pulses.
    Device(DeviceArgs),
    /// Pack, place, route, time and verify a netlist.
    Flow(FlowArgs),
    /// Per-primitive and aggregate cost reductions.
    Cost(CostArgs),
    /// Reconfiguration timelines for a scenario.
    Schedule(ScheduleArgs),
    /// Run a design while other contexts load in the background.
    Cosim(CosimArgs),
}

#[derive(Debug, Args, Default)]
pub struct DeviceArgs {
    /// Amplitude sweep `START:STOP:STEP[V]`.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Bit matrix file to program with the two-step scheme.
    #[arg(long)]
    pub program: Option<PathBuf>,
    /// Single pulse `AMPLITUDE,WIDTH`, e.g. `-2V,1us`.
    #[arg(long, allow_hyphen_values = true)]
    pub pulse: Option<String>,
    /// Starting state of every cell before programming.
    #[arg(long, value_enum, default_value_t = Start::High)]
    pub from: Start,
    /// Tech file whose [device] section replaces the default parameters.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Start {
    Low,
    #[default]
    High,
}

#[derive(Debug, Args)]
pub struct FlowArgs {
    /// Netlist file or fixture name.
    #[arg(long)]
    pub netlist: String,
    /// Architecture file, or `default` / `small`.
    #[arg(long, default_value = "default")]
    pub arch: String,
    /// Tech names or files to time the design with.
    #[arg(long, value_delimiter = ',', default_values_t = ["SRAM".to_string(), "FEFET_1CFG".to_string(), "FEFET_2CFG".to_string()])]
    pub tech: Vec<String>,
    /// Override the channel width of the architecture.
    #[arg(long)]
    pub channel_width: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    #[arg(long, default_value = "SRAM")]
    pub baseline: String,
    #[arg(long, default_value = "FEFET_2CFG")]
    pub candidate: String,
    /// Architecture whose primitive counts weight the aggregate.
    #[arg(long, default_value = "default")]
    pub arch: String,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// Scenario file or shipped scenario name.
    #[arg(long)]
    pub scenario: String,
    /// Modes to run instead of those listed in the scenario.
    #[arg(long, value_delimiter = ',')]
    pub modes: Vec<String>,
    /// Leave the preloaded mode's initial loads out of its total.
    #[arg(long)]
    pub amortize_preload: bool,
    /// Treat the first configuration as already resident.
    #[arg(long)]
    pub exclude_first_load: bool,
}

#[derive(Debug, Args)]
pub struct CosimArgs {
    /// Design active in context 1 at start (file or fixture name).
    #[arg(long, default_value = "xor2")]
    pub netlist: String,
    /// Load plan file or shipped plan name.
    #[arg(long, default_value = "xor_and")]
    pub plan: String,
    #[arg(long, default_value = "small")]
    pub arch: String,
    /// Configuration port rate.
    #[arg(long, default_value = "3.2 Gb/s")]
    pub rate: String,
    /// Time between evaluation steps.
    #[arg(long, default_value = "100 ns")]
    pub period: String,
    #[arg(long, default_value = "1 ns")]
    pub switch_latency: String,
    /// Evaluation steps; derived from the plan when absent.
    #[arg(long)]
    pub cycles: Option<usize>,
    /// Replay the dual-switch three-cycle sequence instead of a fabric.
    #[arg(long)]
    pub cb_experiment: bool,
    /// Conducting state of the switch branches for `--cb-experiment`.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub on1: bool,
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    pub on2: bool,
}

/// Data file written to the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutFile {
    pub name: String,
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub text: String,
    pub records: Vec<Value>,
    pub files: Vec<OutFile>,
    /// A verification inside the command did not pass.
    pub failed: bool,
}

impl Report {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.text.clone(),
            Format::Records => {
                let mut s = String::new();
                for r in &self.records {
                    s.push_str(&r.to_string());
                    s.push('\n');
                }
                s
            }
        }
    }

    pub fn write_files(&self, dir: &Path) -> Result<(), CliError> {
        let io = |p: &Path, e: std::io::Error| CliError::Io {
            path: p.display().to_string(),
            msg: e.to_string(),
        };
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        for f in &self.files {
            let p = dir.join(&f.name);
            fs::write(&p, &f.data).map_err(|e| io(&p, e))?;
        }
        Ok(())
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }

    fn tsv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) {
        let mut s = header.join("\t");
        s.push('\n');
        for r in rows {
            s.push_str(&r.join("\t"));
            s.push('\n');
        }
        self.files.push(OutFile {
            name: name.to_string(),
            data: s.into_bytes(),
        });
    }
}

/// Runs the parsed command line.
pub fn run(cli: &Cli) -> Result<Report, CliError> {
    match &cli.command {
        Command::Device(a) => cmd_device(a),
        Command::Flow(a) => cmd_flow(a, cli.seed),
        Command::Cost(a) => cmd_cost(a),
        Command::Schedule(a) => cmd_schedule(a),
        Command::Cosim(a) => cmd_cosim(a, cli.seed),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

/// Reads `arg` as a file if it exists, else as a shipped item name.
fn file_or_named(arg: &str, named: impl Fn(&str) -> Option<&'static str>, what: &str) -> Result<String, CliError> {
    let p = Path::new(arg);
    if p.is_file() {
        return read(p);
    }
    named(arg).map(str::to_string).ok_or_else(|| CliError::Io {
        path: arg.to_string(),
        msg: format!("no such file or shipped {what}"),
    })
}

pub fn load_netlist(arg: &str) -> Result<Netlist, CliError> {
    let text = file_or_named(arg, fixtures::netlist_text, "netlist")?;
    Ok(Netlist::parse(&text).map_err(CadError::from)?)
}

pub fn load_arch(arg: &str) -> Result<FabricArch, CliError> {
    let text = file_or_named(
        arg,
        |n| match n {
            "default" => Some(fixtures::DEFAULT_ARCH),
            "small" => Some(fixtures::SMALL_ARCH),
            _ => None,
        },
        "architecture",
    )?;
    let arch = FabricArch::parse(&text).map_err(CadError::from)?;
    arch.validate().map_err(CadError::from)?;
    Ok(arch)
}

pub fn load_tech(arg: &str) -> Result<TechModel, CliError> {
    if let Ok(name) = arg.parse::<TechName>() {
        if !Path::new(arg).is_file() {
            return Ok(shipped(name));
        }
    }
    Ok(load_tech_model(&read(Path::new(arg))?)?)
}

fn quantity(text: &str, dim: Dimension, what: &str) -> Result<f64, CliError> {
    parse_quantity(text, dim).map_err(|m| CliError::Usage(format!("{what}: {m}")))
}

fn bits_str(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Parses `START:STOP:STEP` with an optional trailing `V`.
pub fn parse_sweep(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("sweep `{spec}` is not START:STOP:STEP[V]"));
    let body = spec.trim().trim_end_matches(['V', 'v']);
    let parts: Vec<f64> = body
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let [start, stop, step] = parts[..] else {
        return Err(bad());
    };
    if !(step > 0.0) || stop < start || start <= 0.0 {
        return Err(bad());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

pub fn cmd_device(args: &DeviceArgs) -> Result<Report, CliError> {
    if args.sweep.is_none() && args.program.is_none() && args.pulse.is_none() {
        return Err(CliError::Usage("device needs --sweep, --program or --pulse".into()));
    }
    let params = match &args.params {
        Some(p) => load_tech_model(&read(p)?)?
            .device
            .ok_or_else(|| CliError::Parse(format!("{}: no [device] section", p.display())))?,
        None => DeviceParams::default(),
    };
    params
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let mut rep = Report::default();

    if let Some(spec) = &args.sweep {
        let amps = parse_sweep(spec)?;
        rep.line("amplitude_V  t_sw_s        switches_in_t_write");
        let mut rows = Vec::new();
        for v in amps {
            let t = switching_time(&params, v).map_err(|e| CliError::Usage(e.to_string()))?;
            let sw = t <= params.t_write;
            rep.line(format!("{v:<12.3} {t:<13.6e} {}", if sw { "yes" } else { "no" }));
            rep.records.push(json!({"kind": "sweep", "amplitude_v": v, "t_sw_s": t, "switches": sw}));
            rows.push(vec![format!("{v}"), format!("{t:e}")]);
        }
        rep.tsv("device_sweep.tsv", &["amplitude_V", "t_sw_s"], rows);
    }

    if let Some(path) = &args.program {
        let target = BitMatrix::parse(&read(path)?).map_err(|m| CliError::Parse(format!("{}: {m}", path.display())))?;
        let start = match args.from {
            Start::Low => FeFETState::LowVth,
            Start::High => FeFETState::HighVth,
        };
        let array = FeFETArray::new(target.rows, target.cols, start);
        let out = program_two_step(&array, &target, &params).map_err(|e| CliError::Usage(e.to_string()))?;
        rep.line(format!("program {}x{} from {start}", target.rows, target.cols));
        for (i, step) in out.plan.iter().enumerate() {
            let kind = match step.kind {
                StepKind::Erase => "erase".to_string(),
                StepKind::SelectiveWrite { row } => format!("write row {row}"),
            };
            let fmt_v = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
            rep.line(format!(
                "step {i}: {kind:<12} WL [{}] body [{}] width {:e} s",
                fmt_v(&step.word_lines),
                fmt_v(&step.bodies),
                step.width
            ));
            rep.records.push(json!({
                "kind": "pulse_step", "index": i, "step": kind,
                "word_lines_v": step.word_lines, "bodies_v": step.bodies, "width_s": step.width,
            }));
        }
        let read_back = out.array.read_bits(&params);
        let ok = read_back == target;
        for r in 0..read_back.rows {
            let row: Vec<bool> = (0..read_back.cols).map(|c| read_back.get(r, c)).collect();
            rep.line(format!("row {r}: {}", bits_str(&row)));
        }
        if out.disturbs.is_empty() {
            rep.line("disturbs: none");
        } else {
            for d in &out.disturbs {
                rep.line(format!(
                    "disturb: cell ({}, {}) amplitude {} V exposure {:.3}",
                    d.row, d.col, d.amplitude, d.exposure
                ));
            }
        }
        rep.line(format!("target reached: {}", if ok { "yes" } else { "no" }));
        rep.records.push(json!({
            "kind": "program", "rows": target.rows, "cols": target.cols, "target_reached": ok,
            "disturbs": out.disturbs.iter().map(|d| json!({"row": d.row, "col": d.col, "amplitude_v": d.amplitude, "exposure": d.exposure})).collect::<Vec<_>>(),
        }));
        rep.failed |= !ok || !out.disturbs.is_empty();
    }

    if let Some(spec) = &args.pulse {
        let (a, w) = spec
            .split_once(',')
            .ok_or_else(|| CliError::Usage(format!("pulse `{spec}` is not AMPLITUDE,WIDTH")))?;
        let amp = quantity(a, Dimension::Voltage, "pulse amplitude")?;
        let width = quantity(w, Dimension::Time, "pulse width")?;
        let pulse = WritePulse::new(amp, width).map_err(|e| CliError::Usage(e.to_string()))?;
        let mut switched = false;
        for s in [FeFETState::LowVth, FeFETState::HighVth] {
            let after = apply_pulse(s, pulse, &params);
            switched |= after != s;
            rep.line(format!("{s} -> {after}"));
        }
        let t_sw = switching_time(&params, amp.abs()).ok();
        rep.line(if switched { "switch" } else { "no switch" });
        rep.records.push(json!({
            "kind": "pulse", "amplitude_v": amp, "width_s": width, "t_sw_s": t_sw, "switched": switched,
        }));
    }
    Ok(rep)
}

/// Stimulus for checking a design: exhaustive up to
/// [`EXHAUSTIVE_LIMIT`] inputs, seeded random vectors above.
pub fn stimulus(inputs: usize, seed: u64) -> Vec<Vec<bool>> {
    if inputs <= EXHAUSTIVE_LIMIT {
        exhaustive_vectors(inputs)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..RANDOM_VECTORS).map(|_| (0..inputs).map(|_| rng.gen()).collect()).collect()
    }
}

/// Netlist simulation against the routed fabric on `vectors`.
pub fn verify_routed(design: &RoutedDesign, vectors: &[Vec<bool>]) -> Result<bool, CliError> {
    let expect = simulate_netlist(&design.netlist, vectors).map_err(CadError::from)?;
    let got = simulate_routed(design, vectors)?;
    Ok(expect == got)
}

pub fn cmd_flow(args: &FlowArgs, seed: u64) -> Result<Report, CliError> {
    let netlist = load_netlist(&args.netlist)?;
    let mut arch = load_arch(&args.arch)?;
    if let Some(w) = args.channel_width {
        arch.channel_width = w;
    }
    if args.tech.is_empty() {
        return Err(CliError::Usage("flow needs at least one --tech".into()));
    }
    let techs = args.tech.iter().map(|t| load_tech(t)).collect::<Result<Vec<_>, _>>()?;
    let design = run_flow(&netlist, &arch, seed)?;
    let bitstream = design.bitstream(ContextId::One);
    let digest = design.config.digest(&arch);

    let mut rep = Report::default();
    rep.line(format!(
        "design {}  inputs {}  outputs {}  luts {}  latches {}",
        netlist.name,
        netlist.inputs.len(),
        netlist.outputs.len(),
        netlist.luts.len(),
        netlist.latches.len()
    ));
    rep.line(format!(
        "fabric {}x{} N={} K={} W={}  seed {seed}",
        arch.width, arch.height, arch.n, arch.k, arch.channel_width
    ));
    rep.line(format!(
        "clusters {}  wirelength {}  route iterations {}  bitstream {} bits  digest {digest}",
        design.packed.clusters.len(),
        design.wirelength(),
        design.routing.iterations,
        bitstream.len()
    ));
    rep.records.push(json!({
        "kind": "design", "name": netlist.name, "seed": seed, "clusters": design.packed.clusters.len(),
        "wirelength": design.wirelength(), "route_iterations": design.routing.iterations,
        "bitstream_bits": bitstream.len(), "digest": digest,
    }));

    let mut rows = Vec::new();
    for t in &techs {
        let r = timing_analyze(&design, t)?;
        rep.text.push_str(&r.to_string());
        rep.records.push(json!({
            "kind": "timing", "tech": t.name.as_str(), "critical_path_ps": r.critical_path * 1e12,
            "lut_ps": r.lut_delay() * 1e12, "routing_ps": r.routing_delay() * 1e12,
            "luts": r.lut_count(), "cb_taps": r.cb_taps(), "sb_switches": r.sb_switches(), "path": r.path,
        }));
        rows.push(vec![
            t.name.as_str().to_string(),
            format!("{:.3}", r.critical_path * 1e12),
            format!("{:.3}", r.lut_delay() * 1e12),
            format!("{:.3}", r.routing_delay() * 1e12),
        ]);
    }
    rep.tsv("flow_timing.tsv", &["tech", "critical_path_ps", "lut_ps", "routing_ps"], rows);

    let vectors = stimulus(netlist.inputs.len(), seed);
    let ok = verify_routed(&design, &vectors)?;
    let verdict = if ok { "PASS" } else { "FAIL" };
    rep.line(format!("equivalence {verdict} over {} vectors", vectors.len()));
    rep.records.push(json!({"kind": "equivalence", "vectors": vectors.len(), "verdict": verdict}));
    rep.failed |= !ok;
    rep.files.push(OutFile {
        name: format!("{}.bit", netlist.name),
        data: bitstream.to_bytes(),
    });
    Ok(rep)
}

pub fn cmd_cost(args: &CostArgs) -> Result<Report, CliError> {
    let base = load_tech(&args.baseline)?;
    let cand = load_tech(&args.candidate)?;
    let arch = load_arch(&args.arch)?;
    let report = compare_report(&base, &cand, &arch.primitive_counts())?;
    let mut rep = Report {
        text: report.to_string(),
        ..Report::default()
    };
    let mut rows = Vec::new();
    let opt = |v: Option<f64>| v.map(round1);
    for r in &report.rows {
        rep.records.push(json!({
            "kind": "reduction", "baseline": report.baseline.as_str(), "candidate": report.candidate.as_str(),
            "primitive": r.kind.as_str(),
            "area_pct": opt(r.reduction.area), "delay_pct": opt(r.reduction.delay), "power_pct": opt(r.reduction.power),
            "area_rel_pct": opt(r.relative.area), "delay_rel_pct": opt(r.relative.delay), "power_rel_pct": opt(r.relative.power),
        }));
        let cell = |v: Option<f64>| v.map_or("nan".to_string(), |v| format!("{:.1}", round1(v)));
        rows.push(vec![
            r.kind.as_str().to_string(),
            cell(r.reduction.area),
            cell(r.reduction.delay),
            cell(r.reduction.power),
        ]);
    }
    rep.records.push(json!({
        "kind": "aggregate", "baseline": report.baseline.as_str(), "candidate": report.candidate.as_str(),
        "counts": report.stats.iter().map(|(k, n)| (k.as_str().to_string(), json!(n))).collect::<serde_json::Map<_, _>>(),
        "area_pct": opt(report.aggregate.area), "delay_pct": opt(report.aggregate.delay), "power_pct": opt(report.aggregate.power),
    }));
    rep.tsv("cost.tsv", &["primitive", "area_pct", "delay_pct", "power_pct"], rows);
    Ok(rep)
}

fn timeline_rows(t: &Timeline) -> Vec<Vec<String>> {
    let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:e}"));
    t.records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                i.to_string(),
                r.config.clone(),
                r.slot.to_string(),
                f(r.load.map(|l| l.start)),
                f(r.load.map(|l| l.end)),
                f(r.switch.map(|s| s.start)),
                f(r.switch.map(|s| s.end)),
                f(Some(r.exec.start)),
                f(Some(r.exec.end)),
            ]
        })
        .collect()
}

pub fn cmd_schedule(args: &ScheduleArgs) -> Result<Report, CliError> {
    let text = file_or_named(&args.scenario, fixtures::scenario_text, "scenario")?;
    let scenario = Scenario::parse(&text)?;
    let mut opts = scenario.options;
    opts.amortize_preload |= args.amortize_preload;
    opts.count_first_load &= !args.exclude_first_load;
    let modes: Vec<Mode> = if args.modes.is_empty() {
        scenario.modes.clone()
    } else {
        args.modes.iter().map(|m| m.parse()).collect::<Result<_, _>>()?
    };
    let mut rep = Report::default();
    rep.line(format!("scenario {}", scenario.name));
    rep.records.push(json!({
        "kind": "scenario", "name": scenario.name, "rate_bps": scenario.rate,
        "count_first_load": opts.count_first_load, "amortize_preload": opts.amortize_preload,
        "switch_time_s": opts.switch_time,
    }));

    if let Some(w) = &scenario.workload {
        let mut timelines = Vec::new();
        for &mode in &modes {
            let t = schedule(w, mode, &opts)?;
            rep.text.push_str(&t.to_string());
            for (i, r) in t.records.iter().enumerate() {
                rep.records.push(json!({
                    "kind": "task", "mode": mode.as_str(), "index": i, "config": r.config, "slot": r.slot,
                    "load": r.load.map(|l| [l.start, l.end]), "switch": r.switch.map(|s| [s.start, s.end]),
                    "exec": [r.exec.start, r.exec.end],
                }));
            }
            rep.records.push(json!({"kind": "total", "mode": mode.as_str(), "total_s": t.total}));
            rep.tsv(
                &format!("schedule_{}.tsv", mode.as_str().to_ascii_lowercase()),
                &["index", "config", "slot", "load_start_s", "load_end_s", "switch_start_s", "switch_end_s", "exec_start_s", "exec_end_s"],
                timeline_rows(&t),
            );
            timelines.push(t);
        }
        let base = timelines
            .iter()
            .find(|t| t.mode == Mode::Conventional)
            .or(timelines.first())
            .cloned();
        if let Some(base) = base {
            rep.line(format!("savings vs {}", base.mode));
            for t in timelines.iter().filter(|t| t.mode != base.mode) {
                let pct = time_saving(&base, t)?;
                rep.line(format!("  {:<13} {:>8.4} ms -> {:>8.4} ms  {:.1}%", t.mode.as_str(), base.total * 1e3, t.total * 1e3, pct));
                rep.records.push(json!({
                    "kind": "saving", "baseline": base.mode.as_str(), "candidate": t.mode.as_str(),
                    "baseline_s": base.total, "candidate_s": t.total, "saving_pct": pct,
                }));
            }
        }
    }

    if let Some(spec) = &scenario.branch {
        let mut spec = spec.clone();
        spec.switch_time = opts.switch_time;
        let b = schedule_branching(&spec)?;
        rep.line(format!("branching after {} ({:.4} ms)", spec.stage1, b.stage1 * 1e3));
        let mut rows = Vec::new();
        for o in &b.outcomes {
            rep.line(format!(
                "  p={:<5} {:<12} transition {:>10.6} ms  exec {:>8.4} ms  total {:>8.4} ms",
                o.p,
                o.config,
                o.transition * 1e3,
                o.exec * 1e3,
                o.total * 1e3
            ));
            rep.records.push(json!({
                "kind": "outcome", "config": o.config, "p": o.p, "transition_s": o.transition,
                "exec_s": o.exec, "total_s": o.total,
            }));
            rows.push(vec![o.config.clone(), o.p.to_string(), format!("{:e}", o.transition), format!("{:e}", o.total)]);
        }
        rep.line(format!("  expected total {:.4} ms", b.expected_total * 1e3));
        rep.records.push(json!({"kind": "expected", "total_s": b.expected_total}));
        rep.tsv("branching.tsv", &["config", "p", "transition_s", "total_s"], rows);
    }
    Ok(rep)
}

fn resolve_design(
    name: &str,
    plan_dir: Option<&Path>,
    arch: &FabricArch,
    seed: u64,
) -> Result<(Netlist, FabricImage), CliError> {
    let netlist = match plan_dir.map(|d| d.join(name)).filter(|p| p.is_file()) {
        Some(p) => Netlist::parse(&read(&p)?).map_err(CadError::from)?,
        None => load_netlist(name)?,
    };
    let design = run_flow(&netlist, arch, seed)?;
    Ok((netlist, design.image()))
}

pub fn cmd_cosim(args: &CosimArgs, seed: u64) -> Result<Report, CliError> {
    if args.cb_experiment {
        return cosim_cb(args);
    }
    let latency = quantity(&args.switch_latency, Dimension::Time, "switch latency")?;
    let rate = quantity(&args.rate, Dimension::BitRate, "rate")?;
    let period = quantity(&args.period, Dimension::Time, "period")?;
    if !(period > 0.0) {
        return Err(CliError::Usage("period must be positive".into()));
    }
    let arch = load_arch(&args.arch)?;
    let plan_path = Path::new(&args.plan);
    let plan_dir = plan_path.is_file().then(|| plan_path.parent().unwrap_or(Path::new("."))).map(Path::to_path_buf);
    let plan_text = file_or_named(&args.plan, fixtures::plan_text, "plan")?;
    let steps = parse_plan(&plan_text).map_err(|e| CliError::Parse(format!("{}: {e}", args.plan)))?;

    let (initial, image) = resolve_design(&args.netlist, None, &arch, seed)?;
    let width = initial.inputs.len();
    let mut plan = Vec::new();
    let mut names = Vec::new();
    for (time, step) in &steps {
        let action = match step {
            PlanStep::Load { ctx, design } => {
                let (n, img) = resolve_design(design, plan_dir.as_deref(), &arch, seed)?;
                if n.inputs.len() != width {
                    return Err(CliError::Usage(format!(
                        "`{design}` has {} inputs, `{}` has {width}",
                        n.inputs.len(),
                        initial.name
                    )));
                }
                names.push(n.name.clone());
                PlanAction::Load { ctx: *ctx, image: img }
            }
            PlanStep::Switch { ctx } => PlanAction::Switch { ctx: *ctx },
        };
        plan.push(PlanEvent { time: *time, action });
    }

    let base = stimulus(width, seed);
    let last = steps.last().map_or(0.0, |(t, _)| *t);
    let cycles = args
        .cycles
        .unwrap_or_else(|| (last / period).ceil() as usize + 2 * base.len().max(1));
    let vectors: Vec<Vec<bool>> = base.iter().cycle().take(cycles).cloned().collect();
    let r = co_simulate::<FabricDevice>(ContextId::One, &image, &vectors, period, &plan, rate, latency)?;
    let ok = r.equivalent();

    let mut rep = Report::default();
    rep.line(format!(
        "cosim {} on {}x{} fabric, {} steps of {:e} s, {} plan requests",
        initial.name,
        arch.width,
        arch.height,
        vectors.len(),
        period,
        steps.len()
    ));
    rep.text.push_str(&r.trace.to_string());
    for e in &r.trace.events {
        if e.kind != ctxfpga::context::EventKind::Eval {
            rep.records.push(json!({
                "kind": "event", "time_s": e.time, "event": e.kind.as_str(), "ctx": e.ctx.number(), "digest": e.digest,
            }));
        }
    }
    let verdict = if ok { "PASS" } else { "FAIL" };
    match r.first_mismatch() {
        Some(i) => rep.line(format!("verdict {verdict}: first mismatch at step {i}")),
        None => rep.line(format!("verdict {verdict}")),
    }
    rep.records.push(json!({"kind": "verdict", "steps": vectors.len(), "verdict": verdict}));
    rep.failed |= !ok;

    let trace_rows = |outs: &[Vec<bool>]| -> Vec<Vec<String>> {
        r.times
            .iter()
            .zip(&vectors)
            .zip(outs)
            .map(|((t, v), o)| vec![format!("{t:e}"), bits_str(v), bits_str(o)])
            .collect()
    };
    let with = trace_rows(&r.with_load);
    let without = trace_rows(&r.without_load);
    rep.tsv("cosim_with_load.tsv", &["time_s", "inputs", "outputs"], with);
    rep.tsv("cosim_without_load.tsv", &["time_s", "inputs", "outputs"], without);
    rep.files.push(OutFile {
        name: "cosim_events.tsv".into(),
        data: r.trace.to_string().into_bytes(),
    });
    Ok(rep)
}

fn cosim_cb(args: &CosimArgs) -> Result<Report, CliError> {
    let cycles = args.cycles.unwrap_or(3);
    let (out, trace) = cb_experiment(args.on1, args.on2, cycles)?;
    let mut rep = Report::default();
    rep.line(format!("switch replication: branch 1 {}, branch 2 {}", on_off(args.on1), on_off(args.on2)));
    let mut rows = Vec::new();
    for (i, c) in out.iter().enumerate() {
        let level = match c.output {
            ctxfpga::primitives::Transmit::Pass(b) => if b { "pass (1)" } else { "pass (0)" },
            ctxfpga::primitives::Transmit::Blocked => "blocked",
        };
        rep.line(format!("cycle {i}: context {} -> {level}", c.active));
        rep.records.push(json!({"kind": "cb_cycle", "cycle": i, "ctx": c.active.number(), "output": level, "level": c.output.level()}));
        rows.push(vec![i.to_string(), c.active.to_string(), u8::from(c.output.level()).to_string()]);
    }
    rep.text.push_str(&trace.to_string());
    rep.tsv("cb_experiment.tsv", &["cycle", "ctx", "level"], rows);
    Ok(rep)
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}
