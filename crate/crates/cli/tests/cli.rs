// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::process::{Command, Output};

use approx::assert_relative_eq;
use ctxfpga_cli::{
    cmd_cosim, cmd_schedule, parse_sweep, stimulus, CosimArgs, ScheduleArgs, EXIT_CONTEXT_IN_USE, EXIT_NOT_READY,
    EXIT_PARSE, EXIT_USAGE, RANDOM_VECTORS,
};
use serde_json::Value;

fn ctxfpga(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctxfpga")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn cost_prints_reductions_and_writes_tsv() {
    let dir = tempfile::tempdir().unwrap();
    let o = ctxfpga(&["cost", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("CB_SWITCH") && text.contains("71.1%"), "{text}");
    let tsv = fs::read_to_string(dir.path().join("cost.tsv")).unwrap();
    assert!(tsv.starts_with("primitive\tarea_pct\tdelay_pct\tpower_pct\n"));
    assert!(tsv.contains("LUT_CELL\t63.0\t"));
}

#[test]
fn records_are_json_lines_with_sorted_keys() {
    let o = ctxfpga(&["cost", "--format", "records", "--candidate", "fefet_1cfg"]);
    assert!(o.status.success());
    for line in stdout(&o).lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }
}

#[test]
fn device_commands() {
    let o = ctxfpga(&["device", "--pulse", "-2V,1us"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("no switch"));
    let o = ctxfpga(&["device", "--pulse", "4V,20ns"]);
    assert!(stdout(&o).lines().any(|l| l == "switch"));

    let dir = tempfile::tempdir().unwrap();
    let bits = dir.path().join("t.bits");
    fs::write(&bits, "10\n01\n").unwrap();
    let o = ctxfpga(&["device", "--program", bits.to_str().unwrap(), "--from", "low"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("row 0: 10\nrow 1: 01\n") && text.contains("disturbs: none"), "{text}");

    assert_eq!(ctxfpga(&["device"]).status.code(), Some(EXIT_USAGE));
    assert_eq!(ctxfpga(&["device", "--sweep", "3:1:1"]).status.code(), Some(EXIT_USAGE));
    fs::write(&bits, "10\n1\n").unwrap();
    assert_eq!(ctxfpga(&["device", "--program", bits.to_str().unwrap()]).status.code(), Some(EXIT_PARSE));
}

#[test]
fn sweep_spec_parses() {
    let v = parse_sweep("1:2:0.5V").unwrap();
    assert_eq!(v.len(), 3);
    assert_relative_eq!(v[2], 2.0);
    assert!(parse_sweep("1:2").is_err());
    assert!(parse_sweep("1:2:0").is_err());
}

#[test]
fn flow_writes_bitstream_and_timing() {
    let dir = tempfile::tempdir().unwrap();
    let o = ctxfpga(&["flow", "--netlist", "mux4", "--arch", "small", "--seed", "3", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("equivalence PASS over 64 vectors"));
    assert!(dir.path().join("mux4.bit").is_file());
    let tsv = fs::read_to_string(dir.path().join("flow_timing.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 4);
}

#[test]
fn flow_reports_parse_and_route_failures() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.blif");
    fs::write(&bad, ".model x\n.inputs a\n.outputs y\n.names a q y\n11 1\n.end\n").unwrap();
    let o = ctxfpga(&["flow", "--netlist", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_PARSE));
    let o = ctxfpga(&["flow", "--netlist", "ripple4", "--arch", "small", "--channel-width", "1"]);
    assert_eq!(o.status.code(), Some(ctxfpga_cli::EXIT_CAD));
    assert!(String::from_utf8_lossy(&o.stderr).contains("route"));
}

#[test]
fn large_designs_use_seeded_random_vectors() {
    let a = stimulus(12, 5);
    assert_eq!(a.len(), RANDOM_VECTORS);
    assert_eq!(a, stimulus(12, 5));
    assert_ne!(a, stimulus(12, 6));
    assert_eq!(stimulus(3, 5).len(), 8);
}

#[test]
fn schedule_reports_saving() {
    let r = cmd_schedule(&ScheduleArgs {
        scenario: "three_tasks".into(),
        modes: vec![],
        amortize_preload: false,
        exclude_first_load: false,
    })
    .unwrap();
    assert!(r.text.contains("25.0%"), "{}", r.text);
    let saving = r.records.iter().find(|v| v["kind"] == "saving").unwrap();
    assert_relative_eq!(saving["saving_pct"].as_f64().unwrap(), 25.0, epsilon = 1e-9);
    assert!(r.files.iter().any(|f| f.name == "schedule_dynamic.tsv"));

    let o = ctxfpga(&["schedule", "--scenario", "branching"]);
    assert!(stdout(&o).contains("expected total"));
    assert_eq!(ctxfpga(&["schedule", "--scenario", "three_tasks", "--modes", "fastest"]).status.code(), Some(EXIT_USAGE));
}

fn cosim_args(plan: &str) -> CosimArgs {
    CosimArgs {
        netlist: "xor2".into(),
        plan: plan.into(),
        arch: "small".into(),
        rate: "3.2 Gb/s".into(),
        period: "100 ns".into(),
        switch_latency: "1 ns".into(),
        cycles: None,
        cb_experiment: false,
        on1: true,
        on2: false,
    }
}

#[test]
fn cosim_passes_and_exports_traces() {
    let r = cmd_cosim(&cosim_args("xor_and"), 1).unwrap();
    assert!(!r.failed);
    assert!(r.text.contains("verdict PASS"));
    let names: Vec<&str> = r.files.iter().map(|f| f.name.as_str()).collect();
    assert_eq!(names, ["cosim_with_load.tsv", "cosim_without_load.tsv", "cosim_events.tsv"]);
    let switches = r.records.iter().filter(|v| v["event"] == "SWITCH").count();
    assert_eq!(switches, 2);
}

#[test]
fn cosim_plan_errors_map_to_exit_codes() {
    let o = ctxfpga(&["cosim", "--plan", "active_plane"]);
    assert_eq!(o.status.code(), Some(EXIT_CONTEXT_IN_USE));

    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("early.plan");
    fs::write(&plan, "0 load 2 and2\n1ns switch 2\n").unwrap();
    let o = ctxfpga(&["cosim", "--plan", plan.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_NOT_READY));

    fs::write(&plan, "5us switch 2\n1us load 2 and2\n").unwrap();
    assert_eq!(ctxfpga(&["cosim", "--plan", plan.to_str().unwrap()]).status.code(), Some(EXIT_PARSE));

    fs::write(&plan, "0 load 2 full_adder\n").unwrap();
    assert_eq!(ctxfpga(&["cosim", "--plan", plan.to_str().unwrap()]).status.code(), Some(EXIT_USAGE));
}

#[test]
fn cosim_resolves_designs_next_to_the_plan() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("or2.blif"), ".model or2\n.inputs a b\n.outputs y\n.names a b y\n1- 1\n-1 1\n.end\n").unwrap();
    let plan = dir.path().join("or.plan");
    fs::write(&plan, "0 load 2 or2.blif\n1us switch 2\n").unwrap();
    let r = cmd_cosim(&cosim_args(plan.to_str().unwrap()), 1).unwrap();
    assert!(!r.failed);
    let with = String::from_utf8(r.files[0].data.clone()).unwrap();
    let last = with.lines().last().unwrap();
    let cols: Vec<&str> = last.split('\t').collect();
    let or = cols[1].contains('1');
    assert_eq!(cols[2], if or { "1" } else { "0" });
}

#[test]
fn cb_experiment_alternates_planes() {
    let o = ctxfpga(&["cosim", "--cb-experiment", "--on1", "true", "--on2", "false"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("cycle 0: context 1 -> pass (1)"));
    assert!(text.contains("cycle 1: context 2 -> blocked"));
    assert!(text.contains("cycle 2: context 1 -> pass (1)"));
}
