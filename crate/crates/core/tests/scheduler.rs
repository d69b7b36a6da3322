// SPDX-License-Identifier: Apache-2.0

use approx::assert_relative_eq;
use ctxfpga::fixtures::scenario_text;
use ctxfpga::scheduler::{
    saving, schedule, schedule_branching, schedule_repeated, time_saving, Mode, Options, Scenario, Task, Workload,
};
use proptest::prelude::*;

/// Tasks with distinct consecutive configurations, times in seconds and
/// bits equal to reconfiguration seconds at 1 b/s.
fn workload(r: &[u64], e: &[f64]) -> Workload {
    let tasks = r.iter().zip(e).enumerate().map(|(i, (&r, &e))| Task::new(format!("c{i}"), e, r)).collect();
    Workload::new(tasks, 1.0)
}

/// Direct evaluation of the overlapped-loading recurrence.
fn recurrence(r: &[u64], e: &[f64]) -> f64 {
    let mut exec_start = r[0] as f64;
    let mut exec_end = exec_start + e[0];
    for i in 1..r.len() {
        let load_end = exec_start + r[i] as f64;
        exec_start = exec_end.max(load_end);
        exec_end = exec_start + e[i];
    }
    exec_end
}

fn times(n: std::ops::Range<usize>) -> impl Strategy<Value = (Vec<u64>, Vec<f64>)> {
    n.prop_flat_map(|n| (prop::collection::vec(1u64..1000, n), prop::collection::vec(0.0f64..1000.0, n)))
}

#[test]
fn three_task_scenario_file() {
    let s = Scenario::parse(scenario_text("three_tasks").unwrap()).unwrap();
    let w = s.workload.unwrap();
    let conv = schedule(&w, Mode::Conventional, &s.options).unwrap();
    let dynm = schedule(&w, Mode::Dynamic, &s.options).unwrap();
    assert_relative_eq!(conv.total, 36e-3, max_relative = 1e-12);
    assert_relative_eq!(dynm.total, 27e-3, max_relative = 1e-12);
    assert_relative_eq!(time_saving(&conv, &dynm).unwrap(), 25.0, max_relative = 1e-9);
}

#[test]
fn pipeline_scenario_finishes_sooner_with_overlap() {
    let s = Scenario::parse(scenario_text("pipeline4").unwrap()).unwrap();
    let w = s.workload.unwrap();
    let conv = schedule(&w, Mode::Conventional, &s.options).unwrap();
    let dynm = schedule(&w, Mode::Dynamic, &s.options).unwrap();
    // Eight unit loads and eight unit runs back to back; overlapped, only
    // the first load is exposed.
    assert_eq!(conv.total, 16.0);
    assert_eq!(dynm.total, 9.0);
}

#[test]
fn preloaded_alternation_approaches_full_saving() {
    let s = Scenario::parse(scenario_text("preload_alternation").unwrap()).unwrap();
    let w = s.workload.clone().unwrap();
    let mut last = f64::NEG_INFINITY;
    for cycles in [1usize, 5, 50, 500] {
        let mut tasks = Vec::new();
        for _ in 0..cycles {
            tasks.extend(w.tasks[..2].iter().cloned());
        }
        let wl = Workload::new(tasks, w.rate);
        let conv = schedule(&wl, Mode::Conventional, &s.options).unwrap();
        let pre = schedule(&wl, Mode::Preloaded2, &s.options).unwrap();
        let pct = time_saving(&conv, &pre).unwrap();
        assert!(pct > last && pct < 100.0, "{cycles}: {pct}");
        last = pct;
    }
    assert!(last > 97.0);
}

#[test]
fn branching_matches_outcome_enumeration() {
    let s = Scenario::parse(scenario_text("branching").unwrap()).unwrap();
    let spec = s.branch.unwrap();
    let b = schedule_branching(&spec).unwrap();
    let stage1 = Task::new(&spec.stage1, spec.stage1_exec, 1);
    let mut expected = 0.0;
    for o in &spec.outcomes {
        let w = Workload::new(vec![stage1.clone(), Task::new(&o.config, o.exec, o.bits)], spec.rate);
        let total = if o.preloaded {
            let opts = Options { switch_time: spec.switch_time, amortize_preload: true, ..Options::default() };
            schedule(&w, Mode::Preloaded2, &opts).unwrap().total
        } else {
            let opts = Options { count_first_load: false, ..Options::default() };
            schedule(&w, Mode::Conventional, &opts).unwrap().total
        };
        expected += o.p * total;
    }
    assert_relative_eq!(b.expected_total, expected, max_relative = 1e-12);
}

proptest! {
    #[test]
    fn dynamic_follows_recurrence((r, e) in times(1..12)) {
        let t = schedule(&workload(&r, &e), Mode::Dynamic, &Options::default()).unwrap();
        prop_assert_eq!(t.total, recurrence(&r, &e));
    }

    #[test]
    fn two_task_dynamic_saving_at_most_half((r, e) in times(2..3)) {
        let w = workload(&r, &e);
        let o = Options::default();
        let pct = time_saving(&schedule(&w, Mode::Conventional, &o).unwrap(), &schedule(&w, Mode::Dynamic, &o).unwrap()).unwrap();
        prop_assert!(pct <= 50.0 + 1e-9);
    }

    #[test]
    fn preloaded_saving_below_full((r, e) in times(2..3), n in 1usize..40) {
        let mut tasks = Vec::new();
        for _ in 0..n {
            tasks.push(Task::new("a", e[0], r[0]));
            tasks.push(Task::new("b", e[1], r[1]));
        }
        let w = Workload::new(tasks, 1.0);
        let o = Options::default();
        let pct = time_saving(&schedule(&w, Mode::Conventional, &o).unwrap(), &schedule(&w, Mode::Preloaded2, &o).unwrap()).unwrap();
        prop_assert!(pct < 100.0);
    }

    #[test]
    fn overlap_never_hurts((r, e) in times(1..12)) {
        let w = workload(&r, &e);
        let o = Options::default();
        let conv = schedule(&w, Mode::Conventional, &o).unwrap().total;
        prop_assert!(schedule(&w, Mode::Dynamic, &o).unwrap().total <= conv);
        let idle = workload(&r, &vec![0.0; r.len()]);
        prop_assert_eq!(
            schedule(&idle, Mode::Dynamic, &o).unwrap().total,
            schedule(&idle, Mode::Conventional, &o).unwrap().total
        );
    }

    #[test]
    fn hidden_loads_cost_nothing((r, e) in times(1..12)) {
        // Stretch every execution to cover the next load.
        let e: Vec<f64> = (0..r.len()).map(|i| e[i] + r.get(i + 1).copied().unwrap_or(0) as f64).collect();
        let t = schedule(&workload(&r, &e), Mode::Dynamic, &Options::default()).unwrap();
        let law = r[0] as f64 + e.iter().sum::<f64>();
        prop_assert!((t.total - law).abs() <= 1e-9 * law.max(1.0));
    }

    #[test]
    fn saving_is_scale_invariant((r, e) in times(2..8), c in 0.01f64..100.0) {
        let o = Options::default();
        let w = workload(&r, &e);
        let base = saving(schedule(&w, Mode::Conventional, &o).unwrap().total, schedule(&w, Mode::Dynamic, &o).unwrap().total).unwrap();
        let scaled = Workload::new(w.tasks.iter().map(|t| Task::new(&t.config, t.exec * c, t.bits)).collect(), 1.0 / c);
        let s = saving(schedule(&scaled, Mode::Conventional, &o).unwrap().total, schedule(&scaled, Mode::Dynamic, &o).unwrap().total).unwrap();
        prop_assert!((base - s).abs() < 1e-6);
    }

    #[test]
    fn repeats_dilute_hidden_savings(r1 in 1u64..100, r2 in 1u64..100, extra in 0.0f64..100.0, e2 in 0.0f64..100.0, n in 1u32..10) {
        let e1 = r2 as f64 + extra;
        let o = Options::default();
        let pct = |rep: u32| {
            let w = Workload::new(vec![Task::new("a", e1, r1).repeated(rep), Task::new("b", e2, r2)], 1.0);
            saving(schedule_repeated(&w, Mode::Conventional, &o).unwrap().total, schedule_repeated(&w, Mode::Dynamic, &o).unwrap().total).unwrap()
        };
        prop_assert!(pct(n) <= pct(1) + 1e-9);
    }

    #[test]
    fn single_repeat_is_plain_schedule((r, e) in times(1..6)) {
        let w = workload(&r, &e);
        for mode in [Mode::Conventional, Mode::Dynamic] {
            prop_assert_eq!(schedule_repeated(&w, mode, &Options::default()).unwrap(), schedule(&w, mode, &Options::default()).unwrap());
        }
    }
}
