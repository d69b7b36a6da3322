// SPDX-License-Identifier: Apache-2.0

use ctxfpga::context::{
    cb_experiment, co_simulate, parse_plan, ContextError, ContextStore, EventKind, LoadState, PlanAction, PlanEvent,
    PlanStep, SwitchImage,
};
use ctxfpga::fabric::{exhaustive_vectors, run_flow, FabricDevice, FabricImage};
use ctxfpga::fixtures::{netlist, plan_text, small_arch};
use ctxfpga::primitives::{ContextId, Transmit};
use proptest::prelude::*;

fn image(name: &str) -> FabricImage {
    run_flow(&netlist(name), &small_arch(), 1).unwrap().image()
}

fn plan_events(name: &str) -> Vec<PlanEvent<FabricImage>> {
    parse_plan(plan_text(name).unwrap())
        .unwrap()
        .into_iter()
        .map(|(time, step)| PlanEvent {
            time,
            action: match step {
                PlanStep::Load { ctx, design } => PlanAction::Load { ctx, image: image(&design) },
                PlanStep::Switch { ctx } => PlanAction::Switch { ctx },
            },
        })
        .collect()
}

#[test]
fn xor_and_fabric_cosim_is_equivalent() {
    let plan = plan_events("xor_and");
    let vectors: Vec<Vec<bool>> = exhaustive_vectors(2).into_iter().cycle().take(80).collect();
    let r = co_simulate::<FabricDevice>(ContextId::One, &image("xor2"), &vectors, 100e-9, &plan, 3.2e9, 1e-9).unwrap();
    assert!(r.equivalent(), "first mismatch at {:?}", r.first_mismatch());
    // xor before the first switch, and between the switches, xor again after.
    for (i, (v, out)) in vectors.iter().zip(&r.with_load).enumerate() {
        let t = r.times[i];
        let expect = if (2e-6..5e-6).contains(&t) { v[0] && v[1] } else { v[0] ^ v[1] };
        assert_eq!(out[0], expect, "step {i} at {t}");
    }
    let lines = r.trace.lines();
    assert!(lines.iter().any(|l| l.contains("LOAD_END\t2")));
    assert_eq!(r.trace.of_kind(EventKind::Switch).count(), 2);
}

#[test]
fn loading_the_active_plane_is_rejected() {
    let plan = plan_events("active_plane");
    let err = co_simulate::<FabricDevice>(ContextId::One, &image("xor2"), &[vec![false, false]], 1e-6, &plan, 3.2e9, 1e-9)
        .unwrap_err();
    assert_eq!(err, ContextError::ContextInUse(ContextId::One));
}

#[test]
fn early_switch_is_not_ready() {
    let plan = vec![
        PlanEvent { time: 0.0, action: PlanAction::Load { ctx: ContextId::Two, image: image("and2") } },
        PlanEvent { time: 1e-9, action: PlanAction::Switch { ctx: ContextId::Two } },
    ];
    let err = co_simulate::<FabricDevice>(ContextId::One, &image("xor2"), &vec![vec![true, true]; 2], 1e-6, &plan, 3.2e9, 1e-9)
        .unwrap_err();
    assert!(matches!(err, ContextError::NotReady { ctx: ContextId::Two, ready_at: Some(_) }));
}

#[test]
fn switch_replication_alternates_for_every_branch_pair() {
    for on1 in [false, true] {
        for on2 in [false, true] {
            let (cycles, _) = cb_experiment(on1, on2, 3).unwrap();
            let level = |on: bool| if on { Transmit::Pass(true) } else { Transmit::Blocked };
            let got: Vec<_> = cycles.iter().map(|c| (c.active, c.output)).collect();
            assert_eq!(
                got,
                [(ContextId::One, level(on1)), (ContextId::Two, level(on2)), (ContextId::One, level(on1))]
            );
        }
    }
}

#[derive(Debug, Clone)]
enum Req {
    Load(ContextId, bool),
    Switch(ContextId),
    Eval,
}

fn req() -> impl Strategy<Value = (u8, Req)> {
    let ctx = prop_oneof![Just(ContextId::One), Just(ContextId::Two)];
    (
        0u8..4,
        prop_oneof![
            (ctx.clone(), any::<bool>()).prop_map(|(c, b)| Req::Load(c, b)),
            ctx.prop_map(Req::Switch),
            Just(Req::Eval),
        ],
    )
}

proptest! {
    #[test]
    fn store_invariants_hold(reqs in prop::collection::vec(req(), 1..40)) {
        let mut s = ContextStore::with_initial(ContextId::One, SwitchImage(true));
        let mut t = 0.0;
        for (dt, r) in reqs {
            t = (t + dt as f64).max(s.now());
            let res = match r {
                Req::Load(c, b) => s.begin_load(c, SwitchImage(b), t, 1.0).map(|_| ()),
                Req::Switch(c) => s.switch_context(c, t).map(|_| ()),
                Req::Eval => s.eval(t).map(|_| ()),
            };
            if let Err(e) = res {
                prop_assert!(matches!(e, ContextError::ContextInUse(_) | ContextError::NotReady { .. } | ContextError::Busy(_)), "{}", e);
            }
            let loading = matches!(s.state(s.active()), LoadState::Loading { .. });
            prop_assert!(!loading);
        }
        let ev = &s.trace().events;
        prop_assert!(ev.windows(2).all(|w| w[0].time <= w[1].time));
        for (i, e) in ev.iter().enumerate() {
            if e.kind == EventKind::Switch {
                let loaded = ev[..i].iter().any(|p| p.kind == EventKind::LoadEnd && p.ctx == e.ctx);
                prop_assert!(loaded || e.ctx == ContextId::One);
            }
        }
    }
}
