mod common;

use common::checks::audit;
use proptest::prelude::*;
use symwrap::bench::{run_suite, Suite, SuiteConfig, TrialOutcome};
use symwrap::orchestrator::{EventKind, Mode, Revision, Session, SessionConfig, StopTime};
use symwrap::tools::ToolCall;
use symwrap::translator::TranslatorKind;
use symwrap::world::apply_effect;

#[test]
fn injected_faults_never_reach_the_world() {
    let suite = Suite::bundled();
    for rate in [0.2, 0.5, 1.0] {
        let cfg = SuiteConfig::new(vec![Mode::Direct, Mode::NeuroSymbolic], 3, TranslatorKind::fault(rate, 7), 99);
        let report = run_suite(&suite, &cfg).unwrap();
        assert_eq!(report.records.len(), 13 * 3 * 2);
        for r in &report.records {
            if r.injected_fault.is_some() {
                assert_ne!(r.outcome, TrialOutcome::Success, "{r:?}");
                assert_eq!(r.world_mutations, 0, "{r:?}");
                assert!(!r.approved, "{r:?}");
            } else {
                assert_eq!(r.outcome, TrialOutcome::Success, "{r:?}");
            }
            assert!(!r.is_unsafe());
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Submit(usize),
    Approve,
    Revise(Revision),
    Stop(f64),
    Resume,
    Ticks(u8),
    Transcript(&'static str),
    Disturb(usize),
}

const SENTENCES: [&str; 5] = [
    "Pick up the red cube and place it on the table",
    "Grab the green cylinder and put it in the bin",
    "Pick up the yellow object and stack it on the red cube",
    "Pick up the red cube and stack it on the red cube",
    "Dance a jig",
];

fn op() -> impl Strategy<Value = Op> {
    let revision = prop_oneof![
        (0..5usize, 0..5usize).prop_map(|(i, j)| Revision::Swap { i, j }),
        (0..5usize).prop_map(|i| Revision::Delete { i }),
        prop::sample::select(vec!["(and (on-table red_cube))", "(and (in green_cylinder bin))", "(and (on ghost red_cube))", "(and"])
            .prop_map(|g| Revision::EditGoal { goal: g.to_string() }),
        (0..5usize).prop_map(|i| Revision::ReplaceInstruction { text: SENTENCES[i].to_string() }),
    ];
    prop_oneof![
        3 => (0..5usize).prop_map(Op::Submit),
        4 => Just(Op::Approve),
        2 => revision.prop_map(Op::Revise),
        1 => (0.0f64..3000.0).prop_map(Op::Stop),
        1 => Just(Op::Resume),
        4 => any::<u8>().prop_map(Op::Ticks),
        1 => prop::sample::select(vec!["stop", "okay", "put the green cylinder in the bin, execute", "execute"]).prop_map(Op::Transcript),
        1 => any::<usize>().prop_map(Op::Disturb),
    ]
}

fn disturb(s: &mut Session, pick: usize) {
    let names: Vec<String> = s.world().objects.keys().cloned().collect();
    let name = names[pick % names.len()].clone();
    s.mutate_world(|w| {
        let mut moved = w.clone();
        let ok = apply_effect(&mut moved, &ToolCall::new("pick", [("object", name.as_str())])).is_ok()
            && apply_effect(&mut moved, &ToolCall::new("place_on", [("target", "table")])).is_ok();
        if ok {
            w.objects = moved.objects;
        }
    });
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn no_motion_without_current_approval(mode in prop::sample::select(vec![Mode::Direct, Mode::NeuroSymbolic]), ops in prop::collection::vec(op(), 1..25)) {
        let world = Suite::bundled().world(&Suite::bundled().tasks[0]).unwrap();
        let mut s = Session::new("fuzz", SessionConfig::new(mode, TranslatorKind::Template), world);
        for o in ops {
            let before = s.world().revision;
            let events = s.timeline().len();
            match o.clone() {
                Op::Submit(i) => { let _ = s.submit(SENTENCES[i]); }
                Op::Approve => { let _ = s.approve(); }
                Op::Revise(r) => { let _ = s.revise(r); }
                Op::Stop(ms) => s.request_stop(StopTime::Virtual(ms)),
                Op::Resume => s.resume(),
                Op::Ticks(n) => for _ in 0..n { if !s.tick() { break } },
                Op::Transcript(l) => { s.transcript(l); }
                Op::Disturb(i) => disturb(&mut s, i),
            }
            if s.world().revision != before && !matches!(o, Op::Disturb(_)) {
                let moved = s.timeline()[events..].iter().any(|e| matches!(e.kind, EventKind::ToolStatus { .. }));
                prop_assert!(moved, "{:?} changed the world with no tool event", o);
            }
            prop_assert!(s.world().check_invariants().is_ok());
        }
        prop_assert_eq!(audit(&s), Ok(()));
    }
}
