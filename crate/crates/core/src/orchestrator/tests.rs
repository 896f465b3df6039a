use super::*;
use crate::gate::GateEvent;
use crate::pddl::Atom;
use crate::tools::CallStatus;
use crate::translator::{TranslationErrorKind, TranslatorKind};
use crate::world::{bundled_scene, spawn_scene, Support, WorldState};

fn scene(name: &str) -> WorldState {
    spawn_scene(&bundled_scene(name).unwrap()).unwrap()
}

fn session(mode: Mode, scene_name: &str) -> Session {
    Session::new("t", SessionConfig::new(mode, TranslatorKind::Template), scene(scene_name))
}

const T01: &str = "Pick up the red cube and place it on the table";

fn kinds(s: &Session) -> Vec<&str> {
    s.timeline()
        .iter()
        .map(|e| match &e.kind {
            EventKind::PhaseChange { .. } => "phase",
            EventKind::Approval { .. } => "approval",
            EventKind::ToolStatus { .. } => "tool",
            EventKind::StopLatencySample { .. } => "latency",
            EventKind::StaleState { .. } => "stale",
            _ => "other",
        })
        .collect()
}

#[test]
fn pddl_run_reaches_the_goal() {
    let mut s = session(Mode::NeuroSymbolic, "scene_1");
    s.submit(T01).unwrap();
    assert_eq!(*s.phase(), Phase::AwaitingApproval);
    let plan = s.artifacts().plan_text.clone().unwrap();
    assert_eq!(plan, "(unstack red_cube blue_cube)\n(put-down red_cube)\n");
    assert_eq!(s.artifacts().calls.len(), 3);
    s.approve().unwrap();
    s.run_to_end();
    assert_eq!(*s.phase(), Phase::Completed);
    assert!(s.world().abstraction().contains(&Atom::new("on-table", ["red_cube"])));
    assert_eq!(s.artifacts().predicted.as_ref(), Some(&s.world().abstraction()));
    assert!(s.artifacts().calls.iter().all(|c| c.status == CallStatus::Succeeded));
    assert_eq!(s.metrics().step_durations_ms, vec![500.0, 1500.0, 1500.0]);
    assert!(s.metrics().world_mutations >= 2);
}

#[test]
fn direct_run_reaches_the_same_world() {
    let mut d = session(Mode::Direct, "scene_1");
    d.submit(T01).unwrap();
    d.approve().unwrap();
    d.run_to_end();
    assert_eq!(*d.phase(), Phase::Completed);
    let mut p = session(Mode::NeuroSymbolic, "scene_1");
    p.submit(T01).unwrap();
    p.approve().unwrap();
    p.run_to_end();
    assert_eq!(d.world().abstraction(), p.world().abstraction());
}

#[test]
fn nothing_moves_before_approval() {
    let mut s = session(Mode::NeuroSymbolic, "scene_1");
    let before = s.world().clone();
    s.submit(T01).unwrap();
    for _ in 0..100 {
        assert!(!s.tick());
    }
    assert_eq!(s.world(), &before);
    let first_tool = kinds(&s).iter().position(|k| *k == "tool");
    assert_eq!(first_tool, None);
    s.approve().unwrap();
    s.tick();
    let k = kinds(&s);
    let approval = k.iter().position(|k| *k == "approval").unwrap();
    let tool = k.iter().position(|k| *k == "tool").unwrap();
    assert!(approval < tool);
}

#[test]
fn approve_is_refused_outside_review() {
    let mut s = session(Mode::NeuroSymbolic, "scene_1");
    assert!(matches!(s.approve(), Err(SessionError::WrongPhase { .. })));
    s.submit(T01).unwrap();
    s.approve().unwrap();
    assert!(matches!(s.approve(), Err(SessionError::WrongPhase { .. })));
    assert!(matches!(s.submit(T01), Err(SessionError::WrongPhase { .. })));
}

#[test]
fn stale_world_forces_a_new_plan() {
    let mut s = session(Mode::NeuroSymbolic, "scene_1");
    s.submit(T01).unwrap();
    let planned = s.artifacts().plan.clone().unwrap();
    // someone sets the red cube on the table by hand
    s.mutate_world(|w| {
        let he = w.objects["red_cube"].half_extents;
        let [x, y] = w.free_table_spot(he, "red_cube").unwrap();
        let o = w.objects.get_mut("red_cube").unwrap();
        o.support = Support::Table;
        o.position = [x, y, he[2]];
    });
    assert_eq!(s.approve(), Err(SessionError::Stale));
    assert!(kinds(&s).contains(&"stale"));
    assert_eq!(*s.phase(), Phase::AwaitingApproval);
    assert_ne!(s.artifacts().plan.as_ref(), Some(&planned));
    assert!(s.artifacts().plan.as_ref().unwrap().is_empty());
    s.approve().unwrap();
    s.run_to_end();
    assert_eq!(*s.phase(), Phase::Completed);
}

#[test]
fn swapped_steps_block_approval_until_fixed() {
    let mut s = session(Mode::NeuroSymbolic, "scene_1");
    s.submit(T01).unwrap();
    s.revise(Revision::Swap { i: 0, j: 1 }).unwrap();
    assert_eq!(*s.phase(), Phase::AwaitingApproval);
    match s.artifacts().check.clone().unwrap() {
        PlanCheck::Invalid { step, reason } => {
            assert_eq!(step, 0);
            assert!(reason.contains("holding red_cube"), "{reason}");
        }
        PlanCheck::Valid => panic!("swap should break the plan"),
    }
    assert!(matches!(s.approve(), Err(SessionError::PlanInvalid { .. })));
    assert!(s.artifacts().calls.is_empty());
    s.revise(Revision::Swap { i: 0, j: 1 }).unwrap();
    assert_eq!(s.artifacts().check, Some(PlanCheck::Valid));
    s.approve().unwrap();
}

#[test]
fn direct_swap_is_caught_by_dry_run() {
    let mut s = session(Mode::Direct, "scene_1");
    s.submit(T01).unwrap();
    let n = s.artifacts().subtasks.as_ref().unwrap().len();
    s.revise(Revision::Swap { i: 1, j: 2 }).unwrap();
    assert!(matches!(s.artifacts().check, Some(PlanCheck::Invalid { .. })));
    assert!(matches!(
        s.revise(Revision::Delete { i: n }),
        Err(SessionError::IndexOutOfRange { .. })
    ));
}

#[test]
fn delete_and_goal_edits_revalidate() {
    let mut s = session(Mode::NeuroSymbolic, "scene_1");
    s.submit(T01).unwrap();
    s.revise(Revision::Delete { i: 1 }).unwrap();
    assert!(matches!(s.artifacts().check, Some(PlanCheck::Invalid { step: 1, .. })));
    s.revise(Revision::EditGoal {
        goal: "(in red_cube bin)".into(),
    })
    .unwrap();
    assert_eq!(s.artifacts().check, Some(PlanCheck::Valid));
    assert_eq!(s.artifacts().plan.as_ref().unwrap().len(), 2);
    assert!(matches!(
        s.revise(Revision::EditGoal { goal: "(floating red_cube)".into() }),
        Err(SessionError::InvalidGoal { .. })
    ));
    s.revise(Revision::ReplaceInstruction {
        text: "Grab the green cylinder and put it in the bin".into(),
    })
    .unwrap();
    assert_eq!(s.instruction(), Some("Grab the green cylinder and put it in the bin"));
    s.approve().unwrap();
    s.run_to_end();
    assert!(s.world().abstraction().contains(&Atom::new("in", ["green_cylinder", "bin"])));
}

#[test]
fn stop_halts_at_the_next_boundary() {
    let mut s = session(Mode::NeuroSymbolic, "scene_1");
    s.submit(T01).unwrap();
    s.approve().unwrap();
    for _ in 0..15 {
        s.tick();
    }
    // detect (10 ticks) done, pick of red_cube in flight
    let before = s.world().abstraction();
    let at = s.now_ms() + 80.0;
    s.request_stop(StopTime::Virtual(at));
    assert!(s.phase().is_executing());
    s.tick();
    assert!(s.phase().is_executing());
    s.tick();
    assert!(matches!(s.phase(), Phase::Stopped { .. }));
    assert_eq!(s.metrics().stop_latencies_ms, vec![20.0]);
    assert_eq!(s.world().abstraction(), before);
    assert_eq!(s.artifacts().history.len(), 1);
    assert_eq!(s.artifacts().history[0].status, CallStatus::Preempted);
    assert_eq!(s.artifacts().calls[1].attempt, 1);
    for _ in 0..10 {
        assert!(!s.tick());
    }
    s.resume();
    s.run_to_end();
    assert_eq!(*s.phase(), Phase::Completed);
}

#[test]
fn stop_during_the_last_tick_is_still_honored() {
    let mut s = session(Mode::NeuroSymbolic, "scene_1");
    s.submit(T01).unwrap();
    s.approve().unwrap();
    for _ in 0..(10 + 30 + 29) {
        assert!(s.tick());
    }
    s.request_stop(StopTime::Virtual(s.now_ms() + 10.0));
    assert!(!s.tick());
    assert!(matches!(s.phase(), Phase::Stopped { .. }));
    assert!(s.artifacts().history.is_empty());
    assert_eq!(s.metrics().stop_latencies_ms, vec![40.0]);
    s.resume();
    assert!(!s.tick());
    assert_eq!(*s.phase(), Phase::Completed);
}

#[test]
fn stop_at_a_boundary_has_zero_latency() {
    let mut s = session(Mode::NeuroSymbolic, "scene_1");
    s.submit(T01).unwrap();
    s.approve().unwrap();
    s.tick();
    s.stop_now();
    assert!(matches!(s.phase(), Phase::Stopped { .. }));
    assert_eq!(s.metrics().stop_latencies_ms, vec![0.0]);
}

#[test]
fn stop_and_resume_outside_execution_are_logged_no_ops() {
    let mut s = session(Mode::NeuroSymbolic, "scene_1");
    s.stop_now();
    s.resume();
    assert_eq!(*s.phase(), Phase::Idle);
    let t = s.timeline();
    assert!(matches!(t[0].kind, EventKind::StopIgnored { .. }));
    assert!(matches!(t[1].kind, EventKind::ResumeIgnored { .. }));
}

#[test]
fn button_and_voice_share_the_stop_channel() {
    let mut s = session(Mode::NeuroSymbolic, "scene_1");
    s.submit(T01).unwrap();
    s.approve().unwrap();
    s.tick();
    s.stop_now();
    assert!(matches!(s.phase(), Phase::Stopped { .. }));
    assert_eq!(s.transcript("put it back, execute"), GateEvent::Ignored);
    assert_eq!(s.transcript("okay"), GateEvent::Resume);
    assert!(s.phase().is_executing());
    assert_eq!(s.transcript("STOP"), GateEvent::EmergencyStop);
    s.resume();
    assert_eq!(s.transcript("Pick up"), GateEvent::Buffered);
    s.run_to_end();
    assert_eq!(*s.phase(), Phase::Completed);
}

#[test]
fn transcript_drives_the_session() {
    let mut s = session(Mode::NeuroSymbolic, "scene_1");
    assert_eq!(s.transcript("Pick up the red cube"), GateEvent::Buffered);
    let e = s.transcript("and place it on the table. Execute.");
    assert!(matches!(e, GateEvent::Forward { .. }));
    assert_eq!(*s.phase(), Phase::AwaitingApproval);
    s.approve().unwrap();
    s.tick();
    assert_eq!(s.transcript("Stop!"), GateEvent::EmergencyStop);
    assert!(matches!(s.phase(), Phase::Stopped { .. }));
    assert_eq!(s.transcript("pick up the cube execute"), GateEvent::Ignored);
    assert_eq!(s.transcript("Okay, go on"), GateEvent::Resume);
    s.run_to_end();
    assert_eq!(*s.phase(), Phase::Completed);
}

#[test]
fn injected_faults_never_reach_the_robot() {
    for (mode, seed) in [(Mode::NeuroSymbolic, 1), (Mode::Direct, 2), (Mode::NeuroSymbolic, 3), (Mode::Direct, 4)] {
        let cfg = SessionConfig::new(mode, TranslatorKind::fault(1.0, seed));
        let mut s = Session::new("f", cfg, scene("scene_1"));
        let before = s.world().clone();
        s.submit(T01).unwrap();
        assert!(s.metrics().injected_fault.is_some());
        assert!(matches!(s.phase(), Phase::Failed { .. }), "{mode}: {:?}", s.phase());
        assert!(!s.tick());
        assert_eq!(s.world(), &before);
    }
}

#[test]
fn untranslatable_instruction_fails_cleanly() {
    let mut s = session(Mode::NeuroSymbolic, "scene_1");
    s.submit("Dance for me").unwrap();
    match &s.artifacts().failure {
        Some(Failure::Translation { error }) => assert_eq!(error.kind, TranslationErrorKind::NoMatch),
        other => panic!("{other:?}"),
    }
    // a new instruction is accepted after failure
    s.submit(T01).unwrap();
    assert_eq!(*s.phase(), Phase::AwaitingApproval);
}

#[test]
fn unsolvable_goal_fails_in_planning() {
    let mut s = session(Mode::NeuroSymbolic, "scene_1");
    s.submit("Pick up the red cube and stack it on the red cube").unwrap();
    assert_eq!(s.artifacts().failure, Some(Failure::Unsolvable));
}

#[test]
fn auto_approve_is_marked_synthetic() {
    let mut cfg = SessionConfig::new(Mode::NeuroSymbolic, TranslatorKind::Template);
    cfg.auto_approve = true;
    let mut s = Session::new("a", cfg, scene("scene_1"));
    s.submit(T01).unwrap();
    assert!(s.phase().is_executing());
    assert!(s
        .timeline()
        .iter()
        .any(|e| e.kind == EventKind::Approval { synthetic: true }));
}

#[test]
fn identical_runs_log_identically() {
    let run = || {
        let mut s = session(Mode::NeuroSymbolic, "scene_4");
        s.submit("Grab the green cylinder and put it in the bin").unwrap();
        s.approve().unwrap();
        s.run_to_end();
        (s.stable_log(), s.world().physical_hash())
    };
    assert_eq!(run(), run());
}

#[test]
fn events_round_trip_through_json() {
    let mut s = session(Mode::Direct, "scene_2");
    s.submit("Pick up the cup and place it inside the container").unwrap();
    s.approve().unwrap();
    s.run_to_end();
    for line in s.events_jsonl().lines() {
        let e: Event = serde_json::from_str(line).unwrap();
        assert_eq!(serde_json::to_string(&e).unwrap(), line);
    }
    assert_eq!(s.timeline().iter().map(|e| e.seq).collect::<Vec<_>>(), (0..s.timeline().len() as u64).collect::<Vec<_>>());
}
