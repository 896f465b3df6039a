use proptest::prelude::*;
use symwrap::tools::{ArgValue, ToolCall, ToolDurations};
use symwrap::world::{
    apply_effect, bundled_scene, spawn_random, spawn_scene, Camera, Motion, MotionStep, WorldPoint, WorldState,
};

fn base(kind: u8, seed: u64) -> WorldState {
    match kind % 7 {
        k @ 0..=4 => spawn_scene(&bundled_scene(&format!("scene_{}", k + 1)).unwrap()).unwrap(),
        _ => spawn_random(seed, 3 + (seed % 6) as usize),
    }
}

fn call(w: &WorldState, tool: u8, pick: usize, n: f64) -> ToolCall {
    let mut names: Vec<String> = w.objects.keys().cloned().collect();
    names.push("ghost".into());
    let name = names[pick % names.len()].clone();
    let text = |k: &str, v: &str| ToolCall::new(&tool_name(tool), [(k, ArgValue::from(v))]);
    match tool % 10 {
        0 => text("object", &name),
        1 | 2 => text("object", &name),
        3 => text("target", if pick % 3 == 0 { "table" } else { &name }),
        4 => text("container", &name),
        5 => text("location", ["home", "bin", "table", "scanning-position", "moon"][pick % 5]),
        6..=8 => ToolCall::bare(&tool_name(tool)),
        _ => ToolCall::new("wait", [("seconds", ArgValue::from(n))]),
    }
}

fn tool_name(tool: u8) -> String {
    ["detect", "pick", "pick", "place_on", "place_in", "move_to", "home", "open_gripper", "close_gripper", "wait"]
        [tool as usize % 10]
        .to_string()
}

fn supports(w: &WorldState, name: &str) -> usize {
    w.abstraction()
        .iter()
        .filter(|a| matches!(a.predicate.as_str(), "on" | "on-table" | "in" | "holding") && a.args[0] == name)
        .count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn random_tool_sequences_keep_the_world_consistent(
        kind in any::<u8>(),
        seed in any::<u64>(),
        calls in prop::collection::vec((any::<u8>(), any::<usize>(), -1.0f64..3.0), 1..40),
    ) {
        let mut w = base(kind, seed);
        for (tool, pick, n) in calls {
            let c = call(&w, tool, pick, n);
            let before = w.clone();
            match apply_effect(&mut w, &c) {
                Err(_) => prop_assert_eq!(&w, &before, "rejected {} changed the world", c),
                Ok(()) => {
                    prop_assert!(w.check_invariants().is_ok(), "{}: {:?}", c, w.check_invariants());
                    if matches!(c.tool.as_str(), "detect" | "wait") {
                        prop_assert_eq!(w.revision, before.revision);
                    }
                    for (name, _) in w.objects.iter().filter(|(_, o)| !o.is_container()) {
                        prop_assert_eq!(supports(&w, name), 1, "{} after {}", name, c);
                    }
                }
            }
        }
    }

    #[test]
    fn motions_end_where_effects_do_and_halts_are_atomic(
        kind in any::<u8>(),
        seed in any::<u64>(),
        calls in prop::collection::vec((any::<u8>(), any::<usize>(), 0.0f64..1.0, 0.0f64..1.0), 1..15),
    ) {
        let durations = ToolDurations::default();
        let mut w = base(kind, seed);
        for (tool, pick, n, frac) in calls {
            let c = call(&w, tool, pick, n);
            let Ok(m) = Motion::begin(&w, &c, &durations) else { continue };
            let mut expected = w.clone();
            apply_effect(&mut expected, &c).unwrap();

            // a halted copy keeps its symbolic state
            let mut halted = w.clone();
            let mut hm = Motion::begin(&halted, &c, &durations).unwrap();
            let stop_after = (frac * m.total_ticks() as f64) as u64;
            let mut done = false;
            for _ in 0..stop_after {
                if hm.step(&mut halted).unwrap() == MotionStep::Completed {
                    done = true;
                    break;
                }
            }
            if !done && m.total_ticks() > 0 {
                hm.halt(&mut halted);
                prop_assert_eq!(halted.abstraction(), w.abstraction());
                prop_assert!(halted.check_invariants().is_ok());
            }

            let mut m = m;
            let start = w.tick;
            while m.step(&mut w).unwrap() != MotionStep::Completed {}
            prop_assert_eq!(w.tick - start, m.total_ticks());
            prop_assert_eq!(w.physical_hash(), expected.physical_hash());
        }
    }

    #[test]
    fn camera_inverts_projection(x in -0.3f64..0.3, y in 0.2f64..0.6, z in 0.0f64..0.3) {
        let cam = Camera::default();
        let p = WorldPoint::new(x, y, z);
        match cam.observe(p) {
            Ok(px) => prop_assert!(cam.recover(px).unwrap().distance(p) < 1e-9),
            // off-image only when the point is outside the view frustum
            Err(_) => prop_assert!(x.abs() / (0.8 - z) > 320.0 / 600.0 - 1e-9 || (y - 0.4).abs() / (0.8 - z) > 240.0 / 600.0 - 1e-9),
        }
    }
}
