use crate::tools::{validate_call, ArgValue, Rejection, ToolCall, ToolDurations};

use super::state::{named_location, ArmLocation, Support, WorldState};

fn lerp(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    std::array::from_fn(|i| a[i] + (b[i] - a[i]) * t)
}

/// Where the arm ends up when `call` completes, if the tool moves the arm.
fn arm_target(w: &WorldState, call: &ToolCall) -> Option<[f64; 3]> {
    let obj = |k: &str| call.text_arg(k).and_then(|n| w.object(n)).map(|o| o.position);
    match call.tool.as_str() {
        "pick" => obj("object"),
        "place_on" => match call.text_arg("target") {
            Some("table") => {
                let held = w.robot.held.as_deref()?;
                let he = w.objects[held].half_extents;
                w.free_table_spot(he, held).map(|[x, y]| [x, y, he[2]])
            }
            _ => obj("target"),
        },
        "place_in" => obj("container"),
        "move_to" => match call.args.get("location")? {
            ArgValue::Text(n) => named_location(n),
            ArgValue::Pose(p) => Some(*p),
            ArgValue::Number(_) => None,
        },
        "home" => named_location("home"),
        _ => None,
    }
}

/// Validates `call` against `w` and applies its effect at once.
///
/// This is the effect table shared by execution and dry runs. Detect and
/// wait leave the world untouched; every other tool bumps the revision.
pub fn apply_effect(w: &mut WorldState, call: &ToolCall) -> Result<(), Rejection> {
    validate_call(call, w)?;
    let held = w.robot.held.clone();
    match call.tool.as_str() {
        "pick" => {
            let x = call.text_arg("object").unwrap().to_string();
            let pos = w.objects[&x].position;
            w.objects.get_mut(&x).unwrap().support = Support::Held;
            w.robot.held = Some(x);
            w.robot.gripper_open = false;
            w.robot.arm = ArmLocation::Pose(pos);
        }
        "place_on" | "place_in" => {
            let x = held.expect("validated: gripper holds an object");
            let support = match (call.tool.as_str(), call.text_arg("target")) {
                ("place_in", _) => Support::In(call.text_arg("container").unwrap().into()),
                (_, Some("table")) => {
                    let he = w.objects[&x].half_extents;
                    let [sx, sy] = w.free_table_spot(he, &x).expect("validated: table has room");
                    w.objects.get_mut(&x).unwrap().position = [sx, sy, he[2]];
                    Support::Table
                }
                (_, Some(t)) => Support::On(t.into()),
                _ => unreachable!("schema checked"),
            };
            w.objects.get_mut(&x).unwrap().support = support;
            w.robot.held = None;
            w.robot.gripper_open = true;
            w.settle();
            w.robot.arm = ArmLocation::Pose(w.objects[&x].position);
        }
        "move_to" => {
            w.robot.arm = match &call.args["location"] {
                ArgValue::Text(n) => ArmLocation::Named(n.clone()),
                ArgValue::Pose(p) => ArmLocation::Pose(*p),
                ArgValue::Number(_) => unreachable!("schema checked"),
            };
        }
        "home" => w.robot.arm = ArmLocation::Named("home".into()),
        "open_gripper" => w.robot.gripper_open = true,
        "close_gripper" => w.robot.gripper_open = false,
        _ => return Ok(()),
    }
    w.settle();
    w.touch();
    debug_assert!(w.check_invariants().is_ok(), "{:?}", w.check_invariants());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionStep {
    Running { elapsed: u64, total: u64 },
    Completed,
}

/// An in-flight tool execution. Each [`Motion::step`] is one tick and each
/// tick boundary is a preemption point; the symbolic effect lands only when
/// the last tick completes.
#[derive(Debug, Clone)]
pub struct Motion {
    call: ToolCall,
    total: u64,
    elapsed: u64,
    start: [f64; 3],
    target: Option<[f64; 3]>,
}

impl Motion {
    pub fn begin(w: &WorldState, call: &ToolCall, durations: &ToolDurations) -> Result<Self, Rejection> {
        validate_call(call, w)?;
        Ok(Self {
            call: call.clone(),
            total: durations.ticks(call, w.tick_ms),
            elapsed: 0,
            start: w.robot.arm.position(),
            target: arm_target(w, call),
        })
    }

    pub fn call(&self) -> &ToolCall {
        &self.call
    }

    pub fn total_ticks(&self) -> u64 {
        self.total
    }

    pub fn elapsed_ticks(&self) -> u64 {
        self.elapsed
    }

    /// Advances one tick, or applies the effect once all ticks have run.
    /// Zero-tick calls complete on the first step without advancing time.
    pub fn step(&mut self, w: &mut WorldState) -> Result<MotionStep, Rejection> {
        if self.elapsed < self.total {
            self.elapsed += 1;
            w.tick += 1;
            if self.elapsed < self.total {
                return Ok(MotionStep::Running {
                    elapsed: self.elapsed,
                    total: self.total,
                });
            }
        }
        apply_effect(w, &self.call)?;
        Ok(MotionStep::Completed)
    }

    /// Stops the motion where it is. The arm is left part-way along its
    /// path and no symbolic effect is applied.
    pub fn halt(self, w: &mut WorldState) {
        let Some(target) = self.target else { return };
        if self.elapsed == 0 || self.total == 0 {
            return;
        }
        let t = self.elapsed as f64 / self.total as f64;
        w.robot.arm = ArmLocation::Pose(lerp(self.start, target, t));
        w.settle();
        w.touch();
    }
}

/// Starts executing `call`. Alias of [`Motion::begin`].
pub fn apply_tool(w: &WorldState, call: &ToolCall, durations: &ToolDurations) -> Result<Motion, Rejection> {
    Motion::begin(w, call, durations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{bundled_scene, spawn_scene};

    fn run(m: &mut Motion, w: &mut WorldState) -> u64 {
        let start = w.tick;
        while m.step(w).unwrap() != MotionStep::Completed {}
        w.tick - start
    }

    #[test]
    fn pick_completes_after_thirty_ticks() {
        let mut w = spawn_scene(&bundled_scene("scene_1").unwrap()).unwrap();
        let call = ToolCall::new("pick", [("object", "red_cube")]);
        let mut m = apply_tool(&w, &call, &ToolDurations::default()).unwrap();
        for _ in 0..29 {
            assert!(matches!(m.step(&mut w).unwrap(), MotionStep::Running { .. }));
            assert_eq!(w.robot.held, None);
        }
        assert_eq!(m.step(&mut w).unwrap(), MotionStep::Completed);
        assert_eq!(w.robot.held.as_deref(), Some("red_cube"));
        assert_eq!(w.tick, 30);
    }

    #[test]
    fn preempt_leaves_abstraction() {
        let mut w = spawn_scene(&bundled_scene("scene_1").unwrap()).unwrap();
        let before = w.abstraction();
        let call = ToolCall::new("pick", [("object", "red_cube")]);
        let mut m = apply_tool(&w, &call, &ToolDurations::default()).unwrap();
        for _ in 0..10 {
            m.step(&mut w).unwrap();
        }
        m.halt(&mut w);
        assert_eq!(w.abstraction(), before);
        assert!(matches!(w.robot.arm, ArmLocation::Pose(_)));
    }

    #[test]
    fn wait_zero_is_immediate() {
        let mut w = WorldState::default();
        let call = ToolCall::new("wait", [("seconds", 0.0)]);
        let mut m = apply_tool(&w, &call, &ToolDurations::default()).unwrap();
        assert_eq!(run(&mut m, &mut w), 0);
        assert_eq!(w.revision, 0);
    }

    #[test]
    fn place_on_table_finds_room() {
        let mut w = spawn_scene(&bundled_scene("scene_1").unwrap()).unwrap();
        apply_effect(&mut w, &ToolCall::new("pick", [("object", "red_cube")])).unwrap();
        apply_effect(&mut w, &ToolCall::new("place_on", [("target", "table")])).unwrap();
        let r = &w.objects["red_cube"];
        assert_eq!(r.support, Support::Table);
        assert!(w.is_clear("blue_cube"));
        assert!(w.check_invariants().is_ok());
    }
}
