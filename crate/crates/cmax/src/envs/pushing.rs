//! Planar pushing: a gripper moves in the four cardinal directions by a
//! fixed offset and drags a cube whenever the cube is within its contact
//! radius. The true world truncates any motion sweeping into a static
//! obstacle; the planning model has no obstacles.

use crate::core::{euclidean, ActionId, Environment, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const PUSH_RIGHT: usize = 0;
pub const PUSH_LEFT: usize = 1;
pub const PUSH_UP: usize = 2;
pub const PUSH_DOWN: usize = 3;

/// Axis-aligned box obstacle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Box2 {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Box2 {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }

    /// Entry parameter of the segment `from -> to` into the box interior, if
    /// the sweep passes strictly inside. Touching a face or sliding along it
    /// does not count, so a point resting on a face can still move away.
    fn entry(&self, from: [f64; 2], to: [f64; 2]) -> Option<f64> {
        let mut t_enter = 0.0f64;
        let mut t_exit = 1.0f64;
        for axis in 0..2 {
            let delta = to[axis] - from[axis];
            if delta.abs() < 1e-15 {
                if from[axis] <= self.min[axis] || from[axis] >= self.max[axis] {
                    return None;
                }
                continue;
            }
            let mut t0 = (self.min[axis] - from[axis]) / delta;
            let mut t1 = (self.max[axis] - from[axis]) / delta;
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            t_enter = t_enter.max(t0);
            t_exit = t_exit.min(t1);
            if t_enter > t_exit {
                return None;
            }
        }
        if t_exit - t_enter <= 1e-12 {
            return None;
        }
        Some(t_enter.max(0.0))
    }
}

/// State layout: `(gripper_x, gripper_y, object_x, object_y)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanarPushWorld {
    /// Obstacles in the true world only; the model plans without them.
    pub obstacles: Vec<Box2>,
    pub start_gripper: [f64; 2],
    pub start_object: [f64; 2],
    pub goal_center: [f64; 2],
    pub goal_radius: f64,
    /// Fixed translation per action.
    pub step_offset: f64,
    /// Object follows the gripper when within this distance.
    pub contact_radius: f64,
    /// Cube width, used by the hardcoded heuristic's gripper target.
    pub object_width: f64,
    /// Discrepancy threshold; also sets the state-key resolution.
    pub xi: f64,
}

/// Generator knobs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PushParams {
    pub obstacle_count: usize,
    pub with_obstacles: bool,
}

impl PlanarPushWorld {
    pub fn base(with_obstacles: bool) -> PlanarPushWorld {
        PlanarPushWorld {
            obstacles: if with_obstacles {
                vec![Box2 {
                    min: [0.45, 0.35],
                    max: [0.6, 0.55],
                }]
            } else {
                Vec::new()
            },
            start_gripper: [0.1, 0.1],
            start_object: [0.2, 0.2],
            goal_center: [0.8, 0.8],
            goal_radius: 0.05,
            step_offset: 0.02,
            contact_radius: 0.03,
            object_width: 0.04,
            xi: 0.01,
        }
    }

    pub fn generate(params: &PushParams, seed: u64) -> PlanarPushWorld {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut world = Self::base(false);
        world.start_object = [rng.gen_range(0.15..0.4), rng.gen_range(0.2..0.8)];
        world.start_gripper = [
            (world.start_object[0] - 0.06).max(0.02),
            world.start_object[1] + rng.gen_range(-0.012..0.012),
        ];
        world.goal_center = [rng.gen_range(0.7..0.9), rng.gen_range(0.2..0.8)];
        if params.with_obstacles {
            // first obstacle is a wall across the push corridor, so the
            // unmodeled contact actually happens and forces a detour
            let wall_w = rng.gen_range(0.05..0.09);
            let wall_x = (world.start_object[0] + world.goal_center[0]) / 2.0 - wall_w / 2.0
                + rng.gen_range(-0.03..0.03);
            let y_low = world.start_object[1].min(world.goal_center[1]);
            let y_high = world.start_object[1].max(world.goal_center[1]);
            let extend = rng.gen_range(0.1..0.18);
            world.obstacles.push(Box2 {
                min: [wall_x, (y_low - extend).max(0.08)],
                max: [wall_x + wall_w, (y_high + extend).min(0.92)],
            });
            while world.obstacles.len() < params.obstacle_count {
                let w = rng.gen_range(0.06..0.12);
                let h = rng.gen_range(0.06..0.12);
                let x = rng.gen_range(0.2..0.8 - w);
                let y = rng.gen_range(0.05..0.95 - h);
                let candidate = Box2 {
                    min: [x, y],
                    max: [x + w, y + h],
                };
                if Self::clear_of(&candidate, world.start_gripper, 0.05)
                    && Self::clear_of(&candidate, world.start_object, 0.05)
                    && Self::clear_of(&candidate, world.goal_center, world.goal_radius + 0.05)
                {
                    world.obstacles.push(candidate);
                }
            }
        }
        world
    }

    fn clear_of(b: &Box2, p: [f64; 2], margin: f64) -> bool {
        let dx = (b.min[0] - p[0]).max(0.0).max(p[0] - b.max[0]);
        let dy = (b.min[1] - p[1]).max(0.0).max(p[1] - b.max[1]);
        (dx * dx + dy * dy).sqrt() > margin
    }

    fn direction(action: usize) -> [f64; 2] {
        match action {
            PUSH_RIGHT => [1.0, 0.0],
            PUSH_LEFT => [-1.0, 0.0],
            PUSH_UP => [0.0, 1.0],
            _ => [0.0, -1.0],
        }
    }

    /// Translate `from` by `delta`, clamped to the workspace and truncated at
    /// the first obstacle face the sweep crosses.
    fn sweep(&self, from: [f64; 2], delta: [f64; 2], obstacles: &[Box2]) -> [f64; 2] {
        let target = [
            (from[0] + delta[0]).clamp(0.0, 1.0),
            (from[1] + delta[1]).clamp(0.0, 1.0),
        ];
        let mut earliest = 1.0f64;
        for b in obstacles {
            if let Some(t) = b.entry(from, target) {
                earliest = earliest.min(t);
            }
        }
        [
            from[0] + earliest * (target[0] - from[0]),
            from[1] + earliest * (target[1] - from[1]),
        ]
    }

    fn step_with(&self, state: &State, action: ActionId, obstacles: &[Box2]) -> State {
        if self.is_goal(state) {
            return state.clone();
        }
        let gripper = [state.coords[0], state.coords[1]];
        let object = [state.coords[2], state.coords[3]];
        let dir = Self::direction(action.0);
        let delta = [dir[0] * self.step_offset, dir[1] * self.step_offset];
        let new_gripper = self.sweep(gripper, delta, obstacles);
        let applied = [new_gripper[0] - gripper[0], new_gripper[1] - gripper[1]];
        let touching = {
            let dx = new_gripper[0] - object[0];
            let dy = new_gripper[1] - object[1];
            (dx * dx + dy * dy).sqrt() <= self.contact_radius
        };
        let new_object = if touching {
            let pushed = self.sweep(object, applied, obstacles);
            // motion blocked by a face slides tangentially, away from the
            // side the gripper contacts on; a centered push just stops
            let blocked = [
                object[0] + applied[0] - pushed[0],
                object[1] + applied[1] - pushed[1],
            ];
            let remaining = (blocked[0] * blocked[0] + blocked[1] * blocked[1]).sqrt();
            if remaining > 0.0 {
                let side = if applied[1] == 0.0 {
                    [0.0, sign(object[1] - new_gripper[1])]
                } else {
                    [sign(object[0] - new_gripper[0]), 0.0]
                };
                self.sweep(pushed, [side[0] * remaining, side[1] * remaining], obstacles)
            } else {
                pushed
            }
        } else {
            object
        };
        State::new(vec![new_gripper[0], new_gripper[1], new_object[0], new_object[1]])
    }

    fn gripper_of(state: &State) -> [f64; 2] {
        [state.coords[0], state.coords[1]]
    }

    fn object_of(state: &State) -> [f64; 2] {
        [state.coords[2], state.coords[3]]
    }
}

impl Environment for PlanarPushWorld {
    fn dim(&self) -> usize {
        4
    }

    fn num_actions(&self) -> usize {
        4
    }

    fn true_step(&self, state: &State, action: ActionId) -> State {
        self.step_with(state, action, &self.obstacles)
    }

    fn model_step(&self, state: &State, action: ActionId) -> State {
        self.step_with(state, action, &[])
    }

    fn cost(&self, state: &State, _action: ActionId) -> f64 {
        if self.is_goal(state) {
            0.0
        } else {
            1.0
        }
    }

    fn is_goal(&self, state: &State) -> bool {
        let object = Self::object_of(state);
        let dx = object[0] - self.goal_center[0];
        let dy = object[1] - self.goal_center[1];
        (dx * dx + dy * dy).sqrt() <= self.goal_radius
    }

    fn metric(&self, a: &State, b: &State) -> f64 {
        euclidean(a, b)
    }

    fn state_space_size(&self) -> f64 {
        // effective size: cell count of the xi-resolution discretization of
        // the workspace; comfortably above any non-penalized path cost
        (1.0 / self.xi).powi(2)
    }

    fn initial_heuristic(&self, state: &State) -> f64 {
        push_heuristic(state, self)
    }

    fn start_state(&self) -> State {
        State::new(vec![
            self.start_gripper[0],
            self.start_gripper[1],
            self.start_object[0],
            self.start_object[1],
        ])
    }

    fn contains(&self, state: &State) -> bool {
        state.coords.iter().all(|&c| (0.0..=1.0).contains(&c))
    }

    fn key_resolution(&self) -> f64 {
        self.xi / 2.0
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Hardcoded cost-to-go estimate: steps for the gripper to reach a pushing
/// position behind the object plus steps to push the object to the goal,
/// both as Manhattan distances over the per-action offset.
pub fn push_heuristic(state: &State, world: &PlanarPushWorld) -> f64 {
    if world.is_goal(state) {
        return 0.0;
    }
    let gripper = PlanarPushWorld::gripper_of(state);
    let object = PlanarPushWorld::object_of(state);
    let target = world.goal_center;
    let angle = (target[0] - object[0]).atan2(target[1] - object[1]);
    let gripper_target = [
        object[0] - angle.sin() * world.object_width / 2.0,
        object[1] - angle.cos() * world.object_width / 2.0,
    ];
    let reach = (gripper[0] - gripper_target[0]).abs() + (gripper[1] - gripper_target[1]).abs();
    let push = (object[0] - target[0]).abs() + (object[1] - target[1]).abs();
    (reach + push) / world.step_offset
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrepancy::detect_discrepancy;

    fn s(coords: &[f64]) -> State {
        State::new(coords.to_vec())
    }

    #[test]
    fn free_space_motion_moves_only_the_gripper() {
        let world = PlanarPushWorld::base(false);
        let state = s(&[0.3, 0.3, 0.7, 0.7]);
        let next = world.true_step(&state, ActionId(PUSH_RIGHT));
        assert!((next.coords[0] - 0.32).abs() < 1e-12);
        assert_eq!(next.coords[1], 0.3);
        assert_eq!(&next.coords[2..], &[0.7, 0.7]);
    }

    #[test]
    fn contact_drags_the_object() {
        let world = PlanarPushWorld::base(false);
        let state = s(&[0.5, 0.5, 0.53, 0.5]);
        let next = world.true_step(&state, ActionId(PUSH_RIGHT));
        assert!((next.coords[0] - 0.52).abs() < 1e-12);
        assert!((next.coords[2] - 0.55).abs() < 1e-12);
    }

    #[test]
    fn obstacle_truncation_creates_a_detectable_discrepancy() {
        // object 0.004 short of the obstacle face: the true push truncates
        // there while the model slides the full offset, an error of 0.016
        let mut world = PlanarPushWorld::base(false);
        world.obstacles = vec![Box2 {
            min: [0.534, 0.4],
            max: [0.6, 0.6],
        }];
        let state = s(&[0.5, 0.5, 0.53, 0.5]);
        let observed = world.true_step(&state, ActionId(PUSH_RIGHT));
        let predicted = world.model_step(&state, ActionId(PUSH_RIGHT));
        assert!((observed.coords[2] - 0.534).abs() < 1e-12);
        assert!((predicted.coords[2] - 0.55).abs() < 1e-12);
        let err = euclidean(&observed, &predicted);
        assert!((err - 0.016).abs() < 1e-12);
        assert!(detect_discrepancy(
            &observed,
            &predicted,
            |a, b| euclidean(a, b),
            world.xi
        ));
    }

    #[test]
    fn goal_region_is_absorbing_and_free() {
        let world = PlanarPushWorld::base(true);
        let state = s(&[0.5, 0.5, 0.8, 0.8]);
        assert!(world.is_goal(&state));
        for a in 0..4 {
            assert_eq!(world.true_step(&state, ActionId(a)), state);
            assert_eq!(world.model_step(&state, ActionId(a)), state);
            assert_eq!(world.cost(&state, ActionId(a)), 0.0);
        }
    }

    #[test]
    fn heuristic_counts_pushing_steps_when_gripper_is_placed() {
        // zero-width object puts the gripper target on the object itself
        let mut world = PlanarPushWorld::base(false);
        world.object_width = 0.0;
        world.goal_center = [0.7, 0.5];
        let state = s(&[0.5, 0.5, 0.5, 0.5]);
        assert!((push_heuristic(&state, &world) - 10.0).abs() < 1e-9);
    }

    #[test]
    fn model_matches_truth_away_from_obstacles() {
        let world = PlanarPushWorld::base(true);
        let states = [
            s(&[0.1, 0.1, 0.2, 0.2]),
            s(&[0.2, 0.8, 0.22, 0.8]),
            s(&[0.7, 0.2, 0.72, 0.2]),
        ];
        for state in &states {
            for a in 0..4 {
                assert_eq!(
                    world.true_step(state, ActionId(a)),
                    world.model_step(state, ActionId(a)),
                    "mismatch away from obstacles at {state:?} action {a}"
                );
            }
        }
    }
}
