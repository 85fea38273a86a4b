//! Seven-joint planar arm on a joint-bin lattice. One joint may be
//! non-operational: commanding it leaves the configuration unchanged in the
//! real world, while the model happily rotates it.
//!
//! Forward kinematics are a synthetic unit-link planar chain; the goal is an
//! end-effector ball.

use crate::core::{euclidean, ActionId, Environment, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const JOINTS: usize = 7;
pub const BINS: i64 = 10;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArmLattice {
    /// Joint that does not move in the real world, if any.
    pub broken_joint: Option<usize>,
    pub start_bins: [i64; JOINTS],
    /// Workspace target for the end effector.
    pub goal_point: [f64; 2],
    pub goal_radius: f64,
}

/// Generator knobs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArmParams {
    pub broken_joint: Option<usize>,
    pub goal_radius: f64,
    /// Minimum end-effector distance between start and goal configurations.
    pub min_goal_distance: f64,
}

impl ArmLattice {
    /// Sample a start configuration and a workspace goal. With a broken
    /// joint, the goal point is generated from a configuration whose broken
    /// joint sits in a different bin — the planner's model will want to move
    /// that joint — and is then verified to be reachable on the start's
    /// broken-joint slice, so every instance stays solvable.
    pub fn generate(params: &ArmParams, seed: u64) -> ArmLattice {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        loop {
            let mut start = [0i64; JOINTS];
            for bin in &mut start {
                *bin = rng.gen_range(0..BINS);
            }
            let mut target = [0i64; JOINTS];
            for bin in target.iter_mut() {
                *bin = rng.gen_range(0..BINS);
            }
            if let Some(b) = params.broken_joint {
                if target[b] == start[b] {
                    continue; // want the model to be tempted by the broken joint
                }
            }
            let goal_point = forward_kinematics(&target);
            let at_start = forward_kinematics(&start);
            let gap = ((goal_point[0] - at_start[0]).powi(2)
                + (goal_point[1] - at_start[1]).powi(2))
            .sqrt();
            if gap < params.min_goal_distance {
                continue;
            }
            let candidate = ArmLattice {
                broken_joint: params.broken_joint,
                start_bins: start,
                goal_point,
                goal_radius: params.goal_radius,
            };
            if params.broken_joint.is_none()
                || candidate.goal_reachable_on_slice(0.9 * params.goal_radius)
            {
                return candidate;
            }
        }
    }

    /// Does some configuration with the broken joint frozen at its start bin
    /// put the end effector within `radius` of the goal point? Brute-force
    /// scan over the free joints.
    fn goal_reachable_on_slice(&self, radius: f64) -> bool {
        let broken = match self.broken_joint {
            Some(b) => b,
            None => return true,
        };
        let mut bins = [0i64; JOINTS];
        bins[broken] = self.start_bins[broken];
        let free: Vec<usize> = (0..JOINTS).filter(|&j| j != broken).collect();
        let mut counter = [0i64; JOINTS];
        loop {
            for (slot, &j) in free.iter().enumerate() {
                bins[j] = counter[slot];
            }
            let ee = forward_kinematics(&bins);
            let dx = ee[0] - self.goal_point[0];
            let dy = ee[1] - self.goal_point[1];
            if (dx * dx + dy * dy).sqrt() <= radius {
                return true;
            }
            // odometer over the free joints
            let mut slot = 0;
            loop {
                if slot == free.len() {
                    return false;
                }
                counter[slot] += 1;
                if counter[slot] < BINS {
                    break;
                }
                counter[slot] = 0;
                slot += 1;
            }
        }
    }

    fn bins_of(state: &State) -> [i64; JOINTS] {
        let mut bins = [0i64; JOINTS];
        for (b, c) in bins.iter_mut().zip(&state.coords) {
            *b = *c as i64;
        }
        bins
    }

    fn to_state(bins: [i64; JOINTS]) -> State {
        State::new(bins.iter().map(|&b| b as f64).collect())
    }

    fn joint_of(action: usize) -> (usize, i64) {
        (action / 2, if action % 2 == 0 { 1 } else { -1 })
    }

    fn end_effector(&self, state: &State) -> [f64; 2] {
        forward_kinematics(&Self::bins_of(state))
    }

    /// Upper bound on how far one bin move can displace the end effector:
    /// rotating joint j swings the distal chain (length at most 7 - j) by one
    /// bin width, so the chord from the longest lever bounds every move.
    pub fn max_step_displacement(&self) -> f64 {
        let lever = JOINTS as f64;
        2.0 * lever * (bin_width() / 2.0).sin()
    }
}

/// Joint range: bins span +-90 degrees (20 degrees per bin).
const JOINT_SPAN: f64 = std::f64::consts::PI;

/// Degrees swept by one bin move; the natural unit for value-smoothing
/// length scales over this lattice.
pub const DEGREES_PER_BIN: f64 = 180.0 / (BINS - 1) as f64;

fn bin_width() -> f64 {
    JOINT_SPAN / (BINS - 1) as f64
}

fn bin_angle(bin: i64) -> f64 {
    -JOINT_SPAN / 2.0 + bin as f64 * bin_width()
}

/// End-effector position of a unit-link planar chain with cumulative angles.
pub fn forward_kinematics(bins: &[i64; JOINTS]) -> [f64; 2] {
    let mut heading = 0.0f64;
    let mut x = 0.0f64;
    let mut y = 0.0f64;
    for &bin in bins {
        heading += bin_angle(bin);
        x += heading.cos();
        y += heading.sin();
    }
    [x, y]
}

impl Environment for ArmLattice {
    fn dim(&self) -> usize {
        JOINTS
    }

    fn num_actions(&self) -> usize {
        2 * JOINTS
    }

    fn true_step(&self, state: &State, action: ActionId) -> State {
        if self.is_goal(state) {
            return state.clone();
        }
        let (joint, _) = Self::joint_of(action.0);
        if self.broken_joint == Some(joint) {
            return state.clone();
        }
        self.model_step(state, action)
    }

    fn model_step(&self, state: &State, action: ActionId) -> State {
        if self.is_goal(state) {
            return state.clone();
        }
        let (joint, delta) = Self::joint_of(action.0);
        let mut bins = Self::bins_of(state);
        bins[joint] = (bins[joint] + delta).clamp(0, BINS - 1);
        Self::to_state(bins)
    }

    fn cost(&self, state: &State, _action: ActionId) -> f64 {
        if self.is_goal(state) {
            0.0
        } else {
            1.0
        }
    }

    fn is_goal(&self, state: &State) -> bool {
        let ee = self.end_effector(state);
        let dx = ee[0] - self.goal_point[0];
        let dy = ee[1] - self.goal_point[1];
        (dx * dx + dy * dy).sqrt() <= self.goal_radius
    }

    fn metric(&self, a: &State, b: &State) -> f64 {
        euclidean(a, b)
    }

    fn state_space_size(&self) -> f64 {
        (BINS as f64).powi(JOINTS as i32)
    }

    /// End-effector distance still to cover, scaled by the largest possible
    /// per-step displacement. Admissible and consistent by construction.
    fn initial_heuristic(&self, state: &State) -> f64 {
        let ee = self.end_effector(state);
        let dx = ee[0] - self.goal_point[0];
        let dy = ee[1] - self.goal_point[1];
        let gap = (dx * dx + dy * dy).sqrt() - self.goal_radius;
        if gap <= 0.0 {
            0.0
        } else {
            gap / self.max_step_displacement()
        }
    }

    fn start_state(&self) -> State {
        Self::to_state(self.start_bins)
    }

    fn contains(&self, state: &State) -> bool {
        state.coords.len() == JOINTS
            && Self::bins_of(state).iter().all(|&b| (0..BINS).contains(&b))
    }

    fn is_integer_lattice(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arm(broken: Option<usize>) -> ArmLattice {
        ArmLattice {
            broken_joint: broken,
            start_bins: [4, 4, 4, 4, 4, 4, 4],
            goal_point: [-100.0, -100.0], // unreachable: nothing is a goal
            goal_radius: 0.1,
        }
    }

    fn s(bins: [i64; JOINTS]) -> State {
        ArmLattice::to_state(bins)
    }

    #[test]
    fn broken_joint_does_not_move() {
        let env = arm(Some(2));
        let state = s([4, 4, 4, 4, 4, 4, 4]);
        // action 4 = joint 2 positive
        assert_eq!(env.true_step(&state, ActionId(4)), state);
        assert_eq!(
            env.model_step(&state, ActionId(4)),
            s([4, 4, 5, 4, 4, 4, 4])
        );
    }

    #[test]
    fn joint_limits_clamp() {
        let env = arm(None);
        let state = s([9, 4, 4, 4, 4, 4, 4]);
        assert_eq!(env.true_step(&state, ActionId(0)), state);
        let low = s([4, 4, 4, 4, 4, 4, 4]);
        assert_eq!(env.true_step(&low, ActionId(1)), s([3, 4, 4, 4, 4, 4, 4]));
    }

    #[test]
    fn healthy_arm_matches_the_model_everywhere_sampled() {
        let env = arm(None);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let mut bins = [0i64; JOINTS];
            for b in &mut bins {
                *b = rng.gen_range(0..BINS);
            }
            let state = s(bins);
            for a in 0..14 {
                assert_eq!(env.true_step(&state, ActionId(a)), env.model_step(&state, ActionId(a)));
            }
        }
    }

    #[test]
    fn step_displacement_bound_holds_on_samples() {
        let env = arm(None);
        let bound = env.max_step_displacement();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..2000 {
            let mut bins = [0i64; JOINTS];
            for b in &mut bins {
                *b = rng.gen_range(0..BINS);
            }
            let state = s(bins);
            let a = ActionId(rng.gen_range(0..14));
            let next = env.model_step(&state, a);
            let before = env.end_effector(&state);
            let after = env.end_effector(&next);
            let moved =
                ((after[0] - before[0]).powi(2) + (after[1] - before[1]).powi(2)).sqrt();
            assert!(moved <= bound + 1e-12, "moved {moved} > bound {bound}");
        }
    }

    #[test]
    fn heuristic_is_consistent_on_sampled_transitions() {
        let env = ArmLattice {
            broken_joint: None,
            start_bins: [0; JOINTS],
            goal_point: forward_kinematics(&[7, 3, 6, 2, 8, 4, 5]),
            goal_radius: 0.3,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let mut bins = [0i64; JOINTS];
            for b in &mut bins {
                *b = rng.gen_range(0..BINS);
            }
            let state = s(bins);
            if env.is_goal(&state) {
                continue;
            }
            let h = env.initial_heuristic(&state);
            for a in 0..14 {
                let next = env.model_step(&state, ActionId(a));
                let bound = env.cost(&state, ActionId(a)) + env.initial_heuristic(&next);
                assert!(h <= bound + 1e-9, "inconsistent at {state:?} action {a}");
            }
        }
    }

    #[test]
    fn generator_goals_are_reachable_without_the_broken_joint() {
        let params = ArmParams {
            broken_joint: Some(1),
            goal_radius: 0.3,
            min_goal_distance: 1.0,
        };
        for seed in 0..10 {
            let env = ArmLattice::generate(&params, seed);
            let again = ArmLattice::generate(&params, seed);
            assert_eq!(env.start_bins, again.start_bins);
            assert_eq!(env.goal_point, again.goal_point);
            assert!(!env.is_goal(&env.start_state()));
        }
    }
}
