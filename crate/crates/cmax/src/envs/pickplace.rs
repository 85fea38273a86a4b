//! Pick-and-place on a 20x20x20 end-effector lattice. The obstacle is known
//! to the model; the object's mass is not. Carrying a heavy object, the arm
//! cannot lift beyond a torque-limited height — the model predicts the lift
//! anyway, which is the only source of discrepancy.

use crate::core::{euclidean, manhattan, ActionId, Environment, State};
use serde::{Deserialize, Serialize};

pub const X_POS: usize = 0;
pub const X_NEG: usize = 1;
pub const Y_POS: usize = 2;
pub const Y_NEG: usize = 3;
pub const Z_POS: usize = 4;
pub const Z_NEG: usize = 5;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PickPlaceGrid {
    pub bins: i64,
    /// Inclusive cell bounds of the obstacle, blocked in model and truth.
    pub obstacle_min: [i64; 3],
    pub obstacle_max: [i64; 3],
    /// Lifting above this height fails when the object is heavy.
    pub z_limit: i64,
    pub heavy: bool,
    pub start: [i64; 3],
    pub goal: [i64; 3],
}

impl PickPlaceGrid {
    /// The fixed desk scene: a wall between start and goal with a clear
    /// corridor at far y. Light objects go over the top; heavy objects
    /// cannot lift past the torque ceiling and must take the corridor.
    pub fn scenario(heavy: bool) -> PickPlaceGrid {
        PickPlaceGrid {
            bins: 20,
            obstacle_min: [8, 0, 0],
            obstacle_max: [11, 17, 9],
            z_limit: 6,
            heavy,
            start: [2, 5, 2],
            goal: [17, 5, 2],
        }
    }

    fn cell(state: &State) -> [i64; 3] {
        [
            state.coords[0] as i64,
            state.coords[1] as i64,
            state.coords[2] as i64,
        ]
    }

    fn to_state(cell: [i64; 3]) -> State {
        State::new(vec![cell[0] as f64, cell[1] as f64, cell[2] as f64])
    }

    fn in_obstacle(&self, cell: [i64; 3]) -> bool {
        (0..3).all(|i| cell[i] >= self.obstacle_min[i] && cell[i] <= self.obstacle_max[i])
    }

    fn offset(action: usize) -> [i64; 3] {
        match action {
            X_POS => [1, 0, 0],
            X_NEG => [-1, 0, 0],
            Y_POS => [0, 1, 0],
            Y_NEG => [0, -1, 0],
            Z_POS => [0, 0, 1],
            _ => [0, 0, -1],
        }
    }

    fn lattice_move(&self, cell: [i64; 3], action: usize) -> [i64; 3] {
        let d = Self::offset(action);
        let next = [
            (cell[0] + d[0]).clamp(0, self.bins - 1),
            (cell[1] + d[1]).clamp(0, self.bins - 1),
            (cell[2] + d[2]).clamp(0, self.bins - 1),
        ];
        if self.in_obstacle(next) {
            cell
        } else {
            next
        }
    }
}

impl Environment for PickPlaceGrid {
    fn dim(&self) -> usize {
        3
    }

    fn num_actions(&self) -> usize {
        6
    }

    fn true_step(&self, state: &State, action: ActionId) -> State {
        if self.is_goal(state) {
            return state.clone();
        }
        let cell = Self::cell(state);
        if self.heavy && action.0 == Z_POS && cell[2] >= self.z_limit {
            return state.clone();
        }
        Self::to_state(self.lattice_move(cell, action.0))
    }

    fn model_step(&self, state: &State, action: ActionId) -> State {
        if self.is_goal(state) {
            return state.clone();
        }
        Self::to_state(self.lattice_move(Self::cell(state), action.0))
    }

    fn cost(&self, state: &State, _action: ActionId) -> f64 {
        if self.is_goal(state) {
            0.0
        } else {
            1.0
        }
    }

    fn is_goal(&self, state: &State) -> bool {
        Self::cell(state) == self.goal
    }

    fn metric(&self, a: &State, b: &State) -> f64 {
        euclidean(a, b)
    }

    fn state_space_size(&self) -> f64 {
        (self.bins * self.bins * self.bins) as f64
    }

    fn initial_heuristic(&self, state: &State) -> f64 {
        manhattan(state, &Self::to_state(self.goal))
    }

    fn start_state(&self) -> State {
        Self::to_state(self.start)
    }

    fn contains(&self, state: &State) -> bool {
        Self::cell(state).iter().all(|&c| (0..self.bins).contains(&c))
    }

    fn is_integer_lattice(&self) -> bool {
        true
    }
}
