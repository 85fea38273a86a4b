//! Gridworld with icy cells: moving left or right on ice slides two cells
//! instead of one. The planning model is the same grid with no ice.

use crate::core::{euclidean, manhattan, ActionId, Environment, State};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashSet, VecDeque};

pub const RIGHT: usize = 0;
pub const LEFT: usize = 1;
pub const UP: usize = 2;
pub const DOWN: usize = 3;

/// Gridworld instance. `ice` never contains the start or goal cell.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IcyGrid {
    pub width: i64,
    pub height: i64,
    pub ice: HashSet<(i64, i64)>,
    pub start: (i64, i64),
    pub goal: (i64, i64),
}

/// Generator knobs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IcyGridParams {
    pub width: i64,
    pub height: i64,
    pub ice_fraction: f64,
    /// Resample until, from every cell, the goal is reachable through
    /// transitions the model predicts correctly.
    pub verified_safe: bool,
}

impl IcyGrid {
    pub fn generate(params: &IcyGridParams, seed: u64) -> IcyGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..10_000 {
            let grid = Self::sample(params, &mut rng);
            if !params.verified_safe || grid.safe_paths_from_everywhere() {
                return grid;
            }
        }
        panic!(
            "no instance with an always-available safe path in 10000 draws \
             (width {} height {} ice {})",
            params.width, params.height, params.ice_fraction
        );
    }

    fn sample(params: &IcyGridParams, rng: &mut ChaCha8Rng) -> IcyGrid {
        let (w, h) = (params.width, params.height);
        let start = (rng.gen_range(0..w), rng.gen_range(0..h));
        let goal = loop {
            let g = (rng.gen_range(0..w), rng.gen_range(0..h));
            if g != start {
                break g;
            }
        };
        let mut cells: Vec<(i64, i64)> = (0..w)
            .flat_map(|x| (0..h).map(move |y| (x, y)))
            .filter(|&c| c != start && c != goal)
            .collect();
        cells.shuffle(rng);
        let count = ((w * h) as f64 * params.ice_fraction).round() as usize;
        let ice = cells.into_iter().take(count.min((w * h - 2) as usize)).collect();
        IcyGrid {
            width: w,
            height: h,
            ice,
            start,
            goal,
        }
    }

    fn clamp(&self, x: i64, y: i64) -> (i64, i64) {
        (x.clamp(0, self.width - 1), y.clamp(0, self.height - 1))
    }

    fn cell(state: &State) -> (i64, i64) {
        (state.coords[0] as i64, state.coords[1] as i64)
    }

    fn to_state(cell: (i64, i64)) -> State {
        State::new(vec![cell.0 as f64, cell.1 as f64])
    }

    fn model_move(&self, cell: (i64, i64), action: usize) -> (i64, i64) {
        let (x, y) = cell;
        match action {
            RIGHT => self.clamp(x + 1, y),
            LEFT => self.clamp(x - 1, y),
            UP => self.clamp(x, y + 1),
            _ => self.clamp(x, y - 1),
        }
    }

    fn true_move(&self, cell: (i64, i64), action: usize) -> (i64, i64) {
        let (x, y) = cell;
        if self.ice.contains(&cell) {
            // slipping affects only horizontal motion
            match action {
                RIGHT => self.clamp(x + 2, y),
                LEFT => self.clamp(x - 2, y),
                UP => self.clamp(x, y + 1),
                _ => self.clamp(x, y - 1),
            }
        } else {
            self.model_move(cell, action)
        }
    }

    /// Enumerate the pairs where true and modeled successors differ.
    pub fn incorrect_pairs(&self) -> Vec<(State, ActionId)> {
        let mut pairs = Vec::new();
        for x in 0..self.width {
            for y in 0..self.height {
                if (x, y) == self.goal {
                    continue;
                }
                for a in 0..4 {
                    if self.true_move((x, y), a) != self.model_move((x, y), a) {
                        pairs.push((Self::to_state((x, y)), ActionId(a)));
                    }
                }
            }
        }
        pairs
    }

    /// Like [`IcyGrid::generate`], additionally rejecting instances where
    /// some cell lacks a goal path staying strictly farther than `margin`
    /// (per action, Euclidean) from every incorrect pair.
    pub fn generate_margin_verified(params: &IcyGridParams, margin: f64, seed: u64) -> IcyGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..10_000 {
            let grid = Self::sample(params, &mut rng);
            if (!params.verified_safe || grid.safe_paths_from_everywhere())
                && grid.safe_paths_with_margin(margin)
            {
                return grid;
            }
        }
        panic!(
            "no instance with margin-{margin} safe paths in 10000 draws \
             (width {} height {} ice {})",
            params.width, params.height, params.ice_fraction
        );
    }

    /// From every cell, can the goal be reached through transitions that are
    /// correct and strictly farther than `margin` from every incorrect pair
    /// with the same action?
    pub fn safe_paths_with_margin(&self, margin: f64) -> bool {
        let incorrect = self.incorrect_pairs();
        let per_action: Vec<Vec<(f64, f64)>> = (0..4)
            .map(|a| {
                incorrect
                    .iter()
                    .filter(|(_, action)| action.0 == a)
                    .map(|(s, _)| (s.coords[0], s.coords[1]))
                    .collect()
            })
            .collect();
        let allowed = |cell: (i64, i64), a: usize| {
            per_action[a].iter().all(|&(cx, cy)| {
                let dx = cell.0 as f64 - cx;
                let dy = cell.1 as f64 - cy;
                (dx * dx + dy * dy).sqrt() > margin
            })
        };

        let index = |c: (i64, i64)| (c.0 * self.height + c.1) as usize;
        let mut reaches = vec![false; (self.width * self.height) as usize];
        let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); reaches.len()];
        for x in 0..self.width {
            for y in 0..self.height {
                if (x, y) == self.goal {
                    continue;
                }
                for a in 0..4 {
                    let truth = self.true_move((x, y), a);
                    if truth == self.model_move((x, y), a) && truth != (x, y) && allowed((x, y), a)
                    {
                        reverse[index(truth)].push(index((x, y)));
                    }
                }
            }
        }
        let mut queue = VecDeque::from([index(self.goal)]);
        reaches[index(self.goal)] = true;
        while let Some(cell) = queue.pop_front() {
            for &prev in &reverse[cell] {
                if !reaches[prev] {
                    reaches[prev] = true;
                    queue.push_back(prev);
                }
            }
        }
        reaches.iter().all(|&r| r)
    }

    /// From every cell, can the goal be reached using only transitions whose
    /// true and modeled successors agree? (Checked with one reverse
    /// breadth-first pass from the goal.)
    pub fn safe_paths_from_everywhere(&self) -> bool {
        let index = |c: (i64, i64)| (c.0 * self.height + c.1) as usize;
        let mut reaches = vec![false; (self.width * self.height) as usize];
        let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); reaches.len()];
        for x in 0..self.width {
            for y in 0..self.height {
                if (x, y) == self.goal {
                    continue;
                }
                for a in 0..4 {
                    let truth = self.true_move((x, y), a);
                    if truth == self.model_move((x, y), a) && truth != (x, y) {
                        reverse[index(truth)].push(index((x, y)));
                    }
                }
            }
        }
        let mut queue = VecDeque::from([index(self.goal)]);
        reaches[index(self.goal)] = true;
        while let Some(cell) = queue.pop_front() {
            for &prev in &reverse[cell] {
                if !reaches[prev] {
                    reaches[prev] = true;
                    queue.push_back(prev);
                }
            }
        }
        reaches.iter().all(|&r| r)
    }
}

impl Environment for IcyGrid {
    fn dim(&self) -> usize {
        2
    }

    fn num_actions(&self) -> usize {
        4
    }

    fn true_step(&self, state: &State, action: ActionId) -> State {
        if self.is_goal(state) {
            return state.clone();
        }
        Self::to_state(self.true_move(Self::cell(state), action.0))
    }

    fn model_step(&self, state: &State, action: ActionId) -> State {
        if self.is_goal(state) {
            return state.clone();
        }
        Self::to_state(self.model_move(Self::cell(state), action.0))
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
        (self.width * self.height) as f64
    }

    fn initial_heuristic(&self, state: &State) -> f64 {
        manhattan(state, &Self::to_state(self.goal))
    }

    fn start_state(&self) -> State {
        Self::to_state(self.start)
    }

    fn contains(&self, state: &State) -> bool {
        let (x, y) = Self::cell(state);
        (0..self.width).contains(&x) && (0..self.height).contains(&y)
    }

    fn is_integer_lattice(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_with_ice(ice: &[(i64, i64)]) -> IcyGrid {
        IcyGrid {
            width: 10,
            height: 10,
            ice: ice.iter().copied().collect(),
            start: (0, 0),
            goal: (9, 9),
        }
    }

    fn s(x: i64, y: i64) -> State {
        State::new(vec![x as f64, y as f64])
    }

    #[test]
    fn ice_slides_two_cells_horizontally() {
        let grid = grid_with_ice(&[(5, 5)]);
        assert_eq!(grid.true_step(&s(5, 5), ActionId(RIGHT)), s(7, 5));
        assert_eq!(grid.true_step(&s(5, 5), ActionId(LEFT)), s(3, 5));
    }

    #[test]
    fn ice_does_not_affect_vertical_moves() {
        let grid = grid_with_ice(&[(5, 5)]);
        assert_eq!(grid.true_step(&s(5, 5), ActionId(UP)), s(5, 6));
        assert_eq!(grid.true_step(&s(5, 5), ActionId(DOWN)), s(5, 4));
    }

    #[test]
    fn slides_clamp_at_the_boundary() {
        let grid = grid_with_ice(&[(8, 5)]);
        // one column short of the wall: the slide truncates to one cell and
        // matches the model, so this pair is not incorrect
        assert_eq!(grid.true_step(&s(8, 5), ActionId(RIGHT)), s(9, 5));
        assert_eq!(grid.model_step(&s(8, 5), ActionId(RIGHT)), s(9, 5));
    }

    #[test]
    fn model_matches_truth_off_the_ice() {
        let grid = grid_with_ice(&[(5, 5), (2, 7)]);
        for x in 0..10 {
            for y in 0..10 {
                for a in 0..4 {
                    let state = s(x, y);
                    let same =
                        grid.true_step(&state, ActionId(a)) == grid.model_step(&state, ActionId(a));
                    let icy_horizontal = grid.ice.contains(&(x, y)) && (a == RIGHT || a == LEFT);
                    if !icy_horizontal {
                        assert!(same, "mismatch off ice at ({x},{y}) action {a}");
                    }
                }
            }
        }
    }

    #[test]
    fn incorrect_pairs_match_a_direct_scan() {
        let grid = grid_with_ice(&[(5, 5), (8, 1), (1, 8)]);
        let pairs = grid.incorrect_pairs();
        for (state, action) in &pairs {
            assert_ne!(grid.true_step(state, *action), grid.model_step(state, *action));
        }
        // (8,1) Right clamps identically in truth and model
        assert!(!pairs
            .iter()
            .any(|(st, a)| IcyGrid::cell(st) == (8, 1) && a.0 == RIGHT));
    }

    #[test]
    fn goal_is_absorbing_and_free() {
        let grid = grid_with_ice(&[]);
        let goal = s(9, 9);
        for a in 0..4 {
            assert_eq!(grid.true_step(&goal, ActionId(a)), goal);
            assert_eq!(grid.model_step(&goal, ActionId(a)), goal);
            assert_eq!(grid.cost(&goal, ActionId(a)), 0.0);
        }
        assert_eq!(grid.initial_heuristic(&goal), 0.0);
    }

    #[test]
    fn generation_is_seed_deterministic_and_respects_mode() {
        let params = IcyGridParams {
            width: 8,
            height: 8,
            ice_fraction: 0.3,
            verified_safe: true,
        };
        let a = IcyGrid::generate(&params, 42);
        let b = IcyGrid::generate(&params, 42);
        assert_eq!(a.ice, b.ice);
        assert_eq!((a.start, a.goal), (b.start, b.goal));
        assert!(a.safe_paths_from_everywhere());
        assert!(!a.ice.contains(&a.start) && !a.ice.contains(&a.goal));
    }
}
