//! The planning-and-execution loops.
//!
//! Both loops interleave a bounded lookahead on the penalized model with one
//! real action execution, flag any transition whose observed successor
//! disagrees with the model's prediction, and keep going until a goal or the
//! step cutoff. The model's dynamics are never modified; only the cost seen
//! by the planner changes.
//!
//! Small spaces track flagged pairs exactly and hold tabular values. Large
//! spaces cover flagged pairs with hyperspheres and refresh a function
//! approximator from batches of lookaheads over previously visited states.

use crate::core::{ActionId, Environment, PenalizedModel, State, StateKey};
use crate::discrepancy::{detect_discrepancy, ExactDiscrepancySet, HypersphereStore};
use crate::search::{lookahead, SearchError};
use crate::value::{MemoizedValues, TabularValues, ValueEstimator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::collections::VecDeque;
use std::sync::Arc;
use std::time::Instant;

/// Configuration for the exact, small-state-space loop.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmallConfig {
    pub expansion_budget: usize,
    pub max_steps: usize,
}

/// Configuration for the large-state-space loop.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LargeConfig {
    pub expansion_budget: usize,
    /// Planning updates per executed action.
    pub planning_updates: usize,
    /// States sampled from the buffer per planning update.
    pub batch_size: usize,
    /// Hypersphere radius.
    pub sphere_radius: f64,
    /// Discrepancy threshold on the metric between observed and predicted
    /// successors. Pulled in by half a bin on integer lattices so unit
    /// mismatches trigger despite the strict inequality.
    pub discrepancy_threshold: f64,
    pub buffer_capacity: usize,
    pub max_steps: usize,
}

impl LargeConfig {
    /// Threshold actually compared against, after the lattice adjustment.
    pub fn effective_threshold(&self, env: &dyn Environment) -> f64 {
        if env.is_integer_lattice() {
            (self.discrepancy_threshold - 0.5).max(0.0)
        } else {
            self.discrepancy_threshold
        }
    }
}

/// One executed transition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: Vec<f64>,
    pub action: usize,
    pub to: Vec<f64>,
}

/// One discovered-incorrect transition, with the timestep it was found at.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyEvent {
    pub state: Vec<f64>,
    pub action: usize,
    pub timestep: usize,
}

/// Execution trace of a single trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub steps: usize,
    pub reached_goal: bool,
    pub trajectory: Vec<Transition>,
    pub discrepancies: Vec<DiscrepancyEvent>,
    /// Wall-clock of each action-selection planning call, in microseconds.
    pub plan_time_us: Vec<u64>,
}

/// Projection of a record without wall-clock fields, for byte-stable output.
#[derive(Serialize)]
struct DeterministicRecord<'a> {
    steps: usize,
    reached_goal: bool,
    trajectory: &'a [Transition],
    discrepancies: &'a [DiscrepancyEvent],
}

impl TrialRecord {
    pub fn new_empty() -> Self {
        TrialRecord {
            steps: 0,
            reached_goal: false,
            trajectory: Vec::new(),
            discrepancies: Vec::new(),
            plan_time_us: Vec::new(),
        }
    }

    fn push_transition(&mut self, from: &State, action: ActionId, to: &State) {
        self.trajectory.push(Transition {
            from: from.coords.clone(),
            action: action.0,
            to: to.coords.clone(),
        });
        self.steps = self.trajectory.len();
    }

    /// JSON without timing, identical across reruns and thread counts.
    pub fn deterministic_json(&self) -> String {
        serde_json::to_string(&DeterministicRecord {
            steps: self.steps,
            reached_goal: self.reached_goal,
            trajectory: &self.trajectory,
            discrepancies: &self.discrepancies,
        })
        .expect("record serialization cannot fail")
    }
}

/// Ring buffer of previously visited states, sampled with replacement.
pub struct StateBuffer {
    ring: VecDeque<State>,
    capacity: usize,
}

impl StateBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1);
        StateBuffer {
            ring: VecDeque::with_capacity(capacity.min(4096)),
            capacity,
        }
    }

    pub fn push(&mut self, state: State) {
        if self.ring.len() == self.capacity {
            self.ring.pop_front();
        }
        self.ring.push_back(state);
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }

    pub fn sample_with_replacement(&self, count: usize, rng: &mut impl Rng) -> Vec<State> {
        (0..count)
            .map(|_| self.ring[rng.gen_range(0..self.ring.len())].clone())
            .collect()
    }
}

/// Run the exact loop: flag mismatched transitions one pair at a time and
/// keep tabular cost-to-go values.
pub fn run_small(env: &Arc<dyn Environment>, cfg: &SmallConfig) -> TrialRecord {
    let mut values = TabularValues::new(crate::core::heuristic_of(env.clone()), env.key_resolution());
    let mut incorrect = ExactDiscrepancySet::new();
    let mut record = TrialRecord::new_empty();
    let mut state = env.start_state();

    loop {
        if env.is_goal(&state) {
            record.reached_goal = true;
            break;
        }
        if record.steps >= cfg.max_steps {
            break;
        }

        let planned = {
            let clock = Instant::now();
            let model = PenalizedModel::new(&**env, &incorrect);
            let outcome = lookahead(&state, &model, &values, cfg.expansion_budget);
            record.plan_time_us.push(clock.elapsed().as_micros() as u64);
            outcome
        };
        let step = match planned {
            Ok(step) => step,
            Err(SearchError::DeadEnd { .. }) => break,
        };
        values.apply_updates(&step.value_updates);

        let action = step.best_action;
        let predicted = env.model_step(&state, action);
        let observed = env.true_step(&state, action);
        record.push_transition(&state, action, &observed);
        if observed.coords != predicted.coords {
            incorrect.record(&state, action);
            record.discrepancies.push(DiscrepancyEvent {
                state: state.coords.clone(),
                action: action.0,
                timestep: record.steps,
            });
        }
        state = observed;
    }
    record
}

/// Run the function-approximated loop: cover mismatches with hyperspheres
/// and refresh the estimator from buffered lookaheads after every action.
pub fn run_large<V: ValueEstimator>(
    env: &Arc<dyn Environment>,
    cfg: &LargeConfig,
    estimator: &mut V,
    seed: u64,
) -> TrialRecord {
    let mut spheres = HypersphereStore::new(
        env.num_actions(),
        cfg.sphere_radius,
        cfg.discrepancy_threshold,
    );
    run_large_with_store(env, cfg, estimator, &mut spheres, seed)
}

/// As [`run_large`], with a caller-owned sphere store (kept so callers can
/// inspect or serialize the cover after the trial).
pub fn run_large_with_store<V: ValueEstimator>(
    env: &Arc<dyn Environment>,
    cfg: &LargeConfig,
    estimator: &mut V,
    spheres: &mut HypersphereStore,
    seed: u64,
) -> TrialRecord {
    let mut buffer = StateBuffer::new(cfg.buffer_capacity);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let threshold = cfg.effective_threshold(&**env);
    let mut record = TrialRecord::new_empty();
    let mut state = env.start_state();

    loop {
        if env.is_goal(&state) {
            record.reached_goal = true;
            break;
        }
        if record.steps >= cfg.max_steps {
            break;
        }

        let planned = {
            let clock = Instant::now();
            let model = PenalizedModel::new(&**env, &*spheres);
            let memo = MemoizedValues::new(&*estimator, env.key_resolution());
            let outcome = lookahead(&state, &model, &memo, cfg.expansion_budget);
            record.plan_time_us.push(clock.elapsed().as_micros() as u64);
            outcome
        };
        let step = match planned {
            Ok(step) => step,
            Err(SearchError::DeadEnd { .. }) => break,
        };

        let action = step.best_action;
        let predicted = env.model_step(&state, action);
        let observed = env.true_step(&state, action);
        record.push_transition(&state, action, &observed);
        if detect_discrepancy(&observed, &predicted, |a, b| env.metric(a, b), threshold) {
            spheres.record(&state, action);
            record.discrepancies.push(DiscrepancyEvent {
                state: state.coords.clone(),
                action: action.0,
                timestep: record.steps,
            });
        }
        buffer.push(state.clone());
        {
            let model = PenalizedModel::new(&**env, &*spheres);
            update_estimator(&model, env.key_resolution(), estimator, &buffer, cfg, &mut rng);
        }
        state = observed;
    }
    record
}

/// One round of planning updates: sample `batch_size` buffered states with
/// replacement, run a lookahead from each against the frozen model and value
/// snapshot, aggregate every closed state's new value (keeping the maximum on
/// overlap), and fit the estimator once — repeated `planning_updates` times.
pub fn update_estimator<M: crate::core::PlanningModel, V: ValueEstimator>(
    model: &M,
    key_resolution: f64,
    estimator: &mut V,
    buffer: &StateBuffer,
    cfg: &LargeConfig,
    rng: &mut impl Rng,
) {
    assert!(!buffer.is_empty(), "the current state is pushed before updating");
    for _ in 0..cfg.planning_updates {
        let batch = buffer.sample_with_replacement(cfg.batch_size, rng);
        let mut raw = Vec::new();
        {
            let memo = MemoizedValues::new(&*estimator, key_resolution);
            for start in &batch {
                if model.is_goal(start) {
                    continue;
                }
                if let Ok(step) = lookahead(start, model, &memo, cfg.expansion_budget) {
                    raw.extend(step.value_updates);
                }
            }
        }
        estimator.apply_updates(&max_aggregate(raw, key_resolution));
    }
}

/// Collapse duplicate states to their largest target, in a deterministic
/// (key-sorted) order.
pub fn max_aggregate(updates: Vec<(State, f64)>, key_resolution: f64) -> Vec<(State, f64)> {
    let mut aggregated: HashMap<StateKey, (State, f64)> = HashMap::new();
    for (s, v) in updates {
        let key = StateKey::quantize(&s, key_resolution);
        aggregated
            .entry(key)
            .and_modify(|slot| {
                if v > slot.1 {
                    *slot = (s.clone(), v);
                }
            })
            .or_insert((s, v));
    }
    let mut ordered: Vec<(StateKey, (State, f64))> = aggregated.into_iter().collect();
    ordered.sort_by(|a, b| a.0 .0.cmp(&b.0 .0));
    ordered.into_iter().map(|(_, sv)| sv).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{euclidean, manhattan};
    use crate::value::ValuePredictor;

    /// Empty grid where the model is exact.
    struct EmptyGrid {
        width: i64,
        height: i64,
        start: (i64, i64),
        goal: (i64, i64),
    }

    impl Environment for EmptyGrid {
        fn dim(&self) -> usize {
            2
        }

        fn num_actions(&self) -> usize {
            4
        }

        fn true_step(&self, state: &State, action: ActionId) -> State {
            self.model_step(state, action)
        }

        fn model_step(&self, state: &State, action: ActionId) -> State {
            if self.is_goal(state) {
                return state.clone();
            }
            let (x, y) = (state.coords[0] as i64, state.coords[1] as i64);
            let (nx, ny) = match action.0 {
                0 => ((x + 1).min(self.width - 1), y),
                1 => ((x - 1).max(0), y),
                2 => (x, (y + 1).min(self.height - 1)),
                _ => (x, (y - 1).max(0)),
            };
            State::new(vec![nx as f64, ny as f64])
        }

        fn cost(&self, state: &State, _action: ActionId) -> f64 {
            if self.is_goal(state) {
                0.0
            } else {
                1.0
            }
        }

        fn is_goal(&self, state: &State) -> bool {
            (state.coords[0] as i64, state.coords[1] as i64) == self.goal
        }

        fn metric(&self, a: &State, b: &State) -> f64 {
            euclidean(a, b)
        }

        fn state_space_size(&self) -> f64 {
            (self.width * self.height) as f64
        }

        fn initial_heuristic(&self, state: &State) -> f64 {
            manhattan(
                state,
                &State::new(vec![self.goal.0 as f64, self.goal.1 as f64]),
            )
        }

        fn start_state(&self) -> State {
            State::new(vec![self.start.0 as f64, self.start.1 as f64])
        }

        fn contains(&self, state: &State) -> bool {
            let (x, y) = (state.coords[0] as i64, state.coords[1] as i64);
            (0..self.width).contains(&x) && (0..self.height).contains(&y)
        }

        fn is_integer_lattice(&self) -> bool {
            true
        }
    }

    fn empty_grid() -> Arc<dyn Environment> {
        Arc::new(EmptyGrid {
            width: 8,
            height: 8,
            start: (1, 2),
            goal: (6, 7),
        })
    }

    #[test]
    fn accurate_model_walks_the_manhattan_distance() {
        // exact heuristic and exact model: even a single expansion per step
        // follows an optimal path
        let env = empty_grid();
        let cfg = SmallConfig {
            expansion_budget: 1,
            max_steps: 500,
        };
        let record = run_small(&env, &cfg);
        assert!(record.reached_goal);
        assert_eq!(record.steps, 5 + 5);
        assert!(record.discrepancies.is_empty());
    }

    #[test]
    fn trial_is_deterministic() {
        let env = empty_grid();
        let cfg = SmallConfig {
            expansion_budget: 3,
            max_steps: 500,
        };
        let a = run_small(&env, &cfg);
        let b = run_small(&env, &cfg);
        assert_eq!(a.deterministic_json(), b.deterministic_json());
    }

    #[test]
    fn model_outputs_are_untouched_by_a_trial() {
        let env = empty_grid();
        let probe: Vec<(State, ActionId)> = (0..8)
            .flat_map(|x| (0..8).map(move |y| (x, y)))
            .flat_map(|(x, y)| (0..4).map(move |a| (State::new(vec![x as f64, y as f64]), ActionId(a))))
            .collect();
        let before: Vec<State> = probe.iter().map(|(s, a)| env.model_step(s, *a)).collect();
        let cfg = SmallConfig {
            expansion_budget: 4,
            max_steps: 500,
        };
        let _ = run_small(&env, &cfg);
        let after: Vec<State> = probe.iter().map(|(s, a)| env.model_step(s, *a)).collect();
        assert_eq!(before, after);
    }

    struct CountingEstimator {
        inner: TabularValues,
        fits: usize,
    }

    impl ValuePredictor for CountingEstimator {
        fn predict(&self, state: &State) -> f64 {
            self.inner.predict(state)
        }
    }

    impl ValueEstimator for CountingEstimator {
        fn apply_updates(&mut self, updates: &[(State, f64)]) {
            self.fits += 1;
            self.inner.apply_updates(updates);
        }
    }

    #[test]
    fn update_runs_one_fit_per_planning_update() {
        let env = empty_grid();
        let cfg = LargeConfig {
            expansion_budget: 2,
            planning_updates: 5,
            batch_size: 64,
            sphere_radius: 0.5,
            discrepancy_threshold: 0.0,
            buffer_capacity: 100,
            max_steps: 100,
        };
        let mut estimator = CountingEstimator {
            inner: TabularValues::new(crate::core::heuristic_of(env.clone()), 1.0),
            fits: 0,
        };
        let record = run_large(&env, &cfg, &mut estimator, 9);
        assert!(record.reached_goal);
        assert_eq!(estimator.fits, record.steps * cfg.planning_updates);
    }

    #[test]
    fn degenerate_buffer_matches_lookahead_and_apply() {
        // buffer capacity 1 with a single one-state batch: the update step
        // has exactly the effect of applying the current state's lookahead
        let env = empty_grid();
        let cfg = LargeConfig {
            expansion_budget: 3,
            planning_updates: 1,
            batch_size: 1,
            sphere_radius: 0.5,
            discrepancy_threshold: 0.0,
            buffer_capacity: 1,
            max_steps: 1,
        };
        let mut via_update = TabularValues::new(crate::core::heuristic_of(env.clone()), 1.0);
        run_large(&env, &cfg, &mut via_update, 1);

        let mut manual = TabularValues::new(crate::core::heuristic_of(env.clone()), 1.0);
        let none = ExactDiscrepancySet::new();
        let model = PenalizedModel::new(&*env, &none);
        let step = lookahead(&env.start_state(), &model, &manual, 3).unwrap();
        manual.apply_updates(&step.value_updates);

        for x in 0..8 {
            for y in 0..8 {
                let s = State::new(vec![x as f64, y as f64]);
                assert_eq!(via_update.predict(&s), manual.predict(&s));
            }
        }
    }

    #[test]
    fn overlapping_closed_lists_keep_the_larger_target() {
        let aggregated = max_aggregate(
            vec![
                (State::new(vec![1.0]), 3.0),
                (State::new(vec![2.0]), 1.0),
                (State::new(vec![1.0]), 4.0),
                (State::new(vec![1.0]), 2.0),
            ],
            1.0,
        );
        assert_eq!(aggregated.len(), 2);
        assert_eq!(aggregated[0], (State::new(vec![1.0]), 4.0));
        assert_eq!(aggregated[1], (State::new(vec![2.0]), 1.0));
    }

    #[test]
    fn buffer_ring_evicts_oldest_and_samples_in_range() {
        let mut buffer = StateBuffer::new(3);
        for i in 0..5 {
            buffer.push(State::new(vec![i as f64]));
        }
        assert_eq!(buffer.len(), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for s in buffer.sample_with_replacement(20, &mut rng) {
            assert!(s.coords[0] >= 2.0);
        }
    }
}
