//! Comparison methods sharing the same lookahead machinery and trial record
//! schema: real-time search that patches the model's dynamics online, tabular
//! Q-learning, and a planner over a KNN-learned residual dynamics model.

use crate::agent::{update_estimator, DiscrepancyEvent, LargeConfig, SmallConfig, StateBuffer, TrialRecord, Transition};
use crate::core::{ActionId, Environment, PlanningModel, State, StateKey};
use crate::search::{lookahead, SearchError};
use crate::spatial::KdIndex;
use crate::value::{KernelValueEstimator, MemoizedValues, TabularValues, ValueEstimator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

fn bit_key(state: &State) -> Vec<u64> {
    state.coords.iter().map(|c| c.to_bits()).collect()
}

/// Model dynamics with an overlay of observed true successors. Costs are the
/// base costs — nothing is penalized; the dynamics themselves are edited.
pub struct PatchedModel<'a, E: Environment + ?Sized> {
    env: &'a E,
    overlay: &'a HashMap<(Vec<u64>, usize), State>,
}

impl<E: Environment + ?Sized> PlanningModel for PatchedModel<'_, E> {
    fn num_actions(&self) -> usize {
        self.env.num_actions()
    }

    fn successor(&self, state: &State, action: ActionId) -> State {
        match self.overlay.get(&(bit_key(state), action.0)) {
            Some(observed) => observed.clone(),
            None => self.env.model_step(state, action),
        }
    }

    fn cost(&self, state: &State, action: ActionId) -> f64 {
        self.env.cost(state, action)
    }

    fn is_goal(&self, state: &State) -> bool {
        self.env.is_goal(state)
    }

    fn state_key(&self, state: &State) -> StateKey {
        self.env.state_key(state)
    }
}

/// Real-time search baseline that repairs the model instead of penalizing
/// it: on a mismatch the observed successor is written into an overlay and
/// planning continues on the patched dynamics with tabular values.
pub fn run_rtaa_patching(env: &Arc<dyn Environment>, cfg: &SmallConfig) -> TrialRecord {
    let mut values = TabularValues::new(crate::core::heuristic_of(env.clone()), env.key_resolution());
    let mut overlay: HashMap<(Vec<u64>, usize), State> = HashMap::new();
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
            let model = PatchedModel {
                env: &**env,
                overlay: &overlay,
            };
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
        let patched_prediction = match overlay.get(&(bit_key(&state), action.0)) {
            Some(observed) => observed.clone(),
            None => env.model_step(&state, action),
        };
        let observed = env.true_step(&state, action);
        record.trajectory.push(Transition {
            from: state.coords.clone(),
            action: action.0,
            to: observed.coords.clone(),
        });
        record.steps = record.trajectory.len();
        if observed.coords != patched_prediction.coords {
            overlay.insert((bit_key(&state), action.0), observed.clone());
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

/// Tabular action values with a lazily evaluated initializer.
pub struct QTable {
    values: HashMap<(Vec<u64>, usize), f64>,
    init: Box<dyn Fn(&State, ActionId) -> f64 + Send + Sync>,
}

impl QTable {
    pub fn new(init: Box<dyn Fn(&State, ActionId) -> f64 + Send + Sync>) -> Self {
        QTable {
            values: HashMap::new(),
            init,
        }
    }

    pub fn get(&self, state: &State, action: ActionId) -> f64 {
        match self.values.get(&(bit_key(state), action.0)) {
            Some(&q) => q,
            None => (self.init)(state, action),
        }
    }

    pub fn set(&mut self, state: &State, action: ActionId, value: f64) {
        self.values.insert((bit_key(state), action.0), value);
    }

    pub fn min_over_actions(&self, state: &State, num_actions: usize) -> f64 {
        (0..num_actions)
            .map(|a| self.get(state, ActionId(a)))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QLearningConfig {
    pub learning_rate: f64,
    pub explore_prob: f64,
    pub max_steps: usize,
    /// Initialize action values from the model rollout of the heuristic
    /// (`c(s,a) + h(model_step(s,a))`) instead of from the bare cost.
    pub init_from_model: bool,
}

/// Model-free baseline: epsilon-greedy over tabular action values with a
/// one-step cost-minimizing backup. Never consults the model after
/// initialization.
pub fn run_qlearning(env: &Arc<dyn Environment>, cfg: &QLearningConfig, seed: u64) -> TrialRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let actions = env.num_actions();
    let init: Box<dyn Fn(&State, ActionId) -> f64 + Send + Sync> = if cfg.init_from_model {
        let env = env.clone();
        Box::new(move |s: &State, a: ActionId| {
            env.cost(s, a) + env.initial_heuristic(&env.model_step(s, a))
        })
    } else {
        let env = env.clone();
        Box::new(move |s: &State, a: ActionId| env.cost(s, a))
    };
    let mut table = QTable::new(init);
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

        let action = if rng.gen_range(0.0..1.0) < cfg.explore_prob {
            ActionId(rng.gen_range(0..actions))
        } else {
            // greedy argmin with random tie-breaking
            let qs: Vec<f64> = (0..actions).map(|a| table.get(&state, ActionId(a))).collect();
            let best = qs.iter().cloned().fold(f64::INFINITY, f64::min);
            let ties: Vec<usize> = (0..actions).filter(|&a| qs[a] == best).collect();
            ActionId(ties[rng.gen_range(0..ties.len())])
        };

        let observed = env.true_step(&state, action);
        let backup = env.cost(&state, action) + table.min_over_actions(&observed, actions);
        let old = table.get(&state, action);
        table.set(
            &state,
            action,
            (1.0 - cfg.learning_rate) * old + cfg.learning_rate * backup,
        );
        record.trajectory.push(Transition {
            from: state.coords.clone(),
            action: action.0,
            to: observed.coords.clone(),
        });
        record.steps = record.trajectory.len();
        state = observed;
    }
    record
}

/// Per-action dataset of observed next-state residuals; predictions correct
/// the model successor by the mean residual of neighbors within a radius.
pub struct KnnResidualModel {
    per_action: Vec<KdIndex>,
    residuals: Vec<Vec<Vec<f64>>>,
    pub radius: f64,
}

impl KnnResidualModel {
    pub fn new(num_actions: usize, radius: f64) -> Self {
        KnnResidualModel {
            per_action: (0..num_actions).map(|_| KdIndex::new()).collect(),
            residuals: vec![Vec::new(); num_actions],
            radius,
        }
    }

    /// Record the residual of one executed transition against the raw model.
    pub fn record(&mut self, state: &State, action: ActionId, observed: &State, predicted: &State) {
        let residual: Vec<f64> = observed
            .coords
            .iter()
            .zip(&predicted.coords)
            .map(|(o, p)| o - p)
            .collect();
        self.per_action[action.0].insert(state.coords.clone());
        self.residuals[action.0].push(residual);
    }

    pub fn predict<E: Environment + ?Sized>(&self, env: &E, state: &State, action: ActionId) -> State {
        let base = env.model_step(state, action);
        let neighbors = self.per_action[action.0].neighbors_within(&state.coords, self.radius);
        if neighbors.is_empty() {
            return base;
        }
        let mut corrected = base.coords.clone();
        let scale = 1.0 / neighbors.len() as f64;
        for n in &neighbors {
            for (c, r) in corrected.iter_mut().zip(&self.residuals[action.0][*n]) {
                *c += r * scale;
            }
        }
        State::new(corrected)
    }

    pub fn len(&self) -> usize {
        self.residuals.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The residual-corrected dynamics as a planning model (unpenalized costs).
pub struct ResidualCorrectedModel<'a, E: Environment + ?Sized> {
    pub env: &'a E,
    pub residuals: &'a KnnResidualModel,
}

impl<E: Environment + ?Sized> PlanningModel for ResidualCorrectedModel<'_, E> {
    fn num_actions(&self) -> usize {
        self.env.num_actions()
    }

    fn successor(&self, state: &State, action: ActionId) -> State {
        self.residuals.predict(self.env, state, action)
    }

    fn cost(&self, state: &State, action: ActionId) -> f64 {
        self.env.cost(state, action)
    }

    fn is_goal(&self, state: &State) -> bool {
        self.env.is_goal(state)
    }

    fn state_key(&self, state: &State) -> StateKey {
        self.env.state_key(state)
    }
}

/// Model-learning baseline: the large-space loop with the penalization
/// replaced by online residual learning. Search and value updates run on the
/// residual-corrected model with plain costs.
pub fn run_knn_residual(
    env: &Arc<dyn Environment>,
    cfg: &LargeConfig,
    estimator: &mut KernelValueEstimator,
    seed: u64,
) -> TrialRecord {
    let mut residuals = KnnResidualModel::new(env.num_actions(), cfg.sphere_radius);
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
            let model = ResidualCorrectedModel {
                env: &**env,
                residuals: &residuals,
            };
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
        record.trajectory.push(Transition {
            from: state.coords.clone(),
            action: action.0,
            to: observed.coords.clone(),
        });
        record.steps = record.trajectory.len();
        if crate::discrepancy::detect_discrepancy(
            &observed,
            &predicted,
            |a, b| env.metric(a, b),
            threshold,
        ) {
            record.discrepancies.push(DiscrepancyEvent {
                state: state.coords.clone(),
                action: action.0,
                timestep: record.steps,
            });
        }
        residuals.record(&state, action, &observed, &predicted);
        buffer.push(state.clone());
        {
            let model = ResidualCorrectedModel {
                env: &**env,
                residuals: &residuals,
            };
            update_estimator(&model, env.key_resolution(), estimator, &buffer, cfg, &mut rng);
        }
        state = observed;
    }
    record
}
