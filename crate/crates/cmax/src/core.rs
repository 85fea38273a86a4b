//! Domain types shared by every module: states, actions, the environment and
//! planning-model contracts, and the penalized-cost transform.

use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

/// A point in an environment's state space.
///
/// Coordinates are a fixed-length vector whose interpretation is owned by the
/// environment: discrete environments store integer bin coordinates (exact in
/// `f64`), continuous environments store reals. Discrete states compare by
/// exact equality; continuous states are only ever compared through a metric
/// or a quantized [`StateKey`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub coords: Vec<f64>,
}

impl State {
    pub fn new(coords: Vec<f64>) -> Self {
        State { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl From<Vec<f64>> for State {
    fn from(coords: Vec<f64>) -> Self {
        State { coords }
    }
}

/// Index into an environment's (small, fixed) action list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionId(pub usize);

impl ActionId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Hashable identity of a state at a declared resolution.
///
/// Duplicate detection in searches and exact membership in discrepancy sets
/// both go through this key. Discrete environments use resolution 1.0 so the
/// key is the integer coordinates themselves; continuous environments snap to
/// a fraction of the discrepancy threshold.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StateKey(pub Vec<i64>);

impl StateKey {
    pub fn quantize(state: &State, resolution: f64) -> Self {
        StateKey(
            state
                .coords
                .iter()
                .map(|&c| (c / resolution).round() as i64)
                .collect(),
        )
    }
}

/// Shared heuristic closure: initial cost-to-go estimate for a state.
pub type HeuristicFn = Arc<dyn Fn(&State) -> f64 + Send + Sync>;

/// Shared metric closure between two states.
pub type MetricFn = Arc<dyn Fn(&State, &State) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum ContractError {
    #[error("state {state:?} is outside the environment bounds")]
    OutOfBounds { state: Vec<f64> },
}

/// The environment contract: true dynamics, modeled dynamics, cost, goals,
/// metric, and the initial heuristic.
///
/// Invariants every implementation upholds:
/// - goals are absorbing and cost-free in both the true and modeled dynamics;
/// - `cost(s, a) > 0` for non-goal `s`, with all costs in `[0, 1]`;
/// - the metric is symmetric, non-negative, and zero exactly on equal inputs;
/// - `initial_heuristic` is zero at goals.
pub trait Environment: Send + Sync {
    /// State dimension.
    fn dim(&self) -> usize;

    /// Number of discrete actions.
    fn num_actions(&self) -> usize;

    /// Real-world dynamics. Only the execution loop may call this.
    fn true_step(&self, state: &State, action: ActionId) -> State;

    /// Modeled dynamics used for planning.
    fn model_step(&self, state: &State, action: ActionId) -> State;

    /// Known cost function, shared by the true environment and the model.
    fn cost(&self, state: &State, action: ActionId) -> f64;

    fn is_goal(&self, state: &State) -> bool;

    /// Distance between two states.
    fn metric(&self, a: &State, b: &State) -> f64;

    /// Size of the state space; for continuous spaces, the effective size
    /// (cell count of the discrepancy-resolution discretization). Used as the
    /// cost penalty on flagged transitions.
    fn state_space_size(&self) -> f64;

    /// Admissible, consistent initial cost-to-go estimate for the model.
    fn initial_heuristic(&self, state: &State) -> f64;

    fn start_state(&self) -> State;

    fn contains(&self, state: &State) -> bool;

    /// Resolution for [`StateKey`] quantization: 1.0 for bin lattices, a
    /// fraction of the discrepancy threshold for continuous spaces.
    fn key_resolution(&self) -> f64 {
        1.0
    }

    /// Whether states live on an integer lattice. Discrepancy thresholds are
    /// pulled in by half a bin on lattices so unit mismatches trigger.
    fn is_integer_lattice(&self) -> bool {
        false
    }

    fn state_key(&self, state: &State) -> StateKey {
        StateKey::quantize(state, self.key_resolution())
    }
}

/// The environment's initial heuristic as a shareable closure.
pub fn heuristic_of(env: Arc<dyn Environment>) -> HeuristicFn {
    Arc::new(move |s: &State| env.initial_heuristic(s))
}

/// The environment's metric as a shareable closure.
pub fn metric_of(env: Arc<dyn Environment>) -> MetricFn {
    Arc::new(move |a: &State, b: &State| env.metric(a, b))
}

/// The environment's goal predicate as a shareable closure.
pub fn goal_predicate_of(env: Arc<dyn Environment>) -> Arc<dyn Fn(&State) -> bool + Send + Sync> {
    Arc::new(move |s: &State| env.is_goal(s))
}

/// What a lookahead search needs from a model: successors, costs, goals, and
/// a hashable state identity. Implemented by the penalized model, by the raw
/// and true-dynamics views, and by the baselines' patched/residual models.
pub trait PlanningModel: Sync {
    fn num_actions(&self) -> usize;
    fn successor(&self, state: &State, action: ActionId) -> State;
    fn cost(&self, state: &State, action: ActionId) -> f64;
    fn is_goal(&self, state: &State) -> bool;
    fn state_key(&self, state: &State) -> StateKey;
}

/// Membership test for discovered-incorrect transitions. The penalized model
/// only needs the flag; recording is on the concrete store types.
pub trait DiscrepancyFlags: Sync {
    fn is_flagged(&self, state: &State, action: ActionId) -> bool;
}

/// Cost transform of the penalized model: the penalty replaces the base cost
/// exactly when the store flags the pair.
pub fn penalized_cost<D: DiscrepancyFlags + ?Sized>(
    state: &State,
    action: ActionId,
    flags: &D,
    base: f64,
    penalty: f64,
) -> f64 {
    if flags.is_flagged(state, action) {
        penalty
    } else {
        base
    }
}

/// Dispatch to the model dynamics, with a bounds check on the input state.
pub fn model_successor<E: Environment + ?Sized>(
    env: &E,
    state: &State,
    action: ActionId,
) -> Result<State, ContractError> {
    if !env.contains(state) {
        return Err(ContractError::OutOfBounds {
            state: state.coords.clone(),
        });
    }
    Ok(env.model_step(state, action))
}

/// A model whose dynamics are untouched and whose cost is inflated to the
/// state-space size on every flagged pair.
pub struct PenalizedModel<'a, E: Environment + ?Sized, D: DiscrepancyFlags + ?Sized> {
    env: &'a E,
    flags: &'a D,
}

impl<'a, E: Environment + ?Sized, D: DiscrepancyFlags + ?Sized> PenalizedModel<'a, E, D> {
    pub fn new(env: &'a E, flags: &'a D) -> Self {
        PenalizedModel { env, flags }
    }
}

impl<E: Environment + ?Sized, D: DiscrepancyFlags + ?Sized> PlanningModel
    for PenalizedModel<'_, E, D>
{
    fn num_actions(&self) -> usize {
        self.env.num_actions()
    }

    fn successor(&self, state: &State, action: ActionId) -> State {
        self.env.model_step(state, action)
    }

    fn cost(&self, state: &State, action: ActionId) -> f64 {
        penalized_cost(
            state,
            action,
            self.flags,
            self.env.cost(state, action),
            self.env.state_space_size(),
        )
    }

    fn is_goal(&self, state: &State) -> bool {
        self.env.is_goal(state)
    }

    fn state_key(&self, state: &State) -> StateKey {
        self.env.state_key(state)
    }
}

/// The model dynamics with unpenalized costs. Used by baselines and oracles.
pub struct RawModel<'a, E: Environment + ?Sized> {
    pub env: &'a E,
}

impl<E: Environment + ?Sized> PlanningModel for RawModel<'_, E> {
    fn num_actions(&self) -> usize {
        self.env.num_actions()
    }

    fn successor(&self, state: &State, action: ActionId) -> State {
        self.env.model_step(state, action)
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

/// The true dynamics as a planning model. Test oracles plan on this; the
/// algorithms under test never do.
pub struct TrueModel<'a, E: Environment + ?Sized> {
    pub env: &'a E,
}

impl<E: Environment + ?Sized> PlanningModel for TrueModel<'_, E> {
    fn num_actions(&self) -> usize {
        self.env.num_actions()
    }

    fn successor(&self, state: &State, action: ActionId) -> State {
        self.env.true_step(state, action)
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

/// Euclidean distance between coordinate vectors.
pub fn euclidean(a: &State, b: &State) -> f64 {
    a.coords
        .iter()
        .zip(&b.coords)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Manhattan distance between coordinate vectors.
pub fn manhattan(a: &State, b: &State) -> f64 {
    a.coords
        .iter()
        .zip(&b.coords)
        .map(|(x, y)| (x - y).abs())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    struct SetFlags(HashSet<(Vec<i64>, usize)>);

    impl DiscrepancyFlags for SetFlags {
        fn is_flagged(&self, state: &State, action: ActionId) -> bool {
            let key: Vec<i64> = state.coords.iter().map(|&c| c as i64).collect();
            self.0.contains(&(key, action.0))
        }
    }

    fn flags_of(pairs: &[(&[i64], usize)]) -> SetFlags {
        SetFlags(
            pairs
                .iter()
                .map(|(coords, action)| (coords.to_vec(), *action))
                .collect(),
        )
    }

    #[test]
    fn penalized_cost_flagged_pair_costs_state_space_size() {
        let flags = flags_of(&[(&[3, 4], 1)]);
        let s = State::new(vec![3.0, 4.0]);
        // 100x100 grid
        assert_eq!(penalized_cost(&s, ActionId(1), &flags, 1.0, 10_000.0), 10_000.0);
    }

    #[test]
    fn penalized_cost_goal_not_flagged_is_zero() {
        let flags = flags_of(&[]);
        let g = State::new(vec![7.0, 7.0]);
        assert_eq!(penalized_cost(&g, ActionId(0), &flags, 0.0, 64.0), 0.0);
    }

    #[test]
    fn penalized_cost_unflagged_returns_base() {
        let flags = flags_of(&[(&[3, 4], 1)]);
        let s = State::new(vec![3.0, 4.0]);
        // same state, different action: not flagged
        assert_eq!(penalized_cost(&s, ActionId(0), &flags, 1.0, 10_000.0), 1.0);
    }

    #[test]
    fn penalized_cost_monotone_in_store() {
        // flagging more pairs never decreases any cost
        let sparse = flags_of(&[(&[1, 1], 0)]);
        let dense = flags_of(&[(&[1, 1], 0), (&[2, 2], 1), (&[0, 0], 0)]);
        for coords in [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [5.0, 5.0]] {
            for a in 0..2 {
                let s = State::new(coords.to_vec());
                let before = penalized_cost(&s, ActionId(a), &sparse, 1.0, 100.0);
                let after = penalized_cost(&s, ActionId(a), &dense, 1.0, 100.0);
                assert!(after >= before);
            }
        }
    }

    #[test]
    fn state_key_quantizes_at_resolution() {
        let s = State::new(vec![0.1049, 0.200_1]);
        assert_eq!(StateKey::quantize(&s, 0.005), StateKey(vec![21, 40]));
        let t = State::new(vec![3.0, -2.0]);
        assert_eq!(StateKey::quantize(&t, 1.0), StateKey(vec![3, -2]));
    }

    #[test]
    fn metric_axioms_on_sampled_pairs() {
        let pts: Vec<State> = (0..20)
            .map(|i| {
                let x = (i * 7 % 13) as f64 * 0.3 - 1.0;
                let y = (i * 5 % 11) as f64 * 0.7 - 2.0;
                State::new(vec![x, y])
            })
            .collect();
        for a in &pts {
            for b in &pts {
                for d in [euclidean(a, b), manhattan(a, b)] {
                    assert!(d >= 0.0);
                }
                assert_eq!(euclidean(a, b), euclidean(b, a));
                assert_eq!(manhattan(a, b), manhattan(b, a));
                if a.coords == b.coords {
                    assert_eq!(euclidean(a, b), 0.0);
                } else {
                    assert!(euclidean(a, b) > 0.0);
                    assert!(manhattan(a, b) > 0.0);
                }
            }
        }
    }
}
