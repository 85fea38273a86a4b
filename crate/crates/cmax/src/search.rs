//! Limited-expansion lookahead search.
//!
//! Builds a bounded best-first tree under a planning model, picks the best
//! frontier leaf by cost-to-come plus estimated cost-to-go, and returns the
//! first action toward it along with new cost-to-go values for every expanded
//! state. The caller applies the value updates; the search itself never
//! mutates the estimator, so batches of lookaheads can run against one frozen
//! snapshot and their updates can be aggregated afterwards.

use crate::core::{ActionId, PlanningModel, State, StateKey};
use crate::value::ValuePredictor;
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use thiserror::Error;

/// Node of the lookahead tree: a state, its cost-to-come from the root, and
/// the tree edge it was reached by.
#[derive(Clone, Debug)]
pub struct SearchNode {
    pub state: State,
    pub cost_to_come: f64,
    pub parent: Option<usize>,
    pub parent_action: Option<ActionId>,
}

/// Outcome of one bounded search.
#[derive(Clone, Debug)]
pub struct LookaheadResult {
    /// First action on the tree path from the root to the best leaf.
    pub best_action: ActionId,
    /// The open-list node minimizing cost-to-come + cost-to-go (or a goal, if
    /// one was popped before the expansion budget ran out).
    pub best_leaf: State,
    /// New cost-to-go value for every expanded (closed) state.
    pub value_updates: Vec<(State, f64)>,
    pub expansions_used: usize,
}

#[derive(Debug, Error)]
pub enum SearchError {
    /// The open list ran dry with no goal found: every frontier state led
    /// back into the closed set.
    #[error("open list exhausted with no goal found after closing {closed} states")]
    DeadEnd { closed: usize },
}

/// Open-list entry. Priority is cost-to-come + cost-to-go; ties prefer larger
/// cost-to-come (deeper nodes), remaining ties break by insertion order.
struct OpenEntry {
    priority: f64,
    cost_to_come: f64,
    seq: u64,
    node: usize,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenEntry {}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpenEntry {
    // BinaryHeap is a max-heap; reverse so the smallest priority pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .priority
            .total_cmp(&self.priority)
            .then_with(|| self.cost_to_come.total_cmp(&other.cost_to_come))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct OpenList {
    heap: BinaryHeap<OpenEntry>,
    /// Current best open node per state key; entries that disagree are stale.
    live: HashMap<StateKey, usize>,
    seq: u64,
}

impl OpenList {
    fn new() -> Self {
        OpenList {
            heap: BinaryHeap::new(),
            live: HashMap::new(),
            seq: 0,
        }
    }

    fn push(&mut self, key: StateKey, node: usize, cost_to_come: f64, cost_to_go: f64) {
        self.live.insert(key, node);
        self.heap.push(OpenEntry {
            priority: cost_to_come + cost_to_go,
            cost_to_come,
            seq: self.seq,
            node,
        });
        self.seq += 1;
    }

    /// Pop the best non-stale entry, skipping states already closed.
    fn pop(&mut self, nodes: &[SearchNode], closed: &HashMap<StateKey, usize>, key_of: impl Fn(&State) -> StateKey) -> Option<usize> {
        while let Some(entry) = self.heap.pop() {
            let key = key_of(&nodes[entry.node].state);
            if closed.contains_key(&key) {
                continue;
            }
            match self.live.get(&key) {
                Some(&live_node) if live_node == entry.node => {
                    self.live.remove(&key);
                    return Some(entry.node);
                }
                _ => continue, // superseded by a cheaper path
            }
        }
        None
    }
}

/// Run one bounded lookahead from `root`.
///
/// Performs at most `budget` expansions under `model`, reading cost-to-go
/// from `values` without mutating it. If a goal is popped before the budget
/// is spent it becomes the best leaf immediately. The update value for every
/// closed state `s` is `g(best) + V(best) - g(s)`.
///
/// The root must not be a goal and `budget >= 1`.
pub fn lookahead<M: PlanningModel + ?Sized, V: ValuePredictor + ?Sized>(
    root: &State,
    model: &M,
    values: &V,
    budget: usize,
) -> Result<LookaheadResult, SearchError> {
    assert!(budget >= 1, "expansion budget must be at least 1");
    assert!(!model.is_goal(root), "lookahead called from a goal state");

    let mut nodes: Vec<SearchNode> = vec![SearchNode {
        state: root.clone(),
        cost_to_come: 0.0,
        parent: None,
        parent_action: None,
    }];
    let mut open = OpenList::new();
    let mut closed: HashMap<StateKey, usize> = HashMap::new();

    open.push(model.state_key(root), 0, 0.0, values.predict(root));

    let mut expansions = 0usize;
    let best = loop {
        let popped = open
            .pop(&nodes, &closed, |s| model.state_key(s))
            .ok_or(SearchError::DeadEnd {
                closed: closed.len(),
            })?;
        if model.is_goal(&nodes[popped].state) {
            break popped;
        }
        if expansions == budget {
            // budget spent: this pop is the best frontier leaf
            break popped;
        }

        let (state, cost_to_come) = (nodes[popped].state.clone(), nodes[popped].cost_to_come);
        for a in 0..model.num_actions() {
            let action = ActionId(a);
            let succ = model.successor(&state, action);
            let key = model.state_key(&succ);
            if closed.contains_key(&key) {
                continue;
            }
            let g = cost_to_come + model.cost(&state, action);
            let improves = match open.live.get(&key) {
                Some(&existing) => g < nodes[existing].cost_to_come,
                None => true,
            };
            if improves {
                let node = nodes.len();
                nodes.push(SearchNode {
                    state: succ.clone(),
                    cost_to_come: g,
                    parent: Some(popped),
                    parent_action: Some(action),
                });
                open.push(key, node, g, values.predict(&succ));
            }
        }
        closed.insert(model.state_key(&state), popped);
        expansions += 1;
    };

    let best_value = nodes[best].cost_to_come + values.predict(&nodes[best].state);
    let value_updates: Vec<(State, f64)> = closed
        .values()
        .map(|&id| (nodes[id].state.clone(), best_value - nodes[id].cost_to_come))
        .collect();

    // first action on the tree path root -> best
    let mut cursor = best;
    let mut first_action = None;
    while let Some(parent) = nodes[cursor].parent {
        first_action = nodes[cursor].parent_action;
        cursor = parent;
    }
    let best_action = first_action.expect("best leaf is never the root itself");

    Ok(LookaheadResult {
        best_action,
        best_leaf: nodes[best].state.clone(),
        value_updates,
        expansions_used: expansions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::PlanningModel;

    /// 1D corridor over cells 0..n-1 with actions [Left, Right], unit costs,
    /// boundary self-loops, and the last cell as the absorbing goal.
    struct Corridor {
        cells: i64,
    }

    const LEFT: ActionId = ActionId(0);
    const RIGHT: ActionId = ActionId(1);

    impl PlanningModel for Corridor {
        fn num_actions(&self) -> usize {
            2
        }

        fn successor(&self, state: &State, action: ActionId) -> State {
            let x = state.coords[0] as i64;
            if self.is_goal(state) {
                return state.clone();
            }
            let next = match action {
                LEFT => (x - 1).max(0),
                _ => (x + 1).min(self.cells - 1),
            };
            State::new(vec![next as f64])
        }

        fn cost(&self, state: &State, _action: ActionId) -> f64 {
            if self.is_goal(state) {
                0.0
            } else {
                1.0
            }
        }

        fn is_goal(&self, state: &State) -> bool {
            state.coords[0] as i64 == self.cells - 1
        }

        fn state_key(&self, state: &State) -> StateKey {
            StateKey::quantize(state, 1.0)
        }
    }

    /// Every action maps the state to itself.
    struct AllSelfLoops;

    impl PlanningModel for AllSelfLoops {
        fn num_actions(&self) -> usize {
            3
        }

        fn successor(&self, state: &State, _action: ActionId) -> State {
            state.clone()
        }

        fn cost(&self, _state: &State, _action: ActionId) -> f64 {
            1.0
        }

        fn is_goal(&self, _state: &State) -> bool {
            false
        }

        fn state_key(&self, state: &State) -> StateKey {
            StateKey::quantize(state, 1.0)
        }
    }

    struct DistanceToGoal {
        goal: f64,
    }

    impl ValuePredictor for DistanceToGoal {
        fn predict(&self, state: &State) -> f64 {
            (self.goal - state.coords[0]).abs()
        }
    }

    fn updates_map(result: &LookaheadResult) -> std::collections::HashMap<i64, f64> {
        result
            .value_updates
            .iter()
            .map(|(s, v)| (s.coords[0] as i64, *v))
            .collect()
    }

    #[test]
    fn corridor_single_expansion() {
        // 3-cell corridor {0,1,2}, goal 2, V0 = (2,1,0), one expansion:
        // expand 0, frontier holds the self-loop copy of 0 (g=1, f=3) and
        // cell 1 (g=1, f=2); best leaf 1, V(0) <- 1 + 1 - 0 = 2, go Right.
        let model = Corridor { cells: 3 };
        let values = DistanceToGoal { goal: 2.0 };
        let result = lookahead(&State::new(vec![0.0]), &model, &values, 1).unwrap();
        assert_eq!(result.best_action, RIGHT);
        assert_eq!(result.best_leaf.coords[0], 1.0);
        assert_eq!(result.expansions_used, 1);
        let updates = updates_map(&result);
        assert_eq!(updates.len(), 1);
        assert_eq!(updates[&0], 2.0);
    }

    #[test]
    fn corridor_budget_reaching_goal() {
        // with budget >= |S| the goal is popped and the closed-state values
        // match the optimal cost-to-go of the model
        let model = Corridor { cells: 3 };
        let values = DistanceToGoal { goal: 2.0 };
        let result = lookahead(&State::new(vec![0.0]), &model, &values, 3).unwrap();
        assert_eq!(result.best_action, RIGHT);
        assert_eq!(result.best_leaf.coords[0], 2.0);
        let updates = updates_map(&result);
        assert_eq!(updates[&0], 2.0);
        assert_eq!(updates[&1], 1.0);
    }

    #[test]
    fn fully_blocked_root_is_a_dead_end() {
        let model = AllSelfLoops;
        let values = DistanceToGoal { goal: 5.0 };
        let err = lookahead(&State::new(vec![0.0]), &model, &values, 4).unwrap_err();
        match err {
            SearchError::DeadEnd { closed } => assert_eq!(closed, 1),
        }
    }

    #[test]
    fn expansions_never_exceed_budget() {
        let model = Corridor { cells: 40 };
        let values = DistanceToGoal { goal: 39.0 };
        for budget in [1, 2, 5, 17] {
            let result = lookahead(&State::new(vec![3.0]), &model, &values, budget).unwrap();
            assert!(result.expansions_used <= budget);
        }
    }

    #[test]
    fn updates_cover_exactly_the_closed_list_and_never_decrease() {
        // consistent V0: updates are >= the pre-update estimate everywhere
        let model = Corridor { cells: 8 };
        let values = DistanceToGoal { goal: 7.0 };
        for budget in [1, 3, 6, 10] {
            let result = lookahead(&State::new(vec![2.0]), &model, &values, budget).unwrap();
            assert_eq!(result.value_updates.len(), result.expansions_used);
            for (s, v) in &result.value_updates {
                assert!(
                    *v >= values.predict(s) - 1e-12,
                    "update {v} dropped below estimate {} at {s:?}",
                    values.predict(s)
                );
            }
        }
    }
}
