//! Test oracles: exact cost-to-go by uniform-cost search, a greedy cover
//! construction, and seeded random shortest-path instances.

use cmax::core::{ActionId, PlanningModel, State, StateKey};
use cmax::value::ValuePredictor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet, VecDeque};

/// Exact optimal cost-to-go for every state reachable from `start`, keyed by
/// the model's state key. States that cannot reach a goal map to infinity.
pub struct CostToGo {
    values: HashMap<StateKey, f64>,
}

impl CostToGo {
    pub fn value(&self, key: &StateKey) -> f64 {
        self.values.get(key).copied().unwrap_or(f64::INFINITY)
    }

    /// Whether the state was enumerated (reachable from the start).
    pub fn contains(&self, key: &StateKey) -> bool {
        self.values.contains_key(key)
    }

    pub fn of<M: PlanningModel + ?Sized>(&self, model: &M, state: &State) -> f64 {
        self.value(&model.state_key(state))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

struct QueueItem {
    cost: f64,
    node: usize,
}

impl PartialEq for QueueItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for QueueItem {}

impl PartialOrd for QueueItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.node.cmp(&self.node))
    }
}

/// Enumerate the subgraph reachable from `start` under the model dynamics,
/// then run uniform-cost search backward from its goal states.
pub fn dijkstra_oracle<M: PlanningModel + ?Sized>(model: &M, start: &State) -> CostToGo {
    // forward closure
    let mut ids: HashMap<StateKey, usize> = HashMap::new();
    let mut states: Vec<State> = Vec::new();
    let mut queue = VecDeque::new();
    ids.insert(model.state_key(start), 0);
    states.push(start.clone());
    queue.push_back(0usize);
    let mut reverse_edges: Vec<Vec<(usize, f64)>> = vec![Vec::new()];
    let mut goals: Vec<usize> = Vec::new();

    while let Some(id) = queue.pop_front() {
        let state = states[id].clone();
        if model.is_goal(&state) {
            goals.push(id);
            continue; // absorbing; outgoing edges are self-loops
        }
        for a in 0..model.num_actions() {
            let action = ActionId(a);
            let succ = model.successor(&state, action);
            let key = model.state_key(&succ);
            let succ_id = match ids.get(&key) {
                Some(&existing) => existing,
                None => {
                    let new_id = states.len();
                    ids.insert(key, new_id);
                    states.push(succ.clone());
                    reverse_edges.push(Vec::new());
                    queue.push_back(new_id);
                    new_id
                }
            };
            if succ_id != id {
                reverse_edges[succ_id].push((id, model.cost(&state, action)));
            }
        }
    }

    // backward uniform-cost search from all goals
    let mut dist = vec![f64::INFINITY; states.len()];
    let mut heap = BinaryHeap::new();
    for &g in &goals {
        dist[g] = 0.0;
        heap.push(QueueItem { cost: 0.0, node: g });
    }
    while let Some(QueueItem { cost, node }) = heap.pop() {
        if cost > dist[node] {
            continue;
        }
        for &(prev, edge_cost) in &reverse_edges[node] {
            let candidate = cost + edge_cost;
            if candidate < dist[prev] {
                dist[prev] = candidate;
                heap.push(QueueItem {
                    cost: candidate,
                    node: prev,
                });
            }
        }
    }

    CostToGo {
        values: ids
            .into_iter()
            .map(|(key, id)| (key, dist[id]))
            .collect(),
    }
}

/// Size of a greedy cover of `points` by radius-`delta` balls centered at
/// points of the set, kept separate per action. At least the covering number
/// of the set.
pub fn greedy_cover(
    points: &[(State, ActionId)],
    delta: f64,
    metric: impl Fn(&State, &State) -> f64,
) -> usize {
    let mut covered = vec![false; points.len()];
    let mut picks = 0usize;
    for i in 0..points.len() {
        if covered[i] {
            continue;
        }
        picks += 1;
        let (center, action) = (&points[i].0, points[i].1);
        for (j, slot) in covered.iter_mut().enumerate() {
            if !*slot && points[j].1 == action && metric(&points[j].0, center) <= delta {
                *slot = true;
            }
        }
    }
    picks
}

/// A seeded deterministic shortest-path instance over an explicit graph.
/// Costs are multiples of 1/8 so oracle and search arithmetic agree exactly;
/// flagged pairs cost the state count. Every state can reach the goal.
pub struct GraphModel {
    pub successors: Vec<Vec<usize>>,
    pub base_costs: Vec<Vec<f64>>,
    pub goal: usize,
    pub flagged: HashSet<(usize, usize)>,
}

impl GraphModel {
    pub fn len(&self) -> usize {
        self.successors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.successors.is_empty()
    }

    pub fn action_count(&self) -> usize {
        self.successors[0].len()
    }

    pub fn state(&self, id: usize) -> State {
        State::new(vec![id as f64])
    }

    pub fn id(&self, state: &State) -> usize {
        state.coords[0] as usize
    }

    pub fn random(seed: u64) -> GraphModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(3..=50);
        let actions = rng.gen_range(2..=4);
        let goal = n - 1;
        let mut successors: Vec<Vec<usize>> =
            (0..n).map(|_| (0..actions).map(|_| rng.gen_range(0..n)).collect()).collect();
        let base_costs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..actions).map(|_| rng.gen_range(1..=8) as f64 / 8.0).collect())
            .collect();

        // rewire until the goal is reachable from every state
        loop {
            let reaching = Self::reaching_set(&successors, goal);
            if reaching.len() == n {
                break;
            }
            let targets: Vec<usize> = reaching.iter().copied().collect();
            for u in 0..n {
                if !reaching.contains(&u) {
                    let slot = rng.gen_range(0..actions);
                    successors[u][slot] = targets[rng.gen_range(0..targets.len())];
                }
            }
        }

        let mut flagged = HashSet::new();
        for u in 0..n {
            for a in 0..actions {
                if u != goal && rng.gen_range(0.0..1.0) < 0.15 {
                    flagged.insert((u, a));
                }
            }
        }
        GraphModel {
            successors,
            base_costs,
            goal,
            flagged,
        }
    }

    fn reaching_set(successors: &[Vec<usize>], goal: usize) -> HashSet<usize> {
        let n = successors.len();
        let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (u, row) in successors.iter().enumerate() {
            for &v in row {
                reverse[v].push(u);
            }
        }
        let mut seen = HashSet::from([goal]);
        let mut queue = VecDeque::from([goal]);
        while let Some(v) = queue.pop_front() {
            for &u in &reverse[v] {
                if seen.insert(u) {
                    queue.push_back(u);
                }
            }
        }
        seen
    }
}

impl PlanningModel for GraphModel {
    fn num_actions(&self) -> usize {
        self.action_count()
    }

    fn successor(&self, state: &State, action: ActionId) -> State {
        let id = self.id(state);
        if id == self.goal {
            return state.clone();
        }
        self.state(self.successors[id][action.0])
    }

    fn cost(&self, state: &State, action: ActionId) -> f64 {
        let id = self.id(state);
        if id == self.goal {
            0.0
        } else if self.flagged.contains(&(id, action.0)) {
            self.len() as f64
        } else {
            self.base_costs[id][action.0]
        }
    }

    fn is_goal(&self, state: &State) -> bool {
        self.id(state) == self.goal
    }

    fn state_key(&self, state: &State) -> StateKey {
        StateKey::quantize(state, 1.0)
    }
}

/// Cost-to-go estimate read from an oracle map, scaled by a factor in
/// [0, 1]. Scaled optima remain admissible and consistent.
pub struct ScaledOracleValues<'a, M: PlanningModel> {
    pub oracle: &'a CostToGo,
    pub model: &'a M,
    pub scale: f64,
}

impl<M: PlanningModel> ValuePredictor for ScaledOracleValues<'_, M> {
    fn predict(&self, state: &State) -> f64 {
        let exact = self.oracle.of(self.model, state);
        if exact.is_finite() {
            self.scale * exact
        } else {
            exact
        }
    }
}
