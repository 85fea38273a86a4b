//! Cost-to-go estimators.
//!
//! Both estimators share one contract: `predict` reads a frozen snapshot,
//! `apply_updates` ingests (state, new value) pairs produced by lookahead
//! searches. The tabular estimator stores exact per-state values over a
//! heuristic default; the kernel estimator fits an RBF-weighted residual on
//! top of the heuristic, which makes the squared-error fit exact at its
//! datapoints by construction.

use crate::core::{HeuristicFn, MetricFn, State, StateKey};
use crate::spatial::KdIndex;
use serde::Serialize;
use std::cell::RefCell;
use std::collections::HashMap;
use std::collections::VecDeque;
use std::sync::Arc;

/// Read side of an estimator. Lookahead searches only see this.
pub trait ValuePredictor {
    fn predict(&self, state: &State) -> f64;
}

/// Full estimator contract: predict plus batch ingestion of new values.
pub trait ValueEstimator: ValuePredictor {
    fn apply_updates(&mut self, updates: &[(State, f64)]);
}

impl<T: ValuePredictor + ?Sized> ValuePredictor for &T {
    fn predict(&self, state: &State) -> f64 {
        (**self).predict(state)
    }
}

/// Exact per-state values with a heuristic fallback for unseen states.
pub struct TabularValues {
    table: HashMap<StateKey, f64>,
    base: HeuristicFn,
    key_resolution: f64,
}

impl TabularValues {
    pub fn new(base: HeuristicFn, key_resolution: f64) -> Self {
        TabularValues {
            table: HashMap::new(),
            base,
            key_resolution,
        }
    }

    pub fn stored(&self) -> usize {
        self.table.len()
    }
}

impl ValuePredictor for TabularValues {
    fn predict(&self, state: &State) -> f64 {
        let key = StateKey::quantize(state, self.key_resolution);
        match self.table.get(&key) {
            Some(&v) => v,
            None => (self.base)(state),
        }
    }
}

impl ValueEstimator for TabularValues {
    fn apply_updates(&mut self, updates: &[(State, f64)]) {
        for (state, value) in updates {
            let key = StateKey::quantize(state, self.key_resolution);
            self.table.insert(key, *value);
        }
    }
}

/// RBF-kernel regression of a residual over the base heuristic.
///
/// `predict(s) = base(s) + sum_i w_i (target_i - base(x_i)) / sum_i w_i` with
/// `w_i = exp(-d(s, x_i)^2 / (2 gamma^2))`. When the total weight falls below
/// the floor (or the dataset is empty) the prediction falls back to the base.
///
/// Datapoints within `replace_radius` of an incoming update are replaced
/// (newest wins); beyond the capacity the oldest point is evicted. Queries go
/// through a KD-tree and ignore points farther than a few length scales,
/// where the weight is negligible.
struct KernelPoint {
    state: State,
    target: f64,
    /// `target - base(state)`, fixed at insertion so predictions never
    /// re-evaluate the base heuristic per neighbor.
    residual: f64,
}

pub struct KernelValueEstimator {
    points: VecDeque<KernelPoint>,
    index: KdIndex,
    /// Maps KD indices (which only grow) to live dataset slots.
    live: HashMap<usize, usize>,
    slot_to_kd: Vec<usize>,
    gamma: f64,
    base: HeuristicFn,
    metric: MetricFn,
    is_goal: Arc<dyn Fn(&State) -> bool + Send + Sync>,
    weight_floor: f64,
    capacity: usize,
    replace_radius: f64,
    /// Ratio of the metric to raw coordinate distance, used to translate the
    /// weight-cutoff radius into index units.
    metric_per_coord: f64,
}

/// Beyond this many length scales the RBF weight is below exp(-8) and the
/// point is skipped.
const CUTOFF_SCALES: f64 = 4.0;

pub const DEFAULT_WEIGHT_FLOOR: f64 = 1e-6;
pub const DEFAULT_CAPACITY: usize = 50_000;

impl KernelValueEstimator {
    pub fn new(
        gamma: f64,
        base: HeuristicFn,
        metric: MetricFn,
        is_goal: Arc<dyn Fn(&State) -> bool + Send + Sync>,
        replace_radius: f64,
    ) -> Self {
        assert!(gamma > 0.0, "length scale must be positive");
        KernelValueEstimator {
            points: VecDeque::new(),
            index: KdIndex::new(),
            live: HashMap::new(),
            slot_to_kd: Vec::new(),
            gamma,
            base,
            metric,
            is_goal,
            weight_floor: DEFAULT_WEIGHT_FLOOR,
            capacity: DEFAULT_CAPACITY,
            replace_radius,
            metric_per_coord: 1.0,
        }
    }

    /// Declare how the metric scales raw coordinate distance, so the index
    /// cutoff matches the weight cutoff when the two use different units.
    pub fn with_metric_scale(mut self, metric_per_coord: f64) -> Self {
        assert!(metric_per_coord > 0.0);
        self.metric_per_coord = metric_per_coord;
        self
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Cap the dataset (oldest-first eviction beyond it). A small cap keeps
    /// the fit recency-local, which matters when the length scale is large
    /// relative to the space.
    pub fn with_capacity(mut self, capacity: usize) -> Self {
        assert!(capacity >= 1);
        self.capacity = capacity;
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn weight(&self, a: &State, b: &State) -> f64 {
        let d = (self.metric)(a, b);
        (-d * d / (2.0 * self.gamma * self.gamma)).exp()
    }

    /// Slots of datapoints close enough to contribute weight.
    fn relevant(&self, state: &State) -> Vec<usize> {
        self.index
            .neighbors_within(
                &state.coords,
                CUTOFF_SCALES * self.gamma / self.metric_per_coord,
            )
            .into_iter()
            .filter_map(|kd| self.live.get(&kd).copied())
            .collect()
    }

    fn evict_oldest(&mut self) {
        if self.points.pop_front().is_some() {
            let kd = self.slot_to_kd.remove(0);
            self.live.remove(&kd);
            // surviving slots shift down by one
            let remap: Vec<(usize, usize)> = self
                .slot_to_kd
                .iter()
                .enumerate()
                .map(|(slot, &k)| (k, slot))
                .collect();
            self.live = remap.into_iter().collect();
        }
    }

    /// Dump of the dataset for trial traces and sweep reproducibility.
    pub fn snapshot(&self) -> KernelSnapshot {
        KernelSnapshot {
            gamma: self.gamma,
            points: self
                .points
                .iter()
                .map(|p| (p.state.coords.clone(), p.target))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelSnapshot {
    pub gamma: f64,
    pub points: Vec<(Vec<f64>, f64)>,
}

impl ValuePredictor for KernelValueEstimator {
    fn predict(&self, state: &State) -> f64 {
        if (self.is_goal)(state) {
            return 0.0;
        }
        let base = (self.base)(state);
        if self.points.is_empty() {
            return base;
        }
        let mut weight_sum = 0.0;
        let mut residual_sum = 0.0;
        for slot in self.relevant(state) {
            let point = &self.points[slot];
            let w = self.weight(state, &point.state);
            weight_sum += w;
            residual_sum += w * point.residual;
        }
        if weight_sum < self.weight_floor {
            base
        } else {
            base + residual_sum / weight_sum
        }
    }
}

impl ValueEstimator for KernelValueEstimator {
    fn apply_updates(&mut self, updates: &[(State, f64)]) {
        for (state, target) in updates {
            if (self.is_goal)(state) {
                continue;
            }
            let point = KernelPoint {
                state: state.clone(),
                target: *target,
                residual: target - (self.base)(state),
            };
            let replaced = self
                .index
                .neighbors_within(&state.coords, self.replace_radius)
                .into_iter()
                .find_map(|kd| self.live.get(&kd).copied());
            match replaced {
                Some(slot) => {
                    // the replacement is within the replace radius of the
                    // indexed position, so the index entry stays usable
                    self.points[slot] = point;
                }
                None => {
                    if self.points.len() == self.capacity {
                        self.evict_oldest();
                    }
                    let slot = self.points.len();
                    self.points.push_back(point);
                    let kd = self.index.insert(state.coords.clone());
                    self.live.insert(kd, slot);
                    self.slot_to_kd.push(kd);
                }
            }
        }
    }
}

/// Memoizing wrapper used while an estimator snapshot is frozen: repeated
/// predictions for the same key hit a cache. Single-threaded.
pub struct MemoizedValues<'a, V: ValuePredictor + ?Sized> {
    inner: &'a V,
    cache: RefCell<HashMap<StateKey, f64>>,
    key_resolution: f64,
}

impl<'a, V: ValuePredictor + ?Sized> MemoizedValues<'a, V> {
    pub fn new(inner: &'a V, key_resolution: f64) -> Self {
        MemoizedValues {
            inner,
            cache: RefCell::new(HashMap::new()),
            key_resolution,
        }
    }
}

impl<V: ValuePredictor + ?Sized> ValuePredictor for MemoizedValues<'_, V> {
    fn predict(&self, state: &State) -> f64 {
        let key = StateKey::quantize(state, self.key_resolution);
        if let Some(&v) = self.cache.borrow().get(&key) {
            return v;
        }
        let v = self.inner.predict(state);
        self.cache.borrow_mut().insert(key, v);
        v
    }
}
