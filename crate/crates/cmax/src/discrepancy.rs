//! Stores of discovered-incorrect transitions.
//!
//! Small discrete spaces track flagged pairs exactly; large spaces cover them
//! with radius-delta hyperspheres kept in one KD-tree per action, so a single
//! observed discrepancy penalizes its whole neighborhood. Stores only ever
//! grow within a trial.

use crate::core::{ActionId, DiscrepancyFlags, State};
use crate::spatial::KdIndex;
use serde::Serialize;
use std::collections::HashSet;

/// A transition is a discrepancy when observed and predicted successors
/// differ by more than the threshold (strictly).
pub fn detect_discrepancy(
    observed: &State,
    predicted: &State,
    metric: impl Fn(&State, &State) -> f64,
    threshold: f64,
) -> bool {
    metric(observed, predicted) > threshold
}

/// Exact set of flagged (state, action) pairs. Membership is exact equality
/// on coordinates, which is well-defined for the integer-valued states of
/// small discrete environments.
#[derive(Clone, Debug, Default)]
pub struct ExactDiscrepancySet {
    pairs: HashSet<(Vec<u64>, usize)>,
    entries: Vec<(State, ActionId)>,
}

fn bit_key(state: &State) -> Vec<u64> {
    state.coords.iter().map(|c| c.to_bits()).collect()
}

impl ExactDiscrepancySet {
    pub fn new() -> Self {
        ExactDiscrepancySet::default()
    }

    /// Flag `(state, action)`. Idempotent.
    pub fn record(&mut self, state: &State, action: ActionId) {
        if self.pairs.insert((bit_key(state), action.0)) {
            self.entries.push((state.clone(), action));
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(State, ActionId)] {
        &self.entries
    }
}

impl DiscrepancyFlags for ExactDiscrepancySet {
    fn is_flagged(&self, state: &State, action: ActionId) -> bool {
        self.pairs.contains(&(bit_key(state), action.0))
    }
}

/// Hypersphere cover of the incorrect set: one KD-tree of sphere centers per
/// action, all spheres sharing radius `delta`. A state is covered for an
/// action when it lies within `delta` (inclusive) of any center recorded for
/// that same action; centers for other actions never affect the query.
///
/// The index assumes the Euclidean metric over state coordinates.
#[derive(Clone, Debug)]
pub struct HypersphereStore {
    per_action: Vec<KdIndex>,
    delta: f64,
    xi: f64,
}

impl HypersphereStore {
    pub fn new(num_actions: usize, delta: f64, xi: f64) -> Self {
        assert!(delta > 0.0, "sphere radius must be positive");
        HypersphereStore {
            per_action: (0..num_actions).map(|_| KdIndex::new()).collect(),
            delta,
            xi,
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Place a sphere at `state` for `action`. Centers landing within
    /// delta/10 of an existing center for the same action are dropped; they
    /// would change coverage by at most that rounding.
    pub fn record(&mut self, state: &State, action: ActionId) {
        let index = &mut self.per_action[action.0];
        if !index.any_within(&state.coords, self.delta / 10.0) {
            index.insert(state.coords.clone());
        }
    }

    pub fn is_covered(&self, state: &State, action: ActionId) -> bool {
        self.per_action[action.0].any_within(&state.coords, self.delta)
    }

    /// Total sphere count across actions.
    pub fn len(&self) -> usize {
        self.per_action.iter().map(KdIndex::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn centers(&self, action: ActionId) -> Vec<Vec<f64>> {
        let index = &self.per_action[action.0];
        (0..index.len()).map(|i| index.point(i).to_vec()).collect()
    }

    /// Snapshot of the store for trial-trace dumps.
    pub fn snapshot(&self) -> HypersphereSnapshot {
        HypersphereSnapshot {
            delta: self.delta,
            xi: self.xi,
            centers_per_action: (0..self.per_action.len())
                .map(|a| self.centers(ActionId(a)))
                .collect(),
        }
    }
}

impl DiscrepancyFlags for HypersphereStore {
    fn is_flagged(&self, state: &State, action: ActionId) -> bool {
        self.is_covered(state, action)
    }
}

/// JSON-serializable contents of a [`HypersphereStore`].
#[derive(Clone, Debug, Serialize)]
pub struct HypersphereSnapshot {
    pub delta: f64,
    pub xi: f64,
    pub centers_per_action: Vec<Vec<Vec<f64>>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::euclidean;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn s(coords: &[f64]) -> State {
        State::new(coords.to_vec())
    }

    #[test]
    fn exact_record_is_idempotent() {
        let mut set = ExactDiscrepancySet::new();
        set.record(&s(&[2.0, 3.0]), ActionId(1));
        set.record(&s(&[2.0, 3.0]), ActionId(1));
        assert_eq!(set.len(), 1);
        assert!(set.is_flagged(&s(&[2.0, 3.0]), ActionId(1)));
        // pair membership: same state, other action stays unflagged
        assert!(!set.is_flagged(&s(&[2.0, 3.0]), ActionId(0)));
    }

    #[test]
    fn sphere_covers_its_center_per_action() {
        let mut store = HypersphereStore::new(4, 0.5, 0.0);
        store.record(&s(&[1.0, 1.0]), ActionId(2));
        assert!(store.is_covered(&s(&[1.0, 1.0]), ActionId(2)));
        assert!(!store.is_covered(&s(&[1.0, 1.0]), ActionId(1)));
    }

    #[test]
    fn sphere_dedup_within_tenth_of_delta() {
        let mut store = HypersphereStore::new(1, 1.0, 0.0);
        store.record(&s(&[0.0, 0.0]), ActionId(0));
        store.record(&s(&[0.05, 0.0]), ActionId(0));
        assert_eq!(store.len(), 1);
        store.record(&s(&[0.5, 0.0]), ActionId(0));
        assert_eq!(store.len(), 2);
    }

    #[test]
    fn coverage_boundary_is_inclusive() {
        let mut store = HypersphereStore::new(1, 0.25, 0.0);
        store.record(&s(&[0.0, 0.0]), ActionId(0));
        assert!(store.is_covered(&s(&[0.25, 0.0]), ActionId(0)));
        assert!(!store.is_covered(&s(&[0.25 + 1e-9, 0.0]), ActionId(0)));
    }

    #[test]
    fn index_matches_linear_scan_on_random_centers() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut store = HypersphereStore::new(2, 0.05, 0.0);
        let mut centers: Vec<(State, ActionId)> = Vec::new();
        for _ in 0..1000 {
            let c = s(&[rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]);
            let a = ActionId(rng.gen_range(0..2));
            store.record(&c, a);
            centers.push((c, a));
        }
        for _ in 0..1000 {
            let q = s(&[rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]);
            let a = ActionId(rng.gen_range(0..2));
            let expected = centers
                .iter()
                .filter(|(_, ca)| *ca == a)
                .any(|(c, _)| euclidean(c, &q) <= 0.05);
            assert_eq!(store.is_covered(&q, a), expected);
        }
    }

    #[test]
    fn cover_is_monotone_within_a_trial() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut store = HypersphereStore::new(1, 0.1, 0.0);
        let queries: Vec<State> = (0..50)
            .map(|_| s(&[rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]))
            .collect();
        let mut covered = vec![false; queries.len()];
        for _ in 0..200 {
            let c = s(&[rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]);
            store.record(&c, ActionId(0));
            for (i, q) in queries.iter().enumerate() {
                let now = store.is_covered(q, ActionId(0));
                assert!(now || !covered[i], "coverage regressed at {q:?}");
                covered[i] = now;
            }
        }
    }

    #[test]
    fn tiny_delta_reduces_to_the_exact_set() {
        // delta below the minimum inter-state distance of a lattice: the
        // sphere store flags exactly the recorded pairs
        let mut exact = ExactDiscrepancySet::new();
        let mut spheres = HypersphereStore::new(4, 0.5, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut recorded = Vec::new();
        for _ in 0..60 {
            let p = s(&[rng.gen_range(0..8) as f64, rng.gen_range(0..8) as f64]);
            let a = ActionId(rng.gen_range(0..4));
            exact.record(&p, a);
            spheres.record(&p, a);
            recorded.push((p, a));
        }
        for x in 0..8 {
            for y in 0..8 {
                for a in 0..4 {
                    let q = s(&[x as f64, y as f64]);
                    assert_eq!(
                        spheres.is_covered(&q, ActionId(a)),
                        exact.is_flagged(&q, ActionId(a))
                    );
                }
            }
        }
    }

    #[test]
    fn detect_uses_strict_inequality() {
        let metric = |a: &State, b: &State| euclidean(a, b);
        let p = s(&[0.5, 0.5]);
        assert!(!detect_discrepancy(&p, &p.clone(), metric, 0.01));
        // pushing-scale magnitudes: 0.015 observed error vs threshold 0.01
        assert!(detect_discrepancy(&s(&[0.515, 0.5]), &p, metric, 0.01));
        // exactly at the threshold: not a discrepancy (dyadic values so the
        // distance is exact in f64)
        assert!(!detect_discrepancy(&s(&[0.75, 0.5]), &p, metric, 0.25));
    }
}
