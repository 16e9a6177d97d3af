//! Cross-module properties exercised through the public API only.

use mcboost::mbbm::{MbbmBooster, MbbmConfig, WeightScaling};
use mcboost::olm::{LossVariant, OlmBooster, OlmConfig};
use mcboost::potential::{weight_norm_bound, PotentialTable, DEFAULT_WEIGHT_BOUND_CONSTANT};
use mcboost::weaklearn::{AdversaryMode, AdversaryStream, EdgeOracleLearner, OnlineStump};
use mcboost::{validate_cost_matrix, CostKind, Label, LabelSpace};
use proptest::prelude::*;

fn oracles(space: LabelSpace, n: usize) -> Vec<EdgeOracleLearner> {
    (1..=n).map(|i| EdgeOracleLearner::new(i, space).unwrap()).collect()
}

fn votes(k: usize, draws: &[usize]) -> Vec<i64> {
    let mut s = vec![0; k];
    for &d in draws {
        s[d % k] += 1;
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn mbbm_cost_matrices_are_valid(
        k in 2usize..=5,
        n in 1usize..=12,
        gamma in 0.01f64..0.49,
        i_frac in 0.0f64..1.0,
        draws in prop::collection::vec(0usize..5, 0..12),
    ) {
        let space = LabelSpace::new(k).unwrap();
        let booster = MbbmBooster::new(space, &MbbmConfig::new(n, gamma), oracles(space, n)).unwrap();
        let i = 1 + ((n - 1) as f64 * i_frac) as usize;
        let s = votes(k, &draws[..draws.len().min(i - 1)]);
        let (c, raw) = booster.cost_matrix(i, &s).unwrap();
        prop_assert_eq!(c.kind(), CostKind::EorNormalized);
        let report = validate_cost_matrix(&c, space).unwrap();
        prop_assert!(report.is_valid(), "{:?}", report.violations);
        let bound = weight_norm_bound(k, gamma, n, i, DEFAULT_WEIGHT_BOUND_CONSTANT);
        for w in raw {
            prop_assert!(w >= 0.0 && w <= bound + 1e-12, "weight {} above {}", w, bound);
        }
    }

    #[test]
    fn olm_cost_matrices_are_valid_gradients(
        s in prop::collection::vec(-10.0f64..10.0, 2..7),
        variant in 0usize..3,
    ) {
        let loss = [LossVariant::Logistic, LossVariant::Exponential, LossVariant::SquareHinge][variant];
        let space = LabelSpace::new(s.len()).unwrap();
        let c = loss.cost_matrix(&s);
        prop_assert_eq!(c.kind(), CostKind::Gradient);
        let report = validate_cost_matrix(&c, space).unwrap();
        prop_assert!(report.is_valid(), "{:?}", report.violations);
    }

    #[test]
    fn raw_weights_are_finite_and_nonnegative(seed in any::<u64>(), scaling in 0usize..3) {
        let space = LabelSpace::new(3).unwrap();
        let scaling = [WeightScaling::Trivial, WeightScaling::norm_bound_default(), WeightScaling::RunningMax][scaling];
        let cfg = MbbmConfig { scaling, ..MbbmConfig::new(6, 0.2) };
        let mut booster = MbbmBooster::new(space, &cfg, oracles(space, 6)).unwrap();
        let stream = AdversaryStream::new(space, 6, AdversaryMode::ConstantEdge { edge: 0.2 }, seed).unwrap();
        for ex in stream.take(50) {
            let rec = booster.step(&ex.features, ex.label).unwrap();
            prop_assert!(rec.weights.iter().all(|w| w.is_finite() && *w >= 0.0));
        }
    }
}

#[test]
fn potentials_are_symmetric_in_the_true_label() {
    let table = PotentialTable::new(4, 0.2).unwrap();
    let base = table.exact(Label::from_index(0), 7, &[1, 0, 2, 0]).unwrap();
    // relabelling that maps label 1 to label 3 and back
    let moved = table.exact(Label::from_index(2), 7, &[2, 0, 1, 0]).unwrap();
    assert_eq!(base, moved);
}

#[test]
fn boosters_replay_identically_from_their_seeds() {
    let space = LabelSpace::new(3).unwrap();
    let run_olm = || {
        let mut cfg = OlmConfig::new(8, LossVariant::Logistic);
        cfg.seed = 99;
        let mut b = OlmBooster::new(space, &cfg, (0..8).map(|_| OnlineStump::new(space, 8)).collect()).unwrap();
        let stream = AdversaryStream::new(space, 8, AdversaryMode::ConstantEdge { edge: 0.2 }, 4).unwrap();
        stream.take(300).map(|ex| b.step(&ex.features, ex.label).unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(run_olm(), run_olm());

    let run_mbbm = || {
        let mut b = MbbmBooster::new(space, &MbbmConfig::new(8, 0.1), oracles(space, 8)).unwrap();
        let stream = AdversaryStream::new(space, 8, AdversaryMode::ConstantEdge { edge: 0.2 }, 4).unwrap();
        stream.take(300).map(|ex| b.step(&ex.features, ex.label).unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(run_mbbm(), run_mbbm());
}

#[test]
fn shared_tables_across_threads_agree_with_a_fresh_one() {
    let shared = std::sync::Arc::new(PotentialTable::new(3, 0.25).unwrap());
    let handles: Vec<_> = (0..4)
        .map(|t| {
            let table = shared.clone();
            std::thread::spawn(move || {
                (0..20).map(|n| table.exact(Label::from_index(t % 3), n, &[0, 0, 0]).unwrap()).collect::<Vec<_>>()
            })
        })
        .collect();
    let fresh = PotentialTable::new(3, 0.25).unwrap();
    for (t, h) in handles.into_iter().enumerate() {
        let got = h.join().unwrap();
        for (n, v) in got.into_iter().enumerate() {
            assert_eq!(v, fresh.exact(Label::from_index(t % 3), n, &[0, 0, 0]).unwrap());
        }
    }
}
