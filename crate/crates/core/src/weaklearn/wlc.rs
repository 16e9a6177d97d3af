use serde::{Deserialize, Serialize};

use crate::domain::{validate_cost_matrix, CostKind, CostMatrix, Label, LabelSpace};
use crate::error::{Error, Result};

/// One logged round as seen by a single weak learner.
#[derive(Debug, Clone, PartialEq)]
pub struct WlcEntry {
    pub weight: f64,
    pub cost: CostMatrix,
    pub label: Label,
    pub predicted: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WlcReport {
    pub pass: bool,
    /// Weighted cost incurred: `Σ w_t C_t[y_t, ŷ_t]`.
    pub lhs: f64,
    /// Allowance: `(1−γ)/k · ‖w‖₁ + S`.
    pub rhs: f64,
    pub margin: f64,
}

/// Evaluates the online weak learning inequality on a logged run. This is
/// a diagnostic for one run, not a certificate for the learner.
pub fn empirical_wlc_check(log: &[WlcEntry], gamma: f64, excess: f64) -> Result<WlcReport> {
    let mut lhs = 0.0;
    let mut w_total = 0.0;
    let k = log.first().map_or(2, |e| e.cost.k());
    let space = LabelSpace::new(k).map_err(|e| malformed(0, e.to_string()))?;
    for (t, e) in log.iter().enumerate() {
        if !(0.0..=1.0).contains(&e.weight) {
            return Err(malformed(t, format!("weight {} outside [0, 1]", e.weight)));
        }
        if e.cost.kind() != CostKind::EorNormalized {
            return Err(malformed(t, "cost matrix is not edge-over-random normalized".into()));
        }
        let report = validate_cost_matrix(&e.cost, space).map_err(|err| malformed(t, err.to_string()))?;
        if !report.is_valid() {
            return Err(malformed(t, format!("invalid cost matrix: {:?}", report.violations)));
        }
        if !space.contains(e.label) || !space.contains(e.predicted) {
            return Err(malformed(t, "label outside the label space".into()));
        }
        lhs += e.weight * e.cost.cost(e.label, e.predicted);
        w_total += e.weight;
    }
    let rhs = (1.0 - gamma) / k as f64 * w_total + excess;
    Ok(WlcReport { pass: lhs <= rhs, lhs, rhs, margin: rhs - lhs })
}

fn malformed(entry: usize, reason: String) -> Error {
    Error::MalformedLog { entry, reason }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::EdgeDistribution;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn entry(w: f64, y: usize, p: usize) -> WlcEntry {
        WlcEntry {
            weight: w,
            cost: CostMatrix::uniform_eor(3),
            label: Label::from_index(y),
            predicted: Label::from_index(p),
        }
    }

    #[test]
    fn always_correct_passes_with_full_margin() {
        let log: Vec<WlcEntry> = (0..10).map(|t| entry(0.5, t % 3, t % 3)).collect();
        let r = empirical_wlc_check(&log, 0.1, 2.0).unwrap();
        assert!(r.pass);
        assert_eq!(r.lhs, 0.0);
        assert!((r.margin - (0.9 / 3.0 * 5.0 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_leave_margin_s() {
        let log: Vec<WlcEntry> = (0..10).map(|t| entry(0.0, 0, (t + 1) % 3)).collect();
        let r = empirical_wlc_check(&log, 0.2, 7.0).unwrap();
        assert!(r.pass);
        assert_eq!(r.margin, 7.0);
    }

    #[test]
    fn malformed_entries_are_reported() {
        let mut log = vec![entry(0.5, 0, 1), entry(1.5, 0, 1)];
        assert!(matches!(empirical_wlc_check(&log, 0.1, 1.0), Err(Error::MalformedLog { entry: 1, .. })));
        log[1] = entry(0.5, 0, 1);
        log[1].cost.set(0, 1, 0.7);
        assert!(matches!(empirical_wlc_check(&log, 0.1, 1.0), Err(Error::MalformedLog { entry: 1, .. })));
        log[1] = entry(0.5, 0, 1);
        log[1].cost = CostMatrix::zeros(3, CostKind::Gradient);
        assert!(empirical_wlc_check(&log, 0.1, 1.0).is_err());
    }

    #[test]
    fn planted_edge_oracle_passes_in_most_trials() {
        let (k, gamma, t_max) = (3usize, 0.1, 10_000);
        let excess = k as f64 * 100f64.ln() / gamma;
        let cost = CostMatrix::uniform_eor(k);
        let mut passes = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let log: Vec<WlcEntry> = (0..t_max)
                .map(|_| {
                    let y = Label::from_index(rng.gen_range(0..k));
                    let d = EdgeDistribution::new(k, 2.0 * gamma, y).unwrap();
                    WlcEntry { weight: 1.0, cost: cost.clone(), label: y, predicted: d.sample(&mut rng) }
                })
                .collect();
            passes += usize::from(empirical_wlc_check(&log, gamma, excess).unwrap().pass);
        }
        assert!(passes >= 99, "{passes}");
    }
}
