//! Quick invariant suites behind the `check` subcommand. Each suite draws
//! its own seeded random cases and reports the worst deviation it saw.

use mcboost::mbbm::{MbbmBooster, MbbmConfig};
use mcboost::olm::LossVariant;
use mcboost::potential::{asymptotic_error_bound, potential_multinomial, PotentialTable, DEFAULT_STATE_CAP};
use mcboost::weaklearn::EdgeOracleLearner;
use mcboost::{validate_cost_matrix, EdgeDistribution, Label, LabelSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

pub fn run_all(seed: u64) -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        potential_recurrence(seed)?,
        potential_multinomial_agreement(seed)?,
        error_bound_grid()?,
        mbbm_cost_validity(seed)?,
        olm_cost_validity(seed)?,
        gradient_coherence(seed),
    ])
}

fn random_votes(rng: &mut ChaCha8Rng, k: usize, total: i64) -> Vec<i64> {
    let mut s = vec![0; k];
    for _ in 0..rng.gen_range(0..=total) {
        s[rng.gen_range(0..k)] += 1;
    }
    s
}

fn potential_recurrence(seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..300 {
        let k = rng.gen_range(2..=4);
        let gamma = [0.0, 0.1, 0.3, 0.45][rng.gen_range(0..4)];
        let i = rng.gen_range(0..8);
        let r = Label::from_index(rng.gen_range(0..k));
        let s = random_votes(&mut rng, k, 6);
        let table = PotentialTable::new(k, gamma)?;
        let masses = EdgeDistribution::new(k, gamma, r)?.masses();
        let mut expected = 0.0;
        for (l, m) in masses.iter().enumerate() {
            let mut next = s.clone();
            next[l] += 1;
            expected += m * table.exact(r, i, &next)?;
        }
        worst = worst.max((table.exact(r, i + 1, &s)? - expected).abs());
    }
    Ok(CheckOutcome { name: "potential recurrence", pass: worst <= 1e-12, detail: format!("max |Δ| = {worst:.3e}") })
}

fn potential_multinomial_agreement(seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
    let mut worst = 0.0f64;
    for _ in 0..300 {
        let k = rng.gen_range(2..=4);
        let gamma = rng.gen_range(0.0..0.49);
        let i = rng.gen_range(0..10);
        let r = Label::from_index(rng.gen_range(0..k));
        let s = random_votes(&mut rng, k, 6);
        let dp = PotentialTable::new(k, gamma)?.exact(r, i, &s)?;
        worst = worst.max((dp - potential_multinomial(k, gamma, r, i, &s)?).abs());
    }
    Ok(CheckOutcome {
        name: "potential vs multinomial sum",
        pass: worst <= 1e-12,
        detail: format!("max |Δ| = {worst:.3e}"),
    })
}

fn error_bound_grid() -> Result<CheckOutcome> {
    let mut tightest = f64::INFINITY;
    let mut pass = true;
    for k in [2, 3, 5] {
        for gamma in [0.05, 0.1, 0.3] {
            let table = PotentialTable::with_cap(k, gamma, DEFAULT_STATE_CAP)?;
            for n in (5..=50).step_by(5) {
                let phi = table.exact(Label::from_index(0), n, &vec![0; k])?;
                let bound = asymptotic_error_bound(k, gamma, n);
                pass &= phi <= bound;
                tightest = tightest.min(bound - phi);
            }
        }
    }
    Ok(CheckOutcome { name: "error bound grid", pass, detail: format!("min slack = {tightest:.4e}") })
}

fn mbbm_cost_validity(seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
    let mut bad = 0;
    let mut total = 0;
    for _ in 0..40 {
        let k = rng.gen_range(2..=5);
        let n = rng.gen_range(1..=15);
        let gamma = rng.gen_range(0.01..0.49);
        let space = LabelSpace::new(k)?;
        let learners = (1..=n).map(|i| EdgeOracleLearner::new(i, space)).collect::<mcboost::Result<Vec<_>>>()?;
        let booster = MbbmBooster::new(space, &MbbmConfig::new(n, gamma), learners)?;
        for _ in 0..10 {
            let i = rng.gen_range(1..=n);
            let s = random_votes(&mut rng, k, (i - 1) as i64);
            let (c, _) = booster.cost_matrix(i, &s)?;
            total += 1;
            bad += usize::from(!validate_cost_matrix(&c, space)?.is_valid());
        }
    }
    Ok(CheckOutcome {
        name: "boost-by-majority cost matrices",
        pass: bad == 0,
        detail: format!("{bad}/{total} invalid"),
    })
}

fn olm_cost_validity(seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
    let mut bad = 0;
    let mut total = 0;
    for loss in [LossVariant::Logistic, LossVariant::Exponential, LossVariant::SquareHinge] {
        for _ in 0..200 {
            let k = rng.gen_range(2..=6);
            let s: Vec<f64> = (0..k).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let space = LabelSpace::new(k)?;
            total += 1;
            bad += usize::from(!validate_cost_matrix(&loss.cost_matrix(&s), space)?.is_valid());
        }
    }
    Ok(CheckOutcome { name: "adaptive cost matrices", pass: bad == 0, detail: format!("{bad}/{total} invalid") })
}

fn gradient_coherence(seed: u64) -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 4);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for loss in [LossVariant::Logistic, LossVariant::Exponential, LossVariant::SquareHinge] {
        let mut done = 0;
        while done < 200 {
            let k = rng.gen_range(2..=5);
            let s: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = Label::from_index(rng.gen_range(0..k));
            let l = Label::from_index(rng.gen_range(0..k));
            let alpha = rng.gen_range(-1.0..1.0);
            let f = |a: f64| {
                let mut t = s.clone();
                t[l.index()] += a;
                loss.loss(y, &t)
            };
            if loss == LossVariant::SquareHinge && near_hinge_kink(&s, y, l, alpha) {
                continue;
            }
            let fd = (f(alpha + h) - f(alpha - h)) / (2.0 * h);
            let g = loss.gradient(alpha, &s, l, y);
            let scale = g.abs().max(fd.abs());
            if scale > 1e-8 {
                worst = worst.max((g - fd).abs() / scale);
            }
            done += 1;
        }
    }
    CheckOutcome {
        name: "gradient vs central differences",
        pass: worst <= 1e-6,
        detail: format!("max rel err = {worst:.3e}"),
    }
}

/// True when some hinge argument `s_j − s_y + 1` at `α` is within 1e-3 of 0.
fn near_hinge_kink(s: &[f64], y: Label, l: Label, alpha: f64) -> bool {
    let mut t = s.to_vec();
    t[l.index()] += alpha;
    let sy = t[y.index()];
    t.iter().enumerate().any(|(j, &sj)| j != y.index() && (sj - sy + 1.0).abs() < 1e-3)
}
