use serde::{Deserialize, Serialize};

use super::{flip_delta, SolveResult, SolverId, SparseRows, ENERGY_TOL};
use crate::error::{Error, Result};
use crate::qubo::{energy_unchecked, Assignment, Qubo};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TabuConfig {
    /// Number of steps a flipped variable stays tabu.
    pub tenure: usize,
    /// Stop after this many consecutive steps without a new best.
    pub max_steps: usize,
}

impl Default for TabuConfig {
    fn default() -> Self {
        Self {
            tenure: 20,
            max_steps: 500,
        }
    }
}

/// Steepest single-flip tabu search from `start`.
///
/// Each step takes the best non-tabu flip (lowest index on ties), or a tabu
/// flip when it beats the best energy found so far. Returns the best state
/// visited, so the result never has higher energy than `start`.
pub fn tabu_search(qubo: &Qubo, start: &Assignment, cfg: &TabuConfig) -> Result<SolveResult> {
    if start.len() != qubo.n {
        return Err(Error::Dimension {
            expected: qubo.n,
            found: start.len(),
        });
    }
    let rows = SparseRows::new(qubo);
    let (best, start_e) = tabu_rows(&rows, qubo, start.bits.clone(), cfg);
    let result = SolveResult::new(qubo, Assignment::from(best), Vec::new(), 0, SolverId::Tabu);
    Ok(SolveResult {
        energy_trace: vec![start_e, result.best_energy],
        ..result
    })
}

/// Returns the best state and the start energy.
pub(crate) fn tabu_rows(rows: &SparseRows, qubo: &Qubo, mut bits: Vec<bool>, cfg: &TabuConfig) -> (Vec<bool>, f64) {
    let n = bits.len();
    let start_e = energy_unchecked(qubo, &bits);
    if n == 0 {
        return (bits, start_e);
    }
    let tenure = cfg.tenure.min(n - 1);
    let mut fields = rows.local_fields(&bits);
    let mut e = start_e;
    let mut best = bits.clone();
    let mut best_e = e;
    // flips applied since `best` was last synchronised with `bits`
    let mut journal: Vec<usize> = Vec::new();
    let mut tabu_until = vec![0usize; n];
    let mut stale = 0usize;
    let mut step = 0usize;

    while stale < cfg.max_steps {
        step += 1;
        let mut choice: Option<(usize, f64)> = None;
        for i in 0..n {
            let delta = flip_delta(bits[i], fields[i]);
            let allowed = tabu_until[i] <= step || e + delta < best_e - ENERGY_TOL;
            if allowed && choice.is_none_or(|(_, d)| delta < d) {
                choice = Some((i, delta));
            }
        }
        let Some((i, _)) = choice else { break };
        e += rows.flip(i, &mut bits, &mut fields);
        tabu_until[i] = step + tenure + 1;
        journal.push(i);

        if e < best_e - ENERGY_TOL {
            best_e = e;
            if journal.len() > n / 4 {
                best.copy_from_slice(&bits);
            } else {
                for &k in &journal {
                    best[k] = !best[k];
                }
            }
            journal.clear();
            stale = 0;
        } else {
            stale += 1;
        }
    }
    (best, start_e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubo::energy;
    use crate::solver::brute_force;
    use crate::solver::testing::random_qubo;
    use rand::{Rng, SeedableRng};

    #[test]
    fn climbs_to_all_ones() {
        let mut q = Qubo::new(2);
        q.linear = vec![-1.0, -1.0];
        let r = tabu_search(&q, &Assignment::zeros(2), &TabuConfig::default()).unwrap();
        assert_eq!(r.best.bits, vec![true, true]);
        assert_eq!(r.best_energy, -2.0);
    }

    #[test]
    fn global_minimum_is_kept() {
        let mut q = Qubo::new(4);
        q.linear = vec![1.0, 2.0, 0.5, 3.0];
        let r = tabu_search(&q, &Assignment::zeros(4), &TabuConfig::default()).unwrap();
        assert_eq!(r.best, Assignment::zeros(4));
        assert_eq!(r.best_energy, 0.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(tabu_search(&Qubo::new(3), &Assignment::zeros(2), &TabuConfig::default()).is_err());
    }

    #[test]
    fn never_worse_than_start_and_mostly_optimal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut optimal = 0;
        let runs = 30;
        for seed in 0..runs {
            let q = random_qubo(18, 0.3, 500 + seed);
            let start = Assignment::from((0..18).map(|_| rng.random_bool(0.5)).collect::<Vec<_>>());
            let start_e = energy(&q, &start).unwrap();
            let r = tabu_search(&q, &start, &TabuConfig::default()).unwrap();
            assert!(r.best_energy <= start_e + 1e-12);
            assert_eq!(r.best_energy, energy(&q, &r.best).unwrap());
            if (r.best_energy - brute_force(&q).unwrap().best_energy).abs() < 1e-9 {
                optimal += 1;
            }
        }
        assert!(optimal as f64 >= 0.8 * runs as f64, "{optimal}/{runs}");
    }
}
