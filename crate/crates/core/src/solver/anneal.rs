use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{better, flip_delta, stream_seed, SolveResult, SolverId, SparseRows, ENERGY_TOL};
use crate::error::{Error, Result};
use crate::qubo::{energy_unchecked, Assignment, Qubo};

/// Metropolis single-flip annealing with a geometric inverse-temperature ramp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealSchedule {
    pub sweeps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    /// Independent restarts.
    pub reads: usize,
    pub seed: u64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            sweeps: 1000,
            beta_start: 0.1,
            beta_end: 10.0,
            reads: 10,
            seed: 0,
        }
    }
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.sweeps >= 1 && self.reads >= 1 && self.beta_start > 0.0 && self.beta_end > self.beta_start {
            Ok(())
        } else {
            Err(Error::Config(
                "anneal schedule needs sweeps >= 1, reads >= 1 and beta_end > beta_start > 0".into(),
            ))
        }
    }
}

pub fn geometric_betas(beta_start: f64, beta_end: f64, sweeps: usize) -> Vec<f64> {
    if sweeps <= 1 {
        return vec![beta_end; sweeps];
    }
    let ratio = (beta_end / beta_start).ln() / (sweeps - 1) as f64;
    (0..sweeps)
        .map(|k| beta_start * (ratio * k as f64).exp())
        .collect()
}

fn anneal_read(rows: &SparseRows, qubo: &Qubo, betas: &[f64], seed: u64) -> (f64, Vec<bool>) {
    let n = rows.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bits: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    let mut fields = rows.local_fields(&bits);
    let mut e = energy_unchecked(qubo, &bits);
    let mut best = (e, bits.clone());

    for &beta in betas {
        for i in 0..n {
            let delta = flip_delta(bits[i], fields[i]);
            if delta <= 0.0 || rng.random::<f64>() < (-beta * delta).exp() {
                e += rows.flip(i, &mut bits, &mut fields);
            }
        }
        if e < best.0 - ENERGY_TOL {
            best = (e, bits.clone());
        }
    }
    (energy_unchecked(qubo, &best.1), best.1)
}

/// Runs `schedule.reads` independent anneals from random states and returns
/// the lowest-energy state seen. Deterministic for a given seed.
pub fn simulated_anneal(qubo: &Qubo, schedule: &AnnealSchedule) -> Result<SolveResult> {
    schedule.validate()?;
    if qubo.n == 0 {
        return Ok(SolveResult::new(qubo, Assignment::zeros(0), vec![0.0], 0, SolverId::Anneal));
    }
    let rows = SparseRows::new(qubo);
    let betas = geometric_betas(schedule.beta_start, schedule.beta_end, schedule.sweeps);
    let reads: Vec<(f64, Vec<bool>)> = (0..schedule.reads as u64)
        .into_par_iter()
        .map(|r| anneal_read(&rows, qubo, &betas, stream_seed(schedule.seed, r)))
        .collect();

    let mut trace = Vec::with_capacity(reads.len());
    let mut best: Option<&(f64, Vec<bool>)> = None;
    for read in &reads {
        best = match best {
            Some(b) if !better((read.0, &read.1), (b.0, &b.1), ENERGY_TOL) => Some(b),
            _ => Some(read),
        };
        trace.push(best.map(|b| b.0).unwrap_or(f64::INFINITY));
    }
    let best = best.expect("at least one read").1.clone();
    Ok(SolveResult::new(qubo, Assignment::from(best), trace, 0, SolverId::Anneal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubo::energy;
    use crate::solver::brute_force;
    use crate::solver::testing::random_qubo;

    #[test]
    fn schedule_is_geometric() {
        let b = geometric_betas(0.1, 10.0, 3);
        assert!((b[0] - 0.1).abs() < 1e-12);
        assert!((b[1] - 1.0).abs() < 1e-12);
        assert!((b[2] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn positive_biases_give_zero_state() {
        let mut q = Qubo::new(6);
        q.linear = vec![0.3, 1.0, 0.1, 2.0, 0.5, 0.7];
        let r = simulated_anneal(&q, &AnnealSchedule::default()).unwrap();
        assert_eq!(r.best.bits, vec![false; 6]);
        assert_eq!(r.best_energy, 0.0);
    }

    #[test]
    fn five_hit_track_is_fully_selected() {
        let mut q = Qubo::new(3);
        q.add_coupling(0, 1, -1.0);
        q.add_coupling(1, 2, -1.0);
        q.add_coupling(0, 2, -0.25);
        let r = simulated_anneal(&q, &AnnealSchedule::default()).unwrap();
        assert_eq!(r.best, brute_force(&q).unwrap().best);
        assert_eq!(r.best.bits, vec![true; 3]);
    }

    #[test]
    fn deterministic_and_consistent() {
        let q = random_qubo(30, 0.2, 4);
        let s = AnnealSchedule { sweeps: 200, ..AnnealSchedule::default() };
        let a = simulated_anneal(&q, &s).unwrap();
        assert_eq!(a, simulated_anneal(&q, &s).unwrap());
        assert_eq!(a.best_energy, energy(&q, &a.best).unwrap());
        assert!(a.energy_trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(a.energy_trace.len(), 10);
    }

    #[test]
    fn matches_oracle_on_small_instances() {
        let mut hits = 0;
        for seed in 0..20 {
            let q = random_qubo(12, 0.3, 100 + seed);
            let exact = brute_force(&q).unwrap().best_energy;
            let r = simulated_anneal(&q, &AnnealSchedule { seed, ..AnnealSchedule::default() }).unwrap();
            assert!(r.best_energy >= exact - 1e-9);
            if (r.best_energy - exact).abs() < 1e-9 {
                hits += 1;
            }
        }
        assert!(hits >= 19, "{hits}/20");
    }

    #[test]
    fn bad_schedule_rejected() {
        let q = Qubo::new(2);
        let s = AnnealSchedule { beta_end: 0.05, ..AnnealSchedule::default() };
        assert!(simulated_anneal(&q, &s).is_err());
    }
}
