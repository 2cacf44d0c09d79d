//! QUBO minimisers: exhaustive enumeration, simulated annealing, tabu search
//! and a decomposition loop that solves clamped sub-problems.

mod anneal;
mod brute;
mod decompose;
mod tabu;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::{energy, Assignment, Qubo};

pub use anneal::{geometric_betas, simulated_anneal, AnnealSchedule};
pub use brute::{brute_force, brute_force_by_components, BRUTE_FORCE_LIMIT};
pub use decompose::{clamp_sub_qubo, decompose_solve, ClampedSubQubo, DecompositionConfig, SubSolver};
pub use tabu::{tabu_search, TabuConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverId {
    BruteForce,
    Anneal,
    Tabu,
    Decompose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    #[serde(with = "bit_string")]
    pub best: Assignment,
    pub best_energy: f64,
    /// Best energy after each iteration (read, restart or decomposition pass).
    pub energy_trace: Vec<f64>,
    pub sub_qubo_count: usize,
    pub solver_id: SolverId,
}

impl SolveResult {
    pub(crate) fn new(qubo: &Qubo, best: Assignment, energy_trace: Vec<f64>, sub_qubo_count: usize, solver_id: SolverId) -> Self {
        let best_energy = energy(qubo, &best).expect("solver returns a full-length assignment");
        Self {
            best,
            best_energy,
            energy_trace,
            sub_qubo_count,
            solver_id,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solve result serialises")
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}

mod bit_string {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    use crate::qubo::Assignment;

    pub fn serialize<S: Serializer>(a: &Assignment, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&a.to_bit_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Assignment, D::Error> {
        let s = String::deserialize(d)?;
        Assignment::from_bit_string(&s).ok_or_else(|| D::Error::custom("expected a 0/1 string"))
    }
}

/// Compressed neighbour lists with the linear terms, used by the local
/// search routines.
#[derive(Debug, Clone)]
pub(crate) struct SparseRows {
    pub linear: Vec<f64>,
    offsets: Vec<usize>,
    neighbours: Vec<usize>,
    weights: Vec<f64>,
}

impl SparseRows {
    pub fn new(qubo: &Qubo) -> Self {
        let n = qubo.n;
        let mut degree = vec![0usize; n + 1];
        for &(i, j) in qubo.quadratic.keys() {
            degree[i + 1] += 1;
            degree[j + 1] += 1;
        }
        for k in 0..n {
            degree[k + 1] += degree[k];
        }
        let offsets = degree;
        let mut fill = offsets.clone();
        let mut neighbours = vec![0; offsets[n]];
        let mut weights = vec![0.0; offsets[n]];
        for (&(i, j), &b) in &qubo.quadratic {
            neighbours[fill[i]] = j;
            weights[fill[i]] = b;
            fill[i] += 1;
            neighbours[fill[j]] = i;
            weights[fill[j]] = b;
            fill[j] += 1;
        }
        Self {
            linear: qubo.linear.clone(),
            offsets,
            neighbours,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.linear.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.offsets[i]..self.offsets[i + 1];
        self.neighbours[span.clone()]
            .iter()
            .copied()
            .zip(self.weights[span].iter().copied())
    }

    /// `h_i = a_i + Σ_j b_ij x_j`; flipping `i` changes the energy by
    /// `(1 − 2x_i)·h_i`.
    pub fn local_fields(&self, bits: &[bool]) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                self.linear[i]
                    + self
                        .row(i)
                        .filter(|&(j, _)| bits[j])
                        .map(|(_, b)| b)
                        .sum::<f64>()
            })
            .collect()
    }

    /// Flips bit `i`, keeping `fields` consistent. Returns the energy change.
    pub fn flip(&self, i: usize, bits: &mut [bool], fields: &mut [f64]) -> f64 {
        let delta = flip_delta(bits[i], fields[i]);
        bits[i] = !bits[i];
        let sign = if bits[i] { 1.0 } else { -1.0 };
        for (j, b) in self.row(i) {
            fields[j] += sign * b;
        }
        delta
    }
}

#[inline]
pub(crate) fn flip_delta(bit: bool, field: f64) -> f64 {
    if bit {
        -field
    } else {
        field
    }
}

/// Mixes a base seed with a stream index.
pub(crate) fn stream_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Picks the lower energy; ties go to the lexicographically smaller state.
pub(crate) fn better(candidate: (f64, &[bool]), incumbent: (f64, &[bool]), tol: f64) -> bool {
    if candidate.0 < incumbent.0 - tol {
        true
    } else if candidate.0 <= incumbent.0 + tol {
        candidate.1 < incumbent.1
    } else {
        false
    }
}

pub(crate) const ENERGY_TOL: f64 = 1e-9;

#[cfg(test)]
pub(crate) mod testing {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::qubo::Qubo;

    /// Random instance: each coupler present with probability `density`,
    /// all coefficients uniform in [-2, 2].
    pub fn random_qubo(n: usize, density: f64, seed: u64) -> Qubo {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q = Qubo::new(n);
        for i in 0..n {
            q.linear[i] = rng.random_range(-2.0..=2.0);
        }
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(density) {
                    q.add_coupling(i, j, rng.random_range(-2.0..=2.0));
                }
            }
        }
        q
    }

    /// Independent dense scan over all 2^n states.
    pub fn dense_minimum(q: &Qubo) -> f64 {
        let n = q.n;
        let mut m = vec![vec![0.0; n]; n];
        for (&(i, j), &b) in &q.quadratic {
            m[i][j] = b;
        }
        let mut best = 0.0f64;
        for state in 0u64..(1 << n) {
            let x: Vec<f64> = (0..n).map(|i| ((state >> i) & 1) as f64).collect();
            let mut e = 0.0;
            for i in 0..n {
                e += q.linear[i] * x[i];
                for j in i + 1..n {
                    e += m[i][j] * x[i] * x[j];
                }
            }
            best = best.min(e);
        }
        best
    }
}
