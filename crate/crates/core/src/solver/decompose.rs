//! Decomposition solving: the instance is cut into sub-QUBOs of at most
//! `sub_qubo_size` variables, each solved with the rest of the state frozen,
//! followed by a tabu pass over the merged state.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tabu::tabu_rows;
use super::{brute_force, flip_delta, simulated_anneal, stream_seed, AnnealSchedule, SolveResult, SolverId, SparseRows, TabuConfig, ENERGY_TOL};
use crate::error::{Error, Result};
use crate::qubo::{energy_unchecked, Assignment, Qubo};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubSolver {
    Anneal,
    BruteForce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecompositionConfig {
    pub sub_qubo_size: usize,
    pub max_iterations: usize,
    pub tabu_tenure: usize,
    pub tabu_max_steps: usize,
    pub seed: u64,
    /// Schedule used when the sub-solver is the annealer.
    pub sub_anneal: AnnealSchedule,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        Self {
            sub_qubo_size: 47,
            max_iterations: 10,
            tabu_tenure: 20,
            tabu_max_steps: 500,
            seed: 0,
            sub_anneal: AnnealSchedule::default(),
        }
    }
}

impl DecompositionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sub_qubo_size == 0 || self.max_iterations == 0 {
            return Err(Error::Config(
                "decomposition needs sub_qubo_size >= 1 and max_iterations >= 1".into(),
            ));
        }
        self.sub_anneal.validate()
    }

    fn tabu(&self) -> TabuConfig {
        TabuConfig {
            tenure: self.tabu_tenure,
            max_steps: self.tabu_max_steps,
        }
    }
}

/// A block of variables with everything else frozen: the full energy equals
/// `qubo` evaluated on the block plus `constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClampedSubQubo {
    pub qubo: Qubo,
    /// Full-instance index of each sub-QUBO variable.
    pub variables: Vec<usize>,
    pub constant: f64,
}

fn clamp_rows(rows: &SparseRows, block: &[usize], state: &[bool]) -> Qubo {
    let mut pos = vec![usize::MAX; rows.len()];
    for (k, &v) in block.iter().enumerate() {
        pos[v] = k;
    }
    let mut sub = Qubo::new(block.len());
    for (k, &v) in block.iter().enumerate() {
        let mut a = rows.linear[v];
        for (w, b) in rows.row(v) {
            match pos[w] {
                usize::MAX => {
                    if state[w] {
                        a += b;
                    }
                }
                kw if kw > k => sub.add_coupling(k, kw, b),
                _ => {}
            }
        }
        sub.linear[k] = a;
    }
    sub
}

/// Restricts `qubo` to `block`, folding couplings to frozen variables that
/// are set into the block's linear terms.
pub fn clamp_sub_qubo(qubo: &Qubo, block: &[usize], state: &Assignment) -> Result<ClampedSubQubo> {
    if state.len() != qubo.n {
        return Err(Error::Dimension {
            expected: qubo.n,
            found: state.len(),
        });
    }
    let mut seen = vec![false; qubo.n];
    for &v in block {
        if v >= qubo.n || std::mem::replace(&mut seen[v], true) {
            return Err(Error::Config(format!("invalid block variable {v}")));
        }
    }
    let rows = SparseRows::new(qubo);
    let sub = clamp_rows(&rows, block, &state.bits);
    let mut rest = state.bits.clone();
    for &v in block {
        rest[v] = false;
    }
    Ok(ClampedSubQubo {
        qubo: sub,
        variables: block.to_vec(),
        constant: energy_unchecked(qubo, &rest),
    })
}

fn solve_block(sub: &Qubo, sub_solver: SubSolver, schedule: &AnnealSchedule) -> Result<Vec<bool>> {
    let result = match sub_solver {
        SubSolver::BruteForce => brute_force(sub)?,
        SubSolver::Anneal => simulated_anneal(sub, schedule)?,
    };
    Ok(result.best.bits)
}

/// Energy change of writing `values` into the block variables of `bits`.
fn block_delta(rows: &SparseRows, block: &[usize], values: &[bool], bits: &[bool]) -> f64 {
    let mut delta = 0.0;
    let mut local = bits.to_vec();
    for (&v, &val) in block.iter().zip(values) {
        if local[v] != val {
            let field: f64 = rows.linear[v]
                + rows
                    .row(v)
                    .filter(|&(w, _)| local[w])
                    .map(|(_, b)| b)
                    .sum::<f64>();
            delta += flip_delta(local[v], field);
            local[v] = val;
        }
    }
    delta
}

/// Partitions all variables into blocks of at most `size`. Each block starts
/// at the highest-ranked unassigned variable and grows breadth-first along
/// couplings; when its neighborhood is exhausted the next-ranked unassigned
/// variable seeds the rest of the block.
fn grow_blocks(rows: &SparseRows, order: &[usize], size: usize) -> Vec<Vec<usize>> {
    let mut assigned = vec![false; rows.len()];
    let mut ranked = order.iter().copied();
    let mut blocks = Vec::new();
    let mut remaining = order.len();
    while remaining > 0 {
        let mut block = Vec::with_capacity(size);
        let mut head = 0;
        while block.len() < size && remaining > 0 {
            if head == block.len() {
                let v = ranked.find(|&v| !assigned[v]).expect("unassigned variable left");
                assigned[v] = true;
                remaining -= 1;
                block.push(v);
            }
            let v = block[head];
            head += 1;
            for (w, _) in rows.row(v) {
                if block.len() == size {
                    break;
                }
                if !assigned[w] {
                    assigned[w] = true;
                    remaining -= 1;
                    block.push(w);
                }
            }
        }
        block.sort_unstable();
        blocks.push(block);
    }
    blocks
}

/// Iterated decomposition with tabu refinement.
///
/// Each pass ranks variables by the magnitude of their single-flip energy
/// change (largest first), grows blocks of at most `sub_qubo_size` coupled
/// variables from that ranking, solves each clamped block against the current state,
/// applies block solutions that lower the total energy (in block order) and
/// finishes with a tabu search. Stops after a pass without improvement.
pub fn decompose_solve(qubo: &Qubo, cfg: &DecompositionConfig, sub_solver: SubSolver) -> Result<SolveResult> {
    cfg.validate()?;
    let n = qubo.n;
    if n == 0 {
        return Ok(SolveResult::new(qubo, Assignment::zeros(0), vec![0.0], 0, SolverId::Decompose));
    }
    let rows = SparseRows::new(qubo);
    let tabu = cfg.tabu();
    let (mut bits, _) = tabu_rows(&rows, qubo, vec![false; n], &tabu);
    let mut e = energy_unchecked(qubo, &bits);
    let mut trace = Vec::new();
    let mut sub_count = 0usize;
    let single_exact_block = n <= cfg.sub_qubo_size && sub_solver == SubSolver::BruteForce;

    for iteration in 0..cfg.max_iterations {
        let fields = rows.local_fields(&bits);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            let (di, dj) = (flip_delta(bits[i], fields[i]).abs(), flip_delta(bits[j], fields[j]).abs());
            dj.total_cmp(&di).then(i.cmp(&j))
        });
        let blocks = grow_blocks(&rows, &order, cfg.sub_qubo_size);
        sub_count += blocks.len();

        let snapshot = bits.clone();
        let solutions: Vec<Vec<bool>> = blocks
            .par_iter()
            .enumerate()
            .map(|(k, block)| {
                let sub = clamp_rows(&rows, block, &snapshot);
                let schedule = AnnealSchedule {
                    seed: stream_seed(cfg.seed, ((iteration as u64) << 32) | k as u64),
                    ..cfg.sub_anneal.clone()
                };
                solve_block(&sub, sub_solver, &schedule)
            })
            .collect::<Result<_>>()?;

        for (block, values) in blocks.iter().zip(&solutions) {
            if block_delta(&rows, block, values, &bits) < -ENERGY_TOL {
                for (&v, &val) in block.iter().zip(values) {
                    bits[v] = val;
                }
            }
        }
        let (refined, _) = tabu_rows(&rows, qubo, bits, &tabu);
        bits = refined;
        let new_e = energy_unchecked(qubo, &bits);
        let improved = new_e < e - ENERGY_TOL;
        e = e.min(new_e);
        trace.push(e);
        if !improved || single_exact_block {
            break;
        }
    }
    Ok(SolveResult::new(qubo, Assignment::from(bits), trace, sub_count, SolverId::Decompose))
}
