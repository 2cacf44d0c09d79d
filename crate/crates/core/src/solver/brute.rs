use super::{SolveResult, SolverId, SparseRows, ENERGY_TOL};
use crate::error::{Error, Result};
use crate::qubo::{energy_unchecked, Assignment, Qubo};

/// Largest instance accepted by exhaustive enumeration.
pub const BRUTE_FORCE_LIMIT: usize = 25;

/// Exact minimum over all 2^n states (Gray-code order, incremental energy).
/// Ties resolve to the lexicographically smallest bit vector.
pub fn brute_force(qubo: &Qubo) -> Result<SolveResult> {
    let n = qubo.n;
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeLimit {
            n,
            max: BRUTE_FORCE_LIMIT,
        });
    }
    let rows = SparseRows::new(qubo);
    let mut bits = vec![false; n];
    let mut fields = rows.local_fields(&bits);
    let mut e = 0.0;

    // bit 0 of `mask` is variable 0; reversing makes variable 0 the most
    // significant digit, so integer order equals lexicographic order.
    let lex_key = |mask: u64| if n == 0 { 0 } else { mask.reverse_bits() >> (64 - n) };
    let mut best_mask = 0u64;
    let mut best_e = 0.0;
    let mut mask = 0u64;

    for k in 1u64..(1u64 << n) {
        let i = k.trailing_zeros() as usize;
        e += rows.flip(i, &mut bits, &mut fields);
        mask ^= 1 << i;
        if k % (1 << 16) == 0 {
            // bound the drift of the running sums
            fields = rows.local_fields(&bits);
            e = energy_unchecked(qubo, &bits);
        }
        if e <= best_e + ENERGY_TOL {
            let exact = energy_unchecked(qubo, &bits);
            if exact < best_e - ENERGY_TOL || (exact <= best_e + ENERGY_TOL && lex_key(mask) < lex_key(best_mask)) {
                best_e = exact;
                best_mask = mask;
            }
        }
    }

    let best: Vec<bool> = (0..n).map(|i| (best_mask >> i) & 1 == 1).collect();
    let result = SolveResult::new(qubo, Assignment::from(best), Vec::new(), 0, SolverId::BruteForce);
    Ok(SolveResult {
        energy_trace: vec![result.best_energy],
        ..result
    })
}

/// Exact minimum of an instance whose connected components each fit the
/// enumeration limit; components are solved independently.
pub fn brute_force_by_components(qubo: &Qubo) -> Result<SolveResult> {
    let mut bits = vec![false; qubo.n];
    for comp in qubo.components() {
        let mut sub = Qubo::new(comp.len());
        let mut pos = std::collections::HashMap::new();
        for (k, &v) in comp.iter().enumerate() {
            pos.insert(v, k);
            sub.linear[k] = qubo.linear[v];
        }
        for (&(i, j), &b) in &qubo.quadratic {
            if let (Some(&pi), Some(&pj)) = (pos.get(&i), pos.get(&j)) {
                sub.add_coupling(pi, pj, b);
            }
        }
        let solved = brute_force(&sub)?;
        for (k, &v) in comp.iter().enumerate() {
            bits[v] = solved.best.bits[k];
        }
    }
    let result = SolveResult::new(qubo, Assignment::from(bits), Vec::new(), 0, SolverId::BruteForce);
    Ok(SolveResult {
        energy_trace: vec![result.best_energy],
        ..result
    })
}
