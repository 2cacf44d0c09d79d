use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::Assignment;
use crate::seeding::Doublet;
use crate::triplets::{RelationKind, Triplet, TripletRelation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackCandidate {
    pub id: usize,
    /// Ordered by increasing transverse radius.
    pub hit_ids: Vec<u64>,
    pub source_triplets: Vec<usize>,
    /// Sum of the strengths of chain relations among the source triplets.
    pub strength: f64,
}

/// Doublets `(a,b)` and `(b,c)` of every selected triplet, deduplicated and
/// sorted.
pub fn selected_triplets_to_doublets(triplets: &[Triplet], assignment: &Assignment) -> Vec<Doublet> {
    let set: BTreeSet<Doublet> = triplets
        .iter()
        .zip(&assignment.bits)
        .filter(|(_, &on)| on)
        .flat_map(|(t, _)| {
            [
                Doublet::new(t.hits[0], t.hits[1]),
                Doublet::new(t.hits[1], t.hits[2]),
            ]
        })
        .collect();
    set.into_iter().collect()
}

/// Chains doublets into candidates. A chain continues through a hit only if
/// that hit has exactly one incoming and one outgoing doublet, so every
/// doublet ends up in exactly one candidate and branches start new ones.
pub fn build_candidates(
    doublets: &[Doublet],
    triplets: &[Triplet],
    assignment: &Assignment,
    relations: &[TripletRelation],
) -> Vec<TrackCandidate> {
    let mut outgoing: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    let mut in_degree: HashMap<u64, usize> = HashMap::new();
    for d in doublets {
        outgoing.entry(d.inner).or_default().push(d.outer);
        *in_degree.entry(d.outer).or_default() += 1;
    }
    let passes_through = |h: u64| {
        in_degree.get(&h).copied().unwrap_or(0) == 1 && outgoing.get(&h).map_or(0, Vec::len) == 1
    };

    let mut paths: Vec<Vec<u64>> = Vec::new();
    for d in doublets {
        if passes_through(d.inner) {
            continue;
        }
        let mut path = vec![d.inner, d.outer];
        let mut tip = d.outer;
        while passes_through(tip) {
            tip = outgoing[&tip][0];
            path.push(tip);
        }
        paths.push(path);
    }

    let selected: Vec<&Triplet> = triplets
        .iter()
        .zip(&assignment.bits)
        .filter(|(_, &on)| on)
        .map(|(t, _)| t)
        .collect();
    let by_hits: HashMap<[u64; 3], usize> = selected.iter().map(|t| (t.hits, t.id)).collect();
    let chain_strength: HashMap<(usize, usize), f64> = relations
        .iter()
        .filter(|r| matches!(r.kind, RelationKind::Quadruplet | RelationKind::Quintet))
        .filter_map(|r| r.strength.map(|s| ((r.i, r.j), s)))
        .collect();

    paths
        .into_iter()
        .enumerate()
        .map(|(id, hit_ids)| {
            let source_triplets: Vec<usize> = hit_ids
                .windows(3)
                .filter_map(|w| by_hits.get(&[w[0], w[1], w[2]]).copied())
                .collect();
            let mut strength = 0.0;
            for (k, &i) in source_triplets.iter().enumerate() {
                for &j in &source_triplets[k + 1..] {
                    strength += chain_strength.get(&(i.min(j), i.max(j))).copied().unwrap_or(0.0);
                }
            }
            TrackCandidate {
                id,
                hit_ids,
                source_triplets,
                strength,
            }
        })
        .collect()
}

/// Makes candidates hit-disjoint. Candidates are visited by decreasing hit
/// count, then decreasing strength, then increasing id; each loses the hits
/// already claimed (keeping its longest contiguous remainder) and is dropped
/// if fewer than `min_hits` remain.
pub fn resolve_conflicts(candidates: &[TrackCandidate], min_hits: usize) -> Vec<TrackCandidate> {
    let mut order: Vec<&TrackCandidate> = candidates.iter().filter(|c| c.hit_ids.len() >= min_hits).collect();
    order.sort_by(|a, b| {
        b.hit_ids
            .len()
            .cmp(&a.hit_ids.len())
            .then(b.strength.total_cmp(&a.strength))
            .then(a.id.cmp(&b.id))
    });

    let mut claimed: HashSet<u64> = HashSet::new();
    let mut kept = Vec::new();
    for c in order {
        let mut best: &[u64] = &[];
        for run in c.hit_ids.split(|h| claimed.contains(h)) {
            if run.len() > best.len() {
                best = run;
            }
        }
        if best.len() < min_hits {
            continue;
        }
        let mut c = c.clone();
        if best.len() != c.hit_ids.len() {
            c.hit_ids = best.to_vec();
        }
        claimed.extend(c.hit_ids.iter().copied());
        kept.push(c);
    }
    kept.sort_by_key(|c| c.id);
    kept
}

/// Consecutive-hit doublets of each candidate, tagged with the candidate id.
pub fn candidate_doublets(candidates: &[TrackCandidate]) -> Vec<(Doublet, usize)> {
    let mut out: Vec<(Doublet, usize)> = candidates
        .iter()
        .flat_map(|c| c.hit_ids.windows(2).map(move |w| (Doublet::new(w[0], w[1]), c.id)))
        .collect();
    out.sort();
    out
}

pub fn write_final_doublets_csv(doublets: &[(Doublet, usize)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["inner_hit_id", "outer_hit_id", "candidate_id"])?;
    for (d, c) in doublets {
        w.write_record([d.inner.to_string(), d.outer.to_string(), c.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trip(id: usize, hits: [u64; 3]) -> Triplet {
        Triplet {
            id,
            hits,
            holes: 0,
            q_over_pt: 0.0,
            delta_theta: 0.0,
            d0_estimate: 0.0,
            z0_estimate: 0.0,
        }
    }

    fn cand(id: usize, hit_ids: Vec<u64>, strength: f64) -> TrackCandidate {
        TrackCandidate {
            id,
            hit_ids,
            source_triplets: vec![],
            strength,
        }
    }

    #[test]
    fn triplet_to_doublets() {
        let t = vec![trip(0, [1, 2, 3]), trip(1, [2, 3, 4]), trip(2, [7, 8, 9])];
        let one = Assignment::from(vec![true, false, false]);
        assert_eq!(selected_triplets_to_doublets(&t, &one).len(), 2);
        let chained = Assignment::from(vec![true, true, false]);
        assert_eq!(
            selected_triplets_to_doublets(&t, &chained),
            vec![Doublet::new(1, 2), Doublet::new(2, 3), Doublet::new(3, 4)]
        );
        assert!(selected_triplets_to_doublets(&t, &Assignment::zeros(3)).is_empty());
    }

    #[test]
    fn chains_split_at_branches() {
        // 1-2-3-4-5 with a branch 3-9
        let d = vec![
            Doublet::new(1, 2),
            Doublet::new(2, 3),
            Doublet::new(3, 4),
            Doublet::new(3, 9),
            Doublet::new(4, 5),
        ];
        let c = build_candidates(&d, &[], &Assignment::zeros(0), &[]);
        let paths: Vec<Vec<u64>> = c.iter().map(|c| c.hit_ids.clone()).collect();
        assert_eq!(paths, vec![vec![1, 2, 3], vec![3, 4, 5], vec![3, 9]]);
    }

    #[test]
    fn candidate_strength_sums_chain_relations() {
        let t = vec![trip(0, [1, 2, 3]), trip(1, [2, 3, 4]), trip(2, [3, 4, 5])];
        let rels = vec![
            TripletRelation { kind: RelationKind::Quadruplet, i: 0, j: 1, strength: Some(0.9) },
            TripletRelation { kind: RelationKind::Quadruplet, i: 1, j: 2, strength: Some(0.8) },
            TripletRelation { kind: RelationKind::Quintet, i: 0, j: 2, strength: Some(0.5) },
        ];
        let x = Assignment::from(vec![true; 3]);
        let d = selected_triplets_to_doublets(&t, &x);
        let c = build_candidates(&d, &t, &x, &rels);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].hit_ids, vec![1, 2, 3, 4, 5]);
        assert_eq!(c[0].source_triplets, vec![0, 1, 2]);
        assert!((c[0].strength - 2.2).abs() < 1e-12);
    }

    #[test]
    fn disjoint_candidates_unchanged() {
        let c = vec![cand(0, (1..=5).collect(), 1.0), cand(1, (11..=16).collect(), 1.0)];
        assert_eq!(resolve_conflicts(&c, 5), c);
    }

    #[test]
    fn longer_candidate_wins_shared_hit() {
        let c = vec![cand(0, vec![1, 2, 3, 4, 5, 6, 7], 0.0), cand(1, vec![7, 20, 21, 22, 23], 5.0)];
        let r = resolve_conflicts(&c, 5);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].id, 0);
    }

    #[test]
    fn equal_candidates_tie_on_id() {
        let c = vec![cand(3, vec![1, 2, 3, 4, 5, 6], 1.0), cand(2, vec![6, 30, 31, 32, 33, 34], 1.0)];
        let r = resolve_conflicts(&c, 5);
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].id, 2);
        assert_eq!(r[0].hit_ids.len(), 6);
        assert_eq!(r[1].hit_ids, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn stronger_candidate_wins_tie_on_length() {
        let c = vec![cand(0, vec![1, 2, 3, 4, 5, 6], 1.0), cand(1, vec![6, 30, 31, 32, 33, 34], 2.0)];
        let r = resolve_conflicts(&c, 5);
        assert_eq!(r.iter().find(|c| c.id == 1).unwrap().hit_ids.len(), 6);
    }

    #[test]
    fn short_candidates_are_dropped() {
        let c = vec![cand(0, vec![1, 2, 3, 4], 1.0)];
        assert!(resolve_conflicts(&c, 5).is_empty());
        assert_eq!(resolve_conflicts(&c, 4).len(), 1);
    }

    #[test]
    fn resolved_hits_are_unique() {
        let c = vec![
            cand(0, vec![1, 2, 3, 4, 5, 6, 7], 0.0),
            cand(1, vec![3, 40, 41, 42, 43, 44], 0.0),
            cand(2, vec![40, 50, 51, 52, 53, 54, 55, 56], 0.0),
        ];
        let r = resolve_conflicts(&c, 5);
        let mut seen = HashSet::new();
        for c in &r {
            for h in &c.hit_ids {
                assert!(seen.insert(*h));
            }
        }
        assert_eq!(candidate_doublets(&r).len(), r.iter().map(|c| c.hit_ids.len() - 1).sum::<usize>());
    }
}
