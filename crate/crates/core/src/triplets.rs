//! Triplets of hits, their geometric features, and the pairwise relations
//! (chain links, single-hit chains, conflicts) that become QUBO couplings.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{Event, Hit, PT_PER_TESLA_MM};
use crate::qubo::{strength, StrengthParams};
use crate::seeding::Doublet;

/// Minimum number of hits a chain of triplets has to span to be kept.
pub const MIN_CHAIN_HITS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub id: usize,
    /// Hit ids ordered by increasing transverse radius.
    pub hits: [u64; 3],
    pub holes: u32,
    /// Signed, MeV⁻¹.
    pub q_over_pt: f64,
    /// Angle between the two doublets in the r–z plane, rad.
    pub delta_theta: f64,
    /// Transverse distance of the fitted circle from the origin, mm.
    pub d0_estimate: f64,
    /// z of the r–z line at r = 0, mm.
    pub z0_estimate: f64,
}

impl Triplet {
    pub fn inner_doublet(&self) -> (u64, u64) {
        (self.hits[0], self.hits[1])
    }

    pub fn outer_doublet(&self) -> (u64, u64) {
        (self.hits[1], self.hits[2])
    }

    pub fn shares_hit(&self, other: &Triplet) -> bool {
        self.hits.iter().any(|h| other.hits.contains(h))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TripletCuts {
    pub max_holes: u32,
    /// MeV⁻¹
    pub max_abs_qpt: f64,
    /// rad
    pub max_delta_theta: f64,
    /// MeV⁻¹
    pub max_qpt_diff: f64,
    pub min_strength: f64,
}

impl Default for TripletCuts {
    fn default() -> Self {
        Self {
            max_holes: 1,
            max_abs_qpt: 8e-4,
            max_delta_theta: 0.1,
            max_qpt_diff: 1e-4,
            min_strength: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    /// Two triplets sharing two hits in chain order: (a,b,c) + (b,c,d).
    Quadruplet,
    /// Two triplets chained through one hit: (a,b,c) + (c,d,e).
    Quintet,
    Conflict,
    /// Chain pattern that failed the compatibility cuts; carries no coupling.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletRelation {
    pub kind: RelationKind,
    pub i: usize,
    pub j: usize,
    /// Set for quadruplet and quintet relations.
    pub strength: Option<f64>,
}

/// Hit-sharing pattern of two triplets, independent of argument order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HitPattern {
    Disjoint,
    Quadruplet,
    Quintet,
    Conflict,
}

pub fn hit_pattern(t: &Triplet, u: &Triplet) -> HitPattern {
    if !t.shares_hit(u) {
        return HitPattern::Disjoint;
    }
    let chained = |p: &Triplet, q: &Triplet| p.outer_doublet() == q.inner_doublet();
    if chained(t, u) || chained(u, t) {
        return HitPattern::Quadruplet;
    }
    let shared = t.hits.iter().filter(|h| u.hits.contains(h)).count();
    if shared == 1 && (t.hits[2] == u.hits[0] || u.hits[2] == t.hits[0]) {
        return HitPattern::Quintet;
    }
    HitPattern::Conflict
}

fn degenerate_if(cond: bool, what: &str) -> Result<()> {
    if cond {
        Err(Error::Degenerate(what.to_string()))
    } else {
        Ok(())
    }
}

/// Signed curvature of three hits converted to q/pT in MeV⁻¹.
///
/// Hits are put in radial order first. The magnitude is the Menger curvature
/// `4·Area / (|ab|·|bc|·|ca|)` divided by `0.3·B`; counter-clockwise bending
/// maps to negative charge. Collinear hits give exactly 0.
pub fn curvature_q_over_pt(a: &Hit, b: &Hit, c: &Hit, b_tesla: f64) -> Result<f64> {
    let mut h = [a, b, c];
    h.sort_by(|p, q| p.r.total_cmp(&q.r).then(p.hit_id.cmp(&q.hit_id)));
    let [a, b, c] = h;
    let same = |p: &Hit, q: &Hit| p.x == q.x && p.y == q.y;
    degenerate_if(
        same(a, b) || same(b, c) || same(a, c),
        "coincident transverse positions",
    )?;
    let cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
    if cross == 0.0 {
        return Ok(0.0);
    }
    let ab = (b.x - a.x).hypot(b.y - a.y);
    let bc = (c.x - b.x).hypot(c.y - b.y);
    let ca = (a.x - c.x).hypot(a.y - c.y);
    let kappa = 2.0 * cross.abs() / (ab * bc * ca);
    Ok(-cross.signum() * kappa / (PT_PER_TESLA_MM * b_tesla))
}

fn rz_angle(p: &Hit, q: &Hit) -> Result<f64> {
    let dr = q.r - p.r;
    let dz = q.z - p.z;
    degenerate_if(dr == 0.0 && dz == 0.0, "zero-length segment in r-z")?;
    Ok(dr.atan2(dz))
}

/// Absolute difference of the r–z polar angles of segments ab and bc.
pub fn delta_theta(a: &Hit, b: &Hit, c: &Hit) -> Result<f64> {
    let d = (rz_angle(a, b)? - rz_angle(b, c)?).abs();
    Ok(d.min(std::f64::consts::PI))
}

/// Distance between the origin and the closest point of the transverse
/// circle through the three hits (the line through a and c if collinear).
fn d0_estimate(a: &Hit, b: &Hit, c: &Hit) -> f64 {
    let d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
    if d == 0.0 {
        let (dx, dy) = (c.x - a.x, c.y - a.y);
        let len = dx.hypot(dy);
        return if len == 0.0 { a.r } else { (a.x * dy - a.y * dx).abs() / len };
    }
    let (a2, b2, c2) = (a.r * a.r, b.r * b.r, c.r * c.r);
    let ux = (a2 * (b.y - c.y) + b2 * (c.y - a.y) + c2 * (a.y - b.y)) / d;
    let uy = (a2 * (c.x - b.x) + b2 * (a.x - c.x) + c2 * (b.x - a.x)) / d;
    let radius = (a.x - ux).hypot(a.y - uy);
    (ux.hypot(uy) - radius).abs()
}

fn z0_estimate(a: &Hit, c: &Hit) -> f64 {
    let dr = c.r - a.r;
    if dr == 0.0 {
        a.z
    } else {
        a.z - a.r * (c.z - a.z) / dr
    }
}

/// Computes the features of a radially ordered hit triple, or `None` if the
/// hits are geometrically degenerate.
pub fn make_triplet(a: &Hit, b: &Hit, c: &Hit, b_tesla: f64) -> Option<Triplet> {
    let q_over_pt = curvature_q_over_pt(a, b, c, b_tesla).ok()?;
    let delta_theta = delta_theta(a, b, c).ok()?;
    let holes = (b.layer.checked_sub(a.layer + 1)? + c.layer.checked_sub(b.layer + 1)?) as u32;
    Some(Triplet {
        id: 0,
        hits: [a.hit_id, b.hit_id, c.hit_id],
        holes,
        q_over_pt,
        delta_theta,
        d0_estimate: d0_estimate(a, b, c),
        z0_estimate: z0_estimate(a, c),
    })
}

impl TripletCuts {
    pub fn accepts_triplet(&self, t: &Triplet) -> bool {
        t.holes <= self.max_holes
            && t.q_over_pt.abs() <= self.max_abs_qpt
            && t.delta_theta <= self.max_delta_theta
    }
}

/// Joins doublets sharing their middle hit into triplets and applies the
/// triplet cuts. Output is sorted by hit ids, and ids are positions.
///
/// A doublet that skips a layer only counts as crossing a hole when no hit on
/// the skipped layer connects its ends through two doublets; otherwise it is
/// a shortcut past a recorded hit and triplets using it are dropped.
pub fn build_triplets(doublets: &[Doublet], event: &Event, cuts: &TripletCuts) -> Vec<Triplet> {
    let index = event.hit_index();
    let mut outgoing: HashMap<u64, Vec<u64>> = HashMap::new();
    for d in doublets {
        outgoing.entry(d.inner).or_default().push(d.outer);
    }
    let pairs: HashSet<Doublet> = doublets.iter().copied().collect();
    let shortcut = |inner: u64, outer: u64| {
        outgoing
            .get(&inner)
            .is_some_and(|mid| mid.iter().any(|&h| pairs.contains(&Doublet::new(h, outer))))
    };
    let b_tesla = event.geometry.field_strength;
    let mut triplets = Vec::new();
    for d in doublets {
        let (Some(&ia), Some(&ib)) = (index.get(&d.inner), index.get(&d.outer)) else {
            continue;
        };
        let Some(next) = outgoing.get(&d.outer) else { continue };
        let (a, b) = (&event.hits[ia], &event.hits[ib]);
        for &c_id in next {
            let Some(&ic) = index.get(&c_id) else { continue };
            let c = &event.hits[ic];
            // holes are cheap; check before the geometry
            if c.layer < b.layer + 1 || b.layer < a.layer + 1 {
                continue;
            }
            if ((b.layer - a.layer - 1) + (c.layer - b.layer - 1)) as u32 > cuts.max_holes {
                continue;
            }
            let Some(t) = make_triplet(a, b, c, b_tesla) else { continue };
            if !cuts.accepts_triplet(&t) {
                continue;
            }
            let gap_ab = b.layer > a.layer + 1 && shortcut(a.hit_id, b.hit_id);
            let gap_bc = c.layer > b.layer + 1 && shortcut(b.hit_id, c.hit_id);
            if !(gap_ab || gap_bc) {
                triplets.push(t);
            }
        }
    }
    triplets.sort_by_key(|t| t.hits);
    triplets.dedup_by_key(|t| t.hits);
    for (i, t) in triplets.iter_mut().enumerate() {
        t.id = i;
    }
    triplets
}

fn chain_relation(
    kind: RelationKind,
    i: usize,
    j: usize,
    triplets: &[Triplet],
    cuts: &TripletCuts,
    params: &StrengthParams,
) -> TripletRelation {
    let (ti, tj) = (&triplets[i], &triplets[j]);
    let s = strength(ti, tj, params);
    let compatible =
        (ti.q_over_pt - tj.q_over_pt).abs() <= cuts.max_qpt_diff && s > cuts.min_strength;
    let (i, j) = (i.min(j), i.max(j));
    if compatible {
        TripletRelation {
            kind,
            i,
            j,
            strength: Some(s),
        }
    } else {
        TripletRelation {
            kind: RelationKind::None,
            i,
            j,
            strength: None,
        }
    }
}

fn relation_for_pair(
    i: usize,
    j: usize,
    triplets: &[Triplet],
    cuts: &TripletCuts,
    params: &StrengthParams,
) -> Option<TripletRelation> {
    match hit_pattern(&triplets[i], &triplets[j]) {
        HitPattern::Disjoint => None,
        HitPattern::Quadruplet => Some(chain_relation(RelationKind::Quadruplet, i, j, triplets, cuts, params)),
        HitPattern::Quintet => Some(chain_relation(RelationKind::Quintet, i, j, triplets, cuts, params)),
        HitPattern::Conflict => Some(TripletRelation {
            kind: RelationKind::Conflict,
            i: i.min(j),
            j: i.max(j),
            strength: None,
        }),
    }
}

/// Relations for every pair of hit-sharing triplets, sorted by `(i, j)`.
/// Triplets are addressed by their position in `triplets`.
pub fn build_relations(triplets: &[Triplet], cuts: &TripletCuts, params: &StrengthParams) -> Vec<TripletRelation> {
    let mut by_hit: HashMap<u64, Vec<usize>> = HashMap::new();
    for (i, t) in triplets.iter().enumerate() {
        for h in t.hits {
            by_hit.entry(h).or_default().push(i);
        }
    }
    let mut pairs = BTreeSet::new();
    for members in by_hit.values() {
        for (k, &i) in members.iter().enumerate() {
            for &j in &members[k + 1..] {
                pairs.insert((i.min(j), i.max(j)));
            }
        }
    }
    pairs
        .into_iter()
        .filter_map(|(i, j)| relation_for_pair(i, j, triplets, cuts, params))
        .collect()
}

/// Number of triplets in the longest quadruplet chain through each triplet.
fn longest_chains(n: usize, relations: &[TripletRelation], triplets: &[Triplet]) -> Vec<usize> {
    let mut next: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut prev: Vec<Vec<usize>> = vec![Vec::new(); n];
    for r in relations.iter().filter(|r| r.kind == RelationKind::Quadruplet) {
        let (i, j) = if triplets[r.i].outer_doublet() == triplets[r.j].inner_doublet() {
            (r.i, r.j)
        } else {
            (r.j, r.i)
        };
        next[i].push(j);
        prev[j].push(i);
    }
    let fwd = path_lengths(&next);
    let back = path_lengths(&prev);
    (0..n).map(|i| fwd[i] + back[i] - 1).collect()
}

/// Longest path (in nodes) starting at each node of a DAG.
fn path_lengths(edges: &[Vec<usize>]) -> Vec<usize> {
    let n = edges.len();
    let mut len = vec![0usize; n];
    let mut stack = Vec::new();
    for start in 0..n {
        if len[start] != 0 {
            continue;
        }
        stack.push((start, false));
        while let Some((v, expanded)) = stack.pop() {
            if expanded {
                len[v] = 1 + edges[v].iter().map(|&w| len[w]).max().unwrap_or(0);
                continue;
            }
            if len[v] != 0 {
                continue;
            }
            stack.push((v, true));
            for &w in &edges[v] {
                if len[w] == 0 {
                    stack.push((w, false));
                }
            }
        }
    }
    len
}

fn retain_triplets(
    triplets: &[Triplet],
    relations: &[TripletRelation],
    keep: &[bool],
) -> (Vec<Triplet>, Vec<TripletRelation>) {
    let mut new_id = vec![usize::MAX; triplets.len()];
    let mut kept = Vec::new();
    for (i, t) in triplets.iter().enumerate() {
        if keep[i] {
            new_id[i] = kept.len();
            let mut t = t.clone();
            t.id = kept.len();
            kept.push(t);
        }
    }
    let rels = relations
        .iter()
        .filter(|r| keep[r.i] && keep[r.j])
        .map(|r| TripletRelation {
            i: new_id[r.i],
            j: new_id[r.j],
            ..r.clone()
        })
        .collect();
    (kept, rels)
}

/// Drops triplets that take part in no quadruplet or whose longest quadruplet
/// chain spans fewer than five hits, repeating until nothing changes.
pub fn prune_triplets(triplets: &[Triplet], relations: &[TripletRelation]) -> (Vec<Triplet>, Vec<TripletRelation>) {
    let mut triplets = triplets.to_vec();
    let mut relations = relations.to_vec();
    loop {
        let chains = longest_chains(triplets.len(), &relations, &triplets);
        let keep: Vec<bool> = chains.iter().map(|&k| k + 2 >= MIN_CHAIN_HITS).collect();
        if keep.iter().all(|&k| k) {
            return (triplets, relations);
        }
        (triplets, relations) = retain_triplets(&triplets, &relations, &keep);
    }
}

/// Equivalent to `prune_triplets(build_relations(..))`, but only evaluates
/// conflicts among triplets that survive pruning.
pub fn select_triplets(
    triplets: &[Triplet],
    cuts: &TripletCuts,
    params: &StrengthParams,
) -> (Vec<Triplet>, Vec<TripletRelation>) {
    let mut by_inner: HashMap<(u64, u64), Vec<usize>> = HashMap::new();
    for (i, t) in triplets.iter().enumerate() {
        by_inner.entry(t.inner_doublet()).or_default().push(i);
    }
    let mut links = Vec::new();
    for (i, t) in triplets.iter().enumerate() {
        if let Some(next) = by_inner.get(&t.outer_doublet()) {
            for &j in next {
                let r = chain_relation(RelationKind::Quadruplet, i, j, triplets, cuts, params);
                if r.kind == RelationKind::Quadruplet {
                    links.push(r);
                }
            }
        }
    }
    let (survivors, _) = prune_triplets(triplets, &links);
    let relations = build_relations(&survivors, cuts, params);
    (survivors, relations)
}

pub fn write_triplets_csv(triplets: &[Triplet], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["triplet_id", "hit_a", "hit_b", "hit_c", "holes", "q_over_pt", "delta_theta"])?;
    for t in triplets {
        w.write_record([
            t.id.to_string(),
            t.hits[0].to_string(),
            t.hits[1].to_string(),
            t.hits[2].to_string(),
            t.holes.to_string(),
            t.q_over_pt.to_string(),
            t.delta_theta.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
