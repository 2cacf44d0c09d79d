//! QUBO assembly from triplet relations, energy evaluation and the plain-text
//! instance format.

mod file;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::triplets::{RelationKind, Triplet, TripletRelation};

pub use file::{format_qubo, parse_qubo, parse_qubo_file, write_qubo_file};

/// Largest coefficient magnitude accepted by the annealing hardware.
pub const COEFFICIENT_LIMIT: f64 = 2.0;

/// Constants of the quadruplet strength function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrengthParams {
    pub z1: f64,
    /// Weight of the curvature term relative to the angle term, in [0, 1].
    pub z2: f64,
    pub z3: f64,
    pub z4: f64,
    pub z5: f64,
}

impl Default for StrengthParams {
    fn default() -> Self {
        Self {
            z1: 1.0,
            z2: 0.5,
            z3: 1.0,
            z4: 1.0,
            z5: 2.0,
        }
    }
}

impl StrengthParams {
    pub fn validate(&self) -> Result<()> {
        if (0.0..=1.0).contains(&self.z2) && [self.z1, self.z3, self.z4, self.z5].iter().all(|z| z.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config("strength: z2 must lie in [0, 1] and all constants be finite".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuboParams {
    /// Bias weight shared by every triplet.
    pub alpha: f64,
    /// Coupling of conflicting triplets.
    pub zeta: f64,
    /// Strength of the impact-parameter bias; 0 disables it.
    pub impact_bias_lambda: f64,
    /// mm
    pub d0_scale: f64,
}

impl Default for QuboParams {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            zeta: 1.0,
            impact_bias_lambda: 0.0,
            d0_scale: 3.0,
        }
    }
}

impl QuboParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta.abs() <= COEFFICIENT_LIMIT) {
            return Err(Error::CoefficientRange {
                what: "zeta".into(),
                value: self.zeta,
                limit: COEFFICIENT_LIMIT,
            });
        }
        if !(self.impact_bias_lambda >= 0.0) || !(self.d0_scale > 0.0) {
            return Err(Error::Config("impact bias needs lambda >= 0 and d0_scale > 0".into()));
        }
        Ok(())
    }
}

/// `Σ a_i x_i + Σ_{i<j} b_ij x_i x_j` over binary `x`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Qubo {
    pub n: usize,
    pub linear: Vec<f64>,
    /// Upper-triangular couplings keyed by `(i, j)` with `i < j`; absent means 0.
    pub quadratic: BTreeMap<(usize, usize), f64>,
    /// Triplet id of each variable.
    pub variable_meta: Vec<usize>,
}

impl Qubo {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            linear: vec![0.0; n],
            quadratic: BTreeMap::new(),
            variable_meta: (0..n).collect(),
        }
    }

    /// Adds `value` to the coupling of `i` and `j` (either order). Zero
    /// results are removed.
    pub fn add_coupling(&mut self, i: usize, j: usize, value: f64) {
        assert!(i != j && i < self.n && j < self.n, "invalid coupler ({i}, {j})");
        let key = (i.min(j), i.max(j));
        let entry = self.quadratic.entry(key).or_insert(0.0);
        *entry += value;
        if *entry == 0.0 {
            self.quadratic.remove(&key);
        }
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.quadratic.get(&(i.min(j), i.max(j))).copied().unwrap_or(0.0)
    }

    /// Neighbour lists: for each variable, `(other, b)` for every coupler.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n];
        for (&(i, j), &b) in &self.quadratic {
            adj[i].push((j, b));
            adj[j].push((i, b));
        }
        adj
    }

    /// Connected components of the coupling graph, each sorted ascending,
    /// ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut out = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut comp = Vec::new();
            while let Some(v) = stack.pop() {
                comp.push(v);
                for &(w, _) in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Checks every coefficient against `±limit`.
    pub fn check_range(&self, limit: f64) -> Result<()> {
        for (i, &a) in self.linear.iter().enumerate() {
            if !(a.abs() <= limit) {
                return Err(Error::CoefficientRange {
                    what: format!("a[{i}]"),
                    value: a,
                    limit,
                });
            }
        }
        for (&(i, j), &b) in &self.quadratic {
            if !(b.abs() <= limit) {
                return Err(Error::CoefficientRange {
                    what: format!("b[{i},{j}]"),
                    value: b,
                    limit,
                });
            }
        }
        Ok(())
    }
}

/// Binary state over the QUBO variables.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub bits: Vec<bool>,
}

impl Assignment {
    pub fn zeros(n: usize) -> Self {
        Self { bits: vec![false; n] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn to_bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    pub fn from_bit_string(s: &str) -> Option<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<bool>>>()
            .map(|bits| Self { bits })
    }
}

impl From<Vec<bool>> for Assignment {
    fn from(bits: Vec<bool>) -> Self {
        Self { bits }
    }
}

/// Quadruplet strength:
/// `z1·[z2·(1−|Δq/pT|)^z3 + (1−z2)·(1−max δθ)^z4] / (1+H_i+H_j)^z5`.
pub fn strength(t_i: &Triplet, t_j: &Triplet, p: &StrengthParams) -> f64 {
    let dq = (t_i.q_over_pt - t_j.q_over_pt).abs();
    let dtheta = t_i.delta_theta.max(t_j.delta_theta);
    let holes = f64::from(t_i.holes + t_j.holes);
    p.z1 * (p.z2 * (1.0 - dq).powf(p.z3) + (1.0 - p.z2) * (1.0 - dtheta).powf(p.z4))
        / (1.0 + holes).powf(p.z5)
}

/// QUBO coupling of a relation; `None` for relations that carry no coupling.
pub fn coupling(relation: &TripletRelation, q: &QuboParams) -> Option<f64> {
    match relation.kind {
        RelationKind::Quadruplet | RelationKind::Quintet => relation.strength.map(|s| -s),
        RelationKind::Conflict => Some(q.zeta),
        RelationKind::None => None,
    }
}

/// Linear coefficient of a triplet: `α + λ·min(|d0|/d0_scale, 1)`.
pub fn apply_impact_bias(triplet: &Triplet, q: &QuboParams) -> f64 {
    if q.impact_bias_lambda == 0.0 {
        return q.alpha;
    }
    q.alpha + q.impact_bias_lambda * (triplet.d0_estimate.abs() / q.d0_scale).min(1.0)
}

/// One variable per triplet (by position), couplings from the relations.
pub fn build_qubo(
    triplets: &[Triplet],
    relations: &[TripletRelation],
    q: &QuboParams,
) -> Result<Qubo> {
    q.validate()?;
    let mut qubo = Qubo::new(triplets.len());
    qubo.variable_meta = triplets.iter().map(|t| t.id).collect();
    for (i, t) in triplets.iter().enumerate() {
        qubo.linear[i] = apply_impact_bias(t, q);
    }
    for r in relations {
        if let Some(b) = coupling(r, q) {
            if r.i == r.j || r.i >= qubo.n || r.j >= qubo.n {
                return Err(Error::Dimension {
                    expected: qubo.n,
                    found: r.i.max(r.j) + 1,
                });
            }
            qubo.add_coupling(r.i, r.j, b);
        }
    }
    qubo.check_range(COEFFICIENT_LIMIT)?;
    Ok(qubo)
}

pub fn energy(qubo: &Qubo, x: &Assignment) -> Result<f64> {
    if x.len() != qubo.n {
        return Err(Error::Dimension {
            expected: qubo.n,
            found: x.len(),
        });
    }
    Ok(energy_unchecked(qubo, &x.bits))
}

pub(crate) fn energy_unchecked(qubo: &Qubo, bits: &[bool]) -> f64 {
    let linear: f64 = qubo
        .linear
        .iter()
        .zip(bits)
        .filter(|(_, &b)| b)
        .map(|(a, _)| a)
        .sum();
    let quadratic: f64 = qubo
        .quadratic
        .iter()
        .filter(|(&(i, j), _)| bits[i] && bits[j])
        .map(|(_, b)| b)
        .sum();
    linear + quadratic
}
