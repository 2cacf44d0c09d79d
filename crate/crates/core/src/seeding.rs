//! Initial doublet generation: geometric pairing of hits on nearby layers.

use std::f64::consts::{PI, TAU};
use std::collections::BTreeSet;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{Event, Hit};
use crate::postmetrics::{count_doublets, DoubletCounts};

/// Two hits ordered by increasing transverse radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Doublet {
    pub inner: u64,
    pub outer: u64,
}

impl Doublet {
    pub fn new(inner: u64, outer: u64) -> Self {
        Self { inner, outer }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeedingCuts {
    /// Number of layers that may be skipped between the two hits.
    pub max_layer_gap: usize,
    pub max_abs_dzdr: f64,
    /// mm
    pub max_r_gap: f64,
    /// Azimuthal opening per unit radius, rad/mm. `None` disables the cut.
    pub max_abs_dphidr: Option<f64>,
}

impl Default for SeedingCuts {
    fn default() -> Self {
        Self {
            max_layer_gap: 1,
            max_abs_dzdr: 10.0,
            max_r_gap: 300.0,
            max_abs_dphidr: Some(5e-4),
        }
    }
}

impl SeedingCuts {
    pub fn validate(&self) -> Result<()> {
        let dphi_ok = self.max_abs_dphidr.is_none_or(|v| v > 0.0);
        if self.max_abs_dzdr > 0.0 && self.max_r_gap > 0.0 && dphi_ok {
            Ok(())
        } else {
            Err(Error::Config("seeding cuts must be positive".into()))
        }
    }

    /// Checks all cut predicates for an ordered pair of hits.
    pub fn accepts(&self, a: &Hit, b: &Hit) -> bool {
        if a.r >= b.r || b.layer <= a.layer || b.layer - a.layer > 1 + self.max_layer_gap {
            return false;
        }
        let dr = b.r - a.r;
        if dr > self.max_r_gap || (b.z - a.z).abs() > self.max_abs_dzdr * dr {
            return false;
        }
        match self.max_abs_dphidr {
            Some(k) => wrap_angle(b.phi() - a.phi()).abs() <= k * dr,
            None => true,
        }
    }
}

pub(crate) fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// All hit pairs passing `cuts`, sorted by `(inner, outer)`.
pub fn generate_initial_doublets(event: &Event, cuts: &SeedingCuts) -> Vec<Doublet> {
    let n_layers = event.geometry.num_layers();
    // per layer: hits sorted by phi
    let mut layers: Vec<Vec<(f64, &Hit)>> = vec![Vec::new(); n_layers];
    for h in &event.hits {
        if h.layer < n_layers {
            layers[h.layer].push((h.phi(), h));
        }
    }
    for layer in &mut layers {
        layer.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.hit_id.cmp(&b.1.hit_id)));
    }

    let mut out = Vec::new();
    for inner_layer in 0..n_layers {
        let last = (inner_layer + 1 + cuts.max_layer_gap).min(n_layers - 1);
        for outer_layer in inner_layer + 1..=last {
            let outer = &layers[outer_layer];
            if outer.is_empty() {
                continue;
            }
            let outer_r_max = outer.iter().map(|(_, h)| h.r).fold(0.0, f64::max);
            for &(phi, a) in &layers[inner_layer] {
                let window = cuts
                    .max_abs_dphidr
                    .map(|k| k * (outer_r_max - a.r).min(cuts.max_r_gap).max(0.0));
                match window {
                    Some(w) if w < PI => {
                        for_each_in_phi_window(outer, phi, w, |b| {
                            if cuts.accepts(a, b) {
                                out.push(Doublet::new(a.hit_id, b.hit_id));
                            }
                        });
                    }
                    _ => {
                        for (_, b) in outer {
                            if cuts.accepts(a, b) {
                                out.push(Doublet::new(a.hit_id, b.hit_id));
                            }
                        }
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Visits entries of a phi-sorted slice within `[phi - w, phi + w]`, with
/// wrap-around at ±π. The window is padded slightly; callers re-check exactly.
fn for_each_in_phi_window<'a>(sorted: &[(f64, &'a Hit)], phi: f64, w: f64, mut f: impl FnMut(&'a Hit)) {
    let w = w + 1e-9;
    let lo = phi - w;
    let hi = phi + w;
    let lower = |x: f64| sorted.partition_point(|e| e.0 < x);
    let upper = |x: f64| sorted.partition_point(|e| e.0 <= x);
    let mut ranges = vec![(lower(lo.max(-PI)), upper(hi.min(PI)))];
    if lo < -PI {
        ranges.push((lower(lo + TAU), sorted.len()));
    }
    if hi > PI {
        ranges.push((0, upper(hi - TAU)));
    }
    for (start, end) in ranges {
        for e in &sorted[start..end.max(start)] {
            f(e.1);
        }
    }
}

/// Efficiency and purity of a doublet set against truth.
pub fn doublet_efficiency_purity(doublets: &[Doublet], event: &Event) -> Result<(f64, f64)> {
    let counts: DoubletCounts = count_doublets(doublets, event);
    Ok((counts.efficiency()?, counts.purity()?))
}

pub fn write_doublets_csv(doublets: &[Doublet], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["inner_hit_id", "outer_hit_id"])?;
    for d in doublets {
        w.write_record([d.inner.to_string(), d.outer.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads `inner_hit_id,outer_hit_id` rows; extra columns (such as
/// `candidate_id`) are ignored. Returns the doublets and, when present, the
/// number of distinct candidate ids.
pub fn read_doublets_csv(path: impl AsRef<Path>) -> Result<(Vec<Doublet>, Option<usize>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = r.headers()?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn {
            file: path.display().to_string(),
            column: name.to_string(),
        })
    };
    let (inner, outer) = (column("inner_hit_id")?, column("outer_hit_id")?);
    let candidate = headers.iter().position(|h| h == "candidate_id");
    let mut doublets = Vec::new();
    let mut candidates = BTreeSet::new();
    for (k, record) in r.records().enumerate() {
        let record = record?;
        let field = |i: usize| -> Result<u64> {
            record.get(i).and_then(|v| v.parse().ok()).ok_or_else(|| Error::Format {
                file: path.display().to_string(),
                line: k + 2,
                message: format!("expected an integer in column {}", headers.get(i).unwrap_or("?")),
            })
        };
        doublets.push(Doublet::new(field(inner)?, field(outer)?));
        if let Some(c) = candidate {
            candidates.insert(field(c)?);
        }
    }
    Ok((doublets, candidate.map(|_| candidates.len())))
}
