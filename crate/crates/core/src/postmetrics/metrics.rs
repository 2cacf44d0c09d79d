use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::Event;
use crate::seeding::Doublet;

/// Which particles count towards the metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Qualification {
    /// Strict lower bound on pT, MeV.
    pub min_pt: f64,
    pub min_hits: usize,
}

impl Default for Qualification {
    fn default() -> Self {
        Self {
            min_pt: 1000.0,
            min_hits: 5,
        }
    }
}

/// Doublet tallies against truth. A reconstructed doublet is matched when its
/// two hits are consecutive (in radius) hits of one particle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DoubletCounts {
    pub d_true: usize,
    pub d_rec: usize,
    pub d_rec_matched: usize,
    /// Matched to a particle that fails the qualification.
    pub d_rec_oa: usize,
    pub w_true: f64,
    pub w_matched: f64,
}

impl DoubletCounts {
    pub fn fakes(&self) -> usize {
        self.d_rec - self.d_rec_matched - self.d_rec_oa
    }

    pub fn efficiency(&self) -> Result<f64> {
        if self.d_true == 0 {
            return Err(Error::UndefinedMetric("no true doublets".into()));
        }
        Ok(self.d_rec_matched as f64 / self.d_true as f64)
    }

    pub fn purity(&self) -> Result<f64> {
        let denominator = self.d_rec - self.d_rec_oa;
        if denominator == 0 {
            return Err(Error::UndefinedMetric("no reconstructed doublets to assess purity".into()));
        }
        Ok(self.d_rec_matched as f64 / denominator as f64)
    }

    pub fn score(&self) -> Result<f64> {
        if self.d_true == 0 {
            return Err(Error::UndefinedMetric("no true doublets".into()));
        }
        Ok(self.w_matched / self.w_true)
    }
}

/// Weight of a true doublet: `log10(pT / GeV) + 1`, at least 0.1.
pub fn doublet_weight(pt_mev: f64) -> f64 {
    ((pt_mev / 1000.0).log10() + 1.0).max(0.1)
}

pub fn count_doublets(doublets: &[Doublet], event: &Event) -> DoubletCounts {
    count_doublets_with(doublets, event, &Qualification::default())
}

pub fn count_doublets_with(doublets: &[Doublet], event: &Event, q: &Qualification) -> DoubletCounts {
    // consecutive truth pair -> (qualifies, weight)
    let mut truth: HashMap<Doublet, (bool, f64)> = HashMap::new();
    let mut counts = DoubletCounts::default();
    for p in &event.truth {
        let qualifies = p.pt > q.min_pt && p.hit_ids.len() >= q.min_hits;
        let w = doublet_weight(p.pt);
        for pair in p.hit_ids.windows(2) {
            truth.insert(Doublet::new(pair[0], pair[1]), (qualifies, w));
            if qualifies {
                counts.d_true += 1;
                counts.w_true += w;
            }
        }
    }
    let unique: BTreeSet<&Doublet> = doublets.iter().collect();
    counts.d_rec = unique.len();
    for d in unique {
        match truth.get(d) {
            Some(&(true, w)) => {
                counts.d_rec_matched += 1;
                counts.w_matched += w;
            }
            Some(&(false, _)) => counts.d_rec_oa += 1,
            None => {}
        }
    }
    counts
}

pub fn efficiency(doublets: &[Doublet], event: &Event) -> Result<f64> {
    count_doublets(doublets, event).efficiency()
}

pub fn purity(doublets: &[Doublet], event: &Event) -> Result<f64> {
    count_doublets(doublets, event).purity()
}

pub fn weighted_score(doublets: &[Doublet], event: &Event) -> Result<f64> {
    count_doublets(doublets, event).score()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub efficiency: f64,
    pub purity: f64,
    pub score: f64,
    pub d_true: usize,
    pub d_rec: usize,
    pub d_rec_matched: usize,
    pub d_rec_oa: usize,
    pub n_candidates: usize,
}

impl MetricsReport {
    pub fn from_counts(counts: &DoubletCounts, n_candidates: usize) -> Result<Self> {
        Ok(Self {
            efficiency: counts.efficiency()?,
            purity: counts.purity()?,
            score: counts.score()?,
            d_true: counts.d_true,
            d_rec: counts.d_rec,
            d_rec_matched: counts.d_rec_matched,
            d_rec_oa: counts.d_rec_oa,
            n_candidates,
        })
    }

    pub fn fakes(&self) -> usize {
        self.d_rec - self.d_rec_matched - self.d_rec_oa
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialise")
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}
