//! Event data model: detector geometry, hits, truth particles and the
//! dataset simplifications applied before pattern recognition (barrel-only
//! hits, one deposit per particle and layer, fractional event splitting).

mod io;
mod synthetic;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_event, write_hits_csv, write_truth_csv};
pub use synthetic::{generate_synthetic_event, SyntheticConfig};

/// Particle id reserved for noise hits.
pub const NOISE_ID: u64 = 0;

/// Conversion between transverse momentum and radius of curvature:
/// `pT [MeV] = PT_PER_TESLA_MM * B [T] * R [mm]`.
pub const PT_PER_TESLA_MM: f64 = 0.3;

/// Concentric barrel layers of a cylindrical tracker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorGeometry {
    /// Layer radii in mm, strictly increasing.
    pub layer_radii: Vec<f64>,
    #[serde(rename = "half_length_mm")]
    pub barrel_half_length: f64,
    #[serde(rename = "b_tesla")]
    pub field_strength: f64,
}

impl Default for DetectorGeometry {
    fn default() -> Self {
        Self {
            layer_radii: vec![
                32.0, 72.0, 116.0, 172.0, 260.0, 360.0, 500.0, 660.0, 820.0, 1020.0,
            ],
            barrel_half_length: 1100.0,
            field_strength: 2.0,
        }
    }
}

impl DetectorGeometry {
    pub fn new(layer_radii: Vec<f64>, barrel_half_length: f64, field_strength: f64) -> Result<Self> {
        let geometry = Self {
            layer_radii,
            barrel_half_length,
            field_strength,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_radii.is_empty() {
            return Err(Error::Config("geometry needs at least one layer".into()));
        }
        if self.layer_radii[0] <= 0.0 || !self.layer_radii.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config(
                "layer radii must be positive and strictly increasing".into(),
            ));
        }
        if !(self.barrel_half_length > 0.0) {
            return Err(Error::Config("barrel half-length must be positive".into()));
        }
        if !(self.field_strength > 0.0) {
            return Err(Error::Config("magnetic field must be positive".into()));
        }
        Ok(())
    }

    /// Reads a TOML file with keys `layer_radii`, `half_length_mm`, `b_tesla`.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let geometry: Self = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn num_layers(&self) -> usize {
        self.layer_radii.len()
    }

    /// Half of the smallest gap between neighbouring layers.
    pub fn layer_tolerance(&self) -> f64 {
        self.layer_radii
            .windows(2)
            .map(|w| 0.5 * (w[1] - w[0]))
            .fold(f64::INFINITY, f64::min)
            .min(0.5 * self.layer_radii[0])
    }

    /// Nearest layer to a transverse radius, if within the tolerance band.
    pub fn layer_of(&self, r: f64) -> Option<usize> {
        let tolerance = self.layer_tolerance();
        self.layer_radii
            .iter()
            .enumerate()
            .map(|(i, &radius)| (i, (r - radius).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .filter(|&(_, d)| d <= tolerance)
            .map(|(i, _)| i)
    }

    /// Radius of curvature in mm of a track with the given pT in MeV.
    pub fn radius_for_pt(&self, pt: f64) -> f64 {
        pt / (PT_PER_TESLA_MM * self.field_strength)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub hit_id: u64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub layer: usize,
    pub r: f64,
}

impl Hit {
    pub fn new(hit_id: u64, x: f64, y: f64, z: f64, layer: usize) -> Self {
        Self {
            hit_id,
            x,
            y,
            z,
            layer,
            r: x.hypot(y),
        }
    }

    pub fn phi(&self) -> f64 {
        self.y.atan2(self.x)
    }
}

/// Helix parameters at the point of closest approach to the beam line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackParameters {
    pub d0: f64,
    pub z0: f64,
    pub phi0: f64,
    pub cot_theta: f64,
    /// Signed inverse transverse momentum, MeV⁻¹.
    pub q_over_pt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthParticle {
    pub particle_id: u64,
    /// Transverse momentum in MeV.
    pub pt: f64,
    pub charge: i8,
    pub vertex: [f64; 3],
    /// Hits of this particle ordered by increasing transverse radius.
    pub hit_ids: Vec<u64>,
    pub params: Option<TrackParameters>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub hits: Vec<Hit>,
    pub truth: Vec<TruthParticle>,
    pub geometry: DetectorGeometry,
}

impl Event {
    /// Builds an event, linking truth to hits and ordering every particle's
    /// hit list by transverse radius.
    pub fn new(hits: Vec<Hit>, mut truth: Vec<TruthParticle>, geometry: DetectorGeometry) -> Result<Self> {
        let index: HashMap<u64, usize> = hits.iter().enumerate().map(|(i, h)| (h.hit_id, i)).collect();
        if index.len() != hits.len() {
            return Err(Error::Degenerate("duplicate hit_id in event".into()));
        }
        for particle in &mut truth {
            if particle.particle_id == NOISE_ID {
                return Err(Error::Degenerate(
                    "particle id 0 is reserved for noise".into(),
                ));
            }
            let mut keyed = Vec::with_capacity(particle.hit_ids.len());
            for id in &particle.hit_ids {
                let &i = index.get(id).ok_or(Error::DanglingHit { hit_id: *id })?;
                keyed.push((hits[i].r, *id));
            }
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            particle.hit_ids = keyed.into_iter().map(|(_, id)| id).collect();
        }
        truth.sort_by_key(|p| p.particle_id);
        Ok(Self {
            hits,
            truth,
            geometry,
        })
    }

    pub fn empty(geometry: DetectorGeometry) -> Self {
        Self {
            hits: Vec::new(),
            truth: Vec::new(),
            geometry,
        }
    }

    pub fn hit_index(&self) -> HashMap<u64, usize> {
        self.hits.iter().enumerate().map(|(i, h)| (h.hit_id, i)).collect()
    }

    /// Maps each hit id to its particle id; hits without a particle are noise.
    pub fn particle_of_hit(&self) -> HashMap<u64, u64> {
        let mut map: HashMap<u64, u64> = self.hits.iter().map(|h| (h.hit_id, NOISE_ID)).collect();
        for p in &self.truth {
            for &id in &p.hit_ids {
                map.insert(id, p.particle_id);
            }
        }
        map
    }

    pub fn num_noise_hits(&self) -> usize {
        let track_hits: usize = self.truth.iter().map(|p| p.hit_ids.len()).sum();
        self.hits.len() - track_hits
    }
}

/// Keeps a single deposit per (particle, layer): the one with the smallest
/// transverse radius. Noise hits are left untouched.
pub fn dedup_per_layer(event: &Event) -> Event {
    let index = event.hit_index();
    let mut removed = std::collections::HashSet::new();
    let mut truth = event.truth.clone();
    for particle in &mut truth {
        let mut best: BTreeMap<usize, (f64, u64)> = BTreeMap::new();
        for &id in &particle.hit_ids {
            let hit = &event.hits[index[&id]];
            match best.get(&hit.layer) {
                Some(&(r, kept)) if (r, kept) <= (hit.r, id) => {
                    removed.insert(id);
                }
                Some(&(_, kept)) => {
                    removed.insert(kept);
                    best.insert(hit.layer, (hit.r, id));
                }
                None => {
                    best.insert(hit.layer, (hit.r, id));
                }
            }
        }
        particle.hit_ids.retain(|id| !removed.contains(id));
    }
    let hits = event
        .hits
        .iter()
        .filter(|h| !removed.contains(&h.hit_id))
        .copied()
        .collect();
    Event {
        hits,
        truth,
        geometry: event.geometry.clone(),
    }
}

/// Keeps a random `fraction` of the particles (with all their hits) and the
/// same fraction of noise hits.
pub fn split_event(event: &Event, fraction: f64, seed: u64) -> Result<Event> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!(
            "split fraction must be in (0, 1], got {fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let n_keep = (fraction * event.truth.len() as f64).round() as usize;
    let mut order: Vec<usize> = (0..event.truth.len()).collect();
    order.shuffle(&mut rng);
    let mut kept: Vec<usize> = order.into_iter().take(n_keep).collect();
    kept.sort_unstable();
    let truth: Vec<TruthParticle> = kept.iter().map(|&i| event.truth[i].clone()).collect();

    let owner = event.particle_of_hit();
    let mut noise: Vec<u64> = event
        .hits
        .iter()
        .filter(|h| owner[&h.hit_id] == NOISE_ID)
        .map(|h| h.hit_id)
        .collect();
    let n_noise = (fraction * noise.len() as f64).round() as usize;
    noise.shuffle(&mut rng);
    noise.truncate(n_noise);

    let mut keep: std::collections::HashSet<u64> = noise.into_iter().collect();
    for p in &truth {
        keep.extend(p.hit_ids.iter().copied());
    }
    let hits = event
        .hits
        .iter()
        .filter(|h| keep.contains(&h.hit_id))
        .copied()
        .collect();
    Ok(Event {
        hits,
        truth,
        geometry: event.geometry.clone(),
    })
}
