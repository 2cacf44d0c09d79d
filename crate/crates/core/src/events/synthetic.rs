use std::f64::consts::{PI, TAU};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DetectorGeometry, Event, Hit, TrackParameters, TruthParticle};

/// Parameters of a synthetic barrel event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_particles: usize,
    /// noise hits / (noise hits + track hits)
    pub noise_fraction: f64,
    /// Transverse momentum range in MeV, sampled uniformly.
    pub pt_range: (f64, f64),
    /// Pseudorapidity is sampled uniformly in `[-eta_max, eta_max]`.
    pub eta_max: f64,
    /// Gaussian resolution along r·φ, mm.
    pub sigma_transverse: f64,
    /// Gaussian resolution along z, mm.
    pub sigma_z: f64,
    pub vertex_sigma_xy: f64,
    pub vertex_sigma_z: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_particles: 100,
            noise_fraction: 0.0,
            pt_range: (1000.0, 10_000.0),
            eta_max: 1.0,
            sigma_transverse: 0.01,
            sigma_z: 0.2,
            vertex_sigma_xy: 0.01,
            vertex_sigma_z: 5.0,
        }
    }
}

impl SyntheticConfig {
    pub fn new(n_particles: usize, noise_fraction: f64, pt_range: (f64, f64)) -> Self {
        Self {
            n_particles,
            noise_fraction,
            pt_range,
            ..Self::default()
        }
    }
}

/// Transverse-plane circle of a helix plus its direction of travel.
struct Helix {
    center: (f64, f64),
    radius: f64,
    /// Angle of the production vertex as seen from the circle center.
    start_angle: f64,
    /// +1 for counter-clockwise travel, -1 for clockwise.
    turn: f64,
    vertex: [f64; 3],
    cot_theta: f64,
}

impl Helix {
    fn new(vertex: [f64; 3], phi0: f64, radius: f64, charge: i8, cot_theta: f64) -> Self {
        // B along +z: positive charges bend clockwise.
        let turn = if charge > 0 { -1.0 } else { 1.0 };
        let center = (
            vertex[0] - turn * radius * phi0.sin(),
            vertex[1] + turn * radius * phi0.cos(),
        );
        let start_angle = (vertex[1] - center.1).atan2(vertex[0] - center.0);
        Self {
            center,
            radius,
            start_angle,
            turn,
            vertex,
            cot_theta,
        }
    }

    /// First crossing of the cylinder of radius `r` along the direction of
    /// travel, restricted to the outgoing half turn.
    fn intersect(&self, r: f64) -> Option<[f64; 3]> {
        let (cx, cy) = self.center;
        let d = cx.hypot(cy);
        if d == 0.0 {
            return None;
        }
        let along = (d * d + r * r - self.radius * self.radius) / (2.0 * d);
        let h2 = r * r - along * along;
        if h2 < 0.0 {
            return None;
        }
        let h = h2.sqrt();
        let (ux, uy) = (cx / d, cy / d);
        let candidates = [
            (along * ux - h * uy, along * uy + h * ux),
            (along * ux + h * uy, along * uy - h * ux),
        ];
        let (t, (x, y)) = candidates
            .iter()
            .map(|&(x, y)| {
                let angle = (y - cy).atan2(x - cx);
                let t = (self.turn * (angle - self.start_angle)).rem_euclid(TAU);
                (t, (x, y))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))?;
        if t > PI {
            return None;
        }
        let z = self.vertex[2] + self.radius * t * self.cot_theta;
        Some([x, y, z])
    }

    fn d0(&self) -> f64 {
        self.center.0.hypot(self.center.1) - self.radius
    }
}

/// Generates a barrel event of helical tracks from a vertex near the origin
/// plus uniformly distributed noise hits. Equal seeds give identical events.
pub fn generate_synthetic_event(geometry: &DetectorGeometry, config: &SyntheticConfig, seed: u64) -> Event {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vertex_xy = Normal::new(0.0, config.vertex_sigma_xy.max(0.0)).expect("finite sigma");
    let vertex_z = Normal::new(0.0, config.vertex_sigma_z.max(0.0)).expect("finite sigma");
    let smear_t = Normal::new(0.0, config.sigma_transverse.max(0.0)).expect("finite sigma");
    let smear_z = Normal::new(0.0, config.sigma_z.max(0.0)).expect("finite sigma");
    let (pt_lo, pt_hi) = config.pt_range;

    // (x, y, z, layer, particle index or None for noise)
    let mut raw: Vec<([f64; 3], usize, Option<usize>)> = Vec::new();
    let mut truth = Vec::with_capacity(config.n_particles);

    for p in 0..config.n_particles {
        let pt = if pt_hi > pt_lo { rng.random_range(pt_lo..=pt_hi) } else { pt_lo };
        let charge: i8 = if rng.random_bool(0.5) { 1 } else { -1 };
        let phi0 = rng.random_range(-PI..PI);
        let eta = if config.eta_max > 0.0 {
            rng.random_range(-config.eta_max..=config.eta_max)
        } else {
            0.0
        };
        let cot_theta = eta.sinh();
        let vertex = [
            vertex_xy.sample(&mut rng),
            vertex_xy.sample(&mut rng),
            vertex_z.sample(&mut rng),
        ];
        let helix = Helix::new(vertex, phi0, geometry.radius_for_pt(pt), charge, cot_theta);

        for (layer, &radius) in geometry.layer_radii.iter().enumerate() {
            let Some([x, y, z]) = helix.intersect(radius) else { break };
            if z.abs() > geometry.barrel_half_length {
                break;
            }
            let phi = y.atan2(x) + smear_t.sample(&mut rng) / radius;
            let z = z + smear_z.sample(&mut rng);
            raw.push(([radius * phi.cos(), radius * phi.sin(), z], layer, Some(p)));
        }
        truth.push(TruthParticle {
            particle_id: p as u64 + 1,
            pt,
            charge,
            vertex,
            hit_ids: Vec::new(),
            params: Some(TrackParameters {
                d0: helix.d0(),
                z0: vertex[2],
                phi0,
                cot_theta,
                q_over_pt: f64::from(charge) / pt,
            }),
        });
    }

    let track_hits = raw.len();
    let f = config.noise_fraction.clamp(0.0, 0.99);
    let n_noise = (track_hits as f64 * f / (1.0 - f)).round() as usize;
    for _ in 0..n_noise {
        let layer = rng.random_range(0..geometry.num_layers());
        let radius = geometry.layer_radii[layer];
        let phi = rng.random_range(-PI..PI);
        let z = rng.random_range(-geometry.barrel_half_length..=geometry.barrel_half_length);
        raw.push(([radius * phi.cos(), radius * phi.sin(), z], layer, None));
    }

    raw.shuffle(&mut rng);
    let mut hits = Vec::with_capacity(raw.len());
    for (i, ([x, y, z], layer, owner)) in raw.into_iter().enumerate() {
        let hit_id = i as u64 + 1;
        hits.push(Hit::new(hit_id, x, y, z, layer));
        if let Some(p) = owner {
            truth[p].hit_ids.push(hit_id);
        }
    }
    Event::new(hits, truth, geometry.clone()).expect("generated truth links are consistent")
}
