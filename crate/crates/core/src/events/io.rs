use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::path::Path;

use super::{DetectorGeometry, Event, Hit, TruthParticle, NOISE_ID};
use crate::error::{Error, Result};

fn open_csv(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn column_indices(
    reader: &mut csv::Reader<File>,
    path: &Path,
    wanted: &[&str],
) -> Result<Vec<usize>> {
    let headers = reader.headers()?.clone();
    wanted
        .iter()
        .map(|&name| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn {
                    file: path.display().to_string(),
                    column: name.to_string(),
                })
        })
        .collect()
}

fn field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    idx: usize,
    path: &Path,
    name: &str,
) -> Result<T> {
    let line = record.position().map_or(0, |p| p.line() as usize);
    let raw = record.get(idx).unwrap_or("");
    raw.parse().map_err(|_| Error::Format {
        file: path.display().to_string(),
        line,
        message: format!("cannot parse `{raw}` as {name}"),
    })
}

/// Reads a hits/truth CSV pair. Hits outside the barrel (unknown layer or
/// `|z|` beyond the half-length) are dropped, together with their truth links.
pub fn load_event(hits_path: impl AsRef<Path>, truth_path: impl AsRef<Path>, geometry: DetectorGeometry) -> Result<Event> {
    let hits_path = hits_path.as_ref();
    let truth_path = truth_path.as_ref();
    geometry.validate()?;

    let mut reader = open_csv(hits_path)?;
    let cols = column_indices(&mut reader, hits_path, &["hit_id", "x", "y", "z", "layer_id"])?;
    let mut all_ids = HashSet::new();
    let mut hits = Vec::new();
    for record in reader.records() {
        let record = record?;
        let hit_id: u64 = field(&record, cols[0], hits_path, "hit_id")?;
        let x: f64 = field(&record, cols[1], hits_path, "x")?;
        let y: f64 = field(&record, cols[2], hits_path, "y")?;
        let z: f64 = field(&record, cols[3], hits_path, "z")?;
        let layer: i64 = field(&record, cols[4], hits_path, "layer_id")?;
        if !all_ids.insert(hit_id) {
            return Err(Error::Format {
                file: hits_path.display().to_string(),
                line: record.position().map_or(0, |p| p.line() as usize),
                message: format!("duplicate hit_id {hit_id}"),
            });
        }
        let in_barrel = layer >= 0
            && (layer as usize) < geometry.num_layers()
            && z.abs() <= geometry.barrel_half_length;
        if in_barrel {
            hits.push(Hit::new(hit_id, x, y, z, layer as usize));
        }
    }
    let kept: HashSet<u64> = hits.iter().map(|h| h.hit_id).collect();

    let mut reader = open_csv(truth_path)?;
    let cols = column_indices(&mut reader, truth_path, &["hit_id", "particle_id", "pt", "charge"])?;
    let mut particles: BTreeMap<u64, TruthParticle> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let hit_id: u64 = field(&record, cols[0], truth_path, "hit_id")?;
        let particle_id: u64 = field(&record, cols[1], truth_path, "particle_id")?;
        let pt: f64 = field(&record, cols[2], truth_path, "pt")?;
        let charge: f64 = field(&record, cols[3], truth_path, "charge")?;
        if !all_ids.contains(&hit_id) {
            return Err(Error::DanglingHit { hit_id });
        }
        if particle_id == NOISE_ID || !kept.contains(&hit_id) {
            continue;
        }
        particles
            .entry(particle_id)
            .or_insert_with(|| TruthParticle {
                particle_id,
                pt,
                charge: if charge < 0.0 { -1 } else { 1 },
                vertex: [0.0; 3],
                hit_ids: Vec::new(),
                params: None,
            })
            .hit_ids
            .push(hit_id);
    }
    Event::new(hits, particles.into_values().collect(), geometry)
}

pub fn write_hits_csv(event: &Event, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["hit_id", "x", "y", "z", "layer_id"])?;
    for h in &event.hits {
        w.write_record([
            h.hit_id.to_string(),
            h.x.to_string(),
            h.y.to_string(),
            h.z.to_string(),
            h.layer.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn write_truth_csv(event: &Event, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["hit_id", "particle_id", "pt", "charge"])?;
    let owner = event.particle_of_hit();
    let by_id: BTreeMap<u64, &TruthParticle> =
        event.truth.iter().map(|p| (p.particle_id, p)).collect();
    for h in &event.hits {
        let pid = owner[&h.hit_id];
        let (pt, charge) = match by_id.get(&pid) {
            Some(p) => (p.pt, p.charge),
            None => (0.0, 0),
        };
        w.write_record([
            h.hit_id.to_string(),
            pid.to_string(),
            pt.to_string(),
            charge.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
