//! End-to-end runs: event → doublets → triplets → QUBO → solve → track
//! candidates → metrics, plus multiplicity scans over subsets of one event.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{generate_synthetic_event, load_event, split_event, DetectorGeometry, Event, SyntheticConfig};
use crate::postmetrics::{
    build_candidates, candidate_doublets, count_doublets, resolve_conflicts, selected_triplets_to_doublets,
    write_final_doublets_csv, MetricsReport,
};
use crate::qubo::{build_qubo, write_qubo_file, Assignment, Qubo, QuboParams, StrengthParams};
use crate::seeding::{generate_initial_doublets, Doublet, SeedingCuts};
use crate::solver::{
    brute_force_by_components, decompose_solve, simulated_anneal, tabu_search, AnnealSchedule, DecompositionConfig,
    SolveResult, SubSolver, TabuConfig,
};
use crate::triplets::{build_triplets, select_triplets, TripletCuts};

pub const QUBO_FILE: &str = "qubo.txt";
pub const SOLVE_FILE: &str = "solve.json";
pub const DOUBLETS_FILE: &str = "doublets.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SCAN_FILE: &str = "scan.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventSource {
    Synthetic(SyntheticConfig),
    Files { hits: PathBuf, truth: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Decompose,
    Anneal,
    Tabu,
    /// Exact, one connected component at a time.
    BruteForce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub sub_solver: SubSolver,
    pub anneal: AnnealSchedule,
    pub tabu: TabuConfig,
    pub decomposition: DecompositionConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kind: SolverKind::Decompose,
            sub_solver: SubSolver::Anneal,
            anneal: AnnealSchedule::default(),
            tabu: TabuConfig::default(),
            decomposition: DecompositionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// TOML geometry file; `geometry` is used when absent.
    pub geometry_path: Option<PathBuf>,
    pub geometry: DetectorGeometry,
    pub event: EventSource,
    pub seeding: SeedingCuts,
    pub triplet_cuts: TripletCuts,
    pub strength: StrengthParams,
    pub qubo: QuboParams,
    pub solver: SolverConfig,
    pub min_track_hits: usize,
    /// Where artifacts go; nothing is written when absent.
    pub output_dir: Option<PathBuf>,
    /// Master seed for event generation, splitting and the solvers. It
    /// replaces the seeds inside the solver sections.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            geometry_path: None,
            geometry: DetectorGeometry::default(),
            event: EventSource::Synthetic(SyntheticConfig::default()),
            seeding: SeedingCuts::default(),
            triplet_cuts: TripletCuts::default(),
            strength: StrengthParams::default(),
            qubo: QuboParams::default(),
            solver: SolverConfig::default(),
            min_track_hits: 5,
            output_dir: None,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = &self.geometry_path {
            if !p.is_file() {
                return Err(Error::Config(format!("geometry file {} does not exist", p.display())));
            }
        }
        if let EventSource::Files { hits, truth } = &self.event {
            for p in [hits, truth] {
                if !p.is_file() {
                    return Err(Error::Config(format!("event file {} does not exist", p.display())));
                }
            }
        }
        if self.min_track_hits < 2 {
            return Err(Error::Config("min_track_hits must be at least 2".into()));
        }
        self.geometry.validate()?;
        self.seeding.validate()?;
        self.strength.validate()?;
        self.qubo.validate()?;
        self.solver.anneal.validate()?;
        self.solver.decomposition.validate()
    }

    pub fn resolve_geometry(&self) -> Result<DetectorGeometry> {
        match &self.geometry_path {
            Some(p) => DetectorGeometry::from_file(p),
            None => Ok(self.geometry.clone()),
        }
    }

    /// Builds or loads the input event.
    pub fn load_event(&self) -> Result<Event> {
        let geometry = self.resolve_geometry()?;
        match &self.event {
            EventSource::Synthetic(s) => Ok(generate_synthetic_event(&geometry, s, self.seed)),
            EventSource::Files { hits, truth } => load_event(hits, truth, geometry),
        }
    }
}

/// Everything a run produces besides the files on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub report: MetricsReport,
    pub n_particles: usize,
    pub n_doublets: usize,
    pub n_triplets: usize,
    pub n_qubo_vars: usize,
    pub energy: f64,
    pub n_fakes: usize,
    pub final_doublets: Vec<(Doublet, usize)>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    package: &'static str,
    version: &'static str,
    seed: u64,
    n_hits: usize,
    n_particles: usize,
    config: &'a PipelineConfig,
}

/// Loads (or generates) the configured event and runs every stage on it.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunSummary> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let event = cfg.load_event().map_err(|e| e.in_stage("preprocess"))?;
    run_pipeline_on_event(cfg, &event)
}

pub fn solve(qubo: &Qubo, solver: &SolverConfig, seed: u64) -> Result<SolveResult> {
    match solver.kind {
        SolverKind::Decompose => {
            let cfg = DecompositionConfig {
                seed,
                ..solver.decomposition.clone()
            };
            decompose_solve(qubo, &cfg, solver.sub_solver)
        }
        SolverKind::Anneal => {
            let schedule = AnnealSchedule {
                seed,
                ..solver.anneal.clone()
            };
            simulated_anneal(qubo, &schedule)
        }
        SolverKind::Tabu => tabu_search(qubo, &Assignment::zeros(qubo.n), &solver.tabu),
        SolverKind::BruteForce => brute_force_by_components(qubo),
    }
}

pub fn run_pipeline_on_event(cfg: &PipelineConfig, event: &Event) -> Result<RunSummary> {
    let stage = |name: &'static str| move |e: Error| e.in_stage(name);

    let doublets = generate_initial_doublets(event, &cfg.seeding);
    let candidates = build_triplets(&doublets, event, &cfg.triplet_cuts);
    let (triplets, relations) = select_triplets(&candidates, &cfg.triplet_cuts, &cfg.strength);

    let qubo = build_qubo(&triplets, &relations, &cfg.qubo).map_err(stage("qubo"))?;
    let result = solve(&qubo, &cfg.solver, cfg.seed).map_err(stage("solve"))?;

    let selected = selected_triplets_to_doublets(&triplets, &result.best);
    let tracks = build_candidates(&selected, &triplets, &result.best, &relations);
    let tracks = resolve_conflicts(&tracks, cfg.min_track_hits);
    let final_doublets = candidate_doublets(&tracks);

    if let Some(dir) = &cfg.output_dir {
        write_artifacts(cfg, event, dir, &qubo, &result, &final_doublets).map_err(stage("output"))?;
    }

    let reconstructed: Vec<Doublet> = final_doublets.iter().map(|(d, _)| *d).collect();
    let counts = count_doublets(&reconstructed, event);
    let report = MetricsReport::from_counts(&counts, tracks.len()).map_err(stage("scoring"))?;
    if let Some(dir) = &cfg.output_dir {
        report.write_json(dir.join(METRICS_FILE)).map_err(stage("output"))?;
    }

    Ok(RunSummary {
        report,
        n_particles: event.truth.len(),
        n_doublets: doublets.len(),
        n_triplets: triplets.len(),
        n_qubo_vars: qubo.n,
        energy: result.best_energy,
        n_fakes: counts.fakes(),
        final_doublets,
    })
}

fn write_artifacts(
    cfg: &PipelineConfig,
    event: &Event,
    dir: &Path,
    qubo: &Qubo,
    result: &SolveResult,
    final_doublets: &[(Doublet, usize)],
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = Manifest {
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        n_hits: event.hits.len(),
        n_particles: event.truth.len(),
        config: cfg,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    write_qubo_file(qubo, dir.join(QUBO_FILE))?;
    result.write_json(dir.join(SOLVE_FILE))?;
    write_final_doublets_csv(final_doublets, dir.join(DOUBLETS_FILE))
}

/// One row of a multiplicity scan. Failed points keep their fraction and
/// particle count and carry the error text in `status`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanPoint {
    pub fraction: f64,
    pub n_particles: usize,
    pub n_triplets: Option<usize>,
    pub n_qubo_vars: Option<usize>,
    pub efficiency: Option<f64>,
    pub purity: Option<f64>,
    pub score: Option<f64>,
    pub energy: Option<f64>,
    pub wall_time_s: f64,
    pub n_fakes: Option<usize>,
    pub status: String,
    #[serde(skip)]
    pub report: Option<MetricsReport>,
}

/// Runs the pipeline on `split_event(base, f, seed)` for every fraction.
/// With one seed the subsets are nested, so larger fractions contain the
/// smaller ones. Per-point artifacts go to `output_dir/fraction_<f>`.
pub fn run_multiplicity_scan(
    cfg: &PipelineConfig,
    fractions: &[f64],
    base_event: &Event,
    parallel: bool,
) -> Result<Vec<ScanPoint>> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let point = |&fraction: &f64| scan_point(cfg, fraction, base_event);
    let points: Vec<ScanPoint> = if parallel {
        fractions.par_iter().map(point).collect()
    } else {
        fractions.iter().map(point).collect()
    };
    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_scan_csv(&points, dir.join(SCAN_FILE))?;
    }
    Ok(points)
}

fn scan_point(cfg: &PipelineConfig, fraction: f64, base_event: &Event) -> ScanPoint {
    let start = Instant::now();
    let mut point = ScanPoint {
        fraction,
        n_particles: 0,
        n_triplets: None,
        n_qubo_vars: None,
        efficiency: None,
        purity: None,
        score: None,
        energy: None,
        wall_time_s: 0.0,
        n_fakes: None,
        status: String::new(),
        report: None,
    };
    let event = match split_event(base_event, fraction, cfg.seed) {
        Ok(e) => e,
        Err(e) => {
            point.status = e.in_stage("split").to_string();
            return point;
        }
    };
    point.n_particles = event.truth.len();
    let point_cfg = PipelineConfig {
        output_dir: cfg.output_dir.as_ref().map(|d| d.join(format!("fraction_{fraction}"))),
        ..cfg.clone()
    };
    match run_pipeline_on_event(&point_cfg, &event) {
        Ok(s) => {
            point.n_triplets = Some(s.n_triplets);
            point.n_qubo_vars = Some(s.n_qubo_vars);
            point.efficiency = Some(s.report.efficiency);
            point.purity = Some(s.report.purity);
            point.score = Some(s.report.score);
            point.energy = Some(s.energy);
            point.n_fakes = Some(s.n_fakes);
            point.status = "ok".into();
            point.report = Some(s.report);
        }
        Err(e) => point.status = e.to_string(),
    }
    point.wall_time_s = start.elapsed().as_secs_f64();
    point
}

pub fn write_scan_csv(points: &[ScanPoint], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "fraction",
        "n_particles",
        "n_triplets",
        "n_qubo_vars",
        "efficiency",
        "purity",
        "score",
        "energy",
        "wall_time_s",
        "n_fakes",
        "status",
    ])?;
    fn opt<T: ToString>(v: Option<T>) -> String {
        v.map(|v| v.to_string()).unwrap_or_default()
    }
    for p in points {
        w.write_record([
            p.fraction.to_string(),
            p.n_particles.to_string(),
            opt(p.n_triplets),
            opt(p.n_qubo_vars),
            opt(p.efficiency),
            opt(p.purity),
            opt(p.score),
            opt(p.energy),
            format!("{:.3}", p.wall_time_s),
            opt(p.n_fakes),
            p.status.clone(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(n: usize, noise: f64) -> PipelineConfig {
        PipelineConfig {
            event: EventSource::Synthetic(SyntheticConfig::new(n, noise, (1000.0, 10_000.0))),
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn small_clean_event_is_reconstructed() {
        // below 1.25 GeV the triplet curvature cut rejects a track outright
        for seed in 0..5 {
            let cfg = PipelineConfig {
                seed,
                event: EventSource::Synthetic(SyntheticConfig::new(20, 0.0, (1250.0, 10_000.0))),
                solver: SolverConfig {
                    kind: SolverKind::Anneal,
                    ..SolverConfig::default()
                },
                ..PipelineConfig::default()
            };
            let s = run_pipeline(&cfg).unwrap();
            assert!(s.report.efficiency >= 0.95, "seed {seed}: {:?}", s.report);
        }
    }

    #[test]
    fn empty_event_has_undefined_metrics() {
        let err = run_pipeline(&synthetic(0, 0.0)).unwrap_err();
        assert!(err.is_undefined_metric());
        assert!(err.to_string().contains("no true doublets"), "{err}");
    }

    #[test]
    fn missing_geometry_file_is_rejected() {
        let cfg = PipelineConfig {
            geometry_path: Some("/nonexistent/geometry.toml".into()),
            ..PipelineConfig::default()
        };
        assert!(matches!(run_pipeline(&cfg), Err(Error::Stage { stage: "config", .. })));
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = PipelineConfig {
            seed: 17,
            output_dir: Some("out".into()),
            ..synthetic(50, 0.1)
        };
        assert_eq!(PipelineConfig::from_toml_str(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_toml_keeps_defaults() {
        let cfg = PipelineConfig::from_toml_str("seed = 3\n[solver]\nkind = \"tabu\"\n").unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.solver.kind, SolverKind::Tabu);
        assert_eq!(cfg.solver.decomposition.sub_qubo_size, 47);
        assert_eq!(cfg.triplet_cuts, TripletCuts::default());
    }

    #[test]
    fn scan_keeps_failed_rows() {
        let cfg = synthetic(30, 0.0);
        let event = cfg.load_event().unwrap();
        let points = run_multiplicity_scan(&cfg, &[0.01, 1.0, 1.5], &event, false).unwrap();
        assert_eq!(points.len(), 3);
        assert_ne!(points[0].status, "ok");
        assert_eq!(points[1].status, "ok");
        assert!(points[2].status.contains("split"));
    }
}
