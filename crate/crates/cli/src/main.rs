use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use qubotrack::events::{
    generate_synthetic_event, load_event, write_hits_csv, write_truth_csv, DetectorGeometry, SyntheticConfig,
};
use qubotrack::pipeline::{run_multiplicity_scan, run_pipeline, EventSource, PipelineConfig, SolverKind, SCAN_FILE};
use qubotrack::postmetrics::{count_doublets_with, MetricsReport, Qualification};
use qubotrack::qubo::parse_qubo_file;
use qubotrack::seeding::read_doublets_csv;
use qubotrack::solver::SubSolver;

/// Triplet-QUBO track finding on barrel detector events.
#[derive(Parser)]
#[command(name = "qubotrack", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline on one event and print its metrics.
    Run(PipelineArgs),
    /// Run the pipeline on growing subsets of one event.
    Scan {
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Comma-separated particle fractions in (0, 1].
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.25,0.5,0.75,1.0")]
        fractions: Vec<f64>,
        /// Run the points concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Write a synthetic event as hits.csv and truth.csv.
    Gen {
        #[command(flatten)]
        event: SyntheticArgs,
        #[arg(long)]
        geometry: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Solve a QUBO file and print the result as JSON.
    Solve {
        qubo: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the result here instead of stdout.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Score reconstructed doublets against truth.
    Score {
        #[arg(long)]
        doublets: PathBuf,
        #[arg(long)]
        hits: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        geometry: Option<PathBuf>,
        /// MeV
        #[arg(long, default_value_t = 1000.0)]
        min_pt: f64,
        #[arg(long, default_value_t = 5)]
        min_hits: usize,
    },
}

#[derive(Args, Default)]
struct SyntheticArgs {
    #[arg(long)]
    particles: Option<usize>,
    /// Fraction of all hits that are noise.
    #[arg(long)]
    noise: Option<f64>,
    /// MeV
    #[arg(long)]
    pt_min: Option<f64>,
    /// MeV
    #[arg(long)]
    pt_max: Option<f64>,
}

impl SyntheticArgs {
    fn apply(&self, s: &mut SyntheticConfig) {
        if let Some(n) = self.particles {
            s.n_particles = n;
        }
        if let Some(v) = self.noise {
            s.noise_fraction = v;
        }
        if let Some(v) = self.pt_min {
            s.pt_range.0 = v;
        }
        if let Some(v) = self.pt_max {
            s.pt_range.1 = v;
        }
    }

    fn is_set(&self) -> bool {
        self.particles.is_some() || self.noise.is_some() || self.pt_min.is_some() || self.pt_max.is_some()
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverFlag {
    Decompose,
    Anneal,
    Tabu,
    BruteForce,
}

#[derive(Clone, Copy, ValueEnum)]
enum SubSolverFlag {
    Anneal,
    BruteForce,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, value_enum)]
    solver: Option<SolverFlag>,
    #[arg(long, value_enum)]
    sub_solver: Option<SubSolverFlag>,
    #[arg(long)]
    sub_qubo_size: Option<usize>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Annealing sweeps, for the annealer and the annealing sub-solver.
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    reads: Option<usize>,
    #[arg(long)]
    tabu_tenure: Option<usize>,
}

impl SolverArgs {
    fn apply(&self, cfg: &mut qubotrack::pipeline::SolverConfig) {
        if let Some(s) = self.solver {
            cfg.kind = match s {
                SolverFlag::Decompose => SolverKind::Decompose,
                SolverFlag::Anneal => SolverKind::Anneal,
                SolverFlag::Tabu => SolverKind::Tabu,
                SolverFlag::BruteForce => SolverKind::BruteForce,
            };
        }
        if let Some(s) = self.sub_solver {
            cfg.sub_solver = match s {
                SubSolverFlag::Anneal => SubSolver::Anneal,
                SubSolverFlag::BruteForce => SubSolver::BruteForce,
            };
        }
        if let Some(v) = self.sub_qubo_size {
            cfg.decomposition.sub_qubo_size = v;
        }
        if let Some(v) = self.max_iterations {
            cfg.decomposition.max_iterations = v;
        }
        if let Some(v) = self.sweeps {
            cfg.anneal.sweeps = v;
            cfg.decomposition.sub_anneal.sweeps = v;
        }
        if let Some(v) = self.reads {
            cfg.anneal.reads = v;
            cfg.decomposition.sub_anneal.reads = v;
        }
        if let Some(v) = self.tabu_tenure {
            cfg.tabu.tenure = v;
            cfg.decomposition.tabu_tenure = v;
        }
    }
}

/// Flags mirror `PipelineConfig`; anything given here overrides the config
/// file, which in turn overrides the defaults.
#[derive(Args)]
struct PipelineArgs {
    /// TOML pipeline configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// TOML geometry (layer_radii, half_length_mm, b_tesla).
    #[arg(long)]
    geometry: Option<PathBuf>,
    /// Hits CSV; requires --truth and replaces the synthetic event.
    #[arg(long, requires = "truth")]
    hits: Option<PathBuf>,
    #[arg(long, requires = "hits")]
    truth: Option<PathBuf>,
    #[command(flatten)]
    synthetic: SyntheticArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Weight of the impact-parameter bias (0 disables it).
    #[arg(long)]
    impact_bias: Option<f64>,
    #[arg(long)]
    min_track_hits: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the run artifacts.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

impl PipelineArgs {
    fn config(&self) -> anyhow::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::from_file(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(p) = &self.geometry {
            cfg.geometry_path = Some(p.clone());
        }
        if let (Some(hits), Some(truth)) = (&self.hits, &self.truth) {
            if self.synthetic.is_set() {
                bail!("synthetic event flags cannot be combined with --hits/--truth");
            }
            cfg.event = EventSource::Files {
                hits: hits.clone(),
                truth: truth.clone(),
            };
        } else if self.synthetic.is_set() {
            let EventSource::Synthetic(s) = &mut cfg.event else {
                bail!("synthetic event flags given but the config reads the event from files");
            };
            self.synthetic.apply(s);
        }
        self.solver.apply(&mut cfg.solver);
        if let Some(v) = self.zeta {
            cfg.qubo.zeta = v;
        }
        if let Some(v) = self.alpha {
            cfg.qubo.alpha = v;
        }
        if let Some(v) = self.impact_bias {
            cfg.qubo.impact_bias_lambda = v;
        }
        if let Some(v) = self.min_track_hits {
            cfg.min_track_hits = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.output_dir = Some(v.clone());
        }
        Ok(cfg)
    }
}

fn geometry(path: Option<&Path>) -> anyhow::Result<DetectorGeometry> {
    Ok(match path {
        Some(p) => DetectorGeometry::from_file(p)?,
        None => DetectorGeometry::default(),
    })
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Run(args) => {
            let cfg = args.config()?;
            let summary = run_pipeline(&cfg)?;
            println!("{}", summary.report.to_json());
        }
        Command::Scan {
            pipeline,
            fractions,
            parallel,
        } => {
            let cfg = pipeline.config()?;
            cfg.validate()?;
            let event = cfg.load_event()?;
            let points = run_multiplicity_scan(&cfg, &fractions, &event, parallel)?;
            println!("fraction,n_particles,efficiency,purity,score,n_fakes,wall_time_s,status");
            for p in &points {
                let f = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.4}"));
                println!(
                    "{},{},{},{},{},{},{:.2},{}",
                    p.fraction,
                    p.n_particles,
                    f(p.efficiency),
                    f(p.purity),
                    f(p.score),
                    p.n_fakes.map_or_else(String::new, |v| v.to_string()),
                    p.wall_time_s,
                    p.status
                );
            }
            if let Some(dir) = &cfg.output_dir {
                eprintln!("wrote {}", dir.join(SCAN_FILE).display());
            }
        }
        Command::Gen {
            event,
            geometry: geometry_path,
            seed,
            out,
        } => {
            let geometry = geometry(geometry_path.as_deref())?;
            let mut synthetic = SyntheticConfig::default();
            event.apply(&mut synthetic);
            let ev = generate_synthetic_event(&geometry, &synthetic, seed);
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            write_hits_csv(&ev, out.join("hits.csv"))?;
            write_truth_csv(&ev, out.join("truth.csv"))?;
            eprintln!("{} hits, {} particles", ev.hits.len(), ev.truth.len());
        }
        Command::Solve { qubo, solver, seed, out } => {
            let q = parse_qubo_file(&qubo)?;
            let mut cfg = qubotrack::pipeline::SolverConfig::default();
            solver.apply(&mut cfg);
            let result = qubotrack::pipeline::solve(&q, &cfg, seed)?;
            match out {
                Some(path) => result.write_json(path)?,
                None => println!("{}", result.to_json()),
            }
        }
        Command::Score {
            doublets,
            hits,
            truth,
            geometry: geometry_path,
            min_pt,
            min_hits,
        } => {
            let event = load_event(hits, truth, geometry(geometry_path.as_deref())?)?;
            let (doublets, n_candidates) = read_doublets_csv(doublets)?;
            let counts = count_doublets_with(&doublets, &event, &Qualification { min_pt, min_hits });
            let report = MetricsReport::from_counts(&counts, n_candidates.unwrap_or(0))?;
            println!("{}", report.to_json());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        // library errors already carry their cause in the message
        Err(e) => match e.downcast_ref::<qubotrack::Error>() {
            Some(err) => {
                eprintln!("error: {err}");
                ExitCode::from(if err.is_undefined_metric() { 2 } else { 1 })
            }
            None => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        },
    }
}
