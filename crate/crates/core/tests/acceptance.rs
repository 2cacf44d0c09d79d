//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qubotrack::events::{generate_synthetic_event, DetectorGeometry, Event, Hit, SyntheticConfig, TruthParticle};
use qubotrack::pipeline::{run_multiplicity_scan, run_pipeline, EventSource, PipelineConfig, METRICS_FILE};
use qubotrack::qubo::{
    build_qubo, energy, format_qubo, parse_qubo, strength, Assignment, Qubo, QuboParams, StrengthParams,
};
use qubotrack::seeding::{generate_initial_doublets, SeedingCuts};
use qubotrack::solver::{
    brute_force, brute_force_by_components, clamp_sub_qubo, decompose_solve, simulated_anneal, AnnealSchedule,
    DecompositionConfig, SubSolver,
};
use qubotrack::triplets::{build_relations, build_triplets, select_triplets, RelationKind, Triplet, TripletCuts};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn random_qubo(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Qubo {
    let mut q = Qubo::new(n);
    for a in q.linear.iter_mut() {
        *a = rng.random_range(-2.0..=2.0);
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(density) {
                q.add_coupling(i, j, rng.random_range(-2.0..=2.0));
            }
        }
    }
    q
}

/// Straight dense evaluation, independent of the library's sparse energy.
fn dense_energy(q: &Qubo, x: &[bool]) -> f64 {
    let mut m = vec![vec![0.0; q.n]; q.n];
    for (i, a) in q.linear.iter().enumerate() {
        m[i][i] = *a;
    }
    for (&(i, j), &b) in &q.quadratic {
        m[i][j] = b;
    }
    let mut e = 0.0;
    for i in 0..q.n {
        for j in i..q.n {
            if x[i] && x[j] {
                e += m[i][j];
            }
        }
    }
    e
}

fn combinatoric_identities() -> Outcome {
    let default = DetectorGeometry::default();
    let mut failures = Vec::new();
    let mut checked = 0;
    for n in 5..=10 {
        let geometry = DetectorGeometry::new(default.layer_radii[..n].to_vec(), 1100.0, 2.0).unwrap();
        for seed in 0..5 {
            let cfg = SyntheticConfig {
                eta_max: 0.5,
                ..SyntheticConfig::new(1, 0.0, (2000.0, 10_000.0))
            };
            let event = generate_synthetic_event(&geometry, &cfg, seed);
            assert_eq!(event.hits.len(), n, "track must cross every layer");
            let cuts = TripletCuts::default();
            let doublets = generate_initial_doublets(&event, &SeedingCuts::default());
            let triplets = build_triplets(&doublets, &event, &cuts);
            let relations = build_relations(&triplets, &cuts, &StrengthParams::default());
            let quads = relations.iter().filter(|r| r.kind == RelationKind::Quadruplet).count();
            checked += 1;
            if triplets.len() != n - 2 || quads != n - 3 {
                failures.push(format!("n={n} seed={seed}: {} triplets, {quads} quadruplets", triplets.len()));
            }
        }
    }
    if failures.is_empty() {
        outcome(true, format!("{checked} tracks, n = 5..10"))
    } else {
        outcome(false, failures.join("; "))
    }
}

fn strength_formula() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cuts = TripletCuts::default();
    let params = StrengthParams::default();
    let triplet = |rng: &mut ChaCha8Rng, qpt: f64| Triplet {
        id: 0,
        hits: [1, 2, 3],
        holes: rng.random_range(0..=cuts.max_holes),
        q_over_pt: qpt,
        delta_theta: rng.random_range(0.0..=cuts.max_delta_theta),
        d0_estimate: 0.0,
        z0_estimate: 0.0,
    };
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let qi = rng.random_range(-cuts.max_abs_qpt..=cuts.max_abs_qpt);
        let qj = (qi + rng.random_range(-cuts.max_qpt_diff..=cuts.max_qpt_diff))
            .clamp(-cuts.max_abs_qpt, cuts.max_abs_qpt);
        let ti = triplet(&mut rng, qi);
        let tj = triplet(&mut rng, qj);
        let d = (ti.q_over_pt - tj.q_over_pt).abs();
        let max_dt = ti.delta_theta.max(tj.delta_theta);
        let h = 1.0 + ti.holes as f64 + tj.holes as f64;
        let expected = (0.5 * (1.0 - d) + 0.5 * (1.0 - max_dt)) / (h * h);
        worst = worst.max((strength(&ti, &tj, &params) - expected).abs());
    }
    outcome(worst <= 1e-12, format!("1000 inputs, max |diff| = {worst:.2e}"))
}

fn solver_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut anneal_match, mut below, mut decompose_match) = (0, 0, 0);
    let instances = 50;
    for k in 0..instances {
        let q = random_qubo(&mut rng, 20, 0.3);
        let exact = brute_force(&q).unwrap().best_energy;
        let anneal = simulated_anneal(
            &q,
            &AnnealSchedule {
                seed: k,
                ..AnnealSchedule::default()
            },
        )
        .unwrap()
        .best_energy;
        let decompose = decompose_solve(&q, &DecompositionConfig::default(), SubSolver::BruteForce)
            .unwrap()
            .best_energy;
        if (anneal - exact).abs() < 1e-9 {
            anneal_match += 1;
        }
        if anneal < exact - 1e-9 || decompose < exact - 1e-9 {
            below += 1;
        }
        if (decompose - exact).abs() < 1e-9 {
            decompose_match += 1;
        }
    }
    let passed = anneal_match * 100 >= 95 * instances && below == 0 && decompose_match == instances;
    outcome(
        passed,
        format!(
            "anneal {anneal_match}/{instances}, decompose {decompose_match}/{instances}, below oracle {below}"
        ),
    )
}

fn clamping_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..=40);
        let density = rng.random_range(0.05..=0.6);
        let q = random_qubo(&mut rng, n, density);
        let block: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.4)).collect();
        let state: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let clamped = clamp_sub_qubo(&q, &block, &Assignment::from(state.clone())).unwrap();
        let values: Vec<bool> = block.iter().map(|_| rng.random_bool(0.5)).collect();
        let mut full = state;
        for (&v, &b) in block.iter().zip(&values) {
            full[v] = b;
        }
        let sub = energy(&clamped.qubo, &Assignment::from(values)).unwrap() + clamped.constant;
        worst = worst.max((dense_energy(&q, &full) - sub).abs());
    }
    outcome(worst <= 1e-10, format!("100 triples, max |diff| = {worst:.2e}"))
}

fn synthetic_config(n: usize, seed: u64) -> PipelineConfig {
    PipelineConfig {
        seed,
        event: EventSource::Synthetic(SyntheticConfig::new(n, 0.1, (1000.0, 10_000.0))),
        ..PipelineConfig::default()
    }
}

fn low_multiplicity() -> Outcome {
    let mut lines = Vec::new();
    let mut passed = true;
    for seed in 0..5 {
        match run_pipeline(&synthetic_config(200, seed)) {
            Ok(s) => {
                let r = s.report;
                passed &= r.efficiency >= 0.9 && r.purity >= 0.9 && r.score >= 0.9;
                lines.push(format!("eff {:.3} pur {:.3} score {:.3}", r.efficiency, r.purity, r.score));
            }
            Err(e) => {
                passed = false;
                lines.push(e.to_string());
            }
        }
    }
    outcome(passed, lines.join(" | "))
}

fn degradation_trend() -> Outcome {
    let cfg = synthetic_config(2000, 6);
    let event = cfg.load_event().unwrap();
    let points = run_multiplicity_scan(&cfg, &[0.25, 0.5, 1.0], &event, false).unwrap();
    if let Some(p) = points.iter().find(|p| p.status != "ok") {
        return outcome(false, format!("fraction {}: {}", p.fraction, p.status));
    }
    let purity: Vec<f64> = points.iter().map(|p| p.purity.unwrap()).collect();
    let fakes: Vec<usize> = points.iter().map(|p| p.n_fakes.unwrap()).collect();
    let efficiency: Vec<f64> = points.iter().map(|p| p.efficiency.unwrap()).collect();
    let passed = purity[2] <= purity[0] && fakes.windows(2).all(|w| w[0] <= w[1]);
    outcome(
        passed,
        format!("purity {purity:.4?}, fakes {fakes:?}, efficiency {efficiency:.4?}"),
    )
}

/// Ten single-track events, each rotated into its own azimuthal sector.
fn disjoint_tracks() -> Event {
    let geometry = DetectorGeometry::default();
    let mut hits = Vec::new();
    let mut truth = Vec::new();
    for k in 0..10u64 {
        let cfg = SyntheticConfig {
            eta_max: 0.5,
            ..SyntheticConfig::new(1, 0.0, (3000.0, 10_000.0))
        };
        let single = generate_synthetic_event(&geometry, &cfg, 70 + k);
        let angle = std::f64::consts::TAU * k as f64 / 10.0;
        let (s, c) = angle.sin_cos();
        let offset = 100 * (k + 1);
        for h in &single.hits {
            hits.push(Hit::new(h.hit_id + offset, c * h.x - s * h.y, s * h.x + c * h.y, h.z, h.layer));
        }
        let p = &single.truth[0];
        truth.push(TruthParticle {
            particle_id: k + 1,
            hit_ids: p.hit_ids.iter().map(|h| h + offset).collect(),
            ..p.clone()
        });
    }
    Event::new(hits, truth, geometry).unwrap()
}

fn bias_shift() -> Outcome {
    let event = disjoint_tracks();
    let cuts = TripletCuts::default();
    let doublets = generate_initial_doublets(&event, &SeedingCuts::default());
    let candidates = build_triplets(&doublets, &event, &cuts);
    let (triplets, relations) = select_triplets(&candidates, &cuts, &StrengthParams::default());
    let conflicts = relations.iter().filter(|r| r.kind == RelationKind::Conflict).count();
    if conflicts > 0 {
        return outcome(false, format!("instance has {conflicts} conflicts"));
    }
    let mut states = Vec::new();
    for alpha in [-0.01, 0.0, 0.01] {
        let params = QuboParams {
            alpha,
            ..QuboParams::default()
        };
        let qubo = build_qubo(&triplets, &relations, &params).unwrap();
        states.push(brute_force_by_components(&qubo).unwrap().best);
    }
    let identical = states.windows(2).all(|w| w[0] == w[1]);
    outcome(
        identical,
        format!("{} variables, {} selected", triplets.len(), states[1].count_ones()),
    )
}

fn round_trip_and_determinism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = rng.random_range(0..=60);
        let density = rng.random_range(0.0..=0.5);
        let q = random_qubo(&mut rng, n, density);
        match parse_qubo(&format_qubo(&q)) {
            Ok(p) if p.n == q.n && p.linear == q.linear && p.quadratic == q.quadratic => {}
            _ => mismatches += 1,
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let cfg = PipelineConfig {
            output_dir: Some(dir.path().join(run)),
            ..synthetic_config(50, 11)
        };
        run_pipeline(&cfg).unwrap();
        outputs.push(std::fs::read(dir.path().join(run).join(METRICS_FILE)).unwrap());
    }
    let identical = outputs[0] == outputs[1];
    outcome(
        mismatches == 0 && identical,
        format!("round-trip mismatches {mismatches}/100, metrics JSON identical: {identical}"),
    )
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 8] = [
        ("1 combinatoric identities", Duration::from_secs(1), combinatoric_identities),
        ("2 strength formula", Duration::from_secs(1), strength_formula),
        ("3 solver-oracle equivalence", Duration::from_secs(60), solver_oracle),
        ("4 clamping identity", Duration::from_secs(5), clamping_identity),
        ("5 low-multiplicity performance", Duration::from_secs(600), low_multiplicity),
        ("6 degradation trend", Duration::from_secs(1800), degradation_trend),
        ("7 bias-shift insensitivity", Duration::from_secs(10), bias_shift),
        ("8 round trip and determinism", Duration::from_secs(10), round_trip_and_determinism),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let passed = result.passed && in_time;
        if !passed {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {} ({:.2}s of {}s{})",
            if passed { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", over budget" },
        );
    }
    println!("acceptance: {} of 8 criteria passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
