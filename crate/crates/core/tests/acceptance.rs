//! Acceptance suite. Runs every criterion, prints one line each and exits
//! non-zero if any fails.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

use gapbench::extraction::{extract_characteristic_times, extract_dataset, TimesOutcome};
use gapbench::harness::{
    emit_report, run_experiment, CellOutcome, ConditionalModels, DatasetEntry, DatasetSource, ExperimentConfig,
    ReportFormat,
};
use gapbench::metrics::{ade_beta, auc, fde_beta, tnr_pr, MetricKind};
use gapbench::models::{noisy_cv_predict, LogRegHyper, ModelSpec};
use gapbench::scenario::{scenario_for, ScenarioDefinition};
use gapbench::scene::{AgentRole, DomainInfo, ScenarioKind, TrackSample};
use gapbench::splitting::{split, SplitMethod};
use gapbench::synthgen::{generate, GeneratorConfig, Range};
use gapbench::transforms::{acceptance_time, t1, t2, t3, TransformContext};
use gapbench::{
    AgentTrack, ConvexPolygon, Dataset, ExtractionParams, Geometry, Position, Prediction, ScenarioParams, Scene,
    T0Policy, Trajectory,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($arg)+));
        }
    };
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn intersection(n_scenes: usize, seed: u64) -> GeneratorConfig {
    GeneratorConfig { n_scenes, seed, ..Default::default() }
}

fn extract(scenes: &[Scene], policy: T0Policy, kind: ScenarioKind) -> Result<Dataset, String> {
    let sc = scenario_for(kind, ScenarioParams::default());
    extract_dataset(scenes, &ExtractionParams::new(policy, 2, 0.1), sc.as_ref()).map_err(fail)
}

fn round_trip_fidelity() -> Outcome {
    let start = Instant::now();
    let cfg = intersection(1000, 2024);
    let g = generate::<f64>(&cfg).map_err(fail)?;
    let ds = extract(&g.scenes, T0Policy::Initial, ScenarioKind::Intersection)?;
    let elapsed = start.elapsed().as_secs_f64();

    let period = 1.0 / cfg.sample_rate_hz;
    let truth: HashMap<&str, _> = g.truth.iter().map(|t| (t.scene_id.as_str(), t)).collect();
    let (mut label_ok, mut times_ok) = (0usize, 0usize);
    for s in &ds.samples {
        let t = truth[s.input.scene_id.as_str()];
        label_ok += usize::from(s.output.accepted == t.accepted);
        let within = |a: f64, b: f64| (a - b).abs() <= period + 1e-9;
        times_ok += usize::from(within(s.output.t_a, t.t_a) && within(s.output.t_c, t.t_c));
    }
    let n = ds.samples.len();
    ensure!(n >= 500, "only {n} of 1000 scenes retained");
    let label_rate = label_ok as f64 / n as f64;
    ensure!(label_rate >= 0.99, "a recovered for {:.2}% of samples", 100.0 * label_rate);
    ensure!(times_ok == n, "{} samples with t_A or t_C off by more than {period} s", n - times_ok);
    ensure!(elapsed < 60.0, "took {elapsed:.1} s");
    Ok(format!(
        "{n} samples, a recovered {:.2}%, all t_A/t_C within {period} s, {elapsed:.1} s",
        100.0 * label_rate
    ))
}

fn policies() -> [T0Policy; 5] {
    [
        T0Policy::Initial,
        // below the braking time v / a_safe a fixed gap never precedes t_crit
        T0Policy::FixedGap { delta_t: 4.0 },
        T0Policy::FixedGap { delta_t: 6.0 },
        T0Policy::Critical { t_epsilon: 0.5 },
        T0Policy::Critical { t_epsilon: 1.0 },
    ]
}

fn scene_sets() -> Result<Vec<(ScenarioKind, Vec<Scene>)>, String> {
    let configs = [
        intersection(400, 31),
        GeneratorConfig { idle_start: true, ..intersection(200, 32) },
        GeneratorConfig { lead_vehicle: Some(Range::new(1.0, 3.0)), ..intersection(200, 33) },
        GeneratorConfig { scenario_kind: ScenarioKind::LaneChange, ..intersection(300, 34) },
    ];
    configs
        .iter()
        .map(|c| Ok((c.scenario_kind, generate::<f64>(c).map_err(fail)?.scenes)))
        .collect()
}

fn filter_soundness() -> Outcome {
    let mut checked = 0usize;
    for (kind, scenes) in scene_sets()? {
        for policy in policies() {
            let ds = extract(&scenes, policy, kind)?;
            ensure!(!ds.samples.is_empty(), "{kind} {} produced no samples", policy.name());
            for s in &ds.samples {
                let (i, o) = (&s.input, &s.output);
                ensure!(
                    i.t_s <= i.t_0 && i.t_0 < o.t_a.min(o.t_crit),
                    "{} under {}: t_S={} t_0={} t_A={} t_crit={}",
                    i.scene_id,
                    policy.name(),
                    i.t_s,
                    i.t_0,
                    o.t_a,
                    o.t_crit
                );
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} samples over 4 scene sets and 5 policies, no violation"))
}

fn policy_ordering() -> Outcome {
    let mut detail = Vec::new();
    for (kind, scenes) in scene_sets()? {
        let initial = extract(&scenes, T0Policy::Initial, kind)?.samples.len();
        for delta_t in [1.0, 2.0, 3.0, 4.0, 6.0] {
            let fixed = extract(&scenes, T0Policy::FixedGap { delta_t }, kind)?.samples.len();
            ensure!(fixed <= initial, "{kind}: fixed_gap({delta_t}) kept {fixed} > initial {initial}");
        }
        let critical = extract(&scenes, T0Policy::Critical { t_epsilon: 0.5 }, kind)?;
        if let Some(s) = critical.samples.iter().find(|s| s.output.t_a < s.output.t_crit) {
            return Err(format!("{}: gap accepted at {} before t_crit {}", s.input.scene_id, s.output.t_a, s.output.t_crit));
        }
        detail.push(format!("{kind} {initial}/{}", critical.samples.len()));
    }
    Ok(format!("initial/critical sizes: {}", detail.join(", ")))
}

fn auc_oracle(scores: &[f64], labels: &[bool]) -> f64 {
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for (i, &a) in scores.iter().enumerate() {
        for (j, &b) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1;
                if a > b {
                    sum += 1.0;
                } else if a == b {
                    sum += 0.5;
                }
            }
        }
    }
    sum / pairs as f64
}

fn tnr_pr_sweep(scores: &[f64], labels: &[bool]) -> f64 {
    let negatives = labels.iter().filter(|&&l| !l).count();
    let mut thresholds = scores.to_vec();
    thresholds.push(f64::INFINITY);
    let mut best = f64::NEG_INFINITY;
    for &theta in &thresholds {
        let full_recall = scores.iter().zip(labels).all(|(&s, &l)| !l || s >= theta);
        if full_recall {
            let tn = scores.iter().zip(labels).filter(|(&s, &l)| !l && s < theta).count();
            best = best.max(tn as f64 / negatives as f64);
        }
    }
    best
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_auc = 0.0_f64;
    let mut ties = 0;
    for instance in 0..100 {
        let n = rng.random_range(2..=200);
        let rate = rng.random_range(0.05..0.95);
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(rate)).collect();
        labels[0] = true;
        labels[1] = false;
        let coarse = instance % 2 == 0;
        let scores: Vec<f64> = labels
            .iter()
            .map(|&l| {
                let s: f64 = rng.random_range(0.0..1.0) + if l { 0.3 } else { 0.0 };
                if coarse { (s * 5.0).round() / 5.0 } else { s }
            })
            .collect();
        ties += usize::from(coarse);
        let got = auc(&scores, &labels).map_err(fail)?.value;
        let want = auc_oracle(&scores, &labels);
        worst_auc = worst_auc.max((got - want).abs());
        ensure!((got - want).abs() <= 1e-9, "instance {instance}: AUC {got} vs oracle {want}");
        let got = tnr_pr(&scores, &labels).map_err(fail)?.value;
        let want = tnr_pr_sweep(&scores, &labels);
        ensure!(got == want, "instance {instance}: TNR-PR {got} vs sweep {want}");
    }
    Ok(format!("100 instances ({ties} with ties), max AUC error {worst_auc:.1e}, TNR-PR exact"))
}

/// Ego at constant `speed` on +x, `distance` metres from touching the 5 m
/// zone at t = 0; the target never moves.
fn constant_speed_scene(distance: f64, speed: f64, radius: f64) -> Scene {
    let ts: Vec<f64> = (0..=200).map(|i| i as f64 / 10.0).collect();
    let x0 = -2.5 - radius - distance;
    let track = |id: &str, role, f: &dyn Fn(f64) -> Position| {
        let samples = ts.iter().map(|&t| TrackSample { t, position: f(t) }).collect();
        AgentTrack::new(id, role, samples).unwrap()
    };
    Scene::new(
        format!("const-{distance}-{speed}"),
        ScenarioKind::Intersection,
        DomainInfo::new(),
        Geometry::ConflictZone {
            polygon: ConvexPolygon::rectangle(Position::new(-2.5, -2.5), Position::new(2.5, 2.5)).unwrap(),
            path_half_width: None,
        },
        vec![
            track("ego", AgentRole::Ego, &|t| Position::new(x0 + speed * t, 0.0)),
            track("target", AgentRole::Target, &|_| Position::new(0.0, -40.0)),
        ],
    )
    .unwrap()
}

fn t_crit_closed_form() -> Outcome {
    let params = ScenarioParams::default();
    let sc = scenario_for(ScenarioKind::Intersection, params);
    let step = 0.1;
    let mut detail = Vec::new();
    for (distance, speed) in [(100.0, 10.0), (80.0, 8.0), (150.0, 12.0), (60.0, 15.0), (45.0, 5.0)] {
        // time to reach minus time to brake at a_safe
        let analytic = distance / speed - speed / params.safe_deceleration;
        let scene = constant_speed_scene(distance, speed, params.inflation_radius);
        let TimesOutcome::Times(times) = extract_characteristic_times(&scene, sc.as_ref(), 0.5).map_err(fail)? else {
            return Err(format!("{distance} m at {speed} m/s excluded"));
        };
        ensure!(
            (times.t_crit - analytic).abs() <= step,
            "{distance} m at {speed} m/s: t_crit {} vs {analytic}",
            times.t_crit
        );
        detail.push(format!("{analytic}->{:.3}", times.t_crit));
    }
    Ok(format!("analytic->computed: {}", detail.join(", ")))
}

struct SplitScores {
    random: Vec<f64>,
    extreme: Vec<f64>,
}

fn split_scores() -> &'static Result<SplitScores, String> {
    static SCORES: OnceLock<Result<SplitScores, String>> = OnceLock::new();
    SCORES.get_or_init(|| {
        let mut out = SplitScores { random: Vec::new(), extreme: Vec::new() };
        for seed in 0..5u64 {
            let config = ExperimentConfig {
                datasets: vec![DatasetEntry {
                    name: "logistic-rule".into(),
                    source: DatasetSource::Generator { config: intersection(2000, 500 + seed) },
                }],
                policies: vec![T0Policy::Initial],
                splits: vec![SplitMethod::RandomStratified { seed }, SplitMethod::Extreme],
                models: vec![ModelSpec::LogisticRegression { hyper: LogRegHyper::default() }],
                metrics: vec![MetricKind::Auc],
                seed,
                ..base_config()
            };
            let report = run_experiment(&config).map_err(fail)?;
            for cell in &report.cells {
                let CellOutcome::Ok { value, .. } = cell.outcome else {
                    return Err(format!("seed {seed}, {}: {:?}", cell.split, cell.outcome));
                };
                if cell.split == "extreme" {
                    out.extreme.push(value);
                } else {
                    out.random.push(value);
                }
            }
        }
        Ok(out)
    })
}

fn base_config() -> ExperimentConfig {
    ExperimentConfig {
        datasets: Vec::new(),
        scenario: ScenarioParams::default(),
        t_epsilon: 0.5,
        policies: vec![T0Policy::Initial],
        n_inputs: vec![2],
        step: 0.1,
        splits: Vec::new(),
        models: Vec::new(),
        metrics: Vec::new(),
        n_p: 20,
        pool_size: None,
        seed: 0,
        per_sample: false,
        output_dir: "unused".into(),
    }
}

fn fmt_scores(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ")
}

fn model_sanity() -> Outcome {
    let scores = split_scores().as_ref().map_err(Clone::clone)?;
    ensure!(scores.random.len() == 5, "expected 5 seeds");
    ensure!(scores.random.iter().all(|&a| a >= 0.9), "AUCs {}", fmt_scores(&scores.random));
    Ok(format!("random-split AUC per seed: {}", fmt_scores(&scores.random)))
}

fn extreme_split_is_harder() -> Outcome {
    let scores = split_scores().as_ref().map_err(Clone::clone)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (r, e) = (mean(&scores.random), mean(&scores.extreme));
    ensure!(e < r, "extreme mean {e:.3} not below random mean {r:.3}");
    Ok(format!("mean AUC extreme {e:.3} < random {r:.3} (extreme per seed: {})", fmt_scores(&scores.extreme)))
}

/// Accepting candidate times, collected page by page the way the
/// conversion fills its accepted-gap pool.
fn accepted_pool(
    model: &gapbench::models::RetrievalModel<f64>,
    input: &gapbench::SampleInput,
    sc: &dyn ScenarioDefinition<f64>,
    page: usize,
) -> Vec<f64> {
    let end = *input.output_times.last().unwrap();
    let ranked = model.ranked(input);
    let mut times = Vec::new();
    for chunk in ranked.chunks(page).take(11) {
        for &idx in chunk {
            let traj = model.aligned(idx, input);
            if let Some(t) = acceptance_time(&traj, input, sc).unwrap().filter(|&t| t < end) {
                times.push(t);
            }
        }
        if times.len() >= page {
            break;
        }
    }
    times.sort_by(f64::total_cmp);
    times
}

/// Bounds on reconstructed decile `j` when `n` accepting trajectories are
/// drawn with every inter-decile bin given equal total weight. A draw at
/// rank k covers levels ((k-1)/n, k/n]; an empty bin's share lands in its
/// nearest occupied bin.
fn decile_bounds(q: &[f64; 9], pool: &[f64], n: usize, j: usize) -> (f64, f64) {
    let mut edges = vec![pool[0]];
    edges.extend_from_slice(q);
    edges.push(pool[pool.len() - 1]);
    let mut counts = [0usize; 10];
    for &t in pool {
        counts[q.iter().filter(|&&x| x < t).count()] += 1;
    }
    let landing = |v: usize| -> usize {
        (0..10)
            .filter(|&b| counts[b] > 0)
            .min_by_key(|&b| (b.abs_diff(v), b))
            .unwrap()
    };
    let p = (j + 1) as f64 / 10.0;
    let n = n as f64;
    let lower_level = p - (p + 1.0) / n;
    let upper_level = p + (2.0 - p) / n;
    let v_lo = ((10.0 * lower_level).floor().max(0.0) as usize).min(9);
    let v_hi = (((10.0 * upper_level).ceil() - 1.0).max(0.0) as usize).min(9);
    (edges[landing(v_lo)], edges[landing(v_hi) + 1])
}

fn capped(q: &[f64; 9], pool: &[f64], n: usize) -> bool {
    let mut counts = [0usize; 10];
    for &t in pool {
        counts[q.iter().filter(|&&x| x < t).count()] += 1;
    }
    (0..10).any(|b| counts[b] > 0 && counts[b] * 10 < n)
}

fn transform_round_trip() -> Outcome {
    let n_p = 20;
    let step = 0.1;
    let g = generate::<f64>(&intersection(2500, 808)).map_err(fail)?;
    let ds = extract(&g.scenes, T0Policy::Initial, ScenarioKind::Intersection)?;
    let s = split(&ds, SplitMethod::RandomStratified { seed: 5 }).map_err(fail)?;
    let conditional = ConditionalModels::train(&ds, &s).map_err(fail)?;
    let mut logreg = ModelSpec::LogisticRegression { hyper: LogRegHyper::default() }.build::<f64>(n_p).map_err(fail)?;
    logreg.train(&ds.subset(&s.train_idx)).map_err(fail)?;
    let sc = scenario_for(ScenarioKind::Intersection, ScenarioParams::default());
    let ctx = TransformContext::new(sc.as_ref(), n_p).with_models(&conditional.accepted, &conditional.rejected);
    ensure!(s.test_idx.len() >= 200, "only {} test samples", s.test_idx.len());

    let bound = 1.0 / (2.0 * n_p as f64);
    let (mut worst, mut decile_checked, mut skipped_small, mut skipped_capped) = (0.0_f64, 0, 0, 0);
    for &i in s.test_idx.iter().take(200) {
        let input = &ds.samples[i].input;
        let a = logreg.predict(input, 0).map_err(fail)?.a_pred().unwrap();
        let Prediction::Timing { deciles, .. } = t3(a, &ctx, input).map_err(fail)? else { unreachable!() };
        let deciles = deciles.expect("T3 gives deciles");
        let Prediction::TrajectorySet { trajs } = t2(a, Some(&deciles), &ctx, input, i as u64).map_err(fail)? else {
            unreachable!()
        };
        let Prediction::Timing { a_pred: back, deciles: back_deciles } = t1(&trajs, input, sc.as_ref()).map_err(fail)?
        else {
            unreachable!()
        };
        worst = worst.max((back - a).abs());
        ensure!((back - a).abs() <= bound + 1e-12, "{}: a_pred {a} came back as {back}", input.scene_id);

        let n_acc = (back * n_p as f64).round() as usize;
        let Some(back_deciles) = back_deciles else { continue };
        let pool = accepted_pool(&conditional.accepted, input, sc.as_ref(), ctx.pool_size);
        if pool.len() < 200 {
            skipped_small += 1;
            continue;
        }
        if capped(&deciles.0, &pool, n_acc) {
            skipped_capped += 1;
            continue;
        }
        for j in 0..9 {
            let (lo, hi) = decile_bounds(&deciles.0, &pool, n_acc, j);
            let r = back_deciles.0[j];
            ensure!(
                r >= lo - step - 1e-9 && r <= hi + step + 1e-9,
                "{}: decile {} = {r} outside [{lo}, {hi}] (input {:?}, n_acc {n_acc})",
                input.scene_id,
                j + 1,
                deciles.0
            );
        }
        decile_checked += 1;
    }
    ensure!(decile_checked >= 100, "deciles checked on only {decile_checked} samples");
    Ok(format!(
        "200 samples, max a_pred error {worst:.4} <= {bound}; deciles within bounds on {decile_checked} \
         (skipped: {skipped_small} small pool, {skipped_capped} sparse bin)"
    ))
}

fn displacement_metrics() -> Outcome {
    let g = generate::<f64>(&intersection(300, 9)).map_err(fail)?;
    let ds = extract(&g.scenes, T0Policy::Initial, ScenarioKind::Intersection)?;
    let truths: Vec<Trajectory> = ds.samples.iter().map(|s| s.output.target_future.clone()).collect();
    let oracle: Vec<Vec<Trajectory>> = truths.iter().map(|t| vec![t.clone(); 20]).collect();
    let ade = ade_beta(&oracle, &truths, 1.0).map_err(fail)?.value;
    let fde = fde_beta(&oracle, &truths, 1.0).map_err(fail)?.value;
    ensure!(ade == 0.0 && fde == 0.0, "oracle ADE_1 {ade}, FDE_1 {fde}");

    let noisy: Vec<Vec<Trajectory>> = ds
        .samples
        .iter()
        .enumerate()
        .map(|(i, s)| match noisy_cv_predict(&s.input, 20, 0.5, i as u64) {
            Ok(Prediction::TrajectorySet { trajs }) => trajs,
            other => panic!("{other:?}"),
        })
        .collect();
    let best = ade_beta(&noisy, &truths, 0.05).map_err(fail)?.per_sample.unwrap();
    let all = ade_beta(&noisy, &truths, 1.0).map_err(fail)?.per_sample.unwrap();
    ensure!(best.iter().zip(&all).all(|(b, a)| b <= a), "ADE_0.05 above ADE_1 on some input");

    let truth = vec![Position::new(0.0, 0.0), Position::new(1.0, 0.0), Position::new(2.0, 0.0)];
    let shifted = |dy: f64| truth.iter().map(|p| Position::new(p.x, p.y + dy)).collect::<Trajectory>();
    let set = vec![vec![shifted(1.0), shifted(3.0)]];
    let hand_ade = ade_beta(&set, std::slice::from_ref(&truth), 0.5).map_err(fail)?.value;
    let hand_fde = fde_beta(&set, std::slice::from_ref(&truth), 0.5).map_err(fail)?.value;
    ensure!(hand_ade == 1.0 && hand_fde == 1.0, "hand example gave ADE {hand_ade}, FDE {hand_fde}");
    Ok(format!("oracle 0/0 on {} samples, ADE_0.05 <= ADE_1 everywhere, hand example 1.0 m", truths.len()))
}

fn determinism() -> Outcome {
    let config = ExperimentConfig {
        datasets: vec![
            DatasetEntry { name: "int".into(), source: DatasetSource::Generator { config: intersection(400, 70) } },
            DatasetEntry {
                name: "lc".into(),
                source: DatasetSource::Generator {
                    config: GeneratorConfig { scenario_kind: ScenarioKind::LaneChange, ..intersection(300, 71) },
                },
            },
        ],
        policies: vec![T0Policy::Initial, T0Policy::Critical { t_epsilon: 0.5 }],
        splits: vec![SplitMethod::RandomStratified { seed: 1 }, SplitMethod::Extreme],
        models: vec![
            ModelSpec::LogisticRegression { hyper: LogRegHyper::default() },
            ModelSpec::NoisyConstantVelocity { sigma_a: 0.5 },
            ModelSpec::Retrieval,
        ],
        metrics: vec![MetricKind::Auc, MetricKind::Ade { beta: 0.5 }, MetricKind::MissRate { r_miss: 2.0 }],
        n_p: 10,
        seed: 3,
        per_sample: true,
        ..base_config()
    };
    let dir = tempfile::tempdir().map_err(fail)?;
    let mut outputs = Vec::new();
    for run in ["first", "second"] {
        let report = run_experiment(&config).map_err(fail)?;
        let files = emit_report(&report, &dir.path().join(run), &[ReportFormat::Json, ReportFormat::Csv]).map_err(fail)?;
        let bytes: Vec<Vec<u8>> = files.iter().map(std::fs::read).collect::<Result<_, _>>().map_err(fail)?;
        outputs.push((bytes, report.cells.len(), report.failed_cells()));
    }
    ensure!(outputs[0].0 == outputs[1].0, "reports differ between runs");
    let (_, cells, failed) = &outputs[0];
    Ok(format!("{cells} cells ({failed} error entries), report.json and report.csv byte-identical"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("round-trip fidelity", round_trip_fidelity),
        ("prediction-window filter", filter_soundness),
        ("policy size ordering", policy_ordering),
        ("metric oracle equivalence", metric_oracles),
        ("t_crit closed form", t_crit_closed_form),
        ("model sanity", model_sanity),
        ("extreme split is harder", extreme_split_is_harder),
        ("transform round trip", transform_round_trip),
        ("displacement metrics", displacement_metrics),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name} [{secs:.1}s]: {detail}", k + 1),
            Err(why) => {
                failures += 1;
                println!("criterion {:>2} FAIL  {name} [{secs:.1}s]: {why}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
