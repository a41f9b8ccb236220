//! End-to-end acceptance checks, one line of output per criterion.
//!
//! Run with `cargo test -p shortlist-core --test acceptance`.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use rand::Rng;
use shortlist_core::algorithm::{run_seeded, AlgoConfig, Mode};
use shortlist_core::baselines::{check_submodular, preemption_reference};
use shortlist_core::constraints::{
    brualdi_bijection, gain_matchoid, theta_matroid, Constraint, GraphicMatroid, Matchoid, Matroid, MatroidKind,
    PartitionMatroid, UniformMatroid,
};
use shortlist_core::harness::{
    compare_modes, generate_instance, run_sweep, ConstraintKind, GenParams, InstanceSource, ObjectiveKind,
    SweepConfig,
};
use shortlist_core::secretary::capture_experiment;
use shortlist_core::submodular::{make_hardness_function, HardnessFunction, ItemId, ItemSet, Objective, SubmodularFn};

/// `Ok(detail)` passes, `Err(detail)` fails.
type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn algo(mode: Mode, epsilon: f64, alpha: usize, beta: usize) -> AlgoConfig {
    AlgoConfig {
        epsilon,
        alpha,
        beta,
        mode,
        ..AlgoConfig::default()
    }
}

fn generated(objective: ObjectiveKind, constraint: ConstraintKind, n: usize, k: usize) -> InstanceSource {
    InstanceSource::Generated(GenParams::new(objective, constraint, n, k))
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

fn small_matroids(n: usize, seed: u64) -> Vec<MatroidKind> {
    let mut r = rng(seed);
    let blocks = 1 + n / 3;
    let vertices = 1 + n / 2;
    let edges = (0..n)
        .map(|_| {
            let u = r.gen_range(0..vertices);
            (u, (u + r.gen_range(1..vertices)) % vertices)
        })
        .collect();
    vec![
        MatroidKind::Uniform(UniformMatroid { n, k: (n / 3).max(1) }),
        MatroidKind::Partition(
            PartitionMatroid::new((0..n).map(|_| r.gen_range(0..blocks)).collect(), vec![1; blocks]).unwrap(),
        ),
        MatroidKind::Graphic(GraphicMatroid::new(vertices, edges).unwrap()),
    ]
}

fn secretary_values() -> Vec<f64> {
    let mut r = rng(2024);
    (0..200).map(|i| i as f64 + r.gen::<f64>() * 0.5).collect()
}

fn c1_capture_rate() -> Outcome {
    let start = Instant::now();
    let stats = capture_experiment(&secretary_values(), 0.2, 5000, 1).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    ensure(
        stats.capture_rate >= 0.783 && secs < 5.0,
        format!("capture rate {:.4} (need >= 0.783) in {secs:.2}s", stats.capture_rate),
    )
}

fn c2_shortlist_length() -> Outcome {
    let stats = capture_experiment(&secretary_values(), 0.2, 5000, 1).map_err(|e| e.to_string())?;
    ensure(
        stats.capacity == 10 && stats.max_length <= 10,
        format!("longest shortlist {} with capacity {}", stats.max_length, stats.capacity),
    )
}

fn c3_shortlist_cap() -> Outcome {
    let cov = |c| generated(ObjectiveKind::Coverage, c, 60, 4);
    let sweeps = [
        (cov(ConstraintKind::Uniform), algo(Mode::Full, 0.2, 1, 1)),
        (cov(ConstraintKind::Partition), algo(Mode::Full, 0.2, 2, 1)),
        (cov(ConstraintKind::Graphic), algo(Mode::Full, 0.3, 2, 2)),
        (cov(ConstraintKind::Matching), algo(Mode::Streaming, 0.2, 2, 2)),
        (cov(ConstraintKind::Uniform), algo(Mode::Preemption, 0.2, 1, 1)),
        (generated(ObjectiveKind::Facility, ConstraintKind::Partition, 60, 4), algo(Mode::Full, 0.2, 1, 2)),
    ];
    let (mut trials, mut violations, mut worst) = (0, 0, 0.0f64);
    for (i, (source, config)) in sweeps.into_iter().enumerate() {
        let mode = config.mode;
        let report = run_sweep(&SweepConfig::new(source, config, 200, 1000 * i as u64)).map_err(|e| e.to_string())?;
        for row in &report.rows {
            trials += 1;
            let cap = if mode == Mode::Preemption { row.k } else { row.shortlist_bound };
            if row.shortlist_len > cap || !row.within_bound {
                violations += 1;
            }
            worst = worst.max(row.shortlist_len as f64 / cap as f64);
        }
    }
    ensure(
        trials >= 1000 && violations == 0,
        format!("{violations} violations over {trials} trials, largest |A|/cap {worst:.3}"),
    )
}

fn c4_feasibility() -> Outcome {
    let kinds = [
        ConstraintKind::Uniform,
        ConstraintKind::Partition,
        ConstraintKind::Graphic,
        ConstraintKind::Matching,
    ];
    let (mut trials, mut windows) = (0, 0);
    for (i, kind) in kinds.into_iter().enumerate() {
        let source = generated(ObjectiveKind::Coverage, kind, 40, 4);
        for t in 0..250u64 {
            let seed = 10_000 * (i as u64 + 1) + t;
            let inst = source.instance_for(seed).map_err(|e| e.to_string())?;
            let mut config = algo(Mode::Full, 0.3, 1 + (t % 2) as usize, 1 + (t / 2 % 2) as usize);
            config.trace = true;
            let out = run_seeded(&inst.objective, &inst.constraint, &config, seed)
                .map_err(|e| format!("{kind:?} seed {seed}: {e}"))?;
            for w in &out.trace {
                windows += 1;
                if !inst.constraint.is_feasible(&w.s_after) || !inst.constraint.is_feasible(&w.a_star_after) {
                    return Err(format!("{kind:?} seed {seed}: infeasible state after window {}", w.window));
                }
            }
            if !inst.constraint.is_feasible(&out.output) {
                return Err(format!("{kind:?} seed {seed}: infeasible output"));
            }
            trials += 1;
        }
    }
    ensure(trials >= 1000, format!("{trials} trials, {windows} windows, all feasible"))
}

fn c5_matroid_reduction() -> Outcome {
    let mut pairs = 0;
    for n in 4..=8 {
        let f = generate_instance(&GenParams::new(ObjectiveKind::Coverage, ConstraintKind::Uniform, n, 2), &mut rng(n as u64))
            .map_err(|e| e.to_string())?
            .objective;
        for m in small_matroids(n, 50 + n as u64) {
            let q = Matchoid::from_matroid(m.clone()).map_err(|e| e.to_string())?;
            for mask in 0u32..1 << n {
                let s: ItemSet = (0..n as u32).filter(|b| mask >> b & 1 == 1).map(ItemId).collect();
                if !m.is_independent(&s) {
                    continue;
                }
                for e in (0..n as u32).map(ItemId).filter(|e| !s.contains(*e)) {
                    let a = theta_matroid(&f, &m, e, &s).map_err(|e| e.to_string())?;
                    let b = gain_matchoid(&f, &q, e, &s).map_err(|e| e.to_string())?;
                    if a != b {
                        return Err(format!("n={n} S={s} e={e:?}: {a:?} vs {b:?}"));
                    }
                    pairs += 1;
                }
            }
        }
    }
    let mut runs = 0;
    for seed in 0..50u64 {
        let kind = [ConstraintKind::Uniform, ConstraintKind::Partition, ConstraintKind::Graphic][seed as usize % 3];
        let inst = generated(ObjectiveKind::Coverage, kind, 40, 4).instance_for(seed).map_err(|e| e.to_string())?;
        let Constraint::Matroid(m) = &inst.constraint else {
            return Err("expected a matroid instance".into());
        };
        let as_matchoid = Constraint::Matchoid(Matchoid::from_matroid(m.clone()).map_err(|e| e.to_string())?);
        let mut config = algo(Mode::Full, 0.3, 2, 2);
        config.trace = true;
        let a = run_seeded(&inst.objective, &inst.constraint, &config, seed).map_err(|e| e.to_string())?;
        let b = run_seeded(&inst.objective, &as_matchoid, &config, seed).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("seed {seed}: matroid and single-member matchoid runs differ"));
        }
        runs += 1;
    }
    Ok(format!("{pairs} (e, S) pairs and {runs} full runs identical"))
}

fn c6_window_resimulation() -> Outcome {
    let kinds = [ConstraintKind::Uniform, ConstraintKind::Partition, ConstraintKind::Graphic];
    let mut windows = 0;
    for seed in 0..100u64 {
        let n = 12 + (seed % 29) as usize;
        let kind = kinds[seed as usize % 3];
        let inst = generated(ObjectiveKind::Coverage, kind, n, 3).instance_for(seed).map_err(|e| e.to_string())?;
        let Constraint::Matroid(m) = &inst.constraint else {
            return Err("expected a matroid instance".into());
        };
        let alpha = 1 + (seed % 2) as usize;
        let mut config = algo(Mode::Full, 0.3, alpha, 1 + (seed / 2 % 2) as usize);
        config.trace = true;
        let out = run_seeded(&inst.objective, &inst.constraint, &config, seed).map_err(|e| e.to_string())?;
        for w in &out.trace {
            let expected = resimulate_window(&inst.objective, m, alpha, w);
            let actual = Resimulated {
                tau_star: w.tau_star.clone(),
                s_w: ids(&w.s_w),
                s_bar: ids(&w.s_bar),
                s_after: ids(&w.s_after),
            };
            if expected != actual {
                return Err(format!("seed {seed} window {}: {actual:?} vs {expected:?}", w.window));
            }
            windows += 1;
        }
    }
    Ok(format!("{windows} windows over 100 runs match the re-simulation"))
}

fn c7_exchange_bijection() -> Outcome {
    let mut r = rng(77);
    let mut checked = 0;
    for (family, m) in small_matroids(14, 7).into_iter().enumerate() {
        for _ in 0..100 {
            let a = random_basis(&m, &mut r);
            let b = random_basis(&m, &mut r);
            let pi = brualdi_bijection(&m, &a, &b).map_err(|e| format!("family {family}: {e}"))?;
            let image: ItemSet = pi.values().copied().collect();
            let domain: ItemSet = pi.keys().copied().collect();
            if domain != a || image != b || pi.len() != a.len() {
                return Err(format!("family {family}: map from {a} is not onto {b}"));
            }
            for (&x, &y) in &pi {
                if (b.contains(x) && x != y) || !m.is_independent(&a.without(x).with(y)) {
                    return Err(format!("family {family}: exchange {x:?} -> {y:?} fails for A={a}, B={b}"));
                }
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} base pairs over uniform, partition and graphic"))
}

fn c8_selected_in_shortlist() -> Outcome {
    let config = SweepConfig::new(
        generated(ObjectiveKind::Coverage, ConstraintKind::Uniform, 200, 4),
        algo(Mode::Full, 0.4, 1, 1),
        2000,
        0,
    );
    let report = run_sweep(&config).map_err(|e| e.to_string())?;
    let selected: usize = report.rows.iter().map(|r| r.selected).sum();
    let kept: usize = report.rows.iter().map(|r| r.selected_in_shortlist).sum();
    let fraction = kept as f64 / selected as f64;
    let floor = 0.8 - 3.0 * (0.8 * 0.2 / selected as f64).sqrt();
    ensure(
        fraction >= floor,
        format!("{kept}/{selected} selected items were shortlisted ({fraction:.4}, floor {floor:.4})"),
    )
}

fn c9_preemption_ratio() -> Outcome {
    const T0: f64 = 0.93;
    let mut config = SweepConfig::new(
        generated(ObjectiveKind::Coverage, ConstraintKind::Partition, 120, 4),
        algo(Mode::Preemption, 0.2, 1, 1),
        300,
        0,
    );
    config.exact_opt = true;
    let report = run_sweep(&config).map_err(|e| e.to_string())?;
    let s = &report.summary;
    let greedy_min = report
        .rows
        .iter()
        .map(|r| r.f_greedy / r.f_opt.unwrap_or(f64::NAN))
        .fold(f64::INFINITY, f64::min);
    ensure(
        s.mean >= T0 && greedy_min >= 0.5,
        format!(
            "mean ratio {:.4} (sd {:.4}, min {:.4}, need >= {T0}), worst greedy/OPT {greedy_min:.4}, reference {:.4}",
            s.mean,
            s.sd,
            s.min,
            preemption_reference()
        ),
    )
}

fn c10_hardness() -> Outcome {
    let (k, n, trials) = (8usize, 1024usize, 200usize);
    let config = SweepConfig::new(
        generated(ObjectiveKind::Hardness, ConstraintKind::Uniform, n, k),
        algo(Mode::Full, 0.2, 1, 1),
        trials,
        0,
    );
    let report = run_sweep(&config).map_err(|e| e.to_string())?;
    let values: Vec<f64> = report.rows.iter().map(|r| r.f_out).collect();
    let lens: Vec<f64> = report.rows.iter().map(|r| r.shortlist_len as f64).collect();
    let (mean, sd) = mean_sd(&values);
    let (mean_len, _) = mean_sd(&lens);
    let bound = 7.0 * k as f64 / 4.0 + k as f64 * mean_len / n as f64 + 3.0 * sd / (trials as f64).sqrt();
    ensure(
        mean <= bound,
        format!("mean f(A*) {mean:.3} (sd {sd:.3}, mean |A| {mean_len:.1}) against bound {bound:.3}"),
    )
}

fn c11_streaming() -> Outcome {
    let cases = [
        (ConstraintKind::Uniform, 1, 1),
        (ConstraintKind::Partition, 2, 1),
        (ConstraintKind::Matching, 2, 2),
    ];
    let mut lines = Vec::new();
    for (i, (kind, alpha, beta)) in cases.into_iter().enumerate() {
        let (n, k) = (60, 4);
        let inst = generated(ObjectiveKind::Coverage, kind, n, k)
            .instance_for(500 + i as u64)
            .map_err(|e| e.to_string())?;
        let report = compare_modes(&inst, &algo(Mode::Full, 0.2, alpha, beta), Mode::Streaming, 0..50)
            .map_err(|e| e.to_string())?;
        if let Some(d) = report.divergences.first() {
            return Err(format!("{kind:?} seed {}: {}", d.seed, d.what));
        }
        if let Some(s) = report.seeds.iter().find(|s| s.buffer_other > s.buffer_reference) {
            return Err(format!("{kind:?} seed {}: buffer {} over {}", s.seed, s.buffer_other, s.buffer_reference));
        }
        let evals: Vec<f64> = report.seeds.iter().map(|s| s.amortized_evals).collect();
        if evals.iter().any(|e| !e.is_finite()) {
            return Err(format!("{kind:?}: non-finite amortized evaluations"));
        }
        let p = inst.constraint.p();
        let reference = (p * k) as f64 + (k * k) as f64 / n as f64;
        let buffer = report.seeds.iter().map(|s| s.buffer_other).max().unwrap_or(0);
        lines.push(format!(
            "{kind:?} a={alpha} b={beta}: max buffer {buffer}, mean evals/item {:.2} (pk + k^2/n = {reference:.2})",
            mean_sd(&evals).0
        ));
    }
    Ok(format!("150 seeds identical; {}", lines.join("; ")))
}

fn c12_submodularity() -> Outcome {
    let mut results: Vec<(String, bool)> = Vec::new();
    for kind in [ObjectiveKind::Coverage, ObjectiveKind::Modular, ObjectiveKind::Facility] {
        for seed in 0..3u64 {
            let f = generate_instance(&GenParams::new(kind, ConstraintKind::Uniform, 12, 3), &mut rng(seed))
                .map_err(|e| e.to_string())?
                .objective;
            let check = check_submodular(&f, 12).map_err(|e| e.to_string())?;
            results.push((format!("{kind:?}#{seed}"), check.passed()));
        }
    }
    let hardness: Vec<(String, HardnessFunction)> = vec![
        ("hardness(k=2,L=3,n=12)".into(), HardnessFunction::instance(2, 3, 12, 0).map_err(|e| e.to_string())?),
        ("hardness(k=3,L=2,n=12)".into(), HardnessFunction::instance(3, 2, 12, 1).map_err(|e| e.to_string())?),
        ("hardness(k=2,L=2,n=8,full)".into(), make_hardness_function(2, 2, 8).map_err(|e| e.to_string())?),
    ];
    for (name, h) in hardness {
        let f = Objective::Hardness(h);
        let check = check_submodular(&f, 12.min(f.ground_size())).map_err(|e| e.to_string())?;
        results.push((name, check.passed()));
    }
    let failed: Vec<&str> = results.iter().filter(|(_, ok)| !ok).map(|(n, _)| n.as_str()).collect();
    ensure(
        failed.is_empty(),
        format!("{} of {} functions pass; failing: {}", results.len() - failed.len(), results.len(), failed.join(", ")),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("secretary capture rate", c1_capture_rate),
        ("secretary shortlist length", c2_shortlist_length),
        ("shortlist size cap", c3_shortlist_cap),
        ("feasibility", c4_feasibility),
        ("matchoid gain reduces to matroid gain", c5_matroid_reduction),
        ("window update re-simulation", c6_window_resimulation),
        ("exchange bijection", c7_exchange_bijection),
        ("selected items are shortlisted", c8_selected_in_shortlist),
        ("preemption ratio", c9_preemption_ratio),
        ("hardness instance", c10_hardness),
        ("streaming equivalence", c11_streaming),
        ("objective monotone submodular", c12_submodularity),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS [{name}] {detail} ({secs:.1}s)", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {}: FAIL [{name}] {detail} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", 12 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
