//! Instance files, random instance generators, seeded sweeps and mode
//! comparison.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithm::{effective_k, run_seeded, AlgoConfig, Mode, RunOutput};
use crate::baselines::{
    branch_and_bound_opt, exhaustive_opt, greedy_over, offline_greedy, preemption_reference, ratio, ratio_report,
    reference_ratio, RatioSummary, DEFAULT_EXHAUSTIVE_LIMIT,
};
use crate::constraints::{
    Constraint, GraphicMatroid, Matchoid, MatroidKind, PartitionMatroid, UniformMatroid,
};
use crate::error::{Error, Result};
use crate::submodular::{
    make_coverage, make_facility_location, make_modular, HardnessFunction, ItemId, ItemSet, Objective, SubmodularFn,
};

pub const CSV_SCHEMA: &str = "shortlist-trial-v1";

/// An objective with its constraint, as stored on disk:
/// `{"objective": {"type": ...}, "matroid": {...}}` or `{..., "matchoid": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub objective: Objective,
    #[serde(flatten)]
    pub constraint: Constraint,
}

impl InstanceFile {
    pub fn new(objective: Objective, constraint: Constraint) -> Result<Self> {
        let inst = InstanceFile { objective, constraint };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.objective.ground_size() != self.constraint.ground_size() {
            return Err(Error::DimensionMismatch(format!(
                "objective has {} items, constraint {}",
                self.objective.ground_size(),
                self.constraint.ground_size()
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.constraint.ground_size()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let inst: InstanceFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    Coverage,
    Modular,
    Facility,
    Hardness,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Uniform,
    Partition,
    Graphic,
    Matching,
}

impl std::str::FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coverage" => Ok(ObjectiveKind::Coverage),
            "modular" => Ok(ObjectiveKind::Modular),
            "facility" => Ok(ObjectiveKind::Facility),
            "hardness" => Ok(ObjectiveKind::Hardness),
            other => Err(Error::InvalidParameter(format!("unknown objective kind {other:?}"))),
        }
    }
}

impl std::str::FromStr for ConstraintKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(ConstraintKind::Uniform),
            "partition" => Ok(ConstraintKind::Partition),
            "graphic" => Ok(ConstraintKind::Graphic),
            "matching" => Ok(ConstraintKind::Matching),
            other => Err(Error::InvalidParameter(format!("unknown constraint kind {other:?}"))),
        }
    }
}

/// Parameters for [`generate_instance`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub objective: ObjectiveKind,
    pub constraint: ConstraintKind,
    pub n: usize,
    pub k: usize,
    /// Coverage universe size; defaults to `2n`.
    #[serde(default)]
    pub universe: Option<usize>,
    /// Facility-location clients; defaults to 10.
    #[serde(default)]
    pub clients: Option<usize>,
}

impl GenParams {
    pub fn new(objective: ObjectiveKind, constraint: ConstraintKind, n: usize, k: usize) -> Self {
        GenParams {
            objective,
            constraint,
            n,
            k,
            universe: None,
            clients: None,
        }
    }
}

/// Draws a random instance.
///
/// - `coverage`: each item covers 1 to `max(1, U/4)` random universe
///   elements; element weights are uniform in `[0.5, 1.5)`.
/// - `modular`: weights uniform in `[0, 1)`.
/// - `facility`: similarities uniform in `[0, 1)`.
/// - `hardness`: the instance `I_l` for a random `l` with `L = n / (2k)`
///   blocks under a cardinality constraint of `k + 1`; the constraint kind
///   is ignored.
///
/// Constraints: `uniform` has rank `k`; `partition` cuts the items into `k`
/// contiguous capacity-1 blocks; `graphic` draws `n` random edges on `k + 1`
/// vertices; `matching` draws `n` random edges of a `k x k` bipartite graph.
pub fn generate_instance<R: Rng + ?Sized>(params: &GenParams, rng: &mut R) -> Result<InstanceFile> {
    let GenParams { n, k, .. } = *params;
    if n == 0 || k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("need 1 <= k <= n (k = {k}, n = {n})")));
    }
    if params.objective == ObjectiveKind::Hardness {
        let blocks = n / (2 * k);
        if blocks == 0 {
            return Err(Error::InvalidParameter(format!(
                "hardness needs n >= 2k for at least one block (n = {n}, k = {k})"
            )));
        }
        let active = rng.gen_range(0..blocks);
        let f = HardnessFunction::instance(k, blocks, n, active)?;
        let c = Constraint::Matroid(MatroidKind::Uniform(UniformMatroid { n, k: k + 1 }));
        return InstanceFile::new(Objective::Hardness(f), c);
    }
    let objective = match params.objective {
        ObjectiveKind::Coverage => {
            let universe = params.universe.unwrap_or(2 * n).max(1);
            let max_cover = (universe / 4).max(1);
            let covers = (0..n)
                .map(|_| {
                    let size = rng.gen_range(1..=max_cover);
                    rand::seq::index::sample(rng, universe, size).into_vec()
                })
                .collect();
            let weights = (0..universe).map(|_| rng.gen_range(0.5..1.5)).collect();
            Objective::Coverage(make_coverage(universe, covers, weights)?)
        }
        ObjectiveKind::Modular => Objective::Modular(make_modular((0..n).map(|_| rng.gen::<f64>()).collect())?),
        ObjectiveKind::Facility => {
            let clients = params.clients.unwrap_or(10).max(1);
            let sim = (0..clients).map(|_| (0..n).map(|_| rng.gen::<f64>()).collect()).collect();
            Objective::Facility(make_facility_location(sim, clients)?)
        }
        ObjectiveKind::Hardness => unreachable!(),
    };
    let constraint = match params.constraint {
        ConstraintKind::Uniform => Constraint::Matroid(MatroidKind::Uniform(UniformMatroid { n, k })),
        ConstraintKind::Partition => Constraint::Matroid(MatroidKind::Partition(PartitionMatroid::new(
            (0..n).map(|i| i * k / n).collect(),
            vec![1; k],
        )?)),
        ConstraintKind::Graphic => {
            let vertices = k + 1;
            let edges = (0..n)
                .map(|_| {
                    let u = rng.gen_range(0..vertices);
                    let v = (u + rng.gen_range(1..vertices)) % vertices;
                    (u, v)
                })
                .collect();
            Constraint::Matroid(MatroidKind::Graphic(GraphicMatroid::new(vertices, edges)?))
        }
        ConstraintKind::Matching => {
            let edges: Vec<(usize, usize)> = (0..n).map(|_| (rng.gen_range(0..k), rng.gen_range(0..k))).collect();
            Constraint::Matchoid(Matchoid::bipartite_matching(k, k, &edges)?)
        }
    };
    InstanceFile::new(objective, constraint)
}

/// Where each trial's instance comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceSource {
    /// One instance shared by every trial; only the arrival order varies.
    Fixed(Box<InstanceFile>),
    /// A fresh instance per trial, drawn from the trial seed.
    Generated(GenParams),
}

impl InstanceSource {
    pub fn instance_for(&self, seed: u64) -> Result<InstanceFile> {
        match self {
            InstanceSource::Fixed(inst) => Ok((**inst).clone()),
            InstanceSource::Generated(params) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(1);
                generate_instance(params, &mut rng)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub source: InstanceSource,
    pub algo: AlgoConfig,
    pub trials: usize,
    pub base_seed: u64,
    /// Exhaustive optimum when `n` is at most this.
    pub opt_limit: usize,
    /// Branch-and-bound optimum above `opt_limit`; otherwise ratios are
    /// taken against greedy.
    pub exact_opt: bool,
    /// Record wall-clock time per trial; off keeps reports reproducible.
    pub timing: bool,
}

impl SweepConfig {
    pub fn new(source: InstanceSource, algo: AlgoConfig, trials: usize, base_seed: u64) -> Self {
        SweepConfig {
            source,
            algo,
            trials,
            base_seed,
            opt_limit: DEFAULT_EXHAUSTIVE_LIMIT,
            exact_opt: false,
            timing: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RatioBasis {
    Opt,
    Greedy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub seed: u64,
    pub n: usize,
    pub k: usize,
    pub f_out: f64,
    pub f_opt: Option<f64>,
    pub f_greedy: f64,
    /// Greedy restricted to the shortlist.
    pub f_best_of_a: f64,
    pub ratio: f64,
    pub ratio_basis: RatioBasis,
    pub ratio_greedy: f64,
    pub shortlist_len: usize,
    pub shortlist_bound: usize,
    pub within_bound: bool,
    pub buffer_hw: usize,
    pub max_slot: usize,
    pub max_trackers: usize,
    pub eval_count: u64,
    pub amortized_evals: f64,
    pub selected: usize,
    pub selected_in_shortlist: usize,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub rows: Vec<TrialRow>,
    pub summary: RatioSummary,
    pub summary_vs_greedy: RatioSummary,
    pub cap_violations: usize,
}

/// One seeded trial with its offline references.
pub fn run_trial(
    instance: &InstanceFile,
    config: &SweepConfig,
    seed: u64,
) -> Result<(TrialRow, RunOutput)> {
    let start = Instant::now();
    let f = &instance.objective;
    let c = &instance.constraint;
    let out = run_seeded(f, c, &config.algo, seed)?;
    let wall_ms = if config.timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
    let n = instance.n();
    let greedy = offline_greedy(f, c);
    let shortlist: ItemSet = out.shortlist.iter().copied().collect();
    let best_of_a = greedy_over(f, c, &shortlist);
    let opt = if n <= config.opt_limit {
        Some(exhaustive_opt(f, c, config.opt_limit)?)
    } else if config.exact_opt {
        Some(branch_and_bound_opt(f, c))
    } else {
        None
    };
    if let Some(o) = &opt {
        if o.value + 1e-9 < greedy.value {
            return Err(Error::Invariant(format!(
                "optimum {} ({:?}) below greedy {}",
                o.value, o.method, greedy.value
            )));
        }
    }
    let m = &out.metrics;
    let f_opt = opt.as_ref().map(|o| o.value);
    let row = TrialRow {
        seed,
        n,
        k: effective_k(c, &config.algo),
        f_out: m.f_out,
        f_opt,
        f_greedy: greedy.value,
        f_best_of_a: best_of_a.value,
        ratio: ratio(m.f_out, f_opt.unwrap_or(greedy.value)),
        ratio_basis: if f_opt.is_some() { RatioBasis::Opt } else { RatioBasis::Greedy },
        ratio_greedy: ratio(m.f_out, greedy.value),
        shortlist_len: m.shortlist_len,
        shortlist_bound: m.shortlist_bound,
        within_bound: m.shortlist_len <= m.shortlist_bound,
        buffer_hw: m.buffer_hw,
        max_slot: m.max_slot,
        max_trackers: m.max_trackers,
        eval_count: m.eval_count,
        amortized_evals: m.amortized_evals,
        selected: m.selected,
        selected_in_shortlist: m.selected_in_shortlist,
        wall_ms,
    };
    Ok((row, out))
}

fn with_seed<T>(seed: u64, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Trial {
        seed,
        source: Box::new(e),
    })
}

/// Runs seeds `base_seed .. base_seed + trials` in parallel; rows come back
/// ordered by seed.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepReport> {
    config.algo.validate()?;
    let rows = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| {
            let seed = config.base_seed.wrapping_add(t);
            with_seed(
                seed,
                config
                    .source
                    .instance_for(seed)
                    .and_then(|inst| run_trial(&inst, config, seed).map(|(row, _)| row)),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let p = match &config.source {
        InstanceSource::Fixed(inst) => inst.constraint.p(),
        InstanceSource::Generated(g) if g.constraint == ConstraintKind::Matching => 2,
        InstanceSource::Generated(_) => 1,
    };
    let reference = match config.algo.mode {
        Mode::Preemption => preemption_reference(),
        Mode::Full | Mode::Streaming => reference_ratio(p, config.algo.epsilon),
    };
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let vs_greedy: Vec<f64> = rows.iter().map(|r| r.ratio_greedy).collect();
    Ok(SweepReport {
        config: config.clone(),
        summary: ratio_report(&ratios, reference),
        summary_vs_greedy: ratio_report(&vs_greedy, reference),
        cap_violations: rows.iter().filter(|r| !r.within_bound).count(),
        rows,
    })
}

fn csv_header(streaming: bool) -> Vec<&'static str> {
    let mut cols = vec![
        "schema",
        "seed",
        "n",
        "k",
        "mode",
        "f_out",
        "f_opt",
        "f_greedy",
        "f_best_of_a",
        "ratio",
        "ratio_basis",
        "ratio_greedy",
        "shortlist_len",
        "shortlist_bound",
        "within_bound",
    ];
    if streaming {
        cols.push("buffer_hw");
    }
    cols.extend([
        "eval_count",
        "amortized_evals",
        "selected",
        "selected_in_shortlist",
        "wall_ms",
    ]);
    cols
}

pub fn write_csv<W: Write>(report: &SweepReport, out: W) -> Result<()> {
    let mode = report.config.algo.mode;
    let streaming = mode == Mode::Streaming;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(streaming))?;
    for r in &report.rows {
        let mut rec = vec![
            CSV_SCHEMA.to_string(),
            r.seed.to_string(),
            r.n.to_string(),
            r.k.to_string(),
            mode.to_string(),
            r.f_out.to_string(),
            r.f_opt.map(|v| v.to_string()).unwrap_or_default(),
            r.f_greedy.to_string(),
            r.f_best_of_a.to_string(),
            r.ratio.to_string(),
            match r.ratio_basis {
                RatioBasis::Opt => "opt".into(),
                RatioBasis::Greedy => "greedy".into(),
            },
            r.ratio_greedy.to_string(),
            r.shortlist_len.to_string(),
            r.shortlist_bound.to_string(),
            r.within_bound.to_string(),
        ];
        if streaming {
            rec.push(r.buffer_hw.to_string());
        }
        rec.extend([
            r.eval_count.to_string(),
            r.amortized_evals.to_string(),
            r.selected.to_string(),
            r.selected_in_shortlist.to_string(),
            r.wall_ms.to_string(),
        ]);
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes CSV when the path ends in `.csv`, JSON otherwise.
pub fn write_report(report: &SweepReport, path: &Path) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        write_csv(report, file)
    } else {
        let mut file = file;
        serde_json::to_writer_pretty(&mut file, report)?;
        file.write_all(b"\n")?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Divergence {
    pub seed: u64,
    pub what: String,
    pub left_shortlist: Vec<ItemId>,
    pub right_shortlist: Vec<ItemId>,
    pub left_output: ItemSet,
    pub right_output: ItemSet,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeedComparison {
    pub seed: u64,
    pub shortlist_len: usize,
    pub buffer_full: usize,
    pub buffer_other: usize,
    /// `|A| + max slot + alpha * max trackers`.
    pub buffer_reference: usize,
    pub amortized_evals: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub other_mode: Mode,
    pub seeds: Vec<SeedComparison>,
    pub divergences: Vec<Divergence>,
}

impl ComparisonReport {
    pub fn equal(&self) -> bool {
        self.divergences.is_empty()
    }
}

/// Runs every seed in full mode and in `other` mode on the same arrival
/// order and plan.
///
/// Streaming must reproduce `A` and `A*` exactly with a buffer no larger
/// than full mode's. Preemption (which forces `alpha = beta = 1`) must
/// reproduce `A*` and `S`, with its shortlist contained in full mode's.
pub fn compare_modes(
    instance: &InstanceFile,
    algo: &AlgoConfig,
    other: Mode,
    seeds: impl IntoIterator<Item = u64>,
) -> Result<ComparisonReport> {
    let mut base = algo.clone();
    base.mode = Mode::Full;
    if other == Mode::Preemption {
        base.alpha = 1;
        base.beta = 1;
    }
    let alt = AlgoConfig { mode: other, ..base.clone() };
    let seeds: Vec<u64> = seeds.into_iter().collect();
    let runs = seeds
        .par_iter()
        .map(|&seed| {
            let f = &instance.objective;
            let c = &instance.constraint;
            with_seed(seed, run_seeded(f, c, &base, seed).and_then(|a| Ok((seed, a, run_seeded(f, c, &alt, seed)?))))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = ComparisonReport {
        other_mode: other,
        seeds: Vec::new(),
        divergences: Vec::new(),
    };
    for (seed, full, alt_run) in runs {
        let mut problems = Vec::new();
        match other {
            Mode::Preemption => {
                if full.output != alt_run.output {
                    problems.push("A* differs".to_string());
                }
                if full.solution != alt_run.solution {
                    problems.push("S differs".to_string());
                }
                if !alt_run.shortlist.iter().all(|e| full.shortlist.contains(e)) {
                    problems.push("preemption shortlist is not contained in the full shortlist".to_string());
                }
            }
            Mode::Streaming | Mode::Full => {
                if full.shortlist != alt_run.shortlist {
                    problems.push("A differs".to_string());
                }
                if full.output != alt_run.output {
                    problems.push("A* differs".to_string());
                }
                if alt_run.metrics.buffer_hw > full.metrics.buffer_hw {
                    problems.push(format!(
                        "buffer {} exceeds full-mode buffer {}",
                        alt_run.metrics.buffer_hw, full.metrics.buffer_hw
                    ));
                }
            }
        }
        let m = &alt_run.metrics;
        report.seeds.push(SeedComparison {
            seed,
            shortlist_len: m.shortlist_len,
            buffer_full: full.metrics.buffer_hw,
            buffer_other: m.buffer_hw,
            buffer_reference: m.shortlist_len + m.max_slot + base.alpha * m.max_trackers,
            amortized_evals: m.amortized_evals,
        });
        if !problems.is_empty() {
            report.divergences.push(Divergence {
                seed,
                what: problems.join("; "),
                left_shortlist: full.shortlist,
                right_shortlist: alt_run.shortlist,
                left_output: full.output,
                right_output: alt_run.output,
            });
        }
    }
    Ok(report)
}

/// A seed derived from a base seed and a label, for tools that need several
/// independent streams.
pub fn derive_seed(base: u64, label: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(label);
    rng.next_u64()
}
