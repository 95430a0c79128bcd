//! One runner per experiment. Disorder samples run in parallel and are merged in
//! sample order, so outputs depend only on the configuration.

use std::collections::BTreeSet;
use std::fs;
use std::time::Instant;

use dgff_core::closedform::{generalized_free_energy, predict, sample_grem2, PredictInputs};
use dgff_core::field::{sample_dgff, variance_profile};
use dgff_core::gibbs::{boundary_mass, high_points_in, log_partition};
use dgff_core::lattice::inner_box;
use dgff_core::multiscale::psi_field;
use dgff_core::overlap::{
    bk_derivative_identity, bk_integral_identity, overlap_sample, two_overlap_distribution,
    uniform_grid, DEFAULT_GRID_POINTS,
};
use dgff_core::pd::pd_second_moment;
use dgff_core::seed::derive_seed;
use dgff_core::{
    BoxGeometry, DgffSampler, FieldSample, GibbsContext, GreenCache, Grem2Spec, OverlapConfig,
    SigmaPair, TaskKind,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::manifest::{OutputChecksum, RunManifest, TaskSeed, MANIFEST_NAME};
use crate::output::Outputs;

/// Memory the overlap experiments may spend on cached Green columns.
pub const GREEN_CACHE_BYTES: usize = 512 << 20;

/// Largest `|lhs - rhs|` accepted by `bk-check` for the integral identity.
pub const INTEGRAL_TOLERANCE: f64 = 1e-12;
/// Largest `|lhs - rhs|` accepted by `bk-check` for the derivative identity.
pub const DERIVATIVE_TOLERANCE: f64 = 1e-6;

#[derive(Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub files: Vec<std::path::PathBuf>,
    /// Printed to stdout by the binary (JSON for `pd` and `predict`).
    pub stdout: Option<String>,
    /// Numerical checks that failed; non-empty means exit code 2.
    pub failures: Vec<String>,
}

struct Run<'a> {
    config: &'a ExperimentConfig,
    outputs: Outputs,
    seeds: BTreeSet<(String, u64, u64)>,
    stdout: Option<String>,
    failures: Vec<String>,
}

impl Run<'_> {
    fn seed(&mut self, kind: TaskKind, id: u64) -> u64 {
        let s = derive_seed(self.config.seed, id, kind);
        self.seeds.insert((kind_name(kind), id, s));
        s
    }

    fn seeds(&mut self, kind: TaskKind, count: usize) {
        for id in 0..count as u64 {
            self.seed(kind, id);
        }
    }
}

fn kind_name(kind: TaskKind) -> String {
    match kind {
        TaskKind::Field => "field".into(),
        TaskKind::Replicas => "replicas".into(),
        TaskKind::Pd => "pd".into(),
        TaskKind::Grem => "grem".into(),
        TaskKind::Walk => "walk".into(),
        TaskKind::Other(t) => format!("other-{t}"),
    }
}

/// Number of workers: `DGFF_LAB_THREADS` wins over the configuration, which wins over
/// the machine's parallelism.
pub fn resolve_workers(config: &ExperimentConfig) -> Result<usize> {
    if let Ok(v) = std::env::var("DGFF_LAB_THREADS") {
        return match v.trim().parse::<usize>() {
            Ok(w) if w > 0 => Ok(w),
            _ => Err(CliError::config(
                "DGFF_LAB_THREADS",
                format!("`{v}` is not a positive integer"),
            )),
        };
    }
    Ok(config.workers.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    }))
}

/// Validates `config`, runs it on a dedicated pool and writes outputs plus `manifest.json`
/// into `config.out`. Either every file appears or none does.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate()?;
    let workers = resolve_workers(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()?;
    let started = Instant::now();
    let mut run = Run {
        config,
        outputs: Outputs::new(&config.out)?,
        seeds: BTreeSet::new(),
        stdout: None,
        failures: Vec::new(),
    };
    pool.install(|| match config.experiment {
        Experiment::Sample => sample(&mut run),
        Experiment::Green => green(&mut run),
        Experiment::FreeEnergy => free_energy(&mut run),
        Experiment::Overlap => overlap(&mut run),
        Experiment::HighPoints => high_points(&mut run),
        Experiment::BoundaryMass => boundary(&mut run),
        Experiment::BkCheck => bk_check(&mut run),
        Experiment::Pd => pd(&mut run),
        Experiment::Predict => prediction(&mut run),
        Experiment::GremMc => grem(&mut run),
    })?;

    let mut manifest = RunManifest::new(config, workers);
    manifest.seeds = run
        .seeds
        .iter()
        .map(|(task, id, seed)| TaskSeed {
            task: task.clone(),
            disorder_id: *id,
            seed: *seed,
        })
        .collect();
    manifest.outputs = run
        .outputs
        .checksums()
        .into_iter()
        .map(|(file, sha256)| OutputChecksum { file, sha256 })
        .collect();
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    run.outputs.stage_json(MANIFEST_NAME, &manifest)?;
    let files = run.outputs.commit()?;
    Ok(RunOutcome {
        manifest,
        files,
        stdout: run.stdout,
        failures: run.failures,
    })
}

fn geometries(config: &ExperimentConfig) -> Result<Vec<BoxGeometry>> {
    config.n.iter().map(|&n| Ok(BoxGeometry::new(n)?)).collect()
}

fn sigma_pair(config: &ExperimentConfig) -> Result<SigmaPair> {
    Ok(SigmaPair::new(config.sigma1, config.sigma2, config.alpha)?)
}

fn ids(count: usize) -> rayon::range::Iter<u64> {
    (0..count as u64).into_par_iter()
}

#[derive(Serialize)]
struct SampleSummary {
    #[serde(rename = "N")]
    n: usize,
    seed: u64,
    source: &'static str,
    mean: f64,
    variance: f64,
    min: f64,
    max: f64,
    /// `max / (√(2/π) log N²)`, which tends to 1.
    max_ratio: f64,
}

fn sample(run: &mut Run) -> Result<()> {
    let config = run.config;
    let (field, source) = match &config.snapshot_in {
        Some(path) => {
            let f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
            (
                FieldSample::read_snapshot(std::io::BufReader::new(f))?,
                "snapshot",
            )
        }
        None => {
            let geom = BoxGeometry::new(config.n[0])?;
            let seed = run.seed(TaskKind::Field, 0);
            (sample_dgff(geom, seed), "sampled")
        }
    };
    let geom = field.geometry();
    let v = field.values();
    let count = v.len() as f64;
    let mean = v.iter().sum::<f64>() / count;
    let variance = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / count;
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let summary = SampleSummary {
        n: geom.n(),
        seed: field.seed(),
        source,
        mean,
        variance,
        min: v.iter().copied().fold(f64::INFINITY, f64::min),
        max,
        max_ratio: max / (std::f64::consts::FRAC_2_PI.sqrt() * geom.log_n2()),
    };
    if let Some(path) = &config.snapshot_out {
        let mut bytes = Vec::new();
        field.write_snapshot(&mut bytes)?;
        run.outputs.stage_at(path.clone(), &bytes)?;
    }
    run.outputs.stage_json("sample.json", &summary)
}

#[derive(Serialize)]
struct GreenRow {
    #[serde(rename = "N")]
    n: usize,
    x: i64,
    y: i64,
    green: f64,
}

fn green(run: &mut Run) -> Result<()> {
    let mut rows = Vec::new();
    for geom in geometries(run.config)? {
        for (v, g) in variance_profile(geom, run.config.delta)? {
            rows.push(GreenRow {
                n: geom.n(),
                x: v.x,
                y: v.y,
                green: g,
            });
        }
    }
    run.outputs.stage_csv("green.csv", &rows)
}

#[derive(Serialize)]
struct FreeEnergyRow {
    #[serde(rename = "N")]
    n: usize,
    beta: f64,
    alpha: Option<f64>,
    sigma1: Option<f64>,
    sigma2: Option<f64>,
    rho: Option<f64>,
    sample_id: u64,
    #[serde(rename = "log_Z")]
    log_z: f64,
    #[serde(rename = "f_N")]
    f_n: f64,
}

/// With `rho` set the Gibbs measure lives on `ψ` over `A_{N,ρ}`; otherwise on `φ` over `V_N`.
fn free_energy(run: &mut Run) -> Result<()> {
    let c = run.config;
    run.seeds(TaskKind::Field, c.disorder);
    let mut rows = Vec::new();
    for geom in geometries(c)? {
        let sampler = DgffSampler::new(geom);
        let log_n2 = geom.log_n2();
        let per: Vec<Vec<FreeEnergyRow>> = ids(c.disorder)
            .map(|id| {
                let field = sampler.sample(derive_seed(c.seed, id, TaskKind::Field));
                let psi = match c.rho {
                    Some(rho) => Some(psi_field(&field, c.alpha, c.sigma1, c.sigma2, rho)?),
                    None => None,
                };
                let values = psi.as_ref().map_or(field.values(), |p| p.values());
                c.beta
                    .iter()
                    .map(|&beta| {
                        let log_z = log_partition(values, beta)?;
                        Ok(FreeEnergyRow {
                            n: geom.n(),
                            beta,
                            alpha: c.rho.map(|_| c.alpha),
                            sigma1: c.rho.map(|_| c.sigma1),
                            sigma2: c.rho.map(|_| c.sigma2),
                            rho: c.rho,
                            sample_id: id,
                            log_z,
                            f_n: log_z / log_n2,
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        rows.extend(per.into_iter().flatten());
    }
    run.outputs.stage_csv("free_energy.csv", &rows)
}

fn overlap(run: &mut Run) -> Result<()> {
    let c = run.config;
    run.seeds(TaskKind::Field, c.disorder);
    run.seeds(TaskKind::Replicas, c.disorder);
    let mut rows = Vec::new();
    for geom in geometries(c)? {
        let sampler = DgffSampler::new(geom);
        let cache = GreenCache::with_memory_budget(geom, GREEN_CACHE_BYTES);
        for &beta in &c.beta {
            let mut oc = OverlapConfig::new(geom.n(), beta, c.rho, c.disorder, c.pairs, c.seed);
            oc.r_grid = match c.r {
                Some(r) => vec![r],
                None => uniform_grid(DEFAULT_GRID_POINTS),
            };
            rows.extend(two_overlap_distribution(&oc, &sampler, &cache)?.rows());
        }
    }
    run.outputs.stage_csv("overlap.csv", &rows)
}

#[derive(Serialize)]
struct HighPointRow {
    #[serde(rename = "N")]
    n: usize,
    gamma: f64,
    delta: f64,
    sample_id: u64,
    threshold: f64,
    count: usize,
    region_size: usize,
    exponent: Option<f64>,
}

fn high_points(run: &mut Run) -> Result<()> {
    let c = run.config;
    run.seeds(TaskKind::Field, c.disorder);
    let mut rows = Vec::new();
    for geom in geometries(c)? {
        let sampler = DgffSampler::new(geom);
        let region = inner_box(geom, c.delta)?;
        let per: Vec<Vec<HighPointRow>> = ids(c.disorder)
            .map(|id| {
                let field = sampler.sample(derive_seed(c.seed, id, TaskKind::Field));
                c.gamma
                    .iter()
                    .map(|&gamma| {
                        let h = high_points_in(&field, &region, gamma)?;
                        Ok(HighPointRow {
                            n: geom.n(),
                            gamma,
                            delta: c.delta,
                            sample_id: id,
                            threshold: h.threshold,
                            count: h.count,
                            region_size: h.region_size,
                            exponent: h.exponent,
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        rows.extend(per.into_iter().flatten());
    }
    run.outputs.stage_csv("high_points.csv", &rows)
}

#[derive(Serialize)]
struct BoundaryRow {
    #[serde(rename = "N")]
    n: usize,
    beta: f64,
    rho: f64,
    sample_id: u64,
    boundary_mass: f64,
}

fn boundary(run: &mut Run) -> Result<()> {
    let c = run.config;
    let rho = c.rho.ok_or_else(|| CliError::config("rho", "required"))?;
    run.seeds(TaskKind::Field, c.disorder);
    let mut rows = Vec::new();
    for geom in geometries(c)? {
        let sampler = DgffSampler::new(geom);
        let per: Vec<Vec<BoundaryRow>> = ids(c.disorder)
            .map(|id| {
                let field = sampler.sample(derive_seed(c.seed, id, TaskKind::Field));
                c.beta
                    .iter()
                    .map(|&beta| {
                        let ctx = GibbsContext::on_box(&field, beta)?;
                        Ok(BoundaryRow {
                            n: geom.n(),
                            beta,
                            rho,
                            sample_id: id,
                            boundary_mass: boundary_mass(&ctx, geom, rho)?,
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        rows.extend(per.into_iter().flatten());
    }
    run.outputs.stage_csv("boundary_mass.csv", &rows)
}

#[derive(Serialize)]
struct IdentityRow {
    #[serde(rename = "N")]
    n: usize,
    beta: f64,
    alpha: f64,
    rho: f64,
    sample_id: u64,
    identity: &'static str,
    lhs: f64,
    rhs: f64,
    difference: f64,
    tolerance: f64,
    pass: bool,
}

fn bk_check(run: &mut Run) -> Result<()> {
    let c = run.config;
    let rho = c.rho.ok_or_else(|| CliError::config("rho", "required"))?;
    run.seeds(TaskKind::Field, c.disorder);
    run.seeds(TaskKind::Replicas, c.disorder);
    let mut rows = Vec::new();
    for geom in geometries(c)? {
        let sampler = DgffSampler::new(geom);
        let cache = GreenCache::with_memory_budget(geom, GREEN_CACHE_BYTES);
        for &beta in &c.beta {
            let oc = OverlapConfig::new(geom.n(), beta, Some(rho), c.disorder, c.pairs, c.seed);
            let region = oc.region()?;
            let per: Vec<[IdentityRow; 2]> = ids(c.disorder)
                .map(|id| {
                    let s = overlap_sample(&oc, &region, &sampler, &cache, id)?;
                    let integral = bk_integral_identity(&s.overlaps.q, c.alpha)?.check;
                    let derivative =
                        bk_derivative_identity(&s.field, beta, rho, c.alpha, c.du)?.check;
                    let row = |identity, chk: dgff_core::overlap::IdentityCheck, tolerance: f64| {
                        IdentityRow {
                            n: geom.n(),
                            beta,
                            alpha: c.alpha,
                            rho,
                            sample_id: id,
                            identity,
                            lhs: chk.lhs,
                            rhs: chk.rhs,
                            difference: chk.difference,
                            tolerance,
                            pass: chk.difference.abs() < tolerance,
                        }
                    };
                    Ok([
                        row("integral", integral, INTEGRAL_TOLERANCE),
                        row("derivative", derivative, DERIVATIVE_TOLERANCE),
                    ])
                })
                .collect::<Result<_>>()?;
            rows.extend(per.into_iter().flatten());
        }
    }
    for r in rows.iter().filter(|r| !r.pass) {
        run.failures.push(format!(
            "{} identity at N={} beta={} sample {}: |difference| = {:e} exceeds {:e}",
            r.identity,
            r.n,
            r.beta,
            r.sample_id,
            r.difference.abs(),
            r.tolerance
        ));
    }
    run.outputs.stage_csv("bk_check.csv", &rows)
}

#[derive(Serialize)]
struct PdReport {
    alpha: f64,
    moment2: f64,
    stderr: f64,
    samples: usize,
}

fn pd(run: &mut Run) -> Result<()> {
    let c = run.config;
    run.seeds(TaskKind::Pd, c.samples);
    let m = pd_second_moment(c.alpha, c.samples, c.atoms, c.seed)?;
    let report = PdReport {
        alpha: c.alpha,
        moment2: m.mean,
        stderr: m.stderr,
        samples: m.samples,
    };
    run.stdout = Some(serde_json::to_string(&report)?);
    run.outputs.stage_json("pd.json", &report)
}

#[derive(Serialize)]
struct PredictReport {
    formula: String,
    inputs: PredictInputs,
    value: f64,
    branch: String,
}

fn prediction(run: &mut Run) -> Result<()> {
    let c = run.config;
    let formula = c
        .formula
        .clone()
        .ok_or_else(|| CliError::config("formula", "required"))?;
    let inputs = PredictInputs {
        beta: c.beta.first().copied(),
        alpha: Some(c.alpha),
        sigma1: Some(c.sigma1),
        sigma2: Some(c.sigma2),
        sigma_sq: c.sigma_sq,
        gamma: c.gamma.first().copied(),
        r: c.r,
        u: c.u,
    };
    let p = predict(&formula, &inputs)?;
    let report = PredictReport {
        formula: p.formula,
        inputs,
        value: p.value,
        branch: p.branch,
    };
    run.stdout = Some(serde_json::to_string(&report)?);
    run.outputs.stage_json("predict.json", &report)
}

#[derive(Serialize)]
struct GremRow {
    #[serde(rename = "N")]
    n: usize,
    beta: f64,
    alpha: f64,
    sigma1: f64,
    sigma2: f64,
    sample_id: u64,
    #[serde(rename = "log_Z")]
    log_z: f64,
    #[serde(rename = "f_N")]
    f_n: f64,
    limit: f64,
}

fn grem(run: &mut Run) -> Result<()> {
    let c = run.config;
    let sp = sigma_pair(c)?;
    run.seeds(TaskKind::Grem, c.disorder);
    let mut rows = Vec::new();
    for geom in geometries(c)? {
        let spec = Grem2Spec::scaled(geom.n(), &sp)?;
        let log_n2 = geom.log_n2();
        let per: Vec<Vec<GremRow>> = ids(c.disorder)
            .map(|id| {
                let values = sample_grem2(&spec, derive_seed(c.seed, id, TaskKind::Grem));
                c.beta
                    .iter()
                    .map(|&beta| {
                        let log_z = log_partition(&values, beta)?;
                        Ok(GremRow {
                            n: geom.n(),
                            beta,
                            alpha: c.alpha,
                            sigma1: c.sigma1,
                            sigma2: c.sigma2,
                            sample_id: id,
                            log_z,
                            f_n: log_z / log_n2,
                            limit: generalized_free_energy(beta, &sp),
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        rows.extend(per.into_iter().flatten());
    }
    run.outputs.stage_csv("grem_mc.csv", &rows)
}
