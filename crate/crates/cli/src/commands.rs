use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use tmt_core::analytics::{
    analyze_point, dct_cache, dct_expander, dct_rotor, hybrid_components, large_flow_threshold, optimal_split,
    PathLengths,
};
use tmt_core::model::ClassFilter;
use tmt_core::simulator::ArrivalMode;
use tmt_core::topology::mean_expected_path_length;
use tmt_core::traffic::{read_trace_csv, skewness_phi, write_trace_csv, TrafficTrace};
use tmt_core::{
    build_expander, expected_path_length, generate, simulate, FlowClass, FlowSizeDistribution, NetworkConfig,
    RunConfig, SimOptions, Split,
};

use crate::manifest::{Command, RunManifest, SweepVar};

pub const ANALYZE_HEADER: &[&str] = &[
    "x",
    "phi",
    "phi_m",
    "dct_expander_s",
    "dct_rotor_s",
    "dct_hybrid_s",
    "k_r_star",
    "k_c_star",
    "L_star_expander",
    "L_star_rotor",
    "L_star_hybrid",
    "large_threshold_bits",
    "z",
];
pub const SIMULATE_HEADER: &[&str] = &["x", "seed", "dct_sim_s", "dct_analytic_s", "rel_err", "spill_count"];
pub const SPLIT_HEADER: &[&str] = &["x", "phi_m", "k_static", "k_r_star", "k_c_star", "ratio"];
pub const THRESHOLD_HEADER: &[&str] = &["phi", "large_threshold_bits", "large_threshold_mb"];
pub const EPL_HEADER: &[&str] = &["graph", "n", "degree", "seeds", "mean_epl"];

/// Simulation-only switches that do not belong in the run config.
#[derive(Debug, Clone, Default)]
pub struct SimFlags {
    pub online: bool,
    pub trace: Option<PathBuf>,
}

type Row = Vec<String>;

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn run(manifest: &RunManifest, flags: &SimFlags) -> Result<()> {
    manifest.validate()?;
    if let Some(dir) = &manifest.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join("manifest.txt"), manifest.render())?;
        fs::write(dir.join("config.toml"), manifest.config.to_toml_string())?;
    }
    let (header, rows) = match manifest.command {
        Command::Analyze => (ANALYZE_HEADER, analyze(manifest)?),
        Command::Simulate => (SIMULATE_HEADER, simulate_runs(manifest, flags)?),
        Command::Split => (SPLIT_HEADER, split(manifest)?),
        Command::Threshold => (THRESHOLD_HEADER, threshold(manifest)?),
        Command::Epl => (EPL_HEADER, epl(manifest)?),
    };
    let file = format!("{}.csv", manifest.command.name());
    match &manifest.out {
        Some(dir) => {
            let path = dir.join(&file);
            write_csv(
                File::create(&path).with_context(|| format!("creating {}", path.display()))?,
                header,
                &rows,
            )?;
            info!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => write_csv(io::stdout().lock(), header, &rows)?,
    }
    Ok(())
}

fn write_csv<W: Write>(w: W, header: &[&str], rows: &[Row]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for r in rows {
        out.write_record(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Names the grid point an error came from.
fn at_point(manifest: &RunManifest, index: usize) -> String {
    match &manifest.sweep {
        Some(s) => format!("grid point {} = {}", s.var.name(), s.values[index]),
        None => "the configured point".to_string(),
    }
}

fn path_lengths(config: &NetworkConfig, seed: u64) -> Result<PathLengths> {
    let epl_of = |k: usize| -> Result<f64> {
        if k == 0 {
            return Ok(f64::NAN);
        }
        let g = build_expander(config.n(), k, seed)?;
        Ok(expected_path_length(&g)?)
    };
    Ok(PathLengths {
        full: epl_of(config.k())?,
        static_part: epl_of(config.k_static())?,
    })
}

fn analyze(manifest: &RunManifest) -> Result<Vec<Row>> {
    let base = manifest.config.network()?;
    let epl = path_lengths(&base, manifest.config.expander_seed).context("computing expander path lengths")?;
    let dist = manifest.config.load_distribution()?;
    let k_c_sweep = manifest.sweep.as_ref().is_some_and(|s| s.var == SweepVar::KC);
    manifest
        .points()
        .par_iter()
        .map(|point| {
            let cfg = point.network()?;
            let split = k_c_sweep.then(|| Split {
                k_rotor: cfg.k_rotor(),
                k_cache: cfg.k_cache(),
                ratio: None,
            });
            let r = analyze_point(point.load_x, point.phi, point.phi_m, &dist, epl, split, &cfg)?;
            Ok(vec![
                num(r.x),
                num(r.phi),
                num(r.phi_m),
                num(r.dct_expander_s),
                num(r.dct_rotor_s),
                num(r.dct_hybrid_s),
                r.k_r_star.to_string(),
                r.k_c_star.to_string(),
                num(r.l_star_expander),
                num(r.l_star_rotor),
                num(r.l_star_hybrid),
                opt(r.large_threshold_bits),
                num(r.z),
            ])
        })
        .enumerate()
        .map(|(i, r): (usize, Result<Row>)| r.with_context(|| at_point(manifest, i)))
        .collect()
}

fn split(manifest: &RunManifest) -> Result<Vec<Row>> {
    let dist = manifest.config.load_distribution()?;
    manifest
        .points()
        .iter()
        .enumerate()
        .map(|(i, point)| {
            let run = || -> Result<Row> {
                let cfg = point.network()?;
                let s = optimal_split(&dist, point.load_x, point.phi_m, &cfg)?;
                info!(
                    "split at x={} phi_m={} over {} switches: ({}, {})",
                    point.load_x,
                    point.phi_m,
                    cfg.k() - cfg.k_static(),
                    s.k_rotor,
                    s.k_cache
                );
                Ok(vec![
                    num(point.load_x),
                    num(point.phi_m),
                    cfg.k_static().to_string(),
                    s.k_rotor.to_string(),
                    s.k_cache.to_string(),
                    opt(s.ratio),
                ])
            };
            run().with_context(|| at_point(manifest, i))
        })
        .collect()
}

fn threshold(manifest: &RunManifest) -> Result<Vec<Row>> {
    manifest
        .points()
        .iter()
        .enumerate()
        .map(|(i, point)| {
            let run = || -> Result<Row> {
                let t = point.network()?.timing();
                let bits = large_flow_threshold(point.phi, &t)?;
                info!("threshold at phi={}: {} bits", point.phi, bits);
                Ok(vec![num(point.phi), num(bits), num(bits / 8e6)])
            };
            run().with_context(|| at_point(manifest, i))
        })
        .collect()
}

fn epl(manifest: &RunManifest) -> Result<Vec<Row>> {
    let cfg = manifest.config.network()?;
    let seed0 = manifest.config.expander_seed;
    let mut graphs = vec![("full", cfg.k())];
    if cfg.k_static() > 0 && cfg.k_static() != cfg.k() {
        graphs.push(("static", cfg.k_static()));
    }
    graphs
        .into_iter()
        .map(|(name, k)| {
            let mean = mean_expected_path_length(cfg.n(), k, seed0, manifest.seeds)
                .with_context(|| format!("{name} expander n={} degree={k}", cfg.n()))?;
            info!(
                "epl of {name} expander (n={}, degree={k}, {} seeds): {mean}",
                cfg.n(),
                manifest.seeds
            );
            Ok(vec![
                name.to_string(),
                cfg.n().to_string(),
                k.to_string(),
                manifest.seeds.to_string(),
                num(mean),
            ])
        })
        .collect()
}

/// Closed-form DCT matching the planes `cfg` actually has, scaled to the
/// trace window. `None` when no closed form covers the configuration.
fn analytic_dct(
    cfg: &NetworkConfig,
    point: &RunConfig,
    dist: &FlowSizeDistribution,
    trace: &TrafficTrace,
    epl: PathLengths,
) -> Option<f64> {
    let spec = point.traffic().ok()?;
    let x = spec.per_tor_rate_bps(cfg) / (cfg.k() as f64 * cfg.rate_bps());
    let demand = trace.demand(cfg.n());
    let scope = trace.scope(cfg.n());
    let window = trace.window_s;
    let phi_of = |filter| skewness_phi(&demand, filter, &scope).ok();
    let dct = match (cfg.k_static(), cfg.k_rotor(), cfg.k_cache()) {
        (_, 0, 0) => dct_expander(x, epl.full),
        (0, _, 0) => dct_rotor(x, phi_of(ClassFilter::All)?, &cfg.timing()),
        (0, 0, k_c) => dct_cache(x * cfg.k() as f64 * cfg.rate_bps(), k_c, dist, cfg).ok()?,
        (_, k_r, k_c) => {
            let phi_m = phi_of(ClassFilter::Only(FlowClass::Medium)).unwrap_or(point.phi_m);
            let split = Split {
                k_rotor: k_r,
                k_cache: k_c,
                ratio: None,
            };
            hybrid_components(x, dist, phi_m, epl.static_part, split, cfg)
                .ok()?
                .total_s()
        }
    };
    Some(dct * window)
}

struct SimJob {
    point: usize,
    seed: u64,
}

fn simulate_runs(manifest: &RunManifest, flags: &SimFlags) -> Result<Vec<Row>> {
    if manifest.sweep.as_ref().is_some_and(|s| s.var == SweepVar::Phi) {
        bail!("phi is measured from generated traffic; it cannot be swept in simulate");
    }
    let points = manifest.points();
    let base = manifest.config.network()?;
    let epl = path_lengths(&base, manifest.config.expander_seed).context("computing expander path lengths")?;
    let dist = manifest.config.load_distribution()?;
    let fixed_trace = match &flags.trace {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening trace {}", path.display()))?;
            Some(read_trace_csv(file, &base)?)
        }
        None => None,
    };
    let seeds = if fixed_trace.is_some() { 1 } else { manifest.seeds };
    let runs_dir = manifest.out.as_ref().map(|d| d.join("runs"));
    if let Some(dir) = &runs_dir {
        fs::create_dir_all(dir)?;
    }

    let jobs: Vec<SimJob> = (0..points.len())
        .flat_map(|point| (0..seeds).map(move |s| SimJob { point, seed: s as u64 }))
        .collect();
    let results: Vec<Result<(Row, String)>> = jobs
        .par_iter()
        .map(|job| {
            let point = &points[job.point];
            let run = || -> Result<(Row, String)> {
                let cfg = point.network()?;
                let seed = point.traffic_seed + job.seed;
                let trace = match &fixed_trace {
                    Some(flows) => TrafficTrace {
                        flows: flows.clone(),
                        active: (0..cfg.n()).collect(),
                        window_s: point.window_s,
                    },
                    None => {
                        let mut spec = point.traffic()?;
                        spec.seed = seed;
                        generate(&spec, &cfg)?
                    }
                };
                let opts = SimOptions {
                    arrival: if flags.online {
                        ArrivalMode::Online
                    } else {
                        ArrivalMode::Batch
                    },
                    seed,
                    expander_seed: point.expander_seed,
                    ..SimOptions::default()
                };
                let result = simulate(&trace.flows, &cfg, &opts)?;
                let tag = format!("p{:03}_s{seed}", job.point);
                if !result.completed {
                    warn!("{tag} did not drain within {} s", opts.max_sim_time_s);
                }
                if let Some(dir) = &runs_dir {
                    write_run_files(dir, &tag, &trace, &result)?;
                }
                let analytic = analytic_dct(&cfg, point, &dist, &trace, epl);
                let rel_err = analytic.filter(|a| *a > 0.0).map(|a| (result.dct_s - a).abs() / a);
                let summary = format!("{tag} x={} seed={seed} {}", point.load_x, result.summary());
                Ok((
                    vec![
                        num(point.load_x),
                        seed.to_string(),
                        num(result.dct_s),
                        opt(analytic),
                        opt(rel_err),
                        result.spill_count.to_string(),
                    ],
                    summary,
                ))
            };
            run().with_context(|| format!("{}, seed offset {}", at_point(manifest, job.point), job.seed))
        })
        .collect();

    let mut rows = Vec::with_capacity(results.len());
    let mut summaries = String::new();
    for r in results {
        let (row, summary) = r?;
        rows.push(row);
        summaries.push_str(&summary);
        summaries.push('\n');
    }
    match &runs_dir {
        Some(dir) => fs::write(dir.join("summary.txt"), summaries)?,
        None => eprint!("{summaries}"),
    }
    Ok(rows)
}

fn write_run_files(dir: &Path, tag: &str, trace: &TrafficTrace, result: &tmt_core::SimResult) -> Result<()> {
    let open = |name: String| -> Result<BufWriter<File>> {
        let path = dir.join(name);
        Ok(BufWriter::new(
            File::create(&path).with_context(|| format!("creating {}", path.display()))?,
        ))
    };
    write_trace_csv(&trace.flows, open(format!("{tag}.trace.csv"))?)?;
    result.write_csv(open(format!("{tag}.flows.csv"))?)?;
    Ok(())
}

/// Loads the run config from `--config`/`--profile`.
pub fn load_config(path: Option<&Path>, profile: Option<&str>) -> Result<RunConfig> {
    let base = match profile {
        Some(p) => p.parse().map_err(|e: tmt_core::Error| anyhow!(e))?,
        None => tmt_core::Profile::PaperNumeric,
    };
    match path {
        Some(p) => RunConfig::from_path(p, base).with_context(|| format!("reading config {}", p.display())),
        None => Ok(RunConfig::from_profile(base)),
    }
}
