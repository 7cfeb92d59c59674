//! Command-line front end: config loading, trial/sweep execution, CSV
//! and metadata emission, and self-check commands.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assignment::{self, CostTensor};
use crate::montecarlo::{self, Scheme, SweepAxis, SweepResult};
use crate::scheduler;
use crate::topology::NetworkConfig;
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "gfnoma", about = "Uplink NOMA sum-rate simulator with RIS-assisted clustering")]
pub struct Cli {
    /// Config file (TOML, flat keys; missing keys take defaults).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for CSV and metadata files.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Trials per point.
    #[arg(long, global = true, default_value_t = 100)]
    pub trials: usize,
    /// Master seed; overrides the config file's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Rayon worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run trials at a single operating point.
    Trial,
    /// Sweep one parameter axis over a list of values.
    Sweep {
        /// Axis: U, D_out or N.
        #[arg(long)]
        sweep: SweepAxis,
        /// Comma-separated ascending axis values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
    /// Benchmark the heuristic assignment solver against the exact one.
    SolverBench {
        /// Cubic instance dimension.
        #[arg(long, default_value_t = 5)]
        size: usize,
        /// Number of random instances.
        #[arg(long, default_value_t = 100)]
        instances: usize,
        /// Write the generated instances to this directory.
        #[arg(long)]
        dump: Option<PathBuf>,
        /// Solve a previously dumped instance file instead of
        /// generating new ones.
        #[arg(long)]
        load: Option<PathBuf>,
    },
    /// Run the built-in invariant suites and report pass/fail.
    Validate,
}

/// Loads a TOML config; missing keys take the built-in defaults, an
/// empty file yields the full default set.
pub fn load_config(path: &Path) -> Result<NetworkConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let cfg: NetworkConfig =
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Serializes a config back to TOML (round-trips through load_config).
pub fn config_to_toml(cfg: &NetworkConfig) -> Result<String> {
    toml::to_string_pretty(cfg).map_err(|e| Error::Parse(e.to_string()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Writes sweep.csv, trials.csv and run_meta into `outdir`.
pub fn emit_results(result: &SweepResult, cfg: &NetworkConfig, outdir: &Path) -> Result<()> {
    fs::create_dir_all(outdir).map_err(|e| Error::Io {
        path: outdir.display().to_string(),
        source: e,
    })?;

    let mut sweep = String::from("axis_value,scheme,mean_bps,ci95_bps,trials\n");
    for point in &result.points {
        for s in Scheme::ALL {
            let st = point.stats_for(s);
            sweep.push_str(&format!(
                "{},{},{:.17e},{:.17e},{}\n",
                point.axis_value,
                s.as_str(),
                st.mean_bps,
                st.ci95_bps,
                point.trials
            ));
        }
    }
    write_file(&outdir.join("sweep.csv"), &sweep)?;

    let mut trials =
        String::from("axis_value,trial,seed,scheme,sum_rate_bps,qos_violations\n");
    for (value, t, seed, r) in &result.raw {
        for s in Scheme::ALL {
            trials.push_str(&format!(
                "{},{},{},{},{:.17e},{}\n",
                value,
                t,
                seed,
                s.as_str(),
                r.sum_rate(s),
                r.qos_violations(s)
            ));
        }
    }
    write_file(&outdir.join("trials.csv"), &trials)?;

    let meta = format!(
        "version = {:?}\naxis = {:?}\nmaster_seed = {}\n\n[config]\n{}",
        env!("CARGO_PKG_VERSION"),
        result.axis.as_str(),
        cfg.seed,
        config_to_toml(cfg)?
    );
    write_file(&outdir.join("run_meta"), &meta)?;
    Ok(())
}

fn resolve_config(cli: &Cli) -> Result<NetworkConfig> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => NetworkConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn current_axis_value(cfg: &NetworkConfig, axis: SweepAxis) -> f64 {
    match axis {
        SweepAxis::U => cfg.u as f64,
        SweepAxis::DOut => cfg.d_out_m,
        SweepAxis::N => cfg.n as f64,
    }
}

fn run_trial_command(cli: &Cli, cfg: &NetworkConfig) -> Result<()> {
    let axis = SweepAxis::U;
    let result = montecarlo::run_sweep(cfg, axis, &[current_axis_value(cfg, axis)], cli.trials)?;
    emit_results(&result, cfg, &cli.out)?;
    let point = &result.points[0];
    for s in Scheme::ALL {
        let st = point.stats_for(s);
        println!(
            "{:<11} mean {:>14.1} bps  ci95 +/- {:>12.1} bps  ({} trials)",
            s.as_str(),
            st.mean_bps,
            st.ci95_bps,
            point.trials
        );
    }
    if cli.verbose {
        let (_, state) = montecarlo::run_trial_detailed(cfg, montecarlo::trial_seed(cfg.seed, 0))?;
        print!("{}", scheduler::trace_string(&state));
    }
    Ok(())
}

fn run_sweep_command(cli: &Cli, cfg: &NetworkConfig, axis: SweepAxis, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidConfig("--values must be non-empty".into()));
    }
    let result = montecarlo::run_sweep(cfg, axis, values, cli.trials)?;
    emit_results(&result, cfg, &cli.out)?;
    for point in &result.points {
        for s in Scheme::ALL {
            let st = point.stats_for(s);
            println!(
                "{} = {:<8} {:<11} mean {:>14.1} bps  ci95 +/- {:>12.1}",
                axis.as_str(),
                point.axis_value,
                s.as_str(),
                st.mean_bps,
                st.ci95_bps
            );
        }
    }
    Ok(())
}

fn random_tensor<R: Rng>(size: usize, rng: &mut R) -> CostTensor {
    let mut t = CostTensor::zeros(size, size, size);
    for r in 0..size {
        for u in 0..size {
            for b in 0..size {
                t.set(r, u, b, rng.gen_range(0.0..100.0), 0);
            }
        }
    }
    t
}

fn bench_instance(t: &CostTensor) -> Result<(f64, f64, f64, f64)> {
    let start = std::time::Instant::now();
    let exact = assignment::solve_exact(t)?;
    let exact_ms = start.elapsed().as_secs_f64() * 1e3;
    let start = std::time::Instant::now();
    let heur = assignment::solve_heuristic(t);
    let heur_ms = start.elapsed().as_secs_f64() * 1e3;
    let ratio = if exact.value.abs() < 1e-12 {
        1.0
    } else {
        heur.value / exact.value
    };
    Ok((exact.value, ratio, exact_ms, heur_ms))
}

fn run_solver_bench(
    cfg: &NetworkConfig,
    size: usize,
    instances: usize,
    dump: Option<&Path>,
    load: Option<&Path>,
) -> Result<()> {
    if let Some(path) = load {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let t = CostTensor::load(&text)?;
        let (exact, ratio, exact_ms, heur_ms) = bench_instance(&t)?;
        println!(
            "{}: exact {exact:.6} ({exact_ms:.2} ms), heuristic/exact {ratio:.4} ({heur_ms:.2} ms)",
            path.display()
        );
        return Ok(());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    if let Some(dir) = dump {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
    }
    let mut worst = f64::INFINITY;
    let mut sum_ratio = 0.0;
    let mut sum_exact_ms = 0.0;
    let mut sum_heur_ms = 0.0;
    for i in 0..instances {
        let t = random_tensor(size, &mut rng);
        if let Some(dir) = dump {
            let mut text = Vec::new();
            t.dump(&mut text).map_err(|e| Error::Io {
                path: "instance buffer".into(),
                source: e,
            })?;
            write_file(
                &dir.join(format!("instance_{i:04}.txt")),
                std::str::from_utf8(&text).unwrap(),
            )?;
        }
        let (_, ratio, exact_ms, heur_ms) = bench_instance(&t)?;
        worst = worst.min(ratio);
        sum_ratio += ratio;
        sum_exact_ms += exact_ms;
        sum_heur_ms += heur_ms;
    }
    let n = instances as f64;
    println!(
        "{instances} instances of size {size}: mean heuristic/exact {:.4}, worst {:.4}",
        sum_ratio / n,
        worst
    );
    println!(
        "mean runtime: exact {:.3} ms, heuristic {:.3} ms",
        sum_exact_ms / n,
        sum_heur_ms / n
    );
    Ok(())
}

fn suite_phase_coherence(cfg: &NetworkConfig) -> bool {
    use crate::channel::generate_channels;
    use crate::phy;
    use crate::topology::generate_topology;
    let mut cfg = cfg.clone();
    cfg.u = 4;
    cfg.r = 2;
    cfg.m = 2;
    cfg.g = 1;
    cfg.n = 16;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let placement = match generate_topology(&cfg, &mut rng) {
            Ok(p) => p,
            Err(_) => return false,
        };
        let ch = match generate_channels(&placement, &cfg, &mut rng) {
            Ok(c) => c,
            Err(_) => return false,
        };
        for b in 0..ch.num_blocks() {
            for u in 0..ch.num_ues() {
                let phases = phy::align_phases(ch.f[u], &ch.g[b], &ch.h[u][b]);
                let aligned = phy::cascade_gain(&ch.g[b], &phases, &ch.h[u][b]).norm();
                let bound: f64 = (0..cfg.n)
                    .map(|n| ch.g[b][n].norm() * ch.h[u][b][n].norm())
                    .sum();
                if (aligned - bound).abs() > 1e-9 * bound.max(1e-30) {
                    return false;
                }
            }
        }
    }
    true
}

fn suite_assignment_oracle() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..25 {
        let t = random_tensor(4, &mut rng);
        let exact = match assignment::solve_exact(&t) {
            Ok(a) => a,
            Err(_) => return false,
        };
        let heur = assignment::solve_heuristic(&t);
        if heur.value > exact.value + 1e-9 {
            return false;
        }
        if heur.value < 0.90 * exact.value {
            return false;
        }
    }
    true
}

fn suite_constraints(cfg: &NetworkConfig) -> bool {
    use crate::channel::generate_channels;
    use crate::topology::generate_topology;
    let mut cfg = cfg.clone();
    cfg.u = 9;
    cfg.r = 3;
    cfg.m = 3;
    cfg.g = 1;
    cfg.n = 8;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let placement = match generate_topology(&cfg, &mut rng) {
            Ok(p) => p,
            Err(_) => return false,
        };
        let ch = match generate_channels(&placement, &cfg, &mut rng) {
            Ok(c) => c,
            Err(_) => return false,
        };
        let (state, _, _) = match scheduler::run_joint_clustering(&ch, &cfg) {
            Ok(out) => out,
            Err(_) => return false,
        };
        if !scheduler::check_constraints(&state, &cfg).all() {
            return false;
        }
    }
    true
}

fn run_validate(cfg: &NetworkConfig) -> Result<()> {
    let suites: [(&str, bool); 3] = [
        ("phase-coherence", suite_phase_coherence(cfg)),
        ("assignment-oracle", suite_assignment_oracle()),
        ("constraint-checks", suite_constraints(cfg)),
    ];
    let mut ok = true;
    for (name, passed) in suites {
        println!("{name}: {}", if passed { "pass" } else { "FAIL" });
        ok &= passed;
    }
    if ok {
        Ok(())
    } else {
        Err(Error::Domain("validation suite failure".into()))
    }
}

/// Entry point shared by main and tests; returns Err on any failure so
/// the binary can map it to a non-zero exit code.
pub fn run(cli: &Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        // ignore the error if a pool already exists (repeat calls in tests)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let cfg = resolve_config(cli)?;
    match &cli.command {
        Command::Trial => run_trial_command(cli, &cfg),
        Command::Sweep { sweep, values } => run_sweep_command(cli, &cfg, *sweep, values),
        Command::SolverBench {
            size,
            instances,
            dump,
            load,
        } => run_solver_bench(&cfg, *size, *instances, dump.as_deref(), load.as_deref()),
        Command::Validate => run_validate(&cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.toml");
        fs::write(&path, "").unwrap();
        let cfg = load_config(&path).unwrap();
        let d = NetworkConfig::default();
        assert_eq!(cfg.u, 75);
        assert_eq!(cfg.r, 25);
        assert_eq!(cfg.m, 25);
        assert_eq!(cfg.g, 1);
        assert_eq!(cfg.n, 256);
        assert_eq!(cfg.p_id_dbm, 21.0);
        assert_eq!(cfg.w_hz, 180e3);
        assert_eq!(cfg.q_u_bps, 1e5);
        assert_eq!(cfg.f_c_hz, 5e9);
        assert_eq!(cfg.d_in_m, 15.0);
        assert_eq!(cfg.d_out_m, 50.0);
        assert_eq!(cfg.d_m, 250.0);
        assert_eq!(cfg.n0_dbm_per_hz, -174.0);
        assert_eq!(cfg.p_max_dbm, 23.0);
        assert_eq!(cfg.p_min_dbm, -40.0);
        assert_eq!(cfg.seed, d.seed);
    }

    #[test]
    fn invalid_config_names_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        fs::write(&path, "u = 10\nr = 25\n").unwrap();
        let err = load_config(&path).unwrap_err().to_string();
        assert!(err.contains("u"), "error should name the field: {err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("typo.toml");
        fs::write(&path, "num_users = 50\n").unwrap();
        assert!(load_config(&path).is_err());
    }

    #[test]
    fn config_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        let mut cfg = NetworkConfig::default();
        cfg.u = 30;
        cfg.d_out_m = 120.5;
        cfg.seed = 99;
        fs::write(&path, config_to_toml(&cfg).unwrap()).unwrap();
        let back = load_config(&path).unwrap();
        assert_eq!(config_to_toml(&back).unwrap(), config_to_toml(&cfg).unwrap());
    }

    #[test]
    fn emit_writes_expected_rows() {
        let mut cfg = NetworkConfig::default();
        cfg.u = 6;
        cfg.r = 3;
        cfg.m = 3;
        cfg.n = 4;
        let result = montecarlo::run_sweep(&cfg, SweepAxis::N, &[2.0, 4.0, 8.0], 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_results(&result, &cfg, dir.path()).unwrap();
        let sweep = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert_eq!(sweep.lines().count(), 1 + 3 * 4);
        let trials = fs::read_to_string(dir.path().join("trials.csv")).unwrap();
        assert_eq!(trials.lines().count(), 1 + 3 * 2 * 4);
        assert!(dir.path().join("run_meta").exists());
    }

    #[test]
    fn csv_floats_round_trip() {
        let mut cfg = NetworkConfig::default();
        cfg.u = 6;
        cfg.r = 3;
        cfg.m = 3;
        cfg.n = 4;
        let result = montecarlo::run_sweep(&cfg, SweepAxis::N, &[4.0], 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        emit_results(&result, &cfg, dir.path()).unwrap();
        let sweep = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        for (line, s) in sweep.lines().skip(1).zip(Scheme::ALL) {
            let fields: Vec<&str> = line.split(',').collect();
            let mean: f64 = fields[2].parse().unwrap();
            assert_eq!(mean.to_bits(), result.points[0].stats_for(s).mean_bps.to_bits());
        }
    }

    #[test]
    fn solver_bench_dump_load() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = random_tensor(3, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inst.txt");
        let mut text = Vec::new();
        t.dump(&mut text).unwrap();
        fs::write(&path, &text).unwrap();
        let back = CostTensor::load(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(
            assignment::solve_exact(&t).unwrap().value,
            assignment::solve_exact(&back).unwrap().value
        );
    }
}
