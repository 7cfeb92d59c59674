//! Seeded Monte Carlo trials and parameter sweeps over U, D_out and N,
//! with common random numbers across schemes and axis values.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines;
use crate::channel::generate_channels;
use crate::scheduler;
use crate::topology::{derive_structure, generate_topology, NetworkConfig};
use crate::{Error, Result};

/// The four compared schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Proposed,
    Opt,
    Mgf,
    Sgf,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Proposed, Scheme::Opt, Scheme::Mgf, Scheme::Sgf];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Opt => "opt_pdnoma",
            Scheme::Mgf => "mgf_noma",
            Scheme::Sgf => "sgf_noma",
        }
    }

    fn index(&self) -> usize {
        match self {
            Scheme::Proposed => 0,
            Scheme::Opt => 1,
            Scheme::Mgf => 2,
            Scheme::Sgf => 3,
        }
    }
}

/// One network realization's outcome.
#[derive(Debug, Clone)]
pub struct TrialResult {
    sum_rate: [f64; 4],
    qos_violations: [usize; 4],
    /// heuristic value / exact value, when the instance was small
    /// enough to solve exactly.
    pub solver_gap: Option<f64>,
}

impl TrialResult {
    pub fn sum_rate(&self, s: Scheme) -> f64 {
        self.sum_rate[s.index()]
    }

    pub fn qos_violations(&self, s: Scheme) -> usize {
        self.qos_violations[s.index()]
    }
}

/// Sweep axes of the result figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Number of UEs.
    U,
    /// RIS annulus outer radius [m].
    DOut,
    /// Elements per RIS block.
    N,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::U => "U",
            SweepAxis::DOut => "D_out",
            SweepAxis::N => "N",
        }
    }

    /// Applies an axis value to a config.
    pub fn apply(&self, cfg: &NetworkConfig, value: f64) -> NetworkConfig {
        let mut out = cfg.clone();
        match self {
            SweepAxis::U => out.u = value.round() as usize,
            SweepAxis::DOut => out.d_out_m = value,
            SweepAxis::N => out.n = value.round() as usize,
        }
        out
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "U" | "u" => Ok(SweepAxis::U),
            "D_out" | "d_out" | "dout" => Ok(SweepAxis::DOut),
            "N" | "n" => Ok(SweepAxis::N),
            other => Err(Error::Parse(format!(
                "unknown sweep axis {other:?} (expected U, D_out or N)"
            ))),
        }
    }
}

/// Derives one trial's RNG seed from the master seed (splitmix64 steps,
/// so nearby trial indices get unrelated streams).
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    let mut z = master ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs one trial: one topology, one channel set, all four schemes on
/// the same realization.
pub fn run_trial(cfg: &NetworkConfig, seed: u64) -> Result<TrialResult> {
    let (result, _state) = run_trial_detailed(cfg, seed)?;
    Ok(result)
}

/// [`run_trial`] plus the proposed scheme's final cluster state, for
/// trace output.
pub fn run_trial_detailed(
    cfg: &NetworkConfig,
    seed: u64,
) -> Result<(TrialResult, scheduler::ClusterState)> {
    cfg.validate()?;
    let s = derive_structure(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let placement = generate_topology(cfg, &mut rng)?;
    let ch = generate_channels(&placement, cfg, &mut rng)?;
    let floor = cfg.qos_sinr_floor();

    let (state, qos, stats) = scheduler::run_joint_clustering(&ch, cfg)?;
    let table = crate::phy::CascadeTable::build(&ch);
    let proposed = scheduler::network_rates_full(&state, &table, &ch, cfg);

    let clusters = baselines::benchmark_clusters(&ch, cfg.r, s.max_cluster_size);
    let (opt, _infeasible) = baselines::opt_pdnoma_rate(&clusters, &ch, cfg)?;
    let mgf = baselines::mgf_noma_rate(&ch, cfg);
    let sgf = baselines::sgf_noma_rate(&clusters, &ch, cfg);

    let violations = |sinr: &[f64]| sinr.iter().filter(|&&g| g < floor).count();
    let result = TrialResult {
        sum_rate: [
            proposed.sum_rate_bps,
            opt.sum_rate_bps,
            mgf.sum_rate_bps,
            sgf.sum_rate_bps,
        ],
        qos_violations: [
            qos.violations,
            violations(&opt.sinr),
            violations(&mgf.sinr),
            violations(&sgf.sinr),
        ],
        solver_gap: if stats.solver_gaps.is_empty() {
            None
        } else {
            Some(stats.solver_gaps.iter().sum::<f64>() / stats.solver_gaps.len() as f64)
        },
    };
    Ok((result, state))
}

/// Mean and 95% confidence half-width of one scheme at one axis value.
#[derive(Debug, Clone, Copy)]
pub struct SchemeStats {
    pub mean_bps: f64,
    pub ci95_bps: f64,
}

/// Aggregated results at one axis value.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub axis_value: f64,
    pub stats: [SchemeStats; 4],
    pub trials: usize,
}

impl SweepPoint {
    pub fn stats_for(&self, s: Scheme) -> SchemeStats {
        self.stats[s.index()]
    }
}

/// A full sweep: aggregated points plus the raw per-trial results that
/// produced them (in trial order, for reproducible serialization).
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub points: Vec<SweepPoint>,
    /// (axis value, trial index, seed, result) rows.
    pub raw: Vec<(f64, usize, u64, TrialResult)>,
}

/// Kahan-compensated sum; order-independent aggregation comes from
/// always reducing trials in index order.
fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

fn aggregate(results: &[TrialResult], scheme: Scheme) -> SchemeStats {
    let n = results.len() as f64;
    let mean = kahan_sum(results.iter().map(|r| r.sum_rate(scheme))) / n;
    if results.len() < 2 {
        return SchemeStats {
            mean_bps: mean,
            ci95_bps: 0.0,
        };
    }
    let var = kahan_sum(
        results
            .iter()
            .map(|r| (r.sum_rate(scheme) - mean).powi(2)),
    ) / (n - 1.0);
    SchemeStats {
        mean_bps: mean,
        ci95_bps: 1.96 * (var / n).sqrt(),
    }
}

/// Runs `trials` seeded trials per axis value. Trials share seeds
/// across axis values (common random numbers), and run in parallel.
pub fn run_sweep(
    cfg: &NetworkConfig,
    axis: SweepAxis,
    values: &[f64],
    trials: usize,
) -> Result<SweepResult> {
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(
            "sweep values must be sorted ascending and distinct".into(),
        ));
    }
    let mut points = Vec::with_capacity(values.len());
    let mut raw = Vec::new();
    for &value in values {
        let point_cfg = axis.apply(cfg, value);
        point_cfg.validate()?;
        let results: Result<Vec<TrialResult>> = (0..trials)
            .into_par_iter()
            .map(|t| run_trial(&point_cfg, trial_seed(cfg.seed, t)))
            .collect();
        let results = results?;
        let stats = [
            aggregate(&results, Scheme::Proposed),
            aggregate(&results, Scheme::Opt),
            aggregate(&results, Scheme::Mgf),
            aggregate(&results, Scheme::Sgf),
        ];
        for (t, r) in results.iter().enumerate() {
            raw.push((value, t, trial_seed(cfg.seed, t), r.clone()));
        }
        points.push(SweepPoint {
            axis_value: value,
            stats,
            trials,
        });
    }
    Ok(SweepResult { axis, points, raw })
}
