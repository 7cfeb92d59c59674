//! RIS-less benchmark schemes: grant-based optimal PD-NOMA with
//! per-cluster power optimization, multi-level grant-free NOMA with a
//! quantized power ladder, and single-level grant-free NOMA at
//! identical power. All three read only the direct UE-BS channels.

use crate::channel::ChannelSet;
use crate::phy::{self, RateReport};
use crate::topology::NetworkConfig;
use crate::{dbm_to_watt, Error, Result};

/// Largest cluster the power optimizer accepts.
pub const OPT_CLUSTER_LIMIT: usize = 6;

/// Per-UE transmit powers in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile {
    pub p: Vec<f64>,
}

/// Sorts UEs by direct gain (descending, ties by index) and deals them
/// round-robin across R clusters, mixing strong and weak users.
pub fn benchmark_clusters(ch: &ChannelSet, r: usize, k: usize) -> Vec<Vec<usize>> {
    assert!(ch.num_ues() <= r * k, "more UEs than cluster capacity");
    let mut order: Vec<usize> = (0..ch.num_ues()).collect();
    order.sort_by(|&a, &b| {
        ch.direct_gain(b)
            .partial_cmp(&ch.direct_gain(a))
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut clusters = vec![Vec::new(); r];
    for (i, &u) in order.iter().enumerate() {
        clusters[i % r].push(u);
    }
    clusters
}

/// Rates for fixed per-UE powers on direct-only channels: SIC by
/// descending received power within each cluster.
fn rates_with_powers(
    clusters: &[Vec<usize>],
    powers: &PowerProfile,
    ch: &ChannelSet,
    cfg: &NetworkConfig,
) -> RateReport {
    let sigma2 = cfg.noise_watt();
    let mut sinr = vec![0.0; ch.num_ues()];
    let mut total = 0.0;
    for members in clusters {
        if members.is_empty() {
            continue;
        }
        let rx: Vec<f64> = members
            .iter()
            .map(|&u| powers.p[u] * ch.direct_gain(u))
            .collect();
        let sinrs = phy::sinrs_in_member_order(members, &rx, sigma2);
        for (&u, &g) in members.iter().zip(&sinrs) {
            sinr[u] = g;
            total += cfg.w_hz * g.ln_1p() / std::f64::consts::LN_2;
        }
    }
    RateReport {
        sum_rate_bps: total,
        sinr,
    }
}

/// Single-level GF-NOMA: everyone transmits at p_id.
pub fn sgf_noma_rate(clusters: &[Vec<usize>], ch: &ChannelSet, cfg: &NetworkConfig) -> RateReport {
    let powers = PowerProfile {
        p: vec![cfg.p_id_watt(); ch.num_ues()],
    };
    rates_with_powers(clusters, &powers, ch, cfg)
}

/// The R dBm power levels of MGF-NOMA, lowest first: evenly spaced in
/// dBm from P_min to P_max. R = 1 collapses to P_max.
pub fn mgf_levels_dbm(cfg: &NetworkConfig) -> Vec<f64> {
    if cfg.r == 1 {
        return vec![cfg.p_max_dbm];
    }
    let step = (cfg.p_max_dbm - cfg.p_min_dbm) / (cfg.r as f64 - 1.0);
    (0..cfg.r).map(|i| cfg.p_min_dbm + i as f64 * step).collect()
}

/// MGF-NOMA power assignment: UEs sorted by direct gain are split into
/// R contiguous groups (size <= K); higher-gain groups transmit at
/// higher dBm levels, the top group at P_max.
pub fn mgf_power_profile(ch: &ChannelSet, cfg: &NetworkConfig) -> PowerProfile {
    let levels = mgf_levels_dbm(cfg);
    let mut order: Vec<usize> = (0..ch.num_ues()).collect();
    order.sort_by(|&a, &b| {
        ch.direct_gain(b)
            .partial_cmp(&ch.direct_gain(a))
            .unwrap()
            .then(a.cmp(&b))
    });
    // contiguous groups, sizes as even as possible, none above K
    let r = cfg.r;
    let n = order.len();
    let base = n / r;
    let rem = n % r;
    let mut p = vec![0.0; n];
    let mut pos = 0usize;
    for gi in 0..r {
        let size = base + usize::from(gi < rem);
        let level_dbm = levels[r - 1 - gi];
        for &u in &order[pos..pos + size] {
            p[u] = dbm_to_watt(level_dbm);
        }
        pos += size;
    }
    PowerProfile { p }
}

/// Multi-level GF-NOMA sum rate: ladder powers, benchmark clustering.
pub fn mgf_noma_rate(ch: &ChannelSet, cfg: &NetworkConfig) -> RateReport {
    let k = cfg.u.div_ceil(cfg.r);
    let clusters = benchmark_clusters(ch, cfg.r, k);
    let powers = mgf_power_profile(ch, cfg);
    rates_with_powers(&clusters, &powers, ch, cfg)
}

/// Optimizes one cluster's continuous powers in [P_min, P_max] to
/// maximize the SIC sum rate subject to each member's QoS SINR floor.
///
/// The unconstrained sum rate is monotone increasing in every power, so
/// the search starts at all-P_max; when a member's floor is violated,
/// the powers of the members decoded after it (its interferers) are
/// scaled down, then every power is raised back to the largest value
/// the floors allow. Returns (powers, feasible).
pub fn optimize_cluster_powers(
    gains: &[f64],
    p_max: f64,
    p_min: f64,
    sigma2: f64,
    floor: f64,
) -> Result<(Vec<f64>, bool)> {
    let n = gains.len();
    if n > OPT_CLUSTER_LIMIT {
        return Err(Error::PowerSolverSize(n, OPT_CLUSTER_LIMIT));
    }
    let mut p = vec![p_max; n];
    let order_of = |p: &[f64]| {
        let mut o: Vec<usize> = (0..n).collect();
        o.sort_by(|&a, &b| {
            (p[b] * gains[b])
                .partial_cmp(&(p[a] * gains[a]))
                .unwrap()
                .then(a.cmp(&b))
        });
        o
    };
    for _sweep in 0..64 {
        let order = order_of(&p);
        let mut changed = false;
        // repair pass: shrink interferers of violated members
        for (pos, &i) in order.iter().enumerate() {
            let interference: f64 = order[pos + 1..].iter().map(|&j| p[j] * gains[j]).sum();
            let gamma = p[i] * gains[i] / (interference + sigma2);
            if gamma < floor * (1.0 - 1e-12) {
                let allowed = p[i] * gains[i] / floor - sigma2;
                if interference > 0.0 && allowed >= 0.0 {
                    let t = (allowed / interference).clamp(0.0, 1.0);
                    for &j in &order[pos + 1..] {
                        let shrunk = (p[j] * t).max(p_min);
                        if (shrunk - p[j]).abs() > 1e-15 {
                            p[j] = shrunk;
                            changed = true;
                        }
                    }
                }
            }
        }
        // raise pass: push each power to the largest value every
        // earlier-decoded member's floor still allows
        let order = order_of(&p);
        for pos in (0..n).rev() {
            let i = order[pos];
            let mut cap = p_max;
            for epos in 0..pos {
                let e = order[epos];
                let interference: f64 = order[epos + 1..]
                    .iter()
                    .map(|&j| p[j] * gains[j])
                    .sum();
                let slack = p[e] * gains[e] / floor - sigma2 - interference;
                cap = cap.min(p[i] + slack / gains[i]);
            }
            let raised = cap.clamp(p_min, p_max);
            if (raised - p[i]).abs() > 1e-15 * p_max {
                p[i] = raised;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    // feasibility at the converged point
    let order = order_of(&p);
    let mut feasible = true;
    for (pos, &i) in order.iter().enumerate() {
        let interference: f64 = order[pos + 1..].iter().map(|&j| p[j] * gains[j]).sum();
        if p[i] * gains[i] / (interference + sigma2) < floor * (1.0 - 1e-9) {
            feasible = false;
        }
    }
    Ok((p, feasible))
}

/// OPT PD-NOMA: per-cluster optimal continuous powers. Also returns the
/// number of clusters whose QoS floors are unsatisfiable.
pub fn opt_pdnoma_rate(
    clusters: &[Vec<usize>],
    ch: &ChannelSet,
    cfg: &NetworkConfig,
) -> Result<(RateReport, usize)> {
    let sigma2 = cfg.noise_watt();
    let floor = cfg.qos_sinr_floor();
    let p_max = dbm_to_watt(cfg.p_max_dbm);
    let p_min = dbm_to_watt(cfg.p_min_dbm);
    let mut powers = PowerProfile {
        p: vec![p_max; ch.num_ues()],
    };
    let mut infeasible = 0usize;
    for members in clusters {
        if members.is_empty() {
            continue;
        }
        let gains: Vec<f64> = members.iter().map(|&u| ch.direct_gain(u)).collect();
        let (p, feasible) = optimize_cluster_powers(&gains, p_max, p_min, sigma2, floor)?;
        if !feasible {
            infeasible += 1;
        }
        for (&u, &pw) in members.iter().zip(&p) {
            powers.p[u] = pw;
        }
    }
    Ok((rates_with_powers(clusters, &powers, ch, cfg), infeasible))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn direct_only(gains: &[f64]) -> ChannelSet {
        ChannelSet {
            h: vec![vec![vec![Complex64::new(1.0, 0.0)]]; gains.len()],
            g: vec![vec![Complex64::new(1.0, 0.0)]],
            f: gains.iter().map(|&x| Complex64::new(x.sqrt(), 0.0)).collect(),
        }
    }

    #[test]
    fn round_robin_deal() {
        let ch = direct_only(&[8.0, 6.0, 4.0, 2.0]);
        let clusters = benchmark_clusters(&ch, 2, 2);
        assert_eq!(clusters, vec![vec![0, 2], vec![1, 3]]);
    }

    #[test]
    fn singletons_when_u_equals_r() {
        let ch = direct_only(&[1.0, 2.0, 3.0]);
        let clusters = benchmark_clusters(&ch, 3, 1);
        assert!(clusters.iter().all(|c| c.len() == 1));
    }

    #[test]
    fn sgf_single_ue() {
        let cfg = NetworkConfig {
            u: 1,
            r: 1,
            ..Default::default()
        };
        // pick |f|^2 so that p_id |f|^2 / sigma^2 = 3
        let gain = 3.0 * cfg.noise_watt() / cfg.p_id_watt();
        let ch = direct_only(&[gain]);
        let rep = sgf_noma_rate(&[vec![0]], &ch, &cfg);
        assert!((rep.sum_rate_bps - 2.0 * cfg.w_hz).abs() / cfg.w_hz < 1e-9);
    }

    #[test]
    fn sgf_two_ue_telescopes() {
        let cfg = NetworkConfig {
            u: 2,
            r: 1,
            ..Default::default()
        };
        let sigma2 = cfg.noise_watt();
        let p = cfg.p_id_watt();
        let ch = direct_only(&[2e-12, 7e-13]);
        let rep = sgf_noma_rate(&[vec![0, 1]], &ch, &cfg);
        let closed = cfg.w_hz * (1.0 + p * (2e-12 + 7e-13) / sigma2).log2();
        assert!((rep.sum_rate_bps - closed).abs() / closed < 1e-9);
    }

    #[test]
    fn mgf_levels_endpoints() {
        let cfg = NetworkConfig {
            u: 4,
            r: 2,
            ..Default::default()
        };
        assert_eq!(mgf_levels_dbm(&cfg), vec![-40.0, 23.0]);
        let cfg = NetworkConfig::default();
        let levels = mgf_levels_dbm(&cfg);
        assert_eq!(levels.len(), 25);
        let step = 63.0 / 24.0;
        for (i, l) in levels.iter().enumerate() {
            assert!((l - (-40.0 + i as f64 * step)).abs() < 1e-12);
        }
    }

    #[test]
    fn mgf_power_monotone_in_gain() {
        let cfg = NetworkConfig {
            u: 6,
            r: 3,
            ..Default::default()
        };
        let ch = direct_only(&[6.0, 5.0, 4.0, 3.0, 2.0, 1.0]);
        let prof = mgf_power_profile(&ch, &cfg);
        for w in prof.p.windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!((prof.p[0] - dbm_to_watt(23.0)).abs() < 1e-15);
        assert!((prof.p[5] - dbm_to_watt(-40.0)).abs() < 1e-15);
    }

    #[test]
    fn mgf_degenerate_equal_gains() {
        let cfg = NetworkConfig {
            u: 4,
            r: 2,
            ..Default::default()
        };
        let ch = direct_only(&[1.0; 4]);
        let rep = mgf_noma_rate(&ch, &cfg);
        assert!(rep.sum_rate_bps.is_finite());
    }

    #[test]
    fn opt_single_ue_uses_p_max() {
        let cfg = NetworkConfig::default();
        let sigma2 = cfg.noise_watt();
        let (p, feasible) =
            optimize_cluster_powers(&[1e-10], dbm_to_watt(23.0), dbm_to_watt(-40.0), sigma2, cfg.qos_sinr_floor())
                .unwrap();
        assert!(feasible);
        assert!((p[0] - dbm_to_watt(23.0)).abs() < 1e-12);
    }

    #[test]
    fn opt_slack_floors_stay_at_p_max() {
        let cfg = NetworkConfig::default();
        let sigma2 = cfg.noise_watt();
        // enormous gains: floors trivially slack
        let (p, feasible) = optimize_cluster_powers(
            &[1e-6, 1e-7],
            dbm_to_watt(23.0),
            dbm_to_watt(-40.0),
            sigma2,
            1e-6,
        )
        .unwrap();
        assert!(feasible);
        for pw in &p {
            assert!((pw - dbm_to_watt(23.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn opt_rejects_oversized_cluster() {
        let cfg = NetworkConfig::default();
        let gains = vec![1e-10; 7];
        assert!(matches!(
            optimize_cluster_powers(&gains, 1.0, 1e-7, cfg.noise_watt(), 0.5),
            Err(crate::Error::PowerSolverSize(7, _))
        ));
    }

    #[test]
    fn opt_dominates_sgf_when_floors_slack() {
        let cfg = NetworkConfig::default();
        let ch = direct_only(&[5e-9, 1e-9, 5e-10, 1e-10]);
        let cfg = NetworkConfig {
            u: 4,
            r: 2,
            q_u_bps: 1.0, // floors essentially slack
            ..cfg
        };
        let clusters = benchmark_clusters(&ch, 2, 2);
        let (opt, _) = opt_pdnoma_rate(&clusters, &ch, &cfg).unwrap();
        let sgf = sgf_noma_rate(&clusters, &ch, &cfg);
        assert!(opt.sum_rate_bps >= sgf.sum_rate_bps - 1e-6);
    }

    #[test]
    fn benchmarks_ignore_ris_channels() {
        let cfg = NetworkConfig {
            u: 4,
            r: 2,
            ..Default::default()
        };
        let ch = direct_only(&[4e-12, 3e-12, 2e-12, 1e-12]);
        let mut perturbed = ch.clone();
        for per_block in &mut perturbed.h {
            for v in per_block.iter_mut() {
                for c in v.iter_mut() {
                    *c = Complex64::new(42.0, -7.0);
                }
            }
        }
        let clusters = benchmark_clusters(&ch, 2, 2);
        assert_eq!(
            sgf_noma_rate(&clusters, &ch, &cfg).sum_rate_bps,
            sgf_noma_rate(&clusters, &perturbed, &cfg).sum_rate_bps
        );
        assert_eq!(
            mgf_noma_rate(&ch, &cfg).sum_rate_bps,
            mgf_noma_rate(&perturbed, &cfg).sum_rate_bps
        );
    }
}
