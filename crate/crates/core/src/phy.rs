//! Physical-layer math: RIS phase alignment, received power, SIC
//! ordering, SINR and cluster rate computation.
//!
//! Clusters occupy orthogonal RBs, so interference is intra-cluster
//! only. For a fixed SIC order the i-th decoded member sees the
//! effective received powers of every later-decoded member as
//! interference, which makes both the full and the simplified SINR share
//! one structure: gamma_i = P_i / (sum_{j>i} P_j + sigma^2). The two
//! variants differ only in how the effective power P is built (all
//! configured blocks vs. the cluster's own block).

use num_complex::Complex64;

use crate::channel::ChannelSet;
use crate::{Error, Result};

/// Unit-modulus phase shifts of one RIS block.
#[derive(Debug, Clone)]
pub struct PhaseVector {
    pub phases: Vec<Complex64>,
    /// Elements whose phase was undefined (zero-magnitude coefficient)
    /// and substituted with phase 0.
    pub degenerate: usize,
}

fn angle_or_zero(c: Complex64, degenerate: &mut usize) -> f64 {
    if c.norm() == 0.0 {
        *degenerate += 1;
        0.0
    } else {
        c.arg()
    }
}

/// Configures a block's phases for UE m: phi_n = exp(j ang f_m) *
/// exp(-j ang g_n) * exp(-j ang h_n), co-phasing the cascade with the
/// direct link.
pub fn align_phases(f_m: Complex64, g: &[Complex64], h: &[Complex64]) -> PhaseVector {
    assert_eq!(g.len(), h.len(), "g and h must have equal length");
    let mut degenerate = 0usize;
    let ang_f = angle_or_zero(f_m, &mut degenerate);
    let phases = g
        .iter()
        .zip(h)
        .map(|(gn, hn)| {
            let a = ang_f - angle_or_zero(*gn, &mut degenerate) - angle_or_zero(*hn, &mut degenerate);
            Complex64::from_polar(1.0, a)
        })
        .collect();
    PhaseVector { phases, degenerate }
}

/// Cascaded gain g^T Phi h through a configured block.
pub fn cascade_gain(g: &[Complex64], phi: &PhaseVector, h: &[Complex64]) -> Complex64 {
    g.iter()
        .zip(&phi.phases)
        .zip(h)
        .map(|((gn, pn), hn)| gn * pn * hn)
        .sum()
}

/// Effective received power of UE u at the BS: p_id * (|g^T Phi h|^2 +
/// |f|^2) with an assigned block, p_id * |f|^2 without. With
/// `coherent`, the two paths add in amplitude instead.
pub fn received_power(
    ch: &ChannelSet,
    u: usize,
    block: Option<(usize, &PhaseVector)>,
    p_id: f64,
    coherent: bool,
) -> f64 {
    let direct = ch.f[u];
    match block {
        None => p_id * direct.norm_sqr(),
        Some((b, phi)) => {
            let casc = cascade_gain(&ch.g[b], phi, &ch.h[u][b]);
            if coherent {
                p_id * (casc + direct).norm_sqr()
            } else {
                p_id * (casc.norm_sqr() + direct.norm_sqr())
            }
        }
    }
}

/// SIC decoding order: strongest received power first, ties broken by
/// ascending UE index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SicOrder {
    pub ordered_ues: Vec<usize>,
}

/// Orders `members` (with matching `powers`) for SIC decoding.
pub fn sic_order(members: &[usize], powers: &[f64]) -> SicOrder {
    assert_eq!(members.len(), powers.len());
    let mut idx: Vec<usize> = (0..members.len()).collect();
    idx.sort_by(|&a, &b| {
        powers[b]
            .partial_cmp(&powers[a])
            .unwrap()
            .then(members[a].cmp(&members[b]))
    });
    SicOrder {
        ordered_ues: idx.iter().map(|&i| members[i]).collect(),
    }
}

/// SINRs for effective powers already in SIC order: the i-th entry is
/// P_i / (sum of later powers + sigma^2).
pub fn sic_sinrs(powers_in_order: &[f64], sigma2: f64) -> Vec<f64> {
    let mut suffix = 0.0;
    let mut out = vec![0.0; powers_in_order.len()];
    for i in (0..powers_in_order.len()).rev() {
        out[i] = powers_in_order[i] / (suffix + sigma2);
        suffix += powers_in_order[i];
    }
    out
}

/// Sum of W log2(1 + gamma) over SINRs.
pub fn sum_rate(sinrs: &[f64], w: f64) -> f64 {
    sinrs.iter().map(|g| w * g.ln_1p() / std::f64::consts::LN_2).sum()
}

/// Network-level rate evaluation: total sum rate plus the per-UE SINRs
/// it was computed from.
#[derive(Debug, Clone)]
pub struct RateReport {
    pub sum_rate_bps: f64,
    /// Indexed by UE; 0 for UEs outside any cluster.
    pub sinr: Vec<f64>,
}

/// One RIS block configured for a cluster: which block and which member
/// its phases are aligned to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockAlignment {
    pub block: usize,
    pub aligned_ue: usize,
}

/// Effective powers for a cluster under the simplified SINR model
/// (only the cluster's own block), in member order.
pub fn effective_powers_simplified(
    ch: &ChannelSet,
    members: &[usize],
    alignment: Option<BlockAlignment>,
    p_id: f64,
    coherent: bool,
) -> Vec<f64> {
    let phi = alignment.map(|a| {
        (
            a.block,
            align_phases(ch.f[a.aligned_ue], &ch.g[a.block], &ch.h[a.aligned_ue][a.block]),
        )
    });
    members
        .iter()
        .map(|&u| received_power(ch, u, phi.as_ref().map(|(b, p)| (*b, p)), p_id, coherent))
        .collect()
}

/// Full-model SINRs of a cluster's members (in member order), counting
/// reflections from every configured block in the network.
pub fn sinr_full(
    ch: &ChannelSet,
    members: &[usize],
    all_alignments: &[BlockAlignment],
    p_id: f64,
    sigma2: f64,
    coherent: bool,
) -> Result<Vec<f64>> {
    if members.is_empty() {
        return Err(Error::Domain("empty cluster".into()));
    }
    let phis: Vec<(usize, PhaseVector)> = all_alignments
        .iter()
        .map(|a| {
            (
                a.block,
                align_phases(ch.f[a.aligned_ue], &ch.g[a.block], &ch.h[a.aligned_ue][a.block]),
            )
        })
        .collect();
    let powers: Vec<f64> = members
        .iter()
        .map(|&u| {
            if coherent {
                let total: Complex64 = phis
                    .iter()
                    .map(|(b, phi)| cascade_gain(&ch.g[*b], phi, &ch.h[u][*b]))
                    .sum::<Complex64>()
                    + ch.f[u];
                p_id * total.norm_sqr()
            } else {
                let casc: f64 = phis
                    .iter()
                    .map(|(b, phi)| cascade_gain(&ch.g[*b], phi, &ch.h[u][*b]).norm_sqr())
                    .sum();
                p_id * (casc + ch.f[u].norm_sqr())
            }
        })
        .collect();
    Ok(sinrs_in_member_order(members, &powers, sigma2))
}

/// Simplified SINRs of a cluster's members (in member order), counting
/// only the cluster's own block.
pub fn sinr_simplified(
    ch: &ChannelSet,
    members: &[usize],
    alignment: Option<BlockAlignment>,
    p_id: f64,
    sigma2: f64,
    coherent: bool,
) -> Result<Vec<f64>> {
    if members.is_empty() {
        return Err(Error::Domain("empty cluster".into()));
    }
    let powers = effective_powers_simplified(ch, members, alignment, p_id, coherent);
    Ok(sinrs_in_member_order(members, &powers, sigma2))
}

/// Sorts powers into SIC order, computes SINRs, and maps them back to
/// member order.
pub fn sinrs_in_member_order(members: &[usize], powers: &[f64], sigma2: f64) -> Vec<f64> {
    let order = sic_order(members, powers);
    let pos_of: std::collections::HashMap<usize, usize> = members
        .iter()
        .enumerate()
        .map(|(i, &u)| (u, i))
        .collect();
    let ordered_powers: Vec<f64> = order.ordered_ues.iter().map(|u| powers[pos_of[u]]).collect();
    let ordered_sinrs = sic_sinrs(&ordered_powers, sigma2);
    let mut out = vec![0.0; members.len()];
    for (rank, u) in order.ordered_ues.iter().enumerate() {
        out[pos_of[u]] = ordered_sinrs[rank];
    }
    out
}

/// Cluster sum rate under the simplified model with block `alignment`
/// (or none for an RIS-less cluster).
pub fn cluster_sum_rate(
    ch: &ChannelSet,
    members: &[usize],
    alignment: Option<BlockAlignment>,
    p_id: f64,
    sigma2: f64,
    w: f64,
    coherent: bool,
) -> f64 {
    if members.is_empty() {
        return 0.0;
    }
    let sinrs = sinr_simplified(ch, members, alignment, p_id, sigma2, coherent).unwrap();
    sum_rate(&sinrs, w)
}

/// Precomputed cascade gains c[b][j][u] = e^{j ang f_j} sum_n |g_b^n|
/// e^{-j ang h_{j,b}^n} h_{u,b}^n: the gain UE u sees through block b
/// when the block is aligned to UE j. Equal to
/// `cascade_gain(g_b, align_phases(f_j, g_b, h_j), h_u)`.
#[derive(Debug, Clone)]
pub struct CascadeTable {
    blocks: usize,
    ues: usize,
    data: Vec<Complex64>,
}

impl CascadeTable {
    pub fn build(ch: &ChannelSet) -> Self {
        let blocks = ch.num_blocks();
        let ues = ch.num_ues();
        let mut data = vec![Complex64::new(0.0, 0.0); blocks * ues * ues];
        let mut weights = Vec::new();
        for b in 0..blocks {
            let gmag: Vec<f64> = ch.g[b].iter().map(|c| c.norm()).collect();
            for j in 0..ues {
                weights.clear();
                weights.extend(
                    gmag.iter()
                        .zip(&ch.h[j][b])
                        .map(|(gm, hn)| {
                            let ang = if hn.norm() == 0.0 { 0.0 } else { hn.arg() };
                            Complex64::from_polar(*gm, -ang)
                        }),
                );
                let f_ang = if ch.f[j].norm() == 0.0 { 0.0 } else { ch.f[j].arg() };
                let ph_f = Complex64::from_polar(1.0, f_ang);
                for u in 0..ues {
                    let dot: Complex64 = weights
                        .iter()
                        .zip(&ch.h[u][b])
                        .map(|(wn, hn)| wn * hn)
                        .sum();
                    data[(b * ues + j) * ues + u] = ph_f * dot;
                }
            }
        }
        Self { blocks, ues, data }
    }

    /// Cascade gain through block `b` aligned to UE `j`, seen by UE `u`.
    pub fn gain(&self, b: usize, j: usize, u: usize) -> Complex64 {
        debug_assert!(b < self.blocks && j < self.ues && u < self.ues);
        self.data[(b * self.ues + j) * self.ues + u]
    }

    /// |gain|^2 convenience accessor.
    pub fn power(&self, b: usize, j: usize, u: usize) -> f64 {
        self.gain(b, j, u).norm_sqr()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_link, LinkStats, LosPhasor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        let stats = LinkStats {
            pathloss_linear: 1.0,
            rician_k: 0.0,
            is_los: false,
        };
        draw_link(&stats, &LosPhasor::default(), n, rng)
    }

    #[test]
    fn align_cancels_phases() {
        let f = Complex64::new(1.0, 0.0);
        let g = [Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_2)];
        let h = [Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_2)];
        let phi = align_phases(f, &g, &h);
        assert!((phi.phases[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let c = cascade_gain(&g, &phi, &h);
        assert!((c - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn align_identity_case() {
        let f = Complex64::new(2.0, 0.0);
        let g = vec![Complex64::new(3.0, 0.0); 4];
        let h = vec![Complex64::new(0.5, 0.0); 4];
        let phi = align_phases(f, &g, &h);
        for p in &phi.phases {
            assert!((p - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn aligned_cascade_is_coherent_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..100 {
            let g = random_vec(8, &mut rng);
            let h = random_vec(8, &mut rng);
            let f = random_vec(1, &mut rng)[0];
            let phi = align_phases(f, &g, &h);
            let c = cascade_gain(&g, &phi, &h);
            let direct: f64 = g.iter().zip(&h).map(|(a, b)| a.norm() * b.norm()).sum();
            assert!((c.norm() - direct).abs() / direct < 1e-12);
            // cascade co-phased with the direct link
            assert!((c.arg() - f.arg()).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_magnitude_coefficient_is_counted() {
        let f = Complex64::new(1.0, 0.0);
        let g = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        let h = [Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)];
        let phi = align_phases(f, &g, &h);
        assert_eq!(phi.degenerate, 1);
        assert!((phi.phases[0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn received_power_example() {
        // g = [2 e^{j t}], h = [3 e^{-j t}], phi = [1], f = 2, p = 1
        let t = 0.7;
        let ch = ChannelSet {
            h: vec![vec![vec![Complex64::from_polar(3.0, -t)]]],
            g: vec![vec![Complex64::from_polar(2.0, t)]],
            f: vec![Complex64::new(2.0, 0.0)],
        };
        let phi = PhaseVector {
            phases: vec![Complex64::new(1.0, 0.0)],
            degenerate: 0,
        };
        let p = received_power(&ch, 0, Some((0, &phi)), 1.0, false);
        assert!((p - 40.0).abs() < 1e-12);
        let p = received_power(&ch, 0, None, 1.0, false);
        assert!((p - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sic_order_examples() {
        assert_eq!(sic_order(&[1, 2], &[3.0, 5.0]).ordered_ues, vec![2, 1]);
        assert_eq!(sic_order(&[1, 2], &[2.0, 2.0]).ordered_ues, vec![1, 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let powers: Vec<f64> = (0..5).map(|_| rng.gen::<f64>()).collect();
            let members = [10, 11, 12, 13, 14];
            let got = sic_order(&members, &powers).ordered_ues;
            let mut expect: Vec<usize> = (0..5).collect();
            expect.sort_by(|&a, &b| powers[b].partial_cmp(&powers[a]).unwrap());
            let expect: Vec<usize> = expect.iter().map(|&i| members[i]).collect();
            assert_eq!(got, expect);
        }
    }

    #[test]
    fn sinr_two_member_no_ris() {
        // hand evaluation: gamma_1 = P1/(P2 + s), gamma_2 = P2/s
        let sigma2 = 0.5;
        let powers = [4.0, 1.0];
        let sinrs = sic_sinrs(&powers, sigma2);
        assert!((sinrs[0] - 4.0 / 1.5).abs() < 1e-12);
        assert!((sinrs[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn last_decoded_denominator_is_noise_only() {
        let sinrs = sic_sinrs(&[9.0, 4.0, 1.0], 0.25);
        assert!((sinrs[2] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn telescoping_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = 180e3;
        for _ in 0..200 {
            let n = rng.gen_range(1..=4);
            let mut powers: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 10.0).collect();
            powers.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let sigma2 = rng.gen::<f64>() + 0.01;
            let rate = sum_rate(&sic_sinrs(&powers, sigma2), w);
            let total: f64 = powers.iter().sum();
            let closed = w * (1.0 + total / sigma2).log2();
            assert!((rate - closed).abs() / closed < 1e-9);
        }
    }

    #[test]
    fn alignment_beats_random_phases() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = random_vec(64, &mut rng);
        let h = random_vec(64, &mut rng);
        let f = random_vec(1, &mut rng)[0];
        let aligned = cascade_gain(&g, &align_phases(f, &g, &h), &h).norm();
        for _ in 0..1000 {
            let phi = PhaseVector {
                phases: (0..64)
                    .map(|_| Complex64::from_polar(1.0, rng.gen::<f64>() * std::f64::consts::TAU))
                    .collect(),
                degenerate: 0,
            };
            assert!(cascade_gain(&g, &phi, &h).norm() <= aligned + 1e-9);
        }
    }

    #[test]
    fn full_reduces_to_simplified_without_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let ch = ChannelSet {
            h: vec![vec![random_vec(4, &mut rng)]; 3],
            g: vec![random_vec(4, &mut rng)],
            f: random_vec(3, &mut rng),
        };
        let members = [0, 1, 2];
        let full = sinr_full(&ch, &members, &[], 1.0, 0.1, false).unwrap();
        let simp = sinr_simplified(&ch, &members, None, 1.0, 0.1, false).unwrap();
        for (a, b) in full.iter().zip(&simp) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_member_no_ris_is_snr() {
        let ch = ChannelSet {
            h: vec![vec![vec![Complex64::new(0.0, 0.0)]]],
            g: vec![vec![Complex64::new(0.0, 0.0)]],
            f: vec![Complex64::new(2.0, 0.0)],
        };
        let s = sinr_full(&ch, &[0], &[], 1.0, 0.5, false).unwrap();
        assert!((s[0] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn empty_cluster_rejected() {
        let ch = ChannelSet {
            h: vec![],
            g: vec![],
            f: vec![],
        };
        assert!(sinr_full(&ch, &[], &[], 1.0, 0.5, false).is_err());
    }

    #[test]
    fn cluster_rate_log2_example() {
        // single UE, p|f|^2 / sigma^2 = 1 -> rate = W
        let ch = ChannelSet {
            h: vec![vec![vec![Complex64::new(0.0, 0.0)]]],
            g: vec![vec![Complex64::new(0.0, 0.0)]],
            f: vec![Complex64::new(1.0, 0.0)],
        };
        let rate = cluster_sum_rate(&ch, &[0], None, 1.0, 1.0, 180e3, false);
        assert!((rate - 180e3).abs() < 1e-6);
    }

    #[test]
    fn cluster_rate_invariant_under_relabeling() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let ch = ChannelSet {
            h: vec![vec![random_vec(8, &mut rng)], vec![random_vec(8, &mut rng)], vec![random_vec(8, &mut rng)]],
            g: vec![random_vec(8, &mut rng)],
            f: random_vec(3, &mut rng),
        };
        let align = Some(BlockAlignment {
            block: 0,
            aligned_ue: 1,
        });
        let a = cluster_sum_rate(&ch, &[0, 1, 2], align, 1.0, 1e-3, 180e3, false);
        let b = cluster_sum_rate(&ch, &[2, 0, 1], align, 1.0, 1e-3, 180e3, false);
        assert!((a - b).abs() / a < 1e-12);
    }

    #[test]
    fn cascade_table_matches_direct_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let ch = ChannelSet {
            h: (0..3)
                .map(|_| (0..2).map(|_| random_vec(16, &mut rng)).collect())
                .collect(),
            g: (0..2).map(|_| random_vec(16, &mut rng)).collect(),
            f: random_vec(3, &mut rng),
        };
        let table = CascadeTable::build(&ch);
        for b in 0..2 {
            for j in 0..3 {
                let phi = align_phases(ch.f[j], &ch.g[b], &ch.h[j][b]);
                for u in 0..3 {
                    let direct = cascade_gain(&ch.g[b], &phi, &ch.h[u][b]);
                    assert!((table.gain(b, j, u) - direct).norm() < 1e-12);
                }
            }
        }
    }
}
