//! Joint UE clustering and RIS assignment: cluster initialization from
//! SRS received signal strength, iterative admission via the cost
//! tensor + 3D axial assignment, and the P1 constraint checker.

use crate::assignment::{self, Assignment3D, CostTensor, MASKED};
use crate::channel::ChannelSet;
use crate::phy::{self, BlockAlignment, CascadeTable};
use crate::topology::{derive_structure, NetworkConfig};
use crate::{Error, Result};

/// One configured RIS block: the cluster it assists and the member its
/// phases are aligned to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RisAssignment {
    pub cluster: usize,
    pub block: usize,
    pub aligned_ue: usize,
}

/// Clustering matrix X and RIS assignment tensor Delta in compact form.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    /// Ordered member lists, one per cluster.
    pub clusters: Vec<Vec<usize>>,
    /// Cluster index of each UE, if admitted.
    pub cluster_of: Vec<Option<usize>>,
    /// Configured blocks; at most one per cluster in a valid state.
    pub assignments: Vec<RisAssignment>,
}

impl ClusterState {
    fn new(num_clusters: usize, num_ues: usize) -> Self {
        Self {
            clusters: vec![Vec::new(); num_clusters],
            cluster_of: vec![None; num_ues],
            assignments: Vec::new(),
        }
    }

    fn admit(&mut self, ue: usize, cluster: usize) {
        debug_assert!(self.cluster_of[ue].is_none());
        self.clusters[cluster].push(ue);
        self.cluster_of[ue] = Some(cluster);
    }

    /// Block alignments as phy-level descriptors, cluster-indexed.
    pub fn alignment_of(&self, cluster: usize) -> Option<BlockAlignment> {
        self.assignments
            .iter()
            .find(|a| a.cluster == cluster)
            .map(|a| BlockAlignment {
                block: a.block,
                aligned_ue: a.aligned_ue,
            })
    }

    fn all_alignments(&self) -> Vec<BlockAlignment> {
        self.assignments
            .iter()
            .map(|a| BlockAlignment {
                block: a.block,
                aligned_ue: a.aligned_ue,
            })
            .collect()
    }
}

/// Per-constraint outcome of the P1 feasibility check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstraintReport {
    /// Each UE in exactly one cluster.
    pub c2: bool,
    /// Cluster sizes bounded by K.
    pub c3: bool,
    /// Every alignment targets a member of its cluster.
    pub c4: bool,
    /// At most one block per cluster.
    pub c5: bool,
    /// Total assignments bounded by B.
    pub c6: bool,
    /// Indicator entries consistent (no block assigned twice).
    pub c7: bool,
}

impl ConstraintReport {
    pub fn all(&self) -> bool {
        self.c2 && self.c3 && self.c4 && self.c5 && self.c6 && self.c7
    }
}

/// Checks structural constraints C2-C7 on a cluster state.
pub fn check_constraints(state: &ClusterState, cfg: &NetworkConfig) -> ConstraintReport {
    let s = derive_structure(cfg).expect("validated config");
    let mut membership = vec![0usize; cfg.u];
    for members in &state.clusters {
        for &u in members {
            membership[u] += 1;
        }
    }
    let c2 = membership.iter().all(|&m| m == 1);
    let c3 = state.clusters.iter().all(|c| c.len() <= s.max_cluster_size);
    let c4 = state
        .assignments
        .iter()
        .all(|a| state.clusters[a.cluster].contains(&a.aligned_ue));
    let mut per_cluster = vec![0usize; state.clusters.len()];
    let mut per_block = std::collections::HashMap::new();
    for a in &state.assignments {
        per_cluster[a.cluster] += 1;
        *per_block.entry(a.block).or_insert(0usize) += 1;
    }
    let c5 = per_cluster.iter().all(|&n| n <= 1);
    let c6 = state.assignments.len() <= s.blocks;
    let c7 = per_block.values().all(|&n| n <= 1)
        && state.assignments.iter().all(|a| a.block < s.blocks);
    ConstraintReport {
        c2,
        c3,
        c4,
        c5,
        c6,
        c7,
    }
}

/// QoS (C1) evaluation: per-UE SINR against the floor 2^(q_u/W) - 1.
/// Reported, never enforced.
#[derive(Debug, Clone)]
pub struct QosReport {
    pub sinr_floor: f64,
    /// Per-UE SINR under the full model.
    pub sinr: Vec<f64>,
    pub satisfied: Vec<bool>,
    pub violations: usize,
}

impl QosReport {
    pub fn from_sinrs(sinr: Vec<f64>, floor: f64) -> Self {
        let satisfied: Vec<bool> = sinr.iter().map(|&g| g >= floor).collect();
        let violations = satisfied.iter().filter(|s| !**s).count();
        Self {
            sinr_floor: floor,
            sinr,
            satisfied,
            violations,
        }
    }
}

/// Solver diagnostics collected while running the algorithm.
#[derive(Debug, Clone, Default)]
pub struct SchedulerStats {
    /// heuristic value / exact value, for iterations small enough to
    /// solve exactly.
    pub solver_gaps: Vec<f64>,
    /// Mean ratio of cross-block residual power to own signal power in
    /// the final full-model evaluation.
    pub cross_block_residual: f64,
}

/// SRS received signal strength: direct-link power only, since sounding
/// precedes any RIS assignment.
pub fn srs_rss(ch: &ChannelSet, cfg: &NetworkConfig) -> Vec<f64> {
    (0..ch.num_ues())
        .map(|u| cfg.p_id_watt() * ch.direct_gain(u))
        .collect()
}

/// UE indices sorted by descending RSS, ties broken by ascending index.
fn rss_order(ch: &ChannelSet, cfg: &NetworkConfig) -> Vec<usize> {
    let rss = srs_rss(ch, cfg);
    let mut order: Vec<usize> = (0..ch.num_ues()).collect();
    order.sort_by(|&a, &b| rss[b].partial_cmp(&rss[a]).unwrap().then(a.cmp(&b)));
    order
}

/// Seeds the R clusters with the R strongest UEs, one each.
pub fn initialize_clusters(ch: &ChannelSet, cfg: &NetworkConfig) -> Result<ClusterState> {
    cfg.validate()?;
    if ch.num_ues() < cfg.r {
        return Err(Error::InvalidConfig(format!(
            "need at least R = {} UEs, got {}",
            cfg.r,
            ch.num_ues()
        )));
    }
    let order = rss_order(ch, cfg);
    let mut state = ClusterState::new(cfg.r, ch.num_ues());
    for (r, &u) in order.iter().take(cfg.r).enumerate() {
        state.admit(u, r);
    }
    Ok(state)
}

/// Builds the cost tensor Q (R x A x B) and iota for one admission
/// iteration: every (cluster, awaiting UE, block) cell holds the best
/// cluster sum rate over alignment targets of the temporary cluster.
/// Clusters already at capacity are masked.
pub fn build_cost_matrix(
    state: &ClusterState,
    awaiting: &[usize],
    table: &CascadeTable,
    ch: &ChannelSet,
    cfg: &NetworkConfig,
) -> CostTensor {
    let s = derive_structure(cfg).expect("validated config");
    let p = cfg.p_id_watt();
    let sigma2 = cfg.noise_watt();
    let mut t = CostTensor::zeros(cfg.r, awaiting.len(), s.blocks);
    let mut members = Vec::new();
    let mut powers = Vec::new();
    for r in 0..cfg.r {
        let full = state.clusters[r].len() >= s.max_cluster_size;
        for (ui, &w) in awaiting.iter().enumerate() {
            if full {
                for b in 0..s.blocks {
                    t.set(r, ui, b, MASKED, 0);
                }
                continue;
            }
            members.clear();
            members.extend_from_slice(&state.clusters[r]);
            members.push(w);
            for b in 0..s.blocks {
                let mut best_rate = f64::NEG_INFINITY;
                let mut best_j = members[0];
                for &j in &members {
                    powers.clear();
                    powers.extend(members.iter().map(|&x| {
                        if cfg.coherent_combining {
                            p * (table.gain(b, j, x) + ch.f[x]).norm_sqr()
                        } else {
                            p * (table.power(b, j, x) + ch.direct_gain(x))
                        }
                    }));
                    let sinrs = phy::sinrs_in_member_order(&members, &powers, sigma2);
                    let rate = phy::sum_rate(&sinrs, cfg.w_hz);
                    if rate > best_rate {
                        best_rate = rate;
                        best_j = j;
                    }
                }
                t.set(r, ui, b, best_rate, best_j);
            }
        }
    }
    t
}

fn apply_assignment(
    state: &mut ClusterState,
    tensor: &CostTensor,
    result: &Assignment3D,
    awaiting: &[usize],
) {
    // Delta overwrite semantics: every iteration re-solves the block
    // assignment for all clusters and blocks.
    state.assignments.clear();
    for &(r, ui, b) in &result.triples {
        let cost = tensor.cost(r, ui, b);
        assert!(cost > MASKED / 2.0, "masked cell selected by the solver");
        let ue = awaiting[ui];
        state.admit(ue, r);
        state.assignments.push(RisAssignment {
            cluster: r,
            block: b,
            aligned_ue: tensor.iota(r, ui, b),
        });
    }
}

/// Runs a 3D-AA pass, collecting the heuristic/exact gap when the exact
/// solver applies.
fn solve_tensor(tensor: &CostTensor, stats: &mut SchedulerStats) -> Assignment3D {
    if tensor.max_dim() <= assignment::EXACT_SIZE_LIMIT {
        let exact = assignment::solve_exact(tensor).expect("size checked");
        let heur = assignment::solve_heuristic(tensor);
        if exact.value.abs() > 1e-12 {
            stats.solver_gaps.push(heur.value / exact.value);
        }
        exact
    } else {
        assignment::solve_heuristic(tensor)
    }
}

/// Block assignment pass for the K = 1 boundary case: the admission
/// loop never runs, so without this no RIS would ever be configured.
/// Costs are restricted to each cluster's own seed via masking, making
/// the pass a plain block-to-cluster matching expressed as a 3D-AA.
fn assign_blocks_to_singletons(
    state: &mut ClusterState,
    table: &CascadeTable,
    ch: &ChannelSet,
    cfg: &NetworkConfig,
    stats: &mut SchedulerStats,
) {
    let s = derive_structure(cfg).expect("validated config");
    let p = cfg.p_id_watt();
    let sigma2 = cfg.noise_watt();
    let seeds: Vec<usize> = state.clusters.iter().map(|c| c[0]).collect();
    let mut t = CostTensor::zeros(cfg.r, cfg.r, s.blocks);
    for r in 0..cfg.r {
        for ui in 0..cfg.r {
            for b in 0..s.blocks {
                if ui != r {
                    t.set(r, ui, b, MASKED, 0);
                    continue;
                }
                let members = &state.clusters[r];
                let mut best_rate = f64::NEG_INFINITY;
                let mut best_j = members[0];
                for &j in members {
                    let powers: Vec<f64> = members
                        .iter()
                        .map(|&x| {
                            if cfg.coherent_combining {
                                p * (table.gain(b, j, x) + ch.f[x]).norm_sqr()
                            } else {
                                p * (table.power(b, j, x) + ch.direct_gain(x))
                            }
                        })
                        .collect();
                    let sinrs = phy::sinrs_in_member_order(members, &powers, sigma2);
                    let rate = phy::sum_rate(&sinrs, cfg.w_hz);
                    if rate > best_rate {
                        best_rate = rate;
                        best_j = j;
                    }
                }
                t.set(r, ui, b, best_rate, best_j);
            }
        }
    }
    let result = solve_tensor(&t, stats);
    state.assignments.clear();
    for &(r, ui, b) in &result.triples {
        assert_eq!(seeds[ui], state.clusters[r][0]);
        state.assignments.push(RisAssignment {
            cluster: r,
            block: b,
            aligned_ue: t.iota(r, ui, b),
        });
    }
}

/// Full-model rate evaluation of a final state: per-UE SINRs via the
/// general SINR expression (reflections from every configured block)
/// and the network sum rate.
pub fn network_rates_full(
    state: &ClusterState,
    table: &CascadeTable,
    ch: &ChannelSet,
    cfg: &NetworkConfig,
) -> phy::RateReport {
    let p = cfg.p_id_watt();
    let sigma2 = cfg.noise_watt();
    let alignments = state.all_alignments();
    let mut sinr = vec![0.0; ch.num_ues()];
    let mut total = 0.0;
    for members in state.clusters.iter() {
        if members.is_empty() {
            continue;
        }
        let powers: Vec<f64> = members
            .iter()
            .map(|&x| {
                if cfg.coherent_combining {
                    let casc: num_complex::Complex64 = alignments
                        .iter()
                        .map(|a| table.gain(a.block, a.aligned_ue, x))
                        .sum();
                    p * (casc + ch.f[x]).norm_sqr()
                } else {
                    let casc: f64 = alignments
                        .iter()
                        .map(|a| table.power(a.block, a.aligned_ue, x))
                        .sum();
                    p * (casc + ch.direct_gain(x))
                }
            })
            .collect();
        let sinrs = phy::sinrs_in_member_order(members, &powers, sigma2);
        for (&u, &g) in members.iter().zip(&sinrs) {
            sinr[u] = g;
            total += cfg.w_hz * g.ln_1p() / std::f64::consts::LN_2;
        }
    }
    phy::RateReport {
        sum_rate_bps: total,
        sinr,
    }
}

/// Relative magnitude of cross-block residual terms: mean over UEs of
/// (power through other clusters' blocks) / (own signal power).
pub fn cross_block_residual(
    state: &ClusterState,
    table: &CascadeTable,
    ch: &ChannelSet,
) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (r, members) in state.clusters.iter().enumerate() {
        for &u in members {
            let own: f64 = state
                .assignments
                .iter()
                .filter(|a| a.cluster == r)
                .map(|a| table.power(a.block, a.aligned_ue, u))
                .sum::<f64>()
                + ch.direct_gain(u);
            let cross: f64 = state
                .assignments
                .iter()
                .filter(|a| a.cluster != r)
                .map(|a| table.power(a.block, a.aligned_ue, u))
                .sum();
            if own > 0.0 {
                sum += cross / own;
                count += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Runs the joint clustering and RIS assignment algorithm end to end.
///
/// K-1 admission iterations, each admitting at most one UE per cluster
/// and rewriting the block assignments from the fresh 3D-AA result.
/// C2-C7 hold on output by construction; C1 is evaluated under the full
/// SINR model and reported, not enforced.
pub fn run_joint_clustering(
    ch: &ChannelSet,
    cfg: &NetworkConfig,
) -> Result<(ClusterState, QosReport, SchedulerStats)> {
    let s = derive_structure(cfg)?;
    let table = CascadeTable::build(ch);
    let mut state = initialize_clusters(ch, cfg)?;
    let mut stats = SchedulerStats::default();
    let order = rss_order(ch, cfg);

    if s.max_cluster_size == 1 {
        assign_blocks_to_singletons(&mut state, &table, ch, cfg, &mut stats);
    }
    for _k in 1..s.max_cluster_size {
        let awaiting: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&u| state.cluster_of[u].is_none())
            .collect();
        if awaiting.is_empty() {
            break;
        }
        let tensor = build_cost_matrix(&state, &awaiting, &table, ch, cfg);
        let result = solve_tensor(&tensor, &mut stats);
        apply_assignment(&mut state, &tensor, &result, &awaiting);
    }
    assert!(
        state.cluster_of.iter().all(|c| c.is_some()),
        "admission left UEs unassigned despite K = ceil(U/R)"
    );

    stats.cross_block_residual = cross_block_residual(&state, &table, ch);
    let report = network_rates_full(&state, &table, ch, cfg);
    let qos = QosReport::from_sinrs(report.sinr, cfg.qos_sinr_floor());
    Ok((state, qos, stats))
}

/// Human-readable assignment trace for verbose diagnostics.
pub fn trace_string(state: &ClusterState) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    for (r, members) in state.clusters.iter().enumerate() {
        let block = state
            .alignment_of(r)
            .map(|a| format!("block {} aligned to ue {}", a.block, a.aligned_ue))
            .unwrap_or_else(|| "no block".into());
        writeln!(out, "cluster {r}: members {members:?}, {block}").unwrap();
    }
    out
}
