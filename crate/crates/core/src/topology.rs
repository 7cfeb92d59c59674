//! Network geometry: scalar parameters, random BS/UE/RIS placement, and
//! structural constants derived from them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// All scalar parameters of the simulated network.
///
/// Defaults follow the reference parameter set: `M=25`, `G=1`, `U=75`,
/// `R=25`, `p_id=21` dBm, `W=180` kHz, `q_u=1e5` bps, `N=256`,
/// `f_c=5` GHz, annulus `[15, 50]` m inside a 250 m cell,
/// `N0=-174` dBm/Hz, benchmark power range `[-40, 23]` dBm.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Number of UEs.
    pub u: usize,
    /// Number of RBs (= clusters).
    pub r: usize,
    /// Number of physical RISs.
    pub m: usize,
    /// Logical sub-blocks per RIS.
    pub g: usize,
    /// Elements per RIS block.
    pub n: usize,
    /// Identical UE transmit power [dBm].
    pub p_id_dbm: f64,
    /// RB bandwidth [Hz].
    pub w_hz: f64,
    /// Per-UE QoS demand [bit/s].
    pub q_u_bps: f64,
    /// Thermal noise PSD [dBm/Hz].
    pub n0_dbm_per_hz: f64,
    /// Carrier frequency [Hz].
    pub f_c_hz: f64,
    /// Cell radius [m].
    pub d_m: f64,
    /// RIS annulus inner radius [m].
    pub d_in_m: f64,
    /// RIS annulus outer radius [m].
    pub d_out_m: f64,
    /// Benchmark maximum transmit power [dBm].
    pub p_max_dbm: f64,
    /// Benchmark minimum transmit power [dBm].
    pub p_min_dbm: f64,
    /// Rician factor applied when a link is LoS (linear).
    pub k_los_linear: f64,
    /// BS antenna height [m].
    pub bs_height_m: f64,
    /// UE antenna height [m].
    pub ue_height_m: f64,
    /// RIS center height [m].
    pub ris_height_m: f64,
    /// Master RNG seed.
    pub seed: u64,
    /// Force the BS-RIS link to be LoS regardless of the UMa draw.
    pub force_los_bs_ris: bool,
    /// Combine direct and reflected paths coherently (|cascade + direct|^2)
    /// instead of as separate powers. Off by default.
    pub coherent_combining: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            u: 75,
            r: 25,
            m: 25,
            g: 1,
            n: 256,
            p_id_dbm: 21.0,
            w_hz: 180e3,
            q_u_bps: 1e5,
            n0_dbm_per_hz: -174.0,
            f_c_hz: 5e9,
            d_m: 250.0,
            d_in_m: 15.0,
            d_out_m: 50.0,
            p_max_dbm: 23.0,
            p_min_dbm: -40.0,
            // 9 dB, the usual UMa convention
            k_los_linear: 7.943282347242816,
            bs_height_m: 25.0,
            ue_height_m: 1.5,
            ris_height_m: 10.0,
            seed: 1,
            force_los_bs_ris: false,
            coherent_combining: false,
        }
    }
}

impl NetworkConfig {
    /// Checks every structural invariant, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.r < 1 {
            return Err(Error::InvalidConfig("r: must be at least 1".into()));
        }
        if self.u < self.r {
            return Err(Error::InvalidConfig(format!(
                "u: U ({}) must be >= R ({})",
                self.u, self.r
            )));
        }
        if self.m * self.g < self.r {
            return Err(Error::InvalidConfig(format!(
                "m*g: M*G ({}) must be >= R ({}) so every cluster can receive a block",
                self.m * self.g,
                self.r
            )));
        }
        if self.n < 1 {
            return Err(Error::InvalidConfig("n: must be at least 1".into()));
        }
        if !(self.d_in_m <= self.d_out_m && self.d_out_m <= self.d_m) {
            return Err(Error::InvalidConfig(format!(
                "d_in_m/d_out_m/d_m: need D_in <= D_out <= D, got {} / {} / {}",
                self.d_in_m, self.d_out_m, self.d_m
            )));
        }
        if !(self.p_min_dbm <= self.p_id_dbm && self.p_id_dbm <= self.p_max_dbm) {
            return Err(Error::InvalidConfig(format!(
                "p_id_dbm: need P_min <= p_id <= P_max, got {} / {} / {}",
                self.p_min_dbm, self.p_id_dbm, self.p_max_dbm
            )));
        }
        if self.w_hz <= 0.0 {
            return Err(Error::InvalidConfig("w_hz: must be positive".into()));
        }
        if self.k_los_linear < 0.0 {
            return Err(Error::InvalidConfig("k_los_linear: must be >= 0".into()));
        }
        if !(0.5e9..=100e9).contains(&self.f_c_hz) {
            return Err(Error::InvalidConfig(format!(
                "f_c_hz: UMa model covers 0.5-100 GHz, got {} Hz",
                self.f_c_hz
            )));
        }
        Ok(())
    }

    /// Identical UE transmit power in watts.
    pub fn p_id_watt(&self) -> f64 {
        crate::dbm_to_watt(self.p_id_dbm)
    }

    /// Noise power over one RB, sigma^2 = N0 * W, in watts.
    pub fn noise_watt(&self) -> f64 {
        crate::dbm_to_watt(self.n0_dbm_per_hz) * self.w_hz
    }

    /// QoS SINR floor, 2^(q_u / W) - 1.
    pub fn qos_sinr_floor(&self) -> f64 {
        (self.q_u_bps / self.w_hz).exp2() - 1.0
    }
}

/// Structural constants derived from a [`NetworkConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Structure {
    /// Number of clusters, C = R.
    pub clusters: usize,
    /// Maximum cluster size, K = ceil(U / R).
    pub max_cluster_size: usize,
    /// Total RIS blocks, B = M * G.
    pub blocks: usize,
}

/// Computes C, K and B from a validated config.
pub fn derive_structure(cfg: &NetworkConfig) -> Result<Structure> {
    cfg.validate()?;
    Ok(Structure {
        clusters: cfg.r,
        max_cluster_size: cfg.u.div_ceil(cfg.r),
        blocks: cfg.m * cfg.g,
    })
}

/// Realized positions of every node, in meters. The BS sits at the
/// origin of the horizontal plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub bs_pos: [f64; 3],
    pub ue_pos: Vec<[f64; 3]>,
    pub ris_pos: Vec<[f64; 3]>,
    /// Physical RIS index owning each of the B = M*G blocks.
    pub block_owner: Vec<usize>,
}

impl Placement {
    /// Position of the RIS that owns block `b`.
    pub fn block_pos(&self, b: usize) -> [f64; 3] {
        self.ris_pos[self.block_owner[b]]
    }
}

/// Horizontal distance between two positions.
pub fn dist_2d(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Full 3D distance between two positions.
pub fn dist_3d(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Draws an area-uniform point in the annulus [r_in, r_out].
fn annulus_point<R: Rng>(r_in: f64, r_out: f64, height: f64, rng: &mut R) -> [f64; 3] {
    let u: f64 = rng.gen();
    let radius = (r_in * r_in + u * (r_out * r_out - r_in * r_in)).sqrt();
    let theta = rng.gen::<f64>() * std::f64::consts::TAU;
    [radius * theta.cos(), radius * theta.sin(), height]
}

/// Draws the random network geometry.
///
/// UEs are area-uniform over the disk of radius D; RISs are area-uniform
/// over the annulus [D_in, D_out]. All G blocks of one RIS share its
/// position. Deterministic given the RNG state.
pub fn generate_topology<R: Rng>(cfg: &NetworkConfig, rng: &mut R) -> Result<Placement> {
    cfg.validate()?;
    let ue_pos = (0..cfg.u)
        .map(|_| annulus_point(0.0, cfg.d_m, cfg.ue_height_m, rng))
        .collect();
    let ris_pos: Vec<[f64; 3]> = (0..cfg.m)
        .map(|_| annulus_point(cfg.d_in_m, cfg.d_out_m, cfg.ris_height_m, rng))
        .collect();
    let block_owner = (0..cfg.m * cfg.g).map(|b| b / cfg.g).collect();
    Ok(Placement {
        bs_pos: [0.0, 0.0, cfg.bs_height_m],
        ue_pos,
        ris_pos,
        block_owner,
    })
}
