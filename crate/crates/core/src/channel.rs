//! Channel realizations: 3GPP UMa path loss and LoS probability plus
//! Rician/Rayleigh small-scale fading for the UE-RIS, RIS-BS and UE-BS
//! links.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::topology::{dist_2d, dist_3d, NetworkConfig, Placement};
use crate::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Large-scale statistics of one link.
#[derive(Debug, Clone, Copy)]
pub struct LinkStats {
    /// Linear path loss (power attenuation factor, > 1 in practice).
    pub pathloss_linear: f64,
    /// Rician K factor; 0 whenever the link is NLoS.
    pub rician_k: f64,
    pub is_los: bool,
}

/// Deterministic LoS phasor of a link: phase `base + n * step` for the
/// n-th element. Scalar links use `step = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LosPhasor {
    pub base_phase: f64,
    pub element_step: f64,
}

impl LosPhasor {
    /// Propagation phase over distance `d` plus a half-wavelength linear
    /// array progression along azimuth `theta`.
    pub fn from_geometry(d: f64, theta: f64, f_c: f64) -> Self {
        let lambda = SPEED_OF_LIGHT / f_c;
        Self {
            base_phase: -std::f64::consts::TAU * d / lambda,
            element_step: -std::f64::consts::PI * theta.sin(),
        }
    }
}

/// Antenna heights of the two ends of a link, higher end first.
#[derive(Debug, Clone, Copy)]
pub struct Heights {
    pub bs: f64,
    pub ut: f64,
}

/// UMa LoS probability as a function of horizontal distance and
/// terminal height. Returns 1 for d2d <= 18 m.
pub fn los_probability(d2d: f64, ue_height: f64) -> Result<f64> {
    if d2d < 0.0 {
        return Err(Error::Domain(format!("negative distance {d2d}")));
    }
    if d2d <= 18.0 {
        return Ok(1.0);
    }
    let base = 18.0 / d2d + (-d2d / 63.0).exp() * (1.0 - 18.0 / d2d);
    let c_h = if ue_height <= 13.0 {
        0.0
    } else {
        ((ue_height - 13.0) / 10.0).powf(1.5)
    };
    let highrise = 1.0 + c_h * 1.25 * (d2d / 100.0).powi(3) * (-d2d / 150.0).exp();
    Ok((base * highrise).clamp(0.0, 1.0))
}

/// UMa path loss in dB.
///
/// LoS uses the dual-slope breakpoint model; NLoS takes the max of the
/// LoS value and the NLoS expression.
pub fn pathloss_db(d3d: f64, d2d: f64, f_c: f64, is_los: bool, heights: Heights) -> Result<f64> {
    if !(0.5e9..=100e9).contains(&f_c) {
        return Err(Error::Domain(format!(
            "carrier frequency {f_c} Hz outside 0.5-100 GHz"
        )));
    }
    if !(d3d >= d2d && d2d > 0.0) {
        return Err(Error::Domain(format!(
            "need d3d >= d2d > 0, got d3d={d3d} d2d={d2d}"
        )));
    }
    let f_ghz = f_c / 1e9;
    // breakpoint with effective antenna heights (environment height 1 m)
    let h_bs_eff = heights.bs - 1.0;
    let h_ut_eff = heights.ut - 1.0;
    let d_bp = 4.0 * h_bs_eff * h_ut_eff * f_c / SPEED_OF_LIGHT;
    let pl_los = if d2d <= d_bp {
        28.0 + 22.0 * d3d.log10() + 20.0 * f_ghz.log10()
    } else {
        28.0 + 40.0 * d3d.log10() + 20.0 * f_ghz.log10()
            - 9.0 * (d_bp * d_bp + (heights.bs - heights.ut).powi(2)).log10()
    };
    if is_los {
        Ok(pl_los)
    } else {
        let pl_nlos =
            13.54 + 39.08 * d3d.log10() + 20.0 * f_ghz.log10() - 0.6 * (heights.ut - 1.5);
        Ok(pl_los.max(pl_nlos))
    }
}

/// Draws one link's channel coefficients.
///
/// Each entry is sqrt(1/lambda) * (sqrt(K/(K+1)) c_LoS + sqrt(1/(K+1)) c_NLoS)
/// with c_NLoS ~ CN(0,1) and c_LoS the deterministic unit phasor from
/// `phasor`. K = 0 reduces to Rayleigh scaled by sqrt(1/lambda).
pub fn draw_link<R: Rng>(
    stats: &LinkStats,
    phasor: &LosPhasor,
    dim: usize,
    rng: &mut R,
) -> Vec<Complex64> {
    let amp = (1.0 / stats.pathloss_linear).sqrt();
    let k = stats.rician_k;
    let w_los = (k / (k + 1.0)).sqrt();
    let w_nlos = (1.0 / (k + 1.0)).sqrt();
    (0..dim)
        .map(|n| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let nlos = Complex64::new(re, im) / 2f64.sqrt();
            let los = Complex64::from_polar(1.0, phasor.base_phase + n as f64 * phasor.element_step);
            amp * (w_los * los + w_nlos * nlos)
        })
        .collect()
}

/// All complex channels of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// UE u -> block b element channels, `h[u][b]` of length N.
    pub h: Vec<Vec<Vec<Complex64>>>,
    /// Block b -> BS element channels, `g[b]` of length N.
    pub g: Vec<Vec<Complex64>>,
    /// Direct UE u -> BS channel.
    pub f: Vec<Complex64>,
}

impl ChannelSet {
    pub fn num_ues(&self) -> usize {
        self.f.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.g.len()
    }

    /// Direct-link power gain |f_u|^2.
    pub fn direct_gain(&self, u: usize) -> f64 {
        self.f[u].norm_sqr()
    }

    /// Writes all coefficients as text, one line per coefficient, for
    /// offline debugging: `link u b n re im`.
    pub fn dump_text<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        for (u, c) in self.f.iter().enumerate() {
            writeln!(out, "f {u} 0 0 {} {}", c.re, c.im)?;
        }
        for (b, vec) in self.g.iter().enumerate() {
            for (n, c) in vec.iter().enumerate() {
                writeln!(out, "g 0 {b} {n} {} {}", c.re, c.im)?;
            }
        }
        for (u, per_block) in self.h.iter().enumerate() {
            for (b, vec) in per_block.iter().enumerate() {
                for (n, c) in vec.iter().enumerate() {
                    writeln!(out, "h {u} {b} {n} {} {}", c.re, c.im)?;
                }
            }
        }
        Ok(())
    }
}

/// Samples LoS state and large-scale stats for one link, then draws it.
fn realize_link<R: Rng>(
    from: [f64; 3],
    to: [f64; 3],
    heights: Heights,
    cfg: &NetworkConfig,
    dim: usize,
    force_los: bool,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let d2d = dist_2d(from, to).max(1e-3);
    let d3d = dist_3d(from, to).max(d2d);
    let p_los = los_probability(d2d, heights.ut)?;
    let is_los = force_los || rng.gen::<f64>() < p_los;
    let k = if is_los { cfg.k_los_linear } else { 0.0 };
    let pl_db = pathloss_db(d3d, d2d, cfg.f_c_hz, is_los, heights)?;
    let stats = LinkStats {
        pathloss_linear: crate::db_to_linear(pl_db),
        rician_k: k,
        is_los,
    };
    let theta = (to[1] - from[1]).atan2(to[0] - from[0]);
    let phasor = LosPhasor::from_geometry(d3d, theta, cfg.f_c_hz);
    Ok(draw_link(&stats, &phasor, dim, rng))
}

/// Generates every channel of one trial.
///
/// Direct UE-BS links are drawn first so that their realizations do not
/// depend on N; RIS-BS links follow, then UE-RIS links. LoS state is
/// sampled once per link and shared by all its elements.
pub fn generate_channels<R: Rng>(
    placement: &Placement,
    cfg: &NetworkConfig,
    rng: &mut R,
) -> Result<ChannelSet> {
    let nb = placement.block_owner.len();
    let mut f = Vec::with_capacity(cfg.u);
    for u in 0..cfg.u {
        let heights = Heights {
            bs: cfg.bs_height_m,
            ut: cfg.ue_height_m,
        };
        let v = realize_link(
            placement.ue_pos[u],
            placement.bs_pos,
            heights,
            cfg,
            1,
            false,
            rng,
        )?;
        f.push(v[0]);
    }
    let mut g = Vec::with_capacity(nb);
    for b in 0..nb {
        let heights = Heights {
            bs: cfg.bs_height_m,
            ut: cfg.ris_height_m,
        };
        g.push(realize_link(
            placement.block_pos(b),
            placement.bs_pos,
            heights,
            cfg,
            cfg.n,
            cfg.force_los_bs_ris,
            rng,
        )?);
    }
    let mut h = Vec::with_capacity(cfg.u);
    for u in 0..cfg.u {
        let mut per_block = Vec::with_capacity(nb);
        for b in 0..nb {
            let heights = Heights {
                bs: cfg.ris_height_m,
                ut: cfg.ue_height_m,
            };
            per_block.push(realize_link(
                placement.ue_pos[u],
                placement.block_pos(b),
                heights,
                cfg,
                cfg.n,
                false,
                rng,
            )?);
        }
        h.push(per_block);
    }
    Ok(ChannelSet { h, g, f })
}
