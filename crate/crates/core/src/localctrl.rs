//! Local controllability under mode mixing.
//!
//! A state is locally controllable when the convex hull of its velocity fan
//! `F(x) = {f_1(x), …, f_N(x)}` contains the origin in its interior, i.e.
//! when the fan positively spans the state space. The test solves `2n` cone
//! feasibility problems `±e_i ∈ cone(F(x))`.
//!
//! Positive spanning is invariant under any positive diagonal scaling of the
//! fan, so the verdict never depends on the coefficients `A_i`; they are
//! carried through only for reporting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{coefficients, mode_velocity_into, DeviceConfig, ParticleSpec};
use crate::error::{Error, Result};
use crate::simplex;

/// Fan vectors with a smaller norm are treated as zero.
pub const NORM_EPS: f64 = 1e-12;

/// `|sin(2π u x)|` below this is treated as an exact zero.
const SINE_DUST: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityFan {
    pub base: Vec<f64>,
    /// `vectors[u - 1] = f_u(base)`.
    pub vectors: Vec<Vec<f64>>,
}

pub fn velocity_fan(x: &[f64], a: &[f64], modes: u32) -> VelocityFan {
    assert!(modes >= 1);
    let vectors = (1..=modes)
        .map(|u| {
            let mut v = vec![0.0; x.len()];
            mode_velocity_into(x, u, a, &mut v);
            v
        })
        .collect();
    VelocityFan {
        base: x.to_vec(),
        vectors,
    }
}

impl VelocityFan {
    /// Unit directions of the non-negligible fan vectors, with sine round-off
    /// at cell boundaries snapped to zero.
    pub fn directions(&self) -> Vec<Vec<f64>> {
        self.vectors
            .iter()
            .enumerate()
            .filter_map(|(j, v)| {
                let u = (j + 1) as f64;
                let cleaned: Vec<f64> = v
                    .iter()
                    .zip(&self.base)
                    .map(|(&c, &x)| {
                        if (2.0 * std::f64::consts::PI * u * x).sin().abs() <= SINE_DUST {
                            0.0
                        } else {
                            c
                        }
                    })
                    .collect();
                let norm = cleaned.iter().map(|c| c * c).sum::<f64>().sqrt();
                (norm > NORM_EPS).then(|| cleaned.iter().map(|c| c / norm).collect())
            })
            .collect()
    }

    /// Whether the fan positively spans `R^n`.
    pub fn positively_spans(&self) -> bool {
        let n = self.base.len();
        let dirs = self.directions();
        if dirs.len() <= n {
            return false;
        }
        // Every axis needs fan support on both sides.
        for i in 0..n {
            let pos = dirs.iter().any(|d| d[i] > 0.0);
            let neg = dirs.iter().any(|d| d[i] < 0.0);
            if !(pos && neg) {
                return false;
            }
        }
        let mut target = vec![0.0; n];
        for i in 0..n {
            for sign in [1.0, -1.0] {
                target[i] = sign;
                if !simplex::in_cone(&dirs, &target) {
                    return false;
                }
            }
            target[i] = 0.0;
        }
        true
    }
}

pub fn is_locally_controllable(x: &[f64], a: &[f64], modes: u32) -> bool {
    velocity_fan(x, a, modes).positively_spans()
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::Domain("Wilson interval needs at least one trial".into()));
    }
    if successes > trials {
        return Err(Error::Domain(format!(
            "{successes} successes exceed {trials} trials"
        )));
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    Ok((lo, hi))
}

/// Two-sided 95 % normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Grid,
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub particles: usize,
    pub modes: u32,
    /// Interior grid points per axis; state coordinates are `index / (points + 1)`.
    pub grid_points: u32,
    pub total: u64,
    pub controllable: u64,
    pub percentage: f64,
    pub z: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub seed: u64,
    pub coefficients: Vec<f64>,
    /// One flag per tested state, in test order.
    pub flags: Vec<bool>,
    /// 1-based grid indices of each tested state. Empty for full grids,
    /// which are ordered row-major with `x_1` fastest.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub samples: Vec<Vec<u32>>,
}

impl SweepResult {
    fn new(
        kind: SweepKind,
        modes: u32,
        grid_points: u32,
        seed: u64,
        coefficients: Vec<f64>,
        flags: Vec<bool>,
        samples: Vec<Vec<u32>>,
    ) -> Self {
        let total = flags.len() as u64;
        let controllable = flags.iter().filter(|&&f| f).count() as u64;
        let (wilson_lo, wilson_hi) = wilson_interval(controllable, total.max(1), Z_95).unwrap_or((0.0, 0.0));
        Self {
            kind,
            particles: coefficients.len(),
            modes,
            grid_points,
            total,
            controllable,
            percentage: 100.0 * controllable as f64 / total.max(1) as f64,
            z: Z_95,
            wilson_lo,
            wilson_hi,
            seed,
            coefficients,
            flags,
            samples,
        }
    }

    /// Grid indices of the `j`-th tested state.
    pub fn indices(&self, j: usize) -> Vec<u32> {
        if !self.samples.is_empty() {
            return self.samples[j].clone();
        }
        let m = self.grid_points as usize;
        let mut flat = j;
        (0..self.particles)
            .map(|_| {
                let i = flat % m;
                flat /= m;
                i as u32 + 1
            })
            .collect()
    }

    pub fn state(&self, j: usize) -> Vec<f64> {
        let denom = f64::from(self.grid_points + 1);
        self.indices(j).iter().map(|&i| f64::from(i) / denom).collect()
    }

    /// Flags packed eight to a byte, least significant bit first.
    pub fn flag_bitmap(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.flags.len().div_ceil(8)];
        for (j, &f) in self.flags.iter().enumerate() {
            if f {
                out[j / 8] |= 1 << (j % 8);
            }
        }
        out
    }

    /// Percentage recomputed with symmetry-line states removed from the
    /// denominator.
    pub fn sensitivity(&self) -> Sensitivity {
        let grid = self.grid_points + 1;
        let mut on_lines = 0u64;
        let mut controllable_off = 0u64;
        for (j, &flag) in self.flags.iter().enumerate() {
            if on_symmetry_line(&self.indices(j), grid) {
                on_lines += 1;
            } else if flag {
                controllable_off += 1;
            }
        }
        let off = self.total - on_lines;
        Sensitivity {
            symmetry_line_states: on_lines,
            percentage_including_lines: self.percentage,
            percentage_excluding_lines: if off == 0 {
                0.0
            } else {
                100.0 * controllable_off as f64 / off as f64
            },
        }
    }
}

/// On `x_i = 1/2`, `x_i = x_j` or `x_i = 1 - x_j`, where the fan is collinear
/// in some coordinate plane. `grid` is the denominator of the coordinates.
fn on_symmetry_line(idx: &[u32], grid: u32) -> bool {
    idx.iter().any(|&i| 2 * i == grid)
        || idx.iter().enumerate().any(|(a, &i)| {
            idx[a + 1..].iter().any(|&j| i == j || i + j == grid)
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensitivity {
    pub symmetry_line_states: u64,
    pub percentage_including_lines: f64,
    pub percentage_excluding_lines: f64,
}

fn interior_points(channel_height_um: f64, spacing_um: f64) -> Result<u32> {
    if !(spacing_um > 0.0) || spacing_um >= channel_height_um {
        return Err(Error::Config(format!(
            "grid spacing {spacing_um} µm must be positive and below the channel height {channel_height_um} µm"
        )));
    }
    let cells = channel_height_um / spacing_um;
    let rounded = cells.round();
    if (cells - rounded).abs() > 1e-9 * cells {
        return Err(Error::Config(format!(
            "grid spacing {spacing_um} µm does not divide channel height {channel_height_um} µm"
        )));
    }
    Ok(rounded as u32 - 1)
}

/// Tests every interior state of the uniform grid with the given spacing.
pub fn grid_sweep(cfg: &DeviceConfig, modes: u32, spacing_um: f64) -> Result<SweepResult> {
    let a = coefficients(cfg)?;
    let m = interior_points(cfg.channel_height_um, spacing_um)?;
    let n = a.len();
    let total = (m as usize)
        .checked_pow(n as u32)
        .filter(|&t| t <= 200_000_000)
        .ok_or_else(|| Error::Config(format!("{m}^{n} grid states is too many for a full sweep")))?;
    let denom = f64::from(m + 1);
    let flags: Vec<bool> = (0..total)
        .into_par_iter()
        .map(|mut flat| {
            let x: Vec<f64> = (0..n)
                .map(|_| {
                    let i = flat % m as usize;
                    flat /= m as usize;
                    (i + 1) as f64 / denom
                })
                .collect();
            is_locally_controllable(&x, &a, modes)
        })
        .collect();
    Ok(SweepResult::new(SweepKind::Grid, modes, m, 0, a, flags, Vec::new()))
}

/// Parameters of a sampled multi-particle sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSweep {
    pub particles: usize,
    pub modes: u32,
    pub samples: u64,
    pub seed: u64,
    /// Radii are drawn uniformly from this range, once per run.
    pub radius_range_um: (f64, f64),
    pub channel_height_um: f64,
    pub spacing_um: f64,
    pub viscosity_pa_s: f64,
    pub acoustic_energy_j_m3: f64,
}

impl SampleSweep {
    /// 3000 samples, radii in [1, 2] µm, otherwise the two-particle reference device.
    pub fn new(particles: usize, modes: u32, seed: u64) -> Self {
        let base = DeviceConfig::reference_two_particle();
        Self {
            particles,
            modes,
            samples: 3000,
            seed,
            radius_range_um: (1.0, 2.0),
            channel_height_um: base.channel_height_um,
            spacing_um: 5.0,
            viscosity_pa_s: base.viscosity_pa_s,
            acoustic_energy_j_m3: base.acoustic_energy_j_m3,
        }
    }

    /// Radii drawn for this run's seed.
    pub fn radii(&self) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(0);
        let (lo, hi) = self.radius_range_um;
        (0..self.particles)
            .map(|_| if hi > lo { rng.random_range(lo..=hi) } else { lo })
            .collect()
    }

    pub fn device(&self) -> DeviceConfig {
        DeviceConfig {
            channel_height_um: self.channel_height_um,
            viscosity_pa_s: self.viscosity_pa_s,
            acoustic_energy_j_m3: self.acoustic_energy_j_m3,
            particles: self.radii().into_iter().map(ParticleSpec::with_radius).collect(),
            mode_count: self.modes,
        }
    }
}

/// Uniform sampling of interior grid states. Sample `j` draws from its own
/// ChaCha stream so the result does not depend on scheduling.
pub fn sample_sweep(params: &SampleSweep) -> Result<SweepResult> {
    if params.samples < 1 {
        return Err(Error::Config("samples must be at least 1".into()));
    }
    if params.particles < 2 {
        return Err(Error::Config("sampled sweeps need at least two particles".into()));
    }
    let (lo, hi) = params.radius_range_um;
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::Config(format!("bad radius range [{lo}, {hi}]")));
    }
    let a = coefficients(&params.device())?;
    let m = interior_points(params.channel_height_um, params.spacing_um)?;
    let denom = f64::from(m + 1);
    let modes = params.modes;
    let results: Vec<(Vec<u32>, bool)> = (0..params.samples)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(j + 1);
            let idx: Vec<u32> = (0..params.particles).map(|_| rng.random_range(1..=m)).collect();
            let x: Vec<f64> = idx.iter().map(|&i| f64::from(i) / denom).collect();
            let flag = is_locally_controllable(&x, &a, modes);
            (idx, flag)
        })
        .collect();
    let (samples, flags) = results.into_iter().unzip();
    Ok(SweepResult::new(
        SweepKind::Sample,
        modes,
        m,
        params.seed,
        a,
        flags,
        samples,
    ))
}
