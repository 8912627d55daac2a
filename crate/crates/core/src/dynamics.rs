//! Scaled one-dimensional acoustophoretic dynamics.
//!
//! With positions divided by the channel height, particle `i` driven by the
//! standing-wave mode `u` obeys
//!
//! ```text
//! dx_i/dt = A_i * u * sin(2π u x_i),    x_i ∈ [0, 1]
//! ```
//!
//! Each coordinate evolves independently, so the flow map has a closed form:
//! with `y = u x_i` split into its integer part `p` and fraction `r`,
//! `cot(π r(t)) = cot(π r(0)) * exp(-2π A_i u² t)` and `p` never changes.
//! [`flow_exact`] is the propagator used everywhere else in the crate and
//! [`integrate`] (classical RK4) exists to cross-check it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical description of one suspended particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleSpec {
    /// Radius in µm.
    pub radius_um: f64,
    /// Acoustic contrast factor Φ (dimensionless).
    #[serde(default = "default_contrast")]
    pub contrast_factor: f64,
    /// Velocity coefficient in 1/s. When set, it replaces the derived value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit_coefficient: Option<f64>,
}

fn default_contrast() -> f64 {
    1.0
}

impl ParticleSpec {
    pub fn with_radius(radius_um: f64) -> Self {
        Self {
            radius_um,
            contrast_factor: 1.0,
            explicit_coefficient: None,
        }
    }

    pub fn explicit(coefficient: f64) -> Self {
        Self {
            radius_um: 1.0,
            contrast_factor: 1.0,
            explicit_coefficient: Some(coefficient),
        }
    }
}

/// Device and particle parameters from which the velocity coefficients derive.
///
/// The acoustic energy density is a single scalar shared by every mode: the
/// mode-dependence of `A_i` only reparameterizes time and does not change any
/// reachability property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    /// Channel height H in µm.
    pub channel_height_um: f64,
    /// Dynamic viscosity η in Pa·s.
    pub viscosity_pa_s: f64,
    /// Acoustic energy density E_ac in J/m³.
    pub acoustic_energy_j_m3: f64,
    pub particles: Vec<ParticleSpec>,
    /// Number of available modes N (modes 1..=N).
    pub mode_count: u32,
}

impl DeviceConfig {
    /// Two particles of radius 1 µm and 2 µm in an 800 µm water channel, five modes.
    pub fn reference_two_particle() -> Self {
        Self {
            channel_height_um: 800.0,
            viscosity_pa_s: 1.0e-3,
            acoustic_energy_j_m3: 10.0,
            particles: vec![ParticleSpec::with_radius(1.0), ParticleSpec::with_radius(2.0)],
            mode_count: 5,
        }
    }

    pub fn particle_count(&self) -> usize {
        self.particles.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.channel_height_um > 0.0 && self.channel_height_um.is_finite()) {
            return Err(Error::Config(format!(
                "channel_height_um must be positive, got {}",
                self.channel_height_um
            )));
        }
        if !(self.viscosity_pa_s > 0.0 && self.viscosity_pa_s.is_finite()) {
            return Err(Error::Config(format!(
                "viscosity_pa_s must be positive, got {}",
                self.viscosity_pa_s
            )));
        }
        if !self.acoustic_energy_j_m3.is_finite() {
            return Err(Error::Config("acoustic_energy_j_m3 must be finite".into()));
        }
        if self.mode_count < 1 {
            return Err(Error::Config("mode_count must be at least 1".into()));
        }
        if self.particles.is_empty() {
            return Err(Error::Config("at least one particle is required".into()));
        }
        for (i, p) in self.particles.iter().enumerate() {
            match p.explicit_coefficient {
                Some(c) if !c.is_finite() => {
                    return Err(Error::Config(format!(
                        "particles[{i}].explicit_coefficient must be finite"
                    )))
                }
                Some(_) => {}
                None => {
                    if !(p.radius_um > 0.0 && p.radius_um.is_finite()) {
                        return Err(Error::Config(format!(
                            "particles[{i}].radius_um must be positive, got {}",
                            p.radius_um
                        )));
                    }
                    if p.contrast_factor == 0.0 || !p.contrast_factor.is_finite() {
                        return Err(Error::Config(format!(
                            "particles[{i}].contrast_factor must be finite and non-zero"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Velocity coefficients `A_i = π a_i² Φ_i E / (2 H² η)` in 1/s.
///
/// One factor of `1/H` comes from the force balance, the other from scaling
/// positions into the unit interval. Explicit coefficients pass through as-is.
pub fn coefficients(cfg: &DeviceConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let h = cfg.channel_height_um * 1e-6;
    Ok(cfg
        .particles
        .iter()
        .map(|p| match p.explicit_coefficient {
            Some(c) => c,
            None => {
                let a = p.radius_um * 1e-6;
                PI * a * a * p.contrast_factor * cfg.acoustic_energy_j_m3
                    / (2.0 * h * h * cfg.viscosity_pa_s)
            }
        })
        .collect())
}

/// A particle configuration in scaled coordinates, every entry in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct State(Vec<f64>);

impl State {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidState("state has no coordinates".into()));
        }
        if let Some((i, x)) = coords
            .iter()
            .enumerate()
            .find(|(_, x)| !(0.0..=1.0).contains(*x))
        {
            return Err(Error::InvalidState(format!(
                "coordinate {i} = {x} lies outside [0, 1]"
            )));
        }
        Ok(Self(coords))
    }

    /// Builds a state by clamping each coordinate into `[0, 1]`.
    pub fn clamped(mut coords: Vec<f64>) -> Self {
        for x in &mut coords {
            *x = if x.is_nan() { 0.5 } else { x.clamp(0.0, 1.0) };
        }
        Self(coords)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Sup-norm distance.
    pub fn distance(&self, other: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<f64>> for State {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        State::new(v)
    }
}

impl From<State> for Vec<f64> {
    fn from(s: State) -> Self {
        s.0
    }
}

impl std::ops::Deref for State {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

fn check_mode(u: u32) -> Result<()> {
    if u < 1 {
        Err(Error::InvalidMode(u))
    } else {
        Ok(())
    }
}

/// Velocity field of mode `u`: component `i` is `A_i u sin(2π u x_i)`.
pub fn mode_velocity(x: &[f64], u: u32, a: &[f64]) -> Result<Vec<f64>> {
    check_mode(u)?;
    let mut out = vec![0.0; x.len()];
    mode_velocity_into(x, u, a, &mut out);
    Ok(out)
}

pub(crate) fn mode_velocity_into(x: &[f64], u: u32, a: &[f64], out: &mut [f64]) {
    let uf = f64::from(u);
    for ((o, &xi), &ai) in out.iter_mut().zip(x).zip(a) {
        *o = ai * uf * (2.0 * PI * uf * xi).sin();
    }
}

/// Splits `u * x` into cell index and fractional position within the cell.
fn cell_split(x: f64, u: u32) -> (f64, f64) {
    let y = f64::from(u) * x;
    let p = y.floor();
    (p, y - p)
}

/// Mid-cell stable equilibrium `(2⌊u x⌋ + 1) / (2u)` of the cell containing `x`.
///
/// For `x = 1` the last cell is used.
pub fn midcell(x: f64, u: u32) -> f64 {
    let (mut p, _) = cell_split(x, u);
    if p >= f64::from(u) {
        p = f64::from(u) - 1.0;
    }
    (2.0 * p + 1.0) / (2.0 * f64::from(u))
}

/// Exact single-coordinate flow of `dx/dt = a u sin(2π u x)` after time `t`.
pub fn flow_coordinate(x: f64, u: u32, a: f64, t: f64) -> f64 {
    let (p, r) = cell_split(x, u);
    if r == 0.0 || t == 0.0 {
        return x;
    }
    let theta = PI * r;
    let cot = theta.cos() / theta.sin();
    if cot == 0.0 {
        return x;
    }
    let rate = 2.0 * PI * a * f64::from(u) * f64::from(u);
    // cot(θ(t)) = cot(θ0) e^{-rate t}, formed in log space so that neither
    // factor overflows on its own.
    let scaled = cot.signum() * (cot.abs().ln() - rate * t).exp();
    let theta_t = PI / 2.0 - scaled.atan();
    let uf = f64::from(u);
    ((p + theta_t / PI) / uf).clamp(p / uf, (p + 1.0) / uf)
}

/// Closed-form flow map of mode `u` applied for duration `t`.
pub fn flow_exact(x0: &[f64], u: u32, a: &[f64], t: f64) -> State {
    assert!(u >= 1, "mode must be at least 1");
    assert!(t >= 0.0, "duration must be non-negative");
    State(
        x0.iter()
            .zip(a)
            .map(|(&x, &ai)| flow_coordinate(x, u, ai, t))
            .collect(),
    )
}

fn cot_of_fraction(r: f64) -> f64 {
    let theta = PI * r;
    theta.cos() / theta.sin()
}

/// Earliest `t ≥ 0` at which the coordinate starting at `x0` reaches `level`
/// under mode `u`, or `None` if it never does.
///
/// `level` must lie in the same closed cell as `x0`; the mid-cell equilibrium
/// itself is only reached asymptotically.
pub fn crossing_time(x0: f64, level: f64, u: u32, a: f64) -> Option<f64> {
    if x0 == level {
        return Some(0.0);
    }
    let (p, r0) = cell_split(x0, u);
    if r0 == 0.0 {
        return None;
    }
    let mid = midcell(x0, u);
    if (level - x0) * (mid - level) <= 0.0 {
        return None;
    }
    let rl = f64::from(u) * level - p;
    if !(0.0..=1.0).contains(&rl) {
        return None;
    }
    let c0 = cot_of_fraction(r0);
    let cl = if rl == 0.0 || rl == 1.0 {
        return None;
    } else {
        cot_of_fraction(rl)
    };
    if c0 == 0.0 || cl == 0.0 || c0.signum() != cl.signum() {
        return None;
    }
    let rate = 2.0 * PI * a * f64::from(u) * f64::from(u);
    let t = (c0.abs().ln() - cl.abs().ln()) / rate;
    if t.is_finite() && t >= 0.0 {
        Some(t)
    } else {
        None
    }
}

/// Time after which the coordinate is within `tol` of its mid-cell equilibrium.
///
/// Returns `None` when the coordinate sits on a cell boundary or the
/// coefficient does not attract towards mid-cell.
pub fn settle_time(x0: f64, u: u32, a: f64, tol: f64) -> Option<f64> {
    let (_, r) = cell_split(x0, u);
    if (midcell(x0, u) - x0).abs() <= tol {
        return Some(0.0);
    }
    if r == 0.0 || a <= 0.0 {
        return None;
    }
    let uf = f64::from(u);
    // |x - mid| = |atan(cot θ)| / (π u)
    let bound = (PI * uf * tol).min(PI / 2.0 - 1e-12).tan();
    let c0 = cot_of_fraction(r).abs();
    let rate = 2.0 * PI * a * uf * uf;
    Some(((c0.ln() - bound.ln()) / rate).max(0.0))
}

/// Lemma-style reconstruction of the mode-`u` flow from the mode-1 flow:
/// `(p + X¹(q ∘ t, r)) / u` with `p = ⌊u ξ0⌋`, `r = u ξ0 - p`.
///
/// `q_i = u² A_{i,u} / A_{i,1}` rescales time per coordinate; `a_base` holds
/// the mode-1 coefficients `A_{i,1}`.
pub fn rescale_solution(xi0: &[f64], u: u32, a_base: &[f64], q: &[f64], t: f64) -> State {
    assert!(u >= 1, "mode must be at least 1");
    let uf = f64::from(u);
    State(
        xi0.iter()
            .zip(a_base)
            .zip(q)
            .map(|((&x, &a), &qi)| {
                let y = uf * x;
                let p = y.floor();
                let r = y - p;
                (p + flow_coordinate(r, 1, a, qi * t)) / uf
            })
            .collect(),
    )
}

/// Reflects coordinates listed in `axes` (0-based) through `x_i = 1/2`.
pub fn reflect(x: &[f64], axes: &[usize]) -> State {
    let mut out = x.to_vec();
    for &i in axes {
        assert!(i < out.len(), "axis {i} out of range");
        out[i] = 1.0 - x[i];
    }
    State(out)
}

/// Sampled solution of the dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory is never empty")
    }
}

/// A time-dependent velocity field on `[0, 1]^n`.
pub trait VectorField {
    /// Writes the velocity at `(t, x)` into `out`.
    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]);

    /// Times at which the field switches discontinuously. Integration steps
    /// never straddle a breakpoint.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Piecewise-constant mode signal: play `segments[j].0` for `segments[j].1`
/// seconds, in order. After the last segment the last mode stays active.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSequence {
    segments: Vec<(u32, f64)>,
    coefficients: Vec<f64>,
    ends: Vec<f64>,
}

impl ModeSequence {
    pub fn new(segments: Vec<(u32, f64)>, coefficients: Vec<f64>) -> Result<Self> {
        let mut ends = Vec::with_capacity(segments.len());
        let mut acc = 0.0;
        for &(u, d) in &segments {
            check_mode(u)?;
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::Domain(format!("segment duration {d} must be non-negative")));
            }
            acc += d;
            ends.push(acc);
        }
        Ok(Self {
            segments,
            coefficients,
            ends,
        })
    }

    pub fn total_duration(&self) -> f64 {
        self.ends.last().copied().unwrap_or(0.0)
    }

    pub fn segments(&self) -> &[(u32, f64)] {
        &self.segments
    }

    fn mode_at(&self, t: f64) -> Option<u32> {
        let j = self.ends.partition_point(|&e| e <= t);
        self.segments
            .get(j)
            .or(self.segments.last())
            .map(|&(u, _)| u)
    }

    /// Exact endpoint obtained by chaining closed-form flows.
    pub fn apply_exact(&self, x0: &[f64]) -> State {
        let mut x = State(x0.to_vec());
        for &(u, d) in &self.segments {
            x = flow_exact(&x, u, &self.coefficients, d);
        }
        x
    }
}

impl VectorField for ModeSequence {
    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match self.mode_at(t) {
            Some(u) => mode_velocity_into(x, u, &self.coefficients, out),
            None => out.iter_mut().for_each(|o| *o = 0.0),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.ends.clone()
    }
}

/// Step times on `[0, horizon]`: equal steps no longer than `dt` between
/// consecutive breakpoints.
fn step_grid(dt: f64, horizon: f64, breakpoints: &[f64]) -> Vec<f64> {
    let mut marks: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&b| b > 0.0 && b < horizon)
        .collect();
    marks.push(horizon);
    marks.sort_by(f64::total_cmp);
    marks.dedup();
    let mut times = vec![0.0];
    let mut start = 0.0;
    for end in marks {
        let span = end - start;
        if span <= 0.0 {
            continue;
        }
        let steps = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for j in 1..steps {
            times.push(start + h * j as f64);
        }
        times.push(end);
        start = end;
    }
    times
}

/// Classical fourth-order Runge-Kutta integration, sampled at every step and
/// clamped to the unit cube.
pub fn integrate<F: VectorField + ?Sized>(x0: &[f64], field: &F, dt: f64, horizon: f64) -> Trajectory {
    assert!(dt > 0.0, "dt must be positive");
    assert!(horizon >= 0.0, "horizon must be non-negative");
    let n = x0.len();
    let grid = step_grid(dt, horizon, &field.breakpoints());
    let mut states = Vec::with_capacity(grid.len());
    let mut x = State::clamped(x0.to_vec()).into_inner();
    states.push(State(x.clone()));
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    for w in grid.windows(2) {
        let (t, h) = (w[0], w[1] - w[0]);
        // Evaluate on the open step so piecewise fields use the segment's value.
        let tm = t + 0.5 * h;
        field.eval(t + 1e-3 * h, &x, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        field.eval(tm, &tmp, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        field.eval(tm, &tmp, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + h * k3[i];
        }
        field.eval(t + (1.0 - 1e-3) * h, &tmp, &mut k4);
        for i in 0..n {
            x[i] = (x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).clamp(0.0, 1.0);
        }
        states.push(State(x.clone()));
    }
    Trajectory {
        times: grid,
        states,
    }
}
