//! Convexified mode mixing and its realization by fast switching.

use serde::{Deserialize, Serialize};

use crate::dynamics::{flow_exact, integrate, mode_velocity_into, State, Trajectory, VectorField};
use crate::{Error, Result};

/// Simplex tolerance on mixture weights.
pub const SIMPLEX_TOL: f64 = 1e-12;
/// Weights below this are not played in a switching schedule.
pub const SKIP_WEIGHT: f64 = 1e-9;

/// Weights over modes `1..=N`, a point of the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ModeMix(Vec<f64>);

impl ModeMix {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Domain("mixture needs at least one mode".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::Domain(format!("mixture weight {w} is negative or not finite")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Domain(format!("mixture weights sum to {sum}, not 1")));
        }
        Ok(Self(weights))
    }

    /// All weight on mode `u` (1-based) out of `modes`.
    pub fn vertex(u: u32, modes: u32) -> Result<Self> {
        if u == 0 || u > modes {
            return Err(Error::InvalidMode(u));
        }
        let mut w = vec![0.0; modes as usize];
        w[u as usize - 1] = 1.0;
        Ok(Self(w))
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn modes(&self) -> u32 {
        self.0.len() as u32
    }
}

impl TryFrom<Vec<f64>> for ModeMix {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ModeMix> for Vec<f64> {
    fn from(m: ModeMix) -> Self {
        m.0
    }
}

/// Piecewise-constant mixture: `values[j]` is active on
/// `[breakpoints[j], breakpoints[j + 1])`, the last value forever.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixSignal {
    breakpoints: Vec<f64>,
    values: Vec<ModeMix>,
}

impl MixSignal {
    pub fn new(breakpoints: Vec<f64>, values: Vec<ModeMix>) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return Err(Error::Domain("signal needs one breakpoint per value".into()));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::Domain("first breakpoint must be 0".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("breakpoints must be strictly increasing".into()));
        }
        Ok(Self { breakpoints, values })
    }

    pub fn constant(mix: ModeMix) -> Self {
        Self {
            breakpoints: vec![0.0],
            values: vec![mix],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[ModeMix] {
        &self.values
    }

    pub fn at(&self, t: f64) -> &ModeMix {
        let j = self.breakpoints.partition_point(|&b| b <= t).max(1) - 1;
        &self.values[j]
    }
}

/// Consecutive `(mode, duration)` entries from fast switching at `period`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchSchedule {
    pub entries: Vec<(u32, f64)>,
    pub period: f64,
}

impl SwitchSchedule {
    pub fn total_duration(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    /// States at the requested (sorted) times, by chaining exact flows.
    pub fn states_at(&self, x0: &[f64], a: &[f64], times: &[f64]) -> Vec<State> {
        let mut out = Vec::with_capacity(times.len());
        let mut x = State::clamped(x0.to_vec());
        let mut seg = 0;
        // `x` is the state at `clock`, which lies inside segment `seg`.
        let mut clock = 0.0;
        let mut seg_start = 0.0;
        for &t in times {
            debug_assert!(t >= clock);
            while seg < self.entries.len() && seg_start + self.entries[seg].1 <= t {
                let (u, d) = self.entries[seg];
                x = flow_exact(&x, u, a, seg_start + d - clock);
                seg_start += d;
                clock = seg_start;
                seg += 1;
            }
            if t > clock {
                let u = match self.entries.get(seg).or(self.entries.last()) {
                    Some(&(u, _)) => u,
                    None => {
                        out.push(x.clone());
                        continue;
                    }
                };
                x = flow_exact(&x, u, a, t - clock);
                clock = t;
            }
            out.push(x.clone());
        }
        out
    }
}

/// Convex combination of the mode velocities at `x`.
pub fn mixed_velocity(x: &[f64], w: &ModeMix, a: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    mixed_velocity_into(x, w, a, &mut out);
    out
}

fn mixed_velocity_into(x: &[f64], w: &ModeMix, a: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    let mut f = vec![0.0; x.len()];
    for (j, &wj) in w.weights().iter().enumerate() {
        if wj == 0.0 {
            continue;
        }
        mode_velocity_into(x, j as u32 + 1, a, &mut f);
        for i in 0..x.len() {
            out[i] += wj * f[i];
        }
    }
}

/// The relaxed system as a vector field.
pub struct MixedField<'a> {
    pub signal: &'a MixSignal,
    pub coefficients: &'a [f64],
}

impl VectorField for MixedField<'_> {
    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        mixed_velocity_into(x, self.signal.at(t), self.coefficients, out);
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.signal.breakpoints[1..].to_vec()
    }
}

pub fn simulate_mixed(x0: &[f64], signal: &MixSignal, a: &[f64], dt: f64, horizon: f64) -> Trajectory {
    integrate(x0, &MixedField { signal, coefficients: a }, dt, horizon)
}

/// Fast switching over `[0, horizon]`. Each period (cut further at signal
/// breakpoints) plays the modes in ascending order for times proportional to
/// the active weights. Adjacent entries with the same mode are merged.
pub fn synthesize_switching(signal: &MixSignal, period: f64, horizon: f64) -> Result<SwitchSchedule> {
    if !(period > 0.0) || !period.is_finite() {
        return Err(Error::Domain(format!("period {period} must be positive")));
    }
    let mut marks: Vec<f64> = Vec::new();
    let periods = (horizon / period - 1e-9).ceil().max(0.0) as usize;
    for j in 1..periods {
        marks.push(j as f64 * period);
    }
    marks.extend(signal.breakpoints.iter().copied().filter(|&b| b > 0.0 && b < horizon));
    if horizon > 0.0 {
        marks.push(horizon);
    }
    marks.sort_by(f64::total_cmp);
    marks.dedup();

    let mut entries: Vec<(u32, f64)> = Vec::new();
    let mut start = 0.0;
    for end in marks {
        let span = end - start;
        let mix = signal.at(start);
        for (j, &w) in mix.weights().iter().enumerate() {
            if w < SKIP_WEIGHT {
                continue;
            }
            let u = j as u32 + 1;
            let d = w * span;
            match entries.last_mut() {
                Some(last) if last.0 == u => last.1 += d,
                _ => entries.push((u, d)),
            }
        }
        start = end;
    }
    Ok(SwitchSchedule { entries, period })
}

/// Sup-norm distance, over the integrator's sample times up to `horizon`,
/// between the relaxed trajectory and the switched one.
pub fn approximation_error(x0: &[f64], signal: &MixSignal, a: &[f64], period: f64, dt: f64, horizon: f64) -> Result<f64> {
    let relaxed = simulate_mixed(x0, signal, a, dt, horizon);
    let schedule = synthesize_switching(signal, period, horizon)?;
    let switched = schedule.states_at(x0, a, &relaxed.times);
    Ok(relaxed
        .states
        .iter()
        .zip(&switched)
        .map(|(r, s)| r.distance(s))
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkCase {
    pub name: String,
    pub x0: Vec<f64>,
    pub signal: MixSignal,
    pub coefficients: Vec<f64>,
    pub horizon: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorPoint {
    pub period: f64,
    pub error: f64,
}

fn mix(w: &[f64]) -> ModeMix {
    ModeMix::new(w.to_vec()).expect("benchmark weights are valid")
}

/// Ten fixed relaxation benchmarks on two particles with `A = (1, 4)`.
pub fn benchmark_suite() -> Vec<BenchmarkCase> {
    let a = vec![1.0, 4.0];
    let case = |name: &str, x0: [f64; 2], signal: MixSignal| BenchmarkCase {
        name: name.to_string(),
        x0: x0.to_vec(),
        signal,
        coefficients: a.clone(),
        horizon: 1.0,
    };
    let constant = |w: &[f64]| MixSignal::constant(mix(w));
    vec![
        case("half-half", [0.3, 0.1], constant(&[0.5, 0.5])),
        case("skewed", [0.2, 0.35], constant(&[0.3, 0.7])),
        case("three-even", [0.15, 0.4], constant(&[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0])),
        case("three-skew", [0.7, 0.3], constant(&[0.2, 0.5, 0.3])),
        case("mode-one-heavy", [0.1, 0.7], constant(&[0.8, 0.2])),
        case("near-wall", [0.05, 0.9], constant(&[0.4, 0.6])),
        case("sparse", [0.45, 0.2], constant(&[0.5, 0.0, 0.5])),
        case(
            "two-phase",
            [0.3, 0.6],
            MixSignal::new(vec![0.0, 0.5], vec![mix(&[0.5, 0.5]), mix(&[0.2, 0.3, 0.5])]).expect("valid"),
        ),
        case(
            "three-phase",
            [0.7, 0.15],
            MixSignal::new(
                vec![0.0, 0.3, 0.7],
                vec![mix(&[0.6, 0.4]), mix(&[0.1, 0.9]), mix(&[0.25, 0.25, 0.5])],
            )
            .expect("valid"),
        ),
        case("upper-cells", [0.8, 0.55], constant(&[0.35, 0.4, 0.25])),
    ]
}

/// Integration step used for the benchmarks.
pub const BENCHMARK_DT: f64 = 1e-4;

/// Error for `base_period / 2^j`, `j = 0..=halvings`.
pub fn convergence_study(case: &BenchmarkCase, base_period: f64, halvings: u32) -> Result<Vec<ErrorPoint>> {
    (0..=halvings)
        .map(|j| {
            let period = base_period / f64::from(1u32 << j);
            let error = approximation_error(
                &case.x0,
                &case.signal,
                &case.coefficients,
                period,
                BENCHMARK_DT,
                case.horizon,
            )?;
            Ok(ErrorPoint { period, error })
        })
        .collect()
}
