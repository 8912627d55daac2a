#![allow(dead_code)]

use std::f64::consts::PI;

/// Two-particle oracle: the fan positively spans the plane iff every cyclic
/// gap between consecutive fan angles is below π.
pub fn angular_gap_controllable(x: &[f64; 2], a: &[f64; 2], modes: u32, tol: f64) -> bool {
    let mut angles: Vec<f64> = (1..=modes)
        .filter_map(|u| {
            let u = f64::from(u);
            let v = [
                a[0] * u * (2.0 * PI * u * x[0]).sin(),
                a[1] * u * (2.0 * PI * u * x[1]).sin(),
            ];
            (v[0].hypot(v[1]) > 1e-12).then(|| v[1].atan2(v[0]))
        })
        .collect();
    if angles.len() < 3 {
        return false;
    }
    angles.sort_by(f64::total_cmp);
    let mut widest = angles[0] + 2.0 * PI - angles[angles.len() - 1];
    for w in angles.windows(2) {
        widest = widest.max(w[1] - w[0]);
    }
    widest < PI - tol
}

/// Two-sided Wilson score interval written out from the textbook formula.
pub fn wilson_by_hand(k: f64, n: f64, z: f64) -> (f64, f64) {
    let p = k / n;
    let denom = 1.0 + z * z / n;
    let centre = p + z * z / (2.0 * n);
    let spread = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt();
    ((centre - spread) / denom, (centre + spread) / denom)
}
