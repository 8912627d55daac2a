//! Dense phase-1 simplex for small feasibility problems `M λ = b, λ ≥ 0`.
//!
//! Bland's rule keeps degenerate problems (many of the fans here contain
//! parallel vectors) from cycling.

const PIVOT_EPS: f64 = 1e-12;

/// Feasibility tolerance on the phase-1 objective (sum of artificials).
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Returns a non-negative solution of `M λ = b` if one exists.
///
/// `m` is row-major with `rows` rows of `cols` entries each.
pub fn feasible_point(m: &[f64], rows: usize, cols: usize, b: &[f64]) -> Option<Vec<f64>> {
    assert_eq!(m.len(), rows * cols);
    assert_eq!(b.len(), rows);
    // Tableau columns: structural | artificial | rhs.
    let width = cols + rows + 1;
    let mut t = vec![0.0; (rows + 1) * width];
    for r in 0..rows {
        let sign = if b[r] < 0.0 { -1.0 } else { 1.0 };
        for c in 0..cols {
            t[r * width + c] = sign * m[r * cols + c];
        }
        t[r * width + cols + r] = 1.0;
        t[r * width + width - 1] = sign * b[r];
    }
    // Objective row holds reduced costs of minimizing Σ artificials.
    let obj = rows * width;
    for r in 0..rows {
        for c in 0..width {
            if c < cols || c == width - 1 {
                t[obj + c] -= t[r * width + c];
            }
        }
    }
    let mut basis: Vec<usize> = (cols..cols + rows).collect();
    let max_iter = 50 * (rows + cols).max(10);
    for _ in 0..max_iter {
        let Some(enter) = (0..cols + rows).find(|&c| t[obj + c] < -PIVOT_EPS) else {
            break;
        };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..rows {
            let a = t[r * width + enter];
            if a > PIVOT_EPS {
                let ratio = t[r * width + width - 1] / a;
                match leave {
                    Some((lr, best))
                        if ratio > best + PIVOT_EPS
                            || ((ratio - best).abs() <= PIVOT_EPS && basis[r] > basis[lr]) => {}
                    _ => leave = Some((r, ratio)),
                }
            }
        }
        let Some((pr, _)) = leave else {
            // Unbounded direction cannot occur with a bounded-below objective.
            break;
        };
        pivot(&mut t, width, rows + 1, pr, enter);
        basis[pr] = enter;
    }
    if -t[obj + width - 1] > FEASIBILITY_TOL {
        return None;
    }
    let mut x = vec![0.0; cols];
    for (r, &bv) in basis.iter().enumerate() {
        if bv < cols {
            x[bv] = t[r * width + width - 1].max(0.0);
        }
    }
    Some(x)
}

fn pivot(t: &mut [f64], width: usize, height: usize, pr: usize, pc: usize) {
    let p = t[pr * width + pc];
    for c in 0..width {
        t[pr * width + c] /= p;
    }
    for r in 0..height {
        if r == pr {
            continue;
        }
        let f = t[r * width + pc];
        if f != 0.0 {
            for c in 0..width {
                t[r * width + c] -= f * t[pr * width + c];
            }
        }
    }
}

/// Is `target` a non-negative combination of `vectors`?
pub fn in_cone(vectors: &[Vec<f64>], target: &[f64]) -> bool {
    let rows = target.len();
    let cols = vectors.len();
    let mut m = vec![0.0; rows * cols];
    for (c, v) in vectors.iter().enumerate() {
        for r in 0..rows {
            m[r * cols + c] = v[r];
        }
    }
    feasible_point(&m, rows, cols, target).is_some()
}

/// Convex weights reproducing `target` from `vectors`, if it lies in their hull.
pub fn convex_weights(vectors: &[Vec<f64>], target: &[f64]) -> Option<Vec<f64>> {
    let rows = target.len() + 1;
    let cols = vectors.len();
    let mut m = vec![0.0; rows * cols];
    for (c, v) in vectors.iter().enumerate() {
        for r in 0..target.len() {
            m[r * cols + c] = v[r];
        }
        m[target.len() * cols + c] = 1.0;
    }
    let mut b = target.to_vec();
    b.push(1.0);
    feasible_point(&m, rows, cols, &b)
}
