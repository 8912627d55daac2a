//! Assignable stable equilibria and their regions of attraction.
//!
//! Mode `k` has the stable equilibria `E_k(i_1..i_n)` with coordinates
//! `(2 i_j - 1) / (2k)`, and each attracts the open cube
//! `R_k(i) = ](i_j - 1)/k, i_j/k[`. Everything here is exact rational
//! arithmetic; the same point is usually an equilibrium of several modes
//! (`1/4` is `E_2(1)` and `E_6(2)`), and nodes are identified by point.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact coordinate in `[0, 1]`, always kept in lowest terms.
pub type Rational = Ratio<i64>;

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().expect("small rationals convert")
}

pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn format_point(coords: &[Rational]) -> String {
    let parts: Vec<String> = coords.iter().map(format_rational).collect();
    format!("({})", parts.join(", "))
}

/// Parses `"a/b"` or an integer literal.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Config(format!("cannot parse rational `{s}`"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: i64 = n.trim().parse().map_err(|_| bad())?;
            let d: i64 = d.trim().parse().map_err(|_| bad())?;
            if d == 0 {
                return Err(bad());
            }
            Ok(Rational::new(n, d))
        }
        None => Ok(Rational::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

/// One `(mode, index tuple)` pair producing a node's coordinates.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Witness {
    pub mode: u32,
    /// 1-based cell indices.
    pub indices: Vec<u32>,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx: Vec<String> = self.indices.iter().map(u32::to_string).collect();
        write!(f, "E_{}({})", self.mode, idx.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquilibriumNode {
    pub coords: Vec<Rational>,
    pub witnesses: BTreeSet<Witness>,
}

impl EquilibriumNode {
    pub fn to_f64(&self) -> Vec<f64> {
        self.coords.iter().map(rational_to_f64).collect()
    }

    pub fn label(&self) -> String {
        format_point(&self.coords)
    }

    /// Modes `k` for which this point is in `E_k`.
    pub fn modes(&self) -> impl Iterator<Item = u32> + '_ {
        let mut last = None;
        self.witnesses.iter().filter_map(move |w| {
            if last == Some(w.mode) {
                None
            } else {
                last = Some(w.mode);
                Some(w.mode)
            }
        })
    }
}

/// Coordinates of `E_k(indices)`.
pub fn equilibrium_coords(k: u32, indices: &[u32]) -> Vec<Rational> {
    indices
        .iter()
        .map(|&i| Rational::new(2 * i64::from(i) - 1, 2 * i64::from(k)))
        .collect()
}

fn index_tuples(k: u32, n: usize) -> impl Iterator<Item = Vec<u32>> {
    let total = (k as usize).pow(n as u32);
    (0..total).map(move |mut flat| {
        let mut idx = vec![0u32; n];
        for slot in idx.iter_mut() {
            *slot = (flat % k as usize) as u32 + 1;
            flat /= k as usize;
        }
        idx
    })
}

/// All `k^n` stable equilibria of mode `k`, each with its single witness.
pub fn stable_equilibria(k: u32, n: usize) -> Vec<EquilibriumNode> {
    assert!(k >= 1 && n >= 1);
    let mut out: Vec<EquilibriumNode> = index_tuples(k, n)
        .map(|indices| EquilibriumNode {
            coords: equilibrium_coords(k, &indices),
            witnesses: BTreeSet::from([Witness { mode: k, indices }]),
        })
        .collect();
    out.sort_by(|a, b| a.coords.cmp(&b.coords));
    out
}

/// Open region of attraction `R_k(indices)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoaBox {
    pub mode: u32,
    pub indices: Vec<u32>,
}

impl RoaBox {
    pub fn lower(&self) -> Vec<Rational> {
        self.indices
            .iter()
            .map(|&i| Rational::new(i64::from(i) - 1, i64::from(self.mode)))
            .collect()
    }

    pub fn upper(&self) -> Vec<Rational> {
        self.indices
            .iter()
            .map(|&i| Rational::new(i64::from(i), i64::from(self.mode)))
            .collect()
    }

    pub fn equilibrium(&self) -> Vec<Rational> {
        equilibrium_coords(self.mode, &self.indices)
    }

    /// Strict containment, exact.
    pub fn contains_exact(&self, x: &[Rational]) -> bool {
        matches!(locate_roa_exact(x, self.mode), RoaLocation::Inside(ref idx) if *idx == self.indices)
    }

    /// Strict containment for floating-point states.
    pub fn contains(&self, x: &[f64]) -> bool {
        let k = f64::from(self.mode);
        x.len() == self.indices.len()
            && x.iter().zip(&self.indices).all(|(&xi, &i)| {
                let i = f64::from(i);
                xi > (i - 1.0) / k && xi < i / k
            })
    }

    /// Closed-box containment for floating-point states.
    pub fn contains_closed(&self, x: &[f64]) -> bool {
        let k = f64::from(self.mode);
        x.iter().zip(&self.indices).all(|(&xi, &i)| {
            let i = f64::from(i);
            xi >= (i - 1.0) / k && xi <= i / k
        })
    }
}

impl fmt::Display for RoaBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx: Vec<String> = self.indices.iter().map(u32::to_string).collect();
        write!(f, "R_{}({})", self.mode, idx.join(","))
    }
}

pub fn roa_box(k: u32, indices: &[u32]) -> Result<RoaBox> {
    if k < 1 {
        return Err(Error::InvalidMode(k));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i < 1 || i > k) {
        return Err(Error::IndexOutOfRange { index: bad, max: k });
    }
    Ok(RoaBox {
        mode: k,
        indices: indices.to_vec(),
    })
}

/// Result of locating a point among the mode-`k` regions of attraction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RoaLocation {
    /// 1-based indices of the unique open cube containing the point.
    Inside(Vec<u32>),
    /// Some coordinate is a multiple of `1/k`; the point has no ROA.
    Boundary,
}

pub fn locate_roa_exact(x: &[Rational], k: u32) -> RoaLocation {
    let k = i64::from(k);
    let mut idx = Vec::with_capacity(x.len());
    for c in x {
        let scaled = c * k;
        if scaled.is_integer() || *c < Rational::zero() || *c > Rational::from_integer(1) {
            return RoaLocation::Boundary;
        }
        idx.push(scaled.floor().to_integer() as u32 + 1);
    }
    RoaLocation::Inside(idx)
}

pub fn locate_roa(x: &[f64], k: u32) -> RoaLocation {
    let kf = f64::from(k);
    let mut idx = Vec::with_capacity(x.len());
    for &xi in x {
        let guess = (xi * kf).floor() as i64 + 1;
        let hit = (guess - 1..=guess + 1).find(|&i| {
            i >= 1 && i <= i64::from(k) && xi > (i - 1) as f64 / kf && xi < i as f64 / kf
        });
        match hit {
            Some(i) => idx.push(i as u32),
            None => return RoaLocation::Boundary,
        }
    }
    RoaLocation::Inside(idx)
}

/// Index tuple `i` with `coords = E_k(i)`, if any.
pub fn witness_indices(coords: &[Rational], k: u32) -> Option<Vec<u32>> {
    let two_k = 2 * i64::from(k);
    coords
        .iter()
        .map(|c| {
            let (q, rem) = (c.numer() * two_k).div_rem(c.denom());
            (rem == 0 && q.is_odd() && q > 0 && q < two_k).then(|| ((q + 1) / 2) as u32)
        })
        .collect()
}

/// Node for `coords` carrying every witness with mode at most `max_mode`.
pub fn canonical_node(coords: &[Rational], max_mode: u32) -> Result<EquilibriumNode> {
    let witnesses: BTreeSet<Witness> = (1..=max_mode)
        .filter_map(|k| witness_indices(coords, k).map(|indices| Witness { mode: k, indices }))
        .collect();
    if witnesses.is_empty() {
        return Err(Error::NotAnEquilibrium(format_point(coords), max_mode));
    }
    Ok(EquilibriumNode {
        coords: coords.to_vec(),
        witnesses,
    })
}

/// The deduplicated set `E^N = ∪_{k ≤ N} E_k`, sorted by coordinates.
pub fn assignable_equilibria(max_mode: u32, n: usize) -> Vec<EquilibriumNode> {
    let mut map: BTreeMap<Vec<Rational>, BTreeSet<Witness>> = BTreeMap::new();
    for k in 1..=max_mode {
        for indices in index_tuples(k, n) {
            map.entry(equilibrium_coords(k, &indices))
                .or_default()
                .insert(Witness { mode: k, indices });
        }
    }
    map.into_iter()
        .map(|(coords, witnesses)| EquilibriumNode { coords, witnesses })
        .collect()
}
