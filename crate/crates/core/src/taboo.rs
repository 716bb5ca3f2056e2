//! Taboo transition probabilities `Q_O^n(x, y)`: arrive at y at step n
//! without touching O at steps 1..n-1.
//!
//! Computed by first-entrance renewal over exact n-step transition
//! probabilities, which only need `p_m(z)` at the few offsets between x, y
//! and O:
//!
//! `Q^n(x,y) = p_n(y-x) - sum_{k<n} sum_{o in O} Q^k(x,o) p_{n-k}(y-o)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::law::StepLaw;

/// Cell-step budget for the dense convolution kernel.
pub const DENSE_BUDGET: f64 = 4e9;

/// `p_m(z)` for `m = 0..=n_max` at each requested offset; `table[i][m]`.
pub fn transition_table(law: &StepLaw, offsets: &[Vec<i64>], n_max: usize) -> Result<Vec<Vec<f64>>> {
    let dim = law
        .group()
        .kind
        .lattice_dim()
        .ok_or_else(|| Error::Unsupported(format!("taboo probabilities on {}", law.group().kind)))?;
    if offsets.iter().any(|o| o.len() != dim) {
        return Err(Error::Usage("offset dimension does not match the law".into()));
    }
    match law {
        StepLaw::Simple { .. } if dim <= 2 => Ok(offsets.iter().map(|o| simple_kernel(o, n_max)).collect()),
        StepLaw::Lazy { inner, rho } => {
            let inner = transition_table(inner, offsets, n_max)?;
            Ok(inner.iter().map(|row| lazy_mixture(row, *rho)).collect())
        }
        StepLaw::Zeta(_) => Err(Error::Unsupported(
            "taboo probabilities need a finitely supported law".into(),
        )),
        _ => dense_kernel(law, dim, offsets, n_max),
    }
}

/// `P(S_m = u)` for the simple walk on Z, `m = 0..=n_max`.
fn binomial_row(u: i64, n_max: usize) -> Vec<f64> {
    let mut row = vec![0.0; n_max + 1];
    let a = u.unsigned_abs() as usize;
    if a > n_max {
        return row;
    }
    // C(m, (m+u)/2) / 2^m, advanced two steps at a time
    let mut p = 0.5f64.powi(a as i32);
    let mut m = a;
    row[m] = p;
    while m + 2 <= n_max {
        let hi = ((m + 2 + a) / 2) as f64;
        let lo = ((m + 2 - a) / 2) as f64;
        p *= (m + 1) as f64 * (m + 2) as f64 / (4.0 * hi * lo);
        m += 2;
        row[m] = p;
    }
    row
}

fn simple_kernel(z: &[i64], n_max: usize) -> Vec<f64> {
    match z {
        [u] => binomial_row(*u, n_max),
        // the planar walk is a product of two walks on the diagonals
        [a, b] => {
            let r = binomial_row(a + b, n_max);
            let s = binomial_row(a - b, n_max);
            r.iter().zip(&s).map(|(x, y)| x * y).collect()
        }
        _ => unreachable!(),
    }
}

/// Binomial(n, rho) weights over `m`, truncated to +-12 sd, normalized.
fn binomial_weights(n: usize, rho: f64) -> (usize, Vec<f64>) {
    let sd = (n as f64 * rho * (1.0 - rho)).sqrt();
    let mode = ((n as f64 + 1.0) * rho).floor().min(n as f64) as usize;
    let lo = (mode as f64 - 12.0 * sd - 1.0).max(0.0) as usize;
    let hi = ((mode as f64 + 12.0 * sd + 1.0) as usize).min(n);
    let mut w = vec![0.0; hi - lo + 1];
    w[mode - lo] = 1.0;
    let odds = rho / (1.0 - rho);
    for m in mode..hi {
        w[m + 1 - lo] = w[m - lo] * (n - m) as f64 / (m + 1) as f64 * odds;
    }
    for m in (lo..mode).rev() {
        w[m - lo] = w[m + 1 - lo] * (m + 1) as f64 / ((n - m) as f64 * odds);
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    (lo, w)
}

fn lazy_mixture(inner: &[f64], rho: f64) -> Vec<f64> {
    (0..inner.len())
        .map(|n| {
            let (lo, w) = binomial_weights(n, rho);
            w.iter().zip(&inner[lo..]).map(|(w, p)| w * p).sum()
        })
        .collect()
}

fn dense_kernel(law: &StepLaw, dim: usize, offsets: &[Vec<i64>], n_max: usize) -> Result<Vec<Vec<f64>>> {
    if dim > 2 {
        return Err(Error::Unsupported("taboo probabilities on z3".into()));
    }
    let atoms: Vec<([i64; 2], f64)> = law
        .atoms()
        .ok_or_else(|| Error::Unsupported("taboo probabilities need a finitely supported law".into()))?
        .into_iter()
        .map(|(g, p)| {
            let c = g.as_zd().expect("lattice law").coords().to_vec();
            ([c[0], if dim == 2 { c[1] } else { 0 }], p)
        })
        .collect();
    let reach = atoms
        .iter()
        .map(|(a, _)| a[0].abs().max(a[1].abs()))
        .max()
        .unwrap_or(0);
    let radius = offsets
        .iter()
        .flat_map(|o| o.iter().map(|c| c.abs()))
        .max()
        .unwrap_or(0)
        .max(reach * n_max as i64)
        .max(1);
    let side = (2 * radius + 1) as usize;
    let cells = if dim == 2 { side * side } else { side };
    if cells as f64 * (n_max as f64) * atoms.len() as f64 > DENSE_BUDGET {
        return Err(Error::Unsupported(format!(
            "dense taboo kernel up to n = {n_max} exceeds the convolution budget"
        )));
    }
    let at = |x: i64, y: i64| -> usize {
        let i = (x + radius) as usize;
        if dim == 2 {
            i * side + (y + radius) as usize
        } else {
            i
        }
    };
    let mut cur = vec![0.0; cells];
    cur[at(0, 0)] = 1.0;
    let mut next = vec![0.0; cells];
    let mut table = vec![vec![0.0; n_max + 1]; offsets.len()];
    let read = |t: &mut Vec<Vec<f64>>, cur: &[f64], m: usize| {
        for (i, o) in offsets.iter().enumerate() {
            t[i][m] = cur[at(o[0], if dim == 2 { o[1] } else { 0 })];
        }
    };
    read(&mut table, &cur, 0);
    let ys: Vec<i64> = if dim == 2 { (-radius..=radius).collect() } else { vec![0] };
    for m in 1..=n_max {
        next.iter_mut().for_each(|v| *v = 0.0);
        // the support after m-1 steps fits in the box of radius reach*(m-1)
        let r = (reach * (m as i64 - 1)).min(radius);
        for x in -r..=r {
            for &y in ys.iter().filter(|y| y.abs() <= r) {
                let v = cur[at(x, y)];
                if v == 0.0 {
                    continue;
                }
                for (a, p) in &atoms {
                    next[at(x + a[0], y + a[1])] += v * p;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
        read(&mut table, &cur, m);
    }
    Ok(table)
}

fn lattice_coords(g: &GroupElement, dim: usize) -> Result<Vec<i64>> {
    match g.as_zd() {
        Some(p) if p.dim() == dim => Ok(p.coords().to_vec()),
        _ => Err(Error::MixedGroups {
            left: format!("z{dim}"),
            right: g.kind().to_string(),
        }),
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `Q_O^n(x, y)` for `n = 0..=n_max` (`Q^0 = 1{x = y}`).
pub fn taboo_probabilities(
    law: &StepLaw,
    taboo: &[GroupElement],
    x: &GroupElement,
    y: &GroupElement,
    n_max: usize,
) -> Result<Vec<f64>> {
    let dim = law
        .group()
        .kind
        .lattice_dim()
        .ok_or_else(|| Error::Unsupported(format!("taboo probabilities on {}", law.group().kind)))?;
    let sub = |a: &[i64], b: &[i64]| -> Vec<i64> { a.iter().zip(b).map(|(u, v)| u - v).collect() };
    let xs = lattice_coords(x, dim)?;
    let ys = lattice_coords(y, dim)?;
    let mut os: Vec<Vec<i64>> = Vec::new();
    for o in taboo {
        let c = lattice_coords(o, dim)?;
        if !os.contains(&c) {
            os.push(c);
        }
    }
    // targets: each o in O, then y (unless y is itself in O)
    let y_slot = os.iter().position(|o| *o == ys);
    let mut targets = os.clone();
    if y_slot.is_none() {
        targets.push(ys.clone());
    }
    let k = os.len();
    let mut offsets: Vec<Vec<i64>> = Vec::new();
    let index = |z: Vec<i64>, offsets: &mut Vec<Vec<i64>>| -> usize {
        offsets.iter().position(|o| *o == z).unwrap_or_else(|| {
            offsets.push(z);
            offsets.len() - 1
        })
    };
    let direct: Vec<usize> = targets.iter().map(|t| index(sub(t, &xs), &mut offsets)).collect();
    let via: Vec<Vec<usize>> = targets
        .iter()
        .map(|t| os.iter().map(|o| index(sub(t, o), &mut offsets)).collect())
        .collect();
    let table = transition_table(law, &offsets, n_max)?;
    // reversed rows so that p_{n-j} for j = 1..n-1 is a contiguous slice
    let reversed: Vec<Vec<f64>> = table.iter().map(|r| r.iter().rev().cloned().collect()).collect();
    let mut q = vec![vec![0.0; n_max + 1]; targets.len()];
    for n in 1..=n_max {
        for t in 0..targets.len() {
            let mut v = table[direct[t]][n];
            for i in 0..k {
                let rev = &reversed[via[t][i]];
                v -= dot(&q[i][1..n], &rev[n_max - n + 1..n_max]);
            }
            q[t][n] = v;
        }
    }
    let out = &mut q[y_slot.unwrap_or(k)];
    out[0] = if xs == ys { 1.0 } else { 0.0 };
    Ok(std::mem::take(out))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TabooDecay {
    /// `(n, Q^n, n log^2(n) Q^n)` per grid point.
    pub points: Vec<(u64, f64, f64)>,
    pub sup: f64,
    pub median: f64,
    pub last: f64,
    /// Last normalized value at most twice the median.
    pub bounded: bool,
}

/// Checks that `n log^2(n) Q_O^n(x, y)` stays bounded on `grid`.
pub fn taboo_decay_check(
    law: &StepLaw,
    taboo: &[GroupElement],
    x: &GroupElement,
    y: &GroupElement,
    grid: &[u64],
) -> Result<TabooDecay> {
    if grid.is_empty() || grid.iter().any(|&n| n < 2) {
        return Err(Error::Usage("taboo grid points must be at least 2".into()));
    }
    let n_max = *grid.iter().max().unwrap() as usize;
    let q = taboo_probabilities(law, taboo, x, y, n_max)?;
    let points: Vec<(u64, f64, f64)> = grid
        .iter()
        .map(|&n| {
            let l = (n as f64).ln();
            (n, q[n as usize], n as f64 * l * l * q[n as usize])
        })
        .collect();
    let mut norm: Vec<f64> = points.iter().map(|p| p.2).collect();
    let sup = norm.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let last = norm[norm.len() - 1];
    norm.sort_by(|a, b| a.total_cmp(b));
    let median = norm[norm.len() / 2];
    Ok(TabooDecay {
        points,
        sup,
        median,
        last,
        bounded: last.is_finite() && last <= 2.0 * median,
    })
}
