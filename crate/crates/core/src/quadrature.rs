//! Integration over the torus `[-pi, pi]^d` of integrands that are smooth
//! except at `t = 0`.
//!
//! The torus is cut into nested cubic shells `h/2 <= |t|_inf <= h` with
//! `h = pi, pi/2, ...` down to the exclusion radius. Each shell is a union of
//! `4^d - 2^d` cells of side `h/2` on which the integrand is smooth at its own
//! scale, so tensor Gauss-Legendre converges fast. The excluded cube is
//! replaced by the geometric continuation of the last shells.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if m == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[m - 1 - i] = w[i];
    }
    (x, w)
}

const MAX_CACHED: usize = 512;

fn cached_rule(m: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static RULES: OnceLock<Vec<OnceLock<(Vec<f64>, Vec<f64>)>>> = OnceLock::new();
    let rules = RULES.get_or_init(|| (0..=MAX_CACHED).map(|_| OnceLock::new()).collect());
    rules[m.min(MAX_CACHED)].get_or_init(|| gauss_legendre(m.min(MAX_CACHED)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    /// Gauss-Legendre points per axis per cell.
    pub resolution: usize,
    /// Half-width of the excluded cube around t = 0.
    pub epsilon: f64,
    /// Relative tolerance below which refinement stops early.
    pub tolerance: f64,
    /// Refinement passes, each doubling the resolution and halving epsilon.
    pub max_depth: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            resolution: 8,
            epsilon: 1e-3,
            tolerance: 1e-10,
            max_depth: 2,
        }
    }
}

impl QuadratureSettings {
    pub fn refined(&self) -> Self {
        QuadratureSettings {
            resolution: self.resolution * 2,
            epsilon: self.epsilon / 2.0,
            ..self.clone()
        }
    }
}

/// Value of a punctured-torus integral with the part recovered from the
/// excluded cube.
#[derive(Clone, Copy, Debug)]
pub struct ShellSum {
    pub value: f64,
    pub tail: f64,
}

/// Integrates `f` over `[-pi, pi]^d` (not normalized). `frequency[i]` bounds
/// the oscillation rate of `f` along axis i and adds points on wide cells.
pub fn integrate_torus<F>(
    f: &F,
    dim: usize,
    epsilon: f64,
    resolution: usize,
    frequency: &[f64],
) -> Result<ShellSum>
where
    F: Fn(&[f64]) -> f64,
{
    assert!((1..=3).contains(&dim));
    let mut h = std::f64::consts::PI;
    let mut total = 0.0;
    let mut shells: Vec<f64> = Vec::new();
    while h > epsilon || shells.len() < 3 {
        let s = shell(f, dim, h, resolution, frequency);
        total += s;
        shells.push(s);
        h /= 2.0;
    }
    let k = shells.len();
    let (last, prev) = (shells[k - 1], shells[k - 2]);
    let tail = if last == 0.0 {
        0.0
    } else {
        let rho = last / prev;
        if !(rho.abs() < 0.9) || !rho.is_finite() {
            return Err(Error::Numerical(format!(
                "integrand is not integrable at the origin (shell ratio {rho})"
            )));
        }
        last * rho / (1.0 - rho)
    };
    Ok(ShellSum {
        value: total + tail,
        tail,
    })
}

// Oscillation handled per cell: at most this much phase per Gauss-Legendre
// panel, splitting wide cells into panels beyond that.
const PHASE_PER_PANEL: f64 = 48.0;

fn shell<F>(f: &F, dim: usize, h: f64, resolution: usize, frequency: &[f64]) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let side = h / 2.0;
    let mut pieces = [1usize; 3];
    let mut counts = [resolution; 3];
    for i in 0..dim {
        let phase = frequency.get(i).copied().unwrap_or(0.0) * side;
        pieces[i] = (phase / PHASE_PER_PANEL).ceil().max(1.0) as usize;
        let extra = (0.5 * phase / pieces[i] as f64).ceil() as usize;
        counts[i] = (resolution + extra).min(MAX_CACHED);
    }
    let rules: Vec<&(Vec<f64>, Vec<f64>)> = (0..dim).map(|i| cached_rule(counts[i])).collect();
    // node positions along each axis relative to a cell's lower corner
    let offsets: Vec<Vec<(f64, f64)>> = (0..dim)
        .map(|i| {
            let panel = side / pieces[i] as f64;
            let (x, w) = rules[i];
            (0..pieces[i])
                .flat_map(|p| {
                    x.iter().zip(w).map(move |(x, w)| {
                        (p as f64 * panel + panel * (x + 1.0) / 2.0, w * panel / 2.0)
                    })
                })
                .collect()
        })
        .collect();
    let cells = 4usize.pow(dim as u32);
    let mut acc = 0.0;
    let mut t = [0.0f64; 3];
    for c in 0..cells {
        let mut idx = [0usize; 3];
        let mut rem = c;
        for slot in idx.iter_mut().take(dim) {
            *slot = rem % 4;
            rem /= 4;
        }
        if idx[..dim].iter().all(|&i| i == 1 || i == 2) {
            continue;
        }
        let mut lo = [0.0f64; 3];
        for i in 0..dim {
            lo[i] = -h + idx[i] as f64 * side;
        }
        let mut cell = 0.0;
        match dim {
            1 => {
                for &(x, w) in &offsets[0] {
                    t[0] = lo[0] + x;
                    cell += w * f(&t[..1]);
                }
            }
            2 => {
                for &(x0, w0) in &offsets[0] {
                    t[0] = lo[0] + x0;
                    let mut row = 0.0;
                    for &(x1, w1) in &offsets[1] {
                        t[1] = lo[1] + x1;
                        row += w1 * f(&t[..2]);
                    }
                    cell += w0 * row;
                }
            }
            _ => {
                for &(x0, w0) in &offsets[0] {
                    t[0] = lo[0] + x0;
                    let mut plane = 0.0;
                    for &(x1, w1) in &offsets[1] {
                        t[1] = lo[1] + x1;
                        let mut row = 0.0;
                        for &(x2, w2) in &offsets[2] {
                            t[2] = lo[2] + x2;
                            row += w2 * f(&t[..3]);
                        }
                        plane += w1 * row;
                    }
                    cell += w0 * plane;
                }
            }
        }
        acc += cell;
    }
    acc
}

/// Normalized torus average `(2 pi)^-d * integral`, refined until two
/// successive passes agree. Returns (value, error estimate), where the error
/// is twice the last change plus a round-off floor.
pub fn torus_average<F>(
    f: &F,
    dim: usize,
    settings: &QuadratureSettings,
    frequency: &[f64],
    min_epsilon: Option<f64>,
) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> f64,
{
    let norm = (2.0 * std::f64::consts::PI).powi(dim as i32);
    let mut s = settings.clone();
    if let Some(e) = min_epsilon {
        s.epsilon = s.epsilon.min(e);
    }
    let mut value = integrate_torus(f, dim, s.epsilon, s.resolution, frequency)?.value / norm;
    let mut err = f64::INFINITY;
    for _ in 0..s.max_depth.max(1) {
        s = s.refined();
        let next = integrate_torus(f, dim, s.epsilon, s.resolution, frequency)?.value / norm;
        err = 2.0 * (next - value).abs() + 1e-12 * next.abs().max(1e-12);
        value = next;
        if err < s.tolerance * value.abs() {
            break;
        }
    }
    Ok((value, err))
}
