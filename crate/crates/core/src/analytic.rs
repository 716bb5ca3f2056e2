//! Constants of lattice walks from their characteristic function: Green
//! function, potential kernel, two-point taboo ratios, the no-return
//! constant gamma_d and the hitting constants c_j, d_j.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::law::{LawDiagnostics, StepLaw};
use crate::quadrature::{torus_average, QuadratureSettings};
use crate::stats::least_squares;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Quadrature,
    ClosedForm,
    Series,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Quadrature => "quadrature",
            Method::ClosedForm => "closed-form",
            Method::Series => "series",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticResult {
    pub value: f64,
    pub error: f64,
    pub method: Method,
}

impl AnalyticResult {
    fn quadrature((value, error): (f64, f64)) -> Self {
        AnalyticResult {
            value,
            error,
            method: Method::Quadrature,
        }
    }

    pub fn exact(value: f64) -> Self {
        AnalyticResult {
            value,
            error: 0.0,
            method: Method::ClosedForm,
        }
    }

    /// Whether `x` lies within `error + slack` of the value.
    pub fn agrees_with(&self, x: f64, slack: f64) -> bool {
        (self.value - x).abs() <= self.error + slack
    }
}

/// Dyadic grid `2^lo ..= 2^hi` used for the return-sum slope.
pub const GAMMA_FIT_LOG2: (u32, u32) = (10, 20);

struct Lattice<'a> {
    law: &'a StepLaw,
    dim: usize,
    diag: LawDiagnostics,
}

impl<'a> Lattice<'a> {
    fn new(law: &'a StepLaw) -> Result<Self> {
        let dim = law.group().kind.lattice_dim().ok_or_else(|| {
            Error::Unsupported(format!("Fourier constants on {}", law.group().kind))
        })?;
        Ok(Lattice {
            law,
            dim,
            diag: law.diagnose(),
        })
    }

    fn coords(&self, g: &GroupElement) -> Result<Vec<f64>> {
        match g.as_zd() {
            Some(p) if p.dim() == self.dim => Ok(p.coords().iter().map(|&c| c as f64).collect()),
            _ => Err(Error::MixedGroups {
                left: self.law.group().kind.to_string(),
                right: g.kind().to_string(),
            }),
        }
    }

    #[inline]
    fn w(&self, t: &[f64]) -> Complex64 {
        self.law
            .one_minus_char_fn(t)
            .expect("dimension checked at construction")
    }

    // 1/(2|mu|) from the Abel limit at t = 0, present only for drifting
    // walks on Z.
    fn drift_delta(&self) -> f64 {
        if self.dim != 1 {
            return 0.0;
        }
        match &self.diag.mean {
            Some(m) if m[0].abs() > 1e-12 => 0.5 / m[0].abs(),
            _ => 0.0,
        }
    }

    fn drift(&self) -> f64 {
        self.diag
            .mean
            .as_ref()
            .map(|m| m.iter().map(|x| x.abs()).fold(0.0, f64::max))
            .unwrap_or(0.0)
    }

    // Smallest radius needed to resolve phi^m: below it m |1 - phi| < 1e-2.
    fn time_scale(&self, m: f64) -> f64 {
        let mut h = std::f64::consts::PI;
        loop {
            let worst = (0..self.dim)
                .map(|i| {
                    let mut t = vec![0.0; self.dim];
                    t[i] = h;
                    self.w(&t).norm()
                })
                .fold(0.0, f64::max);
            if m * worst < 1e-2 || h < 1e-12 {
                return h;
            }
            h /= 2.0;
        }
    }

    fn require_transient(&self) -> Result<()> {
        if self.diag.is_transient() {
            Ok(())
        } else {
            Err(Error::Recurrent)
        }
    }

    fn require_recurrent(&self, what: &str) -> Result<()> {
        if self.diag.is_transient() {
            Err(Error::Transient(format!(
                "{what} needs a recurrent walk; use the Green function instead"
            )))
        } else {
            Ok(())
        }
    }
}

#[inline]
fn phase(x: &[f64], t: &[f64]) -> f64 {
    x.iter().zip(t).map(|(a, b)| a * b).sum()
}

// ln(1 - w) without cancellation for small w.
#[inline]
fn ln_one_minus(w: Complex64) -> Complex64 {
    let re = 0.5 * (-2.0 * w.re + w.norm_sqr()).ln_1p();
    Complex64::new(re, (-w.im).atan2(1.0 - w.re))
}

#[inline]
fn expm1(z: Complex64) -> Complex64 {
    let s = (z.im / 2.0).sin();
    Complex64::new(
        z.re.exp_m1() * z.im.cos() - 2.0 * s * s,
        z.re.exp() * z.im.sin(),
    )
}

/// `G(g) = sum_{n >= 0} P(S_n = g)` for a transient lattice walk.
pub fn green(law: &StepLaw, g: &GroupElement, settings: &QuadratureSettings) -> Result<AnalyticResult> {
    let lat = Lattice::new(law)?;
    lat.require_transient()?;
    let x = lat.coords(g)?;
    let f = |t: &[f64]| (Complex64::from_polar(1.0, -phase(&x, t)) / lat.w(t)).re;
    let freq: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let eps = 1e-2 / (freq.iter().cloned().fold(1.0, f64::max));
    let (v, e) = torus_average(&f, lat.dim, settings, &freq, Some(eps))?;
    Ok(AnalyticResult::quadrature((v + lat.drift_delta(), e)))
}

/// `sum_{n > horizon} P(S_n = g)`: the visits a walk truncated at `horizon`
/// cannot see.
pub fn green_tail(
    law: &StepLaw,
    g: &GroupElement,
    horizon: u64,
    settings: &QuadratureSettings,
) -> Result<AnalyticResult> {
    let lat = Lattice::new(law)?;
    lat.require_transient()?;
    let x = lat.coords(g)?;
    let m = (horizon + 1) as f64;
    let f = |t: &[f64]| {
        let w = lat.w(t);
        let pow = (ln_one_minus(w) * m).exp();
        (Complex64::from_polar(1.0, -phase(&x, t)) * pow / w).re
    };
    let drift = lat.drift();
    let freq: Vec<f64> = x.iter().map(|v| v.abs() + m * drift).collect();
    let eps = lat
        .time_scale(m)
        .min(1e-2 / freq.iter().cloned().fold(1.0, f64::max));
    let (v, e) = torus_average(&f, lat.dim, settings, &freq, Some(eps))?;
    Ok(AnalyticResult::quadrature((v + lat.drift_delta(), e)))
}

/// `sum_{k=0}^{n} P(S_k = g)`, for any lattice walk.
pub fn partial_green(
    law: &StepLaw,
    g: &GroupElement,
    n: u64,
    settings: &QuadratureSettings,
) -> Result<AnalyticResult> {
    let lat = Lattice::new(law)?;
    let x = lat.coords(g)?;
    let m = (n + 1) as f64;
    let f = |t: &[f64]| {
        let w = lat.w(t);
        let ratio = -expm1(ln_one_minus(w) * m) / w;
        (Complex64::from_polar(1.0, -phase(&x, t)) * ratio).re
    };
    let drift = lat.drift();
    let freq: Vec<f64> = x.iter().map(|v| v.abs() + m * drift).collect();
    let eps = lat
        .time_scale(m)
        .min(1e-2 / freq.iter().cloned().fold(1.0, f64::max));
    torus_average(&f, lat.dim, settings, &freq, Some(eps)).map(AnalyticResult::quadrature)
}

/// `a(j) = (2 pi)^-d integral Re[(1 - e^{i<j,t>}) / (1 - phi(t))] dt` for a
/// recurrent lattice walk.
pub fn potential_kernel(
    law: &StepLaw,
    j: &GroupElement,
    settings: &QuadratureSettings,
) -> Result<AnalyticResult> {
    let lat = Lattice::new(law)?;
    lat.require_recurrent("the potential kernel")?;
    let x = lat.coords(j)?;
    if x.iter().all(|&v| v == 0.0) {
        return Ok(AnalyticResult::exact(0.0));
    }
    let f = |t: &[f64]| ((Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, phase(&x, t))) / lat.w(t)).re;
    let freq: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let eps = 1e-2 / freq.iter().cloned().fold(1.0, f64::max);
    torus_average(&f, lat.dim, settings, &freq, Some(eps)).map(AnalyticResult::quadrature)
}

/// `(g_{0,j}(j), g_{0,j}(0)) = (a(j), a(-j)) / (a(j) + a(-j))`.
pub fn two_point_taboo(
    law: &StepLaw,
    j: &GroupElement,
    settings: &QuadratureSettings,
) -> Result<(AnalyticResult, AnalyticResult)> {
    if j.is_identity() {
        return Err(Error::Domain("the two-point taboo set needs j != 0".into()));
    }
    let a = potential_kernel(law, j, settings)?;
    let b = potential_kernel(law, &crate::group::inverse(j), settings)?;
    let s = a.value + b.value;
    if !(s > 0.0) {
        return Err(Error::Numerical(format!("a(j) + a(-j) = {s} is not positive")));
    }
    // d(a/(a+b)) = (b da - a db)/(a+b)^2
    let err = (b.value * a.error + a.value * b.error) / (s * s);
    let mk = |v: f64| AnalyticResult {
        value: v,
        error: err,
        method: Method::Quadrature,
    };
    Ok((mk(a.value / s), mk(b.value / s)))
}

/// Partial return sums `U(n) = sum_{k<=n} P(S_k = 0)` on a grid.
pub fn return_sums(
    law: &StepLaw,
    grid: &[u64],
    settings: &QuadratureSettings,
) -> Result<Vec<(u64, AnalyticResult)>> {
    let origin = law.group().identity();
    grid.iter()
        .map(|&n| Ok((n, partial_green(law, &origin, n, settings)?)))
        .collect()
}

/// `gamma_d` in `P(S_k != 0, 1 <= k <= n) ~ gamma_d / log n`, as the
/// reciprocal slope of `U(n)` against `log n`.
pub fn gamma_constant(law: &StepLaw, settings: &QuadratureSettings) -> Result<AnalyticResult> {
    let grid: Vec<u64> = (GAMMA_FIT_LOG2.0..=GAMMA_FIT_LOG2.1).map(|k| 1u64 << k).collect();
    gamma_constant_on(law, settings, &grid)
}

pub fn gamma_constant_on(
    law: &StepLaw,
    settings: &QuadratureSettings,
    grid: &[u64],
) -> Result<AnalyticResult> {
    let lat = Lattice::new(law)?;
    lat.require_recurrent("gamma_d")?;
    if !lat.diag.has_log_return_regime(lat.dim) {
        return Err(Error::Domain(
            "gamma_d needs a centered planar walk with finite nonsingular covariance or a Cauchy-domain walk on Z"
                .into(),
        ));
    }
    if grid.len() < 4 {
        return Err(Error::Usage("the gamma fit grid needs at least 4 points".into()));
    }
    let sums = return_sums(law, grid, settings)?;
    let x: Vec<f64> = sums.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let y: Vec<f64> = sums.iter().map(|(_, r)| r.value).collect();
    let fit = least_squares(&x, &y);
    let (slope, se) = (fit.slope, fit.slope_stderr);
    let half = x.len() / 2;
    let slope_hi = least_squares(&x[half..], &y[half..]).slope;
    let quad_err = sums.iter().map(|(_, r)| r.error).fold(0.0, f64::max) * 2.0
        / (x[x.len() - 1] - x[0]);
    let gamma = 1.0 / slope;
    let err = (1.0 / slope_hi - gamma).abs() + (se + quad_err) / (slope * slope);
    Ok(AnalyticResult {
        value: gamma,
        error: err,
        method: Method::Series,
    })
}

/// `(c_j, d_j)` with `c_j = gamma_d a(-j)/(a(j) + a(-j))` (avoid {0, j}) and
/// `d_j = gamma_d a(-j)` (avoid {j}).
pub fn hitting_constants(
    law: &StepLaw,
    j: &GroupElement,
    settings: &QuadratureSettings,
) -> Result<(AnalyticResult, AnalyticResult)> {
    if j.is_identity() {
        return Err(Error::Domain("hitting constants need j != 0".into()));
    }
    let gamma = gamma_constant(law, settings)?;
    let (_, g0) = two_point_taboo(law, j, settings)?;
    let am = potential_kernel(law, &crate::group::inverse(j), settings)?;
    let c = AnalyticResult {
        value: gamma.value * g0.value,
        error: gamma.error * g0.value + gamma.value * g0.error,
        method: Method::Series,
    };
    let d = AnalyticResult {
        value: gamma.value * am.value,
        error: gamma.error * am.value + gamma.value * am.error,
        method: Method::Series,
    };
    Ok((c, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupDescriptor;
    use statrs::function::gamma::gamma;
    use std::f64::consts::PI;

    fn s() -> QuadratureSettings {
        QuadratureSettings::default()
    }

    fn watson_closed_form() -> f64 {
        6f64.sqrt() / (32.0 * PI.powi(3))
            * gamma(1.0 / 24.0)
            * gamma(5.0 / 24.0)
            * gamma(7.0 / 24.0)
            * gamma(11.0 / 24.0)
    }

    #[test]
    fn watson_integral() {
        let law = StepLaw::simple(GroupDescriptor::lattice(3));
        let g0 = green(&law, &GroupElement::zd(&[0, 0, 0]), &s()).unwrap();
        let oracle = watson_closed_form();
        assert!((oracle - 1.516386).abs() < 1e-6);
        assert!((g0.value - oracle).abs() < 1e-4, "{g0:?}");
        assert!(g0.error < 1e-4);
        let g1 = green(&law, &GroupElement::zd(&[1, 0, 0]), &s()).unwrap();
        // G(0) = 1 + average of G over the neighbours = 1 + G(e1)
        assert!((g1.value - (oracle - 1.0)).abs() < 1e-4, "{g1:?}");
    }

    #[test]
    fn deterministic_walk_green() {
        let law = StepLaw::deterministic(GroupElement::zd(&[1]));
        for k in -3..=5 {
            let g = green(&law, &GroupElement::zd(&[k]), &s()).unwrap();
            let expect = if k >= 0 { 1.0 } else { 0.0 };
            assert!((g.value - expect).abs() < 1e-8, "k={k}: {g:?}");
        }
    }

    #[test]
    fn green_rejects_recurrent() {
        let law = StepLaw::simple(GroupDescriptor::lattice(2));
        assert!(matches!(
            green(&law, &GroupElement::zd(&[0, 0]), &s()),
            Err(Error::Recurrent)
        ));
        let f2 = StepLaw::simple(GroupDescriptor::new(crate::group::GroupKind::Free2));
        assert!(matches!(
            green(&f2, &GroupElement::word("a"), &s()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn potential_kernel_simple_walk_on_z() {
        let law = StepLaw::simple(GroupDescriptor::lattice(1));
        assert_eq!(potential_kernel(&law, &GroupElement::zd(&[0]), &s()).unwrap().value, 0.0);
        for j in 1..=10 {
            let a = potential_kernel(&law, &GroupElement::zd(&[j]), &s()).unwrap();
            assert!((a.value - j as f64).abs() < 1e-6, "j={j}: {a:?}");
        }
    }

    #[test]
    fn potential_kernel_simple_walk_on_z2() {
        let law = StepLaw::simple(GroupDescriptor::lattice(2));
        let a = potential_kernel(&law, &GroupElement::zd(&[1, 0]), &s()).unwrap();
        let b = potential_kernel(&law, &GroupElement::zd(&[0, -1]), &s()).unwrap();
        // mean value identity: the average of a over the neighbours of 0 is 1
        assert!(((a.value + b.value) / 2.0 - 1.0).abs() < 1e-4, "{a:?} {b:?}");
        assert!((a.value - 1.0).abs() < 1e-4);
        // a(1,1) = 4/pi
        let d = potential_kernel(&law, &GroupElement::zd(&[1, 1]), &s()).unwrap();
        assert!((d.value - 4.0 / PI).abs() < 1e-4, "{d:?}");
        assert!(matches!(
            potential_kernel(&StepLaw::simple(GroupDescriptor::lattice(3)), &GroupElement::zd(&[1, 0, 0]), &s()),
            Err(Error::Transient(_))
        ));
    }

    #[test]
    fn two_point_symmetric() {
        let law = StepLaw::simple(GroupDescriptor::lattice(1));
        let (a, b) = two_point_taboo(&law, &GroupElement::zd(&[3]), &s()).unwrap();
        assert_eq!((a.value, b.value), (0.5, 0.5));
        assert!(two_point_taboo(&law, &GroupElement::zd(&[0]), &s()).is_err());
    }

    #[test]
    fn refinement_stays_within_error() {
        let law = StepLaw::simple(GroupDescriptor::lattice(3));
        let g = GroupElement::zd(&[2, 1, 0]);
        let base = green(&law, &g, &s()).unwrap();
        let finer = green(&law, &g, &s().refined()).unwrap();
        assert!((base.value - finer.value).abs() <= base.error, "{base:?} {finer:?}");
    }
}
