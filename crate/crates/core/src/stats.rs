//! Ensemble statistics with order-fixed compensated summation.

use serde::{Deserialize, Serialize};

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sum {
    total: f64,
    carry: f64,
}

impl Sum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.total + x;
        if self.total.abs() >= x.abs() {
            self.carry += (self.total - t) + x;
        } else {
            self.carry += (x - t) + self.total;
        }
        self.total = t;
    }

    pub fn value(&self) -> f64 {
        self.total + self.carry
    }
}

pub fn sum<'a, I: IntoIterator<Item = &'a f64>>(xs: I) -> f64 {
    let mut s = Sum::default();
    for x in xs {
        s.add(*x);
    }
    s.value()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    /// Unbiased sample variance (0 for a single sample).
    pub variance: f64,
    pub stderr: f64,
    pub count: u64,
}

impl Moments {
    /// Two-pass mean and variance, summed in the given order. The mean is
    /// accumulated as a shift from the first sample, so constant data has an
    /// exact mean.
    pub fn of(xs: &[f64]) -> Moments {
        let n = xs.len();
        if n == 0 {
            return Moments {
                mean: f64::NAN,
                variance: f64::NAN,
                stderr: f64::NAN,
                count: 0,
            };
        }
        let x0 = xs[0];
        let mut shift = Sum::default();
        for x in xs {
            shift.add(x - x0);
        }
        let mean = x0 + shift.value() / n as f64;
        let mut ss = Sum::default();
        for x in xs {
            ss.add((x - mean) * (x - mean));
        }
        let variance = if n > 1 { ss.value() / (n - 1) as f64 } else { 0.0 };
        Moments {
            mean,
            variance,
            stderr: (variance / n as f64).sqrt(),
            count: n as u64,
        }
    }
}

/// Two-sample Kolmogorov-Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Least-squares line: slope, intercept, slope stderr, residual norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub residual: f64,
}

pub fn least_squares(x: &[f64], y: &[f64]) -> Line {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = sum(x) / n;
    let my = sum(y) / n;
    let mut sxx = Sum::default();
    let mut sxy = Sum::default();
    for (a, b) in x.iter().zip(y) {
        sxx.add((a - mx) * (a - mx));
        sxy.add((a - mx) * (b - my));
    }
    let (sxx, sxy) = (sxx.value(), sxy.value());
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = sum(&x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .collect::<Vec<_>>());
    let slope_stderr = if x.len() > 2 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Line {
        slope,
        intercept,
        slope_stderr,
        residual: rss.sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_is_order_exact() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(sum(&xs), 2.0);
    }

    #[test]
    fn moments_unbiased() {
        let m = Moments::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.variance - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(Moments::of(&[7.0]).variance, 0.0);
        let x = 2.0 / 2250.0;
        assert_eq!(Moments::of(&[x, x, x]).mean, x);
    }

    #[test]
    fn ks_extremes() {
        assert_eq!(ks_distance(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(ks_distance(&[0.0, 0.0], &[1.0, 1.0]), 1.0);
        assert!((ks_distance(&[0.0, 1.0], &[1.0, 1.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let l = least_squares(&x, &y);
        assert!((l.slope + 0.5).abs() < 1e-15 && (l.intercept - 3.0).abs() < 1e-14);
        assert!(l.residual < 1e-14);
    }
}
