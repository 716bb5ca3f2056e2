//! Special functions needed by the zeta step laws: the Riemann/Hurwitz zeta
//! function by Euler-Maclaurin summation and the cosine series
//! `D_s(t) = sum_{k>=1} (1 - cos kt) / k^s` through the polylogarithm expansion.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

// B_2, B_4, ..., B_20
const BERNOULLI_EVEN: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

/// Hurwitz zeta `sum_{k >= a} k^-s` for integer `a >= 1`, valid for s > 0, s != 1
/// (the Euler-Maclaurin remainder is an analytic continuation below s = 1).
pub fn hurwitz_zeta(s: f64, a: u64) -> f64 {
    assert!(a >= 1, "Hurwitz offset must be positive");
    assert!((s - 1.0).abs() > 1e-12, "pole at s = 1");
    let m = a.max(32);
    let mut head = 0.0;
    let mut comp = 0.0;
    // sum from the small end is fine here, terms are O(1) at most
    for k in a..m {
        let y = (k as f64).powf(-s) - comp;
        let t = head + y;
        comp = (t - head) - y;
        head = t;
    }
    let mf = m as f64;
    let mut tail = mf.powf(1.0 - s) / (s - 1.0) + 0.5 * mf.powf(-s);
    // B_{2j}/(2j)! * s(s+1)...(s+2j-2) * m^(-s-2j+1)
    let mut rising = s;
    let mut fact = 2.0;
    let mut power = mf.powf(-s - 1.0);
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let jj = (j + 1) as f64;
        tail += b / fact * rising * power;
        rising *= (s + 2.0 * jj - 1.0) * (s + 2.0 * jj);
        fact *= (2.0 * jj + 1.0) * (2.0 * jj + 2.0);
        power /= mf * mf;
    }
    head + tail
}

/// Riemann zeta on the real line, s != 1.
pub fn zeta(s: f64) -> f64 {
    if s == 0.0 {
        return -0.5;
    }
    if s > 0.0 {
        return hurwitz_zeta(s, 1);
    }
    if s.fract() == 0.0 && (s as i64) % 2 == 0 {
        return 0.0;
    }
    // functional equation
    let one_minus = 1.0 - s;
    2f64.powf(s) * PI.powf(s - 1.0) * (PI * s / 2.0).sin() * gamma(one_minus) * zeta(one_minus)
}

/// `sum_{k>=1} (1 - cos(k t)) / k^s` for `s` in [2, 3] and `|t| <= pi`.
///
/// Uses the expansion of Li_s(e^{it}) around t = 0, so the result keeps full
/// relative precision as t -> 0 (no `zeta(s) - ...` cancellation).
pub fn cosine_deficit(s: f64, t: f64) -> f64 {
    assert!((2.0..=3.0).contains(&s), "exponent must lie in [2, 3]");
    let t = t.abs();
    assert!(t <= PI + 1e-12, "t must lie in [-pi, pi]");
    if t == 0.0 {
        return 0.0;
    }
    if s == 2.0 {
        return PI * t / 2.0 - t * t / 4.0;
    }
    let t2 = t * t;
    let mut sum;
    let mut m_start = 1;
    if s == 3.0 {
        // log term from the k = 2 pole: Re[-(it)^2/2 (H_2 - ln(-it))]
        sum = t2 / 2.0 * (1.5 - t.ln());
        m_start = 2;
    } else {
        sum = -gamma(1.0 - s) * (PI * (s - 1.0) / 2.0).cos() * t.powf(s - 1.0);
    }
    // - sum_m zeta(s - 2m) (-1)^m t^{2m} / (2m)!
    let mut power = 1.0;
    let mut fact = 1.0;
    for m in 1..=60 {
        let k = 2 * m;
        power *= t2;
        fact *= ((k - 1) * k) as f64;
        if m < m_start {
            continue;
        }
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let term = zeta(s - k as f64) * sign * power / fact;
        sum -= term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) && m > 4 {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_known_values() {
        assert!((zeta(2.0) - PI * PI / 6.0).abs() < 1e-14);
        assert!((zeta(4.0) - PI.powi(4) / 90.0).abs() < 1e-14);
        assert!((zeta(3.0) - 1.202_056_903_159_594_3).abs() < 1e-14);
        assert!((zeta(2.5) - 1.341_487_257_250_917_2).abs() < 1e-14);
        assert!((zeta(0.5) + 1.460_354_508_809_586_8).abs() < 1e-12);
        assert!((zeta(-1.0) + 1.0 / 12.0).abs() < 1e-12);
        assert!((zeta(-3.0) - 1.0 / 120.0).abs() < 1e-12);
        assert_eq!(zeta(-6.0), 0.0);
        assert!((zeta(-7.0) - 1.0 / 240.0).abs() < 1e-10);
        assert!(zeta(-2.0).abs() < 1e-12);
    }

    #[test]
    fn hurwitz_tail_matches_direct_sum() {
        let s = 2.5;
        let direct: f64 = (1..10).map(|k| (k as f64).powf(-s)).sum();
        assert!((zeta(s) - hurwitz_zeta(s, 10) - direct).abs() < 1e-14);
    }

    fn brute_deficit(s: f64, t: f64) -> f64 {
        // explicit sum to N plus an Euler-Maclaurin-free bound: the remainder is
        // tiny once N^(1-s) is below the tolerance we test at
        let n = 2_000_000u64;
        let mut acc = 0.0;
        for k in (1..=n).rev() {
            let kf = k as f64;
            acc += (1.0 - (kf * t).cos()) / kf.powf(s);
        }
        // average tail of (1 - cos) is 1
        acc + hurwitz_zeta(s, n + 1)
    }

    #[test]
    fn cosine_deficit_matches_brute_force() {
        for &s in &[2.3, 2.5, 2.8, 3.0] {
            for &t in &[0.01, 0.3, 1.0, 2.5, PI] {
                let fast = cosine_deficit(s, t);
                let slow = brute_deficit(s, t);
                let tol = 1e-7 * slow.abs().max(1e-3);
                assert!((fast - slow).abs() < tol, "s={s} t={t}: {fast} vs {slow}");
            }
        }
    }

    #[test]
    fn cosine_deficit_cauchy_closed_form_is_continuous() {
        let t = 0.7;
        let a = cosine_deficit(2.0, t);
        let b = cosine_deficit(2.0 + 1e-7, t);
        assert!((a - b).abs() < 1e-6);
    }
}
