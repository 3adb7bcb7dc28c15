//! Wigner small-d functions `d^j_{m1 m2}(β)`.
//!
//! The two lowest admissible `j` come from the explicit sum (at most two
//! terms there), higher `j` from the three-term upward recurrence, which is
//! stable in the direction of increasing `j`.

use super::halfint::HalfInt;

fn ln_factorial(n: i32) -> f64 {
    debug_assert!(n >= 0);
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Direct evaluation from the Wigner sum. Only used for small sums.
fn explicit(j: HalfInt, m1: HalfInt, m2: HalfInt, beta: f64) -> f64 {
    let h = |x: HalfInt| x.as_integer().expect("integral combination");
    let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    let jpm1 = h(j + m1);
    let jmm1 = h(j - m1);
    let jpm2 = h(j + m2);
    let jmm2 = h(j - m2);
    let d = h(m1 - m2);
    let pref = 0.5 * (ln_factorial(jpm1) + ln_factorial(jmm1) + ln_factorial(jpm2) + ln_factorial(jmm2));
    let kmin = 0.max(-d);
    let kmax = jpm2.min(jmm1);
    let mut total = 0.0;
    for k in kmin..=kmax {
        let log_den = ln_factorial(jpm2 - k) + ln_factorial(k) + ln_factorial(d + k) + ln_factorial(jmm1 - k);
        let sign = if (d + k).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let pc = j.twice() - d - 2 * k;
        let ps = d + 2 * k;
        total += sign * (pref - log_den).exp() * c.powi(pc) * s.powi(ps);
    }
    total
}

/// `d^j_{m1 m2}(β)` for `j = j0, j0 + 1, ..., jmax` where `j0 = max(|m1|, |m2|)`.
///
/// Returns an empty vector when `jmax < j0`.
pub fn wigner_d_ladder(m1: HalfInt, m2: HalfInt, jmax: HalfInt, beta: f64) -> Vec<f64> {
    assert!(m1.same_parity(m2), "m1 and m2 must differ by an integer");
    let j0 = m1.abs().max(m2.abs());
    if jmax < j0 {
        return Vec::new();
    }
    let n = ((jmax - j0).twice() / 2 + 1) as usize;
    let mut out = Vec::with_capacity(n);
    out.push(explicit(j0, m1, m2, beta));
    if n > 1 {
        out.push(explicit(j0 + HalfInt::ONE, m1, m2, beta));
    }
    let x = beta.cos();
    let (a, b) = (m1.value(), m2.value());
    for idx in 2..n {
        let j = j0.value() + idx as f64;
        let lhs = (j - 1.0) * ((j * j - a * a) * (j * j - b * b)).sqrt();
        let jm = j - 1.0;
        let t1 = (2.0 * j - 1.0) * (j * (j - 1.0) * x - a * b) * out[idx - 1];
        let t2 = j * ((jm * jm - a * a) * (jm * jm - b * b)).sqrt() * out[idx - 2];
        out.push((t1 - t2) / lhs);
    }
    out
}

/// Single value `d^j_{m1 m2}(β)`; zero outside `|m| ≤ j`.
pub fn wigner_d(j: HalfInt, m1: HalfInt, m2: HalfInt, beta: f64) -> f64 {
    if m1.abs() > j || m2.abs() > j || !j.same_parity(m1) || !j.same_parity(m2) {
        return 0.0;
    }
    *wigner_d_ladder(m1, m2, j, beta).last().unwrap()
}
