//! Bessel functions of the first kind `J_n(x)` for integer order, and the
//! positive zeros of `J₁`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 100;
pub const MAX_ARG: f64 = 50.0;
/// Below this argument the ascending series is used.
const SERIES_LIMIT: f64 = 5.0;

/// `J_0(x), …, J_nmax(x)` for `0 ≤ x ≤ 50`, `nmax ≤ 100`.
pub fn bessel_sequence(nmax: usize, x: f64) -> Result<Vec<f64>> {
    if nmax > MAX_ORDER {
        return Err(Error::OutOfRange { what: "Bessel order", value: nmax as f64, range: "0..=100" });
    }
    if !(0.0..=MAX_ARG).contains(&x) {
        return Err(Error::OutOfRange { what: "Bessel argument", value: x, range: "[0, 50]" });
    }
    if x == 0.0 {
        let mut v = vec![0.0; nmax + 1];
        v[0] = 1.0;
        return Ok(v);
    }
    if x <= SERIES_LIMIT {
        return Ok((0..=nmax).map(|n| ascending_series(n, x)).collect());
    }
    Ok(miller(nmax, x))
}

pub fn bessel_j(n: usize, x: f64) -> Result<f64> {
    bessel_sequence(n, x).map(|v| v[n])
}

/// `Σ_k (−1)^k (x/2)^{2k+n} / (k! (k+n)!)`.
fn ascending_series(n: usize, x: f64) -> f64 {
    let h = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=n {
        term *= h / k as f64;
    }
    let mut sum = term;
    let h2 = h * h;
    for k in 1..200 {
        term *= -h2 / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Downward recurrence `J_{k−1} = (2k/x) J_k − J_{k+1}` from far above the
/// needed order, normalized with `J₀ + 2Σ J_{2k} = 1`.
fn miller(nmax: usize, x: f64) -> Vec<f64> {
    let top = nmax.max(x as usize) + 40 + (40.0 * x).sqrt() as usize;
    let top = top + (top & 1);
    let mut out = vec![0.0; nmax + 1];
    let (mut next, mut cur) = (0.0f64, 1e-300f64);
    let mut norm = 0.0;
    for k in (1..=top).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        // cur now holds J_{k-1} up to scale
        let order = k - 1;
        if order <= nmax {
            out[order] = cur;
        }
        if order % 2 == 0 && order > 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            let s = 1e-250;
            cur *= s;
            next *= s;
            norm *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    norm += cur;
    out.iter_mut().for_each(|v| *v /= norm);
    out
}

/// First `count` positive zeros of `J₁`, bisected to `1e-10` within
/// `[kπ, (k+1)π]`.
pub fn j1_zeros(count: usize) -> Result<Vec<f64>> {
    let j1 = |x: f64| bessel_j(1, x);
    let mut out = Vec::with_capacity(count);
    for k in 1..=count {
        let (mut a, mut b) = (k as f64 * PI, (k + 1) as f64 * PI);
        let mut fa = j1(a)?;
        if fa * j1(b)? > 0.0 {
            return Err(Error::OutOfRange { what: "J1 zero index", value: k as f64, range: "bracket lost" });
        }
        while b - a > 1e-10 {
            let mid = 0.5 * (a + b);
            let fm = j1(mid)?;
            if fm == 0.0 {
                a = mid;
                b = mid;
                break;
            }
            if (fm > 0.0) == (fa > 0.0) {
                a = mid;
                fa = fm;
            } else {
                b = mid;
            }
        }
        out.push(0.5 * (a + b));
    }
    Ok(out)
}
