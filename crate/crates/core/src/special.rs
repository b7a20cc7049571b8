//! Cylinder functions of integer order 0..=2 for complex argument, and the
//! real exponential integrals used by the Ewald split.
//!
//! Region choice for `J`/`Y`: ascending series for `|z| <= 8`; Miller
//! backward recurrence plus Neumann series for `8 < |z| <= 20`; beyond that
//! the ascending series while it loses few digits (`|z| - |Im z| <= 8`: the
//! terms peak near `e^{|z|}` while the sum is of size `e^{|Im z|}`) and Hankel
//! asymptotics otherwise.  `H^(1)` in the upper half plane is computed from the
//! `K_n` integral instead of `J + iY`, which would cancel catastrophically.

use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const MAX_ARG: f64 = 50.0;
const I: C64 = C64 { re: 0.0, im: 1.0 };

fn check(n: u32, z: C64) -> Result<()> {
    if n > 2 {
        return Err(Error::Domain(format!("order {n} not supported (0..=2)")));
    }
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Domain(format!("non-finite argument {z}")));
    }
    if z.norm() > MAX_ARG {
        return Err(Error::Domain(format!("|z| = {} exceeds {MAX_ARG}", z.norm())));
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Region {
    Series,
    Miller,
    Asymptotic,
}

fn region(z: C64) -> Region {
    let r = z.norm();
    if r <= 8.0 {
        Region::Series
    } else if r <= 20.0 {
        Region::Miller
    } else if r - z.im.abs() <= 8.0 {
        Region::Series
    } else {
        Region::Asymptotic
    }
}

/// Bessel function of the first kind `J_n(z)`.
pub fn bessel_j(n: u32, z: C64) -> Result<C64> {
    check(n, z)?;
    Ok(j_any(n, z))
}

/// Bessel function of the second kind `Y_n(z)`, principal branch (cut on
/// the negative real axis).
pub fn bessel_y(n: u32, z: C64) -> Result<C64> {
    check(n, z)?;
    if z == C64::new(0.0, 0.0) {
        return Err(Error::Domain("Y_n is singular at z = 0".into()));
    }
    Ok(y_any(n, z))
}

/// Hankel function of the first kind `H^(1)_n(z)` for `Im z >= 0`.
pub fn hankel1(n: u32, z: C64) -> Result<C64> {
    check(n, z)?;
    if z.im < 0.0 {
        return Err(Error::Domain(format!("H^(1) requested in lower half plane, z = {z}")));
    }
    if z == C64::new(0.0, 0.0) {
        return Err(Error::Domain("H^(1)_n is singular at z = 0".into()));
    }
    Ok(hankel1_any(n, z))
}

pub(crate) fn j_any(n: u32, z: C64) -> C64 {
    match region(z) {
        Region::Series => return series(n, z, false).0,
        Region::Miller => return miller(z, false).0[n as usize],
        Region::Asymptotic => {}
    }
    if z.re < 0.0 {
        let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        sign * j_any(n, -z)
    } else if z.im < 0.0 {
        j_any(n, z.conj()).conj()
    } else {
        let (h1, h2) = asymptotic(n, z);
        0.5 * (h1 + h2)
    }
}

pub(crate) fn y_any(n: u32, z: C64) -> C64 {
    match region(z) {
        Region::Series => return series(n, z, true).1,
        Region::Miller => return miller(z, true).1[n as usize],
        Region::Asymptotic => {}
    }
    if z.im < 0.0 {
        y_any(n, z.conj()).conj()
    } else if z.re < 0.0 {
        // z = w e^{i pi}: Y_n(z) = (-1)^n (Y_n(w) + 2i J_n(w))
        let w = -z;
        let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        sign * (y_any(n, w) + 2.0 * I * j_any(n, w))
    } else {
        let (h1, h2) = asymptotic(n, z);
        (h1 - h2) / (2.0 * I)
    }
}

/// `H^(1)_n` without the `|z| <= 50` cap; the caller guarantees `Im z >= 0`.
pub(crate) fn hankel1_any(n: u32, z: C64) -> C64 {
    let r = z.norm();
    if z.im > 0.5 && r <= 20.0 {
        k_integral_hankel(n, z)
    } else if r <= 20.0 {
        j_any(n, z) + I * y_any(n, z)
    } else {
        asymptotic(n, z).0
    }
}

/// `(J_0(z), J_1(z))` by the ascending series; intended for the moderate
/// arguments met in kernel assembly.
pub fn bessel_j01(z: C64) -> (C64, C64) {
    if region(z) != Region::Series {
        return (j_any(0, z), j_any(1, z));
    }
    let q = -0.25 * z * z;
    let mut t0 = C64::new(1.0, 0.0);
    let mut t1 = 0.5 * z;
    let (mut s0, mut s1) = (t0, t1);
    for m in 1..400 {
        let mf = m as f64;
        t0 *= q / (mf * mf);
        t1 *= q / (mf * (mf + 1.0));
        s0 += t0;
        s1 += t1;
        if t0.norm() <= 1e-17 * s0.norm().max(1e-300) && t1.norm() <= 1e-17 * s1.norm().max(1e-300)
        {
            break;
        }
    }
    (s0, s1)
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn digamma_int(k: u32) -> f64 {
    -EULER_GAMMA + (1..k).map(|j| 1.0 / j as f64).sum::<f64>()
}

/// Ascending series; returns `(J_n, Y_n)` (Y only when requested).
fn series(n: u32, z: C64, want_y: bool) -> (C64, C64) {
    let half = 0.5 * z;
    let q = -half * half;
    let mut t = half.powu(n) / factorial(n);
    let mut j = t;
    let mut psi_a = digamma_int(1);
    let mut psi_b = digamma_int(n + 1);
    let mut s = (psi_a + psi_b) * t;
    let mut tmax = t.norm();
    for m in 1..500u32 {
        let mf = m as f64;
        t *= q / (mf * (mf + n as f64));
        psi_a += 1.0 / mf;
        psi_b += 1.0 / (mf + n as f64);
        j += t;
        s += (psi_a + psi_b) * t;
        let tn = t.norm();
        tmax = tmax.max(tn);
        if m as f64 > 0.5 * z.norm() && (tn <= 1e-17 * j.norm() || tn <= 1e-21 * tmax) {
            break;
        }
    }
    if !want_y {
        return (j, C64::new(0.0, 0.0));
    }
    let mut finite = C64::new(0.0, 0.0);
    for m in 0..n {
        let c = factorial(n - m - 1) / factorial(m);
        finite += c * half.powi(2 * m as i32 - n as i32);
    }
    let y = -finite / PI + (2.0 / PI) * half.ln() * j - s / PI;
    (j, y)
}

/// Backward recurrence for `J_0..J_N`, normalised by
/// `e^{-iz} = J_0 + 2 sum_k (-i)^k J_k` (for `Im z >= 0`; the conjugate
/// identity otherwise), which is free of cancellation.  With `want_y` also
/// returns `Y_0..Y_2` from the Neumann series
/// `(pi/2) Y_0 = (ln(z/2) + gamma) J_0 - 2 sum_k (-1)^k J_{2k}/k`
/// and its derivative.
fn miller(z: C64, want_y: bool) -> ([C64; 3], [C64; 3]) {
    let top = 2 * ((z.norm() as usize + 40) / 2);
    let mut j = vec![C64::new(0.0, 0.0); top + 2];
    j[top] = C64::new(1e-30, 0.0);
    let two_over_z = 2.0 / z;
    for k in (1..=top).rev() {
        j[k - 1] = (k as f64) * two_over_z * j[k] - j[k + 1];
        if j[k - 1].norm() > 1e250 {
            for v in j.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let (unit, target) = if z.im >= 0.0 { (-I, (-I * z).exp()) } else { (I, (I * z).exp()) };
    let mut norm = j[0];
    let mut p = C64::new(1.0, 0.0);
    for v in &j[1..=top] {
        p *= unit;
        norm += 2.0 * p * v;
    }
    let scale = target / norm;
    for v in j.iter_mut() {
        *v *= scale;
    }
    let jj = [j[0], j[1], j[2]];
    if !want_y {
        return (jj, [C64::new(0.0, 0.0); 3]);
    }
    let lg = (0.5 * z).ln() + EULER_GAMMA;
    let mut s0 = C64::new(0.0, 0.0);
    let mut s1 = C64::new(0.0, 0.0);
    let mut sign = -1.0;
    for k in 1..=top / 2 {
        let kf = k as f64;
        s0 += sign * j[2 * k] / kf;
        s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / kf;
        sign = -sign;
    }
    let y0 = (2.0 / PI) * (lg * j[0] - 2.0 * s0);
    let y1 = -(2.0 / PI) * (j[0] / z - lg * j[1] - s1);
    let y2 = two_over_z * y1 - y0;
    (jj, [y0, y1, y2])
}

/// Hankel asymptotic expansions `(H^(1)_n, H^(2)_n)`, truncated at the
/// smallest term.
fn asymptotic(n: u32, z: C64) -> (C64, C64) {
    let mu = 4.0 * (n * n) as f64;
    let pre = (2.0 / (PI * z)).sqrt();
    let w = z - n as f64 * FRAC_PI_2 - FRAC_PI_4;
    let inv = 1.0 / z;
    let mut a = C64::new(1.0, 0.0);
    let mut p1 = a;
    let mut p2 = a;
    let mut ik = C64::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for k in 1..200u32 {
        let odd = (2 * k - 1) as f64;
        a *= (mu - odd * odd) / (8.0 * k as f64) * inv;
        let an = a.norm();
        if an >= last || an == 0.0 {
            break;
        }
        last = an;
        ik *= I;
        p1 += ik * a;
        p2 += ik.conj() * a;
        if an < 1e-17 {
            break;
        }
    }
    let e = (I * w).exp();
    (pre * e * p1, pre * (-I * w).exp() * p2)
}

/// `H^(1)_n(z) = (2/pi) i^{-n-1} K_n(-iz)` with
/// `K_n(w) = int_0^inf exp(-w cosh t) cosh(nt) dt`, by the trapezoid rule,
/// which is exponentially accurate for this even analytic integrand.
fn k_integral_hankel(n: u32, z: C64) -> C64 {
    let w = -I * z;
    // half-width of the strip in which the integrand stays decaying
    let d = (FRAC_PI_2 - w.arg().abs()).clamp(1e-3, FRAC_PI_2 - 0.05);
    let h = (2.0 * PI * d / 42.0).min(0.1);
    let mut sum = 0.5 * (-w).exp();
    let nf = n as f64;
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        let ch = t.cosh();
        let term = (-w * ch).exp() * (nf * t).cosh();
        sum += term;
        if w.re * ch - nf * t > 45.0 + w.re {
            break;
        }
        k += 1;
    }
    let kn = h * sum;
    let phase = match n {
        0 => -I,
        1 => C64::new(-1.0, 0.0),
        _ => I,
    };
    (2.0 / PI) * phase * kn
}

/// Exponential integral `E_n(x) = int_1^inf e^{-xt} t^{-n} dt` for `x > 0`
/// (`x = 0` allowed for `n >= 2`).  `E_0(x) = e^{-x}/x`.
pub fn expint_e(n: u32, x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if n == 0 {
        return (-x).exp() / x;
    }
    if x == 0.0 {
        return if n >= 2 { 1.0 / (n - 1) as f64 } else { f64::INFINITY };
    }
    let nm1 = (n - 1) as f64;
    if x > 1.0 {
        // modified Lentz on the continued fraction
        let tiny = 1e-300;
        let mut b = x + n as f64;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..1000 {
            let fi = i as f64;
            let a = -fi * (nm1 + fi);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    } else {
        let mut ans = if n != 1 { 1.0 / nm1 } else { -x.ln() - EULER_GAMMA };
        let mut fact = 1.0;
        for i in 1..1000 {
            let fi = i as f64;
            fact *= -x / fi;
            let del = if fi != nm1 {
                -fact / (fi - nm1)
            } else {
                let psi = -EULER_GAMMA + (1..=n - 1).map(|k| 1.0 / k as f64).sum::<f64>();
                fact * (-x.ln() + psi)
            };
            ans += del;
            if del.abs() < ans.abs() * 1e-17 {
                break;
            }
        }
        ans
    }
}

/// `-dE_0/dx = e^{-x}(1 + x)/x^2`, the natural continuation of
/// `E_n' = -E_{n-1}` to `n = 0`.
pub fn expint_e_minus1(x: f64) -> f64 {
    (-x).exp() * (1.0 + x) / (x * x)
}

/// Entire exponential integral `Ein(x) = int_0^x (1 - e^{-t})/t dt`.
pub fn ein(x: f64) -> f64 {
    if x <= 4.0 {
        let mut term = 1.0;
        let mut sum = 0.0;
        for j in 1..200 {
            let jf = j as f64;
            term *= -x / jf;
            let del = -term / jf;
            sum += del;
            if del.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        expint_e(1, x) + EULER_GAMMA + x.ln()
    }
}
