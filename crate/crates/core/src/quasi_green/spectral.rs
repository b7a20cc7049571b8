//! Spectral representation with one of the two lattice sums done in closed
//! form.  For `t in [0, 1)`, `K^2 = k^2 - xi_1^2` (`Im K >= 0`), `a = alpha_2`:
//!
//! ```text
//! sum_{m2} e^{i(2pi m2 + a)t} / (K^2 - (2pi m2 + a)^2)
//!   = [ e^{iKt}/(1 - e^{i(K-a)}) - e^{iK(1-t)}/(e^{iK} - e^{-ia}) ] / (2iK)
//! ```
//!
//! The remaining Fourier sum decays like `e^{-|xi_1| d}`, `d` the distance
//! of `t` from the integers, so the closed form is taken along the axis on
//! which the offset is largest.

use super::{check_wood, CVec2, Point};
use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use std::f64::consts::TAU;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `(g(t), g'(t))` for the closed-form quasi-periodic 1-D sum.
fn line_sum(kk: C64, a: f64, t: f64) -> (C64, C64) {
    let eia = C64::from_polar(1.0, a);
    if kk.norm() < 1e-7 {
        let emia = eia.conj();
        let den = 1.0 - emia;
        let b = 1.0 / den;
        let a0 = emia / (den * den);
        return (a0 + b * t, b);
    }
    let e1 = (I * kk * t).exp();
    let e2 = (I * kk * (1.0 - t)).exp();
    let d1 = 1.0 - (I * kk).exp() / eia;
    let d2 = (I * kk).exp() - eia.conj();
    let g = (e1 / d1 - e2 / d2) / (2.0 * I * kk);
    let gp = (e1 / d1 + e2 / d2) / 2.0;
    (g, gp)
}

pub(super) fn value_grad(alpha: [f64; 2], k: C64, r: Point, tol: f64) -> Result<(C64, CVec2)> {
    check_wood(alpha, k)?;
    let frac = |v: f64| v - v.floor();
    let dist = |f: f64| f.min(1.0 - f);
    let (f1, f2) = (frac(r[0]), frac(r[1]));
    // c: closed-form axis, s: Fourier axis
    let (c, s) = if dist(f2) >= dist(f1) { (1, 0) } else { (0, 1) };
    let t = if c == 1 { f2 } else { f1 };
    let d = dist(t);
    if d < 1e-13 {
        return Err(Error::Singular("x - y is a lattice vector".into()));
    }
    let base = r[c] - t;
    let m = (((1.0 / tol).ln() + 5.0) / (TAU * d)).ceil() as i64 + 2;
    let m = m.min(400_000);
    let k2 = k * k;
    let mut v = C64::new(0.0, 0.0);
    let mut gs = C64::new(0.0, 0.0);
    let mut gc = C64::new(0.0, 0.0);
    for mi in -m..=m {
        let xi = TAU * mi as f64 + alpha[s];
        let mut kk = (k2 - xi * xi).sqrt();
        if kk.im < 0.0 {
            kk = -kk;
        }
        let (g, gp) = line_sum(kk, alpha[c], t);
        let e = C64::from_polar(1.0, xi * r[s]);
        v += e * g;
        gs += I * xi * e * g;
        gc += e * gp;
    }
    let phase = C64::from_polar(1.0, alpha[c] * base);
    let mut grad = [C64::new(0.0, 0.0); 2];
    grad[s] = phase * gs;
    grad[c] = phase * gc;
    Ok((phase * v, grad))
}
