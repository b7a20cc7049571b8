//! Direct image sum `-(i/4) sum_n H0(k|r - n|) e^{i n.alpha}`; absolutely
//! convergent only for `Im k > 0` and used here for `Im k >= 0.3`.

use super::{CVec2, Point, SummationConfig};
use crate::error::{Error, Result};
use crate::special::hankel1_any;
use num_complex::Complex64 as C64;

/// Images whose Hankel factor is below `e^{-38}` are dropped.
const DECAY_CUTOFF: f64 = 38.0;

pub(super) fn value_grad(alpha: [f64; 2], k: C64, r: Point, cfg: &SummationConfig) -> Result<(C64, CVec2)> {
    if k.im < 0.3 {
        return Err(Error::Parameter(format!(
            "spatial backend needs Im k >= 0.3 (got {}); use ewald or spectral",
            k.im
        )));
    }
    let reach = (DECAY_CUTOFF / k.im).max(cfg.truncation_radius as f64);
    let quarter_i = C64::new(0.0, 0.25);
    let mut v = C64::new(0.0, 0.0);
    let mut g = [C64::new(0.0, 0.0); 2];
    for n1 in (r[0] - reach).ceil() as i64..=(r[0] + reach).floor() as i64 {
        for n2 in (r[1] - reach).ceil() as i64..=(r[1] + reach).floor() as i64 {
            let rho = [r[0] - n1 as f64, r[1] - n2 as f64];
            let d = rho[0].hypot(rho[1]);
            if d > reach && (n1.abs() > cfg.truncation_radius as i64 || n2.abs() > cfg.truncation_radius as i64) {
                continue;
            }
            let z = k * d;
            let phase = C64::from_polar(1.0, alpha[0] * n1 as f64 + alpha[1] * n2 as f64);
            v -= quarter_i * hankel1_any(0, z) * phase;
            // d/dr H0(k r) = -k H1(k r)
            let s = quarter_i * k * hankel1_any(1, z) * phase / d;
            g[0] += s * rho[0];
            g[1] += s * rho[1];
        }
    }
    Ok((v, g))
}
