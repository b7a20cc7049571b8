//! Ewald split with parameter `E`:
//!
//! ```text
//! G = sum_m e^{i xi.r} e^{(k^2 - |xi|^2)/(4E^2)} / (k^2 - |xi|^2)
//!   - (1/4pi) sum_n e^{i n.alpha} sum_q c_q E_{q+1}(E^2 |r - n|^2),
//! c_q = (k^2/(4E^2))^q / q!
//! ```
//!
//! Both sums converge like Gaussians, for any complex `k` off the Wood
//! anomalies, including `k = 0`.

use super::{CMat2, CVec2, Point};
use crate::special::{bessel_j01, ein, expint_e, expint_e_minus1, EULER_GAMMA};
use num_complex::Complex64 as C64;
use std::f64::consts::{PI, TAU};

const MAX_Q: usize = 60;
const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Debug)]
struct Mode {
    i1: usize,
    i2: usize,
    xi: [f64; 2],
    coef: C64,
}

#[derive(Clone, Debug)]
pub struct EwaldTables {
    alpha: [f64; 2],
    k: C64,
    e2: f64,
    mmax: i64,
    modes: Vec<Mode>,
    cq: Vec<C64>,
    xmax: f64,
}

impl EwaldTables {
    /// The split actually used is `max(split, |k|/3)`: the spatial
    /// `q`-series cancels like `e^{|k|^2/(4E^2)}` for large `|k|/E`.
    pub fn new(alpha: [f64; 2], k: C64, split: f64, tol: f64) -> Self {
        let split = split.max(k.norm() / 3.0);
        let e2 = split * split;
        let k2 = k * k;
        let budget = (1.0 / tol).ln() + 4.0;
        let ximax2 = 4.0 * e2 * budget + k2.re.max(0.0);
        let mmax = (ximax2.sqrt() / TAU).ceil() as i64 + 1;
        let mut modes = Vec::new();
        for m1 in -mmax..=mmax {
            for m2 in -mmax..=mmax {
                let xi = [TAU * m1 as f64 + alpha[0], TAU * m2 as f64 + alpha[1]];
                let xi2 = xi[0] * xi[0] + xi[1] * xi[1];
                if xi2 > ximax2 {
                    continue;
                }
                let den = k2 - xi2;
                let coef = ((k2 - xi2) / (4.0 * e2)).exp() / den;
                modes.push(Mode { i1: (m1 + mmax) as usize, i2: (m2 + mmax) as usize, xi, coef });
            }
        }
        let ratio = k2 / (4.0 * e2);
        let mut cq = vec![C64::new(1.0, 0.0)];
        while cq.len() < MAX_Q {
            let q = cq.len() as f64;
            let next = cq[cq.len() - 1] * ratio / q;
            if next.norm() < 1e-18 {
                break;
            }
            cq.push(next);
        }
        let xmax = budget + ratio.norm();
        Self { alpha, k, e2, mmax, modes, cq, xmax }
    }

    fn spectral(&self, r: Point, order: u8) -> (C64, CVec2, CMat2) {
        let n = (2 * self.mmax + 1) as usize;
        let mut p1 = Vec::with_capacity(n);
        let mut p2 = Vec::with_capacity(n);
        for m in -self.mmax..=self.mmax {
            p1.push(C64::from_polar(1.0, (TAU * m as f64 + self.alpha[0]) * r[0]));
            p2.push(C64::from_polar(1.0, (TAU * m as f64 + self.alpha[1]) * r[1]));
        }
        let mut v = ZERO;
        let mut g = [ZERO; 2];
        let mut h = [[ZERO; 2]; 2];
        for mode in &self.modes {
            let t = mode.coef * p1[mode.i1] * p2[mode.i2];
            v += t;
            if order >= 1 {
                let it = C64::new(-t.im, t.re);
                g[0] += it * mode.xi[0];
                g[1] += it * mode.xi[1];
            }
            if order >= 2 {
                for a in 0..2 {
                    for b in 0..2 {
                        h[a][b] -= t * (mode.xi[a] * mode.xi[b]);
                    }
                }
            }
        }
        (v, g, h)
    }

    /// `E_{j}(x)` for `j = -1 ..= Q + 1`, stored at index `j + 1`.
    fn expints(&self, x: f64, out: &mut [f64; MAX_Q + 3]) {
        let q = self.cq.len();
        let ex = (-x).exp();
        out[0] = expint_e_minus1(x);
        out[1] = ex / x;
        out[2] = expint_e(1, x);
        for n in 1..=q {
            out[n + 2] = (ex - x * out[n + 1]) / n as f64;
        }
    }

    fn spatial(&self, r: Point, order: u8, skip_origin: bool) -> (C64, CVec2, CMat2) {
        let mut v = ZERO;
        let mut g = [ZERO; 2];
        let mut h = [[ZERO; 2]; 2];
        let reach = (self.xmax / self.e2).sqrt();
        let mut en = [0.0; MAX_Q + 3];
        let e2 = self.e2;
        for n1 in (r[0] - reach).ceil() as i64..=(r[0] + reach).floor() as i64 {
            for n2 in (r[1] - reach).ceil() as i64..=(r[1] + reach).floor() as i64 {
                if skip_origin && n1 == 0 && n2 == 0 {
                    continue;
                }
                let rho = [r[0] - n1 as f64, r[1] - n2 as f64];
                let x = e2 * (rho[0] * rho[0] + rho[1] * rho[1]);
                if x > self.xmax {
                    continue;
                }
                self.expints(x, &mut en);
                let phase = C64::from_polar(1.0, self.alpha[0] * n1 as f64 + self.alpha[1] * n2 as f64);
                let (mut s0, mut s1, mut s2) = (ZERO, ZERO, ZERO);
                for (q, c) in self.cq.iter().enumerate() {
                    s0 += c * en[q + 2];
                    if order >= 1 {
                        s1 += c * en[q + 1];
                    }
                    if order >= 2 {
                        s2 += c * en[q];
                    }
                }
                v -= phase * s0 / (4.0 * PI);
                if order >= 1 {
                    let d = phase * s1 * (2.0 * e2 / (4.0 * PI));
                    g[0] += d * rho[0];
                    g[1] += d * rho[1];
                }
                if order >= 2 {
                    let diag = phase * s1 * (2.0 * e2 / (4.0 * PI));
                    let off = phase * s2 * (4.0 * e2 * e2 / (4.0 * PI));
                    for a in 0..2 {
                        for b in 0..2 {
                            h[a][b] -= off * (rho[a] * rho[b]);
                        }
                        h[a][a] += diag;
                    }
                }
            }
        }
        (v, g, h)
    }

    /// Full kernel with derivatives up to `order` (0, 1 or 2).
    pub(crate) fn full(&self, r: Point, order: u8) -> (C64, CVec2, CMat2) {
        let (v1, g1, h1) = self.spectral(r, order);
        let (v2, g2, h2) = self.spatial(r, order, false);
        let mut h = h1;
        for a in 0..2 {
            for b in 0..2 {
                h[a][b] += h2[a][b];
            }
        }
        (v1 + v2, [g1[0] + g2[0], g1[1] + g2[1]], h)
    }

    /// `B = G - (1/2pi) J0(k rho) ln rho` near the origin, with gradient when
    /// requested (zero vector otherwise).
    pub(crate) fn smooth(&self, r: Point, with_grad: bool) -> (C64, CVec2) {
        let order = u8::from(with_grad);
        let (v1, g1, _) = self.spectral(r, order);
        let (v2, g2, _) = self.spatial(r, order, true);
        let (v0, g0) = self.origin_image_smooth(r, with_grad);
        (v1 + v2 + v0, [g1[0] + g2[0] + g0[0], g1[1] + g2[1] + g0[1]])
    }

    /// Image `n = 0` of the spatial sum minus `P`:
    /// `(1/4pi)(gamma + 2 ln E - Ein(x)) + (1/2pi) ln rho (1 - J0(k rho))
    ///  - (1/4pi) sum_{q>=1} c_q E_{q+1}(x)`, `x = E^2 rho^2`.
    fn origin_image_smooth(&self, r: Point, with_grad: bool) -> (C64, CVec2) {
        let rho2 = r[0] * r[0] + r[1] * r[1];
        let e2 = self.e2;
        let lnsplit2 = e2.ln();
        if rho2 < 1e-28 {
            let mut s = ZERO;
            for (q, c) in self.cq.iter().enumerate().skip(1) {
                s += c / q as f64;
            }
            let v = (EULER_GAMMA + lnsplit2) / (4.0 * PI) - s / (4.0 * PI);
            return (C64::new(v.re, v.im), [ZERO; 2]);
        }
        let rho = rho2.sqrt();
        let x = e2 * rho2;
        let mut en = [0.0; MAX_Q + 3];
        self.expints(x, &mut en);
        let z = self.k * rho;
        let k2 = self.k * self.k;
        let (one_minus_j0_z2, j1_over_z) = small_bessel_ratios(z);
        let lr = rho.ln();
        let mut sv = ZERO;
        let mut sg = ZERO;
        for (q, c) in self.cq.iter().enumerate().skip(1) {
            sv += c * en[q + 2];
            sg += c * en[q + 1];
        }
        let v = (EULER_GAMMA + lnsplit2 - ein(x)) / (4.0 * PI) + lr * k2 * rho2 * one_minus_j0_z2 / TAU
            - sv / (4.0 * PI);
        if !with_grad {
            return (v, [ZERO; 2]);
        }
        let ein_slope = -(-x).exp_m1() / x;
        let d = -ein_slope * 2.0 * e2 / (4.0 * PI)
            + k2 * (one_minus_j0_z2 + lr * j1_over_z) / TAU
            + sg * 2.0 * e2 / (4.0 * PI);
        (v, [d * r[0], d * r[1]])
    }
}

/// `((1 - J0(z))/z^2, J1(z)/z)`, accurate as `z -> 0`.
fn small_bessel_ratios(z: C64) -> (C64, C64) {
    if z.norm() >= 1.0 {
        let (j0, j1) = bessel_j01(z);
        return ((1.0 - j0) / (z * z), j1 / z);
    }
    let q = -0.25 * z * z;
    // (1 - J0)/z^2 = sum_{m>=1} -(q^m)/(m!)^2 / z^2 = (1/4) sum_{m>=1} q^{m-1}/(m!)^2
    let mut a = C64::new(0.25, 0.0);
    let mut sa = a;
    let mut b = C64::new(0.5, 0.0);
    let mut sb = b;
    for m in 1..30 {
        let mf = m as f64;
        a *= q / ((mf + 1.0) * (mf + 1.0));
        b *= q / (mf * (mf + 1.0));
        sa += a;
        sb += b;
        if a.norm() < 1e-18 && b.norm() < 1e-18 {
            break;
        }
    }
    (sa, sb)
}
