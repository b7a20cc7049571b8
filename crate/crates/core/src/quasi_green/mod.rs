//! Quasi-periodic Green's function of the Helmholtz operator on the unit
//! square lattice,
//!
//! ```text
//! G(r) = -(i/4) sum_n H0(k |r - n|) e^{i n.alpha}
//!      = sum_m e^{i xi_m . r} / (k^2 - |xi_m|^2),   xi_m = 2 pi m + alpha,
//! ```
//!
//! with three independent evaluators (Ewald split, mixed spectral/closed
//! form, direct image sum) and the split `G = P + B` used by the Nyström
//! assembly, where `P(r) = (1/2pi) J0(k|r|) ln|r|` carries the logarithmic
//! singularity and `B` is smooth near the origin.

mod ewald;
mod fit;
mod spatial;
mod spectral;

pub use ewald::EwaldTables;
pub use fit::{low_k_fit, ExpansionBlocks};

use crate::error::{Error, Result};
use crate::special::bessel_j01;
use num_complex::Complex64 as C64;
use std::f64::consts::{PI, TAU};

pub type Point = [f64; 2];
pub type CVec2 = [C64; 2];
pub type CMat2 = [[C64; 2]; 2];

/// Bloch quasi-momentum, each component in the open interval `(0, 2pi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuasiMomentum([f64; 2]);

impl QuasiMomentum {
    pub fn new(a1: f64, a2: f64) -> Result<Self> {
        for (i, a) in [a1, a2].into_iter().enumerate() {
            if !(a.is_finite() && a > 0.0 && a < TAU) {
                return Err(Error::Parameter(format!(
                    "alpha[{i}] = {a} must lie strictly inside (0, 2pi)"
                )));
            }
        }
        Ok(Self([a1, a2]))
    }

    pub fn components(&self) -> [f64; 2] {
        self.0
    }

    /// Bloch phase `e^{i alpha.m}` picked up under translation by `m`.
    pub fn phase(&self, m: [i64; 2]) -> C64 {
        C64::from_polar(1.0, self.0[0] * m[0] as f64 + self.0[1] * m[1] as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    Spatial,
    Spectral,
    Ewald,
}

impl std::str::FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spatial" => Ok(Self::Spatial),
            "spectral" => Ok(Self::Spectral),
            "ewald" => Ok(Self::Ewald),
            _ => Err(Error::Parameter(format!("unknown backend '{s}' (spatial|spectral|ewald)"))),
        }
    }
}

/// How the comb `sum_n e^{i n.alpha}` multiplying the `k`-dependent constant
/// of the free-space expansion is read.  For `alpha` strictly inside the
/// Brillouin zone the comb vanishes distributionally (`Zero`); `RankOne`
/// keeps the constant with unit weight as a rank-one correction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CombReading {
    #[default]
    Zero,
    RankOne,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SummationConfig {
    pub backend: Backend,
    /// Minimum number of lattice shells in direct image sums.
    pub truncation_radius: u32,
    pub ewald_split: f64,
    pub tolerance: f64,
    pub comb: CombReading,
}

impl Default for SummationConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Ewald,
            truncation_radius: 3,
            ewald_split: PI.sqrt(),
            tolerance: 1e-13,
            comb: CombReading::Zero,
        }
    }
}

impl SummationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::Parameter(format!("tolerance {} must be in (0, 1)", self.tolerance)));
        }
        if self.truncation_radius < 1 {
            return Err(Error::Parameter("truncation_radius must be >= 1".into()));
        }
        if !(self.ewald_split > 0.0 && self.ewald_split.is_finite()) {
            return Err(Error::Parameter(format!("ewald_split {} must be positive", self.ewald_split)));
        }
        Ok(())
    }
}

/// Wave numbers in the matrix (`k_m`, real) and in the inclusion (`k_c`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveNumbers {
    pub k_m: f64,
    pub k_c: C64,
}

impl WaveNumbers {
    pub fn new(omega: f64, eps_m: f64, mu_m: f64, eps_c: C64, mu_c: C64) -> Result<Self> {
        if !(eps_m > 0.0 && mu_m > 0.0) {
            return Err(Error::Parameter("eps_m and mu_m must be positive".into()));
        }
        if !(omega >= 0.0 && omega.is_finite()) {
            return Err(Error::Parameter(format!("omega = {omega} must be non-negative")));
        }
        Ok(Self { k_m: omega * (eps_m * mu_m).sqrt(), k_c: upper_sqrt(eps_c * mu_c) * omega })
    }
}

/// Square root on the branch with `Im >= 0` (ties broken towards `Re >= 0`).
pub fn upper_sqrt(z: C64) -> C64 {
    let s = z.sqrt();
    if s.im < 0.0 || (s.im == 0.0 && s.re < 0.0) {
        -s
    } else {
        s
    }
}

/// Reject `k^2` within `1e-6 (1 + |k|^2)` of a lattice eigenvalue
/// `|alpha + 2 pi n|^2`.
pub(crate) fn check_wood(alpha: [f64; 2], k: C64) -> Result<()> {
    let k2 = k * k;
    let reach = (k.norm() / TAU).ceil() as i64 + 2;
    let thresh = 1e-6 * (1.0 + k.norm_sqr());
    let mut worst = (f64::INFINITY, (0, 0));
    for n1 in -reach..=reach {
        for n2 in -reach..=reach {
            let x1 = TAU * n1 as f64 + alpha[0];
            let x2 = TAU * n2 as f64 + alpha[1];
            let gap = (C64::new(x1 * x1 + x2 * x2, 0.0) - k2).norm();
            if gap < worst.0 {
                worst = (gap, (n1, n2));
            }
        }
    }
    if worst.0 < thresh {
        return Err(Error::WoodAnomaly { k2: k2.re, gap: worst.0, n: worst.1 });
    }
    Ok(())
}

fn check_not_lattice(r: Point) -> Result<()> {
    let d1 = r[0] - r[0].round();
    let d2 = r[1] - r[1].round();
    if d1.hypot(d2) < 1e-13 {
        return Err(Error::Singular(format!("x - y = ({}, {}) is a lattice vector", r[0], r[1])));
    }
    Ok(())
}

/// Green's function for fixed `(alpha, k)` with precomputed tables; cheap to
/// evaluate many times and shareable across threads.
#[derive(Clone, Debug)]
pub struct QuasiGreen {
    alpha: QuasiMomentum,
    k: C64,
    cfg: SummationConfig,
    tables: EwaldTables,
}

impl QuasiGreen {
    pub fn new(alpha: QuasiMomentum, k: C64, cfg: &SummationConfig) -> Result<Self> {
        cfg.validate()?;
        if !(k.re.is_finite() && k.im.is_finite()) || k.im < 0.0 {
            return Err(Error::Parameter(format!("wave number {k} must be finite with Im k >= 0")));
        }
        check_wood(alpha.components(), k)?;
        let tables = EwaldTables::new(alpha.components(), k, cfg.ewald_split, cfg.tolerance);
        Ok(Self { alpha, k, cfg: *cfg, tables })
    }

    pub fn alpha(&self) -> QuasiMomentum {
        self.alpha
    }

    pub fn k(&self) -> C64 {
        self.k
    }

    /// `G(r)`, `r = x - y`.
    pub fn value(&self, r: Point) -> Result<C64> {
        check_not_lattice(r)?;
        match self.cfg.backend {
            Backend::Ewald => Ok(self.tables.full(r, 0).0),
            Backend::Spectral => {
                spectral::value_grad(self.alpha.components(), self.k, r, self.cfg.tolerance).map(|v| v.0)
            }
            Backend::Spatial => spatial::value_grad(self.alpha.components(), self.k, r, &self.cfg).map(|v| v.0),
        }
    }

    /// `grad_x G(x - y)` as a function of `r = x - y`.
    pub fn gradient(&self, r: Point) -> Result<CVec2> {
        check_not_lattice(r)?;
        match self.cfg.backend {
            Backend::Ewald => Ok(self.tables.full(r, 1).1),
            Backend::Spectral => {
                spectral::value_grad(self.alpha.components(), self.k, r, self.cfg.tolerance).map(|v| v.1)
            }
            Backend::Spatial => spatial::value_grad(self.alpha.components(), self.k, r, &self.cfg).map(|v| v.1),
        }
    }

    /// Value, gradient and Hessian from the Ewald representation.
    pub fn jet(&self, r: Point) -> Result<(C64, CVec2, CMat2)> {
        check_not_lattice(r)?;
        Ok(self.tables.full(r, 2))
    }

    /// Smooth remainder `B(r) = G(r) - P(r)`; valid for `r` near the origin
    /// (away from the other lattice points), including `r = 0`.
    pub fn smooth(&self, r: Point) -> C64 {
        self.tables.smooth(r, false).0
    }

    /// `(B(r), grad B(r))`.
    pub fn smooth_with_gradient(&self, r: Point) -> (C64, CVec2) {
        self.tables.smooth(r, true)
    }

    /// `P(r) = (1/2pi) J0(k|r|) ln|r|` and its gradient, for `r != 0`.
    pub fn principal(&self, r: Point) -> (C64, CVec2) {
        principal(self.k, r)
    }
}

pub(crate) fn principal(k: C64, r: Point) -> (C64, CVec2) {
    let rho = r[0].hypot(r[1]);
    let (j0, j1) = bessel_j01(k * rho);
    let lr = rho.ln();
    let v = j0 * lr / TAU;
    // d/drho = (1/2pi)(J0/rho - k J1 ln rho)
    let d = (j0 / rho - k * j1 * lr) / (TAU * rho);
    (v, [d * r[0], d * r[1]])
}

/// `G^{alpha,k}(x, y)` by the configured backend.
pub fn green(alpha: QuasiMomentum, k: C64, x: Point, y: Point, cfg: &SummationConfig) -> Result<C64> {
    QuasiGreen::new(alpha, k, cfg)?.value([x[0] - y[0], x[1] - y[1]])
}

/// `grad_x G^{alpha,k}(x, y)`.
pub fn grad_green(alpha: QuasiMomentum, k: C64, x: Point, y: Point, cfg: &SummationConfig) -> Result<CVec2> {
    QuasiGreen::new(alpha, k, cfg)?.gradient([x[0] - y[0], x[1] - y[1]])
}

/// Quasi-periodic Laplace Green's function (`k = 0`); well defined because
/// `alpha` never hits the zero mode.
pub fn green_laplace(alpha: QuasiMomentum, x: Point, y: Point, cfg: &SummationConfig) -> Result<C64> {
    if cfg.backend == Backend::Spatial {
        return Err(Error::Parameter("the image sum diverges for k = 0; use ewald or spectral".into()));
    }
    green(alpha, C64::new(0.0, 0.0), x, y, cfg)
}
