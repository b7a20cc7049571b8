//! Nyström discretisation of the quasi-periodic layer potentials on a
//! boundary curve, off-boundary evaluation, and the dipole source field.
//!
//! The principal image `P = (1/2pi) J0(k rho) ln rho` is split as
//! `M1 ln(4 sin^2((t - s)/2)) + M2` and integrated with Kress' product
//! weights; the smooth remainder `B = G - P` goes through the trapezoid rule.

use crate::error::{Error, Result};
use crate::geometry::BoundaryCurve;
use crate::quasi_green::{low_k_fit, ExpansionBlocks, CVec2, CombReading, Point, QuasiGreen, QuasiMomentum};
use crate::quasi_green::{SummationConfig, WaveNumbers};
use crate::special::{bessel_j01, EULER_GAMMA};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use std::f64::consts::{PI, TAU};
use std::sync::{Arc, OnceLock};

/// Density values at the curve nodes.
pub type Density = DVector<C64>;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    /// `S[phi](x) = int G(x - y) phi(y) ds(y)`.
    SingleLayer,
    /// `K*[phi](x) = int nu(x).grad G(x - y) phi(y) ds(y)`.
    NpAdjoint,
    /// `K[phi](x) = int d/dnu(y) G(x - y) phi(y) ds(y)`, the L2 adjoint of
    /// `NpAdjoint` at the same `alpha` (`conj G(r) = G(-r)` for real `k`).
    NpDirect,
    /// Single layer modified on the span of the distinguished eigenfunction.
    SubstituteSingleLayer,
}

#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub entries: DMatrix<C64>,
    pub kind: OperatorKind,
    pub wave_number: C64,
    pub alpha: QuasiMomentum,
    curve: Arc<BoundaryCurve>,
}

impl OperatorMatrix {
    pub fn new(
        entries: DMatrix<C64>,
        kind: OperatorKind,
        wave_number: C64,
        alpha: QuasiMomentum,
        curve: Arc<BoundaryCurve>,
    ) -> Result<Self> {
        let n = curve.len();
        if entries.shape() != (n, n) {
            return Err(Error::Parameter(format!(
                "operator is {:?} but the curve has {n} nodes",
                entries.shape()
            )));
        }
        Ok(Self { entries, kind, wave_number, alpha, curve })
    }

    pub fn curve(&self) -> &BoundaryCurve {
        &self.curve
    }

    pub fn shared_curve(&self) -> Arc<BoundaryCurve> {
        self.curve.clone()
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }

    pub fn apply(&self, phi: &Density) -> Density {
        &self.entries * phi
    }
}

/// Kress weights `R_d`, `d = |i - j| mod N`, for `ln(4 sin^2((t - s)/2))`.
fn kress_weights(n_nodes: usize) -> Vec<f64> {
    let n = n_nodes / 2;
    (0..n_nodes)
        .map(|d| {
            let s: f64 = (1..n).map(|m| (TAU * (m * d) as f64 / n_nodes as f64).cos() / m as f64).sum();
            let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
            -(TAU / n as f64) * s - PI / (n * n) as f64 * sign
        })
        .collect()
}

struct Rows {
    s: Vec<C64>,
    kstar: Vec<C64>,
    k: Vec<C64>,
}

fn dot(a: [f64; 2], b: CVec2) -> C64 {
    b[0] * a[0] + b[1] * a[1]
}

fn assemble_row(g: &QuasiGreen, curve: &BoundaryCurve, r_w: &[f64], i: usize, want: [bool; 3], diag: (C64, CVec2)) -> Rows {
    let n = curve.len();
    let h = TAU / n as f64;
    let k = g.k();
    let x = curve.nodes()[i];
    let nu_x = curve.normals()[i];
    let grad = want[1] || want[2];
    let mut out = Rows {
        s: if want[0] { vec![ZERO; n] } else { Vec::new() },
        kstar: if want[1] { vec![ZERO; n] } else { Vec::new() },
        k: if want[2] { vec![ZERO; n] } else { Vec::new() },
    };
    for j in 0..n {
        let sp = curve.speeds()[j];
        let w_log = r_w[(i + n - j) % n];
        if i == j {
            let (b0, gb0) = diag;
            let kap = curve.curvature()[i] / (4.0 * PI);
            if want[0] {
                out.s[j] = w_log * sp / (4.0 * PI) + h * (b0 + (sp * sp).ln() / (4.0 * PI)) * sp;
            }
            if want[1] {
                out.kstar[j] = h * (kap + dot(nu_x, gb0)) * sp;
            }
            if want[2] {
                out.k[j] = h * (kap - dot(nu_x, gb0)) * sp;
            }
            continue;
        }
        let y = curve.nodes()[j];
        let r = [x[0] - y[0], x[1] - y[1]];
        let rho2 = r[0] * r[0] + r[1] * r[1];
        let rho = rho2.sqrt();
        let lr = rho.ln();
        let (j0, j1) = bessel_j01(k * rho);
        let dt = TAU * (i as f64 - j as f64) / n as f64;
        let ls = (4.0 * (0.5 * dt).sin().powi(2)).ln();
        let (b, gb) = if grad { g.smooth_with_gradient(r) } else { (g.smooth(r), [ZERO; 2]) };
        if want[0] {
            let m1 = j0 / (4.0 * PI) * sp;
            let full = (j0 * lr / TAU + b) * sp;
            out.s[j] = w_log * m1 + h * (full - m1 * ls);
        }
        if grad {
            // grad P = (1/2pi)(J0/rho^2 - k J1 ln rho / rho) r
            let dp = (j0 / rho2 - k * j1 * lr / rho) / TAU;
            let gp = [dp * r[0] + gb[0], dp * r[1] + gb[1]];
            let kj1 = k * j1 / (4.0 * PI * rho);
            if want[1] {
                let nr = nu_x[0] * r[0] + nu_x[1] * r[1];
                let m1 = -kj1 * nr * sp;
                let full = dot(nu_x, gp) * sp;
                out.kstar[j] = w_log * m1 + h * (full - m1 * ls);
            }
            if want[2] {
                let nu_y = curve.normals()[j];
                let nr = nu_y[0] * r[0] + nu_y[1] * r[1];
                let m1 = kj1 * nr * sp;
                let full = -dot(nu_y, gp) * sp;
                out.k[j] = w_log * m1 + h * (full - m1 * ls);
            }
        }
    }
    out
}

/// Assembles the requested operators in one pass over the kernel samples.
pub fn assemble_operators(
    alpha: QuasiMomentum,
    k: C64,
    curve: &BoundaryCurve,
    cfg: &SummationConfig,
    kinds: &[OperatorKind],
) -> Result<Vec<OperatorMatrix>> {
    let g = QuasiGreen::new(alpha, k, cfg)?;
    let want = [
        kinds.contains(&OperatorKind::SingleLayer),
        kinds.contains(&OperatorKind::NpAdjoint),
        kinds.contains(&OperatorKind::NpDirect),
    ];
    if kinds.contains(&OperatorKind::SubstituteSingleLayer) {
        return Err(Error::Parameter("the substitute single layer is built by the spectrum module".into()));
    }
    let n = curve.len();
    let r_w = kress_weights(n);
    let diag = g.smooth_with_gradient([0.0, 0.0]);
    let rows: Vec<Rows> = (0..n).into_par_iter().map(|i| assemble_row(&g, curve, &r_w, i, want, diag)).collect();
    let shared = Arc::new(curve.clone());
    let mut out = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let pick = |r: &Rows, j: usize| -> C64 {
            match kind {
                OperatorKind::SingleLayer => r.s[j],
                OperatorKind::NpAdjoint => r.kstar[j],
                _ => r.k[j],
            }
        };
        let m = DMatrix::from_fn(n, n, |i, j| pick(&rows[i], j));
        if m.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Numerical(format!("non-finite entries in the {kind:?} matrix")));
        }
        out.push(OperatorMatrix::new(m, *kind, k, alpha, shared.clone())?);
    }
    Ok(out)
}

fn assemble_one(alpha: QuasiMomentum, k: C64, curve: &BoundaryCurve, cfg: &SummationConfig, kind: OperatorKind) -> Result<OperatorMatrix> {
    Ok(assemble_operators(alpha, k, curve, cfg, &[kind])?.remove(0))
}

pub fn assemble_single_layer(alpha: QuasiMomentum, k: C64, curve: &BoundaryCurve, cfg: &SummationConfig) -> Result<OperatorMatrix> {
    assemble_one(alpha, k, curve, cfg, OperatorKind::SingleLayer)
}

pub fn assemble_np_adjoint(alpha: QuasiMomentum, k: C64, curve: &BoundaryCurve, cfg: &SummationConfig) -> Result<OperatorMatrix> {
    assemble_one(alpha, k, curve, cfg, OperatorKind::NpAdjoint)
}

pub fn assemble_np_direct(alpha: QuasiMomentum, k: C64, curve: &BoundaryCurve, cfg: &SummationConfig) -> Result<OperatorMatrix> {
    assemble_one(alpha, k, curve, cfg, OperatorKind::NpDirect)
}

/// `(S, K*)` from a single pass.
pub fn assemble_pair(
    alpha: QuasiMomentum,
    k: C64,
    curve: &BoundaryCurve,
    cfg: &SummationConfig,
) -> Result<(OperatorMatrix, OperatorMatrix)> {
    let mut v = assemble_operators(alpha, k, curve, cfg, &[OperatorKind::SingleLayer, OperatorKind::NpAdjoint])?;
    let kstar = v.pop().unwrap();
    Ok((v.pop().unwrap(), kstar))
}

/// Constant of the free-space expansion `-(i/4) H0(k r) = (1/2pi) ln r + tau_k + O(r^2 ln r)`.
pub fn free_space_constant(k: f64) -> C64 {
    C64::new(((0.5 * k).ln() + EULER_GAMMA) / TAU, -0.25)
}

/// Low-frequency expansion of an operator, fitted on `{1, k^2 ln k, k^2}`.
#[derive(Clone, Debug)]
pub struct OperatorExpansion {
    pub blocks: ExpansionBlocks,
    /// Under `CombReading::RankOne`, the matrix multiplying the free-space
    /// constant `tau_k` (the single layer of the comb term); absent otherwise.
    pub comb: Option<DMatrix<C64>>,
}

pub fn expansion_blocks(
    alpha: QuasiMomentum,
    curve: &BoundaryCurve,
    cfg: &SummationConfig,
    kind: OperatorKind,
    ks: &[f64],
) -> Result<OperatorExpansion> {
    let samples = ks
        .iter()
        .map(|&k| Ok((k, assemble_one(alpha, C64::new(k, 0.0), curve, cfg, kind)?.entries)))
        .collect::<Result<Vec<_>>>()?;
    let blocks = low_k_fit(&samples)?;
    let comb = match (cfg.comb, kind) {
        (CombReading::RankOne, OperatorKind::SingleLayer) => {
            let n = curve.len();
            let w = curve.weights();
            Some(DMatrix::from_fn(n, n, |_, j| C64::new(w[j], 0.0)))
        }
        _ => None,
    };
    Ok(OperatorExpansion { blocks, comb })
}

/// Trigonometric interpolation of nodal values onto `m >= n` equispaced nodes.
pub fn trig_upsample(values: &[C64], m: usize) -> Vec<C64> {
    let n = values.len();
    if m == n {
        return values.to_vec();
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut spec = values.to_vec();
    planner.plan_fft_forward(n).process(&mut spec);
    let mut fine = vec![ZERO; m];
    let half = n / 2;
    for q in 0..n {
        let c = spec[q] / n as f64;
        if n.is_multiple_of(2) && q == half {
            fine[half] += 0.5 * c;
            fine[m - half] += 0.5 * c;
        } else if q < half || (n % 2 == 1 && q == half) {
            fine[q] += c;
        } else {
            fine[m - (n - q)] += c;
        }
    }
    planner.plan_fft_inverse(m).process(&mut fine);
    fine
}

struct Level {
    nodes: Vec<Point>,
    /// Quadrature weight times density.
    wphi: Vec<C64>,
}

const MAX_UPSAMPLE: usize = 256;
const LEVELS: usize = 9; // factors 1, 2, ..., 256

/// `S[phi]` and its gradient anywhere in the plane.  The smooth remainder
/// uses the original nodes; the principal image uses an upsampled rule fine
/// enough that the target sits at least four fine spacings off the curve.
pub struct SingleLayerField {
    green: QuasiGreen,
    curve: Arc<BoundaryCurve>,
    phi: Vec<C64>,
    wphi: Vec<C64>,
    levels: Vec<OnceLock<Level>>,
}

impl SingleLayerField {
    pub fn new(green: QuasiGreen, curve: Arc<BoundaryCurve>, phi: &Density) -> Result<Self> {
        if phi.len() != curve.len() {
            return Err(Error::Parameter(format!(
                "density has {} values for {} nodes",
                phi.len(),
                curve.len()
            )));
        }
        if phi.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Numerical("density has non-finite entries".into()));
        }
        let phi: Vec<C64> = phi.iter().cloned().collect();
        let wphi = phi.iter().zip(curve.weights()).map(|(p, w)| p * *w).collect();
        Ok(Self { green, curve, phi, wphi, levels: (0..LEVELS).map(|_| OnceLock::new()).collect() })
    }

    fn level(&self, idx: usize) -> &Level {
        self.levels[idx].get_or_init(|| {
            let n = self.curve.len();
            let m = n << idx;
            let fine = trig_upsample(&self.phi, m);
            let shape = self.curve.shape();
            let mut nodes = Vec::with_capacity(m);
            let mut wphi = Vec::with_capacity(m);
            for (l, f) in fine.iter().enumerate() {
                let (p, d1, _) = shape.eval(TAU * l as f64 / m as f64);
                nodes.push(p);
                wphi.push(f * (d1[0].hypot(d1[1]) * TAU / m as f64));
            }
            Level { nodes, wphi }
        })
    }

    /// Distance to the curve in units of the node spacing.
    pub fn relative_distance(&self, x: Point) -> f64 {
        let (x0, _) = reduce_to_cell(x);
        self.curve.distance(x0).0 / self.curve.node_spacing()
    }

    /// Value and gradient; refuses points within two node spacings of the curve.
    pub fn value_grad(&self, x: Point) -> Result<(C64, CVec2)> {
        let rel = self.relative_distance(x);
        if rel < 2.0 {
            return Err(Error::Geometry(format!(
                "point ({:.6}, {:.6}) is {rel:.3} node spacings from the boundary (< 2); quadrature is not reliable there",
                x[0], x[1]
            )));
        }
        Ok(self.eval(x, rel))
    }

    /// Value and gradient without the proximity refusal; accuracy degrades
    /// below `4 / 256` node spacings.
    pub fn value_grad_near(&self, x: Point) -> (C64, CVec2) {
        let rel = self.relative_distance(x);
        self.eval(x, rel)
    }

    fn eval(&self, x: Point, rel: f64) -> (C64, CVec2) {
        let (x0, shift) = reduce_to_cell(x);
        let phase = self.green.alpha().phase(shift);
        let mut idx = 0;
        while idx + 1 < LEVELS && ((1usize << idx) as f64) * rel < 4.0 {
            idx += 1;
        }
        const { assert!(1 << (LEVELS - 1) == MAX_UPSAMPLE) };
        let mut v = ZERO;
        let mut g = [ZERO; 2];
        for (y, wp) in self.curve.nodes().iter().zip(&self.wphi) {
            let (b, gb) = self.green.smooth_with_gradient([x0[0] - y[0], x0[1] - y[1]]);
            v += b * wp;
            g[0] += gb[0] * wp;
            g[1] += gb[1] * wp;
        }
        let level = self.level(idx);
        let k = self.green.k();
        for (y, wp) in level.nodes.iter().zip(&level.wphi) {
            let (p, gp) = crate::quasi_green::principal(k, [x0[0] - y[0], x0[1] - y[1]]);
            v += p * wp;
            g[0] += gp[0] * wp;
            g[1] += gp[1] * wp;
        }
        (v * phase, [g[0] * phase, g[1] * phase])
    }
}

/// `x = x0 + n` with `x0` in `[0, 1)^2`.
fn reduce_to_cell(x: Point) -> (Point, [i64; 2]) {
    let n = [x[0].floor(), x[1].floor()];
    ([x[0] - n[0], x[1] - n[1]], [n[0] as i64, n[1] as i64])
}

/// `S^{alpha,k}[phi](x)` for `x` at least two node spacings off the curve.
pub fn eval_single_layer(
    alpha: QuasiMomentum,
    k: C64,
    curve: &BoundaryCurve,
    phi: &Density,
    x: Point,
    cfg: &SummationConfig,
) -> Result<C64> {
    let g = QuasiGreen::new(alpha, k, cfg)?;
    Ok(SingleLayerField::new(g, Arc::new(curve.clone()), phi)?.value_grad(x)?.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceDipole {
    pub moment: [f64; 2],
    pub position: Point,
}

/// `F_z(x) = a . grad_x G(x - z)` and its gradient.
pub fn dipole_field(green: &QuasiGreen, src: &SourceDipole, x: Point) -> Result<(C64, CVec2)> {
    let a = src.moment;
    let r = [x[0] - src.position[0], x[1] - src.position[1]];
    let (_, g, h) = green.jet(r)?;
    let f = g[0] * a[0] + g[1] * a[1];
    let df = [h[0][0] * a[0] + h[0][1] * a[1], h[1][0] * a[0] + h[1][1] * a[1]];
    Ok((f, df))
}

pub const SOURCE_CLEARANCE: f64 = 0.02;

/// Checks that the dipole sits in the unit cell, outside the inclusion, at
/// least `SOURCE_CLEARANCE` from the boundary.
pub fn check_source(curve: &BoundaryCurve, src: &SourceDipole) -> Result<()> {
    let z = src.position;
    if !(z.iter().all(|v| (0.0..=1.0).contains(v))) {
        return Err(Error::Geometry(format!("source position ({}, {}) lies outside the unit cell", z[0], z[1])));
    }
    if !src.moment.iter().all(|v| v.is_finite()) {
        return Err(Error::Parameter("dipole moment must be finite".into()));
    }
    if curve.contains(z) {
        return Err(Error::Geometry(format!("source ({}, {}) lies inside the inclusion", z[0], z[1])));
    }
    // the curve keeps CLEARANCE from the cell edges, so translated copies are
    // never closer than the curve itself
    let d = curve.distance(z).0;
    if d < SOURCE_CLEARANCE {
        return Err(Error::Geometry(format!(
            "source ({}, {}) is {d:.4} from the boundary (< {SOURCE_CLEARANCE})",
            z[0], z[1]
        )));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct NeumannData {
    /// `f = -(1/mu_m) dF_z/dnu` at the nodes.
    pub f: Density,
    /// `f / omega`.
    pub f1: Density,
}

pub fn neumann_data(
    alpha: QuasiMomentum,
    omega: f64,
    eps_m: f64,
    mu_m: f64,
    curve: &BoundaryCurve,
    src: &SourceDipole,
    cfg: &SummationConfig,
) -> Result<NeumannData> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::Parameter(format!("frequency {omega} must be positive")));
    }
    check_source(curve, src)?;
    let km = WaveNumbers::new(omega, eps_m, mu_m, C64::new(eps_m, 0.0), C64::new(mu_m, 0.0))?.k_m;
    let g = QuasiGreen::new(alpha, C64::new(km, 0.0), cfg)?;
    neumann_data_with(&g, mu_m, omega, curve, src)
}

/// As [`neumann_data`] with a prepared matrix-side Green's function.
pub fn neumann_data_with(g: &QuasiGreen, mu_m: f64, omega: f64, curve: &BoundaryCurve, src: &SourceDipole) -> Result<NeumannData> {
    let f = curve
        .nodes()
        .par_iter()
        .zip(curve.normals().par_iter())
        .map(|(x, nu)| {
            let (_, df) = dipole_field(g, src, *x)?;
            Ok(-dot(*nu, df) / mu_m)
        })
        .collect::<Result<Vec<C64>>>()?;
    let f = DVector::from_vec(f);
    let f1 = &f / C64::new(omega, 0.0);
    Ok(NeumannData { f, f1 })
}
