//! The quasi-static transmission problem: densities `(phi, psi)` with
//! `u = S_c[phi]` in the inclusion and `u = F_z + S_m[psi]` outside,
//!
//! ```text
//! S_c phi - S_m psi = F_z
//! (1/mu_c)(-1/2 + K*_c) phi - (1/mu_m)(1/2 + K*_m) psi = (1/mu_m) dF_z/dnu
//! ```
//!
//! the reduced operator `A(omega)`, near-field reconstruction and energy, and
//! the resonance bookkeeping against the static NP spectrum.

use crate::error::{Error, Result};
use crate::geometry::{interior_grid, BoundaryCurve};
use crate::potentials::{
    assemble_pair, check_source, dipole_field, neumann_data_with, Density, OperatorMatrix, SingleLayerField, SourceDipole,
};
use crate::quasi_green::{low_k_fit, upper_sqrt, CVec2, ExpansionBlocks, Point, QuasiGreen, QuasiMomentum, SummationConfig};
use crate::spectrum::SpectralDecomposition;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::sync::Arc;

fn cplx(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialParams {
    pub eps_m: f64,
    pub mu_m: f64,
    pub eps_c: C64,
    pub mu_c: C64,
}

impl MaterialParams {
    pub fn new(eps_m: f64, mu_m: f64, eps_c: C64, mu_c: C64) -> Result<Self> {
        let m = Self { eps_m, mu_m, eps_c, mu_c };
        m.validate()?;
        Ok(m)
    }

    /// Inclusion permeability given through `1/mu_c = sigma + i delta`.
    pub fn from_sigma_delta(eps_m: f64, mu_m: f64, eps_c: C64, sigma: f64, delta: f64) -> Result<Self> {
        let inv = C64::new(sigma, delta);
        if inv.norm() == 0.0 {
            return Err(Error::Parameter("sigma + i delta must be nonzero".into()));
        }
        Self::new(eps_m, mu_m, eps_c, inv.inv())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_m > 0.0 && self.eps_m.is_finite() && self.mu_m > 0.0 && self.mu_m.is_finite()) {
            return Err(Error::Parameter(format!(
                "eps_m = {} and mu_m = {} must be positive",
                self.eps_m, self.mu_m
            )));
        }
        for (name, v) in [("eps_c", self.eps_c), ("mu_c", self.mu_c)] {
            if !(v.re.is_finite() && v.im.is_finite()) || v.norm() == 0.0 {
                return Err(Error::Parameter(format!("{name} = {v} must be finite and nonzero")));
            }
        }
        if (self.contrast() + 1.0).norm() < 1e-12 {
            return Err(Error::Parameter("mu_c / mu_m = -1 is excluded (lambda(-1) = 0 is not an NP eigenvalue gap)".into()));
        }
        Ok(())
    }

    pub fn contrast(&self) -> C64 {
        self.mu_c / self.mu_m
    }

    /// `Re(1/mu_c)`.
    pub fn sigma(&self) -> f64 {
        self.mu_c.inv().re
    }

    /// `Im(1/mu_c)`.
    pub fn delta(&self) -> f64 {
        self.mu_c.inv().im
    }

    /// Lossy double-negative inclusion (`Re < 0`, `Im > 0` for both).
    pub fn is_physical(&self) -> bool {
        self.eps_c.re < 0.0 && self.eps_c.im > 0.0 && self.mu_c.re < 0.0 && self.mu_c.im > 0.0
    }

    /// `(k_m, k_c)` with `Im k_c >= 0`.
    pub fn wave_numbers(&self, omega: f64) -> (C64, C64) {
        (cplx(omega * (self.eps_m * self.mu_m).sqrt()), omega * upper_sqrt(self.eps_c * self.mu_c))
    }
}

/// `lambda(t) = (1 + t) / (2 (1 - t))`.
pub fn lambda_contrast(t: C64) -> Result<C64> {
    if (t - 1.0).norm() < 1e-14 {
        return Err(Error::Singular("lambda(t) has a pole at t = 1".into()));
    }
    Ok((1.0 + t) / (2.0 * (1.0 - t)))
}

/// Contrast `t` with `lambda(t) = lambda`.
pub fn contrast_for_lambda(lambda: f64) -> Result<f64> {
    if (lambda + 0.5).abs() < 1e-14 {
        return Err(Error::Singular("lambda = -1/2 corresponds to t = infinity".into()));
    }
    Ok((2.0 * lambda - 1.0) / (2.0 * lambda + 1.0))
}

/// `sigma = Re(1/mu_c)` that places `lambda(1/(sigma mu_m))` on `lambda`.
pub fn pinned_sigma(lambda: f64, mu_m: f64) -> Result<f64> {
    let t = contrast_for_lambda(lambda)?;
    if t == 0.0 {
        return Err(Error::Parameter("lambda = 1/2 needs mu_c = 0".into()));
    }
    Ok(1.0 / (mu_m * t))
}

/// `tau_j = (1/2)(1/mu_m + 1/mu_c) + (1/mu_m - 1/mu_c) lambda_j`.
pub fn tau_static(lambda_j: f64, m: &MaterialParams) -> C64 {
    let (a, b) = (cplx(1.0 / m.mu_m), m.mu_c.inv());
    0.5 * (a + b) + (a - b) * lambda_j
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SolvePath {
    /// The `2N x 2N` transmission system.
    #[default]
    Block,
    /// `A(omega)[psi] = f`, then `phi = S_c^{-1}(S_m psi + F)`.
    Reduced,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Largest accepted frequency unless `allow_large_omega`.
    pub quasi_static_limit: f64,
    pub allow_large_omega: bool,
    /// Regime constant: points with `omega / |delta| > c1` are flagged.
    pub c1: f64,
    /// Largest accepted 2-norm condition number of `S_c`.
    pub max_condition: f64,
    pub path: SolvePath,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { quasi_static_limit: 0.1, allow_large_omega: false, c1: 0.1, max_condition: 1e10, path: SolvePath::Block }
    }
}

/// Layer operators on both sides at one frequency.
#[derive(Clone, Debug)]
pub struct FrequencyOperators {
    pub omega: f64,
    pub k_m: C64,
    pub k_c: C64,
    pub s_m: OperatorMatrix,
    pub kstar_m: OperatorMatrix,
    pub s_c: OperatorMatrix,
    pub kstar_c: OperatorMatrix,
    pub condition_s_c: f64,
}

fn condition(m: &DMatrix<C64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    sv.max() / sv.min()
}

pub fn assemble_frequency_operators(
    alpha: QuasiMomentum,
    omega: f64,
    materials: &MaterialParams,
    curve: &BoundaryCurve,
    cfg: &SummationConfig,
    opts: &SolverOptions,
) -> Result<FrequencyOperators> {
    materials.validate()?;
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::Parameter(format!("frequency {omega} must be positive")));
    }
    if omega > opts.quasi_static_limit && !opts.allow_large_omega {
        return Err(Error::Regime(format!(
            "omega = {omega} exceeds the quasi-static limit {} (override to proceed)",
            opts.quasi_static_limit
        )));
    }
    let (k_m, k_c) = materials.wave_numbers(omega);
    let (s_m, kstar_m) = assemble_pair(alpha, k_m, curve, cfg)?;
    let (s_c, kstar_c) = assemble_pair(alpha, k_c, curve, cfg)?;
    let condition_s_c = condition(&s_c.entries);
    if !(condition_s_c < opts.max_condition) {
        return Err(Error::IllConditioned(condition_s_c));
    }
    Ok(FrequencyOperators { omega, k_m, k_c, s_m, kstar_m, s_c, kstar_c, condition_s_c })
}

fn half_identity(n: usize) -> DMatrix<C64> {
    DMatrix::identity(n, n) * cplx(0.5)
}

/// `A = (1/mu_m)(1/2 + K*_m) + (1/mu_c)(1/2 - K*_c) S_c^{-1} S_m`.
pub fn reduced_operator(ops: &FrequencyOperators, materials: &MaterialParams) -> Result<DMatrix<C64>> {
    let n = ops.s_m.len();
    let half = half_identity(n);
    let lu = ops.s_c.entries.clone().lu();
    let sc_inv_sm = lu
        .solve(&ops.s_m.entries)
        .ok_or_else(|| Error::Numerical("S_c is singular".into()))?;
    Ok((&half + &ops.kstar_m.entries) * cplx(1.0 / materials.mu_m)
        + (&half - &ops.kstar_c.entries) * sc_inv_sm * materials.mu_c.inv())
}

pub fn assemble_a(
    alpha: QuasiMomentum,
    omega: f64,
    materials: &MaterialParams,
    curve: &BoundaryCurve,
    cfg: &SummationConfig,
    opts: &SolverOptions,
) -> Result<DMatrix<C64>> {
    reduced_operator(&assemble_frequency_operators(alpha, omega, materials, curve, cfg, opts)?, materials)
}

/// `A0 = (1/2)(1/mu_m + 1/mu_c) + (1/mu_m - 1/mu_c) K*_0`.
pub fn static_a(kstar0: &OperatorMatrix, materials: &MaterialParams) -> DMatrix<C64> {
    let n = kstar0.len();
    let (a, b) = (cplx(1.0 / materials.mu_m), materials.mu_c.inv());
    DMatrix::identity(n, n) * (0.5 * (a + b)) + &kstar0.entries * (a - b)
}

/// Fit of `A(omega)` on `{1, omega^2 ln omega, omega^2}`.
pub fn a_expansion(
    alpha: QuasiMomentum,
    materials: &MaterialParams,
    curve: &BoundaryCurve,
    cfg: &SummationConfig,
    omegas: &[f64],
) -> Result<ExpansionBlocks> {
    let opts = SolverOptions::default();
    let samples = omegas
        .iter()
        .map(|&w| Ok((w, assemble_a(alpha, w, materials, curve, cfg, &opts)?)))
        .collect::<Result<Vec<_>>>()?;
    low_k_fit(&samples)
}

#[derive(Clone, Debug)]
pub struct DensitySolution {
    pub phi: Density,
    pub psi: Density,
    pub omega: f64,
    /// `F_z` at the nodes.
    pub dipole_trace: Density,
    /// `f = -(1/mu_m) dF_z/dnu` at the nodes.
    pub neumann: Density,
    /// Relative residual of the transmission system.
    pub residual: f64,
    pub condition_s_c: f64,
    pub path: SolvePath,
    /// `omega / |delta| <= c1`.
    pub in_regime: bool,
}

/// `[F; -f]` and the block matrix of the transmission system.
fn block_system(ops: &FrequencyOperators, materials: &MaterialParams, trace: &Density, f: &Density) -> (DMatrix<C64>, DVector<C64>) {
    let n = ops.s_m.len();
    let half = half_identity(n);
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&ops.s_c.entries);
    m.view_mut((0, n), (n, n)).copy_from(&(-&ops.s_m.entries));
    m.view_mut((n, 0), (n, n)).copy_from(&((&ops.kstar_c.entries - &half) * materials.mu_c.inv()));
    m.view_mut((n, n), (n, n)).copy_from(&((&half + &ops.kstar_m.entries) * cplx(-1.0 / materials.mu_m)));
    let mut rhs = DVector::zeros(2 * n);
    rhs.rows_mut(0, n).copy_from(trace);
    rhs.rows_mut(n, n).copy_from(&(-f));
    (m, rhs)
}

pub fn solve_with_operators(
    ops: &FrequencyOperators,
    materials: &MaterialParams,
    curve: &BoundaryCurve,
    source: &SourceDipole,
    cfg: &SummationConfig,
    opts: &SolverOptions,
) -> Result<DensitySolution> {
    check_source(curve, source)?;
    let n = curve.len();
    let g_m = QuasiGreen::new(ops.s_m.alpha, ops.k_m, cfg)?;
    let trace = curve
        .nodes()
        .par_iter()
        .map(|x| dipole_field(&g_m, source, *x).map(|v| v.0))
        .collect::<Result<Vec<_>>>()?;
    let trace = DVector::from_vec(trace);
    let f = neumann_data_with(&g_m, materials.mu_m, ops.omega, curve, source)?.f;
    let (block, rhs) = block_system(ops, materials, &trace, &f);
    let (phi, psi) = match opts.path {
        SolvePath::Block => {
            let x = block
                .clone()
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Numerical("transmission system is singular".into()))?;
            (x.rows(0, n).into_owned(), x.rows(n, n).into_owned())
        }
        SolvePath::Reduced => {
            let a = reduced_operator(ops, materials)?;
            let lu_c = ops.s_c.entries.clone().lu();
            let sc_inv_trace = lu_c.solve(&trace).ok_or_else(|| Error::Numerical("S_c is singular".into()))?;
            let half = half_identity(n);
            let rhs_red = &f + (&ops.kstar_c.entries - &half) * sc_inv_trace * materials.mu_c.inv();
            let psi = a.lu().solve(&rhs_red).ok_or_else(|| Error::Numerical("A(omega) is singular".into()))?;
            let phi = lu_c
                .solve(&(&ops.s_m.entries * &psi + &trace))
                .ok_or_else(|| Error::Numerical("S_c is singular".into()))?;
            (phi, psi)
        }
    };
    let mut x = DVector::zeros(2 * n);
    x.rows_mut(0, n).copy_from(&phi);
    x.rows_mut(n, n).copy_from(&psi);
    let rn = rhs.norm();
    let residual = if rn == 0.0 { (&block * &x).norm() } else { (&block * &x - &rhs).norm() / rn };
    let delta = materials.delta().abs();
    let in_regime = delta > 0.0 && ops.omega / delta <= opts.c1;
    Ok(DensitySolution {
        phi,
        psi,
        omega: ops.omega,
        dipole_trace: trace,
        neumann: f,
        residual,
        condition_s_c: ops.condition_s_c,
        path: opts.path,
        in_regime,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn solve_densities(
    alpha: QuasiMomentum,
    omega: f64,
    materials: &MaterialParams,
    curve: &BoundaryCurve,
    source: &SourceDipole,
    cfg: &SummationConfig,
    opts: &SolverOptions,
) -> Result<(DensitySolution, FrequencyOperators)> {
    check_source(curve, source)?;
    let ops = assemble_frequency_operators(alpha, omega, materials, curve, cfg, opts)?;
    let sol = solve_with_operators(&ops, materials, curve, source, cfg, opts)?;
    Ok((sol, ops))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Inclusion,
    Matrix,
}

impl Region {
    pub fn name(&self) -> &'static str {
        match self {
            Region::Inclusion => "inclusion",
            Region::Matrix => "matrix",
        }
    }
}

/// The reconstructed field `u` on both sides of the boundary.
pub struct NearField {
    inner: SingleLayerField,
    outer: SingleLayerField,
    green_m: QuasiGreen,
    source: SourceDipole,
    curve: Arc<BoundaryCurve>,
}

impl NearField {
    pub fn new(
        sol: &DensitySolution,
        ops: &FrequencyOperators,
        curve: &BoundaryCurve,
        source: &SourceDipole,
        cfg: &SummationConfig,
    ) -> Result<Self> {
        let curve = Arc::new(curve.clone());
        let alpha = ops.s_m.alpha;
        let g_c = QuasiGreen::new(alpha, ops.k_c, cfg)?;
        let green_m = QuasiGreen::new(alpha, ops.k_m, cfg)?;
        Ok(Self {
            inner: SingleLayerField::new(g_c, curve.clone(), &sol.phi)?,
            outer: SingleLayerField::new(green_m.clone(), curve.clone(), &sol.psi)?,
            green_m,
            source: *source,
            curve,
        })
    }

    pub fn region(&self, x: Point) -> Region {
        let x0 = [x[0] - x[0].floor(), x[1] - x[1].floor()];
        if self.curve.contains(x0) {
            Region::Inclusion
        } else {
            Region::Matrix
        }
    }

    /// `u` and `grad u`; refuses points within two node spacings of the boundary.
    pub fn value_grad(&self, x: Point) -> Result<(C64, CVec2, Region)> {
        self.eval(x, self.region(x), true)
    }

    /// One-sided limit from `region` without the proximity refusal.
    pub fn value_grad_from(&self, x: Point, region: Region) -> Result<(C64, CVec2)> {
        self.eval(x, region, false).map(|(u, g, _)| (u, g))
    }

    fn eval(&self, x: Point, region: Region, strict: bool) -> Result<(C64, CVec2, Region)> {
        let field = match region {
            Region::Inclusion => &self.inner,
            Region::Matrix => &self.outer,
        };
        let (mut u, mut g) = if strict { field.value_grad(x)? } else { field.value_grad_near(x) };
        if region == Region::Matrix {
            let (f, df) = dipole_field(&self.green_m, &self.source, x)?;
            u += f;
            g[0] += df[0];
            g[1] += df[1];
        }
        Ok((u, g, region))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyReport {
    /// `||grad u||_{L2(D)}` from the boundary formula.
    pub energy: f64,
    pub energy_sq: f64,
    /// `(Re k_c^2) ||u||^2_{L2(D)}`.
    pub volume_term: f64,
    /// `Re int u conj((-1/2 + K*_c) phi)`.
    pub boundary_term: f64,
    /// `||grad u||_{L2(D)}` by grid quadrature of `|grad u|^2`.
    pub grid_energy: f64,
    /// `|grid - boundary| / boundary` (0 when both vanish).
    pub discrepancy: f64,
    pub grid_points: usize,
}

/// Tolerance on a negative `||grad u||^2` before it is treated as an error.
const NEGATIVE_ENERGY_TOL: f64 = 1e-8;

/// Moves `x` inward along the normal of its closest boundary point so that it
/// lies at least `min_dist` from the boundary.
fn keep_inside(curve: &BoundaryCurve, x: Point, min_dist: f64) -> Point {
    let (d, t) = curve.distance(x);
    if d >= min_dist {
        return x;
    }
    let (p, d1, _) = curve.shape().eval(t);
    let sp = d1[0].hypot(d1[1]);
    let nu = [d1[1] / sp, -d1[0] / sp];
    [p[0] - min_dist * nu[0], p[1] - min_dist * nu[1]]
}

/// `||grad u||_{L2(D)}` for `u = S_c[phi]` from
/// `(Re k^2)||u||^2 + Re int_{dD} u conj(du/dnu|_-)`, with `||u||^2` and
/// a cross-check of `int |grad u|^2` on a cell-centred grid of `spacing`.
pub fn near_field_energy(
    phi: &Density,
    s_c: &OperatorMatrix,
    kstar_c: &OperatorMatrix,
    cfg: &SummationConfig,
    spacing: f64,
) -> Result<EnergyReport> {
    let curve = s_c.shared_curve();
    let n = curve.len();
    if phi.len() != n {
        return Err(Error::Parameter("density does not match the operators".into()));
    }
    let k = s_c.wave_number;
    let u_b = s_c.apply(phi);
    let dn = kstar_c.apply(phi) - phi * cplx(0.5);
    let boundary_term: f64 = (0..n).map(|i| (u_b[i] * dn[i].conj()).re * curve.weights()[i]).sum();
    let grid = interior_grid(&curve, spacing)?;
    let field = SingleLayerField::new(QuasiGreen::new(s_c.alpha, k, cfg)?, curve.clone(), phi)?;
    let min_dist = curve.node_spacing() * 4.0 / 256.0;
    // collected before summing so the result does not depend on thread scheduling
    let samples: Vec<(f64, f64)> = grid
        .points
        .par_iter()
        .map(|&x| {
            let (u, g) = field.value_grad_near(keep_inside(&curve, x, min_dist));
            (u.norm_sqr(), g[0].norm_sqr() + g[1].norm_sqr())
        })
        .collect();
    let (u2, g2) = samples.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let volume_term = (k * k).re * u2 * grid.cell_area;
    let energy_sq = volume_term + boundary_term;
    let scale = volume_term.abs() + boundary_term.abs();
    if energy_sq < -NEGATIVE_ENERGY_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical(format!(
            "boundary energy formula gave {energy_sq:.3e} < 0; the discretisation is under-resolved"
        )));
    }
    let energy = energy_sq.max(0.0).sqrt();
    let grid_energy = (g2 * grid.cell_area).sqrt();
    let discrepancy = if energy == 0.0 && grid_energy == 0.0 {
        0.0
    } else {
        (grid_energy - energy).abs() / energy.max(grid_energy)
    };
    Ok(EnergyReport {
        energy,
        energy_sq,
        volume_term,
        boundary_term,
        grid_energy,
        discrepancy,
        grid_points: grid.points.len(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResonanceIndexSet {
    pub indices: Vec<usize>,
    pub eta0: f64,
}

pub const DEFAULT_ETA0: f64 = 0.05;

/// `J = {j : |tau_j| < eta0}` over the trusted modes, never containing the
/// distinguished mode.
pub fn resonance_index_set(decomp: &SpectralDecomposition, materials: &MaterialParams, eta0: f64) -> Result<ResonanceIndexSet> {
    if !(eta0 > 0.0 && eta0.is_finite()) {
        return Err(Error::Parameter(format!("eta0 = {eta0} must be positive")));
    }
    let indices = (0..decomp.trusted)
        .filter(|&j| j != decomp.phi0_index && tau_static(decomp.eigenvalues[j], materials).norm() < eta0)
        .collect();
    Ok(ResonanceIndexSet { indices, eta0 })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResonanceEntry {
    pub j: usize,
    pub lambda_j: f64,
    /// `|lambda(mu_c/mu_m) - lambda_j|`.
    pub contrast_gap: f64,
    pub tau_abs: f64,
}

pub fn resonance_report(decomp: &SpectralDecomposition, materials: &MaterialParams) -> Result<Vec<ResonanceEntry>> {
    let lam_c = lambda_contrast(materials.contrast())?;
    Ok((0..decomp.trusted)
        .map(|j| {
            let l = decomp.eigenvalues[j];
            ResonanceEntry { j, lambda_j: l, contrast_gap: (lam_c - l).norm(), tau_abs: tau_static(l, materials).norm() }
        })
        .collect())
}
