//! Drude permeability `mu_c(omega) = mu0 (1 - F omega^2 / (omega^2 - omega0^2 + i omega / tau))`,
//! its Kramers–Kronig consistency, inverse design of `tau` or `F` onto an NP
//! eigenvalue, and pinned blow-up sweeps.

use crate::error::{Error, Result};
use crate::geometry::BoundaryCurve;
use crate::potentials::SourceDipole;
use crate::quasi_green::{QuasiMomentum, SummationConfig};
use crate::resonance::{
    contrast_for_lambda, lambda_contrast, near_field_energy, solve_densities, DensitySolution, EnergyReport, MaterialParams,
    SolverOptions,
};
use crate::spectrum::SpectralDecomposition;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DrudeParams {
    pub mu0: f64,
    /// Filling factor `F`.
    pub filling: f64,
    /// Relaxation parameter `tau` (enters as `i omega / tau`).
    pub tau: f64,
    pub omega0: f64,
}

impl DrudeParams {
    pub fn new(mu0: f64, filling: f64, tau: f64, omega0: f64) -> Result<Self> {
        let p = Self { mu0, filling, tau, omega0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.mu0 > 0.0
            && self.mu0.is_finite()
            && self.filling > 0.0
            && self.filling < 1.0
            && self.tau > 0.0
            && self.tau.is_finite()
            && self.omega0 > 0.0
            && self.omega0.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!(
                "Drude parameters need mu0 > 0, F in (0,1), tau > 0, omega0 > 0 (got mu0 = {}, F = {}, tau = {}, omega0 = {})",
                self.mu0, self.filling, self.tau, self.omega0
            )))
        }
    }

    pub fn with_tau(&self, tau: f64) -> Self {
        Self { tau, ..*self }
    }

    pub fn with_filling(&self, filling: f64) -> Self {
        Self { filling, ..*self }
    }

    /// `mu0 (1 - F)`, the limit of `mu_c` as `omega -> infinity`.
    pub fn mu_infinity(&self) -> f64 {
        self.mu0 * (1.0 - self.filling)
    }
}

pub fn drude_mu(p: &DrudeParams, omega: f64) -> C64 {
    let w2 = omega * omega;
    p.mu0 * (1.0 - p.filling * w2 / C64::new(w2 - p.omega0 * p.omega0, omega / p.tau))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DrudeResponse {
    pub mu: C64,
    /// `Re(1/mu_c)`.
    pub sigma: f64,
    /// `Im(1/mu_c)`.
    pub delta: f64,
}

pub fn drude_response(p: &DrudeParams, omega: f64) -> DrudeResponse {
    let mu = drude_mu(p, omega);
    let inv = mu.inv();
    DrudeResponse { mu, sigma: inv.re, delta: inv.im }
}

/// `Im mu_c = mu0 F omega^3 / tau / ((omega^2 - omega0^2)^2 + omega^2 / tau^2)`.
pub fn drude_loss(p: &DrudeParams, omega: f64) -> f64 {
    let e = omega * omega - p.omega0 * p.omega0;
    p.mu0 * p.filling * omega.powi(3) / p.tau / (e * e + omega * omega / (p.tau * p.tau))
}

/// `delta = -Im(mu_c) / |mu_c|^2`.
pub fn drude_delta_closed_form(p: &DrudeParams, omega: f64) -> f64 {
    -drude_loss(p, omega) / drude_mu(p, omega).norm_sqr()
}

/// `Re mu_c < 0`, decided from
/// `(1 - F)(omega^2 - omega0^2)^2 - F omega0^2 (omega^2 - omega0^2) + omega^2 / tau^2 < 0`.
pub fn negativity_condition(p: &DrudeParams, omega: f64) -> bool {
    let e = omega * omega - p.omega0 * p.omega0;
    (1.0 - p.filling) * e * e - p.filling * p.omega0 * p.omega0 * e + omega * omega / (p.tau * p.tau) < 0.0
}

/// `(1/pi) PV int_{-hi}^{hi} f(s) / (s - probe) ds` for odd `f`, restricted to
/// `lo <= |s| <= hi`, by singularity subtraction and the trapezoidal rule on
/// `points` uniform nodes of `[lo, hi]`.
pub fn odd_hilbert_transform(f: impl Fn(f64) -> f64, probe: f64, band: (f64, f64), points: usize) -> Result<f64> {
    let (lo, hi) = band;
    if !(lo > 0.0 && hi > lo && probe > lo && probe < hi) || points < 3 {
        return Err(Error::Parameter(format!(
            "principal value needs 0 < lo < probe < hi and >= 3 points (band [{lo}, {hi}], probe {probe})"
        )));
    }
    let step = (hi - lo) / (points - 1) as f64;
    let pos = (probe - lo) / step;
    if (pos - pos.round()).abs() < 1e-9 {
        return Err(Error::Parameter(format!(
            "probe {probe} coincides with quadrature node {}; shift the probe or change the point count",
            pos.round()
        )));
    }
    let h = |s: f64| 2.0 * s * f(s) / (s + probe);
    let h0 = h(probe);
    let sum: f64 = (0..points)
        .map(|i| {
            let s = lo + i as f64 * step;
            let w = if i == 0 || i == points - 1 { 0.5 } else { 1.0 };
            w * (h(s) - h0) / (s - probe)
        })
        .sum();
    Ok((sum * step + h0 * ((hi - probe) / (probe - lo)).ln()) / PI)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KramersKronig {
    /// `|Re mu_c(probe) - mu_inf - H[Im mu_c](probe)|`.
    pub residual: f64,
    pub hilbert: f64,
    /// `Re mu_c(probe) - mu_inf`.
    pub reference: f64,
}

impl KramersKronig {
    pub fn relative(&self) -> f64 {
        self.residual / self.reference.abs()
    }
}

/// Compares `Re mu_c(probe) - mu0 (1 - F)` with the Hilbert transform of
/// `Im mu_c` over `band` (oddly extended to negative frequencies).
pub fn kramers_kronig_residual(p: &DrudeParams, probe: f64, band: (f64, f64), points: usize) -> Result<KramersKronig> {
    let hilbert = odd_hilbert_transform(|s| drude_loss(p, s), probe, band, points)?;
    let reference = drude_mu(p, probe).re - p.mu_infinity();
    Ok(KramersKronig { residual: (reference - hilbert).abs(), hilbert, reference })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DesignOptions {
    pub tau_bracket: (f64, f64),
    pub filling_bracket: (f64, f64),
    pub scan_points: usize,
    pub max_bisections: usize,
    /// Required `|lambda(.) - lambda_j|` at the returned root.
    pub tolerance: f64,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            tau_bracket: (1e-6, 1e3),
            filling_bracket: (1e-6, 1.0 - 1e-6),
            scan_points: 400,
            max_bisections: 60,
            tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DesignResult {
    /// The designed parameter (`tau` or `F`).
    pub value: f64,
    pub params: DrudeParams,
    /// `|lambda(|mu_c|^2 / (mu_m Re mu_c)) - lambda_j|`.
    pub residual: f64,
    pub iterations: usize,
}

/// `lambda(|mu_c|^2 / (mu_m Re mu_c))`, cross-checked against `lambda(1/(sigma mu_m))`.
pub fn drude_contrast_lambda(p: &DrudeParams, omega: f64, mu_m: f64) -> Result<f64> {
    let r = drude_response(p, omega);
    if r.mu.re == 0.0 {
        return Err(Error::Singular("Re mu_c = 0".into()));
    }
    let t = r.mu.norm_sqr() / (mu_m * r.mu.re);
    let t_sigma = 1.0 / (r.sigma * mu_m);
    if (t - t_sigma).abs() > 1e-9 * t.abs().max(1.0) {
        return Err(Error::Numerical(format!("|mu_c|^2/Re mu_c = {t} disagrees with 1/sigma = {t_sigma}")));
    }
    Ok(lambda_contrast(C64::new(t, 0.0))?.re)
}

#[derive(Clone, Copy)]
enum Knob {
    Tau,
    Filling,
}

/// Root of `sigma(x) = sigma*` (equivalently `lambda(1/(sigma mu_m)) = lambda_j`,
/// without the pole of `lambda` where `Re mu_c = 0`), largest root in the bracket.
fn design(lambda_j: f64, mu_m: f64, base: &DrudeParams, omega: f64, opts: &DesignOptions, knob: Knob) -> Result<DesignResult> {
    if !(lambda_j > -0.5 && lambda_j < 0.5) {
        return Err(Error::Parameter(format!("target lambda_j = {lambda_j} must lie in (-1/2, 1/2)")));
    }
    if !(omega > 0.0) || opts.scan_points < 2 {
        return Err(Error::Parameter("design needs omega > 0 and >= 2 scan points".into()));
    }
    let sigma_star = 1.0 / (mu_m * contrast_for_lambda(lambda_j)?);
    let (lo, hi, log) = match knob {
        Knob::Tau => (opts.tau_bracket.0, opts.tau_bracket.1, true),
        Knob::Filling => (opts.filling_bracket.0, opts.filling_bracket.1, false),
    };
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Parameter(format!("empty design bracket [{lo}, {hi}]")));
    }
    let params = |x: f64| match knob {
        Knob::Tau => base.with_tau(x),
        Knob::Filling => base.with_filling(x),
    };
    let at = |u: f64| if log { u.exp() } else { u };
    let (ulo, uhi) = if log { (lo.ln(), hi.ln()) } else { (lo, hi) };
    let g = |u: f64| drude_response(&params(at(u)), omega).sigma - sigma_star;
    let n = opts.scan_points;
    let us: Vec<f64> = (0..n).map(|i| ulo + (uhi - ulo) * i as f64 / (n - 1) as f64).collect();
    let gs: Vec<f64> = us.iter().map(|&u| g(u)).collect();
    let bracket = (0..n - 1).rev().find(|&i| gs[i] == 0.0 || gs[i + 1] == 0.0 || (gs[i] < 0.0) != (gs[i + 1] < 0.0));
    let Some(i) = bracket else {
        let lams: Vec<f64> = us.iter().filter_map(|&u| drude_contrast_lambda(&params(at(u)), omega, mu_m).ok()).collect();
        let (mn, mx) = lams.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &l| (a.min(l), b.max(l)));
        return Err(Error::Infeasible(format!(
            "lambda_j = {lambda_j} is not reached on [{lo:.3e}, {hi:.3e}]; achieved lambda in [{mn:.6}, {mx:.6}]"
        )));
    };
    let (mut a, mut b, mut ga) = (us[i], us[i + 1], gs[i]);
    let mut iterations = 0;
    if gs[i + 1] == 0.0 {
        a = b;
    } else if ga != 0.0 {
        while iterations < opts.max_bisections && (b - a).abs() > 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1e-300) {
            let m = 0.5 * (a + b);
            let gm = g(m);
            iterations += 1;
            if gm == 0.0 {
                a = m;
                b = m;
                break;
            }
            if (gm < 0.0) == (ga < 0.0) {
                a = m;
                ga = gm;
            } else {
                b = m;
            }
        }
    } else {
        b = a;
    }
    let value = at(0.5 * (a + b));
    let p = params(value);
    let residual = (drude_contrast_lambda(&p, omega, mu_m)? - lambda_j).abs();
    if residual > opts.tolerance {
        return Err(Error::Numerical(format!(
            "design root at {value:.6e} leaves |lambda - lambda_j| = {residual:.3e} after {iterations} bisections"
        )));
    }
    Ok(DesignResult { value, params: p, residual, iterations })
}

/// `tau` with `lambda(|mu_c(tau)|^2 / (mu_m Re mu_c(tau))) = lambda_j` at fixed `F`.
pub fn design_relaxation_rate(lambda_j: f64, mu_m: f64, base: &DrudeParams, omega: f64, opts: &DesignOptions) -> Result<DesignResult> {
    design(lambda_j, mu_m, base, omega, opts, Knob::Tau)
}

/// `F` with the same resonance condition at fixed `tau`.
pub fn design_filling_factor(lambda_j: f64, mu_m: f64, base: &DrudeParams, omega: f64, opts: &DesignOptions) -> Result<DesignResult> {
    design(lambda_j, mu_m, base, omega, opts, Knob::Filling)
}

/// Trusted, simple, non-distinguished eigenvalue `lambda_j` as a design target.
pub fn design_target(decomp: &SpectralDecomposition, j: usize) -> Result<f64> {
    if j >= decomp.trusted || j == decomp.phi0_index {
        return Err(Error::Parameter(format!(
            "mode {j} is not a trusted resonance target (trusted prefix {}, distinguished mode {})",
            decomp.trusted, decomp.phi0_index
        )));
    }
    let l = decomp.eigenvalues[j];
    let gap = (0..decomp.len()).filter(|&i| i != j).map(|i| (decomp.eigenvalues[i] - l).abs()).fold(f64::INFINITY, f64::min);
    if gap < 1e-8 {
        return Err(Error::Parameter(format!("lambda_{j} = {l} is degenerate (gap {gap:.2e})")));
    }
    Ok(l)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    Tau,
    Filling,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Tau => "tau",
            SweepAxis::Filling => "F",
        }
    }
}

/// Everything a Drude resonance solve needs besides the Drude parameters.
#[derive(Clone, Debug)]
pub struct BlowupSetup {
    pub alpha: QuasiMomentum,
    pub curve: BoundaryCurve,
    pub cfg: SummationConfig,
    pub source: SourceDipole,
    pub lambda_j: f64,
    pub eps_m: f64,
    pub mu_m: f64,
    pub eps_c: C64,
    pub omega: f64,
    pub design: DesignOptions,
    pub solver: SolverOptions,
    pub grid_spacing: f64,
    /// Points whose energy cross-check exceeds this are excluded from fits.
    pub max_discrepancy: f64,
}

#[derive(Clone, Debug)]
pub struct DrudeSolve {
    pub materials: MaterialParams,
    pub response: DrudeResponse,
    pub solution: DensitySolution,
    pub energy: EnergyReport,
}

pub fn drude_energy(setup: &BlowupSetup, p: &DrudeParams) -> Result<DrudeSolve> {
    let response = drude_response(p, setup.omega);
    let materials = MaterialParams::new(setup.eps_m, setup.mu_m, setup.eps_c, response.mu)?;
    let (solution, ops) =
        solve_densities(setup.alpha, setup.omega, &materials, &setup.curve, &setup.source, &setup.cfg, &setup.solver)?;
    let energy = near_field_energy(&solution.phi, &ops.s_c, &ops.kstar_c, &setup.cfg, setup.grid_spacing)?;
    Ok(DrudeSolve { materials, response, solution, energy })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub tau: f64,
    pub filling: f64,
    pub mu_c: C64,
    pub sigma: f64,
    pub delta: f64,
    pub energy: f64,
    pub residual: f64,
    pub discrepancy: f64,
    pub in_regime: bool,
    pub included: bool,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
    /// Log-log slope of energy against the swept value over included rows.
    pub slope: Option<f64>,
}

impl SweepTable {
    pub fn included(&self) -> usize {
        self.rows.iter().filter(|r| r.included).count()
    }
}

/// Least-squares slope of `ln y` against `ln x`; `None` below two points.
pub fn fit_loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

fn failed_row(value: f64, axis: SweepAxis, e: &Error) -> SweepRow {
    let (tau, filling) = match axis {
        SweepAxis::Tau => (value, f64::NAN),
        SweepAxis::Filling => (f64::NAN, value),
    };
    SweepRow {
        value,
        tau,
        filling,
        mu_c: C64::new(f64::NAN, f64::NAN),
        sigma: f64::NAN,
        delta: f64::NAN,
        energy: f64::NAN,
        residual: f64::NAN,
        discrepancy: f64::NAN,
        in_regime: false,
        included: false,
        note: Some(e.to_string()),
    }
}

/// Sweeps `tau` (re-designing `F`) or `F` (re-designing `tau`) with the
/// resonance kept on `lambda_j`; failed or out-of-regime points are flagged
/// and left out of the slope fit.
pub fn sweep_blowup(setup: &BlowupSetup, base: &DrudeParams, axis: SweepAxis, grid: &[f64]) -> Result<SweepTable> {
    if grid.is_empty() {
        return Err(Error::Parameter("sweep grid is empty".into()));
    }
    let rows: Vec<SweepRow> = grid
        .par_iter()
        .map(|&v| {
            let designed = match axis {
                SweepAxis::Tau => design_filling_factor(setup.lambda_j, setup.mu_m, &base.with_tau(v), setup.omega, &setup.design),
                SweepAxis::Filling => {
                    design_relaxation_rate(setup.lambda_j, setup.mu_m, &base.with_filling(v), setup.omega, &setup.design)
                }
            };
            let solved = designed.and_then(|d| drude_energy(setup, &d.params).map(|s| (d, s)));
            match solved {
                Ok((d, s)) => {
                    let in_regime = s.solution.in_regime;
                    SweepRow {
                        value: v,
                        tau: d.params.tau,
                        filling: d.params.filling,
                        mu_c: s.response.mu,
                        sigma: s.response.sigma,
                        delta: s.response.delta,
                        energy: s.energy.energy,
                        residual: s.solution.residual,
                        discrepancy: s.energy.discrepancy,
                        in_regime,
                        included: in_regime && s.energy.discrepancy <= setup.max_discrepancy,
                        note: None,
                    }
                }
                Err(e) => failed_row(v, axis, &e),
            }
        })
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().filter(|r| r.included).map(|r| (r.value, r.energy)).unzip();
    let slope = if grid.len() > 1 { fit_loglog_slope(&x, &y) } else { None };
    Ok(SweepTable { axis, rows, slope })
}
