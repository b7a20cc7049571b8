//! Static (`k = 0`) spectral theory of the adjoint NP operator: the
//! distinguished eigenfunction `phi0`, the substitute single layer, the
//! `H*` Gram matrix and the `H*`-orthonormal eigenbasis.
//!
//! Sign convention: the substitute single layer sends `phi0` to `-1`, which
//! keeps `-S~` positive and makes `(phi0, phi0)_{H*} = (phi0, 1) = 1`.

use crate::error::{Error, Result};
use crate::geometry::BoundaryCurve;
use crate::potentials::{assemble_operators, Density, OperatorKind, OperatorMatrix};
use crate::quasi_green::{QuasiMomentum, SummationConfig};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

/// Accepted distance of the distinguished eigenvalue from 1/2.
pub const PHI0_TOLERANCE: f64 = 5e-3;
/// Accepted relative Calderón residual `|G K* - K*^H G| / |G K*|`.
pub const SELF_ADJOINT_TOLERANCE: f64 = 1e-6;
/// Accepted imaginary residue of the eigenvalues.
pub const IMAG_TOLERANCE: f64 = 1e-8;

fn cplx(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn weight_vector(curve: &BoundaryCurve) -> DVector<C64> {
    DVector::from_iterator(curve.len(), curve.weights().iter().map(|&w| cplx(w)))
}

/// `S`, `K*` and `K` at `k = 0`.
#[derive(Clone, Debug)]
pub struct StaticOperators {
    pub single_layer: OperatorMatrix,
    pub np_adjoint: OperatorMatrix,
    pub np_direct: OperatorMatrix,
}

impl StaticOperators {
    pub fn assemble(alpha: QuasiMomentum, curve: &BoundaryCurve, cfg: &SummationConfig) -> Result<Self> {
        let mut ops = assemble_operators(
            alpha,
            C64::new(0.0, 0.0),
            curve,
            cfg,
            &[OperatorKind::SingleLayer, OperatorKind::NpAdjoint, OperatorKind::NpDirect],
        )?;
        let np_direct = ops.pop().unwrap();
        let np_adjoint = ops.pop().unwrap();
        Ok(Self { single_layer: ops.pop().unwrap(), np_adjoint, np_direct })
    }

    /// 2-norm condition number of the discrete `S^{alpha,0}`.
    pub fn single_layer_condition(&self) -> f64 {
        let sv = self.single_layer.entries.clone().svd(false, false).singular_values;
        sv.max() / sv.min()
    }
}

/// Eigenvector of `K*` for the eigenvalue nearest 1/2, normalised by
/// `(phi0, 1) = 1`, with that eigenvalue.
pub fn preliminary_phi0(kstar: &OperatorMatrix) -> Result<(Density, f64)> {
    let n = kstar.len();
    let shift = 0.5 + 1e-3;
    let shifted = &kstar.entries - DMatrix::identity(n, n) * cplx(shift);
    let lu = shifted.lu();
    let mut v = DVector::from_element(n, cplx(1.0));
    let mut lambda = C64::new(0.0, 0.0);
    for _ in 0..50 {
        let next = lu.solve(&v).ok_or_else(|| Error::Numerical("K* - 1/2 shift is singular".into()))?;
        let norm = next.norm();
        v = next / cplx(norm);
        let kv = kstar.apply(&v);
        let new_lambda = v.dotc(&kv);
        if (new_lambda - lambda).norm() < 1e-15 {
            lambda = new_lambda;
            break;
        }
        lambda = new_lambda;
    }
    if (lambda - 0.5).norm() > PHI0_TOLERANCE {
        return Err(Error::Numerical(format!(
            "no eigenvalue of K* within {PHI0_TOLERANCE} of 1/2 (nearest found {lambda})"
        )));
    }
    let w = weight_vector(kstar.curve());
    let pairing = w.dot(&v);
    if pairing.norm() < 1e-8 * w.norm() * v.norm() {
        return Err(Error::Numerical("the eigenfunction for 1/2 has vanishing mean; phi0 is undefined".into()));
    }
    Ok((v / pairing, lambda.re))
}

/// `S~ = S (I - phi0 w^T) - 1 w^T`: equal to `S` on mean-zero densities and
/// `S~[phi0] = -1`.
pub fn build_substitute_single_layer(single_layer: &OperatorMatrix, phi0: &Density) -> Result<OperatorMatrix> {
    let n = single_layer.len();
    if phi0.len() != n {
        return Err(Error::Parameter("phi0 does not match the operator size".into()));
    }
    let w = weight_vector(single_layer.curve());
    let ones = DVector::from_element(n, cplx(1.0));
    let s = &single_layer.entries;
    let entries = s - (s * phi0) * w.transpose() - ones * w.transpose();
    OperatorMatrix::new(
        entries,
        OperatorKind::SubstituteSingleLayer,
        single_layer.wave_number,
        single_layer.alpha,
        single_layer.shared_curve(),
    )
}

/// Gram matrix of `(u, v)_{H*} = v^H G u`, `G = -(S~^H W + W S~)/2`.
pub fn hstar_gram(s_tilde: &OperatorMatrix) -> Result<DMatrix<C64>> {
    let w = DMatrix::from_diagonal(&weight_vector(s_tilde.curve()));
    let ws = &w * &s_tilde.entries;
    let g = (&ws + ws.adjoint()) * cplx(-0.5);
    let min = g.clone().symmetric_eigen().eigenvalues.min();
    if !(min > 0.0) {
        return Err(Error::Numerical(format!(
            "H* Gram matrix is not positive definite (smallest eigenvalue {min:.3e}); refine the discretisation"
        )));
    }
    Ok(g)
}

#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    /// Sorted by descending `|lambda|`.
    pub eigenvalues: Vec<f64>,
    /// Columns are `H*`-orthonormal eigenfunctions.
    pub eigenvectors: DMatrix<C64>,
    pub gram: DMatrix<C64>,
    pub phi0_index: usize,
    /// Leading eigenpairs considered resolved (`N/4`).
    pub trusted: usize,
    /// `|G K* - K*^H G| / |G K*|`.
    pub self_adjoint_residual: f64,
    /// Largest `|Im lambda|` before projection to the real axis.
    pub max_imag: f64,
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn mode(&self, j: usize) -> Density {
        self.eigenvectors.column(j).into_owned()
    }

    /// `(u, v)_{H*}`.
    pub fn inner(&self, u: &Density, v: &Density) -> C64 {
        v.dotc(&(&self.gram * u))
    }

    /// `(psi, phi_j)_{H*}` for every mode.
    pub fn coefficients(&self, psi: &Density) -> DVector<C64> {
        self.eigenvectors.adjoint() * (&self.gram * psi)
    }

    /// `sum_j lambda_j phi_j (., phi_j)_{H*}` as a matrix.
    pub fn reconstruct(&self) -> DMatrix<C64> {
        let lam = DMatrix::from_diagonal(&DVector::from_iterator(self.len(), self.eigenvalues.iter().map(|&l| cplx(l))));
        &self.eigenvectors * lam * self.eigenvectors.adjoint() * &self.gram
    }
}

/// Eigenpairs of `K*` that is self-adjoint for the Gram inner product.
pub fn np_eigensystem(kstar: &OperatorMatrix, gram: &DMatrix<C64>) -> Result<SpectralDecomposition> {
    let n = kstar.len();
    if gram.shape() != (n, n) {
        return Err(Error::Parameter("Gram matrix does not match the operator".into()));
    }
    let gk = gram * &kstar.entries;
    let self_adjoint_residual = (&gk - gk.adjoint()).norm() / gk.norm();
    if !(self_adjoint_residual < SELF_ADJOINT_TOLERANCE) {
        return Err(Error::Numerical(format!(
            "K* is not self-adjoint in H* (residual {self_adjoint_residual:.3e} >= {SELF_ADJOINT_TOLERANCE:.0e})"
        )));
    }
    let chol = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("H* Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    // L^H K* L^{-H}, similar to K*
    let m = l.adjoint() * &kstar.entries * l_inv.adjoint();
    let max_imag = m.clone().schur().eigenvalues().map(|e| e.iter().map(|z| z.im.abs()).fold(0.0, f64::max)).unwrap_or(0.0);
    if !(max_imag < IMAG_TOLERANCE) {
        return Err(Error::Numerical(format!("eigenvalues of K* have imaginary residue {max_imag:.3e}")));
    }
    let herm = (&m + m.adjoint()) * cplx(0.5);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].abs().total_cmp(&eig.eigenvalues[a].abs()));
    let eigenvalues: Vec<f64> = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let l_inv_h = l_inv.adjoint();
    let mut eigenvectors = DMatrix::zeros(n, n);
    let w = weight_vector(kstar.curve());
    for (c, &j) in order.iter().enumerate() {
        let mut phi = &l_inv_h * eig.eigenvectors.column(j);
        // fix the phase: real positive mean where the mean is not negligible,
        // else real positive largest entry
        let mean = w.dot(&phi);
        let anchor = if mean.norm() > 1e-8 * phi.norm() {
            mean
        } else {
            *phi.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap()
        };
        phi *= anchor.conj() / anchor.norm();
        eigenvectors.set_column(c, &phi);
    }
    let phi0_index = (0..n)
        .min_by(|&a, &b| (eigenvalues[a] - 0.5).abs().total_cmp(&(eigenvalues[b] - 0.5).abs()))
        .unwrap();
    if (eigenvalues[phi0_index] - 0.5).abs() > PHI0_TOLERANCE {
        return Err(Error::Numerical(format!(
            "distinguished eigenvalue {} is not within {PHI0_TOLERANCE} of 1/2",
            eigenvalues[phi0_index]
        )));
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        gram: gram.clone(),
        phi0_index,
        trusted: n / 4,
        self_adjoint_residual,
        max_imag,
    })
}

/// Full static pipeline: assemble, `phi0`, `S~`, Gram, eigensystem.
#[derive(Clone, Debug)]
pub struct StaticSpectrum {
    pub operators: StaticOperators,
    pub phi0: Density,
    pub substitute: OperatorMatrix,
    pub decomposition: SpectralDecomposition,
}

pub fn static_spectrum(alpha: QuasiMomentum, curve: &BoundaryCurve, cfg: &SummationConfig) -> Result<StaticSpectrum> {
    let operators = StaticOperators::assemble(alpha, curve, cfg)?;
    let (phi0, _) = preliminary_phi0(&operators.np_adjoint)?;
    let substitute = build_substitute_single_layer(&operators.single_layer, &phi0)?;
    let gram = hstar_gram(&substitute)?;
    let decomposition = np_eigensystem(&operators.np_adjoint, &gram)?;
    Ok(StaticSpectrum { operators, phi0, substitute, decomposition })
}

#[derive(Clone, Debug)]
pub struct PerturbedEigenpair {
    pub index: usize,
    pub tau: C64,
    pub tau_omega: C64,
    pub phi_omega: Density,
    pub tau_j1: C64,
}

/// First-order perturbation of the eigenpairs of
/// `A(omega) = A0 + omega^2 ln omega A1 + O(omega^2)` over the trusted modes.
/// Returns the pairs for `targets` and the coupling matrix
/// `R_jl = (A1[phi_j], phi_l)_{H*}` on the trusted block.
pub fn perturb_eigensystem(
    decomp: &SpectralDecomposition,
    a1: &DMatrix<C64>,
    omega: f64,
    mu_m: f64,
    mu_c: C64,
    targets: &[usize],
) -> Result<(Vec<PerturbedEigenpair>, DMatrix<C64>)> {
    let n = decomp.eigenvectors.nrows();
    if a1.shape() != (n, n) {
        return Err(Error::Parameter("A1 block does not match the discretisation".into()));
    }
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(Error::Parameter(format!("frequency {omega} must be non-negative")));
    }
    let m = decomp.trusted;
    let phis = decomp.eigenvectors.columns(0, m);
    let r = (phis.adjoint() * &decomp.gram * a1 * phis).transpose();
    let contrast = cplx(1.0 / mu_m) - mu_c.inv();
    let mean = (cplx(1.0 / mu_m) + mu_c.inv()) * 0.5;
    let eps = if omega > 0.0 { omega * omega * omega.ln() } else { 0.0 };
    let mut out = Vec::with_capacity(targets.len());
    for &j in targets {
        if j >= m {
            return Err(Error::Parameter(format!("mode {j} is outside the trusted range 0..{m}")));
        }
        let lj = decomp.eigenvalues[j];
        let tau = mean + contrast * lj;
        let mut phi = decomp.mode(j);
        for l in 0..m {
            if l == j {
                continue;
            }
            let gap = lj - decomp.eigenvalues[l];
            if gap.abs() < 1e-8 {
                return Err(Error::Numerical(format!("eigenvalues {j} and {l} are degenerate (gap {gap:.3e})")));
            }
            if eps != 0.0 && r[(j, l)] != C64::new(0.0, 0.0) {
                phi += decomp.eigenvectors.column(l) * (r[(j, l)] / (contrast * gap) * eps);
            }
        }
        out.push(PerturbedEigenpair { index: j, tau, tau_omega: tau + r[(j, j)] * eps, phi_omega: phi, tau_j1: r[(j, j)] });
    }
    Ok((out, r))
}
