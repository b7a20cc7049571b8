use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Entrywise least-squares fit `M(k) ~ constant + k^2 ln k * k2_log_k + k^2 * k2`.
#[derive(Clone, Debug)]
pub struct ExpansionBlocks {
    pub constant: DMatrix<C64>,
    pub k2_log_k: DMatrix<C64>,
    pub k2: DMatrix<C64>,
    /// Condition number of the column-equilibrated design matrix.
    pub condition: f64,
    /// Largest entrywise residual divided by that entry's largest coefficient.
    pub max_residual_ratio: f64,
}

const MAX_CONDITION: f64 = 1e8;

pub fn low_k_fit(samples: &[(f64, DMatrix<C64>)]) -> Result<ExpansionBlocks> {
    if samples.len() < 4 {
        return Err(Error::Parameter(format!("low_k_fit needs >= 4 samples, got {}", samples.len())));
    }
    let shape = samples[0].1.shape();
    for (k, m) in samples {
        if !(*k > 0.0 && *k <= 0.05) {
            return Err(Error::Parameter(format!("sample wave number {k} outside (0, 0.05]")));
        }
        if m.shape() != shape {
            return Err(Error::Parameter("sample matrices differ in shape".into()));
        }
    }
    let basis = |k: f64| [1.0, k * k * k.ln(), k * k];
    let rows = samples.len();
    let a = DMatrix::<f64>::from_fn(rows, 3, |i, j| basis(samples[i].0)[j]);
    let scale: Vec<f64> = (0..3).map(|j| a.column(j).norm()).collect();
    if scale.contains(&0.0) {
        return Err(Error::IllConditioned(f64::INFINITY));
    }
    let a_s = DMatrix::<f64>::from_fn(rows, 3, |i, j| a[(i, j)] / scale[j]);
    let sv = a_s.clone().svd(false, false).singular_values;
    let condition = sv.max() / sv.min();
    if !(condition < MAX_CONDITION) {
        return Err(Error::IllConditioned(condition));
    }
    let pinv = a_s
        .pseudo_inverse(1e-14)
        .map_err(|e| Error::Numerical(format!("pseudo-inverse failed: {e}")))?;
    let mut blocks = [DMatrix::<C64>::zeros(shape.0, shape.1), DMatrix::zeros(shape.0, shape.1), DMatrix::zeros(shape.0, shape.1)];
    for (j, block) in blocks.iter_mut().enumerate() {
        for (i, (_, m)) in samples.iter().enumerate() {
            *block += m * C64::new(pinv[(j, i)] / scale[j], 0.0);
        }
    }
    let mut worst = 0.0f64;
    for idx in 0..shape.0 * shape.1 {
        let coef = [blocks[0][idx], blocks[1][idx], blocks[2][idx]];
        let cmax = coef.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mut rmax = 0.0f64;
        for (k, m) in samples {
            let b = basis(*k);
            let model = coef[0] * b[0] + coef[1] * b[1] + coef[2] * b[2];
            rmax = rmax.max((m[idx] - model).norm());
        }
        if cmax > 0.0 {
            worst = worst.max(rmax / cmax);
        } else if rmax > 0.0 {
            worst = f64::INFINITY;
        }
    }
    if worst > 1e-3 {
        return Err(Error::Numerical(format!(
            "low-k fit residual {worst:.3e} exceeds 1e-3 of the coefficient scale; data is not of the form c0 + c1 k^2 ln k + c2 k^2"
        )));
    }
    let [constant, k2_log_k, k2] = blocks;
    Ok(ExpansionBlocks { constant, k2_log_k, k2, condition, max_residual_ratio: worst })
}
