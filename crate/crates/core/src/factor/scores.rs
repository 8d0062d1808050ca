use nalgebra::DMatrix;

use super::FactorError;

pub const RIDGE: f64 = 1e-8;

/// Reciprocal condition estimate below which the ridge is applied.
const MIN_RCOND: f64 = 1e-12;

/// Regression score weights `R⁻¹ S` with structure `S = ΛΦ`.
pub fn score_weights(
    correlation: &DMatrix<f64>,
    pattern: &DMatrix<f64>,
    phi: &DMatrix<f64>,
) -> Result<DMatrix<f64>, FactorError> {
    let structure = pattern * phi;
    let well_conditioned = |m: &DMatrix<f64>| {
        let chol = m.clone().cholesky()?;
        let d = chol.l_dirty().diagonal();
        let (lo, hi) = (d.min(), d.max());
        ((lo / hi).powi(2) >= MIN_RCOND).then_some(chol)
    };
    if let Some(chol) = well_conditioned(correlation) {
        return Ok(chol.solve(&structure));
    }
    log::warn!("correlation matrix ill-conditioned; adding ridge {RIDGE}");
    let p = correlation.nrows();
    let ridged = correlation + DMatrix::<f64>::identity(p, p) * RIDGE;
    match ridged.cholesky() {
        Some(chol) => Ok(chol.solve(&structure)),
        None => Err(FactorError::SingularCorrelation),
    }
}

/// Thurstone regression factor scores: `Z R⁻¹ ΛΦ`.
pub fn factor_scores(
    z: &DMatrix<f64>,
    correlation: &DMatrix<f64>,
    pattern: &DMatrix<f64>,
    phi: &DMatrix<f64>,
) -> Result<DMatrix<f64>, FactorError> {
    Ok(z * score_weights(correlation, pattern, phi)?)
}
