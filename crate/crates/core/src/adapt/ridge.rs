use crate::error::{check_len, Error, Result};
use crate::numerics::{gemm, Cholesky, Mat, MatRef};

/// Batch ridge regression over column-stacked samples.
///
/// `states` is `n_x × T`, `targets` is `n_y × T`. Returns the `n_y × n_x`
/// matrix minimizing `Σ‖targets_i − W·states_i‖² + reg·‖W‖²_F`, i.e.
/// `targets·statesᵀ·(states·statesᵀ + reg·I)⁻¹`.
pub fn ridge_fit(states: &Mat, targets: &Mat, reg: f64) -> Result<Mat> {
    let n_x = states.rows();
    let n_y = targets.rows();
    let t = states.cols();
    check_len("ridge_fit sample count", t, targets.cols())?;
    if t == 0 || n_x == 0 || n_y == 0 {
        return Err(Error::Empty("ridge_fit samples"));
    }
    if !(reg > 0.0 && reg.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "ridge regularization must be > 0, got {reg}"
        )));
    }
    if !states.is_finite() || !targets.is_finite() {
        return Err(Error::NonFinite("ridge_fit data"));
    }

    // Gram = S·Sᵀ + reg·I, cross = S·Tᵀ (n_x × n_y).
    let mut gram = Mat::zeros(n_x, n_x);
    gemm(
        n_x,
        t,
        n_x,
        1.0,
        MatRef::row_major(states.as_slice(), t),
        MatRef::transposed(states.as_slice(), t),
        0.0,
        gram.as_mut_slice(),
    );
    for i in 0..n_x {
        let d = gram.get(i, i) + reg;
        gram.set(i, i, d);
    }
    gram.symmetrize();
    let mut cross = Mat::zeros(n_x, n_y);
    gemm(
        n_x,
        t,
        n_y,
        1.0,
        MatRef::row_major(states.as_slice(), t),
        MatRef::transposed(targets.as_slice(), t),
        0.0,
        cross.as_mut_slice(),
    );

    let chol = Cholesky::factor(&gram)?;
    let mut w = Mat::zeros(n_y, n_x);
    let mut col = vec![0.0; n_x];
    for j in 0..n_y {
        for (i, c) in col.iter_mut().enumerate() {
            *c = cross.get(i, j);
        }
        chol.solve_in_place(&mut col);
        w.row_mut(j).copy_from_slice(&col);
    }
    if !w.is_finite() {
        return Err(Error::NonFinite("ridge_fit solution"));
    }
    Ok(w)
}
