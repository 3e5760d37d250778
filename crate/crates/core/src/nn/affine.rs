use rand::Rng;

use super::tensor::{vec_mat_acc, vec_mat_backward};
use super::{Gradients, Matrix, ParamId, ParamSet};
use crate::error::{Error, Result};

/// `x · w + b`, with `b` broadcast over the rows of `x`.
pub fn affine(x: &Matrix, w: &Matrix, b: &Matrix) -> Result<Matrix> {
    check_affine(x, w, b)?;
    let mut out = Matrix::zeros(x.rows(), w.cols());
    for r in 0..x.rows() {
        let row = out.row_mut(r);
        row.copy_from_slice(b.as_slice());
        vec_mat_acc(x.row(r), w, row);
    }
    Ok(out)
}

/// Gradients of a batched affine map.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineGrads {
    pub dx: Matrix,
    pub dw: Matrix,
    pub db: Matrix,
}

pub fn affine_backward(x: &Matrix, w: &Matrix, dout: &Matrix) -> Result<AffineGrads> {
    if x.cols() != w.rows() {
        return Err(Error::dim("affine input width", w.rows(), x.cols()));
    }
    if dout.shape() != (x.rows(), w.cols()) {
        return Err(Error::dim("affine upstream gradient", w.cols(), dout.cols()));
    }
    let mut dx = Matrix::zeros(x.rows(), x.cols());
    let mut dw = Matrix::zeros(w.rows(), w.cols());
    let mut db = Matrix::zeros(1, w.cols());
    for r in 0..x.rows() {
        vec_mat_backward(x.row(r), w, dout.row(r), Some(dx.row_mut(r)), &mut dw);
        for (g, d) in db.as_mut_slice().iter_mut().zip(dout.row(r)) {
            *g += d;
        }
    }
    Ok(AffineGrads { dx, dw, db })
}

fn check_affine(x: &Matrix, w: &Matrix, b: &Matrix) -> Result<()> {
    if x.cols() != w.rows() {
        return Err(Error::dim("affine input width", w.rows(), x.cols()));
    }
    if b.rows() != 1 || b.cols() != w.cols() {
        return Err(Error::dim("affine bias width", w.cols(), b.len()));
    }
    Ok(())
}

/// Affine layer whose weights live in a [`ParamSet`].
#[derive(Debug, Clone, Copy)]
pub struct Affine {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Affine {
    pub fn new<R: Rng>(
        params: &mut ParamSet,
        prefix: &str,
        input: usize,
        output: usize,
        rng: &mut R,
    ) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        let w = params.add(
            format!("{prefix}.w"),
            Matrix::uniform(input, output, bound, rng),
        );
        let b = params.add(
            format!("{prefix}.b"),
            Matrix::uniform(1, output, bound, rng),
        );
        Self {
            w,
            b,
            input,
            output,
        }
    }

    pub fn forward(&self, params: &ParamSet, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input {
            return Err(Error::dim("affine input", self.input, x.len()));
        }
        let mut out = params.value(self.b).as_slice().to_vec();
        vec_mat_acc(x, params.value(self.w), &mut out);
        Ok(out)
    }

    /// Accumulates weight gradients and returns `d loss / d x`.
    pub fn backward(
        &self,
        params: &ParamSet,
        x: &[f64],
        dy: &[f64],
        grads: &mut Gradients,
    ) -> Vec<f64> {
        let mut dx = vec![0.0; self.input];
        vec_mat_backward(x, params.value(self.w), dy, Some(&mut dx), grads.get_mut(self.w));
        for (g, d) in grads.get_mut(self.b).as_mut_slice().iter_mut().zip(dy) {
            *g += d;
        }
        dx
    }
}
