//! Activations and class-weighted cross-entropy objectives.
//!
//! Gradients are returned with respect to the pre-activation logits, which is
//! what both the boosted trees and the network consume.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-12;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// In-place softmax of one row, with the row maximum subtracted first.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Row-wise softmax of an `N x K` logit matrix.
pub fn softmax(logits: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        softmax_in_place(row.as_slice_mut().expect("owned rows are contiguous"));
    }
    out
}

/// Index labels as an `N x K` one-hot matrix.
pub fn one_hot(labels: &[usize], k: usize) -> Array2<f64> {
    let mut m = Array2::zeros((labels.len(), k));
    for (i, &y) in labels.iter().enumerate() {
        m[[i, y]] = 1.0;
    }
    m
}

fn clamp(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Weighted binary cross-entropy.
///
/// `y` holds 0/1 labels, `p` the predicted probability of class 1 and
/// `weights` the two class weights. Returns the loss and the gradient with
/// respect to each pre-sigmoid logit, `(w_{y_i} / N)(p_i - y_i)`.
pub fn weighted_bce(y: &[usize], p: &[f64], weights: &[f64]) -> Result<(f64, Vec<f64>)> {
    if y.len() != p.len() {
        return Err(Error::Shape(format!(
            "{} labels but {} probabilities",
            y.len(),
            p.len()
        )));
    }
    if weights.len() != 2 {
        return Err(Error::Shape(format!(
            "binary loss needs 2 class weights, got {}",
            weights.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let n = y.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(y.len());
    for (&yi, &pi) in y.iter().zip(p) {
        if yi > 1 {
            return Err(Error::invalid(format!("binary label {yi} out of range")));
        }
        let w = weights[yi];
        let t = yi as f64;
        let pc = clamp(pi);
        loss -= w * (t * pc.ln() + (1.0 - t) * (1.0 - pc).ln());
        grad.push(w / n * (pi - t));
    }
    Ok((loss / n, grad))
}

/// Weighted categorical cross-entropy over index labels.
///
/// Returns the loss `-(1/N) Σ_i w_{y_i} log p_{i,y_i}` and its gradient with
/// respect to the pre-softmax logits, `(w_{y_i} / N)(p_{i,k} - [k = y_i])`.
pub fn weighted_cce(
    y: &[usize],
    p: ArrayView2<'_, f64>,
    weights: &[f64],
) -> Result<(f64, Array2<f64>)> {
    let (n, k) = p.dim();
    if y.len() != n {
        return Err(Error::Shape(format!(
            "{} labels but {n} probability rows",
            y.len()
        )));
    }
    if weights.len() != k {
        return Err(Error::Shape(format!(
            "{k} classes but {} class weights",
            weights.len()
        )));
    }
    if k < 2 {
        return Err(Error::invalid(
            "categorical loss needs at least two classes",
        ));
    }
    if n == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let nf = n as f64;
    let mut loss = 0.0;
    let mut grad = p.to_owned();
    for (i, &yi) in y.iter().enumerate() {
        if yi >= k {
            return Err(Error::invalid(format!(
                "label {yi} out of range for {k} classes"
            )));
        }
        let w = weights[yi];
        loss -= w * clamp(p[[i, yi]]).ln();
        let mut row = grad.row_mut(i);
        row[yi] -= 1.0;
        row *= w / nf;
    }
    Ok((loss / nf, grad))
}

/// Weighted categorical cross-entropy evaluated directly on logits.
pub fn weighted_cce_logits(
    y: &[usize],
    logits: ArrayView2<'_, f64>,
    weights: &[f64],
) -> Result<(f64, Array2<f64>)> {
    let p = softmax(logits);
    weighted_cce(y, p.view(), weights)
}
