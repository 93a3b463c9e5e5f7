//! Dense and sparse-input numeric primitives.
//!
//! Embedding weights are `d × n` matrices whose `n` input columns are stored
//! contiguously ([`ColMatrix`]), so `W x` over a sparse `x` reads one
//! `d`-vector per nonzero and never looks at the other columns. The cost of
//! [`sparse_affine`] is `O(d · nnz(x))` whatever `n` is.

use std::collections::HashMap;

use crate::error::{contract, Result};
use crate::text::SparseRegionVector;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(contract(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(contract("ragged rows"));
        }
        Ok(DenseMatrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `out += self · x`
    pub fn matvec_acc(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols.max(1))) {
            *o += dot(row, x);
        }
    }

    /// `out += selfᵀ · y`
    pub fn t_matvec_acc(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (&yr, row) in y.iter().zip(self.data.chunks_exact(self.cols.max(1))) {
            if yr != 0.0 {
                axpy(yr, row, out);
            }
        }
    }

    /// `self += a · u vᵀ`
    pub fn add_outer(&mut self, a: f64, u: &[f64], v: &[f64]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for (&ur, row) in u.iter().zip(self.data.chunks_exact_mut(self.cols.max(1))) {
            if ur != 0.0 {
                axpy(a * ur, v, row);
            }
        }
    }
}

/// `d × n` matrix stored one contiguous column per input feature.
#[derive(Debug, Clone, PartialEq)]
pub struct ColMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ColMatrix {
    /// Zero-filled; large matrices are not touched until written.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ColMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// From a row-major `rows × cols` value list.
    pub fn from_row_major(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(contract(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        let mut m = ColMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[c * rows + r] = values[r * cols + c];
            }
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dense = DenseMatrix::from_rows(rows)?;
        ColMatrix::from_row_major(dense.rows, dense.cols, &dense.data)
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.data.len()];
        for c in 0..self.cols {
            for r in 0..self.rows {
                out[r * self.cols + c] = self.data[c * self.rows + r];
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[c * self.rows + r]
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn column_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += a · x`
#[inline]
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn check_affine(w: &ColMatrix, bias_len: usize, x: &SparseRegionVector, out_len: usize) -> Result<()> {
    if x.dim() != w.cols() || bias_len != w.rows() || out_len != w.rows() {
        return Err(contract(format!(
            "sparse affine: W is {}x{}, bias {}, x dim {}, out {}",
            w.rows(),
            w.cols(),
            bias_len,
            x.dim(),
            out_len
        )));
    }
    Ok(())
}

/// `W x + b` for sparse `x`.
pub fn sparse_affine(w: &ColMatrix, b: &[f64], x: &SparseRegionVector) -> Result<Vec<f64>> {
    let mut out = vec![0.0; w.rows()];
    sparse_affine_into(w, b, x, &mut out)?;
    Ok(out)
}

pub fn sparse_affine_into(w: &ColMatrix, b: &[f64], x: &SparseRegionVector, out: &mut [f64]) -> Result<()> {
    check_affine(w, b.len(), x, out.len())?;
    out.copy_from_slice(b);
    for (j, v) in x.iter() {
        axpy(v, w.column(j as usize), out);
    }
    Ok(())
}

/// Gradient of a loss with respect to the columns of an embedding matrix,
/// stored only for the columns that received any.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseColumns {
    rows: usize,
    cols: HashMap<u32, Vec<f64>>,
}

impl SparseColumns {
    pub fn new(rows: usize) -> Self {
        SparseColumns {
            rows,
            cols: HashMap::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn column(&self, j: u32) -> Option<&[f64]> {
        self.cols.get(&j).map(Vec::as_slice)
    }

    pub fn column_mut(&mut self, j: u32) -> &mut [f64] {
        let rows = self.rows;
        self.cols.entry(j).or_insert_with(|| vec![0.0; rows])
    }

    pub fn touched(&self) -> usize {
        self.cols.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &[f64])> + '_ {
        self.cols.iter().map(|(&j, c)| (j, c.as_slice()))
    }

    /// Column indices in ascending order.
    pub fn indices(&self) -> Vec<u32> {
        let mut idx: Vec<u32> = self.cols.keys().copied().collect();
        idx.sort_unstable();
        idx
    }

    pub fn add_assign(&mut self, other: &SparseColumns) {
        for j in other.indices() {
            let src = &other.cols[&j];
            axpy(1.0, src, self.column_mut(j));
        }
    }

    pub fn scale(&mut self, a: f64) {
        for c in self.cols.values_mut() {
            c.iter_mut().for_each(|v| *v *= a);
        }
    }

    pub fn clear(&mut self) {
        self.cols.clear();
    }

    pub fn to_dense(&self, n: usize) -> ColMatrix {
        let mut m = ColMatrix::zeros(self.rows, n);
        for (j, c) in self.iter() {
            m.column_mut(j as usize).copy_from_slice(c);
        }
        m
    }
}

/// Accumulates the gradient of `W x + b` given `grad_out = ∂L/∂(Wx+b)`.
///
/// Column `j` of `W` receives `grad_out · x_j` for every nonzero of `x`;
/// `b` receives `grad_out`. The input is data, so no gradient flows to it.
pub fn sparse_affine_grad(
    grad_out: &[f64],
    x: &SparseRegionVector,
    w_grad: &mut SparseColumns,
    b_grad: &mut [f64],
) -> Result<()> {
    if grad_out.len() != w_grad.rows() || b_grad.len() != grad_out.len() {
        return Err(contract(format!(
            "sparse affine grad: grad_out {}, W grad rows {}, b grad {}",
            grad_out.len(),
            w_grad.rows(),
            b_grad.len()
        )));
    }
    for (j, v) in x.iter() {
        axpy(v, grad_out, w_grad.column_mut(j));
    }
    axpy(1.0, grad_out, b_grad);
    Ok(())
}

pub fn relu(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| x.max(0.0)).collect()
}

pub fn relu_in_place(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
}

/// Passes `grad_out` where the input was strictly positive.
pub fn relu_grad(input: &[f64], grad_out: &[f64]) -> Vec<f64> {
    input
        .iter()
        .zip(grad_out)
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxXent {
    pub loss: f64,
    pub probs: Vec<f64>,
    pub grad_logits: Vec<f64>,
}

/// Softmax cross-entropy against `true_class`.
pub fn softmax_xent(logits: &[f64], true_class: usize) -> Result<SoftmaxXent> {
    if true_class >= logits.len() {
        return Err(contract(format!(
            "class {true_class} out of range for {} logits",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let probs: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    let loss = -((logits[true_class] - max) - sum.ln());
    let mut grad_logits = probs.clone();
    grad_logits[true_class] -= 1.0;
    Ok(SoftmaxXent {
        loss,
        probs,
        grad_logits,
    })
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Classical momentum: `v ← μ v − lr g`, `w ← w + v`.
pub fn momentum_step(w: &mut [f64], v: &mut [f64], g: &[f64], lr: f64, momentum: f64) -> Result<()> {
    if w.len() != v.len() || w.len() != g.len() {
        return Err(contract(format!(
            "momentum step: params {}, velocity {}, grads {}",
            w.len(),
            v.len(),
            g.len()
        )));
    }
    for ((wi, vi), gi) in w.iter_mut().zip(v.iter_mut()).zip(g) {
        *vi = momentum * *vi - lr * gi;
        *wi += *vi;
    }
    Ok(())
}

/// [`momentum_step`] for an embedding matrix whose gradient is column-sparse.
/// Every velocity entry decays; absent columns have zero gradient.
pub fn momentum_step_sparse(
    w: &mut ColMatrix,
    v: &mut ColMatrix,
    g: &SparseColumns,
    lr: f64,
    momentum: f64,
) -> Result<()> {
    if w.rows() != v.rows() || w.cols() != v.cols() || g.rows() != w.rows() {
        return Err(contract("momentum step: embedding shape mismatch"));
    }
    v.as_mut_slice().iter_mut().for_each(|x| *x *= momentum);
    for (j, col) in g.iter() {
        let vj = v.column_mut(j as usize);
        for (a, &gi) in vj.iter_mut().zip(col) {
            *a -= lr * gi;
        }
    }
    for (wi, vi) in w.as_mut_slice().iter_mut().zip(v.as_slice()) {
        *wi += vi;
    }
    Ok(())
}
