//! Conditioned weighted discrete least-squares with incrementally maintained
//! QR factors of the weighted Vandermonde matrix.
//!
//! The memory is a FIFO window of (sample point, gradient, control) records.
//! [`QrState`] mirrors the active window: Givens-rotation row updates and
//! downdates keep `Q R = sqrt(W) V` as the window slides, and the projection
//! `Q^T sqrt(W) Psi` of the gradient data is carried through the same
//! rotations so a fit costs two triangular solves instead of a refactor.

use crate::polybasis::BasisContext;
use crate::sampling::{weight, SamplingMeasure};
use nalgebra::{DMatrix, DVector};
use std::collections::VecDeque;

/// One memory entry: where the gradient was sampled, its value, and the
/// control it was evaluated at (needed again when resampling).
#[derive(Clone, Debug)]
pub struct MemoryRecord {
    pub point: Vec<f64>,
    pub grad: DVector<f64>,
    pub control: DVector<f64>,
}

/// FIFO buffer of gradient observations. The newest `active` records form
/// the least-squares window; older retained records are the extended memory
/// that accumulates ahead of an approximation-space switch.
#[derive(Clone, Debug, Default)]
pub struct Memory {
    records: VecDeque<MemoryRecord>,
    active: usize,
}

impl Memory {
    pub fn new(active: usize) -> Self {
        Memory {
            records: VecDeque::new(),
            active,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Size of the least-squares window.
    pub fn active(&self) -> usize {
        self.active.min(self.records.len())
    }

    pub fn set_active(&mut self, active: usize) {
        self.active = active;
    }

    /// Promotes every retained record into the active window.
    pub fn promote_all(&mut self) {
        self.active = self.records.len();
    }

    pub fn push(&mut self, record: MemoryRecord) {
        self.records.push_back(record);
    }

    pub fn pop_oldest(&mut self) -> Option<MemoryRecord> {
        self.records.pop_front()
    }

    /// Oldest record of the active window.
    pub fn oldest_active(&self) -> &MemoryRecord {
        &self.records[self.records.len() - self.active()]
    }

    pub fn active_records(&self) -> impl Iterator<Item = &MemoryRecord> {
        self.records.iter().skip(self.records.len() - self.active())
    }

    pub fn iter_all(&self) -> impl Iterator<Item = &MemoryRecord> {
        self.records.iter()
    }

    pub fn iter_mut_all(&mut self) -> impl Iterator<Item = &mut MemoryRecord> {
        self.records.iter_mut()
    }
}

/// Vandermonde matrix `V_ij = phi_j(y_i)`.
pub fn build_vandermonde(points: &[Vec<f64>], ctx: &BasisContext) -> DMatrix<f64> {
    let mut v = DMatrix::zeros(points.len(), ctx.size());
    let mut row = DVector::zeros(ctx.size());
    for (i, y) in points.iter().enumerate() {
        ctx.basis_eval_into(y, &mut row);
        v.row_mut(i).copy_from(&row.transpose());
    }
    v
}

/// Gram matrix `G = (1/s) V^T W V` for a diagonal weight vector.
pub fn gram_matrix(v: &DMatrix<f64>, weights: &[f64]) -> DMatrix<f64> {
    let s = v.nrows();
    assert_eq!(weights.len(), s);
    let mut scaled = v.clone();
    for (i, w) in weights.iter().enumerate() {
        let mut row = scaled.row_mut(i);
        row *= *w;
    }
    (v.transpose() * scaled) / s as f64
}

/// Spectral norm of `G - I` computed by symmetric eigendecomposition.
pub fn gram_deviation(g: &DMatrix<f64>) -> f64 {
    let eigen = g.clone().symmetric_eigen();
    eigen
        .eigenvalues
        .iter()
        .map(|l| (l - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Stability test of the conditioned estimator: `|| G - I ||_2 <= 1/2`.
pub fn conditioning_check(g: &DMatrix<f64>) -> bool {
    gram_deviation(g) <= 0.5
}

/// Warm-started power iteration for `|| G - I ||_2` with `G = R^T R / s`.
/// Iterating on `(G - I)^2` keeps the estimate robust to sign-symmetric
/// spectra; the vector is preserved across calls so successive estimates on
/// slowly changing windows converge in a handful of matvecs.
#[derive(Clone, Debug, Default)]
pub struct SpectralEstimator {
    v: DVector<f64>,
}

impl SpectralEstimator {
    pub fn new() -> Self {
        SpectralEstimator {
            v: DVector::zeros(0),
        }
    }

    pub fn reset(&mut self) {
        self.v = DVector::zeros(0);
    }

    pub fn estimate(&mut self, r: &DMatrix<f64>, rows: usize) -> f64 {
        let m = r.ncols();
        if self.v.len() != m {
            self.v = DVector::from_fn(m, |i, _| 1.0 / (i as f64 + 1.0));
            self.v /= self.v.norm();
        }
        let s = rows as f64;
        let apply_b = |x: &DVector<f64>| -> DVector<f64> {
            let rx = r * x;
            let mut gx = r.transpose() * rx;
            gx /= s;
            gx -= x;
            gx
        };
        let mut estimate = 0.0f64;
        for _ in 0..400 {
            let bv = apply_b(&self.v);
            let new_estimate = bv.norm();
            if new_estimate < 1e-300 {
                return 0.0;
            }
            let b2v = apply_b(&bv);
            let norm = b2v.norm();
            if norm > 1e-300 {
                self.v = b2v / norm;
            }
            if (new_estimate - estimate).abs() <= 1e-12 * new_estimate.max(1e-30) {
                return new_estimate;
            }
            estimate = new_estimate;
        }
        estimate
    }
}

/// A fitted surrogate of the gradient map: one coefficient row per basis
/// function, columns indexing control degrees of freedom. The zero model
/// carries `conditioned = false` and all-zero coefficients.
#[derive(Clone, Debug)]
pub struct FittedModel {
    pub coeffs: DMatrix<f64>,
    pub conditioned: bool,
}

impl FittedModel {
    pub fn zero(m: usize, dim_u: usize) -> Self {
        FittedModel {
            coeffs: DMatrix::zeros(m, dim_u),
            conditioned: false,
        }
    }

    pub fn eval(&self, ctx: &BasisContext, y: &[f64]) -> DVector<f64> {
        let phi = ctx.basis_eval(y);
        self.coeffs.transpose() * phi
    }

    /// Expectation under the reference measure: the coefficient of the
    /// constant basis function, which sits at position 0.
    pub fn mean(&self) -> DVector<f64> {
        self.coeffs.row(0).transpose()
    }
}

/// Expectation of a fitted model under the reference measure.
pub fn expectation_of_fit(model: &FittedModel) -> DVector<f64> {
    model.mean()
}

fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    let h = a.hypot(b);
    if h == 0.0 {
        (1.0, 0.0, 0.0)
    } else {
        (a / h, b / h, h)
    }
}

fn solve_upper(r: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let m = r.ncols();
    let mut x = b.clone();
    for i in (0..m).rev() {
        for j in i + 1..m {
            x[i] -= r[(i, j)] * x[j];
        }
        x[i] /= r[(i, i)];
    }
    x
}

fn solve_upper_transposed(r: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let m = r.ncols();
    let mut x = b.clone();
    for i in 0..m {
        for j in 0..i {
            x[i] -= r[(j, i)] * x[j];
        }
        x[i] /= r[(i, i)];
    }
    x
}

/// QR factors of the weighted Vandermonde matrix of the active memory
/// window, with rows in time order, plus the data projection used to solve
/// the weighted normal equations.
#[derive(Clone, Debug)]
pub struct QrState {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    weighted: DMatrix<f64>,
    sqrt_w: VecDeque<f64>,
    proj: Option<DMatrix<f64>>,
    dim_u: usize,
}

impl QrState {
    /// Factors the active window of `memory` from scratch.
    pub fn from_memory(memory: &Memory, ctx: &BasisContext, measure: SamplingMeasure) -> QrState {
        let records: Vec<&MemoryRecord> = memory.active_records().collect();
        let s = records.len();
        let m = ctx.size();
        let dim_u = records.first().map_or(0, |r| r.grad.len());
        let mut weighted = DMatrix::zeros(s, m);
        let mut data = DMatrix::zeros(s, dim_u);
        let mut sqrt_w = VecDeque::with_capacity(s);
        let mut phi = DVector::zeros(m);
        for (i, rec) in records.iter().enumerate() {
            let sw = weight(measure, ctx, &rec.point).sqrt();
            sqrt_w.push_back(sw);
            ctx.basis_eval_into(&rec.point, &mut phi);
            for j in 0..m {
                weighted[(i, j)] = sw * phi[j];
            }
            for j in 0..dim_u {
                data[(i, j)] = sw * rec.grad[j];
            }
        }
        let qr = weighted.clone().qr();
        let q = qr.q();
        let r = qr.r();
        let proj = Some(q.transpose() * data);
        QrState {
            q,
            r,
            weighted,
            sqrt_w,
            proj,
            dim_u,
        }
    }

    pub fn nrows(&self) -> usize {
        self.q.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.r.ncols()
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn weighted_snapshot(&self) -> &DMatrix<f64> {
        &self.weighted
    }

    /// Gram matrix of the window, `R^T R / s`.
    pub fn gram(&self) -> DMatrix<f64> {
        (self.r.transpose() * &self.r) / self.nrows() as f64
    }

    /// Appends a new observation row (newest sample) via Givens rotations.
    pub fn append_row(&mut self, basis_row: &DVector<f64>, w: f64, data: &DVector<f64>) {
        let m = self.ncols();
        let s = self.nrows();
        assert_eq!(basis_row.len(), m);
        let sw = w.sqrt();

        let new_row = basis_row.transpose() * sw;
        self.weighted = self.weighted.clone().insert_row(s, 0.0);
        self.weighted.row_mut(s).copy_from(&new_row);
        self.sqrt_w.push_back(sw);

        // Work on [Q 0; 0 1] and [R; v] with v the new weighted row.
        self.q = self.q.clone().insert_row(s, 0.0);
        let mut extra = DVector::zeros(s + 1);
        extra[s] = 1.0;
        let mut v: Vec<f64> = new_row.iter().copied().collect();
        let mut data_row: Vec<f64> = data.iter().map(|g| sw * g).collect();
        for i in 0..m {
            let (c, sn, h) = givens(self.r[(i, i)], v[i]);
            if sn == 0.0 && c == 1.0 {
                // Rotation is the identity but still sets the diagonal.
                self.r[(i, i)] = h;
                continue;
            }
            self.r[(i, i)] = h;
            v[i] = 0.0;
            for j in i + 1..m {
                let rij = self.r[(i, j)];
                self.r[(i, j)] = c * rij + sn * v[j];
                v[j] = -sn * rij + c * v[j];
            }
            for k in 0..s + 1 {
                let qk = self.q[(k, i)];
                let ek = extra[k];
                self.q[(k, i)] = c * qk + sn * ek;
                extra[k] = -sn * qk + c * ek;
            }
            if let Some(proj) = self.proj.as_mut() {
                for j in 0..self.dim_u {
                    let pj = proj[(i, j)];
                    proj[(i, j)] = c * pj + sn * data_row[j];
                    data_row[j] = -sn * pj + c * data_row[j];
                }
            }
        }
    }

    /// Removes the oldest observation row (top of the window). `data` must
    /// be the gradient stored in that record. Returns false when the
    /// downdate is too ill-conditioned and the caller must refactor.
    #[must_use]
    pub fn delete_oldest_row(&mut self, data: &DVector<f64>) -> bool {
        let s = self.nrows();
        let m = self.ncols();
        assert!(s > 0);
        let q0 = self.q.row(0).transpose();
        let gamma_sq = 1.0 - q0.norm_squared();
        if gamma_sq < 1e-12 {
            return false;
        }
        let gamma = gamma_sq.sqrt();
        // Unit vector extending Q so that the deleted row is representable.
        let mut y = -(&self.q * &q0);
        y[0] += 1.0;
        y /= gamma;

        let sw0 = self.sqrt_w[0];
        let mut extra_r = vec![0.0f64; m];
        let mut extra_p: Vec<f64> = if let Some(proj) = self.proj.as_ref() {
            let qp = proj.transpose() * &q0;
            (0..self.dim_u)
                .map(|j| (sw0 * data[j] - qp[j]) / gamma)
                .collect()
        } else {
            Vec::new()
        };

        let mut head = gamma;
        for i in (0..m).rev() {
            let (c, sn, h) = givens(head, self.q[(0, i)]);
            head = h;
            for k in 0..s {
                let yk = y[k];
                let qk = self.q[(k, i)];
                y[k] = c * yk + sn * qk;
                self.q[(k, i)] = -sn * yk + c * qk;
            }
            for j in i..m {
                let ej = extra_r[j];
                let rij = self.r[(i, j)];
                extra_r[j] = c * ej + sn * rij;
                self.r[(i, j)] = -sn * ej + c * rij;
            }
            if let Some(proj) = self.proj.as_mut() {
                for j in 0..self.dim_u {
                    let ej = extra_p[j];
                    let pij = proj[(i, j)];
                    extra_p[j] = c * ej + sn * pij;
                    proj[(i, j)] = -sn * ej + c * pij;
                }
            }
        }

        self.q = self.q.clone().remove_row(0);
        self.weighted = self.weighted.clone().remove_row(0);
        self.sqrt_w.pop_front();
        true
    }

    /// Appends new basis columns (evaluated, unweighted, at the window rows
    /// in row order): projects them onto the current Q and orthogonalizes
    /// the residual block. Invalidates the data projection; callers must
    /// rebuild before fitting again.
    pub fn append_columns(&mut self, cols: &DMatrix<f64>) {
        let s = self.nrows();
        let m = self.ncols();
        let k = cols.ncols();
        assert_eq!(cols.nrows(), s);
        let mut wc = cols.clone();
        for (i, sw) in self.sqrt_w.iter().enumerate() {
            let mut row = wc.row_mut(i);
            row *= *sw;
        }
        let b = self.q.transpose() * &wc;
        let mut e = &wc - &self.q * &b;
        // Second orthogonalization pass guards against cancellation.
        let b2 = self.q.transpose() * &e;
        e -= &self.q * &b2;
        let b = b + b2;
        let qr = e.qr();
        let q2 = qr.q();
        let r22 = qr.r();

        let mut q_new = DMatrix::zeros(s, m + k);
        q_new.view_mut((0, 0), (s, m)).copy_from(&self.q);
        q_new.view_mut((0, m), (s, k)).copy_from(&q2);
        let mut r_new = DMatrix::zeros(m + k, m + k);
        r_new.view_mut((0, 0), (m, m)).copy_from(&self.r);
        r_new.view_mut((0, m), (m, k)).copy_from(&b);
        r_new.view_mut((m, m), (k, k)).copy_from(&r22);
        let mut w_new = DMatrix::zeros(s, m + k);
        w_new.view_mut((0, 0), (s, m)).copy_from(&self.weighted);
        w_new.view_mut((0, m), (s, k)).copy_from(&wc);

        self.q = q_new;
        self.r = r_new;
        self.weighted = w_new;
        self.proj = None;
    }

    /// Recomputes all weights under a (possibly new) sampling measure and
    /// refactors from scratch. Row order and data follow the active window.
    pub fn rebuild_weights(&mut self, memory: &Memory, ctx: &BasisContext, measure: SamplingMeasure) {
        *self = QrState::from_memory(memory, ctx, measure);
    }

    /// `max |Q^T Q - I|`, the orthogonality drift of the maintained factor.
    pub fn orthogonality_error(&self) -> f64 {
        let mut gtg = self.q.transpose() * &self.q;
        for i in 0..gtg.nrows() {
            gtg[(i, i)] -= 1.0;
        }
        gtg.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// `max |Q R - sqrt(W) V|`, the factorization residual.
    pub fn factor_residual(&self) -> f64 {
        let qr = &self.q * &self.r;
        (qr - &self.weighted)
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// Full coefficient solve `R C = Q^T sqrt(W) Psi`.
    pub fn solve_coefficients(&self) -> DMatrix<f64> {
        let proj = self
            .proj
            .as_ref()
            .expect("data projection missing; rebuild the factorization first");
        let m = self.ncols();
        let mut coeffs = DMatrix::zeros(m, self.dim_u);
        for j in 0..self.dim_u {
            let col = solve_upper(&self.r, &DVector::from_column_slice(proj.column(j).as_slice()));
            coeffs.column_mut(j).copy_from(&col);
        }
        coeffs
    }

    /// Value of the fitted model at basis vector `phi` without materializing
    /// coefficients: `Psi^T sqrt(W) Q R^{-T} phi`.
    pub fn fit_value(&self, phi: &DVector<f64>) -> DVector<f64> {
        let proj = self
            .proj
            .as_ref()
            .expect("data projection missing; rebuild the factorization first");
        let t = solve_upper_transposed(&self.r, phi);
        proj.transpose() * t
    }

    /// Reference-measure mean of the fitted model (coefficient of the
    /// constant basis function at position 0).
    pub fn fit_mean(&self) -> DVector<f64> {
        let proj = self
            .proj
            .as_ref()
            .expect("data projection missing; rebuild the factorization first");
        let m = self.ncols();
        let mut e0 = DVector::zeros(m);
        e0[0] = 1.0;
        let t = solve_upper_transposed(&self.r, &e0);
        proj.transpose() * t
    }
}

/// Sliding-window least-squares state carrying only the triangular factor
/// `R` (with `R^T R = V^T W V`) and the normal-equation right-hand side
/// `T = V^T W Psi`, so one update costs `O(m^2 + m dim_u)` regardless of the
/// window length. Rows enter by Givens update and leave by Cholesky
/// downdate; the raw weighted rows are retained for periodic from-scratch
/// refactorization, which also bounds drift of the incrementally updated
/// quantities.
#[derive(Clone, Debug)]
pub struct WindowFitter {
    r: DMatrix<f64>,
    rhs: DMatrix<f64>,
    rows: VecDeque<(DVector<f64>, DVector<f64>)>,
    dim_u: usize,
    updates_since_refactor: usize,
    refactors: usize,
}

/// Refactor cadence of the window fitter.
const REFRESH_INTERVAL: usize = 512;

impl WindowFitter {
    pub fn from_memory(memory: &Memory, ctx: &BasisContext, measure: SamplingMeasure) -> Self {
        let dim_u = memory
            .active_records()
            .next()
            .map_or(0, |r| r.grad.len());
        let mut rows = VecDeque::with_capacity(memory.active());
        let mut phi = DVector::zeros(ctx.size());
        for rec in memory.active_records() {
            let sw = weight(measure, ctx, &rec.point).sqrt();
            ctx.basis_eval_into(&rec.point, &mut phi);
            rows.push_back((&phi * sw, &rec.grad * sw));
        }
        let mut fitter = WindowFitter {
            r: DMatrix::zeros(ctx.size(), ctx.size()),
            rhs: DMatrix::zeros(ctx.size(), dim_u),
            rows,
            dim_u,
            updates_since_refactor: 0,
            refactors: 0,
        };
        fitter.refactor();
        fitter
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.r.ncols()
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Gram matrix of the window, `R^T R / s`.
    pub fn gram(&self) -> DMatrix<f64> {
        (self.r.transpose() * &self.r) / self.nrows() as f64
    }

    /// Rebuilds `R` and the right-hand side exactly from the stored rows.
    pub fn refactor(&mut self) {
        let s = self.rows.len();
        let m = self.r.ncols();
        let mut stacked = DMatrix::zeros(s, m);
        let mut rhs = DMatrix::zeros(m, self.dim_u);
        for (i, (a, d)) in self.rows.iter().enumerate() {
            stacked.row_mut(i).copy_from(&a.transpose());
            // T = sum_i a_i d_i^T accumulated exactly, column by column.
            for l in 0..self.dim_u {
                let dl = d[l];
                let mut col = rhs.column_mut(l);
                for j in 0..m {
                    col[j] += a[j] * dl;
                }
            }
        }
        let qr = stacked.qr();
        self.r = qr.r();
        self.rhs = rhs;
        self.updates_since_refactor = 0;
        self.refactors += 1;
    }

    /// Appends the newest observation.
    pub fn append(&mut self, basis_row: &DVector<f64>, w: f64, grad: &DVector<f64>) {
        let m = self.ncols();
        assert_eq!(basis_row.len(), m);
        let sw = w.sqrt();
        let a = basis_row * sw;
        let d = grad * sw;
        // T gains the exact rank-one term a d^T.
        for j in 0..m {
            for l in 0..self.dim_u {
                self.rhs[(j, l)] += a[j] * d[l];
            }
        }
        // Givens rotations absorbing the new row into R.
        let mut v: Vec<f64> = a.iter().copied().collect();
        for i in 0..m {
            let (c, sn, h) = givens(self.r[(i, i)], v[i]);
            self.r[(i, i)] = h;
            if sn == 0.0 && c == 1.0 {
                continue;
            }
            v[i] = 0.0;
            for j in i + 1..m {
                let rij = self.r[(i, j)];
                self.r[(i, j)] = c * rij + sn * v[j];
                v[j] = -sn * rij + c * v[j];
            }
        }
        self.rows.push_back((a, d));
        self.updates_since_refactor += 1;
        if self.updates_since_refactor >= REFRESH_INTERVAL {
            self.refactor();
        }
    }

    /// Number of from-scratch refactorizations performed so far.
    pub fn refactor_count(&self) -> usize {
        self.refactors
    }

    /// Removes the oldest observation by Cholesky downdate. Returns false
    /// (leaving the state refactored without that row) when the downdate is
    /// too ill-conditioned to apply incrementally.
    pub fn delete_oldest(&mut self) -> bool {
        let (a, d) = match self.rows.pop_front() {
            Some(row) => row,
            None => return true,
        };
        let m = self.ncols();
        for j in 0..m {
            for l in 0..self.dim_u {
                self.rhs[(j, l)] -= a[j] * d[l];
            }
        }
        // Downdate R^T R -= a a^T (LINPACK-style).
        let q = solve_upper_transposed(&self.r, &a);
        let rho_sq = 1.0 - q.norm_squared();
        if rho_sq <= 1e-10 {
            self.refactor();
            return false;
        }
        // Deletions share the append counter so a full slide counts once.

        let mut alpha = rho_sq.sqrt();
        let mut c = vec![0.0f64; m];
        let mut s = vec![0.0f64; m];
        for i in (0..m).rev() {
            let norm = alpha.hypot(q[i]);
            c[i] = alpha / norm;
            s[i] = q[i] / norm;
            alpha = norm;
        }
        let mut xx = vec![0.0f64; m];
        for i in (0..m).rev() {
            for j in i..m {
                let t = c[i] * xx[j] + s[i] * self.r[(i, j)];
                self.r[(i, j)] = c[i] * self.r[(i, j)] - s[i] * xx[j];
                xx[j] = t;
            }
        }
        for i in 0..m {
            if !(self.r[(i, i)].is_finite()) {
                self.refactor();
                return false;
            }
        }
        true
    }

    /// Value of the fitted model at basis vector `phi`:
    /// `T^T (R^T R)^{-1} phi`.
    pub fn fit_value(&self, phi: &DVector<f64>) -> DVector<f64> {
        let z = solve_upper_transposed(&self.r, phi);
        let x = solve_upper(&self.r, &z);
        self.rhs.transpose() * x
    }

    /// Reference-measure mean of the fitted model (constant-coefficient row).
    pub fn fit_mean(&self) -> DVector<f64> {
        let m = self.ncols();
        let mut e0 = DVector::zeros(m);
        e0[0] = 1.0;
        self.fit_value(&e0)
    }

    /// Full coefficient matrix, one row per basis function.
    pub fn solve_coefficients(&self) -> DMatrix<f64> {
        let m = self.ncols();
        let mut coeffs = DMatrix::zeros(m, self.dim_u);
        for l in 0..self.dim_u {
            let col = DVector::from_column_slice(self.rhs.column(l).as_slice());
            let z = solve_upper_transposed(&self.r, &col);
            let x = solve_upper(&self.r, &z);
            coeffs.column_mut(l).copy_from(&x);
        }
        coeffs
    }
}

/// Conditioned weighted least-squares fit of the gradient data in the active
/// memory window: the full solve when `||G - I||_2 <= 1/2`, the zero model
/// otherwise.
pub fn conditioned_fit(
    memory: &Memory,
    ctx: &BasisContext,
    _measure: SamplingMeasure,
    state: &QrState,
) -> FittedModel {
    assert_eq!(
        state.nrows(),
        memory.active(),
        "QR factors are inconsistent with the memory snapshot"
    );
    let m = ctx.size();
    if state.nrows() < m || !conditioning_check(&state.gram()) {
        return FittedModel::zero(m, state.dim_u);
    }
    FittedModel {
        coeffs: state.solve_coefficients(),
        conditioned: true,
    }
}
