//! Dense 3-way tensor algebra and non-negative rank-k decomposition.
//!
//! The decomposition is alternating least squares over the three factor
//! matrices with every update solved exactly as a row-wise non-negative
//! least-squares problem (the active-set core from [`crate::unmix`]). Exact
//! subproblem solves make the reconstruction error non-increasing across
//! iterations, which the tests assert. Factor columns are kept at unit norm
//! with scales absorbed into per-component weights, so a component's
//! concatenated factors form a scale-free fingerprint.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

use crate::la::{self, Mat};
use crate::rng::{derive_seed, SeededRng};
use crate::unmix::UnmixError;

/// Errors from tensor algebra and decomposition.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    /// Unfold/refold modes are 1, 2, or 3.
    #[error("mode must be 1, 2, or 3, got {0}")]
    BadMode(usize),
    /// Dimensions disagree.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    /// Decomposing an all-zero tensor leaves the fit undefined.
    #[error("tensor is all zero")]
    ZeroTensor,
    /// Tensor entries must be finite and non-negative.
    #[error("invalid tensor: {0}")]
    InvalidTensor(&'static str),
    /// Supported decomposition ranks are 1..=3.
    #[error("rank must be 1, 2, or 3, got {0}")]
    BadRank(usize),
    /// Congruence compares equal-rank factor sets only.
    #[error("rank mismatch: {0} vs {1}")]
    RankMismatch(usize, usize),
    /// Factor-update subproblem failed.
    #[error("factor update failed: {0}")]
    Solver(#[from] UnmixError),
}

/// Dense 3-axis tensor, row-major in the last axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Tensor3 {
    /// All-zero tensor of the given dimensions.
    pub fn zeros(d0: usize, d1: usize, d2: usize) -> Self {
        Tensor3 { dims: [d0, d1, d2], data: vec![0.0; d0 * d1 * d2] }
    }

    /// Wraps existing storage; the vector length must equal `d0*d1*d2`.
    pub fn from_data(d0: usize, d1: usize, d2: usize, data: Vec<f64>) -> Result<Self, TensorError> {
        if data.len() != d0 * d1 * d2 {
            return Err(TensorError::ShapeMismatch("storage length vs dimensions"));
        }
        Ok(Tensor3 { dims: [d0, d1, d2], data })
    }

    /// Dimensions as a tuple.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.dims[0], self.dims[1], self.dims[2])
    }

    #[inline]
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    /// Element access.
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    /// Element assignment.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.index(i, j, k);
        self.data[idx] = v;
    }

    /// Flat row-major storage.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable flat storage.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Frobenius norm.
    pub fn fro_norm(&self) -> f64 {
        la::norm(&self.data)
    }
}

/// Result of a rank-k decomposition: unit-norm factor columns per mode,
/// positive component weights, and the achieved relative reconstruction
/// error. Components are sorted by descending weight.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSet {
    /// Mode-1 factors, d0 x k.
    pub u: Mat,
    /// Mode-2 factors, d1 x k.
    pub v: Mat,
    /// Mode-3 factors, d2 x k.
    pub w: Mat,
    /// Component scales.
    pub weights: Vec<f64>,
    /// Relative reconstruction error, in [0, 1].
    pub fit: f64,
}

impl FactorSet {
    /// Number of components.
    pub fn rank(&self) -> usize {
        self.weights.len()
    }
}

/// Concatenated factor signature of a decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Fingerprint {
    /// Per-component [u; v; w] blocks, components in descending-weight order.
    pub vector: Vec<f64>,
    /// Component count the vector covers.
    pub rank: usize,
    /// Optional provenance tag for bookkeeping.
    pub source_sample: Option<String>,
}

/// Decomposition controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParafacOptions {
    /// Hard iteration cap.
    pub max_iters: usize,
    /// Stop when the relative fit changes less than this between sweeps.
    pub tol: f64,
    /// Number of random restarts; the best final fit wins.
    pub restarts: usize,
    /// Seed for the restart initializations.
    pub seed: u64,
}

impl Default for ParafacOptions {
    fn default() -> Self {
        ParafacOptions { max_iters: 500, tol: 1e-8, restarts: 5, seed: 0 }
    }
}

// ---------------------------------------------------------------------------
// unfold / refold / khatri-rao
// ---------------------------------------------------------------------------

/// Mode-n matricization. Column ordering pairs with [`khatri_rao`] so that a
/// rank-1 tensor `u (outer) v (outer) w` satisfies exactly:
/// mode 1 -> `u * kr(w, v)^T`, mode 2 -> `v * kr(w, u)^T`,
/// mode 3 -> `w * kr(v, u)^T`.
pub fn unfold(t: &Tensor3, mode: usize) -> Result<Mat, TensorError> {
    let (d0, d1, d2) = t.dims();
    let (rows, cols) = match mode {
        1 => (d0, d1 * d2),
        2 => (d1, d0 * d2),
        3 => (d2, d0 * d1),
        _ => return Err(TensorError::BadMode(mode)),
    };
    let mut m = Mat::zeros(rows, cols);
    for i in 0..d0 {
        for j in 0..d1 {
            for k in 0..d2 {
                let v = t.get(i, j, k);
                match mode {
                    1 => m.set(i, j + k * d1, v),
                    2 => m.set(j, i + k * d0, v),
                    _ => m.set(k, i + j * d0, v),
                }
            }
        }
    }
    Ok(m)
}

/// Inverse of [`unfold`] for the given target dimensions.
pub fn refold(
    m: &Mat,
    mode: usize,
    dims: (usize, usize, usize),
) -> Result<Tensor3, TensorError> {
    let (d0, d1, d2) = dims;
    let want = match mode {
        1 => (d0, d1 * d2),
        2 => (d1, d0 * d2),
        3 => (d2, d0 * d1),
        _ => return Err(TensorError::BadMode(mode)),
    };
    if (m.rows, m.cols) != want {
        return Err(TensorError::ShapeMismatch("matrix shape vs target dims"));
    }
    let mut t = Tensor3::zeros(d0, d1, d2);
    for i in 0..d0 {
        for j in 0..d1 {
            for k in 0..d2 {
                let v = match mode {
                    1 => m.get(i, j + k * d1),
                    2 => m.get(j, i + k * d0),
                    _ => m.get(k, i + j * d0),
                };
                t.set(i, j, k, v);
            }
        }
    }
    Ok(t)
}

/// Column-wise Kronecker product: column j of the result is
/// `kron(A[:,j], B[:,j])`, with A indexing the slow axis.
pub fn khatri_rao(a: &Mat, b: &Mat) -> Result<Mat, TensorError> {
    if a.cols != b.cols {
        return Err(TensorError::ShapeMismatch("column counts must agree"));
    }
    let mut out = Mat::zeros(a.rows * b.rows, a.cols);
    for j in 0..a.cols {
        for p in 0..a.rows {
            let ap = a.get(p, j);
            for q in 0..b.rows {
                out.set(p * b.rows + q, j, ap * b.get(q, j));
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// decomposition
// ---------------------------------------------------------------------------

/// Non-negative rank-k decomposition; returns the best factor set over the
/// configured restarts.
pub fn parafac(t: &Tensor3, rank: usize, opts: &ParafacOptions) -> Result<FactorSet, TensorError> {
    parafac_trace(t, rank, opts).map(|(f, _)| f)
}

/// Like [`parafac`] but also returns the winning restart's per-iteration fit
/// trajectory, which exact subproblem solves keep non-increasing.
pub fn parafac_trace(
    t: &Tensor3,
    rank: usize,
    opts: &ParafacOptions,
) -> Result<(FactorSet, Vec<f64>), TensorError> {
    if !(1..=3).contains(&rank) {
        return Err(TensorError::BadRank(rank));
    }
    if t.data().iter().any(|v| !v.is_finite()) {
        return Err(TensorError::InvalidTensor("non-finite entry"));
    }
    if t.data().iter().any(|&v| v < 0.0) {
        return Err(TensorError::InvalidTensor("negative entry"));
    }
    let norm = t.fro_norm();
    if norm <= 0.0 {
        return Err(TensorError::ZeroTensor);
    }
    if opts.restarts == 0 || opts.max_iters == 0 {
        return Err(TensorError::ShapeMismatch("restarts and max_iters must be >= 1"));
    }

    let unfolded = [unfold(t, 1)?, unfold(t, 2)?, unfold(t, 3)?];
    let mut best: Option<(FactorSet, Vec<f64>)> = None;
    for restart in 0..opts.restarts {
        let seed = derive_seed(opts.seed, restart as u64);
        let (factors, trace) = run_als(t, &unfolded, norm, rank, seed, opts)?;
        if best.as_ref().map_or(true, |(b, _)| factors.fit < b.fit) {
            best = Some((factors, trace));
        }
    }
    Ok(best.expect("at least one restart"))
}

fn run_als(
    t: &Tensor3,
    unfolded: &[Mat; 3],
    norm: f64,
    rank: usize,
    seed: u64,
    opts: &ParafacOptions,
) -> Result<(FactorSet, Vec<f64>), TensorError> {
    let (d0, d1, d2) = t.dims();
    let mut rng = SeededRng::new(seed);
    // Entries bounded away from zero keep initial columns well-conditioned.
    let mut factors = [
        random_factor(&mut rng, d0, rank),
        random_factor(&mut rng, d1, rank),
        random_factor(&mut rng, d2, rank),
    ];
    let mut weights = vec![1.0; rank];
    for f in &mut factors {
        let mut scales = vec![0.0; rank];
        normalize_columns(f, &mut scales);
    }

    let mut trace = Vec::new();
    let mut prev_fit = f64::INFINITY;
    for _ in 0..opts.max_iters {
        for mode in 0..3 {
            let companion = match mode {
                0 => khatri_rao(&factors[2], &factors[1])?,
                1 => khatri_rao(&factors[2], &factors[0])?,
                _ => khatri_rao(&factors[1], &factors[0])?,
            };
            let target = &unfolded[mode];
            // The companion is shared by every row, so fold it into its
            // Gram matrix once and solve each row's tiny system on the
            // stack instead of re-factoring the tall matrix per row.
            let mut gram = [[0.0f64; 3]; 3];
            for t in 0..companion.rows {
                let base = t * rank;
                for i in 0..rank {
                    for j in i..rank {
                        gram[i][j] += companion.data[base + i] * companion.data[base + j];
                    }
                }
            }
            for i in 0..rank {
                for j in 0..i {
                    gram[i][j] = gram[j][i];
                }
            }
            let mut scaled = Mat::zeros(target.rows, rank);
            for r in 0..target.rows {
                let mut proj = [0.0f64; 3];
                for (t, &x) in target.row(r).iter().enumerate() {
                    let base = t * rank;
                    for i in 0..rank {
                        proj[i] += x * companion.data[base + i];
                    }
                }
                let solved = nnls_gram(&gram, proj, rank)?;
                for c in 0..rank {
                    scaled.set(r, c, solved[c]);
                }
            }
            normalize_columns(&mut scaled, &mut weights);
            factors[mode] = scaled;
        }
        let fit = relative_error(&unfolded[0], &factors, &weights, norm)?;
        trace.push(fit);
        if (prev_fit - fit).abs() < opts.tol {
            prev_fit = fit;
            break;
        }
        prev_fit = fit;
    }

    let order = component_order(&factors[0], &weights);
    let set = FactorSet {
        u: reorder_columns(&factors[0], &order),
        v: reorder_columns(&factors[1], &order),
        w: reorder_columns(&factors[2], &order),
        weights: order.iter().map(|&c| weights[c]).collect(),
        fit: prev_fit,
    };
    Ok((set, trace))
}

/// Non-negative least squares for one row against the shared companion,
/// phrased on the normal equations: minimizes x'Gx/2 - c'x over x >= 0,
/// where G is the companion Gram matrix and c the row's projection. Same
/// active-set walk as the general solver, but with at most three columns
/// everything lives in fixed-size arrays.
fn nnls_gram(
    gram: &[[f64; 3]; 3],
    proj: [f64; 3],
    rank: usize,
) -> Result<[f64; 3], TensorError> {
    let mut x = [0.0f64; 3];
    let mut passive = [false; 3];
    let mut barred = [false; 3];
    let grad_scale = proj.iter().take(rank).fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-10 * grad_scale;

    for _ in 0..32 * (rank + 4) {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..rank {
            let mut gx = 0.0;
            for i in 0..rank {
                gx += gram[j][i] * x[i];
            }
            let grad = proj[j] - gx;
            if !passive[j] && !barred[j] && grad > tol {
                if best.map_or(true, |(_, g)| grad > g) {
                    best = Some((j, grad));
                }
            }
        }
        let Some((enter, _)) = best else {
            return Ok(x);
        };
        passive[enter] = true;

        loop {
            let Some(z) = solve_passive(gram, &proj, &passive, rank) else {
                passive[enter] = false;
                barred[enter] = true;
                break;
            };
            if (0..rank).all(|j| !passive[j] || z[j] > 0.0) {
                x = z;
                barred = [false; 3];
                break;
            }
            let mut alpha = 1.0f64;
            for j in 0..rank {
                if passive[j] && z[j] <= 0.0 {
                    let denom = x[j] - z[j];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            let floor = 1e-14 * grad_scale.max(1.0);
            for j in 0..rank {
                if passive[j] {
                    x[j] += alpha * (z[j] - x[j]);
                    if z[j] <= 0.0 && x[j] <= floor {
                        x[j] = 0.0;
                        passive[j] = false;
                    }
                }
            }
            if !passive.iter().any(|&p| p) {
                barred[enter] = true;
                break;
            }
        }
    }
    Err(UnmixError::NnlsBreakdown.into())
}

/// Solves the passive-set subsystem of the normal equations by Gaussian
/// elimination with partial pivoting; `None` marks a singular block.
fn solve_passive(
    gram: &[[f64; 3]; 3],
    proj: &[f64; 3],
    passive: &[bool; 3],
    rank: usize,
) -> Option<[f64; 3]> {
    let cols: [usize; 3] = {
        let mut c = [0usize; 3];
        let mut n = 0;
        for j in 0..rank {
            if passive[j] {
                c[n] = j;
                n += 1;
            }
        }
        if n == 0 {
            return None;
        }
        c
    };
    let p = passive.iter().filter(|&&b| b).count();

    let mut a = [[0.0f64; 4]; 3];
    for i in 0..p {
        for j in 0..p {
            a[i][j] = gram[cols[i]][cols[j]];
        }
        a[i][p] = proj[cols[i]];
    }
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty pivot range");
        if a[pivot][col].abs() <= 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        for row in col + 1..p {
            let f = a[row][col] / a[col][col];
            for k in col..=p {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    let mut z = [0.0f64; 3];
    for i in (0..p).rev() {
        let mut acc = a[i][p];
        for j in i + 1..p {
            acc -= a[i][j] * z[cols[j]];
        }
        z[cols[i]] = acc / a[i][i];
    }
    Some(z)
}

fn random_factor(rng: &mut SeededRng, rows: usize, cols: usize) -> Mat {
    Mat::from_vec(rows, cols, (0..rows * cols).map(|_| rng.uniform_in(0.1, 1.0)).collect())
}

/// Normalizes each column to unit norm, absorbing scales into `weights`.
/// A collapsed (all-zero) column keeps weight 0 and stays zero.
fn normalize_columns(m: &mut Mat, weights: &mut [f64]) {
    for c in 0..m.cols {
        let norm = la::norm(&m.col(c));
        weights[c] = norm;
        if norm > 0.0 {
            for r in 0..m.rows {
                let v = m.get(r, c) / norm;
                m.set(r, c, v);
            }
        }
    }
}

fn relative_error(
    x1: &Mat,
    factors: &[Mat; 3],
    weights: &[f64],
    norm: f64,
) -> Result<f64, TensorError> {
    let companion = khatri_rao(&factors[2], &factors[1])?;
    let mut err2 = 0.0;
    for i in 0..x1.rows {
        for j in 0..x1.cols {
            let mut recon = 0.0;
            for c in 0..weights.len() {
                recon += weights[c] * factors[0].get(i, c) * companion.get(j, c);
            }
            let d = x1.get(i, j) - recon;
            err2 += d * d;
        }
    }
    Ok(err2.sqrt() / norm)
}

/// Descending weight, ties broken by ascending lexicographic order of the
/// mode-1 column.
fn component_order(u: &Mat, weights: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        weights[b].total_cmp(&weights[a]).then_with(|| {
            for r in 0..u.rows {
                let cmp = u.get(r, a).total_cmp(&u.get(r, b));
                if cmp != core::cmp::Ordering::Equal {
                    return cmp;
                }
            }
            core::cmp::Ordering::Equal
        })
    });
    order
}

fn reorder_columns(m: &Mat, order: &[usize]) -> Mat {
    let mut out = Mat::zeros(m.rows, order.len());
    for (new_c, &old_c) in order.iter().enumerate() {
        for r in 0..m.rows {
            out.set(r, new_c, m.get(r, old_c));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// fingerprints and congruence
// ---------------------------------------------------------------------------

/// Concatenates each component's unit factors into `[u; v; w]` blocks,
/// components in the factor set's (descending-weight) order. Length is
/// `rank * (d0 + d1 + d2)`; each block has norm sqrt(3).
pub fn fingerprint(factors: &FactorSet) -> Fingerprint {
    let k = factors.rank();
    let mut vector = Vec::with_capacity(k * (factors.u.rows + factors.v.rows + factors.w.rows));
    for c in 0..k {
        vector.extend(factors.u.col(c));
        vector.extend(factors.v.col(c));
        vector.extend(factors.w.col(c));
    }
    Fingerprint { vector, rank: k, source_sample: None }
}

/// Similarity of two equal-rank factor sets in [0, 1]: components are
/// greedily matched by the product of per-mode absolute cosine similarities,
/// and the matched scores are averaged. 1 means identical up to permutation
/// and sign, 0 means orthogonal.
pub fn congruence(f1: &FactorSet, f2: &FactorSet) -> Result<f64, TensorError> {
    let k = f1.rank();
    if k != f2.rank() {
        return Err(TensorError::RankMismatch(k, f2.rank()));
    }
    let mut score = Mat::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            let s = cosine(&f1.u.col(a), &f2.u.col(b)).abs()
                * cosine(&f1.v.col(a), &f2.v.col(b)).abs()
                * cosine(&f1.w.col(a), &f2.w.col(b)).abs();
            score.set(a, b, s);
        }
    }
    let mut used_row = vec![false; k];
    let mut used_col = vec![false; k];
    let mut total = 0.0;
    for _ in 0..k {
        let mut best = (0usize, 0usize, f64::NEG_INFINITY);
        for a in 0..k {
            for b in 0..k {
                if !used_row[a] && !used_col[b] && score.get(a, b) > best.2 {
                    best = (a, b, score.get(a, b));
                }
            }
        }
        used_row[best.0] = true;
        used_col[best.1] = true;
        total += best.2;
    }
    Ok(total / k as f64)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = la::norm(a);
    let nb = la::norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    la::dot(a, b) / (na * nb)
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
