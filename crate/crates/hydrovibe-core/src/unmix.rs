//! Pure-component dictionary and simplex-constrained unmixing.
//!
//! A dictionary column is the renormalized mean of a material's rank-1
//! fingerprints. Mixture ratios come from non-negative least squares with a
//! sum-to-one constraint, realized as an augmented NNLS problem (a heavily
//! weighted all-ones row pins the coefficient sum near 1) followed by exact
//! renormalization. The active-set NNLS core here also powers the
//! decomposition stage's factor updates.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;

use crate::la::{self, Mat};
use crate::tensor::Fingerprint;

/// Errors from dictionary assembly and unmixing.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum UnmixError {
    /// A component has no fingerprints, or the input list is empty.
    #[error("component `{0}` has no fingerprints")]
    MissingComponent(String),
    /// Vector or matrix dimensions disagree.
    #[error("dimension mismatch: {0}")]
    ShapeMismatch(&'static str),
    /// Fingerprints feeding a dictionary must be rank 1.
    #[error("dictionary fingerprints must have rank 1, got {0}")]
    BadRank(usize),
    /// The dictionary has no signal to match against.
    #[error("dictionary is all zero")]
    ZeroDictionary,
    /// Values must be finite.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    /// Exhaustive search is only feasible for small dictionaries.
    #[error("brute-force search limited to 4 components, got {0}")]
    TooManyComponents(usize),
    /// The active-set solver could not make progress.
    #[error("nnls failed: no solvable passive set")]
    NnlsBreakdown,
}

/// Pure-component reference matrix: one column per material.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    /// Fingerprint-length x component matrix; columns carry the block
    /// structure of a rank-1 fingerprint (norm sqrt(3)).
    pub matrix: Mat,
    /// Component names, in column order.
    pub component_names: Vec<String>,
}

impl Dictionary {
    /// Number of components.
    pub fn components(&self) -> usize {
        self.matrix.cols
    }
}

/// Result of unmixing one fingerprint against a dictionary.
#[derive(Debug, Clone, PartialEq)]
pub struct MixEstimate {
    /// Non-negative ratios summing to 1, in dictionary column order.
    pub ratios: Vec<f64>,
    /// l2 distance between the reconstruction and the input fingerprint.
    pub residual: f64,
    /// Dictionary reconstruction `P * ratios`.
    pub reconstruction: Vec<f64>,
}

// ---------------------------------------------------------------------------
// active-set NNLS core
// ---------------------------------------------------------------------------

/// Solves `min_x ||A x - b||` subject to `x >= 0` with the Lawson-Hanson
/// active-set method. Unconstrained subproblems go through the QR solver in
/// [`la`]; if a passive set turns rank deficient the offending column is
/// dropped and barred until the iterate changes.
pub fn nnls(a: &Mat, b: &[f64]) -> Result<Vec<f64>, UnmixError> {
    if a.rows != b.len() {
        return Err(UnmixError::ShapeMismatch("matrix rows vs rhs length"));
    }
    if a.data.iter().any(|v| !v.is_finite()) || b.iter().any(|v| !v.is_finite()) {
        return Err(UnmixError::NonFinite("nnls input"));
    }
    let n = a.cols;
    let mut x = vec![0.0; n];
    let mut passive = vec![false; n];
    let mut barred = vec![false; n];

    let grad_scale = {
        let g0 = a.tr_matvec(b);
        g0.iter().fold(1.0f64, |m, v| m.max(v.abs()))
    };
    let tol = 1e-10 * grad_scale;

    // Outer iterations: each adds one coordinate to the passive set, so the
    // loop bound only guards against cycling from floating-point ties.
    for _ in 0..32 * (n + 4) {
        let residual = residual_vec(a, &x, b);
        let grad = a.tr_matvec(&residual);
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if !passive[j] && !barred[j] && grad[j] > tol {
                if best.map_or(true, |(_, g)| grad[j] > g) {
                    best = Some((j, grad[j]));
                }
            }
        }
        let Some((enter, _)) = best else {
            return Ok(x);
        };
        passive[enter] = true;

        // Inner loop: solve on the passive set, walk back along the segment
        // toward feasibility whenever the solution leaves the cone.
        loop {
            let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let sub = gather_columns(a, &cols);
            let Some(z_sub) = la::solve_ls(&sub, b) else {
                passive[enter] = false;
                barred[enter] = true;
                break;
            };
            let mut z = vec![0.0; n];
            for (idx, &j) in cols.iter().enumerate() {
                z[j] = z_sub[idx];
            }
            if cols.iter().all(|&j| z[j] > 0.0) {
                x = z;
                barred.fill(false);
                break;
            }
            let mut alpha = 1.0f64;
            for &j in &cols {
                if z[j] <= 0.0 {
                    let denom = x[j] - z[j];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            for &j in &cols {
                x[j] += alpha * (z[j] - x[j]);
            }
            let floor = 1e-14 * grad_scale.max(1.0);
            for &j in &cols {
                if z[j] <= 0.0 && x[j] <= floor {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                // Everything left the passive set; bar the entering column
                // so the outer loop tries the next candidate.
                barred[enter] = true;
                break;
            }
        }
    }
    Err(UnmixError::NnlsBreakdown)
}

fn residual_vec(a: &Mat, x: &[f64], b: &[f64]) -> Vec<f64> {
    let ax = a.matvec(x);
    b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect()
}

fn gather_columns(a: &Mat, cols: &[usize]) -> Mat {
    let mut sub = Mat::zeros(a.rows, cols.len());
    for r in 0..a.rows {
        for (k, &c) in cols.iter().enumerate() {
            sub.set(r, k, a.get(r, c));
        }
    }
    sub
}

// ---------------------------------------------------------------------------
// dictionary
// ---------------------------------------------------------------------------

/// Builds the pure-component dictionary from per-component rank-1
/// fingerprint replicates. Each column is the elementwise mean of the
/// component's fingerprints with each factor block (tone, bin, angle)
/// renormalized back to unit l2 norm, so columns keep the sqrt(3) norm of a
/// clean rank-1 fingerprint.
pub fn build_dictionary(
    components: &[(String, Vec<Fingerprint>)],
    block_dims: (usize, usize, usize),
) -> Result<Dictionary, UnmixError> {
    if components.is_empty() {
        return Err(UnmixError::MissingComponent(String::from("<none>")));
    }
    let len = block_dims.0 + block_dims.1 + block_dims.2;
    let mut matrix = Mat::zeros(len, components.len());
    let mut names = Vec::with_capacity(components.len());
    for (c, (name, prints)) in components.iter().enumerate() {
        if prints.is_empty() {
            return Err(UnmixError::MissingComponent(name.clone()));
        }
        let mut mean = vec![0.0; len];
        for p in prints {
            if p.rank != 1 {
                return Err(UnmixError::BadRank(p.rank));
            }
            if p.vector.len() != len {
                return Err(UnmixError::ShapeMismatch("fingerprint length vs block dims"));
            }
            for (m, v) in mean.iter_mut().zip(&p.vector) {
                *m += v / prints.len() as f64;
            }
        }
        renormalize_blocks(&mut mean, block_dims)?;
        for (r, v) in mean.iter().enumerate() {
            matrix.set(r, c, *v);
        }
        names.push(name.clone());
    }
    Ok(Dictionary { matrix, component_names: names })
}

fn renormalize_blocks(
    vector: &mut [f64],
    block_dims: (usize, usize, usize),
) -> Result<(), UnmixError> {
    let bounds = [0, block_dims.0, block_dims.0 + block_dims.1, vector.len()];
    for w in bounds.windows(2) {
        let block = &mut vector[w[0]..w[1]];
        let norm = la::norm(block);
        if norm <= 0.0 {
            return Err(UnmixError::ZeroDictionary);
        }
        for v in block {
            *v /= norm;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// simplex unmixing
// ---------------------------------------------------------------------------

/// Solves `min_c ||P c - f||` over the probability simplex for the given
/// dictionary.
pub fn simplex_nnls(dict: &Dictionary, f: &[f64]) -> Result<MixEstimate, UnmixError> {
    simplex_solve(&dict.matrix, f)
}

/// Solves `min_c ||P c - f||` over the probability simplex for any matrix
/// of candidate columns.
///
/// The sum constraint rides in as a penalty row `rho * 1^T c = rho` with
/// `rho = 1e3 * max|P|`, the augmented problem goes through [`nnls`], and the
/// result is renormalized to sum exactly 1. Residual and reconstruction
/// refer to the original, unaugmented system.
pub fn simplex_solve(p: &Mat, f: &[f64]) -> Result<MixEstimate, UnmixError> {
    if f.len() != p.rows {
        return Err(UnmixError::ShapeMismatch("target length vs matrix rows"));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(UnmixError::NonFinite("target"));
    }
    let max_abs = p.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs <= 0.0 {
        return Err(UnmixError::ZeroDictionary);
    }
    let rho = 1e3 * max_abs;

    let mut aug = Mat::zeros(p.rows + 1, p.cols);
    for r in 0..p.rows {
        for c in 0..p.cols {
            aug.set(r, c, p.get(r, c));
        }
    }
    for c in 0..p.cols {
        aug.set(p.rows, c, rho);
    }
    let mut rhs = f.to_vec();
    rhs.push(rho);

    let mut ratios = nnls(&aug, &rhs)?;
    let sum: f64 = ratios.iter().sum();
    if sum <= 0.0 {
        return Err(UnmixError::NnlsBreakdown);
    }
    for r in &mut ratios {
        *r /= sum;
    }
    finish_estimate(p, ratios, f)
}

fn finish_estimate(p: &Mat, ratios: Vec<f64>, f: &[f64]) -> Result<MixEstimate, UnmixError> {
    let reconstruction = p.matvec(&ratios);
    let residual = reconstruction
        .iter()
        .zip(f)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(MixEstimate { ratios, residual, reconstruction })
}

/// Worst slack in the simplex KKT conditions at `ratios`: components held at
/// zero must not have a strictly better descent direction than the support.
/// Returns the most negative projected-gradient margin (0 when clean); a
/// correct solver keeps this above roughly -1e-8 times the gradient scale.
pub fn kkt_gap(dict: &Dictionary, f: &[f64], ratios: &[f64]) -> f64 {
    let p = &dict.matrix;
    let residual: Vec<f64> = p
        .matvec(ratios)
        .iter()
        .zip(f)
        .map(|(a, b)| a - b)
        .collect();
    let grad = p.tr_matvec(&residual);
    let support: Vec<usize> = (0..ratios.len()).filter(|&j| ratios[j] > 1e-10).collect();
    if support.is_empty() {
        return 0.0;
    }
    // On the simplex the stationarity multiplier equals the common gradient
    // value over the support; zero components must sit at or above it.
    let mu = support.iter().map(|&j| grad[j]).sum::<f64>() / support.len() as f64;
    let mut worst = 0.0f64;
    for j in 0..ratios.len() {
        if ratios[j] <= 1e-10 {
            worst = worst.min(grad[j] - mu);
        }
    }
    worst
}

/// Dictionary reconstruction `P * c`.
pub fn reconstruct(dict: &Dictionary, ratios: &[f64]) -> Result<Vec<f64>, UnmixError> {
    if ratios.len() != dict.matrix.cols {
        return Err(UnmixError::ShapeMismatch("ratio length vs dictionary columns"));
    }
    debug_assert!(
        (ratios.iter().sum::<f64>() - 1.0).abs() < 1e-6 && ratios.iter().all(|&r| r >= 0.0),
        "ratios off the simplex"
    );
    Ok(dict.matrix.matvec(ratios))
}

/// Exhaustive lattice search over the simplex with the given step, the test
/// oracle for [`simplex_nnls`]. Ties go to the lexicographically first
/// lattice point visited. Guarded to 4 components.
pub fn brute_force_simplex(
    dict: &Dictionary,
    f: &[f64],
    step: f64,
) -> Result<MixEstimate, UnmixError> {
    let c = dict.matrix.cols;
    if c > 4 {
        return Err(UnmixError::TooManyComponents(c));
    }
    if f.len() != dict.matrix.rows {
        return Err(UnmixError::ShapeMismatch("fingerprint length vs dictionary rows"));
    }
    if !(step > 0.0 && step <= 1.0) {
        return Err(UnmixError::ShapeMismatch("step must be in (0, 1]"));
    }
    let n = (1.0 / step).round() as usize;
    let mut counts = vec![0usize; c];
    let mut best: Option<(f64, Vec<f64>)> = None;
    enumerate_lattice(dict, f, n, 0, n, &mut counts, &mut best);
    let (_, ratios) = best.expect("lattice is non-empty");
    finish_estimate(&dict.matrix, ratios, f)
}

fn enumerate_lattice(
    dict: &Dictionary,
    f: &[f64],
    n: usize,
    pos: usize,
    remaining: usize,
    counts: &mut [usize],
    best: &mut Option<(f64, Vec<f64>)>,
) {
    if pos + 1 == counts.len() {
        counts[pos] = remaining;
        let ratios: Vec<f64> = counts.iter().map(|&k| k as f64 / n as f64).collect();
        let err = dict
            .matrix
            .matvec(&ratios)
            .iter()
            .zip(f)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        if best.as_ref().map_or(true, |(e, _)| err < *e) {
            *best = Some((err, ratios));
        }
        return;
    }
    for k in 0..=remaining {
        counts[pos] = k;
        enumerate_lattice(dict, f, n, pos + 1, remaining - k, counts, best);
    }
}

/// Unmixes a rank-k mixture fingerprint: each 135-style component block is
/// matched against the dictionary independently, and the per-block ratio
/// estimates are averaged weighted by the decomposition's component weights.
/// The returned residual is the same weighted average of block residuals;
/// the reconstruction applies the combined ratios.
pub fn mixture_ratios(
    dict: &Dictionary,
    fingerprint: &Fingerprint,
    weights: &[f64],
) -> Result<MixEstimate, UnmixError> {
    let k = fingerprint.rank;
    let len = dict.matrix.rows;
    if k == 0 || fingerprint.vector.len() != k * len {
        return Err(UnmixError::ShapeMismatch("fingerprint length vs rank * dictionary rows"));
    }
    if weights.len() != k {
        return Err(UnmixError::ShapeMismatch("weight count vs rank"));
    }
    let total_w: f64 = weights.iter().sum();
    if !(total_w > 0.0) || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(UnmixError::NonFinite("component weights"));
    }

    let mut ratios = vec![0.0; dict.matrix.cols];
    let mut residual = 0.0;
    for b in 0..k {
        let block = &fingerprint.vector[b * len..(b + 1) * len];
        let est = simplex_nnls(dict, block)?;
        let w = weights[b] / total_w;
        for (acc, r) in ratios.iter_mut().zip(&est.ratios) {
            *acc += w * r;
        }
        residual += w * est.residual;
    }
    let sum: f64 = ratios.iter().sum();
    for r in &mut ratios {
        *r /= sum;
    }
    let reconstruction = dict.matrix.matvec(&ratios);
    Ok(MixEstimate { ratios, residual, reconstruction })
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use alloc::format;
    use alloc::string::ToString;

    const BLOCKS: (usize, usize, usize) = (101, 3, 31);

    fn random_unit(rng: &mut SeededRng, n: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (0..n).map(|_| rng.uniform() + 0.05).collect();
        let norm = la::norm(&v);
        for x in &mut v {
            *x /= norm;
        }
        v
    }

    /// A synthetic rank-1 fingerprint with the standard block structure.
    fn random_fingerprint(rng: &mut SeededRng) -> Fingerprint {
        let mut vector = random_unit(rng, BLOCKS.0);
        vector.extend(random_unit(rng, BLOCKS.1));
        vector.extend(random_unit(rng, BLOCKS.2));
        Fingerprint { vector, rank: 1, source_sample: None }
    }

    fn random_dictionary(rng: &mut SeededRng, components: usize) -> Dictionary {
        let groups: Vec<(String, Vec<Fingerprint>)> = (0..components)
            .map(|c| (format!("mat{c}"), vec![random_fingerprint(rng)]))
            .collect();
        build_dictionary(&groups, BLOCKS).unwrap()
    }

    fn column(dict: &Dictionary, c: usize) -> Vec<f64> {
        dict.matrix.col(c)
    }

    // --- 1. nnls core ---

    #[test]
    fn nnls_clamps_negative_coordinates() {
        let a = Mat::from_vec(3, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let x = nnls(&a, &[1.0, -2.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert_eq!(x[1], 0.0);
        assert!((x[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn nnls_matches_unconstrained_solution_when_interior() {
        let mut rng = SeededRng::new(21);
        for _ in 0..50 {
            let m = 12;
            let n = 4;
            let a = Mat::from_vec(m, n, (0..m * n).map(|_| rng.uniform() + 0.1).collect());
            let x_true: Vec<f64> = (0..n).map(|_| rng.uniform_in(0.5, 2.0)).collect();
            let b = a.matvec(&x_true);
            let x = nnls(&a, &b).unwrap();
            for (got, want) in x.iter().zip(&x_true) {
                assert!((got - want).abs() < 1e-8, "got {got} want {want}");
            }
        }
    }

    #[test]
    fn nnls_satisfies_kkt_conditions() {
        let mut rng = SeededRng::new(22);
        for trial in 0..200 {
            let m = 20;
            let n = 5;
            let a = Mat::from_vec(m, n, (0..m * n).map(|_| rng.normal()).collect());
            let b: Vec<f64> = (0..m).map(|_| rng.normal()).collect();
            let x = nnls(&a, &b).unwrap();
            let grad = a.tr_matvec(&residual_vec(&a, &x, &b));
            let scale = grad.iter().fold(1.0f64, |m, g| m.max(g.abs()));
            for j in 0..n {
                assert!(x[j] >= 0.0, "trial {trial}: negative coordinate");
                if x[j] > 1e-10 {
                    assert!(grad[j].abs() < 1e-7 * scale, "trial {trial}: active gradient");
                } else {
                    assert!(grad[j] < 1e-7 * scale, "trial {trial}: profitable inactive");
                }
            }
        }
    }

    #[test]
    fn nnls_rejects_bad_shapes() {
        let a = Mat::zeros(3, 2);
        assert!(nnls(&a, &[1.0, 2.0]).is_err());
        let a = Mat::from_vec(2, 1, vec![f64::NAN, 1.0]);
        assert!(nnls(&a, &[1.0, 2.0]).is_err());
    }

    // --- 2. dictionary assembly ---

    #[test]
    fn dictionary_single_replicate_passes_through() {
        let mut rng = SeededRng::new(31);
        let fp = random_fingerprint(&mut rng);
        let dict = build_dictionary(&[("a".to_string(), vec![fp.clone()])], BLOCKS).unwrap();
        for (got, want) in column(&dict, 0).iter().zip(&fp.vector) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(dict.component_names, vec!["a".to_string()]);
    }

    #[test]
    fn dictionary_identical_replicates_equal_input() {
        let mut rng = SeededRng::new(32);
        let fp = random_fingerprint(&mut rng);
        let dict = build_dictionary(
            &[("a".to_string(), vec![fp.clone(), fp.clone(), fp.clone()])],
            BLOCKS,
        )
        .unwrap();
        for (got, want) in column(&dict, 0).iter().zip(&fp.vector) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn dictionary_columns_have_block_norm() {
        let mut rng = SeededRng::new(33);
        let dict = random_dictionary(&mut rng, 5);
        for c in 0..5 {
            let norm = la::norm(&column(&dict, c));
            assert!((norm - 3f64.sqrt()).abs() < 1e-6, "column {c} norm {norm}");
        }
    }

    #[test]
    fn dictionary_averages_noisy_replicates_toward_truth() {
        let mut rng = SeededRng::new(34);
        let truth = random_fingerprint(&mut rng);
        let replicates: Vec<Fingerprint> = (0..3)
            .map(|_| {
                let mut v = truth.vector.clone();
                for x in &mut v {
                    *x = (*x + 0.01 * rng.normal()).max(0.0);
                }
                Fingerprint { vector: v, rank: 1, source_sample: None }
            })
            .collect();
        let dict = build_dictionary(&[("a".to_string(), replicates)], BLOCKS).unwrap();
        let col = column(&dict, 0);
        let cos = la::dot(&col, &truth.vector) / (la::norm(&col) * la::norm(&truth.vector));
        assert!(cos > 0.999, "cosine {cos}");
    }

    #[test]
    fn dictionary_rejects_missing_components() {
        assert!(matches!(
            build_dictionary(&[("a".to_string(), vec![])], BLOCKS),
            Err(UnmixError::MissingComponent(_))
        ));
        assert!(build_dictionary(&[], BLOCKS).is_err());
    }

    // --- 3. simplex unmixing ---

    #[test]
    fn exact_atom_recovers_a_unit_vector() {
        let mut rng = SeededRng::new(41);
        let dict = random_dictionary(&mut rng, 5);
        let f = column(&dict, 2);
        let est = simplex_nnls(&dict, &f).unwrap();
        for (j, r) in est.ratios.iter().enumerate() {
            let want = if j == 2 { 1.0 } else { 0.0 };
            assert!((r - want).abs() < 1e-6, "component {j}: {r}");
        }
        assert!(est.residual < 1e-8);
    }

    #[test]
    fn exact_convex_combination_recovers_ratios() {
        // Orthogonal columns scaled to the dictionary's sqrt(3) block norm
        // make the convex combination uniquely identifiable.
        let rows = 12;
        let mut m = Mat::zeros(rows, 4);
        for c in 0..4 {
            m.set(3 * c, c, 3f64.sqrt());
        }
        let dict = Dictionary {
            matrix: m,
            component_names: (0..4).map(|c| format!("c{c}")).collect(),
        };
        let p1 = column(&dict, 0);
        let p2 = column(&dict, 1);
        let f: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| 0.25 * a + 0.75 * b).collect();
        let est = simplex_nnls(&dict, &f).unwrap();
        let want = [0.25, 0.75, 0.0, 0.0];
        for (got, want) in est.ratios.iter().zip(&want) {
            assert!((got - want).abs() < 1e-6, "got {got} want {want}");
        }
    }

    #[test]
    fn estimates_stay_on_the_simplex() {
        let mut rng = SeededRng::new(42);
        for _ in 0..100 {
            let dict = random_dictionary(&mut rng, 5);
            let f: Vec<f64> = (0..dict.matrix.rows).map(|_| rng.uniform()).collect();
            let est = simplex_nnls(&dict, &f).unwrap();
            assert!(est.ratios.iter().all(|&r| r >= 0.0));
            assert!((est.ratios.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let gap = kkt_gap(&dict, &f, &est.ratios);
            assert!(gap > -1e-8, "kkt gap {gap}");
        }
    }

    #[test]
    fn permuting_columns_permutes_ratios() {
        let mut rng = SeededRng::new(43);
        let dict = random_dictionary(&mut rng, 4);
        let f: Vec<f64> = (0..dict.matrix.rows).map(|_| rng.uniform()).collect();
        let base = simplex_nnls(&dict, &f).unwrap();

        let perm = [2usize, 0, 3, 1];
        let mut pm = Mat::zeros(dict.matrix.rows, 4);
        for (new_c, &old_c) in perm.iter().enumerate() {
            for r in 0..dict.matrix.rows {
                pm.set(r, new_c, dict.matrix.get(r, old_c));
            }
        }
        let permuted = Dictionary {
            matrix: pm,
            component_names: perm.iter().map(|&c| dict.component_names[c].clone()).collect(),
        };
        let est = simplex_nnls(&permuted, &f).unwrap();
        for (new_c, &old_c) in perm.iter().enumerate() {
            assert!(
                (est.ratios[new_c] - base.ratios[old_c]).abs() < 1e-8,
                "column {new_c}"
            );
        }
    }

    #[test]
    fn unmixing_a_reconstruction_is_idempotent() {
        let mut rng = SeededRng::new(44);
        for _ in 0..30 {
            let dict = random_dictionary(&mut rng, 4);
            let mut c = [0.0; 4];
            let mut sum = 0.0;
            for v in &mut c {
                *v = rng.uniform() + 0.05;
                sum += *v;
            }
            for v in &mut c {
                *v /= sum;
            }
            let f = reconstruct(&dict, &c).unwrap();
            let est = simplex_nnls(&dict, &f).unwrap();
            for (got, want) in est.ratios.iter().zip(&c) {
                assert!((got - want).abs() < 1e-6, "got {got} want {want}");
            }
        }
    }

    #[test]
    fn zero_dictionary_is_rejected() {
        let dict = Dictionary {
            matrix: Mat::zeros(10, 3),
            component_names: vec!["a".to_string(), "b".to_string(), "c".to_string()],
        };
        assert_eq!(simplex_nnls(&dict, &vec![1.0; 10]), Err(UnmixError::ZeroDictionary));
    }

    // --- 4. reconstruction ---

    #[test]
    fn reconstruct_unit_vector_returns_column() {
        let mut rng = SeededRng::new(51);
        let dict = random_dictionary(&mut rng, 4);
        let got = reconstruct(&dict, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        for (g, w) in got.iter().zip(&column(&dict, 1)) {
            assert_eq!(g, w);
        }
        assert!(reconstruct(&dict, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn reconstruct_identical_columns_is_convex_fixed_point() {
        let mut rng = SeededRng::new(52);
        let fp = random_fingerprint(&mut rng);
        let groups: Vec<(String, Vec<Fingerprint>)> = (0..3)
            .map(|c| (format!("m{c}"), vec![fp.clone()]))
            .collect();
        let dict = build_dictionary(&groups, BLOCKS).unwrap();
        let third = 1.0 / 3.0;
        let got = reconstruct(&dict, &[third, third, third]).unwrap();
        for (g, w) in got.iter().zip(&fp.vector) {
            assert!((g - w).abs() < 1e-9);
        }
    }

    #[test]
    fn residual_is_self_consistent() {
        let mut rng = SeededRng::new(53);
        let dict = random_dictionary(&mut rng, 5);
        let f: Vec<f64> = (0..dict.matrix.rows).map(|_| rng.uniform()).collect();
        let est = simplex_nnls(&dict, &f).unwrap();
        let recon = reconstruct(&dict, &est.ratios).unwrap();
        let dist = recon
            .iter()
            .zip(&f)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!((dist - est.residual).abs() < 1e-12);
    }

    // --- 5. brute-force oracle ---

    #[test]
    fn lattice_enumeration_hits_expected_points() {
        // With step 0.5 and C=2 the lattice is (0,1), (0.5,0.5), (1,0);
        // an off-lattice optimum of 0.6/0.4 must snap to (0.5, 0.5).
        let mut m = Mat::zeros(4, 2);
        m.set(0, 0, 1.0);
        m.set(1, 1, 1.0);
        let dict = Dictionary {
            matrix: m,
            component_names: vec!["a".to_string(), "b".to_string()],
        };
        let f = vec![0.6, 0.4, 0.0, 0.0];
        let est = brute_force_simplex(&dict, &f, 0.5).unwrap();
        assert_eq!(est.ratios, vec![0.5, 0.5]);
    }

    #[test]
    fn brute_force_recovers_exact_atom() {
        let mut rng = SeededRng::new(61);
        let dict = random_dictionary(&mut rng, 3);
        let f = column(&dict, 0);
        let est = brute_force_simplex(&dict, &f, 0.01).unwrap();
        assert_eq!(est.ratios[0], 1.0);
        assert_eq!(est.ratios[1], 0.0);
        assert_eq!(est.ratios[2], 0.0);
    }

    #[test]
    fn brute_force_guards_dictionary_size() {
        let mut rng = SeededRng::new(62);
        let dict = random_dictionary(&mut rng, 5);
        let f = vec![0.0; dict.matrix.rows];
        assert_eq!(
            brute_force_simplex(&dict, &f, 0.1),
            Err(UnmixError::TooManyComponents(5))
        );
    }

    #[test]
    fn solver_matches_grid_oracle_on_random_instances() {
        let mut rng = SeededRng::new(63);
        for trial in 0..25 {
            let dict = random_dictionary(&mut rng, 3);
            let f: Vec<f64> = (0..dict.matrix.rows).map(|_| rng.uniform()).collect();
            let fast = simplex_nnls(&dict, &f).unwrap();
            let slow = brute_force_simplex(&dict, &f, 0.01).unwrap();
            let fast_obj = fast.residual * fast.residual;
            let slow_obj = slow.residual * slow.residual;
            assert!(
                fast_obj <= slow_obj + 1e-3,
                "trial {trial}: solver {fast_obj} vs oracle {slow_obj}"
            );
            let am_fast = argmax(&fast.ratios);
            let am_slow = argmax(&slow.ratios);
            assert_eq!(am_fast, am_slow, "trial {trial}");
        }
    }

    fn argmax(v: &[f64]) -> usize {
        (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap()
    }

    // --- 6. mixture path ---

    #[test]
    fn mixture_blocks_average_by_component_weight() {
        let mut rng = SeededRng::new(71);
        let dict = random_dictionary(&mut rng, 4);
        let mut vector = column(&dict, 1);
        vector.extend(column(&dict, 3));
        let fp = Fingerprint { vector, rank: 2, source_sample: None };
        let est = mixture_ratios(&dict, &fp, &[2.0, 1.0]).unwrap();
        let want = [0.0, 2.0 / 3.0, 0.0, 1.0 / 3.0];
        for (j, (got, want)) in est.ratios.iter().zip(&want).enumerate() {
            assert!((got - want).abs() < 1e-5, "component {j}: got {got} want {want}");
        }
        assert!(mixture_ratios(&dict, &fp, &[1.0]).is_err());
    }
}
