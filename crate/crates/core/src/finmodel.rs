//! Finite-dimensional matrix models of weighted shifts.
//!
//! Two realizations feed the numerical experiments:
//!
//! * **Truncation**: the compression to `span{e_k : −N ≤ k ≤ N}`. Entry
//!   `(k+1, k)` carries `w_k`; everything at the boundary is dropped.
//!   Truncations of shifts are nilpotent, so they say nothing about spectra,
//!   but their powers reproduce window products exactly away from the edge.
//! * **Wrap**: the weighted cyclic shift of size `N`, entry
//!   `((k+1) mod N, k) = w_k`. Its characteristic equation is
//!   `λᴺ = ∏_{k=0}^{N−1} w_k`, so its spectrum is a closed-form circle
//!   sample — the finite stand-in for the shift's circular spectrum. A wrap
//!   is only honest when the weights on `[0, N)` are genuinely periodic with
//!   period dividing `N`; the constructor rejects anything else.
//!
//! Everything downstream is deliberately assumption-free: operator norms come
//! from power iteration on `M*M` with a fixed deterministic seed, matrix
//! powers from repeated multiplication with per-step norm capture (rescaled
//! so long products never overflow), and inverses from partially pivoted
//! Gauss-Jordan elimination. Dense matrices only, dimension capped at 4096.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::weights::{Repr, WeightSequence};
use crate::window;

/// Hard cap on model dimension; dense storage only.
pub const MAX_MODEL_DIM: usize = 4096;

/// Iteration cap for the power method.
pub const POWER_ITERATION_CAP: usize = 10_000;

/// Default uniform-boundedness threshold for [`FiniteModel::sznagy_check`].
pub const SZNAGY_THRESHOLD: f64 = 1e6;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model dimension must be between 1 and {MAX_MODEL_DIM}, got {0}")]
    DimensionOutOfRange(usize),
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix entries must be finite")]
    NonFiniteEntry,
    #[error("power iteration did not converge within {0} iterations; the top singular values are too close to resolve")]
    NonConvergence(usize),
    #[error("matrix is numerically singular: {0}")]
    SingularMatrix(String),
    #[error("invalid wrap model: {0}")]
    InvalidWrap(String),
    #[error("intertwining precondition violated: |X*A - B*X| = {residual:.6e} exceeds {bound:.6e}")]
    NotIntertwining { residual: f64, bound: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

#[derive(Debug, Clone)]
pub enum ModelKind {
    Truncation { seq: WeightSequence, half_width: usize },
    Wrap { seq: WeightSequence, size: usize },
    General,
}

/// A dense complex matrix tagged with how it was built.
#[derive(Debug, Clone)]
pub struct FiniteModel {
    dim: usize,
    entries: Array2<Complex64>,
    kind: ModelKind,
}

impl FiniteModel {
    /// Compression of the shift to `span{e_k : |k| ≤ half_width}`,
    /// dimension `2·half_width + 1`.
    pub fn truncation(seq: &WeightSequence, half_width: usize) -> Result<FiniteModel, ModelError> {
        let dim = 2 * half_width + 1;
        check_dim(dim)?;
        let n = half_width as i64;
        let mut entries = Array2::zeros((dim, dim));
        for (col, k) in (-n..n).enumerate() {
            entries[[col + 1, col]] = seq.weight_at(k);
        }
        Ok(FiniteModel {
            dim,
            entries,
            kind: ModelKind::Truncation {
                seq: seq.clone(),
                half_width,
            },
        })
    }

    /// Weighted cyclic shift carrying `w_0 … w_{size−1}`. Requires the window
    /// `[0, size)` to be purely periodic with period dividing `size`; see
    /// [`wrap_validity`].
    pub fn wrap(seq: &WeightSequence, size: usize) -> Result<FiniteModel, ModelError> {
        check_dim(size)?;
        wrap_validity(seq, size)?;
        let mut entries = Array2::zeros((size, size));
        for k in 0..size {
            entries[[(k + 1) % size, k]] = seq.weight_at(k as i64);
        }
        Ok(FiniteModel {
            dim: size,
            entries,
            kind: ModelKind::Wrap {
                seq: seq.clone(),
                size,
            },
        })
    }

    /// Wraps an arbitrary square matrix (test instruments, conjugations, …).
    pub fn from_matrix(entries: Array2<Complex64>) -> Result<FiniteModel, ModelError> {
        let (rows, cols) = entries.dim();
        if rows != cols {
            return Err(ModelError::NotSquare { rows, cols });
        }
        check_dim(rows)?;
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(ModelError::NonFiniteEntry);
        }
        Ok(FiniteModel {
            dim: rows,
            entries,
            kind: ModelKind::General,
        })
    }

    pub fn identity(dim: usize) -> Result<FiniteModel, ModelError> {
        check_dim(dim)?;
        Ok(FiniteModel {
            dim,
            entries: Array2::eye(dim),
            kind: ModelKind::General,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    /// Largest singular value via power iteration on `M*M`: deterministic
    /// all-ones start vector (falling back to basis vectors if it lands in
    /// the kernel), stall-based convergence, hard cap
    /// [`POWER_ITERATION_CAP`]. Near-degenerate top singular values that the
    /// iteration cannot separate surface as [`ModelError::NonConvergence`]
    /// rather than a silently wrong value.
    pub fn operator_norm(&self) -> Result<f64, ModelError> {
        operator_norm_of(&self.entries)
    }

    /// `M⁻¹` by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<FiniteModel, ModelError> {
        let inv = invert_matrix(&self.entries)?;
        Ok(FiniteModel {
            dim: self.dim,
            entries: inv,
            kind: ModelKind::General,
        })
    }

    /// `Mⁿ` by repeated multiplication (`n = 0` gives the identity). Entries
    /// of high powers of expanding matrices can overflow; the norm-tracking
    /// in [`FiniteModel::sznagy_check`] is the overflow-safe route.
    pub fn power(&self, n: u32) -> FiniteModel {
        let mut acc = Array2::eye(self.dim);
        for _ in 0..n {
            acc = matmul(&acc, &self.entries);
        }
        FiniteModel {
            dim: self.dim,
            entries: acc,
            kind: ModelKind::General,
        }
    }

    /// Uniform power-boundedness probe: tracks `‖Mⁿ‖` and `‖M⁻ⁿ‖` for
    /// `1 ≤ n ≤ horizon` by repeated multiplication of norm-rescaled powers
    /// (log-accumulated, so nothing overflows along the way). The verdict
    /// compares the two suprema against [`SZNAGY_THRESHOLD`] — a horizon
    /// heuristic, not a certificate.
    pub fn sznagy_check(&self, horizon: u32) -> Result<SzNagyReport, ModelError> {
        assert!(horizon >= 1, "horizon must be at least 1");
        let inv = self.inverse()?;
        let norm_fwd = self.operator_norm()?;
        let norm_bwd = inv.operator_norm()?;
        // Precondition: smallest singular value above 1e-12·‖M‖.
        if norm_fwd * norm_bwd >= 1e12 {
            return Err(ModelError::SingularMatrix(format!(
                "condition number {:.3e} leaves no reliable inverse powers",
                norm_fwd * norm_bwd
            )));
        }
        let sup_fwd = sup_power_norm(&self.entries, horizon)?;
        let sup_bwd = sup_power_norm(&inv.entries, horizon)?;
        Ok(SzNagyReport {
            sup_fwd,
            sup_bwd,
            power_bounded_within_horizon: sup_fwd.max(sup_bwd) <= SZNAGY_THRESHOLD,
            horizon,
            threshold: SZNAGY_THRESHOLD,
        })
    }

    /// `‖M·M* − M*·M‖`; zero exactly for normal matrices.
    pub fn normality_residual(&self) -> Result<f64, ModelError> {
        let adj = adjoint(&self.entries);
        let mut d = matmul(&self.entries, &adj);
        let e = matmul(&adj, &self.entries);
        d.zip_mut_with(&e, |a, b| *a -= b);
        operator_norm_of(&d)
    }
}

/// Report of [`FiniteModel::sznagy_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SzNagyReport {
    /// `max_{1 ≤ n ≤ horizon} ‖Mⁿ‖`.
    pub sup_fwd: f64,
    /// `max_{1 ≤ n ≤ horizon} ‖M⁻ⁿ‖`.
    pub sup_bwd: f64,
    /// `max(sup_fwd, sup_bwd) ≤ threshold` — heuristic evidence of similarity
    /// to a unitary, valid only within the horizon.
    pub power_bounded_within_horizon: bool,
    pub horizon: u32,
    pub threshold: f64,
}

/// Checks that a wrap of this size is a faithful periodic model: the window
/// `[0, size)` must repeat one pattern an integral number of times — no
/// overrides inside it, no split crossing it, no sampled tables at all.
pub fn wrap_validity(seq: &WeightSequence, size: usize) -> Result<(), ModelError> {
    let n = size as i64;
    match &seq.repr {
        Repr::Periodic { pattern } => {
            if !size.is_multiple_of(pattern.period()) {
                return Err(ModelError::InvalidWrap(format!(
                    "size {size} is not a multiple of the period {}",
                    pattern.period()
                )));
            }
        }
        Repr::Modified { base, overrides } => {
            if !size.is_multiple_of(base.period()) {
                return Err(ModelError::InvalidWrap(format!(
                    "size {size} is not a multiple of the base period {}",
                    base.period()
                )));
            }
            if let Some(k) = overrides.keys().find(|&&k| (0..n).contains(&k)) {
                return Err(ModelError::InvalidWrap(format!(
                    "window [0, {size}) contains overridden index {k}"
                )));
            }
        }
        Repr::Split { left, right, split } => {
            let period = if *split <= 0 {
                right.period()
            } else if *split >= n {
                left.period()
            } else {
                return Err(ModelError::InvalidWrap(format!(
                    "window [0, {size}) crosses the split at {split}"
                )));
            };
            if !size.is_multiple_of(period) {
                return Err(ModelError::InvalidWrap(format!(
                    "size {size} is not a multiple of the governing period {period}"
                )));
            }
        }
        Repr::Sampled { .. } => {
            return Err(ModelError::InvalidWrap(
                "sampled tables have no periodic structure to wrap".into(),
            ));
        }
    }
    Ok(())
}

/// Eigenvalues of the size-`N` wrap in closed form: the `N` solutions of
/// `λᴺ = ∏_{k=0}^{N−1} w_k`, common modulus `(∏|w_k|)^{1/N}`, equally spaced
/// arguments. Sorted by argument in `(−π, π]` for deterministic output.
pub fn wrap_spectrum(seq: &WeightSequence, size: usize) -> Result<Vec<Complex64>, ModelError> {
    check_dim(size)?;
    wrap_validity(seq, size)?;
    let log_modulus =
        window::compensated_total((0..size as i64).map(|k| seq.weight_at(k).norm().ln()));
    let phase = window::compensated_total((0..size as i64).map(|k| seq.weight_at(k).arg()));
    let radius = (log_modulus / size as f64).exp();
    let base_angle = phase / size as f64;
    let mut angles: Vec<f64> = (0..size)
        .map(|j| wrap_angle(base_angle + std::f64::consts::TAU * j as f64 / size as f64))
        .collect();
    angles.sort_by(f64::total_cmp);
    Ok(angles
        .into_iter()
        .map(|a| Complex64::from_polar(radius, a))
        .collect())
}

/// `‖S_wⁿ‖ = sup_k ∏_{j=1}^{n} |w_{k+j}|`, exact via the finite window scan.
pub fn power_norm_exact(seq: &WeightSequence, n: u32) -> f64 {
    assert!(n >= 1, "power must be at least 1");
    let (sup_ln, _, _, _) = window::fixed_n_extrema_log(seq, n);
    sup_ln.exp()
}

/// `‖S_w⁻ⁿ‖ = sup_k ∏_{j=1}^{n} |w_{k+j}|⁻¹`, exact via the same scan.
pub fn inverse_power_norm_exact(seq: &WeightSequence, n: u32) -> f64 {
    assert!(n >= 1, "power must be at least 1");
    let (_, _, inf_ln, _) = window::fixed_n_extrema_log(seq, n);
    (-inf_ln).exp()
}

/// Report of [`lemma1_harness`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma1Report {
    /// `‖X·Aⁿ − Bⁿ·X‖`.
    pub residual: f64,
    /// The similarity-propagation contract `1e-8·‖X‖·‖A‖ⁿ`.
    pub bound: f64,
    pub within_contract: bool,
    /// `‖X·A − B·X‖`, the checked precondition level.
    pub precondition_residual: f64,
}

/// Numerical harness for similarity propagating to powers: given `X·A = B·X`
/// with `X` invertible, measures `‖X·Aⁿ − Bⁿ·X‖`. A violated precondition is
/// an error ([`ModelError::NotIntertwining`]); a violated power contract is
/// reported in the result, never conflated with it.
pub fn lemma1_harness(
    a: &FiniteModel,
    b: &FiniteModel,
    x: &FiniteModel,
    n: u32,
) -> Result<Lemma1Report, ModelError> {
    if a.dim != b.dim || a.dim != x.dim {
        return Err(ModelError::DimensionMismatch(format!(
            "A is {}-dimensional, B {}, X {}",
            a.dim, b.dim, x.dim
        )));
    }
    x.inverse()?; // X must be invertible; the inverse itself is not needed.
    let norm_x = x.operator_norm()?;
    let norm_a = a.operator_norm()?;
    let pre_bound = 1e-12 * norm_x * norm_a;
    let precondition_residual = {
        let mut d = matmul(&x.entries, &a.entries);
        let e = matmul(&b.entries, &x.entries);
        d.zip_mut_with(&e, |p, q| *p -= q);
        operator_norm_of(&d)?
    };
    if precondition_residual > pre_bound {
        return Err(ModelError::NotIntertwining {
            residual: precondition_residual,
            bound: pre_bound,
        });
    }
    let mut d = matmul(&x.entries, &a.power(n).entries);
    let e = matmul(&b.power(n).entries, &x.entries);
    d.zip_mut_with(&e, |p, q| *p -= q);
    let residual = operator_norm_of(&d)?;
    let bound = 1e-8 * norm_x * norm_a.powi(n as i32);
    Ok(Lemma1Report {
        residual,
        bound,
        within_contract: residual <= bound,
        precondition_residual,
    })
}

/// Image and norm of `S_wⁿ x` for a finitely supported `x` given as
/// `(index, coefficient)` pairs (duplicates are summed).
#[derive(Debug, Clone, PartialEq)]
pub struct ApplyPowerResult {
    /// `(index, coefficient)` of the image, ascending by index.
    pub image: Vec<(i64, Complex64)>,
    /// `‖S_wⁿ x‖`, accumulated log-stabilized so mixed huge/tiny window
    /// products cannot overflow intermediates.
    pub norm: f64,
}

/// `S_wⁿ` applied coefficientwise: the coefficient at `k` travels to `k + n`
/// multiplied by `w_k·w_{k+1}⋯w_{k+n−1}`.
pub fn apply_power(seq: &WeightSequence, x: &[(i64, Complex64)], n: u32) -> ApplyPowerResult {
    let mut support: std::collections::BTreeMap<i64, Complex64> = std::collections::BTreeMap::new();
    for &(k, coeff) in x {
        *support.entry(k).or_insert(Complex64::new(0.0, 0.0)) += coeff;
    }
    let mut image = Vec::with_capacity(support.len());
    let mut log_moduli = Vec::with_capacity(support.len());
    for (&k, &coeff) in &support {
        // ∏_{j=0}^{n−1} w_{k+j} in log/phase form.
        let log_mod =
            coeff.norm().ln() + window::window_product_log(seq, k - 1, n);
        let phase = coeff.arg()
            + window::compensated_total((0..i64::from(n)).map(|j| seq.weight_at(k + j).arg()));
        image.push((k + i64::from(n), Complex64::from_polar(log_mod.exp(), phase)));
        log_moduli.push(log_mod);
    }
    let norm = log_stabilized_l2(&log_moduli);
    ApplyPowerResult { image, norm }
}

/// `sqrt(Σ exp(2·m_i))` without overflowing intermediates.
fn log_stabilized_l2(log_moduli: &[f64]) -> f64 {
    let peak = log_moduli
        .iter()
        .copied()
        .filter(|m| m.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return 0.0;
    }
    let sum: f64 = log_moduli
        .iter()
        .filter(|m| m.is_finite())
        .map(|m| (2.0 * (m - peak)).exp())
        .sum();
    (peak + 0.5 * sum.ln()).exp()
}

// ---------------------------------------------------------------------------
// Seeded instrument matrices for the oracle harnesses.

/// Dense matrix with entries uniform in `[−1, 1]²` (real and imaginary).
pub fn random_model(rng: &mut impl Rng, dim: usize) -> Result<FiniteModel, ModelError> {
    check_dim(dim)?;
    let mut entries = Array2::zeros((dim, dim));
    for z in entries.iter_mut() {
        *z = Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
    }
    FiniteModel::from_matrix(entries)
}

/// `X = I + R/(2‖R‖)`: invertible by construction with `‖X‖ ≤ 3/2`,
/// `‖X⁻¹‖ ≤ 2`, hence condition number at most 3.
pub fn random_well_conditioned(rng: &mut impl Rng, dim: usize) -> Result<FiniteModel, ModelError> {
    let r = random_model(rng, dim)?;
    let norm = r.operator_norm()?;
    let mut entries = Array2::eye(dim);
    if norm > 0.0 {
        entries.zip_mut_with(&r.entries, |x, y| *x += y / (2.0 * norm));
    }
    FiniteModel::from_matrix(entries)
}

/// Unitary diagonal `diag(e^{iθ_j})` with seeded uniform phases.
pub fn random_unitary_diagonal(rng: &mut impl Rng, dim: usize) -> Result<FiniteModel, ModelError> {
    check_dim(dim)?;
    let mut entries = Array2::zeros((dim, dim));
    for j in 0..dim {
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        entries[[j, j]] = Complex64::from_polar(1.0, theta);
    }
    FiniteModel::from_matrix(entries)
}

// ---------------------------------------------------------------------------
// Dense kernels. Row-major slices, i-k-j loop order.

fn check_dim(dim: usize) -> Result<(), ModelError> {
    if dim == 0 || dim > MAX_MODEL_DIM {
        return Err(ModelError::DimensionOutOfRange(dim));
    }
    Ok(())
}

pub(crate) fn matmul(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let (n, m) = a.dim();
    let (m2, p) = b.dim();
    assert_eq!(m, m2, "inner dimensions must agree");
    let a_s = a.as_slice().expect("matmul expects standard layout");
    let b_s = b.as_slice().expect("matmul expects standard layout");
    let mut out = vec![Complex64::new(0.0, 0.0); n * p];
    for i in 0..n {
        let a_row = &a_s[i * m..(i + 1) * m];
        let out_row = &mut out[i * p..(i + 1) * p];
        for (k, &aik) in a_row.iter().enumerate() {
            if aik.re == 0.0 && aik.im == 0.0 {
                continue;
            }
            let b_row = &b_s[k * p..(k + 1) * p];
            for (o, &bkj) in out_row.iter_mut().zip(b_row) {
                *o += aik * bkj;
            }
        }
    }
    Array2::from_shape_vec((n, p), out).expect("shape is consistent by construction")
}

pub(crate) fn adjoint(a: &Array2<Complex64>) -> Array2<Complex64> {
    let (n, m) = a.dim();
    let mut out = Array2::zeros((m, n));
    for i in 0..n {
        for j in 0..m {
            out[[j, i]] = a[[i, j]].conj();
        }
    }
    out
}

fn matvec(a: &Array2<Complex64>, v: &[Complex64], out: &mut [Complex64]) {
    let (n, m) = a.dim();
    let a_s = a.as_slice().expect("matvec expects standard layout");
    for (i, o) in out.iter_mut().enumerate().take(n) {
        let row = &a_s[i * m..(i + 1) * m];
        let mut acc = Complex64::new(0.0, 0.0);
        for (aij, x) in row.iter().zip(v) {
            if aij.re != 0.0 || aij.im != 0.0 {
                acc += aij * x;
            }
        }
        *o = acc;
    }
}

/// `out = A* v`, accumulated row by row to stay cache-friendly.
fn matvec_adj(a: &Array2<Complex64>, v: &[Complex64], out: &mut [Complex64]) {
    let (n, m) = a.dim();
    let a_s = a.as_slice().expect("matvec expects standard layout");
    out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
    for i in 0..n {
        let row = &a_s[i * m..(i + 1) * m];
        let vi = v[i];
        for (o, aij) in out.iter_mut().zip(row) {
            if aij.re != 0.0 || aij.im != 0.0 {
                *o += aij.conj() * vi;
            }
        }
    }
}

fn l2_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn operator_norm_of(a: &Array2<Complex64>) -> Result<f64, ModelError> {
    let (n, m) = a.dim();
    if a.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
        return Ok(0.0);
    }
    let mut seeds = 0usize;
    let mut v = vec![Complex64::new(1.0 / (m as f64).sqrt(), 0.0); m];
    let mut av = vec![Complex64::new(0.0, 0.0); n];
    let mut z = vec![Complex64::new(0.0, 0.0); m];
    let mut prev = f64::NEG_INFINITY;
    let mut stall = 0u32;
    let mut iterations = 0usize;
    loop {
        if iterations >= POWER_ITERATION_CAP {
            return Err(ModelError::NonConvergence(POWER_ITERATION_CAP));
        }
        iterations += 1;
        matvec(a, &v, &mut av);
        let sigma = l2_norm(&av);
        if sigma == 0.0 {
            // The seed fell in the kernel; move to the next basis vector.
            if seeds >= m {
                return Ok(0.0);
            }
            v.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
            v[seeds] = Complex64::new(1.0, 0.0);
            seeds += 1;
            prev = f64::NEG_INFINITY;
            stall = 0;
            continue;
        }
        if (sigma - prev).abs() <= 1e-13 * sigma {
            stall += 1;
            if stall >= 3 {
                return Ok(sigma);
            }
        } else {
            stall = 0;
        }
        prev = sigma;
        matvec_adj(a, &av, &mut z);
        let nz = l2_norm(&z);
        if nz == 0.0 {
            // A*Av = 0 while Av ≠ 0 cannot happen (same kernel); be safe.
            return Ok(sigma);
        }
        let inv = 1.0 / nz;
        for (vi, zi) in v.iter_mut().zip(&z) {
            *vi = zi * inv;
        }
    }
}

/// `max_{1 ≤ n ≤ horizon} ‖Mⁿ‖`, tracking a norm-rescaled running power so
/// the entries never overflow; the supremum is accumulated in the log domain.
fn sup_power_norm(m: &Array2<Complex64>, horizon: u32) -> Result<f64, ModelError> {
    let mut sup_ln = f64::NEG_INFINITY;
    let mut acc_ln = 0.0;
    let mut running = m.clone();
    for step in 1..=horizon {
        let t = operator_norm_of(&running)?;
        if t == 0.0 {
            break; // nilpotent: all later powers vanish
        }
        acc_ln += t.ln();
        sup_ln = sup_ln.max(acc_ln);
        if step < horizon {
            let inv = 1.0 / t;
            let mut scaled = running;
            scaled.mapv_inplace(|x| x * inv);
            running = matmul(m, &scaled);
        }
    }
    Ok(sup_ln.exp())
}

fn invert_matrix(a: &Array2<Complex64>) -> Result<Array2<Complex64>, ModelError> {
    let (n, _) = a.dim();
    let mut work = a.clone();
    let mut out = Array2::<Complex64>::eye(n);
    let scale = a.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    let pivot_floor = scale * 1e-15 * n as f64;
    for col in 0..n {
        let (pivot_row, pivot_mag) = (col..n)
            .map(|r| (r, work[[r, col]].norm()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("column range is nonempty");
        if pivot_mag <= pivot_floor {
            return Err(ModelError::SingularMatrix(format!(
                "pivot {col} has magnitude {pivot_mag:.3e}"
            )));
        }
        if pivot_row != col {
            for j in 0..n {
                work.swap([pivot_row, j], [col, j]);
                out.swap([pivot_row, j], [col, j]);
            }
        }
        let inv_pivot = work[[col, col]].inv();
        for j in 0..n {
            work[[col, j]] *= inv_pivot;
            out[[col, j]] *= inv_pivot;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = work[[r, col]];
            if factor.re == 0.0 && factor.im == 0.0 {
                continue;
            }
            for j in 0..n {
                let w = work[[col, j]];
                let o = out[[col, j]];
                work[[r, j]] -= factor * w;
                out[[r, j]] -= factor * o;
            }
        }
    }
    Ok(out)
}

fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(std::f64::consts::TAU);
    if r > std::f64::consts::PI {
        r -= std::f64::consts::TAU;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::parse_sequence;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seq(spec: &str) -> WeightSequence {
        parse_sequence(spec).unwrap()
    }

    fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
        assert!(
            (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0),
            "{what}: {a} vs {b}"
        );
    }

    #[test]
    fn truncation_layout_and_operator_norms() {
        let m = FiniteModel::truncation(&seq("periodic:1"), 4).unwrap();
        assert_eq!(m.dim(), 9);
        assert_eq!(m.entries()[[1, 0]], Complex64::new(1.0, 0.0), "subdiagonal carries w");
        assert_eq!(m.entries()[[0, 1]], Complex64::new(0.0, 0.0), "superdiagonal empty");
        assert_close(m.operator_norm().unwrap(), 1.0, 1e-12, "all-ones truncation");

        let m = FiniteModel::truncation(&seq("periodic:1,2"), 4).unwrap();
        assert_close(m.operator_norm().unwrap(), 2.0, 1e-10, "norm is the largest band weight");

        let zero = FiniteModel::from_matrix(Array2::zeros((5, 5))).unwrap();
        assert_eq!(zero.operator_norm().unwrap(), 0.0, "zero matrix has norm zero");

        assert!(
            matches!(
                FiniteModel::truncation(&seq("periodic:1"), 3000),
                Err(ModelError::DimensionOutOfRange(_))
            ),
            "dimension cap enforced"
        );
    }

    #[test]
    fn exact_power_norms_match_hand_values() {
        assert_close(power_norm_exact(&seq("periodic:1"), 7), 1.0, 1e-12, "unitary powers");
        assert_close(power_norm_exact(&seq("periodic:1,2"), 2), 2.0, 1e-12, "length-2 windows");
        assert_close(power_norm_exact(&seq("periodic:1,2"), 3), 4.0, 1e-12, "best length-3 window");
        assert_close(inverse_power_norm_exact(&seq("periodic:1"), 3), 1.0, 1e-12, "unitary inverse");
        assert_close(inverse_power_norm_exact(&seq("periodic:1,2"), 2), 0.5, 1e-12, "reciprocal window");
        assert_close(inverse_power_norm_exact(&seq("periodic:2"), 4), 1.0 / 16.0, 1e-12, "constant decay");
    }

    #[test]
    fn wrap_rejects_structure_violations() {
        let err = FiniteModel::wrap(&seq("periodic:1,2,4"), 8).unwrap_err();
        assert!(matches!(err, ModelError::InvalidWrap(_)), "period 3 cannot wrap to 8: {err}");
        let err = FiniteModel::wrap(&seq("split:1|2@3"), 8).unwrap_err();
        assert!(err.to_string().contains("crosses the split"), "{err}");
        let err = FiniteModel::wrap(&seq("modified:periodic:1,2;3=5"), 8).unwrap_err();
        assert!(err.to_string().contains("overridden index 3"), "{err}");
        assert!(
            FiniteModel::wrap(&seq("modified:periodic:1,2;-3=5"), 8).is_ok(),
            "overrides outside the window leave the wrap faithful"
        );
        assert!(
            FiniteModel::wrap(&seq("split:1|2@0"), 8).is_ok(),
            "split at 0 leaves [0, 8) purely right-sided"
        );
        let s = WeightSequence::sampled(0, vec![Complex64::new(1.0, 0.0)], Complex64::new(1.0, 0.0))
            .unwrap();
        assert!(matches!(FiniteModel::wrap(&s, 4), Err(ModelError::InvalidWrap(_))));
    }

    #[test]
    fn wrap_spectrum_matches_the_characteristic_equation() {
        let eigs = wrap_spectrum(&seq("periodic:1"), 4).unwrap();
        let expected = [
            Complex64::new(0.0, -1.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
        ];
        for (got, want) in eigs.iter().zip(&expected) {
            assert!((got - want).norm() <= 1e-12, "4th roots of unity in arg order: {eigs:?}");
        }

        for (spec, n, want_modulus) in [
            ("periodic:1,2", 4, 2.0f64.sqrt()),
            ("periodic:2", 6, 2.0),
        ] {
            let eigs = wrap_spectrum(&seq(spec), n).unwrap();
            assert_eq!(eigs.len(), n);
            for lam in &eigs {
                assert_close(lam.norm(), want_modulus, 1e-12, &format!("{spec} modulus"));
            }
        }

        // Every closed-form eigenvalue admits the explicit cyclic eigenvector
        // x_{k+1} = w_k x_k / λ; check the residual through the matrix.
        let s = seq("periodic:1,2");
        let m = FiniteModel::wrap(&s, 4).unwrap();
        for lam in wrap_spectrum(&s, 4).unwrap() {
            let mut x = vec![Complex64::new(1.0, 0.0); 4];
            for k in 0..3 {
                x[k + 1] = s.weight_at(k as i64) * x[k] / lam;
            }
            let mut mx = vec![Complex64::new(0.0, 0.0); 4];
            matvec(m.entries(), &x, &mut mx);
            let err: f64 = mx
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - lam * b).norm())
                .sum();
            assert!(err <= 1e-12 * l2_norm(&x), "eigen residual for {lam}: {err}");
        }
    }

    #[test]
    fn sznagy_tracks_power_norms() {
        let id = FiniteModel::identity(6).unwrap();
        let report = id.sznagy_check(50).unwrap();
        assert_close(report.sup_fwd, 1.0, 1e-12, "identity forward");
        assert_close(report.sup_bwd, 1.0, 1e-12, "identity backward");
        assert!(report.power_bounded_within_horizon);

        let mut d = Array2::zeros((2, 2));
        d[[0, 0]] = Complex64::new(2.0, 0.0);
        d[[1, 1]] = Complex64::new(0.5, 0.0);
        let m = FiniteModel::from_matrix(d).unwrap();
        let report = m.sznagy_check(20).unwrap();
        assert_close(report.sup_fwd, 1_048_576.0, 1e-9, "2^20 forward");
        assert_close(report.sup_bwd, 1_048_576.0, 1e-9, "2^20 backward via the 1/2 entry");
        assert!(!report.power_bounded_within_horizon, "exceeds the 1e6 threshold");

        let singular = FiniteModel::from_matrix(Array2::zeros((3, 3))).unwrap();
        assert!(matches!(
            singular.sznagy_check(5),
            Err(ModelError::SingularMatrix(_))
        ));
    }

    #[test]
    fn conjugated_unitary_stays_power_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let dim = 6;
        let x = random_well_conditioned(&mut rng, dim).unwrap();
        let u = random_unitary_diagonal(&mut rng, dim).unwrap();
        let x_inv = x.inverse().unwrap();
        let t = FiniteModel::from_matrix(matmul(
            &matmul(x.entries(), u.entries()),
            x_inv.entries(),
        ))
        .unwrap();
        let report = t.sznagy_check(100).unwrap();
        let kappa = x.operator_norm().unwrap() * x_inv.operator_norm().unwrap();
        assert!(
            report.sup_fwd <= kappa * kappa + 1e-9 && report.sup_bwd <= kappa * kappa + 1e-9,
            "norms {}/{} must stay within kappa^2 = {}",
            report.sup_fwd,
            report.sup_bwd,
            kappa * kappa
        );
        assert!(report.power_bounded_within_horizon);
    }

    #[test]
    fn normality_residual_separates_constant_modulus() {
        let m = FiniteModel::wrap(&seq("periodic:1"), 8).unwrap();
        assert!(m.normality_residual().unwrap() <= 1e-12, "unitary wrap is normal");
        let m = FiniteModel::wrap(&seq("periodic:2i"), 8).unwrap();
        assert!(m.normality_residual().unwrap() <= 1e-12, "constant modulus is normal");
        let m = FiniteModel::wrap(&seq("periodic:1,2"), 8).unwrap();
        assert_close(
            m.normality_residual().unwrap(),
            3.0,
            1e-10,
            "commutator is diagonal with entries |w_{k-1}|^2 - |w_k|^2",
        );
    }

    #[test]
    fn lemma1_propagates_similarity_to_powers() {
        let id = FiniteModel::identity(4).unwrap();
        let report = lemma1_harness(&id, &id, &id, 5).unwrap();
        assert!(report.residual <= 1e-14, "identity intertwines itself");
        assert!(report.within_contract);

        // Nilpotent pair: both sides of the power identity vanish.
        let mut j2 = Array2::zeros((2, 2));
        j2[[1, 0]] = Complex64::new(1.0, 0.0);
        let a = FiniteModel::from_matrix(j2).unwrap();
        let mut dx = Array2::zeros((2, 2));
        dx[[0, 0]] = Complex64::new(1.0, 0.0);
        dx[[1, 1]] = Complex64::new(2.0, 0.0);
        let x = FiniteModel::from_matrix(dx).unwrap();
        let b = FiniteModel::from_matrix(matmul(
            &matmul(x.entries(), a.entries()),
            x.inverse().unwrap().entries(),
        ))
        .unwrap();
        let report = lemma1_harness(&a, &b, &x, 2).unwrap();
        assert!(report.residual <= 1e-14, "squares of nilpotents vanish");

        // Seeded random conjugation at n = 4.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_model(&mut rng, 5).unwrap();
        let x = random_well_conditioned(&mut rng, 5).unwrap();
        let b = FiniteModel::from_matrix(matmul(
            &matmul(x.entries(), a.entries()),
            x.inverse().unwrap().entries(),
        ))
        .unwrap();
        let report = lemma1_harness(&a, &b, &x, 4).unwrap();
        assert!(
            report.within_contract,
            "residual {} must stay within {}",
            report.residual, report.bound
        );

        // A deliberately broken intertwiner is a precondition error, not a
        // silently failing report.
        let err = lemma1_harness(&a, &a, &x, 2).unwrap_err();
        assert!(matches!(err, ModelError::NotIntertwining { .. }), "{err}");
    }

    #[test]
    fn apply_power_moves_coefficients_with_window_products() {
        let one = Complex64::new(1.0, 0.0);
        let res = apply_power(&seq("periodic:1"), &[(0, one)], 3);
        assert_eq!(res.image.len(), 1);
        assert_eq!(res.image[0].0, 3);
        assert!((res.image[0].1 - one).norm() <= 1e-15);
        assert_close(res.norm, 1.0, 1e-15, "unitary preserves norm");

        let res = apply_power(&seq("periodic:1,2"), &[(0, one)], 2);
        assert!((res.image[0].1 - Complex64::new(2.0, 0.0)).norm() <= 1e-14);
        assert_close(res.norm, 2.0, 1e-14, "w_0*w_1 = 2");

        let res = apply_power(&seq("periodic:1,2"), &[(0, one), (1, one)], 1);
        assert_eq!(res.image.len(), 2);
        assert!((res.image[0].1 - one).norm() <= 1e-14, "w_0 = 1");
        assert!((res.image[1].1 - Complex64::new(2.0, 0.0)).norm() <= 1e-14, "w_1 = 2");
        assert_close(res.norm, 5.0f64.sqrt(), 1e-14, "sqrt(1 + 4)");

        // Phases propagate: weight 2i rotates each step by pi/2.
        let res = apply_power(&seq("periodic:2i"), &[(0, one)], 2);
        assert!(
            (res.image[0].1 - Complex64::new(-4.0, 0.0)).norm() <= 1e-13,
            "(2i)^2 = -4, got {:?}",
            res.image[0].1
        );
    }

    #[test]
    fn matrix_power_and_inverse_are_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_well_conditioned(&mut rng, 6).unwrap();
        let cubed = m.power(3);
        let step = matmul(&matmul(m.entries(), m.entries()), m.entries());
        let mut diff = cubed.entries().clone();
        diff.zip_mut_with(&step, |a, b| *a -= b);
        assert!(operator_norm_of(&diff).unwrap() <= 1e-13, "power = repeated product");

        let mut diff = matmul(m.entries(), m.inverse().unwrap().entries());
        let eye = Array2::<Complex64>::eye(6);
        diff.zip_mut_with(&eye, |a, b| *a -= b);
        assert!(operator_norm_of(&diff).unwrap() <= 1e-12, "M * M^-1 = I");

        assert!(matches!(m.power(0).entries()[[0, 0]], z if (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn seeded_instruments_are_deterministic() {
        let a1 = random_model(&mut ChaCha8Rng::seed_from_u64(11), 4).unwrap();
        let a2 = random_model(&mut ChaCha8Rng::seed_from_u64(11), 4).unwrap();
        assert_eq!(a1.entries(), a2.entries(), "same seed, same matrix");
        let a3 = random_model(&mut ChaCha8Rng::seed_from_u64(12), 4).unwrap();
        assert_ne!(a1.entries(), a3.entries(), "different seed, different matrix");
    }
}
