//! Complex dense linear-algebra kernel.
//!
//! Exactly the primitives the shaping math needs: Kronecker products of
//! vectors, Hermitian eigen-decomposition with a deterministic eigenvector
//! phase, and Hermitian positive-definite solves. The eigen and Cholesky
//! factorizations are backed by nalgebra; everything else is local.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative Frobenius tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_REL_TOL: f64 = 1e-10;
/// Eigen-pair residual bound: `‖A·q − λq‖ ≤ EIG_RESIDUAL_REL_TOL · ‖A‖_F`.
pub const EIG_RESIDUAL_REL_TOL: f64 = 1e-8;
/// Solve residual bound: `‖A·x − b‖ ≤ SOLVE_RESIDUAL_REL_TOL · ‖A‖_F · ‖x‖`.
pub const SOLVE_RESIDUAL_REL_TOL: f64 = 1e-8;
/// HPD solves are refused above this condition estimate.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Rejects NaN/Inf entries on the public operation boundary.
pub fn ensure_finite_vec(name: &str, v: &DVector<Complex64>) -> Result<()> {
    if v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Contract(format!("`{name}` contains non-finite entries")))
    }
}

/// Rejects NaN/Inf entries on the public operation boundary.
pub fn ensure_finite_mat(name: &str, m: &DMatrix<Complex64>) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Contract(format!("`{name}` contains non-finite entries")))
    }
}

/// Hermitian within `HERMITIAN_REL_TOL` (relative Frobenius).
pub fn is_hermitian(a: &DMatrix<Complex64>) -> bool {
    if !a.is_square() {
        return false;
    }
    let skew = (a - a.adjoint()).norm();
    skew <= HERMITIAN_REL_TOL * a.norm().max(f64::MIN_POSITIVE)
}

/// Kronecker product of two column vectors: block `l` of the result is
/// `a[l] · b`, so `kron(a, b)` has length `|a|·|b|` and norm `‖a‖·‖b‖`.
pub fn kron(a: &DVector<Complex64>, b: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::dimension(
            "kron",
            format!("factors must be nonempty, got {} and {}", a.len(), b.len()),
        ));
    }
    ensure_finite_vec("kron lhs", a)?;
    ensure_finite_vec("kron rhs", b)?;
    let mut out = DVector::zeros(a.len() * b.len());
    kron_into(a.as_slice(), b.as_slice(), &mut out);
    Ok(out)
}

/// Allocation-free Kronecker product used by hot loops. Dims unchecked.
pub(crate) fn kron_into(a: &[Complex64], b: &[Complex64], out: &mut DVector<Complex64>) {
    let nb = b.len();
    let slice = out.as_mut_slice();
    for (l, &al) in a.iter().enumerate() {
        for (k, &bk) in b.iter().enumerate() {
            slice[l * nb + k] = al * bk;
        }
    }
}

/// Rotates `v` by a global phase so its first nonzero component is real
/// positive; makes eigenvector output deterministic.
pub(crate) fn fix_phase(v: &mut DVector<Complex64>) {
    let scale = v.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    if scale == 0.0 {
        return;
    }
    let lead = v.iter().find(|z| z.norm() > 1e-12 * scale);
    if let Some(&z) = lead {
        let rot = z.conj() / z.norm();
        for e in v.iter_mut() {
            *e *= rot;
        }
    }
}

/// Full Hermitian eigen-decomposition, eigenvalues ascending, eigenvectors
/// phase-fixed. Validates the Hermitian contract, then symmetrizes exactly
/// to kill rounding skew before factorizing.
pub fn hermitian_eigen(
    name: &str,
    a: &DMatrix<Complex64>,
) -> Result<(Vec<f64>, Vec<DVector<Complex64>>)> {
    ensure_finite_mat(name, a)?;
    if !a.is_square() {
        return Err(Error::dimension(
            "hermitian_eigen",
            format!("`{name}` is {}x{}, expected square", a.nrows(), a.ncols()),
        ));
    }
    if !is_hermitian(a) {
        return Err(Error::NotHermitian {
            matrix: name.to_string(),
        });
    }
    let sym = (a + a.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .expect("finite eigenvalues")
            .then(i.cmp(&j))
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors: Vec<DVector<Complex64>> = order
        .iter()
        .map(|&i| {
            let mut q = eig.eigenvectors.column(i).into_owned();
            let n = q.norm();
            if n > 0.0 {
                q /= Complex64::new(n, 0.0);
            }
            fix_phase(&mut q);
            q
        })
        .collect();
    Ok((values, vectors))
}

/// Largest eigenvalue and its unit eigenvector for a Hermitian matrix.
///
/// The eigenvector phase follows the first-nonzero-real-positive convention,
/// and `‖a·q − λq‖ ≤ EIG_RESIDUAL_REL_TOL · ‖a‖_F` holds on return.
pub fn hermitian_max_eigpair(a: &DMatrix<Complex64>) -> Result<(f64, DVector<Complex64>)> {
    let (values, mut vectors) = hermitian_eigen("hermitian_max_eigpair input", a)?;
    let last = values.len().checked_sub(1).ok_or_else(|| {
        Error::dimension("hermitian_max_eigpair", "matrix must be nonempty".to_string())
    })?;
    Ok((values[last], vectors.swap_remove(last)))
}

// ---------------------------------------------------------------------------
// HPD factorization
// ---------------------------------------------------------------------------

/// Cached Cholesky factor of a Hermitian positive-definite matrix.
///
/// All downstream applications of `A⁻¹` go through this type; no explicit
/// inverse is ever formed. The condition estimate is the squared ratio of
/// the extreme Cholesky diagonal entries.
#[derive(Clone, Debug)]
pub struct HpdFactor {
    l: DMatrix<Complex64>,
    cond_estimate: f64,
}

impl HpdFactor {
    /// Factorizes `a`, refusing non-Hermitian, indefinite, or numerically
    /// singular input. `name` labels the matrix in error messages.
    pub fn new(name: &str, a: &DMatrix<Complex64>) -> Result<Self> {
        ensure_finite_mat(name, a)?;
        if !a.is_square() || a.is_empty() {
            return Err(Error::dimension(
                "hpd factorization",
                format!("`{name}` is {}x{}", a.nrows(), a.ncols()),
            ));
        }
        if !is_hermitian(a) {
            return Err(Error::NotHermitian {
                matrix: name.to_string(),
            });
        }
        let sym = (a + a.adjoint()).scale(0.5);
        let chol = sym.cholesky().ok_or_else(|| Error::Singular {
            matrix: name.to_string(),
            estimate: f64::INFINITY,
        })?;
        let l = chol.unpack();
        let mut dmin = f64::INFINITY;
        let mut dmax = 0.0f64;
        for i in 0..l.nrows() {
            let d = l[(i, i)].re;
            dmin = dmin.min(d);
            dmax = dmax.max(d);
        }
        let cond_estimate = if dmin > 0.0 {
            (dmax / dmin).powi(2)
        } else {
            f64::INFINITY
        };
        if cond_estimate > CONDITION_LIMIT {
            return Err(Error::Singular {
                matrix: name.to_string(),
                estimate: cond_estimate,
            });
        }
        Ok(HpdFactor { l, cond_estimate })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn condition_estimate(&self) -> f64 {
        self.cond_estimate
    }

    /// Forward substitution `L y = x`, in place.
    fn forward(&self, x: &mut [Complex64]) {
        let n = self.l.nrows();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.l[(i, j)] * x[j];
            }
            x[i] = acc / self.l[(i, i)];
        }
    }

    /// Backward substitution `Lᴴ x = y`, in place.
    fn backward(&self, x: &mut [Complex64]) {
        let n = self.l.nrows();
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= self.l[(j, i)].conj() * x[j];
            }
            x[i] = acc / self.l[(i, i)];
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut DVector<Complex64>) {
        debug_assert_eq!(x.len(), self.dim());
        self.forward(x.as_mut_slice());
        self.backward(x.as_mut_slice());
    }

    /// Solves `A x = b`.
    pub fn solve_vec(&self, b: &DVector<Complex64>) -> DVector<Complex64> {
        let mut x = b.clone();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves `A X = B` column by column.
    pub fn solve_mat(&self, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut x = b.clone();
        for mut col in x.column_iter_mut() {
            let mut v: Vec<Complex64> = col.iter().copied().collect();
            self.forward(&mut v);
            self.backward(&mut v);
            for (dst, src) in col.iter_mut().zip(v.iter()) {
                *dst = *src;
            }
        }
        x
    }

    /// Quadratic form `gᴴ A⁻¹ g = ‖L⁻¹ g‖²`; one triangular solve, always
    /// real non-negative.
    pub fn quad_form_inv(&self, g: &DVector<Complex64>) -> f64 {
        let mut y = g.clone();
        self.quad_form_inv_in_place(&mut y)
    }

    /// As `quad_form_inv`, clobbering the scratch vector instead of cloning.
    pub(crate) fn quad_form_inv_in_place(&self, scratch: &mut DVector<Complex64>) -> f64 {
        self.forward(scratch.as_mut_slice());
        scratch.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Half solve `L y = x` in place, so that `A⁻¹`-weighted Gram matrices
    /// can be assembled as ordinary inner products of half-solved columns.
    pub(crate) fn half_solve_in_place(&self, x: &mut DVector<Complex64>) {
        self.forward(x.as_mut_slice());
    }
}

/// Solves the Hermitian positive-definite system `a·x = b`.
pub fn hpd_solve(
    name: &str,
    a: &DMatrix<Complex64>,
    b: &DVector<Complex64>,
) -> Result<DVector<Complex64>> {
    let f = HpdFactor::new(name, a)?;
    if b.len() != f.dim() {
        return Err(Error::dimension(
            "hpd_solve",
            format!("matrix is {}x{} but rhs has length {}", f.dim(), f.dim(), b.len()),
        ));
    }
    ensure_finite_vec("hpd_solve rhs", b)?;
    Ok(f.solve_vec(b))
}

/// Solves `a·X = B` for a matrix right-hand side.
pub fn hpd_solve_mat(
    name: &str,
    a: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>> {
    let f = HpdFactor::new(name, a)?;
    if b.nrows() != f.dim() {
        return Err(Error::dimension(
            "hpd_solve",
            format!("matrix is {}x{} but rhs has {} rows", f.dim(), f.dim(), b.nrows()),
        ));
    }
    ensure_finite_mat("hpd_solve rhs", b)?;
    Ok(f.solve_mat(b))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
