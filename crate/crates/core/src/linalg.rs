//! Small dense helpers on top of nalgebra: real matrix exponential,
//! eigendecomposition of real non-symmetric matrices (with eigenvectors),
//! and `e^{At}v` over a time grid.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{cabs, cexp, cplx, czero, lit, to_f64, Real, C};

/// Eigenvector matrices with a larger 2-norm condition number are not
/// trusted for `e^{At}` and the Taylor route is used instead.
pub const EIGVEC_COND_LIMIT: f64 = 1e12;

fn max_iter(n: usize) -> usize {
    200 * n.max(10)
}

/// Eigenvalues of a real square matrix.
pub fn eigenvalues<T: Real>(a: &DMatrix<T>) -> Result<Vec<C<T>>> {
    if !a.is_square() {
        return Err(Error::Dimension("eigenvalues of a non-square matrix".into()));
    }
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = nalgebra::Schur::try_new(a.clone(), T::default_epsilon(), max_iter(a.nrows()))
        .ok_or_else(|| Error::Eigen(format!("real Schur of {}×{} did not converge", a.nrows(), a.ncols())))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// `A = S Λ S⁻¹` over the complex numbers.
#[derive(Debug, Clone)]
pub struct Eigendecomposition<T: Real> {
    pub values: Vec<C<T>>,
    pub vectors: DMatrix<C<T>>,
    /// 2-norm condition number of `vectors`.
    pub condition: f64,
}

/// Eigenvalues and unit eigenvectors from the complex Schur form
/// `A = Q T Q*`, with eigenvectors of `T` by back substitution.
pub fn eigendecomposition<T: Real>(a: &DMatrix<T>) -> Result<Eigendecomposition<T>> {
    if !a.is_square() {
        return Err(Error::Dimension("eigendecomposition of a non-square matrix".into()));
    }
    let n = a.nrows();
    let ac: DMatrix<C<T>> = a.map(|x| cplx(x, T::zero()));
    let schur = nalgebra::Schur::try_new(ac, T::default_epsilon(), max_iter(n))
        .ok_or_else(|| Error::Eigen(format!("complex Schur of {n}×{n} did not converge")))?;
    let (q, t) = schur.unpack();
    let scale = t.iter().fold(T::zero(), |m, z| m.max(cabs(*z))).max(T::min_value().unwrap());
    let tiny = scale * T::default_epsilon();
    let mut vt = DMatrix::from_element(n, n, czero::<T>());
    for k in 0..n {
        let lambda = t[(k, k)];
        vt[(k, k)] = cplx(T::one(), T::zero());
        for j in (0..k).rev() {
            let mut s = czero::<T>();
            for l in j + 1..=k {
                s += t[(j, l)] * vt[(l, k)];
            }
            let mut denom = t[(j, j)] - lambda;
            if cabs(denom) < tiny {
                denom = cplx(tiny, T::zero());
            }
            vt[(j, k)] = -s / denom;
        }
    }
    let mut vectors = q * vt;
    for mut col in vectors.column_iter_mut() {
        let nrm = col.norm();
        if nrm > T::zero() {
            col.unscale_mut(nrm);
        }
    }
    let sv = vectors.clone().singular_values();
    let (smax, smin) = sv
        .iter()
        .fold((T::zero(), T::max_value().unwrap()), |(hi, lo), &s| (hi.max(s), lo.min(s)));
    let condition = if smin > T::zero() { to_f64(smax / smin) } else { f64::INFINITY };
    Ok(Eigendecomposition {
        values: (0..n).map(|k| t[(k, k)]).collect(),
        vectors,
        condition,
    })
}

fn one_norm<T: Real>(a: &DMatrix<T>) -> T {
    a.column_iter()
        .map(|c| c.iter().fold(T::zero(), |s, x| s + x.abs()))
        .fold(T::zero(), |m, s| m.max(s))
}

/// `e^A` by scaling and squaring with a truncated Taylor series.
pub fn expm<T: Real>(a: &DMatrix<T>) -> Result<DMatrix<T>> {
    if !a.is_square() {
        return Err(Error::Dimension("expm of a non-square matrix".into()));
    }
    let n = a.nrows();
    let norm = to_f64(one_norm(a));
    if !norm.is_finite() {
        return Err(Error::Integrity("expm argument is not finite".into()));
    }
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a * lit::<T>(0.5f64.powi(squarings));
    let mut result = DMatrix::<T>::identity(n, n);
    let mut term = DMatrix::<T>::identity(n, n);
    let eps = T::default_epsilon();
    let mut converged = false;
    for k in 1..=40 {
        term = &term * &scaled / lit::<T>(k as f64);
        result += &term;
        if one_norm(&term) <= eps * one_norm(&result) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Propagation("dense Taylor series did not converge".into()));
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}

fn check_times<T: Real>(times: &[T]) -> Result<()> {
    if times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::InvalidArgument("reconstruction times must be sorted".into()));
    }
    Ok(())
}

/// `e^{A t} v` for each `t` via the eigendecomposition; the caller is
/// responsible for checking the conditioning.
pub fn expm_action_eigen<T: Real>(
    eig: &Eigendecomposition<T>,
    v: &DVector<T>,
    times: &[T],
) -> Result<DMatrix<T>> {
    check_times(times)?;
    let n = v.len();
    let vc: DVector<C<T>> = v.map(|x| cplx(x, T::zero()));
    let coeff = eig
        .vectors
        .clone()
        .lu()
        .solve(&vc)
        .ok_or_else(|| Error::Eigen("eigenvector matrix is singular".into()))?;
    let mut out = DMatrix::<T>::zeros(n, times.len());
    let mut scaled = DVector::from_element(n, czero::<T>());
    for (col, &t) in times.iter().enumerate() {
        if t == T::zero() {
            out.set_column(col, v);
            continue;
        }
        for k in 0..n {
            scaled[k] = coeff[k] * cexp(eig.values[k] * cplx(t, T::zero()));
        }
        let y = &eig.vectors * &scaled;
        for k in 0..n {
            out[(k, col)] = y[k].re;
        }
    }
    Ok(out)
}

/// `e^{A t} v` by stepping with dense exponentials of the time increments.
pub fn expm_action_taylor<T: Real>(a: &DMatrix<T>, v: &DVector<T>, times: &[T]) -> Result<DMatrix<T>> {
    check_times(times)?;
    let n = v.len();
    let mut out = DMatrix::<T>::zeros(n, times.len());
    let mut cache: HashMap<u64, DMatrix<T>> = HashMap::new();
    let mut current = v.clone();
    let mut t_prev = T::zero();
    for (col, &t) in times.iter().enumerate() {
        let step = t - t_prev;
        if step != T::zero() {
            let key = to_f64(step).to_bits();
            if !cache.contains_key(&key) {
                cache.insert(key, expm(&(a * step))?);
            }
            current = &cache[&key] * &current;
            t_prev = t;
        }
        out.set_column(col, &current);
    }
    Ok(out)
}

/// Which route produced an [`expm_action`] result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpmRoute {
    Eigen,
    Taylor,
}

/// `e^{A t} v`, by eigendecomposition when the eigenvectors are well
/// conditioned and by dense Taylor stepping otherwise.
pub fn expm_action<T: Real>(a: &DMatrix<T>, v: &DVector<T>, times: &[T]) -> Result<(DMatrix<T>, ExpmRoute)> {
    check_times(times)?;
    if a.nrows() != v.len() || !a.is_square() {
        return Err(Error::Dimension(format!(
            "cannot apply a {}×{} exponential to a length-{} vector",
            a.nrows(),
            a.ncols(),
            v.len()
        )));
    }
    if let Ok(eig) = eigendecomposition(a) {
        if eig.condition < EIGVEC_COND_LIMIT {
            if let Ok(out) = expm_action_eigen(&eig, v, times) {
                return Ok((out, ExpmRoute::Eigen));
            }
        }
    }
    Ok((expm_action_taylor(a, v, times)?, ExpmRoute::Taylor))
}
