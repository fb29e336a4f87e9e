//! Dense-matrix reference implementations used as brute-force oracles.
//!
//! Matrices are assembled from explicit 2×2 Kronecker factors and never
//! touch the bitmask kernels, so they are an independent check on them.
//! Only practical for a handful of sites.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::pauli::{Letter, ObservableExpr, PauliString, StateVector};
use crate::scalar::{cabs, cplx, czero, lit, polar, Real, C};

fn letter_matrix<T: Real>(l: Letter) -> DMatrix<C<T>> {
    let (o, z) = (T::one(), T::zero());
    let e = |re: T, im: T| cplx(re, im);
    match l {
        Letter::I => DMatrix::from_row_slice(2, 2, &[e(o, z), e(z, z), e(z, z), e(o, z)]),
        Letter::X => DMatrix::from_row_slice(2, 2, &[e(z, z), e(o, z), e(o, z), e(z, z)]),
        Letter::Y => DMatrix::from_row_slice(2, 2, &[e(z, z), e(z, -o), e(z, o), e(z, z)]),
        Letter::Z => DMatrix::from_row_slice(2, 2, &[e(o, z), e(z, z), e(z, z), e(-o, z)]),
    }
}

/// `P_{n-1} ⊗ … ⊗ P_0`, matching site 0 = least significant bit.
pub fn word_matrix<T: Real>(word: &PauliString) -> DMatrix<C<T>> {
    let mut m = DMatrix::from_element(1, 1, cplx(T::one(), T::zero()));
    for site in (0..word.n_sites()).rev() {
        m = m.kronecker(&letter_matrix::<T>(word.letter(site)));
    }
    m
}

pub fn expr_matrix<T: Real>(o: &ObservableExpr<T>) -> DMatrix<C<T>> {
    let dim = 1usize << o.n_sites();
    let mut m = DMatrix::from_element(dim, dim, czero::<T>());
    for (c, w) in o.terms() {
        m += word_matrix::<T>(w) * cplx(*c, T::zero());
    }
    m
}

pub fn state_column<T: Real>(psi: &StateVector<T>) -> DVector<C<T>> {
    DVector::from_column_slice(psi.amplitudes())
}

pub fn is_hermitian<T: Real>(m: &DMatrix<C<T>>, tol: T) -> bool {
    (m - m.adjoint()).iter().all(|d| cabs(*d) <= tol)
}

pub fn expectation_dense<T: Real>(psi: &StateVector<T>, m: &DMatrix<C<T>>) -> C<T> {
    let v = state_column(psi);
    (v.adjoint() * m * &v)[(0, 0)]
}

/// `e^{-iHt} ψ` through a full Hermitian eigendecomposition of `H`.
pub struct SpectralPropagator<T: Real> {
    energies: Vec<T>,
    vectors: DMatrix<C<T>>,
}

impl<T: Real> SpectralPropagator<T> {
    pub fn new(h: &DMatrix<C<T>>) -> Result<Self> {
        if !h.is_square() {
            return Err(Error::Dimension("Hamiltonian matrix must be square".into()));
        }
        let eig = nalgebra::SymmetricEigen::try_new(h.clone(), T::default_epsilon(), 0)
            .ok_or_else(|| Error::Eigen("Hermitian eigendecomposition did not converge".into()))?;
        Ok(SpectralPropagator {
            energies: eig.eigenvalues.iter().copied().collect(),
            vectors: eig.eigenvectors,
        })
    }

    pub fn energies(&self) -> &[T] {
        &self.energies
    }

    pub fn evolve(&self, psi: &DVector<C<T>>, t: T) -> DVector<C<T>> {
        let mut coeffs = self.vectors.adjoint() * psi;
        for (c, &e) in coeffs.iter_mut().zip(&self.energies) {
            *c *= polar(T::one(), -e * t);
        }
        &self.vectors * coeffs
    }
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff<T: Real>(a: &[C<T>], b: &[C<T>]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |m, (x, y)| m.max(cabs(x - y)))
}

/// `i(HO - OH)` as a dense matrix.
pub fn commutator_i_dense<T: Real>(h: &DMatrix<C<T>>, o: &DMatrix<C<T>>) -> DMatrix<C<T>> {
    (h * o - o * h) * cplx(T::zero(), T::one())
}

/// Frobenius distance scaled to a per-entry bound.
pub fn max_entry_diff<T: Real>(a: &DMatrix<C<T>>, b: &DMatrix<C<T>>) -> T {
    (a - b).iter().fold(T::zero(), |m, d| m.max(cabs(*d)))
}

/// Deterministic pseudo-random complex vector for oracle tests (no RNG crate).
pub fn hashed_vector<T: Real>(len: usize, salt: u64) -> Vec<C<T>> {
    let mut s = salt.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let mut next = || {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        lit::<T>((s >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
    };
    (0..len).map(|_| cplx(next(), next())).collect()
}
