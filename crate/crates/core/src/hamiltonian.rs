//! The open-boundary XXZ chain with next-nearest-neighbour `ZZ` coupling,
//! and the system/environment quench split.

use crate::error::{Error, Result};
use crate::pauli::{Letter, ObservableExpr, PauliString, Role};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSpec<T> {
    pub n_sites: usize,
    /// Exchange coupling `J` on `XX + YY`.
    pub j: T,
    /// Anisotropy `Δ` on nearest-neighbour `ZZ`.
    pub delta: T,
    /// Integrability-breaking `ZZ` coupling between sites `i` and `i + 2`.
    pub j2: T,
}

impl<T: Real> ChainSpec<T> {
    /// `J = Δ = 1`, `J₂ = 0.5`.
    pub fn new(n_sites: usize) -> Self {
        ChainSpec {
            n_sites,
            j: T::one(),
            delta: T::one(),
            j2: lit(0.5),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::InvalidArgument(format!(
                "chain needs at least 2 sites, got {}",
                self.n_sites
            )));
        }
        if self.n_sites > crate::pauli::MAX_SITES {
            return Err(Error::InvalidArgument(format!("{} sites is too many", self.n_sites)));
        }
        Ok(())
    }
}

/// Where the chain is cut and when the cut is bridged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuenchSpec<T> {
    /// Last site of the target region `S = [0, cut_after_site]`.
    pub cut_after_site: usize,
    pub t_q: T,
}

impl<T: Real> QuenchSpec<T> {
    pub fn validate(&self, chain: &ChainSpec<T>) -> Result<()> {
        if self.cut_after_site + 1 >= chain.n_sites {
            return Err(Error::InvalidArgument(format!(
                "cut after site {} leaves no environment in a {}-site chain",
                self.cut_after_site, chain.n_sites
            )));
        }
        if self.t_q < T::zero() {
            return Err(Error::InvalidArgument("quench time must be non-negative".into()));
        }
        Ok(())
    }

    /// Mask of the target sites `0..=cut_after_site`.
    pub fn target_mask(&self) -> u64 {
        (1u64 << (self.cut_after_site + 1)) - 1
    }

    /// True when the word touches both sides of the cut.
    pub fn straddles(&self, word: &PauliString) -> bool {
        let s = self.target_mask();
        word.support() & s != 0 && word.support() & !s != 0
    }
}

fn two_site(n: usize, a: (usize, Letter), b: (usize, Letter)) -> PauliString {
    PauliString::from_letters(n, &[a, b])
}

/// `Σ_i [J(X_i X_{i+1} + Y_i Y_{i+1}) + Δ Z_i Z_{i+1}] + Σ_i J₂ Z_i Z_{i+2}`.
pub fn build_hamiltonian<T: Real>(spec: &ChainSpec<T>) -> Result<ObservableExpr<T>> {
    spec.validate()?;
    let n = spec.n_sites;
    let mut terms = Vec::with_capacity(4 * n);
    for i in 0..n - 1 {
        terms.push((spec.j, two_site(n, (i, Letter::X), (i + 1, Letter::X))));
        terms.push((spec.j, two_site(n, (i, Letter::Y), (i + 1, Letter::Y))));
        terms.push((spec.delta, two_site(n, (i, Letter::Z), (i + 1, Letter::Z))));
    }
    for i in 0..n.saturating_sub(2) {
        terms.push((spec.j2, two_site(n, (i, Letter::Z), (i + 2, Letter::Z))));
    }
    ObservableExpr::new("H", Role::Energy, n, terms)
}

/// `(H_iso, H_coupled)`: `H_coupled` is the full chain and `H_iso` drops every
/// word that straddles the cut, so `H_coupled - H_iso = V_int`.
pub fn build_quench_pair<T: Real>(
    spec: &ChainSpec<T>,
    q: &QuenchSpec<T>,
) -> Result<(ObservableExpr<T>, ObservableExpr<T>)> {
    spec.validate()?;
    q.validate(spec)?;
    let coupled = build_hamiltonian(spec)?;
    let iso = coupled
        .filter(|w| !q.straddles(w))
        .with_name("H_iso", Role::Energy);
    Ok((iso, coupled.with_name("H_coupled", Role::Energy)))
}

/// `V_int = H_coupled - H_iso`.
pub fn interaction<T: Real>(spec: &ChainSpec<T>, q: &QuenchSpec<T>) -> Result<ObservableExpr<T>> {
    let (iso, coupled) = build_quench_pair(spec, q)?;
    Ok(coupled.sub(&iso)?.with_name("V_int", Role::Energy))
}

/// Sum of `Z_i` over the whole chain.
pub fn total_magnetization<T: Real>(n_sites: usize) -> ObservableExpr<T> {
    ObservableExpr::new(
        "Mz",
        Role::Generic,
        n_sites,
        (0..n_sites).map(|i| (T::one(), PauliString::single(n_sites, i, Letter::Z))),
    )
    .expect("consistent terms")
}
