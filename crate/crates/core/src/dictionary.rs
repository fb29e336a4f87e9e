//! Observable dictionaries and their `(role, slot) → row` layouts.
//!
//! Slots are absolute site indices for per-site families (densities, bond
//! operators keyed by their left site). Composite entries use
//! `family · (n - 2) + i`, and `Generic` entries use their own row index.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::hamiltonian::{build_hamiltonian, ChainSpec};
use crate::pauli::{
    all_word_matrix_elements, walsh_hadamard, Letter, ObservableExpr, PauliString, Phase, Role, StateVector,
};
use crate::scalar::{czero, lit, to_f64, Real, C};

/// Default ceiling on the chain length accepted by [`dict_full_pauli`].
pub const FULL_PAULI_CAP: usize = 8;

/// Inclusive interval of site indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SiteRange {
    pub first: usize,
    pub last: usize,
}

impl SiteRange {
    pub fn new(first: usize, last: usize) -> Result<Self> {
        if first > last {
            return Err(Error::InvalidArgument(format!("empty site range [{first}, {last}]")));
        }
        Ok(SiteRange { first, last })
    }

    pub fn len(&self) -> usize {
        self.last - self.first + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sites(&self) -> RangeInclusive<usize> {
        self.first..=self.last
    }

    pub fn mask(&self) -> u64 {
        ((1u64 << self.len()) - 1) << self.first
    }

    fn check(&self, n_sites: usize) -> Result<()> {
        if self.last >= n_sites {
            return Err(Error::InvalidArgument(format!(
                "site range [{}, {}] exceeds a {n_sites}-site chain",
                self.first, self.last
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Dictionary<T> {
    name: String,
    n_sites: usize,
    entries: Vec<ObservableExpr<T>>,
    layout: BTreeMap<(Role, usize), usize>,
    full_basis: bool,
    plan: EvalPlan<T>,
}

/// Words regrouped by X mask, each as `(row, coefficient · i^y, z mask)`,
/// plus `(-1)^{popcount(b)}` for every basis index `b`.
#[derive(Debug, Clone)]
struct EvalPlan<T> {
    groups: Vec<(usize, Vec<(usize, C<T>, usize)>)>,
    sign: Vec<T>,
}

impl<T: Real> EvalPlan<T> {
    fn new(n_sites: usize, entries: &[ObservableExpr<T>]) -> Self {
        let mut groups: BTreeMap<usize, Vec<(usize, C<T>, usize)>> = BTreeMap::new();
        for (row, e) in entries.iter().enumerate() {
            for &(c, ref w) in e.terms() {
                let coef = Phase::from_exponent(w.y_count() as i64).to_complex::<T>().scale(c);
                groups
                    .entry(w.x_mask() as usize)
                    .or_default()
                    .push((row, coef, w.z_mask() as usize));
            }
        }
        let dim = 1usize << n_sites;
        let mut sign = vec![T::one(); dim];
        for b in 1..dim {
            sign[b] = if b & 1 == 1 { -sign[b >> 1] } else { sign[b >> 1] };
        }
        EvalPlan {
            groups: groups.into_iter().collect(),
            sign,
        }
    }
}

impl<T: Real> Dictionary<T> {
    /// Validates the entries and the layout; rejects identity or duplicate
    /// entries and non-injective layouts.
    pub fn new(
        name: impl Into<String>,
        n_sites: usize,
        entries: Vec<ObservableExpr<T>>,
        layout: BTreeMap<(Role, usize), usize>,
    ) -> Result<Self> {
        let name = name.into();
        let mut seen = std::collections::HashSet::new();
        for (row, e) in entries.iter().enumerate() {
            if e.n_sites() != n_sites {
                return Err(Error::Dimension(format!(
                    "entry {row} ('{}') is on {} sites, dictionary on {n_sites}",
                    e.name(),
                    e.n_sites()
                )));
            }
            if e.is_empty() || e.terms().iter().all(|(_, w)| w.is_identity()) {
                return Err(Error::InvalidArgument(format!(
                    "entry {row} ('{}') is zero or the identity",
                    e.name()
                )));
            }
            let mut key: Vec<(PauliString, u64)> = e
                .terms()
                .iter()
                .map(|(c, w)| (*w, to_f64(*c).to_bits()))
                .collect();
            key.sort();
            if !seen.insert(key) {
                return Err(Error::InvalidArgument(format!(
                    "entry {row} ('{}') duplicates an earlier entry",
                    e.name()
                )));
            }
        }
        let mut rows: Vec<usize> = layout.values().copied().collect();
        rows.sort_unstable();
        rows.dedup();
        if rows.len() != layout.len() || rows.iter().any(|&r| r >= entries.len()) {
            return Err(Error::InvalidArgument(format!(
                "layout of '{name}' is not injective into its {} rows",
                entries.len()
            )));
        }
        let plan = if n_sites <= crate::pauli::MAX_STATE_SITES {
            EvalPlan::new(n_sites, &entries)
        } else {
            EvalPlan {
                groups: Vec::new(),
                sign: Vec::new(),
            }
        };
        Ok(Dictionary {
            name,
            n_sites,
            entries,
            layout,
            full_basis: false,
            plan,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ObservableExpr<T>] {
        &self.entries
    }

    pub fn layout(&self) -> &BTreeMap<(Role, usize), usize> {
        &self.layout
    }

    pub fn row(&self, role: Role, slot: usize) -> Option<usize> {
        self.layout.get(&(role, slot)).copied()
    }

    /// Slots declared for `role`, ascending.
    pub fn slots(&self, role: Role) -> Vec<usize> {
        self.layout
            .keys()
            .filter(|(r, _)| *r == role)
            .map(|(_, s)| *s)
            .collect()
    }

    /// True for the complete non-identity Pauli basis in canonical order.
    pub fn is_full_basis(&self) -> bool {
        self.full_basis
    }

    /// Writes `⟨O_k⟩` into `values` and, when `h_psi = H|ψ⟩` is given,
    /// `i⟨[H, O_k]⟩ = -2 Im⟨Hψ|O_k|ψ⟩` into `derivs`.
    pub fn evaluate(
        &self,
        psi: &StateVector<T>,
        h_psi: Option<&[C<T>]>,
        values: &mut [T],
        derivs: Option<&mut [T]>,
    ) -> Result<()> {
        if psi.n_sites() != self.n_sites {
            return Err(Error::Dimension(format!(
                "dictionary '{}' is on {} sites, state on {}",
                self.name,
                self.n_sites,
                psi.n_sites()
            )));
        }
        assert_eq!(values.len(), self.len());
        let amps = psi.amplitudes();
        let tol = lit::<T>(T::INTEGRITY_TOL);
        let two = lit::<T>(2.0);
        if self.full_basis {
            let dim = amps.len();
            let mut buf = vec![czero::<T>(); dim * dim];
            all_word_matrix_elements(self.n_sites, amps, amps, &mut buf);
            for (v, e) in values.iter_mut().zip(&buf[1..]) {
                if e.im.abs() > tol {
                    return Err(Error::Integrity(format!(
                        "Pauli expectation has imaginary residue {:e}",
                        e.im
                    )));
                }
                *v = e.re;
            }
            if let (Some(hp), Some(d)) = (h_psi, derivs) {
                all_word_matrix_elements(self.n_sites, hp, amps, &mut buf);
                for (dv, e) in d.iter_mut().zip(&buf[1..]) {
                    *dv = -two * e.im;
                }
            }
            return Ok(());
        }
        let dim = amps.len();
        let mut vals = vec![czero::<T>(); self.len()];
        let mut ders = vec![czero::<T>(); if h_psi.is_some() { self.len() } else { 0 }];
        let mut pv = vec![czero::<T>(); dim];
        let mut pd = vec![czero::<T>(); if h_psi.is_some() { dim } else { 0 }];
        let sign = &self.plan.sign;
        for (x, words) in &self.plan.groups {
            let x = *x;
            for (b, p) in pv.iter_mut().enumerate() {
                *p = amps[b ^ x].conj() * amps[b];
            }
            if let Some(hp) = h_psi {
                for (b, p) in pd.iter_mut().enumerate() {
                    *p = hp[b ^ x].conj() * amps[b];
                }
            }
            if words.len() > self.n_sites {
                walsh_hadamard(&mut pv);
                if !pd.is_empty() {
                    walsh_hadamard(&mut pd);
                }
                for &(row, coef, z) in words {
                    vals[row] += coef * pv[z];
                    if !pd.is_empty() {
                        ders[row] += coef * pd[z];
                    }
                }
                continue;
            }
            for &(row, coef, z) in words {
                let mut acc = czero::<T>();
                for (b, p) in pv.iter().enumerate() {
                    acc += p.scale(sign[b & z]);
                }
                vals[row] += coef * acc;
                if !pd.is_empty() {
                    let mut acc = czero::<T>();
                    for (b, p) in pd.iter().enumerate() {
                        acc += p.scale(sign[b & z]);
                    }
                    ders[row] += coef * acc;
                }
            }
        }
        for ((v, e), o) in values.iter_mut().zip(&vals).zip(&self.entries) {
            if e.im.abs() > tol * T::one().max(e.re.abs()) {
                return Err(Error::Integrity(format!(
                    "expectation of '{}' has imaginary residue {:e}",
                    o.name(),
                    e.im
                )));
            }
            *v = e.re;
        }
        if let Some(d) = derivs {
            if h_psi.is_some() {
                for (dv, e) in d.iter_mut().zip(&ders) {
                    *dv = -two * e.im;
                }
            }
        }
        Ok(())
    }
}

fn word(n: usize, letters: &[(usize, Letter)]) -> PauliString {
    PauliString::from_letters(n, letters)
}

fn entry<T: Real>(name: String, role: Role, n: usize, terms: Vec<(f64, PauliString)>) -> ObservableExpr<T> {
    ObservableExpr::new(name, role, n, terms.into_iter().map(|(c, w)| (lit::<T>(c), w)))
        .expect("builder terms are consistent")
}

/// Accumulates entries and layout keys in order.
struct Builder<T> {
    n: usize,
    entries: Vec<ObservableExpr<T>>,
    layout: BTreeMap<(Role, usize), usize>,
}

impl<T: Real> Builder<T> {
    fn new(n: usize) -> Self {
        Builder {
            n,
            entries: Vec::new(),
            layout: BTreeMap::new(),
        }
    }

    fn push(&mut self, role: Role, slot: Option<usize>, e: ObservableExpr<T>) {
        let row = self.entries.len();
        self.layout.insert((role, slot.unwrap_or(row)), row);
        self.entries.push(e);
    }

    fn single(&mut self, role: Role, slot: Option<usize>, w: PauliString) {
        self.push(role, slot, ObservableExpr::single(w.label(), role, w));
    }

    fn finish(self, name: &str) -> Result<Dictionary<T>> {
        Dictionary::new(name, self.n, self.entries, self.layout)
    }
}

/// Every non-identity word whose support lies in `mask`, ordered by
/// `(z, x)` lexicographically.
fn words_in(n: usize, range: SiteRange) -> impl Iterator<Item = PauliString> {
    let k = range.len();
    let shift = range.first;
    (0u64..1 << k)
        .flat_map(move |z| (0u64..1 << k).map(move |x| (x, z)))
        .filter(|&(x, z)| x != 0 || z != 0)
        .map(move |(x, z)| {
            PauliString::from_masks(n, x << shift, z << shift).expect("range checked")
        })
}

/// All `4^n - 1` non-identity Pauli words; row `(z << n | x) - 1`.
pub fn dict_full_pauli<T: Real>(n_sites: usize) -> Result<Dictionary<T>> {
    dict_full_pauli_capped(n_sites, FULL_PAULI_CAP)
}

pub fn dict_full_pauli_capped<T: Real>(n_sites: usize, cap: usize) -> Result<Dictionary<T>> {
    if n_sites == 0 || n_sites > cap {
        return Err(Error::InvalidArgument(format!(
            "full Pauli dictionary limited to 1..={cap} sites, got {n_sites}"
        )));
    }
    let mut b = Builder::new(n_sites);
    for w in words_in(n_sites, SiteRange::new(0, n_sites - 1)?) {
        b.single(Role::Generic, None, w);
    }
    let mut d = b.finish("full")?;
    d.full_basis = true;
    Ok(d)
}

/// `{Z_i} ∪ {Z_i Z_{i+1}}`.
pub fn dict_macro_a<T: Real>(n_sites: usize) -> Result<Dictionary<T>> {
    if n_sites < 2 {
        return Err(Error::InvalidArgument("macroscopic dictionary needs 2 sites".into()));
    }
    let n = n_sites;
    let mut b = Builder::new(n);
    for i in 0..n {
        b.single(Role::Density, Some(i), word(n, &[(i, Letter::Z)]));
    }
    for i in 0..n - 1 {
        b.single(Role::Correlation, Some(i), word(n, &[(i, Letter::Z), (i + 1, Letter::Z)]));
    }
    b.finish("A")
}

/// Complete non-identity Pauli basis on the target sites.
pub fn dict_target_s<T: Real>(n_sites: usize, range: SiteRange) -> Result<Dictionary<T>> {
    range.check(n_sites)?;
    let mut b = Builder::new(n_sites);
    for w in words_in(n_sites, range) {
        b.single(Role::Generic, None, w);
    }
    b.finish("S")
}

/// Densities, `ZZ` bonds and both halves of the spin current inside `range`.
pub fn dict_pointer_l<T: Real>(n_sites: usize, range: SiteRange) -> Result<Dictionary<T>> {
    range.check(n_sites)?;
    let n = n_sites;
    let mut b = Builder::new(n);
    for i in range.sites() {
        b.single(Role::Density, Some(i), word(n, &[(i, Letter::Z)]));
    }
    let bonds = range.first..range.last;
    for i in bonds.clone() {
        b.single(Role::Correlation, Some(i), word(n, &[(i, Letter::Z), (i + 1, Letter::Z)]));
    }
    for i in bonds.clone() {
        b.single(Role::Generic, None, word(n, &[(i, Letter::X), (i + 1, Letter::Y)]));
    }
    for i in bonds {
        b.single(Role::Generic, None, word(n, &[(i, Letter::Y), (i + 1, Letter::X)]));
    }
    b.finish("L")
}

/// One entry: the chain Hamiltonian restricted to words inside `range`.
pub fn dict_env_energy<T: Real>(spec: &ChainSpec<T>, range: SiteRange) -> Result<Dictionary<T>> {
    range.check(spec.n_sites)?;
    let mask = range.mask();
    let h_env = build_hamiltonian(spec)?
        .filter(|w| w.support() & !mask == 0)
        .with_name("H_env", Role::Energy);
    let mut b = Builder::new(spec.n_sites);
    b.push(Role::Energy, Some(0), h_env);
    b.finish("E")
}

/// `J_i = X_i Y_{i+1} - Y_i X_{i+1}`.
pub fn spin_current<T: Real>(n: usize, i: usize) -> ObservableExpr<T> {
    entry(
        format!("J{i}"),
        Role::Current,
        n,
        vec![
            (1.0, word(n, &[(i, Letter::X), (i + 1, Letter::Y)])),
            (-1.0, word(n, &[(i, Letter::Y), (i + 1, Letter::X)])),
        ],
    )
}

/// `K_i = X_i Y_{i+1} + Y_i X_{i+1}`.
pub fn kinetic<T: Real>(n: usize, i: usize) -> ObservableExpr<T> {
    entry(
        format!("K{i}"),
        Role::Kinetic,
        n,
        vec![
            (1.0, word(n, &[(i, Letter::X), (i + 1, Letter::Y)])),
            (1.0, word(n, &[(i, Letter::Y), (i + 1, Letter::X)])),
        ],
    )
}

fn z_at<T: Real>(n: usize, i: usize) -> ObservableExpr<T> {
    ObservableExpr::single(format!("Z{i}"), Role::Density, word(n, &[(i, Letter::Z)]))
}

/// Number of entries produced by [`dict_hydro`].
pub fn hydro_len(n_sites: usize) -> usize {
    8 * n_sites - 11
}

/// Densities, currents, `ZZ` bonds, kinetic terms and four length-3
/// families (`ZZZ`, `J·Z`, `Z·J`, `K·Z`), in that block order.
pub fn dict_hydro<T: Real>(n_sites: usize) -> Result<Dictionary<T>> {
    if n_sites < 3 {
        return Err(Error::InvalidArgument("hydrodynamic dictionary needs 3 sites".into()));
    }
    let n = n_sites;
    let mut b = Builder::new(n);
    for i in 0..n {
        b.push(Role::Density, Some(i), z_at(n, i));
    }
    for i in 0..n - 1 {
        b.push(Role::Current, Some(i), spin_current(n, i));
    }
    for i in 0..n - 1 {
        b.single(Role::Correlation, Some(i), word(n, &[(i, Letter::Z), (i + 1, Letter::Z)]));
    }
    for i in 0..n - 1 {
        b.push(Role::Kinetic, Some(i), kinetic(n, i));
    }
    let m = n - 2;
    for i in 0..m {
        let w = word(n, &[(i, Letter::Z), (i + 1, Letter::Z), (i + 2, Letter::Z)]);
        b.push(Role::Composite, Some(i), ObservableExpr::single(format!("ZZZ{i}"), Role::Composite, w));
    }
    for i in 0..m {
        let e = spin_current::<T>(n, i).product(&z_at(n, i + 2))?;
        b.push(Role::Composite, Some(m + i), e.with_name(format!("J{i}Z{}", i + 2), Role::Composite));
    }
    for i in 0..m {
        let e = z_at::<T>(n, i).product(&spin_current(n, i + 1))?;
        b.push(Role::Composite, Some(2 * m + i), e.with_name(format!("Z{i}J{}", i + 1), Role::Composite));
    }
    for i in 0..m {
        let e = kinetic::<T>(n, i).product(&z_at(n, i + 2))?;
        b.push(Role::Composite, Some(3 * m + i), e.with_name(format!("K{i}Z{}", i + 2), Role::Composite));
    }
    b.finish("hydro")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{expr_matrix, is_hermitian};

    #[test]
    fn counts() {
        assert_eq!(dict_full_pauli::<f64>(2).unwrap().len(), 15);
        assert_eq!(dict_macro_a::<f64>(8).unwrap().len(), 15);
        assert_eq!(dict_macro_a::<f64>(2).unwrap().len(), 3);
        assert_eq!(dict_target_s::<f64>(8, SiteRange::new(0, 1).unwrap()).unwrap().len(), 15);
        assert_eq!(dict_target_s::<f64>(20, SiteRange::new(0, 3).unwrap()).unwrap().len(), 255);
        assert_eq!(dict_target_s::<f64>(5, SiteRange::new(2, 2).unwrap()).unwrap().len(), 3);
        assert_eq!(dict_pointer_l::<f64>(20, SiteRange::new(4, 19).unwrap()).unwrap().len(), 61);
        assert_eq!(dict_pointer_l::<f64>(6, SiteRange::new(1, 2).unwrap()).unwrap().len(), 5);
        assert_eq!(dict_hydro::<f64>(20).unwrap().len(), 149);
        assert_eq!(dict_hydro::<f64>(3).unwrap().len(), 13);
    }

    #[test]
    fn full_basis_at_eight_sites() {
        let d = dict_full_pauli::<f64>(8).unwrap();
        assert_eq!(d.len(), 65_535);
        assert!(d.is_full_basis());
        // row (z << n | x) - 1
        let w = d.entries()[(3 << 8 | 5) - 1].terms()[0].1;
        assert_eq!((w.x_mask(), w.z_mask()), (5, 3));
    }

    #[test]
    fn full_basis_cap() {
        assert!(dict_full_pauli::<f64>(9).is_err());
        assert!(dict_full_pauli_capped::<f64>(3, 2).is_err());
    }

    #[test]
    fn macro_layout() {
        let d = dict_macro_a::<f64>(8).unwrap();
        let row = d.row(Role::Density, 3).unwrap();
        assert_eq!(d.entries()[row].terms(), &[(1.0, word(8, &[(3, Letter::Z)]))]);
    }

    #[test]
    fn target_s_two_sites_lists_local_letters() {
        let d = dict_target_s::<f64>(8, SiteRange::new(0, 1).unwrap()).unwrap();
        let names: Vec<_> = d.entries().iter().map(|e| e.name().to_string()).collect();
        for expected in ["X0", "Y0", "Z0", "X1", "Y1", "Z1", "X0X1", "X0Y1", "Z0Z1"] {
            assert!(names.contains(&expected.to_string()), "{expected}");
        }
    }

    #[test]
    fn pointer_entries_stay_inside() {
        let r = SiteRange::new(4, 19).unwrap();
        let d = dict_pointer_l::<f64>(20, r).unwrap();
        assert!(d.entries().iter().all(|e| e.support() & !r.mask() == 0));
    }

    #[test]
    fn env_energy_whole_chain_is_h() {
        let spec = ChainSpec::<f64>::new(5);
        let d = dict_env_energy(&spec, SiteRange::new(0, 4).unwrap()).unwrap();
        assert_eq!(d.entries()[0].terms(), build_hamiltonian(&spec).unwrap().terms());
        let spec = ChainSpec::<f64>::new(20);
        let d = dict_env_energy(&spec, SiteRange::new(4, 19).unwrap()).unwrap();
        assert!(d.entries()[0].support() & 0b1111 == 0);
    }

    #[test]
    fn hydro_layout_current() {
        let d = dict_hydro::<f64>(6).unwrap();
        let j = &d.entries()[d.row(Role::Current, 2).unwrap()];
        assert_eq!(j.len(), 2);
        assert_eq!(j.coefficient(&word(6, &[(2, Letter::X), (3, Letter::Y)])), 1.0);
        assert_eq!(j.coefficient(&word(6, &[(2, Letter::Y), (3, Letter::X)])), -1.0);
        let z = &d.entries()[d.row(Role::Density, 4).unwrap()];
        assert_eq!(z.terms(), &[(1.0, word(6, &[(4, Letter::Z)]))]);
    }

    #[test]
    fn closed_form_counts_and_dense_layouts() {
        for n in 3..=20 {
            let h = dict_hydro::<f64>(n).unwrap();
            assert_eq!(h.len(), hydro_len(n));
            assert_eq!(dict_macro_a::<f64>(n).unwrap().len(), 2 * n - 1);
            for d in [h, dict_macro_a(n).unwrap()] {
                let mut rows: Vec<_> = d.layout().values().copied().collect();
                rows.sort_unstable();
                assert_eq!(rows, (0..d.len()).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn entries_hermitian_small() {
        let spec = ChainSpec::<f64>::new(4);
        let r = SiteRange::new(1, 3).unwrap();
        let dicts = [
            dict_full_pauli::<f64>(2).unwrap(),
            dict_hydro(4).unwrap(),
            dict_pointer_l(4, r).unwrap(),
            dict_env_energy(&spec, r).unwrap(),
            dict_target_s(4, SiteRange::new(0, 1).unwrap()).unwrap(),
        ];
        for d in &dicts {
            for e in d.entries() {
                assert!(is_hermitian(&expr_matrix(e), 1e-14), "{}", e.name());
            }
        }
    }

    #[test]
    fn rejects_duplicates() {
        let n = 2;
        let z = ObservableExpr::<f64>::single("Z0", Role::Density, word(n, &[(0, Letter::Z)]));
        let mut layout = BTreeMap::new();
        layout.insert((Role::Density, 0), 0);
        layout.insert((Role::Density, 1), 1);
        assert!(Dictionary::new("dup", n, vec![z.clone(), z], layout).is_err());
    }
}
