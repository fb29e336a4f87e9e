//! Bitmask Pauli strings, real-weighted Hermitian sums of them, and their
//! matrix-free action on state vectors.
//!
//! Bit convention: site `i` is bit `i` of a basis index (site 0 is the least
//! significant bit) and a bit value of 0 is the `Z = +1` eigenstate. A word
//! with masks `(x, z)` denotes `i^{|x & z|} X^x Z^z`, so every word is
//! Hermitian with unit-modulus coefficients.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;


use crate::error::{Error, Result};
use crate::scalar::{cplx, czero, lit, to_f64, Real, C};

/// Largest chain length representable by the 64-bit masks.
pub const MAX_SITES: usize = 63;

/// Largest chain whose state vector can be allocated.
pub const MAX_STATE_SITES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Letter {
    fn bits(self) -> (bool, bool) {
        match self {
            Letter::I => (false, false),
            Letter::X => (true, false),
            Letter::Y => (true, true),
            Letter::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Letter::I,
            (true, false) => Letter::X,
            (true, true) => Letter::Y,
            (false, true) => Letter::Z,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Letter::I => 'I',
            Letter::X => 'X',
            Letter::Y => 'Y',
            Letter::Z => 'Z',
        }
    }
}

/// Power of `i`, stored as an exponent modulo 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_exponent(k: i64) -> Self {
        Phase(k.rem_euclid(4) as u8)
    }

    pub fn exponent(self) -> u8 {
        self.0
    }

    pub fn is_real(self) -> bool {
        self.0 % 2 == 0
    }

    /// `+1` or `-1` for real phases.
    pub fn real_sign(self) -> Option<i8> {
        match self.0 {
            0 => Some(1),
            2 => Some(-1),
            _ => None,
        }
    }

    pub fn to_complex<T: Real>(self) -> C<T> {
        let (one, zero) = (T::one(), T::zero());
        match self.0 {
            0 => cplx(one, zero),
            1 => cplx(zero, one),
            2 => cplx(-one, zero),
            _ => cplx(zero, -one),
        }
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

/// A tensor product of single-site Pauli letters on `n_sites` sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n_sites: u8,
    x: u64,
    z: u64,
}

impl PauliString {
    pub fn identity(n_sites: usize) -> Self {
        assert!(n_sites <= MAX_SITES, "at most {MAX_SITES} sites");
        PauliString {
            n_sites: n_sites as u8,
            x: 0,
            z: 0,
        }
    }

    /// Builds a word from raw masks; bits above `n_sites` are rejected.
    pub fn from_masks(n_sites: usize, x: u64, z: u64) -> Result<Self> {
        if n_sites > MAX_SITES {
            return Err(Error::InvalidArgument(format!(
                "{n_sites} sites exceeds the {MAX_SITES}-site mask limit"
            )));
        }
        let valid = low_mask(n_sites);
        if (x | z) & !valid != 0 {
            return Err(Error::InvalidArgument(format!(
                "masks ({x:#x}, {z:#x}) use bits beyond {n_sites} sites"
            )));
        }
        Ok(PauliString {
            n_sites: n_sites as u8,
            x,
            z,
        })
    }

    /// Single letter at `site`, identity elsewhere.
    pub fn single(n_sites: usize, site: usize, letter: Letter) -> Self {
        Self::from_letters(n_sites, &[(site, letter)])
    }

    /// Word with the given letters placed at the given sites.
    ///
    /// Panics if a site is out of range.
    pub fn from_letters(n_sites: usize, letters: &[(usize, Letter)]) -> Self {
        let mut p = Self::identity(n_sites);
        for &(site, letter) in letters {
            assert!(site < n_sites, "site {site} out of range for {n_sites} sites");
            let (bx, bz) = letter.bits();
            let bit = 1u64 << site;
            p.x = (p.x & !bit) | if bx { bit } else { 0 };
            p.z = (p.z & !bit) | if bz { bit } else { 0 };
        }
        p
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites as usize
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    /// Mask of sites carrying a non-identity letter.
    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    pub fn weight(&self) -> u32 {
        self.support().count_ones()
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    pub fn letter(&self, site: usize) -> Letter {
        let bit = 1u64 << site;
        Letter::from_bits(self.x & bit != 0, self.z & bit != 0)
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// Compact label such as `X3Y4`, or `I` for the identity.
    pub fn label(&self) -> String {
        if self.is_identity() {
            return "I".to_string();
        }
        let mut s = String::new();
        for site in 0..self.n_sites() {
            let l = self.letter(site);
            if l != Letter::I {
                s.push(l.as_char());
                s.push_str(&site.to_string());
            }
        }
        s
    }
}

impl fmt::Display for PauliString {
    /// Full-length word, site 0 first.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for site in 0..self.n_sites() {
            write!(f, "{}", self.letter(site).as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Parses a full-length word such as `XIZ` (site 0 first).
    fn from_str(s: &str) -> Result<Self> {
        let n = s.chars().count();
        if n > MAX_SITES {
            return Err(Error::InvalidArgument(format!("word of length {n} too long")));
        }
        let mut letters = Vec::with_capacity(n);
        for (site, c) in s.chars().enumerate() {
            let l = match c.to_ascii_uppercase() {
                'I' => Letter::I,
                'X' => Letter::X,
                'Y' => Letter::Y,
                'Z' => Letter::Z,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "invalid Pauli letter {other:?}"
                    )))
                }
            };
            letters.push((site, l));
        }
        Ok(Self::from_letters(n, &letters))
    }
}

fn low_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Product `p · q = phase · word`.
pub fn pauli_mul(p: &PauliString, q: &PauliString) -> Result<(Phase, PauliString)> {
    if p.n_sites != q.n_sites {
        return Err(Error::Dimension(format!(
            "cannot multiply words on {} and {} sites",
            p.n_sites, q.n_sites
        )));
    }
    let x = p.x ^ q.x;
    let z = p.z ^ q.z;
    // i^{y_p} X^{x_p} Z^{z_p} i^{y_q} X^{x_q} Z^{z_q}; moving Z^{z_p} past
    // X^{x_q} costs (-1)^{|z_p & x_q|}, and the result is re-expressed as
    // i^{-y_r} times the canonical word.
    let exp = p.y_count() as i64 + q.y_count() as i64 + 2 * (p.z & q.x).count_ones() as i64
        - (x & z).count_ones() as i64;
    Ok((
        Phase::from_exponent(exp),
        PauliString {
            n_sites: p.n_sites,
            x,
            z,
        },
    ))
}

/// Semantic tag carried by dictionary entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Density,
    Current,
    Correlation,
    Kinetic,
    Composite,
    Energy,
    Generic,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Density => "density",
            Role::Current => "current",
            Role::Correlation => "correlation",
            Role::Kinetic => "kinetic",
            Role::Composite => "composite",
            Role::Energy => "energy",
            Role::Generic => "generic",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "density" => Role::Density,
            "current" => Role::Current,
            "correlation" => Role::Correlation,
            "kinetic" => Role::Kinetic,
            "composite" => Role::Composite,
            "energy" => Role::Energy,
            "generic" => Role::Generic,
            _ => return Err(Error::InvalidArgument(format!("unknown role {s:?}"))),
        })
    }
}

/// A Hermitian operator `Σ c_k P_k` with real coefficients on distinct words.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableExpr<T> {
    name: String,
    role: Role,
    n_sites: usize,
    terms: Vec<(T, PauliString)>,
}

impl<T: Real> ObservableExpr<T> {
    /// Merges duplicate words (first occurrence fixes the order) and drops
    /// zero coefficients.
    pub fn new(
        name: impl Into<String>,
        role: Role,
        n_sites: usize,
        terms: impl IntoIterator<Item = (T, PauliString)>,
    ) -> Result<Self> {
        let mut merged: Vec<(T, PauliString)> = Vec::new();
        let mut index: HashMap<PauliString, usize> = HashMap::new();
        for (c, w) in terms {
            if w.n_sites() != n_sites {
                return Err(Error::Dimension(format!(
                    "word {w} has {} sites, expression has {n_sites}",
                    w.n_sites()
                )));
            }
            match index.get(&w) {
                Some(&k) => merged[k].0 += c,
                None => {
                    index.insert(w, merged.len());
                    merged.push((c, w));
                }
            }
        }
        merged.retain(|(c, _)| *c != T::zero());
        Ok(ObservableExpr {
            name: name.into(),
            role,
            n_sites,
            terms: merged,
        })
    }

    pub fn single(name: impl Into<String>, role: Role, word: PauliString) -> Self {
        let n = word.n_sites();
        Self::new(name, role, n, [(T::one(), word)]).expect("single word is consistent")
    }

    pub fn zero(name: impl Into<String>, role: Role, n_sites: usize) -> Self {
        ObservableExpr {
            name: name.into(),
            role,
            n_sites,
            terms: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn terms(&self) -> &[(T, PauliString)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn with_name(mut self, name: impl Into<String>, role: Role) -> Self {
        self.name = name.into();
        self.role = role;
        self
    }

    pub fn coefficient(&self, word: &PauliString) -> T {
        self.terms
            .iter()
            .find(|(_, w)| w == word)
            .map(|(c, _)| *c)
            .unwrap_or_else(T::zero)
    }

    /// Union of the supports of all words.
    pub fn support(&self) -> u64 {
        self.terms.iter().fold(0, |m, (_, w)| m | w.support())
    }

    /// Sum of `|c_k|`, an upper bound on the operator 2-norm.
    pub fn norm_bound(&self) -> T {
        self.terms
            .iter()
            .fold(T::zero(), |acc, (c, _)| acc + c.abs())
    }

    pub fn contains_identity(&self) -> bool {
        self.terms.iter().any(|(_, w)| w.is_identity())
    }

    pub fn scaled(&self, s: T) -> Self {
        Self::new(
            self.name.clone(),
            self.role,
            self.n_sites,
            self.terms.iter().map(|&(c, w)| (c * s, w)),
        )
        .expect("consistent terms")
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Self::new(
            self.name.clone(),
            self.role,
            self.n_sites,
            self.terms.iter().chain(other.terms.iter()).copied(),
        )
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Self::new(
            self.name.clone(),
            self.role,
            self.n_sites,
            self.terms
                .iter()
                .copied()
                .chain(other.terms.iter().map(|&(c, w)| (-c, w))),
        )
    }

    /// Keeps the terms whose word satisfies `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&PauliString) -> bool) -> Self {
        ObservableExpr {
            name: self.name.clone(),
            role: self.role,
            n_sites: self.n_sites,
            terms: self.terms.iter().filter(|(_, w)| keep(w)).copied().collect(),
        }
    }

    /// Operator product `self · other`; fails unless the product is Hermitian
    /// term by term (true when every pair of words commutes).
    pub fn product(&self, other: &Self) -> Result<Self> {
        let mut terms = Vec::with_capacity(self.len() * other.len());
        for &(a, p) in &self.terms {
            for &(b, q) in &other.terms {
                let (phase, w) = pauli_mul(&p, &q)?;
                let sign = phase.real_sign().ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "product {p}·{q} is not Hermitian (anticommuting words)"
                    ))
                })?;
                terms.push((a * b * lit::<T>(f64::from(sign)), w));
            }
        }
        Self::new(
            format!("{}*{}", self.name, other.name),
            Role::Composite,
            self.n_sites,
            terms,
        )
    }

    /// The Hermitian operator `i[self, other]`.
    pub fn commutator_i(&self, other: &Self) -> Result<Self> {
        let mut terms = Vec::new();
        for &(a, p) in &self.terms {
            for &(b, q) in &other.terms {
                if p.commutes_with(&q) {
                    continue;
                }
                // pq = -qp, so i[p, q] = 2 i pq with pq = ±i w.
                let (phase, w) = pauli_mul(&p, &q)?;
                let sign = match phase {
                    Phase::I => -2.0,
                    Phase::MINUS_I => 2.0,
                    _ => unreachable!("anticommuting Hermitian words multiply to ±i"),
                };
                terms.push((a * b * lit::<T>(sign), w));
            }
        }
        Self::new(
            format!("i[{},{}]", self.name, other.name),
            Role::Generic,
            self.n_sites,
            terms,
        )
    }

    /// Groups the terms by X mask into a gather-form kernel.
    pub fn compile(&self) -> CompiledOperator<T> {
        CompiledOperator::new(self)
    }
}

/// Normalised pure state on `n_sites` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T> {
    n_sites: usize,
    amplitudes: Vec<C<T>>,
}

impl<T: Real> StateVector<T> {
    /// Computational basis state `|index⟩`.
    pub fn basis(n_sites: usize, index: usize) -> Self {
        let dim = 1usize << n_sites;
        assert!(index < dim, "basis index out of range");
        let mut amplitudes = vec![czero(); dim];
        amplitudes[index] = cplx(T::one(), T::zero());
        StateVector {
            n_sites,
            amplitudes,
        }
    }

    /// Wraps amplitudes that must already be normalised.
    pub fn from_amplitudes(n_sites: usize, amplitudes: Vec<C<T>>) -> Result<Self> {
        check_dim(n_sites, amplitudes.len())?;
        let norm = to_f64(l2_norm(&amplitudes));
        if (norm - 1.0).abs() > T::INTEGRITY_TOL {
            return Err(Error::Integrity(format!(
                "state norm {norm} deviates from 1 by more than {}",
                T::INTEGRITY_TOL
            )));
        }
        Ok(StateVector {
            n_sites,
            amplitudes,
        })
    }

    /// Rescales arbitrary non-zero amplitudes to unit norm.
    pub fn normalized(n_sites: usize, mut amplitudes: Vec<C<T>>) -> Result<Self> {
        check_dim(n_sites, amplitudes.len())?;
        let norm = l2_norm(&amplitudes);
        if norm == T::zero() {
            return Err(Error::InvalidArgument("cannot normalise the zero vector".into()));
        }
        let inv = T::one() / norm;
        for a in amplitudes.iter_mut() {
            *a = a.scale(inv);
        }
        Ok(StateVector {
            n_sites,
            amplitudes,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C<T>] {
        &self.amplitudes
    }

    pub fn norm(&self) -> T {
        l2_norm(&self.amplitudes)
    }

    /// Multiplies by a global phase `e^{iθ}`.
    pub fn with_global_phase(&self, theta: T) -> Self {
        let ph = crate::scalar::polar(T::one(), theta);
        StateVector {
            n_sites: self.n_sites,
            amplitudes: self.amplitudes.iter().map(|a| a * ph).collect(),
        }
    }

    pub(crate) fn from_raw(n_sites: usize, amplitudes: Vec<C<T>>) -> Self {
        StateVector {
            n_sites,
            amplitudes,
        }
    }
}

fn check_dim(n_sites: usize, len: usize) -> Result<()> {
    if n_sites > MAX_STATE_SITES || len != 1usize << n_sites {
        return Err(Error::Dimension(format!(
            "{len} amplitudes do not describe {n_sites} sites"
        )));
    }
    Ok(())
}

pub(crate) fn l2_norm<T: Real>(v: &[C<T>]) -> T {
    v.iter().fold(T::zero(), |acc, a| acc + a.norm_sqr()).sqrt()
}

/// `⟨a|b⟩`.
pub(crate) fn inner<T: Real>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    a.iter()
        .zip(b)
        .fold(czero(), |acc, (x, y)| acc + x.conj() * y)
}

#[inline]
fn parity_sign<T: Real>(v: C<T>, bits: u64) -> C<T> {
    if bits.count_ones() & 1 == 1 {
        -v
    } else {
        v
    }
}

/// `out += coeff · P ψ` for a single word.
fn accumulate_word<T: Real>(word: &PauliString, coeff: C<T>, psi: &[C<T>], out: &mut [C<T>]) {
    let (x, z) = (word.x_mask() as usize, word.z_mask());
    let c = coeff * Phase::from_exponent(word.y_count() as i64).to_complex::<T>();
    for (b, &amp) in psi.iter().enumerate() {
        out[b ^ x] += parity_sign(c * amp, b as u64 & z);
    }
}

/// `⟨φ|P|ψ⟩` for a single word.
pub fn word_matrix_element<T: Real>(phi: &[C<T>], word: &PauliString, psi: &[C<T>]) -> C<T> {
    let (x, z) = (word.x_mask() as usize, word.z_mask());
    let mut acc = czero::<T>();
    for (b, &amp) in psi.iter().enumerate() {
        acc += parity_sign(phi[b ^ x].conj() * amp, b as u64 & z);
    }
    acc * Phase::from_exponent(word.y_count() as i64).to_complex::<T>()
}

/// `⟨φ|O|ψ⟩` for a whole expression.
pub fn expr_matrix_element<T: Real>(phi: &[C<T>], o: &ObservableExpr<T>, psi: &[C<T>]) -> C<T> {
    o.terms()
        .iter()
        .fold(czero(), |acc, (c, w)| acc + word_matrix_element(phi, w, psi).scale(*c))
}

fn check_expr_state<T: Real>(o: &ObservableExpr<T>, psi: &StateVector<T>) -> Result<()> {
    if o.n_sites() != psi.n_sites() {
        return Err(Error::Dimension(format!(
            "operator '{}' acts on {} sites, state has {}",
            o.name(),
            o.n_sites(),
            psi.n_sites()
        )));
    }
    Ok(())
}

/// `O|ψ⟩`, unnormalised.
pub fn apply_expr<T: Real>(o: &ObservableExpr<T>, psi: &StateVector<T>) -> Result<Vec<C<T>>> {
    check_expr_state(o, psi)?;
    let mut out = vec![czero(); psi.dim()];
    for &(c, ref w) in o.terms() {
        accumulate_word(w, cplx(c, T::zero()), psi.amplitudes(), &mut out);
    }
    Ok(out)
}

fn real_part_checked<T: Real>(v: C<T>, what: &str) -> Result<T> {
    let scale = T::one().max(v.re.abs());
    if v.im.abs() > lit::<T>(T::INTEGRITY_TOL) * scale {
        return Err(Error::Integrity(format!(
            "{what} has imaginary residue {:e}",
            v.im
        )));
    }
    Ok(v.re)
}

/// `⟨ψ|O|ψ⟩`, guarded against a non-negligible imaginary residue.
pub fn expectation<T: Real>(psi: &StateVector<T>, o: &ObservableExpr<T>) -> Result<T> {
    check_expr_state(o, psi)?;
    let amps = psi.amplitudes();
    real_part_checked(expr_matrix_element(amps, o, amps), o.name())
}

/// `i⟨ψ|[H, O]|ψ⟩`, the exact time derivative of `⟨O⟩` under `H`.
pub fn commutator_expectation<T: Real>(
    psi: &StateVector<T>,
    h: &ObservableExpr<T>,
    o: &ObservableExpr<T>,
) -> Result<T> {
    check_expr_state(h, psi)?;
    check_expr_state(o, psi)?;
    let h_psi = apply_expr(h, psi)?;
    let o_psi = apply_expr(o, psi)?;
    let ho = inner(&h_psi, &o_psi);
    let oh = inner(&o_psi, &h_psi);
    let v = (ho - oh) * cplx(T::zero(), T::one());
    real_part_checked(v, "commutator expectation")
}

/// An expression regrouped by X mask: `(Oψ)[c] = Σ_g d_g[c] ψ[c ⊕ x_g]`.
///
/// Each output amplitude accumulates its groups in a fixed order.
#[derive(Debug, Clone)]
pub struct CompiledOperator<T> {
    n_sites: usize,
    groups: Vec<(usize, Vec<C<T>>)>,
    norm_bound: T,
}

impl<T: Real> CompiledOperator<T> {
    pub fn new(o: &ObservableExpr<T>) -> Self {
        let n = o.n_sites();
        let dim = 1usize << n;
        let mut order: Vec<u64> = Vec::new();
        let mut by_x: HashMap<u64, Vec<C<T>>> = HashMap::new();
        for &(c, ref w) in o.terms() {
            let x = w.x_mask();
            let diag = by_x.entry(x).or_insert_with(|| {
                order.push(x);
                vec![czero(); dim]
            });
            let base = Phase::from_exponent(w.y_count() as i64).to_complex::<T>().scale(c);
            for (cidx, d) in diag.iter_mut().enumerate() {
                // source index b = c ⊕ x carries the Z parity
                let b = (cidx as u64) ^ x;
                *d += parity_sign(base, b & w.z_mask());
            }
        }
        let groups = order
            .into_iter()
            .map(|x| (x as usize, by_x.remove(&x).unwrap()))
            .collect();
        CompiledOperator {
            n_sites: n,
            groups,
            norm_bound: o.norm_bound(),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn norm_bound(&self) -> T {
        self.norm_bound
    }

    /// `out = O ψ`.
    pub fn apply_into(&self, psi: &[C<T>], out: &mut [C<T>]) {
        debug_assert_eq!(psi.len(), out.len());
        out.fill(czero());
        for (x, d) in &self.groups {
            let x = *x;
            for (c, (o, dc)) in out.iter_mut().zip(d).enumerate() {
                *o += dc * psi[c ^ x];
            }
        }
    }

    pub fn apply(&self, psi: &[C<T>]) -> Vec<C<T>> {
        let mut out = vec![czero(); psi.len()];
        self.apply_into(psi, &mut out);
        out
    }
}

/// In-place unnormalised Walsh–Hadamard transform.
pub(crate) fn walsh_hadamard<T: Real>(v: &mut [C<T>]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for block in (0..n).step_by(2 * h) {
            for k in block..block + h {
                let (a, b) = (v[k], v[k + h]);
                v[k] = a + b;
                v[k + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// `⟨φ|P|ψ⟩` for every word on `n_sites` sites, written to
/// `out[(z << n) | x]`; the identity lands at index 0.
///
/// Costs `O(n · 4^n)` instead of `O(8^n)` for word-by-word evaluation.
pub fn all_word_matrix_elements<T: Real>(
    n_sites: usize,
    phi: &[C<T>],
    psi: &[C<T>],
    out: &mut [C<T>],
) {
    let dim = 1usize << n_sites;
    assert_eq!(phi.len(), dim);
    assert_eq!(psi.len(), dim);
    assert_eq!(out.len(), dim * dim);
    let mut w = vec![czero::<T>(); dim];
    for x in 0..dim {
        for c in 0..dim {
            w[c] = phi[c ^ x].conj() * psi[c];
        }
        walsh_hadamard(&mut w);
        for (z, &s) in w.iter().enumerate() {
            let y = (x & z).count_ones() as i64;
            out[(z << n_sites) | x] = s * Phase::from_exponent(y).to_complex::<T>();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    #[test]
    fn multiplication_table() {
        assert_eq!(pauli_mul(&w("X"), &w("X")).unwrap(), (Phase::ONE, w("I")));
        assert_eq!(pauli_mul(&w("X"), &w("Z")).unwrap(), (Phase::MINUS_I, w("Y")));
        assert_eq!(pauli_mul(&w("Z"), &w("X")).unwrap(), (Phase::I, w("Y")));
        assert_eq!(pauli_mul(&w("X"), &w("Y")).unwrap(), (Phase::I, w("Z")));
        assert_eq!(pauli_mul(&w("Y"), &w("Y")).unwrap(), (Phase::ONE, w("I")));
        // (X⊗I)(Z⊗Z), written site 0 first
        assert_eq!(pauli_mul(&w("XI"), &w("ZZ")).unwrap(), (Phase::MINUS_I, w("YZ")));
    }

    #[test]
    fn mul_length_mismatch() {
        assert!(matches!(pauli_mul(&w("X"), &w("XZ")), Err(Error::Dimension(_))));
    }

    #[test]
    fn masks_reject_high_bits() {
        assert!(PauliString::from_masks(2, 0b100, 0).is_err());
        assert!(PauliString::from_masks(3, 0b100, 0b011).is_ok());
    }

    #[test]
    fn expr_merges_and_drops() {
        let e = ObservableExpr::<f64>::new(
            "e",
            Role::Generic,
            2,
            [(1.0, w("XX")), (2.0, w("ZI")), (-1.0, w("XX")), (0.5, w("ZI"))],
        )
        .unwrap();
        assert_eq!(e.terms(), &[(2.5, w("ZI"))]);
    }

    #[test]
    fn bit_flip_and_eigenstate() {
        let psi = StateVector::<f64>::basis(3, 0);
        let z0 = ObservableExpr::single("Z0", Role::Density, PauliString::single(3, 0, Letter::Z));
        let x0 = ObservableExpr::single("X0", Role::Generic, PauliString::single(3, 0, Letter::X));
        let out = apply_expr(&z0, &psi).unwrap();
        assert_eq!(out[0], cplx(1.0, 0.0));
        let out = apply_expr(&x0, &psi).unwrap();
        assert_eq!(out[1], cplx(1.0, 0.0));
        assert_eq!(out[0], cplx(0.0, 0.0));
        for i in 0..3 {
            let zi =
                ObservableExpr::single("Z", Role::Density, PauliString::single(3, i, Letter::Z));
            assert_eq!(expectation(&psi, &zi).unwrap(), 1.0);
        }
    }

    #[test]
    fn plus_state_x_expectation() {
        let s = 0.5f64.sqrt();
        let plus = StateVector::from_amplitudes(1, vec![cplx(s, 0.0), cplx(s, 0.0)]).unwrap();
        let x = ObservableExpr::single("X", Role::Generic, w("X"));
        assert!((expectation(&plus, &x).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn commutator_examples() {
        let x = ObservableExpr::<f64>::single("X", Role::Generic, w("X"));
        let z = ObservableExpr::single("Z", Role::Density, w("Z"));
        let zero = StateVector::basis(1, 0);
        assert!(commutator_expectation(&zero, &x, &z).unwrap().abs() < 1e-15);
        let s = 0.5f64.sqrt();
        let y_plus = StateVector::from_amplitudes(1, vec![cplx(s, 0.0), cplx(0.0, s)]).unwrap();
        assert!((commutator_expectation(&y_plus, &x, &z).unwrap() - 2.0).abs() < 1e-14);

        let zz = ObservableExpr::single("ZZ", Role::Correlation, w("ZZ"));
        let z0 = ObservableExpr::single("Z0", Role::Density, w("ZI"));
        let psi = StateVector::normalized(
            2,
            vec![cplx(0.3, 0.1), cplx(-0.2, 0.4), cplx(0.5, -0.3), cplx(0.1, 0.2)],
        )
        .unwrap();
        assert!(commutator_expectation::<f64>(&psi, &zz, &z0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn symbolic_commutator() {
        // i[X, Z] = 2Y
        let x = ObservableExpr::<f64>::single("X", Role::Generic, w("X"));
        let z = ObservableExpr::single("Z", Role::Density, w("Z"));
        let c = x.commutator_i(&z).unwrap();
        assert_eq!(c.terms(), &[(2.0, w("Y"))]);
    }

    #[test]
    fn product_rejects_anticommuting() {
        let x = ObservableExpr::<f64>::single("X", Role::Generic, w("X"));
        let z = ObservableExpr::single("Z", Role::Density, w("Z"));
        assert!(x.product(&z).is_err());
        let zi = ObservableExpr::single("Z0", Role::Density, w("ZI"));
        let iz = ObservableExpr::single("Z1", Role::Density, w("IZ"));
        assert_eq!(zi.product(&iz).unwrap().terms(), &[(1.0, w("ZZ"))]);
    }

    #[test]
    fn compiled_matches_direct() {
        let e = ObservableExpr::<f64>::new(
            "e",
            Role::Generic,
            3,
            [(0.7, w("XYZ")), (-1.3, w("ZZI")), (0.4, w("YIY")), (2.0, w("XYI"))],
        )
        .unwrap();
        let psi = StateVector::normalized(
            3,
            (0..8).map(|k| cplx((k as f64).sin(), (k as f64 * 0.7).cos())).collect(),
        )
        .unwrap();
        let direct = apply_expr(&e, &psi).unwrap();
        let compiled = e.compile().apply(psi.amplitudes());
        for (a, b) in direct.iter().zip(&compiled) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn walsh_path_matches_wordwise() {
        let n = 3;
        let psi: Vec<C<f64>> = (0..8)
            .map(|k| cplx((k as f64 * 1.3).sin(), (k as f64 * 0.4).cos()))
            .collect();
        let phi: Vec<C<f64>> = (0..8)
            .map(|k| cplx((k as f64 * 0.2).cos(), (k as f64 * 2.1).sin()))
            .collect();
        let mut out = vec![czero(); 64];
        all_word_matrix_elements(n, &phi, &psi, &mut out);
        for z in 0..8u64 {
            for x in 0..8u64 {
                let word = PauliString::from_masks(n, x, z).unwrap();
                let direct = word_matrix_element(&phi, &word, &psi);
                let fast = out[((z as usize) << n) | x as usize];
                assert!((direct - fast).norm() < 1e-13, "{word}");
            }
        }
    }

    #[test]
    fn label_and_display() {
        let p = w("XIYZ");
        assert_eq!(p.to_string(), "XIYZ");
        assert_eq!(p.label(), "X0Y2Z3");
        assert_eq!(PauliString::identity(2).label(), "I");
    }
}
