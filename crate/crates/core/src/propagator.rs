//! Exact state-vector propagation and trajectory recording.
//!
//! `e^{-iHt}ψ` is applied with a scaled, truncated Taylor series in the
//! spirit of Al-Mohy and Higham: the step is split into `s` substeps with
//! `‖H‖·|t|/s ≤ θ`, and each substep's series stops once a rigorous tail
//! bound drops below the tolerance. The state is never renormalised.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::pauli::{l2_norm, CompiledOperator, ObservableExpr, StateVector};
use crate::scalar::{cplx, czero, lit, to_f64, Real, C};

/// Hard cap on series terms per substep.
pub const MAX_SERIES_TERMS: usize = 40;
/// Per-substep bound on `‖H‖·|dt|`.
const THETA: f64 = 2.0;

/// Haar-like random state: iid standard normal real and imaginary parts,
/// then normalised. Bitwise reproducible for a given seed.
pub fn random_state<T: Real>(n_sites: usize, seed: u64) -> StateVector<T> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let dim = 1usize << n_sites;
    let amps: Vec<C<T>> = (0..dim)
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            cplx(lit(re), lit(im))
        })
        .collect();
    StateVector::normalized(n_sites, amps).expect("gaussian vector is non-zero")
}

/// Precompiled `e^{-iH dt}` action for a fixed Hamiltonian.
#[derive(Debug, Clone)]
pub struct Propagator<T> {
    op: CompiledOperator<T>,
}

impl<T: Real> Propagator<T> {
    pub fn new(h: &ObservableExpr<T>) -> Self {
        Propagator { op: h.compile() }
    }

    pub fn operator(&self) -> &CompiledOperator<T> {
        &self.op
    }

    /// `e^{-iH dt} ψ`; fails if the series does not converge within
    /// [`MAX_SERIES_TERMS`] or the norm drifts beyond the integrity tolerance.
    pub fn evolve(&self, psi: &StateVector<T>, dt: T) -> Result<StateVector<T>> {
        if psi.n_sites() != self.op.n_sites() {
            return Err(Error::Dimension(format!(
                "state has {} sites, Hamiltonian {}",
                psi.n_sites(),
                self.op.n_sites()
            )));
        }
        let norm_h = to_f64(self.op.norm_bound());
        let reach = norm_h * to_f64(dt).abs();
        let substeps = ((reach / THETA).ceil() as usize).max(1);
        let h = dt / lit::<T>(substeps as f64);
        let theta = reach / substeps as f64;
        let tol = lit::<T>(T::SERIES_TOL);
        let minus_i_h = cplx(T::zero(), -h);

        let dim = psi.dim();
        let mut v = psi.amplitudes().to_vec();
        let mut term = vec![czero::<T>(); dim];
        let mut scratch = vec![czero::<T>(); dim];
        for sub in 0..substeps {
            term.copy_from_slice(&v);
            let mut converged = false;
            for k in 1..=MAX_SERIES_TERMS {
                self.op.apply_into(&term, &mut scratch);
                let f = minus_i_h.unscale(lit(k as f64));
                for (t, s) in term.iter_mut().zip(&scratch) {
                    *t = s * f;
                }
                for (a, t) in v.iter_mut().zip(&term) {
                    *a += t;
                }
                // ‖b_{j+1}‖ ≤ ‖b_j‖·θ/(j+1), so the tail after term k is a
                // geometric series once k + 1 > θ.
                let kp1 = (k + 1) as f64;
                if kp1 > theta {
                    let tail = lit::<T>(1.0 + theta / (kp1 - theta));
                    if l2_norm(&term) * tail <= tol * l2_norm(&v) {
                        converged = true;
                        break;
                    }
                }
            }
            if !converged {
                return Err(Error::Propagation(format!(
                    "Taylor series did not converge in {MAX_SERIES_TERMS} terms \
                     (substep {sub}/{substeps}, ‖H dt‖ ≤ {theta:.3e})"
                )));
            }
        }
        let norm = to_f64(l2_norm(&v));
        if (norm - 1.0).abs() > T::INTEGRITY_TOL {
            return Err(Error::Integrity(format!(
                "norm drifted to {norm:.15} after propagation"
            )));
        }
        Ok(StateVector::from_raw(psi.n_sites(), v))
    }
}

/// `e^{-iH dt} ψ` for a one-off step.
pub fn evolve<T: Real>(psi: &StateVector<T>, h: &ObservableExpr<T>, dt: T) -> Result<StateVector<T>> {
    Propagator::new(h).evolve(psi, dt)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionSchedule<T> {
    pub dt: T,
    pub n_steps: usize,
    pub record_every: usize,
    /// First step that is recorded.
    pub record_start: usize,
}

impl<T: Real> EvolutionSchedule<T> {
    pub fn new(dt: T, n_steps: usize) -> Self {
        EvolutionSchedule {
            dt,
            n_steps,
            record_every: 1,
            record_start: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) {
            return Err(Error::InvalidArgument("dt must be positive".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be at least 1".into()));
        }
        if self.record_start > self.n_steps {
            return Err(Error::InvalidArgument("record_start beyond the last step".into()));
        }
        Ok(())
    }

    pub fn is_recorded(&self, step: usize) -> bool {
        step >= self.record_start && (step - self.record_start) % self.record_every == 0
    }
}

/// Whether commutator derivatives are recorded alongside expectations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordMode {
    /// Expectations and exact derivatives `i⟨[H, O]⟩`.
    Exact,
    /// Expectations only; differences are formed downstream.
    ValuesOnly,
}

/// Dictionary expectations (columns) at the recorded instants.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord<T: Real> {
    /// Step index of each column.
    pub steps: Vec<usize>,
    pub times: Vec<T>,
    pub values: DMatrix<T>,
    pub derivs: Option<DMatrix<T>>,
    pub dt: T,
    pub record_every: usize,
}

impl<T: Real> TrajectoryRecord<T> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Time between consecutive columns.
    pub fn spacing(&self) -> T {
        self.dt * lit(self.record_every as f64)
    }
}

/// Piecewise-constant Hamiltonian: segment `k` is active from its start step
/// until the next segment begins.
#[derive(Debug, Clone)]
pub struct HamiltonianPath<T> {
    segments: Vec<(usize, ObservableExpr<T>, Propagator<T>)>,
}

impl<T: Real> HamiltonianPath<T> {
    pub fn constant(h: &ObservableExpr<T>) -> Self {
        HamiltonianPath {
            segments: vec![(0, h.clone(), Propagator::new(h))],
        }
    }

    /// `h_before` for steps `< switch_step`, `h_after` from `switch_step` on.
    pub fn quench(h_before: &ObservableExpr<T>, h_after: &ObservableExpr<T>, switch_step: usize) -> Self {
        let mut segments = vec![(0, h_before.clone(), Propagator::new(h_before))];
        if switch_step == 0 {
            segments.clear();
        }
        segments.push((switch_step, h_after.clone(), Propagator::new(h_after)));
        HamiltonianPath { segments }
    }

    /// Propagator and Hamiltonian in force at `step`.
    pub fn at(&self, step: usize) -> (&ObservableExpr<T>, &Propagator<T>) {
        let seg = self
            .segments
            .iter()
            .rev()
            .find(|(start, _, _)| *start <= step)
            .expect("first segment starts at step 0");
        (&seg.1, &seg.2)
    }

    pub fn n_sites(&self) -> usize {
        self.segments[0].1.n_sites()
    }
}

/// Evolves `psi0` under `h` and records dictionary expectations (and exact
/// derivatives in [`RecordMode::Exact`]).
pub fn run_trajectory<T: Real>(
    psi0: &StateVector<T>,
    h: &ObservableExpr<T>,
    sched: &EvolutionSchedule<T>,
    dict: &Dictionary<T>,
    mode: RecordMode,
) -> Result<TrajectoryRecord<T>> {
    run_trajectory_path(psi0, &HamiltonianPath::constant(h), sched, dict, mode)
}

/// [`run_trajectory`] for a piecewise-constant Hamiltonian. The derivative
/// recorded at step `k` uses the Hamiltonian in force at step `k`.
pub fn run_trajectory_path<T: Real>(
    psi0: &StateVector<T>,
    path: &HamiltonianPath<T>,
    sched: &EvolutionSchedule<T>,
    dict: &Dictionary<T>,
    mode: RecordMode,
) -> Result<TrajectoryRecord<T>> {
    let mut out = run_trajectory_multi(psi0, path, sched, &[dict], mode)?;
    Ok(out.pop().expect("one record per dictionary"))
}

/// One trajectory recorded against several dictionaries, one record each.
pub fn run_trajectory_multi<T: Real>(
    psi0: &StateVector<T>,
    path: &HamiltonianPath<T>,
    sched: &EvolutionSchedule<T>,
    dicts: &[&Dictionary<T>],
    mode: RecordMode,
) -> Result<Vec<TrajectoryRecord<T>>> {
    sched.validate()?;
    if psi0.n_sites() != path.n_sites() {
        return Err(Error::Dimension(format!(
            "state on {} sites, Hamiltonian on {}",
            psi0.n_sites(),
            path.n_sites()
        )));
    }
    if let Some(d) = dicts.iter().find(|d| d.n_sites() != psi0.n_sites()) {
        return Err(Error::Dimension(format!(
            "state on {} sites, dictionary '{}' on {}",
            psi0.n_sites(),
            d.name(),
            d.n_sites()
        )));
    }
    let recorded: Vec<usize> = (0..=sched.n_steps).filter(|&k| sched.is_recorded(k)).collect();
    let mut values: Vec<DMatrix<T>> = dicts.iter().map(|d| DMatrix::zeros(d.len(), recorded.len())).collect();
    let mut derivs: Vec<Option<DMatrix<T>>> = dicts
        .iter()
        .map(|d| match mode {
            RecordMode::Exact => Some(DMatrix::zeros(d.len(), recorded.len())),
            RecordMode::ValuesOnly => None,
        })
        .collect();
    let mut psi = psi0.clone();
    let mut col = 0;
    let mut h_psi = vec![czero::<T>(); psi.dim()];
    for step in 0..=sched.n_steps {
        let (_, prop) = path.at(step);
        if sched.is_recorded(step) {
            if mode == RecordMode::Exact {
                prop.operator().apply_into(psi.amplitudes(), &mut h_psi);
            }
            for (k, dict) in dicts.iter().enumerate() {
                let vcol = values[k].column_mut(col);
                let vslice = vcol.data.into_slice_mut();
                match derivs[k].as_mut() {
                    Some(d) => {
                        let dcol = d.column_mut(col);
                        dict.evaluate(&psi, Some(&h_psi), vslice, Some(dcol.data.into_slice_mut()))?;
                    }
                    None => dict.evaluate(&psi, None, vslice, None)?,
                }
            }
            col += 1;
        }
        if step < sched.n_steps {
            psi = prop.evolve(&psi, sched.dt)?;
        }
    }
    let times: Vec<T> = recorded.iter().map(|&k| sched.dt * lit(k as f64)).collect();
    Ok(values
        .into_iter()
        .zip(derivs)
        .map(|(values, derivs)| TrajectoryRecord {
            times: times.clone(),
            steps: recorded.clone(),
            values,
            derivs,
            dt: sched.dt,
            record_every: sched.record_every,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{expr_matrix, state_column, SpectralPropagator};
    use crate::dictionary::dict_macro_a;
    use crate::hamiltonian::{build_hamiltonian, total_magnetization, ChainSpec};
    use crate::pauli::{expectation, Letter, PauliString, Role};

    #[test]
    fn random_state_is_normalised_and_reproducible() {
        for seed in [0u64, 1, 42, u64::MAX] {
            let a = random_state::<f64>(5, seed);
            assert!((a.norm() - 1.0).abs() < 1e-12);
            let b = random_state::<f64>(5, seed);
            assert_eq!(a, b);
        }
        assert_ne!(random_state::<f64>(3, 1), random_state::<f64>(3, 2));
    }

    #[test]
    fn single_qubit_phase() {
        let h = ObservableExpr::<f64>::single("Z", Role::Density, PauliString::single(1, 0, Letter::Z));
        let s = 0.5f64.sqrt();
        let psi = StateVector::from_amplitudes(1, vec![cplx(s, 0.0), cplx(s, 0.0)]).unwrap();
        let out = evolve(&psi, &h, 0.3).unwrap();
        let want = [C::from_polar(s, -0.3), C::from_polar(s, 0.3)];
        for (a, b) in out.amplitudes().iter().zip(&want) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_step_is_identity() {
        let h = build_hamiltonian(&ChainSpec::<f64>::new(4)).unwrap();
        let psi = random_state::<f64>(4, 9);
        assert_eq!(evolve(&psi, &h, 0.0).unwrap(), psi);
    }

    #[test]
    fn time_reversal() {
        let h = build_hamiltonian(&ChainSpec::<f64>::new(6)).unwrap();
        let p = Propagator::new(&h);
        let psi = random_state::<f64>(6, 3);
        let back = p.evolve(&p.evolve(&psi, 0.05).unwrap(), -0.05).unwrap();
        let err = psi
            .amplitudes()
            .iter()
            .zip(back.amplitudes())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn long_step_uses_substeps() {
        let h = build_hamiltonian(&ChainSpec::<f64>::new(4)).unwrap();
        let psi = random_state::<f64>(4, 5);
        let out = evolve(&psi, &h, 3.0).unwrap();
        let oracle = SpectralPropagator::new(&expr_matrix(&h)).unwrap();
        let want = oracle.evolve(&state_column(&psi), 3.0);
        let err = out
            .amplitudes()
            .iter()
            .zip(want.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        assert!(err < 1e-11, "{err}");
    }

    #[test]
    fn trajectory_shapes_and_conservation() {
        let spec = ChainSpec::<f64>::new(5);
        let h = build_hamiltonian(&spec).unwrap();
        let dict = dict_macro_a::<f64>(5).unwrap();
        let psi = random_state::<f64>(5, 11);

        let sched0 = EvolutionSchedule::new(0.002, 0);
        let r = run_trajectory(&psi, &h, &sched0, &dict, RecordMode::Exact).unwrap();
        assert_eq!(r.times, vec![0.0]);

        let sched = EvolutionSchedule::new(0.002, 200);
        let r = run_trajectory(&psi, &h, &sched, &dict, RecordMode::Exact).unwrap();
        assert_eq!(r.len(), 201);
        assert!(r.times.windows(2).all(|w| w[1] > w[0]));

        let mz = total_magnetization::<f64>(5);
        let e0 = expectation(&psi, &h).unwrap();
        let m0 = expectation(&psi, &mz).unwrap();
        let p = Propagator::new(&h);
        let mut s = psi.clone();
        for _ in 0..200 {
            s = p.evolve(&s, 0.002).unwrap();
        }
        assert!((expectation(&s, &h).unwrap() - e0).abs() <= 1e-9 * e0.abs().max(1.0));
        assert!((expectation(&s, &mz).unwrap() - m0).abs() < 1e-9);
        // recorded Σ⟨Z_i⟩ stays constant too
        for c in 0..r.len() {
            let m: f64 = (0..5).map(|i| r.values[(dict.row(Role::Density, i).unwrap(), c)]).sum();
            assert!((m - m0).abs() < 1e-9);
        }
    }

    #[test]
    fn record_every_and_start() {
        let h = build_hamiltonian(&ChainSpec::<f64>::new(3)).unwrap();
        let dict = dict_macro_a::<f64>(3).unwrap();
        let psi = random_state::<f64>(3, 2);
        let sched = EvolutionSchedule {
            dt: 0.01,
            n_steps: 20,
            record_every: 5,
            record_start: 3,
        };
        let r = run_trajectory(&psi, &h, &sched, &dict, RecordMode::ValuesOnly).unwrap();
        assert_eq!(r.steps, vec![3, 8, 13, 18]);
        assert!(r.derivs.is_none());
        assert!((r.spacing() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn quench_path_switches() {
        let spec = ChainSpec::<f64>::new(3);
        let h = build_hamiltonian(&spec).unwrap();
        let zero = ObservableExpr::zero("0", Role::Energy, 3);
        let path = HamiltonianPath::quench(&zero, &h, 10);
        assert_eq!(path.at(9).0.len(), 0);
        assert_eq!(path.at(10).0.len(), h.len());
        let path0 = HamiltonianPath::quench(&zero, &h, 0);
        assert_eq!(path0.at(0).0.len(), h.len());
    }
}
