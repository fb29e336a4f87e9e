//! Dense-matrix cross-checks of the matrix-free kernels on small chains.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinhydro_core::dense::{
    commutator_i_dense, expectation_dense, expr_matrix, is_hermitian, max_abs_diff, max_entry_diff, state_column,
    SpectralPropagator,
};
use spinhydro_core::dictionary::{dict_hydro, dict_macro_a, spin_current};
use spinhydro_core::linalg::expm;
use spinhydro_core::propagator::random_state;
use spinhydro_core::{
    build_hamiltonian, fit_liouvillian, ChainSpec, Dictionary, ObservableExpr, Propagator, Role, SnapshotBlock,
};

use super::density_expr;
use crate::artifacts::ArtifactSet;
use crate::config::ExperimentPlan;
use crate::ensemble::splitmix64;
use crate::error::Result;
use crate::table::{Cell, Table};

pub const TOL_PROPAGATOR: f64 = 1e-10;
pub const TOL_DENSE: f64 = 1e-12;
pub const TOL_RECOVERY: f64 = 1e-8;

/// One row of the oracle report.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: &'static str,
    /// Chain length; `None` for checks without a chain.
    pub n_sites: Option<usize>,
    pub deviation: f64,
    pub tolerance: f64,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.deviation.is_finite() && self.deviation < self.tolerance
    }
}

fn propagator_check(chain: &ChainSpec<f64>, seed: u64, dt: f64) -> spinhydro_core::Result<f64> {
    let h = build_hamiltonian(chain)?;
    let oracle = SpectralPropagator::new(&expr_matrix(&h))?;
    let p = Propagator::new(&h);
    let psi0 = random_state::<f64>(chain.n_sites, seed);
    let mut psi = psi0.clone();
    let steps = 100;
    for _ in 0..steps {
        psi = p.evolve(&psi, dt)?;
    }
    let want = oracle.evolve(&state_column(&psi0), dt * steps as f64);
    Ok(max_abs_diff(psi.amplitudes(), want.as_slice()))
}

/// Largest deviation of dictionary values and derivatives from dense algebra.
fn dictionary_check(dict: &Dictionary<f64>, h: &ObservableExpr<f64>, seed: u64) -> spinhydro_core::Result<(f64, f64)> {
    let psi = random_state::<f64>(dict.n_sites(), seed);
    let hm = expr_matrix(h);
    let h_psi = h.compile().apply(psi.amplitudes());
    let mut vals = vec![0.0; dict.len()];
    let mut ders = vec![0.0; dict.len()];
    dict.evaluate(&psi, Some(&h_psi), &mut vals, Some(&mut ders))?;
    let (mut ev, mut ec) = (0.0f64, 0.0f64);
    for (k, e) in dict.entries().iter().enumerate() {
        let om = expr_matrix(e);
        ev = ev.max((vals[k] - expectation_dense(&psi, &om).re).abs());
        ec = ec.max((ders[k] - expectation_dense(&psi, &commutator_i_dense(&hm, &om)).re).abs());
    }
    Ok((ev, ec))
}

/// `i[H, Z_i] - 2J (J_{i-1} - J_i)` over all sites, symbolically and densely.
fn continuity_check(chain: &ChainSpec<f64>) -> spinhydro_core::Result<f64> {
    let n = chain.n_sites;
    let h = build_hamiltonian(chain)?;
    let hm = expr_matrix(&h);
    let mut worst = 0.0f64;
    for i in 0..n {
        let z = density_expr(n, i);
        let mut rhs = ObservableExpr::zero("rhs", Role::Current, n);
        if i >= 1 {
            rhs = rhs.add(&spin_current(n, i - 1))?;
        }
        if i + 1 < n {
            rhs = rhs.sub(&spin_current(n, i))?;
        }
        let rhs = rhs.scaled(2.0 * chain.j);
        let sym = h.commutator_i(&z)?.sub(&rhs)?;
        worst = sym.terms().iter().fold(worst, |m, (c, _)| m.max(c.abs()));
        worst = worst.max(max_entry_diff(&commutator_i_dense(&hm, &expr_matrix(&z)), &expr_matrix(&rhs)));
    }
    Ok(worst)
}

/// Fits a random stable generator from exact samples of its own flow.
fn recovery_check(dim: usize, seed: u64) -> spinhydro_core::Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    let m = (&a - a.transpose()) * 0.5 - DMatrix::identity(dim, dim) * 0.1;
    let dt = 0.05;
    let step = expm(&(&m * dt))?;
    let (starts, per) = (3, 40);
    let mut x = DMatrix::zeros(dim, starts * per);
    for s in 0..starts {
        let mut v = nalgebra::DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
        for k in 0..per {
            x.set_column(s * per + k, &v);
            v = &step * v;
        }
    }
    let xdot = &m * &x;
    let est = fit_liouvillian(&SnapshotBlock::new(x, xdot, 0.0)?, 1e-10)?;
    Ok((est.l().expect("dense generator for a tall block") - m).amax())
}

/// Runs every check for `2 ≤ n ≤ max_n` (hydro dictionary from `n = 3`).
pub fn run_checks(plan: &ExperimentPlan) -> spinhydro_core::Result<Vec<OracleCheck>> {
    let mut out = Vec::new();
    for n in 2..=plan.oracle_max_n {
        let chain = ChainSpec { n_sites: n, ..plan.chain };
        let seed = splitmix64(plan.base_seed ^ (n as u64) << 32);
        let h = build_hamiltonian(&chain)?;
        out.push(OracleCheck {
            name: "hamiltonian_hermitian",
            n_sites: Some(n),
            deviation: {
                let m = expr_matrix(&h);
                max_entry_diff(&m, &m.adjoint())
            },
            tolerance: TOL_DENSE,
        });
        debug_assert!(is_hermitian(&expr_matrix(&h), 1e-12));
        out.push(OracleCheck {
            name: "propagator_vs_eigendecomposition",
            n_sites: Some(n),
            deviation: propagator_check(&chain, seed, plan.dt)?,
            tolerance: TOL_PROPAGATOR,
        });
        let dict = if n >= 3 { dict_hydro(n)? } else { dict_macro_a(n)? };
        let (ev, ec) = dictionary_check(&dict, &h, seed.wrapping_add(1))?;
        out.push(OracleCheck {
            name: "expectation_vs_dense",
            n_sites: Some(n),
            deviation: ev,
            tolerance: TOL_DENSE,
        });
        out.push(OracleCheck {
            name: "commutator_vs_dense",
            n_sites: Some(n),
            deviation: ec,
            tolerance: TOL_DENSE,
        });
        out.push(OracleCheck {
            name: "continuity_identity",
            n_sites: Some(n),
            deviation: continuity_check(&chain)?,
            tolerance: TOL_DENSE,
        });
    }
    out.push(OracleCheck {
        name: "generator_recovery_6x6",
        n_sites: None,
        deviation: recovery_check(6, splitmix64(plan.base_seed))?,
        tolerance: TOL_RECOVERY,
    });
    Ok(out)
}

pub fn run(plan: &ExperimentPlan, out: &mut ArtifactSet) -> Result<()> {
    let checks = run_checks(plan)?;
    let mut table = Table::new(&[
        ("check", ""),
        ("n_sites", ""),
        ("max_deviation", ""),
        ("tolerance", ""),
        ("pass", ""),
    ]);
    for c in &checks {
        table.push(vec![
            c.name.into(),
            c.n_sites.map_or(Cell::Empty, Cell::from),
            c.deviation.into(),
            c.tolerance.into(),
            (if c.passed() { "true" } else { "false" }).into(),
        ]);
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    if failed > 0 {
        out.warn(format!("{failed} oracle checks failed"));
    }
    out.write("oracle_report.csv", table)?;
    Ok(())
}
