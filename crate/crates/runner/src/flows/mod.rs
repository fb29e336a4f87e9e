//! One module per experiment kind, sharing dictionary construction and
//! window fitting.

use std::collections::BTreeMap;

use spinhydro_core::dictionary::{
    dict_env_energy, dict_full_pauli, dict_hydro, dict_macro_a, dict_pointer_l, dict_target_s,
};
use spinhydro_core::{
    assemble_block, fit_liouvillian, liouvillian_trace, spectrum, ChainSpec, Dictionary, LiouvillianEstimate,
    ObservableExpr, PauliString, QuenchSpec, Role, SiteRange, Spectrum, TrajectoryRecord, WindowSpec,
};

use crate::config::{DictChoice, ExperimentPlan};
use crate::ensemble::ordered_map;
use crate::error::{Result, RunError};
use crate::table::{Cell, Table};

pub mod dump;
pub mod hydro;
pub mod oracle;
pub mod quench;
pub mod validate;

pub fn build_dictionary(
    choice: DictChoice,
    chain: &ChainSpec<f64>,
    quench: Option<&QuenchSpec<f64>>,
) -> Result<Dictionary<f64>> {
    let n = chain.n_sites;
    let env = |q: &QuenchSpec<f64>| SiteRange::new(q.cut_after_site + 1, n - 1);
    let need_q = || quench.ok_or_else(|| RunError::Config(format!("dictionary {} needs a quench", choice.as_str())));
    let d = match choice {
        DictChoice::A => dict_macro_a(n)?,
        DictChoice::B => dict_full_pauli(n)?,
        DictChoice::Hydro => dict_hydro(n)?,
        DictChoice::S => dict_target_s(n, SiteRange::new(0, need_q()?.cut_after_site)?)?,
        DictChoice::L => dict_pointer_l(n, env(need_q()?)?)?,
        DictChoice::E => dict_env_energy(chain, env(need_q()?)?)?,
    };
    Ok(d)
}

/// Row holding exactly the single word `w` with unit coefficient.
pub fn word_row(dict: &Dictionary<f64>, w: &PauliString) -> Option<usize> {
    dict.entries().iter().position(|e| e.terms().len() == 1 && e.terms()[0] == (1.0, *w))
}

/// A one-entry dictionary tracking `o`.
pub fn single_entry(o: ObservableExpr<f64>) -> Result<Dictionary<f64>> {
    let n = o.n_sites();
    let mut layout = BTreeMap::new();
    layout.insert((o.role(), 0), 0);
    Ok(Dictionary::new(o.name().to_string(), n, vec![o], layout)?)
}

/// Fitted window with everything the tables need.
pub struct FittedWindow {
    pub t_center: f64,
    pub estimate: LiouvillianEstimate<f64>,
    pub spectrum: Spectrum<f64>,
    pub trace: f64,
}

/// Fits each window in `centers` in parallel; order follows `centers`.
pub fn fit_windows(
    records: &[TrajectoryRecord<f64>],
    window: &WindowSpec<f64>,
    centers: &[f64],
    rcond: f64,
) -> Result<Vec<FittedWindow>> {
    ordered_map(centers, |&t| {
        let block = assemble_block(records, window, t)?;
        let estimate = fit_liouvillian(&block, rcond)?;
        let spectrum = spectrum(&estimate)?;
        let trace = liouvillian_trace(&estimate);
        Ok(FittedWindow {
            t_center: t,
            estimate,
            spectrum,
            trace,
        })
    })
}

pub fn spectrum_table() -> Table {
    Table::new(&[
        ("dt_cg", "time"),
        ("t_center", "time"),
        ("index", ""),
        ("re", "1/time"),
        ("im", "1/time"),
    ])
}

pub fn push_spectrum(table: &mut Table, dt_cg: f64, w: &FittedWindow) {
    for (k, z) in w.spectrum.values.iter().enumerate() {
        table.push(vec![dt_cg.into(), w.t_center.into(), k.into(), z.re.into(), z.im.into()]);
    }
}

pub fn summary_table() -> Table {
    Table::new(&[
        ("dict", ""),
        ("dt_cg", "time"),
        ("t_center", "time"),
        ("n_obs", ""),
        ("m_samples", ""),
        ("rank", ""),
        ("structural_zeros", ""),
        ("max_abs_re", "1/time"),
        ("max_abs_im", "1/time"),
        ("min_re", "1/time"),
        ("max_re", "1/time"),
        ("trace", "1/time"),
        ("residual_rms", "1/time"),
    ])
}

pub fn push_summary(table: &mut Table, dict: &str, dt_cg: f64, w: &FittedWindow) {
    let e = &w.estimate;
    let s = &w.spectrum;
    let or_empty = |v: f64| if s.values.is_empty() { Cell::Empty } else { v.into() };
    table.push(vec![
        dict.into(),
        dt_cg.into(),
        w.t_center.into(),
        e.n_obs.into(),
        e.m_samples.into(),
        e.rank.into(),
        s.structural_zeros.into(),
        or_empty(s.max_abs_re()),
        or_empty(s.max_abs_im()),
        or_empty(s.min_re()),
        or_empty(s.max_re()),
        w.trace.into(),
        e.residual_rms.into(),
    ]);
}

pub fn density_word(n: usize, site: usize) -> PauliString {
    PauliString::single(n, site, spinhydro_core::Letter::Z)
}

pub fn density_expr(n: usize, site: usize) -> ObservableExpr<f64> {
    ObservableExpr::single(format!("Z{site}"), Role::Density, density_word(n, site))
}

pub(crate) fn plan_label(plan: &ExperimentPlan) -> String {
    format!("N={} {}", plan.chain.n_sites, plan.hamiltonian_label())
}
