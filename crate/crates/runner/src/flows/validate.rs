//! Unquenched chain: spectra per dictionary and derivative mode, and the
//! reconstruction of one site's density from the first fitted window.

use nalgebra::DVector;
use spinhydro_core::gedmd::reconstruct_rows;
use spinhydro_core::hydro::centers_in;
use spinhydro_core::propagator::random_state;
use spinhydro_core::{build_hamiltonian, run_trajectory, EvolutionSchedule, HamiltonianPath, RecordMode};

use super::{
    build_dictionary, density_expr, density_word, fit_windows, plan_label, push_spectrum, push_summary,
    single_entry, spectrum_table, summary_table, word_row,
};
use crate::artifacts::ArtifactSet;
use crate::config::ExperimentPlan;
use crate::ensemble::{member_seeds, simulate};
use crate::error::{Result, RunError};
use crate::table::{Cell, Table};

pub fn run(plan: &ExperimentPlan, out: &mut ArtifactSet) -> Result<()> {
    let n = plan.chain.n_sites;
    let h = build_hamiltonian(&plan.chain)?;
    let path = HamiltonianPath::constant(&h);
    let seeds = member_seeds(plan.base_seed, plan.ensemble_size);
    out.set_member_seeds(seeds.clone());

    let dicts = plan
        .dictionaries
        .iter()
        .map(|&c| build_dictionary(c, &plan.chain, None))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<_> = dicts.iter().collect();
    let records = simulate(n, &seeds, &path, &plan.schedule(), &refs, RecordMode::Exact)?;

    let mut summary = summary_table().meta("system", plan_label(plan));
    let mut first_exact = Vec::new();
    for (choice, recs) in plan.dictionaries.iter().zip(&records) {
        let name = choice.as_str();
        let mut spec = spectrum_table().meta("dictionary", name);
        let mut first = None;
        for &dt_cg in &plan.dt_cg {
            let w = plan.window(dt_cg);
            let centers = centers_in(recs, &w, plan.t0, plan.t1)?;
            let fits = fit_windows(recs, &w, &centers, plan.rcond)?;
            for f in &fits {
                push_spectrum(&mut spec, dt_cg, f);
                push_summary(&mut summary, name, dt_cg, f);
            }
            if dt_cg == 0.0 && first.is_none() {
                first = fits.into_iter().next();
            }
        }
        out.write(&format!("spectrum_{name}.csv"), spec)?;
        first_exact.push(first);
    }
    out.write("spectrum_summary.csv", summary)?;

    // Reconstruction of ⟨Z_site⟩ for member 0 from its state at the start of
    // the first exact window.
    let site = plan.observe_site;
    let word = density_word(n, site);
    let targets: Vec<_> = plan
        .dictionaries
        .iter()
        .enumerate()
        .filter_map(|(k, c)| Some((k, c, word_row(&dicts[k], &word)?, first_exact[k].as_ref()?)))
        .collect();
    if targets.is_empty() {
        out.warn(format!("no exact window or no dictionary holds Z{site}; reconstruction skipped"));
        return Ok(());
    }
    let t_start = targets[0].3.t_center - plan.window_duration / 2.0;
    let start_step = (t_start / plan.dt).round() as usize;
    let steps = start_step + plan.reconstruct_steps;
    let observed = single_entry(density_expr(n, site))?;
    let exact = run_trajectory(
        &random_state::<f64>(n, seeds[0]),
        &h,
        &EvolutionSchedule::new(plan.dt, steps),
        &observed,
        RecordMode::ValuesOnly,
    )?;
    let times: Vec<f64> = (0..=plan.reconstruct_steps).map(|k| k as f64 * plan.dt).collect();

    let mut table = Table::new(&[
        ("dict", ""),
        ("t", "time"),
        ("exact", ""),
        ("predicted", ""),
        ("abs_error", ""),
    ])
    .meta("observable", format!("Z{site}"))
    .meta("member_seed", seeds[0].to_string());
    let mut errors = Table::new(&[("dict", ""), ("route", ""), ("max_abs_error", "")]).meta("observable", format!("Z{site}"));
    for (k, choice, row, fit) in targets {
        let rec = &records[k][0];
        let col = rec
            .steps
            .iter()
            .position(|&s| s == start_step)
            .ok_or_else(|| RunError::Config("reconstruction start is not a recorded step".into()))?;
        let x0 = DVector::from_column_slice(rec.values.column(col).as_slice());
        let r = reconstruct_rows(&fit.estimate, &x0, &times, &[row])?;
        let mut worst = 0.0f64;
        for (j, &t) in times.iter().enumerate() {
            let e = exact.values[(0, start_step + j)];
            let p = r.values[(0, j)];
            if !p.is_finite() {
                return Err(spinhydro_core::Error::Integrity(format!("non-finite reconstruction at t = {t}")).into());
            }
            worst = worst.max((p - e).abs());
            table.push(vec![choice.as_str().into(), (t_start + t).into(), e.into(), p.into(), (p - e).abs().into()]);
        }
        errors.push(vec![choice.as_str().into(), Cell::Text(format!("{:?}", r.route).to_lowercase()), worst.into()]);
    }
    out.write("reconstruction.csv", table)?;
    out.write("reconstruction_summary.csv", errors)?;
    Ok(())
}
