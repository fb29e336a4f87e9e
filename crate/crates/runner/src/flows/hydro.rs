//! Coefficient extraction over every window and every `dt_cg`, with the
//! time-averaged sweep over `[t0, t1]`.

use spinhydro_core::hydro::{bulk_median, extract_coefficients, time_average, CoefficientSet};
use spinhydro_core::{build_hamiltonian, HamiltonianPath, RecordMode};

use super::{build_dictionary, fit_windows, plan_label};
use crate::artifacts::ArtifactSet;
use crate::config::{DictChoice, ExperimentPlan};
use crate::ensemble::{member_seeds, simulate};
use crate::error::Result;
use crate::table::{format_f64, Cell, Table};

const COEFF_COLUMNS: [(&str, &str); 5] = [
    ("c2", "1/time^2"),
    ("gamma", "1/time"),
    ("nu", "1/time"),
    ("d", "1/time"),
    ("dz", "1/time"),
];

fn coeff_cells(c: &CoefficientSet<f64>) -> Vec<Cell> {
    vec![c.c2.into(), c.gamma.into(), c.nu.into(), c.d.into(), c.dz.into()]
}

fn with_coeffs(lead: &[(&'static str, &'static str)], prefix: &str) -> Vec<(String, &'static str)> {
    let mut cols: Vec<(String, &'static str)> = lead.iter().map(|(c, u)| (c.to_string(), *u)).collect();
    cols.extend(COEFF_COLUMNS.iter().map(|(c, u)| (format!("{prefix}{c}"), *u)));
    cols
}

fn table_of(cols: &[(String, &'static str)]) -> Table {
    let refs: Vec<(&str, &str)> = cols.iter().map(|(c, u)| (c.as_str(), *u)).collect();
    Table::new(&refs)
}

pub fn run(plan: &ExperimentPlan, out: &mut ArtifactSet) -> Result<()> {
    let n = plan.chain.n_sites;
    let h = build_hamiltonian(&plan.chain)?;
    let path = HamiltonianPath::constant(&h);
    let seeds = member_seeds(plan.base_seed, plan.ensemble_size);
    out.set_member_seeds(seeds.clone());
    let dict = build_dictionary(DictChoice::Hydro, &plan.chain, None)?;
    let records = simulate(n, &seeds, &path, &plan.schedule(), &[&dict], RecordMode::Exact)?.remove(0);

    let span = format!("[{}, {}]", format_f64(plan.t0), format_f64(plan.t1));
    let mut profile = Table::new(&[
        ("dt_cg", "time"),
        ("t_center", "time"),
        ("site", ""),
        ("c2", "1/time^2"),
        ("gamma", "1/time"),
        ("nu", "1/time"),
        ("d", "1/time"),
        ("dz", "1/time"),
    ])
    .meta("system", plan_label(plan))
    .meta("members", plan.ensemble_size.to_string());
    let mut bulk_cols = with_coeffs(&[("dt_cg", "time"), ("t_center", "time")], "");
    bulk_cols.extend(COEFF_COLUMNS.iter().map(|(c, u)| (format!("mean_{c}"), *u)));
    let mut bulk = table_of(&bulk_cols)
        .meta("system", plan_label(plan))
        .meta("bulk_margin", plan.bulk_margin.to_string());
    let mut sweep = table_of(&with_coeffs(&[("dt_cg", "time"), ("windows", "")], ""))
        .meta("system", plan_label(plan))
        .meta("average_over", span)
        .meta("statistic", "time mean of bulk medians");

    for &dt_cg in &plan.dt_cg {
        let w = plan.window(dt_cg);
        let centers = w.centers(&records[0].times)?;
        let fits = fit_windows(&records, &w, &centers, plan.rcond)?;
        let mut series = Vec::with_capacity(fits.len());
        for f in &fits {
            let p = extract_coefficients(&f.estimate, &dict)?;
            for site in 0..n {
                let bond = |v: &[f64]| v.get(site).copied().map_or(Cell::Empty, Cell::Num);
                profile.push(vec![
                    dt_cg.into(),
                    f.t_center.into(),
                    site.into(),
                    bond(&p.c2),
                    bond(&p.gamma),
                    p.nu.get(site).copied().flatten().into(),
                    p.d.get(site).copied().flatten().into(),
                    p.dz[site].into(),
                ]);
            }
            let b = bulk_median(&p, plan.bulk_margin)?;
            let mut row = vec![dt_cg.into(), f.t_center.into()];
            row.extend(coeff_cells(&b.median));
            row.extend(coeff_cells(&b.mean));
            bulk.push(row);
            series.push((f.t_center, b.median));
        }
        let avg = time_average(&series, plan.t0, plan.t1)?;
        let count = series.iter().filter(|(t, _)| *t >= plan.t0 - 1e-9 && *t <= plan.t1 + 1e-9).count();
        let mut row = vec![dt_cg.into(), count.into()];
        row.extend(coeff_cells(&avg));
        sweep.push(row);
    }
    out.write("hydro_profile.csv", profile)?;
    out.write("hydro_bulk.csv", bulk)?;
    out.write("cg_sweep.csv", sweep)?;
    Ok(())
}
