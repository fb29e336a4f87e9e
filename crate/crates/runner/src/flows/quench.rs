//! Cut chain evolved under `H_iso` until `t_q`, then under the full chain.

use spinhydro_core::hydro::centers_in;
use spinhydro_core::{
    build_quench_pair, max_dissipation_pole, ChainSpec, EvolutionSchedule, HamiltonianPath, RecordMode,
};

use super::{build_dictionary, fit_windows, plan_label, push_spectrum, push_summary, spectrum_table, summary_table};
use crate::artifacts::ArtifactSet;
use crate::config::{DictChoice, ExperimentPlan};
use crate::ensemble::{member_seeds, simulate};
use crate::error::{Result, RunError};
use crate::table::{format_f64, Table};

/// Where a window sits relative to the switch.
pub fn phase(t_center: f64, duration: f64, t_q: f64) -> &'static str {
    let eps = 1e-9;
    if t_center + duration / 2.0 <= t_q + eps {
        "pre"
    } else if t_center - duration / 2.0 >= t_q - eps {
        "post"
    } else {
        "straddle"
    }
}

pub fn run(plan: &ExperimentPlan, out: &mut ArtifactSet) -> Result<()> {
    let q = plan.quench.ok_or_else(|| RunError::Config("quench run without a quench".into()))?;
    let n = plan.chain.n_sites;
    let switch = plan.quench_step().expect("quench present");
    let t_q = switch as f64 * plan.dt;
    if let Some((given, applied)) = plan.quench_snap() {
        out.warn(format!(
            "t_q = {} is off the dt grid; snapped down to {}",
            format_f64(given),
            format_f64(applied)
        ));
    }
    let (iso, coupled) = build_quench_pair(&plan.chain, &q)?;
    let path = HamiltonianPath::quench(&iso, &coupled, switch);
    let seeds = member_seeds(plan.base_seed, plan.ensemble_size);
    out.set_member_seeds(seeds.clone());

    let dicts = plan
        .dictionaries
        .iter()
        .map(|&c| build_dictionary(c, &plan.chain, Some(&q)))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<_> = dicts.iter().collect();
    let records = simulate(n, &seeds, &path, &plan.schedule(), &refs, RecordMode::Exact)?;

    let tq_text = format_f64(t_q);
    let mut summary = summary_table().meta("system", plan_label(plan)).meta("t_q", tq_text.clone());
    for (choice, recs) in plan.dictionaries.iter().zip(&records) {
        let name = choice.as_str();
        let mut spec = spectrum_table().meta("dictionary", name).meta("t_q", tq_text.clone());
        let mut trace = Table::new(&[
            ("dt_cg", "time"),
            ("t_center", "time"),
            ("phase", ""),
            ("rank", ""),
            ("trace", "1/time"),
            ("max_dissipation_pole", "1/time"),
        ])
        .meta("dictionary", name)
        .meta("t_q", tq_text.clone());
        for &dt_cg in &plan.dt_cg {
            let w = plan.window(dt_cg);
            let centers = centers_in(recs, &w, plan.t0, plan.t1)?;
            for f in fit_windows(recs, &w, &centers, plan.rcond)? {
                push_spectrum(&mut spec, dt_cg, &f);
                push_summary(&mut summary, name, dt_cg, &f);
                trace.push(vec![
                    dt_cg.into(),
                    f.t_center.into(),
                    phase(f.t_center, plan.window_duration, t_q).into(),
                    f.estimate.rank.into(),
                    f.trace.into(),
                    max_dissipation_pole(&f.estimate)?.into(),
                ]);
            }
        }
        out.write(&format!("spectrum_{name}.csv"), spec)?;
        out.write(&format!("trace_{name}.csv"), trace)?;
        if *choice == DictChoice::E {
            let mut energy = Table::new(&[("t", "time"), ("mean", "energy"), ("member0", "energy")])
                .meta("dictionary", name)
                .meta("t_q", tq_text.clone());
            let m = recs.len() as f64;
            for (c, &t) in recs[0].times.iter().enumerate() {
                let mean = recs.iter().map(|r| r.values[(0, c)]).sum::<f64>() / m;
                energy.push(vec![t.into(), mean.into(), recs[0].values[(0, c)].into()]);
            }
            out.write("env_energy.csv", energy)?;
        }
    }
    out.write("spectrum_summary.csv", summary)?;

    if plan.control_sites > 0 {
        control(plan, out, seeds[0], switch)?;
    }
    Ok(())
}

/// Full Pauli basis on a short chain with the same cut, one window on each
/// side of the switch.
fn control(plan: &ExperimentPlan, out: &mut ArtifactSet, seed: u64, switch: usize) -> Result<()> {
    let q = plan.quench.expect("quench present");
    let nc = plan.control_sites.min(plan.chain.n_sites);
    let chain = ChainSpec { n_sites: nc, ..plan.chain };
    let (iso, coupled) = build_quench_pair(&chain, &q)?;
    let path = HamiltonianPath::quench(&iso, &coupled, switch);
    let dict = build_dictionary(DictChoice::B, &chain, Some(&q))?;
    let samples = plan.samples_per_window();
    let span = samples * plan.record_every;
    let mut sched = EvolutionSchedule::new(plan.dt, (switch + span).min(plan.n_steps()));
    sched.record_every = plan.record_every;
    sched.record_start = switch.saturating_sub(span);
    let records = simulate(nc, &[seed], &path, &sched, &[&dict], RecordMode::Exact)?.remove(0);
    let t_q = switch as f64 * plan.dt;
    let half = plan.window_duration / 2.0;
    let centers: Vec<f64> = [t_q - half, t_q + half]
        .into_iter()
        .filter(|&c| c - half >= -1e-9 && c + half <= plan.t_max + 1e-9)
        .collect();
    let w = plan.window(0.0);
    let mut spec = spectrum_table().meta("dictionary", "B").meta("n_sites", nc.to_string());
    let mut table = Table::new(&[
        ("t_center", "time"),
        ("phase", ""),
        ("n_obs", ""),
        ("rank", ""),
        ("max_abs_re", "1/time"),
        ("max_abs_im", "1/time"),
        ("re_over_im", ""),
    ])
    .meta("n_sites", nc.to_string())
    .meta("t_q", format_f64(t_q));
    for f in fit_windows(&records, &w, &centers, plan.rcond)? {
        push_spectrum(&mut spec, 0.0, &f);
        let (re, im) = (f.spectrum.max_abs_re(), f.spectrum.max_abs_im());
        table.push(vec![
            f.t_center.into(),
            phase(f.t_center, plan.window_duration, t_q).into(),
            f.estimate.n_obs.into(),
            f.estimate.rank.into(),
            re.into(),
            im.into(),
            (re / im).into(),
        ]);
    }
    out.write("spectrum_control.csv", spec)?;
    out.write("control_summary.csv", table)?;
    Ok(())
}
