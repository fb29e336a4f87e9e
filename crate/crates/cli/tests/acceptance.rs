//! End-to-end acceptance checks, one verdict line per criterion.
//!
//! Every run goes through the `spinhydro` binary with a config written to a
//! scratch directory. Thresholds are fixed below; the process exits non-zero
//! when any criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use spinhydro_runner::table::ReadTable;

const UNITARITY_RATIO: f64 = 1e-6;
const RECONSTRUCTION_BOUND: f64 = 1e-3;
const RESTRICTED_ERROR_FACTOR: f64 = 5.0;
const DISSIPATION_FLOOR: f64 = -1e-3;
const TRACE_SIGMAS: f64 = 5.0;
const CONSERVATION_REL: f64 = 1e-8;
const SINC_FRACTION: f64 = 0.5;
const SIGN_CHANGE_EVERY: usize = 5;
const EPS_T: f64 = 1e-9;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

struct Scratch {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Scratch {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        Scratch { _dir: dir, root }
    }

    /// Runs `kind` with `config`; returns the output directory.
    fn run(&self, name: &str, kind: &str, config: &str, extra: &[&str]) -> Result<PathBuf, String> {
        let cfg = self.root.join(format!("{name}.toml"));
        fs::write(&cfg, config).map_err(|e| e.to_string())?;
        let out = self.root.join(name);
        let o = Command::new(env!("CARGO_BIN_EXE_spinhydro"))
            .arg(kind)
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(extra)
            .output()
            .map_err(|e| e.to_string())?;
        if !o.status.success() {
            return Err(format!(
                "{kind} exited with {:?}: {}",
                o.status.code(),
                String::from_utf8_lossy(&o.stderr).trim()
            ));
        }
        Ok(out)
    }
}

fn read(dir: &Path, name: &str) -> Result<ReadTable, String> {
    ReadTable::read(&dir.join(name))
}

fn num(t: &ReadTable, row: &[String], col: &str) -> Option<f64> {
    let c = t.column(col)?;
    row[c].parse().ok()
}

fn text<'a>(t: &ReadTable, row: &'a [String], col: &str) -> &'a str {
    &row[t.column(col).expect("column present")]
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn longest_same_sign_run(v: &[f64]) -> usize {
    let mut best = 0;
    let mut run = 0;
    let mut prev = 0.0f64;
    for &x in v {
        run = if run > 0 && (x > 0.0) == (prev > 0.0) { run + 1 } else { 1 };
        prev = x;
        best = best.max(run);
    }
    best
}

const SPECTRUM_N6: &str = r#"
[experiment]
kind = "validate"
dictionaries = ["B"]
[chain]
n_sites = 6
[schedule]
dt = 0.002
t_max = 0.6
[window]
duration = 0.6
dt_cg = [0, 0.04]
[ensemble]
size = 1
[analysis]
t0 = 0.3
t1 = 0.3
"#;

fn spectrum_rows(dir: &Path) -> Result<(ReadTable, Vec<Vec<String>>, Vec<Vec<String>>), String> {
    let s = read(dir, "spectrum_summary.csv")?;
    let rows = |dt: &str| -> Vec<Vec<String>> {
        s.rows.iter().filter(|r| text(&s, r, "dict") == "B" && text(&s, r, "dt_cg") == dt).cloned().collect()
    };
    let (exact, finite) = (rows("0"), rows("0.04"));
    if exact.len() != 1 || finite.len() != 1 {
        return Err(format!("expected one window per mode, got {} and {}", exact.len(), finite.len()));
    }
    Ok((s, exact, finite))
}

fn unitarity(dir: &Path) -> Result<Verdict, String> {
    let (s, exact, _) = spectrum_rows(dir)?;
    let r = &exact[0];
    let (re, im) = (num(&s, r, "max_abs_re").unwrap(), num(&s, r, "max_abs_im").unwrap());
    let n_obs = num(&s, r, "n_obs").unwrap();
    let ratio = re / im;
    Ok(verdict(
        ratio < UNITARITY_RATIO,
        format!("n_obs {n_obs}, max|Re| {re:.3e}, max|Im| {im:.3e}, ratio {ratio:.3e} (< {UNITARITY_RATIO:e})"),
    ))
}

fn dissipation(dir: &Path) -> Result<Verdict, String> {
    let (s, exact, finite) = spectrum_rows(dir)?;
    let min_re = num(&s, &finite[0], "min_re").unwrap();
    let r = &exact[0];
    let ratio = num(&s, r, "max_abs_re").unwrap() / num(&s, r, "max_abs_im").unwrap();
    Ok(verdict(
        min_re < DISSIPATION_FLOOR && ratio < UNITARITY_RATIO,
        format!("dt_cg 0.04 min Re {min_re:.4e} (< {DISSIPATION_FLOOR:e}); exact-mode ratio {ratio:.3e}"),
    ))
}

const RECONSTRUCTION_N8: &str = r#"
[experiment]
kind = "validate"
dictionaries = ["B", "A"]
observe_site = 3
reconstruct_steps = 2000
[chain]
n_sites = 8
[schedule]
dt = 0.002
t_max = 0.6
[window]
duration = 0.6
dt_cg = 0
[ensemble]
size = 1
[analysis]
t0 = 0.3
t1 = 0.3
"#;

fn reconstruction(dir: &Path) -> Result<Verdict, String> {
    let t = read(dir, "reconstruction_summary.csv")?;
    let err = |d: &str| {
        t.rows
            .iter()
            .find(|r| text(&t, r, "dict") == d)
            .and_then(|r| num(&t, r, "max_abs_error"))
            .ok_or_else(|| format!("no reconstruction for dictionary {d}"))
    };
    let (b, a) = (err("B")?, err("A")?);
    Ok(verdict(
        b <= RECONSTRUCTION_BOUND && a >= RESTRICTED_ERROR_FACTOR * b,
        format!(
            "Dict B max error {b:.3e} (<= {RECONSTRUCTION_BOUND:e}); Dict A {a:.3e}, ratio A/B {:.2} (>= {RESTRICTED_ERROR_FACTOR})",
            a / b
        ),
    ))
}

const QUENCH_N10: &str = r#"
[experiment]
kind = "quench"
dictionaries = ["S"]
cut_after_site = 1
t_q = 4.0
control_sites = 6
[chain]
n_sites = 10
[schedule]
dt = 0.002
t_max = 6.0
[window]
duration = 0.6
dt_cg = 0
[ensemble]
size = 16
"#;

fn quench_surge(dir: &Path) -> Result<Verdict, String> {
    let t = read(dir, "trace_S.csv")?;
    let mut pre = Vec::new();
    let mut first_post = None;
    for r in &t.rows {
        let tr = num(&t, r, "trace").unwrap();
        match text(&t, r, "phase") {
            "pre" => pre.push(tr),
            "post" if first_post.is_none() => first_post = Some((num(&t, r, "t_center").unwrap(), tr)),
            _ => {}
        }
    }
    let (tc, post) = first_post.ok_or("no post-quench window")?;
    if pre.len() < 2 {
        return Err("fewer than two pre-quench windows".into());
    }
    let (mean, sd) = mean_sd(&pre);
    let limit = mean - TRACE_SIGMAS * sd;
    let c = read(dir, "control_summary.csv")?;
    let ratios: Vec<(String, f64)> =
        c.rows.iter().map(|r| (text(&c, r, "phase").to_string(), num(&c, r, "re_over_im").unwrap())).collect();
    let control_ok = ratios.len() == 2
        && ratios.iter().any(|(p, _)| p == "pre")
        && ratios.iter().any(|(p, _)| p == "post")
        && ratios.iter().all(|(_, x)| *x < UNITARITY_RATIO);
    let shown: Vec<String> = ratios.iter().map(|(p, x)| format!("{p} {x:.2e}")).collect();
    Ok(verdict(
        post < limit && control_ok,
        format!(
            "pre mean {mean:.4} sd {sd:.2e} over {} windows; first post window t={tc} trace {post:.4} (< {limit:.4}); control |Re|/|Im| {}",
            pre.len(),
            shown.join(", ")
        ),
    ))
}

const HYDRO_N12: &str = r#"
[experiment]
kind = "hydro"
[chain]
n_sites = 12
[schedule]
dt = 0.0025
t_max = 3.0
[window]
duration = 1.0
stride = 0.1
dt_cg = [0, 0.01, 0.025, 0.04, 0.1, 0.2]
[ensemble]
size = 32
[analysis]
t0 = 1.0
t1 = 2.5
bulk_margin = 2
"#;

fn conservation(dir: &Path) -> Result<Verdict, String> {
    let p = read(dir, "hydro_profile.csv")?;
    let (n, margin) = (12usize, 2usize);
    let mut worst: f64 = 0.0;
    let mut rel_worst: f64 = 0.0;
    let mut windows = 0;
    let mut centers: Vec<&str> = p.rows.iter().filter(|r| text(&p, r, "dt_cg") == "0").map(|r| text(&p, r, "t_center")).collect();
    centers.dedup();
    for c in centers {
        let tc: f64 = c.parse().unwrap();
        if tc < 0.5 - EPS_T || tc > 1.5 + EPS_T {
            continue;
        }
        windows += 1;
        let rows: Vec<&Vec<String>> = p
            .rows
            .iter()
            .filter(|r| text(&p, r, "dt_cg") == "0" && text(&p, r, "t_center") == c)
            .filter(|r| {
                let s: usize = text(&p, r, "site").parse().unwrap();
                s >= margin && s < n - margin
            })
            .collect();
        let gamma_scale = rows.iter().filter_map(|r| num(&p, r, "gamma")).fold(0.0f64, |m, g| m.max(g.abs()));
        let bound = CONSERVATION_REL * gamma_scale.max(1.0);
        for r in &rows {
            let dz = num(&p, r, "dz").unwrap().abs();
            worst = worst.max(dz);
            rel_worst = rel_worst.max(dz / bound);
        }
    }
    Ok(verdict(
        windows > 0 && rel_worst < 1.0,
        format!("{windows} windows in [0.5, 1.5], max |D_Z| {worst:.3e}, worst |D_Z|/bound {rel_worst:.3e} (< 1)"),
    ))
}

fn bulk_series(b: &ReadTable, dt_cg: &str, col: &str) -> Vec<f64> {
    b.rows
        .iter()
        .filter(|r| text(b, r, "dt_cg") == dt_cg)
        .filter(|r| {
            let t = num(b, r, "t_center").unwrap();
            (1.0 - EPS_T..=2.5 + EPS_T).contains(&t)
        })
        .map(|r| num(b, r, col).unwrap())
        .collect()
}

fn coarse_graining(dir: &Path) -> Result<Verdict, String> {
    let b = read(dir, "hydro_bulk.csv")?;
    let s = read(dir, "cg_sweep.csv")?;

    let g0 = bulk_series(&b, "0", "gamma");
    let (mean, sd) = mean_sd(&g0);
    let run = longest_same_sign_run(&g0);
    let exact_ok = mean.abs() < sd && run < SIGN_CHANGE_EVERY;

    let (g4, n4) = (bulk_series(&b, "0.04", "gamma"), bulk_series(&b, "0.04", "nu"));
    let (gmin, nmin) = (g4.iter().cloned().fold(f64::INFINITY, f64::min), n4.iter().cloned().fold(f64::INFINITY, f64::min));
    let positive_ok = !g4.is_empty() && gmin > 0.0 && nmin > 0.0;

    let sweep: Vec<(f64, f64, f64)> = s
        .rows
        .iter()
        .map(|r| (num(&s, r, "dt_cg").unwrap(), num(&s, r, "c2").unwrap(), num(&s, r, "gamma").unwrap()))
        .collect();
    let c2_at = |dt: f64| sweep.iter().find(|x| x.0 == dt).map(|x| x.1);
    let (c2_exact, c2_coarse) = (c2_at(0.0).ok_or("no exact row")?, c2_at(0.2).ok_or("no 0.2 row")?);
    let sinc_ok = c2_coarse < SINC_FRACTION * c2_exact;

    // first dt_cg from which gamma stays positive and keeps rising
    let onset = (0..sweep.len()).find(|&k| {
        sweep[k..].iter().all(|x| x.2 > 0.0) && sweep[k..].windows(2).all(|w| w[1].2 > w[0].2)
    });
    let onset_dt = onset.filter(|&k| k + 1 < sweep.len()).map(|k| sweep[k].0);
    let slope_ok = onset_dt.is_some_and(|d| (0.01..=0.1).contains(&d));

    Ok(verdict(
        exact_ok && positive_ok && sinc_ok && slope_ok,
        format!(
            "exact gamma mean {mean:.3e} sd {sd:.3e} longest same-sign run {run} of {} [{}]; \
             dt_cg 0.04 min gamma {gmin:.3e} min nu {nmin:.3e} [{}]; \
             c2(0.2)/c2(0) = {:.3} [{}]; gamma rising from dt_cg {} [{}]",
            g0.len(),
            ok(exact_ok),
            ok(positive_ok),
            c2_coarse / c2_exact,
            ok(sinc_ok),
            onset_dt.map_or("none".into(), |d| d.to_string()),
            ok(slope_ok)
        ),
    ))
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "fails"
    }
}

fn oracle(dir: &Path) -> Result<Verdict, String> {
    let t = read(dir, "oracle_report.csv")?;
    let failed: Vec<String> = t
        .rows
        .iter()
        .filter(|r| text(&t, r, "pass") != "true")
        .map(|r| format!("{}@N={}", text(&t, r, "check"), text(&t, r, "n_sites")))
        .collect();
    let max_n = t.rows.iter().filter_map(|r| text(&t, r, "n_sites").parse::<usize>().ok()).max().unwrap_or(0);
    Ok(verdict(
        failed.is_empty() && max_n >= 5,
        format!("{} checks up to N={max_n}, failed: {}", t.rows.len(), if failed.is_empty() { "none".into() } else { failed.join(" ") }),
    ))
}

fn csv_set(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    Ok(v)
}

fn determinism(a: &Path, b: &Path) -> Result<Verdict, String> {
    let (x, y) = (csv_set(a)?, csv_set(b)?);
    let names: Vec<&str> = x.iter().map(|f| f.0.as_str()).collect();
    let differing: Vec<&str> = x.iter().zip(&y).filter(|(p, q)| p != q).map(|(p, _)| p.0.as_str()).collect();
    let same_names = names == y.iter().map(|f| f.0.as_str()).collect::<Vec<_>>();
    Ok(verdict(
        !x.is_empty() && same_names && differing.is_empty(),
        format!("{} CSV files [{}], differing: {}", x.len(), names.join(" "), if differing.is_empty() { "none".into() } else { differing.join(" ") }),
    ))
}

fn report(id: usize, title: &str, started: Instant, v: Result<Verdict, String>) -> bool {
    let secs = started.elapsed().as_secs_f64();
    let (pass, detail) = match v {
        Ok(v) => (v.pass, v.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!("criterion {id} {title}: {} ({secs:.0} s) {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn main() {
    // libtest arguments such as --nocapture or filters are accepted and ignored
    let scratch = Scratch::new();
    let mut results = Vec::new();

    let t = Instant::now();
    let n6 = scratch.run("spectrum_n6", "validate", SPECTRUM_N6, &[]);
    let n6_time = t.elapsed();
    results.push(report(1, "unitary full-basis spectrum", t, n6.clone().and_then(|d| unitarity(&d))));
    let t = Instant::now() - n6_time;
    results.push(report(3, "coarse-grained dissipation", t, n6.and_then(|d| dissipation(&d))));

    let t = Instant::now();
    results.push(report(
        2,
        "reconstruction bound",
        t,
        scratch.run("reconstruction_n8", "validate", RECONSTRUCTION_N8, &[]).and_then(|d| reconstruction(&d)),
    ));

    let t = Instant::now();
    results.push(report(4, "quench trace surge", t, scratch.run("quench_n10", "quench", QUENCH_N10, &[]).and_then(|d| quench_surge(&d))));

    let t = Instant::now();
    let hydro = scratch.run("hydro_n12_t1", "hydro", HYDRO_N12, &["--threads", "1"]);
    let hydro_time = t.elapsed();
    results.push(report(5, "density conservation", t, hydro.clone().and_then(|d| conservation(&d))));
    results.push(report(6, "coarse-graining dichotomy", Instant::now() - hydro_time, hydro.clone().and_then(|d| coarse_graining(&d))));

    let t = Instant::now();
    results.push(report(7, "dense oracles", t, scratch.run("oracle", "oracle", "", &[]).and_then(|d| oracle(&d))));

    let t = Instant::now() - hydro_time;
    let again = scratch.run("hydro_n12_t8", "hydro", HYDRO_N12, &["--threads", "8"]);
    results.push(report(8, "thread-count determinism", t, hydro.and_then(|a| again.and_then(|b| determinism(&a, &b)))));

    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} of {} criteria pass", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
