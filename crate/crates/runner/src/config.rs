//! Run configuration: a sectioned key–value document (a TOML subset) with
//! the sections `[chain] [schedule] [window] [ensemble] [experiment]
//! [analysis] [output]`. Missing keys take per-kind defaults; unknown keys
//! are rejected with their line number.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::Deserialize;
use spinhydro_core::dictionary::FULL_PAULI_CAP;
use spinhydro_core::gedmd::{DerivMode, DEFAULT_RCOND};
use spinhydro_core::pauli::MAX_STATE_SITES;
use spinhydro_core::{ChainSpec, EvolutionSchedule, QuenchSpec, WindowSpec};

use crate::error::{Result, RunError};
use crate::table::format_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Validate,
    Quench,
    Hydro,
    Sweep,
    Oracle,
    DumpDictionary,
}

impl Kind {
    pub const ALL: [Kind; 6] = [
        Kind::Validate,
        Kind::Quench,
        Kind::Hydro,
        Kind::Sweep,
        Kind::Oracle,
        Kind::DumpDictionary,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Validate => "validate",
            Kind::Quench => "quench",
            Kind::Hydro => "hydro",
            Kind::Sweep => "sweep",
            Kind::Oracle => "oracle",
            Kind::DumpDictionary => "dump-dictionary",
        }
    }
}

impl FromStr for Kind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Kind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown experiment kind '{s}'"))
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Dictionaries selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DictChoice {
    /// `{Z_i} ∪ {Z_i Z_{i+1}}`.
    A,
    /// Every non-identity Pauli word.
    B,
    /// Densities, currents and composites for coefficient extraction.
    Hydro,
    /// Full Pauli basis on the target sites of a quench.
    S,
    /// Densities, bonds and current halves on the environment.
    L,
    /// Environment energy.
    E,
}

impl DictChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            DictChoice::A => "A",
            DictChoice::B => "B",
            DictChoice::Hydro => "hydro",
            DictChoice::S => "S",
            DictChoice::L => "L",
            DictChoice::E => "E",
        }
    }

    fn needs_quench(self) -> bool {
        matches!(self, DictChoice::S | DictChoice::L | DictChoice::E)
    }
}

impl FromStr for DictChoice {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            DictChoice::A,
            DictChoice::B,
            DictChoice::Hydro,
            DictChoice::S,
            DictChoice::L,
            DictChoice::E,
        ]
        .into_iter()
        .find(|d| d.as_str() == s)
        .ok_or_else(|| format!("unknown dictionary '{s}' (expected A, B, hydro, S, L or E)"))
    }
}

/// A fully defaulted and validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub kind: Kind,
    pub chain: ChainSpec<f64>,
    pub quench: Option<QuenchSpec<f64>>,
    pub dictionaries: Vec<DictChoice>,
    pub dt: f64,
    pub t_max: f64,
    pub record_every: usize,
    pub window_duration: f64,
    pub window_stride: f64,
    /// Differencing intervals; `0` selects exact derivatives.
    pub dt_cg: Vec<f64>,
    pub ensemble_size: usize,
    pub base_seed: u64,
    pub rcond: f64,
    /// Site whose density is reconstructed by `validate`.
    pub observe_site: usize,
    pub reconstruct_steps: usize,
    /// Chain length of the full-basis quench control; `0` disables it.
    pub control_sites: usize,
    pub oracle_max_n: usize,
    pub t0: f64,
    pub t1: f64,
    pub bulk_margin: usize,
    pub output_dir: String,
}

/// Default number of ensemble members when a kind has no desk-scale value.
pub const DEFAULT_ENSEMBLE: usize = 500;
/// `dt_cg` values of the default coarse-graining sweep.
pub const SWEEP_DT_CG: [f64; 6] = [0.0, 0.01, 0.025, 0.04, 0.1, 0.2];

impl ExperimentPlan {
    /// Defaults for `kind` before any configuration is applied.
    pub fn defaults(kind: Kind) -> Self {
        let base = ExperimentPlan {
            kind,
            chain: ChainSpec::new(6),
            quench: None,
            dictionaries: vec![DictChoice::A],
            dt: 0.002,
            t_max: 0.6,
            record_every: 1,
            window_duration: 0.6,
            window_stride: 0.1,
            dt_cg: vec![0.0],
            ensemble_size: DEFAULT_ENSEMBLE,
            base_seed: 20240601,
            rcond: DEFAULT_RCOND,
            observe_site: 3,
            reconstruct_steps: 2000,
            control_sites: 6,
            oracle_max_n: 5,
            t0: 0.3,
            t1: 0.3,
            bulk_margin: spinhydro_core::hydro::DEFAULT_BULK_MARGIN,
            output_dir: "out".into(),
        };
        match kind {
            Kind::Validate => ExperimentPlan {
                dictionaries: vec![DictChoice::B, DictChoice::A],
                dt_cg: vec![0.0, 0.04],
                ensemble_size: 1,
                ..base
            },
            Kind::Quench => ExperimentPlan {
                chain: ChainSpec::new(10),
                quench: Some(QuenchSpec { cut_after_site: 1, t_q: 4.0 }),
                dictionaries: vec![DictChoice::S, DictChoice::L, DictChoice::E],
                t_max: 6.0,
                ensemble_size: 16,
                t0: 0.3,
                t1: 5.7,
                ..base
            },
            Kind::Hydro | Kind::Sweep => ExperimentPlan {
                chain: ChainSpec::new(12),
                dictionaries: vec![DictChoice::Hydro],
                dt: 0.0025,
                t_max: 3.0,
                window_duration: 1.0,
                dt_cg: SWEEP_DT_CG.to_vec(),
                ensemble_size: 32,
                t0: 1.0,
                t1: 2.5,
                ..base
            },
            Kind::Oracle => ExperimentPlan { ensemble_size: 1, ..base },
            Kind::DumpDictionary => ExperimentPlan {
                dictionaries: vec![DictChoice::A, DictChoice::Hydro],
                ensemble_size: 1,
                ..base
            },
        }
    }

    pub fn schedule(&self) -> EvolutionSchedule<f64> {
        let mut s = EvolutionSchedule::new(self.dt, self.n_steps());
        s.record_every = self.record_every;
        s
    }

    pub fn n_steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }

    /// Spacing of recorded samples.
    pub fn spacing(&self) -> f64 {
        self.dt * self.record_every as f64
    }

    pub fn window(&self, dt_cg: f64) -> WindowSpec<f64> {
        let mode = if dt_cg == 0.0 { DerivMode::Exact } else { DerivMode::Finite(dt_cg) };
        WindowSpec::new(self.window_duration, self.window_stride, mode)
    }

    pub fn samples_per_window(&self) -> usize {
        self.window(0.0).samples(self.spacing()).expect("validated plan")
    }

    /// Step at which the quench switches on, snapped down to the grid.
    pub fn quench_step(&self) -> Option<usize> {
        self.quench.map(|q| snap_down(q.t_q, self.dt))
    }

    /// `t_q` as given and as applied, when they differ.
    pub fn quench_snap(&self) -> Option<(f64, f64)> {
        let q = self.quench?;
        let applied = self.quench_step()? as f64 * self.dt;
        (applied != q.t_q).then_some((q.t_q, applied))
    }

    pub fn hamiltonian_label(&self) -> String {
        format!(
            "J={} Delta={} J2={}",
            format_f64(self.chain.j),
            format_f64(self.chain.delta),
            format_f64(self.chain.j2)
        )
    }
}

fn snap_down(t: f64, dt: f64) -> usize {
    let k = t / dt;
    let near = k.round();
    if (k - near).abs() <= 1e-9 * near.max(1.0) {
        near as usize
    } else {
        k.floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Num(f64);

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            I(i64),
            F(f64),
        }
        match Raw::deserialize(d).map_err(|_| serde::de::Error::custom("expected a number"))? {
            Raw::I(i) => Ok(Num(i as f64)),
            Raw::F(f) => Ok(Num(f)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Seed(u64);

impl<'de> Deserialize<'de> for Seed {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            I(i64),
            S(String),
        }
        let err = || serde::de::Error::custom("expected an unsigned 64-bit integer");
        match Raw::deserialize(d).map_err(|_| err())? {
            Raw::I(i) => u64::try_from(i).map(Seed).map_err(|_| err()),
            Raw::S(s) => s.parse().map(Seed).map_err(|_| err()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct NumList(Vec<f64>);

impl<'de> Deserialize<'de> for NumList {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            One(Num),
            Many(Vec<Num>),
        }
        match Raw::deserialize(d).map_err(|_| serde::de::Error::custom("expected a number or a list of numbers"))? {
            Raw::One(n) => Ok(NumList(vec![n.0])),
            Raw::Many(v) => Ok(NumList(v.into_iter().map(|n| n.0).collect())),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    chain: Option<ChainSection>,
    schedule: Option<ScheduleSection>,
    window: Option<WindowSection>,
    ensemble: Option<EnsembleSection>,
    experiment: Option<ExperimentSection>,
    analysis: Option<AnalysisSection>,
    output: Option<OutputSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainSection {
    n_sites: Option<usize>,
    j: Option<Num>,
    delta: Option<Num>,
    j2: Option<Num>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleSection {
    dt: Option<Num>,
    t_max: Option<Num>,
    record_every: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindowSection {
    duration: Option<Num>,
    stride: Option<Num>,
    dt_cg: Option<NumList>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnsembleSection {
    size: Option<usize>,
    base_seed: Option<Seed>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    kind: Option<String>,
    dictionaries: Option<Vec<String>>,
    cut_after_site: Option<usize>,
    t_q: Option<Num>,
    rcond: Option<Num>,
    observe_site: Option<usize>,
    reconstruct_steps: Option<usize>,
    control_sites: Option<usize>,
    oracle_max_n: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalysisSection {
    t0: Option<Num>,
    t1: Option<Num>,
    bulk_margin: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<String>,
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key` inside `[section]`, if present.
fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.split(']').next()) {
            current = name.trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

struct Checker<'a> {
    text: &'a str,
}

impl Checker<'_> {
    fn fail(&self, section: &str, key: &str, msg: impl fmt::Display) -> RunError {
        let at = match key_line(self.text, section, key) {
            Some(l) => format!("line {l}: "),
            None => String::new(),
        };
        RunError::Config(format!("{at}{section}.{key}: {msg}"))
    }

    fn ensure(&self, ok: bool, section: &str, key: &str, msg: impl fmt::Display) -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(self.fail(section, key, msg))
        }
    }
}

/// Parses `text`; the kind comes from `[experiment] kind` (default `validate`).
pub fn parse_config(text: &str) -> Result<ExperimentPlan> {
    parse_config_as(text, None)
}

/// Parses `text` for a run of `kind`. A conflicting `kind` key is an error.
pub fn parse_config_as(text: &str, kind: Option<Kind>) -> Result<ExperimentPlan> {
    let doc: Document = toml::from_str(text).map_err(|e| {
        let at = e.span().map(|s| format!("line {}: ", line_of_offset(text, s.start))).unwrap_or_default();
        RunError::Config(format!("{at}{}", e.message()))
    })?;
    let ck = Checker { text };
    let exp = doc.experiment.unwrap_or_default();
    let written = exp
        .kind
        .as_deref()
        .map(|k| k.parse::<Kind>().map_err(|e| ck.fail("experiment", "kind", e)))
        .transpose()?;
    let kind = match (kind, written) {
        (Some(a), Some(b)) if a != b => {
            return Err(ck.fail("experiment", "kind", format!("file says '{b}' but the run is '{a}'")))
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => Kind::Validate,
    };
    let mut p = ExperimentPlan::defaults(kind);

    let chain = doc.chain.unwrap_or_default();
    if let Some(n) = chain.n_sites {
        p.chain.n_sites = n;
    }
    if let Some(v) = chain.j {
        p.chain.j = v.0;
    }
    if let Some(v) = chain.delta {
        p.chain.delta = v.0;
    }
    if let Some(v) = chain.j2 {
        p.chain.j2 = v.0;
    }
    let sched = doc.schedule.unwrap_or_default();
    if let Some(v) = sched.dt {
        p.dt = v.0;
    }
    if let Some(v) = sched.t_max {
        p.t_max = v.0;
    }
    if let Some(v) = sched.record_every {
        p.record_every = v;
    }
    let win = doc.window.unwrap_or_default();
    if let Some(v) = win.duration {
        p.window_duration = v.0;
    }
    if let Some(v) = win.stride {
        p.window_stride = v.0;
    }
    if let Some(v) = win.dt_cg {
        p.dt_cg = v.0;
    }
    let ens = doc.ensemble.unwrap_or_default();
    if let Some(v) = ens.size {
        p.ensemble_size = v;
    }
    if let Some(v) = ens.base_seed {
        p.base_seed = v.0;
    }
    if let Some(names) = exp.dictionaries {
        p.dictionaries = names
            .iter()
            .map(|s| s.parse().map_err(|e| ck.fail("experiment", "dictionaries", e)))
            .collect::<Result<_>>()?;
    }
    if kind == Kind::Quench {
        let q = p.quench.get_or_insert(QuenchSpec { cut_after_site: 1, t_q: 4.0 });
        if let Some(v) = exp.cut_after_site {
            q.cut_after_site = v;
        }
        if let Some(v) = exp.t_q {
            q.t_q = v.0;
        }
    }
    if let Some(v) = exp.rcond {
        p.rcond = v.0;
    }
    if let Some(v) = exp.observe_site {
        p.observe_site = v;
    }
    if let Some(v) = exp.reconstruct_steps {
        p.reconstruct_steps = v;
    }
    if let Some(v) = exp.control_sites {
        p.control_sites = v;
    }
    if let Some(v) = exp.oracle_max_n {
        p.oracle_max_n = v;
    }
    let an = doc.analysis.unwrap_or_default();
    if kind == Kind::Quench && an.t1.is_none() {
        p.t1 = p.t_max - p.window_duration / 2.0;
    }
    if kind == Kind::Quench && an.t0.is_none() {
        p.t0 = p.window_duration / 2.0;
    }
    if let Some(v) = an.t0 {
        p.t0 = v.0;
    }
    if let Some(v) = an.t1 {
        p.t1 = v.0;
    }
    if let Some(v) = an.bulk_margin {
        p.bulk_margin = v;
    }
    if let Some(d) = doc.output.unwrap_or_default().dir {
        p.output_dir = d;
    }
    check_plan(&p, &ck)?;
    Ok(p)
}

/// Re-checks a plan built or modified in code (e.g. by CLI overrides).
pub fn validate_plan(plan: &ExperimentPlan) -> Result<()> {
    check_plan(plan, &Checker { text: "" })
}

fn check_plan(p: &ExperimentPlan, ck: &Checker) -> Result<()> {
    let n = p.chain.n_sites;
    ck.ensure(
        (2..=MAX_STATE_SITES).contains(&n),
        "chain",
        "n_sites",
        format!("must lie in 2..={MAX_STATE_SITES}, got {n}"),
    )?;
    for (key, v) in [("j", p.chain.j), ("delta", p.chain.delta), ("j2", p.chain.j2)] {
        ck.ensure(v.is_finite(), "chain", key, "must be finite")?;
    }
    ck.ensure(p.dt.is_finite() && p.dt > 0.0, "schedule", "dt", "must be positive")?;
    ck.ensure(p.t_max.is_finite() && p.t_max > 0.0, "schedule", "t_max", "must be positive")?;
    ck.ensure(p.record_every >= 1, "schedule", "record_every", "must be at least 1")?;
    let steps = p.t_max / p.dt;
    ck.ensure(
        (steps - steps.round()).abs() <= 1e-6 * steps.round().max(1.0),
        "schedule",
        "t_max",
        format!("{} is not a whole number of steps of {}", format_f64(p.t_max), format_f64(p.dt)),
    )?;
    let spacing = p.spacing();
    ck.ensure(p.window_duration.is_finite() && p.window_duration > 0.0, "window", "duration", "must be positive")?;
    ck.ensure(p.window_stride.is_finite() && p.window_stride > 0.0, "window", "stride", "must be positive")?;
    let exact = p.window(0.0);
    exact.samples(spacing).map_err(|e| ck.fail("window", "duration", e))?;
    exact.stride_samples(spacing).map_err(|e| ck.fail("window", "stride", e))?;
    ck.ensure(
        p.window_duration <= p.t_max * (1.0 + 1e-12),
        "window",
        "duration",
        "window is longer than the simulated time",
    )?;
    ck.ensure(!p.dt_cg.is_empty(), "window", "dt_cg", "needs at least one value")?;
    for &d in &p.dt_cg {
        ck.ensure(d.is_finite() && d >= 0.0, "window", "dt_cg", "values must be non-negative")?;
        p.window(d).validate(spacing).map_err(|e| ck.fail("window", "dt_cg", e))?;
    }
    ck.ensure(p.ensemble_size >= 1, "ensemble", "size", "must be at least 1")?;
    ck.ensure(!p.dictionaries.is_empty(), "experiment", "dictionaries", "needs at least one entry")?;
    for d in &p.dictionaries {
        match d {
            DictChoice::B => ck.ensure(
                n <= FULL_PAULI_CAP,
                "experiment",
                "dictionaries",
                format!("the full basis B is capped at {FULL_PAULI_CAP} sites"),
            )?,
            DictChoice::Hydro => ck.ensure(n >= 3, "experiment", "dictionaries", "hydro needs 3 sites")?,
            d if d.needs_quench() => ck.ensure(
                p.kind == Kind::Quench,
                "experiment",
                "dictionaries",
                format!("{} is only defined for quench runs", d.as_str()),
            )?,
            _ => {}
        }
    }
    ck.ensure(
        p.rcond.is_finite() && p.rcond > 0.0 && p.rcond < 1.0,
        "experiment",
        "rcond",
        "must lie in (0, 1)",
    )?;
    ck.ensure(p.observe_site < n, "experiment", "observe_site", format!("site outside a {n}-site chain"))?;
    ck.ensure(
        (2..=8).contains(&p.oracle_max_n),
        "experiment",
        "oracle_max_n",
        "must lie in 2..=8",
    )?;
    ck.ensure(
        p.control_sites == 0 || (3..=FULL_PAULI_CAP).contains(&p.control_sites),
        "experiment",
        "control_sites",
        format!("must be 0 or lie in 3..={FULL_PAULI_CAP}"),
    )?;
    match (p.kind, p.quench) {
        (Kind::Quench, Some(q)) => {
            ck.ensure(
                q.cut_after_site + 1 < n,
                "experiment",
                "cut_after_site",
                format!("leaves no environment in a {n}-site chain"),
            )?;
            ck.ensure(
                q.t_q.is_finite() && q.t_q >= 0.0 && q.t_q < p.t_max,
                "experiment",
                "t_q",
                "must lie in [0, t_max)",
            )?;
            if p.control_sites > 0 {
                ck.ensure(
                    q.cut_after_site + 1 < p.control_sites.min(n),
                    "experiment",
                    "control_sites",
                    "control chain leaves no environment",
                )?;
            }
        }
        (Kind::Quench, None) => return Err(ck.fail("experiment", "t_q", "quench runs need a quench")),
        (_, Some(_)) => return Err(RunError::Config("only quench runs carry a quench".into())),
        _ => {}
    }
    if matches!(p.kind, Kind::Hydro | Kind::Sweep) {
        ck.ensure(
            p.dictionaries.contains(&DictChoice::Hydro),
            "experiment",
            "dictionaries",
            "hydro and sweep runs need the hydro dictionary",
        )?;
        ck.ensure(
            2 * p.bulk_margin < n,
            "analysis",
            "bulk_margin",
            format!("leaves no bulk in a {n}-site chain"),
        )?;
    }
    ck.ensure(p.t0.is_finite(), "analysis", "t0", "must be finite")?;
    ck.ensure(p.t1.is_finite() && p.t1 >= p.t0, "analysis", "t1", "must be at least t0")?;
    ck.ensure(!p.output_dir.is_empty(), "output", "dir", "must not be empty")?;
    Ok(())
}

fn toml_string(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if c.is_control() => {
                let _ = write!(out, "\\u{:04X}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Writes every field explicitly; [`parse_config`] of the result returns `plan`.
pub fn render_config(plan: &ExperimentPlan) -> String {
    let f = |v: f64| format_f64(v);
    let mut s = String::new();
    let _ = writeln!(s, "[chain]");
    let _ = writeln!(s, "n_sites = {}", plan.chain.n_sites);
    let _ = writeln!(s, "j = {}", f(plan.chain.j));
    let _ = writeln!(s, "delta = {}", f(plan.chain.delta));
    let _ = writeln!(s, "j2 = {}", f(plan.chain.j2));
    let _ = writeln!(s, "\n[schedule]");
    let _ = writeln!(s, "dt = {}", f(plan.dt));
    let _ = writeln!(s, "t_max = {}", f(plan.t_max));
    let _ = writeln!(s, "record_every = {}", plan.record_every);
    let _ = writeln!(s, "\n[window]");
    let _ = writeln!(s, "duration = {}", f(plan.window_duration));
    let _ = writeln!(s, "stride = {}", f(plan.window_stride));
    let list: Vec<String> = plan.dt_cg.iter().map(|&v| f(v)).collect();
    let _ = writeln!(s, "dt_cg = [{}]", list.join(", "));
    let _ = writeln!(s, "\n[ensemble]");
    let _ = writeln!(s, "size = {}", plan.ensemble_size);
    if plan.base_seed <= i64::MAX as u64 {
        let _ = writeln!(s, "base_seed = {}", plan.base_seed);
    } else {
        let _ = writeln!(s, "base_seed = \"{}\"", plan.base_seed);
    }
    let _ = writeln!(s, "\n[experiment]");
    let _ = writeln!(s, "kind = \"{}\"", plan.kind);
    let names: Vec<String> = plan.dictionaries.iter().map(|d| format!("\"{}\"", d.as_str())).collect();
    let _ = writeln!(s, "dictionaries = [{}]", names.join(", "));
    if let Some(q) = plan.quench {
        let _ = writeln!(s, "cut_after_site = {}", q.cut_after_site);
        let _ = writeln!(s, "t_q = {}", f(q.t_q));
    }
    let _ = writeln!(s, "rcond = {}", f(plan.rcond));
    let _ = writeln!(s, "observe_site = {}", plan.observe_site);
    let _ = writeln!(s, "reconstruct_steps = {}", plan.reconstruct_steps);
    let _ = writeln!(s, "control_sites = {}", plan.control_sites);
    let _ = writeln!(s, "oracle_max_n = {}", plan.oracle_max_n);
    let _ = writeln!(s, "\n[analysis]");
    let _ = writeln!(s, "t0 = {}", f(plan.t0));
    let _ = writeln!(s, "t1 = {}", f(plan.t1));
    let _ = writeln!(s, "bulk_margin = {}", plan.bulk_margin);
    let _ = writeln!(s, "\n[output]");
    let _ = writeln!(s, "dir = {}", toml_string(&plan.output_dir));
    s
}
