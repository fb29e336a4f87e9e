//! Hydrodynamic coefficients read off a fitted generator on a dictionary
//! holding densities `Z_i` and currents `J_k`.
//!
//! Row `J_k` of `L` is read as `J̇_k ≈ -c² (Z_{k+1} - Z_k) - γ J_k + ν (J_{k-1} + J_{k+1})`,
//! with the two density and two neighbour elements averaged.

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::gedmd::{assemble_block, fit_liouvillian, LiouvillianEstimate, WindowSpec};
use crate::pauli::Role;
use crate::propagator::TrajectoryRecord;
use crate::scalar::{lit, to_f64, Real};

/// `|γ|` below this leaves `D = c²/γ` undefined.
pub const GAMMA_FLOOR: f64 = 1e-12;

/// Default number of sites trimmed from each chain edge before aggregating.
pub const DEFAULT_BULK_MARGIN: usize = 2;

/// Per-site coefficients for one window. Index `k` of `c2`, `gamma`, `nu`
/// and `d` refers to the current on bond `(k, k + 1)`; `dz` is per site.
#[derive(Debug, Clone, PartialEq)]
pub struct HydroProfile<T> {
    pub t_center: T,
    pub c2: Vec<T>,
    pub gamma: Vec<T>,
    /// Needs both neighbouring currents: `None` at the chain ends.
    pub nu: Vec<Option<T>>,
    pub d: Vec<Option<T>>,
    pub dz: Vec<T>,
}

impl<T: Real> HydroProfile<T> {
    pub fn n_sites(&self) -> usize {
        self.dz.len()
    }
}

/// One value per coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSet<T> {
    pub c2: T,
    pub gamma: T,
    pub nu: T,
    pub d: Option<T>,
    pub dz: T,
}

/// Spatial aggregates of a [`HydroProfile`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BulkSummary<T> {
    pub t_center: T,
    pub median: CoefficientSet<T>,
    pub mean: CoefficientSet<T>,
}

fn required_rows<T: Real>(dict: &Dictionary<T>) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = dict.n_sites();
    let lookup = |role: Role, count: usize| -> Result<Vec<usize>> {
        (0..count)
            .map(|k| {
                dict.row(role, k).ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "dictionary '{}' has no {} entry for slot {k}",
                        dict.name(),
                        role.as_str()
                    ))
                })
            })
            .collect()
    };
    Ok((lookup(Role::Density, n)?, lookup(Role::Current, n - 1)?))
}

/// Reads `c²`, `γ`, `ν`, `D` and the density self-rate off `L`.
pub fn extract_coefficients<T: Real>(est: &LiouvillianEstimate<T>, dict: &Dictionary<T>) -> Result<HydroProfile<T>> {
    if est.n_obs != dict.len() {
        return Err(Error::Dimension(format!(
            "estimate has {} rows, dictionary '{}' has {}",
            est.n_obs,
            dict.name(),
            dict.len()
        )));
    }
    if dict.n_sites() < 2 {
        return Err(Error::InvalidArgument("need at least one bond".into()));
    }
    let (z, j) = required_rows(dict)?;
    let half = lit::<T>(0.5);
    let n_bonds = j.len();
    let l = |a: usize, b: usize| est.element(a, b);

    let c2: Vec<T> = (0..n_bonds).map(|k| half * (l(j[k], z[k]) - l(j[k], z[k + 1]))).collect();
    let gamma: Vec<T> = (0..n_bonds).map(|k| -l(j[k], j[k])).collect();
    let nu = (0..n_bonds)
        .map(|k| (k >= 1 && k + 1 < n_bonds).then(|| half * (l(j[k], j[k - 1]) + l(j[k], j[k + 1]))))
        .collect();
    let floor = lit::<T>(GAMMA_FLOOR);
    let d = c2
        .iter()
        .zip(&gamma)
        .map(|(&c, &g)| (g.abs() >= floor).then(|| c / g))
        .collect();
    let dz = z.iter().map(|&r| -l(r, r) * half).collect();
    Ok(HydroProfile {
        t_center: est.t_center,
        c2,
        gamma,
        nu,
        d,
        dz,
    })
}

/// Indices `margin ..= n_sites - 1 - margin`, clipped to `len`.
fn bulk_range(n_sites: usize, margin: usize, len: usize) -> std::ops::Range<usize> {
    let hi = (n_sites.saturating_sub(margin)).min(len);
    margin.min(hi)..hi
}

pub fn median<T: Real>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| to_f64(*a).total_cmp(&to_f64(*b)));
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) * lit(0.5)
    })
}

pub fn mean<T: Real>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let sum = values.iter().fold(T::zero(), |s, &v| s + v);
    Some(sum / lit(values.len() as f64))
}

/// Median and mean over sites `margin ..= n - 1 - margin`; currents use the
/// same index range.
pub fn bulk_median<T: Real>(profile: &HydroProfile<T>, margin: usize) -> Result<BulkSummary<T>> {
    let n = profile.n_sites();
    if 2 * margin >= n {
        return Err(Error::InvalidArgument(format!(
            "margin {margin} leaves no bulk in a {n}-site chain"
        )));
    }
    let sites = bulk_range(n, margin, n);
    let bonds = bulk_range(n, margin, profile.c2.len());
    let nu: Vec<T> = profile.nu[bonds.clone()].iter().flatten().copied().collect();
    let d: Vec<T> = profile.d[bonds.clone()].iter().flatten().copied().collect();
    let empty = || Error::InvalidArgument(format!("margin {margin} leaves no bulk currents"));
    let agg = |f: fn(&[T]) -> Option<T>| -> Result<CoefficientSet<T>> {
        Ok(CoefficientSet {
            c2: f(&profile.c2[bonds.clone()]).ok_or_else(empty)?,
            gamma: f(&profile.gamma[bonds.clone()]).ok_or_else(empty)?,
            nu: f(&nu).ok_or_else(empty)?,
            d: f(&d),
            dz: f(&profile.dz[sites.clone()]).ok_or_else(empty)?,
        })
    };
    Ok(BulkSummary {
        t_center: profile.t_center,
        median: agg(median)?,
        mean: agg(mean)?,
    })
}

fn in_span<T: Real>(t: T, t0: T, t1: T) -> bool {
    let eps = lit::<T>(1e-9);
    t >= t0 - eps && t <= t1 + eps
}

/// Values of `pick` over windows centred in `[t0, t1]`.
pub fn windowed<T: Real>(
    series: &[(T, CoefficientSet<T>)],
    t0: T,
    t1: T,
    pick: impl Fn(&CoefficientSet<T>) -> Option<T>,
) -> Vec<T> {
    series
        .iter()
        .filter(|(t, _)| in_span(*t, t0, t1))
        .filter_map(|(_, c)| pick(c))
        .collect()
}

/// Arithmetic mean over windows centred in `[t0, t1]`.
pub fn time_average<T: Real>(series: &[(T, CoefficientSet<T>)], t0: T, t1: T) -> Result<CoefficientSet<T>> {
    let count = series.iter().filter(|(t, _)| in_span(*t, t0, t1)).count();
    if count == 0 {
        return Err(Error::Window(format!("no window centred in [{t0}, {t1}]")));
    }
    let avg = |pick: fn(&CoefficientSet<T>) -> Option<T>| mean(&windowed(series, t0, t1, pick));
    Ok(CoefficientSet {
        c2: avg(|c| Some(c.c2)).expect("nonempty"),
        gamma: avg(|c| Some(c.gamma)).expect("nonempty"),
        nu: avg(|c| Some(c.nu)).expect("nonempty"),
        d: avg(|c| c.d),
        dz: avg(|c| Some(c.dz)).expect("nonempty"),
    })
}

/// Fitted profile and its bulk summary for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct HydroWindow<T> {
    pub profile: HydroProfile<T>,
    pub bulk: BulkSummary<T>,
}

/// Fits every window centred at `centers` and extracts coefficients.
pub fn hydro_series<T: Real>(
    records: &[TrajectoryRecord<T>],
    dict: &Dictionary<T>,
    window: &WindowSpec<T>,
    centers: &[T],
    margin: usize,
    rcond: T,
) -> Result<Vec<HydroWindow<T>>> {
    centers
        .iter()
        .map(|&t| {
            let block = assemble_block(records, window, t)?;
            let est = fit_liouvillian(&block, rcond)?;
            let profile = extract_coefficients(&est, dict)?;
            let bulk = bulk_median(&profile, margin)?;
            Ok(HydroWindow { profile, bulk })
        })
        .collect()
}

/// One coarse-graining interval; `dt_cg = 0` is the exact-derivative fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry<T> {
    pub dt_cg: T,
    pub windows: Vec<HydroWindow<T>>,
    /// Time mean of the bulk medians.
    pub average: CoefficientSet<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoarseGrainSweep<T> {
    pub t0: T,
    pub t1: T,
    pub entries: Vec<SweepEntry<T>>,
}

/// Window centres of `window` inside `[t0, t1]` on the records' grid.
pub fn centers_in<T: Real>(records: &[TrajectoryRecord<T>], window: &WindowSpec<T>, t0: T, t1: T) -> Result<Vec<T>> {
    let first = records
        .first()
        .ok_or_else(|| Error::Window("no trajectory records".into()))?;
    Ok(window
        .centers(&first.times)?
        .into_iter()
        .filter(|&t| in_span(t, t0, t1))
        .collect())
}

/// One sweep point: refits every window in `[t0, t1]` at `dt_cg`.
pub fn sweep_entry<T: Real>(
    records: &[TrajectoryRecord<T>],
    dict: &Dictionary<T>,
    window: &WindowSpec<T>,
    dt_cg: T,
    t0: T,
    t1: T,
    margin: usize,
    rcond: T,
) -> Result<SweepEntry<T>> {
    use crate::gedmd::DerivMode;
    let mode = if dt_cg == T::zero() {
        DerivMode::Exact
    } else {
        DerivMode::Finite(dt_cg)
    };
    let w = window.with_deriv(mode);
    let centers = centers_in(records, &w, t0, t1)?;
    let windows = hydro_series(records, dict, &w, &centers, margin, rcond)?;
    let series: Vec<_> = windows.iter().map(|w| (w.bulk.t_center, w.bulk.median)).collect();
    let average = time_average(&series, t0, t1)?;
    Ok(SweepEntry {
        dt_cg,
        windows,
        average,
    })
}

/// [`sweep_entry`] for each interval in order.
#[allow(clippy::too_many_arguments)]
pub fn sweep_coarse_graining<T: Real>(
    records: &[TrajectoryRecord<T>],
    dict: &Dictionary<T>,
    window: &WindowSpec<T>,
    dt_cg: &[T],
    t0: T,
    t1: T,
    margin: usize,
    rcond: T,
) -> Result<CoarseGrainSweep<T>> {
    let entries = dt_cg
        .iter()
        .map(|&dt| sweep_entry(records, dict, window, dt, t0, t1, margin, rcond))
        .collect::<Result<_>>()?;
    Ok(CoarseGrainSweep { t0, t1, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::dict_hydro;
    use nalgebra::DMatrix;

    fn synthetic(n: usize) -> (Dictionary<f64>, DMatrix<f64>) {
        let dict = dict_hydro::<f64>(n).unwrap();
        let mut l = DMatrix::zeros(dict.len(), dict.len());
        for k in 0..n - 1 {
            let jk = dict.row(Role::Current, k).unwrap();
            l[(jk, dict.row(Role::Density, k).unwrap())] = 4.0;
            l[(jk, dict.row(Role::Density, k + 1).unwrap())] = -4.0;
            l[(jk, jk)] = -0.5;
            if k > 0 {
                l[(jk, dict.row(Role::Current, k - 1).unwrap())] = 0.3;
            }
            if k + 2 < n {
                l[(jk, dict.row(Role::Current, k + 1).unwrap())] = 0.3;
            }
        }
        (dict, l)
    }

    #[test]
    fn synthetic_generator() {
        let (dict, l) = synthetic(7);
        let est = LiouvillianEstimate::from_matrix(l, 1.0).unwrap();
        let p = extract_coefficients(&est, &dict).unwrap();
        assert_eq!(p.c2.len(), 6);
        for k in 0..6 {
            assert_eq!(p.c2[k], 4.0);
            assert_eq!(p.gamma[k], 0.5);
            assert_eq!(p.d[k], Some(8.0));
        }
        assert_eq!(p.nu[0], None);
        assert_eq!(p.nu[5], None);
        assert!(p.nu[1..5].iter().all(|v| (v.unwrap() - 0.3).abs() < 1e-15));
        assert!(p.dz.iter().all(|&v| v == 0.0));
        let b = bulk_median(&p, 2).unwrap();
        assert_eq!(b.median.c2, 4.0);
        assert_eq!(b.median.d, Some(8.0));
    }

    #[test]
    fn zero_generator() {
        let dict = dict_hydro::<f64>(5).unwrap();
        let est = LiouvillianEstimate::from_matrix(DMatrix::zeros(dict.len(), dict.len()), 0.0).unwrap();
        let p = extract_coefficients(&est, &dict).unwrap();
        assert!(p.c2.iter().chain(&p.gamma).chain(&p.dz).all(|&v| v == 0.0));
        assert!(p.d.iter().all(Option::is_none));
        assert!(p.nu.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn missing_roles() {
        let dict = crate::dictionary::dict_macro_a::<f64>(4).unwrap();
        let est = LiouvillianEstimate::from_matrix(DMatrix::zeros(dict.len(), dict.len()), 0.0).unwrap();
        assert!(extract_coefficients(&est, &dict).is_err());
    }

    fn flat_profile(n: usize, v: f64) -> HydroProfile<f64> {
        HydroProfile {
            t_center: 0.0,
            c2: vec![v; n - 1],
            gamma: vec![v; n - 1],
            nu: (0..n - 1).map(|k| (k >= 1 && k + 2 < n).then_some(v)).collect(),
            d: vec![Some(1.0); n - 1],
            dz: vec![v; n],
        }
    }

    #[test]
    fn bulk_of_constant_profile() {
        let b = bulk_median(&flat_profile(12, 2.5), 2).unwrap();
        assert_eq!(b.median.c2, 2.5);
        assert_eq!(b.median.nu, 2.5);
        assert_eq!(b.mean.dz, 2.5);
    }

    #[test]
    fn bulk_sites_at_twenty() {
        let mut p = flat_profile(20, 0.0);
        for (i, v) in p.dz.iter_mut().enumerate() {
            *v = i as f64;
        }
        // sites 2..=17: median of 2..=17 is 9.5
        assert_eq!(bulk_median(&p, 2).unwrap().median.dz, 9.5);
        assert_eq!(bulk_range(20, 2, 20).len(), 16);
        assert_eq!(bulk_range(20, 2, 19).len(), 16);
    }

    #[test]
    fn median_resists_outlier() {
        let mut p = flat_profile(12, 1.0);
        p.gamma[5] = 100.0;
        let b = bulk_median(&p, 2).unwrap();
        assert_eq!(b.median.gamma, 1.0);
        assert!(b.mean.gamma > 10.0);
    }

    #[test]
    fn empty_bulk() {
        assert!(bulk_median(&flat_profile(4, 1.0), 2).is_err());
    }

    fn set(v: f64) -> CoefficientSet<f64> {
        CoefficientSet {
            c2: v,
            gamma: v,
            nu: v,
            d: None,
            dz: v,
        }
    }

    #[test]
    fn time_average_ramp() {
        let series: Vec<_> = (0..=30).map(|k| {
            let t = k as f64 * 0.1;
            (t, set(2.0 + 3.0 * t))
        }).collect();
        let avg = time_average(&series, 1.0, 2.5).unwrap();
        assert!((avg.gamma - (2.0 + 3.0 * 1.75)).abs() < 1e-12);
        assert_eq!(avg.d, None);
        let flat: Vec<_> = series.iter().map(|(t, _)| (*t, set(0.7))).collect();
        assert!((time_average(&flat, 0.0, 3.0).unwrap().c2 - 0.7).abs() < 1e-15);
        assert!(time_average(&series, 5.0, 6.0).is_err());
    }
}
