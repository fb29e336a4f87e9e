//! Generator regression over sliding windows of recorded trajectories.
//!
//! A window of snapshots `x` (observables × samples) and derivatives `ẋ` is
//! fitted by `L = ẋ · pinv(x)` with a truncated SVD. With `x = U Σ Vᵀ`
//! (retained part only) the estimate is stored in factored form
//! `L = W Uᵀ`, `W = ẋ V Σ⁻¹`, so dictionaries far wider than the sample
//! count never need the dense `n_obs × n_obs` matrix.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, ExpmRoute};
use crate::propagator::TrajectoryRecord;
use crate::scalar::{lit, to_f64, Real, C};

/// Default relative singular-value cutoff of the pseudo-inverse.
pub const DEFAULT_RCOND: f64 = 1e-10;

/// How the derivative column paired with each snapshot is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivMode<T> {
    /// Recorded commutator derivatives.
    Exact,
    /// Forward difference over `dt_cg`, paired with the left sample.
    Finite(T),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec<T> {
    pub duration: T,
    pub stride: T,
    pub deriv: DerivMode<T>,
}

/// `value / spacing` as an integer, or an error naming `what`.
fn multiple_of<T: Real>(value: T, spacing: T, what: &str) -> Result<usize> {
    let q = to_f64(value / spacing);
    let k = q.round();
    if !q.is_finite() || k < 1.0 || (q - k).abs() > 1e-6 * k.max(1.0) {
        return Err(Error::Window(format!(
            "{what} = {value} is not a positive integer multiple of the sample spacing {spacing}"
        )));
    }
    Ok(k as usize)
}

impl<T: Real> WindowSpec<T> {
    pub fn new(duration: T, stride: T, deriv: DerivMode<T>) -> Self {
        WindowSpec {
            duration,
            stride,
            deriv,
        }
    }

    /// `duration = 0.6`, `stride = 0.1`.
    pub fn exact_default() -> Self {
        WindowSpec::new(lit(0.6), lit(0.1), DerivMode::Exact)
    }

    pub fn with_deriv(self, deriv: DerivMode<T>) -> Self {
        WindowSpec { deriv, ..self }
    }

    pub fn validate(&self, spacing: T) -> Result<()> {
        if !(self.duration > T::zero()) {
            return Err(Error::Window("window duration must be positive".into()));
        }
        if !(self.stride > T::zero()) {
            return Err(Error::Window("window stride must be positive".into()));
        }
        if !(spacing > T::zero()) {
            return Err(Error::Window("sample spacing must be positive".into()));
        }
        self.samples(spacing)?;
        self.stride_samples(spacing)?;
        if let DerivMode::Finite(dt_cg) = self.deriv {
            if !(dt_cg > T::zero()) {
                return Err(Error::Window("dt_cg must be positive in finite-difference mode".into()));
            }
            multiple_of(dt_cg, spacing, "dt_cg")?;
            if !(dt_cg < self.duration) {
                return Err(Error::Window(format!(
                    "dt_cg = {dt_cg} must be shorter than the window ({})",
                    self.duration
                )));
            }
        }
        Ok(())
    }

    /// Snapshots per member in a window.
    pub fn samples(&self, spacing: T) -> Result<usize> {
        let q = to_f64(self.duration / spacing).round();
        if !(q >= 1.0) || !q.is_finite() {
            return Err(Error::Window(format!(
                "window of {} holds no samples at spacing {spacing}",
                self.duration
            )));
        }
        Ok(q as usize)
    }

    pub fn stride_samples(&self, spacing: T) -> Result<usize> {
        let q = to_f64(self.stride / spacing).round();
        if !(q >= 1.0) || !q.is_finite() {
            return Err(Error::Window(format!(
                "stride {} is shorter than the sample spacing {spacing}",
                self.stride
            )));
        }
        Ok(q as usize)
    }

    /// Difference lag in samples; zero in exact mode.
    pub fn lag(&self, spacing: T) -> Result<usize> {
        match self.deriv {
            DerivMode::Exact => Ok(0),
            DerivMode::Finite(dt_cg) => multiple_of(dt_cg, spacing, "dt_cg"),
        }
    }

    /// Columns contributed by each ensemble member.
    pub fn columns_per_member(&self, spacing: T) -> Result<usize> {
        self.validate(spacing)?;
        Ok(self.samples(spacing)? - self.lag(spacing)?)
    }

    /// Centers of every window that fits inside `times`, spaced by the stride.
    pub fn centers(&self, times: &[T]) -> Result<Vec<T>> {
        if times.len() < 2 {
            return Err(Error::Window("need at least two recorded instants".into()));
        }
        let spacing = times[1] - times[0];
        self.validate(spacing)?;
        let n = self.samples(spacing)?;
        let hop = self.stride_samples(spacing)?;
        let half = self.duration / lit(2.0);
        let mut out = Vec::new();
        let mut start = 0;
        while start + n <= times.len() {
            out.push(times[start] + half);
            start += hop;
        }
        Ok(out)
    }
}

/// Snapshot and derivative columns of one window, members concatenated in order.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotBlock<T: Real> {
    pub x: DMatrix<T>,
    pub xdot: DMatrix<T>,
    pub t_center: T,
    /// Time of the `x` sample behind each column.
    pub sample_times: Vec<T>,
    /// Ensemble member behind each column.
    pub ensemble_ids: Vec<usize>,
}

impl<T: Real> SnapshotBlock<T> {
    pub fn new(x: DMatrix<T>, xdot: DMatrix<T>, t_center: T) -> Result<Self> {
        if x.shape() != xdot.shape() {
            return Err(Error::Dimension(format!(
                "x is {:?} but xdot is {:?}",
                x.shape(),
                xdot.shape()
            )));
        }
        let m = x.ncols();
        Ok(SnapshotBlock {
            x,
            xdot,
            t_center,
            sample_times: vec![t_center; m],
            ensemble_ids: vec![0; m],
        })
    }

    pub fn n_obs(&self) -> usize {
        self.x.nrows()
    }

    pub fn m_samples(&self) -> usize {
        self.x.ncols()
    }

    /// Same block with every column multiplied by `s`.
    pub fn scaled(&self, s: T) -> Self {
        SnapshotBlock {
            x: &self.x * s,
            xdot: &self.xdot * s,
            ..self.clone()
        }
    }
}

/// Gathers the window centred at `t_center` from every record.
pub fn assemble_block<T: Real>(
    records: &[TrajectoryRecord<T>],
    window: &WindowSpec<T>,
    t_center: T,
) -> Result<SnapshotBlock<T>> {
    let first = records
        .first()
        .ok_or_else(|| Error::Window("no trajectory records".into()))?;
    if first.len() < 2 {
        return Err(Error::Window("records hold fewer than two instants".into()));
    }
    for (k, r) in records.iter().enumerate() {
        if r.steps != first.steps || r.values.nrows() != first.values.nrows() {
            return Err(Error::Dimension(format!(
                "record {k} does not share the grid or dictionary of record 0"
            )));
        }
    }
    let spacing = first.times[1] - first.times[0];
    window.validate(spacing)?;
    let n = window.samples(spacing)?;
    let lag = window.lag(spacing)?;

    let offset = to_f64((t_center - window.duration / lit(2.0) - first.times[0]) / spacing);
    let start = offset.round();
    if (offset - start).abs() > 1e-6 || start < 0.0 || start as usize + n > first.len() {
        let last = first.times[first.len() - 1];
        return Err(Error::Window(format!(
            "window centred at {t_center} (duration {}) is not on the recorded grid [{}, {last}]",
            window.duration, first.times[0]
        )));
    }
    let start = start as usize;
    let per = n - lag;
    let n_obs = first.values.nrows();
    let m = per * records.len();
    let mut x = DMatrix::<T>::zeros(n_obs, m);
    let mut xdot = DMatrix::<T>::zeros(n_obs, m);
    let mut sample_times = Vec::with_capacity(m);
    let mut ensemble_ids = Vec::with_capacity(m);

    for (member, rec) in records.iter().enumerate() {
        for j in 0..per {
            let src = start + j;
            let dst = member * per + j;
            x.set_column(dst, &rec.values.column(src));
            match window.deriv {
                DerivMode::Exact => {
                    let d = rec.derivs.as_ref().ok_or_else(|| {
                        Error::Window("exact mode needs recorded commutator derivatives".into())
                    })?;
                    xdot.set_column(dst, &d.column(src));
                }
                DerivMode::Finite(dt_cg) => {
                    let diff = (rec.values.column(src + lag) - rec.values.column(src)) / dt_cg;
                    xdot.set_column(dst, &diff);
                }
            }
            sample_times.push(rec.times[src]);
            ensemble_ids.push(member);
        }
    }
    Ok(SnapshotBlock {
        x,
        xdot,
        t_center,
        sample_times,
        ensemble_ids,
    })
}

/// Fitted generator `L = W Uᵀ` of rank `rank`.
#[derive(Debug, Clone)]
pub struct LiouvillianEstimate<T: Real> {
    pub t_center: T,
    pub n_obs: usize,
    pub m_samples: usize,
    pub rank: usize,
    /// Retained singular values, descending.
    pub sv_kept: Vec<T>,
    /// Discarded singular values, descending.
    pub sv_dropped: Vec<T>,
    /// RMS of `ẋ − L x` over the block.
    pub residual_rms: T,
    basis: DMatrix<T>,
    image: DMatrix<T>,
    reduced: DMatrix<T>,
    full: Option<DMatrix<T>>,
}

impl<T: Real> LiouvillianEstimate<T> {
    /// Wraps a known generator, e.g. for diagnostics on hand-built matrices.
    pub fn from_matrix(l: DMatrix<T>, t_center: T) -> Result<Self> {
        if !l.is_square() {
            return Err(Error::Dimension("generator must be square".into()));
        }
        let n = l.nrows();
        Ok(LiouvillianEstimate {
            t_center,
            n_obs: n,
            m_samples: 0,
            rank: n,
            sv_kept: Vec::new(),
            sv_dropped: Vec::new(),
            residual_rms: T::zero(),
            basis: DMatrix::identity(n, n),
            image: l.clone(),
            reduced: l.clone(),
            full: Some(l),
        })
    }

    /// The dense generator, present when `n_obs ≤ m_samples` or built by
    /// [`from_matrix`](Self::from_matrix).
    pub fn l(&self) -> Option<&DMatrix<T>> {
        self.full.as_ref()
    }

    /// `Uᵀ W`: the generator restricted to the retained snapshot subspace.
    pub fn reduced(&self) -> &DMatrix<T> {
        &self.reduced
    }

    /// Orthonormal basis `U` of the retained subspace (`n_obs × rank`).
    pub fn basis(&self) -> &DMatrix<T> {
        &self.basis
    }

    /// `L[i, j]`, from the factors if the dense matrix was not formed.
    pub fn element(&self, i: usize, j: usize) -> T {
        match &self.full {
            Some(l) => l[(i, j)],
            None => self.image.row(i).dot(&self.basis.row(j)),
        }
    }

    /// `L` applied to `v`.
    pub fn apply(&self, v: &DVector<T>) -> DVector<T> {
        match &self.full {
            Some(l) => l * v,
            None => &self.image * (self.basis.transpose() * v),
        }
    }
}

/// Least-squares generator `ẋ · pinv(x)` with relative cutoff `rcond`.
pub fn fit_liouvillian<T: Real>(block: &SnapshotBlock<T>, rcond: T) -> Result<LiouvillianEstimate<T>> {
    let (n_obs, m) = block.x.shape();
    if n_obs == 0 || m == 0 {
        return Err(Error::Degenerate("empty snapshot block".into()));
    }
    if block.xdot.shape() != block.x.shape() {
        return Err(Error::Dimension("x and xdot differ in shape".into()));
    }
    if block.x.iter().chain(block.xdot.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Integrity("snapshot block holds non-finite values".into()));
    }
    if !(rcond >= T::zero()) {
        return Err(Error::InvalidArgument("rcond must be non-negative".into()));
    }
    let svd = nalgebra::SVD::try_new(block.x.clone(), true, true, T::default_epsilon(), 0)
        .ok_or_else(|| Error::Eigen("SVD of the snapshot matrix did not converge".into()))?;
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᵀ");
    let sv = &svd.singular_values;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap_or(Ordering::Equal));
    let smax = sv[order[0]];
    let cutoff = rcond * smax;
    let (kept, dropped): (Vec<usize>, Vec<usize>) = order.iter().partition(|&&k| sv[k] > cutoff && sv[k] > T::zero());
    if kept.is_empty() {
        return Err(Error::Degenerate(format!(
            "all {} singular values are below {rcond} × σ_max",
            sv.len()
        )));
    }
    let r = kept.len();
    let mut basis = DMatrix::<T>::zeros(n_obs, r);
    let mut v_scaled = DMatrix::<T>::zeros(m, r);
    for (c, &k) in kept.iter().enumerate() {
        basis.set_column(c, &u.column(k));
        let inv = T::one() / sv[k];
        for row in 0..m {
            v_scaled[(row, c)] = v_t[(k, row)] * inv;
        }
    }
    let image = &block.xdot * &v_scaled;
    let reduced = basis.transpose() * &image;
    let full = (n_obs <= m).then(|| &image * basis.transpose());

    let coords = basis.transpose() * &block.x;
    let resid = &block.xdot - &image * coords;
    let residual_rms = resid.norm() / lit::<T>(((n_obs * m) as f64).sqrt());

    Ok(LiouvillianEstimate {
        t_center: block.t_center,
        n_obs,
        m_samples: m,
        rank: r,
        sv_kept: kept.iter().map(|&k| sv[k]).collect(),
        sv_dropped: dropped.iter().map(|&k| sv[k]).collect(),
        residual_rms,
        basis,
        image,
        reduced,
        full,
    })
}

/// `‖(ẋ − L x) xᵀ U‖_F / (‖ẋ‖_F ‖x‖_F)`: the residual's overlap with the
/// retained snapshot directions.
pub fn galerkin_defect<T: Real>(block: &SnapshotBlock<T>, est: &LiouvillianEstimate<T>) -> T {
    let coords = est.basis.transpose() * &block.x;
    let resid = &block.xdot - &est.image * &coords;
    let test = block.x.transpose() * &est.basis;
    let denom = block.xdot.norm() * block.x.norm();
    if denom > T::zero() {
        (resid * test).norm() / denom
    } else {
        T::zero()
    }
}

/// Eigenvalues of `L`. Directions outside the retained subspace contribute
/// exact zeros, counted separately.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    /// Sorted by real part, then imaginary part.
    pub values: Vec<C<T>>,
    pub structural_zeros: usize,
}

impl<T: Real> Spectrum<T> {
    pub fn max_abs_re(&self) -> T {
        self.values.iter().fold(T::zero(), |m, z| m.max(z.re.abs()))
    }

    pub fn max_abs_im(&self) -> T {
        self.values.iter().fold(T::zero(), |m, z| m.max(z.im.abs()))
    }

    pub fn min_re(&self) -> T {
        let min = self.values.iter().map(|z| z.re).fold(None, |m: Option<T>, v| {
            Some(m.map_or(v, |m| m.min(v)))
        });
        match (min, self.structural_zeros) {
            (Some(v), 0) => v,
            (Some(v), _) => v.min(T::zero()),
            (None, _) => T::zero(),
        }
    }

    pub fn max_re(&self) -> T {
        let max = self.values.iter().map(|z| z.re).fold(None, |m: Option<T>, v| {
            Some(m.map_or(v, |m| m.max(v)))
        });
        match (max, self.structural_zeros) {
            (Some(v), 0) => v,
            (Some(v), _) => v.max(T::zero()),
            (None, _) => T::zero(),
        }
    }

    /// Sum of real parts.
    pub fn re_sum(&self) -> T {
        self.values.iter().fold(T::zero(), |s, z| s + z.re)
    }
}

pub fn spectrum<T: Real>(est: &LiouvillianEstimate<T>) -> Result<Spectrum<T>> {
    let mut values = linalg::eigenvalues(&est.reduced)?;
    if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    values.sort_by(|a, b| {
        to_f64(a.re)
            .total_cmp(&to_f64(b.re))
            .then(to_f64(a.im).total_cmp(&to_f64(b.im)))
    });
    Ok(Spectrum {
        values,
        structural_zeros: est.n_obs - est.rank,
    })
}

/// `Tr L`.
pub fn liouvillian_trace<T: Real>(est: &LiouvillianEstimate<T>) -> T {
    match &est.full {
        Some(l) => l.trace(),
        None => est.reduced.trace(),
    }
}

/// Largest `|Re λ|` over the spectrum.
pub fn max_dissipation_pole<T: Real>(est: &LiouvillianEstimate<T>) -> Result<T> {
    Ok(spectrum(est)?.max_abs_re())
}

/// Predicted observables, one column per requested time.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction<T: Real> {
    pub rows: Vec<usize>,
    pub values: DMatrix<T>,
    pub route: ExpmRoute,
}

/// `e^{L t} x0` for every `t`, all dictionary rows.
pub fn reconstruct<T: Real>(
    est: &LiouvillianEstimate<T>,
    x0: &DVector<T>,
    times: &[T],
) -> Result<Reconstruction<T>> {
    let rows: Vec<usize> = (0..est.n_obs).collect();
    reconstruct_rows(est, x0, times, &rows)
}

/// `e^{L t} x0` restricted to `rows`. Without a dense `L` this uses
/// `e^{Lt}x0 = x0 + W ∫₀ᵗ e^{Uᵀ W s} ds Uᵀ x0`, with the integral read off
/// the exponential of the bordered matrix `[[UᵀW, Uᵀx0], [0, 0]]`.
pub fn reconstruct_rows<T: Real>(
    est: &LiouvillianEstimate<T>,
    x0: &DVector<T>,
    times: &[T],
    rows: &[usize],
) -> Result<Reconstruction<T>> {
    if x0.len() != est.n_obs {
        return Err(Error::Dimension(format!(
            "initial vector has length {}, dictionary has {}",
            x0.len(),
            est.n_obs
        )));
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= est.n_obs) {
        return Err(Error::InvalidArgument(format!("row {bad} is outside the dictionary")));
    }
    if times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::InvalidArgument("reconstruction times must be sorted".into()));
    }
    if let Some(l) = &est.full {
        let (all, route) = linalg::expm_action(l, x0, times)?;
        let mut values = DMatrix::<T>::zeros(rows.len(), times.len());
        for (i, &r) in rows.iter().enumerate() {
            values.set_row(i, &all.row(r));
        }
        return Ok(Reconstruction {
            rows: rows.to_vec(),
            values,
            route,
        });
    }
    let r = est.rank;
    let mut bordered = DMatrix::<T>::zeros(r + 1, r + 1);
    bordered.view_mut((0, 0), (r, r)).copy_from(&est.reduced);
    bordered
        .view_mut((0, r), (r, 1))
        .copy_from(&(est.basis.transpose() * x0));
    let mut e_last = DVector::<T>::zeros(r + 1);
    e_last[r] = T::one();
    let (y, route) = linalg::expm_action(&bordered, &e_last, times)?;
    let y_top = y.rows(0, r);
    let mut values = DMatrix::<T>::zeros(rows.len(), times.len());
    for (i, &row) in rows.iter().enumerate() {
        let w = est.image.row(row);
        for (c, _) in times.iter().enumerate() {
            values[(i, c)] = x0[row] + w.dot(&y_top.column(c).transpose());
        }
    }
    Ok(Reconstruction {
        rows: rows.to_vec(),
        values,
        route,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rotation_block(omega: f64, m: usize) -> SnapshotBlock<f64> {
        let mut x = DMatrix::zeros(2, m);
        let mut xd = DMatrix::zeros(2, m);
        for j in 0..m {
            let t = j as f64 * 0.01;
            x[(0, j)] = (omega * t).cos();
            x[(1, j)] = (omega * t).sin();
            xd[(0, j)] = -omega * (omega * t).sin();
            xd[(1, j)] = omega * (omega * t).cos();
        }
        SnapshotBlock::new(x, xd, 0.0).unwrap()
    }

    #[test]
    fn rotation_generator() {
        let est = fit_liouvillian(&rotation_block(2.0, 300), DEFAULT_RCOND).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]);
        assert!((est.l().unwrap() - want).amax() < 1e-10);
        let sp = spectrum(&est).unwrap();
        assert_eq!(sp.structural_zeros, 0);
        assert!((sp.values[0] - C::new(0.0, -2.0)).norm() < 1e-10);
        assert!((sp.values[1] - C::new(0.0, 2.0)).norm() < 1e-10);
        assert!(liouvillian_trace(&est).abs() < 1e-10);
        assert!(max_dissipation_pole(&est).unwrap() < 1e-10);
    }

    #[test]
    fn decay_generator() {
        let m = 100;
        let x = DMatrix::from_fn(1, m, |_, j| (-(j as f64) * 0.01).exp());
        let xd = -&x;
        let est = fit_liouvillian(&SnapshotBlock::new(x, xd, 0.0).unwrap(), DEFAULT_RCOND).unwrap();
        assert!((est.l().unwrap()[(0, 0)] + 1.0).abs() < 1e-10);
        assert!((spectrum(&est).unwrap().values[0].re + 1.0).abs() < 1e-10);
        assert!((liouvillian_trace(&est) + 1.0).abs() < 1e-10);
        assert!((max_dissipation_pole(&est).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn degenerate_block_rejected() {
        let b = SnapshotBlock::new(DMatrix::zeros(3, 5), DMatrix::zeros(3, 5), 0.0).unwrap();
        assert!(matches!(fit_liouvillian(&b, DEFAULT_RCOND), Err(Error::Degenerate(_))));
    }

    #[test]
    fn reconstruct_quarter_turn() {
        let l = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let est = LiouvillianEstimate::from_matrix(l, 0.0).unwrap();
        let x0 = DVector::from_vec(vec![1.0, 0.0]);
        let rec = reconstruct(&est, &x0, &[0.0, std::f64::consts::FRAC_PI_2]).unwrap();
        assert_eq!(rec.values[(0, 0)], 1.0);
        assert_eq!(rec.values[(1, 0)], 0.0);
        assert!((rec.values[(0, 1)]).abs() < 1e-9);
        assert!((rec.values[(1, 1)] - 1.0).abs() < 1e-9);
        assert!(reconstruct(&est, &x0, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn projected_path_matches_dense() {
        // three observables, two independent directions: n_obs > m path
        let m = 2;
        let x = DMatrix::from_row_slice(3, m, &[1.0, 0.2, 0.0, 1.0, 0.5, 0.5]);
        let gen = DMatrix::from_row_slice(3, 3, &[-0.1, 0.7, 0.0, -0.7, -0.2, 0.3, 0.1, 0.0, -0.4]);
        let xd = &gen * &x;
        let est = fit_liouvillian(&SnapshotBlock::new(x.clone(), xd, 0.0).unwrap(), DEFAULT_RCOND).unwrap();
        assert!(est.l().is_none());
        assert_eq!(est.rank, 2);
        let dense = DMatrix::from_fn(3, 3, |i, j| est.element(i, j));
        let times: Vec<f64> = (0..20).map(|k| k as f64 * 0.25).collect();
        let x0 = x.column(1).into_owned();
        let proj = reconstruct(&est, &x0, &times).unwrap();
        let direct = linalg::expm_action_taylor(&dense, &x0, &times).unwrap();
        assert!((proj.values - direct).amax() < 1e-10);
        let sp = spectrum(&est).unwrap();
        assert_eq!(sp.structural_zeros, 1);
        assert!((sp.re_sum() - liouvillian_trace(&est)).abs() < 1e-12);
    }

    fn record(values: DMatrix<f64>, derivs: Option<DMatrix<f64>>, dt: f64) -> TrajectoryRecord<f64> {
        let n = values.ncols();
        TrajectoryRecord {
            steps: (0..n).collect(),
            times: (0..n).map(|k| k as f64 * dt).collect(),
            values,
            derivs,
            dt,
            record_every: 1,
        }
    }

    #[test]
    fn window_sample_counts() {
        let dt = 0.002;
        let n = 401;
        let vals = DMatrix::from_fn(2, n, |i, j| (i + j) as f64);
        let recs = vec![record(vals.clone(), Some(vals.clone()), dt)];
        let w = WindowSpec::exact_default();
        let centers = w.centers(&recs[0].times).unwrap();
        assert!((centers[0] - 0.3).abs() < 1e-12);
        let b = assemble_block(&recs, &w, centers[0]).unwrap();
        assert_eq!(b.m_samples(), 300);
        let wf = w.with_deriv(DerivMode::Finite(0.04));
        let b = assemble_block(&recs, &wf, centers[0]).unwrap();
        assert_eq!(b.m_samples(), 280);
        // forward difference with the left sample: (j + 20 - j) / 0.04
        assert!((b.xdot[(0, 0)] - 20.0 / 0.04).abs() < 1e-9);
        assert_eq!(b.x[(0, 0)], 0.0);
        let two = vec![recs[0].clone(), recs[0].clone()];
        let b = assemble_block(&two, &w, centers[0]).unwrap();
        assert_eq!(b.m_samples(), 600);
        assert_eq!(b.ensemble_ids[300], 1);
    }

    #[test]
    fn window_errors() {
        let dt = 0.002;
        let vals = DMatrix::from_fn(1, 301, |_, j| j as f64);
        let recs = vec![record(vals, None, dt)];
        let w = WindowSpec::exact_default();
        // exact mode without derivatives
        assert!(assemble_block(&recs, &w, 0.3).is_err());
        let wf = w.with_deriv(DerivMode::Finite(0.003));
        assert!(assemble_block(&recs, &wf, 0.3).is_err());
        let wf = w.with_deriv(DerivMode::Finite(0.04));
        assert!(assemble_block(&recs, &wf, 0.3).is_ok());
        assert!(assemble_block(&recs, &wf, 0.5).is_err());
    }
}
