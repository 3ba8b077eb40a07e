//! Linear combinations of complex Gaussian functions over phase space.
//!
//! Each peak stores the natural log of its complex weight so that states whose
//! weights span hundreds of orders of magnitude (complex GKP forms, far
//! lattice points) stay representable.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    is_positive_definite, quadrature_indices, real_part, imag_part, select, select_vec, symmetrize,
    CMat, CVec, Ldlt, RMat, RVec, C64,
};

/// A pooled covariance with its cached inverse and normalization.
#[derive(Clone, Debug)]
pub struct Covariance {
    matrix: CMat,
    inverse: CMat,
    ln_norm: C64,
    // Re(Σ⁻¹) + Im(Σ⁻¹) Re(Σ⁻¹)⁻¹ Im(Σ⁻¹): bounds |G| over real points
    envelope: RMat,
}

impl Covariance {
    pub fn new(matrix: CMat) -> Result<Self> {
        let n = matrix.nrows();
        if n == 0 || n != matrix.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "covariance is {}x{}",
                n,
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidCovariance("non-finite entry".into()));
        }
        let asym = (&matrix - matrix.transpose()).norm();
        if asym > 1e-9 * matrix.norm().max(1e-300) {
            return Err(Error::InvalidCovariance("not symmetric".into()));
        }
        let matrix = symmetrize(&matrix);
        if !is_positive_definite(&real_part(&matrix)) {
            return Err(Error::InvalidCovariance(
                "real part is not positive definite".into(),
            ));
        }
        let f = Ldlt::new(&matrix)?;
        let inverse = f.inverse();
        let p = real_part(&inverse);
        let q = imag_part(&inverse);
        let envelope = if q.iter().all(|&x| x == 0.0) {
            p
        } else {
            match p.clone().cholesky() {
                Some(ch) => &p + &q * ch.solve(&q),
                None => p,
            }
        };
        Ok(Self {
            matrix,
            inverse,
            ln_norm: f.ln_norm(),
            envelope,
        })
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn inverse(&self) -> &CMat {
        &self.inverse
    }

    /// ln √det(2πΣ)
    pub fn ln_norm(&self) -> C64 {
        self.ln_norm
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_real(&self) -> bool {
        self.matrix.iter().all(|z| z.im == 0.0)
    }

    /// ln G_{μ,Σ}(x) at a real point.
    pub fn ln_density(&self, mean: &[C64], x: &[f64]) -> C64 {
        let n = self.dim();
        let mut buf = [C64::new(0.0, 0.0); 16];
        let mut heap;
        let d: &mut [C64] = if n <= 16 {
            &mut buf[..n]
        } else {
            heap = vec![C64::new(0.0, 0.0); n];
            &mut heap[..]
        };
        for i in 0..n {
            d[i] = C64::new(x[i], 0.0) - mean[i];
        }
        -0.5 * quad_form(&self.inverse, d) - self.ln_norm
    }

    /// ln G_{μ,Σ}(x) at a complex point.
    pub fn ln_density_complex(&self, mean: &[C64], x: &[C64]) -> C64 {
        let d: Vec<C64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
        -0.5 * quad_form(&self.inverse, &d) - self.ln_norm
    }

    /// ln sup_ξ |G_{μ,Σ}(ξ)| over real ξ.
    pub fn ln_sup(&self, mean: &[C64]) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        if mean.iter().any(|z| z.im != 0.0) {
            for i in 0..n {
                for j in 0..n {
                    s += mean[i].im * self.envelope[(i, j)] * mean[j].im;
                }
            }
        }
        0.5 * s - self.ln_norm.re
    }
}

fn quad_form(m: &CMat, d: &[C64]) -> C64 {
    let n = d.len();
    let mut s = C64::new(0.0, 0.0);
    for i in 0..n {
        let mut row = C64::new(0.0, 0.0);
        for j in 0..n {
            row += m[(i, j)] * d[j];
        }
        s += d[i] * row;
    }
    s
}

/// G_{μ,Σ}(ξ) for a standalone Gaussian.
pub fn eval_gaussian(mean: &CVec, cov: &CMat, point: &[f64]) -> Result<C64> {
    check_len(mean.len(), cov.nrows(), "mean vs covariance")?;
    check_len(point.len(), cov.nrows(), "point vs covariance")?;
    let c = Covariance::new(cov.clone())?;
    Ok(c.ln_density(mean.as_slice(), point).exp())
}

/// ∫ G_{μ₁,Σ₁} G_{μ₂,Σ₂} = G_{μ₁,Σ₁+Σ₂}(μ₂).
pub fn gaussian_overlap_integral(mean1: &CVec, cov1: &CMat, mean2: &CVec, cov2: &CMat) -> Result<C64> {
    check_len(mean1.len(), cov1.nrows(), "mean1 vs cov1")?;
    check_len(mean2.len(), cov2.nrows(), "mean2 vs cov2")?;
    check_len(cov1.nrows(), cov2.nrows(), "cov1 vs cov2")?;
    let c = Covariance::new(cov1 + cov2)?;
    Ok(c.ln_density_complex(mean1.as_slice(), mean2.as_slice()).exp())
}

fn check_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch(format!("{what}: {a} vs {b}")));
    }
    Ok(())
}

/// Covariance matrices shared between peaks, deduplicated bitwise.
#[derive(Clone, Debug, Default)]
pub struct CovariancePool {
    entries: Vec<Covariance>,
    index: HashMap<Vec<u64>, usize>,
}

impl CovariancePool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, matrix: CMat) -> Result<usize> {
        let matrix = symmetrize(&matrix);
        let key: Vec<u64> = matrix
            .iter()
            .flat_map(|z| [canonical_bits(z.re), canonical_bits(z.im)])
            .collect();
        if let Some(&i) = self.index.get(&key) {
            return Ok(i);
        }
        let cov = Covariance::new(matrix)?;
        self.entries.push(cov);
        let i = self.entries.len() - 1;
        self.index.insert(key, i);
        Ok(i)
    }

    pub fn get(&self, i: usize) -> &Covariance {
        &self.entries[i]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Covariance> {
        self.entries.iter()
    }
}

fn canonical_bits(x: f64) -> u64 {
    if x == 0.0 {
        0
    } else {
        x.to_bits()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Peak {
    /// Natural log of the complex weight.
    pub ln_weight: C64,
    pub mean: CVec,
    pub cov: usize,
}

impl Peak {
    pub fn weight(&self) -> C64 {
        cexp(self.ln_weight)
    }
}

/// e^z, exact ±e^{Re z} when Im z is a multiple of π up to rounding, so that
/// real negative weights do not pick up a spurious imaginary part.
pub fn cexp(z: C64) -> C64 {
    let k = (z.im / std::f64::consts::PI).round();
    if (z.im - k * std::f64::consts::PI).abs() <= 8.0 * f64::EPSILON * z.im.abs().max(1.0) {
        let m = z.re.exp();
        C64::new(if k.rem_euclid(2.0) == 0.0 { m } else { -m }, 0.0)
    } else {
        z.exp()
    }
}

/// A Gaussian mixture over a real space of arbitrary dimension.
#[derive(Clone, Debug)]
pub struct Mixture {
    dim: usize,
    peaks: Vec<Peak>,
    pool: CovariancePool,
}

impl Mixture {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            peaks: Vec::new(),
            pool: CovariancePool::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    pub fn peaks(&self) -> &[Peak] {
        &self.peaks
    }

    pub fn pool(&self) -> &CovariancePool {
        &self.pool
    }

    pub fn covariance(&self, peak: &Peak) -> &Covariance {
        self.pool.get(peak.cov)
    }

    pub fn add_covariance(&mut self, matrix: CMat) -> Result<usize> {
        check_len(matrix.nrows(), self.dim, "covariance dimension")?;
        self.pool.insert(matrix)
    }

    pub fn push(&mut self, ln_weight: C64, mean: CVec, cov: usize) -> Result<()> {
        check_len(mean.len(), self.dim, "mean dimension")?;
        if cov >= self.pool.len() {
            return Err(Error::InvalidState(format!("covariance index {cov} missing")));
        }
        if ln_weight.re == f64::NEG_INFINITY {
            return Ok(());
        }
        if !ln_weight.is_finite() || mean.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidState("non-finite peak".into()));
        }
        self.peaks.push(Peak { ln_weight, mean, cov });
        Ok(())
    }

    /// Push a peak with a linear weight; exact zeros are dropped.
    pub fn push_weight(&mut self, weight: C64, mean: CVec, cov: usize) -> Result<()> {
        if weight == C64::new(0.0, 0.0) {
            return Ok(());
        }
        self.push(weight.ln(), mean, cov)
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        self.peaks
            .iter()
            .map(|p| cexp(p.ln_weight + self.pool.get(p.cov).ln_density(p.mean.as_slice(), x)))
            .sum()
    }

    pub fn eval_many(&self, points: &[Vec<f64>]) -> Vec<C64> {
        points.par_iter().map(|x| self.eval(x)).collect()
    }

    /// ln Σ c_m, principal branch.
    pub fn ln_total(&self) -> C64 {
        log_sum_exp(self.peaks.iter().map(|p| p.ln_weight))
    }

    pub fn total(&self) -> C64 {
        cexp(self.ln_total())
    }

    /// Rescale weights so that Σ c_m = 1; returns the previous sum.
    pub fn normalize(&mut self) -> Result<C64> {
        if self.peaks.is_empty() {
            return Err(Error::EmptyMixture);
        }
        let lt = self.ln_total();
        if !lt.is_finite() {
            return Err(Error::InvalidState("weights sum to zero".into()));
        }
        for p in &mut self.peaks {
            p.ln_weight -= lt;
        }
        Ok(lt.exp())
    }

    pub fn ln_sup_magnitudes(&self) -> Vec<f64> {
        self.peaks
            .iter()
            .map(|p| p.ln_weight.re + self.pool.get(p.cov).ln_sup(p.mean.as_slice()))
            .collect()
    }

    /// Drop peaks whose effective magnitude sup|c G| falls below `tol` times
    /// the largest one. Returns |Σ dropped c| relative to |Σ c|.
    pub fn prune(&mut self, tol: f64) -> Result<f64> {
        if !(tol >= 0.0) {
            return Err(Error::InvalidParameter(format!("prune tolerance {tol}")));
        }
        if tol == 0.0 || self.peaks.is_empty() {
            return Ok(0.0);
        }
        let mags = self.ln_sup_magnitudes();
        let cut = mags.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + tol.ln();
        let total = self.ln_total();
        let mut dropped = Vec::new();
        let mut kept = Vec::with_capacity(self.peaks.len());
        for (p, m) in self.peaks.drain(..).zip(mags) {
            if m >= cut {
                kept.push(p);
            } else {
                dropped.push(p.ln_weight);
            }
        }
        if kept.is_empty() {
            return Err(Error::EmptyMixture);
        }
        self.peaks = kept;
        self.compact_pool()?;
        let lost = if dropped.is_empty() {
            0.0
        } else {
            (log_sum_exp(dropped.into_iter()) - total).exp().norm()
        };
        Ok(lost)
    }

    /// Merge peaks that share a covariance and whose means agree after
    /// rounding to multiples of `quantum`.
    pub fn merge_duplicates(&mut self, quantum: f64) {
        let mut slots: HashMap<(usize, Vec<i64>), usize> = HashMap::new();
        let mut out: Vec<Peak> = Vec::with_capacity(self.peaks.len());
        for p in self.peaks.drain(..) {
            let key: Vec<i64> = p
                .mean
                .iter()
                .flat_map(|z| [(z.re / quantum).round() as i64, (z.im / quantum).round() as i64])
                .collect();
            match slots.get(&(p.cov, key.clone())) {
                Some(&i) => {
                    out[i].ln_weight = log_add(out[i].ln_weight, p.ln_weight);
                }
                None => {
                    slots.insert((p.cov, key), out.len());
                    out.push(p);
                }
            }
        }
        out.retain(|p| p.ln_weight.re != f64::NEG_INFINITY && p.ln_weight.is_finite());
        self.peaks = out;
    }

    /// Remove pool entries no longer referenced.
    pub fn compact_pool(&mut self) -> Result<()> {
        let mut used = vec![false; self.pool.len()];
        for p in &self.peaks {
            used[p.cov] = true;
        }
        if used.iter().all(|&u| u) {
            return Ok(());
        }
        let mut pool = CovariancePool::new();
        let mut remap = vec![usize::MAX; used.len()];
        for (i, u) in used.iter().enumerate() {
            if *u {
                remap[i] = pool.insert(self.pool.get(i).matrix().clone())?;
            }
        }
        for p in &mut self.peaks {
            p.cov = remap[p.cov];
        }
        self.pool = pool;
        Ok(())
    }

    /// Apply μ → Xμ + d, Σ → XΣXᵀ + Y to every peak.
    pub fn affine(&self, x: &RMat, y: &RMat, d: &RVec) -> Result<Mixture> {
        let n = self.dim;
        if x.ncols() != n || x.nrows() != y.nrows() || y.nrows() != y.ncols() || d.len() != x.nrows() {
            return Err(Error::DimensionMismatch("affine map".into()));
        }
        let xc = crate::linalg::to_complex(x);
        let yc = crate::linalg::to_complex(y);
        let dc = crate::linalg::to_complex_vec(d);
        let mut pool = CovariancePool::new();
        let mut remap = Vec::with_capacity(self.pool.len());
        for c in self.pool.iter() {
            remap.push(pool.insert(&xc * c.matrix() * xc.transpose() + &yc)?);
        }
        let peaks = self
            .peaks
            .par_iter()
            .map(|p| Peak {
                ln_weight: p.ln_weight,
                mean: &xc * &p.mean + &dc,
                cov: remap[p.cov],
            })
            .collect();
        Ok(Mixture {
            dim: x.nrows(),
            peaks,
            pool,
        })
    }

    /// Marginal over the listed coordinates.
    pub fn select(&self, idx: &[usize]) -> Result<Mixture> {
        if idx.is_empty() || idx.iter().any(|&i| i >= self.dim) {
            return Err(Error::InvalidModes(format!("coordinates {idx:?}")));
        }
        let mut pool = CovariancePool::new();
        let mut remap = Vec::with_capacity(self.pool.len());
        for c in self.pool.iter() {
            remap.push(pool.insert(select(c.matrix(), idx, idx))?);
        }
        let peaks = self
            .peaks
            .iter()
            .map(|p| Peak {
                ln_weight: p.ln_weight,
                mean: select_vec(&p.mean, idx),
                cov: remap[p.cov],
            })
            .collect();
        let mut out = Mixture {
            dim: idx.len(),
            peaks,
            pool,
        };
        out.compact_pool()?;
        Ok(out)
    }

    /// Direct-sum product of two mixtures.
    pub fn tensor(&self, other: &Mixture) -> Result<Mixture> {
        let mut pool = CovariancePool::new();
        let mut pairs: HashMap<(usize, usize), usize> = HashMap::new();
        for a in &self.peaks {
            for b in &other.peaks {
                if let std::collections::hash_map::Entry::Vacant(e) = pairs.entry((a.cov, b.cov)) {
                    let m = crate::linalg::direct_sum(
                        self.pool.get(a.cov).matrix(),
                        other.pool.get(b.cov).matrix(),
                    );
                    e.insert(pool.insert(m)?);
                }
            }
        }
        let dim = self.dim + other.dim;
        let peaks = self
            .peaks
            .par_iter()
            .flat_map_iter(|a| {
                let pairs = &pairs;
                other.peaks.iter().map(move |b| {
                    let mut mean = CVec::zeros(dim);
                    mean.rows_mut(0, a.mean.len()).copy_from(&a.mean);
                    mean.rows_mut(a.mean.len(), b.mean.len()).copy_from(&b.mean);
                    Peak {
                        ln_weight: a.ln_weight + b.ln_weight,
                        mean,
                        cov: pairs[&(a.cov, b.cov)],
                    }
                })
            })
            .collect();
        Ok(Mixture { dim, peaks, pool })
    }

    /// Add every peak of `other`, weights scaled by e^{ln_factor}.
    pub fn append(&mut self, other: &Mixture, ln_factor: C64) -> Result<()> {
        check_len(other.dim, self.dim, "appended mixture")?;
        let mut remap = Vec::with_capacity(other.pool.len());
        for c in other.pool.iter() {
            remap.push(self.pool.insert(c.matrix().clone())?);
        }
        for p in &other.peaks {
            self.peaks.push(Peak {
                ln_weight: p.ln_weight + ln_factor,
                mean: p.mean.clone(),
                cov: remap[p.cov],
            });
        }
        Ok(())
    }

    pub(crate) fn from_parts(dim: usize, peaks: Vec<Peak>, pool: CovariancePool) -> Mixture {
        Mixture { dim, peaks, pool }
    }

    pub(crate) fn into_parts(self) -> (usize, Vec<Peak>, CovariancePool) {
        (self.dim, self.peaks, self.pool)
    }
}

pub fn log_sum_exp(it: impl Iterator<Item = C64>) -> C64 {
    let v: Vec<C64> = it.collect();
    let m = v.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return C64::new(f64::NEG_INFINITY, 0.0);
    }
    let s: C64 = v.iter().map(|z| cexp(z - m)).sum();
    s.ln() + m
}

pub fn log_add(a: C64, b: C64) -> C64 {
    let (hi, lo) = if a.re >= b.re { (a, b) } else { (b, a) };
    hi + (C64::new(1.0, 0.0) + (lo - hi).exp()).ln()
}

/// Bookkeeping carried along with a state.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Accumulated |Σ c| of peaks removed by pruning.
    pub pruned_mass: f64,
    /// Weight lost to lattice truncation at construction.
    pub truncated_mass: f64,
    pub warnings: Vec<String>,
}

/// An N-mode state: a normalized Gaussian mixture over (q₁,p₁,…,q_N,p_N).
#[derive(Clone, Debug)]
pub struct State {
    hbar: f64,
    mix: Mixture,
    pub diagnostics: Diagnostics,
}

pub const DEFAULT_HBAR: f64 = 2.0;

impl State {
    pub fn new(hbar: f64, mix: Mixture) -> Result<Self> {
        if !(hbar > 0.0) || !hbar.is_finite() {
            return Err(Error::InvalidParameter(format!("hbar = {hbar}")));
        }
        if mix.dim() == 0 || mix.dim() % 2 != 0 {
            return Err(Error::DimensionMismatch(format!("odd phase-space dimension {}", mix.dim())));
        }
        if mix.is_empty() {
            return Err(Error::EmptyMixture);
        }
        Ok(Self {
            hbar,
            mix,
            diagnostics: Diagnostics::default(),
        })
    }

    /// Build and normalize.
    pub fn normalized_from(hbar: f64, mut mix: Mixture) -> Result<Self> {
        mix.normalize()?;
        Self::new(hbar, mix)
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn num_modes(&self) -> usize {
        self.mix.dim() / 2
    }

    pub fn mixture(&self) -> &Mixture {
        &self.mix
    }

    pub fn into_mixture(self) -> Mixture {
        self.mix
    }

    pub fn peaks(&self) -> &[Peak] {
        self.mix.peaks()
    }

    pub fn num_peaks(&self) -> usize {
        self.mix.len()
    }

    pub fn pool(&self) -> &CovariancePool {
        self.mix.pool()
    }

    pub fn weight_sum(&self) -> C64 {
        self.mix.total()
    }

    pub fn wigner(&self, point: &[f64]) -> Result<C64> {
        check_len(point.len(), self.mix.dim(), "phase point")?;
        Ok(self.mix.eval(point))
    }

    pub(crate) fn mixture_mut(&mut self) -> &mut Mixture {
        &mut self.mix
    }

    pub(crate) fn with_mixture(&self, mix: Mixture) -> State {
        State {
            hbar: self.hbar,
            mix,
            diagnostics: self.diagnostics.clone(),
        }
    }

    pub fn tensor(&self, other: &State) -> Result<State> {
        if self.hbar != other.hbar {
            return Err(Error::HbarMismatch(self.hbar, other.hbar));
        }
        let mix = self.mix.tensor(&other.mix)?;
        let mut out = self.with_mixture(mix);
        out.diagnostics.pruned_mass += other.diagnostics.pruned_mass;
        out.diagnostics.truncated_mass += other.diagnostics.truncated_mass;
        out.diagnostics.warnings.extend(other.diagnostics.warnings.iter().cloned());
        Ok(out)
    }

    /// Keep the listed modes, in the order given.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<State> {
        validate_modes(keep, self.num_modes())?;
        let mut mix = self.mix.select(&quadrature_indices(keep))?;
        mix.normalize()?;
        Ok(self.with_mixture(mix))
    }

    pub fn prune(&self, tol: f64) -> Result<State> {
        let mut mix = self.mix.clone();
        let lost = mix.prune(tol)?;
        mix.normalize()?;
        let mut out = self.with_mixture(mix);
        out.diagnostics.pruned_mass += lost;
        Ok(out)
    }

    pub fn merged(&self, quantum: f64) -> Result<State> {
        let mut mix = self.mix.clone();
        mix.merge_duplicates(quantum);
        if mix.is_empty() {
            return Err(Error::EmptyMixture);
        }
        mix.compact_pool()?;
        Ok(self.with_mixture(mix))
    }

    pub fn normalized(&self) -> Result<State> {
        let mut mix = self.mix.clone();
        mix.normalize()?;
        Ok(self.with_mixture(mix))
    }

    /// max|Im W| / max|Re W| over the given points.
    pub fn reality_ratio(&self, points: &[Vec<f64>]) -> f64 {
        let vals = self.mix.eval_many(points);
        let re = vals.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
        let im = vals.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        if re == 0.0 {
            im
        } else {
            im / re
        }
    }

    /// Necessary physicality conditions: Σc = 1 and a real Wigner function on
    /// the sample points.
    pub fn check_physical(&self, points: &[Vec<f64>], tol: f64) -> Result<()> {
        let s = self.weight_sum();
        if (s - 1.0).norm() > tol {
            return Err(Error::InvalidState(format!("weights sum to {s}")));
        }
        let r = self.reality_ratio(points);
        if r > tol {
            return Err(Error::InvalidState(format!("Wigner imaginary ratio {r:e}")));
        }
        Ok(())
    }

    pub fn add_warning(&mut self, w: impl Into<String>) {
        self.diagnostics.warnings.push(w.into());
    }
}

pub fn validate_modes(modes: &[usize], num_modes: usize) -> Result<()> {
    if modes.is_empty() {
        return Err(Error::InvalidModes("empty mode list".into()));
    }
    let mut seen = vec![false; num_modes];
    for &m in modes {
        if m >= num_modes {
            return Err(Error::InvalidModes(format!("mode {m} out of range (N = {num_modes})")));
        }
        if seen[m] {
            return Err(Error::InvalidModes(format!("mode {m} repeated")));
        }
        seen[m] = true;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::to_complex;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn vac_cov() -> CMat {
        to_complex(&RMat::identity(2, 2))
    }

    #[test]
    fn vacuum_at_origin() {
        let g = eval_gaussian(&CVec::zeros(2), &vac_cov(), &[0.0, 0.0]).unwrap();
        assert!((g - c(1.0 / (2.0 * PI), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn imaginary_mean_by_hand() {
        // d = (-2i, 0): -½ dᵀd = 2, so G = e²/(2π)
        let mean = CVec::from_vec(vec![c(0.0, 2.0), c(0.0, 0.0)]);
        let g = eval_gaussian(&mean, &vac_cov(), &[0.0, 0.0]).unwrap();
        assert!((g - c((2.0f64).exp() / (2.0 * PI), 0.0)).norm() < 1e-13);
    }

    #[test]
    fn squeezed_origin_value_is_invariant() {
        for r in [0.0, 0.3, 1.7] {
            for hbar in [1.0, 2.0] {
                let cov = to_complex(&RMat::from_diagonal(&RVec::from_vec(vec![
                    hbar * (-2.0 * r as f64).exp() / 2.0,
                    hbar * (2.0 * r as f64).exp() / 2.0,
                ])));
                let g = eval_gaussian(&CVec::zeros(2), &cov, &[0.0, 0.0]).unwrap();
                assert!((g.re - 1.0 / (PI * hbar)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn overlap_of_displaced_vacua() {
        let d = 1.3;
        let m2 = CVec::from_vec(vec![c(d, 0.0), c(0.0, 0.0)]);
        let v = gaussian_overlap_integral(&CVec::zeros(2), &vac_cov(), &m2, &vac_cov()).unwrap();
        // 1-D quadrature of the q factor times the exact p factor
        let h = 1e-3;
        let q: f64 = (-20000..20000)
            .map(|i| {
                let x = i as f64 * h;
                (-(x * x) / 2.0).exp() * (-(x - d).powi(2) / 2.0).exp() / (2.0 * PI)
            })
            .sum::<f64>()
            * h;
        let p = 1.0 / (4.0 * PI).sqrt();
        assert!((v.re - q * p).abs() < 1e-12);
        assert!((v.re - (-d * d / 4.0).exp() / (4.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn pool_deduplicates() {
        let mut pool = CovariancePool::new();
        let a = pool.insert(vac_cov()).unwrap();
        let b = pool.insert(vac_cov()).unwrap();
        assert_eq!(a, b);
        assert_eq!(pool.len(), 1);
        let bad = to_complex(&RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]));
        assert!(matches!(pool.insert(bad), Err(Error::InvalidCovariance(_))));
    }

    #[test]
    fn merge_sums_coincident_weights() {
        let mut m = Mixture::new(2);
        let k = m.add_covariance(vac_cov()).unwrap();
        m.push_weight(c(0.25, 0.0), CVec::zeros(2), k).unwrap();
        m.push_weight(c(0.75, 0.0), CVec::zeros(2), k).unwrap();
        m.merge_duplicates(1e-12);
        assert_eq!(m.len(), 1);
        assert!((m.total() - 1.0).norm() < 1e-15);
    }

    #[test]
    fn log_sum_exp_handles_underflow() {
        let v = [c(-1000.0, 0.0), c(-1000.0 + 2f64.ln(), 0.0)];
        let s = log_sum_exp(v.into_iter());
        assert!((s - c(-1000.0 + 3f64.ln(), 0.0)).norm() < 1e-12);
    }
}
