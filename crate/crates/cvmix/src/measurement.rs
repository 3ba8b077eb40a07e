//! General-dyne and mixture-operator measurements, conditional updates and
//! rejection sampling of outcomes.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::channels::{apply_symplectic, rotation};
use crate::error::{Error, Result};
use crate::linalg::{
    min_eigenvalue, quadrature_indices, select, select_vec, symmetrize, to_complex, CMat, CVec, RMat, C64,
};
use crate::mixture::{log_sum_exp, validate_modes, Covariance, CovariancePool, Mixture, Peak, State};

/// Schur-complement update for peaks sharing one covariance.
#[derive(Clone, Debug)]
pub struct Conditioner {
    keep: Vec<usize>,
    meas: Vec<usize>,
    gain: CMat,
    cov_a: CMat,
    s: Covariance,
}

impl Conditioner {
    /// `sigma_m` of `None` is the homodyne limit: only Σ_BB enters.
    pub fn new(cov: &CMat, keep: &[usize], meas: &[usize], sigma_m: Option<&CMat>) -> Result<Self> {
        let saa = select(cov, keep, keep);
        let sab = select(cov, keep, meas);
        let mut sbb = select(cov, meas, meas);
        if let Some(m) = sigma_m {
            if m.nrows() != meas.len() {
                return Err(Error::DimensionMismatch("measurement covariance".into()));
            }
            sbb += m;
        }
        let s = Covariance::new(sbb)?;
        let gain = &sab * s.inverse();
        let cov_a = symmetrize(&(saa - &gain * sab.transpose()));
        Ok(Self {
            keep: keep.to_vec(),
            meas: meas.to_vec(),
            gain,
            cov_a,
            s,
        })
    }

    pub fn cov_a(&self) -> &CMat {
        &self.cov_a
    }

    pub fn gain(&self) -> &CMat {
        &self.gain
    }

    /// (ln G_{μ_B, Σ_BB+Σ_M}(r), μ_A + K(r − μ_B))
    pub fn apply(&self, mean: &CVec, r: &[C64]) -> (C64, CVec) {
        let mb = select_vec(mean, &self.meas);
        let ma = select_vec(mean, &self.keep);
        let lf = self.s.ln_density_complex(mb.as_slice(), r);
        let diff = CVec::from_iterator(r.len(), r.iter().zip(mb.iter()).map(|(a, b)| a - b));
        (lf, ma + &self.gain * diff)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Projection {
    /// Projection onto a Gaussian state with this 2k×2k covariance.
    Gaussian(RMat),
    /// Ideal homodyne of x_θ = q cos θ + p sin θ, one angle per mode.
    Homodyne(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneralDyne {
    pub modes: Vec<usize>,
    pub projection: Projection,
}

impl GeneralDyne {
    pub fn gaussian(modes: Vec<usize>, sigma_m: RMat) -> Result<Self> {
        let k = 2 * modes.len();
        if sigma_m.nrows() != k || sigma_m.ncols() != k {
            return Err(Error::DimensionMismatch(format!("Σ_M must be {k}x{k}")));
        }
        if (&sigma_m - sigma_m.transpose()).norm() > 1e-12 * (1.0 + sigma_m.norm()) {
            return Err(Error::InvalidCovariance("Σ_M not symmetric".into()));
        }
        if min_eigenvalue(&sigma_m) < -1e-12 * (1.0 + sigma_m.norm()) {
            return Err(Error::InvalidCovariance("Σ_M not positive semidefinite".into()));
        }
        Ok(Self {
            modes,
            projection: Projection::Gaussian(sigma_m),
        })
    }

    pub fn heterodyne(modes: Vec<usize>, hbar: f64) -> Result<Self> {
        let k = 2 * modes.len();
        Self::gaussian(modes, RMat::identity(k, k) * (hbar / 2.0))
    }

    pub fn homodyne(modes: Vec<usize>, angles: Vec<f64>) -> Result<Self> {
        if modes.len() != angles.len() {
            return Err(Error::DimensionMismatch("one homodyne angle per mode".into()));
        }
        Ok(Self {
            modes,
            projection: Projection::Homodyne(angles),
        })
    }

    pub fn homodyne_q(mode: usize) -> Self {
        Self {
            modes: vec![mode],
            projection: Projection::Homodyne(vec![0.0]),
        }
    }

    pub fn homodyne_p(mode: usize) -> Self {
        Self {
            modes: vec![mode],
            projection: Projection::Homodyne(vec![PI / 2.0]),
        }
    }

    pub fn outcome_dim(&self) -> usize {
        match self.projection {
            Projection::Gaussian(_) => 2 * self.modes.len(),
            Projection::Homodyne(_) => self.modes.len(),
        }
    }
}

/// Result of conditioning on a measurement outcome.
#[derive(Clone, Debug)]
pub struct ConditionalOutcome {
    pub outcome: Vec<f64>,
    /// Density (general-dyne) or probability (mixture operator) of the outcome.
    pub probability: f64,
    /// State of the unmeasured modes, in their original order.
    pub state: State,
    /// (state peak, operator peak) behind each output peak.
    pub provenance: Vec<(usize, usize)>,
}

struct Prepared {
    mix: Mixture,
    keep: Vec<usize>,
    meas: Vec<usize>,
    sigma_m: Option<CMat>,
}

fn prepare(state: &State, meas: &GeneralDyne) -> Result<Prepared> {
    validate_modes(&meas.modes, state.num_modes())?;
    let others: Vec<usize> = (0..state.num_modes()).filter(|m| !meas.modes.contains(m)).collect();
    let keep = quadrature_indices(&others);
    match &meas.projection {
        Projection::Gaussian(sm) => Ok(Prepared {
            mix: state.mixture().clone(),
            keep,
            meas: quadrature_indices(&meas.modes),
            sigma_m: Some(to_complex(sm)),
        }),
        Projection::Homodyne(angles) => {
            let mut st = state.clone();
            for (&m, &a) in meas.modes.iter().zip(angles) {
                if a != 0.0 {
                    st = apply_symplectic(&st, &rotation(-a), &[m])?;
                }
            }
            Ok(Prepared {
                mix: st.into_mixture(),
                keep,
                meas: meas.modes.iter().map(|m| 2 * m).collect(),
                sigma_m: None,
            })
        }
    }
}

/// Turn a sum of complex terms (given as logs) into a real density,
/// checking that the imaginary residue and any negativity are rounding-level.
fn real_density(terms: &[C64]) -> Result<(f64, C64, f64)> {
    let total = log_sum_exp(terms.iter().cloned());
    let scale = log_sum_exp(terms.iter().map(|z| C64::new(z.re, 0.0))).re;
    if scale == f64::NEG_INFINITY {
        return Ok((0.0, total, 0.0));
    }
    let p = total.exp();
    let sc = scale.exp();
    if p.im.abs() > 1e-9 * p.re.abs() + 1e-12 * sc {
        return Err(Error::NumericalInconsistency(format!(
            "density has imaginary part {:e} (real {:e})",
            p.im, p.re
        )));
    }
    if p.re < -1e-9 * sc {
        return Err(Error::NumericalInconsistency(format!("negative density {:e}", p.re)));
    }
    Ok((p.re.max(0.0), total, sc))
}

/// Outcome density Σ c_m G_{μ_m,B, Σ_m,B + Σ_M}(r).
pub fn generaldyne_prob(state: &State, meas: &GeneralDyne, r: &[f64]) -> Result<f64> {
    let dist = outcome_distribution(state, meas)?;
    if r.len() != dist.dim() {
        return Err(Error::DimensionMismatch(format!("outcome has {} entries, need {}", r.len(), dist.dim())));
    }
    let terms: Vec<C64> = dist
        .peaks()
        .iter()
        .map(|p| p.ln_weight + dist.covariance(p).ln_density(p.mean.as_slice(), r))
        .collect();
    Ok(real_density(&terms)?.0)
}

/// The mixture over outcome space whose value is the outcome density.
pub fn outcome_distribution(state: &State, meas: &GeneralDyne) -> Result<Mixture> {
    let prep = prepare(state, meas)?;
    let mut sel = prep.mix.select(&prep.meas)?;
    if let Some(sm) = prep.sigma_m {
        let k = sm.nrows();
        let x = RMat::identity(k, k);
        let y = crate::linalg::real_part(&sm);
        sel = sel.affine(&x, &y, &crate::linalg::RVec::zeros(k))?;
    }
    Ok(sel)
}

/// Marginal mixture of the selected (possibly rotated) quadratures.
pub fn homodyne_marginal(state: &State, modes: &[usize], angles: &[f64]) -> Result<Mixture> {
    outcome_distribution(state, &GeneralDyne::homodyne(modes.to_vec(), angles.to_vec())?)
}

pub fn condition_on_generaldyne(state: &State, meas: &GeneralDyne, r: &[f64]) -> Result<ConditionalOutcome> {
    if r.len() != meas.outcome_dim() {
        return Err(Error::DimensionMismatch(format!(
            "outcome has {} entries, need {}",
            r.len(),
            meas.outcome_dim()
        )));
    }
    let prep = prepare(state, meas)?;
    if prep.keep.is_empty() {
        return Err(Error::InvalidModes("conditioning needs at least one unmeasured mode".into()));
    }
    let mix = &prep.mix;
    let conds: Vec<Conditioner> = mix
        .pool()
        .iter()
        .map(|c| Conditioner::new(c.matrix(), &prep.keep, &prep.meas, prep.sigma_m.as_ref()))
        .collect::<Result<_>>()?;
    let rc: Vec<C64> = r.iter().map(|&x| C64::new(x, 0.0)).collect();
    let updated: Vec<(C64, CVec, usize)> = mix
        .peaks()
        .par_iter()
        .map(|p| {
            let (lf, m) = conds[p.cov].apply(&p.mean, &rc);
            (p.ln_weight + lf, m, p.cov)
        })
        .collect();
    let provenance = (0..updated.len()).map(|i| (i, 0)).collect();
    let out = assemble(state, prep.keep.len(), updated, conds.iter().map(|c| c.cov_a().clone()).collect())?;
    Ok(ConditionalOutcome {
        outcome: r.to_vec(),
        probability: out.1,
        state: out.0,
        provenance,
    })
}

/// Build the normalized post-measurement state from updated peaks.
fn assemble(state: &State, dim: usize, peaks: Vec<(C64, CVec, usize)>, covs: Vec<CMat>) -> Result<(State, f64)> {
    let terms: Vec<C64> = peaks.iter().map(|p| p.0).collect();
    let (p, ln_total, scale) = real_density(&terms)?;
    if !(p > 1e-13 * scale) || p == 0.0 {
        return Err(Error::ZeroProbabilityOutcome(p));
    }
    let mut pool = CovariancePool::new();
    let mut remap: HashMap<usize, usize> = HashMap::new();
    for (_, _, k) in &peaks {
        if !remap.contains_key(k) {
            let i = pool.insert(covs[*k].clone())?;
            remap.insert(*k, i);
        }
    }
    let peaks: Vec<Peak> = peaks
        .into_iter()
        .filter(|(lw, _, _)| lw.re > f64::NEG_INFINITY)
        .map(|(lw, mean, k)| Peak {
            ln_weight: lw - ln_total,
            mean,
            cov: remap[&k],
        })
        .collect();
    let mix = Mixture::from_parts(dim, peaks, pool);
    let mut out = State::new(state.hbar(), mix)?;
    out.diagnostics = state.diagnostics.clone();
    Ok((out, p))
}

/// A measurement operator whose Weyl symbol is a (not necessarily
/// normalized) Gaussian mixture over the measured modes.
#[derive(Clone, Debug)]
pub struct MeasurementOperator {
    pub modes: Vec<usize>,
    pub mixture: Mixture,
}

impl MeasurementOperator {
    pub fn new(modes: Vec<usize>, mixture: Mixture) -> Result<Self> {
        if mixture.dim() != 2 * modes.len() {
            return Err(Error::DimensionMismatch("operator dimension".into()));
        }
        Ok(Self { modes, mixture })
    }

    /// |ψ⟩⟨ψ| (or ρ) for a k-mode state: symbol (2πħ)^k W.
    pub fn projector(modes: Vec<usize>, state: &State) -> Result<Self> {
        if state.num_modes() != modes.len() {
            return Err(Error::DimensionMismatch("projector modes".into()));
        }
        let k = modes.len() as f64;
        let ln_scale = k * (2.0 * PI * state.hbar()).ln();
        let (dim, peaks, pool) = state.mixture().clone().into_parts();
        let peaks = peaks
            .into_iter()
            .map(|mut p| {
                p.ln_weight += ln_scale;
                p
            })
            .collect();
        Self::new(modes, Mixture::from_parts(dim, peaks, pool))
    }

    pub fn vacuum_projector(modes: Vec<usize>, hbar: f64) -> Result<Self> {
        let v = crate::states::vacuum(modes.len(), hbar)?;
        Self::projector(modes, &v)
    }
}

fn mixture_terms(state: &State, op: &MeasurementOperator) -> Result<(Vec<usize>, Vec<(C64, CVec, usize)>, Vec<CMat>, Vec<(usize, usize)>)> {
    validate_modes(&op.modes, state.num_modes())?;
    let others: Vec<usize> = (0..state.num_modes()).filter(|m| !op.modes.contains(m)).collect();
    let keep = quadrature_indices(&others);
    let meas = quadrature_indices(&op.modes);
    let mix = state.mixture();
    let opm = &op.mixture;
    let mut conds: Vec<Conditioner> = Vec::new();
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    for a in 0..mix.pool().len() {
        for b in 0..opm.pool().len() {
            index.insert((a, b), conds.len());
            conds.push(Conditioner::new(
                mix.pool().get(a).matrix(),
                &keep,
                &meas,
                Some(opm.pool().get(b).matrix()),
            )?);
        }
    }
    let mut out = Vec::with_capacity(mix.len() * opm.len());
    let mut prov = Vec::with_capacity(mix.len() * opm.len());
    for (i, p) in mix.peaks().iter().enumerate() {
        for (j, q) in opm.peaks().iter().enumerate() {
            let k = index[&(p.cov, q.cov)];
            let (lf, m) = conds[k].apply(&p.mean, q.mean.as_slice());
            out.push((p.ln_weight + q.ln_weight + lf, m, k));
            prov.push((i, j));
        }
    }
    Ok((keep, out, conds.into_iter().map(|c| c.cov_a).collect(), prov))
}

/// p(M) = Σ_m Σ_j c_m d_j G_{μ_m, Σ_m + Σ_j}(μ_j) for the measured modes.
pub fn mixture_measurement_probability(state: &State, op: &MeasurementOperator) -> Result<f64> {
    let (_, terms, _, _) = mixture_terms_all(state, op)?;
    Ok(real_density(&terms.iter().map(|t| t.0).collect::<Vec<_>>())?.0)
}

fn mixture_terms_all(state: &State, op: &MeasurementOperator) -> Result<(Vec<usize>, Vec<(C64, CVec, usize)>, Vec<CMat>, Vec<(usize, usize)>)> {
    if op.modes.len() == state.num_modes() {
        // nothing left to condition: evaluate the overlap directly
        let mix = state.mixture();
        let opm = &op.mixture;
        let mut terms = Vec::new();
        for p in mix.peaks() {
            for q in opm.peaks() {
                let cov = mix.covariance(p).matrix() + opm.covariance(q).matrix();
                let c = Covariance::new(cov)?;
                terms.push((p.ln_weight + q.ln_weight + c.ln_density_complex(p.mean.as_slice(), q.mean.as_slice()), CVec::zeros(0), 0));
            }
        }
        return Ok((vec![], terms, vec![], vec![]));
    }
    mixture_terms(state, op)
}

pub fn condition_on_mixture_measurement(state: &State, op: &MeasurementOperator) -> Result<ConditionalOutcome> {
    if op.modes.len() >= state.num_modes() {
        return Err(Error::InvalidModes("conditioning needs at least one unmeasured mode".into()));
    }
    let (keep, terms, covs, provenance) = mixture_terms(state, op)?;
    let (st, p) = assemble(state, keep.len(), terms, covs)?;
    Ok(ConditionalOutcome {
        outcome: vec![],
        probability: p,
        state: st,
        provenance,
    })
}

/// Threshold detector on one mode: click probability 1 − p(vacuum) and the
/// state of the remaining modes given a click.
pub fn threshold_click(state: &State, mode: usize) -> Result<ConditionalOutcome> {
    let op = MeasurementOperator::vacuum_projector(vec![mode], state.hbar())?;
    let no_click = condition_on_mixture_measurement(state, &op)?;
    let p0 = no_click.probability;
    let p1 = 1.0 - p0;
    if !(p1 > 1e-13) {
        return Err(Error::ZeroProbabilityOutcome(p1));
    }
    let keep: Vec<usize> = (0..state.num_modes()).filter(|&m| m != mode).collect();
    let marginal = state.partial_trace(&keep)?;
    let mut mix = marginal.mixture().clone();
    mix.append(no_click.state.mixture(), C64::new(p0, 0.0).ln() + C64::new(0.0, PI))?;
    let prov = (0..marginal.num_peaks()).map(|i| (i, 0)).chain(no_click.provenance.iter().map(|&(i, _)| (i, 1))).collect();
    let st = State::normalized_from(state.hbar(), mix)?;
    Ok(ConditionalOutcome {
        outcome: vec![1.0],
        probability: p1,
        state: st,
        provenance: prov,
    })
}

/// Rejection sampler for a real-covariance Gaussian mixture density.
#[derive(Clone, Debug)]
pub struct RejectionSampler {
    target: Mixture,
    bound_ln_weights: Vec<f64>,
    bound_peaks: Vec<usize>,
    re_means: Vec<CVec>,
    chol: Vec<RMat>,
    picker: WeightedIndex<f64>,
    ln_bound_total: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub outcome: Vec<f64>,
    pub iterations: u64,
}

pub const DEFAULT_MAX_ITERS: u64 = 1_000_000;

impl RejectionSampler {
    pub fn new(target: &Mixture) -> Result<Self> {
        let mut target = target.clone();
        target.merge_duplicates(1e-10);
        target.compact_pool()?;
        if target.pool().iter().any(|c| !c.is_real()) {
            return Err(Error::Unsupported("sampling needs real covariances".into()));
        }
        let mut chol = Vec::new();
        for c in target.pool().iter() {
            let m = crate::linalg::real_part(c.matrix());
            let l = m
                .cholesky()
                .ok_or_else(|| Error::InvalidCovariance("outcome covariance not positive definite".into()))?;
            chol.push(l.l());
        }
        let mut bound_ln_weights = Vec::new();
        let mut bound_peaks = Vec::new();
        let mut re_means = Vec::new();
        for (i, p) in target.peaks().iter().enumerate() {
            let real_mean = p.mean.iter().all(|z| z.im == 0.0);
            let w = p.weight();
            let negative = w.re < 0.0 && w.im.abs() <= 1e-14 * w.norm();
            re_means.push(p.mean.map(|z| C64::new(z.re, 0.0)));
            if real_mean && negative {
                continue;
            }
            let cov = target.covariance(p);
            let b = CVec::from_iterator(p.mean.len(), p.mean.iter().map(|z| C64::new(z.im, 0.0)));
            let infl = 0.5 * (b.transpose() * cov.inverse() * &b)[(0, 0)].re;
            bound_ln_weights.push(p.ln_weight.re + infl);
            bound_peaks.push(i);
        }
        if bound_peaks.is_empty() {
            return Err(Error::InvalidState("no positive peaks to bound the density".into()));
        }
        let mx = bound_ln_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let ln_bound_total = mx + bound_ln_weights.iter().map(|w| (w - mx).exp()).sum::<f64>().ln();
        let picker = WeightedIndex::new(bound_ln_weights.iter().map(|w| (w - mx).exp()))
            .map_err(|e| Error::InvalidState(format!("bound weights: {e}")))?;
        Ok(Self {
            target,
            bound_ln_weights,
            bound_peaks,
            re_means,
            chol,
            picker,
            ln_bound_total,
        })
    }

    /// 1/𝒩: the expected acceptance rate for a normalized target.
    pub fn expected_acceptance(&self) -> f64 {
        (-self.ln_bound_total).exp()
    }

    pub fn target(&self) -> &Mixture {
        &self.target
    }

    pub fn bound(&self, r: &[f64]) -> f64 {
        self.bound_peaks
            .iter()
            .zip(&self.bound_ln_weights)
            .map(|(&i, &lw)| {
                let p = &self.target.peaks()[i];
                (lw + self.target.covariance(p).ln_density(self.re_means[i].as_slice(), r).re).exp()
            })
            .sum()
    }

    pub fn density(&self, r: &[f64]) -> f64 {
        self.target.eval(r).re
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, max_iters: u64) -> Result<Sample> {
        let dim = self.target.dim();
        for it in 1..=max_iters {
            let k = self.bound_peaks[self.picker.sample(rng)];
            let p = &self.target.peaks()[k];
            let z = crate::linalg::RVec::from_iterator(dim, (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let x = &self.chol[p.cov] * z;
            let r: Vec<f64> = (0..dim).map(|i| self.re_means[k][i].re + x[i]).collect();
            let g = self.bound(&r);
            let y = rng.random::<f64>() * g;
            if y <= self.density(&r) {
                return Ok(Sample {
                    outcome: r,
                    iterations: it,
                });
            }
        }
        Err(Error::SamplingStall {
            iterations: max_iters,
            expected_acceptance: self.expected_acceptance(),
        })
    }
}

/// Draw one general-dyne outcome.
pub fn sample_generaldyne<R: Rng + ?Sized>(state: &State, meas: &GeneralDyne, rng: &mut R) -> Result<Sample> {
    let dist = outcome_distribution(state, meas)?;
    RejectionSampler::new(&dist)?.sample(rng, DEFAULT_MAX_ITERS)
}

/// Sample an outcome and condition on it.
pub fn measure<R: Rng + ?Sized>(state: &State, meas: &GeneralDyne, rng: &mut R) -> Result<ConditionalOutcome> {
    let s = sample_generaldyne(state, meas, rng)?;
    condition_on_generaldyne(state, meas, &s.outcome)
}

/// Homodyne on the second of two single-mode states after a joint two-mode
/// Gaussian channel, evaluated pair by pair so the |a|·|b| joint mixture is
/// never built. The first mode is kept.
#[derive(Clone, Debug)]
pub struct FusedHomodyne {
    hbar: f64,
    diagnostics: crate::mixture::Diagnostics,
    a_w: Vec<C64>,
    b_w: Vec<C64>,
    a_cov: Vec<usize>,
    b_cov: Vec<usize>,
    ua: Vec<[C64; 3]>,
    ub: Vec<[C64; 3]>,
    nb_cov: usize,
    pairs: Vec<PairCond>,
}

#[derive(Clone, Debug)]
struct PairCond {
    inv_s: C64,
    ln_norm: C64,
    var_b: C64,
    gain: [C64; 2],
    post: Covariance,
}

impl FusedHomodyne {
    /// `channel` acts on (a, b); the quadrature x_θ of b is measured.
    pub fn new(a: &State, b: &State, channel: &crate::channels::GaussianChannel, angle: f64) -> Result<Self> {
        if a.num_modes() != 1 || b.num_modes() != 1 || channel.num_modes() != 2 {
            return Err(Error::DimensionMismatch("fused homodyne needs two single-mode states".into()));
        }
        if a.hbar() != b.hbar() {
            return Err(Error::HbarMismatch(a.hbar(), b.hbar()));
        }
        let rot = rotation(-angle).to_channel().embedded(&[1], 2)?;
        let ch = channel.then(&rot);
        let x = to_complex(&ch.x);
        // rows kept: q_a, p_a, then the measured coordinate
        let rows = [0usize, 1, 2];
        let proj = |m: &CVec, off: usize, add_d: bool| -> [C64; 3] {
            let mut out = [C64::new(0.0, 0.0); 3];
            for (o, &r) in rows.iter().enumerate() {
                let mut acc = if add_d { C64::new(ch.d[r], 0.0) } else { C64::new(0.0, 0.0) };
                for j in 0..2 {
                    acc += x[(r, off + j)] * m[j];
                }
                out[o] = acc;
            }
            out
        };
        let ua = a.peaks().iter().map(|p| proj(&p.mean, 0, false)).collect();
        let ub = b.peaks().iter().map(|p| proj(&p.mean, 2, true)).collect();
        let mut pairs = Vec::new();
        for ca in a.pool().iter() {
            for cb in b.pool().iter() {
                let mut joint = CMat::zeros(4, 4);
                joint.view_mut((0, 0), (2, 2)).copy_from(ca.matrix());
                joint.view_mut((2, 2), (2, 2)).copy_from(cb.matrix());
                let joint = symmetrize(&(&x * joint * x.transpose() + to_complex(&ch.y)));
                let cond = Conditioner::new(&joint, &[0, 1], &[2], None)?;
                pairs.push(PairCond {
                    inv_s: cond.s.inverse()[(0, 0)],
                    ln_norm: cond.s.ln_norm(),
                    var_b: cond.s.matrix()[(0, 0)],
                    gain: [cond.gain[(0, 0)], cond.gain[(1, 0)]],
                    post: Covariance::new(cond.cov_a.clone())?,
                });
            }
        }
        let mut diagnostics = a.diagnostics.clone();
        diagnostics.pruned_mass += b.diagnostics.pruned_mass;
        diagnostics.truncated_mass += b.diagnostics.truncated_mass;
        diagnostics.warnings.extend(b.diagnostics.warnings.iter().cloned());
        Ok(Self {
            hbar: a.hbar(),
            diagnostics,
            a_w: a.peaks().iter().map(|p| p.ln_weight).collect(),
            b_w: b.peaks().iter().map(|p| p.ln_weight).collect(),
            a_cov: a.peaks().iter().map(|p| p.cov).collect(),
            b_cov: b.peaks().iter().map(|p| p.cov).collect(),
            ua,
            ub,
            nb_cov: b.pool().len(),
            pairs,
        })
    }

    pub fn num_pairs(&self) -> usize {
        self.a_w.len() * self.b_w.len()
    }

    /// Outcome density as a 1-D mixture, with coincident peaks merged.
    pub fn marginal(&self) -> Result<Mixture> {
        let nb = self.b_w.len();
        let q = 1e-10;
        let chunks: Vec<HashMap<(usize, i64, i64), (C64, C64)>> = (0..self.a_w.len())
            .into_par_iter()
            .map(|m| {
                let mut acc: HashMap<(usize, i64, i64), (C64, C64)> = HashMap::new();
                for k in 0..nb {
                    let pc = self.a_cov[m] * self.nb_cov + self.b_cov[k];
                    let mu = self.ua[m][2] + self.ub[k][2];
                    let key = (pc, (mu.re / q).round() as i64, (mu.im / q).round() as i64);
                    let lw = self.a_w[m] + self.b_w[k];
                    acc.entry(key)
                        .and_modify(|v| v.0 = crate::mixture::log_add(v.0, lw))
                        .or_insert((lw, mu));
                }
                acc
            })
            .collect();
        let mut all: HashMap<(usize, i64, i64), (C64, C64)> = HashMap::new();
        let mut order = Vec::new();
        for chunk in chunks {
            let mut keys: Vec<_> = chunk.into_iter().collect();
            keys.sort_by(|a, b| a.0.cmp(&b.0));
            for (key, (lw, mu)) in keys {
                match all.get_mut(&key) {
                    Some(v) => v.0 = crate::mixture::log_add(v.0, lw),
                    None => {
                        all.insert(key, (lw, mu));
                        order.push(key);
                    }
                }
            }
        }
        let mut mix = Mixture::new(1);
        let mut pool_idx: HashMap<usize, usize> = HashMap::new();
        for key in order {
            let (lw, mu) = all[&key];
            if lw.re == f64::NEG_INFINITY || !lw.is_finite() {
                continue;
            }
            let ci = match pool_idx.get(&key.0) {
                Some(&i) => i,
                None => {
                    let i = mix.add_covariance(CMat::from_element(1, 1, self.pairs[key.0].var_b))?;
                    pool_idx.insert(key.0, i);
                    i
                }
            };
            mix.push(lw, CVec::from_element(1, mu), ci)?;
        }
        Ok(mix)
    }

    fn pair_term(&self, m: usize, k: usize, r: f64) -> (C64, [C64; 2], usize) {
        let pc = self.a_cov[m] * self.nb_cov + self.b_cov[k];
        let p = &self.pairs[pc];
        let ua = &self.ua[m];
        let ub = &self.ub[k];
        let z = C64::new(r, 0.0) - (ua[2] + ub[2]);
        let lw = self.a_w[m] + self.b_w[k] - 0.5 * z * z * p.inv_s - p.ln_norm;
        let mean = [ua[0] + ub[0] + p.gain[0] * z, ua[1] + ub[1] + p.gain[1] * z];
        (lw, mean, pc)
    }

    /// Condition on outcome `r`, keeping pairs whose effective magnitude is
    /// at least `prune_tol` times the largest.
    pub fn condition(&self, r: f64, prune_tol: f64) -> Result<ConditionalOutcome> {
        let nb = self.b_w.len();
        let terms: Vec<(C64, f64)> = (0..self.a_w.len())
            .into_par_iter()
            .flat_map_iter(|m| {
                (0..nb).map(move |k| {
                    let (lw, mean, pc) = self.pair_term(m, k, r);
                    (lw, lw.re + self.pairs[pc].post.ln_sup(&mean))
                })
            })
            .collect();
        let lws: Vec<C64> = terms.iter().map(|t| t.0).collect();
        let (p, ln_total, scale) = real_density(&lws)?;
        if !(p > 1e-13 * scale) || p == 0.0 {
            return Err(Error::ZeroProbabilityOutcome(p));
        }
        let best = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
        let cut = if prune_tol > 0.0 { best + prune_tol.ln() } else { f64::NEG_INFINITY };
        let mut mix = Mixture::new(2);
        let mut pool_idx: HashMap<usize, usize> = HashMap::new();
        let mut provenance = Vec::new();
        let mut dropped = Vec::new();
        for (idx, &(lw, eff)) in terms.iter().enumerate() {
            if lw.re == f64::NEG_INFINITY {
                continue;
            }
            if eff < cut {
                dropped.push(lw);
                continue;
            }
            let (m, k) = (idx / nb, idx % nb);
            let (lw, mean, pc) = self.pair_term(m, k, r);
            let ci = match pool_idx.get(&pc) {
                Some(&i) => i,
                None => {
                    let i = mix.add_covariance(self.pairs[pc].post.matrix().clone())?;
                    pool_idx.insert(pc, i);
                    i
                }
            };
            mix.push(lw - ln_total, CVec::from_row_slice(&mean), ci)?;
            provenance.push((m, k));
        }
        let lost = if dropped.is_empty() {
            0.0
        } else {
            (log_sum_exp(dropped.into_iter()) - ln_total).exp().norm()
        };
        mix.normalize()?;
        let mut st = State::new(self.hbar, mix)?;
        st.diagnostics = self.diagnostics.clone();
        st.diagnostics.pruned_mass += lost;
        Ok(ConditionalOutcome {
            outcome: vec![r],
            probability: p,
            state: st,
            provenance,
        })
    }
}
