//! Constructors for Gaussian primitives and bosonic-qubit states.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{to_complex, CMat, CVec, RMat, RVec, C64};
use crate::mixture::{log_sum_exp, Mixture, State};

/// Default relative weight below which constructed peaks are discarded.
pub const DUST: f64 = 1e-12;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn real_vec(v: &[f64]) -> CVec {
    CVec::from_iterator(v.len(), v.iter().map(|&x| c(x, 0.0)))
}

fn rot(theta: f64) -> RMat {
    let (s, co) = theta.sin_cos();
    RMat::from_row_slice(2, 2, &[co, -s, s, co])
}

fn single_gaussian(mean: CVec, cov: RMat, hbar: f64) -> Result<State> {
    let mut mix = Mixture::new(mean.len());
    let k = mix.add_covariance(to_complex(&cov))?;
    mix.push(c(0.0, 0.0), mean, k)?;
    State::new(hbar, mix)
}

pub fn vacuum(num_modes: usize, hbar: f64) -> Result<State> {
    if num_modes == 0 {
        return Err(Error::InvalidModes("vacuum needs at least one mode".into()));
    }
    let n = 2 * num_modes;
    single_gaussian(CVec::zeros(n), RMat::identity(n, n) * (hbar / 2.0), hbar)
}

/// Single-mode Gaussian state with a real mean and covariance.
pub fn gaussian(mean: &RVec, cov: &RMat, hbar: f64) -> Result<State> {
    single_gaussian(mean.map(|x| c(x, 0.0)), cov.clone(), hbar)
}

pub fn coherent(alpha: C64, hbar: f64) -> Result<State> {
    let s = (2.0 * hbar).sqrt();
    single_gaussian(real_vec(&[s * alpha.re, s * alpha.im]), RMat::identity(2, 2) * (hbar / 2.0), hbar)
}

/// ħ/2 · R(φ/2) diag(e^{-2r}, e^{2r}) R(φ/2)ᵀ
pub fn squeezed_covariance(r: f64, phi: f64, hbar: f64) -> RMat {
    let rr = rot(phi / 2.0);
    let d = RMat::from_diagonal(&RVec::from_vec(vec![(-2.0 * r).exp(), (2.0 * r).exp()]));
    &rr * d * rr.transpose() * (hbar / 2.0)
}

pub fn squeezed(r: f64, phi: f64, hbar: f64) -> Result<State> {
    displaced_squeezed(c(0.0, 0.0), r, phi, hbar)
}

pub fn displaced_squeezed(alpha: C64, r: f64, phi: f64, hbar: f64) -> Result<State> {
    let s = (2.0 * hbar).sqrt();
    single_gaussian(real_vec(&[s * alpha.re, s * alpha.im]), squeezed_covariance(r, phi, hbar), hbar)
}

pub fn thermal(nbar: f64, hbar: f64) -> Result<State> {
    if !(nbar >= 0.0) {
        return Err(Error::InvalidParameter(format!("nbar = {nbar}")));
    }
    single_gaussian(CVec::zeros(2), RMat::identity(2, 2) * (hbar * (nbar + 0.5)), hbar)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    #[default]
    Real,
    Complex,
}

/// Bloch angles for a0|0⟩ + a1|1⟩, with the state written as
/// cos(θ/2)|0⟩ + e^{-iφ} sin(θ/2)|1⟩ up to global phase.
pub fn bloch_angles(a0: C64, a1: C64) -> (f64, f64) {
    let theta = 2.0 * a1.norm().atan2(a0.norm());
    let phi = if a0.norm() == 0.0 || a1.norm() == 0.0 {
        0.0
    } else {
        -(a1 / a0).arg()
    };
    (theta, phi)
}

pub fn bloch_amplitudes(theta: f64, phi: f64) -> (C64, C64) {
    (
        c((theta / 2.0).cos(), 0.0),
        C64::from_polar((theta / 2.0).sin(), -phi),
    )
}

/// Per-peak squeezing of a finite-energy GKP state in dB.
pub fn gkp_epsilon_to_db(epsilon: f64) -> f64 {
    -10.0 * epsilon.tanh().log10()
}

pub fn gkp_db_to_epsilon(db: f64) -> f64 {
    10f64.powf(-db / 10.0).atanh()
}

pub fn db_to_squeezing(db: f64) -> f64 {
    db * 10f64.ln() / 20.0
}

pub fn squeezing_to_db(r: f64) -> f64 {
    20.0 * r / 10f64.ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GkpParams {
    pub theta: f64,
    pub phi: f64,
    pub epsilon: f64,
    /// Lattice bound; chosen from ε and the dust threshold when absent.
    #[serde(default)]
    pub cutoff: Option<usize>,
    #[serde(default)]
    pub representation: Representation,
    #[serde(default = "default_dust")]
    pub dust: f64,
}

fn default_dust() -> f64 {
    DUST
}

impl GkpParams {
    pub fn new(theta: f64, phi: f64, epsilon: f64) -> Self {
        Self {
            theta,
            phi,
            epsilon,
            cutoff: None,
            representation: Representation::Real,
            dust: DUST,
        }
    }

    pub fn zero(epsilon: f64) -> Self {
        Self::new(0.0, 0.0, epsilon)
    }

    pub fn one(epsilon: f64) -> Self {
        Self::new(PI, 0.0, epsilon)
    }

    pub fn plus(epsilon: f64) -> Self {
        Self::new(PI / 2.0, 0.0, epsilon)
    }

    pub fn minus(epsilon: f64) -> Self {
        Self::new(PI / 2.0, PI, epsilon)
    }

    pub fn plus_i(epsilon: f64) -> Self {
        Self::new(PI / 2.0, -PI / 2.0, epsilon)
    }

    /// |0⟩ + e^{iπ/4}|1⟩
    pub fn magic(epsilon: f64) -> Self {
        let (t, p) = bloch_angles(
            C64::from_polar(0.5f64.sqrt(), -PI / 8.0),
            C64::from_polar(0.5f64.sqrt(), PI / 8.0),
        );
        Self::new(t, p, epsilon)
    }

    pub fn with_cutoff(mut self, cutoff: usize) -> Self {
        self.cutoff = Some(cutoff);
        self
    }

    pub fn with_representation(mut self, rep: Representation) -> Self {
        self.representation = rep;
        self
    }

    pub fn with_dust(mut self, dust: f64) -> Self {
        self.dust = dust;
        self
    }

    /// Lattice half-width in units of √(πħ)/2 at which the envelope
    /// reaches the dust threshold.
    pub fn default_cutoff(&self) -> usize {
        let a = PI * self.epsilon.tanh() / 4.0;
        (-self.ln_envelope_floor() / a).sqrt().ceil() as usize
    }

    // Envelope level e^{-aR²} beyond which the lattice tail, roughly
    // (π/a)e^{-aR²}, carries less than `dust` of the weight.
    fn ln_envelope_floor(&self) -> f64 {
        let a = PI * self.epsilon.tanh() / 4.0;
        (a * self.dust.max(1e-300) / PI).ln().min(0.0)
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!("epsilon = {}", self.epsilon)));
        }
        if self.cutoff == Some(0) {
            return Err(Error::InvalidParameter("cutoff must be at least 1".into()));
        }
        if !(self.dust >= 0.0 && self.dust < 1.0) {
            return Err(Error::InvalidParameter(format!("dust = {}", self.dust)));
        }
        Ok(())
    }
}

/// Coefficient of the ideal-GKP peak at lattice point (k, ℓ), up to the
/// common 1/(4√π) factor.
pub fn ideal_gkp_coefficient(k: i64, l: i64, theta: f64, phi: f64) -> f64 {
    let (km, lm) = (k.rem_euclid(4), l.rem_euclid(4));
    let (ct, st) = (theta.cos(), theta.sin());
    match (km % 2, lm % 2) {
        (0, 0) => 1.0,
        (0, 1) => {
            if km == 0 {
                ct
            } else {
                -ct
            }
        }
        (1, 0) => {
            if lm == 0 {
                st * phi.cos()
            } else {
                -st * phi.cos()
            }
        }
        _ => {
            if km == lm {
                -st * phi.sin()
            } else {
                st * phi.sin()
            }
        }
    }
}

/// The ideal GKP Wigner function truncated to |k|,|ℓ| ≤ cutoff: a list of
/// weighted Dirac peaks.
#[derive(Clone, Debug)]
pub struct IdealGkp {
    pub hbar: f64,
    pub peaks: Vec<(f64, [f64; 2])>,
}

impl IdealGkp {
    pub fn new(theta: f64, phi: f64, cutoff: usize, hbar: f64) -> Self {
        let s = (PI * hbar).sqrt() / 2.0;
        let k = cutoff as i64;
        let mut peaks = Vec::new();
        for i in -k..=k {
            for j in -k..=k {
                let w = ideal_gkp_coefficient(i, j, theta, phi) / (4.0 * PI.sqrt());
                if w != 0.0 {
                    peaks.push((w, [i as f64 * s, j as f64 * s]));
                }
            }
        }
        Self { hbar, peaks }
    }
}

pub fn gkp(params: &GkpParams, hbar: f64) -> Result<State> {
    params.validate()?;
    match params.representation {
        Representation::Real => gkp_real(params, hbar),
        Representation::Complex => gkp_complex(params, hbar),
    }
}

fn gkp_real(p: &GkpParams, hbar: f64) -> Result<State> {
    let eps = p.epsilon;
    let t = eps.tanh();
    let a = PI * t / 4.0;
    let shrink = 1.0 / eps.cosh();
    let s = (PI * hbar).sqrt() / 2.0;

    // Normalization over the whole lattice, summed per residue class.
    let kfull = ((50.0 / a).sqrt().ceil() as i64) + 4;
    let mut sr = [0.0f64; 4];
    for k in -kfull..=kfull {
        sr[k.rem_euclid(4) as usize] += (-a * (k * k) as f64).exp();
    }
    let mut norm = 0.0;
    for r in 0..4 {
        for q in 0..4 {
            norm += ideal_gkp_coefficient(r, q, p.theta, p.phi) * sr[r as usize] * sr[q as usize];
        }
    }
    if !(norm > 0.0) {
        return Err(Error::InvalidState("GKP normalization is not positive".into()));
    }

    let cutoff = p.cutoff.unwrap_or_else(|| p.default_cutoff()) as i64;
    let mut mix = Mixture::new(2);
    let cov = mix.add_covariance(to_complex(&(RMat::identity(2, 2) * (hbar / 2.0 * t))))?;
    let ln_floor = if p.dust > 0.0 { p.ln_envelope_floor() } else { f64::NEG_INFINITY };
    let mut kept = 0.0;
    for k in -cutoff..=cutoff {
        for l in -cutoff..=cutoff {
            let cf = ideal_gkp_coefficient(k, l, p.theta, p.phi);
            if cf == 0.0 {
                continue;
            }
            let env = -a * ((k * k + l * l) as f64);
            if env < ln_floor {
                continue;
            }
            let w = cf * env.exp() / norm;
            kept += w;
            let mean = real_vec(&[k as f64 * s * shrink, l as f64 * s * shrink]);
            mix.push_weight(c(w, 0.0), mean, cov)?;
        }
    }
    let mut st = State::new(hbar, mix)?;
    finish_truncation(&mut st, 1.0 - kept, "GKP");
    Ok(st)
}

fn finish_truncation(st: &mut State, truncated: f64, what: &str) {
    st.diagnostics.truncated_mass = truncated;
    if truncated.abs() > 1e-10 {
        st.add_warning(format!(
            "{what} cutoff leaves truncated weight {truncated:.3e}; raise the cutoff"
        ));
    }
}

fn gkp_complex(p: &GkpParams, hbar: f64) -> Result<State> {
    let eps = p.epsilon;
    let alpha = 1.0 / eps.tanh();
    let beta = -1.0 / eps.sinh();
    let (a0, a1) = bloch_amplitudes(p.theta, p.phi);
    let amp = [a0, a1];
    let sq = (PI * hbar).sqrt();

    let ln_c = |n: i64, m: i64| -> C64 {
        let w = amp[n.rem_euclid(2) as usize] * amp[m.rem_euclid(2) as usize].conj();
        if w == c(0.0, 0.0) {
            return c(f64::NEG_INFINITY, 0.0);
        }
        w.ln()
            + (-alpha * PI * ((n * n + m * m) as f64) / 2.0
                + beta * beta * PI * ((n + m) * (n + m)) as f64 / (4.0 * alpha))
    };

    let kfull = ((50.0 / (PI * eps.tanh())).sqrt().ceil() as i64) + 3;
    let mut all = Vec::new();
    for n in -kfull..=kfull {
        for m in -kfull..=kfull {
            let l = ln_c(n, m);
            if l.re.is_finite() {
                all.push(l);
            }
        }
    }
    let ln_norm = log_sum_exp(all.into_iter());

    let cutoff = p
        .cutoff
        .unwrap_or_else(|| p.default_cutoff() / 2 + 2) as i64;
    let mut mix = Mixture::new(2);
    let cov = mix.add_covariance(to_complex(&RMat::from_diagonal(&RVec::from_vec(vec![
        hbar / (2.0 * alpha),
        hbar * alpha / 2.0,
    ]))))?;
    for n in -cutoff..=cutoff {
        for m in -cutoff..=cutoff {
            let l = ln_c(n, m);
            if !l.re.is_finite() {
                continue;
            }
            let mean = CVec::from_vec(vec![
                c(-beta * sq * (n + m) as f64 / (2.0 * alpha), 0.0),
                c(0.0, beta * sq * (n - m) as f64 / 2.0),
            ]);
            mix.push(l - ln_norm, mean, cov)?;
        }
    }
    let kept = mix.total();
    mix.prune(p.dust)?;
    let mut st = State::new(hbar, mix)?;
    finish_truncation(&mut st, 1.0 - kept.re, "GKP");
    Ok(st)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatParams {
    pub alpha: C64,
    /// 0 for even, 1 for odd.
    pub parity: u8,
    #[serde(default = "complex_rep")]
    pub representation: Representation,
    /// Precision of the real-valued fringe expansion.
    #[serde(default = "default_d")]
    pub d: f64,
    #[serde(default = "default_dust")]
    pub dust: f64,
}

fn complex_rep() -> Representation {
    Representation::Complex
}

fn default_d() -> f64 {
    6.0
}

impl CatParams {
    pub fn new(alpha: C64, parity: u8) -> Self {
        Self {
            alpha,
            parity,
            representation: Representation::Complex,
            d: default_d(),
            dust: DUST,
        }
    }

    pub fn real(mut self, d: f64) -> Self {
        self.representation = Representation::Real;
        self.d = d;
        self
    }
}

pub fn cat(p: &CatParams, hbar: f64) -> Result<State> {
    if p.parity > 1 {
        return Err(Error::InvalidParameter(format!("parity {}", p.parity)));
    }
    let a2 = p.alpha.norm_sqr();
    let k = p.parity as f64;
    if p.alpha.norm() == 0.0 && p.parity == 1 {
        return Err(Error::InvalidState("odd cat with alpha = 0 has no normalization".into()));
    }
    let s = (2.0 * hbar).sqrt();
    let vac = RMat::identity(2, 2) * (hbar / 2.0);
    // raw weights: 1, 1, e^{-iπk-2|α|²} (twice, conjugated)
    let raw_total = 2.0 + 2.0 * (-2.0 * a2).exp() * (PI * k).cos();
    let ln_norm = -raw_total.ln();
    let ln_cz = c(ln_norm - 2.0 * a2, -PI * k);
    match p.representation {
        Representation::Complex => {
            let mut mix = Mixture::new(2);
            let cov = mix.add_covariance(to_complex(&vac))?;
            let m = real_vec(&[s * p.alpha.re, s * p.alpha.im]);
            mix.push(c(ln_norm, 0.0), m.clone(), cov)?;
            mix.push(c(ln_norm, 0.0), -m, cov)?;
            let z = CVec::from_vec(vec![c(0.0, s * p.alpha.im), c(0.0, -s * p.alpha.re)]);
            mix.push(ln_cz, z.clone(), cov)?;
            mix.push(ln_cz.conj(), z.map(|x| x.conj()), cov)?;
            State::new(hbar, mix)
        }
        Representation::Real => {
            if !(p.d > 0.0) {
                return Err(Error::InvalidParameter(format!("D = {}", p.d)));
            }
            let r = p.alpha.norm();
            let mut terms: Vec<(f64, RVec, RMat)> = vec![
                (ln_norm.exp(), RVec::from_vec(vec![s * r, 0.0]), vac.clone()),
                (ln_norm.exp(), RVec::from_vec(vec![-s * r, 0.0]), vac.clone()),
            ];
            if r > 0.0 {
                terms.extend(real_pair_expansion(
                    ln_cz,
                    &RVec::zeros(2),
                    &RVec::from_vec(vec![0.0, -s * r]),
                    &vac,
                    p.d,
                    p.dust * ln_norm.exp(),
                )?);
            } else {
                terms.push((2.0 * ln_cz.exp().re, RVec::zeros(2), vac.clone()));
            }
            let rr = rot(p.alpha.arg());
            let mut mix = Mixture::new(2);
            for (w, m, cv) in terms {
                let k = mix.add_covariance(to_complex(&(&rr * cv * rr.transpose())))?;
                mix.push_weight(c(w, 0.0), (&rr * m).map(|x| c(x, 0.0)), k)?;
            }
            let total = mix.total();
            let mut st = State::new(hbar, mix)?;
            finish_truncation(&mut st, 1.0 - total.re, "cat fringe");
            Ok(st)
        }
    }
}

/// Real-valued expansion of c·G_{a+ib,Σ} + c*·G_{a-ib,Σ} for real Σ.
///
/// The pair equals 2|C| cos(κᵀ(ξ-a) - φ) G_{a,Σ}(ξ) with κ = Σ⁻¹b and
/// C = c·exp(½bᵀΣ⁻¹b) = |C|e^{-iφ}; the cosine is expanded as a sum of
/// Gaussians of width set by D, each of which merges with G_{a,Σ}.
pub fn real_pair_expansion(
    ln_c: C64,
    a: &RVec,
    b: &RVec,
    sigma: &RMat,
    d: f64,
    dust_abs: f64,
) -> Result<Vec<(f64, RVec, RMat)>> {
    let ch = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidCovariance("pair covariance not positive definite".into()))?;
    let kappa = ch.solve(b);
    let btb = b.dot(&kappa);
    let ln_big = ln_c + 0.5 * btb;
    let mag_ln = ln_big.re;
    let phi = -ln_big.im;
    if btb == 0.0 {
        return Ok(vec![(2.0 * mag_ln.exp() * phi.cos(), a.clone(), sigma.clone())]);
    }
    let s2 = PI * PI * d / 2.0;
    let v = btb + s2;
    let sk = sigma * &kappa;
    let cov = sigma - (&sk * sk.transpose()) / v;
    let ln_cd = PI * PI * d / 4.0 - (2.0 * (PI * d).sqrt()).ln();
    let ln_pref = 2f64.ln() + mag_ln + ln_cd + 0.5 * (s2 / v).ln();
    let term = |m: i64| -> (f64, RVec) {
        let x = phi + PI * m as f64;
        let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let w = sign * (ln_pref - x * x / (2.0 * v)).exp();
        (w, a + &sk * (x / v))
    };
    let m0 = (-phi / PI).round() as i64;
    let mut out = Vec::new();
    let (w0, mu0) = term(m0);
    out.push((w0, mu0, cov.clone()));
    for dir in [-1i64, 1] {
        let mut m = m0 + dir;
        loop {
            let (w, mu) = term(m);
            if w.abs() < dust_abs || !w.is_finite() {
                break;
            }
            out.push((w, mu, cov.clone()));
            m += dir;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombParams {
    pub teeth: usize,
    /// Tooth spacing in phase-space units.
    pub spacing: f64,
    pub r: f64,
    #[serde(default)]
    pub logical: u8,
    #[serde(default)]
    pub representation: Representation,
    #[serde(default = "default_d")]
    pub d: f64,
    #[serde(default = "default_dust")]
    pub dust: f64,
}

impl CombParams {
    pub fn new(teeth: usize, spacing: f64, r: f64) -> Self {
        Self {
            teeth,
            spacing,
            r,
            logical: 0,
            representation: Representation::Complex,
            d: default_d(),
            dust: DUST,
        }
    }

    fn centres(&self) -> Vec<f64> {
        let n = self.teeth as f64;
        let shift = if self.logical == 1 { self.spacing / 2.0 } else { 0.0 };
        (1..=self.teeth)
            .map(|k| -(n + 1.0) * self.spacing / 2.0 + k as f64 * self.spacing + shift)
            .collect()
    }
}

pub fn comb(p: &CombParams, hbar: f64) -> Result<State> {
    if p.teeth == 0 || !(p.spacing > 0.0) || p.logical > 1 {
        return Err(Error::InvalidParameter("comb needs N ≥ 1, d > 0, logical ∈ {0,1}".into()));
    }
    let q = p.centres();
    let e2r = (2.0 * p.r).exp();
    let sig = RMat::from_diagonal(&RVec::from_vec(vec![hbar / 2.0 / e2r, hbar / 2.0 * e2r]));
    let ln_w = |k: usize, l: usize| -e2r * (q[k] - q[l]).powi(2) / (4.0 * hbar);
    let ln_norm = log_sum_exp(
        (0..p.teeth).flat_map(|k| (0..p.teeth).map(move |l| (k, l))).map(|(k, l)| c(ln_w(k, l), 0.0)),
    )
    .re;
    let mut mix = Mixture::new(2);
    let cov = mix.add_covariance(to_complex(&sig))?;
    match p.representation {
        Representation::Complex => {
            for k in 0..p.teeth {
                for l in 0..p.teeth {
                    let mean = CVec::from_vec(vec![
                        c((q[k] + q[l]) / 2.0, 0.0),
                        c(0.0, e2r * (q[k] - q[l]) / 2.0),
                    ]);
                    mix.push(c(ln_w(k, l) - ln_norm, 0.0), mean, cov)?;
                }
            }
            State::new(hbar, mix)
        }
        Representation::Real => {
            if !(p.d > 0.0) {
                return Err(Error::InvalidParameter(format!("D = {}", p.d)));
            }
            let diag_w = (-ln_norm).exp();
            for k in 0..p.teeth {
                mix.push_weight(c(diag_w, 0.0), real_vec(&[q[k], 0.0]), cov)?;
            }
            for k in 0..p.teeth {
                for l in (k + 1)..p.teeth {
                    let a = RVec::from_vec(vec![(q[k] + q[l]) / 2.0, 0.0]);
                    let b = RVec::from_vec(vec![0.0, e2r * (q[k] - q[l]) / 2.0]);
                    for (w, m, cv) in real_pair_expansion(
                        c(ln_w(k, l) - ln_norm, 0.0),
                        &a,
                        &b,
                        &sig,
                        p.d,
                        p.dust * diag_w,
                    )? {
                        let ci = mix.add_covariance(to_complex(&cv))?;
                        mix.push_weight(c(w, 0.0), m.map(|x| c(x, 0.0)), ci)?;
                    }
                }
            }
            let total = mix.total();
            let mut st = State::new(hbar, mix)?;
            finish_truncation(&mut st, 1.0 - total.re, "comb fringe");
            Ok(st)
        }
    }
}

/// Approximate n-photon Fock state built from n+1 zero-mean Gaussians.
pub fn fock(n: usize, r: f64, hbar: f64) -> Result<State> {
    if n == 0 {
        return vacuum(1, hbar);
    }
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("r = {r}")));
    }
    let nf = n as f64;
    if r * r * nf >= 1.0 {
        return Err(Error::Unphysical(format!("r = {r} needs r < 1/√{n}")));
    }
    let mut mix = Mixture::new(2);
    let mut binom = 1.0f64;
    for m in 0..=n {
        if m > 0 {
            binom = binom * (n - m + 1) as f64 / m as f64;
        }
        let j = (n - m) as f64;
        let sign = if (n - m) % 2 == 0 { 1.0 } else { -1.0 };
        let w = sign * binom * (1.0 - nf * r * r) / (1.0 - j * r * r);
        let var = hbar / 2.0 * (1.0 + j * r * r) / (1.0 - j * r * r);
        let cov = mix.add_covariance(to_complex(&(RMat::identity(2, 2) * var)))?;
        mix.push_weight(c(w, 0.0), CVec::zeros(2), cov)?;
    }
    State::normalized_from(hbar, mix)
}

/// One term κ·D(γ)S(r)|0⟩ of a superposition of equally squeezed states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub kappa: C64,
    pub gamma: C64,
    pub r: f64,
}

/// Weight, mean and covariance of the Wigner function of
/// D(γ)S(r)|0⟩⟨0|S(r)†D(δ)†.
pub fn dyad(gamma: C64, delta: C64, r: f64, hbar: f64) -> (C64, CVec, RMat) {
    let em = (-2.0 * r).exp();
    let ep = (2.0 * r).exp();
    let h = (hbar / 2.0).sqrt();
    let mean = CVec::from_vec(vec![
        c(h * (gamma.re + delta.re), h * em * (gamma.im - delta.im)),
        c(h * (gamma.im + delta.im), h * ep * (delta.re - gamma.re)),
    ]);
    let ln_c = c(
        -0.5 * em * (gamma.im - delta.im).powi(2) - 0.5 * ep * (gamma.re - delta.re).powi(2),
        -delta.im * gamma.re + gamma.im * delta.re,
    );
    let cov = RMat::from_diagonal(&RVec::from_vec(vec![hbar / 2.0 * em, hbar / 2.0 * ep]));
    (ln_c, mean, cov)
}

pub fn gaussian_superposition(components: &[Component], hbar: f64) -> Result<State> {
    let first = components
        .first()
        .ok_or_else(|| Error::InvalidParameter("no components".into()))?;
    if components.iter().any(|x| x.r != first.r) {
        return Err(Error::Unsupported(
            "superpositions with unequal squeezing are not supported".into(),
        ));
    }
    let mut mix = Mixture::new(2);
    let mut cov_idx = None;
    for a in components {
        for b in components {
            let w = a.kappa * b.kappa.conj();
            if w == c(0.0, 0.0) {
                continue;
            }
            let (ln_c, mean, cov) = dyad(a.gamma, b.gamma, first.r, hbar);
            let k = match cov_idx {
                Some(k) => k,
                None => {
                    let k = mix.add_covariance(to_complex(&cov))?;
                    cov_idx = Some(k);
                    k
                }
            };
            mix.push(w.ln() + ln_c, mean, k)?;
        }
    }
    State::normalized_from(hbar, mix)
}

/// Covariance of a single-mode state with diagonal quadrature variances.
pub fn diag_cov(vq: f64, vp: f64) -> CMat {
    to_complex(&RMat::from_diagonal(&RVec::from_vec(vec![vq, vp])))
}
