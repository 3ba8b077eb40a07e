//! Deterministic Gaussian maps on mixtures, and Fock damping.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{direct_sum, embed, min_eigenvalue, omega, quadrature_indices, RMat, RVec};
use crate::measurement::{condition_on_generaldyne, GeneralDyne};
use crate::mixture::{validate_modes, Mixture, State};
use crate::states::{vacuum, IdealGkp};

/// Σ → XΣXᵀ + Y, μ → Xμ + d.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianChannel {
    pub x: RMat,
    pub y: RMat,
    pub d: RVec,
}

impl GaussianChannel {
    /// Checked constructor: Y + i(ħ/2)Ω − i(ħ/2)XΩXᵀ ⪰ 0.
    pub fn new(x: RMat, y: RMat, d: RVec, hbar: f64) -> Result<Self> {
        let ch = Self::unchecked(x, y, d)?;
        let m = ch.validity_margin(hbar);
        if m < -1e-9 * (1.0 + ch.y.norm() + ch.x.norm()) {
            return Err(Error::InvalidChannel(format!("complete-positivity margin {m:e}")));
        }
        Ok(ch)
    }

    pub fn unchecked(x: RMat, y: RMat, d: RVec) -> Result<Self> {
        let n = x.nrows();
        if n == 0 || n % 2 != 0 || x.ncols() != n || y.nrows() != n || y.ncols() != n || d.len() != n {
            return Err(Error::DimensionMismatch("channel matrices".into()));
        }
        if (&y - y.transpose()).norm() > 1e-12 * (1.0 + y.norm()) {
            return Err(Error::InvalidChannel("Y is not symmetric".into()));
        }
        Ok(Self { x, y, d })
    }

    pub fn identity(num_modes: usize) -> Self {
        let n = 2 * num_modes;
        Self {
            x: RMat::identity(n, n),
            y: RMat::zeros(n, n),
            d: RVec::zeros(n),
        }
    }

    pub fn num_modes(&self) -> usize {
        self.x.nrows() / 2
    }

    /// Smallest eigenvalue of the Hermitian matrix Y + i(ħ/2)(Ω − XΩXᵀ),
    /// via its real 2n×2n embedding.
    pub fn validity_margin(&self, hbar: f64) -> f64 {
        let n = self.x.nrows();
        let w = omega(n / 2);
        let b = (&w - &self.x * &w * self.x.transpose()) * (hbar / 2.0);
        let mut big = RMat::zeros(2 * n, 2 * n);
        big.view_mut((0, 0), (n, n)).copy_from(&self.y);
        big.view_mut((n, n), (n, n)).copy_from(&self.y);
        big.view_mut((0, n), (n, n)).copy_from(&(-&b));
        big.view_mut((n, 0), (n, n)).copy_from(&b);
        min_eigenvalue(&big)
    }

    /// `then ∘ self`.
    pub fn then(&self, then: &GaussianChannel) -> GaussianChannel {
        GaussianChannel {
            x: &then.x * &self.x,
            y: &then.x * &self.y * then.x.transpose() + &then.y,
            d: &then.x * &self.d + &then.d,
        }
    }

    /// Same channel acting on `modes` of an N-mode system.
    pub fn embedded(&self, modes: &[usize], num_modes: usize) -> Result<GaussianChannel> {
        validate_modes(modes, num_modes)?;
        if modes.len() != self.num_modes() {
            return Err(Error::DimensionMismatch(format!(
                "{}-mode channel on {} modes",
                self.num_modes(),
                modes.len()
            )));
        }
        let idx = quadrature_indices(modes);
        let mut d = RVec::zeros(2 * num_modes);
        for (i, &k) in idx.iter().enumerate() {
            d[k] = self.d[i];
        }
        Ok(GaussianChannel {
            x: embed(&self.x, modes, num_modes, true),
            y: embed(&self.y, modes, num_modes, false),
            d,
        })
    }

    pub fn tensor(&self, other: &GaussianChannel) -> GaussianChannel {
        let mut d = RVec::zeros(self.d.len() + other.d.len());
        d.rows_mut(0, self.d.len()).copy_from(&self.d);
        d.rows_mut(self.d.len(), other.d.len()).copy_from(&other.d);
        GaussianChannel {
            x: direct_sum(&self.x, &other.x),
            y: direct_sum(&self.y, &other.y),
            d,
        }
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidParameter(format!("{name} = {v} outside [0, 1]")));
    }
    Ok(())
}

/// Pure loss with transmissivity η.
pub fn loss(eta: f64, hbar: f64) -> Result<GaussianChannel> {
    thermal_loss(eta, 0.0, hbar)
}

pub fn thermal_loss(eta: f64, nbar: f64, hbar: f64) -> Result<GaussianChannel> {
    check_unit("eta", eta)?;
    if !(nbar >= 0.0) {
        return Err(Error::InvalidParameter(format!("nbar = {nbar}")));
    }
    GaussianChannel::new(
        RMat::identity(2, 2) * eta.sqrt(),
        RMat::identity(2, 2) * ((1.0 - eta) * hbar / 2.0 * (2.0 * nbar + 1.0)),
        RVec::zeros(2),
        hbar,
    )
}

pub fn random_displacement(sigma2: f64, hbar: f64) -> Result<GaussianChannel> {
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidParameter(format!("sigma2 = {sigma2}")));
    }
    GaussianChannel::new(RMat::identity(2, 2), RMat::identity(2, 2) * sigma2, RVec::zeros(2), hbar)
}

pub fn amplifier(kappa: f64, hbar: f64) -> Result<GaussianChannel> {
    if !(kappa >= 1.0) {
        return Err(Error::InvalidParameter(format!("kappa = {kappa} < 1")));
    }
    GaussianChannel::new(
        RMat::identity(2, 2) * kappa,
        RMat::identity(2, 2) * ((kappa * kappa - 1.0) * hbar / 2.0),
        RVec::zeros(2),
        hbar,
    )
}

/// A Gaussian unitary: ξ → Sξ + d.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymplecticOp {
    pub s: RMat,
    pub d: RVec,
}

impl SymplecticOp {
    pub fn new(s: RMat, d: RVec) -> Result<Self> {
        let n = s.nrows();
        if n == 0 || n % 2 != 0 || s.ncols() != n || d.len() != n {
            return Err(Error::DimensionMismatch("symplectic matrix".into()));
        }
        let w = omega(n / 2);
        let err = (&s * &w * s.transpose() - &w).norm();
        if err > 1e-10 * (1.0 + s.norm_squared()) {
            return Err(Error::InvalidChannel(format!("S Ω Sᵀ differs from Ω by {err:e}")));
        }
        Ok(Self { s, d })
    }

    fn linear(s: RMat) -> Self {
        let n = s.nrows();
        Self { s, d: RVec::zeros(n) }
    }

    pub fn num_modes(&self) -> usize {
        self.s.nrows() / 2
    }

    /// `then ∘ self`.
    pub fn then(&self, then: &SymplecticOp) -> SymplecticOp {
        SymplecticOp {
            s: &then.s * &self.s,
            d: &then.s * &self.d + &then.d,
        }
    }

    pub fn inverse(&self) -> SymplecticOp {
        let n = self.s.nrows();
        let w = omega(n / 2);
        // S⁻¹ = -Ω Sᵀ Ω
        let inv = -(&w * self.s.transpose() * &w);
        let d = -(&inv * &self.d);
        SymplecticOp { s: inv, d }
    }

    pub fn to_channel(&self) -> GaussianChannel {
        let n = self.s.nrows();
        GaussianChannel {
            x: self.s.clone(),
            y: RMat::zeros(n, n),
            d: self.d.clone(),
        }
    }

    pub fn tensor(&self, other: &SymplecticOp) -> SymplecticOp {
        let ch = self.to_channel().tensor(&other.to_channel());
        SymplecticOp { s: ch.x, d: ch.d }
    }
}

/// [[c𝟙, s𝟙], [-s𝟙, c𝟙]] on two modes.
pub fn beamsplitter(theta: f64) -> SymplecticOp {
    let (s, c) = theta.sin_cos();
    SymplecticOp::linear(RMat::from_row_slice(4, 4, &[
        c, 0.0, s, 0.0, //
        0.0, c, 0.0, s, //
        -s, 0.0, c, 0.0, //
        0.0, -s, 0.0, c,
    ]))
}

/// Counter-clockwise phase-space rotation.
pub fn rotation(theta: f64) -> SymplecticOp {
    let (s, c) = theta.sin_cos();
    SymplecticOp::linear(RMat::from_row_slice(2, 2, &[c, -s, s, c]))
}

/// diag(e^{-r}, e^{r}): r > 0 squeezes q.
pub fn squeeze_symplectic(r: f64) -> SymplecticOp {
    SymplecticOp::linear(RMat::from_row_slice(2, 2, &[(-r).exp(), 0.0, 0.0, r.exp()]))
}

pub fn displacement(alpha: crate::C64, hbar: f64) -> SymplecticOp {
    let s = (2.0 * hbar).sqrt();
    SymplecticOp {
        s: RMat::identity(2, 2),
        d: RVec::from_vec(vec![s * alpha.re, s * alpha.im]),
    }
}

/// Shift by (dq, dp) directly in phase-space units.
pub fn shift(dq: f64, dp: f64) -> SymplecticOp {
    SymplecticOp {
        s: RMat::identity(2, 2),
        d: RVec::from_vec(vec![dq, dp]),
    }
}

/// SUM gate: q₂ += s q₁, p₁ -= s p₂.
pub fn cx_symplectic(s: f64) -> SymplecticOp {
    SymplecticOp::linear(RMat::from_row_slice(4, 4, &[
        1.0, 0.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, -s, //
        s, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0,
    ]))
}

/// p₁ += s q₂, p₂ += s q₁.
pub fn cz_symplectic(s: f64) -> SymplecticOp {
    let f = SymplecticOp::linear(direct_sum(&RMat::identity(2, 2), &rotation(PI / 2.0).s));
    let inner = cx_symplectic(s);
    SymplecticOp::linear(&f.s * &inner.s * f.s.transpose())
}

/// Shear [[1,0],[s,1]].
pub fn phase_symplectic(s: f64) -> SymplecticOp {
    SymplecticOp::linear(RMat::from_row_slice(2, 2, &[1.0, 0.0, s, 1.0]))
}

/// Mode permutation: output mode i carries input mode `perm[i]`.
pub fn permutation(perm: &[usize]) -> Result<SymplecticOp> {
    validate_modes(perm, perm.len())?;
    let n = perm.len();
    let mut s = RMat::zeros(2 * n, 2 * n);
    for (i, &j) in perm.iter().enumerate() {
        s[(2 * i, 2 * j)] = 1.0;
        s[(2 * i + 1, 2 * j + 1)] = 1.0;
    }
    Ok(SymplecticOp::linear(s))
}

/// Beam splitters and single-mode squeezers realizing CX(s):
/// BS(`second_bs`) · (S(r) ⊕ S(−r)) · BS(`first_bs`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CxDecomposition {
    pub first_bs: f64,
    pub r: f64,
    pub second_bs: f64,
}

pub fn cx_decomposition(s: f64) -> CxDecomposition {
    let theta = 0.5 * (-2.0f64).atan2(s);
    CxDecomposition {
        first_bs: -theta,
        r: (-s / 2.0).asinh(),
        second_bs: -(theta + PI / 2.0),
    }
}

impl CxDecomposition {
    pub fn to_symplectic(&self) -> SymplecticOp {
        let sq = squeeze_symplectic(self.r).tensor(&squeeze_symplectic(-self.r));
        beamsplitter(self.first_bs).then(&sq).then(&beamsplitter(self.second_bs))
    }
}

/// Rotation and squeezing realizing the shear P(s) = R(θ) R(φ/2) S(r) R(−φ/2).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseDecomposition {
    pub theta: f64,
    pub phi: f64,
    pub r: f64,
}

pub fn phase_decomposition(s: f64) -> PhaseDecomposition {
    let theta = (s / 2.0).atan();
    let phi = -s.signum() * PI / 2.0 - theta;
    PhaseDecomposition {
        theta,
        phi: if s == 0.0 { 0.0 } else { phi },
        r: (1.0 + s * s / 4.0).sqrt().acosh(),
    }
}

impl PhaseDecomposition {
    pub fn to_symplectic(&self) -> SymplecticOp {
        rotation(-self.phi / 2.0)
            .then(&squeeze_symplectic(self.r))
            .then(&rotation(self.phi / 2.0))
            .then(&rotation(self.theta))
    }
}

pub fn apply_channel(state: &State, channel: &GaussianChannel, modes: &[usize]) -> Result<State> {
    let full = channel.embedded(modes, state.num_modes())?;
    let mix = state.mixture().affine(&full.x, &full.y, &full.d)?;
    Ok(state_with(state, mix))
}

pub fn apply_symplectic(state: &State, op: &SymplecticOp, modes: &[usize]) -> Result<State> {
    apply_channel(state, &op.to_channel(), modes)
}

fn state_with(state: &State, mix: Mixture) -> State {
    let mut out = state.clone();
    *out.mixture_mut() = mix;
    out
}

/// Apply e^{−εn̂} to each listed mode and renormalize. Each mode is coupled
/// to vacuum on a beam splitter with cos θ = e^{−ε} and the ancilla is
/// projected back onto vacuum.
pub fn fock_damping(state: &State, epsilon: f64, modes: &[usize]) -> Result<State> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon}")));
    }
    validate_modes(modes, state.num_modes())?;
    let hbar = state.hbar();
    let theta = (-epsilon).exp().acos();
    let mut st = state.clone();
    for &m in modes {
        let n = st.num_modes();
        let joint = st.tensor(&vacuum(1, hbar)?)?;
        let joint = apply_symplectic(&joint, &beamsplitter(theta), &[m, n])?;
        let meas = GeneralDyne::gaussian(vec![n], RMat::identity(2, 2) * (hbar / 2.0))?;
        st = condition_on_generaldyne(&joint, &meas, &[0.0, 0.0])?.state;
    }
    Ok(st)
}

/// Fock damping of a truncated ideal GKP lattice; the Dirac peaks enter the
/// same beam-splitter/vacuum-projection update with zero covariance.
pub fn fock_damp_ideal(ideal: &IdealGkp, epsilon: f64) -> Result<State> {
    use crate::linalg::{to_complex, CVec, C64};
    use crate::measurement::Conditioner;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon}")));
    }
    let hbar = ideal.hbar;
    let bs = beamsplitter((-epsilon).exp().acos()).s;
    let joint = &bs * direct_sum(&RMat::zeros(2, 2), &(RMat::identity(2, 2) * (hbar / 2.0))) * bs.transpose();
    let cond = Conditioner::new(
        &to_complex(&joint),
        &[0, 1],
        &[2, 3],
        Some(&to_complex(&(RMat::identity(2, 2) * (hbar / 2.0)))),
    )?;
    let mut mix = Mixture::new(2);
    let cov = mix.add_covariance(cond.cov_a().clone())?;
    let zero = [C64::new(0.0, 0.0); 2];
    for (w, m) in &ideal.peaks {
        let mean = to_complex(&bs) * CVec::from_vec(vec![
            C64::new(m[0], 0.0),
            C64::new(m[1], 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        ]);
        let (lf, mu) = cond.apply(&mean, &zero);
        mix.push(C64::new(*w, 0.0).ln() + lf, mu, cov)?;
    }
    State::normalized_from(hbar, mix)
}
