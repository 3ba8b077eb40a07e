//! Bosonic-qubit circuits: measurement-based squeezing, phase and entangling
//! gates built from it, T-gate teleportation, GKP error correction, cluster
//! teleportation and Pauli readout by binned homodyne.

use std::f64::consts::PI;

use errorfunctions::ComplexErrorFunctions;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channels::{
    apply_channel, apply_symplectic, beamsplitter, cx_decomposition, cz_symplectic, cx_symplectic, loss,
    permutation, phase_decomposition, phase_symplectic, rotation, shift, squeeze_symplectic, GaussianChannel,
};
use crate::error::{Error, Result};
use crate::linalg::{RMat, RVec, C64};
use crate::measurement::{
    condition_on_generaldyne, sample_generaldyne, ConditionalOutcome, FusedHomodyne, GeneralDyne,
    RejectionSampler, DEFAULT_MAX_ITERS,
};
use crate::mixture::State;
use crate::states::{db_to_squeezing, gaussian, squeezed};

/// Lattice spacing √(πħ).
pub fn lattice_spacing(hbar: f64) -> f64 {
    (PI * hbar).sqrt()
}

/// Representative of x modulo `period` in (−period/2, period/2].
pub fn centered_mod(x: f64, period: f64) -> f64 {
    let mut r = x - period * (x / period).round();
    if r <= -period / 2.0 {
        r += period;
    } else if r > period / 2.0 {
        r -= period;
    }
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quadrature {
    Q,
    P,
}

/// Inline squeezing by an ancilla, a beam splitter with cos θ = e^{−target_r},
/// homodyne detection and a feedforward displacement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MbSqueezeParams {
    pub target_r: f64,
    pub ancilla_r: f64,
    pub eta_det: f64,
    pub quadrature: Quadrature,
    /// Transmissivity after ancilla preparation and on both beam-splitter
    /// outputs; 1 for the bare circuit.
    #[serde(default = "one")]
    pub loss_eta: f64,
}

fn one() -> f64 {
    1.0
}

fn check_eta(eta: f64, what: &str) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter(format!("{what} = {eta} not in (0, 1]")));
    }
    Ok(())
}

impl MbSqueezeParams {
    pub fn new(target_r: f64, ancilla_r: f64, eta_det: f64, quadrature: Quadrature) -> Result<Self> {
        let p = Self {
            target_r,
            ancilla_r,
            eta_det,
            quadrature,
            loss_eta: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    /// S(r) for either sign of r: positive squeezes q, negative squeezes p.
    pub fn signed(r: f64, ancilla_r: f64, eta_det: f64) -> Result<Self> {
        let quad = if r >= 0.0 { Quadrature::Q } else { Quadrature::P };
        Self::new(r.abs(), ancilla_r, eta_det, quad)
    }

    pub fn with_loss(mut self, eta: f64) -> Result<Self> {
        self.loss_eta = eta;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_r >= 0.0 && self.target_r.is_finite()) {
            return Err(Error::InvalidParameter(format!("target_r = {}", self.target_r)));
        }
        if !self.ancilla_r.is_finite() {
            return Err(Error::InvalidParameter(format!("ancilla_r = {}", self.ancilla_r)));
        }
        check_eta(self.eta_det, "eta_det")?;
        check_eta(self.loss_eta, "loss_eta")
    }

    /// Beam-splitter angle.
    pub fn theta(&self) -> f64 {
        (-self.target_r).exp().acos()
    }

    /// Transmissivity between the beam splitter and the detector.
    fn meas_eta(&self) -> f64 {
        self.eta_det * self.loss_eta
    }

    /// Feedforward gain tan θ/√η.
    pub fn gain(&self) -> f64 {
        self.theta().tan() / self.meas_eta().sqrt()
    }
}

/// Wrap a q-variant map so that it acts on p instead.
fn to_p_variant(ch: &GaussianChannel) -> GaussianChannel {
    rotation(PI / 2.0)
        .to_channel()
        .then(ch)
        .then(&rotation(-PI / 2.0).to_channel())
}

/// Average channel of the q-variant circuit without extra loss.
fn mb_table_channel(p: &MbSqueezeParams, hbar: f64) -> GaussianChannel {
    let th = p.theta();
    let (s, c) = th.sin_cos();
    let eta = p.eta_det;
    let x = RMat::from_diagonal(&RVec::from_vec(vec![c, 1.0 / c]));
    let y = RMat::from_diagonal(&RVec::from_vec(vec![
        s * s * (-2.0 * p.ancilla_r).exp(),
        th.tan().powi(2) * (1.0 - eta) / eta,
    ])) * (hbar / 2.0);
    GaussianChannel {
        x,
        y,
        d: RVec::zeros(2),
    }
}

/// Average channel of the q-variant circuit with loss, by composing the
/// two-mode circuit and tracing the ancilla.
fn mb_circuit_channel(p: &MbSqueezeParams, hbar: f64) -> Result<GaussianChannel> {
    let l = loss(p.loss_eta, hbar)?;
    let circuit = l
        .embedded(&[1], 2)?
        .then(&beamsplitter(-p.theta()).to_channel())
        .then(&l.tensor(&l))
        .then(&loss(p.eta_det, hbar)?.embedded(&[1], 2)?);
    let mut t = RMat::zeros(2, 4);
    t[(0, 0)] = 1.0;
    t[(1, 1)] = 1.0;
    t[(1, 3)] = p.gain();
    let xa = &t * circuit.x.columns(0, 2);
    let xb = circuit.x.columns(2, 2).into_owned();
    let anc = RMat::from_diagonal(&RVec::from_vec(vec![(-2.0 * p.ancilla_r).exp(), (2.0 * p.ancilla_r).exp()]))
        * (hbar / 2.0);
    let inner = &xb * anc * xb.transpose() + &circuit.y;
    let y = &t * inner * t.transpose();
    let y = (&y + y.transpose()) * 0.5;
    GaussianChannel::new(xa, y, RVec::zeros(2), hbar)
}

/// The Gaussian channel obtained by averaging the single-shot circuit over
/// homodyne outcomes.
pub fn mb_squeeze_average_channel(p: &MbSqueezeParams, hbar: f64) -> Result<GaussianChannel> {
    p.validate()?;
    let q = if p.loss_eta == 1.0 {
        mb_table_channel(p, hbar)
    } else {
        mb_circuit_channel(p, hbar)?
    };
    Ok(match p.quadrature {
        Quadrature::Q => q,
        Quadrature::P => to_p_variant(&q),
    })
}

pub fn mb_squeeze_average(state: &State, p: &MbSqueezeParams, mode: usize) -> Result<State> {
    apply_channel(state, &mb_squeeze_average_channel(p, state.hbar())?, &[mode])
}

/// Couple the ancilla in and return (joint state, ancilla mode).
fn mb_couple(state: &State, p: &MbSqueezeParams, mode: usize) -> Result<(State, usize)> {
    p.validate()?;
    crate::mixture::validate_modes(&[mode], state.num_modes())?;
    let hbar = state.hbar();
    let mut st = state.clone();
    if p.quadrature == Quadrature::P {
        st = apply_symplectic(&st, &rotation(PI / 2.0), &[mode])?;
    }
    let anc = squeezed(p.ancilla_r, 0.0, hbar)?;
    let a = st.num_modes();
    let mut joint = st.tensor(&anc)?;
    let l = loss(p.loss_eta, hbar)?;
    if p.loss_eta < 1.0 {
        joint = apply_channel(&joint, &l, &[a])?;
    }
    joint = apply_symplectic(&joint, &beamsplitter(-p.theta()), &[mode, a])?;
    if p.loss_eta < 1.0 {
        joint = apply_channel(&joint, &l.tensor(&l), &[mode, a])?;
    }
    if p.eta_det < 1.0 {
        joint = apply_channel(&joint, &loss(p.eta_det, hbar)?, &[a])?;
    }
    Ok((joint, a))
}

fn mb_finish(out: ConditionalOutcome, p: &MbSqueezeParams, mode: usize) -> Result<ConditionalOutcome> {
    let p_m = out.outcome[0];
    let mut st = apply_symplectic(&out.state, &shift(0.0, p_m * p.gain()), &[mode])?;
    if p.quadrature == Quadrature::P {
        st = apply_symplectic(&st, &rotation(-PI / 2.0), &[mode])?;
    }
    Ok(ConditionalOutcome { state: st, ..out })
}

/// One run of the circuit with a given ancilla p-homodyne outcome.
pub fn mb_squeeze_single_shot_at(state: &State, p: &MbSqueezeParams, mode: usize, p_m: f64) -> Result<ConditionalOutcome> {
    let (joint, a) = mb_couple(state, p, mode)?;
    let out = condition_on_generaldyne(&joint, &GeneralDyne::homodyne_p(a), &[p_m])?;
    mb_finish(out, p, mode)
}

/// One run of the circuit with a sampled outcome.
pub fn mb_squeeze_single_shot<R: Rng + ?Sized>(
    state: &State,
    p: &MbSqueezeParams,
    mode: usize,
    rng: &mut R,
) -> Result<ConditionalOutcome> {
    let (joint, a) = mb_couple(state, p, mode)?;
    let meas = GeneralDyne::homodyne_p(a);
    let s = sample_generaldyne(&joint, &meas, rng)?;
    let out = condition_on_generaldyne(&joint, &meas, &s.outcome)?;
    mb_finish(out, p, mode)
}

/// Squeezed-ancilla resource shared by the squeezers inside a gate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MbResource {
    pub ancilla_r: f64,
    pub eta_det: f64,
    #[serde(default = "one")]
    pub loss_eta: f64,
}

impl MbResource {
    pub fn new(ancilla_r: f64, eta_det: f64) -> Self {
        Self {
            ancilla_r,
            eta_det,
            loss_eta: 1.0,
        }
    }

    pub fn from_db(db: f64, eta_det: f64) -> Self {
        Self::new(db_to_squeezing(db), eta_det)
    }

    pub fn with_loss(mut self, eta: f64) -> Self {
        self.loss_eta = eta;
        self
    }

    pub fn squeezer(&self, r: f64) -> Result<MbSqueezeParams> {
        MbSqueezeParams::signed(r, self.ancilla_r, self.eta_det)?.with_loss(self.loss_eta)
    }
}

/// How squeezing inside a gate is realized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GateMode {
    Ideal,
    MbAverage(MbResource),
    MbSingleShot(MbResource),
}

impl GateMode {
    fn resource(&self) -> Option<&MbResource> {
        match self {
            GateMode::Ideal => None,
            GateMode::MbAverage(r) | GateMode::MbSingleShot(r) => Some(r),
        }
    }
}

/// A gate's output state and the ancilla homodyne outcomes it consumed.
#[derive(Clone, Debug)]
pub struct GateOutcome {
    pub state: State,
    pub records: Vec<f64>,
}

fn squeeze_with<R: Rng + ?Sized>(
    state: &State,
    r: f64,
    mode: usize,
    gm: &GateMode,
    rng: &mut R,
    records: &mut Vec<f64>,
) -> Result<State> {
    if r == 0.0 {
        return Ok(state.clone());
    }
    match gm {
        GateMode::Ideal => apply_symplectic(state, &squeeze_symplectic(r), &[mode]),
        GateMode::MbAverage(res) => mb_squeeze_average(state, &res.squeezer(r)?, mode),
        GateMode::MbSingleShot(res) => {
            let out = mb_squeeze_single_shot(state, &res.squeezer(r)?, mode, rng)?;
            records.extend(out.outcome.iter().cloned());
            Ok(out.state)
        }
    }
}

/// Quadratic phase gate P(s): p → p + s q.
pub fn phase_gate<R: Rng + ?Sized>(state: &State, s: f64, mode: usize, gm: &GateMode, rng: &mut R) -> Result<GateOutcome> {
    if let GateMode::Ideal = gm {
        return Ok(GateOutcome {
            state: apply_symplectic(state, &phase_symplectic(s), &[mode])?,
            records: vec![],
        });
    }
    let d = phase_decomposition(s);
    let mut records = Vec::new();
    let mut st = apply_symplectic(state, &rotation(-d.phi / 2.0), &[mode])?;
    st = squeeze_with(&st, d.r, mode, gm, rng, &mut records)?;
    st = apply_symplectic(&st, &rotation(d.phi / 2.0 + d.theta), &[mode])?;
    Ok(GateOutcome { state: st, records })
}

fn beamsplitter_lossy(state: &State, theta: f64, modes: [usize; 2], gm: &GateMode) -> Result<State> {
    let st = apply_symplectic(state, &beamsplitter(theta), &modes)?;
    match gm.resource() {
        Some(res) if res.loss_eta < 1.0 => {
            let l = loss(res.loss_eta, state.hbar())?;
            apply_channel(&st, &l.tensor(&l), &modes)
        }
        _ => Ok(st),
    }
}

/// SUM gate with `modes[0]` as control: q₂ += s q₁, p₁ −= s p₂.
pub fn cx_gate<R: Rng + ?Sized>(state: &State, s: f64, modes: [usize; 2], gm: &GateMode, rng: &mut R) -> Result<GateOutcome> {
    if let GateMode::Ideal = gm {
        return Ok(GateOutcome {
            state: apply_symplectic(state, &cx_symplectic(s), &modes)?,
            records: vec![],
        });
    }
    let d = cx_decomposition(s);
    let mut records = Vec::new();
    let mut st = beamsplitter_lossy(state, d.first_bs, modes, gm)?;
    st = squeeze_with(&st, d.r, modes[0], gm, rng, &mut records)?;
    st = squeeze_with(&st, -d.r, modes[1], gm, rng, &mut records)?;
    st = beamsplitter_lossy(&st, d.second_bs, modes, gm)?;
    Ok(GateOutcome { state: st, records })
}

/// CZ gate: p₁ += s q₂, p₂ += s q₁, via Fourier rotations around a SUM gate.
pub fn cz_gate<R: Rng + ?Sized>(state: &State, s: f64, modes: [usize; 2], gm: &GateMode, rng: &mut R) -> Result<GateOutcome> {
    if let GateMode::Ideal = gm {
        return Ok(GateOutcome {
            state: apply_symplectic(state, &cz_symplectic(s), &modes)?,
            records: vec![],
        });
    }
    let st = apply_symplectic(state, &rotation(-PI / 2.0), &[modes[1]])?;
    let out = cx_gate(&st, s, modes, gm, rng)?;
    Ok(GateOutcome {
        state: apply_symplectic(&out.state, &rotation(PI / 2.0), &[modes[1]])?,
        records: out.records,
    })
}

/// Two-mode gates that can also be expressed as a single Gaussian channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TwoModeGate {
    /// SUM with mode 0 as control.
    Cx(f64),
    /// SUM with mode 1 as control.
    CxReversed(f64),
    Cz(f64),
}

impl TwoModeGate {
    pub fn apply<R: Rng + ?Sized>(&self, state: &State, modes: [usize; 2], gm: &GateMode, rng: &mut R) -> Result<GateOutcome> {
        match *self {
            TwoModeGate::Cx(s) => cx_gate(state, s, modes, gm, rng),
            TwoModeGate::CxReversed(s) => cx_gate(state, s, [modes[1], modes[0]], gm, rng),
            TwoModeGate::Cz(s) => cz_gate(state, s, modes, gm, rng),
        }
    }

    /// The average two-mode channel; single-shot squeezing has none.
    pub fn channel(&self, gm: &GateMode, hbar: f64) -> Result<GaussianChannel> {
        let ideal = match *self {
            TwoModeGate::Cx(s) => cx_symplectic(s),
            TwoModeGate::CxReversed(s) => {
                let sw = permutation(&[1, 0])?;
                sw.then(&cx_symplectic(s)).then(&sw)
            }
            TwoModeGate::Cz(s) => cz_symplectic(s),
        };
        let res = match gm {
            GateMode::Ideal => return Ok(ideal.to_channel()),
            GateMode::MbAverage(r) => r,
            GateMode::MbSingleShot(_) => {
                return Err(Error::Unsupported("single-shot squeezing has no average channel".into()))
            }
        };
        let (s, control, target) = match *self {
            TwoModeGate::Cx(s) => (s, 0, 1),
            TwoModeGate::CxReversed(s) => (s, 1, 0),
            TwoModeGate::Cz(s) => (s, 0, 1),
        };
        let hbar_loss = loss(res.loss_eta, hbar)?;
        let bs_loss = hbar_loss.tensor(&hbar_loss);
        let d = cx_decomposition(s);
        let ct = [control, target];
        let mut ch = GaussianChannel::identity(2);
        if let TwoModeGate::Cz(_) = self {
            ch = ch.then(&rotation(-PI / 2.0).to_channel().embedded(&[1], 2)?);
        }
        ch = ch
            .then(&beamsplitter(d.first_bs).to_channel().embedded(&ct, 2)?)
            .then(&bs_loss)
            .then(&mb_squeeze_average_channel(&res.squeezer(d.r)?, hbar)?.embedded(&[control], 2)?)
            .then(&mb_squeeze_average_channel(&res.squeezer(-d.r)?, hbar)?.embedded(&[target], 2)?)
            .then(&beamsplitter(d.second_bs).to_channel().embedded(&ct, 2)?)
            .then(&bs_loss);
        if let TwoModeGate::Cz(_) = self {
            ch = ch.then(&rotation(PI / 2.0).to_channel().embedded(&[1], 2)?);
        }
        Ok(ch)
    }
}

/// Entangle `data` with `anc` and measure x_θ of the ancilla.
///
/// Ideal and averaged gates reduce to one two-mode channel and use the
/// fused pairwise update; single-shot squeezing builds the joint state.
pub struct EntangleMeasure {
    data: State,
    anc: State,
    gate: TwoModeGate,
    gm: GateMode,
    angle: f64,
    fused: Option<(FusedHomodyne, RejectionSampler)>,
}

impl EntangleMeasure {
    pub fn new(data: &State, anc: &State, gate: TwoModeGate, gm: GateMode, angle: f64) -> Result<Self> {
        let fused = match gm {
            GateMode::MbSingleShot(_) => None,
            _ => {
                let mut ch = gate.channel(&gm, data.hbar())?;
                if let Some(res) = gm.resource() {
                    if res.eta_det < 1.0 {
                        ch = ch.then(&loss(res.eta_det, data.hbar())?.embedded(&[1], 2)?);
                    }
                }
                let f = FusedHomodyne::new(data, anc, &ch, angle)?;
                let sampler = RejectionSampler::new(&f.marginal()?)?;
                Some((f, sampler))
            }
        };
        Ok(Self {
            data: data.clone(),
            anc: anc.clone(),
            gate,
            gm,
            angle,
            fused,
        })
    }

    fn joint<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(State, Vec<f64>)> {
        let joint = self.data.tensor(&self.anc)?;
        let out = self.gate.apply(&joint, [0, 1], &self.gm, rng)?;
        let mut st = out.state;
        if let Some(res) = self.gm.resource() {
            if res.eta_det < 1.0 {
                st = apply_channel(&st, &loss(res.eta_det, st.hbar())?, &[1])?;
            }
        }
        Ok((st, out.records))
    }

    fn meas(&self) -> Result<GeneralDyne> {
        GeneralDyne::homodyne(vec![1], vec![self.angle])
    }

    /// Condition on a given outcome.
    pub fn run_at<R: Rng + ?Sized>(&self, outcome: f64, prune_tol: f64, rng: &mut R) -> Result<GateOutcome> {
        match &self.fused {
            Some((f, _)) => Ok(GateOutcome {
                state: f.condition(outcome, prune_tol)?.state,
                records: vec![outcome],
            }),
            None => {
                let (st, mut records) = self.joint(rng)?;
                let out = condition_on_generaldyne(&st, &self.meas()?, &[outcome])?;
                records.push(outcome);
                Ok(GateOutcome {
                    state: out.state.prune(prune_tol)?,
                    records,
                })
            }
        }
    }

    /// Sample the outcome, then condition on it. The last record is the
    /// ancilla outcome.
    pub fn run<R: Rng + ?Sized>(&self, prune_tol: f64, rng: &mut R) -> Result<GateOutcome> {
        match &self.fused {
            Some((f, sampler)) => {
                let r = sampler.sample(rng, DEFAULT_MAX_ITERS)?.outcome[0];
                Ok(GateOutcome {
                    state: f.condition(r, prune_tol)?.state,
                    records: vec![r],
                })
            }
            None => {
                let (st, mut records) = self.joint(rng)?;
                let meas = self.meas()?;
                let r = sample_generaldyne(&st, &meas, rng)?.outcome[0];
                let out = condition_on_generaldyne(&st, &meas, &[r])?;
                records.push(r);
                Ok(GateOutcome {
                    state: out.state.prune(prune_tol)?,
                    records,
                })
            }
        }
    }
}

/// Result of one T-gate teleportation.
#[derive(Clone, Debug)]
pub struct TgateOutcome {
    pub state: State,
    pub p0: f64,
    pub n: i64,
    pub feedforward: bool,
    pub records: Vec<f64>,
}

/// T gate by teleportation through a magic state: Hadamard on the magic
/// state, CZ, p-homodyne on the ancilla, and a phase gate when the binned
/// outcome is odd.
pub struct TgateCircuit {
    em: EntangleMeasure,
    gm: GateMode,
    hbar: f64,
}

impl TgateCircuit {
    pub fn new(data: &State, magic: &State, gm: GateMode) -> Result<Self> {
        if data.num_modes() != 1 || magic.num_modes() != 1 {
            return Err(Error::InvalidModes("T gate acts on single-mode states".into()));
        }
        let mut data = data.clone();
        let mut magic = apply_symplectic(magic, &rotation(PI / 2.0), &[0])?;
        if let Some(res) = gm.resource() {
            if res.loss_eta < 1.0 {
                let l = loss(res.loss_eta, data.hbar())?;
                data = apply_channel(&data, &l, &[0])?;
                magic = apply_channel(&magic, &l, &[0])?;
            }
        }
        Ok(Self {
            em: EntangleMeasure::new(&data, &magic, TwoModeGate::Cz(1.0), gm, PI / 2.0)?,
            gm,
            hbar: data.hbar(),
        })
    }

    fn finish<R: Rng + ?Sized>(&self, out: GateOutcome, rng: &mut R) -> Result<TgateOutcome> {
        let p0 = *out.records.last().expect("homodyne record");
        let n = (p0 / lattice_spacing(self.hbar)).round() as i64;
        let feedforward = n.rem_euclid(2) == 1;
        let mut records = out.records;
        let state = if feedforward {
            let g = phase_gate(&out.state, 1.0, 0, &self.gm, rng)?;
            records.extend(g.records);
            g.state
        } else {
            out.state
        };
        Ok(TgateOutcome {
            state,
            p0,
            n,
            feedforward,
            records,
        })
    }

    pub fn run_at<R: Rng + ?Sized>(&self, p0: f64, prune_tol: f64, rng: &mut R) -> Result<TgateOutcome> {
        let out = self.em.run_at(p0, prune_tol, rng)?;
        self.finish(out, rng)
    }

    pub fn run<R: Rng + ?Sized>(&self, prune_tol: f64, rng: &mut R) -> Result<TgateOutcome> {
        let out = self.em.run(prune_tol, rng)?;
        self.finish(out, rng)
    }
}

pub fn tgate_teleport<R: Rng + ?Sized>(
    data: &State,
    magic: &State,
    gm: GateMode,
    prune_tol: f64,
    rng: &mut R,
) -> Result<TgateOutcome> {
    TgateCircuit::new(data, magic, gm)?.run(prune_tol, rng)
}

/// Result of one round of q and p syndrome extraction.
#[derive(Clone, Debug)]
pub struct EcOutcome {
    pub state: State,
    pub q0: f64,
    pub p0: f64,
    /// Applied (q, p) displacement.
    pub correction: (f64, f64),
}

/// Steane-type GKP error correction: SUM into a |+⟩ ancilla and q-homodyne,
/// then inverse SUM from a |0⟩ ancilla and p-homodyne, each followed by a
/// displacement undoing the centered remainder.
pub fn gkp_error_correct<R: Rng + ?Sized>(
    data: &State,
    plus_anc: &State,
    zero_anc: &State,
    gm: GateMode,
    prune_tol: f64,
    rng: &mut R,
) -> Result<EcOutcome> {
    gkp_error_correct_with(data, plus_anc, zero_anc, gm, prune_tol, None, rng)
}

/// As [`gkp_error_correct`], optionally with fixed (q₀, p₀) outcomes.
pub fn gkp_error_correct_with<R: Rng + ?Sized>(
    data: &State,
    plus_anc: &State,
    zero_anc: &State,
    gm: GateMode,
    prune_tol: f64,
    outcomes: Option<(f64, f64)>,
    rng: &mut R,
) -> Result<EcOutcome> {
    let l = lattice_spacing(data.hbar());
    let em = EntangleMeasure::new(data, plus_anc, TwoModeGate::Cx(1.0), gm, 0.0)?;
    let out = match outcomes {
        Some((q0, _)) => em.run_at(q0, prune_tol, rng)?,
        None => em.run(prune_tol, rng)?,
    };
    let q0 = *out.records.last().expect("homodyne record");
    let dq = -centered_mod(q0, l);
    let st = apply_symplectic(&out.state, &shift(dq, 0.0), &[0])?;
    let em = EntangleMeasure::new(&st, zero_anc, TwoModeGate::CxReversed(-1.0), gm, PI / 2.0)?;
    let out = match outcomes {
        Some((_, p0)) => em.run_at(p0, prune_tol, rng)?,
        None => em.run(prune_tol, rng)?,
    };
    let p0 = *out.records.last().expect("homodyne record");
    let dp = -centered_mod(p0, l);
    let st = apply_symplectic(&out.state, &shift(0.0, dp), &[0])?;
    Ok(EcOutcome {
        state: st,
        q0,
        p0,
        correction: (dq, dp),
    })
}

/// How the CZ gate is realized in cluster teleportation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterGates {
    Ideal,
    MbAverage,
    MbSingleShot,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    /// Squeezing of the cluster ancilla and of both squeezer resources.
    pub squeeze_db: f64,
    /// Loss after each preparation and on both outputs of every beam splitter.
    pub loss_eta: f64,
    pub det_eta: f64,
    pub gates: ClusterGates,
}

impl ClusterParams {
    pub fn new(squeeze_db: f64, loss_eta: f64, det_eta: f64) -> Self {
        Self {
            squeeze_db,
            loss_eta,
            det_eta,
            gates: ClusterGates::MbSingleShot,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ClusterOutcome {
    pub state: State,
    pub p0: f64,
    pub records: Vec<f64>,
}

/// Teleport a single-mode state onto a p-squeezed cluster mode: CZ, p-homodyne
/// on the input mode and a q-shift by −p₀. Ideally this applies a Fourier
/// rotation, taking |0⟩ to |+⟩.
pub fn cluster_teleport<R: Rng + ?Sized>(
    input: &State,
    params: &ClusterParams,
    prune_tol: f64,
    rng: &mut R,
) -> Result<ClusterOutcome> {
    if input.num_modes() != 1 {
        return Err(Error::InvalidModes("cluster teleportation takes a single-mode input".into()));
    }
    check_eta(params.loss_eta, "loss_eta")?;
    check_eta(params.det_eta, "det_eta")?;
    let hbar = input.hbar();
    let r = db_to_squeezing(params.squeeze_db);
    let anc = if r.is_finite() {
        squeezed(-r, 0.0, hbar)?
    } else {
        return Err(Error::InvalidParameter("squeezing must be finite".into()));
    };
    let mut st = input.tensor(&anc)?;
    let l = loss(params.loss_eta, hbar)?;
    if params.loss_eta < 1.0 {
        st = apply_channel(&st, &l.tensor(&l), &[0, 1])?;
    }
    let res = MbResource {
        ancilla_r: r,
        eta_det: params.det_eta,
        loss_eta: params.loss_eta,
    };
    let gm = match params.gates {
        ClusterGates::Ideal => GateMode::Ideal,
        ClusterGates::MbAverage => GateMode::MbAverage(res),
        ClusterGates::MbSingleShot => GateMode::MbSingleShot(res),
    };
    let g = cz_gate(&st, 1.0, [0, 1], &gm, rng)?;
    let mut records = g.records;
    let mut st = g.state;
    if params.det_eta < 1.0 {
        st = apply_channel(&st, &loss(params.det_eta, hbar)?, &[0])?;
    }
    let meas = GeneralDyne::homodyne_p(0);
    let p0 = sample_generaldyne(&st, &meas, rng)?.outcome[0];
    records.push(p0);
    let out = condition_on_generaldyne(&st, &meas, &[p0])?;
    let st = apply_symplectic(&out.state, &shift(-p0, 0.0), &[0])?;
    Ok(ClusterOutcome {
        state: st.prune(prune_tol)?,
        p0,
        records,
    })
}

/// Single-mode Gaussian helper used by examples and tests.
pub fn squeezed_p(r: f64, hbar: f64) -> Result<State> {
    let cov = RMat::from_diagonal(&RVec::from_vec(vec![(2.0 * r).exp(), (-2.0 * r).exp()])) * (hbar / 2.0);
    gaussian(&RVec::zeros(2), &cov, hbar)
}

/// Pauli measurement by binned homodyne.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliAxis {
    X,
    Z,
    /// Homodyne along q − p.
    YMinus,
    /// Homodyne along q + p, parity of n + 1.
    YPlus,
}

impl PauliAxis {
    pub const ALL: [PauliAxis; 4] = [PauliAxis::X, PauliAxis::Z, PauliAxis::YMinus, PauliAxis::YPlus];

    /// Quadrature direction, including the √2 rescaling of the Y axes.
    pub fn direction(&self) -> [f64; 2] {
        match self {
            PauliAxis::X => [0.0, 1.0],
            PauliAxis::Z => [1.0, 0.0],
            PauliAxis::YMinus => [1.0, -1.0],
            PauliAxis::YPlus => [1.0, 1.0],
        }
    }

    pub fn parity_offset(&self) -> i64 {
        match self {
            PauliAxis::YPlus => 1,
            _ => 0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PauliAxis::X => "X",
            PauliAxis::Z => "Z",
            PauliAxis::YMinus => "Y_MINUS",
            PauliAxis::YPlus => "Y_PLUS",
        }
    }

    /// Logical bit for a (rescaled) homodyne outcome.
    pub fn bit(&self, x: f64, hbar: f64) -> u8 {
        let n = (x / lattice_spacing(hbar)).round() as i64;
        (n + self.parity_offset()).rem_euclid(2) as u8
    }
}

/// ∫_lo^hi G_{m,v}(x) dx for complex m and v.
fn gaussian_bin(m: C64, v: C64, lo: f64, hi: f64) -> C64 {
    let s = (2.0 * v).sqrt();
    let zl = (C64::new(lo, 0.0) - m) / s;
    let zh = (C64::new(hi, 0.0) - m) / s;
    if zl.re > 0.0 {
        0.5 * (zl.erfc() - zh.erfc())
    } else if zh.re < 0.0 {
        0.5 * ((-zh).erfc() - (-zl).erfc())
    } else {
        0.5 * (zh.erf() - zl.erf())
    }
}

/// Probability that a 1-D mixture falls in bins [(n−½)L, (n+½)L] with
/// n + offset even. Each peak contributes bins out to 9 effective standard
/// deviations around its modulus maximum.
pub fn even_bin_probability(weights: &[C64], means: &[C64], vars: &[C64], period: f64, offset: i64) -> Result<f64> {
    let mut total = C64::new(0.0, 0.0);
    let mut abs = 0.0;
    for ((&w, &m), &v) in weights.iter().zip(means).zip(vars) {
        let inv = 1.0 / v;
        if !(inv.re > 0.0) {
            return Err(Error::InvalidCovariance("marginal variance with Re 1/v ≤ 0".into()));
        }
        let centre = m.re - inv.im * m.im / inv.re;
        let width = 9.0 / inv.re.sqrt();
        let n_lo = ((centre - width) / period).round() as i64;
        let n_hi = ((centre + width) / period).round() as i64;
        let mut acc = C64::new(0.0, 0.0);
        for n in n_lo..=n_hi {
            if (n + offset).rem_euclid(2) != 0 {
                continue;
            }
            acc += gaussian_bin(m, v, (n as f64 - 0.5) * period, (n as f64 + 0.5) * period);
        }
        let t = w * acc;
        abs += t.norm();
        total += t;
    }
    if total.im.abs() > 1e-9 * total.re.abs() + 1e-10 * abs {
        return Err(Error::NumericalInconsistency(format!(
            "readout probability has imaginary part {:e}",
            total.im
        )));
    }
    Ok(total.re.clamp(0.0, 1.0))
}

/// P(logical 0) for a single-mode state.
pub fn pauli_readout_probability(state: &State, axis: PauliAxis) -> Result<f64> {
    if state.num_modes() != 1 {
        return Err(Error::InvalidModes("readout needs a single-mode state".into()));
    }
    let [a, b] = axis.direction();
    let mix = state.mixture();
    let mut w = Vec::with_capacity(mix.len());
    let mut mu = Vec::with_capacity(mix.len());
    let mut var = Vec::with_capacity(mix.len());
    let pool_var: Vec<C64> = mix
        .pool()
        .iter()
        .map(|c| {
            let s = c.matrix();
            a * a * s[(0, 0)] + 2.0 * a * b * s[(0, 1)] + b * b * s[(1, 1)]
        })
        .collect();
    for p in mix.peaks() {
        w.push(p.weight());
        mu.push(a * p.mean[0] + b * p.mean[1]);
        var.push(pool_var[p.cov]);
    }
    even_bin_probability(&w, &mu, &var, lattice_spacing(state.hbar()), axis.parity_offset())
}

/// Readout probabilities for all four axes, in [`PauliAxis::ALL`] order.
pub fn pauli_readouts(state: &State) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    for (o, ax) in out.iter_mut().zip(PauliAxis::ALL) {
        *o = pauli_readout_probability(state, ax)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{gkp, vacuum, GkpParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    const H: f64 = 2.0;

    fn close(a: &RMat, b: &RMat, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn centered_mod_range() {
        let l = 1.5;
        for x in [-3.0, -0.75, 0.0, 0.75, 0.7501, 2.2, 10.0] {
            let r = centered_mod(x, l);
            assert!(r > -l / 2.0 && r <= l / 2.0, "{x} -> {r}");
            assert!(((x - r) / l - ((x - r) / l).round()).abs() < 1e-12);
        }
        assert_eq!(centered_mod(-0.75, l), 0.75);
    }

    #[test]
    fn mb_circuit_average_equals_table() {
        for &(s, r, eta) in &[(0.3, 1.2, 0.99), (1.0, 0.5, 0.8), (2.0, 1.2, 1.0)] {
            let p = MbSqueezeParams::new(s, r, eta, Quadrature::Q).unwrap();
            let a = mb_table_channel(&p, H);
            let b = mb_circuit_channel(&p, H).unwrap();
            assert!(close(&a.x, &b.x, 1e-12) && close(&a.y, &b.y, 1e-12));
        }
    }

    #[test]
    fn mb_limits() {
        let p = MbSqueezeParams::new(0.0, 1.0, 0.9, Quadrature::Q).unwrap();
        let ch = mb_squeeze_average_channel(&p, H).unwrap();
        assert!(close(&ch.x, &RMat::identity(2, 2), 1e-15) && ch.y.norm() < 1e-15);
        let p = MbSqueezeParams::new(0.7, 30.0, 1.0, Quadrature::Q).unwrap();
        let ch = mb_squeeze_average_channel(&p, H).unwrap();
        assert!(close(&ch.x, &squeeze_symplectic(0.7).s, 1e-15) && ch.y.norm() < 1e-20);
        let p = MbSqueezeParams::new(0.7, 30.0, 1.0, Quadrature::P).unwrap();
        let ch = mb_squeeze_average_channel(&p, H).unwrap();
        assert!(close(&ch.x, &squeeze_symplectic(-0.7).s, 1e-15));
    }

    /// Per-peak closed forms for the q-variant single shot.
    #[test]
    fn single_shot_matches_closed_forms() {
        let (s, r, eta) = (0.8, 1.1, 0.9);
        let p = MbSqueezeParams::new(s, r, eta, Quadrature::Q).unwrap();
        let th = p.theta();
        let (sn, cs) = th.sin_cos();
        let covs = [[1.3, 0.2, 0.9], [0.7, -0.1, 1.6]];
        let means = [[0.4, -0.3], [-1.0, 0.8]];
        let weights = [0.7, 0.3];
        let mut mix = crate::Mixture::new(2);
        for i in 0..2 {
            let [a, b, d] = covs[i];
            let c = mix
                .add_covariance(crate::linalg::to_complex(&(RMat::from_row_slice(2, 2, &[a, b, b, d]) * (H / 2.0))))
                .unwrap();
            mix.push_weight(C64::new(weights[i], 0.0), crate::CVec::from_vec(vec![C64::new(means[i][0], 0.0), C64::new(means[i][1], 0.0)]), c)
                .unwrap();
        }
        let st = State::new(H, mix).unwrap();
        let pm = 0.37;
        let out = mb_squeeze_single_shot_at(&st, &p, 0, pm).unwrap();
        let e2r = (2.0 * r).exp();
        let mut ws = vec![];
        for i in 0..2 {
            let [a, b, d] = covs[i];
            let f = eta * (sn * sn * d + cs * cs * e2r) + 1.0 - eta;
            let s0 = RMat::from_row_slice(2, 2, &[a, b, b, d]) * (H / 2.0);
            let sr = RMat::from_diagonal(&RVec::from_vec(vec![(-2.0 * r).exp(), e2r])) * (H / 2.0);
            let v = RVec::from_vec(vec![b, d - e2r]);
            let cov = s0 * cs * cs + sr * sn * sn - &v * v.transpose() * (H * eta * (sn * cs).powi(2) / (2.0 * f));
            let pbar = means[i][1];
            let z = pm - eta.sqrt() * sn * pbar;
            let mean = RVec::from_vec(vec![means[i][0], means[i][1]]) * cs + &v * (eta.sqrt() * sn * cs * z / f)
                + RVec::from_vec(vec![0.0, pm * th.tan() / eta.sqrt()]);
            ws.push(weights[i] * (-z * z / (H * f)).exp() / (PI * H * f).sqrt());
            let pk = &out.state.peaks()[i];
            let got = crate::linalg::real_part(out.state.mixture().covariance(pk).matrix());
            assert!(close(&got, &cov, 1e-10));
            assert!((pk.mean[0].re - mean[0]).abs() < 1e-10 && (pk.mean[1].re - mean[1]).abs() < 1e-10);
        }
        let tot: f64 = ws.iter().sum();
        assert!((out.probability - tot).abs() < 1e-10);
        for i in 0..2 {
            assert!((out.state.peaks()[i].weight().re - ws[i] / tot).abs() < 1e-10);
        }
    }

    #[test]
    fn single_shot_symmetric_outcome_keeps_mean() {
        let v = vacuum(1, H).unwrap();
        let p = MbSqueezeParams::new(1.0, 1.2, 0.99, Quadrature::P).unwrap();
        let out = mb_squeeze_single_shot_at(&v, &p, 0, 0.0).unwrap();
        assert!(out.state.peaks()[0].mean.norm() < 1e-15);
    }

    #[test]
    fn phase_gate_modes_agree_in_ideal_limit() {
        let st = crate::states::coherent(C64::new(0.4, -0.2), H).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let ideal = phase_gate(&st, 1.0, 0, &GateMode::Ideal, &mut rng).unwrap().state;
        let avg = phase_gate(&st, 1.0, 0, &GateMode::MbAverage(MbResource::new(30.0, 1.0)), &mut rng)
            .unwrap()
            .state;
        let a = ideal.pool().get(0).matrix() - avg.pool().get(0).matrix();
        assert!(a.norm() < 1e-12);
        assert!((&ideal.peaks()[0].mean - &avg.peaks()[0].mean).norm() < 1e-12);
    }

    #[test]
    fn averaged_gate_channels_reduce_to_ideal() {
        let gm = GateMode::MbAverage(MbResource::new(30.0, 1.0));
        for g in [TwoModeGate::Cx(1.0), TwoModeGate::CxReversed(-1.0), TwoModeGate::Cz(1.0), TwoModeGate::Cz(-0.4)] {
            let ideal = g.channel(&GateMode::Ideal, H).unwrap();
            let avg = g.channel(&gm, H).unwrap();
            assert!(close(&ideal.x, &avg.x, 1e-12), "{g:?}");
            assert!(avg.y.norm() < 1e-12);
        }
    }

    #[test]
    fn readout_of_logical_states() {
        let z = gkp(&GkpParams::zero(0.1), H).unwrap();
        let p = pauli_readouts(&z).unwrap();
        assert!(p[1] > 0.9999 && (p[0] - 0.5).abs() < 1e-3);
        let pi = gkp(&GkpParams::plus_i(0.1), H).unwrap();
        let p = pauli_readouts(&pi).unwrap();
        assert!((p[2] - 0.995).abs() < 3e-3 && (p[3] - 0.995).abs() < 3e-3);
        assert!((p[2] - p[3]).abs() < 1e-5);
        let x = apply_symplectic(&z, &shift(lattice_spacing(H), 0.0), &[0]).unwrap();
        let q = pauli_readout_probability(&x, PauliAxis::Z).unwrap();
        let q0 = pauli_readout_probability(&z, PauliAxis::Z).unwrap();
        assert!((q - (1.0 - q0)).abs() < 1e-12);
    }

    #[test]
    fn readout_matches_brute_quadrature() {
        let st = gkp(&GkpParams::magic(0.15).with_cutoff(10), H).unwrap();
        for ax in PauliAxis::ALL {
            let [a, b] = ax.direction();
            let mix = st.mixture();
            let l = lattice_spacing(H);
            let f = |x: f64| -> f64 {
                mix.peaks()
                    .iter()
                    .map(|p| {
                        let s = mix.covariance(p).matrix();
                        let v = a * a * s[(0, 0)] + 2.0 * a * b * s[(0, 1)] + b * b * s[(1, 1)];
                        let mu = a * p.mean[0] + b * p.mean[1];
                        (p.weight() * (-(x - mu) * (x - mu) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt()).re
                    })
                    .sum()
            };
            let mut tot = 0.0;
            for n in -20i64..=20 {
                if (n + ax.parity_offset()).rem_euclid(2) != 0 {
                    continue;
                }
                let (lo, hi) = ((n as f64 - 0.5) * l, (n as f64 + 0.5) * l);
                let k = 400;
                let h = (hi - lo) / k as f64;
                let mut s = f(lo) + f(hi);
                for i in 1..k {
                    s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
                }
                tot += s * h / 3.0;
            }
            let got = pauli_readout_probability(&st, ax).unwrap();
            assert!((got - tot).abs() < 1e-8, "{ax:?}: {got} vs {tot}");
        }
    }

    #[test]
    fn ec_undoes_shift_for_typical_syndrome() {
        let eps = 0.1;
        let z = gkp(&GkpParams::zero(eps).with_cutoff(10), H).unwrap();
        let plus = gkp(&GkpParams::plus(eps).with_cutoff(10), H).unwrap();
        let l = lattice_spacing(H);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let bad = apply_symplectic(&z, &shift(0.3 * l, 0.0), &[0]).unwrap();
        let before = pauli_readout_probability(&bad, PauliAxis::Z).unwrap();
        let out = gkp_error_correct_with(&bad, &plus, &z, GateMode::Ideal, 1e-12, Some((1.3 * l, 0.0)), &mut rng).unwrap();
        let after = pauli_readout_probability(&out.state, PauliAxis::Z).unwrap();
        assert!((out.correction.0 + 0.3 * l).abs() < 1e-12);
        assert!(after > 0.99 && after > before, "{before} -> {after}");
    }
}
