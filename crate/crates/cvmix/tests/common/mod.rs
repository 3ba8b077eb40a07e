//! Property checks shared by the proptest suite and the acceptance run.
#![allow(dead_code)]

use std::f64::consts::PI;

use cvmix::channels::{
    amplifier, apply_channel, apply_symplectic, beamsplitter, cx_symplectic, cz_symplectic, displacement, fock_damping,
    loss, phase_symplectic, random_displacement, rotation, squeeze_symplectic, thermal_loss, SymplecticOp,
};
use cvmix::linalg::{embed, omega, real_part};
use cvmix::measurement::{condition_on_generaldyne, condition_on_mixture_measurement, GeneralDyne, MeasurementOperator};
use cvmix::states::{cat, coherent, fock, gaussian, gkp, squeezed, CatParams, GkpParams};
use cvmix::{RMat, RVec, State, C64};
use rand::Rng;

pub const H: f64 = 2.0;

#[derive(Clone, Debug)]
pub enum StateSpec {
    Coherent(f64, f64),
    Squeezed(f64, f64),
    Cat(f64, f64, u8),
    Gkp(f64, f64, f64),
    Fock(usize),
}

impl StateSpec {
    pub fn build(&self) -> State {
        match *self {
            StateSpec::Coherent(a, b) => coherent(C64::new(a, b), H),
            StateSpec::Squeezed(r, phi) => squeezed(r, phi, H),
            StateSpec::Cat(a, b, par) => cat(&CatParams::new(C64::new(a, b), par), H),
            StateSpec::Gkp(t, p, e) => gkp(&GkpParams::new(t, p, e), H),
            StateSpec::Fock(n) => fock(n, 0.45, H),
        }
        .unwrap()
    }

    pub fn random<R: Rng>(rng: &mut R) -> Self {
        match rng.random_range(0..5) {
            0 => StateSpec::Coherent(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
            1 => StateSpec::Squeezed(rng.random_range(0.0..1.0), rng.random_range(0.0..PI)),
            2 => StateSpec::Cat(rng.random_range(0.5..2.5), rng.random_range(-1.0..1.0), rng.random_range(0..2)),
            3 => StateSpec::Gkp(rng.random_range(0.0..PI), rng.random_range(0.0..2.0 * PI), rng.random_range(0.25..0.5)),
            _ => StateSpec::Fock(rng.random_range(1..4)),
        }
    }
}

#[derive(Clone, Debug)]
pub enum OpSpec {
    Beamsplitter(f64),
    Cx(f64),
    Cz(f64),
    Rotation(usize, f64),
    Squeeze(usize, f64),
    Displace(usize, f64, f64),
    Phase(usize, f64),
    Loss(usize, f64),
    ThermalLoss(usize, f64, f64),
    Noise(usize, f64),
    Amplifier(usize, f64),
}

impl OpSpec {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let m = rng.random_range(0..2);
        match rng.random_range(0..11) {
            0 => OpSpec::Beamsplitter(rng.random_range(0.0..PI)),
            1 => OpSpec::Cx(rng.random_range(-1.5..1.5)),
            2 => OpSpec::Cz(rng.random_range(-1.5..1.5)),
            3 => OpSpec::Rotation(m, rng.random_range(0.0..2.0 * PI)),
            4 => OpSpec::Squeeze(m, rng.random_range(-1.0..1.0)),
            5 => OpSpec::Displace(m, rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
            6 => OpSpec::Phase(m, rng.random_range(-1.5..1.5)),
            7 => OpSpec::Loss(m, rng.random_range(0.1..1.0)),
            8 => OpSpec::ThermalLoss(m, rng.random_range(0.1..1.0), rng.random_range(0.0..1.0)),
            9 => OpSpec::Noise(m, rng.random_range(0.0..0.5)),
            _ => OpSpec::Amplifier(m, rng.random_range(1.0..2.0)),
        }
    }

    /// Symplectic part and the modes it acts on, if the op is unitary.
    pub fn symplectic(&self) -> Option<(SymplecticOp, Vec<usize>)> {
        Some(match *self {
            OpSpec::Beamsplitter(t) => (beamsplitter(t), vec![0, 1]),
            OpSpec::Cx(s) => (cx_symplectic(s), vec![0, 1]),
            OpSpec::Cz(s) => (cz_symplectic(s), vec![0, 1]),
            OpSpec::Rotation(m, t) => (rotation(t), vec![m]),
            OpSpec::Squeeze(m, r) => (squeeze_symplectic(r), vec![m]),
            OpSpec::Displace(m, a, b) => (displacement(C64::new(a, b), H), vec![m]),
            OpSpec::Phase(m, s) => (phase_symplectic(s), vec![m]),
            _ => return None,
        })
    }

    pub fn apply(&self, st: &State) -> State {
        if let Some((op, modes)) = self.symplectic() {
            return apply_symplectic(st, &op, &modes).unwrap();
        }
        let (ch, m) = match *self {
            OpSpec::Loss(m, eta) => (loss(eta, H), m),
            OpSpec::ThermalLoss(m, eta, n) => (thermal_loss(eta, n, H), m),
            OpSpec::Noise(m, s2) => (random_displacement(s2, H), m),
            OpSpec::Amplifier(m, k) => (amplifier(k, H), m),
            _ => unreachable!(),
        };
        apply_channel(st, &ch.unwrap(), &[m]).unwrap()
    }
}

pub fn two_mode(a: &StateSpec, b: &StateSpec) -> State {
    a.build().tensor(&b.build()).unwrap()
}

pub fn random_points<R: Rng>(rng: &mut R, dim: usize, n: usize, half: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.random_range(-half..half)).collect()).collect()
}

/// Largest |Σc − 1| over the initial state and after every op.
pub fn normalization_drift(a: &StateSpec, b: &StateSpec, ops: &[OpSpec]) -> f64 {
    let mut st = two_mode(a, b);
    let mut worst = (st.weight_sum() - 1.0).norm();
    for op in ops {
        st = op.apply(&st);
        worst = worst.max((st.weight_sum() - 1.0).norm());
    }
    worst
}

/// max|Im W| / max|Re W| on a 4-D point cloud after the ops.
pub fn reality_after<R: Rng>(a: &StateSpec, b: &StateSpec, ops: &[OpSpec], rng: &mut R) -> f64 {
    let mut st = two_mode(a, b);
    for op in ops {
        st = op.apply(&st);
    }
    let mut pts = random_points(rng, 4, 200, 4.0);
    for p in st.peaks().iter().take(50) {
        pts.push(p.mean.iter().map(|z| z.re).collect());
    }
    st.reality_ratio(&pts)
}

/// Random physical two-mode covariance S·diag(ν)·Sᵀ·ħ/2 with ν ≥ 1.
pub fn random_covariance<R: Rng>(rng: &mut R) -> RMat {
    let mut s = RMat::identity(4, 4);
    for _ in 0..4 {
        if let Some((o, modes)) = OpSpec::random(rng).symplectic() {
            s = embed(&o.s, &modes, 2, true) * s;
        }
    }
    let nu: Vec<f64> = (0..2).map(|_| rng.random_range(1.0..3.0)).collect();
    let d = RMat::from_diagonal(&RVec::from_vec(vec![nu[0], nu[0], nu[1], nu[1]]));
    &s * d * s.transpose() * (H / 2.0)
}

/// Worst deviation of the library's Gaussian conditioning from the
/// Schur-complement formulas, over mean, covariance and outcome density.
pub fn conditioning_error<R: Rng>(rng: &mut R) -> f64 {
    let cov = random_covariance(rng);
    let mean = RVec::from_fn(4, |_, _| rng.random_range(-2.0..2.0));
    let r_m = rng.random_range(-1.0..1.0f64);
    let sm = squeezed_cov(r_m, rng.random_range(0.0..PI));
    let r = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];

    let st = gaussian(&mean, &cov, H).unwrap();
    let out = condition_on_generaldyne(&st, &GeneralDyne::gaussian(vec![1], sm.clone()).unwrap(), &r).unwrap();

    let a = cov.view((0, 0), (2, 2)).into_owned();
    let c = cov.view((0, 2), (2, 2)).into_owned();
    let b = cov.view((2, 2), (2, 2)).into_owned() + &sm;
    let bi = b.clone().try_inverse().unwrap();
    let k = &c * &bi;
    let diff = RVec::from_vec(vec![r[0] - mean[2], r[1] - mean[3]]);
    let mu = mean.rows(0, 2).into_owned() + &k * &diff;
    let sig = &a - &k * c.transpose();
    let dens = (-0.5 * (diff.transpose() * &bi * &diff)[(0, 0)]).exp() / (2.0 * PI * b.determinant().sqrt());

    let p = &out.state.peaks()[0];
    let got_cov = real_part(out.state.mixture().covariance(p).matrix());
    let mut err = (got_cov - sig).abs().max();
    for i in 0..2 {
        err = err.max((p.mean[i].re - mu[i]).abs()).max(p.mean[i].im.abs());
    }
    err.max((out.probability - dens).abs() / dens.max(1e-300))
}

fn squeezed_cov(r: f64, phi: f64) -> RMat {
    let rot = rotation(phi).s;
    &rot * RMat::from_diagonal(&RVec::from_vec(vec![(-2.0 * r).exp(), (2.0 * r).exp()])) * rot.transpose() * (H / 2.0)
}

/// Peak counts: tensor multiplies, Gaussian ops and Gaussian conditioning
/// preserve, a mixture projector multiplies by its own count.
pub fn peak_count_violations(a: &StateSpec, b: &StateSpec, ops: &[OpSpec], proj: &StateSpec) -> Vec<String> {
    let (sa, sb) = (a.build(), b.build());
    let mut bad = Vec::new();
    let mut st = sa.tensor(&sb).unwrap();
    let n0 = sa.num_peaks() * sb.num_peaks();
    if st.num_peaks() != n0 {
        bad.push(format!("tensor: {} != {}", st.num_peaks(), n0));
    }
    for op in ops {
        st = op.apply(&st);
        if st.num_peaks() != n0 {
            bad.push(format!("{op:?}: {} != {}", st.num_peaks(), n0));
        }
    }
    let het = condition_on_generaldyne(&st, &GeneralDyne::heterodyne(vec![1], H).unwrap(), &[0.3, -0.2]);
    match het {
        Ok(o) if o.state.num_peaks() != n0 => bad.push(format!("heterodyne: {} != {}", o.state.num_peaks(), n0)),
        Err(e) => bad.push(format!("heterodyne: {e}")),
        _ => {}
    }
    let ps = proj.build();
    let op = MeasurementOperator::projector(vec![1], &ps).unwrap();
    match condition_on_mixture_measurement(&st, &op) {
        Ok(o) if o.state.num_peaks() != n0 * ps.num_peaks() => bad.push(format!(
            "projector: {} != {}·{}",
            o.state.num_peaks(),
            n0,
            ps.num_peaks()
        )),
        Err(cvmix::Error::ZeroProbabilityOutcome(_)) => {}
        Err(e) => bad.push(format!("projector: {e}")),
        _ => {}
    }
    bad
}

/// Largest difference between peak means and covariances, and between peak
/// weights measured against the weight scale max(1, Σ|c|).
pub fn peak_distance(a: &State, b: &State) -> f64 {
    if a.num_peaks() != b.num_peaks() {
        return f64::INFINITY;
    }
    let (ma, mb) = (a.mixture(), b.mixture());
    let scale = ma.peaks().iter().map(|p| p.weight().norm()).sum::<f64>().max(1.0);
    let mut d = 0.0f64;
    for (p, q) in ma.peaks().iter().zip(mb.peaks()) {
        d = d.max((p.weight() - q.weight()).norm() / scale);
        d = d.max((&p.mean - &q.mean).camax());
        d = d.max((ma.covariance(p).matrix() - mb.covariance(q).matrix()).camax());
    }
    d
}

pub fn loss_semigroup_error(s: &StateSpec, e1: f64, e2: f64) -> f64 {
    let st = s.build();
    let one = apply_channel(&st, &loss(e1, H).unwrap(), &[0]).unwrap();
    let two = apply_channel(&one, &loss(e2, H).unwrap(), &[0]).unwrap();
    let direct = apply_channel(&st, &loss(e1 * e2, H).unwrap(), &[0]).unwrap();
    peak_distance(&two, &direct)
}

pub fn damping_semigroup_error(s: &StateSpec, e1: f64, e2: f64) -> f64 {
    let st = s.build();
    let two = fock_damping(&fock_damping(&st, e1, &[0]).unwrap(), e2, &[0]).unwrap();
    let direct = fock_damping(&st, e1 + e2, &[0]).unwrap();
    peak_distance(&two, &direct)
}

/// ‖SΩSᵀ − Ω‖_max for the composition of the unitary ops on two modes.
pub fn omega_defect(ops: &[OpSpec]) -> f64 {
    let mut s = RMat::identity(4, 4);
    for op in ops {
        if let Some((o, modes)) = op.symplectic() {
            s = embed(&o.s, &modes, 2, true) * s;
        }
    }
    let w = omega(2);
    (&s * &w * s.transpose() - w).abs().max()
}
