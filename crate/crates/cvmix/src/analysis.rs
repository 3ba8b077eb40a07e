//! Grid evaluation of Wigner and characteristic functions, marginals,
//! overlaps and Fock-state fidelities, plus CSV/JSON emission of plot data.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{omega, C64};
use crate::measurement::homodyne_marginal;
use crate::mixture::{log_sum_exp, State};

/// Rectangular phase-space grid. Bounds are in units of √ħ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub q_min: f64,
    pub q_max: f64,
    pub q_points: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub p_points: usize,
}

impl GridSpec {
    pub fn new(q: (f64, f64, usize), p: (f64, f64, usize)) -> Result<Self> {
        let g = Self {
            q_min: q.0,
            q_max: q.1,
            q_points: q.2,
            p_min: p.0,
            p_max: p.1,
            p_points: p.2,
        };
        g.validate()?;
        Ok(g)
    }

    /// Square grid [−half, half]² with `points` per axis.
    pub fn square(half: f64, points: usize) -> Result<Self> {
        Self::new((-half, half, points), (-half, half, points))
    }

    pub fn validate(&self) -> Result<()> {
        for (lo, hi, n, ax) in [
            (self.q_min, self.q_max, self.q_points, "q"),
            (self.p_min, self.p_max, self.p_points, "p"),
        ] {
            if n < 2 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidParameter(format!("grid axis {ax}: [{lo}, {hi}] with {n} points")));
            }
        }
        Ok(())
    }

    /// Axis coordinates in phase-space units.
    pub fn axes(&self, hbar: f64) -> (Vec<f64>, Vec<f64>) {
        let s = hbar.sqrt();
        (
            linspace(self.q_min * s, self.q_max * s, self.q_points),
            linspace(self.p_min * s, self.p_max * s, self.p_points),
        )
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + i as f64 * h).collect()
}

/// Real part of a single-mode Wigner function on a grid. `values[i][j]` is
/// W(q_i, p_j).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WignerGrid {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// max |Im W| / max |Re W| over the grid.
    pub reality: f64,
}

impl WignerGrid {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().flatten().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite())
    }

    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        let wq = trapezoid_weights(&self.q);
        let wp = trapezoid_weights(&self.p);
        self.values
            .iter()
            .zip(&wq)
            .map(|(row, a)| a * row.iter().zip(&wp).map(|(v, b)| v * b).sum::<f64>())
            .sum()
    }

    /// ∫ W dp at each grid q.
    pub fn q_marginal(&self) -> Vec<f64> {
        let wp = trapezoid_weights(&self.p);
        self.values
            .iter()
            .map(|row| row.iter().zip(&wp).map(|(v, b)| v * b).sum())
            .collect()
    }

    /// Largest |W| at distance at least `radius` from the origin.
    pub fn max_abs_beyond(&self, radius: f64) -> f64 {
        let mut m = 0.0f64;
        for (i, &q) in self.q.iter().enumerate() {
            for (j, &p) in self.p.iter().enumerate() {
                if q.hypot(p) >= radius {
                    m = m.max(self.values[i][j].abs());
                }
            }
        }
        m
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["q", "p", "w"]).map_err(csv_err)?;
        for (i, q) in self.q.iter().enumerate() {
            for (j, p) in self.p.iter().enumerate() {
                wr.write_record([fmt(*q), fmt(*p), fmt(self.values[i][j])]).map_err(csv_err)?;
            }
        }
        wr.flush().map_err(|e| Error::Serialization(e.to_string()))
    }
}

fn trapezoid_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut w = vec![0.0; n];
    for i in 0..n - 1 {
        let h = x[i + 1] - x[i];
        w[i] += h / 2.0;
        w[i + 1] += h / 2.0;
    }
    w
}

pub(crate) fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Serialization(e.to_string())
}

fn single_mode(state: &State) -> Result<()> {
    if state.num_modes() != 1 {
        return Err(Error::InvalidModes(format!(
            "expected a single-mode state, got {} modes; trace out the rest first",
            state.num_modes()
        )));
    }
    Ok(())
}

pub fn wigner_grid(state: &State, grid: &GridSpec) -> Result<WignerGrid> {
    single_mode(state)?;
    grid.validate()?;
    let (q, p) = grid.axes(state.hbar());
    let mix = state.mixture();
    let rows: Vec<Vec<C64>> = q
        .par_iter()
        .map(|&x| p.iter().map(|&y| mix.eval(&[x, y])).collect())
        .collect();
    let mut re_max = 0.0f64;
    let mut im_max = 0.0f64;
    for v in rows.iter().flatten() {
        re_max = re_max.max(v.re.abs());
        im_max = im_max.max(v.im.abs());
    }
    let reality = if re_max > 0.0 { im_max / re_max } else { im_max };
    Ok(WignerGrid {
        q,
        p,
        values: rows.into_iter().map(|r| r.into_iter().map(|v| v.re).collect()).collect(),
        reality,
    })
}

/// χ(r) = Σ c_m exp(−½ rᵀΩᵀΣ_mΩ r − i rᵀΩᵀμ_m), the Fourier transform
/// ∫ W(ξ) exp(−i ξᵀΩ r) dξ.
pub fn characteristic_fn(state: &State, r: &[f64]) -> Result<C64> {
    let n = state.num_modes();
    if r.len() != 2 * n {
        return Err(Error::DimensionMismatch(format!("r has {} entries, need {}", r.len(), 2 * n)));
    }
    let om = omega(n);
    let k: Vec<f64> = (0..2 * n).map(|i| (0..2 * n).map(|j| om[(i, j)] * r[j]).sum()).collect();
    let mix = state.mixture();
    let quad: Vec<C64> = mix
        .pool()
        .iter()
        .map(|c| {
            let s = c.matrix();
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..2 * n {
                for j in 0..2 * n {
                    acc += s[(i, j)] * k[i] * k[j];
                }
            }
            acc
        })
        .collect();
    let i = C64::new(0.0, 1.0);
    Ok(log_sum_exp(mix.peaks().iter().map(|p| {
        let km: C64 = k.iter().zip(p.mean.iter()).map(|(a, m)| m * a).sum();
        p.ln_weight - 0.5 * quad[p.cov] - i * km
    }))
    .exp())
}

/// tr(ρ_a ρ_b) = (2πħ)^N ∫ W_a W_b.
pub fn state_overlap(a: &State, b: &State) -> Result<f64> {
    if a.num_modes() != b.num_modes() {
        return Err(Error::DimensionMismatch(format!("{} vs {} modes", a.num_modes(), b.num_modes())));
    }
    if a.hbar() != b.hbar() {
        return Err(Error::HbarMismatch(a.hbar(), b.hbar()));
    }
    let (ma, mb) = (a.mixture(), b.mixture());
    let pairs: Vec<crate::mixture::Covariance> = {
        let mut v = Vec::with_capacity(ma.pool().len() * mb.pool().len());
        for ca in ma.pool().iter() {
            for cb in mb.pool().iter() {
                v.push(crate::mixture::Covariance::new(ca.matrix() + cb.matrix())?);
            }
        }
        v
    };
    let nb = mb.pool().len();
    let terms: Vec<C64> = ma
        .peaks()
        .par_iter()
        .flat_map_iter(|pa| {
            let pairs = &pairs;
            mb.peaks().iter().map(move |pb| {
                pa.ln_weight
                    + pb.ln_weight
                    + pairs[pa.cov * nb + pb.cov].ln_density_complex(pa.mean.as_slice(), pb.mean.as_slice())
            })
        })
        .collect();
    let abs = log_sum_exp(terms.iter().map(|t| C64::new(t.re, 0.0))).re;
    let total = log_sum_exp(terms.into_iter());
    let scale = (2.0 * PI * a.hbar()).powi(a.num_modes() as i32);
    let v = total.exp() * scale;
    let tol = 1e-9 * v.re.abs().max(abs.exp() * scale * 1e-3);
    if v.im.abs() > tol.max(1e-12) {
        return Err(Error::NumericalInconsistency(format!("overlap has imaginary part {:e}", v.im)));
    }
    Ok(v.re)
}

/// W of the Fock state |n⟩: (−1)ⁿ/(πħ) e^{−ρ} Lₙ(2ρ), ρ = (q²+p²)/ħ.
pub fn fock_wigner(n: usize, q: f64, p: f64, hbar: f64) -> f64 {
    let rho = (q * q + p * p) / hbar;
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    sign / (PI * hbar) * (-rho).exp() * laguerre(n, 2.0 * rho)
}

fn laguerre(n: usize, x: f64) -> f64 {
    let (mut l0, mut l1) = (1.0, 1.0 - x);
    if n == 0 {
        return l0;
    }
    for k in 1..n {
        let kf = k as f64;
        let l2 = ((2.0 * kf + 1.0 - x) * l1 - kf * l0) / (kf + 1.0);
        l0 = l1;
        l1 = l2;
    }
    l1
}

/// Outcome of the grid integration behind [`fock_fidelity`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FidelityReport {
    pub fidelity: f64,
    /// Half-width of the square grid.
    pub extent: f64,
    pub step: f64,
    /// Largest |W| of either function on the grid boundary.
    pub boundary: f64,
    /// Change from halving the step.
    pub refinement_change: f64,
    pub converged: bool,
}

const BOUNDARY_TOL: f64 = 1e-12;

fn grid_overlap(state: &State, n: usize, half: f64, h: f64) -> (f64, f64) {
    let hbar = state.hbar();
    let m = (half / h).ceil() as i64;
    let mix = state.mixture();
    let rows: Vec<(f64, f64)> = (-m..=m)
        .into_par_iter()
        .map(|i| {
            let q = i as f64 * h;
            let mut acc = 0.0;
            let mut edge = 0.0f64;
            for j in -m..=m {
                let p = j as f64 * h;
                let a = mix.eval(&[q, p]).re;
                let b = fock_wigner(n, q, p, hbar);
                acc += a * b;
                if i.abs() == m || j.abs() == m {
                    edge = edge.max(a.abs()).max(b.abs());
                }
            }
            (acc, edge)
        })
        .collect();
    let sum: f64 = rows.iter().map(|r| r.0).sum();
    let edge = rows.iter().fold(0.0f64, |e, r| e.max(r.1));
    (2.0 * PI * hbar * sum * h * h, edge)
}

/// ⟨n|ρ|n⟩ for a single-mode state, by integrating against the exact Fock
/// Wigner function on a grid that grows until both functions are negligible
/// on its boundary.
pub fn fock_fidelity_report(state: &State, n: usize) -> Result<FidelityReport> {
    single_mode(state)?;
    let hbar = state.hbar();
    let mix = state.mixture();
    let mut sig_min = f64::INFINITY;
    let mut sig_max = 0.0f64;
    for c in mix.pool().iter() {
        let re = crate::linalg::real_part(c.matrix());
        let ev = re.symmetric_eigenvalues();
        sig_min = sig_min.min(ev.min().max(0.0).sqrt());
        sig_max = sig_max.max(ev.max().sqrt());
    }
    let reach = mix
        .peaks()
        .iter()
        .map(|p| p.mean[0].re.hypot(p.mean[1].re))
        .fold(0.0f64, f64::max);
    let mut half = (reach + 8.0 * sig_max).max((4.0 * n as f64 + 8.0).sqrt() * hbar.sqrt() * 2.0);
    let mut h = (sig_min / 3.0).min(hbar.sqrt() / (2.0 * (2.0 * n as f64 + 1.0).sqrt()));
    let mut boundary = f64::INFINITY;
    let mut fid = 0.0;
    for _ in 0..12 {
        let (f, e) = grid_overlap(state, n, half, h);
        fid = f;
        boundary = e;
        if e < BOUNDARY_TOL {
            break;
        }
        half *= 1.25;
    }
    let mut change = f64::INFINITY;
    for _ in 0..4 {
        h /= 2.0;
        let (f, _) = grid_overlap(state, n, half, h);
        change = (f - fid).abs();
        fid = f;
        if change < 1e-10 {
            break;
        }
    }
    Ok(FidelityReport {
        fidelity: fid,
        extent: half,
        step: h,
        boundary,
        refinement_change: change,
        converged: boundary < BOUNDARY_TOL && change < 1e-10,
    })
}

pub fn fock_fidelity(state: &State, n: usize) -> Result<f64> {
    Ok(fock_fidelity_report(state, n)?.fidelity)
}

/// Homodyne density of x_θ on `mode` at the given points.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Marginal {
    pub x: Vec<f64>,
    pub density: Vec<f64>,
}

impl Marginal {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "density"]).map_err(csv_err)?;
        for (x, d) in self.x.iter().zip(&self.density) {
            wr.write_record([fmt(*x), fmt(*d)]).map_err(csv_err)?;
        }
        wr.flush().map_err(|e| Error::Serialization(e.to_string()))
    }
}

pub fn marginal(state: &State, mode: usize, angle: f64, x: &[f64]) -> Result<Marginal> {
    let mix = homodyne_marginal(state, &[mode], &[angle])?;
    Ok(Marginal {
        x: x.to_vec(),
        density: x.iter().map(|&v| mix.eval(&[v]).re).collect(),
    })
}

/// Metadata written next to a grid CSV.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridMetadata {
    pub grid: GridSpec,
    pub hbar: f64,
    pub num_peaks: usize,
    pub reality: f64,
    pub integral: f64,
    pub state: String,
}

impl GridMetadata {
    pub fn new(grid: &GridSpec, state: &State, w: &WignerGrid, descriptor: impl Into<String>) -> Self {
        Self {
            grid: *grid,
            hbar: state.hbar(),
            num_peaks: state.num_peaks(),
            reality: w.reality,
            integral: w.integral(),
            state: descriptor.into(),
        }
    }
}
