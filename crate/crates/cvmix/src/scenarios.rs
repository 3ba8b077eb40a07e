//! Built-in Monte-Carlo scenarios for bosonic-qubit circuits. Run k of every
//! parameter group draws from ChaCha stream k of the base seed, so groups
//! share random numbers and results do not depend on the thread count.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{apply_channel, apply_symplectic, random_displacement, shift};
use crate::error::Error;
use crate::gates::{
    cluster_teleport, gkp_error_correct, mb_squeeze_average_channel, mb_squeeze_single_shot, pauli_readouts,
    phase_gate, ClusterGates, ClusterParams, GateMode, MbResource, MbSqueezeParams, PauliAxis, Quadrature,
    TgateCircuit,
};
use crate::linalg::real_part;
use crate::mixture::{State, DEFAULT_HBAR};
use crate::states::{gkp, gkp_db_to_epsilon, vacuum, GkpParams};

pub const SCENARIOS: [&str; 5] = ["mbsqueeze", "pgate", "cluster-teleport", "tgate", "gkp-ec"];

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("unknown scenario {0:?}; expected one of mbsqueeze, pgate, cluster-teleport, tgate, gkp-ec")]
    Unknown(String),
    #[error("scenario parameters: {0}")]
    Params(String),
    #[error("run {run}: {source}")]
    Run { run: usize, source: Error },
    #[error(transparent)]
    Sim(#[from] Error),
}

#[derive(Clone, Copy, Debug)]
pub struct ScenarioOptions {
    pub seed: u64,
    pub prune_tol: f64,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            prune_tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub group: String,
    pub homodyne_records: Vec<f64>,
    pub readout_probs: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<String, f64>,
}

/// Keys are "group/quantity", or just the quantity for ungrouped scenarios.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: BTreeMap<String, f64>,
    pub std: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub reference: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: String,
    pub seed: u64,
    pub params: serde_json::Value,
    pub runs: Vec<RunRecord>,
    pub aggregate: Aggregate,
}

/// RNG for run `k`.
pub fn run_rng(seed: u64, k: usize) -> ChaCha20Rng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(k as u64);
    r
}

fn key(group: &str, q: &str) -> String {
    if group.is_empty() {
        q.to_string()
    } else {
        format!("{group}/{q}")
    }
}

/// Mean and sample standard deviation per group and quantity.
pub fn aggregate(runs: &[RunRecord]) -> Aggregate {
    let mut acc: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in runs {
        for (q, v) in r.readout_probs.iter().chain(&r.values) {
            acc.entry(key(&r.group, q)).or_default().push(*v);
        }
    }
    let mut agg = Aggregate::default();
    for (k, v) in acc {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let s = if v.len() > 1 {
            (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        agg.mean.insert(k.clone(), m);
        agg.std.insert(k, s);
    }
    agg
}

fn readout_map(state: &State, axes: &[PauliAxis]) -> crate::Result<BTreeMap<String, f64>> {
    let all = pauli_readouts(state)?;
    Ok(PauliAxis::ALL
        .iter()
        .zip(all)
        .filter(|(a, _)| axes.contains(a))
        .map(|(a, p)| (a.name().to_string(), p))
        .collect())
}

fn parse<T: for<'de> Deserialize<'de>>(params: &serde_json::Value) -> Result<T, ScenarioError> {
    let v = if params.is_null() {
        serde_json::Value::Object(Default::default())
    } else {
        params.clone()
    };
    serde_json::from_value(v).map_err(|e| ScenarioError::Params(e.to_string()))
}

fn collect_runs<F>(n: usize, f: F) -> Result<Vec<RunRecord>, ScenarioError>
where
    F: Fn(usize) -> crate::Result<RunRecord> + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|k| f(k).map_err(|e| ScenarioError::Run { run: k, source: e }))
        .collect()
}

/// Logical GKP inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Logical {
    Zero,
    One,
    Plus,
    Minus,
    PlusI,
    Magic,
}

impl Logical {
    pub fn params(&self, epsilon: f64) -> GkpParams {
        match self {
            Logical::Zero => GkpParams::zero(epsilon),
            Logical::One => GkpParams::one(epsilon),
            Logical::Plus => GkpParams::plus(epsilon),
            Logical::Minus => GkpParams::minus(epsilon),
            Logical::PlusI => GkpParams::plus_i(epsilon),
            Logical::Magic => GkpParams::magic(epsilon),
        }
    }

    pub fn state(&self, epsilon: f64, hbar: f64) -> crate::Result<State> {
        gkp(&self.params(epsilon), hbar)
    }
}

fn d_hbar() -> f64 {
    DEFAULT_HBAR
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MbSqueezeScenario {
    pub hbar: f64,
    pub ancilla_r: f64,
    pub eta_det: f64,
    pub targets: Vec<f64>,
    pub quadrature: Quadrature,
    pub loss_eta: f64,
    pub runs: usize,
}

impl Default for MbSqueezeScenario {
    fn default() -> Self {
        Self {
            hbar: d_hbar(),
            ancilla_r: 1.2,
            eta_det: 0.99,
            targets: vec![0.3, 1.0, 2.0],
            quadrature: Quadrature::Q,
            loss_eta: 1.0,
            runs: 10_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    None,
    Ideal,
    MbAverage,
    MbSingleShot,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PgateScenario {
    pub hbar: f64,
    pub epsilon: f64,
    pub input: Logical,
    pub s: f64,
    pub gate: GateKind,
    pub squeeze_db: f64,
    pub eta_det: f64,
    pub loss_eta: f64,
    /// Only used for single-shot gates.
    pub runs: usize,
}

impl Default for PgateScenario {
    fn default() -> Self {
        Self {
            hbar: d_hbar(),
            epsilon: 0.1,
            input: Logical::Plus,
            s: 1.0,
            gate: GateKind::MbAverage,
            squeeze_db: 14.0,
            eta_det: 1.0,
            loss_eta: 1.0,
            runs: 100,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterScenario {
    pub hbar: f64,
    pub epsilon: f64,
    pub squeeze_db: Vec<f64>,
    pub loss_eta: Vec<f64>,
    pub det_eta: f64,
    pub gates: ClusterGates,
    pub runs: usize,
}

impl Default for ClusterScenario {
    fn default() -> Self {
        Self {
            hbar: d_hbar(),
            epsilon: 0.1,
            squeeze_db: vec![6.0, 10.0, 14.0, 18.0],
            loss_eta: vec![1.0, 0.995, 0.99],
            det_eta: 0.99,
            gates: ClusterGates::MbSingleShot,
            runs: 200,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TgateScenario {
    pub hbar: f64,
    pub epsilon: f64,
    pub input: Logical,
    /// Per-peak squeezing of the magic state, one group per entry.
    pub magic_db: Vec<f64>,
    pub realization: GateMode,
    pub runs: usize,
}

impl Default for TgateScenario {
    fn default() -> Self {
        Self {
            hbar: d_hbar(),
            epsilon: 0.1,
            input: Logical::Plus,
            magic_db: vec![6.0, 8.0, 10.0, 11.0, 12.0, 14.0],
            realization: GateMode::Ideal,
            runs: 500,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GkpEcScenario {
    pub hbar: f64,
    pub epsilon: f64,
    pub ancilla_epsilon: f64,
    pub input: Logical,
    /// Gaussian displacement noise variance applied before correction.
    pub noise_sigma2: f64,
    pub shift_q: f64,
    pub shift_p: f64,
    pub realization: GateMode,
    pub runs: usize,
}

impl Default for GkpEcScenario {
    fn default() -> Self {
        Self {
            hbar: d_hbar(),
            epsilon: 0.1,
            ancilla_epsilon: 0.1,
            input: Logical::Zero,
            noise_sigma2: 0.05,
            shift_q: 0.0,
            shift_p: 0.0,
            realization: GateMode::Ideal,
            runs: 100,
        }
    }
}

pub fn run_scenario(name: &str, params: &serde_json::Value, opts: &ScenarioOptions) -> Result<ScenarioResult, ScenarioError> {
    let (params, runs, reference) = match name {
        "mbsqueeze" => {
            let p: MbSqueezeScenario = parse(params)?;
            let (runs, reference) = mbsqueeze(&p, opts)?;
            (serde_json::to_value(&p), runs, reference)
        }
        "pgate" => {
            let p: PgateScenario = parse(params)?;
            (serde_json::to_value(&p), pgate(&p, opts)?, BTreeMap::new())
        }
        "cluster-teleport" => {
            let p: ClusterScenario = parse(params)?;
            (serde_json::to_value(&p), cluster(&p, opts)?, BTreeMap::new())
        }
        "tgate" => {
            let p: TgateScenario = parse(params)?;
            (serde_json::to_value(&p), tgate(&p, opts)?, ideal_tgate_reference(p.input))
        }
        "gkp-ec" => {
            let p: GkpEcScenario = parse(params)?;
            (serde_json::to_value(&p), gkp_ec(&p, opts)?, BTreeMap::new())
        }
        other => return Err(ScenarioError::Unknown(other.to_string())),
    };
    let mut agg = aggregate(&runs);
    agg.reference = reference;
    Ok(ScenarioResult {
        scenario: name.to_string(),
        seed: opts.seed,
        params: params.map_err(|e| ScenarioError::Params(e.to_string()))?,
        runs,
        aggregate: agg,
    })
}

type Runs = Vec<RunRecord>;

fn mbsqueeze(p: &MbSqueezeScenario, opts: &ScenarioOptions) -> Result<(Runs, BTreeMap<String, f64>), ScenarioError> {
    let v = vacuum(1, p.hbar)?;
    let mut runs = Vec::new();
    let mut reference = BTreeMap::new();
    for &t in &p.targets {
        let params = MbSqueezeParams::new(t, p.ancilla_r, p.eta_det, p.quadrature)?.with_loss(p.loss_eta)?;
        let group = format!("target={t}");
        let ch = mb_squeeze_average_channel(&params, p.hbar)?;
        let cov = &ch.x * ch.x.transpose() * (p.hbar / 2.0) + &ch.y;
        reference.insert(key(&group, "var_q"), cov[(0, 0)]);
        reference.insert(key(&group, "var_p"), cov[(1, 1)]);
        reference.insert(key(&group, "cov_qp"), cov[(0, 1)]);
        let mut rs = collect_runs(p.runs, |k| {
            let mut rng = run_rng(opts.seed, k);
            let out = mb_squeeze_single_shot(&v, &params, 0, &mut rng)?;
            let pk = &out.state.peaks()[0];
            let c = real_part(out.state.mixture().covariance(pk).matrix());
            let values = BTreeMap::from([
                ("mean_q".to_string(), pk.mean[0].re),
                ("mean_p".to_string(), pk.mean[1].re),
                ("var_q".to_string(), c[(0, 0)]),
                ("var_p".to_string(), c[(1, 1)]),
                ("cov_qp".to_string(), c[(0, 1)]),
            ]);
            Ok(RunRecord {
                group: group.clone(),
                homodyne_records: out.outcome,
                readout_probs: BTreeMap::new(),
                values,
            })
        })?;
        runs.append(&mut rs);
    }
    Ok((runs, reference))
}

fn gate_mode(kind: GateKind, res: MbResource) -> Option<GateMode> {
    match kind {
        GateKind::None => None,
        GateKind::Ideal => Some(GateMode::Ideal),
        GateKind::MbAverage => Some(GateMode::MbAverage(res)),
        GateKind::MbSingleShot => Some(GateMode::MbSingleShot(res)),
    }
}

fn pgate(p: &PgateScenario, opts: &ScenarioOptions) -> Result<Runs, ScenarioError> {
    let input = p.input.state(p.epsilon, p.hbar)?;
    let res = MbResource::from_db(p.squeeze_db, p.eta_det).with_loss(p.loss_eta);
    let gm = gate_mode(p.gate, res);
    let n = if p.gate == GateKind::MbSingleShot { p.runs } else { 1 };
    collect_runs(n, |k| {
        let mut rng = run_rng(opts.seed, k);
        let (st, rec) = match &gm {
            None => (input.clone(), vec![]),
            Some(gm) => {
                let o = phase_gate(&input, p.s, 0, gm, &mut rng)?;
                (o.state, o.records)
            }
        };
        Ok(RunRecord {
            homodyne_records: rec,
            readout_probs: readout_map(&st, &PauliAxis::ALL)?,
            ..Default::default()
        })
    })
}

fn cluster(p: &ClusterScenario, opts: &ScenarioOptions) -> Result<Runs, ScenarioError> {
    let input = gkp(&GkpParams::zero(p.epsilon), p.hbar)?;
    let mut runs = Vec::new();
    for &db in &p.squeeze_db {
        for &eta in &p.loss_eta {
            let cp = ClusterParams {
                squeeze_db: db,
                loss_eta: eta,
                det_eta: p.det_eta,
                gates: p.gates,
            };
            let group = format!("squeeze_db={db},loss_eta={eta}");
            let mut rs = collect_runs(p.runs, |k| {
                let mut rng = run_rng(opts.seed, k);
                let o = cluster_teleport(&input, &cp, opts.prune_tol, &mut rng)?;
                Ok(RunRecord {
                    group: group.clone(),
                    homodyne_records: o.records,
                    readout_probs: readout_map(&o.state, &[PauliAxis::X, PauliAxis::Z])?,
                    values: BTreeMap::new(),
                })
            })?;
            runs.append(&mut rs);
        }
    }
    Ok(runs)
}

/// Readout probabilities of T applied to an ideal logical input.
fn ideal_tgate_reference(input: Logical) -> BTreeMap<String, f64> {
    let c = (std::f64::consts::PI / 8.0).cos().powi(2);
    let vals: [f64; 4] = match input {
        Logical::Plus => [c, 0.5, c, c],
        Logical::Minus => [1.0 - c, 0.5, 1.0 - c, 1.0 - c],
        Logical::Zero => [0.5, 1.0, 0.5, 0.5],
        Logical::One => [0.5, 0.0, 0.5, 0.5],
        _ => return BTreeMap::new(),
    };
    PauliAxis::ALL.iter().map(|a| a.name().to_string()).zip(vals).collect()
}

fn tgate(p: &TgateScenario, opts: &ScenarioOptions) -> Result<Runs, ScenarioError> {
    let input = p.input.state(p.epsilon, p.hbar)?;
    let mut runs = Vec::new();
    for &db in &p.magic_db {
        let magic = gkp(&GkpParams::magic(gkp_db_to_epsilon(db)), p.hbar)?;
        let circuit = TgateCircuit::new(&input, &magic, p.realization)?;
        let group = format!("magic_db={db}");
        let mut rs = collect_runs(p.runs, |k| {
            let mut rng = run_rng(opts.seed, k);
            let o = circuit.run(opts.prune_tol, &mut rng)?;
            Ok(RunRecord {
                group: group.clone(),
                homodyne_records: o.records,
                readout_probs: readout_map(&o.state, &PauliAxis::ALL)?,
                values: BTreeMap::from([("feedforward".to_string(), o.feedforward as u8 as f64)]),
            })
        })?;
        runs.append(&mut rs);
    }
    Ok(runs)
}

fn gkp_ec(p: &GkpEcScenario, opts: &ScenarioOptions) -> Result<Runs, ScenarioError> {
    let mut input = p.input.state(p.epsilon, p.hbar)?;
    if p.noise_sigma2 > 0.0 {
        input = apply_channel(&input, &random_displacement(p.noise_sigma2, p.hbar)?, &[0])?;
    }
    if p.shift_q != 0.0 || p.shift_p != 0.0 {
        input = apply_symplectic(&input, &shift(p.shift_q, p.shift_p), &[0])?;
    }
    let plus = gkp(&GkpParams::plus(p.ancilla_epsilon), p.hbar)?;
    let zero = gkp(&GkpParams::zero(p.ancilla_epsilon), p.hbar)?;
    let before = readout_map(&input, &PauliAxis::ALL)?;
    collect_runs(p.runs, |k| {
        let mut rng = run_rng(opts.seed, k);
        let o = gkp_error_correct(&input, &plus, &zero, p.realization, opts.prune_tol, &mut rng)?;
        let mut values: BTreeMap<String, f64> = before.iter().map(|(k, v)| (format!("before_{k}"), *v)).collect();
        values.insert("correction_q".into(), o.correction.0);
        values.insert("correction_p".into(), o.correction.1);
        Ok(RunRecord {
            group: String::new(),
            homodyne_records: vec![o.q0, o.p0],
            readout_probs: readout_map(&o.state, &PauliAxis::ALL)?,
            values,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn aggregate_groups() {
        let mk = |g: &str, x: f64| RunRecord {
            group: g.into(),
            readout_probs: BTreeMap::from([("X".into(), x)]),
            ..Default::default()
        };
        let a = aggregate(&[mk("a", 1.0), mk("a", 3.0), mk("b", 5.0)]);
        assert_eq!(a.mean["a/X"], 2.0);
        assert!((a.std["a/X"] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(a.std["b/X"], 0.0);
    }

    #[test]
    fn pgate_average_readout() {
        let r = run_scenario("pgate", &json!({}), &ScenarioOptions::default()).unwrap();
        assert_eq!(r.runs.len(), 1);
        assert!((r.aggregate.mean["Y_MINUS"] - 0.999).abs() < 0.01);
        assert!((r.aggregate.mean["Y_PLUS"] - 0.922).abs() < 0.01);
    }

    #[test]
    fn unknown_and_bad_params() {
        let o = ScenarioOptions::default();
        assert!(matches!(run_scenario("nope", &json!({}), &o), Err(ScenarioError::Unknown(_))));
        assert!(matches!(run_scenario("pgate", &json!({"bogus": 1}), &o), Err(ScenarioError::Params(_))));
    }

    #[test]
    fn deterministic_under_seed() {
        let o = ScenarioOptions { seed: 9, prune_tol: 1e-12 };
        let params = json!({"squeeze_db": [10.0], "loss_eta": [0.99], "runs": 4});
        let a = serde_json::to_string(&run_scenario("cluster-teleport", &params, &o).unwrap()).unwrap();
        let b = serde_json::to_string(&run_scenario("cluster-teleport", &params, &o).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
