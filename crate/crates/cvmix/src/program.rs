//! Declarative circuit programs: named modes with constructors, a list of
//! operations, and the outputs to write once the circuit has run.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{linspace, marginal, wigner_grid, GridMetadata, GridSpec};
use crate::channels::{
    amplifier, apply_channel, apply_symplectic, beamsplitter, cx_symplectic, cz_symplectic, displacement,
    fock_damping, loss, phase_symplectic, random_displacement, rotation, shift, squeeze_symplectic, thermal_loss,
};
use crate::error::Error;
use crate::gates::{cx_gate, cz_gate, mb_squeeze_average, mb_squeeze_single_shot, pauli_readouts, phase_gate, GateMode, MbSqueezeParams, PauliAxis};
use crate::io::StateDump;
use crate::linalg::C64;
use crate::measurement::{
    condition_on_generaldyne, condition_on_mixture_measurement, homodyne_marginal, sample_generaldyne, threshold_click,
    GeneralDyne, MeasurementOperator, RejectionSampler, DEFAULT_MAX_ITERS,
};
use crate::mixture::{State, DEFAULT_HBAR};
use crate::states::{self, CatParams, CombParams, Component, GkpParams};

fn default_hbar() -> f64 {
    DEFAULT_HBAR
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitProgram {
    #[serde(default = "default_hbar")]
    pub hbar: f64,
    pub modes: Vec<ModeSpec>,
    #[serde(default)]
    pub ops: Vec<Op>,
    #[serde(default)]
    pub outputs: Vec<Output>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub name: String,
    pub init: Init,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "constructor", content = "params", rename_all = "snake_case")]
pub enum Init {
    Vacuum,
    Coherent { alpha: C64 },
    Squeezed {
        r: f64,
        #[serde(default)]
        phi: f64,
    },
    Thermal { nbar: f64 },
    Gkp(GkpParams),
    Cat(CatParams),
    Fock { n: usize, r: f64 },
    Comb(CombParams),
    Superposition { components: Vec<Component> },
}

impl Init {
    pub fn build(&self, hbar: f64) -> crate::Result<State> {
        match self {
            Init::Vacuum => states::vacuum(1, hbar),
            Init::Coherent { alpha } => states::coherent(*alpha, hbar),
            Init::Squeezed { r, phi } => states::squeezed(*r, *phi, hbar),
            Init::Thermal { nbar } => states::thermal(*nbar, hbar),
            Init::Gkp(p) => states::gkp(p, hbar),
            Init::Cat(p) => states::cat(p, hbar),
            Init::Fock { n, r } => states::fock(*n, *r, hbar),
            Init::Comb(p) => states::comb(p, hbar),
            Init::Superposition { components } => states::gaussian_superposition(components, hbar),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum SymplecticGate {
    Beamsplitter { theta: f64 },
    Rotation { theta: f64 },
    Squeeze { r: f64 },
    Displacement { alpha: C64 },
    Shift {
        #[serde(default)]
        dq: f64,
        #[serde(default)]
        dp: f64,
    },
    Cx { s: f64 },
    Cz { s: f64 },
    Phase { s: f64 },
}

impl SymplecticGate {
    fn arity(&self) -> usize {
        match self {
            SymplecticGate::Beamsplitter { .. } | SymplecticGate::Cx { .. } | SymplecticGate::Cz { .. } => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSpec {
    Loss { eta: f64 },
    ThermalLoss { eta: f64, nbar: f64 },
    RandomDisplacement { sigma2: f64 },
    Amplifier { kappa: f64 },
    FockDamping { epsilon: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasSpec {
    /// x_θ on every listed mode.
    Homodyne {
        #[serde(default)]
        angle: f64,
    },
    Heterodyne,
    /// Postselect on vacuum.
    Vacuum,
    /// Postselect on a threshold-detector click; one mode only.
    Click,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum GateSpec {
    Phase { s: f64 },
    Cx { s: f64 },
    Cz { s: f64 },
    /// Measurement-based S(r); r < 0 squeezes p.
    MbSqueeze { r: f64 },
}

fn ideal() -> GateMode {
    GateMode::Ideal
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Op {
    Symplectic {
        gate: SymplecticGate,
        modes: Vec<String>,
    },
    Channel {
        channel: ChannelSpec,
        modes: Vec<String>,
    },
    /// Measured modes are removed from the circuit.
    Measure {
        measurement: MeasSpec,
        modes: Vec<String>,
        /// Fixed outcome; sampled when absent.
        #[serde(default)]
        outcome: Option<Vec<f64>>,
        #[serde(default)]
        bind: Option<String>,
    },
    /// Displace `mode` by gains times entry `index` of a bound record.
    Feedforward {
        from: String,
        #[serde(default)]
        index: usize,
        mode: String,
        #[serde(default)]
        q_gain: f64,
        #[serde(default)]
        p_gain: f64,
    },
    Trace {
        keep: Vec<String>,
    },
    Prune {
        tol: f64,
    },
    #[serde(alias = "scenario_step", alias = "scenario-step")]
    Gate {
        gate: GateSpec,
        modes: Vec<String>,
        #[serde(default = "ideal")]
        realization: GateMode,
        #[serde(default)]
        bind: Option<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Output {
    /// Grid CSV plus a metadata JSON with the same stem. Other modes are
    /// traced out.
    Wigner {
        mode: String,
        grid: GridSpec,
        #[serde(default)]
        file: Option<String>,
    },
    Marginal {
        mode: String,
        #[serde(default)]
        angle: f64,
        x: Range,
        #[serde(default)]
        file: Option<String>,
    },
    Samples {
        mode: String,
        #[serde(default)]
        angle: f64,
        count: usize,
        #[serde(default)]
        file: Option<String>,
    },
    Readout {
        mode: String,
        #[serde(default)]
        file: Option<String>,
    },
    StateDump {
        #[serde(default)]
        file: Option<String>,
    },
}

/// Failure while loading or running a program.
#[derive(Debug, thiserror::Error)]
pub enum ProgramError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("mode {mode:?}: {source}")]
    Init { mode: String, source: Error },
    #[error("step {step}: {source}")]
    Step { step: usize, source: Error },
    #[error("output {index}: {source}")]
    Output { index: usize, source: Error },
    #[error("{0}")]
    Io(String),
}

impl ProgramError {
    pub fn is_schema(&self) -> bool {
        matches!(self, ProgramError::Schema(_))
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub seed: u64,
    pub prune_tol: f64,
    pub out_dir: PathBuf,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            prune_tol: 1e-12,
            out_dir: PathBuf::from("."),
        }
    }
}

/// What a run produced.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub records: BTreeMap<String, Vec<f64>>,
    pub files: Vec<String>,
    pub live_modes: Vec<String>,
}

impl CircuitProgram {
    pub fn from_json(s: &str) -> Result<Self, ProgramError> {
        let p: CircuitProgram = serde_json::from_str(s).map_err(|e| ProgramError::Schema(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, ProgramError> {
        let s = fs::read_to_string(path).map_err(|e| ProgramError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serializes")
    }

    /// Reference checks that serde cannot express.
    pub fn validate(&self) -> Result<(), ProgramError> {
        let schema = |m: String| Err(ProgramError::Schema(m));
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return schema(format!("hbar: {} is not positive", self.hbar));
        }
        if self.modes.is_empty() {
            return schema("modes: at least one mode is required".into());
        }
        let mut live: Vec<&str> = Vec::new();
        for (i, m) in self.modes.iter().enumerate() {
            if live.contains(&m.name.as_str()) {
                return schema(format!("modes[{i}].name: duplicate name {:?}", m.name));
            }
            live.push(&m.name);
        }
        let mut bound: HashSet<&str> = HashSet::new();
        let check = |live: &[&str], names: &[String], ctx: &str| -> Result<(), ProgramError> {
            let mut seen = HashSet::new();
            for n in names {
                if !live.contains(&n.as_str()) {
                    return Err(ProgramError::Schema(format!("{ctx}: mode {n:?} is not available")));
                }
                if !seen.insert(n) {
                    return Err(ProgramError::Schema(format!("{ctx}: mode {n:?} listed twice")));
                }
            }
            if names.is_empty() {
                return Err(ProgramError::Schema(format!("{ctx}: no modes given")));
            }
            Ok(())
        };
        for (i, op) in self.ops.iter().enumerate() {
            let ctx = format!("ops[{i}]");
            match op {
                Op::Symplectic { gate, modes } => {
                    check(&live, modes, &ctx)?;
                    if modes.len() != gate.arity() {
                        return schema(format!("{ctx}.modes: gate acts on {} modes", gate.arity()));
                    }
                }
                Op::Channel { modes, .. } => check(&live, modes, &ctx)?,
                Op::Measure {
                    measurement,
                    modes,
                    outcome,
                    bind,
                } => {
                    check(&live, modes, &ctx)?;
                    let dim = match measurement {
                        MeasSpec::Homodyne { .. } => Some(modes.len()),
                        MeasSpec::Heterodyne => Some(2 * modes.len()),
                        MeasSpec::Vacuum => None,
                        MeasSpec::Click => {
                            if modes.len() != 1 {
                                return schema(format!("{ctx}.modes: click detection takes one mode"));
                            }
                            None
                        }
                    };
                    match (dim, outcome) {
                        (Some(d), Some(o)) if o.len() != d => {
                            return schema(format!("{ctx}.outcome: expected {d} values, got {}", o.len()))
                        }
                        (None, Some(_)) => return schema(format!("{ctx}.outcome: postselection takes no outcome")),
                        _ => {}
                    }
                    live.retain(|n| !modes.iter().any(|m| m == n));
                    if let Some(b) = bind {
                        bound.insert(b);
                    }
                }
                Op::Feedforward { from, mode, .. } => {
                    if !bound.contains(from.as_str()) {
                        return schema(format!("{ctx}.from: no record named {from:?} bound earlier"));
                    }
                    check(&live, std::slice::from_ref(mode), &ctx)?;
                }
                Op::Trace { keep } => {
                    check(&live, keep, &ctx)?;
                    live.retain(|n| keep.iter().any(|k| k == n));
                }
                Op::Prune { tol } => {
                    if !(*tol >= 0.0) {
                        return schema(format!("{ctx}.tol: must be non-negative"));
                    }
                }
                Op::Gate { gate, modes, bind, .. } => {
                    check(&live, modes, &ctx)?;
                    let need = match gate {
                        GateSpec::Phase { .. } | GateSpec::MbSqueeze { .. } => 1,
                        _ => 2,
                    };
                    if modes.len() != need {
                        return schema(format!("{ctx}.modes: gate acts on {need} modes"));
                    }
                    if let Some(b) = bind {
                        bound.insert(b);
                    }
                }
            }
        }
        for (i, out) in self.outputs.iter().enumerate() {
            let ctx = format!("outputs[{i}]");
            match out {
                Output::Wigner { mode, grid, .. } => {
                    check(&live, std::slice::from_ref(mode), &ctx)?;
                    grid.validate().map_err(|e| ProgramError::Schema(format!("{ctx}.grid: {e}")))?;
                }
                Output::Marginal { mode, x, .. } => {
                    check(&live, std::slice::from_ref(mode), &ctx)?;
                    if x.points < 1 || !(x.max >= x.min) {
                        return schema(format!("{ctx}.x: empty range"));
                    }
                }
                Output::Samples { mode, .. } | Output::Readout { mode, .. } => {
                    check(&live, std::slice::from_ref(mode), &ctx)?
                }
                Output::StateDump { .. } => {
                    if live.is_empty() {
                        return schema(format!("{ctx}: every mode has been measured"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn run(&self, opts: &RunOptions) -> Result<RunReport, ProgramError> {
        self.validate()?;
        let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
        let mut names: Vec<String> = self.modes.iter().map(|m| m.name.clone()).collect();
        let init = |m: &ModeSpec| {
            m.init.build(self.hbar).map_err(|e| ProgramError::Init {
                mode: m.name.clone(),
                source: e,
            })
        };
        let mut state = init(&self.modes[0])?;
        for m in &self.modes[1..] {
            let s = init(m)?;
            state = state.tensor(&s).map_err(|e| ProgramError::Init {
                mode: m.name.clone(),
                source: e,
            })?;
        }
        let mut state = Some(state);
        let mut records: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (i, op) in self.ops.iter().enumerate() {
            let st = state.take().ok_or_else(|| ProgramError::Step {
                step: i,
                source: Error::InvalidState("no modes left".into()),
            })?;
            let (next, rec) = run_op(op, st, &mut names, &records, opts, &mut rng).map_err(|e| ProgramError::Step { step: i, source: e })?;
            if let Some((k, v)) = rec {
                records.insert(k, v);
            }
            state = next;
        }
        fs::create_dir_all(&opts.out_dir).map_err(|e| ProgramError::Io(format!("{}: {e}", opts.out_dir.display())))?;
        let mut files = Vec::new();
        for (i, out) in self.outputs.iter().enumerate() {
            let st = state.as_ref().expect("validated: outputs need live modes");
            let f = write_output(out, i, st, &names, opts, &mut rng).map_err(|e| match e {
                OutErr::Sim(e) => ProgramError::Output { index: i, source: e },
                OutErr::Io(s) => ProgramError::Io(s),
            })?;
            files.extend(f);
        }
        Ok(RunReport {
            records,
            files,
            live_modes: names,
        })
    }
}

fn index_of(names: &[String], n: &str) -> crate::Result<usize> {
    names
        .iter()
        .position(|m| m == n)
        .ok_or_else(|| Error::InvalidModes(format!("mode {n:?} is not available")))
}

fn indices(names: &[String], ns: &[String]) -> crate::Result<Vec<usize>> {
    ns.iter().map(|n| index_of(names, n)).collect()
}

type Record = Option<(String, Vec<f64>)>;

fn run_op(
    op: &Op,
    state: State,
    names: &mut Vec<String>,
    records: &BTreeMap<String, Vec<f64>>,
    opts: &RunOptions,
    rng: &mut ChaCha20Rng,
) -> crate::Result<(Option<State>, Record)> {
    let hbar = state.hbar();
    match op {
        Op::Symplectic { gate, modes } => {
            let idx = indices(names, modes)?;
            let s = match *gate {
                SymplecticGate::Beamsplitter { theta } => beamsplitter(theta),
                SymplecticGate::Rotation { theta } => rotation(theta),
                SymplecticGate::Squeeze { r } => squeeze_symplectic(r),
                SymplecticGate::Displacement { alpha } => displacement(alpha, hbar),
                SymplecticGate::Shift { dq, dp } => shift(dq, dp),
                SymplecticGate::Cx { s } => cx_symplectic(s),
                SymplecticGate::Cz { s } => cz_symplectic(s),
                SymplecticGate::Phase { s } => phase_symplectic(s),
            };
            Ok((Some(apply_symplectic(&state, &s, &idx)?), None))
        }
        Op::Channel { channel, modes } => {
            let idx = indices(names, modes)?;
            let single = match *channel {
                ChannelSpec::Loss { eta } => loss(eta, hbar)?,
                ChannelSpec::ThermalLoss { eta, nbar } => thermal_loss(eta, nbar, hbar)?,
                ChannelSpec::RandomDisplacement { sigma2 } => random_displacement(sigma2, hbar)?,
                ChannelSpec::Amplifier { kappa } => amplifier(kappa, hbar)?,
                ChannelSpec::FockDamping { epsilon } => {
                    return Ok((Some(fock_damping(&state, epsilon, &idx)?.prune(opts.prune_tol)?), None))
                }
            };
            let mut st = state;
            for &m in &idx {
                st = apply_channel(&st, &single, &[m])?;
            }
            Ok((Some(st), None))
        }
        Op::Measure {
            measurement,
            modes,
            outcome,
            bind,
        } => {
            let idx = indices(names, modes)?;
            let all_measured = idx.len() == names.len();
            let (next, values) = match measurement {
                MeasSpec::Homodyne { .. } | MeasSpec::Heterodyne => {
                    let meas = match measurement {
                        MeasSpec::Homodyne { angle } => GeneralDyne::homodyne(idx.clone(), vec![*angle; idx.len()])?,
                        _ => GeneralDyne::heterodyne(idx.clone(), hbar)?,
                    };
                    let r = match outcome {
                        Some(r) => r.clone(),
                        None => sample_generaldyne(&state, &meas, rng)?.outcome,
                    };
                    if all_measured {
                        (None, r)
                    } else {
                        let out = condition_on_generaldyne(&state, &meas, &r)?;
                        (Some(out.state.prune(opts.prune_tol)?), r)
                    }
                }
                MeasSpec::Vacuum | MeasSpec::Click => {
                    if all_measured {
                        return Err(Error::InvalidModes("postselection needs an unmeasured mode".into()));
                    }
                    let out = match measurement {
                        MeasSpec::Click => threshold_click(&state, idx[0])?,
                        _ => condition_on_mixture_measurement(&state, &MeasurementOperator::vacuum_projector(idx.clone(), hbar)?)?,
                    };
                    (Some(out.state.prune(opts.prune_tol)?), vec![out.probability])
                }
            };
            names.retain(|n| !modes.contains(n));
            Ok((next, bind.clone().map(|b| (b, values))))
        }
        Op::Feedforward {
            from,
            index,
            mode,
            q_gain,
            p_gain,
        } => {
            let rec = records
                .get(from)
                .ok_or_else(|| Error::InvalidParameter(format!("no record {from:?}")))?;
            let v = *rec
                .get(*index)
                .ok_or_else(|| Error::InvalidParameter(format!("record {from:?} has {} entries", rec.len())))?;
            let m = index_of(names, mode)?;
            Ok((Some(apply_symplectic(&state, &shift(q_gain * v, p_gain * v), &[m])?), None))
        }
        Op::Trace { keep } => {
            let mut idx = indices(names, keep)?;
            idx.sort_unstable();
            let st = state.partial_trace(&idx)?;
            *names = idx.iter().map(|&i| names[i].clone()).collect();
            Ok((Some(st), None))
        }
        Op::Prune { tol } => Ok((Some(state.prune(*tol)?), None)),
        Op::Gate {
            gate,
            modes,
            realization,
            bind,
        } => {
            let idx = indices(names, modes)?;
            let out = match *gate {
                GateSpec::Phase { s } => phase_gate(&state, s, idx[0], realization, rng)?,
                GateSpec::Cx { s } => cx_gate(&state, s, [idx[0], idx[1]], realization, rng)?,
                GateSpec::Cz { s } => cz_gate(&state, s, [idx[0], idx[1]], realization, rng)?,
                GateSpec::MbSqueeze { r } => {
                    let res = match realization {
                        GateMode::Ideal => {
                            return Ok((Some(apply_symplectic(&state, &squeeze_symplectic(r), &idx)?), None));
                        }
                        GateMode::MbAverage(res) | GateMode::MbSingleShot(res) => res,
                    };
                    let p: MbSqueezeParams = res.squeezer(r)?;
                    match realization {
                        GateMode::MbAverage(_) => crate::gates::GateOutcome {
                            state: mb_squeeze_average(&state, &p, idx[0])?,
                            records: vec![],
                        },
                        _ => {
                            let o = mb_squeeze_single_shot(&state, &p, idx[0], rng)?;
                            crate::gates::GateOutcome {
                                state: o.state,
                                records: o.outcome,
                            }
                        }
                    }
                }
            };
            Ok((Some(out.state.prune(opts.prune_tol)?), bind.clone().map(|b| (b, out.records))))
        }
    }
}

enum OutErr {
    Sim(Error),
    Io(String),
}

impl From<Error> for OutErr {
    fn from(e: Error) -> Self {
        OutErr::Sim(e)
    }
}

fn create(path: &Path) -> Result<fs::File, OutErr> {
    fs::File::create(path).map_err(|e| OutErr::Io(format!("{}: {e}", path.display())))
}

fn single(state: &State, names: &[String], mode: &str) -> crate::Result<State> {
    let m = index_of(names, mode)?;
    if state.num_modes() == 1 {
        Ok(state.clone())
    } else {
        state.partial_trace(&[m])
    }
}

fn write_output(
    out: &Output,
    i: usize,
    state: &State,
    names: &[String],
    opts: &RunOptions,
    rng: &mut ChaCha20Rng,
) -> Result<Vec<String>, OutErr> {
    let name = |file: &Option<String>, stem: &str, ext: &str| -> String {
        file.clone().unwrap_or_else(|| format!("{stem}_{i}.{ext}"))
    };
    let dir = &opts.out_dir;
    match out {
        Output::Wigner { mode, grid, file } => {
            let st = single(state, names, mode)?;
            let w = wigner_grid(&st, grid)?;
            let f = name(file, "wigner", "csv");
            w.write_csv(create(&dir.join(&f))?)?;
            let meta_name = Path::new(&f).with_extension("json").to_string_lossy().into_owned();
            let meta = GridMetadata::new(grid, &st, &w, format!("mode {mode}"));
            write_json(&dir.join(&meta_name), &meta)?;
            Ok(vec![f, meta_name])
        }
        Output::Marginal { mode, angle, x, file } => {
            let st = single(state, names, mode)?;
            let xs = linspace(x.min, x.max, x.points);
            let m = marginal(&st, 0, *angle, &xs)?;
            let f = name(file, "marginal", "csv");
            m.write_csv(create(&dir.join(&f))?)?;
            Ok(vec![f])
        }
        Output::Samples { mode, angle, count, file } => {
            let m = index_of(names, mode)?;
            let mix = homodyne_marginal(state, &[m], &[*angle])?;
            let sampler = RejectionSampler::new(&mix)?;
            let f = name(file, "samples", "csv");
            let mut wr = csv::Writer::from_writer(create(&dir.join(&f))?);
            let io = |e: csv::Error| OutErr::Io(e.to_string());
            wr.write_record(["sample_index", "value"]).map_err(io)?;
            for k in 0..*count {
                let s = sampler.sample(rng, DEFAULT_MAX_ITERS)?;
                wr.write_record([k.to_string(), crate::analysis::fmt(s.outcome[0])]).map_err(io)?;
            }
            wr.flush().map_err(|e| OutErr::Io(e.to_string()))?;
            Ok(vec![f])
        }
        Output::Readout { mode, file } => {
            let st = single(state, names, mode)?;
            let r = pauli_readouts(&st)?;
            let map: BTreeMap<&str, f64> = PauliAxis::ALL.iter().map(|a| a.name()).zip(r).collect();
            let f = name(file, "readout", "json");
            write_json(&dir.join(&f), &map)?;
            Ok(vec![f])
        }
        Output::StateDump { file } => {
            let f = name(file, "state", "json");
            write_json(&dir.join(&f), &StateDump::from_state(state))?;
            Ok(vec![f])
        }
    }
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), OutErr> {
    let s = serde_json::to_string_pretty(v).map_err(|e| OutErr::Io(e.to_string()))?;
    fs::write(path, s + "\n").map_err(|e| OutErr::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<CircuitProgram, ProgramError> {
        CircuitProgram::from_json(s)
    }

    #[test]
    fn round_trip_fixed_point() {
        let src = r#"{
            "modes": [
                {"name": "a", "init": {"constructor": "cat", "params": {"alpha": [2.0, 0.0], "parity": 0}}},
                {"name": "b", "init": {"constructor": "vacuum"}}
            ],
            "ops": [
                {"kind": "symplectic", "gate": {"name": "beamsplitter", "theta": 0.7}, "modes": ["a", "b"]},
                {"kind": "measure", "measurement": {"name": "homodyne", "angle": 0.0}, "modes": ["b"], "bind": "m"},
                {"kind": "feedforward", "from": "m", "mode": "a", "p_gain": -1.0}
            ],
            "outputs": [{"kind": "readout", "mode": "a"}]
        }"#;
        let p = parse(src).unwrap();
        let again = parse(&p.to_json()).unwrap();
        assert_eq!(p, again);
        assert_eq!(p.to_json(), again.to_json());
    }

    #[test]
    fn schema_errors() {
        let bad_field = r#"{"modes": [{"name": "a", "init": {"constructor": "vacuum"}, "extra": 1}]}"#;
        assert!(parse(bad_field).unwrap_err().is_schema());
        let reuse = r#"{
            "modes": [{"name": "a", "init": {"constructor": "vacuum"}}, {"name": "b", "init": {"constructor": "vacuum"}}],
            "ops": [
                {"kind": "measure", "measurement": {"name": "homodyne"}, "modes": ["a"]},
                {"kind": "channel", "channel": {"name": "loss", "eta": 0.5}, "modes": ["a"]}
            ]
        }"#;
        let e = parse(reuse).unwrap_err();
        assert!(e.is_schema() && e.to_string().contains("ops[1]"), "{e}");
        let unbound = r#"{
            "modes": [{"name": "a", "init": {"constructor": "vacuum"}}],
            "ops": [{"kind": "feedforward", "from": "x", "mode": "a", "q_gain": 1.0}]
        }"#;
        assert!(parse(unbound).unwrap_err().is_schema());
    }

    #[test]
    fn runtime_errors_carry_step() {
        let src = r#"{
            "modes": [{"name": "a", "init": {"constructor": "fock", "params": {"n": 3, "r": 0.9}}}]
        }"#;
        let p = parse(src).unwrap();
        let e = p.run(&RunOptions::default()).unwrap_err();
        assert!(matches!(e, ProgramError::Init { .. }));
        let src = r#"{
            "modes": [{"name": "a", "init": {"constructor": "vacuum"}}],
            "ops": [
                {"kind": "prune", "tol": 0.0},
                {"kind": "channel", "channel": {"name": "loss", "eta": 1.5}, "modes": ["a"]}
            ]
        }"#;
        let e = parse(src).unwrap().run(&RunOptions::default()).unwrap_err();
        assert!(matches!(e, ProgramError::Step { step: 1, .. }), "{e}");
    }
}
