//! JSON form of a state: weights are stored as complex logarithms so that
//! very small or very large weights survive the round trip.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};
use crate::mixture::{Diagnostics, Mixture, State};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeakDump {
    pub ln_w: C64,
    pub mean: Vec<C64>,
    /// Index into `covariances`.
    pub cov: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDump {
    pub hbar: f64,
    pub num_modes: usize,
    /// Row-major 2N×2N matrices.
    pub covariances: Vec<Vec<C64>>,
    pub peaks: Vec<PeakDump>,
    #[serde(default)]
    pub diagnostics: Diagnostics,
}

impl StateDump {
    pub fn from_state(state: &State) -> Self {
        let mix = state.mixture();
        Self {
            hbar: state.hbar(),
            num_modes: state.num_modes(),
            covariances: mix
                .pool()
                .iter()
                .map(|c| {
                    let m = c.matrix();
                    (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect()
                })
                .collect(),
            peaks: mix
                .peaks()
                .iter()
                .map(|p| PeakDump {
                    ln_w: p.ln_weight,
                    mean: p.mean.iter().cloned().collect(),
                    cov: p.cov,
                })
                .collect(),
            diagnostics: state.diagnostics.clone(),
        }
    }

    pub fn to_state(&self) -> Result<State> {
        let d = 2 * self.num_modes;
        let mut mix = Mixture::new(d);
        let mut idx = Vec::with_capacity(self.covariances.len());
        for c in &self.covariances {
            if c.len() != d * d {
                return Err(Error::Serialization(format!("covariance has {} entries, need {}", c.len(), d * d)));
            }
            idx.push(mix.add_covariance(CMat::from_row_slice(d, d, c))?);
        }
        for (i, p) in self.peaks.iter().enumerate() {
            if p.mean.len() != d {
                return Err(Error::Serialization(format!("peak {i}: mean has {} entries, need {d}", p.mean.len())));
            }
            let cov = *idx
                .get(p.cov)
                .ok_or_else(|| Error::Serialization(format!("peak {i}: covariance index {} out of range", p.cov)))?;
            mix.push(p.ln_w, CVec::from_column_slice(&p.mean), cov)?;
        }
        let mut st = State::new(self.hbar, mix)?;
        st.diagnostics = self.diagnostics.clone();
        Ok(st)
    }
}

pub fn state_to_json(state: &State) -> Result<String> {
    serde_json::to_string_pretty(&StateDump::from_state(state)).map_err(|e| Error::Serialization(e.to_string()))
}

pub fn state_from_json(s: &str) -> Result<State> {
    let d: StateDump = serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
    d.to_state()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{cat, CatParams};

    #[test]
    fn round_trip_is_exact() {
        let st = cat(&CatParams::new(C64::new(1.2, 0.4), 1), 2.0).unwrap();
        let s = state_to_json(&st).unwrap();
        let back = state_from_json(&s).unwrap();
        assert_eq!(StateDump::from_state(&back), StateDump::from_state(&st));
        assert_eq!(state_to_json(&back).unwrap(), s);
    }

    #[test]
    fn rejects_bad_index() {
        let st = cat(&CatParams::new(C64::new(1.0, 0.0), 0), 2.0).unwrap();
        let mut d = StateDump::from_state(&st);
        d.peaks[0].cov = 9;
        assert!(d.to_state().is_err());
    }
}
