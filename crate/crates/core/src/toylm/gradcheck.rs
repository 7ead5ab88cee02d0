use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::Example;
use super::model::{ModelParams, PARAM_SPECS};
use super::train::loss_and_grads;
use super::{GroupSet, ParamGroup, ToyLmError};
use crate::promptkit::Stage;
use crate::scaledloss::ScaleConfig;

/// Denominator floor for the relative error, so coordinates whose true
/// gradient is essentially zero are judged on absolute error instead.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckEntry {
    pub tensor: String,
    pub group: ParamGroup,
    pub row: usize,
    pub col: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

/// Compares analytic gradients with central differences of step `h` on
/// `per_group` random coordinates of every group in `groups`.
pub fn finite_difference_check(
    params: &ModelParams,
    batch: &[Example],
    stage: Stage,
    scale: Option<&ScaleConfig>,
    groups: &GroupSet,
    per_group: usize,
    h: f64,
    seed: u64,
) -> Result<Vec<GradCheckEntry>, ToyLmError> {
    let (_, grads) = loss_and_grads(params, batch, stage, scale, groups)?;
    let none = GroupSet::new();
    let loss = |p: &ModelParams| loss_and_grads(p, batch, stage, scale, &none).map(|(l, _)| l.l_final);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = params.clone();
    let mut entries = Vec::new();
    for &group in groups {
        let members: Vec<usize> = (0..PARAM_SPECS.len()).filter(|&i| PARAM_SPECS[i].1 == group).collect();
        for _ in 0..per_group {
            let i = members[rng.gen_range(0..members.len())];
            let (rows, cols) = params.tensors[i].dim();
            let (r, c) = (rng.gen_range(0..rows), rng.gen_range(0..cols));
            let original = params.tensors[i][[r, c]];
            probe.tensors[i][[r, c]] = original + h;
            let plus = loss(&probe)?;
            probe.tensors[i][[r, c]] = original - h;
            let minus = loss(&probe)?;
            probe.tensors[i][[r, c]] = original;
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = grads.tensors[i].as_ref().expect("requested group has gradients")[[r, c]];
            entries.push(GradCheckEntry {
                tensor: PARAM_SPECS[i].0.to_owned(),
                group,
                row: r,
                col: c,
                analytic,
                numeric,
                relative_error: relative_error(analytic, numeric),
            });
        }
    }
    Ok(entries)
}
