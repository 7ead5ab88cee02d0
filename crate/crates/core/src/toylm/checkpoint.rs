use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::model::{ModelConfig, ModelParams, PARAM_SPECS};
use super::vocab::Vocab;
use super::{ParamGroup, ToyLmError};
use crate::promptkit::Stage;

pub const CHECKPOINT_FORMAT: &str = "recipe-forge-toylm";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub group: ParamGroup,
    pub dims: [usize; 2],
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    /// Stage that produced the parameters; `None` for a fresh init.
    pub stage: Option<Stage>,
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub arrays: Vec<NamedArray>,
}

impl Checkpoint {
    pub fn from_params(params: &ModelParams, stage: Option<Stage>) -> Self {
        let arrays = PARAM_SPECS
            .iter()
            .zip(&params.tensors)
            .map(|((name, group), t)| NamedArray {
                name: (*name).to_owned(),
                group: *group,
                dims: [t.nrows(), t.ncols()],
                data: t.iter().copied().collect(),
            })
            .collect();
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_owned(),
            version: CHECKPOINT_VERSION,
            stage,
            config: params.config,
            vocab: params.vocab.clone(),
            arrays,
        }
    }

    pub fn into_params(self) -> Result<ModelParams, ToyLmError> {
        let bad = |m: String| Err(ToyLmError::Checkpoint(m));
        if self.format != CHECKPOINT_FORMAT {
            return bad(format!("unknown format {:?}", self.format));
        }
        if self.version != CHECKPOINT_VERSION {
            return bad(format!("unsupported version {}", self.version));
        }
        self.config.validate()?;
        if self.config.vocab_size != self.vocab.len() {
            return bad(format!(
                "config declares {} tokens but the vocabulary has {}",
                self.config.vocab_size,
                self.vocab.len()
            ));
        }
        if self.arrays.len() != PARAM_SPECS.len() {
            return bad(format!("expected {} arrays, found {}", PARAM_SPECS.len(), self.arrays.len()));
        }
        let mut tensors = Vec::with_capacity(PARAM_SPECS.len());
        for (i, (array, (name, group))) in self.arrays.into_iter().zip(PARAM_SPECS).enumerate() {
            if array.name != name || array.group != group {
                return bad(format!("array {i} is {:?}, expected {name:?}", array.name));
            }
            let shape = self.config.shape(i);
            if array.dims != [shape.0, shape.1] {
                return bad(format!("{name} has dims {:?}, expected {shape:?}", array.dims));
            }
            if array.data.iter().any(|x| !x.is_finite()) {
                return bad(format!("{name} has non-finite entries"));
            }
            let t = Array2::from_shape_vec(shape, array.data)
                .map_err(|e| ToyLmError::Checkpoint(format!("{name}: {e}")))?;
            tensors.push(t);
        }
        Ok(ModelParams {
            config: self.config,
            vocab: self.vocab,
            tensors,
        })
    }
}

pub fn save_checkpoint(params: &ModelParams, stage: Option<Stage>, path: &Path) -> Result<(), ToyLmError> {
    let io = |source| ToyLmError::Io {
        path: path.to_owned(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    serde_json::to_writer(&mut out, &Checkpoint::from_params(params, stage))
        .map_err(|e| ToyLmError::Checkpoint(e.to_string()))?;
    out.write_all(b"\n").map_err(io)?;
    out.flush().map_err(io)
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, Option<Stage>), ToyLmError> {
    let file = File::open(path).map_err(|source| ToyLmError::Io {
        path: path.to_owned(),
        source,
    })?;
    let ckpt: Checkpoint =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| ToyLmError::Checkpoint(e.to_string()))?;
    let stage = ckpt.stage;
    Ok((ckpt.into_params()?, stage))
}

#[cfg(test)]
mod tests {
    use super::super::init_model;
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let vocab = Vocab::build(["a b c"], 8).unwrap();
        let params = init_model(vocab, 6, 2, 8, 5, 42).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_checkpoint(&params, Some(Stage::S1), &path).unwrap();
        let (back, stage) = load_checkpoint(&path).unwrap();
        assert_eq!(stage, Some(Stage::S1));
        for g in ParamGroup::ALL {
            assert_eq!(back.group_hash(g), params.group_hash(g));
        }
    }

    #[test]
    fn rejects_tampering() {
        let vocab = Vocab::build(["a b c"], 8).unwrap();
        let params = init_model(vocab, 6, 2, 8, 5, 42).unwrap();
        let mut c = Checkpoint::from_params(&params, None);
        c.arrays[3].dims = [1, 1];
        assert!(c.clone().into_params().is_err());
        let mut c = Checkpoint::from_params(&params, None);
        c.version = 99;
        assert!(c.into_params().is_err());
    }
}
