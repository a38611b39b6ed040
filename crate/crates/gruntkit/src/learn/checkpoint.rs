//! Model checkpoint file: magic `GMDL`, version, a JSON config block, and
//! the flat little-endian 64-bit parameter vector. Loadable for
//! inference-only runs.

use std::path::Path;

use crate::error::{Error, Result};
use crate::learn::net::{NetConfig, NetParams};
use crate::learn::svm::SvmModel;
use crate::learn::Standardizer;

const MAGIC: &[u8; 4] = b"GMDL";
const VERSION: u16 = 1;

/// Any model the pipeline can persist.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Svm(SvmModel),
    Net { config: NetConfig, params: NetParams },
}

#[derive(serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Meta {
    Svm { c_value: f64, dim: usize },
    Net { config: NetConfig },
}

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let (meta, payload): (Meta, Vec<f64>) = match model {
        TrainedModel::Svm(svm) => {
            let dim = svm.weights.len();
            let mut payload = Vec::with_capacity(3 * dim + 1);
            payload.extend_from_slice(&svm.weights);
            payload.push(svm.bias);
            payload.extend_from_slice(&svm.standardizer.means);
            payload.extend_from_slice(&svm.standardizer.stds);
            (
                Meta::Svm {
                    c_value: svm.c_value,
                    dim,
                },
                payload,
            )
        }
        TrainedModel::Net { config, params } => (
            Meta::Net {
                config: config.clone(),
            },
            params.data.clone(),
        ),
    };

    let json = serde_json::to_vec(&meta)?;
    let mut bytes = Vec::with_capacity(4 + 2 + 4 + json.len() + 8 + payload.len() * 8);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&(json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&json);
    bytes.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    for v in &payload {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let bytes = std::fs::read(path.as_ref())?;
    let fail = |msg: &str| Error::Checkpoint(format!("{}: {msg}", path.as_ref().display()));
    if bytes.len() < 10 || &bytes[0..4] != MAGIC {
        return Err(fail("not a GMDL checkpoint"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(fail(&format!("unsupported version {version}")));
    }
    let json_len = u32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]) as usize;
    let json_end = 10 + json_len;
    if bytes.len() < json_end + 8 {
        return Err(fail("truncated checkpoint"));
    }
    let meta: Meta = serde_json::from_slice(&bytes[10..json_end])?;
    let n = u64::from_le_bytes(bytes[json_end..json_end + 8].try_into().unwrap()) as usize;
    let data_start = json_end + 8;
    if bytes.len() != data_start + 8 * n {
        return Err(fail("parameter payload size mismatch"));
    }
    let payload: Vec<f64> = (0..n)
        .map(|i| {
            f64::from_le_bytes(
                bytes[data_start + 8 * i..data_start + 8 * (i + 1)]
                    .try_into()
                    .unwrap(),
            )
        })
        .collect();

    match meta {
        Meta::Svm { c_value, dim } => {
            if payload.len() != 3 * dim + 1 {
                return Err(fail("SVM payload size mismatch"));
            }
            Ok(TrainedModel::Svm(SvmModel {
                weights: payload[..dim].to_vec(),
                bias: payload[dim],
                c_value,
                standardizer: Standardizer {
                    means: payload[dim + 1..2 * dim + 1].to_vec(),
                    stds: payload[2 * dim + 1..].to_vec(),
                },
            }))
        }
        Meta::Net { config } => {
            let layout = crate::learn::net::ParamLayout::new(&config)?;
            if payload.len() != layout.total {
                return Err(fail("network payload size mismatch"));
            }
            Ok(TrainedModel::Net {
                config,
                params: NetParams { data: payload },
            })
        }
    }
}
