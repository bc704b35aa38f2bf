//! Model files: a JSON header describing the model and a little-endian f64
//! blob holding every real-valued parameter. The header refers to blob
//! ranges by element offset and length.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::digest;

use super::gbdt::{GbdtModel, Node, Tree};
use super::logistic::LogisticModel;
use super::mlp::{Layer, MlpModel, Network};
use super::prep::Preprocessor;
use super::{ModelSpec, PriorModel, TrainedModel};

pub const MODEL_HEADER: &str = "model.json";
pub const MODEL_BLOB: &str = "model.bin";
const FORMAT: &str = "rocktype-model";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlobRef {
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    family: String,
    features: Vec<String>,
    spec: ModelSpec,
    blob: String,
    blob_len: usize,
    blob_sha256: String,
    body: Body,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Body {
    Prior {
        prior: BlobRef,
    },
    Logistic {
        prep: PrepHeader,
        weights: BlobRef,
        iterations: usize,
    },
    Gbdt {
        init: BlobRef,
        trees: Vec<TreeHeader>,
    },
    Mlp {
        prep: PrepHeader,
        layers: Vec<LayerHeader>,
        epoch_loss: BlobRef,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct PrepHeader {
    impute: BlobRef,
    indicators: Vec<usize>,
    center: BlobRef,
    scale: BlobRef,
}

/// Tree topology; `values` holds the threshold of each split node or the
/// output of each leaf, in node order.
#[derive(Debug, Serialize, Deserialize)]
struct TreeHeader {
    nodes: Vec<NodeHeader>,
    values: BlobRef,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum NodeHeader {
    Split {
        feature: usize,
        default_left: bool,
        left: usize,
        right: usize,
    },
    Leaf {},
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerHeader {
    inputs: usize,
    outputs: usize,
    weights: BlobRef,
    bias: BlobRef,
}

#[derive(Default)]
struct BlobWriter {
    data: Vec<f64>,
}

impl BlobWriter {
    fn put<'a>(&mut self, values: impl IntoIterator<Item = &'a f64>) -> BlobRef {
        let offset = self.data.len();
        self.data.extend(values);
        BlobRef {
            offset,
            len: self.data.len() - offset,
        }
    }

    fn bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    fn prep(&mut self, p: &Preprocessor) -> PrepHeader {
        PrepHeader {
            impute: self.put(&p.impute),
            indicators: p.indicators.clone(),
            center: self.put(&p.center),
            scale: self.put(&p.scale),
        }
    }
}

struct BlobReader<'a> {
    data: Vec<f64>,
    path: &'a Path,
}

impl BlobReader<'_> {
    fn get(&self, r: BlobRef) -> Result<&[f64]> {
        r.offset
            .checked_add(r.len)
            .filter(|&end| end <= self.data.len())
            .map(|end| &self.data[r.offset..end])
            .ok_or_else(|| self.corrupt(format!("blob range {}+{} out of bounds", r.offset, r.len)))
    }

    fn scalar(&self, r: BlobRef) -> Result<f64> {
        match self.get(r)? {
            [v] => Ok(*v),
            other => Err(self.corrupt(format!("expected one value, found {}", other.len()))),
        }
    }

    fn corrupt(&self, message: String) -> Error {
        Error::Corrupt {
            path: self.path.to_path_buf(),
            message,
        }
    }

    fn prep(&self, h: &PrepHeader) -> Result<Preprocessor> {
        let prep = Preprocessor {
            impute: self.get(h.impute)?.to_vec(),
            indicators: h.indicators.clone(),
            center: self.get(h.center)?.to_vec(),
            scale: self.get(h.scale)?.to_vec(),
        };
        let d = prep.impute.len();
        if prep.center.len() != prep.width()
            || prep.scale.len() != prep.width()
            || prep.indicators.iter().any(|&i| i >= d)
        {
            return Err(self.corrupt("inconsistent preprocessing sizes".into()));
        }
        Ok(prep)
    }
}

/// Write `model.json` and `model.bin` into `dir`, creating it if needed.
pub fn save_model(model: &TrainedModel, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut blob = BlobWriter::default();
    let (spec, body) = match model {
        TrainedModel::Prior(m) => (
            ModelSpec::Prior,
            Body::Prior {
                prior: blob.put([m.prior].iter()),
            },
        ),
        TrainedModel::Logistic(m) => (
            ModelSpec::Logistic(m.params.clone()),
            Body::Logistic {
                prep: blob.prep(&m.prep),
                weights: blob.put(&m.weights),
                iterations: m.iterations,
            },
        ),
        TrainedModel::Gbdt(m) => {
            let init = blob.put([m.init].iter());
            let trees = m
                .trees
                .iter()
                .map(|t| {
                    let mut values = Vec::with_capacity(t.nodes.len());
                    let nodes = t
                        .nodes
                        .iter()
                        .map(|n| match *n {
                            Node::Split {
                                feature,
                                threshold,
                                default_left,
                                left,
                                right,
                            } => {
                                values.push(threshold);
                                NodeHeader::Split {
                                    feature,
                                    default_left,
                                    left,
                                    right,
                                }
                            }
                            Node::Leaf { value } => {
                                values.push(value);
                                NodeHeader::Leaf {}
                            }
                        })
                        .collect();
                    TreeHeader {
                        nodes,
                        values: blob.put(&values),
                    }
                })
                .collect();
            (ModelSpec::Gbdt(m.params.clone()), Body::Gbdt { init, trees })
        }
        TrainedModel::Mlp(m) => {
            let prep = blob.prep(&m.prep);
            let layers = m
                .network
                .layers
                .iter()
                .map(|l| LayerHeader {
                    inputs: l.weights.nrows(),
                    outputs: l.weights.ncols(),
                    weights: blob.put(l.weights.iter()),
                    bias: blob.put(l.bias.iter()),
                })
                .collect();
            (
                ModelSpec::Mlp(m.params.clone()),
                Body::Mlp {
                    prep,
                    layers,
                    epoch_loss: blob.put(&m.epoch_loss),
                },
            )
        }
    };
    let bytes = blob.bytes();
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        family: model.family().into(),
        features: model.features().to_vec(),
        spec,
        blob: MODEL_BLOB.into(),
        blob_len: blob.data.len(),
        blob_sha256: digest(&bytes),
        body,
    };
    let json = serde_json::to_string_pretty(&header).expect("header serializes");
    let bin_path = dir.join(MODEL_BLOB);
    fs::write(&bin_path, &bytes).map_err(|e| Error::io(&bin_path, e))?;
    let header_path = dir.join(MODEL_HEADER);
    fs::write(&header_path, json + "\n").map_err(|e| Error::io(&header_path, e))?;
    Ok(())
}

/// Read a model written by [`save_model`].
pub fn load_model(dir: &Path) -> Result<TrainedModel> {
    let header_path = dir.join(MODEL_HEADER);
    let text = fs::read_to_string(&header_path).map_err(|e| Error::io(&header_path, e))?;
    let corrupt = |message: String| Error::Corrupt {
        path: header_path.clone(),
        message,
    };
    let header: Header = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(corrupt(format!("unsupported format {} v{}", header.format, header.version)));
    }
    if header.blob.contains(['/', '\\']) {
        return Err(corrupt(format!("blob name `{}` must be a plain file name", header.blob)));
    }
    let bin_path = dir.join(&header.blob);
    let bytes = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    let reader = BlobReader {
        data: bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect(),
        path: &bin_path,
    };
    if bytes.len() != header.blob_len * 8 {
        return Err(reader.corrupt(format!("expected {} values, found {} bytes", header.blob_len, bytes.len())));
    }
    if digest(&bytes) != header.blob_sha256 {
        return Err(reader.corrupt("checksum mismatch".into()));
    }

    let features = header.features;
    let d = features.len();
    let model = match (header.body, header.spec) {
        (Body::Prior { prior }, ModelSpec::Prior) => TrainedModel::Prior(PriorModel {
            features,
            prior: reader.scalar(prior)?,
        }),
        (
            Body::Logistic {
                prep,
                weights,
                iterations,
            },
            ModelSpec::Logistic(params),
        ) => {
            let prep = reader.prep(&prep)?;
            let weights = reader.get(weights)?.to_vec();
            if prep.impute.len() != d || weights.len() != prep.width() + 1 {
                return Err(reader.corrupt("logistic weight count does not match schema".into()));
            }
            TrainedModel::Logistic(LogisticModel {
                features,
                prep,
                weights,
                params,
                iterations,
            })
        }
        (Body::Gbdt { init, trees }, ModelSpec::Gbdt(params)) => {
            let init = reader.scalar(init)?;
            let trees = trees
                .iter()
                .map(|t| {
                    let values = reader.get(t.values)?;
                    if values.len() != t.nodes.len() || t.nodes.is_empty() {
                        return Err(reader.corrupt("tree value count mismatch".into()));
                    }
                    let n = t.nodes.len();
                    let nodes = t
                        .nodes
                        .iter()
                        .zip(values)
                        .enumerate()
                        .map(|(i, (h, &v))| match *h {
                            NodeHeader::Split {
                                feature,
                                default_left,
                                left,
                                right,
                            } => {
                                // Children come after their parent, so walks terminate.
                                if feature >= d || left <= i || right <= i || left >= n || right >= n {
                                    return Err(reader.corrupt(format!("invalid split node {i}")));
                                }
                                Ok(Node::Split {
                                    feature,
                                    threshold: v,
                                    default_left,
                                    left,
                                    right,
                                })
                            }
                            NodeHeader::Leaf {} => Ok(Node::Leaf { value: v }),
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(Tree { nodes })
                })
                .collect::<Result<Vec<_>>>()?;
            TrainedModel::Gbdt(GbdtModel {
                features,
                params,
                init,
                trees,
            })
        }
        (
            Body::Mlp {
                prep,
                layers,
                epoch_loss,
            },
            ModelSpec::Mlp(params),
        ) => {
            let prep = reader.prep(&prep)?;
            let mut expected_in = prep.width();
            let mut built = Vec::with_capacity(layers.len());
            for l in &layers {
                if l.inputs != expected_in {
                    return Err(reader.corrupt("layer sizes do not chain".into()));
                }
                let w = reader.get(l.weights)?.to_vec();
                let b = reader.get(l.bias)?.to_vec();
                let weights = Array2::from_shape_vec((l.inputs, l.outputs), w)
                    .map_err(|e| reader.corrupt(e.to_string()))?;
                if b.len() != l.outputs {
                    return Err(reader.corrupt("bias length mismatch".into()));
                }
                built.push(Layer {
                    weights,
                    bias: Array1::from(b),
                });
                expected_in = l.outputs;
            }
            if prep.impute.len() != d || expected_in != 1 || built.is_empty() {
                return Err(reader.corrupt("network shape does not match schema".into()));
            }
            TrainedModel::Mlp(MlpModel {
                features,
                prep,
                network: Network { layers: built },
                params,
                epoch_loss: reader.get(epoch_loss)?.to_vec(),
            })
        }
        _ => return Err(corrupt("body does not match model family".into())),
    };
    if model.family() != header.family {
        return Err(corrupt(format!("family tag `{}` does not match body", header.family)));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::logistic::tests::matrix;
    use crate::models::{fit, GbdtParams, LogisticParams, MlpParams};

    fn data() -> crate::features::FeatureMatrix {
        let rows: Vec<_> = (0..80)
            .map(|i| {
                let v = i as f64 * 0.37;
                vec![Some(v.sin()), if i % 7 == 0 { None } else { Some(v.cos() * 3.0) }]
            })
            .collect();
        let y: Vec<u8> = (0..80).map(|i| u8::from((i as f64 * 0.37).sin() > 0.2)).collect();
        matrix(&["a", "b"], &rows, &y)
    }

    #[test]
    fn every_family_round_trips_exactly() {
        let x = data();
        let specs = [
            ModelSpec::Prior,
            ModelSpec::Logistic(LogisticParams::default()),
            ModelSpec::Gbdt(GbdtParams { n_trees: 20, min_leaf: 5, ..GbdtParams::default() }),
            ModelSpec::Mlp(MlpParams { hidden: vec![4, 3], epochs: 3, ..MlpParams::default() }),
        ];
        for spec in specs {
            let model = fit(&x, &spec).unwrap();
            let dir = tempfile::tempdir().unwrap();
            save_model(&model, dir.path()).unwrap();
            let back = load_model(dir.path()).unwrap();
            assert_eq!(back, model, "{}", spec.family());
            let a = model.predict_proba(&x).unwrap();
            let b = back.predict_proba(&x).unwrap();
            assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn tampered_blob_is_rejected() {
        let model = fit(&data(), &ModelSpec::Logistic(LogisticParams::default())).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_model(&model, dir.path()).unwrap();
        let path = dir.path().join(MODEL_BLOB);
        let mut bytes = fs::read(&path).unwrap();
        bytes[3] ^= 1;
        fs::write(&path, bytes).unwrap();
        assert!(matches!(load_model(dir.path()), Err(Error::Corrupt { .. })));
    }
}
