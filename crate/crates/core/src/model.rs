//! Trained writer model: one network per subgroup (with pooled per-group
//! fallbacks), the input scaler, and the enrolled writer list. Serialized as
//! versioned JSON with weights at 9 significant digits; serialization is
//! bit-deterministic for a given model.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMode;
use crate::linalg::Mat;
use crate::neural::{
    train_stack, Activation, AutoencoderHyperparams, DenseLayer, MinMaxScaler, OptimizerConfig,
    StackTrainConfig, SubgroupNetwork,
};
use crate::par::Jobs;
use crate::taxonomy::{SegmentClass, SegmentGroup};

pub const MODEL_SCHEMA_VERSION: &str = "betascript/model/1";

/// Routing key: a specific subgroup network, or the group-level pooled
/// network trained on every segment of the group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct NetworkKey {
    pub group: SegmentGroup,
    /// `None` marks the pooled fallback for the whole group.
    pub subgroup: Option<u8>,
}

impl NetworkKey {
    pub fn pooled(group: SegmentGroup) -> Self {
        NetworkKey {
            group,
            subgroup: None,
        }
    }

    pub fn id(&self) -> String {
        match self.subgroup {
            Some(id) => format!("{}/{id}", self.group.as_str()),
            None => self.group.as_str().to_string(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (group_str, sub) = match text.split_once('/') {
            Some((g, s)) => (g, Some(s)),
            None => (text, None),
        };
        let group = match group_str {
            "beginning" => SegmentGroup::Beginning,
            "middle" => SegmentGroup::Middle,
            "end" => SegmentGroup::End,
            "isolated" => SegmentGroup::Isolated,
            other => {
                return Err(Error::InvalidConfig {
                    detail: format!("unknown network group {other:?}"),
                })
            }
        };
        let subgroup = match sub {
            None => None,
            Some(s) => Some(s.parse::<u8>().map_err(|_| Error::InvalidConfig {
                detail: format!("bad subgroup id in network key {text:?}"),
            })?),
        };
        Ok(NetworkKey { group, subgroup })
    }
}

/// Training settings: architecture and schedule of the two autoencoders and
/// the softmax head, plus optimizer and routing knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub hidden1: usize,
    pub hidden2: usize,
    pub epochs1: usize,
    pub epochs2: usize,
    pub l2_weight1: f64,
    pub l2_weight2: f64,
    pub sparsity_weight1: f64,
    pub sparsity_weight2: f64,
    pub sparsity_proportion1: f64,
    pub sparsity_proportion2: f64,
    pub softmax_epochs: usize,
    pub fine_tune: bool,
    pub fine_tune_epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    /// Subgroups with fewer training segments than this fall back to the
    /// pooled per-group network.
    pub min_samples_per_subgroup: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            hidden1: 240,
            hidden2: 120,
            epochs1: 400,
            epochs2: 100,
            l2_weight1: 0.004,
            l2_weight2: 0.002,
            sparsity_weight1: 4.0,
            sparsity_weight2: 4.0,
            sparsity_proportion1: 0.15,
            sparsity_proportion2: 0.10,
            softmax_epochs: 400,
            fine_tune: true,
            fine_tune_epochs: 100,
            learning_rate: 0.5,
            momentum: 0.9,
            seed: 42,
            min_samples_per_subgroup: 50,
        }
    }
}

impl TrainingConfig {
    fn stack_config(&self) -> StackTrainConfig {
        StackTrainConfig {
            ae1: AutoencoderHyperparams {
                hidden: self.hidden1,
                max_epochs: self.epochs1,
                l2_weight: self.l2_weight1,
                sparsity_weight: self.sparsity_weight1,
                sparsity_proportion: self.sparsity_proportion1,
            },
            ae2: AutoencoderHyperparams {
                hidden: self.hidden2,
                max_epochs: self.epochs2,
                l2_weight: self.l2_weight2,
                sparsity_weight: self.sparsity_weight2,
                sparsity_proportion: self.sparsity_proportion2,
            },
            softmax_epochs: self.softmax_epochs,
            fine_tune_epochs: self.fine_tune_epochs,
            fine_tune: self.fine_tune,
            optimizer: OptimizerConfig {
                learning_rate: self.learning_rate,
                momentum: self.momentum,
            },
        }
    }
}

/// One training segment: flat feature values plus writer and routing labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSegment {
    pub writer_id: String,
    pub class: SegmentClass,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WriterModel {
    pub mode: FeatureMode,
    /// Enrolled writers in sorted order; positions are class indices and
    /// break score ties (lower index wins).
    pub writers: Vec<String>,
    pub scaler: MinMaxScaler,
    pub networks: BTreeMap<NetworkKey, SubgroupNetwork>,
    pub seed: u64,
}

impl WriterModel {
    pub fn writer_index(&self, id: &str) -> Option<usize> {
        self.writers.binary_search_by(|w| w.as_str().cmp(id)).ok()
    }

    /// Network for a segment class: its own subgroup net when trained,
    /// otherwise the group's pooled net.
    pub fn network_for(&self, class: SegmentClass) -> Option<&SubgroupNetwork> {
        self.networks
            .get(&NetworkKey {
                group: class.group,
                subgroup: Some(class.subgroup_id),
            })
            .or_else(|| self.networks.get(&NetworkKey::pooled(class.group)))
    }
}

/// Deterministic per-network seed: mixes the run seed with the routing key.
fn network_seed(base: u64, key: &NetworkKey) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325 ^ base.wrapping_mul(0x100000001b3);
    for b in key.id().bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Trains the full model: fits the scaler, selects subgroup networks with
/// enough data, always trains the pooled per-group fallbacks, and runs every
/// network's training (in parallel across networks when enabled).
pub fn train_model(
    segments: &[LabeledSegment],
    mode: FeatureMode,
    cfg: &TrainingConfig,
    jobs: Jobs,
) -> Result<WriterModel> {
    if segments.is_empty() {
        return Err(Error::NoEvidence);
    }
    let dim = mode.segment_len();
    for s in segments {
        if s.values.len() != dim {
            return Err(Error::ShapeMismatch {
                expected: dim,
                got: s.values.len(),
            });
        }
    }

    let mut writers: Vec<String> = segments.iter().map(|s| s.writer_id.clone()).collect();
    writers.sort();
    writers.dedup();

    let mut all = Mat::zeros(segments.len(), dim);
    for (i, s) in segments.iter().enumerate() {
        all.data[i * dim..(i + 1) * dim].copy_from_slice(&s.values);
    }
    let scaler = MinMaxScaler::fit(&all);

    // Bucket segment indices by routing key.
    let mut by_subgroup: BTreeMap<NetworkKey, Vec<usize>> = BTreeMap::new();
    let mut by_group: BTreeMap<NetworkKey, Vec<usize>> = BTreeMap::new();
    for (i, s) in segments.iter().enumerate() {
        by_subgroup
            .entry(NetworkKey {
                group: s.class.group,
                subgroup: Some(s.class.subgroup_id),
            })
            .or_default()
            .push(i);
        by_group
            .entry(NetworkKey::pooled(s.class.group))
            .or_default()
            .push(i);
    }
    let mut plan: Vec<(NetworkKey, Vec<usize>)> = Vec::new();
    for (key, idx) in by_group {
        if idx.len() >= 2 {
            plan.push((key, idx));
        }
    }
    for (key, idx) in by_subgroup {
        if idx.len() >= cfg.min_samples_per_subgroup.max(2) {
            plan.push((key, idx));
        }
    }

    let stack_cfg = cfg.stack_config();
    let trained: Vec<Result<(NetworkKey, SubgroupNetwork)>> =
        crate::par::map(jobs, &plan, |(key, idx)| {
            let mut data = Mat::zeros(idx.len(), dim);
            let mut labels = Vec::with_capacity(idx.len());
            for (r, &i) in idx.iter().enumerate() {
                let scaled = scaler.transform_row(&segments[i].values);
                data.data[r * dim..(r + 1) * dim].copy_from_slice(&scaled);
                labels.push(
                    writers
                        .binary_search(&segments[i].writer_id)
                        .expect("writer collected above"),
                );
            }
            let net = train_stack(
                &data,
                &labels,
                writers.len(),
                &stack_cfg,
                network_seed(cfg.seed, key),
            )?;
            Ok((*key, net))
        });

    let mut networks = BTreeMap::new();
    for item in trained {
        let (key, net) = item?;
        networks.insert(key, net);
    }

    Ok(WriterModel {
        mode,
        writers,
        scaler,
        networks,
        seed: cfg.seed,
    })
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// Rounds to 9 significant digits; the JSON then prints the shortest exact
/// representation of the rounded value.
fn round_sig9(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return 0.0_f64.copysign(v.max(0.0));
    }
    format!("{v:.8e}").parse().unwrap_or(v)
}

fn round_all(values: &[f64]) -> Vec<f64> {
    values.iter().map(|&v| round_sig9(v)).collect()
}

#[derive(Serialize, Deserialize)]
struct ScalerRecord {
    min: Vec<f64>,
    max: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetworkRecord {
    subgroup_id: String,
    input_dim: usize,
    hidden1: usize,
    hidden2: usize,
    outputs: usize,
    #[serde(rename = "W1")]
    w1: Vec<f64>,
    b1: Vec<f64>,
    #[serde(rename = "W2")]
    w2: Vec<f64>,
    b2: Vec<f64>,
    #[serde(rename = "W3")]
    w3: Vec<f64>,
    b3: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelRecord {
    version: u32,
    schema_version: String,
    tool_version: String,
    config_hash: String,
    seed: u64,
    mode: FeatureMode,
    writers: Vec<String>,
    scaler: ScalerRecord,
    networks: Vec<NetworkRecord>,
    /// Pipeline configuration used at training time, echoed so inference
    /// reproduces the exact feature extraction.
    config: serde_json::Value,
}

impl WriterModel {
    pub fn to_json(&self, config: serde_json::Value, config_hash: &str) -> String {
        let networks = self
            .networks
            .iter()
            .map(|(key, net)| NetworkRecord {
                subgroup_id: key.id(),
                input_dim: net.encoder1.in_dim(),
                hidden1: net.encoder1.out_dim(),
                hidden2: net.encoder2.out_dim(),
                outputs: net.output.out_dim(),
                w1: round_all(&net.encoder1.weights.data),
                b1: round_all(&net.encoder1.bias),
                w2: round_all(&net.encoder2.weights.data),
                b2: round_all(&net.encoder2.bias),
                w3: round_all(&net.output.weights.data),
                b3: round_all(&net.output.bias),
            })
            .collect();
        let record = ModelRecord {
            version: 1,
            schema_version: MODEL_SCHEMA_VERSION.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash.to_string(),
            seed: self.seed,
            mode: self.mode,
            writers: self.writers.clone(),
            scaler: ScalerRecord {
                min: round_all(&self.scaler.min),
                max: round_all(&self.scaler.max),
            },
            networks,
            config,
        };
        serde_json::to_string(&record).expect("model serialization")
    }

    pub fn save(&self, path: impl AsRef<Path>, config: serde_json::Value, config_hash: &str) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json(config, config_hash))
            .map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Loads a model plus the training-time pipeline config it embeds.
    pub fn load(path: impl AsRef<Path>) -> Result<(WriterModel, serde_json::Value)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn from_json(text: &str, origin: &str) -> Result<(WriterModel, serde_json::Value)> {
        let record: ModelRecord =
            serde_json::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
        if record.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                expected: MODEL_SCHEMA_VERSION.to_string(),
                found: record.schema_version,
            });
        }
        let mut networks = BTreeMap::new();
        for n in record.networks {
            let key = NetworkKey::parse(&n.subgroup_id)?;
            let expect = |name: &str, got: usize, want: usize| -> Result<()> {
                if got != want {
                    return Err(Error::Parse {
                        path: origin.to_string(),
                        detail: format!("network {}: {name} has {got} values, expected {want}", key.id()),
                    });
                }
                Ok(())
            };
            expect("W1", n.w1.len(), n.hidden1 * n.input_dim)?;
            expect("b1", n.b1.len(), n.hidden1)?;
            expect("W2", n.w2.len(), n.hidden2 * n.hidden1)?;
            expect("b2", n.b2.len(), n.hidden2)?;
            expect("W3", n.w3.len(), n.outputs * n.hidden2)?;
            expect("b3", n.b3.len(), n.outputs)?;
            let net = SubgroupNetwork {
                encoder1: DenseLayer {
                    weights: Mat {
                        rows: n.hidden1,
                        cols: n.input_dim,
                        data: n.w1,
                    },
                    bias: n.b1,
                    activation: Activation::LogisticSigmoid,
                },
                encoder2: DenseLayer {
                    weights: Mat {
                        rows: n.hidden2,
                        cols: n.hidden1,
                        data: n.w2,
                    },
                    bias: n.b2,
                    activation: Activation::LogisticSigmoid,
                },
                output: DenseLayer {
                    weights: Mat {
                        rows: n.outputs,
                        cols: n.hidden2,
                        data: n.w3,
                    },
                    bias: n.b3,
                    activation: Activation::Softmax,
                },
                training_log: Default::default(),
            };
            networks.insert(key, net);
        }
        Ok((
            WriterModel {
                mode: record.mode,
                writers: record.writers,
                scaler: MinMaxScaler {
                    min: record.scaler.min,
                    max: record.scaler.max,
                },
                networks,
                seed: record.seed,
            },
            record.config,
        ))
    }
}
