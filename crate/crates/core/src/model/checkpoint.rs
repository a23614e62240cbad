//! Plain-text checkpoint format.
//!
//! ```text
//! consensus-checkpoint 1
//! config <key> <value>                 (hidden_dim, representation_dim, classifier_hidden,
//!                                       num_classes, noise, leaky_slope, bn_epsilon, bn_momentum)
//! group <count> <index>... <name>      (one per modality, in order; name is the rest of the line)
//! tensor <name> <rows> <cols> <value>...
//! end
//! ```
//!
//! Tensor names are `ephysician.<m>.<layer>.<field>`, `discriminator.<layer>.<field>`,
//! `classifier.<layer>.<field>` and, optionally, `scaler.mean` / `scaler.std`.
//! Values are written in shortest round-trip exponent form, so a save/load
//! cycle reproduces every `f64` bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ConsensusModel, ModalityGroup, ModalityPartition, ModelConfig};
use crate::data::ZScaler;
use crate::nn::{LayerHyper, Mlp};
use crate::{Error, Result};

const MAGIC: &str = "consensus-checkpoint 1";

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: ConsensusModel,
    pub scaler: Option<ZScaler>,
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let m = &self.model;
        let c = m.config();
        let mut out = String::new();
        writeln!(out, "{MAGIC}").unwrap();
        let cfg: [(&str, String); 8] = [
            ("hidden_dim", c.hidden_dim.to_string()),
            ("representation_dim", c.representation_dim.to_string()),
            ("classifier_hidden", c.classifier_hidden.to_string()),
            ("num_classes", m.num_classes().to_string()),
            ("noise", u8::from(m.noise_enabled()).to_string()),
            ("leaky_slope", format!("{:e}", c.layers.leaky_slope)),
            ("bn_epsilon", format!("{:e}", c.layers.bn_epsilon)),
            ("bn_momentum", format!("{:e}", c.layers.bn_momentum)),
        ];
        for (k, v) in cfg {
            writeln!(out, "config {k} {v}").unwrap();
        }
        for g in m.partition().groups() {
            write!(out, "group {}", g.indices.len()).unwrap();
            for i in &g.indices {
                write!(out, " {i}").unwrap();
            }
            writeln!(out, " {}", g.name).unwrap();
        }
        let mut write_tensor = |name: String, (rows, cols): (usize, usize), values: &[f64]| {
            write!(out, "tensor {name} {rows} {cols}").unwrap();
            for v in values {
                write!(out, " {v:e}").unwrap();
            }
            out.push('\n');
        };
        for (k, e) in m.ephysicians().iter().enumerate() {
            for (name, shape, values) in e.named_tensors() {
                write_tensor(format!("ephysician.{k}.{name}"), shape, &values);
            }
        }
        for (name, shape, values) in m.discriminator().named_tensors() {
            write_tensor(format!("discriminator.{name}"), shape, &values);
        }
        for (name, shape, values) in m.classifier().named_tensors() {
            write_tensor(format!("classifier.{name}"), shape, &values);
        }
        if let Some(s) = &self.scaler {
            write_tensor("scaler.mean".into(), (1, s.mean.len()), &s.mean);
            write_tensor("scaler.std".into(), (1, s.std.len()), &s.std);
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, l)) if l.trim() == MAGIC => {}
            _ => return Err(parse_err(1, "missing checkpoint header")),
        }
        let mut config = BTreeMap::new();
        let mut groups = Vec::new();
        let mut tensors: BTreeMap<String, (usize, usize, Vec<f64>)> = BTreeMap::new();
        let mut ended = false;
        for (row, line) in lines {
            let mut tok = line.split_whitespace();
            match tok.next() {
                Some("config") => {
                    let key = tok.next().ok_or_else(|| parse_err(row, "config key missing"))?;
                    let val = tok.next().ok_or_else(|| parse_err(row, "config value missing"))?;
                    config.insert(key.to_string(), val.to_string());
                }
                Some("group") => {
                    let count: usize = parse_tok(tok.next(), row)?;
                    let indices = (0..count)
                        .map(|_| parse_tok(tok.next(), row))
                        .collect::<Result<Vec<usize>>>()?;
                    let name = tok.collect::<Vec<_>>().join(" ");
                    groups.push(ModalityGroup { name, indices });
                }
                Some("tensor") => {
                    let name = tok.next().ok_or_else(|| parse_err(row, "tensor name missing"))?;
                    let rows: usize = parse_tok(tok.next(), row)?;
                    let cols: usize = parse_tok(tok.next(), row)?;
                    let values = tok.map(|t| parse_tok(Some(t), row)).collect::<Result<Vec<f64>>>()?;
                    if values.len() != rows * cols {
                        return Err(parse_err(row, &format!("tensor {name} has {} values, expected {}", values.len(), rows * cols)));
                    }
                    tensors.insert(name.to_string(), (rows, cols, values));
                }
                Some("end") => {
                    ended = true;
                    break;
                }
                None => {}
                Some(other) => return Err(parse_err(row, &format!("unknown record '{other}'"))),
            }
        }
        if !ended {
            return Err(parse_err(0, "checkpoint truncated (no end marker)"));
        }

        let get = |k: &str| -> Result<&str> {
            config
                .get(k)
                .map(String::as_str)
                .ok_or_else(|| parse_err(0, &format!("config '{k}' missing")))
        };
        let num = |k: &str| -> Result<usize> { parse_tok(Some(get(k)?), 0) };
        let float = |k: &str| -> Result<f64> { parse_tok(Some(get(k)?), 0) };
        let model_config = ModelConfig {
            hidden_dim: num("hidden_dim")?,
            representation_dim: num("representation_dim")?,
            classifier_hidden: num("classifier_hidden")?,
            layers: LayerHyper {
                leaky_slope: float("leaky_slope")?,
                bn_epsilon: float("bn_epsilon")?,
                bn_momentum: float("bn_momentum")?,
            },
        };
        let num_classes = num("num_classes")?;
        let noise = num("noise")? != 0;
        let total = groups.iter().map(|g| g.indices.len()).sum();
        let partition = ModalityPartition::new(groups, total)?;

        // Build the architecture, then overwrite every tensor by name.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = ConsensusModel::new(partition, model_config, num_classes, noise, &mut rng)?;
        let mut fill = |prefix: String, mlp: &mut Mlp| -> Result<()> {
            for (name, slot) in mlp.named_tensors_mut() {
                let full = format!("{prefix}.{name}");
                let (_, _, values) = tensors
                    .remove(&full)
                    .ok_or_else(|| parse_err(0, &format!("tensor '{full}' missing")))?;
                if values.len() != slot.len() {
                    return Err(parse_err(0, &format!("tensor '{full}' has the wrong size")));
                }
                *slot = values;
            }
            Ok(())
        };
        let ephysicians = model
            .ephysicians()
            .iter()
            .cloned()
            .enumerate()
            .map(|(k, mut e)| fill(format!("ephysician.{k}"), &mut e).map(|_| e))
            .collect::<Result<Vec<_>>>()?;
        let mut discriminator = model.discriminator().clone();
        fill("discriminator".into(), &mut discriminator)?;
        let mut classifier = model.classifier().clone();
        fill("classifier".into(), &mut classifier)?;
        model = ConsensusModel::from_parts(
            model.partition().clone(),
            model_config,
            num_classes,
            noise,
            ephysicians,
            discriminator,
            classifier,
        );

        let scaler = match (tensors.remove("scaler.mean"), tensors.remove("scaler.std")) {
            (Some((_, _, mean)), Some((_, _, std))) => Some(ZScaler { mean, std }),
            (None, None) => None,
            _ => return Err(parse_err(0, "scaler needs both mean and std")),
        };
        if let Some(extra) = tensors.keys().next() {
            return Err(parse_err(0, &format!("unexpected tensor '{extra}'")));
        }
        Ok(Self { model, scaler })
    }
}

fn parse_err(row: usize, message: &str) -> Error {
    Error::Parse {
        row,
        message: message.to_string(),
    }
}

fn parse_tok<T: std::str::FromStr>(tok: Option<&str>, row: usize) -> Result<T> {
    let t = tok.ok_or_else(|| parse_err(row, "unexpected end of line"))?;
    t.parse()
        .map_err(|_| parse_err(row, &format!("cannot parse '{t}'")))
}

pub fn write_checkpoint(path: impl AsRef<Path>, checkpoint: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, checkpoint.to_text()).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_text(&text)
}
