//! The consensus network: one encoder ("ePhysician") per modality, a modality
//! discriminator that sees one representation at a time, and a diagnosis
//! classifier that sees the concatenation of all real-modality representations.

mod checkpoint;
mod noise;
mod partition;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use noise::{sample_noise, NoiseStats};
pub use partition::{ModalityGroup, ModalityPartition};

use rand::Rng;

use crate::nn::{argmax, softmax, softmax_cross_entropy, LayerHyper, Matrix, Mlp, Mode, Param};
use crate::{Error, Result};

/// Discriminator class reserved for the noise modality. Real modality `m`
/// (0-based group position) is class `m + 1` when noise is enabled, `m` otherwise.
pub const NOISE_CLASS: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    /// Hidden width of every ePhysician.
    pub hidden_dim: usize,
    /// Width of each representation vector.
    pub representation_dim: usize,
    /// Optional hidden layer in the classifier; 0 means a single dense layer.
    pub classifier_hidden: usize,
    pub layers: LayerHyper,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 10,
            representation_dim: 10,
            classifier_hidden: 0,
            layers: LayerHyper::default(),
        }
    }
}

/// Output of a discriminator forward/backward pass.
#[derive(Debug, Clone)]
pub struct DiscriminatorPass {
    pub loss: f64,
    /// Gradient of the loss w.r.t. each real modality's representation.
    pub d_reps: Vec<Matrix>,
}

#[derive(Debug, Clone)]
pub struct ClassifierPass {
    pub loss: f64,
    pub d_reps: Vec<Matrix>,
}

#[derive(Debug, Clone)]
pub struct ConsensusModel {
    partition: ModalityPartition,
    config: ModelConfig,
    noise_enabled: bool,
    num_classes: usize,
    ephysicians: Vec<Mlp>,
    discriminator: Mlp,
    classifier: Mlp,
}

impl ConsensusModel {
    /// Initializes ePhysicians in group order, then the discriminator, then the
    /// classifier, all drawing from `rng`.
    pub fn new<R: Rng + ?Sized>(
        partition: ModalityPartition,
        config: ModelConfig,
        num_classes: usize,
        noise_enabled: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {num_classes}")));
        }
        let r = config.representation_dim;
        let ephysicians = partition
            .group_dims()
            .into_iter()
            .map(|d| Mlp::feedforward(d, &[config.hidden_dim], r, config.layers, rng))
            .collect::<Result<Vec<_>>>()?;
        let m = partition.num_modalities();
        let disc_classes = if noise_enabled { m + 1 } else { m };
        let discriminator = Mlp::feedforward(r, &[], disc_classes, config.layers, rng)?;
        let classifier_hidden: &[usize] = if config.classifier_hidden > 0 {
            &[config.classifier_hidden]
        } else {
            &[]
        };
        let classifier = Mlp::feedforward(m * r, classifier_hidden, num_classes, config.layers, rng)?;
        Ok(Self {
            partition,
            config,
            noise_enabled,
            num_classes,
            ephysicians,
            discriminator,
            classifier,
        })
    }

    pub(crate) fn from_parts(
        partition: ModalityPartition,
        config: ModelConfig,
        num_classes: usize,
        noise_enabled: bool,
        ephysicians: Vec<Mlp>,
        discriminator: Mlp,
        classifier: Mlp,
    ) -> Self {
        Self {
            partition,
            config,
            noise_enabled,
            num_classes,
            ephysicians,
            discriminator,
            classifier,
        }
    }

    pub fn partition(&self) -> &ModalityPartition {
        &self.partition
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn noise_enabled(&self) -> bool {
        self.noise_enabled
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_modalities(&self) -> usize {
        self.partition.num_modalities()
    }

    pub fn discriminator_classes(&self) -> usize {
        self.discriminator.out_dim()
    }

    pub fn ephysicians(&self) -> &[Mlp] {
        &self.ephysicians
    }

    pub fn ephysicians_mut(&mut self) -> &mut [Mlp] {
        &mut self.ephysicians
    }

    pub fn discriminator(&self) -> &Mlp {
        &self.discriminator
    }

    pub fn discriminator_mut(&mut self) -> &mut Mlp {
        &mut self.discriminator
    }

    pub fn classifier(&self) -> &Mlp {
        &self.classifier
    }

    pub fn classifier_mut(&mut self) -> &mut Mlp {
        &mut self.classifier
    }

    /// Discriminator target for real modality `m` (0-based).
    pub fn modality_class(&self, m: usize) -> usize {
        if self.noise_enabled {
            m + 1
        } else {
            m
        }
    }

    pub fn set_mode(&mut self, mode: Mode) {
        for e in &mut self.ephysicians {
            e.set_mode(mode);
        }
        self.discriminator.set_mode(mode);
        self.classifier.set_mode(mode);
    }

    pub fn zero_grad(&mut self) {
        for e in &mut self.ephysicians {
            e.zero_grad();
        }
        self.discriminator.zero_grad();
        self.classifier.zero_grad();
    }

    pub fn ephysician_params_mut(&mut self) -> Vec<&mut Param> {
        self.ephysicians.iter_mut().flat_map(|e| e.params_mut()).collect()
    }

    /// Every trainable tensor: ePhysicians, then discriminator, then classifier.
    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut params: Vec<&mut Param> = self.ephysicians.iter_mut().flat_map(|e| e.params_mut()).collect();
        params.extend(self.discriminator.params_mut());
        params.extend(self.classifier.params_mut());
        params
    }

    /// Classifier parameters followed, when `with_ephysicians`, by the
    /// ePhysician parameters.
    pub fn classification_params_mut(&mut self, with_ephysicians: bool) -> Vec<&mut Param> {
        let mut params = self.classifier.params_mut();
        if with_ephysicians {
            params.extend(self.ephysicians.iter_mut().flat_map(|e| e.params_mut()));
        }
        params
    }

    pub fn ephysician_params(&self) -> Vec<&Param> {
        self.ephysicians.iter().flat_map(|e| e.params()).collect()
    }

    pub fn ephysician_fingerprint(&self) -> u64 {
        crate::nn::fingerprint(self.ephysician_params())
    }

    pub fn discriminator_fingerprint(&self) -> u64 {
        self.discriminator.fingerprint()
    }

    pub fn classifier_fingerprint(&self) -> u64 {
        self.classifier.fingerprint()
    }

    /// `i_m = f_m(x_m)` for every modality, using each layer's current mode.
    pub fn encode_all(&mut self, x: &Matrix) -> Result<Vec<Matrix>> {
        let parts = self.partition.split_batch(x)?;
        self.ephysicians
            .iter_mut()
            .zip(&parts)
            .map(|(e, xm)| e.forward(xm))
            .collect()
    }

    /// Inference-mode encoding that leaves all layer state untouched.
    pub fn encode_all_infer(&self, x: &Matrix) -> Result<Vec<Matrix>> {
        let parts = self.partition.split_batch(x)?;
        self.ephysicians
            .iter()
            .zip(&parts)
            .map(|(e, xm)| e.infer(xm))
            .collect()
    }

    /// Cross-entropy of the discriminator predicting each representation's
    /// source, averaged uniformly over modalities (noise included when enabled)
    /// and samples. Accumulates discriminator gradients and returns the
    /// gradients w.r.t. the real representations. Noise rows are constants.
    pub fn discriminator_pass(
        &mut self,
        reps: &[Matrix],
        noise: Option<&Matrix>,
    ) -> Result<DiscriminatorPass> {
        if reps.len() != self.num_modalities() {
            return Err(Error::dim("discriminator_loss", self.num_modalities(), reps.len()));
        }
        match (self.noise_enabled, noise) {
            (true, None) => {
                return Err(Error::Contract("noise modality enabled but no noise supplied".into()))
            }
            (false, Some(_)) => {
                return Err(Error::Contract("noise supplied but noise modality disabled".into()))
            }
            _ => {}
        }
        let b = reps[0].rows();
        let mut blocks: Vec<&Matrix> = Vec::with_capacity(reps.len() + 1);
        let mut labels = Vec::with_capacity(b * (reps.len() + 1));
        if let Some(n) = noise {
            if n.rows() != b {
                return Err(Error::dim("noise rows", b, n.rows()));
            }
            blocks.push(n);
            labels.extend(std::iter::repeat_n(NOISE_CLASS, b));
        }
        for (m, rep) in reps.iter().enumerate() {
            blocks.push(rep);
            labels.extend(std::iter::repeat_n(self.modality_class(m), b));
        }
        let stacked = Matrix::vstack(&blocks)?;
        let logits = self.discriminator.forward(&stacked)?;
        let (loss, d_logits) = softmax_cross_entropy(&logits, &labels)?;
        let d_in = self.discriminator.backward(&d_logits)?;
        let mut heights = vec![b; blocks.len()];
        heights[0] = blocks[0].rows();
        let mut d_blocks = d_in.split_rows(&heights)?;
        if noise.is_some() {
            d_blocks.remove(0);
        }
        Ok(DiscriminatorPass {
            loss,
            d_reps: d_blocks,
        })
    }

    /// Classifier cross-entropy on the concatenated real representations.
    /// Accumulates classifier gradients and returns the per-modality
    /// representation gradients.
    pub fn classifier_pass(&mut self, reps: &[Matrix], labels: &[usize]) -> Result<ClassifierPass> {
        if reps.len() != self.num_modalities() {
            return Err(Error::dim("classifier_loss", self.num_modalities(), reps.len()));
        }
        let refs: Vec<&Matrix> = reps.iter().collect();
        let joined = Matrix::hstack(&refs)?;
        let logits = self.classifier.forward(&joined)?;
        let (loss, d_logits) = softmax_cross_entropy(&logits, labels)?;
        let d_joined = self.classifier.backward(&d_logits)?;
        let widths: Vec<usize> = reps.iter().map(Matrix::cols).collect();
        Ok(ClassifierPass {
            loss,
            d_reps: d_joined.split_cols(&widths)?,
        })
    }

    /// Backpropagates representation gradients into the ePhysicians.
    pub fn backward_ephysicians(&mut self, d_reps: &[Matrix]) -> Result<()> {
        if d_reps.len() != self.ephysicians.len() {
            return Err(Error::dim("backward_ephysicians", self.ephysicians.len(), d_reps.len()));
        }
        for (e, d) in self.ephysicians.iter_mut().zip(d_reps) {
            e.backward(d)?;
        }
        Ok(())
    }

    /// Zeroes gradients, then computes `L_C` and its gradients: always for the
    /// classifier, and for the ePhysicians only when `cooperative`.
    pub fn classifier_loss(&mut self, x: &Matrix, labels: &[usize], cooperative: bool) -> Result<f64> {
        self.zero_grad();
        let reps = self.encode_all(x)?;
        let pass = self.classifier_pass(&reps, labels)?;
        if cooperative {
            self.backward_ephysicians(&pass.d_reps)?;
        }
        Ok(pass.loss)
    }

    /// Zeroes gradients, then computes `L_D` and its gradients w.r.t. the
    /// discriminator and the ePhysicians. `noise` is treated as a constant.
    pub fn discriminator_loss(&mut self, x: &Matrix, noise: Option<&Matrix>) -> Result<f64> {
        self.zero_grad();
        let reps = self.encode_all(x)?;
        let pass = self.discriminator_pass(&reps, noise)?;
        self.backward_ephysicians(&pass.d_reps)?;
        Ok(pass.loss)
    }

    /// Classifier logits in inference mode.
    pub fn classifier_logits(&self, x: &Matrix) -> Result<Matrix> {
        let reps = self.encode_all_infer(x)?;
        let refs: Vec<&Matrix> = reps.iter().collect();
        self.classifier.infer(&Matrix::hstack(&refs)?)
    }

    /// `P(y = l | x)` for every row, in inference mode.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        Ok(softmax(&self.classifier_logits(x)?))
    }

    /// Most probable class per row; ties go to the lowest class index.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let logits = self.classifier_logits(x)?;
        Ok(logits.iter_rows().map(argmax).collect())
    }

    /// Discriminator probabilities `P(m = k | i)` for a batch of representations.
    pub fn discriminator_proba(&self, reps: &Matrix) -> Result<Matrix> {
        Ok(softmax(&self.discriminator.infer(reps)?))
    }
}
