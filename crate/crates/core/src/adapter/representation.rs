use super::{ModelError, Side};
use crate::nn::Matrix;

/// Per-utterance encoder and decoder hidden-state stacks.
///
/// All encoder matrices are `m×d`, all decoder matrices `n×d`.
#[derive(Clone, Debug, PartialEq)]
pub struct LayeredRepresentation {
    pub utterance_id: String,
    dim: usize,
    encoder_layers: Vec<Matrix>,
    decoder_layers: Vec<Matrix>,
}

impl LayeredRepresentation {
    pub fn new(
        utterance_id: impl Into<String>,
        dim: usize,
        encoder_layers: Vec<Matrix>,
        decoder_layers: Vec<Matrix>,
    ) -> Result<Self, ModelError> {
        if encoder_layers.is_empty() {
            return Err(ModelError::Config("representation needs at least one encoder layer".into()));
        }
        for (side, layers) in [(Side::Encoder, &encoder_layers), (Side::Decoder, &decoder_layers)] {
            let steps = layers.first().map(Matrix::rows);
            for (l, m) in layers.iter().enumerate() {
                if m.cols() != dim {
                    return Err(ModelError::FeatureDim {
                        side,
                        layer: l,
                        expected: dim,
                        actual: m.cols(),
                    });
                }
                if Some(m.rows()) != steps {
                    return Err(ModelError::Config(format!(
                        "{side} layer {l} has {} steps, layer 0 has {}",
                        m.rows(),
                        steps.unwrap_or(0)
                    )));
                }
            }
        }
        Ok(Self {
            utterance_id: utterance_id.into(),
            dim,
            encoder_layers,
            decoder_layers,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn encoder_layers(&self) -> &[Matrix] {
        &self.encoder_layers
    }

    pub fn decoder_layers(&self) -> &[Matrix] {
        &self.decoder_layers
    }

    pub fn layers(&self, side: Side) -> &[Matrix] {
        match side {
            Side::Encoder => &self.encoder_layers,
            Side::Decoder => &self.decoder_layers,
        }
    }

    #[cfg(test)]
    pub(crate) fn layers_mut(&mut self, side: Side) -> &mut [Matrix] {
        match side {
            Side::Encoder => &mut self.encoder_layers,
            Side::Decoder => &mut self.decoder_layers,
        }
    }

    /// Encoder sequence length `m`.
    pub fn encoder_steps(&self) -> usize {
        self.encoder_layers[0].rows()
    }

    /// Decoder sequence length `n` (0 when there is no decoder stack).
    pub fn decoder_steps(&self) -> usize {
        self.decoder_layers.first().map_or(0, Matrix::rows)
    }
}
