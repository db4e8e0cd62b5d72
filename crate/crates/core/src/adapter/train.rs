use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{loss_and_gradients, LayeredRepresentation, Model, ModelError};
use crate::nn::params::add_scaled;
use crate::nn::{adam_step, AdamState, Mode};

/// Mean loss and mean gradient over `batch`.
///
/// Each utterance gets its own dropout stream seeded from `rng` in batch
/// order, and per-utterance gradients are summed in batch order, so the
/// result does not depend on how many worker threads run the items.
pub fn batch_gradients<R: Rng + ?Sized>(
    batch: &[(&LayeredRepresentation, usize)],
    model: &Model,
    mode: Mode,
    rng: &mut R,
) -> Result<(f64, Model), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let seeds: Vec<u64> = batch.iter().map(|_| rng.next_u64()).collect();
    let per_item: Vec<Result<(f64, Model), ModelError>> = batch
        .par_iter()
        .zip(seeds.par_iter())
        .map(|(&(rep, label), &seed)| {
            let mut grads = model.zeros_like();
            let mut item_rng = ChaCha8Rng::seed_from_u64(seed);
            let loss = loss_and_gradients(rep, label, model, &mut grads, mode, &mut item_rng)?;
            Ok((loss, grads))
        })
        .collect();

    let scale = 1.0 / batch.len() as f64;
    let mut total = model.zeros_like();
    let mut loss = 0.0;
    for item in per_item {
        let (l, g) = item?;
        loss += l;
        add_scaled(&mut total, &g, scale);
    }
    Ok((loss * scale, total))
}

/// One Adam update from the mean cross-entropy over `batch`. Returns the
/// pre-update mean loss.
pub fn train_step<R: Rng + ?Sized>(
    batch: &[(&LayeredRepresentation, usize)],
    model: &mut Model,
    adam: &mut AdamState,
    rng: &mut R,
) -> Result<f64, ModelError> {
    let (loss, grads) = batch_gradients(batch, model, Mode::Train, rng)?;
    adam_step(model, &grads, adam)?;
    Ok(loss)
}
