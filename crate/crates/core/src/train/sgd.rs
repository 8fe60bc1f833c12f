use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainConfig;
use super::gradient::GradientBuffer;
use crate::error::Result;
use crate::model::{ModelConfig, ModelParams};

/// Random initialization: embeddings and main weights i.i.d. uniform in
/// `[-init_scale, init_scale]`, interaction weights uniform in
/// `[-interaction_init, interaction_init]`, biases zero. All draws come from
/// one ChaCha8 stream in tensor order.
pub fn init_params(config: &ModelConfig, train: &TrainConfig) -> Result<ModelParams> {
    train.validate()?;
    let mut params = ModelParams::zeros(config.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed);
    let mut fill = |values: &mut [f64], scale: f64| {
        if scale > 0.0 {
            let dist = Uniform::new_inclusive(-scale, scale).expect("finite positive scale");
            for v in values {
                *v = dist.sample(&mut rng);
            }
        }
    };
    fill(&mut params.embeddings, train.init_scale);
    fill(&mut params.main_weights, train.init_scale);
    fill(&mut params.interactions, train.interaction_init);
    Ok(params)
}

/// `theta <- theta - eta * grad` on the entries the gradient touched.
pub fn sgd_step(params: &mut ModelParams, grads: &GradientBuffer, train: &TrainConfig) -> Result<()> {
    grads.check_shape(params)?;
    let eta = train.learning_rate;
    let k = params.embed_dim();
    let main_len = params.config.input_fields() * k;
    let inter_len = params.interactions.len() / params.bias.len();
    for slot in 0..params.bias.len() {
        if !grads.slot_touched(slot) {
            continue;
        }
        params.bias[slot] -= eta * grads.bias[slot];
        let range = slot * main_len..(slot + 1) * main_len;
        for (w, g) in params.main_weights[range.clone()]
            .iter_mut()
            .zip(&grads.main_weights[range])
        {
            *w -= eta * g;
        }
        let range = slot * inter_len..(slot + 1) * inter_len;
        for (r, g) in params.interactions[range.clone()]
            .iter_mut()
            .zip(&grads.interactions[range])
        {
            *r -= eta * g;
        }
    }
    if !train.freeze_embeddings {
        for &row in grads.touched_rows() {
            let g = grads.embedding(row).expect("touched row has a gradient");
            for (v, g) in params.embedding_mut(row as usize).iter_mut().zip(g) {
                *v -= eta * g;
            }
        }
    }
    Ok(())
}
