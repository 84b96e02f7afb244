//! Shared-encoder actor-critic network.
//!
//! The encoder maps the reconstruction through three conv blocks
//! (conv3x3 -> group norm -> leaky ReLU -> max pool, channels 1->8->16->32),
//! the flattened code is concatenated with the 180-entry angle vector, and
//! two separate dense heads produce the action distribution and the state
//! value.

use crate::error::{Error, Result};
use crate::image::Image;
use crate::nn::{
    adam_step, conv2d, conv2d_backward, dense, dense_backward, group_norm, group_norm_backward,
    leaky_relu, leaky_relu_backward, max_pool2, max_pool2_backward, softmax, AdamState,
    GroupNormCache, PoolCache, Tensor, LEAKY_SLOPE,
};
use crate::projector::ANGLE_COUNT;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const CHANNELS: [usize; 4] = [1, 8, 16, 32];
pub const NORM_GROUPS: usize = 4;
pub const HIDDEN_WIDTH: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock {
    pub kernels: Tensor,
    pub bias: Tensor,
    pub gamma: Tensor,
    pub beta: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

/// All network weights. Gradients reuse the same structure.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentParams {
    pub image_size: usize,
    pub blocks: Vec<ConvBlock>,
    pub actor: HeadParams,
    pub critic: HeadParams,
}

impl AgentParams {
    /// Flattened encoder output length for this image size.
    pub fn code_len(image_size: usize) -> usize {
        let side = image_size / 8;
        side * side * CHANNELS[3]
    }

    /// Seeded init: Kaiming-uniform conv/dense weights, zero biases,
    /// gamma 1 / beta 0.
    pub fn init(image_size: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if image_size % 8 != 0 || image_size == 0 {
            return Err(Error::Config(format!(
                "image size {image_size} must be a positive multiple of 8"
            )));
        }
        let mut blocks = Vec::with_capacity(3);
        for i in 0..3 {
            let (c_in, c_out) = (CHANNELS[i], CHANNELS[i + 1]);
            blocks.push(ConvBlock {
                kernels: Tensor::kaiming_uniform(&[c_out, c_in, 3, 3], c_in * 9, rng),
                bias: Tensor::zeros(&[c_out]),
                gamma: Tensor::filled(&[c_out], 1.0),
                beta: Tensor::zeros(&[c_out]),
            });
        }
        let in_len = Self::code_len(image_size) + ANGLE_COUNT;
        let head = |out: usize, rng: &mut ChaCha8Rng| {
            // small final layer keeps the initial policy near uniform and
            // the initial value estimate near zero
            let mut w2 = Tensor::kaiming_uniform(&[out, HIDDEN_WIDTH], HIDDEN_WIDTH, rng);
            for v in &mut w2.data {
                *v *= 0.1;
            }
            HeadParams {
                w1: Tensor::kaiming_uniform(&[HIDDEN_WIDTH, in_len], in_len, rng),
                b1: Tensor::zeros(&[HIDDEN_WIDTH]),
                w2,
                b2: Tensor::zeros(&[out]),
            }
        };
        let actor = head(ANGLE_COUNT, rng);
        let critic = head(1, rng);
        Ok(AgentParams {
            image_size,
            blocks,
            actor,
            critic,
        })
    }

    pub fn zeros_like(&self) -> Self {
        let blocks = self
            .blocks
            .iter()
            .map(|b| ConvBlock {
                kernels: Tensor::zeros(&b.kernels.shape),
                bias: Tensor::zeros(&b.bias.shape),
                gamma: Tensor::zeros(&b.gamma.shape),
                beta: Tensor::zeros(&b.beta.shape),
            })
            .collect();
        let z = |h: &HeadParams| HeadParams {
            w1: Tensor::zeros(&h.w1.shape),
            b1: Tensor::zeros(&h.b1.shape),
            w2: Tensor::zeros(&h.w2.shape),
            b2: Tensor::zeros(&h.b2.shape),
        };
        AgentParams {
            image_size: self.image_size,
            blocks,
            actor: z(&self.actor),
            critic: z(&self.critic),
        }
    }

    /// Stable (name, tensor) listing used by the optimizer and checkpoints.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("encoder.{i}.kernels"), &b.kernels));
            out.push((format!("encoder.{i}.bias"), &b.bias));
            out.push((format!("encoder.{i}.gamma"), &b.gamma));
            out.push((format!("encoder.{i}.beta"), &b.beta));
        }
        for (name, h) in [("actor", &self.actor), ("critic", &self.critic)] {
            out.push((format!("{name}.w1"), &h.w1));
            out.push((format!("{name}.b1"), &h.b1));
            out.push((format!("{name}.w2"), &h.w2));
            out.push((format!("{name}.b2"), &h.b2));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::new();
        for b in self.blocks.iter_mut() {
            out.push(&mut b.kernels);
            out.push(&mut b.bias);
            out.push(&mut b.gamma);
            out.push(&mut b.beta);
        }
        for h in [&mut self.actor, &mut self.critic] {
            out.push(&mut h.w1);
            out.push(&mut h.b1);
            out.push(&mut h.w2);
            out.push(&mut h.b2);
        }
        out
    }
}

/// One Adam state per parameter tensor, aligned with
/// [`AgentParams::named_tensors`] order. The shared encoder tensors get a
/// single state each and receive the summed actor+critic gradient stream.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentOptimizer {
    pub states: Vec<AdamState>,
}

impl AgentOptimizer {
    pub fn new(params: &AgentParams, lr: f64, weight_decay: f64) -> Self {
        let states = params
            .named_tensors()
            .iter()
            .map(|(_, t)| AdamState::new(t.len(), lr, weight_decay))
            .collect();
        AgentOptimizer { states }
    }

    pub fn apply(&mut self, params: &mut AgentParams, grads: &AgentParams) {
        let gtensors: Vec<&Tensor> = grads.named_tensors().into_iter().map(|(_, t)| t).collect();
        for ((p, g), st) in params
            .tensors_mut()
            .into_iter()
            .zip(gtensors)
            .zip(self.states.iter_mut())
        {
            adam_step(p, g, st);
        }
    }
}

struct BlockCache {
    input: Tensor,
    gn_cache: GroupNormCache,
    gn_out: Tensor,
    pool_cache: PoolCache,
}

/// Activations retained from one forward pass for the backward pass.
pub struct ForwardCache {
    blocks: Vec<BlockCache>,
    cat: Tensor,
    actor_h_pre: Tensor,
    actor_h: Tensor,
    critic_h_pre: Tensor,
    critic_h: Tensor,
    pub logits: Tensor,
    pub probs: Tensor,
    pub value: f64,
}

fn encode_with_cache(params: &AgentParams, recon: &Image) -> Result<(Tensor, Vec<BlockCache>)> {
    if recon.size() != params.image_size {
        return Err(Error::Domain(format!(
            "reconstruction size {} does not match agent size {}",
            recon.size(),
            params.image_size
        )));
    }
    let mut x = Tensor::from_vec(
        &[1, recon.size(), recon.size()],
        recon.pixels().to_vec(),
    );
    let mut caches = Vec::with_capacity(3);
    for b in &params.blocks {
        let conv_out = conv2d(&x, &b.kernels, &b.bias)?;
        let (gn_out, gn_cache) = group_norm(&conv_out, NORM_GROUPS, &b.gamma, &b.beta)?;
        let act = leaky_relu(&gn_out, LEAKY_SLOPE);
        let (pooled, pool_cache) = max_pool2(&act)?;
        caches.push(BlockCache {
            input: x,
            gn_cache,
            gn_out,
            pool_cache,
        });
        x = pooled;
    }
    Ok((x, caches))
}

/// Encoder output (flattened bottleneck code) for a reconstruction.
pub fn encode(params: &AgentParams, recon: &Image) -> Result<Tensor> {
    let (code, _) = encode_with_cache(params, recon)?;
    Ok(Tensor::from_vec(&[code.len()], code.data))
}

/// Full forward pass producing the action distribution, state value, and
/// the cache needed for the backward pass.
pub fn forward(params: &AgentParams, recon: &Image, angle_vec: &[f64]) -> Result<ForwardCache> {
    if angle_vec.len() != ANGLE_COUNT {
        return Err(Error::Domain("angle vector must have 180 entries".into()));
    }
    let (code, blocks) = encode_with_cache(params, recon)?;
    let mut cat_data = code.data;
    cat_data.extend_from_slice(angle_vec);
    let cat = Tensor::from_vec(&[cat_data.len()], cat_data);

    let actor_h_pre = dense(&cat, &params.actor.w1, &params.actor.b1)?;
    let actor_h = leaky_relu(&actor_h_pre, LEAKY_SLOPE);
    let logits = dense(&actor_h, &params.actor.w2, &params.actor.b2)?;
    let probs = softmax(&logits);

    let critic_h_pre = dense(&cat, &params.critic.w1, &params.critic.b1)?;
    let critic_h = leaky_relu(&critic_h_pre, LEAKY_SLOPE);
    let value_t = dense(&critic_h, &params.critic.w2, &params.critic.b2)?;
    let value = value_t.data[0];

    Ok(ForwardCache {
        blocks,
        cat,
        actor_h_pre,
        actor_h,
        critic_h_pre,
        critic_h,
        logits,
        probs,
        value,
    })
}

/// Action probabilities for a belief state.
pub fn actor_forward(params: &AgentParams, recon: &Image, angle_vec: &[f64]) -> Result<Vec<f64>> {
    Ok(forward(params, recon, angle_vec)?.probs.data)
}

/// State-value estimate for a belief state.
pub fn critic_forward(params: &AgentParams, recon: &Image, angle_vec: &[f64]) -> Result<f64> {
    Ok(forward(params, recon, angle_vec)?.value)
}

/// Backward pass: given loss gradients w.r.t. the actor logits and the
/// critic value, produce gradients for every parameter tensor. The encoder
/// receives the sum of both streams.
pub fn backward(
    params: &AgentParams,
    cache: &ForwardCache,
    d_logits: &[f64],
    d_value: f64,
) -> AgentParams {
    let mut grads = params.zeros_like();

    // actor head
    let d_logits_t = Tensor::from_vec(&[ANGLE_COUNT], d_logits.to_vec());
    let (d_actor_h, g_aw2, g_ab2) = dense_backward(&cache.actor_h, &params.actor.w2, &d_logits_t);
    let d_actor_pre = leaky_relu_backward(&cache.actor_h_pre, LEAKY_SLOPE, &d_actor_h);
    let (d_cat_a, g_aw1, g_ab1) = dense_backward(&cache.cat, &params.actor.w1, &d_actor_pre);
    grads.actor = HeadParams {
        w1: g_aw1,
        b1: g_ab1,
        w2: g_aw2,
        b2: g_ab2,
    };

    // critic head
    let d_value_t = Tensor::from_vec(&[1], vec![d_value]);
    let (d_critic_h, g_cw2, g_cb2) =
        dense_backward(&cache.critic_h, &params.critic.w2, &d_value_t);
    let d_critic_pre = leaky_relu_backward(&cache.critic_h_pre, LEAKY_SLOPE, &d_critic_h);
    let (d_cat_c, g_cw1, g_cb1) = dense_backward(&cache.cat, &params.critic.w1, &d_critic_pre);
    grads.critic = HeadParams {
        w1: g_cw1,
        b1: g_cb1,
        w2: g_cw2,
        b2: g_cb2,
    };

    // shared encoder: both streams add up; drop the angle-vector part
    let code_len = cache.cat.len() - ANGLE_COUNT;
    let side = params.image_size / 8;
    let mut d_code = Tensor::zeros(&[CHANNELS[3], side, side]);
    for i in 0..code_len {
        d_code.data[i] = d_cat_a.data[i] + d_cat_c.data[i];
    }
    let mut d_out = d_code;
    for (idx, (b, c)) in params.blocks.iter().zip(&cache.blocks).enumerate().rev() {
        let d_act = max_pool2_backward(&c.pool_cache, &d_out);
        let d_gn = leaky_relu_backward(&c.gn_out, LEAKY_SLOPE, &d_act);
        let (d_conv, g_gamma, g_beta) = group_norm_backward(&c.gn_cache, &b.gamma, &d_gn);
        let (d_in, g_k, g_b) = conv2d_backward(&c.input, &b.kernels, &d_conv);
        grads.blocks[idx] = ConvBlock {
            kernels: g_k,
            bias: g_b,
            gamma: g_gamma,
            beta: g_beta,
        };
        d_out = d_in;
    }
    grads
}

/// Inverse-CDF sampling over a fixed index order.
pub fn sample_action(probs: &[f64], rng: &mut ChaCha8Rng) -> Result<u32> {
    validate_probs(probs)?;
    let u: f64 = rng.gen_range(0.0..1.0);
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(i as u32);
        }
    }
    Ok(probs.len() as u32 - 1)
}

/// Greedy mode: the most probable angle, first index on ties; ignores rng.
pub fn argmax_action(probs: &[f64]) -> Result<u32> {
    validate_probs(probs)?;
    let mut best = 0usize;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    Ok(best as u32)
}

fn validate_probs(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::Domain("empty probability vector".into()));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-6 || probs.iter().any(|&p| p < 0.0) {
        return Err(Error::Domain(format!(
            "not a probability vector (sum {sum})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    fn params32() -> AgentParams {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        AgentParams::init(32, &mut rng).unwrap()
    }

    fn gradient_image(n: usize) -> Image {
        Image::from_vec(n, (0..n * n).map(|i| (i % n) as f64 / n as f64).collect())
    }

    #[test]
    fn code_length_matches_shape_arithmetic() {
        assert_eq!(AgentParams::code_len(128), 16 * 16 * 32);
        let p = params32();
        let code = encode(&p, &Image::zeros(32)).unwrap();
        assert_eq!(code.len(), 4 * 4 * 32);
    }

    #[test]
    fn encode_deterministic_and_non_degenerate() {
        let p = params32();
        let a = encode(&p, &Image::zeros(32)).unwrap();
        let b = encode(&p, &Image::zeros(32)).unwrap();
        assert_eq!(a, b);
        let c = encode(&p, &gradient_image(32)).unwrap();
        let dist: f64 = a
            .data
            .iter()
            .zip(&c.data)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        assert!(dist > 0.0, "codes for different inputs must differ");
    }

    #[test]
    fn actor_output_is_valid_and_near_uniform_at_init() {
        let p = params32();
        let probs = actor_forward(&p, &gradient_image(32), &vec![0.0; 180]).unwrap();
        let sum: f64 = probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let uniform = 1.0 / 180.0;
        for &pr in &probs {
            assert!(pr < 10.0 * uniform && pr > uniform / 10.0, "prob {pr}");
        }
    }

    #[test]
    fn forward_is_pure() {
        let p = params32();
        let img = gradient_image(32);
        let b = vec![0.0; 180];
        let a1 = actor_forward(&p, &img, &b).unwrap();
        let v1 = critic_forward(&p, &img, &b).unwrap();
        let a2 = actor_forward(&p, &img, &b).unwrap();
        let v2 = critic_forward(&p, &img, &b).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(v1.to_bits(), v2.to_bits());
        assert!(v1.is_finite());
    }

    #[test]
    fn rejects_wrong_image_size() {
        let p = params32();
        assert!(actor_forward(&p, &Image::zeros(64), &vec![0.0; 180]).is_err());
        assert!(AgentParams::init(33, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn sampling_one_hot_and_argmax() {
        let mut probs = vec![0.0; 180];
        probs[42] = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            assert_eq!(sample_action(&probs, &mut rng).unwrap(), 42);
        }
        assert_eq!(argmax_action(&probs).unwrap(), 42);
        assert!(sample_action(&vec![0.5; 180], &mut rng).is_err());
    }

    #[test]
    fn uniform_sampling_frequencies_within_binomial_bound() {
        let probs = vec![1.0 / 180.0; 180];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000usize;
        let mut counts = vec![0usize; 180];
        for _ in 0..n {
            counts[sample_action(&probs, &mut rng).unwrap() as usize] += 1;
        }
        let p = 1.0 / 180.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        let expect = n as f64 * p;
        for (i, &c) in counts.iter().enumerate() {
            assert!(
                (c as f64 - expect).abs() < 5.0 * sigma,
                "angle {i}: count {c} vs {expect}"
            );
        }
    }

    #[test]
    fn encoder_weights_affect_both_heads() {
        let mut p = params32();
        let img = gradient_image(32);
        let b = vec![0.0; 180];
        let a0 = actor_forward(&p, &img, &b).unwrap();
        let v0 = critic_forward(&p, &img, &b).unwrap();
        p.blocks[0].kernels.data[5] += 0.5;
        let a1 = actor_forward(&p, &img, &b).unwrap();
        let v1 = critic_forward(&p, &img, &b).unwrap();
        let da: f64 = a0.iter().zip(&a1).map(|(x, y)| (x - y).abs()).sum();
        assert!(da > 0.0, "actor insensitive to encoder perturbation");
        assert!((v0 - v1).abs() > 0.0, "critic insensitive to encoder perturbation");
    }

    #[test]
    fn critic_gradient_matches_finite_differences() {
        // dV/dw for a probe set of parameters across layers
        let mut p = params32();
        let img = gradient_image(32);
        let mut bvec = vec![0.0; 180];
        bvec[17] = 1.0;
        let cache = forward(&p, &img, &bvec).unwrap();
        let grads = backward(&p, &cache, &vec![0.0; 180], 1.0);

        let g_named: Vec<(String, Tensor)> = grads
            .named_tensors()
            .into_iter()
            .map(|(n, t)| (n, t.clone()))
            .collect();
        // central differences carry O(noise/h) error, so require 99% of
        // coordinates under the relative tolerance instead of all
        let h = 1e-5;
        let mut checked = 0usize;
        let mut bad = 0usize;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for ti in 0..g_named.len() {
            let len = g_named[ti].1.len();
            for _ in 0..8 {
                let i = rng.gen_range(0..len);
                let orig = p.tensors_mut()[ti].data[i];
                p.tensors_mut()[ti].data[i] = orig + h;
                let vp = critic_forward(&p, &img, &bvec).unwrap();
                p.tensors_mut()[ti].data[i] = orig - h;
                let vm = critic_forward(&p, &img, &bvec).unwrap();
                p.tensors_mut()[ti].data[i] = orig;
                let fd = (vp - vm) / (2.0 * h);
                let an = g_named[ti].1.data[i];
                let denom = fd.abs().max(an.abs()).max(1e-6);
                if ((fd - an) / denom).abs() >= 1e-4 {
                    bad += 1;
                }
                checked += 1;
            }
        }
        assert!(checked >= 80);
        assert!(
            bad * 100 <= checked,
            "{bad}/{checked} sampled coordinates off"
        );
    }
}
