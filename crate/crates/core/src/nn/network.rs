//! Batched forward and backward passes.

use rayon::prelude::*;

use super::arch::{BlockShapes, PoolSpec, CONV_BLOCKS};
use super::layers::{self, ConvGeometry};
use super::params::{GradientSet, NetworkParams};
use crate::error::{Error, Result};
use crate::regularizers::dropout;
use crate::rng::Rng;

/// Samples per gradient-accumulation chunk. The chunking is fixed so the
/// summation order, and hence the result, does not depend on thread count.
const CHUNK: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Dropout applied to the first fully connected layer's activations.
pub struct DropoutSpec<'a> {
    pub rate: f64,
    pub rng: &'a mut Rng,
}

pub type Logits = [f64; 2];

#[derive(Clone, Debug, Default)]
struct SampleCache {
    block_input: [Vec<f64>; CONV_BLOCKS],
    conv_pre: [Vec<f64>; CONV_BLOCKS],
    argmax: [Vec<u32>; CONV_BLOCKS],
    flat: Vec<f64>,
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    mask: Option<Vec<f64>>,
}

/// Everything backward needs; no second forward pass is required.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    generation: u64,
    mode: Mode,
    samples: Vec<SampleCache>,
}

impl ForwardCache {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Dropout scale factors of sample `i`, if dropout was active.
    pub fn dropout_mask(&self, i: usize) -> Option<&[f64]> {
        self.samples.get(i).and_then(|s| s.mask.as_deref())
    }
}

struct Plan {
    convs: Vec<ConvGeometry>,
    pools: Vec<(BlockShapes, PoolSpec)>,
}

fn plan(params: &NetworkParams) -> Result<Plan> {
    let arch = params.arch();
    let shapes = arch.block_shapes()?;
    let convs = arch
        .blocks
        .iter()
        .zip(&shapes)
        .map(|(b, s)| ConvGeometry {
            input: s.input,
            output: s.conv,
            kernel: b.kernel,
            stride: b.stride,
            padding: b.padding,
        })
        .collect();
    let pools = shapes.iter().copied().zip(arch.blocks.iter().map(|b| b.pool)).collect();
    Ok(Plan { convs, pools })
}

fn check_inputs(params: &NetworkParams, inputs: &[&[f64]]) -> Result<()> {
    let want = params.arch().input.len();
    for (i, x) in inputs.iter().enumerate() {
        if x.len() != want {
            return Err(Error::shape(
                "input",
                format!("sample {i} has {} values, architecture expects {want}", x.len()),
            ));
        }
    }
    Ok(())
}

fn forward_one(params: &NetworkParams, plan: &Plan, x: &[f64], mask: Option<Vec<f64>>) -> (Logits, SampleCache) {
    let mut cache = SampleCache::default();
    let mut col = Vec::new();
    let mut act = x.to_vec();
    for b in 0..CONV_BLOCKS {
        let mut pre = Vec::new();
        layers::conv_forward(&plan.convs[b], params.tensor(2 * b), params.tensor(2 * b + 1), &act, &mut col, &mut pre);
        let mut relu_out = pre.clone();
        layers::relu(&mut relu_out);
        let (shapes, pool) = &plan.pools[b];
        let mut pooled = Vec::new();
        layers::pool_forward(&relu_out, shapes.conv, pool, &mut pooled, &mut cache.argmax[b]);
        cache.block_input[b] = std::mem::replace(&mut act, pooled);
        cache.conv_pre[b] = pre;
    }
    cache.flat = act;
    let fc = 2 * CONV_BLOCKS;
    layers::dense_forward(params.tensor(fc), params.tensor(fc + 1), &cache.flat, &mut cache.hidden_pre);
    let mut hidden = cache.hidden_pre.clone();
    layers::relu(&mut hidden);
    if let Some(m) = &mask {
        hidden.iter_mut().zip(m).for_each(|(h, s)| *h *= s);
    }
    let mut out = Vec::with_capacity(2);
    layers::dense_forward(params.tensor(fc + 2), params.tensor(fc + 3), &hidden, &mut out);
    cache.hidden = hidden;
    cache.mask = mask;
    ([out[0], out[1]], cache)
}

fn backward_one(params: &NetworkParams, plan: &Plan, c: &SampleCache, dlogits: &Logits, grads: &mut GradientSet) {
    let fc = 2 * CONV_BLOCKS;
    let mut dhidden = Vec::new();
    {
        let (gw, rest) = grads.tensors.split_at_mut(fc + 3);
        layers::dense_backward(params.tensor(fc + 2), &c.hidden, dlogits, &mut gw[fc + 2], &mut rest[0], Some(&mut dhidden));
    }
    if let Some(m) = &c.mask {
        dhidden.iter_mut().zip(m).for_each(|(d, s)| *d *= s);
    }
    layers::relu_backward(&c.hidden_pre, &mut dhidden);
    let mut dact = Vec::new();
    {
        let (gw, rest) = grads.tensors.split_at_mut(fc + 1);
        layers::dense_backward(params.tensor(fc), &c.flat, &dhidden, &mut gw[fc], &mut rest[0], Some(&mut dact));
    }
    let mut col = Vec::new();
    let mut dconv = Vec::new();
    for b in (0..CONV_BLOCKS).rev() {
        let (shapes, pool) = &plan.pools[b];
        layers::pool_backward(&dact, shapes.conv, pool, &c.argmax[b], &mut dconv);
        layers::relu_backward(&c.conv_pre[b], &mut dconv);
        let (gw, rest) = grads.tensors.split_at_mut(2 * b + 1);
        let grad_input = if b > 0 { Some(&mut dact) } else { None };
        layers::conv_backward(
            &plan.convs[b],
            params.tensor(2 * b),
            &c.block_input[b],
            &dconv,
            &mut gw[2 * b],
            &mut rest[0],
            grad_input,
            &mut col,
        );
    }
}

/// Runs the network on a batch and returns one logit pair per sample plus
/// the cache needed by [`backward`].
pub fn forward(
    params: &NetworkParams,
    inputs: &[&[f64]],
    mode: Mode,
    dropout: Option<DropoutSpec<'_>>,
) -> Result<(Vec<Logits>, ForwardCache)> {
    check_inputs(params, inputs)?;
    let plan = plan(params)?;
    let masks: Vec<Option<Vec<f64>>> = match (mode, dropout) {
        (Mode::Eval, Some(_)) => {
            return Err(Error::InvalidArgument("dropout is only permitted in train mode".into()))
        }
        (Mode::Train, Some(d)) => {
            let width = params.arch().fc_widths[0];
            let mut masks = Vec::with_capacity(inputs.len());
            for _ in inputs {
                masks.push(Some(dropout::draw_mask(width, d.rate, d.rng)?));
            }
            masks
        }
        _ => vec![None; inputs.len()],
    };
    let (logits, samples): (Vec<_>, Vec<_>) = inputs
        .par_iter()
        .zip(masks)
        .map(|(x, m)| forward_one(params, &plan, x, m))
        .unzip();
    Ok((logits, ForwardCache { generation: params.generation(), mode, samples }))
}

/// Logits only, for inference.
pub fn predict(params: &NetworkParams, inputs: &[&[f64]]) -> Result<Vec<Logits>> {
    check_inputs(params, inputs)?;
    let plan = plan(params)?;
    Ok(inputs.par_iter().map(|x| forward_one(params, &plan, x, None).0).collect())
}

/// Gradient of `Σ_i ⟨dlogits_i, logits_i⟩` with respect to every parameter.
pub fn backward(params: &NetworkParams, cache: &ForwardCache, dlogits: &[Logits]) -> Result<GradientSet> {
    if cache.generation != params.generation() {
        return Err(Error::StaleCache);
    }
    if dlogits.len() != cache.samples.len() {
        return Err(Error::shape(
            "logits",
            format!("{} upstream gradients for {} cached samples", dlogits.len(), cache.samples.len()),
        ));
    }
    let plan = plan(params)?;
    let partials: Vec<GradientSet> = cache
        .samples
        .par_chunks(CHUNK)
        .zip(dlogits.par_chunks(CHUNK))
        .map(|(cs, ds)| {
            let mut g = GradientSet::zeros_like(params);
            for (c, d) in cs.iter().zip(ds) {
                if d[0] != 0.0 || d[1] != 0.0 {
                    backward_one(params, &plan, c, d, &mut g);
                }
            }
            g
        })
        .collect();
    let mut total = GradientSet::zeros_like(params);
    for p in &partials {
        total.add_assign(p);
    }
    Ok(total)
}
