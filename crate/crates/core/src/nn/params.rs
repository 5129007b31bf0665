use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng as _;

use super::arch::ArchitectureSpec;
use crate::error::{Error, Result};
use crate::rng::Rng;

static GENERATION: AtomicU64 = AtomicU64::new(1);

fn next_generation() -> u64 {
    GENERATION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TensorRole {
    Weight,
    Bias,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamTensor {
    pub name: String,
    pub role: TensorRole,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl ParamTensor {
    fn zeros(name: String, role: TensorRole, shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        ParamTensor { name, role, shape, data: vec![0.0; len] }
    }
}

/// Tensor layout, in declaration order (which is also checkpoint order):
/// `conv{1,2,3}.weight` `[filters, in_channels, k, k]`, `conv{i}.bias`,
/// `fc{1,2}.weight` `[out, in]`, `fc{i}.bias`.
fn layout(arch: &ArchitectureSpec) -> Result<Vec<(String, TensorRole, Vec<usize>)>> {
    let shapes = arch.block_shapes()?;
    let mut out = Vec::new();
    for (i, (b, s)) in arch.blocks.iter().zip(&shapes).enumerate() {
        out.push((
            format!("conv{}.weight", i + 1),
            TensorRole::Weight,
            vec![b.filters, s.input.channels, b.kernel, b.kernel],
        ));
        out.push((format!("conv{}.bias", i + 1), TensorRole::Bias, vec![b.filters]));
    }
    let mut fan_in = arch.flat_len()?;
    for (i, &w) in arch.fc_widths.iter().enumerate() {
        out.push((format!("fc{}.weight", i + 1), TensorRole::Weight, vec![w, fan_in]));
        out.push((format!("fc{}.bias", i + 1), TensorRole::Bias, vec![w]));
        fan_in = w;
    }
    Ok(out)
}

/// Learnable weights and biases of a network, tied to the architecture they
/// instantiate.
///
/// Every mutable access stamps a fresh generation number, which forward
/// caches record so that a backward pass against modified parameters is
/// rejected.
#[derive(Clone, Debug)]
pub struct NetworkParams {
    arch: ArchitectureSpec,
    tensors: Vec<ParamTensor>,
    generation: u64,
}

impl PartialEq for NetworkParams {
    fn eq(&self, other: &Self) -> bool {
        self.arch == other.arch && self.tensors == other.tensors
    }
}

impl NetworkParams {
    pub fn zeros(arch: &ArchitectureSpec) -> Result<Self> {
        let tensors = layout(arch)?
            .into_iter()
            .map(|(n, r, s)| ParamTensor::zeros(n, r, s))
            .collect();
        Ok(NetworkParams { arch: arch.clone(), tensors, generation: next_generation() })
    }

    /// Weights uniform in ±sqrt(6 / fan_in) (He initialization for ReLU
    /// units), biases zero.
    pub fn init(arch: &ArchitectureSpec, rng: &mut Rng) -> Result<Self> {
        let mut params = Self::zeros(arch)?;
        for t in params.tensors.iter_mut().filter(|t| t.role == TensorRole::Weight) {
            let fan_in = match t.shape.as_slice() {
                [_, c, k, k2] => c * k * k2,
                [_, i] => *i,
                _ => unreachable!("weight tensors are 2-D or 4-D"),
            };
            let limit = (6.0 / fan_in as f64).sqrt();
            for v in &mut t.data {
                *v = rng.random_range(-limit..limit);
            }
        }
        Ok(params)
    }

    /// Builds parameters from raw tensor data in declaration order.
    pub fn from_tensors(arch: &ArchitectureSpec, data: Vec<Vec<f64>>) -> Result<Self> {
        let mut params = Self::zeros(arch)?;
        if data.len() != params.tensors.len() {
            return Err(Error::shape(
                "params",
                format!("expected {} tensors, got {}", params.tensors.len(), data.len()),
            ));
        }
        for (t, d) in params.tensors.iter_mut().zip(data) {
            if d.len() != t.data.len() {
                return Err(Error::shape(
                    &t.name,
                    format!("expected {} values, got {}", t.data.len(), d.len()),
                ));
            }
            t.data = d;
        }
        Ok(params)
    }

    pub fn arch(&self) -> &ArchitectureSpec {
        &self.arch
    }

    pub fn tensors(&self) -> &[ParamTensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [ParamTensor] {
        self.generation = next_generation();
        &mut self.tensors
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn len(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sum of squared weights, biases excluded.
    pub fn weight_sq_norm(&self) -> f64 {
        self.tensors
            .iter()
            .filter(|t| t.role == TensorRole::Weight)
            .flat_map(|t| t.data.iter())
            .map(|v| v * v)
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Flat view over every parameter, in declaration order.
    pub fn flat(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.data.iter().copied()).collect()
    }

    /// Mutable access to the `index`-th scalar in flat order.
    pub fn flat_get_mut(&mut self, mut index: usize) -> Option<&mut f64> {
        for t in self.tensors_mut() {
            if index < t.data.len() {
                return t.data.get_mut(index);
            }
            index -= t.data.len();
        }
        None
    }

    pub(crate) fn tensor(&self, i: usize) -> &[f64] {
        &self.tensors[i].data
    }
}

/// Gradient with respect to every parameter tensor; mirrors [`NetworkParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    pub tensors: Vec<Vec<f64>>,
}

impl GradientSet {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        GradientSet { tensors: params.tensors().iter().map(|t| vec![0.0; t.data.len()]).collect() }
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &GradientSet, scale: f64) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.tensors.iter_mut().flatten().for_each(|x| *x *= s);
    }

    pub fn flat(&self) -> Vec<f64> {
        self.tensors.iter().flatten().copied().collect()
    }

    pub fn is_zero(&self) -> bool {
        self.tensors.iter().flatten().all(|&x| x == 0.0)
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|x| x.is_finite())
    }

    pub fn matches(&self, params: &NetworkParams) -> bool {
        self.tensors.len() == params.tensors().len()
            && self.tensors.iter().zip(params.tensors()).all(|(g, t)| g.len() == t.data.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::arch::PoolKind;
    use crate::rng::{stream, Stream};

    #[test]
    fn init_is_seeded_and_bounded() {
        let arch = ArchitectureSpec::standard(PoolKind::Max);
        let a = NetworkParams::init(&arch, &mut stream(7, Stream::Init)).unwrap();
        let b = NetworkParams::init(&arch, &mut stream(7, Stream::Init)).unwrap();
        assert_eq!(a, b);
        let fc1 = &a.tensors()[6];
        assert_eq!(fc1.shape, vec![128, 1024]);
        let limit = (6.0f64 / 1024.0).sqrt();
        assert!(fc1.data.iter().all(|v| v.abs() <= limit));
        assert!(fc1.data.iter().any(|v| v.abs() > 0.99 * limit));
        assert!(a.tensors().iter().filter(|t| t.role == TensorRole::Bias).all(|t| t.data.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn mutation_bumps_generation() {
        let arch = ArchitectureSpec::standard(PoolKind::Max);
        let mut p = NetworkParams::zeros(&arch).unwrap();
        let g = p.generation();
        p.tensors_mut();
        assert_ne!(g, p.generation());
    }
}
