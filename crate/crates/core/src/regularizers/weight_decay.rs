use crate::nn::{GradientSet, NetworkParams, TensorRole};

/// `Ω = ‖W‖₂²` over weight tensors (biases excluded) and its gradient `2W`.
pub fn weight_decay(params: &NetworkParams) -> (f64, GradientSet) {
    let mut grad = GradientSet::zeros_like(params);
    for (g, t) in grad.tensors.iter_mut().zip(params.tensors()) {
        if t.role == TensorRole::Weight {
            g.iter_mut().zip(&t.data).for_each(|(gi, w)| *gi = 2.0 * w);
        }
    }
    (params.weight_sq_norm(), grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{ArchitectureSpec, PoolKind, Shape};
    use crate::rng::{stream, Stream};

    fn tiny() -> ArchitectureSpec {
        let mut a = ArchitectureSpec::with_widths(Shape::new(1, 4, 4), [1, 1, 1], 2, PoolKind::Max);
        for b in &mut a.blocks {
            b.kernel = 1;
            b.padding = 0;
            b.pool.window = 1;
            b.pool.stride = 1;
        }
        a
    }

    #[test]
    fn two_weights() {
        let mut p = NetworkParams::zeros(&tiny()).unwrap();
        {
            let t = p.tensors_mut();
            t[0].data[0] = 1.0;
            t[2].data[0] = 2.0;
            t[1].data[0] = 100.0; // bias, ignored
        }
        let (omega, g) = weight_decay(&p);
        assert_eq!(omega, 5.0);
        assert_eq!(g.tensors[0], vec![2.0]);
        assert_eq!(g.tensors[2], vec![4.0]);
        assert_eq!(g.tensors[1], vec![0.0]);
    }

    #[test]
    fn zero_weights() {
        let p = NetworkParams::zeros(&tiny()).unwrap();
        assert_eq!(weight_decay(&p).0, 0.0);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let p = NetworkParams::init(&tiny(), &mut stream(11, Stream::Init)).unwrap();
        let (_, g) = weight_decay(&p);
        let flat_g = g.flat();
        let h = 1e-5;
        for i in 0..p.len() {
            let mut plus = p.clone();
            *plus.flat_get_mut(i).unwrap() += h;
            let mut minus = p.clone();
            *minus.flat_get_mut(i).unwrap() -= h;
            let fd = (weight_decay(&plus).0 - weight_decay(&minus).0) / (2.0 * h);
            let denom = fd.abs().max(flat_g[i].abs()).max(1e-6);
            assert!((fd - flat_g[i]).abs() / denom < 1e-8, "param {i}: {fd} vs {}", flat_g[i]);
        }
    }
}
