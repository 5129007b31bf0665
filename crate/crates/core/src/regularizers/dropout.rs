use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

fn check_rate(rate: f64) -> Result<()> {
    if rate > 0.0 && rate < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("dropout rate {rate} outside (0, 1)")))
    }
}

/// Per-unit scale factors: 0 with probability `rate`, else `1/(1−rate)`.
pub fn draw_mask(len: usize, rate: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    check_rate(rate)?;
    let keep = 1.0 / (1.0 - rate);
    Ok((0..len).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect())
}

/// Inverted dropout on a vector of activations; returns the masked copy and
/// the mask that produced it.
pub fn apply_dropout(activations: &[f64], rate: f64, rng: &mut Rng) -> Result<(Vec<f64>, Vec<f64>)> {
    let mask = draw_mask(activations.len(), rate, rng)?;
    let out = activations.iter().zip(&mask).map(|(a, m)| a * m).collect();
    Ok((out, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn rejects_rates_outside_open_interval() {
        let mut rng = stream(0, Stream::Dropout);
        for r in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(apply_dropout(&[1.0], r, &mut rng).is_err());
        }
    }

    #[test]
    fn tiny_rate_is_nearly_identity() {
        let mut rng = stream(0, Stream::Dropout);
        let x: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let (y, _) = apply_dropout(&x, 1e-12, &mut rng).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn zeroed_fraction_concentrates() {
        let mut rng = stream(42, Stream::Dropout);
        let mask = draw_mask(100_000, 0.5, &mut rng).unwrap();
        let zeroed = mask.iter().filter(|&&m| m == 0.0).count() as f64 / 1e5;
        assert!((zeroed - 0.5).abs() < 0.01, "{zeroed}");
    }

    #[test]
    fn preserves_expectation() {
        let mut rng = stream(43, Stream::Dropout);
        let x = vec![3.0; 16];
        let mut acc = vec![0.0; 16];
        for _ in 0..10_000 {
            let (y, _) = apply_dropout(&x, 0.25, &mut rng).unwrap();
            acc.iter_mut().zip(&y).for_each(|(a, v)| *a += v);
        }
        for a in acc {
            assert!((a / 1e4 - 3.0).abs() < 0.02 * 3.0);
        }
    }
}
