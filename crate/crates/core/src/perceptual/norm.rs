//! Batch and instance normalization.

use super::tensor::Tensor4;

pub const NORM_EPS: f64 = 1e-5;

fn mean_var(values: impl Iterator<Item = f64> + Clone, n: f64) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Instance normalization: every (batch, channel) plane is shifted to mean 0
/// and scaled by 1/sqrt(var + eps).
pub fn instance_norm(x: &Tensor4) -> Tensor4 {
    let mut out = x.clone();
    let n = (x.height * x.width) as f64;
    for b in 0..x.batch {
        for c in 0..x.channels {
            let plane = x.instance(b, c);
            let (mean, var) = mean_var(plane.iter().copied(), n);
            let inv = 1.0 / (var + NORM_EPS).sqrt();
            for (o, &v) in out.instance_mut(b, c).iter_mut().zip(plane) {
                *o = (v - mean) * inv;
            }
        }
    }
    out
}

/// Batch normalization with per-channel scale and shift. Statistics are
/// taken over batch and spatial dimensions.
pub fn batch_norm(x: &Tensor4, gamma: &[f64], beta: &[f64]) -> Tensor4 {
    assert_eq!(gamma.len(), x.channels);
    assert_eq!(beta.len(), x.channels);
    let mut out = x.clone();
    let n = (x.batch * x.height * x.width) as f64;
    for c in 0..x.channels {
        let values = (0..x.batch).flat_map(|b| x.instance(b, c).iter().copied());
        let (mean, var) = mean_var(values.clone(), n);
        let inv = 1.0 / (var + NORM_EPS).sqrt();
        for b in 0..x.batch {
            for (o, &v) in out.instance_mut(b, c).iter_mut().zip(x.instance(b, c)) {
                *o = gamma[c] * (v - mean) * inv + beta[c];
            }
        }
    }
    out
}

/// Normalize one plane in place; returns (mean, inv_std) for the backward
/// pass. This is the instance-norm kernel the extractor layers use (B=1).
pub(crate) fn normalize_plane(plane: &mut [f64]) -> (f64, f64) {
    let n = plane.len() as f64;
    let (mean, var) = mean_var(plane.iter().copied(), n);
    let inv = 1.0 / (var + NORM_EPS).sqrt();
    for v in plane.iter_mut() {
        *v = (*v - mean) * inv;
    }
    (mean, inv)
}

/// Backward through `normalize_plane`: `normalized` is the plane's output,
/// `grad` the loss gradient at that output; returns the gradient at the
/// plane's input.
pub(crate) fn normalize_plane_backward(
    normalized: &[f64],
    grad: &[f64],
    inv_std: f64,
) -> Vec<f64> {
    let n = normalized.len() as f64;
    let grad_mean = grad.iter().sum::<f64>() / n;
    let grad_dot = grad
        .iter()
        .zip(normalized)
        .map(|(g, y)| g * y)
        .sum::<f64>()
        / n;
    grad.iter()
        .zip(normalized)
        .map(|(g, y)| inv_std * (g - grad_mean - y * grad_dot))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_tensor(b: usize, c: usize, h: usize, w: usize, seed: u64) -> Tensor4 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut t = Tensor4::zeros(b, c, h, w);
        for v in &mut t.data {
            *v = rng.gen_range(-2.0..2.0);
        }
        t
    }

    #[test]
    fn constant_channel_normalizes_to_zero() {
        let mut t = Tensor4::zeros(1, 2, 3, 3);
        t.instance_mut(0, 1).fill(7.5);
        let y = instance_norm(&t);
        assert!(y.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_point_channel() {
        // Values {0, 2}: mean 1, var 1 -> outputs about -1 and +1.
        let t = Tensor4::from_data(1, 1, 1, 2, vec![0.0, 2.0]).unwrap();
        let y = instance_norm(&t);
        assert!((y.data[0] + 1.0).abs() < 1e-5);
        assert!((y.data[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn instance_stats_after_norm() {
        let t = random_tensor(2, 3, 5, 4, 11);
        let y = instance_norm(&t);
        let n = 20.0;
        for b in 0..2 {
            for c in 0..3 {
                let plane = y.instance(b, c);
                let mean = plane.iter().sum::<f64>() / n;
                let var = plane.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                assert!(mean.abs() < 1e-12);
                assert!(var <= 1.0 + 1e-12 && var > 0.99);
            }
        }
    }

    #[test]
    fn batch_norm_identity_and_constant() {
        let t = random_tensor(2, 2, 4, 4, 3);
        // gamma=0 collapses to beta.
        let y = batch_norm(&t, &[0.0, 0.0], &[0.3, -0.7]);
        for b in 0..2 {
            assert!(y.instance(b, 0).iter().all(|&v| v == 0.3));
            assert!(y.instance(b, 1).iter().all(|&v| v == -0.7));
        }
    }

    #[test]
    fn batch_norm_channel_stats() {
        let t = random_tensor(3, 2, 4, 4, 9);
        let gamma = [1.5, 0.5];
        let beta = [0.25, -1.0];
        let y = batch_norm(&t, &gamma, &beta);
        let n = (3 * 16) as f64;
        for c in 0..2 {
            let vals: Vec<f64> = (0..3)
                .flat_map(|b| y.instance(b, c).to_vec())
                .collect();
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            assert!((mean - beta[c]).abs() < 1e-10);
            assert!((var - gamma[c] * gamma[c]).abs() < 1e-4);
        }
    }

    #[test]
    fn batch_norm_with_b1_equals_instance_norm() {
        let t = random_tensor(1, 3, 6, 5, 21);
        let a = instance_norm(&t);
        let b = batch_norm(&t, &[1.0; 3], &[0.0; 3]);
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn plane_backward_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        let n = 12;
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // Scalar objective: dot(weights, normalize(x)).
        let f = |x: &[f64]| {
            let mut p = x.to_vec();
            normalize_plane(&mut p);
            p.iter().zip(&weights) .map(|(a, b)| a * b).sum::<f64>()
        };
        let mut y = x.clone();
        let (_, inv) = normalize_plane(&mut y);
        let analytic = normalize_plane_backward(&y, &weights, inv);
        let h = 1e-6;
        for i in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (f(&xp) - f(&xm)) / (2.0 * h);
            assert!(
                (fd - analytic[i]).abs() < 1e-6,
                "component {i}: fd={fd} analytic={}",
                analytic[i]
            );
        }
    }
}
