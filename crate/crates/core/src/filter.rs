//! Truncated Gaussian low-pass shared by path smoothing and the jitter metric.

/// Weights `exp(-k^2 / 2 sigma^2)` for `k = 0..=radius`, radius `ceil(3 sigma)`.
pub fn gaussian_half_kernel(sigma: f64) -> Vec<f64> {
    assert!(sigma > 0.0, "sigma must be positive");
    let radius = (3.0 * sigma).ceil() as usize;
    (0..=radius).map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp()).collect()
}

/// Convolves `xs` with the truncated Gaussian. Near the ends the kernel is
/// cut to the available samples and renormalized, so constants pass through.
pub fn gaussian_smooth(xs: &[f64], sigma: f64) -> Vec<f64> {
    let kernel = gaussian_half_kernel(sigma);
    let radius = kernel.len() - 1;
    let n = xs.len();
    (0..n)
        .map(|t| {
            let lo = t.saturating_sub(radius);
            let hi = (t + radius).min(n.saturating_sub(1));
            let (mut acc, mut norm) = (0.0, 0.0);
            for (s, x) in xs.iter().enumerate().take(hi + 1).skip(lo) {
                let w = kernel[s.abs_diff(t)];
                acc += w * x;
                norm += w;
            }
            acc / norm
        })
        .collect()
}
