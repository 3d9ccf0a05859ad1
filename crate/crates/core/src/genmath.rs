//! Elementwise kernels for flow-matching and diffusion training objectives.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenMathError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("bad schedule: {0}")]
    BadSchedule(String),
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Dense row-major tensor of finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, GenMathError> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(GenMathError::InvalidTensor(format!("shape {shape:?} holds {n} values, got {}", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(GenMathError::InvalidTensor("non-finite value".into()));
        }
        Ok(Self { shape, data })
    }

    pub fn scalar(v: f64) -> Self {
        Self { shape: vec![], data: vec![v] }
    }

    pub fn full(shape: Vec<usize>, v: f64) -> Self {
        let n = shape.iter().product();
        Self { shape, data: vec![v; n] }
    }

    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(usize) -> f64) -> Result<Self, GenMathError> {
        let n: usize = shape.iter().product();
        Self::new(shape, (0..n).map(&mut f).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn same_shape(&self, other: &Tensor) -> Result<(), GenMathError> {
        if self.shape != other.shape {
            return Err(GenMathError::ShapeMismatch(format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        Ok(())
    }

    /// `ka * self + kb * other`, elementwise.
    fn combine(&self, ka: f64, other: &Tensor, kb: f64) -> Result<Tensor, GenMathError> {
        self.same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| ka * a + kb * b).collect();
        Ok(Tensor { shape: self.shape.clone(), data })
    }
}

/// One line of extents, then one line of values; values use the shortest
/// representation that parses back exactly.
impl fmt::Display for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shape: Vec<String> = self.shape.iter().map(usize::to_string).collect();
        let data: Vec<String> = self.data.iter().map(f64::to_string).collect();
        writeln!(f, "{}", shape.join(" "))?;
        writeln!(f, "{}", data.join(" "))
    }
}

impl FromStr for Tensor {
    type Err = GenMathError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut lines = s.lines();
        let shape = lines
            .next()
            .ok_or_else(|| GenMathError::Parse("missing shape line".into()))?
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| GenMathError::Parse(format!("extent {t:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let data = lines
            .flat_map(str::split_whitespace)
            .map(|t| t.parse::<f64>().map_err(|e| GenMathError::Parse(format!("value {t:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        Tensor::new(shape, data)
    }
}

type ScheduleFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Interpolation schedule `y_t = alpha(t) a + sigma(t) eps` with analytic
/// derivatives.
#[derive(Clone)]
pub struct FlowSchedule {
    name: String,
    alpha: ScheduleFn,
    sigma: ScheduleFn,
    alpha_dot: ScheduleFn,
    sigma_dot: ScheduleFn,
}

impl fmt::Debug for FlowSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FlowSchedule").field("name", &self.name).finish()
    }
}

impl FlowSchedule {
    /// Checks `alpha(0) = 0`, `alpha(1) = 1` and `sigma(1) = 0` within 1e-12.
    pub fn new(
        name: &str,
        alpha: ScheduleFn,
        sigma: ScheduleFn,
        alpha_dot: ScheduleFn,
        sigma_dot: ScheduleFn,
    ) -> Result<Self, GenMathError> {
        let checks = [("alpha(0) = 0", alpha(0.0), 0.0), ("alpha(1) = 1", alpha(1.0), 1.0), ("sigma(1) = 0", sigma(1.0), 0.0)];
        for (what, got, want) in checks {
            if !((got - want).abs() <= 1e-12) {
                return Err(GenMathError::BadSchedule(format!("{name}: {what} violated (got {got})")));
            }
        }
        Ok(Self { name: name.to_string(), alpha, sigma, alpha_dot, sigma_dot })
    }

    /// `alpha = t`, `sigma = 1 - t`.
    pub fn linear() -> Self {
        Self::new("linear", Arc::new(|t| t), Arc::new(|t| 1.0 - t), Arc::new(|_| 1.0), Arc::new(|_| -1.0)).expect("linear schedule")
    }

    /// `alpha = sin(pi t / 2)`, `sigma = cos(pi t / 2)`.
    pub fn trig() -> Self {
        use std::f64::consts::FRAC_PI_2;
        Self::new(
            "trig",
            Arc::new(|t| (FRAC_PI_2 * t).sin()),
            // cos(pi/2) is 6e-17 in floating point; pin the endpoint.
            Arc::new(|t| if t == 1.0 { 0.0 } else { (FRAC_PI_2 * t).cos() }),
            Arc::new(|t| FRAC_PI_2 * (FRAC_PI_2 * t).cos()),
            Arc::new(|t| -FRAC_PI_2 * (FRAC_PI_2 * t).sin()),
        )
        .expect("trig schedule")
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "linear" => Some(Self::linear()),
            "trig" => Some(Self::trig()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alpha(&self, t: f64) -> f64 {
        (self.alpha)(t)
    }

    pub fn sigma(&self, t: f64) -> f64 {
        (self.sigma)(t)
    }

    pub fn alpha_dot(&self, t: f64) -> f64 {
        (self.alpha_dot)(t)
    }

    pub fn sigma_dot(&self, t: f64) -> f64 {
        (self.sigma_dot)(t)
    }
}

fn check_t(t: f64) -> Result<(), GenMathError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(GenMathError::BadSchedule(format!("t = {t} outside [0, 1]")));
    }
    Ok(())
}

pub fn cfm_interpolant(a: &Tensor, eps: &Tensor, t: f64, s: &FlowSchedule) -> Result<Tensor, GenMathError> {
    check_t(t)?;
    a.combine(s.alpha(t), eps, s.sigma(t))
}

pub fn cfm_target_velocity(a: &Tensor, eps: &Tensor, t: f64, s: &FlowSchedule) -> Result<Tensor, GenMathError> {
    check_t(t)?;
    a.combine(s.alpha_dot(t), eps, s.sigma_dot(t))
}

/// Mean squared elementwise difference.
pub fn cfm_loss(pred: &Tensor, target: &Tensor) -> Result<f64, GenMathError> {
    pred.same_shape(target)?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = pred.data.iter().zip(&target.data).map(|(p, q)| (p - q) * (p - q)).sum();
    Ok(sum / pred.len() as f64)
}

/// Cumulative products `alpha_bar_t` of a noise schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    alpha_bar: Vec<f64>,
}

impl DiffusionSchedule {
    pub fn new(alpha_bar: Vec<f64>) -> Result<Self, GenMathError> {
        if alpha_bar.is_empty() {
            return Err(GenMathError::BadSchedule("empty schedule".into()));
        }
        if alpha_bar.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
            return Err(GenMathError::BadSchedule("alpha_bar must lie in (0, 1]".into()));
        }
        if alpha_bar.windows(2).any(|w| w[1] > w[0]) {
            return Err(GenMathError::BadSchedule("alpha_bar must be nonincreasing".into()));
        }
        Ok(Self { alpha_bar })
    }

    /// `alpha_bar_t = prod_{s <= t} (1 - beta_s)`.
    pub fn from_betas(betas: &[f64]) -> Result<Self, GenMathError> {
        if betas.iter().any(|b| !(*b >= 0.0 && *b < 1.0)) {
            return Err(GenMathError::BadSchedule("betas must lie in [0, 1)".into()));
        }
        let alpha_bar = betas
            .iter()
            .scan(1.0, |acc, b| {
                *acc *= 1.0 - b;
                Some(*acc)
            })
            .collect();
        Self::new(alpha_bar)
    }

    /// Betas spaced linearly from `beta_start` to `beta_end`.
    pub fn linear_betas(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self, GenMathError> {
        if steps == 0 {
            return Err(GenMathError::BadSchedule("zero steps".into()));
        }
        let betas: Vec<f64> = (0..steps)
            .map(|i| if steps == 1 { beta_start } else { beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64 })
            .collect();
        Self::from_betas(&betas)
    }

    pub fn alpha_bar(&self) -> &[f64] {
        &self.alpha_bar
    }

    pub fn len(&self) -> usize {
        self.alpha_bar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha_bar.is_empty()
    }
}

/// `sqrt(alpha_bar) z + sqrt(1 - alpha_bar) eps`.
pub fn ddpm_noise(z: &Tensor, eps: &Tensor, alpha_bar_t: f64) -> Result<Tensor, GenMathError> {
    if !(alpha_bar_t > 0.0 && alpha_bar_t <= 1.0) {
        return Err(GenMathError::BadSchedule(format!("alpha_bar {alpha_bar_t} outside (0, 1]")));
    }
    z.combine(alpha_bar_t.sqrt(), eps, (1.0 - alpha_bar_t).sqrt())
}

/// Concatenates `parts` along `axis`; every other extent must agree.
pub fn concat_channels(parts: &[Tensor], axis: usize) -> Result<Tensor, GenMathError> {
    let first = parts.first().ok_or_else(|| GenMathError::ShapeMismatch("no parts".into()))?;
    if axis >= first.shape.len() {
        return Err(GenMathError::ShapeMismatch(format!("axis {axis} out of range for rank {}", first.shape.len())));
    }
    for p in parts {
        let ok = p.shape.len() == first.shape.len() && p.shape.iter().zip(&first.shape).enumerate().all(|(i, (a, b))| i == axis || a == b);
        if !ok {
            return Err(GenMathError::ShapeMismatch(format!("{:?} vs {:?} off axis {axis}", p.shape, first.shape)));
        }
    }
    let outer: usize = first.shape[..axis].iter().product();
    let inner: usize = first.shape[axis + 1..].iter().product();
    let mut shape = first.shape.clone();
    shape[axis] = parts.iter().map(|p| p.shape[axis]).sum();
    let mut data = Vec::with_capacity(shape.iter().product());
    for o in 0..outer {
        for p in parts {
            let block = p.shape[axis] * inner;
            data.extend_from_slice(&p.data[o * block..(o + 1) * block]);
        }
    }
    Ok(Tensor { shape, data })
}

/// Inverse of [`concat_channels`] for the given channel extents.
pub fn split_channels(t: &Tensor, axis: usize, sizes: &[usize]) -> Result<Vec<Tensor>, GenMathError> {
    if axis >= t.shape.len() || sizes.iter().sum::<usize>() != t.shape[axis] {
        return Err(GenMathError::ShapeMismatch(format!("cannot split {:?} into {sizes:?} on axis {axis}", t.shape)));
    }
    let outer: usize = t.shape[..axis].iter().product();
    let inner: usize = t.shape[axis + 1..].iter().product();
    let total = t.shape[axis] * inner;
    let mut out = Vec::with_capacity(sizes.len());
    let mut offset = 0;
    for &c in sizes {
        let mut shape = t.shape.clone();
        shape[axis] = c;
        let mut data = Vec::with_capacity(outer * c * inner);
        for o in 0..outer {
            let start = o * total + offset * inner;
            data.extend_from_slice(&t.data[start..start + c * inner]);
        }
        out.push(Tensor { shape, data });
        offset += c;
    }
    Ok(out)
}
