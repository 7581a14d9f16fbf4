//! Gaussian-process regression with a non-zero prior mean.
//!
//! The posterior only models the residual between observations and the
//! prior mean, so with no data every prediction is exactly the prior.
//! [`OutcomeModel`] bundles the four outcome dimensions, which always share
//! inputs, kernel and noise and therefore a single Cholesky factor.

use thiserror::Error;

/// A GP input point: an action descriptor or a raw wheel command.
pub type GpInput = [f64; 2];

/// Relative displacement of one episode, in the body frame of the start pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub dx: f64,
    pub dy: f64,
    pub cos_dt: f64,
    pub sin_dt: f64,
}

impl Outcome {
    pub const ZERO: Outcome = Outcome {
        dx: 0.0,
        dy: 0.0,
        cos_dt: 0.0,
        sin_dt: 0.0,
    };

    pub fn new(dx: f64, dy: f64, cos_dt: f64, sin_dt: f64) -> Self {
        Self {
            dx,
            dy,
            cos_dt,
            sin_dt,
        }
    }

    /// Heading change recovered from the (possibly unnormalized) cos/sin pair.
    pub fn heading_change(&self) -> f64 {
        self.sin_dt.atan2(self.cos_dt)
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.dx, self.dy, self.cos_dt, self.sin_dt]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("kernel matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("invalid GP configuration: {0}")]
    InvalidConfig(String),
}

/// Squared-exponential kernel hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub sigma_se_sq: f64,
    pub length_scale: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            sigma_se_sq: 0.5,
            length_scale: 1.0,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<(), GpError> {
        if !(self.sigma_se_sq > 0.0 && self.length_scale > 0.0) {
            return Err(GpError::InvalidConfig(format!(
                "sigma_se_sq and length_scale must be positive, got {} and {}",
                self.sigma_se_sq, self.length_scale
            )));
        }
        Ok(())
    }
}

pub fn se_kernel(a: &GpInput, b: &GpInput, cfg: &KernelConfig) -> f64 {
    let d0 = a[0] - b[0];
    let d1 = a[1] - b[1];
    cfg.sigma_se_sq * (-(d0 * d0 + d1 * d1) / (cfg.length_scale * cfg.length_scale)).exp()
}

// Pivots below this fraction of the prior variance are treated as singular.
const PIVOT_TOL: f64 = 1e-12;

/// Lower Cholesky factor of `K + σ_w² I`, grown one row per new input.
#[derive(Debug, Clone)]
pub struct KernelFactor {
    kernel: KernelConfig,
    noise_sq: f64,
    inputs: Vec<GpInput>,
    // row i holds L[i][0..=i]
    rows: Vec<Vec<f64>>,
}

impl KernelFactor {
    pub fn new(kernel: KernelConfig, noise_sq: f64) -> Result<Self, GpError> {
        kernel.validate()?;
        if !(noise_sq >= 0.0) {
            return Err(GpError::InvalidConfig(format!("noise variance {noise_sq} is negative")));
        }
        Ok(Self {
            kernel,
            noise_sq,
            inputs: Vec::new(),
            rows: Vec::new(),
        })
    }

    /// Factorizes the full matrix for `inputs` from scratch.
    pub fn from_inputs(kernel: KernelConfig, noise_sq: f64, inputs: &[GpInput]) -> Result<Self, GpError> {
        let mut f = Self::new(kernel, noise_sq)?;
        let n = inputs.len();
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = vec![0.0; i + 1];
            for j in 0..=i {
                let mut sum = se_kernel(&inputs[i], &inputs[j], &kernel);
                if i == j {
                    sum += noise_sq;
                }
                let prev: &[f64] = if j == i { &row } else { &rows[j] };
                sum -= (0..j).map(|k| row[k] * prev[k]).sum::<f64>();
                if i == j {
                    if !(sum > PIVOT_TOL * se_kernel(&inputs[i], &inputs[i], &kernel)) {
                        return Err(GpError::NotPositiveDefinite { row: i, pivot: sum });
                    }
                    row[j] = sum.sqrt();
                } else {
                    row[j] = sum / rows[j][j];
                }
            }
            rows.push(row);
        }
        f.inputs = inputs.to_vec();
        f.rows = rows;
        Ok(f)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[GpInput] {
        &self.inputs
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    pub fn noise_sq(&self) -> f64 {
        self.noise_sq
    }

    /// Entry (i, j) of the lower factor.
    pub fn lower(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.rows[i][j]
        }
    }

    pub fn kernel_vector(&self, x: &GpInput) -> Vec<f64> {
        self.inputs.iter().map(|xi| se_kernel(xi, x, &self.kernel)).collect()
    }

    /// Solves `L z = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let mut z = Vec::with_capacity(b.len());
        for (i, row) in self.rows.iter().enumerate() {
            let s: f64 = row[..i].iter().zip(&z).map(|(l, zj)| l * zj).sum();
            z.push((b[i] - s) / row[i]);
        }
        z
    }

    /// Solves `Lᵀ x = z`.
    pub fn backward(&self, z: &[f64]) -> Vec<f64> {
        let n = z.len();
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = z[i];
            for j in i + 1..n {
                s -= self.rows[j][i] * x[j];
            }
            x[i] = s / self.rows[i][i];
        }
        x
    }

    /// Solves `(K + σ_w² I) x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward(&self.forward(b))
    }

    /// Appends one input, extending the factor by a single row. On failure
    /// the factor is left untouched.
    pub fn push(&mut self, x: GpInput) -> Result<(), GpError> {
        let k = self.kernel_vector(&x);
        let l = self.forward(&k);
        let diag = se_kernel(&x, &x, &self.kernel);
        let pivot = diag + self.noise_sq - l.iter().map(|v| v * v).sum::<f64>();
        if !(pivot > PIVOT_TOL * diag) {
            return Err(GpError::NotPositiveDefinite {
                row: self.inputs.len(),
                pivot,
            });
        }
        let mut row = l;
        row.push(pivot.sqrt());
        self.rows.push(row);
        self.inputs.push(x);
        Ok(())
    }

    /// Posterior variance term `k(x,x) − kᵀ(K+σ_w²I)⁻¹k`, clamped at zero.
    pub fn posterior_variance(&self, x: &GpInput, k: &[f64]) -> f64 {
        let v = self.forward(k);
        let reduction: f64 = v.iter().map(|vi| vi * vi).sum();
        (se_kernel(x, x, &self.kernel) - reduction).max(0.0)
    }
}

/// Single-output GP with prior mean `prior_mean`.
pub struct GaussianProcess<M> {
    factor: KernelFactor,
    residuals: Vec<f64>,
    alpha: Vec<f64>,
    prior_mean: M,
}

impl<M: Fn(&GpInput) -> f64> GaussianProcess<M> {
    pub fn new(kernel: KernelConfig, noise_sq: f64, prior_mean: M) -> Result<Self, GpError> {
        Ok(Self {
            factor: KernelFactor::new(kernel, noise_sq)?,
            residuals: Vec::new(),
            alpha: Vec::new(),
            prior_mean,
        })
    }

    pub fn len(&self) -> usize {
        self.factor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factor.is_empty()
    }

    pub fn factor(&self) -> &KernelFactor {
        &self.factor
    }

    /// Adds one observation and refreshes the cached factorization.
    pub fn update(&mut self, x: GpInput, observation: f64) -> Result<(), GpError> {
        self.factor.push(x)?;
        self.residuals.push(observation - (self.prior_mean)(&x));
        self.alpha = self.factor.solve(&self.residuals);
        Ok(())
    }

    /// Posterior mean and variance at `x`.
    pub fn predict(&self, x: &GpInput) -> (f64, f64) {
        let prior = (self.prior_mean)(x);
        if self.factor.is_empty() {
            return (prior, self.factor.kernel().sigma_se_sq);
        }
        let k = self.factor.kernel_vector(x);
        let mean = prior + dot(&k, &self.alpha);
        (mean, self.factor.posterior_variance(x, &k))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Kernel, noise and output scaling shared by the four outcome GPs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpConfig {
    pub kernel: KernelConfig,
    /// Observation noise σ_w², in normalized output units.
    pub noise_sq: f64,
    /// Position residuals are divided by this before fitting.
    pub position_scale: f64,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            kernel: KernelConfig::default(),
            noise_sq: 0.01,
            position_scale: 100.0,
        }
    }
}

impl GpConfig {
    fn output_scales(&self) -> [f64; 4] {
        [self.position_scale, self.position_scale, 1.0, 1.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomePrediction {
    pub mean: Outcome,
    pub variance: [f64; 4],
}

/// Four GPs (dx, dy, cos, sin) over the same inputs. Prior means are supplied
/// per query, which lets the repertoire's simulated outcome act as the mean
/// function.
#[derive(Debug, Clone)]
pub struct OutcomeModel {
    config: GpConfig,
    factor: KernelFactor,
    residuals: [Vec<f64>; 4],
    alpha: [Vec<f64>; 4],
}

impl OutcomeModel {
    pub fn new(config: GpConfig) -> Result<Self, GpError> {
        if !(config.position_scale > 0.0) {
            return Err(GpError::InvalidConfig("position_scale must be positive".into()));
        }
        Ok(Self {
            factor: KernelFactor::new(config.kernel, config.noise_sq)?,
            config,
            residuals: Default::default(),
            alpha: Default::default(),
        })
    }

    pub fn config(&self) -> &GpConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.factor.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factor.is_empty()
    }

    /// Dataset size of each of the four GPs.
    pub fn dataset_sizes(&self) -> [usize; 4] {
        [
            self.residuals[0].len(),
            self.residuals[1].len(),
            self.residuals[2].len(),
            self.residuals[3].len(),
        ]
    }

    pub fn inputs(&self) -> &[GpInput] {
        self.factor.inputs()
    }

    /// Adds one observed outcome to all four GPs. Nothing changes on error.
    pub fn update(&mut self, input: GpInput, prior: &Outcome, observed: &Outcome) -> Result<(), GpError> {
        self.factor.push(input)?;
        let scales = self.config.output_scales();
        let (obs, pri) = (observed.to_array(), prior.to_array());
        for d in 0..4 {
            self.residuals[d].push((obs[d] - pri[d]) / scales[d]);
            self.alpha[d] = self.factor.solve(&self.residuals[d]);
        }
        Ok(())
    }

    /// Predictive mean and per-dimension variance, in outcome units.
    pub fn predict(&self, input: &GpInput, prior: &Outcome) -> OutcomePrediction {
        let scales = self.config.output_scales();
        let sigma_sq = self.config.kernel.sigma_se_sq;
        if self.factor.is_empty() {
            return OutcomePrediction {
                mean: *prior,
                variance: scales.map(|s| sigma_sq * s * s),
            };
        }
        let k = self.factor.kernel_vector(input);
        let var = self.factor.posterior_variance(input, &k);
        let p = prior.to_array();
        let mut mean = [0.0; 4];
        for d in 0..4 {
            mean[d] = p[d] + scales[d] * dot(&k, &self.alpha[d]);
        }
        OutcomePrediction {
            mean: Outcome::from_array(mean),
            variance: scales.map(|s| var * s * s),
        }
    }

    /// Predictive mean only; skips the O(n²) variance solve.
    pub fn predict_mean(&self, input: &GpInput, prior: &Outcome) -> Outcome {
        if self.factor.is_empty() {
            return *prior;
        }
        let scales = self.config.output_scales();
        let k = self.factor.kernel_vector(input);
        let p = prior.to_array();
        let mut mean = [0.0; 4];
        for d in 0..4 {
            mean[d] = p[d] + scales[d] * dot(&k, &self.alpha[d]);
        }
        Outcome::from_array(mean)
    }
}
