//! Synthetic objectives queried through the oracle.

/// A differentiable objective with an exact gradient.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

/// `f(x) = ½·γ·‖x − c‖²`, with gradient Lipschitz constant `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    pub curvature: f64,
    pub minimizer: Vec<f64>,
}

impl Quadratic {
    pub fn new(curvature: f64, minimizer: Vec<f64>) -> Self {
        Self {
            curvature,
            minimizer,
        }
    }

    /// Isotropic bowl centred at the origin.
    pub fn centered(curvature: f64, dim: usize) -> Self {
        Self::new(curvature, vec![0.0; dim])
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.minimizer.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self.curvature
            * x.iter()
                .zip(&self.minimizer)
                .map(|(a, c)| (a - c).powi(2))
                .sum::<f64>()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.minimizer)
            .map(|(a, c)| self.curvature * (a - c))
            .collect()
    }
}

/// Quadratic bowl plus a coordinate-wise sinusoidal ripple:
/// `f(x) = ½·γ·‖x − c‖² + a·Σ sin(ω·(x_j − c_j))`.
///
/// Nonconvex whenever `a·ω² > γ`; the gradient stays Lipschitz with constant
/// `γ + a·ω²`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rippled {
    pub bowl: Quadratic,
    pub amplitude: f64,
    pub frequency: f64,
}

impl Rippled {
    pub fn lipschitz(&self) -> f64 {
        self.bowl.curvature + self.amplitude.abs() * self.frequency * self.frequency
    }
}

impl Objective for Rippled {
    fn dim(&self) -> usize {
        self.bowl.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let ripple: f64 = x
            .iter()
            .zip(&self.bowl.minimizer)
            .map(|(a, c)| (self.frequency * (a - c)).sin())
            .sum();
        self.bowl.value(x) + self.amplitude * ripple
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.bowl.minimizer)
            .map(|(a, c)| {
                self.bowl.curvature * (a - c)
                    + self.amplitude * self.frequency * (self.frequency * (a - c)).cos()
            })
            .collect()
    }
}

pub fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}
