//! Controlled dual stochastic-gradient recursion.
//!
//! The learner keeps two estimates: the learning estimate `x̂`, driven by
//! oracle replies, and the obfuscating estimate `ẑ`, driven by synthetic
//! replies. Each step the action flag selects which estimate is queried and
//! updated; the other one is left untouched.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{norm_sq, Objective};
use crate::oracle::{OracleModel, OracleResponse};

/// Which stochastic gradient a query belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Obfuscate,
    Learn,
}

impl QueryKind {
    pub fn is_learn(self) -> bool {
        matches!(self, QueryKind::Learn)
    }
}

/// Successful-step budget and step size for reaching `E‖∇f(x̂)‖² ≤ ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgBudget {
    /// Initial suboptimality `E f(x₀) − f*`.
    pub initial_gap: f64,
    /// Lipschitz constant of `∇f`.
    pub lipschitz: f64,
    pub noise_variance: f64,
    pub target: f64,
    /// Required number of successful gradient steps.
    pub steps: usize,
    pub step_size: f64,
}

/// `M = ⌈max(4Fγ/ε, 8Fγσ²/ε²)⌉`, `μ = min(1/γ, ε/(2σ²γ))` (`μ = 1/γ` when `σ² = 0`).
pub fn compute_budget(
    initial_gap: f64,
    lipschitz: f64,
    noise_variance: f64,
    target: f64,
) -> Result<SgBudget> {
    if !(initial_gap > 0.0) {
        return Err(Error::Domain(format!(
            "initial suboptimality must be positive, got {initial_gap}"
        )));
    }
    if !(lipschitz > 0.0) {
        return Err(Error::Domain(format!(
            "Lipschitz constant must be positive, got {lipschitz}"
        )));
    }
    if !(noise_variance >= 0.0) {
        return Err(Error::Domain(format!(
            "noise variance must be nonnegative, got {noise_variance}"
        )));
    }
    if !(target > 0.0) {
        return Err(Error::Domain(format!(
            "target must be positive, got {target}"
        )));
    }
    let fg = initial_gap * lipschitz;
    let bound = (4.0 * fg / target).max(8.0 * fg * noise_variance / (target * target));
    // guard against 32.000000000000004 style rounding before the ceiling
    let steps = (bound * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let step_size = if noise_variance == 0.0 {
        1.0 / lipschitz
    } else {
        (1.0 / lipschitz).min(target / (2.0 * noise_variance * lipschitz))
    };
    Ok(SgBudget {
        initial_gap,
        lipschitz,
        noise_variance,
        target,
        steps,
        step_size,
    })
}

/// How the obfuscating run produces its synthetic replies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticMode {
    /// Negated most recent informative learning gradient.
    #[default]
    Mirror,
    /// Noisy gradient of a decoy objective at `ẑ`.
    Decoy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSgState {
    pub learn_estimate: Vec<f64>,
    pub obfuscate_estimate: Vec<f64>,
    pub step_size: f64,
    pub successful_steps: usize,
    last_gradient: Option<Vec<f64>>,
}

impl DualSgState {
    pub fn new(
        learn_estimate: Vec<f64>,
        obfuscate_estimate: Vec<f64>,
        step_size: f64,
    ) -> Result<Self> {
        if learn_estimate.len() != obfuscate_estimate.len() {
            return Err(Error::Shape {
                expected: learn_estimate.len(),
                got: obfuscate_estimate.len(),
            });
        }
        if !(step_size > 0.0) {
            return Err(Error::Domain(format!(
                "step size must be positive, got {step_size}"
            )));
        }
        Ok(Self {
            learn_estimate,
            obfuscate_estimate,
            step_size,
            successful_steps: 0,
            last_gradient: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.learn_estimate.len()
    }

    /// Most recent informative gradient received on a learning query.
    pub fn last_gradient(&self) -> Option<&[f64]> {
        self.last_gradient.as_deref()
    }

    /// The query posed for the given kind: `x̂` when learning, `ẑ` otherwise.
    pub fn make_query(&self, kind: QueryKind) -> &[f64] {
        match kind {
            QueryKind::Learn => &self.learn_estimate,
            QueryKind::Obfuscate => &self.obfuscate_estimate,
        }
    }

    /// One step of the controlled recursion. Only the selected estimate moves.
    pub fn update(
        &mut self,
        kind: QueryKind,
        response: &OracleResponse,
        synthetic: &[f64],
    ) -> Result<()> {
        let d = self.dim();
        match kind {
            QueryKind::Learn => {
                if response.gradient.len() != d {
                    return Err(Error::Shape {
                        expected: d,
                        got: response.gradient.len(),
                    });
                }
                if response.success {
                    axpy(
                        -self.step_size,
                        &response.gradient,
                        &mut self.learn_estimate,
                    );
                    self.successful_steps += 1;
                    self.last_gradient = Some(response.gradient.clone());
                }
            }
            QueryKind::Obfuscate => {
                if synthetic.len() != d {
                    return Err(Error::Shape {
                        expected: d,
                        got: synthetic.len(),
                    });
                }
                axpy(-self.step_size, synthetic, &mut self.obfuscate_estimate);
            }
        }
        Ok(())
    }

    /// Synthetic reply for the obfuscating run.
    ///
    /// Mirror mode with no informative gradient yet falls back to a uniformly
    /// random unit direction.
    pub fn synthetic_response<R: Rng + ?Sized>(
        &self,
        mode: SyntheticMode,
        decoy: Option<&dyn Objective>,
        noise: &OracleModel,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        match mode {
            SyntheticMode::Mirror => Ok(match &self.last_gradient {
                Some(g) => g.iter().map(|x| -x).collect(),
                None => random_unit(self.dim(), rng),
            }),
            SyntheticMode::Decoy => {
                let decoy = decoy.ok_or_else(|| {
                    Error::Config("decoy synthetic mode requires a decoy objective".into())
                })?;
                if decoy.dim() != self.dim() {
                    return Err(Error::Shape {
                        expected: self.dim(),
                        got: decoy.dim(),
                    });
                }
                let mut g = decoy.gradient(&self.obfuscate_estimate);
                for (x, e) in g.iter_mut().zip(noise.sample_noise(self.dim(), rng)) {
                    *x += e;
                }
                Ok(g)
            }
        }
    }
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                z
            })
            .collect();
        let norm = norm_sq(&v).sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}
