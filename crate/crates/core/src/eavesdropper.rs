//! Passive eavesdropper: clusters queries into two trajectories and keeps an
//! incentive-weighted proportional belief that trajectory 1 is the learning
//! one.

use serde::{Deserialize, Serialize};

use crate::gradient::QueryKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Trajectory {
    One,
    Two,
}

/// How observed queries are assigned to a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum Labeler {
    /// Perfect clustering: learning queries form trajectory 1.
    GroundTruth,
    /// Queries with `w·q + b > 0` form trajectory 1.
    Hyperplane { normal: Vec<f64>, offset: f64 },
}

impl Labeler {
    /// Hyperplane through the midpoint of `a` and `b`, with `a` on the
    /// positive side.
    pub fn bisector(a: &[f64], b: &[f64]) -> Self {
        let normal: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let offset = -normal
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * 0.5 * (x + y))
            .sum::<f64>();
        Labeler::Hyperplane { normal, offset }
    }

    /// `producer` is only consulted by the ground-truth labeler.
    pub fn classify(&self, query: &[f64], producer: QueryKind) -> Trajectory {
        match self {
            Labeler::GroundTruth => match producer {
                QueryKind::Learn => Trajectory::One,
                QueryKind::Obfuscate => Trajectory::Two,
            },
            Labeler::Hyperplane { normal, offset } => {
                let side: f64 = normal.iter().zip(query).map(|(w, q)| w * q).sum::<f64>() + offset;
                if side > 0.0 {
                    Trajectory::One
                } else {
                    Trajectory::Two
                }
            }
        }
    }
}

/// `δ = Σ iₜ·𝟙(qₜ ∈ J₁) / Σ iₜ`, with `δ = ½` before any observation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Belief {
    weighted_one: f64,
    total: f64,
}

impl Belief {
    pub fn new() -> Self {
        Self::default()
    }

    /// Batch estimate over a sequence of `(label, incentive)` observations.
    pub fn from_observations<I>(observations: I) -> Self
    where
        I: IntoIterator<Item = (Trajectory, f64)>,
    {
        let mut belief = Self::new();
        for (label, incentive) in observations {
            belief.observe(label, incentive);
        }
        belief
    }

    /// Adds one observed query with positive incentive.
    pub fn observe(&mut self, label: Trajectory, incentive: f64) {
        assert!(
            incentive > 0.0,
            "incentive must be positive, got {incentive}"
        );
        self.total += incentive;
        if label == Trajectory::One {
            self.weighted_one += incentive;
        }
    }

    pub fn weighted_one(&self) -> f64 {
        self.weighted_one
    }

    /// Total incentive observed so far.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn delta(&self) -> f64 {
        if self.total > 0.0 {
            self.weighted_one / self.total
        } else {
            0.5
        }
    }

    /// Maximum a posteriori trajectory; a tie goes to trajectory 2.
    pub fn map_choice(&self) -> Trajectory {
        if self.delta() > 0.5 {
            Trajectory::One
        } else {
            Trajectory::Two
        }
    }
}
