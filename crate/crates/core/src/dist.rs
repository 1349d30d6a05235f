//! Unit-mean distributions used for job sizes and (after scaling) for
//! interarrival gaps.
//!
//! Heavy-tailed shapes beyond finite variance are accepted but untested.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Tolerance on the analytic mean check.
pub const UNIT_MEAN_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum UnitDist {
    /// Exponential with rate one.
    Exp,
    /// Constant one.
    Det,
    /// Uniform on `[0, 2]`.
    Uniform,
    /// Bounded Pareto with tail index `shape` on `[lower, ratio * lower]`,
    /// `lower` chosen so that the mean is one.
    Pareto { shape: f64, ratio: f64, lower: f64 },
}

impl UnitDist {
    /// Bounded Pareto normalized to unit mean.
    pub fn pareto(shape: f64, ratio: f64) -> Result<Self, ModelError> {
        if !(shape > 0.0 && shape.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "pareto shape must be positive, got {shape}"
            )));
        }
        if !(ratio > 1.0 && ratio.is_finite()) {
            return Err(ModelError::InvalidParameter(format!(
                "pareto ratio must exceed 1, got {ratio}"
            )));
        }
        let lower = 1.0 / pareto_mean_factor(shape, ratio);
        Ok(UnitDist::Pareto {
            shape,
            ratio,
            lower,
        })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            UnitDist::Exp => "exp",
            UnitDist::Det => "det",
            UnitDist::Uniform => "uniform",
            UnitDist::Pareto { .. } => "pareto",
        }
    }

    /// Analytic mean.
    pub fn mean(&self) -> f64 {
        match *self {
            UnitDist::Exp | UnitDist::Det | UnitDist::Uniform => 1.0,
            UnitDist::Pareto {
                shape,
                ratio,
                lower,
            } => lower * pareto_mean_factor(shape, ratio),
        }
    }

    /// Errors unless the analytic mean is one.
    pub fn check_unit_mean(&self) -> Result<(), ModelError> {
        let mean = self.mean();
        if (mean - 1.0).abs() > UNIT_MEAN_TOLERANCE {
            return Err(ModelError::InvalidParameter(format!(
                "{} distribution has mean {mean}, expected 1",
                self.tag()
            )));
        }
        Ok(())
    }

    /// `P(W >= x)`, computed in closed form.
    pub fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match *self {
            UnitDist::Exp => (-x).exp(),
            UnitDist::Det => {
                if x <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            UnitDist::Uniform => ((2.0 - x) / 2.0).clamp(0.0, 1.0),
            UnitDist::Pareto {
                shape,
                ratio,
                lower,
            } => {
                let upper = lower * ratio;
                if x <= lower {
                    1.0
                } else if x > upper {
                    0.0
                } else {
                    let tail = ratio.powf(-shape);
                    ((lower / x).powf(shape) - tail) / (1.0 - tail)
                }
            }
        }
    }

    /// Inverse-transform sample from a uniform `u` in `[0, 1)`.
    pub fn sample(&self, u: f64) -> f64 {
        match *self {
            // 1 - u lies in (0, 1], so the log is finite
            UnitDist::Exp => -(1.0 - u).ln(),
            UnitDist::Det => 1.0,
            UnitDist::Uniform => 2.0 * u,
            UnitDist::Pareto {
                shape,
                ratio,
                lower,
            } => {
                let tail = ratio.powf(-shape);
                lower * (1.0 - u * (1.0 - tail)).powf(-1.0 / shape)
            }
        }
    }
}

/// Mean of a bounded Pareto on `[1, ratio]`.
fn pareto_mean_factor(shape: f64, ratio: f64) -> f64 {
    if (shape - 1.0).abs() < 1e-12 {
        ratio * ratio.ln() / (ratio - 1.0)
    } else {
        shape / (shape - 1.0) * (1.0 - ratio.powf(1.0 - shape)) / (1.0 - ratio.powf(-shape))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn midpoint_mean(d: &UnitDist, steps: usize) -> f64 {
        // E[W] = integral over u of the quantile function
        (0..steps)
            .map(|k| d.sample((k as f64 + 0.5) / steps as f64))
            .sum::<f64>()
            / steps as f64
    }

    #[test]
    fn every_tag_has_unit_mean() {
        let dists = [
            UnitDist::Exp,
            UnitDist::Det,
            UnitDist::Uniform,
            UnitDist::pareto(2.5, 100.0).unwrap(),
            UnitDist::pareto(1.0, 50.0).unwrap(),
            UnitDist::pareto(0.7, 1000.0).unwrap(),
        ];
        for d in dists {
            d.check_unit_mean().unwrap();
        }
    }

    #[test]
    fn quadrature_agrees_with_analytic_mean() {
        for d in [UnitDist::Uniform, UnitDist::pareto(2.5, 100.0).unwrap()] {
            let m = midpoint_mean(&d, 2_000_000);
            assert!((m - 1.0).abs() < 1e-4, "{d:?}: {m}");
        }
        // exponential quantile is unbounded at u -> 1, so the midpoint rule converges slowly
        let m = midpoint_mean(&UnitDist::Exp, 2_000_000);
        assert!((m - 1.0).abs() < 1e-5, "{m}");
    }

    #[test]
    fn survival_at_half() {
        assert!((UnitDist::Exp.survival(0.5) - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(UnitDist::Det.survival(0.5), 1.0);
        assert_eq!(UnitDist::Uniform.survival(0.5), 0.75);
        assert_eq!(UnitDist::Det.survival(1.5), 0.0);
    }

    #[test]
    fn pareto_survival_matches_sampler() {
        let d = UnitDist::pareto(1.5, 20.0).unwrap();
        let steps = 200_000;
        let x = 0.9;
        let empirical = (0..steps)
            .filter(|&k| d.sample((k as f64 + 0.5) / steps as f64) >= x)
            .count() as f64
            / steps as f64;
        assert!((empirical - d.survival(x)).abs() < 1e-4);
    }

    #[test]
    fn pareto_rejects_bad_parameters() {
        assert!(UnitDist::pareto(0.0, 10.0).is_err());
        assert!(UnitDist::pareto(2.0, 1.0).is_err());
    }
}
