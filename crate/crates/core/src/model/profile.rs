use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Analytic geometry profile: a nozzle cross-section or a bottom topography.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `base + amplitude * tanh(slope * x + shift)`
    Tanh {
        base: f64,
        amplitude: f64,
        slope: f64,
        shift: f64,
    },
    /// `amplitude * sin^2(pi * frequency * x) + offset`
    SinSquared {
        amplitude: f64,
        frequency: f64,
        offset: f64,
    },
    /// `values[k]` on `[breaks[k-1], breaks[k])`, extended as constants
    /// beyond the outermost breaks.
    Piecewise {
        breaks: Vec<f64>,
        values: Vec<f64>,
    },
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }
    }

    pub fn piecewise(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let p = Profile::Piecewise { breaks, values };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if let Profile::Piecewise { breaks, values } = self {
            if values.len() != breaks.len() + 1 {
                return Err(Error::Parameter(format!(
                    "piecewise profile needs {} values for {} breaks, got {}",
                    breaks.len() + 1,
                    breaks.len(),
                    values.len()
                )));
            }
            if breaks.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Parameter(
                    "piecewise breaks must be strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Tanh {
                base,
                amplitude,
                slope,
                shift,
            } => base + amplitude * (slope * x + shift).tanh(),
            Profile::SinSquared {
                amplitude,
                frequency,
                offset,
            } => {
                let s = (PI * frequency * x).sin();
                amplitude * s * s + offset
            }
            Profile::Piecewise { breaks, values } => {
                let k = breaks.partition_point(|&b| b <= x);
                values[k]
            }
        }
    }

    /// Discontinuity locations, if any.
    pub fn jumps(&self) -> &[f64] {
        match self {
            Profile::Piecewise { breaks, .. } => breaks,
            _ => &[],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piecewise_lookup() {
        let p = Profile::piecewise(vec![7.5, 12.5], vec![2.0, 1.0, 2.0]).unwrap();
        assert_eq!(p.eval(0.05), 2.0);
        assert_eq!(p.eval(7.45), 2.0);
        assert_eq!(p.eval(7.55), 1.0);
        assert_eq!(p.eval(12.55), 2.0);
        assert_eq!(p.eval(-3.0), 2.0);
        assert!(Profile::piecewise(vec![1.0], vec![1.0]).is_err());
        assert!(Profile::piecewise(vec![2.0, 1.0], vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn analytic_profiles() {
        let t = Profile::Tanh {
            base: 0.976,
            amplitude: -0.748,
            slope: 0.8,
            shift: -4.0,
        };
        assert!((t.eval(5.0) - 0.976).abs() < 1e-15);
        let s = Profile::SinSquared {
            amplitude: 1.0,
            frequency: 1.0,
            offset: -10.0,
        };
        assert!((s.eval(0.5) + 9.0).abs() < 1e-15);
    }

    #[test]
    fn serde_round_trip() {
        let p = Profile::piecewise(vec![0.0], vec![-2.0, -1.0]).unwrap();
        let text = toml::to_string(&p).unwrap();
        let back: Profile = toml::from_str(&text).unwrap();
        assert_eq!(p, back);
    }
}
