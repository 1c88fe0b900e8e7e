use serde::{Deserialize, Serialize};

use super::DiffusionError;

/// Lower clip applied to sampled diffusion times so the loss weight stays bounded.
pub const T_MIN: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NoiseSchedule {
    /// alpha(t) = 1 - t
    #[default]
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleValue {
    pub alpha: f64,
    pub alpha_prime: f64,
    /// -alpha'(t) / (1 - alpha(t))
    pub weight: f64,
}

impl NoiseSchedule {
    pub fn alpha(self, t: f64) -> f64 {
        match self {
            NoiseSchedule::Linear => 1.0 - t,
        }
    }

    pub fn alpha_prime(self, _t: f64) -> f64 {
        match self {
            NoiseSchedule::Linear => -1.0,
        }
    }

    pub fn eval(self, t: f64) -> Result<ScheduleValue, DiffusionError> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(DiffusionError::OutOfRange(t));
        }
        let alpha = self.alpha(t);
        let alpha_prime = self.alpha_prime(t);
        Ok(ScheduleValue { alpha, alpha_prime, weight: -alpha_prime / (1.0 - alpha) })
    }

    /// Probability that a token is masked at time `t`.
    pub fn mask_prob(self, t: f64) -> f64 {
        1.0 - self.alpha(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_values() {
        let s = NoiseSchedule::Linear;
        let v = s.eval(1.0).unwrap();
        assert_eq!((v.alpha, v.alpha_prime, v.weight), (0.0, -1.0, 1.0));
        let v = s.eval(0.5).unwrap();
        assert_eq!((v.alpha, v.weight), (0.5, 2.0));
        assert_eq!(s.eval(0.25).unwrap().weight, 4.0);
    }

    #[test]
    fn out_of_range() {
        let s = NoiseSchedule::Linear;
        assert_eq!(s.eval(0.0), Err(DiffusionError::OutOfRange(0.0)));
        assert!(s.eval(1.5).is_err());
        assert!(s.eval(f64::NAN).is_err());
    }

    #[test]
    fn alpha_decreasing_and_weight_finite() {
        let s = NoiseSchedule::Linear;
        assert_eq!(s.alpha(0.0), 1.0);
        let mut prev = f64::INFINITY;
        for i in 1..=1000 {
            let t = i as f64 / 1000.0;
            let a = s.alpha(t);
            assert!(a < prev);
            prev = a;
            assert!(s.eval(t).unwrap().weight.is_finite());
        }
    }
}
