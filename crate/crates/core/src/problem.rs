use thiserror::Error;

use crate::birth::BirthFunction;
use crate::kernels::Kernel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("{name} must be {expected}, got {value}")]
    InvalidParameter {
        name: &'static str,
        expected: &'static str,
        value: f64,
    },
    #[error("either a speed c or eps = 1/c^2 is required")]
    MissingSpeed,
    #[error("speed {speed} and eps {eps} disagree (expected eps = 1/c^2)")]
    Inconsistent { speed: f64, eps: f64 },
}

/// One traveling-wave problem: kernel, birth function, delay `h`, decay
/// `q`, and the speed through `ε = 1/c²`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub kernel: Kernel,
    pub g: BirthFunction,
    pub h: f64,
    pub q: f64,
    pub eps: f64,
}

impl ProblemSpec {
    pub fn new(
        kernel: Kernel,
        g: BirthFunction,
        h: f64,
        q: f64,
        speed: Option<f64>,
        eps: Option<f64>,
    ) -> Result<Self, ProblemError> {
        if !(h >= 0.0 && h.is_finite()) {
            return Err(ProblemError::InvalidParameter { name: "h", expected: "nonnegative", value: h });
        }
        if !(q > 0.0 && q.is_finite()) {
            return Err(ProblemError::InvalidParameter { name: "q", expected: "positive", value: q });
        }
        let eps = match (speed, eps) {
            (None, None) => return Err(ProblemError::MissingSpeed),
            (Some(c), e) => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(ProblemError::InvalidParameter { name: "speed", expected: "positive", value: c });
                }
                let from_c = 1.0 / (c * c);
                if let Some(e) = e {
                    if (e - from_c).abs() > 1e-12 * from_c.max(e.abs()) {
                        return Err(ProblemError::Inconsistent { speed: c, eps: e });
                    }
                }
                from_c
            }
            (None, Some(e)) => e,
        };
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(ProblemError::InvalidParameter { name: "eps", expected: "positive", value: eps });
        }
        Ok(ProblemSpec { kernel, g, h, q, eps })
    }

    pub fn with_speed(kernel: Kernel, g: BirthFunction, h: f64, c: f64) -> Result<Self, ProblemError> {
        Self::new(kernel, g, h, 1.0, Some(c), None)
    }

    pub fn with_eps(kernel: Kernel, g: BirthFunction, h: f64, eps: f64) -> Result<Self, ProblemError> {
        Self::new(kernel, g, h, 1.0, None, Some(eps))
    }

    pub fn speed(&self) -> f64 {
        1.0 / self.eps.sqrt()
    }

    /// Same problem at another speed.
    pub fn at_speed(&self, c: f64) -> Result<Self, ProblemError> {
        Self::new(self.kernel.clone(), self.g.clone(), self.h, self.q, Some(c), None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parts() -> (Kernel, BirthFunction) {
        (Kernel::dirac(0.0), BirthFunction::nicholson(2.0).unwrap())
    }

    #[test]
    fn speed_and_eps_must_agree() {
        let (k, g) = parts();
        let p = ProblemSpec::new(k.clone(), g.clone(), 1.0, 1.0, Some(2.0), Some(0.25)).unwrap();
        assert_eq!(p.eps, 0.25);
        assert_eq!(p.speed(), 2.0);
        assert!(matches!(
            ProblemSpec::new(k.clone(), g.clone(), 1.0, 1.0, Some(2.0), Some(0.26)),
            Err(ProblemError::Inconsistent { .. })
        ));
        assert_eq!(ProblemSpec::new(k, g, 1.0, 1.0, None, None).unwrap_err(), ProblemError::MissingSpeed);
    }
}
