use crate::error::{Error, Result};
use crate::theory::{saturation_check, stepsize_min_term, RateConstants};

/// Step-size rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSizeSchedule {
    Constant(f64),
    /// `γ_k = 1/(⌈k/m⌉ L)` with `k` the 1-based component-access index.
    Vanishing { lipschitz: f64, m: usize },
    /// Starts at `start`, re-evaluated every `check_interval` iterations by
    /// [`adaptive_gamma`], never exceeding `max`.
    AdaptiveRamp {
        start: f64,
        max: f64,
        ramp: f64,
        check_interval: usize,
    },
}

impl StepSizeSchedule {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        match *self {
            StepSizeSchedule::Constant(g) => positive("step size", g),
            StepSizeSchedule::Vanishing { lipschitz, m } => {
                positive("L", lipschitz)?;
                if m == 0 {
                    return Err(Error::invalid("m must be positive"));
                }
                Ok(())
            }
            StepSizeSchedule::AdaptiveRamp {
                start,
                max,
                ramp,
                check_interval,
            } => {
                positive("start step", start)?;
                positive("max step", max)?;
                if !(ramp > 1.0 && ramp.is_finite()) {
                    return Err(Error::invalid(format!("ramp factor must exceed 1, got {ramp}")));
                }
                if check_interval == 0 {
                    return Err(Error::invalid("check interval must be positive"));
                }
                Ok(())
            }
        }
    }

    /// Step for the component access with 1-based index `access`, given the
    /// current adaptive value.
    pub fn gamma(&self, access: usize, adaptive_current: f64) -> f64 {
        match *self {
            StepSizeSchedule::Constant(g) => g,
            StepSizeSchedule::Vanishing { lipschitz, m } => {
                let epoch = access.max(1).div_ceil(m);
                1.0 / (epoch as f64 * lipschitz)
            }
            StepSizeSchedule::AdaptiveRamp { max, .. } => adaptive_current.min(max),
        }
    }

    pub fn initial_gamma(&self) -> f64 {
        match *self {
            StepSizeSchedule::AdaptiveRamp { start, max, .. } => start.min(max),
            other => other.gamma(1, 0.0),
        }
    }
}

/// Constants needed by [`adaptive_gamma`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveConstants {
    pub mu: f64,
    pub lipschitz: f64,
    pub hessian_lipschitz: f64,
    /// Delay bound `K`.
    pub k: usize,
}

/// Next adaptive step. Returns `2/(μ+L)` when `L_H = 0` or when the
/// saturation inequality holds at `V = v_estimate`; otherwise grows `current`
/// by `ramp` but not beyond the constant-step bound at `V`. Never decreases
/// and never exceeds `2/(μ+L)`.
pub fn adaptive_gamma(current: f64, c: &AdaptiveConstants, v_estimate: f64, ramp: f64) -> f64 {
    let max = 2.0 / (c.mu + c.lipschitz);
    if c.hessian_lipschitz == 0.0 {
        return max;
    }
    let q = c.lipschitz / c.mu;
    let q_h = c.lipschitz / c.hessian_lipschitz;
    if saturation_check(v_estimate, c.k, q, q_h) {
        return max;
    }
    let bound = stepsize_min_term(&RateConstants {
        mu: c.mu,
        lipschitz: c.lipschitz,
        hessian_lipschitz: c.hessian_lipschitz,
        k: c.k,
        v_s: v_estimate,
        epsilon: 0.0,
    })
    .unwrap_or(current);
    current.max((current * ramp).min(bound)).min(max)
}

#[cfg(test)]
mod tests {
    use super::*;

    const C: AdaptiveConstants = AdaptiveConstants {
        mu: 1.0,
        lipschitz: 100.0,
        hessian_lipschitz: 50.0,
        k: 10,
    };

    #[test]
    fn vanishing_epochs() {
        let s = StepSizeSchedule::Vanishing { lipschitz: 4.0, m: 7 };
        assert_eq!(s.gamma(1, 0.0), 0.25);
        assert_eq!(s.gamma(7, 0.0), 0.25);
        assert_eq!(s.gamma(8, 0.0), 0.125);
        assert_eq!(s.gamma(2 * 7 + 1, 0.0), 1.0 / 12.0);
    }

    #[test]
    fn quadratic_or_zero_gap_saturates() {
        let max = 2.0 / 101.0;
        let quad = AdaptiveConstants {
            hessian_lipschitz: 0.0,
            ..C
        };
        assert_eq!(adaptive_gamma(1e-6, &quad, 1e6, 2.0), max);
        assert_eq!(adaptive_gamma(1e-6, &C, 0.0, 2.0), max);
    }

    #[test]
    fn ramp_is_monotone_and_capped() {
        let mut g = 1e-9;
        let mut v = 10.0;
        for _ in 0..200 {
            let next = adaptive_gamma(g, &C, v, 1.5);
            assert!(next >= g);
            assert!(next <= 2.0 / 101.0);
            g = next;
            v *= 0.7;
        }
        assert_eq!(g, 2.0 / 101.0);
        // Growth is limited by the bound at a large gap.
        let held = adaptive_gamma(1e-9, &C, 1e6, 1e9);
        assert!(held < 2.0 / 101.0);
    }

    #[test]
    fn validation() {
        assert!(StepSizeSchedule::Constant(0.0).validate().is_err());
        assert!(StepSizeSchedule::Vanishing { lipschitz: 1.0, m: 0 }.validate().is_err());
        let bad_ramp = StepSizeSchedule::AdaptiveRamp {
            start: 1.0,
            max: 2.0,
            ramp: 1.0,
            check_interval: 1,
        };
        assert!(bad_ramp.validate().is_err());
    }
}
