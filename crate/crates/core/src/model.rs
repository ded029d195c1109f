//! Model parameters and initial data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Field, Grid};

pub const DEFAULT_V_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("{name} must be {constraint} (got {value})")]
    Invalid {
        name: &'static str,
        constraint: &'static str,
        value: f64,
    },
}

fn check(ok: bool, name: &'static str, constraint: &'static str, value: f64) -> Result<(), ParamError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(ParamError::Invalid {
            name,
            constraint,
            value,
        })
    }
}

/// Exponents, decay, basal production and diffusion rates of the
/// activator-inhibitor system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    pub b1: f64,
    pub b2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub d1: f64,
    pub d2: f64,
    /// Smallest inhibitor value the reaction terms accept when `r > 0` or `s > 0`.
    #[serde(default = "default_v_floor")]
    pub v_floor: f64,
}

fn default_v_floor() -> f64 {
    DEFAULT_V_FLOOR
}

impl ModelParams {
    /// The reduced kinetics `u^2/v - b u`, `u^2 - v` of the pattern experiments.
    pub fn reduced(b: f64, d1: f64, d2: f64) -> Self {
        ModelParams {
            p: 2.0,
            q: 2.0,
            r: 1.0,
            s: 0.0,
            b1: b,
            b2: 1.0,
            sigma1: 0.0,
            sigma2: 0.0,
            d1,
            d2,
            v_floor: DEFAULT_V_FLOOR,
        }
    }

    /// Reference pattern-forming configuration: `b = 0.5`, `d1 = 0.3`, `d2 = 30`.
    pub fn reference() -> Self {
        Self::reduced(0.5, 0.3, 30.0)
    }

    pub fn is_reduced(&self) -> bool {
        self.p == 2.0
            && self.q == 2.0
            && self.r == 1.0
            && self.s == 0.0
            && self.b2 == 1.0
            && self.sigma1 == 0.0
            && self.sigma2 == 0.0
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        check(self.p >= 0.0, "p", ">= 0", self.p)?;
        check(self.q >= 0.0, "q", ">= 0", self.q)?;
        check(self.r >= 0.0, "r", ">= 0", self.r)?;
        check(self.s >= 0.0, "s", ">= 0", self.s)?;
        check(self.b1 > 0.0, "b1", "> 0", self.b1)?;
        check(self.b2 > 0.0, "b2", "> 0", self.b2)?;
        check(self.sigma1 >= 0.0, "sigma1", ">= 0", self.sigma1)?;
        check(self.sigma2 >= 0.0, "sigma2", ">= 0", self.sigma2)?;
        check(self.d1 > 0.0, "d1", "> 0", self.d1)?;
        check(self.d2 > 0.0, "d2", "> 0", self.d2)?;
        check(self.v_floor > 0.0, "v_floor", "> 0", self.v_floor)?;
        Ok(())
    }
}

/// Constant base level plus uniform noise on `[-noise_amp, noise_amp]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialCondition {
    pub base_u: f64,
    pub base_v: f64,
    pub noise_amp: f64,
    pub seed: u64,
}

impl InitialCondition {
    /// `0.1 +- 0.01` for both species.
    pub fn reference(seed: u64) -> Self {
        InitialCondition {
            base_u: 0.1,
            base_v: 0.1,
            noise_amp: 0.01,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        check(self.noise_amp >= 0.0, "noise_amp", ">= 0", self.noise_amp)?;
        check(
            self.base_u - self.noise_amp > 0.0,
            "base_u - noise_amp",
            "> 0",
            self.base_u - self.noise_amp,
        )?;
        check(
            self.base_v - self.noise_amp > 0.0,
            "base_v - noise_amp",
            "> 0",
            self.base_v - self.noise_amp,
        )?;
        Ok(())
    }
}

/// Builds `(u0, v0)`. Each species draws from its own ChaCha stream so the
/// fields do not depend on each other's length.
pub fn init_fields(grid: Grid, ic: &InitialCondition) -> Result<(Field, Field), ParamError> {
    ic.validate()?;
    let draw = |base: f64, stream: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(ic.seed);
        rng.set_stream(stream);
        let values = (0..grid.len())
            .map(|_| {
                if ic.noise_amp == 0.0 {
                    base
                } else {
                    base + ic.noise_amp * rng.random_range(-1.0..=1.0)
                }
            })
            .collect();
        Field::from_values(grid, values).expect("length matches grid")
    };
    Ok((draw(ic.base_u, 0), draw(ic.base_v, 1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(20, 10, 20.0, 10.0).unwrap()
    }

    #[test]
    fn reference_noise_stays_in_band() {
        let ic = InitialCondition::reference(7);
        let (u, v) = init_fields(grid(), &ic).unwrap();
        for &x in u.values().iter().chain(v.values()) {
            assert!((0.09..=0.11).contains(&x), "{x}");
        }
    }

    #[test]
    fn zero_noise_is_constant() {
        let ic = InitialCondition {
            base_u: 0.3,
            base_v: 0.7,
            noise_amp: 0.0,
            seed: 1,
        };
        let (u, v) = init_fields(grid(), &ic).unwrap();
        assert!(u.values().iter().all(|&x| x == 0.3));
        assert!(v.values().iter().all(|&x| x == 0.7));
    }

    #[test]
    fn same_seed_same_bits() {
        let ic = InitialCondition::reference(42);
        let a = init_fields(grid(), &ic).unwrap();
        let b = init_fields(grid(), &ic).unwrap();
        let bits = |f: &Field| f.values().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.0), bits(&b.0));
        assert_eq!(bits(&a.1), bits(&b.1));
        assert_ne!(bits(&a.0), bits(&a.1));
    }

    #[test]
    fn non_positive_initial_data_rejected() {
        let ic = InitialCondition {
            base_u: 0.01,
            base_v: 0.1,
            noise_amp: 0.01,
            seed: 0,
        };
        assert!(init_fields(grid(), &ic).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::reference().validate().is_ok());
        let mut p = ModelParams::reference();
        p.d2 = 0.0;
        assert!(p.validate().is_err());
        p = ModelParams::reference();
        p.s = -1.0;
        assert!(p.validate().is_err());
    }
}
