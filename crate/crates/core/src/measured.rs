use serde::{Deserialize, Serialize};

/// A value with a one-sigma uncertainty, propagated to first order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub sigma: f64,
}

impl Measured {
    pub const fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }

    pub const fn exact(value: f64) -> Self {
        Self { value, sigma: 0.0 }
    }

    /// Whether `x` lies within `k` sigma of the value.
    pub fn contains(&self, x: f64, k: f64) -> bool {
        (x - self.value).abs() <= k * self.sigma
    }

    pub fn relative(&self) -> f64 {
        self.sigma / self.value.abs()
    }
}

impl std::fmt::Display for Measured {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match f.precision() {
            Some(p) => write!(f, "{:.*} ± {:.*}", p, self.value, p, self.sigma),
            None => write!(f, "{} ± {}", self.value, self.sigma),
        }
    }
}
