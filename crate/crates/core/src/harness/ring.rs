//! Interferers scattered uniformly over a ring around the receiver.
//!
//! Node `k` belongs to skeleton class `k mod K`. Each node's variance follows
//! the power law `ref * (d / r_out)^(-alpha)`, so the farthest possible node
//! sees `reference_variance`. An arrival of a class takes the variance of one
//! of that class's nodes, chosen uniformly.

use crate::interference::InterfererClass;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingClass {
    pub length: usize,
    pub load: f64,
}

fn default_reference_variance() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingConfig {
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub path_loss_exp: f64,
    pub num_nodes: usize,
    /// Variance of a node at the outer radius.
    #[serde(default = "default_reference_variance")]
    pub reference_variance: f64,
    pub classes: Vec<RingClass>,
}

impl RingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.inner_radius > 0.0 && self.inner_radius <= self.outer_radius && self.outer_radius.is_finite()) {
            return Err(Error::config(format!(
                "ring radii must satisfy 0 < inner <= outer, got {} and {}",
                self.inner_radius, self.outer_radius
            )));
        }
        if !(self.path_loss_exp.is_finite() && self.path_loss_exp >= 0.0) {
            return Err(Error::config("path loss exponent must be non-negative"));
        }
        if !(self.reference_variance > 0.0 && self.reference_variance.is_finite()) {
            return Err(Error::config("reference variance must be positive"));
        }
        if self.classes.is_empty() || self.num_nodes < self.classes.len() {
            return Err(Error::config("the ring needs at least one node per class"));
        }
        for c in &self.classes {
            InterfererClass::new(c.length, 1.0, c.load)?;
        }
        Ok(())
    }

    /// Variance of a node at distance `d`.
    pub fn variance_at(&self, d: f64) -> f64 {
        self.reference_variance * (d / self.outer_radius).powf(-self.path_loss_exp)
    }
}

/// Distance of a point uniform over the ring area.
pub fn sample_distance<R: Rng + ?Sized>(inner: f64, outer: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    (inner * inner + u * (outer * outer - inner * inner)).sqrt()
}

/// Draws node positions and returns the classes with their node variances.
pub fn generate_ring_scenario<R: Rng + ?Sized>(cfg: &RingConfig, rng: &mut R) -> Result<Vec<InterfererClass>> {
    cfg.validate()?;
    let k = cfg.classes.len();
    let mut nodes: Vec<Vec<f64>> = vec![Vec::new(); k];
    for n in 0..cfg.num_nodes {
        let d = sample_distance(cfg.inner_radius, cfg.outer_radius, rng);
        nodes[n % k].push(cfg.variance_at(d));
    }
    cfg.classes
        .iter()
        .zip(nodes)
        .map(|(c, v)| InterfererClass::new(c.length, 1.0, c.load)?.with_node_variances(v))
        .collect()
}
