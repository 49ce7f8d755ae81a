//! Synthetic labelled embedding sets with a nested gender > nation > identity
//! structure.
//!
//! Centers sit on three orthogonal axes: genders along axis 0 spaced by
//! `s_gender`, nations within a gender along axis 1 spaced by `s_nation`, and
//! identities within a nation along axis 2 spaced by `s_identity`. Points are
//! uniform in a ball of radius `radius` around their identity center.
//!
//! Nation classes are specific to one gender, so every level is a refinement
//! of the one above it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::embedding_io::{EmbeddingSet, IoError, LabelTable};

pub const CATEGORIES: [&str; 3] = ["identity", "gender", "nationality"];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(
        "separation guarantee fails: {0} (pass allow_overlap to generate anyway)"
    )]
    Overlap(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub genders: usize,
    pub nations_per_gender: usize,
    pub identities_per_nation: usize,
    pub points_per_identity: usize,
    pub dim: usize,
    pub s_gender: f64,
    pub s_nation: f64,
    pub s_identity: f64,
    pub radius: f64,
    pub seed: u64,
    pub allow_overlap: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            genders: 2,
            nations_per_gender: 3,
            identities_per_nation: 2,
            points_per_identity: 20,
            dim: 8,
            s_gender: 100.0,
            s_nation: 30.0,
            s_identity: 10.0,
            radius: 1.0,
            seed: 0,
            allow_overlap: false,
        }
    }
}

impl SynthConfig {
    pub fn point_count(&self) -> usize {
        self.genders * self.nations_per_gender * self.identities_per_nation * self.points_per_identity
    }

    /// Single linkage recovers every level exactly when, at each level, the
    /// closest approach of two sibling groups (spacing minus `2r`) exceeds
    /// the longest link needed inside a group (child spacing plus `2r`, or
    /// the ball diameter `2r` at the identity level).
    pub fn validate(&self) -> Result<(), SynthError> {
        let invalid = |m: &str| Err(SynthError::Invalid(m.to_string()));
        if self.genders == 0
            || self.nations_per_gender == 0
            || self.identities_per_nation == 0
            || self.points_per_identity == 0
        {
            return invalid("every count must be at least 1");
        }
        if self.dim < 3 {
            return invalid("dim must be at least 3 (one axis per level)");
        }
        for (name, v) in [
            ("s_gender", self.s_gender),
            ("s_nation", self.s_nation),
            ("s_identity", self.s_identity),
            ("radius", self.radius),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SynthError::Invalid(format!("{name} must be positive and finite")));
            }
        }
        if self.allow_overlap {
            return Ok(());
        }
        let r2 = 2.0 * self.radius;
        if !(self.s_identity - r2 > r2) {
            return Err(SynthError::Overlap(format!(
                "s_identity {} must exceed 4r = {}",
                self.s_identity,
                2.0 * r2
            )));
        }
        if !(self.s_nation - r2 > self.s_identity + r2) {
            return Err(SynthError::Overlap(format!(
                "s_nation {} must exceed s_identity + 4r = {}",
                self.s_nation,
                self.s_identity + 2.0 * r2
            )));
        }
        if !(self.s_gender - r2 > self.s_nation + r2) {
            return Err(SynthError::Overlap(format!(
                "s_gender {} must exceed s_nation + 4r = {}",
                self.s_gender,
                self.s_nation + 2.0 * r2
            )));
        }
        Ok(())
    }
}

fn uniform_in_ball(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<f64> {
    loop {
        let dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            let u: f64 = rng.random();
            let scale = radius * u.powf(1.0 / dim as f64) / norm;
            return dir.into_iter().map(|v| v * scale).collect();
        }
    }
}

/// Generates the embedding set and its `identity,gender,nationality` labels.
pub fn generate(cfg: &SynthConfig) -> Result<(EmbeddingSet, LabelTable), SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.point_count();
    let mut ids = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * cfg.dim);
    let mut entries = Vec::with_capacity(n);
    let mut identity = 0;
    for g in 0..cfg.genders {
        for j in 0..cfg.nations_per_gender {
            let nation = g * cfg.nations_per_gender + j;
            for k in 0..cfg.identities_per_nation {
                let mut center = vec![0.0; cfg.dim];
                center[0] = g as f64 * cfg.s_gender;
                center[1] = j as f64 * cfg.s_nation;
                center[2] = k as f64 * cfg.s_identity;
                for _ in 0..cfg.points_per_identity {
                    let offset = uniform_in_ball(&mut rng, cfg.dim, cfg.radius);
                    data.extend(center.iter().zip(&offset).map(|(c, o)| c + o));
                    let id = format!("pt{:06}", ids.len());
                    entries.push((
                        id.clone(),
                        vec![format!("spk{identity:04}"), format!("gender{g}"), format!("nation{nation:02}")],
                    ));
                    ids.push(id);
                }
                identity += 1;
            }
        }
    }
    let set = EmbeddingSet::new(ids, data, cfg.dim)?;
    let labels = LabelTable::new(CATEGORIES.iter().map(|c| c.to_string()).collect(), entries)?;
    Ok((set, labels))
}
