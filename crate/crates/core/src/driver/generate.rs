use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Instance, MachineId};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Sizes uniform on `{1/d, ..., d/d}`.
    Uniform,
    /// At least half of the jobs (rounded up) in `(5/6, 1]`, the rest below.
    HugeHeavy,
    /// Small, medium and huge classes drawn with equal probability.
    Mixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub machines: usize,
    pub jobs: usize,
    pub preset: Preset,
    /// Probability that a machine is in `Γ(j)`.
    pub density: f64,
    pub seed: u64,
    /// Size denominator.
    pub denominator: i64,
}

impl GenSpec {
    pub fn new(machines: usize, jobs: usize, preset: Preset, density: f64, seed: u64) -> Self {
        GenSpec {
            machines,
            jobs,
            preset,
            density,
            seed,
            denominator: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("need at least one machine and one job")]
    Empty,
    #[error("density must lie in (0, 1], got {0}")]
    Density(f64),
    #[error("denominator must be at least 6, got {0}")]
    Denominator(i64),
}

/// Numerators in `lo..=hi` over `d` for the three classes.
fn class_range(d: i64, class: usize) -> (i64, i64) {
    let half = d / 2;
    let five_sixths = 5 * d / 6;
    match class {
        0 => (1, half),
        1 => (half + 1, five_sixths),
        _ => (five_sixths + 1, d),
    }
}

/// Reproducible instance from a ChaCha stream; jobs are named `j1..jn` and
/// every `Γ(j)` is nonempty.
pub fn generate_instance<S: Scalar>(spec: &GenSpec) -> Result<Instance<S>, GenError> {
    if spec.machines == 0 || spec.jobs == 0 {
        return Err(GenError::Empty);
    }
    if !(spec.density > 0.0 && spec.density <= 1.0) {
        return Err(GenError::Density(spec.density));
    }
    let d = spec.denominator;
    if d < 6 {
        return Err(GenError::Denominator(d));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let huge_quota = spec.jobs.div_ceil(2);
    let mut jobs = Vec::with_capacity(spec.jobs);
    for k in 0..spec.jobs {
        let num = match spec.preset {
            Preset::Uniform => rng.gen_range(1..=d),
            Preset::HugeHeavy => {
                let (lo, hi) = class_range(d, if k < huge_quota { 2 } else { rng.gen_range(0..2) });
                rng.gen_range(lo..=hi)
            }
            Preset::Mixed => {
                let (lo, hi) = class_range(d, rng.gen_range(0..3));
                rng.gen_range(lo..=hi)
            }
        };
        let mut permitted: Vec<MachineId> = (0..spec.machines)
            .filter(|_| spec.density >= 1.0 || rng.gen_bool(spec.density))
            .map(MachineId)
            .collect();
        if permitted.is_empty() {
            permitted.push(MachineId(rng.gen_range(0..spec.machines)));
        }
        jobs.push((format!("j{}", k + 1), S::from_frac(num, d), permitted));
    }
    Ok(Instance::new(spec.machines, jobs).expect("generated jobs are well formed"))
}
