//! Without-replacement index subsets and the subset-size schedule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// A sorted without-replacement subset of `[0, population)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetSample {
    indices: Vec<usize>,
    population: usize,
    seed: u64,
    iteration: usize,
}

/// Provenance of the data a cut was computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleId {
    Full,
    Subset { seed: u64, iteration: usize },
}

impl SubsetSample {
    /// The whole population `[0, population)`.
    pub fn full(population: usize) -> Self {
        Self { indices: (0..population).collect(), population, seed: 0, iteration: 0 }
    }

    /// Wraps explicit indices; they are sorted and checked for range and duplicates.
    pub fn from_indices(mut indices: Vec<usize>, population: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.is_empty() {
            return Err(invalid("empty sample"));
        }
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("duplicate sample index"));
        }
        if *indices.last().unwrap() >= population {
            return Err(invalid("sample index out of range"));
        }
        Ok(Self { indices, population, seed: 0, iteration: 0 })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn population(&self) -> usize {
        self.population
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn is_full(&self) -> bool {
        self.indices.len() == self.population
    }

    pub fn id(&self) -> SampleId {
        if self.is_full() {
            SampleId::Full
        } else {
            SampleId::Subset { seed: self.seed, iteration: self.iteration }
        }
    }

    pub(crate) fn tagged(mut self, iteration: usize) -> Self {
        self.iteration = iteration;
        self
    }
}

/// Draws `n` distinct indices uniformly from `[0, population)`.
///
/// The result is sorted ascending and is a pure function of `seed`.
pub fn sample_without_replacement(population: usize, n: usize, seed: u64) -> Result<SubsetSample> {
    if n == 0 {
        return Err(invalid("sample size must be positive"));
    }
    if n > population {
        return Err(invalid(format!("sample size {n} exceeds population {population}")));
    }
    let indices = if n == population {
        (0..population).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = rand::seq::index::sample(&mut rng, population, n).into_vec();
        v.sort_unstable();
        v
    };
    Ok(SubsetSample { indices, population, seed, iteration: 0 })
}

/// `min(N, ⌈10·√N⌉)`.
pub fn default_n_schedule(population: usize) -> usize {
    let n = (10.0 * (population as f64).sqrt()).ceil() as usize;
    n.clamp(1, population.max(1))
}

/// Rule mapping the population size to the per-iteration subset size.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub enum NSchedule {
    /// `min(N, ⌈10·√N⌉)`.
    #[default]
    SqrtTen,
    /// A fixed size, clamped to `[1, N]`.
    Fixed(usize),
}

impl NSchedule {
    pub fn size(&self, population: usize) -> usize {
        match *self {
            NSchedule::SqrtTen => default_n_schedule(population),
            NSchedule::Fixed(n) => n.clamp(1, population.max(1)),
        }
    }
}

/// Mixes a run seed and an iteration counter into an independent stream seed (SplitMix64).
pub fn derive_seed(seed: u64, iteration: u64) -> u64 {
    let mut x = seed ^ iteration.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}
