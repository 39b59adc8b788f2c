use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random access to independent per-sample generators.
///
/// Sample `i` of a run always draws from ChaCha stream `i` under the run's
/// key, however the samples are split across workers. Results therefore do
/// not depend on the worker count beyond floating-point summation order.
#[derive(Debug, Clone)]
pub struct SampleStream {
    seed: u64,
    key: <ChaCha8Rng as SeedableRng>::Seed,
}

impl SampleStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, key: ChaCha8Rng::seed_from_u64(seed).get_seed() }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        rng
    }
}

/// Mixes `salt` into `seed` (splitmix64 finalizer), for seeds of sub-runs.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
