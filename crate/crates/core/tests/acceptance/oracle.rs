//! Independent imbalance sampler: SplitMix64 and Floyd's subset algorithm.

struct SplitMix64(u64);

impl SplitMix64 {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `0..n`.
    fn below(&mut self, n: u64) -> u64 {
        ((self.next() as u128 * n as u128) >> 64) as u64
    }
}

pub fn imbalance(mr: u64, ma: u64, tokens: u64, trials: u64, seed: u64) -> f64 {
    let mut rng = SplitMix64(seed);
    let mut load = vec![0u32; mr as usize];
    let mut chosen: Vec<u64> = Vec::with_capacity(ma as usize);
    let mut total = 0u64;
    for _ in 0..trials {
        load.iter_mut().for_each(|l| *l = 0);
        for _ in 0..tokens {
            chosen.clear();
            for j in (mr - ma)..mr {
                let t = rng.below(j + 1);
                let pick = if chosen.contains(&t) { j } else { t };
                chosen.push(pick);
                load[pick as usize] += 1;
            }
        }
        total += *load.iter().max().unwrap() as u64;
    }
    let mean = (tokens as f64 * ma as f64 / mr as f64).max(1.0);
    total as f64 / trials as f64 / mean
}
