#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use salign::net::StochasticNet;
use salign::samples::{random_block_net, random_dag_net, random_trace, SizeLimits, TreeParams};

pub struct Case {
    pub net: StochasticNet,
    pub trace: Vec<String>,
}

/// Small acyclic nets (block-structured and arbitrary DAGs) with noisy traces.
pub fn corpus(seed: u64, n: usize) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limits = SizeLimits::small();
    (0..n)
        .map(|i| {
            let net = if i % 2 == 0 {
                let params = TreeParams {
                    leaves: rng.gen_range(2..=6),
                    ..TreeParams::small(false)
                };
                random_block_net(&mut rng, &params, &limits, 10)
            } else {
                random_dag_net(&mut rng, &limits, 10)
            };
            let trace = random_trace(&mut rng, &net, 8, 0.2);
            Case { net, trace }
        })
        .collect()
}
