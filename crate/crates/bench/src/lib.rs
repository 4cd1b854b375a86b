//! Shared fixtures for the criterion benchmarks.

use drrd_core::sim::{scenarios, DgpSpec};
use drrd_core::{generate, BandwidthRule, Dataset, KernelFamily, OutcomeModelSpec, RdConfig};

/// A linear-jump sample of size `n` with a fixed generation seed.
pub fn linear_sample(n: usize) -> Dataset {
    let (data, _) = generate(&scenarios::linear_jump(), n, 0xBE7C).unwrap();
    data
}

/// Covariate-shift sample (two covariates) of size `n`.
pub fn covariate_sample(n: usize) -> Dataset {
    let (data, _) = generate(&scenarios::covariate_shift(), n, 0xBE7C).unwrap();
    data
}

pub fn sieve_config(degree_w: u32) -> RdConfig {
    RdConfig {
        cutoff: 0.0,
        kernel: KernelFamily::Triangular,
        bandwidth: BandwidthRule::Fixed { h: 0.5 },
        first_stage: OutcomeModelSpec::PolynomialSieve {
            degree_w,
            include_z: false,
            z_degree: 0,
        },
    }
}

pub fn curved_dgp() -> DgpSpec {
    scenarios::curved_jump()
}
