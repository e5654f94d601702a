#![allow(dead_code)]

use lineopt::catalog::ProblemCatalog;
use lineopt::freestage::{reduce_space, DevMode, ReducedSpace};

/// 8 x 8 x 6 = 384 states cut from the 5% noDev lists.
pub fn toy_space(catalog: &ProblemCatalog) -> ReducedSpace {
    let base = reduce_space(catalog, 0.05, DevMode::No).unwrap();
    let take = |k: usize, n: usize| base.stage(k)[..n].to_vec();
    ReducedSpace::from_lists(
        base.margin(),
        DevMode::No,
        base.annual_target(),
        [take(0, 8), take(1, 8), take(2, 6)],
    )
    .unwrap()
}
