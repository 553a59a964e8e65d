//! Fixtures shared by the criterion benches in `benches/`.

use torvol_core::cochain::{build_complex, cohomology, CohomologyData, TwistedComplex};
use torvol_core::reps::sample_closed;
use torvol_core::{rng, Representation};

/// A sampled closed representation with its complex and cohomology.
pub struct Fixture {
    pub rep: Representation,
    pub complex: TwistedComplex,
    pub coh: CohomologyData,
}

pub fn fixture(genus: usize, seed: u64) -> Fixture {
    let rep = sample_closed(genus, &mut rng::seeded(seed)).expect("sampling succeeds for the bench seeds");
    let complex = build_complex(&rep).expect("complex");
    let coh = cohomology(&complex, 1e-9).expect("cohomology");
    Fixture { rep, complex, coh }
}
