//! Fixtures shared by the engine benchmarks.

use pdegensol_core::catalog::{get_family, PdeFamily};
use pdegensol_core::verifier::{sample_scenario, Scenario};

/// Family `id` with the scenario of seed 1 and its first evaluation point.
pub fn fixture(id: &str) -> (&'static PdeFamily, Scenario, Vec<f64>) {
    let fam = get_family(id).expect("catalog id");
    let scenario = sample_scenario(fam, 1).expect("family samples at seed 1");
    let point = scenario.points[0].clone();
    (fam, scenario, point)
}

/// One representative family per solution shape: elementary (3.1), nested
/// integrals (3.3), RootOf under quadrature (3.7), third order (6.1) and
/// four variables (5.1).
pub const REPRESENTATIVE: [&str; 5] = ["3.1", "3.3", "3.7", "6.1", "5.1"];
