//! Benchmark fixtures shared by the criterion benches.

use fcfv_core::mesh::{generate_structured, DomainBox};
use fcfv_core::poisson::PoissonProblem;
use fcfv_core::problems::find;
use fcfv_core::stokes::StokesProblem;

/// `poisson-sine-2d` on an `n × n` structured mesh with default τ.
pub fn poisson_fixture(n: usize) -> PoissonProblem {
    let spec = find("poisson-sine-2d").expect("catalog entry");
    let mesh = generate_structured(2, n, DomainBox::unit()).expect("mesh");
    spec.poisson_problem(mesh, spec.tau).expect("problem")
}

/// `stokes-poly-2d` on an `n × n` structured mesh with default τ.
pub fn stokes_fixture(n: usize) -> StokesProblem {
    let spec = find("stokes-poly-2d").expect("catalog entry");
    let mesh = generate_structured(2, n, DomainBox::unit()).expect("mesh");
    spec.stokes_problem(mesh, spec.tau).expect("problem")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        assert_eq!(poisson_fixture(4).mesh.n_cells(), 32);
        assert_eq!(stokes_fixture(2).mesh.n_cells(), 8);
    }
}
