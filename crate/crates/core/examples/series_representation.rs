//! Estimates the absorption probability from diagonal visit counts and
//! compares it with the direct frequency on the same trajectories.

use seedbank_lab::colony::ColonyField;
use seedbank_lab::dual::{DualKind, DualState};
use seedbank_lab::experiments::series_estimate;
use seedbank_lab::kernel::{KernelSpec, TorusGeometry};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let geometry = TorusGeometry::new(&KernelSpec::nearest_neighbour(1, 0.5), 8)?;
    let field = ColonyField::constant(geometry, 2, 2)?;
    for horizon in [10.0, 100.0, 1e4] {
        let r = series_estimate(DualKind::AuxiliaryRW2, DualState::diagonal(0), &field, 1.0, horizon, 4000, 1)?;
        println!(
            "H = {horizon:>6}: series {:.4} +- {:.4}, direct {:.4}, censored {:.3}, agree {}",
            r.series.estimate, r.series.std_error, r.direct.estimate, r.direct.censored_fraction, r.passed
        );
    }
    Ok(())
}
