//! Simulates the three two-particle dual walks from the same start and writes
//! one logged trajectory as CSV to stdout.

use seedbank_lab::colony::ColonyField;
use seedbank_lab::dual::{simulate, write_trajectory_csv, DualKind, DualState, SimOptions};
use seedbank_lab::kernel::{KernelSpec, TorusGeometry};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let geometry = TorusGeometry::new(&KernelSpec::nearest_neighbour(1, 0.5), 10)?;
    let field = ColonyField::constant(geometry, 3, 3)?;
    let init = DualState::pair(0, true, 5, false);
    let opts = SimOptions::new(1e4);
    for kind in DualKind::ALL {
        let r = simulate(kind, init, &field, 1.0, &opts, 7);
        println!("{kind:?}: absorbed {:?} after {} jumps", r.absorption, r.jumps);
    }
    let mut logged = SimOptions::new(50.0);
    logged.log = true;
    let r = simulate(DualKind::InteractingRW1, init, &field, 1.0, &logged, 7);
    write_trajectory_csv(&r, std::io::stdout().lock())?;
    Ok(())
}
