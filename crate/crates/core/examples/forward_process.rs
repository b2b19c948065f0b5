//! Runs the forward two-type process with dormancy to fixation and compares
//! the mean fixation time with the exact chain on a single colony.

use seedbank_lab::colony::ColonyField;
use seedbank_lab::experiments::fixation_experiment;
use seedbank_lab::forward::{simulate_forward, ForwardInit};
use seedbank_lab::kernel::{KernelSpec, TorusGeometry};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = KernelSpec::nearest_neighbour(1, 0.5);
    let single = ColonyField::constant(TorusGeometry::new(&spec, 1)?, 2, 2)?;
    let r = fixation_experiment(&single, 1.0, 0.5, 1e6, 5000, 2)?;
    println!("single colony: MC {:.4} +- {:.4}, exact {:?}", r.mean.estimate, r.mean.std_error, r.exact);

    let ring = ColonyField::constant(TorusGeometry::new(&spec, 20)?, 5, 5)?;
    let trace = simulate_forward(&ForwardInit::Density(0.5), &ring, 1.0, 1e5, &[1.0, 10.0, 100.0, 1000.0], 2, 0);
    trace.write_csv(std::io::stdout().lock())?;
    println!("fixation {:?} after {} events", trace.fixation, trace.events);
    Ok(())
}
