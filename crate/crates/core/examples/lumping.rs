//! Checks that the interacting dual lumps onto particle counts per site and
//! prints the generator difference against the auxiliary walk.

use seedbank_lab::colony::ColonyField;
use seedbank_lab::dual::DualState;
use seedbank_lab::kernel::{KernelSpec, TorusGeometry};
use seedbank_lab::oracle::{verify_generator_difference, verify_lumping};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let geometry = TorusGeometry::new(&KernelSpec::nearest_neighbour(1, 0.5), 3)?;
    let field = ColonyField::new(geometry, vec![2, 4, 3], vec![5, 2, 2])?;
    let r = verify_lumping(&field, 1.5);
    println!("{} states, max discrepancy {:.1e}, passed {}", r.states_checked, r.max_discrepancy, r.passed);

    let n = DualState::count(field.sites());
    let mut g = vec![0.0; n];
    g[n - 1] = 1.0;
    let d = verify_generator_difference(&field, 1.5, &g)?;
    println!(
        "(Q - Q^) 1_absorbed: closed form gap {:.1e}, min {:.3e}; flip correction gap {:.1e}; passed {}",
        d.interacting_error, d.interacting_min, d.flip_error, d.passed
    );
    Ok(())
}
