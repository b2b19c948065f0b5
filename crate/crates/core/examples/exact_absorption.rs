//! Assembles the generator of the interacting dual on a three-site torus and
//! solves for absorption times and the transient law.

use seedbank_lab::colony::ColonyField;
use seedbank_lab::dual::{DualKind, DualState};
use seedbank_lab::kernel::{KernelSpec, TorusGeometry};
use seedbank_lab::oracle::{absorption_cdf, absorption_solve, build_generator, GeneratorKind, DEFAULT_STATE_CAP};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let geometry = TorusGeometry::new(&KernelSpec::nearest_neighbour(1, 0.5), 3)?;
    let field = ColonyField::new(geometry, vec![2, 3, 5], vec![4, 2, 3])?;
    let gen = build_generator(GeneratorKind::Dual(DualKind::InteractingRW1), &field, 1.0, DEFAULT_STATE_CAP)?;
    let sol = absorption_solve(&gen)?;
    println!("{} states, solver {:?}, residual {:.1e}", gen.len(), sol.method, sol.residual);
    for x in 0..gen.len() - 1 {
        println!("{:<14} P = {:.12}  E[tau] = {:.4}", gen.label(x), sol.probability[x], sol.expected_time[x]);
    }
    let init = gen.dual_index(&DualState::pair(0, true, 2, false)).unwrap();
    let times = [0.5, 1.0, 5.0, 20.0];
    for (t, row) in times.iter().zip(absorption_cdf(&gen, &times)) {
        println!("P(tau <= {t}) = {:.6}", row[init]);
    }
    Ok(())
}
