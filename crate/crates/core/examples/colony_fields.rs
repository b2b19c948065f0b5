//! Builds colony size fields from JSON and prints their clumping statistics.

use seedbank_lab::colony::{non_clumping_stat, seedbank_strength, FieldConfig};
use seedbank_lab::kernel::{KernelSpec, TorusGeometry};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let geometry = TorusGeometry::new(&KernelSpec::nearest_neighbour(2, 0.5), 6)?;
    let configs = [
        r#"{"constant": {"N": 4, "M": 4}}"#,
        r#"{"generator": {"kind": "checkerboard", "even": [2, 8], "odd": [8, 2]}}"#,
        r#"{"generator": {"kind": "iid_uniform", "n_max": 10, "m_max": 10, "seed": 1}}"#,
        r#"{"generator": {"kind": "single_spike", "N": 2, "M": 2, "site": 0, "spike_n": 50}}"#,
    ];
    for text in configs {
        let field = FieldConfig::from_json_str(text)?.build(geometry.clone())?;
        println!(
            "{text}\n  non-clumping R=1 {:.3}  R=2 {:.3}  sup M/N {:.3}",
            non_clumping_stat(&field, 1),
            non_clumping_stat(&field, 2),
            seedbank_strength(&field)
        );
    }
    Ok(())
}
