//! Small version of the dimension scan: censored absorption frequencies of
//! independent walkers as side and horizon grow together.

use seedbank_lab::dual::DualKind;
use seedbank_lab::experiments::{dichotomy_scan, ScanCell};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cells: Vec<ScanCell> = [1, 2, 3]
        .into_iter()
        .flat_map(|dim| [(4, 40.0), (8, 160.0)].map(|(side, horizon)| ScanCell { dim, side, horizon }))
        .collect();
    for row in dichotomy_scan(&cells, DualKind::IndependentRW, 2, 2, 0.5, 1.0, 500, 5)? {
        println!(
            "d = {} L = {:<2} H = {:<5} absorbed {:.3} +- {:.3}",
            row.cell.dim, row.cell.side, row.cell.horizon, row.absorbed, row.std_error
        );
    }
    Ok(())
}
