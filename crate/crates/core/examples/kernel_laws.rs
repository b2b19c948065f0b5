//! Validates a skewed kernel, symmetrises it and compares the two ways of
//! computing the time-t law of the walk.

use seedbank_lab::kernel::{green_integral, symmetrize, time_kernel, validate_kernel, KernelSpec, TimeKernelMethod};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = KernelSpec::new(1, [(vec![0], 0.5), (vec![1], 0.3), (vec![-1], 0.1), (vec![2], 0.1)])?;
    let report = validate_kernel(&spec)?;
    println!("self-rate {} c {} mu1 {} symmetric {}", report.self_rate, report.c, report.mu1, report.symmetric);

    let sym = symmetrize(&spec);
    let by_poisson = time_kernel(&sym, 3.0, TimeKernelMethod::Uniformization, 60)?;
    let by_fourier = time_kernel(&sym, 3.0, TimeKernelMethod::Fourier, 6)?;
    for j in -3..=3 {
        println!("a_3(0,{j:>2}) = {:.10}  (fourier {:.10})", by_poisson.get(&[j]), by_fourier.get(&[j]));
    }

    let g = green_integral(&sym, 1e3, 0.05);
    for (t, v) in &g.checkpoints {
        println!("int_0^{t} a_s(0,0) ds = {v:.4}");
    }
    Ok(())
}
