//! Lower bound on the hallucination probability, checked by simulation.

use hallu_core::bounds::{hallucination_lower_bound, mc_verify_bound, BoundInputs, MeanLaw};

fn main() -> hallu_core::Result<()> {
    let inputs = BoundInputs::new(vec![0.5, 0.5], vec![MeanLaw::gaussian(0.0, 1.0); 2], 0.1, 0.1);
    let report = hallucination_lower_bound(&inputs)?;
    println!("d = {:.4}", report.d);
    for (i, s) in report.states.iter().enumerate() {
        println!("state {i}: K = {:.4}, {:?}", s.k, s.alpha);
    }
    let bound = report.product_bound.unwrap_or(0.0);
    let mc = mc_verify_bound(&inputs, 0.0009, 200_000, 7, 0)?;
    println!(
        "bound {bound:.3e}; simulated frequency {:.4} (95% CI {:.4}..{:.4})",
        mc.hallucination.estimate, mc.hallucination.lower, mc.hallucination.upper
    );
    Ok(())
}
