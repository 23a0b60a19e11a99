//! Build each hallucinating-mixture witness and print its densities at the optimum.

use hallu_core::constructions::{
    construct_cross_entropy, construct_semi_optimal, construct_single_input, cross_entropy_feasible_variance,
    SemiOptimalSpec, SingleInputSpec,
};
use hallu_core::mixture::Covariance;

fn main() -> hallu_core::Result<()> {
    let single = SingleInputSpec {
        dim: 2,
        delta: 0.05,
        weights: vec![0.2, 0.3, 0.5],
        covariances: vec![Covariance::Isotropic(1.0), Covariance::Diagonal(vec![0.5, 2.0])],
    };
    let r = construct_single_input(&single)?;
    println!("single input: estimate {:?}, densities {:?}, passed {}", r.estimator_value, r.per_state_density, r.passed);

    let semi = SemiOptimalSpec::new(2, 0.05, 0.1, vec![0.25; 4]);
    let r = construct_semi_optimal(&semi)?;
    println!("semi-optimal: densities {:?}, passed {}", r.per_state_density, r.passed);

    let v = cross_entropy_feasible_variance(4, 0.1)?;
    let r = construct_cross_entropy(4, 4, 0.1, Some(v))?;
    println!("cross-entropy N=4, variance {v:.5}: densities {:?}, passed {}", r.per_state_density, r.passed);
    Ok(())
}
