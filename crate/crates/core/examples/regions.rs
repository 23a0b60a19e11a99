//! Marginal HDR versus per-state regions for a two-state 1-D mixture.

use hallu_core::regions::{hcdr, hdr, DensityRegion, GridSpec, HcdrLevel, HdrMethod};
use hallu_core::{GaussianComponent, LatentMixture};

fn main() -> hallu_core::Result<()> {
    let mix = LatentMixture::new(
        vec![GaussianComponent::isotropic(vec![-1.0], 0.36)?, GaussianComponent::isotropic(vec![1.0], 0.36)?],
        vec![0.5, 0.5],
    )?;
    for mass in [0.5, 0.9] {
        let res = hdr(&mix, mass, &HdrMethod::Grid(GridSpec::for_dim(1)))?;
        let DensityRegion::Grid(g) = &res.region else { unreachable!() };
        println!("marginal HDR {mass}: threshold {:.4}, intervals {:?}", res.threshold, g.intervals());
    }
    let h = hcdr(&mix, &HcdrLevel::Mass(vec![0.9]))?;
    for x in [-1.0, 0.0, 1.0] {
        println!("x = {x:+}: per-state {:?}, in HCDR {}", h.member_states(&[x])?, h.contains(&[x])?);
    }
    Ok(())
}
