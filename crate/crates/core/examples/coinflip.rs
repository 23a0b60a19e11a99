//! Two hidden states sharing one visible label: the trained predictor lands
//! between them, where neither state's count law has mass.

use hallu_core::coinflip::{run_coinflip, CoinflipConfig};

fn main() -> hallu_core::Result<()> {
    let cfg = CoinflipConfig { flips: 5000, epochs: 5, ..CoinflipConfig::default() };
    let out = run_coinflip(&cfg, 1)?;
    for row in &out.trace.rows {
        println!("epoch {:>2}: loss {:.4}, mean conditional pmf {:.4}", row.epoch, row.loss, row.mean_conditional_pmf);
    }
    let v = &out.verdict;
    println!(
        "Bayes prediction {:.3} rounds to {}; per-state pmf {:?}; δ = {} hallucinates: {}",
        v.prediction, v.rounded, v.pmf_per_state, v.delta, v.hallucinates
    );
    Ok(())
}
