//! Fit a detector on synthetic class embeddings and score held-out and gap samples.

use hallu_core::detector::{fit_detector, gap_probes, synthetic_classes, DetectorConfig, SyntheticSpec};

fn main() -> hallu_core::Result<()> {
    let spec = SyntheticSpec { per_class: 1000, ..SyntheticSpec::default() };
    let data = synthetic_classes(&spec, 3)?;
    let bundle = fit_detector(&data, &DetectorConfig::default(), 3)?;
    println!("PCA keeps {} of {} dims", bundle.pipeline.output_dim(), spec.dim);
    for t in &bundle.thresholds.thresholds {
        println!("class {}: log-density cutoff {:.3} from {} points", t.class, t.cutoff, t.count);
    }
    let fresh = synthetic_classes(&spec, 4)?;
    let rows: Vec<&[f64]> = fresh.rows.iter().map(Vec::as_slice).collect();
    let report = bundle.detect(&rows)?;
    println!("fresh class samples flagged: {:.3}", report.hallucination_rate);
    let probes = gap_probes(&spec, 500, 0.1, 5)?;
    let rows: Vec<&[f64]> = probes.iter().map(Vec::as_slice).collect();
    println!("gap samples flagged: {:.3}", bundle.detect(&rows)?.hallucination_rate);
    Ok(())
}
