//! Dense matching of a query against an exemplar, split by the exemplar's
//! foreground and background, at several thresholds.

use memprompt::backend::MockBackend;
use memprompt::correspondence::{dense_matches, MatchConfig};
use memprompt::eval::{synth_dataset, Family};
use memprompt::tensor_io::downsample_to_layout;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let backend = MockBackend::new(Default::default())?;
    let scenes = synth_dataset(2, 3, Family::Adversarial)?;
    let (exemplar, query) = (&scenes[0], &scenes[1]);

    let reference = backend.features_of(&exemplar.image)?;
    let labels = downsample_to_layout(&exemplar.mask, reference.layout())?;
    let q = backend.features_of(&query.image)?;
    println!(
        "exemplar patches: {} fg, {} bg",
        labels.foreground_indices().len(),
        labels.background_indices().len()
    );

    let matches = dense_matches(&q, &reference, &labels)?;
    println!("{:>5} {:>6} {:>6}", "tau", "fg", "bg");
    for tau in [0.5, 0.8, 0.9, 0.95, 0.99] {
        let c = matches.threshold(&MatchConfig { tau_fg: tau, tau_bg: tau });
        println!("{tau:>5} {:>6} {:>6}", c.fg.len(), c.bg.len());
    }

    let c = matches.threshold(&MatchConfig::default());
    if let Some(best) = c.fg.iter().max_by(|a, b| a.similarity.total_cmp(&b.similarity)) {
        let inside = query.mask.contains(best.point);
        println!("best fg match at {:?} (sim {:.4}), inside target: {inside}", best.point, best.similarity);
    }
    Ok(())
}
