//! Segment one query end to end with the mock backend, score it and save an
//! overlay.

use memprompt::backend::{Backend, MockBackend};
use memprompt::eval::{
    compute_metrics, load_exemplars, pair_by_stem, segment_image, synth_dataset, write_dataset,
    write_rgb_png, render_overlay, Family, PipelineConfig,
};
use memprompt::memory_bank::build_bank;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let samples = synth_dataset(10, 5, Family::Adversarial)?;
    let (query, support) = samples.split_first().unwrap();
    write_dataset(support, &dir.path().join("support"))?;
    write_dataset(std::slice::from_ref(query), &dir.path().join("query"))?;

    let backend = MockBackend::new(Default::default())?;
    let items = pair_by_stem(&dir.path().join("support/images"), &dir.path().join("support/masks"))?;
    let bank = build_bank(load_exemplars(&items, &backend)?)?;

    let image = dir.path().join("query/images").join(format!("{}.png", query.id));
    let (prepared, seg) = segment_image(&image, &bank, &backend, &PipelineConfig::default())?;
    println!(
        "retrieved {} (sim {:.4}); {} fg / {} bg candidates",
        prepared.retrieved.entry.id,
        prepared.retrieved.similarity,
        prepared.candidates.fg.len(),
        prepared.candidates.bg.len()
    );
    println!("{} prompts, {} candidate masks", seg.prompts.len(), seg.candidates.len());

    let m = compute_metrics(&seg.prediction, &query.mask)?;
    println!("mIoU {:.4}  mPA {:.4}  Acc {:.4}", m.miou, m.mpa, m.acc);

    let out = std::env::temp_dir().join("memprompt-overlay.png");
    write_rgb_png(&render_overlay(&query.image, &seg.prediction, &seg.prompts)?, &out)?;
    println!("overlay written to {} ({:?})", out.display(), backend.descriptor());
    Ok(())
}
