//! Build a memory bank from synthetic scenes, query it, deduplicate it and
//! persist it.

use memprompt::backend::MockBackend;
use memprompt::eval::{synth_dataset, Family};
use memprompt::memory_bank::{build_bank, dedup, global_descriptor, load_bank, save_bank, Exemplar};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let backend = MockBackend::new(Default::default())?;
    let dir = tempfile::tempdir()?;
    let samples = synth_dataset(12, 7, Family::Simple)?;
    let exemplars = samples[1..]
        .iter()
        .map(|s| {
            Ok(Exemplar {
                id: s.id.clone(),
                image_path: dir.path().join(format!("{}.png", s.id)),
                mask: s.mask.clone(),
                features: backend.features_of(&s.image)?,
            })
        })
        .collect::<memprompt::Result<Vec<_>>>()?;
    let bank = build_bank(exemplars)?;
    println!("bank of {} entries, descriptor dim {}", bank.len(), bank.dim());

    let query = global_descriptor(&backend.features_of(&samples[0].image)?)?;
    for hit in bank.retrieve(&query, 3)? {
        println!("  {:<12} sim {:.4}", hit.entry.id, hit.similarity);
    }

    for threshold in [0.999, 0.995, 0.98] {
        let (kept, removed) = dedup(&bank, threshold)?;
        println!("dedup at {threshold}: {} kept, {} removed", kept.len(), removed.len());
    }

    let out = dir.path().join("bank");
    save_bank(&bank, &out)?;
    let loaded = load_bank(&out)?;
    println!("reloaded {} entries from {}", loaded.len(), out.display());
    Ok(())
}
