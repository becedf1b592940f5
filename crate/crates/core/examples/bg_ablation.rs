//! Compare negative-point modes on scenes with a look-alike distractor next
//! to the target.

use memprompt::backend::MockBackend;
use memprompt::eval::{
    ablate_bg, load_exemplars, pair_by_stem, render_comparison, synth_dataset, write_dataset,
    Family, PipelineConfig, QueryItem,
};
use memprompt::memory_bank::build_bank;
use memprompt::prompt::BgMode;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let backend = MockBackend::new(Default::default())?;
    write_dataset(&synth_dataset(15, 1, Family::Adversarial)?, dir.path())?;
    let bank = build_bank(load_exemplars(
        &pair_by_stem(&dir.path().join("images"), &dir.path().join("masks"))?,
        &backend,
    )?)?;

    let qdir = dir.path().join("queries");
    let scenes = synth_dataset(12, 2, Family::Adversarial)?;
    write_dataset(&scenes, &qdir)?;
    let queries: Vec<QueryItem> = scenes
        .into_iter()
        .map(|s| QueryItem {
            image: qdir.join("images").join(format!("{}.png", s.id)),
            id: s.id,
            gt: s.mask,
        })
        .collect();

    let modes = [BgMode::Disabled, BgMode::TopN(5), BgMode::TopN(20), BgMode::All];
    let rows = ablate_bg(&queries, &bank, &backend, &modes, &PipelineConfig::default())?;
    let labelled: Vec<(String, _)> = rows.iter().map(|r| (r.mode.to_string(), &r.report)).collect();
    print!("{}", render_comparison(&labelled));
    Ok(())
}
