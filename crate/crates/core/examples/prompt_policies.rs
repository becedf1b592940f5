//! Turn match candidates into point prompts under each anchor strategy and
//! negative-point mode.

use memprompt::backend::MockBackend;
use memprompt::correspondence::{match_constrained, MatchConfig};
use memprompt::eval::{synth_dataset, Family};
use memprompt::prompt::{generate_prompts, BgMode, FgStrategy, PromptPolicy};
use memprompt::tensor_io::downsample_to_layout;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let backend = MockBackend::new(Default::default())?;
    let scenes = synth_dataset(2, 9, Family::Adversarial)?;
    let reference = backend.features_of(&scenes[0].image)?;
    let labels = downsample_to_layout(&scenes[0].mask, reference.layout())?;
    let query = backend.features_of(&scenes[1].image)?;
    let c = match_constrained(&query, &reference, &labels, &MatchConfig::default())?;

    for fg_strategy in [FgStrategy::MostConfident, FgStrategy::KMeansRepresentative] {
        for bg_mode in [BgMode::Disabled, BgMode::TopN(5), BgMode::All] {
            let policy = PromptPolicy { fg_strategy, bg_mode };
            let prompts = generate_prompts(&c.fg, &c.bg, &policy)?;
            let anchor = prompts.foreground().next().unwrap().pixel();
            println!(
                "{fg_strategy:?} / {bg_mode}: anchor {anchor:?}, {} negatives",
                prompts.background().count()
            );
        }
    }

    let prompts = generate_prompts(&c.fg, &c.bg, &PromptPolicy { bg_mode: BgMode::TopN(3), ..Default::default() })?;
    println!("{}", serde_json::to_string_pretty(&prompts).unwrap());
    Ok(())
}
