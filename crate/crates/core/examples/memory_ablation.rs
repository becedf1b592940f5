//! Evaluate the same queries against nested random pools of the support set.

use memprompt::backend::MockBackend;
use memprompt::eval::{
    ablate_memory, load_exemplars, pair_by_stem, split_dataset, synth_dataset, write_dataset,
    Family, PipelineConfig, QueryItem, SplitSpec,
};
use memprompt::memory_bank::build_bank;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let backend = MockBackend::new(Default::default())?;
    write_dataset(&synth_dataset(40, 17, Family::Simple)?, dir.path())?;
    let items = pair_by_stem(&dir.path().join("images"), &dir.path().join("masks"))?;
    let ids: Vec<String> = items.iter().map(|i| i.id.clone()).collect();
    let (support_ids, query_ids) = split_dataset(&ids, &SplitSpec::default())?;
    println!("{} support, {} query", support_ids.len(), query_ids.len());

    let support: Vec<_> = items.iter().filter(|i| support_ids.contains(&i.id)).cloned().collect();
    let bank = build_bank(load_exemplars(&support, &backend)?)?;
    let queries = items
        .iter()
        .filter(|i| query_ids.contains(&i.id))
        .map(|i| {
            Ok(QueryItem {
                id: i.id.clone(),
                image: i.image.clone(),
                gt: memprompt::tensor_io::read_mask_png(&i.mask)?,
            })
        })
        .collect::<memprompt::Result<Vec<_>>>()?;

    for seed in 0..3 {
        let rows = ablate_memory(&queries, &bank, &backend, &[1, 10, 20], seed, &PipelineConfig::default())?;
        let line: Vec<String> = rows
            .iter()
            .map(|r| format!("pool {:>2}: mIoU {:.4}", r.pool_size, r.report.aggregate.miou))
            .collect();
        println!("seed {seed}  {}", line.join("  "));
    }
    Ok(())
}
