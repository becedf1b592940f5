//! Controlled sweeps over the BG prompt mode and the memory pool size.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pipeline::{
    config_snapshot, finish, prepare, record, with_jobs, PipelineConfig, Prepared, QueryFeatures,
    QueryItem,
};
use super::report::{EvalReport, ImageRecord};
use crate::backend::Backend;
use crate::error::{Error, Result};
use crate::memory_bank::MemoryBank;
use crate::prompt::BgMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BgAblationRow {
    pub mode: BgMode,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryAblationRow {
    pub pool_size: usize,
    /// Support ids in the pool, in bank order.
    pub pool_ids: Vec<String>,
    pub report: EvalReport,
}

fn check_queries(queries: &[QueryItem]) -> Result<()> {
    if queries.is_empty() {
        return Err(Error::EmptyInput("no query images".into()));
    }
    Ok(())
}

/// Evaluates each BG mode with everything else fixed. Extraction, retrieval and
/// matching run once per query and are shared by all modes.
pub fn ablate_bg(
    queries: &[QueryItem],
    bank: &MemoryBank,
    backend: &dyn Backend,
    modes: &[BgMode],
    config: &PipelineConfig,
) -> Result<Vec<BgAblationRow>> {
    check_queries(queries)?;
    if modes.is_empty() {
        return Err(Error::Config("no BG modes to compare".into()));
    }
    with_jobs(config.jobs, || {
        let prepared: Vec<Result<Prepared>> = queries
            .par_iter()
            .map(|q| {
                QueryFeatures::extract(backend, &q.image)
                    .and_then(|qf| prepare(&qf, bank, &config.matching))
            })
            .collect();
        modes
            .iter()
            .map(|&mode| {
                let cfg = PipelineConfig {
                    policy: crate::prompt::PromptPolicy {
                        bg_mode: mode,
                        ..config.policy
                    },
                    ..*config
                };
                let records = queries
                    .par_iter()
                    .zip(&prepared)
                    .map(|(q, p)| match p {
                        Ok(p) => {
                            let seg = finish(p, &q.image, backend, &cfg.policy);
                            record(q, seg.map(|s| (p, s)))
                        }
                        Err(e) => ImageRecord::failed(&q.id, e.to_string()),
                    })
                    .collect();
                BgAblationRow {
                    mode,
                    report: EvalReport::from_records(config_snapshot(backend, bank, &cfg), records),
                }
            })
            .collect()
    })
}

/// Nested pools: each pool is a prefix of one seeded permutation of `0..support`,
/// so smaller pools are subsets of larger ones.
pub fn sample_pools(support: usize, sizes: &[usize], seed: u64) -> Result<Vec<Vec<usize>>> {
    let mut order: Vec<usize> = (0..support).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    sizes
        .iter()
        .map(|&m| {
            if m == 0 || m > support {
                return Err(Error::Config(format!(
                    "pool size {m} outside 1..={support} (support set size)"
                )));
            }
            let mut pool = order[..m].to_vec();
            pool.sort_unstable();
            Ok(pool)
        })
        .collect()
}

/// Evaluates the same queries against nested sub-pools of `support`.
/// Query features are extracted once.
pub fn ablate_memory(
    queries: &[QueryItem],
    support: &MemoryBank,
    backend: &dyn Backend,
    pool_sizes: &[usize],
    seed: u64,
    config: &PipelineConfig,
) -> Result<Vec<MemoryAblationRow>> {
    check_queries(queries)?;
    let pools = sample_pools(support.len(), pool_sizes, seed)?;
    with_jobs(config.jobs, || -> Result<Vec<MemoryAblationRow>> {
        let features: Vec<Result<QueryFeatures>> = queries
            .par_iter()
            .map(|q| QueryFeatures::extract(backend, &q.image))
            .collect();
        pools
            .iter()
            .map(|pool| {
                let bank = support.subset(pool)?;
                let records = queries
                    .par_iter()
                    .zip(&features)
                    .map(|(q, qf)| {
                        let prepared = match qf {
                            Ok(qf) => prepare(qf, &bank, &config.matching),
                            Err(e) => return ImageRecord::failed(&q.id, e.to_string()),
                        };
                        match prepared {
                            Ok(p) => {
                                let seg = finish(&p, &q.image, backend, &config.policy);
                                record(q, seg.map(|s| (&p, s)))
                            }
                            Err(e) => ImageRecord::failed(&q.id, e.to_string()),
                        }
                    })
                    .collect();
                Ok(MemoryAblationRow {
                    pool_size: pool.len(),
                    pool_ids: bank.entries().iter().map(|e| e.id.clone()).collect(),
                    report: EvalReport::from_records(config_snapshot(backend, &bank, config), records),
                })
            })
            .collect()
    })?
}
