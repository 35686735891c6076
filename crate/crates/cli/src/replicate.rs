//! Multi-replicate study orchestration: a grid of (scenario, n, model,
//! prior, ...) cells, each fit on independently generated datasets, with a
//! per-cell accuracy/fit report. Completed replicates are skipped on rerun.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use dlcm::diagnostics::{first_hit, structure_mode, structures_match_up_to_class_relabel, waic};
use dlcm::mathutil::derive_seed;
use dlcm::priors::PriorKind;
use dlcm::sampler::{run_chain, ModelKind, SamplerConfig, SeedStyle};
use dlcm::simgen::{build_truth, generate, Scenario};

use crate::Failure;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StudyPlan {
    pub output_root: PathBuf,
    #[serde(default)]
    pub seed: u64,
    pub cells: Vec<StudyCell>,
}

fn default_classes() -> u32 {
    2
}
fn default_replicates() -> u32 {
    20
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StudyCell {
    pub scenario: Scenario,
    pub n: usize,
    pub model: ModelKind,
    pub prior: PriorKind,
    #[serde(default = "default_classes")]
    pub classes: u32,
    #[serde(default = "default_replicates")]
    pub replicates: u32,
    pub warmup: u32,
    pub main: u32,
    #[serde(default)]
    pub seed_style: SeedStyle,
    #[serde(default)]
    pub collapsed: bool,
    #[serde(default)]
    pub n_homo_iters: Option<u32>,
    #[serde(default)]
    pub equivalence: Option<Vec<u32>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RepResult {
    pub cell: usize,
    pub replicate: u32,
    pub mode_match: bool,
    pub mode_share: f64,
    pub first_hit: Option<u64>,
    pub waic: f64,
    pub runtime_ms: u64,
}

impl StudyCell {
    fn config(&self, seed: u64) -> SamplerConfig {
        let mut config = SamplerConfig::new(self.classes);
        config.model = self.model;
        config.hyper.prior_kind = self.prior;
        config.warmup = self.warmup;
        config.main = self.main;
        config.seed = seed;
        config.seed_style = self.seed_style;
        config.collapsed_class_update = self.collapsed;
        config.hyper.n_homo_iters = self.n_homo_iters;
        config.equivalence = self.equivalence.clone();
        config.record_params = false;
        config
    }
}

fn run_replicate(
    plan_seed: u64,
    cell_idx: usize,
    cell: &StudyCell,
    rep: u32,
    rep_dir: &Path,
) -> Result<RepResult, dlcm::Error> {
    let stream = (cell_idx as u64) * 1_000_000 + (rep as u64) * 2;
    let truth = build_truth(cell.scenario);
    let (data, _labels) = generate(&truth, cell.n, derive_seed(plan_seed, stream))?;
    let config = cell.config(derive_seed(plan_seed, stream + 1));
    let mut record = run_chain(&data, &config, 0)?;

    let shares = structure_mode(std::slice::from_ref(&record), cell.warmup as usize);
    let top = shares.first();
    let mode_match = top
        .map(|s| structures_match_up_to_class_relabel(&s.structure, &truth.structure))
        .unwrap_or(false);
    let hit = first_hit(&record, &truth.structure);
    let post: Vec<Vec<f64>> = record
        .loglik
        .iter()
        .skip(cell.warmup as usize)
        .cloned()
        .collect();
    let waic_value = if post.is_empty() {
        f64::NAN
    } else {
        waic(&post)?
    };
    let result = RepResult {
        cell: cell_idx,
        replicate: rep,
        mode_match,
        mode_share: top.map(|s| s.share).unwrap_or(0.0),
        first_hit: hit,
        waic: waic_value,
        runtime_ms: record.meta.runtime_ms,
    };
    // Persist a slim record: keep structures for recounts, drop the bulky
    // per-subject log-likelihoods.
    record.loglik.clear();
    record.save_dir(rep_dir)?;
    std::fs::write(
        rep_dir.join("rep_result.json"),
        serde_json::to_string_pretty(&result)?,
    )?;
    Ok(result)
}

pub fn cmd_replicate(plan_path: PathBuf) -> Result<(), Failure> {
    let raw = std::fs::read_to_string(&plan_path)
        .map_err(|e| Failure::Usage(format!("reading {}: {e}", plan_path.display())))?;
    let plan: StudyPlan = serde_json::from_str(&raw)
        .map_err(|e| Failure::Usage(format!("parsing {}: {e}", plan_path.display())))?;
    if plan.cells.is_empty() {
        return Err(Failure::Usage("study plan has no cells".into()));
    }
    std::fs::create_dir_all(&plan.output_root)
        .map_err(|e| Failure::Runtime(format!("creating {}: {e}", plan.output_root.display())))?;

    let jobs: Vec<(usize, u32)> = plan
        .cells
        .iter()
        .enumerate()
        .flat_map(|(idx, cell)| (0..cell.replicates).map(move |rep| (idx, rep)))
        .collect();
    let outcomes: Vec<Result<RepResult, (usize, u32, String)>> = jobs
        .par_iter()
        .map(|&(cell_idx, rep)| {
            let cell = &plan.cells[cell_idx];
            let rep_dir = plan
                .output_root
                .join(format!("cell_{cell_idx:03}"))
                .join(format!("rep_{rep:03}"));
            let marker = rep_dir.join("rep_result.json");
            if let Ok(existing) = std::fs::read_to_string(&marker) {
                if let Ok(result) = serde_json::from_str::<RepResult>(&existing) {
                    return Ok(result);
                }
            }
            std::fs::create_dir_all(&rep_dir).map_err(|e| (cell_idx, rep, e.to_string()))?;
            run_replicate(plan.seed, cell_idx, cell, rep, &rep_dir)
                .map_err(|e| (cell_idx, rep, e.to_string()))
        })
        .collect();

    let mut by_cell: Vec<Vec<&RepResult>> = vec![Vec::new(); plan.cells.len()];
    let mut failures = Vec::new();
    for outcome in &outcomes {
        match outcome {
            Ok(result) => by_cell[result.cell].push(result),
            Err((cell, rep, message)) => failures.push((cell, rep, message.clone())),
        }
    }

    let mut report =
        String::from("data,model,prior,seed_style,n,mode_acc,first_hit_med,waic_mean\n");
    for (idx, cell) in plan.cells.iter().enumerate() {
        let results = &by_cell[idx];
        let done = results.len();
        let matches = results.iter().filter(|r| r.mode_match).count();
        let mode_acc = if done > 0 {
            matches as f64 / done as f64
        } else {
            f64::NAN
        };
        let mut hits: Vec<u64> = results.iter().filter_map(|r| r.first_hit).collect();
        hits.sort_unstable();
        let first_hit_med = if hits.len() * 2 >= done.max(1) && !hits.is_empty() {
            format!("{}", hits[hits.len() / 2])
        } else {
            String::new()
        };
        let waic_mean = if done > 0 {
            results.iter().map(|r| r.waic).sum::<f64>() / done as f64
        } else {
            f64::NAN
        };
        report.push_str(&format!(
            "{},{},{},{},{},{:.4},{},{:.2}\n",
            cell.scenario,
            cell.model,
            cell.prior,
            cell.seed_style,
            cell.n,
            mode_acc,
            first_hit_med,
            waic_mean
        ));
    }
    std::fs::write(plan.output_root.join("report.csv"), &report)
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    print!("{report}");

    if failures.is_empty() {
        Ok(())
    } else {
        let log: String = failures
            .iter()
            .map(|(c, r, m)| format!("cell {c} rep {r}: {m}\n"))
            .collect();
        let _ = std::fs::write(plan.output_root.join("errors.log"), &log);
        Err(Failure::Runtime(format!(
            "{} replicate(s) failed; see errors.log",
            failures.len()
        )))
    }
}
