//! Per-chain records and their on-disk layout.
//!
//! A chain directory holds `meta.json` (config echo, seeds, acceptance
//! rates), `structures.jsonl` (one canonical structure per iteration),
//! `params.csv` (long-format pi and theta draws keyed by canonical ids), and
//! `loglik.csv` (iteration x subject log-likelihoods).

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DomainStructure, StructureMode};
use crate::sampler::SamplerConfig;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainMeta {
    pub chain_index: u32,
    /// Seed of this chain's stream (derived from the root seed).
    pub seed: u64,
    pub config: SamplerConfig,
    pub n_subjects: usize,
    pub n_items: usize,
    pub cardinalities: Vec<u32>,
    /// Resolved slot count D.
    pub slots: u32,
    pub warmup: u32,
    pub main: u32,
    pub proposals: u64,
    pub accepted: u64,
    pub acceptance_rate: f64,
    pub runtime_ms: u64,
}

/// One stored theta vector, keyed by canonical domain id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaEntry {
    pub class: u32,
    pub domain: u32,
    pub probs: Vec<f64>,
}

/// Everything one chain produced, iteration by iteration (warmup included).
#[derive(Clone, Debug)]
pub struct ChainRecord {
    pub meta: ChainMeta,
    /// Canonical structure at each iteration, 1-based iteration t at index t-1.
    pub structures: Vec<DomainStructure>,
    pub pi: Vec<Vec<f64>>,
    /// Present unless the run disabled parameter recording.
    pub theta: Option<Vec<Vec<ThetaEntry>>>,
    /// loglik[t][i] = ln P(X_i | omega^t); empty when the dataset has no rows.
    pub loglik: Vec<Vec<f64>>,
}

impl ChainRecord {
    pub fn total_iterations(&self) -> usize {
        self.structures.len()
    }

    /// Post-warmup iteration count.
    pub fn main_iterations(&self) -> usize {
        self.total_iterations()
            .saturating_sub(self.meta.warmup as usize)
    }

    pub fn save_dir<P: AsRef<Path>>(&self, dir: P) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(
            dir.join("meta.json"),
            serde_json::to_string_pretty(&self.meta)?,
        )?;

        let mut structures = BufWriter::new(fs::File::create(dir.join("structures.jsonl"))?);
        for (idx, structure) in self.structures.iter().enumerate() {
            let line = serde_json::json!({
                "iteration": idx + 1,
                "structure": structure.to_report_json(),
            });
            writeln!(structures, "{line}")?;
        }
        structures.flush()?;

        let mut params = BufWriter::new(fs::File::create(dir.join("params.csv"))?);
        writeln!(params, "iteration,component,class,domain,pattern,value")?;
        for (idx, pi) in self.pi.iter().enumerate() {
            for (c, value) in pi.iter().enumerate() {
                writeln!(params, "{},pi,{c},,,{value}", idx + 1)?;
            }
            if let Some(theta) = &self.theta {
                for entry in &theta[idx] {
                    for (r, value) in entry.probs.iter().enumerate() {
                        writeln!(
                            params,
                            "{},theta,{},{},{r},{value}",
                            idx + 1,
                            entry.class,
                            entry.domain
                        )?;
                    }
                }
            }
        }
        params.flush()?;

        let mut loglik = BufWriter::new(fs::File::create(dir.join("loglik.csv"))?);
        let n = self.meta.n_subjects;
        let header: Vec<String> = std::iter::once("iteration".to_string())
            .chain((0..n).map(|i| format!("s{i}")))
            .collect();
        writeln!(loglik, "{}", header.join(","))?;
        for (idx, row) in self.loglik.iter().enumerate() {
            let mut line = String::with_capacity(row.len() * 20 + 8);
            line.push_str(&(idx + 1).to_string());
            for v in row {
                line.push(',');
                line.push_str(&format!("{v}"));
            }
            writeln!(loglik, "{line}")?;
        }
        loglik.flush()?;
        Ok(())
    }

    pub fn load_dir<P: AsRef<Path>>(dir: P) -> Result<ChainRecord> {
        let dir = dir.as_ref();
        let meta: ChainMeta = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;

        let mut structures = Vec::new();
        let reader = BufReader::new(fs::File::open(dir.join("structures.jsonl"))?);
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let value: serde_json::Value = serde_json::from_str(&line)?;
            structures.push(structure_from_report_json(&value["structure"], meta.slots)?);
        }

        let mut pi: Vec<Vec<f64>> = Vec::new();
        let mut theta: Vec<Vec<ThetaEntry>> = Vec::new();
        let mut saw_theta = false;
        {
            let mut reader = csv::Reader::from_path(dir.join("params.csv"))?;
            for row in reader.records() {
                let row = row?;
                let iteration: usize = row[0].parse().map_err(|_| bad_cell(&row, 0))?;
                while pi.len() < iteration {
                    pi.push(Vec::new());
                    theta.push(Vec::new());
                }
                let value: f64 = row[5].parse().map_err(|_| bad_cell(&row, 5))?;
                match &row[1] {
                    "pi" => pi[iteration - 1].push(value),
                    "theta" => {
                        saw_theta = true;
                        let class: u32 = row[2].parse().map_err(|_| bad_cell(&row, 2))?;
                        let domain: u32 = row[3].parse().map_err(|_| bad_cell(&row, 3))?;
                        let pattern: usize = row[4].parse().map_err(|_| bad_cell(&row, 4))?;
                        let entries = &mut theta[iteration - 1];
                        if entries
                            .last()
                            .map(|e| e.class != class || e.domain != domain)
                            .unwrap_or(true)
                        {
                            entries.push(ThetaEntry {
                                class,
                                domain,
                                probs: Vec::new(),
                            });
                        }
                        let entry = entries.last_mut().expect("entry pushed above");
                        if entry.probs.len() != pattern {
                            return Err(Error::ConfigInvalid(format!(
                                "params.csv theta patterns out of order at iteration {iteration}"
                            )));
                        }
                        entry.probs.push(value);
                    }
                    other => {
                        return Err(Error::ConfigInvalid(format!(
                            "unknown params.csv component {other:?}"
                        )))
                    }
                }
            }
        }

        let mut loglik: Vec<Vec<f64>> = Vec::new();
        {
            let mut reader = csv::Reader::from_path(dir.join("loglik.csv"))?;
            for row in reader.records() {
                let row = row?;
                let values: std::result::Result<Vec<f64>, _> =
                    row.iter().skip(1).map(|v| v.parse::<f64>()).collect();
                loglik.push(values.map_err(|_| bad_cell(&row, 1))?);
            }
        }

        Ok(ChainRecord {
            meta,
            structures,
            pi,
            theta: if saw_theta { Some(theta) } else { None },
            loglik,
        })
    }
}

fn bad_cell(row: &csv::StringRecord, idx: usize) -> Error {
    Error::ConfigInvalid(format!(
        "unparseable cell {:?} in record file",
        row.get(idx).unwrap_or("")
    ))
}

/// Rebuilds a structure from its report JSON (`{mode, E, classes: [...]}`).
pub fn structure_from_report_json(
    value: &serde_json::Value,
    slots: u32,
) -> Result<DomainStructure> {
    let mode = match value["mode"].as_str() {
        Some("homogeneous") => StructureMode::Homogeneous,
        Some("heterogeneous") => StructureMode::Heterogeneous,
        Some("partial") => StructureMode::Partial,
        other => {
            return Err(Error::ConfigInvalid(format!(
                "unknown structure mode {other:?}"
            )))
        }
    };
    let equivalence: Vec<u32> = value["E"]
        .as_array()
        .ok_or_else(|| Error::ConfigInvalid("structure JSON lacks E".into()))?
        .iter()
        .map(|v| v.as_u64().unwrap_or(0) as u32)
        .collect();
    let classes = value["classes"]
        .as_array()
        .ok_or_else(|| Error::ConfigInvalid("structure JSON lacks classes".into()))?;
    let mut delta: Vec<Vec<u32>> = Vec::with_capacity(classes.len());
    for class in classes {
        let domains = class["domains"]
            .as_array()
            .ok_or_else(|| Error::ConfigInvalid("structure JSON lacks domains".into()))?;
        let items: usize = domains
            .iter()
            .map(|d| d.as_array().map(|a| a.len()).unwrap_or(0))
            .sum();
        let mut col = vec![0u32; items];
        for (d, members) in domains.iter().enumerate() {
            for item in members.as_array().unwrap_or(&Vec::new()) {
                let j = item.as_u64().ok_or_else(|| {
                    Error::ConfigInvalid("non-integer item in structure JSON".into())
                })? as usize;
                if j >= items {
                    return Err(Error::ConfigInvalid(format!(
                        "item {j} out of range in structure JSON"
                    )));
                }
                col[j] = d as u32;
            }
        }
        delta.push(col);
    }
    DomainStructure::new(delta, slots, mode, Some(&equivalence))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StructureMode;
    use crate::sampler::SamplerConfig;

    fn sample_record() -> ChainRecord {
        let s1 =
            DomainStructure::all_singletons(3, 2, 8, StructureMode::Homogeneous, None).unwrap();
        let s2 = DomainStructure::new(
            vec![vec![0, 0, 1], vec![0, 0, 1]],
            8,
            StructureMode::Homogeneous,
            None,
        )
        .unwrap()
        .canonicalize();
        ChainRecord {
            meta: ChainMeta {
                chain_index: 0,
                seed: 42,
                config: SamplerConfig::new(2),
                n_subjects: 2,
                n_items: 3,
                cardinalities: vec![2, 2, 2],
                slots: 8,
                warmup: 1,
                main: 1,
                proposals: 6,
                accepted: 1,
                acceptance_rate: 1.0 / 6.0,
                runtime_ms: 5,
            },
            structures: vec![s1, s2],
            pi: vec![vec![0.5, 0.5], vec![0.25, 0.75]],
            theta: Some(vec![
                vec![ThetaEntry {
                    class: 0,
                    domain: 0,
                    probs: vec![0.5, 0.5],
                }],
                vec![ThetaEntry {
                    class: 0,
                    domain: 0,
                    probs: vec![0.1, 0.2, 0.3, 0.4],
                }],
            ]),
            loglik: vec![vec![-1.0, -2.0], vec![-1.5, -2.5]],
        }
    }

    #[test]
    fn save_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let record = sample_record();
        record.save_dir(dir.path()).unwrap();
        let loaded = ChainRecord::load_dir(dir.path()).unwrap();
        assert_eq!(loaded.structures.len(), 2);
        assert!(
            crate::model::structures_equal(&loaded.structures[0], &record.structures[0]).unwrap()
        );
        assert!(
            crate::model::structures_equal(&loaded.structures[1], &record.structures[1]).unwrap()
        );
        assert_eq!(loaded.pi, record.pi);
        assert_eq!(loaded.theta, record.theta);
        assert_eq!(loaded.loglik, record.loglik);
        assert_eq!(loaded.meta.seed, 42);
    }
}
