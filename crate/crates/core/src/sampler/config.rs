//! Sampler configuration and its resolution against a dataset.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, DomainStructure, Hyperparams, StructureMode};
use crate::priors::PriorSpec;

/// Which latent class model to fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Traditional LCM: the all-singleton structure, held fixed.
    Traditional,
    Homogeneous,
    Heterogeneous,
    Partial,
}

impl ModelKind {
    pub fn mode(self) -> StructureMode {
        match self {
            ModelKind::Traditional | ModelKind::Homogeneous => StructureMode::Homogeneous,
            ModelKind::Heterogeneous => StructureMode::Heterogeneous,
            ModelKind::Partial => StructureMode::Partial,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelKind::Traditional => "traditional",
            ModelKind::Homogeneous => "homogeneous",
            ModelKind::Heterogeneous => "heterogeneous",
            ModelKind::Partial => "partial",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "traditional" => Ok(ModelKind::Traditional),
            "homogeneous" => Ok(ModelKind::Homogeneous),
            "heterogeneous" => Ok(ModelKind::Heterogeneous),
            "partial" => Ok(ModelKind::Partial),
            other => Err(Error::ConfigInvalid(format!(
                "unknown model kind {other:?}"
            ))),
        }
    }
}

/// How the chain start is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SeedStyle {
    /// L1 farthest-point class centers and an all-singleton structure.
    #[default]
    Default,
    /// Uniform random classes and a structure drawn from the uniform prior.
    Random,
}

impl std::fmt::Display for SeedStyle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SeedStyle::Default => "default",
            SeedStyle::Random => "random",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for SeedStyle {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(SeedStyle::Default),
            "random" => Ok(SeedStyle::Random),
            other => Err(Error::ConfigInvalid(format!(
                "unknown seed style {other:?}"
            ))),
        }
    }
}

fn default_chains() -> u32 {
    1
}
fn default_true() -> bool {
    true
}

/// Everything needed to run chains on one dataset.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub classes: u32,
    #[serde(default = "default_chains")]
    pub chains: u32,
    pub warmup: u32,
    pub main: u32,
    pub model: ModelKind,
    /// Class-group labels for partial mode.
    #[serde(default)]
    pub equivalence: Option<Vec<u32>>,
    #[serde(default)]
    pub hyper: Hyperparams,
    /// Collapse theta and pi when resampling classes.
    #[serde(default)]
    pub collapsed_class_update: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub seed_style: SeedStyle,
    /// Hold the structure fixed at this value (implied by `traditional`).
    #[serde(default)]
    pub fixed_structure: Option<DomainStructure>,
    /// Store per-iteration theta and pi (disable to save space in studies).
    #[serde(default = "default_true")]
    pub record_params: bool,
    /// Run the full count audit every k iterations (debug builds audit at a
    /// coarse default interval when unset).
    #[serde(default)]
    pub audit_every: Option<u32>,
}

impl SamplerConfig {
    pub fn new(classes: u32) -> Self {
        SamplerConfig {
            classes,
            chains: 1,
            warmup: 1000,
            main: 5000,
            model: ModelKind::Homogeneous,
            equivalence: None,
            hyper: Hyperparams::default(),
            collapsed_class_update: false,
            seed: 0,
            seed_style: SeedStyle::Default,
            fixed_structure: None,
            record_params: true,
            audit_every: None,
        }
    }

    /// Validates the configuration against a dataset and fills in defaults.
    pub fn resolve(&self, data: &Dataset) -> Result<Resolved> {
        let items = data.n_items();
        if self.classes == 0 {
            return Err(Error::ConfigInvalid("need at least one class".into()));
        }
        if self.chains == 0 {
            return Err(Error::ConfigInvalid("need at least one chain".into()));
        }
        if !(0.0..1.0).contains(&self.hyper.p_empty) {
            return Err(Error::ConfigInvalid("p_empty must be in [0, 1)".into()));
        }
        if self.hyper.max_items == 0 {
            return Err(Error::ConfigInvalid("max_items must be positive".into()));
        }
        if self.hyper.alpha_theta <= 0.0 {
            return Err(Error::ConfigInvalid("alpha_theta must be positive".into()));
        }
        let classes = self.classes as usize;
        let alpha_class = match &self.hyper.alpha_class {
            Some(v) => {
                if v.len() != classes {
                    return Err(Error::ConfigInvalid(format!(
                        "{} alpha_class entries for {} classes",
                        v.len(),
                        classes
                    )));
                }
                if v.iter().any(|&a| a <= 0.0) {
                    return Err(Error::ConfigInvalid("alpha_class must be positive".into()));
                }
                v.clone()
            }
            None => vec![1.0; classes],
        };
        let slots = match (self.hyper.slots, self.hyper.prior_q) {
            (Some(slots), _) => slots,
            (None, Some(q)) => {
                if q < 0.0 {
                    return Err(Error::ConfigInvalid("prior_q must be nonnegative".into()));
                }
                (crate::priors::min_slots_for_ratio(items as u32, q) as u32).max(items as u32)
            }
            (None, None) => ((items * items).saturating_sub(1)).max(items) as u32,
        };
        let total = self.warmup as u64 + self.main as u64;
        if total == 0 {
            return Err(Error::ConfigInvalid("need at least one iteration".into()));
        }
        let mode = self.model.mode();
        let n_homo_iters = if mode == StructureMode::Homogeneous {
            0
        } else {
            let default = ((total as f64 * 0.05).ceil() as u32).min(1000);
            let n = self.hyper.n_homo_iters.unwrap_or(default);
            if n > self.warmup {
                return Err(Error::ConfigInvalid(format!(
                    "warmup ({}) must cover the homogeneous warmup ({n})",
                    self.warmup
                )));
            }
            n
        };
        let equivalence = match mode {
            StructureMode::Partial => {
                let eq = self.equivalence.as_ref().ok_or_else(|| {
                    Error::ConfigInvalid("partial model needs equivalence labels".into())
                })?;
                if eq.len() != classes {
                    return Err(Error::ConfigInvalid(format!(
                        "{} equivalence labels for {} classes",
                        eq.len(),
                        classes
                    )));
                }
                Some(eq.clone())
            }
            _ => None,
        };
        let prior = PriorSpec {
            kind: self.hyper.prior_kind,
            slots,
            alpha_theta: self.hyper.alpha_theta,
        };
        prior.validate()?;
        // Reject configurations whose largest allowed domain would overflow
        // the pattern id range.
        let mut sorted_q: Vec<u32> = data.cardinalities().to_vec();
        sorted_q.sort_unstable_by(|a, b| b.cmp(a));
        let log2_max: f64 = sorted_q
            .iter()
            .take(self.hyper.max_items as usize)
            .map(|&q| (q as f64).log2())
            .sum();
        if log2_max > 31.0 {
            return Err(Error::ConfigInvalid(format!(
                "max_items {} with these cardinalities allows more than 2^31 patterns",
                self.hyper.max_items
            )));
        }
        let fixed_structure = match (self.model, &self.fixed_structure) {
            (ModelKind::Traditional, None) => Some(DomainStructure::all_singletons(
                items,
                classes,
                slots,
                StructureMode::Homogeneous,
                None,
            )?),
            (_, Some(s)) => {
                if s.n_items() != items || s.n_classes() != classes {
                    return Err(Error::ConfigInvalid(format!(
                        "fixed structure is {}x{}, dataset/model need {items}x{classes}",
                        s.n_items(),
                        s.n_classes()
                    )));
                }
                Some(s.clone())
            }
            (_, None) => None,
        };
        Ok(Resolved {
            classes,
            chains: self.chains,
            warmup: self.warmup,
            main: self.main,
            mode,
            equivalence,
            alpha_class,
            alpha_theta: self.hyper.alpha_theta,
            slots,
            p_empty: self.hyper.p_empty,
            n_domain_iters: self.hyper.n_domain_iters.unwrap_or(items as u32).max(1),
            max_items: self.hyper.max_items,
            n_homo_iters,
            prior,
            collapsed_class_update: self.collapsed_class_update,
            seed: self.seed,
            seed_style: self.seed_style,
            fixed_structure,
            record_params: self.record_params,
            audit_every: self.audit_every,
        })
    }
}

/// A fully concrete configuration.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub classes: usize,
    pub chains: u32,
    pub warmup: u32,
    pub main: u32,
    pub mode: StructureMode,
    pub equivalence: Option<Vec<u32>>,
    pub alpha_class: Vec<f64>,
    pub alpha_theta: f64,
    pub slots: u32,
    pub p_empty: f64,
    pub n_domain_iters: u32,
    pub max_items: u32,
    pub n_homo_iters: u32,
    pub prior: PriorSpec,
    pub collapsed_class_update: bool,
    pub seed: u64,
    pub seed_style: SeedStyle,
    pub fixed_structure: Option<DomainStructure>,
    pub record_params: bool,
    pub audit_every: Option<u32>,
}

impl Resolved {
    pub fn total_iterations(&self) -> u32 {
        self.warmup + self.main
    }

    /// Default prior kind used for traditional fits does not matter: the
    /// structure never moves. Everything else still validates.
    pub fn prior_spec(&self) -> PriorSpec {
        self.prior
    }
}
