//! Shared model types: datasets, domain structures, parameters, and chain state.
//!
//! A domain structure assigns every (item, class) pair to a domain id. Items
//! sharing a domain within a class are modeled jointly; items in different
//! domains are conditionally independent given class. Domain ids are purely
//! operational: comparison, persistence, and reporting all go through
//! [`DomainStructure::canonicalize`].

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::MappingVector;
use crate::error::{Error, Result};

/// An n-by-J matrix of integer-coded categorical responses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    n: usize,
    items: usize,
    responses: Vec<u32>,
    cardinalities: Vec<u32>,
    item_names: Option<Vec<String>>,
}

/// Non-fatal findings produced while validating raw data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DataWarning {
    /// Every subject gave the same response to this item.
    ConstantItem { item: usize },
    /// A category below the inferred cardinality never appears in the data.
    UnobservedCategory { item: usize, code: u32 },
}

impl fmt::Display for DataWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataWarning::ConstantItem { item } => {
                write!(f, "item {item} is constant across all subjects")
            }
            DataWarning::UnobservedCategory { item, code } => {
                write!(f, "item {item} never takes category {code}")
            }
        }
    }
}

impl Dataset {
    /// Builds a dataset from pre-validated rows. Rows may be empty (n = 0);
    /// that form is used by generators and prior-only sampling.
    pub fn new(
        rows: &[Vec<u32>],
        cardinalities: Vec<u32>,
        item_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let items = cardinalities.len();
        if items == 0 {
            return Err(Error::ConfigInvalid(
                "dataset needs at least one item".into(),
            ));
        }
        if cardinalities.iter().any(|&q| q < 2) {
            return Err(Error::ConfigInvalid(
                "every item needs at least two categories".into(),
            ));
        }
        if let Some(names) = &item_names {
            if names.len() != items {
                return Err(Error::DimensionMismatch(format!(
                    "{} item names for {} items",
                    names.len(),
                    items
                )));
            }
        }
        let mut responses = Vec::with_capacity(rows.len() * items);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != items {
                return Err(Error::NonRectangular {
                    row: i,
                    got: row.len(),
                    expected: items,
                });
            }
            for (j, &code) in row.iter().enumerate() {
                if code >= cardinalities[j] {
                    return Err(Error::CodeOutOfRange {
                        row: i,
                        item: j,
                        code: code as i64,
                        cardinality: cardinalities[j],
                    });
                }
                responses.push(code);
            }
        }
        Ok(Dataset {
            n: rows.len(),
            items,
            responses,
            cardinalities,
            item_names,
        })
    }

    /// Validates a raw table of integer codes and infers cardinalities.
    ///
    /// Each Q_j defaults to (max observed code + 1), clamped to at least 2,
    /// unless overridden. Negative codes and ragged rows are rejected;
    /// constant items and unobserved categories produce warnings.
    pub fn validate(
        raw: &[Vec<i64>],
        item_names: Option<Vec<String>>,
        cardinality_override: Option<Vec<u32>>,
    ) -> Result<(Self, Vec<DataWarning>)> {
        if raw.is_empty() {
            return Err(Error::ConfigInvalid("dataset has no rows".into()));
        }
        let items = raw[0].len();
        if items == 0 {
            return Err(Error::ConfigInvalid("dataset has no items".into()));
        }
        for (i, row) in raw.iter().enumerate() {
            if row.len() != items {
                return Err(Error::NonRectangular {
                    row: i,
                    got: row.len(),
                    expected: items,
                });
            }
            for (j, &code) in row.iter().enumerate() {
                if code < 0 {
                    return Err(Error::NegativeCode {
                        row: i,
                        item: j,
                        code,
                    });
                }
            }
        }
        let mut cardinalities = vec![0u32; items];
        for row in raw {
            for (j, &code) in row.iter().enumerate() {
                cardinalities[j] = cardinalities[j].max(code as u32 + 1);
            }
        }
        let mut warnings = Vec::new();
        for (j, q) in cardinalities.iter_mut().enumerate() {
            if *q <= 1 {
                warnings.push(DataWarning::ConstantItem { item: j });
                *q = 2;
            }
        }
        if let Some(over) = cardinality_override {
            if over.len() != items {
                return Err(Error::DimensionMismatch(format!(
                    "{} cardinality overrides for {} items",
                    over.len(),
                    items
                )));
            }
            for (j, (&q, inferred)) in over.iter().zip(&cardinalities).enumerate() {
                if q < *inferred {
                    return Err(Error::ConfigInvalid(format!(
                        "cardinality override {q} for item {j} is below observed maximum {inferred}"
                    )));
                }
            }
            cardinalities = over;
        }
        // Unobserved categories within the final cardinalities.
        for j in 0..items {
            let mut seen = vec![false; cardinalities[j] as usize];
            for row in raw {
                seen[row[j] as usize] = true;
            }
            for (code, present) in seen.iter().enumerate() {
                if !present {
                    warnings.push(DataWarning::UnobservedCategory {
                        item: j,
                        code: code as u32,
                    });
                }
            }
        }
        let rows: Vec<Vec<u32>> = raw
            .iter()
            .map(|row| row.iter().map(|&c| c as u32).collect())
            .collect();
        let data = Dataset::new(&rows, cardinalities, item_names)?;
        Ok((data, warnings))
    }

    /// Reads a CSV file with a header row of item names and integer cells.
    pub fn read_csv<P: AsRef<Path>>(
        path: P,
        cardinality_override: Option<Vec<u32>>,
    ) -> Result<(Self, Vec<DataWarning>)> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let names: Vec<String> = reader.headers()?.iter().map(|s| s.to_string()).collect();
        let mut raw = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record?;
            let mut row = Vec::with_capacity(names.len());
            for (j, cell) in record.iter().enumerate() {
                let code: i64 = cell.parse().map_err(|_| Error::InvalidCell {
                    row: i,
                    item: j,
                    cell: cell.to_string(),
                })?;
                row.push(code);
            }
            raw.push(row);
        }
        Dataset::validate(&raw, Some(names), cardinality_override)
    }

    pub fn n_subjects(&self) -> usize {
        self.n
    }

    pub fn n_items(&self) -> usize {
        self.items
    }

    pub fn cardinalities(&self) -> &[u32] {
        &self.cardinalities
    }

    pub fn item_names(&self) -> Option<&[String]> {
        self.item_names.as_deref()
    }

    #[inline]
    pub fn response(&self, subject: usize, item: usize) -> u32 {
        self.responses[subject * self.items + item]
    }

    #[inline]
    pub fn row(&self, subject: usize) -> &[u32] {
        &self.responses[subject * self.items..(subject + 1) * self.items]
    }

    /// Writes the dataset as CSV with a header of item names.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        let names: Vec<String> = match &self.item_names {
            Some(names) => names.clone(),
            None => (0..self.items).map(|j| format!("item_{j}")).collect(),
        };
        writer.write_record(&names)?;
        for i in 0..self.n {
            let row: Vec<String> = self.row(i).iter().map(|c| c.to_string()).collect();
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// How per-class partitions are constrained across classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureMode {
    /// Every class shares one partition.
    Homogeneous,
    /// Each class has its own partition.
    Heterogeneous,
    /// Classes in the same equivalence group share a partition.
    Partial,
}

impl fmt::Display for StructureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StructureMode::Homogeneous => "homogeneous",
            StructureMode::Heterogeneous => "heterogeneous",
            StructureMode::Partial => "partial",
        };
        f.write_str(s)
    }
}

/// The J-by-C assignment of items to domain slots, with its sharing mode.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainStructure {
    /// delta[c][j] = domain slot of item j in class c.
    delta: Vec<Vec<u32>>,
    /// Total domain slots D.
    slots: u32,
    mode: StructureMode,
    /// Class-group labels (normalized to first-occurrence order).
    equivalence: Vec<u32>,
}

/// One equivalence group of classes sharing a partition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassGroup {
    /// Lowest class index in the group; its column represents the partition.
    pub representative: usize,
    /// All classes in the group, ascending.
    pub classes: Vec<usize>,
}

fn normalize_groups(labels: &[u32]) -> Vec<u32> {
    let mut map = HashMap::new();
    let mut next = 0u32;
    labels
        .iter()
        .map(|&l| {
            *map.entry(l).or_insert_with(|| {
                let id = next;
                next += 1;
                id
            })
        })
        .collect()
}

impl DomainStructure {
    /// Builds and validates a structure from per-class slot assignments.
    pub fn new(
        delta: Vec<Vec<u32>>,
        slots: u32,
        mode: StructureMode,
        equivalence: Option<&[u32]>,
    ) -> Result<Self> {
        let classes = delta.len();
        if classes == 0 {
            return Err(Error::StructureInvalid("no classes".into()));
        }
        let items = delta[0].len();
        if items == 0 {
            return Err(Error::StructureInvalid("no items".into()));
        }
        for col in &delta {
            if col.len() != items {
                return Err(Error::StructureInvalid(
                    "per-class assignments differ in length".into(),
                ));
            }
            if let Some(&d) = col.iter().find(|&&d| d >= slots) {
                return Err(Error::StructureInvalid(format!(
                    "domain id {d} out of range for {slots} slots"
                )));
            }
        }
        let equivalence = match mode {
            StructureMode::Homogeneous => vec![0; classes],
            StructureMode::Heterogeneous => (0..classes as u32).collect(),
            StructureMode::Partial => {
                let labels = equivalence.ok_or_else(|| {
                    Error::StructureInvalid("partial mode needs equivalence labels".into())
                })?;
                if labels.len() != classes {
                    return Err(Error::StructureInvalid(format!(
                        "{} equivalence labels for {} classes",
                        labels.len(),
                        classes
                    )));
                }
                normalize_groups(labels)
            }
        };
        let structure = DomainStructure {
            delta,
            slots,
            mode,
            equivalence,
        };
        for group in structure.class_groups() {
            for &c in &group.classes {
                if structure.delta[c] != structure.delta[group.representative] {
                    return Err(Error::StructureInvalid(format!(
                        "classes {} and {} are grouped but have different partitions",
                        group.representative, c
                    )));
                }
            }
        }
        Ok(structure)
    }

    /// The traditional-LCM structure: every item in its own domain.
    pub fn all_singletons(
        items: usize,
        classes: usize,
        slots: u32,
        mode: StructureMode,
        equivalence: Option<&[u32]>,
    ) -> Result<Self> {
        if (slots as usize) < items {
            return Err(Error::StructureInvalid(format!(
                "{slots} slots cannot hold {items} singleton domains"
            )));
        }
        let col: Vec<u32> = (0..items as u32).collect();
        DomainStructure::new(vec![col; classes], slots, mode, equivalence)
    }

    pub fn n_items(&self) -> usize {
        self.delta[0].len()
    }

    pub fn n_classes(&self) -> usize {
        self.delta.len()
    }

    pub fn slots(&self) -> u32 {
        self.slots
    }

    pub fn mode(&self) -> StructureMode {
        self.mode
    }

    pub fn equivalence(&self) -> &[u32] {
        &self.equivalence
    }

    #[inline]
    pub fn domain_of(&self, item: usize, class: usize) -> u32 {
        self.delta[class][item]
    }

    pub fn delta(&self) -> &[Vec<u32>] {
        &self.delta
    }

    /// Class groups in order of their representative class.
    pub fn class_groups(&self) -> Vec<ClassGroup> {
        let mut by_label: HashMap<u32, Vec<usize>> = HashMap::new();
        for (c, &label) in self.equivalence.iter().enumerate() {
            by_label.entry(label).or_default().push(c);
        }
        let mut groups: Vec<ClassGroup> = by_label
            .into_values()
            .map(|classes| ClassGroup {
                representative: classes[0],
                classes,
            })
            .collect();
        groups.sort_by_key(|g| g.representative);
        groups
    }

    /// Ids of nonempty domains in a class, ascending.
    pub fn nonempty_domains(&self, class: usize) -> Vec<u32> {
        let mut ids: Vec<u32> = self.delta[class].clone();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Items of domain (class, d), ascending.
    pub fn items_in(&self, class: usize, domain: u32) -> Vec<usize> {
        (0..self.n_items())
            .filter(|&j| self.delta[class][j] == domain)
            .collect()
    }

    /// Nonempty domains of a class as sorted item sets, ordered by smallest
    /// member item.
    pub fn class_partition(&self, class: usize) -> Vec<Vec<usize>> {
        let mut by_domain: HashMap<u32, Vec<usize>> = HashMap::new();
        for (j, &d) in self.delta[class].iter().enumerate() {
            by_domain.entry(d).or_default().push(j);
        }
        let mut parts: Vec<Vec<usize>> = by_domain.into_values().collect();
        parts.sort_by_key(|items| items[0]);
        parts
    }

    /// Relabels domains deterministically: within each class group, nonempty
    /// domains are renumbered 0, 1, 2, ... in order of their smallest member
    /// item. Two structures describing the same partitions canonicalize
    /// identically.
    pub fn canonicalize(&self) -> DomainStructure {
        let mut delta = self.delta.clone();
        for group in self.class_groups() {
            let parts = self.class_partition(group.representative);
            let mut relabel: HashMap<u32, u32> = HashMap::new();
            for (new_id, items) in parts.iter().enumerate() {
                relabel.insert(self.delta[group.representative][items[0]], new_id as u32);
            }
            for &c in &group.classes {
                for j in 0..self.n_items() {
                    delta[c][j] = relabel[&self.delta[c][j]];
                }
            }
        }
        DomainStructure {
            delta,
            slots: self.slots,
            mode: self.mode,
            equivalence: self.equivalence.clone(),
        }
    }

    /// A compact hashable key of the canonical form.
    pub fn canonical_key(&self) -> Vec<u32> {
        let canon = self.canonicalize();
        let mut key = Vec::with_capacity(canon.delta.len() * canon.n_items() + canon.delta.len());
        key.extend(canon.equivalence.iter().copied());
        for col in &canon.delta {
            key.extend(col.iter().copied());
        }
        key
    }

    /// Report form: `{mode, E, classes: [{class, domains: [[items]]}]}`.
    pub fn to_report_json(&self) -> serde_json::Value {
        let classes: Vec<serde_json::Value> = (0..self.n_classes())
            .map(|c| {
                serde_json::json!({
                    "class": c,
                    "domains": self.class_partition(c),
                })
            })
            .collect();
        serde_json::json!({
            "mode": self.mode.to_string(),
            "E": self.equivalence,
            "classes": classes,
        })
    }
}

/// True when two structures describe the same partitions, ignoring the
/// operational domain labels. Class labels are respected; see
/// [`crate::diagnostics::structures_match_up_to_class_relabel`] for the
/// class-label-invariant comparison used when scoring recovery.
pub fn structures_equal(a: &DomainStructure, b: &DomainStructure) -> Result<bool> {
    if a.n_items() != b.n_items() || a.n_classes() != b.n_classes() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{} structure",
            a.n_items(),
            a.n_classes(),
            b.n_items(),
            b.n_classes()
        )));
    }
    if a.mode != b.mode {
        return Err(Error::DimensionMismatch(format!(
            "mode {} vs {}",
            a.mode, b.mode
        )));
    }
    let ca = a.canonicalize();
    let cb = b.canonicalize();
    Ok(ca.delta == cb.delta && ca.equivalence == cb.equivalence)
}

/// Class weights and per-domain pattern probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Class probabilities, summing to one.
    pub pi: Vec<f64>,
    /// theta[class][slot] is the pattern probability vector of domain
    /// (class, slot); empty for empty slots.
    pub theta: Vec<Vec<Vec<f64>>>,
}

impl ModelParams {
    /// Empty parameter holder shaped for `classes` classes and `slots` slots.
    pub fn empty(classes: usize, slots: u32) -> Self {
        ModelParams {
            pi: vec![1.0 / classes as f64; classes],
            theta: vec![vec![Vec::new(); slots as usize]; classes],
        }
    }

    /// Checks simplex and shape invariants against a structure.
    pub fn validate(&self, structure: &DomainStructure, cardinalities: &[u32]) -> Result<()> {
        if self.pi.len() != structure.n_classes() {
            return Err(Error::DimensionMismatch(format!(
                "{} class weights for {} classes",
                self.pi.len(),
                structure.n_classes()
            )));
        }
        if (self.pi.iter().sum::<f64>() - 1.0).abs() > 1e-8 || self.pi.iter().any(|&p| p <= 0.0) {
            return Err(Error::ConfigInvalid(
                "class weights must be positive and sum to one".into(),
            ));
        }
        for (c, per_class) in self.theta.iter().enumerate() {
            if per_class.len() != structure.slots() as usize {
                return Err(Error::DimensionMismatch(format!(
                    "class {c} has {} theta slots, structure has {}",
                    per_class.len(),
                    structure.slots()
                )));
            }
            for d in structure.nonempty_domains(c) {
                let items = structure.items_in(c, d);
                let mv = MappingVector::new(&items, cardinalities)?;
                let vec = &per_class[d as usize];
                if vec.len() as u64 != mv.pattern_count() {
                    return Err(Error::DimensionMismatch(format!(
                        "theta[{c}][{d}] has {} entries, domain has {} patterns",
                        vec.len(),
                        mv.pattern_count()
                    )));
                }
                if (vec.iter().sum::<f64>() - 1.0).abs() > 1e-8 || vec.iter().any(|&p| p < 0.0) {
                    return Err(Error::ConfigInvalid(format!(
                        "theta[{c}][{d}] must be nonnegative and sum to one"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Prior and proposal hyperparameters.
///
/// Optional fields default against the dataset and iteration plan:
/// `slots` to J^2 - 1, `n_domain_iters` to J, and `n_homo_iters` to
/// min(5% of total iterations, 1000).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Dirichlet prior on class weights; `None` means all ones.
    pub alpha_class: Option<Vec<f64>>,
    /// Symmetric Dirichlet concentration for every theta vector.
    pub alpha_theta: f64,
    /// Domain slots D.
    pub slots: Option<u32>,
    /// Probability of proposing the first empty slot as the second domain.
    pub p_empty: f64,
    /// Metropolis-Hastings repeats per sweep and class group.
    pub n_domain_iters: Option<u32>,
    /// Largest allowed number of items in one domain.
    pub max_items: u32,
    /// Warmup iterations run under homogeneous restrictions.
    pub n_homo_iters: Option<u32>,
    /// Structure prior family.
    pub prior_kind: crate::priors::PriorKind,
    /// Demanded simplicity-bias ratio q; sets the slot count to the smallest
    /// D making singletons q times as likely as one pair, when `slots` is
    /// not given explicitly.
    pub prior_q: Option<f64>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            alpha_class: None,
            alpha_theta: 1.0,
            slots: None,
            p_empty: 0.3,
            n_domain_iters: None,
            max_items: 10,
            n_homo_iters: None,
            prior_kind: crate::priors::PriorKind::Bucket,
            prior_q: None,
        }
    }
}

/// Full state of one chain worker.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub structure: DomainStructure,
    pub params: ModelParams,
    pub classes: Vec<u32>,
    /// Class occupancy n^(c).
    pub counts_class: Vec<u32>,
    /// Pattern occupancy n^(theta): counts_theta[class][slot][pattern].
    pub counts_theta: Vec<Vec<Vec<u32>>>,
    pub rng: ChaCha8Rng,
    pub iteration: u64,
}

/// Pattern-occupancy counts indexed by class, slot, and pattern id.
pub type ThetaCounts = Vec<Vec<Vec<u32>>>;

impl ChainState {
    /// Recomputes both count tables from scratch.
    pub fn recompute_counts(&self, data: &Dataset) -> Result<(Vec<u32>, ThetaCounts)> {
        let classes = self.structure.n_classes();
        let mut counts_class = vec![0u32; classes];
        for i in 0..data.n_subjects() {
            counts_class[self.classes[i] as usize] += 1;
        }
        let mut counts_theta = vec![vec![Vec::new(); self.structure.slots() as usize]; classes];
        for (c, per_class) in counts_theta.iter_mut().enumerate() {
            for d in self.structure.nonempty_domains(c) {
                let items = self.structure.items_in(c, d);
                let mv = MappingVector::new(&items, data.cardinalities())?;
                let mut counts = vec![0u32; mv.pattern_count() as usize];
                for i in 0..data.n_subjects() {
                    if self.classes[i] as usize == c {
                        counts[mv.encode(data.row(i)) as usize] += 1;
                    }
                }
                per_class[d as usize] = counts;
            }
        }
        Ok((counts_class, counts_theta))
    }

    /// True when the incrementally maintained counts match a full recount.
    pub fn audit_counts(&self, data: &Dataset) -> Result<bool> {
        let (counts_class, counts_theta) = self.recompute_counts(data)?;
        Ok(counts_class == self.counts_class && counts_theta == self.counts_theta)
    }
}
