//! Built-in reference structures with their known values.
//!
//! Entries are group-spec files extended by `[ranges]`, `[[ground_truth]]`
//! and, optionally, an `[alternate]` spec. Extra entries can be dropped into a
//! catalog directory (`--catalog-dir` or `KORN_CATALOG_DIR`).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{GroupSpec, RangeSet, RawGroup};
use crate::seminorms::{build_subspace, kernel, periodic_subspace_dim, SeminormKind, SubspaceKind};

pub const CATALOG_ENV: &str = "KORN_CATALOG_DIR";

const BUILTIN: [(&str, &str); 5] = [
    ("chain", include_str!("../catalog/chain.toml")),
    ("zigzag", include_str!("../catalog/zigzag.toml")),
    ("helix", include_str!("../catalog/helix.toml")),
    ("square-lattice", include_str!("../catalog/square-lattice.toml")),
    ("c4-vs-klein", include_str!("../catalog/c4-vs-klein.toml")),
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(n, _)| *n)
}

/// Where a reference value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    /// Stated in the literature.
    Published,
    /// Follows by direct arithmetic.
    Elementary,
    /// Obtained by an independent computation and frozen.
    Computed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    AffineDim,
    OrbitSize,
    AlternateSameOrbit,
    #[serde(rename = "property_1")]
    Property1,
    #[serde(rename = "property_2")]
    Property2,
    SubspaceDim,
    PeriodicDim,
    KernelDim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Flag(bool),
    Count(i64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub quantity: Quantity,
    #[serde(default)]
    pub range: Option<String>,
    #[serde(default)]
    pub kind: Option<String>,
    #[serde(default)]
    pub period: Option<usize>,
    pub value: Value,
    pub origin: Origin,
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub spec: Arc<GroupSpec>,
    pub alternate: Option<Arc<GroupSpec>>,
    pub ranges: BTreeMap<String, String>,
    pub ground_truth: Vec<GroundTruth>,
}

impl CatalogEntry {
    pub fn from_toml_str(src: &str) -> Result<Self> {
        let mut table: toml::Table = src.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        let ranges: BTreeMap<String, String> = match table.remove("ranges") {
            Some(v) => v.try_into().map_err(|e: toml::de::Error| Error::Parse(format!("ranges: {e}")))?,
            None => BTreeMap::new(),
        };
        let ground_truth: Vec<GroundTruth> = match table.remove("ground_truth") {
            Some(v) => v
                .try_into()
                .map_err(|e: toml::de::Error| Error::Parse(format!("ground_truth: {e}")))?,
            None => Vec::new(),
        };
        let alternate = match table.remove("alternate") {
            Some(v) => {
                let raw: RawGroup =
                    v.try_into().map_err(|e: toml::de::Error| Error::Parse(format!("alternate: {e}")))?;
                Some(Arc::new(GroupSpec::from_raw(raw)?))
            }
            None => None,
        };
        let raw: RawGroup = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        let spec = Arc::new(GroupSpec::from_raw(raw)?);
        let entry = CatalogEntry { name: spec.name.clone(), spec, alternate, ranges, ground_truth };
        for name in entry.ranges.keys() {
            entry.range(name)?;
        }
        Ok(entry)
    }

    pub fn range(&self, name: &str) -> Result<RangeSet> {
        let expr = self
            .ranges
            .get(name)
            .ok_or_else(|| Error::InvalidRange(format!("{} has no range `{name}`", self.name)))?;
        RangeSet::parse(&self.spec, expr)
    }

    /// Recomputes every reference value; returns `(entry, computed)` pairs.
    pub fn verify(&self) -> Result<Vec<(GroundTruth, Value)>> {
        self.ground_truth.iter().map(|gt| Ok((gt.clone(), self.compute(gt)?))).collect()
    }

    fn compute(&self, gt: &GroundTruth) -> Result<Value> {
        let spec = &self.spec;
        let need_range = || -> Result<RangeSet> {
            let name = gt.range.as_deref().ok_or_else(|| Error::Parse("ground truth needs `range`".into()))?;
            self.range(name)
        };
        let need_period = || gt.period.ok_or_else(|| Error::Parse("ground truth needs `period`".into()));
        let need_kind = || gt.kind.clone().ok_or_else(|| Error::Parse("ground truth needs `kind`".into()));
        let count = |n: usize| Value::Count(n as i64);
        Ok(match gt.quantity {
            Quantity::AffineDim => count(spec.affine_dimension(spec.default_sample_radius())),
            Quantity::OrbitSize => count(spec.orbit(spec.default_sample_radius()).len()),
            Quantity::AlternateSameOrbit => {
                let alt = self.alternate.as_ref().ok_or_else(|| Error::Parse("no alternate spec".into()))?;
                let a = spec.orbit(spec.default_sample_radius());
                let b = alt.orbit(alt.default_sample_radius());
                let same = a.len() == b.len() && a.iter().all(|p| b.iter().any(|q| (p - q).norm() < 1e-8));
                Value::Flag(same)
            }
            Quantity::Property1 => Value::Flag(spec.has_property_1(&need_range()?)),
            Quantity::Property2 => Value::Flag(spec.has_property_2(&need_range()?)),
            Quantity::SubspaceDim => {
                let kind = parse_subspace_kind(&need_kind()?)?;
                count(build_subspace(spec, &need_range()?, kind)?.rank())
            }
            Quantity::PeriodicDim => {
                let kind = parse_subspace_kind(&need_kind()?)?;
                count(periodic_subspace_dim(spec, kind, need_period()?)?)
            }
            Quantity::KernelDim => {
                let kind: SeminormKind = need_kind()?.parse()?;
                count(kernel(spec, &need_range()?, kind, need_period()?)?.dim)
            }
        })
    }
}

pub fn parse_subspace_kind(s: &str) -> Result<SubspaceKind> {
    Ok(match s {
        "Trans" => SubspaceKind::Trans,
        "Rot" => SubspaceKind::Rot,
        "Rot0" => SubspaceKind::Rot0,
        "Rot00" => SubspaceKind::Rot00,
        "Iso" => SubspaceKind::Iso,
        "Iso0" => SubspaceKind::Iso0,
        "Iso00" => SubspaceKind::Iso00,
        _ => return Err(Error::InvalidInput(format!("unknown subspace kind `{s}`"))),
    })
}

/// Catalog directory from the argument or the environment.
pub fn catalog_dir(explicit: Option<&Path>) -> Option<PathBuf> {
    explicit.map(Path::to_path_buf).or_else(|| std::env::var_os(CATALOG_ENV).map(PathBuf::from))
}

/// Looks `name` up in `dir` first (as `<name>.toml`), then among the built-ins.
pub fn load_from(name: &str, dir: Option<&Path>) -> Result<CatalogEntry> {
    if let Some(dir) = dir {
        let path = dir.join(format!("{name}.toml"));
        if path.is_file() {
            return CatalogEntry::from_toml_str(&std::fs::read_to_string(path)?);
        }
    }
    let src = BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| *s)
        .ok_or_else(|| Error::UnknownEntry(name.to_string()))?;
    CatalogEntry::from_toml_str(src)
}

pub fn load(name: &str) -> Result<CatalogEntry> {
    load_from(name, None)
}

pub fn load_spec(name: &str) -> Result<GroupSpec> {
    Ok(Arc::unwrap_or_clone(load(name)?.spec))
}
