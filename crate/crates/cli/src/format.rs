//! JSON file formats. Items are numbered from 1 in every file; rationals are
//! `"a/b"` strings.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::de::{self, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use walrus_core::valuation::ExplicitTable;
use walrus_core::{Allocation, Bundle, MarketInstance, Matroid, OracleCounter, PriceVector, Rational, ValuationSpec};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Parses `"a/b"` with `b > 0`. The fraction need not be reduced.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let bad = |why: &str| CliError::Field { field: "rational".into(), message: format!("`{text}` {why}") };
    let (numer, denom) = text.split_once('/').ok_or_else(|| bad("is not of the form a/b"))?;
    let digits = |s: &str, signed: bool| {
        let body = if signed { s.strip_prefix('-').unwrap_or(s) } else { s };
        !body.is_empty() && body.bytes().all(|b| b.is_ascii_digit())
    };
    if !digits(numer, true) || !digits(denom, false) {
        return Err(bad("is not of the form a/b"));
    }
    let numer = BigInt::from_str(numer).map_err(|_| bad("has a malformed numerator"))?;
    let denom = BigInt::from_str(denom).map_err(|_| bad("has a malformed denominator"))?;
    if denom.is_zero() {
        return Err(bad("has a zero denominator"));
    }
    Ok(Rational::new(numer, denom))
}

/// Reduced `a/b`, integers included.
pub fn format_rational(value: &Rational) -> String {
    format!("{}/{}", value.numer(), value.denom())
}

/// Value table keyed by bundle code, written as decimal strings in numeric order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableJson(pub BTreeMap<u64, i64>);

impl Serialize for TableJson {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_map(self.0.iter().map(|(k, v)| (k.to_string(), v)))
    }
}

impl<'de> Deserialize<'de> for TableJson {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct TableVisitor;
        impl<'de> Visitor<'de> for TableVisitor {
            type Value = TableJson;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from decimal bundle codes to integer values")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<TableJson, A::Error> {
                let mut out = BTreeMap::new();
                while let Some((key, value)) = map.next_entry::<String, i64>()? {
                    let canonical = key.bytes().all(|b| b.is_ascii_digit()) && (key == "0" || !key.starts_with('0'));
                    let code = key
                        .parse::<u64>()
                        .ok()
                        .filter(|_| canonical)
                        .ok_or_else(|| de::Error::custom(format!("table key `{key}` is not a decimal bundle code")))?;
                    if out.insert(code, value).is_some() {
                        return Err(de::Error::custom(format!("table key `{key}` appears twice")));
                    }
                }
                Ok(TableJson(out))
            }
        }
        deserializer.deserialize_map(TableVisitor)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BuyerJson {
    Additive { weights: Vec<i64> },
    UnitDemand { values: Vec<i64> },
    UniformRank { rank: usize, weights: Vec<i64> },
    PartitionRank { blocks: Vec<Vec<usize>>, capacities: Vec<usize>, weights: Vec<i64> },
    Table { values: TableJson },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub schema_version: u32,
    pub items: usize,
    pub supply: Vec<u32>,
    pub buyers: Vec<BuyerJson>,
}

fn field(field: String, message: impl Into<String>) -> CliError {
    CliError::Field { field, message: message.into() }
}

fn check_len(name: String, len: usize, items: usize) -> Result<()> {
    if len == items {
        Ok(())
    } else {
        Err(field(name, format!("expected {items} entries, found {len}")))
    }
}

fn check_version(version: u32) -> Result<()> {
    if version == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(field("schema_version".into(), format!("unsupported version {version}, expected {SCHEMA_VERSION}")))
    }
}

impl InstanceFile {
    pub fn from_instance(instance: &MarketInstance) -> Self {
        let buyers = instance
            .buyers()
            .iter()
            .map(|spec| match spec {
                ValuationSpec::Additive { weights } => BuyerJson::Additive { weights: weights.clone() },
                ValuationSpec::UnitDemand { values } => BuyerJson::UnitDemand { values: values.clone() },
                ValuationSpec::WeightedMatroidRank { matroid: Matroid::Uniform { rank }, weights } => {
                    BuyerJson::UniformRank { rank: *rank, weights: weights.clone() }
                }
                ValuationSpec::WeightedMatroidRank { matroid: Matroid::Partition { blocks, capacities }, weights } => {
                    BuyerJson::PartitionRank {
                        blocks: blocks.iter().map(|b| b.iter().map(|j| j + 1).collect()).collect(),
                        capacities: capacities.clone(),
                        weights: weights.clone(),
                    }
                }
                ValuationSpec::ExplicitTable(table) => BuyerJson::Table {
                    values: TableJson(table.values().iter().enumerate().map(|(k, &v)| (k as u64, v)).collect()),
                },
            })
            .collect();
        InstanceFile { schema_version: SCHEMA_VERSION, items: instance.n(), supply: instance.supply().to_vec(), buyers }
    }

    pub fn to_instance(&self) -> Result<MarketInstance> {
        check_version(self.schema_version)?;
        let n = self.items;
        check_len("supply".into(), self.supply.len(), n)?;
        let buyers = self
            .buyers
            .iter()
            .enumerate()
            .map(|(i, buyer)| {
                let at = |name: &str| format!("buyers[{i}].{name}");
                Ok(match buyer {
                    BuyerJson::Additive { weights } => {
                        check_len(at("weights"), weights.len(), n)?;
                        ValuationSpec::additive(weights.clone())
                    }
                    BuyerJson::UnitDemand { values } => {
                        check_len(at("values"), values.len(), n)?;
                        ValuationSpec::unit_demand(values.clone())
                    }
                    BuyerJson::UniformRank { rank, weights } => {
                        check_len(at("weights"), weights.len(), n)?;
                        ValuationSpec::uniform_rank(*rank, weights.clone())
                    }
                    BuyerJson::PartitionRank { blocks, capacities, weights } => {
                        check_len(at("weights"), weights.len(), n)?;
                        check_len(at("capacities"), capacities.len(), blocks.len())?;
                        let blocks = blocks
                            .iter()
                            .map(|b| {
                                b.iter()
                                    .map(|&j| {
                                        if (1..=n).contains(&j) {
                                            Ok(j - 1)
                                        } else {
                                            Err(field(at("blocks"), format!("item {j} is outside 1..={n}")))
                                        }
                                    })
                                    .collect::<Result<Vec<_>>>()
                            })
                            .collect::<Result<Vec<_>>>()?;
                        ValuationSpec::partition_rank(blocks, capacities.clone(), weights.clone())
                    }
                    BuyerJson::Table { values } => {
                        let table = ExplicitTable::from_entries(self.supply.clone(), values.0.iter().map(|(&k, &v)| (k, v)))
                            .map_err(|e| field(at("values"), e.to_string()))?;
                        ValuationSpec::ExplicitTable(table)
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        MarketInstance::new(self.supply.clone(), buyers).map_err(|e| field("buyers".into(), e.to_string()))
    }
}

/// Parses and validates an instance file.
pub fn parse_instance(text: &str) -> Result<MarketInstance> {
    let file: InstanceFile = serde_json::from_str(text)?;
    file.to_instance()
}

/// Pretty JSON with a trailing newline; equal values give equal bytes.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("file types serialize");
    out.push('\n');
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleCallsJson {
    pub value: u64,
    pub demand: u64,
    pub aggregate: u64,
}

impl From<OracleCounter> for OracleCallsJson {
    fn from(c: OracleCounter) -> Self {
        OracleCallsJson { value: c.value_calls, demand: c.demand_calls, aggregate: c.aggregate_calls }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeJson {
    Certified,
    NoEquilibrium,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultFile {
    pub schema_version: u32,
    pub method: String,
    pub outcome: OutcomeJson,
    pub prices: Option<Vec<String>>,
    /// Per buyer, the items received, repeated once per unit.
    pub allocation: Option<Vec<Vec<usize>>>,
    pub welfare: Option<String>,
    pub oracle_calls: OracleCallsJson,
    pub verified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
}

/// Parses a result file without reference to an instance.
pub fn parse_result(text: &str) -> Result<ResultFile> {
    let file: ResultFile = serde_json::from_str(text)?;
    check_version(file.schema_version)?;
    match (&file.outcome, &file.prices, &file.allocation, &file.welfare) {
        (OutcomeJson::Certified, Some(_), Some(_), Some(_)) | (OutcomeJson::NoEquilibrium, None, None, None) => {}
        (OutcomeJson::Certified, ..) => {
            return Err(field("outcome".into(), "a certified result needs prices, allocation and welfare"))
        }
        (OutcomeJson::NoEquilibrium, ..) => {
            return Err(field("outcome".into(), "a result without equilibrium has no prices, allocation or welfare"))
        }
    }
    if let Some(prices) = &file.prices {
        for (j, p) in prices.iter().enumerate() {
            parse_rational(p).map_err(|e| field(format!("prices[{j}]"), e.to_string()))?;
        }
    }
    if let Some(w) = &file.welfare {
        parse_rational(w).map_err(|e| field("welfare".into(), e.to_string()))?;
    }
    if let Some(alloc) = &file.allocation {
        for (i, items) in alloc.iter().enumerate() {
            if items.contains(&0) {
                return Err(field(format!("allocation[{i}]"), "items are numbered from 1"));
            }
        }
    }
    Ok(file)
}

pub fn allocation_to_json(allocation: &Allocation) -> Vec<Vec<usize>> {
    allocation
        .bundles()
        .iter()
        .map(|b| b.quantities().iter().enumerate().flat_map(|(j, &q)| std::iter::repeat(j + 1).take(q as usize)).collect())
        .collect()
}

/// Prices and allocation of a certified result, checked against `instance`'s shape.
pub fn result_certificate(file: &ResultFile, instance: &MarketInstance) -> Result<Option<(PriceVector, Allocation)>> {
    let (Some(prices), Some(alloc)) = (&file.prices, &file.allocation) else { return Ok(None) };
    let n = instance.n();
    check_len("prices".into(), prices.len(), n)?;
    check_len("allocation".into(), alloc.len(), instance.m())?;
    let prices = prices.iter().map(|p| parse_rational(p)).collect::<Result<Vec<_>>>()?;
    let bundles = alloc
        .iter()
        .enumerate()
        .map(|(i, items)| {
            let mut q = vec![0u32; n];
            for &j in items {
                if !(1..=n).contains(&j) {
                    return Err(field(format!("allocation[{i}]"), format!("item {j} is outside 1..={n}")));
                }
                q[j - 1] += 1;
            }
            Ok(Bundle::from_quantities(q))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Some((PriceVector::new(prices), Allocation::new(bundles))))
}

/// Price vector rendered as `"a/b"` strings.
pub fn prices_to_json(prices: &PriceVector) -> Vec<String> {
    prices.as_slice().iter().map(format_rational).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use walrus_core::fixtures;

    #[test]
    fn rationals_round_trip() {
        assert_eq!(format_rational(&parse_rational("2/4").unwrap()), "1/2");
        assert_eq!(format_rational(&parse_rational("-3/1").unwrap()), "-3/1");
        for bad in ["3", "1/0", "1/-2", "a/b", "1//2", " 1/2", "+1/2", "/2", "1/"] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn tables_serialize_in_numeric_order() {
        let t = TableJson((0..12).map(|k| (k, k as i64)).collect());
        let text = serde_json::to_string(&t).unwrap();
        assert!(text.starts_with(r#"{"0":0,"1":1,"2":2"#), "{text}");
        assert!(serde_json::from_str::<TableJson>(r#"{"01": 3}"#).is_err());
        assert!(serde_json::from_str::<TableJson>(r#"{"1": 3, "1": 4}"#).is_err());
    }

    #[test]
    fn fixtures_round_trip() {
        for inst in [fixtures::instance_a(), fixtures::instance_c(), fixtures::complements_pair(), fixtures::matroid_cover()] {
            let text = to_canonical_json(&InstanceFile::from_instance(&inst));
            assert_eq!(parse_instance(&text).unwrap(), inst);
        }
    }

    #[test]
    fn field_diagnostics_name_the_field() {
        let text = r#"{"schema_version":1,"items":2,"supply":[1,1],"buyers":[{"kind":"additive","weights":[1]}]}"#;
        let err = parse_instance(text).unwrap_err().to_string();
        assert!(err.contains("buyers[0].weights"), "{err}");
        let err = parse_instance("{\n\"schema_version\": 1,\n\"items\": x}").unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    proptest! {
        #[test]
        fn formatted_rationals_parse_back(numer in any::<i64>(), denom in 1..u64::MAX) {
            let value = Rational::new(BigInt::from(numer), BigInt::from(denom));
            let text = format_rational(&value);
            prop_assert_eq!(parse_rational(&text).unwrap(), value);
        }

        #[test]
        fn arbitrary_text_never_panics(text in "\\PC{0,24}") {
            if let Ok(value) = parse_rational(&text) {
                prop_assert!(value.denom() > &BigInt::zero());
            }
        }
    }
}
