//! Valuation families, oracle-call accounting, the gross-substitutes checker
//! and seeded instance generators.

use std::fmt;
use std::ops::AddAssign;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::market::{Bundle, MarketInstance};

/// Largest explicit table accepted, in entries.
pub const MAX_TABLE_ENTRIES: u128 = 1 << 24;

/// Largest item count the exchange-property checker will enumerate.
pub const GS_CHECK_LIMIT: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct OracleCounter {
    pub value_calls: u64,
    pub demand_calls: u64,
    pub aggregate_calls: u64,
}

impl AddAssign for OracleCounter {
    fn add_assign(&mut self, rhs: Self) {
        self.value_calls += rhs.value_calls;
        self.demand_calls += rhs.demand_calls;
        self.aggregate_calls += rhs.aggregate_calls;
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Matroid {
    Uniform { rank: usize },
    /// Every item sits in exactly one block; a block admits `capacity` items.
    Partition { blocks: Vec<Vec<usize>>, capacities: Vec<usize> },
}

/// Dense value table indexed by the mixed-radix code of a bundle. With unit
/// supply the code is the item bitmask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExplicitTable {
    supply: Vec<u32>,
    values: Vec<i64>,
}

impl ExplicitTable {
    pub fn new(supply: Vec<u32>, values: Vec<i64>) -> Result<Self> {
        let size = supply.iter().fold(1u128, |acc, &s| acc.saturating_mul(s as u128 + 1));
        if size > MAX_TABLE_ENTRIES {
            return Err(Error::MalformedInstance(format!("explicit table with {size} entries is too large")));
        }
        if values.len() as u128 != size {
            return Err(Error::MalformedInstance(format!(
                "explicit table has {} entries, domain has {size}",
                values.len()
            )));
        }
        Ok(ExplicitTable { supply, values })
    }

    /// Builds a table from `(code, value)` pairs; every code must appear once.
    pub fn from_entries(supply: Vec<u32>, entries: impl IntoIterator<Item = (u64, i64)>) -> Result<Self> {
        let size = supply.iter().fold(1u128, |acc, &s| acc.saturating_mul(s as u128 + 1));
        if size > MAX_TABLE_ENTRIES {
            return Err(Error::MalformedInstance(format!("explicit table with {size} entries is too large")));
        }
        let mut values: Vec<Option<i64>> = vec![None; size as usize];
        for (code, v) in entries {
            let slot = values
                .get_mut(code as usize)
                .filter(|_| (code as u128) < size)
                .ok_or_else(|| Error::MalformedInstance(format!("table key {code} is outside the domain")))?;
            if slot.replace(v).is_some() {
                return Err(Error::MalformedInstance(format!("table key {code} appears twice")));
            }
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(code, v)| v.ok_or_else(|| Error::MalformedInstance(format!("missing table entry for key {code}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(ExplicitTable { supply, values })
    }

    pub fn supply(&self) -> &[u32] {
        &self.supply
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn code(&self, bundle: &Bundle) -> Result<u64> {
        let mut code = 0u64;
        let mut radix = 1u64;
        for (j, (&q, &s)) in bundle.quantities().iter().zip(&self.supply).enumerate() {
            if q > s {
                return Err(Error::BundleOutOfBounds { item: j, quantity: q, supply: s });
            }
            code += q as u64 * radix;
            radix *= s as u64 + 1;
        }
        Ok(code)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ValuationSpec {
    ExplicitTable(ExplicitTable),
    Additive { weights: Vec<i64> },
    UnitDemand { values: Vec<i64> },
    WeightedMatroidRank { matroid: Matroid, weights: Vec<i64> },
}

impl ValuationSpec {
    pub fn additive(weights: Vec<i64>) -> Self {
        ValuationSpec::Additive { weights }
    }

    pub fn unit_demand(values: Vec<i64>) -> Self {
        ValuationSpec::UnitDemand { values }
    }

    pub fn uniform_rank(rank: usize, weights: Vec<i64>) -> Self {
        ValuationSpec::WeightedMatroidRank { matroid: Matroid::Uniform { rank }, weights }
    }

    pub fn partition_rank(blocks: Vec<Vec<usize>>, capacities: Vec<usize>, weights: Vec<i64>) -> Self {
        ValuationSpec::WeightedMatroidRank { matroid: Matroid::Partition { blocks, capacities }, weights }
    }

    /// Single-unit table from a value per item bitmask.
    pub fn table(n: usize, values: Vec<i64>) -> Result<Self> {
        Ok(ValuationSpec::ExplicitTable(ExplicitTable::new(vec![1; n], values)?))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ValuationSpec::ExplicitTable(_) => "explicit_table",
            ValuationSpec::Additive { .. } => "additive",
            ValuationSpec::UnitDemand { .. } => "unit_demand",
            ValuationSpec::WeightedMatroidRank { .. } => "weighted_matroid_rank",
        }
    }

    pub(crate) fn validate(&self, supply: &[u32]) -> Result<()> {
        let n = supply.len();
        let bad = |msg: String| Err(Error::MalformedInstance(msg));
        match self {
            ValuationSpec::ExplicitTable(t) => {
                if t.supply != supply {
                    return bad("explicit table domain does not match the supply".into());
                }
                if t.values[0] != 0 {
                    return bad(format!("v(empty) = {}, expected 0", t.values[0]));
                }
            }
            ValuationSpec::Additive { weights } => {
                if weights.len() != n {
                    return bad(format!("{} weights for {n} items", weights.len()));
                }
            }
            ValuationSpec::UnitDemand { values } => {
                if values.len() != n {
                    return bad(format!("{} values for {n} items", values.len()));
                }
                if values.iter().any(|&v| v < 0) {
                    return bad("unit-demand values must be non-negative".into());
                }
            }
            ValuationSpec::WeightedMatroidRank { matroid, weights } => {
                if weights.len() != n {
                    return bad(format!("{} weights for {n} items", weights.len()));
                }
                if weights.iter().any(|&w| w < 0) {
                    return bad("matroid weights must be non-negative".into());
                }
                if supply.iter().any(|&s| s > 1) || n > 64 {
                    return bad("matroid rank valuations need unit supply".into());
                }
                if let Matroid::Partition { blocks, capacities } = matroid {
                    if blocks.len() != capacities.len() {
                        return bad("partition matroid needs one capacity per block".into());
                    }
                    let mut seen = vec![false; n];
                    for &j in blocks.iter().flatten() {
                        if j >= n || std::mem::replace(&mut seen[j], true) {
                            return bad(format!("partition blocks must cover each item once (item {})", j + 1));
                        }
                    }
                    if seen.iter().any(|s| !s) {
                        return bad("partition blocks must cover every item".into());
                    }
                }
            }
        }
        Ok(())
    }

    /// Value of a bundle; counts one value-oracle call.
    pub fn evaluate(&self, bundle: &Bundle, counter: &mut OracleCounter) -> Result<i64> {
        counter.value_calls += 1;
        self.raw_value(bundle)
    }

    fn raw_value(&self, bundle: &Bundle) -> Result<i64> {
        let q = bundle.quantities();
        match self {
            ValuationSpec::ExplicitTable(t) => {
                if q.len() != t.supply.len() {
                    return Err(Error::MalformedInstance("bundle length does not match the table".into()));
                }
                Ok(t.values[t.code(bundle)? as usize])
            }
            ValuationSpec::Additive { weights } => {
                Ok(weights.iter().zip(q).map(|(&w, &x)| w * x as i64).sum())
            }
            ValuationSpec::UnitDemand { values } => {
                Ok(values.iter().zip(q).filter(|(_, &x)| x > 0).map(|(&v, _)| v).max().unwrap_or(0))
            }
            ValuationSpec::WeightedMatroidRank { .. } => {
                let mask = bundle.mask().ok_or(Error::NotUnitSupply)?;
                Ok(self.value_of_set(mask))
            }
        }
    }

    /// Value of an item set given as a bitmask; counts one value-oracle call.
    pub fn value_set(&self, mask: u64, counter: &mut OracleCounter) -> i64 {
        counter.value_calls += 1;
        self.value_of_set(mask)
    }

    /// Uncounted set value. Tables must be single-unit.
    pub(crate) fn value_of_set(&self, mask: u64) -> i64 {
        match self {
            ValuationSpec::ExplicitTable(t) => t.values[mask as usize],
            ValuationSpec::Additive { weights } => bits(mask).map(|j| weights[j]).sum(),
            ValuationSpec::UnitDemand { values } => bits(mask).map(|j| values[j]).max().unwrap_or(0),
            ValuationSpec::WeightedMatroidRank { matroid, weights } => match matroid {
                Matroid::Uniform { rank } => top_sum(bits(mask).map(|j| weights[j]), *rank),
                Matroid::Partition { blocks, capacities } => blocks
                    .iter()
                    .zip(capacities)
                    .map(|(block, &cap)| {
                        top_sum(block.iter().filter(|&&j| mask >> j & 1 == 1).map(|&j| weights[j]), cap)
                    })
                    .sum(),
            },
        }
    }

    /// Exact maximum of `|v(x)|` over the domain given by `supply`.
    pub(crate) fn magnitude(&self, supply: &[u32]) -> i64 {
        match self {
            ValuationSpec::ExplicitTable(t) => t.values.iter().map(|v| v.abs()).max().unwrap_or(0),
            ValuationSpec::Additive { weights } => {
                let pos: i64 = weights.iter().zip(supply).filter(|(&w, _)| w > 0).map(|(&w, &s)| w * s as i64).sum();
                let neg: i64 = weights.iter().zip(supply).filter(|(&w, _)| w < 0).map(|(&w, &s)| -w * s as i64).sum();
                pos.max(neg)
            }
            ValuationSpec::UnitDemand { values } => {
                values.iter().zip(supply).filter(|(_, &s)| s > 0).map(|(&v, _)| v).max().unwrap_or(0)
            }
            ValuationSpec::WeightedMatroidRank { .. } => {
                let full = supply.iter().enumerate().filter(|(_, &s)| s > 0).fold(0u64, |m, (j, _)| m | 1 << j);
                self.value_of_set(full)
            }
        }
    }

    /// Checks the valuated-matroid exchange property of `B -> v(B ∩ [n])` over
    /// the `n`-subsets of a doubled ground set, which holds exactly for
    /// gross-substitutes valuations.
    pub fn check_gross_substitutes(&self, n: usize) -> Result<GsVerdict> {
        if let ValuationSpec::ExplicitTable(t) = self {
            if t.supply.iter().any(|&s| s != 1) {
                return Err(Error::NotUnitSupply);
            }
        }
        if n > GS_CHECK_LIMIT {
            return Err(Error::ExceedsCheckLimit { n, limit: GS_CHECK_LIMIT });
        }
        let low = (1u64 << n) - 1;
        let values: Vec<i64> = (0..=low).map(|mask| self.value_of_set(mask)).collect();
        let omega = |b: u64| values[(b & low) as usize];
        let bases: Vec<u64> = (0u64..1 << (2 * n)).filter(|b| b.count_ones() as usize == n).collect();
        for &b in &bases {
            for &b2 in &bases {
                if b == b2 {
                    continue;
                }
                let lhs = omega(b) + omega(b2);
                for u in bits(b & !b2) {
                    let ok = bits(b2 & !b).any(|v| {
                        let b_new = (b & !(1 << u)) | 1 << v;
                        let b2_new = (b2 & !(1 << v)) | 1 << u;
                        lhs <= omega(b_new) + omega(b2_new)
                    });
                    if !ok {
                        return Ok(GsVerdict::Violation(ExchangeViolation { n, base: b, other: b2, element: u }));
                    }
                }
            }
        }
        Ok(GsVerdict::GrossSubstitutes)
    }
}

/// A failed exchange: no `v` repairs removing `element` from `base`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExchangeViolation {
    pub n: usize,
    pub base: u64,
    pub other: u64,
    pub element: usize,
}

impl fmt::Display for ExchangeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |set: u64| {
            bits(set)
                .map(|e| if e < self.n { format!("{}", e + 1) } else { format!("{}'", e - self.n + 1) })
                .collect::<Vec<_>>()
                .join(",")
        };
        let u = if self.element < self.n {
            format!("{}", self.element + 1)
        } else {
            format!("{}'", self.element - self.n + 1)
        };
        write!(f, "B = {{{}}}, B' = {{{}}}, u = {u}", show(self.base), show(self.other))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GsVerdict {
    GrossSubstitutes,
    Violation(ExchangeViolation),
}

impl GsVerdict {
    pub fn is_gross_substitutes(&self) -> bool {
        matches!(self, GsVerdict::GrossSubstitutes)
    }
}

/// Indices of set bits in increasing order.
pub(crate) fn bits(mask: u64) -> impl Iterator<Item = usize> {
    let mut rest = mask;
    std::iter::from_fn(move || {
        if rest == 0 {
            None
        } else {
            let j = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(j)
        }
    })
}

fn top_sum(weights: impl Iterator<Item = i64>, k: usize) -> i64 {
    let mut w: Vec<i64> = weights.collect();
    if w.len() > k {
        w.select_nth_unstable_by(k, |a, b| b.cmp(a));
        w.truncate(k);
    }
    w.into_iter().sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GsFamily {
    Additive,
    UnitDemand,
    /// Each buyer is additive, unit-demand, or a weighted uniform or partition
    /// matroid rank function.
    MatroidRankMix,
}

/// Seeded gross-substitutes market with unit supply. Per-item weights lie in
/// `[0, max_value]`.
pub fn generate_random_gs(family: GsFamily, n: usize, m: usize, max_value: i64, seed: u64) -> MarketInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let buyers = (0..m)
        .map(|_| {
            let draw = |rng: &mut ChaCha8Rng| (0..n).map(|_| rng.gen_range(0..=max_value)).collect::<Vec<_>>();
            match family {
                GsFamily::Additive => ValuationSpec::additive(draw(&mut rng)),
                GsFamily::UnitDemand => ValuationSpec::unit_demand(draw(&mut rng)),
                GsFamily::MatroidRankMix => match rng.gen_range(0..4) {
                    0 => ValuationSpec::additive(draw(&mut rng)),
                    1 => ValuationSpec::unit_demand(draw(&mut rng)),
                    2 => {
                        let rank = rng.gen_range(1..=n);
                        ValuationSpec::uniform_rank(rank, draw(&mut rng))
                    }
                    _ => {
                        let count = rng.gen_range(1..=n);
                        let mut blocks = vec![Vec::new(); count];
                        for j in 0..n {
                            blocks[rng.gen_range(0..count)].push(j);
                        }
                        blocks.retain(|b| !b.is_empty());
                        let capacities = blocks.iter().map(|b| rng.gen_range(1..=b.len())).collect();
                        ValuationSpec::partition_rank(blocks, capacities, draw(&mut rng))
                    }
                },
            }
        })
        .collect();
    MarketInstance::unit(n, buyers).expect("generated valuations are well-formed")
}

/// Seeded market with multi-unit supply and arbitrary integer tables in
/// `[0, max_value]`; no structure is assumed.
pub fn generate_random_general(n: usize, max_supply: u32, m: usize, max_value: i64, seed: u64) -> MarketInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let supply: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=max_supply)).collect();
    let size = supply.iter().map(|&s| s as usize + 1).product::<usize>();
    let buyers = (0..m)
        .map(|_| {
            let values = (0..size).map(|code| if code == 0 { 0 } else { rng.gen_range(0..=max_value) }).collect();
            ValuationSpec::ExplicitTable(ExplicitTable::new(supply.clone(), values).expect("sized to the domain"))
        })
        .collect();
    MarketInstance::new(supply, buyers).expect("generated valuations are well-formed")
}
