//! Markets, bundles, prices, allocations and welfare.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::valuation::{OracleCounter, ValuationSpec};

pub type Rational = BigRational;

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn ratio(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Items held by one buyer, as a quantity per item.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bundle(Vec<u32>);

impl Bundle {
    pub fn empty(n: usize) -> Self {
        Bundle(vec![0; n])
    }

    pub fn from_quantities(quantities: Vec<u32>) -> Self {
        Bundle(quantities)
    }

    /// A set of distinct items (0-indexed).
    pub fn from_items(n: usize, items: &[usize]) -> Self {
        let mut q = vec![0; n];
        for &j in items {
            q[j] += 1;
        }
        Bundle(q)
    }

    pub fn from_mask(n: usize, mask: u64) -> Self {
        Bundle((0..n).map(|j| ((mask >> j) & 1) as u32).collect())
    }

    pub fn quantities(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&q| q == 0)
    }

    pub fn size(&self) -> u64 {
        self.0.iter().map(|&q| q as u64).sum()
    }

    /// Bitmask of the items present, if every quantity is 0 or 1.
    pub fn mask(&self) -> Option<u64> {
        if self.0.len() > 64 {
            return None;
        }
        let mut mask = 0u64;
        for (j, &q) in self.0.iter().enumerate() {
            match q {
                0 => {}
                1 => mask |= 1 << j,
                _ => return None,
            }
        }
        Some(mask)
    }

    /// Items with positive quantity, in increasing order.
    pub fn items(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &q)| q > 0).map(|(j, _)| j)
    }
}

impl fmt::Display for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        write!(f, "{{")?;
        for (j, &q) in self.0.iter().enumerate() {
            for _ in 0..q {
                if !first {
                    write!(f, ",")?;
                }
                write!(f, "{}", j + 1)?;
                first = false;
            }
        }
        write!(f, "}}")
    }
}

/// One exact price per item. Signs are unrestricted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PriceVector(Vec<Rational>);

impl PriceVector {
    pub fn new(prices: Vec<Rational>) -> Self {
        PriceVector(prices)
    }

    pub fn zeros(n: usize) -> Self {
        PriceVector(vec![Rational::zero(); n])
    }

    pub fn from_integers(prices: &[i64]) -> Self {
        PriceVector(prices.iter().map(|&p| int(p)).collect())
    }

    pub fn as_slice(&self) -> &[Rational] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn cost(&self, bundle: &Bundle) -> Rational {
        self.0
            .iter()
            .zip(bundle.quantities())
            .filter(|(_, &q)| q > 0)
            .fold(Rational::zero(), |acc, (p, &q)| acc + p * int(q as i64))
    }

    /// Adds `shift` to every coordinate.
    pub fn shifted(&self, shift: &Rational) -> Self {
        PriceVector(self.0.iter().map(|p| p + shift).collect())
    }

    pub fn is_integral(&self) -> bool {
        self.0.iter().all(|p| p.is_integer())
    }

    /// Integer coordinates, if all are integral and fit in `i64`.
    pub fn to_integers(&self) -> Option<Vec<i64>> {
        self.0.iter().map(|p| if p.is_integer() { p.to_integer().to_i64() } else { None }).collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|p| p.to_f64().unwrap_or(f64::NAN)).collect()
    }
}

impl fmt::Display for PriceVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (j, p) in self.0.iter().enumerate() {
            if j > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

/// One bundle per buyer.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Allocation(Vec<Bundle>);

impl Allocation {
    pub fn new(bundles: Vec<Bundle>) -> Self {
        Allocation(bundles)
    }

    /// Single-unit allocation from one item bitmask per buyer.
    pub fn from_masks(n: usize, masks: &[u64]) -> Self {
        Allocation(masks.iter().map(|&m| Bundle::from_mask(n, m)).collect())
    }

    /// Single-unit allocation from the owner of each item.
    pub fn from_owners(n: usize, m: usize, owners: &[usize]) -> Self {
        let mut masks = vec![0u64; m];
        for (j, &i) in owners.iter().enumerate() {
            masks[i] |= 1 << j;
        }
        Self::from_masks(n, &masks)
    }

    pub fn bundles(&self) -> &[Bundle] {
        &self.0
    }

    pub fn bundle(&self, buyer: usize) -> &Bundle {
        &self.0[buyer]
    }

    pub fn masks(&self) -> Option<Vec<u64>> {
        self.0.iter().map(Bundle::mask).collect()
    }
}

impl fmt::Display for Allocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, b) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{b}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Validity {
    Valid,
    /// `demand` units of `item` are allocated against `supply`.
    Invalid { item: usize, demand: u64, supply: u32 },
    /// The allocation does not have one bundle per buyer.
    WrongShape { bundles: usize, buyers: usize },
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validity::Valid)
    }
}

/// How a buyer's bundle was shown to be demanded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Witness {
    /// Utility equals the maximum over the whole bundle domain.
    BruteForce,
    /// No single add, remove or swap improves utility.
    LocalExchange,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub prices: PriceVector,
    pub allocation: Allocation,
    pub witnesses: Vec<Witness>,
    pub oracle_calls: OracleCounter,
}

/// Items with integer supplies and one valuation per buyer.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketInstance {
    supply: Vec<u32>,
    buyers: Vec<ValuationSpec>,
}

impl MarketInstance {
    pub fn new(supply: Vec<u32>, buyers: Vec<ValuationSpec>) -> Result<Self> {
        if supply.is_empty() {
            return Err(Error::MalformedInstance("market needs at least one item".into()));
        }
        if buyers.is_empty() {
            return Err(Error::MalformedInstance("market needs at least one buyer".into()));
        }
        for (i, b) in buyers.iter().enumerate() {
            b.validate(&supply).map_err(|e| match e {
                Error::MalformedInstance(msg) => Error::MalformedInstance(format!("buyer {}: {msg}", i + 1)),
                other => other,
            })?;
        }
        Ok(MarketInstance { supply, buyers })
    }

    /// Market with one unit of each of `n` items.
    pub fn unit(n: usize, buyers: Vec<ValuationSpec>) -> Result<Self> {
        Self::new(vec![1; n], buyers)
    }

    pub fn n(&self) -> usize {
        self.supply.len()
    }

    pub fn m(&self) -> usize {
        self.buyers.len()
    }

    pub fn supply(&self) -> &[u32] {
        &self.supply
    }

    pub fn buyers(&self) -> &[ValuationSpec] {
        &self.buyers
    }

    pub fn buyer(&self, i: usize) -> &ValuationSpec {
        &self.buyers[i]
    }

    /// Largest supply of any item.
    pub fn max_supply(&self) -> u32 {
        self.supply.iter().copied().max().unwrap_or(0)
    }

    pub fn is_unit_supply(&self) -> bool {
        self.supply.iter().all(|&s| s == 1) && self.n() <= 64
    }

    pub fn require_unit_supply(&self) -> Result<()> {
        if self.is_unit_supply() {
            Ok(())
        } else {
            Err(Error::NotUnitSupply)
        }
    }

    /// Number of bundles in one buyer's domain.
    pub fn domain_size(&self) -> u128 {
        self.supply.iter().fold(1u128, |acc, &s| acc.saturating_mul(s as u128 + 1))
    }

    /// Every bundle `0 <= x <= s`, in mixed-radix order with item 1 fastest.
    pub fn domain(&self) -> impl Iterator<Item = Bundle> + '_ {
        let size = self.domain_size();
        (0..size).map(move |mut idx| {
            let q = self
                .supply
                .iter()
                .map(|&s| {
                    let r = s as u128 + 1;
                    let d = (idx % r) as u32;
                    idx /= r;
                    d
                })
                .collect();
            Bundle(q)
        })
    }

    pub fn check_bundle(&self, bundle: &Bundle) -> Result<()> {
        if bundle.len() != self.n() {
            return Err(Error::MalformedInstance(format!(
                "bundle has {} entries, market has {} items",
                bundle.len(),
                self.n()
            )));
        }
        for (j, (&q, &s)) in bundle.quantities().iter().zip(&self.supply).enumerate() {
            if q > s {
                return Err(Error::BundleOutOfBounds { item: j, quantity: q, supply: s });
            }
        }
        Ok(())
    }

    pub fn value(&self, buyer: usize, bundle: &Bundle, counter: &mut OracleCounter) -> Result<i64> {
        self.check_bundle(bundle)?;
        self.buyers[buyer].evaluate(bundle, counter)
    }

    /// `v_i(x) - p.x`.
    pub fn utility(&self, buyer: usize, bundle: &Bundle, prices: &PriceVector) -> Result<Rational> {
        let v = self.value(buyer, bundle, &mut OracleCounter::default())?;
        Ok(int(v) - prices.cost(bundle))
    }

    /// Sum of buyer values; the allocation need not clear the market.
    pub fn social_welfare(&self, allocation: &Allocation) -> Result<i64> {
        if allocation.bundles().len() != self.m() {
            return Err(Error::MalformedInstance(format!(
                "allocation has {} bundles, market has {} buyers",
                allocation.bundles().len(),
                self.m()
            )));
        }
        let mut counter = OracleCounter::default();
        allocation
            .bundles()
            .iter()
            .enumerate()
            .map(|(i, b)| self.value(i, b, &mut counter))
            .sum()
    }

    /// Checks that the bundles add up to the supply, reporting the first bad item.
    pub fn validate_allocation(&self, allocation: &Allocation) -> Validity {
        if allocation.bundles().len() != self.m() || allocation.bundles().iter().any(|b| b.len() != self.n()) {
            return Validity::WrongShape { bundles: allocation.bundles().len(), buyers: self.m() };
        }
        for (j, &s) in self.supply.iter().enumerate() {
            let demand: u64 = allocation.bundles().iter().map(|b| b.quantities()[j] as u64).sum();
            if demand != s as u64 {
                return Validity::Invalid { item: j, demand, supply: s };
            }
        }
        Validity::Valid
    }

    /// Largest absolute bundle value over all buyers.
    pub fn magnitude_bound(&self) -> i64 {
        self.buyers.iter().map(|b| b.magnitude(&self.supply)).max().unwrap_or(0)
    }

    pub fn supply_value(&self, prices: &PriceVector) -> Rational {
        prices.cost(&Bundle(self.supply.clone()))
    }
}
