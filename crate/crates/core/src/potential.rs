//! Demand oracles, the market potential and its variants, and AllGreedy.
//!
//! `f(p) = sum_i max_x (v_i(x) - p.x) + p.s` is convex and its minimizers are
//! exactly the Walrasian prices whenever any exist. `s - d(p)` is a subgradient.

use crate::error::{Error, Result};
use crate::market::{int, Bundle, MarketInstance, PriceVector, Rational};
use crate::scalar::Scalar;
use crate::valuation::{bits, OracleCounter, ValuationSpec};

/// Largest per-buyer domain the brute-force demand oracle enumerates.
pub const DEMAND_BUDGET: u128 = 1 << 20;

#[derive(Clone, Debug, PartialEq)]
pub struct DemandResult<T> {
    pub bundle: Bundle,
    pub utility: T,
    /// Every maximizer, when the oracle enumerated the domain.
    pub full_set: Option<Vec<Bundle>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DemandMode {
    /// Greedy per buyer; exact for gross-substitutes valuations with unit supply.
    GreedyGs,
    BruteForce,
}

/// Which potential to evaluate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Potential<'a> {
    Plain,
    /// Adds `p.r` for the given perturbation `r`.
    Perturbed(&'a [Rational]),
    /// Maximum over bundle profiles with `n` items in total.
    Regularized,
}

fn cost<T: Scalar>(prices: &[T], mask: u64) -> T {
    bits(mask).fold(T::zero(), |acc, j| acc + prices[j].clone())
}

/// Greedy bundle as a bitmask with its utility. Adds the item with the largest
/// strictly positive marginal until none is left; ties go to the lowest index.
pub fn greedy_set<T: Scalar>(spec: &ValuationSpec, prices: &[T], counter: &mut OracleCounter) -> (u64, i64, T) {
    let n = prices.len();
    let mut set = 0u64;
    let mut value = 0i64;
    loop {
        let mut best: Option<(T, usize, i64)> = None;
        for j in (0..n).filter(|&j| set >> j & 1 == 0) {
            let v = spec.value_set(set | 1 << j, counter);
            let marginal = T::from_int(v - value) - prices[j].clone();
            if marginal > T::zero() && best.as_ref().map_or(true, |(b, _, _)| marginal > *b) {
                best = Some((marginal, j, v));
            }
        }
        match best {
            Some((_, j, v)) => {
                set |= 1 << j;
                value = v;
            }
            None => break,
        }
    }
    let utility = T::from_int(value) - cost(prices, set);
    (set, value, utility)
}

pub fn greedy_demand<T: Scalar>(spec: &ValuationSpec, prices: &[T], counter: &mut OracleCounter) -> DemandResult<T> {
    counter.demand_calls += 1;
    let (set, _, utility) = greedy_set(spec, prices, counter);
    DemandResult { bundle: Bundle::from_mask(prices.len(), set), utility, full_set: None }
}

/// Exhaustive demand: the first maximizer in domain order plus the whole demand set.
pub fn brute_force_demand<T: Scalar>(
    instance: &MarketInstance,
    buyer: usize,
    prices: &[T],
) -> Result<DemandResult<T>> {
    let size = instance.domain_size();
    if size > DEMAND_BUDGET {
        return Err(Error::BudgetExceeded { what: "demand enumeration", needed: size, budget: DEMAND_BUDGET });
    }
    let spec = instance.buyer(buyer);
    let mut counter = OracleCounter::default();
    let mut best: Option<T> = None;
    let mut maximizers = Vec::new();
    for bundle in instance.domain() {
        let v = spec.evaluate(&bundle, &mut counter)?;
        let price = bundle
            .quantities()
            .iter()
            .zip(prices)
            .filter(|(&q, _)| q > 0)
            .fold(T::zero(), |acc, (&q, p)| acc + T::from_int(q as i64) * p.clone());
        let u = T::from_int(v) - price;
        match &best {
            Some(b) if u < *b => {}
            Some(b) if u == *b => maximizers.push(bundle),
            _ => {
                best = Some(u);
                maximizers = vec![bundle];
            }
        }
    }
    let utility = best.expect("domain contains the empty bundle");
    Ok(DemandResult { bundle: maximizers[0].clone(), utility, full_set: Some(maximizers) })
}

/// Demanded bundles of all buyers, their total, and the summed utility.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateDemand<T> {
    pub demand: Vec<i64>,
    pub bundles: Vec<Bundle>,
    pub surplus: T,
}

pub fn aggregate_demand_detail<T: Scalar>(
    instance: &MarketInstance,
    prices: &[T],
    mode: DemandMode,
    counter: &mut OracleCounter,
) -> Result<AggregateDemand<T>> {
    counter.aggregate_calls += 1;
    let n = instance.n();
    let mut demand = vec![0i64; n];
    let mut bundles = Vec::with_capacity(instance.m());
    let mut surplus = T::zero();
    for i in 0..instance.m() {
        let result = match mode {
            DemandMode::GreedyGs => {
                instance.require_unit_supply()?;
                greedy_demand(instance.buyer(i), prices, counter)
            }
            DemandMode::BruteForce => {
                counter.demand_calls += 1;
                brute_force_demand(instance, i, prices)?
            }
        };
        for (d, &q) in demand.iter_mut().zip(result.bundle.quantities()) {
            *d += q as i64;
        }
        surplus = surplus + result.utility;
        bundles.push(result.bundle);
    }
    Ok(AggregateDemand { demand, bundles, surplus })
}

/// `d(p) = sum_i x_i` for one demanded bundle per buyer.
pub fn aggregate_demand<T: Scalar>(
    instance: &MarketInstance,
    prices: &[T],
    mode: DemandMode,
    counter: &mut OracleCounter,
) -> Result<Vec<i64>> {
    Ok(aggregate_demand_detail(instance, prices, mode, counter)?.demand)
}

pub fn potential_value(instance: &MarketInstance, prices: &PriceVector, variant: Potential<'_>) -> Result<Rational> {
    let p = prices.as_slice();
    match variant {
        Potential::Plain | Potential::Perturbed(_) => {
            let mut counter = OracleCounter::default();
            let agg = aggregate_demand_detail(instance, p, DemandMode::BruteForce, &mut counter)?;
            let mut value = agg.surplus + instance.supply_value(prices);
            if let Potential::Perturbed(r) = variant {
                value += p.iter().zip(r).fold(Rational::from_int(0), |acc, (a, b)| acc + a * b);
            }
            Ok(value)
        }
        Potential::Regularized => {
            let result = all_greedy(instance, p, &mut OracleCounter::default())?;
            Ok(regularized_value(instance, p, &result))
        }
    }
}

/// `f~(p)` read off the AllGreedy profile.
pub fn regularized_value(instance: &MarketInstance, prices: &[Rational], result: &AllGreedyResult<Rational>) -> Rational {
    let surplus = result
        .sets
        .iter()
        .enumerate()
        .fold(Rational::from_int(0), |acc, (i, &set)| {
            acc + int(instance.buyer(i).value_of_set(set)) - cost(prices, set)
        });
    surplus + prices.iter().fold(Rational::from_int(0), |acc, p| acc + p)
}

pub fn potential_subgradient(
    instance: &MarketInstance,
    prices: &PriceVector,
    variant: Potential<'_>,
    mode: DemandMode,
    counter: &mut OracleCounter,
) -> Result<Vec<Rational>> {
    let p = prices.as_slice();
    match variant {
        Potential::Plain | Potential::Perturbed(_) => {
            let d = aggregate_demand(instance, p, mode, counter)?;
            let mut g: Vec<Rational> =
                instance.supply().iter().zip(&d).map(|(&s, &dj)| int(s as i64 - dj)).collect();
            if let Potential::Perturbed(r) = variant {
                for (gj, rj) in g.iter_mut().zip(r) {
                    *gj += rj;
                }
            }
            Ok(g)
        }
        Potential::Regularized => {
            let result = all_greedy(instance, p, counter)?;
            Ok(result.subgradient.iter().map(|&g| int(g)).collect())
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AllGreedyResult<T> {
    /// One item set per buyer; sets may overlap.
    pub sets: Vec<u64>,
    /// Marginal of the last selected step.
    pub gamma: T,
    /// `1 - |{i : j in S_i}|` per item.
    pub subgradient: Vec<i64>,
    pub total_size: usize,
}

impl<T> AllGreedyResult<T> {
    /// True when every item is in exactly one set.
    pub fn is_partition(&self) -> bool {
        self.subgradient.iter().all(|&g| g == 0)
    }
}

#[derive(Clone, Debug)]
struct Offer<T> {
    marginal: T,
    buyer: usize,
    value: i64,
}

fn ahead<T: PartialOrd>(a: &Offer<T>, b: &Offer<T>) -> bool {
    a.marginal > b.marginal || (a.marginal == b.marginal && a.buyer < b.buyer)
}

fn insert_sorted<T: PartialOrd>(list: &mut Vec<Offer<T>>, offer: Offer<T>) {
    let at = list.iter().position(|o| ahead(&offer, o)).unwrap_or(list.len());
    list.insert(at, offer);
}

/// Runs every buyer's greedy in parallel against a falling threshold and stops
/// after `n` items have been taken in total. Each step takes the largest
/// marginal over all buyers and items, ties to the lowest buyer then item.
pub fn all_greedy<T: Scalar>(
    instance: &MarketInstance,
    prices: &[T],
    counter: &mut OracleCounter,
) -> Result<AllGreedyResult<T>> {
    instance.require_unit_supply()?;
    let (n, m) = (instance.n(), instance.m());
    let mut sets = vec![0u64; m];
    let mut values = vec![0i64; m];
    // offers[j] lists buyers without j, best marginal first.
    let mut offers: Vec<Vec<Offer<T>>> = (0..n)
        .map(|j| {
            let mut list = Vec::with_capacity(m);
            for i in 0..m {
                let v = instance.buyer(i).value_set(1 << j, counter);
                insert_sorted(&mut list, Offer { marginal: T::from_int(v) - prices[j].clone(), buyer: i, value: v });
            }
            list
        })
        .collect();
    let mut gamma = None;
    for _ in 0..n {
        let mut pick: Option<(usize, &Offer<T>)> = None;
        for (j, list) in offers.iter().enumerate() {
            if let Some(head) = list.first() {
                if pick.map_or(true, |(_, best)| ahead(head, best)) {
                    pick = Some((j, head));
                }
            }
        }
        let (j, head) = pick.ok_or_else(|| Error::Precondition("no buyer can take another item".into()))?;
        let (i, marginal, value) = (head.buyer, head.marginal.clone(), head.value);
        offers[j].remove(0);
        sets[i] |= 1 << j;
        values[i] = value;
        gamma = Some(marginal);
        for k in (0..n).filter(|&k| sets[i] >> k & 1 == 0) {
            let v = instance.buyer(i).value_set(sets[i] | 1 << k, counter);
            let list = &mut offers[k];
            if let Some(pos) = list.iter().position(|o| o.buyer == i) {
                list.remove(pos);
            }
            insert_sorted(list, Offer { marginal: T::from_int(v - values[i]) - prices[k].clone(), buyer: i, value: v });
        }
    }
    let subgradient =
        (0..n).map(|j| 1 - sets.iter().filter(|&&s| s >> j & 1 == 1).count() as i64).collect();
    Ok(AllGreedyResult {
        sets,
        gamma: gamma.ok_or_else(|| Error::Precondition("market has no items".into()))?,
        subgradient,
        total_size: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::market::ratio;

    fn ints(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&x| int(x)).collect()
    }

    #[test]
    fn greedy_examples() {
        let mut c = OracleCounter::default();
        let r = greedy_demand(&ValuationSpec::additive(vec![3, 5]), &ints(&[4, 4]), &mut c);
        assert_eq!(r.bundle, Bundle::from_items(2, &[1]));
        assert_eq!(r.utility, int(1));
        let a = fixtures::instance_a();
        let r = greedy_demand(a.buyer(0), &ints(&[1, 1]), &mut c);
        assert!(r.bundle.is_empty());
        assert_eq!(r.utility, int(0));
        let rank = ValuationSpec::uniform_rank(2, vec![1, 1, 1]);
        let before = c.value_calls;
        let r = greedy_demand(&rank, &[ratio(1, 2), ratio(1, 4), ratio(3, 4)], &mut c);
        assert_eq!(r.bundle, Bundle::from_items(3, &[0, 1]));
        assert_eq!(r.utility, ratio(5, 4));
        assert!(c.value_calls - before <= 3 * 3 + 3);
    }

    #[test]
    fn brute_force_examples() {
        let a = fixtures::instance_a();
        let r = brute_force_demand(&a, 0, &ints(&[1, 1])).unwrap();
        assert_eq!(r.utility, int(0));
        assert_eq!(r.full_set.unwrap().len(), 4 - 1);
        let b = fixtures::instance_b();
        let r = brute_force_demand(&b, 0, &ints(&[0, 0])).unwrap();
        assert_eq!(r.full_set.unwrap(), vec![Bundle::from_items(2, &[0, 1])]);
        let comp = fixtures::complements_pair();
        let r = brute_force_demand(&comp, 0, &[ratio(2, 5), ratio(2, 5)]).unwrap();
        assert_eq!(r.full_set.unwrap(), vec![Bundle::from_items(2, &[0, 1])]);
        assert_eq!(r.utility, ratio(1, 5));
    }

    #[test]
    fn aggregate_examples() {
        let mut c = OracleCounter::default();
        let a = fixtures::instance_a();
        assert_eq!(aggregate_demand(&a, &ints(&[1, 1]), DemandMode::GreedyGs, &mut c).unwrap(), vec![0, 0]);
        // Greedy stops at zero marginals, so each buyer keeps only item 1.
        assert_eq!(aggregate_demand(&a, &ints(&[0, 0]), DemandMode::GreedyGs, &mut c).unwrap(), vec![3, 0]);
        let b = fixtures::instance_b();
        assert_eq!(aggregate_demand(&b, &ints(&[0, 0]), DemandMode::BruteForce, &mut c).unwrap(), vec![1, 1]);
        assert_eq!(c.aggregate_calls, 3);
    }

    #[test]
    fn potential_examples() {
        let a = fixtures::instance_a();
        let ones = PriceVector::from_integers(&[1, 1]);
        assert_eq!(potential_value(&a, &ones, Potential::Plain).unwrap(), int(2));
        assert_eq!(potential_value(&a, &ones, Potential::Regularized).unwrap(), int(2));
        let b = fixtures::instance_b();
        assert_eq!(potential_value(&b, &PriceVector::zeros(2), Potential::Plain).unwrap(), int(8));
    }

    #[test]
    fn subgradient_examples() {
        let mut c = OracleCounter::default();
        let b = fixtures::instance_b();
        let g = potential_subgradient(&b, &PriceVector::zeros(2), Potential::Plain, DemandMode::GreedyGs, &mut c);
        assert_eq!(g.unwrap(), ints(&[0, 0]));
        let a = fixtures::instance_a();
        let g = potential_subgradient(&a, &PriceVector::zeros(2), Potential::Plain, DemandMode::GreedyGs, &mut c);
        assert_eq!(g.unwrap(), ints(&[-2, 1]));
        let ones = PriceVector::from_integers(&[1, 1]);
        let g = potential_subgradient(&a, &ones, Potential::Plain, DemandMode::GreedyGs, &mut c);
        assert_eq!(g.unwrap(), ints(&[1, 1]));
    }

    #[test]
    fn all_greedy_examples() {
        let mut c = OracleCounter::default();
        let b = fixtures::instance_b();
        let r = all_greedy(&b, &ints(&[9, -4]), &mut c).unwrap();
        assert_eq!(r.sets, vec![0b11]);
        let a = fixtures::instance_a();
        let r = all_greedy(&a, &ints(&[0, 0]), &mut c).unwrap();
        assert_eq!(r.sets.iter().map(|s| s.count_ones()).sum::<u32>(), 2);
        assert_eq!(r.gamma, int(1));
        let cc = fixtures::instance_c();
        let zero = ints(&[0, 0, 0]);
        let r = all_greedy(&cc, &zero, &mut c).unwrap();
        assert_eq!(r.total_size, 3);
        assert_eq!(r.sets.iter().map(|s| s.count_ones()).sum::<u32>(), 3);
        let shifted = PriceVector::new(zero.clone()).shifted(&r.gamma);
        let lhs = potential_value(&cc, &PriceVector::new(zero), Potential::Regularized).unwrap();
        assert_eq!(lhs, potential_value(&cc, &shifted, Potential::Plain).unwrap());
    }
}
