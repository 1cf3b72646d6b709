//! Brute-force oracles: optimal welfare, Walrasian membership, integral price
//! enumeration and the welfare-theorem cross-check.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::market::{Allocation, Bundle, Certificate, MarketInstance, PriceVector, Rational, Validity};
use crate::potential::brute_force_demand;
use crate::valuation::OracleCounter;

/// Default cap on enumeration steps for every oracle in this module.
pub const DEFAULT_BUDGET: u128 = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub enumeration: u128,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { enumeration: DEFAULT_BUDGET }
    }
}

impl Limits {
    fn check(&self, what: &'static str, needed: u128) -> Result<()> {
        if needed > self.enumeration {
            Err(Error::BudgetExceeded { what, needed, budget: self.enumeration })
        } else {
            Ok(())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WelfareOptimum {
    pub value: i64,
    pub optima: Vec<Allocation>,
}

/// Maximum welfare over all allocations that clear the supply, with every maximizer.
pub fn brute_force_welfare(instance: &MarketInstance) -> Result<WelfareOptimum> {
    brute_force_welfare_with(instance, &Limits::default())
}

pub fn brute_force_welfare_with(instance: &MarketInstance, limits: &Limits) -> Result<WelfareOptimum> {
    let (n, m) = (instance.n(), instance.m());
    if instance.is_unit_supply() {
        let needed = (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        limits.check("welfare enumeration", needed)?;
        let tables: Option<Vec<Vec<i64>>> = (n <= 20).then(|| {
            instance.buyers().iter().map(|b| (0..1u64 << n).map(|s| b.value_of_set(s)).collect()).collect()
        });
        let value_of = |i: usize, mask: u64| match &tables {
            Some(t) => t[i][mask as usize],
            None => instance.buyer(i).value_of_set(mask),
        };
        let mut owners = vec![0usize; n];
        let mut best = i64::MIN;
        let mut optima = Vec::new();
        loop {
            let mut masks = vec![0u64; m];
            for (j, &i) in owners.iter().enumerate() {
                masks[i] |= 1 << j;
            }
            let w: i64 = masks.iter().enumerate().map(|(i, &s)| value_of(i, s)).sum();
            if w > best {
                best = w;
                optima.clear();
            }
            if w == best {
                optima.push(Allocation::from_masks(n, &masks));
            }
            // Next owner vector in base m.
            let mut j = 0;
            while j < n && owners[j] + 1 == m {
                owners[j] = 0;
                j += 1;
            }
            if j == n {
                break;
            }
            owners[j] += 1;
        }
        return Ok(WelfareOptimum { value: best, optima });
    }
    let needed = instance
        .supply()
        .iter()
        .map(|&s| binomial(s as u128 + m as u128 - 1, m as u128 - 1))
        .fold(1u128, |a, b| a.saturating_mul(b));
    limits.check("welfare enumeration", needed)?;
    let mut quantities = vec![vec![0u32; n]; m];
    let mut best = i64::MIN;
    let mut optima = Vec::new();
    let mut counter = OracleCounter::default();
    distribute(instance, 0, 0, instance.supply()[0], &mut quantities, &mut |q| {
        let alloc = Allocation::new(q.iter().map(|b| Bundle::from_quantities(b.clone())).collect());
        let w: i64 = alloc
            .bundles()
            .iter()
            .enumerate()
            .map(|(i, b)| instance.buyer(i).evaluate(b, &mut counter))
            .sum::<Result<i64>>()?;
        if w > best {
            best = w;
            optima.clear();
        }
        if w == best {
            optima.push(alloc);
        }
        Ok(())
    })?;
    Ok(WelfareOptimum { value: best, optima })
}

fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Hands the `left` units of `item` to buyers `buyer..`, then moves to the next item.
fn distribute(
    instance: &MarketInstance,
    item: usize,
    buyer: usize,
    left: u32,
    quantities: &mut Vec<Vec<u32>>,
    visit: &mut dyn FnMut(&[Vec<u32>]) -> Result<()>,
) -> Result<()> {
    let m = instance.m();
    if buyer + 1 == m {
        quantities[buyer][item] = left;
        let r = if item + 1 == instance.n() {
            visit(quantities)
        } else {
            distribute(instance, item + 1, 0, instance.supply()[item + 1], quantities, visit)
        };
        quantities[buyer][item] = 0;
        return r;
    }
    for q in 0..=left {
        quantities[buyer][item] = q;
        distribute(instance, item, buyer + 1, left - q, quantities, visit)?;
    }
    quantities[buyer][item] = 0;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub enum Rejection {
    InvalidAllocation(Validity),
    /// The buyer's bundle is worth `utility` but some bundle reaches `best`.
    NotDemanded { buyer: usize, utility: Rational, best: Rational },
    /// Every selection from the demand sets asks for more than the supply.
    Overdemanded { item: usize },
    /// Every selection leaves units unsold.
    Underdemanded { item: usize },
    /// Every selection asks for more units in total than are supplied.
    Oversubscribed { demanded: u64, supply: u64 },
    NoClearingSelection,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::InvalidAllocation(Validity::Invalid { item, demand, supply }) => {
                write!(f, "allocation gives {demand} units of item {} against supply {supply}", item + 1)
            }
            Rejection::InvalidAllocation(v) => write!(f, "allocation is malformed: {v:?}"),
            Rejection::NotDemanded { buyer, utility, best } => write!(
                f,
                "buyer {} does not demand its bundle: utility {utility}, best available {best}",
                buyer + 1
            ),
            Rejection::Overdemanded { item } => write!(f, "item {} is overdemanded", item + 1),
            Rejection::Underdemanded { item } => write!(f, "item {} is underdemanded", item + 1),
            Rejection::Oversubscribed { demanded, supply } => {
                write!(f, "buyers demand at least {demanded} units in total against a supply of {supply}")
            }
            Rejection::NoClearingSelection => write!(f, "no selection of demanded bundles clears the market"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Membership {
    Member { allocation: Allocation },
    NotMember(Rejection),
}

impl Membership {
    pub fn is_member(&self) -> bool {
        matches!(self, Membership::Member { .. })
    }
}

/// Checks whether `prices` are Walrasian. With an allocation, each bundle must
/// reach its buyer's maximum utility and the bundles must clear the supply.
/// Without one, a clearing selection is searched among the demand sets.
pub fn walrasian_membership(
    instance: &MarketInstance,
    prices: &PriceVector,
    allocation: Option<&Allocation>,
) -> Result<Membership> {
    let p = prices.as_slice();
    if let Some(alloc) = allocation {
        let validity = instance.validate_allocation(alloc);
        if !validity.is_valid() {
            return Ok(Membership::NotMember(Rejection::InvalidAllocation(validity)));
        }
        for (i, bundle) in alloc.bundles().iter().enumerate() {
            let best = brute_force_demand(instance, i, p)?.utility;
            let utility = instance.utility(i, bundle, prices)?;
            if utility != best {
                return Ok(Membership::NotMember(Rejection::NotDemanded { buyer: i, utility, best }));
            }
        }
        return Ok(Membership::Member { allocation: alloc.clone() });
    }
    let demand_sets: Vec<Vec<Bundle>> = (0..instance.m())
        .map(|i| Ok(brute_force_demand(instance, i, p)?.full_set.expect("brute force lists maximizers")))
        .collect::<Result<_>>()?;
    let mut chosen = Vec::with_capacity(instance.m());
    let mut dead = HashSet::new();
    let remaining = instance.supply().to_vec();
    if clear(&demand_sets, 0, remaining, &mut chosen, &mut dead) {
        return Ok(Membership::Member { allocation: Allocation::new(chosen) });
    }
    for (j, &s) in instance.supply().iter().enumerate() {
        let lo: u64 = demand_sets.iter().map(|d| d.iter().map(|b| b.quantities()[j] as u64).min().unwrap_or(0)).sum();
        let hi: u64 = demand_sets.iter().map(|d| d.iter().map(|b| b.quantities()[j] as u64).max().unwrap_or(0)).sum();
        if lo > s as u64 {
            return Ok(Membership::NotMember(Rejection::Overdemanded { item: j }));
        }
        if hi < s as u64 {
            return Ok(Membership::NotMember(Rejection::Underdemanded { item: j }));
        }
    }
    let demanded: u64 = demand_sets.iter().map(|d| d.iter().map(Bundle::size).min().unwrap_or(0)).sum();
    let supply: u64 = instance.supply().iter().map(|&s| s as u64).sum();
    if demanded > supply {
        return Ok(Membership::NotMember(Rejection::Oversubscribed { demanded, supply }));
    }
    Ok(Membership::NotMember(Rejection::NoClearingSelection))
}

/// Exact cover of the supply by one demanded bundle per buyer, memoizing dead states.
fn clear(
    demand_sets: &[Vec<Bundle>],
    buyer: usize,
    remaining: Vec<u32>,
    chosen: &mut Vec<Bundle>,
    dead: &mut HashSet<(usize, Vec<u32>)>,
) -> bool {
    if buyer == demand_sets.len() {
        return remaining.iter().all(|&r| r == 0);
    }
    if dead.contains(&(buyer, remaining.clone())) {
        return false;
    }
    for bundle in &demand_sets[buyer] {
        if bundle.quantities().iter().zip(&remaining).all(|(&q, &r)| q <= r) {
            let next = remaining.iter().zip(bundle.quantities()).map(|(&r, &q)| r - q).collect();
            chosen.push(bundle.clone());
            if clear(demand_sets, buyer + 1, next, chosen, dead) {
                return true;
            }
            chosen.pop();
        }
    }
    dead.insert((buyer, remaining));
    false
}

/// Integral Walrasian prices inside the search box.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalrasianSet {
    pub integral_points: Vec<Vec<i64>>,
    pub lattice_min: Option<Vec<i64>>,
    pub lattice_max: Option<Vec<i64>>,
    pub exists: bool,
    /// Search nodes visited, full and partial price vectors alike.
    pub scanned: u128,
}

impl WalrasianSet {
    pub fn contains(&self, p: &[i64]) -> bool {
        self.integral_points.binary_search_by(|q| q.as_slice().cmp(p)).is_ok()
    }

    /// Pairs whose componentwise min or max falls outside the set.
    pub fn lattice_violations(&self) -> Vec<(Vec<i64>, Vec<i64>)> {
        let set: HashSet<&[i64]> = self.integral_points.iter().map(Vec::as_slice).collect();
        let mut bad = Vec::new();
        for (a_idx, a) in self.integral_points.iter().enumerate() {
            for b in &self.integral_points[a_idx + 1..] {
                let lo: Vec<i64> = a.iter().zip(b).map(|(x, y)| *x.min(y)).collect();
                let hi: Vec<i64> = a.iter().zip(b).map(|(x, y)| *x.max(y)).collect();
                if !set.contains(lo.as_slice()) || !set.contains(hi.as_slice()) {
                    bad.push((a.clone(), b.clone()));
                }
            }
        }
        bad
    }
}

/// Per-item integer range outside of which no price can be Walrasian, clipped
/// to `[-2M, 2M]`. Above the largest marginal value of an item nobody buys it;
/// below the second-largest smallest marginal two buyers would each want all of it.
pub fn price_search_box(instance: &MarketInstance) -> Result<Vec<(i64, i64)>> {
    let big = 2 * instance.magnitude_bound();
    let n = instance.n();
    let mut counter = OracleCounter::default();
    let domain: Vec<Bundle> = instance.domain().collect();
    let mut ranges = Vec::with_capacity(n);
    for j in 0..n {
        let s = instance.supply()[j];
        if s == 0 {
            ranges.push((-big, big));
            continue;
        }
        let mut hi = i64::MIN;
        let mut floors = Vec::with_capacity(instance.m());
        for i in 0..instance.m() {
            let spec = instance.buyer(i);
            let mut min_gain = i64::MAX;
            for x in domain.iter().filter(|x| x.quantities()[j] < s) {
                let mut q = x.quantities().to_vec();
                q[j] += 1;
                let gain = spec.evaluate(&Bundle::from_quantities(q), &mut counter)? - spec.evaluate(x, &mut counter)?;
                hi = hi.max(gain);
                min_gain = min_gain.min(gain);
            }
            floors.push(min_gain);
        }
        floors.sort_unstable_by(|a, b| b.cmp(a));
        let lo = if floors.len() >= 2 { floors[1] } else { -big };
        ranges.push((lo.max(-big), hi.min(big)));
    }
    Ok(ranges)
}

/// Scans integer prices in the search box. A grid point is Walrasian exactly
/// when one fixed welfare-optimal allocation is demanded there, which is a
/// system of linear inequalities; partial price vectors that already violate
/// one for every completion are pruned.
pub fn enumerate_integral_walrasian(instance: &MarketInstance) -> Result<WalrasianSet> {
    enumerate_integral_walrasian_with(instance, &Limits::default())
}

/// `p.coeffs >= rhs`, with `reach[k]` the largest value coordinates `k..` can add.
struct Inequality {
    coeffs: Vec<i64>,
    rhs: i64,
    reach: Vec<i64>,
}

pub fn enumerate_integral_walrasian_with(instance: &MarketInstance, limits: &Limits) -> Result<WalrasianSet> {
    let ranges = price_search_box(instance)?;
    let n = instance.n();
    let optimum = brute_force_welfare_with(instance, limits)?;
    let reference = &optimum.optima[0];
    let mut counter = OracleCounter::default();
    let domain: Vec<Bundle> = instance.domain().collect();
    let mut seen = HashSet::new();
    let mut system = Vec::new();
    for (i, held) in reference.bundles().iter().enumerate() {
        let spec = instance.buyer(i);
        let held_value = spec.evaluate(held, &mut counter)?;
        for y in &domain {
            // v(y) - p.y <= v(held) - p.held
            let coeffs: Vec<i64> =
                y.quantities().iter().zip(held.quantities()).map(|(&a, &b)| a as i64 - b as i64).collect();
            let rhs = spec.evaluate(y, &mut counter)? - held_value;
            if coeffs.iter().all(|&c| c == 0) || !seen.insert((coeffs.clone(), rhs)) {
                continue;
            }
            let mut reach = vec![0; n + 1];
            for k in (0..n).rev() {
                let (lo, hi) = ranges[k];
                reach[k] = reach[k + 1] + (coeffs[k] * lo).max(coeffs[k] * hi);
            }
            system.push(Inequality { coeffs, rhs, reach });
        }
    }
    let mut points = Vec::new();
    let mut scanned = 0u128;
    if ranges.iter().all(|&(lo, hi)| lo <= hi) {
        let mut partial = vec![0i64; system.len()];
        let mut p = Vec::with_capacity(n);
        scan(&ranges, &system, &mut partial, &mut p, &mut points, &mut scanned, limits)?;
    }
    points.sort();
    let componentwise = |pick: fn(i64, i64) -> i64| {
        points.first().map(|first| {
            points.iter().skip(1).fold(first.clone(), |acc, q| acc.iter().zip(q).map(|(&a, &b)| pick(a, b)).collect())
        })
    };
    let lattice_min = componentwise(i64::min);
    let lattice_max = componentwise(i64::max);
    Ok(WalrasianSet { exists: !points.is_empty(), integral_points: points, lattice_min, lattice_max, scanned })
}

fn scan(
    ranges: &[(i64, i64)],
    system: &[Inequality],
    partial: &mut [i64],
    p: &mut Vec<i64>,
    points: &mut Vec<Vec<i64>>,
    scanned: &mut u128,
    limits: &Limits,
) -> Result<()> {
    *scanned += 1;
    limits.check("integral price scan", *scanned)?;
    let k = p.len();
    if system.iter().zip(partial.iter()).any(|(ineq, &sum)| sum + ineq.reach[k] < ineq.rhs) {
        return Ok(());
    }
    if k == ranges.len() {
        points.push(p.clone());
        return Ok(());
    }
    for price in ranges[k].0..=ranges[k].1 {
        for (sum, ineq) in partial.iter_mut().zip(system) {
            *sum += ineq.coeffs[k] * price;
        }
        p.push(price);
        let result = scan(ranges, system, partial, p, points, scanned, limits);
        p.pop();
        for (sum, ineq) in partial.iter_mut().zip(system) {
            *sum -= ineq.coeffs[k] * price;
        }
        result?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub enum WelfareVerdict {
    Pass,
    CertificateRejected(Rejection),
    WelfareGap { achieved: i64, optimum: i64 },
    /// An optimal allocation is not supported by the certificate prices.
    OptimumNotSupported { allocation: Allocation, rejection: Rejection },
}

impl WelfareVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, WelfareVerdict::Pass)
    }
}

/// The certificate must be an equilibrium, reach the optimal welfare, and its
/// prices must support every optimal allocation.
pub fn check_welfare_theorems(instance: &MarketInstance, certificate: &Certificate) -> Result<WelfareVerdict> {
    check_welfare_theorems_with(instance, certificate, &Limits::default())
}

pub fn check_welfare_theorems_with(
    instance: &MarketInstance,
    certificate: &Certificate,
    limits: &Limits,
) -> Result<WelfareVerdict> {
    if let Membership::NotMember(r) =
        walrasian_membership(instance, &certificate.prices, Some(&certificate.allocation))?
    {
        return Ok(WelfareVerdict::CertificateRejected(r));
    }
    let optimum = brute_force_welfare_with(instance, limits)?;
    let achieved = instance.social_welfare(&certificate.allocation)?;
    if achieved != optimum.value {
        return Ok(WelfareVerdict::WelfareGap { achieved, optimum: optimum.value });
    }
    for alloc in &optimum.optima {
        if let Membership::NotMember(rejection) = walrasian_membership(instance, &certificate.prices, Some(alloc))? {
            return Ok(WelfareVerdict::OptimumNotSupported { allocation: alloc.clone(), rejection });
        }
    }
    Ok(WelfareVerdict::Pass)
}

/// Searches for any Walrasian price, integral or not, by enumerating vertices
/// of the polyhedron of prices at which a fixed optimal allocation is demanded,
/// intersected with a box large enough to meet every nonempty such polyhedron.
pub fn find_walrasian_vertex(instance: &MarketInstance) -> Result<Option<PriceVector>> {
    find_walrasian_vertex_with(instance, &Limits::default())
}

pub fn find_walrasian_vertex_with(instance: &MarketInstance, limits: &Limits) -> Result<Option<PriceVector>> {
    let n = instance.n();
    let optimum = brute_force_welfare_with(instance, limits)?;
    let reference = &optimum.optima[0];
    let mut counter = OracleCounter::default();
    // Rows a.p >= b.
    let mut rows: BTreeSet<(Vec<i128>, i128)> = BTreeSet::new();
    for (i, held) in reference.bundles().iter().enumerate() {
        let held_value = instance.buyer(i).evaluate(held, &mut counter)?;
        for y in instance.domain() {
            if &y == held {
                continue;
            }
            let a: Vec<i128> =
                y.quantities().iter().zip(held.quantities()).map(|(&u, &h)| u as i128 - h as i128).collect();
            let b = (instance.buyer(i).evaluate(&y, &mut counter)? - held_value) as i128;
            rows.insert((a, b));
        }
    }
    let fact: i128 = (1..=n as i128).product();
    let s = instance.max_supply().max(1) as i128;
    let bound = fact * s.pow(n.saturating_sub(1) as u32) * 2 * instance.magnitude_bound() as i128 + 1;
    for j in 0..n {
        let mut e = vec![0i128; n];
        e[j] = 1;
        rows.insert((e.clone(), -bound));
        e[j] = -1;
        rows.insert((e, -bound));
    }
    let rows: Vec<(Vec<i128>, i128)> = rows.into_iter().collect();
    let combos = binomial(rows.len() as u128, n as u128);
    limits.check("vertex enumeration", combos)?;
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        let a: Vec<Vec<i128>> = pick.iter().map(|&r| rows[r].0.clone()).collect();
        let det = determinant(a.clone());
        if det != 0 {
            let (det, sign) = if det < 0 { (-det, -1) } else { (det, 1) };
            let nums: Vec<i128> = (0..n)
                .map(|k| {
                    let mut ak = a.clone();
                    for (row, &r) in ak.iter_mut().zip(&pick) {
                        row[k] = rows[r].1;
                    }
                    sign * determinant(ak)
                })
                .collect();
            let feasible = rows.iter().all(|(row, b)| {
                let lhs: i128 = row.iter().zip(&nums).map(|(x, y)| x * y).sum();
                lhs >= b * det
            });
            if feasible {
                let prices = nums.iter().map(|&x| Rational::new(x.into(), det.into())).collect();
                return Ok(Some(PriceVector::new(prices)));
            }
        }
        // Next n-combination of row indices.
        let mut k = n;
        while k > 0 && pick[k - 1] == rows.len() - n + k - 1 {
            k -= 1;
        }
        if k == 0 {
            return Ok(None);
        }
        pick[k - 1] += 1;
        for t in k..n {
            pick[t] = pick[t - 1] + 1;
        }
    }
}

/// Fraction-free Gaussian elimination.
fn determinant(mut a: Vec<Vec<i128>>) -> i128 {
    let n = a.len();
    let mut sign = 1;
    let mut prev = 1i128;
    for k in 0..n {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&r| a[r][k] != 0) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

/// Membership with the certificate's own allocation.
pub fn check_certificate(instance: &MarketInstance, certificate: &Certificate) -> Result<Membership> {
    walrasian_membership(instance, &certificate.prices, Some(&certificate.allocation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::market::ratio;

    #[test]
    fn welfare_examples() {
        let a = brute_force_welfare(&fixtures::instance_a()).unwrap();
        assert_eq!((a.value, a.optima.len()), (2, 6));
        let d = brute_force_welfare(&fixtures::instance_d()).unwrap();
        assert_eq!((d.value, d.optima.len()), (9, 1));
        assert_eq!(d.optima[0], Allocation::from_masks(3, &[0b001, 0b110]));
        let b = brute_force_welfare(&fixtures::instance_b()).unwrap();
        assert_eq!((b.value, b.optima.len()), (8, 1));
    }

    #[test]
    fn membership_examples() {
        let a = fixtures::instance_a();
        let r = walrasian_membership(&a, &PriceVector::from_integers(&[1, 1]), None).unwrap();
        assert!(r.is_member());
        let half = PriceVector::new(vec![ratio(1, 2), ratio(1, 2)]);
        let r = walrasian_membership(&a, &half, None).unwrap();
        assert!(matches!(r, Membership::NotMember(Rejection::Oversubscribed { demanded: 3, supply: 2 })));
        let b = fixtures::instance_b();
        let r = walrasian_membership(&b, &PriceVector::from_integers(&[4, 0]), None).unwrap();
        assert_eq!(r, Membership::NotMember(Rejection::Underdemanded { item: 0 }));
    }

    #[test]
    fn enumeration_examples() {
        let a = enumerate_integral_walrasian(&fixtures::instance_a()).unwrap();
        assert_eq!(a.integral_points, vec![vec![1, 1]]);
        assert_eq!(a.lattice_min, Some(vec![1, 1]));
        assert_eq!(a.lattice_max, Some(vec![1, 1]));
        let b = enumerate_integral_walrasian(&fixtures::instance_b()).unwrap();
        assert_eq!(b.lattice_max, Some(vec![3, 5]));
        assert_eq!(b.integral_points.len(), 20 * 22);
        assert!(b.integral_points.iter().all(|p| p[0] >= -16 && p[0] <= 3 && p[1] >= -16 && p[1] <= 5));
        let pair = enumerate_integral_walrasian(&fixtures::complements_pair()).unwrap();
        assert_eq!(pair.integral_points, vec![vec![0, 1], vec![1, 0]]);
        assert_eq!(pair.lattice_violations().len(), 1);
        let clash = enumerate_integral_walrasian(&fixtures::complements_against_unit_demand()).unwrap();
        assert!(!clash.exists);
    }

    #[test]
    fn vertex_search_agrees_on_fixtures() {
        assert!(find_walrasian_vertex(&fixtures::complements_against_unit_demand()).unwrap().is_none());
        for inst in [fixtures::complements_pair(), fixtures::instance_a(), fixtures::instance_b(), fixtures::instance_c(), fixtures::instance_d()] {
            let p = find_walrasian_vertex(&inst).unwrap().expect("these markets clear");
            assert!(walrasian_membership(&inst, &p, None).unwrap().is_member());
        }
    }

    #[test]
    fn determinant_matches_cofactor_expansion() {
        assert_eq!(determinant(vec![vec![2, 1], vec![1, 3]]), 5);
        assert_eq!(determinant(vec![vec![0, 1, 2], vec![1, 0, 3], vec![4, -3, 8]]), -2);
    }
}
