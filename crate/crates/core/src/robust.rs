//! Uniqueness of the optimal allocation, robust Walrasian prices, and
//! recovering an optimal allocation through a perturbation that isolates it.
//!
//! For gross-substitutes buyers and a fixed partition, the Walrasian prices
//! are the solutions of a difference-constraint system. Its constraint graph
//! has the items plus one node for "no item" (price 0). The optimum is unique
//! exactly when that graph has no zero-weight cycle.

use std::collections::VecDeque;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cutting_plane::{Cut, Ellipsoid, StopReason};
use crate::error::{Error, Result};
use crate::market::{int, ratio, Allocation, MarketInstance, PriceVector, Rational};
use crate::potential::{all_greedy, brute_force_demand};
use crate::valuation::{bits, OracleCounter, ValuationSpec};
use crate::verify::brute_force_welfare;

/// Buyers' bundles are checked for unique demand up to this many items.
const DEMAND_CHECK_LIMIT: usize = 12;
/// Isolation tables are materialized up to this many items.
pub const ISOLATION_ITEM_LIMIT: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Item(usize),
    /// Stands for "no item": dropping an item or taking one into a free slot.
    Empty,
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Item(j) => write!(f, "{}", j + 1),
            Node::Empty => write!(f, "-"),
        }
    }
}

/// `buyer` gives up `from` and takes `to`; the weight is the value lost.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Arc {
    pub from: Node,
    pub to: Node,
    pub buyer: usize,
    pub weight: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AllocationExchangeGraph {
    n: usize,
    owners: Vec<usize>,
    arcs: Vec<Arc>,
    /// Shortest distances from a virtual source joined to every node.
    potential: Vec<i64>,
}

fn index(n: usize, node: Node) -> usize {
    match node {
        Node::Item(j) => j,
        Node::Empty => n,
    }
}

fn owners_of(instance: &MarketInstance, allocation: &Allocation) -> Result<Vec<usize>> {
    instance.require_unit_supply()?;
    if !instance.validate_allocation(allocation).is_valid() {
        return Err(Error::Precondition("allocation must assign every item exactly once".into()));
    }
    let masks = allocation.masks().ok_or(Error::NotUnitSupply)?;
    Ok((0..instance.n()).map(|j| masks.iter().position(|&s| s >> j & 1 == 1).expect("valid")).collect())
}

/// Bellman-Ford from a virtual source; `None` on a negative cycle.
fn potentials(nodes: usize, arcs: &[(usize, usize, i64)]) -> Option<Vec<i64>> {
    let mut dist = vec![0i64; nodes];
    for round in 0..=nodes {
        let mut changed = false;
        for &(u, v, w) in arcs {
            if dist[u] + w < dist[v] {
                dist[v] = dist[u] + w;
                changed = true;
            }
        }
        if !changed {
            return Some(dist);
        }
        if round == nodes {
            return None;
        }
    }
    None
}

pub fn build_allocation_exchange_graph(
    instance: &MarketInstance,
    allocation: &Allocation,
) -> Result<AllocationExchangeGraph> {
    let owners = owners_of(instance, allocation)?;
    let (n, m) = (instance.n(), instance.m());
    let masks = allocation.masks().ok_or(Error::NotUnitSupply)?;
    let values: Vec<i64> = (0..m).map(|i| instance.buyer(i).value_of_set(masks[i])).collect();
    let mut arcs = Vec::new();
    for j in 0..n {
        let i = owners[j];
        let spec = instance.buyer(i);
        let without = masks[i] & !(1 << j);
        for k in (0..n).filter(|&k| owners[k] != i) {
            let weight = values[i] - spec.value_of_set(without | 1 << k);
            arcs.push(Arc { from: Node::Item(j), to: Node::Item(k), buyer: i, weight });
        }
        arcs.push(Arc { from: Node::Item(j), to: Node::Empty, buyer: i, weight: values[i] - spec.value_of_set(without) });
    }
    for k in 0..n {
        let best = (0..m)
            .filter(|&i| owners[k] != i)
            .map(|i| (values[i] - instance.buyer(i).value_of_set(masks[i] | 1 << k), i))
            .min();
        if let Some((weight, buyer)) = best {
            arcs.push(Arc { from: Node::Empty, to: Node::Item(k), buyer, weight });
        }
    }
    let plain: Vec<(usize, usize, i64)> =
        arcs.iter().map(|a| (index(n, a.from), index(n, a.to), a.weight)).collect();
    let potential = potentials(n + 1, &plain).ok_or(Error::NegativeCycle)?;
    Ok(AllocationExchangeGraph { n, owners, arcs, potential })
}

impl AllocationExchangeGraph {
    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn owners(&self) -> &[usize] {
        &self.owners
    }

    fn reduced(&self, a: &Arc) -> i64 {
        a.weight + self.potential[index(self.n, a.from)] - self.potential[index(self.n, a.to)]
    }
}

/// Shortest cycle of arcs with zero reduced weight, if any. Every cycle in
/// that subgraph has zero weight; taking a shortest one keeps its swaps
/// independent of each other.
pub fn detect_zero_weight_cycle(graph: &AllocationExchangeGraph) -> Option<Vec<Arc>> {
    let nodes = graph.n + 1;
    let mut tight: Vec<Vec<&Arc>> = vec![Vec::new(); nodes];
    for a in graph.arcs.iter().filter(|a| graph.reduced(a) == 0) {
        tight[index(graph.n, a.from)].push(a);
    }
    let mut best: Option<Vec<Arc>> = None;
    for start in 0..nodes {
        let mut via: Vec<Option<&Arc>> = vec![None; nodes];
        let mut seen = vec![false; nodes];
        let mut queue = VecDeque::from([start]);
        let mut closing = None;
        'search: while let Some(u) = queue.pop_front() {
            for &a in &tight[u] {
                let v = index(graph.n, a.to);
                if v == start {
                    closing = Some((u, a));
                    break 'search;
                }
                if !seen[v] {
                    seen[v] = true;
                    via[v] = Some(a);
                    queue.push_back(v);
                }
            }
        }
        if let Some((mut u, last)) = closing {
            let mut cycle = vec![*last];
            while u != start {
                let a = via[u].expect("reached through an arc");
                cycle.push(*a);
                u = index(graph.n, a.from);
            }
            cycle.reverse();
            if best.as_ref().map_or(true, |b| cycle.len() < b.len()) {
                best = Some(cycle);
            }
        }
    }
    best
}

/// Performs the exchanges of a cycle: each arc's buyer gives up its tail and takes its head.
pub fn apply_cycle(instance: &MarketInstance, allocation: &Allocation, cycle: &[Arc]) -> Result<Allocation> {
    let mut masks = allocation.masks().ok_or(Error::NotUnitSupply)?;
    for a in cycle {
        if let Node::Item(j) = a.from {
            masks[a.buyer] &= !(1 << j);
        }
    }
    for a in cycle {
        if let Node::Item(k) = a.to {
            masks[a.buyer] |= 1 << k;
        }
    }
    Ok(Allocation::from_masks(instance.n(), &masks))
}

#[derive(Clone, Debug, PartialEq)]
pub enum RobustWitness {
    /// Exchanges that lead to another optimal allocation.
    ZeroCycle(Vec<Arc>),
    /// Shortest-path distances in the split graph, scaled by `2n`.
    Potential(Vec<i64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobustPriceReport {
    pub exists: bool,
    pub prices: Option<PriceVector>,
    /// Smallest slack over all price inequalities.
    pub slack: Option<Rational>,
    pub witness: RobustWitness,
}

/// Walrasian prices supporting `allocation` with every swap inequality slack
/// by at least `1/n` and every add or drop inequality by at least `1/(2n)`,
/// so all prices within `1/(2n)` in each coordinate stay Walrasian.
pub fn compute_robust_prices(instance: &MarketInstance, allocation: &Allocation) -> Result<RobustPriceReport> {
    let graph = build_allocation_exchange_graph(instance, allocation)?;
    if let Some(cycle) = detect_zero_weight_cycle(&graph) {
        return Ok(RobustPriceReport { exists: false, prices: None, slack: None, witness: RobustWitness::ZeroCycle(cycle) });
    }
    let n = graph.n;
    let scale = 2 * n as i64;
    // Item j enters at node j and leaves from node n + j; the empty node is 2n.
    let empty = 2 * n;
    let mut arcs: Vec<(usize, usize, i64)> = (0..n).map(|j| (j, n + j, -2)).collect();
    for a in &graph.arcs {
        let from = match a.from {
            Node::Item(j) => n + j,
            Node::Empty => empty,
        };
        let to = match a.to {
            Node::Item(k) => k,
            Node::Empty => empty,
        };
        arcs.push((from, to, scale * a.weight));
    }
    let dist = potentials(2 * n + 1, &arcs).ok_or(Error::NegativeCycle)?;
    let prices: Vec<Rational> =
        (0..n).map(|j| Rational::new((dist[empty] - dist[n + j] - 1).into(), scale.into())).collect();
    let prices = PriceVector::new(prices);
    let slack = min_slack(&graph, &prices);
    let half = ratio(1, scale);
    if slack < half {
        return Err(Error::Precondition(format!("robust prices have slack {slack} below {half}")));
    }
    if n <= DEMAND_CHECK_LIMIT {
        let masks = allocation.masks().ok_or(Error::NotUnitSupply)?;
        for (i, &mask) in masks.iter().enumerate() {
            let demand = brute_force_demand(instance, i, prices.as_slice())?;
            let set = demand.full_set.expect("brute force lists maximizers");
            if set.len() != 1 || set[0].mask() != Some(mask) {
                return Err(Error::Precondition(format!("buyer {} has a non-unique demand at robust prices", i + 1)));
            }
        }
    }
    Ok(RobustPriceReport { exists: true, prices: Some(prices), slack: Some(slack), witness: RobustWitness::Potential(dist) })
}

/// `min over arcs of w - (p_from - p_to)`, with the empty node priced at 0.
fn min_slack(graph: &AllocationExchangeGraph, prices: &PriceVector) -> Rational {
    let price = |node: Node| match node {
        Node::Item(j) => prices.as_slice()[j].clone(),
        Node::Empty => int(0),
    };
    graph
        .arcs
        .iter()
        .map(|a| int(a.weight) - (price(a.from) - price(a.to)))
        .min()
        .unwrap_or_else(|| int(0))
}

/// Scaling used to build a perturbed market: `B v_i(S) + sum_{j in S} w_i(j)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IsolationRecord {
    pub scale: i64,
    pub weights: Vec<Vec<i64>>,
}

impl IsolationRecord {
    /// Recovers the original value from a perturbed one.
    pub fn original_value(&self, buyer: usize, mask: u64, perturbed: i64) -> i64 {
        let extra: i64 = bits(mask).map(|j| self.weights[buyer][j]).sum();
        (perturbed - extra) / self.scale
    }
}

/// Adds small random item weights below a large multiple of every valuation,
/// with `N = 2mn^3` and `B = 2nN`, so that the optimum becomes unique with
/// high probability and stays optimal for the original market.
pub fn isolation_perturb(instance: &MarketInstance, seed: u64) -> Result<(MarketInstance, IsolationRecord)> {
    instance.require_unit_supply()?;
    let (n, m) = (instance.n(), instance.m());
    if n > ISOLATION_ITEM_LIMIT {
        return Err(Error::ExceedsCheckLimit { n, limit: ISOLATION_ITEM_LIMIT });
    }
    let range = 2 * (m as i64) * (n as i64).pow(3);
    let scale = 2 * n as i64 * range.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<Vec<i64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(1..=range.max(1))).collect()).collect();
    let overflow = || Error::MalformedInstance("perturbed values overflow".into());
    let buyers = (0..m)
        .map(|i| {
            let spec = instance.buyer(i);
            let values = (0..1u64 << n)
                .map(|set| {
                    let extra: i64 = bits(set).map(|j| weights[i][j]).sum();
                    spec.value_of_set(set).checked_mul(scale).and_then(|v| v.checked_add(extra)).ok_or_else(overflow)
                })
                .collect::<Result<Vec<_>>>()?;
            ValuationSpec::table(n, values)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((MarketInstance::unit(n, buyers)?, IsolationRecord { scale, weights }))
}

/// The AllGreedy profile at `prices`, which must be a partition.
pub fn recover_allocation_interior(instance: &MarketInstance, prices: &[Rational]) -> Result<Allocation> {
    let result = all_greedy(instance, prices, &mut OracleCounter::default())?;
    if !result.is_partition() {
        return Err(Error::Precondition(format!(
            "AllGreedy subgradient {:?} is not zero; keep optimizing or perturb the market",
            result.subgradient
        )));
    }
    Ok(Allocation::from_masks(instance.n(), &result.sets))
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsolationOutcome {
    /// Partition read off the first zero-subgradient query, if one was reached.
    pub allocation: Option<Allocation>,
    pub iterations: usize,
    /// True when the allocation is optimal for the original market.
    pub verified: bool,
}

/// Perturbs the market, searches the regularized potential of the perturbed
/// market for an interior query, and checks the recovered partition against
/// brute-force welfare of the original market.
pub fn isolate_optimal_allocation(instance: &MarketInstance, seed: u64) -> Result<IsolationOutcome> {
    let (perturbed, _) = isolation_perturb(instance, seed)?;
    let n = perturbed.n();
    let radius = 2.0 * perturbed.magnitude_bound().max(1) as f64 * (n as f64).sqrt() + 1.0;
    // The interior contains a ball of radius 1/(2n) inside the hyperplane.
    let epsilon = 1.0 / (4.0 * n as f64);
    let k = n.saturating_sub(1).max(1) as f64;
    let max_iters = (2.0 * k * (k + 1.0) * (radius / epsilon).ln()).ceil() as usize + 100;
    let mut counter = OracleCounter::default();
    let state = Ellipsoid::<f64>::ball_in_hyperplane(n, radius).minimize(epsilon, max_iters, |p| {
        let exact: Vec<Rational> = p.iter().map(|&x| Rational::from_float(x).ok_or(Error::NumericFailure)).collect::<Result<_>>()?;
        let g = all_greedy(&perturbed, &exact, &mut counter)?;
        Ok(Cut { value: None, subgradient: g.subgradient.iter().map(|&x| x as f64).collect() })
    })?;
    let allocation = match (&state.stop, &state.zero_subgradient) {
        (StopReason::ZeroSubgradient, Some(p)) => {
            let exact: Vec<Rational> = p.iter().map(|&x| Rational::from_float(x).expect("finite query")).collect();
            Some(recover_allocation_interior(&perturbed, &exact)?)
        }
        _ => None,
    };
    let verified = match &allocation {
        Some(a) => instance.social_welfare(a)? == brute_force_welfare(instance)?.value,
        None => false,
    };
    Ok(IsolationOutcome { allocation, iterations: state.iterations, verified })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::verify::walrasian_membership;

    fn unique_optimum(inst: &MarketInstance) -> Allocation {
        brute_force_welfare(inst).unwrap().optima.remove(0)
    }

    #[test]
    fn instance_d_has_robust_prices() {
        let d = fixtures::instance_d();
        let opt = unique_optimum(&d);
        let graph = build_allocation_exchange_graph(&d, &opt).unwrap();
        assert!(detect_zero_weight_cycle(&graph).is_none());
        let report = compute_robust_prices(&d, &opt).unwrap();
        assert!(report.exists);
        let p = report.prices.unwrap();
        let p = p.as_slice();
        assert!(p[0] > int(1) && p[0] < int(4));
        assert!(p[1] > int(1) && p[1] < int(3));
        assert!(p[2] > int(1) && p[2] < int(2));
        assert!(report.slack.unwrap() >= ratio(1, 6));
    }

    #[test]
    fn instance_c_cycle_leads_to_another_optimum() {
        let c = fixtures::instance_c();
        let opt = Allocation::from_masks(3, &[0b011, 0b100]);
        let best = brute_force_welfare(&c).unwrap().value;
        assert_eq!(c.social_welfare(&opt).unwrap(), best);
        let graph = build_allocation_exchange_graph(&c, &opt).unwrap();
        let cycle = detect_zero_weight_cycle(&graph).expect("two optima");
        let other = apply_cycle(&c, &opt, &cycle).unwrap();
        assert_ne!(other, opt);
        assert!(c.validate_allocation(&other).is_valid());
        assert_eq!(c.social_welfare(&other).unwrap(), best);
        let report = compute_robust_prices(&c, &opt).unwrap();
        assert!(!report.exists);
        assert!(matches!(report.witness, RobustWitness::ZeroCycle(_)));
    }

    #[test]
    fn instance_a_has_no_robust_prices() {
        let a = fixtures::instance_a();
        let opt = unique_optimum(&a);
        assert!(!compute_robust_prices(&a, &opt).unwrap().exists);
    }

    #[test]
    fn single_buyer_has_no_zero_cycle() {
        let b = fixtures::instance_b();
        let graph = build_allocation_exchange_graph(&b, &Allocation::from_masks(2, &[0b11])).unwrap();
        assert!(detect_zero_weight_cycle(&graph).is_none());
        let report = compute_robust_prices(&b, &Allocation::from_masks(2, &[0b11])).unwrap();
        assert!(report.exists);
    }

    #[test]
    fn suboptimal_allocation_has_a_negative_cycle() {
        let d = fixtures::instance_d();
        let worse = Allocation::from_masks(3, &[0b110, 0b001]);
        assert_eq!(build_allocation_exchange_graph(&d, &worse).unwrap_err(), Error::NegativeCycle);
    }

    #[test]
    fn robust_cube_corners_are_walrasian() {
        let d = fixtures::instance_d();
        let opt = unique_optimum(&d);
        let p = compute_robust_prices(&d, &opt).unwrap().prices.unwrap();
        let h = ratio(1, 6);
        for corner in 0..8u32 {
            let q: Vec<Rational> = p
                .as_slice()
                .iter()
                .enumerate()
                .map(|(j, x)| if corner >> j & 1 == 1 { x + &h } else { x - &h })
                .collect();
            let q = PriceVector::new(q);
            assert!(walrasian_membership(&d, &q, Some(&opt)).unwrap().is_member(), "{q}");
        }
    }

    #[test]
    fn isolation_keeps_optima_and_is_deterministic() {
        let c = fixtures::instance_c();
        let (p1, r1) = isolation_perturb(&c, 5).unwrap();
        let (p2, r2) = isolation_perturb(&c, 5).unwrap();
        assert_eq!((p1.clone(), r1.clone()), (p2, r2));
        let originals = brute_force_welfare(&c).unwrap();
        for opt in brute_force_welfare(&p1).unwrap().optima {
            assert!(originals.optima.contains(&opt));
        }
        assert_eq!(r1.original_value(1, 0b111, p1.buyer(1).value_of_set(0b111)), 3);
    }

    #[test]
    fn isolation_makes_instance_c_unique_almost_always() {
        let c = fixtures::instance_c();
        let unique = (0..200).filter(|&s| brute_force_welfare(&isolation_perturb(&c, s).unwrap().0).unwrap().optima.len() == 1).count();
        assert!(unique >= 190, "{unique}");
    }

    #[test]
    fn interior_recovery_examples() {
        let b = fixtures::instance_b();
        assert_eq!(recover_allocation_interior(&b, &[int(0), int(0)]).unwrap(), Allocation::from_masks(2, &[0b11]));
        let a = fixtures::instance_a();
        assert!(matches!(recover_allocation_interior(&a, &[int(1), int(1)]), Err(Error::Precondition(_))));
        let d = fixtures::instance_d();
        let r = recover_allocation_interior(&d, &[int(2), int(2), ratio(3, 2)]).unwrap();
        assert_eq!(r, unique_optimum(&d));
    }

    #[test]
    fn isolation_pipeline_recovers_an_optimum() {
        let c = fixtures::instance_c();
        let outcome = isolate_optimal_allocation(&c, 1).unwrap();
        assert!(outcome.verified, "{outcome:?}");
    }
}
