//! Incremental welfare maximization for gross-substitutes buyers with unit
//! supply. Items are inserted one per phase; each phase is a lexicographic
//! shortest path on the exchange graph followed by a descending price update.

use std::collections::HashMap;

use crate::cutting_plane::{Method, Outcome, SolveReport};
use crate::error::{Error, Result};
use crate::market::{int, Allocation, Certificate, MarketInstance, PriceVector, Witness};
use crate::valuation::{bits, OracleCounter, ValuationSpec};

/// Path weight first, then number of arcs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct LexDistance {
    pub weight: i64,
    pub hops: u32,
}

impl LexDistance {
    fn then(self, weight: i64) -> Self {
        LexDistance { weight: self.weight + weight, hops: self.hops + 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseTrace {
    pub phase: usize,
    pub item: usize,
    /// Items along the augmenting path, starting after the empty-slot node.
    pub path: Vec<usize>,
    /// Buyer who takes the first item on the path.
    pub entrant: usize,
    pub distances: Vec<(usize, i64)>,
    pub prices: Vec<(usize, i64)>,
    pub value_calls: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CombinatorialResult {
    pub certificate: Certificate,
    pub prices: Vec<i64>,
    pub owners: Vec<usize>,
    pub welfare: i64,
    pub phases: Vec<PhaseTrace>,
}

/// Allocation and prices after some phases, over the inserted items.
#[derive(Clone, Debug)]
pub struct PhaseState<'a> {
    instance: &'a MarketInstance,
    inserted: Vec<usize>,
    owner: Vec<Option<usize>>,
    bundles: Vec<u64>,
    values: Vec<i64>,
    prices: Vec<i64>,
    singles: Vec<Vec<i64>>,
    /// Per item, buyers with empty bundles by decreasing single-item value.
    lists: Vec<Vec<usize>>,
    active: Vec<bool>,
    /// Values queried in the current phase.
    cache: HashMap<(usize, u64), i64>,
}

impl<'a> PhaseState<'a> {
    /// Queries every single-item value once and sorts the lists.
    pub fn new(instance: &'a MarketInstance, counter: &mut OracleCounter) -> Result<Self> {
        instance.require_unit_supply()?;
        let (n, m) = (instance.n(), instance.m());
        let singles: Vec<Vec<i64>> =
            (0..m).map(|i| (0..n).map(|j| instance.buyer(i).value_set(1 << j, counter)).collect()).collect();
        let lists = (0..n)
            .map(|j| {
                let mut l: Vec<usize> = (0..m).collect();
                l.sort_by(|&a, &b| singles[b][j].cmp(&singles[a][j]).then(a.cmp(&b)));
                l
            })
            .collect();
        Ok(PhaseState {
            instance,
            inserted: Vec::new(),
            owner: vec![None; n],
            bundles: vec![0; m],
            values: vec![0; m],
            prices: vec![0; n],
            singles,
            lists,
            active: vec![false; m],
            cache: HashMap::new(),
        })
    }

    pub fn prices(&self) -> Vec<(usize, i64)> {
        self.inserted.iter().map(|&j| (j, self.prices[j])).collect()
    }

    pub fn bundles(&self) -> &[u64] {
        &self.bundles
    }

    fn value(&mut self, buyer: usize, set: u64, counter: &mut OracleCounter) -> i64 {
        if set == 0 {
            return 0;
        }
        if set.count_ones() == 1 {
            return self.singles[buyer][set.trailing_zeros() as usize];
        }
        if set == self.bundles[buyer] {
            return self.values[buyer];
        }
        let spec = self.instance.buyer(buyer);
        *self.cache.entry((buyer, set)).or_insert_with(|| spec.value_set(set, counter))
    }

    /// Cheapest way to give `item` to a buyer who lacks it, as
    /// `min_i v_i(S_i) - v_i(S_i + item)` with the buyer attaining it.
    fn entry_gain(&mut self, item: usize, counter: &mut OracleCounter) -> Option<(i64, usize)> {
        let mut best: Option<(i64, usize)> = None;
        for i in 0..self.instance.m() {
            if !self.active[i] || self.bundles[i] >> item & 1 == 1 {
                continue;
            }
            let with = self.value(i, self.bundles[i] | 1 << item, counter);
            let w = self.values[i] - with;
            if best.map_or(true, |b| (w, i) < b) {
                best = Some((w, i));
            }
        }
        if let Some(&head) = self.lists[item].first() {
            let w = -self.singles[head][item];
            if best.map_or(true, |b| (w, head) < b) {
                best = Some((w, head));
            }
        }
        best
    }

    /// Weight of swapping owned `from` for `to` in its owner's bundle.
    fn swap_weight(&mut self, from: usize, to: usize, counter: &mut OracleCounter) -> i64 {
        let i = self.owner[from].expect("arc tail is owned");
        let set = self.bundles[i] & !(1 << from) | 1 << to;
        let v = self.value(i, set, counter);
        self.values[i] - v + self.prices[to] - self.prices[from]
    }

    /// Smallest starting price for `item` that keeps every arc into it non-negative.
    pub fn init_phase_price(&mut self, item: usize, counter: &mut OracleCounter) -> i64 {
        let mut price = i64::MIN;
        for t in self.inserted.clone() {
            let i = self.owner[t].expect("inserted items are owned");
            let set = self.bundles[i] & !(1 << t) | 1 << item;
            let v = self.value(i, set, counter);
            price = price.max(v - self.values[i] + self.prices[t]);
        }
        if let Some((w, _)) = self.entry_gain(item, counter) {
            price = price.max(-w);
        }
        price
    }

    /// Lexicographic Dijkstra from the empty-slot node to `target`. Returns the
    /// path, the buyer entering it, and distances truncated at the target's.
    pub fn shortest_augmentation(
        &mut self,
        target: usize,
        phase: usize,
        counter: &mut OracleCounter,
    ) -> Result<(Vec<usize>, usize, Vec<(usize, i64)>)> {
        let nodes = self.inserted.clone();
        let mut dist: HashMap<usize, LexDistance> = HashMap::new();
        let mut pred: HashMap<usize, Option<usize>> = HashMap::new();
        let mut entrant: HashMap<usize, usize> = HashMap::new();
        let mut settled: Vec<usize> = Vec::new();
        let negative = |buyer| Error::CertificateViolation { phase, buyer: buyer + 1, condition: "non-negative arc" };
        let start = LexDistance { weight: 0, hops: 0 };
        for &j in &nodes {
            if let Some((gain, buyer)) = self.entry_gain(j, counter) {
                let w = self.prices[j] + gain;
                if w < 0 {
                    return Err(negative(buyer));
                }
                dist.insert(j, start.then(w));
                pred.insert(j, None);
                entrant.insert(j, buyer);
            }
        }
        loop {
            let next = nodes
                .iter()
                .filter(|j| !settled.contains(j))
                .filter_map(|&j| dist.get(&j).map(|&d| (d, j)))
                .min()
                .ok_or_else(|| Error::Precondition(format!("item {} unreachable in phase {phase}", target + 1)))?;
            let (d, t) = next;
            settled.push(t);
            if t == target {
                break;
            }
            let owner = self.owner[t].expect("only the new item is unowned");
            for &j in &nodes {
                if settled.contains(&j) || self.bundles[owner] >> j & 1 == 1 {
                    continue;
                }
                let w = self.swap_weight(t, j, counter);
                if w < 0 {
                    return Err(negative(owner));
                }
                let cand = d.then(w);
                if dist.get(&j).map_or(true, |&old| cand < old) {
                    dist.insert(j, cand);
                    pred.insert(j, Some(t));
                }
            }
        }
        let reach = dist[&target].weight;
        let distances =
            nodes.iter().map(|&j| (j, if settled.contains(&j) { dist[&j].weight } else { reach })).collect();
        let mut path = vec![target];
        while let Some(Some(p)) = pred.get(path.last().expect("non-empty")) {
            path.push(*p);
        }
        path.reverse();
        let first = path[0];
        Ok((path, entrant[&first], distances))
    }

    /// Performs the swaps along `path` and lowers every price by its distance.
    pub fn apply_augmentation(
        &mut self,
        path: &[usize],
        entrant: usize,
        distances: &[(usize, i64)],
        counter: &mut OracleCounter,
    ) {
        let before = self.owner.clone();
        self.owner[path[0]] = Some(entrant);
        for pair in path.windows(2) {
            self.owner[pair[1]] = before[pair[0]];
        }
        for &(j, d) in distances {
            self.prices[j] -= d;
        }
        let mut changed = vec![entrant];
        changed.extend(path.iter().filter_map(|&j| before[j]));
        changed.sort_unstable();
        changed.dedup();
        for &i in &changed {
            self.bundles[i] = 0;
        }
        for (j, o) in self.owner.iter().enumerate() {
            if let Some(i) = o {
                if changed.contains(i) {
                    self.bundles[*i] |= 1 << j;
                }
            }
        }
        self.cache.clear();
        for &i in &changed {
            let set = self.bundles[i];
            self.values[i] = match set.count_ones() {
                0 => 0,
                1 => self.singles[i][set.trailing_zeros() as usize],
                _ => self.instance.buyer(i).value_set(set, counter),
            };
        }
        if !self.active[entrant] {
            self.active[entrant] = true;
            for list in &mut self.lists {
                list.retain(|&b| b != entrant);
            }
        }
    }

    /// Checks that no buyer gains by adding, removing or swapping a single
    /// inserted item. Uses uncounted evaluations.
    pub fn check_certificate(&self, phase: usize) -> Result<()> {
        let inserted: u64 = self.inserted.iter().fold(0, |m, &j| m | 1 << j);
        for i in 0..self.instance.m() {
            let spec = self.instance.buyer(i);
            let set = self.bundles[i];
            let base = spec.value_of_set(set);
            let fail = |condition| Err(Error::CertificateViolation { phase, buyer: i + 1, condition });
            for j in bits(inserted & !set) {
                if spec.value_of_set(set | 1 << j) - self.prices[j] > base {
                    return fail("add");
                }
                for t in bits(set) {
                    if spec.value_of_set(set & !(1 << t) | 1 << j) - self.prices[j] + self.prices[t] > base {
                        return fail("swap");
                    }
                }
            }
            for t in bits(set) {
                if spec.value_of_set(set & !(1 << t)) + self.prices[t] > base {
                    return fail("remove");
                }
            }
        }
        Ok(())
    }
}

/// Rejects valuations that decrease when an item is added.
pub fn check_monotone(instance: &MarketInstance) -> Result<()> {
    let n = instance.n();
    for (i, spec) in instance.buyers().iter().enumerate() {
        let weights = match spec {
            ValuationSpec::Additive { weights } => Some(weights),
            ValuationSpec::UnitDemand { values } => Some(values),
            ValuationSpec::WeightedMatroidRank { weights, .. } => Some(weights),
            ValuationSpec::ExplicitTable(_) => None,
        };
        let violation = |smaller: u64, larger: u64| Error::NotMonotone {
            buyer: i + 1,
            smaller,
            larger,
            small_value: spec.value_of_set(smaller),
            large_value: spec.value_of_set(larger),
        };
        match weights {
            Some(w) => {
                if let Some(j) = w.iter().position(|&x| x < 0) {
                    return Err(violation(0, 1 << j));
                }
            }
            None => {
                for set in 0..1u64 << n {
                    let v = spec.value_of_set(set);
                    for j in bits(!set & ((1 << n) - 1)) {
                        if spec.value_of_set(set | 1 << j) < v {
                            return Err(violation(set, set | 1 << j));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Inserts items in index order.
pub fn solve_welfare_incremental(instance: &MarketInstance, counter: &mut OracleCounter) -> Result<CombinatorialResult> {
    let order: Vec<usize> = (0..instance.n()).collect();
    solve_in_order(instance, &order, counter)
}

/// Inserts items in the given order, which must be a permutation of the items.
pub fn solve_in_order(
    instance: &MarketInstance,
    order: &[usize],
    counter: &mut OracleCounter,
) -> Result<CombinatorialResult> {
    let n = instance.n();
    let mut seen = vec![false; n];
    if order.len() != n || order.iter().any(|&j| j >= n || std::mem::replace(&mut seen[j], true)) {
        return Err(Error::Precondition("insertion order is not a permutation of the items".into()));
    }
    if n > 63 {
        return Err(Error::Precondition("at most 63 items".into()));
    }
    check_monotone(instance)?;
    // The single-item queries made up front belong to the first phase.
    let mut last_calls = counter.value_calls;
    let mut state = PhaseState::new(instance, counter)?;
    let mut phases = Vec::with_capacity(n);
    for (k, &item) in order.iter().enumerate() {
        let phase = k + 1;
        let price = state.init_phase_price(item, counter);
        state.prices[item] = price;
        state.inserted.push(item);
        let (path, entrant, distances) = state.shortest_augmentation(item, phase, counter)?;
        state.apply_augmentation(&path, entrant, &distances, counter);
        state.check_certificate(phase)?;
        phases.push(PhaseTrace {
            phase,
            item,
            path,
            entrant,
            distances,
            prices: state.prices(),
            value_calls: counter.value_calls - last_calls,
        });
        last_calls = counter.value_calls;
    }
    let owners: Vec<usize> = state.owner.iter().map(|o| o.expect("every item is assigned")).collect();
    let allocation = Allocation::from_owners(n, instance.m(), &owners);
    let welfare = state.values.iter().sum();
    let certificate = Certificate {
        prices: PriceVector::new(state.prices.iter().map(|&p| int(p)).collect()),
        allocation,
        witnesses: vec![Witness::LocalExchange; instance.m()],
        oracle_calls: *counter,
    };
    Ok(CombinatorialResult { certificate, prices: state.prices, owners, welfare, phases })
}

pub(crate) fn solve_report(instance: &MarketInstance) -> Result<SolveReport> {
    let mut counter = OracleCounter::default();
    let result = solve_welfare_incremental(instance, &mut counter)?;
    Ok(SolveReport {
        method: Method::Combinatorial,
        iterations: result.phases.len(),
        retries: 0,
        counter,
        phase_calls: result.phases.iter().map(|p| p.value_calls).collect(),
        trace: Vec::new(),
        outcome: Outcome::Certified(result.certificate),
    })
}
