//! Small canonical markets used by tests, docs and the CLI.

use crate::market::MarketInstance;
use crate::valuation::ValuationSpec;

/// Two items, three buyers who each value any nonempty bundle at 1.
pub fn instance_a() -> MarketInstance {
    let v = ValuationSpec::table(2, vec![0, 1, 1, 1]).expect("static table");
    MarketInstance::unit(2, vec![v.clone(), v.clone(), v]).expect("static instance")
}

/// One additive buyer with values (3, 5).
pub fn instance_b() -> MarketInstance {
    MarketInstance::unit(2, vec![ValuationSpec::additive(vec![3, 5])]).expect("static instance")
}

/// Three items; buyer 1 has `min(|S|, 2)`, buyer 2 is additive (1, 1, 1).
/// Several allocations reach the optimum.
pub fn instance_c() -> MarketInstance {
    MarketInstance::unit(
        3,
        vec![ValuationSpec::uniform_rank(2, vec![1, 1, 1]), ValuationSpec::additive(vec![1, 1, 1])],
    )
    .expect("static instance")
}

/// Three items, two additive buyers (4, 1, 1) and (1, 3, 2); the optimum is unique.
pub fn instance_d() -> MarketInstance {
    MarketInstance::unit(3, vec![ValuationSpec::additive(vec![4, 1, 1]), ValuationSpec::additive(vec![1, 3, 2])])
        .expect("static instance")
}

/// Worth 1 only for both items together.
pub fn complements_valuation() -> ValuationSpec {
    ValuationSpec::table(2, vec![0, 0, 0, 1]).expect("static table")
}

/// Two identical complements buyers. Prices summing to 1 clear the market,
/// e.g. (1, 0), so equilibria exist even though the valuation is not GS.
pub fn complements_pair() -> MarketInstance {
    MarketInstance::unit(2, vec![complements_valuation(), complements_valuation()]).expect("static instance")
}

/// A buyer worth 3 for both items together against a unit-demand buyer worth
/// 2 per item. No Walrasian price exists.
pub fn complements_against_unit_demand() -> MarketInstance {
    MarketInstance::unit(
        2,
        vec![ValuationSpec::table(2, vec![0, 0, 0, 3]).expect("static table"), ValuationSpec::unit_demand(vec![2, 2])],
    )
    .expect("static instance")
}

/// Four items and two unit-weight partition matroids whose bases cover the
/// items; all-ones prices support a welfare of 4.
pub fn matroid_cover() -> MarketInstance {
    MarketInstance::unit(
        4,
        vec![
            ValuationSpec::partition_rank(vec![vec![0, 1], vec![2, 3]], vec![1, 1], vec![1; 4]),
            ValuationSpec::partition_rank(vec![vec![0, 2], vec![1, 3]], vec![1, 1], vec![1; 4]),
        ],
    )
    .expect("static instance")
}
