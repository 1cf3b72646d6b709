//! Brute-force reference values for the fixture markets, computed by direct
//! enumeration of allocations and integer price grids, then frozen.

mod common;

use common::brute::{integral_set, partitions, tables, welfare};
use walrus_core::fixtures;
use walrus_core::verify::{brute_force_welfare, enumerate_integral_walrasian, find_walrasian_vertex};
use walrus_core::MarketInstance;

fn optimum(instance: &MarketInstance) -> (i64, usize) {
    let values = tables(instance);
    let all = partitions(instance.n(), instance.m());
    let best = all.iter().map(|m| welfare(&values, m)).max().unwrap();
    (best, all.iter().filter(|m| welfare(&values, m) == best).count())
}

fn named() -> Vec<(&'static str, MarketInstance)> {
    vec![
        ("a", fixtures::instance_a()),
        ("b", fixtures::instance_b()),
        ("c", fixtures::instance_c()),
        ("d", fixtures::instance_d()),
        ("complements pair", fixtures::complements_pair()),
        ("complements against unit demand", fixtures::complements_against_unit_demand()),
        ("matroid cover", fixtures::matroid_cover()),
    ]
}

#[test]
fn frozen_optima() {
    let frozen = [
        ("a", 2, 6),
        ("b", 8, 1),
        ("c", 3, 7),
        ("d", 9, 1),
        ("complements pair", 1, 2),
        ("complements against unit demand", 3, 1),
        ("matroid cover", 4, 2),
    ];
    for ((name, instance), (frozen_name, value, count)) in named().into_iter().zip(frozen) {
        assert_eq!(name, frozen_name);
        assert_eq!(optimum(&instance), (value, count), "{name}");
        let solved = brute_force_welfare(&instance).unwrap();
        assert_eq!((solved.value, solved.optima.len()), (value, count), "{name}");
    }
}

#[test]
fn frozen_integral_price_sets() {
    // (name, grid bound, number of Walrasian grid points, smallest, largest)
    let frozen: [(&str, i64, usize, Option<Vec<i64>>, Option<Vec<i64>>); 7] = [
        ("a", 4, 1, Some(vec![1, 1]), Some(vec![1, 1])),
        ("b", 6, 120, Some(vec![-6, -6]), Some(vec![3, 5])),
        ("c", 4, 1, Some(vec![1, 1, 1]), Some(vec![1, 1, 1])),
        ("d", 5, 24, Some(vec![1, 1, 1]), Some(vec![4, 3, 2])),
        ("complements pair", 3, 2, Some(vec![0, 1]), Some(vec![1, 0])),
        ("complements against unit demand", 4, 0, None, None),
        ("matroid cover", 3, 2, Some(vec![0, 0, 0, 0]), Some(vec![1, 1, 1, 1])),
    ];
    for ((name, instance), (_, bound, count, lo, hi)) in named().into_iter().zip(frozen) {
        let grid = integral_set(&instance, bound);
        assert_eq!(grid.len(), count, "{name}");
        assert_eq!(grid.first().cloned(), lo, "{name}");
        assert_eq!(grid.last().cloned(), hi, "{name}");
    }
}

#[test]
fn library_enumeration_matches_the_grid() {
    for (name, instance) in named() {
        let grid = integral_set(&instance, 2 * instance.magnitude_bound());
        let found = enumerate_integral_walrasian(&instance).unwrap();
        assert_eq!(found.integral_points, grid, "{name}");
        assert_eq!(found.exists, !grid.is_empty(), "{name}");
        let vertex = find_walrasian_vertex(&instance).unwrap();
        if !grid.is_empty() {
            assert!(vertex.is_some(), "{name}");
        }
    }
}
