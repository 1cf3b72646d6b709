//! Reference computations by direct enumeration over unit-supply markets.

use walrus_core::{MarketInstance, OracleCounter};

/// `values[i][mask]` for every buyer and item set.
pub fn tables(instance: &MarketInstance) -> Vec<Vec<i64>> {
    let n = instance.n();
    let mut counter = OracleCounter::default();
    instance.buyers().iter().map(|b| (0..1u64 << n).map(|s| b.value_set(s, &mut counter)).collect()).collect()
}

/// Every way to hand each item to one buyer, as per-buyer masks.
pub fn partitions(n: usize, m: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    for code in 0..m.pow(n as u32) {
        let mut masks = vec![0u64; m];
        let mut rest = code;
        for j in 0..n {
            masks[rest % m] |= 1 << j;
            rest /= m;
        }
        out.push(masks);
    }
    out
}

pub fn welfare(values: &[Vec<i64>], masks: &[u64]) -> i64 {
    masks.iter().enumerate().map(|(i, &s)| values[i][s as usize]).sum()
}

pub fn cost(p: &[i64], mask: u64) -> i64 {
    (0..p.len()).filter(|j| mask >> j & 1 == 1).map(|j| p[j]).sum()
}

pub fn is_walrasian(values: &[Vec<i64>], p: &[i64]) -> bool {
    let n = p.len();
    let best: Vec<i64> =
        values.iter().map(|v| (0..1u64 << n).map(|s| v[s as usize] - cost(p, s)).max().unwrap()).collect();
    partitions(n, values.len()).iter().any(|masks| {
        masks.iter().enumerate().all(|(i, &s)| values[i][s as usize] - cost(p, s) == best[i])
    })
}

/// Integer Walrasian prices in `[-bound, bound]^n`.
pub fn integral_set(instance: &MarketInstance, bound: i64) -> Vec<Vec<i64>> {
    let values = tables(instance);
    let n = instance.n();
    let width = (2 * bound + 1) as usize;
    let mut out = Vec::new();
    for code in 0..width.pow(n as u32) {
        let mut rest = code;
        let p: Vec<i64> = (0..n)
            .map(|_| {
                let x = (rest % width) as i64 - bound;
                rest /= width;
                x
            })
            .collect();
        if is_walrasian(&values, &p) {
            out.push(p);
        }
    }
    out.sort();
    out
}
