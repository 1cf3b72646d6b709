//! Subgradient ellipsoid minimization of the market potential, perturbations
//! that make its minimizer unique, and rounding to exact Walrasian prices.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, RandBigInt};
use num_traits::{One, Pow, Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::market::{ratio, Allocation, Bundle, Certificate, MarketInstance, PriceVector, Rational, Witness};
use crate::potential::{all_greedy, greedy_set};
use crate::scalar::{Field, Fixed, Scalar};
use crate::valuation::{bits, OracleCounter};
use crate::verify::{walrasian_membership, Membership};

pub const DEFAULT_MAX_RETRIES: u32 = 10;
/// Exact general solves are limited to this many items.
pub const GENERAL_ITEM_LIMIT: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    GsDeterministic,
    GeneralRandom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationVector {
    pub r: Vec<Rational>,
    pub regime: Regime,
    pub seed: Option<u64>,
}

fn largest_supply(instance: &MarketInstance) -> i64 {
    instance.max_supply().max(1) as i64
}

pub fn make_perturbation(instance: &MarketInstance, regime: Regime, seed: u64) -> PerturbationVector {
    match regime {
        Regime::GsDeterministic => {
            let denom = 2 * largest_supply(instance) * instance.n() as i64;
            PerturbationVector { r: vec![ratio(1, denom); instance.n()], regime, seed: None }
        }
        Regime::GeneralRandom => general_perturbation(instance, seed, 0),
    }
}

/// `r_j = z_j / ((Z + 1) (nS)^(2n+1))` with `z_j` uniform in `[1, Z]` and
/// `Z = nM (nS)^(2n)`, one independent stream per attempt. Every coordinate
/// is positive, even when `Z = 1`.
fn general_perturbation(instance: &MarketInstance, seed: u64, attempt: u32) -> PerturbationVector {
    let n = instance.n() as u32;
    let ns = BigInt::from(instance.n() as i64 * largest_supply(instance));
    let range = BigInt::from(instance.n() as i64 * instance.magnitude_bound().max(1)) * Pow::pow(&ns, 2 * n);
    let top: BigInt = &range + 1;
    let denom = &top * Pow::pow(&ns, 2 * n + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(attempt as u64);
    let r = (0..n).map(|_| Rational::new(rng.gen_bigint_range(&BigInt::one(), &top), denom.clone())).collect();
    PerturbationVector { r, regime: Regime::GeneralRandom, seed: Some(seed) }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    ZeroSubgradient,
    /// The ellipsoid can no longer contain a ball of radius epsilon.
    Volume,
    /// The ellipsoid has no width left along the last cut at working precision.
    Flat,
    MaxIterations,
}

/// What the oracle reports at a query point.
#[derive(Clone, Debug, PartialEq)]
pub struct Cut<F> {
    pub value: Option<F>,
    pub subgradient: Vec<F>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Query<F> {
    pub point: Vec<F>,
    pub value: Option<F>,
    pub subgradient: Vec<F>,
}

#[derive(Clone, Debug)]
pub struct EllipsoidState<F> {
    pub center: Vec<F>,
    pub shape: Vec<Vec<F>>,
    pub iterations: usize,
    pub transcript: Vec<Query<F>>,
    pub zero_subgradient: Option<Vec<F>>,
    pub stop: StopReason,
}

impl<F: Field> EllipsoidState<F> {
    /// The zero-subgradient point if one was queried, else the queried point
    /// with the smallest value, else the final center.
    pub fn best_point(&self) -> &[F] {
        if let Some(p) = &self.zero_subgradient {
            return p;
        }
        self.transcript
            .iter()
            .filter_map(|q| q.value.as_ref().map(|v| (v, &q.point)))
            .fold(None::<(&F, &Vec<F>)>, |best, (v, p)| match best {
                Some((b, _)) if *b <= *v => best,
                _ => Some((v, p)),
            })
            .map_or(&self.center, |(_, p)| p)
    }
}

/// Central-cut ellipsoid `{x : (x - c)^T P^+ (x - c) <= 1}` of dimension `dim`.
#[derive(Clone, Debug)]
pub struct Ellipsoid<F> {
    center: Vec<F>,
    shape: Vec<Vec<F>>,
    dim: usize,
    log_volume: f64,
    bound: Option<F>,
}

impl<F: Field> Ellipsoid<F> {
    pub fn ball(n: usize, radius: F) -> Self {
        let r2 = radius.clone() * radius.clone();
        let shape =
            (0..n).map(|i| (0..n).map(|j| if i == j { r2.clone() } else { F::zero() }).collect()).collect();
        Ellipsoid { center: vec![F::zero(); n], shape, dim: n, log_volume: n as f64 * radius.to_f64().ln(), bound: None }
    }

    /// The ball intersected with the hyperplane orthogonal to the all-ones
    /// vector; cuts must be orthogonal to all-ones as well.
    pub fn ball_in_hyperplane(n: usize, radius: F) -> Self {
        let r2 = radius.clone() * radius.clone();
        let off = -(r2.clone() / F::from_int(n as i64));
        let diag = r2 + off.clone();
        let shape =
            (0..n).map(|i| (0..n).map(|j| if i == j { diag.clone() } else { off.clone() }).collect()).collect();
        let dim = n.saturating_sub(1);
        Ellipsoid { center: vec![F::zero(); n], shape, dim, log_volume: dim as f64 * radius.to_f64().ln(), bound: None }
    }

    pub fn center(&self) -> &[F] {
        &self.center
    }

    /// Restricts the search to the box `[-bound, bound]^n`. Centers outside it
    /// are cut by the violated face and never reach the oracle.
    pub fn within_box(mut self, bound: F) -> Self {
        self.bound = Some(bound);
        self
    }

    fn box_cut(&self) -> Option<Vec<F>> {
        let bound = self.bound.as_ref()?;
        let j = self.center.iter().position(|c| *c > *bound || *c < -bound.clone())?;
        let mut g = vec![F::zero(); self.center.len()];
        g[j] = if self.center[j] > *bound { F::from_int(1) } else { F::from_int(-1) };
        Some(g)
    }

    /// Runs until a zero subgradient, until the volume drops below that of an
    /// `epsilon`-ball, or for `max_iters` cuts.
    pub fn minimize(
        mut self,
        epsilon: f64,
        max_iters: usize,
        mut oracle: impl FnMut(&[F]) -> Result<Cut<F>>,
    ) -> Result<EllipsoidState<F>> {
        let floor = self.dim as f64 * epsilon.ln();
        let mut transcript = Vec::new();
        let mut stop = StopReason::MaxIterations;
        let mut zero_subgradient = None;
        let mut iterations = 0;
        while iterations < max_iters {
            iterations += 1;
            if let Some(g) = self.box_cut() {
                transcript.push(Query { point: self.center.clone(), value: None, subgradient: g.clone() });
                if !self.cut(&g)? {
                    stop = StopReason::Flat;
                    break;
                }
                if self.log_volume < floor {
                    stop = StopReason::Volume;
                    break;
                }
                continue;
            }
            let cut = oracle(&self.center)?;
            transcript.push(Query {
                point: self.center.clone(),
                value: cut.value.clone(),
                subgradient: cut.subgradient.clone(),
            });
            if cut.subgradient.iter().all(|g| *g == F::zero()) {
                zero_subgradient = Some(self.center.clone());
                stop = StopReason::ZeroSubgradient;
                break;
            }
            if !self.cut(&cut.subgradient)? {
                stop = StopReason::Flat;
                break;
            }
            if self.log_volume < floor {
                stop = StopReason::Volume;
                break;
            }
        }
        Ok(EllipsoidState {
            center: self.center,
            shape: self.shape,
            iterations,
            transcript,
            zero_subgradient,
            stop,
        })
    }

    /// `P <- scale (P - weight b b^T)`, computed on one triangle and mirrored
    /// so rounding cannot make the matrix drift away from symmetric.
    fn update_shape(&mut self, b: &[F], weight: F, scale: F) {
        let n = b.len();
        for i in 0..n {
            for j in i..n {
                let s = self.shape[i][j].clone() - weight.clone() * b[i].clone() * b[j].clone();
                let s = scale.clone() * s;
                self.shape[j][i] = s.clone();
                self.shape[i][j] = s;
            }
        }
    }

    /// Keeps the half `g.(x - c) <= 0`. False when the ellipsoid is already
    /// flat along `g`.
    fn cut(&mut self, g: &[F]) -> Result<bool> {
        let n = self.center.len();
        let k = self.dim;
        if k == 0 {
            return Ok(true);
        }
        let pg: Vec<F> = self
            .shape
            .iter()
            .map(|row| row.iter().zip(g).fold(F::zero(), |acc, (a, b)| acc + a.clone() * b.clone()))
            .collect();
        let gpg = pg.iter().zip(g).fold(F::zero(), |acc, (a, b)| acc + a.clone() * b.clone());
        if gpg == F::zero() {
            return Ok(false);
        }
        if !(gpg > F::zero()) || !gpg.is_finite() {
            return Err(Error::NumericFailure);
        }
        let norm = gpg.sqrt();
        if !(norm > F::zero()) {
            return Err(Error::NumericFailure);
        }
        let b: Vec<F> = pg.into_iter().map(|x| x / norm.clone()).collect();
        let kf = F::from_int(k as i64);
        let one = F::from_int(1);
        for (c, bi) in self.center.iter_mut().zip(&b) {
            *c = c.clone() - bi.clone() / (kf.clone() + one.clone());
        }
        if k == 1 {
            // An interval: halve it.
            let three_quarters = F::from_int(3) / F::from_int(4);
            self.update_shape(&b, three_quarters, F::from_int(1));
            self.log_volume -= std::f64::consts::LN_2;
        } else {
            let k2 = kf.clone() * kf.clone();
            let scale = k2.clone() / (k2 - one.clone());
            let two = F::from_int(2) / (kf + one);
            self.update_shape(&b, two, scale);
            let kk = k as f64;
            self.log_volume += (kk / (kk + 1.0)).ln() + (kk - 1.0) / 2.0 * (kk * kk / (kk * kk - 1.0)).ln();
        }
        let finite = self.center.iter().all(Field::is_finite) && (0..n).all(|i| self.shape[i][i].is_finite());
        let nonneg = (0..n).all(|i| !(self.shape[i][i] < F::zero()));
        if finite && nonneg {
            Ok(true)
        } else {
            Err(Error::NumericFailure)
        }
    }
}

/// Minimizes over the ball of radius `2M sqrt(n)` around the origin.
pub fn ellipsoid_minimize<F: Field>(
    oracle: impl FnMut(&[F]) -> Result<Cut<F>>,
    n: usize,
    box_m: i64,
    epsilon: f64,
    max_iters: usize,
) -> Result<EllipsoidState<F>> {
    Ellipsoid::ball(n, F::from_int(box_m.max(1)) * F::from_int(2) * F::from_int(n as i64).sqrt())
        .minimize(epsilon, max_iters, oracle)
}

/// Iterations the volume argument needs, plus slack.
fn iteration_budget(dim: usize, radius: f64, epsilon: f64) -> usize {
    let k = dim.max(1) as f64;
    (2.0 * k * (k + 1.0) * (radius / epsilon).ln().max(1.0)).ceil() as usize + 100
}

fn nearest_integer(x: &Rational) -> BigInt {
    (x + ratio(1, 2)).floor().to_integer()
}

/// Best approximation of `x` by a fraction with denominator at most `max_den`.
pub fn best_rational_approximation(x: &Rational, max_den: &BigInt) -> Rational {
    let (mut h0, mut h1) = (BigInt::zero(), BigInt::one());
    let (mut k0, mut k1) = (BigInt::one(), BigInt::zero());
    let mut rest = x.clone();
    loop {
        let a = rest.floor().to_integer();
        let h2 = &a * &h1 + &h0;
        let k2 = &a * &k1 + &k0;
        if &k2 > max_den {
            let t = (max_den - &k0) / &k1;
            let convergent = Rational::new(h1.clone(), k1.clone());
            let semi = Rational::new(&t * &h1 + &h0, &t * &k1 + &k0);
            return if (&semi - x).abs() < (&convergent - x).abs() { semi } else { convergent };
        }
        let frac = &rest - Rational::from_integer(a);
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if frac.is_zero() {
            return Rational::new(h1, k1);
        }
        rest = frac.recip();
    }
}

/// Rounds each coordinate to the unique fraction with denominator at most
/// `max_den` within `1 / (2 max_den^2)`, failing when there is none.
pub fn round_to_denominator(point: &[Rational], max_den: &BigInt) -> Result<PriceVector> {
    let radius = Rational::new(BigInt::one(), BigInt::from(2) * max_den * max_den);
    point
        .iter()
        .enumerate()
        .map(|(j, x)| {
            let a = best_rational_approximation(x, max_den);
            if (&a - x).abs() < radius {
                Ok(a)
            } else {
                Err(Error::AmbiguousRounding { coordinate: j })
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(PriceVector::new)
}

/// Gross substitutes: nearest integers. General: fractions with denominator
/// at most `(nS)^n`.
pub fn round_prices(point: &[Rational], instance: &MarketInstance, regime: Regime) -> Result<PriceVector> {
    match regime {
        Regime::GsDeterministic => {
            Ok(PriceVector::new(point.iter().map(|x| Rational::from_integer(nearest_integer(x))).collect()))
        }
        Regime::GeneralRandom => round_to_denominator(point, &vertex_denominator(instance)),
    }
}

fn vertex_denominator(instance: &MarketInstance) -> BigInt {
    Pow::pow(BigInt::from(instance.n() as i64 * largest_supply(instance)), instance.n() as u32)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Combinatorial,
    EllipsoidGs,
    EllipsoidGsRegularized,
    EllipsoidGeneral,
}

impl Method {
    pub const ALL: [Method; 4] =
        [Method::Combinatorial, Method::EllipsoidGs, Method::EllipsoidGsRegularized, Method::EllipsoidGeneral];

    pub fn name(self) -> &'static str {
        match self {
            Method::Combinatorial => "combinatorial",
            Method::EllipsoidGs => "ellipsoid-gs",
            Method::EllipsoidGsRegularized => "ellipsoid-gs-regularized",
            Method::EllipsoidGeneral => "ellipsoid-general",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Precondition(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Certified(Certificate),
    /// Every attempt failed verification; general markets need not clear.
    NoEquilibriumFound,
}

/// One ellipsoid query, in floating point for reporting.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceEvent {
    pub attempt: u32,
    pub iteration: usize,
    pub point: Vec<f64>,
    pub value: Option<f64>,
    pub subgradient: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub method: Method,
    pub outcome: Outcome,
    pub iterations: usize,
    pub retries: u32,
    pub counter: OracleCounter,
    /// Value-oracle calls per phase; only the combinatorial solver fills this.
    pub phase_calls: Vec<u64>,
    pub trace: Vec<TraceEvent>,
}

impl SolveReport {
    pub fn certificate(&self) -> Option<&Certificate> {
        match &self.outcome {
            Outcome::Certified(c) => Some(c),
            Outcome::NoEquilibriumFound => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveOptions {
    pub seed: u64,
    pub max_retries: u32,
    pub trace: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { seed: 0, max_retries: DEFAULT_MAX_RETRIES, trace: false }
    }
}

pub fn solve_walrasian_prices(instance: &MarketInstance, method: Method, seed: u64) -> Result<SolveReport> {
    solve_with(instance, method, &SolveOptions { seed, ..SolveOptions::default() })
}

pub fn solve_with(instance: &MarketInstance, method: Method, options: &SolveOptions) -> Result<SolveReport> {
    match method {
        Method::Combinatorial => crate::combinatorial::solve_report(instance),
        Method::EllipsoidGs => ellipsoid_gs(instance, options),
        Method::EllipsoidGsRegularized => ellipsoid_gs_regularized(instance, options),
        Method::EllipsoidGeneral => ellipsoid_general(instance, options),
    }
}

struct Run {
    report: SolveReport,
}

impl Run {
    fn new(method: Method) -> Self {
        Run {
            report: SolveReport {
                method,
                outcome: Outcome::NoEquilibriumFound,
                iterations: 0,
                retries: 0,
                counter: OracleCounter::default(),
                phase_calls: Vec::new(),
                trace: Vec::new(),
            },
        }
    }

    fn record<F: Field>(&mut self, attempt: u32, state: &EllipsoidState<F>, trace: bool) {
        self.report.iterations += state.iterations;
        self.report.retries = attempt;
        if trace {
            self.report.trace.extend(state.transcript.iter().enumerate().map(|(t, q)| TraceEvent {
                attempt,
                iteration: t + 1,
                point: q.point.iter().map(Field::to_f64).collect(),
                value: q.value.as_ref().map(Field::to_f64),
                subgradient: q.subgradient.iter().map(Field::to_f64).collect(),
            }));
        }
    }

    /// Certifies `prices` by searching for a clearing allocation.
    fn certify(&mut self, instance: &MarketInstance, prices: PriceVector, allocation: Option<&Allocation>) -> Result<bool> {
        match walrasian_membership(instance, &prices, allocation)? {
            Membership::Member { allocation } => {
                self.report.outcome = Outcome::Certified(Certificate {
                    prices,
                    witnesses: vec![Witness::BruteForce; instance.m()],
                    allocation,
                    oracle_calls: self.report.counter,
                });
                Ok(true)
            }
            Membership::NotMember(_) => Ok(false),
        }
    }
}

/// Prices outside `[-2M, 2M]` are never needed; without the box a buyer
/// facing no competition drags the perturbed potential to minus infinity.
fn price_bound(instance: &MarketInstance) -> i64 {
    2 * instance.magnitude_bound().max(1)
}

fn gs_radius(instance: &MarketInstance) -> f64 {
    2.0 * instance.magnitude_bound().max(1) as f64 * (instance.n() as f64).sqrt() + 1.0
}

/// Perturbed potential `f(p) + p.r` and its subgradient `s + r - d(p)` with greedy demands.
fn gs_oracle<F: Field>(instance: &MarketInstance, r: &F, p: &[F], counter: &mut OracleCounter) -> Cut<F> {
    let n = instance.n();
    let mut demand = vec![0i64; n];
    let mut value = F::zero();
    for spec in instance.buyers() {
        let (set, _, utility) = greedy_set(spec, p, counter);
        for j in bits(set) {
            demand[j] += 1;
        }
        value = value + utility;
    }
    counter.aggregate_calls += 1;
    let shift = F::from_int(1) + r.clone();
    let value = p.iter().fold(value, |acc, x| acc + x.clone() * shift.clone());
    let subgradient = demand.iter().map(|&d| shift.clone() - F::from_int(d)).collect();
    Cut { value: Some(value), subgradient }
}

fn run_gs<F: Field>(instance: &MarketInstance, epsilon: f64, counter: &mut OracleCounter) -> Result<EllipsoidState<F>> {
    let n = instance.n();
    let r = F::from_int(1) / F::from_int(2 * n as i64);
    let radius = gs_radius(instance);
    let ball = Ellipsoid::ball(n, F::from_rational(&Rational::from_float(radius).expect("finite radius")))
        .within_box(F::from_int(price_bound(instance)));
    ball.minimize(epsilon, iteration_budget(n, radius, epsilon), |p| Ok(gs_oracle(instance, &r, p, counter)))
}

fn to_rationals<F: Field>(point: &[F]) -> Vec<Rational> {
    point.iter().map(Field::to_rational).collect()
}

/// Gross substitutes, unit supply: minimize the deterministically perturbed
/// potential in floating point, round to the nearest integer and verify.
pub fn ellipsoid_gs(instance: &MarketInstance, options: &SolveOptions) -> Result<SolveReport> {
    instance.require_unit_supply()?;
    let mut run = Run::new(Method::EllipsoidGs);
    let base = 1.0 / (5.0 * instance.n() as f64 * instance.magnitude_bound().max(1) as f64);
    for attempt in 0..=options.max_retries {
        let epsilon = base / 2f64.powi(attempt as i32);
        let point = match run_gs::<f64>(instance, epsilon, &mut run.report.counter) {
            Ok(state) => {
                run.record(attempt, &state, options.trace);
                to_rationals(state.best_point())
            }
            Err(Error::NumericFailure) => {
                let state = run_gs::<Fixed<128>>(instance, epsilon, &mut run.report.counter)?;
                run.record(attempt, &state, options.trace);
                to_rationals(state.best_point())
            }
            Err(e) => return Err(e),
        };
        let prices = round_prices(&point, instance, Regime::GsDeterministic)?;
        if run.certify(instance, prices, None)? {
            break;
        }
    }
    Ok(run.report)
}

fn regularized_oracle<F: Field>(
    instance: &MarketInstance,
    p: &[F],
    counter: &mut OracleCounter,
) -> Result<Cut<F>> {
    let greedy = all_greedy(instance, p, counter)?;
    counter.aggregate_calls += 1;
    let mut value = p.iter().fold(F::zero(), |acc, x| acc + x.clone());
    for (spec, &set) in instance.buyers().iter().zip(&greedy.sets) {
        value = value + F::from_int(spec.value_of_set(set));
        value = bits(set).fold(value, |acc, j| acc - p[j].clone());
    }
    Ok(Cut { value: Some(value), subgradient: greedy.subgradient.iter().map(|&g| F::from_int(g)).collect() })
}

fn run_regularized<F: Field>(
    instance: &MarketInstance,
    epsilon: f64,
    counter: &mut OracleCounter,
) -> Result<EllipsoidState<F>> {
    let n = instance.n();
    let radius = gs_radius(instance);
    let ball = Ellipsoid::ball_in_hyperplane(n, F::from_rational(&Rational::from_float(radius).expect("finite radius")))
        .within_box(F::from_int(2 * price_bound(instance)));
    ball.minimize(epsilon, iteration_budget(n - 1, radius, epsilon), |p| regularized_oracle(instance, p, counter))
}

/// Gross substitutes, unit supply: minimize the regularized potential, which
/// only sees AllGreedy, over prices orthogonal to all-ones, then shift by the
/// last greedy marginal.
pub fn ellipsoid_gs_regularized(instance: &MarketInstance, options: &SolveOptions) -> Result<SolveReport> {
    instance.require_unit_supply()?;
    let mut run = Run::new(Method::EllipsoidGsRegularized);
    let base = 1.0 / (5.0 * instance.n() as f64 * instance.magnitude_bound().max(1) as f64);
    for attempt in 0..=options.max_retries {
        let epsilon = base / 2f64.powi(attempt as i32);
        let point = match run_regularized::<f64>(instance, epsilon, &mut run.report.counter) {
            Ok(state) => {
                run.record(attempt, &state, options.trace);
                to_rationals(state.best_point())
            }
            Err(Error::NumericFailure) => {
                let state = run_regularized::<Fixed<128>>(instance, epsilon, &mut run.report.counter)?;
                run.record(attempt, &state, options.trace);
                to_rationals(state.best_point())
            }
            Err(e) => return Err(e),
        };
        let greedy = all_greedy(instance, &point, &mut run.report.counter)?;
        let shifted: Vec<Rational> = point.iter().map(|x| x + &greedy.gamma).collect();
        let rounded = round_prices(&shifted, instance, Regime::GsDeterministic)?;
        if run.certify(instance, rounded, None)? {
            break;
        }
        if greedy.is_partition() {
            let allocation = Allocation::from_masks(instance.n(), &greedy.sets);
            if run.certify(instance, PriceVector::new(shifted), Some(&allocation))? {
                break;
            }
        }
    }
    Ok(run.report)
}

/// Every bundle in code order with each buyer's value scaled by `2^BITS`.
struct DemandTable {
    quantities: Vec<Vec<u32>>,
    /// Code with one unit fewer of the lowest non-zero item, and that item.
    parent: Vec<(usize, usize)>,
    values: Vec<Vec<BigInt>>,
}

impl DemandTable {
    fn new(instance: &MarketInstance, scale: u32, counter: &mut OracleCounter) -> Result<Self> {
        let domain: Vec<Bundle> = instance.domain().collect();
        let mut radix = Vec::with_capacity(instance.n());
        let mut step = 1usize;
        for &s in instance.supply() {
            radix.push(step);
            step *= s as usize + 1;
        }
        let quantities: Vec<Vec<u32>> = domain.iter().map(|x| x.quantities().to_vec()).collect();
        let parent = quantities
            .iter()
            .enumerate()
            .map(|(code, q)| match q.iter().position(|&x| x > 0) {
                Some(j) => (code - radix[j], j),
                None => (0, 0),
            })
            .collect();
        let values = instance
            .buyers()
            .iter()
            .map(|spec| {
                domain.iter().map(|x| Ok(BigInt::from(spec.evaluate(x, counter)?) << scale)).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(DemandTable { quantities, parent, values })
    }
}

fn general_oracle<const B: u32>(
    instance: &MarketInstance,
    table: &DemandTable,
    r: &[Fixed<B>],
    p: &[Fixed<B>],
    counter: &mut OracleCounter,
) -> Cut<Fixed<B>> {
    let n = instance.n();
    let mut cost = vec![BigInt::zero(); table.quantities.len()];
    for code in 1..cost.len() {
        let (from, j) = table.parent[code];
        cost[code] = &cost[from] + p[j].raw();
    }
    let mut demand = vec![0i64; n];
    let mut total = BigInt::zero();
    for values in &table.values {
        let mut best: Option<(BigInt, usize)> = None;
        for (code, (v, c)) in values.iter().zip(&cost).enumerate() {
            let u = v - c;
            if best.as_ref().map_or(true, |(b, _)| u > *b) {
                best = Some((u, code));
            }
        }
        let (u, code) = best.expect("domain contains the empty bundle");
        total += u;
        for (d, &x) in demand.iter_mut().zip(&table.quantities[code]) {
            *d += x as i64;
        }
    }
    counter.demand_calls += instance.m() as u64;
    counter.aggregate_calls += 1;
    let mut value = Fixed::<B>(total);
    for j in 0..n {
        value = value + p[j].clone() * (Fixed::from_int(instance.supply()[j] as i64) + r[j].clone());
    }
    let subgradient = (0..n)
        .map(|j| Fixed::from_int(instance.supply()[j] as i64 - demand[j]) + r[j].clone())
        .collect();
    Cut { value: Some(value), subgradient }
}

fn run_general<const B: u32>(
    instance: &MarketInstance,
    r: &[Rational],
    epsilon: f64,
    counter: &mut OracleCounter,
) -> Result<EllipsoidState<Fixed<B>>> {
    let n = instance.n();
    let table = DemandTable::new(instance, B, counter)?;
    let r: Vec<Fixed<B>> = r.iter().map(Fixed::from_rational).collect();
    let radius = gs_radius(instance);
    let ball = Ellipsoid::ball(n, Fixed::<B>::from_rational(&Rational::from_float(radius).expect("finite radius")))
        .within_box(Fixed::from_int(price_bound(instance)));
    ball.minimize(epsilon, iteration_budget(n, radius, epsilon), |p| Ok(general_oracle(instance, &table, &r, p, counter)))
}

/// Any valuations and supplies: minimize the randomly perturbed potential in
/// fixed-point arithmetic wide enough for the target precision, round with
/// continued fractions and verify. Each retry draws a fresh perturbation.
pub fn ellipsoid_general(instance: &MarketInstance, options: &SolveOptions) -> Result<SolveReport> {
    let n = instance.n();
    if n > GENERAL_ITEM_LIMIT {
        return Err(Error::ExceedsCheckLimit { n, limit: GENERAL_ITEM_LIMIT });
    }
    let budget = crate::potential::DEMAND_BUDGET;
    if instance.domain_size() > budget {
        return Err(Error::BudgetExceeded { what: "bundle domain", needed: instance.domain_size(), budget });
    }
    let mut run = Run::new(Method::EllipsoidGeneral);
    let nms = (n as f64) * instance.magnitude_bound().max(1) as f64 * largest_supply(instance) as f64;
    let log2_eps = -((7 * n + 4) as f64) * nms.log2();
    for attempt in 0..=options.max_retries {
        let log2_attempt = log2_eps - attempt as f64;
        let epsilon = log2_attempt.exp2();
        let r = general_perturbation(instance, options.seed, attempt).r;
        let bits_needed = -2.0 * log2_attempt + 64.0;
        let point = if bits_needed <= 256.0 {
            let state = run_general::<256>(instance, &r, epsilon, &mut run.report.counter);
            general_point(&mut run, attempt, state, options.trace)?
        } else if bits_needed <= 384.0 {
            let state = run_general::<384>(instance, &r, epsilon, &mut run.report.counter);
            general_point(&mut run, attempt, state, options.trace)?
        } else if bits_needed <= 512.0 {
            let state = run_general::<512>(instance, &r, epsilon, &mut run.report.counter);
            general_point(&mut run, attempt, state, options.trace)?
        } else if bits_needed <= 768.0 {
            let state = run_general::<768>(instance, &r, epsilon, &mut run.report.counter);
            general_point(&mut run, attempt, state, options.trace)?
        } else if bits_needed <= 1024.0 {
            let state = run_general::<1024>(instance, &r, epsilon, &mut run.report.counter);
            general_point(&mut run, attempt, state, options.trace)?
        } else {
            let state = run_general::<2048>(instance, &r, epsilon, &mut run.report.counter);
            general_point(&mut run, attempt, state, options.trace)?
        };
        let Some(point) = point else { continue };
        match round_prices(&point, instance, Regime::GeneralRandom) {
            Ok(prices) => {
                if run.certify(instance, prices, None)? {
                    break;
                }
            }
            Err(Error::AmbiguousRounding { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(run.report)
}

fn general_point<const B: u32>(
    run: &mut Run,
    attempt: u32,
    state: Result<EllipsoidState<Fixed<B>>>,
    trace: bool,
) -> Result<Option<Vec<Rational>>> {
    match state {
        Ok(state) => {
            run.record(attempt, &state, trace);
            Ok(Some(to_rationals(state.best_point())))
        }
        Err(Error::NumericFailure) => {
            run.report.retries = attempt;
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::market::int;

    #[test]
    fn perturbation_examples() {
        let b = fixtures::instance_b();
        let gs = make_perturbation(&b, Regime::GsDeterministic, 0);
        assert_eq!(gs.r, vec![ratio(1, 4), ratio(1, 4)]);
        let c = fixtures::instance_c();
        let one = make_perturbation(&c, Regime::GeneralRandom, 7);
        assert_eq!(one, make_perturbation(&c, Regime::GeneralRandom, 7));
        assert_ne!(one.r, make_perturbation(&c, Regime::GeneralRandom, 8).r);
        let ns = BigInt::from(3);
        let bound = Rational::new(BigInt::one(), Pow::pow(&ns, 7u32));
        assert!(one.r.iter().all(|r| *r < bound && r.is_positive()));
    }

    #[test]
    fn zero_oracle_stops_at_origin() {
        let state =
            ellipsoid_minimize::<f64>(|p| Ok(Cut { value: None, subgradient: vec![0.0; p.len()] }), 3, 4, 1e-3, 100)
                .unwrap();
        assert_eq!(state.iterations, 1);
        assert_eq!(state.stop, StopReason::ZeroSubgradient);
        assert_eq!(state.best_point(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn ellipsoid_finds_a_quadratic_minimum() {
        let target = [1.5, -2.0];
        let state = ellipsoid_minimize::<f64>(
            |p| {
                let value = p.iter().zip(&target).map(|(x, t)| (x - t) * (x - t)).sum();
                Ok(Cut { value: Some(value), subgradient: p.iter().zip(&target).map(|(x, t)| 2.0 * (x - t)).collect() })
            },
            2,
            4,
            1e-6,
            10_000,
        )
        .unwrap();
        assert_eq!(state.stop, StopReason::Volume);
        let best = state.best_point();
        assert!((best[0] - 1.5).abs() < 1e-3 && (best[1] + 2.0).abs() < 1e-3);
    }

    #[test]
    fn fixed_point_ellipsoid_matches_float() {
        let oracle = |p: &[Fixed<96>]| {
            let g = p.iter().map(|x| x.clone() - Fixed::from_int(1)).collect();
            Ok(Cut { value: None, subgradient: g })
        };
        let state = ellipsoid_minimize::<Fixed<96>>(oracle, 2, 2, 1e-6, 10_000);
        let state = state.unwrap();
        let c: Vec<f64> = state.center.iter().map(Field::to_f64).collect();
        assert!((c[0] - 1.0).abs() < 1e-4 && (c[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn instance_b_perturbed_minimum_is_near_an_integral_price() {
        let b = fixtures::instance_b();
        let mut counter = OracleCounter::default();
        let state = run_gs::<f64>(&b, 1.0 / 80.0, &mut counter).unwrap();
        let p = state.best_point();
        let rounded: Vec<f64> = p.iter().map(|x| x.round()).collect();
        assert!(p.iter().zip(&rounded).all(|(x, r)| (x - r).abs() < 0.5));
        assert!(rounded[0] <= 3.0 && rounded[1] <= 5.0);
    }

    #[test]
    fn rounding_examples() {
        let a = fixtures::instance_a();
        let point = vec![Rational::from_float(0.9993).unwrap(), Rational::from_float(1.0021).unwrap()];
        assert_eq!(round_prices(&point, &a, Regime::GsDeterministic).unwrap(), PriceVector::from_integers(&[1, 1]));
        let third = Rational::from_float(0.3338).unwrap();
        assert_eq!(round_to_denominator(&[third.clone(), third], &BigInt::from(3)).unwrap().as_slice()[0], ratio(1, 3));
        let exact = vec![ratio(2, 3), int(-4)];
        assert_eq!(round_prices(&exact, &a, Regime::GeneralRandom).unwrap().as_slice(), exact.as_slice());
        assert_eq!(round_prices(&[int(5)], &fixtures::instance_b(), Regime::GsDeterministic).unwrap().as_slice(), &[int(5)]);
        assert!(matches!(
            round_to_denominator(&[ratio(1, 4)], &BigInt::from(3)),
            Err(Error::AmbiguousRounding { coordinate: 0 })
        ));
    }

    #[test]
    fn continued_fractions_pick_the_closest_fraction() {
        let pi = Rational::new(BigInt::from(314159265), BigInt::from(100000000));
        assert_eq!(best_rational_approximation(&pi, &BigInt::from(7)), ratio(22, 7));
        assert_eq!(best_rational_approximation(&pi, &BigInt::from(120)), ratio(355, 113));
        assert_eq!(best_rational_approximation(&ratio(-7, 5), &BigInt::from(10)), ratio(-7, 5));
    }

    #[test]
    fn solver_examples() {
        for method in [Method::EllipsoidGs, Method::EllipsoidGsRegularized, Method::EllipsoidGeneral] {
            let report = solve_walrasian_prices(&fixtures::instance_a(), method, 1).unwrap();
            let cert = report.certificate().unwrap_or_else(|| panic!("{method} failed on instance A"));
            assert_eq!(cert.prices, PriceVector::from_integers(&[1, 1]), "{method}");
            let report = solve_walrasian_prices(&fixtures::instance_b(), method, 1).unwrap();
            let p = report.certificate().expect("instance B clears").prices.to_integers().unwrap();
            assert!(p[0] <= 3 && p[1] <= 5, "{method}: {p:?}");
        }
        let report = solve_walrasian_prices(&fixtures::complements_against_unit_demand(), Method::EllipsoidGeneral, 3)
            .unwrap();
        assert_eq!(report.outcome, Outcome::NoEquilibriumFound);
        assert_eq!(report.retries, DEFAULT_MAX_RETRIES);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("simplex".parse::<Method>().is_err());
    }
}
