//! Economy state and the taxed two-step trade.
//!
//! A trade picks two agents, splits their pooled wealth at a random fraction
//! after removing a tax share `f`, and hands the collected tax in equal parts
//! to a set of beneficiaries chosen on the post-tax wealth vector.

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::rng::{rng_from_seed, SimRng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("n_agents must be at least 2, got {0}")]
    TooFewAgents(usize),
    #[error("total_wealth must be positive and finite, got {0}")]
    NonPositiveWealth(f64),
    #[error("tax_rate must lie in [0, 1], got {0}")]
    TaxRateOutOfRange(f64),
    #[error("poorest_fraction must lie in (0, 1], got {0}")]
    PoorestFractionOutOfRange(f64),
    #[error("initial wealth vector has {got} entries, expected {expected}")]
    WrongLength { expected: usize, got: usize },
    #[error("initial wealth of agent {index} is {value}, must be finite and non-negative")]
    NegativeWealth { index: usize, value: f64 },
    #[error("initial wealth sums to {sum}, expected total_wealth {expected}")]
    TotalMismatch { expected: f64, sum: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExchangeError {
    #[error("trader wealth must be finite and non-negative, got ({0}, {1})")]
    NegativeWealth(f64, f64),
    #[error("split fraction must lie in [0, 1], got {0}")]
    EpsilonOutOfRange(f64),
    #[error("tax rate must lie in [0, 1], got {0}")]
    TaxRateOutOfRange(f64),
    #[error("beneficiary set is empty")]
    EmptyBeneficiaries,
    #[error("beneficiary index {index} out of range for {n_agents} agents")]
    BeneficiaryOutOfRange { index: usize, n_agents: usize },
    #[error("tax pool must be finite and non-negative, got {0}")]
    NegativePool(f64),
}

/// Who receives the tax collected in a trade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RedistributionPolicy {
    /// Every agent gets `pool / N`.
    UniformAll,
    /// The `max(1, floor(q N))` poorest agents share the pool.
    PoorestFraction(f64),
}

impl RedistributionPolicy {
    /// Number of beneficiaries `|S|` in an economy of `n_agents`.
    pub fn beneficiary_count(&self, n_agents: usize) -> usize {
        match *self {
            RedistributionPolicy::UniformAll => n_agents,
            RedistributionPolicy::PoorestFraction(q) => {
                let k = (q * n_agents as f64).floor() as usize;
                k.clamp(1, n_agents)
            }
        }
    }

    fn validate(&self) -> Result<(), ParamError> {
        match *self {
            RedistributionPolicy::UniformAll => Ok(()),
            RedistributionPolicy::PoorestFraction(q) => {
                if q > 0.0 && q <= 1.0 {
                    Ok(())
                } else {
                    Err(ParamError::PoorestFractionOutOfRange(q))
                }
            }
        }
    }
}

impl fmt::Display for RedistributionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RedistributionPolicy::UniformAll => write!(f, "uniform_all"),
            RedistributionPolicy::PoorestFraction(q) => write!(f, "poorest({q})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub n_agents: usize,
    pub total_wealth: f64,
    pub tax_rate: f64,
    pub policy: RedistributionPolicy,
}

impl ModelParams {
    pub fn new(
        n_agents: usize,
        total_wealth: f64,
        tax_rate: f64,
        policy: RedistributionPolicy,
    ) -> Result<Self, ParamError> {
        let params = Self {
            n_agents,
            total_wealth,
            tax_rate,
            policy,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if self.n_agents < 2 {
            return Err(ParamError::TooFewAgents(self.n_agents));
        }
        if !(self.total_wealth.is_finite() && self.total_wealth > 0.0) {
            return Err(ParamError::NonPositiveWealth(self.total_wealth));
        }
        if !(0.0..=1.0).contains(&self.tax_rate) {
            return Err(ParamError::TaxRateOutOfRange(self.tax_rate));
        }
        self.policy.validate()
    }

    /// Average wealth `W / N`.
    pub fn mean_wealth(&self) -> f64 {
        self.total_wealth / self.n_agents as f64
    }

    pub fn with_tax_rate(self, tax_rate: f64) -> Self {
        Self { tax_rate, ..self }
    }
}

/// Post-exchange wealth of the two traders and the tax they paid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exchanged {
    pub w_i: f64,
    pub w_j: f64,
    pub pool: f64,
}

/// Taxed split of the pair's wealth, checked version.
pub fn exchange(w_i: f64, w_j: f64, epsilon: f64, tax_rate: f64) -> Result<Exchanged, ExchangeError> {
    if !(w_i.is_finite() && w_j.is_finite() && w_i >= 0.0 && w_j >= 0.0) {
        return Err(ExchangeError::NegativeWealth(w_i, w_j));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(ExchangeError::EpsilonOutOfRange(epsilon));
    }
    if !(0.0..=1.0).contains(&tax_rate) {
        return Err(ExchangeError::TaxRateOutOfRange(tax_rate));
    }
    Ok(split(w_i, w_j, epsilon, tax_rate))
}

// The engine and every reference implementation must evaluate these
// expressions in exactly this order to stay bit-identical.
#[inline(always)]
fn split(w_i: f64, w_j: f64, epsilon: f64, tax_rate: f64) -> Exchanged {
    let total = w_i + w_j;
    Exchanged {
        w_i: (1.0 - tax_rate) * epsilon * total,
        w_j: (1.0 - tax_rate) * (1.0 - epsilon) * total,
        pool: tax_rate * total,
    }
}

/// Exact selection of the beneficiary set on a wealth vector.
///
/// Returns ascending agent indices. For `PoorestFraction` these are the
/// `|S|` smallest entries, ties broken toward the lower index. Runs one
/// partial selection, O(N).
pub fn select_beneficiaries(wealth: &[f64], policy: RedistributionPolicy) -> Vec<usize> {
    let n = wealth.len();
    let k = policy.beneficiary_count(n);
    let mut idx: Vec<usize> = (0..n).collect();
    if k < n {
        idx.select_nth_unstable_by(k - 1, |&a, &b| {
            wealth[a].total_cmp(&wealth[b]).then(a.cmp(&b))
        });
        idx.truncate(k);
    }
    idx.sort_unstable();
    idx
}

/// Adds `pool / |S|` to every beneficiary.
pub fn redistribute(wealth: &mut [f64], pool: f64, beneficiaries: &[usize]) -> Result<(), ExchangeError> {
    if beneficiaries.is_empty() {
        return Err(ExchangeError::EmptyBeneficiaries);
    }
    if !(pool.is_finite() && pool >= 0.0) {
        return Err(ExchangeError::NegativePool(pool));
    }
    if let Some(&index) = beneficiaries.iter().find(|&&r| r >= wealth.len()) {
        return Err(ExchangeError::BeneficiaryOutOfRange {
            index,
            n_agents: wealth.len(),
        });
    }
    let share = pool / beneficiaries.len() as f64;
    for &r in beneficiaries {
        wealth[r] += share;
    }
    Ok(())
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// Record of one completed trade.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeOutcome {
    pub i: usize,
    pub j: usize,
    pub epsilon: f64,
    pub pool: f64,
    /// Ascending indices of the agents that received a share of `pool`.
    pub beneficiaries: Vec<usize>,
}

/// Non-negative doubles order the same way as their bit patterns.
#[inline(always)]
fn order_key(w: f64) -> u64 {
    (w + 0.0).to_bits()
}

/// Position of an agent in the `(wealth, index)` order.
type Rank = (u64, u32);

#[inline(always)]
fn rank(wealth: &[f64], agent: u32) -> Rank {
    (order_key(wealth[agent as usize]), agent)
}

/// Binary heap of agents with a position index, ordered by rank.
///
/// `MAX` selects a max-heap. Keys are read from the wealth vector, so the
/// caller fixes the heap whenever it changes an entry's wealth.
#[derive(Debug, Clone)]
struct RankHeap<const MAX: bool> {
    items: Vec<u32>,
}

impl<const MAX: bool> RankHeap<MAX> {
    /// True if `a` belongs above `b`.
    #[inline(always)]
    fn above(wealth: &[f64], a: u32, b: u32) -> bool {
        let (ra, rb) = (rank(wealth, a), rank(wealth, b));
        if MAX {
            ra > rb
        } else {
            ra < rb
        }
    }

    fn build(items: Vec<u32>, wealth: &[f64], slot: &mut [u32]) -> Self {
        let mut heap = Self { items };
        heap.heapify(wealth, slot);
        heap
    }

    fn heapify(&mut self, wealth: &[f64], slot: &mut [u32]) {
        for (p, &a) in self.items.iter().enumerate() {
            slot[a as usize] = p as u32;
        }
        for p in (0..self.items.len() / 2).rev() {
            self.sift_down(p, wealth, slot);
        }
    }

    #[inline(always)]
    fn top(&self) -> u32 {
        self.items[0]
    }

    #[inline(always)]
    fn place(&mut self, p: usize, a: u32, slot: &mut [u32]) {
        self.items[p] = a;
        slot[a as usize] = p as u32;
    }

    fn sift_up(&mut self, mut p: usize, wealth: &[f64], slot: &mut [u32]) -> usize {
        let a = self.items[p];
        while p > 0 {
            let parent = (p - 1) / 2;
            let b = self.items[parent];
            if !Self::above(wealth, a, b) {
                break;
            }
            self.place(p, b, slot);
            p = parent;
        }
        self.place(p, a, slot);
        p
    }

    fn sift_down(&mut self, mut p: usize, wealth: &[f64], slot: &mut [u32]) {
        let a = self.items[p];
        let n = self.items.len();
        loop {
            let mut child = 2 * p + 1;
            if child >= n {
                break;
            }
            if child + 1 < n && Self::above(wealth, self.items[child + 1], self.items[child]) {
                child += 1;
            }
            let b = self.items[child];
            if !Self::above(wealth, b, a) {
                break;
            }
            self.place(p, b, slot);
            p = child;
        }
        self.place(p, a, slot);
    }

    /// Restores heap order after the key at `p` changed.
    #[inline]
    fn fix(&mut self, p: usize, wealth: &[f64], slot: &mut [u32]) {
        if self.sift_up(p, wealth, slot) == p {
            self.sift_down(p, wealth, slot);
        }
    }

    /// Puts `a` at the top in place of the current top and re-sorts.
    fn replace_top(&mut self, a: u32, wealth: &[f64], slot: &mut [u32]) {
        self.place(0, a, slot);
        self.sift_down(0, wealth, slot);
    }
}

/// Incrementally maintained set of the `k` poorest agents under the
/// `(wealth, index)` order.
///
/// Members live in a max-heap and outsiders in a min-heap, so the richest
/// member and the poorest outsider are both at hand. After an exchange
/// only the two traders change heap position, and a few boundary swaps
/// restore the selection, which always agrees with `select_beneficiaries`.
/// Members all receive the same share each trade. That preserves their
/// order except where rounding turns a strict inequality into a tie, which
/// is detected and repaired.
#[derive(Debug, Clone)]
struct PoorestSet {
    k: usize,
    members: RankHeap<true>,
    rest: RankHeap<false>,
    is_member: Vec<bool>,
    slot: Vec<u32>,
}

impl PoorestSet {
    fn new(wealth: &[f64], k: usize) -> Self {
        let n = wealth.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.sort_unstable_by_key(|&a| rank(wealth, a));
        let rest = order.split_off(k);
        let mut is_member = vec![false; n];
        for &m in &order {
            is_member[m as usize] = true;
        }
        let mut slot = vec![0; n];
        Self {
            k,
            members: RankHeap::build(order, wealth, &mut slot),
            rest: RankHeap::build(rest, wealth, &mut slot),
            is_member,
            slot,
        }
    }

    fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.items.iter().map(|&m| m as usize)
    }

    /// Writes a trader's new wealth and restores its heap.
    #[inline]
    fn move_trader(&mut self, wealth: &mut [f64], agent: usize, new_wealth: f64) {
        wealth[agent] = new_wealth;
        let p = self.slot[agent] as usize;
        if self.is_member[agent] {
            self.members.fix(p, wealth, &mut self.slot);
        } else {
            self.rest.fix(p, wealth, &mut self.slot);
        }
    }

    /// Swaps the richest member with the poorest outsider until every
    /// member ranks below every outsider.
    fn rebalance(&mut self, wealth: &[f64]) {
        loop {
            let top = self.members.top();
            let low = self.rest.top();
            if rank(wealth, top) < rank(wealth, low) {
                break;
            }
            self.members.replace_top(low, wealth, &mut self.slot);
            self.rest.replace_top(top, wealth, &mut self.slot);
            self.is_member[low as usize] = true;
            self.is_member[top as usize] = false;
        }
    }

    /// Adds `share` to every member.
    fn pay(&mut self, wealth: &mut [f64], share: f64) {
        let items = &self.members.items;
        let mut broken = false;
        for p in 0..items.len() {
            let a = items[p] as usize;
            wealth[a] += share;
            // parents precede children, so the parent is already paid
            if p > 0 {
                // a paid child can only tie its parent, never pass it
                let parent = items[(p - 1) / 2] as usize;
                broken |= wealth[a] >= wealth[parent] && a > parent;
            }
        }
        if broken {
            self.members.heapify(wealth, &mut self.slot);
        }
    }
}

/// Wealth vector, trade clock, and random stream of one economy.
///
/// Not meant for concurrent mutation; move it between threads freely.
#[derive(Debug, Clone)]
pub struct EconomyState {
    params: ModelParams,
    wealth: Vec<f64>,
    time: u64,
    rng: SimRng,
    poorest: Option<PoorestSet>,
}

impl EconomyState {
    /// Equal shares `W / N` for every agent, clock at zero.
    pub fn new(params: ModelParams, seed: u64) -> Result<Self, ParamError> {
        Self::with_rng(params, rng_from_seed(seed))
    }

    pub fn with_rng(params: ModelParams, rng: SimRng) -> Result<Self, ParamError> {
        params.validate()?;
        let wealth = vec![params.mean_wealth(); params.n_agents];
        Ok(Self::assemble(params, wealth, rng))
    }

    /// Starts from an explicit wealth vector, which must sum to `total_wealth`.
    pub fn with_wealth(params: ModelParams, wealth: Vec<f64>, rng: SimRng) -> Result<Self, ParamError> {
        params.validate()?;
        if wealth.len() != params.n_agents {
            return Err(ParamError::WrongLength {
                expected: params.n_agents,
                got: wealth.len(),
            });
        }
        if let Some((index, &value)) = wealth
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(ParamError::NegativeWealth { index, value });
        }
        let sum = compensated_sum(&wealth);
        if (sum - params.total_wealth).abs() > 1e-9 * params.total_wealth {
            return Err(ParamError::TotalMismatch {
                expected: params.total_wealth,
                sum,
            });
        }
        Ok(Self::assemble(params, wealth, rng))
    }

    fn assemble(params: ModelParams, wealth: Vec<f64>, rng: SimRng) -> Self {
        let poorest = match params.policy {
            RedistributionPolicy::UniformAll => None,
            policy => {
                let k = policy.beneficiary_count(params.n_agents);
                (k < params.n_agents).then(|| PoorestSet::new(&wealth, k))
            }
        };
        Self {
            params,
            wealth,
            time: 0,
            rng,
            poorest,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn wealth(&self) -> &[f64] {
        &self.wealth
    }

    /// Number of completed trades.
    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn total_wealth(&self) -> f64 {
        compensated_sum(&self.wealth)
    }

    /// `|sum(w) - W| / W`.
    pub fn relative_drift(&self) -> f64 {
        (self.total_wealth() - self.params.total_wealth).abs() / self.params.total_wealth
    }

    /// Uniform unordered pair: `i` over all agents, `j` over the other N-1.
    pub fn sample_pair(&mut self) -> (usize, usize) {
        let n = self.params.n_agents;
        let i = self.rng.random_range(0..n);
        let mut j = self.rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        (i, j)
    }

    #[inline]
    fn advance(&mut self) -> (usize, usize, f64, f64) {
        let (i, j) = self.sample_pair();
        let epsilon: f64 = self.rng.random();
        let ex = split(self.wealth[i], self.wealth[j], epsilon, self.params.tax_rate);
        match &mut self.poorest {
            None => {
                self.wealth[i] = ex.w_i;
                self.wealth[j] = ex.w_j;
                if ex.pool != 0.0 {
                    let share = ex.pool / self.params.n_agents as f64;
                    for w in self.wealth.iter_mut() {
                        *w += share;
                    }
                }
            }
            Some(set) => {
                set.move_trader(&mut self.wealth, i, ex.w_i);
                set.move_trader(&mut self.wealth, j, ex.w_j);
                set.rebalance(&self.wealth);
                if ex.pool != 0.0 {
                    set.pay(&mut self.wealth, ex.pool / set.k as f64);
                }
            }
        }
        self.time += 1;
        (i, j, epsilon, ex.pool)
    }

    /// One full trade: exchange at t+1/2, then redistribution at t+1.
    pub fn trade_step(&mut self) -> TradeOutcome {
        let (i, j, epsilon, pool) = self.advance();
        let beneficiaries = match &self.poorest {
            None => (0..self.params.n_agents).collect(),
            Some(set) => {
                let mut s: Vec<usize> = set.members().collect();
                s.sort_unstable();
                s
            }
        };
        TradeOutcome {
            i,
            j,
            epsilon,
            pool,
            beneficiaries,
        }
    }

    pub fn run_trades(&mut self, n_trades: u64) {
        for _ in 0..n_trades {
            self.advance();
        }
    }

    /// `n_sweeps * N` trades.
    pub fn run_sweeps(&mut self, n_sweeps: u64) {
        self.run_trades(n_sweeps * self.params.n_agents as u64);
    }
}
