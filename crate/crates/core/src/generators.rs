//! Seeded instance generators.
//!
//! All randomness comes from [`SplitMix64`], so a `(parameters, seed)` pair
//! determines the generated MDP bit for bit on every platform.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, Mdp, Policy};

/// SplitMix64 (Steele, Lea & Flood). Small, fast, and fully specified.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `0..n`; `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "empty range");
        // Multiply-shift; the bias is below 2^-64 * n and irrelevant here.
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// A generated MDP together with a known gain-optimal reference policy when
/// the construction provides one.
#[derive(Clone, Debug)]
pub struct Instance {
    pub mdp: Mdp<f64>,
    pub reference: Option<Policy<f64>>,
}

fn unit(n: usize, j: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[j] = 1.0;
    v
}

fn act(probs: Vec<f64>, reward: f64) -> Action<f64> {
    Action { probs, reward }
}

/// The four-state instance: three absorbing states with self-loop rewards
/// `1`, `1 - eps`, `0`, and a branching state 3 whose actions move to states
/// 0, 1, 2 with rewards `0`, `1`, `0`. The reference policy sends state 3 to
/// state 0.
pub fn four_state(eps: f64) -> Result<Instance> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::EpsOutOfRange(eps));
    }
    let n = 4;
    let actions = vec![
        vec![act(unit(n, 0), 1.0)],
        vec![act(unit(n, 1), 1.0 - eps)],
        vec![act(unit(n, 2), 0.0)],
        vec![act(unit(n, 0), 0.0), act(unit(n, 1), 1.0), act(unit(n, 2), 0.0)],
    ];
    Ok(Instance {
        mdp: Mdp::new(Some(format!("four-state(eps={eps})")), actions)?,
        reference: Some(Policy::Deterministic(vec![0; 4])),
    })
}

/// `M(k, T)` with gap parameter `eps`.
///
/// State 0 is absorbing. States `1..=k` have a "good" action 0 that moves
/// along the cycle `1 -> 2 -> ... -> k -> 1` with reward 0 or 0.5 (fair coin),
/// and a "bad" action 1 with reward 1 that jumps to state 0 with probability
/// `1/T` and otherwise stays put. State 0 pays the cycle's average reward
/// minus `eps`.
///
/// When the drawn cycle average is below `eps`, every good reward is raised
/// by `lift = eps - mean` so that state 0's reward is exactly zero instead of
/// negative; the cycle gain becomes `mean + lift` and the gap stays `eps`.
pub fn mkt(k: usize, t: f64, eps: f64, seed: u64) -> Result<Instance> {
    if k == 0 {
        return Err(Error::InvalidGenerator("k must be at least 1".into()));
    }
    if !(t >= 1.0) || !t.is_finite() {
        return Err(Error::InvalidGenerator(format!("T must be >= 1, got {t}")));
    }
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::EpsOutOfRange(eps));
    }
    let mut rng = SplitMix64::new(seed);
    let draws: Vec<f64> = (0..k).map(|_| if rng.bernoulli(0.5) { 0.5 } else { 0.0 }).collect();
    let mean = draws.iter().sum::<f64>() / k as f64;
    let lift = (eps - mean).max(0.0);
    if lift > 0.5 {
        return Err(Error::EpsOutOfRange(eps));
    }
    let n = k + 1;
    let cycle_gain = mean + lift;
    let mut actions = Vec::with_capacity(n);
    actions.push(vec![act(unit(n, 0), (cycle_gain - eps).max(0.0))]);
    let stay = 1.0 - 1.0 / t;
    for s in 1..=k {
        let next = if s == k { 1 } else { s + 1 };
        let mut bad = vec![0.0; n];
        bad[0] = 1.0 / t;
        bad[s] += stay;
        actions.push(vec![act(unit(n, next), draws[s - 1] + lift), act(bad, 1.0)]);
    }
    Ok(Instance {
        mdp: Mdp::new(Some(format!("M(k={k},T={t},eps={eps},seed={seed})")), actions)?,
        reference: Some(Policy::Deterministic(vec![0; n])),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MultichainParams {
    pub n_components: usize,
    pub states_per: usize,
    pub actions_per: usize,
    pub transient_states: usize,
    /// Mass each transient action keeps inside the transient layer.
    pub leak_prob: f64,
}

impl Default for MultichainParams {
    fn default() -> Self {
        Self { n_components: 2, states_per: 2, actions_per: 2, transient_states: 2, leak_prob: 0.3 }
    }
}

/// Spreads `mass` over a random nonempty subset of `targets`.
fn scatter(rng: &mut SplitMix64, row: &mut [f64], targets: &[usize], mass: f64) {
    if mass <= 0.0 {
        return;
    }
    let picks = 1 + rng.below(targets.len());
    let chosen: Vec<usize> = (0..picks).map(|_| targets[rng.below(targets.len())]).collect();
    let weights: Vec<f64> = chosen.iter().map(|_| 0.05 + rng.next_f64()).collect();
    let total: f64 = weights.iter().sum();
    for (&j, w) in chosen.iter().zip(weights) {
        row[j] += mass * w / total;
    }
}

/// Closed irreducible blocks followed by a transient layer.
///
/// Every block action contains the edge to the next state of its block's
/// cycle, so each block is irreducible under every policy. Each transient
/// action sends `1 - leak_prob` of its mass into one randomly chosen block
/// and `leak_prob` back into the transient layer, so the layer is transient
/// under every policy.
pub fn random_multichain(params: &MultichainParams, seed: u64) -> Result<Instance> {
    let MultichainParams { n_components, states_per, actions_per, transient_states, leak_prob } = *params;
    if n_components == 0 || states_per == 0 || actions_per == 0 {
        return Err(Error::InvalidGenerator("component, state and action counts must be positive".into()));
    }
    if !(0.0..1.0).contains(&leak_prob) {
        return Err(Error::InvalidGenerator(format!("leak_prob must lie in [0, 1), got {leak_prob}")));
    }
    let mut rng = SplitMix64::new(seed);
    let n_rec = n_components * states_per;
    let n = n_rec + transient_states;
    let mut actions = Vec::with_capacity(n);
    for c in 0..n_components {
        let block: Vec<usize> = (c * states_per..(c + 1) * states_per).collect();
        for i in 0..states_per {
            let next = block[(i + 1) % states_per];
            let acts = (0..actions_per)
                .map(|_| {
                    let mut row = vec![0.0; n];
                    let keep = 0.2 + 0.6 * rng.next_f64();
                    row[next] += keep;
                    scatter(&mut rng, &mut row, &block, 1.0 - keep);
                    act(row, rng.next_f64())
                })
                .collect();
            actions.push(acts);
        }
    }
    let layer: Vec<usize> = (n_rec..n).collect();
    for _ in 0..transient_states {
        let acts = (0..actions_per)
            .map(|_| {
                let mut row = vec![0.0; n];
                let c = rng.below(n_components);
                let block: Vec<usize> = (c * states_per..(c + 1) * states_per).collect();
                scatter(&mut rng, &mut row, &block, 1.0 - leak_prob);
                scatter(&mut rng, &mut row, &layer, leak_prob);
                act(row, rng.next_f64())
            })
            .collect();
        actions.push(acts);
    }
    Ok(Instance {
        mdp: Mdp::new(
            Some(format!(
                "random-multichain(c={n_components},s={states_per},a={actions_per},t={transient_states},leak={leak_prob},seed={seed})"
            )),
            actions,
        )?,
        reference: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomDenseParams {
    pub n_states: usize,
    /// Each state draws its action count uniformly from `1..=max_actions`.
    pub max_actions: usize,
    /// Probability that an entry belongs to a row's support.
    pub density: f64,
}

impl Default for RandomDenseParams {
    fn default() -> Self {
        Self { n_states: 5, max_actions: 3, density: 0.4 }
    }
}

/// Unstructured random MDP with sparse random supports and uniform rewards.
pub fn random_dense(params: &RandomDenseParams, seed: u64) -> Result<Mdp<f64>> {
    let RandomDenseParams { n_states: n, max_actions, density } = *params;
    if n == 0 || max_actions == 0 {
        return Err(Error::InvalidGenerator("n_states and max_actions must be positive".into()));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidGenerator(format!("density must lie in (0, 1], got {density}")));
    }
    let mut rng = SplitMix64::new(seed);
    let actions = (0..n)
        .map(|_| {
            let m = 1 + rng.below(max_actions);
            (0..m)
                .map(|_| {
                    let mut row: Vec<f64> =
                        (0..n).map(|_| if rng.bernoulli(density) { 0.05 + rng.next_f64() } else { 0.0 }).collect();
                    if row.iter().all(|&p| p == 0.0) {
                        row[rng.below(n)] = 1.0;
                    }
                    let total: f64 = row.iter().sum();
                    row.iter_mut().for_each(|p| *p /= total);
                    act(row, rng.next_f64())
                })
                .collect()
        })
        .collect();
    Mdp::new(Some(format!("random-dense(n={n},a={max_actions},d={density},seed={seed})")), actions)
}

/// Uniformly random deterministic policy, or a randomized one with random
/// weights (some of them zero).
pub fn random_policy(mdp: &Mdp<f64>, randomized: bool, rng: &mut SplitMix64) -> Policy<f64> {
    if !randomized {
        return Policy::Deterministic((0..mdp.n_states()).map(|s| rng.below(mdp.num_actions(s))).collect());
    }
    Policy::Randomized(
        (0..mdp.n_states())
            .map(|s| {
                let m = mdp.num_actions(s);
                let mut w: Vec<f64> = (0..m).map(|_| if rng.bernoulli(0.25) { 0.0 } else { rng.next_f64() }).collect();
                if w.iter().all(|&x| x == 0.0) {
                    w[rng.below(m)] = 1.0;
                }
                let total: f64 = w.iter().sum();
                w.iter_mut().for_each(|x| *x /= total);
                w
            })
            .collect(),
    )
}

/// Random vector with entries uniform in `[lo, hi)`.
pub fn random_vector(n: usize, lo: f64, hi: f64, rng: &mut SplitMix64) -> Vec<f64> {
    (0..n).map(|_| rng.uniform(lo, hi)).collect()
}
