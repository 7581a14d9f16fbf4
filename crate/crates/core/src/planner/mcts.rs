use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{guided_sample, sample_transition, ActionSet, DirectionGuide, MctsConfig, Task};
use crate::sim::{target_reached, Pose};

/// Progressive-widening test: a node with `visits` visits and `children`
/// children may add a child when `visits^exponent > children`. A node with
/// no children always widens.
pub fn widen(visits: u32, children: usize, exponent: f64) -> bool {
    children == 0 || (visits as f64).powf(exponent) > children as f64
}

/// Mean reward plus the UCT exploration bonus.
pub fn uct_value(reward_sum: f64, visits_sa: u32, visits_s: u32, c: f64) -> f64 {
    let n = visits_sa as f64;
    reward_sum / n + c * ((visits_s as f64).ln() / n).sqrt()
}

#[derive(Debug, Clone)]
struct DecisionNode {
    state: Pose,
    visits: u32,
    children: Vec<usize>,
    terminal: bool,
    depth: usize,
}

#[derive(Debug, Clone)]
struct StateChild {
    node: usize,
    reward: f64,
    count: u32,
}

#[derive(Debug, Clone)]
struct RandomNode {
    action: usize,
    visits: u32,
    reward_sum: f64,
    outcomes: Vec<StateChild>,
}

/// Statistics of one root action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootStat {
    /// Index into the [`ActionSet`].
    pub action: usize,
    pub visits: u32,
    pub reward_sum: f64,
}

impl RootStat {
    pub fn mean(&self) -> f64 {
        self.reward_sum / self.visits as f64
    }
}

/// One search tree of alternating decision (state) and random
/// (state-action) nodes.
#[derive(Debug, Clone)]
pub struct SearchTree {
    decisions: Vec<DecisionNode>,
    randoms: Vec<RandomNode>,
}

struct SearchCtx<'a> {
    actions: &'a ActionSet,
    task: &'a Task,
    cfg: &'a MctsConfig,
    guide: Option<DirectionGuide>,
}

impl SearchCtx<'_> {
    fn sample_action(&mut self, state: &Pose, rng: &mut ChaCha8Rng) -> usize {
        match self.guide.as_mut() {
            Some(guide) => {
                let desired = guide.direction(state.position());
                guided_sample(self.actions, state, desired, self.cfg.astar_samples, rng)
            }
            None => rng.random_range(0..self.actions.len()),
        }
    }
}

impl SearchTree {
    fn new(root: Pose) -> Self {
        Self {
            decisions: vec![DecisionNode {
                state: root,
                visits: 0,
                children: Vec::new(),
                terminal: false,
                depth: 0,
            }],
            randoms: Vec::new(),
        }
    }

    pub fn root_stats(&self) -> Vec<RootStat> {
        self.decisions[0]
            .children
            .iter()
            .map(|&r| {
                let rn = &self.randoms[r];
                RootStat {
                    action: rn.action,
                    visits: rn.visits,
                    reward_sum: rn.reward_sum,
                }
            })
            .collect()
    }

    pub fn root_visits(&self) -> u32 {
        self.decisions[0].visits
    }

    pub fn decision_count(&self) -> usize {
        self.decisions.len()
    }

    /// Checks visit-count conservation and the widening schedules:
    /// `n(s) = Σ n(s,a)`, `n(s,a) = Σ n(s,a,s')`, at most `⌈n^α⌉ + 1` actions
    /// per decision node and `⌈n^β⌉ + 1` states per random node.
    pub fn check_invariants(&self, cfg: &MctsConfig) -> Result<(), String> {
        for (i, d) in self.decisions.iter().enumerate() {
            let sum: u32 = d.children.iter().map(|&r| self.randoms[r].visits).sum();
            if sum != d.visits {
                return Err(format!("decision {i}: n(s)={} but children sum to {sum}", d.visits));
            }
            let cap = (d.visits as f64).powf(cfg.alpha).ceil() as usize + 1;
            if d.children.len() > cap {
                return Err(format!("decision {i}: {} children after {} visits", d.children.len(), d.visits));
            }
        }
        for (i, r) in self.randoms.iter().enumerate() {
            let sum: u32 = r.outcomes.iter().map(|c| c.count).sum();
            if sum != r.visits {
                return Err(format!("random {i}: n(s,a)={} but states sum to {sum}", r.visits));
            }
            let cap = (r.visits as f64).powf(cfg.beta).ceil() as usize + 1;
            if r.outcomes.len() > cap {
                return Err(format!("random {i}: {} states after {} visits", r.outcomes.len(), r.visits));
            }
        }
        Ok(())
    }

    /// Chooses a random-node child of `node` by progressive widening + UCT.
    fn select(&mut self, node: usize, ctx: &mut SearchCtx, rng: &mut ChaCha8Rng) -> usize {
        let d = &self.decisions[node];
        if widen(d.visits, d.children.len(), ctx.cfg.alpha) {
            let state = d.state;
            let action = ctx.sample_action(&state, rng);
            if let Some(&existing) = d.children.iter().find(|&&r| self.randoms[r].action == action) {
                return existing;
            }
            let idx = self.randoms.len();
            self.randoms.push(RandomNode {
                action,
                visits: 0,
                reward_sum: 0.0,
                outcomes: Vec::new(),
            });
            self.decisions[node].children.push(idx);
            return idx;
        }
        let mut best = d.children[0];
        let mut best_q = f64::NEG_INFINITY;
        for &r in &d.children {
            let rn = &self.randoms[r];
            let q = uct_value(rn.reward_sum, rn.visits, d.visits, ctx.cfg.c);
            if q > best_q {
                best_q = q;
                best = r;
            }
        }
        best
    }

    /// Double progressive widening: returns the outcome slot taken and
    /// whether it is a freshly drawn state.
    fn expand(&mut self, parent: usize, rnode: usize, ctx: &SearchCtx, rng: &mut ChaCha8Rng) -> (usize, bool) {
        let rn = &self.randoms[rnode];
        if widen(rn.visits, rn.outcomes.len(), ctx.cfg.beta) {
            let from = self.decisions[parent].state;
            let next = sample_transition(ctx.actions.prediction(rn.action), &from, rng, ctx.cfg.stochastic);
            let (reward, terminal) = ctx.task.transition(&from, &next);
            let node = self.decisions.len();
            self.decisions.push(DecisionNode {
                state: next,
                visits: 0,
                children: Vec::new(),
                terminal,
                depth: self.decisions[parent].depth + 1,
            });
            let rn = &mut self.randoms[rnode];
            rn.outcomes.push(StateChild { node, reward, count: 0 });
            return (rn.outcomes.len() - 1, true);
        }
        let total: u32 = rn.outcomes.iter().map(|c| c.count).sum();
        let mut pick = rng.random_range(0..total);
        for (slot, c) in rn.outcomes.iter().enumerate() {
            if pick < c.count {
                return (slot, false);
            }
            pick -= c.count;
        }
        unreachable!("outcome counts sum to n(s,a)")
    }

    fn iterate(&mut self, ctx: &mut SearchCtx, rng: &mut ChaCha8Rng) {
        // (parent decision, random node, outcome slot)
        let mut path: Vec<(usize, usize, usize)> = Vec::with_capacity(ctx.cfg.rollout_horizon);
        let mut node = 0;
        loop {
            let rnode = self.select(node, ctx, rng);
            let (slot, fresh) = self.expand(node, rnode, ctx, rng);
            path.push((node, rnode, slot));
            node = self.randoms[rnode].outcomes[slot].node;
            let d = &self.decisions[node];
            if fresh || d.visits == 0 || d.terminal || d.depth >= ctx.cfg.rollout_horizon {
                break;
            }
        }
        let leaf = &self.decisions[node];
        let mut ret = if leaf.terminal || leaf.depth >= ctx.cfg.rollout_horizon {
            0.0
        } else {
            rollout_cached(&leaf.state, ctx.actions, ctx.task, ctx.cfg, rng)
        };
        for &(parent, rnode, slot) in path.iter().rev() {
            let rn = &mut self.randoms[rnode];
            let child = &mut rn.outcomes[slot];
            child.count += 1;
            ret = child.reward + ctx.cfg.gamma * ret;
            rn.visits += 1;
            rn.reward_sum += ret;
            self.decisions[parent].visits += 1;
        }
    }
}

fn rollout_cached<R: Rng + ?Sized>(start: &Pose, actions: &ActionSet, task: &Task, cfg: &MctsConfig, rng: &mut R) -> f64 {
    let mut state = *start;
    let mut total = 0.0;
    let mut discount = 1.0;
    for _ in 0..cfg.rollout_horizon {
        let a = rng.random_range(0..actions.len());
        let next = sample_transition(actions.prediction(a), &state, rng, cfg.stochastic);
        let (r, terminal) = task.transition(&state, &next);
        total += discount * r;
        if terminal {
            break;
        }
        discount *= cfg.gamma;
        state = next;
    }
    total
}

/// Discounted return of a uniformly random action sequence from `state`.
/// A state already at the goal yields 0.
pub fn rollout<R: Rng + ?Sized>(state: &Pose, actions: &ActionSet, task: &Task, cfg: &MctsConfig, rng: &mut R) -> f64 {
    if target_reached(state, task.goal) {
        return 0.0;
    }
    rollout_cached(state, actions, task, cfg, rng)
}

/// Grows a single tree for `cfg.iterations_per_tree` iterations.
pub fn build_tree(root: Pose, actions: &ActionSet, task: &Task, cfg: &MctsConfig, seed: u64, stream: u64) -> SearchTree {
    assert!(!actions.is_empty(), "cannot plan with an empty action set");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut ctx = SearchCtx {
        actions,
        task,
        cfg,
        guide: cfg.guided.then(|| DirectionGuide::new(&task.arena, task.goal, cfg.astar_cell)),
    };
    let mut tree = SearchTree::new(root);
    for _ in 0..cfg.iterations_per_tree {
        tree.iterate(&mut ctx, &mut rng);
    }
    tree
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    /// Index into the [`ActionSet`] of the chosen action.
    pub action: usize,
    /// Root statistics summed over all trees, ordered by action index.
    pub merged: Vec<RootStat>,
}

impl SearchResult {
    pub fn best(&self) -> &RootStat {
        self.merged.iter().find(|s| s.action == self.action).expect("chosen action has stats")
    }
}

/// Root-parallel search: `cfg.trees` independent trees on RNG streams
/// `0..trees` of `seed`, merged by summing root statistics. Returns the
/// action with the highest merged mean return.
pub fn mcts_search(root: Pose, actions: &ActionSet, task: &Task, cfg: &MctsConfig, seed: u64) -> SearchResult {
    let per_tree: Vec<Vec<RootStat>> = (0..cfg.trees as u64)
        .into_par_iter()
        .map(|t| build_tree(root, actions, task, cfg, seed, t).root_stats())
        .collect();
    let mut merged: BTreeMap<usize, RootStat> = BTreeMap::new();
    for stats in &per_tree {
        for s in stats {
            let e = merged.entry(s.action).or_insert(RootStat {
                action: s.action,
                visits: 0,
                reward_sum: 0.0,
            });
            e.visits += s.visits;
            e.reward_sum += s.reward_sum;
        }
    }
    let merged: Vec<RootStat> = merged.into_values().collect();
    let mut best = merged[0];
    for s in &merged[1..] {
        if s.mean() > best.mean() {
            best = *s;
        }
    }
    SearchResult {
        action: best.action,
        merged,
    }
}
