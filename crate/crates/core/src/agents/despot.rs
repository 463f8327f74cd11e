use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::pomcp::SearchOutcome;
use super::pomdp::{PAction, PState, PackingPomdp};
use super::{AgentError, SearchParams};

/// Scenarios (index, next state) grouped by observation.
type ObsGroup = (Option<usize>, Vec<(usize, PState)>);

/// Root gap below which the anytime loop stops.
pub const GAP_TOLERANCE: f64 = 1e-6;
/// Fraction of the root gap a node must exceed to be worth exploring.
const XI: f64 = 0.95;

struct DNode {
    /// (scenario index, state)
    scenarios: Vec<(usize, PState)>,
    depth: usize,
    default_lower: f64,
    lower: f64,
    upper: f64,
    default_action: Option<PAction>,
    branches: Vec<Branch>,
    expanded: bool,
}

struct Branch {
    action: PAction,
    reward: f64,
    next: Vec<(Option<usize>, usize)>,
}

struct Search<'a> {
    model: &'a PackingPomdp,
    params: &'a SearchParams,
    streams: Vec<ChaCha8Rng>,
    weight: f64,
    nodes: Vec<DNode>,
    steps: u64,
}

impl Search<'_> {
    /// Default-policy rollout for one scenario; also reports its first action.
    fn rollout(&mut self, scenario: usize, s: &PState, depth: usize) -> (f64, Option<PAction>) {
        let mut state = s.clone();
        let mut ret = 0.0;
        let mut g = 1.0;
        let mut first = None;
        for _ in 0..depth {
            if self.model.is_terminal(&state) {
                break;
            }
            let acts = self.model.preferred_actions(&state);
            if acts.is_empty() {
                break;
            }
            let a = acts[self.streams[scenario].gen_range(0..acts.len())];
            first.get_or_insert(a);
            let r = self.model.step(&state, a);
            self.steps += 1;
            ret += g * r.reward;
            g *= self.model.discount;
            state = r.next;
        }
        (ret, first)
    }

    fn make_node(&mut self, scenarios: Vec<(usize, PState)>, depth: usize) -> usize {
        let remaining = self.params.rollout_depth.saturating_sub(depth);
        let mut lower = 0.0;
        let mut upper = 0.0;
        let mut default_action = None;
        for (k, s) in &scenarios {
            let (ret, first) = self.rollout(*k, s, remaining);
            lower += self.weight * ret;
            upper += self.weight * self.model.upper_bound(s, remaining);
            if default_action.is_none() {
                default_action = first;
            }
        }
        let upper = upper.max(lower);
        self.nodes.push(DNode {
            scenarios,
            depth,
            default_lower: lower,
            lower,
            upper,
            default_action,
            branches: Vec::new(),
            expanded: false,
        });
        self.nodes.len() - 1
    }

    fn is_leaf_terminal(&self, b: usize) -> bool {
        let n = &self.nodes[b];
        n.depth >= self.params.rollout_depth
            || n.scenarios.iter().all(|(_, s)| self.model.is_terminal(s))
    }

    fn expand(&mut self, b: usize) {
        let mut actions: Vec<PAction> = Vec::new();
        for (_, s) in &self.nodes[b].scenarios {
            for a in self.model.preferred_actions(s) {
                if !actions.contains(&a) {
                    actions.push(a);
                }
            }
        }
        let depth = self.nodes[b].depth;
        for a in actions {
            let mut reward = 0.0;
            let mut groups: Vec<ObsGroup> = Vec::new();
            for (k, s) in self.nodes[b].scenarios.clone() {
                if self.model.is_terminal(&s) {
                    continue;
                }
                let r = self.model.step(&s, a);
                self.steps += 1;
                reward += self.weight * r.reward;
                match groups.iter_mut().find(|(o, _)| *o == r.observation) {
                    Some((_, g)) => g.push((k, r.next)),
                    None => groups.push((r.observation, vec![(k, r.next)])),
                }
            }
            let next = groups
                .into_iter()
                .map(|(o, g)| (o, self.make_node(g, depth + 1)))
                .collect();
            self.nodes[b].branches.push(Branch {
                action: a,
                reward,
                next,
            });
        }
        self.nodes[b].expanded = true;
    }

    fn branch_upper(&self, br: &Branch) -> f64 {
        br.reward
            + self.model.discount
                * br.next
                    .iter()
                    .map(|&(_, c)| self.nodes[c].upper)
                    .sum::<f64>()
    }

    fn branch_lower(&self, br: &Branch) -> f64 {
        br.reward
            + self.model.discount
                * br.next
                    .iter()
                    .map(|&(_, c)| self.nodes[c].lower)
                    .sum::<f64>()
    }

    fn excess(&self, b: usize, root_gap: f64) -> f64 {
        let n = &self.nodes[b];
        (n.upper - n.lower) - XI * root_gap * n.scenarios.len() as f64 * self.weight
    }

    fn trial(&mut self) {
        let root_gap = self.nodes[0].upper - self.nodes[0].lower;
        let mut path = vec![0];
        let mut b = 0;
        loop {
            if self.is_leaf_terminal(b) || self.excess(b, root_gap) <= 0.0 {
                break;
            }
            if !self.nodes[b].expanded {
                self.expand(b);
            }
            let n = &self.nodes[b];
            let Some(br) = n.branches.iter().max_by(|x, y| {
                self.branch_upper(x)
                    .total_cmp(&self.branch_upper(y))
                    .then(std::cmp::Ordering::Greater)
            }) else {
                break;
            };
            let Some(&(_, next)) = br.next.iter().max_by(|x, y| {
                self.excess(x.1, root_gap)
                    .total_cmp(&self.excess(y.1, root_gap))
                    .then(std::cmp::Ordering::Greater)
            }) else {
                break;
            };
            b = next;
            path.push(b);
        }
        for &b in path.iter().rev() {
            if !self.nodes[b].expanded || self.nodes[b].branches.is_empty() {
                continue;
            }
            let n = &self.nodes[b];
            let upper = n
                .branches
                .iter()
                .map(|br| self.branch_upper(br))
                .fold(f64::NEG_INFINITY, f64::max);
            let regularized = n
                .branches
                .iter()
                .map(|br| self.branch_lower(br) - self.params.regularization)
                .fold(f64::NEG_INFINITY, f64::max);
            let lower = n.default_lower.max(regularized);
            let n = &mut self.nodes[b];
            n.upper = upper.max(lower);
            n.lower = lower;
        }
    }
}

/// Anytime regularized DESPOT over `params.scenarios` sampled scenarios.
///
/// Each scenario is a particle with its own fixed random stream. Bounds are
/// the hindsight packing value (upper) and default-policy rollouts (lower).
/// Trials stop at `params.iterations` or once the root gap closes; with no
/// expansion the default policy's first action is returned.
pub fn despot_search<R: Rng + ?Sized>(
    model: &PackingPomdp,
    particles: &[PState],
    params: &SearchParams,
    rng: &mut R,
) -> Result<SearchOutcome, AgentError> {
    if particles.is_empty() {
        return Err(AgentError::NoParticles);
    }
    if particles
        .iter()
        .all(|p| model.preferred_actions(p).is_empty())
    {
        return Err(AgentError::NoLegalAction);
    }
    let k = params.scenarios;
    let scenarios: Vec<(usize, PState)> = (0..k)
        .map(|i| (i, particles[rng.gen_range(0..particles.len())].clone()))
        .collect();
    let streams = (0..k)
        .map(|_| ChaCha8Rng::seed_from_u64(rng.gen()))
        .collect();
    let mut search = Search {
        model,
        params,
        streams,
        weight: 1.0 / k as f64,
        nodes: Vec::new(),
        steps: 0,
    };
    search.make_node(scenarios, 0);

    for _ in 0..params.iterations {
        if search.nodes[0].upper - search.nodes[0].lower <= GAP_TOLERANCE {
            break;
        }
        search.trial();
    }

    let root = &search.nodes[0];
    let root_values: Vec<(PAction, f64)> = root
        .branches
        .iter()
        .map(|br| (br.action, search.branch_lower(br)))
        .collect();
    let mut best: Option<(PAction, f64)> = None;
    for &(a, v) in &root_values {
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((a, v));
        }
    }
    let action = match (best, root.default_action) {
        (Some((a, _)), _) => a,
        (None, Some(a)) => a,
        (None, None) => model.preferred_actions(&particles[0])[0],
    };
    Ok(SearchOutcome {
        action,
        model_steps: search.steps,
        tree_nodes: search.nodes.len(),
        root_values,
    })
}
