use rand::Rng;

use super::pomdp::{PAction, PState, PackingPomdp};
use super::{AgentError, SearchParams};

/// Root decision of a tree search plus what it cost.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub action: PAction,
    /// Generative-model transitions simulated, rollouts included.
    pub model_steps: u64,
    pub tree_nodes: usize,
    /// Estimated value of each root action that was tried.
    pub root_values: Vec<(PAction, f64)>,
}

#[derive(Default)]
struct VNode {
    visits: u64,
    children: Vec<QNode>,
}

struct QNode {
    action: PAction,
    visits: u64,
    value: f64,
    /// (observation, child belief node)
    next: Vec<(Option<usize>, usize)>,
}

struct Tree<'a, R: Rng + ?Sized> {
    model: &'a PackingPomdp,
    params: &'a SearchParams,
    rng: &'a mut R,
    nodes: Vec<VNode>,
    steps: u64,
}

impl<R: Rng + ?Sized> Tree<'_, R> {
    fn simulate(&mut self, s: &PState, node: usize, depth: usize) -> f64 {
        if depth >= self.params.rollout_depth || self.model.is_terminal(s) {
            return 0.0;
        }
        let legal = self.model.preferred_actions(s);
        if legal.is_empty() {
            return 0.0;
        }
        if self.nodes[node].visits == 0 && node != 0 {
            self.nodes[node].visits = 1;
            let (ret, steps) = self
                .model
                .rollout(s, self.params.rollout_depth - depth, self.rng);
            self.steps += steps;
            return ret;
        }
        for a in &legal {
            if !self.nodes[node].children.iter().any(|q| q.action == *a) {
                self.nodes[node].children.push(QNode {
                    action: *a,
                    visits: 0,
                    value: 0.0,
                    next: Vec::new(),
                });
            }
        }
        let qi = self.select(node, &legal);
        let action = self.nodes[node].children[qi].action;
        let r = self.model.step(s, action);
        self.steps += 1;
        let child = match self.nodes[node].children[qi]
            .next
            .iter()
            .find(|(o, _)| *o == r.observation)
        {
            Some(&(_, c)) => c,
            None => {
                self.nodes.push(VNode::default());
                let c = self.nodes.len() - 1;
                self.nodes[node].children[qi].next.push((r.observation, c));
                c
            }
        };
        let future = if r.terminal {
            0.0
        } else {
            self.simulate(&r.next, child, depth + 1)
        };
        let ret = r.reward + self.params.discount * future;
        let n = &mut self.nodes[node];
        n.visits += 1;
        let q = &mut n.children[qi];
        q.visits += 1;
        q.value += (ret - q.value) / q.visits as f64;
        ret
    }

    /// UCB1 over the actions legal in this particle; untried ones first.
    fn select(&self, node: usize, legal: &[PAction]) -> usize {
        let n = &self.nodes[node];
        let log_n = (n.visits.max(1) as f64).ln();
        let mut best = None;
        let mut best_score = f64::NEG_INFINITY;
        for (i, q) in n.children.iter().enumerate() {
            if !legal.contains(&q.action) {
                continue;
            }
            if q.visits == 0 {
                return i;
            }
            let score = q.value + self.params.exploration * (log_n / q.visits as f64).sqrt();
            if score > best_score {
                best_score = score;
                best = Some(i);
            }
        }
        best.expect("at least one legal action")
    }
}

/// UCB1 tree search over the particle set, restricted to preferred actions.
/// Each iteration draws a particle uniformly and simulates it to the horizon.
/// Returns the root action with the highest mean return.
pub fn pomcp_search<R: Rng + ?Sized>(
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
    let mut tree = Tree {
        model,
        params,
        rng,
        nodes: vec![VNode::default()],
        steps: 0,
    };
    for _ in 0..params.iterations {
        let s = &particles[tree.rng.gen_range(0..particles.len())];
        tree.simulate(s, 0, 0);
    }
    let root = &tree.nodes[0];
    let mut best: Option<&QNode> = None;
    for q in root.children.iter().filter(|q| q.visits > 0) {
        if best.is_none_or(|b| q.value > b.value) {
            best = Some(q);
        }
    }
    let action = match best {
        Some(q) => q.action,
        None => model.preferred_actions(&particles[0])[0],
    };
    Ok(SearchOutcome {
        action,
        model_steps: tree.steps,
        tree_nodes: tree.nodes.len(),
        root_values: root
            .children
            .iter()
            .filter(|q| q.visits > 0)
            .map(|q| (q.action, q.value))
            .collect(),
    })
}
