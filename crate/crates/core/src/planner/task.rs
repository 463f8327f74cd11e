use std::collections::{BTreeMap, BTreeSet};

use super::H_INFINITY;
use crate::pddl::{GroundAction, GroundAtom, GroundLiteral};

/// Bitset compilation of a grounded problem.
pub struct Task {
    words: usize,
    n_atoms: usize,
    pre_pos: Vec<Vec<u64>>,
    pre_neg: Vec<Vec<u64>>,
    add: Vec<Vec<u64>>,
    del: Vec<Vec<u64>>,
    pre_idx: Vec<Vec<usize>>,
    add_idx: Vec<Vec<usize>>,
    goal_pos: Vec<usize>,
    goal_neg: Vec<usize>,
    pub initial: Vec<u64>,
}

impl Task {
    pub fn new(
        actions: &[GroundAction],
        init: &BTreeSet<GroundAtom>,
        goal: &[GroundLiteral],
    ) -> Self {
        let mut index: BTreeMap<&GroundAtom, usize> = BTreeMap::new();
        let mut intern = |a| -> usize {
            let n = index.len();
            *index.entry(a).or_insert(n)
        };
        let init_ids: Vec<usize> = init.iter().map(&mut intern).collect();
        let mut pre_idx = Vec::with_capacity(actions.len());
        let mut neg_idx = Vec::with_capacity(actions.len());
        let mut add_idx = Vec::with_capacity(actions.len());
        let mut del_idx = Vec::with_capacity(actions.len());
        for a in actions {
            pre_idx.push(a.pre_pos.iter().map(&mut intern).collect::<Vec<_>>());
            neg_idx.push(a.pre_neg.iter().map(&mut intern).collect::<Vec<_>>());
            add_idx.push(a.add.iter().map(&mut intern).collect::<Vec<_>>());
            del_idx.push(a.del.iter().map(&mut intern).collect::<Vec<_>>());
        }
        let mut goal_pos = Vec::new();
        let mut goal_neg = Vec::new();
        for g in goal {
            let i = intern(&g.atom);
            if g.positive {
                goal_pos.push(i);
            } else {
                goal_neg.push(i);
            }
        }
        let n_atoms = index.len();
        let words = n_atoms.div_ceil(64).max(1);
        let mask = |ids: &[usize]| {
            let mut m = vec![0u64; words];
            for &i in ids {
                m[i / 64] |= 1 << (i % 64);
            }
            m
        };
        Task {
            words,
            n_atoms,
            pre_pos: pre_idx.iter().map(|v| mask(v)).collect(),
            pre_neg: neg_idx.iter().map(|v| mask(v)).collect(),
            add: add_idx.iter().map(|v| mask(v)).collect(),
            del: del_idx.iter().map(|v| mask(v)).collect(),
            initial: mask(&init_ids),
            pre_idx,
            add_idx,
            goal_pos,
            goal_neg,
        }
    }

    fn has(state: &[u64], i: usize) -> bool {
        state[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn applicable(&self, a: usize, state: &[u64]) -> bool {
        (0..self.words).all(|w| {
            state[w] & self.pre_pos[a][w] == self.pre_pos[a][w]
                && state[w] & self.pre_neg[a][w] == 0
        })
    }

    pub fn apply(&self, a: usize, state: &[u64]) -> Vec<u64> {
        (0..self.words)
            .map(|w| (state[w] & !self.del[a][w]) | self.add[a][w])
            .collect()
    }

    pub fn is_goal(&self, state: &[u64]) -> bool {
        self.goal_pos.iter().all(|&i| Self::has(state, i))
            && self.goal_neg.iter().all(|&i| !Self::has(state, i))
    }

    pub fn h_add(&self, state: &[u64]) -> u64 {
        let mut cost: Vec<u64> = (0..self.n_atoms)
            .map(|i| if Self::has(state, i) { 0 } else { H_INFINITY })
            .collect();
        loop {
            let mut changed = false;
            for (pre, add) in self.pre_idx.iter().zip(&self.add_idx) {
                let mut c: u64 = 1;
                for &p in pre {
                    if cost[p] == H_INFINITY {
                        c = H_INFINITY;
                        break;
                    }
                    c += cost[p];
                }
                if c == H_INFINITY {
                    continue;
                }
                for &q in add {
                    if c < cost[q] {
                        cost[q] = c;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut h: u64 = 0;
        for &g in &self.goal_pos {
            if cost[g] == H_INFINITY {
                return H_INFINITY;
            }
            h += cost[g];
        }
        h + self
            .goal_neg
            .iter()
            .filter(|&&g| Self::has(state, g))
            .count() as u64
    }
}
