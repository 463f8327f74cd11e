use rand::Rng;

use crate::pddl::{grocery_domain, DomainDef, GroundAction};
use crate::scene_belief::{Attribute, ClassTable, Layout, SceneBelief, Surface, SurfaceKind};

pub const PACK_REWARD: f64 = 10.0;
pub const SUCCESS_REWARD: f64 = 100.0;
pub const FAILURE_REWARD: f64 = -10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Object(usize),
    Surface(usize),
}

/// One particle: a class per object plus the (shared, observable) stacking.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PState {
    pub classes: Vec<usize>,
    pub support: Vec<Option<Node>>,
    pub held: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PAction {
    Pick { object: usize, from: Node },
    Place { object: usize, onto: Node },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next: PState,
    pub reward: f64,
    /// Class revealed by a pick.
    pub observation: Option<usize>,
    pub terminal: bool,
}

/// Grocery packing as a POMDP over class hypotheses. Transitions are
/// deterministic given the particle; the only stochasticity is which particle
/// is true.
#[derive(Debug, Clone)]
pub struct PackingPomdp {
    pub class_table: ClassTable,
    pub objects: Vec<String>,
    pub surfaces: Vec<Surface>,
    pub discount: f64,
    domain: DomainDef,
}

impl PackingPomdp {
    pub fn new(
        class_table: ClassTable,
        objects: Vec<String>,
        surfaces: Vec<Surface>,
        discount: f64,
    ) -> Self {
        Self {
            class_table,
            objects,
            surfaces,
            discount,
            domain: grocery_domain(),
        }
    }

    pub fn from_belief(belief: &SceneBelief, discount: f64) -> Self {
        let objects = belief
            .objects()
            .iter()
            .map(|o| o.object_id.clone())
            .collect();
        Self::new(
            belief.class_table().clone(),
            objects,
            belief.layout().surfaces.clone(),
            discount,
        )
    }

    fn node_of(&self, name: &str) -> Option<Node> {
        self.objects
            .iter()
            .position(|o| o == name)
            .map(Node::Object)
            .or_else(|| {
                self.surfaces
                    .iter()
                    .position(|s| s.name == name)
                    .map(Node::Surface)
            })
    }

    pub fn node_name(&self, n: Node) -> &str {
        match n {
            Node::Object(i) => &self.objects[i],
            Node::Surface(j) => &self.surfaces[j].name,
        }
    }

    /// Particle with the given classes on top of an observed layout.
    pub fn state(&self, layout: &Layout, classes: Vec<usize>) -> PState {
        let support = self
            .objects
            .iter()
            .map(|o| layout.support_of(o).and_then(|s| self.node_of(s)))
            .collect();
        let held = layout
            .held
            .as_deref()
            .and_then(|h| self.objects.iter().position(|o| o == h));
        PState {
            classes,
            support,
            held,
        }
    }

    pub fn attribute(&self, s: &PState, i: usize) -> Attribute {
        self.class_table.attribute(s.classes[i])
    }

    pub fn to_ground(&self, a: PAction) -> GroundAction {
        let (name, x, y) = match a {
            PAction::Pick { object, from } => ("pick", object, from),
            PAction::Place { object, onto } => ("place", object, onto),
        };
        let args = [self.objects[x].as_str(), self.node_name(y)];
        self.domain
            .action(name)
            .expect("built-in schema")
            .instantiate(&args)
            .remove(0)
    }

    fn occupant(&self, s: &PState, n: Node) -> Option<usize> {
        s.support.iter().position(|&sup| sup == Some(n))
    }

    fn box_slots(&self) -> impl Iterator<Item = usize> + '_ {
        self.surfaces
            .iter()
            .enumerate()
            .filter(|(_, s)| s.kind == SurfaceKind::Box)
            .map(|(j, _)| j)
    }

    /// Object at the top of the column on box slot `j`, if any.
    fn column_top(&self, s: &PState, j: usize) -> Option<usize> {
        let mut top = None;
        let mut cur = Node::Surface(j);
        while let Some(o) = self.occupant(s, cur) {
            top = Some(o);
            cur = Node::Object(o);
        }
        top
    }

    pub fn in_box(&self, s: &PState, i: usize) -> bool {
        let mut cur = i;
        for _ in 0..=self.objects.len() {
            match s.support[cur] {
                Some(Node::Surface(j)) => return self.surfaces[j].kind == SurfaceKind::Box,
                Some(Node::Object(o)) => cur = o,
                None => return false,
            }
        }
        false
    }

    pub fn unpacked(&self, s: &PState) -> usize {
        (0..self.objects.len())
            .filter(|&i| !self.in_box(s, i))
            .count()
    }

    pub fn all_packed(&self, s: &PState) -> bool {
        s.held.is_none() && self.unpacked(s) == 0
    }

    /// Light objects with a heavy one somewhere above them in a box column.
    pub fn violations(&self, s: &PState) -> usize {
        let mut count = 0;
        for j in self.box_slots() {
            let mut col = Vec::new();
            let mut cur = Node::Surface(j);
            while let Some(o) = self.occupant(s, cur) {
                col.push(o);
                cur = Node::Object(o);
            }
            for (k, &o) in col.iter().enumerate() {
                if self.attribute(s, o) == Attribute::Light
                    && col[k + 1..]
                        .iter()
                        .any(|&a| self.attribute(s, a) == Attribute::Heavy)
                {
                    count += 1;
                }
            }
        }
        count
    }

    pub fn is_terminal(&self, s: &PState) -> bool {
        self.all_packed(s)
    }

    /// Picks of clear unpacked objects, or places of the held object into the
    /// box that keep heavy below light under this particle's classes (any box
    /// spot when none does). Only the first empty slot is offered.
    pub fn preferred_actions(&self, s: &PState) -> Vec<PAction> {
        match s.held {
            None => (0..self.objects.len())
                .filter(|&i| !self.in_box(s, i) && self.occupant(s, Node::Object(i)).is_none())
                .filter_map(|i| s.support[i].map(|from| PAction::Pick { object: i, from }))
                .collect(),
            Some(x) => {
                let heavy = self.attribute(s, x) == Attribute::Heavy;
                let mut empty = None;
                let mut tops = Vec::new();
                for j in self.box_slots() {
                    match self.column_top(s, j) {
                        None if empty.is_none() => empty = Some(Node::Surface(j)),
                        None => {}
                        Some(t) => tops.push(t),
                    }
                }
                let mut out: Vec<PAction> = empty
                    .map(|onto| PAction::Place { object: x, onto })
                    .into_iter()
                    .collect();
                let consistent = |t: &usize| !heavy || self.attribute(s, *t) == Attribute::Heavy;
                out.extend(
                    tops.iter()
                        .filter(|t| consistent(t))
                        .map(|&t| PAction::Place {
                            object: x,
                            onto: Node::Object(t),
                        }),
                );
                if out.is_empty() {
                    out.extend(tops.iter().map(|&t| PAction::Place {
                        object: x,
                        onto: Node::Object(t),
                    }));
                }
                out
            }
        }
    }

    /// Deterministic transition. The action is assumed legal in `s`.
    pub fn step(&self, s: &PState, a: PAction) -> StepResult {
        let mut next = s.clone();
        let mut reward = 0.0;
        let mut observation = None;
        match a {
            PAction::Pick { object, .. } => {
                next.support[object] = None;
                next.held = Some(object);
                observation = Some(s.classes[object]);
            }
            PAction::Place { object, onto } => {
                next.held = None;
                next.support[object] = Some(onto);
                if self.in_box(&next, object) {
                    reward += PACK_REWARD;
                }
            }
        }
        let terminal = self.is_terminal(&next);
        if terminal {
            reward += if self.violations(&next) == 0 {
                SUCCESS_REWARD
            } else {
                FAILURE_REWARD
            };
        }
        StepResult {
            next,
            reward,
            observation,
            terminal,
        }
    }

    /// Uniformly random preferred actions for up to `depth` steps. Returns the
    /// discounted return and the number of simulated steps.
    pub fn rollout<R: Rng + ?Sized>(&self, s: &PState, depth: usize, rng: &mut R) -> (f64, u64) {
        let mut state = s.clone();
        let mut ret = 0.0;
        let mut g = 1.0;
        let mut steps = 0;
        for _ in 0..depth {
            if self.is_terminal(&state) {
                break;
            }
            let acts = self.preferred_actions(&state);
            if acts.is_empty() {
                break;
            }
            let a = acts[rng.gen_range(0..acts.len())];
            let r = self.step(&state, a);
            steps += 1;
            ret += g * r.reward;
            g *= self.discount;
            state = r.next;
            if r.terminal {
                break;
            }
        }
        (ret, steps)
    }

    /// Best return achievable in hindsight within `depth` steps: one pack per
    /// pick-place pair plus the success bonus if everything fits.
    pub fn upper_bound(&self, s: &PState, depth: usize) -> f64 {
        if self.is_terminal(s) {
            return 0.0;
        }
        let remaining = self.unpacked(s);
        let packs = match s.held {
            Some(_) if depth >= 1 => 1 + (depth - 1) / 2,
            Some(_) => 0,
            None => depth / 2,
        }
        .min(remaining);
        PACK_REWARD * packs as f64
            + if packs == remaining {
                SUCCESS_REWARD
            } else {
                0.0
            }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene_belief::ObjectClass;

    fn toy() -> (PackingPomdp, PState) {
        let table = ClassTable::new(vec![
            ObjectClass {
                label: "anvil".into(),
                attribute: Attribute::Heavy,
            },
            ObjectClass {
                label: "feather".into(),
                attribute: Attribute::Light,
            },
        ])
        .unwrap();
        let surfaces = vec![
            Surface::new("table1", SurfaceKind::Table),
            Surface::new("table2", SurfaceKind::Table),
            Surface::new("box1", SurfaceKind::Box),
            Surface::new("box2", SurfaceKind::Box),
        ];
        let m = PackingPomdp::new(table, vec!["a".into(), "b".into()], surfaces, 1.0);
        let s = PState {
            classes: vec![0, 1],
            support: vec![Some(Node::Surface(0)), Some(Node::Surface(1))],
            held: None,
        };
        (m, s)
    }

    #[test]
    fn full_pack_returns_ten_per_item_plus_bonus() {
        let (m, s) = toy();
        let mut state = s;
        let mut ret = 0.0;
        for _ in 0..4 {
            let a = m.preferred_actions(&state)[0];
            let r = m.step(&state, a);
            ret += r.reward;
            state = r.next;
        }
        assert!(m.is_terminal(&state));
        assert_eq!(ret, 10.0 * 2.0 + 100.0);
        assert_eq!(m.upper_bound(&state, 4), 0.0);
    }

    #[test]
    fn heavy_never_offered_a_light_top() {
        let (m, s) = toy();
        let s = m
            .step(
                &s,
                PAction::Pick {
                    object: 1,
                    from: Node::Surface(1),
                },
            )
            .next;
        let s = m
            .step(
                &s,
                PAction::Place {
                    object: 1,
                    onto: Node::Surface(2),
                },
            )
            .next;
        let s = m
            .step(
                &s,
                PAction::Pick {
                    object: 0,
                    from: Node::Surface(0),
                },
            )
            .next;
        assert_eq!(
            m.preferred_actions(&s),
            vec![PAction::Place {
                object: 0,
                onto: Node::Surface(3)
            }]
        );
    }

    #[test]
    fn pick_reveals_class_and_ground_names() {
        let (m, s) = toy();
        let a = PAction::Pick {
            object: 0,
            from: Node::Surface(0),
        };
        assert_eq!(m.step(&s, a).observation, Some(0));
        assert_eq!(m.to_ground(a).to_string(), "(pick a table1)");
        assert_eq!(m.upper_bound(&s, 4), 120.0);
        assert_eq!(m.upper_bound(&s, 3), 10.0);
    }
}
