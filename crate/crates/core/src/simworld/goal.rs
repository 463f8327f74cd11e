use std::collections::BTreeSet;

use super::{SimError, WorldState};
use crate::pddl::{GroundAtom, GroundLiteral, ProblemDef};
use crate::scene_belief::{Attribute, SceneGraph, SceneObject, SurfaceKind};

/// Packing goal for one attribute assignment: every object in the box and no
/// heavy object directly on a light one. Any column meeting the second part
/// has no light object anywhere below a heavy one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoalSpec {
    pub goal: Vec<GroundLiteral>,
}

/// Goal for the attributes of `sample`. Objects come in sorted id order;
/// `(inbox x)` literals first, then `(not (on h l))` per heavy/light pair.
pub fn ground_goal(sample: &SceneGraph) -> GoalSpec {
    let mut ids: Vec<&SceneObject> = sample.objects.iter().collect();
    ids.sort_by(|a, b| a.id.cmp(&b.id));
    let of = |a: Attribute| {
        ids.iter()
            .filter(move |o| o.attribute == a)
            .map(|o| o.id.as_str())
    };
    let mut goal: Vec<GroundLiteral> = ids
        .iter()
        .map(|o| GroundLiteral::pos(GroundAtom::new("inbox", &[&o.id])))
        .collect();
    for h in of(Attribute::Heavy) {
        for l in of(Attribute::Light) {
            goal.push(GroundLiteral::neg(GroundAtom::new("on", &[h, l])));
        }
    }
    GoalSpec { goal }
}

/// Every object in the box, hand empty, and no truly light object below a
/// truly heavy one.
pub fn goal_satisfied(world: &WorldState) -> bool {
    let t = &world.truth;
    world.is_hand_empty() && t.packed_count() == t.objects.len() && t.constraint_violations() == 0
}

/// PDDL problem for `scene`: stacking facts, clear tops, box membership, hand
/// state.
pub fn scene_to_problem(
    scene: &SceneGraph,
    goal: &[GroundLiteral],
) -> Result<ProblemDef, SimError> {
    let layout = &scene.layout;
    let ids = scene.object_ids();
    layout.validate(&ids)?;
    let objects: Vec<String> = ids
        .iter()
        .map(|s| s.to_string())
        .chain(layout.surfaces.iter().map(|s| s.name.clone()))
        .collect();

    let mut init = BTreeSet::new();
    for e in &layout.on_edges {
        init.insert(GroundAtom::new("on", &[&e.above, &e.below]));
    }
    for n in &objects {
        if layout.is_topfree(n) {
            init.insert(GroundAtom::new("topfree", &[n]));
        }
        let boxed = layout
            .surface(n)
            .map_or_else(|| layout.in_box(n), |s| s.kind == SurfaceKind::Box);
        if boxed {
            init.insert(GroundAtom::new("inbox", &[n]));
        }
    }
    match &layout.held {
        Some(h) => init.insert(GroundAtom::new("holding", &[h])),
        None => init.insert(GroundAtom::new("handempty", &[])),
    };
    for g in goal {
        if let Some(bad) = g.atom.args.iter().find(|a| !objects.contains(a)) {
            return Err(SimError::InvalidScenario(format!(
                "goal mentions unknown constant {bad}"
            )));
        }
    }
    Ok(ProblemDef {
        name: "packing".into(),
        domain: "grocery".into(),
        objects,
        init,
        goal: goal.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene_belief::{Layout, OnEdge, SceneObject, Surface};

    fn obj(id: &str, a: Attribute) -> SceneObject {
        let category = if a == Attribute::Heavy {
            "soup-can"
        } else {
            "cracker-box"
        };
        SceneObject {
            id: id.into(),
            category: category.into(),
            attribute: a,
        }
    }

    fn scene(objects: Vec<SceneObject>, edges: Vec<OnEdge>, boxes: usize) -> SceneGraph {
        let mut surfaces: Vec<_> = ["table", "t1", "t2", "t3", "t4"]
            .iter()
            .map(|t| Surface::new(*t, SurfaceKind::Table))
            .collect();
        surfaces.extend((1..=boxes).map(|i| Surface::new(format!("box{i}"), SurfaceKind::Box)));
        SceneGraph {
            objects,
            layout: Layout::new(surfaces, edges, None),
        }
    }

    fn inbox(a: &str) -> GroundLiteral {
        GroundLiteral::pos(GroundAtom::new("inbox", &[a]))
    }

    fn not_on(a: &str, b: &str) -> GroundLiteral {
        GroundLiteral::neg(GroundAtom::new("on", &[a, b]))
    }

    #[test]
    fn two_heavy_two_light() {
        let s = scene(
            vec![
                obj("l1", Attribute::Light),
                obj("h2", Attribute::Heavy),
                obj("h1", Attribute::Heavy),
                obj("l2", Attribute::Light),
            ],
            vec![
                OnEdge::new("l1", "t1"),
                OnEdge::new("h1", "t2"),
                OnEdge::new("l2", "t3"),
                OnEdge::new("h2", "t4"),
            ],
            4,
        );
        let want = vec![
            inbox("h1"),
            inbox("h2"),
            inbox("l1"),
            inbox("l2"),
            not_on("h1", "l1"),
            not_on("h1", "l2"),
            not_on("h2", "l1"),
            not_on("h2", "l2"),
        ];
        assert_eq!(ground_goal(&s).goal, want);
    }

    #[test]
    fn uniform_attributes_need_only_inbox() {
        let s = scene(
            vec![obj("a", Attribute::Light), obj("b", Attribute::Light)],
            vec![OnEdge::new("a", "table"), OnEdge::new("b", "a")],
            2,
        );
        assert_eq!(ground_goal(&s).goal, vec![inbox("a"), inbox("b")]);
        let s = scene(
            vec![obj("o", Attribute::Heavy)],
            vec![OnEdge::new("o", "table")],
            1,
        );
        assert_eq!(ground_goal(&s).goal, vec![inbox("o")]);
    }

    #[test]
    fn problem_init_matches_layout() {
        let s = scene(
            vec![obj("a", Attribute::Light), obj("b", Attribute::Heavy)],
            vec![OnEdge::new("a", "b"), OnEdge::new("b", "table")],
            1,
        );
        let p = scene_to_problem(&s, &[]).unwrap();
        let want: BTreeSet<GroundAtom> = [
            GroundAtom::new("on", &["a", "b"]),
            GroundAtom::new("on", &["b", "table"]),
            GroundAtom::new("topfree", &["a"]),
            GroundAtom::new("topfree", &["box1"]),
            GroundAtom::new("inbox", &["box1"]),
            GroundAtom::new("handempty", &[]),
        ]
        .into_iter()
        .chain(
            ["t1", "t2", "t3", "t4"]
                .iter()
                .map(|t| GroundAtom::new("topfree", &[t])),
        )
        .collect();
        assert_eq!(p.init, want);
        let empty = scene(vec![], vec![], 1);
        assert_eq!(scene_to_problem(&empty, &[]).unwrap().init.len(), 8);
        assert!(scene_to_problem(&s, &[not_on("a", "nowhere")]).is_err());
    }
}
