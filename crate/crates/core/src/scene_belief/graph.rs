use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::BeliefError;

/// Packing-relevant attribute, fixed per object class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Heavy,
    Light,
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Attribute::Heavy => f.write_str("heavy"),
            Attribute::Light => f.write_str("light"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectClass {
    pub label: String,
    pub attribute: Attribute,
}

/// The closed, ordered set of object categories a detector can report.
///
/// Category order matters: it is the index order of every weight vector and the
/// tie-break order for argmax determinization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ObjectClass>", into = "Vec<ObjectClass>")]
pub struct ClassTable {
    classes: Vec<ObjectClass>,
}

impl ClassTable {
    pub fn new(classes: Vec<ObjectClass>) -> Result<Self, BeliefError> {
        if classes.len() < 2 {
            return Err(BeliefError::InvalidClassTable(format!(
                "need at least 2 classes, got {}",
                classes.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for c in &classes {
            if c.label.is_empty()
                || c.label
                    .chars()
                    .any(|ch| ch.is_whitespace() || ch == '(' || ch == ')')
            {
                return Err(BeliefError::InvalidClassTable(format!(
                    "bad label {:?}",
                    c.label
                )));
            }
            if !seen.insert(c.label.as_str()) {
                return Err(BeliefError::InvalidClassTable(format!(
                    "duplicate label {:?}",
                    c.label
                )));
            }
        }
        Ok(Self { classes })
    }

    /// Eight grocery categories, four heavy and four light.
    pub fn grocery() -> Self {
        use Attribute::*;
        let classes = [
            ("cracker-box", Light),
            ("gelatin-box", Light),
            ("meat-can", Heavy),
            ("mustard-bottle", Heavy),
            ("pudding-box", Light),
            ("soup-can", Heavy),
            ("sugar-box", Light),
            ("tuna-can", Heavy),
        ]
        .into_iter()
        .map(|(label, attribute)| ObjectClass {
            label: label.to_string(),
            attribute,
        })
        .collect();
        Self::new(classes).expect("grocery table is well-formed")
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[ObjectClass] {
        &self.classes
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c.label == label)
    }

    pub fn label(&self, index: usize) -> &str {
        &self.classes[index].label
    }

    pub fn attribute(&self, index: usize) -> Attribute {
        self.classes[index].attribute
    }

    pub fn attribute_of(&self, label: &str) -> Option<Attribute> {
        self.index_of(label).map(|i| self.classes[i].attribute)
    }
}

impl TryFrom<Vec<ObjectClass>> for ClassTable {
    type Error = BeliefError;

    fn try_from(classes: Vec<ObjectClass>) -> Result<Self, Self::Error> {
        Self::new(classes)
    }
}

impl From<ClassTable> for Vec<ObjectClass> {
    fn from(t: ClassTable) -> Self {
        t.classes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceKind {
    Table,
    Box,
}

/// A fixed support position. Each surface holds at most one object directly.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Surface {
    pub name: String,
    pub kind: SurfaceKind,
}

impl Surface {
    pub fn new(name: impl Into<String>, kind: SurfaceKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OnEdge {
    pub above: String,
    pub below: String,
}

impl OnEdge {
    pub fn new(above: impl Into<String>, below: impl Into<String>) -> Self {
        Self {
            above: above.into(),
            below: below.into(),
        }
    }
}

/// Stacking structure of a scene: which object rests on which object or surface,
/// plus what the hand holds. Shared by every hypothesis of a belief, since
/// spatial relations are perceived deterministically.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub surfaces: Vec<Surface>,
    pub on_edges: Vec<OnEdge>,
    #[serde(default)]
    pub held: Option<String>,
}

impl Layout {
    pub fn new(surfaces: Vec<Surface>, mut on_edges: Vec<OnEdge>, held: Option<String>) -> Self {
        on_edges.sort();
        Self {
            surfaces,
            on_edges,
            held,
        }
    }

    pub fn surface(&self, name: &str) -> Option<&Surface> {
        self.surfaces.iter().find(|s| s.name == name)
    }

    pub fn is_surface(&self, name: &str) -> bool {
        self.surface(name).is_some()
    }

    /// What `id` rests on, if anything.
    pub fn support_of(&self, id: &str) -> Option<&str> {
        self.on_edges
            .iter()
            .find(|e| e.above == id)
            .map(|e| e.below.as_str())
    }

    /// The object resting directly on `node`, if any.
    pub fn occupant_of(&self, node: &str) -> Option<&str> {
        self.on_edges
            .iter()
            .find(|e| e.below == node)
            .map(|e| e.above.as_str())
    }

    pub fn is_topfree(&self, node: &str) -> bool {
        self.occupant_of(node).is_none() && self.held.as_deref() != Some(node)
    }

    /// The surface at the bottom of the stack containing `id`, or `None` when the
    /// object is held (or the chain is broken).
    pub fn base_surface(&self, id: &str) -> Option<&Surface> {
        let mut cur = id;
        for _ in 0..=self.on_edges.len() {
            let below = self.support_of(cur)?;
            if let Some(s) = self.surface(below) {
                return Some(s);
            }
            cur = below;
        }
        None
    }

    pub fn in_box(&self, id: &str) -> bool {
        matches!(self.base_surface(id), Some(s) if s.kind == SurfaceKind::Box)
    }

    /// Objects stacked on `node`, bottom to top.
    pub fn column(&self, node: &str) -> Vec<&str> {
        let mut out = Vec::new();
        let mut cur = node;
        while let Some(above) = self.occupant_of(cur) {
            out.push(above);
            cur = above;
            if out.len() > self.on_edges.len() {
                break;
            }
        }
        out
    }

    /// Removes `id` from its support and puts it in the hand.
    pub fn lift(&mut self, id: &str) {
        self.on_edges.retain(|e| e.above != id);
        self.held = Some(id.to_string());
    }

    /// Puts the held object on `target`.
    pub fn put(&mut self, id: &str, target: &str) {
        if self.held.as_deref() == Some(id) {
            self.held = None;
        }
        let pos = self
            .on_edges
            .binary_search_by(|e| e.above.as_str().cmp(id))
            .unwrap_or_else(|p| p);
        self.on_edges.insert(pos, OnEdge::new(id, target));
    }

    /// Checks the stacking invariants against a set of object ids: every support
    /// exists, each object rests on at most one node, each node supports at most
    /// one object, the held object rests on nothing, and there are no cycles.
    pub fn validate(&self, object_ids: &BTreeSet<&str>) -> Result<(), BeliefError> {
        let bad = |m: String| Err(BeliefError::InvalidScene(m));
        let mut surface_names = BTreeSet::new();
        for s in &self.surfaces {
            if object_ids.contains(s.name.as_str()) {
                return bad(format!("surface {} shares a name with an object", s.name));
            }
            if !surface_names.insert(s.name.as_str()) {
                return bad(format!("duplicate surface {}", s.name));
            }
        }
        let mut supports: BTreeMap<&str, &str> = BTreeMap::new();
        let mut occupied: BTreeSet<&str> = BTreeSet::new();
        for e in &self.on_edges {
            if !object_ids.contains(e.above.as_str()) {
                return bad(format!("unknown object {} in on-edge", e.above));
            }
            if !object_ids.contains(e.below.as_str()) && !surface_names.contains(e.below.as_str()) {
                return bad(format!("unknown support {} in on-edge", e.below));
            }
            if e.above == e.below {
                return bad(format!("{} rests on itself", e.above));
            }
            if supports.insert(&e.above, &e.below).is_some() {
                return bad(format!("{} has more than one support", e.above));
            }
            if !occupied.insert(&e.below) {
                return bad(format!("{} supports more than one object", e.below));
            }
        }
        if let Some(h) = &self.held {
            if !object_ids.contains(h.as_str()) {
                return bad(format!("held object {h} is unknown"));
            }
            if supports.contains_key(h.as_str()) || occupied.contains(h.as_str()) {
                return bad(format!("held object {h} is still stacked"));
            }
        }
        for &start in supports.keys() {
            let mut cur = start;
            let mut steps = 0;
            while let Some(&next) = supports.get(cur) {
                cur = next;
                steps += 1;
                if steps > supports.len() {
                    return bad(format!("stacking cycle through {start}"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub category: String,
    pub attribute: Attribute,
}

/// One concrete scene: a category per detected object plus the stacking layout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub objects: Vec<SceneObject>,
    pub layout: Layout,
}

impl SceneGraph {
    pub fn empty(surfaces: Vec<Surface>) -> Self {
        Self {
            objects: Vec::new(),
            layout: Layout::new(surfaces, Vec::new(), None),
        }
    }

    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn category_of(&self, id: &str) -> Option<&str> {
        self.object(id).map(|o| o.category.as_str())
    }

    pub fn attribute_of(&self, id: &str) -> Option<Attribute> {
        self.object(id).map(|o| o.attribute)
    }

    pub fn object_ids(&self) -> BTreeSet<&str> {
        self.objects.iter().map(|o| o.id.as_str()).collect()
    }

    pub fn validate(&self, table: &ClassTable) -> Result<(), BeliefError> {
        let ids = self.object_ids();
        if ids.len() != self.objects.len() {
            return Err(BeliefError::InvalidScene("duplicate object id".into()));
        }
        for o in &self.objects {
            match table.attribute_of(&o.category) {
                None => return Err(BeliefError::UnknownCategory(o.category.clone())),
                Some(a) if a != o.attribute => {
                    return Err(BeliefError::InvalidScene(format!(
                        "{} has attribute {} but {} is {}",
                        o.id, o.attribute, o.category, a
                    )))
                }
                _ => {}
            }
        }
        self.layout.validate(&ids)
    }

    /// Number of objects resting (transitively) in the box.
    pub fn packed_count(&self) -> usize {
        self.objects
            .iter()
            .filter(|o| self.layout.in_box(&o.id))
            .count()
    }

    /// Light objects that have at least one heavy object somewhere above them
    /// in the same box column.
    pub fn constraint_violations(&self) -> usize {
        let mut count = 0;
        for s in self
            .layout
            .surfaces
            .iter()
            .filter(|s| s.kind == SurfaceKind::Box)
        {
            let col = self.layout.column(&s.name);
            for (i, id) in col.iter().enumerate() {
                if self.attribute_of(id) == Some(Attribute::Light)
                    && col[i + 1..]
                        .iter()
                        .any(|a| self.attribute_of(a) == Some(Attribute::Heavy))
                {
                    count += 1;
                }
            }
        }
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids<'a>(v: &[&'a str]) -> BTreeSet<&'a str> {
        v.iter().copied().collect()
    }

    #[test]
    fn grocery_table_has_eight_classes() {
        let t = ClassTable::grocery();
        assert_eq!(t.len(), 8);
        assert_eq!(t.attribute_of("soup-can"), Some(Attribute::Heavy));
        assert_eq!(t.attribute_of("cracker-box"), Some(Attribute::Light));
    }

    #[test]
    fn class_table_rejects_duplicates_and_singletons() {
        let c = |l: &str| ObjectClass {
            label: l.into(),
            attribute: Attribute::Heavy,
        };
        assert!(ClassTable::new(vec![c("a")]).is_err());
        assert!(ClassTable::new(vec![c("a"), c("a")]).is_err());
        assert!(ClassTable::new(vec![c("a"), c("b")]).is_ok());
    }

    #[test]
    fn layout_rejects_cycles_and_double_support() {
        let surf = vec![Surface::new("table", SurfaceKind::Table)];
        let cyc = Layout::new(
            surf.clone(),
            vec![OnEdge::new("a", "b"), OnEdge::new("b", "a")],
            None,
        );
        assert!(cyc.validate(&ids(&["a", "b"])).is_err());
        let two = Layout::new(
            surf.clone(),
            vec![OnEdge::new("a", "table"), OnEdge::new("b", "table")],
            None,
        );
        assert!(two.validate(&ids(&["a", "b"])).is_err());
        let ok = Layout::new(
            surf,
            vec![OnEdge::new("a", "b"), OnEdge::new("b", "table")],
            None,
        );
        assert!(ok.validate(&ids(&["a", "b"])).is_ok());
        assert_eq!(ok.column("table"), vec!["b", "a"]);
        assert!(ok.is_topfree("a"));
        assert!(!ok.is_topfree("table"));
    }

    #[test]
    fn lift_and_put_round_trip() {
        let surf = vec![
            Surface::new("t", SurfaceKind::Table),
            Surface::new("b1", SurfaceKind::Box),
        ];
        let mut l = Layout::new(surf, vec![OnEdge::new("a", "t")], None);
        l.lift("a");
        assert_eq!(l.held.as_deref(), Some("a"));
        assert!(l.is_topfree("t"));
        l.put("a", "b1");
        assert!(l.in_box("a"));
        assert!(l.held.is_none());
    }
}
