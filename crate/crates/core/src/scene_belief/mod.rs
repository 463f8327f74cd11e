//! Beliefs over scene graphs.
//!
//! A [`SceneBelief`] factorizes the distribution over scene graphs into one
//! categorical distribution per detected object. All hypotheses of an object
//! share the same stacking relations (the [`Layout`]), because spatial relations
//! are assumed to be perceived exactly; only object identity is uncertain.

mod graph;

use std::collections::BTreeSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use graph::{
    Attribute, ClassTable, Layout, ObjectClass, OnEdge, SceneGraph, SceneObject, Surface,
    SurfaceKind,
};

/// Tolerance on the sum of an object's weights before renormalization.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeliefError {
    #[error("invalid class table: {0}")]
    InvalidClassTable(String),
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("unknown object {0:?}: simulator and belief are out of sync")]
    UnknownObject(String),
    #[error("invalid weights for {object}: {reason}")]
    InvalidWeights { object: String, reason: String },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("entropy target {target} unreachable, got {achieved}")]
    InjectionUnreachable { target: f64, achieved: f64 },
}

/// What the robot perceives after acting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observation {
    /// A re-detection that carries no new identity information.
    DetectionSnapshot,
    /// The true category of an object that was just picked up.
    PickedIdentity { object_id: String, category: String },
}

/// One weighted candidate identity for a detected object.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectHypothesis<'a> {
    pub category: &'a str,
    pub attribute: Attribute,
    pub relations: Vec<&'a OnEdge>,
    pub weight: f64,
}

/// Categorical belief over the classes of one detected object. `weights[i]`
/// belongs to class `i` of the owning belief's [`ClassTable`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectBelief {
    pub object_id: String,
    pub weights: Vec<f64>,
}

impl ObjectBelief {
    pub fn delta(object_id: impl Into<String>, n_classes: usize, class: usize) -> Self {
        let mut weights = vec![0.0; n_classes];
        weights[class] = 1.0;
        Self {
            object_id: object_id.into(),
            weights,
        }
    }

    pub fn uniform(object_id: impl Into<String>, n_classes: usize) -> Self {
        Self {
            object_id: object_id.into(),
            weights: vec![1.0 / n_classes as f64; n_classes],
        }
    }

    pub fn is_delta(&self) -> bool {
        self.weights.iter().filter(|&&w| w > 0.0).count() == 1
    }

    /// Index of the most probable class; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &w) in self.weights.iter().enumerate() {
            if w > self.weights[best] {
                best = i;
            }
        }
        best
    }

    /// Shannon entropy in bits, with 0·log 0 = 0.
    pub fn entropy_bits(&self) -> f64 {
        shannon_bits(&self.weights)
    }

    fn normalized(mut self) -> Result<Self, BeliefError> {
        let err = |reason: String| BeliefError::InvalidWeights {
            object: self.object_id.clone(),
            reason,
        };
        if let Some(w) = self
            .weights
            .iter()
            .find(|w| !w.is_finite() || **w < 0.0 || **w > 1.0 + WEIGHT_SUM_TOLERANCE)
        {
            return Err(err(format!("weight {w} outside [0, 1]")));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(err(format!("weights sum to {sum}")));
        }
        for w in &mut self.weights {
            *w /= sum;
        }
        Ok(self)
    }
}

pub fn shannon_bits(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}

/// Product-form belief over scene graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSceneBelief")]
pub struct SceneBelief {
    class_table: ClassTable,
    objects: Vec<ObjectBelief>,
    layout: Layout,
}

#[derive(Deserialize)]
struct RawSceneBelief {
    class_table: ClassTable,
    objects: Vec<ObjectBelief>,
    layout: Layout,
}

impl TryFrom<RawSceneBelief> for SceneBelief {
    type Error = BeliefError;

    fn try_from(r: RawSceneBelief) -> Result<Self, Self::Error> {
        SceneBelief::new(r.class_table, r.objects, r.layout)
    }
}

impl SceneBelief {
    /// Validates and renormalizes. Weights must already sum to 1 within
    /// [`WEIGHT_SUM_TOLERANCE`].
    pub fn new(
        class_table: ClassTable,
        objects: Vec<ObjectBelief>,
        layout: Layout,
    ) -> Result<Self, BeliefError> {
        let mut ids = BTreeSet::new();
        let mut normalized = Vec::with_capacity(objects.len());
        for o in objects {
            if !ids.insert(o.object_id.clone()) {
                return Err(BeliefError::InvalidScene(format!(
                    "duplicate object id {}",
                    o.object_id
                )));
            }
            if o.weights.len() != class_table.len() {
                return Err(BeliefError::InvalidWeights {
                    object: o.object_id.clone(),
                    reason: format!(
                        "{} weights for {} classes",
                        o.weights.len(),
                        class_table.len()
                    ),
                });
            }
            normalized.push(o.normalized()?);
        }
        layout.validate(&ids.iter().map(String::as_str).collect())?;
        Ok(Self {
            class_table,
            objects: normalized,
            layout,
        })
    }

    /// The zero-entropy belief that puts all mass on the scene's categories.
    pub fn certain(class_table: ClassTable, scene: &SceneGraph) -> Result<Self, BeliefError> {
        let objects = scene
            .objects
            .iter()
            .map(|o| {
                let idx = class_table
                    .index_of(&o.category)
                    .ok_or_else(|| BeliefError::UnknownCategory(o.category.clone()))?;
                Ok(ObjectBelief::delta(o.id.clone(), class_table.len(), idx))
            })
            .collect::<Result<Vec<_>, BeliefError>>()?;
        Self::new(class_table, objects, scene.layout.clone())
    }

    pub fn class_table(&self) -> &ClassTable {
        &self.class_table
    }

    pub fn objects(&self) -> &[ObjectBelief] {
        &self.objects
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn object(&self, id: &str) -> Option<&ObjectBelief> {
        self.objects.iter().find(|o| o.object_id == id)
    }

    pub fn hypotheses<'a>(&'a self, id: &str) -> Option<Vec<ObjectHypothesis<'a>>> {
        let ob = self.object(id)?;
        let relations: Vec<&OnEdge> = self
            .layout
            .on_edges
            .iter()
            .filter(|e| e.above == id || e.below == id)
            .collect();
        Some(
            ob.weights
                .iter()
                .enumerate()
                .map(|(i, &weight)| ObjectHypothesis {
                    category: self.class_table.label(i),
                    attribute: self.class_table.attribute(i),
                    relations: relations.clone(),
                    weight,
                })
                .collect(),
        )
    }

    /// Same identities, new perceived stacking structure.
    pub fn with_layout(&self, layout: Layout) -> Result<Self, BeliefError> {
        let ids: BTreeSet<&str> = self.objects.iter().map(|o| o.object_id.as_str()).collect();
        layout.validate(&ids)?;
        Ok(Self {
            layout,
            ..self.clone()
        })
    }

    fn scene_from(&self, mut choose: impl FnMut(&ObjectBelief) -> usize) -> SceneGraph {
        let objects = self
            .objects
            .iter()
            .map(|o| {
                let c = choose(o);
                SceneObject {
                    id: o.object_id.clone(),
                    category: self.class_table.label(c).to_string(),
                    attribute: self.class_table.attribute(c),
                }
            })
            .collect();
        SceneGraph {
            objects,
            layout: self.layout.clone(),
        }
    }

    /// Draws one scene graph: each object's category independently, with
    /// probability equal to its weight. Relations are copied unchanged.
    pub fn sample_scene<R: Rng + ?Sized>(&self, rng: &mut R) -> SceneGraph {
        self.scene_from(|o| sample_index(&o.weights, rng))
    }

    /// Per-object most-likely scene (ties to the first category).
    pub fn argmax_scene(&self) -> SceneGraph {
        self.scene_from(ObjectBelief::argmax)
    }

    /// Normalized entropy in [0, 1]; 0 for an empty belief.
    pub fn entropy(&self) -> f64 {
        entropy(self)
    }

    /// Collapses the picked object's belief onto the revealed category. A
    /// detection snapshot leaves identities unchanged.
    pub fn update_on_observation(&self, obs: &Observation) -> Result<Self, BeliefError> {
        match obs {
            Observation::DetectionSnapshot => Ok(self.clone()),
            Observation::PickedIdentity {
                object_id,
                category,
            } => {
                let class = self
                    .class_table
                    .index_of(category)
                    .ok_or_else(|| BeliefError::UnknownCategory(category.clone()))?;
                let pos = self
                    .objects
                    .iter()
                    .position(|o| &o.object_id == object_id)
                    .ok_or_else(|| BeliefError::UnknownObject(object_id.clone()))?;
                let mut next = self.clone();
                next.objects[pos] =
                    ObjectBelief::delta(object_id.clone(), self.class_table.len(), class);
                Ok(next)
            }
        }
    }

    /// Replaces every object's distribution with `(1 - mix) * p + mix * uniform`.
    pub fn blend_uniform(&self, mix: f64) -> Self {
        let k = self.class_table.len() as f64;
        let objects = self
            .objects
            .iter()
            .map(|o| ObjectBelief {
                object_id: o.object_id.clone(),
                weights: o
                    .weights
                    .iter()
                    .map(|&w| (1.0 - mix) * w + mix / k)
                    .collect(),
            })
            .collect();
        Self {
            objects,
            ..self.clone()
        }
    }
}

pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    WeightedIndex::new(weights)
        .expect("normalized weights")
        .sample(rng)
}

/// `n_objects · log2(n_classes)`, the entropy of an all-uniform belief.
pub fn max_entropy(n_objects: usize, n_classes: usize) -> f64 {
    n_objects as f64 * (n_classes as f64).log2()
}

/// Sum of per-object Shannon entropies divided by [`max_entropy`].
pub fn entropy(belief: &SceneBelief) -> f64 {
    if belief.is_empty() {
        return 0.0;
    }
    let total: f64 = belief.objects.iter().map(ObjectBelief::entropy_bits).sum();
    total / max_entropy(belief.len(), belief.class_table.len())
}

/// Bisection cap for [`blend_to_entropy`].
const MAX_BISECTION_STEPS: usize = 200;

/// Mixes `base` toward uniform with a single coefficient shared by all objects,
/// searching the coefficient by bisection until the normalized entropy is
/// within `tol` of `target_h`.
///
/// Entropy is concave along the segment to the uniform distribution and peaks
/// at its end, so it is nondecreasing in the coefficient; targets below the
/// base's own entropy are unreachable.
pub fn blend_to_entropy(
    base: &SceneBelief,
    target_h: f64,
    tol: f64,
) -> Result<SceneBelief, BeliefError> {
    assert!(
        (0.0..=1.0).contains(&target_h),
        "target entropy {target_h} outside [0, 1]"
    );
    assert!(tol > 0.0, "tolerance must be positive");
    if base.is_empty() {
        return if target_h <= tol {
            Ok(base.clone())
        } else {
            Err(BeliefError::InjectionUnreachable {
                target: target_h,
                achieved: 0.0,
            })
        };
    }
    let at = |mix: f64| base.blend_uniform(mix);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for mix in [lo, hi] {
        let b = at(mix);
        if (b.entropy() - target_h).abs() < tol {
            return Ok(b);
        }
    }
    if base.entropy() > target_h {
        return Err(BeliefError::InjectionUnreachable {
            target: target_h,
            achieved: base.entropy(),
        });
    }
    let mut best = at(0.5);
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        best = at(mid);
        let h = best.entropy();
        if (h - target_h).abs() < tol {
            return Ok(best);
        }
        if h < target_h {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(BeliefError::InjectionUnreachable {
        target: target_h,
        achieved: best.entropy(),
    })
}

/// Builds a belief of normalized entropy `target_h` (within `tol`) around the
/// true scene: every object gets `(1 - λ)·δ_true + λ·uniform` with a common λ,
/// so the true category stays the mode.
pub fn inject_entropy(
    class_table: &ClassTable,
    true_scene: &SceneGraph,
    target_h: f64,
    tol: f64,
) -> Result<SceneBelief, BeliefError> {
    let base = SceneBelief::certain(class_table.clone(), true_scene)?;
    blend_to_entropy(&base, target_h, tol)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn scene(cats: &[&str]) -> SceneGraph {
        let table = ClassTable::grocery();
        let surfaces: Vec<Surface> = (1..=cats.len())
            .map(|i| Surface::new(format!("table{i}"), SurfaceKind::Table))
            .collect();
        let objects = cats
            .iter()
            .enumerate()
            .map(|(i, c)| SceneObject {
                id: format!("o{}", i + 1),
                category: c.to_string(),
                attribute: table.attribute_of(c).unwrap(),
            })
            .collect();
        let edges = (1..=cats.len())
            .map(|i| OnEdge::new(format!("o{i}"), format!("table{i}")))
            .collect();
        SceneGraph {
            objects,
            layout: Layout::new(surfaces, edges, None),
        }
    }

    fn two_class_table() -> ClassTable {
        ClassTable::new(vec![
            ObjectClass {
                label: "x".into(),
                attribute: Attribute::Heavy,
            },
            ObjectClass {
                label: "y".into(),
                attribute: Attribute::Light,
            },
        ])
        .unwrap()
    }

    #[test]
    fn max_entropy_examples() {
        assert_eq!(max_entropy(3, 8), 9.0);
        assert_eq!(max_entropy(1, 2), 1.0);
        assert_eq!(max_entropy(5, 8), 15.0);
    }

    #[test]
    fn entropy_of_uniform_and_delta() {
        let t = ClassTable::grocery();
        let s = scene(&["soup-can", "cracker-box", "tuna-can"]);
        let uniform = SceneBelief::new(
            t.clone(),
            s.objects
                .iter()
                .map(|o| ObjectBelief::uniform(o.id.clone(), 8))
                .collect(),
            s.layout.clone(),
        )
        .unwrap();
        assert!((uniform.entropy() - 1.0).abs() < 1e-12);
        let certain = SceneBelief::certain(t, &s).unwrap();
        assert_eq!(certain.entropy(), 0.0);
    }

    #[test]
    fn entropy_of_even_split_is_one_over_log_classes() {
        let t = ClassTable::grocery();
        let s = scene(&["soup-can"]);
        let mut w = vec![0.0; 8];
        w[0] = 0.5;
        w[1] = 0.5;
        let b = SceneBelief::new(
            t,
            vec![ObjectBelief {
                object_id: "o1".into(),
                weights: w,
            }],
            s.layout,
        )
        .unwrap();
        assert!((b.entropy() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_belief_has_zero_entropy_and_samples_empty_scene() {
        let b = SceneBelief::new(ClassTable::grocery(), vec![], Layout::default()).unwrap();
        assert_eq!(b.entropy(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(b.sample_scene(&mut rng).objects.is_empty());
    }

    #[test]
    fn delta_sampling_is_deterministic() {
        let s = scene(&["soup-can", "sugar-box"]);
        let b = SceneBelief::certain(ClassTable::grocery(), &s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            assert_eq!(b.sample_scene(&mut rng), s);
        }
    }

    #[test]
    fn weighted_sampling_frequency_within_three_sigma() {
        // Binomial(10_000, 0.75): sd = sqrt(10_000 * 0.75 * 0.25) = 43.3, 3 sd = 0.013.
        let t = two_class_table();
        let layout = Layout::new(vec![], vec![], None);
        let b = SceneBelief::new(
            t,
            vec![ObjectBelief {
                object_id: "a".into(),
                weights: vec![0.75, 0.25],
            }],
            layout,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let hits = (0..10_000)
            .filter(|_| b.sample_scene(&mut rng).objects[0].category == "x")
            .count();
        let f = hits as f64 / 10_000.0;
        assert!((0.737..=0.763).contains(&f), "frequency {f}");
    }

    #[test]
    fn injection_endpoints() {
        let t = ClassTable::grocery();
        let s = scene(&["soup-can", "sugar-box", "meat-can"]);
        let zero = inject_entropy(&t, &s, 0.0, 1e-9).unwrap();
        assert_eq!(zero, SceneBelief::certain(t.clone(), &s).unwrap());
        let one = inject_entropy(&t, &s, 1.0, 1e-9).unwrap();
        assert!((one.entropy() - 1.0).abs() < 1e-9);
        for o in one.objects() {
            assert!(o.weights.iter().all(|w| (w - 0.125).abs() < 1e-12));
        }
    }

    #[test]
    fn injection_hits_half_and_keeps_mode() {
        let t = ClassTable::grocery();
        let s = scene(&["soup-can", "sugar-box", "meat-can", "cracker-box"]);
        let b = inject_entropy(&t, &s, 0.5, 1e-6).unwrap();
        assert!((b.entropy() - 0.5).abs() < 1e-6);
        for (ob, so) in b.objects().iter().zip(&s.objects) {
            assert_eq!(t.label(ob.argmax()), so.category);
        }
    }

    #[test]
    fn blending_below_base_entropy_is_unreachable() {
        let t = ClassTable::grocery();
        let s = scene(&["soup-can"]);
        let base = inject_entropy(&t, &s, 0.6, 1e-9).unwrap();
        match blend_to_entropy(&base, 0.2, 1e-6) {
            Err(BeliefError::InjectionUnreachable { achieved, .. }) => {
                assert!((achieved - 0.6).abs() < 1e-6)
            }
            other => panic!("expected unreachable, got {other:?}"),
        }
    }

    #[test]
    fn pick_observation_collapses_one_object() {
        let t = ClassTable::grocery();
        let s = scene(&["soup-can", "sugar-box", "meat-can"]);
        let b = inject_entropy(&t, &s, 0.4, 1e-9).unwrap();
        let obs = Observation::PickedIdentity {
            object_id: "o2".into(),
            category: "soup-can".into(),
        };
        let u = b.update_on_observation(&obs).unwrap();
        assert!(u.object("o2").unwrap().is_delta());
        assert_eq!(t.label(u.object("o2").unwrap().argmax()), "soup-can");
        assert_eq!(u.object("o1"), b.object("o1"));
        assert_eq!(u.object("o3"), b.object("o3"));
        assert!(u.entropy() <= b.entropy());
        // idempotent on an already-certain object
        assert_eq!(u.update_on_observation(&obs).unwrap(), u);
    }

    #[test]
    fn unknown_object_observation_is_desync_error() {
        let t = ClassTable::grocery();
        let s = scene(&["soup-can"]);
        let b = SceneBelief::certain(t, &s).unwrap();
        let obs = Observation::PickedIdentity {
            object_id: "zz".into(),
            category: "soup-can".into(),
        };
        assert!(matches!(
            b.update_on_observation(&obs),
            Err(BeliefError::UnknownObject(_))
        ));
    }

    #[test]
    fn construction_renormalizes_small_drift_and_rejects_large() {
        let t = two_class_table();
        let ok = SceneBelief::new(
            t.clone(),
            vec![ObjectBelief {
                object_id: "a".into(),
                weights: vec![0.7500001, 0.25],
            }],
            Layout::default(),
        )
        .unwrap();
        let s: f64 = ok.objects()[0].weights.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(SceneBelief::new(
            t,
            vec![ObjectBelief {
                object_id: "a".into(),
                weights: vec![0.5, 0.25]
            }],
            Layout::default()
        )
        .is_err());
    }

    #[test]
    fn hypotheses_share_relations() {
        let t = ClassTable::grocery();
        let s = scene(&["soup-can", "sugar-box"]);
        let b = inject_entropy(&t, &s, 0.3, 1e-9).unwrap();
        let hs = b.hypotheses("o1").unwrap();
        assert_eq!(hs.len(), 8);
        assert!(hs.windows(2).all(|w| w[0].relations == w[1].relations));
        assert_eq!(hs[0].relations, vec![&OnEdge::new("o1", "table1")]);
    }

    #[test]
    fn belief_json_round_trip() {
        let t = ClassTable::grocery();
        let s = scene(&["soup-can", "sugar-box"]);
        let b = inject_entropy(&t, &s, 0.3, 1e-9).unwrap();
        let json = serde_json::to_string(&b).unwrap();
        let back: SceneBelief = serde_json::from_str(&json).unwrap();
        assert_eq!(back, b);
    }
}
