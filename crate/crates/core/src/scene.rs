//! Scene abstraction: named axis-aligned bounding boxes inside a workspace.
//!
//! Scenes are stored as JSON:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "scenario_id": "reach_avoid",
//!   "workspace": [xmin, xmax, ymin, ymax, zmin, zmax],
//!   "start": [x, y, z],
//!   "objects": [ { "name": "goal", "tag": "goal", "bounds": [xmin, xmax, ymin, ymax, zmin, zmax] } ],
//!   "mission": { "goals": [], "obstacles": [], "sequence": [], "keep_in": [], "unlock": { "trigger": "key", "removes": ["door"] } }
//! }
//! ```
//!
//! `mission` is optional; without it goals and obstacles are taken from the
//! object tags.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stl::Cuboid;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read scene file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scene file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scene: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("unknown object '{0}'")]
    UnknownObject(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectTag {
    Goal,
    Obstacle,
    Region,
    Item,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub name: String,
    pub bounds: Cuboid<f64>,
    pub tag: ObjectTag,
}

impl SceneObject {
    pub fn contains(&self, p: [f64; 3]) -> bool {
        self.bounds.contains(p)
    }
}

/// Closed-box containment of `p` in `obj`.
pub fn contains(obj: &SceneObject, p: [f64; 3]) -> bool {
    obj.contains(p)
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Unlock {
    pub trigger: String,
    pub removes: Vec<String>,
}

/// What counts as success in a scene; used by the experiment metrics.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Mission {
    #[serde(default)]
    pub goals: Vec<String>,
    #[serde(default)]
    pub obstacles: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sequence: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keep_in: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unlock: Option<Unlock>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub scenario_id: String,
    pub workspace: Cuboid<f64>,
    pub start: [f64; 3],
    pub objects: Vec<SceneObject>,
    pub mission: Option<Mission>,
}

#[derive(Serialize, Deserialize)]
struct ObjectFile {
    name: String,
    tag: ObjectTag,
    bounds: [f64; 6],
}

#[derive(Serialize, Deserialize)]
struct SceneFile {
    schema_version: u32,
    scenario_id: String,
    workspace: [f64; 6],
    start: [f64; 3],
    objects: Vec<ObjectFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mission: Option<Mission>,
}

fn identifier_safe(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Scene {
    pub fn object(&self, name: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.objects.iter().map(|o| o.name.as_str())
    }

    /// The object whose bounds are exactly `c`, if any.
    pub fn object_with_bounds(&self, c: &Cuboid<f64>) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.bounds == *c)
    }

    /// Mission with tag-derived defaults filled in.
    pub fn mission(&self) -> Mission {
        let mut m = self.mission.clone().unwrap_or_default();
        if m.goals.is_empty() {
            m.goals = self.tagged(ObjectTag::Goal);
        }
        if m.obstacles.is_empty() {
            m.obstacles = self.tagged(ObjectTag::Obstacle);
        }
        m
    }

    fn tagged(&self, tag: ObjectTag) -> Vec<String> {
        self.objects.iter().filter(|o| o.tag == tag).map(|o| o.name.clone()).collect()
    }

    /// Copy of the scene without the named objects.
    pub fn unlocked_variant(&self, removed: &[&str]) -> Result<Scene, SceneError> {
        if let Some(missing) = removed.iter().find(|n| self.object(n).is_none()) {
            return Err(SceneError::UnknownObject(missing.to_string()));
        }
        let mut out = self.clone();
        out.objects.retain(|o| !removed.contains(&o.name.as_str()));
        Ok(out)
    }

    fn validate(&self) -> Result<(), SceneError> {
        let mut problems = Vec::new();
        let (lo, hi) = (self.workspace.min(), self.workspace.max());
        if !(0..3).all(|d| self.start[d] > lo[d] && self.start[d] < hi[d]) {
            problems.push(format!("start {:?} is not strictly inside the workspace", self.start));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if !identifier_safe(&o.name) {
                problems.push(format!("object name '{}' is not identifier-safe", o.name));
            }
            if self.objects[..i].iter().any(|p| p.name == o.name) {
                problems.push(format!("duplicate object name '{}'", o.name));
            }
            if !o.bounds.intersects(&self.workspace) {
                problems.push(format!("object '{}' lies outside the workspace", o.name));
            }
        }
        if let Some(m) = &self.mission {
            let unlock_names = m.unlock.iter().flat_map(|u| std::iter::once(&u.trigger).chain(&u.removes));
            for name in m.goals.iter().chain(&m.obstacles).chain(&m.sequence).chain(&m.keep_in).chain(unlock_names) {
                if self.object(name).is_none() {
                    problems.push(format!("mission refers to unknown object '{name}'"));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SceneError::Validation(problems))
        }
    }
}

fn cuboid(bounds: [f64; 6], what: &str, problems: &mut Vec<String>) -> Option<Cuboid<f64>> {
    match Cuboid::from_bounds(bounds) {
        Ok(c) => Some(c),
        Err(_) => {
            problems.push(format!("{what} has degenerate bounds {bounds:?}"));
            None
        }
    }
}

pub fn load_scene_bytes(bytes: &[u8]) -> Result<Scene, SceneError> {
    let file: SceneFile = serde_json::from_slice(bytes)?;
    let mut problems = Vec::new();
    if file.schema_version != SCHEMA_VERSION {
        problems.push(format!("unsupported schema_version {}", file.schema_version));
    }
    let workspace = cuboid(file.workspace, "workspace", &mut problems);
    let objects: Vec<_> = file
        .objects
        .into_iter()
        .filter_map(|o| {
            let bounds = cuboid(o.bounds, &format!("object '{}'", o.name), &mut problems)?;
            Some(SceneObject { name: o.name, bounds, tag: o.tag })
        })
        .collect();
    let (Some(workspace), true) = (workspace, problems.is_empty()) else {
        return Err(SceneError::Validation(problems));
    };
    let scene = Scene {
        scenario_id: file.scenario_id,
        workspace,
        start: file.start,
        objects,
        mission: file.mission,
    };
    scene.validate()?;
    Ok(scene)
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    load_scene_bytes(&std::fs::read(path)?)
}

pub fn emit_scene(scene: &Scene) -> String {
    let file = SceneFile {
        schema_version: SCHEMA_VERSION,
        scenario_id: scene.scenario_id.clone(),
        workspace: scene.workspace.bounds(),
        start: scene.start,
        objects: scene
            .objects
            .iter()
            .map(|o| ObjectFile { name: o.name.clone(), tag: o.tag, bounds: o.bounds.bounds() })
            .collect(),
        mission: scene.mission.clone(),
    };
    serde_json::to_string_pretty(&file).expect("scene serialization cannot fail")
}

const BUNDLED: &[(&str, &str)] = &[
    ("reach_avoid", include_str!("../scenes/reach_avoid.json")),
    ("treasure_hunt", include_str!("../scenes/treasure_hunt.json")),
];

pub fn bundled_scene_ids() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(id, _)| *id)
}

pub fn bundled_scene(id: &str) -> Option<Scene> {
    let (_, text) = BUNDLED.iter().find(|(name, _)| *name == id)?;
    Some(load_scene_bytes(text.as_bytes()).expect("bundled scenes are valid"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_reach_avoid() {
        let s = bundled_scene("reach_avoid").unwrap();
        let tags: Vec<_> = s.objects.iter().map(|o| o.tag).collect();
        assert_eq!(tags.iter().filter(|t| **t == ObjectTag::Goal).count(), 1);
        assert!(tags.iter().filter(|t| **t == ObjectTag::Obstacle).count() >= 5);
    }

    #[test]
    fn bundled_treasure_hunt() {
        let s = bundled_scene("treasure_hunt").unwrap();
        for name in ["key", "door", "chest", "room"] {
            assert!(s.object(name).is_some(), "{name}");
        }
        assert!(s.names().filter(|n| n.starts_with("wall")).count() >= 2);
        assert_eq!(s.mission().sequence, ["key", "door", "chest"]);
    }

    #[test]
    fn duplicate_names_fail_validation() {
        let text = r#"{"schema_version":1,"scenario_id":"x","workspace":[0,1,0,1,0,1],"start":[0.5,0.5,0.5],
            "objects":[{"name":"a","tag":"goal","bounds":[0,1,0,1,0,1]},{"name":"a","tag":"item","bounds":[0,1,0,1,0,1]}]}"#;
        match load_scene_bytes(text.as_bytes()) {
            Err(SceneError::Validation(p)) => assert!(p.iter().any(|m| m.contains("duplicate"))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validation_lists_every_problem() {
        let text = r#"{"schema_version":1,"scenario_id":"x","workspace":[0,1,0,1,0,1],"start":[2,0.5,0.5],
            "objects":[{"name":"1bad","tag":"goal","bounds":[5,6,5,6,5,6]}]}"#;
        match load_scene_bytes(text.as_bytes()) {
            Err(SceneError::Validation(p)) => assert_eq!(p.len(), 3, "{p:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn containment_is_closed() {
        let obj = SceneObject {
            name: "b".into(),
            bounds: Cuboid::new([0.0; 3], [1.0; 3]).unwrap(),
            tag: ObjectTag::Region,
        };
        assert!(contains(&obj, [1.0, 1.0, 0.0]));
        assert!(contains(&obj, [0.5; 3]));
        assert!(!contains(&obj, [5.0, 0.5, 0.5]));
    }

    #[test]
    fn unlocked_variant_removes_only_named_objects() {
        let s = bundled_scene("treasure_hunt").unwrap();
        let open = s.unlocked_variant(&["door"]).unwrap();
        assert!(open.object("door").is_none());
        assert_eq!(open.objects.len(), s.objects.len() - 1);
        assert!(s.object("door").is_some());
        assert_eq!(s.unlocked_variant(&[]).unwrap(), s);
        assert!(matches!(s.unlocked_variant(&["portal"]), Err(SceneError::UnknownObject(n)) if n == "portal"));
    }

    #[test]
    fn emit_then_load_round_trips() {
        for id in bundled_scene_ids() {
            let s = bundled_scene(id).unwrap();
            assert_eq!(load_scene_bytes(emit_scene(&s).as_bytes()).unwrap(), s);
        }
    }
}
