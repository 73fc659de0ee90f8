//! Path analyzer: per-object containment summary of a trajectory.

use serde::{Deserialize, Serialize};
use verna_core::scene::Scene;
use verna_core::Trajectory;

/// Containment of the path in one object's bounding box. Intervals are
/// inclusive step ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "intervals", rename_all = "snake_case")]
pub enum Containment {
    AlwaysInside,
    NeverInside,
    InsideDuring(Vec<(usize, usize)>),
}

impl Containment {
    /// Classifies a per-step containment bit-vector.
    pub fn from_bits(bits: &[bool]) -> Self {
        let mut runs = Vec::new();
        let mut open: Option<usize> = None;
        for (k, &b) in bits.iter().enumerate() {
            match (b, open) {
                (true, None) => open = Some(k),
                (false, Some(s)) => {
                    runs.push((s, k - 1));
                    open = None;
                }
                _ => {}
            }
        }
        if let Some(s) = open {
            runs.push((s, bits.len() - 1));
        }
        match runs.as_slice() {
            [] => Containment::NeverInside,
            [(0, e)] if *e + 1 == bits.len() => Containment::AlwaysInside,
            _ => Containment::InsideDuring(runs),
        }
    }

    /// Inverse of [`Containment::from_bits`] for a path of `len` steps.
    pub fn to_bits(&self, len: usize) -> Vec<bool> {
        match self {
            Containment::AlwaysInside => vec![true; len],
            Containment::NeverInside => vec![false; len],
            Containment::InsideDuring(runs) => {
                let mut bits = vec![false; len];
                for &(s, e) in runs {
                    for b in &mut bits[s..=e.min(len.saturating_sub(1))] {
                        *b = true;
                    }
                }
                bits
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectReport {
    pub name: String,
    pub containment: Containment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathReport {
    pub objects: Vec<ObjectReport>,
    /// Last step index of the analyzed path.
    pub last_step: usize,
    pub dt: f64,
    pub rendered_text: String,
}

impl PathReport {
    pub fn get(&self, name: &str) -> Option<&Containment> {
        self.objects.iter().find(|o| o.name == name).map(|o| &o.containment)
    }

    /// First step inside `name`, if any.
    pub fn first_entry(&self, name: &str) -> Option<usize> {
        match self.get(name)? {
            Containment::AlwaysInside => Some(0),
            Containment::NeverInside => None,
            Containment::InsideDuring(runs) => runs.first().map(|r| r.0),
        }
    }
}

fn seconds(k: usize, dt: f64) -> String {
    format!("{:.1} s", k as f64 * dt)
}

fn render(objects: &[ObjectReport], last_step: usize, dt: f64) -> String {
    let mut out = format!("Path of {} steps (0..{last_step}), {dt} s per step.\n", last_step + 1);
    for o in objects {
        let desc = match &o.containment {
            Containment::AlwaysInside => format!("inside at all times (steps 0..{last_step}, {}..{})", seconds(0, dt), seconds(last_step, dt)),
            Containment::NeverInside => "never inside".to_string(),
            Containment::InsideDuring(runs) => {
                let parts: Vec<String> =
                    runs.iter().map(|&(s, e)| format!("steps {s}..{e} ({}..{})", seconds(s, dt), seconds(e, dt))).collect();
                format!("inside only during {}", parts.join(", "))
            }
        };
        out.push_str(&format!("- {}: {desc}\n", o.name));
    }
    out
}

/// Classifies the path against every scene object, in scene order.
/// Positions are the first three state components.
pub fn paz_describe(traj: &Trajectory, scene: &Scene) -> PathReport {
    let positions: Vec<[f64; 3]> = traj.states().map(|s| [s[0], s[1], s[2]]).collect();
    let objects = scene
        .objects
        .iter()
        .map(|o| {
            let bits: Vec<bool> = positions.iter().map(|p| o.contains(*p)).collect();
            ObjectReport { name: o.name.clone(), containment: Containment::from_bits(&bits) }
        })
        .collect::<Vec<_>>();
    let last_step = traj.last_step();
    let dt = traj.dt();
    let rendered_text = render(&objects, last_step, dt);
    PathReport { objects, last_step, dt, rendered_text }
}
