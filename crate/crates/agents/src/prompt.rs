//! System prompts. Every prompt is a pure function of the scene and role.

use verna_core::scene::{ObjectTag, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PromptRole {
    /// Planning assistant writing STL.
    Pa,
    SynCheQ,
    SemCheQ,
    /// Planning assistant writing waypoints directly (baseline).
    Conventional,
}

pub const WAYPOINTS_OPEN: &str = "<WAYPOINTS>";
pub const WAYPOINTS_CLOSE: &str = "</WAYPOINTS>";

const STATE: &str = "\
The drone is a point mass moving in 3D with limited velocity and acceleration. Objects and regions \
are axis-aligned boxes given by their x, y and z ranges in meters. Time is measured in seconds from \
the start of the mission.";

const LIBRARY: &str = "\
Available functions and operators (phi, psi are specifications):
- STL_formulas.inside_cuboid(\"name\"): the drone is inside the box of the named object.
- STL_formulas.outside_cuboid(\"name\"): the drone is outside the box of the named object.
- phi.eventually(t1, t2): phi holds at some time between t1 and t2 seconds.
- phi.always(t1, t2): phi holds at every time between t1 and t2 seconds.
- phi.until(psi, t1, t2): psi holds at some time between t1 and t2 seconds, and phi holds at every time before that.
- phi & psi: both hold. phi | psi: at least one holds. ~phi: phi does not hold.
- Parentheses group sub-expressions; & binds tighter than |.";

/// Objects used only by the worked examples.
pub const EXAMPLE_OBJECTS: [(&str, [f64; 6]); 6] = [
    ("hall", [0.0, 20.0, 0.0, 20.0, 0.0, 4.0]),
    ("landing_pad", [15.0, 17.0, 15.0, 17.0, 0.0, 1.0]),
    ("tree", [8.0, 10.0, 8.0, 10.0, 0.0, 4.0]),
    ("package", [2.0, 3.0, 12.0, 13.0, 0.0, 1.5]),
    ("gate", [10.0, 11.0, 4.0, 6.0, 0.0, 4.0]),
    ("charger", [18.0, 19.0, 1.0, 2.0, 0.0, 1.0]),
];

/// `(command, reasoning, specification)` worked examples.
pub const EXAMPLES: [(&str, &str, &str); 3] = [
    (
        "Land on the landing pad within 20 seconds and never touch the tree.",
        "The goal is the landing_pad, reached at some time in [0, 20]. The tree must be avoided during the whole mission.",
        "STL_formulas.inside_cuboid(\"landing_pad\").eventually(0, 20) & STL_formulas.outside_cuboid(\"tree\").always(0, 20)",
    ),
    (
        "Pick up the package in the first 15 seconds, then fly through the gate to the charger. The gate opens once you have the package. Stay in the hall.",
        "The gate is closed until the package is reached, so the drone stays outside the gate until it is inside the package box, within 15 s. \
         Afterwards it must reach the charger; 40 s leaves enough time. The hall constraint holds throughout.",
        "STL_formulas.outside_cuboid(\"gate\").until(STL_formulas.inside_cuboid(\"package\"), 0, 15) & STL_formulas.inside_cuboid(\"charger\").eventually(0, 40) & STL_formulas.inside_cuboid(\"hall\").always(0, 40)",
    ),
    (
        "Go to either the charger or the landing pad in 30 seconds, but do not fly over the tree after 10 seconds.",
        "Either destination is acceptable, which is a disjunction. The tree constraint only applies from 10 s to the end.",
        "(STL_formulas.inside_cuboid(\"charger\") | STL_formulas.inside_cuboid(\"landing_pad\")).eventually(0, 30) & (~STL_formulas.inside_cuboid(\"tree\")).always(10, 30)",
    ),
];

const REPORT_FORMAT: &str = "\
The path report lists every object of the environment on its own line with one of three categories:
- \"inside at all times\": the path stays in that object's bounding box at all times.
- \"never inside\": the path is outside that object's bounding box at all times.
- \"inside only during steps a..b (ta..tb)\": the path is inside the bounding box only during the listed \
time steps (inclusive), also given in seconds; several windows may be listed.";

fn tag_label(tag: ObjectTag) -> &'static str {
    match tag {
        ObjectTag::Goal => "goal",
        ObjectTag::Obstacle => "obstacle",
        ObjectTag::Region => "region",
        ObjectTag::Item => "item",
    }
}

fn range(lo: f64, hi: f64) -> String {
    format!("[{lo}, {hi}]")
}

/// Markdown table with one row per object, in scene order.
pub fn object_table(scene: &Scene) -> String {
    let mut out = String::from("| object | kind | x | y | z |\n|---|---|---|---|---|\n");
    for o in &scene.objects {
        let b = o.bounds.bounds();
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            o.name,
            tag_label(o.tag),
            range(b[0], b[1]),
            range(b[2], b[3]),
            range(b[4], b[5])
        ));
    }
    out
}

fn environment(scene: &Scene) -> String {
    let w = scene.workspace.bounds();
    let s = scene.start;
    format!(
        "Environment \"{}\": the flyable space is x {}, y {}, z {}. The drone starts at rest at ({}, {}, {}).\n\n{}",
        scene.scenario_id,
        range(w[0], w[1]),
        range(w[2], w[3]),
        range(w[4], w[5]),
        s[0],
        s[1],
        s[2],
        object_table(scene)
    )
}

fn examples() -> String {
    let mut out = String::from("Examples (they use a different environment; only use the objects of the table above):\n");
    for (i, (cmd, why, stl)) in EXAMPLES.iter().enumerate() {
        out.push_str(&format!("\nExample {}.\nCommand: {cmd}\nReasoning: {why}\n<STL>\n{stl}\n</STL>\n", i + 1));
    }
    out
}

pub fn build_system_prompt(scene: &Scene, role: PromptRole) -> String {
    let env = environment(scene);
    match role {
        PromptRole::Pa => format!(
            "You are the planning assistant of a drone. You translate the user's natural-language mission into a \
             signal temporal logic (STL) specification; an optimizer then computes a path that satisfies it.\n\n\
             {STATE}\n\n{env}\n{LIBRARY}\n\n{}\n\
             Think step by step before answering: name the objects the command refers to, decide the time windows, \
             then compose the formula. Show this reasoning to the user.\n\
             If the command is ambiguous or information is missing, ask the user a clarifying question and do not \
             write a specification yet.\n\
             When you are confident, put the complete specification, and nothing else, between <STL> and </STL>. \
             Use exactly one such block per answer.\n",
            examples()
        ),
        PromptRole::SynCheQ => format!(
            "You are the syntax checker of a drone planner. You receive an STL specification written in the language \
             below together with an error message, either from the parser or from the optimizer.\n\n\
             {STATE}\n\n{env}\n{LIBRARY}\n\n{}\n\
             If the error comes from the parser, fix the syntax only: do not change the semantics of the specification. \
             Use only the functions above and the object names of the table.\n\
             If the error says the specification is infeasible, make the smallest change that lets the optimizer find a \
             path (for example a longer time window) while keeping the intent of the mission.\n\
             If you find nothing to fix, return the original specification unchanged.\n\
             Explain the problem briefly, then put the full corrected specification between <STL> and </STL>.\n",
            examples()
        ),
        PromptRole::SemCheQ => format!(
            "You are the semantics checker of a drone planner. You receive the user's mission, the conversation with \
             the planning assistant, and a report describing the path computed from the assistant's specification.\n\n\
             {STATE}\n\n{env}\n{REPORT_FORMAT}\n\n\
             Decide whether the path accomplishes the mission: the right objects are visited or avoided, in the right \
             order and within the requested times.\n\
             Think it through, then answer with the verdict first. Start the reply with ALIGNED if the path fulfils the \
             mission. Otherwise start it with ADVICE: followed by concrete advice to the planning assistant on how to \
             change the specification.\n"
        ),
        PromptRole::Conventional => format!(
            "You are the planning assistant of a drone. You translate the user's natural-language mission directly into \
             a path given as a list of waypoints.\n\n\
             {STATE}\n\n{env}\n\
             The drone flies to the waypoints in order, switching to the next waypoint at a fixed control rate. \
             Use enough waypoints for smooth motion and keep every waypoint inside the flyable space.\n\n\
             Example answer:\n<WAYPOINTS>\n1.0 1.0 1.0\n2.0 1.5 1.0\n3.0 2.0 1.2\n</WAYPOINTS>\n\n\
             Think step by step before answering: name the objects the command refers to and plan a route around \
             the obstacles.\n\
             If the command is ambiguous, ask the user a clarifying question instead.\n\
             When you are confident, put the waypoints between {WAYPOINTS_OPEN} and {WAYPOINTS_CLOSE}, one `x y z` \
             triple per line.\n"
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use verna_core::dsl::{parse, DslSource};
    use verna_core::scene::{bundled_scene, SceneObject};
    use verna_core::Cuboid;

    fn table_rows(prompt: &str) -> Vec<&str> {
        prompt.lines().filter(|l| l.starts_with("| ") && !l.starts_with("| object")).collect()
    }

    #[test]
    fn every_object_appears_once_in_the_table() {
        for id in ["reach_avoid", "treasure_hunt"] {
            let scene = bundled_scene(id).unwrap();
            for role in [PromptRole::Pa, PromptRole::SynCheQ, PromptRole::SemCheQ, PromptRole::Conventional] {
                let p = build_system_prompt(&scene, role);
                let rows = table_rows(&p);
                assert_eq!(rows.len(), scene.objects.len());
                for o in &scene.objects {
                    let hits = rows.iter().filter(|r| r.split('|').nth(1).map(str::trim) == Some(o.name.as_str())).count();
                    assert_eq!(hits, 1, "{id} {role:?} {}", o.name);
                }
                assert_eq!(p, build_system_prompt(&scene, role));
            }
        }
    }

    #[test]
    fn role_specific_content() {
        let scene = bundled_scene("treasure_hunt").unwrap();
        let pa = build_system_prompt(&scene, PromptRole::Pa);
        for f in ["inside_cuboid", "outside_cuboid", "eventually", "always", "until", " & ", " | ", "~phi"] {
            assert!(pa.contains(f), "{f}");
        }
        assert!(pa.matches("<STL>\n").count() >= 2);
        assert!(pa.contains("step by step"));
        assert!(build_system_prompt(&scene, PromptRole::SynCheQ).contains("do not change the semantics"));
        let sem = build_system_prompt(&scene, PromptRole::SemCheQ);
        for c in ["\"inside at all times\"", "\"never inside\"", "\"inside only during steps"] {
            assert!(sem.contains(c), "{c}");
        }
        assert!(sem.contains("ALIGNED") && sem.contains("ADVICE:"));
        assert!(build_system_prompt(&scene, PromptRole::Conventional).contains(WAYPOINTS_OPEN));
    }

    #[test]
    fn worked_examples_parse_in_their_environment() {
        let mut scene = bundled_scene("reach_avoid").unwrap();
        scene.workspace = Cuboid::from_bounds(EXAMPLE_OBJECTS[0].1).unwrap();
        scene.objects = EXAMPLE_OBJECTS
            .iter()
            .map(|(n, b)| SceneObject { name: n.to_string(), bounds: Cuboid::from_bounds(*b).unwrap(), tag: ObjectTag::Region })
            .collect();
        for (_, _, stl) in EXAMPLES {
            parse(&DslSource::new(stl, &scene, 0.5)).unwrap_or_else(|e| panic!("{}", e.render(stl)));
        }
    }
}
