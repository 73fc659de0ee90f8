//! Parsing of agent replies.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use verna_core::dsl::{extract_block, STL_CLOSE, STL_OPEN};

use crate::prompt::{WAYPOINTS_CLOSE, WAYPOINTS_OPEN};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PaReply {
    /// No specification block: the assistant needs more information.
    Question { text: String },
    /// `reasoning` is the reply without the block.
    Candidate { stl_text: String, reasoning: String },
}

/// Text outside the last `open ... close` block.
fn strip_last_block(reply: &str, open: &str, close: &str) -> String {
    let Some(start) = reply.rfind(open) else { return reply.trim().to_string() };
    let end = reply[start..].find(close).map_or(reply.len(), |i| start + i + close.len());
    format!("{}{}", reply[..start].trim_end(), reply[end..].trim_end()).trim().to_string()
}

pub fn parse_pa_reply(reply: &str) -> PaReply {
    match extract_block(reply, STL_OPEN, STL_CLOSE) {
        Some(stl_text) => PaReply::Candidate { stl_text, reasoning: strip_last_block(reply, STL_OPEN, STL_CLOSE) },
        None => PaReply::Question { text: reply.trim().to_string() },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "text", rename_all = "snake_case")]
pub enum Verdict {
    Aligned,
    Advice(String),
    /// Neither verdict token leads the reply; carries the reply.
    Malformed(String),
}

/// Reads the leading `ALIGNED` or `ADVICE:` token.
pub fn parse_verdict(reply: &str) -> Verdict {
    let t = reply.trim_start();
    if let Some(rest) = t.strip_prefix("ALIGNED") {
        if !rest.starts_with(|c: char| c.is_alphanumeric() || c == '_') {
            return Verdict::Aligned;
        }
    }
    if let Some(rest) = t.strip_prefix("ADVICE:") {
        let advice = rest.trim();
        if !advice.is_empty() {
            return Verdict::Advice(advice.to_string());
        }
    }
    Verdict::Malformed(reply.trim().to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WaypointError {
    #[error("missing {WAYPOINTS_OPEN} block")]
    Missing,
    #[error("empty {WAYPOINTS_OPEN} block")]
    Empty,
    #[error("line {line} of the waypoint block is not an `x y z` triple: `{text}`")]
    Malformed { line: usize, text: String },
}

/// Waypoints of the last `<WAYPOINTS>` block; blank lines are skipped and
/// commas are accepted as separators.
pub fn parse_waypoints(reply: &str) -> Result<Vec<[f64; 3]>, WaypointError> {
    let block = extract_block(reply, WAYPOINTS_OPEN, WAYPOINTS_CLOSE).ok_or(WaypointError::Missing)?;
    let mut out = Vec::new();
    for (i, line) in block.lines().enumerate() {
        let l = line.trim();
        if l.is_empty() {
            continue;
        }
        let nums: Vec<f64> = l
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| WaypointError::Malformed { line: i + 1, text: l.to_string() })?;
        match nums.as_slice() {
            [x, y, z] if nums.iter().all(|v| v.is_finite()) => out.push([*x, *y, *z]),
            _ => return Err(WaypointError::Malformed { line: i + 1, text: l.to_string() }),
        }
    }
    if out.is_empty() {
        return Err(WaypointError::Empty);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pa_replies() {
        let r = parse_pa_reply("The goal must be reached.\n<STL>\nSTL_formulas.inside_cuboid(\"goal\").eventually(0, 5)\n</STL>\nDone.");
        assert_eq!(
            r,
            PaReply::Candidate {
                stl_text: "STL_formulas.inside_cuboid(\"goal\").eventually(0, 5)".into(),
                reasoning: "The goal must be reached.\nDone.".into()
            }
        );
        assert_eq!(parse_pa_reply(" Which box do you mean? "), PaReply::Question { text: "Which box do you mean?".into() });
    }

    #[test]
    fn verdicts() {
        assert_eq!(parse_verdict("ALIGNED"), Verdict::Aligned);
        assert_eq!(parse_verdict("\nALIGNED. The path visits the goal."), Verdict::Aligned);
        assert_eq!(parse_verdict("ADVICE: visit the key before the chest"), Verdict::Advice("visit the key before the chest".into()));
        assert!(matches!(parse_verdict("The path looks fine to me."), Verdict::Malformed(_)));
        assert!(matches!(parse_verdict("ALIGNEDNESS"), Verdict::Malformed(_)));
        assert!(matches!(parse_verdict("ADVICE:   "), Verdict::Malformed(_)));
        assert!(matches!(parse_verdict("I think ALIGNED"), Verdict::Malformed(_)));
    }

    #[test]
    fn waypoint_blocks() {
        let ok = "Route:\n<WAYPOINTS>\n1 1 1\n2 2 1\n\n3, 3, 1\n4 4 1.5\n5 5 2\n</WAYPOINTS>";
        assert_eq!(parse_waypoints(ok).unwrap().len(), 5);
        assert_eq!(
            parse_waypoints("<WAYPOINTS>\n1 1 1\n2 two 1\n</WAYPOINTS>"),
            Err(WaypointError::Malformed { line: 2, text: "2 two 1".into() })
        );
        assert_eq!(
            parse_waypoints("<WAYPOINTS>\n1 1\n</WAYPOINTS>"),
            Err(WaypointError::Malformed { line: 1, text: "1 1".into() })
        );
        assert!(parse_waypoints("<WAYPOINTS>\n1 1 1\n2 2 1\n9 nan 1\n</WAYPOINTS>").unwrap_err().to_string().contains("line 3"));
        assert_eq!(parse_waypoints("<WAYPOINTS>\n\n</WAYPOINTS>"), Err(WaypointError::Empty));
        assert_eq!(parse_waypoints("no block"), Err(WaypointError::Missing));
    }
}
