//! LP (CPLEX-style) and fixed-format MPS writers.
//!
//! Output is a pure function of the model: variables and rows are written in
//! index order and numbers in their shortest round-trip form (MPS numbers are
//! shortened further to fit the 12-character fields).

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::model::{MicpModel, Sense, VarKind};
use crate::PlanError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFormat {
    Lp,
    Mps,
}

impl std::str::FromStr for ModelFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lp" => Ok(ModelFormat::Lp),
            "mps" => Ok(ModelFormat::Mps),
            other => Err(format!("unknown model format '{other}' (expected lp or mps)")),
        }
    }
}

impl ModelFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ModelFormat::Lp => "lp",
            ModelFormat::Mps => "mps",
        }
    }
}

pub fn emit_model(m: &MicpModel, fmt: ModelFormat) -> Result<String, PlanError> {
    match fmt {
        ModelFormat::Lp => emit_lp(m),
        ModelFormat::Mps => emit_mps(m),
    }
}

fn num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v}")
    }
}

fn lp_bound(v: f64) -> String {
    if v == f64::INFINITY {
        "+infinity".into()
    } else if v == f64::NEG_INFINITY {
        "-infinity".into()
    } else {
        num(v)
    }
}

fn lp_name_ok(n: &str) -> bool {
    let first = n.chars().next();
    !n.is_empty()
        && n.len() <= 255
        && !matches!(first, Some('0'..='9' | '.' | 'e' | 'E'))
        && n.chars().all(|c| c.is_ascii_alphanumeric() || "_!\"#$%&()/,.;?@'`{}|~".contains(c))
}

fn check_names(m: &MicpModel, ok: impl Fn(&str) -> bool, what: &str) -> Result<(), PlanError> {
    for n in m.vars.iter().map(|v| &v.name).chain(m.rows.iter().map(|r| &r.name)) {
        if !ok(n) {
            return Err(PlanError::UnsupportedFeature(format!("name '{n}' is not valid in {what}")));
        }
    }
    Ok(())
}

/// Appends `sign coef name` terms, wrapping long lines.
fn lp_terms(out: &mut String, terms: impl Iterator<Item = (f64, String)>, first_line_len: usize) {
    let mut line = first_line_len;
    let mut first = true;
    for (c, t) in terms {
        let piece = if first && c >= 0.0 { format!(" {} {t}", num(c)) } else { format!(" {} {} {t}", if c < 0.0 { '-' } else { '+' }, num(c.abs())) };
        if line + piece.len() > 200 {
            out.push_str("\n   ");
            line = 3;
        }
        out.push_str(&piece);
        line += piece.len();
        first = false;
    }
}

fn emit_lp(m: &MicpModel) -> Result<String, PlanError> {
    check_names(m, lp_name_ok, "the LP format")?;
    let name = |j: usize| m.vars[j].name.clone();
    let mut out = String::from("\\ verna trajectory model\nMinimize\n obj:");
    let obj = &m.objective;
    let mut lin: Vec<(f64, String)> = obj.linear.iter().map(|(j, c)| (*c, name(*j))).collect();
    if lin.is_empty() && obj.quad.is_empty() {
        lin.push((0.0, m.vars.first().map(|v| v.name.clone()).unwrap_or_default()));
        if m.vars.is_empty() {
            lin.clear();
            out.push_str(" 0");
        }
    }
    lp_terms(&mut out, lin.into_iter(), 5);
    if !obj.quad.is_empty() {
        out.push_str(if obj.linear.is_empty() { " [" } else { " + [" });
        let terms = obj.quad.iter().map(|(i, j, c)| {
            let t = if i == j { format!("{} ^ 2", name(*i)) } else { format!("{} * {}", name(*i), name(*j)) };
            (2.0 * c, t)
        });
        lp_terms(&mut out, terms, 80);
        out.push_str(" ] / 2");
    }
    if obj.constant != 0.0 {
        let _ = write!(out, " {} {}", if obj.constant < 0.0 { '-' } else { '+' }, num(obj.constant.abs()));
    }
    out.push_str("\nSubject To\n");
    for r in &m.rows {
        let _ = write!(out, " {}:", r.name);
        lp_terms(&mut out, r.coeffs.iter().map(|(j, c)| (*c, name(*j))), r.name.len() + 2);
        let op = match r.sense {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        };
        let _ = writeln!(out, " {op} {}", num(r.rhs));
    }
    out.push_str("Bounds\n");
    for v in m.vars.iter().filter(|v| v.kind == VarKind::Continuous) {
        if v.lb == v.ub {
            let _ = writeln!(out, " {} = {}", v.name, num(v.lb));
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", lp_bound(v.lb), v.name, lp_bound(v.ub));
        }
    }
    let bins: Vec<&str> = m.vars.iter().filter(|v| v.kind == VarKind::Binary).map(|v| v.name.as_str()).collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for chunk in bins.chunks(10) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    Ok(out)
}

/// Shortest text for `v` that fits a 12-character MPS field.
fn mps_num(v: f64) -> String {
    let s = num(v);
    if s.len() <= 12 {
        return s;
    }
    for prec in (0..=10).rev() {
        let e = format!("{v:.prec$e}");
        if e.len() <= 12 {
            return e;
        }
    }
    format!("{v:.0e}")
}

fn mps_name_ok(n: &str) -> bool {
    !n.is_empty() && n.len() <= 8 && n.chars().all(|c| c.is_ascii_graphic()) && !n.starts_with('$')
}

/// One fixed-format data line: field 1 at column 2, 2 at 5, 3 at 15, 4 at 25.
fn mps_line(out: &mut String, f1: &str, f2: &str, f3: &str, f4: &str) {
    let line = format!(" {f1:<2} {f2:<8}  {f3:<8}  {f4}");
    out.push_str(line.trim_end());
    out.push('\n');
}

fn emit_mps(m: &MicpModel) -> Result<String, PlanError> {
    check_names(m, mps_name_ok, "fixed-format MPS (at most 8 characters, no spaces)")?;
    if m.objective.constant != 0.0 {
        return Err(PlanError::UnsupportedFeature("objective constant in MPS (readers disagree on its sign)".into()));
    }
    if m.vars.iter().any(|v| v.name == "OBJ") || m.rows.iter().any(|r| r.name == "OBJ") {
        return Err(PlanError::UnsupportedFeature("name OBJ is reserved for the objective row".into()));
    }
    let mut out = String::from("NAME          VERNA\nROWS\n N  OBJ\n");
    for r in &m.rows {
        let s = match r.sense {
            Sense::Le => "L",
            Sense::Eq => "E",
            Sense::Ge => "G",
        };
        let _ = writeln!(out, " {s}  {}", r.name);
    }
    let mut cols: Vec<Vec<(String, f64)>> = vec![Vec::new(); m.vars.len()];
    for (j, c) in &m.objective.linear {
        cols[*j].push(("OBJ".into(), *c));
    }
    for r in &m.rows {
        for (j, c) in &r.coeffs {
            cols[*j].push((r.name.clone(), *c));
        }
    }
    out.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut marker = 0;
    for (j, v) in m.vars.iter().enumerate() {
        let is_int = v.kind == VarKind::Binary;
        if is_int != in_int {
            let tag = if is_int { "'INTORG'" } else { "'INTEND'" };
            let _ = writeln!(out, "    M{marker:<7}  'MARKER'                 {tag}");
            marker += 1;
            in_int = is_int;
        }
        if cols[j].is_empty() {
            mps_line(&mut out, "", &v.name, "OBJ", "0");
        }
        for (row, c) in &cols[j] {
            mps_line(&mut out, "", &v.name, row, &mps_num(*c));
        }
    }
    if in_int {
        let _ = writeln!(out, "    M{marker:<7}  'MARKER'                 'INTEND'");
    }
    out.push_str("RHS\n");
    for r in m.rows.iter().filter(|r| r.rhs != 0.0) {
        mps_line(&mut out, "", "RHS", &r.name, &mps_num(r.rhs));
    }
    out.push_str("BOUNDS\n");
    for v in &m.vars {
        if v.kind == VarKind::Binary && v.lb == 0.0 && v.ub == 1.0 {
            mps_line(&mut out, "BV", "BND", &v.name, "");
        } else if v.lb == v.ub {
            mps_line(&mut out, "FX", "BND", &v.name, &mps_num(v.lb));
        } else {
            if v.lb == f64::NEG_INFINITY {
                mps_line(&mut out, "MI", "BND", &v.name, "");
            } else {
                mps_line(&mut out, "LO", "BND", &v.name, &mps_num(v.lb));
            }
            if v.ub == f64::INFINITY {
                mps_line(&mut out, "PL", "BND", &v.name, "");
            } else {
                mps_line(&mut out, "UP", "BND", &v.name, &mps_num(v.ub));
            }
        }
    }
    if !m.objective.quad.is_empty() {
        // QUADOBJ holds one triangle of H with objective 1/2 x'Hx
        out.push_str("QUADOBJ\n");
        for (i, j, c) in &m.objective.quad {
            let h = if i == j { 2.0 * c } else { *c };
            mps_line(&mut out, "", &m.vars[*i].name, &m.vars[*j].name, &mps_num(h));
        }
    }
    out.push_str("ENDATA\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_var() -> MicpModel {
        let mut m = MicpModel::default();
        let x = m.add_var("x", VarKind::Continuous, 0.0, 10.0);
        m.objective.linear.push((x, 1.0));
        m.add_row(vec![(x, 1.0)], Sense::Ge, 3.0);
        m
    }

    #[test]
    fn lp_layout() {
        let mut m = one_var();
        let z = m.add_var("z0", VarKind::Binary, 0.0, 1.0);
        m.objective.quad.push((0, 0, 1.5));
        m.objective.quad.push((0, z, -1.0));
        let lp = emit_model(&m, ModelFormat::Lp).unwrap();
        assert_eq!(
            lp,
            "\\ verna trajectory model\nMinimize\n obj: 1 x + [ 3 x ^ 2 - 2 x * z0 ] / 2\nSubject To\n r0: 1 x >= 3\nBounds\n 0 <= x <= 10\nBinaries\n z0\nEnd\n"
        );
    }

    #[test]
    fn mps_layout() {
        let mut m = one_var();
        m.add_var("z0", VarKind::Binary, 0.0, 1.0);
        m.objective.quad.push((0, 0, 1.5));
        let mps = emit_model(&m, ModelFormat::Mps).unwrap();
        let expected = "NAME          VERNA\nROWS\n N  OBJ\n G  r0\nCOLUMNS\n    x         OBJ       1\n    x         r0        1\n    M0        'MARKER'                 'INTORG'\n    z0        OBJ       0\n    M1        'MARKER'                 'INTEND'\nRHS\n    RHS       r0        3\nBOUNDS\n LO BND       x         0\n UP BND       x         10\n BV BND       z0\nQUADOBJ\n    x         x         3\nENDATA\n";
        assert_eq!(mps, expected);
    }

    #[test]
    fn empty_model_has_all_sections() {
        let m = MicpModel::default();
        let lp = emit_model(&m, ModelFormat::Lp).unwrap();
        assert!(lp.contains("Minimize") && lp.contains("Subject To") && lp.ends_with("End\n"));
        let mps = emit_model(&m, ModelFormat::Mps).unwrap();
        for s in ["ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"] {
            assert!(mps.contains(s));
        }
    }

    #[test]
    fn long_names_are_rejected_for_mps() {
        let mut m = one_var();
        m.vars[0].name = "much_too_long".into();
        assert!(matches!(emit_model(&m, ModelFormat::Mps), Err(PlanError::UnsupportedFeature(_))));
        assert!(emit_model(&m, ModelFormat::Lp).is_ok());
        m.vars[0].name = "e1".into();
        assert!(matches!(emit_model(&m, ModelFormat::Lp), Err(PlanError::UnsupportedFeature(_))));
    }

    #[test]
    fn numbers_fit_fixed_fields() {
        for v in [28.91366458960192, -1.0e-7, 123456789012345.0, 0.1, -3.5] {
            let s = mps_num(v);
            assert!(s.len() <= 12, "{s}");
            let back: f64 = s.parse().unwrap();
            assert!((back - v).abs() <= 1e-6 * v.abs(), "{v} -> {s}");
        }
    }
}
