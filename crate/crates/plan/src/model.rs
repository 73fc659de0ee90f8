//! Solver-agnostic mixed-integer model.

use verna_core::stl::LinearPredicate;

use crate::dynamics::PlanProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Var {
    pub name: String,
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|(j, c)| c * x[*j]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

/// `sum quad[(i, j, c)] c x_i x_j + sum linear[(j, c)] c x_j + constant`,
/// each unordered pair listed once with `i <= j`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Objective {
    pub quad: Vec<(usize, usize, f64)>,
    pub linear: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Objective {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.constant
            + self.linear.iter().map(|(j, c)| c * x[*j]).sum::<f64>()
            + self.quad.iter().map(|(i, j, c)| c * x[*i] * x[*j]).sum::<f64>()
    }
}

/// A literal of the boolean structure: a predicate binary, a junction node or
/// a constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lit {
    True,
    False,
    Leaf(usize),
    Node(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Junction {
    And,
    Or,
}

/// Junction over child literals; `var` is its `[0, 1]` indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicNode {
    pub junction: Junction,
    pub var: usize,
    pub children: Vec<Lit>,
}

/// Binary `var` asserts predicate `pred` at `step` through big-M row `row`.
#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub var: usize,
    pub pred: usize,
    pub step: usize,
    pub row: usize,
}

/// Indices of the state and control variables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Layout {
    pub steps: usize,
    pub p: Vec<[usize; 3]>,
    pub v: Vec<[usize; 3]>,
    pub a: Vec<[usize; 3]>,
}

impl Layout {
    /// Variable holding component `d` of the 6-dim state at step `t`.
    pub fn state_var(&self, t: usize, d: usize) -> usize {
        if d < 3 {
            self.p[t][d]
        } else {
            self.v[t][d - 3]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MicpModel {
    pub vars: Vec<Var>,
    pub rows: Vec<Row>,
    pub objective: Objective,
    /// Distinct predicates (negated literals appear as their own entries).
    pub predicates: Vec<LinearPredicate<f64>>,
    pub leaves: Vec<Leaf>,
    pub nodes: Vec<LogicNode>,
    pub root: Option<Lit>,
    pub layout: Layout,
    pub big_m: f64,
    pub margin: f64,
    /// The instance this model was encoded from; needed to decode results.
    pub source: Option<Box<PlanProblem>>,
}

impl MicpModel {
    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lb: f64, ub: f64) -> usize {
        self.vars.push(Var { name: name.into(), kind, lb, ub });
        self.vars.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        let name = format!("r{}", self.rows.len());
        self.rows.push(Row { name, coeffs, sense, rhs });
        self.rows.len() - 1
    }

    pub fn continuous_vars(&self) -> impl Iterator<Item = (usize, &Var)> {
        self.vars.iter().enumerate().filter(|(_, v)| v.kind == VarKind::Continuous)
    }

    pub fn binary_vars(&self) -> impl Iterator<Item = (usize, &Var)> {
        self.vars.iter().enumerate().filter(|(_, v)| v.kind == VarKind::Binary)
    }

    pub fn num_binaries(&self) -> usize {
        self.binary_vars().count()
    }

    /// `(predicate id, step)` covered by binary variable `var`.
    pub fn leaf_of(&self, var: usize) -> Option<(usize, usize)> {
        self.leaves.iter().find(|l| l.var == var).map(|l| (l.pred, l.step))
    }

    /// Largest bound or row violation of `x`, and whether binaries are integral.
    pub fn check_point(&self, x: &[f64]) -> (f64, bool) {
        let mut worst = 0.0f64;
        let mut integral = true;
        for (v, xv) in self.vars.iter().zip(x) {
            worst = worst.max(v.lb - xv).max(xv - v.ub);
            if v.kind == VarKind::Binary && (xv - xv.round()).abs() > 1e-6 {
                integral = false;
            }
        }
        for r in &self.rows {
            worst = worst.max(r.violation(x));
        }
        (worst, integral)
    }

    /// Every row and objective term references a declared variable, and the
    /// quadratic form is positive semidefinite.
    pub fn check_consistency(&self) -> Result<(), String> {
        let n = self.vars.len();
        for r in &self.rows {
            if let Some((j, _)) = r.coeffs.iter().find(|(j, _)| *j >= n) {
                return Err(format!("row {} references undeclared variable {j}", r.name));
            }
        }
        if self.objective.quad.iter().any(|(i, j, _)| *i >= n || *j >= n || i > j) || self.objective.linear.iter().any(|(j, _)| *j >= n) {
            return Err("objective references undeclared variable".into());
        }
        let mut used: Vec<usize> = self.objective.quad.iter().flat_map(|(i, j, _)| [*i, *j]).collect();
        used.sort_unstable();
        used.dedup();
        let k = used.len();
        let pos = |v: usize| used.binary_search(&v).unwrap();
        let mut m = nalgebra::DMatrix::<f64>::zeros(k, k);
        for (i, j, c) in &self.objective.quad {
            let (a, b) = (pos(*i), pos(*j));
            if a == b {
                m[(a, a)] += c;
            } else {
                m[(a, b)] += c / 2.0;
                m[(b, a)] += c / 2.0;
            }
        }
        if k > 0 {
            let scale = 1.0 + m.amax();
            if m.symmetric_eigenvalues().iter().any(|e| *e < -1e-9 * scale) {
                return Err("objective is not positive semidefinite".into());
            }
        }
        Ok(())
    }
}
