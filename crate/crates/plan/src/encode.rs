//! Big-M encoding of `robustness >= margin` over the double integrator.
//!
//! Negations are pushed to the predicates while the temporal operators are
//! unrolled, so every leaf is a single affine literal `h(x_k) >= margin`
//! linked to a binary. Junctions get `[0, 1]` indicators constrained to the
//! min (And) or max (Or) of their children.

use std::collections::HashMap;

use verna_core::stl::{Formula, LinearPredicate};

use crate::dynamics::PlanProblem;
use crate::model::{Junction, Layout, Leaf, Lit, LogicNode, MicpModel, Sense, VarKind};
use crate::PlanError;

/// Literals for negated predicates need strict violation; with a zero margin
/// they still keep this distance from the boundary.
pub const STRICT_EPS: f64 = 1e-6;

pub fn default_big_m(prob: &PlanProblem) -> f64 {
    2.0 * prob.model.workspace_diagonal()
}

type PredKey = (Vec<u64>, u64);

fn pred_key(p: &LinearPredicate<f64>) -> PredKey {
    // `+ 0.0` maps -0.0 (from negating zero coefficients) to 0.0
    (p.coeffs().iter().map(|c| (c + 0.0).to_bits()).collect(), (p.offset() + 0.0).to_bits())
}

struct Encoder {
    m: MicpModel,
    pred_ids: HashMap<PredKey, usize>,
    leaf_ids: HashMap<(usize, usize, u64), Lit>,
    memo: HashMap<(*const Formula<f64>, usize, bool), Lit>,
    prefix_memo: HashMap<(*const Formula<f64>, usize, usize, bool), Lit>,
    junction_ids: HashMap<(Junction, Vec<Lit>), Lit>,
    var_bounds: Vec<(f64, f64)>,
}

impl Encoder {
    fn leaf(&mut self, p: LinearPredicate<f64>, k: usize, strict: bool) -> Result<Lit, PlanError> {
        let next = self.pred_ids.len();
        let pid = *self.pred_ids.entry(pred_key(&p)).or_insert(next);
        if pid == self.m.predicates.len() {
            self.m.predicates.push(p.clone());
        }
        let margin = if strict { self.m.margin.max(STRICT_EPS) } else { self.m.margin };
        if let Some(l) = self.leaf_ids.get(&(pid, k, margin.to_bits())) {
            return Ok(*l);
        }
        let mut coeffs = Vec::new();
        let mut h_min = p.offset();
        for (d, c) in p.coeffs().iter().enumerate() {
            if *c != 0.0 {
                let j = self.m.layout.state_var(k, d);
                let (lb, ub) = self.var_bounds[j];
                h_min += (c * lb).min(c * ub);
                coeffs.push((j, *c));
            }
        }
        let big_m = self.m.big_m;
        if margin - h_min > big_m {
            return Err(PlanError::BigMTooSmall { big_m, needed: margin - h_min });
        }
        let idx = self.m.leaves.len();
        let z = self.m.add_var(format!("z{idx}"), VarKind::Binary, 0.0, 1.0);
        coeffs.push((z, -big_m));
        let row = self.m.add_row(coeffs, Sense::Ge, margin - p.offset() - big_m);
        self.m.leaves.push(Leaf { var: z, pred: pid, step: k, row });
        let lit = Lit::Leaf(idx);
        self.leaf_ids.insert((pid, k, margin.to_bits()), lit);
        Ok(lit)
    }

    fn lit_var(&self, l: Lit) -> usize {
        match l {
            Lit::Leaf(i) => self.m.leaves[i].var,
            Lit::Node(i) => self.m.nodes[i].var,
            _ => unreachable!("constants are folded"),
        }
    }

    fn junction(&mut self, j: Junction, children: Vec<Lit>) -> Lit {
        let (absorb, unit) = match j {
            Junction::And => (Lit::False, Lit::True),
            Junction::Or => (Lit::True, Lit::False),
        };
        let mut kids: Vec<Lit> = Vec::with_capacity(children.len());
        for c in children {
            if c == absorb {
                return absorb;
            }
            if c != unit && !kids.contains(&c) {
                kids.push(c);
            }
        }
        match kids.len() {
            0 => return unit,
            1 => return kids[0],
            _ => {}
        }
        if let Some(l) = self.junction_ids.get(&(j, kids.clone())) {
            return *l;
        }
        let idx = self.m.nodes.len();
        let y = self.m.add_var(format!("y{idx}"), VarKind::Continuous, 0.0, 1.0);
        let vars: Vec<usize> = kids.iter().map(|c| self.lit_var(*c)).collect();
        let n = vars.len() as f64;
        match j {
            Junction::And => {
                for v in &vars {
                    self.m.add_row(vec![(y, 1.0), (*v, -1.0)], Sense::Le, 0.0);
                }
                let mut row = vec![(y, 1.0)];
                row.extend(vars.iter().map(|v| (*v, -1.0)));
                self.m.add_row(row, Sense::Ge, 1.0 - n);
            }
            Junction::Or => {
                let mut row = vec![(y, 1.0)];
                row.extend(vars.iter().map(|v| (*v, -1.0)));
                self.m.add_row(row, Sense::Le, 0.0);
                for v in &vars {
                    self.m.add_row(vec![(y, 1.0), (*v, -1.0)], Sense::Ge, 0.0);
                }
            }
        }
        self.m.nodes.push(LogicNode { junction: j, var: y, children: kids.clone() });
        let lit = Lit::Node(idx);
        self.junction_ids.insert((j, kids), lit);
        lit
    }

    /// Literal for `phi` (or its negation when `pos` is false) at step `k`.
    fn expand(&mut self, phi: &Formula<f64>, k: usize, pos: bool) -> Result<Lit, PlanError> {
        let key = (phi as *const _, k, pos);
        if let Some(l) = self.memo.get(&key) {
            return Ok(*l);
        }
        let (conj, disj) = if pos { (Junction::And, Junction::Or) } else { (Junction::Or, Junction::And) };
        let lit = match phi {
            Formula::True => {
                if pos {
                    Lit::True
                } else {
                    Lit::False
                }
            }
            Formula::Pred(p) => {
                if pos {
                    self.leaf(p.clone(), k, false)?
                } else {
                    self.leaf(p.negated(), k, true)?
                }
            }
            Formula::Not(f) => self.expand(f, k, !pos)?,
            Formula::And(fs) => {
                let kids = fs.iter().map(|f| self.expand(f, k, pos)).collect::<Result<_, _>>()?;
                self.junction(conj, kids)
            }
            Formula::Or(fs) => {
                let kids = fs.iter().map(|f| self.expand(f, k, pos)).collect::<Result<_, _>>()?;
                self.junction(disj, kids)
            }
            Formula::Eventually(i, f) => {
                let kids = (k + i.lo()..=k + i.hi()).map(|t| self.expand(f, t, pos)).collect::<Result<_, _>>()?;
                self.junction(disj, kids)
            }
            Formula::Always(i, f) => {
                let kids = (k + i.lo()..=k + i.hi()).map(|t| self.expand(f, t, pos)).collect::<Result<_, _>>()?;
                self.junction(conj, kids)
            }
            Formula::Until(lhs, rhs, i) => {
                let mut kids = Vec::new();
                for t in k + i.lo()..=k + i.hi() {
                    let r = self.expand(rhs, t, pos)?;
                    let l = self.prefix(lhs, k, t, pos)?;
                    kids.push(self.junction(conj, vec![r, l]));
                }
                self.junction(disj, kids)
            }
        };
        self.memo.insert(key, lit);
        Ok(lit)
    }

    /// `lhs` holding at every step of `from..=to` (or failing at some step).
    fn prefix(&mut self, lhs: &Formula<f64>, from: usize, to: usize, pos: bool) -> Result<Lit, PlanError> {
        let key = (lhs as *const _, from, to, pos);
        if let Some(l) = self.prefix_memo.get(&key) {
            return Ok(*l);
        }
        let here = self.expand(lhs, to, pos)?;
        let lit = if to == from {
            here
        } else {
            let before = self.prefix(lhs, from, to - 1, pos)?;
            self.junction(if pos { Junction::And } else { Junction::Or }, vec![before, here])
        };
        self.prefix_memo.insert(key, lit);
        Ok(lit)
    }
}

/// Builds the mixed-integer model of `prob`; `big_m` defaults to twice the
/// workspace diagonal.
pub fn encode(prob: &PlanProblem, big_m: Option<f64>) -> Result<MicpModel, PlanError> {
    prob.validate()?;
    let big_m = big_m.unwrap_or_else(|| default_big_m(prob));
    if !(big_m.is_finite() && big_m > 0.0) {
        return Err(PlanError::InvalidModel(format!("big-M must be positive, got {big_m}")));
    }
    let md = &prob.model;
    let t_max = prob.horizon;
    let mut m = MicpModel { big_m, margin: prob.rho_margin, ..Default::default() };
    let axes = ['x', 'y', 'z'];
    let mut layout = Layout { steps: t_max, ..Default::default() };
    for t in 0..=t_max {
        layout.p.push(std::array::from_fn(|d| m.add_var(format!("p{t}{}", axes[d]), VarKind::Continuous, md.p_min[d], md.p_max[d])));
        layout.v.push(std::array::from_fn(|d| m.add_var(format!("v{t}{}", axes[d]), VarKind::Continuous, md.v_min[d], md.v_max[d])));
        layout.a.push(std::array::from_fn(|d| m.add_var(format!("a{t}{}", axes[d]), VarKind::Continuous, md.a_min[d], md.a_max[d])));
    }
    for d in 0..3 {
        m.add_row(vec![(layout.p[0][d], 1.0)], Sense::Eq, prob.x0.p[d]);
        m.add_row(vec![(layout.v[0][d], 1.0)], Sense::Eq, prob.x0.v[d]);
    }
    for t in 0..t_max {
        for d in 0..3 {
            m.add_row(vec![(layout.p[t + 1][d], 1.0), (layout.p[t][d], -1.0), (layout.v[t][d], -md.dt)], Sense::Eq, 0.0);
            m.add_row(vec![(layout.v[t + 1][d], 1.0), (layout.v[t][d], -1.0), (layout.a[t][d], -md.dt)], Sense::Eq, 0.0);
        }
    }
    for t in 0..=t_max {
        for (block, w) in [(&layout.v[t], &prob.q), (&layout.a[t], &prob.r)] {
            for i in 0..3 {
                for j in i..3 {
                    let c = if i == j { w[i][i] } else { w[i][j] + w[j][i] };
                    if c != 0.0 {
                        m.objective.quad.push((block[i], block[j], c));
                    }
                }
            }
        }
    }
    m.layout = layout;
    let var_bounds = m.vars.iter().map(|v| (v.lb, v.ub)).collect();
    let mut enc = Encoder {
        m,
        pred_ids: HashMap::new(),
        leaf_ids: HashMap::new(),
        memo: HashMap::new(),
        prefix_memo: HashMap::new(),
        junction_ids: HashMap::new(),
        var_bounds,
    };
    let root = enc.expand(&prob.phi, 0, true)?;
    let mut m = enc.m;
    match root {
        Lit::True => {}
        Lit::False => {
            let dummy = m.add_var("infeas", VarKind::Continuous, 0.0, 0.0);
            m.add_row(vec![(dummy, 1.0)], Sense::Ge, 1.0);
        }
        Lit::Leaf(i) => {
            let v = m.leaves[i].var;
            m.add_row(vec![(v, 1.0)], Sense::Eq, 1.0);
        }
        Lit::Node(i) => {
            let v = m.nodes[i].var;
            m.add_row(vec![(v, 1.0)], Sense::Eq, 1.0);
        }
    }
    m.root = Some(root);
    m.source = Some(Box::new(prob.clone()));
    Ok(m)
}
