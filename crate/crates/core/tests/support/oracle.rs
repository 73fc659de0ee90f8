//! Brute-force reference semantics. Formulas are first rewritten into the
//! primitive syntax (true, predicate, not, binary and, until) using
//! `F = true U phi`, `G = not(true U not phi)`, `a or b = not(not a and not b)`;
//! every quantifier of the until clause is then materialized explicitly.
#![allow(dead_code)]

use verna_core::stl::{Formula, Trajectory};

#[derive(Debug, Clone)]
pub enum Core {
    Top,
    Mu(Vec<f64>, f64),
    Neg(Box<Core>),
    Conj(Box<Core>, Box<Core>),
    U(Box<Core>, Box<Core>, usize, usize),
}

pub fn desugar(phi: &Formula<f64>) -> Core {
    let neg = |c: Core| Core::Neg(Box::new(c));
    let conj_all = |cs: Vec<Core>| {
        let mut it = cs.into_iter();
        let first = it.next().expect("non-empty");
        it.fold(first, |acc, c| Core::Conj(Box::new(acc), Box::new(c)))
    };
    match phi {
        Formula::True => Core::Top,
        Formula::Pred(p) => Core::Mu(p.coeffs().to_vec(), p.offset()),
        Formula::Not(f) => neg(desugar(f)),
        Formula::And(fs) => conj_all(fs.iter().map(desugar).collect()),
        Formula::Or(fs) => neg(conj_all(fs.iter().map(|f| neg(desugar(f))).collect())),
        Formula::Eventually(i, f) => Core::U(Box::new(Core::Top), Box::new(desugar(f)), i.lo(), i.hi()),
        Formula::Always(i, f) => neg(Core::U(Box::new(Core::Top), Box::new(neg(desugar(f))), i.lo(), i.hi())),
        Formula::Until(a, b, i) => Core::U(Box::new(desugar(a)), Box::new(desugar(b)), i.lo(), i.hi()),
    }
}

fn h(c: &[f64], o: f64, x: &[f64]) -> f64 {
    c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + o
}

pub fn rho(c: &Core, x: &Trajectory<f64>, k: usize) -> f64 {
    match c {
        Core::Top => f64::INFINITY,
        Core::Mu(co, o) => h(co, *o, x.state(k)),
        Core::Neg(f) => -rho(f, x, k),
        Core::Conj(a, b) => rho(a, x, k).min(rho(b, x, k)),
        Core::U(a, b, lo, hi) => {
            let mut best = f64::NEG_INFINITY;
            for kp in k + lo..=k + hi {
                let mut inner = f64::INFINITY;
                for kpp in k..=kp {
                    inner = inner.min(rho(a, x, kpp));
                }
                best = best.max(rho(b, x, kp).min(inner));
            }
            best
        }
    }
}

pub fn sat(c: &Core, x: &Trajectory<f64>, k: usize) -> bool {
    match c {
        Core::Top => true,
        Core::Mu(co, o) => h(co, *o, x.state(k)) >= 0.0,
        Core::Neg(f) => !sat(f, x, k),
        Core::Conj(a, b) => sat(a, x, k) && sat(b, x, k),
        Core::U(a, b, lo, hi) => {
            let mut exists = false;
            for kp in k + lo..=k + hi {
                let mut all = true;
                for kpp in k..=kp {
                    all &= sat(a, x, kpp);
                }
                exists |= sat(b, x, kp) && all;
            }
            exists
        }
    }
}
