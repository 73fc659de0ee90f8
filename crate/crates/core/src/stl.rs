//! Discrete-time signal temporal logic: syntax, boolean satisfaction and
//! quantitative robustness.
//!
//! Formulas are evaluated over a [`Trajectory`], a finite sequence of states
//! `x_0 .. x_T` sampled every `dt` seconds. Temporal intervals are expressed in
//! integer steps relative to the evaluation step `k`.

use std::fmt;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StlError {
    #[error("formula needs step {needed} but the signal ends at step {available}")]
    HorizonExceeded { needed: usize, available: usize },
    #[error("predicate has dimension {expected} but the signal has dimension {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid interval [{lo}, {hi}]: lower bound exceeds upper bound")]
    InvalidInterval { lo: usize, hi: usize },
    #[error("predicate coefficients must contain a nonzero entry")]
    DegeneratePredicate,
    #[error("invalid cuboid: min corner must be strictly below max corner on every axis")]
    InvalidCuboid,
    #[error("{0} needs at least two operands")]
    Arity(&'static str),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
}

/// Affine predicate `h(x) = coeffs . x + offset`, true when `h(x) >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPredicate<T> {
    coeffs: Vec<T>,
    offset: T,
}

impl<T: Scalar> LinearPredicate<T> {
    pub fn new(coeffs: Vec<T>, offset: T) -> Result<Self, StlError> {
        if coeffs.iter().all(|c| c.is_zero()) {
            return Err(StlError::DegeneratePredicate);
        }
        Ok(Self { coeffs, offset })
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    /// The predicate `-h(x) >= 0`.
    pub fn negated(&self) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|&c| -c).collect(),
            offset: -self.offset,
        }
    }

    /// `h(x)`; panics in debug builds on a dimension mismatch, callers
    /// validate dimensions up front.
    pub fn value(&self, state: &[T]) -> T {
        debug_assert_eq!(state.len(), self.coeffs.len());
        let mut acc = T::zero();
        for (c, x) in self.coeffs.iter().zip(state) {
            acc = acc + *c * *x;
        }
        acc + self.offset
    }
}

/// Closed step interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Interval {
    lo: usize,
    hi: usize,
}

impl Interval {
    pub fn new(lo: usize, hi: usize) -> Result<Self, StlError> {
        if lo > hi {
            return Err(StlError::InvalidInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> usize {
        self.lo
    }

    pub fn hi(&self) -> usize {
        self.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Formula<T> {
    True,
    Pred(LinearPredicate<T>),
    Not(Box<Formula<T>>),
    And(Vec<Formula<T>>),
    Or(Vec<Formula<T>>),
    Eventually(Interval, Box<Formula<T>>),
    Always(Interval, Box<Formula<T>>),
    /// `Until(lhs, rhs, I)`: `rhs` holds at some step in `I` and `lhs` holds
    /// at every step from the evaluation step up to and including it.
    Until(Box<Formula<T>>, Box<Formula<T>>, Interval),
}

impl<T: Scalar> Formula<T> {
    pub fn pred(p: LinearPredicate<T>) -> Self {
        Formula::Pred(p)
    }

    pub fn not(self) -> Self {
        Formula::Not(Box::new(self))
    }

    pub fn and(self, other: Self) -> Self {
        Formula::And(vec![self, other])
    }

    pub fn or(self, other: Self) -> Self {
        Formula::Or(vec![self, other])
    }

    pub fn all(children: Vec<Self>) -> Result<Self, StlError> {
        if children.len() < 2 {
            return Err(StlError::Arity("conjunction"));
        }
        Ok(Formula::And(children))
    }

    pub fn any(children: Vec<Self>) -> Result<Self, StlError> {
        if children.len() < 2 {
            return Err(StlError::Arity("disjunction"));
        }
        Ok(Formula::Or(children))
    }

    pub fn eventually(self, interval: Interval) -> Self {
        Formula::Eventually(interval, Box::new(self))
    }

    pub fn always(self, interval: Interval) -> Self {
        Formula::Always(interval, Box::new(self))
    }

    pub fn until(self, rhs: Self, interval: Interval) -> Self {
        Formula::Until(Box::new(self), Box::new(rhs), interval)
    }

    /// Largest step offset (relative to the evaluation step) the formula reads.
    pub fn horizon(&self) -> usize {
        match self {
            Formula::True | Formula::Pred(_) => 0,
            Formula::Not(f) => f.horizon(),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().map(Formula::horizon).max().unwrap_or(0),
            Formula::Eventually(i, f) | Formula::Always(i, f) => i.hi + f.horizon(),
            Formula::Until(a, b, i) => i.hi + a.horizon().max(b.horizon()),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::True | Formula::Pred(_) => 0,
            Formula::Not(f) | Formula::Eventually(_, f) | Formula::Always(_, f) => 1 + f.depth(),
            Formula::And(fs) | Formula::Or(fs) => 1 + fs.iter().map(Formula::depth).max().unwrap_or(0),
            Formula::Until(a, b, _) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Visits every predicate in the tree, left to right.
    pub fn for_each_predicate<'a>(&'a self, f: &mut impl FnMut(&'a LinearPredicate<T>)) {
        match self {
            Formula::True => {}
            Formula::Pred(p) => f(p),
            Formula::Not(g) | Formula::Eventually(_, g) | Formula::Always(_, g) => g.for_each_predicate(f),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| g.for_each_predicate(f)),
            Formula::Until(a, b, _) => {
                a.for_each_predicate(f);
                b.for_each_predicate(f);
            }
        }
    }

    /// Checks that the formula can be evaluated on `x` at step `k`.
    pub fn check_signal(&self, x: &Trajectory<T>, k: usize) -> Result<(), StlError> {
        let mut mismatch = None;
        self.for_each_predicate(&mut |p| {
            if p.dim() != x.dim() && mismatch.is_none() {
                mismatch = Some(p.dim());
            }
        });
        if let Some(expected) = mismatch {
            return Err(StlError::DimensionMismatch { expected, found: x.dim() });
        }
        let needed = k + self.horizon();
        if needed > x.last_step() {
            return Err(StlError::HorizonExceeded { needed, available: x.last_step() });
        }
        Ok(())
    }
}

/// Sampled state signal `x_0 .. x_T` with a fixed sampling period.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    dim: usize,
    data: Vec<T>,
    dt: T,
}

impl<T: Scalar> Trajectory<T> {
    pub fn new(states: Vec<Vec<T>>, dt: T) -> Result<Self, StlError> {
        let dim = states
            .first()
            .map(Vec::len)
            .ok_or_else(|| StlError::InvalidTrajectory("no states".into()))?;
        if dim == 0 {
            return Err(StlError::InvalidTrajectory("zero-dimensional states".into()));
        }
        if states.iter().any(|s| s.len() != dim) {
            return Err(StlError::InvalidTrajectory("ragged state vectors".into()));
        }
        let data: Vec<T> = states.into_iter().flatten().collect();
        Self::from_flat(dim, data, dt)
    }

    pub fn from_flat(dim: usize, data: Vec<T>, dt: T) -> Result<Self, StlError> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(StlError::InvalidTrajectory("dt must be positive".into()));
        }
        if dim == 0 || data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(StlError::InvalidTrajectory("data length is not a multiple of the dimension".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(StlError::InvalidTrajectory("non-finite entry".into()));
        }
        Ok(Self { dim, data, dt })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// Number of samples, `T + 1`.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `T`, the index of the final sample.
    pub fn last_step(&self) -> usize {
        self.len() - 1
    }

    pub fn state(&self, k: usize) -> &[T] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.dim)
    }

    /// The signal with its first `k` samples dropped.
    pub fn shifted(&self, k: usize) -> Self {
        Self {
            dim: self.dim,
            data: self.data[k * self.dim..].to_vec(),
            dt: self.dt,
        }
    }
}

/// Quantitative robustness `rho(phi, x, k)`.
pub fn robustness<T: Scalar>(phi: &Formula<T>, x: &Trajectory<T>, k: usize) -> Result<T, StlError> {
    phi.check_signal(x, k)?;
    Ok(rho(phi, x, k))
}

fn rho<T: Scalar>(phi: &Formula<T>, x: &Trajectory<T>, k: usize) -> T {
    match phi {
        Formula::True => T::infinity(),
        Formula::Pred(p) => p.value(x.state(k)),
        Formula::Not(f) => -rho(f, x, k),
        Formula::And(fs) => fs.iter().map(|f| rho(f, x, k)).fold(T::infinity(), T::min),
        Formula::Or(fs) => fs.iter().map(|f| rho(f, x, k)).fold(T::neg_infinity(), T::max),
        Formula::Eventually(i, f) => (k + i.lo..=k + i.hi)
            .map(|kp| rho(f, x, kp))
            .fold(T::neg_infinity(), T::max),
        Formula::Always(i, f) => (k + i.lo..=k + i.hi)
            .map(|kp| rho(f, x, kp))
            .fold(T::infinity(), T::min),
        Formula::Until(lhs, rhs, i) => {
            // running minimum of lhs over [k, k'] as k' sweeps the window
            let mut lhs_min = T::infinity();
            for kpp in k..k + i.lo {
                lhs_min = lhs_min.min(rho(lhs, x, kpp));
            }
            let mut best = T::neg_infinity();
            for kp in k + i.lo..=k + i.hi {
                lhs_min = lhs_min.min(rho(lhs, x, kp));
                best = best.max(rho(rhs, x, kp).min(lhs_min));
            }
            best
        }
    }
}

/// Boolean satisfaction `(x, k) |= phi`; predicates hold when `h(x_k) >= 0`.
pub fn satisfied<T: Scalar>(phi: &Formula<T>, x: &Trajectory<T>, k: usize) -> Result<bool, StlError> {
    phi.check_signal(x, k)?;
    Ok(sat(phi, x, k))
}

fn sat<T: Scalar>(phi: &Formula<T>, x: &Trajectory<T>, k: usize) -> bool {
    match phi {
        Formula::True => true,
        Formula::Pred(p) => p.value(x.state(k)) >= T::zero(),
        Formula::Not(f) => !sat(f, x, k),
        Formula::And(fs) => fs.iter().all(|f| sat(f, x, k)),
        Formula::Or(fs) => fs.iter().any(|f| sat(f, x, k)),
        Formula::Eventually(i, f) => (k + i.lo..=k + i.hi).any(|kp| sat(f, x, kp)),
        Formula::Always(i, f) => (k + i.lo..=k + i.hi).all(|kp| sat(f, x, kp)),
        Formula::Until(lhs, rhs, i) => {
            (k + i.lo..=k + i.hi).any(|kp| sat(rhs, x, kp) && (k..=kp).all(|kpp| sat(lhs, x, kpp)))
        }
    }
}

/// Axis-aligned box `[min, max]` in three dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cuboid<T> {
    min: [T; 3],
    max: [T; 3],
}

impl<T: Scalar> Cuboid<T> {
    pub fn new(min: [T; 3], max: [T; 3]) -> Result<Self, StlError> {
        let ok = (0..3).all(|d| min[d].is_finite() && max[d].is_finite() && min[d] < max[d]);
        if !ok {
            return Err(StlError::InvalidCuboid);
        }
        Ok(Self { min, max })
    }

    /// From `[xmin, xmax, ymin, ymax, zmin, zmax]`.
    pub fn from_bounds(b: [T; 6]) -> Result<Self, StlError> {
        Self::new([b[0], b[2], b[4]], [b[1], b[3], b[5]])
    }

    pub fn min(&self) -> [T; 3] {
        self.min
    }

    pub fn max(&self) -> [T; 3] {
        self.max
    }

    pub fn bounds(&self) -> [T; 6] {
        [self.min[0], self.max[0], self.min[1], self.max[1], self.min[2], self.max[2]]
    }

    /// Closed containment, the boundary counts as inside.
    pub fn contains(&self, p: [T; 3]) -> bool {
        (0..3).all(|d| p[d] >= self.min[d] && p[d] <= self.max[d])
    }

    pub fn center(&self) -> [T; 3] {
        let two = T::one() + T::one();
        [0, 1, 2].map(|d| (self.min[d] + self.max[d]) / two)
    }

    pub fn intersects(&self, other: &Cuboid<T>) -> bool {
        (0..3).all(|d| self.min[d] <= other.max[d] && other.min[d] <= self.max[d])
    }
}

/// Which state components hold the x, y, z position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PosDims {
    pub indices: [usize; 3],
    pub state_dim: usize,
}

impl PosDims {
    /// The `(p, v)` drone state: position in components 0..3.
    pub const DRONE: PosDims = PosDims { indices: [0, 1, 2], state_dim: 6 };
    /// A bare position signal.
    pub const POSITION: PosDims = PosDims { indices: [0, 1, 2], state_dim: 3 };

    fn axis<T: Scalar>(&self, axis: usize, sign: T) -> Vec<T> {
        let mut c = vec![T::zero(); self.state_dim];
        c[self.indices[axis]] = sign;
        c
    }
}

fn halfspace<T: Scalar>(dims: PosDims, axis: usize, sign: T, offset: T) -> Formula<T> {
    Formula::Pred(LinearPredicate { coeffs: dims.axis(axis, sign), offset })
}

/// Conjunction of the six faces: `x_d - min_d >= 0` and `max_d - x_d >= 0`
/// for each axis in order.
pub fn inside_cuboid<T: Scalar>(c: &Cuboid<T>, dims: PosDims) -> Formula<T> {
    let mut faces = Vec::with_capacity(6);
    for d in 0..3 {
        faces.push(halfspace(dims, d, T::one(), -c.min[d]));
        faces.push(halfspace(dims, d, -T::one(), c.max[d]));
    }
    Formula::And(faces)
}

/// Disjunction of the six complementary faces of [`inside_cuboid`].
pub fn outside_cuboid<T: Scalar>(c: &Cuboid<T>, dims: PosDims) -> Formula<T> {
    let mut faces = Vec::with_capacity(6);
    for d in 0..3 {
        faces.push(halfspace(dims, d, -T::one(), c.min[d]));
        faces.push(halfspace(dims, d, T::one(), -c.max[d]));
    }
    Formula::Or(faces)
}

/// Recovers the cuboid from a formula built by [`inside_cuboid`] (`inside =
/// true`) or [`outside_cuboid`] (`inside = false`).
pub fn match_cuboid<T: Scalar>(phi: &Formula<T>, dims: PosDims) -> Option<(Cuboid<T>, bool)> {
    let (faces, inside) = match phi {
        Formula::And(fs) if fs.len() == 6 => (fs, true),
        Formula::Or(fs) if fs.len() == 6 => (fs, false),
        _ => return None,
    };
    let mut min = [T::zero(); 3];
    let mut max = [T::zero(); 3];
    for d in 0..3 {
        let (lo, hi) = match (&faces[2 * d], &faces[2 * d + 1]) {
            (Formula::Pred(a), Formula::Pred(b)) => (a, b),
            _ => return None,
        };
        let (lo_sign, hi_sign) = if inside { (T::one(), -T::one()) } else { (-T::one(), T::one()) };
        if lo.coeffs != dims.axis(d, lo_sign) || hi.coeffs != dims.axis(d, hi_sign) {
            return None;
        }
        if inside {
            min[d] = -lo.offset;
            max[d] = hi.offset;
        } else {
            min[d] = lo.offset;
            max[d] = -hi.offset;
        }
    }
    let c = Cuboid::new(min, max).ok()?;
    // reject anything the builders would not reproduce bit-for-bit
    let rebuilt = if inside { inside_cuboid(&c, dims) } else { outside_cuboid(&c, dims) };
    (rebuilt == *phi).then_some((c, inside))
}
