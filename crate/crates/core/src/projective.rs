//! Exact algebra of the anticanonical model: two quartics in a parameter on a
//! conic, their quadric lifts, and the resulting complete intersection in P^6.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::lattice::{lv, LatticeVector};
use crate::poly::{parse_rational, q, sign, Bound, Point, Poly, Q};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("expected 6 parameters, got {0}")]
    WrongCount(usize),
    #[error("cannot parse {0:?} as a rational number")]
    Parse(String),
    #[error("parameters must be strictly increasing")]
    NotIncreasing,
    #[error("the normalizing map sends some parameter to infinity or breaks the order")]
    NotNormalizable,
    #[error("{0}")]
    Violation(Violation),
    #[error("real points of the model are {0}, expected exactly the first and fourth parameters")]
    RealPoints(String),
    #[error("{0} has roots that are not rational")]
    IrrationalRoots(&'static str),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Six strictly increasing rationals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConformalInvariant {
    lambdas: [Q; 6],
}

impl ConformalInvariant {
    pub fn new(values: Vec<Q>) -> Result<Self> {
        let lambdas: [Q; 6] = values.try_into().map_err(|v: Vec<Q>| ModelError::WrongCount(v.len()))?;
        if lambdas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::NotIncreasing);
        }
        Ok(ConformalInvariant { lambdas })
    }

    pub fn from_ints(v: [i64; 6]) -> Result<Self> {
        Self::new(v.iter().map(|&x| q(x)).collect())
    }

    /// Comma-separated rationals, e.g. `0,1,2,3,4,5` or `1/2,1,3/2,2,3,4`.
    pub fn parse(s: &str) -> Result<Self> {
        let values = s
            .split(',')
            .map(|t| parse_rational(t).ok_or_else(|| ModelError::Parse(t.trim().to_string())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(values)
    }

    pub fn sample() -> Self {
        Self::from_ints([0, 1, 2, 3, 4, 5]).expect("increasing")
    }

    pub fn lambdas(&self) -> &[Q; 6] {
        &self.lambdas
    }

    /// `lambda_i`, one-based.
    pub fn lambda(&self, i: usize) -> &Q {
        &self.lambdas[i - 1]
    }
}

impl fmt::Display for ConformalInvariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.lambdas.iter().map(|x| x.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// `f1 = -(x-l1)(x-l4)(x-l2)(x-l3)` and `f2 = (x-l1)(x-l4)(x-l5)(x-l6)`.
pub fn quartics_from_invariant(ci: &ConformalInvariant) -> (Poly, Poly) {
    quartics_with_roots(ci, [1, 4, 2, 3], [1, 4, 5, 6])
}

/// Quartics with chosen root indices, used to build counterexamples.
pub fn quartics_with_roots(ci: &ConformalInvariant, r1: [usize; 4], r2: [usize; 4]) -> (Poly, Poly) {
    let roots = |idx: [usize; 4]| idx.iter().map(|&i| ci.lambda(i).clone()).collect::<Vec<_>>();
    (Poly::from_roots(-Q::one(), &roots(r1)), Poly::from_roots(Q::one(), &roots(r2)))
}

/// Quadratic form in `(x5, x6, x7)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TernaryQuadric {
    pub x5x5: Q,
    pub x6x6: Q,
    pub x7x7: Q,
    pub x5x6: Q,
    pub x5x7: Q,
    pub x6x7: Q,
}

impl TernaryQuadric {
    /// The conic `x5^2 - x6 x7`.
    pub fn lambda_conic() -> Self {
        TernaryQuadric { x5x5: Q::one(), x6x7: -Q::one(), ..Default::default() }
    }

    pub fn terms(&self) -> [(&'static str, &Q); 6] {
        [
            ("x5^2", &self.x5x5),
            ("x6^2", &self.x6x6),
            ("x7^2", &self.x7x7),
            ("x5*x6", &self.x5x6),
            ("x5*x7", &self.x5x7),
            ("x6*x7", &self.x6x7),
        ]
    }

    pub fn eval(&self, x5: &Q, x6: &Q, x7: &Q) -> Q {
        &self.x5x5 * x5 * x5
            + &self.x6x6 * x6 * x6
            + &self.x7x7 * x7 * x7
            + &self.x5x6 * x5 * x6
            + &self.x5x7 * x5 * x7
            + &self.x6x7 * x6 * x7
    }

    fn add_scaled(&self, other: &TernaryQuadric, t: &Q) -> TernaryQuadric {
        TernaryQuadric {
            x5x5: &self.x5x5 + t * &other.x5x5,
            x6x6: &self.x6x6 + t * &other.x6x6,
            x7x7: &self.x7x7 + t * &other.x7x7,
            x5x6: &self.x5x6 + t * &other.x5x6,
            x5x7: &self.x5x7 + t * &other.x5x7,
            x6x7: &self.x6x7 + t * &other.x6x7,
        }
    }

    /// As a polynomial in `x1..x7` (indices 0..7).
    pub fn to_poly7(&self) -> Poly7 {
        let mut p = Poly7::default();
        for (i, j, c) in [
            (4, 4, &self.x5x5),
            (5, 5, &self.x6x6),
            (6, 6, &self.x7x7),
            (4, 5, &self.x5x6),
            (4, 6, &self.x5x7),
            (5, 6, &self.x6x7),
        ] {
            let mut e = [0u8; 7];
            e[i] += 1;
            e[j] += 1;
            p.add_term(e, c.clone());
        }
        p
    }
}

impl fmt::Display for TernaryQuadric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (m, c) in self.terms() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            first = false;
            let a = c.abs();
            if a.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{a}*{m}")?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// Lift via `x^4 -> x6^2, x^3 -> x5 x6, x^2 -> x6 x7, x -> x5 x7, 1 -> x7^2`.
pub fn lift_to_quadric(f: &Poly) -> TernaryQuadric {
    lift_to_quadric_shifted(f, &Q::zero())
}

/// The lift plus `t (x5^2 - x6 x7)`, which restricts to the same quartic.
pub fn lift_to_quadric_shifted(f: &Poly, t: &Q) -> TernaryQuadric {
    let base = TernaryQuadric {
        x6x6: f.coeff(4),
        x5x6: f.coeff(3),
        x6x7: f.coeff(2),
        x5x7: f.coeff(1),
        x7x7: f.coeff(0),
        x5x5: Q::zero(),
    };
    base.add_scaled(&TernaryQuadric::lambda_conic(), t)
}

/// Restriction along `(x5, x6, x7) = (x, x^2, 1)` and the value at `(0:1:0)`.
pub fn restrict_to_lambda(qd: &TernaryQuadric) -> (Poly, Q) {
    let p = Poly::new(vec![
        qd.x7x7.clone(),
        qd.x5x7.clone(),
        &qd.x5x5 + &qd.x6x7,
        qd.x5x6.clone(),
        qd.x6x6.clone(),
    ]);
    let at_infinity = qd.eval(&Q::zero(), &Q::one(), &Q::zero());
    debug_assert_eq!(at_infinity, p.coeff(4));
    (p, at_infinity)
}

/// Value on the conic parameter line, with `Infinity` read off the quartic's `x^4` term.
pub fn eval_on_line(f: &Poly, x: &Point) -> Q {
    match x {
        Point::Finite(v) => f.eval(v),
        Point::Infinity => f.coeff(4),
    }
}

/// The numbered clauses of the conic intersection check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Clause {
    /// The two conics `Λ1`, `Λ2` meet `Λ` in exactly two common real points.
    TwoCommonPoints,
    /// Each of `Λ1 ∩ Λ`, `Λ2 ∩ Λ` is four distinct real points.
    FourRealPoints,
    /// The non-common points of each lie in one arc, and the two arcs differ.
    Separated,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Clause::TwoCommonPoints => "i:two-common-real-points",
            Clause::FourRealPoints => "ii:four-real-points-each",
            Clause::Separated => "iii:separated-by-common-points",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub clause: Clause,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "clause {} failed: {}", self.clause, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PencilReport {
    pub common_points: Vec<Point>,
    pub clauses: Vec<(Clause, bool)>,
}

/// Homogeneous form of a quartic on the parameter line, as points of `R ∪ {∞}`.
struct LinePoints {
    finite: Poly,
    at_infinity: usize,
}

impl LinePoints {
    fn of(f: &Poly) -> LinePoints {
        let deg = f.degree().unwrap_or(0);
        LinePoints { finite: f.clone(), at_infinity: 4usize.saturating_sub(deg) }
    }
}

/// Checks the intersection pattern of the two conics cut out on `Λ`.
pub fn verify_pencil(q1: &TernaryQuadric, q2: &TernaryQuadric) -> std::result::Result<PencilReport, Violation> {
    let (f1, _) = restrict_to_lambda(q1);
    let (f2, _) = restrict_to_lambda(q2);
    let fail = |clause, detail: String| Violation { clause, detail };
    if f1.is_zero() || f2.is_zero() {
        return Err(fail(Clause::FourRealPoints, "a conic contains Λ".into()));
    }
    let (p1, p2) = (LinePoints::of(&f1), LinePoints::of(&f2));
    let g = p1.finite.gcd(&p2.finite);
    let common_inf = p1.at_infinity.min(p2.at_infinity);
    let common_finite_real = g.count_all_real_roots();
    let common_deg = g.degree().unwrap_or(0) + common_inf;
    let common_real = common_finite_real + usize::from(common_inf > 0);
    if common_deg != 2 || common_real != 2 {
        return Err(fail(
            Clause::TwoCommonPoints,
            format!("{common_deg} common points, {common_real} of them real"),
        ));
    }
    for (name, p) in [("Λ1", &p1), ("Λ2", &p2)] {
        let real = p.finite.count_all_real_roots() + usize::from(p.at_infinity > 0);
        if !p.finite.squarefree() || p.at_infinity > 1 || real != 4 {
            return Err(fail(Clause::FourRealPoints, format!("{name} ∩ Λ has {real} distinct real points")));
        }
    }
    let mut common: Vec<Point> = g.rational_roots().into_iter().map(Point::Finite).collect();
    if common_inf > 0 {
        common.push(Point::Infinity);
    }
    // split Λ^σ at the two common points into an inner and an outer arc
    let (rest1, rest2) = (p1.finite.div_rem(&g).0, p2.finite.div_rem(&g).0);
    let arcs = |rest: &Poly, at_inf: usize| -> Option<(usize, usize)> {
        let extra_inf = at_inf - common_inf;
        match common.as_slice() {
            [Point::Finite(a), Point::Finite(b)] => {
                let inner = rest.count_real_roots(&Bound::Finite(a.clone()), &Bound::Finite(b.clone()));
                let total = rest.count_all_real_roots() + extra_inf;
                Some((inner, total - inner))
            }
            [Point::Finite(a), Point::Infinity] => {
                let left = rest.count_real_roots(&Bound::MinusInfinity, &Bound::Finite(a.clone()));
                let right = rest.count_real_roots(&Bound::Finite(a.clone()), &Bound::PlusInfinity);
                Some((left, right))
            }
            _ => None,
        }
    };
    let Some((in1, out1)) = arcs(&rest1, p1.at_infinity) else {
        return Err(fail(Clause::TwoCommonPoints, "common points are not rational".into()));
    };
    let (in2, out2) = arcs(&rest2, p2.at_infinity).expect("same common points");
    let separated = (in1 == 2 && out1 == 0 && in2 == 0 && out2 == 2) || (in1 == 0 && out1 == 2 && in2 == 2 && out2 == 0);
    if !separated {
        return Err(fail(
            Clause::Separated,
            format!("arc counts Λ1 ({in1},{out1}), Λ2 ({in2},{out2})"),
        ));
    }
    Ok(PencilReport {
        common_points: common,
        clauses: vec![(Clause::TwoCommonPoints, true), (Clause::FourRealPoints, true), (Clause::Separated, true)],
    })
}

/// A closed subset of `R ∪ {∞}` given by isolated points and closed intervals.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RealSet {
    pub points: Vec<Point>,
    /// Closed intervals `[a, b]` with `a < b`, finite endpoints.
    pub intervals: Vec<(Q, Q)>,
    /// Open tails `(-∞, a]`, `[b, ∞)` joined through `∞`, if present.
    pub through_infinity: Option<(Q, Q)>,
    pub whole_line: bool,
}

impl RealSet {
    pub fn is_finite_set(&self) -> bool {
        self.intervals.is_empty() && self.through_infinity.is_none() && !self.whole_line
    }
}

impl fmt::Display for RealSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.whole_line {
            return write!(f, "{{all}}");
        }
        let mut parts: Vec<String> = self.points.iter().map(|p| p.to_string()).collect();
        parts.extend(self.intervals.iter().map(|(a, b)| format!("[{a},{b}]")));
        if let Some((a, b)) = &self.through_infinity {
            parts.push(format!("[{b},inf]u[inf,{a}]"));
        }
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// `{x : f1(x) >= 0 and f2(x) >= 0}` on the real projective line, by a sign table
/// over the arcs cut out by the roots of both quartics.
pub fn real_point_analysis(f1: &Poly, f2: &Poly) -> Result<RealSet> {
    let r1 = f1.rational_roots();
    let r2 = f2.rational_roots();
    if r1.len() != f1.count_all_real_roots() {
        return Err(ModelError::IrrationalRoots("f1"));
    }
    if r2.len() != f2.count_all_real_roots() {
        return Err(ModelError::IrrationalRoots("f2"));
    }
    let mut roots: Vec<Q> = r1.into_iter().chain(r2).collect();
    roots.sort();
    roots.dedup();
    let ok = |x: &Point| sign(&eval_on_line(f1, x)) >= 0 && sign(&eval_on_line(f2, x)) >= 0;
    let mut set = RealSet::default();
    if roots.is_empty() {
        set.whole_line = ok(&Point::Finite(Q::zero()));
        return Ok(set);
    }
    let n = roots.len();
    let two = q(2);
    let inner_ok: Vec<bool> = (0..n - 1)
        .map(|i| ok(&Point::Finite((&roots[i] + &roots[i + 1]) / &two)))
        .collect();
    let outer_ok = ok(&Point::Finite(&roots[n - 1] + Q::one())) && ok(&Point::Infinity) && ok(&Point::Finite(&roots[0] - Q::one()));
    // merge consecutive good arcs into closed intervals
    let mut i = 0;
    while i < n - 1 {
        if inner_ok[i] {
            let start = i;
            while i < n - 1 && inner_ok[i] {
                i += 1;
            }
            set.intervals.push((roots[start].clone(), roots[i].clone()));
        } else {
            i += 1;
        }
    }
    if outer_ok {
        set.through_infinity = Some((roots[0].clone(), roots[n - 1].clone()));
    }
    let covered = |x: &Q| {
        set.intervals.iter().any(|(a, b)| a <= x && x <= b)
            || set.through_infinity.as_ref().is_some_and(|(a, b)| x <= a || x >= b)
    };
    let isolated: Vec<Point> = roots
        .iter()
        .filter(|r| ok(&Point::Finite((*r).clone())) && !covered(r))
        .map(|r| Point::Finite(r.clone()))
        .collect();
    set.points = isolated;
    if !outer_ok && ok(&Point::Infinity) {
        set.points.push(Point::Infinity);
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FiberKind {
    /// Irreducible quartic surface with four ordinary double points.
    Irreducible4ODP,
    /// Two quadratic cones sharing a conic.
    TwoQuadricCones,
    /// Four planes meeting in a cycle, with a node of the total space.
    FourPlanesWithNode,
}

impl fmt::Display for FiberKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FiberKind::Irreducible4ODP => "irreducible-4odp",
            FiberKind::TwoQuadricCones => "two-quadric-cones",
            FiberKind::FourPlanesWithNode => "four-planes-with-node",
        };
        write!(f, "{s}")
    }
}

pub fn fiber_kind_of(f1: &Poly, f2: &Poly, x: &Point) -> FiberKind {
    match (eval_on_line(f1, x).is_zero(), eval_on_line(f2, x).is_zero()) {
        (false, false) => FiberKind::Irreducible4ODP,
        (true, true) => FiberKind::FourPlanesWithNode,
        _ => FiberKind::TwoQuadricCones,
    }
}

/// Fractional linear map `x -> (a x + b) / (c x + d)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mobius {
    pub a: Q,
    pub b: Q,
    pub c: Q,
    pub d: Q,
}

impl Mobius {
    /// The unique map with `p1 -> 0`, `p2 -> 1`, `p3 -> 2`.
    pub fn normalizing(p1: &Q, p2: &Q, p3: &Q) -> Mobius {
        // x -> 2 * CR where CR = (x - p1)(p2 - p3) / ((x - p3)(p2 - p1)) sends p1,p2,p3 to 0,1,inf;
        // compose with y -> 2y/(y+1) to send 0,1,inf to 0,1,2
        let k = (p2 - p3) / (p2 - p1);
        // y = k (x - p1) / (x - p3)
        // 2y/(y+1) = 2k(x - p1) / (k(x - p1) + (x - p3))
        let two = q(2);
        Mobius {
            a: &two * &k,
            b: -(&two * &k * p1),
            c: &k + Q::one(),
            d: -(&k * p1) - p3,
        }
    }

    pub fn apply(&self, x: &Q) -> Point {
        let den = &self.c * x + &self.d;
        if den.is_zero() {
            Point::Infinity
        } else {
            Point::Finite((&self.a * x + &self.b) / den)
        }
    }
}

/// Cross-ratio `(a, b; c, d)`.
pub fn cross_ratio(a: &Q, b: &Q, c: &Q, d: &Q) -> Q {
    ((a - c) * (b - d)) / ((a - d) * (b - c))
}

/// Applies the fractional linear map sending `l1, l2, l3` to `0, 1, 2`.
/// Fails if that map sends a later parameter to infinity or out of order.
pub fn mobius_normalize(ci: &ConformalInvariant) -> Result<ConformalInvariant> {
    let m = Mobius::normalizing(ci.lambda(1), ci.lambda(2), ci.lambda(3));
    let mut out = Vec::new();
    for x in ci.lambdas() {
        match m.apply(x) {
            Point::Finite(v) => out.push(v),
            Point::Infinity => return Err(ModelError::NotNormalizable),
        }
    }
    ConformalInvariant::new(out).map_err(|_| ModelError::NotNormalizable)
}

/// Sparse polynomial in `x1..x7`, keyed by exponent vectors.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Poly7 {
    pub terms: BTreeMap<[u8; 7], Q>,
}

impl Poly7 {
    pub fn add_term(&mut self, e: [u8; 7], c: Q) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(e).or_insert_with(Q::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&e);
        }
    }

    pub fn monomial(vars: &[usize], c: Q) -> Poly7 {
        let mut e = [0u8; 7];
        for &v in vars {
            e[v] += 1;
        }
        let mut p = Poly7::default();
        p.add_term(e, c);
        p
    }

    pub fn sub(&self, other: &Poly7) -> Poly7 {
        let mut p = self.clone();
        for (e, c) in &other.terms {
            p.add_term(*e, -c.clone());
        }
        p
    }

    /// Substitutes `x_i -> x_{perm[i]}` and conjugates coefficients (rational, so fixed).
    pub fn permuted(&self, perm: &[usize; 7]) -> Poly7 {
        let mut p = Poly7::default();
        for (e, c) in &self.terms {
            let mut f = [0u8; 7];
            for i in 0..7 {
                f[perm[i]] += e[i];
            }
            p.add_term(f, c.clone());
        }
        p
    }

    /// Torus weights of all monomials.
    pub fn weights(&self, w: &[LatticeVector; 7]) -> Vec<LatticeVector> {
        self.terms
            .keys()
            .map(|e| (0..7).fold(LatticeVector::ZERO, |acc, i| acc + i64::from(e[i]) * w[i]))
            .collect()
    }

    pub fn is_proportional_to(&self, other: &Poly7) -> bool {
        let Some((e, c)) = self.terms.iter().next() else { return other.terms.is_empty() };
        let Some(d) = other.terms.get(e) else { return false };
        let r = d / c;
        self.terms.len() == other.terms.len()
            && self.terms.iter().all(|(e, c)| other.terms.get(e) == Some(&(c * &r)))
    }
}

/// Real structure on P^6: swap `x1 <-> x2`, `x3 <-> x4`, fix the rest, conjugate.
pub const REAL_STRUCTURE: [usize; 7] = [1, 0, 3, 2, 4, 5, 6];

/// Weights of the torus on `x1..x7`: `(s, 1/s, t, 1/t, 1, 1, 1)`.
pub fn torus_weights() -> [LatticeVector; 7] {
    [lv(1, 0), lv(-1, 0), lv(0, 1), lv(0, -1), lv(0, 0), lv(0, 0), lv(0, 0)]
}

/// The complete intersection `x1 x2 = Q1`, `x3 x4 = Q2`, `x5^2 = x6 x7`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectiveModel {
    pub invariant: ConformalInvariant,
    pub f1: Poly,
    pub f2: Poly,
    pub q1: TernaryQuadric,
    pub q2: TernaryQuadric,
    pub lambda_conic: TernaryQuadric,
    pub real_structure: [usize; 7],
    pub g_weights: [LatticeVector; 7],
    pub pencil: PencilReport,
    pub real_points: RealSet,
}

impl ProjectiveModel {
    pub fn equations(&self) -> [Poly7; 3] {
        [
            Poly7::monomial(&[0, 1], Q::one()).sub(&self.q1.to_poly7()),
            Poly7::monomial(&[2, 3], Q::one()).sub(&self.q2.to_poly7()),
            self.lambda_conic.to_poly7(),
        ]
    }

    /// Each equation maps to a multiple of one of the equations.
    pub fn real_structure_consistent(&self) -> bool {
        let eqs = self.equations();
        eqs.iter().all(|e| {
            let img = e.permuted(&self.real_structure);
            eqs.iter().any(|f| img.is_proportional_to(f))
        })
    }

    /// Every monomial of every equation has weight zero.
    pub fn weights_consistent(&self) -> bool {
        self.equations()
            .iter()
            .all(|e| e.weights(&self.g_weights).iter().all(|w| *w == LatticeVector::ZERO))
    }

    pub fn fiber_kind(&self, x: &Point) -> FiberKind {
        fiber_kind_of(&self.f1, &self.f2, x)
    }

    /// Special parameters in increasing order with their fiber kinds.
    pub fn special_fibers(&self) -> Vec<(usize, Q, FiberKind)> {
        (1..=6)
            .map(|i| {
                let l = self.invariant.lambda(i).clone();
                let k = self.fiber_kind(&Point::Finite(l.clone()));
                (i, l, k)
            })
            .collect()
    }
}

pub fn fiber_kind(model: &ProjectiveModel, x: &Point) -> FiberKind {
    model.fiber_kind(x)
}

pub fn assemble_model(ci: &ConformalInvariant) -> Result<ProjectiveModel> {
    let (f1, f2) = quartics_from_invariant(ci);
    let (q1, q2) = (lift_to_quadric(&f1), lift_to_quadric(&f2));
    let pencil = verify_pencil(&q1, &q2).map_err(ModelError::Violation)?;
    let real_points = real_point_analysis(&f1, &f2)?;
    let expected = [ci.lambda(1).clone(), ci.lambda(4).clone()];
    let only_two = real_points.is_finite_set()
        && real_points.points == expected.iter().cloned().map(Point::Finite).collect::<Vec<_>>();
    if !only_two {
        return Err(ModelError::RealPoints(real_points.to_string()));
    }
    Ok(ProjectiveModel {
        invariant: ci.clone(),
        f1,
        f2,
        q1,
        q2,
        lambda_conic: TernaryQuadric::lambda_conic(),
        real_structure: REAL_STRUCTURE,
        g_weights: torus_weights(),
        pencil,
        real_points,
    })
}
