//! Two-dimensional lattice and fan calculus.
//!
//! A smooth complete fan in the plane is the same thing as a smooth projective
//! toric surface. Everything here is exact integer or rational arithmetic.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_integer::Integer;
use num_rational::Ratio;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("empty ray sequence")]
    Empty,
    #[error("ray {0} is not primitive")]
    NonPrimitiveRay(LatticeVector),
    #[error("rays {0} and {1} are not in strict counterclockwise order")]
    NotCounterclockwise(LatticeVector, LatticeVector),
    #[error("rays do not cover the plane exactly once")]
    NotComplete,
    #[error("ray {0} appears twice")]
    DuplicateRay(LatticeVector),
    #[error("cone {0} has determinant {1}")]
    SingularCone(usize, i64),
    #[error("ray {0} has self-intersection {1}, not -1")]
    NotMinusOneCurve(usize, i64),
    #[error("cycle does not close up into a complete fan")]
    ClosureFailure,
    #[error("sum of self-intersections is {sum}, expected {expected}")]
    EulerMismatch { sum: i64, expected: i64 },
    #[error("section polytope is unbounded")]
    UnboundedPolytope,
    #[error("linear system is empty")]
    EmptySystem,
    #[error("divisor has {0} coefficients for {1} rays")]
    DivisorLength(usize, usize),
    #[error("index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("integer overflow")]
    Overflow,
}

pub type Result<T> = std::result::Result<T, LatticeError>;

/// An element of Z^2, used both for rays (cocharacters) and for characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct LatticeVector {
    pub x: i64,
    pub y: i64,
}

pub const fn lv(x: i64, y: i64) -> LatticeVector {
    LatticeVector { x, y }
}

impl LatticeVector {
    pub const ZERO: LatticeVector = lv(0, 0);

    pub fn det(self, other: LatticeVector) -> i64 {
        self.x * other.y - self.y * other.x
    }

    pub fn dot(self, other: LatticeVector) -> i64 {
        self.x * other.x + self.y * other.y
    }

    pub fn is_primitive(self) -> bool {
        self.x.gcd(&self.y) == 1
    }

    pub fn checked_add(self, other: LatticeVector) -> Option<LatticeVector> {
        Some(lv(self.x.checked_add(other.x)?, self.y.checked_add(other.y)?))
    }

    pub fn checked_scale(self, k: i64) -> Option<LatticeVector> {
        Some(lv(self.x.checked_mul(k)?, self.y.checked_mul(k)?))
    }
}

impl Add for LatticeVector {
    type Output = LatticeVector;
    fn add(self, o: LatticeVector) -> LatticeVector {
        lv(self.x + o.x, self.y + o.y)
    }
}

impl Sub for LatticeVector {
    type Output = LatticeVector;
    fn sub(self, o: LatticeVector) -> LatticeVector {
        lv(self.x - o.x, self.y - o.y)
    }
}

impl Neg for LatticeVector {
    type Output = LatticeVector;
    fn neg(self) -> LatticeVector {
        lv(-self.x, -self.y)
    }
}

impl Mul<LatticeVector> for i64 {
    type Output = LatticeVector;
    fn mul(self, v: LatticeVector) -> LatticeVector {
        lv(self * v.x, self * v.y)
    }
}

impl fmt::Display for LatticeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// Integer 2x2 matrix acting on column vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Mat2(pub [[i64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1, 0], [0, 1]]);

    pub fn det(&self) -> i64 {
        let m = self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn apply(&self, v: LatticeVector) -> LatticeVector {
        let m = self.0;
        lv(m[0][0] * v.x + m[0][1] * v.y, m[1][0] * v.x + m[1][1] * v.y)
    }

    pub fn compose(&self, other: &Mat2) -> Mat2 {
        let (a, b) = (self.0, other.0);
        let mut out = [[0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(out)
    }

    /// Inverse of a unimodular matrix.
    pub fn inverse_unimodular(&self) -> Option<Mat2> {
        let d = self.det();
        if d.abs() != 1 {
            return None;
        }
        let m = self.0;
        Some(Mat2([[m[1][1] * d, -m[0][1] * d], [-m[1][0] * d, m[0][0] * d]]))
    }

    pub fn transpose(&self) -> Mat2 {
        let m = self.0;
        Mat2([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    /// The unique matrix sending `a -> c` and `b -> d`, if it is integral.
    pub fn sending(a: LatticeVector, b: LatticeVector, c: LatticeVector, d: LatticeVector) -> Option<Mat2> {
        let den = a.det(b);
        if den == 0 {
            return None;
        }
        // M = [c d] * adj([a b]) / den
        let num = [
            [c.x * b.y - d.x * a.y, -c.x * b.x + d.x * a.x],
            [c.y * b.y - d.y * a.y, -c.y * b.x + d.y * a.x],
        ];
        let mut out = [[0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                if num[i][j] % den != 0 {
                    return None;
                }
                out[i][j] = num[i][j] / den;
            }
        }
        Some(Mat2(out))
    }
}

fn in_closed_half_plane(rays: &[LatticeVector]) -> bool {
    rays.iter().any(|&r| {
        rays.iter().all(|&v| r.det(v) >= 0) || rays.iter().all(|&v| r.det(v) <= 0)
    })
}

fn lex_min_index(rays: &[LatticeVector]) -> usize {
    rays.iter()
        .enumerate()
        .min_by_key(|(_, v)| **v)
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Cyclically ordered primitive rays of a complete fan.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CompleteFan {
    rays: Vec<LatticeVector>,
}

impl CompleteFan {
    pub fn rays(&self) -> &[LatticeVector] {
        &self.rays
    }

    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }

    pub fn ray(&self, i: usize) -> LatticeVector {
        let k = self.rays.len();
        self.rays[i % k]
    }

    /// Determinant of cone `i`, spanned by rays `i` and `i + 1`.
    pub fn cone_det(&self, i: usize) -> i64 {
        self.ray(i).det(self.ray(i + 1))
    }

    pub fn position(&self, v: LatticeVector) -> Option<usize> {
        self.rays.iter().position(|&r| r == v)
    }
}

/// Checks the fan conditions in a fixed order and returns the first failure.
/// The result is rotated to start at the lexicographically smallest ray.
pub fn validate_fan(rays: &[LatticeVector]) -> Result<CompleteFan> {
    validate_rotation(rays).map(|shift| {
        let mut rays = rays.to_vec();
        rays.rotate_left(shift);
        CompleteFan { rays }
    })
}

fn validate_rotation(rays: &[LatticeVector]) -> Result<usize> {
    if rays.is_empty() {
        return Err(LatticeError::Empty);
    }
    if let Some(&v) = rays.iter().find(|v| !v.is_primitive()) {
        return Err(LatticeError::NonPrimitiveRay(v));
    }
    for (i, v) in rays.iter().enumerate() {
        if rays[..i].contains(v) {
            return Err(LatticeError::DuplicateRay(*v));
        }
    }
    if in_closed_half_plane(rays) {
        return Err(LatticeError::NotComplete);
    }
    let k = rays.len();
    for i in 0..k {
        let (v, w) = (rays[i], rays[(i + 1) % k]);
        if v.det(w) <= 0 {
            return Err(LatticeError::NotCounterclockwise(v, w));
        }
    }
    let e = lv(1, 0);
    let winding = (0..k)
        .filter(|&i| {
            let (v, w) = (rays[i], rays[(i + 1) % k]);
            v.det(e) > 0 && e.det(w) >= 0
        })
        .count();
    if winding != 1 {
        return Err(LatticeError::NotComplete);
    }
    Ok(lex_min_index(rays))
}

/// A fan together with a label per ray.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ToricSurfaceModel {
    fan: CompleteFan,
    labels: Vec<String>,
}

/// Integer coefficients `b_i` of the divisor `sum b_i D_i`, indexed like the rays.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TorusDivisor {
    pub coefficients: Vec<i64>,
}

impl TorusDivisor {
    pub fn new(coefficients: Vec<i64>) -> Self {
        TorusDivisor { coefficients }
    }

    pub fn constant(k: usize, c: i64) -> Self {
        TorusDivisor { coefficients: vec![c; k] }
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(|&c| c == 0)
    }
}

/// Lattice points of a section polytope, i.e. torus characters of a basis of sections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedSectionSpace {
    pub weights: Vec<LatticeVector>,
}

impl WeightedSectionSpace {
    pub fn dimension(&self) -> usize {
        self.weights.len()
    }
}

/// A lattice automorphism identifying two fans, with the induced map on indices:
/// ray `i` of the source goes to ray `shift + sign * i` of the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FanIsomorphism {
    pub matrix: Mat2,
    pub shift: usize,
    pub reflected: bool,
}

impl FanIsomorphism {
    pub fn target_index(&self, i: usize, k: usize) -> usize {
        if self.reflected {
            (self.shift + k - i % k) % k
        } else {
            (self.shift + i) % k
        }
    }
}

impl ToricSurfaceModel {
    pub fn new(rays: &[LatticeVector]) -> Result<Self> {
        let labels = (0..rays.len()).map(|i| format!("D{}", i + 1)).collect::<Vec<_>>();
        Self::labeled(rays, &labels)
    }

    pub fn labeled<S: AsRef<str>>(rays: &[LatticeVector], labels: &[S]) -> Result<Self> {
        let shift = validate_rotation(rays)?;
        let mut rays = rays.to_vec();
        let mut labels: Vec<String> = labels.iter().map(|s| s.as_ref().to_string()).collect();
        labels.resize(rays.len(), String::new());
        rays.rotate_left(shift);
        labels.rotate_left(shift);
        Ok(ToricSurfaceModel { fan: CompleteFan { rays }, labels })
    }

    pub fn from_fan(fan: CompleteFan) -> Self {
        let labels = (0..fan.len()).map(|i| format!("D{}", i + 1)).collect();
        ToricSurfaceModel { fan, labels }
    }

    pub fn fan(&self) -> &CompleteFan {
        &self.fan
    }

    pub fn rays(&self) -> &[LatticeVector] {
        self.fan.rays()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i % self.labels.len()]
    }

    pub fn len(&self) -> usize {
        self.fan.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fan.is_empty()
    }

    pub fn index_of_label(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn smooth_cones(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.fan.cone_det(i) == 1).collect()
    }

    pub fn is_smooth(&self) -> bool {
        self.smooth_cones().iter().all(|&s| s)
    }

    fn require_smooth(&self) -> Result<()> {
        match (0..self.len()).find(|&i| self.fan.cone_det(i) != 1) {
            Some(i) => Err(LatticeError::SingularCone(i, self.fan.cone_det(i))),
            None => Ok(()),
        }
    }

    /// Self-intersection of ray `i`, from `v_{i-1} + v_{i+1} = -a_i v_i`.
    pub fn self_intersection(&self, i: usize) -> Result<i64> {
        self.require_smooth()?;
        Ok(self.a_unchecked(i))
    }

    fn a_unchecked(&self, i: usize) -> i64 {
        let k = self.len();
        let (p, n) = (self.fan.ray(i + k - 1), self.fan.ray(i + 1));
        -p.det(n)
    }

    pub fn self_intersections(&self) -> Result<Vec<i64>> {
        self.require_smooth()?;
        Ok((0..self.len()).map(|i| self.a_unchecked(i)).collect())
    }

    pub fn k_squared(&self) -> Result<i64> {
        self.require_smooth()?;
        Ok(12 - self.len() as i64)
    }

    /// Inserts `v_i + v_{i+1}` into the smooth cone `i`.
    pub fn blow_up_corner(&self, i: usize) -> Result<Self> {
        self.blow_up_corner_labeled(i, &format!("E{}", self.len() + 1))
    }

    pub fn blow_up_corner_labeled(&self, i: usize, label: &str) -> Result<Self> {
        let k = self.len();
        if i >= k {
            return Err(LatticeError::IndexOutOfRange(i));
        }
        let d = self.fan.cone_det(i);
        if d != 1 {
            return Err(LatticeError::SingularCone(i, d));
        }
        let new = self.fan.ray(i) + self.fan.ray(i + 1);
        Ok(self.inserted(i, new, label))
    }

    fn inserted(&self, i: usize, ray: LatticeVector, label: &str) -> Self {
        let mut rays = self.rays().to_vec();
        let mut labels = self.labels.clone();
        rays.insert(i + 1, ray);
        labels.insert(i + 1, label.to_string());
        let shift = lex_min_index(&rays);
        rays.rotate_left(shift);
        labels.rotate_left(shift);
        ToricSurfaceModel { fan: CompleteFan { rays }, labels }
    }

    /// Removes ray `i`, which must be a (-1)-curve between smooth cones.
    pub fn blow_down(&self, i: usize) -> Result<Self> {
        let k = self.len();
        if i >= k {
            return Err(LatticeError::IndexOutOfRange(i));
        }
        for c in [i + k - 1, i] {
            let d = self.fan.cone_det(c % k);
            if d != 1 {
                return Err(LatticeError::SingularCone(c % k, d));
            }
        }
        let a = self.a_unchecked(i);
        if a != -1 || k <= 3 {
            return Err(LatticeError::NotMinusOneCurve(i, a));
        }
        let mut rays = self.rays().to_vec();
        let mut labels = self.labels.clone();
        rays.remove(i);
        labels.remove(i);
        ToricSurfaceModel::labeled(&rays, &labels)
    }

    /// Minimal resolution: every cone of determinant `d > 1` is subdivided by the
    /// Hirzebruch-Jung rays. New rays are labeled `X1, X2, ...` in insertion order.
    pub fn resolve_singular_cones(&self) -> Self {
        let mut rays = Vec::new();
        let mut labels = Vec::new();
        let mut count = 0;
        for i in 0..self.len() {
            rays.push(self.fan.ray(i));
            labels.push(self.labels[i].clone());
            for r in hirzebruch_jung_rays(self.fan.ray(i), self.fan.ray(i + 1)) {
                count += 1;
                rays.push(r);
                labels.push(format!("X{count}"));
            }
        }
        ToricSurfaceModel::labeled(&rays, &labels).expect("subdivision of a valid fan is valid")
    }

    fn check_divisor(&self, d: &TorusDivisor) -> Result<()> {
        if d.coefficients.len() != self.len() {
            return Err(LatticeError::DivisorLength(d.coefficients.len(), self.len()));
        }
        Ok(())
    }

    /// Lattice points `u` with `<u, v_i> >= -b_i` for every ray.
    pub fn sections_of_divisor(&self, d: &TorusDivisor) -> Result<WeightedSectionSpace> {
        self.check_divisor(d)?;
        Ok(WeightedSectionSpace { weights: polytope_points(self.rays(), &d.coefficients)? })
    }

    pub fn fixed_movable_decomposition(&self, d: &TorusDivisor) -> Result<(TorusDivisor, TorusDivisor)> {
        let sections = self.sections_of_divisor(d)?;
        if sections.weights.is_empty() {
            return Err(LatticeError::EmptySystem);
        }
        let fixed: Vec<i64> = self
            .rays()
            .iter()
            .zip(&d.coefficients)
            .map(|(&v, &b)| sections.weights.iter().map(|&u| u.dot(v) + b).min().unwrap_or(0))
            .collect();
        let movable = d.coefficients.iter().zip(&fixed).map(|(b, f)| b - f).collect();
        Ok((TorusDivisor::new(fixed), TorusDivisor::new(movable)))
    }

    /// `D . D_i` for each ray.
    pub fn intersection_with_rays(&self, d: &TorusDivisor) -> Result<Vec<i64>> {
        self.check_divisor(d)?;
        let a = self.self_intersections()?;
        let k = self.len();
        let b = &d.coefficients;
        Ok((0..k).map(|i| b[(i + k - 1) % k] + a[i] * b[i] + b[(i + 1) % k]).collect())
    }

    pub fn divisor_self_intersection(&self, d: &TorusDivisor) -> Result<i64> {
        let dots = self.intersection_with_rays(d)?;
        Ok(dots.iter().zip(&d.coefficients).map(|(x, b)| x * b).sum())
    }

    /// The anticanonical divisor `sum D_i`.
    pub fn anticanonical(&self) -> TorusDivisor {
        TorusDivisor::constant(self.len(), 1)
    }
}

/// Rays strictly inside the cone `(u, w)` that resolve it minimally, ordered from `u` to `w`.
pub fn hirzebruch_jung_rays(u: LatticeVector, w: LatticeVector) -> Vec<LatticeVector> {
    let mut out = Vec::new();
    let mut u = u;
    loop {
        let d = u.det(w);
        if d <= 1 {
            return out;
        }
        let p = unimodular_partner(u);
        // r = p + t u with 0 < det(r, w) < d
        let t = Integer::div_floor(&(-p.det(w)), &d) + 1;
        let r = p + t * u;
        out.push(r);
        u = r;
    }
}

/// Some `p` with `det(u, p) = 1`, for primitive `u`.
fn unimodular_partner(u: LatticeVector) -> LatticeVector {
    let e = u.x.extended_gcd(&u.y);
    // e.x * u.x + e.y * u.y = 1, so det(u, (-e.y, e.x)) = 1
    let s = e.gcd.signum();
    lv(-e.y * s, e.x * s)
}

fn polytope_points(rays: &[LatticeVector], b: &[i64]) -> Result<Vec<LatticeVector>> {
    if rays.is_empty() || in_closed_half_plane(rays) {
        return Err(LatticeError::UnboundedPolytope);
    }
    type Q = Ratio<i64>;
    let feasible = |p: (Q, Q)| {
        rays.iter().zip(b).all(|(v, &bi)| p.0 * v.x + p.1 * v.y >= Q::from(-bi))
    };
    let mut bounds: Option<(Q, Q, Q, Q)> = None;
    for i in 0..rays.len() {
        for j in i + 1..rays.len() {
            let (v, w) = (rays[i], rays[j]);
            let den = v.det(w);
            if den == 0 {
                continue;
            }
            // solve <u,v> = -b_i, <u,w> = -b_j
            let (ci, cj) = (-b[i], -b[j]);
            let x = Q::new(ci * w.y - cj * v.y, den);
            let y = Q::new(v.x * cj - w.x * ci, den);
            if !feasible((x, y)) {
                continue;
            }
            bounds = Some(match bounds {
                None => (x, x, y, y),
                Some((x0, x1, y0, y1)) => (x0.min(x), x1.max(x), y0.min(y), y1.max(y)),
            });
        }
    }
    let Some((x0, x1, y0, y1)) = bounds else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for x in x0.ceil().to_integer()..=x1.floor().to_integer() {
        for y in y0.ceil().to_integer()..=y1.floor().to_integer() {
            let u = lv(x, y);
            if rays.iter().zip(b).all(|(&v, &bi)| u.dot(v) >= -bi) {
                out.push(u);
            }
        }
    }
    Ok(out)
}

/// Rebuilds a fan from its self-intersection cycle, seeding `(1,0), (0,1)`.
pub fn fan_from_cycle(a: &[i64]) -> Result<CompleteFan> {
    let k = a.len();
    if k == 0 {
        return Err(LatticeError::Empty);
    }
    let sum: i64 = a.iter().sum();
    let expected = 12 - 3 * k as i64;
    if sum != expected {
        return Err(LatticeError::EulerMismatch { sum, expected });
    }
    if k < 3 {
        return Err(LatticeError::ClosureFailure);
    }
    let step = |ai: i64, cur: LatticeVector, prev: LatticeVector| -> Result<LatticeVector> {
        cur.checked_scale(-ai)
            .and_then(|v| v.checked_add(-prev))
            .ok_or(LatticeError::Overflow)
    };
    let mut rays = vec![lv(1, 0), lv(0, 1)];
    for i in 1..k - 1 {
        let next = step(a[i], rays[i], rays[i - 1])?;
        rays.push(next);
    }
    let closes = step(a[k - 1], rays[k - 1], rays[k - 2])? == rays[0]
        && step(a[0], rays[0], rays[k - 1])? == rays[1];
    if !closes {
        return Err(LatticeError::ClosureFailure);
    }
    validate_fan(&rays).map_err(|_| LatticeError::ClosureFailure)
}

/// Finds a lattice automorphism carrying the fan of `s1` onto the fan of `s2`.
pub fn fan_isomorphic(s1: &ToricSurfaceModel, s2: &ToricSurfaceModel) -> Option<FanIsomorphism> {
    fan_isomorphisms(s1.fan(), s2.fan()).into_iter().next()
}

/// All lattice automorphisms between two fans, identity first when it applies.
pub fn fan_isomorphisms(f1: &CompleteFan, f2: &CompleteFan) -> Vec<FanIsomorphism> {
    let k = f1.len();
    let mut out = Vec::new();
    if k != f2.len() || k < 2 {
        return out;
    }
    let (a, b) = (f1.ray(0), f1.ray(1));
    for reflected in [false, true] {
        for shift in 0..k {
            let iso = FanIsomorphism { matrix: Mat2::IDENTITY, shift, reflected };
            let (c, d) = (f2.ray(iso.target_index(0, k)), f2.ray(iso.target_index(1, k)));
            let Some(m) = Mat2::sending(a, b, c, d) else { continue };
            if m.det().abs() != 1 {
                continue;
            }
            if (0..k).all(|i| m.apply(f1.ray(i)) == f2.ray(iso.target_index(i, k))) {
                out.push(FanIsomorphism { matrix: m, ..iso });
            }
        }
    }
    out
}

/// Lexicographically smallest rotation or reflection of a cyclic sequence.
pub fn canonical_cycle<T: Ord + Clone>(seq: &[T]) -> Vec<T> {
    let k = seq.len();
    let mut best: Option<Vec<T>> = None;
    for rev in [false, true] {
        let base: Vec<T> = if rev { seq.iter().rev().cloned().collect() } else { seq.to_vec() };
        for s in 0..k.max(1) {
            let mut c = base.clone();
            c.rotate_left(s % k.max(1));
            if best.as_ref().is_none_or(|b| c.cmp(b) == Ordering::Less) {
                best = Some(c);
            }
        }
    }
    best.unwrap_or_default()
}

pub fn cyclically_equivalent<T: Ord + Clone>(a: &[T], b: &[T]) -> bool {
    a.len() == b.len() && canonical_cycle(a) == canonical_cycle(b)
}
