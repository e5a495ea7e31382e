//! Torus actions encoded by isotropy sequences, their classification, and the
//! toric surfaces they determine.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use thiserror::Error;

use crate::lattice::{
    lv, validate_fan, LatticeError, LatticeVector, Mat2, ToricSurfaceModel, TorusDivisor,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TorusError {
    #[error("entry {0} is not primitive")]
    NonPrimitive(LatticeVector),
    #[error("adjacent entries {0} and {1} have determinant of absolute value {2}")]
    DeterminantViolation(LatticeVector, LatticeVector, i64),
    #[error("sequence needs at least three entries, got {0}")]
    TooShort(usize),
    #[error("double cover is not a valid fan: {0}")]
    FanInvalid(LatticeError),
    #[error("no completion of half {0} passes the checks")]
    NoCandidate(usize),
    #[error("catalog needs a sequence of length 6, got {0}")]
    WrongLength(usize),
    #[error("n = {0} outside the supported range 1..=5")]
    UnsupportedN(usize),
}

pub type Result<T> = std::result::Result<T, TorusError>;

/// Representative of the class `{v, -v}`: first nonzero coordinate positive.
pub fn sign_class(v: LatticeVector) -> LatticeVector {
    if v.x < 0 || (v.x == 0 && v.y < 0) {
        -v
    } else {
        v
    }
}

/// Cyclic list of isotropy directions, each up to sign.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IsotropySequence {
    entries: Vec<LatticeVector>,
}

impl IsotropySequence {
    pub fn entries(&self) -> &[LatticeVector] {
        &self.entries
    }

    /// Number of projective planes in the connected sum.
    pub fn n(&self) -> usize {
        self.entries.len() - 2
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn reversed(&self) -> Self {
        IsotropySequence { entries: self.entries.iter().rev().copied().collect() }
    }
}

pub fn validate_sequence(entries: &[LatticeVector]) -> Result<IsotropySequence> {
    if entries.len() < 3 {
        return Err(TorusError::TooShort(entries.len()));
    }
    if let Some(&v) = entries.iter().find(|v| !v.is_primitive()) {
        return Err(TorusError::NonPrimitive(v));
    }
    let k = entries.len();
    for i in 0..k {
        let (v, w) = (entries[i], entries[(i + 1) % k]);
        let d = v.det(w).abs();
        if d != 1 {
            return Err(TorusError::DeterminantViolation(v, w, d));
        }
    }
    Ok(IsotropySequence { entries: entries.to_vec() })
}

pub fn type_one() -> IsotropySequence {
    validate_sequence(&[lv(1, 0), lv(1, 1), lv(0, 1), lv(-1, 2), lv(-2, 3), lv(-1, 1)])
        .expect("valid")
}

pub fn type_two() -> IsotropySequence {
    validate_sequence(&[lv(1, 0), lv(1, 1), lv(0, 1), lv(-1, 2), lv(-1, 1), lv(-2, 1)])
        .expect("valid")
}

fn dihedral(entries: &[LatticeVector], shift: usize, reversed: bool) -> Vec<LatticeVector> {
    let k = entries.len();
    (0..k)
        .map(|j| if reversed { entries[(shift + k - j) % k] } else { entries[(shift + j) % k] })
        .collect()
}

/// Canonical representative of the equivalence class: the lexicographically
/// smallest normalized image over all dihedral alignments and both bases.
pub fn canonical_form(s: &IsotropySequence) -> Vec<LatticeVector> {
    let k = s.len();
    let mut best: Option<Vec<LatticeVector>> = None;
    for reversed in [false, true] {
        for shift in 0..k {
            let e = dihedral(&s.entries, shift, reversed);
            for sign in [1, -1] {
                let Some(m) = Mat2::sending(e[0], e[1], lv(1, 0), lv(0, sign)) else { continue };
                let img: Vec<_> = e.iter().map(|&v| sign_class(m.apply(v))).collect();
                if best.as_ref().is_none_or(|b| img.cmp(b) == Ordering::Less) {
                    best = Some(img);
                }
            }
        }
    }
    best.unwrap_or_default()
}

/// Direct search for a lattice map plus dihedral symmetry plus sign flips.
pub fn equivalent_actions(s1: &IsotropySequence, s2: &IsotropySequence) -> bool {
    let k = s1.len();
    if k != s2.len() {
        return false;
    }
    let e = &s1.entries;
    for reversed in [false, true] {
        for shift in 0..k {
            let f = dihedral(&s2.entries, shift, reversed);
            for (s0, s1) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                let Some(m) = Mat2::sending(e[0], e[1], s0 * f[0], s1 * f[1]) else { continue };
                if m.det().abs() != 1 {
                    continue;
                }
                if e.iter().zip(&f).all(|(&v, &w)| sign_class(m.apply(v)) == sign_class(w)) {
                    return true;
                }
            }
        }
    }
    false
}

/// Equivalence class of actions with a canonical representative.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ActionClass {
    pub canonical_representative: Vec<LatticeVector>,
    pub n: usize,
}

impl ActionClass {
    pub fn sequence(&self) -> IsotropySequence {
        IsotropySequence { entries: self.canonical_representative.clone() }
    }
}

fn antipodal_fans(n: usize) -> Vec<ToricSurfaceModel> {
    let start = ToricSurfaceModel::new(&[lv(1, 0), lv(1, 1), lv(0, 1), lv(-1, 0), lv(-1, -1), lv(0, -1)])
        .expect("hexagon");
    let mut layer: BTreeSet<Vec<LatticeVector>> = BTreeSet::new();
    layer.insert(start.rays().to_vec());
    for _ in 1..n {
        let mut next = BTreeSet::new();
        for rays in &layer {
            let s = ToricSurfaceModel::new(rays).expect("valid");
            let k = s.len();
            for c in 0..k / 2 {
                let once = s.blow_up_corner_labeled(c, "x").expect("smooth");
                let anti = once.fan().position(-s.rays()[c]).expect("antipodal");
                let twice = once.blow_up_corner_labeled(anti, "y").expect("smooth");
                next.insert(twice.rays().to_vec());
            }
        }
        layer = next;
    }
    layer.into_iter().map(|r| ToricSurfaceModel::new(&r).expect("valid")).collect()
}

/// All inequivalent actions for a given `n`, from antipodal blow-ups of the hexagon.
pub fn enumerate_actions(n: usize) -> Result<Vec<ActionClass>> {
    if !(1..=5).contains(&n) {
        return Err(TorusError::UnsupportedN(n));
    }
    let mut classes = BTreeSet::new();
    for fan in antipodal_fans(n) {
        let half: Vec<_> = fan.rays()[..fan.len() / 2].iter().map(|&v| sign_class(v)).collect();
        let seq = validate_sequence(&half)?;
        classes.insert(canonical_form(&seq));
    }
    Ok(classes
        .into_iter()
        .map(|c| ActionClass { canonical_representative: c, n })
        .collect())
}

fn upper(v: LatticeVector) -> bool {
    v.y > 0 || (v.y == 0 && v.x > 0)
}

/// Counterclockwise angular order starting at the positive x-axis.
pub fn angular_cmp(a: LatticeVector, b: LatticeVector) -> Ordering {
    match (upper(a), upper(b)) {
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        _ => 0.cmp(&a.det(b)),
    }
}

pub fn plus_label(i: usize) -> String {
    format!("C{i}")
}

pub fn minus_label(i: usize) -> String {
    format!("Cbar{i}")
}

pub fn line_label(i: usize) -> String {
    format!("L{i}")
}

/// Surface with rays `{v_i} ∪ {-v_i}`, labeled `C1..C(n+2)` then `Cbar1..`.
///
/// `C1` is the first ray, going counterclockwise from the first entry, whose
/// half-cycle of self-intersections is lexicographically smallest.
pub fn double_cover_fan(s: &IsotropySequence) -> Result<ToricSurfaceModel> {
    let mut rays: Vec<LatticeVector> = s.entries.iter().flat_map(|&v| [v, -v]).collect();
    rays.sort_by(|&a, &b| angular_cmp(a, b));
    let first = rays.iter().position(|&r| r == s.entries[0]).expect("present");
    rays.rotate_left(first);
    let surface = ToricSurfaceModel::new(&rays).map_err(TorusError::FanInvalid)?;
    let a = surface.self_intersections().map_err(TorusError::FanInvalid)?;
    let h = s.len();
    let k = 2 * h;
    let offset = surface.fan().position(rays[0]).expect("present");
    let half = |st: usize| -> Vec<i64> { (0..h).map(|j| a[(offset + st + j) % k]).collect() };
    let start = (0..h).min_by(|&x, &y| half(x).cmp(&half(y)).then(x.cmp(&y))).expect("nonempty");
    let mut labels = vec![String::new(); k];
    for j in 0..h {
        labels[(offset + start + j) % k] = plus_label(j + 1);
        labels[(offset + start + h + j) % k] = minus_label(j + 1);
    }
    ToricSurfaceModel::labeled(surface.rays(), &labels).map_err(TorusError::FanInvalid)
}

/// Rays of `S` in label order `C1, ..., C(n+2), Cbar1, ...`.
pub fn labeled_cycle(s: &ToricSurfaceModel) -> Vec<LatticeVector> {
    let h = s.len() / 2;
    (1..=h)
        .map(plus_label)
        .chain((1..=h).map(minus_label))
        .map(|l| s.rays()[s.index_of_label(&l).expect("labeled double cover")])
        .collect()
}

/// The divisor `-2K - 3L` on a component carrying a ray labeled `label`.
pub fn lemma_divisor(c: &ToricSurfaceModel, label: &str) -> TorusDivisor {
    TorusDivisor::new(c.labels().iter().map(|l| if l == label { -1 } else { 2 }).collect())
}

pub fn lemma_target(i: usize) -> usize {
    if i == 1 || i == 4 {
        2
    } else {
        1
    }
}

/// Dimension of the sections of `-2K - 3L_i` on the candidate, and whether it hits the target.
pub fn half_fan_check(candidate: &ToricSurfaceModel, i: usize) -> (bool, usize) {
    let d = lemma_divisor(candidate, &line_label(i));
    match candidate.sections_of_divisor(&d) {
        Ok(s) => (s.dimension() == lemma_target(i), s.dimension()),
        Err(_) => (false, 0),
    }
}

/// Search parameters for completing a half of the cycle.
#[derive(Debug, Clone, Copy)]
pub struct CompletionSearch {
    pub max_inserted: usize,
    pub coordinate_bound: i64,
}

impl Default for CompletionSearch {
    fn default() -> Self {
        CompletionSearch { max_inserted: 3, coordinate_bound: 4 }
    }
}

/// A completed half, with the antipodal partner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HalfCandidate {
    pub plus: ToricSurfaceModel,
    pub minus: ToricSurfaceModel,
    pub inserted: usize,
    pub lemma_dimension: usize,
}

fn swap_bar(label: &str) -> String {
    if let Some(rest) = label.strip_prefix("Cbar") {
        format!("C{rest}")
    } else if let Some(rest) = label.strip_prefix('C') {
        format!("Cbar{rest}")
    } else {
        label.to_string()
    }
}

/// The antipodal image of a component, with `C` and `Cbar` labels exchanged.
pub fn antipode(c: &ToricSurfaceModel) -> ToricSurfaceModel {
    let rays: Vec<_> = c.rays().iter().map(|&v| -v).collect();
    let labels: Vec<_> = c.labels().iter().map(|l| swap_bar(l)).collect();
    ToricSurfaceModel::labeled(&rays, &labels).expect("antipode of a fan is a fan")
}

/// Labels of the half-cycle `C_i, ..., C_h, Cbar_1, ..., Cbar_{i-1}`.
pub fn half_labels(i: usize, h: usize) -> Vec<String> {
    (i..=h).map(plus_label).chain((1..i).map(minus_label)).collect()
}

/// Completions of the half-cycle starting at `C_i` by inserted rays, one of them `L_i`.
///
/// Kept candidates are smooth and complete, give `L_i` self-intersection `+1`
/// (half of the degree of the normal bundle of a twistor line), and pass the
/// dimension check. They are sorted by the number of inserted rays.
pub fn half_fan_candidates(s: &ToricSurfaceModel, i: usize, search: CompletionSearch) -> Result<Vec<HalfCandidate>> {
    let h = s.len() / 2;
    let labels = half_labels(i, h);
    let chain: Vec<LatticeVector> = labels
        .iter()
        .map(|l| s.rays()[s.index_of_label(l).expect("labeled double cover")])
        .collect();
    let (p, q) = (chain[h - 1], chain[0]);
    let b = search.coordinate_bound;
    let pool: Vec<LatticeVector> = (-b..=b)
        .flat_map(|x| (-b..=b).map(move |y| lv(x, y)))
        .filter(|v| v.is_primitive())
        .collect();
    let mut fills: Vec<Vec<LatticeVector>> = Vec::new();
    let mut stack: Vec<Vec<LatticeVector>> = vec![vec![]];
    while let Some(cur) = stack.pop() {
        let last = *cur.last().unwrap_or(&p);
        if !cur.is_empty() && last.det(q) == 1 {
            fills.push(cur.clone());
        }
        if cur.len() == search.max_inserted {
            continue;
        }
        if cur.is_empty() && search.max_inserted >= 1 {
            // the one-ray completion need not lie in the coordinate box
            let r = -(p + q);
            if p.det(r) == 1 && r.det(q) == 1 && !pool.contains(&r) {
                fills.push(vec![r]);
            }
        }
        for &r in &pool {
            if last.det(r) == 1 {
                let mut next = cur.clone();
                next.push(r);
                stack.push(next);
            }
        }
    }
    let mut out = Vec::new();
    let lname = line_label(i);
    for fill in fills {
        let rays: Vec<_> = chain.iter().chain(&fill).copied().collect();
        if validate_fan(&rays).is_err() {
            continue;
        }
        for li in 0..fill.len() {
            let mut ls = labels.clone();
            for j in 0..fill.len() {
                ls.push(if j == li { lname.clone() } else { format!("A{i}_{}", j + 1) });
            }
            let plus = ToricSurfaceModel::labeled(&rays, &ls).expect("validated");
            let li_idx = plus.index_of_label(&lname).expect("present");
            if plus.self_intersection(li_idx) != Ok(1) {
                continue;
            }
            let (ok, dim) = half_fan_check(&plus, i);
            if ok {
                let minus = antipode(&plus);
                out.push(HalfCandidate { plus, minus, inserted: fill.len(), lemma_dimension: dim });
            }
        }
    }
    out.sort_by(|x, y| {
        x.inserted.cmp(&y.inserted).then_with(|| x.plus.rays().cmp(y.plus.rays()))
    });
    out.dedup();
    if out.is_empty() {
        return Err(TorusError::NoCandidate(i));
    }
    Ok(out)
}

/// One reducible member: two components glued along `L_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecialPair {
    pub index: usize,
    pub plus: ToricSurfaceModel,
    pub minus: ToricSurfaceModel,
    pub shared: String,
    pub lemma_dimension: usize,
    /// Further completions that passed every check, beyond the selected minimal one.
    pub alternatives: usize,
    /// More than one completion with the minimal number of inserted rays survived.
    pub ambiguous: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpectedCatalog {
    pub generic_fiber: ToricSurfaceModel,
    pub special_fibers: Vec<SpecialPair>,
}

impl ExpectedCatalog {
    /// Index pairs `(plus of i, minus of i)` exchanged by the real structure.
    pub fn real_pairing(&self) -> Vec<(String, String)> {
        self.special_fibers
            .iter()
            .map(|p| (format!("S{}+", p.index), format!("S{}-", p.index)))
            .collect()
    }
}

pub fn expected_catalog(s: &IsotropySequence) -> Result<ExpectedCatalog> {
    expected_catalog_with(s, CompletionSearch::default())
}

pub fn expected_catalog_with(s: &IsotropySequence, search: CompletionSearch) -> Result<ExpectedCatalog> {
    if s.len() != 6 {
        return Err(TorusError::WrongLength(s.len()));
    }
    let generic = double_cover_fan(s)?;
    let mut special = Vec::new();
    for i in 1..=6 {
        let cands = half_fan_candidates(&generic, i, search)?;
        let best = &cands[0];
        let minimal = cands.iter().filter(|c| c.inserted == best.inserted).count();
        special.push(SpecialPair {
            index: i,
            plus: best.plus.clone(),
            minus: best.minus.clone(),
            shared: line_label(i),
            lemma_dimension: best.lemma_dimension,
            alternatives: cands.len() - 1,
            ambiguous: minimal > 1,
        });
    }
    Ok(ExpectedCatalog { generic_fiber: generic, special_fibers: special })
}
