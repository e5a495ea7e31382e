//! Combinatorial model of a fibered 3-fold: every fiber is a complex of toric
//! surfaces glued along boundary curves, with tracked sections and nodes.
//!
//! All fibers live in the character lattice of the torus. The four weights of
//! `x1..x4` span the polygons of the fiber components; curves are identified
//! across components by label.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::Zero;
use thiserror::Error;

use crate::lattice::{fan_isomorphic, lv, LatticeError, LatticeVector, ToricSurfaceModel};
use crate::poly::{Point, Q};
use crate::projective::{eval_on_line, FiberKind, ProjectiveModel};
use crate::torus::ExpectedCatalog;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FiberError {
    #[error("catalog does not match the model: {0}")]
    CatalogMismatch(String),
    #[error("{0}")]
    Lattice(#[from] LatticeError),
    #[error("no component {0}")]
    UnknownComponent(String),
    #[error("curve {curve} not found in {component}")]
    UnknownCurve { component: String, curve: String },
    #[error("curves {0} and {1} are not adjacent in {2}")]
    NotAdjacent(String, String, String),
    #[error("curve {0} lies on {1} components")]
    BadGluing(String, usize),
    #[error("dual graph of {0} is disconnected")]
    Disconnected(FiberIndex),
    #[error("curve {0} is tagged (-1,-1) but has self-intersection {1} in {2}")]
    NormalTypeMismatch(String, i64, String),
    #[error("{0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, FiberError>;

/// Stages of the birational pipeline, in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    X1,
    X2,
    X3,
    X4,
    X5,
    X6,
    Zhat,
}

impl Stage {
    pub const ALL: [Stage; 7] = [Stage::X1, Stage::X2, Stage::X3, Stage::X4, Stage::X5, Stage::X6, Stage::Zhat];
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::X1 => "X1",
            Stage::X2 => "X2",
            Stage::X3 => "X3",
            Stage::X4 => "X4",
            Stage::X5 => "X5",
            Stage::X6 => "X6",
            Stage::Zhat => "Zhat",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FiberIndex {
    Generic,
    Special(usize),
}

impl fmt::Display for FiberIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FiberIndex::Generic => write!(f, "generic"),
            FiberIndex::Special(i) => write!(f, "lambda{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NormalType {
    MinusOneMinusOne,
    MinusTwoZero,
    Unmarked,
}

impl fmt::Display for NormalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NormalType::MinusOneMinusOne => "(-1,-1)",
            NormalType::MinusTwoZero => "(-2,0)",
            NormalType::Unmarked => "-",
        };
        write!(f, "{s}")
    }
}

pub type ComponentId = usize;

/// A curve as seen from the fiber: where it lies and how it sits there.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurveRecord {
    pub label: String,
    pub hosts: Vec<ComponentId>,
    pub self_int_in_host: Vec<i64>,
    pub normal_type: NormalType,
    pub is_line: bool,
    pub is_real: bool,
    pub marked_for_flop: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeStatus {
    Unresolved,
    /// Resolved by the exceptional curve with this label.
    SmallResolved(String),
    /// Created by contracting the curve with this label.
    Contracted(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeRecord {
    pub fiber: FiberIndex,
    pub components: Vec<ComponentId>,
    pub status: NodeStatus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub id: ComponentId,
    pub name: String,
    pub surface: ToricSurfaceModel,
    /// Rays of the minimal resolution that are contracted to A1 points.
    pub markers: Vec<String>,
    pub redundant: bool,
    /// Carries a ruling whose fibers may be contracted.
    pub ruling_contractible: bool,
}

impl Component {
    pub fn a(&self, label: &str) -> Option<i64> {
        let i = self.surface.index_of_label(label)?;
        self.surface.self_intersection(i).ok()
    }

    /// Labels of the two rays next to `label`, previous first.
    pub fn neighbors(&self, label: &str) -> Option<(String, String)> {
        let i = self.surface.index_of_label(label)?;
        let k = self.surface.len();
        Some((self.surface.label(i + k - 1).to_string(), self.surface.label(i + 1).to_string()))
    }

    pub fn has(&self, label: &str) -> bool {
        self.surface.index_of_label(label).is_some()
    }

    pub fn ray(&self, label: &str) -> Option<LatticeVector> {
        self.surface.index_of_label(label).map(|i| self.surface.rays()[i])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MoveOp {
    BlowUp { between: [String; 2], new: String },
    BlowDown { curve: String },
    Flop { curve: String, from: ComponentId, to: ComponentId, new: String },
    Remove,
    SmallResolution { curve: String },
    Contract { curve: String },
}

/// One birational move on one component; the lineage of every component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoveRecord {
    pub stage: Stage,
    pub component: ComponentId,
    pub op: MoveOp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiberComplex {
    pub fiber: FiberIndex,
    pub base: Option<Q>,
    pub kind: FiberKind,
    pub components: Vec<Component>,
    pub curve_types: BTreeMap<String, NormalType>,
    pub flop_marks: BTreeSet<String>,
    pub nodes: Vec<NodeRecord>,
    pub moves: Vec<MoveRecord>,
}

impl FiberComplex {
    pub fn component(&self, name: &str) -> Result<&Component> {
        self.components
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| FiberError::UnknownComponent(name.to_string()))
    }

    pub fn component_mut(&mut self, name: &str) -> Result<&mut Component> {
        self.components
            .iter_mut()
            .find(|c| c.name == name)
            .ok_or_else(|| FiberError::UnknownComponent(name.to_string()))
    }

    /// Names of the components containing the curve.
    pub fn hosts(&self, label: &str) -> Vec<String> {
        self.components.iter().filter(|c| c.has(label)).map(|c| c.name.clone()).collect()
    }

    pub fn is_shared(&self, label: &str) -> bool {
        self.hosts(label).len() == 2
    }

    pub fn normal_type(&self, label: &str) -> NormalType {
        self.curve_types.get(label).copied().unwrap_or(NormalType::Unmarked)
    }

    pub fn ray_count(&self) -> usize {
        self.components.iter().map(|c| c.surface.len()).sum()
    }

    /// Every curve label, with hosts and self-intersections.
    pub fn curves(&self) -> Vec<CurveRecord> {
        let mut labels = BTreeSet::new();
        for c in &self.components {
            labels.extend(c.surface.labels().iter().cloned());
        }
        labels
            .into_iter()
            .map(|l| {
                let hosts: Vec<&Component> = self.components.iter().filter(|c| c.has(&l)).collect();
                CurveRecord {
                    hosts: hosts.iter().map(|c| c.id).collect(),
                    self_int_in_host: hosts.iter().map(|c| c.a(&l).unwrap_or(0)).collect(),
                    normal_type: self.normal_type(&l),
                    is_line: l.starts_with('L'),
                    is_real: conjugate_label(&l) == l,
                    marked_for_flop: self.flop_marks.contains(&l),
                    label: l,
                }
            })
            .collect()
    }

    /// Curves of the given normal type, sorted.
    pub fn curves_of_type(&self, t: NormalType) -> Vec<String> {
        self.curve_types.iter().filter(|(_, v)| **v == t).map(|(k, _)| k.clone()).collect()
    }

    pub fn unresolved_nodes(&self) -> usize {
        self.nodes.iter().filter(|n| n.status == NodeStatus::Unresolved).count()
    }

    /// Gluing, connectedness, and normal-type consistency.
    pub fn check_invariants(&self) -> Result<()> {
        for r in self.curves() {
            if r.hosts.len() > 2 {
                return Err(FiberError::BadGluing(r.label, r.hosts.len()));
            }
            if r.normal_type == NormalType::MinusOneMinusOne {
                for (h, a) in r.hosts.iter().zip(&r.self_int_in_host) {
                    if *a != -1 {
                        let name = self.components.iter().find(|c| c.id == *h).map(|c| c.name.clone()).unwrap_or_default();
                        return Err(FiberError::NormalTypeMismatch(r.label.clone(), *a, name));
                    }
                }
            }
        }
        if !self.components.is_empty() {
            let n = self.components.len();
            let mut seen = vec![false; n];
            let mut stack = vec![0];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    if !seen[j] && self.components[i].surface.labels().iter().any(|l| self.components[j].has(l)) {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            if seen.iter().any(|s| !s) {
                return Err(FiberError::Disconnected(self.fiber));
            }
        }
        Ok(())
    }

    fn untag_neighbors(&mut self, component: &str, label: &str) {
        if let Ok(c) = self.component(component) {
            if let Some((p, n)) = c.neighbors(label) {
                for l in [p, n] {
                    if self.curve_types.contains_key(&l) {
                        self.curve_types.insert(l, NormalType::Unmarked);
                    }
                }
            }
        }
    }

    /// Blows up the torus-fixed point where curves `a` and `b` meet in `component`.
    pub fn blow_up_between(&mut self, stage: Stage, component: &str, a: &str, b: &str, new: &str) -> Result<()> {
        let c = self.component(component)?;
        let s = &c.surface;
        let missing = |l: &str| FiberError::UnknownCurve { component: component.to_string(), curve: l.to_string() };
        let i = s.index_of_label(a).ok_or_else(|| missing(a))?;
        let j = s.index_of_label(b).ok_or_else(|| missing(b))?;
        let k = s.len();
        let corner = if (i + 1) % k == j {
            i
        } else if (j + 1) % k == i {
            j
        } else {
            return Err(FiberError::NotAdjacent(a.to_string(), b.to_string(), component.to_string()));
        };
        let surface = s.blow_up_corner_labeled(corner, new)?;
        let id = c.id;
        self.component_mut(component)?.surface = surface;
        self.untag_neighbors(component, new);
        self.moves.push(MoveRecord {
            stage,
            component: id,
            op: MoveOp::BlowUp { between: [a.to_string(), b.to_string()], new: new.to_string() },
        });
        Ok(())
    }

    /// Contracts the (-1)-curve `label` of `component`.
    pub fn blow_down(&mut self, stage: Stage, component: &str, label: &str) -> Result<()> {
        let c = self.component(component)?;
        let i = c
            .surface
            .index_of_label(label)
            .ok_or_else(|| FiberError::UnknownCurve { component: component.to_string(), curve: label.to_string() })?;
        let surface = c.surface.blow_down(i)?;
        let id = c.id;
        self.untag_neighbors(component, label);
        self.component_mut(component)?.surface = surface;
        if !self.components.iter().any(|c| c.has(label)) {
            self.curve_types.remove(label);
        }
        self.moves.push(MoveRecord { stage, component: id, op: MoveOp::BlowDown { curve: label.to_string() } });
        Ok(())
    }

    pub fn remove_component(&mut self, stage: Stage, name: &str) -> Result<()> {
        let pos = self
            .components
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| FiberError::UnknownComponent(name.to_string()))?;
        let c = self.components.remove(pos);
        self.moves.push(MoveRecord { stage, component: c.id, op: MoveOp::Remove });
        Ok(())
    }

    /// Stable text block: one line for the fiber, one per component.
    pub fn catalog_lines(&self) -> Vec<String> {
        let base = match &self.base {
            Some(b) => b.to_string(),
            None => "-".to_string(),
        };
        let mut out = vec![format!(
            "fiber={} base={} kind={} components={} nodes={} unresolved={} rays={}",
            self.fiber,
            base,
            self.kind,
            self.components.len(),
            self.nodes.len(),
            self.unresolved_nodes(),
            self.ray_count()
        )];
        for c in &self.components {
            let a = c.surface.self_intersections().unwrap_or_default();
            let curves: Vec<String> = c
                .surface
                .labels()
                .iter()
                .zip(&a)
                .map(|(l, a)| {
                    let mut s = format!("{l}:{a}");
                    if self.is_shared(l) {
                        s.push('*');
                    }
                    if let Some(t) = self.curve_types.get(l) {
                        if *t != NormalType::Unmarked {
                            s.push_str(&t.to_string());
                        }
                    }
                    s
                })
                .collect();
            let mut line = format!("  component={} id={} rays={} curves={}", c.name, c.id, c.surface.len(), curves.join(","));
            if !c.markers.is_empty() {
                line.push_str(&format!(" markers={}", c.markers.join(",")));
            }
            if c.redundant {
                line.push_str(" redundant");
            }
            out.push(line);
        }
        out
    }
}

/// Where a section meets a fiber.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum SectionLocation {
    /// The torus-fixed point where two curves of a component meet.
    CornerOf { component: String, curves: [String; 2] },
    /// An A1 point, recorded by the marker ray of its resolution.
    SingularPointOf { component: String, marker: String },
    /// A fixed point of a shared curve, named by the curves meeting it there.
    OnCurve { curve: String, meets: Vec<String> },
}

impl SectionLocation {
    pub fn corner(component: &str, a: &str, b: &str) -> Self {
        SectionLocation::CornerOf { component: component.to_string(), curves: [a.to_string(), b.to_string()] }
    }

    pub fn conjugate(&self) -> SectionLocation {
        match self {
            SectionLocation::CornerOf { component, curves } => SectionLocation::CornerOf {
                component: conjugate_label(component),
                curves: [conjugate_label(&curves[0]), conjugate_label(&curves[1])],
            },
            SectionLocation::SingularPointOf { component, marker } => SectionLocation::SingularPointOf {
                component: conjugate_label(component),
                marker: conjugate_label(marker),
            },
            SectionLocation::OnCurve { curve, meets } => {
                let mut meets: Vec<String> = meets.iter().map(|m| conjugate_label(m)).collect();
                meets.sort();
                SectionLocation::OnCurve { curve: conjugate_label(curve), meets }
            }
        }
    }
}

impl fmt::Display for SectionLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SectionLocation::CornerOf { component, curves } => write!(f, "{component}[{}.{}]", curves[0], curves[1]),
            SectionLocation::SingularPointOf { component, marker } => write!(f, "{component}<{marker}>"),
            SectionLocation::OnCurve { curve, meets } => write!(f, "{curve}@{}", meets.join("+")),
        }
    }
}

/// A global section of the fibration, followed fiber by fiber.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionTrack {
    /// `l1`, `lbar1`, `m3`, `mbar3`, ...
    pub name: String,
    /// Corner name `M{k}{j}` for the m-sections, marker `E{k}` for the l-sections.
    pub key: String,
    pub locations: BTreeMap<FiberIndex, SectionLocation>,
    /// Stage at which the section was blown up, after which it has no location.
    pub blown_up: Option<Stage>,
}

/// Name of the conjugate of a section name.
pub fn conjugate_section_name(name: &str) -> String {
    match name.strip_prefix('m').or_else(|| name.strip_prefix('l')) {
        Some(rest) => {
            let head = &name[..1];
            match rest.strip_prefix("bar") {
                Some(i) => format!("{head}{i}"),
                None => format!("{head}bar{rest}"),
            }
        }
        None => name.to_string(),
    }
}

/// Image of a curve or component label under the real structure, which swaps
/// the weights of `x1, x2` and of `x3, x4`. Lines `L*` are real.
pub fn conjugate_label(label: &str) -> String {
    if label.starts_with('L') || label == "S" {
        return label.to_string();
    }
    let split = label.find(|c: char| c.is_ascii_digit()).unwrap_or(label.len());
    let (head, digits) = label.split_at(split);
    let mapped: String = digits
        .chars()
        .map(|c| match c {
            '1' => '2',
            '2' => '1',
            '3' => '4',
            '4' => '3',
            other => other,
        })
        .collect();
    format!("{head}{mapped}")
}

/// Which assignment of the names `m1..m4` to the eight corner sections is used.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelChoice {
    /// Corner names of `m1, m2, m3, m4`.
    pub m: [String; 4],
}

pub const ROTATION_ONE: [&str; 4] = ["M24", "M41", "M13", "M32"];
pub const ROTATION_TWO: [&str; 4] = ["M42", "M14", "M31", "M23"];

impl LabelChoice {
    /// The four assignments compatible with conjugation and the rotation of
    /// the generic fiber: `m1, mbar1, m3, mbar3` fill one rotational family
    /// and `m2, m4` come from the other.
    pub fn all() -> Vec<LabelChoice> {
        let mut out = Vec::new();
        for (own, other) in [(ROTATION_ONE, ROTATION_TWO), (ROTATION_TWO, ROTATION_ONE)] {
            let low = |r: [&str; 4]| r.iter().find(|s| matches!(&s[1..2], "1" | "2")).unwrap().to_string();
            let high = |r: [&str; 4]| r.iter().find(|s| matches!(&s[1..2], "3" | "4")).unwrap().to_string();
            for (m1, m3) in [(low(own), high(own)), (high(own), low(own))] {
                out.push(LabelChoice { m: [m1, high(other), m3, low(other)] });
            }
        }
        out
    }

    pub fn corner_of(&self, j: usize) -> &str {
        &self.m[j - 1]
    }

    /// Section name for a corner name, e.g. `M13 -> mbar1` under the default choice.
    pub fn name_of(&self, corner: &str) -> Option<String> {
        for j in 1..=4 {
            if self.m[j - 1] == corner {
                return Some(format!("m{j}"));
            }
            if conjugate_label(&self.m[j - 1]) == corner {
                return Some(format!("mbar{j}"));
            }
        }
        None
    }
}

impl Default for LabelChoice {
    fn default() -> Self {
        LabelChoice::all().remove(0)
    }
}

impl fmt::Display for LabelChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m1={} m2={} m3={} m4={}", self.m[0], self.m[1], self.m[2], self.m[3])
    }
}

/// The whole fibration at one stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiberSpaceModel {
    pub model: ProjectiveModel,
    pub generic_fiber: FiberComplex,
    pub special_fibers: Vec<FiberComplex>,
    pub sections: Vec<SectionTrack>,
    pub labels: LabelChoice,
    /// Base parameter index used for each special fiber.
    pub roles: [usize; 6],
}

impl FiberSpaceModel {
    pub fn fibers(&self) -> impl Iterator<Item = &FiberComplex> {
        std::iter::once(&self.generic_fiber).chain(self.special_fibers.iter())
    }

    pub fn fibers_mut(&mut self) -> impl Iterator<Item = &mut FiberComplex> {
        std::iter::once(&mut self.generic_fiber).chain(self.special_fibers.iter_mut())
    }

    pub fn fiber(&self, f: FiberIndex) -> &FiberComplex {
        match f {
            FiberIndex::Generic => &self.generic_fiber,
            FiberIndex::Special(i) => &self.special_fibers[i - 1],
        }
    }

    pub fn fiber_mut(&mut self, f: FiberIndex) -> &mut FiberComplex {
        match f {
            FiberIndex::Generic => &mut self.generic_fiber,
            FiberIndex::Special(i) => &mut self.special_fibers[i - 1],
        }
    }

    pub fn section(&self, name: &str) -> Option<&SectionTrack> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn section_mut(&mut self, name: &str) -> Option<&mut SectionTrack> {
        self.sections.iter_mut().find(|s| s.name == name)
    }

    pub fn node_count(&self) -> usize {
        self.fibers().map(|f| f.nodes.len()).sum()
    }

    /// Marker rays of A1 points over all fibers.
    pub fn marker_count(&self) -> usize {
        self.fibers().flat_map(|f| f.components.iter()).map(|c| c.markers.len()).sum()
    }

    pub fn catalog_lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        for f in self.fibers() {
            out.extend(f.catalog_lines());
        }
        for s in &self.sections {
            let locs: Vec<String> = s.locations.iter().map(|(f, l)| format!("{f}:{l}")).collect();
            let status = match s.blown_up {
                Some(st) => format!(" blown-up={st}"),
                None => String::new(),
            };
            out.push(format!("section={} key={}{} at={}", s.name, s.key, status, locs.join(",")));
        }
        out
    }
}

/// Torus weights of `x1..x4`, read off the model.
fn axis_weights(model: &ProjectiveModel) -> [LatticeVector; 4] {
    [model.g_weights[0], model.g_weights[1], model.g_weights[2], model.g_weights[3]]
}

/// Inward primitive normals of a counterclockwise lattice polygon, edge by edge.
fn normal_fan(vertices: &[LatticeVector]) -> Vec<LatticeVector> {
    let k = vertices.len();
    (0..k)
        .map(|i| {
            let e = vertices[(i + 1) % k] - vertices[i];
            let g = num_integer::gcd(e.x, e.y);
            lv(-e.y / g, e.x / g)
        })
        .collect()
}

fn ccw(vertices: &mut [LatticeVector]) {
    let k = vertices.len();
    let area: i64 = (0..k).map(|i| vertices[i].det(vertices[(i + 1) % k])).sum();
    if area < 0 {
        vertices.reverse();
    }
}

fn weight_index(u: &[LatticeVector; 4], v: LatticeVector) -> Option<usize> {
    u.iter().position(|w| *w == v).map(|i| i + 1)
}

fn pair_label(head: &str, x: usize, y: usize) -> String {
    format!("{head}{}{}", x.min(y), x.max(y))
}

/// Polygon surface with labeled edges, then the marked A1 vertices resolved.
fn polygon_surface(
    vertices: Vec<LatticeVector>,
    edge_label: impl Fn(LatticeVector, LatticeVector) -> String,
) -> Result<ToricSurfaceModel> {
    let mut vertices = vertices;
    ccw(&mut vertices);
    let normals = normal_fan(&vertices);
    let k = vertices.len();
    let labels: Vec<String> = (0..k).map(|i| edge_label(vertices[i], vertices[(i + 1) % k])).collect();
    Ok(ToricSurfaceModel::labeled(&normals, &labels)?)
}

/// Replaces the A1 cone between `a` and `b` by its resolution ray.
fn resolve_marker(s: &ToricSurfaceModel, a: &str, b: &str, label: &str) -> Result<ToricSurfaceModel> {
    let i = s.index_of_label(a).ok_or_else(|| FiberError::Invariant(format!("missing {a}")))?;
    let j = s.index_of_label(b).ok_or_else(|| FiberError::Invariant(format!("missing {b}")))?;
    let k = s.len();
    let (first, second) = if (i + 1) % k == j { (i, j) } else { (j, i) };
    let sum = s.rays()[first] + s.rays()[second];
    let g = num_integer::gcd(sum.x, sum.y);
    let ray = lv(sum.x / g, sum.y / g);
    if s.rays()[first].det(ray) != 1 || ray.det(s.rays()[second]) != 1 {
        return Err(FiberError::Invariant(format!("{label} does not resolve the cone of {a}, {b}")));
    }
    let mut rays = s.rays().to_vec();
    let mut labels = s.labels().to_vec();
    rays.insert(first + 1, ray);
    labels.insert(first + 1, label.to_string());
    Ok(ToricSurfaceModel::labeled(&rays, &labels)?)
}

fn component(id: &mut ComponentId, name: &str, surface: ToricSurfaceModel, markers: Vec<String>) -> Component {
    *id += 1;
    Component { id: *id, name: name.to_string(), surface, markers, redundant: false, ruling_contractible: false }
}

fn fiber(index: FiberIndex, base: Option<Q>, kind: FiberKind, components: Vec<Component>) -> FiberComplex {
    FiberComplex {
        fiber: index,
        base,
        kind,
        components,
        curve_types: BTreeMap::new(),
        flop_marks: BTreeSet::new(),
        nodes: Vec::new(),
        moves: Vec::new(),
    }
}

/// The quartic with four A1 points: the diamond `conv(u1, u3, u2, u4)`.
fn generic_fiber(u: &[LatticeVector; 4], id: &mut ComponentId) -> Result<FiberComplex> {
    let diamond = vec![u[0], u[2], u[1], u[3]];
    let mut s = polygon_surface(diamond, |a, b| {
        pair_label("B", weight_index(u, a).unwrap_or(0), weight_index(u, b).unwrap_or(0))
    })?;
    for k in 1..=4 {
        let (a, b) = ends_at(u, k);
        s = resolve_marker(&s, &a, &b, &format!("E{k}"))?;
    }
    let markers = (1..=4).map(|k| format!("E{k}")).collect();
    Ok(fiber(FiberIndex::Generic, None, FiberKind::Irreducible4ODP, vec![component(id, "S", s, markers)]))
}

/// The two edges of the diamond meeting at weight `k`.
fn ends_at(_u: &[LatticeVector; 4], k: usize) -> (String, String) {
    let others: Vec<usize> = if k <= 2 { vec![3, 4] } else { vec![1, 2] };
    (pair_label("B", k, others[0]), pair_label("B", k, others[1]))
}

/// Two quadric cones `conv(u_x, u_y1, u_y2)` for the vertex pair `vx`, glued along the line.
fn cone_fiber(
    u: &[LatticeVector; 4],
    index: usize,
    base: Q,
    vx: [usize; 2],
    id: &mut ComponentId,
) -> Result<FiberComplex> {
    let oth: [usize; 2] = if vx[0] == 1 { [3, 4] } else { [1, 2] };
    let line = line_name(index);
    let mut comps = Vec::new();
    for x in vx {
        let tri = vec![u[x - 1], u[oth[0] - 1], u[oth[1] - 1]];
        let s = polygon_surface(tri, |a, b| {
            let (i, j) = (weight_index(u, a).unwrap_or(0), weight_index(u, b).unwrap_or(0));
            if oth.contains(&i) && oth.contains(&j) {
                line.clone()
            } else {
                pair_label("B", i, j)
            }
        })?;
        let s = resolve_marker(&s, &pair_label("B", x, oth[0]), &pair_label("B", x, oth[1]), &format!("E{x}"))?;
        comps.push(component(id, &format!("A{x}"), s, vec![format!("E{x}")]));
    }
    Ok(fiber(FiberIndex::Special(index), Some(base), FiberKind::TwoQuadricCones, comps))
}

/// Four planes `conv(0, u_x, u_y)`, `x in {1,2}`, `y in {3,4}`, meeting at the node.
fn node_fiber(u: &[LatticeVector; 4], index: usize, base: Q, id: &mut ComponentId) -> Result<FiberComplex> {
    let mut comps = Vec::new();
    for x in [1, 2] {
        for y in [3, 4] {
            let tri = vec![lv(0, 0), u[x - 1], u[y - 1]];
            let s = polygon_surface(tri, |a, b| {
                if a == lv(0, 0) || b == lv(0, 0) {
                    let other = if a == lv(0, 0) { b } else { a };
                    format!("R{}", weight_index(u, other).unwrap_or(0))
                } else {
                    pair_label("B", x, y)
                }
            })?;
            comps.push(component(id, &format!("P{x}{y}"), s, Vec::new()));
        }
    }
    let mut fc = fiber(FiberIndex::Special(index), Some(base), FiberKind::FourPlanesWithNode, comps);
    fc.nodes.push(NodeRecord {
        fiber: fc.fiber,
        components: fc.components.iter().map(|c| c.id).collect(),
        status: NodeStatus::Unresolved,
    });
    Ok(fc)
}

pub fn line_name(i: usize) -> String {
    format!("L{i}")
}

/// The relabeling of special parameters used when the roles of the first and
/// fourth are exchanged: fiber `i` sits over parameter `RELABELED[i-1]`.
pub const RELABELED: [usize; 6] = [4, 3, 2, 1, 6, 5];
pub const IDENTITY_ROLES: [usize; 6] = [1, 2, 3, 4, 5, 6];

/// The expected generic fiber with its (-1)-curves contracted; this is the
/// minimal resolution of the quartic with four A1 points.
pub fn contract_minus_one_curves(s: &ToricSurfaceModel) -> Result<ToricSurfaceModel> {
    let a = s.self_intersections()?;
    let targets: Vec<String> = (0..s.len()).filter(|&i| a[i] == -1).map(|i| s.label(i).to_string()).collect();
    let mut out = s.clone();
    for l in targets {
        let i = out.index_of_label(&l).expect("label present");
        out = out.blow_down(i)?;
    }
    Ok(out)
}

/// Builds the singular fibration from the model, with roles of the special
/// parameters given by `roles`, and checks it against the catalog.
pub fn build_x1_with(model: &ProjectiveModel, catalog: &ExpectedCatalog, roles: [usize; 6]) -> Result<FiberSpaceModel> {
    let u = axis_weights(model);
    let mut id = 0;
    let generic = generic_fiber(&u, &mut id)?;
    let contracted = contract_minus_one_curves(&catalog.generic_fiber)?;
    if fan_isomorphic(&contracted, &generic.components[0].surface).is_none() {
        return Err(FiberError::CatalogMismatch(format!(
            "contracting the (-1)-curves of the expected generic fiber leaves {} rays with self-intersections {:?}, which is not the quartic with four A1 points",
            contracted.len(),
            contracted.self_intersections().unwrap_or_default()
        )));
    }
    if catalog.special_fibers.len() != 6 {
        return Err(FiberError::CatalogMismatch(format!("{} special pairs", catalog.special_fibers.len())));
    }
    let lambdas = model.invariant.lambdas();
    let mut special = Vec::new();
    for (i, &r) in roles.iter().enumerate() {
        let base = lambdas[r - 1].clone();
        let index = i + 1;
        let f1_zero = eval_on_line(&model.f1, &Point::Finite(base.clone())).is_zero();
        let kind = model.fiber_kind(&Point::Finite(base.clone()));
        let fc = match kind {
            FiberKind::FourPlanesWithNode => node_fiber(&u, index, base, &mut id)?,
            FiberKind::TwoQuadricCones if f1_zero => cone_fiber(&u, index, base, [1, 2], &mut id)?,
            FiberKind::TwoQuadricCones => cone_fiber(&u, index, base, [3, 4], &mut id)?,
            FiberKind::Irreducible4ODP => {
                return Err(FiberError::CatalogMismatch(format!("parameter {r} gives an irreducible fiber")));
            }
        };
        special.push(fc);
    }
    let mut fs = FiberSpaceModel {
        model: model.clone(),
        generic_fiber: generic,
        special_fibers: special,
        sections: Vec::new(),
        labels: LabelChoice::default(),
        roles,
    };
    fs.sections = l_sections(&fs);
    for f in fs.fibers() {
        f.check_invariants()?;
    }
    Ok(fs)
}

pub fn build_x1(model: &ProjectiveModel, catalog: &ExpectedCatalog) -> Result<FiberSpaceModel> {
    build_x1_with(model, catalog, IDENTITY_ROLES)
}

/// The four sections of A1 points, one per weight `k`, named `l1, lbar1, l2, lbar2`.
fn l_sections(fs: &FiberSpaceModel) -> Vec<SectionTrack> {
    let names = ["l1", "lbar1", "l2", "lbar2"];
    let mut out = Vec::new();
    for k in 1..=4 {
        let marker = format!("E{k}");
        let mut locations = BTreeMap::new();
        for f in fs.fibers() {
            let loc = if let Some(c) = f.components.iter().find(|c| c.markers.contains(&marker)) {
                SectionLocation::SingularPointOf { component: c.name.clone(), marker: marker.clone() }
            } else if f.kind == FiberKind::TwoQuadricCones {
                // passes through the fixed point of the line where the k-edges end
                let mut meets: Vec<String> = f
                    .components
                    .iter()
                    .flat_map(|c| c.surface.labels().iter().filter(|l| l.starts_with('B') && l.contains(&k.to_string())).cloned())
                    .collect();
                meets.sort();
                let line = match f.fiber {
                    FiberIndex::Special(i) => line_name(i),
                    FiberIndex::Generic => unreachable!(),
                };
                SectionLocation::OnCurve { curve: line, meets }
            } else {
                let mut meets: Vec<String> = f
                    .components
                    .iter()
                    .filter(|c| c.has(&format!("R{k}")))
                    .flat_map(|c| c.surface.labels().iter().filter(|l| l.starts_with('B')).cloned())
                    .collect();
                meets.sort();
                SectionLocation::OnCurve { curve: format!("R{k}"), meets }
            };
            locations.insert(f.fiber, loc);
        }
        out.push(SectionTrack { name: names[k - 1].to_string(), key: marker, locations, blown_up: None });
    }
    out
}

/// Real-structure compatibility of every fiber and section.
pub fn check_involution(fs: &FiberSpaceModel) -> bool {
    involution_failures(fs).is_empty()
}

/// Human-readable list of everything the real structure fails to preserve.
pub fn involution_failures(fs: &FiberSpaceModel) -> Vec<String> {
    let mut out = Vec::new();
    for f in fs.fibers() {
        for c in &f.components {
            let target = conjugate_label(&c.name);
            let Some(d) = f.components.iter().find(|d| d.name == target) else {
                out.push(format!("{}: {} has no conjugate component", f.fiber, c.name));
                continue;
            };
            if f.fiber != FiberIndex::Generic && d.name == c.name {
                out.push(format!("{}: component {} is real", f.fiber, c.name));
            }
            for (r, l) in c.surface.rays().iter().zip(c.surface.labels()) {
                if d.ray(&conjugate_label(l)) != Some(-*r) {
                    out.push(format!("{}: {}:{} is not sent to {}:{}", f.fiber, c.name, l, d.name, conjugate_label(l)));
                }
            }
            if c.markers.iter().map(|m| conjugate_label(m)).collect::<BTreeSet<_>>()
                != d.markers.iter().cloned().collect::<BTreeSet<_>>()
            {
                out.push(format!("{}: markers of {} and {} differ", f.fiber, c.name, d.name));
            }
        }
        for (l, t) in &f.curve_types {
            if f.normal_type(&conjugate_label(l)) != *t {
                out.push(format!("{}: normal type of {l} differs from its conjugate", f.fiber));
            }
        }
        for c in f.curves() {
            if c.is_line && !c.is_real {
                out.push(format!("{}: line {} is not real", f.fiber, c.label));
            }
        }
    }
    for s in &fs.sections {
        let Some(t) = fs.section(&conjugate_section_name(&s.name)) else {
            out.push(format!("section {} has no conjugate", s.name));
            continue;
        };
        if s.blown_up != t.blown_up {
            out.push(format!("sections {} and {} are blown up at different stages", s.name, t.name));
        }
        for (f, loc) in &s.locations {
            if t.locations.get(f) != Some(&loc.conjugate()) {
                out.push(format!("{f}: section {} at {loc} is not conjugate to {}", s.name, t.name));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualNode {
    pub id: ComponentId,
    pub name: String,
    pub self_intersections: Vec<i64>,
    pub markers: usize,
    pub redundant: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualEdge {
    pub from: ComponentId,
    pub to: ComponentId,
    pub label: String,
    pub normal_type: NormalType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualGraph {
    pub fiber: FiberIndex,
    pub nodes: Vec<DualNode>,
    pub edges: Vec<DualEdge>,
    /// Threefold nodes with the components through them.
    pub diamonds: Vec<(usize, Vec<ComponentId>, NodeStatus)>,
}

pub fn dual_graph(fc: &FiberComplex) -> DualGraph {
    let nodes = fc
        .components
        .iter()
        .map(|c| DualNode {
            id: c.id,
            name: c.name.clone(),
            self_intersections: c.surface.self_intersections().unwrap_or_default(),
            markers: c.markers.len(),
            redundant: c.redundant,
        })
        .collect();
    let edges = fc
        .curves()
        .into_iter()
        .filter(|r| r.hosts.len() == 2)
        .map(|r| DualEdge { from: r.hosts[0], to: r.hosts[1], normal_type: r.normal_type, label: r.label })
        .collect();
    let diamonds = fc.nodes.iter().enumerate().map(|(i, n)| (i + 1, n.components.clone(), n.status.clone())).collect();
    DualGraph { fiber: fc.fiber, nodes, edges, diamonds }
}

impl DualGraph {
    pub fn to_dot(&self, stage: Stage) -> String {
        let mut s = format!("graph \"{stage}_{}\" {{\n", self.fiber);
        for n in &self.nodes {
            let a: Vec<String> = n.self_intersections.iter().map(|a| a.to_string()).collect();
            let mut extra = String::new();
            if n.markers > 0 {
                extra.push_str(&format!("\\nA1 points: {}", n.markers));
            }
            if n.redundant {
                extra.push_str("\\nredundant");
            }
            s.push_str(&format!("  c{} [shape=box, label=\"{} ({})\\n{}{}\"];\n", n.id, n.name, n.id, a.join(" "), extra));
        }
        for e in &self.edges {
            let t = if e.normal_type == NormalType::Unmarked { String::new() } else { format!(" {}", e.normal_type) };
            s.push_str(&format!("  c{} -- c{} [label=\"{}{}\"];\n", e.from, e.to, e.label, t));
        }
        for (i, comps, status) in &self.diamonds {
            let st = match status {
                NodeStatus::Unresolved => "unresolved".to_string(),
                NodeStatus::SmallResolved(l) => format!("resolved by {l}"),
                NodeStatus::Contracted(l) => format!("from {l}"),
            };
            s.push_str(&format!("  n{i} [shape=diamond, label=\"node {i}\\n{st}\"];\n"));
            for c in comps {
                s.push_str(&format!("  n{i} -- c{c} [style=dashed];\n"));
            }
        }
        s.push_str("}\n");
        s
    }
}
