//! The six birational steps from the singular fibration to the small
//! resolution with twelve nodes, with count assertions after each step and a
//! final comparison against the expected fibers.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::fiber::{
    build_x1_with, check_involution, conjugate_label, conjugate_section_name, involution_failures, line_name,
    FiberComplex, FiberError, FiberIndex, FiberSpaceModel, LabelChoice, MoveOp, MoveRecord, NodeRecord, NodeStatus,
    NormalType, SectionLocation, Stage, IDENTITY_ROLES,
};
use crate::lattice::{fan_isomorphic, fan_isomorphisms, lv, FanIsomorphism, LatticeVector, ToricSurfaceModel};
use crate::projective::{FiberKind, ProjectiveModel};
use crate::torus::ExpectedCatalog;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("{0}")]
    Fiber(#[from] FiberError),
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
    #[error("no (-1,-1)-curve to flop: {0}")]
    MissingFlopCurve(String),
    #[error("section has no location: {0}")]
    SectionLocationMissing(String),
    #[error("small resolution not unique: {0}")]
    AmbiguousResolution(String),
    #[error("component cannot be contracted along its ruling: {0}")]
    NotContractible(String),
    #[error("wrong number of curves to contract: {0}")]
    WrongCurveCount(String),
    #[error("{name}: expected {expected}, got {actual}")]
    Assertion { name: String, expected: String, actual: String },
    #[error("real structure not preserved: {0}")]
    Involution(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("stage {stage}: {error}")]
pub struct PipelineError {
    pub stage: Stage,
    pub error: StepError,
}

pub type StepResult<T> = std::result::Result<T, StepError>;

/// A count or property checked at the end of a stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageAssertion {
    pub stage: Stage,
    pub name: String,
    pub expected: String,
    pub actual: String,
    pub pass: bool,
}

impl fmt::Display for StageAssertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} expected={} actual={} {}",
            self.stage,
            self.name,
            self.expected,
            self.actual,
            if self.pass { "ok" } else { "FAIL" }
        )
    }
}

/// Which section is flopped over each special fiber: `Some(j)` flops `m_j` and `mbar_j`.
pub type FlopRule = [Option<usize>; 6];

pub const STANDARD_FLOPS: FlopRule = [Some(1), None, Some(2), Some(3), None, Some(4)];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineOptions {
    pub labels: LabelChoice,
    pub roles: [usize; 6],
    pub flops: FlopRule,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions { labels: LabelChoice::default(), roles: IDENTITY_ROLES, flops: STANDARD_FLOPS }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineTrace {
    pub options: PipelineOptions,
    pub snapshots: Vec<(Stage, FiberSpaceModel)>,
    pub assertions: Vec<StageAssertion>,
}

impl PipelineTrace {
    pub fn last(&self) -> &FiberSpaceModel {
        &self.snapshots.last().expect("trace has snapshots").1
    }

    pub fn snapshot(&self, stage: Stage) -> Option<&FiberSpaceModel> {
        self.snapshots.iter().find(|(s, _)| *s == stage).map(|(_, m)| m)
    }

    pub fn moves(&self, stage: Stage) -> Vec<&MoveRecord> {
        self.last().fibers().flat_map(|f| f.moves.iter()).filter(|m| m.stage == stage).collect()
    }
}

struct Ledger {
    stage: Stage,
    items: Vec<StageAssertion>,
}

impl Ledger {
    fn check(&mut self, name: &str, expected: impl fmt::Display, actual: impl fmt::Display) -> StepResult<()> {
        let (expected, actual) = (expected.to_string(), actual.to_string());
        let pass = expected == actual;
        self.items.push(StageAssertion { stage: self.stage, name: name.to_string(), expected: expected.clone(), actual: actual.clone(), pass });
        if pass {
            Ok(())
        } else {
            Err(StepError::Assertion { name: name.to_string(), expected, actual })
        }
    }
}

fn index_of(f: FiberIndex) -> Option<usize> {
    match f {
        FiberIndex::Special(i) => Some(i),
        FiberIndex::Generic => None,
    }
}

fn digits(label: &str) -> Vec<usize> {
    label.chars().filter_map(|c| c.to_digit(10)).map(|d| d as usize).collect()
}

fn pair_label(head: &str, x: usize, y: usize) -> String {
    format!("{head}{}{}", x.min(y), x.max(y))
}

fn add_m_section(fs: &mut FiberSpaceModel, f: FiberIndex, key: &str, loc: SectionLocation) -> StepResult<()> {
    let name = fs
        .labels
        .name_of(key)
        .ok_or_else(|| StepError::PreconditionViolation(format!("corner {key} has no section name")))?;
    if fs.section(&name).is_none() {
        fs.sections.push(crate::fiber::SectionTrack {
            name: name.clone(),
            key: key.to_string(),
            locations: Default::default(),
            blown_up: None,
        });
    }
    fs.section_mut(&name).expect("just added").locations.insert(f, loc);
    Ok(())
}

/// Sections at the two corners of `marker` in `component`: `M{k}{j}` where `j`
/// is the other weight of the neighboring edge.
fn marker_sections(fs: &mut FiberSpaceModel, f: FiberIndex, component: &str, marker: &str) -> StepResult<()> {
    let k = digits(marker)[0];
    let c = fs.fiber(f).component(component)?.clone();
    let (p, n) = c.neighbors(marker).ok_or_else(|| StepError::PreconditionViolation(format!("{marker} not in {component}")))?;
    for b in [p, n] {
        let j = digits(&b).into_iter().find(|&d| d != k).ok_or_else(|| StepError::PreconditionViolation(format!("{b} next to {marker}")))?;
        add_m_section(fs, f, &format!("M{k}{j}"), SectionLocation::corner(component, marker, &b))?;
    }
    Ok(())
}

/// Blowing up the four singular sections: A1 points resolved, exceptional
/// curves created in the special fibers, and the eight corner sections `m`.
pub fn step1_resolve(fs: &FiberSpaceModel, rule: &FlopRule) -> StepResult<FiberSpaceModel> {
    let mut out = fs.clone();
    let stage = Stage::X2;
    for s in out.sections.iter_mut() {
        s.locations.clear();
        s.blown_up = Some(stage);
    }
    out.generic_fiber.components[0].markers.clear();
    for k in 1..=4 {
        marker_sections(&mut out, FiberIndex::Generic, "S", &format!("E{k}"))?;
    }
    for i in 1..=6 {
        let f = FiberIndex::Special(i);
        let kind = out.fiber(f).kind;
        match kind {
            FiberKind::TwoQuadricCones => {
                let line = line_name(i);
                let names: Vec<String> = out.fiber(f).components.iter().map(|c| c.name.clone()).collect();
                for name in names {
                    let x = digits(&name)[0];
                    let oth = if x <= 2 { [3, 4] } else { [1, 2] };
                    let marker = format!("E{x}");
                    let fc = out.fiber_mut(f);
                    fc.component_mut(&name)?.markers.clear();
                    fc.curve_types.insert(marker.clone(), NormalType::MinusTwoZero);
                    for y in oth {
                        let e = format!("E{y}{x}");
                        let b = pair_label("B", x, y);
                        let fc = out.fiber_mut(f);
                        fc.blow_up_between(stage, &name, &line, &b, &e)?;
                        fc.curve_types.insert(e.clone(), NormalType::MinusOneMinusOne);
                        add_m_section(&mut out, f, &format!("M{y}{x}"), SectionLocation::corner(&name, &e, &b))?;
                    }
                    marker_sections(&mut out, f, &name, &marker)?;
                }
            }
            FiberKind::FourPlanesWithNode => {
                let names: Vec<String> = out.fiber(f).components.iter().map(|c| c.name.clone()).collect();
                for name in names {
                    let d = digits(&name);
                    let (x, y) = (d[0], d[1]);
                    let b = pair_label("B", x, y);
                    for (k, j) in [(x, y), (y, x)] {
                        let e = format!("E{k}{j}");
                        let fc = out.fiber_mut(f);
                        fc.blow_up_between(stage, &name, &b, &format!("R{k}"), &e)?;
                        fc.curve_types.insert(e.clone(), NormalType::MinusOneMinusOne);
                        add_m_section(&mut out, f, &format!("M{k}{j}"), SectionLocation::corner(&name, &e, &b))?;
                    }
                }
            }
            FiberKind::Irreducible4ODP => {
                return Err(StepError::PreconditionViolation(format!("{f} is irreducible")));
            }
        }
    }
    mark_flop_curves(&mut out, rule);
    out.sections.sort_by_key(|a| section_order(&a.name));
    Ok(out)
}

fn section_order(name: &str) -> (bool, String, bool) {
    let head = name.starts_with('m');
    let bar = name.contains("bar");
    let idx = name.trim_start_matches(|c: char| c.is_ascii_alphabetic()).to_string();
    (head, idx, bar)
}

/// Tags the curves carrying the sections to be flopped.
fn mark_flop_curves(fs: &mut FiberSpaceModel, rule: &FlopRule) {
    for (i, j) in rule.iter().enumerate() {
        let Some(j) = j else { continue };
        let f = FiberIndex::Special(i + 1);
        for name in [format!("m{j}"), format!("mbar{j}")] {
            if let Some(SectionLocation::CornerOf { curves, .. }) = fs.section(&name).and_then(|s| s.locations.get(&f)).cloned() {
                fs.fiber_mut(f).flop_marks.insert(curves[0].clone());
            }
        }
    }
}

fn step1_assertions(fs: &FiberSpaceModel, ledger: &mut Ledger) -> StepResult<()> {
    let g = &fs.generic_fiber.components[0];
    ledger.check("generic fiber rays", 8, g.surface.len())?;
    ledger.check("generic fiber smooth", true, g.surface.is_smooth() && g.markers.is_empty())?;
    for f in &fs.special_fibers {
        let exc = f.curve_types.len();
        let minus_one = f.curves_of_type(NormalType::MinusOneMinusOne);
        let minus_two = f.curves_of_type(NormalType::MinusTwoZero).len();
        match f.kind {
            FiberKind::TwoQuadricCones => {
                ledger.check(&format!("{} exceptional curves", f.fiber), 6, exc)?;
                ledger.check(&format!("{} (-2,0)-curves", f.fiber), 2, minus_two)?;
                ledger.check(&format!("{} (-1,-1)-curves", f.fiber), 4, minus_one.len())?;
            }
            FiberKind::FourPlanesWithNode => {
                ledger.check(&format!("{} exceptional curves", f.fiber), 8, exc)?;
                ledger.check(&format!("{} (-1,-1)-curves", f.fiber), 8, minus_one.len())?;
                let incident: Vec<usize> = minus_one
                    .iter()
                    .map(|e| {
                        fs.sections
                            .iter()
                            .filter(|s| matches!(s.locations.get(&f.fiber), Some(SectionLocation::CornerOf { curves, .. }) if curves.contains(e)))
                            .count()
                    })
                    .collect();
                ledger.check(&format!("{} curves meeting one m-section", f.fiber), 8, incident.iter().filter(|&&n| n == 1).count())?;
                ledger.check(&format!("{} unresolved nodes", f.fiber), 1, f.unresolved_nodes())?;
            }
            FiberKind::Irreducible4ODP => {}
        }
    }
    let m_count = fs.sections.iter().filter(|s| s.name.starts_with('m')).count();
    ledger.check("m-sections", 8, m_count)?;
    Ok(())
}

/// Flops the (-1,-1)-curve carrying `section` over fiber `f`: the curve is
/// blown down in its host, and the point where it met the shared curve is
/// blown up in the other component, on the side of the shared curve where the
/// curve was attached.
pub fn flop(fs: &mut FiberSpaceModel, f: FiberIndex, section: &str) -> StepResult<String> {
    let stage = Stage::X3;
    let loc = fs
        .section(section)
        .and_then(|s| s.locations.get(&f))
        .cloned()
        .ok_or_else(|| StepError::SectionLocationMissing(format!("{section} over {f}")))?;
    let SectionLocation::CornerOf { component: host, curves } = loc else {
        return Err(StepError::MissingFlopCurve(format!("{section} over {f} is not at a corner")));
    };
    let [e, x] = curves;
    let fc = fs.fiber(f);
    let h = fc.component(&host)?.clone();
    if fc.normal_type(&e) != NormalType::MinusOneMinusOne || h.a(&e) != Some(-1) {
        return Err(StepError::MissingFlopCurve(format!("{section} over {f} lies on {e}, which is not a (-1,-1)-curve")));
    }
    let (p, n) = h.neighbors(&e).expect("curve in host");
    let s = if p == x { n.clone() } else { p.clone() };
    let hosts = fc.hosts(&s);
    if hosts.len() != 2 {
        return Err(StepError::MissingFlopCurve(format!("{e} over {f} does not meet a second component")));
    }
    let receiver = hosts.into_iter().find(|c| *c != host).expect("two hosts");
    let r = fc.component(&receiver)?.clone();
    let e_before_s = n == s;
    let (sp, sn) = r.neighbors(&s).expect("shared curve in receiver");
    let y = if e_before_s { sn } else { sp };
    for other in &fs.sections {
        if other.name == section {
            continue;
        }
        if let Some(SectionLocation::CornerOf { component, curves }) = other.locations.get(&f) {
            if *component == host && curves.contains(&e) {
                return Err(StepError::PreconditionViolation(format!("{} also lies on the flopped curve {e}", other.name)));
            }
        }
    }
    let new = format!("F{}", &e[1..]);
    let fc = fs.fiber_mut(f);
    let (host_id, receiver_id) = (h.id, r.id);
    fc.blow_down(stage, &host, &e)?;
    fc.blow_up_between(stage, &receiver, &s, &y, &new)?;
    fc.curve_types.remove(&e);
    fc.curve_types.insert(new.clone(), NormalType::MinusOneMinusOne);
    if fc.flop_marks.remove(&e) {
        fc.flop_marks.insert(new.clone());
    }
    fc.moves.push(MoveRecord {
        stage,
        component: host_id,
        op: MoveOp::Flop { curve: e.clone(), from: host_id, to: receiver_id, new: new.clone() },
    });
    fs.section_mut(section)
        .expect("section exists")
        .locations
        .insert(f, SectionLocation::corner(&receiver, &new, &y));
    Ok(new)
}

/// Flops over the fibers named by the rule, each section with its conjugate.
pub fn step2_flops(fs: &FiberSpaceModel, rule: &FlopRule) -> StepResult<(FiberSpaceModel, Vec<(FiberIndex, String)>)> {
    let mut out = fs.clone();
    let mut flopped = Vec::new();
    for (i, j) in rule.iter().enumerate() {
        let Some(j) = j else { continue };
        let f = FiberIndex::Special(i + 1);
        for name in [format!("m{j}"), format!("mbar{j}")] {
            let curve = flop(&mut out, f, &name)?;
            flopped.push((f, curve));
        }
    }
    Ok((out, flopped))
}

fn without_moves(f: &FiberComplex) -> FiberComplex {
    let mut g = f.clone();
    g.moves.clear();
    g
}

/// Blows up `m1, mbar1, m3, mbar3` everywhere; returns the touched components per fiber.
pub fn step3_blowup_m(fs: &FiberSpaceModel) -> StepResult<(FiberSpaceModel, Vec<(FiberIndex, BTreeSet<String>)>)> {
    let mut out = fs.clone();
    let stage = Stage::X4;
    let names = ["m1", "mbar1", "m3", "mbar3"];
    let fibers: Vec<FiberIndex> = out.fibers().map(|f| f.fiber).collect();
    let mut touched = Vec::new();
    for f in fibers {
        let mut t = BTreeSet::new();
        for name in names {
            let track = out.section(name).ok_or_else(|| StepError::SectionLocationMissing(name.to_string()))?;
            let key = track.key.clone();
            let loc = track
                .locations
                .get(&f)
                .cloned()
                .ok_or_else(|| StepError::SectionLocationMissing(format!("{name} over {f}")))?;
            let SectionLocation::CornerOf { component, curves } = loc else {
                return Err(StepError::SectionLocationMissing(format!("{name} over {f} is not a corner")));
            };
            let new = format!("N{}", &key[1..]);
            out.fiber_mut(f).blow_up_between(stage, &component, &curves[0], &curves[1], &new)?;
            t.insert(component);
        }
        touched.push((f, t));
    }
    for name in names {
        let s = out.section_mut(name).expect("checked above");
        s.locations.clear();
        s.blown_up = Some(stage);
    }
    for (f, t) in &touched {
        let fc = out.fiber_mut(*f);
        if fc.kind == FiberKind::FourPlanesWithNode {
            for c in fc.components.iter_mut() {
                c.redundant = !t.contains(&c.name);
            }
        }
    }
    Ok((out, touched))
}

/// The one-point blow-up of the plane.
pub fn sigma_one() -> ToricSurfaceModel {
    ToricSurfaceModel::new(&[lv(1, 0), lv(0, 1), lv(-1, 1), lv(0, -1)]).expect("valid fan")
}

/// Conjugate pairs of components of a fiber, each listed once.
fn conjugate_pairs(f: &FiberComplex) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for c in &f.components {
        let d = conjugate_label(&c.name);
        if c.name < d {
            out.push((c.name.clone(), d));
        }
    }
    out
}

/// Small resolutions of the nodes: the one that avoids the redundant components.
pub fn step4_small_resolve(fs: &FiberSpaceModel) -> StepResult<(FiberSpaceModel, usize)> {
    let mut out = fs.clone();
    let stage = Stage::X5;
    let unresolved: usize = out.special_fibers.iter().map(|f| f.unresolved_nodes()).sum();
    if unresolved != 2 {
        return Err(StepError::PreconditionViolation(format!("{unresolved} unresolved nodes")));
    }
    let mut resolved = 0;
    for fc in out.special_fibers.iter_mut() {
        if fc.unresolved_nodes() == 0 {
            continue;
        }
        let i = index_of(fc.fiber).expect("special");
        let valid: Vec<(String, String)> = conjugate_pairs(fc)
            .into_iter()
            .filter(|(a, b)| !fc.component(a).map(|c| c.redundant).unwrap_or(true) && !fc.component(b).map(|c| c.redundant).unwrap_or(true))
            .collect();
        if valid.len() != 1 {
            return Err(StepError::AmbiguousResolution(format!("{} admissible choices over {}", valid.len(), fc.fiber)));
        }
        let line = line_name(i);
        let (a, b) = valid[0].clone();
        for name in [a, b] {
            let d = digits(&name);
            fc.blow_up_between(stage, &name, &format!("R{}", d[0]), &format!("R{}", d[1]), &line)?;
            let id = fc.component(&name)?.id;
            fc.moves.push(MoveRecord { stage, component: id, op: MoveOp::SmallResolution { curve: line.clone() } });
        }
        for node in fc.nodes.iter_mut() {
            if node.status == NodeStatus::Unresolved {
                node.status = NodeStatus::SmallResolved(line.clone());
                resolved += 1;
            }
        }
        for c in fc.components.iter_mut() {
            if c.redundant {
                c.ruling_contractible = true;
            }
        }
    }
    Ok((out, resolved))
}

/// Contracts every redundant component along its ruling: each ruling fiber
/// that is shared with a neighbor is blown down there, then the component goes.
pub fn step5_blowdown_redundant(fs: &FiberSpaceModel) -> StepResult<(FiberSpaceModel, usize)> {
    let mut out = fs.clone();
    let stage = Stage::X6;
    let mut removed = 0;
    for fc in out.special_fibers.iter_mut() {
        let redundant: Vec<String> = fc.components.iter().filter(|c| c.redundant).map(|c| c.name.clone()).collect();
        for name in redundant {
            let d = fc.component(&name)?.clone();
            if !d.ruling_contractible || fan_isomorphic(&d.surface, &sigma_one()).is_none() {
                return Err(StepError::NotContractible(format!("{name} over {}", fc.fiber)));
            }
            let rays = d.surface.rays();
            for (r, l) in rays.iter().zip(d.surface.labels()) {
                let ruling_fiber = !rays.contains(&-*r);
                if !ruling_fiber {
                    continue;
                }
                if let Some(nb) = fc.hosts(l).into_iter().find(|h| *h != name) {
                    fc.blow_down(stage, &nb, l)?;
                }
            }
            fc.remove_component(stage, &name)?;
            removed += 1;
        }
    }
    Ok((out, removed))
}

/// Contracts, in each component, the unshared (-1)-curve meeting the line; when
/// two qualify the curve that was not created by a flop is taken.
pub fn step6_contract(fs: &FiberSpaceModel) -> StepResult<(FiberSpaceModel, usize)> {
    let mut out = fs.clone();
    let stage = Stage::Zhat;
    let mut contracted = 0;
    for fc in out.special_fibers.iter_mut() {
        let i = index_of(fc.fiber).expect("special");
        let line = line_name(i);
        if fc.components.len() != 2 {
            return Err(StepError::PreconditionViolation(format!("{} has {} components", fc.fiber, fc.components.len())));
        }
        let mut chosen = Vec::new();
        for c in &fc.components {
            let (p, n) = c
                .neighbors(&line)
                .ok_or_else(|| StepError::PreconditionViolation(format!("{line} missing from {}", c.name)))?;
            let mut cands: Vec<String> = [p, n].into_iter().filter(|l| c.a(l) == Some(-1) && !fc.is_shared(l)).collect();
            if cands.len() > 1 {
                let plain: Vec<String> = cands.iter().filter(|l| !fc.flop_marks.contains(*l)).cloned().collect();
                cands = plain;
            }
            if cands.len() != 1 {
                return Err(StepError::WrongCurveCount(format!("{} candidates in {} over {}", cands.len(), c.name, fc.fiber)));
            }
            chosen.push((c.name.clone(), c.id, cands.remove(0)));
        }
        if chosen[1].2 != conjugate_label(&chosen[0].2) {
            return Err(StepError::WrongCurveCount(format!("{} and {} are not conjugate", chosen[0].2, chosen[1].2)));
        }
        for (name, id, curve) in chosen {
            fc.curve_types.insert(curve.clone(), NormalType::MinusOneMinusOne);
            fc.blow_down(stage, &name, &curve)?;
            fc.moves.push(MoveRecord { stage, component: id, op: MoveOp::Contract { curve: curve.clone() } });
            fc.nodes.push(NodeRecord { fiber: fc.fiber, components: vec![id], status: NodeStatus::Contracted(curve) });
            contracted += 1;
        }
    }
    Ok((out, contracted))
}

/// Nodes of the total space: unresolved ones and those from contracted curves.
pub fn node_count(fs: &FiberSpaceModel) -> usize {
    fs.fibers()
        .flat_map(|f| f.nodes.iter())
        .filter(|n| !matches!(n.status, NodeStatus::SmallResolved(_)))
        .count()
}

fn ray_balance(before: &FiberSpaceModel, after: &FiberSpaceModel, stage: Stage) -> (i64, i64) {
    let count = |m: &FiberSpaceModel| m.fibers().map(|f| f.ray_count() as i64).sum::<i64>();
    let mut predicted = 0i64;
    for f in before.fibers() {
        let g = after.fiber(f.fiber);
        for m in g.moves.iter().filter(|m| m.stage == stage) {
            predicted += match &m.op {
                MoveOp::BlowUp { .. } => 1,
                MoveOp::BlowDown { .. } => -1,
                MoveOp::Remove => -(f.components.iter().find(|c| c.id == m.component).map(|c| c.surface.len()).unwrap_or(0) as i64),
                _ => 0,
            };
        }
    }
    (count(after) - count(before), predicted)
}

fn common_checks(before: &FiberSpaceModel, after: &FiberSpaceModel, ledger: &mut Ledger) -> StepResult<()> {
    for f in after.fibers() {
        f.check_invariants()?;
    }
    let failures = involution_failures(after);
    if !failures.is_empty() {
        return Err(StepError::Involution(failures.join("; ")));
    }
    ledger.check("real structure preserved", true, check_involution(after))?;
    let (delta, predicted) = ray_balance(before, after, ledger.stage);
    ledger.check("ray count change", predicted, delta)?;
    let kinds_ok = after.special_fibers.iter().all(|f| f.kind != FiberKind::Irreducible4ODP);
    ledger.check("special fibers reducible", true, kinds_ok)?;
    Ok(())
}

fn stage_err(stage: Stage) -> impl Fn(StepError) -> PipelineError {
    move |error| PipelineError { stage, error }
}

/// Runs all six steps. Each stage's assertions are recorded; the first failed
/// assertion or step error stops the run.
pub fn run_pipeline(model: &ProjectiveModel, catalog: &ExpectedCatalog, options: &PipelineOptions) -> Result<PipelineTrace, PipelineError> {
    let mut trace = PipelineTrace { options: options.clone(), snapshots: Vec::new(), assertions: Vec::new() };
    let result = run_into(model, catalog, options, &mut trace);
    result.map(|_| trace)
}

/// Like [`run_pipeline`], but keeps the partial trace on failure.
pub fn run_pipeline_partial(
    model: &ProjectiveModel,
    catalog: &ExpectedCatalog,
    options: &PipelineOptions,
) -> (PipelineTrace, Option<PipelineError>) {
    let mut trace = PipelineTrace { options: options.clone(), snapshots: Vec::new(), assertions: Vec::new() };
    let err = run_into(model, catalog, options, &mut trace).err();
    (trace, err)
}

fn run_into(model: &ProjectiveModel, catalog: &ExpectedCatalog, options: &PipelineOptions, trace: &mut PipelineTrace) -> Result<(), PipelineError> {
    let mut x1 = build_x1_with(model, catalog, options.roles).map_err(|e| stage_err(Stage::X1)(e.into()))?;
    x1.labels = options.labels.clone();
    {
        let mut ledger = Ledger { stage: Stage::X1, items: Vec::new() };
        let r = (|| -> StepResult<()> {
            let counts: Vec<usize> = x1.special_fibers.iter().map(|f| f.components.len()).collect();
            ledger.check("generic components", 1, x1.generic_fiber.components.len())?;
            ledger.check("special components", "4,2,2,4,2,2", join(&counts))?;
            ledger.check("A1 points", 4, x1.generic_fiber.components[0].markers.len())?;
            ledger.check("nodes", 2, node_count(&x1))?;
            ledger.check("real structure preserved", true, check_involution(&x1))?;
            Ok(())
        })();
        trace.assertions.extend(ledger.items);
        r.map_err(stage_err(Stage::X1))?;
    }
    trace.snapshots.push((Stage::X1, x1.clone()));

    let x2 = stage(trace, Stage::X2, &x1, |prev, ledger| {
        let next = step1_resolve(prev, &options.flops)?;
        step1_assertions(&next, ledger)?;
        Ok(next)
    })?;
    let x3 = stage(trace, Stage::X3, &x2, |prev, ledger| {
        let (next, flopped) = step2_flops(prev, &options.flops)?;
        ledger.check("curves flopped", 8, flopped.len())?;
        for f in prev.special_fibers.iter() {
            let i = index_of(f.fiber).expect("special");
            if options.flops[i - 1].is_none() {
                ledger.check(&format!("{} unchanged", f.fiber), true, without_moves(f) == without_moves(next.fiber(f.fiber)))?;
            }
        }
        Ok(next)
    })?;
    let x4 = stage(trace, Stage::X4, &x3, |prev, ledger| {
        let (next, _) = step3_blowup_m(prev)?;
        let g = &next.generic_fiber.components[0].surface;
        ledger.check("generic fiber rays", 12, g.len())?;
        ledger.check("generic fiber K^2", 0, g.k_squared().map_err(FiberError::from)?)?;
        let mut redundant = 0;
        for f in &next.special_fibers {
            let before = prev.fiber(f.fiber);
            match f.kind {
                FiberKind::FourPlanesWithNode => {
                    let red: Vec<_> = f.components.iter().filter(|c| c.redundant).collect();
                    ledger.check(&format!("{} redundant components", f.fiber), 2, red.len())?;
                    let sigma = red.iter().filter(|c| fan_isomorphic(&c.surface, &sigma_one()).is_some()).count();
                    ledger.check(&format!("{} redundant components are Sigma_1", f.fiber), 2, sigma)?;
                    let twice = f
                        .components
                        .iter()
                        .filter(|c| !c.redundant)
                        .filter(|c| c.surface.len() == before.component(&c.name).map(|b| b.surface.len() + 2).unwrap_or(0))
                        .count();
                    ledger.check(&format!("{} components blown up twice", f.fiber), 2, twice)?;
                    redundant += red.len();
                }
                _ => {
                    let gained = f
                        .components
                        .iter()
                        .filter(|c| c.surface.len() == before.component(&c.name).map(|b| b.surface.len() + 2).unwrap_or(0))
                        .count();
                    ledger.check(&format!("{} components gaining two rays", f.fiber), 2, gained)?;
                }
            }
        }
        ledger.check("redundant components", 4, redundant)?;
        Ok(next)
    })?;
    let x5 = stage(trace, Stage::X5, &x4, |prev, ledger| {
        let (next, resolved) = step4_small_resolve(prev)?;
        ledger.check("nodes resolved", 2, resolved)?;
        let lines: usize = next.special_fibers.iter().filter(|f| f.kind == FiberKind::FourPlanesWithNode).map(|f| f.hosts(&line_name(index_of(f.fiber).unwrap())).len() / 2).sum();
        ledger.check("exceptional curves of the small resolutions", 2, lines)?;
        let untouched = next
            .special_fibers
            .iter()
            .flat_map(|f| f.components.iter().filter(|c| c.redundant).map(move |c| (f, c)))
            .all(|(f, c)| prev.fiber(f.fiber).component(&c.name).map(|b| b.surface == c.surface).unwrap_or(false));
        ledger.check("redundant components untouched", true, untouched)?;
        ledger.check("alternative resolutions rejected", 2, alternatives_rejected(prev))?;
        Ok(next)
    })?;
    let x6 = stage(trace, Stage::X6, &x5, |prev, ledger| {
        let (next, removed) = step5_blowdown_redundant(prev)?;
        ledger.check("components removed", 4, removed)?;
        let counts: Vec<usize> = next.special_fibers.iter().map(|f| f.components.len()).collect();
        ledger.check("special components", "2,2,2,2,2,2", join(&counts))?;
        let lines = next
            .special_fibers
            .iter()
            .filter(|f| {
                let l = line_name(index_of(f.fiber).unwrap());
                f.hosts(&l).len() == 2 && f.curves().iter().filter(|c| c.hosts.len() == 2).count() == 1
            })
            .count();
        ledger.check("components meeting along their line", 6, lines)?;
        Ok(next)
    })?;
    stage(trace, Stage::Zhat, &x6, |prev, ledger| {
        let (next, contracted) = step6_contract(prev)?;
        ledger.check("curves contracted", 12, contracted)?;
        ledger.check("nodes", 12, node_count(&next))?;
        Ok(next)
    })?;
    Ok(())
}

/// For each node, the small resolution blowing up the redundant pair instead
/// is counted if it is rejected by the rule.
fn alternatives_rejected(fs: &FiberSpaceModel) -> usize {
    fs.special_fibers
        .iter()
        .filter(|f| f.unresolved_nodes() == 1)
        .filter(|f| {
            conjugate_pairs(f)
                .iter()
                .filter(|(a, b)| {
                    let red = |n: &str| f.component(n).map(|c| c.redundant).unwrap_or(false);
                    red(a) || red(b)
                })
                .count()
                == 1
        })
        .count()
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn stage(
    trace: &mut PipelineTrace,
    st: Stage,
    prev: &FiberSpaceModel,
    f: impl FnOnce(&FiberSpaceModel, &mut Ledger) -> StepResult<FiberSpaceModel>,
) -> Result<FiberSpaceModel, PipelineError> {
    let mut ledger = Ledger { stage: st, items: Vec::new() };
    let r = f(prev, &mut ledger).and_then(|next| {
        common_checks(prev, &next, &mut ledger)?;
        Ok(next)
    });
    trace.assertions.extend(ledger.items);
    let next = r.map_err(stage_err(st))?;
    trace.snapshots.push((st, next.clone()));
    Ok(next)
}

/// Result of comparing one fiber with its expected counterpart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiberCheck {
    pub fiber: FiberIndex,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationReport {
    pub fibers: Vec<FiberCheck>,
    pub node_count: usize,
    pub involution_ok: bool,
    /// Lattice map from the final generic fiber onto the expected one.
    pub isomorphism: Option<FanIsomorphism>,
    pub pass: bool,
}

fn ray_set(s: &ToricSurfaceModel, m: &FanIsomorphism) -> BTreeSet<LatticeVector> {
    s.rays().iter().map(|r| m.matrix.apply(*r)).collect()
}

/// Checks fiber `i` of the final stage against pair `i` of the catalog under `iso`.
fn compare_special(fc: &FiberComplex, expected: &ExpectedCatalog, iso: &FanIsomorphism) -> FiberCheck {
    let i = index_of(fc.fiber).expect("special");
    let fail = |d: String| FiberCheck { fiber: fc.fiber, pass: false, detail: d };
    let Some(pair) = expected.special_fibers.iter().find(|p| p.index == i) else {
        return fail("no expected pair".into());
    };
    if fc.components.len() != 2 {
        return fail(format!("{} components", fc.components.len()));
    }
    let want = [pair.plus.rays().iter().copied().collect::<BTreeSet<_>>(), pair.minus.rays().iter().copied().collect()];
    let line = line_name(i);
    let mut matched = Vec::new();
    for c in &fc.components {
        let got = ray_set(&c.surface, iso);
        let which = want.iter().position(|w| *w == got);
        let Some(w) = which else {
            return fail(format!("{} does not map onto either expected component", c.name));
        };
        let exp = if w == 0 { &pair.plus } else { &pair.minus };
        let line_ray = c.ray(&line).map(|r| iso.matrix.apply(r));
        let exp_line = exp.index_of_label(&pair.shared).map(|k| exp.rays()[k]);
        if line_ray.is_none() || line_ray != exp_line {
            return fail(format!("{line} of {} does not map to {}", c.name, pair.shared));
        }
        if fan_isomorphic(&c.surface, exp).is_none() {
            return fail(format!("{} is not isomorphic to the expected component", c.name));
        }
        matched.push(w);
    }
    if matched[0] == matched[1] {
        return fail("both components map to the same expected component".into());
    }
    let names: Vec<String> = fc
        .components
        .iter()
        .zip(&matched)
        .map(|(c, w)| format!("{}->S{}{}", c.name, i, if *w == 0 { "+" } else { "-" }))
        .collect();
    FiberCheck { fiber: fc.fiber, pass: true, detail: names.join(" ") }
}

/// Compares the final stage with the catalog: the generic fiber, every special
/// pair under one common lattice map, the real structure at every stage, and
/// the number of nodes.
pub fn verify_final_fibers(trace: &PipelineTrace, expected: &ExpectedCatalog) -> VerificationReport {
    let last = trace.last();
    let complete = trace.snapshots.last().map(|(s, _)| *s) == Some(Stage::Zhat);
    let generic = &last.generic_fiber.components[0].surface;
    let isos = fan_isomorphisms(generic.fan(), expected.generic_fiber.fan());
    let mut best: Option<(usize, FanIsomorphism, Vec<FiberCheck>)> = None;
    for iso in &isos {
        let checks: Vec<FiberCheck> = last.special_fibers.iter().map(|f| compare_special(f, expected, iso)).collect();
        let score = checks.iter().filter(|c| c.pass).count();
        if best.as_ref().map(|b| score > b.0).unwrap_or(true) {
            best = Some((score, *iso, checks));
        }
    }
    let mut fibers = vec![FiberCheck {
        fiber: FiberIndex::Generic,
        pass: !isos.is_empty(),
        detail: format!("{} lattice isomorphisms onto the expected fiber", isos.len()),
    }];
    let isomorphism = match best {
        Some((_, iso, checks)) => {
            fibers.extend(checks);
            Some(iso)
        }
        None => {
            for f in &last.special_fibers {
                fibers.push(FiberCheck { fiber: f.fiber, pass: false, detail: "no generic isomorphism".into() });
            }
            None
        }
    };
    let involution_ok = trace.snapshots.iter().all(|(_, m)| check_involution(m));
    let nodes = node_count(last);
    let pass = complete && fibers.iter().all(|f| f.pass) && involution_ok && nodes == 12;
    VerificationReport { fibers, node_count: nodes, involution_ok, isomorphism, pass }
}

/// Runs and verifies every label choice.
pub fn search_label_choices(
    model: &ProjectiveModel,
    catalog: &ExpectedCatalog,
    roles: [usize; 6],
) -> Vec<(LabelChoice, Result<VerificationReport, PipelineError>)> {
    LabelChoice::all()
        .into_iter()
        .map(|labels| {
            let options = PipelineOptions { labels: labels.clone(), roles, flops: STANDARD_FLOPS };
            let r = run_pipeline(model, catalog, &options).map(|t| verify_final_fibers(&t, catalog));
            (labels, r)
        })
        .collect()
}

/// Section names in the standard order, for reports.
pub fn section_names() -> Vec<String> {
    let mut out = Vec::new();
    for j in 1..=4 {
        out.push(format!("m{j}"));
        out.push(conjugate_section_name(&format!("m{j}")));
    }
    out
}
