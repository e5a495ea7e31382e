//! Reports shared by the text and the structured output, and the catalog file
//! format read back by the command-line tool.

use std::fmt::Write as _;

use thiserror::Error;

use crate::fiber::{FiberSpaceModel, Stage};
use crate::lattice::{lv, LatticeVector, ToricSurfaceModel};
use crate::pipeline::{PipelineError, PipelineTrace, VerificationReport};
use crate::projective::ProjectiveModel;
use crate::torus::{canonical_form, enumerate_actions, equivalent_actions, type_one, type_two, ExpectedCatalog, SpecialPair, TorusError};

/// One line of output: a record kind and ordered fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub kind: String,
    pub fields: Vec<(String, String)>,
}

impl Record {
    pub fn new(kind: &str) -> Self {
        Record { kind: kind.to_string(), fields: Vec::new() }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.fields.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Report {
    pub records: Vec<Record>,
}

fn quote(v: &str) -> String {
    if v.is_empty() || v.contains(char::is_whitespace) || v.contains('"') {
        format!("\"{}\"", v.replace('\\', "\\\\").replace('"', "\\\""))
    } else {
        v.to_string()
    }
}

impl Report {
    pub fn push(&mut self, r: Record) {
        self.records.push(r);
    }

    pub fn extend(&mut self, other: Report) {
        self.records.extend(other.records);
    }

    /// `kind=... key=value ...`, one record per line.
    pub fn structured(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&format!("record={}", r.kind));
            for (k, v) in &r.fields {
                s.push_str(&format!(" {k}={}", quote(v)));
            }
            s.push('\n');
        }
        s
    }

    /// Same content laid out for reading: a heading whenever the kind changes.
    pub fn text(&self) -> String {
        let mut s = String::new();
        let mut last = "";
        for r in &self.records {
            if r.kind != last {
                if !last.is_empty() {
                    s.push('\n');
                }
                let _ = writeln!(s, "== {} ==", r.kind);
                last = &r.kind;
            }
            let parts: Vec<String> = r.fields.iter().map(|(k, v)| format!("{k}: {v}")).collect();
            let _ = writeln!(s, "  {}", parts.join(" | "));
        }
        s
    }
}

fn rays_text(rays: &[LatticeVector]) -> String {
    rays.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(";")
}

fn ints_text(v: &[i64]) -> String {
    v.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",")
}

pub fn classify_report(n: usize) -> Result<Report, TorusError> {
    let classes = enumerate_actions(n)?;
    let mut rep = Report::default();
    let word = if classes.len() == 1 { "class" } else { "classes" };
    rep.push(Record::new("classify").with("n", n).with("count", classes.len()).with("summary", format!("{} {word}", classes.len())));
    for (i, c) in classes.iter().enumerate() {
        let seq = c.sequence();
        let mut r = Record::new("class").with("index", i + 1).with("entries", rays_text(seq.entries()));
        if n == 4 {
            let name = if equivalent_actions(&seq, &type_one()) {
                "I"
            } else if equivalent_actions(&seq, &type_two()) {
                "II"
            } else {
                "-"
            };
            r = r.with("type", name);
        }
        r = r.with("canonical", rays_text(&canonical_form(&seq)));
        rep.push(r);
    }
    Ok(rep)
}

pub fn model_report(m: &ProjectiveModel) -> Report {
    let mut rep = Report::default();
    let lambdas: Vec<String> = m.invariant.lambdas().iter().map(|l| l.to_string()).collect();
    rep.push(Record::new("model").with("invariant", lambdas.join(",")));
    rep.push(Record::new("equation").with("name", "Q1").with("value", &m.q1));
    rep.push(Record::new("equation").with("name", "Q2").with("value", &m.q2));
    rep.push(Record::new("equation").with("name", "f1").with("value", &m.f1));
    rep.push(Record::new("equation").with("name", "f2").with("value", &m.f2));
    for (c, ok) in &m.pencil.clauses {
        rep.push(Record::new("clause").with("name", c).with("pass", ok));
    }
    let common: Vec<String> = m.pencil.common_points.iter().map(|p| p.to_string()).collect();
    rep.push(
        Record::new("real-points")
            .with("common", common.join(","))
            .with("real", &m.real_points)
            .with("structure-consistent", m.real_structure_consistent())
            .with("weights-consistent", m.weights_consistent()),
    );
    for (i, l, k) in m.special_fibers() {
        rep.push(Record::new("fiber-kind").with("index", i).with("lambda", l).with("kind", k));
    }
    rep
}

/// Assertions and stage summaries of a trace.
pub fn trace_report(trace: &PipelineTrace) -> Report {
    let mut rep = Report::default();
    rep.push(Record::new("labels").with("choice", &trace.options.labels).with("roles", ints_text(&trace.options.roles.map(|r| r as i64))));
    for (stage, fs) in &trace.snapshots {
        rep.push(stage_summary(*stage, fs));
        for a in trace.assertions.iter().filter(|a| a.stage == *stage) {
            rep.push(
                Record::new("assertion")
                    .with("stage", stage)
                    .with("name", &a.name)
                    .with("expected", &a.expected)
                    .with("actual", &a.actual)
                    .with("pass", a.pass),
            );
        }
    }
    rep
}

fn stage_summary(stage: Stage, fs: &FiberSpaceModel) -> Record {
    let comps: Vec<String> = fs.special_fibers.iter().map(|f| f.components.len().to_string()).collect();
    Record::new("stage")
        .with("stage", stage)
        .with("generic-rays", fs.generic_fiber.ray_count())
        .with("special-components", comps.join(","))
        .with("nodes", crate::pipeline::node_count(fs))
}

/// Every fiber and section of one stage.
pub fn stage_catalog(stage: Stage, fs: &FiberSpaceModel) -> Report {
    let mut rep = Report::default();
    for f in fs.fibers() {
        let base = f.base.as_ref().map(|b| b.to_string()).unwrap_or_else(|| "-".into());
        rep.push(
            Record::new("fiber")
                .with("stage", stage)
                .with("fiber", f.fiber)
                .with("base", base)
                .with("kind", f.kind)
                .with("components", f.components.len())
                .with("nodes", f.nodes.len())
                .with("unresolved", f.unresolved_nodes()),
        );
        for c in &f.components {
            let a = c.surface.self_intersections().unwrap_or_default();
            let mut r = Record::new("component")
                .with("stage", stage)
                .with("fiber", f.fiber)
                .with("name", &c.name)
                .with("id", c.id)
                .with("rays", c.surface.len())
                .with("labels", c.surface.labels().join(","))
                .with("self", ints_text(&a));
            if !c.markers.is_empty() {
                r = r.with("markers", c.markers.join(","));
            }
            if c.redundant {
                r = r.with("redundant", true);
            }
            rep.push(r);
        }
        for cr in f.curves().into_iter().filter(|c| c.hosts.len() == 2 || c.normal_type != crate::fiber::NormalType::Unmarked) {
            rep.push(
                Record::new("curve")
                    .with("stage", stage)
                    .with("fiber", f.fiber)
                    .with("label", &cr.label)
                    .with("hosts", cr.hosts.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","))
                    .with("self", ints_text(&cr.self_int_in_host))
                    .with("normal", cr.normal_type)
                    .with("real", cr.is_real),
            );
        }
    }
    for s in &fs.sections {
        for (f, loc) in &s.locations {
            rep.push(Record::new("section").with("stage", stage).with("name", &s.name).with("key", &s.key).with("fiber", f).with("at", loc));
        }
    }
    rep
}

pub fn verification_report(v: &VerificationReport) -> Report {
    let mut rep = Report::default();
    for f in &v.fibers {
        rep.push(Record::new("verify").with("fiber", f.fiber).with("pass", f.pass).with("detail", &f.detail));
    }
    if let Some(iso) = &v.isomorphism {
        let m = iso.matrix.0;
        rep.push(Record::new("isomorphism").with("matrix", format!("[[{},{}],[{},{}]]", m[0][0], m[0][1], m[1][0], m[1][1])).with("reflected", iso.reflected));
    }
    rep.push(Record::new("involution").with("pass", v.involution_ok));
    rep
}

pub fn failure_record(e: &PipelineError) -> Record {
    Record::new("failure").with("stage", e.stage).with("error", &e.error)
}

/// The closing line `nodes=N pass=B`.
pub fn final_line(nodes: usize, pass: bool) -> String {
    format!("nodes={nodes} pass={pass}")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogParseError {
    #[error("line {0}: {1}")]
    Line(usize, String),
    #[error("catalog has no generic fiber")]
    MissingGeneric,
}

fn parse_fields(line: &str) -> Vec<(String, String)> {
    line.split_whitespace().filter_map(|t| t.split_once('=')).map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

fn parse_rays(s: &str) -> Option<Vec<LatticeVector>> {
    s.split(';')
        .map(|p| {
            let p = p.trim().strip_prefix('(')?.strip_suffix(')')?;
            let (x, y) = p.split_once(',')?;
            Some(lv(x.trim().parse().ok()?, y.trim().parse().ok()?))
        })
        .collect()
}

/// Plain-text catalog: a `generic` line and one `pair` line per special fiber.
pub fn catalog_to_text(c: &ExpectedCatalog) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "generic rays={} labels={}", rays_text(c.generic_fiber.rays()), c.generic_fiber.labels().join(","));
    for p in &c.special_fibers {
        let _ = writeln!(
            s,
            "pair index={} shared={} dimension={} alternatives={} ambiguous={} plus={} plus-labels={} minus={} minus-labels={}",
            p.index,
            p.shared,
            p.lemma_dimension,
            p.alternatives,
            p.ambiguous,
            rays_text(p.plus.rays()),
            p.plus.labels().join(","),
            rays_text(p.minus.rays()),
            p.minus.labels().join(",")
        );
    }
    s
}

pub fn catalog_from_text(text: &str) -> Result<ExpectedCatalog, CatalogParseError> {
    let mut generic = None;
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |m: &str| CatalogParseError::Line(n + 1, m.to_string());
        let fields = parse_fields(line);
        let get = |k: &str| fields.iter().find(|(a, _)| a == k).map(|(_, v)| v.as_str()).ok_or_else(|| err(&format!("missing {k}")));
        let surface = |rays: &str, labels: &str| -> Result<ToricSurfaceModel, CatalogParseError> {
            let r = parse_rays(get(rays)?).ok_or_else(|| err("bad rays"))?;
            let l: Vec<&str> = get(labels)?.split(',').collect();
            if l.len() != r.len() {
                return Err(err("label count differs from ray count"));
            }
            ToricSurfaceModel::labeled(&r, &l).map_err(|e| err(&e.to_string()))
        };
        match line.split_whitespace().next() {
            Some("generic") => generic = Some(surface("rays", "labels")?),
            Some("pair") => {
                let num = |k: &str| get(k)?.parse::<usize>().map_err(|_| err(&format!("bad {k}")));
                pairs.push(SpecialPair {
                    index: num("index")?,
                    plus: surface("plus", "plus-labels")?,
                    minus: surface("minus", "minus-labels")?,
                    shared: get("shared")?.to_string(),
                    lemma_dimension: num("dimension")?,
                    alternatives: num("alternatives")?,
                    ambiguous: get("ambiguous")? == "true",
                });
            }
            _ => return Err(err("unknown record")),
        }
    }
    Ok(ExpectedCatalog { generic_fiber: generic.ok_or(CatalogParseError::MissingGeneric)?, special_fibers: pairs })
}
