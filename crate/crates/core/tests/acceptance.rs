//! One PASS/FAIL line per acceptance criterion, each timed against a 10 s budget.

use std::collections::BTreeSet;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;

use twistor_fibers::fiber::{FiberIndex, NormalType, Stage};
use twistor_fibers::lattice::{cyclically_equivalent, lv, LatticeVector, TorusDivisor};
use twistor_fibers::pipeline::{
    node_count, run_pipeline, run_pipeline_partial, verify_final_fibers, PipelineOptions, PipelineTrace,
};
use twistor_fibers::poly::{frac, Point, Q};
use twistor_fibers::projective::{
    assemble_model, lift_to_quadric, lift_to_quadric_shifted, mobius_normalize, restrict_to_lambda, ConformalInvariant,
    ProjectiveModel,
};
use twistor_fibers::report::{stage_catalog, trace_report, verification_report, Report};
use twistor_fibers::torus::{
    double_cover_fan, enumerate_actions, equivalent_actions, expected_catalog, half_fan_candidates, half_fan_check,
    type_one, type_two, CompletionSearch, ExpectedCatalog,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn inputs() -> (ProjectiveModel, ExpectedCatalog) {
    (assemble_model(&ConformalInvariant::sample()).unwrap(), expected_catalog(&type_one()).unwrap())
}

fn sample_trace() -> PipelineTrace {
    let (m, c) = inputs();
    run_pipeline(&m, &c, &PipelineOptions::default()).unwrap()
}

fn classification() -> Outcome {
    let counts: Vec<usize> = (1..=4).map(|n| enumerate_actions(n).unwrap().len()).collect();
    ensure(counts == [1, 1, 1, 3], || format!("class counts for n=1..4: {counts:?}"))?;
    let classes = enumerate_actions(4).unwrap();
    let find = |s| classes.iter().position(|c| equivalent_actions(&c.sequence(), s));
    let (one, two) = (find(&type_one()), find(&type_two()));
    ensure(one.is_some() && two.is_some() && one != two, || format!("type I in {one:?}, type II in {two:?}"))?;
    Ok(format!("counts {counts:?}"))
}

fn generic_geometry() -> Outcome {
    let s = double_cover_fan(&type_one()).unwrap();
    let a = s.self_intersections().unwrap();
    ensure(s.is_smooth(), || "not smooth".into())?;
    ensure(s.len() == 12, || format!("{} rays", s.len()))?;
    ensure(s.k_squared().unwrap() == 0, || "K^2 != 0".into())?;
    ensure(cyclically_equivalent(&a, &[-3, -2, -1].repeat(4)), || format!("self-intersections {a:?}"))?;
    Ok(format!("12 rays, K^2=0, cycle {a:?}"))
}

fn section_spaces() -> Outcome {
    let s = double_cover_fan(&type_one()).unwrap();
    let two_k = s.sections_of_divisor(&TorusDivisor::constant(12, 2)).unwrap();
    ensure(two_k.dimension() == 5, || format!("dim H0(-2K) = {}", two_k.dimension()))?;
    let w: BTreeSet<LatticeVector> = two_k.weights.iter().copied().collect();
    ensure(w.len() == 5 && w.contains(&lv(0, 0)), || format!("weights {w:?}"))?;
    let nonzero: Vec<LatticeVector> = w.iter().copied().filter(|v| *v != lv(0, 0)).collect();
    ensure(nonzero.iter().all(|v| w.contains(&-*v)), || format!("weights not symmetric: {w:?}"))?;
    let basis = nonzero.iter().any(|a| nonzero.iter().any(|b| a.det(*b).abs() == 1));
    ensure(basis, || format!("no lattice basis among {nonzero:?}"))?;
    let one_k = s.sections_of_divisor(&s.anticanonical()).unwrap();
    ensure(one_k.dimension() == 1, || format!("dim H0(-K) = {}", one_k.dimension()))?;
    let shown: Vec<String> = nonzero.iter().map(|v| v.to_string()).collect();
    Ok(format!("weights 0,{}", shown.join(",")))
}

fn linear_system() -> Outcome {
    let s = double_cover_fan(&type_one()).unwrap();
    let a = s.self_intersections().unwrap();
    let (fixed, movable) = s.fixed_movable_decomposition(&TorusDivisor::constant(12, 2)).unwrap();
    for i in 0..12 {
        let want = if a[i] == -2 || a[i] == -3 { 1 } else { 0 };
        ensure(fixed.coefficients[i] == want, || format!("fixed coefficient {} on ray {i} with square {}", fixed.coefficients[i], a[i]))?;
    }
    let on_fixed = fixed.coefficients.iter().filter(|c| **c == 1).count();
    ensure(on_fixed == 8, || format!("fixed part on {on_fixed} rays"))?;
    let dots = s.intersection_with_rays(&movable).unwrap();
    ensure(dots.iter().all(|d| *d >= 0), || format!("movable part not nef: {dots:?}"))?;
    let f2 = s.divisor_self_intersection(&movable).unwrap();
    ensure(f2 == 4, || format!("F^2 = {f2}"))?;
    Ok("fixed part on 8 rays, F nef, F^2=4".into())
}

fn half_fan_dimensions() -> Outcome {
    let s = double_cover_fan(&type_one()).unwrap();
    let mut dims = Vec::new();
    let mut report = Vec::new();
    for i in 1..=6 {
        let all = half_fan_candidates(&s, i, CompletionSearch::default()).unwrap();
        let passing: Vec<usize> = all.iter().filter(|c| half_fan_check(&c.plus, i).0).map(|c| half_fan_check(&c.plus, i).1).collect();
        ensure(!passing.is_empty(), || format!("no candidate passes for i={i}"))?;
        let ds: BTreeSet<usize> = passing.iter().copied().collect();
        ensure(ds.len() == 1, || format!("i={i}: surviving candidates disagree: {ds:?}"))?;
        dims.push(passing[0]);
        report.push(format!("i={i}:{} candidate(s)", passing.len()));
    }
    let ordered: Vec<usize> = [1, 4, 2, 3, 5, 6].iter().map(|&i| dims[i - 1]).collect();
    ensure(ordered == [2, 2, 1, 1, 1, 1], || format!("dimensions {ordered:?}"))?;
    let w: Vec<usize> = ordered.iter().map(|d| 5 - d).collect();
    ensure(w == [3, 3, 4, 4, 4, 4], || format!("dim W {w:?}"))?;
    Ok(format!("dim W {w:?}; {}", report.join(" ")))
}

fn random_invariants(count: usize) -> Vec<ConformalInvariant> {
    let q = (-20i64..20, 1i64..6).prop_map(|(n, d)| frac(n, d));
    let steps = proptest::collection::vec((1i64..8, 1i64..4), 5);
    let strat = (q, steps).prop_map(|(start, steps): (Q, Vec<(i64, i64)>)| {
        let mut v = vec![start];
        for (n, d) in steps {
            let next = v.last().unwrap() + frac(n, d);
            v.push(next);
        }
        ConformalInvariant::new(v).unwrap()
    });
    let mut runner = TestRunner::deterministic();
    (0..count).map(|_| strat.new_tree(&mut runner).unwrap().current()).collect()
}

fn model_algebra() -> Outcome {
    let mut all = random_invariants(25);
    all.push(ConformalInvariant::sample());
    for ci in &all {
        let m = assemble_model(ci).map_err(|e| format!("{ci}: {e}"))?;
        ensure(m.pencil.clauses.len() == 3 && m.pencil.clauses.iter().all(|(_, ok)| *ok), || format!("{ci}: clauses {:?}", m.pencil.clauses))?;
        let l = ci.lambdas();
        let want = vec![Point::Finite(l[0].clone()), Point::Finite(l[3].clone())];
        ensure(m.real_points.points == want && m.real_points.is_finite_set(), || format!("{ci}: real points {}", m.real_points))?;
        for f in [&m.f1, &m.f2] {
            ensure(restrict_to_lambda(&lift_to_quadric(f)).0 == *f, || format!("{ci}: lift/restrict of {f}"))?;
            ensure(restrict_to_lambda(&lift_to_quadric_shifted(f, &l[2])).0 == *f, || format!("{ci}: shifted lift of {f}"))?;
        }
    }
    Ok(format!("{} invariants", all.len()))
}

fn pipeline_ledger() -> Outcome {
    let t = sample_trace();
    let failed: Vec<String> = t.assertions.iter().filter(|a| !a.pass).map(|a| a.to_string()).collect();
    ensure(failed.is_empty(), || failed.join("; "))?;
    let x2 = t.snapshot(Stage::X2).unwrap();
    for i in 1..=6 {
        let f = x2.fiber(FiberIndex::Special(i));
        let (m2, m1) = (f.curves_of_type(NormalType::MinusTwoZero).len(), f.curves_of_type(NormalType::MinusOneMinusOne).len());
        let want = if i == 1 || i == 4 { (0, 8) } else { (2, 4) };
        ensure((m2, m1) == want, || format!("step 1 over lambda{i}: {m2} of type (-2,0), {m1} of type (-1,-1)"))?;
    }
    let flops = t.moves(Stage::X3).iter().filter(|m| matches!(m.op, twistor_fibers::fiber::MoveOp::Flop { .. })).count();
    ensure(flops == 8, || format!("{flops} flops"))?;
    let redundant: usize = t.snapshot(Stage::X4).unwrap().special_fibers.iter().map(|f| f.components.iter().filter(|c| c.redundant).count()).sum();
    ensure(redundant == 4, || format!("{redundant} redundant components"))?;
    let small = t.snapshot(Stage::X5).unwrap().special_fibers.iter().flat_map(|f| &f.nodes).filter(|n| matches!(n.status, twistor_fibers::fiber::NodeStatus::SmallResolved(_))).count();
    ensure(small == 2, || format!("{small} small resolutions"))?;
    let comps: Vec<usize> = t.snapshot(Stage::X6).unwrap().special_fibers.iter().map(|f| f.components.len()).collect();
    ensure(comps == [2; 6], || format!("components after step 5: {comps:?}"))?;
    let nodes = node_count(t.last());
    ensure(nodes == 12, || format!("{nodes} nodes"))?;
    Ok(format!("{} assertions, 8 flops, 4 redundant, 2 small resolutions, 12 nodes", t.assertions.len()))
}

fn final_verification() -> Outcome {
    let (m, c) = inputs();
    let r = verify_final_fibers(&sample_trace(), &c);
    ensure(r.pass && r.node_count == 12 && r.involution_ok && r.fibers.len() == 7, || format!("{r:?}"))?;
    let mut o = PipelineOptions::default();
    o.flops[0] = Some(2);
    let (t, err) = run_pipeline_partial(&m, &c, &o);
    let bad = verify_final_fibers(&t, &c);
    ensure(!bad.pass, || "perturbed flop rule verified".into())?;
    Ok(format!("pass on sample; perturbed rule stops at {}", err.map(|e| e.stage.to_string()).unwrap_or_else(|| "end".into())))
}

fn moduli_dimension() -> Outcome {
    let mut seen = BTreeSet::new();
    for ci in random_invariants(25).iter().chain([ConformalInvariant::sample()].iter()) {
        let Ok(n) = mobius_normalize(ci) else { continue };
        let l = n.lambdas();
        ensure(l[0] == frac(0, 1) && l[1] == frac(1, 1) && l[2] == frac(2, 1), || format!("{n} not normalized"))?;
        ensure(mobius_normalize(&n).as_ref() == Ok(&n), || format!("{n} not idempotent"))?;
        seen.insert(l[3..].to_vec());
    }
    // any (a, b, c) beyond 2 is already normal, so exactly three parameters remain free
    for (a, b, c) in [(3, 4, 5), (5, 7, 11), (9, 10, 40)] {
        let ci = ConformalInvariant::from_ints([0, 1, 2, a, b, c]).unwrap();
        ensure(mobius_normalize(&ci).as_ref() == Ok(&ci), || format!("{ci} moved"))?;
    }
    ensure(seen.len() > 3, || "too few distinct normal forms".into())?;
    Ok(format!("3 free parameters, {} distinct normal forms", seen.len()))
}

fn structured_run() -> String {
    let (_, c) = inputs();
    let t = sample_trace();
    let mut r = Report::default();
    r.extend(trace_report(&t));
    for (stage, fs) in &t.snapshots {
        r.extend(stage_catalog(*stage, fs));
    }
    r.extend(verification_report(&verify_final_fibers(&t, &c)));
    r.structured()
}

fn determinism() -> Outcome {
    let (a, b) = (structured_run(), structured_run());
    ensure(a == b, || "library output differs between runs".into())?;
    let bin = || {
        Command::new(env!("CARGO_BIN_EXE_twistor-fibers"))
            .args(["run", "--invariant", "0,1,2,3,4,5", "--format", "structured"])
            .output()
            .unwrap()
            .stdout
    };
    let (x, y) = (bin(), bin());
    ensure(x == y && !x.is_empty(), || "binary output differs between runs".into())?;
    Ok(format!("{} bytes identical", a.len() + x.len()))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("classification", classification),
        ("generic fiber geometry", generic_geometry),
        ("section spaces", section_spaces),
        ("linear system structure", linear_system),
        ("half fan dimensions", half_fan_dimensions),
        ("model algebra", model_algebra),
        ("pipeline ledger", pipeline_ledger),
        ("final fiber verification", final_verification),
        ("moduli dimension", moduli_dimension),
        ("determinism", determinism),
    ];
    let budget = Duration::from_secs(10);
    let mut failures = 0;
    // the stdout handle is not captured by the test harness, so the lines show up in plain `cargo test`
    let mut out = std::io::stdout().lock();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(_) if elapsed > budget => Err(format!("took {elapsed:?}")),
            o => o,
        };
        match outcome {
            Ok(detail) => writeln!(out, "criterion {:2} {name}: PASS ({:.2?}) {detail}", i + 1, elapsed).unwrap(),
            Err(why) => {
                failures += 1;
                writeln!(out, "criterion {:2} {name}: FAIL ({:.2?}) {why}", i + 1, elapsed).unwrap();
            }
        }
    }
    assert_eq!(failures, 0, "{failures} criteria failed");
}
