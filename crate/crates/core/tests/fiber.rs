use twistor_fibers::fiber::*;
use twistor_fibers::lattice::*;
use twistor_fibers::pipeline::*;
use twistor_fibers::projective::*;
use twistor_fibers::torus::*;

fn x1() -> FiberSpaceModel {
    let m = assemble_model(&ConformalInvariant::sample()).unwrap();
    build_x1(&m, &expected_catalog(&type_one()).unwrap()).unwrap()
}

fn a_cycle(s: &ToricSurfaceModel) -> Vec<i64> {
    s.self_intersections().unwrap()
}

#[test]
fn generic_fiber_has_four_a1_points() {
    let fs = x1();
    let g = &fs.generic_fiber;
    assert_eq!(g.components.len(), 1);
    let s = &g.components[0];
    assert_eq!(s.markers.len(), 4);
    assert_eq!(s.surface.len(), 8);
    // the marked rays are the (-2)-curves of the minimal resolution
    for m in &s.markers {
        assert_eq!(s.a(m), Some(-2));
    }
    assert!(cyclically_equivalent(&a_cycle(&s.surface), &[-1, -2].repeat(4)));
}

#[test]
fn generic_fiber_is_the_contracted_double_cover() {
    let s = double_cover_fan(&type_one()).unwrap();
    let contracted = contract_minus_one_curves(&s).unwrap();
    assert_eq!(contracted.len(), 8);
    assert!(fan_isomorphic(&contracted, &x1().generic_fiber.components[0].surface).is_some());
}

#[test]
fn special_fibers_by_kind() {
    let fs = x1();
    let counts: Vec<usize> = fs.special_fibers.iter().map(|f| f.components.len()).collect();
    assert_eq!(counts, vec![4, 2, 2, 4, 2, 2]);
    for f in &fs.special_fibers {
        let expected = match f.kind {
            FiberKind::FourPlanesWithNode => 4,
            FiberKind::TwoQuadricCones => 2,
            FiberKind::Irreducible4ODP => 1,
        };
        assert_eq!(f.components.len(), expected);
    }
    let l1 = fs.fiber(FiberIndex::Special(1));
    assert_eq!(l1.nodes.len(), 1);
    assert_eq!(l1.nodes[0].components.len(), 4);
    assert_eq!(l1.nodes[0].status, NodeStatus::Unresolved);
}

#[test]
fn quadric_cones_are_resolved_by_one_marker() {
    let fs = x1();
    for f in fs.special_fibers.iter().filter(|f| f.kind == FiberKind::TwoQuadricCones) {
        for c in &f.components {
            assert_eq!(c.surface.len(), 4);
            assert_eq!(c.markers.len(), 1);
            assert_eq!(c.a(&c.markers[0]), Some(-2));
            // Hirzebruch surface of degree 2
            let f2 = ToricSurfaceModel::new(&[lv(1, 0), lv(0, 1), lv(-1, 2), lv(0, -1)]).unwrap();
            assert!(fan_isomorphic(&c.surface, &f2).is_some());
        }
    }
}

#[test]
fn singular_locus_is_four_sections_and_two_nodes() {
    let fs = x1();
    assert_eq!(fs.marker_count() - 4 * 2, 4);
    let ls: Vec<&SectionTrack> = fs.sections.iter().filter(|s| s.name.starts_with('l')).collect();
    assert_eq!(ls.len(), 4);
    for s in &ls {
        assert_eq!(s.locations.len(), 7);
        assert!(matches!(s.locations[&FiberIndex::Generic], SectionLocation::SingularPointOf { .. }));
    }
    assert_eq!(node_count(&fs), 2);
}

#[test]
fn involution_on_fresh_model() {
    let fs = x1();
    assert!(check_involution(&fs));
    let g = &fs.generic_fiber.components[0];
    for (r, l) in g.surface.rays().iter().zip(g.surface.labels()) {
        assert_eq!(g.ray(&conjugate_label(l)), Some(-*r));
    }
}

#[test]
fn involution_fails_after_deleting_a_component() {
    let mut fs = x1();
    fs.special_fibers[1].components.remove(0);
    assert!(!check_involution(&fs));
    let mut fs = x1();
    fs.special_fibers[0].remove_component(Stage::X1, "P13").unwrap();
    assert!(!check_involution(&fs));
}

#[test]
fn conjugation_of_names() {
    assert_eq!(conjugate_label("B13"), "B24");
    assert_eq!(conjugate_label("E42"), "E31");
    assert_eq!(conjugate_label("P14"), "P23");
    assert_eq!(conjugate_label("L3"), "L3");
    assert_eq!(conjugate_label("S"), "S");
    assert_eq!(conjugate_section_name("m2"), "mbar2");
    assert_eq!(conjugate_section_name("lbar1"), "l1");
    for l in ["B14", "E3", "R2", "N41"] {
        assert_eq!(conjugate_label(&conjugate_label(l)), l);
    }
}

#[test]
fn dual_graphs() {
    let fs = x1();
    let g = dual_graph(&fs.generic_fiber);
    assert_eq!((g.nodes.len(), g.edges.len(), g.nodes[0].markers), (1, 0, 4));
    let cones = dual_graph(fs.fiber(FiberIndex::Special(2)));
    assert_eq!((cones.nodes.len(), cones.edges.len()), (2, 1));
    assert_eq!(cones.edges[0].label, "L2");
    let planes = dual_graph(fs.fiber(FiberIndex::Special(1)));
    assert_eq!(planes.nodes.len(), 4);
    assert_eq!(planes.edges.len(), 4);
    assert_eq!(planes.diamonds.len(), 1);
    assert_eq!(planes.diamonds[0].1.len(), 4);
    let dot = planes.to_dot(Stage::X1);
    assert!(dot.starts_with("graph"));
    assert_eq!(dot.matches("shape=diamond").count(), 1);
    assert_eq!(dot.matches("style=dashed").count(), 4);
}

#[test]
fn blow_up_and_down_by_label() {
    let mut f = x1().special_fibers[1].clone();
    f.blow_up_between(Stage::X2, "A1", "L2", "B13", "T").unwrap();
    assert_eq!(f.component("A1").unwrap().a("T"), Some(-1));
    assert!(matches!(f.blow_up_between(Stage::X2, "A1", "L2", "E1", "U"), Err(FiberError::NotAdjacent(..))));
    f.blow_down(Stage::X2, "A1", "T").unwrap();
    assert_eq!(f.components, x1().special_fibers[1].components);
    assert_eq!(f.moves.len(), 2);
}

#[test]
fn catalog_text_is_stable() {
    let fs = x1();
    let lines = fs.catalog_lines();
    assert_eq!(lines, x1().catalog_lines());
    assert!(lines[0].starts_with("fiber=generic"));
    assert!(lines.iter().any(|l| l.starts_with("fiber=lambda1") && l.contains("components=4 nodes=1")));
}

#[test]
fn label_choices() {
    let all = LabelChoice::all();
    assert_eq!(all.len(), 4);
    let d = LabelChoice::default();
    assert_eq!(d.m, ["M24", "M42", "M41", "M14"].map(String::from));
    assert_eq!(d.name_of("M13").as_deref(), Some("mbar1"));
    for c in &all {
        // m1, mbar1, m3, mbar3 form one rotational family
        let fam: std::collections::BTreeSet<String> =
            [c.corner_of(1), c.corner_of(3)].iter().flat_map(|m| [m.to_string(), conjugate_label(m)]).collect();
        let r1: std::collections::BTreeSet<String> = ROTATION_ONE.iter().map(|s| s.to_string()).collect();
        let r2: std::collections::BTreeSet<String> = ROTATION_TWO.iter().map(|s| s.to_string()).collect();
        assert!(fam == r1 || fam == r2);
    }
}

#[test]
fn sections_stay_on_their_edge() {
    let m = assemble_model(&ConformalInvariant::sample()).unwrap();
    let c = expected_catalog(&type_one()).unwrap();
    let t = run_pipeline(&m, &c, &PipelineOptions::default()).unwrap();
    let x2 = t.snapshot(Stage::X2).unwrap();
    for s in x2.sections.iter().filter(|s| s.name.starts_with('m')) {
        let d: Vec<char> = s.key[1..].chars().collect();
        let edge = format!("B{}{}", d[0].min(d[1]), d[0].max(d[1]));
        assert_eq!(s.locations.len(), 7, "{}", s.name);
        for loc in s.locations.values() {
            let SectionLocation::CornerOf { curves, .. } = loc else { panic!("{loc}") };
            assert!(curves.contains(&edge), "{} at {loc}", s.name);
        }
    }
}

#[test]
fn invariants_hold_at_every_stage() {
    let m = assemble_model(&ConformalInvariant::sample()).unwrap();
    let c = expected_catalog(&type_one()).unwrap();
    let t = run_pipeline(&m, &c, &PipelineOptions::default()).unwrap();
    for (_, fs) in &t.snapshots {
        assert!(check_involution(fs));
        for f in fs.fibers() {
            f.check_invariants().unwrap();
        }
    }
}
