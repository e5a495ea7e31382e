use proptest::prelude::*;
use twistor_fibers::lattice::*;

fn plane() -> ToricSurfaceModel {
    ToricSurfaceModel::new(&[lv(1, 0), lv(0, 1), lv(-1, -1)]).unwrap()
}

fn hexagon() -> ToricSurfaceModel {
    ToricSurfaceModel::new(&[lv(1, 0), lv(1, 1), lv(0, 1), lv(-1, 0), lv(-1, -1), lv(0, -1)]).unwrap()
}

// written out by hand from the self-intersection recurrence
fn s_fan() -> ToricSurfaceModel {
    let half = [lv(0, 1), lv(-1, 2), lv(-2, 3), lv(-1, 1), lv(-1, 0), lv(-1, -1)];
    let rays: Vec<_> = half.iter().copied().chain(half.iter().map(|&v| -v)).collect();
    ToricSurfaceModel::new(&rays).unwrap()
}

fn brute_force_points(rays: &[LatticeVector], b: &[i64], r: i64) -> Vec<LatticeVector> {
    let mut out = Vec::new();
    for x in -r..=r {
        for y in -r..=r {
            let u = lv(x, y);
            if rays.iter().zip(b).all(|(&v, &bi)| u.dot(v) >= -bi) {
                out.push(u);
            }
        }
    }
    out
}

#[test]
fn projective_plane_is_valid() {
    let p = plane();
    assert_eq!(p.len(), 3);
    assert!(p.smooth_cones().iter().all(|&s| s));
    assert_eq!(p.self_intersections().unwrap(), vec![1, 1, 1]);
    assert_eq!(p.k_squared().unwrap(), 9);
}

#[test]
fn validation_errors() {
    assert_eq!(
        validate_fan(&[lv(1, 0), lv(0, 2), lv(-1, -1)]),
        Err(LatticeError::NonPrimitiveRay(lv(0, 2)))
    );
    assert_eq!(validate_fan(&[lv(1, 0), lv(0, 1)]), Err(LatticeError::NotComplete));
    assert_eq!(
        validate_fan(&[lv(1, 0), lv(0, 1), lv(1, 0), lv(-1, -1)]),
        Err(LatticeError::DuplicateRay(lv(1, 0)))
    );
    assert!(matches!(
        validate_fan(&[lv(1, 0), lv(-1, -1), lv(0, 1)]),
        Err(LatticeError::NotCounterclockwise(_, _))
    ));
    assert_eq!(validate_fan(&[]), Err(LatticeError::Empty));
}

#[test]
fn validation_detects_double_winding() {
    let rays = [lv(1, 0), lv(-1, 1), lv(-1, -2), lv(1, 1), lv(-1, 0), lv(1, -1)];
    assert_eq!(validate_fan(&rays), Err(LatticeError::NotComplete));
}

#[test]
fn canonical_rotation_starts_at_smallest_ray() {
    let f = validate_fan(&[lv(1, 0), lv(0, 1), lv(-1, -1)]).unwrap();
    assert_eq!(f.rays()[0], lv(-1, -1));
    let s = ToricSurfaceModel::labeled(&[lv(1, 0), lv(0, 1), lv(-1, -1)], &["a", "b", "c"]).unwrap();
    assert_eq!(s.labels(), &["c", "a", "b"]);
}

#[test]
fn hexagon_self_intersections() {
    let h = hexagon();
    assert_eq!(h.self_intersections().unwrap(), vec![-1; 6]);
    assert_eq!(h.k_squared().unwrap(), 6);
}

#[test]
fn s_fan_invariants() {
    let s = s_fan();
    let a = s.self_intersections().unwrap();
    let target = [-3, -2, -1, -3, -2, -1, -3, -2, -1, -3, -2, -1];
    assert!(cyclically_equivalent(&a, &target));
    assert_eq!(s.k_squared().unwrap(), 0);
}

#[test]
fn blow_up_plane_gives_first_hirzebruch_surface() {
    let b = plane().blow_up_corner(0).unwrap();
    let a = b.self_intersections().unwrap();
    assert!(cyclically_equivalent(&a, &[0, 1, 0, -1]));
    assert_eq!(b.k_squared().unwrap(), 8);
}

#[test]
fn blow_up_four_corners_of_s() {
    let mut s = s_fan();
    for c in [0, 3, 6, 9] {
        let i = s.index_of_label(&format!("D{}", c + 1)).unwrap();
        s = s.blow_up_corner(i).unwrap();
    }
    assert_eq!(s.len(), 16);
    assert_eq!(s.k_squared().unwrap(), -4);
}

#[test]
fn blow_down_s_curve_with_square_minus_one() {
    let s = s_fan();
    // (-2,3) has a = -1
    let i = s.fan().position(lv(-2, 3)).unwrap();
    assert_eq!(s.self_intersection(i).unwrap(), -1);
    let t = s.blow_down(i).unwrap();
    assert_eq!(t.len(), 11);
    assert!(t.is_smooth());
    let j = s.fan().position(lv(-1, 2)).unwrap();
    assert_eq!(s.blow_down(j), Err(LatticeError::NotMinusOneCurve(j, -2)));
}

#[test]
fn singular_cone_errors() {
    let s = ToricSurfaceModel::new(&[lv(1, 0), lv(-1, 2), lv(-1, -1)]).unwrap();
    assert!(matches!(s.self_intersections(), Err(LatticeError::SingularCone(_, 2))));
    assert!(matches!(s.k_squared(), Err(LatticeError::SingularCone(_, _))));
}

#[test]
fn resolve_a1_cone() {
    assert_eq!(hirzebruch_jung_rays(lv(1, 0), lv(-1, 2)), vec![lv(0, 1)]);
    let s = ToricSurfaceModel::new(&[lv(1, 0), lv(-1, 2), lv(0, -1)]).unwrap();
    let r = s.resolve_singular_cones();
    assert!(r.is_smooth());
    let i = r.fan().position(lv(0, 1)).unwrap();
    assert_eq!(r.self_intersection(i).unwrap(), -2);
    assert_eq!(r.len(), 4);
}

#[test]
fn resolve_is_identity_on_smooth() {
    assert_eq!(s_fan().resolve_singular_cones(), s_fan());
}

#[test]
fn hirzebruch_jung_matches_continued_fraction() {
    // cone (1,0),(-q,n): the self-intersections of the inserted rays are
    // minus the entries of the continued fraction of n/q
    for n in 2..12i64 {
        for q in 1..n {
            if num_integer::gcd(n, q) != 1 {
                continue;
            }
            let rays = hirzebruch_jung_rays(lv(1, 0), lv(-q, n));
            let mut all = vec![lv(1, 0)];
            all.extend(&rays);
            all.push(lv(-q, n));
            let a: Vec<i64> = (1..all.len() - 1).map(|i| -all[i - 1].det(all[i + 1])).collect();
            let mut cf = Vec::new();
            let (mut num, mut den) = (n, q);
            while den != 0 {
                let c = (num + den - 1) / den;
                cf.push(c);
                let r = c * den - num;
                num = den;
                den = r;
            }
            let expected: Vec<i64> = cf.iter().map(|c| -c).collect();
            assert_eq!(a, expected, "n={n} q={q}");
            assert!(all.windows(2).all(|w| w[0].det(w[1]) == 1));
        }
    }
}

#[test]
fn fan_from_cycle_examples() {
    let p = fan_from_cycle(&[1, 1, 1]).unwrap();
    assert!(fan_isomorphic(&ToricSurfaceModel::from_fan(p), &plane()).is_some());
    let cyc: Vec<i64> = [-3, -2, -1].repeat(4);
    let f = fan_from_cycle(&cyc).unwrap();
    assert!(fan_isomorphic(&ToricSurfaceModel::from_fan(f), &s_fan()).is_some());
    assert_eq!(
        fan_from_cycle(&[0, 0, 0]),
        Err(LatticeError::EulerMismatch { sum: 0, expected: 3 })
    );
    // Euler sum is right but the rays never close up
    assert_eq!(fan_from_cycle(&[1, -1, 0, 0]), Err(LatticeError::ClosureFailure));
}

#[test]
fn sections_of_anticanonical_multiples_on_s() {
    let s = s_fan();
    let two_k = TorusDivisor::constant(12, 2);
    let sec = s.sections_of_divisor(&two_k).unwrap();
    assert_eq!(sec.dimension(), 5);
    let mut w = sec.weights.clone();
    w.sort();
    let mut expected = vec![lv(0, 0), lv(1, 0), lv(-1, 0), lv(1, 1), lv(-1, -1)];
    expected.sort();
    assert_eq!(w, expected);
    assert_eq!(lv(1, 0).det(lv(1, 1)).abs(), 1);
    let one_k = s.sections_of_divisor(&s.anticanonical()).unwrap();
    assert_eq!(one_k.weights, vec![lv(0, 0)]);
    let p = plane().sections_of_divisor(&TorusDivisor::constant(3, 0)).unwrap();
    assert_eq!(p.weights, vec![lv(0, 0)]);
}

#[test]
fn sections_agree_with_brute_force() {
    let s = s_fan();
    for c in 0..4 {
        let b = vec![c; 12];
        let mut got = s.sections_of_divisor(&TorusDivisor::new(b.clone())).unwrap().weights;
        let mut want = brute_force_points(s.rays(), &b, 30);
        got.sort();
        want.sort();
        assert_eq!(got, want);
    }
}

#[test]
fn fixed_part_of_minus_two_k_on_s() {
    let s = s_fan();
    let a = s.self_intersections().unwrap();
    let (fixed, movable) = s.fixed_movable_decomposition(&TorusDivisor::constant(12, 2)).unwrap();
    for i in 0..12 {
        let want = if a[i] == -1 { 0 } else { 1 };
        assert_eq!(fixed.coefficients[i], want);
    }
    assert_eq!(s.divisor_self_intersection(&movable).unwrap(), 4);
    let dots = s.intersection_with_rays(&movable).unwrap();
    for i in 0..12 {
        assert_eq!(dots[i], if a[i] == -2 { 1 } else { 0 });
    }
    let sum: i64 = dots.iter().zip(&movable.coefficients).map(|(x, b)| x * b).sum();
    assert_eq!(sum, 4);
    assert_eq!(s.divisor_self_intersection(&TorusDivisor::constant(12, 2)).unwrap(), 0);
}

#[test]
fn plane_anticanonical_is_free() {
    let p = plane();
    let (fixed, _) = p.fixed_movable_decomposition(&p.anticanonical()).unwrap();
    assert!(fixed.is_zero());
    assert_eq!(p.divisor_self_intersection(&p.anticanonical()).unwrap(), 9);
}

#[test]
fn empty_system() {
    let p = plane();
    let d = TorusDivisor::new(vec![-1, 0, 0]);
    assert_eq!(p.fixed_movable_decomposition(&d), Err(LatticeError::EmptySystem));
}

#[test]
fn isomorphism_examples() {
    let s = s_fan();
    let iso = fan_isomorphic(&s, &s).unwrap();
    assert_eq!(iso.matrix, Mat2::IDENTITY);
    let four = ToricSurfaceModel::new(&[lv(1, 0), lv(0, 1), lv(-1, 0), lv(0, -1)]).unwrap();
    assert!(fan_isomorphic(&plane(), &four).is_none());
    // a reflected copy
    let r: Vec<_> = s.rays().iter().map(|v| lv(v.y, v.x)).rev().collect();
    let t = ToricSurfaceModel::new(&r).unwrap();
    let iso = fan_isomorphic(&s, &t).unwrap();
    assert_eq!(iso.matrix.det().abs(), 1);
    for i in 0..12 {
        assert_eq!(iso.matrix.apply(s.rays()[i]), t.rays()[iso.target_index(i, 12)]);
    }
}

fn arb_unimodular() -> impl Strategy<Value = Mat2> {
    prop::collection::vec(0..4usize, 0..6).prop_map(|steps| {
        let gens = [
            Mat2([[1, 1], [0, 1]]),
            Mat2([[1, 0], [1, 1]]),
            Mat2([[0, -1], [1, 0]]),
            Mat2([[0, 1], [1, 0]]),
        ];
        steps.iter().fold(Mat2::IDENTITY, |m, &g| m.compose(&gens[g]))
    })
}

/// Random smooth fan: a sequence of corner blow-ups of the hexagon or the plane.
fn arb_smooth_fan() -> impl Strategy<Value = ToricSurfaceModel> {
    (any::<bool>(), prop::collection::vec(0..64usize, 0..8)).prop_map(|(hex, corners)| {
        let mut s = if hex { hexagon() } else { plane() };
        for c in corners {
            s = s.blow_up_corner(c % s.len()).unwrap();
        }
        s
    })
}

proptest! {
    #[test]
    fn euler_sum_holds(s in arb_smooth_fan()) {
        let a = s.self_intersections().unwrap();
        let k = s.len() as i64;
        prop_assert_eq!(a.iter().sum::<i64>(), 12 - 3 * k);
        prop_assert_eq!(s.k_squared().unwrap(), 12 - k);
    }

    #[test]
    fn blow_up_then_down_is_identity(s in arb_smooth_fan(), c in 0..64usize) {
        let i = c % s.len();
        let label = "new";
        let b = s.blow_up_corner_labeled(i, label).unwrap();
        let j = b.index_of_label(label).unwrap();
        prop_assert_eq!(b.self_intersection(j).unwrap(), -1);
        prop_assert_eq!(b.k_squared().unwrap(), s.k_squared().unwrap() - 1);
        prop_assert_eq!(b.blow_down(j).unwrap(), s);
    }

    #[test]
    fn fan_from_cycle_round_trip(s in arb_smooth_fan()) {
        let a = s.self_intersections().unwrap();
        let f = fan_from_cycle(&a).unwrap();
        prop_assert!(fan_isomorphic(&ToricSurfaceModel::from_fan(f), &s).is_some());
    }

    #[test]
    fn sections_transform_under_automorphisms(s in arb_smooth_fan(), m in arb_unimodular(), b in prop::collection::vec(0..3i64, 16)) {
        let k = s.len();
        let b: Vec<i64> = (0..k).map(|i| b[i % b.len()]).collect();
        let d = TorusDivisor::new(b.clone());
        let image: Vec<_> = s.rays().iter().map(|&v| m.apply(v)).collect();
        let moved = if m.det() == 1 { image.clone() } else { image.iter().rev().copied().collect() };
        let coeffs: Vec<i64> = if m.det() == 1 { b.clone() } else { b.iter().rev().copied().collect() };
        let labels: Vec<String> = (0..k).map(|i| i.to_string()).collect();
        let t = ToricSurfaceModel::labeled(&moved, &labels).unwrap();
        let rotated: Vec<i64> = t.labels().iter().map(|l| coeffs[l.parse::<usize>().unwrap()]).collect();
        let d2 = TorusDivisor::new(rotated);
        let w1 = s.sections_of_divisor(&d).unwrap().weights;
        let w2 = t.sections_of_divisor(&d2).unwrap().weights;
        prop_assert_eq!(w1.len(), w2.len());
        // characters transform by the inverse transpose
        let dual = m.inverse_unimodular().unwrap().transpose();
        let mut mapped: Vec<_> = w1.iter().map(|&u| dual.apply(u)).collect();
        let mut w2 = w2;
        mapped.sort();
        w2.sort();
        prop_assert_eq!(mapped, w2);
    }

    #[test]
    fn sections_match_brute_force(s in arb_smooth_fan(), b in prop::collection::vec(-1..3i64, 16)) {
        let k = s.len();
        let b: Vec<i64> = (0..k).map(|i| b[i % b.len()]).collect();
        let mut got = s.sections_of_divisor(&TorusDivisor::new(b.clone())).unwrap().weights;
        let mut want = brute_force_points(s.rays(), &b, 40);
        got.sort();
        want.sort();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn movable_part_is_nef(s in arb_smooth_fan(), b in prop::collection::vec(0..3i64, 16)) {
        let k = s.len();
        let d = TorusDivisor::new((0..k).map(|i| b[i % b.len()]).collect());
        let (_, movable) = s.fixed_movable_decomposition(&d).unwrap();
        prop_assert!(s.intersection_with_rays(&movable).unwrap().iter().all(|&x| x >= 0));
        prop_assert_eq!(
            s.sections_of_divisor(&movable).unwrap().dimension(),
            s.sections_of_divisor(&d).unwrap().dimension()
        );
    }

    #[test]
    fn resolution_is_idempotent(m in arb_unimodular(), n in 2..9i64, q in 1..9i64) {
        prop_assume!(q < n && num_integer::gcd(n, q) == 1);
        let rays: Vec<_> = [lv(1, 0), lv(-q, n), lv(q - 1, -n)].iter().map(|&v| m.apply(v)).collect();
        let ordered = if m.det() == 1 { rays } else { rays.into_iter().rev().collect() };
        if let Ok(s) = ToricSurfaceModel::new(&ordered) {
            let r = s.resolve_singular_cones();
            prop_assert!(r.is_smooth());
            prop_assert_eq!(r.resolve_singular_cones(), r);
        }
    }
}
