use super::*;
use crate::shift;
use proptest::prelude::*;

fn bern(p: f64) -> MarkovMeasure {
    MarkovMeasure::bernoulli2(p).unwrap()
}

fn point_mass(space: &SftSpace) -> MarkovMeasure {
    MarkovMeasure::periodic(space, &Word::from("0")).unwrap()
}

/// Anchor "01", bodies of lengths 4/20/80 repeated once, tours of depth 2..4.
fn degenerate() -> GluingSchedule {
    let full = SftSpace::full(2);
    let mu = bern(0.5);
    let mut blocks = vec![Block::Anchor {
        word: Word::from("01"),
    }];
    for (k, n) in [4usize, 20, 80].into_iter().enumerate() {
        blocks.push(Block::Measure {
            measure: mu.clone(),
            len: n,
            reps: 1,
        });
        blocks.push(Block::Tour {
            depth: k + 2,
            word: tour::tour(&full, k + 2).unwrap(),
        });
    }
    GluingSchedule::new(
        full,
        blocks,
        ScheduleParams {
            zeta: vec![0.5, 0.25, 0.125],
            epsilon: vec![0.5, 0.25, 0.125],
            depth: 2,
            delta: None,
        },
    )
    .unwrap()
}

#[test]
fn default_schedule_validates() {
    let full = SftSpace::full(2);
    let s = build_gk_schedule(&full, &MeasurePath::single(bern(0.5)), None, 3).unwrap();
    let report = validate_schedule(&s);
    assert!(report.pass, "{report:?}");
    for name in ["n", "nk", "AD"] {
        assert!(report.family(name).count() > 0, "{name}");
    }
}

#[test]
fn family_schedule_sizes() {
    let full = SftSpace::full(2);
    let s = build_family_schedule(
        &full,
        &MeasurePath::single(bern(0.9)),
        Some(&Word::from("01")),
        20,
        0.05,
        3,
        &ScheduleOptions::default(),
    )
    .unwrap();
    assert_eq!(s.stage_ends(), vec![22, 107, 717, 5752]);
    let lens: Vec<usize> = s.stages().iter().map(|st| st.len).collect();
    assert_eq!(lens, vec![10, 40, 152]);
    let report = validate_schedule(&s);
    assert!(report.pass);
    assert_eq!(report.family("gn").count(), 1);
}

#[test]
fn degenerate_schedule_fails_ad() {
    let s = degenerate();
    assert_eq!(s.stage_ends(), vec![2, 11, 41, 140]);
    let report = validate_schedule(&s);
    assert!(!report.pass);
    let ad: Vec<&Check> = report.family("AD").collect();
    assert!(!ad[1].pass);
    assert_eq!(ad[1].lhs, 11.0);
    assert_eq!(ad[1].rhs, 10.25);
    assert!(ad[1].slack() < 0.0);
}

#[test]
fn empty_schedule_is_vacuous() {
    let s = GluingSchedule::new(
        SftSpace::full(2),
        vec![],
        ScheduleParams {
            zeta: vec![],
            epsilon: vec![],
            depth: 2,
            delta: None,
        },
    )
    .unwrap();
    let report = validate_schedule(&s);
    assert!(report.pass && report.checks.is_empty());
}

#[test]
fn point_mass_block() {
    let full = SftSpace::full(2);
    let s = GluingSchedule::new(
        full.clone(),
        vec![Block::Measure {
            measure: point_mass(&full),
            len: 5,
            reps: 2,
        }],
        ScheduleParams {
            zeta: vec![0.5],
            epsilon: vec![0.5],
            depth: 2,
            delta: None,
        },
    )
    .unwrap();
    let x = emit_point(&s, 3).unwrap().materialize(30).unwrap();
    assert_eq!(x, Word(vec![0; 30]));
}

#[test]
fn single_block_bound() {
    let full = SftSpace::full(2);
    let s = GluingSchedule::new(
        full,
        vec![Block::Measure {
            measure: bern(0.5),
            len: 40,
            reps: 1,
        }],
        ScheduleParams {
            zeta: vec![0.25],
            epsilon: vec![0.5],
            depth: 2,
            delta: None,
        },
    )
    .unwrap();
    assert_eq!(tracking_bound(&s, 40).unwrap(), 0.75);
}

#[test]
fn anchored_stream() {
    let full = SftSpace::full(2);
    let s = build_gk_schedule(&full, &MeasurePath::single(bern(0.3)), Some(&Word::from("01")), 2).unwrap();
    let x = emit_point(&s, 1).unwrap().materialize(500).unwrap();
    assert_eq!(x.prefix(2), Word::from("01"));
    assert!(full.is_admissible(&x.0));
}

#[test]
fn tours_are_in_place() {
    let full = SftSpace::full(2);
    let s = build_gk_schedule(&full, &MeasurePath::single(bern(0.5)), None, 3).unwrap();
    let ends = s.stage_ends();
    let x = emit_point(&s, 5).unwrap().materialize(ends[3]).unwrap();
    for k in 1..=3 {
        let t = tour::tour(&full, k + 1).unwrap();
        assert!(tour::covers(&full, &t, k));
        assert_eq!(&x.0[ends[k] - t.len()..ends[k]], &t.0[..]);
    }
}

#[test]
fn golden_mean_stream_is_admissible() {
    let gm = SftSpace::golden_mean();
    let mu = MarkovMeasure::parry(&gm).unwrap();
    let s = build_gk_schedule(&gm, &MeasurePath::single(mu), Some(&Word::from("010")), 3).unwrap();
    assert!(validate_schedule(&s).pass);
    let ends = s.stage_ends();
    let x = emit_point(&s, 9).unwrap().materialize(ends[3] + 500).unwrap();
    assert!(gm.is_admissible(&x.0));
    let segs = segments(&s, ends[3]);
    assert!(segs.iter().any(|g| g.kind == SegmentKind::Connector && g.len == 1));
    for n in s.checkpoints() {
        assert!(observed_tracking(&s, &x, n).unwrap() <= tracking_bound(&s, n).unwrap());
    }
}

#[test]
fn bound_dominates_and_decreases() {
    let full = SftSpace::full(2);
    for (k, seed) in [(bern(0.5), 1u64), (bern(0.9), 2), (bern(0.2), 3)] {
        let s = build_gk_schedule(&full, &MeasurePath::single(k), Some(&Word::from("0110")), 4).unwrap();
        let ends = s.checkpoints();
        let x = emit_point(&s, seed).unwrap().materialize(ends[3] + 1).unwrap();
        let mut prev = f64::INFINITY;
        for n in ends {
            let b = tracking_bound(&s, n).unwrap();
            assert!(observed_tracking(&s, &x, n).unwrap() <= b);
            assert!(b <= prev + 1e-12, "{b} > {prev}");
            prev = b;
        }
    }
}

#[test]
fn path_targets_follow_refinement() {
    let full = SftSpace::full(2);
    let path = MeasurePath::new(vec![bern(0.2), bern(0.8)]).unwrap();
    let alphas = alpha_sequence(&path, 8).unwrap();
    let expect = [0.2, 0.8, 0.2, 0.2, 0.5, 0.8, 0.5, 0.2];
    for (a, p) in alphas.iter().zip(expect) {
        assert!((a.stochastic()[0][1] - p).abs() < 1e-12);
    }
    let s = build_gk_schedule(&full, &path, None, 4).unwrap();
    let x = emit_point(&s, 4).unwrap().materialize(s.checkpoints()[3] + 1).unwrap();
    for n in s.checkpoints() {
        assert!(observed_tracking(&s, &x, n).unwrap() <= tracking_bound(&s, n).unwrap());
    }
}

#[test]
fn emission_is_deterministic_and_resumable() {
    let full = SftSpace::full(2);
    let s = build_gk_schedule(&full, &MeasurePath::single(bern(0.4)), None, 2).unwrap();
    let mut a = emit_point(&s, 7).unwrap();
    let short = a.materialize(100).unwrap();
    let long = a.materialize(3000).unwrap();
    assert_eq!(long.prefix(100), short);
    assert_eq!(emit_point(&s, 7).unwrap().materialize(3000).unwrap(), long);
    assert_ne!(emit_point(&s, 8).unwrap().materialize(3000).unwrap(), long);
}

#[test]
fn schedule_json_roundtrip() {
    let full = SftSpace::full(2);
    let s = build_gk_schedule(&full, &MeasurePath::single(bern(0.4)), Some(&Word::from("1")), 2).unwrap();
    let js = serde_json::to_string(&s).unwrap();
    let back: GluingSchedule = serde_json::from_str(&js).unwrap();
    assert_eq!(back, s);
}

fn family_schedule(space: &SftSpace, anchor: &str, len: usize, stages: usize) -> GluingSchedule {
    build_family_schedule(
        space,
        &MeasurePath::single(bern(0.9)),
        Some(&Word::from(anchor)),
        len,
        0.05,
        stages,
        &ScheduleOptions::default(),
    )
    .unwrap()
}

#[test]
fn separated_family_counts() {
    let full = SftSpace::full(2);
    let s = family_schedule(&full, "01", 8, 2);
    let family = full.admissible_words(8);
    let horizon = s.checkpoints()[1] + 1;
    let fam = emit_separated_family(&s, &family, horizon, 3).unwrap();
    assert_eq!(fam.len(), 256);
    assert_eq!(fam.head_len(), 10);
    let members = fam.members();
    assert!(members.iter().all(|x| x.len() == horizon && full.is_admissible(&x.0)));
    assert!(members.iter().all(|x| x.prefix(2) == Word::from("01")));
    assert_eq!(shift::separated_count(&members, 10, 1).unwrap(), 256);
    // each member is the point of the schedule with its word filled in
    let one = s.with_family_word(&family[17]).unwrap();
    assert_eq!(emit_point(&one, 3).unwrap().materialize(horizon).unwrap(), members[17]);
}

#[test]
fn family_tracking_matches_direct() {
    let full = SftSpace::full(2);
    let s = family_schedule(&full, "0", 6, 3);
    let family = full.admissible_words(6);
    let cps = s.checkpoints();
    let fam = emit_separated_family(&s, &family, cps[2] + 1, 5).unwrap();
    for n in cps {
        let alpha = stretched_alpha(&s, n).unwrap();
        let fast = fam.tracking(2, n, 2, &alpha).unwrap();
        let bound = tracking_bound(&s, n).unwrap();
        for (i, d) in fast.iter().enumerate() {
            let direct = observed_tracking(&s, &fam.member(i), n).unwrap();
            assert!((d - direct).abs() < 1e-12);
            assert!(*d <= bound);
        }
    }
}

#[test]
fn golden_mean_family() {
    let gm = SftSpace::golden_mean();
    let s = build_family_schedule(
        &gm,
        &MeasurePath::single(MarkovMeasure::parry(&gm).unwrap()),
        Some(&Word::from("01")),
        6,
        0.05,
        2,
        &ScheduleOptions::default(),
    )
    .unwrap();
    let family = gm.admissible_words(6);
    let fam = emit_separated_family(&s, &family, s.checkpoints()[1] + 1, 2).unwrap();
    for (i, w) in family.iter().enumerate() {
        let x = fam.member(i);
        assert!(gm.is_admissible(&x.0));
        let one = s.with_family_word(w).unwrap();
        assert_eq!(emit_point(&one, 2).unwrap().materialize(x.len()).unwrap(), x);
    }
}

#[test]
fn family_errors() {
    let full = SftSpace::full(2);
    let s = family_schedule(&full, "01", 4, 1);
    let dup = vec![Word::from("0101"), Word::from("1100"), Word::from("0101")];
    assert_eq!(emit_separated_family(&s, &dup, 100, 0).unwrap_err(), Error::FamilyNotSeparated(0, 2));
    assert!(matches!(emit_point(&s, 0).unwrap_err(), Error::UnfilledFamily));
    let single = emit_separated_family(&s, &[Word::from("1111")], 50, 0).unwrap();
    assert_eq!(single.len(), 1);
    assert_eq!(single.member(0).len(), 50);
}

#[test]
fn family_growth_from_typical_words() {
    let full = SftSpace::full(2);
    let half = bern(0.5);
    let (eta, delta) = (0.1, 0.05);
    let mut counts = Vec::new();
    for n in [8usize, 10, 12] {
        let family = crate::measures::typical_separated_family(&half, n, delta, eta, n as u64).unwrap();
        let s = family_schedule(&full, "01", n, 1);
        let fam = emit_separated_family(&s, &family, s.checkpoints()[0] + 1, 1).unwrap();
        let window = 2 + n;
        let r = shift::separated_count(&fam.members(), window, 1).unwrap();
        assert_eq!(r, family.len());
        assert!((r as f64).ln() / window as f64 >= 2f64.ln() - 2.0 * eta - 0.2);
        counts.push((window, r));
    }
    let g = crate::analysis::growth_rate(&counts).unwrap();
    assert!(g.slope > 0.4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_schedules_validate(p in 0.05f64..0.95, stages in 1usize..4, anchor in "[01]{0,6}", fam in 0usize..10) {
        let full = SftSpace::full(2);
        let a = Word::from(anchor.as_str());
        let anchor = (!a.is_empty()).then_some(&a);
        let family = (fam > 0).then_some(fam);
        let s = build_schedule(&full, &MeasurePath::single(bern(p)), anchor, family, stages, &ScheduleOptions::default()).unwrap();
        prop_assert!(validate_schedule(&s).pass);
    }

    #[test]
    fn streams_track(p in 0.1f64..0.9, seed in 0u64..1000) {
        let gm = SftSpace::golden_mean();
        let q = p * 0.5;
        let mu = MarkovMeasure::from_stochastic(&gm, vec![vec![1.0 - q, q], vec![1.0, 0.0]]).unwrap();
        let s = build_gk_schedule(&gm, &MeasurePath::single(mu), None, 3).unwrap();
        let cps = s.checkpoints();
        let x = emit_point(&s, seed).unwrap().materialize(cps[2] + 1).unwrap();
        prop_assert!(gm.is_admissible(&x.0));
        for n in cps {
            prop_assert!(observed_tracking(&s, &x, n).unwrap() <= tracking_bound(&s, n).unwrap());
        }
    }
}
