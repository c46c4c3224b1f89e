use std::collections::BTreeMap;

use isafe::fuzzy::FuzzyEngine;
use isafe::track::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FPS: f64 = 5.0;

/// Piecewise-constant-velocity path sampled at `FPS`: `(duration s, vx px/s, vy px/s)` legs.
fn path(start: (f64, f64), legs: &[(f64, f64, f64)]) -> Vec<(f64, f64, f64)> {
    let mut out = vec![(0.0, start.0, start.1)];
    let (mut x, mut y) = start;
    let mut frame = 0u64;
    for &(dur, vx, vy) in legs {
        let steps = (dur * FPS).round() as u64;
        for _ in 0..steps {
            frame += 1;
            x += vx / FPS;
            y += vy / FPS;
            out.push((frame as f64 / FPS, x, y));
        }
    }
    out
}

fn loiter_path() -> Vec<(f64, f64, f64)> {
    // back and forth four times with two stops
    path(
        (200.0, 240.0),
        &[
            (6.0, 30.0, 0.0),
            (3.0, 0.0, 0.0),
            (6.0, -30.0, 0.0),
            (5.0, 25.0, 10.0),
            (4.0, -25.0, -10.0),
            (3.0, 0.0, 0.0),
            (6.0, 30.0, 0.0),
            (5.0, -30.0, 0.0),
        ],
    )
}

/// Applies the change definitions directly to the sample arrays: net displacement over the
/// last `window` samples, sub-floor speed as standing, one check per refractory period.
fn oracle_counts(samples: &[(f64, f64, f64)], p: &KinematicParams) -> (u32, u32) {
    let k = p.window;
    let (mut speed_changes, mut dir_changes) = (0, 0);
    let mut last_check: Option<f64> = None;
    let mut ref_speed = 0.0;
    let mut ref_heading: Option<f64> = None;
    for i in (k - 1)..samples.len() {
        let (t0, x0, y0) = samples[i + 1 - k];
        let (t1, x1, y1) = samples[i];
        let (vx, vy) = ((x1 - x0) / (t1 - t0), (y1 - y0) / (t1 - t0));
        let speed = (vx * vx + vy * vy).sqrt();
        let moving = speed >= p.speed_floor;
        let eff = if moving { speed } else { 0.0 };
        let heading = vy.atan2(vx);
        match last_check {
            None => {
                ref_speed = eff;
                ref_heading = if moving { Some(heading) } else { None };
                last_check = Some(t1);
            }
            Some(t) if t1 - t >= p.refractory - 1e-9 => {
                if (eff - ref_speed).abs() / ref_speed.max(p.speed_floor) > p.speed_delta {
                    speed_changes += 1;
                }
                if moving {
                    if let Some(h) = ref_heading {
                        let mut d = (heading - h).abs() % (2.0 * std::f64::consts::PI);
                        if d > std::f64::consts::PI {
                            d = 2.0 * std::f64::consts::PI - d;
                        }
                        if d > p.heading_delta {
                            dir_changes += 1;
                        }
                    }
                    ref_heading = Some(heading);
                }
                ref_speed = eff;
                last_check = Some(t1);
            }
            _ => {}
        }
    }
    (speed_changes, dir_changes)
}

/// Runs a path through the tracker: tracker rows every frame, detector rows every 5th.
fn run_tracker(samples: &[(f64, f64, f64)], jitter: Option<(u64, f64)>) -> TrackState {
    let mut rng = jitter.map(|(seed, _)| ChaCha8Rng::seed_from_u64(seed));
    let mut tracker = Tracker::new(TrackerParams::default()).unwrap();
    for (frame, &(t, x, y)) in samples.iter().enumerate() {
        let (mut cx, mut cy) = (x, y);
        if let (Some(rng), Some((_, r))) = (rng.as_mut(), jitter) {
            let angle = rng.gen::<f64>() * std::f64::consts::TAU;
            let radius = r * rng.gen::<f64>().sqrt();
            cx += radius * angle.cos();
            cy += radius * angle.sin();
        }
        let bbox = BBox::centered(cx, cy, 40.0, 80.0);
        let mut rows = vec![Detection {
            frame_index: frame as u64,
            timestamp: t,
            track_hint: Some(1),
            bbox,
            source: Source::Tracker,
        }];
        if frame.is_multiple_of(5) {
            rows.push(Detection {
                source: Source::Detector,
                ..rows[0].clone()
            });
        }
        let events = tracker.process_frame(frame as u64, t, &rows).unwrap();
        if frame > 0 {
            assert!(events.is_empty(), "frame {frame}: {events:?}");
        }
    }
    assert_eq!(tracker.len(), 1);
    let track = tracker.tracks().next().unwrap().clone();
    track
}

#[test]
fn straight_walk_has_no_changes() {
    let samples = path((0.0, 100.0), &[(20.0, 30.0, 0.0)]);
    let t = run_tracker(&samples, None);
    assert_eq!((t.speed_change_count, t.direction_change_count), (0, 0));
}

#[test]
fn loiter_counts_match_definitional_oracle() {
    let p = KinematicParams::default();
    let samples = loiter_path();
    let expected = oracle_counts(&samples, &p);
    let track = run_tracker(&samples, None);
    assert_eq!(
        (track.speed_change_count, track.direction_change_count),
        expected
    );
    // 4 reversals and 2 stops must register
    assert!(expected.1 >= 4, "{expected:?}");
    assert!(expected.0 >= 4, "{expected:?}");
}

#[test]
fn sub_floor_jitter_leaves_counts_unchanged() {
    let p = KinematicParams::default();
    // per-frame displacement noise strictly below speed_floor / fps
    let bound = 0.95 * p.speed_floor / FPS;
    for samples in [
        loiter_path(),
        path(
            (0.0, 0.0),
            &[(10.0, 30.0, 0.0), (5.0, 0.0, 0.0), (10.0, 0.0, 30.0)],
        ),
    ] {
        let clean = run_tracker(&samples, None);
        for seed in 0..5 {
            let noisy = run_tracker(&samples, Some((seed, bound)));
            assert_eq!(
                (noisy.speed_change_count, noisy.direction_change_count),
                (clean.speed_change_count, clean.direction_change_count),
                "seed {seed}"
            );
        }
    }
}

/// Best assignment by exhaustive search over all permutations (maximum total IOU among
/// assignments that only use pairs at or above the threshold).
fn brute_force_assignment(m: &[[f64; 3]; 3], threshold: f64) -> Vec<(usize, usize)> {
    let perms = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut best: (usize, f64, Vec<(usize, usize)>) = (0, -1.0, vec![]);
    for p in perms {
        let pairs: Vec<(usize, usize)> = (0..3)
            .filter(|&t| m[t][p[t]] >= threshold)
            .map(|t| (t, p[t]))
            .collect();
        let total: f64 = pairs.iter().map(|&(t, d)| m[t][d]).sum();
        if (pairs.len(), total) > (best.0, best.1) {
            best = (pairs.len(), total, pairs);
        }
    }
    best.2
}

#[test]
fn three_by_three_matches_exhaustive_assignment() {
    let track_boxes = [
        BBox::new(0.0, 0.0, 40.0, 80.0),
        BBox::new(30.0, 0.0, 40.0, 80.0),
        BBox::new(200.0, 50.0, 40.0, 80.0),
    ];
    let det_boxes = [
        BBox::new(204.0, 52.0, 40.0, 80.0),
        BBox::new(4.0, 0.0, 40.0, 80.0),
        BBox::new(34.0, 2.0, 40.0, 80.0),
    ];
    let mut m = [[0.0; 3]; 3];
    for (t, tb) in track_boxes.iter().enumerate() {
        for (d, db) in det_boxes.iter().enumerate() {
            m[t][d] = iou(tb, db);
        }
    }
    // the two left boxes overlap each other's detections, so the matrix is not diagonal
    assert!(m[0][2] > 0.0 && m[1][1] > 0.0);
    let expected = brute_force_assignment(&m, 0.5);

    let mut tracker = Tracker::new(TrackerParams::default()).unwrap();
    let seed: Vec<Detection> = track_boxes
        .iter()
        .map(|&bbox| Detection {
            frame_index: 0,
            timestamp: 0.0,
            track_hint: None,
            bbox,
            source: Source::Detector,
        })
        .collect();
    tracker.reconcile_detections(0, 0.0, &seed).unwrap();
    let ids: Vec<u64> = tracker.tracks().map(|t| t.track_id).collect();
    let tracks: BTreeMap<u64, TrackState> =
        tracker.tracks().map(|t| (t.track_id, t.clone())).collect();
    let mut got: Vec<(usize, usize)> = greedy_match(&tracks, &det_boxes, 0.5)
        .into_iter()
        .map(|(id, d)| (ids.iter().position(|&i| i == id).unwrap(), d))
        .collect();
    got.sort();
    let mut expected = expected;
    expected.sort();
    assert_eq!(got, expected);

    // applying the cycle keeps all three identities
    let dets: Vec<Detection> = det_boxes
        .iter()
        .map(|&bbox| Detection {
            frame_index: 5,
            timestamp: 1.0,
            track_hint: None,
            bbox,
            source: Source::Detector,
        })
        .collect();
    let events = tracker.reconcile_detections(5, 1.0, &dets).unwrap();
    assert!(events.is_empty());
    assert_eq!(
        tracker.tracks().map(|t| t.track_id).collect::<Vec<_>>(),
        ids
    );
}

#[test]
fn five_people_feed_the_people_count_anchor() {
    let mut tracker = Tracker::new(TrackerParams::default()).unwrap();
    let dets: Vec<Detection> = (0..5)
        .map(|i| Detection {
            frame_index: 0,
            timestamp: 0.0,
            track_hint: Some(i),
            bbox: BBox::new(100.0 * i as f64, 10.0, 40.0, 80.0),
            source: Source::Detector,
        })
        .collect();
    tracker.process_frame(0, 0.0, &dets).unwrap();
    let record = tracker.build_feature_record(0, 0.0);
    assert_eq!(record.people_count, 5);
    let f = FuzzyEngine::default_engine()
        .fuzzify("people_count", record.people_count as f64)
        .unwrap();
    assert!((f.degree("medium").unwrap() - 1.0).abs() < 1e-9);
    assert!((f.degree("high").unwrap() - 0.27).abs() < 1e-9);
}

#[test]
fn two_walkers_give_two_people() {
    let a = path((50.0, 100.0), &[(4.0, 30.0, 0.0)]);
    let b = path((500.0, 300.0), &[(4.0, -30.0, 0.0)]);
    let mut tracker = Tracker::new(TrackerParams::default()).unwrap();
    for (frame, (pa, pb)) in a.iter().zip(&b).enumerate() {
        let mut rows = Vec::new();
        for (hint, p) in [(1, pa), (2, pb)] {
            let bbox = BBox::centered(p.1, p.2, 40.0, 80.0);
            rows.push(Detection {
                frame_index: frame as u64,
                timestamp: p.0,
                track_hint: Some(hint),
                bbox,
                source: Source::Tracker,
            });
            if frame.is_multiple_of(5) {
                rows.push(Detection {
                    frame_index: frame as u64,
                    timestamp: p.0,
                    track_hint: Some(hint),
                    bbox,
                    source: Source::Detector,
                });
            }
        }
        tracker.process_frame(frame as u64, pa.0, &rows).unwrap();
        assert_eq!(
            tracker
                .build_feature_record(frame as u64, pa.0)
                .people_count,
            2
        );
    }
    let hints: Vec<_> = tracker.tracks().map(|t| t.hint).collect();
    assert_eq!(hints, vec![Some(1), Some(2)]);
}

proptest! {
    // a track matched above threshold keeps its id and counters; dwell never decreases
    #[test]
    fn identity_and_dwell_preserved(steps in proptest::collection::vec((-6.0f64..6.0, -6.0f64..6.0), 1..60)) {
        let mut tracker = Tracker::new(TrackerParams::default()).unwrap();
        let (mut x, mut y) = (300.0, 300.0);
        let mut last_dwell = 0.0;
        let mut last_counts = (0, 0);
        for (i, (dx, dy)) in steps.iter().enumerate() {
            x += dx;
            y += dy;
            let frame = i as u64;
            let t = frame as f64 / FPS;
            let bbox = BBox::centered(x, y, 40.0, 80.0);
            let mut rows = vec![Detection { frame_index: frame, timestamp: t, track_hint: None, bbox, source: Source::Tracker }];
            if frame.is_multiple_of(5) {
                rows.push(Detection { source: Source::Detector, ..rows[0].clone() });
            }
            tracker.process_frame(frame, t, &rows).unwrap();
            let ids: Vec<u64> = tracker.tracks().map(|t| t.track_id).collect();
            prop_assert_eq!(ids, vec![1]);
            let tr = tracker.track(1).unwrap();
            prop_assert!(tr.dwell_time() >= last_dwell);
            prop_assert!(tr.speed_change_count >= last_counts.0 && tr.direction_change_count >= last_counts.1);
            last_dwell = tr.dwell_time();
            last_counts = (tr.speed_change_count, tr.direction_change_count);
        }
    }
}
