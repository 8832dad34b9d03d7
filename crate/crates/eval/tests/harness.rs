use std::collections::HashMap;
use std::sync::Arc;

use cursorbench_core::dataset::{Granularity, Sample};
use cursorbench_core::editor::EditorLayout;
use cursorbench_core::generate::{builtin_corpus, generate_dataset, write_dataset, Composition};
use cursorbench_core::geometry::{NormalizedBox, PixelBox, PixelPoint};
use cursorbench_core::overlay::cross_pixels;
use cursorbench_core::trace::TerminalStatus;
use cursorbench_eval::harness::{metrics_json, Session};
use cursorbench_eval::{
    evaluate, load_samples, mock_targets, run_sample, Backend, BackendError, BackendIdentity, CompletionRequest,
    HarnessConfig, LoadedSample, MockBackend, MockKind, MockOracleConfig, Role,
};
use image::{Rgb, RgbImage};

/// A 1000x1000 canvas, so normalized and pixel coordinates coincide.
fn sample_at(id: &str, x: f64, y: f64, granularity: Granularity) -> LoadedSample {
    let mut img = RgbImage::from_pixel(1000, 1000, Rgb([30, 30, 30]));
    for i in 0..1000 {
        img.put_pixel(i, (i * 7) % 1000, Rgb([200, 200, 90]));
    }
    LoadedSample {
        sample: Sample {
            id: id.into(),
            image_path: format!("images/{id}.png"),
            instruction: format!("Place the cursor at the start of line {id}."),
            target: NormalizedBox::point(x, y).unwrap(),
            granularity,
            image_width: 1000,
            image_height: 1000,
        },
        image: Arc::new(img),
        target: PixelBox::point(PixelPoint::new(x, y)),
    }
}

fn mock(kind: MockKind, samples: &[LoadedSample], tweak: impl FnOnce(&mut MockOracleConfig)) -> MockBackend {
    let mut cfg = MockOracleConfig { kind, ..Default::default() };
    tweak(&mut cfg);
    MockBackend::new(cfg, mock_targets(samples)).unwrap()
}

fn config(max_turns: u32, tol: f64) -> HarnessConfig {
    HarnessConfig { max_turns, tolerance_x: tol, tolerance_y: tol, ..Default::default() }
}

#[tokio::test]
async fn halving_oracle_first_hit_depends_on_tolerance() {
    let s = sample_at("s", 500.0, 300.0, Granularity::Word);
    let b = mock(MockKind::FeedbackAware, std::slice::from_ref(&s), |c| {
        c.offset = [40.0, 0.0];
        c.gamma = 0.5;
    });
    for (tol, expect) in [(5.0, 4), (4.0, 5)] {
        let trace = run_sample(&s, &b, &config(6, tol), None).await.unwrap();
        assert_eq!(trace.first_hit_turn, Some(expect), "tolerance {tol}");
        assert_eq!(trace.turns.len(), expect as usize);
        let d: Vec<f64> = trace.turns.iter().map(|t| t.dist_center.unwrap()).collect();
        assert_eq!(&d[..4], &[40.0, 20.0, 10.0, 5.0]);
    }
    let miss = run_sample(&s, &b, &config(3, 4.0), None).await.unwrap();
    assert_eq!(miss.first_hit_turn, None);
    assert_eq!(miss.terminal_status, TerminalStatus::Exhausted);
    assert_eq!(miss.turns.len(), 3);
}

#[tokio::test]
async fn perfect_oracle_hits_at_once() {
    let samples = vec![sample_at("a", 120.0, 640.0, Granularity::Line), sample_at("b", 999.0, 0.0, Granularity::Character)];
    let b = Arc::new(mock(MockKind::Perfect, &samples, |_| {}));
    let out = evaluate(&samples, b, &HarnessConfig::default(), None).await.unwrap();
    for t in &out.traces {
        assert_eq!(t.first_hit_turn, Some(1));
        assert_eq!(t.turns.len(), 1);
        assert_eq!(t.turns[0].dist_box, Some(0.0));
        assert_eq!(t.turns[0].dist_center, Some(0.0));
    }
    assert_eq!(out.metrics.turn(1).unwrap().accuracy, 1.0);
    assert_eq!(out.metrics.turn(2).unwrap().accuracy, 1.0);
}

#[tokio::test]
async fn constant_offset_misses() {
    let samples = vec![sample_at("a", 300.0, 300.0, Granularity::Word)];
    let b = Arc::new(mock(MockKind::ConstantOffset, &samples, |c| c.offset = [50.0, 0.0]));
    let out = evaluate(&samples, b, &config(2, 5.0), None).await.unwrap();
    let t = &out.traces[0];
    assert_eq!(t.first_hit_turn, None);
    assert!(t.turns.iter().all(|r| r.dist_center == Some(50.0) && !r.hit));
    assert_eq!(out.metrics.turn(2).unwrap().mean_dist_center, Some(50.0));
    assert_eq!(out.metrics.any_turn_hit_rate, 0.0);
}

#[tokio::test]
async fn parse_failures_are_counted() {
    let samples = vec![sample_at("a", 300.0, 300.0, Granularity::Word), sample_at("b", 10.0, 10.0, Granularity::Line)];
    let b = Arc::new(mock(MockKind::ParseBreaker, &samples, |_| {}));
    let out = evaluate(&samples, b, &config(3, 5.0), None).await.unwrap();
    assert_eq!(out.metrics.parse_failure_rate, 1.0);
    assert_eq!(out.metrics.parse_failures, 6);
    assert_eq!(out.metrics.turn(1).unwrap().mean_dist_center, None);
    assert!(out.traces.iter().all(|t| t.turns.iter().all(|r| r.point.is_none())));
}

#[tokio::test]
async fn feedback_turn_carries_coordinates_and_cross() {
    let s = sample_at("s", 300.0, 440.0, Granularity::Character);
    let b = mock(MockKind::ConstantOffset, std::slice::from_ref(&s), |c| c.offset = [10.0, 35.0]);
    let cfg = config(2, 1.0);
    let mut session = Session::new(&s, &cfg).unwrap();
    session.run_turn(&b).await.unwrap();
    session.run_turn(&b).await.unwrap();
    let h = session.history();
    let roles: Vec<Role> = h.iter().map(|t| t.role).collect();
    assert_eq!(roles, [Role::System, Role::User, Role::Assistant, Role::User, Role::Assistant]);
    assert!(h[0].text.contains("1000"));
    assert_eq!(h[1].text, s.sample.instruction);
    assert_eq!(h[2].text, "The caret goes at (310, 475)");
    assert!(h[3].text.ends_with("\nLast attempt: [310, 475]"), "{}", h[3].text);

    let clean = h[1].image.as_ref().unwrap();
    assert!(Arc::ptr_eq(clean, &s.image));
    let marked = h[3].image.as_ref().unwrap();
    let cross: std::collections::HashSet<(u32, u32)> =
        cross_pixels(PixelPoint::new(310.0, 475.0), 1000, 1000, &cfg.overlay).into_iter().collect();
    for (x, y, p) in marked.enumerate_pixels() {
        let same = p == clean.get_pixel(x, y);
        assert!(same || cross.contains(&(x, y)), "pixel ({x},{y}) changed outside the cross");
    }
    assert!(cross.iter().any(|&(x, y)| marked.get_pixel(x, y) != clean.get_pixel(x, y)));
    assert_ne!(session.turns()[0].prompt_messages_digest, session.turns()[1].prompt_messages_digest);
}

#[tokio::test]
async fn cross_is_redrawn_on_a_clean_copy_each_turn() {
    let s = sample_at("s", 500.0, 500.0, Granularity::Word);
    let b = mock(MockKind::FeedbackAware, std::slice::from_ref(&s), |c| c.offset = [80.0, 0.0]);
    let cfg = config(3, 1.0);
    let mut session = Session::new(&s, &cfg).unwrap();
    for _ in 0..3 {
        session.run_turn(&b).await.unwrap();
    }
    // turn 3 shows only the turn-2 prediction (540, 500), not the one at 580
    let third = session.history()[5].image.as_ref().unwrap();
    let expected = cursorbench_core::overlay::mark(&s.image, PixelPoint::new(540.0, 500.0), &cfg.overlay).unwrap();
    assert_eq!(third.as_raw(), expected.as_raw());
}

/// Answers garbage at turn 1, then the target.
struct LateStarter(PixelPoint);

#[async_trait::async_trait]
impl Backend for LateStarter {
    fn identity(&self) -> BackendIdentity {
        BackendIdentity { kind: "test".into(), model: "late".into(), endpoint: None }
    }

    async fn complete(&self, r: CompletionRequest<'_>) -> Result<String, BackendError> {
        Ok(if r.turn == 1 { "no idea".into() } else { format!("({}, {})", self.0.x, self.0.y) })
    }
}

#[tokio::test]
async fn parse_failure_then_hit_sends_reminder_with_clean_image() {
    let s = sample_at("s", 200.0, 200.0, Granularity::Line);
    let cfg = config(2, 1.0);
    let mut session = Session::new(&s, &cfg).unwrap();
    let b = LateStarter(PixelPoint::new(200.0, 200.0));
    assert!(session.run_turn(&b).await.unwrap().point.is_none());
    assert!(session.run_turn(&b).await.unwrap().hit);
    let reminder = &session.history()[3];
    assert_eq!(reminder.text, cursorbench_eval::harness::NO_COORDINATE_REMINDER);
    assert!(Arc::ptr_eq(reminder.image.as_ref().unwrap(), &s.image));
    let trace = session.into_trace(None);
    assert_eq!(trace.first_hit_turn, Some(2));
}

struct Flaky;

#[async_trait::async_trait]
impl Backend for Flaky {
    fn identity(&self) -> BackendIdentity {
        BackendIdentity { kind: "test".into(), model: "flaky".into(), endpoint: None }
    }

    async fn complete(&self, r: CompletionRequest<'_>) -> Result<String, BackendError> {
        match r.sample_id {
            "down" => Err(BackendError::Transport("connection reset".into())),
            "locked" => Err(BackendError::Auth("HTTP 401".into())),
            _ => Ok("(10, 10)".into()),
        }
    }
}

#[tokio::test]
async fn transport_failures_are_excluded_and_auth_aborts() {
    let samples = vec![sample_at("ok", 10.0, 10.0, Granularity::Line), sample_at("down", 10.0, 10.0, Granularity::Line)];
    let out = evaluate(&samples, Arc::new(Flaky), &HarnessConfig::default(), None).await.unwrap();
    let down = out.traces.iter().find(|t| t.sample_id == "down").unwrap();
    assert_eq!(down.terminal_status, TerminalStatus::InfrastructureFailed);
    assert!(down.error.as_deref().unwrap().contains("connection reset"));
    assert_eq!(out.metrics.infrastructure_failed, 1);
    assert_eq!(out.metrics.samples_evaluated, 1);
    assert_eq!(out.metrics.turn(1).unwrap().accuracy, 1.0);

    let locked = vec![sample_at("locked", 10.0, 10.0, Granularity::Line)];
    let err = evaluate(&locked, Arc::new(Flaky), &HarnessConfig::default(), None).await.unwrap_err();
    assert!(err.to_string().contains("authentication"), "{err}");
}

#[tokio::test]
async fn parallelism_does_not_change_results() {
    let samples: Vec<LoadedSample> = (0..24)
        .map(|i| sample_at(&format!("s{i:02}"), 40.0 * i as f64, 900.0 - 30.0 * i as f64, Granularity::Word))
        .collect();
    let mut runs = Vec::new();
    for p in [1, 8] {
        let b = Arc::new(mock(MockKind::SeededNoise, &samples, |c| {
            c.sigma = vec![12.0, 6.0];
            c.seed = 5;
        }));
        let cfg = HarnessConfig { parallelism: p, max_turns: 3, ..Default::default() };
        let mut out = evaluate(&samples, b, &cfg, None).await.unwrap();
        for t in &mut out.traces {
            for r in &mut t.turns {
                r.latency_ms = 0;
            }
        }
        runs.push((serde_json::to_string(&out.traces).unwrap(), metrics_json(&out.metrics).unwrap()));
    }
    assert_eq!(runs[0], runs[1]);
}

#[tokio::test]
async fn generated_dataset_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let layout = EditorLayout::default();
    let ds = generate_dataset(&builtin_corpus(), &layout, Composition { character: 3, word: 3, line: 3 }, 7, 4).unwrap();
    let path = write_dataset(dir.path(), &ds).unwrap();
    let samples = load_samples(&path).unwrap();
    assert_eq!(samples.len(), 9);
    let b = Arc::new(mock(MockKind::Perfect, &samples, |_| {}));
    let cfg = HarnessConfig { save_turn_images: true, ..Default::default() };
    let turn_dir = dir.path().join("turns");
    let out = evaluate(&samples, b, &cfg, Some(&turn_dir)).await.unwrap();
    assert_eq!(out.metrics.turn(1).unwrap().accuracy, 1.0);
    let first = &samples[0].sample.id;
    assert!(turn_dir.join(first).join("turn_1.png").exists());

    let by_id: HashMap<_, _> = samples.iter().map(|s| (s.sample.id.clone(), s)).collect();
    assert!(by_id.values().all(|s| s.image.dimensions() == (1344, 1344)));
}
