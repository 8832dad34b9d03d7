use std::time::{Duration, Instant};

use cursorbench_collector::{
    collect_file, measure_cursor, run_collection, serve_bridge, spawn_renderer, BridgeHandle, CollectOutcome,
    CollectionJob, CollectorConfig, EditorModel, FaultPlan, RendererConfig, RendererHandle,
};
use cursorbench_core::dataset::{read_collection, DatasetHeader};
use cursorbench_core::editor::EditorLayout;
use cursorbench_core::seed::rng_for;
use rand::Rng;

fn fast_config() -> CollectorConfig {
    CollectorConfig {
        port: 0,
        settle_delay_ms: 1,
        request_timeout_ms: 1000,
        connect_timeout_ms: 2000,
        window_screen_x: 130.0,
        window_screen_y: 45.0,
        ..CollectorConfig::default()
    }
}

async fn setup(config: &CollectorConfig, renderer: impl FnOnce(RendererConfig) -> RendererConfig) -> (BridgeHandle, EditorModel, RendererHandle) {
    let bridge = serve_bridge(config.port, config.request_timeout()).await.unwrap();
    let editor = EditorModel::new("");
    let rc = renderer(RendererConfig {
        window_screen_x: config.window_screen_x,
        window_screen_y: config.window_screen_y,
        faults: config.faults,
        ..RendererConfig::new(EditorLayout::default())
    });
    let handle = spawn_renderer(bridge.url(), rc, editor.subscribe());
    (bridge, editor, handle)
}

async fn collect(text: &str) -> CollectOutcome {
    let config = fast_config();
    let (bridge, mut editor, _r) = setup(&config, |c| c).await;
    collect_file(&bridge, &mut editor, &config, &EditorLayout::default(), "f", text, "shot.png").await.unwrap()
}

/// Stops by hand: every column 0..=len of every line.
fn brute_stops(text: &str) -> Vec<(u32, u32, String)> {
    let lines: Vec<Vec<char>> = text.split('\n').map(|l| l.chars().collect()).collect();
    let mut out = Vec::new();
    for (l, chars) in lines.iter().enumerate() {
        for c in 0..=chars.len() {
            let ch = match chars.get(c) {
                Some(ch) => ch.to_string(),
                None if l + 1 < lines.len() => "\n".to_string(),
                None => String::new(),
            };
            out.push((l as u32, c as u32, ch));
        }
    }
    out
}

fn stops_of(outcome: &CollectOutcome) -> Vec<(u32, u32, String)> {
    outcome.file.records.iter().map(|r| (r.line, r.col, r.character.clone())).collect()
}

#[tokio::test]
async fn two_chars_give_three_stops() {
    let out = collect("ab").await;
    assert_eq!(stops_of(&out), [(0, 0, "a".into()), (0, 1, "b".into()), (0, 2, String::new())]);
    assert!(out.file.truncation.is_none());
}

#[tokio::test]
async fn end_of_line_stop_reports_newline() {
    let out = collect("a\nb").await;
    assert!(out.file.records.iter().any(|r| r.character == "\n" && (r.line, r.col) == (0, 1)));
    assert_eq!(out.file.records.len(), 4);
}

#[tokio::test]
async fn empty_text_has_one_stop() {
    let out = collect("").await;
    assert_eq!(stops_of(&out), [(0, 0, String::new())]);
    assert_eq!(out.file.header.char_count, 0);
}

#[tokio::test]
async fn records_match_brute_force_enumeration() {
    let config = fast_config();
    let layout = EditorLayout::default();
    let (bridge, mut editor, _r) = setup(&config, |c| c).await;
    let mut rng = rng_for(5, "collector-test");
    let alphabet: Vec<char> = "abc xyz_(){};\n".chars().collect();
    for round in 0..12 {
        let len = rng.random_range(0..=100);
        let text: String = (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
        let out = collect_file(&bridge, &mut editor, &config, &layout, "f", &text, "s.png").await.unwrap();
        assert_eq!(out.file.records.len(), DatasetHeader::count_chars(&text) + 1, "round {round}: {text:?}");
        assert_eq!(stops_of(&out), brute_stops(&text), "round {round}");
        assert!(out.file.header.char_count_consistent());
        let geometry = out.file.header.window_geometry;
        for pair in out.file.records.windows(2) {
            assert!((pair[0].line, pair[0].col) < (pair[1].line, pair[1].col));
        }
        for r in &out.file.records {
            assert!(r.frames_consistent(&geometry));
            let b = measure_cursor(&layout, r.line, r.col, 2.0, 1.0).unwrap();
            assert_eq!(r.window_x, f64::from(layout.origin_x + r.col * layout.char_width) - 1.0);
            assert_eq!((r.window_x, r.window_y), (b.window_x, b.window_y));
        }
    }
}

#[tokio::test]
async fn injected_faults_drop_exactly_their_stops() {
    let config = CollectorConfig { faults: FaultPlan { rate: 0.1, seed: 42 }, ..fast_config() };
    let (bridge, mut editor, renderer) = setup(&config, |c| c).await;
    let text = "fn main() {\n    let total = items.iter().sum::<u32>();\n    println!(\"{total}\");\n}";
    let out = collect_file(&bridge, &mut editor, &config, &EditorLayout::default(), "f", text, "s.png").await.unwrap();
    let injected = renderer.faults_injected() as usize;
    assert!(injected > 0, "seed should inject at least one fault");
    let expected = brute_stops(text);
    assert_eq!(out.file.records.len() + injected, expected.len());
    assert_eq!(out.failed_steps.len(), injected);
    // recorded + failed stops cover every stop exactly once
    let mut seen: Vec<(u32, u32)> = out.file.records.iter().map(|r| (r.line, r.col)).collect();
    seen.extend(out.failed_steps.iter().map(|v| (v.line, v.col)));
    seen.sort();
    let all: Vec<(u32, u32)> = expected.iter().map(|(l, c, _)| (*l, *c)).collect();
    assert_eq!(seen, all);
}

#[tokio::test]
async fn settle_delay_precedes_every_measurement() {
    let config = CollectorConfig { settle_delay_ms: 25, ..fast_config() };
    let (bridge, mut editor, _r) = setup(&config, |c| c).await;
    let start = Instant::now();
    let out = collect_file(&bridge, &mut editor, &config, &EditorLayout::default(), "f", "abc", "s.png").await.unwrap();
    assert_eq!(out.file.records.len(), 4);
    assert!(start.elapsed() >= Duration::from_millis(4 * 25));
    assert_eq!(out.file.header.settle_delay_ms, 25);
}

#[tokio::test]
async fn lost_renderer_leaves_a_truncated_file() {
    let config = CollectorConfig { connect_timeout_ms: 300, ..fast_config() };
    let (bridge, mut editor, _r) = setup(&config, |c| RendererConfig { disconnect_after: Some(3), ..c }).await;
    let out = collect_file(&bridge, &mut editor, &config, &EditorLayout::default(), "f", "abcdef", "s.png").await.unwrap();
    assert_eq!(out.file.records.len(), 3);
    let marker = out.file.truncation.expect("marker");
    assert!(marker.truncated);
    assert_eq!(out.restarts, 0);
}

#[tokio::test]
async fn reconnecting_renderer_restarts_the_file() {
    let config = fast_config();
    let (bridge, mut editor, _r) = setup(&config, |c| RendererConfig { disconnect_after: Some(3), reconnect: true, ..c }).await;
    let out = collect_file(&bridge, &mut editor, &config, &EditorLayout::default(), "f", "abcdef", "s.png").await.unwrap();
    assert_eq!(out.restarts, 1);
    assert!(out.file.truncation.is_none());
    assert_eq!(stops_of(&out), brute_stops("abcdef"));
}

#[tokio::test]
async fn run_collection_writes_readable_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = fast_config();
    let jobs = vec![
        CollectionJob { file_id: "one".into(), text: "let x = 1;".into() },
        CollectionJob { file_id: "two".into(), text: "a\n\nb".into() },
    ];
    let summaries = run_collection(&config, &EditorLayout::default(), &jobs, dir.path()).await.unwrap();
    assert_eq!(summaries.len(), 2);
    for (job, s) in jobs.iter().zip(&summaries) {
        let file = read_collection(&s.path).unwrap();
        assert!(file.errors.is_empty());
        assert_eq!(file.records.len(), job.text.chars().count() + 1);
        assert_eq!(file.header.file_content, job.text);
        assert!(dir.path().join(&file.header.screenshot_path).exists());
        assert_eq!(file.header.window_geometry.screen_x, 130.0);
    }
}
