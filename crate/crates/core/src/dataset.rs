//! JSONL schemas.
//!
//! Two file kinds share the one-object-per-line layout:
//!
//! - *Eval files* hold one [`Sample`] per line.
//! - *Collection files* start with a [`DatasetHeader`], followed by one
//!   [`CursorRecord`] per cursor stop. A run that loses its renderer mid-file
//!   ends with a [`TruncationMarker`] line.
//!
//! Readers keep going past malformed lines and report them with their 1-based
//! line number.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::geometry::NormalizedBox;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Character,
    Word,
    Line,
}

impl Granularity {
    pub const ALL: [Granularity; 3] = [Granularity::Character, Granularity::Word, Granularity::Line];

    pub fn as_str(&self) -> &'static str {
        match self {
            Granularity::Character => "character",
            Granularity::Word => "word",
            Granularity::Line => "line",
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "character" => Ok(Granularity::Character),
            "word" => Ok(Granularity::Word),
            "line" => Ok(Granularity::Line),
            other => Err(Error::InvalidArgument(format!("unknown granularity `{other}`"))),
        }
    }
}

/// One grounding task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSample")]
pub struct Sample {
    pub id: String,
    /// Relative to the directory holding the eval file.
    pub image_path: String,
    pub instruction: String,
    pub target: NormalizedBox,
    pub granularity: Granularity,
    pub image_width: u32,
    pub image_height: u32,
}

#[derive(Deserialize)]
struct RawSample {
    id: String,
    image_path: String,
    instruction: String,
    target: NormalizedBox,
    granularity: Granularity,
    image_width: u32,
    image_height: u32,
}

impl TryFrom<RawSample> for Sample {
    type Error = Error;

    fn try_from(raw: RawSample) -> Result<Self> {
        if raw.image_width == 0 || raw.image_height == 0 {
            return Err(Error::InvalidArgument(format!(
                "sample {} has empty image dimensions",
                raw.id
            )));
        }
        Ok(Sample {
            id: raw.id,
            image_path: raw.image_path,
            instruction: raw.instruction,
            target: raw.target,
            granularity: raw.granularity,
            image_width: raw.image_width,
            image_height: raw.image_height,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowGeometry {
    pub screen_x: f64,
    pub screen_y: f64,
    pub width: f64,
    pub height: f64,
}

/// Metadata line at the top of a collection file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub file_content: String,
    pub char_count: usize,
    pub font_family: String,
    /// Points.
    pub font_size: f64,
    pub line_height: f64,
    pub settle_delay_ms: u64,
    pub window_geometry: WindowGeometry,
    pub screenshot_path: String,
    pub timestamp: String,
}

impl DatasetHeader {
    /// Characters as the collector traverses them: Unicode scalar values.
    pub fn count_chars(text: &str) -> usize {
        text.chars().count()
    }

    pub fn char_count_consistent(&self) -> bool {
        self.char_count == Self::count_chars(&self.file_content)
    }
}

/// Measurement for one cursor stop. Coordinates are CSS pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CursorRecord {
    pub file_id: String,
    pub line: u32,
    pub col: u32,
    /// The character to the right of the caret, `"\n"` at end of line and
    /// empty at end of file.
    pub character: String,
    pub screen_x: f64,
    pub screen_y: f64,
    pub window_x: f64,
    pub window_y: f64,
    pub cursor_width: f64,
    pub cursor_height: f64,
    pub device_pixel_ratio: f64,
}

impl CursorRecord {
    /// Screen coordinates must equal window coordinates plus the window origin.
    pub fn frames_consistent(&self, geometry: &WindowGeometry) -> bool {
        self.screen_x == self.window_x + geometry.screen_x
            && self.screen_y == self.window_y + geometry.screen_y
    }
}

/// Trailing line of a collection file cut short by a bridge failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationMarker {
    pub truncated: bool,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineError {
    /// 1-based.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone)]
pub struct ParsedJsonl<T> {
    pub items: Vec<T>,
    pub errors: Vec<LineError>,
}

#[derive(Debug, Clone)]
pub struct CollectionFile {
    pub header: DatasetHeader,
    pub records: Vec<CursorRecord>,
    pub truncation: Option<TruncationMarker>,
    pub errors: Vec<LineError>,
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = (usize, std::io::Result<String>)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(|(i, line)| (i + 1, line)))
}

/// Reads any JSONL file of `T`, skipping blank lines.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<ParsedJsonl<T>> {
    let mut items = Vec::new();
    let mut errors = Vec::new();
    for (line_no, line) in open_lines(path)? {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(item) => items.push(item),
            Err(e) => errors.push(LineError {
                line: line_no,
                message: e.to_string(),
            }),
        }
    }
    Ok(ParsedJsonl { items, errors })
}

pub fn read_samples(path: &Path) -> Result<ParsedJsonl<Sample>> {
    read_jsonl(path)
}

pub fn read_collection(path: &Path) -> Result<CollectionFile> {
    let mut lines = open_lines(path)?;
    let header = loop {
        match lines.next() {
            None => {
                return Err(Error::Schema {
                    path: path.to_path_buf(),
                    message: "missing header line".into(),
                })
            }
            Some((_, line)) => {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str::<DatasetHeader>(&line).map_err(|e| Error::Schema {
                    path: path.to_path_buf(),
                    message: format!("first line is not a dataset header: {e}"),
                })?;
            }
        }
    };

    let mut records = Vec::new();
    let mut truncation = None;
    let mut errors = Vec::new();
    for (line_no, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if let Ok(marker) = serde_json::from_str::<TruncationMarker>(&line) {
            truncation = Some(marker);
            continue;
        }
        match serde_json::from_str::<CursorRecord>(&line) {
            Ok(record) => records.push(record),
            Err(e) => errors.push(LineError {
                line: line_no,
                message: e.to_string(),
            }),
        }
    }
    Ok(CollectionFile {
        header,
        records,
        truncation,
        errors,
    })
}

/// Serializes one JSONL line (with trailing newline).
pub fn to_jsonl_line<T: Serialize>(item: &T) -> Result<String> {
    let mut line = serde_json::to_string(item)?;
    line.push('\n');
    Ok(line)
}

pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    items: impl IntoIterator<Item = &'a T>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for item in items {
        out.write_all(to_jsonl_line(item)?.as_bytes())
            .map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_samples(path: &Path, samples: &[Sample]) -> Result<()> {
    write_jsonl(path, samples)
}

pub fn write_collection(
    path: &Path,
    header: &DatasetHeader,
    records: &[CursorRecord],
    truncation: Option<&TruncationMarker>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut put = |line: String| out.write_all(line.as_bytes()).map_err(|e| Error::io(path, e));
    put(to_jsonl_line(header)?)?;
    for record in records {
        put(to_jsonl_line(record)?)?;
    }
    if let Some(marker) = truncation {
        put(to_jsonl_line(marker)?)?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use tempfile::tempdir;

    fn header(text: &str) -> DatasetHeader {
        DatasetHeader {
            file_content: text.into(),
            char_count: DatasetHeader::count_chars(text),
            font_family: "mono".into(),
            font_size: 12.0,
            line_height: 24.0,
            settle_delay_ms: 80,
            window_geometry: WindowGeometry {
                screen_x: 10.0,
                screen_y: 20.0,
                width: 1344.0,
                height: 1344.0,
            },
            screenshot_path: "shot.png".into(),
            timestamp: "2026-01-01T00:00:00Z".into(),
        }
    }

    fn record(line: u32, col: u32) -> CursorRecord {
        CursorRecord {
            file_id: "a.rs".into(),
            line,
            col,
            character: "x".into(),
            screen_x: 81.0 + f64::from(col),
            screen_y: 36.0,
            window_x: 71.0 + f64::from(col),
            window_y: 16.0,
            cursor_width: 2.0,
            cursor_height: 24.0,
            device_pixel_ratio: 1.0,
        }
    }

    #[test]
    fn minimal_collection_file() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        write_collection(&path, &header("x"), &[record(0, 0)], None).unwrap();
        let file = read_collection(&path).unwrap();
        assert_eq!(file.header, header("x"));
        assert_eq!(file.records, vec![record(0, 0)]);
        assert!(file.errors.is_empty());
        assert!(file.truncation.is_none());
        assert!(file.records[0].frames_consistent(&file.header.window_geometry));
    }

    #[test]
    fn malformed_line_is_reported_and_skipped() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let mut body = to_jsonl_line(&header("abcdefghi")).unwrap();
        for col in 0..10 {
            if col == 4 {
                body.push_str("{\"file_id\": \"a.rs\", \"line\": oops}\n");
            } else {
                body.push_str(&to_jsonl_line(&record(0, col)).unwrap());
            }
        }
        std::fs::write(&path, body).unwrap();
        let file = read_collection(&path).unwrap();
        assert_eq!(file.records.len(), 9);
        assert_eq!(file.errors.len(), 1);
        // header is line 1, records start at line 2
        assert_eq!(file.errors[0].line, 6);
    }

    #[test]
    fn missing_header_is_a_schema_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        std::fs::write(&path, to_jsonl_line(&record(0, 0)).unwrap()).unwrap();
        assert!(matches!(read_collection(&path), Err(Error::Schema { .. })));
        std::fs::write(&path, "").unwrap();
        assert!(matches!(read_collection(&path), Err(Error::Schema { .. })));
    }

    #[test]
    fn truncation_marker_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let marker = TruncationMarker {
            truncated: true,
            reason: "renderer disconnected".into(),
        };
        write_collection(&path, &header("ab"), &[record(0, 0)], Some(&marker)).unwrap();
        let file = read_collection(&path).unwrap();
        assert_eq!(file.records.len(), 1);
        assert_eq!(file.truncation, Some(marker));
    }

    #[test]
    fn sample_schema_field_names() {
        let sample = Sample {
            id: "s1".into(),
            image_path: "images/screen_000.png".into(),
            instruction: "Place the cursor at the start of line 1.".into(),
            target: NormalizedBox::point(53.57142857142857, 8.928571428571429).unwrap(),
            granularity: Granularity::Line,
            image_width: 1344,
            image_height: 1344,
        };
        let value = serde_json::to_value(&sample).unwrap();
        let keys: Vec<&str> = value.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(
            keys,
            ["granularity", "id", "image_height", "image_path", "image_width", "instruction", "target"]
        );
        assert_eq!(value["granularity"], "line");
        let back: Sample = serde_json::from_value(value).unwrap();
        assert_eq!(back, sample);
    }

    #[test]
    fn zero_sized_sample_rejected() {
        let json = r#"{"id":"s","image_path":"a.png","instruction":"i","target":{"x0":0,"y0":0,"x1":0,"y1":0},"granularity":"word","image_width":0,"image_height":10}"#;
        assert!(serde_json::from_str::<Sample>(json).is_err());
    }

    fn arb_sample() -> impl Strategy<Value = Sample> {
        (
            "[a-z0-9]{1,8}",
            "[ -~]{0,40}",
            0.0..1000.0f64,
            0.0..1000.0f64,
            prop::sample::select(Granularity::ALL.to_vec()),
            1u32..5000,
            1u32..5000,
        )
            .prop_map(|(id, instruction, x, y, granularity, w, h)| Sample {
                image_path: format!("images/{id}.png"),
                id,
                instruction,
                target: NormalizedBox::point(x, y).unwrap(),
                granularity,
                image_width: w,
                image_height: h,
            })
    }

    proptest! {
        #[test]
        fn samples_survive_write_then_read(samples in prop::collection::vec(arb_sample(), 0..20)) {
            let dir = tempdir().unwrap();
            let path = dir.path().join("s.jsonl");
            write_samples(&path, &samples).unwrap();
            let parsed = read_samples(&path).unwrap();
            prop_assert!(parsed.errors.is_empty());
            prop_assert_eq!(parsed.items, samples);
        }
    }
}
