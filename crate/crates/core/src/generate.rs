//! Evaluation dataset generation from a source corpus.
//!
//! Each source file is split into screens that fit the editor layout. Every
//! screen is rendered once; samples are caret targets on those screens,
//! described by an instruction that names the position without ambiguity.
//!
//! Word and line targets are points: the boundary before the word's first
//! character, and the boundary before column 0.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{write_samples, Granularity, Sample};
use crate::editor::{self, EditorLayout};
use crate::geometry::{normalize, PixelBox};
use crate::seed::rng_for;
use crate::{Error, Result};

const BUILTIN_CORPUS: [(&str, &str); 4] = [
    ("ring_buffer.rs", include_str!("../corpus/ring_buffer.rs")),
    ("inventory.py", include_str!("../corpus/inventory.py")),
    ("debounce.js", include_str!("../corpus/debounce.js")),
    ("matrix.c", include_str!("../corpus/matrix.c")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Composition {
    pub character: usize,
    pub word: usize,
    pub line: usize,
}

impl Default for Composition {
    fn default() -> Self {
        Self { character: 171, word: 48, line: 38 }
    }
}

impl Composition {
    pub fn get(&self, g: Granularity) -> usize {
        match g {
            Granularity::Character => self.character,
            Granularity::Word => self.word,
            Granularity::Line => self.line,
        }
    }

    pub fn set(&mut self, g: Granularity, n: usize) {
        match g {
            Granularity::Character => self.character = n,
            Granularity::Word => self.word = n,
            Granularity::Line => self.line = n,
        }
    }

    pub fn total(&self) -> usize {
        self.character + self.word + self.line
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub layout: EditorLayout,
    pub composition: Composition,
    /// Source files; empty selects the built-in corpus.
    pub corpus: Vec<PathBuf>,
    pub seed: u64,
    pub tab_width: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            layout: EditorLayout::default(),
            composition: Composition::default(),
            corpus: Vec::new(),
            seed: 0,
            tab_width: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub name: String,
    pub text: String,
}

pub fn builtin_corpus() -> Vec<SourceFile> {
    BUILTIN_CORPUS
        .iter()
        .map(|(name, text)| SourceFile { name: (*name).into(), text: (*text).into() })
        .collect()
}

/// Reads the configured corpus, falling back to the built-in files.
pub fn load_corpus(paths: &[PathBuf]) -> Result<Vec<SourceFile>> {
    if paths.is_empty() {
        return Ok(builtin_corpus());
    }
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Ok(SourceFile { name: p.display().to_string(), text })
        })
        .collect()
}

/// One rendered page of a source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Screen {
    pub index: usize,
    pub file: String,
    /// 0-based line of the file shown on the screen's first row.
    pub first_line: usize,
    pub text: String,
}

impl Screen {
    pub fn image_path(&self) -> String {
        format!("images/screen_{:03}.png", self.index)
    }

    pub fn text_path(&self) -> String {
        format!("screens/screen_{:03}.txt", self.index)
    }

    pub fn lines(&self) -> Vec<&str> {
        editor::source_lines(&self.text).collect()
    }
}

/// Splits files into screens of at most `layout.capacity().lines` lines.
/// A trailing newline does not open an extra empty line.
pub fn paginate(files: &[SourceFile], layout: &EditorLayout, tab_width: usize) -> Result<Vec<Screen>> {
    let cap = layout.capacity();
    let mut screens = Vec::new();
    for file in files {
        let text = editor::normalize_source(&file.text, tab_width);
        let body = text.strip_suffix('\n').unwrap_or(&text);
        let lines: Vec<&str> = editor::source_lines(body).collect();
        if let Some((i, line)) = lines
            .iter()
            .enumerate()
            .find(|(_, l)| l.chars().count() > cap.columns)
        {
            return Err(Error::Capacity {
                line: i + 1,
                reason: format!(
                    "{}: {} columns, layout holds {}",
                    file.name,
                    line.chars().count(),
                    cap.columns
                ),
            });
        }
        for (page, chunk) in lines.chunks(cap.lines).enumerate() {
            screens.push(Screen {
                index: screens.len(),
                file: file.name.clone(),
                first_line: page * cap.lines,
                text: chunk.join("\n"),
            });
        }
    }
    Ok(screens)
}

/// Instruction wording for one granularity. Slots: `{line}` (1-based, as shown
/// in the gutter), `{word}`, `{left}`, `{right}` and `{occurrence}`, which
/// expands to `the Nth occurrence of ` or to nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstructionTemplate {
    pub granularity: Granularity,
    pub pattern: &'static str,
}

pub const CHARACTER_TEMPLATE: InstructionTemplate = InstructionTemplate {
    granularity: Granularity::Character,
    pattern: "Place the cursor between the characters \"{left}\" and \"{right}\" in {occurrence}\"{word}\" on line {line}.",
};

pub const WORD_TEMPLATE: InstructionTemplate = InstructionTemplate {
    granularity: Granularity::Word,
    pattern: "Place the cursor before {occurrence}the word \"{word}\" on line {line}.",
};

pub const LINE_TEMPLATE: InstructionTemplate = InstructionTemplate {
    granularity: Granularity::Line,
    pattern: "Place the cursor at the start of line {line}.",
};

impl InstructionTemplate {
    pub fn for_granularity(g: Granularity) -> Self {
        match g {
            Granularity::Character => CHARACTER_TEMPLATE,
            Granularity::Word => WORD_TEMPLATE,
            Granularity::Line => LINE_TEMPLATE,
        }
    }

    pub fn render(&self, slots: &InstructionSlots) -> String {
        let occurrence = slots
            .occurrence
            .map(|n| format!("the {} occurrence of ", ordinal(n)))
            .unwrap_or_default();
        self.pattern
            .replace("{line}", &(slots.line + 1).to_string())
            .replace("{occurrence}", &occurrence)
            .replace("{word}", &slots.word)
            .replace("{left}", &slots.left.map(String::from).unwrap_or_default())
            .replace("{right}", &slots.right.map(String::from).unwrap_or_default())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InstructionSlots {
    /// 0-based.
    pub line: usize,
    pub word: String,
    pub left: Option<char>,
    pub right: Option<char>,
    /// 1-based index among the word's occurrences on the line.
    pub occurrence: Option<usize>,
}

pub fn ordinal(n: usize) -> String {
    let suffix = match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

/// A caret stop on a screen, with its instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub screen: usize,
    pub line: usize,
    pub col: usize,
    pub granularity: Granularity,
    pub instruction: String,
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "screen {} ({}, {}): {}", self.screen, self.line, self.col, self.instruction)
    }
}

/// Word token: a maximal run of ASCII letters, digits and `_` not starting
/// with a digit. Returns `(start_col, text)`.
pub fn tokens(line: &str) -> Vec<(usize, String)> {
    let chars: Vec<char> = line.chars().collect();
    let is_word = |c: char| c.is_ascii_alphanumeric() || c == '_';
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !is_word(chars[i]) {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && is_word(chars[i]) {
            i += 1;
        }
        if !chars[start].is_ascii_digit() {
            out.push((start, chars[start..i].iter().collect()));
        }
    }
    out
}

/// Enumerates every unambiguous target on `screen`, in reading order.
pub fn candidates(screen: &Screen, granularity: Granularity) -> Vec<Candidate> {
    let lines = screen.lines();
    let template = InstructionTemplate::for_granularity(granularity);
    let mut out = Vec::new();
    let make = |line: usize, col: usize, slots: InstructionSlots| Candidate {
        screen: screen.index,
        line,
        col,
        granularity,
        instruction: template.render(&slots),
    };

    if granularity == Granularity::Line {
        for line in 0..lines.len() {
            out.push(make(line, 0, InstructionSlots { line, ..Default::default() }));
        }
        return out;
    }

    let per_line: Vec<Vec<(usize, String)>> = lines.iter().map(|l| tokens(l)).collect();
    let mut on_screen: HashMap<&str, usize> = HashMap::new();
    for (_, word) in per_line.iter().flatten() {
        *on_screen.entry(word.as_str()).or_default() += 1;
    }

    for (line, toks) in per_line.iter().enumerate() {
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (start, word) in toks {
            let nth = seen.entry(word.as_str()).or_default();
            *nth += 1;
            let occurrence = (on_screen[word.as_str()] > 1).then_some(*nth);
            let chars: Vec<char> = word.chars().collect();
            match granularity {
                Granularity::Word => {
                    if chars.len() < 2 {
                        continue;
                    }
                    let slots = InstructionSlots { line, word: word.clone(), occurrence, ..Default::default() };
                    out.push(make(line, *start, slots));
                }
                Granularity::Character => {
                    let pairs: Vec<(char, char)> = chars.windows(2).map(|w| (w[0], w[1])).collect();
                    for (k, pair) in pairs.iter().enumerate() {
                        if pairs.iter().filter(|p| *p == pair).count() != 1 {
                            continue;
                        }
                        let slots = InstructionSlots {
                            line,
                            word: word.clone(),
                            left: Some(pair.0),
                            right: Some(pair.1),
                            occurrence,
                        };
                        out.push(make(line, start + k + 1, slots));
                    }
                }
                Granularity::Line => unreachable!(),
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedSample {
    pub sample: Sample,
    pub screen: usize,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDataset {
    pub layout: EditorLayout,
    pub screens: Vec<Screen>,
    /// Ordered by sample id.
    pub samples: Vec<GeneratedSample>,
}

impl GeneratedDataset {
    pub fn samples(&self) -> Vec<Sample> {
        self.samples.iter().map(|g| g.sample.clone()).collect()
    }
}

/// Draws the requested number of targets per granularity.
pub fn generate_dataset(
    corpus: &[SourceFile],
    layout: &EditorLayout,
    composition: Composition,
    seed: u64,
    tab_width: usize,
) -> Result<GeneratedDataset> {
    if corpus.is_empty() {
        return Err(Error::Generation("corpus is empty".into()));
    }
    layout.validate()?;
    let screens = paginate(corpus, layout, tab_width)?;

    let mut picked = Vec::with_capacity(composition.total());
    for g in Granularity::ALL {
        let want = composition.get(g);
        if want == 0 {
            continue;
        }
        let mut pool: Vec<Candidate> = screens.iter().flat_map(|s| candidates(s, g)).collect();
        if pool.len() < want {
            return Err(Error::Generation(format!(
                "{g} targets: requested {want}, corpus offers {} unambiguous positions (short by {})",
                pool.len(),
                want - pool.len()
            )));
        }
        pool.shuffle(&mut rng_for(seed, &format!("generate/{g}")));
        pool.truncate(want);
        picked.extend(pool);
    }
    picked.shuffle(&mut rng_for(seed, "generate/order"));

    let width = layout.image_width;
    let height = layout.image_height;
    let samples = picked
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let point = editor::text_cursor_ground_truth(&screens[c.screen].text, c.line, c.col, layout)?;
            let target = normalize(&PixelBox::point(point), width, height)?;
            Ok(GeneratedSample {
                sample: Sample {
                    id: format!("sample_{i:04}"),
                    image_path: screens[c.screen].image_path(),
                    instruction: c.instruction,
                    target,
                    granularity: c.granularity,
                    image_width: width,
                    image_height: height,
                },
                screen: c.screen,
                line: c.line,
                col: c.col,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(GeneratedDataset { layout: *layout, screens, samples })
}

pub fn generate_from_config(config: &GeneratorConfig) -> Result<GeneratedDataset> {
    let corpus = load_corpus(&config.corpus)?;
    generate_dataset(&corpus, &config.layout, config.composition, config.seed, config.tab_width)
}

pub const SAMPLES_FILE: &str = "samples.jsonl";

/// Writes `samples.jsonl`, one PNG per screen under `images/` and the screen
/// text under `screens/`. Returns the path of the JSONL file.
pub fn write_dataset(dir: &Path, dataset: &GeneratedDataset) -> Result<PathBuf> {
    for sub in ["images", "screens"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    for screen in &dataset.screens {
        let img = editor::render(&screen.text, &dataset.layout)?;
        img.save(dir.join(screen.image_path()))?;
        let text_path = dir.join(screen.text_path());
        std::fs::write(&text_path, &screen.text).map_err(|e| Error::io(&text_path, e))?;
    }
    let samples_path = dir.join(SAMPLES_FILE);
    write_samples(&samples_path, &dataset.samples())?;
    Ok(samples_path)
}
