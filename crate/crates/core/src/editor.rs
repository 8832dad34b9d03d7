//! Synthetic code editor.
//!
//! Text is drawn on a fixed character grid with an embedded 8x8 bitmap font,
//! scaled by an integer factor. The glyph for `(line, col)` is anchored at the
//! top-left of its cell `(origin_x + col * char_width, origin_y + line * line_height)`,
//! so cursor geometry follows from the layout in closed form.

use font8x8::{UnicodeFonts, BASIC_FONTS};
use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::geometry::PixelPoint;
use crate::{Error, Result};

/// Native glyph size of the embedded font, in font pixels.
pub const GLYPH_SIZE: u32 = 8;

pub const FONT_FAMILY: &str = "font8x8 bitmap (monospace)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Theme {
    pub background: [u8; 3],
    pub foreground: [u8; 3],
    pub gutter_background: [u8; 3],
    pub gutter_foreground: [u8; 3],
}

impl Default for Theme {
    fn default() -> Self {
        Self {
            background: [30, 30, 30],
            foreground: [212, 212, 212],
            gutter_background: [37, 37, 38],
            gutter_foreground: [133, 133, 133],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditorLayout {
    /// Top-left of the first character cell.
    pub origin_x: u32,
    pub origin_y: u32,
    pub char_width: u32,
    pub line_height: u32,
    pub gutter_width: u32,
    pub image_width: u32,
    pub image_height: u32,
    #[serde(default)]
    pub theme: Theme,
}

impl Default for EditorLayout {
    /// 1344x1344 canvas, 16x24 cells, 55 lines by 79 columns.
    fn default() -> Self {
        Self {
            origin_x: 72,
            origin_y: 16,
            char_width: 16,
            line_height: 24,
            gutter_width: 64,
            image_width: 1344,
            image_height: 1344,
            theme: Theme::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Capacity {
    pub lines: usize,
    pub columns: usize,
}

impl EditorLayout {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidArgument(msg));
        if self.char_width < GLYPH_SIZE || self.line_height < GLYPH_SIZE {
            return fail(format!(
                "cells must be at least {GLYPH_SIZE}x{GLYPH_SIZE} px, got {}x{}",
                self.char_width, self.line_height
            ));
        }
        if self.origin_x < self.gutter_width {
            return fail(format!(
                "origin_x {} lies inside the {} px gutter",
                self.origin_x, self.gutter_width
            ));
        }
        if self.origin_x + self.char_width > self.image_width
            || self.origin_y + self.line_height > self.image_height
        {
            return fail("layout leaves no room for a single character cell".into());
        }
        Ok(())
    }

    pub fn capacity(&self) -> Capacity {
        Capacity {
            lines: ((self.image_height - self.origin_y) / self.line_height) as usize,
            columns: ((self.image_width - self.origin_x) / self.char_width) as usize,
        }
    }

    /// Integer magnification of the 8x8 font that fits a cell.
    pub fn glyph_scale(&self) -> u32 {
        (self.char_width / GLYPH_SIZE).min(self.line_height / GLYPH_SIZE).max(1)
    }

    /// Rendered glyph height in pixels, also reported as the font size.
    pub fn glyph_px(&self) -> u32 {
        GLYPH_SIZE * self.glyph_scale()
    }

    /// Top-left pixel of the cell at `(line, col)`.
    pub fn cell_origin(&self, line: usize, col: usize) -> (u32, u32) {
        (
            self.origin_x + col as u32 * self.char_width,
            self.origin_y + line as u32 * self.line_height,
        )
    }

    /// Checks that every line of `text` fits; reports the first offender.
    pub fn check_fits(&self, text: &str) -> Result<()> {
        let cap = self.capacity();
        for (i, line) in source_lines(text).enumerate() {
            if i >= cap.lines {
                return Err(Error::Capacity {
                    line: i + 1,
                    reason: format!("layout holds {} lines", cap.lines),
                });
            }
            let len = line.chars().count();
            if len > cap.columns {
                return Err(Error::Capacity {
                    line: i + 1,
                    reason: format!("{len} columns, layout holds {}", cap.columns),
                });
            }
        }
        Ok(())
    }
}

/// Lines of a document; `"a\n"` has two, the second empty.
pub fn source_lines(text: &str) -> std::str::Split<'_, char> {
    text.split('\n')
}

/// Normalizes line endings to `\n` and expands tabs to the next multiple of
/// `tab_width` columns.
pub fn normalize_source(text: &str, tab_width: usize) -> String {
    let text = text.replace("\r\n", "\n");
    let mut out = String::with_capacity(text.len());
    let mut col = 0;
    for ch in text.chars() {
        match ch {
            '\t' => {
                let pad = tab_width.max(1) - col % tab_width.max(1);
                out.extend(std::iter::repeat(' ').take(pad));
                col += pad;
            }
            '\n' => {
                out.push('\n');
                col = 0;
            }
            _ => {
                out.push(ch);
                col += 1;
            }
        }
    }
    out
}

fn glyph(ch: char) -> [u8; 8] {
    BASIC_FONTS
        .get(ch)
        .or_else(|| BASIC_FONTS.get('?'))
        .unwrap_or([0; 8])
}

/// Draws a glyph with its top-left at `(x, y)`, clipped to `clip_x`.
fn draw_glyph(img: &mut RgbImage, ch: char, x: i64, y: i64, scale: u32, color: [u8; 3], clip_x: (i64, i64)) {
    let rows = glyph(ch);
    let s = i64::from(scale);
    for (r, bits) in rows.iter().enumerate() {
        for c in 0..8 {
            if bits >> c & 1 == 0 {
                continue;
            }
            for dy in 0..s {
                for dx in 0..s {
                    let px = x + c * s + dx;
                    let py = y + r as i64 * s + dy;
                    if px < clip_x.0 || px >= clip_x.1 || py < 0 || py >= i64::from(img.height()) {
                        continue;
                    }
                    img.put_pixel(px as u32, py as u32, Rgb(color));
                }
            }
        }
    }
}

/// Renders `text` onto a fresh canvas. The output depends only on the inputs.
pub fn render(text: &str, layout: &EditorLayout) -> Result<RgbImage> {
    layout.validate()?;
    layout.check_fits(text)?;
    let theme = layout.theme;
    let mut img = RgbImage::from_pixel(layout.image_width, layout.image_height, Rgb(theme.background));
    for y in 0..layout.image_height {
        for x in 0..layout.gutter_width {
            img.put_pixel(x, y, Rgb(theme.gutter_background));
        }
    }

    let scale = layout.glyph_scale();
    let advance = i64::from(layout.glyph_px());
    let gutter_right = i64::from(layout.gutter_width) - advance / 2;
    let text_clip = (i64::from(layout.gutter_width), i64::from(layout.image_width));
    for (line_idx, line) in source_lines(text).enumerate() {
        let (_, y) = layout.cell_origin(line_idx, 0);
        let number = (line_idx + 1).to_string();
        let start = gutter_right - advance * number.len() as i64;
        for (i, ch) in number.chars().enumerate() {
            draw_glyph(
                &mut img,
                ch,
                start + advance * i as i64,
                i64::from(y),
                scale,
                theme.gutter_foreground,
                (0, i64::from(layout.gutter_width)),
            );
        }
        for (col, ch) in line.chars().enumerate() {
            if ch == ' ' {
                continue;
            }
            let (x, y) = layout.cell_origin(line_idx, col);
            draw_glyph(&mut img, ch, i64::from(x), i64::from(y), scale, theme.foreground, text_clip);
        }
    }
    Ok(img)
}

/// Pixel location of the caret boundary before column `col` on `line`: the left
/// edge of that column's cell, at the vertical center of the line.
pub fn cursor_ground_truth(line: usize, col: usize, layout: &EditorLayout) -> Result<PixelPoint> {
    let cap = layout.capacity();
    // col == columns is the boundary after the last cell
    if line >= cap.lines || col > cap.columns {
        return Err(Error::InvalidArgument(format!(
            "cursor ({line}, {col}) outside the {}x{} grid",
            cap.lines, cap.columns
        )));
    }
    Ok(PixelPoint::new(
        f64::from(layout.origin_x) + col as f64 * f64::from(layout.char_width),
        f64::from(layout.origin_y)
            + line as f64 * f64::from(layout.line_height)
            + f64::from(layout.line_height) / 2.0,
    ))
}

/// Like [`cursor_ground_truth`], but also requires `(line, col)` to be a
/// caret stop of `text`.
pub fn text_cursor_ground_truth(text: &str, line: usize, col: usize, layout: &EditorLayout) -> Result<PixelPoint> {
    let len = source_lines(text)
        .nth(line)
        .map(|l| l.chars().count())
        .ok_or_else(|| Error::InvalidArgument(format!("line {line} past end of text")))?;
    if col > len {
        return Err(Error::InvalidArgument(format!(
            "column {col} past end of line {line} ({len} chars)"
        )));
    }
    cursor_ground_truth(line, col, layout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small_layout() -> EditorLayout {
        EditorLayout {
            origin_x: 100,
            origin_y: 40,
            char_width: 8,
            line_height: 18,
            gutter_width: 90,
            image_width: 400,
            image_height: 300,
            theme: Theme::default(),
        }
    }

    #[test]
    fn ground_truth_examples() {
        let layout = small_layout();
        assert_eq!(cursor_ground_truth(0, 0, &layout).unwrap(), PixelPoint::new(100.0, 49.0));
        // 100 + 5*8, 40 + 2*18 + 9
        assert_eq!(cursor_ground_truth(2, 5, &layout).unwrap(), PixelPoint::new(140.0, 85.0));
        assert!(cursor_ground_truth(100, 0, &layout).is_err());
        assert!(cursor_ground_truth(0, 1000, &layout).is_err());
    }

    #[test]
    fn text_stops_are_checked() {
        let layout = small_layout();
        assert!(text_cursor_ground_truth("ab\ncd", 0, 2, &layout).is_ok());
        assert!(text_cursor_ground_truth("ab\ncd", 0, 3, &layout).is_err());
        assert!(text_cursor_ground_truth("ab\ncd", 2, 0, &layout).is_err());
        assert!(text_cursor_ground_truth("", 0, 0, &layout).is_ok());
    }

    #[test]
    fn rendering_is_deterministic() {
        let layout = EditorLayout::default();
        let a = render("ab\ncd", &layout).unwrap();
        let b = render("ab\ncd", &layout).unwrap();
        assert_eq!(a.as_raw(), b.as_raw());
    }

    #[test]
    fn empty_text_shows_gutter_number_one() {
        let layout = EditorLayout::default();
        let img = render("", &layout).unwrap();
        let text_area = (layout.gutter_width..layout.image_width)
            .flat_map(|x| (0..layout.image_height).map(move |y| (x, y)))
            .all(|(x, y)| img.get_pixel(x, y).0 == layout.theme.background);
        assert!(text_area, "text area must be blank");
        // the "1" glyph is drawn in the gutter on the first line's row band
        let band = layout.origin_y..layout.origin_y + layout.line_height;
        let ink: Vec<(u32, u32)> = (0..layout.gutter_width)
            .flat_map(|x| (0..layout.image_height).map(move |y| (x, y)))
            .filter(|&(x, y)| img.get_pixel(x, y).0 == layout.theme.gutter_foreground)
            .collect();
        assert!(!ink.is_empty());
        assert!(ink.iter().all(|(_, y)| band.contains(y)));
    }

    #[test]
    fn first_glyph_probe_matches_origin() {
        // 'M' in this font touches the top-left corner of its glyph box
        let layout = EditorLayout::default();
        let img = render("M", &layout).unwrap();
        let (cx, cy) = layout.cell_origin(0, 0);
        let fg = layout.theme.foreground;
        let first_col = (cx..cx + layout.char_width)
            .find(|&x| (cy..cy + layout.line_height).any(|y| img.get_pixel(x, y).0 == fg))
            .unwrap();
        let first_row = (cy..cy + layout.line_height)
            .find(|&y| (cx..cx + layout.char_width).any(|x| img.get_pixel(x, y).0 == fg))
            .unwrap();
        assert_eq!((first_col, first_row), (layout.origin_x, layout.origin_y));
    }

    #[test]
    fn overflow_reports_first_offending_line() {
        let layout = small_layout();
        let cap = layout.capacity();
        let long = "x".repeat(cap.columns + 1);
        let text = format!("ok\n{long}\n{long}");
        match render(&text, &layout) {
            Err(Error::Capacity { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected capacity error, got {other:?}"),
        }
        let tall = "a\n".repeat(cap.lines);
        match render(&tall, &layout) {
            Err(Error::Capacity { line, .. }) => assert_eq!(line, cap.lines + 1),
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_layouts_are_rejected() {
        let mut layout = small_layout();
        layout.origin_x = 50;
        assert!(layout.validate().is_err());
        let mut layout = small_layout();
        layout.char_width = 4;
        assert!(layout.validate().is_err());
    }

    #[test]
    fn tabs_expand_to_stops() {
        assert_eq!(normalize_source("\tx\r\nab\tc", 4), "    x\nab  c");
    }

    #[test]
    fn default_layout_capacity() {
        let cap = EditorLayout::default().capacity();
        assert_eq!(cap, Capacity { lines: 55, columns: 79 });
        assert_eq!(EditorLayout::default().glyph_scale(), 2);
    }

    proptest! {
        #[test]
        fn grid_law(line in 0usize..55, col in 0usize..79) {
            let layout = EditorLayout::default();
            let a = cursor_ground_truth(line, col, &layout).unwrap();
            let b = cursor_ground_truth(line, col + 1, &layout).unwrap();
            prop_assert_eq!(b.x - a.x, f64::from(layout.char_width));
            prop_assert_eq!(a.y, b.y);
        }

        #[test]
        fn glyph_ink_stays_inside_its_cell(ch in proptest::char::range('!', '~')) {
            let layout = EditorLayout { image_width: 160, image_height: 64, ..EditorLayout::default() };
            let img = render(&format!(" {ch} "), &layout).unwrap();
            let (x0, y0) = layout.cell_origin(0, 1);
            let fg = layout.theme.foreground;
            for (x, y, p) in img.enumerate_pixels() {
                if p.0 == fg {
                    prop_assert!(x >= x0 && x < x0 + layout.char_width);
                    prop_assert!(y >= y0 && y < y0 + layout.line_height);
                }
            }
        }
    }
}
