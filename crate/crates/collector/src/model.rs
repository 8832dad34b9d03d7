//! Extension-host view of the document: text, caret, and `cursorRight`.

use tokio::sync::watch;

/// Caret position as shown on screen, shared with the renderer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CursorView {
    pub line: u32,
    pub col: u32,
}

#[derive(Debug)]
pub struct EditorModel {
    lines: Vec<Vec<char>>,
    view: watch::Sender<CursorView>,
}

impl EditorModel {
    pub fn new(text: &str) -> Self {
        let (view, _) = watch::channel(CursorView::default());
        let mut model = Self { lines: Vec::new(), view };
        model.load(text);
        model
    }

    pub fn subscribe(&self) -> watch::Receiver<CursorView> {
        self.view.subscribe()
    }

    /// Replaces the document and puts the caret at the start.
    pub fn load(&mut self, text: &str) {
        self.lines = text.split('\n').map(|l| l.chars().collect()).collect();
        self.view.send_replace(CursorView::default());
    }

    pub fn position(&self) -> CursorView {
        *self.view.borrow()
    }

    pub fn reset(&self) {
        self.view.send_replace(CursorView::default());
    }

    /// Moves one stop right, wrapping past the end-of-line stop; stays put at
    /// end of file.
    pub fn cursor_right(&self) {
        let CursorView { line, col } = self.position();
        let len = self.lines[line as usize].len() as u32;
        let next = if col < len {
            CursorView { line, col: col + 1 }
        } else if (line as usize) + 1 < self.lines.len() {
            CursorView { line: line + 1, col: 0 }
        } else {
            return;
        };
        self.view.send_replace(next);
    }

    /// Character right of the caret: `"\n"` at end of line, empty at end of file.
    pub fn character_at_cursor(&self) -> String {
        let CursorView { line, col } = self.position();
        let chars = &self.lines[line as usize];
        match chars.get(col as usize) {
            Some(c) => c.to_string(),
            None if (line as usize) + 1 < self.lines.len() => "\n".into(),
            None => String::new(),
        }
    }

    /// Every caret stop in traversal order.
    pub fn stops(&self) -> Vec<CursorView> {
        self.lines
            .iter()
            .enumerate()
            .flat_map(|(l, chars)| (0..=chars.len() as u32).map(move |c| CursorView { line: l as u32, col: c }))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walks_every_stop_then_sticks() {
        let m = EditorModel::new("ab\nc");
        let mut seen = vec![(m.position(), m.character_at_cursor())];
        for _ in 0..6 {
            m.cursor_right();
            seen.push((m.position(), m.character_at_cursor()));
        }
        let pos: Vec<(u32, u32, &str)> = seen.iter().map(|(v, c)| (v.line, v.col, c.as_str())).collect();
        assert_eq!(
            pos,
            [(0, 0, "a"), (0, 1, "b"), (0, 2, "\n"), (1, 0, "c"), (1, 1, ""), (1, 1, ""), (1, 1, "")]
        );
        assert_eq!(m.stops().len(), 5);
    }

    #[test]
    fn subscribers_see_moves() {
        let m = EditorModel::new("xy");
        let rx = m.subscribe();
        m.cursor_right();
        assert_eq!(*rx.borrow(), CursorView { line: 0, col: 1 });
    }
}
