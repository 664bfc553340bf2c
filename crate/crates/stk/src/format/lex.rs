// SPDX-License-Identifier: Apache-2.0

/// A parse error at a 1-based `line:col` position.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Token<'a> {
    pub text: &'a str,
    pub line: u32,
    pub col: u32,
}

/// Splits `src` into words and single-character punctuation tokens.
/// `#` starts a comment that runs to the end of the line.
pub(crate) fn tokenize<'a>(src: &'a str, punct: &[char]) -> Vec<Token<'a>> {
    let mut out = Vec::new();
    for (ln, line) in src.lines().enumerate() {
        let line = match line.find('#') {
            Some(k) => &line[..k],
            None => line,
        };
        let mut start: Option<usize> = None;
        let col_of = |byte: usize| line[..byte].chars().count() as u32 + 1;
        let flush = |start: &mut Option<usize>, end: usize, out: &mut Vec<Token<'a>>| {
            if let Some(s) = start.take() {
                out.push(Token {
                    text: &line[s..end],
                    line: ln as u32 + 1,
                    col: col_of(s),
                });
            }
        };
        for (i, c) in line.char_indices() {
            if c.is_whitespace() {
                flush(&mut start, i, &mut out);
            } else if punct.contains(&c) {
                flush(&mut start, i, &mut out);
                out.push(Token {
                    text: &line[i..i + c.len_utf8()],
                    line: ln as u32 + 1,
                    col: line[..i].chars().count() as u32 + 1,
                });
            } else if start.is_none() {
                start = Some(i);
            }
        }
        flush(&mut start, line.len(), &mut out);
    }
    out
}

pub(crate) struct Cursor<'a> {
    toks: Vec<Token<'a>>,
    pos: usize,
    /// Position reported at end of input.
    end: (u32, u32),
}

impl<'a> Cursor<'a> {
    pub fn new(src: &'a str, punct: &[char]) -> Self {
        let line = src.lines().count().max(1) as u32;
        let col = src.lines().last().map_or(0, |l| l.chars().count()) as u32 + 1;
        Cursor {
            toks: tokenize(src, punct),
            pos: 0,
            end: (line, col),
        }
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub fn peek(&self) -> Option<&'a str> {
        self.toks.get(self.pos).map(|t| t.text)
    }

    pub fn here(&self) -> (u32, u32) {
        self.toks.get(self.pos).map_or(self.end, |t| (t.line, t.col))
    }

    pub fn error(&self, message: impl Into<String>) -> SyntaxError {
        let (line, col) = self.here();
        SyntaxError {
            line,
            col,
            message: message.into(),
        }
    }

    pub fn error_at(&self, t: Token<'_>, message: impl Into<String>) -> SyntaxError {
        SyntaxError {
            line: t.line,
            col: t.col,
            message: message.into(),
        }
    }

    pub fn next(&mut self, what: &str) -> Result<Token<'a>, SyntaxError> {
        let t = *self
            .toks
            .get(self.pos)
            .ok_or_else(|| self.error(format!("expected {what}, found end of input")))?;
        self.pos += 1;
        Ok(t)
    }

    pub fn eat(&mut self, text: &str) -> bool {
        if self.peek() == Some(text) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, text: &str) -> Result<Token<'a>, SyntaxError> {
        let t = self.next(&format!("`{text}`"))?;
        if t.text != text {
            return Err(self.error_at(t, format!("expected `{text}`, found `{}`", t.text)));
        }
        Ok(t)
    }

    /// A token that is not punctuation.
    pub fn word(&mut self, what: &str, punct: &[char]) -> Result<Token<'a>, SyntaxError> {
        let t = self.next(what)?;
        let mut chars = t.text.chars();
        if let (Some(c), None) = (chars.next(), chars.next()) {
            if punct.contains(&c) {
                return Err(self.error_at(t, format!("expected {what}, found `{}`", t.text)));
            }
        }
        Ok(t)
    }

    pub fn number<T: std::str::FromStr>(&mut self, what: &str, punct: &[char]) -> Result<T, SyntaxError> {
        let t = self.word(what, punct)?;
        t.text
            .parse()
            .map_err(|_| self.error_at(t, format!("expected {what}, found `{}`", t.text)))
    }
}
