//! Small helpers shared by the line-oriented text formats.

use std::io::BufRead;

/// Formats `x` with 9 significant digits in scientific notation.
pub fn fmt_sig9(x: f64) -> String {
    format!("{x:.8e}")
}

/// Rounds `x` to the value that [`fmt_sig9`] would round-trip to.
pub fn round_sig9(x: f64) -> f64 {
    // parsing our own output cannot fail
    fmt_sig9(x).parse().unwrap_or(x)
}

/// Shortest exact representation (round-trips bit for bit).
pub fn fmt_exact(x: f64) -> String {
    format!("{x:e}")
}

/// Line reader that skips blank lines and `#` comments and remembers the
/// 1-based number of the last returned line.
pub struct Lines<R> {
    inner: R,
    line_no: usize,
    buf: String,
}

impl<R: BufRead> Lines<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            line_no: 0,
            buf: String::new(),
        }
    }

    pub fn line_no(&self) -> usize {
        self.line_no
    }

    /// Next meaningful line with surrounding whitespace trimmed, or `None` at
    /// end of input.
    pub fn next_line(&mut self) -> std::io::Result<Option<&str>> {
        loop {
            self.buf.clear();
            let n = self.inner.read_line(&mut self.buf)?;
            if n == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            let t = self.buf.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            // re-borrow the trimmed slice out of the buffer
            let start = self.buf.len() - self.buf.trim_start().len();
            let end = start + t.len();
            return Ok(Some(&self.buf[start..end]));
        }
    }
}

/// True if `s` is usable as a whitespace-free token in the text formats.
pub fn is_token(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || c == '|' || c == '#' || c == ',')
}
