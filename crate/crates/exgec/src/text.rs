//! Code-point offset helpers.
//!
//! All offsets in this crate count Unicode code points, not bytes. These
//! helpers convert between the two and slice text by code-point range.

/// Number of code points in `s`.
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Byte offset of the code point at position `idx`, or the end of the
/// string when `idx == char_len(s)`. Returns `None` when out of range.
pub fn byte_offset(s: &str, idx: usize) -> Option<usize> {
    if idx == 0 {
        return Some(0);
    }
    let mut seen = 0;
    for (byte, _) in s.char_indices() {
        if seen == idx {
            return Some(byte);
        }
        seen += 1;
    }
    // seen == total code points here
    (idx == seen).then_some(s.len())
}

/// Slice `s` by the half-open code-point range `[start, end)`.
pub fn slice_chars(s: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let b0 = byte_offset(s, start)?;
    let b1 = byte_offset(s, end)?;
    Some(&s[b0..b1])
}
