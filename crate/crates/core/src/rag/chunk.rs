//! Byte-span chunking. Parents are blank-line separated paragraphs grouped
//! greedily; children are sentences grouped greedily inside a parent.

use std::ops::Range;

fn char_len(text: &str, r: &Range<usize>) -> usize {
    text[r.clone()].chars().count()
}

fn trimmed(text: &str, r: Range<usize>) -> Option<Range<usize>> {
    let s = &text[r.clone()];
    let lead = s.len() - s.trim_start().len();
    let trail = s.len() - s.trim_end().len();
    (lead < s.len()).then(|| r.start + lead..r.end - trail)
}

/// Non-blank paragraphs of `text[within]`, trimmed, in order.
pub fn paragraphs(text: &str, within: Range<usize>) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut open: Option<usize> = None;
    let mut pos = within.start;
    for line in text[within.clone()].split_inclusive('\n') {
        let blank = line.trim().is_empty();
        match (blank, open) {
            (false, None) => open = Some(pos),
            (true, Some(start)) => {
                out.extend(trimmed(text, start..pos));
                open = None;
            }
            _ => {}
        }
        pos += line.len();
    }
    if let Some(start) = open {
        out.extend(trimmed(text, start..within.end));
    }
    out
}

/// Sentences end after `.`, `!` or `?` followed by whitespace or the end of
/// the paragraph.
pub fn sentences(text: &str, within: Range<usize>) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    for para in paragraphs(text, within) {
        let body = &text[para.clone()];
        let mut start = 0;
        let mut iter = body.char_indices().peekable();
        while let Some((i, c)) = iter.next() {
            let at_break = matches!(c, '.' | '!' | '?') && iter.peek().is_none_or(|(_, n)| n.is_whitespace());
            if at_break {
                let end = i + c.len_utf8();
                out.extend(trimmed(text, para.start + start..para.start + end));
                start = end;
            }
        }
        if start < body.len() {
            out.extend(trimmed(text, para.start + start..para.end));
        }
    }
    out
}

/// Greedy grouping: extend the current group while the covering span stays
/// within `max` characters. A unit longer than `max` forms its own group.
pub fn group(text: &str, units: &[Range<usize>], max: usize) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut cur: Option<Range<usize>> = None;
    for u in units {
        cur = Some(match cur {
            None => u.clone(),
            Some(c) if char_len(text, &(c.start..u.end)) <= max => c.start..u.end,
            Some(c) => {
                out.push(c);
                u.clone()
            }
        });
    }
    out.extend(cur);
    out
}

pub fn parent_spans(text: &str, parent_max: usize) -> Vec<Range<usize>> {
    group(text, &paragraphs(text, 0..text.len()), parent_max)
}

pub fn child_spans(text: &str, parent: Range<usize>, child_max: usize) -> Vec<Range<usize>> {
    group(text, &sentences(text, parent), child_max)
}
