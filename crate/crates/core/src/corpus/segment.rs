//! Rule-based sentence splitter for review prose.

/// Lowercased words (without the trailing period) that never end a sentence.
const ABBREVIATIONS: &[&str] = &[
    "al", "approx", "appx", "cf", "ch", "def", "dr", "e.g", "eg", "eq", "eqn", "eqs",
    "fig", "figs", "i.e", "ie", "lem", "mr", "mrs", "ms", "no", "nos", "pp", "prof", "ref", "refs",
    "resp", "sec", "secs", "tab", "thm", "viz", "vol", "vs", "w.r.t", "wrt",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '}', '\u{201d}', '\u{2019}'];
const OPENERS: &[char] = &['"', '\'', '(', '[', '\u{201c}', '\u{2018}'];

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Splits review text into trimmed, non-empty sentences.
///
/// A boundary is a run of `.`, `!` or `?` (optionally followed by closing
/// quotes or brackets) followed by whitespace and an uppercase letter or a
/// digit. Known abbreviations, single-letter initials and URLs never end a
/// sentence. Blank lines always end one.
pub fn segment_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (_, c) = chars[i];
        if c == '\n' {
            // Blank-line boundary: newline, optional spaces, newline.
            let mut j = i + 1;
            while j < chars.len() && chars[j].1.is_whitespace() && chars[j].1 != '\n' {
                j += 1;
            }
            if j < chars.len() && chars[j].1 == '\n' {
                push_trimmed(&mut out, &text[start..chars[i].0]);
                while j < chars.len() && chars[j].1.is_whitespace() {
                    j += 1;
                }
                start = byte_at(&chars, j, text.len());
                i = j;
                continue;
            }
            i += 1;
            continue;
        }
        if !is_terminator(c) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && is_terminator(chars[j].1) {
            j += 1;
        }
        while j < chars.len() && CLOSERS.contains(&chars[j].1) {
            j += 1;
        }
        let end_byte = byte_at(&chars, j, text.len());
        if j >= chars.len() || !chars[j].1.is_whitespace() {
            i = j.max(i + 1);
            continue;
        }
        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        if k >= chars.len() {
            break;
        }
        let mut probe = k;
        while probe < chars.len() && OPENERS.contains(&chars[probe].1) {
            probe += 1;
        }
        let starts_sentence = probe < chars.len()
            && (chars[probe].1.is_uppercase() || chars[probe].1.is_ascii_digit());
        let blank_line = chars[j..k].iter().filter(|&&(_, ch)| ch == '\n').count() >= 2;
        if blank_line || (starts_sentence && !(c == '.' && guarded_word(text, &chars, start, i))) {
            push_trimmed(&mut out, &text[start..end_byte]);
            start = chars[k].0;
        }
        i = k;
    }
    push_trimmed(&mut out, &text[start.min(text.len())..]);
    out
}

fn byte_at(chars: &[(usize, char)], idx: usize, len: usize) -> usize {
    chars.get(idx).map(|&(b, _)| b).unwrap_or(len)
}

fn push_trimmed(out: &mut Vec<String>, piece: &str) {
    let trimmed = piece.trim();
    if !trimmed.is_empty() {
        out.push(trimmed.to_string());
    }
}

/// Whether the word ending at the period `chars[dot]` is an abbreviation,
/// an initial, or part of a URL.
fn guarded_word(text: &str, chars: &[(usize, char)], start: usize, dot: usize) -> bool {
    let mut b = dot;
    while b > 0 && !chars[b - 1].1.is_whitespace() && chars[b - 1].0 >= start {
        b -= 1;
    }
    let word = &text[chars[b].0..chars[dot].0];
    let word = word.trim_start_matches(|c: char| OPENERS.contains(&c));
    if word.contains("://") || word.starts_with("www.") {
        return true;
    }
    let lower = word.to_lowercase();
    if ABBREVIATIONS.contains(&lower.as_str()) {
        return true;
    }
    let mut letters = word.chars();
    matches!((letters.next(), letters.next()), (Some(ch), None) if ch.is_alphabetic())
}
