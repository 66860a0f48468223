/// Text after case folding and punctuation/whitespace collapsing, with a map
/// from every normalized byte back to the original text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedText {
    text: String,
    // original byte range of the char that produced each normalized byte
    origin: Vec<(usize, usize)>,
}

impl NormalizedText {
    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn len(&self) -> usize {
        self.text.len()
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }

    /// Maps a normalized byte span `[start, end)` to the original byte span.
    pub fn original_span(&self, start: usize, end: usize) -> (usize, usize) {
        debug_assert!(start < end && end <= self.text.len());
        (self.origin[start].0, self.origin[end - 1].1)
    }

    /// Whitespace-separated tokens of the normalized text.
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.text.split(' ').filter(|t| !t.is_empty())
    }
}

/// Single-char lowercase mapping; characters whose lowercase form expands
/// to several chars are kept unchanged, as under simple case folding.
pub(crate) fn fold_char(c: char) -> char {
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

fn is_separator(c: char) -> bool {
    !c.is_alphanumeric()
}

/// Lowercases, turns punctuation into spaces, collapses whitespace runs and
/// trims both ends.
pub fn normalize_text(text: &str) -> NormalizedText {
    let mut out = String::with_capacity(text.len());
    let mut origin = Vec::with_capacity(text.len());
    let mut pending_space: Option<(usize, usize)> = None;
    for (i, c) in text.char_indices() {
        let span = (i, i + c.len_utf8());
        if is_separator(c) {
            if pending_space.is_none() && !out.is_empty() {
                pending_space = Some(span);
            }
            continue;
        }
        if let Some(space) = pending_space.take() {
            out.push(' ');
            origin.push(space);
        }
        let folded = fold_char(c);
        out.push(folded);
        origin.extend(std::iter::repeat_n(span, folded.len_utf8()));
    }
    NormalizedText { text: out, origin }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(normalize_text("Climate   CHANGE!").as_str(), "climate change");
        assert_eq!(normalize_text("").as_str(), "");
        assert_eq!(normalize_text("CO2-emissions").as_str(), "co2 emissions");
        assert_eq!(normalize_text("  \t\n--  ").as_str(), "");
        assert_eq!(normalize_text("Title\nbody text.").as_str(), "title body text");
    }

    #[test]
    fn offsets_map_back_to_original() {
        let src = "  Ørsted's  WIND-farm";
        let n = normalize_text(src);
        assert_eq!(n.as_str(), "ørsted s wind farm");
        let start = n.as_str().find("wind farm").unwrap();
        let (a, b) = n.original_span(start, start + "wind farm".len());
        assert_eq!(&src[a..b], "WIND-farm");
        let (a, b) = n.original_span(0, "ørsted".len());
        assert_eq!(&src[a..b], "Ørsted");
    }

    #[test]
    fn multi_char_lowercase_is_left_alone() {
        // U+0130 lowercases to two chars
        assert_eq!(normalize_text("İzmir").as_str(), "İzmir");
        assert_eq!(normalize_text("ÉTÉ").as_str(), "été");
    }
}
