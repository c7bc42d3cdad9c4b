//! Backslash escaping applied to free text before it is written into the
//! results table.

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed escape at byte {position}")]
pub struct MalformedEscape {
    pub position: usize,
}

/// `\` becomes `\\`, then `"` becomes `\"`.
pub fn escape_answer_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len() + raw.len() / 8);
    for c in raw.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            c => out.push(c),
        }
    }
    out
}

/// Exact inverse of [`escape_answer_text`]. A backslash must be followed by
/// another backslash or a double quote.
pub fn unescape_answer_text(escaped: &str) -> Result<String, MalformedEscape> {
    let mut out = String::with_capacity(escaped.len());
    let mut chars = escaped.char_indices();
    while let Some((i, c)) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some((_, '\\')) => out.push('\\'),
            Some((_, '"')) => out.push('"'),
            _ => return Err(MalformedEscape { position: i }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(escape_answer_text(r#"say "hi""#), r#"say \"hi\""#);
        assert_eq!(escape_answer_text(""), "");
        assert_eq!(escape_answer_text(r"C:\temp"), r"C:\\temp");
        assert_eq!(escape_answer_text(r#"\""#), r#"\\\""#);
    }

    #[test]
    fn malformed() {
        assert_eq!(unescape_answer_text(r"a\n"), Err(MalformedEscape { position: 1 }));
        assert_eq!(unescape_answer_text("trailing\\"), Err(MalformedEscape { position: 8 }));
        assert_eq!(unescape_answer_text(r#"ok \" \\"#).unwrap(), r#"ok " \"#);
    }

    proptest! {
        #[test]
        fn round_trip(s in any::<String>()) {
            prop_assert_eq!(unescape_answer_text(&escape_answer_text(&s)).unwrap(), s);
        }

        #[test]
        fn escaped_text_has_no_bare_quotes(s in "[a-z\"\\\\ ]{0,30}") {
            let e = escape_answer_text(&s);
            let mut prev_backslashes = 0;
            for c in e.chars() {
                if c == '"' {
                    prop_assert!(prev_backslashes % 2 == 1);
                }
                prev_backslashes = if c == '\\' { prev_backslashes + 1 } else { 0 };
            }
        }
    }
}
