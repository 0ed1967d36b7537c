//! Pulling one SQL statement out of a free-form model reply.
//!
//! Precedence: the first fenced code block with content, else the first
//! `SELECT` keyword followed by text up to a top-level `;`, a blank line,
//! an unmatched `)` or the end of the reply.

/// Returns the statement text, trimmed, or `None` when the reply holds none.
pub fn extract_sql(reply: &str) -> Option<String> {
    fenced(reply).or_else(|| bare_select(reply))
}

fn fenced(reply: &str) -> Option<String> {
    let mut rest = reply;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        // The info string (`sql`, `postgresql`, ...) runs to the end of the line.
        let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
        let body = &after[body_start..];
        let close = body.find("```")?;
        let content = body[..close].trim();
        if !content.is_empty() {
            return Some(content.to_string());
        }
        rest = &body[close + 3..];
    }
    None
}

fn bare_select(reply: &str) -> Option<String> {
    let start = find_keyword(reply, "select")?;
    let text = &reply[start..];
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut in_string = false;
    let mut end = text.len();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if in_string {
            if c == b'\'' {
                if bytes.get(i + 1) == Some(&b'\'') {
                    i += 1;
                } else {
                    in_string = false;
                }
            }
        } else {
            match c {
                b'\'' => in_string = true,
                b'(' => depth += 1,
                b')' if depth == 0 => {
                    end = i;
                    break;
                }
                b')' => depth -= 1,
                b';' if depth == 0 => {
                    end = i + 1;
                    break;
                }
                b'\n' if depth == 0 && text[i + 1..].trim_start_matches([' ', '\t', '\r']).starts_with('\n') => {
                    end = i;
                    break;
                }
                _ => {}
            }
        }
        i += 1;
    }
    let sql = text[..end].trim();
    (!sql.is_empty()).then(|| sql.to_string())
}

/// Byte offset of the first whole-word, case-insensitive occurrence.
fn find_keyword(text: &str, word: &str) -> Option<usize> {
    let lower = text.to_ascii_lowercase();
    let is_word = |b: u8| b.is_ascii_alphanumeric() || b == b'_';
    let mut from = 0;
    while let Some(pos) = lower[from..].find(word) {
        let at = from + pos;
        let before_ok = at == 0 || !is_word(lower.as_bytes()[at - 1]);
        let after = at + word.len();
        let after_ok = after >= lower.len() || !is_word(lower.as_bytes()[after]);
        if before_ok && after_ok {
            return Some(at);
        }
        from = after;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fenced_block_wins() {
        let reply = "Here you go: SELECT 0\n```sql\nSELECT 1 FROM t;\n```\nand ```sql\nSELECT 2\n```";
        assert_eq!(extract_sql(reply).as_deref(), Some("SELECT 1 FROM t;"));
    }

    #[test]
    fn empty_fence_is_skipped() {
        assert_eq!(extract_sql("```\n```\n```sql\nSELECT 3\n```").as_deref(), Some("SELECT 3"));
    }

    #[test]
    fn bare_select_balances_parentheses() {
        let reply = "The query is SELECT COUNT(*) FROM (SELECT 1 FROM t) AS x; which counts rows.";
        assert_eq!(extract_sql(reply).as_deref(), Some("SELECT COUNT(*) FROM (SELECT 1 FROM t) AS x;"));
        // An unmatched close ends the statement.
        assert_eq!(extract_sql("(try select a from b) ok").as_deref(), Some("select a from b"));
    }

    #[test]
    fn bare_select_stops_at_blank_line() {
        let reply = "SELECT a\nFROM t\n\nThis returns every a.";
        assert_eq!(extract_sql(reply).as_deref(), Some("SELECT a\nFROM t"));
    }

    #[test]
    fn strings_do_not_confuse_the_scanner() {
        assert_eq!(extract_sql("SELECT ')' ; x").as_deref(), Some("SELECT ')' ;"));
        assert_eq!(extract_sql("SELECT 'it''s (' AS s").as_deref(), Some("SELECT 'it''s (' AS s"));
    }

    #[test]
    fn no_sql() {
        assert_eq!(extract_sql("I cannot answer that."), None);
        assert_eq!(extract_sql("selection bias is a concern"), None);
    }
}
