use super::record::Address;
use crate::error::{Error, Result};

/// Extracts the addr-spec from `Name <local@domain>` or bare forms and
/// case-folds it.
pub fn normalize_address(raw: &str) -> Result<Address> {
    let trimmed = raw.trim();
    let invalid = || Error::InvalidAddress(raw.to_string());

    let (spec, display) = match (trimmed.rfind('<'), trimmed.rfind('>')) {
        (Some(open), Some(close)) if open < close && trimmed[open..close].contains('@') => {
            let display = unquote(trimmed[..open].trim());
            (&trimmed[open + 1..close], display)
        }
        _ => {
            let without_comments = strip_comments(trimmed);
            let token = without_comments
                .split_whitespace()
                .find(|t| t.contains('@'))
                .ok_or_else(invalid)?
                .to_string();
            let canonical = clean_spec(&token).ok_or_else(invalid)?;
            return Ok(Address {
                canonical,
                display_name: None,
            });
        }
    };

    let canonical = clean_spec(spec).ok_or_else(invalid)?;
    let display_name = display.filter(|d| !d.is_empty() && d.to_lowercase() != canonical);
    Ok(Address {
        canonical,
        display_name,
    })
}

/// Splits a header value such as `a@x.com, "Doe, J" <j@y.com>; c@z.com`
/// into its individual address strings.
pub fn split_address_list(raw: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut in_quotes = false;
    let mut angle_depth = 0usize;
    let mut start = 0;
    for (i, c) in raw.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            '<' if !in_quotes => angle_depth += 1,
            '>' if !in_quotes => angle_depth = angle_depth.saturating_sub(1),
            ',' | ';' if !in_quotes && angle_depth == 0 => {
                parts.push(raw[start..i].trim());
                start = i + c.len_utf8();
            }
            _ => {}
        }
    }
    parts.push(raw[start..].trim());
    parts.retain(|p| !p.is_empty());
    parts
}

/// Normalizes every address in a list header, returning the valid ones.
pub fn parse_address_list(raw: &str) -> Vec<Address> {
    split_address_list(raw)
        .into_iter()
        .filter_map(|part| normalize_address(part).ok())
        .collect()
}

pub(crate) fn is_canonical(s: &str) -> bool {
    clean_spec(s).as_deref() == Some(s)
}

fn clean_spec(spec: &str) -> Option<String> {
    let spec = spec
        .trim()
        .trim_matches(|c: char| matches!(c, '<' | '>' | '"' | '\'' | ',' | ';' | ':'))
        .trim()
        .to_lowercase();
    let (local, domain) = spec.split_once('@')?;
    let valid = !local.is_empty()
        && !domain.is_empty()
        && !domain.contains('@')
        && !spec.chars().any(|c| {
            c.is_whitespace() || c.is_control() || matches!(c, '<' | '>' | '(' | ')' | ',')
        });
    valid.then_some(spec)
}

fn unquote(s: &str) -> Option<String> {
    let s = s.trim().trim_matches('"').trim_matches('\'').trim();
    (!s.is_empty()).then(|| s.to_string())
}

fn strip_comments(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut depth = 0usize;
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' if depth > 0 => depth -= 1,
            _ if depth == 0 => out.push(c),
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn display_name_form_is_case_folded() {
        let a = normalize_address("Shivani <SHIVANI@Gmail.com>").unwrap();
        assert_eq!(a.canonical, "shivani@gmail.com");
        assert_eq!(a.display_name.as_deref(), Some("Shivani"));
    }

    #[test]
    fn bare_form_has_no_display_name() {
        let a = normalize_address("a@b.com").unwrap();
        assert_eq!(a.canonical, "a@b.com");
        assert_eq!(a.display_name, None);
    }

    #[test]
    fn missing_at_sign_is_invalid() {
        assert!(matches!(
            normalize_address("no-at-sign"),
            Err(Error::InvalidAddress(_))
        ));
        assert!(normalize_address("not-an-address").is_err());
        assert!(normalize_address("").is_err());
        assert!(normalize_address("a@b@c").is_err());
    }

    #[test]
    fn quoted_names_and_comments() {
        let a = normalize_address("\"Doe, John\" <JDoe@Example.ORG>").unwrap();
        assert_eq!(a.canonical, "jdoe@example.org");
        assert_eq!(a.display_name.as_deref(), Some("Doe, John"));

        let b = normalize_address("  jdoe@example.org (John Doe) ").unwrap();
        assert_eq!(b.canonical, "jdoe@example.org");
    }

    #[test]
    fn list_splitting_respects_quotes() {
        let parts = split_address_list("a@x.com, \"Doe, J\" <j@y.com>; c@z.com");
        assert_eq!(parts, vec!["a@x.com", "\"Doe, J\" <j@y.com>", "c@z.com"]);
        let addrs = parse_address_list("a@x.com, garbage, B@Y.com");
        assert_eq!(
            addrs.iter().map(|a| a.as_str()).collect::<Vec<_>>(),
            vec!["a@x.com", "b@y.com"]
        );
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(raw in "[ A-Za-z<>\"@._-]{0,24}") {
            if let Ok(first) = normalize_address(&raw) {
                let second = normalize_address(&first.canonical).unwrap();
                prop_assert_eq!(&second, &first);
                prop_assert_eq!(second.canonical, first.canonical.clone());
                prop_assert!(is_canonical(&first.canonical));
            }
        }
    }
}
