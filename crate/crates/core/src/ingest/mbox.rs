//! mbox and RFC 5322 message parsing.

use std::io::Read;

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, Utc};
use mailparse::{MailHeaderMap, ParsedMail};

use super::address::{normalize_address, parse_address_list};
use super::record::{DocId, EmailRecord, SourceFormat};
use super::ParseOutcome;
use crate::error::{Error, Result};

/// Parses an mbox stream: messages are delimited by `From ` postmark lines.
pub fn parse_mbox<R: Read>(mut stream: R) -> Result<ParseOutcome> {
    let mut bytes = Vec::new();
    stream
        .read_to_end(&mut bytes)
        .map_err(|e| Error::UnreadableStream(e.to_string()))?;

    let mut outcome = ParseOutcome::default();
    for message in split_mbox(&bytes) {
        match parse_message(&message, SourceFormat::Mbox) {
            Some(mut record) => {
                record.doc_id = DocId(outcome.records.len() as u32 + 1);
                outcome.records.push(record);
            }
            None => outcome.skipped += 1,
        }
    }
    outcome.non_empty()
}

/// Parses a single RFC 5322 message.
pub fn parse_eml<R: Read>(mut stream: R) -> Result<ParseOutcome> {
    let mut bytes = Vec::new();
    stream
        .read_to_end(&mut bytes)
        .map_err(|e| Error::UnreadableStream(e.to_string()))?;
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Err(Error::EmptyCorpus);
    }
    let mut outcome = ParseOutcome::default();
    match parse_message(&bytes, SourceFormat::Eml) {
        Some(record) => outcome.records.push(record),
        None => outcome.skipped += 1,
    }
    outcome.non_empty()
}

/// Splits raw mbox bytes into message byte-buffers, undoing `>From ` quoting.
pub(crate) fn split_mbox(bytes: &[u8]) -> Vec<Vec<u8>> {
    let mut messages = Vec::new();
    let mut current: Vec<u8> = Vec::new();
    let mut seen_postmark = false;
    let mut prev_blank = true;

    for line in bytes.split_inclusive(|&b| b == b'\n') {
        let content = trim_eol(line);
        if content.starts_with(b"From ") && (prev_blank || looks_like_postmark(content)) {
            if seen_postmark || !is_blank(&current) {
                messages.push(std::mem::take(&mut current));
            }
            current.clear();
            seen_postmark = true;
            prev_blank = false;
            continue;
        }
        prev_blank = content.iter().all(u8::is_ascii_whitespace);
        let unquoted = unquote_from(line);
        current.extend_from_slice(unquoted);
    }
    if seen_postmark || !is_blank(&current) {
        messages.push(current);
    }
    messages.retain(|m| !is_blank(m));
    messages
}

fn trim_eol(line: &[u8]) -> &[u8] {
    let line = line.strip_suffix(b"\n").unwrap_or(line);
    line.strip_suffix(b"\r").unwrap_or(line)
}

fn is_blank(bytes: &[u8]) -> bool {
    bytes.iter().all(u8::is_ascii_whitespace)
}

// `From sender Wed Oct 30 21:41:56 2002`: the last token is a 4-digit year.
fn looks_like_postmark(line: &[u8]) -> bool {
    let text = String::from_utf8_lossy(line);
    let tokens: Vec<&str> = text.split_whitespace().collect();
    tokens.len() >= 3
        && tokens
            .last()
            .is_some_and(|t| t.len() == 4 && t.chars().all(|c| c.is_ascii_digit()))
}

// mboxrd: `>From ` and `>>From ` lose one leading `>`.
fn unquote_from(line: &[u8]) -> &[u8] {
    let depth = line.iter().take_while(|&&b| b == b'>').count();
    if depth > 0 && line[depth..].starts_with(b"From ") {
        &line[1..]
    } else {
        line
    }
}

/// Parses one message. Returns `None` when no usable sender or recipient can
/// be recovered.
pub(crate) fn parse_message(bytes: &[u8], format: SourceFormat) -> Option<EmailRecord> {
    let parsed = mailparse::parse_mail(bytes).ok()?;
    let headers = &parsed.headers;

    let sender = headers
        .get_first_value("From")
        .or_else(|| headers.get_first_value("Sender"))
        .and_then(|raw| normalize_address(&raw).ok())?;

    let mut recipients = Vec::new();
    for name in ["To", "Cc"] {
        for value in headers.get_all_values(name) {
            recipients.extend(parse_address_list(&value));
        }
    }
    if recipients.is_empty() {
        return None;
    }

    let subject = headers
        .get_first_value("Subject")
        .map(|s| collapse_whitespace(&s))
        .unwrap_or_default();
    let timestamp = headers
        .get_first_value("Date")
        .and_then(|raw| parse_date(&raw));
    let body = extract_text(&parsed).trim().to_string();

    Some(EmailRecord {
        doc_id: DocId(1),
        sender,
        recipients,
        subject,
        body,
        timestamp,
        source_format: format,
        synthetic_body: false,
    })
}

/// Lenient RFC 2822 date parsing; unparseable dates yield `None`.
pub fn parse_date(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return None;
    }
    if let Ok(dt) = DateTime::parse_from_rfc2822(raw) {
        return Some(dt.with_timezone(&Utc));
    }
    if let Some(idx) = raw.find('(') {
        if let Ok(dt) = DateTime::parse_from_rfc2822(raw[..idx].trim()) {
            return Some(dt.with_timezone(&Utc));
        }
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(naive.and_utc());
        }
    }
    if let Ok(date) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
        return date.and_hms_opt(0, 0, 0).map(|naive| naive.and_utc());
    }
    let secs = mailparse::dateparse(raw).ok()?;
    let dt = DateTime::from_timestamp(secs, 0)?;
    // dateparse is permissive; keep its answer only if the year is in the text
    raw.contains(&dt.year().to_string()).then_some(dt)
}

fn extract_text(mail: &ParsedMail<'_>) -> String {
    let mut plain = Vec::new();
    let mut html = Vec::new();
    collect_parts(mail, &mut plain, &mut html);
    if !plain.is_empty() {
        plain.join("\n")
    } else if !html.is_empty() {
        strip_html(&html.join("\n"))
    } else {
        String::new()
    }
}

fn collect_parts(mail: &ParsedMail<'_>, plain: &mut Vec<String>, html: &mut Vec<String>) {
    if !mail.subparts.is_empty() {
        for part in &mail.subparts {
            collect_parts(part, plain, html);
        }
        return;
    }
    let disposition = mail.get_content_disposition();
    if disposition.disposition == mailparse::DispositionType::Attachment {
        return;
    }
    let mimetype = mail.ctype.mimetype.to_ascii_lowercase();
    let text = decode_body(mail);
    if mimetype == "text/html" {
        html.push(text);
    } else if mimetype.starts_with("text/") || mimetype.is_empty() {
        plain.push(text);
    }
}

/// Undeclared or ASCII-declared 8-bit bodies are read as UTF-8, replacing
/// invalid sequences with U+FFFD.
fn decode_body(mail: &ParsedMail<'_>) -> String {
    let raw = mail.get_body_raw().unwrap_or_default();
    let charset = mail.ctype.charset.to_ascii_lowercase();
    if !raw.is_ascii() && (charset == "us-ascii" || charset == "ascii") {
        return String::from_utf8_lossy(&raw).into_owned();
    }
    mail.get_body()
        .unwrap_or_else(|_| String::from_utf8_lossy(&raw).into_owned())
}

fn strip_html(html: &str) -> String {
    let mut out = String::with_capacity(html.len());
    let mut in_tag = false;
    for c in html.chars() {
        match c {
            '<' => in_tag = true,
            '>' if in_tag => {
                in_tag = false;
                out.push(' ');
            }
            _ if !in_tag => out.push(c),
            _ => {}
        }
    }
    out.replace("&nbsp;", " ")
        .replace("&amp;", "&")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
