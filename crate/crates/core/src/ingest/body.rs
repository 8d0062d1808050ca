use std::collections::{BTreeMap, BTreeSet};

/// Mentions, references and length extracted from an issue/PR/comment body.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParsedBody {
    pub mentions: Vec<String>,
    pub references: u64,
    pub body_length: u64,
}

const DEFAULT_WEB_HOST: &str = "github.com";
const MAX_LOGIN_LEN: usize = 39;

/// Parse a body against the set of logins known in the project.
///
/// A mention is `@login` delimited by word boundaries whose login is in
/// `known_logins` (case-insensitive; reported in the known spelling).
/// References count `#<digits>` tokens plus issue/PR URLs on the same web host.
/// Length is the number of characters in the raw body.
pub fn parse_body(body: &str, known_logins: &BTreeSet<String>) -> ParsedBody {
    let mut parsed = parse_raw(body, DEFAULT_WEB_HOST);
    let known = known_index(known_logins.iter().map(String::as_str));
    parsed.mentions = resolve_mentions(&parsed.mentions, &known);
    parsed
}

pub(crate) fn parse_raw(body: &str, web_host: &str) -> ParsedBody {
    ParsedBody {
        mentions: mention_candidates(body),
        references: count_hash_refs(body) + count_url_refs(body, web_host),
        body_length: body.chars().count() as u64,
    }
}

/// Lowercased login -> canonical spelling.
pub(crate) fn known_index<'a>(
    logins: impl IntoIterator<Item = &'a str>,
) -> BTreeMap<String, String> {
    logins
        .into_iter()
        .map(|l| (l.to_lowercase(), l.to_string()))
        .collect()
}

/// Keep candidates that name a known login, mapped to its canonical spelling.
pub fn resolve_mentions(candidates: &[String], known: &BTreeMap<String, String>) -> Vec<String> {
    candidates
        .iter()
        .filter_map(|c| known.get(&c.to_lowercase()).cloned())
        .collect()
}

fn is_login_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '-'
}

/// Every word-boundary `@login` token, in order of appearance.
pub fn mention_candidates(body: &str) -> Vec<String> {
    let chars: Vec<char> = body.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] != '@' {
            i += 1;
            continue;
        }
        let boundary_before = i == 0 || {
            let p = chars[i - 1];
            !(p.is_alphanumeric() || matches!(p, '_' | '-' | '.' | '@' | '/' | '`'))
        };
        let start = i + 1;
        let mut end = start;
        while end < chars.len() && is_login_char(chars[end]) {
            end += 1;
        }
        i = end.max(start);
        if !boundary_before || end == start || !chars[start].is_ascii_alphanumeric() {
            continue;
        }
        // An underscore or another '@' right after means this is not a login token.
        if end < chars.len() && matches!(chars[end], '_' | '@') {
            continue;
        }
        let login: String = chars[start..end].iter().collect();
        let login = login.trim_end_matches('-');
        if login.len() <= MAX_LOGIN_LEN {
            out.push(login.to_string());
        }
    }
    out
}

fn is_repo_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.')
}

/// `#123` and `owner/repo#123` tokens.
fn count_hash_refs(body: &str) -> u64 {
    let chars: Vec<char> = body.chars().collect();
    let mut count = 0;
    for (i, &c) in chars.iter().enumerate() {
        if c != '#' {
            continue;
        }
        let mut end = i + 1;
        while end < chars.len() && chars[end].is_ascii_digit() {
            end += 1;
        }
        if end == i + 1
            || (end < chars.len() && (chars[end].is_alphanumeric() || chars[end] == '_'))
        {
            continue;
        }
        let ok_before = if i == 0 {
            true
        } else {
            let p = chars[i - 1];
            if p.is_alphanumeric() || p == '_' || p == '.' || p == '-' {
                preceded_by_repo_slug(&chars[..i])
            } else {
                p != '&' && p != '/'
            }
        };
        if ok_before {
            count += 1;
        }
    }
    count
}

/// Whether the text ends with `owner/repo` (the token before a cross-repo `#N`).
fn preceded_by_repo_slug(before: &[char]) -> bool {
    let mut j = before.len();
    while j > 0 && is_repo_char(before[j - 1]) {
        j -= 1;
    }
    let repo_len = before.len() - j;
    if repo_len == 0 || j == 0 || before[j - 1] != '/' {
        return false;
    }
    let slash = j - 1;
    let mut k = slash;
    while k > 0 && is_repo_char(before[k - 1]) {
        k -= 1;
    }
    let owner_ok = slash > k;
    let boundary =
        k == 0 || before[k - 1].is_whitespace() || matches!(before[k - 1], '(' | '[' | ',');
    owner_ok && boundary
}

/// `http(s)://<host>/<owner>/<repo>/(issues|pull)/<digits>` occurrences.
fn count_url_refs(body: &str, host: &str) -> u64 {
    let mut count = 0;
    for scheme in ["https://", "http://"] {
        let needle = format!("{scheme}{host}/");
        let mut rest = body;
        while let Some(pos) = rest.find(&needle) {
            let tail = &rest[pos + needle.len()..];
            if is_issue_path(tail) {
                count += 1;
            }
            rest = tail;
        }
    }
    count
}

fn is_issue_path(tail: &str) -> bool {
    let mut parts = tail.splitn(4, '/');
    let (Some(owner), Some(repo), Some(kind), Some(rest)) =
        (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return false;
    };
    let slug_ok = |s: &str| !s.is_empty() && s.chars().all(is_repo_char);
    if !slug_ok(owner) || !slug_ok(repo) || !matches!(kind, "issues" | "pull") {
        return false;
    }
    let digits = rest.chars().take_while(char::is_ascii_digit).count();
    digits > 0
        && rest[digits..]
            .chars()
            .next()
            .is_none_or(|c| !(c.is_alphanumeric() || c == '_'))
}
