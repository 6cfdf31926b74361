//! Claims files, pick lists and adaptive rule files.

use osd_core::disclosure::{DisclosedClaim, Pick};

/// `name=value` per line; the value is every byte after the first `=`.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_claims(bytes: &[u8]) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = Vec::new();
    for (no, line) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = line.strip_suffix(b"\r").unwrap_or(line);
        if line.is_empty() || line[0] == b'#' {
            continue;
        }
        let eq = line
            .iter()
            .position(|&b| b == b'=')
            .ok_or_else(|| format!("claims line {}: missing '='", no + 1))?;
        let name = std::str::from_utf8(&line[..eq])
            .map_err(|_| format!("claims line {}: name is not UTF-8", no + 1))?;
        out.push((name.trim().to_owned(), line[eq + 1..].to_vec()));
    }
    Ok(out)
}

/// `claim` or `index:claim`.
pub fn parse_pick(s: &str) -> Result<Pick, String> {
    match s.split_once(':') {
        Some((idx, name)) if !idx.is_empty() && idx.bytes().all(|b| b.is_ascii_digit()) => {
            let idx = idx
                .parse()
                .map_err(|_| format!("bad credential index in {s}"))?;
            Ok(Pick::new(idx, name))
        }
        _ => Ok(Pick::new(0, s)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub when: Pick,
    pub prefix: Vec<u8>,
    pub next: Pick,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet {
    pub start: Pick,
    pub rules: Vec<Rule>,
}

/// Lines are `start <claim>` (exactly once) and
/// `if <claim> prefix <hex> then next <claim>`.
pub fn parse_rules(text: &str) -> Result<RuleSet, String> {
    let mut start = None;
    let mut rules = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let words: Vec<&str> = line.split_whitespace().collect();
        let err = || format!("rules line {}: cannot parse {line:?}", no + 1);
        match words.as_slice() {
            [] => {}
            [w, ..] if w.starts_with('#') => {}
            ["start", claim] => {
                if start.replace(parse_pick(claim)?).is_some() {
                    return Err(format!("rules line {}: second start", no + 1));
                }
            }
            ["if", claim, "prefix", hex, "then", "next", next] => rules.push(Rule {
                when: parse_pick(claim)?,
                prefix: hex::decode(hex).map_err(|_| err())?,
                next: parse_pick(next)?,
            }),
            _ => return Err(err()),
        }
    }
    Ok(RuleSet {
        start: start.ok_or("rules file has no start line")?,
        rules,
    })
}

impl RuleSet {
    /// Next pick given everything disclosed so far: the start claim first,
    /// then the first rule matching the latest disclosure.
    pub fn next(&self, so_far: &[DisclosedClaim]) -> Option<Pick> {
        let Some(last) = so_far.last() else {
            return Some(self.start.clone());
        };
        self.rules
            .iter()
            .find(|r| {
                r.when.credential == last.credential
                    && r.when.claim == last.claim
                    && last.value.starts_with(&r.prefix)
            })
            .map(|r| r.next.clone())
    }
}
