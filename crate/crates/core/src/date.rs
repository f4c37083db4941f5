//! Partial calendar dates and the date recognizer for running text.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::latex::{PlainToken, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    Year,
    Month,
    Day,
}

/// A date known to year, month, or day precision.
///
/// Construct through [`DateExpr::year`], [`DateExpr::month`] or
/// [`DateExpr::day`]; they refuse calendar-invalid combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DateExpr {
    pub year: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub month: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub day: Option<u8>,
    pub precision: Precision,
}

impl DateExpr {
    pub fn year(year: i32) -> Self {
        DateExpr {
            year,
            month: None,
            day: None,
            precision: Precision::Year,
        }
    }

    pub fn month(year: i32, month: u8) -> Option<Self> {
        (1..=12).contains(&month).then_some(DateExpr {
            year,
            month: Some(month),
            day: None,
            precision: Precision::Month,
        })
    }

    pub fn day(year: i32, month: u8, day: u8) -> Option<Self> {
        NaiveDate::from_ymd_opt(year, u32::from(month), u32::from(day))?;
        Some(DateExpr {
            year,
            month: Some(month),
            day: Some(day),
            precision: Precision::Day,
        })
    }

    pub fn is_valid(&self) -> bool {
        match (self.month, self.day, self.precision) {
            (None, None, Precision::Year) => true,
            (Some(m), None, Precision::Month) => (1..=12).contains(&m),
            (Some(m), Some(d), Precision::Day) => {
                NaiveDate::from_ymd_opt(self.year, u32::from(m), u32::from(d)).is_some()
            }
            _ => false,
        }
    }

    /// Chronological key; a less precise date sorts before more precise
    /// dates sharing its known components.
    pub fn sort_key(&self) -> (i32, u8, u8) {
        (self.year, self.month.unwrap_or(0), self.day.unwrap_or(0))
    }

    /// `YYYY`, `YYYY-MM` or `YYYY-MM-DD`.
    pub fn iso(&self) -> String {
        match (self.month, self.day) {
            (Some(m), Some(d)) => format!("{:04}-{:02}-{:02}", self.year, m, d),
            (Some(m), None) => format!("{:04}-{:02}", self.year, m),
            _ => format!("{:04}", self.year),
        }
    }
}

impl Ord for DateExpr {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for DateExpr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for DateExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.iso())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid date `{0}`")]
pub struct DateParseError(pub String);

impl FromStr for DateExpr {
    type Err = DateParseError;

    /// Accepts `YYYY`, `YYYY-MM`, `YYYY-MM-DD` (an xsd time suffix is
    /// ignored) and `D.M.YYYY`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || DateParseError(s.to_string());
        let t = s.trim();
        let t = t.split_once('T').map_or(t, |(d, _)| d);
        let num = |p: &str| -> Result<u32, DateParseError> {
            if p.is_empty() || !p.bytes().all(|b| b.is_ascii_digit()) {
                return Err(err());
            }
            p.parse().map_err(|_| err())
        };
        if t.contains('.') {
            let parts: Vec<_> = t.split('.').collect();
            if parts.len() != 3 {
                return Err(err());
            }
            let (d, m, y) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            return to_day(y, m, d).ok_or_else(err);
        }
        let parts: Vec<_> = t.split('-').collect();
        match parts.as_slice() {
            [y] if y.len() >= 3 => Ok(DateExpr::year(num(y)? as i32)),
            [y, m] if y.len() >= 3 => DateExpr::month(num(y)? as i32, u8::try_from(num(m)?).map_err(|_| err())?).ok_or_else(err),
            [y, m, d] if y.len() >= 3 => to_day(num(y)?, num(m)?, num(d)?).ok_or_else(err),
            _ => Err(err()),
        }
    }
}

fn to_day(y: u32, m: u32, d: u32) -> Option<DateExpr> {
    DateExpr::day(i32::try_from(y).ok()?, u8::try_from(m).ok()?, u8::try_from(d).ok()?)
}

/// A recognized date and the token range it covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DateMatch {
    pub tokens: Range<usize>,
    pub date: DateExpr,
}

const MONTHS: &[(&str, u8)] = &[
    ("januar", 1), ("jänner", 1), ("january", 1), ("jan", 1), ("janr", 1),
    ("februar", 2), ("feber", 2), ("february", 2), ("feb", 2), ("febr", 2),
    ("märz", 3), ("maerz", 3), ("march", 3), ("mrz", 3), ("mart", 3),
    ("april", 4), ("apr", 4),
    ("mai", 5), ("may", 5),
    ("juni", 6), ("june", 6), ("jun", 6),
    ("juli", 7), ("july", 7), ("jul", 7),
    ("august", 8), ("aug", 8),
    ("september", 9), ("sept", 9), ("sep", 9), ("7ber", 9), ("7bre", 9), ("7bris", 9),
    ("oktober", 10), ("october", 10), ("okt", 10), ("oct", 10), ("8ber", 10), ("8bre", 10), ("8bris", 10),
    ("november", 11), ("nov", 11), ("9ber", 11), ("9bre", 11), ("9bris", 11),
    ("dezember", 12), ("december", 12), ("dez", 12), ("dec", 12), ("10ber", 12), ("10bre", 12), ("xber", 12), ("xbre", 12), ("xbris", 12),
];

fn month_name(word: &str) -> Option<u8> {
    let lower = word.to_lowercase();
    MONTHS.iter().find(|(n, _)| *n == lower).map(|&(_, m)| m)
}

fn small_number(tok: &PlainToken, max: u32) -> Option<u32> {
    if tok.kind != TokenKind::Word || tok.text.len() > 2 || !tok.text.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let n: u32 = tok.text.parse().ok()?;
    (1..=max).contains(&n).then_some(n)
}

fn year_number(tok: &PlainToken) -> Option<i32> {
    if tok.kind != TokenKind::Word || tok.text.len() != 4 || !tok.text.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let n: i32 = tok.text.parse().ok()?;
    (1000..=2099).contains(&n).then_some(n)
}

fn is_dot(tok: Option<&PlainToken>) -> bool {
    tok.is_some_and(|t| t.kind == TokenKind::Punctuation && t.text == ".")
}

/// Recognizes dates in a token stream.
///
/// Forms, tried longest first at each position:
/// `3. Mai 1776`, `3 Mai 1776`, `3.5.1776` (day precision), `Mai 1776`
/// (month precision), and bare years 1000–2099. Ranges are maximal and
/// non-overlapping. A day form that is structurally complete but not a
/// real calendar day (`31. Februar 1776`) consumes its tokens without
/// producing a date.
pub fn parse_dates(tokens: &[PlainToken]) -> Vec<DateMatch> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if let Some((end, date)) = match_at(tokens, i) {
            if let Some(date) = date {
                out.push(DateMatch { tokens: i..end, date });
            }
            i = end;
        } else {
            i += 1;
        }
    }
    out
}

/// End of the match at `i` and the date, `None` for a calendar-invalid day form.
fn match_at(t: &[PlainToken], i: usize) -> Option<(usize, Option<DateExpr>)> {
    if let Some(day) = small_number(&t[i], 31) {
        let mut j = i + 1;
        let dotted = is_dot(t.get(j));
        if dotted {
            j += 1;
        }
        if let Some(tok) = t.get(j) {
            if let Some(month) = tok.kind.eq(&TokenKind::Word).then(|| month_name(&tok.text)).flatten() {
                let mut k = j + 1;
                if is_dot(t.get(k)) && t.get(k + 1).is_some_and(|y| year_number(y).is_some()) {
                    k += 1;
                }
                if let Some(year) = t.get(k).and_then(year_number) {
                    return Some((k + 1, DateExpr::day(year, month, day as u8)));
                }
            } else if dotted {
                if let Some(month) = small_number(tok, 12) {
                    if is_dot(t.get(j + 1)) {
                        if let Some(year) = t.get(j + 2).and_then(year_number) {
                            return Some((j + 3, DateExpr::day(year, month as u8, day as u8)));
                        }
                    }
                }
            }
        }
    }
    if t[i].kind == TokenKind::Word {
        if let Some(month) = month_name(&t[i].text) {
            let mut k = i + 1;
            if is_dot(t.get(k)) && t.get(k + 1).is_some_and(|y| year_number(y).is_some()) {
                k += 1;
            }
            if let Some(year) = t.get(k).and_then(year_number) {
                return Some((k + 1, DateExpr::month(year, month)));
            }
        }
    }
    year_number(&t[i]).map(|y| (i + 1, Some(DateExpr::year(y))))
}

/// Convenience wrapper: tokenizes plain `text` and recognizes dates in it.
pub fn parse_dates_in_text(text: &str) -> (Vec<PlainToken>, Vec<DateMatch>) {
    let reg = crate::latex::CommandRegistry::empty();
    let items = crate::latex::parse(text, &reg).unwrap_or_default();
    let tokens = crate::latex::project(&items, &reg).tokens;
    let dates = parse_dates(&tokens);
    (tokens, dates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dates(text: &str) -> Vec<DateExpr> {
        parse_dates_in_text(text).1.into_iter().map(|m| m.date).collect()
    }

    #[test]
    fn day_month_name_year() {
        assert_eq!(dates("3. Mai 1776"), vec![DateExpr::day(1776, 5, 3).unwrap()]);
        let (toks, m) = parse_dates_in_text("am 3. Mai 1776 schrieb");
        assert_eq!(m[0].tokens, 1..5);
        assert_eq!(toks[m[0].tokens.end].text, "schrieb");
    }

    #[test]
    fn bare_year() {
        let (toks, m) = parse_dates_in_text("im Jahre 1720");
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].date, DateExpr::year(1720));
        assert_eq!(toks[m[0].tokens.start].text, "1720");
    }

    #[test]
    fn calendar_invalid_is_not_a_date() {
        assert!(dates("31. Februar 1776").is_empty());
        assert!(dates("30.2.1776").is_empty());
        assert_eq!(dates("29. Februar 1776"), vec![DateExpr::day(1776, 2, 29).unwrap()]);
        assert!(dates("29. Februar 1775").is_empty());
    }

    #[test]
    fn other_forms() {
        assert_eq!(dates("3.5.1776"), vec![DateExpr::day(1776, 5, 3).unwrap()]);
        assert_eq!(dates("im Mai 1776"), vec![DateExpr::month(1776, 5).unwrap()]);
        assert_eq!(dates("d. 12 7bre 1771"), vec![DateExpr::day(1771, 9, 12).unwrap()]);
        assert_eq!(dates("den 2. Sept. 1760"), vec![DateExpr::day(1760, 9, 2).unwrap()]);
        assert_eq!(dates("1720 und 1779"), vec![DateExpr::year(1720), DateExpr::year(1779)]);
        assert!(dates("999 Taler, 2100 Gulden, 3 Mai").is_empty());
    }

    #[test]
    fn from_str_forms() {
        assert_eq!("1776".parse::<DateExpr>().unwrap(), DateExpr::year(1776));
        assert_eq!("1776-05".parse::<DateExpr>().unwrap(), DateExpr::month(1776, 5).unwrap());
        assert_eq!("1776-05-03T00:00:00".parse::<DateExpr>().unwrap(), DateExpr::day(1776, 5, 3).unwrap());
        assert_eq!("3.5.1776".parse::<DateExpr>().unwrap(), DateExpr::day(1776, 5, 3).unwrap());
        assert!("17??".parse::<DateExpr>().is_err());
        assert!("1776-13".parse::<DateExpr>().is_err());
        assert!("1775-02-29".parse::<DateExpr>().is_err());
    }

    #[test]
    fn ordering_by_known_components() {
        let mut v = vec![DateExpr::day(1776, 5, 3).unwrap(), DateExpr::year(1776), DateExpr::month(1776, 5).unwrap(), DateExpr::year(1775)];
        v.sort();
        assert_eq!(v.iter().map(|d| d.iso()).collect::<Vec<_>>(), vec!["1775", "1776", "1776-05", "1776-05-03"]);
    }

    proptest! {
        #[test]
        fn never_emits_invalid_dates(parts in prop::collection::vec((0u32..40, prop::sample::select(vec![".", " ", ". "])), 1..8)) {
            let text: String = parts.iter().map(|(n, sep)| format!("{n}{sep}")).collect::<String>()
                + &parts.iter().map(|(n, _)| format!("{}", 1000 + n * 37)).collect::<Vec<_>>().join(".");
            for d in dates(&text) {
                prop_assert!(d.is_valid(), "{d:?} from {text}");
            }
        }

        #[test]
        fn numeric_day_forms_are_valid(d in 0u32..35, m in 0u32..14, y in 990i32..2110) {
            for date in dates(&format!("{d}.{m}.{y}")) {
                prop_assert!(date.is_valid());
            }
        }
    }
}
