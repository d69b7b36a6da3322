// SPDX-License-Identifier: Apache-2.0

//! Plain-text hierarchical key-value files.
//!
//! Tech-model, architecture and scenario files share this grammar:
//!
//! ```text
//! # comment to end of line
//! key = value            # entries before any header live in the root section
//! [section.sub]          # dotted section names express hierarchy
//! delay = 124.3 ps       # numeric values may carry a unit suffix
//! ```
//!
//! Values are kept as raw strings; typed accessors convert them and report
//! the line of the offending entry on failure.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KvError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: key `{key}`: {msg}")]
    Value { line: usize, key: String, msg: String },
    #[error("missing key `{key}` in section [{section}]")]
    Missing { section: String, key: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    /// Dotted section name; the root section has an empty name.
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Document {
    pub sections: Vec<Section>,
}

impl Document {
    pub fn parse(text: &str) -> Result<Self, KvError> {
        let mut sections = vec![Section {
            name: String::new(),
            line: 0,
            entries: Vec::new(),
        }];
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = strip_comment(raw).trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| KvError::Syntax {
                    line,
                    msg: "unterminated section header".into(),
                })?;
                let name = name.trim();
                if name.is_empty() || !name.split('.').all(valid_ident) {
                    return Err(KvError::Syntax {
                        line,
                        msg: format!("invalid section name `{name}`"),
                    });
                }
                if sections.iter().any(|s| s.name == name) {
                    return Err(KvError::Syntax {
                        line,
                        msg: format!("duplicate section [{name}]"),
                    });
                }
                sections.push(Section {
                    name: name.to_string(),
                    line,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| KvError::Syntax {
                line,
                msg: format!("expected `key = value`, found `{content}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if !valid_ident(key) {
                return Err(KvError::Syntax {
                    line,
                    msg: format!("invalid key `{key}`"),
                });
            }
            if value.is_empty() {
                return Err(KvError::Syntax {
                    line,
                    msg: format!("empty value for `{key}`"),
                });
            }
            let section = sections.last_mut().expect("root section always present");
            if section.entries.iter().any(|e| e.key == key) {
                return Err(KvError::Syntax {
                    line,
                    msg: format!("duplicate key `{key}`"),
                });
            }
            section.entries.push(Entry {
                key: key.to_string(),
                value: value.to_string(),
                line,
            });
        }
        Ok(Document { sections })
    }

    pub fn root(&self) -> &Section {
        &self.sections[0]
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    /// Sections whose name starts with `prefix.`, in file order.
    pub fn children<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a Section)> {
        self.sections.iter().filter_map(move |s| {
            s.name
                .strip_prefix(prefix)
                .and_then(|rest| rest.strip_prefix('.'))
                .map(|rest| (rest, s))
        })
    }
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn require(&self, key: &str) -> Result<&Entry, KvError> {
        self.get(key).ok_or_else(|| KvError::Missing {
            section: self.name.clone(),
            key: key.to_string(),
        })
    }

    /// Dotted path of `key` inside this section, for error messages.
    pub fn path(&self, key: &str) -> String {
        if self.name.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.name)
        }
    }
}

impl Entry {
    fn err(&self, msg: impl Into<String>) -> KvError {
        KvError::Value {
            line: self.line,
            key: self.key.clone(),
            msg: msg.into(),
        }
    }

    pub fn quantity(&self, dim: Dimension) -> Result<f64, KvError> {
        parse_quantity(&self.value, dim).map_err(|m| self.err(m))
    }

    pub fn parse<T: FromStr>(&self) -> Result<T, KvError> {
        self.value
            .parse()
            .map_err(|_| self.err(format!("cannot parse `{}`", self.value)))
    }

    pub fn boolean(&self) -> Result<bool, KvError> {
        match self.value.to_ascii_lowercase().as_str() {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            other => Err(self.err(format!("expected a boolean, found `{other}`"))),
        }
    }

    pub fn list(&self) -> Vec<String> {
        self.value
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect()
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn valid_ident(s: &str) -> bool {
    !s.is_empty()
        && s
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// Physical dimension expected by a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Dimensionless,
    Area,
    Time,
    Power,
    Voltage,
    Resistance,
    Bits,
    BitRate,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Dimensionless => "dimensionless",
            Dimension::Area => "area (λ²)",
            Dimension::Time => "time (s)",
            Dimension::Power => "power (W)",
            Dimension::Voltage => "voltage (V)",
            Dimension::Resistance => "resistance (Ω)",
            Dimension::Bits => "bits (b)",
            Dimension::BitRate => "bit rate (b/s)",
        };
        f.write_str(s)
    }
}

/// Dimension and decimal exponent of a unit.
fn unit_scale(unit: &str) -> Option<(Dimension, i32)> {
    use Dimension::*;
    let u = match unit {
        "λ²" | "λ^2" | "lambda2" | "lambda^2" | "L2" => (Area, 0),
        "s" => (Time, 0),
        "ms" => (Time, -3),
        "us" | "µs" | "μs" => (Time, -6),
        "ns" => (Time, -9),
        "ps" => (Time, -12),
        "fs" => (Time, -15),
        "W" => (Power, 0),
        "mW" => (Power, -3),
        "uW" | "µW" | "μW" => (Power, -6),
        "nW" => (Power, -9),
        "V" => (Voltage, 0),
        "mV" => (Voltage, -3),
        "ohm" | "Ω" => (Resistance, 0),
        "kohm" | "kΩ" => (Resistance, 3),
        "Mohm" | "MΩ" => (Resistance, 6),
        "b" | "bit" | "bits" => (Bits, 0),
        "kb" => (Bits, 3),
        "Mb" => (Bits, 6),
        "Gb" => (Bits, 9),
        "b/s" | "bps" => (BitRate, 0),
        "kb/s" => (BitRate, 3),
        "Mb/s" => (BitRate, 6),
        "Gb/s" => (BitRate, 9),
        _ => return None,
    };
    Some(u)
}

/// Parses `<number>[ ]<unit>` into SI base units for `dim`.
///
/// A bare number is accepted for every dimension and taken as already in
/// base units (λ², s, W, V, Ω, bits, bits/s).
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, String> {
    let text = text.trim();
    let split = text
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || c == '+'
                || c == '-'
                || ((c == 'e' || c == 'E') && i > 0 && next_is_exponent(&text[i + 1..])))
        })
        .map(|(i, _)| i)
        .unwrap_or(text.len());
    let (num, unit) = text.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("`{text}` is not a number"))?;
    if !value.is_finite() {
        return Err(format!("`{text}` is not finite"));
    }
    let unit = unit.trim();
    if unit.is_empty() {
        return Ok(value);
    }
    match unit_scale(unit) {
        Some((d, exp)) if d == dim => Ok(scaled(num.trim(), exp).unwrap_or(value)),
        Some((d, _)) => Err(format!("unit `{unit}` is {d}, expected {dim}")),
        None => Err(format!("unknown unit `{unit}`")),
    }
}

/// Re-parses `num` shifted by `exp` decades so the result is the double
/// nearest the written decimal value.
fn scaled(num: &str, exp: i32) -> Option<f64> {
    let (mantissa, e) = match num.find(['e', 'E']) {
        Some(i) => (&num[..i], num[i + 1..].parse::<i32>().ok()?),
        None => (num, 0),
    };
    format!("{mantissa}e{}", e + exp).parse().ok()
}

fn next_is_exponent(rest: &str) -> bool {
    let mut chars = rest.chars();
    match chars.next() {
        Some(c) if c.is_ascii_digit() => true,
        Some('+') | Some('-') => chars.next().is_some_and(|c| c.is_ascii_digit()),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_entries() {
        let doc = Document::parse(
            "name = SRAM # trailing\n\n[LUT6.single]\ndelay = 124.3 ps\npower=13.1µW\n",
        )
        .unwrap();
        assert_eq!(doc.root().get("name").unwrap().value, "SRAM");
        let s = doc.section("LUT6.single").unwrap();
        assert_eq!(s.line, 3);
        let d = s.get("delay").unwrap().quantity(Dimension::Time).unwrap();
        assert_eq!(d, 124.3e-12);
        let p = s.get("power").unwrap().quantity(Dimension::Power).unwrap();
        assert_eq!(p, 13.1e-6);
        assert_eq!(doc.children("LUT6").count(), 1);
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = Document::parse("a = 1\n\nbogus line\n").unwrap_err();
        assert_eq!(
            err,
            KvError::Syntax {
                line: 3,
                msg: "expected `key = value`, found `bogus line`".into()
            }
        );
        assert!(matches!(
            Document::parse("[x\n"),
            Err(KvError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            Document::parse("a = 1\na = 2\n"),
            Err(KvError::Syntax { line: 2, .. })
        ));
    }

    #[test]
    fn quantities_check_dimension() {
        assert_eq!(parse_quantity("3.2 Gb/s", Dimension::BitRate), Ok(3.2e9));
        assert_eq!(parse_quantity("1e-9", Dimension::Time), Ok(1e-9));
        assert_eq!(parse_quantity("-4V", Dimension::Voltage), Ok(-4.0));
        assert_eq!(parse_quantity("375 λ²", Dimension::Area), Ok(375.0));
        assert!(parse_quantity("3 ns", Dimension::Power).is_err());
        assert!(parse_quantity("3 furlongs", Dimension::Time).is_err());
        assert!(parse_quantity("abc", Dimension::Time).is_err());
    }
}
