//! Reader and writer for the long ("ooTextFile") TextGrid text format.
//!
//! Only interval tiers are kept. Point tiers (`TextTier`) are parsed for
//! well-formedness and then listed in [`TextGrid::skipped_tiers`]. The short
//! text format and the binary format are rejected.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::{self, Write};

use thiserror::Error;

/// Slack on time comparisons, seconds.
pub const TIME_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub xmin: f64,
    pub xmax: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalTier {
    pub name: String,
    pub xmin: f64,
    pub xmax: f64,
    pub intervals: Vec<Interval>,
}

/// A tier that was read but not kept.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedTier {
    pub name: String,
    pub class: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextGrid {
    pub xmin: f64,
    pub xmax: f64,
    pub tiers: Vec<IntervalTier>,
    pub skipped_tiers: Vec<SkippedTier>,
}

impl TextGrid {
    pub fn tier(&self, name: &str) -> Option<&IntervalTier> {
        self.tiers.iter().find(|t| t.name == name)
    }

    /// Structural equality ignoring skipped tiers.
    pub fn same_structure(&self, other: &TextGrid) -> bool {
        self.xmin == other.xmin && self.xmax == other.xmax && self.tiers == other.tiers
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Text(String),
    Raw(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Entry {
    Assign { key: String, value: Value },
    Bare(String),
}

struct Scanner<'a> {
    rest: &'a str,
    line: usize,
}

impl<'a> Scanner<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            rest: text.strip_prefix('\u{feff}').unwrap_or(text),
            line: 0,
        }
    }

    fn take_line(&mut self) -> Option<&'a str> {
        if self.rest.is_empty() {
            return None;
        }
        self.line += 1;
        let (line, rest) = match self.rest.find('\n') {
            Some(i) => (&self.rest[..i], &self.rest[i + 1..]),
            None => (self.rest, ""),
        };
        self.rest = rest;
        Some(line.strip_suffix('\r').unwrap_or(line))
    }

    /// Next non-blank entry and the line it starts on.
    fn next_entry(&mut self) -> Result<Option<(usize, Entry)>, ParseError> {
        loop {
            let Some(raw) = self.take_line() else {
                return Ok(None);
            };
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let start = self.line;
            let eq = line.find('=');
            let quote = line.find('"');
            let entry = match eq {
                Some(i) if quote.is_none_or(|q| i < q) => {
                    let key = line[..i].trim().to_string();
                    let value = line[i + 1..].trim_start();
                    if let Some(body) = value.strip_prefix('"') {
                        Entry::Assign {
                            key,
                            value: Value::Text(self.read_string(body, start)?),
                        }
                    } else {
                        Entry::Assign {
                            key,
                            value: Value::Raw(value.trim().to_string()),
                        }
                    }
                }
                _ => Entry::Bare(line.to_string()),
            };
            return Ok(Some((start, entry)));
        }
    }

    // `body` follows the opening quote; strings may continue on later lines
    // and use "" for a literal quote.
    fn read_string(&mut self, body: &'a str, start: usize) -> Result<String, ParseError> {
        let mut out = String::new();
        let mut current = body;
        loop {
            let mut chars = current.char_indices().peekable();
            while let Some((i, c)) = chars.next() {
                if c != '"' {
                    out.push(c);
                    continue;
                }
                if matches!(chars.peek(), Some((_, '"'))) {
                    chars.next();
                    out.push('"');
                    continue;
                }
                let trailing = current[i + 1..].trim();
                if !trailing.is_empty() {
                    return Err(ParseError::new(
                        self.line,
                        format!("unexpected text after closing quote: '{trailing}'"),
                    ));
                }
                return Ok(out);
            }
            match self.take_line() {
                Some(next) => {
                    out.push('\n');
                    current = next;
                }
                None => return Err(ParseError::new(start, "unterminated string")),
            }
        }
    }
}

struct Parser<'a> {
    scanner: Scanner<'a>,
    last_line: usize,
}

impl<'a> Parser<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, Entry), ParseError> {
        match self.scanner.next_entry()? {
            Some((line, entry)) => {
                self.last_line = line;
                Ok((line, entry))
            }
            None => Err(ParseError::new(
                self.scanner.line.max(1),
                format!("unexpected end of file, expected {what}"),
            )),
        }
    }

    fn expect_assign(&mut self, key: &str) -> Result<(usize, Value), ParseError> {
        let (line, entry) = self.next(&format!("`{key} = ...`"))?;
        match entry {
            Entry::Assign { key: k, value } if k == key => Ok((line, value)),
            Entry::Assign { key: k, .. } => Err(ParseError::new(line, format!("expected `{key}`, found `{k}`"))),
            Entry::Bare(text) => Err(ParseError::new(line, format!("expected `{key} = ...`, found '{text}'"))),
        }
    }

    fn expect_number(&mut self, key: &str) -> Result<(usize, f64), ParseError> {
        let (line, value) = self.expect_assign(key)?;
        match value {
            Value::Raw(raw) => raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(|v| (line, v))
                .ok_or_else(|| ParseError::new(line, format!("non-numeric value for `{key}`: '{raw}'"))),
            Value::Text(t) => Err(ParseError::new(line, format!("non-numeric value for `{key}`: \"{t}\""))),
        }
    }

    fn expect_count(&mut self, key: &str) -> Result<(usize, usize), ParseError> {
        let (line, value) = self.expect_assign(key)?;
        match value {
            Value::Raw(raw) => raw
                .parse::<usize>()
                .map(|v| (line, v))
                .map_err(|_| ParseError::new(line, format!("invalid count for `{key}`: '{raw}'"))),
            Value::Text(t) => Err(ParseError::new(line, format!("invalid count for `{key}`: \"{t}\""))),
        }
    }

    fn expect_text(&mut self, key: &str) -> Result<(usize, String), ParseError> {
        let (line, value) = self.expect_assign(key)?;
        match value {
            Value::Text(t) => Ok((line, t)),
            Value::Raw(raw) => Err(ParseError::new(line, format!("expected quoted text for `{key}`, found '{raw}'"))),
        }
    }

    fn expect_bare(&mut self, expected: &str) -> Result<usize, ParseError> {
        let (line, entry) = self.next(&format!("'{expected}'"))?;
        match entry {
            Entry::Bare(text) if normalize_header(&text) == normalize_header(expected) => Ok(line),
            Entry::Bare(text) => Err(ParseError::new(line, format!("expected '{expected}', found '{text}'"))),
            Entry::Assign { key, .. } => Err(ParseError::new(line, format!("expected '{expected}', found `{key} = ...`"))),
        }
    }
}

fn normalize_header(text: &str) -> String {
    text.chars().filter(|c| !c.is_whitespace()).collect()
}

/// Parses a long-format TextGrid.
pub fn parse_textgrid(text: &str) -> Result<TextGrid, ParseError> {
    let mut p = Parser {
        scanner: Scanner::new(text),
        last_line: 0,
    };

    let (line, entry) = p.next("`File type = \"ooTextFile\"`")?;
    match entry {
        Entry::Assign { key, value: Value::Text(v) } if key == "File type" => {
            if v.starts_with("ooBinaryFile") {
                return Err(ParseError::new(line, "binary TextGrid files are not supported"));
            }
            if v != "ooTextFile" {
                return Err(ParseError::new(line, format!("unsupported file type \"{v}\"")));
            }
        }
        Entry::Bare(t) if t.starts_with("ooBinaryFile") => {
            return Err(ParseError::new(line, "binary TextGrid files are not supported"));
        }
        _ => return Err(ParseError::new(line, "missing `File type = \"ooTextFile\"` header")),
    }

    let (line, entry) = p.next("`Object class = \"TextGrid\"`")?;
    match entry {
        Entry::Assign { key, value: Value::Text(v) } if key == "Object class" => {
            if v != "TextGrid" {
                return Err(ParseError::new(line, format!("object class \"{v}\" is not TextGrid")));
            }
        }
        _ => return Err(ParseError::new(line, "missing `Object class = \"TextGrid\"` header")),
    }

    let (line, entry) = p.next("`xmin = ...`")?;
    let xmin = match entry {
        Entry::Assign { key, value: Value::Raw(raw) } if key == "xmin" => raw
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| ParseError::new(line, format!("non-numeric value for `xmin`: '{raw}'")))?,
        Entry::Bare(_) => {
            return Err(ParseError::new(
                line,
                "short-format TextGrid is not supported (expected `xmin = ...`)",
            ))
        }
        _ => return Err(ParseError::new(line, "expected `xmin = ...`")),
    };
    let (xmax_line, xmax) = p.expect_number("xmax")?;
    if xmax < xmin {
        return Err(ParseError::new(xmax_line, "xmax precedes xmin"));
    }

    let (line, entry) = p.next("`tiers? <exists>`")?;
    let has_tiers = match entry {
        Entry::Bare(t) if normalize_header(&t) == "tiers?<exists>" => true,
        Entry::Bare(t) if normalize_header(&t) == "tiers?<absent>" => false,
        _ => return Err(ParseError::new(line, "expected `tiers? <exists>`")),
    };

    let mut grid = TextGrid {
        xmin,
        xmax,
        tiers: Vec::new(),
        skipped_tiers: Vec::new(),
    };
    if has_tiers {
        let (_, size) = p.expect_count("size")?;
        p.expect_bare("item []:")?;
        for i in 1..=size {
            let item_line = p.expect_bare(&format!("item [{i}]:"))?;
            let (class_line, class) = p.expect_text("class")?;
            let (_, name) = p.expect_text("name")?;
            let (_, tier_xmin) = p.expect_number("xmin")?;
            let (tier_line, tier_xmax) = p.expect_number("xmax")?;
            if tier_xmin < xmin - TIME_EPSILON || tier_xmax > xmax + TIME_EPSILON || tier_xmax < tier_xmin {
                return Err(ParseError::new(
                    tier_line,
                    format!("tier '{name}' [{tier_xmin}, {tier_xmax}] lies outside the grid [{xmin}, {xmax}]"),
                ));
            }
            match class.as_str() {
                "IntervalTier" => {
                    let intervals = parse_intervals(&mut p, &name, tier_xmin, tier_xmax)?;
                    grid.tiers.push(IntervalTier {
                        name,
                        xmin: tier_xmin,
                        xmax: tier_xmax,
                        intervals,
                    });
                }
                "TextTier" => {
                    skip_points(&mut p)?;
                    grid.skipped_tiers.push(SkippedTier {
                        name,
                        class,
                        line: item_line,
                    });
                }
                other => {
                    return Err(ParseError::new(class_line, format!("unknown tier class \"{other}\"")));
                }
            }
        }
    }
    if let Some((line, _)) = p.scanner.next_entry()? {
        return Err(ParseError::new(line, "unexpected content after the last tier"));
    }
    Ok(grid)
}

fn parse_intervals(p: &mut Parser<'_>, tier: &str, xmin: f64, xmax: f64) -> Result<Vec<Interval>, ParseError> {
    let (_, count) = p.expect_count("intervals: size")?;
    let mut out: Vec<Interval> = Vec::with_capacity(count);
    for j in 1..=count {
        let header = p.expect_bare(&format!("intervals [{j}]:"))?;
        let (_, a) = p.expect_number("xmin")?;
        let (b_line, b) = p.expect_number("xmax")?;
        let (_, text) = p.expect_text("text")?;
        if b <= a {
            return Err(ParseError::new(b_line, format!("interval {j} of tier '{tier}' has xmax {b} <= xmin {a}")));
        }
        if a < xmin - TIME_EPSILON || b > xmax + TIME_EPSILON {
            return Err(ParseError::new(
                header,
                format!("interval {j} [{a}, {b}] lies outside tier '{tier}' [{xmin}, {xmax}]"),
            ));
        }
        if let Some(prev) = out.last() {
            if a < prev.xmax - TIME_EPSILON {
                return Err(ParseError::new(
                    header,
                    format!("interval {j} of tier '{tier}' overlaps the previous one ({a} < {})", prev.xmax),
                ));
            }
            if a > prev.xmax + TIME_EPSILON {
                return Err(ParseError::new(
                    header,
                    format!("gap before interval {j} of tier '{tier}' ({} to {a})", prev.xmax),
                ));
            }
        }
        out.push(Interval { xmin: a, xmax: b, text });
    }
    Ok(out)
}

fn skip_points(p: &mut Parser<'_>) -> Result<(), ParseError> {
    let (_, count) = p.expect_count("points: size")?;
    for j in 1..=count {
        p.expect_bare(&format!("points [{j}]:"))?;
        let (line, entry) = p.next("`number = ...`")?;
        match entry {
            Entry::Assign { key, value: Value::Raw(raw) } if key == "number" || key == "time" => {
                if raw.parse::<f64>().is_err() {
                    return Err(ParseError::new(line, format!("non-numeric value for `{key}`: '{raw}'")));
                }
            }
            _ => return Err(ParseError::new(line, "expected `number = ...`")),
        }
        p.expect_text("mark")?;
    }
    Ok(())
}

struct Quoted<'a>(&'a str);

impl fmt::Display for Quoted<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_char('"')?;
        for c in self.0.chars() {
            if c == '"' {
                f.write_str("\"\"")?;
            } else {
                f.write_char(c)?;
            }
        }
        f.write_char('"')
    }
}

/// Writes the long text format (interval tiers only).
pub fn serialize_textgrid(grid: &TextGrid) -> String {
    let mut s = String::new();
    // writing to a String cannot fail
    let _ = write_textgrid(&mut s, grid);
    s
}

fn write_textgrid(s: &mut String, grid: &TextGrid) -> fmt::Result {
    writeln!(s, "File type = \"ooTextFile\"")?;
    writeln!(s, "Object class = \"TextGrid\"")?;
    writeln!(s)?;
    writeln!(s, "xmin = {} ", grid.xmin)?;
    writeln!(s, "xmax = {} ", grid.xmax)?;
    if grid.tiers.is_empty() {
        return writeln!(s, "tiers? <absent> ");
    }
    writeln!(s, "tiers? <exists> ")?;
    writeln!(s, "size = {} ", grid.tiers.len())?;
    writeln!(s, "item []: ")?;
    for (i, tier) in grid.tiers.iter().enumerate() {
        writeln!(s, "    item [{}]:", i + 1)?;
        writeln!(s, "        class = \"IntervalTier\" ")?;
        writeln!(s, "        name = {} ", Quoted(&tier.name))?;
        writeln!(s, "        xmin = {} ", tier.xmin)?;
        writeln!(s, "        xmax = {} ", tier.xmax)?;
        writeln!(s, "        intervals: size = {} ", tier.intervals.len())?;
        for (j, iv) in tier.intervals.iter().enumerate() {
            writeln!(s, "        intervals [{}]:", j + 1)?;
            writeln!(s, "            xmin = {} ", iv.xmin)?;
            writeln!(s, "            xmax = {} ", iv.xmax)?;
            writeln!(s, "            text = {} ", Quoted(&iv.text))?;
        }
    }
    Ok(())
}
