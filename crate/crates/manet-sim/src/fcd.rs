//! SUMO floating-car-data (FCD) trace ingestion and export.
//!
//! Supported grammar (a subset of SUMO's `fcd-export`):
//!
//! ```text
//! <fcd-export>
//!   <timestep time="FLOAT">
//!     <vehicle id="STRING" x="FLOAT" y="FLOAT" speed="FLOAT"/>*
//!   </timestep>*
//! </fcd-export>
//! ```
//!
//! Attributes beyond `id`/`x`/`y`/`speed` are ignored; times are seconds and
//! coordinates meters, used as-is without geo-projection. Parse failures
//! carry the offending line number.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::mobility::{MobilityKind, MobilitySource, Position, Waypoint};
use crate::time::SimTime;

#[derive(Debug, Error)]
pub enum FcdError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("trace contains no vehicles")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn err(line: usize, msg: impl Into<String>) -> FcdError {
    FcdError::Parse { line, msg: msg.into() }
}

#[derive(Debug, PartialEq)]
enum Tag {
    Open { name: String, attrs: Vec<(String, String)>, self_closing: bool },
    Close { name: String },
}

/// Minimal XML tag scanner. Tracks line numbers, skips the declaration,
/// comments and inter-tag text, and decodes the five standard entities in
/// attribute values.
struct Scanner<'a> {
    input: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Scanner<'a> {
    fn new(input: &'a str) -> Self {
        Scanner { input, pos: 0, line: 1 }
    }

    fn bump(&mut self, n: usize) {
        let skipped = &self.input[self.pos..self.pos + n];
        self.line += skipped.bytes().filter(|b| *b == b'\n').count();
        self.pos += n;
    }

    fn rest(&self) -> &'a str {
        &self.input[self.pos..]
    }

    fn next_tag(&mut self) -> Result<Option<Tag>, FcdError> {
        loop {
            let rest = self.rest();
            let Some(lt) = rest.find('<') else {
                if rest.trim().is_empty() {
                    return Ok(None);
                }
                return Err(err(self.line, "stray text after last tag"));
            };
            if !rest[..lt].trim().is_empty() {
                return Err(err(self.line, "unexpected text between tags"));
            }
            self.bump(lt);

            let rest = self.rest();
            if rest.starts_with("<?") {
                let Some(end) = rest.find("?>") else {
                    return Err(err(self.line, "unterminated XML declaration"));
                };
                self.bump(end + 2);
                continue;
            }
            if rest.starts_with("<!--") {
                let Some(end) = rest.find("-->") else {
                    return Err(err(self.line, "unterminated comment"));
                };
                self.bump(end + 3);
                continue;
            }
            return self.read_tag().map(Some);
        }
    }

    fn read_tag(&mut self) -> Result<Tag, FcdError> {
        let start_line = self.line;
        let rest = self.rest();
        debug_assert!(rest.starts_with('<'));
        let Some(gt) = rest.find('>') else {
            return Err(err(start_line, "unterminated tag"));
        };
        let body = &rest[1..gt];
        self.bump(gt + 1);

        if let Some(name) = body.strip_prefix('/') {
            return Ok(Tag::Close { name: name.trim().to_string() });
        }
        let (body, self_closing) = match body.strip_suffix('/') {
            Some(b) => (b, true),
            None => (body, false),
        };
        let mut chars = body.char_indices().peekable();
        let name_end = body
            .find(|c: char| c.is_whitespace())
            .unwrap_or(body.len());
        let name = body[..name_end].to_string();
        if name.is_empty() {
            return Err(err(start_line, "tag with empty name"));
        }
        while let Some(&(i, _)) = chars.peek() {
            if i >= name_end {
                break;
            }
            chars.next();
        }
        let mut attrs = Vec::new();
        let mut attr_src = body[name_end..].trim_start();
        while !attr_src.is_empty() {
            let Some(eq) = attr_src.find('=') else {
                return Err(err(start_line, format!("attribute without value in <{name}>")));
            };
            let key = attr_src[..eq].trim().to_string();
            let after = attr_src[eq + 1..].trim_start();
            let Some(quote) = after.chars().next().filter(|c| *c == '"' || *c == '\'') else {
                return Err(err(start_line, format!("unquoted attribute value for {key}")));
            };
            let Some(close) = after[1..].find(quote) else {
                return Err(err(start_line, format!("unterminated value for attribute {key}")));
            };
            let raw = &after[1..1 + close];
            attrs.push((key, decode_entities(raw)));
            attr_src = after[close + 2..].trim_start();
        }
        Ok(Tag::Open { name, attrs, self_closing })
    }
}

fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    s.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&apos;", "'")
        .replace("&amp;", "&")
}

fn attr<'a>(attrs: &'a [(String, String)], key: &str) -> Option<&'a str> {
    attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
}

fn parse_f64(attrs: &[(String, String)], key: &str, tag: &str, line: usize) -> Result<f64, FcdError> {
    let raw = attr(attrs, key)
        .ok_or_else(|| err(line, format!("<{tag}> missing required attribute {key}")))?;
    raw.parse::<f64>()
        .map_err(|_| err(line, format!("<{tag}> attribute {key}=\"{raw}\" is not a number")))
        .and_then(|v| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(err(line, format!("<{tag}> attribute {key} must be finite")))
            }
        })
}

/// Parses an FCD document into a [`MobilitySource`]. One waypoint is
/// recorded per (vehicle, timestep); vehicles appearing mid-trace get their
/// first waypoint at their first timestep. Node ids follow first appearance.
pub fn load_fcd(reader: impl BufRead) -> Result<MobilitySource, FcdError> {
    let mut text = String::new();
    let mut r = reader;
    r.read_to_string(&mut text).map_err(FcdError::Io)?;
    load_fcd_str(&text)
}

pub fn load_fcd_str(text: &str) -> Result<MobilitySource, FcdError> {
    let mut scanner = Scanner::new(text);

    match scanner.next_tag()? {
        Some(Tag::Open { name, self_closing: false, .. }) if name == "fcd-export" => {}
        Some(_) => return Err(err(scanner.line, "expected <fcd-export> root element")),
        None => return Err(err(scanner.line, "empty document")),
    }

    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut names: Vec<String> = Vec::new();
    let mut tracks: Vec<Vec<Waypoint>> = Vec::new();
    let mut last_time: Option<SimTime> = None;
    let mut closed_root = false;

    while let Some(tag) = scanner.next_tag()? {
        match tag {
            Tag::Close { name } if name == "fcd-export" => {
                closed_root = true;
                break;
            }
            Tag::Open { name, attrs, self_closing } if name == "timestep" => {
                let line = scanner.line;
                let secs = parse_f64(&attrs, "time", "timestep", line)?;
                if secs < 0.0 {
                    return Err(err(line, "timestep time must be nonnegative"));
                }
                let at = SimTime::from_secs_f64(secs);
                if let Some(prev) = last_time {
                    if at <= prev {
                        return Err(err(
                            line,
                            format!("non-monotone timestep: {secs} does not increase"),
                        ));
                    }
                }
                last_time = Some(at);
                if self_closing {
                    continue;
                }
                loop {
                    match scanner.next_tag()? {
                        Some(Tag::Close { name }) if name == "timestep" => break,
                        Some(Tag::Open { name, attrs, self_closing }) if name == "vehicle" => {
                            let line = scanner.line;
                            let id = attr(&attrs, "id")
                                .ok_or_else(|| err(line, "<vehicle> missing id"))?
                                .to_string();
                            let x = parse_f64(&attrs, "x", "vehicle", line)?;
                            let y = parse_f64(&attrs, "y", "vehicle", line)?;
                            let node = *ids.entry(id.clone()).or_insert_with(|| {
                                names.push(id);
                                tracks.push(Vec::new());
                                tracks.len() - 1
                            });
                            tracks[node].push(Waypoint { at, pos: Position { x, y } });
                            if !self_closing {
                                match scanner.next_tag()? {
                                    Some(Tag::Close { name }) if name == "vehicle" => {}
                                    _ => return Err(err(scanner.line, "expected </vehicle>")),
                                }
                            }
                        }
                        Some(_) => {
                            return Err(err(scanner.line, "expected <vehicle> inside <timestep>"))
                        }
                        None => return Err(err(scanner.line, "unterminated <timestep>")),
                    }
                }
            }
            _ => return Err(err(scanner.line, "expected <timestep> inside <fcd-export>")),
        }
    }
    if !closed_root {
        return Err(err(scanner.line, "missing </fcd-export>"));
    }
    if tracks.is_empty() {
        return Err(FcdError::Empty);
    }
    Ok(MobilitySource::from_tracks(MobilityKind::Trace, tracks, None, Some(names)))
}

/// Serializes a source back to FCD by sampling every node on a fixed grid
/// `0, step, 2*step, ...` covering the last waypoint of any node. Reloading
/// the output yields identical `position_at` on exactly that grid.
pub fn write_fcd(source: &MobilitySource, mut w: impl Write, step_s: f64) -> Result<(), FcdError> {
    assert!(step_s > 0.0, "sampling step must be positive");
    let step_us = crate::time::secs_to_micros(step_s);
    assert!(step_us > 0, "sampling step must be at least 1us");
    let end_us = (0..source.node_count())
        .map(|n| source.track(n).last().expect("nonempty").at.as_micros())
        .max()
        .unwrap_or(0);

    let mut out = String::new();
    out.push_str("<fcd-export>\n");
    let mut t = 0u64;
    loop {
        let at = SimTime::from_micros(t);
        let _ = writeln!(out, "  <timestep time=\"{}\">", at.as_secs_f64());
        for node in 0..source.node_count() {
            let pos = source.position_at(node, at).expect("node exists");
            let name = source
                .node_name(node)
                .map(str::to_string)
                .unwrap_or_else(|| format!("v{node}"));
            let _ = writeln!(
                out,
                "    <vehicle id=\"{}\" x=\"{}\" y=\"{}\" speed=\"0\"/>",
                name, pos.x, pos.y
            );
        }
        out.push_str("  </timestep>\n");
        if t >= end_us {
            break;
        }
        t += step_us;
    }
    out.push_str("</fcd-export>\n");
    w.write_all(out.as_bytes())?;
    Ok(())
}
