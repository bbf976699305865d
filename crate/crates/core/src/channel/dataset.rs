//! Text interchange format for externally generated CSI.
//!
//! ```text
//! csi v1 M=<int> nC=<int> nUE=<int>
//! ue <id> x=<f> y=<f>
//! <M lines, each with nC complex entries `re+imj` separated by spaces>
//! ...
//! ```
//!
//! The first user block is the target user; the remaining ones are reference
//! users in file order. Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path as FsPath;

use nalgebra::Complex;

use super::{ArrayGeometry, ChannelRealization, ReferenceUser, Scenario, UserChannel};
use crate::{CMatrix, Result, SenseError, C64};

/// Reads a CSI file. Without a geometry the channels are treated as opaque
/// vectors on an `M x 1` single-polarised array.
pub fn load_csi_dataset(path: impl AsRef<FsPath>, geometry: Option<ArrayGeometry>) -> Result<Scenario> {
    let text = fs::read_to_string(path)?;
    parse_csi_dataset(&text, geometry)
}

pub fn save_csi_dataset(scenario: &Scenario, path: impl AsRef<FsPath>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    write_csi_dataset(scenario, &mut f)
}

pub fn write_csi_dataset<W: Write>(scenario: &Scenario, out: &mut W) -> Result<()> {
    let m = scenario.tu.channel.ports();
    let nc = scenario.tu.channel.carriers();
    let users = std::iter::once((scenario.tu.position, &scenario.tu.channel.matrix))
        .chain(scenario.rus.iter().map(|r| (r.position, &r.channel.matrix)));
    let mut buf = String::new();
    writeln!(buf, "csi v1 M={m} nC={nc} nUE={}", 1 + scenario.rus.len()).unwrap();
    for (id, (pos, mat)) in users.enumerate() {
        writeln!(buf, "ue {id} x={:e} y={:e}", pos[0], pos[1]).unwrap();
        for r in 0..m {
            let row: Vec<String> = (0..nc).map(|c| format_complex(mat[(r, c)])).collect();
            buf.push_str(&row.join(" "));
            buf.push('\n');
        }
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}

pub(crate) fn format_complex(z: C64) -> String {
    format!("{:e}{:+e}j", z.re, z.im)
}

pub(crate) fn parse_complex(s: &str) -> Option<C64> {
    let body = s.strip_suffix('j').or_else(|| s.strip_suffix('i'))?;
    let bytes = body.as_bytes();
    // Split at the last sign that is not a leading sign or an exponent sign.
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'))?;
    let re: f64 = body[..split].parse().ok()?;
    let im: f64 = body[split..].parse().ok()?;
    (re.is_finite() && im.is_finite()).then(|| Complex::new(re, im))
}

fn parse_kv<'a>(token: &'a str, key: &str, line: usize) -> Result<&'a str> {
    token
        .strip_prefix(key)
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| SenseError::parse(line, format!("expected `{key}=<value>`, found `{token}`")))
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str, line: usize) -> Result<T> {
    s.parse()
        .map_err(|_| SenseError::parse(line, format!("invalid {what} `{s}`")))
}

pub fn parse_csi_dataset(text: &str, geometry: Option<ArrayGeometry>) -> Result<Scenario> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hl, header) = lines
        .next()
        .ok_or_else(|| SenseError::parse(1, "empty file, expected header"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 5 || tokens[0] != "csi" || tokens[1] != "v1" {
        return Err(SenseError::parse(
            hl,
            "malformed header, expected `csi v1 M=<int> nC=<int> nUE=<int>`",
        ));
    }
    let m: usize = parse_num(parse_kv(tokens[2], "M", hl)?, "M", hl)?;
    let nc: usize = parse_num(parse_kv(tokens[3], "nC", hl)?, "nC", hl)?;
    let n_ue: usize = parse_num(parse_kv(tokens[4], "nUE", hl)?, "nUE", hl)?;
    if m == 0 || nc == 0 || n_ue == 0 {
        return Err(SenseError::parse(hl, "M, nC and nUE must be positive"));
    }
    let geometry = match geometry {
        Some(g) if g.ports() != m => {
            return Err(SenseError::dims(format!(
                "header declares M={m} but the array geometry has {} ports",
                g.ports()
            )))
        }
        Some(g) => g,
        None => ArrayGeometry::new(m, 1, false, 0.5, 0.5)?,
    };

    let mut users = Vec::with_capacity(n_ue);
    for u in 0..n_ue {
        let (ul, ue_line) = lines
            .next()
            .ok_or_else(|| SenseError::parse(hl, format!("expected {n_ue} users, found {u}")))?;
        let t: Vec<&str> = ue_line.split_whitespace().collect();
        if t.len() != 4 || t[0] != "ue" {
            return Err(SenseError::parse(ul, "expected `ue <id> x=<f> y=<f>`"));
        }
        let _id: u64 = parse_num(t[1], "user id", ul)?;
        let x: f64 = parse_num(parse_kv(t[2], "x", ul)?, "x", ul)?;
        let y: f64 = parse_num(parse_kv(t[3], "y", ul)?, "y", ul)?;
        if !x.is_finite() || !y.is_finite() {
            return Err(SenseError::parse(ul, "non-finite position"));
        }
        let mut mat = CMatrix::zeros(m, nc);
        for r in 0..m {
            let (rl, row) = lines.next().ok_or_else(|| {
                SenseError::parse(ul, format!("user block ended after {r} of {m} rows"))
            })?;
            let entries: Vec<&str> = row.split_whitespace().collect();
            if entries.len() != nc {
                return Err(SenseError::DimensionMismatch(format!(
                    "line {rl}: expected {nc} entries, found {}",
                    entries.len()
                )));
            }
            for (c, e) in entries.iter().enumerate() {
                mat[(r, c)] = parse_complex(e).ok_or_else(|| {
                    SenseError::parse(rl, format!("invalid or non-finite complex entry `{e}`"))
                })?;
            }
        }
        users.push(ReferenceUser {
            position: [x, y],
            channel: ChannelRealization {
                matrix: mat,
                geometry,
                bandwidth: None,
            },
            type2: None,
        });
    }
    if let Some((l, _)) = lines.next() {
        return Err(SenseError::parse(l, "trailing content after the declared users"));
    }
    let tu = users.remove(0);
    Ok(Scenario {
        tu: UserChannel {
            position: tu.position,
            channel: tu.channel,
            paths: None,
        },
        rus: users,
        seed: 0,
    })
}
