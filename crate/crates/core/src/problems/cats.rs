//! Reader and writer for CATS bid files.
//!
//! Lines starting with `%` are comments. The header declares `goods N`,
//! `bids M` and optionally `dummy D`; dummy goods are numbered after the
//! real ones. Each bid line reads `<id> <price> <good>... #`.

use std::fmt::Write as _;

use thiserror::Error;

use super::wdp::{Bid, WdpInstance};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct CatsError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> CatsError {
    CatsError {
        line,
        message: message.into(),
    }
}

pub fn parse_cats(text: &str) -> Result<WdpInstance, CatsError> {
    let mut goods: Option<usize> = None;
    let mut declared_bids: Option<usize> = None;
    let mut dummy = 0usize;
    let mut bids = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        let header_value = || {
            tokens
                .get(1)
                .and_then(|v| v.parse::<usize>().ok())
                .ok_or_else(|| err(line, format!("expected `{} <count>`", tokens[0])))
        };
        match tokens[0] {
            "goods" => goods = Some(header_value()?),
            "bids" => declared_bids = Some(header_value()?),
            "dummy" => dummy = header_value()?,
            _ => {
                let total = goods.ok_or_else(|| err(line, "bid before `goods` header"))? + dummy;
                if tokens.last() != Some(&"#") {
                    return Err(err(line, "bid line must end with `#`"));
                }
                if tokens.len() < 3 {
                    return Err(err(line, "expected `<id> <price> <goods>... #`"));
                }
                let id: u32 = tokens[0]
                    .parse()
                    .map_err(|_| err(line, format!("invalid bid id `{}`", tokens[0])))?;
                let price: f64 = tokens[1]
                    .parse()
                    .ok()
                    .filter(|p: &f64| p.is_finite() && *p >= 0.0)
                    .ok_or_else(|| err(line, format!("invalid price `{}`", tokens[1])))?;
                let mut bundle = Vec::new();
                for t in &tokens[2..tokens.len() - 1] {
                    let g: usize = t
                        .parse()
                        .map_err(|_| err(line, format!("invalid good `{t}`")))?;
                    if g >= total {
                        return Err(err(line, format!("good {g} out of range (0..{total})")));
                    }
                    if !bundle.contains(&g) {
                        bundle.push(g);
                    }
                }
                if bundle.is_empty() {
                    return Err(err(line, format!("bid {id} has an empty bundle")));
                }
                if bids.iter().any(|b: &Bid| b.id == id) {
                    return Err(err(line, format!("duplicate bid id {id}")));
                }
                bids.push(Bid {
                    id,
                    goods: bundle,
                    price,
                });
            }
        }
    }

    let goods = goods.ok_or_else(|| err(last_line, "missing `goods` header"))?;
    if let Some(n) = declared_bids {
        if n != bids.len() {
            return Err(err(
                last_line,
                format!("header declares {n} bids, found {}", bids.len()),
            ));
        }
    }
    Ok(WdpInstance {
        goods: goods + dummy,
        bids,
    })
}

pub fn write_cats(inst: &WdpInstance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "goods {}", inst.goods);
    let _ = writeln!(out, "bids {}", inst.bids.len());
    let _ = writeln!(out, "dummy 0");
    let _ = writeln!(out);
    for b in &inst.bids {
        let goods: Vec<String> = b.goods.iter().map(|g| g.to_string()).collect();
        let _ = writeln!(out, "{}\t{}\t{}\t#", b.id, b.price, goods.join("\t"));
    }
    out
}
