//! Reader and writer for single-mode PSPLIB `.sm` files.

use std::fmt::Write as _;

use thiserror::Error;

use super::rcpsp::{Activity, RcpspInstance};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line} ({section}): {message}")]
pub struct PsplibError {
    pub line: usize,
    pub section: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Header,
    Precedence,
    Requests,
    Availabilities,
}

impl Section {
    fn name(self) -> &'static str {
        match self {
            Section::Header => "header",
            Section::Precedence => "PRECEDENCE RELATIONS",
            Section::Requests => "REQUESTS/DURATIONS",
            Section::Availabilities => "RESOURCEAVAILABILITIES",
        }
    }
}

fn err(line: usize, section: Section, message: impl Into<String>) -> PsplibError {
    PsplibError {
        line,
        section: section.name().to_string(),
        message: message.into(),
    }
}

fn numbers(line: usize, section: Section, text: &str) -> Result<Vec<u32>, PsplibError> {
    text.split_whitespace()
        .map(|t| {
            t.parse::<u32>().map_err(|_| {
                err(
                    line,
                    section,
                    format!("expected a non-negative integer, got `{t}`"),
                )
            })
        })
        .collect()
}

fn value_after_colon(line: usize, text: &str) -> Result<u32, PsplibError> {
    text.split_once(':')
        .and_then(|(_, v)| v.split_whitespace().next())
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| {
            err(
                line,
                Section::Header,
                format!("cannot read value from `{}`", text.trim()),
            )
        })
}

/// Parses a single-mode `.sm` file. Job 1 and the last job are expected to
/// be the dummy source and sink.
pub fn parse_psplib(text: &str) -> Result<RcpspInstance, PsplibError> {
    let mut section = Section::Header;
    let mut jobs: Option<u32> = None;
    let mut horizon: Option<u32> = None;
    let mut renewable: Option<usize> = None;
    let mut successors: Vec<(u32, Vec<u32>)> = Vec::new();
    let mut requests: Vec<(u32, u32, Vec<u32>)> = Vec::new();
    let mut capacities: Option<Vec<u32>> = None;
    let mut seen = [false; 3];
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let trimmed = raw.trim();
        if trimmed.is_empty()
            || trimmed.starts_with('*')
            || (trimmed.starts_with('-') && !trimmed.contains(':'))
        {
            if trimmed.starts_with('*') && section != Section::Header {
                section = Section::Header;
            }
            continue;
        }
        if trimmed.starts_with("PRECEDENCE RELATIONS") {
            section = Section::Precedence;
            seen[0] = true;
            continue;
        }
        if trimmed.starts_with("REQUESTS/DURATIONS") {
            section = Section::Requests;
            seen[1] = true;
            continue;
        }
        if trimmed.starts_with("RESOURCEAVAILABILITIES") {
            section = Section::Availabilities;
            seen[2] = true;
            continue;
        }
        match section {
            Section::Header => {
                if trimmed.starts_with("jobs") {
                    jobs = Some(value_after_colon(line, trimmed)?);
                } else if trimmed.starts_with("horizon") {
                    horizon = Some(value_after_colon(line, trimmed)?);
                } else if trimmed.starts_with("- renewable") {
                    renewable = Some(value_after_colon(line, trimmed)? as usize);
                }
            }
            Section::Precedence => {
                if trimmed.starts_with("jobnr") {
                    continue;
                }
                let v = numbers(line, section, trimmed)?;
                if v.len() < 3 {
                    return Err(err(
                        line,
                        section,
                        "expected `jobnr modes count successors...`",
                    ));
                }
                if v[1] != 1 {
                    return Err(err(
                        line,
                        section,
                        "only single-mode instances are supported",
                    ));
                }
                let count = v[2] as usize;
                if v.len() != 3 + count {
                    return Err(err(
                        line,
                        section,
                        format!(
                            "job {} declares {count} successors, found {}",
                            v[0],
                            v.len() - 3
                        ),
                    ));
                }
                successors.push((v[0], v[3..].to_vec()));
            }
            Section::Requests => {
                if trimmed.starts_with("jobnr") {
                    continue;
                }
                let v = numbers(line, section, trimmed)?;
                let k =
                    renewable.ok_or_else(|| err(line, section, "resource count not declared"))?;
                if v.len() != 3 + k {
                    return Err(err(
                        line,
                        section,
                        format!("expected {} columns, found {}", 3 + k, v.len()),
                    ));
                }
                requests.push((v[0], v[2], v[3..].to_vec()));
            }
            Section::Availabilities => {
                if trimmed.starts_with('R') {
                    continue;
                }
                let v = numbers(line, section, trimmed)?;
                let k =
                    renewable.ok_or_else(|| err(line, section, "resource count not declared"))?;
                if v.len() != k {
                    return Err(err(
                        line,
                        section,
                        format!("expected {k} capacities, found {}", v.len()),
                    ));
                }
                capacities = Some(v);
            }
        }
    }

    for (flag, s) in seen.iter().zip([
        Section::Precedence,
        Section::Requests,
        Section::Availabilities,
    ]) {
        if !flag {
            return Err(err(last_line, s, "missing section"));
        }
    }
    let jobs = jobs.ok_or_else(|| err(last_line, Section::Header, "missing job count"))?;
    let horizon = horizon.ok_or_else(|| err(last_line, Section::Header, "missing horizon"))?;
    let capacities =
        capacities.ok_or_else(|| err(last_line, Section::Availabilities, "missing capacities"))?;
    if successors.len() != jobs as usize {
        return Err(err(
            last_line,
            Section::Precedence,
            format!("expected {jobs} jobs, found {}", successors.len()),
        ));
    }
    if requests.len() != jobs as usize {
        return Err(err(
            last_line,
            Section::Requests,
            format!("expected {jobs} jobs, found {}", requests.len()),
        ));
    }

    let mut activities = Vec::with_capacity(jobs as usize);
    for (i, (id, duration, usage)) in requests.into_iter().enumerate() {
        if id != i as u32 + 1 {
            return Err(err(
                last_line,
                Section::Requests,
                format!("jobs must be numbered 1..{jobs}"),
            ));
        }
        activities.push(Activity {
            id,
            duration,
            usage,
        });
    }
    let mut precedence = Vec::new();
    for (i, (id, succ)) in successors.into_iter().enumerate() {
        if id != i as u32 + 1 {
            return Err(err(
                last_line,
                Section::Precedence,
                format!("jobs must be numbered 1..{jobs}"),
            ));
        }
        for s in succ {
            if s == 0 || s > jobs {
                return Err(err(
                    last_line,
                    Section::Precedence,
                    format!("job {id} has unknown successor {s}"),
                ));
            }
            precedence.push((id, s));
        }
    }
    Ok(RcpspInstance {
        activities,
        precedence,
        capacities,
        horizon,
    })
}

/// Writes an instance whose activities are numbered `1..=n`.
pub fn write_psplib(inst: &RcpspInstance) -> String {
    let rule = "*".repeat(72);
    let k = inst.capacities.len();
    let mut out = String::new();
    let _ = writeln!(out, "{rule}");
    let _ = writeln!(
        out,
        "jobs (incl. supersource/sink ):  {}",
        inst.activities.len()
    );
    let _ = writeln!(out, "horizon                       :  {}", inst.horizon);
    let _ = writeln!(out, "RESOURCES");
    let _ = writeln!(out, "  - renewable                 :  {k}   R");
    let _ = writeln!(out, "  - nonrenewable              :  0   N");
    let _ = writeln!(out, "  - doubly constrained        :  0   D");
    let _ = writeln!(out, "{rule}");
    let _ = writeln!(out, "PRECEDENCE RELATIONS:");
    let _ = writeln!(out, "jobnr.    #modes  #successors   successors");
    for a in &inst.activities {
        let succ: Vec<String> = inst
            .precedence
            .iter()
            .filter(|&&(p, _)| p == a.id)
            .map(|&(_, s)| s.to_string())
            .collect();
        let _ = writeln!(
            out,
            "{:>4}{:>9}{:>11}      {}",
            a.id,
            1,
            succ.len(),
            succ.join("   ")
        );
    }
    let _ = writeln!(out, "{rule}");
    let _ = writeln!(out, "REQUESTS/DURATIONS:");
    let header: Vec<String> = (1..=k).map(|r| format!("R {r}")).collect();
    let _ = writeln!(out, "jobnr. mode duration  {}", header.join("  "));
    let _ = writeln!(out, "{}", "-".repeat(72));
    for a in &inst.activities {
        let usage: Vec<String> = a.usage.iter().map(|u| format!("{u:>4}")).collect();
        let _ = writeln!(
            out,
            "{:>3}{:>7}{:>6}   {}",
            a.id,
            1,
            a.duration,
            usage.join(" ")
        );
    }
    let _ = writeln!(out, "{rule}");
    let _ = writeln!(out, "RESOURCEAVAILABILITIES:");
    let _ = writeln!(out, "  {}", header.join("  "));
    let caps: Vec<String> = inst.capacities.iter().map(|c| format!("{c:>4}")).collect();
    let _ = writeln!(out, "  {}", caps.join(" "));
    let _ = writeln!(out, "{rule}");
    out
}
