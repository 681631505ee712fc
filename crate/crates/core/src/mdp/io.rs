//! Plain-text MDP format.
//!
//! ```text
//! mbs-mdp 1
//! states 3
//! actions 2
//! gamma 0.999
//! r_max 1
//! initial 0 1
//! terminal 2
//! reward 1 0 point 1
//! reward 1 1 bernoulli 3 0.1
//! transition 0 0 1 0.5
//! transition 0 0 2 0.5
//! ...
//! ```
//!
//! The header line must come first and `states`/`actions`/`gamma` must precede
//! any table entry. Omitted rewards are zero and omitted initial entries are
//! zero. Terminal states carry no `transition`/`reward` lines. Blank lines and
//! lines starting with `#` are ignored. Reals are written in shortest
//! round-trip form, so write/read is lossless.

use std::io::{BufRead, Write};

use super::{MdpBuilder, RewardDist, TabularMdp};
use crate::{Error, Result};

pub const MDP_FORMAT_HEADER: &str = "mbs-mdp 1";

pub fn write_mdp(mdp: &TabularMdp, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{MDP_FORMAT_HEADER}")?;
    writeln!(w, "states {}", mdp.num_states())?;
    writeln!(w, "actions {}", mdp.num_actions())?;
    writeln!(w, "gamma {}", mdp.gamma())?;
    writeln!(w, "r_max {}", mdp.r_max())?;
    for (s, &p) in mdp.initial().iter().enumerate().filter(|(_, &p)| p > 0.0) {
        writeln!(w, "initial {s} {p}")?;
    }
    for s in mdp.terminal_states() {
        writeln!(w, "terminal {s}")?;
    }
    for s in (0..mdp.num_states()).filter(|&s| !mdp.is_terminal(s)) {
        for a in 0..mdp.num_actions() {
            match *mdp.reward(s, a) {
                RewardDist::Point(v) if v == 0.0 => {}
                RewardDist::Point(v) => writeln!(w, "reward {s} {a} point {v}")?,
                RewardDist::Bernoulli { value, prob } => {
                    writeln!(w, "reward {s} {a} bernoulli {value} {prob}")?
                }
            }
            for &(t, p) in mdp.next(s, a) {
                writeln!(w, "transition {s} {a} {t} {p}")?;
            }
        }
    }
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| parse_err(line, format!("bad {what} `{tok}`")))
}

pub fn read_mdp(r: impl BufRead) -> Result<TabularMdp> {
    let mut states: Option<usize> = None;
    let mut actions: Option<usize> = None;
    let mut gamma: Option<f64> = None;
    let mut r_max: Option<f64> = None;
    let mut builder: Option<MdpBuilder> = None;
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut initial: Vec<f64> = Vec::new();
    let mut seen_header = false;

    for (idx, raw) in r.lines().enumerate() {
        let line_no = idx + 1;
        let raw = raw?;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_header {
            if line != MDP_FORMAT_HEADER {
                return Err(parse_err(line_no, format!("expected `{MDP_FORMAT_HEADER}`")));
            }
            seen_header = true;
            continue;
        }
        let mut toks = line.split_whitespace();
        let key = toks.next().unwrap_or_default();
        match key {
            "states" => states = Some(field(toks.next(), line_no, "state count")?),
            "actions" => actions = Some(field(toks.next(), line_no, "action count")?),
            "gamma" => gamma = Some(field(toks.next(), line_no, "gamma")?),
            "r_max" => r_max = Some(field(toks.next(), line_no, "r_max")?),
            "initial" | "terminal" | "reward" | "transition" => {
                let (ns, na, g) = match (states, actions, gamma) {
                    (Some(ns), Some(na), Some(g)) => (ns, na, g),
                    _ => {
                        return Err(parse_err(
                            line_no,
                            "`states`, `actions` and `gamma` must precede table entries",
                        ))
                    }
                };
                let b = builder.get_or_insert_with(|| {
                    rows = vec![Vec::new(); ns * na];
                    initial = vec![0.0; ns];
                    MdpBuilder::new(ns, na, g)
                });
                let s: usize = field(toks.next(), line_no, "state")?;
                if s >= ns {
                    return Err(parse_err(line_no, format!("state {s} out of range")));
                }
                match key {
                    "initial" => initial[s] = field(toks.next(), line_no, "probability")?,
                    "terminal" => {
                        b.terminal(s);
                    }
                    _ => {
                        let a: usize = field(toks.next(), line_no, "action")?;
                        if a >= na {
                            return Err(parse_err(line_no, format!("action {a} out of range")));
                        }
                        if key == "transition" {
                            let t: usize = field(toks.next(), line_no, "next state")?;
                            let p: f64 = field(toks.next(), line_no, "probability")?;
                            rows[s * na + a].push((t, p));
                        } else {
                            let kind: String = field(toks.next(), line_no, "reward kind")?;
                            let dist = match kind.as_str() {
                                "point" => RewardDist::Point(field(toks.next(), line_no, "reward")?),
                                "bernoulli" => RewardDist::Bernoulli {
                                    value: field(toks.next(), line_no, "reward")?,
                                    prob: field(toks.next(), line_no, "probability")?,
                                },
                                other => {
                                    return Err(parse_err(
                                        line_no,
                                        format!("unknown reward kind `{other}`"),
                                    ))
                                }
                            };
                            b.reward(s, a, dist);
                        }
                    }
                }
            }
            other => return Err(parse_err(line_no, format!("unknown key `{other}`"))),
        }
        if toks.next().is_some() {
            return Err(parse_err(line_no, "trailing tokens"));
        }
    }

    let mut b = builder.ok_or_else(|| parse_err(0, "no table entries"))?;
    let na = actions.unwrap_or(1);
    for (idx, row) in rows.into_iter().enumerate() {
        if !b.is_marked_terminal(idx / na) {
            b.transition(idx / na, idx % na, row);
        }
    }
    b.initial(initial);
    if let Some(r) = r_max {
        b.r_max(r);
    }
    b.build()
}
