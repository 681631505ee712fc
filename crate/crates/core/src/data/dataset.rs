use std::fmt;
use std::io::{BufRead, Write};

use rand::Rng as _;

use crate::mdp::{occupancy, rollout, Policy, TabularMdp, Transition};
use crate::rng::{rng_from_seed, sample_sparse};
use crate::{Error, Result};

/// How `(s, a)` pairs are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    /// `(s, a)` i.i.d. from the behavior occupancy `η^μ`, then `r, s'` from
    /// the model.
    IidOccupancy,
    /// Whole episodes of at most `max_steps` transitions, pooled until `n`
    /// transitions are collected (the last episode may be cut short).
    TrajectoryPool { max_steps: usize },
}

impl fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplingMode::IidOccupancy => write!(f, "iid_occupancy"),
            SamplingMode::TrajectoryPool { max_steps } => write!(f, "trajectory_pool:{max_steps}"),
        }
    }
}

impl std::str::FromStr for SamplingMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "iid_occupancy" {
            return Ok(SamplingMode::IidOccupancy);
        }
        s.strip_prefix("trajectory_pool:")
            .and_then(|m| m.parse().ok())
            .map(|max_steps| SamplingMode::TrajectoryPool { max_steps })
            .ok_or_else(|| format!("unknown sampling mode `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub mdp_id: String,
    pub behavior_id: String,
    pub seed: u64,
    pub mode: SamplingMode,
}

/// The batch `D` of `n` transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    transitions: Vec<Transition>,
    provenance: Provenance,
}

impl Dataset {
    pub fn new(transitions: Vec<Transition>, provenance: Provenance) -> Self {
        Self { transitions, provenance }
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn with_ids(mut self, mdp_id: &str, behavior_id: &str) -> Self {
        self.provenance.mdp_id = sanitize(mdp_id);
        self.provenance.behavior_id = sanitize(behavior_id);
        self
    }
}

fn sanitize(id: &str) -> String {
    id.chars().map(|c| if c.is_whitespace() || c == '=' { '_' } else { c }).collect()
}

/// Draws `n` transitions from `mdp` under `behavior`.
pub fn generate_dataset(
    mdp: &TabularMdp,
    behavior: &Policy,
    n: usize,
    mode: SamplingMode,
    rng_seed: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Config("dataset size must be at least 1".into()));
    }
    let mut rng = rng_from_seed(rng_seed);
    let mut transitions = Vec::with_capacity(n);
    match mode {
        SamplingMode::IidOccupancy => {
            let occ = occupancy(mdp, behavior, 1e-12)?;
            let mut cumulative = Vec::with_capacity(occ.table().len());
            let mut acc = 0.0;
            for &m in occ.table() {
                acc += m;
                cumulative.push(acc);
            }
            let last_positive =
                occ.table().iter().rposition(|&m| m > 0.0).expect("occupancy has mass");
            for _ in 0..n {
                let u: f64 = rng.random::<f64>() * acc;
                let idx = cumulative.partition_point(|&c| c <= u).min(last_positive);
                let (s, a) = (idx / mdp.num_actions(), idx % mdp.num_actions());
                let r = mdp.reward(s, a).sample(&mut rng);
                let s_next = sample_sparse(&mut rng, mdp.next(s, a));
                transitions.push(Transition { s, a, r, s_next });
            }
        }
        SamplingMode::TrajectoryPool { max_steps } => {
            if max_steps == 0 {
                return Err(Error::Config("episode length must be at least 1".into()));
            }
            while transitions.len() < n {
                let episode = rollout(mdp, behavior, max_steps, &mut rng);
                if episode.is_empty() {
                    return Err(Error::Config("initial distribution is purely terminal".into()));
                }
                let take = episode.len().min(n - transitions.len());
                transitions.extend_from_slice(&episode[..take]);
            }
        }
    }
    let provenance = Provenance {
        mdp_id: "unnamed".into(),
        behavior_id: "unnamed".into(),
        seed: rng_seed,
        mode,
    };
    Ok(Dataset { transitions, provenance })
}

/// One transition per line, `s a r s_next`, after a two-line comment header
/// carrying the provenance.
pub fn write_dataset(ds: &Dataset, mut w: impl Write) -> std::io::Result<()> {
    let p = &ds.provenance;
    writeln!(w, "# mbs-dataset 1")?;
    writeln!(
        w,
        "# mdp={} behavior={} seed={} mode={} n={}",
        p.mdp_id,
        p.behavior_id,
        p.seed,
        p.mode,
        ds.len()
    )?;
    for t in &ds.transitions {
        writeln!(w, "{} {} {} {}", t.s, t.a, t.r, t.s_next)?;
    }
    Ok(())
}

pub fn read_dataset(r: impl BufRead) -> Result<Dataset> {
    let perr = |line: usize, message: String| Error::Parse { line, message };
    let mut provenance: Option<Provenance> = None;
    let mut transitions = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim();
        if line_no == 1 {
            if line != "# mbs-dataset 1" {
                return Err(perr(1, "expected `# mbs-dataset 1` header".into()));
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut p = Provenance {
                mdp_id: String::new(),
                behavior_id: String::new(),
                seed: 0,
                mode: SamplingMode::IidOccupancy,
            };
            for kv in rest.split_whitespace() {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| perr(line_no, format!("bad provenance field `{kv}`")))?;
                match k {
                    "mdp" => p.mdp_id = v.to_string(),
                    "behavior" => p.behavior_id = v.to_string(),
                    "seed" => p.seed = v.parse().map_err(|_| perr(line_no, format!("bad seed `{v}`")))?,
                    "mode" => p.mode = v.parse().map_err(|e| perr(line_no, e))?,
                    "n" => {}
                    _ => return Err(perr(line_no, format!("unknown provenance key `{k}`"))),
                }
            }
            provenance = Some(p);
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(perr(line_no, format!("expected 4 fields, found {}", toks.len())));
        }
        let bad = |what: &str, tok: &str| perr(line_no, format!("bad {what} `{tok}`"));
        transitions.push(Transition {
            s: toks[0].parse().map_err(|_| bad("state", toks[0]))?,
            a: toks[1].parse().map_err(|_| bad("action", toks[1]))?,
            r: toks[2].parse().map_err(|_| bad("reward", toks[2]))?,
            s_next: toks[3].parse().map_err(|_| bad("next state", toks[3]))?,
        });
    }
    let provenance = provenance.ok_or_else(|| perr(2, "missing provenance line".into()))?;
    Ok(Dataset { transitions, provenance })
}
