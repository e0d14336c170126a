//! Grid-world environment files.
//!
//! An environment file is line-oriented `key = value` text. Lines starting
//! with `#` are comments (only at the start of a line, since `#` is also a
//! grid cell). Keys:
//!
//! | key                 | value                                            |
//! |---------------------|--------------------------------------------------|
//! | `name`              | identifier used by the CLI                       |
//! | `kind`              | `deep-sea-treasure` or `gem-minecart`            |
//! | `gamma`             | discount factor in `[0, 1)`                      |
//! | `max_episode_steps` | positive step limit (truncation)                 |
//! | `ref_point`         | comma-separated hypervolume reference point      |
//! | `treasures`         | comma-separated values (deep-sea-treasure only)  |
//! | `row`               | one grid row per line, top to bottom             |
//!
//! Grid cells: `.` open, `#` blocked, `S` submarine start, `a`..`z` treasure
//! index, `D` depot, `A`/`B` mines. Actions are up, down, left, right; moving
//! into a blocked cell or off the grid leaves the agent in place.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::{EnvError, MomdpSpec, TabularEnv};
use crate::metrics::ReferencePoint;

pub const BUILTIN_NAMES: [&str; 2] = ["dst", "gem-minecart"];

const DST_SOURCE: &str = include_str!("../../envs/dst.env");
const MINECART_SOURCE: &str = include_str!("../../envs/gem-minecart.env");

const MOVES: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

/// Text of a shipped environment file.
pub fn builtin_source(name: &str) -> Option<&'static str> {
    match name {
        "dst" => Some(DST_SOURCE),
        "gem-minecart" => Some(MINECART_SOURCE),
        _ => None,
    }
}

/// Builds a shipped environment with its exact front precomputed.
pub fn builtin(name: &str) -> Result<TabularEnv, EnvError> {
    let source = builtin_source(name).ok_or_else(|| EnvError::Unknown(name.into()))?;
    EnvFile::parse(source)?.build()?.with_cached_front()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    DeepSeaTreasure,
    GemMinecart,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvFile {
    pub name: String,
    pub kind: GridKind,
    pub gamma: f64,
    pub max_episode_steps: u32,
    pub ref_point: Vec<f64>,
    pub treasures: Vec<f64>,
    pub rows: Vec<String>,
}

fn parse_err(line: usize, message: impl Into<String>) -> EnvError {
    EnvError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_list(line: usize, value: &str) -> Result<Vec<f64>, EnvError> {
    value
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("'{}' is not a number", s.trim())))
        })
        .collect()
}

impl EnvFile {
    pub fn parse(source: &str) -> Result<Self, EnvError> {
        let mut name = None;
        let mut kind = None;
        let mut gamma = None;
        let mut max_steps = None;
        let mut ref_point = None;
        let mut treasures = None;
        let mut rows = Vec::new();
        for (i, raw) in source.lines().enumerate() {
            let line = i + 1;
            let text = raw.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let (key, value) = text
                .split_once('=')
                .ok_or_else(|| parse_err(line, "expected 'key = value'"))?;
            let (key, value) = (key.trim(), value.trim());
            let dup = |seen: bool| {
                if seen {
                    Err(parse_err(line, format!("duplicate key '{key}'")))
                } else {
                    Ok(())
                }
            };
            match key {
                "name" => {
                    dup(name.is_some())?;
                    name = Some(value.to_string());
                }
                "kind" => {
                    dup(kind.is_some())?;
                    kind = Some(match value {
                        "deep-sea-treasure" => GridKind::DeepSeaTreasure,
                        "gem-minecart" => GridKind::GemMinecart,
                        other => return Err(parse_err(line, format!("unknown kind '{other}'"))),
                    });
                }
                "gamma" => {
                    dup(gamma.is_some())?;
                    gamma = Some(
                        value
                            .parse::<f64>()
                            .map_err(|_| parse_err(line, "gamma must be a number"))?,
                    );
                }
                "max_episode_steps" => {
                    dup(max_steps.is_some())?;
                    max_steps = Some(
                        value
                            .parse::<u32>()
                            .map_err(|_| parse_err(line, "max_episode_steps must be a positive integer"))?,
                    );
                }
                "ref_point" => {
                    dup(ref_point.is_some())?;
                    ref_point = Some(parse_list(line, value)?);
                }
                "treasures" => {
                    dup(treasures.is_some())?;
                    treasures = Some(parse_list(line, value)?);
                }
                "row" => rows.push(value.to_string()),
                other => return Err(parse_err(line, format!("unknown key '{other}'"))),
            }
        }
        let missing = |k: &str| parse_err(0, format!("missing key '{k}'"));
        let kind = kind.ok_or_else(|| missing("kind"))?;
        let treasures = treasures.unwrap_or_default();
        if kind == GridKind::GemMinecart && !treasures.is_empty() {
            return Err(parse_err(0, "'treasures' only applies to deep-sea-treasure"));
        }
        if rows.is_empty() {
            return Err(missing("row"));
        }
        Ok(Self {
            name: name.ok_or_else(|| missing("name"))?,
            kind,
            gamma: gamma.ok_or_else(|| missing("gamma"))?,
            max_episode_steps: max_steps.ok_or_else(|| missing("max_episode_steps"))?,
            ref_point: ref_point.ok_or_else(|| missing("ref_point"))?,
            treasures,
            rows,
        })
    }

    fn grid(&self) -> Result<Vec<Vec<char>>, EnvError> {
        let grid: Vec<Vec<char>> = self.rows.iter().map(|r| r.chars().collect()).collect();
        let width = grid[0].len();
        if width == 0 || grid.iter().any(|r| r.len() != width) {
            return Err(EnvError::Invalid("grid rows must be nonempty and equally wide".into()));
        }
        Ok(grid)
    }

    pub fn build(&self) -> Result<TabularEnv, EnvError> {
        let ref_point = ReferencePoint::new(self.ref_point.clone()).map_err(|e| EnvError::Invalid(e.to_string()))?;
        match self.kind {
            GridKind::DeepSeaTreasure => self.build_dst(ref_point),
            GridKind::GemMinecart => self.build_minecart(ref_point),
        }
    }

    fn build_dst(&self, ref_point: ReferencePoint) -> Result<TabularEnv, EnvError> {
        let grid = self.grid()?;
        let (h, w) = (grid.len(), grid[0].len());
        let mut start = None;
        for (r, row) in grid.iter().enumerate() {
            for (c, &cell) in row.iter().enumerate() {
                match cell {
                    '.' | '#' => {}
                    'S' if start.is_none() => start = Some(r * w + c),
                    'S' => return Err(EnvError::Invalid("more than one start cell".into())),
                    'a'..='z' => {
                        let idx = cell as usize - 'a' as usize;
                        if idx >= self.treasures.len() {
                            return Err(EnvError::Invalid(format!("treasure '{cell}' has no value")));
                        }
                    }
                    other => return Err(EnvError::Invalid(format!("unexpected cell '{other}'"))),
                }
            }
        }
        let start = start.ok_or_else(|| EnvError::Invalid("no start cell".into()))?;
        let treasure_at = |r: usize, c: usize| match grid[r][c] {
            ch @ 'a'..='z' => Some(self.treasures[ch as usize - 'a' as usize]),
            _ => None,
        };
        let states = h * w;
        let mut next = Vec::with_capacity(states * 4);
        let mut rewards = Vec::with_capacity(states * 8);
        let mut terminal = Vec::with_capacity(states * 4);
        for r in 0..h {
            for c in 0..w {
                for &(dr, dc) in &MOVES {
                    let occupiable = |rr: usize, cc: usize| grid[rr][cc] != '#';
                    let (nr, nc) = step_in_grid(r, c, dr, dc, h, w, occupiable);
                    // Treasure and rock cells are never stepped from; they loop in place.
                    let stuck = grid[r][c] == '#' || treasure_at(r, c).is_some();
                    let (nr, nc) = if stuck { (r, c) } else { (nr, nc) };
                    next.push(nr * w + nc);
                    match treasure_at(nr, nc) {
                        Some(value) if !stuck => {
                            rewards.extend_from_slice(&[value, -1.0]);
                            terminal.push(true);
                        }
                        _ => {
                            rewards.extend_from_slice(&[0.0, -1.0]);
                            terminal.push(stuck && treasure_at(r, c).is_some());
                        }
                    }
                }
            }
        }
        let mut mu = vec![0.0; states];
        mu[start] = 1.0;
        let spec = MomdpSpec {
            state_count: states,
            action_count: 4,
            objective_count: 2,
            discount: self.gamma,
            max_episode_steps: self.max_episode_steps,
            initial_state_distribution: mu,
        };
        TabularEnv::new(self.name.clone(), spec, next, rewards, terminal, ref_point)
    }

    fn build_minecart(&self, ref_point: ReferencePoint) -> Result<TabularEnv, EnvError> {
        const CARGO: usize = 3; // empty, ore A, ore B
        let grid = self.grid()?;
        let (h, w) = (grid.len(), grid[0].len());
        let mut depot = None;
        let (mut has_a, mut has_b) = (false, false);
        for (r, row) in grid.iter().enumerate() {
            for (c, &cell) in row.iter().enumerate() {
                match cell {
                    '.' | '#' => {}
                    'D' if depot.is_none() => depot = Some(r * w + c),
                    'A' => has_a = true,
                    'B' => has_b = true,
                    other => return Err(EnvError::Invalid(format!("unexpected cell '{other}'"))),
                }
            }
        }
        let depot = depot.ok_or_else(|| EnvError::Invalid("need exactly one depot".into()))?;
        if !(has_a && has_b) {
            return Err(EnvError::Invalid("need at least one A and one B mine".into()));
        }
        let states = h * w * CARGO;
        let mut next = Vec::with_capacity(states * 4);
        let mut rewards = Vec::with_capacity(states * 12);
        let mut terminal = Vec::with_capacity(states * 4);
        for r in 0..h {
            for c in 0..w {
                for cargo in 0..CARGO {
                    for &(dr, dc) in &MOVES {
                        let occupiable = |rr: usize, cc: usize| grid[rr][cc] != '#';
                        let (nr, nc) = step_in_grid(r, c, dr, dc, h, w, occupiable);
                        let cell = grid[nr][nc];
                        let mut reward = [0.0, 0.0, -1.0];
                        let mut done = false;
                        let new_cargo = match (cell, cargo) {
                            ('A', 0) => 1,
                            ('B', 0) => 2,
                            ('D', k) if k > 0 => {
                                reward[k - 1] = 1.0;
                                done = true;
                                0
                            }
                            (_, k) => k,
                        };
                        next.push((nr * w + nc) * CARGO + new_cargo);
                        rewards.extend_from_slice(&reward);
                        terminal.push(done);
                    }
                }
            }
        }
        let mut mu = vec![0.0; states];
        mu[depot * CARGO] = 1.0;
        let spec = MomdpSpec {
            state_count: states,
            action_count: 4,
            objective_count: 3,
            discount: self.gamma,
            max_episode_steps: self.max_episode_steps,
            initial_state_distribution: mu,
        };
        TabularEnv::new(self.name.clone(), spec, next, rewards, terminal, ref_point)
    }
}

fn step_in_grid(
    r: usize,
    c: usize,
    dr: isize,
    dc: isize,
    h: usize,
    w: usize,
    occupiable: impl Fn(usize, usize) -> bool,
) -> (usize, usize) {
    let nr = r as isize + dr;
    let nc = c as isize + dc;
    if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
        return (r, c);
    }
    let (nr, nc) = (nr as usize, nc as usize);
    if occupiable(nr, nc) {
        (nr, nc)
    } else {
        (r, c)
    }
}
