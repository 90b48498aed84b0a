//! JSON documents under the `rmg-v1` schema.
//!
//! Every document carries `"schema": "rmg-v1"` and, except instance files, a `"kind"`.
//! Numbers are written in shortest round-trip form, so reloading reproduces every `f64` exactly.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{dim, Error, Result};
use crate::game::GameSpec;
use crate::planner::RmgInstance;
use crate::reward::RewardSet;
use crate::transition::TransitionSet;

pub const SCHEMA: &str = "rmg-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardEntry {
    pub player: usize,
    pub step: usize,
    pub state: usize,
    #[serde(flatten)]
    pub set: RewardSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionEntry {
    pub step: usize,
    pub state: usize,
    #[serde(flatten)]
    pub set: TransitionSet,
}

/// On-disk instance: the game fields at top level plus optional uncertainty lists.
/// An absent list means every set of that kind is a singleton; a present list must cover every
/// slot exactly once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub schema: String,
    #[serde(flatten)]
    pub game: GameSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reward_uncertainty: Vec<RewardEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transition_uncertainty: Vec<TransitionEntry>,
    #[serde(default)]
    pub decomposable: bool,
}

fn check_header(doc: &Value, kind: Option<&str>) -> Result<()> {
    let found = doc.get("schema").and_then(Value::as_str).unwrap_or("");
    if found != SCHEMA {
        return Err(Error::Schema { found: found.into(), expected: SCHEMA });
    }
    if let Some(kind) = kind {
        let k = doc.get("kind").and_then(Value::as_str).unwrap_or("");
        if k != kind {
            return Err(Error::InvalidParameter(format!("expected a {kind} document, found kind {k:?}")));
        }
    }
    Ok(())
}

/// Serializes `body` with the schema and kind fields prepended.
pub fn to_document<T: Serialize>(kind: &str, body: &T) -> Result<String> {
    let mut map = serde_json::Map::new();
    map.insert("schema".into(), SCHEMA.into());
    map.insert("kind".into(), kind.into());
    match serde_json::to_value(body)? {
        Value::Object(fields) => map.extend(fields),
        other => {
            map.insert("data".into(), other);
        }
    }
    let mut s = serde_json::to_string_pretty(&Value::Object(map))?;
    s.push('\n');
    Ok(s)
}

/// Parses a document of the given kind.
pub fn from_document<T: DeserializeOwned>(kind: &str, text: &str) -> Result<T> {
    let doc: Value = serde_json::from_str(text)?;
    check_header(&doc, Some(kind))?;
    Ok(serde_json::from_value(doc)?)
}

pub fn instance_to_json(inst: &RmgInstance) -> Result<String> {
    let g = &inst.game;
    let mut reward_uncertainty = vec![];
    if inst.reward.iter().flatten().flatten().any(|s| *s != RewardSet::Singleton) {
        for (player, ri) in inst.reward.iter().enumerate() {
            for (step, rh) in ri.iter().enumerate() {
                for (state, set) in rh.iter().enumerate() {
                    reward_uncertainty.push(RewardEntry { player, step, state, set: set.clone() });
                }
            }
        }
    }
    let mut transition_uncertainty = vec![];
    if inst.transition.iter().flatten().any(|s| !s.is_singleton()) {
        for (step, th) in inst.transition.iter().enumerate() {
            for (state, set) in th.iter().enumerate() {
                transition_uncertainty.push(TransitionEntry { step, state, set: set.clone() });
            }
        }
    }
    let file = InstanceFile {
        schema: SCHEMA.into(),
        game: g.spec().clone(),
        reward_uncertainty,
        transition_uncertainty,
        decomposable: inst.decomposable,
    };
    let mut s = serde_json::to_string_pretty(&file)?;
    s.push('\n');
    Ok(s)
}

/// Parses and validates an instance (or a plain game, read with singleton sets).
pub fn instance_from_json(text: &str) -> Result<RmgInstance> {
    let doc: Value = serde_json::from_str(text)?;
    check_header(&doc, None)?;
    if let Some(k) = doc.get("kind").and_then(Value::as_str) {
        if k != "instance" && k != "game" {
            return Err(Error::InvalidParameter(format!("expected an instance document, found kind {k:?}")));
        }
    }
    let file: InstanceFile = serde_json::from_value(doc)?;
    let game = file.game.validate()?;
    let (n, hn, sn) = (game.num_players, game.horizon, game.states);

    let mut reward = vec![vec![vec![RewardSet::Singleton; sn]; hn]; n];
    if !file.reward_uncertainty.is_empty() {
        let mut seen = BTreeMap::new();
        for e in file.reward_uncertainty {
            if e.player >= n || e.step >= hn || e.state >= sn {
                return Err(dim(format!(
                    "reward_uncertainty entry (player {}, step {}, state {}) is out of range",
                    e.player, e.step, e.state
                )));
            }
            if seen.insert((e.player, e.step, e.state), ()).is_some() {
                return Err(dim(format!(
                    "reward_uncertainty lists (player {}, step {}, state {}) twice",
                    e.player, e.step, e.state
                )));
            }
            reward[e.player][e.step][e.state] = e.set;
        }
        if seen.len() != n * hn * sn {
            return Err(dim(format!(
                "reward_uncertainty covers {} of {} (player, step, state) slots",
                seen.len(),
                n * hn * sn
            )));
        }
    }

    let steps = hn - 1;
    let mut transition = vec![vec![TransitionSet::Singleton; sn]; steps];
    if !file.transition_uncertainty.is_empty() {
        let mut seen = BTreeMap::new();
        for e in file.transition_uncertainty {
            if e.step >= steps || e.state >= sn {
                return Err(dim(format!(
                    "transition_uncertainty entry (step {}, state {}) is out of range",
                    e.step, e.state
                )));
            }
            if seen.insert((e.step, e.state), ()).is_some() {
                return Err(dim(format!("transition_uncertainty lists (step {}, state {}) twice", e.step, e.state)));
            }
            transition[e.step][e.state] = e.set;
        }
        if seen.len() != steps * sn {
            return Err(dim(format!(
                "transition_uncertainty covers {} of {} (step, state) slots",
                seen.len(),
                steps * sn
            )));
        }
    }
    RmgInstance::new(game, reward, transition, file.decomposable)
}

pub fn read_to_string(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

/// Writes through a temporary sibling and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp~");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
