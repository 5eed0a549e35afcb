//! The JSON game specification and its conversion into library types.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use honrep::strategies::ScriptedQuality;
use honrep::{ActionSet, Environment64, QualityGame64, SignalStructure64, StageGame64};
use serde::{Deserialize, Serialize};

/// Marks errors caused by the user's input; these exit with status 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub fn input_error(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(InputError(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDocument {
    pub game: GameSection,
    pub environment: Vec<EnvEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signals: Option<SignalSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<QualitySection>,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default)]
    pub bound: BoundSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSection {
    pub theta: Vec<String>,
    pub a: Vec<String>,
    pub b: Vec<String>,
    /// `u1[theta][a][b]`
    pub u1: Vec<Vec<Vec<f64>>>,
    /// `u2[a][b]`
    pub u2: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvEntry {
    pub theta: String,
    pub subset: Vec<String>,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSection {
    pub y: Vec<String>,
    /// `f[a][m][y]`
    pub f: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<ZSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZSection {
    pub labels: Vec<String>,
    /// `g[m][a][z]`
    pub g: Vec<Vec<Vec<f64>>>,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualitySection {
    pub a: Vec<String>,
    pub x: Vec<String>,
    pub b: Vec<String>,
    /// `u1[a][b]`
    pub u1: Vec<Vec<f64>>,
    /// `u2[x][b]`
    pub u2: Vec<Vec<f64>>,
    /// `g[a][x]`
    pub g: Vec<Vec<f64>>,
    pub opportunistic: QualityScript,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityScript {
    pub effort: String,
    /// Fixed claim; omitted means truthful.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claim: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Opponent {
    MyopicGreedy,
    MimicHonest,
    ThresholdMilking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Responder {
    BoundMode,
    Myopic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlayerSpec {
    Honest,
    Opportunistic,
    Drawn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub delta: f64,
    pub horizon: Option<u64>,
    pub seeds: usize,
    pub seed: u64,
    pub eta: Option<f64>,
    pub variant: String,
    pub pi0: f64,
    pub player: PlayerSpec,
    pub memory_k: Option<usize>,
    pub opponent: Opponent,
    /// Belief above which the threshold opponent starts cheating.
    pub threshold: Option<f64>,
    pub responder: Responder,
    /// Episodes written to the trajectory CSV.
    pub trajectories: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            delta: 0.99,
            horizon: None,
            seeds: 100,
            seed: 0,
            eta: None,
            variant: "baseline".into(),
            pi0: 0.1,
            player: PlayerSpec::Honest,
            memory_k: None,
            opponent: Opponent::MyopicGreedy,
            threshold: None,
            responder: Responder::BoundMode,
            trajectories: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveSection {
    /// Restrict the low-payoff construction to proper subsets of A.
    pub exclude_full_set: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundSection {
    /// Overrides `1 - P(omega = A)` in the payoff bound.
    pub epsilon: Option<f64>,
    /// Tremble and credibility threshold for the blind-announcement constants.
    pub corollary3: Option<Corollary3Section>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Corollary3Section {
    pub eta: f64,
    pub xi: f64,
}

/// Library objects built from a validated document.
pub struct Model {
    pub doc: SpecDocument,
    pub game: StageGame64,
    pub env: Environment64,
    pub signals: SignalStructure64,
    pub quality: Option<(QualityGame64, ScriptedQuality)>,
}

fn index_of(labels: &[String], label: &str, section: &str) -> Result<usize> {
    labels
        .iter()
        .position(|l| l == label)
        .ok_or_else(|| input_error(format!("{section}: unknown label `{label}`")))
}

fn in_section<T>(section: &str, r: honrep::Result<T>) -> Result<T> {
    r.map_err(|e| input_error(format!("{section}: {e}")))
}

pub fn parse(text: &str) -> Result<SpecDocument> {
    serde_json::from_str(text).map_err(|e| input_error(format!("spec: {e}")))
}

pub fn load(path: &Path) -> Result<Model> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| input_error(format!("reading {}: {e}", path.display())))?;
    build(parse(&text)?).with_context(|| format!("in {}", path.display()))
}

pub fn build(doc: SpecDocument) -> Result<Model> {
    let g = &doc.game;
    let game = in_section(
        "game",
        StageGame64::new(
            g.theta.clone(),
            g.a.clone(),
            g.b.clone(),
            g.u1.clone(),
            g.u2.clone(),
        ),
    )?;
    let mut entries = Vec::with_capacity(doc.environment.len());
    for e in &doc.environment {
        let theta = index_of(&g.theta, &e.theta, "environment")?;
        let acts = e
            .subset
            .iter()
            .map(|l| index_of(&g.a, l, "environment"))
            .collect::<Result<Vec<_>>>()?;
        if acts.is_empty() {
            bail!(InputError(
                "environment: feasible subsets must be nonempty".into()
            ));
        }
        entries.push((theta, ActionSet::from_actions(&acts), e.p));
    }
    let env = in_section(
        "environment",
        Environment64::from_entries(g.theta.len(), g.a.len(), &entries),
    )?;
    let signals = match &doc.signals {
        None => SignalStructure64::keep_word(g.a.len()),
        Some(s) => {
            let base = in_section("signals", SignalStructure64::new(s.y.clone(), s.f.clone()))?;
            if base.n_a() != g.a.len() {
                bail!(InputError(
                    "signals: F must be indexed by the game's actions".into()
                ));
            }
            match &s.z {
                None => base,
                Some(z) => in_section("signals", base.with_z(z.labels.clone(), z.g.clone(), z.k))?,
            }
        }
    };
    let quality = match &doc.quality {
        None => None,
        Some(q) => {
            let qg = in_section(
                "quality",
                QualityGame64::new(
                    q.a.clone(),
                    q.x.clone(),
                    q.b.clone(),
                    q.u1.clone(),
                    q.u2.clone(),
                    q.g.clone(),
                ),
            )?;
            let effort = index_of(&q.a, &q.opportunistic.effort, "quality")?;
            let claim = match &q.opportunistic.claim {
                None => None,
                Some(c) => Some(index_of(&q.x, c, "quality")?),
            };
            Some((qg, ScriptedQuality { effort, claim }))
        }
    };
    Ok(Model {
        doc,
        game,
        env,
        signals,
        quality,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BUNDLED: &str = include_str!("../specs/product_choice.json");

    #[test]
    fn bundled_spec_round_trips() {
        let doc = parse(BUNDLED).unwrap();
        let again = parse(&serde_json::to_string(&doc).unwrap()).unwrap();
        assert_eq!(doc, again);
        let (a, b) = (build(doc).unwrap(), build(again).unwrap());
        assert_eq!(a.game, b.game);
        assert_eq!(a.env, b.env);
        assert_eq!(a.signals, b.signals);
        assert!((a.env.rho_lower() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(BUNDLED).unwrap();
        v["sim"]["deltaa"] = 0.5.into();
        let err = parse(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("deltaa"), "{err}");
    }

    #[test]
    fn bad_probabilities_name_the_section() {
        let mut doc = parse(BUNDLED).unwrap();
        doc.environment[0].p -= 0.1;
        let err = build(doc).err().unwrap();
        assert!(err.to_string().starts_with("environment"), "{err}");
        assert!(err.downcast_ref::<InputError>().is_some());
    }
}
