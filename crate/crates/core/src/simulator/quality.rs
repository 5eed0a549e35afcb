//! Sequential variant: player 1 exerts effort, privately sees the realised
//! quality and then announces a quality level.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::{
    aggregate, episode_rng, uniform, EpisodeSummary, PeriodRecord, PlayerType, SimConfig,
    SimResult, Sink, SummarySink, Trajectory, TrajectorySink, Variant,
};
use crate::beliefs::{bayes_update_type, Assessment, BeliefState};
use crate::error::{invalid, Error, Result};
use crate::game::{argmax_set, StageGame};
use crate::scalar::{is_distribution, sample_index, Scalar};
use crate::strategies::{Player2Policy, QualityPolicy, ResponderView};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityGame<S> {
    a_labels: Vec<String>,
    x_labels: Vec<String>,
    b_labels: Vec<String>,
    /// `u1[a][b]`
    u1: Vec<Vec<S>>,
    /// `u2[x][b]`
    u2: Vec<Vec<S>>,
    /// `g[a][x]`, the quality distribution given effort
    g: Vec<Vec<S>>,
    br: Vec<Vec<usize>>,
}

impl<S: Scalar> QualityGame<S> {
    pub fn new(
        a_labels: Vec<String>,
        x_labels: Vec<String>,
        b_labels: Vec<String>,
        u1: Vec<Vec<S>>,
        u2: Vec<Vec<S>>,
        g: Vec<Vec<S>>,
    ) -> Result<Self> {
        let (na, nx, nb) = (a_labels.len(), x_labels.len(), b_labels.len());
        if na == 0 || nx == 0 || nb == 0 {
            return invalid("quality game label sets must be nonempty");
        }
        if u1.len() != na || u1.iter().any(|r| r.len() != nb) {
            return invalid(format!("u1 must be {na}x{nb}"));
        }
        if u2.len() != nx || u2.iter().any(|r| r.len() != nb) {
            return invalid(format!("u2 must be {nx}x{nb}"));
        }
        if g.len() != na || g.iter().any(|r| r.len() != nx) {
            return invalid(format!("g must be {na}x{nx}"));
        }
        if u1.iter().chain(u2.iter()).flatten().any(|v| !v.is_finite()) {
            return invalid("payoffs must be finite");
        }
        for (a, row) in g.iter().enumerate() {
            if !is_distribution(row, S::prob_tol()) {
                return invalid(format!("g(.|{}) is not a distribution", a_labels[a]));
            }
        }
        let br = u2
            .iter()
            .map(|row| argmax_set(row.iter().copied()))
            .collect();
        Ok(Self {
            a_labels,
            x_labels,
            b_labels,
            u1,
            u2,
            g,
            br,
        })
    }

    /// Two-action example where quality reveals effort exactly. Effort and
    /// quality labels are ordered `[L, H]`, replies `[N, T]`.
    pub fn deterministic_example() -> Self {
        let s = |v: f64| S::of(v);
        let g = vec![vec![s(1.0), s(0.0)], vec![s(0.0), s(1.0)]];
        Self::example_with_g(g).expect("example tables are well-formed")
    }

    /// The same payoffs with quality noise: `g(H|H) = p_hh`, `g(H|L) = p_hl`.
    pub fn noisy_example(p_hh: S, p_hl: S) -> Result<Self> {
        Self::example_with_g(vec![
            vec![S::one() - p_hl, p_hl],
            vec![S::one() - p_hh, p_hh],
        ])
    }

    fn example_with_g(g: Vec<Vec<S>>) -> Result<Self> {
        let s = |v: f64| S::of(v);
        let labels = || vec!["L".to_string(), "H".to_string()];
        Self::new(
            labels(),
            labels(),
            vec!["N".into(), "T".into()],
            vec![vec![s(0.0), s(2.0)], vec![s(-1.0), s(1.0)]],
            vec![vec![s(0.0), s(-2.0)], vec![s(0.0), s(2.0)]],
            g,
        )
    }

    pub fn a_labels(&self) -> &[String] {
        &self.a_labels
    }
    pub fn x_labels(&self) -> &[String] {
        &self.x_labels
    }
    pub fn b_labels(&self) -> &[String] {
        &self.b_labels
    }
    pub fn n_a(&self) -> usize {
        self.a_labels.len()
    }
    pub fn n_x(&self) -> usize {
        self.x_labels.len()
    }
    pub fn n_b(&self) -> usize {
        self.b_labels.len()
    }
    pub fn u1(&self, a: usize, b: usize) -> S {
        self.u1[a][b]
    }
    pub fn u2(&self, x: usize, b: usize) -> S {
        self.u2[x][b]
    }
    pub fn u2_table(&self) -> &[Vec<S>] {
        &self.u2
    }
    pub fn g(&self, a: usize) -> &[S] {
        &self.g[a]
    }
    pub fn best_replies(&self, x: usize) -> &[usize] {
        &self.br[x]
    }

    /// Player 1's worst reply-consistent payoff after announcing quality `x`
    /// with effort `a`: `min_{b in BR2(x)} u1(a, b)`.
    pub fn trusted_value(&self, a: usize, x: usize) -> S {
        self.br[x]
            .iter()
            .map(|&b| self.u1[a][b])
            .fold(S::infinity(), S::min)
    }

    /// `min_{(a,x)} g(x|a)`
    pub fn g_lower(&self) -> S {
        self.g.iter().flatten().copied().fold(S::infinity(), S::min)
    }

    pub fn has_full_support(&self) -> bool {
        self.g_lower() > S::zero()
    }

    pub fn lowest_payoff(&self) -> S {
        self.u1
            .iter()
            .flatten()
            .copied()
            .fold(S::infinity(), S::min)
    }

    pub fn payoff_range(&self) -> S {
        let hi = self
            .u1
            .iter()
            .flatten()
            .copied()
            .fold(S::neg_infinity(), S::max);
        hi - self.lowest_payoff()
    }

    /// One-state announcement game whose action stage is effort and whose
    /// player-2 payoff is the quality-expected `u2`. With a deterministic `g`
    /// this is the baseline model exactly.
    pub fn to_stage_game(&self) -> Result<StageGame<S>> {
        let (na, nb) = (self.n_a(), self.n_b());
        let u2: Vec<Vec<S>> = (0..na)
            .map(|a| {
                (0..nb)
                    .map(|b| {
                        (0..self.n_x()).fold(S::zero(), |acc, x| acc + self.g[a][x] * self.u2[x][b])
                    })
                    .collect()
            })
            .collect();
        StageGame::new(
            vec!["state".into()],
            self.a_labels.clone(),
            self.b_labels.clone(),
            vec![self.u1.clone()],
            u2,
        )
    }
}

/// Whether the quality belief `q` makes some best reply to `target` strictly
/// better than every other reply.
pub fn quality_forced<S: Scalar>(game: &QualityGame<S>, q: &[S], target: usize) -> bool {
    let value = |b: usize| (0..game.n_x()).fold(S::zero(), |acc, x| acc + q[x] * game.u2(x, b));
    let br = game.best_replies(target);
    let outside = (0..game.n_b())
        .filter(|b| !br.contains(b))
        .map(value)
        .fold(S::neg_infinity(), S::max);
    br.iter().any(|&b| value(b) > outside)
}

#[derive(Clone)]
pub struct QualityPlayers<S> {
    pub honest: Arc<dyn QualityPolicy<S>>,
    pub opportunistic: Arc<dyn QualityPolicy<S>>,
    pub responder: Arc<dyn Player2Policy<S>>,
}

struct Laws<S> {
    /// effort distribution
    effort: Vec<S>,
    /// `x * nx + m`
    announce: Vec<S>,
}

fn laws<S: Scalar>(game: &QualityGame<S>, pol: &dyn QualityPolicy<S>, t: u64, pi: S) -> Laws<S> {
    let nx = game.n_x();
    let mut effort = vec![S::zero(); game.n_a()];
    pol.effort(t, pi, &mut effort);
    let mut announce = vec![S::zero(); nx * nx];
    for x in 0..nx {
        pol.announce(t, pi, x, &mut announce[x * nx..(x + 1) * nx]);
    }
    Laws { effort, announce }
}

/// `m * nx + x`
fn joint<S: Scalar>(game: &QualityGame<S>, l: &Laws<S>) -> Vec<S> {
    let nx = game.n_x();
    let mut j = vec![S::zero(); nx * nx];
    for (a, &pa) in l.effort.iter().enumerate() {
        for x in 0..nx {
            let px = pa * game.g(a)[x];
            for m in 0..nx {
                j[m * nx + x] = j[m * nx + x] + px * l.announce[x * nx + m];
            }
        }
    }
    j
}

fn run_quality<S: Scalar, K: Sink<S>>(
    cfg: &SimConfig<S>,
    game: &QualityGame<S>,
    players: &QualityPlayers<S>,
    episode: u64,
    sink: &mut K,
) -> Result<bool> {
    let mut rng = episode_rng(cfg.master_seed, episode);
    let honest = match cfg.player_type {
        PlayerType::Honest => true,
        PlayerType::Opportunistic => false,
        PlayerType::Drawn => uniform::<S>(&mut rng) < cfg.pi0,
    };
    let (nx, nb) = (game.n_x(), game.n_b());
    let stationary = players.honest.is_stationary()
        && players.opportunistic.is_stationary()
        && players.responder.is_stationary();
    let mut belief = BeliefState::new(cfg.pi0)?;
    let mut cache: Option<(u64, Assessment<S>, bool, Vec<S>)> = None;
    let mut fixed: Option<(Laws<S>, Laws<S>)> = None;
    for t in 0..cfg.horizon() {
        if fixed.is_none() || !stationary {
            fixed = Some((
                laws(game, &*players.honest, t, belief.pi),
                laws(game, &*players.opportunistic, t, belief.pi),
            ));
            cache = None;
        }
        let (lh, lo) = fixed.as_ref().expect("laws");
        let (jh, jo) = (joint(game, lh), joint(game, lo));
        let keep = |j: &[S]| (0..nx).fold(S::zero(), |acc, m| acc + j[m * nx + m]);
        let (k_h, k_o) = (keep(&jh), keep(&jo));

        let key = belief.pi.f64().to_bits();
        if cache.as_ref().is_none_or(|c| c.0 != key) {
            let asm = Assessment::from_joint(belief.pi, &jh, &jo, nx);
            let nu = (0..nx).all(|x| {
                asm.alpha[x] > S::zero() && quality_forced(game, asm.conditional_row(x), x)
            });
            let mut resp = vec![S::zero(); nx * nb];
            for m in 0..nx {
                let view = ResponderView {
                    m,
                    assessment: &asm,
                    t,
                    pi: belief.pi,
                };
                players
                    .responder
                    .respond(&view, &mut resp[m * nb..(m + 1) * nb]);
            }
            cache = Some((key, asm, nu, resp));
        }
        let (_, asm, nu, resp) = cache.as_ref().expect("cache");

        let own = if honest { lh } else { lo };
        let a = sample_index(&own.effort, uniform(&mut rng));
        let x = sample_index(game.g(a), uniform(&mut rng));
        let m = sample_index(&own.announce[x * nx..(x + 1) * nx], uniform(&mut rng));
        if honest && m != x {
            return Err(Error::Internal("honest quality type misreported".into()));
        }
        let b = sample_index(&resp[m * nb..(m + 1) * nb], uniform(&mut rng));
        let y = usize::from(m == x);
        let lik = |k: S| if y == 1 { k } else { S::one() - k };
        let before = belief;
        belief = bayes_update_type(belief, lik(k_h).max(S::zero()), lik(k_o).max(S::zero()))?;
        let xi_m = asm.xi_of_m[m];
        sink.period(&PeriodRecord {
            t,
            theta: 0,
            omega: 0,
            m,
            a,
            b,
            y,
            x: Some(x),
            z: None,
            pi_before: before.pi,
            pi_after: belief.pi,
            log_lr: before.log_lr,
            xi_m,
            nu: *nu,
            bad: xi_m <= cfg.lambda_bar,
            stage_payoff: game.u1(a, b),
        });
    }
    Ok(honest)
}

fn check_quality_cfg<S: Scalar>(cfg: &SimConfig<S>) -> Result<()> {
    cfg.validate()?;
    if cfg.variant != Variant::QualityAnnouncement {
        return invalid("configuration is not the quality-announcement variant");
    }
    Ok(())
}

/// One episode of the quality-announcement game with every period kept.
pub fn run_quality_variant<S: Scalar>(
    cfg: &SimConfig<S>,
    game: &QualityGame<S>,
    players: &QualityPlayers<S>,
    episode: u64,
) -> Result<Trajectory<S>> {
    check_quality_cfg(cfg)?;
    let mut sink = TrajectorySink {
        periods: Vec::new(),
        summary: SummarySink::new(cfg.delta, cfg.pi0),
    };
    let honest = run_quality(cfg, game, players, episode, &mut sink)?;
    Ok(Trajectory {
        honest,
        payoff: sink.summary.payoff,
        periods: sink.periods,
    })
}

pub fn estimate_quality<S: Scalar>(
    cfg: &SimConfig<S>,
    game: &QualityGame<S>,
    players: &QualityPlayers<S>,
) -> Result<SimResult<S>> {
    check_quality_cfg(cfg)?;
    let episodes: Vec<EpisodeSummary<S>> = (0..cfg.num_seeds as u64)
        .into_par_iter()
        .map(|i| {
            let mut sink = SummarySink::new(cfg.delta, cfg.pi0);
            let honest = run_quality(cfg, game, players, i, &mut sink)?;
            Ok(sink.finish(honest))
        })
        .collect::<Result<_>>()?;
    let fingerprint = game.to_stage_game().map(|g| g.fingerprint()).unwrap_or(0);
    Ok(aggregate(cfg, &episodes, game.payoff_range(), fingerprint))
}
