//! Policies for both player-1 types and for the short-run player 2, and the
//! finite-automaton profile behind the low-payoff equilibrium.
//!
//! Shipped policies are Markov: they see the state, the feasible set, the
//! period and the public belief, never the full private history.

use std::sync::Arc;

use serde::Serialize;

use crate::beliefs::Assessment;
use crate::error::{invalid, Error, Result};
use crate::game::{first_argmax, ActionSet, StageGame};
use crate::scalar::Scalar;
use crate::simulator::quality::QualityGame;
use crate::solvers::{
    AuxEquilibrium, NoCommSolution, RecommendationProfile, RecommendationSolution, V1PrimeWitness,
};

/// What a player-1 policy may condition on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct View<S> {
    pub theta: usize,
    /// `None` while announcing before feasibility is revealed.
    pub omega: Option<ActionSet>,
    pub t: u64,
    /// Public belief that player 1 is honest.
    pub pi: S,
}

pub trait Player1Policy<S: Scalar>: Send + Sync {
    fn name(&self) -> String;
    /// Writes a distribution over announcements into `out`.
    fn announce(&self, view: &View<S>, out: &mut [S]);
    /// Writes a distribution over actions, supported in `view.omega`.
    fn act(&self, view: &View<S>, m: usize, out: &mut [S]);
    /// Output ignores `t` and `pi`, so callers may cache it.
    fn is_stationary(&self) -> bool {
        false
    }
}

/// What player 2 sees when choosing a reply.
#[derive(Debug, Clone, Copy)]
pub struct ResponderView<'a, S> {
    pub m: usize,
    pub assessment: &'a Assessment<S>,
    pub t: u64,
    pub pi: S,
}

pub trait Player2Policy<S: Scalar>: Send + Sync {
    fn name(&self) -> String;
    /// Writes a distribution over B into `out`.
    fn respond(&self, view: &ResponderView<'_, S>, out: &mut [S]);
    /// Output depends on the assessment and `m` only.
    fn is_stationary(&self) -> bool {
        true
    }
}

fn point<S: Scalar>(out: &mut [S], k: usize) {
    out.iter_mut().for_each(|v| *v = S::zero());
    out[k] = S::one();
}

fn uniform_on<S: Scalar>(out: &mut [S], set: ActionSet) {
    let w = S::one() / S::of_usize(set.len());
    out.iter_mut().for_each(|v| *v = S::zero());
    for a in set.iter() {
        out[a] = w;
    }
}

/// Announce `a*(theta)` when feasible, otherwise uniformly over `omega`, and
/// keep the word. When announcing blind, announce `a*(theta)` and fall back to
/// uniform play over `omega` if it turns out infeasible.
#[derive(Debug, Clone)]
pub struct HonestStar {
    a_star: Vec<usize>,
    label: String,
}

pub fn honest_star_policy(a_star: Vec<usize>) -> HonestStar {
    HonestStar {
        a_star,
        label: "honest_star".into(),
    }
}

/// The same behaviour ascribed to the opportunistic type.
pub fn mimic_honest_policy(a_star: Vec<usize>) -> HonestStar {
    HonestStar {
        a_star,
        label: "mimic_honest".into(),
    }
}

impl<S: Scalar> Player1Policy<S> for HonestStar {
    fn name(&self) -> String {
        self.label.clone()
    }
    fn announce(&self, view: &View<S>, out: &mut [S]) {
        let star = self.a_star[view.theta];
        match view.omega {
            Some(w) if !w.contains(star) => uniform_on(out, w),
            _ => point(out, star),
        }
    }
    fn act(&self, view: &View<S>, m: usize, out: &mut [S]) {
        match view.omega {
            Some(w) if !w.contains(m) => uniform_on(out, w),
            _ => point(out, m),
        }
    }
    fn is_stationary(&self) -> bool {
        true
    }
}

/// `u1(theta, a, b_trust(theta, m))` with `b_trust` the worst best reply to `m`.
fn trust_table<S: Scalar>(game: &StageGame<S>) -> Vec<S> {
    let (nt, na) = (game.n_theta(), game.n_a());
    let mut table = Vec::with_capacity(nt * na * na);
    for t in 0..nt {
        for m in 0..na {
            let (k, _) = first_argmax(game.best_replies(m).iter().map(|&b| -game.u1(t, m, b)));
            let b = game.best_replies(m)[k];
            for a in 0..na {
                table.push(game.u1(t, a, b));
            }
        }
    }
    table
}

fn greedy_action<S: Scalar>(
    table: &[S],
    na: usize,
    theta: usize,
    m: usize,
    omega: ActionSet,
) -> usize {
    let row = &table[(theta * na + m) * na..(theta * na + m + 1) * na];
    let mut best = omega.first();
    for a in omega.iter() {
        if row[a] > row[best] + S::payoff_tol() {
            best = a;
        }
    }
    best
}

/// Announces like the honest type, then plays the stage-best feasible action
/// against the reply that the announcement earns when trusted.
#[derive(Debug, Clone)]
pub struct MyopicGreedy<S> {
    a_star: Vec<usize>,
    table: Vec<S>,
    na: usize,
}

pub fn myopic_greedy_policy<S: Scalar>(game: &StageGame<S>, a_star: Vec<usize>) -> MyopicGreedy<S> {
    MyopicGreedy {
        a_star,
        table: trust_table(game),
        na: game.n_a(),
    }
}

impl<S: Scalar> Player1Policy<S> for MyopicGreedy<S> {
    fn name(&self) -> String {
        "myopic_greedy".into()
    }
    fn announce(&self, view: &View<S>, out: &mut [S]) {
        let star = self.a_star[view.theta];
        match view.omega {
            Some(w) if !w.contains(star) => uniform_on(out, w),
            _ => point(out, star),
        }
    }
    fn act(&self, view: &View<S>, m: usize, out: &mut [S]) {
        let omega = view.omega.unwrap_or(ActionSet::full(self.na));
        point(
            out,
            greedy_action(&self.table, self.na, view.theta, m, omega),
        );
    }
    fn is_stationary(&self) -> bool {
        true
    }
}

/// Keeps the word while the public belief is below `threshold`, and plays
/// myopically greedy once the reputation is high enough to milk.
#[derive(Debug, Clone)]
pub struct ThresholdMilking<S> {
    inner: MyopicGreedy<S>,
    threshold: S,
}

pub fn threshold_milking_policy<S: Scalar>(
    game: &StageGame<S>,
    a_star: Vec<usize>,
    threshold: S,
) -> ThresholdMilking<S> {
    ThresholdMilking {
        inner: myopic_greedy_policy(game, a_star),
        threshold,
    }
}

impl<S: Scalar> Player1Policy<S> for ThresholdMilking<S> {
    fn name(&self) -> String {
        format!("threshold_milking({})", self.threshold)
    }
    fn announce(&self, view: &View<S>, out: &mut [S]) {
        self.inner.announce(view, out)
    }
    fn act(&self, view: &View<S>, m: usize, out: &mut [S]) {
        let feasible = view.omega.is_none_or(|w| w.contains(m));
        if view.pi < self.threshold && feasible {
            point(out, m)
        } else {
            self.inner.act(view, m, out)
        }
    }
}

/// Mixes `(1 - eta |A|)` of the wrapped announcement with `eta` on every `m`.
pub struct Tremble<S> {
    inner: Arc<dyn Player1Policy<S>>,
    eta: S,
}

pub fn tremble_wrap<S: Scalar>(
    inner: Arc<dyn Player1Policy<S>>,
    eta: S,
    n_a: usize,
) -> Result<Tremble<S>> {
    if !(eta >= S::zero()) || eta * S::of_usize(n_a) > S::one() + S::prob_tol() {
        return invalid(format!(
            "tremble {eta} with {n_a} announcements exceeds total mass 1"
        ));
    }
    Ok(Tremble { inner, eta })
}

impl<S: Scalar> Player1Policy<S> for Tremble<S> {
    fn name(&self) -> String {
        format!("tremble({}, {})", self.inner.name(), self.eta)
    }
    fn announce(&self, view: &View<S>, out: &mut [S]) {
        self.inner.announce(view, out);
        let keep = S::one() - self.eta * S::of_usize(out.len());
        for v in out.iter_mut() {
            *v = keep * *v + self.eta;
        }
    }
    fn act(&self, view: &View<S>, m: usize, out: &mut [S]) {
        self.inner.act(view, m, out)
    }
    fn is_stationary(&self) -> bool {
        self.inner.is_stationary()
    }
}

/// Player 2 in the worst case the payoff bound allows: best replies (the worst
/// one for player 1) only when the announcement is credible, `xi(m) > lambda`,
/// and otherwise the reply that hurts player 1 most against `m`.
#[derive(Debug, Clone)]
pub struct BoundModeResponder {
    trusted: Vec<usize>,
    punishing: Vec<usize>,
    lambda: f64,
}

impl BoundModeResponder {
    pub fn trusted_reply(&self, m: usize) -> usize {
        self.trusted[m]
    }
    pub fn punishing_reply(&self, m: usize) -> usize {
        self.punishing[m]
    }
}

/// Expected player-1 payoffs use the state prior because player 2 never
/// sees `theta`.
pub fn bound_mode_player2<S: Scalar>(
    game: &StageGame<S>,
    p_theta: &[S],
    lambda_bar: S,
) -> BoundModeResponder {
    let expected = |a: usize, b: usize| {
        (0..game.n_theta()).fold(S::zero(), |acc, t| acc + p_theta[t] * game.u1(t, a, b))
    };
    let trusted = (0..game.n_a())
        .map(|m| {
            let br = game.best_replies(m);
            br[first_argmax(br.iter().map(|&b| -expected(m, b))).0]
        })
        .collect();
    let punishing = (0..game.n_a())
        .map(|m| first_argmax((0..game.n_b()).map(|b| -expected(m, b))).0)
        .collect();
    BoundModeResponder {
        trusted,
        punishing,
        lambda: lambda_bar.f64(),
    }
}

/// The same responder for the quality game, judging player 1's payoff at the
/// reference effort `a_ref` (the optimal commitment effort).
pub fn bound_mode_quality<S: Scalar>(
    game: &QualityGame<S>,
    a_ref: usize,
    lambda_bar: S,
) -> BoundModeResponder {
    let trusted = (0..game.n_x())
        .map(|x| {
            let br = game.best_replies(x);
            br[first_argmax(br.iter().map(|&b| -game.u1(a_ref, b))).0]
        })
        .collect();
    let worst = first_argmax((0..game.n_b()).map(|b| -game.u1(a_ref, b))).0;
    BoundModeResponder {
        trusted,
        punishing: vec![worst; game.n_x()],
        lambda: lambda_bar.f64(),
    }
}

impl<S: Scalar> Player2Policy<S> for BoundModeResponder {
    fn name(&self) -> String {
        format!("bound_mode({})", self.lambda)
    }
    fn respond(&self, view: &ResponderView<'_, S>, out: &mut [S]) {
        let credible = view.assessment.xi_of_m[view.m] > S::of(self.lambda);
        let b = if credible {
            self.trusted[view.m]
        } else {
            self.punishing[view.m]
        };
        point(out, b);
    }
}

/// Player 2 best-replying to the assessed conditional action law, first label
/// on ties.
#[derive(Debug, Clone)]
pub struct MyopicResponder<S> {
    u2: Vec<Vec<S>>,
}

pub fn myopic_player2<S: Scalar>(game: &StageGame<S>) -> MyopicResponder<S> {
    MyopicResponder {
        u2: (0..game.n_a())
            .map(|a| (0..game.n_b()).map(|b| game.u2(a, b)).collect())
            .collect(),
    }
}

impl<S: Scalar> Player2Policy<S> for MyopicResponder<S> {
    fn name(&self) -> String {
        "myopic".into()
    }
    fn respond(&self, view: &ResponderView<'_, S>, out: &mut [S]) {
        let q = view.assessment.conditional_row(view.m);
        let nb = out.len();
        let (b, _) = first_argmax((0..nb).map(|b| {
            q.iter()
                .zip(self.u2.iter())
                .fold(S::zero(), |acc, (&w, row)| acc + w * row[b])
        }));
        point(out, b);
    }
}

/// Whether belief `q` over A makes some best reply to `target` strictly better
/// than every other reply.
pub fn strictly_forced<S: Scalar>(game: &StageGame<S>, q: &[S], target: usize) -> bool {
    let br = game.best_replies(target);
    let value = |b: usize| game.u2_against(q, b);
    let outside = (0..game.n_b())
        .filter(|b| !br.contains(b))
        .map(value)
        .fold(S::neg_infinity(), S::max);
    br.iter().any(|&b| value(b) > outside)
}

/// Quality-variant player-1 behaviour: choose effort, then announce a quality
/// after seeing it.
pub trait QualityPolicy<S: Scalar>: Send + Sync {
    fn name(&self) -> String;
    fn effort(&self, t: u64, pi: S, out: &mut [S]);
    fn announce(&self, t: u64, pi: S, x: usize, out: &mut [S]);
    fn is_stationary(&self) -> bool {
        true
    }
}

/// Fixed effort; announces the realised quality or a fixed claim.
#[derive(Debug, Clone)]
pub struct ScriptedQuality {
    pub effort: usize,
    /// `None` announces truthfully.
    pub claim: Option<usize>,
}

impl<S: Scalar> QualityPolicy<S> for ScriptedQuality {
    fn name(&self) -> String {
        match self.claim {
            None => format!("truthful(effort={})", self.effort),
            Some(c) => format!("claim({c}, effort={})", self.effort),
        }
    }
    fn effort(&self, _t: u64, _pi: S, out: &mut [S]) {
        point(out, self.effort)
    }
    fn announce(&self, _t: u64, _pi: S, x: usize, out: &mut [S]) {
        point(out, self.claim.unwrap_or(x))
    }
}

/// Honest quality type committed to the optimal commitment effort.
pub fn quality_honest(effort: usize) -> ScriptedQuality {
    ScriptedQuality {
        effort,
        claim: None,
    }
}

/// Stage behaviour of both player-1 types inside one regime.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StagePlan<S> {
    /// `theta -> distribution over m`
    pub announce: Vec<Vec<S>>,
    /// `theta -> m -> distribution over a`
    pub act: Vec<Vec<Vec<S>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Regime<S> {
    pub label: String,
    pub honest: StagePlan<S>,
    pub opportunistic: StagePlan<S>,
    /// `m -> distribution over B`
    pub response: Vec<Vec<S>>,
    /// next regime indexed by the public signal `y`
    pub next: Vec<usize>,
    /// What player 2 believes about the type in this regime.
    pub belief: String,
}

/// Profile whose play depends on the public history only through a finite
/// regime automaton. The state distribution is the one it was built for.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutomatonProfile<S> {
    pub regimes: Vec<Regime<S>>,
    pub initial: usize,
    pub p_theta: Vec<S>,
}

fn dist<S: Scalar>(n: usize, k: usize) -> Vec<S> {
    let mut v = vec![S::zero(); n];
    v[k] = S::one();
    v
}

fn keep_word_plan<S: Scalar>(
    nt: usize,
    na: usize,
    announce: impl Fn(usize) -> usize,
) -> StagePlan<S> {
    StagePlan {
        announce: (0..nt).map(|t| dist(na, announce(t))).collect(),
        act: (0..nt)
            .map(|_| (0..na).map(|m| dist(na, m)).collect())
            .collect(),
    }
}

/// Equilibrium played after a broken word.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Punishment<S> {
    NoCommunication(AuxEquilibrium<S>),
    Recommendation {
        profile: RecommendationProfile,
        value: S,
    },
}

impl<S: Scalar> Punishment<S> {
    /// The worse of the two auxiliary equilibria for player 1, preferring the
    /// game without communication on ties.
    pub fn worst(no_comm: &NoCommSolution<S>, rec: &RecommendationSolution<S>) -> Self {
        match rec.worst {
            Some(i) if no_comm.v1_min > rec.v_hat_1 => Punishment::Recommendation {
                profile: rec.equilibria[i].profile.clone(),
                value: rec.v_hat_1,
            },
            _ => Punishment::NoCommunication(no_comm.equilibria[no_comm.worst].clone()),
        }
    }

    pub fn value(&self) -> S {
        match self {
            Punishment::NoCommunication(eq) => eq.p1_value,
            Punishment::Recommendation { value, .. } => *value,
        }
    }

    /// As a regime that loops on itself, with every signal pointing at `index`.
    pub fn regime(&self, game: &StageGame<S>, n_y: usize, index: usize) -> Result<Regime<S>> {
        let (nt, na, nb) = (game.n_theta(), game.n_a(), game.n_b());
        let (plan, response) = match self {
            Punishment::NoCommunication(eq) => {
                // a single uninformative message: player 2 learns nothing
                let plan = StagePlan {
                    announce: (0..nt).map(|_| dist(na, 0)).collect(),
                    act: (0..nt)
                        .map(|t| (0..na).map(|_| eq.p1_strategy[t].clone()).collect())
                        .collect(),
                };
                (plan, vec![eq.p2_strategy.clone(); na])
            }
            Punishment::Recommendation { profile, .. } => {
                let mut order: Vec<usize> = Vec::new();
                for &r in &profile.recommendation {
                    if !order.contains(&r) {
                        order.push(r);
                    }
                }
                if order.len() > na {
                    return Err(Error::Construction(format!(
                        "{} recommendations cannot be encoded in {na} announcements",
                        order.len()
                    )));
                }
                for b in 0..nb {
                    if !order.contains(&b) {
                        order.push(b);
                    }
                }
                // message k carries recommendation order[k]; spare messages repeat the first
                let carried: Vec<usize> = (0..na)
                    .map(|k| *order.get(k).unwrap_or(&order[0]))
                    .collect();
                let message_of = |r: usize| {
                    carried
                        .iter()
                        .position(|&c| c == r)
                        .expect("used recommendation")
                };
                let plan = StagePlan {
                    announce: (0..nt)
                        .map(|t| dist(na, message_of(profile.recommendation[t])))
                        .collect(),
                    act: (0..nt)
                        .map(|t| (0..na).map(|_| dist(na, profile.action[t])).collect())
                        .collect(),
                };
                let response = carried
                    .iter()
                    .map(|&r| dist(nb, profile.response[r]))
                    .collect();
                (plan, response)
            }
        };
        Ok(Regime {
            label: "punishment".into(),
            honest: plan.clone(),
            opportunistic: plan,
            response,
            next: vec![index; n_y],
            belief: "opportunistic".into(),
        })
    }
}

/// The low-payoff profile: both types announce the best element of `A'`
/// against `beta` and keep their word; a broken word switches play forever to
/// the punishment equilibrium. Signals are `y = 1{a = m}` with index 1 kept.
pub fn theorem2_profile<S: Scalar>(
    game: &StageGame<S>,
    p_theta: &[S],
    witness: &V1PrimeWitness<S>,
    punishment: &Punishment<S>,
) -> Result<AutomatonProfile<S>> {
    game.validate_p_theta(p_theta)?;
    if punishment.value() > witness.objective + S::payoff_tol() {
        return Err(Error::Construction(format!(
            "punishment value {} exceeds the on-path value {}",
            punishment.value(),
            witness.objective
        )));
    }
    let (nt, na) = (game.n_theta(), game.n_a());
    let on = keep_word_plan(nt, na, |t| witness.on_path_action(game, t));
    let response = (0..na).map(|m| witness.response(m).to_vec()).collect();
    let on_path = Regime {
        label: "on_path".into(),
        honest: on.clone(),
        opportunistic: on,
        response,
        next: vec![1, 0],
        belief: "prior".into(),
    };
    Ok(AutomatonProfile {
        regimes: vec![on_path, punishment.regime(game, 2, 1)?],
        initial: 0,
        p_theta: p_theta.to_vec(),
    })
}

/// Repeating a no-communication equilibrium regardless of announcements.
pub fn stage_nash_profile<S: Scalar>(
    game: &StageGame<S>,
    p_theta: &[S],
    eq: &AuxEquilibrium<S>,
    n_y: usize,
) -> Result<AutomatonProfile<S>> {
    let regime = Punishment::NoCommunication(eq.clone()).regime(game, n_y, 0)?;
    Ok(AutomatonProfile {
        regimes: vec![Regime {
            label: "stage_nash".into(),
            ..regime
        }],
        initial: 0,
        p_theta: p_theta.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{product_choice, stackelberg};
    use crate::solvers::{
        solve_aux_no_comm, solve_aux_recommendation, solve_v1_prime, V1PrimeOptions,
    };

    const L: usize = 0;
    const H: usize = 1;
    const N: usize = 0;
    const T: usize = 1;

    fn view(theta: usize, omega: ActionSet) -> View<f64> {
        View {
            theta,
            omega: Some(omega),
            t: 0,
            pi: 0.5,
        }
    }

    #[test]
    fn honest_star_announcements() {
        let g = product_choice::<f64>();
        let pol = honest_star_policy(stackelberg(&g, &[0.5, 0.5]).unwrap().a_star);
        let mut out = [0.0; 2];
        Player1Policy::<f64>::announce(&pol, &view(0, ActionSet::full(2)), &mut out);
        assert_eq!(out, [0.0, 1.0]);
        Player1Policy::<f64>::announce(&pol, &view(0, ActionSet::singleton(L)), &mut out);
        assert_eq!(out, [1.0, 0.0]);
        // bad state wants L; with three actions and a* missing, uniform
        let three = HonestStar {
            a_star: vec![2],
            label: "x".into(),
        };
        let mut out3 = [0.0; 3];
        Player1Policy::<f64>::announce(
            &three,
            &view(0, ActionSet::from_actions(&[0, 1])),
            &mut out3,
        );
        assert_eq!(out3, [0.5, 0.5, 0.0]);
        Player1Policy::<f64>::act(&pol, &view(0, ActionSet::full(2)), H, &mut out);
        assert_eq!(out, [0.0, 1.0]);
    }

    #[test]
    fn myopic_greedy_breaks_high_promises() {
        let g = product_choice::<f64>();
        let pol = myopic_greedy_policy(&g, vec![H, L]);
        let mut out = [0.0; 2];
        pol.act(&view(0, ActionSet::full(2)), H, &mut out);
        assert_eq!(out, [1.0, 0.0]);
        pol.act(&view(0, ActionSet::singleton(H)), H, &mut out);
        assert_eq!(out, [0.0, 1.0]);
    }

    #[test]
    fn tremble_mixture() {
        let inner: Arc<dyn Player1Policy<f64>> = Arc::new(honest_star_policy(vec![H, L]));
        let wrapped = tremble_wrap(inner.clone(), 0.1, 2).unwrap();
        let mut out = [0.0; 2];
        let blind = View {
            theta: 1,
            omega: None,
            t: 0,
            pi: 0.5,
        };
        wrapped.announce(&blind, &mut out);
        assert!((out[0] - 0.9).abs() < 1e-15 && (out[1] - 0.1).abs() < 1e-15);
        let identity = tremble_wrap(inner.clone(), 0.0, 2).unwrap();
        identity.announce(&blind, &mut out);
        assert_eq!(out, [1.0, 0.0]);
        assert!(tremble_wrap(inner, 0.6, 2).is_err());
    }

    #[test]
    fn bound_mode_replies() {
        let g = product_choice::<f64>();
        let r = bound_mode_player2(&g, &[0.5, 0.5], 0.5);
        let mk = |x: f64| Assessment {
            alpha: vec![0.5, 0.5],
            conditional: vec![1.0, 0.0, 1.0 - x, x],
            xi_of_m: vec![1.0, x],
            xi: 0.5 + 0.5 * x,
        };
        let mut out = [0.0; 2];
        for (x, want) in [(0.9, T), (0.3, N), (0.5, N)] {
            let asm = mk(x);
            r.respond(
                &ResponderView {
                    m: H,
                    assessment: &asm,
                    t: 0,
                    pi: 0.5,
                },
                &mut out,
            );
            assert_eq!(out[want], 1.0, "xi(H) = {x}");
        }
    }

    #[test]
    fn theorem2_product_choice() {
        let g = product_choice::<f64>();
        let p = [0.5, 0.5];
        let nc = solve_aux_no_comm(&g, &p).unwrap();
        let rec = solve_aux_recommendation(&g, &p).unwrap();
        let w = solve_v1_prime(&g, &p, nc.v1_min, rec.v_hat_1, V1PrimeOptions::default()).unwrap();
        let pun = Punishment::worst(&nc, &rec);
        assert!(matches!(pun, Punishment::NoCommunication(_)));
        let prof = theorem2_profile(&g, &p, &w, &pun).unwrap();
        let on = &prof.regimes[0];
        for t in 0..2 {
            assert_eq!(on.honest.announce[t], vec![1.0, 0.0]);
            assert_eq!(on.opportunistic.announce[t], vec![1.0, 0.0]);
        }
        assert_eq!(on.response, vec![vec![1.0, 0.0], vec![1.0, 0.0]]);

        let mut lifted = w.clone();
        lifted.objective = -1.0;
        assert!(theorem2_profile(&g, &p, &lifted, &pun).is_err());
    }

    #[test]
    fn recommendation_punishment_encoding() {
        let g = product_choice::<f64>();
        let rec = RecommendationProfile {
            recommendation: vec![N, N],
            action: vec![L, L],
            response: vec![N, T],
        };
        let regime = Punishment::Recommendation {
            profile: rec,
            value: 0.0,
        }
        .regime(&g, 2, 1)
        .unwrap();
        // message 0 carries N, message 1 carries the unused T
        assert_eq!(regime.opportunistic.announce[0], vec![1.0, 0.0]);
        assert_eq!(regime.response, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(regime.next, vec![1, 1]);
    }
}
