//! Numerical checks of equilibrium constructions and payoff bounds.

use serde::Serialize;

use crate::beliefs::{quality_bound, BoundReport, Corollary3Constants};
use crate::error::{invalid, Error, Result};
use crate::game::{best_reply_set, Environment, SignalStructure, StageGame};
use crate::lp::solve_linear;
use crate::scalar::Scalar;
use crate::simulator::{PreannounceTrace, QualityGame, SimResult, Stats};
use crate::solvers::{solve_aux_no_comm, solve_aux_recommendation, solve_v1_prime, V1PrimeOptions};
use crate::strategies::{theorem2_profile, AutomatonProfile, Punishment, StagePlan};

/// Standard errors allowed below a bound before a statistical check fails.
pub const SE_MARGIN: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "reason")]
pub enum Status {
    Pass,
    Fail,
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    #[serde(flatten)]
    pub status: Status,
    pub measured: Option<f64>,
    pub bound: Option<f64>,
    pub tolerance: Option<f64>,
    pub sample_size: Option<usize>,
    /// The violating history or deviation for failed checks.
    pub witness: Option<String>,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool) -> Self {
        Self {
            name: name.into(),
            status: if pass { Status::Pass } else { Status::Fail },
            measured: None,
            bound: None,
            tolerance: None,
            sample_size: None,
            witness: None,
        }
    }

    fn skipped(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            status: Status::Skipped(reason.into()),
            ..Self::new(name, true)
        }
    }

    /// `measured >= bound - tolerance`
    fn at_least(
        name: impl Into<String>,
        measured: f64,
        bound: f64,
        tolerance: f64,
        n: Option<usize>,
    ) -> Self {
        Self {
            measured: Some(measured),
            bound: Some(bound),
            tolerance: Some(tolerance),
            sample_size: n,
            ..Self::new(name, measured >= bound - tolerance)
        }
    }

    /// `measured <= bound + tolerance`
    fn at_most(
        name: impl Into<String>,
        measured: f64,
        bound: f64,
        tolerance: f64,
        n: Option<usize>,
    ) -> Self {
        Self {
            measured: Some(measured),
            bound: Some(bound),
            tolerance: Some(tolerance),
            sample_size: n,
            ..Self::new(name, measured <= bound + tolerance)
        }
    }

    fn with_witness(mut self, w: Option<String>) -> Self {
        if self.status == Status::Fail {
            self.witness = w;
        }
        self
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    /// No check failed; skipped checks do not count against the report.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.checks.extend(other.checks);
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NashOptions<S> {
    pub delta: S,
    /// Depth of the forward search over public histories.
    pub truncation_t: usize,
    pub tol: S,
    /// Prior on the honest type for player 2's beliefs.
    pub pi0: S,
}

impl<S: Scalar> NashOptions<S> {
    pub fn new(delta: S) -> Self {
        Self {
            delta,
            truncation_t: 200,
            tol: S::payoff_tol(),
            pi0: S::of(0.5),
        }
    }
}

/// Discount factors tried when reporting the smallest one that works.
pub const DELTA_GRID: [f64; 103] = {
    let mut g = [0.0; 103];
    let mut i = 1;
    while i < 100 {
        g[i] = i as f64 / 100.0;
        i += 1;
    }
    g[100] = 0.999;
    g[101] = 0.9999;
    g[102] = 0.99999;
    g
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashReport {
    pub report: VerificationReport,
    /// Discounted value of each regime for the honest and opportunistic types.
    pub values_honest: Vec<f64>,
    pub values_opportunistic: Vec<f64>,
    pub on_path_value_honest: f64,
    pub on_path_value_opportunistic: f64,
    /// Smallest discount factor on [`DELTA_GRID`] at which every check passes.
    pub min_delta_on_grid: Option<f64>,
    pub states_explored: usize,
}

const MAX_STATES: usize = 1000;
const MERGE_TOL: f64 = 1e-12;

fn mass<S: Scalar>(plan: &StagePlan<S>, p_theta: &[S], n_a: usize) -> Vec<S> {
    let mut out = vec![S::zero(); n_a * n_a];
    for (t, &p) in p_theta.iter().enumerate() {
        for m in 0..n_a {
            let pm = p * plan.announce[t][m];
            if pm > S::zero() {
                for a in 0..n_a {
                    out[m * n_a + a] = out[m * n_a + a] + pm * plan.act[t][m][a];
                }
            }
        }
    }
    out
}

fn check_shapes<S: Scalar>(
    profile: &AutomatonProfile<S>,
    game: &StageGame<S>,
    signals: &SignalStructure<S>,
) -> Result<()> {
    let (nt, na, nb, ny) = (game.n_theta(), game.n_a(), game.n_b(), signals.n_y());
    let nr = profile.regimes.len();
    if nr == 0 || profile.initial >= nr {
        return Err(Error::UnsupportedProfile(
            "profile has no valid initial regime".into(),
        ));
    }
    game.validate_p_theta(&profile.p_theta)?;
    for r in &profile.regimes {
        let plans_ok = [&r.honest, &r.opportunistic].iter().all(|p| {
            p.announce.len() == nt
                && p.announce.iter().all(|d| d.len() == na)
                && p.act.len() == nt
                && p.act
                    .iter()
                    .all(|per_m| per_m.len() == na && per_m.iter().all(|d| d.len() == na))
        });
        if !plans_ok || r.response.len() != na || r.response.iter().any(|d| d.len() != nb) {
            return Err(Error::UnsupportedProfile(format!(
                "regime `{}` has malformed tables",
                r.label
            )));
        }
        if r.next.len() != ny || r.next.iter().any(|&n| n >= nr) {
            return Err(Error::UnsupportedProfile(format!(
                "regime `{}` has malformed transitions",
                r.label
            )));
        }
    }
    Ok(())
}

/// Checks that a regime-automaton profile is a Nash equilibrium.
///
/// Player 2's replies are checked against the Bayes posterior at every
/// announcement reached with positive probability, over all public beliefs
/// reachable within `truncation_t` periods. Player 1 is checked by one-shot
/// deviations at every regime the type can reach, with continuation values
/// from the regime recursion; because continuation values only depend on the
/// regime this is exact. With `pi0 = 0` the honest type is absent and its
/// checks are skipped.
pub fn verify_nash_profile<S: Scalar>(
    profile: &AutomatonProfile<S>,
    game: &StageGame<S>,
    env: &Environment<S>,
    signals: &SignalStructure<S>,
    opts: NashOptions<S>,
) -> Result<NashReport> {
    check_shapes(profile, game, signals)?;
    if env.flexibility() < S::one() - S::prob_tol() {
        return Err(Error::UnsupportedProfile(
            "profiles are checked only when every action is always feasible".into(),
        ));
    }
    if !(opts.delta >= S::zero() && opts.delta < S::one()) {
        return invalid(format!("discount factor {} outside [0, 1)", opts.delta));
    }
    if !(opts.pi0 >= S::zero() && opts.pi0 <= S::one()) {
        return invalid(format!("prior {} outside [0, 1]", opts.pi0));
    }
    let mut report = VerificationReport::default();
    let (p2, states) = player2_checks(profile, game, signals, &opts)?;
    report.checks.push(p2);

    let (checks, vh, vo) = player1_checks(
        profile,
        game,
        signals,
        opts.delta,
        opts.tol,
        opts.pi0 > S::zero(),
    )?;
    report.checks.extend(checks);

    let mut min_delta = None;
    if report.get("player2_optimality").is_some_and(Check::passed) {
        for &d in DELTA_GRID.iter() {
            let (c, _, _) = player1_checks(
                profile,
                game,
                signals,
                S::of(d),
                opts.tol,
                opts.pi0 > S::zero(),
            )?;
            if c.iter().all(Check::passed) {
                min_delta = Some(d);
                break;
            }
        }
    }
    let init = profile.initial;
    Ok(NashReport {
        report,
        on_path_value_honest: vh[init],
        on_path_value_opportunistic: vo[init],
        values_honest: vh,
        values_opportunistic: vo,
        min_delta_on_grid: min_delta,
        states_explored: states,
    })
}

fn player2_checks<S: Scalar>(
    profile: &AutomatonProfile<S>,
    game: &StageGame<S>,
    signals: &SignalStructure<S>,
    opts: &NashOptions<S>,
) -> Result<(Check, usize)> {
    let na = game.n_a();
    let masses: Vec<(Vec<S>, Vec<S>)> = profile
        .regimes
        .iter()
        .map(|r| {
            (
                mass(&r.honest, &profile.p_theta, na),
                mass(&r.opportunistic, &profile.p_theta, na),
            )
        })
        .collect();
    let mut seen: Vec<(usize, S)> = vec![(profile.initial, opts.pi0)];
    let mut frontier = seen.clone();
    let mut worst: Option<String> = None;
    let mut checked = 0usize;
    let mut depth = 0;
    while !frontier.is_empty() && depth <= opts.truncation_t {
        let mut next = Vec::new();
        for &(r, pi) in &frontier {
            let (mh, mo) = &masses[r];
            let regime = &profile.regimes[r];
            for m in 0..na {
                let joint: Vec<S> = (0..na)
                    .map(|a| pi * mh[m * na + a] + (S::one() - pi) * mo[m * na + a])
                    .collect();
                let alpha = crate::scalar::total(&joint);
                if alpha <= S::prob_tol() {
                    continue;
                }
                checked += 1;
                let q: Vec<S> = joint.iter().map(|&v| v / alpha).collect();
                let br = best_reply_set(game, &q)?;
                for (b, &w) in regime.response[m].iter().enumerate() {
                    if w > S::prob_tol() && !br.contains(&b) && worst.is_none() {
                        worst = Some(format!(
                            "regime `{}`, belief {}, announcement {}: reply {} is not a best reply to q = {:?}",
                            regime.label,
                            pi,
                            game.a_labels()[m],
                            game.b_labels()[b],
                            q.iter().map(|v| v.f64()).collect::<Vec<_>>()
                        ));
                    }
                }
            }
            // public signal transitions
            for y in 0..signals.n_y() {
                let py = |mm: &[S]| {
                    let mut s = S::zero();
                    for m in 0..na {
                        for a in 0..na {
                            s = s + mm[m * na + a] * signals.row(a, m)[y];
                        }
                    }
                    s
                };
                let (ph, po) = (py(mh), py(mo));
                let mix = pi * ph + (S::one() - pi) * po;
                if mix <= S::zero() {
                    continue;
                }
                let state = (regime.next[y], pi * ph / mix);
                let known = seen
                    .iter()
                    .any(|&(rr, pp)| rr == state.0 && (pp - state.1).abs() <= S::of(MERGE_TOL));
                if !known {
                    if seen.len() >= MAX_STATES {
                        return Err(Error::UnsupportedProfile(format!(
                            "more than {MAX_STATES} reachable (regime, belief) states"
                        )));
                    }
                    seen.push(state);
                    next.push(state);
                }
            }
        }
        frontier = next;
        depth += 1;
    }
    let check = Check {
        sample_size: Some(checked),
        ..Check::new("player2_optimality", worst.is_none())
    }
    .with_witness(worst);
    Ok((check, seen.len()))
}

fn regime_values<S: Scalar>(
    profile: &AutomatonProfile<S>,
    game: &StageGame<S>,
    signals: &SignalStructure<S>,
    honest: bool,
    delta: S,
) -> Result<Vec<S>> {
    let na = game.n_a();
    let nr = profile.regimes.len();
    let mut a_mat = vec![vec![S::zero(); nr]; nr];
    let mut rhs = vec![S::zero(); nr];
    for (r, regime) in profile.regimes.iter().enumerate() {
        let plan = if honest {
            &regime.honest
        } else {
            &regime.opportunistic
        };
        a_mat[r][r] = S::one();
        for (t, &p) in profile.p_theta.iter().enumerate() {
            for m in 0..na {
                for a in 0..na {
                    let w = p * plan.announce[t][m] * plan.act[t][m][a];
                    if w <= S::zero() {
                        continue;
                    }
                    rhs[r] =
                        rhs[r] + (S::one() - delta) * w * game.u1_mixed(t, a, &regime.response[m]);
                    for (y, &f) in signals.row(a, m).iter().enumerate() {
                        let to = regime.next[y];
                        a_mat[r][to] = a_mat[r][to] - delta * w * f;
                    }
                }
            }
        }
    }
    solve_linear(a_mat, rhs).ok_or_else(|| Error::Internal("singular regime-value system".into()))
}

/// Regimes a type can reach by any admissible play.
fn reachable<S: Scalar>(
    profile: &AutomatonProfile<S>,
    signals: &SignalStructure<S>,
    n_a: usize,
    honest: bool,
) -> Vec<bool> {
    let mut seen = vec![false; profile.regimes.len()];
    let mut stack = vec![profile.initial];
    seen[profile.initial] = true;
    while let Some(r) = stack.pop() {
        for m in 0..n_a {
            for a in 0..n_a {
                if honest && a != m {
                    continue;
                }
                for (y, &f) in signals.row(a, m).iter().enumerate() {
                    let to = profile.regimes[r].next[y];
                    if f > S::zero() && !seen[to] {
                        seen[to] = true;
                        stack.push(to);
                    }
                }
            }
        }
    }
    seen
}

type Player1Outcome = (Vec<Check>, Vec<f64>, Vec<f64>);

fn player1_checks<S: Scalar>(
    profile: &AutomatonProfile<S>,
    game: &StageGame<S>,
    signals: &SignalStructure<S>,
    delta: S,
    tol: S,
    with_honest: bool,
) -> Result<Player1Outcome> {
    let na = game.n_a();
    let mut checks = Vec::new();
    let mut values = Vec::new();
    for honest in [true, false] {
        let v = regime_values(profile, game, signals, honest, delta)?;
        if honest && !with_honest {
            let why = "the honest type has zero prior";
            checks.push(Check::skipped("honest_deviations", why));
            checks.push(Check::skipped("honest_keeps_word", why));
            values.push(v.iter().map(|x| x.f64()).collect::<Vec<f64>>());
            continue;
        }
        let reach = reachable(profile, signals, na, honest);
        let mut worst_gain = S::neg_infinity();
        let mut witness = None;
        let mut plan_ok = true;
        for (r, regime) in profile.regimes.iter().enumerate() {
            if !reach[r] {
                continue;
            }
            let plan = if honest {
                &regime.honest
            } else {
                &regime.opportunistic
            };
            let q = |t: usize, m: usize, a: usize| {
                let cont = signals
                    .row(a, m)
                    .iter()
                    .enumerate()
                    .fold(S::zero(), |acc, (y, &f)| acc + f * v[regime.next[y]]);
                (S::one() - delta) * game.u1_mixed(t, a, &regime.response[m]) + delta * cont
            };
            for (t, &p) in profile.p_theta.iter().enumerate() {
                if p <= S::zero() {
                    continue;
                }
                let mut support_min = S::infinity();
                for m in 0..na {
                    for a in 0..na {
                        if plan.announce[t][m] * plan.act[t][m][a] > S::zero() {
                            if honest && a != m {
                                plan_ok = false;
                            }
                            support_min = support_min.min(q(t, m, a));
                        }
                    }
                }
                for m in 0..na {
                    for a in 0..na {
                        if honest && a != m {
                            continue;
                        }
                        let gain = q(t, m, a) - support_min;
                        if gain > worst_gain {
                            worst_gain = gain;
                            witness = Some(format!(
                                "{} type in regime `{}`, state {}: announce {} and play {} gains {}",
                                if honest { "honest" } else { "opportunistic" },
                                regime.label,
                                game.theta_labels()[t],
                                game.a_labels()[m],
                                game.a_labels()[a],
                                gain
                            ));
                        }
                    }
                }
            }
        }
        let name = if honest {
            "honest_deviations"
        } else {
            "opportunistic_deviations"
        };
        checks.push(
            Check {
                measured: Some(worst_gain.f64()),
                bound: Some(0.0),
                tolerance: Some(tol.f64()),
                ..Check::new(name, worst_gain <= tol)
            }
            .with_witness(witness),
        );
        if honest {
            checks.push(Check::new("honest_keeps_word", plan_ok));
        }
        values.push(v.iter().map(|x| x.f64()).collect::<Vec<f64>>());
    }
    let vo = values.pop().expect("two types");
    let vh = values.pop().expect("two types");
    Ok((checks, vh, vo))
}

fn margin<S: Scalar>(s: &Stats<S>) -> f64 {
    SE_MARGIN * s.se.f64()
}

/// Honest payoff against the bound-mode responder clears the payoff bound,
/// and bad periods stay within the expected-count bound.
pub fn check_theorem1_bound<S: Scalar>(
    sim: &SimResult<S>,
    bounds: &BoundReport<S>,
) -> Result<VerificationReport> {
    if sim.game_fingerprint != bounds.game_fingerprint {
        return invalid("simulation and bound report come from different games");
    }
    if (sim.pi0 - bounds.pi0).abs() > S::prob_tol() {
        return invalid("simulation and bound report use different priors");
    }
    if let Some(d) = bounds.delta {
        if (d - sim.delta).abs() > S::prob_tol() {
            return invalid("simulation and bound report use different discount factors");
        }
    }
    let mut report = VerificationReport::default();
    if !bounds.assumptions_hold {
        let why = "assumption failed: feasibility or signal assumptions do not hold";
        report.checks.push(Check::skipped("theorem1_payoff", why));
        report
            .checks
            .push(Check::skipped("theorem1_bad_periods", why));
        return Ok(report);
    }
    let payoff = sim.payoff_honest.unwrap_or(sim.payoff);
    match bounds.bound_3_6 {
        Some(b) => report.checks.push(Check::at_least(
            "theorem1_payoff",
            payoff.mean.f64(),
            b.f64(),
            margin(&payoff),
            Some(payoff.n),
        )),
        None => report
            .checks
            .push(Check::skipped("theorem1_payoff", "payoff bound undefined")),
    }
    match bounds.t_bar {
        Some(t) => report.checks.push(Check::at_most(
            "theorem1_bad_periods",
            sim.bad_periods.mean.f64(),
            t as f64,
            margin(&sim.bad_periods),
            Some(sim.bad_periods.n),
        )),
        None => report.checks.push(Check::skipped(
            "theorem1_bad_periods",
            "bad-period bound undefined",
        )),
    }
    Ok(report)
}

/// The long-run guarantee `(1 - eps) p_g - 7 eps (1 - p_g)` of the two-state
/// product-choice game with feasibility split `eps / eps / 1 - 2 eps`.
pub fn product_choice_long_run_bound<S: Scalar>(p_g: S, eps: S) -> S {
    (S::one() - eps) * p_g - S::of(7.0) * eps * (S::one() - p_g)
}

/// The undiscounted per-period mean clears `bound` within the SE margin.
pub fn check_long_run_average<S: Scalar>(sim: &SimResult<S>, bound: S) -> VerificationReport {
    VerificationReport {
        checks: vec![Check::at_least(
            "long_run_average",
            sim.undiscounted.mean.f64(),
            bound.f64(),
            margin(&sim.undiscounted),
            Some(sim.undiscounted.n),
        )],
    }
}

/// Bad-period count of the bounded-memory variant against `T_hat`.
pub fn check_corollary1<S: Scalar>(
    sim: &SimResult<S>,
    bounds: &BoundReport<S>,
) -> VerificationReport {
    let check = match bounds.t_hat {
        Some(t) => Check::at_most(
            "corollary1_bad_periods",
            sim.bad_periods.mean.f64(),
            t as f64,
            margin(&sim.bad_periods),
            Some(sim.bad_periods.n),
        ),
        None => Check::skipped("corollary1_bad_periods", "bounded-memory bound undefined"),
    };
    VerificationReport {
        checks: vec![check],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppendixEOptions<S> {
    pub delta: S,
    /// Slack below `alpha / (alpha + beta)` allowed for good-period shares.
    pub good_slack: S,
    /// Absolute tolerance of the summation identity.
    pub identity_tol: S,
}

impl<S: Scalar> AppendixEOptions<S> {
    pub fn new(delta: S) -> Self {
        Self {
            delta,
            good_slack: S::of(0.05),
            identity_tol: S::of(1e-12),
        }
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64, usize) {
    let s = Stats::of(xs);
    (s.mean, s.se, s.n)
}

/// Neumaier-compensated sum.
fn csum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = s + v;
        c += if s.abs() >= v.abs() {
            (s - t) + v
        } else {
            (v - t) + s
        };
        s = t;
    }
    s + c
}

/// Drift, martingale, concentration and summation checks on the logged
/// likelihood ratios of honest-type episodes with blind announcements.
pub fn check_appendix_e<S: Scalar>(
    traces: &[PreannounceTrace<S>],
    constants: &Corollary3Constants<S>,
    opts: AppendixEOptions<S>,
) -> Result<VerificationReport> {
    let traces: Vec<&PreannounceTrace<S>> = traces.iter().filter(|t| t.honest).collect();
    if traces.is_empty()
        || traces
            .iter()
            .any(|t| t.l.is_empty() || t.l.len() != t.nu.len())
    {
        return invalid("appendix checks need nonempty honest-type logs");
    }
    let horizon = traces.iter().map(|t| t.l.len()).min().expect("nonempty");
    let (alpha, beta) = (constants.alpha.f64(), constants.beta.f64());
    let gf = constants.good_fraction.f64();
    let mut report = VerificationReport::default();

    // (a) conditional drift of the log-likelihood ratio
    let (mut good, mut bad) = (Vec::new(), Vec::new());
    let mut dropped = 0usize;
    for tr in &traces {
        for t in 0..horizon {
            let z = tr.z[t].f64();
            if !z.is_finite() {
                dropped += 1;
                continue;
            }
            if tr.nu[t] {
                good.push(z)
            } else {
                bad.push(z)
            }
        }
    }
    let (m1, s1, n1) = mean_se(&good);
    report.checks.push(if n1 > 0 {
        Check::at_least("drift_good_periods", m1, -beta, SE_MARGIN * s1, Some(n1))
    } else {
        Check::skipped("drift_good_periods", "no good periods")
    });
    let (m0, s0, n0) = mean_se(&bad);
    let vacuous = "alpha <= 0: the drift argument gives no bound";
    report.checks.push(if constants.degenerate {
        Check::skipped("drift_bad_periods", vacuous)
    } else if n0 > 1 {
        Check::at_least("drift_bad_periods", m0, alpha, SE_MARGIN * s0, Some(n0))
    } else {
        Check::skipped("drift_bad_periods", "fewer than two bad periods")
    });
    if dropped > 0 {
        report.checks.push(Check::skipped(
            "drift_infinite_increments",
            format!("{dropped} periods with an infinite increment excluded"),
        ));
    }

    // (b) compensated martingale and Azuma-Hoeffding tails
    let cmax = traces
        .iter()
        .flat_map(|t| t.c[..horizon].iter())
        .map(|c| c.f64())
        .filter(|c| c.is_finite())
        .fold(0.0f64, f64::max);
    let mut paths: Vec<Vec<f64>> = Vec::with_capacity(traces.len());
    let mut increments = Vec::new();
    for tr in &traces {
        let mut acc = 0.0;
        let mut path = Vec::with_capacity(horizon);
        for t in 0..horizon {
            let d = tr.z[t].f64() - tr.ez[t].f64();
            if d.is_finite() {
                acc += d;
                increments.push(d);
            }
            path.push(acc);
        }
        paths.push(path);
    }
    let (mi, si, ni) = mean_se(&increments);
    report.checks.push(Check {
        measured: Some(mi),
        bound: Some(0.0),
        tolerance: Some(SE_MARGIN * si + 1e-12),
        sample_size: Some(ni),
        ..Check::new("martingale_increments", mi.abs() <= SE_MARGIN * si + 1e-12)
    });
    let n = traces.len();
    for &frac in &[0.25f64, 0.5, 1.0] {
        let t = ((horizon as f64 * frac) as usize).max(1);
        for &k in &[0.5f64, 1.0, 2.0] {
            let scale = (t as f64 * cmax * cmax).sqrt();
            let eps1 = k * scale;
            let bound = if scale > 0.0 {
                (-(eps1 * eps1) / (2.0 * scale * scale)).exp()
            } else {
                1.0
            };
            let freq = paths.iter().filter(|p| p[t - 1] >= eps1).count() as f64 / n as f64;
            let se = (bound * (1.0 - bound) / n as f64).sqrt();
            report.checks.push(Check::at_most(
                format!("azuma_tail_t{t}_k{k}"),
                freq,
                bound,
                SE_MARGIN * se,
                Some(n),
            ));
        }
    }

    // (c) running good-period share, with the smallest T after which it holds
    let mut cum = vec![0.0f64; horizon];
    for tr in &traces {
        let mut s = 0.0;
        for t in 0..horizon {
            s += tr.nu[t] as u8 as f64;
            cum[t] += s;
        }
    }
    let target = gf - opts.good_slack.f64();
    let mut fitted = None;
    for t in (0..horizon).rev() {
        let share = cum[t] / n as f64 / (t + 1) as f64;
        if share < target {
            break;
        }
        fitted = Some(t + 1);
    }
    report.checks.push(Check {
        measured: fitted.map(|t| t as f64),
        bound: Some(horizon as f64),
        tolerance: Some(opts.good_slack.f64()),
        sample_size: Some(n),
        ..Check::new("claim1_good_share", fitted.is_some())
    });
    let l_star = traces
        .iter()
        .flat_map(|tr| tr.l[..horizon].iter().zip(tr.nu[..horizon].iter()))
        .filter(|(_, &nu)| !nu)
        .map(|(l, _)| l.f64())
        .fold(f64::NEG_INFINITY, f64::max);
    report.checks.push(Check {
        measured: Some(l_star),
        ..Check::new("fitted_l_star", true)
    });

    // (d) summation by parts and the discounted good-period mass
    let d = opts.delta.f64();
    let mut worst = 0.0f64;
    let mut masses = Vec::with_capacity(n);
    for tr in &traces {
        let mut w = 1.0f64;
        let mut s = 0.0f64;
        let mut lhs_terms = Vec::with_capacity(horizon);
        let mut rhs_terms = Vec::with_capacity(horizon);
        for t in 0..horizon {
            let nu = tr.nu[t] as u8 as f64;
            s += nu;
            lhs_terms.push((1.0 - d) * w * nu);
            rhs_terms.push((1.0 - d) * (1.0 - d) * w * s);
            w *= d;
        }
        let lhs = csum(lhs_terms.into_iter());
        let rhs = csum(rhs_terms.into_iter()) + (1.0 - d) * w * s;
        worst = worst.max((lhs - rhs).abs());
        masses.push(lhs);
    }
    report.checks.push(Check::at_most(
        "abel_identity",
        worst,
        0.0,
        opts.identity_tol.f64(),
        Some(n),
    ));
    let (mm, ms, mn) = mean_se(&masses);
    report.checks.push(if constants.degenerate {
        Check::skipped("discounted_good_mass", vacuous)
    } else {
        Check::at_least("discounted_good_mass", mm, target, SE_MARGIN * ms, Some(mn))
    });
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Corollary2Outcome {
    pub report: VerificationReport,
    /// On-path payoff of the deterministic-quality profile, when checked.
    pub counterexample_value: Option<f64>,
}

/// The honest quality type's simulated payoff against the constants of the
/// quality bound, and optionally the low-payoff profile of a deterministic
/// quality game.
pub fn check_corollary2<S: Scalar>(
    sim: &SimResult<S>,
    game: &QualityGame<S>,
    target_tol: S,
    counterexample: Option<(&QualityGame<S>, S)>,
) -> Result<Corollary2Outcome> {
    if !game.has_full_support() {
        return invalid("the quality bound needs g(.|a) with full support");
    }
    let qb = quality_bound(game, sim.pi0)?;
    let w = sim.delta.powf(S::of(qb.t_bar as f64));
    let bound = w * qb.v_star_star + (S::one() - w) * game.lowest_payoff();
    let payoff = sim.payoff_honest.unwrap_or(sim.payoff);
    let mut report = VerificationReport::default();
    report.checks.push(Check::at_least(
        "corollary2_payoff_bound",
        payoff.mean.f64(),
        bound.f64(),
        margin(&payoff),
        Some(payoff.n),
    ));
    let gap = (payoff.mean - qb.v_star_star).abs().f64();
    report.checks.push(Check::at_most(
        "corollary2_near_commitment",
        gap,
        0.0,
        target_tol.f64(),
        Some(payoff.n),
    ));
    let mut value = None;
    if let Some((det, delta)) = counterexample {
        let stage = det.to_stage_game()?;
        let p = [S::one()];
        let nc = solve_aux_no_comm(&stage, &p)?;
        let rec = solve_aux_recommendation(&stage, &p)?;
        let wit = solve_v1_prime(
            &stage,
            &p,
            nc.v1_min,
            rec.v_hat_1,
            V1PrimeOptions::default(),
        )?;
        let profile = theorem2_profile(&stage, &p, &wit, &Punishment::worst(&nc, &rec))?;
        let env = Environment::always_full(&p, stage.n_a())?;
        let nash = verify_nash_profile(
            &profile,
            &stage,
            &env,
            &SignalStructure::keep_word(stage.n_a()),
            NashOptions::new(delta),
        )?;
        let v = nash.on_path_value_honest;
        value = Some(v);
        let mut checks = nash.report.checks;
        for c in &mut checks {
            c.name = format!("counterexample_{}", c.name);
        }
        report.checks.extend(checks);
        report.checks.push(Check::at_most(
            "counterexample_payoff",
            v.abs(),
            0.0,
            S::payoff_tol().f64(),
            None,
        ));
    }
    Ok(Corollary2Outcome {
        report,
        counterexample_value: value,
    })
}
