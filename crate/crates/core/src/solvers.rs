//! Equilibria of the two one-shot auxiliary games and the constrained
//! minimisation that yields the low repeated-game payoff `v1'`.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::game::{argmax_set, ActionSet, StageGame};
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::scalar::Scalar;

/// Largest `|Theta| * |A|` accepted by the support enumeration.
pub const MAX_TYPE_ACTIONS: usize = 12;
/// Largest `|B|` accepted by the enumerating solvers.
pub const MAX_REPLIES: usize = 6;
const MAX_SUPPORT_PROFILES: usize = 2_000_000;
const MAX_RECOMMENDATION_WORK: usize = 20_000_000;
const MAX_LISTED: usize = 10_000;
const DEDUP_TOL: f64 = 1e-7;

fn check_scale<S: Scalar>(game: &StageGame<S>) -> Result<()> {
    if game.n_theta() * game.n_a() > MAX_TYPE_ACTIONS || game.n_b() > MAX_REPLIES {
        return Err(Error::SizeLimit(format!(
            "enumeration supports |Theta|*|A| <= {MAX_TYPE_ACTIONS} and |B| <= {MAX_REPLIES}, got {}x{} and {}",
            game.n_theta(),
            game.n_a(),
            game.n_b()
        )));
    }
    Ok(())
}

/// Nash equilibrium of the game without communication: player 1 knows the
/// state, player 2 does not.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuxEquilibrium<S> {
    /// `theta -> distribution over A`
    pub p1_strategy: Vec<Vec<S>>,
    pub p2_strategy: Vec<S>,
    /// Payoff of each state-type of player 1.
    pub type_values: Vec<S>,
    /// Ex-ante payoff `sum_theta p(theta) type_values[theta]`.
    pub p1_value: S,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoCommSolution<S> {
    pub equilibria: Vec<AuxEquilibrium<S>>,
    pub v1_min: S,
    /// Index of an equilibrium attaining `v1_min`.
    pub worst: usize,
}

fn mixed_radix(radices: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = radices.iter().product();
    (0..total).map(move |mut k| {
        radices
            .iter()
            .map(|&r| {
                let d = k % r;
                k /= r;
                d
            })
            .collect()
    })
}

/// Enumerates Nash equilibria of the no-communication game by support
/// enumeration.
///
/// For each support profile (a subset of A per state and a subset of B) the
/// equilibrium conditions split into two linear feasibility systems: player 2's
/// mixture must make every state-type indifferent on its support and weakly
/// worse off its support, and player 1's mixtures must do the same for player 2.
/// The first system is solved as an LP minimising player 1's ex-ante value, so
/// the lowest payoff over each support cell (including degenerate continua) is
/// exact; irrational mixtures come out of the linear systems directly.
pub fn solve_aux_no_comm<S: Scalar>(
    game: &StageGame<S>,
    p_theta: &[S],
) -> Result<NoCommSolution<S>> {
    game.validate_p_theta(p_theta)?;
    check_scale(game)?;
    let (nt, na, nb) = (game.n_theta(), game.n_a(), game.n_b());
    let n_a_sets = (1usize << na) - 1;
    let n_b_sets = (1usize << nb) - 1;
    let profiles = n_a_sets
        .checked_pow(nt as u32)
        .and_then(|x| x.checked_mul(n_b_sets))
        .unwrap_or(usize::MAX);
    if profiles > MAX_SUPPORT_PROFILES {
        return Err(Error::SizeLimit(format!(
            "{profiles} support profiles exceed the limit of {MAX_SUPPORT_PROFILES}"
        )));
    }

    let mut equilibria: Vec<AuxEquilibrium<S>> = Vec::new();
    let radices = vec![n_a_sets; nt];
    for b_idx in 0..n_b_sets {
        let t_set = ActionSet::from_index(b_idx);
        for choice in mixed_radix(&radices) {
            let supports: Vec<ActionSet> =
                choice.iter().map(|&i| ActionSet::from_index(i)).collect();
            let Some((y, w)) = player2_side(game, p_theta, &supports, t_set) else {
                continue;
            };
            let Some(x) = player1_side(game, p_theta, &supports, t_set) else {
                continue;
            };
            let p1_value = crate::game::weighted(p_theta, &w);
            let eq = AuxEquilibrium {
                p1_strategy: x,
                p2_strategy: y,
                type_values: w,
                p1_value,
            };
            if !equilibria.iter().any(|e| same_equilibrium(e, &eq)) {
                equilibria.push(eq);
            }
        }
    }
    if equilibria.is_empty() {
        return Err(Error::Internal(
            "support enumeration found no equilibrium in a finite game".into(),
        ));
    }
    let (worst, v1_min) = equilibria
        .iter()
        .enumerate()
        .map(|(i, e)| (i, e.p1_value))
        .fold((0, S::infinity()), |acc, (i, v)| {
            if v < acc.1 - S::payoff_tol() {
                (i, v)
            } else {
                acc
            }
        });
    Ok(NoCommSolution {
        equilibria,
        v1_min,
        worst,
    })
}

fn same_equilibrium<S: Scalar>(a: &AuxEquilibrium<S>, b: &AuxEquilibrium<S>) -> bool {
    let tol = S::of(DEDUP_TOL);
    let close = |x: &[S], y: &[S]| x.iter().zip(y.iter()).all(|(&u, &v)| (u - v).abs() <= tol);
    close(&a.p2_strategy, &b.p2_strategy)
        && a.p1_strategy
            .iter()
            .zip(b.p1_strategy.iter())
            .all(|(x, y)| close(x, y))
}

/// Player 2's mixture over `t_set` and the state-type values, minimising the
/// ex-ante value of player 1.
fn player2_side<S: Scalar>(
    game: &StageGame<S>,
    p_theta: &[S],
    supports: &[ActionSet],
    t_set: ActionSet,
) -> Option<(Vec<S>, Vec<S>)> {
    let (nt, na, nb) = (game.n_theta(), game.n_a(), game.n_b());
    let bs: Vec<usize> = t_set.iter().collect();
    let nv = bs.len() + nt;
    let mut lp = LinearProgram::new(nv);
    let mut obj = vec![S::zero(); nv];
    for t in 0..nt {
        lp.set_free(bs.len() + t);
        obj[bs.len() + t] = p_theta[t];
    }
    lp.set_objective(obj);
    let ones: Vec<(usize, S)> = (0..bs.len()).map(|k| (k, S::one())).collect();
    lp.add_sparse(&ones, Relation::Eq, S::one());
    for (t, support) in supports.iter().enumerate() {
        for a in 0..na {
            let mut terms: Vec<(usize, S)> = bs
                .iter()
                .enumerate()
                .map(|(k, &b)| (k, game.u1(t, a, b)))
                .collect();
            terms.push((bs.len() + t, -S::one()));
            let rel = if support.contains(a) {
                Relation::Eq
            } else {
                Relation::Le
            };
            lp.add_sparse(&terms, rel, S::zero());
        }
    }
    let sol = lp.solve().optimal()?;
    let mut y = vec![S::zero(); nb];
    for (k, &b) in bs.iter().enumerate() {
        y[b] = sol.x[k].max(S::zero());
    }
    Some((y, sol.x[bs.len()..].to_vec()))
}

/// Player 1's state-contingent mixtures on the given supports that make
/// `t_set` player 2's indifferent best-reply set.
fn player1_side<S: Scalar>(
    game: &StageGame<S>,
    p_theta: &[S],
    supports: &[ActionSet],
    t_set: ActionSet,
) -> Option<Vec<Vec<S>>> {
    let (nt, na, nb) = (game.n_theta(), game.n_a(), game.n_b());
    let mut index = Vec::new();
    for (t, s) in supports.iter().enumerate() {
        for a in s.iter() {
            index.push((t, a));
        }
    }
    let w2 = index.len();
    let mut lp = LinearProgram::new(w2 + 1);
    lp.set_free(w2);
    for t in 0..nt {
        let terms: Vec<(usize, S)> = index
            .iter()
            .enumerate()
            .filter(|(_, &(tt, _))| tt == t)
            .map(|(k, _)| (k, S::one()))
            .collect();
        lp.add_sparse(&terms, Relation::Eq, S::one());
    }
    for b in 0..nb {
        let mut terms: Vec<(usize, S)> = index
            .iter()
            .enumerate()
            .map(|(k, &(t, a))| (k, p_theta[t] * game.u2(a, b)))
            .collect();
        terms.push((w2, -S::one()));
        let rel = if t_set.contains(b) {
            Relation::Eq
        } else {
            Relation::Le
        };
        lp.add_sparse(&terms, rel, S::zero());
    }
    let sol = lp.solve().optimal()?;
    let mut x = vec![vec![S::zero(); na]; nt];
    for (k, &(t, a)) in index.iter().enumerate() {
        x[t][a] = sol.x[k].max(S::zero());
    }
    Some(x)
}

/// Pure equilibrium of the game where player 1 recommends an action to player 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecommendationProfile {
    /// `theta -> recommended b`
    pub recommendation: Vec<usize>,
    /// `theta -> played a`
    pub action: Vec<usize>,
    /// `recommended b -> played b`
    pub response: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecommendationEquilibrium<S> {
    pub profile: RecommendationProfile,
    pub p1_value: S,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecommendationSolution<S> {
    /// At most 10 000 equilibria are listed; `v_hat_1` covers all of them.
    pub equilibria: Vec<RecommendationEquilibrium<S>>,
    /// `+inf` when no pure equilibrium exists.
    pub v_hat_1: S,
    pub worst: Option<usize>,
}

/// Enumerates pure equilibria of the recommendation game.
///
/// Player 2's rule is enumerated in full (off-path responses included, since
/// they discipline player 1's deviations); for each rule, player 1's
/// best-response choices are enumerated and kept when player 2 obeys optimally
/// at every recommendation sent with positive probability.
pub fn solve_aux_recommendation<S: Scalar>(
    game: &StageGame<S>,
    p_theta: &[S],
) -> Result<RecommendationSolution<S>> {
    game.validate_p_theta(p_theta)?;
    check_scale(game)?;
    let (nt, na, nb) = (game.n_theta(), game.n_a(), game.n_b());
    let mut equilibria = Vec::new();
    let mut best: Option<(usize, S)> = None;
    let mut work = 0usize;

    for rule in mixed_radix(&vec![nb; nb]) {
        // per state, optimal (recommendation, action) pairs against this rule
        let options: Vec<Vec<(usize, usize)>> = (0..nt)
            .map(|t| {
                let pairs: Vec<(usize, usize)> = (0..nb)
                    .flat_map(|bh| (0..na).map(move |a| (bh, a)))
                    .collect();
                let best = argmax_set(pairs.iter().map(|&(bh, a)| game.u1(t, a, rule[bh])));
                best.into_iter().map(|i| pairs[i]).collect()
            })
            .collect();
        let value = (0..nt).fold(S::zero(), |acc, t| {
            let (bh, a) = options[t][0];
            acc + p_theta[t] * game.u1(t, a, rule[bh])
        });
        let radices: Vec<usize> = options.iter().map(Vec::len).collect();
        let cells: usize = radices.iter().product();
        work = work.saturating_add(cells);
        if work > MAX_RECOMMENDATION_WORK {
            return Err(Error::SizeLimit(
                "recommendation game enumeration exceeds the work limit".into(),
            ));
        }
        for pick in mixed_radix(&radices) {
            let recommendation: Vec<usize> = (0..nt).map(|t| options[t][pick[t]].0).collect();
            let action: Vec<usize> = (0..nt).map(|t| options[t][pick[t]].1).collect();
            let obedient = (0..nb).all(|bh| {
                let mut mass = vec![S::zero(); na];
                let mut on_path = false;
                for t in 0..nt {
                    if recommendation[t] == bh && p_theta[t] > S::zero() {
                        mass[action[t]] = mass[action[t]] + p_theta[t];
                        on_path = true;
                    }
                }
                if !on_path {
                    return true;
                }
                let z = crate::scalar::total(&mass);
                let post: Vec<S> = mass.iter().map(|&m| m / z).collect();
                argmax_set((0..nb).map(|b| game.u2_against(&post, b))).contains(&rule[bh])
            });
            if obedient {
                if best.is_none_or(|(_, v)| value < v - S::payoff_tol()) {
                    best = Some((equilibria.len().min(MAX_LISTED), value));
                    if equilibria.len() >= MAX_LISTED {
                        // keep the worst profile visible even once the list is full
                        equilibria.pop();
                    }
                }
                if equilibria.len() < MAX_LISTED {
                    equilibria.push(RecommendationEquilibrium {
                        profile: RecommendationProfile {
                            recommendation,
                            action,
                            response: rule.clone(),
                        },
                        p1_value: value,
                    });
                }
            }
        }
    }
    let (worst, v_hat_1) = match best {
        Some((i, v)) => (Some(i.min(equilibria.len().saturating_sub(1))), v),
        None => (None, S::infinity()),
    };
    Ok(RecommendationSolution {
        equilibria,
        v_hat_1,
        worst,
    })
}

/// Whether the optimum came straight from the LP or from the line search
/// that lifts the objective onto the floor `min(v1_min, v_hat_1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    LpMinimum,
    LineSearch,
}

/// Subset `A'` and best-reply selection `beta` attaining `v1'`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct V1PrimeWitness<S> {
    pub subset: Vec<usize>,
    /// `(a, beta(a))` for every `a` in `subset`; `beta(a)` is a distribution
    /// over B supported inside `BR2(a)`.
    pub selection: Vec<(usize, Vec<S>)>,
    pub objective: S,
    pub threshold: S,
    pub kind: WitnessKind,
}

impl<S: Scalar> V1PrimeWitness<S> {
    pub fn beta(&self, a: usize) -> Option<&[S]> {
        self.selection
            .iter()
            .find(|(x, _)| *x == a)
            .map(|(_, d)| d.as_slice())
    }

    pub fn subset_set(&self) -> ActionSet {
        ActionSet::from_actions(&self.subset)
    }

    /// `argmax_{a in A'} u1(theta, a, beta(a))`, first label on ties.
    pub fn on_path_action(&self, game: &StageGame<S>, theta: usize) -> usize {
        let (k, _) = crate::game::first_argmax(
            self.selection
                .iter()
                .map(|(a, d)| game.u1_mixed(theta, *a, d)),
        );
        self.selection[k].0
    }

    /// Player 2's reply to announcement `m`: `beta(m)` inside `A'`, otherwise
    /// `beta` of the first element of `A'`.
    pub fn response(&self, m: usize) -> &[S] {
        self.beta(m).unwrap_or(&self.selection[0].1)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct V1PrimeOptions {
    /// Read `A' \subset A` as a strict subset.
    pub exclude_full_set: bool,
}

fn v1_objective<S: Scalar>(game: &StageGame<S>, p_theta: &[S], sel: &[(usize, Vec<S>)]) -> S {
    (0..game.n_theta()).fold(S::zero(), |acc, t| {
        let m = sel
            .iter()
            .map(|(a, d)| game.u1_mixed(t, *a, d))
            .fold(S::neg_infinity(), S::max);
        acc + p_theta[t] * m
    })
}

/// Minimises `sum_theta p(theta) max_{a in A'} u1(theta, a, beta(a))` over
/// `A'` and mixed best-reply selections, subject to the value being at least
/// `min(v1_min, v_hat_1)`.
pub fn solve_v1_prime<S: Scalar>(
    game: &StageGame<S>,
    p_theta: &[S],
    v1_min: S,
    v_hat_1: S,
    opts: V1PrimeOptions,
) -> Result<V1PrimeWitness<S>> {
    game.validate_p_theta(p_theta)?;
    if !v1_min.is_finite() {
        return invalid("v1_min must be finite");
    }
    let threshold = v1_min.min(v_hat_1);
    let na = game.n_a();
    let mut best: Option<V1PrimeWitness<S>> = None;
    let full = ActionSet::full(na);
    let mut subsets: Vec<ActionSet> = ActionSet::all(na)
        .filter(|s| !(opts.exclude_full_set && *s == full))
        .collect();
    // smaller subsets first so ties resolve towards them, then mask order
    subsets.sort_by_key(|s| (s.len(), s.mask()));
    for set in subsets {
        if let Some(cand) = subset_candidate(game, p_theta, set, threshold)? {
            let better = best
                .as_ref()
                .is_none_or(|b| cand.objective < b.objective - S::payoff_tol());
            if better {
                best = Some(cand);
            }
        }
    }
    best.ok_or_else(|| {
        Error::NoEquilibriumValue(format!("no subset reaches the floor {threshold}"))
    })
}

fn subset_candidate<S: Scalar>(
    game: &StageGame<S>,
    p_theta: &[S],
    set: ActionSet,
    threshold: S,
) -> Result<Option<V1PrimeWitness<S>>> {
    let (nt, nb) = (game.n_theta(), game.n_b());
    let actions: Vec<usize> = set.iter().collect();
    // variables: t_theta (free), then beta(a, b) for b in BR2(a)
    let mut offsets = Vec::with_capacity(actions.len());
    let mut nv = nt;
    for &a in &actions {
        offsets.push(nv);
        nv += game.best_replies(a).len();
    }
    let mut lp = LinearProgram::new(nv);
    let mut obj = vec![S::zero(); nv];
    for t in 0..nt {
        lp.set_free(t);
        obj[t] = p_theta[t];
    }
    lp.set_objective(obj);
    for (k, &a) in actions.iter().enumerate() {
        let br = game.best_replies(a);
        let ones: Vec<(usize, S)> = (0..br.len()).map(|j| (offsets[k] + j, S::one())).collect();
        lp.add_sparse(&ones, Relation::Eq, S::one());
        for t in 0..nt {
            let mut terms: Vec<(usize, S)> = br
                .iter()
                .enumerate()
                .map(|(j, &b)| (offsets[k] + j, -game.u1(t, a, b)))
                .collect();
            terms.push((t, S::one()));
            lp.add_sparse(&terms, Relation::Ge, S::zero());
        }
    }
    let sol = match lp.solve() {
        LpOutcome::Optimal(s) => s,
        other => return Err(Error::Internal(format!("v1' LP failed: {other:?}"))),
    };
    let min_sel: Vec<(usize, Vec<S>)> = actions
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let mut d = vec![S::zero(); nb];
            for (j, &b) in game.best_replies(a).iter().enumerate() {
                d[b] = sol.x[offsets[k] + j].max(S::zero());
            }
            let z = crate::scalar::total(&d);
            (a, d.into_iter().map(|v| v / z).collect())
        })
        .collect();
    let lp_min = v1_objective(game, p_theta, &min_sel);
    let subset = actions.clone();
    if lp_min >= threshold - S::payoff_tol() {
        return Ok(Some(V1PrimeWitness {
            subset,
            selection: min_sel,
            objective: lp_min,
            threshold,
            kind: WitnessKind::LpMinimum,
        }));
    }

    // maximum over pure selections (the objective is convex in beta)
    let radices: Vec<usize> = actions
        .iter()
        .map(|&a| game.best_replies(a).len())
        .collect();
    let mut max_sel: Option<(S, Vec<(usize, Vec<S>)>)> = None;
    for pick in mixed_radix(&radices) {
        let sel: Vec<(usize, Vec<S>)> = actions
            .iter()
            .zip(pick.iter())
            .map(|(&a, &j)| {
                let mut d = vec![S::zero(); nb];
                d[game.best_replies(a)[j]] = S::one();
                (a, d)
            })
            .collect();
        let v = v1_objective(game, p_theta, &sel);
        if max_sel.as_ref().is_none_or(|(bv, _)| v > *bv) {
            max_sel = Some((v, sel));
        }
    }
    let (pure_max, max_sel) = max_sel.expect("at least one selection");
    if pure_max < threshold - S::payoff_tol() {
        return Ok(None);
    }

    // intermediate value: bisect along the segment from min_sel to max_sel
    let blend = |s: S| -> Vec<(usize, Vec<S>)> {
        min_sel
            .iter()
            .zip(max_sel.iter())
            .map(|((a, lo), (_, hi))| {
                (
                    *a,
                    lo.iter()
                        .zip(hi.iter())
                        .map(|(&l, &h)| l + s * (h - l))
                        .collect(),
                )
            })
            .collect()
    };
    let (mut lo, mut hi) = (S::zero(), S::one());
    let tol = S::payoff_tol();
    let mut f_hi = pure_max;
    for _ in 0..200 {
        if f_hi - threshold <= tol {
            break;
        }
        let mid = (lo + hi) / S::of(2.0);
        let f = v1_objective(game, p_theta, &blend(mid));
        if f >= threshold {
            hi = mid;
            f_hi = f;
        } else {
            lo = mid;
        }
    }
    let selection = blend(hi);
    let objective = v1_objective(game, p_theta, &selection);
    Ok(Some(V1PrimeWitness {
        subset,
        selection,
        objective,
        threshold,
        kind: WitnessKind::LineSearch,
    }))
}

/// Largest stage gains available to player 1 against the profile built from
/// `witness`: deviations that break the announcement (and so trigger
/// punishment) and deviations that keep it (and so go unpunished).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationGains<S> {
    pub punished: S,
    pub unpunished: S,
}

pub fn deviation_gains<S: Scalar>(
    game: &StageGame<S>,
    witness: &V1PrimeWitness<S>,
) -> DeviationGains<S> {
    let na = game.n_a();
    let mut punished = S::neg_infinity();
    let mut unpunished = S::neg_infinity();
    for t in 0..game.n_theta() {
        let on = witness.on_path_action(game, t);
        let u_on = game.u1_mixed(t, on, witness.response(on));
        for m in 0..na {
            let resp = witness.response(m);
            for a in 0..na {
                let gain = game.u1_mixed(t, a, resp) - u_on;
                if a == m {
                    unpunished = unpunished.max(gain);
                } else {
                    punished = punished.max(gain);
                }
            }
        }
    }
    DeviationGains {
        punished,
        unpunished,
    }
}

/// Conservative discount-factor threshold for the low-payoff profile.
///
/// With a positive gap `v1' - punish_value` this solves
/// `(1 - d) * range(u1) = d * gap`. With no gap it returns 0 when every
/// punished stage deviation is unprofitable, otherwise fails.
pub fn delta_threshold<S: Scalar>(
    game: &StageGame<S>,
    witness: &V1PrimeWitness<S>,
    punish_value: S,
) -> Result<S> {
    let tol = S::payoff_tol();
    let gap = witness.objective - punish_value;
    if gap < -tol {
        return invalid(format!(
            "punishment value {punish_value} exceeds the on-path value {}",
            witness.objective
        ));
    }
    let gains = deviation_gains(game, witness);
    if gains.unpunished > tol {
        return Err(Error::Construction(format!(
            "an announcement kept outside the profile gains {} in the stage; no discount factor deters it",
            gains.unpunished
        )));
    }
    if gap > tol {
        let range = game.payoff_range();
        return Ok(range / (range + gap));
    }
    if gains.punished <= tol {
        Ok(S::zero())
    } else {
        Err(Error::Construction(format!(
            "zero punishment gap but a word-breaking deviation gains {}",
            gains.punished
        )))
    }
}

/// Closed-form threshold `range / (range + gap)` exposed for reporting.
pub fn delta_from_gap<S: Scalar>(range: S, gap: S) -> S {
    range / (range + gap)
}
