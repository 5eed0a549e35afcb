//! Stage-game representation: payoffs, feasibility environment, signal
//! structure, best replies, commitment values and minmax.

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::scalar::{is_distribution, total, Scalar};

/// Nonempty subset of player 1's actions, stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionSet(u32);

pub const MAX_ACTIONS: usize = 16;

impl ActionSet {
    pub fn from_mask(mask: u32) -> Self {
        debug_assert!(mask != 0);
        ActionSet(mask)
    }

    pub fn full(n: usize) -> Self {
        ActionSet(((1u64 << n) - 1) as u32)
    }

    pub fn singleton(a: usize) -> Self {
        ActionSet(1 << a)
    }

    pub fn from_actions(actions: &[usize]) -> Self {
        ActionSet(actions.iter().fold(0, |m, &a| m | (1 << a)))
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    /// Position of this set in the enumeration of nonempty subsets.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn from_index(i: usize) -> Self {
        ActionSet(i as u32 + 1)
    }

    pub fn contains(self, a: usize) -> bool {
        self.0 & (1 << a) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: ActionSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let m = self.0;
        (0..32).filter(move |&a| m & (1 << a) != 0)
    }

    pub fn first(self) -> usize {
        self.0.trailing_zeros() as usize
    }

    /// All nonempty subsets of `{0..n}` in mask order.
    pub fn all(n: usize) -> impl Iterator<Item = ActionSet> {
        (1..(1u32 << n)).map(ActionSet)
    }
}

impl fmt::Debug for ActionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

fn check_labels(kind: &str, labels: &[String]) -> Result<()> {
    if labels.is_empty() {
        return invalid(format!("{kind} labels must be nonempty"));
    }
    let distinct: HashSet<&String> = labels.iter().collect();
    if distinct.len() != labels.len() {
        return invalid(format!("{kind} labels must be distinct"));
    }
    Ok(())
}

/// Finite stage game: player 1 knows the state `theta`, player 2's payoff
/// depends only on the action pair.
#[derive(Debug, Clone, PartialEq)]
pub struct StageGame<S> {
    theta_labels: Vec<String>,
    a_labels: Vec<String>,
    b_labels: Vec<String>,
    u1: Vec<S>,
    u2: Vec<S>,
    pure_br: Vec<Vec<usize>>,
}

impl<S: Scalar> StageGame<S> {
    /// `u1[theta][a][b]` and `u2[a][b]`.
    pub fn new(
        theta_labels: Vec<String>,
        a_labels: Vec<String>,
        b_labels: Vec<String>,
        u1: Vec<Vec<Vec<S>>>,
        u2: Vec<Vec<S>>,
    ) -> Result<Self> {
        check_labels("theta", &theta_labels)?;
        check_labels("player-1 action", &a_labels)?;
        check_labels("player-2 action", &b_labels)?;
        let (nt, na, nb) = (theta_labels.len(), a_labels.len(), b_labels.len());
        if na > MAX_ACTIONS {
            return Err(Error::SizeLimit(format!(
                "at most {MAX_ACTIONS} player-1 actions supported, got {na}"
            )));
        }
        if u1.len() != nt
            || u1
                .iter()
                .any(|m| m.len() != na || m.iter().any(|r| r.len() != nb))
        {
            return invalid(format!("u1 must be a {nt} x {na} x {nb} table"));
        }
        if u2.len() != na || u2.iter().any(|r| r.len() != nb) {
            return invalid(format!("u2 must be a {na} x {nb} table"));
        }
        let u1: Vec<S> = u1.into_iter().flatten().flatten().collect();
        let u2: Vec<S> = u2.into_iter().flatten().collect();
        if u1.iter().chain(u2.iter()).any(|v| !v.is_finite()) {
            return invalid("payoffs must be finite");
        }
        let mut game = Self {
            theta_labels,
            a_labels,
            b_labels,
            u1,
            u2,
            pure_br: Vec::new(),
        };
        game.pure_br = (0..na)
            .map(|a| argmax_set((0..nb).map(|b| game.u2(a, b))))
            .collect();
        Ok(game)
    }

    pub fn theta_labels(&self) -> &[String] {
        &self.theta_labels
    }
    pub fn a_labels(&self) -> &[String] {
        &self.a_labels
    }
    pub fn b_labels(&self) -> &[String] {
        &self.b_labels
    }
    pub fn n_theta(&self) -> usize {
        self.theta_labels.len()
    }
    pub fn n_a(&self) -> usize {
        self.a_labels.len()
    }
    pub fn n_b(&self) -> usize {
        self.b_labels.len()
    }

    #[inline]
    pub fn u1(&self, theta: usize, a: usize, b: usize) -> S {
        self.u1[(theta * self.n_a() + a) * self.n_b() + b]
    }

    #[inline]
    pub fn u2(&self, a: usize, b: usize) -> S {
        self.u2[a * self.n_b() + b]
    }

    /// Player 1's payoff against a mixed player-2 action.
    pub fn u1_mixed(&self, theta: usize, a: usize, mix_b: &[S]) -> S {
        mix_b
            .iter()
            .enumerate()
            .fold(S::zero(), |acc, (b, &q)| acc + q * self.u1(theta, a, b))
    }

    /// Player 2's expected payoff from `b` against a mixture over A.
    pub fn u2_against(&self, mix_a: &[S], b: usize) -> S {
        mix_a
            .iter()
            .enumerate()
            .fold(S::zero(), |acc, (a, &q)| acc + q * self.u2(a, b))
    }

    /// Pure best replies to the pure action `a` (full argmax set).
    pub fn best_replies(&self, a: usize) -> &[usize] {
        &self.pure_br[a]
    }

    /// `min_{b in BR2(a)} u1(theta, a, b)`.
    pub fn commitment_value(&self, theta: usize, a: usize) -> S {
        self.pure_br[a]
            .iter()
            .map(|&b| self.u1(theta, a, b))
            .fold(S::infinity(), S::min)
    }

    pub fn lowest_payoff(&self) -> S {
        self.u1.iter().copied().fold(S::infinity(), S::min)
    }

    pub fn highest_payoff(&self) -> S {
        self.u1.iter().copied().fold(S::neg_infinity(), S::max)
    }

    pub fn payoff_range(&self) -> S {
        self.highest_payoff() - self.lowest_payoff()
    }

    /// Same labels, payoffs of player 1 multiplied by `factor`.
    pub fn scaled_u1(&self, factor: S) -> Self {
        let mut g = self.clone();
        for v in g.u1.iter_mut() {
            *v = *v * factor;
        }
        g
    }

    /// Stable identifier for consistency checks between reports.
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.theta_labels.hash(&mut h);
        self.a_labels.hash(&mut h);
        self.b_labels.hash(&mut h);
        for v in self.u1.iter().chain(self.u2.iter()) {
            v.f64().to_bits().hash(&mut h);
        }
        h.finish()
    }

    pub fn validate_p_theta(&self, p_theta: &[S]) -> Result<()> {
        if p_theta.len() != self.n_theta() || !is_distribution(p_theta, S::prob_tol()) {
            return invalid(format!(
                "state distribution must be a probability vector of length {}",
                self.n_theta()
            ));
        }
        Ok(())
    }
}

/// Indices attaining the maximum within the payoff tolerance.
pub(crate) fn argmax_set<S: Scalar>(values: impl Iterator<Item = S>) -> Vec<usize> {
    let vals: Vec<S> = values.collect();
    let best = vals.iter().copied().fold(S::neg_infinity(), S::max);
    let tol = S::payoff_tol();
    vals.iter()
        .enumerate()
        .filter(|(_, &v)| v >= best - tol)
        .map(|(i, _)| i)
        .collect()
}

/// First index attaining the maximum within tolerance (label-order tie-break).
pub(crate) fn first_argmax<S: Scalar>(values: impl Iterator<Item = S>) -> (usize, S) {
    let mut best: Option<(usize, S)> = None;
    for (i, v) in values.enumerate() {
        match best {
            Some((_, bv)) if v <= bv + S::payoff_tol() => {}
            _ => best = Some((i, v)),
        }
    }
    best.expect("nonempty")
}

/// Joint distribution of the state and the feasible set.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment<S> {
    n_theta: usize,
    n_a: usize,
    joint: Vec<S>,
    marginal: Vec<S>,
    rho_lower: S,
    flexibility: S,
}

impl<S: Scalar> Environment<S> {
    /// Builds the table from `(theta, feasible set, probability)` entries;
    /// repeated `(theta, set)` pairs accumulate.
    pub fn from_entries(
        n_theta: usize,
        n_a: usize,
        entries: &[(usize, ActionSet, S)],
    ) -> Result<Self> {
        if n_a == 0 || n_a > MAX_ACTIONS {
            return invalid("environment action count out of range");
        }
        let n_sets = (1usize << n_a) - 1;
        let mut joint = vec![S::zero(); n_theta * n_sets];
        for &(theta, set, p) in entries {
            if theta >= n_theta || set.is_empty() || set.mask() >> n_a != 0 {
                return invalid("environment entry refers to an unknown state or action");
            }
            if !(p >= S::zero()) || !p.is_finite() {
                return invalid("environment probabilities must be nonnegative");
            }
            joint[theta * n_sets + set.index()] = joint[theta * n_sets + set.index()] + p;
        }
        Self::from_table(n_theta, n_a, joint)
    }

    fn from_table(n_theta: usize, n_a: usize, joint: Vec<S>) -> Result<Self> {
        let n_sets = (1usize << n_a) - 1;
        let sum = total(&joint);
        if (sum - S::one()).abs() > S::prob_tol() {
            return invalid(format!(
                "environment probabilities sum to {sum}, expected 1"
            ));
        }
        let marginal: Vec<S> = (0..n_theta)
            .map(|t| total(&joint[t * n_sets..(t + 1) * n_sets]))
            .collect();
        let set_prob = |s: ActionSet| -> S {
            (0..n_theta).fold(S::zero(), |acc, t| acc + joint[t * n_sets + s.index()])
        };
        let rho_lower = (0..n_a)
            .map(|a| set_prob(ActionSet::singleton(a)))
            .fold(S::infinity(), S::min);
        let flexibility = set_prob(ActionSet::full(n_a));
        Ok(Self {
            n_theta,
            n_a,
            joint,
            marginal,
            rho_lower,
            flexibility,
        })
    }

    /// State independent of the feasible set.
    pub fn independent(p_theta: &[S], n_a: usize, omega: &[(ActionSet, S)]) -> Result<Self> {
        let entries: Vec<(usize, ActionSet, S)> = p_theta
            .iter()
            .enumerate()
            .flat_map(|(t, &pt)| omega.iter().map(move |&(set, po)| (t, set, pt * po)))
            .collect();
        Self::from_entries(p_theta.len(), n_a, &entries)
    }

    /// Every action is feasible in every period.
    pub fn always_full(p_theta: &[S], n_a: usize) -> Result<Self> {
        Self::independent(p_theta, n_a, &[(ActionSet::full(n_a), S::one())])
    }

    /// Feasible set is `A` with probability `1 - n_a * eps` and each singleton
    /// with probability `eps`, independent of the state.
    pub fn singleton_split(p_theta: &[S], n_a: usize, eps: S) -> Result<Self> {
        if n_a == 1 {
            return Self::always_full(p_theta, 1);
        }
        let mut omega: Vec<(ActionSet, S)> =
            (0..n_a).map(|a| (ActionSet::singleton(a), eps)).collect();
        omega.push((ActionSet::full(n_a), S::one() - S::of_usize(n_a) * eps));
        Self::independent(p_theta, n_a, &omega)
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }
    pub fn n_a(&self) -> usize {
        self.n_a
    }
    pub fn n_sets(&self) -> usize {
        (1usize << self.n_a) - 1
    }

    pub fn prob(&self, theta: usize, set: ActionSet) -> S {
        self.joint[theta * self.n_sets() + set.index()]
    }

    /// Raw table in `(theta, set index)` order.
    pub fn joint(&self) -> &[S] {
        &self.joint
    }

    pub fn p_theta(&self) -> &[S] {
        &self.marginal
    }

    /// `min_a P(omega = {a})`.
    pub fn rho_lower(&self) -> S {
        self.rho_lower
    }

    /// `P(omega = A)`.
    pub fn flexibility(&self) -> S {
        self.flexibility
    }

    pub fn is_epsilon_flexible(&self, eps: S) -> bool {
        self.flexibility >= S::one() - eps - S::prob_tol()
    }

    /// Positive-probability `(theta, set, prob)` triples.
    pub fn support(&self) -> Vec<(usize, ActionSet, S)> {
        let n_sets = self.n_sets();
        (0..self.joint.len())
            .filter(|&i| self.joint[i] > S::zero())
            .map(|i| (i / n_sets, ActionSet::from_index(i % n_sets), self.joint[i]))
            .collect()
    }

    pub fn nonempty_sets(&self) -> impl Iterator<Item = ActionSet> {
        ActionSet::all(self.n_a)
    }
}

/// Optional second public signal `z ~ G(.|m, a)` and the observation window.
#[derive(Debug, Clone, PartialEq)]
pub struct ZSignals<S> {
    pub labels: Vec<String>,
    /// `g[(m * n_a + a) * n_z + z]`
    g: Vec<S>,
    pub memory_k: usize,
}

impl<S: Scalar> ZSignals<S> {
    pub fn n_z(&self) -> usize {
        self.labels.len()
    }
    pub fn row(&self, m: usize, a: usize, n_a: usize) -> &[S] {
        let nz = self.n_z();
        &self.g[(m * n_a + a) * nz..(m * n_a + a + 1) * nz]
    }
}

/// Public signal of whether player 1 kept their word: `y ~ F(.|a, m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalStructure<S> {
    y_labels: Vec<String>,
    n_a: usize,
    /// `f[(a * n_a + m) * n_y + y]`
    f: Vec<S>,
    z: Option<ZSignals<S>>,
}

impl<S: Scalar> SignalStructure<S> {
    /// `f[a][m]` is the distribution of `y` given action `a` and announcement `m`.
    pub fn new(y_labels: Vec<String>, f: Vec<Vec<Vec<S>>>) -> Result<Self> {
        check_labels("signal", &y_labels)?;
        let n_a = f.len();
        let ny = y_labels.len();
        if n_a == 0 || f.iter().any(|r| r.len() != n_a) {
            return invalid("F must be indexed by (action, announcement) over the same action set");
        }
        for (a, row) in f.iter().enumerate() {
            for (m, dist) in row.iter().enumerate() {
                if dist.len() != ny || !is_distribution(dist, S::prob_tol()) {
                    return invalid(format!("F(.|a={a}, m={m}) is not a distribution over Y"));
                }
            }
        }
        Ok(Self {
            y_labels,
            n_a,
            f: f.into_iter().flatten().flatten().collect(),
            z: None,
        })
    }

    /// `y = 1{a = m}` with labels `"0"` (broken) and `"1"` (kept).
    pub fn keep_word(n_a: usize) -> Self {
        let f = (0..n_a)
            .map(|a| {
                (0..n_a)
                    .map(|m| {
                        if a == m {
                            vec![S::zero(), S::one()]
                        } else {
                            vec![S::one(), S::zero()]
                        }
                    })
                    .collect()
            })
            .collect();
        Self::new(vec!["0".into(), "1".into()], f).expect("well-formed")
    }

    /// Attaches `z ~ G(.|m, a)` with `g[m][a]` rows and a memory bound `K`.
    pub fn with_z(
        mut self,
        labels: Vec<String>,
        g: Vec<Vec<Vec<S>>>,
        memory_k: usize,
    ) -> Result<Self> {
        check_labels("z", &labels)?;
        let nz = labels.len();
        if g.len() != self.n_a || g.iter().any(|r| r.len() != self.n_a) {
            return invalid("G must be indexed by (announcement, action)");
        }
        for row in g.iter().flatten() {
            if row.len() != nz || !is_distribution(row, S::prob_tol()) {
                return invalid("every row of G must be a distribution over Z");
            }
        }
        self.z = Some(ZSignals {
            labels,
            g: g.into_iter().flatten().flatten().collect(),
            memory_k,
        });
        Ok(self)
    }

    pub fn y_labels(&self) -> &[String] {
        &self.y_labels
    }
    pub fn n_y(&self) -> usize {
        self.y_labels.len()
    }
    pub fn n_a(&self) -> usize {
        self.n_a
    }
    pub fn z(&self) -> Option<&ZSignals<S>> {
        self.z.as_ref()
    }

    pub fn row(&self, a: usize, m: usize) -> &[S] {
        let ny = self.n_y();
        let i = (a * self.n_a + m) * ny;
        &self.f[i..i + ny]
    }

    pub fn z_row(&self, m: usize, a: usize) -> Option<&[S]> {
        self.z.as_ref().map(|z| z.row(m, a, self.n_a))
    }

    /// The common keep-word row `F*` if all diagonal rows coincide.
    pub fn common_diagonal(&self) -> Option<&[S]> {
        let first = self.row(0, 0);
        let all_equal = (1..self.n_a).all(|a| {
            self.row(a, a)
                .iter()
                .zip(first.iter())
                .all(|(&x, &y)| (x - y).abs() <= S::prob_tol())
        });
        all_equal.then_some(first)
    }

    /// Off-diagonal pairs `(a, m)` with `a != m`.
    pub fn off_diagonal(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n_a;
        (0..n).flat_map(move |a| (0..n).filter(move |&m| m != a).map(move |m| (a, m)))
    }
}

/// Player 2's best replies to a mixture over A (full argmax set, 1e-9 ties).
pub fn best_reply_set<S: Scalar>(game: &StageGame<S>, mix: &[S]) -> Result<Vec<usize>> {
    if mix.len() != game.n_a() || !is_distribution(mix, S::prob_tol()) {
        return invalid("best reply requires a probability vector over player-1 actions");
    }
    Ok(argmax_set((0..game.n_b()).map(|b| game.u2_against(mix, b))))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StackelbergSolution<S> {
    pub a_star: Vec<usize>,
    pub v_star: Vec<S>,
    pub expected: S,
}

/// Pure Stackelberg action and payoff per state, with pessimistic tie-breaking
/// over player 2's best replies and first-label tie-breaking over actions.
pub fn stackelberg<S: Scalar>(
    game: &StageGame<S>,
    p_theta: &[S],
) -> Result<StackelbergSolution<S>> {
    game.validate_p_theta(p_theta)?;
    let (a_star, v_star): (Vec<usize>, Vec<S>) = (0..game.n_theta())
        .map(|t| first_argmax((0..game.n_a()).map(|a| game.commitment_value(t, a))))
        .unzip();
    let expected = weighted(p_theta, &v_star);
    Ok(StackelbergSolution {
        a_star,
        v_star,
        expected,
    })
}

pub(crate) fn weighted<S: Scalar>(p: &[S], v: &[S]) -> S {
    p.iter()
        .zip(v.iter())
        .fold(S::zero(), |acc, (&pi, &vi)| acc + pi * vi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommitmentTable<S> {
    /// `values[theta][set index]`
    pub values: Vec<Vec<S>>,
    pub expected: S,
}

impl<S: Scalar> CommitmentTable<S> {
    pub fn get(&self, theta: usize, set: ActionSet) -> S {
        self.values[theta][set.index()]
    }
}

/// Commitment payoff restricted to the currently feasible actions.
pub fn feasible_commitment_value<S: Scalar>(
    game: &StageGame<S>,
    theta: usize,
    set: ActionSet,
) -> S {
    set.iter()
        .map(|a| game.commitment_value(theta, a))
        .fold(S::neg_infinity(), S::max)
}

pub fn feasible_commitment<S: Scalar>(
    game: &StageGame<S>,
    env: &Environment<S>,
) -> Result<CommitmentTable<S>> {
    if env.n_a() != game.n_a() || env.n_theta() != game.n_theta() {
        return invalid("environment and game disagree on states or actions");
    }
    let values: Vec<Vec<S>> = (0..game.n_theta())
        .map(|t| {
            env.nonempty_sets()
                .map(|s| feasible_commitment_value(game, t, s))
                .collect()
        })
        .collect();
    let expected = env
        .support()
        .iter()
        .fold(S::zero(), |acc, &(t, s, p)| acc + p * values[t][s.index()]);
    Ok(CommitmentTable { values, expected })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinmaxSolution<S> {
    pub per_state: Vec<S>,
    /// Minimising player-2 mixture for each state.
    pub punisher: Vec<Vec<S>>,
    pub expected: S,
}

/// `min_{q in Delta(B)} max_a u1(theta, a, q)` per state, by linear programming.
pub fn minmax<S: Scalar>(game: &StageGame<S>, p_theta: &[S]) -> Result<MinmaxSolution<S>> {
    game.validate_p_theta(p_theta)?;
    let nb = game.n_b();
    let mut per_state = Vec::with_capacity(game.n_theta());
    let mut punisher = Vec::with_capacity(game.n_theta());
    for t in 0..game.n_theta() {
        // vars: q_0..q_{nb-1}, v (free)
        let mut lp = LinearProgram::new(nb + 1);
        lp.set_free(nb);
        let mut c = vec![S::zero(); nb + 1];
        c[nb] = S::one();
        lp.set_objective(c);
        let mut simplex: Vec<(usize, S)> = (0..nb).map(|b| (b, S::one())).collect();
        lp.add_sparse(&simplex, Relation::Eq, S::one());
        for a in 0..game.n_a() {
            simplex = (0..nb).map(|b| (b, -game.u1(t, a, b))).collect();
            simplex.push((nb, S::one()));
            lp.add_sparse(&simplex, Relation::Ge, S::zero());
        }
        match lp.solve() {
            LpOutcome::Optimal(sol) => {
                per_state.push(sol.value);
                punisher.push(sol.x[..nb].to_vec());
            }
            other => return Err(Error::Internal(format!("minmax LP failed: {other:?}"))),
        }
    }
    let expected = weighted(p_theta, &per_state);
    Ok(MinmaxSolution {
        per_state,
        punisher,
        expected,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport<S> {
    /// Every singleton feasible set has positive probability.
    pub a1_singletons: bool,
    pub rho_lower: S,
    /// All keep-word rows `F(.|a,a)` coincide.
    pub a2_common_diagonal: bool,
    /// `F*` lies outside the convex hull of the break-word rows.
    pub a2_outside_hull: bool,
    /// Phase-one residual of the hull membership problem (0 when inside).
    pub hull_residual: S,
    /// `P(omega = A)`.
    pub flexibility: S,
}

impl<S: Scalar> AssumptionReport<S> {
    pub fn a2(&self) -> bool {
        self.a2_common_diagonal && self.a2_outside_hull
    }
    pub fn all(&self) -> bool {
        self.a1_singletons && self.a2()
    }
}

/// Reports the singleton-feasibility assumption and both common-diagonal conditions. Never fails.
pub fn check_assumptions<S: Scalar>(
    env: &Environment<S>,
    signals: &SignalStructure<S>,
) -> AssumptionReport<S> {
    let rho_lower = env.rho_lower();
    let a1_singletons = rho_lower > S::zero();
    let diag = signals.common_diagonal();
    let (a2_outside_hull, hull_residual) = match diag {
        None => (false, S::zero()),
        Some(fstar) => {
            let rows: Vec<&[S]> = signals
                .off_diagonal()
                .map(|(a, m)| signals.row(a, m))
                .collect();
            if rows.is_empty() {
                (true, S::infinity())
            } else {
                let mut lp = LinearProgram::new(rows.len());
                lp.add_constraint(vec![S::one(); rows.len()], Relation::Eq, S::one());
                for y in 0..signals.n_y() {
                    lp.add_constraint(rows.iter().map(|r| r[y]).collect(), Relation::Eq, fstar[y]);
                }
                match lp.solve() {
                    LpOutcome::Infeasible { residual } => (true, residual),
                    _ => (false, S::zero()),
                }
            }
        }
    };
    AssumptionReport {
        a1_singletons,
        rho_lower,
        a2_common_diagonal: diag.is_some(),
        a2_outside_hull,
        hull_residual,
        flexibility: env.flexibility(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SupermodularityReport {
    /// Order on A (lowest first) making u1 strictly decreasing in a for all theta, b.
    pub a_order: Option<Vec<usize>>,
    /// Some state's Stackelberg action is not the lowest element of `a_order`.
    pub stackelberg_above_lowest: bool,
    pub condition_holds: bool,
    /// Order on B making u1 strictly increasing in b and u2 strictly
    /// supermodular together with `a_order`.
    pub b_order: Option<Vec<usize>>,
    pub lemma_part2_holds: bool,
}

pub(crate) fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// Searches orders of A and B for the supermodularity hypotheses.
pub fn check_supermodularity<S: Scalar>(game: &StageGame<S>) -> SupermodularityReport {
    let (nt, na, nb) = (game.n_theta(), game.n_a(), game.n_b());
    let a_order = permutations(na).into_iter().find(|ord| {
        ord.windows(2)
            .all(|w| (0..nt).all(|t| (0..nb).all(|b| game.u1(t, w[0], b) > game.u1(t, w[1], b))))
    });
    let a_star: Vec<usize> = (0..nt)
        .map(|t| first_argmax((0..na).map(|a| game.commitment_value(t, a))).0)
        .collect();
    let stackelberg_above_lowest = a_order
        .as_ref()
        .is_some_and(|ord| a_star.iter().any(|&a| a != ord[0]));
    let condition_holds = a_order.is_some() && stackelberg_above_lowest;

    let b_order = a_order.as_ref().and_then(|aord| {
        permutations(nb).into_iter().find(|bord| {
            let increasing = bord.windows(2).all(|w| {
                (0..nt).all(|t| (0..na).all(|a| game.u1(t, a, w[0]) < game.u1(t, a, w[1])))
            });
            increasing
                && (0..na).all(|i| {
                    (i + 1..na).all(|j| {
                        (0..nb).all(|k| {
                            (k + 1..nb).all(|l| {
                                let (lo, hi) = (aord[i], aord[j]);
                                let (bl, bh) = (bord[k], bord[l]);
                                game.u2(hi, bh) - game.u2(hi, bl)
                                    > game.u2(lo, bh) - game.u2(lo, bl)
                            })
                        })
                    })
                })
        })
    });
    let lemma_part2_holds = condition_holds && b_order.is_some();
    SupermodularityReport {
        a_order,
        stackelberg_above_lowest,
        condition_holds,
        b_order,
        lemma_part2_holds,
    }
}

/// The product-choice game with stochastic cost. Labels are ordered low to
/// high: `A = [L, H]`, `B = [N, T]`, states `[good, bad]`.
pub fn product_choice<S: Scalar>() -> StageGame<S> {
    let s = |v: f64| S::of(v);
    StageGame::new(
        vec!["good".into(), "bad".into()],
        vec!["L".into(), "H".into()],
        vec!["N".into(), "T".into()],
        vec![
            vec![vec![s(0.0), s(2.0)], vec![s(-1.0), s(1.0)]],
            vec![vec![s(0.0), s(2.0)], vec![s(-3.0), s(-1.0)]],
        ],
        vec![vec![s(0.0), s(-2.0)], vec![s(0.0), s(2.0)]],
    )
    .expect("product-choice tables are well-formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    const L: usize = 0;
    const H: usize = 1;
    const N: usize = 0;
    const T: usize = 1;

    fn pc() -> StageGame<f64> {
        product_choice()
    }

    #[test]
    fn best_replies_product_choice() {
        let g = pc();
        assert_eq!(best_reply_set(&g, &[0.0, 1.0]).unwrap(), vec![T]);
        assert_eq!(best_reply_set(&g, &[0.5, 0.5]).unwrap(), vec![N, T]);
        assert!(best_reply_set(&g, &[0.6, 0.6]).is_err());
        assert!(best_reply_set(&g, &[1.0]).is_err());
    }

    #[test]
    fn single_reply_game() {
        let g = StageGame::new(
            vec!["t".into()],
            vec!["x".into(), "y".into()],
            vec!["only".into()],
            vec![vec![vec![3.0_f64], vec![5.0]]],
            vec![vec![1.0], vec![-1.0]],
        )
        .unwrap();
        assert_eq!(best_reply_set(&g, &[0.3, 0.7]).unwrap(), vec![0]);
        let mm = minmax(&g, &[1.0]).unwrap();
        assert!((mm.per_state[0] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn stackelberg_product_choice() {
        let g = pc();
        let s = stackelberg(&g, &[0.5, 0.5]).unwrap();
        assert_eq!(s.a_star, vec![H, L]);
        assert_eq!(s.v_star, vec![1.0, 0.0]);
        assert!((s.expected - 0.5).abs() < 1e-12);
        let s1 = stackelberg(&g, &[1.0, 0.0]).unwrap();
        assert!((s1.expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_game_stackelberg() {
        let g = StageGame::new(
            vec!["a".into(), "b".into()],
            vec!["x".into(), "y".into()],
            vec!["l".into(), "r".into()],
            vec![vec![vec![1.5_f64; 2]; 2]; 2],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap();
        let s = stackelberg(&g, &[0.25, 0.75]).unwrap();
        assert!((s.expected - 1.5).abs() < 1e-12);
        // ties broken towards the first label
        assert_eq!(s.a_star, vec![0, 0]);
        let report = check_supermodularity(&g);
        assert!(report.a_order.is_none());
        assert!(!report.condition_holds);
    }

    #[test]
    fn feasible_commitment_values() {
        let g = pc();
        let env = Environment::singleton_split(&[0.5, 0.5], 2, 0.01).unwrap();
        let table = feasible_commitment(&g, &env).unwrap();
        assert_eq!(table.get(0, ActionSet::full(2)), 1.0);
        assert_eq!(table.get(0, ActionSet::singleton(L)), 0.0);
        assert_eq!(table.get(0, ActionSet::singleton(H)), 1.0);
        assert_eq!(table.get(1, ActionSet::singleton(H)), -1.0);
        // 0.98 * 0.5 + 0.01 * (1 - 1) / 2 + 0
        assert!((table.expected - 0.49).abs() < 1e-12);

        let only_l =
            Environment::independent(&[0.5, 0.5], 2, &[(ActionSet::singleton(L), 1.0)]).unwrap();
        let t = feasible_commitment(&g, &only_l).unwrap();
        assert!(t.expected.abs() < 1e-12);
    }

    #[test]
    fn minmax_product_choice() {
        let mm = minmax(&pc(), &[0.5, 0.5]).unwrap();
        assert!(mm.per_state[0].abs() < 1e-9);
        assert!(mm.per_state[1].abs() < 1e-9);
        assert!((mm.punisher[0][N] - 1.0).abs() < 1e-9);
        assert!(mm.expected.abs() < 1e-9);
    }

    #[test]
    fn assumptions_keep_word_signal() {
        let env = Environment::<f64>::singleton_split(&[0.5, 0.5], 2, 0.01).unwrap();
        let rep = check_assumptions(&env, &SignalStructure::keep_word(2));
        assert!(rep.a1_singletons && rep.a2_common_diagonal && rep.a2_outside_hull);
        assert!((rep.rho_lower - 0.01).abs() < 1e-15);
        assert!((rep.flexibility - 0.98).abs() < 1e-15);
        assert!(env.is_epsilon_flexible(0.02));
        assert!(!env.is_epsilon_flexible(0.01));
    }

    #[test]
    fn assumptions_uninformative_signal() {
        let row = vec![0.3, 0.7];
        let sig = SignalStructure::new(
            vec!["lo".into(), "hi".into()],
            vec![vec![row.clone(), row.clone()], vec![row.clone(), row]],
        )
        .unwrap();
        let env = Environment::always_full(&[1.0], 2).unwrap();
        let rep = check_assumptions(&env, &sig);
        assert!(rep.a2_common_diagonal);
        assert!(!rep.a2_outside_hull);
        assert!(!rep.a1_singletons);
    }

    #[test]
    fn assumptions_hull_with_noise() {
        // F* = (0.1, 0.9); break-word rows (0.8, 0.2) and (0.6, 0.4): F* outside
        let sig = SignalStructure::new(
            vec!["0".into(), "1".into()],
            vec![
                vec![vec![0.1, 0.9], vec![0.8, 0.2]],
                vec![vec![0.6, 0.4], vec![0.1, 0.9]],
            ],
        )
        .unwrap();
        let env = Environment::singleton_split(&[1.0], 2, 0.1).unwrap();
        assert!(check_assumptions(&env, &sig).a2());
        // now make one break-word row noisier than F*: (0.0, 1.0) puts F* inside
        let sig = SignalStructure::new(
            vec!["0".into(), "1".into()],
            vec![
                vec![vec![0.1, 0.9], vec![0.8, 0.2]],
                vec![vec![0.0, 1.0], vec![0.1, 0.9]],
            ],
        )
        .unwrap();
        assert!(!check_assumptions(&env, &sig).a2_outside_hull);
    }

    #[test]
    fn supermodularity_product_choice() {
        let rep = check_supermodularity(&pc());
        assert_eq!(rep.a_order, Some(vec![L, H]));
        assert!(rep.stackelberg_above_lowest);
        assert!(rep.condition_holds);
        assert_eq!(rep.b_order, Some(vec![N, T]));
        assert!(rep.lemma_part2_holds);
    }

    #[test]
    fn supermodularity_single_action() {
        let g = StageGame::new(
            vec!["t".into()],
            vec!["only".into()],
            vec!["l".into(), "r".into()],
            vec![vec![vec![0.0, 1.0]]],
            vec![vec![0.0, 1.0]],
        )
        .unwrap();
        let rep = check_supermodularity(&g);
        assert_eq!(rep.a_order, Some(vec![0]));
        assert!(!rep.stackelberg_above_lowest);
        assert!(!rep.condition_holds);
    }

    #[test]
    fn environment_validation() {
        assert!(Environment::from_entries(1, 2, &[(0, ActionSet::full(2), 0.9)]).is_err());
        assert!(Environment::from_entries(
            1,
            2,
            &[
                (0, ActionSet::full(2), -0.1),
                (0, ActionSet::singleton(0), 1.1)
            ]
        )
        .is_err());
        assert!(Environment::from_entries(1, 2, &[(1, ActionSet::full(2), 1.0)]).is_err());
    }

    #[test]
    fn label_validation() {
        let bad = StageGame::<f64>::new(
            vec!["t".into()],
            vec!["x".into(), "x".into()],
            vec!["l".into()],
            vec![vec![vec![0.0], vec![0.0]]],
            vec![vec![0.0], vec![0.0]],
        );
        assert!(bad.is_err());
        let empty = StageGame::<f64>::new(
            vec![],
            vec!["x".into()],
            vec!["l".into()],
            vec![],
            vec![vec![0.0]],
        );
        assert!(empty.is_err());
    }

    #[test]
    fn f32_game_core() {
        let g: StageGame<f32> = product_choice();
        let s = stackelberg(&g, &[0.5, 0.5]).unwrap();
        assert!((s.expected - 0.5).abs() < 1e-6);
        let mm = minmax(&g, &[0.5, 0.5]).unwrap();
        assert!(mm.expected.abs() < 1e-5);
    }
}
