//! Type beliefs, announcement assessments and the constants behind the
//! payoff bounds. Logarithms are natural throughout.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::game::{check_assumptions, stackelberg, Environment, SignalStructure, StageGame};
use crate::lp::{LinearProgram, Relation};
use crate::scalar::{snapped_ceil, Scalar};
use crate::simulator::quality::QualityGame;

/// `sum_y P(y) ln(P(y)/Q(y))`, `+inf` when `P` puts mass where `Q` has none.
pub fn kl_divergence<S: Scalar>(p: &[S], q: &[S]) -> Result<S> {
    if p.len() != q.len() {
        return invalid(format!(
            "KL divergence over {} and {} outcomes",
            p.len(),
            q.len()
        ));
    }
    let mut d = S::zero();
    for (&pi, &qi) in p.iter().zip(q.iter()) {
        if pi <= S::zero() {
            continue;
        }
        if qi <= S::zero() {
            return Ok(S::infinity());
        }
        d = d + pi * (pi / qi).ln();
    }
    // rounding can leave a tiny negative value for nearly equal inputs
    Ok(d.max(S::zero()))
}

/// KL divergence between Bernoulli laws with success probabilities `x1`, `x2`.
pub fn bernoulli_kl<S: Scalar>(x1: S, x2: S) -> S {
    kl_divergence(&[x1, S::one() - x1], &[x2, S::one() - x2]).expect("two outcomes")
}

fn logistic<S: Scalar>(l: S) -> S {
    if l == S::infinity() {
        S::one()
    } else if l == S::neg_infinity() {
        S::zero()
    } else if l >= S::zero() {
        S::one() / (S::one() + (-l).exp())
    } else {
        let e = l.exp();
        e / (S::one() + e)
    }
}

/// Player 2's belief that player 1 is honest. The log-likelihood ratio is the
/// primary state so long histories do not lose precision near 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeliefState<S> {
    pub pi: S,
    pub log_lr: S,
}

impl<S: Scalar> BeliefState<S> {
    pub fn new(pi: S) -> Result<Self> {
        if !(pi >= S::zero() && pi <= S::one()) {
            return invalid(format!("prior {pi} outside [0, 1]"));
        }
        let log_lr = if pi == S::zero() {
            S::neg_infinity()
        } else if pi == S::one() {
            S::infinity()
        } else {
            (pi / (S::one() - pi)).ln()
        };
        Ok(Self { pi, log_lr })
    }

    pub fn from_log_lr(log_lr: S) -> Self {
        Self {
            pi: logistic(log_lr),
            log_lr,
        }
    }
}

/// Bayes update from the likelihood of the observed signal under each type.
pub fn bayes_update_type<S: Scalar>(
    belief: BeliefState<S>,
    lik_h: S,
    lik_o: S,
) -> Result<BeliefState<S>> {
    if !(lik_h >= S::zero() && lik_h <= S::one() && lik_o >= S::zero() && lik_o <= S::one()) {
        return invalid(format!("likelihoods ({lik_h}, {lik_o}) outside [0, 1]"));
    }
    if lik_h == S::zero() && lik_o == S::zero() {
        return Err(Error::UndefinedHistory);
    }
    let (l, h0, o0) = (belief.log_lr, lik_h == S::zero(), lik_o == S::zero());
    // a certain type observing a signal it cannot produce
    if (l == S::infinity() && h0) || (l == S::neg_infinity() && o0) {
        return Err(Error::UndefinedHistory);
    }
    let next = if h0 {
        S::neg_infinity()
    } else if o0 {
        S::infinity()
    } else if l.is_infinite() {
        l
    } else {
        l + lik_h.ln() - lik_o.ln()
    };
    Ok(BeliefState::from_log_lr(next))
}

/// Player 2's view of the current announcement before acting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assessment<S> {
    /// `alpha(m)`, the probability of each announcement
    pub alpha: Vec<S>,
    /// `q(a | m)` flattened as `m * n_a + a`; rows of unreached `m` are zero
    pub conditional: Vec<S>,
    /// `xi(m) = q(m | m)`, zero for unreached `m`
    pub xi_of_m: Vec<S>,
    /// `sum_m alpha(m) xi(m)`
    pub xi: S,
}

impl<S: Scalar> Assessment<S> {
    /// Mixes the two types' joint announcement-action laws (`m * n_a + a`)
    /// with weight `pi` on the honest type.
    pub fn from_joint(pi: S, joint_h: &[S], joint_o: &[S], n_a: usize) -> Self {
        let mut alpha = vec![S::zero(); n_a];
        let mut conditional = vec![S::zero(); n_a * n_a];
        let mut xi_of_m = vec![S::zero(); n_a];
        let w_o = S::one() - pi;
        for m in 0..n_a {
            for a in 0..n_a {
                let k = m * n_a + a;
                let v = pi * joint_h[k] + w_o * joint_o[k];
                conditional[k] = v;
                alpha[m] = alpha[m] + v;
            }
        }
        let mut xi = S::zero();
        for m in 0..n_a {
            if alpha[m] > S::zero() {
                for a in 0..n_a {
                    conditional[m * n_a + a] = conditional[m * n_a + a] / alpha[m];
                }
                xi_of_m[m] = conditional[m * n_a + m];
            }
            xi = xi + alpha[m] * xi_of_m[m];
        }
        Self {
            alpha,
            conditional,
            xi_of_m,
            xi,
        }
    }

    pub fn n_a(&self) -> usize {
        self.alpha.len()
    }

    pub fn conditional_row(&self, m: usize) -> &[S] {
        let n = self.n_a();
        &self.conditional[m * n..(m + 1) * n]
    }
}

/// Whether the belief `lambda * delta_target + (1 - lambda) * q` makes some
/// best reply to `target` strictly better than every non-best reply, for every
/// residual `q` on the other rows. `u2[row][b]`.
fn is_forced<S: Scalar>(u2: &[Vec<S>], target: usize, br: &[usize], lambda: S) -> bool {
    let nb = u2[target].len();
    let outside: Vec<usize> = (0..nb).filter(|b| !br.contains(b)).collect();
    if outside.is_empty() {
        return true;
    }
    let rows: Vec<usize> = (0..u2.len()).filter(|&r| r != target).collect();
    let gain = |r: usize, b: usize, c: usize| u2[r][b] - u2[r][c];
    if rows.is_empty() {
        return br
            .iter()
            .any(|&b| outside.iter().all(|&c| gain(target, b, c) > S::zero()));
    }
    // The belief escapes iff some q and some map f: BR -> outside make every
    // gain(b, f(b)) nonpositive; for fixed f that is an LP.
    let radix = outside.len();
    let combos = radix.pow(br.len() as u32);
    for k in 0..combos {
        let mut code = k;
        let f: Vec<usize> = br
            .iter()
            .map(|_| {
                let c = outside[code % radix];
                code /= radix;
                c
            })
            .collect();
        let nq = rows.len();
        let mut lp = LinearProgram::new(nq + 1);
        lp.set_free(nq);
        let mut obj = vec![S::zero(); nq + 1];
        obj[nq] = S::one();
        lp.set_objective(obj);
        let ones: Vec<(usize, S)> = (0..nq).map(|j| (j, S::one())).collect();
        lp.add_sparse(&ones, Relation::Eq, S::one());
        for (&b, &c) in br.iter().zip(f.iter()) {
            let mut terms: Vec<(usize, S)> = rows
                .iter()
                .enumerate()
                .map(|(j, &r)| (j, (S::one() - lambda) * gain(r, b, c)))
                .collect();
            terms.push((nq, -S::one()));
            lp.add_sparse(&terms, Relation::Le, -lambda * gain(target, b, c));
        }
        match lp.solve().optimal() {
            Some(sol) if sol.value > S::epsilon() * S::of(16.0) => {}
            _ => return false,
        }
    }
    true
}

/// Smallest weight on `target` above which player 2 is forced to a best
/// reply to it, whatever the remaining belief mass. Zero when every reply is a
/// best reply or when the target forces it on its own, which is monotone in
/// the weight and found by bisection.
pub fn forcing_threshold<S: Scalar>(u2: &[Vec<S>], target: usize, br: &[usize]) -> S {
    if is_forced(u2, target, br, S::zero()) {
        return S::zero();
    }
    let (mut lo, mut hi) = (S::zero(), S::one());
    let stop = S::epsilon() * S::of(4.0);
    for _ in 0..200 {
        if hi - lo <= stop {
            break;
        }
        let mid = (lo + hi) / S::of(2.0);
        if is_forced(u2, target, br, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo + hi) / S::of(2.0)
}

fn u2_matrix<S: Scalar>(game: &StageGame<S>) -> Vec<Vec<S>> {
    (0..game.n_a())
        .map(|a| (0..game.n_b()).map(|b| game.u2(a, b)).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaBar<S> {
    pub value: S,
    /// `(a, threshold)` for each action in the range of `a*`
    pub per_action: Vec<(usize, S)>,
    /// No weight below one forces the best reply set.
    pub degenerate: bool,
}

/// Belief threshold on the Stackelberg actions `a*(theta)` above which player
/// 2 must best reply to them.
pub fn lambda_bar<S: Scalar>(game: &StageGame<S>) -> LambdaBar<S> {
    let uniform = vec![S::one() / S::of_usize(game.n_theta()); game.n_theta()];
    let a_star = stackelberg(game, &uniform)
        .expect("uniform prior is valid")
        .a_star;
    let mut actions = a_star;
    actions.sort_unstable();
    actions.dedup();
    threshold_over(&u2_matrix(game), &actions, |a| game.best_replies(a))
}

/// The same threshold taken over every action, as used when announcements
/// precede feasibility.
pub fn forcing_xi<S: Scalar>(game: &StageGame<S>) -> LambdaBar<S> {
    let actions: Vec<usize> = (0..game.n_a()).collect();
    threshold_over(&u2_matrix(game), &actions, |a| game.best_replies(a))
}

/// Threshold over all quality levels of the quality-announcement game.
pub fn lambda_bar_quality<S: Scalar>(game: &QualityGame<S>) -> LambdaBar<S> {
    let xs: Vec<usize> = (0..game.n_x()).collect();
    threshold_over(game.u2_table(), &xs, |x| game.best_replies(x))
}

fn threshold_over<'a, S: Scalar>(
    u2: &[Vec<S>],
    targets: &[usize],
    br: impl Fn(usize) -> &'a [usize],
) -> LambdaBar<S> {
    let per_action: Vec<(usize, S)> = targets
        .iter()
        .map(|&t| (t, forcing_threshold(u2, t, br(t))))
        .collect();
    let value = per_action.iter().map(|p| p.1).fold(S::zero(), S::max);
    LambdaBar {
        value,
        degenerate: value >= S::one() - S::payoff_tol(),
        per_action,
    }
}

/// `1 - (1 - lambda_bar) * rho_lower`
pub fn xi_star<S: Scalar>(lambda_bar: S, rho_lower: S) -> S {
    S::one() - (S::one() - lambda_bar) * rho_lower
}

/// `min_{a != m} d(F* || xi F* + (1 - xi) F(.|a,m))`, `+inf` with one action.
pub fn separation<S: Scalar>(signals: &SignalStructure<S>, xi: S) -> Result<S> {
    let f_star = signals
        .common_diagonal()
        .ok_or_else(|| Error::InvalidInput("keep-word signal rows F(.|a,a) differ".into()))?;
    if !(xi >= S::zero() && xi <= S::one()) {
        return invalid(format!("keep-word probability {xi} outside [0, 1]"));
    }
    let mut best = S::infinity();
    for (a, m) in signals.off_diagonal() {
        let mix: Vec<S> = f_star
            .iter()
            .zip(signals.row(a, m).iter())
            .map(|(&s, &o)| xi * s + (S::one() - xi) * o)
            .collect();
        best = best.min(kl_divergence(f_star, &mix)?);
    }
    Ok(best)
}

pub fn d_star<S: Scalar>(signals: &SignalStructure<S>, xi_star: S) -> Result<S> {
    if xi_star >= S::one() {
        return invalid("xi* must be below 1");
    }
    separation(signals, xi_star)
}

/// `ceil(-ln pi0 / d)`
pub fn t_bar<S: Scalar>(pi0: S, d: S) -> Result<u64> {
    if !(pi0 > S::zero() && pi0 <= S::one()) {
        return invalid(format!("prior {pi0} outside (0, 1]"));
    }
    if !(d > S::zero()) {
        return Err(Error::BoundUndefined(format!(
            "separation {d} is not positive"
        )));
    }
    let ratio = -pi0.ln() / d;
    snapped_ceil(ratio.max(S::zero()))
        .to_u64()
        .ok_or_else(|| Error::BoundUndefined(format!("bad-period bound {ratio} does not fit")))
}

/// `delta^T {(1 - e) v* + e u_low} + (1 - delta^T) u_low` with
/// `e = epsilon / min_p`; `delta = None` takes the patient limit.
pub fn bound_3_6<S: Scalar>(
    v1_star: S,
    u1_lowest: S,
    delta: Option<S>,
    epsilon: S,
    min_p_theta: S,
    t_bar: u64,
) -> Result<S> {
    if !(min_p_theta > S::zero()) {
        return invalid("smallest state probability must be positive");
    }
    let e = epsilon / min_p_theta;
    if !(e >= S::zero() && e <= S::one()) {
        return invalid(format!("epsilon / min p = {e} outside [0, 1]"));
    }
    let w = match delta {
        None => S::one(),
        Some(d) if d >= S::zero() && d < S::one() => {
            if t_bar == 0 {
                S::one()
            } else {
                d.powf(S::of(t_bar as f64))
            }
        }
        Some(d) => return invalid(format!("discount factor {d} outside [0, 1)")),
    };
    Ok(w * ((S::one() - e) * v1_star + e * u1_lowest) + (S::one() - w) * u1_lowest)
}

/// `1 - rho_lower^K (1 - xi*)`
pub fn xi_hat<S: Scalar>(rho_lower: S, memory_k: usize, xi_star: S) -> S {
    S::one() - rho_lower.powi(memory_k as i32) * (S::one() - xi_star)
}

pub fn t_hat<S: Scalar>(pi0: S, d_hat: S) -> Result<u64> {
    t_bar(pi0, d_hat)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QualityCommitment<S> {
    pub action: usize,
    pub value: S,
}

/// `max_a sum_x g(x|a) min_{b in BR2(x)} u1(a, b)`, first action on ties.
pub fn commitment_payoff_quality<S: Scalar>(game: &QualityGame<S>) -> QualityCommitment<S> {
    let (action, value) = crate::game::first_argmax((0..game.n_a()).map(|a| {
        game.g(a)
            .iter()
            .enumerate()
            .fold(S::zero(), |acc, (x, &p)| acc + p * game.trusted_value(a, x))
    }));
    QualityCommitment { action, value }
}

/// Bad-period bound for the quality variant: keep-word threshold
/// `1 - g_lower (1 - lambda_bar)` and separation `-ln` of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QualityBound<S> {
    pub lambda_bar: S,
    pub g_lower: S,
    pub xi_star: S,
    pub d: S,
    pub t_bar: u64,
    pub v_star_star: S,
}

pub fn quality_bound<S: Scalar>(game: &QualityGame<S>, pi0: S) -> Result<QualityBound<S>> {
    if !game.has_full_support() {
        return invalid("the quality bound needs g(.|a) with full support");
    }
    let lambda_bar = lambda_bar_quality(game).value;
    let g_lower = game.g_lower();
    let xi_star = S::one() - g_lower * (S::one() - lambda_bar);
    let d = bernoulli_kl(S::one(), xi_star);
    Ok(QualityBound {
        lambda_bar,
        g_lower,
        xi_star,
        d,
        t_bar: t_bar(pi0, d)?,
        v_star_star: commitment_payoff_quality(game).value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Corollary3Constants<S> {
    pub rho: S,
    pub eta: S,
    pub xi: S,
    pub alpha: S,
    pub beta: S,
    /// `alpha / (alpha + beta)`, zero when degenerate
    pub good_fraction: S,
    /// `alpha <= 0`: the drift argument gives nothing
    pub degenerate: bool,
}

pub fn corollary3_constants<S: Scalar>(rho: S, eta: S, xi: S) -> Result<Corollary3Constants<S>> {
    if !(rho >= S::zero() && rho < S::one()) {
        return invalid(format!("rho = {rho} outside [0, 1)"));
    }
    if !(eta > S::zero() && eta < S::one()) {
        return invalid(format!("eta = {eta} outside (0, 1)"));
    }
    if !(xi > S::zero() && xi < S::one()) {
        return invalid(format!("xi = {xi} outside (0, 1)"));
    }
    let keep = S::one() - rho;
    let beta = bernoulli_kl(keep, S::one() - eta * rho);
    let alpha = bernoulli_kl(keep, S::one() - eta * (S::one() - xi)) - beta;
    let degenerate = !(alpha > S::zero());
    let good_fraction = if degenerate {
        S::zero()
    } else {
        alpha / (alpha + beta)
    };
    Ok(Corollary3Constants {
        rho,
        eta,
        xi,
        alpha,
        beta,
        good_fraction,
        degenerate,
    })
}

/// Inputs beyond the game for [`bound_report`].
#[derive(Debug, Clone, Copy)]
pub struct BoundInputs<S> {
    pub pi0: S,
    /// `None` evaluates the payoff bound in the patient limit.
    pub delta: Option<S>,
    /// Overrides `1 - P(omega = A)` in the payoff bound.
    pub epsilon: Option<S>,
    pub memory_k: Option<usize>,
    /// `(eta, xi)` for the pre-announcement constants; `rho = 1 - P(omega = A)`.
    pub corollary3: Option<(S, S)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport<S> {
    pub pi0: S,
    pub delta: Option<S>,
    pub game_fingerprint: u64,
    /// Singleton feasibility and both common-diagonal conditions hold.
    pub assumptions_hold: bool,
    pub lambda_bar: S,
    pub rho_lower: S,
    pub xi_star: S,
    pub d_star: Option<S>,
    pub t_bar: Option<u64>,
    pub epsilon: S,
    pub v1_star: S,
    pub u1_lowest: S,
    pub bound_3_6: Option<S>,
    pub xi_hat: Option<S>,
    pub d_hat: Option<S>,
    pub t_hat: Option<u64>,
    pub v_star_star: Option<S>,
    pub quality: Option<QualityBound<S>>,
    pub corollary3: Option<Corollary3Constants<S>>,
    /// Quantities that could not be formed, with the reason.
    pub notes: Vec<String>,
}

/// Assembles every bound constant; undefined ones are left empty with a note
/// instead of failing the whole report.
pub fn bound_report<S: Scalar>(
    game: &StageGame<S>,
    env: &Environment<S>,
    signals: &SignalStructure<S>,
    quality: Option<&QualityGame<S>>,
    inputs: BoundInputs<S>,
) -> Result<BoundReport<S>> {
    let mut notes = Vec::new();
    let p = env.p_theta();
    let lb = lambda_bar(game);
    if lb.degenerate {
        notes.push("lambda_bar reached 1: best replies are never forced".into());
    }
    let rho_lower = env.rho_lower();
    let xs = xi_star(lb.value, rho_lower);
    let d = match d_star(signals, xs) {
        Ok(d) => Some(d),
        Err(e) => {
            notes.push(format!("D*: {e}"));
            None
        }
    };
    let tb = match d.map(|d| t_bar(inputs.pi0, d)) {
        Some(Ok(t)) => Some(t),
        Some(Err(e)) => {
            notes.push(format!("T_bar: {e}"));
            None
        }
        None => None,
    };
    let st = stackelberg(game, p)?;
    let epsilon = inputs.epsilon.unwrap_or(S::one() - env.flexibility());
    let min_p = p.iter().copied().fold(S::infinity(), S::min);
    let b36 = match tb.map(|t| {
        bound_3_6(
            st.expected,
            game.lowest_payoff(),
            inputs.delta,
            epsilon,
            min_p,
            t,
        )
    }) {
        Some(Ok(v)) => Some(v),
        Some(Err(e)) => {
            notes.push(format!("payoff bound: {e}"));
            None
        }
        None => None,
    };
    let (mut xh, mut dh, mut th) = (None, None, None);
    if let Some(k) = inputs.memory_k {
        let v = xi_hat(rho_lower, k, xs);
        xh = Some(v);
        if v >= S::one() {
            notes.push("xi_hat = 1: bounded-memory bound degenerate".into());
        } else {
            match separation(signals, v) {
                Ok(d) => {
                    dh = Some(d);
                    match t_hat(inputs.pi0, d) {
                        Ok(t) => th = Some(t),
                        Err(e) => notes.push(format!("T_hat: {e}")),
                    }
                }
                Err(e) => notes.push(format!("D_hat: {e}")),
            }
        }
    }
    let (vss, qb) = match quality {
        Some(q) => {
            let v = commitment_payoff_quality(q).value;
            let b = match quality_bound(q, inputs.pi0) {
                Ok(b) => Some(b),
                Err(e) => {
                    notes.push(format!("quality bound: {e}"));
                    None
                }
            };
            (Some(v), b)
        }
        None => (None, None),
    };
    let c3 = match inputs.corollary3 {
        Some((eta, xi)) => {
            let c = corollary3_constants(S::one() - env.flexibility(), eta, xi)?;
            if c.degenerate {
                notes.push("alpha <= 0: pre-announcement drift bound degenerate".into());
            }
            Some(c)
        }
        None => None,
    };
    let assumptions = check_assumptions(env, signals);
    if !assumptions.all() {
        notes.push("assumption failed: feasibility or signal assumptions do not hold".into());
    }
    Ok(BoundReport {
        pi0: inputs.pi0,
        delta: inputs.delta,
        game_fingerprint: game.fingerprint(),
        assumptions_hold: assumptions.all(),
        lambda_bar: lb.value,
        rho_lower,
        xi_star: xs,
        d_star: d,
        t_bar: tb,
        epsilon,
        v1_star: st.expected,
        u1_lowest: game.lowest_payoff(),
        bound_3_6: b36,
        xi_hat: xh,
        d_hat: dh,
        t_hat: th,
        v_star_star: vss,
        quality: qb,
        corollary3: c3,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::product_choice;

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        let d = kl_divergence::<f64>(&[1.0, 0.0], &[0.995, 0.005]).unwrap();
        assert!((d + 0.995_f64.ln()).abs() < 1e-15);
        assert!(kl_divergence::<f64>(&[1.0, 0.0], &[0.0, 1.0])
            .unwrap()
            .is_infinite());
        assert!(kl_divergence(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn bayes_examples() {
        let b = BeliefState::<f64>::new(0.5).unwrap();
        assert_eq!(bayes_update_type(b, 0.3, 0.3).unwrap().pi, 0.5);
        let up = bayes_update_type(b, 1.0, 0.5).unwrap();
        assert!((up.pi - 2.0 / 3.0).abs() < 1e-12);
        assert!((up.log_lr - 2.0_f64.ln()).abs() < 1e-12);
        assert_eq!(bayes_update_type(b, 0.0, 0.5).unwrap().pi, 0.0);
        assert_eq!(bayes_update_type(b, 0.5, 0.0).unwrap().pi, 1.0);
        assert!(matches!(
            bayes_update_type(b, 0.0, 0.0),
            Err(Error::UndefinedHistory)
        ));
        let certain = BeliefState::new(1.0).unwrap();
        assert!(bayes_update_type(certain, 0.0, 1.0).is_err());
        assert_eq!(bayes_update_type(certain, 0.2, 1.0).unwrap().pi, 1.0);
    }

    #[test]
    fn lambda_bar_product_choice() {
        let lb = lambda_bar(&product_choice::<f64>());
        assert!((lb.value - 0.5).abs() < 1e-12, "{}", lb.value);
        assert!(!lb.degenerate);
        let xi = forcing_xi(&product_choice::<f64>());
        assert!((xi.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lambda_bar_vacuous() {
        // player 2 indifferent: every reply is a best reply
        let g = StageGame::<f64>::new(
            vec!["s".into()],
            vec!["a".into(), "c".into()],
            vec!["l".into(), "r".into()],
            vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]],
            vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        )
        .unwrap();
        assert_eq!(lambda_bar(&g).value, 0.0);
        // a dominant reply is forced at any belief
        let g = StageGame::<f64>::new(
            vec!["s".into()],
            vec!["a".into(), "c".into()],
            vec!["l".into(), "r".into()],
            vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]],
            vec![vec![1.0, 0.0], vec![1.0, 0.0]],
        )
        .unwrap();
        assert_eq!(lambda_bar(&g).value, 0.0);
    }

    #[test]
    fn constants_for_split_instance() {
        let xs = xi_star(0.5, 0.01);
        assert!((xs - 0.995_f64).abs() < 1e-15);
        let d = d_star(&SignalStructure::keep_word(2), xs).unwrap();
        assert!((d + 0.995_f64.ln()).abs() < 1e-15);
        assert_eq!(t_bar(0.1, d).unwrap(), 460);
        assert_eq!(t_bar(1.0, d).unwrap(), 0);
        assert_eq!(t_bar(d.mul_add(-1.0, 0.0).exp(), d).unwrap(), 1);
        assert!(t_bar(0.5, 0.0).is_err());
        assert!(d_star(&SignalStructure::<f64>::keep_word(2), 0.0)
            .unwrap()
            .is_infinite());
    }

    #[test]
    fn payoff_bound_values() {
        assert_eq!(bound_3_6(0.5, -3.0, None, 0.0, 0.5, 460).unwrap(), 0.5);
        assert_eq!(bound_3_6(0.5, -3.0, Some(0.0), 0.01, 0.5, 3).unwrap(), -3.0);
        let v = bound_3_6(0.5, -3.0, Some(0.99999), 0.01, 0.5, 460).unwrap();
        let w = 0.99999_f64.powi(460);
        assert!((v - (w * 0.43 - (1.0 - w) * 3.0)).abs() < 1e-12);
        assert!(bound_3_6(0.5, -3.0, None, 0.6, 0.5, 1).is_err());
    }

    #[test]
    fn bounded_memory_constants() {
        assert_eq!(xi_hat(0.01, 0, 0.995), 0.995);
        assert!((xi_hat(0.01, 1, 0.995) - 0.99995_f64).abs() < 1e-15);
        assert_eq!(xi_hat(0.3, 4, 1.0), 1.0);
        assert_eq!(xi_hat(0.0, 2, 0.9), 1.0);
    }

    #[test]
    fn quality_commitment_values() {
        let det = QualityGame::<f64>::deterministic_example();
        let c = commitment_payoff_quality(&det);
        assert_eq!((c.action, c.value), (1, 1.0));
        let noisy = QualityGame::<f64>::noisy_example(0.9, 0.1).unwrap();
        assert!((commitment_payoff_quality(&noisy).value - 0.8).abs() < 1e-12);
        assert!(quality_bound(&det, 0.5).is_err());
        let qb = quality_bound(&noisy, 0.5).unwrap();
        assert!((qb.lambda_bar - 0.5).abs() < 1e-12);
        assert!((qb.xi_star - 0.95).abs() < 1e-12);
    }

    #[test]
    fn corollary3_examples() {
        let c = corollary3_constants(0.0, 0.1, 0.5).unwrap();
        assert_eq!(c.beta, 0.0);
        assert_eq!(c.good_fraction, 1.0);
        let c = corollary3_constants::<f64>(0.001, 0.1, 0.5).unwrap();
        assert!((c.beta - bernoulli_kl(0.999, 0.9999)).abs() < 1e-15);
        assert!((c.alpha - (bernoulli_kl(0.999, 0.95) - c.beta)).abs() < 1e-15);
        assert!(!c.degenerate);
        let mut last = 0.0;
        for rho in [1e-2, 1e-3, 1e-4, 1e-5] {
            let c = corollary3_constants(rho, 0.1, 0.5).unwrap();
            let ratio = c.alpha / c.beta;
            assert!(ratio > last);
            last = ratio;
        }
        assert!(corollary3_constants(0.5, 0.1, 0.5).unwrap().degenerate);
        assert!(corollary3_constants(0.1, 0.0, 0.5).is_err());
    }

    #[test]
    fn assessment_mixture() {
        // honest: announce H and keep it; opportunistic: announce H, play L
        let h = [0.0, 0.0, 0.0, 1.0];
        let o = [0.0, 0.0, 1.0, 0.0];
        let asm = Assessment::from_joint(0.25, &h, &o, 2);
        assert_eq!(asm.alpha, vec![0.0, 1.0]);
        assert_eq!(asm.xi_of_m, vec![0.0, 0.25]);
        assert_eq!(asm.conditional_row(1), &[0.75, 0.25]);
        assert_eq!(asm.xi, 0.25);
    }

    #[test]
    fn report_for_split_instance() {
        let g = product_choice::<f64>();
        let env = Environment::singleton_split(&[0.5, 0.5], 2, 0.01).unwrap();
        let rep = bound_report(
            &g,
            &env,
            &SignalStructure::keep_word(2),
            None,
            BoundInputs {
                pi0: 0.1,
                delta: Some(0.99999),
                epsilon: Some(0.01),
                memory_k: Some(1),
                corollary3: Some((0.1, 0.5)),
            },
        )
        .unwrap();
        assert_eq!(rep.t_bar, Some(460));
        assert!(rep.t_hat.unwrap() > 460);
        // rho = 0.02 is too large for eta = 0.1
        assert!(rep.corollary3.unwrap().degenerate);
        assert_eq!(rep.notes.len(), 1, "{:?}", rep.notes);
    }
}
