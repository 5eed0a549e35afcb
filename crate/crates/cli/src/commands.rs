use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use honrep::beliefs::{
    bound_3_6, bound_report, corollary3_constants, lambda_bar, lambda_bar_quality, BoundInputs,
};
use honrep::game::{
    check_assumptions, check_supermodularity, feasible_commitment, minmax, stackelberg,
};
use honrep::simulator::{
    estimate, estimate_quality, preannounce_traces, run_episode, run_quality_variant, PlayerType,
    Players, QualityPlayers, SimConfig, SimResult, Trajectory, Variant,
};
use honrep::solvers::{
    delta_threshold, solve_aux_no_comm, solve_aux_recommendation, solve_v1_prime, V1PrimeOptions,
    V1PrimeWitness,
};
use honrep::strategies::{
    bound_mode_player2, bound_mode_quality, honest_star_policy, mimic_honest_policy,
    myopic_greedy_policy, myopic_player2, quality_honest, theorem2_profile,
    threshold_milking_policy, tremble_wrap, Player1Policy, Player2Policy, Punishment,
};
use honrep::verify::{
    check_appendix_e, check_corollary1, check_corollary2, check_theorem1_bound,
    verify_nash_profile, AppendixEOptions, Check, NashOptions, Status, VerificationReport,
};
use honrep::{ActionSet, BoundReport64, Environment64, StageGame64};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::output::{number, to_value};
use crate::spec::{input_error, Model, Opponent, PlayerSpec, Responder};

/// Command-line overrides of the spec's `sim` section.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub seeds: Option<usize>,
    pub delta: Option<f64>,
    pub variant: Option<String>,
    pub t_bar: Option<u64>,
}

fn labels_map(labels: &[String], values: &[f64]) -> Value {
    let mut m = Map::new();
    for (l, &v) in labels.iter().zip(values) {
        m.insert(l.clone(), number(v));
    }
    Value::Object(m)
}

fn set_label(labels: &[String], set: ActionSet) -> String {
    set.iter()
        .map(|a| labels[a].as_str())
        .collect::<Vec<_>>()
        .join("|")
}

fn witness_json(game: &StageGame64, w: &V1PrimeWitness<f64>) -> Value {
    let mut sel = Map::new();
    for (a, beta) in &w.selection {
        sel.insert(
            game.a_labels()[*a].clone(),
            labels_map(game.b_labels(), beta),
        );
    }
    json!({
        "value": number(w.objective),
        "subset": w.subset.iter().map(|&a| game.a_labels()[a].clone()).collect::<Vec<_>>(),
        "selection": sel,
        "threshold": number(w.threshold),
        "kind": to_value(&w.kind).unwrap_or(Value::Null),
    })
}

pub fn solve(model: &Model) -> Result<Value> {
    let (g, env) = (&model.game, &model.env);
    let p = env.p_theta().to_vec();
    let mut notes = Vec::new();
    let st = stackelberg(g, &p)?;
    let fc = feasible_commitment(g, env)?;
    let mm = minmax(g, &p)?;
    let nc = solve_aux_no_comm(g, &p)?;
    let rec = solve_aux_recommendation(g, &p)?;
    let opts = V1PrimeOptions {
        exclude_full_set: model.doc.solve.exclude_full_set,
    };
    let mut prime = Value::Null;
    let mut delta = Value::Null;
    match solve_v1_prime(g, &p, nc.v1_min, rec.v_hat_1, opts) {
        Ok(w) => {
            prime = witness_json(g, &w);
            let punish = Punishment::worst(&nc, &rec);
            match delta_threshold(g, &w, punish.value()) {
                Ok(d) => delta = number(d),
                Err(e) => notes.push(format!("discount threshold: {e}")),
            }
        }
        Err(honrep::Error::NoEquilibriumValue(msg)) => notes.push(format!("v1_prime: {msg}")),
        Err(e) => return Err(e.into()),
    }
    let mut commit = Map::new();
    for t in 0..g.n_theta() {
        let mut row = Map::new();
        for s in env.nonempty_sets() {
            row.insert(set_label(g.a_labels(), s), number(fc.get(t, s)));
        }
        commit.insert(g.theta_labels()[t].clone(), Value::Object(row));
    }
    let lb = lambda_bar(g);
    Ok(json!({
        "game_fingerprint": g.fingerprint(),
        "stackelberg": {
            "action": g.theta_labels().iter().zip(&st.a_star).map(|(t, &a)| (t.clone(), Value::String(g.a_labels()[a].clone()))).collect::<Map<_, _>>(),
            "value": labels_map(g.theta_labels(), &st.v_star),
            "expected": number(st.expected),
        },
        "feasible_commitment": {"value": commit, "expected": number(fc.expected)},
        "minmax": {"value": labels_map(g.theta_labels(), &mm.per_state), "expected": number(mm.expected)},
        "v1_min": number(nc.v1_min),
        "no_comm_equilibria": nc.equilibria.len(),
        "worst_no_comm": to_value(&nc.equilibria[nc.worst])?,
        "v_hat_1": number(rec.v_hat_1),
        "recommendation_equilibria": rec.equilibria.len(),
        "v1_prime": prime,
        "delta_threshold": delta,
        "lambda_bar": number(lb.value),
        "lambda_bar_degenerate": lb.degenerate,
        "assumptions": to_value(&check_assumptions(env, &model.signals))?,
        "supermodularity": to_value(&check_supermodularity(g))?,
        "notes": notes,
    }))
}

fn bound_inputs(model: &Model, delta: f64) -> BoundInputs<f64> {
    let doc = &model.doc;
    BoundInputs {
        pi0: doc.sim.pi0,
        delta: Some(delta),
        epsilon: doc.bound.epsilon,
        memory_k: model
            .signals
            .z()
            .map(|z| doc.sim.memory_k.unwrap_or(z.memory_k)),
        corollary3: doc.bound.corollary3.as_ref().map(|c| (c.eta, c.xi)),
    }
}

pub fn bounds(model: &Model, ov: &Overrides) -> Result<BoundReport64> {
    let delta = ov.delta.unwrap_or(model.doc.sim.delta);
    let quality = model.quality.as_ref().map(|(q, _)| q);
    let mut rep = bound_report(
        &model.game,
        &model.env,
        &model.signals,
        quality,
        bound_inputs(model, delta),
    )?;
    if let Some(t) = ov.t_bar {
        rep.t_bar = Some(t);
        let p = model.env.p_theta();
        let min_p = p.iter().copied().fold(f64::INFINITY, f64::min);
        let v1 = stackelberg(&model.game, p)?.expected;
        rep.bound_3_6 = bound_3_6(
            v1,
            model.game.lowest_payoff(),
            Some(delta),
            rep.epsilon,
            min_p,
            t,
        )
        .ok();
        rep.notes.push(format!("T_bar overridden to {t}"));
    }
    Ok(rep)
}

pub fn sim_config(model: &Model, ov: &Overrides) -> Result<SimConfig<f64>> {
    let s = &model.doc.sim;
    let name = ov.variant.clone().unwrap_or_else(|| s.variant.clone());
    let variant: Variant = name.parse().map_err(input_error)?;
    let mut cfg = SimConfig::new(ov.delta.unwrap_or(s.delta), variant);
    cfg.horizon = s.horizon;
    cfg.num_seeds = ov.seeds.unwrap_or(s.seeds);
    cfg.master_seed = ov.seed.unwrap_or(s.seed);
    cfg.pi0 = s.pi0;
    cfg.memory_k = s.memory_k;
    cfg.player_type = match s.player {
        PlayerSpec::Honest => PlayerType::Honest,
        PlayerSpec::Opportunistic => PlayerType::Opportunistic,
        PlayerSpec::Drawn => PlayerType::Drawn,
    };
    match variant {
        Variant::PreannounceFeasibility => {
            cfg.eta = s
                .eta
                .filter(|&e| e > 0.0)
                .ok_or_else(|| input_error("sim: the preannounce variant needs a positive eta"))?;
        }
        Variant::BoundedMemoryZ if model.signals.z().is_none() => {
            return Err(input_error(
                "signals: the bounded-memory variant needs a z section",
            ));
        }
        Variant::QualityAnnouncement if model.quality.is_none() => {
            return Err(input_error(
                "quality: the quality variant needs a quality section",
            ));
        }
        _ => {}
    }
    cfg.lambda_bar = match (&model.quality, variant) {
        (Some((q, _)), Variant::QualityAnnouncement) => lambda_bar_quality(q).value,
        _ => lambda_bar(&model.game).value,
    };
    cfg.validate()
        .map_err(|e| input_error(format!("sim: {e}")))?;
    Ok(cfg)
}

fn players(model: &Model, cfg: &SimConfig<f64>) -> Result<Players<f64>> {
    let g = &model.game;
    let p = model.env.p_theta();
    let a_star = stackelberg(g, p)?.a_star;
    let s = &model.doc.sim;
    let honest: Arc<dyn Player1Policy<f64>> = Arc::new(honest_star_policy(a_star.clone()));
    let opp: Arc<dyn Player1Policy<f64>> = match s.opponent {
        Opponent::MyopicGreedy => Arc::new(myopic_greedy_policy(g, a_star)),
        Opponent::MimicHonest => Arc::new(mimic_honest_policy(a_star)),
        Opponent::ThresholdMilking => {
            let th = s.threshold.ok_or_else(|| {
                input_error("sim: the threshold_milking opponent needs a threshold")
            })?;
            Arc::new(threshold_milking_policy(g, a_star, th))
        }
    };
    let (honest, opp) = if cfg.eta > 0.0 {
        let n = g.n_a();
        let wrap = |p: Arc<dyn Player1Policy<f64>>| -> Result<Arc<dyn Player1Policy<f64>>> {
            Ok(Arc::new(
                tremble_wrap(p, cfg.eta, n).map_err(|e| input_error(format!("sim: {e}")))?,
            ))
        };
        (wrap(honest)?, wrap(opp)?)
    } else {
        (honest, opp)
    };
    let responder: Arc<dyn Player2Policy<f64>> = match s.responder {
        Responder::BoundMode => Arc::new(bound_mode_player2(g, p, cfg.lambda_bar)),
        Responder::Myopic => Arc::new(myopic_player2(g)),
    };
    Ok(Players {
        honest,
        opportunistic: opp,
        responder,
    })
}

fn quality_players(model: &Model, cfg: &SimConfig<f64>) -> Result<QualityPlayers<f64>> {
    let (q, script) = model
        .quality
        .as_ref()
        .ok_or_else(|| input_error("quality: section missing"))?;
    let effort = honrep::beliefs::commitment_payoff_quality(q).action;
    Ok(QualityPlayers {
        honest: Arc::new(quality_honest(effort)),
        opportunistic: Arc::new(script.clone()),
        responder: Arc::new(bound_mode_quality(q, effort, cfg.lambda_bar)),
    })
}

pub struct SimOutput {
    pub result: SimResult<f64>,
    pub trajectories: Vec<(u64, Trajectory<f64>)>,
}

pub fn simulate(model: &Model, cfg: &SimConfig<f64>, keep: usize) -> Result<SimOutput> {
    let keep = keep.min(cfg.num_seeds) as u64;
    if cfg.variant == Variant::QualityAnnouncement {
        let (q, _) = model.quality.as_ref().expect("checked in sim_config");
        let pl = quality_players(model, cfg)?;
        let result = estimate_quality(cfg, q, &pl)?;
        let trajectories = (0..keep)
            .map(|e| Ok((e, run_quality_variant(cfg, q, &pl, e)?)))
            .collect::<Result<_>>()?;
        return Ok(SimOutput {
            result,
            trajectories,
        });
    }
    let pl = players(model, cfg)?;
    let result = estimate(cfg, &model.game, &model.env, &model.signals, &pl)?;
    let trajectories = (0..keep)
        .map(|e| {
            Ok((
                e,
                run_episode(cfg, &model.game, &model.env, &model.signals, &pl, e)?,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(SimOutput {
        result,
        trajectories,
    })
}

fn fmt_num(x: f64) -> String {
    match number(x) {
        Value::String(s) => s,
        v => v.to_string(),
    }
}

pub fn write_trajectories(
    model: &Model,
    out: &SimOutput,
    quality: bool,
    path: &Path,
) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record([
        "episode",
        "t",
        "type",
        "theta",
        "omega",
        "m",
        "a",
        "b",
        "y",
        "x",
        "z",
        "pi_before",
        "pi_after",
        "log_lr",
        "xi_m",
        "nu",
        "bad",
        "stage_payoff",
    ])?;
    let g = &model.game;
    let q = model.quality.as_ref().map(|(q, _)| q);
    let z_labels = model.signals.z().map(|z| z.labels.clone());
    for (episode, tr) in &out.trajectories {
        let kind = if tr.honest { "honest" } else { "opportunistic" };
        for r in &tr.periods {
            let (theta, omega, m, a) = match (quality, q) {
                (true, Some(q)) => (
                    String::new(),
                    String::new(),
                    q.x_labels()[r.m].clone(),
                    q.a_labels()[r.a].clone(),
                ),
                _ => (
                    g.theta_labels()[r.theta].clone(),
                    set_label(g.a_labels(), ActionSet::from_mask(r.omega)),
                    g.a_labels()[r.m].clone(),
                    g.a_labels()[r.a].clone(),
                ),
            };
            let b = match (quality, q) {
                (true, Some(q)) => q.b_labels()[r.b].clone(),
                _ => g.b_labels()[r.b].clone(),
            };
            let y = if quality {
                r.y.to_string()
            } else {
                model.signals.y_labels()[r.y].clone()
            };
            let x = match (r.x, q) {
                (Some(x), Some(q)) => q.x_labels()[x].clone(),
                _ => String::new(),
            };
            let z = match (r.z, &z_labels) {
                (Some(z), Some(l)) => l[z].clone(),
                _ => String::new(),
            };
            w.write_record([
                episode.to_string(),
                r.t.to_string(),
                kind.to_string(),
                theta,
                omega,
                m,
                a,
                b,
                y,
                x,
                z,
                fmt_num(r.pi_before),
                fmt_num(r.pi_after),
                fmt_num(r.log_lr),
                fmt_num(r.xi_m),
                u8::from(r.nu).to_string(),
                u8::from(r.bad).to_string(),
                fmt_num(r.stage_payoff),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Section {
    name: &'static str,
    passed: bool,
    checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    details: Option<Value>,
}

fn skipped(name: &'static str, reason: String) -> Section {
    Section {
        name,
        passed: true,
        checks: vec![Check {
            name: name.to_string(),
            status: Status::Skipped(reason),
            measured: None,
            bound: None,
            tolerance: None,
            sample_size: None,
            witness: None,
        }],
        details: None,
    }
}

fn section(name: &'static str, rep: VerificationReport, details: Option<Value>) -> Section {
    Section {
        name,
        passed: rep.passed(),
        checks: rep.checks,
        details,
    }
}

fn nash_section(model: &Model, delta: f64) -> Result<Section> {
    let g = &model.game;
    let p = model.env.p_theta().to_vec();
    let built = (|| {
        let nc = solve_aux_no_comm(g, &p)?;
        let rec = solve_aux_recommendation(g, &p)?;
        let w = solve_v1_prime(g, &p, nc.v1_min, rec.v_hat_1, V1PrimeOptions::default())?;
        let prof = theorem2_profile(g, &p, &w, &Punishment::worst(&nc, &rec))?;
        Ok::<_, honrep::Error>((w, prof))
    })();
    let (w, prof) = match built {
        Ok(x) => x,
        Err(e @ (honrep::Error::NoEquilibriumValue(_) | honrep::Error::Construction(_))) => {
            return Ok(skipped(
                "low_payoff_profile",
                format!("profile not constructed: {e}"),
            ))
        }
        Err(e) => return Err(e.into()),
    };
    // the construction assumes every action is always feasible
    let full = Environment64::always_full(&p, g.n_a())?;
    let signals = honrep::SignalStructure64::keep_word(g.n_a());
    let nash = verify_nash_profile(&prof, g, &full, &signals, NashOptions::new(delta))?;
    let mut rep = nash.report;
    let diff = (nash.on_path_value_honest - w.objective).abs();
    rep.checks.push(Check {
        name: "on_path_value".into(),
        status: if diff <= 1e-9 {
            Status::Pass
        } else {
            Status::Fail
        },
        measured: Some(nash.on_path_value_honest),
        bound: Some(w.objective),
        tolerance: Some(1e-9),
        sample_size: None,
        witness: None,
    });
    let details = json!({
        "delta": number(delta),
        "v1_prime": number(w.objective),
        "min_delta_on_grid": nash.min_delta_on_grid.map(number),
        "states_explored": nash.states_explored,
    });
    Ok(section("low_payoff_profile", rep, Some(details)))
}

pub fn verify(model: &Model, ov: &Overrides) -> Result<Value> {
    let base = sim_config(
        model,
        &Overrides {
            variant: Some("baseline".into()),
            ..ov.clone()
        },
    )?;
    let bounds = bounds(model, ov)?;
    let mut sections = vec![nash_section(model, base.delta)?];

    if bounds.assumptions_hold {
        let sim = simulate(model, &base, 0)?.result;
        let rep = check_theorem1_bound(&sim, &bounds)?;
        let details = json!({"payoff": to_value(&sim.payoff)?, "bad_periods": to_value(&sim.bad_periods)?,
            "bound": bounds.bound_3_6.map(number), "t_bar": bounds.t_bar});
        sections.push(section("payoff_bound", rep, Some(details)));
    } else {
        sections.push(skipped(
            "payoff_bound",
            "assumption failed: feasibility or signal assumptions do not hold".into(),
        ));
    }

    if model.signals.z().is_some() {
        let cfg = sim_config(
            model,
            &Overrides {
                variant: Some("bounded_memory_z".into()),
                ..ov.clone()
            },
        )?;
        let sim = simulate(model, &cfg, 0)?.result;
        sections.push(section(
            "bounded_memory",
            check_corollary1(&sim, &bounds),
            None,
        ));
    }

    match &model.quality {
        Some((q, _)) if q.has_full_support() => {
            let cfg = sim_config(
                model,
                &Overrides {
                    variant: Some("quality".into()),
                    ..ov.clone()
                },
            )?;
            let sim = simulate(model, &cfg, 0)?.result;
            let out = check_corollary2(&sim, q, 0.05, None)?;
            sections.push(section("quality_bound", out.report, None));
        }
        Some(_) => sections.push(skipped(
            "quality_bound",
            "quality signals lack full support".into(),
        )),
        None => {}
    }

    if let (Some(eta), Some(c3)) = (
        model.doc.sim.eta.filter(|&e| e > 0.0),
        &model.doc.bound.corollary3,
    ) {
        let mut cfg = sim_config(
            model,
            &Overrides {
                variant: Some("preannounce".into()),
                ..ov.clone()
            },
        )?;
        debug_assert_eq!(cfg.eta, eta);
        cfg.player_type = PlayerType::Honest;
        let pl = players(model, &cfg)?;
        let traces = preannounce_traces(&cfg, &model.game, &model.env, &model.signals, &pl)?;
        let rho = 1.0 - model.env.flexibility();
        let constants = corollary3_constants(rho, c3.eta, c3.xi)
            .map_err(|e| input_error(format!("bound: {e}")))?;
        let rep = check_appendix_e(&traces, &constants, AppendixEOptions::new(cfg.delta))?;
        sections.push(section(
            "blind_announcements",
            rep,
            Some(to_value(&constants)?),
        ));
    }

    let passed = sections.iter().all(|s| s.passed);
    Ok(json!({
        "passed": passed,
        "sections": to_value(&sections)?,
    }))
}
