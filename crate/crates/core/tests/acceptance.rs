//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use regex::Regex;

use explore_core::agent::{
    format_response, parse_response, run_agent_episode, AgentSettings, FactorClaim, OracleBackend,
};
use explore_core::env::{
    build_universe, policy_rng, EpisodeState, Factor, FactorValue, Object, Observation, RewardRule,
    RuleKind, TaskConfig, CONSTRUCTION_LAB,
};
use explore_core::harness::{replay_verify, run_sweep, SweepSpec};
use explore_core::hypothesis::{steps_to_sufficiency, HypothesisSet, HypothesisSpace};
use explore_core::metrics::{ancova, mean_sem, score_answer, MeanSem};
use explore_core::policy::{best_untried, optimal_decide, run_policy_episode, Baseline};
use explore_core::trajectory::Termination;

const EIG_TOL: f64 = 1e-12;
const EXHAUSTIVE_TIES_UP_TO: usize = 18;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2} s", d.as_secs_f64())
}

fn episode_means(policy: Baseline, config: &TaskConfig, episodes: u64) -> MeanSem {
    let steps: Vec<f64> = (0..episodes)
        .into_par_iter()
        .map(|seed| {
            run_policy_episode(&mut policy.clone(), config, seed)
                .sufficiency
                .steps as f64
        })
        .collect();
    mean_sem(&steps).expect("episodes > 0")
}

fn anchor(policy: Baseline, target: f64, tol: f64) -> Outcome {
    let config = TaskConfig::preset(CONSTRUCTION_LAB).unwrap();
    let started = Instant::now();
    let m = episode_means(policy, &config, 1000);
    let elapsed = started.elapsed();
    let pass = (m.mean - target).abs() <= tol && elapsed < Duration::from_secs(10);
    outcome(
        pass,
        format!(
            "mean {:.3} ± {:.3} over 1000 episodes (target {target} ± {tol}), {}",
            m.mean,
            m.sem,
            secs(elapsed)
        ),
    )
}

fn ordering() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut failures = Vec::new();
    let mut configs = 0;
    for kind in [RuleKind::SingleFeature, RuleKind::Conjunction] {
        for colors in 3..=8 {
            let config = TaskConfig::with_counts(kind, colors, 3, 3, 0).unwrap();
            let opt = episode_means(Baseline::Optimal, &config, 1000);
            let without = episode_means(Baseline::RandomWithout, &config, 1000);
            let with = episode_means(Baseline::RandomWith, &config, 1000);
            configs += 1;
            for (lo, hi, label) in [
                (opt, without, "optimal < random_without"),
                (without, with, "random_without < random_with"),
            ] {
                let gap = hi.mean - lo.mean;
                let bound = 3.0 * (lo.sem.powi(2) + hi.sem.powi(2)).sqrt();
                worst = worst.min(gap / bound);
                if gap <= bound {
                    failures.push(format!(
                        "{kind} {colors} colors: {label} gap {gap:.3} <= {bound:.3}"
                    ));
                }
            }
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{configs} configs, smallest gap {worst:.1} x the 3-SEM bound")
        } else {
            failures.join("; ")
        },
    )
}

// Independent brute-force model of the rule space: rules are lists of
// (factor index, value index), objects are value-index tuples.

type ORule = Vec<(usize, usize)>;

struct Brute {
    rules: Vec<ORule>,
    objects: Vec<[usize; 3]>,
    labels: Vec<Vec<bool>>,
}

impl Brute {
    fn new(kind: RuleKind, sizes: [usize; 3]) -> Self {
        let mut rules = Vec::new();
        let pairs: &[(usize, usize)] = match kind {
            RuleKind::SingleFeature => &[],
            RuleKind::Conjunction => &[(0, 1), (0, 2), (1, 2)],
        };
        if kind == RuleKind::SingleFeature {
            for (f, &size) in sizes.iter().enumerate().take(2) {
                for v in 0..size {
                    rules.push(vec![(f, v)]);
                }
            }
        }
        for &(a, b) in pairs {
            for va in 0..sizes[a] {
                for vb in 0..sizes[b] {
                    rules.push(vec![(a, va), (b, vb)]);
                }
            }
        }
        let t = if kind == RuleKind::SingleFeature {
            1
        } else {
            sizes[2]
        };
        let mut objects = Vec::new();
        for c in 0..sizes[0] {
            for s in 0..sizes[1] {
                for x in 0..t {
                    objects.push([c, s, x]);
                }
            }
        }
        let labels = rules
            .iter()
            .map(|r| objects.iter().map(|o| Brute::reward(r, o)).collect())
            .collect();
        Brute {
            rules,
            objects,
            labels,
        }
    }

    fn reward(rule: &ORule, obj: &[usize; 3]) -> bool {
        rule.iter().all(|&(f, v)| obj[f] == v)
    }

    fn filter(&self, alive: &[usize], obj: usize, reward: bool) -> Vec<usize> {
        alive
            .iter()
            .copied()
            .filter(|&r| self.labels[r][obj] == reward)
            .collect()
    }

    fn entropy(n: usize) -> f64 {
        (n as f64).log2()
    }

    fn eig(&self, alive: &[usize], obj: usize) -> f64 {
        let n = alive.len() as f64;
        let pos = alive.iter().filter(|&&r| self.labels[r][obj]).count();
        let neg = alive.len() - pos;
        let mut expected = 0.0;
        for k in [pos, neg] {
            if k > 0 {
                expected += k as f64 / n * Brute::entropy(k);
            }
        }
        Brute::entropy(alive.len()) - expected
    }

    fn sufficient(&self, alive: &[usize]) -> bool {
        alive
            .windows(2)
            .all(|w| self.labels[w[0]] == self.labels[w[1]])
    }
}

fn factor_index(f: Factor) -> usize {
    match f {
        Factor::Color => 0,
        Factor::Shape => 1,
        Factor::Texture => 2,
    }
}

fn to_orule(config: &TaskConfig, rule: &RewardRule) -> ORule {
    let mut out: ORule = rule
        .parts()
        .iter()
        .map(|fv| {
            let f = factor_index(fv.factor);
            let v = config
                .vocab(fv.factor)
                .iter()
                .position(|l| *l == fv.value)
                .unwrap();
            (f, v)
        })
        .collect();
    out.sort();
    out
}

fn to_oobject(config: &TaskConfig, obj: &Object) -> [usize; 3] {
    let mut out = [0; 3];
    for (f, label) in &obj.values {
        out[factor_index(*f)] = config.vocab(*f).iter().position(|l| l == label).unwrap();
    }
    out
}

struct Instance {
    config: TaskConfig,
    brute: Brute,
    /// brute object index for each crate object id
    object_map: Vec<usize>,
    /// brute rule index for each crate rule index
    rule_map: Vec<usize>,
    space: Arc<HypothesisSpace>,
}

impl Instance {
    fn new(kind: RuleKind, c: usize, s: usize, t: usize) -> Self {
        let config = TaskConfig::with_counts(kind, c, s, t, 0).unwrap();
        let brute = Brute::new(kind, [c, s, t]);
        let space = Arc::new(HypothesisSpace::new(&config));
        let object_map = space
            .universe()
            .iter()
            .map(|o| {
                let key = to_oobject(&config, o);
                brute.objects.iter().position(|b| *b == key).unwrap()
            })
            .collect();
        let rule_map = space
            .rules()
            .iter()
            .map(|r| {
                let key = to_orule(&config, r);
                brute.rules.iter().position(|b| *b == key).unwrap()
            })
            .collect();
        Instance {
            config,
            brute,
            object_map,
            rule_map,
            space,
        }
    }

    fn alive_of(&self, set: &HypothesisSet) -> Vec<usize> {
        let mut v: Vec<usize> = set
            .alive_indices()
            .iter()
            .map(|&i| self.rule_map[i])
            .collect();
        v.sort();
        v
    }

    fn all_instances() -> Vec<Instance> {
        let mut out = Vec::new();
        for c in 1..=3 {
            for s in 1..=3 {
                out.push(Instance::new(RuleKind::SingleFeature, c, s, 0));
                for t in 1..=3 {
                    out.push(Instance::new(RuleKind::Conjunction, c, s, t));
                }
            }
        }
        out
    }
}

fn check_state(inst: &Instance, set: &HypothesisSet, alive: &[usize]) -> Result<(), String> {
    if inst.alive_of(set) != alive {
        return Err("alive sets differ".into());
    }
    let h = set.entropy().map_err(|e| e.to_string())?;
    if (h - Brute::entropy(alive.len())).abs() > EIG_TOL {
        return Err(format!("entropy {h} vs {}", Brute::entropy(alive.len())));
    }
    for obj in inst.space.universe() {
        let got = set.expected_info_gain(obj);
        let want = inst.brute.eig(alive, inst.object_map[obj.id]);
        if (got - want).abs() > EIG_TOL {
            return Err(format!("EIG of {} {got} vs {want}", obj.description()));
        }
    }
    if set.is_sufficient() != inst.brute.sufficient(alive) {
        return Err("sufficiency differs".into());
    }
    Ok(())
}

fn hypothesis_equivalence() -> Outcome {
    let started = Instant::now();
    let instances = Instance::all_instances();
    let results: Vec<Result<(usize, usize), String>> = instances
        .par_iter()
        .map(|inst| {
            let full: Vec<usize> = (0..inst.brute.rules.len()).collect();
            let mut seen: HashSet<Vec<usize>> = HashSet::new();
            let mut queue = VecDeque::new();
            seen.insert(full.clone());
            queue.push_back((full, HypothesisSet::full(inst.space.clone())));
            let mut states = 0;
            while let Some((alive, set)) = queue.pop_front() {
                states += 1;
                check_state(inst, &set, &alive)
                    .map_err(|e| format!("{:?}: {e}", inst.config.rule_kind))?;
                for obj in inst.space.universe() {
                    for reward in [0u8, 1] {
                        let next = inst
                            .brute
                            .filter(&alive, inst.object_map[obj.id], reward == 1);
                        let obs = Observation {
                            object_id: obj.id,
                            reward,
                            step_index: 1,
                        };
                        if next.is_empty() {
                            if set.filter_consistent(&obs, obj).is_ok() {
                                return Err("empty filter not reported".into());
                            }
                        } else if !seen.contains(&next) {
                            let f = set
                                .filter_consistent(&obs, obj)
                                .map_err(|e| e.to_string())?;
                            seen.insert(next.clone());
                            queue.push_back((next, f));
                        }
                    }
                }
            }
            // steps-to-sufficiency along shuffled pick orders for every hidden rule
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let mut sequences = 0;
            for (ri, rule) in inst.space.rules().iter().enumerate() {
                let brute_rule = inst.rule_map[ri];
                for _ in 0..5 {
                    let mut order: Vec<usize> = (0..inst.space.universe().len()).collect();
                    order.shuffle(&mut rng);
                    let observations: Vec<Observation> = order
                        .iter()
                        .enumerate()
                        .map(|(i, &id)| Observation {
                            object_id: id,
                            reward: u8::from(inst.brute.labels[brute_rule][inst.object_map[id]]),
                            step_index: i + 1,
                        })
                        .collect();
                    let mut alive: Vec<usize> = (0..inst.brute.rules.len()).collect();
                    let mut want = None;
                    for (t, o) in observations.iter().enumerate() {
                        alive =
                            inst.brute
                                .filter(&alive, inst.object_map[o.object_id], o.reward == 1);
                        if inst.brute.sufficient(&alive) {
                            want = Some(t + 1);
                            break;
                        }
                    }
                    let got = steps_to_sufficiency(&observations, &inst.config)
                        .map_err(|e| e.to_string())?;
                    if Some(got.steps) != want || got.censored {
                        return Err(format!(
                            "steps_to_sufficiency {got:?} vs {want:?} for {rule}"
                        ));
                    }
                    sequences += 1;
                }
            }
            Ok((states, sequences))
        })
        .collect();
    let elapsed = started.elapsed();
    let mut states = 0;
    let mut sequences = 0;
    for r in results {
        match r {
            Ok((s, q)) => {
                states += s;
                sequences += q;
            }
            Err(e) => return outcome(false, e),
        }
    }
    outcome(
        elapsed < Duration::from_secs(60),
        format!(
            "{} instances, {states} reachable alive sets, {sequences} sufficiency sequences, {}",
            instances.len(),
            secs(elapsed)
        ),
    )
}

/// Walks every information state (picks and their rewards) reachable under
/// greedy play, branching on every tied choice and every possible reward, and
/// checks the greedy choice against the exhaustive maximum.
fn greedy_is_lookahead() -> Outcome {
    let started = Instant::now();
    let instances = Instance::all_instances();
    let results: Vec<Result<usize, String>> = instances
        .par_iter()
        .map(|inst| {
            let n = inst.space.universe().len();
            let mut checked = 0;
            let mut seen: HashSet<Vec<u8>> = HashSet::new();
            let mut stack: Vec<(Vec<usize>, HypothesisSet)> =
                vec![(Vec::new(), HypothesisSet::full(inst.space.clone()))];
            while let Some((picks, set)) = stack.pop() {
                let alive = inst.alive_of(&set);
                let brute_rule = alive[0];
                let crate_rule = inst.rule_map.iter().position(|&r| r == brute_rule).unwrap();
                let mut state =
                    EpisodeState::with_rule(&inst.config, inst.space.rules()[crate_rule].clone())
                        .map_err(|e| e.to_string())?;
                for &id in &picks {
                    state.step(id).map_err(|e| e.to_string())?;
                }
                let mut key = vec![0u8; n];
                for o in state.history() {
                    key[o.object_id] = 1 + o.reward;
                }
                if !seen.insert(key) {
                    continue;
                }
                checked += 1;
                let mut rng = policy_rng(checked as u64);
                let decision = optimal_decide(&state, &set, &mut rng).map_err(|e| e.to_string())?;
                if inst.brute.sufficient(&alive) && !picks.is_empty() {
                    if !decision.stop {
                        return Err("did not stop at a sufficient state".into());
                    }
                    continue;
                }
                let untried = state.untried();
                if untried.is_empty() {
                    continue;
                }
                let gains: Vec<(usize, f64)> = untried
                    .iter()
                    .map(|&id| (id, inst.brute.eig(&alive, inst.object_map[id])))
                    .collect();
                let max = gains.iter().map(|g| g.1).fold(f64::NEG_INFINITY, f64::max);
                let argmax: BTreeSet<usize> = gains
                    .iter()
                    .filter(|g| max - g.1 <= EIG_TOL)
                    .map(|g| g.0)
                    .collect();
                let chosen = decision.object_id.ok_or("stopped early")?;
                if !argmax.contains(&chosen) {
                    return Err(format!("chose {chosen} outside the exhaustive argmax"));
                }
                let (ties, gain) = best_untried(&state, &set);
                if (gain - max).abs() > EIG_TOL
                    || ties.iter().copied().collect::<BTreeSet<_>>() != argmax
                {
                    return Err("tie set differs from exhaustive argmax".into());
                }
                // sampled tie branches on the largest instance
                let branches: Vec<usize> = if n > EXHAUSTIVE_TIES_UP_TO {
                    argmax
                        .iter()
                        .copied()
                        .collect::<Vec<_>>()
                        .choose_multiple(&mut rng, 2)
                        .copied()
                        .collect()
                } else {
                    argmax.iter().copied().collect()
                };
                for &id in &branches {
                    for reward in [0u8, 1] {
                        if inst
                            .brute
                            .filter(&alive, inst.object_map[id], reward == 1)
                            .is_empty()
                        {
                            continue;
                        }
                        let obs = Observation {
                            object_id: id,
                            reward,
                            step_index: picks.len() + 1,
                        };
                        let next_set = set.observe(&obs).map_err(|e| e.to_string())?;
                        let mut next = picks.clone();
                        next.push(id);
                        stack.push((next, next_set));
                    }
                }
            }
            Ok(checked)
        })
        .collect();
    let mut total = 0;
    for r in results {
        match r {
            Ok(n) => total += n,
            Err(e) => return outcome(false, e),
        }
    }
    outcome(
        true,
        format!(
            "{} instances, {total} greedy-reachable information states (all tie branches up to {EXHAUSTIVE_TIES_UP_TO} objects, two sampled above), {}",
            instances.len(),
            secs(started.elapsed())
        ),
    )
}

fn reference_score(answer: &str, target: &str) -> u8 {
    let word = Regex::new(r"[A-Za-z0-9]+").unwrap();
    let tokens: HashSet<String> = word
        .find_iter(answer)
        .map(|m| m.as_str().to_lowercase())
        .collect();
    let hit = word
        .find_iter(target)
        .all(|m| tokens.contains(&m.as_str().to_lowercase()));
    u8::from(hit)
}

fn scoring() -> Outcome {
    let example = RewardRule::conjunction(
        FactorValue::new(Factor::Color, "Blue"),
        FactorValue::new(Factor::Shape, "Cylinder"),
    );
    let example_score = score_answer(
        "* **WINNING COMBINATION:** COLOR, SHAPE (Blue, Cylinder)",
        &example,
    );

    let single = TaskConfig::with_counts(RuleKind::SingleFeature, 3, 3, 0, 0).unwrap();
    let conj = TaskConfig::with_counts(RuleKind::Conjunction, 3, 3, 3, 0).unwrap();
    let rules: Vec<RewardRule> = HypothesisSpace::new(&single)
        .rules()
        .iter()
        .chain(HypothesisSpace::new(&conj).rules())
        .cloned()
        .collect();
    let mut failures = Vec::new();
    let mut positives = 0;
    for i in 0..50 {
        let rule = &rules[(i * 7) % rules.len()];
        let other = &rules[(i * 7 + 5) % rules.len()];
        let words: Vec<String> = rule.parts().iter().map(|p| p.value.clone()).collect();
        let answer = match i % 10 {
            0 => rule.target_string().to_uppercase(),
            1 => format!(
                "* **WINNING COMBINATION:** COLOR, SHAPE ({})",
                words.join(", ")
            ),
            2 => words[0].clone(),
            3 => words.concat(),
            4 => words.iter().rev().cloned().collect::<Vec<_>>().join("/"),
            5 => format!("<{}>", rule.target_string()),
            6 => other.target_string(),
            7 => words
                .iter()
                .map(|w| format!("{w}ish"))
                .collect::<Vec<_>>()
                .join(" "),
            8 => String::new(),
            _ => format!("I think **{}**.", words.join("**-**")),
        };
        let got = score_answer(&answer, rule);
        let want = reference_score(&answer, &rule.target_string());
        positives += usize::from(want);
        if got != want {
            failures.push(format!(
                "{answer:?} vs {}: {got} != {want}",
                rule.target_string()
            ));
        }
    }
    let pass = example_score == 1 && failures.is_empty() && positives > 0 && positives < 50;
    outcome(
        pass,
        if failures.is_empty() {
            format!("worked example scores {example_score}; 50 derived cases agree ({positives} positive)")
        } else {
            failures.join("; ")
        },
    )
}

fn parser_round_trip() -> Outcome {
    let mut failures = 0;
    let mut parsed = 0;
    let mut transcripts = 0;
    let configs = [
        TaskConfig::with_counts(RuleKind::SingleFeature, 2, 2, 0, 0).unwrap(),
        TaskConfig::with_counts(RuleKind::SingleFeature, 3, 3, 0, 0).unwrap(),
    ];
    for config in &configs {
        let universe = build_universe(config);
        let claims = [FactorClaim::Unsure, FactorClaim::Color, FactorClaim::Shape];
        for obj in &universe {
            for stop in [false, true] {
                for claim in claims {
                    let text = format_response(
                        config.rule_kind,
                        Some(obj),
                        stop,
                        claim,
                        "unknown",
                        "reasoning",
                    );
                    parsed += 1;
                    match parse_response(&text, config, &universe) {
                        Ok(p)
                            if p.resolved_object == Some(obj.id)
                                && p.stop == stop
                                && p.factor_claim == claim => {}
                        _ => failures += 1,
                    }
                }
            }
        }
        let text = format_response(
            config.rule_kind,
            None,
            true,
            FactorClaim::Color,
            "red",
            "done",
        );
        parsed += 1;
        match parse_response(&text, config, &universe) {
            Ok(p) if p.stop && p.resolved_object.is_none() => {}
            _ => failures += 1,
        }

        // live transcripts: the oracle agent must retrace the optimal policy for every hidden rule
        let n_rules = HypothesisSpace::new(config).rules().len();
        let mut rules_seen = HashMap::new();
        for seed in 0..200 {
            let expected = run_policy_episode(&mut Baseline::Optimal, config, seed);
            let oracle = OracleBackend::new(&config.with_seed(seed));
            let got = run_agent_episode(&oracle, &AgentSettings::default(), config, seed);
            transcripts += 1;
            *rules_seen.entry(got.hidden_rule.to_string()).or_insert(0) += 1;
            let same_objects = got
                .steps
                .iter()
                .map(|s| s.object_id)
                .eq(expected.steps.iter().map(|s| s.object_id));
            let stopped = got.termination == Termination::Stopped
                && got.stop_response.as_ref().is_some_and(|t| t.stop)
                && got
                    .steps
                    .iter()
                    .all(|s| s.agent.as_ref().is_some_and(|a| !a.stop && a.attempts == 1));
            if !same_objects || !stopped || got.failure.is_some() {
                failures += 1;
            }
        }
        if rules_seen.len() != n_rules {
            return outcome(
                false,
                format!("only {} of {n_rules} rules covered", rules_seen.len()),
            );
        }
    }
    outcome(
        failures == 0,
        format!(
            "{parsed} formatted replies and {transcripts} oracle transcripts, {failures} failures"
        ),
    )
}

fn ancova_correctness() -> Outcome {
    // statsmodels anova_lm(ols('y ~ x'), ols('y ~ x + C(g)')) on a pretest/posttest design
    let pre = [
        3.0, 5.0, 2.0, 6.0, 4.0, 7.0, 3.0, 5.0, 4.0, 6.0, 3.0, 7.0, 5.0, 2.0, 6.0, 4.0, 5.0, 3.0,
        6.0, 4.0, 7.0, 5.0, 2.0, 6.0,
    ];
    let post = [
        6.0, 8.0, 5.0, 9.0, 7.0, 10.0, 6.0, 9.0, 8.0, 10.0, 7.0, 12.0, 9.0, 6.0, 11.0, 8.0, 10.0,
        8.0, 12.0, 9.0, 13.0, 11.0, 7.0, 12.0,
    ];
    let groups: Vec<&str> = ["a", "b", "c"].iter().flat_map(|g| [*g; 8]).collect();
    let (f_ref, p_ref) = (73.58624999523684, 6.006916357859355e-10);
    let r = ancova(&post, &pre, &groups).unwrap();
    let f_ok = ((r.f - f_ref) / f_ref).abs() <= 1e-6;
    let p_ok = (r.p - p_ref).abs() <= 1e-6;

    let y = [3.0, 5.0, 4.0, 6.0, 2.0, 3.0, 5.0, 4.0, 6.0, 2.0];
    let x = [1.0, 3.0, 2.0, 4.0, 0.5, 1.0, 3.0, 2.0, 4.0, 0.5];
    let g = ["p", "p", "p", "p", "p", "q", "q", "q", "q", "q"];
    let same = ancova(&y, &x, &g).unwrap();
    outcome(
        f_ok && p_ok && same.p > 0.99 && (r.df1, r.df2) == (2, 20),
        format!(
            "F({}, {}) = {:.9} (ref {f_ref:.9}), p = {:.6e} (ref {p_ref:.6e}); identical groups p = {:.6}",
            r.df1, r.df2, r.f, r.p, same.p
        ),
    )
}

fn replay_integrity() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let spec = SweepSpec::from_toml_str(
        r#"
jobs = 4

[backend]
kind = "oracle"

[[condition]]
name = "optimal"
policy = "optimal"
preset = "construction-lab"
episodes = 50

[[condition]]
name = "random-with"
policy = "random_with"
preset = "construction-lab"
budget = 4
episodes = 50

[[condition]]
name = "random-without-conj"
policy = "random_without"
rule_kind = "conjunction"
colors = 4
shapes = 3
textures = 2
episodes = 50

[[condition]]
name = "agent-long-context"
policy = "llm:long_context"
rule_kind = "conjunction"
colors = 3
shapes = 3
textures = 3
episodes = 10
"#,
    )
    .unwrap();
    run_sweep(&spec, dir.path()).unwrap();
    let clean = replay_verify(dir.path()).unwrap();

    let path = dir.path().join("random-without-conj.jsonl");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut value: serde_json::Value = serde_json::from_str(&lines[3]).unwrap();
    let reward = value["steps"][0]["reward"].as_u64().unwrap();
    value["steps"][0]["reward"] = serde_json::json!(1 - reward);
    lines[3] = serde_json::to_string(&value).unwrap();
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    let corrupted = replay_verify(dir.path()).unwrap();

    let pass = clean.is_clean()
        && clean.trajectories == 160
        && corrupted.errors.is_empty()
        && corrupted.mismatches.len() == 1
        && corrupted.mismatches[0].field == "reward";
    outcome(
        pass,
        format!(
            "fresh run: {} trajectories, {} mismatches; one flipped reward: {} mismatch(es)",
            clean.trajectories,
            clean.mismatches.len(),
            corrupted.mismatches.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        ("optimal-baseline efficiency anchor", || {
            anchor(Baseline::Optimal, 2.0, 0.5)
        }),
        ("random-with-replacement anchor", || {
            anchor(Baseline::RandomWith, 4.0, 0.75)
        }),
        ("ordering optimal <= random w/o <= random w/", ordering),
        (
            "hypothesis engine matches brute force",
            hypothesis_equivalence,
        ),
        ("greedy choice equals exhaustive max", greedy_is_lookahead),
        ("answer scoring", scoring),
        ("parser round trip", parser_round_trip),
        ("ANCOVA correctness", ancova_correctness),
        ("replay integrity", replay_integrity),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        failed += usize::from(!o.pass);
        println!(
            "[{}] {}. {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
