use std::collections::BTreeMap;
use std::io::Write;

use anyhow::{anyhow, bail, Result};
use prrr_core::analysis::collusion::{check_coalition_equivalence, check_pub_val_collusion, check_sybil_proofness};
use prrr_core::analysis::impossibility::{impossibility_demo, Baseline, DemoOutcome};
use prrr_core::analysis::spne::{verify_spne, DeviationResult, Verdict};
use prrr_core::analysis::{run_stability, ActionGrid};
use prrr_core::game::{self, GameConfig, StrategyProfile};
use prrr_core::protocol::{process_block, LedgerCase, RewardLedger};
use prrr_core::rvalue::{FixedValues, PropertyCheckConfig};
use prrr_core::types::{Block, Inclusion, PublisherId, Report, ReportId, ReportMinter, Slot};
use prrr_core::{vrf, ValidatorKeys};
use serde::Serialize;
use serde_json::json;

use crate::config::{self, FileConfig};
use crate::output::{Output, SUMMARY_HEADER};
use crate::{Cli, Command};

struct Globals {
    seed: u64,
    trials: Option<u64>,
}

impl Globals {
    /// Flag, then config file, then the command default.
    fn trials(&self, file: &FileConfig, default: u64) -> Result<u64> {
        let t = self.trials.or(file.trials).unwrap_or(default);
        if t == 0 {
            bail!("--trials must be >= 1");
        }
        Ok(t)
    }

    /// The flag (or PRRR_SEED) wins over the config file.
    fn seed(&self, explicit: bool, file: &FileConfig) -> u64 {
        if explicit {
            self.seed
        } else {
            file.seed.unwrap_or(self.seed)
        }
    }
}

/// Runs one command. `Ok(true)` when the outcome matches the claim.
pub fn run(cli: Cli) -> Result<bool> {
    let out = Output::new(cli.out, cli.json)?;
    let g = Globals { seed: cli.seed.unwrap_or(0), trials: cli.trials };
    let explicit = cli.seed.is_some();
    match cli.command {
        Command::Table1 { corrupt } => table1(&out, corrupt),
        Command::CheckRv { spec, nmax, mc } => {
            let spec = config::build_spec(&spec, &FileConfig::default())?;
            check_rv(&out, spec, nmax, mc, g.seed)
        }
        Command::Simulate { spec, instance, strategies, validator, trace } => {
            let file = config::load_file(&instance)?;
            let seed = g.seed(explicit, &file);
            let cfg = config::build_game(config::build_spec(&spec, &file)?, &instance, &file, seed)?;
            let (profile, chosen) = config::build_profile(&cfg, &strategies, validator.as_deref(), &file)?;
            simulate(&out, &cfg, &profile, &chosen, g.trials(&file, 10_000)?, seed, trace)
        }
        Command::Spne { spec, instance, epsilon, delta } => {
            let file = config::load_file(&instance)?;
            let seed = g.seed(explicit, &file);
            let cfg = config::build_game(config::build_spec(&spec, &file)?, &instance, &file, seed)?;
            let grid = ActionGrid::pivotal(delta);
            grid.validate()?;
            spne(&out, &cfg, &grid, epsilon, g.trials(&file, 20_000)?, seed)
        }
        Command::Collusion { spec, instance, members } => {
            let file = config::load_file(&instance)?;
            let seed = g.seed(explicit, &file);
            let cfg = config::build_game(config::build_spec(&spec, &file)?, &instance, &file, seed)?;
            let members = match members {
                Some(m) => m.into_iter().map(PublisherId).collect(),
                None => cfg.roster.clone(),
            };
            collusion(&out, &cfg, &members, g.trials(&file, 10_000)?, seed)
        }
        Command::Sybil { spec, instance, publisher, split, epsilon } => {
            let file = config::load_file(&instance)?;
            let seed = g.seed(explicit, &file);
            let spec = config::build_spec(&spec, &file)?;
            let sizes = parse_split(&split)?;
            let mut counts =
                instance.publishers.clone().or_else(|| file.publishers.clone()).unwrap_or_else(|| vec![2, 2]);
            let j = publisher as usize;
            if j >= counts.len() {
                bail!("no publisher P{publisher} in an instance with {} publishers", counts.len());
            }
            counts[j] = sizes.iter().sum();
            let cfg = config::build_game_with(spec, &instance, &file, &counts, seed)?;
            sybil(&out, &cfg, PublisherId(publisher), &sizes, epsilon, g.trials(&file, 10_000)?, seed)
        }
        Command::Stability { spec, instance } => {
            let file = config::load_file(&instance)?;
            let seed = g.seed(explicit, &file);
            let cfg = config::build_game(config::build_spec(&spec, &file)?, &instance, &file, seed)?;
            stability(&out, &cfg, g.trials(&file, 5_000)?, seed)
        }
        Command::Impossibility { n, rfix, v, strings, capacity } => {
            impossibility(&out, n, Baseline { r_fix: rfix, v, capacity }, strings, g.seed)
        }
    }
}

fn parse_split(text: &str) -> Result<Vec<u32>> {
    let sizes: Vec<u32> = text
        .split('+')
        .map(|s| s.trim().parse::<u32>().map_err(|_| anyhow!("--split expects sizes like 2+2, got {text:?}")))
        .collect::<Result<_>>()?;
    if sizes.len() < 2 || sizes.contains(&0) {
        bail!("--split needs at least two non-empty parts, got {text:?}");
    }
    Ok(sizes)
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

#[derive(Serialize)]
struct TableRow {
    vector: &'static str,
    case: LedgerCase,
    validator: f64,
    winner: PublisherId,
    winner_reward: f64,
    payout: f64,
    r1: f64,
    conserved: bool,
    expected: (LedgerCase, f64, f64),
    matches: bool,
}

type Case<'a> = (&'static str, Vec<&'a Report>, LedgerCase, f64, PublisherId, f64);

fn table1(out: &Output, corrupt: bool) -> Result<bool> {
    let mut m = ReportMinter::new();
    let a = m.mint_seeded(PublisherId(0), 1);
    let b = m.mint_seeded(PublisherId(1), 1);
    let c = m.mint_seeded(PublisherId(2), 1);
    let values = FixedValues::new(2.0).with(a.id(), 10.0).with(b.id(), 8.0).with(c.id(), 2.0);
    let keys = ValidatorKeys::derive(7, 1);
    let beacon = [9u8; 32];
    let s = vrf::generate(&beacon, &keys);
    // Vector label, reports, expected case, validator reward, winner and its reward.
    let cases: [Case; 5] = [
        ("(10,8)", vec![&a, &b], LedgerCase::Standard, 8.0, PublisherId(0), 2.0),
        ("(10)", vec![&a], LedgerCase::Succinct, 2.0, PublisherId(0), 8.0),
        ("(10,8,2)", vec![&a, &b, &c], LedgerCase::Deviation, 0.0, PublisherId(0), 8.0),
        ("(8,10)", vec![&b, &a], LedgerCase::Deviation, 0.0, PublisherId(1), 6.0),
        ("(10,r_min)", vec![&a, &c], LedgerCase::Deviation, 0.0, PublisherId(0), 8.0),
    ];
    let mut rows = Vec::new();
    for (k, (label, reports, case, v, w, r)) in cases.into_iter().enumerate() {
        let block = Block {
            index: 1,
            beacon,
            random_string: s.clone(),
            inclusions: reports.iter().map(|x| Inclusion::new((*x).clone(), 0.0)).collect(),
        };
        let mut l: RewardLedger = process_block(&block, keys.public(), &values);
        if corrupt && k == 0 {
            l.validator_reward += 1.0;
        }
        let r1 = values_of(&values, &block, &s);
        let payout = l.payout();
        let conserved = match l.case {
            LedgerCase::Standard | LedgerCase::Succinct => payout == r1,
            _ => payout <= r1,
        };
        let matches = l.case == case && l.validator_reward == v && l.publisher_reward(w) == r && conserved;
        rows.push(TableRow {
            vector: label,
            case: l.case,
            validator: l.validator_reward,
            winner: w,
            winner_reward: l.publisher_reward(w),
            payout,
            r1,
            conserved,
            expected: (case, v, r),
            matches,
        });
    }
    out.say(format!(
        "{:<12} {:<10} {:>9} {:>7} {:>7} {:>5}  conserved",
        "vector", "case", "validator", "winner", "payout", "r1"
    ));
    for r in &rows {
        out.say(format!(
            "{:<12} {:<10} {:>9} {:>7} {:>7} {:>5}  {}{}",
            r.vector,
            format!("{:?}", r.case).to_lowercase(),
            r.validator,
            r.winner_reward,
            r.payout,
            r.r1,
            r.conserved,
            if r.matches { "" } else { "  MISMATCH" }
        ));
    }
    let ok = rows.iter().all(|r| r.matches);
    out.say(if ok { "table matches" } else { "table mismatch" });
    out.report("table1.json", &rows)?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.vector.to_string(),
                format!("{:?}", r.case).to_lowercase(),
                fmt(r.validator),
                fmt(r.winner_reward),
                fmt(r.payout),
                fmt(r.r1),
                r.conserved.to_string(),
            ]
        })
        .collect();
    out.table("table1.csv", &["vector", "case", "validator", "winner", "payout", "r1", "conserved"], &csv_rows)?;
    Ok(ok)
}

fn values_of(values: &FixedValues, block: &Block, s: &prrr_core::RandomString) -> f64 {
    use prrr_core::rvalue::Valuation;
    block.slots().first().map_or(0.0, |slot: &Slot| values.value(slot, s))
}

fn check_rv(
    out: &Output,
    spec: prrr_core::rvalue::RandomValueSpec,
    nmax: u64,
    mc: Option<u64>,
    seed: u64,
) -> Result<bool> {
    let pc = PropertyCheckConfig { n_max: nmax, mc_trials: mc.unwrap_or(1), tolerance: 3.0, seed };
    pc.validate()?;
    let mono = spec.check_reward_monotonicity(&pc)?;
    let skip = spec.check_skipping_resistance(&pc)?;
    let mut rows = Vec::new();
    let mut curve = Vec::new();
    for n in 1..=nmax {
        let rallpub = spec.rallpub_closed_form(n)?;
        let cost = spec.expected_contract_cost(n)?;
        let mut row = vec![n.to_string(), fmt(rallpub), fmt(cost)];
        let mut point = json!({ "n": n, "rallpub": rallpub, "expected_contract_cost": cost });
        if let Some(t) = mc {
            let e = spec.monte_carlo(n, t, seed)?;
            row.extend([fmt(e.rallpub.mean), fmt(e.rallpub.std_err)]);
            point["rallpub_mc"] = json!(e.rallpub);
        }
        rows.push(row);
        curve.push(point);
    }
    let mut header = vec!["n", "rallpub", "expected_contract_cost"];
    if mc.is_some() {
        header.extend(["rallpub_mc", "rallpub_mc_se"]);
    }
    out.table("rv_curve.csv", &header, &rows)?;
    let ok = mono.holds && skip.holds;
    out.report(
        "check_rv.json",
        &json!({ "spec": spec, "n_max": nmax, "monotonicity": mono, "skipping_resistance": skip, "holds": ok, "curve": curve }),
    )?;
    out.say(format!("spec: {spec:?}"));
    out.say(match mono.witness {
        None => format!("reward monotonicity: holds for n <= {nmax}"),
        Some((a, b)) => format!("reward monotonicity: fails, RAllPub({b}) < RAllPub({a})"),
    });
    out.say(match skip.witness {
        None => format!("skipping resistance: holds for n <= {nmax}"),
        Some(n) => format!("skipping resistance: fails, RAllPub({n}) >= r_min"),
    });
    Ok(ok)
}

#[derive(Serialize)]
struct TraceLine<'a> {
    trial: u64,
    step: u64,
    validator: String,
    published: BTreeMap<PublisherId, Vec<ReportId>>,
    /// Bribe paid by each publisher on the vector that was included.
    bribes: &'a BTreeMap<PublisherId, f64>,
    inclusion: Vec<u64>,
    reformulated: &'a [u64],
    ledger: &'a RewardLedger,
}

fn simulate(
    out: &Output,
    cfg: &GameConfig,
    profile: &StrategyProfile,
    chosen: &BTreeMap<PublisherId, String>,
    trials: u64,
    seed: u64,
    trace: Option<u64>,
) -> Result<bool> {
    let sum = game::simulate(cfg, profile, trials, seed)?;
    let honest =
        if chosen.is_empty() { None } else { Some(game::simulate(cfg, &StrategyProfile::honest(cfg), trials, seed)?) };
    let instance = config::describe(cfg);
    let mut rows = Vec::new();
    out.say(format!("{instance}, {trials} trials, seed {seed}"));
    for (j, e) in &sum.publishers {
        let label = chosen.get(j).map_or("honest", String::as_str);
        let base = honest.as_ref().map(|h| h.publishers[j].mean);
        out.say(format!(
            "{j} [{label}]: E = {:.6} (se {:.6}){}",
            e.mean,
            e.std_err,
            base.map_or(String::new(), |b| format!(", honest baseline {b:.6}"))
        ));
        rows.push(vec![j.to_string(), label.to_string(), fmt(e.mean), fmt(e.std_err), fmt(sum.fairness[j])]);
    }
    out.say(format!("validators: E = {:.6} (se {:.6})", sum.validator.mean, sum.validator.std_err));
    out.say(format!("mean included reports: {:.4}", sum.mean_included));
    rows.push(vec![
        "validators".into(),
        "-".into(),
        fmt(sum.validator.mean),
        fmt(sum.validator.std_err),
        String::new(),
    ]);
    out.table("simulate.csv", &["participant", "strategy", "expected", "std_err", "fairness"], &rows)?;
    let strategies: BTreeMap<String, &String> = chosen.iter().map(|(j, s)| (j.to_string(), s)).collect();
    out.report(
        "simulate.json",
        &json!({ "instance": instance, "seed": seed, "strategies": strategies, "summary": sum, "honest_baseline": honest }),
    )?;
    if let Some(n) = trace {
        if !out.has_dir() && !out.json {
            // Without a directory the trace goes to stdout after the summary.
            crate::output::emit("");
        }
        let mut w = out.lines("trace.ndjson")?;
        for i in 0..n.min(trials) {
            let o = game::play_trial(cfg, profile, seed, i)?;
            for rec in &o.steps {
                let line = TraceLine {
                    trial: i,
                    step: rec.step,
                    validator: rec.validator.to_string(),
                    published: rec.bundles.iter().map(|(p, b)| (*p, b.reports().map(Report::id).collect())).collect(),
                    bribes: &rec.bribes,
                    inclusion: rec.block.slots().iter().map(Slot::key).collect(),
                    reformulated: &rec.reformulated,
                    ledger: &rec.ledger,
                };
                serde_json::to_writer(&mut w, &line)?;
                w.write_all(b"\n")?;
            }
        }
        w.flush()?;
    }
    Ok(true)
}

fn summary_rows(instance: &str, deviations: &[DeviationResult]) -> Vec<Vec<String>> {
    deviations
        .iter()
        .map(|d| {
            vec![
                instance.to_string(),
                d.participant.to_string(),
                format!("step {}: {}", d.step, d.kind.describe()),
                fmt(d.delta.mean),
                if d.profitable { "profitable" } else { "not-profitable" }.to_string(),
            ]
        })
        .collect()
}

fn say_verdict(out: &Output, verdict: &Verdict, best: Option<&DeviationResult>) {
    if let Some(b) = best {
        out.say(format!(
            "best deviation: {} step {} {}: gain {:.6} (se {:.6})",
            b.participant,
            b.step,
            b.kind.describe(),
            b.delta.mean,
            b.delta.std_err
        ));
    }
    match verdict {
        Verdict::NoProfitableDeviation { epsilon_se } => {
            out.say(format!("verdict: no profitable deviation (threshold {epsilon_se} standard errors)"))
        }
        Verdict::Violation { witness } => out.say(format!(
            "verdict: violation by {} at step {}: {}",
            witness.participant,
            witness.step,
            witness.kind.describe()
        )),
    }
}

fn spne(out: &Output, cfg: &GameConfig, grid: &ActionGrid, epsilon: f64, trials: u64, seed: u64) -> Result<bool> {
    let report = verify_spne(cfg, grid, epsilon, trials, seed)?;
    let instance = config::describe(cfg);
    out.say(format!("{instance}, {trials} trials, seed {seed}"));
    out.say(format!("scope: {}", report.scope));
    out.say(format!(
        "reward monotonicity: {}, skipping resistance: {}",
        report.properties.monotonicity.holds, report.properties.skipping_resistance.holds
    ));
    out.say(format!("deviations evaluated: {}", report.deviations.len()));
    say_verdict(out, &report.verdict, report.best.as_ref());
    out.table("spne.csv", &SUMMARY_HEADER, &summary_rows(&instance, &report.deviations))?;
    out.report("spne.json", &report)?;
    Ok(report.verdict.holds())
}

fn collusion(out: &Output, cfg: &GameConfig, members: &[PublisherId], trials: u64, seed: u64) -> Result<bool> {
    let report = check_pub_val_collusion(cfg, members, trials, seed)?;
    let equivalence = if members.len() >= 2 {
        Some(check_coalition_equivalence(cfg, members, &StrategyProfile::honest(cfg), trials.min(1000), seed)?)
    } else {
        None
    };
    let ok = report.holds && equivalence.as_ref().is_none_or(|e| e.holds());
    let names: Vec<String> = report.members.iter().map(ToString::to_string).collect();
    out.say(format!("{}, {trials} trials, seed {seed}", config::describe(cfg)));
    out.say(format!("coalition: {} with the first validator", names.join("+")));
    out.say(format!(
        "combined revenue: honest {:.6}, best joint action {:.6}, largest gain {:e}",
        report.honest.mean, report.best.mean, report.largest_gain
    ));
    if let Some(e) = &equivalence {
        out.say(format!("merged-publisher equivalence: {} mismatches over {} traces", e.mismatches, e.traces));
    }
    out.say(if ok { "verdict: collusion does not pay" } else { "verdict: collusion pays" });
    out.report("collusion.json", &json!({ "collusion": report, "equivalence": equivalence, "holds": ok }))?;
    Ok(ok)
}

fn sybil(
    out: &Output,
    cfg: &GameConfig,
    j: PublisherId,
    sizes: &[u32],
    epsilon: f64,
    trials: u64,
    seed: u64,
) -> Result<bool> {
    let mut ids = cfg.reports_of(j).iter().map(Report::id).collect::<Vec<_>>().into_iter();
    let partition: Vec<Vec<ReportId>> = sizes.iter().map(|&k| ids.by_ref().take(k as usize).collect()).collect();
    let report = check_sybil_proofness(cfg, j, &partition, &ActionGrid::default(), epsilon, trials, seed)?;
    let instance = config::describe(cfg);
    out.say(format!("{instance}, {trials} trials, seed {seed}"));
    let parts: Vec<String> = sizes.iter().map(ToString::to_string).collect();
    out.say(format!(
        "{j} split {} over {:?}",
        parts.join("+"),
        report.identities.iter().map(ToString::to_string).collect::<Vec<_>>()
    ));
    out.say(format!("honest traces equal: {}", report.honest_traces_equal));
    out.say(format!(
        "honest utility of {j}: {:.6} (se {:.6})",
        report.honest_utility.mean, report.honest_utility.std_err
    ));
    say_verdict(out, &report.verdict, report.best.as_ref());
    out.table("sybil.csv", &SUMMARY_HEADER, &summary_rows(&instance, &report.deviations))?;
    out.report("sybil.json", &report)?;
    Ok(report.holds())
}

fn stability(out: &Output, cfg: &GameConfig, trials: u64, seed: u64) -> Result<bool> {
    let probes = run_stability(cfg, trials, seed)?;
    let instance = config::describe(cfg);
    out.say(format!("{instance}, {trials} trials, seed {seed}"));
    let mut rows = Vec::new();
    for p in &probes {
        out.say(format!(
            "{} {}: others affected on {:.4} of trials, own change {:.6}{}",
            p.publisher,
            p.deviation,
            p.changed_fraction,
            p.delta.mean,
            if p.holds { "" } else { "  UNSTABLE" }
        ));
        rows.push(vec![
            instance.clone(),
            p.publisher.to_string(),
            p.deviation.clone(),
            fmt(p.delta.mean),
            if p.holds { "stable" } else { "unstable" }.to_string(),
        ]);
    }
    let ok = probes.iter().all(|p| p.holds);
    out.say(if ok { "verdict: stable" } else { "verdict: unstable" });
    out.table("stability.csv", &SUMMARY_HEADER, &rows)?;
    out.report("stability.json", &json!({ "instance": instance, "probes": probes, "holds": ok }))?;
    Ok(ok)
}

fn impossibility(out: &Output, n: usize, baseline: Baseline, strings: usize, seed: u64) -> Result<bool> {
    let report = impossibility_demo(n, baseline, strings, seed)?;
    out.say(format!(
        "{n} publishers, r_fix {}, v {}, capacity {}, {strings} string(s)",
        baseline.r_fix, baseline.v, baseline.capacity
    ));
    match &report.outcome {
        DemoOutcome::ZeroRevenue { note } => out.say(format!("zero revenue: {note}")),
        DemoOutcome::ProfitableDeviation {
            p1,
            p2,
            swap_bribe,
            spread_bribe,
            expected_gain,
            predicted_gain,
            unique_best_responses,
            ..
        } => {
            out.say(format!("{p2} pays {swap_bribe} to replace {p1} on the first string"));
            if let Some(x) = spread_bribe {
                out.say(format!("{p2} pays {x} for the honest block on every other string"));
            }
            out.say(format!("unique best responses: {unique_best_responses}"));
            out.say(format!("expected gain of {p2}: {expected_gain} (predicted {predicted_gain})"));
        }
    }
    out.say(if report.matches_prediction {
        "verdict: matches prediction"
    } else {
        "verdict: does not match prediction"
    });
    out.report("impossibility.json", &report)?;
    Ok(report.matches_prediction)
}
