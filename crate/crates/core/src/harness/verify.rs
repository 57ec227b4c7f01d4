//! Named verification suites. Each one runs its scenario from a base
//! [`SuiteInput`] and reports a list of [`Check`]s.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bounds::{revenue_upper_bound, theorem_lower_bound, trajectory_slack, Check};
use super::config::RunConfig;
use super::regret::{external_regret, policy_regret, SmokeEnvironment};
use super::simulate::{replication_seed, simulate, Trajectory};
use super::summary::Estimate;
use super::HarnessError;
use crate::agents::{AgentSpec, Expert, ExpertFamily, ExpertPreset, ExpertSpec, FamilyKind, MyopicMode};
use crate::distributions::enumerate::{enumerate_auction, DEFAULT_PROFILE_BUDGET};
use crate::distributions::ValueDistribution;
use crate::mechanism::{BuyerState, MechanismParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    MyersonOracle,
    LemmaB1,
    LemmaB2,
    LemmaB3,
    LemmaB4,
    Theorem1,
    Regret,
    PolicyRegret,
    UpperBound,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::MyersonOracle,
        Suite::LemmaB1,
        Suite::LemmaB2,
        Suite::LemmaB3,
        Suite::LemmaB4,
        Suite::Theorem1,
        Suite::Regret,
        Suite::PolicyRegret,
        Suite::UpperBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::MyersonOracle => "myerson-oracle",
            Suite::LemmaB1 => "lemma-b1",
            Suite::LemmaB2 => "lemma-b2",
            Suite::LemmaB3 => "lemma-b3",
            Suite::LemmaB4 => "lemma-b4",
            Suite::Theorem1 => "theorem-1",
            Suite::Regret => "regret",
            Suite::PolicyRegret => "policy-regret",
            Suite::UpperBound => "upper-bound",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| HarnessError::UnknownSuite(s.to_string()))
    }
}

/// Shared scenario inputs. Suites pick their own rosters unless noted.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteInput {
    pub params: MechanismParams,
    pub distribution: ValueDistribution,
    pub seed: u64,
    pub replications: usize,
    /// Used by `upper-bound` when non-empty.
    pub roster: Vec<AgentSpec>,
}

impl From<&RunConfig> for SuiteInput {
    fn from(c: &RunConfig) -> Self {
        SuiteInput {
            params: c.params.clone(),
            distribution: c.distribution.clone(),
            seed: c.seed,
            replications: c.replications.max(1),
            roster: c.roster().unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn run_suite(suite: Suite, input: &SuiteInput) -> Result<SuiteReport, HarnessError> {
    let checks = match suite {
        Suite::MyersonOracle => myerson_oracle(input.seed)?,
        Suite::LemmaB1 => lemma_b1(input)?,
        Suite::LemmaB2 => lemma_b2(input)?,
        Suite::LemmaB3 => lemma_b3(input)?,
        Suite::LemmaB4 => lemma_b4(input)?,
        Suite::Theorem1 => theorem_1(input)?,
        Suite::Regret => regret(input)?,
        Suite::PolicyRegret => policy_regret_suite(input)?,
        Suite::UpperBound => upper_bound(input)?,
    };
    Ok(SuiteReport { suite, checks })
}

fn lookahead() -> AgentSpec {
    AgentSpec::Lookahead { k: None }
}

fn myopic() -> AgentSpec {
    AgentSpec::Myopic {
        mode: MyopicMode::Reserve,
    }
}

fn preset(p: ExpertPreset) -> AgentSpec {
    AgentSpec::Expert {
        expert: ExpertSpec::Preset(p),
    }
}

/// Runs `input.replications` seeded replications of a roster.
fn replicate(
    input: &SuiteInput,
    params: &MechanismParams,
    roster: Vec<AgentSpec>,
    record: bool,
) -> Result<Vec<Trajectory>, HarnessError> {
    let cfg = RunConfig::new(params.clone(), input.distribution.clone(), roster, input.seed)
        .with_replications(input.replications);
    (0..cfg.replications)
        .into_par_iter()
        .map(|r| simulate(&cfg, replication_seed(cfg.seed, r), record))
        .collect()
}

/// Passes when the mean of `diffs` (measured − bound) is at least −3 SE.
fn lower_check(name: &str, measured: &[f64], diffs: &[f64], detail: String) -> Check {
    let m = Estimate::from_samples(measured);
    let d = Estimate::from_samples(diffs);
    let bound = m.mean - d.mean - 3.0 * d.se;
    let mut c = Check::at_least(name, m.mean, bound, detail);
    c.passed = d.count > 0 && d.mean >= -3.0 * d.se;
    c
}

/// Passes when the mean of `diffs` (measured − bound) is at most +3 SE.
fn upper_check(name: &str, measured: &[f64], diffs: &[f64], detail: String) -> Check {
    let m = Estimate::from_samples(measured);
    let d = Estimate::from_samples(diffs);
    let bound = m.mean - d.mean + 3.0 * d.se;
    let mut c = Check::at_most(name, m.mean, bound, detail);
    c.passed = d.count > 0 && d.mean <= 3.0 * d.se;
    c
}

fn random_support(rng: &mut ChaCha8Rng) -> Result<ValueDistribution, HarnessError> {
    let size = rng.gen_range(2..=4);
    let mut values: Vec<f64> = Vec::new();
    while values.len() < size {
        // Sixteenths keep reserve ties and equal bids in play.
        let v = rng.gen_range(0..=32) as f64 / 16.0;
        if !values.contains(&v) {
            values.push(v);
        }
    }
    values.sort_by(f64::total_cmp);
    let weights: Vec<f64> = (0..size).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let support: Vec<(f64, f64)> = values.into_iter().zip(weights.iter().map(|w| w / total)).collect();
    Ok(ValueDistribution::finite(&support)?)
}

fn myerson_oracle(seed: u64) -> Result<Vec<Check>, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut rev_gap, mut win_gap, mut cases) = (0.0f64, 0.0f64, 0);
    for _ in 0..20 {
        let d = random_support(&mut rng)?;
        for n in 1..=3 {
            let e = enumerate_auction(&d, n, DEFAULT_PROFILE_BUDGET)
                .map_err(|err| HarnessError::Config(err.to_string()))?;
            rev_gap = rev_gap.max((d.myerson_revenue(n) - e.revenue()).abs());
            win_gap = win_gap.max((d.myerson_win_prob(n)? - e.win_prob()).abs());
            cases += 1;
        }
    }
    let mut checks = vec![
        Check::at_most(
            "finite revenue vs enumeration",
            rev_gap,
            1e-12,
            format!("{cases} cases"),
        ),
        Check::at_most(
            "finite win probability vs enumeration",
            win_gap,
            1e-12,
            format!("{cases} cases"),
        ),
    ];

    // Uniform(0,1): reserve 1/2, revenue n ∫_{1/2}^1 (2v−1) v^{n−1} dv, θ_m = ∫_{1/2}^1 v^{m−1} dv.
    let u = ValueDistribution::uniform(0.0, 1.0)?;
    let integral = |f: &dyn Fn(f64) -> f64| quadrature::integrate(f, 0.5, 1.0, 1e-12).integral;
    for (n, exact) in [(1usize, 0.25), (2, 5.0 / 12.0), (3, 17.0 / 32.0)] {
        let numeric = integral(&|v: f64| n as f64 * (2.0 * v - 1.0) * v.powi(n as i32 - 1));
        let got = u.myerson_revenue(n);
        let gap = (got - numeric).abs().max((got - exact).abs());
        checks.push(Check::at_most(
            format!("uniform Rev({n})"),
            gap,
            1e-6,
            format!("value {got}"),
        ));
    }
    let numeric = integral(&|v: f64| v);
    let got = u.myerson_win_prob(2)?;
    let gap = (got - numeric).abs().max((got - 0.375).abs());
    checks.push(Check::at_most("uniform theta_2", gap, 1e-6, format!("value {got}")));
    Ok(checks)
}

fn lemma_b1(input: &SuiteInput) -> Result<Vec<Check>, HarnessError> {
    let n = input.params.n();
    let runs = replicate(input, &input.params, vec![lookahead(); n], false)?;
    let (mut epochs, mut violations, mut threshold_misses) = (0usize, 0usize, 0usize);
    let mut worst = f64::INFINITY;
    for t in &runs {
        for e in t.completed_epochs() {
            let r = &e.record;
            let floor = r.good_or_rest_at_end.len() as f64 * r.config.threshold_h as f64 * r.config.r_g;
            epochs += 1;
            worst = worst.min(r.good_revenue - floor);
            if r.good_revenue < floor * (1.0 - 1e-12) {
                violations += 1;
            }
            let all_rested = r.good_at_start.iter().all(|b| r.rested.contains(b));
            if r.uncleared < r.config.u_threshold && !all_rested {
                threshold_misses += 1;
            }
        }
    }
    Ok(vec![
        Check::at_most(
            "good-phase revenue >= |G_end| H r_g",
            violations as f64,
            0.0,
            format!(
                "{epochs} completed epochs over {} runs, smallest margin {worst:.6}",
                runs.len()
            ),
        ),
        Check::at_most(
            "threshold reached or everyone rested",
            threshold_misses as f64,
            0.0,
            format!("{epochs} completed epochs"),
        ),
        Check::at_least("completed epochs", epochs as f64, 1.0, String::new()),
    ])
}

fn lemma_b2(input: &SuiteInput) -> Result<Vec<Check>, HarnessError> {
    let n = input.params.n();
    let eps = input.params.epsilon();
    let d = &input.distribution;
    // Zero good-phase bids push every buyer into bad state during the first
    // epoch; from then on each bids with the myopic bad-state rule.
    let runs = replicate(input, &input.params, vec![preset(ExpertPreset::ReserveAbove); n], false)?;
    let (mut measured, mut diffs) = (Vec::new(), Vec::new());
    for t in &runs {
        for e in t.completed_epochs() {
            let r = &e.record;
            let bad = r.bad_at_start.len();
            if bad < n.div_ceil(2) || r.bad_rounds_run == 0 {
                continue;
            }
            let m_b = r.config.m_b;
            let bound = (1.0 - eps) * (1.0 - (-1.0f64).exp()) * (bad as f64 / m_b as f64) * d.myerson_revenue(m_b);
            let per_round = r.bad_revenue / r.bad_rounds_run as f64;
            measured.push(per_round);
            diffs.push(per_round - bound);
        }
    }
    let detail = format!("{} epochs with |B| >= ceil(n/2)", measured.len());
    Ok(vec![lower_check(
        "bad-phase revenue per round",
        &measured,
        &diffs,
        detail,
    )])
}

fn lemma_b3(input: &SuiteInput) -> Result<Vec<Check>, HarnessError> {
    let n = input.params.n();
    let eps = input.params.epsilon();
    let runs = replicate(input, &input.params, vec![lookahead(); n], false)?;
    let d = &input.distribution;
    let (mut utility, mut diffs, mut events) = (Vec::new(), Vec::new(), Vec::new());
    for t in &runs {
        for e in t.completed_epochs() {
            let r = &e.record;
            let bound = eps * (1.0 - eps) * d.upper_tail_mean(r.config.m_g) * r.config.threshold_h as f64;
            utility.push(e.utility[0]);
            diffs.push(e.utility[0] - bound);
            let hit = r.threshold_round.is_some() && r.unrested_at_threshold.contains(&0);
            events.push(if hit { 1.0 } else { 0.0 });
        }
    }
    let detail = format!("{} completed epochs", utility.len());
    let freq = Estimate::from_samples(&events);
    Ok(vec![
        lower_check("s^g utility per epoch", &utility, &diffs, detail.clone()),
        Check::at_most(
            "unrested at threshold frequency",
            freq.mean,
            eps * eps + 3.0 * freq.se,
            detail,
        ),
    ])
}

fn lemma_b4(input: &SuiteInput) -> Result<Vec<Check>, HarnessError> {
    let n = input.params.n();
    let eps = input.params.epsilon();
    let rho = input.params.rho();
    let d = &input.distribution;
    let mut checks = Vec::new();
    for (label, kind) in [
        ("value bids above r_b", ExpertPreset::TruthfulAboveReserve),
        ("r_b bids above r_b", ExpertPreset::ReserveAbove),
    ] {
        let good = n / 2;
        let roster: Vec<_> = (0..n)
            .map(|i| if i < good { lookahead() } else { preset(kind) })
            .collect();
        let runs = replicate(input, &input.params, roster, false)?;
        let (mut utility, mut diffs) = (Vec::new(), Vec::new());
        for t in &runs {
            for e in t.completed_epochs() {
                let c = &e.record.config;
                let bound = (1.0 + eps) * (rho * c.length as f64 / c.m_b as f64) * d.upper_tail_mean(c.m_b);
                for &b in &e.record.bad_at_start {
                    utility.push(e.utility[b]);
                    diffs.push(e.utility[b] - bound);
                }
            }
        }
        let detail = format!("{} bad-buyer epochs", utility.len());
        checks.push(upper_check(
            &format!("bad utility per epoch ({label})"),
            &utility,
            &diffs,
            detail,
        ));
    }
    Ok(checks)
}

/// Revenue per round of each replication and the largest slack among them.
fn revenue_samples(runs: &[Trajectory]) -> (Vec<f64>, f64) {
    let revenue = runs
        .iter()
        .map(|t| t.totals.revenue / t.totals.rounds.max(1) as f64)
        .collect();
    let slack = runs.iter().map(trajectory_slack).fold(0.0, f64::max);
    (revenue, slack)
}

fn theorem_1(input: &SuiteInput) -> Result<Vec<Check>, HarnessError> {
    let n = input.params.n();
    let d = &input.distribution;
    let mut checks = Vec::new();
    for soph in [n, n / 2, 0] {
        let roster: Vec<_> = (0..n).map(|i| if i < soph { lookahead() } else { myopic() }).collect();
        let runs = replicate(input, &input.params, roster, false)?;
        let (n_soph, n_naive) = (runs[0].n_soph(), runs[0].n_naive());
        let (samples, slack) = revenue_samples(&runs);
        let est = Estimate::from_samples(&samples);
        let lower = theorem_lower_bound(d, &input.params, n_soph, n_naive);
        let upper = revenue_upper_bound(d, n_soph, n_naive);
        let detail = format!(
            "n_soph={n_soph} n_naive={n_naive} mean={:.6} se={:.6} reps={}",
            est.mean, est.se, est.count
        );
        checks.push(Check::at_least(
            format!("({n_soph},{n_naive}) revenue >= lower bound - slack"),
            est.mean,
            lower - slack - 3.0 * est.se,
            format!("{detail} bound={lower:.6} slack={slack:.6}"),
        ));
        checks.push(Check::at_most(
            format!("({n_soph},{n_naive}) revenue <= upper bound"),
            est.mean,
            upper + 3.0 * est.se,
            format!("{detail} bound={upper:.6}"),
        ));
    }
    Ok(checks)
}

/// Horizon of the EXP3 smoke test; the sublinearity check also runs at 4x.
pub const SMOKE_HORIZON: u64 = 20_000;
pub const SMOKE_EXPERTS: usize = 16;

fn regret(input: &SuiteInput) -> Result<Vec<Check>, HarnessError> {
    let reps = input.replications;
    let mean_regret = |horizon: u64| -> Result<f64, HarnessError> {
        let env = SmokeEnvironment {
            experts: SMOKE_EXPERTS,
            horizon,
        };
        let per: Vec<f64> = (0..reps)
            .into_par_iter()
            .map(|r| env.run_exp3(replication_seed(input.seed, r)).map(|x| x.regret))
            .collect::<Result<_, _>>()?;
        Ok(per.iter().sum::<f64>() / per.len() as f64)
    };
    let t = SMOKE_HORIZON;
    let (r1, r4) = (mean_regret(t)? / t as f64, mean_regret(4 * t)? / (4 * t) as f64);
    let nf = SMOKE_EXPERTS as f64;
    let rate = 3.0 * (nf * nf.ln() / t as f64).sqrt();
    let mut checks = vec![
        Check::at_most(
            "EXP3 Regret(4T)/4T <= 0.6 Regret(T)/T",
            r4,
            0.6 * r1,
            format!("Regret(T)/T={r1:.6}"),
        ),
        Check::at_most(
            "EXP3 Regret(T)/T <= 3 sqrt(N ln N / T)",
            r1,
            rate,
            format!("T={t}, N={SMOKE_EXPERTS}"),
        ),
    ];

    // Explore-then-commit as buyer 0 against good-strategy players, with the
    // one-time reset at the end of exploration.
    let n = input.params.n();
    let spec = AgentSpec::NoPolicyRegret {
        block: None,
        family: FamilyKind::Benchmark,
        grid_steps: None,
    };
    let horizon = input.params.horizon();
    let family = ExpertFamily::benchmark();
    let block = crate::agents::ExploreThenCommit::default_block(family.len(), horizon);
    let explore = block * family.len() as u64;
    let params = input.params.clone().with_reset_round(explore);
    let roster: Vec<_> = (0..n)
        .map(|i| if i == 0 { spec.clone() } else { lookahead() })
        .collect();
    let runs = replicate(input, &params, roster, false)?;
    let occupancy: Vec<f64> = runs
        .iter()
        .map(|t| t.totals.occupancy[0][1] as f64 / t.totals.rounds.max(1) as f64)
        .collect();
    let worst = occupancy.iter().copied().fold(0.0, f64::max);
    checks.push(Check::at_most(
        "exploration N*L <= 0.05 T",
        explore as f64,
        0.05 * horizon as f64,
        format!("N={}, L={block}, T={horizon}", family.len()),
    ));
    checks.push(Check::at_most(
        "explore-then-commit bad-state occupancy < 5%",
        worst,
        0.05,
        format!(
            "mean {:.6} over {} runs",
            occupancy.iter().sum::<f64>() / occupancy.len() as f64,
            runs.len()
        ),
    ));
    Ok(checks)
}

fn policy_regret_suite(input: &SuiteInput) -> Result<Vec<Check>, HarnessError> {
    let n = input.params.n();
    let mut checks = Vec::new();
    let roster =
        |p: ExpertPreset| -> Vec<AgentSpec> { (0..n).map(|i| if i == 0 { preset(p) } else { lookahead() }).collect() };

    let cfg = RunConfig::new(
        input.params.clone(),
        input.distribution.clone(),
        roster(ExpertPreset::GoodStrategy),
        input.seed,
    );
    let t = simulate(&cfg, input.seed, true)?;
    let own = policy_regret(&cfg, &t, 0, &ExpertFamily::new(vec![Expert::GOOD_STRATEGY]))?;
    checks.push(Check::at_most(
        "policy regret against itself",
        own.regret.abs(),
        0.0,
        String::new(),
    ));
    let bench = ExpertFamily::benchmark();
    let full = policy_regret(&cfg, &t, 0, &bench)?;
    let idx = bench.position(&Expert::GOOD_STRATEGY).expect("benchmark holds s^g");
    checks.push(Check::at_most(
        "replay of its own expert inside a larger family",
        (full.per_expert[idx] - full.realized).abs(),
        0.0,
        format!("family policy regret {:.6}", full.regret),
    ));
    let ext = external_regret(&t, 0, &ExpertFamily::new(vec![Expert::GOOD_STRATEGY]))?;
    checks.push(Check::at_most(
        "external regret against itself",
        ext.regret.abs(),
        0.0,
        String::new(),
    ));

    let mut again = Vec::new();
    simulate(&cfg, input.seed, true)?.write_jsonl(&mut again)?;
    let mut first = Vec::new();
    t.write_jsonl(&mut first)?;
    checks.push(Check::at_most(
        "identical seeds give identical trajectory bytes",
        if first == again { 0.0 } else { 1.0 },
        0.0,
        format!("{} bytes", first.len()),
    ));

    let cfg = RunConfig::new(
        input.params.clone(),
        input.distribution.clone(),
        roster(ExpertPreset::Zero),
        input.seed,
    );
    let t = simulate(&cfg, input.seed, false)?;
    let entered_bad = t.final_states[0] == BuyerState::Bad;
    let r = policy_regret(&cfg, &t, 0, &bench)?;
    let mut positive = Check::at_least(
        "bad-entering agent has positive policy regret",
        r.regret,
        0.0,
        format!("entered bad: {entered_bad}"),
    );
    positive.passed = entered_bad && r.regret > 0.0;
    checks.push(positive);
    Ok(checks)
}

fn upper_bound(input: &SuiteInput) -> Result<Vec<Check>, HarnessError> {
    let n = input.params.n();
    let d = &input.distribution;
    let mut rosters: Vec<Vec<AgentSpec>> = Vec::new();
    if input.roster.len() == n {
        rosters.push(input.roster.clone());
    }
    rosters.push(vec![lookahead(); n]);
    rosters.push(vec![myopic(); n]);
    rosters.push(
        (0..n)
            .map(|i| if i % 2 == 0 { lookahead() } else { myopic() })
            .collect(),
    );
    let mut checks = Vec::new();
    for roster in rosters {
        let runs = replicate(input, &input.params, roster, false)?;
        let (n_soph, n_naive) = (runs[0].n_soph(), runs[0].n_naive());
        let (samples, _) = revenue_samples(&runs);
        let est = Estimate::from_samples(&samples);
        let upper = revenue_upper_bound(d, n_soph, n_naive);
        checks.push(Check::at_most(
            format!("({n_soph},{n_naive}) revenue <= upper bound"),
            est.mean,
            upper + 3.0 * est.se,
            format!("bound={upper:.6} se={:.6}", est.se),
        ));
    }

    // Expected maximum of n values against q†_n.
    let mut rng = ChaCha8Rng::seed_from_u64(input.seed);
    let maxima: Vec<f64> = (0..100_000)
        .map(|_| (0..n).map(|_| d.sample(&mut rng)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let est = Estimate::from_samples(&maxima);
    let q = d.upper_tail_mean(n);
    checks.push(Check::at_most(
        "E[max of n values] <= q†_n",
        est.mean,
        q + 3.0 * est.se,
        format!("q†_n={q:.6}"),
    ));
    Ok(checks)
}
