//! Trial orchestration for the three experiments: tool use with a known
//! model, tool discovery by learning transitions, and tool innovation with the
//! affordance factorisation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{probe_transition, ActionSelection, Agent, AgentConfig, PolicyEvaluation};
use crate::env::{self, Action, EnvObservation, RewardLocation, RewardRule, Room, Tool};
use crate::error::{Error, Result};
use crate::model::{build_model, relocate_reward, set_uniform_transition_prior, ModelVariant};

pub const STEPS_PER_RUN: usize = 12;
pub const RUNS_PER_ADJACENT_ROOM: usize = 10;
pub const CORNER_RUNS: usize = 3;

/// Adjacent rooms in the order they are presented during continual learning.
pub const ADJACENT_ORDER: [RewardLocation; 4] = [
    RewardLocation::NorthRight,
    RewardLocation::West,
    RewardLocation::NorthLeft,
    RewardLocation::East,
];

/// Two policies whose summed terms differ by less than this share a rank.
const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub location: RewardLocation,
    pub num_runs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub blocks: Vec<Block>,
    pub steps_per_run: usize,
    pub model_variant: ModelVariant,
    pub learning: bool,
    pub ablate_ig_on_final_block: bool,
    pub num_trials: usize,
    pub base_seed: u64,
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::InvalidModel("schedule has no blocks".into()));
        }
        if self.blocks.iter().any(|b| b.num_runs == 0) {
            return Err(Error::InvalidModel(
                "every block needs at least one run".into(),
            ));
        }
        if self.steps_per_run == 0 {
            return Err(Error::InvalidModel(
                "steps_per_run must be at least 1".into(),
            ));
        }
        if self.num_trials == 0 {
            return Err(Error::InvalidModel("num_trials must be at least 1".into()));
        }
        Ok(())
    }

    pub fn total_runs(&self) -> usize {
        self.blocks.iter().map(|b| b.num_runs).sum()
    }

    /// Index of the first run of every block.
    pub fn block_starts(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .scan(0, |acc, b| {
                let start = *acc;
                *acc += b.num_runs;
                Some(start)
            })
            .collect()
    }

    /// Adjacent rooms for ten runs each, then three runs of `final_corner`.
    pub fn continual(
        model_variant: ModelVariant,
        final_corner: RewardLocation,
        num_trials: usize,
        base_seed: u64,
    ) -> Self {
        let mut blocks: Vec<Block> = ADJACENT_ORDER
            .iter()
            .map(|&location| Block {
                location,
                num_runs: RUNS_PER_ADJACENT_ROOM,
            })
            .collect();
        blocks.push(Block {
            location: final_corner,
            num_runs: CORNER_RUNS,
        });
        Self {
            blocks,
            steps_per_run: STEPS_PER_RUN,
            model_variant,
            learning: true,
            ablate_ig_on_final_block: false,
            num_trials,
            base_seed,
        }
    }
}

/// Prior concentration of every transition entry before learning.
pub const DEFAULT_ALPHA_INIT: f64 = 0.25;

/// Knobs shared by all experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub num_trials: usize,
    pub base_seed: u64,
    pub gamma: f64,
    pub alpha_init: f64,
    pub eta: f64,
    pub policy_len: usize,
    pub action_selection: ActionSelection,
    pub reward_rule: RewardRule,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            num_trials: 20,
            base_seed: 0,
            gamma: 16.0,
            alpha_init: DEFAULT_ALPHA_INIT,
            eta: 1.0,
            policy_len: 4,
            action_selection: ActionSelection::Sample,
            reward_rule: RewardRule::ExactMatch,
        }
    }
}

impl ExperimentParams {
    fn agent_config(&self, learn_b: bool, seed: u64) -> AgentConfig {
        AgentConfig {
            policy_len: self.policy_len,
            gamma: self.gamma,
            use_state_ig: true,
            use_param_ig: true,
            learn_b,
            eta: self.eta,
            action_selection: self.action_selection,
            rng_seed: seed,
            ..AgentConfig::default()
        }
    }
}

/// A transition entry whose learned probability is tracked every step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub name: String,
    pub factor: String,
    pub dep_states: Vec<usize>,
    pub action: Action,
    pub to_state: usize,
}

impl Probe {
    pub fn default_set(variant: ModelVariant) -> Vec<Probe> {
        let p = |name: &str, factor: &str, deps: Vec<usize>, to: usize| Probe {
            name: name.into(),
            factor: factor.into(),
            dep_states: deps,
            action: Action::PickUp,
            to_state: to,
        };
        let (l, r) = (Room::Left.index(), Room::Right.index());
        match variant {
            ModelVariant::ToolState => vec![
                p(
                    "V_from_null_left",
                    "Tool",
                    vec![Tool::Null.index(), l],
                    Tool::V.index(),
                ),
                p(
                    "H_from_null_right",
                    "Tool",
                    vec![Tool::Null.index(), r],
                    Tool::H.index(),
                ),
                p(
                    "HV_from_V_right",
                    "Tool",
                    vec![Tool::V.index(), r],
                    Tool::HV.index(),
                ),
                p(
                    "HV_from_H_left",
                    "Tool",
                    vec![Tool::H.index(), l],
                    Tool::HV.index(),
                ),
            ],
            ModelVariant::Affordance => vec![
                p("y_reach_left", "YReach", vec![0, l], 1),
                p("x_reach_right", "XReach", vec![0, r], 1),
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub policy_index: usize,
    pub action: Action,
    /// Observation received after the action.
    pub observation: EnvObservation,
    pub utility_rank: usize,
    pub infogain_rank: usize,
    /// Largest |state information gain| over all evaluated policies.
    pub max_abs_state_ig: f64,
    pub max_abs_param_ig: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub location: RewardLocation,
    /// Steps until the first reward, or the run length if never rewarded.
    pub steps_to_solve: usize,
    pub solved: bool,
    pub steps: Vec<StepRecord>,
}

impl RunRecord {
    pub fn actions(&self) -> Vec<Action> {
        self.steps.iter().map(|s| s.action).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSample {
    pub cumulative_step: usize,
    pub name: String,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub runs: Vec<RunRecord>,
    pub probes: Vec<ProbeSample>,
    /// Policy evaluations at the first decision of every run, when requested.
    pub first_decisions: Vec<Vec<PolicyEvaluation>>,
}

impl TrialRecord {
    pub fn probe_series(&self, name: &str) -> Vec<f64> {
        self.probes
            .iter()
            .filter(|p| p.name == name)
            .map(|p| p.probability)
            .collect()
    }
}

/// Results of one agent variant over all trials of a schedule.
#[derive(Clone, Debug)]
pub struct ArmReport {
    pub name: String,
    pub schedule: Schedule,
    pub trials: Vec<TrialRecord>,
}

impl ArmReport {
    pub fn curves(&self) -> Curves {
        aggregate(&self.trials)
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub experiment: u8,
    pub params: ExperimentParams,
    pub arms: Vec<ArmReport>,
}

/// Rank of the selected policy by summed utility and by summed information
/// gain: the number of policies strictly better, so ties share the better
/// rank and 0 is best.
pub fn compute_policy_ranks(evaluations: &[PolicyEvaluation], selected: usize) -> (usize, usize) {
    let sel = &evaluations[selected];
    let (u, ig) = (sel.total_utility(), sel.total_info_gain());
    let utility_rank = evaluations
        .iter()
        .filter(|e| e.total_utility() > u + RANK_TOLERANCE)
        .count();
    let infogain_rank = evaluations
        .iter()
        .filter(|e| e.total_info_gain() > ig + RANK_TOLERANCE)
        .count();
    (utility_rank, infogain_rank)
}

fn record_probes(
    agent: &Agent,
    probes: &[(usize, &Probe)],
    cumulative_step: usize,
    out: &mut Vec<ProbeSample>,
) -> Result<()> {
    for (factor, probe) in probes {
        let probability = probe_transition(
            &agent.model,
            *factor,
            &probe.dep_states,
            probe.action.index(),
            probe.to_state,
        )?;
        out.push(ProbeSample {
            cumulative_step,
            name: probe.name.clone(),
            probability,
        });
    }
    Ok(())
}

/// Runs one trial: a fresh agent goes through every block of the schedule,
/// carrying its learned transitions from run to run.
pub fn run_trial(
    schedule: &Schedule,
    params: &ExperimentParams,
    trial: usize,
    probes: &[Probe],
    keep_first_decisions: bool,
) -> Result<TrialRecord> {
    schedule.validate()?;
    let seed = schedule.base_seed.wrapping_add(trial as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let variant = schedule.model_variant;
    let rule = params.reward_rule;

    let mut model = build_model(variant, schedule.blocks[0].location, rule)?;
    if schedule.learning {
        model = set_uniform_transition_prior(&model, params.alpha_init)?;
    }
    let mut agent = Agent::new(model, params.agent_config(schedule.learning, seed))?;
    let probe_factors = probes
        .iter()
        .map(|p| Ok((agent.model.factor_index(&p.factor)?, p)))
        .collect::<Result<Vec<_>>>()?;

    let mut record = TrialRecord {
        trial,
        seed,
        runs: Vec::with_capacity(schedule.total_runs()),
        probes: Vec::new(),
        first_decisions: Vec::new(),
    };
    let mut cumulative = 0;
    record_probes(&agent, &probe_factors, cumulative, &mut record.probes)?;

    let last_block = schedule.blocks.len() - 1;
    for (bi, block) in schedule.blocks.iter().enumerate() {
        agent.model = relocate_reward(&agent.model, variant, block.location, rule)?;
        let ablate = schedule.ablate_ig_on_final_block && bi == last_block;
        agent.config.use_state_ig = !ablate;
        agent.config.use_param_ig = !ablate;

        for _ in 0..block.num_runs {
            let mut state = env::reset(block.location);
            agent.reset_episode();
            agent.observe(&env::observe_with(&state, rule).to_vec())?;

            let mut run = RunRecord {
                location: block.location,
                steps_to_solve: schedule.steps_per_run,
                solved: false,
                steps: Vec::with_capacity(schedule.steps_per_run),
            };
            for t in 0..schedule.steps_per_run {
                let evaluations = agent.evaluate();
                if keep_first_decisions && t == 0 {
                    record.first_decisions.push(evaluations.clone());
                }
                let (policy_index, control) = agent.act(&evaluations, &mut rng)?;
                let (utility_rank, infogain_rank) =
                    compute_policy_ranks(&evaluations, policy_index);
                let max_abs = |f: fn(&PolicyEvaluation) -> &Vec<f64>| {
                    evaluations
                        .iter()
                        .flat_map(|e| f(e).iter())
                        .fold(0.0f64, |m, v| m.max(v.abs()))
                };
                let action = Action::from_index(control).expect("single Action control");
                state = env::step(state, action);
                let observation = env::observe_with(&state, rule);
                agent.observe(&observation.to_vec())?;
                cumulative += 1;
                record_probes(&agent, &probe_factors, cumulative, &mut record.probes)?;

                if observation.rewarded() && !run.solved {
                    run.solved = true;
                    run.steps_to_solve = t + 1;
                }
                run.steps.push(StepRecord {
                    policy_index,
                    action,
                    observation,
                    utility_rank,
                    infogain_rank,
                    max_abs_state_ig: max_abs(|e| &e.state_ig),
                    max_abs_param_ig: max_abs(|e| &e.param_ig),
                });
            }
            record.runs.push(run);
        }
    }
    Ok(record)
}

/// Runs every trial of `schedule` (in parallel) and returns them ordered by
/// trial index.
pub fn run_schedule(
    name: &str,
    schedule: &Schedule,
    params: &ExperimentParams,
    keep_first_decisions: bool,
) -> Result<ArmReport> {
    schedule.validate()?;
    let probes = if schedule.learning {
        Probe::default_set(schedule.model_variant)
    } else {
        Vec::new()
    };
    let trials = (0..schedule.num_trials)
        .into_par_iter()
        .map(|t| run_trial(schedule, params, t, &probes, keep_first_decisions))
        .collect::<Result<Vec<_>>>()?;
    Ok(ArmReport {
        name: name.to_string(),
        schedule: schedule.clone(),
        trials,
    })
}

/// Known model, learning off, one 12-step episode per location.
pub fn run_experiment_1(
    variant: ModelVariant,
    params: &ExperimentParams,
) -> Result<ExperimentReport> {
    let schedule = Schedule {
        blocks: RewardLocation::ALL
            .iter()
            .map(|&location| Block {
                location,
                num_runs: 1,
            })
            .collect(),
        steps_per_run: STEPS_PER_RUN,
        model_variant: variant,
        learning: false,
        ablate_ig_on_final_block: false,
        num_trials: params.num_trials,
        base_seed: params.base_seed,
    };
    let arm = run_schedule(variant.name(), &schedule, params, true)?;
    Ok(ExperimentReport {
        experiment: 1,
        params: params.clone(),
        arms: vec![arm],
    })
}

fn check_corner(final_corner: RewardLocation) -> Result<()> {
    if !final_corner.is_corner() {
        return Err(Error::UnknownLocation(format!(
            "{final_corner} is not a corner room"
        )));
    }
    Ok(())
}

/// Tool discovery: transitions learned from a uniform prior through the
/// adjacent rooms and then a corner.
pub fn run_experiment_2(
    variant: ModelVariant,
    final_corner: RewardLocation,
    params: &ExperimentParams,
) -> Result<ExperimentReport> {
    check_corner(final_corner)?;
    let schedule = Schedule::continual(variant, final_corner, params.num_trials, params.base_seed);
    let arm = run_schedule(variant.name(), &schedule, params, false)?;
    Ok(ExperimentReport {
        experiment: 2,
        params: params.clone(),
        arms: vec![arm],
    })
}

/// Tool innovation: the affordance model and the Tool State baseline under
/// the same schedule, optionally planning on utility alone in the corner.
pub fn run_experiment_3(
    final_corner: RewardLocation,
    utility_only: bool,
    params: &ExperimentParams,
) -> Result<ExperimentReport> {
    check_corner(final_corner)?;
    let mut arms = Vec::with_capacity(2);
    for variant in [ModelVariant::Affordance, ModelVariant::ToolState] {
        let mut schedule =
            Schedule::continual(variant, final_corner, params.num_trials, params.base_seed);
        schedule.ablate_ig_on_final_block = utility_only;
        arms.push(run_schedule(variant.name(), &schedule, params, false)?);
    }
    Ok(ExperimentReport {
        experiment: 3,
        params: params.clone(),
        arms,
    })
}

/// Pointwise mean and standard error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSte {
    pub mean: f64,
    pub ste: f64,
    pub n: usize,
    /// Set when the standard error is undefined (a single sample) and was
    /// reported as 0.
    pub degenerate: bool,
}

pub fn mean_ste(values: &[f64]) -> MeanSte {
    let n = values.len();
    if n == 0 {
        return MeanSte {
            mean: f64::NAN,
            ste: 0.0,
            n,
            degenerate: true,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return MeanSte {
            mean,
            ste: 0.0,
            n,
            degenerate: true,
        };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    MeanSte {
        mean,
        ste: var.sqrt() / (n as f64).sqrt(),
        n,
        degenerate: false,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curves {
    /// Steps to solve, per run index.
    pub steps: Vec<MeanSte>,
    /// Per run, per step.
    pub utility_rank: Vec<Vec<MeanSte>>,
    pub infogain_rank: Vec<Vec<MeanSte>>,
    /// Per run, averaged over the run's steps first.
    pub run_utility_rank: Vec<MeanSte>,
    pub run_infogain_rank: Vec<MeanSte>,
    /// Probe name -> per cumulative step.
    pub probes: Vec<(String, Vec<MeanSte>)>,
}

fn column<T>(trials: &[TrialRecord], f: impl Fn(&TrialRecord) -> Option<T>) -> Vec<T> {
    trials.iter().filter_map(f).collect()
}

/// Aggregates trials pointwise (per run index, per step index and per
/// cumulative step).
pub fn aggregate(trials: &[TrialRecord]) -> Curves {
    let runs = trials.iter().map(|t| t.runs.len()).max().unwrap_or(0);
    let steps = (0..runs)
        .map(|r| {
            mean_ste(&column(trials, |t| {
                t.runs.get(r).map(|x| x.steps_to_solve as f64)
            }))
        })
        .collect();
    let per_step = |rank: fn(&StepRecord) -> usize| -> Vec<Vec<MeanSte>> {
        (0..runs)
            .map(|r| {
                let len = trials
                    .iter()
                    .filter_map(|t| t.runs.get(r).map(|x| x.steps.len()))
                    .max()
                    .unwrap_or(0);
                (0..len)
                    .map(|s| {
                        mean_ste(&column(trials, |t| {
                            t.runs
                                .get(r)
                                .and_then(|x| x.steps.get(s))
                                .map(|x| rank(x) as f64)
                        }))
                    })
                    .collect()
            })
            .collect()
    };
    let per_run = |rank: fn(&StepRecord) -> usize| -> Vec<MeanSte> {
        (0..runs)
            .map(|r| {
                mean_ste(&column(trials, |t| {
                    t.runs.get(r).filter(|x| !x.steps.is_empty()).map(|x| {
                        x.steps.iter().map(|s| rank(s) as f64).sum::<f64>() / x.steps.len() as f64
                    })
                }))
            })
            .collect()
    };
    let mut names: Vec<String> = Vec::new();
    for p in trials.iter().flat_map(|t| &t.probes) {
        if !names.contains(&p.name) {
            names.push(p.name.clone());
        }
    }
    let probes = names
        .into_iter()
        .map(|name| {
            let series: Vec<Vec<f64>> = trials.iter().map(|t| t.probe_series(&name)).collect();
            let len = series.iter().map(Vec::len).max().unwrap_or(0);
            let curve = (0..len)
                .map(|k| {
                    mean_ste(
                        &series
                            .iter()
                            .filter_map(|s| s.get(k).copied())
                            .collect::<Vec<_>>(),
                    )
                })
                .collect();
            (name, curve)
        })
        .collect();
    Curves {
        steps,
        utility_rank: per_step(|s| s.utility_rank),
        infogain_rank: per_step(|s| s.infogain_rank),
        run_utility_rank: per_run(|s| s.utility_rank),
        run_infogain_rank: per_run(|s| s.infogain_rank),
        probes,
    }
}
