//! Active-inference loop over a factored generative model: mean-field state
//! inference, policy rollouts, expected free energy, action selection and
//! Dirichlet learning of transitions.
//!
//! Expected free energy is reported with the sign flipped (`G`, larger is
//! better) and decomposes per step as `utility + state_ig + param_ig`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::categorical::{kl_slices, ln_floor, softmax, wnorm, DenseTensor, Simplex};
use crate::error::{Error, Result};
use crate::model::{enumerate_policies, GenerativeModel, Policy};

/// Mean-field posterior: one marginal per hidden-state factor.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefState {
    pub factors: Vec<Simplex>,
}

impl BeliefState {
    pub fn new(factors: Vec<Simplex>) -> Self {
        Self { factors }
    }

    /// The model's initial-state prior.
    pub fn prior(model: &GenerativeModel) -> Self {
        Self {
            factors: model.d().to_vec(),
        }
    }

    pub fn uniform(model: &GenerativeModel) -> Self {
        Self {
            factors: model
                .factors()
                .iter()
                .map(|f| Simplex::uniform(f.cardinality))
                .collect(),
        }
    }

    pub fn marginal(&self, factor: usize) -> &Simplex {
        &self.factors[factor]
    }

    /// Most probable state of each factor.
    pub fn map_state(&self) -> Vec<usize> {
        self.factors.iter().map(Simplex::argmax).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActionSelection {
    #[default]
    Sample,
    Argmax,
}

impl ActionSelection {
    pub fn name(self) -> &'static str {
        match self {
            ActionSelection::Sample => "sample",
            ActionSelection::Argmax => "argmax",
        }
    }
}

impl std::str::FromStr for ActionSelection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "sample" => Ok(ActionSelection::Sample),
            "argmax" => Ok(ActionSelection::Argmax),
            _ => Err(format!(
                "unknown action selection `{s}` (expected sample or argmax)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub policy_len: usize,
    pub gamma: f64,
    pub use_state_ig: bool,
    pub use_param_ig: bool,
    pub learn_b: bool,
    pub eta: f64,
    pub action_selection: ActionSelection,
    pub inference_iters: usize,
    pub rng_seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            policy_len: 4,
            gamma: 16.0,
            use_state_ig: true,
            use_param_ig: true,
            learn_b: false,
            eta: 1.0,
            action_selection: ActionSelection::Sample,
            inference_iters: 6,
            rng_seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.policy_len == 0 {
            return Err(Error::InvalidModel("policy_len must be at least 1".into()));
        }
        if self.gamma <= 0.0 || !self.gamma.is_finite() {
            return Err(Error::InvalidPrecision(self.gamma));
        }
        if self.eta < 0.0 || !self.eta.is_finite() {
            return Err(Error::InvalidModel(format!(
                "learning rate {} is invalid",
                self.eta
            )));
        }
        Ok(())
    }
}

/// Per-step expected free energy terms for one policy.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyEvaluation {
    pub policy_index: usize,
    pub policy: Policy,
    pub utility: Vec<f64>,
    pub state_ig: Vec<f64>,
    pub param_ig: Vec<f64>,
    /// Negative expected free energy summed over the horizon.
    pub g: f64,
}

impl PolicyEvaluation {
    pub fn total_utility(&self) -> f64 {
        self.utility.iter().sum()
    }

    pub fn total_state_ig(&self) -> f64 {
        self.state_ig.iter().sum()
    }

    pub fn total_param_ig(&self) -> f64 {
        self.param_ig.iter().sum()
    }

    pub fn total_info_gain(&self) -> f64 {
        self.total_state_ig() + self.total_param_ig()
    }
}

/// Row-major outer product of the marginals of `deps`.
fn joint_weights(belief: &BeliefState, deps: &[usize], out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    for &d in deps {
        let q = belief.factors[d].probs();
        let prev = std::mem::take(out);
        out.reserve(prev.len() * q.len());
        for w in &prev {
            for p in q {
                out.push(w * p);
            }
        }
    }
}

fn check_obs(model: &GenerativeModel, observation: &[usize]) -> Result<()> {
    if observation.len() != model.modalities().len() {
        return Err(Error::LengthMismatch {
            left: observation.len(),
            right: model.modalities().len(),
        });
    }
    for (o, m) in observation.iter().zip(model.modalities()) {
        if *o >= m.cardinality {
            return Err(Error::IndexOutOfRange {
                axis: m.name.clone(),
                index: *o,
                size: m.cardinality,
            });
        }
    }
    Ok(())
}

/// Mean-field state inference by coordinate ascent:
/// `ln Q(s_f) = ln prior(s_f) + Σ_m E_{Q(s_¬f)}[ln A_m(o_m | ·)]`.
pub fn infer_state(
    model: &GenerativeModel,
    observation: &[usize],
    prior: &BeliefState,
    iterations: usize,
) -> Result<BeliefState> {
    check_obs(model, observation)?;
    let mut q = prior.clone();
    let nf = model.factors().len();
    let mut weights = Vec::new();
    for _ in 0..iterations.max(1) {
        for f in 0..nf {
            let card = model.factors()[f].cardinality;
            let mut logq: Vec<f64> = prior.factors[f]
                .probs()
                .iter()
                .map(|&p| ln_floor(p))
                .collect();
            for (m, &o) in observation.iter().enumerate() {
                let deps = model.modality_deps(m);
                let Some(pos) = deps.iter().position(|&d| d == f) else {
                    continue;
                };
                // weights over the dep configuration with factor f pinned
                // to uniform weight 1, so each config is weighted by the
                // other factors only
                let mut pinned = q.clone();
                pinned.factors[f] = Simplex::from_vec_unchecked(vec![1.0; card]);
                joint_weights(&pinned, deps, &mut weights);
                let inner: usize = deps[pos + 1..]
                    .iter()
                    .map(|&d| model.factors()[d].cardinality)
                    .product();
                let a = model.a()[m].values();
                let offset = o * weights.len();
                for (j, w) in weights.iter().enumerate() {
                    if *w == 0.0 {
                        continue;
                    }
                    let s = (j / inner) % card;
                    logq[s] += w * ln_floor(a[offset + j]);
                }
            }
            let post = softmax(&logq, 1.0)?;
            if post.probs().iter().all(|&p| p == 0.0) {
                return Err(Error::ZeroPosterior(f));
            }
            q.factors[f] = post;
        }
    }
    Ok(q)
}

/// One-step prediction under joint control `control`. Every factor reads its
/// dependencies from `belief` simultaneously.
pub fn predict(model: &GenerativeModel, belief: &BeliefState, control: usize) -> BeliefState {
    let mut weights = Vec::new();
    let factors = (0..model.factors().len())
        .map(|f| {
            joint_weights(belief, model.factor_deps(f), &mut weights);
            let b = model.b()[f].values();
            let nu = model.b()[f].axes().last().map_or(1, |a| a.size);
            let u = model.factor_control_index(f, control);
            let nj = weights.len();
            let card = model.factors()[f].cardinality;
            let next: Vec<f64> = (0..card)
                .map(|s| {
                    let row = s * nj;
                    weights
                        .iter()
                        .enumerate()
                        .map(|(j, w)| b[(row + j) * nu + u] * w)
                        .sum()
                })
                .collect();
            Simplex::from_vec_unchecked(next)
        })
        .collect();
    BeliefState { factors }
}

/// Predicted state marginals at step `tau` of `policy`, given the belief at
/// `tau - 1` (or the current belief when `tau == 0`).
pub fn expected_states(
    model: &GenerativeModel,
    belief: &BeliefState,
    policy: &Policy,
    tau: usize,
) -> Result<BeliefState> {
    let control = *policy.controls.get(tau).ok_or(Error::IndexOutOfRange {
        axis: "policy step".into(),
        index: tau,
        size: policy.len(),
    })?;
    Ok(predict(model, belief, control))
}

/// Predicted outcome distribution of every modality.
pub fn expected_obs(model: &GenerativeModel, belief: &BeliefState) -> Vec<Simplex> {
    let mut weights = Vec::new();
    (0..model.modalities().len())
        .map(|m| {
            joint_weights(belief, model.modality_deps(m), &mut weights);
            let a = model.a()[m].values();
            let nj = weights.len();
            let probs = (0..model.modalities()[m].cardinality)
                .map(|o| {
                    let row = &a[o * nj..(o + 1) * nj];
                    row.iter().zip(&weights).map(|(x, w)| x * w).sum()
                })
                .collect();
            Simplex::from_vec_unchecked(probs)
        })
        .collect()
}

/// Expected log-preference of the predicted outcomes.
pub fn utility(expected_obs: &[Simplex], c: &[Vec<f64>]) -> f64 {
    expected_obs
        .iter()
        .zip(c)
        .map(|(q, c)| q.probs().iter().zip(c).map(|(p, c)| p * c).sum::<f64>())
        .sum()
}

/// Expected KL between the posterior after seeing an outcome and the
/// prediction, per modality over the joint of its dependency factors, summed
/// over modalities.
pub fn state_info_gain(model: &GenerativeModel, belief_pred: &BeliefState) -> f64 {
    let mut weights = Vec::new();
    let mut post = Vec::new();
    let mut total = 0.0;
    for m in 0..model.modalities().len() {
        joint_weights(belief_pred, model.modality_deps(m), &mut weights);
        let a = model.a()[m].values();
        let nj = weights.len();
        for o in 0..model.modalities()[m].cardinality {
            let row = &a[o * nj..(o + 1) * nj];
            post.clear();
            post.extend(row.iter().zip(&weights).map(|(x, w)| x * w));
            let qo: f64 = post.iter().sum();
            if qo <= 0.0 {
                continue;
            }
            post.iter_mut().for_each(|p| *p /= qo);
            total += qo * kl_slices(&post, &weights);
        }
    }
    total.max(0.0)
}

/// Novelty weights for every learnable factor, `None` where B is fixed.
pub fn novelty_weights(model: &GenerativeModel) -> Vec<Option<DenseTensor>> {
    model.pb().iter().map(|pb| pb.as_ref().map(wnorm)).collect()
}

/// Expected information gain about the transition parameters from taking
/// `control` when the belief moves from `belief_prev` to `belief_pred`.
pub fn param_info_gain(
    model: &GenerativeModel,
    belief_prev: &BeliefState,
    belief_pred: &BeliefState,
    control: usize,
) -> f64 {
    param_info_gain_with(
        model,
        &novelty_weights(model),
        belief_prev,
        belief_pred,
        control,
    )
}

fn param_info_gain_with(
    model: &GenerativeModel,
    novelty: &[Option<DenseTensor>],
    belief_prev: &BeliefState,
    belief_pred: &BeliefState,
    control: usize,
) -> f64 {
    let mut weights = Vec::new();
    let mut total = 0.0;
    for (f, w) in novelty.iter().enumerate() {
        let Some(w) = w else { continue };
        joint_weights(belief_prev, model.factor_deps(f), &mut weights);
        let w = w.values();
        let nu = model.b()[f].axes().last().map_or(1, |a| a.size);
        let u = model.factor_control_index(f, control);
        let nj = weights.len();
        for (s, qs) in belief_pred.factors[f].probs().iter().enumerate() {
            if *qs == 0.0 {
                continue;
            }
            let row = s * nj;
            let inner: f64 = weights
                .iter()
                .enumerate()
                .map(|(j, wd)| w[(row + j) * nu + u] * wd)
                .sum();
            total += qs * inner;
        }
    }
    total
}

struct StepTerms {
    belief: BeliefState,
    utility: f64,
    state_ig: f64,
    param_ig: f64,
}

fn step_terms(
    model: &GenerativeModel,
    novelty: &[Option<DenseTensor>],
    config: &AgentConfig,
    prev: &BeliefState,
    control: usize,
) -> StepTerms {
    let belief = predict(model, prev, control);
    let qo = expected_obs(model, &belief);
    let utility = utility(&qo, model.c());
    let state_ig = if config.use_state_ig {
        state_info_gain(model, &belief)
    } else {
        0.0
    };
    let param_ig = if config.use_param_ig {
        param_info_gain_with(model, novelty, prev, &belief, control)
    } else {
        0.0
    };
    StepTerms {
        belief,
        utility,
        state_ig,
        param_ig,
    }
}

/// Rolls every policy forward from `belief_now` and scores it.
///
/// Rollouts of consecutive policies that share a prefix reuse the prefix's
/// predictions, which for the lexicographic enumeration cuts the work from
/// `n * T` to roughly `n * 4/3` step evaluations.
pub fn evaluate_policies(
    model: &GenerativeModel,
    belief_now: &BeliefState,
    policies: &[Policy],
    config: &AgentConfig,
) -> Vec<PolicyEvaluation> {
    let novelty = if config.use_param_ig {
        novelty_weights(model)
    } else {
        vec![None; model.factors().len()]
    };
    let mut stack: Vec<StepTerms> = Vec::new();
    let mut last: &[usize] = &[];
    let mut out = Vec::with_capacity(policies.len());
    for (index, policy) in policies.iter().enumerate() {
        let shared = last
            .iter()
            .zip(&policy.controls)
            .take_while(|(a, b)| a == b)
            .count();
        stack.truncate(shared);
        for &u in &policy.controls[shared..] {
            let prev = stack.last().map_or(belief_now, |t| &t.belief);
            let terms = step_terms(model, &novelty, config, prev, u);
            stack.push(terms);
        }
        last = &policy.controls;
        let mut g = 0.0;
        for t in &stack {
            g += t.utility + t.state_ig + t.param_ig;
        }
        out.push(PolicyEvaluation {
            policy_index: index,
            policy: policy.clone(),
            utility: stack.iter().map(|t| t.utility).collect(),
            state_ig: stack.iter().map(|t| t.state_ig).collect(),
            param_ig: stack.iter().map(|t| t.param_ig).collect(),
            g,
        });
    }
    out
}

/// Posterior over policies, `softmax(gamma * G)`.
pub fn policy_posterior(evaluations: &[PolicyEvaluation], gamma: f64) -> Result<Simplex> {
    let g: Vec<f64> = evaluations.iter().map(|e| e.g).collect();
    softmax(&g, gamma)
}

/// Picks a policy and returns its index into `evaluations`.
pub fn select_policy<R: Rng + ?Sized>(
    evaluations: &[PolicyEvaluation],
    config: &AgentConfig,
    rng: &mut R,
) -> Result<usize> {
    if evaluations.is_empty() {
        return Err(Error::InvalidModel("no policies to select from".into()));
    }
    match config.action_selection {
        ActionSelection::Argmax => {
            let mut best = 0;
            for (i, e) in evaluations.iter().enumerate() {
                if e.g > evaluations[best].g {
                    best = i;
                }
            }
            Ok(best)
        }
        ActionSelection::Sample => {
            let q = policy_posterior(evaluations, config.gamma)?;
            let r: f64 = rng.random();
            let mut acc = 0.0;
            for (i, p) in q.probs().iter().enumerate() {
                acc += p;
                if r < acc {
                    return Ok(i);
                }
            }
            // r landed in the rounding gap at the top of the cumulative sum
            Ok(q.probs()
                .iter()
                .rposition(|&p| p > 0.0)
                .unwrap_or(evaluations.len() - 1))
        }
    }
}

/// First control of the selected policy.
pub fn select_action<R: Rng + ?Sized>(
    evaluations: &[PolicyEvaluation],
    config: &AgentConfig,
    rng: &mut R,
) -> Result<usize> {
    let i = select_policy(evaluations, config, rng)?;
    Ok(evaluations[i].policy.first())
}

/// Count-based Dirichlet update of every learnable transition factor:
/// `α[s', deps, u] += η Q_now(s') Π_d Q_prev(s_d)` in the slice of the
/// control actually taken. `B` is refreshed to the new mean.
pub fn update_dirichlet(
    model: &mut GenerativeModel,
    control: usize,
    belief_prev: &BeliefState,
    belief_now: &BeliefState,
    eta: f64,
) {
    if eta == 0.0 {
        return;
    }
    let mut weights = Vec::new();
    for f in 0..model.factors().len() {
        if model.pb()[f].is_none() {
            continue;
        }
        joint_weights(belief_prev, model.factor_deps(f), &mut weights);
        let u = model.factor_control_index(f, control);
        let next = belief_now.factors[f].probs().to_vec();
        let pb = model.pb_mut(f).expect("checked above");
        let nu = pb.axes().last().map_or(1, |a| a.size);
        let nj = weights.len();
        let alpha = pb.values_mut();
        for (s, qs) in next.iter().enumerate() {
            for (j, w) in weights.iter().enumerate() {
                alpha[(s * nj + j) * nu + u] += eta * qs * w;
            }
        }
        model.refresh_b(f);
    }
}

/// Learned probability `P(next = to_state | deps = dep_states, control)`,
/// read from the Dirichlet mean when transitions are learnable and from `B`
/// otherwise. `dep_states` follows the factor's declared dependency order.
pub fn probe_transition(
    model: &GenerativeModel,
    factor: usize,
    dep_states: &[usize],
    control: usize,
    to_state: usize,
) -> Result<f64> {
    if factor >= model.factors().len() {
        return Err(Error::IndexOutOfRange {
            axis: "factor".into(),
            index: factor,
            size: model.factors().len(),
        });
    }
    let u = model.factor_control_index(factor, control);
    let mut index = Vec::with_capacity(dep_states.len() + 2);
    index.push(to_state);
    index.extend_from_slice(dep_states);
    index.push(u);
    match &model.pb()[factor] {
        Some(pb) => {
            let a = pb.get(&index)?;
            let card = model.factors()[factor].cardinality;
            let mut total = 0.0;
            for s in 0..card {
                index[0] = s;
                total += pb.get(&index)?;
            }
            Ok(a / total)
        }
        None => model.b()[factor].get(&index),
    }
}

/// An agent: a generative model plus the running beliefs about the current
/// state.
#[derive(Clone, Debug)]
pub struct Agent {
    pub model: GenerativeModel,
    pub config: AgentConfig,
    policies: Vec<Policy>,
    belief: BeliefState,
    prev_belief: Option<BeliefState>,
    last_control: Option<usize>,
}

impl Agent {
    pub fn new(model: GenerativeModel, config: AgentConfig) -> Result<Self> {
        config.validate()?;
        let policies = enumerate_policies(&model, config.policy_len);
        let belief = BeliefState::prior(&model);
        Ok(Self {
            model,
            config,
            policies,
            belief,
            prev_belief: None,
            last_control: None,
        })
    }

    pub fn policies(&self) -> &[Policy] {
        &self.policies
    }

    pub fn belief(&self) -> &BeliefState {
        &self.belief
    }

    /// Starts a new episode: beliefs return to `D`, learned parameters stay.
    pub fn reset_episode(&mut self) {
        self.belief = BeliefState::prior(&self.model);
        self.prev_belief = None;
        self.last_control = None;
    }

    /// Infers the current state from an observation, then (if enabled)
    /// learns from the transition that produced it.
    pub fn observe(&mut self, observation: &[usize]) -> Result<&BeliefState> {
        let prior = match self.last_control {
            Some(u) => predict(&self.model, &self.belief, u),
            None => self.belief.clone(),
        };
        let posterior = infer_state(
            &self.model,
            observation,
            &prior,
            self.config.inference_iters,
        )?;
        let prev = std::mem::replace(&mut self.belief, posterior);
        if let Some(u) = self.last_control {
            if self.config.learn_b {
                update_dirichlet(&mut self.model, u, &prev, &self.belief, self.config.eta);
            }
            self.prev_belief = Some(prev);
        }
        Ok(&self.belief)
    }

    pub fn evaluate(&self) -> Vec<PolicyEvaluation> {
        evaluate_policies(&self.model, &self.belief, &self.policies, &self.config)
    }

    /// Chooses a policy, remembers its first control for the next
    /// observation, and returns (policy index, control).
    pub fn act<R: Rng + ?Sized>(
        &mut self,
        evaluations: &[PolicyEvaluation],
        rng: &mut R,
    ) -> Result<(usize, usize)> {
        let i = select_policy(evaluations, &self.config, rng)?;
        let u = evaluations[i].policy.first();
        self.last_control = Some(u);
        Ok((i, u))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::categorical::{Axis, CategoricalTensor, DirichletTensor};
    use crate::env::{Action, RewardLocation, Room, Tool};
    use crate::model::{
        build_tool_state_model, set_uniform_transition_prior, ControlSpec, FactorSpec, ModalitySpec,
    };
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// One binary factor, one binary modality with likelihood `a` (row-major
    /// over (obs, state)), one control with two states.
    fn tiny_model(a: [f64; 4], b: Vec<f64>) -> GenerativeModel {
        let factors = vec![FactorSpec {
            name: "S".into(),
            cardinality: 2,
            transition_deps: vec!["S".into()],
            controlled_by: Some("U".into()),
        }];
        let modalities = vec![ModalitySpec {
            name: "O".into(),
            cardinality: 2,
            obs_deps: vec!["S".into()],
        }];
        let controls = vec![ControlSpec {
            name: "U".into(),
            cardinality: 2,
        }];
        let a = CategoricalTensor::new(
            DenseTensor::new(vec![Axis::new("obs:O", 2), Axis::new("S", 2)], a.to_vec()).unwrap(),
            0,
        )
        .unwrap();
        let b = CategoricalTensor::new(
            DenseTensor::new(
                vec![Axis::new("S'", 2), Axis::new("S", 2), Axis::new("U", 2)],
                b,
            )
            .unwrap(),
            0,
        )
        .unwrap();
        GenerativeModel::new(
            factors,
            modalities,
            controls,
            vec![a],
            vec![b],
            vec![vec![0.0, 1.0]],
            vec![Simplex::uniform(2)],
        )
        .unwrap()
    }

    fn identity_b() -> Vec<f64> {
        // B[s', s, u] = [s' == s]
        vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0]
    }

    fn belief(ps: &[&[f64]]) -> BeliefState {
        BeliefState::new(
            ps.iter()
                .map(|p| Simplex::new(p.to_vec()).unwrap())
                .collect(),
        )
    }

    fn tool_model(loc: RewardLocation) -> GenerativeModel {
        build_tool_state_model(loc).unwrap()
    }

    #[test]
    fn inference_identity_likelihood_collapses() {
        let m = tool_model(RewardLocation::NorthRight);
        let prior = belief(&[&[0.3, 0.7], &[0.1, 0.2, 0.3, 0.4]]);
        let obs = [Room::Right.index(), Tool::V.index(), 1];
        let q = infer_state(&m, &obs, &prior, 6).unwrap();
        assert_abs_diff_eq!(q.factors[0].probs()[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q.factors[1].probs()[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn inference_uninformative_likelihood_keeps_prior() {
        let m = tiny_model([0.5, 0.5, 0.5, 0.5], identity_b());
        let prior = belief(&[&[0.2, 0.8]]);
        let q = infer_state(&m, &[1], &prior, 6).unwrap();
        assert_abs_diff_eq!(q.factors[0].probs()[0], 0.2, epsilon = 1e-12);
    }

    #[test]
    fn inference_noisy_likelihood_is_bayes() {
        // P(o=0|s=0)=0.9, P(o=0|s=1)=0.1
        let m = tiny_model([0.9, 0.1, 0.1, 0.9], identity_b());
        let q = infer_state(&m, &[0], &BeliefState::uniform(&m), 6).unwrap();
        assert_abs_diff_eq!(q.factors[0].probs()[0], 0.9, epsilon = 1e-12);
        assert!(matches!(
            infer_state(&m, &[2], &BeliefState::uniform(&m), 6),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn prediction_examples() {
        let m = tool_model(RewardLocation::NorthLeft);
        let start = BeliefState::prior(&m);
        let p = Policy {
            controls: vec![Action::PickUp.index()],
        };
        let next = expected_states(&m, &start, &p, 0).unwrap();
        assert_eq!(next.factors[0].probs(), &[1.0, 0.0]);
        assert_eq!(next.factors[1].probs(), &[0.0, 1.0, 0.0, 0.0]);

        let split = belief(&[&[0.5, 0.5], &[1.0, 0.0, 0.0, 0.0]]);
        let next = predict(&m, &split, Action::PickUp.index());
        assert_eq!(next.factors[1].probs(), &[0.0, 0.5, 0.5, 0.0]);
        let qo = expected_obs(&m, &next);
        assert_eq!(qo[1].probs(), &[0.0, 0.5, 0.5, 0.0]);
        assert_eq!(qo[0].probs(), &[0.5, 0.5]);

        let learn = set_uniform_transition_prior(&m, 1.0).unwrap();
        for u in 0..4 {
            let next = predict(&learn, &start, u);
            assert_eq!(next.factors[0].probs(), &[0.5, 0.5]);
            assert_eq!(next.factors[1].probs(), &[0.25; 4]);
        }
    }

    #[test]
    fn utility_examples() {
        let c = vec![vec![0.0, 50.0]];
        assert_eq!(utility(&[Simplex::delta(2, 1)], &c), 50.0);
        assert_eq!(utility(&[Simplex::delta(2, 0)], &c), 0.0);
        assert_eq!(utility(&[Simplex::uniform(2)], &c), 25.0);
        let m = tool_model(RewardLocation::NorthRight);
        let solved = belief(&[&[0.0, 1.0], &[0.0, 1.0, 0.0, 0.0]]);
        assert_eq!(expected_obs(&m, &solved)[2].probs(), &[0.0, 1.0]);
    }

    #[test]
    fn state_info_gain_examples() {
        let m = tiny_model([1.0, 0.0, 0.0, 1.0], identity_b());
        assert_eq!(state_info_gain(&m, &belief(&[&[1.0, 0.0]])), 0.0);
        assert_abs_diff_eq!(
            state_info_gain(&m, &BeliefState::uniform(&m)),
            std::f64::consts::LN_2,
            epsilon = 1e-12
        );
        let noise = tiny_model([0.5, 0.5, 0.5, 0.5], identity_b());
        assert_abs_diff_eq!(
            state_info_gain(&noise, &belief(&[&[0.3, 0.7]])),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn param_info_gain_examples() {
        let m = tiny_model([1.0, 0.0, 0.0, 1.0], identity_b());
        let d = belief(&[&[1.0, 0.0]]);
        assert_eq!(param_info_gain(&m, &d, &d, 0), 0.0);

        let mut learn = m.clone();
        let axes = learn.b()[0].axes().to_vec();
        learn
            .set_pb(0, DirichletTensor::filled(axes.clone(), 0, 1.0).unwrap())
            .unwrap();
        assert_abs_diff_eq!(param_info_gain(&learn, &d, &d, 0), 0.25, epsilon = 1e-12);

        learn
            .set_pb(0, DirichletTensor::filled(axes, 0, 1e6).unwrap())
            .unwrap();
        assert!(param_info_gain(&learn, &d, &d, 0) < 1e-6);
    }

    #[test]
    fn identical_consequences_give_identical_g() {
        // both controls act as identity
        let m = tiny_model([1.0, 0.0, 0.0, 1.0], identity_b());
        let cfg = AgentConfig {
            policy_len: 1,
            ..AgentConfig::default()
        };
        let pols = enumerate_policies(&m, 1);
        let ev = evaluate_policies(&m, &BeliefState::uniform(&m), &pols, &cfg);
        assert_eq!(ev.len(), 2);
        assert_eq!(ev[0].g, ev[1].g);
    }

    #[test]
    fn known_model_has_no_epistemic_terms() {
        for loc in RewardLocation::ALL {
            let m = tool_model(loc);
            let pols = enumerate_policies(&m, 4);
            let ev = evaluate_policies(&m, &BeliefState::prior(&m), &pols, &AgentConfig::default());
            for e in &ev {
                assert!(e.total_state_ig().abs() <= 1e-9);
                assert_eq!(e.total_param_ig(), 0.0);
            }
        }
    }

    #[test]
    fn north_right_best_policy_starts_pickup_move() {
        let m = tool_model(RewardLocation::NorthRight);
        let pols = enumerate_policies(&m, 4);
        let cfg = AgentConfig {
            action_selection: ActionSelection::Argmax,
            ..AgentConfig::default()
        };
        let ev = evaluate_policies(&m, &BeliefState::prior(&m), &pols, &cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let best = select_policy(&ev, &cfg, &mut rng).unwrap();
        assert_eq!(
            &ev[best].policy.controls[..2],
            &[Action::PickUp.index(), Action::Move.index()]
        );
    }

    /// Straight per-policy rollout without prefix sharing.
    fn naive_evaluate(m: &GenerativeModel, b0: &BeliefState, pols: &[Policy]) -> Vec<f64> {
        pols.iter()
            .map(|p| {
                let mut b = b0.clone();
                let mut g = 0.0;
                for &u in &p.controls {
                    let next = predict(m, &b, u);
                    let qo = expected_obs(m, &next);
                    g += utility(&qo, m.c())
                        + state_info_gain(m, &next)
                        + param_info_gain(m, &b, &next, u);
                    b = next;
                }
                g
            })
            .collect()
    }

    #[test]
    fn prefix_sharing_matches_naive_rollout() {
        let m = tool_model(RewardLocation::Northeast);
        let m = set_uniform_transition_prior(&m, 1.0).unwrap();
        let mut m2 = m.clone();
        let s0 = BeliefState::prior(&m);
        let s1 = predict(&tool_model(RewardLocation::Northeast), &s0, 2);
        update_dirichlet(&mut m2, 2, &s0, &s1, 1.0);
        let cfg = AgentConfig::default();
        let pols = enumerate_policies(&m2, 4);
        let ev = evaluate_policies(&m2, &s0, &pols, &cfg);
        let naive = naive_evaluate(&m2, &s0, &pols);
        for (e, n) in ev.iter().zip(&naive) {
            assert_abs_diff_eq!(e.g, *n, epsilon = 1e-9);
            let sum: f64 = (0..4)
                .map(|t| e.utility[t] + e.state_ig[t] + e.param_ig[t])
                .sum();
            assert_abs_diff_eq!(e.g, sum, epsilon = 1e-9);
        }
    }

    #[test]
    fn disabled_terms_are_zero() {
        let m = set_uniform_transition_prior(&tool_model(RewardLocation::East), 1.0).unwrap();
        let cfg = AgentConfig {
            use_state_ig: false,
            use_param_ig: false,
            ..AgentConfig::default()
        };
        let pols = enumerate_policies(&m, 2);
        let ev = evaluate_policies(&m, &BeliefState::prior(&m), &pols, &cfg);
        for e in ev {
            assert_eq!(e.total_info_gain(), 0.0);
            assert_eq!(e.g, e.total_utility());
        }
    }

    #[test]
    fn argmax_ties_break_low() {
        let m = tiny_model([1.0, 0.0, 0.0, 1.0], identity_b());
        let pols = enumerate_policies(&m, 4);
        let mut ev = evaluate_policies(
            &m,
            &BeliefState::uniform(&m),
            &pols,
            &AgentConfig::default(),
        );
        for e in ev.iter_mut() {
            e.g = 0.0;
        }
        ev[3].g = 1.0;
        ev[7].g = 1.0;
        let cfg = AgentConfig {
            action_selection: ActionSelection::Argmax,
            ..AgentConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(select_policy(&ev, &cfg, &mut rng).unwrap(), 3);
        assert_eq!(
            select_action(&ev, &cfg, &mut rng).unwrap(),
            ev[3].policy.first()
        );
    }

    #[test]
    fn dominant_policy_is_sampled() {
        let m = tool_model(RewardLocation::NorthLeft);
        let pols = enumerate_policies(&m, 4);
        let ev = evaluate_policies(&m, &BeliefState::prior(&m), &pols, &AgentConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let u = select_action(&ev, &AgentConfig::default(), &mut rng).unwrap();
            assert_eq!(u, Action::PickUp.index());
        }
        let q = policy_posterior(&ev, 16.0).unwrap();
        let equal: Vec<PolicyEvaluation> = ev
            .iter()
            .cloned()
            .map(|mut e| {
                e.g = 3.0;
                e
            })
            .collect();
        let u = policy_posterior(&equal, 16.0).unwrap();
        assert!(u.probs().iter().all(|&p| (p - 1.0 / 256.0).abs() < 1e-15));
        assert!((q.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dirichlet_update_examples() {
        let m = tiny_model([1.0, 0.0, 0.0, 1.0], identity_b());
        let mut learn = m.clone();
        let axes = learn.b()[0].axes().to_vec();
        learn
            .set_pb(0, DirichletTensor::filled(axes, 0, 1.0).unwrap())
            .unwrap();

        let prev = belief(&[&[1.0, 0.0]]);
        let now = belief(&[&[0.0, 1.0]]);
        let mut once = learn.clone();
        update_dirichlet(&mut once, 1, &prev, &now, 1.0);
        let pb = once.pb()[0].as_ref().unwrap();
        // column (s=0, u=1) becomes (1, 2); everything else untouched
        assert_eq!(pb.get(&[0, 0, 1]).unwrap(), 1.0);
        assert_eq!(pb.get(&[1, 0, 1]).unwrap(), 2.0);
        let total: f64 = pb.values().iter().sum();
        assert_eq!(total, 8.0 + 1.0);
        assert_abs_diff_eq!(once.b()[0].get(&[1, 0, 1]).unwrap(), 2.0 / 3.0);
        assert!(once.validate().is_empty());

        let mut frozen = learn.clone();
        update_dirichlet(&mut frozen, 1, &prev, &now, 0.0);
        assert_eq!(frozen, learn);

        let mut soft = learn.clone();
        update_dirichlet(&mut soft, 0, &belief(&[&[0.5, 0.5]]), &now, 1.0);
        let pb = soft.pb()[0].as_ref().unwrap();
        assert_eq!(pb.get(&[1, 0, 0]).unwrap(), 1.5);
        assert_eq!(pb.get(&[1, 1, 0]).unwrap(), 1.5);
        assert_eq!(pb.get(&[0, 0, 0]).unwrap(), 1.0);
    }

    #[test]
    fn probe_examples() {
        let known = tool_model(RewardLocation::NorthRight);
        let m = set_uniform_transition_prior(&known, 1.0).unwrap();
        let tool = 1;
        let dep = [Tool::Null.index(), Room::Left.index()];
        let p = probe_transition(&m, tool, &dep, Action::PickUp.index(), Tool::V.index()).unwrap();
        assert_eq!(p, 0.25);

        let prev = BeliefState::prior(&m);
        let now = predict(&known, &prev, Action::PickUp.index());
        let mut learned = m.clone();
        let mut last = p;
        for k in 0..40 {
            update_dirichlet(&mut learned, Action::PickUp.index(), &prev, &now, 1.0);
            let p = probe_transition(
                &learned,
                tool,
                &dep,
                Action::PickUp.index(),
                Tool::V.index(),
            )
            .unwrap();
            if k == 0 {
                assert_abs_diff_eq!(p, 0.4, epsilon = 1e-12);
            }
            assert!(p > last);
            last = p;
        }
        assert!(last > 0.9);
        assert!(matches!(
            probe_transition(&m, tool, &dep, 0, 7),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert_eq!(
            probe_transition(&known, tool, &dep, Action::PickUp.index(), Tool::V.index()).unwrap(),
            1.0
        );
    }
}
