//! Factored generative models: likelihoods (A), transitions (B), preferences
//! (C), initial-state priors (D) and optional Dirichlet beliefs over A and B.
//!
//! Tensor layouts:
//! - `A[m]` has axes `(outcome, obs_deps...)`.
//! - `B[f]` has axes `(next, transition_deps..., control)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::categorical::{
    dirichlet_mean, Axis, CategoricalTensor, DenseTensor, DirichletTensor, Simplex, SUM_TOLERANCE,
};
use crate::env::{transition, Action, RewardLocation, RewardRule, Room, Tool};
use crate::error::{Error, Result};

/// Log-preference for observing the reward.
pub const REWARD_PREFERENCE: f64 = 50.0;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactorSpec {
    pub name: String,
    pub cardinality: usize,
    pub transition_deps: Vec<String>,
    pub controlled_by: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModalitySpec {
    pub name: String,
    pub cardinality: usize,
    pub obs_deps: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ControlSpec {
    pub name: String,
    pub cardinality: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelVariant {
    ToolState,
    Affordance,
}

impl ModelVariant {
    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::ToolState => "tool_state",
            ModelVariant::Affordance => "affordance",
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "tool_state" | "toolstate" => Ok(ModelVariant::ToolState),
            "affordance" => Ok(ModelVariant::Affordance),
            _ => Err(format!("unknown model variant `{s}`")),
        }
    }
}

/// A fixed sequence of joint control indices, one per future step.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Policy {
    pub controls: Vec<usize>,
}

impl Policy {
    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    pub fn first(&self) -> usize {
        self.controls[0]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    InvalidSpec(String),
    SchemaMismatch { tensor: String, detail: String },
    StochasticityViolation { tensor: String, detail: String },
    PriorMismatch { tensor: String },
    PreferenceLength { modality: String },
    InitialPrior { factor: String, detail: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InvalidSpec(d) => write!(f, "invalid spec: {d}"),
            Violation::SchemaMismatch { tensor, detail } => {
                write!(f, "{tensor}: schema mismatch ({detail})")
            }
            Violation::StochasticityViolation { tensor, detail } => {
                write!(f, "{tensor}: not stochastic ({detail})")
            }
            Violation::PriorMismatch { tensor } => {
                write!(f, "{tensor}: Dirichlet mean differs from the categorical")
            }
            Violation::PreferenceLength { modality } => {
                write!(
                    f,
                    "C[{modality}] length does not match modality cardinality"
                )
            }
            Violation::InitialPrior { factor, detail } => write!(f, "D[{factor}]: {detail}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerativeModel {
    factors: Vec<FactorSpec>,
    modalities: Vec<ModalitySpec>,
    controls: Vec<ControlSpec>,
    a: Vec<CategoricalTensor>,
    b: Vec<CategoricalTensor>,
    c: Vec<Vec<f64>>,
    d: Vec<Simplex>,
    pa: Vec<Option<DirichletTensor>>,
    pb: Vec<Option<DirichletTensor>>,
    // resolved indices
    factor_deps: Vec<Vec<usize>>,
    factor_control: Vec<Option<usize>>,
    modality_deps: Vec<Vec<usize>>,
}

fn resolve(names: &[String], factors: &[FactorSpec]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| {
            factors
                .iter()
                .position(|f| &f.name == n)
                .ok_or_else(|| Error::UnknownFactor(n.clone()))
        })
        .collect()
}

impl GenerativeModel {
    /// Assembles a model, resolving dependency names. Numerical invariants
    /// are checked separately by [`GenerativeModel::validate`].
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        factors: Vec<FactorSpec>,
        modalities: Vec<ModalitySpec>,
        controls: Vec<ControlSpec>,
        a: Vec<CategoricalTensor>,
        b: Vec<CategoricalTensor>,
        c: Vec<Vec<f64>>,
        d: Vec<Simplex>,
    ) -> Result<Self> {
        if a.len() != modalities.len() || c.len() != modalities.len() {
            return Err(Error::InvalidModel("one A and one C per modality".into()));
        }
        if b.len() != factors.len() || d.len() != factors.len() {
            return Err(Error::InvalidModel("one B and one D per factor".into()));
        }
        let factor_deps = factors
            .iter()
            .map(|f| resolve(&f.transition_deps, &factors))
            .collect::<Result<Vec<_>>>()?;
        let modality_deps = modalities
            .iter()
            .map(|m| resolve(&m.obs_deps, &factors))
            .collect::<Result<Vec<_>>>()?;
        let factor_control = factors
            .iter()
            .map(|f| match &f.controlled_by {
                None => Ok(None),
                Some(c) => controls
                    .iter()
                    .position(|k| &k.name == c)
                    .map(Some)
                    .ok_or_else(|| Error::InvalidModel(format!("unknown control `{c}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let nf = factors.len();
        let nm = modalities.len();
        Ok(Self {
            factors,
            modalities,
            controls,
            a,
            b,
            c,
            d,
            pa: vec![None; nm],
            pb: vec![None; nf],
            factor_deps,
            factor_control,
            modality_deps,
        })
    }

    pub fn factors(&self) -> &[FactorSpec] {
        &self.factors
    }

    pub fn modalities(&self) -> &[ModalitySpec] {
        &self.modalities
    }

    pub fn controls(&self) -> &[ControlSpec] {
        &self.controls
    }

    pub fn a(&self) -> &[CategoricalTensor] {
        &self.a
    }

    pub fn b(&self) -> &[CategoricalTensor] {
        &self.b
    }

    pub fn c(&self) -> &[Vec<f64>] {
        &self.c
    }

    pub fn d(&self) -> &[Simplex] {
        &self.d
    }

    pub fn pa(&self) -> &[Option<DirichletTensor>] {
        &self.pa
    }

    pub fn pb(&self) -> &[Option<DirichletTensor>] {
        &self.pb
    }

    pub fn learns_transitions(&self) -> bool {
        self.pb.iter().any(Option::is_some)
    }

    pub fn factor_index(&self, name: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| Error::UnknownFactor(name.to_string()))
    }

    pub fn modality_index(&self, name: &str) -> Option<usize> {
        self.modalities.iter().position(|m| m.name == name)
    }

    pub fn factor_deps(&self, factor: usize) -> &[usize] {
        &self.factor_deps[factor]
    }

    pub fn modality_deps(&self, modality: usize) -> &[usize] {
        &self.modality_deps[modality]
    }

    /// Number of joint control states (product over control factors).
    pub fn num_joint_controls(&self) -> usize {
        self.controls.iter().map(|c| c.cardinality).product()
    }

    /// Component of a joint control index that drives `factor`'s transitions.
    /// Uncontrolled factors always use control slice 0.
    pub fn factor_control_index(&self, factor: usize, joint: usize) -> usize {
        match self.factor_control[factor] {
            None => 0,
            Some(k) => {
                let inner: usize = self.controls[k + 1..]
                    .iter()
                    .map(|c| c.cardinality)
                    .product();
                (joint / inner) % self.controls[k].cardinality
            }
        }
    }

    pub fn set_b(&mut self, factor: usize, b: CategoricalTensor) {
        self.b[factor] = b;
    }

    pub fn set_d(&mut self, factor: usize, d: Simplex) {
        self.d[factor] = d;
    }

    pub fn set_c(&mut self, modality: usize, c: Vec<f64>) {
        self.c[modality] = c;
    }

    /// Installs a Dirichlet belief over `B[factor]` and refreshes `B` to its
    /// mean.
    pub fn set_pb(&mut self, factor: usize, pb: DirichletTensor) -> Result<()> {
        if pb.axes() != self.b[factor].axes() {
            return Err(Error::InvalidModel(format!(
                "pB axes do not match B[{}]",
                self.factors[factor].name
            )));
        }
        self.b[factor] = dirichlet_mean(&pb);
        self.pb[factor] = Some(pb);
        Ok(())
    }

    /// Replaces the Dirichlet belief without touching `B`; lets tests build
    /// inconsistent models.
    pub fn set_pb_unchecked(&mut self, factor: usize, pb: Option<DirichletTensor>) {
        self.pb[factor] = pb;
    }

    pub fn set_pa(&mut self, modality: usize, pa: DirichletTensor) -> Result<()> {
        if pa.axes() != self.a[modality].axes() {
            return Err(Error::InvalidModel(format!(
                "pA axes do not match A[{}]",
                self.modalities[modality].name
            )));
        }
        self.a[modality] = dirichlet_mean(&pa);
        self.pa[modality] = Some(pa);
        Ok(())
    }

    pub(crate) fn pb_mut(&mut self, factor: usize) -> Option<&mut DirichletTensor> {
        self.pb[factor].as_mut()
    }

    pub(crate) fn refresh_b(&mut self, factor: usize) {
        if let Some(pb) = &self.pb[factor] {
            self.b[factor] = dirichlet_mean(pb);
        }
    }

    /// Axis schema `B[factor]` must have.
    pub fn expected_b_axes(&self, factor: usize) -> Vec<Axis> {
        let f = &self.factors[factor];
        let mut axes = vec![Axis::new(format!("{}'", f.name), f.cardinality)];
        for &d in &self.factor_deps[factor] {
            axes.push(Axis::new(
                self.factors[d].name.clone(),
                self.factors[d].cardinality,
            ));
        }
        match self.factor_control[factor] {
            Some(k) => axes.push(Axis::new(
                self.controls[k].name.clone(),
                self.controls[k].cardinality,
            )),
            None => axes.push(Axis::new("control", 1)),
        }
        axes
    }

    /// Axis schema `A[modality]` must have.
    pub fn expected_a_axes(&self, modality: usize) -> Vec<Axis> {
        let m = &self.modalities[modality];
        let mut axes = vec![Axis::new(format!("obs:{}", m.name), m.cardinality)];
        for &d in &self.modality_deps[modality] {
            axes.push(Axis::new(
                self.factors[d].name.clone(),
                self.factors[d].cardinality,
            ));
        }
        axes
    }

    /// Lists every violated invariant; empty means the model is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        for f in &self.factors {
            if f.cardinality < 2 {
                out.push(Violation::InvalidSpec(format!(
                    "factor {} has cardinality < 2",
                    f.name
                )));
            }
            if !f.transition_deps.contains(&f.name) {
                out.push(Violation::InvalidSpec(format!(
                    "factor {} does not depend on itself",
                    f.name
                )));
            }
            for (i, d) in f.transition_deps.iter().enumerate() {
                if f.transition_deps[..i].contains(d) {
                    out.push(Violation::InvalidSpec(format!(
                        "factor {} lists {d} twice",
                        f.name
                    )));
                }
            }
        }
        for m in &self.modalities {
            if m.cardinality < 2 {
                out.push(Violation::InvalidSpec(format!(
                    "modality {} has cardinality < 2",
                    m.name
                )));
            }
            if m.obs_deps.is_empty() {
                out.push(Violation::InvalidSpec(format!(
                    "modality {} has no deps",
                    m.name
                )));
            }
        }
        for (i, a) in self.a.iter().enumerate() {
            let name = format!("A[{}]", self.modalities[i].name);
            if a.axes() != self.expected_a_axes(i).as_slice() || a.norm_axis() != 0 {
                out.push(Violation::SchemaMismatch {
                    tensor: name.clone(),
                    detail: format!("{:?}", a.axes()),
                });
            } else if let Some(detail) = a.check() {
                out.push(Violation::StochasticityViolation {
                    tensor: name.clone(),
                    detail,
                });
            }
            if let Some(pa) = &self.pa[i] {
                if !close(dirichlet_mean(pa).values(), a.values()) {
                    out.push(Violation::PriorMismatch {
                        tensor: format!("p{name}"),
                    });
                }
            }
        }
        for (i, b) in self.b.iter().enumerate() {
            let name = format!("B[{}]", self.factors[i].name);
            if b.axes() != self.expected_b_axes(i).as_slice() || b.norm_axis() != 0 {
                out.push(Violation::SchemaMismatch {
                    tensor: name.clone(),
                    detail: format!("{:?}", b.axes()),
                });
            } else if let Some(detail) = b.check() {
                out.push(Violation::StochasticityViolation {
                    tensor: name.clone(),
                    detail,
                });
            }
            if let Some(pb) = &self.pb[i] {
                if pb.axes() != b.axes() || !close(dirichlet_mean(pb).values(), b.values()) {
                    out.push(Violation::PriorMismatch {
                        tensor: format!("p{name}"),
                    });
                }
            }
        }
        for (i, c) in self.c.iter().enumerate() {
            if c.len() != self.modalities[i].cardinality {
                out.push(Violation::PreferenceLength {
                    modality: self.modalities[i].name.clone(),
                });
            }
        }
        for (i, d) in self.d.iter().enumerate() {
            if d.len() != self.factors[i].cardinality {
                out.push(Violation::InitialPrior {
                    factor: self.factors[i].name.clone(),
                    detail: "length does not match factor cardinality".into(),
                });
            }
        }
        out
    }
}

fn close(x: &[f64], y: &[f64]) -> bool {
    x.len() == y.len() && x.iter().zip(y).all(|(a, b)| (a - b).abs() <= SUM_TOLERANCE)
}

fn factor(name: &str, cardinality: usize, deps: &[&str]) -> FactorSpec {
    FactorSpec {
        name: name.into(),
        cardinality,
        transition_deps: deps.iter().map(|d| d.to_string()).collect(),
        controlled_by: Some("Action".into()),
    }
}

fn modality(name: &str, cardinality: usize, deps: &[&str]) -> ModalitySpec {
    ModalitySpec {
        name: name.into(),
        cardinality,
        obs_deps: deps.iter().map(|d| d.to_string()).collect(),
    }
}

/// Fills a categorical tensor from a deterministic map `index -> outcome`,
/// where `index` excludes the leading outcome axis.
fn deterministic(
    axes: Vec<Axis>,
    outcome: impl Fn(&[usize]) -> usize,
) -> Result<CategoricalTensor> {
    let mut t = DenseTensor::filled(axes.clone(), 0.0)?;
    let cond: Vec<usize> = axes[1..].iter().map(|a| a.size).collect();
    let mut idx = vec![0; cond.len()];
    loop {
        let o = outcome(&idx);
        let mut full = Vec::with_capacity(idx.len() + 1);
        full.push(o);
        full.extend_from_slice(&idx);
        t.set(&full, 1.0)?;
        if !advance(&mut idx, &cond) {
            break;
        }
    }
    CategoricalTensor::new(t, 0)
}

/// Increments a row-major multi-index; returns false after the last one.
pub(crate) fn advance(idx: &mut [usize], sizes: &[usize]) -> bool {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < sizes[k] {
            return true;
        }
        idx[k] = 0;
    }
    false
}

fn preferences() -> Vec<Vec<f64>> {
    vec![vec![0.0; 2], vec![0.0; 4], vec![0.0, REWARD_PREFERENCE]]
}

fn action(u: usize) -> Action {
    Action::from_index(u).expect("control index within Action::ALL")
}

/// Tool State model with fully known transitions and no learnable priors.
pub fn build_tool_state_model(location: RewardLocation) -> Result<GenerativeModel> {
    build_tool_state_model_with(location, RewardRule::ExactMatch)
}

pub fn build_tool_state_model_with(
    location: RewardLocation,
    rule: RewardRule,
) -> Result<GenerativeModel> {
    let factors = vec![
        factor("Room", 2, &["Room"]),
        factor("Tool", 4, &["Tool", "Room"]),
    ];
    let modalities = vec![
        modality("Room", 2, &["Room"]),
        modality("Tool", 4, &["Tool"]),
        modality("Reward", 2, &["Room", "Tool"]),
    ];
    let controls = vec![ControlSpec {
        name: "Action".into(),
        cardinality: Action::ALL.len(),
    }];
    let ax = |n: &str, k| Axis::new(n, k);
    let a = vec![
        deterministic(vec![ax("obs:Room", 2), ax("Room", 2)], |i| i[0])?,
        deterministic(vec![ax("obs:Tool", 4), ax("Tool", 4)], |i| i[0])?,
        deterministic(
            vec![ax("obs:Reward", 2), ax("Room", 2), ax("Tool", 4)],
            |i| {
                let room = Room::from_index(i[0]).unwrap();
                let tool = Tool::from_index(i[1]).unwrap();
                rule.solves(location, room, tool) as usize
            },
        )?,
    ];
    let b = vec![
        deterministic(vec![ax("Room'", 2), ax("Room", 2), ax("Action", 4)], |i| {
            // room dynamics do not depend on the tool
            transition(Room::from_index(i[0]).unwrap(), Tool::Null, action(i[1]))
                .0
                .index()
        })?,
        deterministic(
            vec![
                ax("Tool'", 4),
                ax("Tool", 4),
                ax("Room", 2),
                ax("Action", 4),
            ],
            |i| {
                let tool = Tool::from_index(i[0]).unwrap();
                let room = Room::from_index(i[1]).unwrap();
                transition(room, tool, action(i[2])).1.index()
            },
        )?,
    ];
    let d = vec![
        Simplex::delta(2, Room::Left.index()),
        Simplex::delta(4, Tool::Null.index()),
    ];
    GenerativeModel::new(factors, modalities, controls, a, b, preferences(), d)
}

/// Affordance model: the tool is represented by two binary reach factors.
/// Horizontal reach comes from H, vertical reach from V.
pub fn build_affordance_model(location: RewardLocation) -> Result<GenerativeModel> {
    build_affordance_model_with(location, RewardRule::ExactMatch)
}

pub fn build_affordance_model_with(
    location: RewardLocation,
    rule: RewardRule,
) -> Result<GenerativeModel> {
    let factors = vec![
        factor("Room", 2, &["Room"]),
        factor("XReach", 2, &["XReach", "Room"]),
        factor("YReach", 2, &["YReach", "Room"]),
    ];
    let modalities = vec![
        modality("Room", 2, &["Room"]),
        modality("Tool", 4, &["XReach", "YReach"]),
        modality("Reward", 2, &["Room", "XReach", "YReach"]),
    ];
    let controls = vec![ControlSpec {
        name: "Action".into(),
        cardinality: Action::ALL.len(),
    }];
    let ax = |n: &str, k| Axis::new(n, k);
    let a = vec![
        deterministic(vec![ax("obs:Room", 2), ax("Room", 2)], |i| i[0])?,
        deterministic(
            vec![ax("obs:Tool", 4), ax("XReach", 2), ax("YReach", 2)],
            |i| Tool::from_reach(i[0] == 1, i[1] == 1).index(),
        )?,
        deterministic(
            vec![
                ax("obs:Reward", 2),
                ax("Room", 2),
                ax("XReach", 2),
                ax("YReach", 2),
            ],
            |i| {
                let room = Room::from_index(i[0]).unwrap();
                let tool = Tool::from_reach(i[1] == 1, i[2] == 1);
                rule.solves(location, room, tool) as usize
            },
        )?,
    ];
    // Each reach evolves independently of the other, so the other reach is
    // fixed at 0 when reading the dynamics off the grid.
    let b = vec![
        deterministic(vec![ax("Room'", 2), ax("Room", 2), ax("Action", 4)], |i| {
            transition(Room::from_index(i[0]).unwrap(), Tool::Null, action(i[1]))
                .0
                .index()
        })?,
        deterministic(
            vec![
                ax("XReach'", 2),
                ax("XReach", 2),
                ax("Room", 2),
                ax("Action", 4),
            ],
            |i| {
                let tool = Tool::from_reach(i[0] == 1, false);
                let room = Room::from_index(i[1]).unwrap();
                transition(room, tool, action(i[2])).1.x_reach() as usize
            },
        )?,
        deterministic(
            vec![
                ax("YReach'", 2),
                ax("YReach", 2),
                ax("Room", 2),
                ax("Action", 4),
            ],
            |i| {
                let tool = Tool::from_reach(false, i[0] == 1);
                let room = Room::from_index(i[1]).unwrap();
                transition(room, tool, action(i[2])).1.y_reach() as usize
            },
        )?,
    ];
    let d = vec![
        Simplex::delta(2, Room::Left.index()),
        Simplex::delta(2, 0),
        Simplex::delta(2, 0),
    ];
    GenerativeModel::new(factors, modalities, controls, a, b, preferences(), d)
}

pub fn build_model(
    variant: ModelVariant,
    location: RewardLocation,
    rule: RewardRule,
) -> Result<GenerativeModel> {
    match variant {
        ModelVariant::ToolState => build_tool_state_model_with(location, rule),
        ModelVariant::Affordance => build_affordance_model_with(location, rule),
    }
}

/// Replaces every transition model with a Dirichlet prior of constant
/// concentration, so `B` becomes uniform.
pub fn set_uniform_transition_prior(
    model: &GenerativeModel,
    alpha_init: f64,
) -> Result<GenerativeModel> {
    if alpha_init <= 0.0 || !alpha_init.is_finite() {
        return Err(Error::InvalidConcentration(alpha_init));
    }
    let mut out = model.clone();
    for f in 0..out.factors.len() {
        let axes = out.b[f].axes().to_vec();
        out.set_pb(f, DirichletTensor::filled(axes, 0, alpha_init)?)?;
    }
    Ok(out)
}

/// Swaps the preference-bearing reward likelihood for a new location while
/// keeping everything the agent has learned.
pub fn relocate_reward(
    model: &GenerativeModel,
    variant: ModelVariant,
    location: RewardLocation,
    rule: RewardRule,
) -> Result<GenerativeModel> {
    let fresh = build_model(variant, location, rule)?;
    let mut out = model.clone();
    out.a = fresh.a;
    Ok(out)
}

/// All `num_controls^horizon` policies, first step most significant.
pub fn enumerate_policies(model: &GenerativeModel, horizon: usize) -> Vec<Policy> {
    let n = model.num_joint_controls();
    let mut out = Vec::with_capacity(n.pow(horizon as u32));
    let mut idx = vec![0; horizon];
    let sizes = vec![n; horizon];
    loop {
        out.push(Policy {
            controls: idx.clone(),
        });
        if !advance(&mut idx, &sizes) {
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tool_state_models_validate() {
        for loc in RewardLocation::ALL {
            let m = build_tool_state_model(loc).unwrap();
            assert!(m.validate().is_empty(), "{loc}: {:?}", m.validate());
            let m = build_affordance_model(loc).unwrap();
            assert!(m.validate().is_empty(), "{loc}: {:?}", m.validate());
            let learn = set_uniform_transition_prior(&m, 1.0).unwrap();
            assert!(learn.validate().is_empty());
        }
    }

    #[test]
    fn north_right_reward_likelihood() {
        let m = build_tool_state_model(RewardLocation::NorthRight).unwrap();
        let a = &m.a()[2];
        for room in Room::ALL {
            for tool in Tool::ALL {
                let p = a.get(&[1, room.index(), tool.index()]).unwrap();
                let want = if (room, tool) == (Room::Right, Tool::V) {
                    1.0
                } else {
                    0.0
                };
                assert_eq!(p, want);
            }
        }
        assert_eq!(m.c()[2], vec![0.0, 50.0]);
        assert_eq!(m.c()[0], vec![0.0, 0.0]);
        assert_eq!(m.d()[0], Simplex::delta(2, 0));
        assert_eq!(m.d()[1], Simplex::delta(4, 0));
    }

    #[test]
    fn affordance_tool_map_is_bijection() {
        let m = build_affordance_model(RewardLocation::Northeast).unwrap();
        assert_eq!(m.factors().len(), 3);
        let a = &m.a()[1];
        let mut seen = std::collections::HashSet::new();
        for x in 0..2 {
            for y in 0..2 {
                let o = (0..4).find(|&o| a.get(&[o, x, y]).unwrap() == 1.0).unwrap();
                seen.insert(o);
            }
        }
        assert_eq!(seen.len(), 4);
        assert_eq!(a.get(&[Tool::HV.index(), 1, 1]).unwrap(), 1.0);
        assert_eq!(a.get(&[Tool::V.index(), 0, 1]).unwrap(), 1.0);
        assert_eq!(a.get(&[Tool::H.index(), 1, 0]).unwrap(), 1.0);
    }

    #[test]
    fn reach_dynamics_do_not_depend_on_other_reach() {
        for room in Room::ALL {
            for a in Action::ALL {
                for x in [false, true] {
                    let nx: Vec<bool> = [false, true]
                        .iter()
                        .map(|&y| transition(room, Tool::from_reach(x, y), a).1.x_reach())
                        .collect();
                    assert_eq!(nx[0], nx[1]);
                    let ny: Vec<bool> = [false, true]
                        .iter()
                        .map(|&y| transition(room, Tool::from_reach(y, x), a).1.y_reach())
                        .collect();
                    assert_eq!(ny[0], ny[1]);
                }
            }
        }
    }

    #[test]
    fn exactly_one_rewarding_state_and_variants_agree() {
        for loc in RewardLocation::ALL {
            let ts = build_tool_state_model(loc).unwrap();
            let af = build_affordance_model(loc).unwrap();
            let mut ts_hits = vec![];
            for r in 0..2 {
                for t in 0..4 {
                    if ts.a()[2].get(&[1, r, t]).unwrap() == 1.0 {
                        ts_hits.push((r, t));
                    }
                }
            }
            let mut af_hits = vec![];
            for r in 0..2 {
                for x in 0..2 {
                    for y in 0..2 {
                        if af.a()[2].get(&[1, r, x, y]).unwrap() == 1.0 {
                            af_hits.push((r, Tool::from_reach(x == 1, y == 1).index()));
                        }
                    }
                }
            }
            assert_eq!(ts_hits.len(), 1);
            assert_eq!(ts_hits, af_hits);
        }
    }

    #[test]
    fn uniform_prior_gives_uniform_columns() {
        let m = build_tool_state_model(RewardLocation::East).unwrap();
        let learn = set_uniform_transition_prior(&m, 1.0).unwrap();
        assert!(learn.b()[1].values().iter().all(|&p| p == 0.25));
        assert!(learn.b()[0].values().iter().all(|&p| p == 0.5));
        assert!(learn.learns_transitions());
        assert!(matches!(
            set_uniform_transition_prior(&m, 0.0),
            Err(Error::InvalidConcentration(_))
        ));
    }

    #[test]
    fn policy_enumeration() {
        let m = build_tool_state_model(RewardLocation::East).unwrap();
        let p = enumerate_policies(&m, 4);
        assert_eq!(p.len(), 256);
        assert_eq!(p[0].controls, vec![0, 0, 0, 0]);
        assert_eq!(p[255].controls, vec![3, 3, 3, 3]);
        assert_eq!(p[1].controls, vec![0, 0, 0, 1]);
        assert_eq!(enumerate_policies(&m, 1).len(), 4);
    }

    #[test]
    fn validate_flags_broken_models() {
        let mut m = build_tool_state_model(RewardLocation::East).unwrap();
        let mut raw = m.b()[0].as_dense().clone();
        raw.set(&[0, 0, 0], 0.9).unwrap();
        m.set_b(0, CategoricalTensor::new_unchecked(raw, 0));
        let v = m.validate();
        assert!(
            matches!(v[0], Violation::StochasticityViolation { .. }),
            "{v:?}"
        );

        let known = build_tool_state_model(RewardLocation::East).unwrap();
        let mut m = set_uniform_transition_prior(&known, 1.0).unwrap();
        let pb = m.pb()[1].clone().unwrap();
        m.set_b(1, known.b()[1].clone());
        m.set_pb_unchecked(1, Some(pb));
        assert!(matches!(
            m.validate()[..],
            [Violation::PriorMismatch { .. }]
        ));

        let mut m = build_tool_state_model(RewardLocation::East).unwrap();
        m.set_c(2, vec![0.0]);
        assert!(matches!(
            m.validate()[..],
            [Violation::PreferenceLength { .. }]
        ));
    }

    #[test]
    fn joint_control_decomposition() {
        let m = build_tool_state_model(RewardLocation::East).unwrap();
        assert_eq!(m.num_joint_controls(), 4);
        for u in 0..4 {
            assert_eq!(m.factor_control_index(1, u), u);
        }
    }
}
