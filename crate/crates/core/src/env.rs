//! Ground-truth tool grid.
//!
//! The agent lives in a 2x4 grid but can only occupy the left and right rooms.
//! A vertical tool V lives in the left room, a horizontal tool H in the right
//! room, and holding both yields the compound tool HV. The reward sits in one
//! of the six surrounding rooms and is reachable from exactly one
//! (room, tool) pair.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Room {
    Left,
    Right,
}

impl Room {
    pub const ALL: [Room; 2] = [Room::Left, Room::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn other(self) -> Self {
        match self {
            Room::Left => Room::Right,
            Room::Right => Room::Left,
        }
    }

    /// The single tool stored in this room.
    pub fn native_tool(self) -> Tool {
        match self {
            Room::Left => Tool::V,
            Room::Right => Tool::H,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Room::Left => "Left",
            Room::Right => "Right",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tool {
    Null,
    V,
    H,
    HV,
}

impl Tool {
    pub const ALL: [Tool; 4] = [Tool::Null, Tool::V, Tool::H, Tool::HV];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn x_reach(self) -> bool {
        matches!(self, Tool::H | Tool::HV)
    }

    pub fn y_reach(self) -> bool {
        matches!(self, Tool::V | Tool::HV)
    }

    pub fn from_reach(x_reach: bool, y_reach: bool) -> Self {
        match (x_reach, y_reach) {
            (false, false) => Tool::Null,
            (false, true) => Tool::V,
            (true, false) => Tool::H,
            (true, true) => Tool::HV,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Tool::Null => "Null",
            Tool::V => "V",
            Tool::H => "H",
            Tool::HV => "HV",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Null,
    Move,
    PickUp,
    Drop,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Null, Action::Move, Action::PickUp, Action::Drop];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Null => "Null",
            Action::Move => "Move",
            Action::PickUp => "Pick-up",
            Action::Drop => "Drop",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RewardLocation {
    NorthLeft,
    NorthRight,
    East,
    West,
    Northeast,
    Northwest,
}

impl RewardLocation {
    pub const ALL: [RewardLocation; 6] = [
        RewardLocation::NorthLeft,
        RewardLocation::NorthRight,
        RewardLocation::East,
        RewardLocation::West,
        RewardLocation::Northeast,
        RewardLocation::Northwest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RewardLocation::NorthLeft => "NorthLeft",
            RewardLocation::NorthRight => "NorthRight",
            RewardLocation::East => "East",
            RewardLocation::West => "West",
            RewardLocation::Northeast => "Northeast",
            RewardLocation::Northwest => "Northwest",
        }
    }

    /// The (room, tool) pair that reaches this location.
    pub fn solving_pair(self) -> (Room, Tool) {
        match self {
            RewardLocation::NorthLeft => (Room::Left, Tool::V),
            RewardLocation::NorthRight => (Room::Right, Tool::V),
            RewardLocation::East => (Room::Right, Tool::H),
            RewardLocation::West => (Room::Left, Tool::H),
            RewardLocation::Northeast => (Room::Right, Tool::HV),
            RewardLocation::Northwest => (Room::Left, Tool::HV),
        }
    }

    pub fn is_corner(self) -> bool {
        matches!(self, RewardLocation::Northeast | RewardLocation::Northwest)
    }
}

impl fmt::Display for RewardLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RewardLocation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Self::ALL
            .iter()
            .copied()
            .find(|l| l.name().to_ascii_lowercase() == key)
            .ok_or_else(|| Error::UnknownLocation(s.to_string()))
    }
}

/// Which (room, tool) pairs retrieve a reward.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum RewardRule {
    /// Only the location's own solving pair.
    #[default]
    ExactMatch,
    /// HV additionally reaches the adjacent room its single tools reach from
    /// the same room (north and the side room).
    HvReachesAdjacent,
}

impl RewardRule {
    pub fn name(self) -> &'static str {
        match self {
            RewardRule::ExactMatch => "exact_match",
            RewardRule::HvReachesAdjacent => "hv_reaches_adjacent",
        }
    }

    pub fn solves(self, location: RewardLocation, room: Room, tool: Tool) -> bool {
        let (r, t) = location.solving_pair();
        if (room, tool) == (r, t) {
            return true;
        }
        match self {
            RewardRule::ExactMatch => false,
            RewardRule::HvReachesAdjacent => {
                tool == Tool::HV && r == room && t != Tool::Null && !location.is_corner()
            }
        }
    }
}

impl FromStr for RewardRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "exact_match" => Ok(RewardRule::ExactMatch),
            "hv_reaches_adjacent" => Ok(RewardRule::HvReachesAdjacent),
            _ => Err(format!(
                "unknown reward rule `{s}` (expected exact_match or hv_reaches_adjacent)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnvState {
    pub room: Room,
    pub tool: Tool,
    pub reward_location: RewardLocation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnvObservation {
    pub room: usize,
    pub tool: usize,
    pub reward: usize,
}

impl EnvObservation {
    pub const NULL_REWARD: usize = 0;
    pub const REWARD: usize = 1;

    pub fn rewarded(&self) -> bool {
        self.reward == Self::REWARD
    }

    /// Outcome indices in modality order (room, tool, reward).
    pub fn to_vec(&self) -> Vec<usize> {
        vec![self.room, self.tool, self.reward]
    }
}

pub fn reset(reward_location: RewardLocation) -> EnvState {
    EnvState {
        room: Room::Left,
        tool: Tool::Null,
        reward_location,
    }
}

/// Looks up a location by name and resets the grid there.
pub fn reset_named(location: &str) -> Result<EnvState, Error> {
    Ok(reset(location.parse()?))
}

/// Room/tool dynamics, independent of where the reward is.
pub fn transition(room: Room, tool: Tool, action: Action) -> (Room, Tool) {
    match action {
        Action::Null => (room, tool),
        Action::Move => (room.other(), tool),
        Action::PickUp => {
            let native = room.native_tool();
            let tool = match tool {
                Tool::Null => native,
                held if held == native || held == Tool::HV => held,
                _ => Tool::HV,
            };
            (room, tool)
        }
        Action::Drop => (room, Tool::Null),
    }
}

pub fn step(state: EnvState, action: Action) -> EnvState {
    let (room, tool) = transition(state.room, state.tool, action);
    EnvState {
        room,
        tool,
        reward_location: state.reward_location,
    }
}

pub fn observe(state: &EnvState) -> EnvObservation {
    observe_with(state, RewardRule::ExactMatch)
}

pub fn observe_with(state: &EnvState, rule: RewardRule) -> EnvObservation {
    let reward = if rule.solves(state.reward_location, state.room, state.tool) {
        EnvObservation::REWARD
    } else {
        EnvObservation::NULL_REWARD
    };
    EnvObservation {
        room: state.room.index(),
        tool: state.tool.index(),
        reward,
    }
}

/// Breadth-first search from the reset state to the first rewarding
/// observation. Returns the minimal number of steps.
pub fn oracle_optimal_steps(location: RewardLocation) -> usize {
    oracle_optimal_steps_with(location, RewardRule::ExactMatch)
}

pub fn oracle_optimal_steps_with(location: RewardLocation, rule: RewardRule) -> usize {
    let start = reset(location);
    if observe_with(&start, rule).rewarded() {
        return 0;
    }
    let mut seen = std::collections::HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert((start.room, start.tool));
    queue.push_back((start, 0usize));
    while let Some((s, d)) = queue.pop_front() {
        for a in Action::ALL {
            let next = step(s, a);
            if observe_with(&next, rule).rewarded() {
                return d + 1;
            }
            if seen.insert((next.room, next.tool)) {
                queue.push_back((next, d + 1));
            }
        }
    }
    unreachable!("every location is reachable from the reset state")
}

/// Every action sequence of minimal length that ends in the first reward.
pub fn optimal_action_sequences(location: RewardLocation) -> Vec<Vec<Action>> {
    let depth = oracle_optimal_steps(location);
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(depth);
    collect_sequences(reset(location), depth, &mut prefix, &mut out);
    out
}

fn collect_sequences(
    state: EnvState,
    remaining: usize,
    prefix: &mut Vec<Action>,
    out: &mut Vec<Vec<Action>>,
) {
    if remaining == 0 {
        return;
    }
    for a in Action::ALL {
        let next = step(state, a);
        let rewarded = observe(&next).rewarded();
        prefix.push(a);
        if rewarded && remaining == 1 {
            out.push(prefix.clone());
        } else if !rewarded {
            collect_sequences(next, remaining - 1, prefix, out);
        }
        prefix.pop();
    }
}
