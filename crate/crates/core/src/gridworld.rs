//! Procedural four-room and nine-room 19x19 grid worlds.
//!
//! Both layouts tile a 19-cell square inside a one-cell wall border: four
//! 8x8 rooms in a 2x2 arrangement, or nine 5x5 rooms in 3x3. Every shared
//! interior wall segment gets exactly one door (never at a segment
//! endpoint), every room one obstacle, and start/goal are drawn uniformly
//! inside the top-left and bottom-right rooms. Instances where the goal is
//! unreachable from the start are rejected and resampled.
//!
//! Wall and obstacle cells are ordinary, enterable states carrying the
//! penalty reward; dynamics inside them are the same as anywhere else, and
//! directional moves off the grid are remapped to staying in place. Rewards
//! attach to the destination state of a transition, so "reaching" the goal
//! earns the goal reward, after which every action deterministically resets
//! the agent to the start cell. A directional action reaches its intended
//! neighbor with probability alpha; the remaining mass is spread uniformly
//! over the other three neighboring cells (optionally including the current
//! cell, see [`GenerateOptions::slip_to_stay`]).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{MdpError, MdpModel};

/// Grid side length; rooms plus walls always tile to 19.
pub const GRID_SIDE: usize = 19;
/// Actions in order: down, left, up, right, stop.
pub const NUM_ACTIONS: usize = 5;
pub const ACTION_NAMES: [&str; NUM_ACTIONS] = ["down", "left", "up", "right", "stop"];

const MAX_GENERATION_ATTEMPTS: usize = 1000;

#[derive(Debug, Error)]
pub enum GridWorldError {
    #[error("alpha must lie in (0, 1], got {0}")]
    BadAlpha(f64),
    #[error("no reachable instance found after {attempts} attempts")]
    GenerationFailure { attempts: usize },
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    FourRoom,
    NineRoom,
}

impl Layout {
    /// Interior wall lines (same for rows and columns).
    fn wall_lines(self) -> &'static [usize] {
        match self {
            Layout::FourRoom => &[9],
            Layout::NineRoom => &[6, 12],
        }
    }

    /// Inclusive room bands between the walls.
    fn bands(self) -> Vec<(usize, usize)> {
        match self {
            Layout::FourRoom => vec![(1, 8), (10, 17)],
            Layout::NineRoom => vec![(1, 5), (7, 11), (13, 17)],
        }
    }

    /// Default reward scheme (penalty, goal, step).
    pub fn rewards(self) -> RewardScheme {
        match self {
            Layout::FourRoom => RewardScheme {
                wall_obstacle_penalty: -200.0,
                goal_reward: 400.0,
                step_reward: -4.0,
            },
            Layout::NineRoom => RewardScheme {
                wall_obstacle_penalty: -40.0,
                goal_reward: 200.0,
                step_reward: -1.2,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RewardScheme {
    pub wall_obstacle_penalty: f64,
    pub goal_reward: f64,
    pub step_reward: f64,
}

/// Slip-model options left open by the design; the defaults are the ones the
/// experiments use.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct GenerateOptions {
    /// When set, the slip mass also covers staying in place: (1 - alpha) / 4
    /// per outcome instead of (1 - alpha) / 3 over the other neighbors.
    pub slip_to_stay: bool,
}

/// Grid coordinates as (row, col), row 0 at the top.
pub type Cell = (usize, usize);

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridWorldSpec {
    pub width: usize,
    pub height: usize,
    pub layout: Layout,
    pub wall_cells: Vec<Cell>,
    pub obstacle_cells: Vec<Cell>,
    pub door_cells: Vec<Cell>,
    pub start_cell: Cell,
    pub goal_cell: Cell,
    pub alpha: f64,
    pub rewards: RewardScheme,
    pub seed: u64,
    #[serde(default)]
    pub options: GenerateOptions,
}

impl GridWorldSpec {
    #[inline]
    pub fn cell_index(&self, cell: Cell) -> usize {
        cell.0 * self.width + cell.1
    }

    pub fn is_wall(&self, cell: Cell) -> bool {
        self.wall_cells.binary_search(&cell).is_ok()
    }

    pub fn is_obstacle(&self, cell: Cell) -> bool {
        self.obstacle_cells.contains(&cell)
    }
}

/// Generates a world with the layout's default rewards.
pub fn generate(
    layout: Layout,
    seed: u64,
    alpha: f64,
) -> Result<(GridWorldSpec, MdpModel), GridWorldError> {
    generate_with(layout, seed, alpha, GenerateOptions::default())
}

pub fn generate_with(
    layout: Layout,
    seed: u64,
    alpha: f64,
    options: GenerateOptions,
) -> Result<(GridWorldSpec, MdpModel), GridWorldError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(GridWorldError::BadAlpha(alpha));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let spec = sample_spec(layout, seed, alpha, options, &mut rng);
        if goal_reachable(&spec) {
            let model = build_model(&spec)?;
            return Ok((spec, model));
        }
    }
    Err(GridWorldError::GenerationFailure {
        attempts: MAX_GENERATION_ATTEMPTS,
    })
}

fn sample_spec(
    layout: Layout,
    seed: u64,
    alpha: f64,
    options: GenerateOptions,
    rng: &mut ChaCha8Rng,
) -> GridWorldSpec {
    let side = GRID_SIDE;
    let bands = layout.bands();
    let lines = layout.wall_lines();

    // Border plus interior wall lines.
    let mut walls: Vec<Cell> = Vec::new();
    for r in 0..side {
        for c in 0..side {
            let border = r == 0 || c == 0 || r == side - 1 || c == side - 1;
            let on_line = lines.contains(&r) || lines.contains(&c);
            if border || on_line {
                walls.push((r, c));
            }
        }
    }

    // One door per shared wall segment, excluding segment endpoints.
    let mut doors: Vec<Cell> = Vec::new();
    for &line in lines {
        for &(lo, hi) in &bands {
            // Horizontal wall at row `line`, crossing column band (lo..=hi).
            let c = rng.gen_range(lo + 1..hi); // interior of the segment
            doors.push((line, c));
            // Vertical wall at column `line`, crossing row band.
            let r = rng.gen_range(lo + 1..hi);
            doors.push((r, line));
        }
    }
    doors.sort_unstable();
    walls.retain(|cell| doors.binary_search(cell).is_err());
    walls.sort_unstable();

    // Start in the top-left room, goal in the bottom-right room.
    let first = bands[0];
    let last = *bands.last().unwrap();
    let start_cell = (
        rng.gen_range(first.0..=first.1),
        rng.gen_range(first.0..=first.1),
    );
    let goal_cell = (
        rng.gen_range(last.0..=last.1),
        rng.gen_range(last.0..=last.1),
    );

    // One obstacle per room, placed anywhere but the start and goal.
    let mut obstacles: Vec<Cell> = Vec::new();
    for &(r_lo, r_hi) in &bands {
        for &(c_lo, c_hi) in &bands {
            loop {
                let cell = (rng.gen_range(r_lo..=r_hi), rng.gen_range(c_lo..=c_hi));
                if cell != start_cell && cell != goal_cell {
                    obstacles.push(cell);
                    break;
                }
            }
        }
    }

    GridWorldSpec {
        width: side,
        height: side,
        layout,
        wall_cells: walls,
        obstacle_cells: obstacles,
        door_cells: doors,
        start_cell,
        goal_cell,
        alpha,
        rewards: layout.rewards(),
        seed,
        options,
    }
}

/// Breadth-first search from start to goal through cells that are neither
/// walls nor obstacles.
fn goal_reachable(spec: &GridWorldSpec) -> bool {
    let side = spec.width;
    let blocked = |cell: Cell| spec.is_wall(cell) || spec.is_obstacle(cell);
    if blocked(spec.start_cell) || blocked(spec.goal_cell) {
        return false;
    }
    let mut seen = vec![false; side * side];
    let mut queue = std::collections::VecDeque::new();
    seen[spec.cell_index(spec.start_cell)] = true;
    queue.push_back(spec.start_cell);
    while let Some((r, c)) = queue.pop_front() {
        if (r, c) == spec.goal_cell {
            return true;
        }
        let neighbors = [
            (r + 1, c),
            (r, c.wrapping_sub(1)),
            (r.wrapping_sub(1), c),
            (r, c + 1),
        ];
        for next in neighbors {
            if next.0 >= side || next.1 >= side {
                continue;
            }
            let idx = spec.cell_index(next);
            if !seen[idx] && !blocked(next) {
                seen[idx] = true;
                queue.push_back(next);
            }
        }
    }
    false
}

/// Neighbor of a cell in direction d (0 down, 1 left, 2 up, 3 right), or
/// None off the grid.
fn neighbor(cell: Cell, direction: usize, side: usize) -> Option<Cell> {
    let (r, c) = cell;
    let next = match direction {
        0 => (r + 1, c),
        1 => (r, c.wrapping_sub(1)),
        2 => (r.wrapping_sub(1), c),
        3 => (r, c + 1),
        _ => return Some(cell),
    };
    if next.0 >= side || next.1 >= side {
        None
    } else {
        Some(next)
    }
}

/// Builds the MDP: 5 actions, destination-based rewards, goal reset.
fn build_model(spec: &GridWorldSpec) -> Result<MdpModel, MdpError> {
    let side = spec.width;
    let ns = side * side;
    let na = NUM_ACTIONS;
    let goal = spec.cell_index(spec.goal_cell);
    let start = spec.cell_index(spec.start_cell);

    let mut cell_reward = vec![spec.rewards.step_reward; ns];
    for &w in &spec.wall_cells {
        cell_reward[spec.cell_index(w)] = spec.rewards.wall_obstacle_penalty;
    }
    for &o in &spec.obstacle_cells {
        cell_reward[spec.cell_index(o)] = spec.rewards.wall_obstacle_penalty;
    }
    cell_reward[goal] = spec.rewards.goal_reward;

    let mut transition = vec![0.0; ns * na * ns];
    let mut raw_reward = vec![0.0; ns * na * ns];

    for r in 0..side {
        for c in 0..side {
            let s = spec.cell_index((r, c));
            for a in 0..na {
                let base = (s * na + a) * ns;
                // Destination probabilities for this (s, a), merged by cell.
                let mut outcomes: Vec<(usize, f64)> = Vec::with_capacity(5);
                let add = |idx: usize, p: f64, outcomes: &mut Vec<(usize, f64)>| {
                    if p == 0.0 {
                        return;
                    }
                    match outcomes.iter_mut().find(|(i, _)| *i == idx) {
                        Some(entry) => entry.1 += p,
                        None => outcomes.push((idx, p)),
                    }
                };
                if s == goal {
                    add(start, 1.0, &mut outcomes);
                } else if a == 4 {
                    add(s, 1.0, &mut outcomes);
                } else {
                    let alpha = spec.alpha;
                    let resolve = |d: usize| -> usize {
                        neighbor((r, c), d, side).map_or(s, |cell| spec.cell_index(cell))
                    };
                    add(resolve(a), alpha, &mut outcomes);
                    if alpha < 1.0 {
                        if spec.options.slip_to_stay {
                            let p = (1.0 - alpha) / 4.0;
                            for d in 0..4 {
                                if d != a {
                                    add(resolve(d), p, &mut outcomes);
                                }
                            }
                            add(s, p, &mut outcomes);
                        } else {
                            let p = (1.0 - alpha) / 3.0;
                            for d in 0..4 {
                                if d != a {
                                    add(resolve(d), p, &mut outcomes);
                                }
                            }
                        }
                    }
                }
                // Exact mass conservation: recompute the highest-index
                // destination as one minus the rest, summed in index order
                // (the order a row-sum validation uses).
                outcomes.sort_unstable_by_key(|&(idx, _)| idx);
                let (last, rest) = outcomes.split_last().unwrap();
                let partial: f64 = rest.iter().map(|&(_, p)| p).sum();
                for &(idx, p) in rest {
                    transition[base + idx] = p;
                }
                transition[base + last.0] = 1.0 - partial;
                for s2 in 0..ns {
                    if transition[base + s2] != 0.0 {
                        raw_reward[base + s2] = cell_reward[s2];
                    }
                }
            }
        }
    }

    MdpModel::from_raw_rewards(ns, na, transition, raw_reward)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::check_weak_accessibility;

    #[test]
    fn four_room_counts() {
        let (spec, _) = generate(Layout::FourRoom, 0, 0.95).unwrap();
        assert_eq!(spec.door_cells.len(), 4);
        assert_eq!(spec.obstacle_cells.len(), 4);
        // Walls: border (4*19 - 4 = 72) + two 17-cell interior lines sharing
        // one intersection (17 + 17 - 1 = 33) - 4 doors.
        assert_eq!(spec.wall_cells.len(), 72 + 33 - 4);
    }

    #[test]
    fn nine_room_counts() {
        for seed in 0..5 {
            let (spec, _) = generate(Layout::NineRoom, seed, 0.95).unwrap();
            assert_eq!(spec.door_cells.len(), 12, "12 wall segments, one door each");
            assert_eq!(spec.obstacle_cells.len(), 9);
            for door in &spec.door_cells {
                assert!(!spec.is_wall(*door));
            }
        }
    }

    #[test]
    fn deterministic_transitions_when_alpha_is_one() {
        let (spec, model) = generate(Layout::FourRoom, 3, 1.0).unwrap();
        let ns = model.num_states();
        for s in 0..ns {
            for a in 0..NUM_ACTIONS {
                let row: Vec<f64> = (0..ns).map(|s2| model.prob(s, a, s2)).collect();
                let ones = row.iter().filter(|&&p| p == 1.0).count();
                let nonzero = row.iter().filter(|&&p| p != 0.0).count();
                assert_eq!(ones, 1, "row ({s},{a}) should be one-hot");
                assert_eq!(nonzero, 1);
            }
        }
        let _ = spec;
    }

    #[test]
    fn rows_sum_exactly_to_one() {
        let (_, model) = generate(Layout::NineRoom, 11, 0.95).unwrap();
        let ns = model.num_states();
        for s in 0..ns {
            for a in 0..NUM_ACTIONS {
                let sum: f64 = (0..ns).map(|s2| model.prob(s, a, s2)).sum();
                assert_eq!(sum, 1.0, "row ({s},{a}) sums to {sum}");
            }
        }
    }

    #[test]
    fn generated_worlds_validate_and_satisfy_wa() {
        for (layout, seed) in [
            (Layout::FourRoom, 0),
            (Layout::FourRoom, 42),
            (Layout::NineRoom, 0),
            (Layout::NineRoom, 7),
        ] {
            let (spec, model) = generate(layout, seed, 0.95).unwrap();
            assert!(model.validate().is_valid());
            let wa = check_weak_accessibility(&model);
            assert!(wa.satisfied, "layout {:?} seed {} fails WA", layout, seed);
            assert!(goal_reachable(&spec));
        }
    }

    #[test]
    fn goal_resets_to_start_under_every_action() {
        let (spec, model) = generate(Layout::FourRoom, 5, 0.95).unwrap();
        let goal = spec.cell_index(spec.goal_cell);
        let start = spec.cell_index(spec.start_cell);
        for a in 0..NUM_ACTIONS {
            assert_eq!(model.prob(goal, a, start), 1.0);
        }
    }

    #[test]
    fn rewards_attach_to_destination() {
        let (spec, model) = generate(Layout::FourRoom, 9, 0.95).unwrap();
        // Stepping into the goal from an adjacent free cell earns the goal
        // reward with probability alpha.
        let (gr, gc) = spec.goal_cell;
        let above = (gr - 1, gc);
        if !spec.is_wall(above) && !spec.is_obstacle(above) && above != spec.goal_cell {
            let s = spec.cell_index(above);
            // Action 0 is down.
            let raw = model.raw_reward().unwrap();
            let ns = model.num_states();
            let idx = (s * NUM_ACTIONS) * ns + spec.cell_index(spec.goal_cell);
            assert_eq!(raw[idx], spec.rewards.goal_reward);
        }
    }

    #[test]
    fn seed_determinism() {
        let (a, ma) = generate(Layout::NineRoom, 123, 0.9).unwrap();
        let (b, mb) = generate(Layout::NineRoom, 123, 0.9).unwrap();
        assert_eq!(a.wall_cells, b.wall_cells);
        assert_eq!(a.start_cell, b.start_cell);
        assert_eq!(a.goal_cell, b.goal_cell);
        assert_eq!(a.obstacle_cells, b.obstacle_cells);
        assert_eq!(ma.reward_vector(), mb.reward_vector());
    }

    #[test]
    fn doors_avoid_segment_endpoints() {
        // Nine-room band endpoints: 1,5 / 7,11 / 13,17.
        let endpoints = [1usize, 5, 7, 11, 13, 17];
        for seed in 0..20 {
            let (spec, _) = generate(Layout::NineRoom, seed, 0.95).unwrap();
            let lines = spec.layout.wall_lines();
            for &(r, c) in &spec.door_cells {
                if lines.contains(&r) {
                    assert!(!endpoints.contains(&c), "door ({r},{c}) at segment end");
                } else {
                    assert!(lines.contains(&c));
                    assert!(!endpoints.contains(&r), "door ({r},{c}) at segment end");
                }
            }
        }
    }

    #[test]
    fn slip_to_stay_option_spreads_mass_over_four_outcomes() {
        let (_, model) = generate_with(
            Layout::FourRoom,
            2,
            0.8,
            GenerateOptions { slip_to_stay: true },
        )
        .unwrap();
        // An interior free cell has 5 distinct outcomes under a directional
        // action: intended + 3 lateral + stay.
        let spec = sample_probe_cell(&model);
        assert_eq!(spec, 5);
    }

    fn sample_probe_cell(model: &MdpModel) -> usize {
        // Cell (2, 2) is interior (rooms start at 1) in every layout.
        let s = 2 * GRID_SIDE + 2;
        let ns = model.num_states();
        (0..ns).filter(|&s2| model.prob(s, 0, s2) > 0.0).count()
    }

    #[test]
    fn rejects_bad_alpha() {
        assert!(matches!(
            generate(Layout::FourRoom, 0, 0.0),
            Err(GridWorldError::BadAlpha(_))
        ));
        assert!(matches!(
            generate(Layout::FourRoom, 0, 1.5),
            Err(GridWorldError::BadAlpha(_))
        ));
    }
}
