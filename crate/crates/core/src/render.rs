//! SVG rendering of grid worlds and state-occupancy heatmaps.
//!
//! Color convention: walls and obstacles black, the start cell red, the goal
//! cell purple, and occupancy mass blue with opacity proportional to the
//! state marginal. Output is a pure function of its inputs, so files are
//! byte-identical across runs.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::gridworld::GridWorldSpec;
use crate::mdp::OccupancyMeasure;

const CELL_PX: usize = 24;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("occupancy has {actual} states but the grid has {expected} cells")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn cell_fill(spec: &GridWorldSpec, cell: (usize, usize)) -> &'static str {
    if cell == spec.start_cell {
        "red"
    } else if cell == spec.goal_cell {
        "purple"
    } else if spec.is_wall(cell) || spec.is_obstacle(cell) {
        "black"
    } else {
        "white"
    }
}

fn svg_header(width_cells: usize, height_cells: usize) -> String {
    let w = width_cells * CELL_PX;
    let h = height_cells * CELL_PX;
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n"
    )
}

fn base_cells(spec: &GridWorldSpec, out: &mut String) {
    for r in 0..spec.height {
        for c in 0..spec.width {
            let fill = cell_fill(spec, (r, c));
            let _ = writeln!(
                out,
                "<rect x=\"{}\" y=\"{}\" width=\"{CELL_PX}\" height=\"{CELL_PX}\" \
                 fill=\"{fill}\" stroke=\"#cccccc\" stroke-width=\"1\"/>",
                c * CELL_PX,
                r * CELL_PX,
            );
        }
    }
}

/// Renders the world itself (walls, obstacles, start, goal).
pub fn render_spec(spec: &GridWorldSpec) -> String {
    let mut out = svg_header(spec.width, spec.height);
    base_cells(spec, &mut out);
    out.push_str("</svg>\n");
    out
}

pub fn render_spec_to_file(spec: &GridWorldSpec, path: &Path) -> Result<(), RenderError> {
    std::fs::write(path, render_spec(spec))?;
    Ok(())
}

/// Renders the world with the state occupancy of `rho` overlaid in blue;
/// opacity maps affinely from [0, max marginal] onto [0, 1].
pub fn render_occupancy(spec: &GridWorldSpec, rho: &OccupancyMeasure) -> Result<String, RenderError> {
    let cells = spec.width * spec.height;
    if rho.num_states() != cells {
        return Err(RenderError::DimensionMismatch {
            expected: cells,
            actual: rho.num_states(),
        });
    }
    let marginal = rho.state_occupancy();
    let max = marginal.iter().copied().fold(0.0f64, f64::max);
    let mut out = svg_header(spec.width, spec.height);
    base_cells(spec, &mut out);
    if max > 0.0 {
        for r in 0..spec.height {
            for c in 0..spec.width {
                let mass = marginal[r * spec.width + c];
                if mass <= 0.0 {
                    continue;
                }
                let opacity = mass / max;
                let _ = writeln!(
                    out,
                    "<rect x=\"{}\" y=\"{}\" width=\"{CELL_PX}\" height=\"{CELL_PX}\" \
                     fill=\"blue\" fill-opacity=\"{opacity:.6}\"/>",
                    c * CELL_PX,
                    r * CELL_PX,
                );
            }
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn render_occupancy_to_file(
    spec: &GridWorldSpec,
    rho: &OccupancyMeasure,
    path: &Path,
) -> Result<(), RenderError> {
    std::fs::write(path, render_occupancy(spec, rho)?)?;
    Ok(())
}
