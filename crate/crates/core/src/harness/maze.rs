//! Seeded recursive-division mazes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gridmap::{OccupancyGrid, WorldPoint};

use super::HarnessError;

/// Cell size used by [`generate_maze`] (m).
pub const MAZE_RESOLUTION: f64 = 0.1;

/// Maze of `width` x `height` cells at [`MAZE_RESOLUTION`], origin at (0, 0).
pub fn generate_maze(seed: u64, width: usize, height: usize, corridor_width: f64) -> Result<OccupancyGrid, HarnessError> {
    generate_maze_at(seed, width, height, corridor_width, MAZE_RESOLUTION)
}

/// Recursive division: every chamber is split by a one-cell wall pierced by a single
/// corridor-wide gap, until chambers are too small to split. The map border acts as
/// the outer wall. Free space stays connected because each wall has a gap and walls
/// never start next to an existing gap.
pub fn generate_maze_at(
    seed: u64,
    width: usize,
    height: usize,
    corridor_width: f64,
    resolution: f64,
) -> Result<OccupancyGrid, HarnessError> {
    if width == 0 || height == 0 {
        return Err(HarnessError::Invalid(format!(
            "maze dimensions must be positive, got {width}x{height}"
        )));
    }
    if !(corridor_width > 0.0) || !corridor_width.is_finite() {
        return Err(HarnessError::Invalid(format!(
            "corridor width must be positive, got {corridor_width}"
        )));
    }
    let mut grid = OccupancyGrid::empty(width, height, resolution, WorldPoint::default())?;
    let corridor = ((corridor_width / resolution).round() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stack = vec![(0usize, 0usize, width, height)];
    while let Some((x0, y0, x1, y1)) = stack.pop() {
        let w = x1 - x0;
        let h = y1 - y0;
        let horizontal_first = match h.cmp(&w) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => rng.gen_bool(0.5),
        };
        for horizontal in [horizontal_first, !horizontal_first] {
            if let Some(children) = split(&mut grid, &mut rng, (x0, y0, x1, y1), horizontal, corridor) {
                stack.extend(children);
                break;
            }
        }
    }
    Ok(grid)
}

type Chamber = (usize, usize, usize, usize);

fn split(
    grid: &mut OccupancyGrid,
    rng: &mut ChaCha8Rng,
    (x0, y0, x1, y1): Chamber,
    horizontal: bool,
    corridor: usize,
) -> Option<[Chamber; 2]> {
    // along: extent of the wall; across: the dimension being divided
    let (a0, a1, b0, b1) = if horizontal { (x0, x1, y0, y1) } else { (y0, y1, x0, x1) };
    if b1 - b0 < 2 * corridor + 1 || a1 - a0 < corridor {
        return None;
    }
    let free_at = |grid: &OccupancyGrid, along: i64, across: usize| -> bool {
        let (c, r) = if horizontal { (along, across as i64) } else { (across as i64, along) };
        grid.in_bounds(c, r) && !grid.cell_occupied(c, r)
    };
    // a wall end touching a free cell of the enclosing wall would sit in its gap
    let candidates: Vec<usize> = ((b0 + corridor)..(b1 - corridor))
        .filter(|&b| !free_at(grid, a0 as i64 - 1, b) && !free_at(grid, a1 as i64, b))
        .collect();
    if candidates.is_empty() {
        return None;
    }
    let wall = candidates[rng.gen_range(0..candidates.len())];
    let gap = rng.gen_range(a0..=(a1 - corridor));
    for a in a0..a1 {
        if a >= gap && a < gap + corridor {
            continue;
        }
        let (c, r) = if horizontal { (a, wall) } else { (wall, a) };
        grid.set_occupied(c, r, true);
    }
    Some(if horizontal {
        [(x0, y0, x1, wall), (x0, wall + 1, x1, y1)]
    } else {
        [(x0, y0, wall, y1), (wall + 1, y0, x1, y1)]
    })
}
