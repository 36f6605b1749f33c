use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

/// Grid coordinate: `x` grows east, `y` grows south.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn manhattan(self, other: Cell) -> i32 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }

    pub fn offset(self, dir: Direction) -> Cell {
        let (dx, dy) = dir.delta();
        Cell::new(self.x + dx, self.y + dy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::East,
        Direction::South,
        Direction::West,
    ];

    pub fn delta(self) -> (i32, i32) {
        match self {
            Direction::North => (0, -1),
            Direction::East => (1, 0),
            Direction::South => (0, 1),
            Direction::West => (-1, 0),
        }
    }
}

/// Wall map parsed from ASCII: `#` wall, `.` free, `S` free agent start.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Maze {
    width: i32,
    height: i32,
    walls: Vec<bool>,
    start: Cell,
}

impl Maze {
    pub fn parse(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text
            .lines()
            .map(str::trim_end)
            .filter(|l| !l.is_empty())
            .collect();
        if rows.is_empty() {
            return config("maze map is empty");
        }
        let width = rows[0].chars().count();
        let mut walls = Vec::with_capacity(width * rows.len());
        let mut start = None;
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return config(format!("maze row {y} has inconsistent width"));
            }
            for (x, ch) in row.chars().enumerate() {
                match ch {
                    '#' => walls.push(true),
                    '.' => walls.push(false),
                    'S' => {
                        if start.is_some() {
                            return config("maze has more than one start marker");
                        }
                        start = Some(Cell::new(x as i32, y as i32));
                        walls.push(false);
                    }
                    other => return config(format!("unexpected maze character {other:?}")),
                }
            }
        }
        let Some(start) = start else {
            return config("maze has no start marker");
        };
        let maze = Self {
            width: width as i32,
            height: rows.len() as i32,
            walls,
            start,
        };
        // Moves are only bounded by walls, so the border must be closed.
        for x in 0..maze.width {
            if !maze.is_wall(Cell::new(x, 0)) || !maze.is_wall(Cell::new(x, maze.height - 1)) {
                return config("maze border must be walled");
            }
        }
        for y in 0..maze.height {
            if !maze.is_wall(Cell::new(0, y)) || !maze.is_wall(Cell::new(maze.width - 1, y)) {
                return config("maze border must be walled");
            }
        }
        Ok(maze)
    }

    pub fn width(&self) -> i32 {
        self.width
    }

    pub fn height(&self) -> i32 {
        self.height
    }

    pub fn start(&self) -> Cell {
        self.start
    }

    pub fn is_wall(&self, c: Cell) -> bool {
        if c.x < 0 || c.y < 0 || c.x >= self.width || c.y >= self.height {
            return true;
        }
        self.walls[(c.y * self.width + c.x) as usize]
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height)
            .flat_map(move |y| (0..self.width).map(move |x| Cell::new(x, y)))
            .filter(|&c| !self.is_wall(c))
    }

    /// Neighbouring free cells with the direction that reaches them.
    pub fn legal_moves(&self, c: Cell) -> impl Iterator<Item = (Direction, Cell)> + '_ {
        Direction::ALL
            .into_iter()
            .map(move |d| (d, c.offset(d)))
            .filter(|(_, n)| !self.is_wall(*n))
    }

    pub fn try_move(&self, c: Cell, dir: Direction) -> Cell {
        let n = c.offset(dir);
        if self.is_wall(n) {
            c
        } else {
            n
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    Cheese,
    Sutton,
    Pocman9x9,
}

impl Topology {
    pub const ALL: [Topology; 3] = [Topology::Cheese, Topology::Sutton, Topology::Pocman9x9];

    pub fn map_text(self) -> &'static str {
        match self {
            Topology::Cheese => include_str!("../../mazes/cheese.txt"),
            Topology::Sutton => include_str!("../../mazes/sutton.txt"),
            Topology::Pocman9x9 => include_str!("../../mazes/pocman9x9.txt"),
        }
    }

    pub fn agent_start(self) -> Cell {
        match self {
            Topology::Cheese => Cell::new(1, 2),
            Topology::Sutton => Cell::new(1, 3),
            Topology::Pocman9x9 => Cell::new(4, 7),
        }
    }

    /// Candidate positions of a static object.
    pub fn static_object_cells(self) -> &'static [Cell] {
        const CHEESE: [Cell; 2] = [Cell::new(3, 3), Cell::new(5, 3)];
        const SUTTON: [Cell; 3] = [Cell::new(6, 1), Cell::new(9, 1), Cell::new(9, 6)];
        const POCMAN: [Cell; 4] = [Cell::new(1, 1), Cell::new(1, 7), Cell::new(7, 1), Cell::new(7, 7)];
        match self {
            Topology::Cheese => &CHEESE,
            Topology::Sutton => &SUTTON,
            Topology::Pocman9x9 => &POCMAN,
        }
    }

    /// Home position of a moving object.
    pub fn dynamic_object_home(self) -> Cell {
        match self {
            Topology::Cheese => Cell::new(3, 3),
            Topology::Sutton => Cell::new(9, 1),
            Topology::Pocman9x9 => Cell::new(4, 3),
        }
    }

    /// Parses a map and checks the coordinate tables against it.
    pub fn load(self, text: &str) -> Result<Maze> {
        let maze = Maze::parse(text)?;
        if maze.start() != self.agent_start() {
            return config(format!(
                "{self:?} map start {:?} differs from {:?}",
                maze.start(),
                self.agent_start()
            ));
        }
        let coords = self
            .static_object_cells()
            .iter()
            .copied()
            .chain([self.dynamic_object_home()]);
        for c in coords {
            if maze.is_wall(c) {
                return config(format!("{self:?} object cell {c:?} is a wall"));
            }
        }
        Ok(maze)
    }

    pub fn maze(self) -> &'static Maze {
        static MAZES: OnceLock<[Maze; 3]> = OnceLock::new();
        let mazes = MAZES.get_or_init(|| {
            Topology::ALL.map(|t| t.load(t.map_text()).expect("bundled maze is valid"))
        });
        &mazes[self as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_mazes_validate() {
        for t in Topology::ALL {
            let m = t.maze();
            assert_eq!(m.start(), t.agent_start());
        }
        assert_eq!(Topology::Pocman9x9.maze().width(), 9);
        assert_eq!(Topology::Pocman9x9.maze().height(), 9);
    }

    #[test]
    fn mazes_are_connected() {
        for t in Topology::ALL {
            let m = t.maze();
            let mut seen = vec![m.start()];
            let mut frontier = vec![m.start()];
            while let Some(c) = frontier.pop() {
                for (_, n) in m.legal_moves(c) {
                    if !seen.contains(&n) {
                        seen.push(n);
                        frontier.push(n);
                    }
                }
            }
            assert_eq!(seen.len(), m.free_cells().count(), "{t:?}");
        }
    }

    #[test]
    fn rejects_bad_maps() {
        assert!(Maze::parse("###\n#.#\n###\n").is_err());
        assert!(Maze::parse("###\n#S.\n###\n").is_err());
        assert!(Maze::parse("####\n#S#\n###\n").is_err());
        assert!(Topology::Cheese.load("#####\n#S..#\n#####\n").is_err());
    }

    #[test]
    fn blocked_move_stays() {
        let m = Topology::Cheese.maze();
        let c = m.start();
        assert_eq!(m.try_move(c, Direction::West), c);
        assert_eq!(m.try_move(c, Direction::North), Cell::new(1, 1));
    }
}
