use std::fmt;

use crate::model::TabularModel;
use crate::rm::{LabelSet, Vocabulary};

use super::GridError;

pub const NUM_ACTIONS: usize = 4;
pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const LEFT: usize = 2;
pub const RIGHT: usize = 3;

/// Tile symbols that carry a label, in addition to the obstacle `*`.
const TILE_SYMBOLS: [char; 7] = ['A', 'B', 'C', 'D', 'o', 'c', 'm'];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Wall,
    Free,
    Obstacle,
    Tile(char),
}

impl Cell {
    fn glyph(self) -> char {
        match self {
            Cell::Wall => '#',
            Cell::Free => '.',
            Cell::Obstacle => '*',
            Cell::Tile(c) => c,
        }
    }
}

/// Outcome of one simulator step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub next: usize,
    /// The agent stepped onto an obstacle: game over.
    pub done: bool,
    pub label: LabelSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    start: usize,
    vocab: Vocabulary,
    labels: Vec<LabelSet>,
}

impl GridMap {
    /// Parses an ASCII map using `# * A B C D o c m . S`.
    pub fn parse(text: &str) -> Result<GridMap, GridError> {
        let err = |line, column, message: String| GridError::Parse {
            line,
            column,
            message,
        };
        let rows: Vec<&str> = text
            .lines()
            .map(|l| l.trim_end_matches('\r'))
            .collect::<Vec<_>>();
        // tolerate trailing blank lines
        let last = rows.iter().rposition(|r| !r.trim().is_empty()).map_or(0, |i| i + 1);
        let rows = &rows[..last];
        if rows.is_empty() {
            return Err(err(1, 1, "empty map".into()));
        }
        let width = rows[0].chars().count();
        let mut cells = Vec::with_capacity(width * rows.len());
        let mut start = None;
        for (y, row) in rows.iter().enumerate() {
            let n = row.chars().count();
            if n != width {
                return Err(err(
                    y + 1,
                    n.min(width) + 1,
                    format!("row has {n} cells, expected {width}"),
                ));
            }
            for (x, ch) in row.chars().enumerate() {
                let cell = match ch {
                    '#' => Cell::Wall,
                    '.' => Cell::Free,
                    '*' => Cell::Obstacle,
                    'S' => {
                        if start.is_some() {
                            return Err(err(y + 1, x + 1, "second start cell `S`".into()));
                        }
                        start = Some(y * width + x);
                        Cell::Free
                    }
                    c if TILE_SYMBOLS.contains(&c) => Cell::Tile(c),
                    c => return Err(err(y + 1, x + 1, format!("unknown character `{c}`"))),
                };
                cells.push(cell);
            }
        }
        let start = start.ok_or_else(|| err(1, 1, "map has no start cell `S`".into()))?;
        let vocab = Vocabulary::office();
        let star = vocab.index_of("*").expect("office vocabulary");
        let labels = cells
            .iter()
            .map(|c| match c {
                Cell::Tile(s) => LabelSet::singleton(
                    vocab.index_of(&s.to_string()).expect("tile symbols are in the vocabulary"),
                ),
                Cell::Obstacle => LabelSet::singleton(star),
                _ => LabelSet::EMPTY,
            })
            .collect();
        Ok(GridMap {
            width,
            height: rows.len(),
            cells,
            start,
            vocab,
            labels,
        })
    }

    /// The bundled 12x9 office layout.
    pub fn office() -> GridMap {
        GridMap::parse(super::OFFICE_MAP).expect("bundled map parses")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn cell(&self, i: usize) -> Cell {
        self.cells[i]
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn coords(&self, i: usize) -> (usize, usize) {
        (i % self.width, i / self.width)
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    /// First cell holding tile `symbol`, if any.
    pub fn find(&self, symbol: char) -> Option<usize> {
        self.cells.iter().position(|&c| c == Cell::Tile(symbol))
    }

    pub fn labelling(&self, i: usize) -> LabelSet {
        self.labels[i]
    }

    pub fn is_obstacle(&self, i: usize) -> bool {
        self.cells[i] == Cell::Obstacle
    }

    pub fn step(&self, i: usize, action: usize) -> Step {
        let (x, y) = self.coords(i);
        let target = match action {
            UP if y > 0 => Some((x, y - 1)),
            DOWN if y + 1 < self.height => Some((x, y + 1)),
            LEFT if x > 0 => Some((x - 1, y)),
            RIGHT if x + 1 < self.width => Some((x + 1, y)),
            _ => None,
        };
        let next = match target {
            Some((nx, ny)) if self.cells[self.index(nx, ny)] != Cell::Wall => self.index(nx, ny),
            _ => i,
        };
        Step {
            next,
            done: self.is_obstacle(next),
            label: self.labels[next],
        }
    }

    /// Deterministic tabular model over all cells (walls included, as
    /// unreachable self-loops) with a point-mass start.
    pub fn export_model(&self) -> TabularModel {
        let n = self.num_cells();
        let mut succ = Vec::with_capacity(n * NUM_ACTIONS);
        for i in 0..n {
            for a in 0..NUM_ACTIONS {
                succ.push(vec![(self.step(i, a).next, 1.0)]);
            }
        }
        let mut initial = vec![0.0; n];
        initial[self.start] = 1.0;
        let terminal = (0..n).map(|i| self.is_obstacle(i)).collect();
        TabularModel::new(
            self.vocab.clone(),
            NUM_ACTIONS,
            succ,
            initial,
            self.labels.clone(),
            terminal,
        )
        .expect("grid model is well formed")
    }

    pub fn render(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for GridMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for y in 0..self.height {
            for x in 0..self.width {
                let i = self.index(x, y);
                let ch = if i == self.start { 'S' } else { self.cells[i].glyph() };
                write!(f, "{ch}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_map() {
        let m = GridMap::parse("...\n.S.\n...\n").unwrap();
        assert_eq!(m.num_cells(), 9);
        assert_eq!(m.start(), 4);
        let model = m.export_model();
        assert_eq!(model.num_obs(), 9);
        assert!(model.is_deterministic());
        // corner, outward action
        assert_eq!(model.successors(0, UP), &[(0, 1.0)]);
        assert_eq!(model.successors(0, LEFT), &[(0, 1.0)]);
    }

    #[test]
    fn office_map_has_108_cells() {
        let m = GridMap::office();
        assert_eq!((m.width(), m.height(), m.num_cells()), (12, 9, 108));
        assert_eq!(m.render(), super::super::OFFICE_MAP);
    }

    #[test]
    fn parse_errors_carry_position() {
        match GridMap::parse("S.\n.S\n") {
            Err(GridError::Parse { line, column, .. }) => assert_eq!((line, column), (2, 2)),
            other => panic!("{other:?}"),
        }
        match GridMap::parse("S..\n..\n") {
            Err(GridError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match GridMap::parse("S.x\n") {
            Err(GridError::Parse { line, column, .. }) => assert_eq!((line, column), (1, 3)),
            other => panic!("{other:?}"),
        }
        assert!(GridMap::parse("...\n").is_err());
    }

    #[test]
    fn step_semantics() {
        let m = GridMap::parse("S#\n*c\n").unwrap();
        // into a wall
        let s = m.step(0, RIGHT);
        assert_eq!((s.next, s.done, s.label), (0, false, LabelSet::EMPTY));
        // onto an obstacle
        let s = m.step(0, DOWN);
        assert!(s.done);
        assert_eq!(m.vocab().names(s.label), vec!["*"]);
        // onto a labelled tile
        let s = m.step(2, RIGHT);
        assert_eq!(m.vocab().names(s.label), vec!["c"]);
        assert!(!s.done);
    }

    #[test]
    fn labels() {
        let m = GridMap::office();
        let a = m.find('A').unwrap();
        assert_eq!(m.vocab().names(m.labelling(a)), vec!["A"]);
        assert!(m.labelling(m.start()).is_empty());
    }
}
