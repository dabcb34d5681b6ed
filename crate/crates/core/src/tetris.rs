//! SZ-Tetris and small-board Tetris.
//!
//! Rows are stored as bitmasks, row 0 at the bottom. A placement picks a
//! rotation and the leftmost column of the piece footprint; the piece then
//! falls straight down until it rests on the stack or the floor.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_WIDTH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Piece {
    S,
    Z,
    O,
    I,
    J,
    L,
    T,
}

type Cells = [(u8, u8); 4];

// (x, y) offsets, y = 0 is the lowest row of the footprint.
const S_ROT: [Cells; 2] = [
    [(0, 0), (1, 0), (1, 1), (2, 1)],
    [(1, 0), (1, 1), (0, 1), (0, 2)],
];
const Z_ROT: [Cells; 2] = [
    [(1, 0), (2, 0), (0, 1), (1, 1)],
    [(0, 0), (0, 1), (1, 1), (1, 2)],
];
const O_ROT: [Cells; 1] = [[(0, 0), (1, 0), (0, 1), (1, 1)]];
const I_ROT: [Cells; 2] = [
    [(0, 0), (1, 0), (2, 0), (3, 0)],
    [(0, 0), (0, 1), (0, 2), (0, 3)],
];
const J_ROT: [Cells; 4] = [
    [(0, 0), (1, 0), (2, 0), (0, 1)],
    [(0, 0), (1, 0), (1, 1), (1, 2)],
    [(2, 0), (0, 1), (1, 1), (2, 1)],
    [(0, 0), (0, 1), (0, 2), (1, 2)],
];
const L_ROT: [Cells; 4] = [
    [(0, 0), (1, 0), (2, 0), (2, 1)],
    [(0, 0), (1, 0), (0, 1), (0, 2)],
    [(0, 0), (0, 1), (1, 1), (2, 1)],
    [(1, 0), (1, 1), (1, 2), (0, 2)],
];
const T_ROT: [Cells; 4] = [
    [(0, 0), (1, 0), (2, 0), (1, 1)],
    [(1, 0), (0, 1), (1, 1), (1, 2)],
    [(1, 0), (0, 1), (1, 1), (2, 1)],
    [(0, 0), (0, 1), (0, 2), (1, 1)],
];

impl Piece {
    pub const ALL: [Piece; 7] = [
        Piece::S,
        Piece::Z,
        Piece::O,
        Piece::I,
        Piece::J,
        Piece::L,
        Piece::T,
    ];
    pub const SZ: [Piece; 2] = [Piece::S, Piece::Z];

    pub fn rotations(self) -> &'static [Cells] {
        match self {
            Piece::S => &S_ROT,
            Piece::Z => &Z_ROT,
            Piece::O => &O_ROT,
            Piece::I => &I_ROT,
            Piece::J => &J_ROT,
            Piece::L => &L_ROT,
            Piece::T => &T_ROT,
        }
    }

    pub fn cells(self, rotation: usize) -> &'static Cells {
        &self.rotations()[rotation]
    }

    pub fn footprint_width(self, rotation: usize) -> usize {
        self.cells(rotation).iter().map(|&(x, _)| x as usize).max().unwrap() + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub piece: Piece,
    pub rotation: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Board {
    width: usize,
    height: usize,
    rows: Vec<u16>,
}

/// Outcome of dropping a piece.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Drop {
    pub board: Board,
    pub cleared: u32,
    /// The piece came to rest partly above the top row. `board` is then the
    /// unchanged input board.
    pub terminal: bool,
}

impl Board {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if !(4..=MAX_WIDTH).contains(&width) {
            return Err(Error::InvalidArgument(format!(
                "board width must be in 4..={MAX_WIDTH}, got {width}"
            )));
        }
        if height < 4 {
            return Err(Error::InvalidArgument(format!(
                "board height must be at least 4, got {height}"
            )));
        }
        Ok(Self {
            width,
            height,
            rows: vec![0; height],
        })
    }

    /// Builds a board from text rows, top row first; `#` marks a filled cell.
    pub fn from_rows(width: usize, height: usize, top_down: &[&str]) -> Result<Self> {
        let mut board = Self::new(width, height)?;
        if top_down.len() > height {
            return Err(Error::InvalidArgument("more rows than board height".into()));
        }
        for (k, line) in top_down.iter().rev().enumerate() {
            if line.chars().count() != width {
                return Err(Error::InvalidArgument(format!(
                    "row {line:?} is not {width} wide"
                )));
            }
            for (x, c) in line.chars().enumerate() {
                if c == '#' {
                    board.rows[k] |= 1 << x;
                }
            }
        }
        Ok(board)
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn filled(&self, x: usize, y: usize) -> bool {
        self.rows[y] >> x & 1 == 1
    }

    fn full_mask(&self) -> u16 {
        ((1u32 << self.width) - 1) as u16
    }

    pub fn occupied_cells(&self) -> u32 {
        self.rows.iter().map(|r| r.count_ones()).sum()
    }

    pub fn column_height(&self, x: usize) -> usize {
        (0..self.height)
            .rev()
            .find(|&y| self.filled(x, y))
            .map_or(0, |y| y + 1)
    }

    pub fn column_heights(&self) -> Vec<usize> {
        (0..self.width).map(|x| self.column_height(x)).collect()
    }

    /// Empty cells with at least one filled cell above them in the same column.
    pub fn holes(&self) -> u32 {
        let mut covered: u16 = 0;
        let mut holes = 0;
        for &row in self.rows.iter().rev() {
            holes += (covered & !row).count_ones();
            covered |= row;
        }
        holes
    }

    pub fn is_legal(&self, p: &Placement) -> bool {
        p.rotation < p.piece.rotations().len()
            && p.column + p.piece.footprint_width(p.rotation) <= self.width
    }

    pub fn enumerate_actions(&self, piece: Piece) -> Vec<Placement> {
        let mut out = Vec::new();
        for rotation in 0..piece.rotations().len() {
            let w = piece.footprint_width(rotation);
            for column in 0..=self.width - w {
                out.push(Placement {
                    piece,
                    rotation,
                    column,
                });
            }
        }
        out
    }

    pub fn drop_piece(&self, p: &Placement) -> Drop {
        assert!(self.is_legal(p), "illegal placement {p:?}");
        let cells = p.piece.cells(p.rotation);
        let heights = self.column_heights();
        // Resting row of the footprint's bottom: every cell must sit at or above its column top.
        let rest = cells
            .iter()
            .map(|&(dx, dy)| heights[p.column + dx as usize].saturating_sub(dy as usize))
            .max()
            .unwrap();
        if cells.iter().any(|&(_, dy)| rest + dy as usize >= self.height) {
            return Drop {
                board: self.clone(),
                cleared: 0,
                terminal: true,
            };
        }
        let mut board = self.clone();
        for &(dx, dy) in cells {
            board.rows[rest + dy as usize] |= 1 << (p.column + dx as usize);
        }
        let full = board.full_mask();
        let before = board.rows.len();
        board.rows.retain(|&r| r != full);
        let cleared = (before - board.rows.len()) as u32;
        board.rows.resize(before, 0);
        Drop {
            board,
            cleared,
            terminal: false,
        }
    }
}

impl fmt::Display for Board {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for y in (0..self.height).rev() {
            write!(f, "|")?;
            for x in 0..self.width {
                write!(f, "{}", if self.filled(x, y) { '#' } else { '.' })?;
            }
            writeln!(f, "|")?;
        }
        writeln!(f, "+{}+", "-".repeat(self.width))
    }
}

/// `exp(-holes / z)`.
pub fn reward(board: &Board, z: f64) -> f64 {
    (-(board.holes() as f64) / z).exp()
}

/// One-hot feature layout: column heights, clipped signed neighbour height
/// differences, and a capped hole count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureEncoding {
    pub width: usize,
    pub max_height: usize,
    pub max_diff: usize,
    pub max_holes: usize,
}

impl FeatureEncoding {
    pub const SZ_TETRIS: FeatureEncoding = FeatureEncoding {
        width: 10,
        max_height: 20,
        max_diff: 10,
        max_holes: 60,
    };
    pub const TETRIS_10X10: FeatureEncoding = FeatureEncoding {
        width: 10,
        max_height: 10,
        max_diff: 7,
        max_holes: 14,
    };

    pub fn len(&self) -> usize {
        self.width * (self.max_height + 1)
            + (self.width - 1) * (2 * self.max_diff + 1)
            + self.max_holes
            + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bits_set(&self) -> usize {
        2 * self.width
    }

    pub fn encode(&self, board: &Board) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.encode_into(board, &mut out);
        out
    }

    pub fn encode_into(&self, board: &Board, out: &mut [f64]) {
        assert_eq!(board.width(), self.width, "board width does not match encoding");
        assert!(board.height() <= self.max_height, "board taller than encoding");
        assert_eq!(out.len(), self.len());
        out.fill(0.0);
        let heights = board.column_heights();
        let hb = self.max_height + 1;
        for (x, &h) in heights.iter().enumerate() {
            out[x * hb + h] = 1.0;
        }
        let mut off = self.width * hb;
        let db = 2 * self.max_diff + 1;
        let d = self.max_diff as i64;
        for x in 0..self.width - 1 {
            let diff = (heights[x + 1] as i64 - heights[x] as i64).clamp(-d, d);
            out[off + x * db + (diff + d) as usize] = 1.0;
        }
        off += (self.width - 1) * db;
        out[off + (board.holes() as usize).min(self.max_holes)] = 1.0;
    }
}

/// Which tetrominoes appear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PieceSet {
    Sz,
    All,
}

impl PieceSet {
    pub fn pieces(self) -> &'static [Piece] {
        match self {
            PieceSet::Sz => &Piece::SZ,
            PieceSet::All => &Piece::ALL,
        }
    }

    /// Uniform i.i.d. piece draw.
    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> Piece {
        let p = self.pieces();
        p[rng.gen_range(0..p.len())]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TetrisConfig {
    pub width: usize,
    pub height: usize,
    pub pieces: PieceSet,
    /// Hole scale in the reward `exp(-holes / z)`.
    pub reward_z: f64,
    pub encoding: FeatureEncoding,
}

impl TetrisConfig {
    pub const SZ_TETRIS: TetrisConfig = TetrisConfig {
        width: 10,
        height: 20,
        pieces: PieceSet::Sz,
        reward_z: 33.0,
        encoding: FeatureEncoding::SZ_TETRIS,
    };
    pub const TETRIS_10X10: TetrisConfig = TetrisConfig {
        width: 10,
        height: 10,
        pieces: PieceSet::All,
        reward_z: 16.5,
        encoding: FeatureEncoding::TETRIS_10X10,
    };
}

/// Pieces and placements of one episode; enough to re-simulate it exactly.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReplayLog {
    pub pieces: Vec<Piece>,
    pub placements: Vec<Placement>,
}

impl ReplayLog {
    /// Replays the placements from an empty board; returns the final board
    /// and total cleared lines.
    pub fn replay(&self, width: usize, height: usize) -> Result<(Board, u32)> {
        let mut board = Board::new(width, height)?;
        let mut lines = 0;
        for (piece, p) in self.pieces.iter().zip(&self.placements) {
            if p.piece != *piece || !board.is_legal(p) {
                return Err(Error::Environment(format!("replay placement {p:?} invalid")));
            }
            let d = board.drop_piece(p);
            if d.terminal {
                break;
            }
            lines += d.cleared;
            board = d.board;
        }
        Ok((board, lines))
    }
}

/// Tetris as an afterstate environment.
#[derive(Debug, Clone)]
pub struct TetrisEnv {
    cfg: TetrisConfig,
    board: Board,
    current: Piece,
    log: Option<ReplayLog>,
}

impl TetrisEnv {
    pub fn new(cfg: TetrisConfig) -> Result<Self> {
        if cfg.encoding.width != cfg.width || cfg.encoding.max_height < cfg.height {
            return Err(Error::InvalidArgument(
                "feature encoding does not cover the board".into(),
            ));
        }
        if cfg.reward_z.is_nan() || cfg.reward_z <= 0.0 {
            return Err(Error::InvalidArgument("reward_z must be positive".into()));
        }
        Ok(Self {
            board: Board::new(cfg.width, cfg.height)?,
            current: cfg.pieces.pieces()[0],
            cfg,
            log: None,
        })
    }

    pub fn with_replay_log(mut self) -> Self {
        self.log = Some(ReplayLog::default());
        self
    }

    pub fn config(&self) -> &TetrisConfig {
        &self.cfg
    }
    pub fn board(&self) -> &Board {
        &self.board
    }
    pub fn current_piece(&self) -> Piece {
        self.current
    }
    pub fn replay_log(&self) -> Option<&ReplayLog> {
        self.log.as_ref()
    }
}

impl crate::env::AfterstateEnv for TetrisEnv {
    fn feature_len(&self) -> usize {
        self.cfg.encoding.len()
    }

    fn reset(&mut self, rng: &mut dyn rand::RngCore) {
        self.board = Board::new(self.cfg.width, self.cfg.height).expect("validated dims");
        self.current = self.cfg.pieces.draw(rng);
        if let Some(log) = &mut self.log {
            *log = ReplayLog::default();
            log.pieces.push(self.current);
        }
    }

    fn candidates(&self) -> Vec<crate::env::Afterstate> {
        self.board
            .enumerate_actions(self.current)
            .iter()
            .map(|p| {
                let d = self.board.drop_piece(p);
                if d.terminal {
                    crate::env::Afterstate::terminal()
                } else {
                    crate::env::Afterstate {
                        features: self.cfg.encoding.encode(&d.board),
                        score: d.cleared as f64,
                        terminal: false,
                    }
                }
            })
            .collect()
    }

    fn commit(&mut self, index: usize, rng: &mut dyn rand::RngCore) -> Result<f64> {
        let actions = self.board.enumerate_actions(self.current);
        let p = *actions.get(index).ok_or_else(|| {
            Error::Environment(format!("placement index {index} out of {}", actions.len()))
        })?;
        let d = self.board.drop_piece(&p);
        if d.terminal {
            return Err(Error::Environment("committed a terminal placement".into()));
        }
        self.board = d.board;
        if let Some(log) = &mut self.log {
            log.placements.push(p);
        }
        let r = reward(&self.board, self.cfg.reward_z);
        self.current = self.cfg.pieces.draw(rng);
        if let Some(log) = &mut self.log {
            log.pieces.push(self.current);
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::rng::{stream, StreamTag};
    use proptest::prelude::*;

    /// Naive simulator: lowers the piece one row at a time from above the board.
    fn reference_drop(board: &Board, p: &Placement) -> (Vec<Vec<bool>>, u32, bool) {
        let (w, h) = (board.width(), board.height());
        let mut grid: Vec<Vec<bool>> =
            (0..h).map(|y| (0..w).map(|x| board.filled(x, y)).collect()).collect();
        let cells = p.piece.cells(p.rotation);
        let collides = |y: i64, grid: &Vec<Vec<bool>>| {
            cells.iter().any(|&(dx, dy)| {
                let yy = y + dy as i64;
                yy < 0 || (yy < h as i64 && grid[yy as usize][p.column + dx as usize])
            })
        };
        let mut y = h as i64 + 4;
        while !collides(y - 1, &grid) {
            y -= 1;
        }
        if cells.iter().any(|&(_, dy)| y + dy as i64 >= h as i64) {
            return (grid, 0, true);
        }
        for &(dx, dy) in cells {
            grid[(y + dy as i64) as usize][p.column + dx as usize] = true;
        }
        let before = grid.len();
        grid.retain(|row| !row.iter().all(|&c| c));
        let cleared = (before - grid.len()) as u32;
        while grid.len() < h {
            grid.push(vec![false; w]);
        }
        (grid, cleared, false)
    }

    fn grid_of(board: &Board) -> Vec<Vec<bool>> {
        (0..board.height())
            .map(|y| (0..board.width()).map(|x| board.filled(x, y)).collect())
            .collect()
    }

    #[test]
    fn action_counts() {
        let b = Board::new(10, 20).unwrap();
        let counts: Vec<usize> = Piece::ALL.iter().map(|&p| b.enumerate_actions(p).len()).collect();
        assert_eq!(counts, vec![17, 17, 9, 17, 34, 34, 34]);
    }

    #[test]
    fn rotations_are_distinct_and_normalized() {
        for piece in Piece::ALL {
            let rots = piece.rotations();
            for (i, a) in rots.iter().enumerate() {
                assert!(a.iter().any(|&(x, _)| x == 0));
                assert!(a.iter().any(|&(_, y)| y == 0));
                for b in &rots[i + 1..] {
                    let mut a = a.to_vec();
                    let mut b = b.to_vec();
                    a.sort();
                    b.sort();
                    assert_ne!(a, b, "{piece:?}");
                }
            }
        }
    }

    #[test]
    fn empty_board_s_drop() {
        let b = Board::new(10, 20).unwrap();
        for p in b.enumerate_actions(Piece::S) {
            let d = b.drop_piece(&p);
            assert_eq!(d.cleared, 0);
            assert!(!d.terminal);
            assert_eq!(d.board.occupied_cells(), 4);
        }
    }

    #[test]
    fn row_missing_footprint_clears() {
        // Bottom row missing columns 0 and 1; the horizontal S fills them.
        let b = Board::from_rows(10, 10, &["..########"]).unwrap();
        let p = Placement { piece: Piece::S, rotation: 0, column: 0 };
        let d = b.drop_piece(&p);
        let (grid, cleared, terminal) = reference_drop(&b, &p);
        assert_eq!(d.cleared, 1);
        assert_eq!(cleared, 1);
        assert!(!terminal && !d.terminal);
        assert_eq!(grid_of(&d.board), grid);
        // The S's upper half drops to the bottom row.
        assert!(d.board.filled(1, 0) && d.board.filled(2, 0));
        assert_eq!(d.board.occupied_cells(), 2);
    }

    #[test]
    fn max_clears() {
        // Four rows missing column 9: vertical I clears all four.
        let rows = ["#########."; 4];
        let b = Board::from_rows(10, 10, &rows).unwrap();
        let d = b.drop_piece(&Placement { piece: Piece::I, rotation: 1, column: 9 });
        assert_eq!(d.cleared, 4);
        assert_eq!(d.board.occupied_cells(), 0);

        // Two rows shaped for a vertical S.
        let b = Board::from_rows(10, 20, &["..########", "#.########"]).unwrap();
        let d = b.drop_piece(&Placement { piece: Piece::S, rotation: 1, column: 0 });
        assert_eq!(d.cleared, 2);
    }

    #[test]
    fn sz_pieces_clear_at_most_two() {
        let mut r = stream(11, StreamTag::Episode, 0, 0);
        let mut board = Board::new(10, 20).unwrap();
        for _ in 0..50_000 {
            let piece = PieceSet::Sz.draw(&mut r);
            let actions = board.enumerate_actions(piece);
            let d = board.drop_piece(&actions[r.gen_range(0..actions.len())]);
            assert!(d.cleared <= 2);
            board = if d.terminal { Board::new(10, 20).unwrap() } else { d.board };
        }
    }

    #[test]
    fn terminal_when_piece_does_not_fit() {
        let rows = ["#........."; 10];
        let b = Board::from_rows(10, 10, &rows).unwrap();
        let d = b.drop_piece(&Placement { piece: Piece::O, rotation: 0, column: 0 });
        assert!(d.terminal);
        assert_eq!(d.board, b);
        assert!(!b.drop_piece(&Placement { piece: Piece::O, rotation: 0, column: 1 }).terminal);
    }

    #[test]
    fn holes_counting() {
        let b = Board::new(10, 10).unwrap();
        assert_eq!(b.holes(), 0);
        let b = Board::from_rows(10, 10, &["#.#.......", "..#.......", "#........."]).unwrap();
        // One gap in column 0, one under column 2.
        assert_eq!(b.holes(), 2);
    }

    #[test]
    fn reward_examples() {
        let empty = Board::new(10, 10).unwrap();
        assert_eq!(reward(&empty, 33.0), 1.0);
        // 30 holes under the full row plus 3 beside the bottom row.
        let b = Board::from_rows(
            10,
            10,
            &["##########", "..........", "..........", "..........", "#######..."],
        )
        .unwrap();
        assert_eq!(b.holes(), 33);
        assert!((reward(&b, 33.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((reward(&b, 16.5) - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn encoding_lengths_and_empty_board() {
        assert_eq!(FeatureEncoding::SZ_TETRIS.len(), 460);
        assert_eq!(FeatureEncoding::TETRIS_10X10.len(), 260);
        let enc = FeatureEncoding::TETRIS_10X10;
        let v = enc.encode(&Board::new(10, 10).unwrap());
        for x in 0..10 {
            assert_eq!(v[x * 11], 1.0);
        }
        for x in 0..9 {
            assert_eq!(v[110 + x * 15 + 7], 1.0);
        }
        assert_eq!(v[245], 1.0);
        assert_eq!(v.iter().filter(|&&b| b == 1.0).count(), 20);
    }

    #[test]
    fn encoding_clips_differences_and_holes() {
        let enc = FeatureEncoding::TETRIS_10X10;
        let b = Board::from_rows(
            10,
            10,
            &[
                "##########",
                "#.........",
                "#.........",
                "#.........",
                "#.........",
                "#.........",
                "#.........",
                "#.........",
                "#.........",
                "..........",
            ],
        )
        .unwrap();
        assert_eq!(b.holes(), 9 * 9 + 1);
        let v = enc.encode(&b);
        for x in 0..10 {
            assert_eq!(v[x * 11 + 10], 1.0);
        }
        for x in 0..9 {
            assert_eq!(v[110 + x * 15 + 7], 1.0);
        }
        assert_eq!(v[245 + 14], 1.0);
        assert_eq!(v.iter().filter(|&&b| b == 1.0).count(), 20);

        let step = Board::from_rows(10, 10, &["#.........", "#.........", "#........."]).unwrap();
        let v = enc.encode(&step);
        assert_eq!(v[110 + 4], 1.0); // diff -3
    }

    #[test]
    fn piece_frequencies() {
        let mut r = stream(2, StreamTag::Episode, 0, 0);
        let n = 100_000;
        let mut counts = [0usize; 7];
        for _ in 0..n {
            let p = PieceSet::Sz.draw(&mut r);
            counts[Piece::ALL.iter().position(|&q| q == p).unwrap()] += 1;
        }
        let sd = (n as f64 * 0.25).sqrt();
        assert!((counts[0] as f64 - n as f64 / 2.0).abs() < 3.0 * sd);
        assert_eq!(counts[0] + counts[1], n);

        let mut r = stream(2, StreamTag::Episode, 1, 0);
        let mut counts = [0usize; 7];
        for _ in 0..n {
            let p = PieceSet::All.draw(&mut r);
            counts[Piece::ALL.iter().position(|&q| q == p).unwrap()] += 1;
        }
        let expected = n as f64 / 7.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 6 degrees of freedom, p = 0.001
        assert!(chi2 < 22.458, "{counts:?} chi2 {chi2}");
    }

    #[test]
    fn piece_sequence_is_reproducible() {
        let draw = |seed| {
            let mut r = stream(seed, StreamTag::Episode, 3, 4);
            (0..100).map(|_| PieceSet::All.draw(&mut r)).collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
        assert_ne!(draw(5), draw(6));
    }

    #[test]
    fn render() {
        let b = Board::from_rows(4, 4, &["#..#"]).unwrap();
        assert_eq!(b.to_string(), "|....|\n|....|\n|....|\n|#..#|\n+----+\n");
    }

    #[test]
    fn replay_log_resimulates() {
        use crate::env::AfterstateEnv;
        let mut env = TetrisEnv::new(TetrisConfig::TETRIS_10X10).unwrap().with_replay_log();
        let mut r = stream(8, StreamTag::Episode, 0, 0);
        env.reset(&mut r);
        let mut lines = 0.0;
        loop {
            let c = env.candidates();
            let live: Vec<usize> = (0..c.len()).filter(|&i| !c[i].terminal).collect();
            if live.is_empty() {
                break;
            }
            let i = live[r.gen_range(0..live.len())];
            lines += c[i].score;
            env.commit(i, &mut r).unwrap();
        }
        let log = env.replay_log().unwrap();
        let (board, replayed) = log.replay(10, 10).unwrap();
        assert_eq!(&board, env.board());
        assert_eq!(replayed as f64, lines);
    }

    proptest! {
        #[test]
        fn drop_matches_reference(seed in any::<u64>(), steps in 1usize..60) {
            let mut r = stream(seed, StreamTag::Episode, 0, 0);
            let mut board = Board::new(10, 10).unwrap();
            for _ in 0..steps {
                let piece = PieceSet::All.draw(&mut r);
                let actions = board.enumerate_actions(piece);
                let p = actions[r.gen_range(0..actions.len())];
                let d = board.drop_piece(&p);
                let (grid, cleared, terminal) = reference_drop(&board, &p);
                prop_assert_eq!(d.terminal, terminal);
                if terminal {
                    break;
                }
                prop_assert_eq!(d.cleared, cleared);
                prop_assert_eq!(grid_of(&d.board), grid);
                prop_assert_eq!(
                    d.board.occupied_cells() as i64,
                    board.occupied_cells() as i64 + 4 - 10 * cleared as i64
                );
                prop_assert_eq!(d.board.clone(), board.drop_piece(&p).board);
                board = d.board;
            }
        }
    }
}
