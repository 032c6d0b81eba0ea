//! Dense row-major 2D storage shared by frames, images and masks.
//!
//! Rows are scanlines, columns are depth samples.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }
}

impl<T> Grid<T> {
    /// Wraps an existing buffer. Returns `None` if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Option<Self> {
        (data.len() == rows * cols).then_some(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> &T {
        &self.data[r * self.cols + c]
    }

    pub fn get_mut(&mut self, r: usize, c: usize) -> &mut T {
        &mut self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Iterates `(row, col, &value)` in storage order.
    pub fn indexed(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        let cols = self.cols;
        self.data
            .iter()
            .enumerate()
            .map(move |(i, v)| (i / cols, i % cols, v))
    }
}

/// Boolean region on the frame grid. Unlike [`crate::signal::LesionMask`] it
/// carries no connectivity or non-emptiness guarantee.
pub type Region = Grid<bool>;

impl Region {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn and_not(&self, other: &Region) -> Region {
        debug_assert_eq!(self.shape(), other.shape());
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a && !b)
                .collect(),
        }
    }

    pub fn or(&self, other: &Region) -> Region {
        debug_assert_eq!(self.shape(), other.shape());
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a || b)
                .collect(),
        }
    }

    pub fn is_subset_of(&self, other: &Region) -> bool {
        self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    pub fn is_disjoint(&self, other: &Region) -> bool {
        self.data.iter().zip(&other.data).all(|(&a, &b)| !(a && b))
    }

    /// Coordinates `(row, col)` of set pixels.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.indexed()
            .filter(|(_, _, &b)| b)
            .map(|(r, c, _)| (r, c))
    }

    /// Number of 8-connected components of set pixels.
    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.data.len()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.data.len() {
            if !self.data[start] || seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let (r, c) = ((i / self.cols) as isize, (i % self.cols) as isize);
                for dr in -1..=1 {
                    for dc in -1..=1 {
                        let (nr, nc) = (r + dr, c + dc);
                        if nr < 0 || nc < 0 || nr >= self.rows as isize || nc >= self.cols as isize
                        {
                            continue;
                        }
                        let j = nr as usize * self.cols + nc as usize;
                        if self.data[j] && !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        count
    }

    /// Keeps only the largest 8-connected component (lowest start index wins ties).
    pub fn largest_component(&self) -> Region {
        let mut label = vec![0usize; self.data.len()];
        let mut sizes = vec![0usize];
        let mut stack = Vec::new();
        for start in 0..self.data.len() {
            if !self.data[start] || label[start] != 0 {
                continue;
            }
            let id = sizes.len();
            sizes.push(0);
            label[start] = id;
            stack.push(start);
            while let Some(i) = stack.pop() {
                sizes[id] += 1;
                let (r, c) = ((i / self.cols) as isize, (i % self.cols) as isize);
                for dr in -1..=1 {
                    for dc in -1..=1 {
                        let (nr, nc) = (r + dr, c + dc);
                        if nr < 0 || nc < 0 || nr >= self.rows as isize || nc >= self.cols as isize
                        {
                            continue;
                        }
                        let j = nr as usize * self.cols + nc as usize;
                        if self.data[j] && label[j] == 0 {
                            label[j] = id;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        let best = (1..sizes.len()).max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)));
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: label.iter().map(|&l| Some(l) == best).collect(),
        }
    }
}
