//! Dense row-major matrix addressed by 1-based `(i, j)` cohort/step indices.

use std::fmt::Display;
use std::io::Write;

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
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 1..=rows {
            for j in 1..=cols {
                data.push(f(i, j));
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

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        assert!(
            (1..=self.rows).contains(&i) && (1..=self.cols).contains(&j),
            "cell ({i}, {j}) outside {}x{} grid",
            self.rows,
            self.cols
        );
        (i - 1) * self.cols + (j - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[self.offset(i, j)]
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut T {
        let k = self.offset(i, j);
        &mut self.data[k]
    }

    pub fn set(&mut self, i: usize, j: usize, value: T) {
        *self.get_mut(i, j) = value;
    }

    /// Cells in row-major order as `(i, j, &value)`.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        let cols = self.cols;
        self.data
            .iter()
            .enumerate()
            .map(move |(k, v)| (k / cols + 1, k % cols + 1, v))
    }

    pub fn row(&self, i: usize) -> &[T] {
        let start = self.offset(i, 1);
        &self.data[start..start + self.cols]
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(&mut f).collect(),
        }
    }

    /// CSV with one line per cohort `i` and one column per step `j`.
    /// `render` returns the field text; an empty string marks a missing cell.
    pub fn write_csv<W: Write>(
        &self,
        mut out: W,
        mut render: impl FnMut(&T) -> String,
    ) -> std::io::Result<()> {
        let header: Vec<String> = std::iter::once("i".to_string())
            .chain((1..=self.cols).map(|j| format!("j{j}")))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for i in 1..=self.rows {
            let fields: Vec<String> = std::iter::once(i.to_string())
                .chain(self.row(i).iter().map(&mut render))
                .collect();
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

impl<T: Display> Grid<T> {
    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, |v| v.to_string())
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}
