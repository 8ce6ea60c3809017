//! Range-minimum / range-maximum queries: the array is cut into fixed
//! blocks, a sparse table indexes the block extrema positions, and
//! partial blocks are scanned directly.  Construction is O(n), memory
//! is O(n), and queries touch at most two blocks plus two table rows.
//! Values fitting in i32 (the common case: positions into the array
//! itself) are stored narrow to halve scan traffic.  Ties are broken
//! towards the leftmost index.

use crate::error::{Error, Result};

const BLOCK: usize = 16;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Min,
    Max,
}

enum Values {
    Narrow(Vec<i32>),
    Wide(Vec<i64>),
}

impl Values {
    #[inline]
    fn get(&self, i: usize) -> i64 {
        match self {
            Values::Narrow(v) => v[i] as i64,
            Values::Wide(v) => v[i],
        }
    }

    fn len(&self) -> usize {
        match self {
            Values::Narrow(v) => v.len(),
            Values::Wide(v) => v.len(),
        }
    }
}

/// Static range-extremum index over a fixed value sequence.
pub struct Rmq {
    values: Values,
    /// `table[j][i]` = position (into the value array) of the extremum
    /// over blocks `i .. i + 2^j`.
    table: Vec<Vec<u32>>,
    mode: Mode,
}

macro_rules! scan {
    ($vals:expr, $mode:expr, $best:ident, $range:expr) => {
        for i in $range {
            let v = $vals[i];
            let wins = match $mode {
                Mode::Min => v < $vals[$best],
                Mode::Max => v > $vals[$best],
            };
            if wins {
                $best = i;
            }
        }
    };
}

impl Rmq {
    /// Builds a range-minimum structure.
    pub fn new_min(values: Vec<i64>) -> Self {
        Self::build(values, Mode::Min)
    }

    /// Builds a range-maximum structure.
    pub fn new_max(values: Vec<i64>) -> Self {
        Self::build(values, Mode::Max)
    }

    fn build(values: Vec<i64>, mode: Mode) -> Self {
        let narrow = values
            .iter()
            .all(|&v| v >= i32::MIN as i64 && v <= i32::MAX as i64);
        let values = if narrow {
            Values::Narrow(values.into_iter().map(|v| v as i32).collect())
        } else {
            Values::Wide(values)
        };
        let n = values.len();
        let blocks = n.div_ceil(BLOCK);
        let mut table: Vec<Vec<u32>> = Vec::new();
        if blocks > 0 {
            let mut base = Vec::with_capacity(blocks);
            match &values {
                Values::Narrow(v) => {
                    for b in 0..blocks {
                        let lo = b * BLOCK;
                        let mut best = lo;
                        scan!(v, mode, best, lo + 1..((b + 1) * BLOCK).min(n));
                        base.push(best as u32);
                    }
                }
                Values::Wide(v) => {
                    for b in 0..blocks {
                        let lo = b * BLOCK;
                        let mut best = lo;
                        scan!(v, mode, best, lo + 1..((b + 1) * BLOCK).min(n));
                        base.push(best as u32);
                    }
                }
            }
            table.push(base);
            let mut width = 1usize;
            while 2 * width <= blocks {
                let prev = table.last().unwrap();
                let mut row = Vec::with_capacity(blocks - 2 * width + 1);
                for i in 0..=(blocks - 2 * width) {
                    let (a, b) = (prev[i], prev[i + width]);
                    let (va, vb) = (values.get(a as usize), values.get(b as usize));
                    let a_wins = match mode {
                        Mode::Min => va <= vb,
                        Mode::Max => va >= vb,
                    };
                    row.push(if a_wins { a } else { b });
                }
                table.push(row);
                width *= 2;
            }
        }
        Rmq {
            values,
            table,
            mode,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }

    /// Leftmost extremum position over whole blocks `blo..=bhi`.
    fn block_query(&self, blo: usize, bhi: usize) -> usize {
        let span = bhi - blo + 1;
        let j = (usize::BITS - 1 - span.leading_zeros()) as usize;
        let a = self.table[j][blo] as usize;
        let b = self.table[j][bhi + 1 - (1 << j)] as usize;
        let (va, vb) = (self.values.get(a), self.values.get(b));
        let a_wins = match self.mode {
            Mode::Min => va <= vb,
            Mode::Max => va >= vb,
        };
        if a_wins {
            a
        } else {
            b
        }
    }

    /// Extremum over the 0-based inclusive index range `lo..=hi`; returns
    /// `(index, value)`, preferring the leftmost index on ties.
    pub fn query(&self, lo: usize, hi: usize) -> Result<(usize, i64)> {
        if lo > hi || hi >= self.values.len() {
            return Err(Error::BadRange {
                lo,
                hi,
                n: self.values.len(),
            });
        }
        let (blo, bhi) = (lo / BLOCK, hi / BLOCK);
        let mut best = lo;
        match &self.values {
            Values::Narrow(v) => {
                if bhi - blo >= 2 {
                    scan!(v, self.mode, best, lo + 1..(blo + 1) * BLOCK);
                    let mid = self.block_query(blo + 1, bhi - 1);
                    let wins = match self.mode {
                        Mode::Min => v[mid] < v[best],
                        Mode::Max => v[mid] > v[best],
                    };
                    if wins {
                        best = mid;
                    }
                    scan!(v, self.mode, best, bhi * BLOCK..=hi);
                } else {
                    scan!(v, self.mode, best, lo + 1..=hi);
                }
            }
            Values::Wide(v) => {
                if bhi - blo >= 2 {
                    scan!(v, self.mode, best, lo + 1..(blo + 1) * BLOCK);
                    let mid = self.block_query(blo + 1, bhi - 1);
                    let wins = match self.mode {
                        Mode::Min => v[mid] < v[best],
                        Mode::Max => v[mid] > v[best],
                    };
                    if wins {
                        best = mid;
                    }
                    scan!(v, self.mode, best, bhi * BLOCK..=hi);
                } else {
                    scan!(v, self.mode, best, lo + 1..=hi);
                }
            }
        }
        Ok((best, self.values.get(best)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_linear_scan() {
        let vals: Vec<i64> = vec![5, 1, 4, 1, 3, 9, 2, 6, 5, 3, 5, 8, 9, 7, 9];
        let min = Rmq::new_min(vals.clone());
        let max = Rmq::new_max(vals.clone());
        for lo in 0..vals.len() {
            for hi in lo..vals.len() {
                let (mi, mv) = min.query(lo, hi).unwrap();
                let (xi, xv) = max.query(lo, hi).unwrap();
                let slice = &vals[lo..=hi];
                let want_min = *slice.iter().min().unwrap();
                let want_max = *slice.iter().max().unwrap();
                assert_eq!(mv, want_min);
                assert_eq!(xv, want_max);
                // Leftmost tie-break.
                assert_eq!(mi, lo + slice.iter().position(|&v| v == want_min).unwrap());
                assert_eq!(xi, lo + slice.iter().position(|&v| v == want_max).unwrap());
            }
        }
    }

    #[test]
    fn long_arrays_match_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x504);
        let n = 1000;
        for wide in [false, true] {
            let vals: Vec<i64> = (0..n)
                .map(|_| {
                    let v = rng.gen_range(-50i64..50);
                    if wide {
                        v * 1_000_000_000
                    } else {
                        v
                    }
                })
                .collect();
            let min = Rmq::new_min(vals.clone());
            let max = Rmq::new_max(vals.clone());
            for _ in 0..10_000 {
                let lo = rng.gen_range(0..n);
                let hi = rng.gen_range(lo..n);
                let slice = &vals[lo..=hi];
                let want_min = *slice.iter().min().unwrap();
                let want_max = *slice.iter().max().unwrap();
                let (mi, mv) = min.query(lo, hi).unwrap();
                let (xi, xv) = max.query(lo, hi).unwrap();
                assert_eq!((mv, xv), (want_min, want_max));
                assert_eq!(mi, lo + slice.iter().position(|&v| v == want_min).unwrap());
                assert_eq!(xi, lo + slice.iter().position(|&v| v == want_max).unwrap());
            }
        }
    }

    #[test]
    fn rejects_bad_ranges() {
        let r = Rmq::new_min(vec![1, 2, 3]);
        assert!(r.query(2, 1).is_err());
        assert!(r.query(0, 3).is_err());
        assert!(r.query(1, 1).is_ok());
    }

    #[test]
    fn single_element() {
        let r = Rmq::new_max(vec![7]);
        assert_eq!(r.query(0, 0).unwrap(), (0, 7));
    }
}
