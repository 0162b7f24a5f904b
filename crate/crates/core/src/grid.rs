//! Uniform partition of the safe box into `p^d` grids, plus the dense
//! bit-vector sets used throughout the graph stages.
//!
//! Grid ids are flat row-major indices over the per-dimension cell indices,
//! with the first state dimension most significant.

use crate::interval::{BoxRegion, Interval};
use crate::model::Model;
use crate::scalar::{scalar, Scalar};

const WORD_BITS: usize = 64;

/// Dense bit-vector over grid ids with a cached cardinality.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSet {
    words: Vec<u64>,
    len: usize,
    count: usize,
}

impl GridSet {
    pub fn new(len: usize) -> Self {
        GridSet {
            words: vec![0; len.div_ceil(WORD_BITS)],
            len,
            count: 0,
        }
    }

    pub fn full(len: usize) -> Self {
        let mut s = GridSet {
            words: vec![!0u64; len.div_ceil(WORD_BITS)],
            len,
            count: len,
        };
        s.mask_tail();
        s
    }

    fn mask_tail(&mut self) {
        let tail = self.len % WORD_BITS;
        if tail != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << tail) - 1;
            }
        }
    }

    /// Domain size (number of grids), not the cardinality.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn contains(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / WORD_BITS] & (1u64 << (i % WORD_BITS)) != 0
    }

    /// Inserts `i`; returns true if it was newly added.
    pub fn insert(&mut self, i: usize) -> bool {
        debug_assert!(i < self.len);
        let word = &mut self.words[i / WORD_BITS];
        let bit = 1u64 << (i % WORD_BITS);
        if *word & bit == 0 {
            *word |= bit;
            self.count += 1;
            true
        } else {
            false
        }
    }

    pub fn remove(&mut self, i: usize) -> bool {
        debug_assert!(i < self.len);
        let word = &mut self.words[i / WORD_BITS];
        let bit = 1u64 << (i % WORD_BITS);
        if *word & bit != 0 {
            *word &= !bit;
            self.count -= 1;
            true
        } else {
            false
        }
    }

    /// Word-parallel set union.
    pub fn union_with(&mut self, other: &GridSet) {
        debug_assert_eq!(self.len, other.len);
        let mut count = 0;
        for (w, o) in self.words.iter_mut().zip(other.words.iter()) {
            *w |= *o;
            count += w.count_ones() as usize;
        }
        self.count = count;
    }

    pub fn intersect_with(&mut self, other: &GridSet) {
        debug_assert_eq!(self.len, other.len);
        let mut count = 0;
        for (w, o) in self.words.iter_mut().zip(other.words.iter()) {
            *w &= *o;
            count += w.count_ones() as usize;
        }
        self.count = count;
    }

    /// Removes every member of `other`.
    pub fn difference_with(&mut self, other: &GridSet) {
        debug_assert_eq!(self.len, other.len);
        let mut count = 0;
        for (w, o) in self.words.iter_mut().zip(other.words.iter()) {
            *w &= !*o;
            count += w.count_ones() as usize;
        }
        self.count = count;
    }

    pub fn complement(&self) -> GridSet {
        let mut out = GridSet {
            words: self.words.iter().map(|w| !w).collect(),
            len: self.len,
            count: 0,
        };
        out.mask_tail();
        out.count = out.words.iter().map(|w| w.count_ones() as usize).sum();
        out
    }

    pub fn is_subset_of(&self, other: &GridSet) -> bool {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(other.words.iter())
            .all(|(w, o)| w & !o == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let bit = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * WORD_BITS + bit)
                }
            })
        })
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = GridSet::new(len);
        for i in indices {
            s.insert(i);
        }
        s
    }
}

/// Decomposes a flat grid id into per-dimension cell indices.
pub fn multi_index<S: Scalar>(model: &Model<S>, id: usize) -> Vec<usize> {
    let p = model.grid_count;
    let d = model.state_dim;
    let mut rest = id;
    let mut idx = vec![0; d];
    for j in (0..d).rev() {
        idx[j] = rest % p;
        rest /= p;
    }
    idx
}

/// Inverse of [`multi_index`]: row-major flattening.
pub fn flat_index<S: Scalar>(model: &Model<S>, idx: &[usize]) -> usize {
    let p = model.grid_count;
    idx.iter().fold(0, |acc, &i| acc * p + i)
}

/// Nominal cell width along dimension `j`.
pub fn cell_width<S: Scalar>(model: &Model<S>, j: usize) -> S {
    model.safe_box[j].width() / scalar(model.grid_count as f64)
}

fn cell_interval<S: Scalar>(model: &Model<S>, j: usize, i: usize) -> Interval<S> {
    let p = model.grid_count;
    let w = cell_width(model, j);
    let base = model.safe_box[j].lo;
    let lo = base + scalar::<S>(i as f64) * w;
    let hi = if i + 1 == p {
        model.safe_box[j].hi
    } else {
        base + scalar::<S>((i + 1) as f64) * w
    };
    Interval::new(lo.min(hi), hi.max(lo))
}

/// The closed box of a grid cell. The last cell in each dimension ends
/// exactly at the safe-box upper bound.
pub fn grid_box<S: Scalar>(model: &Model<S>, id: usize) -> BoxRegion<S> {
    let idx = multi_index(model, id);
    (0..model.state_dim)
        .map(|j| cell_interval(model, j, idx[j]))
        .collect()
}

/// Closed-overlap index range along one dimension, found by index arithmetic
/// and corrected locally against the true cell coordinates.
fn index_range<S: Scalar>(model: &Model<S>, j: usize, iv: &Interval<S>) -> Option<(usize, usize)> {
    let p = model.grid_count;
    let safe = &model.safe_box[j];
    if iv.hi < safe.lo || iv.lo > safe.hi {
        return None;
    }
    let w = cell_width(model, j);
    let pos = |x: S| -> i64 {
        let r = ((x - safe.lo) / w).floor().to_f64().unwrap_or(0.0);
        r.clamp(-1.0, p as f64) as i64
    };

    // Smallest i with cell_hi(i) >= iv.lo.
    let mut lo = (pos(iv.lo) - 1).clamp(0, p as i64 - 1) as usize;
    while lo + 1 < p && cell_interval(model, j, lo).hi < iv.lo {
        lo += 1;
    }
    while lo > 0 && cell_interval(model, j, lo - 1).hi >= iv.lo {
        lo -= 1;
    }
    // Largest i with cell_lo(i) <= iv.hi.
    let mut hi = (pos(iv.hi) + 1).clamp(0, p as i64 - 1) as usize;
    while hi > 0 && cell_interval(model, j, hi).lo > iv.hi {
        hi -= 1;
    }
    while hi + 1 < p && cell_interval(model, j, hi + 1).lo <= iv.hi {
        hi += 1;
    }
    if cell_interval(model, j, lo).hi < iv.lo || cell_interval(model, j, hi).lo > iv.hi {
        return None;
    }
    (lo <= hi).then_some((lo, hi))
}

/// All grids whose closed box intersects the closed input box, plus a flag
/// reporting whether part of the box lies outside the safe set.
pub fn grids_overlapping<S: Scalar>(model: &Model<S>, region: &BoxRegion<S>) -> (GridSet, bool) {
    let total = model.total_grids();
    let outside = !model.safe_box.contains(region);
    let mut ranges = Vec::with_capacity(model.state_dim);
    for j in 0..model.state_dim {
        match index_range(model, j, &region[j]) {
            Some(r) => ranges.push(r),
            None => return (GridSet::new(total), outside),
        }
    }

    let mut set = GridSet::new(total);
    let mut idx: Vec<usize> = ranges.iter().map(|&(lo, _)| lo).collect();
    loop {
        set.insert(flat_index(model, &idx));
        // Odometer over the per-dimension ranges.
        let mut j = model.state_dim;
        loop {
            if j == 0 {
                return (set, outside);
            }
            j -= 1;
            if idx[j] < ranges[j].1 {
                idx[j] += 1;
                break;
            }
            idx[j] = ranges[j].0;
        }
    }
}

/// Grids whose interior the box overlaps by more than the model's edge
/// margin. Used for successor edges: a state exactly on a shared grid face
/// is covered by the properly-overlapped neighbor, so face contact (up to
/// the margin) contributes no edge.
pub fn grids_overlapping_interior<S: Scalar>(
    model: &Model<S>,
    region: &BoxRegion<S>,
) -> GridSet {
    let margin = model.edge_margin();
    let shrunk: BoxRegion<S> = (0..model.state_dim)
        .map(|j| {
            let iv = &region[j];
            let mid = iv.midpoint();
            let lo = (iv.lo + margin[j]).min(mid);
            let hi = (iv.hi - margin[j]).max(mid);
            Interval::new(lo, hi)
        })
        .collect();
    grids_overlapping(model, &shrunk).0
}

/// Lebesgue measure of the union of the grids in `s`.
pub fn area<S: Scalar>(model: &Model<S>, s: &GridSet) -> S {
    let cell: S = (0..model.state_dim)
        .map(|j| cell_width(model, j))
        .fold(S::one(), |acc, w| acc * w);
    scalar::<S>(s.count() as f64) * cell
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;

    fn model_1d(p: usize) -> Model<f64> {
        parse_model(&format!("1 0 {p}\nx\n0 - x\n1.0 0.5\n0 1\n-1 1\n-0.5 0.5")).unwrap()
    }

    fn benchmark1() -> Model<f64> {
        parse_model(
            "2 1 50\nx1 x2 u\nx2\n-0.1 * x2 + u\n-0.375 * x1 - 1.15 * x2\n0.2 0.01\n2 5\n-3 3\n-3 3\n-1 1\n-1 1",
        )
        .unwrap()
    }

    #[test]
    fn gridset_basics() {
        let mut s = GridSet::new(100);
        assert!(s.insert(3));
        assert!(!s.insert(3));
        s.insert(64);
        s.insert(99);
        assert_eq!(s.count(), 3);
        assert!(s.contains(64));
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![3, 64, 99]);
        let c = s.complement();
        assert_eq!(c.count(), 97);
        assert!(!c.contains(3));
        let mut t = GridSet::from_indices(100, [3, 4]);
        t.union_with(&s);
        assert_eq!(t.count(), 4);
        assert!(s.is_subset_of(&t));
        t.difference_with(&s);
        assert_eq!(t.iter().collect::<Vec<_>>(), vec![4]);
    }

    #[test]
    fn union_is_associative_and_commutative() {
        use rand::Rng;
        let mut rng = rand::rngs::mock::StepRng::new(5, 0x9E3779B97F4A7C15);
        for _ in 0..20 {
            let len = 130;
            let mut sets: Vec<GridSet> = (0..3)
                .map(|_| {
                    GridSet::from_indices(
                        len,
                        (0..20).map(|_| (rng.gen::<u64>() % len as u64) as usize),
                    )
                })
                .collect();
            let (a, b, c) = (sets.remove(0), sets.remove(0), sets.remove(0));

            let mut ab_c = a.clone();
            ab_c.union_with(&b);
            ab_c.union_with(&c);
            let mut bc = b.clone();
            bc.union_with(&c);
            let mut a_bc = a.clone();
            a_bc.union_with(&bc);
            assert_eq!(ab_c, a_bc);

            let mut ba = b.clone();
            ba.union_with(&a);
            let mut ab = a.clone();
            ab.union_with(&b);
            assert_eq!(ab, ba);
            assert_eq!(ab.count(), ab.iter().count());
        }
    }

    #[test]
    fn first_grid_box_1d() {
        let m = model_1d(4);
        let b = grid_box(&m, 0);
        assert_eq!(b[0], Interval::new(-1.0, -0.5));
    }

    #[test]
    fn first_grid_box_benchmark1() {
        let m = benchmark1();
        let b = grid_box(&m, 0);
        assert!((b[0].lo - -3.0).abs() < 1e-12 && (b[0].hi - -2.88).abs() < 1e-12);
        assert!((b[1].hi - -2.88).abs() < 1e-12);
        // Last cell ends exactly at the safe-box bound.
        let last = grid_box(&m, m.total_grids() - 1);
        assert_eq!(last[0].hi, 3.0);
        assert_eq!(last[1].hi, 3.0);
    }

    #[test]
    fn row_major_flattening() {
        let m: Model<f64> = parse_model(
            "2 0 3\nx1 x2\nx2\n0 - x1\n1.0 0.5\n0 1\n-1 1\n-1 1\n-1 1\n-1 1",
        )
        .unwrap();
        assert_eq!(flat_index(&m, &[2, 1]), 7);
        assert_eq!(multi_index(&m, 7), vec![2, 1]);
    }

    #[test]
    fn overlap_own_box_includes_face_neighbors() {
        let m = model_1d(4);
        let (s, outside) = grids_overlapping(&m, &grid_box(&m, 1));
        assert!(!outside);
        // [-0.5, 0] touches cells 0, 1, 2 under closed-box semantics.
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn overlap_interior_box() {
        let m = model_1d(4);
        let region = BoxRegion::new(vec![Interval::new(-0.6, -0.4)]);
        let (s, outside) = grids_overlapping(&m, &region);
        assert!(!outside);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn overlap_outside_safe_box() {
        let m = model_1d(4);
        let region = BoxRegion::new(vec![Interval::new(2.0, 3.0)]);
        let (s, outside) = grids_overlapping(&m, &region);
        assert!(outside);
        assert!(s.is_empty());
    }

    #[test]
    fn area_cases() {
        let m = benchmark1();
        assert_eq!(area(&m, &GridSet::new(m.total_grids())), 0.0);
        let full = GridSet::full(m.total_grids());
        assert!((area(&m, &full) - 36.0).abs() < 1e-9);
    }

    #[test]
    fn overlap_agrees_with_brute_force() {
        use rand::Rng;
        let mut rng = rand::rngs::mock::StepRng::new(42, 0x9E3779B97F4A7C15);
        for p in [3usize, 7, 20] {
            let m: Model<f64> = parse_model(&format!(
                "2 0 {p}\nx1 x2\nx2\n0 - x1\n1.0 0.5\n0 1\n-1.5 2\n-1 1\n0 1\n0 1"
            ))
            .unwrap();
            for _ in 0..50 {
                let mut point = || -2.0 + 4.5 * rng.gen::<f64>();
                let (a1, b1) = (point(), point());
                let (a2, b2) = (point(), point());
                let region = BoxRegion::new(vec![
                    Interval::new(a1.min(b1), a1.max(b1)),
                    Interval::new(a2.min(b2), a2.max(b2)),
                ]);
                let (fast, _) = grids_overlapping(&m, &region);
                let mut slow = GridSet::new(m.total_grids());
                for id in 0..m.total_grids() {
                    let gb = grid_box(&m, id);
                    let hits = (0..2).all(|j| {
                        gb[j].lo <= region[j].hi && region[j].lo <= gb[j].hi
                    });
                    if hits {
                        slow.insert(id);
                    }
                }
                assert_eq!(fast, slow);
            }
        }
    }

    #[test]
    fn partition_exactness() {
        use rand::Rng;
        let mut rng = rand::rngs::mock::StepRng::new(7, 0x9E3779B97F4A7C15);
        let m = benchmark1();
        for _ in 0..500 {
            let x = -3.0 + 6.0 * rng.gen::<f64>();
            let y = -3.0 + 6.0 * rng.gen::<f64>();
            let mut owners = 0;
            let (cands, _) =
                grids_overlapping(&m, &BoxRegion::new(vec![Interval::point(x), Interval::point(y)]));
            for id in cands.iter() {
                let b = grid_box(&m, id);
                if b[0].lo < x && x < b[0].hi && b[1].lo < y && y < b[1].hi {
                    owners += 1;
                }
            }
            // Interior points belong to exactly one grid interior; points on
            // a grid line belong to none.
            assert!(owners <= 1);
            assert!(!cands.is_empty());
        }
    }
}
