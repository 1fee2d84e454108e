//! Euler characteristics of binary masks, read as unions of closed unit
//! squares (2-D) or closed unit segments (1-D).
//!
//! Two on-cells meeting at a corner share that vertex, so on-components are
//! 8-connected and holes are 4-connected.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Topology {
    Torus,
    Rectangle,
}

/// Row-major binary grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<bool>,
}

impl Mask {
    pub fn new(rows: usize, cols: usize, cells: Vec<bool>) -> Self {
        assert_eq!(cells.len(), rows * cols, "mask size mismatch");
        Self { rows, cols, cells }
    }

    pub fn filled(rows: usize, cols: usize, on: bool) -> Self {
        Self::new(rows, cols, vec![on; rows * cols])
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cells[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, on: bool) {
        self.cells[i * self.cols + j] = on;
    }

    /// Cell lookup with out-of-range treated as off (rectangle) or wrapped (torus).
    fn at(&self, i: isize, j: isize, topology: Topology) -> bool {
        let (r, c) = (self.rows as isize, self.cols as isize);
        match topology {
            Topology::Torus => self.get(i.rem_euclid(r) as usize, j.rem_euclid(c) as usize),
            Topology::Rectangle => {
                if i < 0 || j < 0 || i >= r || j >= c {
                    false
                } else {
                    self.get(i as usize, j as usize)
                }
            }
        }
    }

    pub fn on_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Pixel replication by an integer factor.
    pub fn upsample(&self, factor: usize) -> Self {
        let (rows, cols) = (self.rows * factor, self.cols * factor);
        let cells = (0..rows * cols).map(|p| self.get(p / cols / factor, p % cols / factor)).collect();
        Self::new(rows, cols, cells)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CubicalComplexCounts {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
}

impl CubicalComplexCounts {
    pub fn euler(&self) -> i64 {
        self.vertices as i64 - self.edges as i64 + self.faces as i64
    }
}

/// Vertex, edge and face counts of the closed-square union in one pass.
pub fn cubical_counts(mask: &Mask, topology: Topology) -> CubicalComplexCounts {
    let (vr, vc) = match topology {
        Topology::Torus => (mask.rows, mask.cols),
        Topology::Rectangle => (mask.rows + 1, mask.cols + 1),
    };
    let mut counts = CubicalComplexCounts { vertices: 0, edges: 0, faces: mask.on_count() };
    for i in 0..vr as isize {
        for j in 0..vc as isize {
            // vertex (i, j) is the top-left corner of cell (i, j)
            let nw = mask.at(i - 1, j - 1, topology);
            let ne = mask.at(i - 1, j, topology);
            let sw = mask.at(i, j - 1, topology);
            let se = mask.at(i, j, topology);
            counts.vertices += (nw || ne || sw || se) as usize;
            // edge to the right of the vertex, between cells (i−1, j) and (i, j)
            if topology == Topology::Torus || (j as usize) < mask.cols {
                counts.edges += (ne || se) as usize;
            }
            // edge below the vertex, between cells (i, j−1) and (i, j)
            if topology == Topology::Torus || (i as usize) < mask.rows {
                counts.edges += (sw || se) as usize;
            }
        }
    }
    counts
}

pub fn euler_char_2d(mask: &Mask, topology: Topology) -> i64 {
    cubical_counts(mask, topology).euler()
}

/// Number of runs of on-cells; an all-on circle has `χ(S¹) = 0`.
pub fn euler_char_1d(mask: &[bool], circle: bool) -> i64 {
    let n = mask.len();
    if n == 0 {
        return 0;
    }
    let starts = (0..n).filter(|&i| mask[i] && (i == 0 || !mask[i - 1])).count() as i64;
    if circle {
        if mask.iter().all(|&c| c) {
            return 0;
        }
        if mask[0] && mask[n - 1] {
            return starts - 1;
        }
    }
    starts
}

fn flood(mask: &[bool], rows: usize, cols: usize, target: bool, eight: bool) -> (Vec<usize>, usize) {
    const UNSET: usize = usize::MAX;
    let mut label = vec![UNSET; rows * cols];
    let mut count = 0;
    let mut queue = VecDeque::new();
    let neighbors: &[(isize, isize)] = if eight {
        &[(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    } else {
        &[(-1, 0), (0, -1), (0, 1), (1, 0)]
    };
    for start in 0..rows * cols {
        if mask[start] != target || label[start] != UNSET {
            continue;
        }
        label[start] = count;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            let (i, j) = ((p / cols) as isize, (p % cols) as isize);
            for (di, dj) in neighbors {
                let (a, b) = (i + di, j + dj);
                if a < 0 || b < 0 || a >= rows as isize || b >= cols as isize {
                    continue;
                }
                let q = a as usize * cols + b as usize;
                if mask[q] == target && label[q] == UNSET {
                    label[q] = count;
                    queue.push_back(q);
                }
            }
        }
        count += 1;
    }
    (label, count)
}

/// Betti numbers `(b0, b1)` of the closed-square union in the plane by flood
/// fill: 8-connected on-components and 4-connected bounded off-components.
pub fn betti_planar(mask: &Mask) -> (usize, usize) {
    let (_, b0) = flood(&mask.cells, mask.rows, mask.cols, true, true);
    // pad with an off border so the unbounded component is a single label
    let (r, c) = (mask.rows + 2, mask.cols + 2);
    let mut padded = vec![false; r * c];
    for i in 0..mask.rows {
        for j in 0..mask.cols {
            padded[(i + 1) * c + j + 1] = mask.get(i, j);
        }
    }
    let (_, off) = flood(&padded, r, c, false, false);
    (b0, off - 1)
}

/// Independent torus Euler characteristic: the planar flood-fill value of the
/// unrolled square, corrected for the boundary identifications by
/// `χ(X) = χ(P) − χ(B) + χ(B_x) + χ(B_y) − [corner ∈ X]`, where `B` is the
/// union's trace on the square's boundary cycle and `B_x`, `B_y` its images on
/// the two seam circles of the torus.
pub fn euler_torus_oracle(mask: &Mask) -> i64 {
    let (b0, b1) = betti_planar(mask);
    let planar = b0 as i64 - b1 as i64;
    let (n, m) = (mask.rows, mask.cols);
    let g = |i: usize, j: usize| mask.get(i, j);

    // boundary cycle of the unrolled square, as a graph: V − E
    let mut bv = 0i64;
    let mut be = 0i64;
    // vertices along the four sides (corners once)
    for j in 0..=m {
        let top = (j > 0 && g(0, j - 1)) || (j < m && g(0, j));
        let bottom = (j > 0 && g(n - 1, j - 1)) || (j < m && g(n - 1, j));
        bv += top as i64 + bottom as i64;
    }
    for i in 1..n {
        let left = g(i - 1, 0) || g(i, 0);
        let right = g(i - 1, m - 1) || g(i, m - 1);
        bv += left as i64 + right as i64;
    }
    for j in 0..m {
        be += g(0, j) as i64 + g(n - 1, j) as i64;
    }
    for i in 0..n {
        be += g(i, 0) as i64 + g(i, m - 1) as i64;
    }
    let chi_b = bv - be;

    // seam circle of the identified left/right sides: n vertices, n edges
    let mut chi_x = 0i64;
    for i in 0..n {
        let up = (i + n - 1) % n;
        let v = g(up, 0) || g(i, 0) || g(up, m - 1) || g(i, m - 1);
        let e = g(i, 0) || g(i, m - 1);
        chi_x += v as i64 - e as i64;
    }
    let mut chi_y = 0i64;
    for j in 0..m {
        let left = (j + m - 1) % m;
        let v = g(0, left) || g(0, j) || g(n - 1, left) || g(n - 1, j);
        let e = g(0, j) || g(n - 1, j);
        chi_y += v as i64 - e as i64;
    }
    let corner = g(0, 0) || g(0, m - 1) || g(n - 1, 0) || g(n - 1, m - 1);
    planar - chi_b + chi_x + chi_y - corner as i64
}

/// Flood-fill oracle for either topology.
pub fn euler_oracle(mask: &Mask, topology: Topology) -> i64 {
    match topology {
        Topology::Rectangle => {
            let (b0, b1) = betti_planar(mask);
            b0 as i64 - b1 as i64
        }
        Topology::Torus => euler_torus_oracle(mask),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert_eq, proptest, ProptestConfig};
    use rand::{Rng, SeedableRng};

    fn from_rows(rows: &[&str]) -> Mask {
        let r = rows.len();
        let c = rows[0].len();
        Mask::new(r, c, rows.iter().flat_map(|s| s.bytes().map(|b| b == b'1')).collect())
    }

    #[test]
    fn examples_2d() {
        assert_eq!(euler_char_2d(&Mask::filled(5, 7, true), Topology::Rectangle), 1);
        let mut one = Mask::filled(4, 4, false);
        one.set(1, 2, true);
        assert_eq!(euler_char_2d(&one, Topology::Rectangle), 1);
        let ring = from_rows(&["111", "101", "111"]);
        let c = cubical_counts(&ring, Topology::Rectangle);
        assert_eq!((c.vertices, c.edges, c.faces), (16, 24, 8));
        assert_eq!(c.euler(), 0);
        assert_eq!(euler_char_2d(&Mask::filled(6, 6, true), Topology::Torus), 0);
        assert_eq!(euler_char_2d(&Mask::filled(6, 6, false), Topology::Torus), 0);
    }

    #[test]
    fn diagonal_cells_touch() {
        let m = from_rows(&["10", "01"]);
        assert_eq!(euler_char_2d(&m, Topology::Rectangle), 1);
        assert_eq!(betti_planar(&m), (1, 0));
        // a diagonal ring encloses a 4-connected hole
        let d = from_rows(&["010", "101", "010"]);
        assert_eq!(betti_planar(&d), (1, 1));
        assert_eq!(euler_char_2d(&d, Topology::Rectangle), 0);
    }

    #[test]
    fn torus_bands() {
        // one full row wraps into a circle: χ = 0
        let mut band = Mask::filled(5, 5, false);
        for j in 0..5 {
            band.set(2, j, true);
        }
        assert_eq!(euler_char_2d(&band, Topology::Torus), 0);
        assert_eq!(euler_char_2d(&band, Topology::Rectangle), 1);
        assert_eq!(euler_torus_oracle(&band), 0);
        // complement of a single cell: torus minus an open disk, χ = −1
        let mut holed = Mask::filled(4, 4, true);
        holed.set(1, 1, false);
        assert_eq!(euler_char_2d(&holed, Topology::Torus), -1);
        assert_eq!(euler_torus_oracle(&holed), -1);
    }

    #[test]
    fn examples_1d() {
        let m: Vec<bool> = "0110011".bytes().map(|b| b == b'1').collect();
        assert_eq!(euler_char_1d(&m, false), 2);
        assert_eq!(euler_char_1d(&m, true), 2);
        let wrap: Vec<bool> = "1100011".bytes().map(|b| b == b'1').collect();
        assert_eq!(euler_char_1d(&wrap, true), 1);
        assert_eq!(euler_char_1d(&wrap, false), 2);
        assert_eq!(euler_char_1d(&[true; 5], true), 0);
        assert_eq!(euler_char_1d(&[true; 5], false), 1);
        assert_eq!(euler_char_1d(&[false; 5], true), 0);
        assert_eq!(euler_char_1d(&[], false), 0);
    }

    fn random_mask(rng: &mut impl Rng, n: usize, p: f64) -> Mask {
        Mask::new(n, n, (0..n * n).map(|_| rng.random::<f64>() < p).collect())
    }

    #[test]
    fn oracle_agreement_random_masks() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        for t in 0..400 {
            let p = [0.2, 0.45, 0.6, 0.8][t % 4];
            let m = random_mask(&mut rng, 12, p);
            for top in [Topology::Rectangle, Topology::Torus] {
                assert_eq!(euler_char_2d(&m, top), euler_oracle(&m, top), "{m:?} {top:?}");
            }
        }
    }

    #[test]
    fn additivity_of_separated_blobs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let a = random_mask(&mut rng, 6, 0.5);
            let b = random_mask(&mut rng, 6, 0.5);
            let mut both = Mask::filled(6, 14, false);
            for i in 0..6 {
                for j in 0..6 {
                    both.set(i, j, a.get(i, j));
                    both.set(i, j + 8, b.get(i, j));
                }
            }
            let sum = euler_char_2d(&a, Topology::Rectangle) + euler_char_2d(&b, Topology::Rectangle);
            assert_eq!(euler_char_2d(&both, Topology::Rectangle), sum);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn upsampling_preserves_euler(cells in proptest::collection::vec(proptest::bool::ANY, 64)) {
            let m = Mask::new(8, 8, cells);
            for top in [Topology::Rectangle, Topology::Torus] {
                prop_assert_eq!(euler_char_2d(&m.upsample(2), top), euler_char_2d(&m, top));
            }
        }

        #[test]
        fn torus_oracle_matches(cells in proptest::collection::vec(proptest::bool::ANY, 49)) {
            let m = Mask::new(7, 7, cells);
            prop_assert_eq!(euler_char_2d(&m, Topology::Torus), euler_torus_oracle(&m));
        }
    }
}
