//! Support grids, marginals and pairwise cost matrices.
//!
//! The multi-marginal cost is the interpolated pairwise cost
//!
//! ```text
//! c_eps(x1, .., xm) = sum_{i>=2} w(x1, xi) + eps * sum_{2<=i<j} w(xi, xj)
//! ```
//!
//! which is a star centred on the first coordinate at `eps = 0` and the full
//! symmetric pairwise cost at `eps = 1`.

use crate::error::{Error, Result};

/// Ordered, pairwise distinct points in `R^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    coords: Vec<f64>,
}

impl Grid {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidInput(format!(
                "{} coordinates do not split into points of dimension {dim}",
                coords.len()
            )));
        }
        let grid = Self { dim, coords };
        let n = grid.len();
        if n < 2 {
            return Err(Error::InvalidInput("a grid needs at least two points".into()));
        }
        if grid.coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("grid coordinates must be finite".into()));
        }
        for i in 0..n {
            for j in 0..i {
                if grid.distance(i, j) == 0.0 {
                    return Err(Error::InvalidInput(format!("grid points {j} and {i} coincide")));
                }
            }
        }
        Ok(grid)
    }

    pub fn from_points_1d(points: &[f64]) -> Result<Self> {
        Self::new(1, points.to_vec())
    }

    /// `n` cell midpoints of `[lo, hi]`: `lo + (i + 1/2)(hi - lo)/n`.
    pub fn uniform_1d(n: usize, lo: f64, hi: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::InvalidInput(format!("empty interval [{lo}, {hi}]")));
        }
        let step = (hi - lo) / n as f64;
        Self::new(1, (0..n).map(|i| lo + (i as f64 + 0.5) * step).collect())
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// First coordinate of point `i`; the natural label on 1-d grids.
    pub fn coord(&self, i: usize) -> f64 {
        self.coords[i * self.dim]
    }

    pub fn squared_distance(&self, i: usize, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.squared_distance(i, j).sqrt()
    }

    pub fn min_spacing(&self) -> f64 {
        let n = self.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in 0..i {
                best = best.min(self.distance(i, j));
            }
        }
        best
    }
}

/// Strictly positive probability weights on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMarginal {
    grid: Grid,
    weights: Vec<f64>,
}

impl DiscreteMarginal {
    pub fn new(grid: Grid, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "{} weights for {} grid points",
                weights.len(),
                grid.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput(format!("marginal weight {w} is not strictly positive")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("marginal weights sum to {total}, not 1")));
        }
        Ok(Self { grid, weights })
    }

    pub fn uniform(grid: Grid) -> Self {
        let n = grid.len();
        Self {
            grid,
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Pairwise interaction families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostKind {
    /// `-log(offset + |x - y|)`
    Log { offset: f64 },
    /// `-|x - y|^2`
    NegHarmonic,
    /// `min(1/|x - y|, cap)`
    CoulombTruncated { cap: f64 },
    /// `|x - y|^2`
    SquaredDistance,
    /// A user supplied symmetric matrix.
    Explicit,
}

impl CostKind {
    /// Truncated Coulomb with the default cap `10 / min spacing`.
    pub fn coulomb_default(grid: &Grid) -> Self {
        CostKind::CoulombTruncated {
            cap: 10.0 / grid.min_spacing(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CostKind::Log { .. } => "log",
            CostKind::NegHarmonic => "neg_harmonic",
            CostKind::CoulombTruncated { .. } => "coulomb_truncated",
            CostKind::SquaredDistance => "squared_distance",
            CostKind::Explicit => "explicit",
        }
    }

    fn pair(&self, grid: &Grid, i: usize, j: usize) -> f64 {
        match *self {
            CostKind::Log { offset } => -(offset + grid.distance(i, j)).ln(),
            CostKind::NegHarmonic => -grid.squared_distance(i, j),
            CostKind::CoulombTruncated { cap } => {
                let d = grid.distance(i, j);
                if d == 0.0 {
                    cap
                } else {
                    (1.0 / d).min(cap)
                }
            }
            CostKind::SquaredDistance => grid.squared_distance(i, j),
            CostKind::Explicit => unreachable!("explicit costs carry their own matrix"),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            CostKind::Log { offset } if !(offset > 0.0) => {
                Err(Error::InvalidInput(format!("log cost offset must be positive, got {offset}")))
            }
            CostKind::CoulombTruncated { cap } if !(cap > 0.0) => {
                Err(Error::InvalidInput(format!("Coulomb cap must be positive, got {cap}")))
            }
            _ => Ok(()),
        }
    }
}

/// Pairwise matrix `W[i][j] = w(x_i, x_j)` for an `m`-marginal problem,
/// together with a sup-norm bound on `c_eps` valid for all `eps` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostBundle {
    kind: CostKind,
    n: usize,
    marginals: usize,
    w: Vec<f64>,
    sup_bound: f64,
}

/// Builds the pairwise cost matrix of `kind` on `grid` for `marginals` marginals.
pub fn build_cost_matrix(grid: &Grid, kind: CostKind, marginals: usize) -> Result<CostBundle> {
    kind.validate()?;
    if matches!(kind, CostKind::Explicit) {
        return Err(Error::InvalidInput("use CostBundle::from_matrix for explicit costs".into()));
    }
    let n = grid.len();
    let mut w = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            w.push(kind.pair(grid, i, j));
        }
    }
    CostBundle::assemble(kind, n, marginals, w)
}

impl CostBundle {
    /// Wraps an explicit row-major `n x n` symmetric matrix.
    pub fn from_matrix(n: usize, w: Vec<f64>, marginals: usize) -> Result<Self> {
        if w.len() != n * n {
            return Err(Error::InvalidInput(format!("expected {} matrix entries, got {}", n * n, w.len())));
        }
        Self::assemble(CostKind::Explicit, n, marginals, w)
    }

    fn assemble(kind: CostKind, n: usize, marginals: usize, w: Vec<f64>) -> Result<Self> {
        if marginals < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 marginals, got {marginals}")));
        }
        for i in 0..n {
            for j in 0..n {
                let v = w[i * n + j];
                if !v.is_finite() {
                    return Err(Error::NonFiniteCost { row: i, col: j });
                }
                if v != w[j * n + i] {
                    return Err(Error::AsymmetricCost { row: i, col: j });
                }
            }
        }
        let w_sup = w.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let m = marginals as f64;
        let sup_bound = (m - 1.0) * w_sup + (m - 1.0) * (m - 2.0) / 2.0 * w_sup;
        Ok(Self {
            kind,
            n,
            marginals,
            w,
            sup_bound,
        })
    }

    pub fn kind(&self) -> CostKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn marginals(&self) -> usize {
        self.marginals
    }

    #[inline]
    pub fn w(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.w
    }

    /// The bound `M >= sup_eps ||c_eps||_inf`.
    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    /// Evaluates `c_eps` at a full index tuple; returns `(value, d c_eps / d eps)`.
    pub fn epsilon_cost(&self, indices: &[usize], eps: f64) -> Result<(f64, f64)> {
        if indices.len() != self.marginals {
            return Err(Error::InvalidInput(format!(
                "expected {} indices, got {}",
                self.marginals,
                indices.len()
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n) {
            return Err(Error::InvalidInput(format!("index {bad} out of range for {} points", self.n)));
        }
        Ok(self.epsilon_cost_unchecked(indices, eps))
    }

    pub(crate) fn epsilon_cost_unchecked(&self, indices: &[usize], eps: f64) -> (f64, f64) {
        let (star, inner) = self.split_cost(indices);
        (star + eps * inner, inner)
    }

    /// `(sum_i w(x1, xi), sum_{2<=i<j} w(xi, xj))`.
    pub(crate) fn split_cost(&self, indices: &[usize]) -> (f64, f64) {
        let first = indices[0];
        let rest = &indices[1..];
        let star: f64 = rest.iter().map(|&i| self.w(first, i)).sum();
        let mut inner = 0.0;
        for (k, &i) in rest.iter().enumerate() {
            for &j in &rest[k + 1..] {
                inner += self.w(i, j);
            }
        }
        (star, inner)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn three_points() -> Grid {
        Grid::from_points_1d(&[0.0, 0.5, 1.0]).unwrap()
    }

    #[test]
    fn log_cost_entries() {
        let b = build_cost_matrix(&three_points(), CostKind::Log { offset: 0.1 }, 3).unwrap();
        assert!((b.w(0, 0) - std::f64::consts::LN_10).abs() < 1e-12);
        assert!((b.w(0, 2) - (-0.09531017980432493)).abs() < 1e-12);
    }

    #[test]
    fn neg_harmonic_two_points() {
        let g = Grid::from_points_1d(&[0.0, 1.0]).unwrap();
        let b = build_cost_matrix(&g, CostKind::NegHarmonic, 3).unwrap();
        assert_eq!(b.matrix(), &[0.0, -1.0, -1.0, 0.0]);
    }

    #[test]
    fn coulomb_is_capped_on_the_diagonal() {
        let b = build_cost_matrix(&three_points(), CostKind::CoulombTruncated { cap: 10.0 }, 3).unwrap();
        assert_eq!(b.w(0, 0), 10.0);
        assert_eq!(b.w(0, 1), 2.0);
        assert_eq!(CostKind::coulomb_default(&three_points()), CostKind::CoulombTruncated { cap: 20.0 });
    }

    #[test]
    fn rejects_bad_params_and_matrices() {
        assert!(build_cost_matrix(&three_points(), CostKind::Log { offset: 0.0 }, 3).is_err());
        // offset 0 on the diagonal would be -log(0) = inf
        assert!(build_cost_matrix(&three_points(), CostKind::CoulombTruncated { cap: -1.0 }, 3).is_err());
        assert!(matches!(
            CostBundle::from_matrix(2, vec![0.0, 1.0, 2.0, 0.0], 3),
            Err(Error::AsymmetricCost { .. })
        ));
        assert!(matches!(
            CostBundle::from_matrix(2, vec![0.0, f64::NAN, f64::NAN, 0.0], 3),
            Err(Error::NonFiniteCost { .. })
        ));
    }

    #[test]
    fn grid_and_marginal_validation() {
        assert!(Grid::from_points_1d(&[0.0]).is_err());
        assert!(Grid::from_points_1d(&[0.0, 0.0]).is_err());
        let g = Grid::uniform_1d(4, 0.0, 1.0).unwrap();
        assert_eq!(g.coord(0), 0.125);
        assert!(DiscreteMarginal::new(g.clone(), vec![0.5, 0.5, 0.0, 0.0]).is_err());
        assert!(DiscreteMarginal::new(g.clone(), vec![0.3; 4]).is_err());
        assert!(DiscreteMarginal::new(g, vec![0.25; 4]).is_ok());
    }

    #[test]
    fn epsilon_endpoints() {
        let b = CostBundle::from_matrix(3, vec![0.0, 1.0, 2.0, 1.0, 0.5, 3.0, 2.0, 3.0, 0.0], 3).unwrap();
        let (p, q, r) = (0, 1, 2);
        let (v0, d) = b.epsilon_cost(&[p, q, r], 0.0).unwrap();
        assert_eq!(v0, b.w(p, q) + b.w(p, r));
        assert_eq!(d, b.w(q, r));
        let (v1, _) = b.epsilon_cost(&[p, q, r], 1.0).unwrap();
        assert_eq!(v1, b.w(p, q) + b.w(p, r) + b.w(q, r));
        assert!(b.epsilon_cost(&[0, 1], 0.0).is_err());
        assert!(b.epsilon_cost(&[0, 1, 3], 0.0).is_err());
    }

    #[test]
    fn d_eps_matches_central_difference() {
        let g = Grid::uniform_1d(5, 0.0, 1.0).unwrap();
        let b = build_cost_matrix(&g, CostKind::Log { offset: 0.1 }, 4).unwrap();
        let idx = [1, 4, 0, 2];
        let delta = 1e-6;
        for &eps in &[0.1, 0.5, 0.9] {
            let (_, d) = b.epsilon_cost(&idx, eps).unwrap();
            let fd = (b.epsilon_cost(&idx, eps + delta).unwrap().0 - b.epsilon_cost(&idx, eps - delta).unwrap().0)
                / (2.0 * delta);
            assert!((fd - d).abs() < 1e-8, "fd {fd} vs {d}");
        }
    }

    proptest! {
        #[test]
        fn cost_properties(
            idx in proptest::collection::vec(0usize..6, 4),
            eps in 0.0f64..=1.0,
            swap in (1usize..4, 1usize..4),
        ) {
            let g = Grid::uniform_1d(6, 0.0, 1.0).unwrap();
            let b = build_cost_matrix(&g, CostKind::Log { offset: 0.1 }, 4).unwrap();
            let (v, d) = b.epsilon_cost(&idx, eps).unwrap();
            let (v0, _) = b.epsilon_cost(&idx, 0.0).unwrap();
            prop_assert!((v - (v0 + eps * d)).abs() < 1e-12);
            prop_assert!(v.abs() <= b.sup_bound());
            let mut swapped = idx.clone();
            swapped.swap(swap.0, swap.1);
            let (vs, _) = b.epsilon_cost(&swapped, eps).unwrap();
            prop_assert!((vs - v).abs() < 1e-12);
        }
    }
}
