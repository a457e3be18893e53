//! Discrete Fréchet distance and its sign-invariant normalized variant (PCFD).

use crate::error::{Result, StpcaError};

/// Ordered points of a common dimension `d >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    points: Vec<Vec<f64>>,
}

impl Curve {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(StpcaError::Shape("curve must have at least one point".into()));
        };
        let d = first.len();
        if d == 0 {
            return Err(StpcaError::Shape("curve points must have dimension >= 1".into()));
        }
        if let Some(i) = points.iter().position(|p| p.len() != d) {
            return Err(StpcaError::Shape(format!(
                "point {i} has dimension {}, expected {d}",
                points[i].len()
            )));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(StpcaError::InvalidData("curve has non-finite coordinates".into()));
        }
        Ok(Self { points })
    }

    /// One-dimensional curve.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| vec![v]).collect())
    }

    /// Curve whose `k`-th coordinate is `columns[k]`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let len = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != len) {
            return Err(StpcaError::Shape("coordinate columns differ in length".into()));
        }
        Self::new((0..len).map(|t| columns.iter().map(|c| c[t]).collect()).collect())
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn negated(&self) -> Self {
        Self {
            points: self
                .points
                .iter()
                .map(|p| p.iter().map(|v| -v).collect())
                .collect(),
        }
    }

    /// Per-coordinate z-score with sample SD; constant coordinates map to zero.
    pub fn normalized(&self) -> Self {
        let len = self.points.len();
        let d = self.dim();
        let mut out = self.points.clone();
        for k in 0..d {
            let first = self.points[0][k];
            if self.points.iter().all(|p| p[k] == first) {
                out.iter_mut().for_each(|p| p[k] = 0.0);
                continue;
            }
            let mean = self.points.iter().map(|p| p[k]).sum::<f64>() / len as f64;
            let var = self.points.iter().map(|p| (p[k] - mean).powi(2)).sum::<f64>()
                / (len - 1) as f64;
            let sd = var.sqrt();
            for (o, p) in out.iter_mut().zip(&self.points) {
                o[k] = (p[k] - mean) / sd;
            }
        }
        Self { points: out }
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn check_dims(a: &Curve, b: &Curve) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(StpcaError::Shape(format!(
            "curves have dimensions {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Eiter–Mannila coupling distance, `O(|a|·|b|)` time and `O(|b|)` memory.
pub fn discrete_frechet(a: &Curve, b: &Curve) -> Result<f64> {
    check_dims(a, b)?;
    let (p, q) = (a.points(), b.points());
    let mut prev = vec![0.0f64; q.len()];
    let mut cur = vec![0.0f64; q.len()];
    for (i, pi) in p.iter().enumerate() {
        for (j, qj) in q.iter().enumerate() {
            let d = euclidean(pi, qj);
            cur[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => cur[j - 1].max(d),
                (_, 0) => prev[0].max(d),
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]).max(d),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[q.len() - 1])
}

/// `min(DFD(ã, b̃), DFD(−ã, b̃))` over z-scored curves.
pub fn pcfd(a: &Curve, b: &Curve) -> Result<f64> {
    check_dims(a, b)?;
    let an = a.normalized();
    let bn = b.normalized();
    let direct = discrete_frechet(&an, &bn)?;
    let flipped = discrete_frechet(&an.negated(), &bn)?;
    Ok(direct.min(flipped))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve2(points: &[[f64; 2]]) -> Curve {
        Curve::new(points.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    #[test]
    fn parallel_segments() {
        let a = curve2(&[[0.0, 0.0], [1.0, 0.0]]);
        let b = curve2(&[[0.0, 1.0], [1.0, 1.0]]);
        assert_eq!(discrete_frechet(&a, &b).unwrap(), 1.0);
        assert_eq!(discrete_frechet(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn single_points() {
        let a = curve2(&[[0.0, 0.0]]);
        let b = curve2(&[[3.0, 4.0]]);
        assert_eq!(discrete_frechet(&a, &b).unwrap(), 5.0);
    }

    #[test]
    fn dimension_mismatch() {
        let a = curve2(&[[0.0, 0.0]]);
        let b = Curve::from_scalars(&[1.0]).unwrap();
        assert!(matches!(discrete_frechet(&a, &b), Err(StpcaError::Shape(_))));
        assert!(matches!(pcfd(&a, &b), Err(StpcaError::Shape(_))));
    }

    #[test]
    fn invalid_curves() {
        assert!(Curve::new(vec![]).is_err());
        assert!(Curve::new(vec![vec![]]).is_err());
        assert!(Curve::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(Curve::from_scalars(&[f64::INFINITY]).is_err());
    }

    #[test]
    fn pcfd_hand_case() {
        // z-score of (0, 1, 0) is (-1/√3, 2/√3, -1/√3); the constant curve maps to 0.
        let a = Curve::from_scalars(&[0.0, 1.0, 0.0]).unwrap();
        let b = Curve::from_scalars(&[0.0, 0.0, 0.0]).unwrap();
        let expect = 2.0 / 3f64.sqrt();
        assert!((pcfd(&a, &b).unwrap() - expect).abs() < 1e-12);
        assert!((expect - 1.1547).abs() < 1e-4);
    }

    #[test]
    fn pcfd_sign_flip() {
        let a = curve2(&[[0.0, 1.0], [2.0, -1.0], [0.5, 3.0], [1.0, 1.0]]);
        assert_eq!(pcfd(&a, &a).unwrap(), 0.0);
        assert_eq!(pcfd(&a, &a.negated()).unwrap(), 0.0);
    }
}
