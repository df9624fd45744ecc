//! Closed convex sets with closed-form projections.

use serde::{Deserialize, Serialize};

use crate::error::{QviError, Result};
use crate::vector::Vector;

/// Box bounds may be infinite; in JSON an unbounded side is written `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexSet {
    Box {
        #[serde(with = "unbounded")]
        lo: Vec<f64>,
        #[serde(with = "unbounded")]
        hi: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
}

impl ConvexSet {
    pub fn new_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let set = ConvexSet::Box { lo, hi };
        set.validate()?;
        Ok(set)
    }

    pub fn new_ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let set = ConvexSet::Ball { center, radius };
        set.validate()?;
        Ok(set)
    }

    /// The cube `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new_box(vec![lo; n], vec![hi; n])
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConvexSet::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(QviError::invalid("box", "bounds must be nonempty and of equal length"));
                }
                let bad = lo
                    .iter()
                    .zip(hi)
                    .any(|(a, b)| a.is_nan() || b.is_nan() || a > b || *a == f64::INFINITY || *b == f64::NEG_INFINITY);
                if bad {
                    return Err(QviError::invalid(
                        "box",
                        "requires lo <= hi with a nonempty interval per coordinate",
                    ));
                }
            }
            ConvexSet::Ball { center, radius } => {
                if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
                    return Err(QviError::invalid("ball", "center must be nonempty and finite"));
                }
                if !(*radius >= 0.0 && radius.is_finite()) {
                    return Err(QviError::invalid("ball", "radius must be nonnegative and finite"));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Box { lo, .. } => lo.len(),
            ConvexSet::Ball { center, .. } => center.len(),
        }
    }

    pub fn project(&self, z: &Vector) -> Vector {
        debug_assert_eq!(z.dim(), self.dim());
        match self {
            ConvexSet::Box { lo, hi } => Vector::from_fn(z.dim(), |i| z[i].max(lo[i]).min(hi[i])),
            ConvexSet::Ball { center, radius } => {
                let c = Vector::from(center.clone());
                let d = z - &c;
                let norm = d.norm();
                if norm <= *radius {
                    z.clone()
                } else {
                    c.axpy(radius / norm, &d)
                }
            }
        }
    }

    /// The same set translated by `shift`.
    pub fn translated(&self, shift: &Vector) -> ConvexSet {
        match self {
            ConvexSet::Box { lo, hi } => ConvexSet::Box {
                lo: lo.iter().zip(shift.iter()).map(|(a, s)| a + s).collect(),
                hi: hi.iter().zip(shift.iter()).map(|(a, s)| a + s).collect(),
            },
            ConvexSet::Ball { center, radius } => ConvexSet::Ball {
                center: center.iter().zip(shift.iter()).map(|(a, s)| a + s).collect(),
                radius: *radius,
            },
        }
    }

    pub fn contains(&self, z: &Vector, tol: f64) -> bool {
        match self {
            ConvexSet::Box { lo, hi } => (0..z.dim()).all(|i| z[i] >= lo[i] - tol && z[i] <= hi[i] + tol),
            ConvexSet::Ball { center, radius } => z.dist(&Vector::from(center.clone())) <= radius + tol,
        }
    }
}

mod unbounded {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let opt: Vec<Option<f64>> = v.iter().map(|x| x.is_finite().then_some(*x)).collect();
        opt.serialize(s)
    }

    /// `null` in `lo` means −∞ and in `hi` +∞; the sign is resolved by
    /// [`super::ConvexSet::validate`] ordering, so decode to NaN first and fix up.
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let opt: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(opt.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
    }
}

impl ConvexSet {
    /// Replaces the NaN placeholders left by JSON `null` bounds with ±∞.
    pub(crate) fn resolve_unbounded(mut self) -> Self {
        if let ConvexSet::Box { lo, hi } = &mut self {
            for v in lo.iter_mut().filter(|v| v.is_nan()) {
                *v = f64::NEG_INFINITY;
            }
            for v in hi.iter_mut().filter(|v| v.is_nan()) {
                *v = f64::INFINITY;
            }
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_projection_clamps() {
        let b = ConvexSet::new_box(vec![1.0, f64::NEG_INFINITY], vec![f64::INFINITY, 0.0]).unwrap();
        let p = b.project(&Vector::from(vec![-3.0, 5.0]));
        assert_eq!(p.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn ball_projection_radial() {
        let b = ConvexSet::new_ball(vec![0.0, 0.0], 1.0).unwrap();
        let p = b.project(&Vector::from(vec![3.0, 4.0]));
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        let inside = Vector::from(vec![0.1, 0.2]);
        assert_eq!(b.project(&inside), inside);
    }

    #[test]
    fn null_bounds_round_trip() {
        let json = r#"{"box":{"lo":[1.0],"hi":[null]}}"#;
        let set: ConvexSet = serde_json::from_str::<ConvexSet>(json).unwrap().resolve_unbounded();
        assert_eq!(set, ConvexSet::new_box(vec![1.0], vec![f64::INFINITY]).unwrap());
        assert_eq!(serde_json::to_string(&set).unwrap(), json);
    }

    #[test]
    fn invalid_sets_rejected() {
        assert!(ConvexSet::new_box(vec![1.0], vec![0.0]).is_err());
        assert!(ConvexSet::new_ball(vec![0.0], -1.0).is_err());
        assert!(ConvexSet::new_box(vec![0.0, 0.0], vec![1.0]).is_err());
    }
}
