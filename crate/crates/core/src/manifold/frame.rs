use nalgebra::{DMatrix, DVector};

use super::{Chart, ManifoldPoint, TangentVector};
use crate::error::{Error, Result};
use crate::linalg::sqrtm;

/// An orthonormal basis of vector fields over the working region.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameField {
    /// Global frame `E_i(p) = M_i p` on `S³` generated by skew matrices.
    SphereGlobal { generators: Vec<DMatrix<f64>> },
    /// Canonical basis of `ℝⁿ`.
    Canonical,
    /// `p^{1/2} B_k p^{1/2}` for a Frobenius-orthonormal basis `B_k` of
    /// symmetric matrices (diagonal units, then `(E_ij + E_ji)/√2` for `i < j`).
    SpdOrthonormal,
}

impl FrameField {
    /// The quaternion-type frame on `S³`.
    pub fn s3() -> Self {
        #[rustfmt::skip]
        let m1 = DMatrix::from_row_slice(4, 4, &[
            0.0, -1.0, 0.0, 0.0,
            1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, -1.0,
            0.0, 0.0, 1.0, 0.0,
        ]);
        #[rustfmt::skip]
        let m2 = DMatrix::from_row_slice(4, 4, &[
            0.0, 0.0, -1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
            1.0, 0.0, 0.0, 0.0,
            0.0, -1.0, 0.0, 0.0,
        ]);
        #[rustfmt::skip]
        let m3 = DMatrix::from_row_slice(4, 4, &[
            0.0, 0.0, 0.0, -1.0,
            0.0, 0.0, -1.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            1.0, 0.0, 0.0, 0.0,
        ]);
        FrameField::SphereGlobal { generators: vec![m1, m2, m3] }
    }

    /// The natural frame for a chart. Spheres other than `S³` have no global
    /// frame and are rejected.
    pub fn for_chart(chart: Chart) -> Result<Self> {
        match chart {
            Chart::Sphere(3) => Ok(Self::s3()),
            Chart::Sphere(_) => Err(Error::UnsupportedFrame { frame: "sphere-global".into(), chart }),
            Chart::Euclid(_) => Ok(FrameField::Canonical),
            Chart::Spd(_) => Ok(FrameField::SpdOrthonormal),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FrameField::SphereGlobal { .. } => "sphere-global",
            FrameField::Canonical => "canonical",
            FrameField::SpdOrthonormal => "spd-orthonormal",
        }
    }
}

/// The frame vectors `E_1(p), …, E_n(p)`.
pub fn frame_at(frame: &FrameField, p: &ManifoldPoint) -> Result<Vec<TangentVector>> {
    let unsupported = || Error::UnsupportedFrame { frame: frame.name().into(), chart: p.chart() };
    match (frame, p.chart()) {
        (FrameField::SphereGlobal { generators }, Chart::Sphere(n)) => {
            if generators.len() != n || generators.iter().any(|m| m.shape() != (n + 1, n + 1)) {
                return Err(unsupported());
            }
            generators.iter().map(|m| TangentVector::new(p.clone(), m * p.coords())).collect()
        }
        (FrameField::Canonical, Chart::Euclid(n)) => (0..n)
            .map(|i| {
                let mut c = DMatrix::zeros(n, 1);
                c[(i, 0)] = 1.0;
                TangentVector::new(p.clone(), c)
            })
            .collect(),
        (FrameField::SpdOrthonormal, Chart::Spd(n)) => {
            let s = sqrtm(p.coords());
            let mut out = Vec::with_capacity(n * (n + 1) / 2);
            for i in 0..n {
                let mut b = DMatrix::zeros(n, n);
                b[(i, i)] = 1.0;
                out.push(TangentVector::new(p.clone(), &s * b * &s)?);
            }
            let h = std::f64::consts::FRAC_1_SQRT_2;
            for i in 0..n {
                for j in i + 1..n {
                    let mut b = DMatrix::zeros(n, n);
                    b[(i, j)] = h;
                    b[(j, i)] = h;
                    let e = crate::linalg::symmetrize(&(&s * b * &s));
                    out.push(TangentVector::new(p.clone(), e)?);
                }
            }
            Ok(out)
        }
        _ => Err(unsupported()),
    }
}

/// Coefficients `⟨v, E_j(p)⟩` of `v` in the frame at its base point.
pub fn frame_coordinates(frame: &FrameField, v: &TangentVector) -> Result<DVector<f64>> {
    let basis = frame_at(frame, v.base())?;
    let coeffs: Result<Vec<f64>> = basis.iter().map(|e| v.inner(e)).collect();
    Ok(DVector::from_vec(coeffs?))
}

/// `Σ α_j E_j(p)`.
pub fn combine_frame(frame: &FrameField, p: &ManifoldPoint, alpha: &[f64]) -> Result<TangentVector> {
    let basis = frame_at(frame, p)?;
    if basis.len() != alpha.len() {
        return Err(Error::InvalidInput(format!(
            "{} frame coefficients for a {}-dimensional frame",
            alpha.len(),
            basis.len()
        )));
    }
    let mut acc = TangentVector::zero(p.clone());
    for (e, a) in basis.iter().zip(alpha) {
        acc = acc.add(&e.scale(*a))?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram(vs: &[TangentVector]) -> DMatrix<f64> {
        DMatrix::from_fn(vs.len(), vs.len(), |i, j| vs[i].inner(&vs[j]).unwrap())
    }

    #[test]
    fn s3_frame_at_north_pole() {
        let p = ManifoldPoint::sphere(&[0.0, 0.0, 0.0, 1.0]).unwrap();
        let e = frame_at(&FrameField::s3(), &p).unwrap();
        assert_eq!(e[0].components().as_slice(), &[0.0, 0.0, -1.0, 0.0]);
        assert_eq!(e[1].components().as_slice(), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(e[2].components().as_slice(), &[-1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn canonical_frame() {
        let p = ManifoldPoint::euclid(&[3.0, -1.0, 2.0]);
        let e = frame_at(&FrameField::Canonical, &p).unwrap();
        assert_eq!(gram(&e), DMatrix::identity(3, 3));
        assert_eq!(e[1].components().as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn spd_frame_is_orthonormal() {
        let p = ManifoldPoint::spd(DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 0.7]))
            .unwrap();
        let e = frame_at(&FrameField::SpdOrthonormal, &p).unwrap();
        assert_eq!(e.len(), 6);
        assert!((gram(&e) - DMatrix::identity(6, 6)).amax() < 1e-12);
    }

    #[test]
    fn unsupported_combinations() {
        let p = ManifoldPoint::sphere(&[1.0, 0.0, 0.0]).unwrap();
        assert!(FrameField::for_chart(p.chart()).is_err());
        assert!(frame_at(&FrameField::s3(), &p).is_err());
        assert!(frame_at(&FrameField::Canonical, &p).is_err());
    }

    #[test]
    fn coordinates_round_trip() {
        let p = ManifoldPoint::sphere_normalized(&[0.2, 0.5, 0.1, 0.8]).unwrap();
        let frame = FrameField::s3();
        let v = combine_frame(&frame, &p, &[0.3, -0.1, 0.7]).unwrap();
        let a = frame_coordinates(&frame, &v).unwrap();
        assert!((a - DVector::from_vec(vec![0.3, -0.1, 0.7])).amax() < 1e-14);
    }
}
