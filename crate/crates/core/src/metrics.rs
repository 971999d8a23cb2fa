//! Isometric and area distortion of a cage deformation.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cage::{CagePair, Point};
use crate::coords::{deformation_coefficients, CoordOptions};
use crate::diff::compute_differentials;
use crate::error::{Error, Result};
use crate::kernels::KernelContext;
use crate::spd::SpdMatrix;

pub const ISO_DEFINITION: &str = "||J^T J - I||_F / sqrt(d)";
pub const AREA_DEFINITION: &str = "|det J - 1|";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDistortion {
    pub point: Vec<f64>,
    /// row-major
    pub jacobian: Vec<f64>,
    pub iso: f64,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    /// Row-major entries of the coefficient matrix.
    pub matrix: Vec<f64>,
    pub label: String,
    pub iso_definition: String,
    pub area_definition: String,
    pub mean_iso: f64,
    pub mean_area: f64,
    pub per_sample: Vec<SampleDistortion>,
}

pub fn iso_distortion(j: &DMatrix<f64>) -> f64 {
    let d = j.nrows();
    (j.transpose() * j - DMatrix::identity(d, d)).norm() / (d as f64).sqrt()
}

pub fn area_distortion(j: &DMatrix<f64>) -> f64 {
    (j.determinant() - 1.0).abs()
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// Distortion of the scale-corrected deformation `pair` under `ctx`'s matrix.
pub fn measure(ctx: &KernelContext, pair: &CagePair, samples: &[Point]) -> Result<DistortionReport> {
    if samples.is_empty() {
        return Err(Error::NoValidSamples);
    }
    let a = ctx.matrix();
    let (av, bt) = deformation_coefficients(pair, a, true);
    let table = compute_differentials(ctx, samples, &CoordOptions::default())?;
    let per_sample: Vec<SampleDistortion> = (0..samples.len())
        .into_par_iter()
        .map(|s| {
            let j = table.jacobian(s, &av, &bt);
            SampleDistortion {
                point: samples[s].as_slice().to_vec(),
                jacobian: row_major(&j),
                iso: iso_distortion(&j),
                area: area_distortion(&j),
            }
        })
        .collect();
    let n = per_sample.len() as f64;
    Ok(DistortionReport {
        matrix: row_major(a.entries()),
        label: String::new(),
        iso_definition: ISO_DEFINITION.into(),
        area_definition: AREA_DEFINITION.into(),
        mean_iso: per_sample.iter().map(|s| s.iso).sum::<f64>() / n,
        mean_area: per_sample.iter().map(|s| s.area).sum::<f64>() / n,
        per_sample,
    })
}

/// One report per labelled matrix plus an `A = I` baseline (labelled
/// `"identity"` unless the grid already holds the identity), sorted by
/// `mean_iso`. Ties keep grid order.
pub fn sweep(pair: &CagePair, grid: &[(String, SpdMatrix)], samples: &[Point]) -> Result<Vec<DistortionReport>> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty parameter grid".into()));
    }
    let dim = pair.source().dim();
    let mut all: Vec<(String, SpdMatrix)> = grid.to_vec();
    if !all.iter().any(|(_, a)| a.is_identity()) {
        all.insert(0, ("identity".into(), SpdMatrix::identity(dim)?));
    }
    let mut reports = all
        .par_iter()
        .map(|(label, a)| {
            let ctx = KernelContext::new(pair.source(), a)?;
            let mut r = measure(&ctx, pair, samples)?;
            r.label = label.clone();
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    reports.sort_by(|x, y| x.mean_iso.total_cmp(&y.mean_iso));
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cage::Cage;
    use crate::spd::{build_2d, AnisoParams2D};
    use nalgebra::DVector;

    fn p(c: &[f64]) -> Point {
        DVector::from_column_slice(c)
    }

    fn square() -> Cage {
        Cage::polygon(vec![p(&[0., 0.]), p(&[1., 0.]), p(&[1., 1.]), p(&[0., 1.])]).unwrap()
    }

    fn samples() -> Vec<Point> {
        vec![p(&[0.3, 0.3]), p(&[0.5, 0.7]), p(&[0.8, 0.2])]
    }

    #[test]
    fn identity_pair_has_no_distortion() {
        let a = build_2d(&AnisoParams2D { theta: 0.4, lambda1: 1.0, lambda2: 3.0 }).unwrap();
        let ctx = KernelContext::new(&square(), &a).unwrap();
        let r = measure(&ctx, &CagePair::identity(square()), &samples()).unwrap();
        assert!(r.mean_iso < 1e-10 && r.mean_area < 1e-10);
    }

    #[test]
    fn uniform_scaling_and_rotation() {
        let a = SpdMatrix::identity(2).unwrap();
        let ctx = KernelContext::new(&square(), &a).unwrap();
        let scaled =
            CagePair::with_target_vertices(&square(), square().vertices().iter().map(|v| v * 1.5).collect()).unwrap();
        let r = measure(&ctx, &scaled, &samples()).unwrap();
        for s in &r.per_sample {
            assert!((s.area - (1.5f64.powi(2) - 1.0)).abs() < 1e-9);
        }
        let (c, sn) = (0.6f64.cos(), 0.6f64.sin());
        let rotated = CagePair::with_target_vertices(
            &square(),
            square().vertices().iter().map(|v| p(&[c * v[0] - sn * v[1] + 2.0, sn * v[0] + c * v[1]])).collect(),
        )
        .unwrap();
        let r = measure(&ctx, &rotated, &samples()).unwrap();
        assert!(r.mean_iso < 1e-9 && r.mean_area < 1e-9);
    }

    #[test]
    fn sweep_adds_baseline_and_sorts() {
        let stretched = CagePair::with_target_vertices(
            &square(),
            square().vertices().iter().map(|v| p(&[2.0 * v[0], v[1]])).collect(),
        )
        .unwrap();
        let grid: Vec<(String, SpdMatrix)> = [0.0, 0.5]
            .iter()
            .map(|&t| {
                (format!("theta={t}"), build_2d(&AnisoParams2D { theta: t, lambda1: 1.0, lambda2: 4.0 }).unwrap())
            })
            .collect();
        let reports = sweep(&stretched, &grid, &samples()).unwrap();
        assert_eq!(reports.len(), 3);
        assert!(reports.windows(2).all(|w| w[0].mean_iso <= w[1].mean_iso));
        let base = reports.iter().find(|r| r.label == "identity").unwrap();
        let ctx = KernelContext::new(&square(), &SpdMatrix::identity(2).unwrap()).unwrap();
        assert_eq!(base, &{
            let mut r = measure(&ctx, &stretched, &samples()).unwrap();
            r.label = "identity".into();
            r
        });
    }
}
