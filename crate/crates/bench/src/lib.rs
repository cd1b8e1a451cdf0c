//! Shared fixtures for the benchmark suite.

use wold2d::field::{CovarianceModel, Tap};
use wold2d::HalfPlane;

pub fn row_moving_average() -> CovarianceModel {
    CovarianceModel::MovingAverage {
        coeffs: vec![
            Tap {
                k: 0,
                l: 0,
                re: 1.0,
                im: 0.0,
            },
            Tap {
                k: -1,
                l: 0,
                re: 0.5,
                im: 0.0,
            },
            Tap {
                k: 0,
                l: -1,
                re: 0.25,
                im: 0.0,
            },
        ],
        noise_variance: 1.0,
    }
}

pub fn steep_halfplane() -> HalfPlane {
    HalfPlane::rational(-2, -3).unwrap()
}
