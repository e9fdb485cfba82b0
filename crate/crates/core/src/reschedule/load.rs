use std::ops::{Add, AddAssign, Sub, SubAssign};

use serde::{Deserialize, Serialize};

pub const SLOTS: usize = 24;

/// Hour-of-day load profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LoadVector(pub [f64; SLOTS]);

impl Default for LoadVector {
    fn default() -> Self {
        LoadVector::zero()
    }
}

impl LoadVector {
    pub const fn zero() -> Self {
        LoadVector([0.0; SLOTS])
    }

    pub const fn flat(value: f64) -> Self {
        LoadVector([value; SLOTS])
    }

    /// Folds up to seven days of hourly averages into slots, keeping the max
    /// per hour of day. Sample `j` belongs to slot `j % 24`; absent samples
    /// count as zero.
    pub fn from_hourly(samples: &[f64]) -> Self {
        let mut v = LoadVector::zero();
        for (j, s) in samples.iter().take(7 * SLOTS).enumerate() {
            let slot = &mut v.0[j % SLOTS];
            *slot = slot.max(*s);
        }
        v
    }

    pub fn peak(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, k: f64) -> Self {
        LoadVector(self.0.map(|x| x * k))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|x| *x == 0.0)
    }

    /// Peak of `self + other` without materializing the sum.
    pub fn peak_with(&self, other: &LoadVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a + b).fold(0.0, f64::max)
    }

    /// Peak of `self - other`, floored at zero.
    pub fn peak_without(&self, other: &LoadVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).max(0.0)).fold(0.0, f64::max)
    }
}

impl Add for LoadVector {
    type Output = LoadVector;
    fn add(mut self, rhs: LoadVector) -> LoadVector {
        self += rhs;
        self
    }
}

impl AddAssign for LoadVector {
    fn add_assign(&mut self, rhs: LoadVector) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

impl Sub for LoadVector {
    type Output = LoadVector;
    fn sub(mut self, rhs: LoadVector) -> LoadVector {
        self -= rhs;
        self
    }
}

impl SubAssign for LoadVector {
    fn sub_assign(&mut self, rhs: LoadVector) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a = (*a - b).max(0.0);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Ru,
    Storage,
}

impl Dimension {
    pub const ORDER: [Dimension; 2] = [Dimension::Ru, Dimension::Storage];
}
