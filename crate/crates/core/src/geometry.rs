//! Magnet array layout and magnetic moments.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{deg_to_rad, normalize_degrees, Scalar};
use crate::vec3::Vec3;

/// Vacuum permeability in N/A².
pub fn mu0<T: Scalar>() -> T {
    T::lit(4.0e-7) * T::PI()
}

/// A cubic permanent magnet treated as a point dipole.
///
/// The angle is a rotation about the X-axis, counterclockwise from +Z, stored
/// in degrees on `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Magnet<T> {
    center: Vec3<T>,
    edge_length: T,
    remanence: T,
    angle_deg: T,
}

impl<T: Scalar> Magnet<T> {
    pub fn new(center: Vec3<T>, edge_length: T, remanence: T, angle_deg: T) -> Result<Self> {
        if !(edge_length > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "edge length must be positive, got {}",
                edge_length.value()
            )));
        }
        if !(remanence > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "remanence must be positive, got {}",
                remanence.value()
            )));
        }
        if !center.is_finite() || !angle_deg.is_finite() {
            return Err(Error::NonFinite("magnet center or angle".into()));
        }
        Ok(Self {
            center,
            edge_length,
            remanence,
            angle_deg: normalize_degrees(angle_deg),
        })
    }

    pub fn center(&self) -> Vec3<T> {
        self.center
    }

    pub fn edge_length(&self) -> T {
        self.edge_length
    }

    pub fn remanence(&self) -> T {
        self.remanence
    }

    pub fn angle_deg(&self) -> T {
        self.angle_deg
    }

    pub fn with_angle(&self, angle_deg: T) -> Self {
        Self {
            angle_deg: normalize_degrees(angle_deg),
            ..*self
        }
    }

    pub fn with_remanence(&self, remanence: T) -> Result<Self> {
        Self::new(self.center, self.edge_length, remanence, self.angle_deg)
    }

    /// `Br·l³/μ₀`, the dipole moment magnitude in A·m².
    pub fn moment_magnitude(&self) -> T {
        self.remanence * self.edge_length.powi(3) / mu0::<T>()
    }

    /// Space diagonal `√3·l`.
    pub fn space_diagonal(&self) -> T {
        T::lit(3.0).sqrt() * self.edge_length
    }

    /// Distance below which the point-dipole approximation is not trusted.
    pub fn validity_radius(&self) -> T {
        T::lit(1.5) * self.space_diagonal()
    }

    /// True when `point` lies inside the (axis-aligned, unrotated) cube volume.
    pub fn contains(&self, point: &Vec3<T>) -> bool {
        let half = self.edge_length / T::lit(2.0);
        let d = *point - self.center;
        d.x.abs() < half && d.y.abs() < half && d.z.abs() < half
    }

    /// Magnetic moment `R_x(α)·(0, 0, Br·l³/μ₀)`.
    pub fn moment(&self) -> Vec3<T> {
        moment_from_angle(self.moment_magnitude(), self.angle_deg)
    }

    pub fn cast<U: Scalar>(&self) -> Magnet<U> {
        Magnet {
            center: self.center.cast(),
            edge_length: U::lit(self.edge_length.value()),
            remanence: U::lit(self.remanence.value()),
            angle_deg: U::lit(self.angle_deg.value()),
        }
    }
}

/// Moment of a dipole of the given magnitude rotated by `angle_deg` about X.
#[inline]
pub fn moment_from_angle<T: Scalar>(magnitude: T, angle_deg: T) -> Vec3<T> {
    let (s, c) = deg_to_rad(angle_deg).sin_cos();
    Vec3::new(T::zero(), -s * magnitude, c * magnitude)
}

/// Free-function form of [`Magnet::moment`].
pub fn moment_vector<T: Scalar>(magnet: &Magnet<T>) -> Vec3<T> {
    magnet.moment()
}

/// Even-count linear array of magnets on the Z-axis, ordered by descending z.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MagnetArray<T> {
    magnets: Vec<Magnet<T>>,
    pitch: T,
    extra_spacing: T,
}

impl<T: Scalar> MagnetArray<T> {
    /// Assembles an array from explicit magnets. Magnets are sorted by
    /// descending z; the set must be even, on-axis and mirror-symmetric.
    pub fn from_magnets(mut magnets: Vec<Magnet<T>>, pitch: T, extra_spacing: T) -> Result<Self> {
        if magnets.is_empty() || !magnets.len().is_multiple_of(2) {
            return Err(Error::OddMagnetCount(magnets.len()));
        }
        magnets.sort_by(|a, b| {
            b.center
                .z
                .partial_cmp(&a.center.z)
                .expect("finite magnet centers")
        });
        let n = magnets.len();
        let tol = T::lit(1e-12) * (T::one() + magnets[0].center.z.abs());
        for (k, m) in magnets.iter().enumerate() {
            let c = m.center;
            if c.x.abs() > tol || c.y.abs() > tol {
                return Err(Error::InvalidParameter(format!(
                    "magnet {} is off the Z-axis",
                    k + 1
                )));
            }
            if (c.z + magnets[n - 1 - k].center.z).abs() > tol {
                return Err(Error::InvalidParameter(
                    "magnet centers are not symmetric about the origin".into(),
                ));
            }
            let min_pitch = T::lit(2.0).sqrt() * m.edge_length;
            if pitch < min_pitch * (T::one() - T::lit(1e-12)) {
                return Err(Error::PitchTooSmall {
                    pitch: pitch.value(),
                    min: min_pitch.value(),
                });
            }
        }
        Ok(Self {
            magnets,
            pitch,
            extra_spacing,
        })
    }

    pub fn magnets(&self) -> &[Magnet<T>] {
        &self.magnets
    }

    pub fn len(&self) -> usize {
        self.magnets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnets.is_empty()
    }

    pub fn pitch(&self) -> T {
        self.pitch
    }

    pub fn extra_spacing(&self) -> T {
        self.extra_spacing
    }

    pub fn angles_deg(&self) -> Vec<T> {
        self.magnets.iter().map(|m| m.angle_deg).collect()
    }

    /// Copy of the array with new rotation angles (degrees, any range).
    pub fn with_angles(&self, angles_deg: &[T]) -> Result<Self> {
        if angles_deg.len() != self.magnets.len() {
            return Err(Error::ShapeMismatch {
                expected: self.magnets.len(),
                actual: angles_deg.len(),
            });
        }
        if angles_deg.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("magnet angle".into()));
        }
        Ok(Self {
            magnets: self
                .magnets
                .iter()
                .zip(angles_deg)
                .map(|(m, &a)| m.with_angle(a))
                .collect(),
            pitch: self.pitch,
            extra_spacing: self.extra_spacing,
        })
    }

    /// Copy of the array with every remanence multiplied by `factor`.
    pub fn scale_remanence(&self, factor: T) -> Result<Self> {
        let magnets = self
            .magnets
            .iter()
            .map(|m| m.with_remanence(m.remanence * factor))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            magnets,
            pitch: self.pitch,
            extra_spacing: self.extra_spacing,
        })
    }

    pub fn cast<U: Scalar>(&self) -> MagnetArray<U> {
        MagnetArray {
            magnets: self.magnets.iter().map(Magnet::cast).collect(),
            pitch: U::lit(self.pitch.value()),
            extra_spacing: U::lit(self.extra_spacing.value()),
        }
    }
}

/// Builds `n` identical magnets at `z = ±(2k−1)/2·pitch`, all angles zero.
///
/// The pitch is `pitch_override` when given, otherwise the face diagonal
/// `√2·l` plus `extra_spacing`.
pub fn build_array<T: Scalar>(
    n: usize,
    edge_length: T,
    remanence: T,
    extra_spacing: T,
    pitch_override: Option<T>,
) -> Result<MagnetArray<T>> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::OddMagnetCount(n));
    }
    if !(edge_length > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "edge length must be positive, got {}",
            edge_length.value()
        )));
    }
    if extra_spacing < T::zero() {
        return Err(Error::InvalidParameter(format!(
            "extra spacing must be non-negative, got {}",
            extra_spacing.value()
        )));
    }
    let face_diagonal = T::lit(2.0).sqrt() * edge_length;
    let pitch = match pitch_override {
        Some(p) if p < face_diagonal => {
            return Err(Error::PitchTooSmall {
                pitch: p.value(),
                min: face_diagonal.value(),
            })
        }
        Some(p) => p,
        None => face_diagonal + extra_spacing,
    };
    let half = n / 2;
    let mut magnets = Vec::with_capacity(n);
    for k in (1..=half).rev() {
        let z = T::lit((2 * k - 1) as f64) / T::lit(2.0) * pitch;
        magnets.push(Magnet::new(
            Vec3::new(T::zero(), T::zero(), z),
            edge_length,
            remanence,
            T::zero(),
        )?);
    }
    for k in 1..=half {
        let z = -(T::lit((2 * k - 1) as f64) / T::lit(2.0) * pitch);
        magnets.push(Magnet::new(
            Vec3::new(T::zero(), T::zero(), z),
            edge_length,
            remanence,
            T::zero(),
        )?);
    }
    MagnetArray::from_magnets(magnets, pitch, extra_spacing)
}

/// The magnetic payload carried by the robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RobotMagnet<T> {
    remanence: T,
    volume: T,
}

impl<T: Scalar> RobotMagnet<T> {
    pub fn new(remanence: T, volume: T) -> Result<Self> {
        if !(remanence > T::zero()) || !(volume > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "robot remanence and volume must be positive, got {} T and {} m^3",
                remanence.value(),
                volume.value()
            )));
        }
        Ok(Self { remanence, volume })
    }

    /// Axially magnetized cylinder of the given diameter and length.
    pub fn cylinder(remanence: T, diameter: T, length: T) -> Result<Self> {
        let r = diameter / T::lit(2.0);
        Self::new(remanence, T::PI() * r * r * length)
    }

    pub fn remanence(&self) -> T {
        self.remanence
    }

    pub fn volume(&self) -> T {
        self.volume
    }

    /// `Br·V/μ₀` in A·m².
    pub fn moment_magnitude(&self) -> T {
        self.remanence * self.volume / mu0::<T>()
    }

    pub fn cast<U: Scalar>(&self) -> RobotMagnet<U> {
        RobotMagnet {
            remanence: U::lit(self.remanence.value()),
            volume: U::lit(self.volume.value()),
        }
    }
}
