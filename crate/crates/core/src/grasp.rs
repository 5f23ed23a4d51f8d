//! Geometric primitives shared by every stage: grasps, gripper geometry,
//! point clouds and the canonical grasp coordinate frame.
//!
//! A grasp is `(c, r, θ)`: the center `c`, the unit jaw axis `r` (grasp-frame
//! Y axis) and the approach angle `θ ∈ [−π/2, π/2]`. The approach direction
//! (grasp-frame X axis) is obtained by rotating a ground-parallel axis `X′`
//! about `r` by `θ`, so `θ = π/2` approaches straight down along −Z.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Tolerance on `|r| = 1` accepted by [`Grasp::new`].
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Below this horizontal magnitude the jaw axis is treated as parallel to world Z.
pub const VERTICAL_AXIS_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grasp {
    pub center: Vec3,
    /// Unit jaw axis, grasp-frame Y.
    pub orientation: Vec3,
    /// Approach angle in radians.
    pub theta: f64,
}

impl Grasp {
    /// Builds a grasp, checking `|orientation| = 1 ± 1e−9` and `θ ∈ [−π/2, π/2]`.
    pub fn new(center: Vec3, orientation: Vec3, theta: f64) -> Result<Self> {
        let g = Grasp {
            center,
            orientation,
            theta,
        };
        g.validate()?;
        Ok(g)
    }

    /// Like [`Grasp::new`] but rescales `orientation` to unit length first.
    pub fn normalized(center: Vec3, orientation: Vec3, theta: f64) -> Result<Self> {
        let n = orientation.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidInput(format!(
                "orientation {orientation:?} cannot be normalized"
            )));
        }
        Self::new(center, orientation / n, theta)
    }

    pub fn validate(&self) -> Result<()> {
        if !all_finite(&self.center) || !all_finite(&self.orientation) || !self.theta.is_finite() {
            return Err(Error::InvalidInput("grasp has non-finite fields".into()));
        }
        let n = self.orientation.norm();
        if (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "grasp orientation must be unit length, |r| = {n}"
            )));
        }
        check_theta(self.theta)?;
        Ok(())
    }

    pub fn frame(&self) -> GraspFrame {
        grasp_frame(self)
    }

    pub fn vertical_score(&self) -> Result<f64> {
        vertical_score(self.theta)
    }
}

/// A grasp together with its (ground-truth or predicted) antipodal score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredGrasp {
    pub grasp: Grasp,
    pub s_q: f64,
}

impl ScoredGrasp {
    pub fn new(grasp: Grasp, s_q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&s_q) {
            return Err(Error::Domain(format!("s_q = {s_q} outside [0, 1]")));
        }
        Ok(ScoredGrasp { grasp, s_q })
    }
}

/// Simplified parallel-jaw gripper `S = (D, W, H, T)`, all in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GripperParams {
    /// Inner depth `D` along the approach axis.
    pub depth: f64,
    /// Inner opening `W` between the fingers.
    pub width: f64,
    /// Finger height `H`.
    pub height: f64,
    /// Finger (and back plate) thickness `T`.
    pub thickness: f64,
}

impl GripperParams {
    pub fn new(depth: f64, width: f64, height: f64, thickness: f64) -> Result<Self> {
        let s = GripperParams {
            depth,
            width,
            height,
            thickness,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.depth, self.width, self.height, self.thickness];
        if dims.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInput(format!(
                "gripper dimensions must be finite and positive, got {dims:?}"
            )));
        }
        let scale = dims.iter().cloned().fold(0.0, f64::max);
        if self.width < 2.0 * f64::EPSILON * scale {
            return Err(Error::InvalidInput(format!(
                "gripper width {} is negligible at scale {scale}",
                self.width
            )));
        }
        Ok(())
    }

    pub fn with_width(&self, width: f64) -> Result<Self> {
        Self::new(self.depth, width, self.height, self.thickness)
    }
}

/// N points with optional unit normals and RGB colours in [0, 1].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
    pub colors: Option<Vec<[f64; 3]>>,
}

impl PointCloud {
    pub fn from_points(points: Vec<Vec3>) -> Self {
        PointCloud {
            points,
            normals: None,
            colors: None,
        }
    }

    pub fn with_normals(points: Vec<Vec3>, normals: Vec<Vec3>) -> Result<Self> {
        let cloud = PointCloud {
            points,
            normals: Some(normals),
            colors: None,
        };
        cloud.validate()?;
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn has_normals(&self) -> bool {
        self.normals.is_some()
    }

    /// Normals, or an error naming the operation that needs them.
    pub fn require_normals(&self, what: &str) -> Result<&[Vec3]> {
        self.normals
            .as_deref()
            .ok_or_else(|| Error::InvalidInput(format!("{what} requires a cloud with normals")))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.points.len();
        if let Some(i) = self.points.iter().position(|p| !all_finite(p)) {
            return Err(Error::InvalidInput(format!("point {i} is not finite")));
        }
        if let Some(normals) = &self.normals {
            if normals.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: normals.len(),
                });
            }
            if let Some(i) = normals
                .iter()
                .position(|v| !all_finite(v) || (v.norm() - 1.0).abs() > 1e-6)
            {
                return Err(Error::InvalidInput(format!("normal {i} is not unit length")));
            }
        }
        if let Some(colors) = &self.colors {
            if colors.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    actual: colors.len(),
                });
            }
            if colors
                .iter()
                .flatten()
                .any(|c| !(0.0..=1.0).contains(c))
            {
                return Err(Error::InvalidInput("colors must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    /// Keeps the listed points (and their normals/colours) in the given order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| indices.iter().map(|&i| ns[i]).collect()),
            colors: self
                .colors
                .as_ref()
                .map(|cs| indices.iter().map(|&i| cs[i]).collect()),
        }
    }
}

/// Canonical grasp coordinate frame. Columns of `rotation` are `(X_G, Y_G, Z_G)`
/// expressed in world coordinates; `X_G` is the approach direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspFrame {
    pub rotation: Matrix3<f64>,
    pub origin: Vec3,
}

impl GraspFrame {
    pub fn identity() -> Self {
        GraspFrame {
            rotation: Matrix3::identity(),
            origin: Vec3::zeros(),
        }
    }

    pub fn approach(&self) -> Vec3 {
        self.rotation.column(0).into_owned()
    }

    pub fn closing_axis(&self) -> Vec3 {
        self.rotation.column(1).into_owned()
    }

    pub fn binormal(&self) -> Vec3 {
        self.rotation.column(2).into_owned()
    }

    /// `Rᵀ·(p − origin)`.
    pub fn world_to_grasp(&self, p: &Vec3) -> Vec3 {
        self.rotation.tr_mul(&(p - self.origin))
    }

    /// `R·q + origin`.
    pub fn grasp_to_world(&self, q: &Vec3) -> Vec3 {
        self.rotation * q + self.origin
    }
}

/// Ground-parallel axis `X′ = normalize(r_y, −r_x, 0)`, with a fallback to
/// world X when `r` is (numerically) vertical. The flag reports the fallback.
pub fn ground_axis(r: &Vec3) -> (Vec3, bool) {
    if r.x.abs() < VERTICAL_AXIS_EPS && r.y.abs() < VERTICAL_AXIS_EPS {
        // Re-orthogonalise so the frame stays orthonormal for nearly vertical r.
        let x = Vec3::x() - r * r.x;
        return (x.normalize(), true);
    }
    (Vec3::new(r.y, -r.x, 0.0).normalize(), false)
}

/// Canonical frame of `g`; see [`grasp_frame_checked`] for the degeneracy flag.
pub fn grasp_frame(g: &Grasp) -> GraspFrame {
    grasp_frame_checked(g).0
}

/// Builds the grasp frame and reports whether the vertical-axis fallback was used.
pub fn grasp_frame_checked(g: &Grasp) -> (GraspFrame, bool) {
    let y = g.orientation;
    let (x_prime, degenerate) = ground_axis(&y);
    // Rodrigues rotation of X′ about Y by θ; X′ ⊥ Y so the axial term vanishes.
    let (s, c) = g.theta.sin_cos();
    let x = x_prime * c + y.cross(&x_prime) * s;
    let z = x.cross(&y);
    (
        GraspFrame {
            rotation: Matrix3::from_columns(&[x, y, z]),
            origin: g.center,
        },
        degenerate,
    )
}

/// Inverse of the frame construction: the approach angle that makes the
/// approach axis of a grasp with jaw axis `r` equal to `approach`.
///
/// `approach` must be perpendicular to `r`. The returned angle lies in
/// `(−π, π]`; callers flip `r` to bring it into `[−π/2, π/2]`.
pub fn approach_angle(r: &Vec3, approach: &Vec3) -> f64 {
    let (x_prime, _) = ground_axis(r);
    let y_cross = r.cross(&x_prime);
    approach.dot(&y_cross).atan2(approach.dot(&x_prime))
}

/// `s_v = 0.5 + θ/π`.
pub fn vertical_score(theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(0.5 + theta / PI)
}

fn check_theta(theta: f64) -> Result<()> {
    if !(-FRAC_PI_2..=FRAC_PI_2).contains(&theta) {
        return Err(Error::Domain(format!(
            "approach angle {theta} outside [-pi/2, pi/2]"
        )));
    }
    Ok(())
}

pub(crate) fn all_finite(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// Angle between two non-zero vectors in `[0, π]`.
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}
