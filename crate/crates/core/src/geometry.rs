//! Parametric reference paths and the transforms between the world frame and
//! the Serret-Frenet frame attached to the virtual target.
//!
//! All path quantities are functions of the raw path parameter `p`. The
//! Lissajous family is therefore not arc-length parametrized; curvature uses
//! the general parametric formula, which is the geometric curvature of the
//! curve regardless of parametrization.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector2;

use crate::error::{Error, Result};

/// Derivative norms below this are treated as a singular parametrization.
pub const DEGENERATE_EPS: f64 = 1e-12;

pub type Point2 = Vector2<f64>;

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let w = angle.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

/// A desired path in the world plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathSpec {
    /// The world x-axis, `(p, 0)`.
    Line,
    /// Counter-clockwise circle about the origin, arc-length parametrized:
    /// `(r cos(p/r), r sin(p/r))`.
    Circle { radius: f64 },
    /// `(ax sin(fx p), ay sin(fy p))`.
    Lissajous { ax: f64, ay: f64, fx: f64, fy: f64 },
}

impl Default for PathSpec {
    fn default() -> Self {
        PathSpec::Lissajous {
            ax: 10.0,
            ay: 15.0,
            fx: 1.0,
            fy: 2.0,
        }
    }
}

impl PathSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PathSpec::Line => Ok(()),
            PathSpec::Circle { radius } => {
                if radius.is_finite() && radius > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("path.radius", "must be positive and finite"))
                }
            }
            PathSpec::Lissajous { ax, ay, fx, fy } => {
                for (name, v) in [
                    ("path.ax", ax),
                    ("path.ay", ay),
                    ("path.fx", fx),
                    ("path.fy", fy),
                ] {
                    if !v.is_finite() {
                        return Err(Error::invalid(name, "must be finite"));
                    }
                }
                Ok(())
            }
        }
    }

    /// Position `(x_des(p), y_des(p))`.
    pub fn point(&self, p: f64) -> Point2 {
        match *self {
            PathSpec::Line => Point2::new(p, 0.0),
            PathSpec::Circle { radius } => {
                let a = p / radius;
                Point2::new(radius * a.cos(), radius * a.sin())
            }
            PathSpec::Lissajous { ax, ay, fx, fy } => {
                Point2::new(ax * (fx * p).sin(), ay * (fy * p).sin())
            }
        }
    }

    /// First derivative with respect to the path parameter.
    pub fn d1(&self, p: f64) -> Point2 {
        match *self {
            PathSpec::Line => Point2::new(1.0, 0.0),
            PathSpec::Circle { radius } => {
                let a = p / radius;
                Point2::new(-a.sin(), a.cos())
            }
            PathSpec::Lissajous { ax, ay, fx, fy } => {
                Point2::new(ax * fx * (fx * p).cos(), ay * fy * (fy * p).cos())
            }
        }
    }

    pub fn d2(&self, p: f64) -> Point2 {
        match *self {
            PathSpec::Line => Point2::zeros(),
            PathSpec::Circle { radius } => {
                let a = p / radius;
                Point2::new(-a.cos(), -a.sin()) / radius
            }
            PathSpec::Lissajous { ax, ay, fx, fy } => Point2::new(
                -ax * fx * fx * (fx * p).sin(),
                -ay * fy * fy * (fy * p).sin(),
            ),
        }
    }

    pub fn d3(&self, p: f64) -> Point2 {
        match *self {
            PathSpec::Line => Point2::zeros(),
            PathSpec::Circle { radius } => {
                let a = p / radius;
                Point2::new(a.sin(), -a.cos()) / (radius * radius)
            }
            PathSpec::Lissajous { ax, ay, fx, fy } => Point2::new(
                -ax * fx.powi(3) * (fx * p).cos(),
                -ay * fy.powi(3) * (fy * p).cos(),
            ),
        }
    }

    fn regular_d1(&self, p: f64) -> Result<Point2> {
        let d = self.d1(p);
        if d.x.abs() < DEGENERATE_EPS && d.y.abs() < DEGENERATE_EPS {
            Err(Error::DegeneratePoint { param: p })
        } else {
            Ok(d)
        }
    }

    /// Angle of the tangent `s_f` against the world x-axis, in `(-pi, pi]`.
    pub fn tangent_angle(&self, p: f64) -> Result<f64> {
        let d = self.regular_d1(p)?;
        Ok(wrap_angle(d.y.atan2(d.x)))
    }

    /// Signed curvature `(x'y'' - y'x'') / (x'^2 + y'^2)^(3/2)`.
    pub fn curvature(&self, p: f64) -> Result<f64> {
        match *self {
            PathSpec::Line => Ok(0.0),
            PathSpec::Circle { radius } => Ok(1.0 / radius),
            PathSpec::Lissajous { .. } => {
                let d1 = self.regular_d1(p)?;
                let d2 = self.d2(p);
                let n = d1.norm_squared();
                Ok(cross(&d1, &d2) / (n * n.sqrt()))
            }
        }
    }

    /// Derivative of [`PathSpec::curvature`] with respect to the path parameter.
    pub fn curvature_slope(&self, p: f64) -> Result<f64> {
        match *self {
            PathSpec::Line | PathSpec::Circle { .. } => Ok(0.0),
            PathSpec::Lissajous { .. } => {
                let d1 = self.regular_d1(p)?;
                let d2 = self.d2(p);
                let d3 = self.d3(p);
                let n = d1.norm_squared();
                let n32 = n * n.sqrt();
                Ok(cross(&d1, &d3) / n32 - 3.0 * cross(&d1, &d2) * d1.dot(&d2) / (n32 * n))
            }
        }
    }

    pub fn frame(&self, p: f64) -> Result<FrenetFrame> {
        Ok(FrenetFrame {
            param: p,
            origin: self.point(p),
            theta_f: self.tangent_angle(p)?,
            curvature: self.curvature(p)?,
        })
    }
}

fn cross(a: &Point2, b: &Point2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Vehicle pose in the world frame `{n}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldPose {
    pub x: f64,
    pub y: f64,
    pub theta_b: f64,
}

impl WorldPose {
    pub fn new(x: f64, y: f64, theta_b: f64) -> Self {
        Self {
            x,
            y,
            theta_b: wrap_angle(theta_b),
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Serret-Frenet frame `{f}` evaluated at path parameter `param`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrenetFrame {
    pub param: f64,
    pub origin: Point2,
    pub theta_f: f64,
    pub curvature: f64,
}

/// Vehicle position and heading relative to `{f}`: tangential offset `s`,
/// normal offset `y` and heading error `theta = theta_b - theta_f`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameOffset {
    pub s: f64,
    pub y: f64,
    pub theta: f64,
}

/// Express `pose` relative to the frame at `sp`.
pub fn frenet_error(path: &PathSpec, sp: f64, pose: &WorldPose) -> Result<FrameOffset> {
    let frame = path.frame(sp)?;
    let d = pose.position() - frame.origin;
    let (sin_f, cos_f) = frame.theta_f.sin_cos();
    Ok(FrameOffset {
        s: cos_f * d.x + sin_f * d.y,
        y: -sin_f * d.x + cos_f * d.y,
        theta: wrap_angle(pose.theta_b - frame.theta_f),
    })
}

/// Inverse of [`frenet_error`].
pub fn world_from_frenet(path: &PathSpec, sp: f64, offset: &FrameOffset) -> Result<WorldPose> {
    let frame = path.frame(sp)?;
    let (sin_f, cos_f) = frame.theta_f.sin_cos();
    Ok(WorldPose::new(
        frame.origin.x + cos_f * offset.s - sin_f * offset.y,
        frame.origin.y + sin_f * offset.s + cos_f * offset.y,
        offset.theta + frame.theta_f,
    ))
}
