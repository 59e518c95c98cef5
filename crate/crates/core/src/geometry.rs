//! Planar positions, poses and waypoint paths.

use std::ops::{Add, Mul, Sub};

use crate::scalar::{wrap_angle, Scalar};

/// A point or displacement in the workspace plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Vec2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 2-D cross product.
    pub fn cross(self, other: Self) -> T {
        self.x * other.y - self.y * other.x
    }

    pub fn distance(self, other: Self) -> T {
        (self - other).norm()
    }

    pub fn heading(self) -> T {
        self.y.atan2(self.x)
    }
}

impl<T: Scalar> Add for Vec2<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<T: Scalar> Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<T: Scalar> Mul<T> for Vec2<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        Self::new(self.x * rhs, self.y * rhs)
    }
}

/// Planar robot pose. `theta` is kept in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose<T> {
    pub x: T,
    pub y: T,
    pub theta: T,
}

impl<T: Scalar> Pose<T> {
    pub fn new(x: T, y: T, theta: T) -> Self {
        Self { x, y, theta: wrap_angle(theta) }
    }

    pub fn position(&self) -> Vec2<T> {
        Vec2::new(self.x, self.y)
    }
}

/// Linear and angular velocity command.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Control<T> {
    /// m/s
    pub v: T,
    /// rad/s
    pub omega: T,
}

impl<T: Scalar> Control<T> {
    pub fn new(v: T, omega: T) -> Self {
        Self { v, omega }
    }
}

/// Ordered waypoint sequence.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Path<T> {
    pub points: Vec<Vec2<T>>,
}

impl<T: Scalar> Path<T> {
    pub fn new(points: Vec<Vec2<T>>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Polyline arc length.
    pub fn length(&self) -> T {
        self.points.windows(2).map(|w| w[0].distance(w[1])).sum()
    }

    pub fn first(&self) -> Option<Vec2<T>> {
        self.points.first().copied()
    }

    pub fn last(&self) -> Option<Vec2<T>> {
        self.points.last().copied()
    }
}

impl<T> FromIterator<Vec2<T>> for Path<T> {
    fn from_iter<I: IntoIterator<Item = Vec2<T>>>(iter: I) -> Self {
        Self { points: iter.into_iter().collect() }
    }
}
