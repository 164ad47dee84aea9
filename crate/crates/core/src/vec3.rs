//! Small helpers on `[f64; 3]` points and displacements.

#![allow(dead_code)]

use crate::fx;

#[inline]
pub fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm_sq(a: [f64; 3]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: [f64; 3]) -> f64 {
    fx::sqrt(norm_sq(a))
}

#[inline]
pub fn dist_sq(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm_sq(sub(a, b))
}

#[inline]
pub fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    fx::sqrt(dist_sq(a, b))
}

#[inline]
pub fn is_finite(a: [f64; 3]) -> bool {
    a[0].is_finite() && a[1].is_finite() && a[2].is_finite()
}
