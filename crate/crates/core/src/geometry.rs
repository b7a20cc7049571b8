//! Smooth inclusion boundaries in the unit cell, sampled at `N` equispaced
//! parameter values for the periodic trapezoid rule.  Curves run
//! counter-clockwise, so `(x2', -x1')/|x'|` is the outward normal.

use crate::error::{Error, Result};
use crate::quasi_green::Point;
use std::f64::consts::TAU;

pub const CLEARANCE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Circle { center: Point, radius: f64 },
    Ellipse { center: Point, semi_axes: [f64; 2] },
    /// `r(theta) = base_radius (1 + amplitude cos(lobes theta))`.
    Star { center: Point, base_radius: f64, amplitude: f64, lobes: u32 },
}

impl Shape {
    pub fn center(&self) -> Point {
        match *self {
            Shape::Circle { center, .. } | Shape::Ellipse { center, .. } | Shape::Star { center, .. } => center,
        }
    }

    /// Position and first two parameter derivatives at `theta`.
    pub fn eval(&self, t: f64) -> (Point, [f64; 2], [f64; 2]) {
        let (c, s) = (t.cos(), t.sin());
        match *self {
            Shape::Circle { center, radius: r } => {
                ([center[0] + r * c, center[1] + r * s], [-r * s, r * c], [-r * c, -r * s])
            }
            Shape::Ellipse { center, semi_axes: [a, b] } => {
                ([center[0] + a * c, center[1] + b * s], [-a * s, b * c], [-a * c, -b * s])
            }
            Shape::Star { center, base_radius: r0, amplitude: am, lobes } => {
                let l = lobes as f64;
                let rho = r0 * (1.0 + am * (l * t).cos());
                let d1 = -r0 * am * l * (l * t).sin();
                let d2 = -r0 * am * l * l * (l * t).cos();
                (
                    [center[0] + rho * c, center[1] + rho * s],
                    [d1 * c - rho * s, d1 * s + rho * c],
                    [d2 * c - 2.0 * d1 * s - rho * c, d2 * s + 2.0 * d1 * c - rho * s],
                )
            }
        }
    }

    /// Exact inside test (all shapes are star-shaped about their center).
    pub fn contains(&self, p: Point) -> bool {
        let c = self.center();
        let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
        match *self {
            Shape::Circle { radius, .. } => dx.hypot(dy) < radius,
            Shape::Ellipse { semi_axes: [a, b], .. } => (dx / a).powi(2) + (dy / b).powi(2) < 1.0,
            Shape::Star { base_radius, amplitude, lobes, .. } => {
                let t = dy.atan2(dx);
                dx.hypot(dy) < base_radius * (1.0 + amplitude * (lobes as f64 * t).cos())
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |v: f64| v.is_finite();
        match *self {
            Shape::Circle { radius, .. } if !(radius > 0.0 && finite(radius)) => {
                Err(Error::Geometry(format!("radius {radius} must be positive")))
            }
            Shape::Ellipse { semi_axes: [a, b], .. } if !(a > 0.0 && b > 0.0 && finite(a) && finite(b)) => {
                Err(Error::Geometry(format!("semi-axes ({a}, {b}) must be positive")))
            }
            Shape::Star { base_radius, amplitude, lobes, .. } => {
                if !(base_radius > 0.0 && finite(base_radius)) {
                    return Err(Error::Geometry(format!("base radius {base_radius} must be positive")));
                }
                if !(amplitude >= 0.0 && amplitude < base_radius / 2.0 && amplitude < 1.0) {
                    return Err(Error::Geometry(format!(
                        "star amplitude {amplitude} must lie in [0, base_radius/2) to keep the curve simple"
                    )));
                }
                if lobes == 0 {
                    return Err(Error::Geometry("star needs at least one lobe".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Boundary `dD` discretised at `theta_j = 2 pi j / N`.
#[derive(Clone, Debug)]
pub struct BoundaryCurve {
    shape: Shape,
    nodes: Vec<Point>,
    derivs: Vec<[f64; 2]>,
    normals: Vec<[f64; 2]>,
    tangents: Vec<[f64; 2]>,
    speeds: Vec<f64>,
    weights: Vec<f64>,
    curvature: Vec<f64>,
}

pub fn make_circle(center: Point, radius: f64, n: usize) -> Result<BoundaryCurve> {
    BoundaryCurve::new(Shape::Circle { center, radius }, n)
}

pub fn make_ellipse(center: Point, semi_axes: [f64; 2], n: usize) -> Result<BoundaryCurve> {
    BoundaryCurve::new(Shape::Ellipse { center, semi_axes }, n)
}

pub fn make_star(center: Point, base_radius: f64, amplitude: f64, lobes: u32, n: usize) -> Result<BoundaryCurve> {
    BoundaryCurve::new(Shape::Star { center, base_radius, amplitude, lobes }, n)
}

impl BoundaryCurve {
    pub fn new(shape: Shape, n: usize) -> Result<Self> {
        if n < 16 || !n.is_multiple_of(2) {
            return Err(Error::Geometry(format!("node count {n} must be even and >= 16")));
        }
        shape.validate()?;
        // clearance on a fine sampling of the parametrisation
        for j in 0..8 * n {
            let (p, _, _) = shape.eval(TAU * j as f64 / (8 * n) as f64);
            if p.iter().any(|&v| !(CLEARANCE..=1.0 - CLEARANCE).contains(&v)) {
                return Err(Error::Geometry(format!(
                    "curve leaves the unit cell minus a {CLEARANCE} margin near ({:.4}, {:.4})",
                    p[0], p[1]
                )));
            }
        }
        let mut curve = Self {
            shape,
            nodes: Vec::with_capacity(n),
            derivs: Vec::with_capacity(n),
            normals: Vec::with_capacity(n),
            tangents: Vec::with_capacity(n),
            speeds: Vec::with_capacity(n),
            weights: Vec::with_capacity(n),
            curvature: Vec::with_capacity(n),
        };
        for j in 0..n {
            let (p, d1, d2) = curve.shape.eval(TAU * j as f64 / n as f64);
            let sp = d1[0].hypot(d1[1]);
            curve.nodes.push(p);
            curve.derivs.push(d1);
            curve.tangents.push([d1[0] / sp, d1[1] / sp]);
            curve.normals.push([d1[1] / sp, -d1[0] / sp]);
            curve.speeds.push(sp);
            curve.weights.push(sp * TAU / n as f64);
            curve.curvature.push((d1[0] * d2[1] - d1[1] * d2[0]) / (sp * sp * sp));
        }
        if curve.curvature.iter().any(|k| !k.is_finite()) {
            return Err(Error::Geometry("degenerate parametrisation (zero speed)".into()));
        }
        Ok(curve)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }
    /// `dx/dtheta` at the nodes.
    pub fn derivatives(&self) -> &[[f64; 2]] {
        &self.derivs
    }
    pub fn normals(&self) -> &[[f64; 2]] {
        &self.normals
    }
    pub fn tangents(&self) -> &[[f64; 2]] {
        &self.tangents
    }
    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    /// Signed curvature, positive where the curve is convex.
    pub fn curvature(&self) -> &[f64] {
        &self.curvature
    }

    /// The same shape with a different node count.
    pub fn resampled(&self, n: usize) -> Result<Self> {
        Self::new(self.shape.clone(), n)
    }

    /// Largest arc-length gap between consecutive nodes.
    pub fn node_spacing(&self) -> f64 {
        self.weights.iter().cloned().fold(0.0, f64::max)
    }

    pub fn contains(&self, p: Point) -> bool {
        self.shape.contains(p)
    }

    pub fn area(&self) -> f64 {
        0.5 * (0..self.len())
            .map(|i| self.weights[i] * (self.nodes[i][0] * self.normals[i][0] + self.nodes[i][1] * self.normals[i][1]))
            .sum::<f64>()
    }

    pub fn perimeter(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Distance from `p` to the continuous curve, with the parameter of the
    /// closest point.
    pub fn distance(&self, p: Point) -> (f64, f64) {
        let m = 8 * self.len();
        let mut best = (f64::INFINITY, 0.0);
        for j in 0..m {
            let t = TAU * j as f64 / m as f64;
            let (q, _, _) = self.shape.eval(t);
            let d = (q[0] - p[0]).hypot(q[1] - p[1]);
            if d < best.0 {
                best = (d, t);
            }
        }
        // Newton on f(t) = (x(t) - p).x'(t)
        let mut t = best.1;
        for _ in 0..20 {
            let (q, d1, d2) = self.shape.eval(t);
            let diff = [q[0] - p[0], q[1] - p[1]];
            let f = diff[0] * d1[0] + diff[1] * d1[1];
            let fp = d1[0] * d1[0] + d1[1] * d1[1] + diff[0] * d2[0] + diff[1] * d2[1];
            if fp <= 0.0 {
                break;
            }
            let step = f / fp;
            t -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let (q, _, _) = self.shape.eval(t);
        let d = (q[0] - p[0]).hypot(q[1] - p[1]);
        if d < best.0 {
            (d, t.rem_euclid(TAU))
        } else {
            best
        }
    }

    /// Radius of the largest centred disc inside the curve, from the nodes.
    pub fn inradius(&self) -> f64 {
        let c = self.shape.center();
        self.nodes.iter().map(|p| (p[0] - c[0]).hypot(p[1] - c[1])).fold(f64::INFINITY, f64::min)
    }
}

/// Winding number of the closed polygon through `pts` around `p`.
pub fn winding_number(pts: &[Point], p: Point) -> i64 {
    let mut total = 0.0;
    for i in 0..pts.len() {
        let a = pts[i];
        let b = pts[(i + 1) % pts.len()];
        let (ax, ay) = (a[0] - p[0], a[1] - p[1]);
        let (bx, by) = (b[0] - p[0], b[1] - p[1]);
        total += (ax * by - ay * bx).atan2(ax * bx + ay * by);
    }
    (total / TAU).round() as i64
}

/// Uniform grid of cell centres inside the curve.
#[derive(Clone, Debug)]
pub struct InteriorGrid {
    pub points: Vec<Point>,
    pub cell_area: f64,
    pub spacing: f64,
}

pub fn interior_grid(curve: &BoundaryCurve, spacing: f64) -> Result<InteriorGrid> {
    let inr = curve.inradius();
    if !(spacing > 0.0 && spacing <= inr / 4.0) {
        return Err(Error::Geometry(format!(
            "grid spacing {spacing} must be positive and <= inradius/4 = {}",
            inr / 4.0
        )));
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in curve.nodes() {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let span = |d: usize| ((lo[d] / spacing).floor() as i64 - 1, (hi[d] / spacing).ceil() as i64 + 1);
    let (i0, i1) = span(0);
    let (j0, j1) = span(1);
    let mut points = Vec::new();
    for i in i0..=i1 {
        for j in j0..=j1 {
            let p = [(i as f64 + 0.5) * spacing, (j as f64 + 0.5) * spacing];
            if curve.contains(p) {
                points.push(p);
            }
        }
    }
    if points.is_empty() {
        return Err(Error::Geometry("interior grid is empty".into()));
    }
    Ok(InteriorGrid { points, cell_area: spacing * spacing, spacing })
}
