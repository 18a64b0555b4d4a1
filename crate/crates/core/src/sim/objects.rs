//! Two-dimensional object shapes and the built-in train/unseen sets.

use serde::{Deserialize, Serialize};

use crate::sim::config::ObjectSetKind;

/// Shape in its body frame, centred on the grasp point. Dimensions in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Disc { radius: f64 },
    Box { width: f64, height: f64 },
    Ellipse { semi_major: f64, semi_minor: f64 },
    /// Segment of length `length` along the body x axis, swept by `radius`.
    Capsule { length: f64, radius: f64 },
    /// Convex or concave polygon, counter-clockwise vertices.
    Polygon { vertices: Vec<[f64; 2]> },
}

impl Shape {
    /// Point-in-shape test in the body frame.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match self {
            Shape::Disc { radius } => p[0] * p[0] + p[1] * p[1] <= radius * radius,
            Shape::Box { width, height } => p[0].abs() <= 0.5 * width && p[1].abs() <= 0.5 * height,
            Shape::Ellipse {
                semi_major,
                semi_minor,
            } => (p[0] / semi_major).powi(2) + (p[1] / semi_minor).powi(2) <= 1.0,
            Shape::Capsule { length, radius } => {
                let x = p[0].clamp(-0.5 * length, 0.5 * length);
                (p[0] - x).powi(2) + p[1] * p[1] <= radius * radius
            }
            Shape::Polygon { vertices } => {
                // Even-odd ray casting.
                let mut inside = false;
                let n = vertices.len();
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    if (a[1] > p[1]) != (b[1] > p[1]) {
                        let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                        if p[0] < x {
                            inside = !inside;
                        }
                    }
                }
                inside
            }
        }
    }

    /// Radius of a disc centred on the body origin that covers the shape.
    pub fn bounding_radius(&self) -> f64 {
        match self {
            Shape::Disc { radius } => *radius,
            Shape::Box { width, height } => 0.5 * width.hypot(*height),
            Shape::Ellipse { semi_major, .. } => *semi_major,
            Shape::Capsule { length, radius } => 0.5 * length + radius,
            Shape::Polygon { vertices } => vertices.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max),
        }
    }

    /// Exact area, used to sanity-check rasterized coverage.
    pub fn area(&self) -> f64 {
        use std::f64::consts::PI;
        match self {
            Shape::Disc { radius } => PI * radius * radius,
            Shape::Box { width, height } => width * height,
            Shape::Ellipse {
                semi_major,
                semi_minor,
            } => PI * semi_major * semi_minor,
            Shape::Capsule { length, radius } => 2.0 * radius * length + PI * radius * radius,
            Shape::Polygon { vertices } => {
                let n = vertices.len();
                0.5 * (0..n)
                    .map(|i| {
                        let a = vertices[i];
                        let b = vertices[(i + 1) % n];
                        a[0] * b[1] - b[0] * a[1]
                    })
                    .sum::<f64>()
                    .abs()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedShape {
    pub name: String,
    pub shape: Shape,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSet {
    pub kind: ObjectSetKind,
    pub shapes: Vec<NamedShape>,
}

fn named(name: &str, shape: Shape) -> NamedShape {
    NamedShape {
        name: name.to_string(),
        shape,
    }
}

impl ObjectSet {
    pub fn builtin(kind: ObjectSetKind) -> Self {
        let shapes = match kind {
            ObjectSetKind::Train => {
                let h = 0.08 * 3f64.sqrt() / 2.0;
                vec![
                    named("disc-small", Shape::Disc { radius: 0.03 }),
                    named("disc", Shape::Disc { radius: 0.04 }),
                    named("disc-large", Shape::Disc { radius: 0.05 }),
                    named("box-small", Shape::Box { width: 0.05, height: 0.05 }),
                    named("box", Shape::Box { width: 0.07, height: 0.07 }),
                    named("box-large", Shape::Box { width: 0.09, height: 0.09 }),
                    named("rect-wide", Shape::Box { width: 0.10, height: 0.04 }),
                    named("rect-long", Shape::Box { width: 0.12, height: 0.03 }),
                    named(
                        "triangle",
                        Shape::Polygon {
                            vertices: vec![[-0.04, -h / 3.0], [0.04, -h / 3.0], [0.0, 2.0 * h / 3.0]],
                        },
                    ),
                ]
            }
            ObjectSetKind::Unseen => vec![
                named("ellipse", Shape::Ellipse { semi_major: 0.05, semi_minor: 0.03 }),
                named("ellipse-flat", Shape::Ellipse { semi_major: 0.07, semi_minor: 0.025 }),
                named("capsule", Shape::Capsule { length: 0.08, radius: 0.02 }),
                named("capsule-stubby", Shape::Capsule { length: 0.05, radius: 0.03 }),
                named("rod", Shape::Box { width: 0.16, height: 0.012 }),
                named("rod-long", Shape::Box { width: 0.20, height: 0.01 }),
                named(
                    "pentagon",
                    Shape::Polygon {
                        vertices: vec![[0.045, 0.0], [0.015, 0.04], [-0.035, 0.03], [-0.04, -0.02], [0.01, -0.045]],
                    },
                ),
                named(
                    "ell",
                    Shape::Polygon {
                        vertices: vec![
                            [-0.04, -0.04],
                            [0.05, -0.04],
                            [0.05, -0.01],
                            [-0.01, -0.01],
                            [-0.01, 0.05],
                            [-0.04, 0.05],
                        ],
                    },
                ),
                named(
                    "kite",
                    Shape::Polygon {
                        vertices: vec![[0.06, 0.0], [0.0, 0.025], [-0.03, 0.0], [0.0, -0.025]],
                    },
                ),
            ],
        };
        Self { kind, shapes }
    }

    pub fn get(&self, name: &str) -> Option<&NamedShape> {
        self.shapes.iter().find(|s| s.name == name)
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }
}
