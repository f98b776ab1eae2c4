//! Intersection scenarios: data model, JSON document format, validation and
//! the nine built-in four-way crossing instances.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rect_collides_static, OrientedRect, Point2, Polygon, Polyline, Pose};

/// Robot footprint used by the built-in instances.
pub const ROBOT_LENGTH: f64 = 3.2;
pub const ROBOT_WIDTH: f64 = 0.8;

/// Sampling step used when checking that a reference is collision free.
const REFERENCE_SWEEP_STEP: f64 = 0.25;
const ENDPOINT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub width: f64,
    pub height: f64,
    pub obstacles: Vec<Polygon>,
}

impl Environment {
    pub fn contains_point(&self, p: Point2) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.width && p.y <= self.height
    }

    /// Inside the map and outside every obstacle.
    pub fn is_free_point(&self, p: Point2) -> bool {
        self.contains_point(p) && !self.obstacles.iter().any(|o| o.contains(p))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotSpec {
    pub id: u32,
    pub start: Pose,
    pub goal: Pose,
    pub reference: Polyline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub env: Environment,
    pub robots: Vec<RobotSpec>,
    pub robot_length: f64,
    pub robot_width: f64,
}

impl Scenario {
    pub fn num_robots(&self) -> usize {
        self.robots.len()
    }

    pub fn dims(&self) -> (f64, f64) {
        (self.robot_length, self.robot_width)
    }

    pub fn robot(&self, id: u32) -> Option<&RobotSpec> {
        self.robots.iter().find(|r| r.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ScenarioDoc::from(self)).expect("scenario serializes")
    }
}

// ---------------------------------------------------------------------------
// document schema

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub name: String,
    pub map: MapDoc,
    pub obstacles: Vec<Vec<[f64; 2]>>,
    pub robot_dims: DimsDoc,
    pub robots: Vec<RobotDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapDoc {
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimsDoc {
    pub length: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseDoc {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotDoc {
    pub id: u32,
    pub start: PoseDoc,
    pub goal: PoseDoc,
    pub reference: Vec<[f64; 2]>,
}

impl From<&Scenario> for ScenarioDoc {
    fn from(s: &Scenario) -> Self {
        let pose = |p: &Pose| PoseDoc {
            x: p.position.x,
            y: p.position.y,
            theta: p.heading,
        };
        ScenarioDoc {
            name: s.name.clone(),
            map: MapDoc {
                width: s.env.width,
                height: s.env.height,
            },
            obstacles: s
                .env
                .obstacles
                .iter()
                .map(|o| o.vertices().iter().map(|p| [p.x, p.y]).collect())
                .collect(),
            robot_dims: DimsDoc {
                length: s.robot_length,
                width: s.robot_width,
            },
            robots: s
                .robots
                .iter()
                .map(|r| RobotDoc {
                    id: r.id,
                    start: pose(&r.start),
                    goal: pose(&r.goal),
                    reference: r.reference.points().iter().map(|p| [p.x, p.y]).collect(),
                })
                .collect(),
        }
    }
}

/// Parses and validates a scenario document.
pub fn load_scenario(bytes: &[u8]) -> Result<Scenario> {
    let doc: ScenarioDoc = serde_json::from_slice(bytes)?;
    Scenario::try_from(doc)
}

fn finite(field: &str, robot: Option<u32>, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::validation(field, robot, format!("non-finite value {v}")))
    }
}

impl TryFrom<ScenarioDoc> for Scenario {
    type Error = Error;

    fn try_from(doc: ScenarioDoc) -> Result<Scenario> {
        let width = finite("map.width", None, doc.map.width)?;
        let height = finite("map.height", None, doc.map.height)?;
        if width <= 0.0 || height <= 0.0 {
            return Err(Error::validation("map", None, "width and height must be positive"));
        }
        let mut obstacles = Vec::with_capacity(doc.obstacles.len());
        for (k, o) in doc.obstacles.iter().enumerate() {
            let field = format!("obstacles[{k}]");
            let poly = Polygon::new(o.iter().map(|&[x, y]| Point2::new(x, y)).collect())
                .map_err(|e| Error::validation(&field, None, e.to_string()))?;
            let b = poly.bounds();
            if b.min.x < 0.0 || b.min.y < 0.0 || b.max.x > width || b.max.y > height {
                return Err(Error::validation(field, None, "obstacle extends outside the map"));
            }
            obstacles.push(poly);
        }
        let env = Environment {
            width,
            height,
            obstacles,
        };

        let length = finite("robot_dims.length", None, doc.robot_dims.length)?;
        let rwidth = finite("robot_dims.width", None, doc.robot_dims.width)?;
        if length <= 0.0 || rwidth <= 0.0 {
            return Err(Error::validation("robot_dims", None, "length and width must be positive"));
        }

        if doc.robots.is_empty() {
            return Err(Error::validation("robots", None, "at least one robot is required"));
        }
        let mut robots = Vec::with_capacity(doc.robots.len());
        for r in doc.robots {
            let id = Some(r.id);
            let pose = |field: &str, p: &PoseDoc| -> Result<Pose> {
                Ok(Pose::new(
                    Point2::new(finite(field, id, p.x)?, finite(field, id, p.y)?),
                    finite(field, id, p.theta)?,
                ))
            };
            let start = pose("start", &r.start)?;
            let goal = pose("goal", &r.goal)?;
            let reference = Polyline::new(r.reference.iter().map(|&[x, y]| Point2::new(x, y)).collect())
                .map_err(|e| Error::validation("reference", id, e.to_string()))?;
            if reference.first().distance(start.position) > ENDPOINT_TOLERANCE {
                return Err(Error::validation("reference", id, "does not begin at start position"));
            }
            if reference.last().distance(goal.position) > ENDPOINT_TOLERANCE {
                return Err(Error::validation("reference", id, "does not end at goal position"));
            }
            robots.push(RobotSpec {
                id: r.id,
                start,
                goal,
                reference,
            });
        }
        robots.sort_by_key(|r| r.id);
        for (k, r) in robots.iter().enumerate() {
            if r.id as usize != k + 1 {
                return Err(Error::validation(
                    "id",
                    Some(r.id),
                    format!("robot ids must be unique and contiguous from 1 (expected {})", k + 1),
                ));
            }
        }

        let scenario = Scenario {
            name: doc.name,
            env,
            robots,
            robot_length: length,
            robot_width: rwidth,
        };
        for r in &scenario.robots {
            check_reference_free(&scenario, r, REFERENCE_SWEEP_STEP)?;
        }
        Ok(scenario)
    }
}

/// Sweeps the footprint along the reference and at both end poses.
pub fn check_reference_free(s: &Scenario, r: &RobotSpec, step: f64) -> Result<()> {
    let (l, w) = s.dims();
    for (what, pose) in [("start", &r.start), ("goal", &r.goal)] {
        if rect_collides_static(&OrientedRect::at_pose(pose, l, w), &s.env) {
            return Err(Error::validation(what, Some(r.id), "footprint collides with the environment"));
        }
    }
    let total = r.reference.length();
    let n = (total / step).ceil().max(1.0) as usize;
    for k in 0..=n {
        let arc = (total * k as f64 / n as f64).min(total);
        let (p, t) = r.reference.point_at(arc)?;
        let pose = Pose::new(p, t.angle());
        if rect_collides_static(&OrientedRect::at_pose(&pose, l, w), &s.env) {
            return Err(Error::validation(
                "reference",
                Some(r.id),
                format!("footprint collides at arc length {arc:.3}"),
            ));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// built-in instances
//
// 60 x 60 map, two 12-unit roads crossing at the center, four corner blocks.
// Right-hand traffic with two 3-unit lanes per direction:
//   northbound x = 31.5 (inner), 34.5 (outer)   southbound x = 28.5, 25.5
//   eastbound  y = 28.5 (inner), 25.5 (outer)   westbound  y = 31.5, 34.5

pub const MAP_SIZE: f64 = 60.0;
const ROAD_LOW: f64 = 24.0;
const ROAD_HIGH: f64 = 36.0;

fn block(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<[f64; 2]> {
    vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
}

fn intersection_obstacles() -> Vec<Vec<[f64; 2]>> {
    vec![
        block(0.0, 0.0, ROAD_LOW, ROAD_LOW),
        block(ROAD_HIGH, 0.0, MAP_SIZE, ROAD_LOW),
        block(ROAD_HIGH, ROAD_HIGH, MAP_SIZE, MAP_SIZE),
        block(0.0, ROAD_HIGH, ROAD_LOW, MAP_SIZE),
    ]
}

/// Arc through `center` from angle `from` to `to`, as 5 points (ends plus
/// three interior vertices).
fn arc(center: (f64, f64), radius: f64, from: f64, to: f64) -> Vec<[f64; 2]> {
    (0..=4)
        .map(|k| {
            let a = from + (to - from) * k as f64 / 4.0;
            // snap the end points so lanes join exactly
            let (x, y) = (center.0 + radius * a.cos(), center.1 + radius * a.sin());
            [(x * 1e9).round() / 1e9, (y * 1e9).round() / 1e9]
        })
        .collect()
}

fn route(start: [f64; 2], turn: Vec<[f64; 2]>, goal: [f64; 2]) -> Vec<[f64; 2]> {
    let mut pts = vec![start];
    pts.extend(turn);
    pts.push(goal);
    pts
}

/// The ten robot routes; instance k uses the first k + 1.
fn route_table() -> Vec<(PoseDoc, PoseDoc, Vec<[f64; 2]>)> {
    let p = |x: f64, y: f64, theta: f64| PoseDoc { x, y, theta };
    let (n, s, e, w) = (FRAC_PI_2, -FRAC_PI_2, 0.0, PI);
    vec![
        // 1: south arm, straight north on the outer lane
        (p(34.5, 8.0, n), p(34.5, 56.0, n), vec![[34.5, 8.0], [34.5, 56.0]]),
        // 2: east arm, straight west on the outer lane
        (p(52.0, 34.5, w), p(4.0, 34.5, w), vec![[52.0, 34.5], [4.0, 34.5]]),
        // 3: west arm, right turn to the south outer lane
        (
            p(8.0, 25.5, e),
            p(25.5, 4.0, s),
            route([8.0, 25.5], arc((22.5, 22.5), 3.0, FRAC_PI_2, 0.0), [25.5, 4.0]),
        ),
        // 4: north arm, left turn from the inner lane to the east inner lane
        (
            p(28.5, 52.0, s),
            p(56.0, 28.5, e),
            route([28.5, 52.0], arc((36.0, 36.0), 7.5, PI, 1.5 * PI), [56.0, 28.5]),
        ),
        // 5: south arm, left turn to the west inner lane
        (
            p(31.5, 8.0, n),
            p(4.0, 31.5, w),
            route([31.5, 8.0], arc((24.0, 24.0), 7.5, 0.0, FRAC_PI_2), [4.0, 31.5]),
        ),
        // 6: west arm, left turn to the north inner lane
        (
            p(8.0, 28.5, e),
            p(31.5, 56.0, n),
            route([8.0, 28.5], arc((24.0, 36.0), 7.5, -FRAC_PI_2, 0.0), [31.5, 56.0]),
        ),
        // 7: north arm, left turn from the outer lane to the east outer lane
        (
            p(25.5, 52.0, s),
            p(56.0, 25.5, e),
            route([25.5, 52.0], arc((36.0, 36.0), 10.5, PI, 1.5 * PI), [56.0, 25.5]),
        ),
        // 8: east arm, left turn to the south inner lane
        (
            p(52.0, 31.5, w),
            p(28.5, 4.0, s),
            route([52.0, 31.5], arc((36.0, 24.0), 7.5, FRAC_PI_2, PI), [28.5, 4.0]),
        ),
        // 9: queued behind robot 3, same right turn, stops short of it
        (
            p(3.0, 25.5, e),
            p(25.5, 10.0, s),
            route([3.0, 25.5], arc((22.5, 22.5), 3.0, FRAC_PI_2, 0.0), [25.5, 10.0]),
        ),
        // 10: queued behind robot 1, straight, stops short of it
        (p(34.5, 3.0, n), p(34.5, 50.0, n), vec![[34.5, 3.0], [34.5, 50.0]]),
    ]
}

pub fn builtin_instance_doc(k: usize) -> Option<ScenarioDoc> {
    if !(1..=9).contains(&k) {
        return None;
    }
    let robots = route_table()
        .into_iter()
        .take(k + 1)
        .enumerate()
        .map(|(i, (start, goal, reference))| RobotDoc {
            id: i as u32 + 1,
            start,
            goal,
            reference,
        })
        .collect();
    Some(ScenarioDoc {
        name: format!("instance-{k}"),
        map: MapDoc {
            width: MAP_SIZE,
            height: MAP_SIZE,
        },
        obstacles: intersection_obstacles(),
        robot_dims: DimsDoc {
            length: ROBOT_LENGTH,
            width: ROBOT_WIDTH,
        },
        robots,
    })
}

/// Built-in instance `k` in 1..=9 with `k + 1` robots.
pub fn builtin_instance(k: usize) -> Option<Scenario> {
    builtin_instance_doc(k).map(|d| Scenario::try_from(d).expect("built-in instance validates"))
}

pub fn builtin_instances() -> Vec<Scenario> {
    (1..=9).filter_map(builtin_instance).collect()
}
