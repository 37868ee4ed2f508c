//! Rule-based gesture classifier: threshold angles into discrete finger and
//! pair states, then evaluate boolean gesture definitions over those states
//! and the palm Euler angles.
//!
//! Config files express angles in degrees; they are converted to radians when
//! loaded. Boundary values fall into the extreme state (an angle equal to
//! `straight_max` is straight, equal to `bent_min` is bent).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{EulerAngles, FeatureVector};
use crate::scalar::Scalar;
use crate::skeleton::{Finger, FingerPair};

pub const NEGATIVE: &str = "Negative";

/// The shipped default configuration.
pub const DEFAULT_CONFIG_JSON: &str = include_str!("../data/gestures.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FingerState {
    FullyStraight,
    FullyBent,
    Neither,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairState {
    Crossed,
    Apart,
    Neither,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EulerAxis {
    Yaw,
    Pitch,
    Roll,
}

impl EulerAxis {
    fn name(self) -> &'static str {
        match self {
            EulerAxis::Yaw => "yaw",
            EulerAxis::Pitch => "pitch",
            EulerAxis::Roll => "roll",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        [EulerAxis::Yaw, EulerAxis::Pitch, EulerAxis::Roll]
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
    }

    fn pick<T: Copy>(self, e: &EulerAngles<T>) -> T {
        match self {
            EulerAxis::Yaw => e.yaw,
            EulerAxis::Pitch => e.pitch,
            EulerAxis::Roll => e.roll,
        }
    }
}

/// Angles in radians; per finger thumb..pinky, per pair thumb-index..ring-pinky.
#[derive(Clone, Debug, PartialEq)]
pub struct StateThresholds<T> {
    pub straight_max: [T; 5],
    pub bent_min: [T; 5],
    pub crossed_max: [T; 4],
    pub apart_min: [T; 4],
}

impl<T: Scalar> StateThresholds<T> {
    pub fn validate(&self) -> Result<()> {
        let pi = T::PI();
        for f in Finger::ALL {
            let (s, b) = (self.straight_max[f.ordinal()], self.bent_min[f.ordinal()]);
            if !(T::zero() <= s && s < b && b <= pi) {
                return Err(Error::InvalidConfig(format!(
                    "{} thresholds need 0 <= straight_max < bent_min <= pi",
                    f.name()
                )));
            }
        }
        for p in FingerPair::ALL {
            let (c, a) = (self.crossed_max[p.ordinal()], self.apart_min[p.ordinal()]);
            if !(T::zero() <= c && c < a && a <= pi) {
                return Err(Error::InvalidConfig(format!(
                    "{} thresholds need 0 <= crossed_max < apart_min <= pi",
                    p.name()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiscreteStates {
    pub fingers: [FingerState; 5],
    pub pairs: [PairState; 4],
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr<T> {
    All(Vec<Expr<T>>),
    Any(Vec<Expr<T>>),
    Not(Box<Expr<T>>),
    Finger(Finger, FingerState),
    Pair(FingerPair, PairState),
    /// Half-open interval `[lo, hi)` walked counter-clockwise on the circle.
    EulerIn {
        axis: EulerAxis,
        lo: T,
        hi: T,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GestureDefinition<T> {
    pub name: String,
    pub expr: Expr<T>,
    pub priority: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GestureConfig<T> {
    pub thresholds: StateThresholds<T>,
    /// Sorted by descending priority.
    pub gestures: Vec<GestureDefinition<T>>,
}

pub fn discretize<T: Scalar>(fv: &FeatureVector<T>, th: &StateThresholds<T>) -> DiscreteStates {
    let fingers = std::array::from_fn(|i| {
        let a = fv.finger_angles[i];
        if a <= th.straight_max[i] {
            FingerState::FullyStraight
        } else if a >= th.bent_min[i] {
            FingerState::FullyBent
        } else {
            FingerState::Neither
        }
    });
    let pairs = std::array::from_fn(|i| {
        let a = fv.pair_angles[i];
        if a <= th.crossed_max[i] {
            PairState::Crossed
        } else if a >= th.apart_min[i] {
            PairState::Apart
        } else {
            PairState::Neither
        }
    });
    DiscreteStates { fingers, pairs }
}

/// Membership of `x` in the wrapped interval `[lo, hi)`.
pub fn angle_in_interval<T: Scalar>(x: T, lo: T, hi: T) -> bool {
    let tau = T::TAU();
    let wrap = |a: T| {
        let mut r = a % tau;
        if r < T::zero() {
            r += tau;
        }
        if r >= tau {
            r = T::zero();
        }
        r
    };
    wrap(x - lo) < wrap(hi - lo)
}

impl<T: Scalar> Expr<T> {
    pub fn eval(&self, states: &DiscreteStates, euler: &EulerAngles<T>) -> bool {
        match self {
            Expr::All(xs) => xs.iter().all(|x| x.eval(states, euler)),
            Expr::Any(xs) => xs.iter().any(|x| x.eval(states, euler)),
            Expr::Not(x) => !x.eval(states, euler),
            Expr::Finger(f, s) => states.fingers[f.ordinal()] == *s,
            Expr::Pair(p, s) => states.pairs[p.ordinal()] == *s,
            Expr::EulerIn { axis, lo, hi } => angle_in_interval(axis.pick(euler), *lo, *hi),
        }
    }

    pub fn uses_euler(&self) -> bool {
        match self {
            Expr::All(xs) | Expr::Any(xs) => xs.iter().any(Expr::uses_euler),
            Expr::Not(x) => x.uses_euler(),
            Expr::EulerIn { .. } => true,
            _ => false,
        }
    }
}

pub fn evaluate<T: Scalar>(
    def: &GestureDefinition<T>,
    states: &DiscreteStates,
    euler: &EulerAngles<T>,
) -> bool {
    def.expr.eval(states, euler)
}

/// Highest-priority matching definition, or [`NEGATIVE`].
pub fn classify_heuristic<'a, T: Scalar>(
    fv: &FeatureVector<T>,
    cfg: &'a GestureConfig<T>,
) -> &'a str {
    let states = discretize(fv, &cfg.thresholds);
    cfg.gestures
        .iter()
        .find(|g| evaluate(g, &states, &fv.euler))
        .map_or(NEGATIVE, |g| g.name.as_str())
}

// ---- config file format ----

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum PerItem {
    One(f64),
    Each(Vec<f64>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawThresholds {
    straight_max_deg: PerItem,
    bent_min_deg: PerItem,
    crossed_max_deg: PerItem,
    apart_min_deg: PerItem,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum RawExpr {
    All {
        args: Vec<RawExpr>,
    },
    Any {
        args: Vec<RawExpr>,
    },
    Not {
        arg: Box<RawExpr>,
    },
    Finger {
        finger: String,
        state: String,
    },
    Pair {
        pair: String,
        state: String,
    },
    EulerIn {
        axis: String,
        lo_deg: f64,
        hi_deg: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawGesture {
    name: String,
    priority: i64,
    expr: RawExpr,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RawConfig {
    #[serde(default)]
    schema: Option<String>,
    thresholds: RawThresholds,
    gestures: Vec<RawGesture>,
}

fn per_item<T: Scalar, const N: usize>(v: &PerItem, what: &str) -> Result<[T; N]> {
    let rad = |d: f64| T::lit(d.to_radians());
    match v {
        PerItem::One(d) => Ok([rad(*d); N]),
        PerItem::Each(ds) if ds.len() == N => Ok(std::array::from_fn(|i| rad(ds[i]))),
        PerItem::Each(ds) => Err(Error::InvalidConfig(format!(
            "{what}: expected {N} values, got {}",
            ds.len()
        ))),
    }
}

fn finger_state(s: &str) -> Option<FingerState> {
    match s.to_ascii_lowercase().as_str() {
        "fullystraight" | "straight" => Some(FingerState::FullyStraight),
        "fullybent" | "bent" => Some(FingerState::FullyBent),
        "neither" => Some(FingerState::Neither),
        _ => None,
    }
}

fn pair_state(s: &str) -> Option<PairState> {
    match s.to_ascii_lowercase().as_str() {
        "crossed" => Some(PairState::Crossed),
        "apart" => Some(PairState::Apart),
        "neither" => Some(PairState::Neither),
        _ => None,
    }
}

fn unknown(what: &str, name: &str) -> Error {
    Error::UnknownReference(format!("{what} '{name}'"))
}

fn lower_expr<T: Scalar>(raw: &RawExpr) -> Result<Expr<T>> {
    Ok(match raw {
        RawExpr::All { args } => Expr::All(args.iter().map(lower_expr).collect::<Result<_>>()?),
        RawExpr::Any { args } => Expr::Any(args.iter().map(lower_expr).collect::<Result<_>>()?),
        RawExpr::Not { arg } => Expr::Not(Box::new(lower_expr(arg)?)),
        RawExpr::Finger { finger, state } => Expr::Finger(
            Finger::from_name(finger).ok_or_else(|| unknown("finger", finger))?,
            finger_state(state).ok_or_else(|| unknown("finger state", state))?,
        ),
        RawExpr::Pair { pair, state } => Expr::Pair(
            FingerPair::from_name(pair).ok_or_else(|| unknown("finger pair", pair))?,
            pair_state(state).ok_or_else(|| unknown("pair state", state))?,
        ),
        RawExpr::EulerIn {
            axis,
            lo_deg,
            hi_deg,
        } => Expr::EulerIn {
            axis: EulerAxis::from_name(axis).ok_or_else(|| unknown("euler axis", axis))?,
            lo: T::lit(lo_deg.to_radians()),
            hi: T::lit(hi_deg.to_radians()),
        },
    })
}

fn raise_expr<T: Scalar>(e: &Expr<T>) -> RawExpr {
    let deg = |r: T| r.as_f64().to_degrees();
    match e {
        Expr::All(xs) => RawExpr::All {
            args: xs.iter().map(raise_expr).collect(),
        },
        Expr::Any(xs) => RawExpr::Any {
            args: xs.iter().map(raise_expr).collect(),
        },
        Expr::Not(x) => RawExpr::Not {
            arg: Box::new(raise_expr(x)),
        },
        Expr::Finger(f, s) => RawExpr::Finger {
            finger: f.name().into(),
            state: format!("{s:?}"),
        },
        Expr::Pair(p, s) => RawExpr::Pair {
            pair: p.name().into(),
            state: format!("{s:?}"),
        },
        Expr::EulerIn { axis, lo, hi } => RawExpr::EulerIn {
            axis: axis.name().into(),
            lo_deg: deg(*lo),
            hi_deg: deg(*hi),
        },
    }
}

impl<T: Scalar> GestureConfig<T> {
    /// Parse and validate a config document. Unknown fingers, pairs, states or
    /// axes are reported as [`Error::UnknownReference`].
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text)?;
        let th = &raw.thresholds;
        let thresholds = StateThresholds {
            straight_max: per_item(&th.straight_max_deg, "straight_max_deg")?,
            bent_min: per_item(&th.bent_min_deg, "bent_min_deg")?,
            crossed_max: per_item(&th.crossed_max_deg, "crossed_max_deg")?,
            apart_min: per_item(&th.apart_min_deg, "apart_min_deg")?,
        };
        let gestures = raw
            .gestures
            .iter()
            .map(|g| {
                Ok(GestureDefinition {
                    name: g.name.clone(),
                    expr: lower_expr(&g.expr)?,
                    priority: g.priority,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(thresholds, gestures)
    }

    pub fn new(
        thresholds: StateThresholds<T>,
        mut gestures: Vec<GestureDefinition<T>>,
    ) -> Result<Self> {
        thresholds.validate()?;
        gestures.sort_by_key(|g| std::cmp::Reverse(g.priority));
        for w in gestures.windows(2) {
            if w[0].priority == w[1].priority {
                return Err(Error::InvalidConfig(format!(
                    "priority {} used twice",
                    w[0].priority
                )));
            }
        }
        let mut names: Vec<&str> = gestures.iter().map(|g| g.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig(format!(
                "gesture name '{}' used twice",
                w[0]
            )));
        }
        if names.contains(&NEGATIVE) {
            return Err(Error::InvalidConfig(format!("'{NEGATIVE}' is reserved")));
        }
        Ok(Self {
            thresholds,
            gestures,
        })
    }

    pub fn to_json(&self) -> String {
        let deg = |v: &[T]| PerItem::Each(v.iter().map(|r| r.as_f64().to_degrees()).collect());
        let th = &self.thresholds;
        let raw = RawConfig {
            schema: Some("handgest.gestures.v1".into()),
            thresholds: RawThresholds {
                straight_max_deg: deg(&th.straight_max),
                bent_min_deg: deg(&th.bent_min),
                crossed_max_deg: deg(&th.crossed_max),
                apart_min_deg: deg(&th.apart_min),
            },
            gestures: self
                .gestures
                .iter()
                .map(|g| RawGesture {
                    name: g.name.clone(),
                    priority: g.priority,
                    expr: raise_expr(&g.expr),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("config serializes")
    }

    pub fn gesture(&self, name: &str) -> Option<&GestureDefinition<T>> {
        self.gestures.iter().find(|g| g.name == name)
    }
}

impl<T: Scalar> Default for GestureConfig<T> {
    fn default() -> Self {
        Self::from_json(DEFAULT_CONFIG_JSON).expect("shipped gesture config is valid")
    }
}
