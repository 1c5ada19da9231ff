//! Kinematics-free kitchen world.
//!
//! The world tracks object instances, which storage containers are open, and
//! where the robot stands. Every mutation goes through [`WorldState::apply_event`],
//! which checks preconditions and either commits exactly one state change or
//! rejects the event. Events are atomic: there is no partially applied event.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectType {
    Milk,
    Bowl,
    Cereal,
    Spoon,
    Cup,
}

impl ObjectType {
    pub const ALL: [ObjectType; 5] = [
        ObjectType::Milk,
        ObjectType::Bowl,
        ObjectType::Cereal,
        ObjectType::Spoon,
        ObjectType::Cup,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectType::Milk => "milk",
            ObjectType::Bowl => "bowl",
            ObjectType::Cereal => "cereal",
            ObjectType::Spoon => "spoon",
            ObjectType::Cup => "cup",
        }
    }

    /// Accepts the singular noun and its plural.
    pub fn from_word(word: &str) -> Option<Self> {
        match word {
            "milk" | "milks" => Some(ObjectType::Milk),
            "bowl" | "bowls" => Some(ObjectType::Bowl),
            "cereal" | "cereals" => Some(ObjectType::Cereal),
            "spoon" | "spoons" => Some(ObjectType::Spoon),
            "cup" | "cups" => Some(ObjectType::Cup),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Color {
    Green,
    Blue,
    Red,
    White,
}

impl Color {
    pub const ALL: [Color; 4] = [Color::Green, Color::Blue, Color::Red, Color::White];

    pub fn as_str(self) -> &'static str {
        match self {
            Color::Green => "green",
            Color::Blue => "blue",
            Color::Red => "red",
            Color::White => "white",
        }
    }

    pub fn from_word(word: &str) -> Option<Self> {
        Color::ALL.into_iter().find(|c| c.as_str() == word)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Size {
    Small,
    Normal,
    Big,
}

impl Size {
    pub const ALL: [Size; 3] = [Size::Small, Size::Normal, Size::Big];

    pub fn as_str(self) -> &'static str {
        match self {
            Size::Small => "small",
            Size::Normal => "normal",
            Size::Big => "big",
        }
    }

    pub fn from_word(word: &str) -> Option<Self> {
        match word {
            "small" | "little" => Some(Size::Small),
            "normal" | "regular" | "medium" => Some(Size::Normal),
            "big" | "large" => Some(Size::Big),
            _ => None,
        }
    }
}

/// Named places in the kitchen.
///
/// `countertop`, `dishwasher` and `cabinet` are storage (searched by the
/// planner); `table` and `counter` are placement targets. Only the dishwasher
/// and the cabinet can be opened and closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationId {
    Countertop,
    Dishwasher,
    Cabinet,
    Table,
    Counter,
}

impl LocationId {
    pub const ALL: [LocationId; 5] = [
        LocationId::Countertop,
        LocationId::Dishwasher,
        LocationId::Cabinet,
        LocationId::Table,
        LocationId::Counter,
    ];
    pub const STORAGE: [LocationId; 3] = [
        LocationId::Countertop,
        LocationId::Dishwasher,
        LocationId::Cabinet,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LocationId::Countertop => "countertop",
            LocationId::Dishwasher => "dishwasher",
            LocationId::Cabinet => "cabinet",
            LocationId::Table => "table",
            LocationId::Counter => "counter",
        }
    }

    pub fn from_word(word: &str) -> Option<Self> {
        LocationId::ALL.into_iter().find(|l| l.as_str() == word)
    }

    pub fn is_storage(self) -> bool {
        matches!(
            self,
            LocationId::Countertop | LocationId::Dishwasher | LocationId::Cabinet
        )
    }

    pub fn is_placement(self) -> bool {
        matches!(self, LocationId::Table | LocationId::Counter)
    }

    pub fn is_container(self) -> bool {
        matches!(self, LocationId::Dishwasher | LocationId::Cabinet)
    }
}

macro_rules! display_as_str {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    )*};
}
display_as_str!(ObjectType, Color, Size, LocationId);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectSpec {
    #[serde(rename = "type")]
    pub object_type: ObjectType,
    pub color: Color,
    pub size: Size,
}

impl ObjectSpec {
    pub fn new(object_type: ObjectType, color: Color, size: Size) -> Self {
        Self { object_type, color, size }
    }
}

impl fmt::Display for ObjectSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.size, self.color, self.object_type)
    }
}

/// Partial object description; absent fields are wildcards.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectQuery {
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub object_type: Option<ObjectType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<Color>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<Size>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_location: Option<LocationId>,
}

impl ObjectQuery {
    pub fn of_type(object_type: ObjectType) -> Self {
        Self { object_type: Some(object_type), ..Self::default() }
    }

    pub fn with_color(mut self, color: Color) -> Self {
        self.color = Some(color);
        self
    }

    pub fn with_size(mut self, size: Size) -> Self {
        self.size = Some(size);
        self
    }

    pub fn from_location(mut self, loc: LocationId) -> Self {
        self.source_location = Some(loc);
        self
    }

    pub fn is_well_formed(&self) -> bool {
        self.object_type.is_some()
            || self.color.is_some()
            || self.size.is_some()
            || self.source_location.is_some()
    }

    /// Matches the concrete spec only; location is checked separately.
    pub fn matches_spec(&self, spec: &ObjectSpec) -> bool {
        self.object_type.is_none_or(|t| t == spec.object_type)
            && self.color.is_none_or(|c| c == spec.color)
            && self.size.is_none_or(|s| s == spec.size)
    }

    pub fn matches(&self, obj: &ObjectInstance) -> bool {
        self.matches_spec(&obj.spec)
            && self
                .source_location
                .is_none_or(|loc| obj.placement == Placement::At(loc))
    }

    /// Human-readable noun phrase, e.g. "small red cup".
    pub fn describe(&self) -> String {
        let mut words: Vec<&str> = Vec::new();
        if let Some(s) = self.size {
            words.push(s.as_str());
        }
        if let Some(c) = self.color {
            words.push(c.as_str());
        }
        words.push(self.object_type.map_or("object", ObjectType::as_str));
        words.join(" ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct ObjectId(pub u32);

// Ids are map keys in snapshots, and JSON map keys are strings, so accept both.
impl<'de> Deserialize<'de> for ObjectId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u32),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(n) => Ok(ObjectId(n)),
            Raw::Text(t) => t.parse().map(ObjectId).map_err(serde::de::Error::custom),
        }
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "obj-{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    At(LocationId),
    HeldByRobot,
}

impl Placement {
    pub fn location(self) -> Option<LocationId> {
        match self {
            Placement::At(loc) => Some(loc),
            Placement::HeldByRobot => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: ObjectId,
    pub spec: ObjectSpec,
    pub placement: Placement,
    /// Location the object was taken from by its most recent grasp.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<LocationId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Robot {
    pub base_location: LocationId,
    pub holding: Option<ObjectId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum WorldEvent {
    Navigate { to: LocationId },
    Open { at: LocationId },
    Close { at: LocationId },
    Grasp { object: ObjectId },
    Place { object: ObjectId, at: LocationId },
    Return { object: ObjectId },
}

impl fmt::Display for WorldEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorldEvent::Navigate { to } => write!(f, "navigate({to})"),
            WorldEvent::Open { at } => write!(f, "open({at})"),
            WorldEvent::Close { at } => write!(f, "close({at})"),
            WorldEvent::Grasp { object } => write!(f, "grasp({object})"),
            WorldEvent::Place { object, at } => write!(f, "place({object}, {at})"),
            WorldEvent::Return { object } => write!(f, "return({object})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("precondition violated for {event}: {reason}")]
    PreconditionViolated { event: WorldEvent, reason: String },
}

/// Initial object placement for a scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    #[serde(flatten)]
    pub spec: ObjectSpec,
    pub location: LocationId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldManifest {
    pub robot_start: LocationId,
    #[serde(default)]
    pub open_containers: Vec<LocationId>,
    pub objects: Vec<ManifestEntry>,
}

impl WorldManifest {
    pub fn build(&self) -> WorldState {
        let mut world = WorldState::new(self.robot_start);
        for loc in &self.open_containers {
            if loc.is_container() {
                world.container_open.insert(*loc, true);
            }
        }
        for entry in &self.objects {
            world.spawn_object(entry.spec, entry.location);
        }
        world
    }
}

/// Canonical world snapshot. Objects are keyed by id so serialization order
/// is stable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    pub objects: BTreeMap<ObjectId, ObjectInstance>,
    pub container_open: BTreeMap<LocationId, bool>,
    pub robot: Robot,
    next_id: u32,
}

impl WorldState {
    pub fn new(robot_start: LocationId) -> Self {
        let container_open = LocationId::ALL
            .into_iter()
            .filter(|l| l.is_container())
            .map(|l| (l, false))
            .collect();
        Self {
            objects: BTreeMap::new(),
            container_open,
            robot: Robot { base_location: robot_start, holding: None },
            next_id: 1,
        }
    }

    pub fn spawn_object(&mut self, spec: ObjectSpec, loc: LocationId) -> ObjectId {
        let id = ObjectId(self.next_id);
        self.next_id += 1;
        self.objects.insert(
            id,
            ObjectInstance { id, spec, placement: Placement::At(loc), origin: None },
        );
        id
    }

    pub fn object(&self, id: ObjectId) -> Option<&ObjectInstance> {
        self.objects.get(&id)
    }

    pub fn is_open(&self, loc: LocationId) -> bool {
        self.container_open.get(&loc).copied().unwrap_or(false)
    }

    /// All instances matching every present field of `q`, ordered by id.
    pub fn find_objects(&self, q: &ObjectQuery) -> Vec<&ObjectInstance> {
        self.objects.values().filter(|o| q.matches(o)).collect()
    }

    pub fn objects_at(&self, loc: LocationId) -> impl Iterator<Item = &ObjectInstance> {
        self.objects
            .values()
            .filter(move |o| o.placement == Placement::At(loc))
    }

    pub fn apply_event(&mut self, ev: WorldEvent) -> Result<(), WorldError> {
        let violated = |reason: String| WorldError::PreconditionViolated { event: ev, reason };
        match ev {
            WorldEvent::Navigate { to } => {
                self.robot.base_location = to;
            }
            WorldEvent::Open { at } | WorldEvent::Close { at } => {
                let opening = matches!(ev, WorldEvent::Open { .. });
                if !at.is_container() {
                    return Err(violated(format!("{at} cannot be opened or closed")));
                }
                if self.robot.base_location != at {
                    return Err(violated(format!(
                        "robot is at {}, not {at}",
                        self.robot.base_location
                    )));
                }
                if self.is_open(at) == opening {
                    let state = if opening { "open" } else { "closed" };
                    return Err(violated(format!("{at} is already {state}")));
                }
                self.container_open.insert(at, opening);
            }
            WorldEvent::Grasp { object } => {
                if let Some(held) = self.robot.holding {
                    return Err(violated(format!("robot already holds {held}")));
                }
                let obj = self
                    .objects
                    .get(&object)
                    .ok_or_else(|| violated(format!("unknown object {object}")))?;
                let Placement::At(loc) = obj.placement else {
                    return Err(violated(format!("{object} is not at a location")));
                };
                if self.robot.base_location != loc {
                    return Err(violated(format!(
                        "robot is at {}, object is at {loc}",
                        self.robot.base_location
                    )));
                }
                if loc.is_container() && !self.is_open(loc) {
                    return Err(violated(format!("{loc} is closed")));
                }
                let obj = self.objects.get_mut(&object).expect("checked above");
                obj.placement = Placement::HeldByRobot;
                obj.origin = Some(loc);
                self.robot.holding = Some(object);
            }
            WorldEvent::Place { object, at } => {
                self.check_release(object, at).map_err(violated)?;
                self.release(object, at);
            }
            WorldEvent::Return { object } => {
                let origin = self
                    .objects
                    .get(&object)
                    .and_then(|o| o.origin)
                    .ok_or_else(|| violated(format!("{object} has no recorded origin")))?;
                self.check_release(object, origin).map_err(violated)?;
                self.release(object, origin);
            }
        }
        Ok(())
    }

    fn check_release(&self, object: ObjectId, at: LocationId) -> Result<(), String> {
        if self.robot.holding != Some(object) {
            return Err(format!("robot does not hold {object}"));
        }
        if self.robot.base_location != at {
            return Err(format!("robot is at {}, not {at}", self.robot.base_location));
        }
        if at.is_container() && !self.is_open(at) {
            return Err(format!("{at} is closed"));
        }
        Ok(())
    }

    fn release(&mut self, object: ObjectId, at: LocationId) {
        if let Some(obj) = self.objects.get_mut(&object) {
            obj.placement = Placement::At(at);
        }
        self.robot.holding = None;
    }

    /// Checks the single-placement and holding-consistency invariants.
    pub fn check_invariants(&self) -> Result<(), String> {
        let held: Vec<ObjectId> = self
            .objects
            .values()
            .filter(|o| o.placement == Placement::HeldByRobot)
            .map(|o| o.id)
            .collect();
        match (self.robot.holding, held.as_slice()) {
            (None, []) => {}
            (Some(h), [only]) if h == *only => {}
            (holding, held) => {
                return Err(format!("holding {holding:?} inconsistent with held objects {held:?}"))
            }
        }
        for (loc, _) in &self.container_open {
            if !loc.is_container() {
                return Err(format!("{loc} has open/closed state"));
            }
        }
        for (id, obj) in &self.objects {
            if *id != obj.id {
                return Err(format!("object keyed {id} has id {}", obj.id));
            }
        }
        Ok(())
    }

    /// One-line canonical JSON form (stable key order).
    pub fn snapshot(&self) -> String {
        serde_json::to_string(self).expect("world state always serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(t: ObjectType, c: Color, s: Size) -> ObjectSpec {
        ObjectSpec::new(t, c, s)
    }

    fn cabinet_world() -> (WorldState, ObjectId) {
        let mut w = WorldState::new(LocationId::Table);
        let cup = w.spawn_object(spec(ObjectType::Cup, Color::Red, Size::Small), LocationId::Cabinet);
        (w, cup)
    }

    #[test]
    fn snapshot_survives_a_json_value() {
        let (w, _) = cabinet_world();
        let v = serde_json::to_value(&w).unwrap();
        assert_eq!(serde_json::from_value::<WorldState>(v).unwrap(), w);
        assert_eq!(serde_json::from_str::<ObjectId>("7").unwrap(), ObjectId(7));
    }

    #[test]
    fn spawn_into_empty_world() {
        let mut w = WorldState::new(LocationId::Table);
        let id = w.spawn_object(spec(ObjectType::Cup, Color::Red, Size::Small), LocationId::Cabinet);
        assert_eq!(w.objects.len(), 1);
        assert_eq!(w.object(id).unwrap().placement, Placement::At(LocationId::Cabinet));
    }

    #[test]
    fn spawn_twice_gives_distinct_ids() {
        let mut w = WorldState::new(LocationId::Table);
        let s = spec(ObjectType::Cup, Color::Red, Size::Small);
        let a = w.spawn_object(s, LocationId::Cabinet);
        let b = w.spawn_object(s, LocationId::Cabinet);
        assert_ne!(a, b);
        assert_eq!(w.objects.len(), 2);
    }

    #[test]
    fn find_with_size_mismatch_is_empty() {
        let mut w = WorldState::new(LocationId::Table);
        w.spawn_object(spec(ObjectType::Cup, Color::Red, Size::Big), LocationId::Cabinet);
        let q = ObjectQuery::of_type(ObjectType::Cup).with_size(Size::Small);
        assert!(w.find_objects(&q).is_empty());
    }

    #[test]
    fn find_by_color_matches_brute_force() {
        let mut w = WorldState::new(LocationId::Table);
        let specs = [
            spec(ObjectType::Bowl, Color::Red, Size::Normal),
            spec(ObjectType::Milk, Color::White, Size::Big),
            spec(ObjectType::Spoon, Color::Red, Size::Small),
            spec(ObjectType::Cup, Color::Blue, Size::Small),
        ];
        for (i, s) in specs.iter().enumerate() {
            w.spawn_object(*s, LocationId::STORAGE[i % 3]);
        }
        let q = ObjectQuery { color: Some(Color::Red), ..Default::default() };
        let got: Vec<ObjectId> = w.find_objects(&q).iter().map(|o| o.id).collect();
        let mut expected: Vec<ObjectId> = w
            .objects
            .values()
            .filter(|o| o.spec.color == Color::Red)
            .map(|o| o.id)
            .collect();
        expected.sort();
        assert_eq!(got, expected);
        assert_eq!(got.len(), 2);
    }

    #[test]
    fn find_respects_source_location() {
        let (w, cup) = cabinet_world();
        let q = ObjectQuery::of_type(ObjectType::Cup).from_location(LocationId::Cabinet);
        assert_eq!(w.find_objects(&q)[0].id, cup);
        let q = ObjectQuery::of_type(ObjectType::Cup).from_location(LocationId::Dishwasher);
        assert!(w.find_objects(&q).is_empty());
    }

    #[test]
    fn one_hand_rule() {
        let mut w = WorldState::new(LocationId::Countertop);
        let bowl = w.spawn_object(spec(ObjectType::Bowl, Color::White, Size::Normal), LocationId::Countertop);
        let cup = w.spawn_object(spec(ObjectType::Cup, Color::Red, Size::Small), LocationId::Countertop);
        w.apply_event(WorldEvent::Grasp { object: bowl }).unwrap();
        let err = w.apply_event(WorldEvent::Grasp { object: cup }).unwrap_err();
        assert!(matches!(err, WorldError::PreconditionViolated { .. }));
    }

    #[test]
    fn fetch_from_cabinet_to_table() {
        let (mut w, cup) = cabinet_world();
        for ev in [
            WorldEvent::Navigate { to: LocationId::Cabinet },
            WorldEvent::Open { at: LocationId::Cabinet },
            WorldEvent::Grasp { object: cup },
            WorldEvent::Navigate { to: LocationId::Table },
            WorldEvent::Place { object: cup, at: LocationId::Table },
        ] {
            w.apply_event(ev).unwrap();
            w.check_invariants().unwrap();
        }
        assert_eq!(w.object(cup).unwrap().placement, Placement::At(LocationId::Table));
        assert_eq!(w.robot.holding, None);
    }

    #[test]
    fn grasp_from_closed_container_fails() {
        let (mut w, cup) = cabinet_world();
        w.apply_event(WorldEvent::Navigate { to: LocationId::Cabinet }).unwrap();
        assert!(w.apply_event(WorldEvent::Grasp { object: cup }).is_err());
    }

    #[test]
    fn return_goes_back_to_origin() {
        let (mut w, cup) = cabinet_world();
        w.apply_event(WorldEvent::Navigate { to: LocationId::Cabinet }).unwrap();
        w.apply_event(WorldEvent::Open { at: LocationId::Cabinet }).unwrap();
        w.apply_event(WorldEvent::Grasp { object: cup }).unwrap();
        w.apply_event(WorldEvent::Return { object: cup }).unwrap();
        assert_eq!(w.object(cup).unwrap().placement, Placement::At(LocationId::Cabinet));
    }

    #[test]
    fn open_non_container_is_rejected() {
        let mut w = WorldState::new(LocationId::Table);
        assert!(w.apply_event(WorldEvent::Open { at: LocationId::Table }).is_err());
    }

    #[test]
    fn failed_event_leaves_world_untouched() {
        let (mut w, cup) = cabinet_world();
        let before = w.clone();
        assert!(w.apply_event(WorldEvent::Place { object: cup, at: LocationId::Table }).is_err());
        assert_eq!(w, before);
    }

    fn arb_event(ids: Vec<ObjectId>) -> impl Strategy<Value = WorldEvent> {
        let loc = prop::sample::select(LocationId::ALL.to_vec());
        let id = prop::sample::select(ids);
        prop_oneof![
            loc.clone().prop_map(|to| WorldEvent::Navigate { to }),
            loc.clone().prop_map(|at| WorldEvent::Open { at }),
            loc.clone().prop_map(|at| WorldEvent::Close { at }),
            id.clone().prop_map(|object| WorldEvent::Grasp { object }),
            (id.clone(), loc).prop_map(|(object, at)| WorldEvent::Place { object, at }),
            id.prop_map(|object| WorldEvent::Return { object }),
        ]
    }

    fn sample_world() -> WorldState {
        let mut w = WorldState::new(LocationId::Table);
        for (i, t) in ObjectType::ALL.into_iter().enumerate() {
            w.spawn_object(spec(t, Color::ALL[i % 4], Size::ALL[i % 3]), LocationId::STORAGE[i % 3]);
        }
        w
    }

    proptest! {
        #[test]
        fn conservation_and_single_placement(
            events in prop::collection::vec(arb_event((1..=5).map(ObjectId).collect()), 0..60)
        ) {
            let mut w = sample_world();
            let n = w.objects.len();
            for ev in events {
                let before = w.clone();
                if w.apply_event(ev).is_err() {
                    prop_assert_eq!(&w, &before);
                }
                prop_assert_eq!(w.objects.len(), n);
                prop_assert!(w.check_invariants().is_ok());
            }
        }

        #[test]
        fn identical_sequences_give_identical_snapshots(
            events in prop::collection::vec(arb_event((1..=5).map(ObjectId).collect()), 0..40)
        ) {
            let mut a = sample_world();
            let mut b = sample_world();
            for ev in &events {
                let _ = a.apply_event(*ev);
                let _ = b.apply_event(*ev);
            }
            prop_assert_eq!(a.snapshot(), b.snapshot());
        }

        #[test]
        fn return_restores_grasp_location(picks in prop::collection::vec(1u32..=5, 1..20)) {
            let mut w = sample_world();
            for id in picks.into_iter().map(ObjectId) {
                let Placement::At(loc) = w.object(id).unwrap().placement else { continue };
                w.apply_event(WorldEvent::Navigate { to: loc }).unwrap();
                if loc.is_container() && !w.is_open(loc) {
                    w.apply_event(WorldEvent::Open { at: loc }).unwrap();
                }
                w.apply_event(WorldEvent::Grasp { object: id }).unwrap();
                w.apply_event(WorldEvent::Navigate { to: LocationId::Table }).unwrap();
                w.apply_event(WorldEvent::Navigate { to: loc }).unwrap();
                w.apply_event(WorldEvent::Return { object: id }).unwrap();
                prop_assert_eq!(w.object(id).unwrap().placement, Placement::At(loc));
            }
        }
    }
}
