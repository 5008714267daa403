use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::command::Command;
use super::expr::{EvalError, Expr, Lookup, ParamRef};
use crate::canon::fmt_num;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Cube,
    Cylinder,
    Plane,
    Light,
    Group,
    Custom,
}

impl ObjectKind {
    pub const NAMES: [&'static str; 6] = ["cube", "cylinder", "plane", "light", "group", "custom"];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectKind::Cube => "cube",
            ObjectKind::Cylinder => "cylinder",
            ObjectKind::Plane => "plane",
            ObjectKind::Light => "light",
            ObjectKind::Group => "group",
            ObjectKind::Custom => "custom",
        }
    }

    /// Parameters every new object of this kind starts with.
    fn default_params(self) -> &'static [(&'static str, f64)] {
        match self {
            ObjectKind::Cube => &[("width", 1.0), ("depth", 1.0), ("height", 1.0)],
            ObjectKind::Cylinder => &[("radius", 0.5), ("height", 1.0)],
            ObjectKind::Plane => &[("width", 1.0), ("depth", 1.0)],
            ObjectKind::Light => &[("power", 100.0)],
            ObjectKind::Group | ObjectKind::Custom => &[],
        }
    }
}

impl fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "cube" => ObjectKind::Cube,
            "cylinder" => ObjectKind::Cylinder,
            "plane" => ObjectKind::Plane,
            "light" => ObjectKind::Light,
            "group" => ObjectKind::Group,
            "custom" => ObjectKind::Custom,
            _ => return Err(()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Num(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            ParamValue::Num(n) => Some(*n),
            ParamValue::Text(_) => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Num(n) => f.write_str(&fmt_num(*n)),
            ParamValue::Text(t) => write!(f, "{t:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transform {
    pub translation: [f64; 3],
    /// Degrees.
    pub rotation: [f64; 3],
    pub scale: [f64; 3],
}

impl Default for Transform {
    fn default() -> Self {
        Self {
            translation: [0.0; 3],
            rotation: [0.0; 3],
            scale: [1.0; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Emissive {
    pub color: String,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub name: String,
    pub kind: ObjectKind,
    pub transform: Transform,
    pub params: BTreeMap<String, ParamValue>,
    pub emissive: Option<Emissive>,
}

/// Parameter names that address the transform and emission instead of the
/// free-form parameter map.
pub const RESERVED_PARAMS: [&str; 11] =
    ["x", "y", "z", "rx", "ry", "rz", "sx", "sy", "sz", "emit_color", "emit_strength"];

impl SceneObject {
    pub fn new(name: impl Into<String>, kind: ObjectKind) -> Self {
        let params = kind
            .default_params()
            .iter()
            .map(|(k, v)| (k.to_string(), ParamValue::Num(*v)))
            .collect();
        Self {
            name: name.into(),
            kind,
            transform: Transform::default(),
            params,
            emissive: None,
        }
    }

    pub fn get(&self, param: &str) -> Option<ParamValue> {
        let t = &self.transform;
        let num = |v: f64| Some(ParamValue::Num(v));
        match param {
            "x" => num(t.translation[0]),
            "y" => num(t.translation[1]),
            "z" => num(t.translation[2]),
            "rx" => num(t.rotation[0]),
            "ry" => num(t.rotation[1]),
            "rz" => num(t.rotation[2]),
            "sx" => num(t.scale[0]),
            "sy" => num(t.scale[1]),
            "sz" => num(t.scale[2]),
            "emit_color" => self.emissive.as_ref().map(|e| ParamValue::Text(e.color.clone())),
            "emit_strength" => self.emissive.as_ref().and_then(|e| num(e.strength)),
            other => self.params.get(other).cloned(),
        }
    }

    pub fn set(&mut self, param: &str, value: ParamValue) -> Result<(), String> {
        let slot = |v: &ParamValue| -> Result<f64, String> {
            v.as_num().ok_or_else(|| format!("'{param}' must be a number"))
        };
        match param {
            "x" | "y" | "z" => {
                let i = (param.as_bytes()[0] - b'x') as usize;
                self.transform.translation[i] = slot(&value)?;
            }
            "rx" | "ry" | "rz" => {
                let i = (param.as_bytes()[1] - b'x') as usize;
                self.transform.rotation[i] = slot(&value)?;
            }
            "sx" | "sy" | "sz" => {
                let i = (param.as_bytes()[1] - b'x') as usize;
                let v = slot(&value)?;
                if v <= 0.0 {
                    return Err(format!("scale '{param}' must be positive, got {}", fmt_num(v)));
                }
                self.transform.scale[i] = v;
            }
            "emit_color" => {
                let ParamValue::Text(color) = value else {
                    return Err("'emit_color' must be a string".into());
                };
                let strength = self.emissive.as_ref().map_or(1.0, |e| e.strength);
                self.emissive = Some(Emissive { color, strength });
            }
            "emit_strength" => {
                let strength = slot(&value)?;
                if strength < 0.0 {
                    return Err("'emit_strength' must not be negative".into());
                }
                let color = self
                    .emissive
                    .as_ref()
                    .map_or_else(|| "#ffffff".to_string(), |e| e.color.clone());
                self.emissive = Some(Emissive { color, strength });
            }
            other => {
                self.params.insert(other.to_string(), value);
            }
        }
        Ok(())
    }
}

/// Parameter bindings `target = expression`, kept acyclic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeGraph {
    bindings: BTreeMap<ParamRef, Expr>,
}

impl NodeGraph {
    pub fn bindings(&self) -> &BTreeMap<ParamRef, Expr> {
        &self.bindings
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn get(&self, target: &ParamRef) -> Option<&Expr> {
        self.bindings.get(target)
    }

    /// Evaluation order: Kahn's algorithm over bound targets, ready targets
    /// taken in name order. Returns the targets on a cycle when one exists.
    pub fn topo_order(&self) -> Result<Vec<ParamRef>, Vec<ParamRef>> {
        let mut indegree: BTreeMap<&ParamRef, usize> = self.bindings.keys().map(|t| (t, 0)).collect();
        let mut dependents: BTreeMap<&ParamRef, Vec<&ParamRef>> = BTreeMap::new();
        for (target, expr) in &self.bindings {
            let deps: BTreeSet<&ParamRef> = expr.refs().into_iter().filter(|r| self.bindings.contains_key(*r)).collect();
            for dep in deps {
                *indegree.get_mut(target).unwrap() += 1;
                dependents.entry(dep).or_default().push(target);
            }
        }
        let mut ready: BTreeSet<&ParamRef> = indegree.iter().filter(|(_, d)| **d == 0).map(|(t, _)| *t).collect();
        let mut order = Vec::with_capacity(self.bindings.len());
        while let Some(next) = ready.pop_first() {
            order.push(next.clone());
            for dependent in dependents.get(next).into_iter().flatten() {
                let d = indegree.get_mut(dependent).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(dependent);
                }
            }
        }
        if order.len() == self.bindings.len() {
            Ok(order)
        } else {
            Err(indegree.into_iter().filter(|(_, d)| *d > 0).map(|(t, _)| t.clone()).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("object '{0}' already exists")]
    Duplicate(String),
    #[error("unknown object '{0}'")]
    UnknownObject(String),
    #[error("unknown parameter {0}")]
    UnknownParam(ParamRef),
    #[error("invalid value for {target}: {message}")]
    InvalidValue { target: ParamRef, message: String },
    #[error("{0} is driven by a link; relink it instead")]
    Bound(ParamRef),
    #[error("linking {target} would create a dependency cycle through {}", join_refs(.cycle))]
    Cycle { target: ParamRef, cycle: Vec<ParamRef> },
    #[error("cannot delete '{name}': referenced by link {by}")]
    Referenced { name: String, by: ParamRef },
    #[error("link {binding}: {source}")]
    Eval { binding: ParamRef, source: EvalError },
}

fn join_refs(refs: &[ParamRef]) -> String {
    refs.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

/// A parametric scene: named objects plus the binding graph over their
/// parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scene {
    objects: BTreeMap<String, SceneObject>,
    graph: NodeGraph,
}

impl Scene {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn objects(&self) -> impl Iterator<Item = &SceneObject> {
        self.objects.values()
    }

    pub fn object(&self, name: &str) -> Option<&SceneObject> {
        self.objects.get(name)
    }

    pub fn graph(&self) -> &NodeGraph {
        &self.graph
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn get_param(&self, r: &ParamRef) -> Option<ParamValue> {
        self.objects.get(&r.object)?.get(&r.param)
    }

    fn lookup(&self, r: &ParamRef) -> Lookup {
        match self.get_param(r) {
            Some(ParamValue::Num(n)) => Lookup::Number(n),
            Some(ParamValue::Text(_)) => Lookup::Text,
            None => Lookup::Missing,
        }
    }

    fn write_param(&mut self, target: &ParamRef, value: ParamValue) -> Result<(), SceneError> {
        let obj = self
            .objects
            .get_mut(&target.object)
            .ok_or_else(|| SceneError::UnknownObject(target.object.clone()))?;
        obj.set(&target.param, value).map_err(|message| SceneError::InvalidValue {
            target: target.clone(),
            message,
        })
    }

    /// Applies one command. Mutations are transactional: on error the scene
    /// is left exactly as it was. Returns a human-readable result line (or the
    /// full document for `snapshot` / `render_summary`).
    pub fn apply_command(&mut self, cmd: &Command) -> Result<String, SceneError> {
        if !cmd.is_mutation() {
            return self.read_command(cmd);
        }
        let mut next = self.clone();
        let text = next.mutate(cmd)?;
        next.evaluate_graph()?;
        *self = next;
        Ok(text)
    }

    /// Applies several commands as one transaction.
    pub fn apply_all(&mut self, cmds: &[Command]) -> Result<Vec<String>, (usize, SceneError)> {
        let mut next = self.clone();
        let mut out = Vec::with_capacity(cmds.len());
        for (i, cmd) in cmds.iter().enumerate() {
            out.push(next.apply_command(cmd).map_err(|e| (i, e))?);
        }
        *self = next;
        Ok(out)
    }

    fn read_command(&self, cmd: &Command) -> Result<String, SceneError> {
        match cmd {
            Command::Query { name } => self
                .objects
                .get(name)
                .map(|o| super::snapshot::describe_object(o, &self.graph))
                .ok_or_else(|| SceneError::UnknownObject(name.clone())),
            Command::Snapshot => Ok(super::snapshot::snapshot(self)),
            Command::RenderSummary => Ok(super::snapshot::render_summary(self)),
            _ => unreachable!("mutations handled by apply_command"),
        }
    }

    fn mutate(&mut self, cmd: &Command) -> Result<String, SceneError> {
        match cmd {
            Command::Add { kind, name, params } => {
                if self.objects.contains_key(name) {
                    return Err(SceneError::Duplicate(name.clone()));
                }
                self.objects.insert(name.clone(), SceneObject::new(name.clone(), *kind));
                for (key, value) in params {
                    self.write_param(&ParamRef::new(name.clone(), key.clone()), value.clone())?;
                }
                let t = &self.objects[name].transform.translation;
                Ok(format!(
                    "added {kind} '{name}' at ({}, {}, {})",
                    fmt_num(t[0]),
                    fmt_num(t[1]),
                    fmt_num(t[2])
                ))
            }
            Command::Set { target, value } => {
                if self.graph.bindings.contains_key(target) {
                    return Err(SceneError::Bound(target.clone()));
                }
                self.write_param(target, value.clone())?;
                Ok(format!("set {target} = {value}"))
            }
            Command::Link { target, expr } => {
                if !self.objects.contains_key(&target.object) {
                    return Err(SceneError::UnknownObject(target.object.clone()));
                }
                for r in expr.refs() {
                    match self.lookup(r) {
                        Lookup::Number(_) => {}
                        Lookup::Text => {
                            return Err(SceneError::Eval {
                                binding: target.clone(),
                                source: EvalError::NotNumeric(r.clone()),
                            })
                        }
                        Lookup::Missing if !self.objects.contains_key(&r.object) => {
                            return Err(SceneError::UnknownObject(r.object.clone()))
                        }
                        Lookup::Missing => return Err(SceneError::UnknownParam(r.clone())),
                    }
                }
                let mut graph = self.graph.clone();
                graph.bindings.insert(target.clone(), expr.clone());
                if let Err(cycle) = graph.topo_order() {
                    return Err(SceneError::Cycle {
                        target: target.clone(),
                        cycle,
                    });
                }
                self.graph = graph;
                Ok(format!("linked {target} = {expr}"))
            }
            Command::Delete { name } => {
                if !self.objects.contains_key(name) {
                    return Err(SceneError::UnknownObject(name.clone()));
                }
                for (target, expr) in &self.graph.bindings {
                    if target.object != *name && expr.refs().iter().any(|r| r.object == *name) {
                        return Err(SceneError::Referenced {
                            name: name.clone(),
                            by: target.clone(),
                        });
                    }
                }
                self.graph.bindings.retain(|t, _| t.object != *name);
                self.objects.remove(name);
                Ok(format!("deleted '{name}'"))
            }
            _ => unreachable!("read commands handled by apply_command"),
        }
    }

    /// Recomputes every bound parameter in dependency order.
    pub fn evaluate_graph(&mut self) -> Result<(), SceneError> {
        let order = self.graph.topo_order().map_err(|cycle| SceneError::Cycle {
            target: cycle[0].clone(),
            cycle,
        })?;
        for target in order {
            let expr = &self.graph.bindings[&target];
            let value = expr
                .eval(&|r| self.lookup(r))
                .map_err(|source| SceneError::Eval {
                    binding: target.clone(),
                    source,
                })?;
            self.write_param(&target, ParamValue::Num(value)).map_err(|e| match e {
                SceneError::InvalidValue { message, .. } => SceneError::InvalidValue {
                    target: target.clone(),
                    message: format!("link result rejected: {message}"),
                },
                other => other,
            })?;
        }
        Ok(())
    }
}
