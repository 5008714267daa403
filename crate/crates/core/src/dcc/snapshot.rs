//! Canonical scene documents and text summaries.
//!
//! Snapshot schema `scene/1`:
//!
//! ```json
//! {
//!   "schema": "scene/1",
//!   "objects": [
//!     {
//!       "name": "wall",
//!       "kind": "cube",
//!       "transform": {"translation": [0, 0, 0], "rotation": [0, 0, 0], "scale": [1, 1, 1]},
//!       "params": {"depth": 1, "height": 2.5, "width": 1},
//!       "emissive": null
//!     }
//!   ],
//!   "bindings": [{"target": "roof.base_z", "expr": "wall.height"}]
//! }
//! ```
//!
//! Objects are sorted by name, params by key and bindings by target; numbers
//! use [`fmt_num`](crate::canon::fmt_num).

use super::scene::{NodeGraph, ParamValue, Scene, SceneObject};
use crate::canon::{fmt_num, Json};

pub const SCENE_SCHEMA: &str = "scene/1";

fn triple(v: &[f64; 3]) -> Json {
    Json::Arr(v.iter().map(|x| Json::Num(*x)).collect())
}

fn param_json(v: &ParamValue) -> Json {
    match v {
        ParamValue::Num(n) => Json::Num(*n),
        ParamValue::Text(t) => Json::str(t.clone()),
    }
}

pub fn snapshot_json(scene: &Scene) -> Json {
    let objects = scene
        .objects()
        .map(|o| {
            Json::obj([
                ("name", Json::str(o.name.clone())),
                ("kind", Json::str(o.kind.as_str())),
                (
                    "transform",
                    Json::obj([
                        ("translation", triple(&o.transform.translation)),
                        ("rotation", triple(&o.transform.rotation)),
                        ("scale", triple(&o.transform.scale)),
                    ]),
                ),
                (
                    "params",
                    Json::Obj(o.params.iter().map(|(k, v)| (k.clone(), param_json(v))).collect()),
                ),
                (
                    "emissive",
                    match &o.emissive {
                        None => Json::Null,
                        Some(e) => Json::obj([
                            ("color", Json::str(e.color.clone())),
                            ("strength", Json::Num(e.strength)),
                        ]),
                    },
                ),
            ])
        })
        .collect();
    let bindings = scene
        .graph()
        .bindings()
        .iter()
        .map(|(t, e)| Json::obj([("target", Json::str(t.to_string())), ("expr", Json::str(e.to_string()))]))
        .collect();
    Json::obj([
        ("schema", Json::str(SCENE_SCHEMA)),
        ("objects", Json::Arr(objects)),
        ("bindings", Json::Arr(bindings)),
    ])
}

/// The canonical snapshot document. Byte-equal for equal scenes.
pub fn snapshot(scene: &Scene) -> String {
    snapshot_json(scene).to_pretty()
}

fn fmt_triple(v: &[f64; 3]) -> String {
    format!("({}, {}, {})", fmt_num(v[0]), fmt_num(v[1]), fmt_num(v[2]))
}

/// One-line description used by `query`.
pub fn describe_object(o: &SceneObject, graph: &NodeGraph) -> String {
    let t = &o.transform;
    let mut line = format!(
        "{} kind={} pos={} rot={} scale={}",
        o.name,
        o.kind,
        fmt_triple(&t.translation),
        fmt_triple(&t.rotation),
        fmt_triple(&t.scale)
    );
    let params: Vec<String> = o.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
    line.push_str(&format!(" params{{{}}}", params.join(", ")));
    if let Some(e) = &o.emissive {
        line.push_str(&format!(" emissive={{color={:?}, strength={}}}", e.color, fmt_num(e.strength)));
    }
    let links: Vec<String> = graph
        .bindings()
        .iter()
        .filter(|(t, _)| t.object == o.name)
        .map(|(t, e)| format!("{} = {e}", t.param))
        .collect();
    if !links.is_empty() {
        line.push_str(&format!(" links{{{}}}", links.join(", ")));
    }
    line
}

pub fn render_summary(scene: &Scene) -> String {
    let n = scene.len();
    let m = scene.graph().len();
    let mut out = format!(
        "scene: {n} object{}, {m} link{}",
        if n == 1 { "" } else { "s" },
        if m == 1 { "" } else { "s" }
    );
    for o in scene.objects() {
        out.push_str("\n- ");
        out.push_str(&describe_object(o, scene.graph()));
    }
    out
}
