//! WebAssembly bindings for the browser demo. Every export returns a JSON
//! string; failures are thrown as JS strings.
//!
//! Offsets in the output are UTF-16 code-unit indices so the page can
//! slice JavaScript strings directly.

use serde::Serialize;
use serde_json::{json, Value};
use synoptic_space::extraction::PhenomenonConfig;
use synoptic_space::scoring::score_objects;
use synoptic_space::{builtin, extract_objects, LocationHierarchy, Mode, PhenomenonObject, Relation, Source};
use wasm_bindgen::prelude::*;

fn utf16_at(text: &str, byte: usize) -> usize {
    text[..byte].encode_utf16().count()
}

fn phenomenon(name: &str) -> Result<&'static PhenomenonConfig, String> {
    builtin::phenomenon(name).ok_or_else(|| format!("unknown phenomenon `{name}` (expected pressure or temperature)"))
}

/// Accepts an office code, a node id or any alias and returns a node id.
fn resolve_place<'a>(h: &'a LocationHierarchy, input: &'a str) -> Result<&'a str, String> {
    let input = input.trim();
    if let Some(node) = builtin::stations().home_node(input, h) {
        if let Some(n) = h.node(node) {
            return Ok(&n.id);
        }
    }
    h.resolve(input).ok_or_else(|| format!("`{input}` is not a known station or place"))
}

#[derive(Serialize)]
struct Place<'a> {
    id: &'a str,
    name: &'a str,
}

fn place<'a>(h: &'a LocationHierarchy, id: &'a str) -> Place<'a> {
    let name = h.node(id).map_or(id, |n| n.canonical_name.as_str());
    Place { id, name }
}

fn object_json(text: &str, o: &PhenomenonObject, h: &LocationHierarchy) -> Value {
    json!({
        "phase": o.phase.code(),
        "term": o.term,
        "sentence": o.sentence_index,
        "span": [utf16_at(text, o.char_span.0), utf16_at(text, o.char_span.1)],
        "locations": o.locations.iter().map(|l| place(h, l)).collect::<Vec<_>>(),
    })
}

fn extraction_json(text: &str, source: Source, station: &str, cfg: &PhenomenonConfig) -> Result<(Value, Vec<PhenomenonObject>), String> {
    let h = builtin::hierarchy();
    let objects = extract_objects(text, source, cfg, h, station).map_err(|e| e.to_string())?;
    let mentions: Vec<Value> = h
        .find_mentions(text)
        .into_iter()
        .map(|m| {
            let node = h.node_at(m.node);
            json!({
                "id": node.id,
                "name": node.canonical_name,
                "span": [utf16_at(text, m.start), utf16_at(text, m.end)],
            })
        })
        .collect();
    let value = json!({
        "objects": objects.iter().map(|o| object_json(text, o, h)).collect::<Vec<_>>(),
        "mentions": mentions,
    });
    Ok((value, objects))
}

/// Objects and toponym mentions found in `text`.
pub fn extract_json(text: &str, station: &str, phenomenon_name: &str) -> Result<String, String> {
    let h = builtin::hierarchy();
    let station = resolve_place(h, station)?;
    let (value, _) = extraction_json(text, Source::Reference, station, phenomenon(phenomenon_name)?)?;
    Ok(value.to_string())
}

/// Local score of one pair plus both extractions.
pub fn score_json(pred: &str, reference: &str, station: &str, phenomenon_name: &str) -> Result<String, String> {
    let h = builtin::hierarchy();
    let cfg = phenomenon(phenomenon_name)?;
    let station = resolve_place(h, station)?;
    let (pred_view, pred_objs) = extraction_json(pred, Source::Predicted, station, cfg)?;
    let (ref_view, ref_objs) = extraction_json(reference, Source::Reference, station, cfg)?;
    let score = score_objects(&pred_objs, &ref_objs, h, Mode::Local, &cfg.name);
    Ok(json!({
        "score": score,
        "station": place(h, station),
        "predicted": pred_view,
        "reference": ref_view,
    })
    .to_string())
}

fn explain(h: &LocationHierarchy, a: &str, b: &str, rel: &Relation) -> String {
    let name = |id: &str| h.node(id).map_or(id.to_string(), |n| n.canonical_name.clone());
    let (na, nb) = (name(a), name(b));
    match rel {
        Relation::Equal => format!("{na} and {nb} are the same place."),
        Relation::Ancestor => format!("{na} contains {nb}."),
        Relation::Descendant => format!("{na} lies within {nb}."),
        Relation::CommonRelative(c) => format!("{na} and {nb} both lie within {}.", name(c)),
        Relation::BlockedByStop => {
            format!("{na} and {nb} share only a region too broad to count as a match.")
        }
        Relation::Unrelated => format!("{na} and {nb} share no enclosing region."),
    }
}

/// How two places relate in the hierarchy, with a plain-language reason.
pub fn relate_json(a: &str, b: &str) -> Result<String, String> {
    let h = builtin::hierarchy();
    let (a, b) = (resolve_place(h, a)?, resolve_place(h, b)?);
    let rel = h.relation(a, b).map_err(|e| e.to_string())?;
    let describe = |id: &str| {
        let n = h.node(id).expect("resolved id");
        json!({
            "id": n.id,
            "name": n.canonical_name,
            "scale": n.scale,
            "stop": n.stop,
            "ancestors": h.ancestors(id).expect("resolved id").into_iter().map(|x| place(h, x)).collect::<Vec<_>>(),
        })
    };
    Ok(json!({
        "a": describe(a),
        "b": describe(b),
        "relation": rel,
        "related": rel.is_related(),
        "explanation": explain(h, a, b, &rel),
    })
    .to_string())
}

/// Bundled stations as `[{office, city, state, home}]`.
pub fn stations_json() -> String {
    let list: Vec<Value> = builtin::stations()
        .iter()
        .map(|s| json!({ "office": s.office, "city": s.city, "state": s.state, "home": s.home_node }))
        .collect();
    Value::Array(list).to_string()
}

#[wasm_bindgen]
pub fn score_pair(pred: &str, reference: &str, station: &str, phenomenon: &str) -> Result<String, JsValue> {
    score_json(pred, reference, station, phenomenon).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn extract(text: &str, station: &str, phenomenon: &str) -> Result<String, JsValue> {
    extract_json(text, station, phenomenon).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn relate(a: &str, b: &str) -> Result<String, JsValue> {
    relate_json(a, b).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn stations() -> String {
    stations_json()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn scores_identical_pair() {
        let t = "High pressure remains over the Desert Southwest.";
        let v = parse(&score_json(t, t, "TWC", "pressure").unwrap());
        assert_eq!(v["score"]["s"], 1.0);
        assert_eq!(v["predicted"]["objects"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn spans_are_utf16() {
        let text = "Très calme. A ridge builds over Arizona.";
        let v = parse(&extract_json(text, "TWC", "pressure").unwrap());
        let span = &v["objects"][0]["span"];
        let units: Vec<u16> = text.encode_utf16().collect();
        let (s, e) = (span[0].as_u64().unwrap() as usize, span[1].as_u64().unwrap() as usize);
        assert_eq!(String::from_utf16(&units[s..e]).unwrap().to_lowercase(), "ridge");
        assert!(!v["mentions"].as_array().unwrap().is_empty());
    }

    #[test]
    fn relation_is_explained() {
        let v = parse(&relate_json("Arizona", "Arizona").unwrap());
        assert_eq!(v["relation"]["kind"], "equal");
        assert_eq!(v["related"], true);
        assert!(relate_json("Atlantis", "Arizona").unwrap_err().contains("Atlantis"));
    }

    #[test]
    fn unknown_inputs_are_errors() {
        assert!(score_json("a", "b", "TWC", "humidity").is_err());
        assert!(extract_json("a", "nowhere at all", "pressure").is_err());
        assert!(parse(&stations_json()).as_array().unwrap().len() > 100);
    }
}
