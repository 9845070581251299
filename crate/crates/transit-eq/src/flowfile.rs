//! JSON flow files: commodity id, path as edge ids or `"outside"`, exact volume.

use serde::{Deserialize, Serialize};
use transit_eq_core::flow::{is_strategy, Flow, Path, Strategy};
use transit_eq_core::network::{EdgeIdx, ExtendedGraph};
use transit_eq_core::rational::Rational;

use crate::format::{rat, FormatError};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PathSpec {
    Edges(Vec<u32>),
    Outside(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowEntry {
    pub commodity: String,
    pub path: PathSpec,
    #[serde(with = "rat")]
    pub volume: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowFile {
    pub version: u32,
    pub entries: Vec<FlowEntry>,
}

fn invalid(path: String, message: String) -> FormatError {
    FormatError::Invalid { path, message }
}

pub fn to_file(xg: &ExtendedGraph, f: &Flow) -> FlowFile {
    let entries = f
        .used()
        .map(|(i, s, v)| FlowEntry {
            commodity: xg.commodity(i).id.clone(),
            path: match s {
                Strategy::Outside => PathSpec::Outside("outside".into()),
                Strategy::Path(p) => PathSpec::Edges(p.edges().iter().map(|e| e.0).collect()),
            },
            volume: v.clone(),
        })
        .collect();
    FlowFile { version: 1, entries }
}

pub fn serialize(xg: &ExtendedGraph, f: &Flow) -> String {
    let mut s = serde_json::to_string_pretty(&to_file(xg, f)).expect("flow files always serialize");
    s.push('\n');
    s
}

/// Parses a flow file against the instance it was computed for. Volumes of
/// repeated entries add up; demand feasibility is left to the verifiers.
pub fn parse(xg: &ExtendedGraph, text: &str) -> Result<Flow, FormatError> {
    let file: FlowFile = serde_json::from_str(text)?;
    if file.version != 1 {
        return Err(invalid("version".into(), format!("unsupported version {}", file.version)));
    }
    let g = xg.base();
    let mut f = Flow::new(g.num_edges());
    for (k, e) in file.entries.iter().enumerate() {
        let path = format!("entries[{k}]");
        let i = xg
            .commodities()
            .iter()
            .position(|c| c.id == e.commodity)
            .ok_or_else(|| invalid(format!("{path}.commodity"), format!("unknown commodity `{}`", e.commodity)))?;
        let s = match &e.path {
            PathSpec::Outside(word) if word == "outside" => Strategy::Outside,
            PathSpec::Outside(word) => {
                return Err(invalid(format!("{path}.path"), format!("expected edge ids or \"outside\", got `{word}`")))
            }
            PathSpec::Edges(ids) => {
                if ids.iter().any(|&x| x as usize >= g.num_edges()) {
                    return Err(invalid(format!("{path}.path"), "edge id out of range".into()));
                }
                Strategy::Path(Path::new(ids.iter().map(|&x| EdgeIdx(x)).collect()))
            }
        };
        if !is_strategy(xg, i, &s) {
            return Err(invalid(format!("{path}.path"), format!("not a strategy of commodity `{}`", e.commodity)));
        }
        if e.volume <= Rational::from_integer(0.into()) {
            return Err(invalid(format!("{path}.volume"), "volume must be positive".into()));
        }
        f.add(g, i, s, e.volume.clone());
    }
    Ok(f)
}
