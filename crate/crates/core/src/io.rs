//! JSON instance and solution files.
//!
//! Instance:
//!
//! ```json
//! { "infrastructure": { "nodes": [{"id": "n0", "capacity": 2.5, "x": 1.0, "y": 4.0}],
//!                       "gamma": [[0.0]], "noise_floor": 1e-5, "sinr_threshold": 10.0,
//!                       "max_slots": 28, "sources": ["n0"], "sink": "n0" },
//!   "overlay": { "blocks": [{"id": "src", "weight": 0.0}], "links": [["src", "1"]],
//!                "source_block": "src", "sink_block": "sink" } }
//! ```
//!
//! `gamma` is optional when every node carries `x`/`y`; an explicit matrix wins.
//! Solutions hold a `placement` map (block id to node ids) and `transmissions`
//! as `[sender, receiver, block, origin, slot]` tuples.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, InfrastructureNetwork, OverlayApp, SignalModel, Solution, Transmission};
use crate::radio::attenuation_from_positions;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub infrastructure: InfrastructureFile,
    pub overlay: OverlayFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfrastructureFile {
    pub nodes: Vec<NodeEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<Vec<f64>>>,
    pub noise_floor: f64,
    pub sinr_threshold: f64,
    pub max_slots: usize,
    pub sources: Vec<String>,
    pub sink: String,
    #[serde(default)]
    pub signal_model: SignalModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeEntry {
    pub id: String,
    pub capacity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverlayFile {
    pub blocks: Vec<BlockEntry>,
    pub links: Vec<(String, String)>,
    pub source_block: String,
    pub sink_block: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockEntry {
    pub id: String,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Hosts {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SolutionFile {
    placement: BTreeMap<String, Hosts>,
    transmissions: Vec<(String, String, String, String, usize)>,
}

fn node_idx(net: &InfrastructureNetwork, id: &str) -> Result<usize> {
    net.node_index(id).ok_or_else(|| Error::UnknownId { kind: "node", id: id.to_string() })
}

fn block_idx(app: &OverlayApp, id: &str) -> Result<usize> {
    app.block_index(id).ok_or_else(|| Error::UnknownId { kind: "block", id: id.to_string() })
}

impl InstanceFile {
    pub fn into_instance(self) -> Result<Instance> {
        let infra = self.infrastructure;
        let node_ids: Vec<String> = infra.nodes.iter().map(|n| n.id.clone()).collect();
        let positions: Option<Vec<(f64, f64)>> =
            infra.nodes.iter().map(|n| Some((n.x?, n.y?))).collect();
        let gamma = match (&infra.gamma, &positions) {
            (Some(g), _) => g.clone(),
            (None, Some(p)) => attenuation_from_positions(&node_ids, p)?,
            (None, None) => {
                return Err(Error::InvalidInfrastructure(
                    "either `gamma` or x/y for every node is required".into(),
                ))
            }
        };
        let mut net = InfrastructureNetwork {
            capacities: infra.nodes.iter().map(|n| n.capacity).collect(),
            node_ids,
            gamma,
            positions,
            noise_floor: infra.noise_floor,
            sinr_threshold: infra.sinr_threshold,
            max_slots: infra.max_slots,
            sources: Vec::new(),
            sink: 0,
            signal_model: infra.signal_model,
            rate: infra.rate,
        };
        net.sources = infra.sources.iter().map(|s| node_idx(&net, s)).collect::<Result<_>>()?;
        net.sink = node_idx(&net, &infra.sink)?;

        let ov = self.overlay;
        let mut app = OverlayApp {
            block_ids: ov.blocks.iter().map(|b| b.id.clone()).collect(),
            weights: ov.blocks.iter().map(|b| b.weight).collect(),
            links: Vec::new(),
            source_block: 0,
            sink_block: 0,
        };
        app.links = ov
            .links
            .iter()
            .map(|(a, b)| Ok((block_idx(&app, a)?, block_idx(&app, b)?)))
            .collect::<Result<_>>()?;
        app.source_block = block_idx(&app, &ov.source_block)?;
        app.sink_block = block_idx(&app, &ov.sink_block)?;
        Instance::new(net, app)
    }

    pub fn from_instance(inst: &Instance) -> Self {
        let net = &inst.net;
        let app = &inst.app;
        InstanceFile {
            infrastructure: InfrastructureFile {
                nodes: net
                    .nodes()
                    .map(|v| NodeEntry {
                        id: net.node_ids[v].clone(),
                        capacity: net.capacities[v],
                        x: net.positions.as_ref().map(|p| p[v].0),
                        y: net.positions.as_ref().map(|p| p[v].1),
                    })
                    .collect(),
                gamma: Some(net.gamma.clone()),
                noise_floor: net.noise_floor,
                sinr_threshold: net.sinr_threshold,
                max_slots: net.max_slots,
                sources: net.sources.iter().map(|&s| net.node_ids[s].clone()).collect(),
                sink: net.node_ids[net.sink].clone(),
                signal_model: net.signal_model,
                rate: net.rate,
            },
            overlay: OverlayFile {
                blocks: app
                    .blocks()
                    .map(|p| BlockEntry { id: app.block_ids[p].clone(), weight: app.weights[p] })
                    .collect(),
                links: app
                    .links
                    .iter()
                    .map(|&(a, b)| (app.block_ids[a].clone(), app.block_ids[b].clone()))
                    .collect(),
                source_block: app.block_ids[app.source_block].clone(),
                sink_block: app.block_ids[app.sink_block].clone(),
            },
        }
    }
}

pub fn instance_from_json(text: &str) -> Result<Instance> {
    serde_json::from_str::<InstanceFile>(text)?.into_instance()
}

pub fn instance_to_json(inst: &Instance) -> String {
    let mut s = serde_json::to_string_pretty(&InstanceFile::from_instance(inst)).expect("instance serializes");
    s.push('\n');
    s
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance> {
    instance_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_instance(path: impl AsRef<Path>, inst: &Instance) -> Result<()> {
    std::fs::write(path, instance_to_json(inst))?;
    Ok(())
}

pub fn solution_from_json(text: &str, inst: &Instance) -> Result<Solution> {
    let file: SolutionFile = serde_json::from_str(text)?;
    let mut sol = Solution::new();
    for (block, hosts) in &file.placement {
        let p = block_idx(&inst.app, block)?;
        let nodes: Vec<&String> = match hosts {
            Hosts::One(n) => vec![n],
            Hosts::Many(ns) => ns.iter().collect(),
        };
        let set: BTreeSet<usize> = nodes.into_iter().map(|n| node_idx(&inst.net, n)).collect::<Result<_>>()?;
        sol.placement.insert(p, set);
    }
    for (a, b, p, o, t) in &file.transmissions {
        sol.transmissions.insert(Transmission::new(
            node_idx(&inst.net, a)?,
            node_idx(&inst.net, b)?,
            block_idx(&inst.app, p)?,
            node_idx(&inst.net, o)?,
            *t,
        ));
    }
    Ok(sol)
}

pub fn solution_to_json(sol: &Solution, inst: &Instance) -> String {
    let net = &inst.net;
    let app = &inst.app;
    let file = SolutionFile {
        placement: sol
            .placement
            .iter()
            .map(|(&p, nodes)| {
                (app.block_ids[p].clone(), Hosts::Many(nodes.iter().map(|&v| net.node_ids[v].clone()).collect()))
            })
            .collect(),
        transmissions: sol
            .transmissions
            .iter()
            .map(|t| {
                (
                    net.node_ids[t.sender].clone(),
                    net.node_ids[t.receiver].clone(),
                    app.block_ids[t.block].clone(),
                    net.node_ids[t.origin].clone(),
                    t.slot,
                )
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("solution serializes");
    s.push('\n');
    s
}

pub fn read_solution(path: impl AsRef<Path>, inst: &Instance) -> Result<Solution> {
    solution_from_json(&std::fs::read_to_string(path)?, inst)
}

pub fn write_solution(path: impl AsRef<Path>, sol: &Solution, inst: &Instance) -> Result<()> {
    std::fs::write(path, solution_to_json(sol, inst))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"{
      "infrastructure": {
        "nodes": [{"id": "A", "capacity": 1.0, "x": 0.0, "y": 0.0},
                  {"id": "B", "capacity": 2.0, "x": 2.0, "y": 0.0}],
        "noise_floor": 0.01, "sinr_threshold": 10.0, "max_slots": 4,
        "sources": ["A"], "sink": "B"
      },
      "overlay": {
        "blocks": [{"id": "src", "weight": 0}, {"id": "sink", "weight": 0}],
        "links": [["src", "sink"]], "source_block": "src", "sink_block": "sink"
      }
    }"#;

    #[test]
    fn gamma_is_derived_from_positions_when_absent() {
        let inst = instance_from_json(TEXT).unwrap();
        assert_eq!(inst.net.gamma[0][1], 0.25);
        assert_eq!(inst.net.signal_model, SignalModel::Gamma);
    }

    #[test]
    fn instance_and_solution_survive_a_file_round_trip() {
        let inst = instance_from_json(TEXT).unwrap();
        let again = instance_from_json(&instance_to_json(&inst)).unwrap();
        assert_eq!(inst, again);

        let mut sol = Solution::new();
        sol.place(0, 0);
        sol.place(1, 1);
        sol.transmissions.insert(Transmission::new(0, 1, 0, 0, 0));
        let text = solution_to_json(&sol, &inst);
        assert_eq!(solution_from_json(&text, &inst).unwrap(), sol);
    }

    #[test]
    fn unknown_ids_are_reported() {
        let inst = instance_from_json(TEXT).unwrap();
        let bad = r#"{"placement": {"src": "Z"}, "transmissions": []}"#;
        assert!(matches!(solution_from_json(bad, &inst), Err(Error::UnknownId { kind: "node", .. })));
        let single = r#"{"placement": {"src": "A", "sink": ["B"]}, "transmissions": [["A","B","src","A",0]]}"#;
        assert_eq!(solution_from_json(single, &inst).unwrap().transmissions.len(), 1);
    }
}
