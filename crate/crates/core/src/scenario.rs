//! Random room scenarios and the canonical seven-block overlay.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, InfrastructureNetwork, OverlayApp, SignalModel};
use crate::radio::attenuation_from_positions;

pub const DEFAULT_ROOM_SIDE: f64 = 25.0;
pub const DEFAULT_NOISE_FLOOR: f64 = 1e-5;
pub const DEFAULT_SINR_THRESHOLD: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub node_count: usize,
    pub room_side: f64,
    pub noise_floor: f64,
    pub sinr_threshold: f64,
    pub block_weight: f64,
    pub seed: u64,
    /// Frame bound; `None` means four slots per overlay link.
    pub max_slots: Option<usize>,
    pub source_count: usize,
}

impl ScenarioConfig {
    pub fn new(node_count: usize, seed: u64) -> Self {
        Self {
            node_count,
            room_side: DEFAULT_ROOM_SIDE,
            noise_floor: DEFAULT_NOISE_FLOOR,
            sinr_threshold: DEFAULT_SINR_THRESHOLD,
            block_weight: 1.0,
            seed,
            max_slots: None,
            source_count: 1,
        }
    }

    fn check(&self) -> Result<()> {
        if self.node_count < 2 {
            return Err(Error::InvalidInfrastructure("a scenario needs at least two nodes".into()));
        }
        if !(self.room_side > 0.0) {
            return Err(Error::InvalidInfrastructure("room side must be positive".into()));
        }
        if self.source_count == 0 || self.source_count >= self.node_count {
            return Err(Error::InvalidInfrastructure(
                "source count must leave room for a distinct sink".into(),
            ));
        }
        Ok(())
    }
}

/// Uniform node positions in the square room, inverse-square attenuation,
/// capacities uniform on `[max w, sum w]`, and distinct random source(s) and sink.
pub fn generate_infrastructure(cfg: &ScenarioConfig, app: &OverlayApp) -> Result<InfrastructureNetwork> {
    cfg.check()?;
    let n = cfg.node_count;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let side = Uniform::new(0.0, cfg.room_side);
    let positions: Vec<(f64, f64)> = (0..n).map(|_| (side.sample(&mut rng), side.sample(&mut rng))).collect();
    let node_ids: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
    let gamma = attenuation_from_positions(&node_ids, &positions)?;

    let capacity = Uniform::new_inclusive(app.max_weight(), app.total_weight());
    let capacities: Vec<f64> = (0..n).map(|_| capacity.sample(&mut rng)).collect();

    let picked = rand::seq::index::sample(&mut rng, n, cfg.source_count + 1).into_vec();
    let (sources, sink) = picked.split_at(cfg.source_count);

    let net = InfrastructureNetwork {
        node_ids,
        capacities,
        gamma,
        positions: Some(positions),
        noise_floor: cfg.noise_floor,
        sinr_threshold: cfg.sinr_threshold,
        max_slots: cfg.max_slots.unwrap_or(4 * app.links.len()).max(1),
        sources: sources.to_vec(),
        sink: sink[0],
        signal_model: SignalModel::Gamma,
        rate: None,
    };
    net.check()?;
    Ok(net)
}

/// Artificial source, five equally weighted processing blocks in a chain with
/// a feedback link from block 5 back to block 2, and an artificial sink.
///
/// Only the block count, the weights and the 5 -> 2 feedback link are fixed
/// by the application; the chain body is a reconstruction. Load a different
/// overlay from an instance file to substitute the exact graph.
pub fn fig6_overlay(block_weight: f64) -> OverlayApp {
    let ids = ["src", "1", "2", "3", "4", "5", "sink"];
    let mut weights = vec![block_weight; ids.len()];
    weights[0] = 0.0;
    weights[6] = 0.0;
    OverlayApp {
        block_ids: ids.iter().map(|s| s.to_string()).collect(),
        weights,
        links: vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 2), (5, 6)],
        source_block: 0,
        sink_block: 6,
    }
}

pub fn generate_instance(cfg: &ScenarioConfig) -> Result<Instance> {
    let app = fig6_overlay(cfg.block_weight);
    let net = generate_infrastructure(cfg, &app)?;
    Instance::new(net, app)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn overlay_shape() {
        let app = fig6_overlay(1.0);
        assert!(app.check().is_ok());
        assert_eq!(app.len(), 7);
        assert_eq!(app.links.len(), 7);
        assert_eq!(app.weights, vec![0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn overlay_has_exactly_one_cycle() {
        // enumerate simple cycles by brute force over block permutations of the links
        let app = fig6_overlay(1.0);
        let mut cycles = BTreeSet::new();
        fn walk(app: &OverlayApp, start: usize, at: usize, path: &mut Vec<usize>, out: &mut BTreeSet<Vec<usize>>) {
            for q in app.successors(at) {
                if q == start {
                    let mut c = path.clone();
                    let m = c.iter().enumerate().min_by_key(|(_, &b)| b).unwrap().0;
                    c.rotate_left(m);
                    out.insert(c);
                } else if !path.contains(&q) {
                    path.push(q);
                    walk(app, start, q, path, out);
                    path.pop();
                }
            }
        }
        for p in app.blocks() {
            walk(&app, p, p, &mut vec![p], &mut cycles);
        }
        let names: Vec<Vec<&str>> =
            cycles.iter().map(|c| c.iter().map(|&b| app.block_ids[b].as_str()).collect()).collect();
        assert_eq!(names, vec![vec!["2", "3", "4", "5"]]);
    }

    #[test]
    fn capacities_follow_the_weight_range() {
        let app = fig6_overlay(1.0);
        for seed in 0..50 {
            let net = generate_infrastructure(&ScenarioConfig::new(6, seed), &app).unwrap();
            assert!(net.capacities.iter().all(|&c| (1.0..=5.0).contains(&c)));
        }
    }

    #[test]
    fn generation_is_seeded() {
        let a = generate_instance(&ScenarioConfig::new(5, 7)).unwrap();
        let b = generate_instance(&ScenarioConfig::new(5, 7)).unwrap();
        assert_eq!(a, b);
        let c = generate_instance(&ScenarioConfig::new(5, 8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn two_nodes_have_distinct_source_and_sink() {
        for seed in 0..100 {
            let inst = generate_instance(&ScenarioConfig::new(2, seed)).unwrap();
            assert_ne!(inst.net.sources[0], inst.net.sink);
        }
    }

    #[test]
    fn gamma_is_symmetric_with_zero_diagonal() {
        let inst = generate_instance(&ScenarioConfig::new(8, 3)).unwrap();
        let g = &inst.net.gamma;
        for i in 0..8 {
            assert_eq!(g[i][i], 0.0);
            for j in 0..8 {
                assert_eq!(g[i][j], g[j][i]);
            }
        }
        assert_eq!(inst.net.max_slots, 28);
    }

    #[test]
    fn distinct_seeds_give_distinct_instances() {
        let mut seen = BTreeSet::new();
        for seed in 0..1000 {
            let inst = generate_instance(&ScenarioConfig::new(4, seed)).unwrap();
            let key: Vec<u64> = inst
                .net
                .positions
                .unwrap()
                .iter()
                .flat_map(|&(x, y)| [x.to_bits(), y.to_bits()])
                .collect();
            assert!(seen.insert(key), "seed {seed} collided");
        }
    }

    #[test]
    fn default_radio_keeps_every_direct_link_usable() {
        // worst case in the room: the diagonal, 1/(25^2 * 2) / 1e-5 = 80
        let worst = 1.0 / (2.0 * DEFAULT_ROOM_SIDE * DEFAULT_ROOM_SIDE);
        assert!(worst / DEFAULT_NOISE_FLOOR >= DEFAULT_SINR_THRESHOLD);
    }
}
