mod common;

use std::collections::BTreeSet;

use haulcharge_core::data::{load_routes, price_route, routes_to_json, save_routes};
use haulcharge_core::network::{k_fastest_paths, k_fastest_routes, NetworkNode, NodeId, RoadEdge, RoadGraph};
use proptest::prelude::*;

#[test]
fn fixture_counts() {
    let region = common::fixture_region();
    let g = &region.graph;
    assert_eq!(g.nodes().len(), 40);
    assert_eq!(g.edges().len(), 58);
    assert_eq!(g.city_index().len(), 8);
    assert_eq!(g.counties().len(), 12);
    assert_eq!(g.utilities().len(), 3);
    assert_eq!(region.tariffs.rows.len(), 3);
    assert_eq!(region.freight.len(), 28);
    assert!(g.isolated_nodes().is_empty());
}

/// All loopless paths from `s` to `t`, by depth-first search.
fn simple_paths(g: &RoadGraph, s: NodeId, t: NodeId) -> Vec<Vec<NodeId>> {
    let mut adj: std::collections::BTreeMap<NodeId, BTreeSet<NodeId>> = Default::default();
    for e in g.edges() {
        adj.entry(e.u).or_default().insert(e.v);
        adj.entry(e.v).or_default().insert(e.u);
    }
    let mut out = Vec::new();
    let mut path = vec![s];
    fn dfs(
        adj: &std::collections::BTreeMap<NodeId, BTreeSet<NodeId>>,
        t: NodeId,
        path: &mut Vec<NodeId>,
        out: &mut Vec<Vec<NodeId>>,
    ) {
        let u = *path.last().unwrap();
        if u == t {
            out.push(path.clone());
            return;
        }
        for &v in adj.get(&u).into_iter().flatten() {
            if !path.contains(&v) {
                path.push(v);
                dfs(adj, t, path, out);
                path.pop();
            }
        }
    }
    dfs(&adj, t, &mut path, &mut out);
    out
}

fn brute_force_k(g: &RoadGraph, s: NodeId, t: NodeId, k: usize) -> Vec<(Vec<NodeId>, f64)> {
    let mut all: Vec<(Vec<NodeId>, f64)> = simple_paths(g, s, t)
        .into_iter()
        .map(|p| {
            let d = g.path_duration_h(&p).unwrap();
            (p, d)
        })
        .collect();
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

#[test]
fn yen_matches_exhaustive_enumeration_on_fixture() {
    let g = common::fixture_region().graph;
    for (o, d) in [("Dallas", "Houston"), ("El Paso", "Beaumont"), ("Laredo", "Austin")] {
        let s = g.city_node(o).unwrap();
        let t = g.city_node(d).unwrap();
        let yen = k_fastest_paths(&g, s, t, 3).unwrap();
        let brute = brute_force_k(&g, s, t, 3);
        assert_eq!(yen.len(), brute.len());
        for (a, b) in yen.iter().zip(&brute) {
            assert!((a.1 - b.1).abs() <= 1e-9 * b.1, "{o}-{d}: {} vs {}", a.1, b.1);
        }
    }
}

fn small_graph(n: usize, extra: &[(usize, usize, u8)]) -> RoadGraph {
    let nodes = (0..n)
        .map(|i| NetworkNode {
            id: i as NodeId + 1,
            lat: 30.0,
            lon: -97.0,
            county: format!("C{}", i % 3),
            utility_id: "U".into(),
            city: match i {
                0 => Some("S".into()),
                1 => Some("T".into()),
                _ => None,
            },
        })
        .collect();
    // a spanning chain keeps the graph connected
    let mut edges: Vec<RoadEdge> = (1..n)
        .map(|i| RoadEdge {
            u: i as NodeId,
            v: i as NodeId + 1,
            length_km: 10.0 + i as f64,
            speed_kph: 80.0,
            highway_name: "H".into(),
        })
        .collect();
    for &(a, b, w) in extra {
        let (a, b) = (a % n, b % n);
        if a != b {
            edges.push(RoadEdge {
                u: a as NodeId + 1,
                v: b as NodeId + 1,
                length_km: 5.0 + f64::from(w),
                speed_kph: 60.0 + f64::from(w % 5) * 10.0,
                highway_name: "X".into(),
            });
        }
    }
    RoadGraph::new(nodes, edges).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn first_route_is_never_slower_than_any_loopless_path(
        n in 3usize..=12,
        extra in prop::collection::vec((0usize..12, 0usize..12, 0u8..60), 0..14),
        k in 1usize..5,
    ) {
        let g = small_graph(n, &extra);
        let yen = k_fastest_paths(&g, 1, 2, k).unwrap();
        let brute = brute_force_k(&g, 1, 2, k);
        prop_assert_eq!(yen.len(), brute.len());
        for (a, b) in yen.iter().zip(&brute) {
            prop_assert!((a.1 - b.1).abs() <= 1e-9 * b.1.max(1e-9));
        }
    }
}

fn all_routes(g: &RoadGraph, cities: &[String]) -> Vec<haulcharge_core::Route> {
    let mut out = Vec::new();
    for o in cities {
        for d in cities {
            if o != d {
                out.extend(k_fastest_routes(g, o, d, 3, 50.0).unwrap());
            }
        }
    }
    out
}

#[test]
fn generated_routes_are_consistent_and_deterministic() {
    let g = common::fixture_region().graph;
    let cities: Vec<String> = g.city_index().keys().cloned().collect();
    let routes = all_routes(&g, &cities);
    assert_eq!(routes.len(), 8 * 7 * 3);
    for r in &routes {
        let d: f64 = r.segments.iter().map(|s| s.distance_km).sum();
        let path_len = g.path_length_km(&r.node_path).unwrap();
        assert!(common::rel_diff(d, path_len) <= 1e-9, "{}", r.route_id);
        let max_edge = g
            .path_edges(&r.node_path)
            .unwrap()
            .into_iter()
            .map(|e| g.edges()[e].length_km)
            .fold(0.0, f64::max);
        for s in &r.segments {
            assert!(s.distance_km < 50.0 + max_edge);
            assert!(common::rel_diff(s.distance_km, s.speed_kph * s.duration_h) <= 1e-9);
        }
        assert_eq!(r.sites.len(), r.segments.len() + 1);
        assert_eq!(r.sites.first().unwrap().node_id, *r.node_path.first().unwrap());
        assert_eq!(r.sites.last().unwrap().node_id, *r.node_path.last().unwrap());
    }
    let again = all_routes(&g, &cities);
    assert_eq!(routes_to_json(&routes), routes_to_json(&again));
}

#[test]
fn route_files_round_trip_exactly() {
    let region = common::fixture_region();
    let cities: Vec<String> = region.graph.city_index().keys().cloned().collect();
    let routes: Vec<_> = all_routes(&region.graph, &cities)
        .iter()
        .map(|r| price_route(r, &region.tariffs).unwrap())
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    save_routes(&a, &routes[..1]).unwrap();
    save_routes(&b, &routes[..1]).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    save_routes(&a, &routes).unwrap();
    assert_eq!(load_routes(&a).unwrap(), routes);
    // unpriced routes keep the schema without a price field
    let bare = k_fastest_routes(&region.graph, "Dallas", "Houston", 1, 50.0).unwrap();
    assert!(!routes_to_json(&bare).contains("price"));
}

#[test]
fn pricing_follows_site_utilities() {
    let region = common::fixture_region();
    let cities: Vec<String> = region.graph.city_index().keys().cloned().collect();
    let crossing = all_routes(&region.graph, &cities)
        .into_iter()
        .find(|r| r.sites.iter().map(|s| &s.utility_id).collect::<BTreeSet<_>>().len() >= 2)
        .expect("some fixture route crosses two utility territories");
    let priced = price_route(&crossing, &region.tariffs).unwrap();
    for s in &priced.sites {
        assert_eq!(s.price, Some(region.tariffs.rows[&s.utility_id]));
    }
}
