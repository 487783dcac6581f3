//! Road network graph, k-fastest loopless routes and en-route charging sites.
//!
//! The graph is undirected. Edge weights for routing are travel times
//! (`length_km / speed_kph`). Routes are cut into segments at charging
//! sites, which always snap to path nodes.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::fs;
use std::path::Path;

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = u64;

/// Default number of alternative routes per O-D pair.
pub const DEFAULT_K_ROUTES: usize = 3;
/// Default distance between en-route charging sites.
pub const DEFAULT_SPACING_KM: f64 = 50.0;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("network parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("node {id}: invalid field `{field}`: {reason}")]
    InvalidNode {
        id: NodeId,
        field: &'static str,
        reason: String,
    },
    #[error("edge #{index} ({u}-{v}): invalid field `{field}`: {reason}")]
    InvalidEdge {
        index: usize,
        u: NodeId,
        v: NodeId,
        field: &'static str,
        reason: String,
    },
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("city `{city}` is attached to both node {first} and node {second}")]
    DuplicateCity {
        city: String,
        first: NodeId,
        second: NodeId,
    },
    #[error("edge #{index} references missing node {node}")]
    DanglingEndpoint { index: usize, node: NodeId },
    #[error("unknown city `{0}`")]
    UnknownCity(String),
    #[error("no path between `{origin}` and `{destination}`")]
    Unreachable { origin: String, destination: String },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("charging-site spacing must be positive, got {0}")]
    BadSpacing(f64),
    #[error("node path is disconnected between {from} and {to}")]
    DisconnectedPath { from: NodeId, to: NodeId },
    #[error("node path references missing node {0}")]
    UnknownNode(NodeId),
    #[error("node path is empty")]
    EmptyPath,
    #[error("route endpoint {0} has no county/utility tags and cannot host a charging site")]
    IneligibleEndpoint(NodeId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkNode {
    pub id: NodeId,
    pub lat: f64,
    pub lon: f64,
    pub county: String,
    pub utility_id: String,
    #[serde(default)]
    pub city: Option<String>,
}

impl NetworkNode {
    /// Nodes without county and utility tags cannot be charging sites.
    pub fn is_site_eligible(&self) -> bool {
        !self.county.is_empty() && !self.utility_id.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadEdge {
    pub u: NodeId,
    pub v: NodeId,
    pub length_km: f64,
    pub speed_kph: f64,
    #[serde(rename = "highway")]
    pub highway_name: String,
}

impl RoadEdge {
    pub fn travel_time_h(&self) -> f64 {
        self.length_km / self.speed_kph
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    nodes: Vec<NetworkNode>,
    edges: Vec<RoadEdge>,
}

/// Validated, immutable road network.
#[derive(Debug, Clone)]
pub struct RoadGraph {
    nodes: Vec<NetworkNode>,
    edges: Vec<RoadEdge>,
    city_index: BTreeMap<String, NodeId>,
    slot: HashMap<NodeId, usize>,
    // per node slot: (neighbour slot, edge index), sorted by neighbour id then edge index
    adjacency: Vec<Vec<(usize, usize)>>,
}

/// Reads and validates a network JSON file.
pub fn build_graph(path: impl AsRef<Path>) -> Result<RoadGraph, NetworkError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| NetworkError::Io {
        path: path.display().to_string(),
        source,
    })?;
    RoadGraph::from_json(&text)
}

impl RoadGraph {
    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        let file: NetworkFile = serde_json::from_str(text).map_err(|e| NetworkError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::new(file.nodes, file.edges)
    }

    pub fn new(nodes: Vec<NetworkNode>, edges: Vec<RoadEdge>) -> Result<Self, NetworkError> {
        let mut slot = HashMap::with_capacity(nodes.len());
        let mut city_index = BTreeMap::new();
        for (i, node) in nodes.iter().enumerate() {
            if !(-90.0..=90.0).contains(&node.lat) {
                return Err(NetworkError::InvalidNode {
                    id: node.id,
                    field: "lat",
                    reason: format!("{} outside [-90, 90]", node.lat),
                });
            }
            if !(-180.0..=180.0).contains(&node.lon) {
                return Err(NetworkError::InvalidNode {
                    id: node.id,
                    field: "lon",
                    reason: format!("{} outside [-180, 180]", node.lon),
                });
            }
            if slot.insert(node.id, i).is_some() {
                return Err(NetworkError::DuplicateNode(node.id));
            }
            if let Some(city) = &node.city {
                if let Some(first) = city_index.insert(city.clone(), node.id) {
                    return Err(NetworkError::DuplicateCity {
                        city: city.clone(),
                        first,
                        second: node.id,
                    });
                }
            }
        }

        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (index, edge) in edges.iter().enumerate() {
            let invalid = |field, reason: String| NetworkError::InvalidEdge {
                index,
                u: edge.u,
                v: edge.v,
                field,
                reason,
            };
            if !(edge.length_km.is_finite() && edge.length_km > 0.0) {
                return Err(invalid("length_km", format!("{} is not positive", edge.length_km)));
            }
            if !(edge.speed_kph.is_finite() && edge.speed_kph > 0.0) {
                return Err(invalid("speed_kph", format!("{} is not positive", edge.speed_kph)));
            }
            if edge.u == edge.v {
                return Err(invalid("v", "self-loop edge".to_string()));
            }
            let su = *slot
                .get(&edge.u)
                .ok_or(NetworkError::DanglingEndpoint { index, node: edge.u })?;
            let sv = *slot
                .get(&edge.v)
                .ok_or(NetworkError::DanglingEndpoint { index, node: edge.v })?;
            adjacency[su].push((sv, index));
            adjacency[sv].push((su, index));
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(n, e)| (nodes[n].id, e));
        }

        Ok(Self {
            nodes,
            edges,
            city_index,
            slot,
            adjacency,
        })
    }

    pub fn nodes(&self) -> &[NetworkNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[RoadEdge] {
        &self.edges
    }

    pub fn city_index(&self) -> &BTreeMap<String, NodeId> {
        &self.city_index
    }

    pub fn node(&self, id: NodeId) -> Option<&NetworkNode> {
        self.slot.get(&id).map(|&i| &self.nodes[i])
    }

    pub fn city_node(&self, city: &str) -> Result<NodeId, NetworkError> {
        self.city_index
            .get(city)
            .copied()
            .ok_or_else(|| NetworkError::UnknownCity(city.to_string()))
    }

    /// Nodes with no incident edge. They are kept in the graph but can never
    /// be part of a route.
    pub fn isolated_nodes(&self) -> Vec<NodeId> {
        self.adjacency
            .iter()
            .enumerate()
            .filter(|(_, adj)| adj.is_empty())
            .map(|(i, _)| self.nodes[i].id)
            .collect()
    }

    pub fn counties(&self) -> BTreeSet<&str> {
        self.nodes
            .iter()
            .filter(|n| !n.county.is_empty())
            .map(|n| n.county.as_str())
            .collect()
    }

    pub fn utilities(&self) -> BTreeSet<&str> {
        self.nodes
            .iter()
            .filter(|n| !n.utility_id.is_empty())
            .map(|n| n.utility_id.as_str())
            .collect()
    }

    /// Fastest edge joining two node slots, ties broken by lowest edge index.
    fn fastest_edge(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency[a]
            .iter()
            .filter(|&&(n, _)| n == b)
            .map(|&(_, e)| e)
            .min_by(|&x, &y| {
                self.edges[x]
                    .travel_time_h()
                    .total_cmp(&self.edges[y].travel_time_h())
                    .then(x.cmp(&y))
            })
    }

    /// Edge indices along a node-id path; errors if consecutive nodes are not adjacent.
    pub fn path_edges(&self, node_path: &[NodeId]) -> Result<Vec<usize>, NetworkError> {
        let slots = node_path
            .iter()
            .map(|id| self.slot.get(id).copied().ok_or(NetworkError::UnknownNode(*id)))
            .collect::<Result<Vec<_>, _>>()?;
        slots
            .windows(2)
            .map(|w| {
                self.fastest_edge(w[0], w[1])
                    .ok_or(NetworkError::DisconnectedPath {
                        from: self.nodes[w[0]].id,
                        to: self.nodes[w[1]].id,
                    })
            })
            .collect()
    }

    /// Travel time of a path, summed edge by edge from the first node.
    pub fn path_duration_h(&self, node_path: &[NodeId]) -> Result<f64, NetworkError> {
        Ok(self
            .path_edges(node_path)?
            .into_iter()
            .map(|e| self.edges[e].travel_time_h())
            .sum())
    }

    pub fn path_length_km(&self, node_path: &[NodeId]) -> Result<f64, NetworkError> {
        Ok(self
            .path_edges(node_path)?
            .into_iter()
            .map(|e| self.edges[e].length_km)
            .sum())
    }
}

// ---------------------------------------------------------------------------
// routing

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub k: usize,
    #[serde(rename = "d_km")]
    pub distance_km: f64,
    #[serde(rename = "v_kph")]
    pub speed_kph: f64,
    #[serde(rename = "t_h")]
    pub duration_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChargingSite {
    pub k: usize,
    pub node_id: NodeId,
    pub lat: f64,
    pub lon: f64,
    pub county: String,
    pub utility_id: String,
    pub cum_km: f64,
    /// Energy price in USD/MWh, filled in from the tariff table.
    #[serde(
        rename = "price_usd_per_mwh",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub price: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Route {
    pub route_id: String,
    #[serde(rename = "origin")]
    pub origin_city: String,
    #[serde(rename = "destination")]
    pub destination_city: String,
    #[serde(rename = "distance_km")]
    pub total_distance_km: f64,
    #[serde(rename = "duration_h")]
    pub total_duration_h: f64,
    #[serde(rename = "highways")]
    pub highway_names: Vec<String>,
    #[serde(rename = "nodes")]
    pub node_path: Vec<NodeId>,
    pub sites: Vec<ChargingSite>,
    pub segments: Vec<Segment>,
}

impl Route {
    pub fn is_priced(&self) -> bool {
        self.sites.iter().all(|s| s.price.is_some())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Label(OrderedFloat<f64>, usize);

/// Single-source fastest path with lexicographic tie-breaking on node ids.
/// `banned_nodes[slot]` nodes are never entered; `banned_edges` holds
/// unordered slot pairs that may not be traversed.
fn fastest_path(
    graph: &RoadGraph,
    source: usize,
    target: usize,
    banned_nodes: &[bool],
    banned_edges: &BTreeSet<(usize, usize)>,
) -> Option<Vec<usize>> {
    let n = graph.nodes.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(std::cmp::Reverse(Label(OrderedFloat(0.0), source)));

    let path_to = |pred: &[Option<usize>], mut at: usize| {
        let mut ids = vec![graph.nodes[at].id];
        while let Some(p) = pred[at] {
            ids.push(graph.nodes[p].id);
            at = p;
        }
        ids.reverse();
        ids
    };

    while let Some(std::cmp::Reverse(Label(OrderedFloat(d), u))) = heap.pop() {
        if done[u] || d > dist[u] {
            continue;
        }
        done[u] = true;
        if u == target {
            break;
        }
        for &(v, e) in &graph.adjacency[u] {
            if done[v] || banned_nodes[v] || banned_edges.contains(&(u.min(v), u.max(v))) {
                continue;
            }
            let nd = d + graph.edges[e].travel_time_h();
            match nd.partial_cmp(&dist[v]) {
                Some(Ordering::Less) => {
                    dist[v] = nd;
                    pred[v] = Some(u);
                    heap.push(std::cmp::Reverse(Label(OrderedFloat(nd), v)));
                }
                Some(Ordering::Equal) => {
                    // equal time: keep the lexicographically smaller node sequence
                    let mut via_u = path_to(&pred, u);
                    via_u.push(graph.nodes[v].id);
                    if via_u < path_to(&pred, v) {
                        pred[v] = Some(u);
                    }
                }
                _ => {}
            }
        }
    }

    if !done[target] {
        return None;
    }
    let mut slots = vec![target];
    let mut at = target;
    while let Some(p) = pred[at] {
        slots.push(p);
        at = p;
    }
    slots.reverse();
    Some(slots)
}

/// Up to `k` loopless paths from `origin` to `destination` in ascending travel
/// time (Yen's deviation search). Ties are broken by node-id sequence.
pub fn k_fastest_paths(
    graph: &RoadGraph,
    origin: NodeId,
    destination: NodeId,
    k: usize,
) -> Result<Vec<(Vec<NodeId>, f64)>, NetworkError> {
    if k == 0 {
        return Err(NetworkError::ZeroK);
    }
    let src = *graph.slot.get(&origin).ok_or(NetworkError::UnknownNode(origin))?;
    let dst = *graph
        .slot
        .get(&destination)
        .ok_or(NetworkError::UnknownNode(destination))?;
    if src == dst {
        return Ok(vec![(vec![origin], 0.0)]);
    }

    let n = graph.nodes.len();
    let cost_of = |slots: &[usize]| -> f64 {
        slots
            .windows(2)
            .map(|w| graph.edges[graph.fastest_edge(w[0], w[1]).unwrap()].travel_time_h())
            .sum()
    };
    let ids_of = |slots: &[usize]| -> Vec<NodeId> { slots.iter().map(|&s| graph.nodes[s].id).collect() };

    let Some(first) = fastest_path(graph, src, dst, &vec![false; n], &BTreeSet::new()) else {
        return Ok(Vec::new());
    };
    let mut accepted: Vec<Vec<usize>> = vec![first];
    let mut candidates: BTreeSet<(OrderedFloat<f64>, Vec<NodeId>, Vec<usize>)> = BTreeSet::new();

    while accepted.len() < k {
        let last = accepted.last().unwrap().clone();
        for i in 0..last.len() - 1 {
            let spur = last[i];
            let root = &last[..=i];
            let mut banned_edges = BTreeSet::new();
            for p in &accepted {
                if p.len() > i + 1 && &p[..=i] == root {
                    let (a, b) = (p[i], p[i + 1]);
                    banned_edges.insert((a.min(b), a.max(b)));
                }
            }
            let mut banned_nodes = vec![false; n];
            for &s in &root[..i] {
                banned_nodes[s] = true;
            }
            if let Some(spur_path) = fastest_path(graph, spur, dst, &banned_nodes, &banned_edges) {
                let mut full = root[..i].to_vec();
                full.extend(spur_path);
                if accepted.contains(&full) {
                    continue;
                }
                candidates.insert((OrderedFloat(cost_of(&full)), ids_of(&full), full));
            }
        }
        match candidates.pop_first() {
            Some((_, _, path)) => accepted.push(path),
            None => break,
        }
    }

    let mut out: Vec<(Vec<NodeId>, f64)> = accepted
        .iter()
        .map(|p| (ids_of(p), cost_of(p)))
        .collect();
    out.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}

/// Chooses charging sites along `node_path` and cuts it into segments.
///
/// Origin and destination are always sites. Walking the path, a site is
/// emitted at the first eligible node whose distance since the previous site
/// reaches `spacing_km`.
pub fn place_charging_sites(
    graph: &RoadGraph,
    node_path: &[NodeId],
    spacing_km: f64,
) -> Result<(Vec<ChargingSite>, Vec<Segment>), NetworkError> {
    if !(spacing_km.is_finite() && spacing_km > 0.0) {
        return Err(NetworkError::BadSpacing(spacing_km));
    }
    if node_path.is_empty() {
        return Err(NetworkError::EmptyPath);
    }
    let edges = graph.path_edges(node_path)?;
    let node_at = |i: usize| graph.node(node_path[i]).expect("checked by path_edges");
    for &end in &[0, node_path.len() - 1] {
        if !node_at(end).is_site_eligible() {
            return Err(NetworkError::IneligibleEndpoint(node_path[end]));
        }
    }

    let make_site = |k: usize, i: usize, cum_km: f64| {
        let node = node_at(i);
        ChargingSite {
            k,
            node_id: node.id,
            lat: node.lat,
            lon: node.lon,
            county: node.county.clone(),
            utility_id: node.utility_id.clone(),
            cum_km,
            price: None,
        }
    };

    let mut sites = vec![make_site(0, 0, 0.0)];
    let mut segments = Vec::new();
    let mut cum_km = 0.0;
    let (mut seg_km, mut seg_h) = (0.0, 0.0);
    let last = node_path.len() - 1;
    for (hop, &e) in edges.iter().enumerate() {
        let edge = &graph.edges[e];
        cum_km += edge.length_km;
        seg_km += edge.length_km;
        seg_h += edge.travel_time_h();
        let i = hop + 1;
        if i == last || (seg_km >= spacing_km && node_at(i).is_site_eligible()) {
            let k = segments.len();
            segments.push(Segment {
                k,
                distance_km: seg_km,
                speed_kph: seg_km / seg_h,
                duration_h: seg_h,
            });
            sites.push(make_site(k + 1, i, cum_km));
            seg_km = 0.0;
            seg_h = 0.0;
        }
    }
    Ok((sites, segments))
}

fn highway_sequence(graph: &RoadGraph, edges: &[usize]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for &e in edges {
        let name = &graph.edges[e].highway_name;
        if !name.is_empty() && names.last() != Some(name) {
            names.push(name.clone());
        }
    }
    names
}

/// Builds a route (sites, segments, metadata) for an explicit node path.
pub fn build_route(
    graph: &RoadGraph,
    route_id: String,
    origin_city: &str,
    destination_city: &str,
    node_path: Vec<NodeId>,
    spacing_km: f64,
) -> Result<Route, NetworkError> {
    let (sites, segments) = place_charging_sites(graph, &node_path, spacing_km)?;
    let edges = graph.path_edges(&node_path)?;
    Ok(Route {
        route_id,
        origin_city: origin_city.to_string(),
        destination_city: destination_city.to_string(),
        total_distance_km: segments.iter().map(|s| s.distance_km).sum(),
        total_duration_h: segments.iter().map(|s| s.duration_h).sum(),
        highway_names: highway_sequence(graph, &edges),
        node_path,
        sites,
        segments,
    })
}

/// Up to `k` fastest loopless routes between two cities, with charging sites
/// every `spacing_km`. Route ids are `{origin}-{destination}-{n}`, n from 1.
pub fn k_fastest_routes(
    graph: &RoadGraph,
    origin: &str,
    destination: &str,
    k: usize,
    spacing_km: f64,
) -> Result<Vec<Route>, NetworkError> {
    let o = graph.city_node(origin)?;
    let d = graph.city_node(destination)?;
    let paths = k_fastest_paths(graph, o, d, k)?;
    if paths.is_empty() {
        return Err(NetworkError::Unreachable {
            origin: origin.to_string(),
            destination: destination.to_string(),
        });
    }
    let mut routes = paths
        .into_iter()
        .map(|(path, _)| build_route(graph, String::new(), origin, destination, path, spacing_km))
        .collect::<Result<Vec<_>, _>>()?;
    routes.sort_by(|a, b| {
        a.total_duration_h
            .total_cmp(&b.total_duration_h)
            .then_with(|| a.node_path.cmp(&b.node_path))
    });
    for (i, r) in routes.iter_mut().enumerate() {
        r.route_id = format!("{origin}-{destination}-{}", i + 1);
    }
    Ok(routes)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn node(id: NodeId, city: Option<&str>) -> NetworkNode {
        NetworkNode {
            id,
            lat: 30.0,
            lon: -97.0 + id as f64 * 0.01,
            county: format!("C{}", id % 3),
            utility_id: "U".into(),
            city: city.map(str::to_string),
        }
    }

    pub(crate) fn edge(u: NodeId, v: NodeId, km: f64, kph: f64) -> RoadEdge {
        RoadEdge {
            u,
            v,
            length_km: km,
            speed_kph: kph,
            highway_name: "H".into(),
        }
    }

    fn triangle() -> RoadGraph {
        RoadGraph::new(
            vec![node(1, Some("A")), node(2, Some("B")), node(3, Some("C"))],
            vec![edge(1, 2, 100.0, 100.0), edge(1, 3, 50.0, 100.0), edge(3, 2, 40.0, 100.0)],
        )
        .unwrap()
    }

    #[test]
    fn single_edge_travel_time() {
        let g = RoadGraph::new(vec![node(1, None), node(2, None)], vec![edge(1, 2, 100.0, 100.0)]).unwrap();
        assert_eq!(g.edges()[0].travel_time_h(), 1.0);
    }

    #[test]
    fn dangling_endpoint_is_rejected() {
        let err = RoadGraph::new(vec![node(1, None)], vec![edge(1, 99, 10.0, 50.0)]).unwrap_err();
        assert!(matches!(err, NetworkError::DanglingEndpoint { index: 0, node: 99 }));
    }

    #[test]
    fn non_positive_speed_is_rejected() {
        let err = RoadGraph::new(vec![node(1, None), node(2, None)], vec![edge(1, 2, 10.0, 0.0)]).unwrap_err();
        assert!(matches!(err, NetworkError::InvalidEdge { field: "speed_kph", .. }));
    }

    #[test]
    fn parse_error_has_location() {
        let err = RoadGraph::from_json("{\"nodes\": [{\"id\": 1, \"lat\": 1.0}], \"edges\": []}").unwrap_err();
        match err {
            NetworkError::Parse { line, message, .. } => {
                assert_eq!(line, 1);
                assert!(message.contains("lon"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn isolated_nodes_are_flagged() {
        let g = RoadGraph::new(
            vec![node(1, None), node(2, None), node(7, None)],
            vec![edge(1, 2, 10.0, 50.0)],
        )
        .unwrap();
        assert_eq!(g.isolated_nodes(), vec![7]);
        assert_eq!(g.nodes().len(), 3);
    }

    #[test]
    fn triangle_two_routes() {
        let g = triangle();
        let routes = k_fastest_routes(&g, "A", "B", 2, 50.0).unwrap();
        assert_eq!(routes.len(), 2);
        assert_eq!(routes[0].node_path, vec![1, 3, 2]);
        assert!((routes[0].total_duration_h - 0.9).abs() < 1e-12);
        assert_eq!(routes[1].node_path, vec![1, 2]);
        assert!((routes[1].total_duration_h - 1.0).abs() < 1e-12);
        assert_eq!(routes[0].route_id, "A-B-1");
    }

    #[test]
    fn fewer_routes_than_requested() {
        let g = triangle();
        let routes = k_fastest_routes(&g, "A", "B", 5, 50.0).unwrap();
        assert_eq!(routes.len(), 2);
    }

    #[test]
    fn self_pair_is_degenerate_route() {
        let g = triangle();
        let routes = k_fastest_routes(&g, "A", "A", 3, 50.0).unwrap();
        assert_eq!(routes.len(), 1);
        assert_eq!(routes[0].sites.len(), 1);
        assert!(routes[0].segments.is_empty());
        assert_eq!(routes[0].total_distance_km, 0.0);
    }

    #[test]
    fn unknown_city_and_unreachable() {
        let g = RoadGraph::new(
            vec![node(1, Some("A")), node(2, Some("B")), node(3, Some("Z"))],
            vec![edge(1, 2, 10.0, 50.0)],
        )
        .unwrap();
        assert!(matches!(k_fastest_routes(&g, "A", "Q", 3, 50.0), Err(NetworkError::UnknownCity(_))));
        assert!(matches!(k_fastest_routes(&g, "A", "Z", 3, 50.0), Err(NetworkError::Unreachable { .. })));
    }

    #[test]
    fn equal_time_paths_break_ties_by_node_ids() {
        // 1-3-2 and 1-4-2 take the same time; 1-3-2 is lexicographically first
        let g = RoadGraph::new(
            vec![node(1, Some("A")), node(2, Some("B")), node(4, None), node(3, None)],
            vec![
                edge(1, 4, 50.0, 100.0),
                edge(4, 2, 50.0, 100.0),
                edge(1, 3, 50.0, 100.0),
                edge(3, 2, 50.0, 100.0),
            ],
        )
        .unwrap();
        let routes = k_fastest_routes(&g, "A", "B", 2, 50.0).unwrap();
        assert_eq!(routes[0].node_path, vec![1, 3, 2]);
        assert_eq!(routes[1].node_path, vec![1, 4, 2]);
    }

    fn line(hops: &[f64]) -> (RoadGraph, Vec<NodeId>) {
        let nodes = (0..=hops.len() as u64).map(|i| node(i, None)).collect();
        let edges = hops
            .iter()
            .enumerate()
            .map(|(i, &km)| edge(i as u64, i as u64 + 1, km, 90.0))
            .collect();
        let path = (0..=hops.len() as u64).collect();
        (RoadGraph::new(nodes, edges).unwrap(), path)
    }

    #[test]
    fn greedy_sites_short_hops() {
        let (g, path) = line(&[30.0, 30.0]);
        let (sites, segs) = place_charging_sites(&g, &path, 50.0).unwrap();
        assert_eq!(sites.iter().map(|s| s.node_id).collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(segs.len(), 1);
        assert!((segs[0].distance_km - 60.0).abs() < 1e-12);
    }

    #[test]
    fn spacing_longer_than_route() {
        let (g, path) = line(&[15.0, 25.0]);
        let (sites, segs) = place_charging_sites(&g, &path, 50.0).unwrap();
        assert_eq!(sites.len(), 2);
        assert_eq!(segs.len(), 1);
    }

    #[test]
    fn nodes_every_20_km() {
        let (g, path) = line(&[20.0; 13]);
        let (sites, segs) = place_charging_sites(&g, &path, 50.0).unwrap();
        let cum: Vec<f64> = sites.iter().map(|s| s.cum_km).collect();
        let expected = [0.0, 60.0, 120.0, 180.0, 240.0, 260.0];
        assert_eq!(cum.len(), expected.len());
        for (a, b) in cum.iter().zip(expected) {
            assert!((a - b).abs() < 1e-9, "{cum:?}");
        }
        assert_eq!(segs.len(), 5);
        for (k, s) in sites.iter().enumerate() {
            assert_eq!(s.k, k);
        }
    }

    #[test]
    fn ineligible_nodes_are_skipped() {
        let (mut g, path) = line(&[60.0, 60.0]);
        g.nodes[1].county.clear();
        let (sites, _) = place_charging_sites(&g, &path, 50.0).unwrap();
        assert_eq!(sites.iter().map(|s| s.node_id).collect::<Vec<_>>(), vec![0, 2]);
    }

    #[test]
    fn disconnected_path_is_rejected() {
        let (g, _) = line(&[10.0, 10.0]);
        assert!(matches!(
            place_charging_sites(&g, &[0, 2], 50.0),
            Err(NetworkError::DisconnectedPath { from: 0, to: 2 })
        ));
        assert!(matches!(place_charging_sites(&g, &[0, 1], 0.0), Err(NetworkError::BadSpacing(_))));
    }

    #[test]
    fn segments_obey_travel_relation() {
        let (g, path) = line(&[33.0, 41.0, 12.5, 70.0]);
        let (_, segs) = place_charging_sites(&g, &path, 50.0).unwrap();
        for s in segs {
            let rel = (s.speed_kph * s.duration_h - s.distance_km).abs() / s.distance_km;
            assert!(rel <= 1e-9);
        }
    }
}
