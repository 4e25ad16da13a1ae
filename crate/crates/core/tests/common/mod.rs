//! Independent routing oracles shared by the integration tests.

#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use hopsim::routing::harness::LossFreeNetwork;
use hopsim::routing::RoutingConfig;
use hopsim::sim::RandomStream;
use hopsim::StaId;

pub type Edge = (u32, u32, f64);

/// Connected graph on ids `1..=n` (3 <= n <= 8) with costs in `[1, 10)`.
pub fn random_graph(rng: &mut RandomStream) -> (u32, Vec<Edge>) {
    let n = 3 + rng.below(6);
    let mut edges = Vec::new();
    let mut present = BTreeSet::new();
    for i in 2..=n {
        let j = 1 + rng.below(i - 1);
        present.insert((j, i));
    }
    for a in 1..=n {
        for b in a + 1..=n {
            if rng.next_random() < 0.35 {
                present.insert((a, b));
            }
        }
    }
    for (a, b) in present {
        edges.push((a, b, 1.0 + 9.0 * rng.next_random()));
    }
    (n, edges)
}

/// All-pairs shortest path costs, indexed by id.
pub fn floyd_warshall(n: u32, edges: &[Edge]) -> Vec<Vec<f64>> {
    let n = n as usize + 1;
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for &(a, b, c) in edges {
        let (a, b) = (a as usize, b as usize);
        d[a][b] = d[a][b].min(c);
        d[b][a] = d[b][a].min(c);
    }
    for k in 1..n {
        for i in 1..n {
            for j in 1..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Route to the discovered destination: primary `(hop, metric)` and backup.
pub type OracleRoute = ((u32, f64), Option<(u32, f64)>);

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Kind {
    Request,
    Reply,
}

fn hop_delay_ns(cost: f64) -> u64 {
    (cost * 1000.0).round().max(1.0) as u64
}

fn less(a: (f64, u32), b: (f64, u32)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Message-by-message replay of one discovery round under loss-free delivery
/// (delay proportional to cost). Every STA re-broadcasts a request or reply
/// only when the copy beats the best it has seen; the destination answers
/// the first copies from its two best distinct previous hops. Returns each
/// STA's resulting route to `dest`.
pub fn flooding_oracle(edges: &[Edge], origin: u32, dest: u32) -> BTreeMap<u32, OracleRoute> {
    let mut adj: BTreeMap<u32, BTreeMap<u32, f64>> = BTreeMap::new();
    for &(a, b, c) in edges {
        adj.entry(a).or_default().insert(b, c);
        adj.entry(b).or_default().insert(a, c);
    }
    // (time, seq) -> (kind, from, to, accumulated metric)
    let mut heap: BinaryHeap<Reverse<(u64, u64)>> = BinaryHeap::new();
    let mut msgs: Vec<(Kind, u32, u32, f64)> = Vec::new();
    let send = |heap: &mut BinaryHeap<Reverse<(u64, u64)>>,
                msgs: &mut Vec<(Kind, u32, u32, f64)>,
                now: u64,
                kind: Kind,
                from: u32,
                to: u32,
                metric: f64| {
        let c = adj[&from][&to];
        let seq = msgs.len() as u64;
        msgs.push((kind, from, to, metric));
        heap.push(Reverse((now + hop_delay_ns(c), seq)));
    };

    let mut req_best: BTreeMap<u32, (f64, u32)> = BTreeMap::new();
    let mut rep_best: BTreeMap<u32, (f64, u32)> = BTreeMap::new();
    let mut reply_hops: BTreeMap<u32, f64> = BTreeMap::new();
    let mut replied: BTreeSet<u32> = BTreeSet::new();
    let mut offers: BTreeMap<u32, BTreeMap<u32, f64>> = BTreeMap::new();

    req_best.insert(origin, (0.0, origin));
    for &nb in adj[&origin].keys() {
        send(&mut heap, &mut msgs, 0, Kind::Request, origin, nb, 0.0);
    }
    while let Some(Reverse((now, seq))) = heap.pop() {
        let (kind, from, to, acc) = msgs[seq as usize];
        let metric = acc + adj[&from][&to];
        match kind {
            Kind::Request => {
                if to == origin {
                    continue;
                }
                let cand = (metric, from);
                let improved = req_best.get(&to).is_none_or(|&b| less(cand, b));
                if improved {
                    req_best.insert(to, cand);
                }
                if to == dest {
                    let slot = reply_hops.entry(from).or_insert(metric);
                    if metric < *slot {
                        *slot = metric;
                    }
                    let mut ranked: Vec<(f64, u32)> =
                        reply_hops.iter().map(|(&h, &m)| (m, h)).collect();
                    ranked.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    let top = ranked.iter().take(2).any(|&(_, h)| h == from);
                    if top && !replied.contains(&from) && replied.len() < 3 {
                        replied.insert(from);
                        send(&mut heap, &mut msgs, now, Kind::Reply, dest, from, 0.0);
                    }
                } else if improved {
                    for &nb in adj[&to].keys().filter(|&&nb| nb != from) {
                        send(&mut heap, &mut msgs, now, Kind::Request, to, nb, metric);
                    }
                }
            }
            Kind::Reply => {
                if to == dest || (to != origin && !req_best.contains_key(&to)) {
                    continue;
                }
                let per_hop = offers.entry(to).or_default();
                let slot = per_hop.entry(from).or_insert(metric);
                if metric < *slot {
                    *slot = metric;
                }
                if to == origin {
                    continue;
                }
                let cand = (metric, from);
                if rep_best.get(&to).is_none_or(|&b| less(cand, b)) {
                    rep_best.insert(to, cand);
                    for &nb in adj[&to].keys().filter(|&&nb| nb != from) {
                        send(&mut heap, &mut msgs, now, Kind::Reply, to, nb, metric);
                    }
                }
            }
        }
    }

    offers
        .into_iter()
        .map(|(sta, per_hop)| {
            let mut ranked: Vec<(f64, u32)> = per_hop.into_iter().map(|(h, m)| (m, h)).collect();
            ranked.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let primary = (ranked[0].1, ranked[0].0);
            let backup = ranked.get(1).map(|&(m, h)| (h, m));
            (sta, (primary, backup))
        })
        .collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(1.0)
}

/// Runs one discovery on `edges` and checks every route to `dest` against
/// both oracles.
pub fn check_discovery(n: u32, edges: &[Edge], origin: u32, dest: u32) -> Result<(), String> {
    let mut net = LossFreeNetwork::new(edges, RoutingConfig::default());
    net.discover(origin, dest);
    net.run_to_quiescence();
    let sp = floyd_warshall(n, edges);

    let src = net
        .router(origin)
        .entry(StaId(dest))
        .ok_or_else(|| format!("{origin} has no route to {dest}"))?;
    let best = sp[origin as usize][dest as usize];
    if !close(src.metric.value(), best) {
        return Err(format!(
            "{origin}->{dest}: metric {} but shortest path {best}",
            src.metric.value()
        ));
    }
    // the primary path from the source is a shortest path
    let mut at = origin;
    let mut steps = 0;
    while at != dest {
        let e = net
            .router(at)
            .entry(StaId(dest))
            .ok_or_else(|| format!("path from {origin} dead-ends at {at}"))?;
        let d = sp[at as usize][dest as usize];
        if !close(e.metric.value(), d) {
            return Err(format!("{at}: metric {} on primary path, shortest {d}", e.metric.value()));
        }
        at = e.next_hop.0;
        steps += 1;
        if steps > n {
            return Err(format!("loop on primary path from {origin}"));
        }
    }

    let oracle = flooding_oracle(edges, origin, dest);
    for id in 1..=n {
        if id == dest {
            continue;
        }
        let got = net.router(id).entry(StaId(dest));
        match (got, oracle.get(&id)) {
            (None, None) => {}
            (Some(e), Some(&((hop, metric), backup))) => {
                if e.next_hop.0 != hop || !close(e.metric.value(), metric) {
                    return Err(format!(
                        "{id}: primary {}/{} but oracle {hop}/{metric}",
                        e.next_hop,
                        e.metric.value()
                    ));
                }
                let got_b = e.backup().map(|(h, m)| (h.0, m.value()));
                let same = match (got_b, backup) {
                    (None, None) => true,
                    (Some((h, m)), Some((oh, om))) => h == oh && close(m, om),
                    _ => false,
                };
                if !same {
                    return Err(format!("{id}: backup {got_b:?} but oracle {backup:?}"));
                }
                // no forwarding loops from any STA
                let mut at = id;
                let mut steps = 0;
                while at != dest {
                    let Some(e) = net.router(at).entry(StaId(dest)) else {
                        return Err(format!("primary chain from {id} dead-ends at {at}"));
                    };
                    at = e.next_hop.0;
                    steps += 1;
                    if steps > n {
                        return Err(format!("primary chain from {id} loops"));
                    }
                }
            }
            (g, o) => {
                return Err(format!(
                    "{id}: route presence differs (router {}, oracle {})",
                    g.is_some(),
                    o.is_some()
                ))
            }
        }
    }
    Ok(())
}

/// Checks `count` random graphs; returns how many passed and the failures.
pub fn oracle_sweep(seed: u64, count: usize) -> (usize, Vec<String>) {
    let mut rng = RandomStream::new(seed, 7);
    let mut passed = 0;
    let mut failures = Vec::new();
    for k in 0..count {
        let (n, edges) = random_graph(&mut rng);
        let origin = 1 + rng.below(n);
        let dest = loop {
            let d = 1 + rng.below(n);
            if d != origin {
                break d;
            }
        };
        match check_discovery(n, &edges, origin, dest) {
            Ok(()) => passed += 1,
            Err(e) => failures.push(format!("graph {k} ({n} nodes, {origin}->{dest}): {e}")),
        }
    }
    (passed, failures)
}
