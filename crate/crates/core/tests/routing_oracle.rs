mod common;

use common::{check_discovery, flooding_oracle, floyd_warshall, oracle_sweep};

#[test]
fn hundred_random_graphs_match_oracles() {
    let (passed, failures) = oracle_sweep(2024, 100);
    assert!(failures.is_empty(), "{}", failures.join("\n"));
    assert_eq!(passed, 100);
}

#[test]
fn other_seeds_match_oracles() {
    for seed in [1, 2, 3] {
        let (_, failures) = oracle_sweep(seed, 50);
        assert!(failures.is_empty(), "seed {seed}: {}", failures.join("\n"));
    }
}

#[test]
fn oracle_reproduces_five_node_fixture() {
    let edges = [(1, 3, 4.0), (1, 2, 5.0), (2, 3, 2.0), (3, 4, 3.0), (2, 4, 3.0)];
    let routes = flooding_oracle(&edges, 1, 4);
    assert_eq!(routes[&3], ((4, 3.0), Some((2, 5.0))));
    check_discovery(4, &edges, 1, 4).unwrap();
}

#[test]
fn floyd_warshall_on_a_line() {
    let d = floyd_warshall(3, &[(1, 2, 1.5), (2, 3, 2.0)]);
    assert_eq!(d[1][3], 3.5);
    assert_eq!(d[3][1], 3.5);
    assert_eq!(d[2][2], 0.0);
}
