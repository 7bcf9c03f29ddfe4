use crate::network::Graph;

/// Synchronous neighbor-max flooding for `rounds` rounds.
pub fn max_consensus(values: &[f64], graph: &Graph, rounds: usize) -> Vec<f64> {
    assert_eq!(values.len(), graph.nodes(), "one value per agent");
    let mut current = values.to_vec();
    let mut next = current.clone();
    for _ in 0..rounds {
        for (i, slot) in next.iter_mut().enumerate() {
            *slot = graph.neighbors(i).iter().fold(current[i], |acc, &j| acc.max(current[j]));
        }
        if next == current {
            break;
        }
        std::mem::swap(&mut current, &mut next);
    }
    current
}
