use crate::error::{invalid, Result};
use crate::model::CouplingGraph;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterPartition {
    /// Matched pairs in the order they were accepted.
    pub pairs: Vec<(usize, usize)>,
    /// Unmatched spins in ascending order.
    pub singles: Vec<usize>,
    partner: Vec<Option<usize>>,
}

impl ClusterPartition {
    pub fn n_spins(&self) -> usize {
        self.partner.len()
    }

    pub fn partner(&self, i: usize) -> Option<usize> {
        self.partner[i]
    }

    pub fn n_clusters(&self) -> usize {
        self.pairs.len() + self.singles.len()
    }
}

/// Greedy matching on the coupling graph: pairs are accepted in decreasing
/// `J_ij`, ties broken by the lexicographically smallest index pair.
pub fn build_clusters(graph: &CouplingGraph, max_cluster_size: usize) -> Result<ClusterPartition> {
    build_clusters_weighted(graph.len(), graph.matrix(), max_cluster_size)
}

/// Greedy matching on an arbitrary symmetric weight matrix (by magnitude).
pub fn build_clusters_weighted(n: usize, w: &[f64], max_cluster_size: usize) -> Result<ClusterPartition> {
    if !(1..=2).contains(&max_cluster_size) {
        return invalid(format!("cluster size must be 1 or 2, got {max_cluster_size}"));
    }
    if w.len() != n * n {
        return invalid("weight matrix must be n×n");
    }
    let mut partner = vec![None; n];
    let mut pairs = Vec::new();
    if max_cluster_size == 2 {
        let mut cand: Vec<(f64, usize, usize)> = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
        for i in 0..n {
            for j in i + 1..n {
                let v = w[i * n + j].abs();
                if v > 0.0 {
                    cand.push((v, i, j));
                }
            }
        }
        cand.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        for (_, i, j) in cand {
            if partner[i].is_none() && partner[j].is_none() {
                partner[i] = Some(j);
                partner[j] = Some(i);
                pairs.push((i, j));
            }
        }
    }
    let singles = (0..n).filter(|&i| partner[i].is_none()).collect();
    Ok(ClusterPartition { pairs, singles, partner })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_spins_strongest_pair_wins() {
        // J01 = 3, J12 = 2, J02 = 1
        let w = vec![0.0, 3.0, 1.0, 3.0, 0.0, 2.0, 1.0, 2.0, 0.0];
        let p = build_clusters_weighted(3, &w, 2).unwrap();
        assert_eq!(p.pairs, vec![(0, 1)]);
        assert_eq!(p.singles, vec![2]);
    }

    #[test]
    fn ties_use_lowest_index_pair() {
        let w = vec![0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0];
        let p = build_clusters_weighted(3, &w, 2).unwrap();
        assert_eq!(p.pairs, vec![(0, 1)]);
    }

    #[test]
    fn size_one_gives_singletons() {
        let w = vec![0.0, 1.0, 1.0, 0.0];
        let p = build_clusters_weighted(2, &w, 1).unwrap();
        assert!(p.pairs.is_empty());
        assert_eq!(p.singles, vec![0, 1]);
        assert!(build_clusters_weighted(2, &w, 3).is_err());
    }
}
