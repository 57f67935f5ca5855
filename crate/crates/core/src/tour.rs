//! Eulerian tours of block graphs: short words containing every admissible
//! `k`-block.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::error::{Error, Result};
use crate::shift::{SftSpace, Word};

/// A closed walk through every edge of the `d`-block graph, `d = max(k, 2)`,
/// read off as a word. Contains every admissible `k`-block as a subword.
///
/// Nodes are `(d-1)`-blocks and edges `d`-blocks. Unbalanced nodes are fixed
/// by repeating shortest paths, then Hierholzer's algorithm runs from the
/// smallest node taking edges in symbol order.
pub fn tour(space: &SftSpace, k: usize) -> Result<Word> {
    if !space.is_primitive() {
        return Err(Error::NotPrimitive);
    }
    let d = k.max(2);
    let nodes = space.admissible_words(d - 1);
    let index: HashMap<&[u8], usize> = nodes.iter().enumerate().map(|(i, w)| (&w.0[..], i)).collect();
    let m = space.alphabet_size() as u8;
    // adjacency in symbol order: (next node, appended symbol)
    let adj: Vec<Vec<(usize, u8)>> = nodes
        .iter()
        .map(|w| {
            (0..m)
                .filter(|s| space.allowed(*w.0.last().unwrap(), *s))
                .map(|s| {
                    let mut next = w.0[1..].to_vec();
                    next.push(s);
                    (index[&next[..]], s)
                })
                .collect()
        })
        .collect();

    let mut multi: Vec<Vec<(usize, u8)>> = adj.clone();
    let mut balance: Vec<i64> = vec![0; nodes.len()];
    for (u, out) in adj.iter().enumerate() {
        for (v, _) in out {
            balance[u] += 1;
            balance[*v] -= 1;
        }
    }
    // nodes with more in- than out-edges need extra paths leaving them
    loop {
        let Some(src) = balance.iter().position(|b| *b < 0) else { break };
        let path = shortest_path(&adj, src, |v| balance[v] > 0)
            .ok_or(Error::NotPrimitive)?;
        for w in path.windows(2) {
            let s = adj[w[0]].iter().find(|(v, _)| *v == w[1]).unwrap().1;
            multi[w[0]].push((w[1], s));
        }
        balance[src] += 1;
        balance[*path.last().unwrap()] -= 1;
    }
    for out in &mut multi {
        out.sort_by_key(|(_, s)| *s);
    }

    let circuit = hierholzer(&multi, 0);
    let mut word = nodes[0].0.clone();
    word.extend(circuit.iter().map(|(_, s)| *s));
    Ok(Word(word))
}

fn shortest_path(adj: &[Vec<(usize, u8)>], src: usize, target: impl Fn(usize) -> bool) -> Option<Vec<usize>> {
    let mut prev = vec![usize::MAX; adj.len()];
    let mut queue = VecDeque::from([src]);
    prev[src] = src;
    while let Some(u) = queue.pop_front() {
        if u != src && target(u) {
            let mut path = vec![u];
            let mut cur = u;
            while cur != src {
                cur = prev[cur];
                path.push(cur);
            }
            path.reverse();
            return Some(path);
        }
        for (v, _) in &adj[u] {
            if prev[*v] == usize::MAX {
                prev[*v] = u;
                queue.push_back(*v);
            }
        }
    }
    None
}

/// Edges of an Eulerian circuit from `start`, as (head, symbol) pairs.
fn hierholzer(adj: &[Vec<(usize, u8)>], start: usize) -> Vec<(usize, u8)> {
    let mut next = vec![0usize; adj.len()];
    let mut stack: Vec<(usize, Option<(usize, u8)>)> = vec![(start, None)];
    let mut circuit = Vec::new();
    while let Some(&(u, _)) = stack.last() {
        if next[u] < adj[u].len() {
            let e = adj[u][next[u]];
            next[u] += 1;
            stack.push((e.0, Some(e)));
        } else {
            let (_, e) = stack.pop().unwrap();
            if let Some(e) = e {
                circuit.push(e);
            }
        }
    }
    circuit.reverse();
    circuit
}

/// Whether `w` contains every admissible `k`-block.
pub fn covers(space: &SftSpace, w: &Word, k: usize) -> bool {
    let seen: HashSet<&[u8]> = w.0.windows(k).collect();
    space.admissible_words(k).iter().all(|b| seen.contains(&b.0[..]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn full_two_shift_lengths() {
        let full = SftSpace::full(2);
        assert_eq!(tour(&full, 1).unwrap(), Word::from("00110"));
        assert_eq!(tour(&full, 2).unwrap().len(), 5);
        assert_eq!(tour(&full, 3).unwrap().len(), 10);
        assert_eq!(tour(&full, 4).unwrap().len(), 19);
    }

    #[test]
    fn depth_two_contains_all_pairs() {
        let full = SftSpace::full(2);
        let t = tour(&full, 2).unwrap();
        for b in ["00", "01", "10", "11"] {
            assert!(t.0.windows(2).any(|w| w == Word::from(b).0.as_slice()), "{b}");
        }
    }

    #[test]
    fn golden_mean_tour() {
        let gm = SftSpace::golden_mean();
        for k in 1..=5 {
            let t = tour(&gm, k).unwrap();
            assert!(gm.is_admissible(&t.0));
            assert!(covers(&gm, &t, k));
        }
    }

    #[test]
    fn non_primitive_rejected() {
        let swap = SftSpace::from_matrix(&[&[0, 1], &[1, 0]]).unwrap();
        assert!(tour(&swap, 2).is_err());
    }

    fn random_primitive(seed: u64) -> SftSpace {
        use rand::Rng;
        let mut rng = crate::rng::rng(seed);
        loop {
            let m = rng.gen_range(2..=4);
            let t: Vec<Vec<bool>> = (0..m).map(|_| (0..m).map(|_| rng.gen_bool(0.6)).collect()).collect();
            if let Ok(s) = SftSpace::new(t) {
                if s.is_primitive() {
                    return s;
                }
            }
        }
    }

    proptest! {
        #[test]
        fn tours_cover_and_are_admissible(seed in 0u64..200, k in 1usize..4) {
            let space = random_primitive(seed);
            let t = tour(&space, k).unwrap();
            prop_assert!(space.is_admissible(&t.0));
            prop_assert!(covers(&space, &t, k));
            prop_assert!(covers(&space, &t, k.max(2)));
        }

        #[test]
        fn full_shift_tour_is_de_bruijn(m in 2usize..4, k in 2usize..5) {
            let t = tour(&SftSpace::full(m), k).unwrap();
            prop_assert_eq!(t.len(), m.pow(k as u32) + k - 1);
        }
    }
}
