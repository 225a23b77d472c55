//! Small graph utilities shared by the transform and wfsa modules:
//! strongly connected components and the star-based all-pairs closure.

use crate::error::Result;
use crate::semiring::Semiring;

/// Tarjan's algorithm (iterative). Returns SCCs with sinks of the
/// condensation first: every cross-SCC edge points from a later component in
/// the returned order to an earlier one.
pub fn sccs(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
    }

    const UNSET: usize = usize::MAX;
    let mut index = vec![UNSET; n];
    let mut lowlink = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut out: Vec<Vec<usize>> = Vec::new();

    // (node, next child position)
    let mut call: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != UNSET {
            continue;
        }
        call.push((root, 0));
        index[root] = next_index;
        lowlink[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut ci)) = call.last_mut() {
            if *ci < adj[v].len() {
                let w = adj[v][*ci];
                *ci += 1;
                if index[w] == UNSET {
                    index[w] = next_index;
                    lowlink[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    lowlink[v] = lowlink[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    lowlink[parent] = lowlink[parent].min(lowlink[v]);
                }
                if lowlink[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    out.push(comp);
                }
            }
        }
    }
    out
}

/// Reflexive-transitive closure of a weighted adjacency matrix: returns
/// I ⊕ A ⊕ A² ⊕ … via the per-pivot star update (Lehmann's algorithm).
pub fn kleene_closure<W: Semiring>(mut a: Vec<Vec<W>>) -> Result<Vec<Vec<W>>> {
    let n = a.len();
    for k in 0..n {
        let s = a[k][k].star()?;
        let prev = a.clone();
        for i in 0..n {
            for j in 0..n {
                let via = prev[i][k].times(&s).times(&prev[k][j]);
                a[i][j] = prev[i][j].plus(&via);
            }
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = row[i].plus(&W::one());
    }
    Ok(a)
}
