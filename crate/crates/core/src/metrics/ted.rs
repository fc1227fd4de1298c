//! Unit-cost ordered tree edit distance (Zhang & Shasha keyroot dynamic
//! program).

use super::LabeledTree;
use crate::tree::AttributeTree;

/// Minimum number of node relabel, insert and delete operations turning `a`
/// into `b`.
pub fn ted(a: &AttributeTree, b: &AttributeTree) -> usize {
    ted_labeled(&LabeledTree::from(a), &LabeledTree::from(b))
}

/// Tree edit distance over possibly empty trees.
pub fn ted_labeled(a: &LabeledTree, b: &LabeledTree) -> usize {
    if a.is_empty() || b.is_empty() {
        return a.len() + b.len();
    }
    let pa = Postorder::new(a);
    let pb = Postorder::new(b);
    let (n, m) = (a.len(), b.len());
    let mut tree_dist = vec![vec![0usize; m + 1]; n + 1];
    let mut forest = vec![vec![0usize; m + 1]; n + 1];

    for &i in &pa.keyroots {
        for &j in &pb.keyroots {
            let (li, lj) = (pa.lld[i], pb.lld[j]);
            forest[li - 1][lj - 1] = 0;
            for di in li..=i {
                forest[di][lj - 1] = forest[di - 1][lj - 1] + 1;
            }
            for dj in lj..=j {
                forest[li - 1][dj] = forest[li - 1][dj - 1] + 1;
            }
            for di in li..=i {
                for dj in lj..=j {
                    let delete = forest[di - 1][dj] + 1;
                    let insert = forest[di][dj - 1] + 1;
                    if pa.lld[di] == li && pb.lld[dj] == lj {
                        let relabel = usize::from(pa.labels[di] != pb.labels[dj]);
                        let v = delete.min(insert).min(forest[di - 1][dj - 1] + relabel);
                        forest[di][dj] = v;
                        tree_dist[di][dj] = v;
                    } else {
                        let split = forest[pa.lld[di] - 1][pb.lld[dj] - 1] + tree_dist[di][dj];
                        forest[di][dj] = delete.min(insert).min(split);
                    }
                }
            }
        }
    }
    tree_dist[n][m]
}

/// 1-based postorder numbering with leftmost-leaf descendants and keyroots.
struct Postorder<'a> {
    labels: Vec<&'a str>,
    lld: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<'a> Postorder<'a> {
    fn new(t: &'a LabeledTree) -> Postorder<'a> {
        let n = t.len();
        let mut labels = vec![""; n + 1];
        let mut lld = vec![0; n + 1];
        let mut post_of = vec![0; n];
        let mut counter = 0;
        // iterative postorder over preorder slots
        let mut stack = vec![(0usize, false)];
        while let Some((node, expanded)) = stack.pop() {
            if expanded {
                counter += 1;
                post_of[node] = counter;
                labels[counter] = t.labels[node].as_str();
                lld[counter] = match t.children[node].first() {
                    Some(&first) => lld[post_of[first]],
                    None => counter,
                };
            } else {
                stack.push((node, true));
                for &c in t.children[node].iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        // keyroots: the highest node for each distinct leftmost leaf
        let mut keyroots: Vec<usize> = (1..=n)
            .filter(|&i| ((i + 1)..=n).all(|k| lld[k] != lld[i]))
            .collect();
        keyroots.sort_unstable();
        Postorder {
            labels,
            lld,
            keyroots,
        }
    }
}
