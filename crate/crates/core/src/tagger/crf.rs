//! Linear-chain CRF over emission scores with synthetic start and stop
//! states.

use crate::corpus::Tag;
use crate::tagger::matrix::{log_sum_exp, Matrix};

/// Transition scores as a square matrix over `num_tags + 2` states; the last
/// two states are START and STOP. `scores[(a, b)]` scores the move `a → b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transitions {
    num_tags: usize,
    scores: Matrix,
}

impl Transitions {
    pub fn zeros(num_tags: usize) -> Self {
        Transitions {
            num_tags,
            scores: Matrix::zeros(num_tags + 2, num_tags + 2),
        }
    }

    pub fn from_matrix(scores: Matrix) -> Self {
        assert_eq!(scores.rows(), scores.cols(), "transition matrix must be square");
        assert!(scores.rows() >= 2);
        Transitions {
            num_tags: scores.rows() - 2,
            scores,
        }
    }

    pub fn num_tags(&self) -> usize {
        self.num_tags
    }

    pub fn start(&self) -> usize {
        self.num_tags
    }

    pub fn stop(&self) -> usize {
        self.num_tags + 1
    }

    pub fn matrix(&self) -> &Matrix {
        &self.scores
    }

    pub fn matrix_mut(&mut self) -> &mut Matrix {
        &mut self.scores
    }

    pub fn score(&self, from: usize, to: usize) -> f64 {
        self.scores.get(from, to)
    }

    fn start_to(&self, to: usize) -> f64 {
        self.scores.get(self.start(), to)
    }

    fn to_stop(&self, from: usize) -> f64 {
        self.scores.get(from, self.stop())
    }

    /// Copy with every IOB-invalid move (`START → I-x`, `O → I-x`,
    /// `B-y → I-x` for y ≠ x, ...) scored `-∞`. `tags` maps state index to tag.
    pub fn with_iob_constraints(&self, tags: &[Tag]) -> Transitions {
        assert_eq!(tags.len(), self.num_tags);
        let mut out = self.clone();
        for (to, &next) in tags.iter().enumerate() {
            if !Tag::allows_transition(None, next) {
                out.scores.set(self.start(), to, f64::NEG_INFINITY);
            }
            for (from, &prev) in tags.iter().enumerate() {
                if !Tag::allows_transition(Some(prev), next) {
                    out.scores.set(from, to, f64::NEG_INFINITY);
                }
            }
        }
        out
    }
}

/// Unnormalized log score of one tag path.
pub fn sequence_score(emissions: &Matrix, transitions: &Transitions, tags: &[usize]) -> f64 {
    assert_eq!(tags.len(), emissions.rows(), "one tag per position");
    let Some((&first, _)) = tags.split_first() else {
        return transitions.score(transitions.start(), transitions.stop());
    };
    let mut score = transitions.start_to(first);
    for (i, &t) in tags.iter().enumerate() {
        score += emissions.get(i, t);
    }
    for pair in tags.windows(2) {
        score += transitions.score(pair[0], pair[1]);
    }
    score + transitions.to_stop(*tags.last().unwrap())
}

fn forward(emissions: &Matrix, transitions: &Transitions) -> Matrix {
    let (n, k) = (emissions.rows(), transitions.num_tags());
    let mut alpha = Matrix::zeros(n, k);
    for j in 0..k {
        alpha.set(0, j, transitions.start_to(j) + emissions.get(0, j));
    }
    for i in 1..n {
        for j in 0..k {
            let prev = alpha.row(i - 1);
            let v = log_sum_exp((0..k).map(|a| prev[a] + transitions.score(a, j)));
            alpha.set(i, j, v + emissions.get(i, j));
        }
    }
    alpha
}

fn backward(emissions: &Matrix, transitions: &Transitions) -> Matrix {
    let (n, k) = (emissions.rows(), transitions.num_tags());
    let mut beta = Matrix::zeros(n, k);
    for j in 0..k {
        beta.set(n - 1, j, transitions.to_stop(j));
    }
    for i in (0..n - 1).rev() {
        for j in 0..k {
            let next = beta.row(i + 1);
            let v = log_sum_exp((0..k).map(|b| transitions.score(j, b) + emissions.get(i + 1, b) + next[b]));
            beta.set(i, j, v);
        }
    }
    beta
}

/// Log of the sum of `exp(sequence_score)` over every tag path, by the
/// forward recursion in log space.
pub fn log_partition(emissions: &Matrix, transitions: &Transitions) -> f64 {
    assert!(emissions.rows() >= 1, "log_partition needs at least one position");
    let alpha = forward(emissions, transitions);
    let last = alpha.row(emissions.rows() - 1);
    log_sum_exp((0..transitions.num_tags()).map(|j| last[j] + transitions.to_stop(j)))
}

/// Negative log-likelihood of `gold` and its gradients with respect to the
/// emissions and the transition matrix.
pub fn nll_with_gradients(emissions: &Matrix, transitions: &Transitions, gold: &[usize]) -> (f64, Matrix, Matrix) {
    let (n, k) = (emissions.rows(), transitions.num_tags());
    assert!(n >= 1 && gold.len() == n);
    let alpha = forward(emissions, transitions);
    let beta = backward(emissions, transitions);
    let last = alpha.row(n - 1);
    let log_z = log_sum_exp((0..k).map(|j| last[j] + transitions.to_stop(j)));
    let nll = log_z - sequence_score(emissions, transitions, gold);

    let mut d_emit = Matrix::zeros(n, k);
    let mut d_trans = Matrix::zeros(k + 2, k + 2);
    let (start, stop) = (transitions.start(), transitions.stop());
    for i in 0..n {
        for j in 0..k {
            let p = (alpha.get(i, j) + beta.get(i, j) - log_z).exp();
            d_emit.set(i, j, p);
            if i == 0 {
                d_trans.set(start, j, d_trans.get(start, j) + p);
            }
            if i == n - 1 {
                d_trans.set(j, stop, d_trans.get(j, stop) + p);
            }
        }
        if i + 1 < n {
            for a in 0..k {
                for b in 0..k {
                    let p = (alpha.get(i, a) + transitions.score(a, b) + emissions.get(i + 1, b) + beta.get(i + 1, b)
                        - log_z)
                        .exp();
                    d_trans.set(a, b, d_trans.get(a, b) + p);
                }
            }
        }
    }
    for (i, &g) in gold.iter().enumerate() {
        d_emit.set(i, g, d_emit.get(i, g) - 1.0);
    }
    d_trans.set(start, gold[0], d_trans.get(start, gold[0]) - 1.0);
    d_trans.set(gold[n - 1], stop, d_trans.get(gold[n - 1], stop) - 1.0);
    for pair in gold.windows(2) {
        d_trans.set(pair[0], pair[1], d_trans.get(pair[0], pair[1]) - 1.0);
    }
    (nll, d_emit, d_trans)
}

/// Highest-scoring tag path and its score. Among equally scored paths the
/// lexicographically smallest index sequence wins.
pub fn viterbi_decode(emissions: &Matrix, transitions: &Transitions) -> (Vec<usize>, f64) {
    let (n, k) = (emissions.rows(), transitions.num_tags());
    if n == 0 {
        return (Vec::new(), transitions.score(transitions.start(), transitions.stop()));
    }
    // best[i][j]: best score of positions i..n given tag j at i, stop included.
    let mut best = Matrix::zeros(n, k);
    for j in 0..k {
        best.set(n - 1, j, emissions.get(n - 1, j) + transitions.to_stop(j));
    }
    for i in (0..n - 1).rev() {
        for j in 0..k {
            let tail = (0..k)
                .map(|b| transitions.score(j, b) + best.get(i + 1, b))
                .fold(f64::NEG_INFINITY, f64::max);
            best.set(i, j, emissions.get(i, j) + tail);
        }
    }
    // Walk forward taking the smallest index that still reaches the optimum.
    let first_argmax = |scores: &mut dyn Iterator<Item = f64>| {
        let mut arg = 0;
        let mut max = f64::NEG_INFINITY;
        for (j, s) in scores.enumerate() {
            if s > max {
                max = s;
                arg = j;
            }
        }
        (arg, max)
    };
    let (first, score) = first_argmax(&mut (0..k).map(|j| transitions.start_to(j) + best.get(0, j)));
    let mut path = vec![first];
    for i in 1..n {
        let prev = path[i - 1];
        let (next, _) = first_argmax(&mut (0..k).map(|b| transitions.score(prev, b) + best.get(i, b)));
        path.push(next);
    }
    (path, score)
}

/// Row-wise softmax of the emission scores. A per-position diagnostic only;
/// decoding uses [`viterbi_decode`].
pub fn emission_softmax(emissions: &Matrix) -> Matrix {
    let mut out = emissions.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let lse = log_sum_exp(row.iter().copied());
        for v in row.iter_mut() {
            *v = (*v - lse).exp();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut ChaCha8Rng, n: usize, k: usize) -> (Matrix, Transitions) {
        let e = Matrix::uniform(n, k, 2.0, rng);
        let t = Transitions::from_matrix(Matrix::uniform(k + 2, k + 2, 2.0, rng));
        (e, t)
    }

    fn all_paths(n: usize, k: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new()];
        for _ in 0..n {
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..k).map(move |j| {
                        let mut q = p.clone();
                        q.push(j);
                        q
                    })
                })
                .collect();
        }
        out
    }

    #[test]
    fn single_clique() {
        let e = Matrix::from_rows(&[vec![0.7, -1.2]]);
        let t = Transitions::zeros(2);
        assert_eq!(sequence_score(&e, &t, &[1]), -1.2);
        assert!((log_partition(&Matrix::zeros(1, 2), &t) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn zero_model() {
        let e = Matrix::zeros(3, 4);
        let t = Transitions::zeros(4);
        assert_eq!(sequence_score(&e, &t, &[3, 1, 2]), 0.0);
        assert_eq!(viterbi_decode(&e, &t), (vec![0, 0, 0], 0.0));
    }

    #[test]
    fn one_tag_partition_equals_path_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (e, t) = random_instance(&mut rng, 4, 1);
        let path = vec![0; 4];
        assert!((log_partition(&e, &t) - sequence_score(&e, &t, &path)).abs() < 1e-12);
    }

    #[test]
    fn hand_summed_score() {
        let e = Matrix::from_rows(&[vec![0.5, -0.25], vec![1.5, 2.0], vec![-1.0, 0.75]]);
        let mut m = Matrix::zeros(4, 4);
        // states 0,1 = tags; 2 = START; 3 = STOP
        m.set(2, 1, 0.125);
        m.set(1, 0, -0.5);
        m.set(0, 1, 0.25);
        m.set(1, 3, 1.0);
        let t = Transitions::from_matrix(m);
        let expected = 0.125 + -0.25 + -0.5 + 1.5 + 0.25 + 0.75 + 1.0;
        assert_eq!(sequence_score(&e, &t, &[1, 0, 1]), expected);
    }

    #[test]
    fn partition_and_viterbi_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let n = rng.gen_range(1..=5);
            let k = rng.gen_range(1..=4);
            let (e, t) = random_instance(&mut rng, n, k);
            let paths = all_paths(n, k);
            let scores: Vec<f64> = paths.iter().map(|p| sequence_score(&e, &t, p)).collect();
            let z = log_sum_exp(scores.iter().copied());
            assert!((log_partition(&e, &t) - z).abs() < 1e-9);
            let total: f64 = scores.iter().map(|s| (s - z).exp()).sum();
            assert!((total - 1.0).abs() < 1e-9);
            let (path, best) = viterbi_decode(&e, &t);
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!((best - max).abs() < 1e-9);
            assert!((sequence_score(&e, &t, &path) - max).abs() < 1e-9);
        }
    }

    #[test]
    fn crf_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (e, t) = random_instance(&mut rng, 4, 3);
        let gold = [2, 0, 1, 1];
        let (nll, de, dt) = nll_with_gradients(&e, &t, &gold);
        let loss = |e: &Matrix, t: &Transitions| log_partition(e, t) - sequence_score(e, t, &gold);
        assert!((nll - loss(&e, &t)).abs() < 1e-12);
        let h = 1e-5;
        for idx in 0..e.as_slice().len() {
            let (mut a, mut b) = (e.clone(), e.clone());
            a.as_mut_slice()[idx] += h;
            b.as_mut_slice()[idx] -= h;
            let fd = (loss(&a, &t) - loss(&b, &t)) / (2.0 * h);
            assert!((fd - de.as_slice()[idx]).abs() < 1e-8);
        }
        for idx in 0..t.matrix().as_slice().len() {
            let (mut a, mut b) = (t.clone(), t.clone());
            a.matrix_mut().as_mut_slice()[idx] += h;
            b.matrix_mut().as_mut_slice()[idx] -= h;
            let fd = (loss(&e, &a) - loss(&e, &b)) / (2.0 * h);
            assert!((fd - dt.as_slice()[idx]).abs() < 1e-8);
        }
    }

    #[test]
    fn constrained_decoding_is_well_formed() {
        let tags = Tag::inventory();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (e, t) = random_instance(&mut rng, 8, tags.len());
            let (path, score) = viterbi_decode(&e, &t.with_iob_constraints(&tags));
            assert!(score.is_finite());
            let mut prev = None;
            for &i in &path {
                assert!(Tag::allows_transition(prev, tags[i]));
                prev = Some(tags[i]);
            }
        }
        // Unconstrained, a huge I-x emission wins at position 0.
        let mut e = Matrix::zeros(1, tags.len());
        e.set(0, Tag::I(Label::Ope).index(), 10.0);
        let t = Transitions::zeros(tags.len());
        assert_eq!(viterbi_decode(&e, &t).0, vec![Tag::I(Label::Ope).index()]);
        assert_ne!(
            viterbi_decode(&e, &t.with_iob_constraints(&tags)).0,
            vec![Tag::I(Label::Ope).index()]
        );
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let p = emission_softmax(&Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![0.0, 0.0, 0.0]]));
        for i in 0..2 {
            assert!((p.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
        assert!((p.get(1, 0) - 1.0 / 3.0).abs() < 1e-15);
    }
}
