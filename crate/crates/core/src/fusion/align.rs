//! Minimal-edit alignment of two token sequences.

/// One column of an alignment: indices into the two sequences, `None` where
/// a sequence has a gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlignedPair {
    pub a: Option<usize>,
    pub b: Option<usize>,
}

/// A full alignment plus its Levenshtein distance (unit costs).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairAlignment {
    pub pairs: Vec<AlignedPair>,
    pub distance: usize,
}

impl PairAlignment {
    /// Count (substitutions, deletions, insertions) relative to sequence `a`.
    pub fn edit_counts<A: AsRef<str>, B: AsRef<str>>(&self, a: &[A], b: &[B]) -> (usize, usize, usize) {
        let mut subs = 0;
        let mut dels = 0;
        let mut ins = 0;
        for pair in &self.pairs {
            match (pair.a, pair.b) {
                (Some(i), Some(j)) => {
                    if a[i].as_ref() != b[j].as_ref() {
                        subs += 1;
                    }
                }
                (Some(_), None) => dels += 1,
                (None, Some(_)) => ins += 1,
                (None, None) => unreachable!("alignment never pairs two gaps"),
            }
        }
        (subs, dels, ins)
    }
}

/// Align two token sequences with unit edit costs.
///
/// Returns one of the minimal-cost alignments; when several moves tie during
/// backtrace the preference is match > substitute > delete > insert, which
/// makes the alignment (not just the distance) deterministic. Either sequence
/// may be empty, yielding pure insertions or deletions.
pub fn align_pair<A: AsRef<str>, B: AsRef<str>>(a: &[A], b: &[B]) -> PairAlignment {
    let n = a.len();
    let m = b.len();
    let mut dp = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in dp.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        dp[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = dp[i - 1][j - 1] + usize::from(a[i - 1].as_ref() != b[j - 1].as_ref());
            let del = dp[i - 1][j] + 1;
            let ins = dp[i][j - 1] + 1;
            dp[i][j] = sub.min(del).min(ins);
        }
    }

    let mut pairs = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dp[i][j];
        if i > 0 && j > 0 && a[i - 1].as_ref() == b[j - 1].as_ref() && here == dp[i - 1][j - 1] {
            pairs.push(AlignedPair { a: Some(i - 1), b: Some(j - 1) });
            i -= 1;
            j -= 1;
        } else if i > 0 && j > 0 && here == dp[i - 1][j - 1] + 1 {
            pairs.push(AlignedPair { a: Some(i - 1), b: Some(j - 1) });
            i -= 1;
            j -= 1;
        } else if i > 0 && here == dp[i - 1][j] + 1 {
            pairs.push(AlignedPair { a: Some(i - 1), b: None });
            i -= 1;
        } else {
            pairs.push(AlignedPair { a: None, b: Some(j - 1) });
            j -= 1;
        }
    }
    pairs.reverse();
    PairAlignment { pairs, distance: dp[n][m] }
}
