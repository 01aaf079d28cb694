//! Subset and permutation ranking used to encode selection outcomes as a
//! single choice integer.

/// Binomial coefficient, `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
        if acc > u128::from(u64::MAX) {
            return None;
        }
    }
    Some(acc as u64)
}

pub fn factorial(n: u64) -> Option<u64> {
    (1..=n).try_fold(1u64, |acc, i| acc.checked_mul(i))
}

/// Colexicographic rank of a strictly increasing index set.
pub fn rank_subset(sorted: &[usize]) -> u64 {
    sorted
        .iter()
        .enumerate()
        .map(|(i, &c)| binomial(c as u64, i as u64 + 1).unwrap_or(0))
        .sum()
}

/// Inverse of [`rank_subset`] for `size`-subsets of `0..n`.
pub fn unrank_subset(mut rank: u64, n: usize, size: usize) -> Vec<usize> {
    let mut out = vec![0; size];
    let mut upper = n;
    for i in (0..size).rev() {
        let mut c = upper;
        loop {
            c -= 1;
            let b = binomial(c as u64, i as u64 + 1).unwrap_or(u64::MAX);
            if b <= rank {
                rank -= b;
                break;
            }
        }
        out[i] = c;
        upper = c;
    }
    out
}

/// Lehmer rank of a permutation of `0..len`.
pub fn rank_permutation(perm: &[usize]) -> u64 {
    let n = perm.len();
    let mut rank = 0u64;
    for i in 0..n {
        let smaller = perm[i + 1..].iter().filter(|&&p| p < perm[i]).count() as u64;
        rank += smaller * factorial((n - 1 - i) as u64).unwrap_or(0);
    }
    rank
}

pub fn unrank_permutation(mut rank: u64, len: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..len).collect();
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let f = factorial((len - 1 - i) as u64).unwrap_or(1);
        let idx = (rank / f) as usize;
        rank %= f;
        out.push(pool.remove(idx));
    }
    out
}
