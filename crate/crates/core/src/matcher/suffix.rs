//! Suffix arrays by prefix doubling with radix sort, and Kasai's LCP scan.
//!
//! Each doubling round is two linear passes: the second key order is read
//! off the previous suffix array, then a stable counting sort on the first
//! key. Rounds stop once every rank is distinct, so the total cost is
//! `O(n log L)` for a longest repeat of length `L`, `O(n log n)` worst case.

/// Suffix array of `text`, whose values must lie in `0..alphabet`.
pub fn suffix_array(text: &[u32], alphabet: usize) -> Vec<u32> {
    let n = text.len();
    if n == 0 {
        return Vec::new();
    }
    let mut sa = vec![0u32; n];
    let mut rank = vec![0u32; n];
    let mut cnt = vec![0u32; alphabet.max(n) + 1];

    for &c in text {
        cnt[c as usize + 1] += 1;
    }
    for i in 1..cnt.len() {
        cnt[i] += cnt[i - 1];
    }
    for (i, &c) in text.iter().enumerate() {
        sa[cnt[c as usize] as usize] = i as u32;
        cnt[c as usize] += 1;
    }
    let mut classes = 1u32;
    rank[sa[0] as usize] = 0;
    for r in 1..n {
        if text[sa[r] as usize] != text[sa[r - 1] as usize] {
            classes += 1;
        }
        rank[sa[r] as usize] = classes - 1;
    }

    let mut second = vec![0u32; n];
    let mut next_rank = vec![0u32; n];
    let mut h = 1usize;
    while (classes as usize) < n {
        // order by second key: suffixes without a second half come first
        let mut p = 0;
        for i in n.saturating_sub(h)..n {
            second[p] = i as u32;
            p += 1;
        }
        for &s in sa.iter() {
            if s as usize >= h {
                second[p] = s - h as u32;
                p += 1;
            }
        }
        // stable counting sort by first key
        let c = &mut cnt[..classes as usize + 1];
        c.iter_mut().for_each(|x| *x = 0);
        for &r in rank.iter() {
            c[r as usize + 1] += 1;
        }
        for i in 1..c.len() {
            c[i] += c[i - 1];
        }
        for &s in second.iter() {
            let r = rank[s as usize] as usize;
            sa[c[r] as usize] = s;
            c[r] += 1;
        }
        let key2 = |i: usize| -> i64 {
            if i + h < n {
                rank[i + h] as i64
            } else {
                -1
            }
        };
        classes = 1;
        next_rank[sa[0] as usize] = 0;
        for r in 1..n {
            let (a, b) = (sa[r - 1] as usize, sa[r] as usize);
            if rank[a] != rank[b] || key2(a) != key2(b) {
                classes += 1;
            }
            next_rank[b] = classes - 1;
        }
        std::mem::swap(&mut rank, &mut next_rank);
        h *= 2;
    }
    sa
}

/// `lcp[r]` is the longest common prefix of suffixes `sa[r-1]` and `sa[r]`;
/// `lcp[0] = 0`.
pub fn lcp_array(text: &[u32], sa: &[u32]) -> Vec<u32> {
    let n = text.len();
    let mut rank = vec![0u32; n];
    for (r, &s) in sa.iter().enumerate() {
        rank[s as usize] = r as u32;
    }
    let mut lcp = vec![0u32; n];
    let mut h = 0usize;
    for i in 0..n {
        let r = rank[i] as usize;
        if r == 0 {
            h = 0;
            continue;
        }
        let j = sa[r - 1] as usize;
        while i + h < n && j + h < n && text[i + h] == text[j + h] {
            h += 1;
        }
        lcp[r] = h as u32;
        h = h.saturating_sub(1);
    }
    lcp
}
