//! Surface-overlap metrics reported next to the phenomenon scores.
//!
//! Both metrics share one tokenizer: text is lowercased and split on every
//! non-alphanumeric character, keeping digits. `"Temps 10.5F, near-record"`
//! tokenizes to `["temps", "10", "5f", "near", "record"]`.

use std::collections::HashMap;

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn f_measure(overlap: usize, pred_len: usize, ref_len: usize) -> f64 {
    if overlap == 0 || pred_len == 0 || ref_len == 0 {
        return 0.0;
    }
    let p = overlap as f64 / pred_len as f64;
    let r = overlap as f64 / ref_len as f64;
    2.0 * p * r / (p + r)
}

/// Length of the longest common subsequence of two token lists.
///
/// Bit-parallel over the shorter list (Crochemore et al.): one bit per
/// position, one multi-word add per token of the longer list.
pub fn lcs_len<T: AsRef<str>>(a: &[T], b: &[T]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let m = short.len();
    if m == 0 {
        return 0;
    }
    let words = m.div_ceil(64);

    let mut masks: HashMap<&str, Vec<u64>> = HashMap::new();
    for (i, tok) in short.iter().enumerate() {
        masks
            .entry(tok.as_ref())
            .or_insert_with(|| vec![0; words])[i / 64] |= 1 << (i % 64);
    }

    let mut v = vec![u64::MAX; words];
    for tok in long {
        let Some(mask) = masks.get(tok.as_ref()) else {
            continue;
        };
        // v = (v + u) | (v - u) with u = v & mask; u is a subset of v, so
        // v - u is v & !u and only the addition carries.
        let mut carry = 0u64;
        for w in 0..words {
            let u = v[w] & mask[w];
            let (s1, c1) = v[w].overflowing_add(u);
            let (s2, c2) = s1.overflowing_add(carry);
            carry = u64::from(c1 || c2);
            v[w] = s2 | (v[w] & !u);
        }
    }

    let full = m / 64;
    let mut zeros: usize = v[..full].iter().map(|w| w.count_zeros() as usize).sum();
    if m % 64 != 0 {
        let live = (1u64 << (m % 64)) - 1;
        zeros += (!v[full] & live).count_ones() as usize;
    }
    zeros
}

/// ROUGE-L F-measure; zero when either side is empty.
pub fn rouge_l<T: AsRef<str>>(pred: &[T], reference: &[T]) -> f64 {
    f_measure(lcs_len(pred, reference), pred.len(), reference.len())
}

/// Multiset-overlap token F1; zero when either side is empty.
pub fn token_f1<T: AsRef<str>>(pred: &[T], reference: &[T]) -> f64 {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in reference {
        *counts.entry(t.as_ref()).or_default() += 1;
    }
    let mut overlap = 0;
    for t in pred {
        if let Some(c) = counts.get_mut(t.as_ref()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    f_measure(overlap, pred.len(), reference.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn tokenizer() {
        assert_eq!(
            tokenize("Temps 10.5F, near-record"),
            ["temps", "10", "5f", "near", "record"]
        );
        assert!(tokenize(" ... ").is_empty());
    }

    #[test]
    fn rouge_examples() {
        let a = toks("the cat sat");
        assert_eq!(rouge_l(&a, &a), 1.0);
        assert!((rouge_l(&a, &toks("the dog sat")) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(rouge_l(&a, &toks("a dog ran")), 0.0);
        assert_eq!(rouge_l(&a, &toks("")), 0.0);
    }

    #[test]
    fn f1_examples() {
        let a = toks("a a b");
        assert_eq!(token_f1(&a, &a), 1.0);
        assert!((token_f1(&a, &toks("a b b")) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(token_f1(&a, &toks("c d")), 0.0);
        assert_eq!(token_f1::<String>(&[], &[]), 0.0);
    }

    #[test]
    fn lcs_across_word_boundary() {
        let a: Vec<String> = (0..150).map(|i| format!("t{}", i % 7)).collect();
        let b: Vec<String> = (0..90).map(|i| format!("t{}", (i * 3) % 7)).collect();
        let dp = {
            let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
            for i in 1..=a.len() {
                for j in 1..=b.len() {
                    t[i][j] = if a[i - 1] == b[j - 1] {
                        t[i - 1][j - 1] + 1
                    } else {
                        t[i - 1][j].max(t[i][j - 1])
                    };
                }
            }
            t[a.len()][b.len()]
        };
        assert_eq!(lcs_len(&a, &b), dp);
    }
}
