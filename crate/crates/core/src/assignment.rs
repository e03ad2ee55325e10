//! Mixed-radix indexing over discrete assignments.
//!
//! Tables are dense and row-major: the last variable varies fastest.

pub fn table_size(cards: &[usize]) -> usize {
    cards.iter().product()
}

pub fn strides(cards: &[usize]) -> Vec<usize> {
    let mut s = vec![1; cards.len()];
    for i in (0..cards.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * cards[i + 1];
    }
    s
}

pub fn decode(mut index: usize, cards: &[usize]) -> Vec<usize> {
    let mut out = vec![0; cards.len()];
    for i in (0..cards.len()).rev() {
        out[i] = index % cards[i];
        index /= cards[i];
    }
    out
}

pub fn encode(states: &[usize], cards: &[usize]) -> usize {
    debug_assert_eq!(states.len(), cards.len());
    states
        .iter()
        .zip(cards)
        .fold(0, |acc, (&s, &c)| acc * c + s)
}

/// Iterates all assignments of `cards` in table order.
pub fn assignments(cards: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    (0..table_size(cards)).map(move |i| decode(i, cards))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_decode_agree() {
        let cards = [3, 2, 4];
        for i in 0..table_size(&cards) {
            assert_eq!(encode(&decode(i, &cards), &cards), i);
        }
        assert_eq!(strides(&cards), vec![8, 4, 1]);
        assert_eq!(decode(5, &cards), vec![0, 1, 1]);
    }

    #[test]
    fn empty_scope_has_one_assignment() {
        assert_eq!(table_size(&[]), 1);
        assert_eq!(assignments(&[]).collect::<Vec<_>>(), vec![Vec::<usize>::new()]);
    }
}
