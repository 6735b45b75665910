//! Variant subsampling: each expression with `n` valid locations yields up to
//! `n` distinct variants, drawn uniformly from the non-empty subsets of its
//! locations.

use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;

use crate::frontend::{ExprTree, Token};

use super::edit::{apply_checked, Location};

/// Up to this many locations, every subset is enumerated.
pub const ENUMERATION_LIMIT: usize = 10;
const ATTEMPTS_PER_LOCATION: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variant {
    /// Indices into the valid-location list, ascending.
    pub locations: Vec<usize>,
    pub text: String,
}

fn subset(mask: u64, n: usize) -> Vec<usize> {
    (0..n).filter(|i| mask >> i & 1 == 1).collect()
}

/// Locations that are individually applicable.
pub fn valid_locations(tree: &ExprTree, tokens: &[Token], candidates: Vec<Location>, before: Option<&Token>, after: Option<&Token>) -> Vec<Location> {
    candidates.into_iter().filter(|l| apply_checked(tree, tokens, &[l], before, after).is_some()).collect()
}

pub fn sample_variants<R: Rng>(tree: &ExprTree, tokens: &[Token], valid: &[Location], before: Option<&Token>, after: Option<&Token>, rng: &mut R) -> Vec<Variant> {
    let n = valid.len().min(64);
    if n == 0 {
        return Vec::new();
    }
    let build = |mask: u64| -> Option<Variant> {
        let locations = subset(mask, n);
        let locs: Vec<&Location> = locations.iter().map(|&i| &valid[i]).collect();
        apply_checked(tree, tokens, &locs, before, after).map(|text| Variant { locations, text })
    };
    let mut seen = HashSet::new();
    if n <= ENUMERATION_LIMIT {
        let all: Vec<Variant> = (1u64..1 << n).filter_map(build).filter(|v| seen.insert(v.text.clone())).collect();
        let take = n.min(all.len());
        let mut picked = index::sample(rng, all.len(), take).into_vec();
        picked.sort_unstable();
        return picked.into_iter().map(|i| all[i].clone()).collect();
    }
    let mut tried = HashSet::new();
    let mut out = Vec::new();
    for _ in 0..ATTEMPTS_PER_LOCATION * n {
        if out.len() == n {
            break;
        }
        let mask = rng.random::<u64>() & (u64::MAX >> (64 - n));
        if mask == 0 || !tried.insert(mask) {
            continue;
        }
        if let Some(v) = build(mask) {
            if seen.insert(v.text.clone()) {
                out.push(v);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_str;
    use crate::seed::rng_for;

    #[test]
    fn one_location_gives_one_variant() {
        let (tokens, tree) = parse_str("a + b").unwrap();
        let locs = vec![Location::Swap { node: tree.root, pos: 0 }];
        let v = sample_variants(&tree, &tokens, &locs, None, None, &mut rng_for(1, "t", 0));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].text, "b + a");
    }

    #[test]
    fn bounded_by_location_count_and_deterministic() {
        let (tokens, tree) = parse_str("a * b + c * d + e * f").unwrap();
        let locs: Vec<Location> = crate::transforms::sites::paren_add_locations(&tree);
        assert_eq!(locs.len(), 3);
        let a = sample_variants(&tree, &tokens, &locs, None, None, &mut rng_for(9, "t", 0));
        let b = sample_variants(&tree, &tokens, &locs, None, None, &mut rng_for(9, "t", 0));
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        let texts: HashSet<_> = a.iter().map(|v| v.text.clone()).collect();
        assert_eq!(texts.len(), 3);
    }

    #[test]
    fn identical_texts_are_not_variants() {
        let (tokens, tree) = parse_str("a + a").unwrap();
        let locs = vec![Location::Swap { node: tree.root, pos: 0 }];
        assert!(sample_variants(&tree, &tokens, &locs, None, None, &mut rng_for(1, "t", 0)).is_empty());
    }
}
