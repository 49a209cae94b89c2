mod common;

use proptest::prelude::*;

use mumkit_core::lexicon::{default_unknown_spelling_rules, preimages, rewrite_all};
use mumkit_core::stats::{adjusted_r2, fit_logistic, spearman, FitBounds};
use mumkit_core::{modulate, similarity, Lexicon, Strategy};

fn strategy() -> impl proptest::strategy::Strategy<Value = Strategy> {
    prop::sample::select(Strategy::ALL.to_vec())
}

proptest! {
    #[test]
    fn similarity_is_symmetric_and_bounded(a in "[a-zA-Z0-9 ]{0,12}", b in "[a-zA-Z0-9 ]{0,12}") {
        let ab = similarity(&a, &b);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, similarity(&b, &a));
        prop_assert_eq!(similarity(&a, &a), 1.0);
    }

    #[test]
    fn similarity_ignores_case(a in "[a-z]{1,10}") {
        prop_assert_eq!(similarity(&a, &a.to_uppercase()), 1.0);
    }

    #[test]
    fn spearman_is_invariant_under_monotone_transforms(ys in prop::collection::vec(0.0f64..1.0, 6)) {
        let pts: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, y)| (i as f64, *y)).collect();
        let warped: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x * 3.0 + 1.0, (5.0 * y).exp())).collect();
        let (a, b) = (spearman(&pts).unwrap(), spearman(&warped).unwrap());
        prop_assert!((a.rho - b.rho).abs() < 1e-12);
        prop_assert!((a.p_value - b.p_value).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&a.rho));
        prop_assert!(a.p_value > 0.0 && a.p_value <= 1.0);
    }

    #[test]
    fn fits_stay_in_bounds(ys in prop::collection::vec(0.0f64..=1.0, 6)) {
        let pts: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, y)| (i as f64, *y)).collect();
        let b = FitBounds::default();
        let fit = fit_logistic(&pts, b).unwrap();
        prop_assert!(fit.x0 >= b.lo && fit.x0 <= b.hi);
        prop_assert!(fit.adj_r2 <= fit.r2 + 1e-12);
        prop_assert!((fit.adj_r2 - adjusted_r2(fit.r2, 6)).abs() < 1e-12);
        for x in 0..=5 {
            let p = fit.predict(x as f64);
            prop_assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn modulation_levels_are_nested(item in 0..20usize, s in strategy(), seed in any::<u64>()) {
        let corpus = common::ranked_corpus();
        let lex = common::lexicon();
        let base = &corpus.items[item];
        let mut previous: Vec<(usize, String)> = Vec::new();
        for level in 1..=5u8 {
            let m = modulate(base, s, level, &lex, seed).unwrap();
            prop_assert_eq!(m.substitutions.len(), level as usize);
            prop_assert_eq!(m.restore(), base.text.clone());
            let mut subs: Vec<(usize, String)> =
                m.substitutions.iter().map(|x| (x.token_index, x.replacement.clone())).collect();
            subs.sort();
            for p in &previous {
                prop_assert!(subs.contains(p), "level {} lost {:?}", level, p);
            }
            for sub in &m.substitutions {
                prop_assert_eq!(&m.text[sub.offset..sub.offset + sub.replacement.len()], sub.replacement.as_str());
            }
            previous = subs;
        }
    }

    #[test]
    fn rule_rewrites_can_be_inverted(word in "[a-z]{2,8}") {
        let rules = default_unknown_spelling_rules();
        let rewritten = rewrite_all(&word, &rules);
        prop_assert!(preimages(&rewritten, &rules, 4096).contains(&word));
    }
}

#[test]
fn lexicon_round_trips_through_toml() {
    let lex = common::lexicon();
    let again = Lexicon::parse(&lex.to_toml()).unwrap();
    assert_eq!(again, lex);
    assert_eq!(again.version(), lex.version());
    for s in Strategy::ALL {
        for word in lex.section(s).words.keys() {
            assert_eq!(again.substitute(s, word, 9), lex.substitute(s, word, 9));
        }
    }
}

#[test]
fn sample_lexicon_header_matches_content() {
    let first = common::LEXICON.lines().next().unwrap();
    assert_eq!(first, format!("# version: {}", common::lexicon().version()));
}
