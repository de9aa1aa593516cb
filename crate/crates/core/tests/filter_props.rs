use proptest::prelude::*;
use sitebench_core::filter::{classify_hosts, parse_filter_list};
use url::Url;

fn host() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(vec!["ads", "cdn", "t", "x-1", "tracker"]), 1..3)
        .prop_flat_map(|labels| {
            prop::sample::select(vec!["example", "test", "net"])
                .prop_map(move |tld| format!("{}.{tld}", labels.join(".")))
        })
}

fn url() -> impl Strategy<Value = Url> {
    (
        prop::sample::select(vec!["http", "https"]),
        host(),
        prop::collection::vec(prop::sample::select(vec!["ad", "banner", "a.js", "Ad", "p"]), 0..3),
    )
        .prop_map(|(scheme, host, path)| {
            Url::parse(&format!("{scheme}://{host}/{}", path.join("/"))).unwrap()
        })
}

fn rule_line() -> impl Strategy<Value = String> {
    (
        any::<bool>(),
        prop::sample::select(vec!["", "|", "||"]),
        prop::collection::vec(
            prop::sample::select(vec!["ads", "t.", "example", "tracker.test", "/ad", "banner", "*", "^", ".js", "net/"]),
            1..4,
        ),
    )
        .prop_map(|(exception, anchor, parts)| {
            format!("{}{anchor}{}", if exception { "@@" } else { "" }, parts.concat())
        })
}

proptest! {
    #[test]
    fn index_is_sound(lines in prop::collection::vec(rule_line(), 0..8), urls in prop::collection::vec(url(), 1..6)) {
        let fs = parse_filter_list(&lines.join("\n")).filters;
        for u in &urls {
            prop_assert_eq!(fs.matches_url(u), fs.matches_linear(u), "{}", u);
        }
    }

    #[test]
    fn domain_rules_are_reachable_through_the_index(lines in prop::collection::vec(rule_line(), 0..8)) {
        let fs = parse_filter_list(&lines.join("\n")).filters;
        for (i, rule) in fs.rules().iter().enumerate() {
            if let Some(h) = rule.anchor_host() {
                prop_assert!(fs.indexed_under(&h).contains(&i));
            }
        }
    }

    #[test]
    fn exceptions_dominate(lines in prop::collection::vec(rule_line(), 0..6), u in url()) {
        let fs = parse_filter_list(&lines.join("\n")).filters;
        let excepted = fs.rules().iter().filter(|r| r.is_exception()).any(|r| {
            let only = sitebench_core::FilterSet::from_rules(vec![{
                let mut block = parse_filter_list(r.raw.trim_start_matches("@@")).filters.rules()[0].clone();
                block.source_line = r.source_line;
                block
            }]);
            only.matches_url(&u)
        });
        if excepted {
            prop_assert!(!fs.matches_url(&u));
        }
    }

    #[test]
    fn raw_text_round_trips(lines in prop::collection::vec(rule_line(), 1..8)) {
        for rule in parse_filter_list(&lines.join("\n")).filters.rules() {
            prop_assert_eq!(rule.to_rule_text(), rule.raw.clone());
        }
    }

    #[test]
    fn classification_ignores_request_order(lines in prop::collection::vec(rule_line(), 0..6), mut urls in prop::collection::vec(url(), 0..8)) {
        let fs = parse_filter_list(&lines.join("\n")).filters;
        let forward = classify_hosts(&fs, &urls);
        urls.reverse();
        prop_assert_eq!(classify_hosts(&fs, &urls), forward);
    }
}
