//! Property tests for the invariants that cut across modules.

mod common;

use std::sync::Arc;

use common::{fixture_registry, fixtures, random_corpus, random_query, registry_of};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use toolrag::agent::OutcomeStatus;
use toolrag::eval::synthetic::{generate_dataset, DatasetShape};
use toolrag::eval::{
    parse_dataset, permute_options, score, DatasetManifest, PermutationSpec, Prediction, Question, Style,
};
use toolrag::executor::dailymed::{label_request, listing_request, DAILYMED_BASE};
use toolrag::executor::openfda::{self, LabelQuery, OPENFDA_LABEL_URL};
use toolrag::executor::{ExecutionEnv, Executor, ToolExecutor};
use toolrag::http::{FixtureStore, HttpRequest, HttpResponse, OfflineTransport};
use toolrag::llm::{parse_turn, render_calls, FunctionCall, ParseMode, TurnKind};
use toolrag::retrieval::{RetrievalConfig, Retriever, DEFAULT_K};

fn bijection() -> impl Strategy<Value = PermutationSpec> {
    Just(vec![0usize, 1, 2, 3])
        .prop_shuffle()
        .prop_map(|v| PermutationSpec::new([v[0], v[1], v[2], v[3]]).unwrap())
}

fn mc_question() -> impl Strategy<Value = Question> {
    ("[a-z]{1,8}", prop::collection::vec("[a-z ]{1,12}", 4), 0usize..4).prop_map(|(id, options, gold)| Question {
        id,
        style: Style::Mc,
        question: "Which one?".into(),
        options: Some(options),
        gold: Some(["A", "B", "C", "D"][gold].into()),
    })
}

fn prediction() -> impl Strategy<Value = Prediction> {
    prop_oneof![
        prop::sample::select(vec!['A', 'B', 'C', 'D']).prop_map(Prediction::Choice),
        Just(Prediction::Unparseable),
    ]
}

fn arg_value() -> impl Strategy<Value = Value> {
    prop_oneof![
        "[ -~]{0,16}".prop_map(Value::from),
        any::<i32>().prop_map(Value::from),
        any::<bool>().prop_map(Value::from),
    ]
}

fn call() -> impl Strategy<Value = FunctionCall> {
    ("[A-Za-z_][A-Za-z0-9_]{0,20}", prop::collection::btree_map("[a-z_]{1,10}", arg_value(), 0..4)).prop_map(
        |(name, args)| FunctionCall {
            name,
            arguments: args.into_iter().collect::<Map<String, Value>>(),
        },
    )
}

proptest! {
    #[test]
    fn permute_then_inverse_is_identity(q in mc_question(), spec in bijection()) {
        let there = permute_options(&q, &spec).unwrap();
        prop_assert_eq!(permute_options(&there, &spec.inverse()).unwrap(), q);
    }

    #[test]
    fn scoring_invariant_under_coordinated_permutation(
        qs in prop::collection::vec((mc_question(), prediction()), 1..30),
        spec in bijection(),
    ) {
        let questions: Vec<Question> = qs
            .iter()
            .enumerate()
            .map(|(i, (q, _))| Question { id: format!("q{i}"), ..q.clone() })
            .collect();
        let preds: Vec<(String, Prediction)> = qs.iter().enumerate().map(|(i, (_, p))| (format!("q{i}"), p.clone())).collect();
        let permuted: Vec<Question> = questions.iter().map(|q| permute_options(q, &spec).unwrap()).collect();
        let moved: Vec<(String, Prediction)> = preds.iter().map(|(id, p)| (id.clone(), p.permute(&spec))).collect();
        let a = score(&preds, &questions).unwrap();
        let b = score(&moved, &permuted).unwrap();
        prop_assert_eq!(a.accuracy, b.accuracy);
        prop_assert_eq!(a.correct, b.correct);
    }

    #[test]
    fn fixing_a_wrong_answer_never_lowers_accuracy(
        qs in prop::collection::vec((mc_question(), prediction()), 1..30),
        pick in any::<prop::sample::Index>(),
    ) {
        let questions: Vec<Question> = qs
            .iter()
            .enumerate()
            .map(|(i, (q, _))| Question { id: format!("q{i}"), ..q.clone() })
            .collect();
        let mut preds: Vec<(String, Prediction)> = qs.iter().enumerate().map(|(i, (_, p))| (format!("q{i}"), p.clone())).collect();
        let before = score(&preds, &questions).unwrap().accuracy;
        let i = pick.index(preds.len());
        preds[i].1 = Prediction::Choice(questions[i].gold_label().unwrap());
        let after = score(&preds, &questions).unwrap().accuracy;
        prop_assert!(after >= before);
        prop_assert!((0.0..=1.0).contains(&after));
    }

    #[test]
    fn manifest_counts_match_shape(mc in 0usize..40, oemc in 0usize..40, oe in 0usize..40, seed in any::<u64>()) {
        let shape = DatasetShape { name: "prop", mc, oemc, oe, labeled: true };
        let qs = generate_dataset(&shape, seed);
        let m = DatasetManifest::of("prop", &qs);
        prop_assert_eq!(m.total, mc + oemc + oe);
        prop_assert_eq!((m.count(Style::Mc), m.count(Style::Oemc), m.count(Style::Oe)), (mc, oemc, oe));
        // a written dataset parses back to the same manifest
        let (parsed, back) = parse_dataset("prop", &serde_json::to_string(&qs).unwrap()).unwrap();
        prop_assert_eq!(parsed, m);
        prop_assert_eq!(back, qs);
    }

    #[test]
    fn request_fingerprint_ignores_query_order(
        pairs in prop::collection::btree_map("[a-z]{1,6}", "[a-zA-Z0-9 ]{0,8}", 1..6),
        rot in 0usize..6,
    ) {
        let mut list: Vec<_> = pairs.into_iter().collect();
        let encode = |l: &[(String, String)]| {
            let mut u = url::Url::parse("https://example.org/api").unwrap();
            u.query_pairs_mut().extend_pairs(l);
            HttpRequest::get(u.to_string())
        };
        let a = encode(&list);
        let n = list.len();
        list.rotate_left(rot % n);
        let b = encode(&list);
        prop_assert_eq!(a.fingerprint(), b.fingerprint());
        prop_assert_eq!(a.fingerprint().len(), 32);
    }

    #[test]
    fn call_fingerprint_ignores_argument_order(c in call()) {
        let reversed: Map<String, Value> = c.arguments.iter().rev().map(|(k, v)| (k.clone(), v.clone())).collect();
        let text = format!(
            "{{\"name\": {}, \"arguments\": {{{}}}}}",
            json!(c.name),
            reversed.iter().map(|(k, v)| format!("{}: {v}", json!(k))).collect::<Vec<_>>().join(", ")
        );
        let other: FunctionCall = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(c.fingerprint(), other.fingerprint());
    }

    #[test]
    fn rendered_calls_parse_back(calls in prop::collection::vec(call(), 1..4)) {
        let turn = parse_turn(&render_calls(&calls), ParseMode::Agent).unwrap();
        prop_assert_eq!(turn.kind, TurnKind::Calls(calls));
    }

    #[test]
    fn top_k_contract(seed in any::<u64>(), k in 1usize..70) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let docs = random_corpus(&mut rng);
        let registry = registry_of(&docs);
        let q = random_query(&mut rng);
        for backend in ["bm25", "dense-hash"] {
            let config = RetrievalConfig { backend: backend.parse().unwrap(), k, ..Default::default() };
            let r = Retriever::build(&registry, &config, None).unwrap();
            let top = r.retrieve_top_k(&q, k).unwrap();
            prop_assert_eq!(top.entries.len(), k.min(docs.len()));
            prop_assert!(top.entries.windows(2).all(|w| w[0].score > w[1].score
                || (w[0].score == w[1].score && w[0].name < w[1].name)));
            prop_assert!(top.entries.iter().all(|e| e.score.is_finite()));
            let again = Retriever::build(&registry, &config, None).unwrap().retrieve_top_k(&q, k).unwrap();
            prop_assert_eq!(top, again);
        }
        prop_assert_eq!(DEFAULT_K, 10);
        prop_assert_eq!(RetrievalConfig::default().k, 10);
    }
}

fn garbage_body() -> impl Strategy<Value = String> {
    let label = std::fs::read_to_string(fixtures().join("upstream/dailymed/2c6a9d7e-4f1b-4a3c-8e0d-91b7c5e3a6f4.xml")).unwrap();
    let listing = std::fs::read_to_string(fixtures().join("upstream/dailymed/spls_warfarin.json")).unwrap();
    let fda = std::fs::read_to_string(fixtures().join("upstream/openfda/label_warfarin.json")).unwrap();
    prop_oneof![
        "\\PC{0,200}",
        prop::sample::select(vec![label, listing, fda]).prop_flat_map(|body| {
            let n = body.len();
            (Just(body), 0..n).prop_map(|(b, cut)| {
                let mut cut = cut;
                while !b.is_char_boundary(cut) {
                    cut -= 1;
                }
                b[..cut].to_string()
            })
        }),
        Just("{\"data\": [{\"setid\": 5}]}".to_string()),
        Just("{\"results\": [{\"warnings\": {\"nested\": true}}]}".to_string()),
        Just("<document><section><title>x</title></document>".to_string()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn executor_survives_garbage_fixtures(body in garbage_body(), status in prop::sample::select(vec![200u16, 404, 500])) {
        let dir = tempfile::tempdir().unwrap();
        let store = FixtureStore::new(dir.path());
        let listing = listing_request(DAILYMED_BASE, "warfarin");
        let label = label_request(DAILYMED_BASE, "2c6a9d7e-4f1b-4a3c-8e0d-91b7c5e3a6f4");
        let any = LabelQuery { field: openfda::LabelSearchField::AnyName, value: "warfarin".into() };
        let fda = openfda::label_request(OPENFDA_LABEL_URL, &any, None);
        let contra = HttpRequest::get("https://api.fda.gov/drug/label.json?search=openfda.generic_name:%22warfarin%22&limit=1");
        let resp = HttpResponse { status, body: body.clone() };
        for req in [&listing, &fda, &contra] {
            store.save(req, &resp, 0).unwrap();
        }
        // the listing stays valid half the time so the label parser sees garbage too
        if status == 200 && body.len() % 2 == 0 {
            let good = std::fs::read_to_string(fixtures().join("upstream/dailymed/spls_warfarin.json")).unwrap();
            store.save(&listing, &HttpResponse { status: 200, body: good }, 0).unwrap();
            store.save(&label, &resp, 0).unwrap();
        }
        let transport = Arc::new(OfflineTransport::new());
        let exec = Executor::new(ExecutionEnv::fixtures_only(dir.path(), fixtures()), transport.clone());
        let registry = fixture_registry();
        for tool in ["dailymed_get_spl", "FDA_get_warnings_by_drug_name", "FDA_get_contraindications_by_drug_name"] {
            let c = FunctionCall::new(tool, json!({"drug_name": "warfarin"}));
            let valid = registry.validate_call(&c).unwrap();
            let out = exec.execute(registry.get(tool).unwrap(), &valid);
            let survived = matches!(out.status, OutcomeStatus::Ok { .. } | OutcomeStatus::ExecutionError { .. });
            prop_assert!(survived, "{:?}", out.status);
        }
        prop_assert_eq!(transport.attempts(), 0);
    }
}
