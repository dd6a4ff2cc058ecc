use hgtok::binary::{
    read_checkpoint, read_embeddings, read_tokens, write_checkpoint, write_embeddings, write_tokens,
};
use hgtok::config::RunConfig;
use hgtok::records::{read_jsonl, write_jsonl, DialogueRecord, PairRecord};
use hgtok::{hgjl, Error};
use hgtok_core::diag::{gen_pair, DiagConfig};
use hgtok_core::hip::{HipConfig, HipParams};
use hgtok_core::real::Mat;
use hgtok_core::{HyperedgeId, Hypergraph, VertexId};
use proptest::prelude::*;

fn labeled_hypergraph() -> impl Strategy<Value = Hypergraph> {
    (1usize..=12).prop_flat_map(|n| {
        let edges = prop::collection::vec(prop::collection::btree_set(1..=n as u32, 1..=n.min(5)), 0..=8);
        let vlabels = prop::collection::vec(prop::option::of(0u32..4), n);
        let texts = prop::collection::vec(prop::option::of("[a-z \"\\\\é]{0,8}"), n);
        (edges, vlabels, texts).prop_map(move |(es, labels, texts)| {
            let ne = es.len();
            let mut h =
                Hypergraph::new(1..=n as u32, es.into_iter().enumerate().map(|(i, m)| (2 * i as u32 + 1, m))).unwrap();
            for (i, (l, t)) in labels.into_iter().zip(texts).enumerate() {
                let v = VertexId(i as u32 + 1);
                if let Some(l) = l {
                    h.set_vertex_label(v, l).unwrap();
                }
                if let Some(t) = t {
                    h.set_vertex_text(v, t).unwrap();
                }
            }
            for i in 0..ne {
                if i % 2 == 0 {
                    h.set_hyperedge_label(HyperedgeId(2 * i as u32 + 1), i as u32 % 3).unwrap();
                }
            }
            h
        })
    })
}

proptest! {
    #[test]
    fn hgjl_round_trip(h in labeled_hypergraph()) {
        let text = hgjl::write(&h);
        let back = hgjl::read(&text).unwrap();
        prop_assert_eq!(&back, &h);
        prop_assert_eq!(hgjl::write(&back), text);
        prop_assert_eq!(hgjl::from_values(&hgjl::to_values(&h)).unwrap(), h);
    }

    #[test]
    fn token_matrix_round_trip_is_bit_exact(rows in 0usize..6, cols in 1usize..6, seed in any::<u32>()) {
        let data: Vec<f32> = (0..rows * cols).map(|i| f32::from_bits(seed.wrapping_mul(2654435761).wrapping_add(i as u32) & 0x7f7f_ffff)).collect();
        let m = Mat::from_vec(rows, cols, data);
        let bytes = write_tokens(&m).unwrap();
        prop_assert_eq!(bytes.len(), 6 + 8 + 4 * rows * cols);
        let back = read_tokens(&bytes).unwrap();
        prop_assert_eq!(back.rows, rows);
        let bits = |m: &Mat<f32>| m.data.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&m));
    }
}

#[test]
fn hgjl_canonical_layout() {
    let h = Hypergraph::new(1..=3, [(1, vec![1, 2]), (4, vec![2, 3])]).unwrap();
    let text = hgjl::write(&h);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], r#"{"format":"HGJL1","num_vertices":3,"num_hyperedges":2,"num_classes":0}"#);
    assert_eq!(lines[1], r#"{"type":"v","id":1}"#);
    assert_eq!(lines[5], r#"{"type":"e","id":4,"members":[2,3]}"#);
}

#[test]
fn hgjl_errors() {
    let header = r#"{"format":"HGJL1","num_vertices":2,"num_hyperedges":1,"num_classes":0}"#;
    let ok = format!("{header}\n{{\"type\":\"v\",\"id\":1}}\n{{\"type\":\"v\",\"id\":2}}\n{{\"type\":\"e\",\"id\":1,\"members\":[1,2]}}\n");
    hgjl::read(&ok).unwrap();

    let dangling = ok.replace("[1,2]", "[1,7]");
    assert!(matches!(hgjl::read(&dangling), Err(Error::DanglingMember { hyperedge: 1, vertex: 7 })));
    let broken = ok.replace(r#""id":2}"#, r#""id":2"#);
    assert!(matches!(hgjl::read(&broken), Err(Error::Malformed { line: 3, .. })));
    let unknown_type = ok.replace(r#""type":"v","id":2"#, r#""type":"x","id":2"#);
    assert!(matches!(hgjl::read(&unknown_type), Err(Error::Malformed { line: 3, .. })));
    let miscount = ok.replace(r#""num_vertices":2"#, r#""num_vertices":3"#);
    assert!(matches!(hgjl::read(&miscount), Err(Error::ManifestMismatch(_))));
    let dup = ok.replace(r#""id":2}"#, r#""id":1}"#);
    assert!(matches!(hgjl::read(&dup), Err(Error::Malformed { .. })));
    let repeated = ok.replace("[1,2]", "[1,1]");
    assert!(matches!(hgjl::read(&repeated), Err(Error::Malformed { .. })));
    assert!(matches!(hgjl::read(""), Err(Error::Malformed { .. })));
    assert!(matches!(hgjl::read(&ok.replace("HGJL1", "HGJL2")), Err(Error::Malformed { line: 1, .. })));
}

#[test]
fn embedding_table_round_trip() {
    let rows = vec![vec![0.0f32, 1.5], vec![-2.0, f32::MIN_POSITIVE], vec![3.25, -0.0]];
    let bytes = write_embeddings(&rows).unwrap();
    assert_eq!(&bytes[..6], b"HGEMB1");
    assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 3);
    assert_eq!(u32::from_le_bytes(bytes[10..14].try_into().unwrap()), 2);
    assert_eq!(read_embeddings(&bytes).unwrap(), rows);
    assert!(write_embeddings(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    assert!(read_embeddings(&bytes[..bytes.len() - 1]).is_err());
}

#[test]
fn checkpoint_round_trip_and_shape_validation() {
    let cfg = HipConfig { d_core: 6, d_sidecar: 2, ..HipConfig::new(4, 5, 3, 2) };
    let p = HipParams::<f32>::init(cfg, 9);
    let bytes = write_checkpoint(&p).unwrap();
    assert_eq!(bytes.len(), 6 + 7 * 4 + 4 * p.num_params());
    let back = read_checkpoint(&bytes).unwrap();
    assert_eq!(back.config, cfg);
    assert_eq!(back.to_le_bytes(), p.to_le_bytes());

    // One parameter short, one extra, and a config whose shapes disagree.
    assert!(matches!(read_checkpoint(&bytes[..bytes.len() - 4]), Err(Error::Format { .. })));
    let mut long = bytes.clone();
    long.extend_from_slice(&[0; 4]);
    assert!(matches!(read_checkpoint(&long), Err(Error::Format { .. })));
    let mut wrong = bytes.clone();
    wrong[6..10].copy_from_slice(&5u32.to_le_bytes());
    assert!(matches!(read_checkpoint(&wrong), Err(Error::Format { .. })));
    let mut zero = bytes;
    zero[6..10].copy_from_slice(&0u32.to_le_bytes());
    assert!(matches!(read_checkpoint(&zero), Err(Error::Format { .. })));
    assert!(matches!(read_checkpoint(b"HIPCK2"), Err(Error::Format { .. })));
}

#[test]
fn token_header_layout() {
    let m = Mat::from_vec(2, 3, vec![1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0]);
    let b = write_tokens(&m).unwrap();
    assert_eq!(&b[..6], b"HGTOK1");
    assert_eq!(u32::from_le_bytes(b[6..10].try_into().unwrap()), 2);
    assert_eq!(u32::from_le_bytes(b[10..14].try_into().unwrap()), 3);
    assert_eq!(f32::from_le_bytes(b[14..18].try_into().unwrap()), 1.0);
    assert!(read_tokens(&b[..17]).is_err());
}

#[test]
fn config_parsing() {
    let c = RunConfig::parse(
        "# comment\nlr = 0.001\nlambda_ord=0.5\nlambda_rel = 0\nepochs = 3\nbatch = 8\nseed = 7\n\
         budgets = 3, 2\norder_bounds = 2,3\nmax_grad_norm = 0\npreset = adversarial-d50\n",
    )
    .unwrap();
    assert_eq!((c.train.lr, c.train.lambda_ord, c.train.lambda_rel), (0.001, 0.5, 0.0));
    assert_eq!((c.train.epochs, c.train.batch, c.seed), (3, 8, 7));
    assert_eq!(c.template.layer_budgets, vec![3, 2]);
    assert_eq!(c.template.buckets.order.len(), 3);
    assert_eq!(c.train.max_grad_norm, None);
    assert_eq!(c.diag.decoys_per_pattern, DiagConfig::adversarial_d50().decoys_per_pattern);

    let seeded = c.clone().with_seed(Some(11));
    assert_eq!((seeded.seed, seeded.train.seed), (11, 11));
    assert_eq!(c.clone().with_seed(None).train.seed, 7);

    for bad in ["nope = 1", "lr = fast", "lr 0.1", "budgets = 0,2", "batch = 0", "order_bounds = 4,2", "preset = x"] {
        let e = RunConfig::parse(bad).unwrap_err();
        assert_eq!(e.exit_code(), 2, "{bad}: {e}");
    }
}

#[test]
fn pair_records_round_trip() {
    let cfg = DiagConfig { train_pairs: 1, test_pairs: 1, ..DiagConfig::adversarial_d50() };
    let pair = gen_pair(&cfg, 3).unwrap();
    let text = write_jsonl([PairRecord::new("test", &pair)]);
    assert_eq!(text.lines().count(), 1);
    let back: Vec<PairRecord> = read_jsonl(&text).unwrap();
    assert_eq!(back[0].to_pair().unwrap(), pair);
}

#[test]
fn dialogue_record_field_names() {
    let r = DialogueRecord {
        prompt: "a <hypergraph> b".into(),
        hg_region_index: 2,
        answer: "c0".into(),
        l_h: 18,
        tokens: "t.hgtok".into(),
    };
    let line = serde_json::to_string(&r).unwrap();
    assert_eq!(line, r#"{"prompt":"a <hypergraph> b","hg_region_index":2,"answer":"c0","L_H":18,"tokens":"t.hgtok"}"#);
    assert!(read_jsonl::<DialogueRecord>("{\"prompt\":1}\n").is_err());
}
