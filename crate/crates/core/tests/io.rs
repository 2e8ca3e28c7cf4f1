//! Embedding and score file round-trips.

use std::io::Cursor;

use uroc::data::{
    read_attribute_csv, read_embeddings_binary, read_embeddings_csv, read_score_csv,
    save_embeddings, write_attribute_csv, write_embeddings_binary, write_embeddings_csv,
    write_score_csv,
};
use uroc::synthetic::ImageCount;
use uroc::{
    build_score_cache, cosine_similarity, generate_dataset, load_embeddings, EmbeddingFormat,
    Error, ImpostorPolicy, SynthConfig,
};

fn dataset() -> uroc::EmbeddingDataset {
    generate_dataset(&SynthConfig {
        identities: 12,
        images: ImageCount { min: 2, max: 5 },
        dim: 7,
        sigmas: vec![0.6, 1.1, 1.7],
        seed: 21,
    })
    .unwrap()
}

#[test]
fn binary_round_trip_is_bit_identical() {
    let ds = dataset();
    let mut buf = Vec::new();
    write_embeddings_binary(&ds, &mut buf).unwrap();
    assert_eq!(&buf[..5], b"UROC1");
    let back = read_embeddings_binary(Cursor::new(&buf)).unwrap();
    assert_eq!(back, ds);
    for (a, b) in ds.records().iter().zip(back.records()) {
        let bits =
            |r: &uroc::data::Record| r.embedding.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a), bits(b));
    }

    let mut truncated = buf.clone();
    truncated.pop();
    assert!(read_embeddings_binary(Cursor::new(&truncated)).is_err());
    let mut trailing = buf;
    trailing.push(0);
    assert!(read_embeddings_binary(Cursor::new(&trailing)).is_err());
}

#[test]
fn csv_round_trip_through_files() {
    let ds = dataset();
    let dir = tempfile::tempdir().unwrap();
    for (name, format) in [
        ("d.csv", EmbeddingFormat::Csv),
        ("d.bin", EmbeddingFormat::Binary),
    ] {
        let path = dir.path().join(name);
        save_embeddings(&ds, &path, format).unwrap();
        assert_eq!(EmbeddingFormat::from_path(&path), format);
        assert_eq!(load_embeddings(&path, format).unwrap(), ds);
    }
    let mut buf = b"# a comment line\n".to_vec();
    write_embeddings_csv(&ds, &mut buf).unwrap();
    assert_eq!(read_embeddings_csv(Cursor::new(buf)).unwrap(), ds);
}

#[test]
fn csv_validation_errors() {
    let header = "image_id,identity,attribute,e0,e1\n";
    let cases = [
        ("a,1,0,1,0\nb,1,0,0,1\nc,2,0,1,1\n", "too few"),
        ("a,1,0,1,0\nb,1,1,0,1\n", "inconsistent"),
        ("a,1,0,1,0\nb,1,0,0\n", "dimension"),
        ("a,1,0,0,0\nb,1,0,0,1\n", "zero norm"),
        ("a,1,0,1,x\nb,1,0,0,1\n", "malformed"),
    ];
    for (body, what) in cases {
        let err = read_embeddings_csv(Cursor::new(format!("{header}{body}"))).unwrap_err();
        let ok = match what {
            "too few" => matches!(err, Error::TooFewImages { .. }),
            "inconsistent" => matches!(err, Error::InconsistentAttribute { .. }),
            "dimension" => matches!(err, Error::DimensionMismatch { .. } | Error::Csv(_)),
            "zero norm" => matches!(err, Error::ZeroNorm { .. }),
            _ => matches!(err, Error::Malformed { .. }),
        };
        assert!(ok, "{what}: got {err}");
    }
}

#[test]
fn cache_matches_direct_recomputation() {
    let ds = dataset();
    let cache = build_score_cache(&ds, ImpostorPolicy::AllPairs).unwrap();
    let emb = |i: usize| &ds.records()[i].embedding;
    for (k, id) in ds.identities().iter().enumerate() {
        let scores = &cache.identities()[k];
        for (p, &i) in id.images.iter().enumerate() {
            for (q, &j) in id.images.iter().enumerate() {
                assert_eq!(
                    scores.score(p, q),
                    cosine_similarity(emb(i), emb(j)).unwrap()
                );
            }
            assert_eq!(scores.self_score(p), 1.0);
        }
    }
    for block in cache.impostor_blocks() {
        let (a, b) = (
            &ds.identities()[block.first],
            &ds.identities()[block.second],
        );
        for (p, &i) in a.images.iter().enumerate() {
            for (q, &j) in b.images.iter().enumerate() {
                let s = block.scores()[p * b.images.len() + q];
                assert_eq!(s, cosine_similarity(emb(i), emb(j)).unwrap());
            }
        }
    }
    let sizes = ds.identity_sizes();
    let genuine: usize = sizes.iter().map(|n| n * (n - 1) / 2).sum();
    let impostor: usize = (0..sizes.len())
        .flat_map(|k| (k + 1..sizes.len()).map(move |l| (k, l)))
        .map(|(k, l)| sizes[k] * sizes[l])
        .sum();
    assert_eq!(cache.num_genuine_pairs(), genuine);
    assert_eq!(cache.num_impostor_scores(), impostor);
    assert_eq!(
        build_score_cache(&ds, ImpostorPolicy::AllPairs).unwrap(),
        cache
    );
}

#[test]
fn score_files_reload_to_the_same_cache() {
    let ds = dataset();
    for policy in [ImpostorPolicy::AllPairs, ImpostorPolicy::SameAttributeOnly] {
        let cache = build_score_cache(&ds, policy).unwrap();
        let (mut scores, mut attrs) = (Vec::new(), Vec::new());
        write_score_csv(&cache, &mut scores).unwrap();
        write_attribute_csv(&cache, &mut attrs).unwrap();
        let attributes = read_attribute_csv(Cursor::new(attrs)).unwrap();
        let back = read_score_csv(Cursor::new(scores), Some(&attributes), policy).unwrap();
        assert_eq!(back.identity_sizes(), cache.identity_sizes());
        assert_eq!(back.impostor_blocks(), cache.impostor_blocks());
        for (a, b) in back.identities().iter().zip(cache.identities()) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.attribute, b.attribute);
            for i in 0..a.n() {
                for j in 0..a.n() {
                    assert_eq!(a.score(i, j), b.score(i, j));
                }
            }
        }
    }
}

#[test]
fn incomplete_score_files_are_rejected() {
    let csv = "identity_a,identity_b,image_a,image_b,score\n\
               1,1,a,b,0.9\n\
               2,2,c,d,0.8\n\
               1,2,a,c,0.1\n";
    assert!(read_score_csv(Cursor::new(csv), None, ImpostorPolicy::AllPairs).is_err());
}
