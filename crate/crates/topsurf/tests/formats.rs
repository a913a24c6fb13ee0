// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;
use topsurf::formats::{
    decode_descriptor, decode_dictionary, decode_points, dictionary_checksum, dictionary_to_json, encode_descriptor,
    encode_dictionary, encode_points, read_dictionary, write_dictionary,
};
use topsurf_core::encoder::{ImageDescriptor, VisualWordOccurrence};
use topsurf_core::kdforest::ForestParams;
use topsurf_core::surf::InterestPoint;
use topsurf_core::vocabulary::{BuildMeta, Dictionary, IdfSource};
use topsurf_core::WordIndex;

fn f32_value() -> impl Strategy<Value = f64> {
    (-1.0e4f32..1.0e4).prop_map(f64::from)
}

fn point() -> impl Strategy<Value = InterestPoint> {
    (
        (f32_value(), f32_value(), f32_value(), f32_value()),
        prop_oneof![Just(-1i8), Just(1i8)],
        f32_value(),
        prop::collection::vec(-1.0f32..1.0, 64),
    )
        .prop_map(|((x, y, scale, orientation), laplacian_sign, response, d)| InterestPoint {
            x,
            y,
            scale,
            orientation,
            laplacian_sign,
            response,
            descriptor: std::array::from_fn(|i| f64::from(d[i])),
        })
}

fn descriptor() -> impl Strategy<Value = ImageDescriptor> {
    (
        "[a-z0-9_]{1,12}(/[a-z0-9_.]{1,12}){0,2}",
        prop::collection::btree_map(
            1u32..20_000,
            (prop::collection::vec((0.0f32..4096.0, 0.0f32..4096.0), 1..5), 0.0f32..10.0),
            0..30,
        ),
    )
        .prop_map(|(id, words)| {
            let total: usize = words.values().map(|(l, _)| l.len()).sum();
            let occurrences = words
                .into_iter()
                .map(|(w, (locations, idf))| VisualWordOccurrence {
                    index: WordIndex(w),
                    tf: locations.len() as f64 / total as f64,
                    idf,
                    locations,
                })
                .collect();
            ImageDescriptor { image_id: id, occurrences, total_points: total as u32 }
        })
}

fn dictionary(k: usize, checks: Option<usize>) -> Dictionary {
    let centroids = (0..k).map(|i| std::array::from_fn(|j| ((i * 64 + j) as f32).sin())).collect();
    let idf = (0..k).map(|i| 0.1 * i as f32).collect();
    let meta = BuildMeta {
        iterations: 250,
        iterations_run: 17,
        nn_count: 25,
        points_per_image: 500,
        corpus_size: 9,
        seed: 0xDEAD_BEEF_0000_0001,
        idf_source: IdfSource::Training,
    };
    Dictionary::from_parts(centroids, idf, ForestParams { trees: 8, checks }, meta).unwrap()
}

proptest! {
    #[test]
    fn points_round_trip(points in prop::collection::vec(point(), 0..20)) {
        let bytes = encode_points(&points).unwrap();
        prop_assert_eq!(&bytes[..4], b"TSIP");
        prop_assert_eq!(decode_points(&bytes).unwrap(), points);
    }

    #[test]
    fn descriptors_round_trip(desc in descriptor()) {
        let bytes = encode_descriptor(&desc).unwrap();
        prop_assert_eq!(&bytes[..4], b"TSVW");
        prop_assert_eq!(decode_descriptor(&bytes).unwrap(), desc);
    }

    #[test]
    fn truncation_is_detected(desc in descriptor(), cut in 1usize..64) {
        let bytes = encode_descriptor(&desc).unwrap();
        let cut = cut.min(bytes.len());
        prop_assert!(decode_descriptor(&bytes[..bytes.len() - cut]).is_err());
    }
}

#[test]
fn dictionary_round_trip() {
    for checks in [Some(32), None] {
        let dict = dictionary(37, checks);
        let bytes = encode_dictionary(&dict).unwrap();
        assert_eq!(&bytes[..4], b"TSDC");
        assert_eq!(&bytes[4..6], &1u16.to_le_bytes());
        assert_eq!(&bytes[6..10], &37u32.to_le_bytes());
        assert_eq!(bytes.len(), 10 + 37 * 65 * 4 + 2 + 4 + 5 * 4 + 8 + 1);
        let back = decode_dictionary(&bytes).unwrap();
        assert_eq!(back, dict);
        assert_eq!(encode_dictionary(&back).unwrap(), bytes);
    }
    let mut bytes = encode_dictionary(&dictionary(3, None)).unwrap();
    bytes.push(0);
    assert!(decode_dictionary(&bytes).is_err());
    bytes[0] = b'X';
    assert!(decode_dictionary(&bytes).is_err());
}

#[test]
fn dictionary_files_and_json_export() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.tsdc");
    let dict = dictionary(5, Some(32));
    let sum = write_dictionary(&path, &dict).unwrap();
    assert_eq!(sum, dictionary_checksum(&std::fs::read(&path).unwrap()));
    assert_eq!(sum.len(), 64);
    let (back, sum2) = read_dictionary(&path).unwrap();
    assert_eq!((back, sum2), (dict.clone(), sum));

    let json = serde_json::to_value(dictionary_to_json(&dict)).unwrap();
    assert_eq!(json["size"], 5);
    assert_eq!(json["centroids"].as_array().unwrap().len(), 5);
    assert_eq!(json["ann"]["trees"], 8);
    assert_eq!(json["build_meta"]["seed"], 0xDEAD_BEEF_0000_0001u64);
}

#[test]
fn bad_headers_are_rejected() {
    let bytes = encode_points(&[]).unwrap();
    assert_eq!(bytes, [b'T', b'S', b'I', b'P', 1, 0, 0, 0, 0, 0]);
    let mut wrong_version = bytes.clone();
    wrong_version[4] = 2;
    assert!(decode_points(&wrong_version).is_err());
    assert!(decode_points(b"TSVW\x01\x00\x00\x00\x00\x00").is_err());
    assert!(decode_points(&bytes[..7]).is_err());
}
