use std::fs;

use sharplab::data::{
    gen_blobs, gen_two_arcs, inject_label_noise, load_csv, load_idx, split_train_valid,
    write_idx_images, write_idx_labels, SplitRole,
};
use sharplab::Error;
use tempfile::tempdir;

#[test]
fn idx_round_trip() {
    let dir = tempdir().unwrap();
    let (ip, lp) = (dir.path().join("img"), dir.path().join("lbl"));
    let images = vec![
        vec![0u8, 255, 51, 102],
        vec![255u8, 0, 0, 255],
        vec![10u8, 20, 30, 40],
    ];
    write_idx_images(&ip, 2, 2, &images).unwrap();
    write_idx_labels(&lp, &[3, 0, 7]).unwrap();
    let ds = load_idx(&ip, &lp).unwrap();
    assert_eq!(ds.len(), 3);
    assert_eq!(ds.dim(), 4);
    assert_eq!(ds.classes, 8);
    assert_eq!(ds.labels, vec![3, 0, 7]);
    assert_eq!(ds.inputs.row(0), &[0.0, 1.0, 0.2, 0.4]);
}

#[test]
fn idx_header_is_big_endian() {
    let dir = tempdir().unwrap();
    let ip = dir.path().join("img");
    write_idx_images(&ip, 1, 1, &[vec![9]]).unwrap();
    let bytes = fs::read(&ip).unwrap();
    assert_eq!(
        &bytes[..16],
        &[0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1]
    );
}

#[test]
fn idx_errors() {
    let dir = tempdir().unwrap();
    let (ip, lp) = (dir.path().join("img"), dir.path().join("lbl"));
    write_idx_images(&ip, 2, 2, &[vec![1, 2, 3, 4], vec![5, 6, 7, 8]]).unwrap();
    write_idx_labels(&lp, &[1]).unwrap();
    assert!(matches!(
        load_idx(&ip, &lp),
        Err(Error::CountMismatch {
            images: 2,
            labels: 1
        })
    ));

    // swapped files: label magic where image magic is expected
    assert!(matches!(
        load_idx(&lp, &ip),
        Err(Error::BadMagic { found: 0x801, .. })
    ));

    let mut bytes = fs::read(&ip).unwrap();
    bytes.truncate(bytes.len() - 3);
    fs::write(&ip, bytes).unwrap();
    write_idx_labels(&lp, &[1, 2]).unwrap();
    assert!(matches!(
        load_idx(&ip, &lp),
        Err(Error::Truncated { missing: 3, .. })
    ));

    let missing = dir.path().join("nope");
    match load_idx(&missing, &lp) {
        Err(e @ Error::Io { .. }) => assert!(e.to_string().contains("nope")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn csv_loader() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("d.csv");
    fs::write(&p, "f0,f1,label\n0.5,1.5,1\n-1,2,0\n").unwrap();
    let ds = load_csv(&p).unwrap();
    assert_eq!((ds.len(), ds.dim(), ds.classes), (2, 2, 2));
    fs::write(&p, "f0,f1,label\n0.5,abc,1\n").unwrap();
    assert!(matches!(load_csv(&p), Err(Error::Parse { line: 2, .. })));
}

#[test]
fn generators_are_deterministic() {
    let a = gen_blobs(200, 4, 3, 0.5, 7).unwrap();
    let b = gen_blobs(200, 4, 3, 0.5, 7).unwrap();
    let c = gen_blobs(200, 4, 3, 0.5, 8).unwrap();
    assert_eq!(a.inputs, b.inputs);
    assert_eq!(a.labels, b.labels);
    assert_ne!(a.inputs, c.inputs);
    let per_class: Vec<usize> = (0..4)
        .map(|k| a.labels.iter().filter(|&&y| y == k).count())
        .collect();
    assert_eq!(per_class, vec![50; 4]);
    let arcs = gen_two_arcs(100, 0.1, 1).unwrap();
    assert_eq!((arcs.classes, arcs.dim()), (2, 2));
}

#[test]
fn split_is_a_partition() {
    let ds = gen_blobs(101, 2, 2, 0.5, 1).unwrap();
    let (tr, va) = split_train_valid(&ds, 0.1, 4).unwrap();
    assert_eq!((tr.len(), va.len()), (91, 10));
    assert_eq!((tr.role, va.role), (SplitRole::Train, SplitRole::Valid));
    let mut rows: Vec<Vec<u64>> = tr
        .inputs
        .data()
        .chunks(2)
        .chain(va.inputs.data().chunks(2))
        .map(|r| r.iter().map(|x| x.to_bits()).collect())
        .collect();
    let mut orig: Vec<Vec<u64>> = ds
        .inputs
        .data()
        .chunks(2)
        .map(|r| r.iter().map(|x| x.to_bits()).collect())
        .collect();
    rows.sort();
    orig.sort();
    assert_eq!(rows, orig);
}

#[test]
fn label_noise_counts_and_targets() {
    let labels: Vec<usize> = (0..1000).map(|i| i % 10).collect();
    for rate in [0.0, 0.2, 0.4, 0.6, 0.8, 1.0] {
        let out = inject_label_noise(&labels, rate, 10, 3).unwrap();
        let changed = labels
            .iter()
            .zip(&out.labels)
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(changed, (rate * 1000.0).round() as usize);
        assert_eq!(out.corrupted.len(), changed);
        assert!(out.labels.iter().all(|&y| y < 10));
        assert_eq!(out, inject_label_noise(&labels, rate, 10, 3).unwrap());
    }
    assert!(inject_label_noise(&labels, 1.5, 10, 0).is_err());
}

#[test]
fn label_noise_rounds_half_to_even() {
    let labels = vec![0usize; 5];
    // 0.5 * 5 = 2.5 rounds to 2, 0.3 * 5 = 1.5 rounds to 2
    assert_eq!(
        inject_label_noise(&labels, 0.5, 2, 0)
            .unwrap()
            .corrupted
            .len(),
        2
    );
    assert_eq!(
        inject_label_noise(&labels, 0.3, 2, 0)
            .unwrap()
            .corrupted
            .len(),
        2
    );
}

#[test]
fn normalization_uses_training_statistics() {
    let ds = gen_blobs(300, 3, 2, 1.0, 2).unwrap();
    let (mut tr, mut va) = split_train_valid(&ds, 0.2, 0).unwrap();
    let norm = tr.fit_normalization();
    tr.apply_normalization(&norm);
    va.apply_normalization(&norm);
    for j in 0..2 {
        let col: Vec<f64> = (0..tr.len()).map(|i| tr.inputs.row(i)[j]).collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        assert!(mean.abs() < 1e-12);
    }
    assert_eq!(va.normalization.as_ref(), Some(&norm));
}
