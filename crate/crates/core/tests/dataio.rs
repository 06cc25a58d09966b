use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqtensor::dataio::{
    bone_lengths, cross_subject_split, hip_center, limb_normalize, load_descriptors, load_sequences,
    median_bone_lengths, save_descriptors, save_sequences, synth_dataset, read_sequences, write_sequences,
    SynthConfig, Topology,
};
use seqtensor::sck::{sck_descriptor, SckConfig};
use seqtensor::{Channel, Error, SkeletonSequence};

fn random_seq(rng: &mut ChaCha8Rng) -> SkeletonSequence {
    let (j, n) = (rng.random_range(1..6), rng.random_range(1..8));
    let coords = (0..j * n * 3).map(|_| rng.random_range(-2.0..2.0)).collect();
    let channels = if rng.random_bool(0.5) {
        let dim = rng.random_range(1..4);
        vec![Channel { dim, values: (0..dim * n).map(|_| rng.random_range(0.0..5.0)).collect() }]
    } else {
        vec![]
    };
    SkeletonSequence::with_channels(rng.random(), rng.random_range(0..20), j, n, coords, channels).unwrap()
}

#[test]
fn canonical_round_trip_of_random_records() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let seqs: Vec<_> = (0..100).map(|_| random_seq(&mut rng)).collect();
    let mut first = Vec::new();
    write_sequences(&mut first, &seqs).unwrap();
    let back = read_sequences(&first[..]).unwrap();
    assert_eq!(back, seqs);
    let mut second = Vec::new();
    write_sequences(&mut second, &back).unwrap();
    assert_eq!(first, second);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("seqs.jsonl");
    save_sequences(&path, &seqs).unwrap();
    assert_eq!(load_sequences(&path).unwrap(), seqs);
    assert!(matches!(load_sequences(dir.path().join("missing")), Err(Error::Io(_))));
}

#[test]
fn descriptor_file_round_trip() {
    let seqs = synth_dataset(&SynthConfig { per_class: 1, ..SynthConfig::default() }).unwrap();
    let ds: Vec<_> = seqs.iter().map(|s| sck_descriptor(s, &SckConfig::florence()).unwrap()).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.takd");
    save_descriptors(&path, &ds).unwrap();
    let back = load_descriptors(&path).unwrap();
    assert_eq!(back.len(), ds.len());
    for (a, b) in ds.iter().zip(&back) {
        assert_eq!((a.kind, a.label, a.subject, a.config_hash, a.len()), (b.kind, b.label, b.subject, b.config_hash, b.len()));
        let err = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-6 * a.norm());
    }
}

#[test]
fn hip_centering() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let s = SkeletonSequence::new(0, 0, 4, 5, (0..60).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let c = hip_center(&s, 2).unwrap();
    for f in 0..5 {
        assert_eq!(c.joint(2, f), [0.0; 3]);
        for i in 0..4 {
            for d in 0..3 {
                let before = s.joint(i, f)[d] - s.joint(0, f)[d];
                let after = c.joint(i, f)[d] - c.joint(0, f)[d];
                assert!((before - after).abs() <= 1e-12);
            }
        }
    }
    assert_eq!(hip_center(&c, 2).unwrap(), c);
    assert!(hip_center(&s, 4).is_err());
}

#[test]
fn limb_normalization() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let topo = Topology::binary(7);
    let s = SkeletonSequence::new(0, 0, 7, 4, (0..84).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();

    let own = bone_lengths(&s, &topo, 0).unwrap();
    let single = s.window(0, 1).unwrap();
    let same = limb_normalize(&single, &topo, &own).unwrap();
    let diff = same.coords().iter().zip(single.coords()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-12);

    let reference = median_bone_lengths(std::slice::from_ref(&s), &topo).unwrap();
    let norm = limb_normalize(&s, &topo, &reference).unwrap();
    let doubled: Vec<f64> = reference.iter().map(|l| 2.0 * l).collect();
    let norm2 = limb_normalize(&s, &topo, &doubled).unwrap();
    for f in 0..4 {
        let got = bone_lengths(&norm, &topo, f).unwrap();
        let got2 = bone_lengths(&norm2, &topo, f).unwrap();
        for i in 1..7 {
            assert!((got[i] - reference[i]).abs() <= 1e-9);
            assert!((got2[i] - 2.0 * got[i]).abs() <= 1e-9);
        }
    }
    assert!(limb_normalize(&s, &topo, &[0.0; 7]).is_err());
}

#[test]
fn subject_split_partitions() {
    let seqs = synth_dataset(&SynthConfig { per_class: 10, ..SynthConfig::default() }).unwrap();
    let (train, test) = cross_subject_split(&seqs, &[2, 4, 6, 8, 10]).unwrap();
    assert_eq!(train.len() + test.len(), seqs.len());
    assert!(train.iter().all(|s| s.subject % 2 == 1));
    assert!(test.iter().all(|s| s.subject % 2 == 0));
    for s in &seqs {
        assert_eq!(train.iter().chain(&test).filter(|t| *t == s).count(), 1);
    }
}
