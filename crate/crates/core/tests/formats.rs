use std::fs;
use std::path::Path;

use dfs_core::model::{load_model, save_model, InitScheme, NetworkConfig, ParamStore};
use dfs_core::synthdata::{
    generate_dataset, generate_samples, load_dataset, read_clip_file, write_clip_file, GenConfig,
    Mode,
};
use dfs_core::Error;

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn dataset_generation_is_byte_identical() {
    let gc = GenConfig { mode: Mode::Full, samples_per_class: 3, seed: 12, ..GenConfig::default() };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let m1 = generate_dataset(&gc, a.path()).unwrap();
    let m2 = generate_dataset(&gc, b.path()).unwrap();
    assert_eq!(m1, m2);
    assert_eq!(m1.files.len(), 12);
    let bytes = dir_bytes(a.path());
    assert_eq!(bytes, dir_bytes(b.path()));
    assert_eq!(bytes.len(), 13);

    // regenerating into the same directory leaves it unchanged
    generate_dataset(&gc, a.path()).unwrap();
    assert_eq!(dir_bytes(a.path()), bytes);

    let (manifest, samples) = load_dataset(a.path()).unwrap();
    assert_eq!(manifest, m1);
    assert_eq!(samples, generate_samples(&gc).unwrap());
}

#[test]
fn clip_files_round_trip_and_reject_damage() {
    let gc = GenConfig { mode: Mode::Sync, samples_per_class: 2, ..GenConfig::default() };
    let dir = tempfile::tempdir().unwrap();
    for (j, s) in generate_samples(&gc).unwrap().iter().enumerate() {
        let path = dir.path().join(format!("{j}.dfsb"));
        write_clip_file(s, &path).unwrap();
        // 32-byte header, then 2 modalities of 1x8x16x16 f32
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 32 + 2 * 8 * 16 * 16 * 4);
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 16416);
        let back = read_clip_file(&path).unwrap();
        assert_eq!(&back, s);
        for (a, b) in back.clips.iter().zip(&s.clips) {
            assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    let path = dir.path().join("0.dfsb");
    let good = fs::read(&path).unwrap();
    let damaged = [
        good[..good.len() - 1].to_vec(),
        good[..10].to_vec(),
        [b"XXXX".as_slice(), &good[4..]].concat(),
        [good.as_slice(), &[0u8; 4]].concat(),
    ];
    for (n, bytes) in damaged.iter().enumerate() {
        let p = dir.path().join(format!("bad{n}.dfsb"));
        fs::write(&p, bytes).unwrap();
        assert!(matches!(read_clip_file(&p), Err(Error::Format(_))), "case {n}");
    }
    assert!(matches!(read_clip_file(dir.path().join("missing.dfsb")), Err(Error::Io { .. })));
}

#[test]
fn model_files_round_trip_and_reject_damage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = NetworkConfig::default().share_stages(&[2]);
    let params = ParamStore::init_with(&cfg, 5, InitScheme::He);
    let path = dir.path().join("m.bin");
    save_model(&params, &cfg, &path).unwrap();
    let (p2, c2) = load_model(&path).unwrap();
    assert_eq!(c2, cfg);
    assert_eq!(p2.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
               params.flatten().iter().map(|v| v.to_bits()).collect::<Vec<_>>());

    let good = fs::read(&path).unwrap();
    let mut wrong_len = good.clone();
    // first blob length prefix sits right after the fixed header
    let header = good.len() - params.num_params() * 8 - params.block_layout().len() * 8;
    wrong_len[header] ^= 1;
    let damaged = [
        good[..good.len() - 3].to_vec(),
        good[..20].to_vec(),
        [b"DFSX".as_slice(), &good[4..]].concat(),
        [good.as_slice(), &[7u8]].concat(),
        wrong_len,
    ];
    for (n, bytes) in damaged.iter().enumerate() {
        let p = dir.path().join(format!("bad{n}.bin"));
        fs::write(&p, bytes).unwrap();
        assert!(matches!(load_model(&p), Err(Error::Format(_))), "case {n}");
    }
}
