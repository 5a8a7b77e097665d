use hoss_core::toydata::{gen_toy, render, CHANNELS, SLOTS, TOY_DIM};
use hoss_core::{Dataset, ToyConfig};

fn cfg(n: usize, sigma: f64, seed: u64) -> ToyConfig {
    ToyConfig {
        n_samples: n,
        noise_sigma: sigma,
        seed,
        include_empty: true,
    }
}

#[test]
fn every_label_bit_is_a_fair_coin() {
    let n = 20_000;
    let data = gen_toy(&cfg(n, 0.1, 3)).unwrap();
    let se = (0.25 / n as f64).sqrt();
    let bits = (0..CHANNELS).map(|b| data.color_bit(b)).chain((0..SLOTS).map(|b| data.position_bit(b)));
    for (i, col) in bits.enumerate() {
        let freq = col.iter().sum::<usize>() as f64 / n as f64;
        assert!((freq - 0.5).abs() <= 3.0 * se, "bit {i}: frequency {freq}");
    }
}

fn mutual_information(a: &[usize], b: &[usize], na: usize, nb: usize) -> f64 {
    let n = a.len() as f64;
    let mut joint = vec![0.0; na * nb];
    for (&x, &y) in a.iter().zip(b) {
        joint[x * nb + y] += 1.0 / n;
    }
    let pa: Vec<f64> = (0..na).map(|x| (0..nb).map(|y| joint[x * nb + y]).sum()).collect();
    let pb: Vec<f64> = (0..nb).map(|y| (0..na).map(|x| joint[x * nb + y]).sum()).collect();
    let mut mi = 0.0;
    for x in 0..na {
        for y in 0..nb {
            let p = joint[x * nb + y];
            if p > 0.0 {
                mi += p * (p / (pa[x] * pb[y])).ln();
            }
        }
    }
    mi
}

#[test]
fn color_and_placement_are_independent() {
    let data = gen_toy(&cfg(20_000, 0.1, 4)).unwrap();
    let (color, placement): (Vec<usize>, Vec<usize>) = (0..data.len())
        .map(|i| {
            let s = data.sample(i);
            let pack = |bits: &[u8]| bits.iter().fold(0, |acc, &b| acc * 2 + b as usize);
            (pack(s.color_bits), pack(s.position_bits))
        })
        .unzip();
    let mi = mutual_information(&color, &placement, 1 << CHANNELS, 1 << SLOTS);
    assert!(mi <= 0.01, "mutual information {mi} nats");
}

#[test]
fn generation_is_deterministic_and_seed_dependent() {
    let a = gen_toy(&cfg(500, 0.1, 9)).unwrap();
    let b = gen_toy(&cfg(500, 0.1, 9)).unwrap();
    let c = gen_toy(&cfg(500, 0.1, 10)).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    assert_ne!(a.pixels, c.pixels);

    let prefix = gen_toy(&cfg(100, 0.1, 9)).unwrap();
    assert_eq!(prefix, a.slice(0..100));
}

#[test]
fn noiseless_samples_are_their_rendering() {
    let data = gen_toy(&cfg(200, 0.0, 1)).unwrap();
    for i in 0..data.len() {
        let s = data.sample(i);
        let color: [u8; CHANNELS] = s.color_bits.try_into().unwrap();
        let pos: [u8; SLOTS] = s.position_bits.try_into().unwrap();
        assert_eq!(s.pixels, render(&color, &pos).as_slice());
    }
}

#[test]
fn empty_placement_can_be_excluded() {
    let mut c = cfg(2000, 0.1, 2);
    c.include_empty = false;
    let data = gen_toy(&c).unwrap();
    assert!((0..data.len()).all(|i| data.sample(i).position_bits.contains(&1)));
}

#[test]
fn dataset_round_trips_through_bytes_and_disk() {
    let data = gen_toy(&cfg(50, 0.3, 7)).unwrap();
    assert_eq!(Dataset::from_bytes(&data.to_bytes()).unwrap(), data);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.bin");
    data.save(&path).unwrap();
    assert_eq!(Dataset::load(&path).unwrap(), data);

    let plain = Dataset::unlabeled(TOY_DIM, data.pixels.clone()).unwrap();
    assert_eq!(Dataset::from_bytes(&plain.to_bytes()).unwrap(), plain);
}

#[test]
fn corrupted_bytes_are_rejected() {
    let bytes = gen_toy(&cfg(10, 0.1, 0)).unwrap().to_bytes();
    let mut flipped = bytes.clone();
    flipped[40] ^= 0x01;
    assert!(Dataset::from_bytes(&flipped).is_err());
    assert!(Dataset::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    assert!(Dataset::from_bytes(b"NOTADATA1").is_err());
}
