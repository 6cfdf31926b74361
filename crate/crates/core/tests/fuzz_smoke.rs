use osd_core::wire::{decode_frame, encode_frame, DEFAULT_MAX_BODY};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[test]
fn random_bytes_never_panic() {
    let mut rng = ChaCha20Rng::seed_from_u64(0xf022);
    let mut buf = [0u8; 96];
    let mut valid = 0;
    for i in 0..1_000_000u32 {
        let mut len = rng.gen_range(0..buf.len());
        rng.fill_bytes(&mut buf[..len]);
        // Bias a share of inputs toward a plausible header.
        if i % 4 == 0 && len >= 2 {
            buf[0] = 1;
            buf[1] = rng.gen_range(1..=7);
        }
        if i % 16 == 1 {
            // A close frame with a random session id.
            buf[..4].copy_from_slice(&[1, 5, 0, 32]);
            buf[36..40].fill(0);
            len = 40;
        }
        if let Ok(frame) = decode_frame(&buf[..len], DEFAULT_MAX_BODY) {
            assert_eq!(encode_frame(&frame, DEFAULT_MAX_BODY).unwrap(), &buf[..len]);
            valid += 1;
        }
    }
    assert!(valid > 0);
}
