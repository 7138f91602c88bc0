//! Serde adapter for [`ChaCha8Rng`] that stores the 128-bit word position as
//! a decimal string, so the state survives self-describing formats and
//! internally tagged enums.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
struct RngState {
    seed: [u8; 32],
    stream: u64,
    word_pos: String,
}

pub fn serialize<S: Serializer>(rng: &ChaCha8Rng, s: S) -> Result<S::Ok, S::Error> {
    RngState {
        seed: rng.get_seed(),
        stream: rng.get_stream(),
        word_pos: rng.get_word_pos().to_string(),
    }
    .serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ChaCha8Rng, D::Error> {
    let st = RngState::deserialize(d)?;
    let pos: u128 = st.word_pos.parse().map_err(serde::de::Error::custom)?;
    let mut rng = ChaCha8Rng::from_seed(st.seed);
    rng.set_stream(st.stream);
    rng.set_word_pos(pos);
    Ok(rng)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize)]
    struct Holder {
        #[serde(with = "super")]
        rng: ChaCha8Rng,
    }

    #[test]
    fn resumes_mid_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..37 {
            rng.random::<u32>();
        }
        let json = serde_json::to_string(&Holder { rng: rng.clone() }).unwrap();
        let mut back: Holder = serde_json::from_str(&json).unwrap();
        for _ in 0..100 {
            assert_eq!(back.rng.random::<u64>(), rng.random::<u64>());
        }
    }
}
