//! Hashed bag-of-words features over a short window of observations.

use serde::{Deserialize, Serialize};

use crate::minizork::PAD_TOKEN;

pub const FRAME_WINDOW: usize = 4;

/// Sparse, L2-normalized feature vector with a content key for caching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Features {
    /// Hash of the raw frame texts; equal texts give equal keys.
    pub key: u64,
    pub idx: Vec<u32>,
    pub val: Vec<f64>,
}

impl Features {
    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    pub fn norm(&self) -> f64 {
        self.val.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (&i, &v) in self.idx.iter().zip(&self.val) {
            out[i as usize] = v;
        }
        out
    }

    /// Builds a feature vector from a dense one, keeping nonzero entries.
    pub fn from_dense(x: &[f64]) -> Self {
        let mut key = Fnv::new();
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for (i, &v) in x.iter().enumerate() {
            if v != 0.0 {
                key.write(&(i as u32).to_le_bytes());
                key.write(&v.to_bits().to_le_bytes());
                idx.push(i as u32);
                val.push(v);
            }
        }
        Self {
            key: key.finish(),
            idx,
            val,
        }
    }
}

/// Each token lands in two signed buckets chosen by a 64-bit FNV-1a hash of
/// the token salted with its frame position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    pub hash_dim: usize,
    pub frame_window: usize,
}

impl Default for FeatureEncoder {
    fn default() -> Self {
        Self::new(512)
    }
}

impl FeatureEncoder {
    pub fn new(hash_dim: usize) -> Self {
        assert!(hash_dim > 0, "hash_dim must be positive");
        Self {
            hash_dim,
            frame_window: FRAME_WINDOW,
        }
    }

    /// Encodes the last `frame_window` texts, oldest first. Missing history
    /// is passed as empty strings.
    pub fn encode<S: AsRef<str>>(&self, frames: &[S]) -> Features {
        assert_eq!(frames.len(), self.frame_window, "expected {} frames", self.frame_window);
        let mut dense = vec![0.0; self.hash_dim];
        let mut key = Fnv::new();
        for (pos, frame) in frames.iter().enumerate() {
            let frame = frame.as_ref();
            key.write(&[0xff, pos as u8]);
            key.write(frame.as_bytes());
            for token in frame.split_whitespace().filter(|t| *t != PAD_TOKEN) {
                for (bucket, sign) in self.buckets(pos, token) {
                    dense[bucket] += sign;
                }
            }
        }
        let norm = dense.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut idx = Vec::new();
        let mut val = Vec::new();
        if norm > 0.0 {
            for (i, v) in dense.iter().enumerate() {
                if *v != 0.0 {
                    idx.push(i as u32);
                    val.push(v / norm);
                }
            }
        }
        Features {
            key: key.finish(),
            idx,
            val,
        }
    }

    fn buckets(&self, pos: usize, token: &str) -> [(usize, f64); 2] {
        let mut h = Fnv::new();
        h.write(&[pos as u8]);
        h.write(token.as_bytes());
        let h = h.finish();
        let d = self.hash_dim as u64;
        let b1 = (h % d) as usize;
        let b2 = ((h >> 32) % d) as usize;
        let s1 = if h & (1 << 20) == 0 { 1.0 } else { -1.0 };
        // A shared bucket keeps one sign so the token never cancels out.
        let s2 = if b1 == b2 || h & (1 << 52) == 0 { s1 } else { -s1 };
        [(b1, s1), (b2, s2)]
    }
}

/// Sliding window of the most recent observation texts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameHistory {
    frames: [String; FRAME_WINDOW],
}

impl FrameHistory {
    pub fn start(first: String) -> Self {
        let mut h = Self::default();
        h.frames[FRAME_WINDOW - 1] = first;
        h
    }

    pub fn push(&mut self, text: String) {
        self.frames.rotate_left(1);
        self.frames[FRAME_WINDOW - 1] = text;
    }

    pub fn frames(&self) -> &[String] {
        &self.frames
    }
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_normalized() {
        let enc = FeatureEncoder::default();
        let f = ["", "", "west of house", "you are standing in an open field"];
        let a = enc.encode(&f);
        assert_eq!(a, enc.encode(&f));
        assert!((a.norm() - 1.0).abs() < 1e-12);
        let z = enc.encode(&["", "", "", ""]);
        assert_eq!(z.nnz(), 0);
        let pads = enc.encode(&["<null> <null>", "", "", ""]);
        assert_eq!(pads.nnz(), 0);
    }

    #[test]
    fn frame_position_matters() {
        let enc = FeatureEncoder::default();
        let a = enc.encode(&["egg", "", "", ""]);
        let b = enc.encode(&["", "", "", "egg"]);
        assert_ne!(a.idx, b.idx);
        assert_ne!(a.key, b.key);
    }

    #[test]
    fn history_window() {
        let mut h = FrameHistory::start("a".into());
        assert_eq!(h.frames(), ["", "", "", "a"]);
        for t in ["b", "c", "d", "e"] {
            h.push(t.into());
        }
        assert_eq!(h.frames(), ["b", "c", "d", "e"]);
    }

    #[test]
    fn dense_round_trip() {
        let enc = FeatureEncoder::new(64);
        let f = enc.encode(&["a b c", "d", "", "e e"]);
        let d = f.to_dense(64);
        let g = Features::from_dense(&d);
        assert_eq!(g.idx, f.idx);
        assert_eq!(g.val, f.val);
    }

    fn world_vocabulary(spec: crate::minizork::WorldSpec) -> Vec<String> {
        use crate::minizork::{build_action_set, tokenize, Game, PAD_TOKEN};
        use rand::SeedableRng;
        use std::collections::{BTreeSet, HashSet};

        let actions = build_action_set(&spec, 100, false).unwrap();
        let game = Game::new(spec);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut seen = HashSet::new();
        let mut frontier = vec![game.initial_state()];
        let mut vocab = BTreeSet::new();
        for _ in 0..8 {
            let mut next = Vec::new();
            for state in frontier {
                let mut key = state.clone();
                key.steps = 0;
                if !seen.insert(key) {
                    continue;
                }
                vocab.extend(tokenize(&game.render_state_text(&state)));
                for c in &actions.commands {
                    next.push(game.execute(&state, c, &mut rng).state);
                }
            }
            frontier = next;
        }
        vocab.remove(PAD_TOKEN);
        vocab.into_iter().collect()
    }

    #[test]
    fn bundled_vocabulary_has_no_full_collision() {
        let enc = FeatureEncoder::default();
        for spec in [crate::minizork::WorldSpec::egg(), crate::minizork::WorldSpec::troll()] {
            let vocab = world_vocabulary(spec);
            assert!(vocab.len() > 20, "{}", vocab.len());
            for pos in 0..FRAME_WINDOW {
                let vecs: Vec<Vec<f64>> = vocab
                    .iter()
                    .map(|t| {
                        let mut f = [""; FRAME_WINDOW];
                        f[pos] = t;
                        enc.encode(&f).to_dense(enc.hash_dim)
                    })
                    .collect();
                for i in 0..vecs.len() {
                    for j in i + 1..vecs.len() {
                        assert_ne!(vecs[i], vecs[j], "{} vs {} at frame {pos}", vocab[i], vocab[j]);
                    }
                }
            }
        }
    }
}
