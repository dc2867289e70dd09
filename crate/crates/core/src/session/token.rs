//! Completion tokens handed to participants at the end of a game.

use rand::rngs::StdRng;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOKEN_LEN: usize = 10;
const ALPHABET: &[u8; 36] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

pub struct TokenGenerator {
    rng: Box<dyn RngCore + Send>,
}

impl TokenGenerator {
    /// Tokens from an OS-seeded cryptographic generator.
    pub fn secure() -> Self {
        TokenGenerator { rng: Box::new(StdRng::from_os_rng()) }
    }

    /// Reproducible tokens, for tests and simulations.
    pub fn seeded(seed: u64) -> Self {
        TokenGenerator { rng: Box::new(ChaCha8Rng::seed_from_u64(seed)) }
    }

    pub fn next_token(&mut self) -> String {
        (0..TOKEN_LEN).map(|_| ALPHABET[self.rng.random_range(0..ALPHABET.len())] as char).collect()
    }
}

impl std::fmt::Debug for TokenGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("TokenGenerator")
    }
}

pub fn is_well_formed(token: &str) -> bool {
    token.len() == TOKEN_LEN && token.bytes().all(|b| ALPHABET.contains(&b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format() {
        let mut g = TokenGenerator::secure();
        for _ in 0..100 {
            assert!(is_well_formed(&g.next_token()));
        }
        assert!(!is_well_formed("abc"));
        assert!(!is_well_formed("ABCDEFGHI!"));
    }

    #[test]
    fn seeded_is_reproducible() {
        let a: Vec<_> = (0..5)
            .map({
                let mut g = TokenGenerator::seeded(9);
                move |_| g.next_token()
            })
            .collect();
        let mut g = TokenGenerator::seeded(9);
        let b: Vec<_> = (0..5).map(|_| g.next_token()).collect();
        assert_eq!(a, b);
    }
}
