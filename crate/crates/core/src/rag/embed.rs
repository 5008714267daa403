use crate::hash::fnv1a64;

pub const MOCK_DIM: usize = 64;

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Vec<f64>;
    /// Recorded in index files so a mismatched embedder is caught on load.
    fn name(&self) -> &str;
}

/// Hashed bag of words: lowercase, tokens are maximal runs of ASCII
/// alphanumerics, each token adds 1 at `fnv1a64(token) % 64`, then the
/// vector is L2-normalized. A text without tokens maps to the zero vector.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockEmbedder;

pub fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_ascii_lowercase)
}

impl Embedder for MockEmbedder {
    fn dim(&self) -> usize {
        MOCK_DIM
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; MOCK_DIM];
        for t in tokens(text) {
            v[(fnv1a64(t.as_bytes()) % MOCK_DIM as u64) as usize] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }

    fn name(&self) -> &str {
        "mock-fnv1a64-64"
    }
}

/// `dot / sqrt(|a|² |b|²)`, 0 when either side is the zero vector, clamped
/// to [-1, 1].
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb).sqrt()).clamp(-1.0, 1.0)
}
