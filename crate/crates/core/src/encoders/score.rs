use crate::autodiff::Matrix;

pub const SCORE_BITS: usize = 16;
const MAX_MAGNITUDE: i64 = (1 << 15) - 1;

/// Little-endian bits of `min(|score|, 32767)` in bits 0..15, sign in bit 15.
pub fn encode_score(score: i64) -> [f64; SCORE_BITS] {
    let magnitude = score.unsigned_abs().min(MAX_MAGNITUDE as u64);
    let mut bits = [0.0; SCORE_BITS];
    for (i, b) in bits.iter_mut().enumerate().take(SCORE_BITS - 1) {
        *b = ((magnitude >> i) & 1) as f64;
    }
    if score < 0 {
        bits[SCORE_BITS - 1] = 1.0;
    }
    bits
}

pub fn score_column(score: i64) -> Matrix {
    Matrix::column(&encode_score(score))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oracle(score: i64) -> Vec<f64> {
        let s = format!("{:015b}", score.unsigned_abs().min(32767));
        let mut bits: Vec<f64> = s.chars().rev().map(|c| if c == '1' { 1.0 } else { 0.0 }).collect();
        bits.push(if score < 0 { 1.0 } else { 0.0 });
        bits
    }

    #[test]
    fn examples() {
        assert_eq!(encode_score(0), [0.0; 16]);
        let five = encode_score(5);
        assert_eq!(&five[..4], &[1.0, 0.0, 1.0, 0.0]);
        assert!(five[4..].iter().all(|&b| b == 0.0));
        let neg = encode_score(-3);
        assert_eq!(&neg[..3], &[1.0, 1.0, 0.0]);
        assert_eq!(neg[15], 1.0);
    }

    #[test]
    fn matches_string_oracle_including_clamp() {
        for s in [-40000, -32768, -1, 1, 2, 20, 255, 32767, 32768, 1 << 20] {
            assert_eq!(encode_score(s).to_vec(), oracle(s), "{s}");
        }
    }
}
