use nalgebra::DMatrix;

const PRIMES: [u64; 2] = [2_147_483_647, 1_000_000_007];

fn pow_mod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    r
}

fn rank_mod(m: &DMatrix<i64>, p: u64) -> usize {
    let (rows, cols) = m.shape();
    let mut a: Vec<Vec<u64>> =
        (0..rows).map(|r| (0..cols).map(|c| m[(r, c)].rem_euclid(p as i64) as u64).collect()).collect();
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..rows).find(|&r| a[r][c] != 0) else { continue };
        a.swap(rank, piv);
        let inv = pow_mod(a[rank][c], p - 2, p);
        for r in 0..rows {
            if r != rank && a[r][c] != 0 {
                let f = a[r][c] * inv % p;
                for k in c..cols {
                    let sub = f * a[rank][k] % p;
                    a[r][k] = (a[r][k] + p - sub) % p;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Rank over the rationals of an integer matrix. Reduction modulo a prime can
/// only lose rank, so the maximum over two large primes is exact unless both
/// divide every maximal nonzero minor.
pub fn integer_rank(m: &DMatrix<i64>) -> usize {
    PRIMES.iter().map(|&p| rank_mod(m, p)).max().unwrap_or(0)
}
