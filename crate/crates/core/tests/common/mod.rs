//! Reference implementations used as independent oracles. Written directly
//! from the defining formulas, sharing nothing with the library beyond its
//! plain data types.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wsafcm::{MembershipMatrix, Node, Point, RadioParams};

pub const E_ELEC: f64 = 50e-9;
pub const EPS_FS: f64 = 10e-12;
pub const EPS_MP: f64 = 0.0013e-12;
pub const E_DA: f64 = 5e-9;
pub const BITS: f64 = 4096.0;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn euclid(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

pub fn xy(p: Point) -> (f64, f64) {
    (p.x, p.y)
}

/// Two-regime transmit energy evaluated from the raw constants.
pub fn tx_oracle(radio: &RadioParams, bits: f64, d: f64) -> f64 {
    let d0 = (radio.eps_fs / radio.eps_mp).sqrt();
    if d < d0 {
        bits * radio.e_elec + bits * radio.eps_fs * d.powi(2)
    } else {
        bits * radio.e_elec + bits * radio.eps_mp * d.powi(4)
    }
}

/// u_ij = 1 / Σ_l (d_ij / d_il)^(2/(m-1)), coincident points split evenly.
pub fn membership_oracle(points: &[Point], centroids: &[Point], m: f64) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|&x| {
            let d: Vec<f64> = centroids.iter().map(|&c| euclid(xy(x), xy(c))).collect();
            let zeros = d.iter().filter(|&&v| v == 0.0).count();
            if zeros > 0 {
                return d
                    .iter()
                    .map(|&v| if v == 0.0 { 1.0 / zeros as f64 } else { 0.0 })
                    .collect();
            }
            (0..d.len())
                .map(|j| {
                    let s: f64 = (0..d.len())
                        .map(|l| (d[j] / d[l]).powf(2.0 / (m - 1.0)))
                        .sum();
                    1.0 / s
                })
                .collect()
        })
        .collect()
}

pub fn objective_oracle(points: &[Point], centroids: &[Point], u: &[Vec<f64>], m: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..points.len() {
        for j in 0..centroids.len() {
            total += u[i][j].powf(m) * euclid(xy(points[i]), xy(centroids[j])).powi(2);
        }
    }
    total
}

/// Average over alive nodes of node-to-nearest-centroid plus
/// centroid-to-sink transmit energy, nearest found by exhaustive scan.
pub fn fitness_oracle(
    centroids: &[Point],
    nodes: &[Node],
    sink: Point,
    radio: &RadioParams,
) -> f64 {
    let bits = radio.packet_bits as f64;
    let alive: Vec<&Node> = nodes.iter().filter(|n| n.alive).collect();
    let mut total = 0.0;
    for n in &alive {
        let mut best_j = 0;
        let mut best_d = f64::INFINITY;
        for (j, &c) in centroids.iter().enumerate() {
            let d = euclid(xy(n.position), xy(c));
            if d < best_d {
                best_d = d;
                best_j = j;
            }
        }
        total += tx_oracle(radio, bits, best_d)
            + tx_oracle(radio, bits, euclid(xy(centroids[best_j]), xy(sink)));
    }
    total / alive.len() as f64
}

pub fn expected_energy_oracle(
    points: &[Point],
    u: &[Vec<f64>],
    centroids: &[Point],
    sink: Point,
    radio: &RadioParams,
    m: f64,
) -> f64 {
    let bits = radio.packet_bits as f64;
    let e_agg = bits * radio.e_da;
    let mut total = 0.0;
    for i in 0..points.len() {
        for j in 0..centroids.len() {
            total += u[i][j].powf(m)
                * (tx_oracle(radio, bits, euclid(xy(points[i]), xy(centroids[j]))) + e_agg);
        }
    }
    for c in centroids {
        total += tx_oracle(radio, bits, euclid(xy(*c), xy(sink)));
    }
    total
}

pub fn matrix_rows(u: &MembershipMatrix) -> Vec<Vec<f64>> {
    (0..u.rows()).map(|i| u.row(i).to_vec()).collect()
}

/// Textbook FCM: alternate memberships and weighted means until the largest
/// centroid move is below `tol`.
pub fn fcm_oracle(
    points: &[Point],
    init: &[Point],
    m: f64,
    tol: f64,
    max_iter: usize,
) -> Vec<Point> {
    let mut c = init.to_vec();
    for _ in 0..max_iter {
        let u = membership_oracle(points, &c, m);
        let mut next = Vec::new();
        for j in 0..c.len() {
            let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
            for i in 0..points.len() {
                let w = u[i][j].powf(m);
                sx += w * points[i].x;
                sy += w * points[i].y;
                sw += w;
            }
            next.push(if sw > 0.0 {
                Point::new(sx / sw, sy / sw)
            } else {
                c[j]
            });
        }
        let shift = c
            .iter()
            .zip(&next)
            .map(|(a, b)| euclid(xy(*a), xy(*b)))
            .fold(0.0, f64::max);
        c = next;
        if shift < tol {
            break;
        }
    }
    c
}

pub fn random_points<R: Rng>(rng: &mut R, n: usize, side: f64) -> Vec<Point> {
    (0..n)
        .map(|_| Point::new(rng.random::<f64>() * side, rng.random::<f64>() * side))
        .collect()
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
