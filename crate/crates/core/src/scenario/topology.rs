use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct D2dPair {
    pub tx: Point,
    pub rx: Point,
    /// eNB nearest to the transmitter.
    pub serving: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyConfig {
    pub num_cells: usize,
    /// Center-to-vertex radius of each hexagonal cell (m).
    pub cell_radius: f64,
    pub pairs_per_cell: usize,
    /// Transmitter-receiver distances are uniform on `[0, max_pair_distance]`.
    pub max_pair_distance: f64,
    /// Cellular UEs per cell; only used by the mode-comparison experiment.
    pub ues_per_cell: usize,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self { num_cells: 1, cell_radius: 500.0, pairs_per_cell: 8, max_pair_distance: 100.0, ues_per_cell: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub cell_radius: f64,
    pub enb_positions: Vec<Point>,
    pub pairs: Vec<D2dPair>,
    /// Cellular UEs with the index of the cell they belong to.
    pub ue_positions: Vec<(Point, usize)>,
}

impl Topology {
    pub fn num_cells(&self) -> usize {
        self.enb_positions.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn nearest_enb(&self, p: &Point) -> usize {
        nearest(&self.enb_positions, p)
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.enb_positions.iter().any(|c| point_in_hex(p, c, self.cell_radius))
    }
}

fn nearest(centers: &[Point], p: &Point) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = c.distance(p);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Whether `p` lies in the flat-topped hexagon of circumradius `radius`
/// centered at `center` (vertices at 0°, 60°, ...).
pub fn point_in_hex(p: &Point, center: &Point, radius: f64) -> bool {
    let dx = (p.x - center.x).abs();
    let dy = (p.y - center.y).abs();
    let s3 = 3f64.sqrt();
    dy <= s3 / 2.0 * radius * (1.0 + 1e-12) && s3 * dx + dy <= s3 * radius * (1.0 + 1e-12)
}

/// eNB positions of the first `count` cells of a hexagonal lattice with
/// inter-site distance `√3·radius`: the central cell, then rings ordered
/// counter-clockwise from 30°. Three cells are mutually adjacent; seven form
/// the central cell plus its first ring.
pub fn hex_centers(count: usize, radius: f64) -> Vec<Point> {
    let s3 = 3f64.sqrt();
    // Lattice basis at 30° and 90°, both of length √3·R.
    let u = Point::new(1.5 * radius, s3 / 2.0 * radius);
    let v = Point::new(0.0, s3 * radius);
    let mut rings = 0i64;
    while 1 + 3 * rings * (rings + 1) < count as i64 {
        rings += 1;
    }
    let mut sites: Vec<(i64, f64, Point)> = Vec::new();
    for a in -rings..=rings {
        for b in -rings..=rings {
            let ring = (a.abs() + b.abs() + (a + b).abs()) / 2;
            if ring > rings {
                continue;
            }
            let p = Point::new(a as f64 * u.x + b as f64 * v.x, a as f64 * u.y + b as f64 * v.y);
            let angle = if ring == 0 { 0.0 } else { (p.y.atan2(p.x).to_degrees() - 30.0).rem_euclid(360.0) };
            sites.push((ring, angle, p));
        }
    }
    // Rounded angle keys keep the order independent of last-bit noise.
    sites.sort_by(|x, y| x.0.cmp(&y.0).then(((x.1 * 1e6).round() as i64).cmp(&((y.1 * 1e6).round() as i64))));
    sites.into_iter().take(count).map(|s| s.2).collect()
}

fn uniform_in_hex<R: Rng + ?Sized>(center: &Point, radius: f64, rng: &mut R) -> Point {
    let half_height = 3f64.sqrt() / 2.0 * radius;
    loop {
        let p = Point::new(
            center.x + rng.random_range(-radius..=radius),
            center.y + rng.random_range(-half_height..=half_height),
        );
        if point_in_hex(&p, center, radius) {
            return p;
        }
    }
}

/// Places `pairs_per_cell` couples in every cell. Transmitters are uniform in
/// their cell; each receiver sits at a uniform distance in
/// `[0, max_pair_distance]` and uniform bearing from its transmitter, redrawn
/// while it falls outside every cell.
pub fn generate_topology<R: Rng + ?Sized>(config: &TopologyConfig, rng: &mut R) -> Result<Topology> {
    if config.num_cells == 0 {
        return Err(Error::Configuration("at least one cell is required".into()));
    }
    if !(config.cell_radius.is_finite() && config.cell_radius > 0.0) {
        return Err(Error::Configuration(format!("cell radius must be positive, got {}", config.cell_radius)));
    }
    if !(config.max_pair_distance.is_finite() && config.max_pair_distance >= 0.0) {
        return Err(Error::Configuration(format!(
            "maximum pair distance must be non-negative, got {}",
            config.max_pair_distance
        )));
    }
    let radius = config.cell_radius;
    let enb_positions = hex_centers(config.num_cells, radius);
    let mut topo = Topology { cell_radius: radius, enb_positions, pairs: Vec::new(), ue_positions: Vec::new() };

    for cell in 0..config.num_cells {
        let center = topo.enb_positions[cell];
        for _ in 0..config.pairs_per_cell {
            let tx = uniform_in_hex(&center, radius, rng);
            let rx = loop {
                let d = config.max_pair_distance * rng.random::<f64>();
                let theta = 2.0 * PI * rng.random::<f64>();
                let rx = Point::new(tx.x + d * theta.cos(), tx.y + d * theta.sin());
                if topo.contains(&rx) {
                    break rx;
                }
            };
            let serving = topo.nearest_enb(&tx);
            topo.pairs.push(D2dPair { tx, rx, serving });
        }
    }
    for cell in 0..config.num_cells {
        let center = topo.enb_positions[cell];
        for _ in 0..config.ues_per_cell {
            topo.ue_positions.push((uniform_in_hex(&center, radius, rng), cell));
        }
    }
    Ok(topo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn config(cells: usize, pairs: usize, dmax: f64) -> TopologyConfig {
        TopologyConfig { num_cells: cells, pairs_per_cell: pairs, max_pair_distance: dmax, ..Default::default() }
    }

    #[test]
    fn single_cell_pairs_within_distance() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let topo = generate_topology(&config(1, 8, 100.0), &mut rng).unwrap();
        assert_eq!(topo.num_pairs(), 8);
        for pair in &topo.pairs {
            assert!(pair.tx.distance(&pair.rx) <= 100.0 + 1e-9);
            assert!(topo.contains(&pair.tx));
            assert!(topo.contains(&pair.rx));
            assert_eq!(pair.serving, 0);
        }
    }

    #[test]
    fn zero_distance_colocates_rx() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let topo = generate_topology(&config(1, 1, 0.0), &mut rng).unwrap();
        assert_eq!(topo.pairs[0].tx, topo.pairs[0].rx);
    }

    #[test]
    fn same_seed_same_topology() {
        let a = generate_topology(&config(7, 8, 100.0), &mut ChaCha20Rng::seed_from_u64(5)).unwrap();
        let b = generate_topology(&config(7, 8, 100.0), &mut ChaCha20Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.num_pairs(), 56);
    }

    #[test]
    fn serving_cell_is_nearest() {
        let topo = generate_topology(&config(7, 8, 100.0), &mut ChaCha20Rng::seed_from_u64(6)).unwrap();
        for pair in &topo.pairs {
            let d = topo.enb_positions[pair.serving].distance(&pair.tx);
            assert!(topo.enb_positions.iter().all(|c| c.distance(&pair.tx) >= d));
        }
    }

    #[test]
    fn lattice_layouts() {
        let r = 500.0;
        let isd = 3f64.sqrt() * r;
        let three = hex_centers(3, r);
        for i in 0..3 {
            for j in i + 1..3 {
                assert!((three[i].distance(&three[j]) - isd).abs() < 1e-9);
            }
        }
        let seven = hex_centers(7, r);
        assert_eq!(seven[0], Point::new(0.0, 0.0));
        for c in &seven[1..] {
            assert!((c.distance(&seven[0]) - isd).abs() < 1e-9);
        }
        assert_eq!(hex_centers(19, r).len(), 19);
    }

    #[test]
    fn rejects_bad_geometry() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut cfg = config(1, 1, 10.0);
        cfg.cell_radius = 0.0;
        assert!(matches!(generate_topology(&cfg, &mut rng), Err(Error::Configuration(_))));
        assert!(generate_topology(&config(0, 1, 10.0), &mut rng).is_err());
    }
}
