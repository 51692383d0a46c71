use rand::Rng;

use super::{ParamAtom, ScenarioSpec};

/// Precomputed cumulative tables for drawing the next open station and the
/// regenerated atom.  Every simulator draws through this type, so two models
/// seeded identically see the same parameter sequence.
#[derive(Debug, Clone)]
pub struct Regenerator {
    /// Per station: `(cumulative probability, next station)`.
    routes: Vec<Vec<(f64, usize)>>,
    /// Per ordered pair: cumulative atom weights.
    atom_cdf: Vec<Vec<Vec<f64>>>,
    atoms: Vec<Vec<Vec<ParamAtom>>>,
    slopes: Vec<Vec<Vec<f64>>>,
}

impl Regenerator {
    pub fn new(spec: &ScenarioSpec) -> Self {
        let d = spec.stations();
        let chain = spec.chain();
        let routes = (0..d)
            .map(|i| {
                let mut acc = 0.0;
                let mut row: Vec<(f64, usize)> = (0..d)
                    .filter(|&j| chain.has_edge(i, j))
                    .map(|j| {
                        acc += chain.prob(i, j);
                        (acc, j)
                    })
                    .collect();
                if let Some(last) = row.last_mut() {
                    last.0 = f64::INFINITY;
                }
                row
            })
            .collect();
        let mut atom_cdf = vec![vec![Vec::new(); d]; d];
        let mut atoms = vec![vec![Vec::new(); d]; d];
        let mut slopes = vec![vec![Vec::new(); d]; d];
        for ((i, j), m) in spec.measures() {
            let mut acc = 0.0;
            let mut cdf: Vec<f64> = m
                .atoms()
                .iter()
                .map(|a| {
                    acc += a.weight;
                    acc
                })
                .collect();
            if let Some(last) = cdf.last_mut() {
                *last = f64::INFINITY;
            }
            atom_cdf[i][j] = cdf;
            atoms[i][j] = m.atoms().to_vec();
            slopes[i][j] = spec.slope_law().pair(i, j).iter().map(|&(_, y)| y).collect();
        }
        Self {
            routes,
            atom_cdf,
            atoms,
            slopes,
        }
    }

    /// Station that opens when the server moves to `server`.
    #[inline]
    pub fn next_station<R: Rng + ?Sized>(&self, server: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let row = &self.routes[server];
        row.iter().find(|&&(c, _)| u < c).map_or(row[row.len() - 1].1, |&(_, j)| j)
    }

    /// Index of the atom of `nu[server][other]` drawn for a new epoch.
    #[inline]
    pub fn atom_index<R: Rng + ?Sized>(&self, server: usize, other: usize, rng: &mut R) -> usize {
        let cdf = &self.atom_cdf[server][other];
        if cdf.len() == 1 {
            return 0;
        }
        let u: f64 = rng.random();
        cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
    }

    /// Draws the open station and atom for an epoch served at `server`.
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, server: usize, rng: &mut R) -> (usize, usize) {
        let other = self.next_station(server, rng);
        let k = self.atom_index(server, other, rng);
        (other, k)
    }

    #[inline]
    pub fn atom(&self, server: usize, other: usize, k: usize) -> &ParamAtom {
        &self.atoms[server][other][k]
    }

    #[inline]
    pub fn slope(&self, server: usize, other: usize, k: usize) -> f64 {
        self.slopes[server][other][k]
    }
}
