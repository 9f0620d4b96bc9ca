use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::numerics::binomial;

/// Symmetric `N`-particle occupation states over `M` modes.
///
/// States are listed in lexicographic order of the occupation vector, largest
/// first, so index 0 is the state with every particle in mode 0. When mode
/// parities are given only states whose packed parity (XOR over particles)
/// equals `sector` are kept.
#[derive(Debug, Clone)]
pub struct FockBasis {
    n_particles: usize,
    n_modes: usize,
    states: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    sector: Option<u8>,
}

/// Dimension of the unrestricted space, `C(N + M - 1, N)`.
pub fn fock_dimension(n_particles: usize, n_modes: usize) -> usize {
    if n_modes == 0 {
        return 0;
    }
    binomial(n_particles + n_modes - 1, n_particles)
}

impl FockBasis {
    pub fn new(n_particles: usize, n_modes: usize, cap: usize) -> Result<Self> {
        Self::build(n_particles, n_modes, cap, None)
    }

    /// Restricts to states whose total parity equals `sector`.
    pub fn with_sector(
        n_particles: usize,
        parities: &[u8],
        sector: u8,
        cap: usize,
    ) -> Result<Self> {
        Self::build(n_particles, parities.len(), cap, Some((parities, sector)))
    }

    fn build(
        n_particles: usize,
        n_modes: usize,
        cap: usize,
        filter: Option<(&[u8], u8)>,
    ) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::invalid("a Fock space needs at least one mode"));
        }
        if n_particles > u8::MAX as usize {
            return Err(Error::invalid(
                "at most 255 particles per mode are representable",
            ));
        }
        let dimension = fock_dimension(n_particles, n_modes);
        if dimension > cap {
            return Err(Error::Capacity { dimension, cap });
        }
        let mut states = Vec::new();
        let mut occ = vec![0u8; n_modes];
        enumerate(&mut occ, 0, n_particles, &mut states, filter);
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Ok(FockBasis {
            n_particles,
            n_modes,
            states,
            index,
            sector: filter.map(|f| f.1),
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn sector(&self) -> Option<u8> {
        self.sector
    }

    pub fn state(&self, i: usize) -> &[u8] {
        &self.states[i]
    }

    pub fn states(&self) -> &[Vec<u8>] {
        &self.states
    }

    pub fn index_of(&self, occ: &[u8]) -> Option<usize> {
        self.index.get(occ).copied()
    }
}

fn enumerate(
    occ: &mut [u8],
    pos: usize,
    remaining: usize,
    out: &mut Vec<Vec<u8>>,
    filter: Option<(&[u8], u8)>,
) {
    if pos + 1 == occ.len() {
        occ[pos] = remaining as u8;
        let keep = match filter {
            None => true,
            Some((par, sector)) => {
                let p = occ
                    .iter()
                    .zip(par)
                    .fold(0u8, |acc, (&n, &q)| if n % 2 == 1 { acc ^ q } else { acc });
                p == sector
            }
        };
        if keep {
            out.push(occ.to_vec());
        }
        occ[pos] = 0;
        return;
    }
    for k in (0..=remaining).rev() {
        occ[pos] = k as u8;
        enumerate(occ, pos + 1, remaining - k, out, filter);
    }
    occ[pos] = 0;
}
