//! One-shot design: zeros, observer gains, state partition and zero dynamics.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg;
use crate::partition::{
    partition_states, zero_dynamics, PartitionedRealization, PathPreference, ZeroDynamics,
};
use crate::system::{StateSpace, DEFAULT_GRID_POINTS, DEFAULT_UC_TOL};
use crate::uio::{synthesize_uio, ObserverGains, SynthesisOptions};
use crate::zeros::{transmission_zeros, ZeroClassification};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignOptions {
    pub rank_tol: f64,
    pub uc_tol: f64,
    pub grid_points: usize,
    pub path: PathPreference,
    pub synthesis: SynthesisOptions,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            rank_tol: linalg::DEFAULT_RANK_TOL,
            uc_tol: DEFAULT_UC_TOL,
            grid_points: DEFAULT_GRID_POINTS,
            path: PathPreference::default(),
            synthesis: SynthesisOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub sys: StateSpace,
    pub zeros: ZeroClassification,
    pub gains: ObserverGains,
    pub partition: PartitionedRealization,
    pub zero_dynamics: ZeroDynamics,
    pub options: DesignOptions,
}

impl Design {
    pub fn new(sys: StateSpace, options: DesignOptions) -> Result<Self> {
        let zeros = transmission_zeros(&sys, options.uc_tol)?;
        let synthesis = SynthesisOptions {
            rank_tol: options.rank_tol,
            ..options.synthesis
        };
        let gains = synthesize_uio(&sys, &zeros, &synthesis)?;
        let partition = partition_states(&gains, &sys, options.rank_tol)?;
        let zero_dynamics = zero_dynamics(&partition, options.rank_tol, options.path)?;
        Ok(Self {
            sys,
            zeros,
            gains,
            partition,
            zero_dynamics,
            options,
        })
    }

    pub fn n(&self) -> usize {
        self.sys.n()
    }

    pub fn q(&self) -> usize {
        self.gains.q
    }

    pub fn nmp_dim(&self) -> usize {
        self.partition.nmp_dim()
    }
}
