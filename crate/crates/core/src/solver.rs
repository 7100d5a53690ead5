//! Semi-implicit finite-difference scheme for the approximating equation
//!
//! ```text
//! ∂ₜu = ½∂²ₓu + φⁿ(u(t−, x)) L̇_α(t, x),   u(t, 0) = u(t, L) = 0
//! ```
//!
//! Each step solves `(I − (dt/2)·D₂)·u_next = u + φⁿ(u) ⊙ ΔL/dx`, where `D₂`
//! is the centered second difference with homogeneous Dirichlet closure and
//! `ΔL` holds the compensated noise increments of the cells of the step.
//! The coefficient is evaluated at the previous state (the left limit).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientSpec, CoefficientTable, NoiseCoefficient};
use crate::rng::RandomStream;
use crate::stable_noise::{CellSampler, StableNoiseSpec};
use crate::{Error, Result};

/// Uniform space-time grid on `[0, T] × [0, L]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Domain length `L`.
    pub length: f64,
    /// Interior node count.
    pub nx: usize,
    /// Time horizon `T`.
    pub horizon: f64,
    /// Number of time steps.
    pub nt: usize,
}

impl Default for GridSpec {
    /// `L = 1`, 63 interior nodes, `T = 0.5`, 128 steps.
    fn default() -> Self {
        Self {
            length: 1.0,
            nx: 63,
            horizon: 0.5,
            nt: 128,
        }
    }
}

impl GridSpec {
    pub fn new(length: f64, nx: usize, horizon: f64, nt: usize) -> Result<Self> {
        let g = Self {
            length,
            nx,
            horizon,
            nt,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 3 {
            return Err(Error::config(format!("nx = {} must be >= 3", self.nx)));
        }
        if self.nt < 1 {
            return Err(Error::config("nt must be >= 1"));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::config(format!(
                "length = {} must be > 0",
                self.length
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::config(format!(
                "horizon = {} must be > 0",
                self.horizon
            )));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        self.length / (self.nx + 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.nt as f64
    }

    /// Position of node `i`, with `0` and `nx + 1` the boundary nodes.
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 * self.dt()
    }

    /// Interior node positions.
    pub fn interior(&self) -> impl Iterator<Item = f64> + '_ {
        (1..=self.nx).map(|i| self.x(i))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    Zero,
    /// `sin(kπx/L)`
    Sine {
        k: u32,
    },
    /// `cos²(π(x − center)/(2·width))` on `|x − center| < width`, zero elsewhere.
    Bump {
        center: f64,
        width: f64,
    },
    /// Piecewise-linear through `points`, zero outside their span.
    Tabulated {
        points: Vec<[f64; 2]>,
    },
}

impl InitialCondition {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Bump { width, .. } if !(*width > 0.0) => {
                Err(Error::config(format!("bump width = {width} must be > 0")))
            }
            Self::Tabulated { points } => {
                if points.len() < 2 || points.windows(2).any(|w| !(w[1][0] > w[0][0])) {
                    Err(Error::config(
                        "tabulated initial condition needs >= 2 points with increasing abscissae",
                    ))
                } else if points.iter().flatten().any(|v| !v.is_finite()) {
                    Err(Error::config(
                        "tabulated initial condition values must be finite",
                    ))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, x: f64, length: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Sine { k } => (*k as f64 * PI * x / length).sin(),
            Self::Bump { center, width } => {
                let r = (x - center) / width;
                if r.abs() < 1.0 {
                    (0.5 * PI * r).cos().powi(2)
                } else {
                    0.0
                }
            }
            Self::Tabulated { points } => {
                let first = points[0];
                let last = points[points.len() - 1];
                if x < first[0] || x > last[0] {
                    return 0.0;
                }
                let idx = points
                    .partition_point(|p| p[0] <= x)
                    .min(points.len() - 1)
                    .max(1);
                let ([x0, y0], [x1, y1]) = (points[idx - 1], points[idx]);
                y0 + (x - x0) * (y1 - y0) / (x1 - x0)
            }
        }
    }

    /// Values at the interior nodes of `grid`.
    pub fn sample(&self, grid: &GridSpec) -> Vec<f64> {
        grid.interior()
            .map(|x| self.value(x, grid.length))
            .collect()
    }
}

/// Factored `(I − (dt/2)·D₂)` for repeated tridiagonal solves.
#[derive(Clone, Debug)]
pub struct Stepper {
    grid: GridSpec,
    off: f64,
    /// Modified super-diagonal of the forward sweep.
    upper: Vec<f64>,
    /// Reciprocal pivots of the forward sweep.
    inv_pivot: Vec<f64>,
}

impl Stepper {
    pub fn new(grid: &GridSpec) -> Result<Self> {
        grid.validate()?;
        let r = grid.dt() / (grid.dx() * grid.dx());
        let diag = 1.0 + r;
        let off = -0.5 * r;
        let n = grid.nx;
        let mut upper = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut prev_upper = 0.0;
        for i in 0..n {
            let pivot = diag - off * prev_upper;
            // strictly diagonally dominant: |diag| = 1 + r > r = 2|off|
            debug_assert!(pivot > 0.0);
            inv_pivot[i] = 1.0 / pivot;
            upper[i] = off * inv_pivot[i];
            prev_upper = upper[i];
        }
        Ok(Self {
            grid: *grid,
            off,
            upper,
            inv_pivot,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Solves the implicit system in place.
    pub fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        debug_assert_eq!(n, self.grid.nx);
        rhs[0] *= self.inv_pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.off * rhs[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.upper[i] * rhs[i + 1];
        }
    }

    /// Advances `state` in place by one step with the given cell increments.
    pub fn advance<C: NoiseCoefficient + ?Sized>(
        &self,
        state: &mut [f64],
        noise_row: &[f64],
        coeff: &C,
    ) {
        let inv_dx = 1.0 / self.grid.dx();
        for (u, dl) in state.iter_mut().zip(noise_row) {
            if *dl != 0.0 {
                *u += coeff.value(*u) * dl * inv_dx;
            }
        }
        self.solve(state);
    }
}

/// One step of the scheme from `state` (interior values).
pub fn step<C: NoiseCoefficient + ?Sized>(
    state: &[f64],
    noise_row: &[f64],
    coeff: &C,
    grid: &GridSpec,
) -> Result<Vec<f64>> {
    if state.len() != grid.nx || noise_row.len() != grid.nx {
        return Err(Error::config(format!(
            "state ({}) and noise row ({}) must both have nx = {} entries",
            state.len(),
            noise_row.len(),
            grid.nx
        )));
    }
    let stepper = Stepper::new(grid)?;
    let mut next = state.to_vec();
    stepper.advance(&mut next, noise_row, coeff);
    Ok(next)
}

/// Everything needed to run replicas of one experiment; shared read-only
/// between worker threads.
pub struct Simulation<C: NoiseCoefficient> {
    stepper: Stepper,
    sampler: CellSampler,
    coeff: C,
    initial: Vec<f64>,
}

impl Simulation<CoefficientTable> {
    /// Tabulates `φⁿ` once for all replicas.
    pub fn new(
        grid: &GridSpec,
        ic: &InitialCondition,
        coeff: &CoefficientSpec,
        noise: &StableNoiseSpec,
    ) -> Result<Self> {
        Self::with_coefficient(grid, ic, CoefficientTable::new(coeff)?, noise)
    }
}

impl<C: NoiseCoefficient> Simulation<C> {
    pub fn with_coefficient(
        grid: &GridSpec,
        ic: &InitialCondition,
        coeff: C,
        noise: &StableNoiseSpec,
    ) -> Result<Self> {
        grid.validate()?;
        ic.validate()?;
        noise.validate()?;
        Ok(Self {
            stepper: Stepper::new(grid)?,
            sampler: CellSampler::new(noise, grid.dt() * grid.dx())?,
            coeff,
            initial: ic.sample(grid),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        self.stepper.grid()
    }

    /// Runs one replica, handing every state `u_{t_j}` (j = 0..=nt) to `observe`.
    /// Noise rows are drawn time-major from the replica's stream.
    pub fn run<F: FnMut(usize, &[f64])>(
        &self,
        master_seed: u64,
        replica_id: u64,
        mut observe: F,
    ) -> Result<()> {
        let mut stream = RandomStream::for_replica(master_seed, replica_id);
        let mut state = self.initial.clone();
        let mut row = vec![0.0; state.len()];
        observe(0, &state);
        for j in 1..=self.grid().nt {
            self.sampler.fill_row(&mut stream, &mut row);
            self.stepper.advance(&mut state, &row, &self.coeff);
            if state.iter().any(|v| !v.is_finite()) {
                return Err(Error::Explosion { step: j });
            }
            observe(j, &state);
        }
        Ok(())
    }
}

/// A full trajectory on the interior nodes; boundary values are identically zero.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSample {
    pub grid: GridSpec,
    pub master_seed: u64,
    pub replica_id: u64,
    states: Vec<f64>,
}

impl PathSample {
    pub fn from_states(
        grid: GridSpec,
        master_seed: u64,
        replica_id: u64,
        states: Vec<f64>,
    ) -> Result<Self> {
        if states.len() != (grid.nt + 1) * grid.nx {
            return Err(Error::config("state buffer does not match grid"));
        }
        Ok(Self {
            grid,
            master_seed,
            replica_id,
            states,
        })
    }

    pub fn steps(&self) -> usize {
        self.grid.nt + 1
    }

    pub fn state(&self, j: usize) -> &[f64] {
        let nx = self.grid.nx;
        &self.states[j * nx..(j + 1) * nx]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.grid.nt)
    }

    /// State `j` with the two zero boundary nodes attached.
    pub fn full_state(&self, j: usize) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.grid.nx + 2);
        v.push(0.0);
        v.extend_from_slice(self.state(j));
        v.push(0.0);
        v
    }
}

/// Simulates one replica and keeps every state.
pub fn solve_path(
    grid: &GridSpec,
    ic: &InitialCondition,
    coeff: &CoefficientSpec,
    noise: &StableNoiseSpec,
    master_seed: u64,
    replica_id: u64,
) -> Result<PathSample> {
    let sim = Simulation::new(grid, ic, coeff, noise)?;
    let mut states = Vec::with_capacity((grid.nt + 1) * grid.nx);
    sim.run(master_seed, replica_id, |_, u| states.extend_from_slice(u))?;
    PathSample::from_states(*grid, master_seed, replica_id, states)
}

/// `ψ(x) = sin³(πx/L)`: vanishes with its first derivative at both ends.
pub fn default_test_function(grid: &GridSpec) -> Vec<f64> {
    (0..grid.nx + 2)
        .map(|i| (PI * grid.x(i) / grid.length).sin().powi(3))
        .collect()
}

/// Second derivative of [`default_test_function`].
pub fn default_test_function_second_derivative(grid: &GridSpec) -> Vec<f64> {
    let k = PI / grid.length;
    (0..grid.nx + 2)
        .map(|i| {
            let s = (k * grid.x(i)).sin();
            k * k * (6.0 * s - 9.0 * s * s * s)
        })
        .collect()
}

pub(crate) fn check_test_function(psi: &[f64], grid: &GridSpec) -> Result<()> {
    if psi.len() != grid.nx + 2 {
        return Err(Error::config(format!(
            "test function needs nx + 2 = {} values, got {}",
            grid.nx + 2,
            psi.len()
        )));
    }
    let scale = psi.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let (first, last) = (psi[0], psi[psi.len() - 1]);
    if first.abs() > 1e-12 * scale || last.abs() > 1e-12 * scale {
        return Err(Error::config(format!(
            "test function must vanish at the boundary, got {first} and {last}"
        )));
    }
    Ok(())
}

/// `⟨u, ψ⟩` for interior values `u` against `ψ` on the full grid (trapezoid,
/// zero boundary values of `u`).
pub fn pairing(state: &[f64], psi: &[f64], dx: f64) -> f64 {
    state.iter().zip(&psi[1..]).map(|(u, p)| u * p).sum::<f64>() * dx
}

/// `⟨u_{t_j}, ψ⟩` for every time step of `path`.
pub fn pair_with_test_function(path: &PathSample, psi: &[f64]) -> Result<Vec<f64>> {
    check_test_function(psi, &path.grid)?;
    let dx = path.grid.dx();
    Ok((0..path.steps())
        .map(|j| pairing(path.state(j), psi, dx))
        .collect())
}
