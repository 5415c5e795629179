//! Phase-resolved wall timing and deterministic memory accounting.
//!
//! Memory is counted in accounted bytes of live solver structures (scalar
//! count × scalar width + index count × index width), updated at phase
//! boundaries and at every allocation/release of a major buffer — a
//! reproducible metric, unlike OS resident-set sampling.

use std::time::Instant;

/// Pipeline phases, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Partition,
    SubdomainFactor,
    Schur,
    InterfaceSymbolic,
    InterfaceNumeric,
    Solve,
}

pub const PHASES: [Phase; 6] = [
    Phase::Partition,
    Phase::SubdomainFactor,
    Phase::Schur,
    Phase::InterfaceSymbolic,
    Phase::InterfaceNumeric,
    Phase::Solve,
];

impl Phase {
    pub fn index(self) -> usize {
        match self {
            Phase::Partition => 0,
            Phase::SubdomainFactor => 1,
            Phase::Schur => 2,
            Phase::InterfaceSymbolic => 3,
            Phase::InterfaceNumeric => 4,
            Phase::Solve => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Partition => "partition",
            Phase::SubdomainFactor => "subdomain_factor",
            Phase::Schur => "schur",
            Phase::InterfaceSymbolic => "interface_symbolic",
            Phase::InterfaceNumeric => "interface_numeric",
            Phase::Solve => "solve",
        }
    }
}

/// Deterministic byte ledger with per-phase peaks.
#[derive(Debug, Clone)]
pub struct MemLedger {
    current: u64,
    peak: u64,
    phase: Phase,
    phase_peak: [u64; 6],
    phase_start: [Option<Instant>; 6],
    phase_wall: [f64; 6],
}

impl MemLedger {
    pub fn new() -> Self {
        MemLedger {
            current: 0,
            peak: 0,
            phase: Phase::Partition,
            phase_peak: [0; 6],
            phase_start: [None; 6],
            phase_wall: [0.0; 6],
        }
    }

    /// Carry-in for bytes already live when timing starts (e.g. the input
    /// matrix, or a retained factor during the solve phase).
    pub fn with_resident(bytes: u64) -> Self {
        let mut l = Self::new();
        l.current = bytes;
        l.peak = bytes;
        l
    }

    /// Close the previous phase's clock and open `p`'s.
    pub fn enter(&mut self, p: Phase) {
        let now = Instant::now();
        let old = self.phase.index();
        if let Some(t0) = self.phase_start[old].take() {
            self.phase_wall[old] += now.duration_since(t0).as_secs_f64();
        }
        self.phase = p;
        self.phase_start[p.index()] = Some(now);
        self.phase_peak[p.index()] = self.phase_peak[p.index()].max(self.current);
    }

    /// Stop the running clock (end of the pipeline).
    pub fn finish(&mut self) {
        let idx = self.phase.index();
        if let Some(t0) = self.phase_start[idx].take() {
            self.phase_wall[idx] += t0.elapsed().as_secs_f64();
        }
    }

    pub fn alloc(&mut self, bytes: u64) {
        self.current += bytes;
        self.peak = self.peak.max(self.current);
        let idx = self.phase.index();
        self.phase_peak[idx] = self.phase_peak[idx].max(self.current);
    }

    pub fn release(&mut self, bytes: u64) {
        debug_assert!(self.current >= bytes, "ledger underflow");
        self.current = self.current.saturating_sub(bytes);
    }

    pub fn current(&self) -> u64 {
        self.current
    }

    pub fn peak(&self) -> u64 {
        self.peak
    }

    pub fn phase_peak(&self, p: Phase) -> u64 {
        self.phase_peak[p.index()]
    }

    pub fn phase_wall(&self, p: Phase) -> f64 {
        self.phase_wall[p.index()]
    }
}

impl Default for MemLedger {
    fn default() -> Self {
        Self::new()
    }
}

/// Per-run statistics: sizes, phase walls/peaks, flags, residuals.
#[derive(Debug, Clone, Default)]
pub struct SolveStats {
    pub n: usize,
    pub nnz: usize,
    pub n_parts: usize,
    pub n_interface: usize,
    /// Seconds per phase, indexed by [`Phase::index`].
    pub phase_wall: [f64; 6],
    /// Peak accounted bytes per phase.
    pub phase_peak: [u64; 6],
    /// Peak accounted bytes over the whole run.
    pub peak_bytes: u64,
    /// Count of perturbed pivots across all factors.
    pub pert_flags: u32,
    /// Relative residual per right-hand side (filled after a solve).
    pub residuals: Vec<f64>,
}

impl SolveStats {
    pub fn absorb_ledger(&mut self, l: &MemLedger) {
        for p in PHASES {
            self.phase_wall[p.index()] += l.phase_wall(p);
            self.phase_peak[p.index()] = self.phase_peak[p.index()].max(l.phase_peak(p));
        }
        self.peak_bytes = self.peak_bytes.max(l.peak());
    }

    /// Total factorization wall time (all phases except solve).
    pub fn factor_wall(&self) -> f64 {
        self.phase_wall[..5].iter().sum()
    }

    pub fn solve_wall(&self) -> f64 {
        self.phase_wall[Phase::Solve.index()]
    }

    /// Peak over the factorization phases.
    pub fn factor_peak(&self) -> u64 {
        *self.phase_peak[..5].iter().max().unwrap()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }
}
