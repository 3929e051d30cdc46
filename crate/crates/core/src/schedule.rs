//! Per-slot switch matrices that connect RF chains to ports.
//!
//! Ports are 0-based in code. Text output and violation messages use
//! 1-based port numbers.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;

use crate::array::ArrayGeometry;
use crate::error::{Error, Result};

/// Binary `M x N` matrix, entry `(m, n) = 1` when chain `m` uses port `n`.
pub type SwitchMatrix = DMatrix<u8>;

/// First rule a switch matrix breaks. Indices are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NonBinary {
        row: usize,
        column: usize,
        value: u8,
    },
    /// Each RF chain must connect to exactly one port.
    RowNotSingle { row: usize, ones: usize },
    /// A port can serve at most one RF chain.
    ColumnConflict { column: usize, ones: usize },
    /// Two selected ports closer than half a wavelength.
    Spacing { first: usize, second: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonBinary { row, column, value } => {
                write!(f, "entry ({row}, {column}) = {value} is not binary")
            }
            Violation::RowNotSingle { row, ones } => {
                write!(f, "row {row} has {ones} ones, expected exactly one")
            }
            Violation::ColumnConflict { column, ones } => {
                write!(f, "column {column} sums to {ones}, expected 0 or 1")
            }
            Violation::Spacing { first, second } => write!(
                f,
                "ports {first} and {second} are closer than half a wavelength"
            ),
        }
    }
}

impl std::error::Error for Violation {}

/// `gap · d >= λ/2`, evaluated in wavelengths.
pub fn is_decoupled(gap: usize, geometry: &ArrayGeometry) -> bool {
    gap as f64 * geometry.port_spacing_wavelengths() >= 0.5 - 1e-12
}

pub fn validate_switch_matrix(
    matrix: &SwitchMatrix,
    geometry: &ArrayGeometry,
    enforce_spacing: bool,
) -> Result<(), Violation> {
    for row in 0..matrix.nrows() {
        for column in 0..matrix.ncols() {
            let value = matrix[(row, column)];
            if value > 1 {
                return Err(Violation::NonBinary {
                    row: row + 1,
                    column: column + 1,
                    value,
                });
            }
        }
    }
    for (row, r) in matrix.row_iter().enumerate() {
        let ones = r.iter().filter(|&&v| v == 1).count();
        if ones != 1 {
            return Err(Violation::RowNotSingle { row: row + 1, ones });
        }
    }
    let mut selected = Vec::new();
    for (column, c) in matrix.column_iter().enumerate() {
        let ones = c.iter().filter(|&&v| v == 1).count();
        if ones > 1 {
            return Err(Violation::ColumnConflict {
                column: column + 1,
                ones,
            });
        }
        if ones == 1 {
            selected.push(column);
        }
    }
    if enforce_spacing {
        for w in selected.windows(2) {
            if !is_decoupled(w[1] - w[0], geometry) {
                return Err(Violation::Spacing {
                    first: w[0] + 1,
                    second: w[1] + 1,
                });
            }
        }
    }
    Ok(())
}

/// `K` slots, each assigning `M` distinct ports to the RF chains.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchSchedule {
    n_ports: usize,
    n_chains: usize,
    slots: Vec<Vec<usize>>,
}

impl SwitchSchedule {
    /// Builds a schedule from per-slot port lists (chain `m` of slot `k`
    /// uses `slots[k][m]`) and checks the row and column rules.
    pub fn new(n_ports: usize, slots: Vec<Vec<usize>>) -> Result<Self> {
        let n_chains = slots.first().map_or(0, Vec::len);
        if n_chains == 0 {
            return Err(Error::Config(
                "schedule needs at least one slot and one chain".into(),
            ));
        }
        if n_chains > n_ports {
            return Err(Error::Config(format!(
                "{n_chains} RF chains exceed {n_ports} ports"
            )));
        }
        for (k, ports) in slots.iter().enumerate() {
            if ports.len() != n_chains {
                return Err(Error::Config(format!(
                    "slot {} selects {} ports, expected {n_chains}",
                    k + 1,
                    ports.len()
                )));
            }
            let mut seen = vec![false; n_ports];
            for &p in ports {
                if p >= n_ports {
                    return Err(Error::Config(format!(
                        "slot {} selects port {} of {n_ports}",
                        k + 1,
                        p + 1
                    )));
                }
                if std::mem::replace(&mut seen[p], true) {
                    return Err(Error::Config(format!(
                        "slot {}: port {} selected twice",
                        k + 1,
                        p + 1
                    )));
                }
            }
        }
        Ok(Self {
            n_ports,
            n_chains,
            slots,
        })
    }

    pub fn n_ports(&self) -> usize {
        self.n_ports
    }

    pub fn n_chains(&self) -> usize {
        self.n_chains
    }

    pub fn n_slots(&self) -> usize {
        self.slots.len()
    }

    /// Ports selected in slot `k`, in RF-chain order.
    pub fn slot_ports(&self, k: usize) -> &[usize] {
        &self.slots[k]
    }

    /// The set `Ω_k` of ports selected in slot `k`, ascending.
    pub fn selected_ports(&self, k: usize) -> Vec<usize> {
        let mut ports = self.slots[k].clone();
        ports.sort_unstable();
        ports
    }

    pub fn switch_matrix(&self, k: usize) -> SwitchMatrix {
        let mut s = DMatrix::zeros(self.n_chains, self.n_ports);
        for (m, &p) in self.slots[k].iter().enumerate() {
            s[(m, p)] = 1;
        }
        s
    }

    /// Checks every slot; on failure returns the 1-based slot and its violation.
    pub fn validate(
        &self,
        geometry: &ArrayGeometry,
        enforce_spacing: bool,
    ) -> Result<(), (usize, Violation)> {
        (0..self.n_slots()).try_for_each(|k| {
            validate_switch_matrix(&self.switch_matrix(k), geometry, enforce_spacing)
                .map_err(|v| (k + 1, v))
        })
    }

    pub fn stack(&self) -> StackedSelector {
        StackedSelector {
            n_ports: self.n_ports,
            rows: self.slots.iter().flatten().copied().collect(),
        }
    }

    /// One line per slot, 1-based port numbers separated by commas.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for ports in &self.slots {
            let line: Vec<String> = ports.iter().map(|p| (p + 1).to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str, n_ports: usize) -> Result<Self> {
        let mut slots = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let ports = line
                .split(',')
                .map(|s| match s.trim().parse::<usize>() {
                    Ok(p) if p >= 1 => Ok(p - 1),
                    _ => Err(Error::Config(format!(
                        "schedule line {}: bad port `{}`",
                        i + 1,
                        s.trim()
                    ))),
                })
                .collect::<Result<Vec<_>>>()?;
            slots.push(ports);
        }
        Self::new(n_ports, slots)
    }
}

/// Vertical stack of the slot switch matrices, stored as the port read by
/// each stacked row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StackedSelector {
    n_ports: usize,
    rows: Vec<usize>,
}

impl StackedSelector {
    pub fn n_ports(&self) -> usize {
        self.n_ports
    }

    /// Number of stacked rows, `K M`.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Port observed by each stacked row.
    pub fn row_ports(&self) -> &[usize] {
        &self.rows
    }

    pub fn matrix(&self) -> SwitchMatrix {
        let mut s = DMatrix::zeros(self.rows.len(), self.n_ports);
        for (r, &p) in self.rows.iter().enumerate() {
            s[(r, p)] = 1;
        }
        s
    }

    /// `S h`, a pure coordinate selection.
    pub fn apply(&self, h: &DVector<Complex64>) -> DVector<Complex64> {
        assert_eq!(
            h.len(),
            self.n_ports,
            "channel length must equal port count"
        );
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|&p| h[p]))
    }
}

/// Slot `k` uses ports `kM, ..., kM + M - 1`, wrapping modulo `N`.
pub fn sequential_schedule(
    n_ports: usize,
    n_chains: usize,
    n_slots: usize,
) -> Result<SwitchSchedule> {
    check_sizes(n_ports, n_chains, n_slots)?;
    let slots = (0..n_slots)
        .map(|k| {
            (0..n_chains)
                .map(|m| (k * n_chains + m) % n_ports)
                .collect()
        })
        .collect();
    SwitchSchedule::new(n_ports, slots)
}

/// Each slot draws its port set uniformly among all sets that satisfy the
/// rules (and the half-wavelength spacing when `enforce_spacing`).
pub fn random_schedule<R: Rng + ?Sized>(
    geometry: &ArrayGeometry,
    n_chains: usize,
    n_slots: usize,
    enforce_spacing: bool,
    rng: &mut R,
) -> Result<SwitchSchedule> {
    let n_ports = geometry.n_ports();
    check_sizes(n_ports, n_chains, n_slots)?;
    let gap = if enforce_spacing {
        geometry.min_decoupled_gap()
    } else {
        1
    };
    // Sets with consecutive gaps >= gap biject onto plain M-subsets of
    // N - (gap - 1)(M - 1) positions by shifting the i-th smallest by (gap - 1) i.
    let shrink = (gap - 1) * (n_chains - 1);
    if shrink + n_chains > n_ports {
        return Err(Error::Config(format!(
            "cannot place {n_chains} ports at least {gap} apart among {n_ports}"
        )));
    }
    let slots = (0..n_slots)
        .map(|_| {
            let mut picked = index::sample(rng, n_ports - shrink, n_chains).into_vec();
            picked.sort_unstable();
            picked
                .into_iter()
                .enumerate()
                .map(|(i, p)| p + (gap - 1) * i)
                .collect()
        })
        .collect();
    SwitchSchedule::new(n_ports, slots)
}

fn check_sizes(n_ports: usize, n_chains: usize, n_slots: usize) -> Result<()> {
    if n_chains == 0 || n_slots == 0 {
        return Err(Error::Config(
            "need at least one RF chain and one slot".into(),
        ));
    }
    if n_chains > n_ports {
        return Err(Error::Config(format!(
            "{n_chains} RF chains exceed {n_ports} ports"
        )));
    }
    Ok(())
}
